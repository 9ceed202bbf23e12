//! Centralized alternating least squares.
//!
//! Each half-step solves the `k × k` normal equations
//! `(V Cᵘ Vᵀ + λI) w = V Cᵘ p(u)` for every column `w` on one side, with `V`
//! the opposite factor matrix held fixed. `V Cᵘ Vᵀ` is assembled as
//! `V Vᵀ + Σ_obs (c − 1) v vᵀ`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::{axpy, init_factors, FactorMatrix};
use crate::interactions::InteractionStore;
use crate::model::{check_shapes, confidence, cost, preference};
use crate::params::HyperParams;

/// Solves the regularized weighted least-squares problem for one factor
/// vector given its observed entries against `other`.
pub(crate) fn solve_side(
    entries: impl Iterator<Item = (u32, u32)>,
    other: &FactorMatrix,
    other_gram: &[f64],
    hp: &HyperParams,
    context: impl FnOnce() -> String,
) -> Result<Vec<f64>> {
    let k = other.k();
    let mut a = other_gram.to_vec();
    let mut b = vec![0.0; k];
    for (j, r) in entries {
        let v = other.col(j as usize);
        let c = confidence(r as f64, hp.alpha);
        for p in 0..k {
            let w = (c - 1.0) * v[p];
            for q in 0..k {
                a[p * k + q] += w * v[q];
            }
        }
        axpy(c * preference(r as f64), v, &mut b);
    }
    for p in 0..k {
        a[p * k + p] += hp.lambda;
    }
    solve_spd(k, a, b).ok_or_else(|| Error::SingularSystem {
        context: context(),
        k,
    })
}

/// Cholesky when the system is positive definite, otherwise a fully pivoted
/// LU that reports (near-)singularity as `None`.
fn solve_spd(k: usize, a: Vec<f64>, b: Vec<f64>) -> Option<Vec<f64>> {
    let a = DMatrix::from_row_slice(k, k, &a);
    let b = DVector::from_vec(b);
    if let Some(chol) = a.clone().cholesky() {
        // a rank-deficient matrix can still factor with a roundoff-sized pivot
        let pivots = chol.l_dirty().diagonal().map(|d| d * d);
        if pivots.min() > 1e-12 * pivots.max() {
            return Some(chol.solve(&b).iter().copied().collect());
        }
    }
    let lu = a.full_piv_lu();
    let diag = lu.u().diagonal();
    let max = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let min = diag.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
    if max == 0.0 || min <= 1e-12 * max {
        return None;
    }
    lu.solve(&b).map(|x| x.iter().copied().collect())
}

/// Closed-form optimum of user `u`'s factor with `Y` fixed.
pub fn solve_user_factor(
    u: usize,
    y: &FactorMatrix,
    interactions: &InteractionStore,
    hp: &HyperParams,
) -> Result<Vec<f64>> {
    if u >= interactions.n_users() {
        return Err(Error::IndexOutOfRange {
            kind: "user",
            index: u,
            len: interactions.n_users(),
        });
    }
    if y.n_cols() != interactions.n_items() {
        return Err(Error::DimensionMismatch {
            context: "item factor columns",
            expected: interactions.n_items(),
            actual: y.n_cols(),
        });
    }
    solve_side(interactions.row(u), y, &y.gram(), hp, || {
        format!("user {u}")
    })
}

/// Closed-form optimum of item `i`'s factor with `X` fixed.
pub fn solve_item_factor(
    i: usize,
    x: &FactorMatrix,
    interactions: &InteractionStore,
    hp: &HyperParams,
) -> Result<Vec<f64>> {
    if i >= interactions.n_items() {
        return Err(Error::IndexOutOfRange {
            kind: "item",
            index: i,
            len: interactions.n_items(),
        });
    }
    if x.n_cols() != interactions.n_users() {
        return Err(Error::DimensionMismatch {
            context: "user factor columns",
            expected: interactions.n_users(),
            actual: x.n_cols(),
        });
    }
    let column: Vec<(u32, u32)> = (0..interactions.n_users())
        .filter_map(|u| match interactions.get(u, i) {
            0 => None,
            r => Some((u as u32, r)),
        })
        .collect();
    solve_side(column.into_iter(), x, &x.gram(), hp, || format!("item {i}"))
}

/// Recomputes every column of `target` from its rows in `by_row` against
/// `other`. Columns are independent, so the parallel result is bit-identical
/// to a sequential pass.
pub(crate) fn solve_all(
    by_row: &InteractionStore,
    other: &FactorMatrix,
    target: &mut FactorMatrix,
    hp: &HyperParams,
    kind: &'static str,
) -> Result<()> {
    let gram = other.gram();
    let solved: Vec<Result<Vec<f64>>> = (0..by_row.n_users())
        .into_par_iter()
        .map(|j| solve_side(by_row.row(j), other, &gram, hp, || format!("{kind} {j}")))
        .collect();
    for (col, w) in target.cols_mut().zip(solved) {
        col.copy_from_slice(&w?);
    }
    Ok(())
}

/// A fitted (or initialized) centralized model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfModel {
    pub x: FactorMatrix,
    pub y: FactorMatrix,
    pub hp: HyperParams,
    pub epoch: usize,
}

/// Stepwise ALS driver. [`fit`] runs it to completion; tests and experiments
/// drive the half-steps directly.
pub struct AlsSolver<'a> {
    interactions: &'a InteractionStore,
    by_item: InteractionStore,
    model: CfModel,
}

impl<'a> AlsSolver<'a> {
    pub fn new(
        interactions: &'a InteractionStore,
        hp: &HyperParams,
        init_seed: u64,
    ) -> Result<Self> {
        hp.validate()?;
        let (x, y) = init_factors(
            hp.k,
            interactions.n_users(),
            interactions.n_items(),
            hp.init_scale,
            init_seed,
        );
        Self::from_factors(interactions, hp, x, y)
    }

    pub fn from_factors(
        interactions: &'a InteractionStore,
        hp: &HyperParams,
        x: FactorMatrix,
        y: FactorMatrix,
    ) -> Result<Self> {
        check_shapes(&x, &y, interactions)?;
        Ok(Self {
            interactions,
            by_item: interactions.transpose(),
            model: CfModel {
                x,
                y,
                hp: hp.clone(),
                epoch: 0,
            },
        })
    }

    pub fn update_users(&mut self) -> Result<()> {
        let m = &mut self.model;
        solve_all(self.interactions, &m.y, &mut m.x, &m.hp, "user")
    }

    pub fn update_items(&mut self) -> Result<()> {
        let m = &mut self.model;
        solve_all(&self.by_item, &m.x, &mut m.y, &m.hp, "item")
    }

    /// One epoch: all user updates, then all item updates.
    pub fn epoch(&mut self) -> Result<()> {
        self.update_users()?;
        self.update_items()?;
        self.model.epoch += 1;
        Ok(())
    }

    pub fn cost(&self) -> Result<f64> {
        cost(
            &self.model.x,
            &self.model.y,
            self.interactions,
            &self.model.hp,
        )
    }

    pub fn model(&self) -> &CfModel {
        &self.model
    }

    pub fn into_model(self) -> CfModel {
        self.model
    }
}

/// Result of [`fit`]: the model, `J` after each epoch, and `Y` after each
/// epoch (the per-epoch reference for federated convergence traces).
#[derive(Debug, Clone)]
pub struct AlsFit {
    pub model: CfModel,
    pub cost_trace: Vec<f64>,
    pub item_snapshots: Vec<FactorMatrix>,
}

pub fn fit(interactions: &InteractionStore, hp: &HyperParams, init_seed: u64) -> Result<AlsFit> {
    let mut solver = AlsSolver::new(interactions, hp, init_seed)?;
    let mut cost_trace = Vec::with_capacity(hp.epochs);
    let mut item_snapshots = Vec::with_capacity(hp.epochs);
    for _ in 0..hp.epochs {
        solver.epoch()?;
        cost_trace.push(solver.cost()?);
        item_snapshots.push(solver.model().y.clone());
    }
    Ok(AlsFit {
        model: solver.into_model(),
        cost_trace,
        item_snapshots,
    })
}
