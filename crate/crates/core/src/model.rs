//! The implicit-feedback matrix factorization objective.
//!
//! For counts `r_ui`, preference `p_ui = [r_ui > 0]` and confidence
//! `c_ui = 1 + α·r_ui`, the objective is
//!
//! ```text
//! J = Σ_u Σ_i c_ui (p_ui − x_uᵀ y_i)² + λ (Σ_u ‖x_u‖² + Σ_i ‖y_i‖²)
//! ```
//!
//! summed over every (user, item) pair. Unobserved pairs have `c = 1`,
//! `p = 0`; their contribution is folded in through the Gram matrix of the
//! opposite factor, so every routine here costs `O(nnz·k + k²·(N + M))`.

use crate::error::{Error, Result};
use crate::factors::{axpy, dot, FactorMatrix};
use crate::interactions::InteractionStore;
use crate::params::HyperParams;

/// `c = 1 + α·r`.
#[inline]
pub fn confidence(r: f64, alpha: f64) -> f64 {
    1.0 + alpha * r
}

/// Binarized preference, 1 for any positive count.
#[inline]
pub fn preference(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn predict(x_u: &[f64], y_i: &[f64]) -> Result<f64> {
    if x_u.len() != y_i.len() {
        return Err(Error::DimensionMismatch {
            context: "predict",
            expected: x_u.len(),
            actual: y_i.len(),
        });
    }
    Ok(dot(x_u, y_i))
}

pub(crate) fn check_shapes(
    x: &FactorMatrix,
    y: &FactorMatrix,
    interactions: &InteractionStore,
) -> Result<()> {
    if x.k() != y.k() {
        return Err(Error::DimensionMismatch {
            context: "latent dimension of X vs Y",
            expected: x.k(),
            actual: y.k(),
        });
    }
    if x.n_cols() != interactions.n_users() {
        return Err(Error::DimensionMismatch {
            context: "user factor columns",
            expected: interactions.n_users(),
            actual: x.n_cols(),
        });
    }
    if y.n_cols() != interactions.n_items() {
        return Err(Error::DimensionMismatch {
            context: "item factor columns",
            expected: interactions.n_items(),
            actual: y.n_cols(),
        });
    }
    Ok(())
}

pub fn cost(
    x: &FactorMatrix,
    y: &FactorMatrix,
    interactions: &InteractionStore,
    hp: &HyperParams,
) -> Result<f64> {
    check_shapes(x, y, interactions)?;
    let k = y.k();
    let gram = y.gram();
    let mut total = 0.0;
    for u in 0..interactions.n_users() {
        let xu = x.col(u);
        // Σ over all items of (x_uᵀ y_i)² = x_uᵀ (Y Yᵀ) x_u
        let mut all = 0.0;
        for a in 0..k {
            all += xu[a] * dot(&gram[a * k..(a + 1) * k], xu);
        }
        let mut observed = 0.0;
        for (i, r) in interactions.row(u) {
            let s = dot(xu, y.col(i as usize));
            let c = confidence(r as f64, hp.alpha);
            observed += c * (1.0 - s) * (1.0 - s) - s * s;
        }
        total += all + observed;
    }
    let norms: f64 = x.values().iter().chain(y.values()).map(|v| v * v).sum();
    Ok(total + hp.lambda * norms)
}

/// Gradient of `J` with respect to one factor vector `own`, given its
/// observed entries against the opposite factor matrix `other` and that
/// matrix's Gram matrix.
pub(crate) fn side_gradient(
    own: &[f64],
    entries: impl Iterator<Item = (u32, u32)>,
    other: &FactorMatrix,
    other_gram: &[f64],
    hp: &HyperParams,
) -> Vec<f64> {
    let k = own.len();
    // Σ_obs (c(1 − s) + s) v_j − G·own
    let mut acc = vec![0.0; k];
    for (j, r) in entries {
        let v = other.col(j as usize);
        let s = dot(own, v);
        let c = confidence(r as f64, hp.alpha);
        axpy(c * (1.0 - s) + s, v, &mut acc);
    }
    let mut grad = vec![0.0; k];
    for a in 0..k {
        let g_own = dot(&other_gram[a * k..(a + 1) * k], own);
        grad[a] = -2.0 * (acc[a] - g_own) + 2.0 * hp.lambda * own[a];
    }
    grad
}

/// `∂J/∂x_u`.
pub fn grad_x(
    u: usize,
    x: &FactorMatrix,
    y: &FactorMatrix,
    interactions: &InteractionStore,
    hp: &HyperParams,
) -> Result<Vec<f64>> {
    check_shapes(x, y, interactions)?;
    if u >= interactions.n_users() {
        return Err(Error::IndexOutOfRange {
            kind: "user",
            index: u,
            len: interactions.n_users(),
        });
    }
    Ok(side_gradient(
        x.col(u),
        interactions.row(u),
        y,
        &y.gram(),
        hp,
    ))
}

/// `∂J/∂y_i`.
pub fn grad_y(
    i: usize,
    x: &FactorMatrix,
    y: &FactorMatrix,
    interactions: &InteractionStore,
    hp: &HyperParams,
) -> Result<Vec<f64>> {
    check_shapes(x, y, interactions)?;
    if i >= interactions.n_items() {
        return Err(Error::IndexOutOfRange {
            kind: "item",
            index: i,
            len: interactions.n_items(),
        });
    }
    let column = item_column(interactions, i);
    Ok(side_gradient(
        y.col(i),
        column.into_iter(),
        x,
        &x.gram(),
        hp,
    ))
}

/// Full `∂J/∂Y`, one column per item.
pub fn grad_y_all(
    x: &FactorMatrix,
    y: &FactorMatrix,
    interactions: &InteractionStore,
    hp: &HyperParams,
) -> Result<FactorMatrix> {
    check_shapes(x, y, interactions)?;
    let by_item = interactions.transpose();
    let gram = x.gram();
    let mut out = FactorMatrix::zeros(y.k(), y.n_cols());
    for (i, col) in out.cols_mut().enumerate() {
        col.copy_from_slice(&side_gradient(y.col(i), by_item.row(i), x, &gram, hp));
    }
    Ok(out)
}

/// Users who interacted with item `i`, with their counts.
fn item_column(interactions: &InteractionStore, i: usize) -> Vec<(u32, u32)> {
    (0..interactions.n_users())
        .filter_map(|u| match interactions.get(u, i) {
            0 => None,
            r => Some((u as u32, r)),
        })
        .collect()
}
