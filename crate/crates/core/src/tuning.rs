//! Grid search over the centralized model's hyper-parameters.

use serde::{Deserialize, Serialize};

use crate::als::fit;
use crate::data::DatasetBundle;
use crate::error::Result;
use crate::eval::ranking_metrics;
use crate::interactions::InteractionStore;
use crate::params::HyperParams;

pub const GRID_K: [usize; 3] = [2, 3, 4];
pub const GRID_ALPHA: [f64; 3] = [1.0, 3.0, 5.0];
pub const GRID_LAMBDA: [f64; 3] = [1.0, 3.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub k: usize,
    pub alpha: f64,
    pub lambda: f64,
    /// Validation F1@k.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: GridPoint,
    pub evaluated: Vec<GridPoint>,
}

impl GridResult {
    pub fn apply(&self, hp: &HyperParams) -> HyperParams {
        HyperParams {
            k: self.best.k,
            alpha: self.best.alpha,
            lambda: self.best.lambda,
            ..hp.clone()
        }
    }
}

/// Fits the centralized model on `bundle.train` for every grid point and
/// scores top-`top_k` F1 against `bundle.valid`. Earlier grid points win ties.
pub fn grid_search(
    bundle: &DatasetBundle,
    base: &HyperParams,
    top_k: usize,
    init_seed: u64,
) -> Result<GridResult> {
    let empty = InteractionStore::from_rows(
        bundle.train.n_users(),
        bundle.train.n_items(),
        vec![Vec::new(); bundle.train.n_users()],
    )?;
    let holdout = DatasetBundle {
        train: bundle.train.clone(),
        valid: empty,
        test: bundle.valid.clone(),
        undersized_users: bundle.undersized_users.clone(),
    };
    let mut evaluated = Vec::new();
    for k in GRID_K {
        for alpha in GRID_ALPHA {
            for lambda in GRID_LAMBDA {
                let hp = HyperParams {
                    k,
                    alpha,
                    lambda,
                    ..base.clone()
                };
                let model = fit(&bundle.train, &hp, init_seed)?.model;
                let score = ranking_metrics(&holdout, &model, top_k).f1;
                log::info!("grid k={k} alpha={alpha} lambda={lambda}: validation f1 {score:.5}");
                evaluated.push(GridPoint {
                    k,
                    alpha,
                    lambda,
                    score,
                });
            }
        }
    }
    let best = evaluated
        .iter()
        .copied()
        .fold(None::<GridPoint>, |best, p| match best {
            Some(b) if b.score >= p.score => Some(b),
            _ => Some(p),
        })
        .expect("grid is non-empty");
    Ok(GridResult { best, evaluated })
}
