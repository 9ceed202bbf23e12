use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `k × n_cols` latent factor matrix stored column-major, so each
/// user or item vector is a contiguous slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorMatrix {
    k: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl FactorMatrix {
    pub fn zeros(k: usize, n_cols: usize) -> Self {
        assert!(k >= 1, "latent dimension must be positive");
        Self {
            k,
            n_cols,
            values: vec![0.0; k * n_cols],
        }
    }

    pub fn from_values(k: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidHyperParams("k must be >= 1".into()));
        }
        if values.len() != k * n_cols {
            return Err(Error::DimensionMismatch {
                context: "factor matrix values",
                expected: k * n_cols,
                actual: values.len(),
            });
        }
        Ok(Self { k, n_cols, values })
    }

    /// Entries drawn i.i.d. from `U[0, upper)`.
    pub fn random_uniform(k: usize, n_cols: usize, upper: f64, rng: &mut impl Rng) -> Self {
        let values = (0..k * n_cols)
            .map(|_| rng.random::<f64>() * upper)
            .collect();
        Self { k, n_cols, values }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.values[j * self.k..(j + 1) * self.k]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.k..(j + 1) * self.k]
    }

    pub fn cols(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.k)
    }

    pub fn cols_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        self.values.chunks_exact_mut(self.k)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.k == other.k && self.n_cols == other.n_cols
    }

    /// `Σ_j v_j v_jᵀ`, the `k × k` Gram matrix of the columns (row-major).
    pub fn gram(&self) -> Vec<f64> {
        let k = self.k;
        let mut g = vec![0.0; k * k];
        for v in self.cols() {
            for a in 0..k {
                let va = v[a];
                for b in a..k {
                    g[a * k + b] += va * v[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                g[a * k + b] = g[b * k + a];
            }
        }
        g
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Shared initialization for the centralized and federated solvers.
///
/// Draws `X` (k × n_users) then `Y` (k × n_items) from one ChaCha8 stream
/// seeded with `seed`; entries are i.i.d. `U[0, init_scale / √k)`.
pub fn init_factors(
    k: usize,
    n_users: usize,
    n_items: usize,
    init_scale: f64,
    seed: u64,
) -> (FactorMatrix, FactorMatrix) {
    let upper = init_scale / (k as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = FactorMatrix::random_uniform(k, n_users, upper, &mut rng);
    let y = FactorMatrix::random_uniform(k, n_items, upper, &mut rng);
    (x, y)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
