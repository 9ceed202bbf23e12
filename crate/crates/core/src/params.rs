use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Server-side update rule for the item factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    PlainGd,
    Adam,
}

/// How the Adam moment estimates are de-biased.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasCorrection {
    /// `m̂ = m / (1 − β₁)`, `v̂ = v / (1 − β₂)` with no step exponent.
    #[default]
    Constant,
    /// Conventional `m̂ = m / (1 − β₁ᵗ)`, `v̂ = v / (1 − β₂ᵗ)`.
    TimeIndexed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Confidence weight in `c = 1 + α·r`.
    pub alpha: f64,
    /// L2 regularization on both factor matrices.
    pub lambda: f64,
    /// Latent dimension.
    pub k: usize,
    /// Server learning rate.
    pub gamma: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub gd_iters_per_epoch: usize,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub bias_correction: BiasCorrection,
    /// Initial factors are drawn from `U[0, init_scale / √k)`.
    pub init_scale: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            lambda: 1.0,
            k: 4,
            gamma: 0.05,
            beta1: 0.4,
            beta2: 0.99,
            epsilon: 1e-8,
            gd_iters_per_epoch: 20,
            epochs: 20,
            optimizer: Optimizer::PlainGd,
            bias_correction: BiasCorrection::Constant,
            init_scale: 1.0,
        }
    }
}

impl HyperParams {
    /// Adam with β₁ = 0.4, β₂ = 0.99 and γ = 0.2, the stable setting found
    /// for the federated item update.
    pub fn adam() -> Self {
        Self {
            optimizer: Optimizer::Adam,
            gamma: 0.2,
            beta1: 0.4,
            beta2: 0.99,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidHyperParams(msg));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if self.gd_iters_per_epoch == 0 {
            return bad("gd_iters_per_epoch must be >= 1".into());
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return bad(format!("init_scale must be > 0, got {}", self.init_scale));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let hp = HyperParams::default();
        assert_eq!((hp.alpha, hp.lambda, hp.gamma, hp.k), (1.0, 1.0, 0.05, 4));
        assert_eq!(hp.gd_iters_per_epoch, 20);
        hp.validate().unwrap();
        HyperParams::adam().validate().unwrap();
    }

    #[test]
    fn bounds_are_enforced() {
        let cases = [
            HyperParams {
                alpha: 0.0,
                ..Default::default()
            },
            HyperParams {
                lambda: -1.0,
                ..Default::default()
            },
            HyperParams {
                k: 0,
                ..Default::default()
            },
            HyperParams {
                gamma: 1.0,
                ..Default::default()
            },
            HyperParams {
                beta1: 1.0,
                ..Default::default()
            },
            HyperParams {
                beta2: 0.0,
                ..Default::default()
            },
            HyperParams {
                epsilon: 0.0,
                ..Default::default()
            },
            HyperParams {
                gd_iters_per_epoch: 0,
                ..Default::default()
            },
        ];
        for hp in cases {
            assert!(hp.validate().is_err(), "{hp:?}");
        }
    }
}
