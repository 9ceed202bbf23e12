//! Bayesian correlated t-test for paired scores from repeated random
//! splits.
//!
//! The posterior of the mean difference is a Student-t with `n − 1` degrees
//! of freedom, location `mean(d)` and scale `√((1/n + ρ/(1 − ρ)) · var(d))`,
//! where `var` is the unbiased sample variance and `ρ` the correlation
//! induced by overlapping training sets.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const DEFAULT_ROPE: f64 = 0.005;
pub const DEFAULT_RHO: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean_diff: f64,
    /// Mass below `−rope`: `b` is practically better.
    pub p_left: f64,
    pub p_rope: f64,
    /// Mass above `+rope`: `a` is practically better.
    pub p_right: f64,
    pub rope: f64,
}

/// A summary tagged with the metric it describes, as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRecord {
    pub metric: String,
    #[serde(flatten)]
    pub summary: PosteriorSummary,
}

pub fn bayes_correlated_ttest(
    scores_a: &[f64],
    scores_b: &[f64],
    rope: f64,
    rho: f64,
) -> Result<PosteriorSummary> {
    if scores_a.len() != scores_b.len() {
        return Err(Error::DimensionMismatch {
            context: "paired score lists",
            expected: scores_a.len(),
            actual: scores_b.len(),
        });
    }
    let n = scores_a.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    if !(rope >= 0.0) || !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidHyperParams(format!(
            "rope must be >= 0 and rho in [0, 1), got rope={rope}, rho={rho}"
        )));
    }
    let d: Vec<f64> = scores_a.iter().zip(scores_b).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);

    let point_mass = |at: f64| {
        let (p_left, p_rope, p_right) = if at < -rope {
            (1.0, 0.0, 0.0)
        } else if at > rope {
            (0.0, 0.0, 1.0)
        } else {
            (0.0, 1.0, 0.0)
        };
        PosteriorSummary {
            mean_diff: at,
            p_left,
            p_rope,
            p_right,
            rope,
        }
    };
    if var == 0.0 {
        return Ok(point_mass(mean));
    }

    let scale = ((1.0 / nf + rho / (1.0 - rho)) * var).sqrt();
    let posterior = StudentsT::new(mean, scale, nf - 1.0)
        .map_err(|e| Error::InvalidHyperParams(format!("posterior: {e}")))?;
    let p_left = posterior.cdf(-rope);
    let below_right = posterior.cdf(rope);
    Ok(PosteriorSummary {
        mean_diff: mean,
        p_left,
        p_rope: below_right - p_left,
        p_right: 1.0 - below_right,
        rope,
    })
}
