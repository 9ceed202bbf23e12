//! Top-k recommendation quality.
//!
//! Definitions, all computed per user and averaged over users with at least
//! one test positive:
//!
//! * precision@k = hits / k
//! * recall@k = hits / |test positives|
//! * F1 = harmonic mean of the two (0 when both are 0)
//! * AP@k = Σ_{hit ranks j ≤ k} precision@j / min(|test positives|, k)
//!
//! Candidates exclude the user's train and validation items; ties in score
//! are broken by ascending item index.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::als::CfModel;
use crate::data::DatasetBundle;
use crate::error::{Error, Result};
use crate::factors::{dot, FactorMatrix};
use crate::server::FederatedModel;

/// Anything that scores `(user, item)` pairs through latent factors.
pub trait Recommender {
    fn user_factors(&self) -> &FactorMatrix;
    fn item_factors(&self) -> &FactorMatrix;

    fn score(&self, u: usize, i: usize) -> f64 {
        dot(self.user_factors().col(u), self.item_factors().col(i))
    }
}

impl Recommender for CfModel {
    fn user_factors(&self) -> &FactorMatrix {
        &self.x
    }
    fn item_factors(&self) -> &FactorMatrix {
        &self.y
    }
}

impl Recommender for FederatedModel {
    fn user_factors(&self) -> &FactorMatrix {
        &self.x
    }
    fn item_factors(&self) -> &FactorMatrix {
        &self.y
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopK {
    pub items: Vec<u32>,
    /// Fewer than `k` candidates were available.
    pub short: bool,
}

/// The `k` best-scoring items for user `u` outside `excluded`.
pub fn top_k<R: Recommender + ?Sized>(model: &R, u: usize, k: usize, excluded: &[u32]) -> TopK {
    let n_items = model.item_factors().n_cols();
    let mut mask = vec![false; n_items];
    for &i in excluded {
        if let Some(m) = mask.get_mut(i as usize) {
            *m = true;
        }
    }
    let mut scored: Vec<(f64, u32)> = (0..n_items)
        .filter(|&i| !mask[i])
        .map(|i| (model.score(u, i), i as u32))
        .collect();
    let order = |a: &(f64, u32), b: &(f64, u32)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    let short = scored.len() < k;
    if !short && k < scored.len() {
        scored.select_nth_unstable_by(k, order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(order);
    TopK {
        items: scored.into_iter().map(|(_, i)| i).collect(),
        short,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub map: f64,
    pub users_evaluated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct UserScores {
    precision: f64,
    recall: f64,
    f1: f64,
    ap: f64,
}

fn score_user(ranked: &[u32], positives: &[u32], k: usize) -> UserScores {
    let mut hits = 0usize;
    let mut ap = 0.0;
    for (rank, item) in ranked.iter().take(k).enumerate() {
        if positives.binary_search(item).is_ok() {
            hits += 1;
            ap += hits as f64 / (rank + 1) as f64;
        }
    }
    let precision = hits as f64 / k as f64;
    let recall = hits as f64 / positives.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    UserScores {
        precision,
        recall,
        f1,
        ap: ap / positives.len().min(k) as f64,
    }
}

/// Sorted union of a user's train and validation items.
pub(crate) fn known_items(bundle: &DatasetBundle, u: usize) -> Vec<u32> {
    let mut known: Vec<u32> = bundle
        .train
        .row_items(u)
        .iter()
        .chain(bundle.valid.row_items(u))
        .copied()
        .collect();
    known.sort_unstable();
    known
}

pub fn ranking_metrics<R: Recommender + Sync + ?Sized>(
    bundle: &DatasetBundle,
    model: &R,
    k: usize,
) -> RankingMetrics {
    assert!(k >= 1, "k must be positive");
    let per_user: Vec<UserScores> = (0..bundle.test.n_users())
        .into_par_iter()
        .filter(|&u| bundle.test.row_len(u) > 0)
        .map(|u| {
            let ranked = top_k(model, u, k, &known_items(bundle, u));
            score_user(&ranked.items, bundle.test.row_items(u), k)
        })
        .collect();
    let n = per_user.len();
    let mean = |f: fn(&UserScores) -> f64| {
        if n == 0 {
            0.0
        } else {
            pairwise_sum(&per_user.iter().map(f).collect::<Vec<_>>()) / n as f64
        }
    };
    RankingMetrics {
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        f1: mean(|s| s.f1),
        map: mean(|s| s.ap),
        users_evaluated: n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub rmse: f64,
    pub n_targets: usize,
    /// Users with test positives but no never-observed items to sample.
    pub users_without_negatives: usize,
}

/// RMSE of `x_uᵀ y_i` against the binary target over every test positive
/// (target 1) plus, per user, `negative_sample_rate × |test positives|`
/// never-observed items (target 0) drawn without replacement.
pub fn rmse<R: Recommender + ?Sized>(
    bundle: &DatasetBundle,
    model: &R,
    negative_sample_rate: usize,
    seed: u64,
) -> RmseReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_items = bundle.test.n_items();
    let mut sq = Vec::new();
    let mut users_without_negatives = 0;
    for u in 0..bundle.test.n_users() {
        let positives = bundle.test.row_items(u);
        if positives.is_empty() {
            continue;
        }
        for &i in positives {
            let e = model.score(u, i as usize) - 1.0;
            sq.push(e * e);
        }
        let mut seen = known_items(bundle, u);
        seen.extend_from_slice(positives);
        seen.sort_unstable();
        let unseen: Vec<u32> = (0..n_items as u32)
            .filter(|i| seen.binary_search(i).is_err())
            .collect();
        if unseen.is_empty() {
            users_without_negatives += 1;
            continue;
        }
        let wanted = (negative_sample_rate * positives.len()).min(unseen.len());
        for pick in index::sample(&mut rng, unseen.len(), wanted) {
            let s = model.score(u, unseen[pick] as usize);
            sq.push(s * s);
        }
    }
    let n_targets = sq.len();
    let rmse = if n_targets == 0 {
        0.0
    } else {
        (pairwise_sum(&sq) / n_targets as f64).sqrt()
    };
    RmseReport {
        rmse,
        n_targets,
        users_without_negatives,
    }
}

/// `|(a − b) / b| · 100` with `b` the reference.
pub fn diff_percent(mean_a: f64, mean_b: f64) -> Result<f64> {
    if mean_b == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(((mean_a - mean_b) / mean_b).abs() * 100.0)
}

/// Order-fixed pairwise summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interactions::InteractionStore;
    use crate::params::HyperParams;

    fn model(x: Vec<f64>, y: Vec<f64>, k: usize) -> CfModel {
        let n = x.len() / k;
        let m = y.len() / k;
        CfModel {
            x: FactorMatrix::from_values(k, n, x).unwrap(),
            y: FactorMatrix::from_values(k, m, y).unwrap(),
            hp: HyperParams {
                k,
                ..Default::default()
            },
            epoch: 0,
        }
    }

    #[test]
    fn dominant_column_ranks_first() {
        let m = model(vec![1.0], vec![0.1, 0.2, 5.0, 0.3], 1);
        assert_eq!(top_k(&m, 0, 2, &[]).items, vec![2, 3]);
        assert_eq!(top_k(&m, 0, 2, &[2]).items, vec![3, 1]);
    }

    #[test]
    fn ties_break_by_item_index() {
        let m = model(vec![0.0], vec![1.0; 15], 1);
        let t = top_k(&m, 0, 10, &[3]);
        assert_eq!(t.items, vec![0, 1, 2, 4, 5, 6, 7, 8, 9, 10]);
        assert!(!t.short);
        let t = top_k(&m, 0, 20, &[]);
        assert_eq!(t.items.len(), 15);
        assert!(t.short);
    }

    #[test]
    fn diff_percent_examples() {
        assert!((diff_percent(0.2993, 0.3008).unwrap() - 0.4987).abs() < 5e-5);
        assert!((diff_percent(0.134, 0.1342).unwrap() - 0.149).abs() < 5e-4);
        assert_eq!(diff_percent(0.5, 0.5).unwrap(), 0.0);
        assert!(matches!(diff_percent(0.5, 0.0), Err(Error::ZeroReference)));
    }

    #[test]
    fn user_scores_by_hand() {
        // hits at ranks 1, 3 and 4 out of 3 positives, k = 4
        let s = score_user(&[5, 1, 7, 2], &[2, 5, 7], 4);
        assert_eq!(s.precision, 0.75);
        assert_eq!(s.recall, 1.0);
        assert!((s.ap - (1.0 + 2.0 / 3.0 + 3.0 / 4.0) / 3.0).abs() < 1e-15);
        let miss = score_user(&[0, 1], &[9], 2);
        assert_eq!(
            (miss.precision, miss.recall, miss.f1, miss.ap),
            (0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn rmse_of_zero_model_is_root_half() {
        let train = InteractionStore::from_rows(2, 6, vec![vec![(0, 1)], vec![(1, 1)]]).unwrap();
        let valid = InteractionStore::from_rows(2, 6, vec![vec![], vec![]]).unwrap();
        let test =
            InteractionStore::from_rows(2, 6, vec![vec![(2, 1), (3, 1)], vec![(4, 1)]]).unwrap();
        let bundle = DatasetBundle {
            train,
            valid,
            test,
            undersized_users: vec![],
        };
        let m = model(vec![0.0; 2], vec![0.0; 6], 1);
        let r = rmse(&bundle, &m, 1, 3);
        assert!((r.rmse - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.n_targets, 6);
        assert_eq!(r.users_without_negatives, 0);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_inputs() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&xs), xs.iter().sum::<f64>());
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
