#![allow(dead_code)]

use fedcf::{FactorMatrix, HyperParams, InteractionStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub r: InteractionStore,
    pub x: FactorMatrix,
    pub y: FactorMatrix,
    pub hp: HyperParams,
}

/// Random sparse counts in `1..=3` with roughly `density` fill, factors in
/// `[-1, 1)`.
pub fn random_instance(
    seed: u64,
    n: usize,
    m: usize,
    k: usize,
    density: f64,
    alpha: f64,
    lambda: f64,
) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            (0..m as u32)
                .filter_map(|i| {
                    rng.random_bool(density)
                        .then(|| (i, rng.random_range(1..=3)))
                })
                .collect()
        })
        .collect();
    let r = InteractionStore::from_rows(n, m, rows).unwrap();
    let mut mat = |cols: usize| {
        let v = (0..k * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        FactorMatrix::from_values(k, cols, v).unwrap()
    };
    let x = mat(n);
    let y = mat(m);
    let hp = HyperParams {
        k,
        alpha,
        lambda,
        ..Default::default()
    };
    Instance { r, x, y, hp }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

pub fn conf_pref(r: u32, alpha: f64) -> (f64, f64) {
    (1.0 + alpha * r as f64, if r > 0 { 1.0 } else { 0.0 })
}

/// The objective summed over the full dense grid.
pub fn dense_cost(inst: &Instance) -> f64 {
    dense_cost_at(&inst.x, &inst.y, &inst.r, &inst.hp)
}

pub fn dense_cost_at(
    x: &FactorMatrix,
    y: &FactorMatrix,
    r: &InteractionStore,
    hp: &HyperParams,
) -> f64 {
    let mut j = 0.0;
    for u in 0..r.n_users() {
        for i in 0..r.n_items() {
            let (c, p) = conf_pref(r.get(u, i), hp.alpha);
            let e = p - dot(x.col(u), y.col(i));
            j += c * e * e;
        }
    }
    let reg: f64 = x.values().iter().chain(y.values()).map(|v| v * v).sum();
    j + hp.lambda * reg
}

/// `∂J/∂y_i` as the dense sum over every user.
pub fn dense_grad_y(inst: &Instance, i: usize) -> Vec<f64> {
    let k = inst.hp.k;
    let mut g: Vec<f64> = inst
        .y
        .col(i)
        .iter()
        .map(|v| 2.0 * inst.hp.lambda * v)
        .collect();
    for u in 0..inst.r.n_users() {
        let (c, p) = conf_pref(inst.r.get(u, i), inst.hp.alpha);
        let e = p - dot(inst.x.col(u), inst.y.col(i));
        for a in 0..k {
            g[a] -= 2.0 * c * e * inst.x.col(u)[a];
        }
    }
    g
}

/// Solves `A w = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut w = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * w[c]).sum();
        w[row] = (b[row] - s) / a[row][row];
    }
    w
}

/// Normal equations over every item, with the full diagonal confidence
/// matrix: `(Σ_i c_ui y_i y_iᵀ + λI) x = Σ_i c_ui p_ui y_i`.
pub fn naive_user_solve(
    u: usize,
    y: &FactorMatrix,
    r: &InteractionStore,
    hp: &HyperParams,
) -> Vec<f64> {
    let k = y.k();
    let mut a = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    for i in 0..r.n_items() {
        let (c, p) = conf_pref(r.get(u, i), hp.alpha);
        let yi = y.col(i);
        for p_ in 0..k {
            for q in 0..k {
                a[p_][q] += c * yi[p_] * yi[q];
            }
            b[p_] += c * p * yi[p_];
        }
    }
    for (d, row) in a.iter_mut().enumerate() {
        row[d] += hp.lambda;
    }
    gauss_solve(a, b)
}

pub fn naive_item_solve(
    i: usize,
    x: &FactorMatrix,
    r: &InteractionStore,
    hp: &HyperParams,
) -> Vec<f64> {
    naive_user_solve(i, x, &r.transpose(), hp)
}

/// `‖a − b‖∞ / max(‖b‖∞, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    let scale = b.iter().fold(floor, |m, q| m.max(q.abs()));
    diff / scale
}
