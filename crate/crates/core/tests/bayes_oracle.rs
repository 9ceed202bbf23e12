use fedcf::eval::{bayes_correlated_ttest, DEFAULT_RHO, DEFAULT_ROPE};

/// Mass of a location-scale Student-t on `[lo, hi]` by Simpson's rule in
/// `θ = atan(z)`, normalized against the whole line.
fn t_mass(loc: f64, scale: f64, nu: f64, lo: f64, hi: f64) -> f64 {
    let f = |theta: f64| {
        let z = theta.tan();
        (1.0 + z * z / nu).powf(-(nu + 1.0) / 2.0) * (1.0 + z * z)
    };
    let simpson = |a: f64, b: f64| {
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for j in 1..n {
            s += f(a + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let edge = std::f64::consts::FRAC_PI_2 - 1e-9;
    let to_theta = |x: f64| ((x - loc) / scale).atan().clamp(-edge, edge);
    simpson(to_theta(lo), to_theta(hi)) / simpson(-edge, edge)
}

#[test]
fn posterior_masses_match_quadrature() {
    let cases: [(&[f64], &[f64], f64); 3] = [
        (
            &[0.30, 0.31, 0.29, 0.32, 0.30],
            &[0.301, 0.305, 0.292, 0.317, 0.299],
            DEFAULT_RHO,
        ),
        (&[0.1, 0.2, 0.15, 0.12], &[0.09, 0.17, 0.16, 0.1], 0.5),
        (
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0],
            &[1.1, 1.9, 3.2, 3.8, 5.3, 5.7, 7.4, 7.6, 9.5, 9.5],
            0.0,
        ),
    ];
    for (a, b, rho) in cases {
        let n = a.len() as f64;
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let scale = ((1.0 / n + rho / (1.0 - rho)) * var).sqrt();
        let rope = DEFAULT_ROPE;
        let s = bayes_correlated_ttest(a, b, rope, rho).unwrap();
        let left = t_mass(mean, scale, n - 1.0, f64::NEG_INFINITY, -rope);
        let inside = t_mass(mean, scale, n - 1.0, -rope, rope);
        let right = t_mass(mean, scale, n - 1.0, rope, f64::INFINITY);
        assert!((s.mean_diff - mean).abs() < 1e-15);
        assert!((s.p_left - left).abs() < 1e-7, "{} vs {left}", s.p_left);
        assert!((s.p_rope - inside).abs() < 1e-7, "{} vs {inside}", s.p_rope);
        assert!((s.p_right - right).abs() < 1e-7, "{} vs {right}", s.p_right);
    }
}

#[test]
fn degenerate_and_invalid_inputs() {
    let s = bayes_correlated_ttest(&[0.5, 0.5], &[0.5, 0.5], 0.01, 0.2).unwrap();
    assert_eq!(s.p_rope, 1.0);
    let s = bayes_correlated_ttest(&[0.4, 0.4], &[0.5, 0.5], 0.01, 0.2).unwrap();
    assert_eq!(s.p_left, 1.0);
    assert!(bayes_correlated_ttest(&[0.1], &[0.2], 0.01, 0.2).is_err());
    assert!(bayes_correlated_ttest(&[0.1, 0.2], &[0.2], 0.01, 0.2).is_err());
    assert!(bayes_correlated_ttest(&[0.1, 0.2], &[0.2, 0.1], 0.01, 1.0).is_err());
}
