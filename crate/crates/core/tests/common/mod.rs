//! Independent numerical oracles shared by the integration tests.
//!
//! Nothing here calls into the incomplete beta implementation.

#![allow(dead_code)]

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// `ln Gamma(k)` for positive integer `k` via an explicit log-factorial sum.
fn ln_gamma_int(k: u32) -> f64 {
    (1..k).map(|i| f64::from(i).ln()).sum()
}

/// Beta(a, b) density for integer shapes.
pub fn beta_pdf(t: f64, a: u32, b: u32) -> f64 {
    let ln_b = ln_gamma_int(a) + ln_gamma_int(b) - ln_gamma_int(a + b);
    beta_pdf_with(t, a, b, ln_b)
}

fn beta_pdf_with(t: f64, a: u32, b: u32, ln_b: f64) -> f64 {
    if t <= 0.0 {
        return if a == 1 { f64::from(b) } else { 0.0 };
    }
    if t >= 1.0 {
        return if b == 1 { f64::from(a) } else { 0.0 };
    }
    (f64::from(a - 1) * t.ln() + f64::from(b - 1) * (1.0 - t).ln() - ln_b).exp()
}

/// Beta(a, b) CDF on a grid `0, h, 2h, ..., 1` by summing adaptive quadratures
/// over consecutive grid cells.
pub fn beta_cdf_grid(a: u32, b: u32, steps: usize, tol: f64) -> Vec<f64> {
    let h = 1.0 / steps as f64;
    let ln_b = ln_gamma_int(a) + ln_gamma_int(b) - ln_gamma_int(a + b);
    let f = |t: f64| beta_pdf_with(t, a, b, ln_b);
    let mut out = Vec::with_capacity(steps + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..steps {
        let lo = i as f64 * h;
        let hi = if i + 1 == steps {
            1.0
        } else {
            (i + 1) as f64 * h
        };
        acc += adaptive_simpson(&f, lo, hi, tol);
        out.push(acc);
    }
    out
}

/// Posterior probability of each interval under the truncated-uniform prior
/// with equal model weights, by direct quadrature of the likelihood.
pub fn model_probs_by_quadrature(x: u32, n: u32, bounds: &[(f64, f64)]) -> Vec<f64> {
    let (a, b) = (x + 1, n - x + 1);
    let ln_b = ln_gamma_int(a) + ln_gamma_int(b) - ln_gamma_int(a + b);
    let f = |t: f64| beta_pdf_with(t, a, b, ln_b);
    let marginals: Vec<f64> = bounds
        .iter()
        .map(|&(lo, hi)| adaptive_simpson(&f, lo, hi, 1e-13) / (hi - lo))
        .collect();
    let total: f64 = marginals.iter().sum();
    marginals.into_iter().map(|m| m / total).collect()
}

/// Index minimizing expected 0-1 loss; near-ties go to the later interval.
pub fn argmin_expected_loss(probs: &[f64]) -> usize {
    let k = probs.len();
    let losses: Vec<f64> = (0..k)
        .map(|a| (0..k).filter(|&j| j != a).map(|j| probs[j]).sum())
        .collect();
    let mut best = 0;
    for i in 1..k {
        if losses[i] <= losses[best] + 1e-12 {
            best = i;
        }
    }
    best
}
