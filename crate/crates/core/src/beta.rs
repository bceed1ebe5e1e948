//! Exact beta-binomial posterior math.
//!
//! With a Beta(1, 1) prior and binomial data every posterior has integer
//! shapes, so the regularized incomplete beta function can be evaluated
//! exactly through the identity
//!
//! ```text
//! I_t(a, b) = Pr(Binomial(a + b - 1, t) >= a)
//! ```
//!
//! The binomial tail is summed from its largest term outward using a ratio
//! recurrence, with the leading term computed in log space so that sample
//! sizes in the thousands neither underflow nor overflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Beta distribution with positive integer shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BetaParams {
    pub a: u32,
    pub b: u32,
}

impl BetaParams {
    pub fn new(a: u32, b: u32) -> Result<Self> {
        if a == 0 || b == 0 {
            return Err(Error::Domain(format!(
                "beta shapes must be >= 1, got ({a}, {b})"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn mean(&self) -> f64 {
        let (a, b) = (f64::from(self.a), f64::from(self.b));
        a / (a + b)
    }

    pub fn variance(&self) -> f64 {
        let (a, b) = (f64::from(self.a), f64::from(self.b));
        let s = a + b;
        a * b / (s * s * (s + 1.0))
    }
}

/// Observed toxicity data at one dose: `x` DLTs among `n` treated patients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DoseData {
    pub x: u32,
    pub n: u32,
}

impl DoseData {
    pub fn new(x: u32, n: u32) -> Result<Self> {
        if x > n {
            return Err(Error::InvalidCounts(format!(
                "DLT count {x} exceeds patients treated {n}"
            )));
        }
        Ok(Self { x, n })
    }

    /// Empirical toxicity rate `x / n`; `None` when no patient was treated.
    pub fn empirical_rate(&self) -> Option<f64> {
        (self.n > 0).then(|| f64::from(self.x) / f64::from(self.n))
    }
}

/// Beta(x + 1, n - x + 1): the Beta(1, 1) prior updated with `d`.
pub fn posterior(d: DoseData) -> BetaParams {
    debug_assert!(d.x <= d.n);
    BetaParams {
        a: d.x + 1,
        b: d.n - d.x + 1,
    }
}

pub fn posterior_mean(d: DoseData) -> f64 {
    posterior(d).mean()
}

pub fn posterior_variance(d: DoseData) -> f64 {
    posterior(d).variance()
}

/// Regularized incomplete beta `I_t(a, b)`, the Beta(a, b) CDF at `t`.
pub fn reg_inc_beta(t: f64, p: BetaParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t = {t} is outside [0, 1]")));
    }
    if p.a == 0 || p.b == 0 {
        return Err(Error::Domain("beta shapes must be >= 1".into()));
    }
    Ok(binomial_upper_tail(p.a, p.a + p.b - 1, t))
}

/// `Pr(Binomial(m, t) >= k)` for `1 <= k <= m`.
fn binomial_upper_tail(k: u32, m: u32, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let odds = t / (1.0 - t);
    if f64::from(k) > f64::from(m + 1) * t {
        // k sits above the mode: terms shrink as j grows.
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in k..m {
            term *= f64::from(m - j) / f64::from(j + 1) * odds;
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        (ln_binomial_term(m, k, t) + sum.ln()).exp().min(1.0)
    } else {
        // k - 1 sits below the mode: sum the lower tail downward and complement.
        let top = k - 1;
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in (1..=top).rev() {
            term *= f64::from(j) / f64::from(m - j + 1) / odds;
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        let lower = (ln_binomial_term(m, top, t) + sum.ln()).exp();
        (1.0 - lower).max(0.0)
    }
}

/// `ln[C(m, j) t^j (1 - t)^(m - j)]` for `0 < t < 1`.
fn ln_binomial_term(m: u32, j: u32, t: f64) -> f64 {
    let r = j.min(m - j);
    let ln_choose: f64 = (1..=r)
        .map(|i| (f64::from(m - r + i) / f64::from(i)).ln())
        .sum();
    ln_choose + f64::from(j) * t.ln() + f64::from(m - j) * (-t).ln_1p()
}

/// Posterior probability that the toxicity rate lies in `(lo, hi)`.
pub fn interval_mass(d: DoseData, lo: f64, hi: f64) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::Domain(format!(
            "interval bounds must satisfy lo < hi, got ({lo}, {hi})"
        )));
    }
    let p = posterior(d);
    let upper = reg_inc_beta(hi, p)?;
    let lower = reg_inc_beta(lo, p)?;
    Ok((upper - lower).max(0.0))
}

/// `Pr(p > p_T | data)`, the quantity screened by the safety rule.
pub fn prob_over_target(d: DoseData, p_t: f64) -> Result<f64> {
    Ok(1.0 - reg_inc_beta(p_t, posterior(d))?)
}
