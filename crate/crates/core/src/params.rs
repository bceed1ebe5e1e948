//! Design parameters shared by every computation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};

/// Which interval design drives the decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "mtpi", alias = "mTPI")]
    Mtpi,
    #[serde(rename = "mtpi2", alias = "mTPI-2", alias = "mtpi-2")]
    Mtpi2,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Mtpi, Variant::Mtpi2];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Mtpi => "mtpi",
            Variant::Mtpi2 => "mtpi2",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mtpi" => Ok(Variant::Mtpi),
            "mtpi2" | "mtpi-2" => Ok(Variant::Mtpi2),
            other => Err(Error::InvalidParams(vec![FieldError::new(
                "variant",
                format!("unknown design '{other}' (expected mtpi or mtpi2)"),
            )])),
        }
    }
}

/// Treatment of boundary intervals shorter than the nominal width in the
/// mTPI-2 grid.
///
/// `Exclude` drops a short leftover piece from the candidate set unless it is
/// the only interval on its side of the equivalence interval; `Include` keeps
/// every leftover with its true length.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeftoverPolicy {
    #[default]
    Exclude,
    Include,
}

impl FromStr for LeftoverPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exclude" => Ok(LeftoverPolicy::Exclude),
            "include" => Ok(LeftoverPolicy::Include),
            other => Err(Error::InvalidParams(vec![FieldError::new(
                "leftover_policy",
                format!("unknown policy '{other}' (expected exclude or include)"),
            )])),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    /// Target toxicity probability.
    #[serde(rename = "p_T", alias = "p_t")]
    pub p_t: f64,
    #[serde(default = "default_eps")]
    pub eps1: f64,
    #[serde(default = "default_eps")]
    pub eps2: f64,
    /// Exclusion / stopping threshold on `Pr(p > p_T | data)`.
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub leftover_policy: LeftoverPolicy,
    pub max_n: u32,
    #[serde(default = "default_cohort_size")]
    pub cohort_size: u32,
    /// 1-based starting dose.
    #[serde(default = "default_start_dose")]
    pub start_dose: usize,
}

fn default_eps() -> f64 {
    0.05
}
fn default_xi() -> f64 {
    0.95
}
fn default_variant() -> Variant {
    Variant::Mtpi2
}
fn default_cohort_size() -> u32 {
    3
}
fn default_start_dose() -> usize {
    1
}

impl DesignParams {
    /// Running defaults: eps1 = eps2 = 0.05, xi = 0.95, cohorts of 3, mTPI-2.
    pub fn new(p_t: f64, max_n: u32) -> Self {
        Self {
            p_t,
            eps1: default_eps(),
            eps2: default_eps(),
            xi: default_xi(),
            variant: default_variant(),
            leftover_policy: LeftoverPolicy::default(),
            max_n,
            cohort_size: default_cohort_size(),
            start_dose: default_start_dose(),
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_eps(mut self, eps1: f64, eps2: f64) -> Self {
        self.eps1 = eps1;
        self.eps2 = eps2;
        self
    }

    pub fn with_leftover_policy(mut self, policy: LeftoverPolicy) -> Self {
        self.leftover_policy = policy;
        self
    }

    pub fn with_cohort_size(mut self, cohort_size: u32) -> Self {
        self.cohort_size = cohort_size;
        self
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }

    /// Nominal interval width of the mTPI-2 grid.
    pub fn delta(&self) -> f64 {
        self.eps1 + self.eps2
    }

    /// Equivalence interval bounds.
    pub fn equivalence_interval(&self) -> (f64, f64) {
        (self.p_t - self.eps1, self.p_t + self.eps2)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let finite = |v: f64| v.is_finite();
        if !finite(self.p_t) || self.p_t <= 0.0 || self.p_t >= 1.0 {
            errs.push(FieldError::new("p_T", "must lie strictly between 0 and 1"));
        }
        if !finite(self.eps1) || self.eps1 <= 0.0 {
            errs.push(FieldError::new("eps1", "must be positive"));
        }
        if !finite(self.eps2) || self.eps2 <= 0.0 {
            errs.push(FieldError::new("eps2", "must be positive"));
        }
        if errs.is_empty() {
            if self.p_t - self.eps1 <= 0.0 {
                errs.push(FieldError::new("eps1", "p_T - eps1 must be positive"));
            }
            if self.p_t + self.eps2 >= 1.0 {
                errs.push(FieldError::new("eps2", "p_T + eps2 must be below 1"));
            }
        }
        if !finite(self.xi) || self.xi <= 0.5 || self.xi >= 1.0 {
            errs.push(FieldError::new("xi", "must lie strictly between 0.5 and 1"));
        }
        if self.max_n == 0 {
            errs.push(FieldError::new("max_n", "must be at least 1"));
        }
        if self.cohort_size == 0 {
            errs.push(FieldError::new("cohort_size", "must be at least 1"));
        }
        if self.start_dose == 0 {
            errs.push(FieldError::new("start_dose", "doses are numbered from 1"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errs))
        }
    }
}
