//! Candidate toxicity-probability intervals.
//!
//! mTPI uses three intervals: below, inside and above the equivalence
//! interval `(p_T - eps1, p_T + eps2)`. mTPI-2 keeps the equivalence
//! interval and tiles both flanks with intervals of the same width
//! `delta = eps1 + eps2`, stepping outward from it. When a flank is not a
//! multiple of `delta` a shorter leftover piece touches 0 or 1.

use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::Result;
use crate::params::{DesignParams, LeftoverPolicy, Variant};

/// Bounds closer than this are treated as coincident when tiling.
const SNAP: f64 = 1e-9;

/// Dosing action attached to an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    E,
    S,
    D,
}

impl Action {
    fn for_tier(tier: i32) -> Self {
        match tier.signum() {
            -1 => Action::E,
            0 => Action::S,
            _ => Action::D,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::E => "E",
            Action::S => "S",
            Action::D => "D",
        })
    }
}

/// One candidate model: the toxicity probability lies in `[lo, hi)`.
///
/// `tier` is 0 for the equivalence interval, `-k` for the k-th interval
/// below it and `+k` for the k-th interval above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub tier: i32,
    pub action: Action,
    #[serde(skip)]
    pub nominal_length: f64,
    #[serde(skip)]
    pub actual_length: f64,
    #[serde(skip)]
    pub leftover: bool,
}

impl Interval {
    fn new(lo: f64, hi: f64, tier: i32, nominal_length: f64, leftover: bool) -> Self {
        debug_assert!(lo < hi, "empty interval ({lo}, {hi})");
        Self {
            lo,
            hi,
            tier,
            action: Action::for_tier(tier),
            nominal_length,
            actual_length: hi - lo,
            leftover,
        }
    }

    pub fn is_equivalence(&self) -> bool {
        self.tier == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalPartition {
    pub intervals: Vec<Interval>,
    pub params: DesignParams,
}

impl Serialize for IntervalPartition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("IntervalPartition", 2)?;
        s.serialize_field("intervals", &self.intervals)?;
        s.serialize_field("delta", &self.params.delta())?;
        s.end()
    }
}

impl IntervalPartition {
    /// Partition for the design variant named in `params`.
    pub fn for_params(params: &DesignParams) -> Result<Self> {
        match params.variant {
            Variant::Mtpi => mtpi_partition(params),
            Variant::Mtpi2 => mtpi2_partition(params),
        }
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.intervals.iter()
    }

    /// Index of the tier-0 interval.
    pub fn equivalence_index(&self) -> usize {
        self.intervals
            .iter()
            .position(Interval::is_equivalence)
            .expect("every partition holds the equivalence interval")
    }
}

/// The three intervals of mTPI.
pub fn mtpi_partition(params: &DesignParams) -> Result<IntervalPartition> {
    params.validate()?;
    let (lo, hi) = params.equivalence_interval();
    let delta = params.delta();
    Ok(IntervalPartition {
        intervals: vec![
            Interval::new(0.0, lo, -1, delta, false),
            Interval::new(lo, hi, 0, delta, false),
            Interval::new(hi, 1.0, 1, delta, false),
        ],
        params: params.clone(),
    })
}

/// The equal-width grid of mTPI-2.
pub fn mtpi2_partition(params: &DesignParams) -> Result<IntervalPartition> {
    params.validate()?;
    let (ei_lo, ei_hi) = params.equivalence_interval();
    let delta = params.delta();
    let keep_leftover =
        |full: usize| params.leftover_policy == LeftoverPolicy::Include || full == 0;

    let mut below = Vec::new();
    let full = (ei_lo / delta + SNAP).floor() as usize;
    let rest = ei_lo - full as f64 * delta;
    for k in 1..=full {
        let hi = ei_lo - (k - 1) as f64 * delta;
        let lo = if k == full && rest <= SNAP {
            0.0
        } else {
            ei_lo - k as f64 * delta
        };
        below.push(Interval::new(lo, hi, -(k as i32), delta, false));
    }
    if rest > SNAP && keep_leftover(full) {
        below.push(Interval::new(0.0, rest, -(full as i32 + 1), delta, true));
    }

    let mut above = Vec::new();
    let room = 1.0 - ei_hi;
    let full = (room / delta + SNAP).floor() as usize;
    let rest = room - full as f64 * delta;
    for k in 1..=full {
        let lo = ei_hi + (k - 1) as f64 * delta;
        let hi = if k == full && rest <= SNAP {
            1.0
        } else {
            ei_hi + k as f64 * delta
        };
        above.push(Interval::new(lo, hi, k as i32, delta, false));
    }
    if rest > SNAP && keep_leftover(full) {
        let lo = ei_hi + full as f64 * delta;
        above.push(Interval::new(lo, 1.0, full as i32 + 1, delta, true));
    }

    let mut intervals: Vec<Interval> = below.into_iter().rev().collect();
    intervals.push(Interval::new(ei_lo, ei_hi, 0, delta, false));
    intervals.extend(above);
    Ok(IntervalPartition {
        intervals,
        params: params.clone(),
    })
}

/// 0-1 loss over the candidate set: zero on the diagonal, one elsewhere.
/// Rows index the selected interval, columns the true one.
pub fn loss_matrix(partition: &IntervalPartition) -> Vec<Vec<u8>> {
    let k = partition.len();
    (0..k)
        .map(|i| (0..k).map(|j| u8::from(i != j)).collect())
        .collect()
}
