//! Optimal interval decisions, the safety overlay, Bayes factors and
//! precalculated decision tables.
//!
//! Under a truncated Beta(1, 1) prior on each interval and equal prior
//! weight on every interval, the posterior probability of interval `M_i` is
//! proportional to its unit probability mass (UPM): posterior mass divided
//! by interval length. Selecting the interval with the largest UPM
//! therefore minimizes posterior expected 0-1 loss, and the interval's
//! action (E below, S inside, D above the equivalence interval) is the
//! optimal dosing decision.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta::{interval_mass, prob_over_target, DoseData};
use crate::error::{Error, Result};
use crate::params::{DesignParams, Variant};
use crate::partition::{Action, Interval, IntervalPartition};

/// Dosing decision. `U` de-escalates and removes the current and all higher
/// doses from the trial; some renderers print it as "DU".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Decision {
    E,
    S,
    D,
    U,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::E => "E",
            Decision::S => "S",
            Decision::D => "D",
            Decision::U => "U",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<Action> for Decision {
    fn from(a: Action) -> Self {
        match a {
            Action::E => Decision::E,
            Action::S => Decision::S,
            Action::D => Decision::D,
        }
    }
}

/// Posterior mass of the interval divided by its length.
pub fn upm(interval: &Interval, d: DoseData) -> Result<f64> {
    Ok(interval_mass(d, interval.lo, interval.hi)? / interval.actual_length)
}

fn upms(partition: &IntervalPartition, d: DoseData) -> Result<Vec<f64>> {
    partition.iter().map(|i| upm(i, d)).collect()
}

/// Posterior probability of each candidate interval.
pub fn posterior_model_probs(partition: &IntervalPartition, d: DoseData) -> Result<Vec<f64>> {
    Ok(normalize(upms(partition, d)?))
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|p| *p /= total);
    v
}

/// Relative UPM difference below which two intervals count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Index of the largest value; ties go to the later (higher-tier) interval,
/// so D beats S beats E.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v >= values[best] * (1.0 - TIE_TOLERANCE) {
            best = i;
        }
    }
    best
}

/// Index of the interval with the largest UPM.
pub fn winning_index(partition: &IntervalPartition, d: DoseData) -> Result<usize> {
    Ok(argmax(&upms(partition, d)?))
}

/// `sum_j loss(action, j) * Pr(M_j | data)`.
pub fn posterior_expected_loss(
    action_index: usize,
    partition: &IntervalPartition,
    d: DoseData,
    loss: &[Vec<u8>],
) -> Result<f64> {
    let probs = posterior_model_probs(partition, d)?;
    Ok(expected_loss(action_index, &probs, loss))
}

/// Expected loss of selecting `action_index` under model probabilities `probs`.
pub fn expected_loss(action_index: usize, probs: &[f64], loss: &[Vec<u8>]) -> f64 {
    loss[action_index]
        .iter()
        .zip(probs)
        .map(|(&l, &p)| f64::from(l) * p)
        .sum()
}

/// Turns `base` into `U` when `Pr(p > p_T | data) > xi`.
pub fn apply_safety_rule(base: Decision, d: DoseData, params: &DesignParams) -> Result<Decision> {
    if d.n == 0 {
        return Err(Error::NoData);
    }
    if prob_over_target(d, params.p_t)? > params.xi {
        Ok(Decision::U)
    } else {
        Ok(base)
    }
}

fn require_data(d: DoseData) -> Result<()> {
    if d.x > d.n {
        return Err(Error::InvalidCounts(format!(
            "DLT count {} exceeds patients treated {}",
            d.x, d.n
        )));
    }
    if d.n == 0 {
        return Err(Error::NoData);
    }
    Ok(())
}

/// Evidence behind one decision, computed in a single pass.
#[derive(Debug, Clone)]
struct Evaluation {
    upms: Vec<f64>,
    winner: usize,
    decision: Decision,
}

fn evaluate(partition: &IntervalPartition, d: DoseData) -> Result<Evaluation> {
    require_data(d)?;
    let params = &partition.params;
    let upms = upms(partition, d)?;
    let winner = argmax(&upms);
    let base = Decision::from(partition.intervals[winner].action);
    let decision = match params.variant {
        // mTPI only screens for safety when it is already de-escalating.
        Variant::Mtpi if base != Decision::D => base,
        _ => apply_safety_rule(base, d, params)?,
    };
    Ok(Evaluation {
        upms,
        winner,
        decision,
    })
}

fn bayes_factor_from(partition: &IntervalPartition, upms: &[f64], winner: usize) -> f64 {
    let ei = partition.equivalence_index();
    if winner != ei {
        upms[winner] / upms[ei]
    } else {
        let challenger = upms
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != ei)
            .map(|(_, &u)| u)
            .fold(f64::NEG_INFINITY, f64::max);
        upms[ei] / challenger
    }
}

pub fn decide_mtpi(d: DoseData, params: &DesignParams) -> Result<Decision> {
    let params = params.clone().with_variant(Variant::Mtpi);
    let partition = IntervalPartition::for_params(&params)?;
    Ok(evaluate(&partition, d)?.decision)
}

pub fn decide_mtpi2(d: DoseData, params: &DesignParams) -> Result<Decision> {
    let params = params.clone().with_variant(Variant::Mtpi2);
    let partition = IntervalPartition::for_params(&params)?;
    Ok(evaluate(&partition, d)?.decision)
}

/// Decision under the variant named in `params`.
pub fn decide(d: DoseData, params: &DesignParams) -> Result<Decision> {
    match params.variant {
        Variant::Mtpi => decide_mtpi(d, params),
        Variant::Mtpi2 => decide_mtpi2(d, params),
    }
}

/// Bayes factor reported next to a decision: the winning interval against
/// the equivalence interval, or, when the equivalence interval wins, against
/// its strongest challenger. `None` for `U` cells.
pub fn bayes_factor(d: DoseData, params: &DesignParams) -> Result<Option<f64>> {
    let partition = IntervalPartition::for_params(params)?;
    let eval = evaluate(&partition, d)?;
    if eval.decision == Decision::U {
        return Ok(None);
    }
    Ok(Some(bayes_factor_from(&partition, &eval.upms, eval.winner)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionCell {
    pub x: u32,
    pub n: u32,
    pub decision: Decision,
    pub bayes_factor: Option<f64>,
    pub winning_tier: i32,
    pub posterior_model_probs: Vec<f64>,
}

fn cell_from(partition: &IntervalPartition, d: DoseData) -> Result<DecisionCell> {
    let eval = evaluate(partition, d)?;
    let bayes_factor = (eval.decision != Decision::U)
        .then(|| bayes_factor_from(partition, &eval.upms, eval.winner));
    Ok(DecisionCell {
        x: d.x,
        n: d.n,
        decision: eval.decision,
        bayes_factor,
        winning_tier: partition.intervals[eval.winner].tier,
        posterior_model_probs: normalize(eval.upms),
    })
}

pub fn decision_cell(d: DoseData, params: &DesignParams) -> Result<DecisionCell> {
    cell_from(&IntervalPartition::for_params(params)?, d)
}

/// Every decision for `0 <= x <= n`, `1 <= n <= max_n`.
///
/// Cells are stored by `n` then `x`; use [`DecisionTable::get`] for lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTable {
    pub params: DesignParams,
    pub cells: Vec<DecisionCell>,
}

fn cell_offset(x: u32, n: u32) -> usize {
    let n = n as usize;
    (n - 1) * (n + 2) / 2 + x as usize
}

impl DecisionTable {
    pub fn get(&self, x: u32, n: u32) -> Option<&DecisionCell> {
        if n == 0 || x > n || n > self.params.max_n {
            return None;
        }
        self.cells.get(cell_offset(x, n))
    }

    pub fn variant(&self) -> Variant {
        self.params.variant
    }
}

pub fn decision_table(params: &DesignParams) -> Result<DecisionTable> {
    let partition = IntervalPartition::for_params(params)?;
    let coords: Vec<DoseData> = (1..=params.max_n)
        .flat_map(|n| (0..=n).map(move |x| DoseData { x, n }))
        .collect();
    let cells = coords
        .par_iter()
        .map(|&d| cell_from(&partition, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(DecisionTable {
        params: params.clone(),
        cells,
    })
}

/// A cell whose decision differs between two tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEntry {
    pub x: u32,
    pub n: u32,
    pub from: Decision,
    pub to: Decision,
    /// `x / n - p_T`
    pub empirical_gap: f64,
}

impl DiffEntry {
    /// Change class such as `S->D`.
    pub fn class(&self) -> String {
        format!("{}->{}", self.from, self.to)
    }
}

pub fn table_diff(a: &DecisionTable, b: &DecisionTable) -> Result<Vec<DiffEntry>> {
    let (pa, pb) = (&a.params, &b.params);
    let mut mismatched = Vec::new();
    if pa.p_t != pb.p_t {
        mismatched.push("p_T");
    }
    if pa.eps1 != pb.eps1 || pa.eps2 != pb.eps2 {
        mismatched.push("eps");
    }
    if pa.xi != pb.xi {
        mismatched.push("xi");
    }
    if pa.max_n != pb.max_n {
        mismatched.push("max_n");
    }
    if !mismatched.is_empty() {
        return Err(Error::Mismatch(format!(
            "tables differ in {}",
            mismatched.join(", ")
        )));
    }
    Ok(a.cells
        .iter()
        .zip(&b.cells)
        .filter(|(ca, cb)| ca.decision != cb.decision)
        .map(|(ca, cb)| DiffEntry {
            x: ca.x,
            n: ca.n,
            from: ca.decision,
            to: cb.decision,
            empirical_gap: f64::from(ca.x) / f64::from(ca.n) - pa.p_t,
        })
        .collect())
}

/// Count of diff entries per change class.
pub fn diff_summary(diff: &[DiffEntry]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for e in diff {
        *counts.entry(e.class()).or_insert(0) += 1;
    }
    counts
}

/// Source of dosing decisions for trial conduct.
pub trait DecisionRule: Sync {
    fn params(&self) -> &DesignParams;
    fn decide(&self, d: DoseData) -> Result<Decision>;
}

impl DecisionRule for DesignParams {
    fn params(&self) -> &DesignParams {
        self
    }

    fn decide(&self, d: DoseData) -> Result<Decision> {
        decide(d, self)
    }
}

impl DecisionRule for DecisionTable {
    fn params(&self) -> &DesignParams {
        &self.params
    }

    fn decide(&self, d: DoseData) -> Result<Decision> {
        match self.get(d.x, d.n) {
            Some(cell) => Ok(cell.decision),
            None => decide(d, &self.params),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalEvidence {
    pub lo: f64,
    pub hi: f64,
    pub tier: i32,
    pub action: Action,
    pub upm: f64,
    pub posterior_prob: f64,
}

/// Everything a user needs to read one decision: the decision, its Bayes
/// factor and the posterior of every candidate interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionCard {
    pub x: u32,
    pub n: u32,
    pub variant: Variant,
    pub decision: Decision,
    pub bayes_factor: Option<f64>,
    pub winning_tier: i32,
    pub prob_over_target: f64,
    pub intervals: Vec<IntervalEvidence>,
}

pub fn decision_card(d: DoseData, params: &DesignParams) -> Result<DecisionCard> {
    let partition = IntervalPartition::for_params(params)?;
    let eval = evaluate(&partition, d)?;
    let bayes_factor = (eval.decision != Decision::U)
        .then(|| bayes_factor_from(&partition, &eval.upms, eval.winner));
    let probs = normalize(eval.upms.clone());
    let intervals = partition
        .iter()
        .zip(eval.upms.iter().zip(&probs))
        .map(|(i, (&upm, &posterior_prob))| IntervalEvidence {
            lo: i.lo,
            hi: i.hi,
            tier: i.tier,
            action: i.action,
            upm,
            posterior_prob,
        })
        .collect();
    Ok(DecisionCard {
        x: d.x,
        n: d.n,
        variant: params.variant,
        decision: eval.decision,
        bayes_factor,
        winning_tier: partition.intervals[eval.winner].tier,
        prob_over_target: prob_over_target(d, params.p_t)?,
        intervals,
    })
}
