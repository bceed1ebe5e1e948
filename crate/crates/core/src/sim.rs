//! Monte Carlo operating characteristics.
//!
//! Each simulated trial draws patient outcomes from its own ChaCha stream
//! keyed by `(seed, trial_index)`, so results do not depend on how trials are
//! scheduled across threads. A patient experiences a DLT when their uniform
//! draw falls below the true toxicity of the assigned dose; a cohort's DLT
//! count is therefore Binomial(cohort size, true toxicity).
//!
//! The true MTD is the dose whose true toxicity is closest to `p_T` among
//! doses with toxicity at most `p_T + eps2`; ties go to the higher dose
//! below target and the lower dose above it. When even the lowest dose
//! exceeds `p_T + eps2` there is no true MTD, and selecting nothing is the
//! correct answer.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conduct::{TrialState, TrialStatus};
use crate::decision::{decision_table, DecisionRule};
use crate::error::{Error, FieldError, Result};
use crate::params::{DesignParams, Variant};

pub const TRUE_MTD_RULE: &str =
    "true MTD = dose with true toxicity closest to p_T among doses with \
true toxicity <= p_T + eps2 (ties: highest below p_T, lowest above); none if the lowest dose \
exceeds p_T + eps2. Trials selecting no dose count as correct only when there is no true MTD.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    #[serde(rename = "p_T", alias = "p_t")]
    pub p_t: f64,
    pub true_tox: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohort_size: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_n: Option<u32>,
}

impl Scenario {
    pub fn new(label: impl Into<String>, p_t: f64, true_tox: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            p_t,
            true_tox,
            eps1: None,
            eps2: None,
            xi: None,
            cohort_size: None,
            max_n: None,
        }
    }

    /// Design parameters for `variant`, with unset fields taken from `config`.
    pub fn design(&self, variant: Variant, config: &SimConfig) -> Result<DesignParams> {
        let mut p = DesignParams::new(self.p_t, self.max_n.unwrap_or(config.max_n))
            .with_variant(variant)
            .with_cohort_size(self.cohort_size.unwrap_or(config.cohort_size));
        p.eps1 = self.eps1.unwrap_or(p.eps1);
        p.eps2 = self.eps2.unwrap_or(p.eps2);
        p.xi = self.xi.unwrap_or(p.xi);
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.true_tox.is_empty() {
            errs.push(FieldError::new("true_tox", "needs at least one dose"));
        }
        if self.true_tox.iter().any(|p| !(0.0..=1.0).contains(p)) {
            errs.push(FieldError::new(
                "true_tox",
                "probabilities must lie in [0, 1]",
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errs))
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.true_tox.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Parses a scenario file, naming the offending record on failure.
pub fn parse_scenarios(json: &str) -> Result<Vec<Scenario>> {
    let records: Vec<serde_json::Value> =
        serde_json::from_str(json).map_err(|e| Error::Scenario {
            index: 0,
            label: None,
            message: format!("expected a JSON array of scenarios: {e}"),
        })?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let label = v.get("label").and_then(|l| l.as_str()).map(str::to_owned);
            let fail = |message: String| Error::Scenario {
                index: i,
                label: label.clone(),
                message,
            };
            let s: Scenario = serde_json::from_value(v.clone()).map_err(|e| fail(e.to_string()))?;
            s.validate().map_err(|e| fail(e.to_string()))?;
            Ok(s)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_trials: u32,
    pub seed: u64,
    #[serde(default = "default_cohort")]
    pub cohort_size: u32,
    #[serde(default = "default_max_n")]
    pub max_n: u32,
    #[serde(default = "default_designs")]
    pub designs: Vec<Variant>,
}

fn default_cohort() -> u32 {
    3
}
fn default_max_n() -> u32 {
    30
}
fn default_designs() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

impl SimConfig {
    pub fn new(n_trials: u32, seed: u64) -> Self {
        Self {
            n_trials,
            seed,
            cohort_size: default_cohort(),
            max_n: default_max_n(),
            designs: default_designs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.n_trials == 0 {
            errs.push(FieldError::new("n_trials", "must be at least 1"));
        }
        if self.designs.is_empty() {
            errs.push(FieldError::new("designs", "name at least one design"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errs))
        }
    }
}

/// The dose that a perfect design would select, 1-based.
pub fn true_mtd(scenario: &Scenario, eps2: f64) -> Option<usize> {
    let limit = scenario.p_t + eps2;
    let mut best: Option<(usize, f64)> = None;
    for (i, &p) in scenario.true_tox.iter().enumerate() {
        if p > limit {
            continue;
        }
        let dist = (p - scenario.p_t).abs();
        best = match best {
            None => Some((i, dist)),
            Some((_, bd)) if dist < bd - 1e-12 => Some((i, dist)),
            // Equal distance: the higher dose at or below target, else keep the lower.
            Some((_, bd)) if dist <= bd + 1e-12 && p <= scenario.p_t => Some((i, dist)),
            keep => keep,
        };
    }
    best.map(|(i, _)| i + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub dose_path: Vec<usize>,
    pub final_state: TrialState,
    pub selected_mtd: Option<usize>,
}

fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Runs one trial against the scenario's true toxicity curve.
pub fn simulate_trial<R: DecisionRule + ?Sized>(
    scenario: &Scenario,
    rule: &R,
    trial_index: u64,
    seed: u64,
) -> Result<TrialResult> {
    let params = rule.params();
    let mut rng = trial_rng(seed, trial_index);
    let mut state = TrialState::new(scenario.true_tox.len(), params)?;
    let mut dose_path = Vec::new();
    while state.status == TrialStatus::Active {
        let dose = state.current_dose;
        dose_path.push(dose);
        let n = params.cohort_size.min(params.max_n - state.total_enrolled);
        let p = scenario.true_tox[dose - 1];
        let dlts = (0..n).filter(|_| rng.random::<f64>() < p).count() as u32;
        state = state.advance(dlts, n, rule)?.0;
    }
    let selected_mtd = state.select_mtd(params)?.selected_dose;
    Ok(TrialResult {
        dose_path,
        final_state: state,
        selected_mtd,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcReport {
    pub label: String,
    pub design: Variant,
    #[serde(rename = "p_T")]
    pub p_t: f64,
    pub true_tox: Vec<f64>,
    pub true_mtd: Option<usize>,
    pub true_mtd_rule: String,
    pub n_trials: u32,
    pub seed: u64,
    /// Fraction of trials selecting each dose.
    pub selection_freq: Vec<f64>,
    pub none_rate: f64,
    /// Fraction of all simulated patients treated at each dose.
    pub allocation: Vec<f64>,
    pub reliability: f64,
    pub safety: f64,
    pub stop_toxicity_rate: f64,
    pub mean_sample_size: f64,
}

/// Per-trial summary reduced into a report.
struct TrialTally {
    selected: Option<usize>,
    per_dose: Vec<u32>,
    stopped: bool,
}

fn summarize(
    scenario: &Scenario,
    params: &DesignParams,
    config: &SimConfig,
    tallies: &[TrialTally],
) -> OcReport {
    let k = scenario.true_tox.len();
    let truth = true_mtd(scenario, params.eps2);
    let trials = tallies.len() as f64;
    let mut selections = vec![0u64; k];
    let mut none = 0u64;
    let mut patients = vec![0u64; k];
    let mut correct = 0u64;
    let mut safety_sum = 0.0;
    let mut stops = 0u64;
    for t in tallies {
        match t.selected {
            Some(d) => selections[d - 1] += 1,
            None => none += 1,
        }
        if t.selected == truth {
            correct += 1;
        }
        let total: u32 = t.per_dose.iter().sum();
        let safe: u32 = match truth {
            Some(m) => t.per_dose[..m].iter().sum(),
            None => 0,
        };
        safety_sum += f64::from(safe) / f64::from(total);
        for (acc, &n) in patients.iter_mut().zip(&t.per_dose) {
            *acc += u64::from(n);
        }
        stops += u64::from(t.stopped);
    }
    let all_patients: u64 = patients.iter().sum();
    OcReport {
        label: scenario.label.clone(),
        design: params.variant,
        p_t: scenario.p_t,
        true_tox: scenario.true_tox.clone(),
        true_mtd: truth,
        true_mtd_rule: TRUE_MTD_RULE.to_owned(),
        n_trials: config.n_trials,
        seed: config.seed,
        selection_freq: selections.iter().map(|&c| c as f64 / trials).collect(),
        none_rate: none as f64 / trials,
        allocation: patients
            .iter()
            .map(|&c| c as f64 / all_patients as f64)
            .collect(),
        reliability: correct as f64 / trials,
        safety: safety_sum / trials,
        stop_toxicity_rate: stops as f64 / trials,
        mean_sample_size: all_patients as f64 / trials,
    }
}

/// Operating characteristics for every scenario and design, scenario-major.
pub fn run_study(scenarios: &[Scenario], config: &SimConfig) -> Result<Vec<OcReport>> {
    config.validate()?;
    let mut reports = Vec::with_capacity(scenarios.len() * config.designs.len());
    for scenario in scenarios {
        scenario.validate()?;
        for &variant in &config.designs {
            let params = scenario.design(variant, config)?;
            let table = decision_table(&params)?;
            let tallies = (0..u64::from(config.n_trials))
                .into_par_iter()
                .map(|i| {
                    let r = simulate_trial(scenario, &table, i, config.seed)?;
                    Ok(TrialTally {
                        selected: r.selected_mtd,
                        per_dose: r.final_state.doses.iter().map(|d| d.n).collect(),
                        stopped: r.final_state.status == TrialStatus::StoppedToxicity,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            reports.push(summarize(scenario, &params, config, &tallies));
        }
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDelta {
    pub label: String,
    #[serde(rename = "p_T")]
    pub p_t: f64,
    pub reliability_delta: f64,
    pub safety_delta: f64,
}

/// Five-number summary plus mean, as drawn in a boxplot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles; `values` must be non-empty.
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub design_a: Variant,
    pub design_b: Variant,
    /// Per-scenario `b - a`.
    pub deltas: Vec<ScenarioDelta>,
    pub reliability: Quantiles,
    pub safety: Quantiles,
    /// The same summaries grouped by target toxicity, keyed by `p_T` as text.
    pub by_target: BTreeMap<String, (Quantiles, Quantiles)>,
}

/// Paired differences `b - a` across matching scenarios.
pub fn compare_designs(a: &[OcReport], b: &[OcReport]) -> Result<Comparison> {
    let labels = |r: &[OcReport]| r.iter().map(|x| x.label.clone()).collect::<Vec<_>>();
    if labels(a) != labels(b) {
        return Err(Error::Mismatch("reports cover different scenarios".into()));
    }
    if a.is_empty() {
        return Err(Error::Mismatch("no scenarios to compare".into()));
    }
    let deltas: Vec<ScenarioDelta> = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ScenarioDelta {
            label: ra.label.clone(),
            p_t: ra.p_t,
            reliability_delta: rb.reliability - ra.reliability,
            safety_delta: rb.safety - ra.safety,
        })
        .collect();
    let mut groups: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for d in &deltas {
        let g = groups.entry(format!("{}", d.p_t)).or_default();
        g.0.push(d.reliability_delta);
        g.1.push(d.safety_delta);
    }
    let rel: Vec<f64> = deltas.iter().map(|d| d.reliability_delta).collect();
    let saf: Vec<f64> = deltas.iter().map(|d| d.safety_delta).collect();
    Ok(Comparison {
        design_a: a[0].design,
        design_b: b[0].design,
        reliability: Quantiles::of(&rel),
        safety: Quantiles::of(&saf),
        by_target: groups
            .into_iter()
            .map(|(k, (r, s))| (k, (Quantiles::of(&r), Quantiles::of(&s))))
            .collect(),
        deltas,
    })
}

/// Splits scenario-major reports into one list per design.
pub fn reports_by_design(reports: &[OcReport]) -> BTreeMap<Variant, Vec<OcReport>> {
    let mut out: BTreeMap<Variant, Vec<OcReport>> = BTreeMap::new();
    for r in reports {
        out.entry(r.design).or_default().push(r.clone());
    }
    out
}

/// Ten monotone scenarios spanning p_T in {0.1, 0.2, 0.3}; cohorts of 3, 30 patients.
pub fn reference_suite() -> Vec<Scenario> {
    let s = |label: &str, p_t: f64, tox: &[f64]| Scenario::new(label, p_t, tox.to_vec());
    vec![
        s("pt30-mid", 0.3, &[0.05, 0.10, 0.20, 0.30, 0.45, 0.60]),
        s("pt30-first-toxic", 0.3, &[0.30, 0.40, 0.50, 0.60, 0.70]),
        s("pt30-all-low", 0.3, &[0.02, 0.05, 0.08, 0.12, 0.18, 0.25]),
        s("pt30-steep", 0.3, &[0.10, 0.25, 0.35, 0.50, 0.65]),
        s("pt20-mid", 0.2, &[0.05, 0.10, 0.20, 0.35, 0.50]),
        s("pt20-early", 0.2, &[0.10, 0.20, 0.30, 0.40, 0.50]),
        s("pt20-late", 0.2, &[0.02, 0.04, 0.08, 0.12, 0.20, 0.30]),
        s("pt10-mid", 0.1, &[0.02, 0.05, 0.10, 0.20, 0.30]),
        s("pt10-early", 0.1, &[0.10, 0.18, 0.28, 0.40, 0.55]),
        s("pt10-late", 0.1, &[0.01, 0.03, 0.06, 0.10, 0.15]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn true_mtd_examples() {
        let sc = |tox: &[f64]| Scenario::new("t", 0.3, tox.to_vec());
        assert_eq!(true_mtd(&sc(&[0.05, 0.10, 0.30, 0.50]), 0.05), Some(3));
        assert_eq!(true_mtd(&sc(&[0.60, 0.70]), 0.05), None);
        assert_eq!(true_mtd(&sc(&[0.10, 0.20]), 0.05), Some(2));
        // 0.25 and 0.35 are equidistant: keep the dose below target.
        assert_eq!(true_mtd(&sc(&[0.25, 0.35]), 0.05), Some(1));
        assert_eq!(true_mtd(&sc(&[0.1, 0.1]), 0.05), Some(2));
    }

    #[test]
    fn quantiles() {
        let q = Quantiles::of(&[3.0, 1.0, 2.0, 4.0, 5.0]);
        assert_eq!(
            (q.min, q.q1, q.median, q.q3, q.max, q.mean),
            (1.0, 2.0, 3.0, 4.0, 5.0, 3.0)
        );
    }

    #[test]
    fn scenario_errors_name_the_record() {
        let json = r#"[{"label":"ok","p_T":0.3,"true_tox":[0.1]},
                       {"label":"bad","p_T":0.3,"true_tox":[1.4]}]"#;
        let err = parse_scenarios(json).unwrap_err().to_string();
        assert!(err.contains("record 1") && err.contains("bad"), "{err}");
        let err = parse_scenarios(r#"[{"label":"x","true_tox":[0.1]}]"#).unwrap_err();
        assert!(err.to_string().contains("p_T"), "{err}");
    }
}
