//! Live trial conduct: dose transitions, exclusion, stopping and MTD
//! selection.
//!
//! A [`TrialState`] is a value. Every transition takes `&self` and returns a
//! new state, so a trial can be rebuilt exactly by replaying its cohort log.
//! Doses are numbered from 1.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::beta::{posterior_mean, posterior_variance, prob_over_target, DoseData};
use crate::decision::{Decision, DecisionRule};
use crate::error::{Error, Result};
use crate::isotonic::pava;
use crate::params::DesignParams;

/// Minimum patients at a dose before the safety rules apply with cohorts of one.
const SINGLE_COHORT_GATE: u32 = 3;

/// Ties in `|p* - p_T|` closer than this are treated as exact.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Active,
    StoppedToxicity,
    Completed,
}

impl fmt::Display for TrialStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialStatus::Active => "active",
            TrialStatus::StoppedToxicity => "stopped_toxicity",
            TrialStatus::Completed => "completed",
        })
    }
}

/// One treated cohort and what the design made of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortEvent {
    pub dose: usize,
    pub dlt_count: u32,
    pub cohort_n: u32,
    pub decision: Option<Decision>,
    pub next_dose: Option<usize>,
    pub status: TrialStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialState {
    pub num_doses: usize,
    /// Tallies per dose; index 0 is dose 1.
    pub doses: Vec<DoseData>,
    pub current_dose: usize,
    pub excluded: BTreeSet<usize>,
    pub status: TrialStatus,
    pub total_enrolled: u32,
    pub event_log: Vec<CohortEvent>,
}

/// Where the next cohort goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextDose {
    pub action: Decision,
    pub dose: usize,
    /// Lowest dose removed by this decision; it and every higher dose leave the trial.
    pub exclude_from: Option<usize>,
    /// The lowest dose was found unacceptable.
    pub stop: bool,
}

/// Result of treating one cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortOutcome {
    pub dose: usize,
    pub data: DoseData,
    pub action: Decision,
    pub next_dose: usize,
    pub status: TrialStatus,
    pub excluded: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtdResult {
    pub selected_dose: Option<usize>,
    /// Isotonic posterior means per dose; `None` for doses outside the candidate set.
    pub transformed_means: Vec<Option<f64>>,
    pub rationale: Vec<String>,
}

impl TrialState {
    pub fn new(num_doses: usize, params: &DesignParams) -> Result<Self> {
        params.validate()?;
        if num_doses == 0 {
            return Err(Error::InvalidParams(vec![crate::FieldError::new(
                "num_doses",
                "a trial needs at least one dose",
            )]));
        }
        if params.start_dose > num_doses {
            return Err(Error::InvalidParams(vec![crate::FieldError::new(
                "start_dose",
                format!(
                    "start dose {} exceeds the {num_doses} doses",
                    params.start_dose
                ),
            )]));
        }
        Ok(Self {
            num_doses,
            doses: vec![DoseData::default(); num_doses],
            current_dose: params.start_dose,
            excluded: BTreeSet::new(),
            status: TrialStatus::Active,
            total_enrolled: 0,
            event_log: Vec::new(),
        })
    }

    pub fn dose(&self, dose: usize) -> DoseData {
        self.doses[dose - 1]
    }

    fn require_active(&self) -> Result<()> {
        match self.status {
            TrialStatus::Active => Ok(()),
            other => Err(Error::Inactive(other.to_string())),
        }
    }

    fn gated(&self, dose: usize, params: &DesignParams) -> bool {
        params.cohort_size == 1 && self.dose(dose).n < SINGLE_COHORT_GATE
    }

    /// Adds a cohort's outcome to the current dose.
    pub fn record_cohort(
        &self,
        dlt_count: u32,
        cohort_n: u32,
        params: &DesignParams,
    ) -> Result<Self> {
        self.require_active()?;
        if cohort_n == 0 {
            return Err(Error::InvalidCounts(
                "a cohort needs at least one patient".into(),
            ));
        }
        if dlt_count > cohort_n {
            return Err(Error::InvalidCounts(format!(
                "DLT count {dlt_count} exceeds cohort size {cohort_n}"
            )));
        }
        if self.total_enrolled + cohort_n > params.max_n {
            return Err(Error::InvalidCounts(format!(
                "enrolling {cohort_n} would exceed the maximum sample size {} ({} enrolled)",
                params.max_n, self.total_enrolled
            )));
        }
        let mut next = self.clone();
        let slot = &mut next.doses[self.current_dose - 1];
        slot.x += dlt_count;
        slot.n += cohort_n;
        next.total_enrolled += cohort_n;
        next.event_log.push(CohortEvent {
            dose: self.current_dose,
            dlt_count,
            cohort_n,
            decision: None,
            next_dose: None,
            status: TrialStatus::Active,
        });
        Ok(next)
    }

    /// Dose for the next cohort given the data at the current dose.
    pub fn next_dose<R: DecisionRule + ?Sized>(&self, rule: &R) -> Result<NextDose> {
        self.require_active()?;
        let params = rule.params();
        let cur = self.current_dose;
        let action = rule.decide(self.dose(cur))?;
        let stay = NextDose {
            action,
            dose: cur,
            exclude_from: None,
            stop: false,
        };
        let down = NextDose {
            dose: if cur > 1 { cur - 1 } else { cur },
            ..stay
        };
        Ok(match action {
            Decision::E => {
                let up = cur + 1;
                if up > self.num_doses || self.excluded.contains(&up) {
                    stay
                } else {
                    NextDose { dose: up, ..stay }
                }
            }
            Decision::S => stay,
            Decision::D => down,
            Decision::U if self.gated(cur, params) => down,
            Decision::U => NextDose {
                exclude_from: Some(cur),
                stop: cur == 1,
                ..down
            },
        })
    }

    fn apply_next(&self, next: NextDose) -> Self {
        let mut state = self.clone();
        if let Some(from) = next.exclude_from {
            state.excluded.extend(from..=self.num_doses);
        }
        state.current_dose = next.dose;
        if next.stop {
            state.status = TrialStatus::StoppedToxicity;
        }
        state
    }

    /// Status implied by the stopping rules.
    pub fn check_stop(&self, params: &DesignParams) -> Result<TrialStatus> {
        if self.status != TrialStatus::Active {
            return Ok(self.status);
        }
        let first = self.dose(1);
        if first.n > 0 && !self.gated(1, params) && prob_over_target(first, params.p_t)? > params.xi
        {
            return Ok(TrialStatus::StoppedToxicity);
        }
        if self.total_enrolled >= params.max_n {
            return Ok(TrialStatus::Completed);
        }
        Ok(TrialStatus::Active)
    }

    /// Records a cohort, moves to the next dose and applies the stopping rules.
    pub fn advance<R: DecisionRule + ?Sized>(
        &self,
        dlt_count: u32,
        cohort_n: u32,
        rule: &R,
    ) -> Result<(Self, CohortOutcome)> {
        let params = rule.params();
        let recorded = self.record_cohort(dlt_count, cohort_n, params)?;
        let next = recorded.next_dose(rule)?;
        let mut state = recorded.apply_next(next);
        state.status = state.check_stop(params)?;
        let event = state.event_log.last_mut().expect("cohort just recorded");
        event.decision = Some(next.action);
        event.next_dose = Some(state.current_dose);
        event.status = state.status;
        let outcome = CohortOutcome {
            dose: self.current_dose,
            data: state.dose(self.current_dose),
            action: next.action,
            next_dose: state.current_dose,
            status: state.status,
            excluded: state.excluded.iter().copied().collect(),
        };
        Ok((state, outcome))
    }

    /// Rebuilds a trial from its cohort log.
    pub fn replay<R: DecisionRule + ?Sized>(
        num_doses: usize,
        events: &[CohortEvent],
        rule: &R,
    ) -> Result<Self> {
        let mut state = Self::new(num_doses, rule.params())?;
        for e in events {
            if e.dose != state.current_dose {
                return Err(Error::Mismatch(format!(
                    "log records dose {} but the trial was at dose {}",
                    e.dose, state.current_dose
                )));
            }
            state = state.advance(e.dlt_count, e.cohort_n, rule)?.0;
        }
        Ok(state)
    }

    /// Ends an active trial early; terminal trials are returned unchanged.
    pub fn finalize(&self) -> Self {
        let mut state = self.clone();
        if state.status == TrialStatus::Active {
            state.status = TrialStatus::Completed;
        }
        state
    }

    /// Picks the MTD among tried doses that pass the safety screen.
    pub fn select_mtd(&self, params: &DesignParams) -> Result<MtdResult> {
        if self.status == TrialStatus::Active {
            return Err(Error::StillActive);
        }
        let mut rationale = Vec::new();
        let mut transformed_means = vec![None; self.num_doses];
        if self.status == TrialStatus::StoppedToxicity {
            rationale.push("trial stopped for excessive toxicity at the lowest dose".into());
            return Ok(MtdResult {
                selected_dose: None,
                transformed_means,
                rationale,
            });
        }

        let mut candidates = Vec::new();
        for dose in 1..=self.num_doses {
            let d = self.dose(dose);
            if d.n == 0 {
                continue;
            }
            let over = prob_over_target(d, params.p_t)?;
            if self.excluded.contains(&dose) || over >= params.xi {
                rationale.push(format!(
                    "dose {dose}: Pr(p > p_T) = {over:.6} fails the safety screen"
                ));
                continue;
            }
            candidates.push(dose);
        }
        if candidates.is_empty() {
            rationale.push("no treated dose passes the safety screen".into());
            return Ok(MtdResult {
                selected_dose: None,
                transformed_means,
                rationale,
            });
        }

        let means: Vec<f64> = candidates
            .iter()
            .map(|&k| posterior_mean(self.dose(k)))
            .collect();
        let weights: Vec<f64> = candidates
            .iter()
            .map(|&k| 1.0 / posterior_variance(self.dose(k)))
            .collect();
        let fitted = pava(&means, &weights)?;
        for (&dose, &m) in candidates.iter().zip(&fitted) {
            transformed_means[dose - 1] = Some(m);
        }

        let dist: Vec<f64> = fitted.iter().map(|m| (m - params.p_t).abs()).collect();
        let best = dist.iter().copied().fold(f64::INFINITY, f64::min);
        let tied: Vec<usize> = (0..candidates.len())
            .filter(|&i| dist[i] - best <= TIE_TOLERANCE)
            .collect();
        let pick = if tied.len() == 1 {
            tied[0]
        } else if tied.iter().any(|&i| fitted[i] > params.p_t) {
            rationale.push(format!(
                "doses {:?} tie above target; choosing the lowest",
                tied.iter().map(|&i| candidates[i]).collect::<Vec<_>>()
            ));
            tied[0]
        } else {
            rationale.push(format!(
                "doses {:?} tie at or below target; choosing the highest",
                tied.iter().map(|&i| candidates[i]).collect::<Vec<_>>()
            ));
            *tied.last().unwrap()
        };
        let selected = candidates[pick];
        rationale.push(format!(
            "dose {selected}: isotonic mean {:.6} is closest to p_T = {}",
            fitted[pick], params.p_t
        ));
        Ok(MtdResult {
            selected_dose: Some(selected),
            transformed_means,
            rationale,
        })
    }
}
