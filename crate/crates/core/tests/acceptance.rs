//! Acceptance criteria for the decision engine, numerics and simulator.
//!
//! Runs as a plain binary (`harness = false`) so each criterion prints one
//! PASS/FAIL line. The service contract runs against a live server in the
//! command-line crate's acceptance target.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use dosefind_core::beta::{interval_mass, reg_inc_beta, BetaParams, DoseData};
use dosefind_core::decision::{decide, decision_table, table_diff, winning_index, Decision};
use dosefind_core::partition::IntervalPartition;
use dosefind_core::sim::{compare_designs, reference_suite, run_study, Scenario, SimConfig};
use dosefind_core::{DesignParams, LeftoverPolicy, Variant};

use common::{argmin_expected_loss, beta_cdf_grid, model_probs_by_quadrature};

const PT_GRID: [f64; 5] = [0.1, 0.16, 0.2, 0.25, 0.3];

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);
/// A published column: sample size and the (decision, Bayes factor) per DLT count.
type Column = (u32, &'static [(Decision, Option<f64>)]);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn dd(x: u32, n: u32) -> DoseData {
    DoseData::new(x, n).unwrap()
}

/// Published mTPI-2 decisions for p_T = 0.3 at n = 3, 6, 9, 12, with the
/// printed Bayes factors (absent for U).
fn published_table() -> Vec<(u32, u32, Decision, Option<f64>)> {
    use Decision::*;
    let cols: [Column; 4] = [
        (
            3,
            &[(E, Some(2.12)), (S, Some(1.02)), (D, Some(2.32)), (U, None)],
        ),
        (
            6,
            &[
                (E, Some(4.47)),
                (E, Some(1.29)),
                (S, Some(1.04)),
                (D, Some(1.68)),
                (U, None),
                (U, None),
                (U, None),
            ],
        ),
        (
            9,
            &[
                (E, Some(9.38)),
                (E, Some(2.34)),
                (E, Some(1.12)),
                (S, Some(1.06)),
                (D, Some(1.45)),
                (U, None),
                (U, None),
                (U, None),
                (U, None),
                (U, None),
            ],
        ),
        (
            12,
            &[
                (E, Some(19.56)),
                (E, Some(4.80)),
                (E, Some(1.64)),
                (S, Some(1.03)),
                (S, Some(1.08)),
                (D, Some(1.42)),
                (D, Some(2.73)),
                (U, None),
                (U, None),
                (U, None),
                (U, None),
                (U, None),
                (U, None),
            ],
        ),
    ];
    cols.iter()
        .flat_map(|&(n, col)| {
            col.iter()
                .enumerate()
                .map(move |(x, &(d, bf))| (x as u32, n, d, bf))
        })
        .collect()
}

fn criterion_1() -> Check {
    let params = DesignParams::new(0.3, 12);
    let table = decision_table(&params).map_err(|e| e.to_string())?;
    let published = published_table();
    let mut bfs = 0;
    for &(x, n, want, bf) in &published {
        let cell = table.get(x, n).ok_or(format!("missing cell ({x},{n})"))?;
        ensure(cell.decision == want, || {
            format!("({x},{n}): got {} want {want}", cell.decision)
        })?;
        match (bf, cell.bayes_factor) {
            (Some(w), Some(g)) => {
                bfs += 1;
                ensure((g - w).abs() <= 0.01 + 1e-9, || {
                    format!("BF ({x},{n}): got {g:.4} want {w}")
                })?
            }
            (None, None) => {}
            (w, g) => return Err(format!("BF presence at ({x},{n}): got {g:?} want {w:?}")),
        }
    }
    Ok(format!(
        "{} decisions and {bfs} Bayes factors match (+-0.01)",
        published.len()
    ))
}

fn criterion_2() -> Check {
    let cases = [
        (0.3, 3, 6, Decision::S, Decision::D),
        (0.3, 2, 9, Decision::S, Decision::E),
        (0.1, 3, 12, Decision::S, Decision::U),
    ];
    for (p_t, x, n, want_a, want_b) in cases {
        let p = DesignParams::new(p_t, 12);
        let a =
            decide(dd(x, n), &p.clone().with_variant(Variant::Mtpi)).map_err(|e| e.to_string())?;
        let b = decide(dd(x, n), &p).map_err(|e| e.to_string())?;
        ensure((a, b) == (want_a, want_b), || {
            format!("p_T={p_t} ({x},{n}): mTPI {a}, mTPI-2 {b}; want {want_a}, {want_b}")
        })?;
    }
    Ok("(3,6) S->D, (2,9) S->E at p_T=0.3; (3,12) S->U at p_T=0.1".into())
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let mut checked = 0;
    for p_t in PT_GRID {
        for variant in Variant::ALL {
            let params = DesignParams::new(p_t, 15).with_variant(variant);
            let partition = IntervalPartition::for_params(&params).map_err(|e| e.to_string())?;
            let bounds: Vec<(f64, f64)> = partition.iter().map(|i| (i.lo, i.hi)).collect();
            for n in 0..=15 {
                for x in 0..=n {
                    let d = DoseData { x, n };
                    let probs = model_probs_by_quadrature(x, n, &bounds);
                    let oracle = partition.intervals[argmin_expected_loss(&probs)].action;
                    let got = partition.intervals[winning_index(&partition, d).unwrap()].action;
                    ensure(oracle == got, || {
                        format!("{variant} p_T={p_t} ({x},{n}): UPM rule {got}, expected-loss oracle {oracle}")
                    })?;
                    checked += 1;
                }
            }
        }
    }
    Ok(format!(
        "{checked} cells, zero discrepancies ({:.1}s)",
        start.elapsed().as_secs_f64()
    ))
}

fn criterion_4() -> Check {
    let mut changes = 0;
    for p_t in PT_GRID {
        let p = DesignParams::new(p_t, 30);
        let a =
            decision_table(&p.clone().with_variant(Variant::Mtpi)).map_err(|e| e.to_string())?;
        let b = decision_table(&p).map_err(|e| e.to_string())?;
        for e in table_diff(&a, &b).map_err(|e| e.to_string())? {
            changes += 1;
            ensure(e.from == Decision::S, || {
                format!("p_T={p_t} ({},{}) changes from {}", e.x, e.n, e.from)
            })?;
            let sign_ok = match e.to {
                Decision::D | Decision::U => e.empirical_gap > 0.0,
                Decision::E => e.empirical_gap < 0.0,
                Decision::S => false,
            };
            ensure(sign_ok, || {
                format!(
                    "p_T={p_t} ({},{}) {} has gap {}",
                    e.x,
                    e.n,
                    e.class(),
                    e.empirical_gap
                )
            })?;
        }
    }
    Ok(format!(
        "{changes} changes, all from S with consistent sign"
    ))
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for a in 1..=50u32 {
        for b in 1..=50u32 {
            let oracle = beta_cdf_grid(a, b, 100, 1e-13);
            let p = BetaParams::new(a, b).unwrap();
            for (i, &want) in oracle.iter().enumerate() {
                let t = if i == 100 { 1.0 } else { i as f64 * 0.01 };
                let got = reg_inc_beta(t, p).unwrap();
                worst = worst.max((got - want).abs());
            }
        }
    }
    ensure(worst <= 1e-9, || {
        format!("incomplete beta error {worst:e} > 1e-9")
    })?;

    let mut worst_sum: f64 = 0.0;
    let mut mismatches = 0;
    for p_t in PT_GRID {
        // Full-coverage partitions of both designs.
        for variant in Variant::ALL {
            let params = DesignParams::new(p_t, 30)
                .with_variant(variant)
                .with_leftover_policy(LeftoverPolicy::Include);
            let part = IntervalPartition::for_params(&params).unwrap();
            for n in 0..=30 {
                for x in 0..=n {
                    let s: f64 = part
                        .iter()
                        .map(|i| interval_mass(dd(x, n), i.lo, i.hi).unwrap())
                        .sum();
                    worst_sum = worst_sum.max((s - 1.0).abs());
                }
            }
        }
        let ex = decision_table(&DesignParams::new(p_t, 30)).unwrap();
        let inc = decision_table(
            &DesignParams::new(p_t, 30).with_leftover_policy(LeftoverPolicy::Include),
        )
        .unwrap();
        mismatches += ex
            .cells
            .iter()
            .zip(&inc.cells)
            .filter(|(a, b)| a.decision != b.decision)
            .count();
    }
    ensure(worst_sum <= 1e-12, || {
        format!("partition mass off by {worst_sum:e}")
    })?;
    ensure(mismatches == 0, || {
        format!("{mismatches} leftover-policy decision mismatches")
    })?;
    Ok(format!(
        "max |I - quadrature| = {worst:.2e}, max |sum - 1| = {worst_sum:.2e}, 0 policy mismatches ({:.1}s)",
        start.elapsed().as_secs_f64()
    ))
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let mut config = SimConfig::new(10_000, 20240611);
    config.max_n = 12;
    let zero = Scenario::new("zero-tox", 0.3, vec![0.0; 4]);
    let toxic = Scenario::new("all-toxic", 0.3, vec![1.0; 4]);
    let reports = run_study(&[zero.clone(), toxic.clone()], &config).map_err(|e| e.to_string())?;
    for r in &reports {
        if r.label == "zero-tox" {
            ensure(r.reliability == 1.0 && r.selection_freq[3] == 1.0, || {
                format!(
                    "{} zero-tox reliability {} freq {:?}",
                    r.design, r.reliability, r.selection_freq
                )
            })?;
        } else {
            ensure(r.stop_toxicity_rate == 1.0 && r.safety == 0.0, || {
                format!(
                    "{} all-toxic stop {} safety {}",
                    r.design, r.stop_toxicity_rate, r.safety
                )
            })?;
        }
    }
    let mixed = Scenario::new("mixed", 0.3, vec![0.1, 0.25, 0.4, 0.55]);
    let baseline =
        serde_json::to_string(&run_study(std::slice::from_ref(&mixed), &config).unwrap()).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let serial = single.install(|| {
        serde_json::to_string(&run_study(std::slice::from_ref(&mixed), &config).unwrap()).unwrap()
    });
    let quad = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let parallel =
        quad.install(|| serde_json::to_string(&run_study(&[mixed], &config).unwrap()).unwrap());
    ensure(baseline == serial && serial == parallel, || {
        "reports differ across thread counts".into()
    })?;
    Ok(format!(
        "zero-tox reliability 1.0 at dose 4; all-toxic stop 1.0, safety 0.0; byte-identical across 1/4/default threads ({:.1}s)",
        start.elapsed().as_secs_f64()
    ))
}

fn criterion_7() -> Check {
    let start = Instant::now();
    let config = SimConfig::new(10_000, 7);
    let reports = run_study(&reference_suite(), &config).map_err(|e| e.to_string())?;
    let by = dosefind_core::sim::reports_by_design(&reports);
    let cmp =
        compare_designs(&by[&Variant::Mtpi], &by[&Variant::Mtpi2]).map_err(|e| e.to_string())?;
    let mean = cmp.safety.mean;
    ensure(mean >= 0.0, || format!("mean safety delta {mean:.5} < 0"))?;
    Ok(format!(
        "mean safety(mTPI-2) - safety(mTPI) = {mean:+.5} over {} scenarios; mean reliability delta {:+.5} ({:.1}s)",
        cmp.deltas.len(),
        cmp.reliability.mean,
        start.elapsed().as_secs_f64()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 published mTPI-2 table with Bayes factors", criterion_1),
        ("2 mTPI vs mTPI-2 flip cases", criterion_2),
        ("3 UPM rule equals expected-loss oracle", criterion_3),
        ("4 table differences: source and sign", criterion_4),
        ("5 numerics and leftover-policy invariance", criterion_5),
        ("6 deterministic trial traces", criterion_6),
        ("7 safety direction on the reference suite", criterion_7),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
