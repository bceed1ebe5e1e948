//! CSV renderings of decision tables and simulation reports.
//!
//! Decision grids have one row per DLT count `x = 0..=max_n` and one column
//! per sample size `n = 1..=max_n`. Infeasible cells (`x > n`) hold `-`.

use crate::decision::{DecisionTable, DiffEntry};
use crate::error::Result;
use crate::sim::{Comparison, OcReport};

fn grid<F>(table: &DecisionTable, mut cell: F) -> Result<String>
where
    F: FnMut(u32, u32) -> String,
{
    let max_n = table.params.max_n;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["x".to_owned()];
    header.extend((1..=max_n).map(|n| n.to_string()));
    w.write_record(&header)?;
    for x in 0..=max_n {
        let mut row = vec![x.to_string()];
        row.extend((1..=max_n).map(|n| if x > n { "-".to_owned() } else { cell(x, n) }));
        w.write_record(&row)?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Decision tokens `E`, `S`, `D`, `U`.
pub fn decisions_csv(table: &DecisionTable) -> Result<String> {
    grid(table, |x, n| table.get(x, n).unwrap().decision.to_string())
}

/// Bayes factors to two decimals; empty for `U` cells.
pub fn bayes_factors_csv(table: &DecisionTable) -> Result<String> {
    grid(table, |x, n| {
        table
            .get(x, n)
            .unwrap()
            .bayes_factor
            .map(|bf| format!("{bf:.2}"))
            .unwrap_or_default()
    })
}

/// Two tables with paired sub-columns per sample size, e.g. `6:mtpi,6:mtpi2`.
pub fn side_by_side_csv(a: &DecisionTable, b: &DecisionTable) -> Result<String> {
    let max_n = a.params.max_n.min(b.params.max_n);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["x".to_owned()];
    for n in 1..=max_n {
        header.push(format!("{n}:{}", a.variant()));
        header.push(format!("{n}:{}", b.variant()));
    }
    w.write_record(&header)?;
    for x in 0..=max_n {
        let mut row = vec![x.to_string()];
        for n in 1..=max_n {
            for t in [a, b] {
                row.push(match t.get(x, n) {
                    Some(c) => c.decision.to_string(),
                    None => "-".to_owned(),
                });
            }
        }
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn diff_csv(diff: &[DiffEntry]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "n", "from", "to", "class", "empirical_gap"])?;
    for e in diff {
        w.write_record([
            e.x.to_string(),
            e.n.to_string(),
            e.from.to_string(),
            e.to.to_string(),
            e.class(),
            format!("{:.6}", e.empirical_gap),
        ])?;
    }
    finish(w)
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|p| format!("{p:.6}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// One row per scenario and design. Vector fields are `;`-separated.
const REPORT_HEADER: [&str; 14] = [
    "label",
    "design",
    "p_T",
    "true_tox",
    "true_mtd",
    "n_trials",
    "seed",
    "selection_freq",
    "none_rate",
    "allocation",
    "reliability",
    "safety",
    "stop_toxicity_rate",
    "mean_sample_size",
];

fn report_row(r: &OcReport) -> Vec<String> {
    vec![
        r.label.clone(),
        r.design.to_string(),
        r.p_t.to_string(),
        join(&r.true_tox),
        r.true_mtd.map(|d| d.to_string()).unwrap_or_default(),
        r.n_trials.to_string(),
        r.seed.to_string(),
        join(&r.selection_freq),
        format!("{:.6}", r.none_rate),
        join(&r.allocation),
        format!("{:.6}", r.reliability),
        format!("{:.6}", r.safety),
        format!("{:.6}", r.stop_toxicity_rate),
        format!("{:.6}", r.mean_sample_size),
    ]
}

pub fn reports_csv(reports: &[OcReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record(report_row(r))?;
    }
    finish(w)
}

/// Reports with the paired `b - a` deltas of their scenario appended.
pub fn reports_with_deltas_csv(reports: &[OcReport], cmp: &Comparison) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = REPORT_HEADER.to_vec();
    header.extend(["reliability_delta", "safety_delta"]);
    w.write_record(header)?;
    for r in reports {
        let delta = cmp
            .deltas
            .iter()
            .find(|d| d.label == r.label)
            .ok_or_else(|| {
                crate::Error::Mismatch(format!("no paired delta for scenario '{}'", r.label))
            })?;
        let mut row = report_row(r);
        row.push(format!("{:.6}", delta.reliability_delta));
        row.push(format!("{:.6}", delta.safety_delta));
        w.write_record(row)?;
    }
    finish(w)
}

pub fn comparison_csv(cmp: &Comparison) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "label",
        "p_T",
        "design_a",
        "design_b",
        "reliability_delta",
        "safety_delta",
    ])?;
    for d in &cmp.deltas {
        w.write_record([
            d.label.clone(),
            d.p_t.to_string(),
            cmp.design_a.to_string(),
            cmp.design_b.to_string(),
            format!("{:.6}", d.reliability_delta),
            format!("{:.6}", d.safety_delta),
        ])?;
    }
    finish(w)
}
