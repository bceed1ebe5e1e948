//! JSON documents shared by the command line and the HTTP service.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decision::{decision_table, diff_summary, table_diff, DecisionTable, DiffEntry};
use crate::error::{Error, FieldError, Result};
use crate::params::{DesignParams, Variant};
use crate::sim::{
    compare_designs, reports_by_design, run_study, Comparison, OcReport, Scenario, SimConfig,
};

/// Parses `mtpi`, `mtpi2` or `both`.
pub fn parse_designs(s: &str) -> Result<Vec<Variant>> {
    if s.eq_ignore_ascii_case("both") {
        return Ok(Variant::ALL.to_vec());
    }
    s.parse::<Variant>().map(|v| vec![v]).map_err(|_| {
        Error::InvalidParams(vec![FieldError::new(
            "variant",
            format!("unknown design '{s}' (expected mtpi, mtpi2 or both)"),
        )])
    })
}

/// One decision table per requested design. With two designs the cells
/// where they disagree are listed as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDocument {
    pub tables: Vec<DecisionTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<Vec<DiffEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff_summary: Option<BTreeMap<String, usize>>,
}

pub fn table_document(params: &DesignParams, designs: &[Variant]) -> Result<TableDocument> {
    params.validate()?;
    let tables = designs
        .iter()
        .map(|&v| decision_table(&params.clone().with_variant(v)))
        .collect::<Result<Vec<_>>>()?;
    let diff = match tables.as_slice() {
        [a, b] => Some(table_diff(a, b)?),
        _ => None,
    };
    Ok(TableDocument {
        diff_summary: diff.as_deref().map(diff_summary),
        diff,
        tables,
    })
}

/// Simulation output, with paired mTPI-2 minus mTPI differences when both
/// designs ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDocument {
    pub config: SimConfig,
    pub reports: Vec<OcReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
}

pub fn study_document(scenarios: &[Scenario], config: &SimConfig) -> Result<StudyDocument> {
    let reports = run_study(scenarios, config)?;
    let by = reports_by_design(&reports);
    let comparison = match (by.get(&Variant::Mtpi), by.get(&Variant::Mtpi2)) {
        (Some(a), Some(b)) => Some(compare_designs(a, b)?),
        _ => None,
    };
    Ok(StudyDocument {
        config: config.clone(),
        reports,
        comparison,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn designs_parse() {
        assert_eq!(parse_designs("both").unwrap(), Variant::ALL.to_vec());
        assert_eq!(parse_designs("mTPI-2").unwrap(), vec![Variant::Mtpi2]);
        assert!(parse_designs("boin").is_err());
    }

    #[test]
    fn side_by_side_has_diff() {
        let p = DesignParams::new(0.3, 12);
        let one = table_document(&p, &[Variant::Mtpi2]).unwrap();
        assert!(one.diff.is_none());
        let both = table_document(&p, &Variant::ALL).unwrap();
        assert_eq!(both.tables.len(), 2);
        assert_eq!(both.tables[0].variant(), Variant::Mtpi);
        assert!(!both.diff.unwrap().is_empty());
    }
}
