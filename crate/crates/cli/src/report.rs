//! Writes per-suite CSV, optional SVG and the summary JSON.

use crate::config::RunConfig;
use crate::suites::SuiteOutput;
use anyhow::{Context as _, Result};
use serde::Serialize;
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct SuiteSummary {
    pub pass: bool,
    pub worst_margin: f64,
    pub details_path: String,
    pub checks: Vec<CheckSummary>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Serialize)]
pub struct CheckSummary {
    pub name: String,
    pub value: f64,
    pub margin: f64,
}

#[derive(Serialize)]
pub struct Summary<'a> {
    pub schema_version: u32,
    pub config: &'a RunConfig,
    pub effective_k_max: usize,
    pub pass: bool,
    pub suites: BTreeMap<String, SuiteSummary>,
}

/// Finite JSON numbers only: non-finite values become strings.
fn finite(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or_else(|| Value::String(format!("{v}")))
}

impl Serialize for FiniteF64 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        finite(self.0).serialize(s)
    }
}

struct FiniteF64(f64);

impl SuiteSummary {
    pub fn errored(name: &str, message: &str) -> Self {
        let mut extra = Map::new();
        extra.insert("error".into(), Value::String(message.to_string()));
        SuiteSummary {
            pass: false,
            worst_margin: f64::NEG_INFINITY,
            details_path: format!("{name}.csv"),
            checks: Vec::new(),
            extra,
        }
    }
}

pub fn write_suite(out_dir: &Path, name: &str, out: &SuiteOutput) -> Result<SuiteSummary> {
    let csv_path = out_dir.join(format!("{name}.csv"));
    let mut w = csv::Writer::from_path(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    w.write_record(&out.table.header)?;
    for row in &out.table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    if let Some(plot) = &out.plot {
        let svg_path = out_dir.join(format!("{name}.svg"));
        fs::write(&svg_path, plot.render()).with_context(|| format!("writing {}", svg_path.display()))?;
    }
    let checks: Vec<CheckSummary> = out.checks.iter().map(|c| CheckSummary { name: c.name.clone(), value: c.value, margin: c.margin() }).collect();
    let worst_margin = checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
    Ok(SuiteSummary {
        pass: worst_margin >= 0.0,
        worst_margin,
        details_path: format!("{name}.csv"),
        checks,
        extra: out.extra.clone(),
    })
}

pub fn write_summary(out_dir: &Path, summary: &Summary) -> Result<()> {
    let v = serde_json::to_value(SummaryShadow::from(summary))?;
    let path = out_dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&v)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Same layout as `Summary`, with floats wrapped so that infinities survive.
#[derive(Serialize)]
struct SummaryShadow<'a> {
    schema_version: u32,
    config: &'a RunConfig,
    effective_k_max: usize,
    pass: bool,
    suites: BTreeMap<&'a str, SuiteShadow<'a>>,
}

#[derive(Serialize)]
struct SuiteShadow<'a> {
    pass: bool,
    worst_margin: FiniteF64,
    details_path: &'a str,
    checks: Vec<CheckShadow<'a>>,
    #[serde(flatten)]
    extra: &'a Map<String, Value>,
}

#[derive(Serialize)]
struct CheckShadow<'a> {
    name: &'a str,
    value: FiniteF64,
    margin: FiniteF64,
}

impl<'a> From<&'a Summary<'a>> for SummaryShadow<'a> {
    fn from(s: &'a Summary<'a>) -> Self {
        SummaryShadow {
            schema_version: s.schema_version,
            config: s.config,
            effective_k_max: s.effective_k_max,
            pass: s.pass,
            suites: s
                .suites
                .iter()
                .map(|(k, v)| {
                    (
                        k.as_str(),
                        SuiteShadow {
                            pass: v.pass,
                            worst_margin: FiniteF64(v.worst_margin),
                            details_path: &v.details_path,
                            checks: v.checks.iter().map(|c| CheckShadow { name: &c.name, value: FiniteF64(c.value), margin: FiniteF64(c.margin) }).collect(),
                            extra: &v.extra,
                        },
                    )
                })
                .collect(),
        }
    }
}
