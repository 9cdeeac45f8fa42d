//! Artifact files: CSV tables, the JSON report and tidy plot data.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::commands::{Outcome, PlotPoint};
use crate::config::ExperimentSpec;
use crate::error::{CliError, Result};

/// Bumped whenever a report field changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

/// The full JSON report. It holds no timings or paths, so identical specs
/// give identical bytes.
pub fn report(spec: &ExperimentSpec, outcome: &Outcome) -> Result<Value> {
    let mut out = json!({
        "schema_version": SCHEMA_VERSION,
        "command": spec.command()?.name(),
        "name": spec.name()?,
        "pass": outcome.pass,
        "tolerance": outcome.tolerance,
        "numerics": given(serde_json::to_value(&spec.numerics)?),
    });
    if spec.geometry.preset.is_some() || spec.geometry.file.is_some() {
        out["geometry"] = serde_json::to_value(spec.geometry_spec()?)?;
    }
    let map = out.as_object_mut().expect("object literal");
    for (k, v) in &outcome.report {
        map.entry(k.clone()).or_insert_with(|| v.clone());
    }
    Ok(out)
}

/// Drops the keys that were not set.
fn given(mut section: Value) -> Value {
    if let Some(map) = section.as_object_mut() {
        map.retain(|_, v| !v.is_null());
    }
    section
}

#[derive(Serialize)]
struct PlotRow<'a> {
    experiment: &'a str,
    series: &'a str,
    t: Option<f64>,
    r: Option<f64>,
    theta: Option<f64>,
    index: Option<usize>,
    value: f64,
}

fn plot_csv(experiment: &str, points: &[PlotPoint]) -> Result<Vec<u8>> {
    let mut out = csv::Writer::from_writer(Vec::new());
    if points.is_empty() {
        out.write_record(["experiment", "series", "t", "r", "theta", "index", "value"])?;
    }
    for p in points {
        out.serialize(PlotRow {
            experiment,
            series: &p.series,
            t: p.t,
            r: p.r,
            theta: p.theta,
            index: p.index,
            value: p.value,
        })?;
    }
    out.into_inner().map_err(|e| CliError::io("<csv buffer>", e.into_error()))
}

fn write(path: PathBuf, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes `<name>.<suffix>.csv` per table, `<name>.report.json` and, when
/// requested, `<name>.plot.csv`. Returns the written paths.
pub fn write_artifacts(dir: &Path, spec: &ExperimentSpec, outcome: &Outcome, report: &Value) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = spec.name()?;
    let mut written = Vec::new();
    for table in &outcome.tables {
        write(dir.join(format!("{name}.{}.csv", table.suffix)), &table.bytes, &mut written)?;
    }
    if spec.output.plot_data.unwrap_or(false) {
        write(dir.join(format!("{name}.plot.csv")), &plot_csv(&name, &outcome.plot)?, &mut written)?;
    }
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    write(dir.join(format!("{name}.report.json")), &json, &mut written)?;
    Ok(written)
}
