//! CSV serialization of flow traces.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::geometry::MetricField;

use super::FlowTrace;

#[derive(Serialize)]
struct ProfileRow {
    t: f64,
    step: usize,
    node: usize,
    r: f64,
    phi: f64,
    psi: f64,
    g_rr: f64,
    g_sphere: f64,
}

#[derive(Serialize)]
struct ConformalRow {
    t: f64,
    step: usize,
    node: usize,
    r: f64,
    theta: f64,
    u: f64,
}

/// Writes every `stride`-th snapshot (and always the last) in long format.
pub fn write_trace_csv<W: Write>(trace: &FlowTrace, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let last = trace.len() - 1;
    for (m, g) in trace.snapshots.iter().enumerate() {
        if m % trace.stride != 0 && m != last {
            continue;
        }
        let t = trace.times[m];
        match g {
            MetricField::Warped(w) => {
                for (i, r) in w.grid().nodes().into_iter().enumerate() {
                    let (phi, psi) = (w.phi()[i], w.psi()[i]);
                    out.serialize(ProfileRow {
                        t,
                        step: m,
                        node: i,
                        r,
                        phi,
                        psi,
                        g_rr: phi * phi,
                        g_sphere: psi * psi,
                    })?;
                }
            }
            MetricField::Conformal(c) => {
                for idx in 0..c.len() {
                    out.serialize(ConformalRow {
                        t,
                        step: m,
                        node: idx,
                        r: c.radius(idx),
                        theta: c.theta(idx),
                        u: c.u()[idx],
                    })?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes the per-step diagnostics as CSV, one row per snapshot.
pub fn write_diagnostics_csv<W: Write>(trace: &FlowTrace, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "t",
        "ricci_residual",
        "bc_conformal_residual",
        "bc_mc_residual",
        "deturck_norm",
        "h_inner",
        "h_outer",
        "lambda",
        "newton_iterations",
    ])?;
    for d in &trace.diagnostics {
        out.write_record([
            format!("{:?}", d.t),
            format!("{:?}", d.ricci_residual),
            format!("{:?}", d.bc_conformal_residual),
            format!("{:?}", d.bc_mc_residual),
            format!("{:?}", d.deturck_norm),
            format!("{:?}", d.mean_curvature[0]),
            format!("{:?}", d.mean_curvature[1]),
            d.lambda.map(|l| format!("{l:?}")).unwrap_or_default(),
            d.newton_iterations.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
