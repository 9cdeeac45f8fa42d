//! Pullback of a Ricci-deTurck trace to Ricci flow through the radial
//! diffeomorphisms generated by `ξ♯`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MetricField, WarpedMetric};
use crate::grid::{fornberg_weights, HighOrderStencils};
use crate::variations::{self, STENCIL_WIDTH};

use super::{assemble_diagnostics, FlowTrace, TraceGauge};

/// Width of the Lagrange interpolation used to compose `u_t` with `ψ_t`; the
/// composed metric is differentiated twice, so this must beat cubic.
const PULLBACK_WIDTH: usize = 8;

/// Node values `ψ_t(r_i)` of the radial diffeomorphisms at every snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffeoFamily {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl DiffeoFamily {
    /// `max_t |ψ_t(r_b) - r_b|` over both boundary nodes.
    pub fn boundary_drift(&self) -> f64 {
        let first = &self.values[0];
        let n = first.len() - 1;
        self.values
            .iter()
            .map(|v| (v[0] - first[0]).abs().max((v[n] - first[n]).abs()))
            .fold(0.0, f64::max)
    }

    /// `max_t max_i |ψ_t(r_i) - r_i|`.
    pub fn max_displacement(&self) -> f64 {
        let first = &self.values[0];
        self.values
            .iter()
            .flat_map(|v| v.iter().zip(first).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct Pullback {
    /// `g_t = ψ_t* u_t` with diagnostics recomputed for Ricci flow.
    pub trace: FlowTrace,
    pub diffeo: DiffeoFamily,
}

/// Lagrange weights at `x` for the nodes `0, 1, 2, 3`.
fn cubic_weights(x: f64) -> [f64; 4] {
    std::array::from_fn(|a| {
        (0..4)
            .filter(|&b| b != a)
            .map(|b| (x - b as f64) / (a as f64 - b as f64))
            .product()
    })
}

/// Field values at fractional snapshot position `m + frac` from the four
/// nearest snapshots.
fn interpolate_in_time(fields: &[Vec<f64>], m: usize, frac: f64) -> Vec<f64> {
    let count = fields.len();
    if count < 4 {
        let next = (m + 1).min(count - 1);
        return fields[m]
            .iter()
            .zip(&fields[next])
            .map(|(a, b)| (1.0 - frac) * a + frac * b)
            .collect();
    }
    let start = m.saturating_sub(1).min(count - 4);
    let w = cubic_weights((m - start) as f64 + frac);
    (0..fields[m].len())
        .map(|i| (0..4).map(|a| w[a] * fields[start + a][i]).sum())
        .collect()
}

/// Integrates `∂_t ψ_t = ξ♯(u_t) ∘ ψ_t` per node with RK4 and returns the
/// pulled-back Ricci-flow trace.
pub fn deturck_pullback(trace: &FlowTrace, background: &MetricField) -> Result<Pullback> {
    let first = trace.snapshots[0].as_warped().map_err(|_| Error::UnsupportedBackend("deturck_pullback"))?;
    let grid = *first.grid();
    let mut fields = Vec::with_capacity(trace.len());
    for (m, u) in trace.snapshots.iter().enumerate() {
        let xi = variations::deturck_field(u, background)?;
        let sharp = xi.vector.radial().to_vec();
        if sharp.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadConfig(format!(
                "deTurck field is not finite at t = {}",
                trace.times[m]
            )));
        }
        fields.push(sharp);
    }
    let velocity = |field: &[f64], r: &[f64]| -> Vec<f64> { r.iter().map(|&x| grid.interpolate(field, x)).collect() };
    let axpy = |r: &[f64], c: f64, k: &[f64]| -> Vec<f64> { r.iter().zip(k).map(|(a, b)| a + c * b).collect() };

    let mut psi = grid.nodes();
    let mut values = vec![psi.clone()];
    for m in 0..trace.len() - 1 {
        let dt = trace.times[m + 1] - trace.times[m];
        let mid = interpolate_in_time(&fields, m, 0.5);
        let k1 = velocity(&fields[m], &psi);
        let k2 = velocity(&mid, &axpy(&psi, 0.5 * dt, &k1));
        let k3 = velocity(&mid, &axpy(&psi, 0.5 * dt, &k2));
        let k4 = velocity(&fields[m + 1], &axpy(&psi, dt, &k3));
        for i in 0..psi.len() {
            psi[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if let Some(node) = (1..psi.len()).find(|&i| !(psi[i] > psi[i - 1])) {
            return Err(Error::MonotonicityLoss {
                time: trace.times[m + 1],
                node,
            });
        }
        values.push(psi.clone());
    }

    let st = HighOrderStencils::new(grid, STENCIL_WIDTH);
    let interpolate = |f: &[f64], x: f64| -> f64 {
        let last = grid.num_nodes() - PULLBACK_WIDTH;
        let pos = (x - grid.r_min()) / grid.spacing();
        let start = ((pos.round() as isize - (PULLBACK_WIDTH / 2) as isize).max(0) as usize).min(last);
        let xs: Vec<f64> = (start..start + PULLBACK_WIDTH).map(|j| j as f64).collect();
        fornberg_weights(pos, &xs, 0).iter().zip(&f[start..]).map(|(w, v)| w * v).sum()
    };
    let mut snapshots = Vec::with_capacity(trace.len());
    for (u, psi) in trace.snapshots.iter().zip(&values) {
        let u = u.as_warped()?;
        let (a, b) = (u.a(), u.b());
        let dpsi = st.derivative(psi, 1);
        let ag: Vec<f64> = psi
            .iter()
            .zip(&dpsi)
            .map(|(&x, d)| interpolate(&a, x) * d * d)
            .collect();
        let bg: Vec<f64> = psi.iter().map(|&x| interpolate(&b, x)).collect();
        snapshots.push(MetricField::Warped(WarpedMetric::from_components(u.dim(), grid, &ag, &bg)?));
    }
    let diagnostics = assemble_diagnostics(
        &trace.times,
        &snapshots,
        background,
        TraceGauge::Ricci,
        &trace.bdf_orders,
        None,
    )?;
    Ok(Pullback {
        trace: FlowTrace {
            times: trace.times.clone(),
            snapshots,
            diagnostics,
            background: background.clone(),
            gauge: TraceGauge::Ricci,
            dt: trace.dt,
            bdf_orders: trace.bdf_orders.clone(),
            stride: trace.stride,
            warnings: trace.warnings.clone(),
        },
        diffeo: DiffeoFamily {
            times: trace.times.clone(),
            values,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_weights_reproduce_cubics() {
        let w = cubic_weights(1.5);
        let f = |x: f64| x * x * x - 2.0 * x + 1.0;
        let v: f64 = (0..4).map(|a| w[a] * f(a as f64)).sum();
        assert!((v - f(1.5)).abs() < 1e-12);
    }

    #[test]
    fn time_interpolation_is_exact_at_snapshots() {
        let fields: Vec<Vec<f64>> = (0..6).map(|m| vec![m as f64 * m as f64, 1.0]).collect();
        for m in 0..5 {
            let v = interpolate_in_time(&fields, m, 0.0);
            assert!((v[0] - (m * m) as f64).abs() < 1e-12);
            let half = interpolate_in_time(&fields, m, 0.5);
            assert!((half[0] - (m as f64 + 0.5).powi(2)).abs() < 1e-12);
        }
    }
}
