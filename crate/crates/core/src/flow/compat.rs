//! Compatibility of initial data with the boundary conditions.
//!
//! Order 0 evaluates `Ric^T - φ(Ric) g^T` and `H'(Ric) + ½φ(Ric) H` at the
//! boundary. Order 1 differentiates the mean-curvature law once more in
//! time along Ricci flow. Instead of assembling `Δ_L Ric`, the flow is
//! expanded to second order in time (`ġ = -2Ric`, `g̈` by a complex-step
//! directional derivative of the right-hand side) and the boundary quantities are
//! differenced along that path with Richardson extrapolation over two
//! micro-steps.
//!
//! Second time derivatives at the boundary involve up to five radial
//! derivatives of the metric, so the curvature here uses seven-point
//! stencils; with the second-order stencils of `curvature()` the boundary
//! truncation error would not vanish under refinement.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    self, ConformalMetric, ConformalTensor, MetricField, Side, VariationField, WarpedMetric, WarpedTensor,
};
use crate::grid::{fornberg_weights, Grid1D, HighOrderStencils};
use crate::variations;

const COMPAT_STENCIL_WIDTH: usize = 7;
/// Micro-step relative to the curvature time scale `1 / max|ġ/g|`.
const MICRO_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompatOrder {
    Zero,
    One,
}

impl CompatOrder {
    pub fn from_index(order: usize) -> Result<Self> {
        match order {
            0 => Ok(Self::Zero),
            1 => Ok(Self::One),
            _ => Err(Error::BadConfig(format!("compatibility order must be 0 or 1, got {order}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideCompatibility {
    pub side: Side,
    /// Mean over the boundary nodes.
    pub mean_curvature: f64,
    /// `max |H'_g(Ric) + ½φ_g(Ric) H|` from the first-variation formula.
    pub mc_residual: f64,
    /// The same quantity from differencing along the Ricci-flow path,
    /// `-½(∂_t H + ½ ∂_t log(g^T) H)` at `t = 0`.
    pub mc_residual_path: f64,
    /// `∂_t H` at `t = 0` along Ricci flow (mean over nodes).
    pub dh_dt: f64,
    /// `∂_t² H` at `t = 0` (order 1 only).
    pub d2h_dt2: Option<f64>,
    /// `max |∂_t (∂_t H + (2(n-1))⁻¹ tr_{g^T}(∂_t g^T) H)|` at `t = 0`
    /// (order 1 only).
    pub order1_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub order: CompatOrder,
    /// `max |Ric^T - φ(Ric) g^T|`.
    pub conformal_residual: f64,
    /// The tangential condition differentiated once in time (order 1 only).
    pub conformal_residual_order1: Option<f64>,
    pub sides: Vec<SideCompatibility>,
    /// Largest residual evaluated at the requested order.
    pub max_residual: f64,
    /// Micro-step used along the flow path.
    pub micro_step: f64,
    /// Radial nodes the conditions were evaluated on.
    pub evaluation_nodes: usize,
}

/// Radial cell count of the evaluation grid for finer warped metrics. The
/// order-1 conditions take five radial derivatives, so rounding noise grows
/// like `ε h⁻⁵` and finer grids only add noise.
pub const COMPAT_MAX_CELLS: usize = 100;
/// Width of the local Lagrange interpolation onto the evaluation grid.
const RESAMPLE_WIDTH: usize = 10;

/// Resamples a warped metric onto [`COMPAT_MAX_CELLS`] cells.
fn coarsened(g: &MetricField) -> Result<MetricField> {
    let MetricField::Warped(w) = g else {
        return Ok(g.clone());
    };
    let fine = *w.grid();
    if fine.num_cells() <= COMPAT_MAX_CELLS {
        return Ok(g.clone());
    }
    let grid = Grid1D::new(fine.r_min(), fine.r_max(), COMPAT_MAX_CELLS)?;
    let h = fine.spacing();
    let n = fine.num_nodes();
    let resample = |f: Vec<f64>| -> Vec<f64> {
        grid.nodes()
            .iter()
            .map(|&r| {
                let x = (r - fine.r_min()) / h;
                let start = ((x.round() as usize).saturating_sub(RESAMPLE_WIDTH / 2)).min(n - RESAMPLE_WIDTH);
                let xs: Vec<f64> = (start..start + RESAMPLE_WIDTH).map(|j| j as f64).collect();
                let w = fornberg_weights(x, &xs, 0);
                w.iter().zip(&f[start..]).map(|(a, b)| a * b).sum()
            })
            .collect()
    };
    Ok(MetricField::Warped(WarpedMetric::from_components(w.dim(), grid, &resample(w.a()), &resample(w.b()))?))
}

/// Ricci-flow data in flat coordinates: `(A, B)` concatenated for warped
/// metrics, the conformal factor `u` for conformal ones.
fn state_of(g: &MetricField) -> Vec<f64> {
    match g {
        MetricField::Warped(w) => w.a().into_iter().chain(w.b()).collect(),
        MetricField::Conformal(c) => c.u().to_vec(),
    }
}

fn metric_of(template: &MetricField, state: &[f64]) -> Result<MetricField> {
    Ok(match template {
        MetricField::Warped(w) => {
            let n = w.grid().num_nodes();
            MetricField::Warped(WarpedMetric::from_components(w.dim(), *w.grid(), &state[..n], &state[n..])?)
        }
        MetricField::Conformal(c) => MetricField::Conformal(ConformalMetric::new(*c.grid(), c.angular(), state.to_vec())?),
    })
}

type C64 = Complex<f64>;

/// Applies a real linear operator to the real and imaginary parts.
fn linear(f: &[C64], op: impl Fn(&[f64]) -> Vec<f64>) -> Vec<C64> {
    let re: Vec<f64> = f.iter().map(|z| z.re).collect();
    let im: Vec<f64> = f.iter().map(|z| z.im).collect();
    op(&re).into_iter().zip(op(&im)).map(|(a, b)| C64::new(a, b)).collect()
}

/// Periodic sixth-order second derivative in the angle.
fn angular_d2(c: &ConformalMetric, f: &[f64]) -> Vec<f64> {
    let m = c.angular();
    if m < 7 {
        return c.d_tt(f);
    }
    const W: [f64; 4] = [-49.0 / 18.0, 1.5, -3.0 / 20.0, 1.0 / 90.0];
    let h2 = c.angular_spacing().powi(2);
    (0..f.len())
        .map(|idx| {
            let (i, j) = (idx / m, idx % m);
            let at = |o: usize, plus: bool| {
                let jj = if plus { (j + o) % m } else { (j + m - o) % m };
                f[i * m + jj]
            };
            let mut s = W[0] * f[idx];
            for o in 1..4 {
                s += W[o] * (at(o, true) + at(o, false));
            }
            s / h2
        })
        .collect()
}

fn radial(c: &ConformalMetric, st: &HighOrderStencils, f: &[f64], order: usize) -> Vec<f64> {
    let m = c.angular();
    let nodes = c.grid().num_nodes();
    let mut out = vec![0.0; f.len()];
    let mut column = vec![0.0; nodes];
    for j in 0..m {
        for (i, v) in column.iter_mut().enumerate() {
            *v = f[i * m + j];
        }
        for i in 0..nodes {
            out[i * m + j] = st.derivative_at(&column, i, order);
        }
    }
    out
}

/// Ricci-flow velocity in state coordinates at a complex state, so that a
/// complex-step perturbation yields the exact directional derivative.
fn velocity_complex(g: &MetricField, state: &[C64]) -> Vec<C64> {
    let st = HighOrderStencils::new(*g.grid(), COMPAT_STENCIL_WIDTH);
    match g {
        MetricField::Warped(w) => {
            let n = w.grid().num_nodes();
            let k = w.k() as f64;
            let phi: Vec<C64> = state[..n].iter().map(|a| a.sqrt()).collect();
            let psi: Vec<C64> = state[n..].iter().map(|b| b.sqrt()).collect();
            let pr = linear(&phi, |f| st.derivative(f, 1));
            let qr = linear(&psi, |f| st.derivative(f, 1));
            let qrr = linear(&psi, |f| st.derivative(f, 2));
            let mut out = vec![C64::new(0.0, 0.0); 2 * n];
            for i in 0..n {
                let (p, q) = (phi[i], psi[i]);
                let rr = -(qrr[i] / q - qr[i] * pr[i] / (p * q)) * k;
                let sphere = -q * (qrr[i] - qr[i] * pr[i] / p) / (p * p) + (-(qr[i] * qr[i]) / (p * p) + 1.0) * (k - 1.0);
                out[i] = rr * -2.0;
                out[n + i] = sphere * -2.0;
            }
            out
        }
        MetricField::Conformal(c) => {
            // ∂_t u = -K = e^{-2u} Δ_flat u
            let ur = linear(state, |f| radial(c, &st, f, 1));
            let urr = linear(state, |f| radial(c, &st, f, 2));
            let utt = linear(state, |f| angular_d2(c, f));
            (0..state.len())
                .map(|idx| {
                    let r = c.radius(idx);
                    (state[idx] * -2.0).exp() * (urr[idx] + ur[idx] / r + utt[idx] / (r * r))
                })
                .collect()
        }
    }
}

fn velocity(g: &MetricField) -> Vec<f64> {
    let x: Vec<C64> = state_of(g).into_iter().map(|v| C64::new(v, 0.0)).collect();
    velocity_complex(g, &x).into_iter().map(|z| z.re).collect()
}

/// `D(velocity)(g)[v]` by a complex step.
fn directional_derivative(g: &MetricField, x: &[f64], v: &[f64]) -> Vec<f64> {
    let step = 1e-30;
    let z: Vec<C64> = x.iter().zip(v).map(|(a, b)| C64::new(*a, step * b)).collect();
    velocity_complex(g, &z).into_iter().map(|w| w.im / step).collect()
}

/// High-order Ricci tensor, read off the Ricci-flow velocity.
fn ricci(g: &MetricField) -> VariationField {
    let v = velocity(g);
    match g {
        MetricField::Warped(w) => {
            let n = w.grid().num_nodes();
            VariationField::Warped(WarpedTensor {
                rr: v[..n].iter().map(|x| -0.5 * x).collect(),
                sphere: v[n..].iter().map(|x| -0.5 * x).collect(),
            })
        }
        MetricField::Conformal(c) => {
            let gt = c.as_tensor();
            let mut out = ConformalTensor::zeros(c.len());
            for idx in 0..c.len() {
                // Ric = K g with K = -u̇
                out.rr[idx] = -v[idx] * gt.rr[idx];
                out.tt[idx] = -v[idx] * gt.tt[idx];
            }
            VariationField::Conformal(out)
        }
    }
}

fn combine(x: &[f64], terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = x.to_vec();
    for (c, v) in terms {
        for (o, vi) in out.iter_mut().zip(v.iter()) {
            *o += c * vi;
        }
    }
    out
}

/// Tangential tensors `∂_t g` and `∂_t² g` of the path, in the ansatz.
fn path_tensors(g: &MetricField, v: &[f64], acc: &[f64]) -> (VariationField, VariationField) {
    match g {
        MetricField::Warped(w) => {
            let n = w.grid().num_nodes();
            let t = |x: &[f64]| {
                VariationField::Warped(WarpedTensor {
                    rr: x[..n].to_vec(),
                    sphere: x[n..].to_vec(),
                })
            };
            (t(v), t(acc))
        }
        MetricField::Conformal(c) => {
            // ∂_t e^{2u} = 2u̇ e^{2u}, ∂_t² e^{2u} = (2ü + 4u̇²) e^{2u}
            let second: Vec<f64> = v.iter().zip(acc).map(|(a, b)| b + 2.0 * a * a).collect();
            (
                VariationField::Conformal(c.conformal_variation(v)),
                VariationField::Conformal(c.conformal_variation(&second)),
            )
        }
    }
}

/// Boundary `(H, induced metric)` per side along the path at parameter `s`.
fn boundary_at(g: &MetricField, x: &[f64], v: &[f64], acc: &[f64], s: f64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let state = combine(x, &[(s, v), (0.5 * s * s, acc)]);
    let gs = metric_of(g, &state)?;
    Ok(geometry::boundary_state(&gs)
        .into_iter()
        .map(|b| (b.mean_curvature, b.induced_metric))
        .collect())
}

/// Checks the compatibility conditions of `g` up to the given order.
pub fn compatibility_check(g: &MetricField, order: CompatOrder) -> Result<CompatibilityReport> {
    let coarse = coarsened(g)?;
    let g = &coarse;
    let ric = ricci(g);
    let conformal_residual = variations::conformal_residual(g, &ric)?;
    let direct = variations::mc_condition_residual(g, &ric)?;

    let x = state_of(g);
    let v = velocity(g);
    // conformal factors are additive, so their rates are measured against unit size
    let floor = if matches!(g, MetricField::Conformal(_)) { 1.0 } else { f64::MIN_POSITIVE };
    let rate = x
        .iter()
        .zip(&v)
        .map(|(a, b)| b.abs() / a.abs().max(floor))
        .fold(0.0f64, f64::max);
    let acc = directional_derivative(g, &x, &v);
    // slow or static data still gets a step short on the unit time scale
    let s = MICRO_STEP / rate.max(1.0);

    let offsets = [-s, -0.5 * s, 0.0, 0.5 * s, s];
    let samples: Vec<Vec<(Vec<f64>, Vec<f64>)>> = offsets
        .iter()
        .map(|&o| boundary_at(g, &x, &v, &acc, o))
        .collect::<Result<_>>()?;

    // Richardson-extrapolated first and second derivatives at s = 0
    let d1 = |f: &dyn Fn(usize) -> f64| {
        let coarse = (f(4) - f(0)) / (2.0 * s);
        let fine = (f(3) - f(1)) / s;
        (4.0 * fine - coarse) / 3.0
    };
    let d2 = |f: &dyn Fn(usize) -> f64| {
        let coarse = (f(4) - 2.0 * f(2) + f(0)) / (s * s);
        let fine = (f(3) - 2.0 * f(2) + f(1)) / (0.25 * s * s);
        (4.0 * fine - coarse) / 3.0
    };

    let mut sides = Vec::new();
    let mut max_residual = conformal_residual;
    let mut conformal_residual_order1 = None;
    if order == CompatOrder::One {
        let (vel, acc_t) = path_tensors(g, &v, &acc);
        let r1 = variations::conformal_residual(g, &vel)?.max(variations::conformal_residual(g, &acc_t)?);
        conformal_residual_order1 = Some(r1);
        max_residual = max_residual.max(r1);
    }
    for (si, side) in Side::BOTH.into_iter().enumerate() {
        let values = &direct.iter().find(|b| b.side == side).expect("both sides").values;
        let mc_residual = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let count = samples[2][si].0.len();
        let mut path = 0.0f64;
        let mut order1 = 0.0f64;
        let mut dh_sum = 0.0;
        let mut d2h_sum = 0.0;
        for j in 0..count {
            let h = |k: usize| samples[k][si].0[j];
            let b = |k: usize| samples[k][si].1[j];
            let q = |k: usize| samples[k][si].0[j] * samples[k][si].1[j].sqrt();
            let b0 = b(2);
            let (dq, d2q, db) = (d1(&q), d2(&q), d1(&b));
            let dh = d1(&h);
            dh_sum += dh;
            d2h_sum += d2(&h);
            // E = ∂_t H + ½ (∂_t B / B) H = ∂_t(H√B) / √B
            let e0 = dq / b0.sqrt();
            let e1 = d2q / b0.sqrt() - 0.5 * dq * db / b0.powf(1.5);
            path = path.max((0.5 * e0).abs());
            order1 = order1.max(e1.abs());
        }
        max_residual = max_residual.max(mc_residual);
        if order == CompatOrder::One {
            max_residual = max_residual.max(order1);
        }
        let mean_h = samples[2][si].0.iter().sum::<f64>() / count as f64;
        sides.push(SideCompatibility {
            side,
            mean_curvature: mean_h,
            mc_residual,
            mc_residual_path: path,
            dh_dt: dh_sum / count as f64,
            d2h_dt2: (order == CompatOrder::One).then_some(d2h_sum / count as f64),
            order1_residual: (order == CompatOrder::One).then_some(order1),
        });
    }
    Ok(CompatibilityReport {
        order,
        conformal_residual,
        conformal_residual_order1,
        sides,
        max_residual,
        micro_step: s,
        evaluation_nodes: g.grid().num_nodes(),
    })
}
