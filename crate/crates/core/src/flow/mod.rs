//! Ricci-deTurck flow with conformal-class and mean-curvature boundary
//! conditions, the pullback to Ricci flow, and compatibility checks.
//!
//! Time integration is available on warped products only. The boundary
//! conditions are `ξ = 0`, `∂_t H + (2(n-1))⁻¹ tr_{g^T}(∂_t g^T) H = 0` and
//! `(∂_t g)^T ∝ g^T`; the last one holds identically in the ansatz and is
//! recorded as a residual.

mod compat;
pub mod io;
mod pullback;
mod rescale;
pub mod stepper;

use serde::{Deserialize, Serialize};

pub use compat::{compatibility_check, CompatOrder, CompatibilityReport, SideCompatibility};
pub use pullback::{deturck_pullback, DiffeoFamily, Pullback};
pub use rescale::{parabolic_rescaling_check, RescalingReport, RESCALING_TOLERANCE};

use crate::error::{Error, Result};
use crate::geometry::{self, MetricField, Side, VariationField, WarpedMetric, WarpedTensor};
use crate::spectral;
use crate::variations;

use stepper::{bdf_weights, Integrator, WarpedSystem};

/// Default bound on the boundary-law residual.
pub const DEFAULT_BOUNDARY_TOLERANCE: f64 = 1e-6;

/// Growth factor of `‖u‖` or `‖u⁻¹‖` beyond which a run is declared blown up.
pub const BLOW_UP_FACTOR: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stepper {
    /// Implicit frozen-coefficient Laplacian, explicit remainder (second
    /// order backward differences after a first Euler step).
    Imex,
    /// Forward Euler; requires `dt ≤ min(A) Δr² / 2`.
    Explicit,
}

/// Which equation the snapshots of a trace solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceGauge {
    /// `∂_t u = -2Ric_u - 2δ*_u ξ(u)`.
    RicciDeTurck,
    /// `∂_t g = -2Ric_g`.
    Ricci,
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub initial: MetricField,
    /// Gauge metric of the deTurck field; `None` uses the initial metric.
    pub background: Option<MetricField>,
    pub t_end: f64,
    /// Time step; `None` uses `Δr² / 4`.
    pub dt: Option<f64>,
    pub boundary_tolerance: f64,
    pub stepper: Stepper,
    /// Every `stride`-th snapshot is written by the trace serializers.
    pub stride: usize,
    /// Evaluate λ every this many steps; `None` skips it.
    pub lambda_stride: Option<usize>,
}

impl FlowConfig {
    pub fn new(initial: MetricField, t_end: f64) -> Self {
        Self {
            initial,
            background: None,
            t_end,
            dt: None,
            boundary_tolerance: DEFAULT_BOUNDARY_TOLERANCE,
            stepper: Stepper::Imex,
            stride: 1,
            lambda_stride: None,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_stepper(mut self, stepper: Stepper) -> Self {
        self.stepper = stepper;
        self
    }

    pub fn with_background(mut self, background: MetricField) -> Self {
        self.background = Some(background);
        self
    }

    pub fn default_dt(&self) -> f64 {
        let h = self.initial.grid().spacing();
        0.25 * h * h
    }

    /// Validated step count and uniform step size covering `[0, t_end]`.
    pub fn schedule(&self) -> Result<(usize, f64)> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::BadConfig(format!("t_end must be positive, got {}", self.t_end)));
        }
        let dt = self.dt.unwrap_or_else(|| self.default_dt());
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::BadConfig(format!("dt must be positive, got {dt}")));
        }
        if !(self.boundary_tolerance > 0.0) {
            return Err(Error::BadConfig("boundary tolerance must be positive".into()));
        }
        if self.stride == 0 {
            return Err(Error::BadConfig("output stride must be at least 1".into()));
        }
        if self.lambda_stride == Some(0) {
            return Err(Error::BadConfig("lambda stride must be at least 1".into()));
        }
        let steps = (self.t_end / dt - 1e-9).ceil().max(1.0) as usize;
        Ok((steps, self.t_end / steps as f64))
    }
}

/// Diagnostics recorded at one time level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    /// Max over interior nodes of `|∂_t u - RHS|_u`, with `RHS` the
    /// Ricci-deTurck or Ricci right-hand side depending on the gauge.
    pub ricci_residual: f64,
    pub bc_conformal_residual: f64,
    /// `|∂_t H + (2(n-1))⁻¹ tr(∂_t g^T) H|` with backward differences.
    pub bc_mc_residual: f64,
    pub deturck_norm: f64,
    /// Mean curvature of the inner and outer boundary.
    pub mean_curvature: [f64; 2],
    pub lambda: Option<f64>,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub times: Vec<f64>,
    pub snapshots: Vec<MetricField>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub background: MetricField,
    pub gauge: TraceGauge,
    pub dt: f64,
    /// Backward-difference order of the step reaching each snapshot (0 for
    /// the initial one).
    pub bdf_orders: Vec<usize>,
    pub stride: usize,
    pub warnings: Vec<String>,
}

impl FlowTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_metric(&self) -> &MetricField {
        self.snapshots.last().expect("a trace holds at least the initial metric")
    }

    pub fn max_ricci_residual(&self) -> f64 {
        self.max_of(|d| d.ricci_residual)
    }

    pub fn max_bc_mc_residual(&self) -> f64 {
        self.max_of(|d| d.bc_mc_residual)
    }

    pub fn max_bc_conformal_residual(&self) -> f64 {
        self.max_of(|d| d.bc_conformal_residual)
    }

    pub fn max_deturck_norm(&self) -> f64 {
        self.max_of(|d| d.deturck_norm)
    }

    fn max_of(&self, f: impl Fn(&StepDiagnostics) -> f64) -> f64 {
        self.diagnostics.iter().map(f).fold(0.0, f64::max)
    }
}

/// Runs the Ricci-deTurck flow with the mean-curvature boundary law.
pub fn rdt_flow(config: &FlowConfig) -> Result<FlowTrace> {
    let (steps, dt) = config.schedule()?;
    let g0 = config.initial.as_warped().map_err(|_| Error::UnsupportedBackend("rdt_flow"))?;
    let background = config.background.clone().unwrap_or_else(|| config.initial.clone());
    let bg = background.as_warped().map_err(|_| Error::UnsupportedBackend("rdt_flow"))?;
    if bg.grid() != g0.grid() || bg.dim() != g0.dim() {
        return Err(Error::BadConfig("background must share the grid and dimension of the initial metric".into()));
    }
    if config.stepper == Stepper::Explicit {
        let h = g0.grid().spacing();
        let limit = 0.5 * g0.a().iter().cloned().fold(f64::INFINITY, f64::min) * h * h;
        if dt > limit {
            return Err(Error::BadConfig(format!(
                "explicit step {dt:e} exceeds the stability limit {limit:e}"
            )));
        }
    }

    let mut warnings = Vec::new();
    let compat = compatibility_check(&config.initial, CompatOrder::Zero)?;
    if compat.max_residual > config.boundary_tolerance {
        warnings.push(format!(
            "initial metric is not compatible to order 0 (residual {:e})",
            compat.max_residual
        ));
    }

    let system = WarpedSystem::new(bg);
    let mut integrator = Integrator::new(&system, g0, config.stepper, dt, config.boundary_tolerance);
    let bounds = Bounds::new(g0);
    let mut times = vec![0.0];
    let mut snapshots = vec![config.initial.clone()];
    let mut iterations = vec![0];
    for step in 1..=steps {
        let t = step as f64 * dt;
        integrator.step(t)?;
        let (a, b) = integrator.state();
        bounds.check(a, b, t)?;
        let metric = WarpedMetric::from_components(g0.dim(), *g0.grid(), a, b).map_err(|e| Error::BlowUp {
            time: t,
            reason: e.to_string(),
        })?;
        times.push(t);
        snapshots.push(MetricField::Warped(metric));
        iterations.push(integrator.newton_iterations);
    }

    let bdf_orders: Vec<usize> = (0..times.len())
        .map(|m| match (config.stepper, m) {
            (_, 0) => 0,
            (Stepper::Imex, m) if m >= 2 => 2,
            _ => 1,
        })
        .collect();
    let mut diagnostics = assemble_diagnostics(
        &times,
        &snapshots,
        &background,
        TraceGauge::RicciDeTurck,
        &bdf_orders,
        config.lambda_stride,
    )?;
    for (d, it) in diagnostics.iter_mut().zip(iterations) {
        d.newton_iterations = it;
    }
    Ok(FlowTrace {
        times,
        snapshots,
        diagnostics,
        background,
        gauge: TraceGauge::RicciDeTurck,
        dt,
        bdf_orders,
        stride: config.stride,
        warnings,
    })
}

struct Bounds {
    max: f64,
    min: f64,
}

impl Bounds {
    fn new(g: &WarpedMetric) -> Self {
        let values: Vec<f64> = g.a().into_iter().chain(g.b()).collect();
        Self {
            max: values.iter().cloned().fold(0.0, f64::max),
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    fn check(&self, a: &[f64], b: &[f64], t: f64) -> Result<()> {
        for &v in a.iter().chain(b) {
            if !v.is_finite() || v > BLOW_UP_FACTOR * self.max {
                return Err(Error::BlowUp {
                    time: t,
                    reason: format!("metric component {v:e} exceeds the bound"),
                });
            }
            if v < self.min / BLOW_UP_FACTOR {
                return Err(Error::BlowUp {
                    time: t,
                    reason: format!("metric component {v:e} degenerates"),
                });
            }
        }
        Ok(())
    }
}

/// Difference of two snapshots in the backend ansatz.
fn difference(a: &MetricField, b: &MetricField) -> Result<VariationField> {
    a.as_variation().axpy(-1.0, &b.as_variation())
}

/// Time derivative at snapshot `m`: central in the interior of the trace,
/// one-sided second order at its ends.
fn time_derivative(snapshots: &[MetricField], dt: f64, m: usize) -> Result<VariationField> {
    let last = snapshots.len() - 1;
    let v = |i: usize| snapshots[i].as_variation();
    if last == 1 {
        return Ok(difference(&snapshots[1], &snapshots[0])?.scaled(1.0 / dt));
    }
    let d = if m == 0 {
        v(0).scaled(-3.0).axpy(4.0, &v(1))?.axpy(-1.0, &v(2))?
    } else if m == last {
        v(last).scaled(3.0).axpy(-4.0, &v(last - 1))?.axpy(1.0, &v(last - 2))?
    } else {
        difference(&snapshots[m + 1], &snapshots[m - 1])?
    };
    Ok(d.scaled(0.5 / dt))
}

fn interior_norm(g: &MetricField, x: &VariationField) -> Result<f64> {
    let values = geometry::inner_product(g, x, x)?;
    let grid = g.grid();
    let per_ring = values.len() / grid.num_nodes();
    let n = grid.last();
    Ok(values
        .iter()
        .enumerate()
        .filter(|(idx, _)| {
            let i = idx / per_ring;
            i != 0 && i != n
        })
        .map(|(_, v)| v.abs().sqrt())
        .fold(0.0, f64::max))
}

/// Boundary values `(H, induced metric factor)` of every node on one side.
fn boundary_values(g: &MetricField, side: Side) -> (Vec<f64>, Vec<f64>) {
    let state = geometry::boundary_state(g)
        .into_iter()
        .find(|s| s.side == side)
        .expect("both sides are present");
    (state.mean_curvature, state.induced_metric)
}

/// Backward-difference residual of the mean-curvature law at snapshot `m`.
fn mc_law_residual(snapshots: &[MetricField], dt: f64, m: usize, order: usize) -> f64 {
    if m == 0 || order == 0 {
        return 0.0;
    }
    let w = bdf_weights(order);
    let mut worst = 0.0f64;
    for side in Side::BOTH {
        let (h0, b0) = boundary_values(&snapshots[m], side);
        let (h1, b1) = boundary_values(&snapshots[m - 1], side);
        let (h2, b2) = if order >= 2 {
            boundary_values(&snapshots[m - 2], side)
        } else {
            (vec![0.0; h0.len()], vec![0.0; b0.len()])
        };
        for j in 0..h0.len() {
            let dh = (w[0] * h0[j] + w[1] * h1[j] + w[2] * h2[j]) / dt;
            let db = (w[0] * b0[j] + w[1] * b1[j] + w[2] * b2[j]) / dt;
            worst = worst.max((dh + 0.5 * db / b0[j] * h0[j]).abs());
        }
    }
    worst
}

/// Recomputes every per-step diagnostic of a sequence of snapshots.
pub(crate) fn assemble_diagnostics(
    times: &[f64],
    snapshots: &[MetricField],
    background: &MetricField,
    gauge: TraceGauge,
    bdf_orders: &[usize],
    lambda_stride: Option<usize>,
) -> Result<Vec<StepDiagnostics>> {
    let dt = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
    let mut out = Vec::with_capacity(times.len());
    for (m, g) in snapshots.iter().enumerate() {
        let ricci_residual = if snapshots.len() > 1 {
            let dtu = time_derivative(snapshots, dt, m)?;
            let rhs = match gauge {
                TraceGauge::RicciDeTurck => variations::ricci_deturck_rhs(g, background)?,
                TraceGauge::Ricci => geometry::curvature(g).ricci.scaled(-2.0),
            };
            interior_norm(g, &dtu.axpy(-1.0, &rhs)?)?
        } else {
            0.0
        };
        let bc_conformal_residual = if m > 0 {
            variations::conformal_residual(g, &difference(g, &snapshots[m - 1])?.scaled(1.0 / dt))?
        } else {
            0.0
        };
        let deturck_norm = variations::deturck_field(g, background)?.max_norm(g);
        let states = geometry::boundary_state(g);
        let lambda = match lambda_stride {
            Some(s) if m % s == 0 => Some(spectral::lambda_eig(g)?.lambda),
            _ => None,
        };
        out.push(StepDiagnostics {
            t: times[m],
            ricci_residual,
            bc_conformal_residual,
            bc_mc_residual: mc_law_residual(snapshots, dt, m, bdf_orders[m]),
            deturck_norm,
            mean_curvature: [states[0].mean_h(), states[1].mean_h()],
            lambda,
            newton_iterations: 0,
        });
    }
    Ok(out)
}

/// Comparison of a trace started at an Einstein metric with the exact
/// rescaling `g_t = (1 - 2μt) g₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EinsteinRescaling {
    pub mu: f64,
    /// `max_t ‖u_t - (1-2μt)g₀‖_∞ / ‖g₀‖_∞`.
    pub max_relative_deviation: f64,
    /// `max_t |∂_t H - μ(1-2μt)^{-3/2} H₀| / |H₀|` over both boundaries, with
    /// the backward differences of the trace.
    pub max_mc_rate_error: f64,
    /// `max_t |H(t)(1-2μt)^{1/2} - H₀| / |H₀|`.
    pub max_mc_scaling_error: f64,
}

/// Measures how closely a warped trace follows the Einstein rescaling.
pub fn einstein_rescaling(trace: &FlowTrace, mu: f64) -> Result<EinsteinRescaling> {
    let g0 = trace.snapshots[0].as_warped()?;
    let (a0, b0) = (g0.a(), g0.b());
    let norm = a0.iter().chain(&b0).fold(0.0f64, |m, v| m.max(v.abs()));
    let h0 = trace.diagnostics[0].mean_curvature;
    let mut deviation = 0.0f64;
    let mut rate = 0.0f64;
    let mut scaling = 0.0f64;
    for (m, g) in trace.snapshots.iter().enumerate() {
        let t = trace.times[m];
        let c = 1.0 - 2.0 * mu * t;
        let g = g.as_warped()?;
        for (u, u0) in g.a().iter().zip(&a0).chain(g.b().iter().zip(&b0)) {
            deviation = deviation.max((u - c * u0).abs() / norm);
        }
        for s in 0..2 {
            if h0[s].abs() < 1e-12 {
                continue;
            }
            let h = trace.diagnostics[m].mean_curvature[s];
            scaling = scaling.max((h * c.sqrt() - h0[s]).abs() / h0[s].abs());
            if m > 0 {
                let order = trace.bdf_orders[m];
                let w = bdf_weights(order);
                let prev2 = if order >= 2 {
                    trace.diagnostics[m - 2].mean_curvature[s]
                } else {
                    0.0
                };
                let dh = (w[0] * h + w[1] * trace.diagnostics[m - 1].mean_curvature[s] + w[2] * prev2) / trace.dt;
                let exact = mu * c.powf(-1.5) * h0[s];
                rate = rate.max((dh - exact).abs() / h0[s].abs());
            }
        }
    }
    Ok(EinsteinRescaling {
        mu,
        max_relative_deviation: deviation,
        max_mc_rate_error: rate,
        max_mc_scaling_error: scaling,
    })
}

/// Einstein constant of `g` if `‖Ric - μg‖` is within `tolerance` of zero
/// relative to `|μ|` (or absolutely when `μ = 0`).
pub fn einstein_constant(g: &MetricField, tolerance: f64) -> Option<f64> {
    let ric = geometry::curvature(g).ricci;
    let scal = geometry::trace(g, &ric).ok()?;
    let weights = g.volume_weights();
    let vol: f64 = weights.iter().sum();
    let mu = scal.iter().zip(&weights).map(|(s, w)| s * w).sum::<f64>() / vol / g.dim() as f64;
    let diff = ric.axpy(-mu, &g.as_variation()).ok()?;
    let worst = geometry::inner_product(g, &diff, &diff)
        .ok()?
        .into_iter()
        .fold(0.0f64, |m, v| m.max(v.abs().sqrt()));
    (worst <= tolerance * mu.abs().max(1.0)).then_some(mu)
}

/// Warped snapshot values `(A, B)` of a trace entry.
pub fn warped_components(g: &MetricField) -> Result<WarpedTensor> {
    Ok(g.as_warped()?.as_tensor())
}
