//! One runner per subcommand. Runners compute; `output` writes.

use nalgebra::DMatrix;
use ricci_boundary::complementarity::{self, SymbolSystem, DEFAULT_THRESHOLD};
use ricci_boundary::flow::{
    self, CompatOrder, FlowConfig, FlowTrace, Stepper, DEFAULT_BOUNDARY_TOLERANCE, RESCALING_TOLERANCE,
};
use ricci_boundary::geometry::{self, MetricField, VariationField};
use ricci_boundary::grid::observed_rate;
use ricci_boundary::presets::GeometrySpec;
use ricci_boundary::spectral;
use ricci_boundary::variations;
use serde_json::{json, Map, Value};

use crate::config::{CommandKind, ExperimentSpec};
use crate::error::{CliError, Result};

/// Flow step used when none is given. Fine enough for the Einstein rescaling
/// to hold to better than 10⁻³ on the default grids.
pub const DEFAULT_DT: f64 = 1e-4;
pub const DEFAULT_T_END: f64 = 0.1;
/// Snapshot stride of trace CSVs when none is given.
pub const DEFAULT_STRIDE: usize = 10;
/// Relative deviation allowed by `einstein-test`.
pub const EINSTEIN_TOLERANCE: f64 = 1e-3;
/// Relative error allowed in `∂_t H` by `einstein-test`.
pub const MC_RATE_TOLERANCE: f64 = 1e-2;
/// Smallest ratio of coarse to fine Einstein deviation for `--refine`.
pub const REFINEMENT_FACTOR: f64 = 3.0;
/// Allowed `|λ - λ_exact| / max(1, |λ_exact|)` and scalar-curvature error.
pub const SPECTRAL_TOLERANCE: f64 = 1e-3;
/// Allowed `|λ' - FD| / (1 + |FD|)` in `variation-check`.
pub const LAMBDA_VARIATION_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const RATE_FLOOR: f64 = 1.8;
/// Defects below this are at rounding level and carry no rate.
const ROUNDING_FLOOR: f64 = 1e-10;
pub const CANCELLATION_TOLERANCE: f64 = 1e-6;
/// Default compatibility tolerances by order. The order-1 conditions take
/// five radial derivatives and sit near 5e-3 even for exactly compatible data.
pub const COMPAT_TOLERANCE: [f64; 2] = [1e-5, 1e-2];
pub const DEFAULT_SAMPLES: usize = 200;

/// A serialized CSV artifact and the suffix of its file name.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub suffix: &'static str,
    pub bytes: Vec<u8>,
}

struct TableWriter {
    suffix: &'static str,
    out: csv::Writer<Vec<u8>>,
    error: Option<csv::Error>,
}

impl TableWriter {
    fn new(suffix: &'static str, header: &[&str]) -> Self {
        let mut out = csv::Writer::from_writer(Vec::new());
        let error = out.write_record(header).err();
        Self { suffix, out, error }
    }

    fn push(&mut self, row: Vec<String>) {
        if self.error.is_none() {
            self.error = self.out.write_record(&row).err();
        }
    }

    fn finish(self) -> Result<Table> {
        if let Some(e) = self.error {
            return Err(e.into());
        }
        let bytes = self.out.into_inner().map_err(|e| CliError::io("<csv buffer>", e.into_error()))?;
        Ok(Table {
            suffix: self.suffix,
            bytes,
        })
    }
}

/// One observation of the tidy plot-data export.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub series: String,
    pub t: Option<f64>,
    pub r: Option<f64>,
    pub theta: Option<f64>,
    pub index: Option<usize>,
    pub value: f64,
}

impl PlotPoint {
    fn new(series: &str, value: f64) -> Self {
        Self {
            series: series.to_string(),
            t: None,
            r: None,
            theta: None,
            index: None,
            value,
        }
    }

    fn at_t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    fn at(mut self, (r, theta): (f64, Option<f64>)) -> Self {
        self.r = Some(r);
        self.theta = theta;
        self
    }

    fn index(mut self, index: usize) -> Self {
        self.index = Some(index);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Command-specific report fields.
    pub report: Map<String, Value>,
    /// `None` for commands that only compute.
    pub pass: Option<bool>,
    pub tolerance: Option<f64>,
    pub tables: Vec<Table>,
    pub plot: Vec<PlotPoint>,
}

impl Outcome {
    fn new(report: Value, pass: Option<bool>, tolerance: Option<f64>) -> Self {
        let Value::Object(report) = report else {
            unreachable!("reports are JSON objects")
        };
        Self {
            report,
            pass,
            tolerance,
            tables: Vec::new(),
            plot: Vec::new(),
        }
    }
}

pub fn run(spec: &ExperimentSpec) -> Result<Outcome> {
    match spec.command()? {
        CommandKind::Curvature => curvature(spec),
        CommandKind::Boundary => boundary(spec),
        CommandKind::Lambda => lambda(spec),
        CommandKind::VariationCheck => variation_check(spec),
        CommandKind::Complementarity => complementarity(spec),
        CommandKind::Flow => flow_run(spec),
        CommandKind::EinsteinTest => einstein_test(spec),
        CommandKind::RescalingCheck => rescaling_check(spec),
        CommandKind::CompatCheck => compat_check(spec),
    }
}

/// Shortest round-trip form, with an exponent for very small or large values.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// `(r, θ)` of every node; `θ` only on the conformal backend.
fn coordinates(g: &MetricField) -> Vec<(f64, Option<f64>)> {
    match g {
        MetricField::Warped(w) => w.grid().nodes().into_iter().map(|r| (r, None)).collect(),
        MetricField::Conformal(c) => (0..c.len()).map(|i| (c.radius(i), Some(c.theta(i)))).collect(),
    }
}

fn geometry(spec: &ExperimentSpec) -> Result<(GeometrySpec, MetricField)> {
    let gs = spec.geometry_spec()?;
    let g = gs.build()?;
    Ok((gs, g))
}

fn positive(name: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {value}")))
    }
}

fn tolerance(spec: &ExperimentSpec, default: f64) -> Result<f64> {
    positive("tolerance", spec.numerics.tolerance.unwrap_or(default))
}

fn extrema(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
}

fn curvature(spec: &ExperimentSpec) -> Result<Outcome> {
    let (gs, g) = geometry(spec)?;
    let tol = tolerance(spec, SPECTRAL_TOLERANCE)?;
    let pack = geometry::curvature(&g);
    let (lo, hi) = extrema(&pack.scalar);
    let exact = gs.einstein_constant().map(|mu| gs.dim as f64 * mu);
    let error = exact.map(|s| pack.scalar.iter().fold(0.0f64, |m, v| m.max((v - s).abs())) / s.abs().max(1.0));
    let pass = error.map(|e| e <= tol);
    let mut out = Outcome::new(
        json!({
            "scalar_min": lo,
            "scalar_max": hi,
            "scalar_exact": exact,
            "scalar_error": error,
            "einstein_constant": flow::einstein_constant(&g, tol),
            "volume": g.volume(),
        }),
        pass,
        Some(tol),
    );
    let coords = coordinates(&g);
    let mut table;
    match &pack.ricci {
        VariationField::Warped(ric) => {
            let w = g.as_warped()?;
            table = TableWriter::new("curvature", &["node", "r", "phi", "psi", "ric_rr", "ric_sphere", "scal"]);
            for (i, &(r, _)) in coords.iter().enumerate() {
                table.push(vec![
                    i.to_string(),
                    num(r),
                    num(w.phi()[i]),
                    num(w.psi()[i]),
                    num(ric.rr[i]),
                    num(ric.sphere[i]),
                    num(pack.scalar[i]),
                ]);
                out.plot.push(PlotPoint::new("ric_rr", ric.rr[i]).at(coords[i]));
                out.plot.push(PlotPoint::new("ric_sphere", ric.sphere[i]).at(coords[i]));
            }
        }
        VariationField::Conformal(ric) => {
            let c = g.as_conformal()?;
            table = TableWriter::new("curvature", &["node", "r", "theta", "u", "ric_rr", "ric_rt", "ric_tt", "scal"]);
            for (i, &(r, theta)) in coords.iter().enumerate() {
                table.push(vec![
                    i.to_string(),
                    num(r),
                    opt(theta),
                    num(c.u()[i]),
                    num(ric.rr[i]),
                    num(ric.rt[i]),
                    num(ric.tt[i]),
                    num(pack.scalar[i]),
                ]);
            }
        }
    }
    for (i, s) in pack.scalar.iter().enumerate() {
        out.plot.push(PlotPoint::new("scal", *s).at(coords[i]));
    }
    out.tables.push(table.finish()?);
    Ok(out)
}

fn boundary(spec: &ExperimentSpec) -> Result<Outcome> {
    let (_, g) = geometry(spec)?;
    let states = geometry::boundary_state(&g);
    let coords = coordinates(&g);
    let sides: Vec<Value> = states
        .iter()
        .map(|s| {
            let (lo, hi) = extrema(&s.mean_curvature);
            json!({
                "side": s.side.name(),
                "orientation": s.orientation,
                "mean_h": s.mean_h(),
                "h_min": lo,
                "h_max": hi,
                "area": s.area(),
            })
        })
        .collect();
    let mut out = Outcome::new(json!({ "sides": sides }), None, None);
    let mut table = TableWriter::new(
        "boundary",
        &["side", "index", "theta", "induced_metric", "second_fundamental_form", "mean_curvature", "area_weight"],
    );
    for s in &states {
        for (j, node) in g.boundary_nodes(s.side).into_iter().enumerate() {
            table.push(vec![
                s.side.name().to_string(),
                j.to_string(),
                opt(coords[node].1),
                num(s.induced_metric[j]),
                num(s.second_fundamental_form[j]),
                num(s.mean_curvature[j]),
                num(s.area_weights[j]),
            ]);
            out.plot.push(PlotPoint::new(&format!("mean_curvature_{}", s.side.name()), s.mean_curvature[j]).at(coords[node]));
        }
    }
    out.tables.push(table.finish()?);
    Ok(out)
}

fn lambda(spec: &ExperimentSpec) -> Result<Outcome> {
    let (gs, g) = geometry(spec)?;
    let tol = tolerance(spec, SPECTRAL_TOLERANCE)?;
    let method = spec.numerics.method.unwrap_or_default();
    let res = spectral::lambda_eig_with(&g, method)?;
    // on an Einstein metric f is constant and λ = scal = nμ
    let expected = gs.einstein_constant().map(|mu| gs.dim as f64 * mu);
    let error = expected.map(|e| (res.lambda - e).abs() / e.abs().max(1.0));
    let mut out = Outcome::new(
        json!({
            "lambda": res.lambda,
            "expected": expected,
            "error": error,
            "method": method,
            "residuals": res.residuals,
        }),
        error.map(|e| e <= tol),
        Some(tol),
    );
    let coords = coordinates(&g);
    let mut table = TableWriter::new("eigenfunction", &["node", "r", "theta", "eigenfunction", "minimizer"]);
    for (i, &(r, theta)) in coords.iter().enumerate() {
        table.push(vec![i.to_string(), num(r), opt(theta), num(res.eigenfunction[i]), num(res.minimizer[i])]);
        out.plot.push(PlotPoint::new("eigenfunction", res.eigenfunction[i]).at(coords[i]));
        out.plot.push(PlotPoint::new("minimizer", res.minimizer[i]).at(coords[i]));
    }
    out.tables.push(table.finish()?);
    Ok(out)
}

/// The same geometry with half the spacing in every direction.
fn refined(gs: &GeometrySpec) -> Result<MetricField> {
    let mut fine = gs.clone();
    fine.nodes = 2 * gs.nodes - 1;
    if gs.is_conformal() {
        fine.angular = gs.angular.map(|m| 2 * m);
    }
    Ok(fine.build()?)
}

fn identity_defect(g: &MetricField, h: &VariationField) -> Result<f64> {
    Ok(variations::boundary_identity_residual(g, h)?
        .iter()
        .map(|b| b.max_abs())
        .fold(0.0, f64::max))
}

fn variation_check(spec: &ExperimentSpec) -> Result<Outcome> {
    let (gs, g) = geometry(spec)?;
    let tol = tolerance(spec, LAMBDA_VARIATION_TOLERANCE)?;
    let fd_step = positive("fd-step", spec.numerics.fd_step.unwrap_or(DEFAULT_FD_STEP))?;
    let first = spec.numerics.seed.unwrap_or(0);
    let count = spec.numerics.count.unwrap_or(10);
    if count == 0 {
        return Err(CliError::Config("count must be at least 1".into()));
    }
    let fine = refined(&gs)?;
    let eig = spectral::lambda_eig(&g)?;
    let mut table = TableWriter::new(
        "variations",
        &[
            "seed",
            "identity_defect",
            "identity_defect_refined",
            "identity_rate",
            "lambda_formula",
            "lambda_fd",
            "lambda_error",
            "cancellation_boundary",
        ],
    );
    let mut plot = Vec::new();
    let (mut worst_rate, mut worst_defect, mut worst_lambda, mut worst_boundary) =
        (f64::INFINITY, 0.0f64, 0.0f64, None::<f64>);
    let mut pass = true;
    for seed in first..first + count as u64 {
        let coarse = identity_defect(&g, &variations::random_variation(&g, seed))?;
        let fine_defect = identity_defect(&fine, &variations::random_variation(&fine, seed))?;
        let rate = (fine_defect > ROUNDING_FLOOR).then(|| observed_rate(coarse, fine_defect));
        pass &= rate.is_none_or(|r| r >= RATE_FLOOR);
        if let Some(r) = rate {
            worst_rate = worst_rate.min(r);
        }
        worst_defect = worst_defect.max(fine_defect);
        // λ' needs h to be conformal on the boundary
        let (h, boundary) = match &g {
            MetricField::Warped(_) => {
                let h = variations::mc_compatible(&g, &variations::random_variation(&g, seed))?;
                let report = spectral::lambda_boundary_cancellation_check(&g, &h, CANCELLATION_TOLERANCE)?;
                pass &= report.passed;
                (h, Some(report.boundary))
            }
            MetricField::Conformal(c) => {
                (VariationField::Conformal(variations::random_conformal_variation(c, seed).1), None)
            }
        };
        let formula = spectral::lambda_first_variation_at(&g, &h, &eig)?.total;
        let fd = spectral::lambda_finite_difference(&g, &h, fd_step)?;
        let err = (formula - fd).abs() / (1.0 + fd.abs());
        pass &= err <= tol;
        worst_lambda = worst_lambda.max(err);
        if let Some(b) = boundary {
            worst_boundary = Some(worst_boundary.unwrap_or(0.0).max(b.abs()));
        }
        table.push(vec![
            seed.to_string(),
            num(coarse),
            num(fine_defect),
            opt(rate),
            num(formula),
            num(fd),
            num(err),
            opt(boundary),
        ]);
        let idx = seed as usize;
        plot.push(PlotPoint::new("identity_defect", coarse).index(idx));
        plot.push(PlotPoint::new("identity_defect_refined", fine_defect).index(idx));
        plot.push(PlotPoint::new("lambda_error", err).index(idx));
    }
    let mut out = Outcome::new(
        json!({
            "seeds": [first, first + count as u64 - 1],
            "fd_step": fd_step,
            "rate_floor": RATE_FLOOR,
            "min_identity_rate": worst_rate.is_finite().then_some(worst_rate),
            "max_identity_defect_refined": worst_defect,
            "max_lambda_error": worst_lambda,
            "max_cancellation_boundary": worst_boundary,
            "cancellation_tolerance": CANCELLATION_TOLERANCE,
        }),
        Some(pass),
        Some(tol),
    );
    out.tables.push(table.finish()?);
    out.plot = plot;
    Ok(out)
}

/// `euclidean`, `diag:a,b,...` or the `n²` row-major entries of the frozen
/// metric.
fn symbol_system(n: usize, metric: &str) -> Result<SymbolSystem> {
    let parse = |list: &str| -> Result<Vec<f64>> {
        list.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Config(format!("bad metric entry `{s}`")))
            })
            .collect()
    };
    let h = if metric == "euclidean" {
        DMatrix::identity(n, n)
    } else if let Some(list) = metric.strip_prefix("diag:") {
        let d = parse(list)?;
        if d.len() != n {
            return Err(CliError::Config(format!("diag metric needs {n} entries, got {}", d.len())));
        }
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
    } else {
        let e = parse(metric)?;
        if e.len() != n * n {
            return Err(CliError::Config(format!("metric needs {} entries, got {}", n * n, e.len())));
        }
        let h = DMatrix::from_row_slice(n, n, &e);
        if (&h - h.transpose()).amax() > 1e-12 {
            return Err(CliError::Config("metric must be symmetric".into()));
        }
        h
    };
    Ok(SymbolSystem::new(h)?)
}

fn complementarity(spec: &ExperimentSpec) -> Result<Outcome> {
    let nm = &spec.numerics;
    let n = nm.n.unwrap_or(3);
    let metric = nm.metric.as_deref().unwrap_or("euclidean");
    let count = nm.samples.unwrap_or(DEFAULT_SAMPLES);
    if count == 0 {
        return Err(CliError::Config("samples must be at least 1".into()));
    }
    let threshold = positive("threshold", nm.threshold.unwrap_or(DEFAULT_THRESHOLD))?;
    let system = symbol_system(n, metric)?.with_variant(nm.variant.unwrap_or_default());
    let samples = complementarity::default_samples(n, count, system.delta());
    let report = complementarity::complementarity_report(&system, &samples, threshold)?;
    let mut out = Outcome::new(
        json!({
            "n": report.n,
            "metric": metric,
            "variant": report.variant,
            "samples": report.samples.len(),
            "min_sv": report.min_sv,
            "delta": report.delta,
            "b_rows": report.b_rows,
        }),
        Some(report.passed),
        Some(threshold),
    );
    let mut table = TableWriter::new("samples", &["sample", "zeta", "z_re", "z_im", "tau_re", "tau_im", "min_sv"]);
    for (k, s) in report.samples.iter().enumerate() {
        let zeta: Vec<String> = s.zeta.iter().map(|x| num(*x)).collect();
        table.push(vec![
            k.to_string(),
            zeta.join(";"),
            num(s.z_re),
            num(s.z_im),
            num(s.tau_re),
            num(s.tau_im),
            num(s.min_sv),
        ]);
        out.plot.push(PlotPoint::new("min_sv", s.min_sv).index(k));
    }
    out.tables.push(table.finish()?);
    Ok(out)
}

fn flow_config(spec: &ExperimentSpec, initial: MetricField) -> Result<FlowConfig> {
    let nm = &spec.numerics;
    let mut config = FlowConfig::new(initial, nm.t_end.unwrap_or(DEFAULT_T_END)).with_dt(nm.dt.unwrap_or(DEFAULT_DT));
    config.stepper = nm.stepper.unwrap_or(Stepper::Imex);
    config.stride = nm.stride.unwrap_or(DEFAULT_STRIDE);
    config.boundary_tolerance = nm.boundary_tolerance.unwrap_or(DEFAULT_BOUNDARY_TOLERANCE);
    config.lambda_stride = nm.lambda_stride;
    Ok(config)
}

fn trace_table(suffix: &'static str, trace: &FlowTrace) -> Result<Table> {
    let mut bytes = Vec::new();
    flow::io::write_trace_csv(trace, &mut bytes)?;
    Ok(Table { suffix, bytes })
}

fn diagnostics_table(trace: &FlowTrace) -> Result<Table> {
    let mut bytes = Vec::new();
    flow::io::write_diagnostics_csv(trace, &mut bytes)?;
    Ok(Table {
        suffix: "diagnostics",
        bytes,
    })
}

fn diagnostics_plot(trace: &FlowTrace) -> Vec<PlotPoint> {
    let mut plot = Vec::new();
    for d in &trace.diagnostics {
        let series = [
            ("ricci_residual", Some(d.ricci_residual)),
            ("bc_mc_residual", Some(d.bc_mc_residual)),
            ("deturck_norm", Some(d.deturck_norm)),
            ("h_inner", Some(d.mean_curvature[0])),
            ("h_outer", Some(d.mean_curvature[1])),
            ("lambda", d.lambda),
        ];
        for (name, value) in series {
            if let Some(v) = value {
                plot.push(PlotPoint::new(name, v).at_t(d.t));
            }
        }
    }
    plot
}

fn trace_summary(trace: &FlowTrace) -> Value {
    let last = trace.diagnostics.last().expect("a trace holds the initial diagnostics");
    json!({
        "steps": trace.len() - 1,
        "dt": trace.dt,
        "t_end": trace.times.last(),
        "max_ricci_residual": trace.max_ricci_residual(),
        "max_bc_mc_residual": trace.max_bc_mc_residual(),
        "max_bc_conformal_residual": trace.max_bc_conformal_residual(),
        "max_deturck_norm": trace.max_deturck_norm(),
        "final_mean_curvature": last.mean_curvature,
        "final_lambda": last.lambda,
        "warnings": trace.warnings,
    })
}

fn flow_run(spec: &ExperimentSpec) -> Result<Outcome> {
    let (gs, g) = geometry(spec)?;
    let config = flow_config(spec, g)?;
    let trace = flow::rdt_flow(&config)?;
    let mut report = trace_summary(&trace);
    let rescale = match gs.einstein_constant() {
        Some(mu) => {
            let e = flow::einstein_rescaling(&trace, mu)?;
            json!({
                "mu": mu,
                "relative_error": e.max_relative_deviation,
                "mc_rate_error": e.max_mc_rate_error,
                "mc_scaling_error": e.max_mc_scaling_error,
            })
        }
        None => Value::Null,
    };
    report["einstein_rescale"] = rescale;
    let mut tables = vec![trace_table("trace", &trace)?, diagnostics_table(&trace)?];
    let mut plot = diagnostics_plot(&trace);
    let final_coords = coordinates(trace.final_metric());
    if let MetricField::Warped(w) = trace.final_metric() {
        let t = trace.times.last().copied();
        for (i, c) in final_coords.iter().enumerate() {
            plot.push(PlotPoint { t, ..PlotPoint::new("phi", w.phi()[i]).at(*c) });
            plot.push(PlotPoint { t, ..PlotPoint::new("psi", w.psi()[i]).at(*c) });
        }
    }
    if spec.numerics.pullback.unwrap_or(false) {
        let pb = flow::deturck_pullback(&trace, &trace.background)?;
        report["pullback"] = json!({
            "boundary_drift": pb.diffeo.boundary_drift(),
            "max_displacement": pb.diffeo.max_displacement(),
            "max_ricci_residual": pb.trace.max_ricci_residual(),
            "max_bc_mc_residual": pb.trace.max_bc_mc_residual(),
        });
        tables.push(trace_table("pullback", &pb.trace)?);
    }
    let pass = trace.max_bc_mc_residual() <= config.boundary_tolerance;
    let mut out = Outcome::new(report, Some(pass), Some(config.boundary_tolerance));
    out.tables = tables;
    out.plot = plot;
    Ok(out)
}

/// `max_i |u_t - (1-2μt)g₀| / ‖g₀‖_∞` per snapshot.
fn rescaling_deviation(trace: &FlowTrace, mu: f64) -> Result<Vec<f64>> {
    let g0 = trace.snapshots[0].as_warped()?;
    let (a0, b0) = (g0.a(), g0.b());
    let norm = a0.iter().chain(&b0).fold(0.0f64, |m, v| m.max(v.abs()));
    trace
        .snapshots
        .iter()
        .zip(&trace.times)
        .map(|(g, t)| {
            let c = 1.0 - 2.0 * mu * t;
            let g = g.as_warped()?;
            Ok(g.a()
                .iter()
                .zip(&a0)
                .chain(g.b().iter().zip(&b0))
                .fold(0.0f64, |m, (u, u0)| m.max((u - c * u0).abs() / norm)))
        })
        .collect()
}

fn einstein_test(spec: &ExperimentSpec) -> Result<Outcome> {
    let (gs, g) = geometry(spec)?;
    let mu = gs
        .einstein_constant()
        .ok_or_else(|| CliError::Config("einstein-test needs an Einstein geometry".into()))?;
    let tol = tolerance(spec, EINSTEIN_TOLERANCE)?;
    let config = flow_config(spec, g)?;
    let trace = flow::rdt_flow(&config)?;
    let e = flow::einstein_rescaling(&trace, mu)?;
    let bc = trace.max_bc_mc_residual();
    let mut pass =
        e.max_relative_deviation <= tol && e.max_mc_rate_error <= MC_RATE_TOLERANCE && bc <= config.boundary_tolerance;
    let mut report = trace_summary(&trace);
    report["mu"] = json!(mu);
    report["relative_error"] = json!(e.max_relative_deviation);
    report["mc_rate_error"] = json!(e.max_mc_rate_error);
    report["mc_rate_tolerance"] = json!(MC_RATE_TOLERANCE);
    report["mc_scaling_error"] = json!(e.max_mc_scaling_error);
    report["boundary_tolerance"] = json!(config.boundary_tolerance);
    if spec.numerics.refine.unwrap_or(false) {
        let mut fine_spec = gs.clone();
        fine_spec.nodes = 2 * gs.nodes - 1;
        let mut fine = flow_config(spec, fine_spec.build()?)?;
        fine.dt = Some(config.dt.unwrap_or(DEFAULT_DT) / 4.0);
        let fine_trace = flow::rdt_flow(&fine)?;
        let fine_dev = flow::einstein_rescaling(&fine_trace, mu)?.max_relative_deviation;
        let factor = e.max_relative_deviation / fine_dev;
        pass &= factor >= REFINEMENT_FACTOR;
        report["refinement"] = json!({
            "nodes": fine_spec.nodes,
            "dt": fine.dt,
            "relative_error": fine_dev,
            "factor": factor,
            "required_factor": REFINEMENT_FACTOR,
        });
    }
    let deviation = rescaling_deviation(&trace, mu)?;
    let h0 = trace.diagnostics[0].mean_curvature;
    let mut table = TableWriter::new("rescaling", &["t", "relative_deviation", "h_inner", "h_outer", "h_inner_exact", "h_outer_exact"]);
    let mut plot = Vec::new();
    for (m, d) in trace.diagnostics.iter().enumerate() {
        let scale = (1.0 - 2.0 * mu * d.t).powf(-0.5);
        table.push(vec![
            num(d.t),
            num(deviation[m]),
            num(d.mean_curvature[0]),
            num(d.mean_curvature[1]),
            num(h0[0] * scale),
            num(h0[1] * scale),
        ]);
        plot.push(PlotPoint::new("relative_deviation", deviation[m]).at_t(d.t));
        plot.push(PlotPoint::new("h_inner", d.mean_curvature[0]).at_t(d.t));
        plot.push(PlotPoint::new("h_outer", d.mean_curvature[1]).at_t(d.t));
        plot.push(PlotPoint::new("h_inner_exact", h0[0] * scale).at_t(d.t));
        plot.push(PlotPoint::new("h_outer_exact", h0[1] * scale).at_t(d.t));
    }
    let mut out = Outcome::new(report, Some(pass), Some(tol));
    out.tables = vec![table.finish()?, diagnostics_table(&trace)?];
    out.plot = plot;
    Ok(out)
}

fn rescaling_check(spec: &ExperimentSpec) -> Result<Outcome> {
    let (_, g) = geometry(spec)?;
    let scales = spec.numerics.scales.clone().unwrap_or_else(|| vec![0.25, 4.0]);
    if scales.is_empty() {
        return Err(CliError::Config("scales must not be empty".into()));
    }
    let config = flow_config(spec, g)?;
    let trace = flow::rdt_flow(&config)?;
    let mut checks = Vec::new();
    let mut pass = true;
    for r in scales {
        let report = flow::parabolic_rescaling_check(&trace, positive("scale", r)?)?;
        pass &= report.passed;
        checks.push(serde_json::to_value(report)?);
    }
    let mut report = trace_summary(&trace);
    report["checks"] = Value::Array(checks);
    let mut out = Outcome::new(report, Some(pass), Some(RESCALING_TOLERANCE));
    out.tables.push(diagnostics_table(&trace)?);
    out.plot = diagnostics_plot(&trace);
    Ok(out)
}

fn compat_check(spec: &ExperimentSpec) -> Result<Outcome> {
    let (_, g) = geometry(spec)?;
    let index = spec.numerics.order.unwrap_or(0);
    let order = CompatOrder::from_index(index)?;
    let tol = tolerance(spec, COMPAT_TOLERANCE[index])?;
    let report = flow::compatibility_check(&g, order)?;
    let pass = report.max_residual <= tol;
    let mut table = TableWriter::new(
        "compat",
        &["side", "mean_curvature", "mc_residual", "mc_residual_path", "dh_dt", "d2h_dt2", "order1_residual"],
    );
    let mut plot = Vec::new();
    for (k, s) in report.sides.iter().enumerate() {
        table.push(vec![
            s.side.name().to_string(),
            num(s.mean_curvature),
            num(s.mc_residual),
            num(s.mc_residual_path),
            num(s.dh_dt),
            opt(s.d2h_dt2),
            opt(s.order1_residual),
        ]);
        plot.push(PlotPoint::new("mc_residual", s.mc_residual).index(k));
        plot.push(PlotPoint::new("dh_dt", s.dh_dt).index(k));
    }
    let mut out = Outcome::new(serde_json::to_value(&report)?, Some(pass), Some(tol));
    out.tables.push(table.finish()?);
    out.plot = plot;
    Ok(out)
}
