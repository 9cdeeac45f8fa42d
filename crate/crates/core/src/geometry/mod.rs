//! Symmetry-reduced metric backends.
//!
//! Sign conventions: `δ_g h = -tr₁₂ ∇h`, `δ*_g ω = ½ L_{ω♯} g`, the second
//! fundamental form is `A(X, Y) = g(∇_X ν, Y)` for the outward unit normal
//! `ν` and `H = tr_{g^T} A`. The outward normal is `+∂_r` direction at
//! `r_max` and `-∂_r` at `r_min`.

pub mod conformal;
pub mod warped;

use serde::{Deserialize, Serialize};

pub use conformal::{ConformalMetric, ConformalTensor};
pub use warped::{WarpedMetric, WarpedTensor};

use crate::error::{Error, Result};
use crate::grid::Grid1D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    ConformalDisk2D,
    WarpedProduct,
}

/// A single time slice of a Riemannian metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MetricField {
    Warped(WarpedMetric),
    Conformal(ConformalMetric),
}

/// A symmetric 2-tensor in the backend ansatz of its metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VariationField {
    Warped(WarpedTensor),
    Conformal(ConformalTensor),
}

/// A covector field: radial only on warped products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovectorField {
    Warped { r: Vec<f64> },
    Conformal { r: Vec<f64>, theta: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Inner,
    Outer,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Inner, Side::Outer];

    /// Sign of the outward normal relative to `∂_r`.
    pub fn orientation(self) -> f64 {
        match self {
            Side::Inner => -1.0,
            Side::Outer => 1.0,
        }
    }

    pub fn is_outer(self) -> bool {
        self == Side::Outer
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Inner => "inner",
            Side::Outer => "outer",
        }
    }
}

/// Geometry of one boundary component. Per-node vectors have one entry on
/// warped products and one per angular node on the conformal backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryState {
    pub side: Side,
    pub orientation: f64,
    /// Induced metric coefficient: `ψ²` (times `ĝ`) or `g_θθ`.
    pub induced_metric: Vec<f64>,
    /// Second fundamental form coefficient in the same basis.
    pub second_fundamental_form: Vec<f64>,
    pub mean_curvature: Vec<f64>,
    /// Quadrature weights for `∫_{∂M} · dA`.
    pub area_weights: Vec<f64>,
}

impl BoundaryState {
    /// Area-weighted mean of `H` over the component.
    pub fn mean_h(&self) -> f64 {
        let area: f64 = self.area_weights.iter().sum();
        self.mean_curvature
            .iter()
            .zip(&self.area_weights)
            .map(|(h, w)| h * w)
            .sum::<f64>()
            / area
    }

    pub fn area(&self) -> f64 {
        self.area_weights.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvaturePack {
    pub ricci: VariationField,
    pub scalar: Vec<f64>,
    pub einstein: VariationField,
}

impl VariationField {
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            VariationField::Warped(h) => VariationField::Warped(h.scaled(c)),
            VariationField::Conformal(h) => VariationField::Conformal(h.scaled(c)),
        }
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        match (self, other) {
            (VariationField::Warped(a), VariationField::Warped(b)) => {
                Ok(VariationField::Warped(a.axpy(c, b)))
            }
            (VariationField::Conformal(a), VariationField::Conformal(b)) => {
                Ok(VariationField::Conformal(a.axpy(c, b)))
            }
            _ => Err(mismatch()),
        }
    }

    pub fn zeros_like(&self) -> Self {
        self.scaled(0.0)
    }

    pub fn as_warped(&self) -> Result<&WarpedTensor> {
        match self {
            VariationField::Warped(h) => Ok(h),
            _ => Err(mismatch()),
        }
    }

    pub fn as_conformal(&self) -> Result<&ConformalTensor> {
        match self {
            VariationField::Conformal(h) => Ok(h),
            _ => Err(mismatch()),
        }
    }

    /// Largest absolute component value.
    pub fn max_abs(&self) -> f64 {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        match self {
            VariationField::Warped(h) => m(&h.rr).max(m(&h.sphere)),
            VariationField::Conformal(h) => m(&h.rr).max(m(&h.rt)).max(m(&h.tt)),
        }
    }
}

impl CovectorField {
    pub fn radial(&self) -> &[f64] {
        match self {
            CovectorField::Warped { r } | CovectorField::Conformal { r, .. } => r,
        }
    }
}

pub(crate) fn mismatch() -> Error {
    Error::BackendMismatch("tensor and metric use different backends".into())
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::BackendMismatch(format!(
            "expected {expected} nodes, got {got}"
        )))
    }
}

impl MetricField {
    pub fn backend(&self) -> Backend {
        match self {
            MetricField::Warped(_) => Backend::WarpedProduct,
            MetricField::Conformal(_) => Backend::ConformalDisk2D,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MetricField::Warped(g) => g.dim(),
            MetricField::Conformal(_) => 2,
        }
    }

    pub fn grid(&self) -> &Grid1D {
        match self {
            MetricField::Warped(g) => g.grid(),
            MetricField::Conformal(g) => g.grid(),
        }
    }

    /// Number of nodes carrying field values.
    pub fn len(&self) -> usize {
        match self {
            MetricField::Warped(g) => g.grid().num_nodes(),
            MetricField::Conformal(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_warped(&self) -> Result<&WarpedMetric> {
        match self {
            MetricField::Warped(g) => Ok(g),
            MetricField::Conformal(_) => Err(Error::BackendMismatch(
                "expected a warped-product metric".into(),
            )),
        }
    }

    pub fn as_conformal(&self) -> Result<&ConformalMetric> {
        match self {
            MetricField::Conformal(g) => Ok(g),
            MetricField::Warped(_) => Err(Error::BackendMismatch(
                "expected a conformal metric".into(),
            )),
        }
    }

    /// The metric itself as a tensor.
    pub fn as_variation(&self) -> VariationField {
        match self {
            MetricField::Warped(g) => VariationField::Warped(g.as_tensor()),
            MetricField::Conformal(g) => VariationField::Conformal(g.as_tensor()),
        }
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        match self {
            MetricField::Warped(g) => Ok(MetricField::Warped(g.scaled(c)?)),
            MetricField::Conformal(g) => {
                let shift = 0.5 * c.ln();
                Ok(MetricField::Conformal(ConformalMetric::new(
                    *g.grid(),
                    g.angular(),
                    g.u().iter().map(|u| u + shift).collect(),
                )?))
            }
        }
    }

    /// The metric `g + t h`. On the conformal backend `h` must be conformal
    /// (`h = 2v g`); the perturbation is taken along `u ↦ u + t v`, which
    /// agrees with `g + t h` to first order.
    pub fn perturbed(&self, h: &VariationField, t: f64) -> Result<Self> {
        match (self, h) {
            (MetricField::Warped(g), VariationField::Warped(h)) => {
                Ok(MetricField::Warped(g.perturbed(h, t)?))
            }
            (MetricField::Conformal(g), VariationField::Conformal(h)) => {
                let v = conformal_factor_of(g, h)?;
                Ok(MetricField::Conformal(g.perturbed(&v, t)?))
            }
            _ => Err(mismatch()),
        }
    }

    pub fn volume_weights(&self) -> Vec<f64> {
        match self {
            MetricField::Warped(g) => g.volume_weights(),
            MetricField::Conformal(g) => g.volume_weights(),
        }
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.volume_weights()
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }

    pub fn volume(&self) -> f64 {
        self.volume_weights().iter().sum()
    }

    /// Node indices lying on one boundary component.
    pub fn boundary_nodes(&self, side: Side) -> Vec<usize> {
        match self {
            MetricField::Warped(g) => vec![if side.is_outer() { g.grid().last() } else { 0 }],
            MetricField::Conformal(g) => g.boundary_nodes(side.is_outer()),
        }
    }
}

/// Recovers `v` from `h = 2v g`; errors if `h` is not pointwise conformal.
pub fn conformal_factor_of(g: &ConformalMetric, h: &ConformalTensor) -> Result<Vec<f64>> {
    let mut v = Vec::with_capacity(g.len());
    for idx in 0..g.len() {
        let (a, b) = g.components_at(idx);
        let vr = 0.5 * h.rr[idx] / a;
        let vt = 0.5 * h.tt[idx] / b;
        let scale = 1.0 + vr.abs() + vt.abs();
        if (vr - vt).abs() > 1e-10 * scale || h.rt[idx].abs() > 1e-10 * scale * a {
            return Err(Error::BackendMismatch(
                "metric perturbation on the conformal backend must be of the form 2v·g".into(),
            ));
        }
        v.push(vr);
    }
    Ok(v)
}

/// Ricci, scalar and Einstein tensors at every node.
pub fn curvature(g: &MetricField) -> CurvaturePack {
    match g {
        MetricField::Warped(w) => {
            let ricci = w.ricci();
            let scalar = w.trace(&ricci);
            let gt = w.as_tensor();
            let einstein = WarpedTensor {
                rr: (0..scalar.len())
                    .map(|i| ricci.rr[i] - 0.5 * scalar[i] * gt.rr[i])
                    .collect(),
                sphere: (0..scalar.len())
                    .map(|i| ricci.sphere[i] - 0.5 * scalar[i] * gt.sphere[i])
                    .collect(),
            };
            CurvaturePack {
                ricci: VariationField::Warped(ricci),
                scalar,
                einstein: VariationField::Warped(einstein),
            }
        }
        MetricField::Conformal(c) => {
            let k = c.gauss_curvature();
            let gt = c.as_tensor();
            let mut ricci = ConformalTensor::zeros(c.len());
            for idx in 0..c.len() {
                ricci.rr[idx] = k[idx] * gt.rr[idx];
                ricci.tt[idx] = k[idx] * gt.tt[idx];
            }
            let scalar = k.iter().map(|x| 2.0 * x).collect();
            // In two dimensions G = K g - ½ (2K) g vanishes identically.
            CurvaturePack {
                ricci: VariationField::Conformal(ricci),
                scalar,
                einstein: VariationField::Conformal(ConformalTensor::zeros(c.len())),
            }
        }
    }
}

/// Boundary geometry of both components, inner first.
pub fn boundary_state(g: &MetricField) -> Vec<BoundaryState> {
    Side::BOTH
        .iter()
        .map(|&side| match g {
            MetricField::Warped(w) => {
                let i = if side.is_outer() { w.grid().last() } else { 0 };
                let s = side.orientation();
                let psi = w.psi()[i];
                let psi_r = w.grid().boundary_d1(w.psi(), side.is_outer());
                let phi = w.phi()[i];
                BoundaryState {
                    side,
                    orientation: s,
                    induced_metric: vec![psi * psi],
                    second_fundamental_form: vec![s * psi * psi_r / phi],
                    mean_curvature: vec![w.mean_curvature(side.is_outer())],
                    area_weights: vec![w.area_at(i)],
                }
            }
            MetricField::Conformal(c) => {
                let s = side.orientation();
                let nodes = c.boundary_nodes(side.is_outer());
                let h = c.mean_curvature(side.is_outer());
                let dt = c.angular_spacing();
                let induced: Vec<f64> = nodes.iter().map(|&idx| c.components_at(idx).1).collect();
                BoundaryState {
                    side,
                    orientation: s,
                    second_fundamental_form: induced.iter().zip(&h).map(|(b, h)| b * h).collect(),
                    area_weights: induced.iter().map(|b| b.sqrt() * dt).collect(),
                    induced_metric: induced,
                    mean_curvature: h,
                }
            }
        })
        .collect()
}

pub fn trace(g: &MetricField, h: &VariationField) -> Result<Vec<f64>> {
    match (g, h) {
        (MetricField::Warped(w), VariationField::Warped(h)) => {
            check_len(w.grid().num_nodes(), h.rr.len())?;
            Ok(w.trace(h))
        }
        (MetricField::Conformal(c), VariationField::Conformal(h)) => {
            check_len(c.len(), h.rr.len())?;
            Ok(c.trace(h))
        }
        _ => Err(mismatch()),
    }
}

/// Pointwise `⟨X, h⟩_g`.
pub fn inner_product(g: &MetricField, x: &VariationField, h: &VariationField) -> Result<Vec<f64>> {
    match (g, x, h) {
        (MetricField::Warped(w), VariationField::Warped(x), VariationField::Warped(h)) => {
            Ok(w.inner(x, h))
        }
        (MetricField::Conformal(c), VariationField::Conformal(x), VariationField::Conformal(h)) => {
            Ok(c.inner(x, h))
        }
        _ => Err(mismatch()),
    }
}

/// `δ_g h`, with the minus sign convention.
pub fn divergence(g: &MetricField, h: &VariationField) -> Result<CovectorField> {
    match (g, h) {
        (MetricField::Warped(w), VariationField::Warped(h)) => {
            check_len(w.grid().num_nodes(), h.rr.len())?;
            Ok(CovectorField::Warped { r: w.divergence(h) })
        }
        (MetricField::Conformal(c), VariationField::Conformal(h)) => {
            check_len(c.len(), h.rr.len())?;
            let (r, theta) = c.divergence(h);
            Ok(CovectorField::Conformal { r, theta })
        }
        _ => Err(mismatch()),
    }
}

/// `δ*_g ω = ½ L_{ω♯} g`.
pub fn codifferential_star(g: &MetricField, omega: &CovectorField) -> Result<VariationField> {
    match (g, omega) {
        (MetricField::Warped(w), CovectorField::Warped { r }) => {
            check_len(w.grid().num_nodes(), r.len())?;
            Ok(VariationField::Warped(w.codifferential_star(r)))
        }
        (MetricField::Conformal(c), CovectorField::Conformal { r, theta }) => {
            check_len(c.len(), r.len())?;
            Ok(VariationField::Conformal(c.codifferential_star(r, theta)))
        }
        _ => Err(mismatch()),
    }
}

/// `δ_g ω = -div ω` of a covector.
pub fn codifferential_covector(g: &MetricField, omega: &CovectorField) -> Result<Vec<f64>> {
    match (g, omega) {
        (MetricField::Warped(w), CovectorField::Warped { r }) => Ok(w.codifferential_covector(r)),
        (MetricField::Conformal(c), CovectorField::Conformal { r, theta }) => {
            Ok(c.codifferential_covector(r, theta))
        }
        _ => Err(mismatch()),
    }
}

/// `df` of a node function.
pub fn gradient(g: &MetricField, f: &[f64]) -> CovectorField {
    match g {
        MetricField::Warped(w) => CovectorField::Warped { r: w.grid().d1(f) },
        MetricField::Conformal(c) => CovectorField::Conformal {
            r: c.d_r(f),
            theta: c.d_t(f),
        },
    }
}

/// Pointwise `⟨α, β⟩_g` of two covectors.
pub fn covector_inner(g: &MetricField, a: &CovectorField, b: &CovectorField) -> Result<Vec<f64>> {
    match (g, a, b) {
        (MetricField::Warped(w), CovectorField::Warped { r: x }, CovectorField::Warped { r: y }) => {
            Ok((0..x.len()).map(|i| x[i] * y[i] / (w.phi()[i] * w.phi()[i])).collect())
        }
        (
            MetricField::Conformal(c),
            CovectorField::Conformal { r: xr, theta: xt },
            CovectorField::Conformal { r: yr, theta: yt },
        ) => Ok((0..xr.len())
            .map(|idx| {
                let (ga, gb) = c.components_at(idx);
                xr[idx] * yr[idx] / ga + xt[idx] * yt[idx] / gb
            })
            .collect()),
        _ => Err(mismatch()),
    }
}

/// Outward normal component `ω(ν)` of a covector at every node of a boundary
/// component.
pub fn normal_component(g: &MetricField, omega: &CovectorField, side: Side) -> Vec<f64> {
    let s = side.orientation();
    let r = omega.radial();
    g.boundary_nodes(side)
        .into_iter()
        .map(|idx| match g {
            MetricField::Warped(w) => s * r[idx] / w.phi()[idx],
            MetricField::Conformal(c) => s * (-c.u()[idx]).exp() * r[idx],
        })
        .collect()
}
