//! Reference geometries.
//!
//! Each preset is a [`GeometrySpec`]: a parametrised family plus a grid.
//! The specs are plain data so that extra presets can be loaded from files.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConformalMetric, MetricField, WarpedMetric};
use crate::grid::Grid1D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `dr² + sin²r ĝ`, Einstein with `μ = n - 1`.
    Sphere,
    /// `dr² + sinh²r ĝ`, Einstein with `μ = -(n - 1)`.
    Hyperbolic,
    /// `dr² + r² ĝ`, flat.
    Flat,
    /// The sphere band with `ψ = sin r (1 + ε(1 - s²)⁸)` on the middle 80% of
    /// the band, so a collar at each boundary stays exactly round.
    PerturbedSphere,
    /// `e^{2u}(dr² + r²dθ²)` with `u = amplitude · (r - r_min)² (r_max - r) cos θ`;
    /// flat for zero amplitude.
    ConformalAnnulus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub family: Family,
    /// Manifold dimension; 2 for the conformal backend.
    pub dim: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Radial node count.
    pub nodes: usize,
    /// Angular node count (conformal backend only).
    #[serde(default)]
    pub angular: Option<usize>,
    /// Perturbation size for the perturbed families.
    #[serde(default)]
    pub amplitude: Option<f64>,
}

/// Names of the embedded presets.
pub const PRESET_NAMES: [&str; 5] = [
    "sphere-band-n3",
    "hyperbolic-band-n3",
    "flat-annulus-n3",
    "flat-annulus-2d",
    "perturbed-band-n3",
];

const DEFAULT_NODES: usize = 200;
const DEFAULT_ANGULAR: usize = 64;
const DEFAULT_BUMP: f64 = 0.05;

/// The embedded preset with the given name. `flat-annulus` is accepted for
/// `flat-annulus-n3`.
pub fn preset(name: &str) -> Result<GeometrySpec> {
    let warped = |family, r_min, r_max| GeometrySpec {
        family,
        dim: 3,
        r_min,
        r_max,
        nodes: DEFAULT_NODES,
        angular: None,
        amplitude: None,
    };
    Ok(match name {
        "sphere-band-n3" => warped(Family::Sphere, PI / 8.0, 3.0 * PI / 8.0),
        "hyperbolic-band-n3" => warped(Family::Hyperbolic, 0.5, 1.5),
        "flat-annulus-n3" | "flat-annulus" => warped(Family::Flat, 1.0, 2.0),
        "perturbed-band-n3" => GeometrySpec {
            amplitude: Some(DEFAULT_BUMP),
            ..warped(Family::PerturbedSphere, PI / 8.0, 3.0 * PI / 8.0)
        },
        "flat-annulus-2d" => GeometrySpec {
            family: Family::ConformalAnnulus,
            dim: 2,
            r_min: 1.0,
            r_max: 2.0,
            nodes: 65,
            angular: Some(DEFAULT_ANGULAR),
            amplitude: Some(0.0),
        },
        _ => return Err(Error::BadConfig(format!("unknown preset `{name}`"))),
    })
}

/// `C⁷` bump supported on `[-1, 1]`, equal to 1 at `s = 0`.
fn bump(s: f64) -> f64 {
    (1.0 - s * s).max(0.0).powi(8)
}

impl GeometrySpec {
    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::with_nodes(self.r_min, self.r_max, self.nodes)
    }

    pub fn is_conformal(&self) -> bool {
        self.family == Family::ConformalAnnulus
    }

    pub fn build(&self) -> Result<MetricField> {
        let grid = self.grid()?;
        if self.is_conformal() {
            if self.dim != 2 {
                return Err(Error::InvalidDimension(self.dim, "the conformal backend is two-dimensional"));
            }
            let (lo, hi) = (self.r_min, self.r_max);
            let a = self.amplitude.unwrap_or(0.0);
            let angular = self.angular.unwrap_or(DEFAULT_ANGULAR);
            let c = ConformalMetric::from_function(grid, angular, |r, t| a * (r - lo).powi(2) * (hi - r) * t.cos())?;
            return Ok(MetricField::Conformal(c));
        }
        if self.dim == 2 {
            return Err(Error::InvalidDimension(
                2,
                "n = 2 warped products have a vacuous conformal condition; use the conformal annulus",
            ));
        }
        let psi: Box<dyn Fn(f64) -> f64> = match self.family {
            Family::Sphere => Box::new(f64::sin),
            Family::Hyperbolic => Box::new(f64::sinh),
            Family::Flat => Box::new(|r| r),
            Family::PerturbedSphere => {
                let eps = self.amplitude.unwrap_or(DEFAULT_BUMP);
                let mid = 0.5 * (self.r_min + self.r_max);
                let half = 0.4 * (self.r_max - self.r_min);
                Box::new(move |r: f64| r.sin() * (1.0 + eps * bump((r - mid) / half)))
            }
            Family::ConformalAnnulus => unreachable!("handled above"),
        };
        Ok(MetricField::Warped(WarpedMetric::from_functions(self.dim, grid, |_| 1.0, psi)?))
    }

    /// Einstein constant of the exact metric, if it is Einstein.
    pub fn einstein_constant(&self) -> Option<f64> {
        let k = self.dim as f64 - 1.0;
        match self.family {
            Family::Sphere => Some(k),
            Family::Hyperbolic => Some(-k),
            Family::Flat => Some(0.0),
            Family::ConformalAnnulus if self.amplitude.unwrap_or(0.0) == 0.0 => Some(0.0),
            _ => None,
        }
    }
}
