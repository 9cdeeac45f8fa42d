//! Warped products `g = φ(r)² dr² + ψ(r)² ĝ` on `I × S^k`, `k = n - 1`.
//!
//! Symmetric 2-tensors in the same ansatz are `h = a dr² + b ĝ`; the
//! tangential block of every such tensor is automatically a multiple of the
//! induced boundary metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{unit_sphere_area, Grid1D, HighOrderStencils};

const PROFILE_STENCIL: usize = 5;

/// Warped-product metric on `[r_min, r_max] × S^{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpedMetric {
    dim: usize,
    grid: Grid1D,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

/// Ansatz tensor `rr dr² + sphere ĝ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpedTensor {
    pub rr: Vec<f64>,
    pub sphere: Vec<f64>,
}

/// Profile derivatives at every node.
#[derive(Debug, Clone)]
pub struct ProfileJets {
    pub phi_r: Vec<f64>,
    pub phi_rr: Vec<f64>,
    pub psi_r: Vec<f64>,
    pub psi_rr: Vec<f64>,
}

impl WarpedTensor {
    pub fn zeros(len: usize) -> Self {
        Self {
            rr: vec![0.0; len],
            sphere: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.rr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rr.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rr: self.rr.iter().map(|v| c * v).collect(),
            sphere: self.sphere.iter().map(|v| c * v).collect(),
        }
    }

    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        Self {
            rr: self.rr.iter().zip(&other.rr).map(|(a, b)| a + c * b).collect(),
            sphere: self
                .sphere
                .iter()
                .zip(&other.sphere)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }
}

impl WarpedMetric {
    pub fn new(dim: usize, grid: Grid1D, phi: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        if dim < 3 {
            return Err(Error::InvalidDimension(
                dim,
                "warped products need n >= 3; use the conformal 2D backend for surfaces",
            ));
        }
        let nodes = grid.num_nodes();
        if phi.len() != nodes || psi.len() != nodes {
            return Err(Error::BackendMismatch(format!(
                "profiles have {} and {} values for {nodes} nodes",
                phi.len(),
                psi.len()
            )));
        }
        for (node, &value) in phi.iter().chain(psi.iter()).enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveProfile {
                    node: node % nodes,
                    value,
                });
            }
        }
        Ok(Self { dim, grid, phi, psi })
    }

    pub fn from_functions(
        dim: usize,
        grid: Grid1D,
        phi: impl Fn(f64) -> f64,
        psi: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        Self::new(dim, grid, grid.sample(phi), grid.sample(psi))
    }

    /// Builds the metric from its components `A = φ²` and `B = ψ²`.
    pub fn from_components(dim: usize, grid: Grid1D, a: &[f64], b: &[f64]) -> Result<Self> {
        let root = |v: &[f64]| -> Result<Vec<f64>> {
            v.iter()
                .enumerate()
                .map(|(node, &x)| {
                    if x > 0.0 && x.is_finite() {
                        Ok(x.sqrt())
                    } else {
                        Err(Error::NonPositiveProfile { node, value: x })
                    }
                })
                .collect()
        };
        Self::new(dim, grid, root(a)?, root(b)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the sphere factor.
    pub fn k(&self) -> usize {
        self.dim - 1
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// `g_rr = φ²`.
    pub fn a(&self) -> Vec<f64> {
        self.phi.iter().map(|p| p * p).collect()
    }

    /// Sphere coefficient `ψ²`.
    pub fn b(&self) -> Vec<f64> {
        self.psi.iter().map(|p| p * p).collect()
    }

    pub fn as_tensor(&self) -> WarpedTensor {
        WarpedTensor {
            rr: self.a(),
            sphere: self.b(),
        }
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let s = c.sqrt();
        Self::new(
            self.dim,
            self.grid,
            self.phi.iter().map(|p| s * p).collect(),
            self.psi.iter().map(|p| s * p).collect(),
        )
    }

    /// The metric `g + t h`.
    pub fn perturbed(&self, h: &WarpedTensor, t: f64) -> Result<Self> {
        let g = self.as_tensor().axpy(t, h);
        Self::from_components(self.dim, self.grid, &g.rr, &g.sphere)
    }

    /// Profile derivatives from 5-point stencils. Quantities built from them,
    /// such as Ric, are differentiated again at the boundary, which needs their
    /// discretization error to be smooth up to the boundary node.
    pub fn jets(&self) -> ProfileJets {
        let st = HighOrderStencils::new(self.grid, PROFILE_STENCIL);
        ProfileJets {
            phi_r: st.derivative(&self.phi, 1),
            phi_rr: st.derivative(&self.phi, 2),
            psi_r: st.derivative(&self.psi, 1),
            psi_rr: st.derivative(&self.psi, 2),
        }
    }

    pub fn sphere_area(&self) -> f64 {
        unit_sphere_area(self.k())
    }

    /// Quadrature weights for `∫ · dV`.
    pub fn volume_weights(&self) -> Vec<f64> {
        let k = self.k() as i32;
        let area = self.sphere_area();
        self.grid
            .trapezoid_weights()
            .iter()
            .zip(self.phi.iter().zip(&self.psi))
            .map(|(w, (p, q))| w * p * q.powi(k) * area)
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.volume_weights().iter().sum()
    }

    /// Area of the boundary sphere at node `i`.
    pub fn area_at(&self, i: usize) -> f64 {
        self.psi[i].powi(self.k() as i32) * self.sphere_area()
    }

    /// `(Ric_rr, Ric_S)` from closed-form warped-product curvature.
    pub fn ricci(&self) -> WarpedTensor {
        let k = self.k() as f64;
        let j = self.jets();
        let mut out = WarpedTensor::zeros(self.phi.len());
        for i in 0..self.phi.len() {
            let (p, q) = (self.phi[i], self.psi[i]);
            let (pr, qr, qrr) = (j.phi_r[i], j.psi_r[i], j.psi_rr[i]);
            out.rr[i] = -k * (qrr / q - qr * pr / (p * q));
            out.sphere[i] = -q * (qrr - qr * pr / p) / (p * p) + (k - 1.0) * (1.0 - qr * qr / (p * p));
        }
        out
    }

    pub fn trace(&self, h: &WarpedTensor) -> Vec<f64> {
        let k = self.k() as f64;
        (0..self.phi.len())
            .map(|i| h.rr[i] / (self.phi[i] * self.phi[i]) + k * h.sphere[i] / (self.psi[i] * self.psi[i]))
            .collect()
    }

    /// Pointwise `⟨X, h⟩_g`.
    pub fn inner(&self, x: &WarpedTensor, h: &WarpedTensor) -> Vec<f64> {
        let k = self.k() as f64;
        (0..self.phi.len())
            .map(|i| {
                let a = self.phi[i] * self.phi[i];
                let b = self.psi[i] * self.psi[i];
                x.rr[i] * h.rr[i] / (a * a) + k * x.sphere[i] * h.sphere[i] / (b * b)
            })
            .collect()
    }

    /// Radial component of `δ_g h = -tr₁₂ ∇h`; the sphere components vanish.
    pub fn divergence(&self, h: &WarpedTensor) -> Vec<f64> {
        let k = self.k() as f64;
        let j = self.jets();
        let a_r = self.grid.d1(&h.rr);
        (0..self.phi.len())
            .map(|i| {
                let (p, q) = (self.phi[i], self.psi[i]);
                let (a, b) = (h.rr[i], h.sphere[i]);
                -(a_r[i] / (p * p) - 2.0 * j.phi_r[i] * a / (p * p * p)
                    + k * j.psi_r[i] / q * (a / (p * p) - b / (q * q)))
            })
            .collect()
    }

    /// `δ*ω = ½ L_{ω♯} g` for a radial covector `ω = ω_r dr`.
    pub fn codifferential_star(&self, omega: &[f64]) -> WarpedTensor {
        let j = self.jets();
        let w_r = self.grid.d1(omega);
        let mut out = WarpedTensor::zeros(self.phi.len());
        for i in 0..self.phi.len() {
            let (p, q) = (self.phi[i], self.psi[i]);
            out.rr[i] = w_r[i] - j.phi_r[i] / p * omega[i];
            out.sphere[i] = q * j.psi_r[i] / (p * p) * omega[i];
        }
        out
    }

    /// `δω = -div ω` for a radial covector.
    pub fn codifferential_covector(&self, omega: &[f64]) -> Vec<f64> {
        let k = self.k() as i32;
        let flux: Vec<f64> = (0..self.phi.len())
            .map(|i| self.psi[i].powi(k) * omega[i] / self.phi[i])
            .collect();
        let d = self.grid.d1(&flux);
        (0..self.phi.len())
            .map(|i| -d[i] / (self.phi[i] * self.psi[i].powi(k)))
            .collect()
    }

    /// Mean curvature from the trace of the second fundamental form.
    pub fn mean_curvature(&self, at_max: bool) -> f64 {
        let i = if at_max { self.grid.last() } else { 0 };
        let s = if at_max { 1.0 } else { -1.0 };
        let psi_r = self.grid.boundary_d1(&self.psi, at_max);
        s * self.k() as f64 * psi_r / (self.phi[i] * self.psi[i])
    }

    /// Mean curvature as `½ tr_{g^T} L_ν g`, differencing `ψ²` directly.
    pub fn mean_curvature_from_lie(&self, at_max: bool) -> f64 {
        let i = if at_max { self.grid.last() } else { 0 };
        let s = if at_max { 1.0 } else { -1.0 };
        let b = self.b();
        let lie = s * self.grid.d1_at(&b, i) / self.phi[i];
        0.5 * self.k() as f64 * lie / b[i]
    }
}
