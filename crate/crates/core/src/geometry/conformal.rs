//! Conformally flat surfaces `g = e^{2u}(dr² + r² dθ²)` on a polar annulus.
//!
//! Fields are stored on an `(N+1) × m` tensor grid, radial index major. The
//! angular direction is periodic and differenced with central stencils.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalMetric {
    grid: Grid1D,
    angular: usize,
    u: Vec<f64>,
}

/// General symmetric tensor `rr dr² + 2 rt dr dθ + tt dθ²` in polar
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalTensor {
    pub rr: Vec<f64>,
    pub rt: Vec<f64>,
    pub tt: Vec<f64>,
}

/// `Γ[k][i][j] = Γ^k_ij` in `(r, θ)` coordinates.
pub type Christoffel2 = [[[f64; 2]; 2]; 2];

impl ConformalTensor {
    pub fn zeros(len: usize) -> Self {
        Self {
            rr: vec![0.0; len],
            rt: vec![0.0; len],
            tt: vec![0.0; len],
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| c * x).collect();
        Self {
            rr: s(&self.rr),
            rt: s(&self.rt),
            tt: s(&self.tt),
        }
    }

    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        let f = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + c * y).collect();
        Self {
            rr: f(&self.rr, &other.rr),
            rt: f(&self.rt, &other.rt),
            tt: f(&self.tt, &other.tt),
        }
    }

    pub fn at(&self, idx: usize) -> [[f64; 2]; 2] {
        [[self.rr[idx], self.rt[idx]], [self.rt[idx], self.tt[idx]]]
    }
}

impl ConformalMetric {
    pub fn new(grid: Grid1D, angular: usize, u: Vec<f64>) -> Result<Self> {
        if grid.r_min() <= 0.0 {
            return Err(Error::InvalidGrid(
                "the conformal backend uses polar coordinates and needs r_min > 0".into(),
            ));
        }
        if angular < 4 {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 angular nodes, got {angular}"
            )));
        }
        if u.len() != grid.num_nodes() * angular {
            return Err(Error::BackendMismatch(format!(
                "conformal factor has {} values for a {}x{angular} grid",
                u.len(),
                grid.num_nodes()
            )));
        }
        if let Some(pos) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteConformalFactor {
                radial: pos / angular,
                angular: pos % angular,
            });
        }
        Ok(Self { grid, angular, u })
    }

    pub fn from_function(grid: Grid1D, angular: usize, u: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let dt = 2.0 * PI / angular as f64;
        let mut values = Vec::with_capacity(grid.num_nodes() * angular);
        for i in 0..grid.num_nodes() {
            for j in 0..angular {
                values.push(u(grid.node(i), j as f64 * dt));
            }
        }
        Self::new(grid, angular, values)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn angular(&self) -> usize {
        self.angular
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn angular_spacing(&self) -> f64 {
        2.0 * PI / self.angular as f64
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.angular + j
    }

    pub fn radius(&self, idx: usize) -> f64 {
        self.grid.node(idx / self.angular)
    }

    pub fn theta(&self, idx: usize) -> f64 {
        (idx % self.angular) as f64 * self.angular_spacing()
    }

    /// The metric `e^{2(u + t v)} ĝ`, i.e. the conformal perturbation along
    /// `h = 2v g`.
    pub fn perturbed(&self, v: &[f64], t: f64) -> Result<Self> {
        Self::new(
            self.grid,
            self.angular,
            self.u.iter().zip(v).map(|(a, b)| a + t * b).collect(),
        )
    }

    /// Radial derivative of a field on the tensor grid.
    pub fn d_r(&self, f: &[f64]) -> Vec<f64> {
        let m = self.angular;
        let mut out = vec![0.0; f.len()];
        let mut column = vec![0.0; self.grid.num_nodes()];
        for j in 0..m {
            for (i, c) in column.iter_mut().enumerate() {
                *c = f[i * m + j];
            }
            for i in 0..column.len() {
                out[i * m + j] = self.grid.d1_at(&column, i);
            }
        }
        out
    }

    pub fn d_rr(&self, f: &[f64]) -> Vec<f64> {
        let m = self.angular;
        let mut out = vec![0.0; f.len()];
        let mut column = vec![0.0; self.grid.num_nodes()];
        for j in 0..m {
            for (i, c) in column.iter_mut().enumerate() {
                *c = f[i * m + j];
            }
            for i in 0..column.len() {
                out[i * m + j] = self.grid.d2_at(&column, i);
            }
        }
        out
    }

    /// Periodic angular derivative.
    pub fn d_t(&self, f: &[f64]) -> Vec<f64> {
        let m = self.angular;
        let h = self.angular_spacing();
        (0..f.len())
            .map(|idx| {
                let (i, j) = (idx / m, idx % m);
                (f[i * m + (j + 1) % m] - f[i * m + (j + m - 1) % m]) / (2.0 * h)
            })
            .collect()
    }

    pub fn d_tt(&self, f: &[f64]) -> Vec<f64> {
        let m = self.angular;
        let h = self.angular_spacing();
        (0..f.len())
            .map(|idx| {
                let (i, j) = (idx / m, idx % m);
                (f[i * m + (j + 1) % m] - 2.0 * f[idx] + f[i * m + (j + m - 1) % m]) / (h * h)
            })
            .collect()
    }

    /// Metric components `(g_rr, g_θθ)`; `g_rθ = 0`.
    pub fn components_at(&self, idx: usize) -> (f64, f64) {
        let e = (2.0 * self.u[idx]).exp();
        let r = self.radius(idx);
        (e, e * r * r)
    }

    pub fn as_tensor(&self) -> ConformalTensor {
        let mut out = ConformalTensor::zeros(self.len());
        for idx in 0..self.len() {
            let (a, b) = self.components_at(idx);
            out.rr[idx] = a;
            out.tt[idx] = b;
        }
        out
    }

    /// The tensor `2 v g`.
    pub fn conformal_variation(&self, v: &[f64]) -> ConformalTensor {
        self.as_tensor().scaled(2.0).scaled_pointwise(v)
    }

    /// Christoffel symbols at every node.
    pub fn christoffel(&self) -> Vec<Christoffel2> {
        let ur = self.d_r(&self.u);
        let ut = self.d_t(&self.u);
        (0..self.len())
            .map(|idx| christoffel_at(self.radius(idx), ur[idx], ut[idx]))
            .collect()
    }

    /// Gaussian curvature `-e^{-2u} Δ_flat u`.
    pub fn gauss_curvature(&self) -> Vec<f64> {
        let ur = self.d_r(&self.u);
        let urr = self.d_rr(&self.u);
        let utt = self.d_tt(&self.u);
        (0..self.len())
            .map(|idx| {
                let r = self.radius(idx);
                -(-2.0 * self.u[idx]).exp() * (urr[idx] + ur[idx] / r + utt[idx] / (r * r))
            })
            .collect()
    }

    pub fn trace(&self, h: &ConformalTensor) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let (a, b) = self.components_at(idx);
                h.rr[idx] / a + h.tt[idx] / b
            })
            .collect()
    }

    pub fn inner(&self, x: &ConformalTensor, h: &ConformalTensor) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let (a, b) = self.components_at(idx);
                x.rr[idx] * h.rr[idx] / (a * a)
                    + 2.0 * x.rt[idx] * h.rt[idx] / (a * b)
                    + x.tt[idx] * h.tt[idx] / (b * b)
            })
            .collect()
    }

    /// `(δh)_j = -g^{ik} ∇_i h_kj`, returned as `(r, θ)` components.
    pub fn divergence(&self, h: &ConformalTensor) -> (Vec<f64>, Vec<f64>) {
        let gam = self.christoffel();
        let dr = [self.d_r(&h.rr), self.d_r(&h.rt), self.d_r(&h.tt)];
        let dt = [self.d_t(&h.rr), self.d_t(&h.rt), self.d_t(&h.tt)];
        let mut out_r = vec![0.0; self.len()];
        let mut out_t = vec![0.0; self.len()];
        for idx in 0..self.len() {
            let (a, b) = self.components_at(idx);
            let ginv = [1.0 / a, 1.0 / b];
            let hm = h.at(idx);
            let pack = |d: &[Vec<f64>; 3]| [[d[0][idx], d[1][idx]], [d[1][idx], d[2][idx]]];
            let dh = [pack(&dr), pack(&dt)];
            let g = &gam[idx];
            for j in 0..2 {
                let mut s = 0.0;
                for i in 0..2 {
                    // g is diagonal, so only k = i contributes
                    let k = i;
                    let mut cov = dh[i][k][j];
                    for p in 0..2 {
                        cov -= g[p][i][k] * hm[p][j] + g[p][i][j] * hm[k][p];
                    }
                    s += ginv[i] * cov;
                }
                if j == 0 {
                    out_r[idx] = -s;
                } else {
                    out_t[idx] = -s;
                }
            }
        }
        (out_r, out_t)
    }

    /// `δ*ω = sym ∇ω`.
    pub fn codifferential_star(&self, omega_r: &[f64], omega_t: &[f64]) -> ConformalTensor {
        let gam = self.christoffel();
        let d = [
            [self.d_r(omega_r), self.d_r(omega_t)],
            [self.d_t(omega_r), self.d_t(omega_t)],
        ];
        let mut out = ConformalTensor::zeros(self.len());
        for idx in 0..self.len() {
            let w = [omega_r[idx], omega_t[idx]];
            let entry = |i: usize, j: usize| {
                0.5 * (d[i][j][idx] + d[j][i][idx]) - gam[idx][0][i][j] * w[0] - gam[idx][1][i][j] * w[1]
            };
            out.rr[idx] = entry(0, 0);
            out.rt[idx] = entry(0, 1);
            out.tt[idx] = entry(1, 1);
        }
        out
    }

    /// `δω = -div ω` for a covector.
    pub fn codifferential_covector(&self, omega_r: &[f64], omega_t: &[f64]) -> Vec<f64> {
        // div ω = e^{-2u} r^{-1} (∂_r(r ω_r) + ∂_θ(ω_θ / r))
        let n = self.len();
        let fr: Vec<f64> = (0..n).map(|i| self.radius(i) * omega_r[i]).collect();
        let ft: Vec<f64> = (0..n).map(|i| omega_t[i] / self.radius(i)).collect();
        let dr = self.d_r(&fr);
        let dt = self.d_t(&ft);
        (0..n)
            .map(|i| -(-2.0 * self.u[i]).exp() * (dr[i] + dt[i]) / self.radius(i))
            .collect()
    }

    /// Quadrature weights for `∫ · dV`.
    pub fn volume_weights(&self) -> Vec<f64> {
        let tw = self.grid.trapezoid_weights();
        let dt = self.angular_spacing();
        (0..self.len())
            .map(|idx| {
                let r = self.radius(idx);
                tw[idx / self.angular] * dt * r * (2.0 * self.u[idx]).exp()
            })
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.volume_weights().iter().sum()
    }

    /// Node indices of one boundary circle.
    pub fn boundary_nodes(&self, at_max: bool) -> Vec<usize> {
        let i = if at_max { self.grid.last() } else { 0 };
        (0..self.angular).map(|j| self.index(i, j)).collect()
    }

    /// Mean curvature `±e^{-u}(1/r + u_r)` at every node of a boundary circle.
    pub fn mean_curvature(&self, at_max: bool) -> Vec<f64> {
        let s = if at_max { 1.0 } else { -1.0 };
        let ur = self.d_r(&self.u);
        self.boundary_nodes(at_max)
            .into_iter()
            .map(|idx| s * (-self.u[idx]).exp() * (1.0 / self.radius(idx) + ur[idx]))
            .collect()
    }
}

impl ConformalTensor {
    fn scaled_pointwise(&self, v: &[f64]) -> Self {
        let f = |a: &[f64]| a.iter().zip(v).map(|(x, y)| x * y).collect();
        Self {
            rr: f(&self.rr),
            rt: f(&self.rt),
            tt: f(&self.tt),
        }
    }
}

/// `Γ = Γ̂ + δ du + du δ - ĝ ĝ^{-1} du` for `g = e^{2u}(dr² + r² dθ²)`.
pub fn christoffel_at(r: f64, u_r: f64, u_t: f64) -> Christoffel2 {
    let du = [u_r, u_t];
    let ghat = [[1.0, 0.0], [0.0, r * r]];
    let ghat_inv = [1.0, 1.0 / (r * r)];
    let mut g = [[[0.0; 2]; 2]; 2];
    g[0][1][1] = -r;
    g[1][0][1] = 1.0 / r;
    g[1][1][0] = 1.0 / r;
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut c = 0.0;
                if k == i {
                    c += du[j];
                }
                if k == j {
                    c += du[i];
                }
                c -= ghat[i][j] * ghat_inv[k] * du[k];
                g[k][i][j] += c;
            }
        }
    }
    g
}
