//! The λ-functional: principal Neumann eigenpair of `4Δ + scal` and its first
//! variation.
//!
//! The operator is discretized by lumped-mass linear elements, so the
//! eigenproblem is `K w = λ M w` with `K` symmetric and `M` diagonal and equal
//! to the volume quadrature weights. The natural boundary condition of the
//! weak form is the Neumann condition.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, MetricField, VariationField};
use crate::grid::solve_tridiagonal;
use crate::variations;

/// Below this many unknowns the dense solver is used by default, unless the
/// operator is tridiagonal and inverse iteration can use a direct solve.
pub const DENSE_LIMIT: usize = 2000;
const MAX_ITERATIONS: usize = 500;
const ITERATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EigenMethod {
    #[default]
    Auto,
    Dense,
    InverseIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaResiduals {
    /// `max |-2Δf - |∇f|² + scal - λ|` over interior nodes.
    pub pde_residual: f64,
    /// `max |∇_ν f|` over boundary nodes.
    pub neumann_residual: f64,
    /// `|∫ e^{-f} dV - 1|`.
    pub normalization_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaResult {
    pub lambda: f64,
    /// Positive eigenfunction with `∫ w² dV = 1`.
    pub eigenfunction: Vec<f64>,
    /// `f = -2 ln w`.
    pub minimizer: Vec<f64>,
    pub residuals: LambdaResiduals,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaVariation {
    pub interior: f64,
    pub boundary: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CancellationReport {
    pub interior: f64,
    pub boundary: f64,
    /// `max |H'_g(h) + ½ φ_g(h) H|` over boundary nodes.
    pub mc_condition_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// The assembled pencil `(K, M)` in compressed row form.
#[derive(Debug, Clone)]
pub struct SchrodingerOperator {
    rows: Vec<Vec<(usize, f64)>>,
    mass: Vec<f64>,
    // kept separately so the Rayleigh quotient can be summed without
    // cancellation between the large stiffness entries
    edges: Vec<(usize, usize, f64)>,
    potential: Vec<f64>,
}

impl SchrodingerOperator {
    pub fn assemble(g: &MetricField) -> Self {
        let scal = geometry::curvature(g).scalar;
        let mass = g.volume_weights();
        let n = mass.len();
        let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, scal[i] * mass[i])]).collect();
        let mut edges = Vec::new();
        let mut edge = |i: usize, j: usize, c: f64| {
            edges.push((i, j, c));
            add(&mut rows[i], i, c);
            add(&mut rows[i], j, -c);
            add(&mut rows[j], j, c);
            add(&mut rows[j], i, -c);
        };
        match g {
            MetricField::Warped(w) => {
                let k = w.k() as i32;
                let h = w.grid().spacing();
                let area = w.sphere_area();
                let coef: Vec<f64> = (0..n).map(|i| w.psi()[i].powi(k) / w.phi()[i]).collect();
                for i in 0..n - 1 {
                    edge(i, i + 1, 4.0 * area * 0.5 * (coef[i] + coef[i + 1]) / h);
                }
            }
            MetricField::Conformal(c) => {
                // |∇w|² dV is conformally invariant in two dimensions
                let m = c.angular();
                let grid = c.grid();
                let (h, dt) = (grid.spacing(), c.angular_spacing());
                let tw = grid.trapezoid_weights();
                for i in 0..grid.num_nodes() {
                    let r = grid.node(i);
                    for j in 0..m {
                        let idx = c.index(i, j);
                        if i + 1 < grid.num_nodes() {
                            let mid = 0.5 * (r + grid.node(i + 1));
                            edge(idx, c.index(i + 1, j), 4.0 * mid * dt / h);
                        }
                        edge(idx, c.index(i, (j + 1) % m), 4.0 * tw[i] / (r * dt));
                    }
                }
            }
        }
        Self {
            rows,
            mass,
            edges,
            potential: scal,
        }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `(wᵀ K w) / (wᵀ M w)`.
    pub fn rayleigh_quotient(&self, w: &[f64]) -> f64 {
        let stiffness: f64 = self.edges.iter().map(|&(i, j, c)| c * (w[i] - w[j]).powi(2)).sum();
        let potential: f64 = (0..w.len()).map(|i| self.potential[i] * self.mass[i] * w[i] * w[i]).sum();
        let num = stiffness + potential;
        let den: f64 = w.iter().zip(&self.mass).map(|(a, m)| a * a * m).sum();
        num / den
    }

    /// The symmetric matrix `M^{-1/2} K M^{-1/2}`.
    pub fn symmetric_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut out = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[(i, j)] = v / (self.mass[i] * self.mass[j]).sqrt();
            }
        }
        out
    }

    fn smallest_dense(&self) -> (f64, Vec<f64>) {
        let eig = SymmetricEigen::new(self.symmetric_dense());
        let (imin, lambda) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        let y = eig.eigenvectors.column(imin);
        let w: Vec<f64> = (0..self.len()).map(|i| y[i] / self.mass[i].sqrt()).collect();
        // the quotient is accurate to second order in the eigenvector error,
        // far better than the eigenvalue of the badly scaled dense matrix
        let refined = self.rayleigh_quotient(&w);
        let _ = lambda;
        (refined, w)
    }

    /// Bands of `K - σM` when every row only couples to its neighbours.
    fn tridiagonal_bands(&self, sigma: f64) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.len();
        let (mut lower, mut diag, mut upper) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                if j == i {
                    diag[i] = v - sigma * self.mass[i];
                } else if j + 1 == i {
                    lower[i] = v;
                } else if j == i + 1 {
                    upper[i] = v;
                } else {
                    return None;
                }
            }
        }
        Some((lower, diag, upper))
    }

    /// Whether the direct banded solve is available.
    pub fn is_tridiagonal(&self) -> bool {
        self.tridiagonal_bands(0.0).is_some()
    }

    /// Shifted inverse iteration; the shift sits below the smallest potential
    /// value so `K - σM` is positive definite and conjugate gradients apply.
    fn smallest_inverse_iteration(&self) -> Result<(f64, Vec<f64>)> {
        let n = self.len();
        let potential_min = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|&(_, v)| v).sum::<f64>() / self.mass[i])
            .fold(f64::INFINITY, f64::min);
        let sigma = potential_min - 1.0;
        let shifted = |x: &[f64]| -> Vec<f64> {
            let kx = self.apply(x);
            kx.iter().zip(x).zip(&self.mass).map(|((a, b), m)| a - sigma * m * b).collect()
        };
        let tridiagonal = self.tridiagonal_bands(sigma);
        let mut w = vec![1.0; n];
        let mut lambda;
        let mut residual = f64::INFINITY;
        for _ in 0..MAX_ITERATIONS {
            let mut rhs: Vec<f64> = w.iter().zip(&self.mass).map(|(a, m)| a * m).collect();
            let mut next = match &tridiagonal {
                Some((lower, diag, upper)) => {
                    solve_tridiagonal(lower, diag, upper, &mut rhs);
                    rhs
                }
                None => conjugate_gradient(&shifted, &rhs, &w)?,
            };
            let norm = mass_norm(&next, &self.mass);
            next.iter_mut().for_each(|v| *v /= norm);
            lambda = self.rayleigh_quotient(&next);
            // the eigen-residual itself stalls at rounding level times ‖K‖,
            // so convergence is judged by the change of the iterate
            let sign = if dot(&next, &w) < 0.0 { -1.0 } else { 1.0 };
            let delta: Vec<f64> = next.iter().zip(&w).map(|(a, b)| sign * a - b).collect();
            residual = mass_norm(&delta, &self.mass) / mass_norm(&w, &self.mass).max(f64::MIN_POSITIVE);
            w = next;
            if residual < ITERATION_TOLERANCE {
                return Ok((lambda, w));
            }
        }
        Err(Error::NonConvergence {
            iterations: MAX_ITERATIONS,
            residual,
        })
    }
}

fn add(row: &mut Vec<(usize, f64)>, j: usize, v: f64) {
    match row.iter_mut().find(|(c, _)| *c == j) {
        Some(entry) => entry.1 += v,
        None => row.push((j, v)),
    }
}

fn mass_norm(x: &[f64], mass: &[f64]) -> f64 {
    x.iter().zip(mass).map(|(a, m)| a * a * m).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn conjugate_gradient(op: &dyn Fn(&[f64]) -> Vec<f64>, b: &[f64], x0: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = x0.to_vec();
    let ax = op(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = (1e-15 * dot(b, b).sqrt()).powi(2);
    for _ in 0..10 * n + 100 {
        if rr <= target {
            return Ok(x);
        }
        let ap = op(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotPositiveDefinite(pap));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let next = dot(&r, &r);
        let beta = next / rr;
        rr = next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rr.sqrt() < 1e-10 * dot(b, b).sqrt() {
        Ok(x)
    } else {
        Err(Error::NonConvergence {
            iterations: 10 * n + 100,
            residual: rr.sqrt(),
        })
    }
}

/// Principal Neumann eigenpair of `4Δ + scal` and the minimizer `f_g`.
pub fn lambda_eig(g: &MetricField) -> Result<LambdaResult> {
    lambda_eig_with(g, EigenMethod::Auto)
}

pub fn lambda_eig_with(g: &MetricField, method: EigenMethod) -> Result<LambdaResult> {
    let op = SchrodingerOperator::assemble(g);
    let dense = match method {
        EigenMethod::Auto => !op.is_tridiagonal() && op.len() < DENSE_LIMIT,
        EigenMethod::Dense => true,
        EigenMethod::InverseIteration => false,
    };
    let (lambda, mut w) = if dense {
        op.smallest_dense()
    } else {
        op.smallest_inverse_iteration()?
    };
    if w.iter().sum::<f64>() < 0.0 {
        w.iter_mut().for_each(|v| *v = -*v);
    }
    let norm = mass_norm(&w, op.mass());
    w.iter_mut().for_each(|v| *v /= norm);
    let (min, max) = w
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if min <= 0.0 {
        return Err(Error::SignFlip { min, max });
    }
    let f: Vec<f64> = w.iter().map(|v| -2.0 * v.ln()).collect();
    let residuals = residuals(g, lambda, &f);
    Ok(LambdaResult {
        lambda,
        eigenfunction: w,
        minimizer: f,
        residuals,
    })
}

fn residuals(g: &MetricField, lambda: f64, f: &[f64]) -> LambdaResiduals {
    let df = geometry::gradient(g, f);
    let lap = geometry::codifferential_covector(g, &df).unwrap_or_default();
    let grad2 = geometry::covector_inner(g, &df, &df).unwrap_or_default();
    let scal = geometry::curvature(g).scalar;
    let boundary: Vec<usize> = geometry::Side::BOTH
        .iter()
        .flat_map(|&s| g.boundary_nodes(s))
        .collect();
    let pde_residual = (0..f.len())
        .filter(|i| !boundary.contains(i))
        .map(|i| (-2.0 * lap[i] - grad2[i] + scal[i] - lambda).abs())
        .fold(0.0, f64::max);
    let neumann_residual = geometry::Side::BOTH
        .iter()
        .flat_map(|&s| geometry::normal_component(g, &df, s))
        .fold(0.0, |a: f64, v| a.max(v.abs()));
    let mass: f64 = g.integrate(&f.iter().map(|v| (-v).exp()).collect::<Vec<_>>());
    LambdaResiduals {
        pde_residual,
        neumann_residual,
        normalization_residual: (mass - 1.0).abs(),
    }
}

/// `λ'_g(h) = -∫⟨Ric + ∇²f, h⟩ e^{-f} dV - ∫_{∂M} (2H'_g(h) + φ_g(h) H) e^{-f} dA`.
///
/// No volume-preserving projection is applied: the normalization of `f`
/// absorbs the trace part of `h`, and the formula holds for every `h` with
/// conformal boundary part.
pub fn lambda_first_variation(g: &MetricField, h: &VariationField) -> Result<LambdaVariation> {
    let eig = lambda_eig(g)?;
    lambda_first_variation_at(g, h, &eig)
}

pub fn lambda_first_variation_at(g: &MetricField, h: &VariationField, eig: &LambdaResult) -> Result<LambdaVariation> {
    let f = &eig.minimizer;
    let weight: Vec<f64> = f.iter().map(|v| (-v).exp()).collect();
    let hess = geometry::codifferential_star(g, &geometry::gradient(g, f))?;
    let bakry = geometry::curvature(g).ricci.axpy(1.0, &hess)?;
    let pairing = geometry::inner_product(g, &bakry, h)?;
    let weighted: Vec<f64> = pairing.iter().zip(&weight).map(|(a, b)| a * b).collect();
    let interior = -g.integrate(&weighted);
    let hp = variations::mc_first_variation(g, h)?;
    let states = geometry::boundary_state(g);
    let mut boundary = 0.0;
    for (hp, state) in hp.iter().zip(&states) {
        let phi = variations::phi_g(g, h, state.side)?;
        let nodes = g.boundary_nodes(state.side);
        for j in 0..nodes.len() {
            let integrand = 2.0 * hp.values[j] + phi[j] * state.mean_curvature[j];
            boundary -= integrand * weight[nodes[j]] * state.area_weights[j];
        }
    }
    Ok(LambdaVariation {
        interior,
        boundary,
        total: interior + boundary,
    })
}

/// Checks that the boundary term of `λ'` vanishes for `h` obeying the
/// mean-curvature law, relative to `tolerance · (1 + |interior|)`.
pub fn lambda_boundary_cancellation_check(
    g: &MetricField,
    h: &VariationField,
    tolerance: f64,
) -> Result<CancellationReport> {
    let var = lambda_first_variation(g, h)?;
    let mc = variations::mc_condition_residual(g, h)?
        .iter()
        .map(|b| b.max_abs())
        .fold(0.0, f64::max);
    Ok(CancellationReport {
        interior: var.interior,
        boundary: var.boundary,
        mc_condition_residual: mc,
        tolerance,
        passed: var.boundary.abs() <= tolerance * (1.0 + var.interior.abs()),
    })
}

/// Central finite difference `(λ(g + th) - λ(g - th)) / 2t`.
pub fn lambda_finite_difference(g: &MetricField, h: &VariationField, t: f64) -> Result<f64> {
    let plus = lambda_eig(&g.perturbed(h, t)?)?.lambda;
    let minus = lambda_eig(&g.perturbed(h, -t)?)?.lambda;
    Ok((plus - minus) / (2.0 * t))
}
