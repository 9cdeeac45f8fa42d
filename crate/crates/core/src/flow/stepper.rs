//! Time stepping of the warped Ricci-deTurck system.
//!
//! With `u = A dr² + B ĝ` the right-hand side `-2Ric_u - 2δ*_u ξ(u)` has
//! principal part `(1/A) ∂_r²` acting on both components (the `B''` terms
//! cancel in the `A` equation). The IMEX scheme treats `(1/A*) ∂_r²` with
//! `A*` frozen per step implicitly and everything else explicitly. Boundary
//! values are then fixed by Newton on `ξ = 0` and the backward-difference
//! mean-curvature law, using the linear dependence of the interior solve on
//! its Dirichlet data.

use std::ops::{Add, Div, Mul, Sub};

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::geometry::WarpedMetric;
use crate::grid::{solve_tridiagonal, Grid1D, HighOrderStencils};
use crate::variations::STENCIL_WIDTH;

use super::Stepper;

/// Iteration cap of the boundary Newton solve.
pub const MAX_NEWTON_ITERATIONS: usize = 10;

const NEWTON_STEP_TOLERANCE: f64 = 1e-13;

/// Backward-difference weights `(β₀, β₁, β₂)` with
/// `∂_t x ≈ (β₀ xⁿ⁺¹ + β₁ xⁿ + β₂ xⁿ⁻¹) / dt`.
pub fn bdf_weights(order: usize) -> [f64; 3] {
    if order >= 2 {
        [1.5, -2.0, 0.5]
    } else {
        [1.0, -1.0, 0.0]
    }
}

/// Value plus gradient with respect to the four boundary unknowns
/// `(A_inner, B_inner, A_outer, B_outer)`.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    d: [f64; 4],
}

impl Dual {
    fn constant(v: f64) -> Self {
        Self { v, d: [0.0; 4] }
    }

    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let f = 0.5 / s;
        Self {
            v: s,
            d: self.d.map(|x| f * x),
        }
    }

    fn scale(self, c: f64) -> Self {
        Self {
            v: c * self.v,
            d: self.d.map(|x| c * x),
        }
    }
}

impl Add for Dual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            d: std::array::from_fn(|i| self.d[i] + o.d[i]),
        }
    }
}

impl Sub for Dual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            v: self.v - o.v,
            d: std::array::from_fn(|i| self.d[i] - o.d[i]),
        }
    }
}

impl Mul for Dual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            d: std::array::from_fn(|i| self.d[i] * o.v + self.v * o.d[i]),
        }
    }
}

impl Div for Dual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        Self {
            v: self.v * inv,
            d: std::array::from_fn(|i| (self.d[i] - self.v * inv * o.d[i]) * inv),
        }
    }
}

/// Background data and grid constants shared by every step.
#[derive(Debug, Clone)]
pub struct WarpedSystem {
    pub k: f64,
    pub grid: Grid1D,
    at: Vec<f64>,
    at1: Vec<f64>,
    at2: Vec<f64>,
    bt1: Vec<f64>,
    bt2: Vec<f64>,
    // background first derivatives at the two boundary nodes, same stencil as
    // the deTurck field
    at1_b: [f64; 2],
    bt1_b: [f64; 2],
}

impl WarpedSystem {
    pub fn new(background: &WarpedMetric) -> Self {
        let grid = *background.grid();
        let (at, bt) = (background.a(), background.b());
        let st = HighOrderStencils::new(grid, STENCIL_WIDTH);
        let last = grid.last();
        Self {
            k: background.k() as f64,
            grid,
            at1: grid.d1(&at),
            at2: grid.d2(&at),
            bt1: grid.d1(&bt),
            bt2: grid.d2(&bt),
            at1_b: [st.derivative_at(&at, 0, 1), st.derivative_at(&at, last, 1)],
            bt1_b: [st.derivative_at(&bt, 0, 1), st.derivative_at(&bt, last, 1)],
            at,
        }
    }

    /// `(F_A, F_B)` of `-2Ric - 2δ*ξ` at interior node `i` from central
    /// differences.
    fn rhs_at(&self, a_v: &[f64], b_v: &[f64], i: usize) -> (f64, f64) {
        let h = self.grid.spacing();
        let k = self.k;
        let (a, b) = (a_v[i], b_v[i]);
        let a1 = (a_v[i + 1] - a_v[i - 1]) / (2.0 * h);
        let b1 = (b_v[i + 1] - b_v[i - 1]) / (2.0 * h);
        let a2 = (a_v[i + 1] - 2.0 * a + a_v[i - 1]) / (h * h);
        let b2 = (b_v[i + 1] - 2.0 * b + b_v[i - 1]) / (h * h);
        let (at, at1, at2) = (self.at[i], self.at1[i], self.at2[i]);
        let (bt1, bt2) = (self.bt1[i], self.bt2[i]);
        let fa = a2 / a - 1.5 * a1 * a1 / (a * a) + 0.5 * k * b1 * b1 / (b * b) - at2 / at
            + at1 * at1 / (at * at)
            + 0.5 * a1 * at1 / (a * at)
            + k * a * bt2 / (at * b)
            - k * a * b1 * bt1 / (at * b * b)
            - k * a * at1 * bt1 / (at * at * b)
            + 0.5 * k * a1 * bt1 / (at * b);
        let fb = b2 / a - b1 * b1 / (a * b) + 2.0 - 2.0 * k + 0.5 * k * b1 * bt1 / (at * b)
            - 0.5 * at1 * b1 / (a * at);
        (fa, fb)
    }

    /// Interior values of the right-hand side; boundary entries are zero.
    pub fn rhs(&self, a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = a.len();
        let mut fa = vec![0.0; n];
        let mut fb = vec![0.0; n];
        for i in 1..n - 1 {
            let (x, y) = self.rhs_at(a, b, i);
            fa[i] = x;
            fb[i] = y;
        }
        (fa, fb)
    }

    /// Boundary residuals `ξ` and the backward-difference mean-curvature law
    /// for candidate values `x` of the four boundary unknowns.
    fn closure_residual(&self, cand: &Candidate, x: &[f64; 4], history: &BoundaryHistory) -> [Dual; 4] {
        let vars: [Dual; 4] = std::array::from_fn(|i| {
            let mut d = [0.0; 4];
            d[i] = 1.0;
            Dual { v: x[i], d }
        });
        let n = self.grid.last();
        let value = |field: usize, j: usize| -> Dual {
            // field 0 is A, field 1 is B
            let (lo, hi) = (vars[field], vars[field + 2]);
            if j == 0 {
                lo
            } else if j == n {
                hi
            } else {
                let p = if field == 0 { &cand.pa } else { &cand.pb };
                Dual::constant(p[j]) + lo.scale(cand.el[j]) + hi.scale(cand.er[j])
            }
        };
        let k = self.k;
        let w = history.weights;
        let mut out = [Dual::constant(0.0); 4];
        for (s, at_max) in [(0usize, false), (1usize, true)] {
            let stencil = self.grid.boundary_d1_stencil(at_max);
            let ib = if at_max { n } else { 0 };
            let (a, b) = (value(0, ib), value(1, ib));
            let mut a1 = Dual::constant(0.0);
            let mut b1 = Dual::constant(0.0);
            let mut psi1 = Dual::constant(0.0);
            for &(j, wj) in &stencil {
                let bj = value(1, j);
                a1 = a1 + value(0, j).scale(wj);
                b1 = b1 + bj.scale(wj);
                psi1 = psi1 + bj.sqrt().scale(wj);
            }
            let at = self.at[ib];
            let xi = Dual::constant(0.5 * self.at1_b[s] / at) - (a1 / a).scale(0.5)
                + (b1 / b).scale(0.5 * k)
                - (a / b).scale(0.5 * k * self.bt1_b[s] / at);
            let orient = if at_max { 1.0 } else { -1.0 };
            let mc = (psi1 / (a.sqrt() * b.sqrt())).scale(orient * k);
            let [w0, w1, w2] = w;
            let dh = (mc.scale(w0) + Dual::constant(w1 * history.h[s][0] + w2 * history.h[s][1])).scale(1.0 / history.dt);
            let db = (b.scale(w0) + Dual::constant(w1 * history.b[s][0] + w2 * history.b[s][1])).scale(1.0 / history.dt);
            let law = dh + (db * mc / b).scale(0.5);
            out[2 * s] = xi;
            out[2 * s + 1] = law;
        }
        out
    }
}

/// Interior solution as an affine function of the boundary values:
/// `u_j = p_j + u_0 e_L,j + u_N e_R,j`.
struct Candidate {
    pa: Vec<f64>,
    pb: Vec<f64>,
    el: Vec<f64>,
    er: Vec<f64>,
}

/// Boundary values at earlier time levels entering the backward difference.
struct BoundaryHistory {
    dt: f64,
    weights: [f64; 3],
    // per side: [level n, level n-1]
    h: [[f64; 2]; 2],
    b: [[f64; 2]; 2],
}

/// Per-run integrator state.
pub struct Integrator<'a> {
    system: &'a WarpedSystem,
    stepper: Stepper,
    dt: f64,
    tolerance: f64,
    prev: Option<Level>,
    current: Level,
    pub newton_iterations: usize,
}

#[derive(Clone)]
struct Level {
    a: Vec<f64>,
    b: Vec<f64>,
    fa: Vec<f64>,
    fb: Vec<f64>,
    h: [f64; 2],
}

impl Level {
    fn new(system: &WarpedSystem, a: Vec<f64>, b: Vec<f64>) -> Self {
        let (fa, fb) = system.rhs(&a, &b);
        let h = [false, true].map(|at_max| mean_curvature_of(system, &a, &b, at_max));
        Self { a, b, fa, fb, h }
    }
}

/// `±k ψ_r/(φψ)` with the fourth-order boundary stencil on `ψ = √B`.
fn mean_curvature_of(system: &WarpedSystem, a: &[f64], b: &[f64], at_max: bool) -> f64 {
    let n = system.grid.last();
    let ib = if at_max { n } else { 0 };
    let psi1: f64 = system
        .grid
        .boundary_d1_stencil(at_max)
        .iter()
        .map(|&(j, w)| w * b[j].sqrt())
        .sum();
    let s = if at_max { 1.0 } else { -1.0 };
    s * system.k * psi1 / (a[ib].sqrt() * b[ib].sqrt())
}

impl<'a> Integrator<'a> {
    pub fn new(system: &'a WarpedSystem, initial: &WarpedMetric, stepper: Stepper, dt: f64, tolerance: f64) -> Self {
        Self {
            system,
            stepper,
            dt,
            tolerance,
            prev: None,
            current: Level::new(system, initial.a(), initial.b()),
            newton_iterations: 0,
        }
    }

    pub fn state(&self) -> (&[f64], &[f64]) {
        (&self.current.a, &self.current.b)
    }

    /// Advances one step ending at time `t_new`.
    pub fn step(&mut self, t_new: f64) -> Result<()> {
        let n = self.system.grid.last();
        let order = match (self.stepper, &self.prev) {
            (Stepper::Imex, Some(_)) => 2,
            _ => 1,
        };
        let cand = match self.stepper {
            Stepper::Imex => self.implicit_interior(order),
            Stepper::Explicit => self.explicit_interior(),
        };
        let weights = bdf_weights(order);
        let prev_h = self.prev.as_ref().map(|p| p.h).unwrap_or([0.0; 2]);
        let prev_b = self.prev.as_ref().map(|p| [p.b[0], p.b[n]]).unwrap_or([0.0; 2]);
        let history = BoundaryHistory {
            dt: self.dt,
            weights,
            h: [[self.current.h[0], prev_h[0]], [self.current.h[1], prev_h[1]]],
            b: [[self.current.b[0], prev_b[0]], [self.current.b[n], prev_b[1]]],
        };
        let mut x = [self.current.a[0], self.current.b[0], self.current.a[n], self.current.b[n]];
        let mut converged = false;
        let mut iterations = 0;
        for _ in 0..MAX_NEWTON_ITERATIONS {
            iterations += 1;
            let res = self.system.closure_residual(&cand, &x, &history);
            let jac = Matrix4::from_fn(|i, j| res[i].d[j]);
            let rhs = Vector4::from_fn(|i, _| -res[i].v);
            let delta = jac.lu().solve(&rhs).ok_or_else(|| Error::StepRejected {
                time: t_new,
                reason: "singular boundary Jacobian".into(),
            })?;
            let mut rel = 0.0f64;
            for i in 0..4 {
                x[i] += delta[i];
                rel = rel.max(delta[i].abs() / x[i].abs().max(f64::MIN_POSITIVE));
            }
            if x.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::StepRejected {
                    time: t_new,
                    reason: format!("boundary Newton left the positive cone: {x:?}"),
                });
            }
            if rel <= NEWTON_STEP_TOLERANCE {
                converged = true;
                break;
            }
        }
        let res = self.system.closure_residual(&cand, &x, &history);
        let xi = res[0].v.abs().max(res[2].v.abs());
        let law = res[1].v.abs().max(res[3].v.abs());
        if !converged && (xi > self.tolerance || law > self.tolerance) {
            return Err(Error::StepRejected {
                time: t_new,
                reason: format!("boundary Newton did not converge (|ξ| = {xi:e}, law residual {law:e})"),
            });
        }
        self.newton_iterations = iterations;
        let assemble = |p: &[f64], lo: f64, hi: f64| -> Vec<f64> {
            let mut u: Vec<f64> = (0..=n).map(|j| p[j] + lo * cand.el[j] + hi * cand.er[j]).collect();
            u[0] = lo;
            u[n] = hi;
            u
        };
        let a = assemble(&cand.pa, x[0], x[2]);
        let b = assemble(&cand.pb, x[1], x[3]);
        if let Some((node, value)) = a
            .iter()
            .chain(b.iter())
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::BlowUp {
                time: t_new,
                reason: format!("component value {value} at node {}", node % (n + 1)),
            });
        }
        let next = Level::new(self.system, a, b);
        self.prev = Some(std::mem::replace(&mut self.current, next));
        Ok(())
    }

    fn explicit_interior(&self) -> Candidate {
        let n = self.system.grid.last();
        let c = &self.current;
        let mut pa = c.a.clone();
        let mut pb = c.b.clone();
        for i in 1..n {
            pa[i] += self.dt * c.fa[i];
            pb[i] += self.dt * c.fb[i];
        }
        pa[0] = 0.0;
        pa[n] = 0.0;
        pb[0] = 0.0;
        pb[n] = 0.0;
        Candidate {
            pa,
            pb,
            el: vec![0.0; n + 1],
            er: vec![0.0; n + 1],
        }
    }

    fn implicit_interior(&self, order: usize) -> Candidate {
        let grid = self.system.grid;
        let n = grid.last();
        let h2 = grid.spacing() * grid.spacing();
        let c = &self.current;
        // frozen coefficient of the implicit Laplacian, extrapolated to the new level
        let a_star: Vec<f64> = match (&self.prev, order) {
            (Some(p), 2) => c
                .a
                .iter()
                .zip(&p.a)
                .map(|(x, y)| {
                    let e = 2.0 * x - y;
                    if e > 0.0 {
                        e
                    } else {
                        *x
                    }
                })
                .collect(),
            _ => c.a.clone(),
        };
        let lap = |u: &[f64], i: usize| (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (a_star[i] * h2);
        let weights = bdf_weights(order);
        let m = n - 1;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut ra = vec![0.0; m];
        let mut rb = vec![0.0; m];
        for i in 1..n {
            let s = 1.0 / (a_star[i] * h2);
            lower[i - 1] = -s;
            upper[i - 1] = -s;
            diag[i - 1] = weights[0] / self.dt + 2.0 * s;
            let (ea, eb) = (c.fa[i] - lap(&c.a, i), c.fb[i] - lap(&c.b, i));
            match (&self.prev, order) {
                (Some(p), 2) => {
                    let (pa, pb) = (p.fa[i] - lap(&p.a, i), p.fb[i] - lap(&p.b, i));
                    ra[i - 1] = -(weights[1] * c.a[i] + weights[2] * p.a[i]) / self.dt + 2.0 * ea - pa;
                    rb[i - 1] = -(weights[1] * c.b[i] + weights[2] * p.b[i]) / self.dt + 2.0 * eb - pb;
                }
                _ => {
                    ra[i - 1] = c.a[i] / self.dt + ea;
                    rb[i - 1] = c.b[i] / self.dt + eb;
                }
            }
        }
        let mut el = vec![0.0; m];
        let mut er = vec![0.0; m];
        el[0] = 1.0 / (a_star[1] * h2);
        er[m - 1] = 1.0 / (a_star[n - 1] * h2);
        for rhs in [&mut ra, &mut rb, &mut el, &mut er] {
            solve_tridiagonal(&lower, &diag, &upper, rhs);
        }
        let pad = |v: Vec<f64>| -> Vec<f64> {
            let mut out = Vec::with_capacity(n + 1);
            out.push(0.0);
            out.extend(v);
            out.push(0.0);
            out
        };
        Candidate {
            pa: pad(ra),
            pb: pad(rb),
            el: pad(el),
            er: pad(er),
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MetricField, VariationField};
    use crate::variations;

    fn max_rel(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .skip(2)
            .take(a.len() - 4)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn closed_form_rhs_matches_curvature_and_deturck() {
        for cells in [100, 200] {
            let grid = Grid1D::new(0.5, 1.3, cells).unwrap();
            let w = WarpedMetric::from_functions(4, grid, |r| 1.0 + 0.1 * r * r, |r| r.sin() + 0.2 * r).unwrap();
            let bg = WarpedMetric::from_functions(4, grid, |r| 1.0 + 0.05 * r, |r| 0.9 * r.sin() + 0.1).unwrap();
            let sys = WarpedSystem::new(&bg);
            let (fa, fb) = sys.rhs(&w.a(), &w.b());
            let reference = variations::ricci_deturck_rhs(&MetricField::Warped(w), &MetricField::Warped(bg)).unwrap();
            let VariationField::Warped(r) = reference else { unreachable!() };
            let err = max_rel(&fa, &r.rr).max(max_rel(&fb, &r.sphere));
            assert!(err < 20.0 / (cells * cells) as f64, "cells {cells}: {err:e}");
        }
    }

    #[test]
    fn einstein_rhs_is_minus_two_mu_g() {
        let err = |cells| {
            let grid = Grid1D::new(0.4, 1.2, cells).unwrap();
            let w = WarpedMetric::from_functions(3, grid, |_| 1.0, f64::sin).unwrap();
            let sys = WarpedSystem::new(&w);
            let (fa, fb) = sys.rhs(&w.a(), &w.b());
            let b = w.b();
            (1..grid.last())
                .map(|i| (fa[i] + 4.0).abs().max((fb[i] + 4.0 * b[i]).abs()))
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (err(100), err(200));
        assert!(fine < 1e-3, "{fine:e}");
        assert!((coarse / fine).log2() > 1.9, "{coarse:e} {fine:e}");
    }
}
