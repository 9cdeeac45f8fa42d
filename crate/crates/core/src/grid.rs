//! Uniform radial grids and the finite-difference stencils used throughout.
//!
//! Every derivative is second order: central in the interior and one-sided
//! (three points for the first derivative, four for the second) at the two
//! boundary nodes. [`HighOrderStencils`] provides wider stencils for the few
//! places that need third and higher derivatives at the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform node-centred grid on `[r_min, r_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    r_min: f64,
    r_max: f64,
    num_cells: usize,
}

impl Grid1D {
    pub fn new(r_min: f64, r_max: f64, num_cells: usize) -> Result<Self> {
        if !(r_min.is_finite() && r_max.is_finite()) || r_min >= r_max {
            return Err(Error::InvalidGrid(format!(
                "need r_min < r_max, got [{r_min}, {r_max}]"
            )));
        }
        if num_cells < 4 {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 cells for one-sided stencils, got {num_cells}"
            )));
        }
        Ok(Self {
            r_min,
            r_max,
            num_cells,
        })
    }

    /// Grid with `nodes` nodes, i.e. `nodes - 1` cells.
    pub fn with_nodes(r_min: f64, r_max: f64, nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {nodes}")));
        }
        Self::new(r_min, r_max, nodes - 1)
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn num_nodes(&self) -> usize {
        self.num_cells + 1
    }

    pub fn spacing(&self) -> f64 {
        (self.r_max - self.r_min) / self.num_cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.num_cells {
            self.r_max
        } else {
            self.r_min + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.num_nodes()).map(|i| self.node(i)).collect()
    }

    pub fn last(&self) -> usize {
        self.num_cells
    }

    /// The grid with every cell halved.
    pub fn refined(&self) -> Self {
        Self {
            num_cells: 2 * self.num_cells,
            ..*self
        }
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes().into_iter().map(f).collect()
    }

    /// Composite trapezoid weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.num_nodes()];
        w[0] = 0.5 * h;
        w[self.num_cells] = 0.5 * h;
        w
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.num_nodes());
        self.trapezoid_weights()
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// First derivative at node `i`.
    pub fn d1_at(&self, f: &[f64], i: usize) -> f64 {
        let h = self.spacing();
        let n = self.num_cells;
        if i == 0 {
            (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
        } else if i == n {
            (3.0 * f[n] - 4.0 * f[n - 1] + f[n - 2]) / (2.0 * h)
        } else {
            (f[i + 1] - f[i - 1]) / (2.0 * h)
        }
    }

    /// Second derivative at node `i`.
    pub fn d2_at(&self, f: &[f64], i: usize) -> f64 {
        let h2 = self.spacing() * self.spacing();
        let n = self.num_cells;
        if i == 0 {
            (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2
        } else if i == n {
            (2.0 * f[n] - 5.0 * f[n - 1] + 4.0 * f[n - 2] - f[n - 3]) / h2
        } else {
            (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2
        }
    }

    pub fn d1(&self, f: &[f64]) -> Vec<f64> {
        (0..self.num_nodes()).map(|i| self.d1_at(f, i)).collect()
    }

    pub fn d2(&self, f: &[f64]) -> Vec<f64> {
        (0..self.num_nodes()).map(|i| self.d2_at(f, i)).collect()
    }

    /// Fourth-order one-sided first derivative at `r_min` or `r_max`.
    pub fn boundary_d1(&self, f: &[f64], at_max: bool) -> f64 {
        self.boundary_d1_stencil(at_max).iter().map(|&(j, w)| w * f[j]).sum()
    }

    /// `(node, weight)` pairs of [`Grid1D::boundary_d1`], listed from the
    /// boundary node inwards.
    pub fn boundary_d1_stencil(&self, at_max: bool) -> [(usize, f64); 5] {
        const W: [f64; 5] = [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25];
        let n = self.num_cells;
        let h = self.spacing();
        std::array::from_fn(|k| {
            if at_max {
                (n - k, -W[k] / h)
            } else {
                (k, W[k] / h)
            }
        })
    }

    /// Four-point Lagrange interpolation of node values at an arbitrary `r`
    /// inside the grid.
    pub fn interpolate(&self, f: &[f64], r: f64) -> f64 {
        let h = self.spacing();
        let n = self.num_cells;
        let x = ((r - self.r_min) / h).clamp(0.0, n as f64);
        let cell = (x.floor() as usize).min(n - 1);
        let start = cell.saturating_sub(1).min(n - 3);
        let mut value = 0.0;
        for a in 0..4 {
            let xa = (start + a) as f64;
            let mut weight = 1.0;
            for b in 0..4 {
                if a != b {
                    let xb = (start + b) as f64;
                    weight *= (x - xb) / (xa - xb);
                }
            }
            value += weight * f[start + a];
        }
        value
    }
}

/// Finite-difference weights for the `order`-th derivative at `x0` from the
/// points `xs` (Fornberg's recursion).
pub fn fornberg_weights(x0: f64, xs: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Wide stencils of a fixed width, shifted to stay inside the grid near the
/// ends.
#[derive(Debug, Clone)]
pub struct HighOrderStencils {
    grid: Grid1D,
    width: usize,
    // cached unit-spacing weights for first and second derivatives
    cached: [Vec<Vec<f64>>; 2],
}

impl HighOrderStencils {
    pub fn new(grid: Grid1D, width: usize) -> Self {
        let width = width.min(grid.num_nodes());
        let mut out = Self {
            grid,
            width,
            cached: [Vec::new(), Vec::new()],
        };
        for order in 1..=2 {
            out.cached[order - 1] = (0..grid.num_nodes()).map(|i| out.weights(i, order)).collect();
        }
        out
    }

    fn window(&self, i: usize) -> usize {
        let half = self.width / 2;
        i.saturating_sub(half).min(self.grid.num_nodes() - self.width)
    }

    fn weights(&self, i: usize, order: usize) -> Vec<f64> {
        let start = self.window(i);
        let xs: Vec<f64> = (start..start + self.width).map(|j| j as f64).collect();
        fornberg_weights(i as f64, &xs, order)
    }

    pub fn derivative_at(&self, f: &[f64], i: usize, order: usize) -> f64 {
        let start = self.window(i);
        let computed;
        let w = match order {
            1 | 2 => &self.cached[order - 1][i],
            _ => {
                computed = self.weights(i, order);
                &computed
            }
        };
        let h = self.grid.spacing();
        let sum: f64 = w.iter().zip(&f[start..start + self.width]).map(|(a, b)| a * b).sum();
        sum / h.powi(order as i32)
    }

    pub fn derivative(&self, f: &[f64], order: usize) -> Vec<f64> {
        (0..self.grid.num_nodes())
            .map(|i| self.derivative_at(f, i, order))
            .collect()
    }
}

/// Area of the unit sphere `S^k`.
pub fn unit_sphere_area(k: usize) -> f64 {
    use std::f64::consts::PI;
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * unit_sphere_area(k - 2),
    }
}

/// Solves a tridiagonal system in place (Thomas algorithm). `lower[0]` and
/// `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        c[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i + 1] * rhs[i + 1];
    }
}

/// Observed convergence order from errors at spacing `h` and `h/2`.
pub fn observed_rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid1D::new(1.0, 1.0, 10).is_err());
        assert!(Grid1D::new(2.0, 1.0, 10).is_err());
        assert!(Grid1D::new(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn boundary_nodes_are_ends() {
        let g = Grid1D::new(0.5, 2.0, 7).unwrap();
        assert_eq!(g.num_nodes(), 8);
        assert_eq!(g.node(0), 0.5);
        assert_eq!(g.node(7), 2.0);
        assert!((g.spacing() - 1.5 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn stencils_are_exact_on_quadratics() {
        let g = Grid1D::new(-1.0, 2.0, 9).unwrap();
        let f = g.sample(|r| 3.0 * r * r - r + 2.0);
        for (i, r) in g.nodes().into_iter().enumerate() {
            assert!((g.d1_at(&f, i) - (6.0 * r - 1.0)).abs() < 1e-12);
            assert!((g.d2_at(&f, i) - 6.0).abs() < 1e-10);
        }
    }

    #[test]
    fn stencils_converge_at_second_order() {
        let err = |cells: usize| {
            let g = Grid1D::new(0.3, 1.7, cells).unwrap();
            let f = g.sample(f64::sin);
            (0..g.num_nodes())
                .map(|i| {
                    let r = g.node(i);
                    (g.d1_at(&f, i) - r.cos()).abs().max((g.d2_at(&f, i) + r.sin()).abs())
                })
                .fold(0.0, f64::max)
        };
        assert!(observed_rate(err(20), err(40)) > 1.8);
    }

    #[test]
    fn fornberg_reproduces_central_difference() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] + 2.0).abs() < 1e-14 && (w[2] - 1.0).abs() < 1e-14);
        let w = fornberg_weights(0.0, &[0.0, 1.0, 2.0], 1);
        assert!((w[0] + 1.5).abs() < 1e-14 && (w[1] - 2.0).abs() < 1e-14 && (w[2] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn high_order_derivatives_are_accurate_at_the_ends() {
        let g = Grid1D::new(0.2, 1.2, 100).unwrap();
        let f = g.sample(f64::exp);
        let s = HighOrderStencils::new(g, 9);
        for order in 1..=4 {
            let d = s.derivative(&f, order);
            for (i, r) in g.nodes().into_iter().enumerate() {
                assert!((d[i] - r.exp()).abs() < 1e-5, "order {order} node {i}");
            }
        }
    }

    #[test]
    fn interpolation_is_exact_on_cubics() {
        let g = Grid1D::new(0.0, 1.0, 10).unwrap();
        let f = g.sample(|r| r * r * r - 2.0 * r);
        for &r in &[0.0, 0.03, 0.51, 0.97, 1.0] {
            assert!((g.interpolate(&f, r) - (r * r * r - 2.0 * r)).abs() < 1e-13);
        }
    }

    #[test]
    fn sphere_areas() {
        use std::f64::consts::PI;
        assert!((unit_sphere_area(2) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn thomas_solves_poisson() {
        let n = 5;
        let lower = vec![-1.0; n];
        let upper = vec![-1.0; n];
        let diag = vec![2.0; n];
        let x = [1.0, -2.0, 0.5, 3.0, 1.0];
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| {
                2.0 * x[i] - if i > 0 { x[i - 1] } else { 0.0 } - if i + 1 < n { x[i + 1] } else { 0.0 }
            })
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
        for i in 0..n {
            assert!((rhs[i] - x[i]).abs() < 1e-12);
        }
    }
}
