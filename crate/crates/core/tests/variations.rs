#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;

use proptest::prelude::*;
use ricci_boundary::geometry::{self, ConformalMetric, CovectorField, MetricField, VariationField, WarpedMetric};
use ricci_boundary::grid::{observed_rate, Grid1D};
use ricci_boundary::presets::{preset, GeometrySpec};
use ricci_boundary::variations::{self, random_variation};

/// The preset at a coarse level and its refinement (radial and angular).
fn levels(name: &str) -> [MetricField; 2] {
    let spec = preset(name).unwrap();
    let coarse = |s: &GeometrySpec, level: usize| GeometrySpec {
        nodes: 32 * level + 1,
        angular: s.angular.map(|_| 32 * level),
        ..s.clone()
    };
    [coarse(&spec, 1).build().unwrap(), coarse(&spec, 2).build().unwrap()]
}

fn identity_defect(g: &MetricField, h: &VariationField) -> f64 {
    variations::boundary_identity_residual(g, h)
        .unwrap()
        .iter()
        .map(|b| b.max_abs())
        .fold(0.0, f64::max)
}

#[test]
fn boundary_identity_holds_to_truncation_error() {
    for name in ["sphere-band-n3", "hyperbolic-band-n3", "flat-annulus-2d"] {
        let [coarse, fine] = levels(name);
        for seed in 0..50 {
            let a = identity_defect(&coarse, &random_variation(&coarse, seed));
            let b = identity_defect(&fine, &random_variation(&fine, seed));
            // Richardson estimate of the fine-level truncation error
            let estimate = (a - b).abs() / 3.0;
            assert!(b <= 10.0 * estimate, "{name} seed {seed}: {a} {b}");
            assert!(observed_rate(a, b) >= 1.8, "{name} seed {seed}: {a} {b}");
        }
    }
}

#[test]
fn integrated_boundary_identity() {
    // ∫ D_g(h) dA = ∫ (2H' + φH) dA since the tangential divergence integrates out
    let gap = |g: &MetricField| {
        let h = random_variation(g, 7);
        let d: f64 = variations::boundary_term_d(g, &h).unwrap().iter().map(|b| b.integral).sum();
        let hp = variations::mc_first_variation(g, &h).unwrap();
        let mut rhs = 0.0;
        for (state, hp) in geometry::boundary_state(g).iter().zip(&hp) {
            let phi = variations::phi_g(g, &h, state.side).unwrap();
            for j in 0..phi.len() {
                rhs += (2.0 * hp.values[j] + phi[j] * state.mean_curvature[j]) * state.area_weights[j];
            }
        }
        (d - rhs).abs()
    };
    let [coarse, fine] = levels("flat-annulus-2d");
    let (a, b) = (gap(&coarse), gap(&fine));
    assert!(observed_rate(a, b) >= 1.8, "{a} {b}");
}

#[test]
fn einstein_hilbert_action_of_the_round_band() {
    let g = preset("sphere-band-n3").unwrap().build().unwrap();
    let s = variations::eh_action_and_variation(&g, &g.as_variation()).unwrap();
    assert!((s.action - 6.0 * g.volume()).abs() < 1e-4 * g.volume());
    let flat = preset("flat-annulus-n3").unwrap().with_nodes(41).build().unwrap();
    let s = variations::eh_action_and_variation(&flat, &random_variation(&flat, 2)).unwrap();
    let d: f64 = variations::boundary_term_d(&flat, &random_variation(&flat, 2)).unwrap().iter().map(|b| b.integral).sum();
    assert!(s.action.abs() < 1e-10 && s.interior.abs() < 1e-10);
    assert!((s.total + d).abs() < 1e-10);
}

#[test]
fn ansatz_variations_are_boundary_conformal() {
    // both ansätze have a one-component tangential block, so h^T = φ g^T always
    for g in [
        preset("sphere-band-n3").unwrap().with_nodes(41).build().unwrap(),
        preset("flat-annulus-2d").unwrap().build().unwrap(),
    ] {
        let h = random_variation(&g, 1);
        assert!(variations::conformal_residual(&g, &h).unwrap() < 1e-14);
        assert!(variations::mc_first_variation(&g, &h).is_ok());
    }
}

/// `ξ_i = w_ij w^kl (Γ(w) - Γ(flat))^j_kl` for `w = e^{2u}(dr² + r²dθ²)` from
/// finite differences of the metric components, independent of the library.
fn christoffel_oracle(u: &dyn Fn(f64, f64) -> f64, r: f64, th: f64) -> [f64; 2] {
    let metric = |r: f64, th: f64| {
        let e = (2.0 * u(r, th)).exp();
        [[e, 0.0], [0.0, e * r * r]]
    };
    let eps = 1e-5;
    let d = |k: usize| -> [[f64; 2]; 2] {
        let (p, m) = if k == 0 {
            (metric(r + eps, th), metric(r - eps, th))
        } else {
            (metric(r, th + eps), metric(r, th - eps))
        };
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = (p[i][j] - m[i][j]) / (2.0 * eps);
            }
        }
        out
    };
    let g = metric(r, th);
    let ginv = [1.0 / g[0][0], 1.0 / g[1][1]];
    let dg = [d(0), d(1)];
    let gamma = |j: usize, k: usize, l: usize| {
        0.5 * ginv[j] * (dg[k][j][l] + dg[l][j][k] - dg[j][k][l])
    };
    let flat = |j: usize, k: usize, l: usize| match (j, k, l) {
        (0, 1, 1) => -r,
        (1, 0, 1) | (1, 1, 0) => 1.0 / r,
        _ => 0.0,
    };
    let mut xi = [0.0; 2];
    for i in 0..2 {
        for k in 0..2 {
            xi[i] += g[i][i] * ginv[k] * (gamma(i, k, k) - flat(i, k, k));
        }
    }
    xi
}

#[test]
fn deturck_field_matches_an_independent_christoffel_oracle() {
    let u = |r: f64, th: f64| 0.1 * (r - 1.0).powi(2) * (2.0 - r) * th.cos() + 0.05 * r;
    let gap = |cells: usize| {
        let grid = Grid1D::new(1.0, 2.0, cells).unwrap();
        let w = ConformalMetric::from_function(grid, 2 * cells, u).unwrap();
        let flat = MetricField::Conformal(ConformalMetric::from_function(grid, 2 * cells, |_, _| 0.0).unwrap());
        let xi = variations::deturck_field(&MetricField::Conformal(w.clone()), &flat).unwrap();
        let CovectorField::Conformal { r: xr, theta: xt } = xi.covector else {
            panic!("backend changed");
        };
        (0..w.len())
            .map(|idx| {
                let o = christoffel_oracle(&u, w.radius(idx), w.theta(idx));
                (xr[idx] - o[0]).abs().max((xt[idx] - o[1]).abs())
            })
            .fold(0.0, f64::max)
    };
    // high-order jets put both levels at the oracle's own differencing floor
    let (a, b) = (gap(20), gap(40));
    assert!(a < 1e-8 && b < 1e-8, "{a} {b}");
}

#[test]
fn remainder_vanishes_for_flat_equal_metrics() {
    for g in [
        preset("flat-annulus-n3").unwrap().with_nodes(41).build().unwrap(),
        preset("flat-annulus-2d").unwrap().build().unwrap(),
    ] {
        let r = variations::remainder_tensor(&g, &g).unwrap();
        let norm = geometry::inner_product(&g, &r, &r).unwrap();
        assert!(norm.iter().all(|x| x.sqrt() < 1e-9), "{}", norm.iter().fold(0.0f64, |a, b| a.max(*b)));
    }
}

#[test]
fn heat_form_of_a_sphere_band_against_a_flat_background() {
    let residual = |cells: usize| {
        let grid = Grid1D::new(PI / 8.0, 3.0 * PI / 8.0, cells).unwrap();
        let w = MetricField::Warped(WarpedMetric::from_functions(3, grid, |_| 1.0, f64::sin).unwrap());
        let flat = MetricField::Warped(WarpedMetric::from_functions(3, grid, |_| 1.0, |r| r).unwrap());
        variations::heat_form_residual(&w, &flat, &flat).unwrap().into_iter().fold(0.0, f64::max)
    };
    let (a, b) = (residual(50), residual(100));
    assert!(observed_rate(a, b) >= 1.8, "{a} {b}");
}

fn conformal_direction(g: &MetricField, seed: u64) -> VariationField {
    VariationField::Conformal(variations::random_conformal_variation(g.as_conformal().unwrap(), seed).1)
}

fn sphere_band(cells: usize) -> MetricField {
    preset("sphere-band-n3").unwrap().with_nodes(cells + 1).build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn first_variations_are_linear(s1 in 0u64..1000, s2 in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = sphere_band(60);
        let (h1, h2) = (random_variation(&g, s1), random_variation(&g, s2));
        let combo = h1.scaled(a).axpy(b, &h2).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-11 * (1.0 + x.abs().max(y.abs()));
        let hp = |h: &VariationField| variations::mc_first_variation(&g, h).unwrap();
        let (p, p1, p2) = (hp(&combo), hp(&h1), hp(&h2));
        for s in 0..2 {
            prop_assert!(close(p[s].values[0], a * p1[s].values[0] + b * p2[s].values[0]));
        }
        let d = |h: &VariationField| variations::boundary_term_d(&g, h).unwrap();
        let (d0, d1, d2) = (d(&combo), d(&h1), d(&h2));
        for s in 0..2 {
            prop_assert!(close(d0[s].integral, a * d1[s].integral + b * d2[s].integral));
        }
        let eh = |h: &VariationField| variations::eh_action_and_variation(&g, h).unwrap().total;
        prop_assert!(close(eh(&combo), a * eh(&h1) + b * eh(&h2)));
    }

    #[test]
    fn deturck_field_of_a_metric_against_itself_is_zero(seed in 0u64..1000, t in 0.01f64..0.2) {
        let annulus = preset("flat-annulus-2d").unwrap().build().unwrap();
        for (base, h) in [
            (sphere_band(40), None),
            (annulus.clone(), Some(conformal_direction(&annulus, seed))),
        ] {
            let h = h.unwrap_or_else(|| random_variation(&base, seed));
            let w = base.perturbed(&h, t).unwrap();
            let xi = variations::deturck_field(&w, &w).unwrap();
            prop_assert!(xi.covector.radial().iter().all(|&x| x == 0.0));
            prop_assert_eq!(xi.max_norm(&w), 0.0);
        }
    }
}
