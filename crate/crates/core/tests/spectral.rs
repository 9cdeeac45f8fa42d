use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ricci_boundary::geometry::{self, MetricField, Side, VariationField, WarpedMetric, WarpedTensor};
use ricci_boundary::grid::{observed_rate, Grid1D};
use ricci_boundary::presets::preset;
use ricci_boundary::spectral::{self, EigenMethod, SchrodingerOperator};
use ricci_boundary::variations::{self, random_variation};

fn small_annulus() -> MetricField {
    ricci_boundary::presets::GeometrySpec {
        amplitude: Some(0.3),
        nodes: 13,
        angular: Some(24),
        ..preset("flat-annulus-2d").unwrap()
    }
    .build()
    .unwrap()
}

fn bumpy(cells: usize) -> MetricField {
    let grid = Grid1D::new(0.4, 1.4, cells).unwrap();
    MetricField::Warped(
        WarpedMetric::from_functions(3, grid, |r| 1.0 + 0.2 * r, |r| r.sin() * (1.0 + 0.1 * r)).unwrap(),
    )
}

#[test]
fn eigenfunction_minimizes_the_rayleigh_quotient() {
    let g = bumpy(60);
    let op = SchrodingerOperator::assemble(&g);
    let res = spectral::lambda_eig(&g).unwrap();
    let best = op.rayleigh_quotient(&res.eigenfunction);
    assert!((best - res.lambda).abs() < 1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let w: Vec<f64> = (0..op.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        assert!(op.rayleigh_quotient(&w) >= res.lambda - 1e-10);
        // small perturbations of the minimizer cannot beat it either
        let near: Vec<f64> = res.eigenfunction.iter().zip(&w).map(|(a, b)| a + 1e-3 * b).collect();
        assert!(op.rayleigh_quotient(&near) >= res.lambda - 1e-10);
    }
}

#[test]
fn lambda_agrees_with_a_dense_eigensolve_of_the_same_matrix() {
    for g in [bumpy(80), small_annulus()] {
        let op = SchrodingerOperator::assemble(&g);
        let eig = SymmetricEigen::new(op.symmetric_dense());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let res = spectral::lambda_eig(&g).unwrap();
        assert!((res.lambda - min).abs() < 1e-9 * (1.0 + min.abs()), "{} vs {min}", res.lambda);
        for method in [EigenMethod::Dense, EigenMethod::InverseIteration] {
            let other = spectral::lambda_eig_with(&g, method).unwrap();
            assert!((other.lambda - res.lambda).abs() < 1e-9);
        }
    }
}

#[test]
fn minimizer_satisfies_its_constraints() {
    let g = bumpy(200);
    let res = spectral::lambda_eig(&g).unwrap();
    assert!(res.eigenfunction.iter().all(|w| *w > 0.0));
    assert!(res.residuals.normalization_residual < 1e-10);
    assert!(res.residuals.neumann_residual < 1e-2);
    assert!(res.residuals.pde_residual < 1e-2);
    let sphere = preset("sphere-band-n3").unwrap().build().unwrap();
    let res = spectral::lambda_eig(&sphere).unwrap();
    assert!((res.lambda - 6.0).abs() < 1e-3);
    let (lo, hi) = res.minimizer.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), f| (a.min(*f), b.max(*f)));
    assert!(hi - lo < 1e-4);
}

#[test]
fn flat_annulus_lambda_is_zero() {
    for name in ["flat-annulus", "flat-annulus-2d"] {
        let g = preset(name).unwrap().build().unwrap();
        assert!(spectral::lambda_eig(&g).unwrap().lambda.abs() < 1e-9, "{name}");
    }
}

#[test]
fn lambda_converges_at_second_order() {
    let l = |cells| spectral::lambda_eig(&bumpy(cells)).unwrap().lambda;
    let (a, b, c) = (l(50), l(100), l(200));
    assert!(observed_rate((a - b).abs(), (b - c).abs()) >= 1.8);
}

#[test]
fn conformal_first_variation_matches_finite_difference() {
    let gap = |nodes: usize, angular: usize| {
        let g = ricci_boundary::presets::GeometrySpec {
            amplitude: Some(0.4),
            nodes,
            angular: Some(angular),
            ..preset("flat-annulus-2d").unwrap()
        }
        .build()
        .unwrap();
        let h = VariationField::Conformal(variations::random_conformal_variation(g.as_conformal().unwrap(), 0).1);
        let var = spectral::lambda_first_variation(&g, &h).unwrap();
        let fd = spectral::lambda_finite_difference(&g, &h, 1e-5).unwrap();
        (var.total - fd).abs() / (1.0 + fd.abs())
    };
    let (a, b) = (gap(21, 16), gap(41, 32));
    assert!(b < 2e-2 && observed_rate(a, b) >= 1.8, "{a} {b}");
}

/// Removes the trace mean so that `∫ tr_g h dV = 0`. The metric itself obeys
/// the mean-curvature law, so compatibility is preserved.
fn volume_preserving(g: &MetricField, h: &VariationField) -> VariationField {
    let tr = geometry::trace(g, h).unwrap();
    let c = g.integrate(&tr) / (g.dim() as f64 * g.volume());
    h.axpy(-c, &g.as_variation()).unwrap()
}

#[test]
fn einstein_variation_vanishes_for_compatible_volume_preserving_h() {
    // symmetric band about the equator
    let a = 0.5;
    let band = |cells| {
        let grid = Grid1D::new(PI / 2.0 - a, PI / 2.0 + a, cells).unwrap();
        MetricField::Warped(WarpedMetric::from_functions(3, grid, |_| 1.0, f64::sin).unwrap())
    };
    for seed in 0..3 {
        let fd: Vec<f64> = [200, 400]
            .iter()
            .map(|&cells| {
                let g = band(cells);
                let h = volume_preserving(&g, &variations::mc_compatible(&g, &random_variation(&g, seed)).unwrap());
                let var = spectral::lambda_first_variation(&g, &h).unwrap();
                assert!(var.total.abs() < 1e-6, "{var:?}");
                spectral::lambda_finite_difference(&g, &h, 1e-5).unwrap()
            })
            .collect();
        // the discrete λ only sees the cancellation up to truncation error
        assert!(fd[1].abs() < 1e-3 && observed_rate(fd[0].abs(), fd[1].abs()) >= 1.8, "{fd:?}");
        let g = band(400);
        // without the volume constraint the interior term survives
        let raw = variations::mc_compatible(&g, &random_variation(&g, seed)).unwrap();
        let tr = g.integrate(&geometry::trace(&g, &raw).unwrap());
        if tr.abs() > 1e-2 {
            assert!(spectral::lambda_first_variation(&g, &raw).unwrap().total.abs() > 1e-3);
        }
    }
}

#[test]
fn boundary_term_is_linear_in_the_mean_curvature_violation() {
    let g = preset("sphere-band-n3").unwrap().build().unwrap();
    let base = variations::mc_compatible(&g, &random_variation(&g, 3)).unwrap();
    // tangential bump with zero boundary value and unit slope at the outer end
    let grid = *g.grid();
    let b = g.as_warped().unwrap().b();
    let width = 0.3 * (grid.r_max() - grid.r_min());
    let sphere: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(&b)
        .map(|(&r, b)| {
            let x = r - grid.r_max();
            let s = x / width;
            if s.abs() < 1.0 { x * (1.0 - s * s).powi(3) * b } else { 0.0 }
        })
        .collect();
    let kick = VariationField::Warped(WarpedTensor {
        rr: vec![0.0; b.len()],
        sphere,
    });
    let eig = spectral::lambda_eig(&g).unwrap();
    let weight = |i: usize| (-eig.minimizer[i]).exp();
    let mut slopes = Vec::new();
    for eps in [1e-3, 1e-2, 1e-1] {
        let h = base.axpy(eps, &kick).unwrap();
        let report = spectral::lambda_boundary_cancellation_check(&g, &h, 1e-6).unwrap();
        assert!(!report.passed);
        let residual = variations::mc_condition_residual(&g, &h).unwrap();
        let states = geometry::boundary_state(&g);
        let predicted: f64 = residual
            .iter()
            .zip(&states)
            .map(|(res, st)| {
                let node = g.boundary_nodes(st.side)[0];
                -2.0 * res.values[0] * weight(node) * st.area()
            })
            .sum();
        assert!((report.boundary - predicted).abs() < 1e-9 * (1.0 + predicted.abs()));
        slopes.push(report.boundary / eps);
    }
    let spread = slopes.iter().fold(0.0f64, |m, s| m.max((s - slopes[0]).abs()));
    assert!(spread < 1e-6 * slopes[0].abs(), "{slopes:?}");
    let inner = variations::mc_condition_residual(&g, &base.axpy(0.1, &kick).unwrap()).unwrap();
    assert!(inner.iter().find(|b| b.side == Side::Inner).unwrap().max_abs() < 1e-12);
}

#[test]
fn einstein_flow_direction_has_no_boundary_term() {
    let g = preset("hyperbolic-band-n3").unwrap().build().unwrap();
    let h = geometry::curvature(&g).ricci.scaled(-2.0);
    let report = spectral::lambda_boundary_cancellation_check(&g, &h, 1e-3).unwrap();
    assert!(report.passed, "{report:?}");
    let zero = g.as_variation().zeros_like();
    let report = spectral::lambda_boundary_cancellation_check(&g, &zero, 1e-3).unwrap();
    assert_eq!(report.boundary, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lambda_scales_inversely_with_the_metric(c in 0.2f64..5.0) {
        for g in [bumpy(40), small_annulus()] {
            let l = spectral::lambda_eig(&g).unwrap().lambda;
            let lc = spectral::lambda_eig(&g.scaled(c).unwrap()).unwrap().lambda;
            prop_assert!((lc - l / c).abs() < 1e-9 * (1.0 + l.abs()), "{} {}", lc, l / c);
        }
    }
}
