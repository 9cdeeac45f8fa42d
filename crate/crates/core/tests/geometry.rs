use std::f64::consts::PI;

use proptest::prelude::*;
use ricci_boundary::geometry::{
    self, ConformalMetric, CovectorField, MetricField, Side, VariationField, WarpedMetric,
};
use ricci_boundary::grid::{observed_rate, Grid1D};
use ricci_boundary::presets::preset;

fn warped(lo: f64, hi: f64, cells: usize, psi: impl Fn(f64) -> f64 + 'static) -> MetricField {
    let grid = Grid1D::new(lo, hi, cells).unwrap();
    MetricField::Warped(WarpedMetric::from_functions(3, grid, |_| 1.0, psi).unwrap())
}

fn einstein_defect(g: &MetricField, mu: f64) -> f64 {
    let ric = geometry::curvature(g).ricci;
    let diff = ric.axpy(-mu, &g.as_variation()).unwrap();
    geometry::inner_product(g, &diff, &diff).unwrap().into_iter().map(f64::sqrt).fold(0.0, f64::max)
}

#[test]
fn sphere_band_scalar_curvature_is_six() {
    let g = warped(PI / 8.0, PI / 2.0, 200, f64::sin);
    let scal = geometry::curvature(&g).scalar;
    let n = scal.len();
    assert!(scal[1..n - 1].iter().all(|s| (s - 6.0).abs() < 1e-3));
}

#[test]
fn einstein_references_converge_at_second_order() {
    let cases: [(&str, f64); 3] = [("sphere-band-n3", 2.0), ("hyperbolic-band-n3", -2.0), ("flat-annulus-n3", 0.0)];
    for (name, mu) in cases {
        let defect = |nodes| einstein_defect(&preset(name).unwrap().with_nodes(nodes).build().unwrap(), mu);
        let (a, b) = (defect(41), defect(81));
        if mu == 0.0 {
            assert!(a < 1e-10 && b < 1e-10, "{name}: {a} {b}");
        } else {
            assert!(observed_rate(a, b) > 1.8, "{name}: {a} {b}");
        }
    }
    let flat2d = preset("flat-annulus-2d").unwrap().build().unwrap();
    assert_eq!(einstein_defect(&flat2d, 0.0), 0.0);
    assert!(geometry::curvature(&flat2d).scalar.iter().all(|s| *s == 0.0));
}

#[test]
fn equatorial_boundary_is_totally_geodesic() {
    let g = warped(PI / 8.0, PI / 2.0, 200, f64::sin);
    let outer = &geometry::boundary_state(&g)[1];
    assert_eq!(outer.side, Side::Outer);
    assert!(outer.mean_h().abs() < 1e-8);
    assert!(outer.second_fundamental_form.iter().all(|a| a.abs() < 1e-8));
}

#[test]
fn mean_curvature_matches_the_area_element_oracle() {
    // H = d/ds log(area of the level sphere) along the outward unit normal
    let area = |r: f64| r.sin().powi(2);
    let eps = 1e-5;
    let oracle = ((area(PI / 4.0 + eps)).ln() - (area(PI / 4.0 - eps)).ln()) / (2.0 * eps);
    assert!((oracle - 2.0).abs() < 1e-8);
    let g = warped(PI / 8.0, PI / 4.0, 400, f64::sin);
    assert!((geometry::boundary_state(&g)[1].mean_h() - oracle).abs() < 1e-6);
    // flat annulus, inner boundary r = 1 with outward normal -∂_r
    let flat = warped(1.0, 2.0, 100, |r| r);
    let inner = &geometry::boundary_state(&flat)[0];
    assert!((inner.mean_h() + 2.0).abs() < 1e-8);
    assert_eq!(inner.orientation, -1.0);
}

#[test]
fn trace_of_second_fundamental_form_matches_lie_derivative_form() {
    let gap = |cells: usize| {
        let g = warped(0.4, 1.3, cells, |r| r.sin() * (1.0 + 0.1 * r * r));
        let w = g.as_warped().unwrap();
        let states = geometry::boundary_state(&g);
        [false, true]
            .iter()
            .zip(&states)
            .map(|(&at_max, s)| (s.mean_h() - w.mean_curvature_from_lie(at_max)).abs())
            .fold(0.0, f64::max)
    };
    let (a, b) = (gap(40), gap(80));
    assert!(observed_rate(a, b) >= 1.8, "{a} {b}");
}

#[test]
fn integration_by_parts_fixes_the_codifferential_sign() {
    // ∫⟨df, ω⟩ dV = ∫ f δω dV + ∮ f ω(ν) dA with δ = -div
    let defect = |cells: usize| {
        let g = warped(0.5, 1.5, cells, |r| r * (1.0 + 0.2 * r));
        let nodes = g.grid().nodes();
        let f: Vec<f64> = nodes.iter().map(|r| (2.0 * r).cos()).collect();
        let omega = CovectorField::Warped {
            r: nodes.iter().map(|r| r * r - 0.3 * r).collect(),
        };
        let lhs = g.integrate(&geometry::covector_inner(&g, &geometry::gradient(&g, &f), &omega).unwrap());
        let delta = geometry::codifferential_covector(&g, &omega).unwrap();
        let interior = g.integrate(&f.iter().zip(&delta).map(|(a, b)| a * b).collect::<Vec<_>>());
        let boundary: f64 = geometry::boundary_state(&g)
            .iter()
            .map(|s| {
                let nodes = g.boundary_nodes(s.side);
                let on = geometry::normal_component(&g, &omega, s.side);
                nodes.iter().zip(&on).zip(&s.area_weights).map(|((&i, w), a)| f[i] * w * a).sum::<f64>()
            })
            .sum();
        ((lhs - interior - boundary).abs(), (lhs + interior - boundary).abs())
    };
    let ((a, wrong), (b, _)) = (defect(50), defect(100));
    assert!(b < 1e-2 && observed_rate(a, b) > 1.8, "{a} {b}");
    // the opposite sign leaves an O(1) defect
    assert!(wrong > 0.1, "{wrong}");
}

#[test]
fn metric_is_parallel() {
    for g in [
        warped(PI / 8.0, 3.0 * PI / 8.0, 80, f64::sin),
        preset("flat-annulus-2d").unwrap().build().unwrap(),
    ] {
        let h = g.as_variation();
        let tr = geometry::trace(&g, &h).unwrap();
        assert!(tr.iter().all(|t| (t - g.dim() as f64).abs() < 1e-12));
        let div = geometry::divergence(&g, &h).unwrap();
        assert!(div.radial().iter().all(|d| d.abs() < 1e-9), "{:?}", div.radial());
    }
}

#[test]
fn symmetrized_derivative_of_dr_is_the_hessian_of_r() {
    // flat polar annulus: ½ L_{∂_r} g = ∇dr = r dθ²
    let grid = Grid1D::new(1.0, 2.0, 40).unwrap();
    let c = ConformalMetric::from_function(grid, 16, |_, _| 0.0).unwrap();
    let g = MetricField::Conformal(c.clone());
    let omega = CovectorField::Conformal {
        r: vec![1.0; c.len()],
        theta: vec![0.0; c.len()],
    };
    let VariationField::Conformal(h) = geometry::codifferential_star(&g, &omega).unwrap() else {
        panic!("backend changed");
    };
    for idx in 0..c.len() {
        // Lie-derivative oracle: ½ ∂_r g_θθ
        let r = c.radius(idx);
        let eps = 1e-6;
        let lie_tt = 0.5 * ((r + eps).powi(2) - (r - eps).powi(2)) / (2.0 * eps);
        assert!(h.rr[idx].abs() < 1e-12 && h.rt[idx].abs() < 1e-12);
        assert!((h.tt[idx] - lie_tt).abs() < 1e-8, "{} {}", h.tt[idx], lie_tt);
    }
}

#[test]
fn mismatched_backends_are_rejected() {
    let w = warped(1.0, 2.0, 10, |r| r);
    let c = preset("flat-annulus-2d").unwrap().build().unwrap();
    assert!(geometry::trace(&w, &c.as_variation()).is_err());
    assert!(geometry::divergence(&c, &w.as_variation()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mean_curvature_flips_with_orientation(lo in 0.3f64..1.0, len in 0.3f64..1.0, c in 0.05f64..0.5) {
        // reflecting r ↦ r_min + r_max - r swaps the two boundaries
        let hi = lo + len;
        let f = move |r: f64| 1.0 + c * r;
        let g = warped(lo, hi, 120, f);
        let mirrored = warped(lo, hi, 120, move |r| f(lo + hi - r));
        let (s, m) = (geometry::boundary_state(&g), geometry::boundary_state(&mirrored));
        prop_assert!((s[0].mean_h() - m[1].mean_h()).abs() < 1e-8);
        prop_assert!((s[1].mean_h() - m[0].mean_h()).abs() < 1e-8);
        // the inner side sees ψ increasing away from it, so H < 0 there
        prop_assert!(s[0].mean_h() < 0.0 && s[1].mean_h() > 0.0);
    }

    #[test]
    fn scal_is_the_trace_of_ricci(a in 0.05f64..0.3, b in 0.05f64..0.3) {
        let grid = Grid1D::new(0.5, 1.5, 60).unwrap();
        let g = MetricField::Warped(
            WarpedMetric::from_functions(4, grid, move |r| 1.0 + a * r, move |r| r * (1.0 + b * r * r)).unwrap(),
        );
        let pack = geometry::curvature(&g);
        let tr = geometry::trace(&g, &pack.ricci).unwrap();
        for (t, s) in tr.iter().zip(&pack.scalar) {
            prop_assert!((t - s).abs() < 1e-9 * s.abs().max(1.0));
        }
    }
}
