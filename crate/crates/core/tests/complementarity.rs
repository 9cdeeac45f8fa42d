mod common;

use common::literal_matrix;
use nalgebra::{DMatrix, DVector, Matrix3};
use ricci_boundary::complementarity::{
    complementarity_report, default_samples, parabolicity_check, RowVariant, Sample, SymbolSystem, C64,
    DEFAULT_THRESHOLD,
};

fn rotation_about_normal(n: usize, angle: f64) -> DMatrix<f64> {
    let mut r = DMatrix::identity(n, n);
    r[(0, 0)] = angle.cos();
    r[(0, 1)] = -angle.sin();
    r[(1, 0)] = angle.sin();
    r[(1, 1)] = angle.cos();
    r
}

fn generic_metric() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.3, 0.2, 0.1, 0.2, 0.9, -0.15, 0.1, -0.15, 1.1])
}

#[test]
fn passes_for_dimensions_three_to_five() {
    for n in 3..=5 {
        let s = SymbolSystem::euclidean(n).unwrap();
        let report = complementarity_report(&s, &default_samples(n, 200, s.delta()), DEFAULT_THRESHOLD).unwrap();
        assert!(report.passed, "n = {n}: {}", report.min_sv);
    }
}

#[test]
fn passes_for_a_non_euclidean_frame() {
    let s = SymbolSystem::new(generic_metric()).unwrap();
    let report = complementarity_report(&s, &default_samples(3, 200, s.delta()), DEFAULT_THRESHOLD).unwrap();
    assert!(report.passed, "{}", report.min_sv);
}

#[test]
fn verdict_is_scale_invariant() {
    let s = SymbolSystem::euclidean(3).unwrap();
    let base = default_samples(3, 60, s.delta());
    let dup = s.clone().with_variant(RowVariant::DuplicatedRow);
    for system in [&s, &dup] {
        let verdicts: Vec<Vec<bool>> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&sc| {
                let scaled: Vec<Sample> = base
                    .iter()
                    .map(|p| Sample {
                        zeta: p.zeta.iter().map(|x| sc * x).collect(),
                        z_re: sc * sc * p.z_re,
                        z_im: sc * sc * p.z_im,
                    })
                    .collect();
                complementarity_report(system, &scaled, DEFAULT_THRESHOLD)
                    .unwrap()
                    .samples
                    .iter()
                    .map(|r| r.min_sv > DEFAULT_THRESHOLD)
                    .collect()
            })
            .collect();
        assert_eq!(verdicts[0], verdicts[1]);
        assert_eq!(verdicts[1], verdicts[2]);
    }
}

#[test]
fn singular_values_are_frame_invariant() {
    let h = generic_metric();
    let s = SymbolSystem::new(h.clone()).unwrap();
    let rot = rotation_about_normal(3, 0.7);
    let rotated = SymbolSystem::new(&rot * &h * rot.transpose()).unwrap();
    for sample in default_samples(3, 40, s.delta()) {
        // covectors transform with the inverse transpose, which is `rot` itself
        let z3 = DVector::from_vec(vec![sample.zeta[0], sample.zeta[1], 0.0]);
        let rz = &rot * z3;
        let (_, a) = s.stacked_matrix(&sample.zeta, sample.z()).unwrap();
        let (_, b) = rotated.stacked_matrix(&[rz[0], rz[1]], sample.z()).unwrap();
        let mut sa: Vec<f64> = a.singular_values().iter().cloned().collect();
        let mut sb: Vec<f64> = b.singular_values().iter().cloned().collect();
        sa.sort_by(f64::total_cmp);
        sb.sort_by(f64::total_cmp);
        for (x, y) in sa.iter().zip(&sb) {
            assert!((x - y).abs() < 1e-10, "{sa:?} {sb:?}");
        }
    }
}

#[test]
fn literal_determinant_agrees_with_checker() {
    let z = C64::from(1.0);
    let tau = C64::i() * (z + 1.0).sqrt();
    for (variant, duplicate) in [(RowVariant::Standard, false), (RowVariant::DuplicatedRow, true)] {
        let det = literal_matrix(tau, z, duplicate).determinant();
        let s = SymbolSystem::euclidean(3).unwrap().with_variant(variant);
        let (t, sv) = s.min_singular_value(&[1.0, 0.0], z).unwrap();
        assert!((t - tau).norm() < 1e-14);
        assert_eq!(det.norm() > 1e-10, sv > DEFAULT_THRESHOLD, "det {det}, sv {sv}");
    }
}

#[test]
fn root_matches_companion_matrix() {
    let s = SymbolSystem::new(generic_metric()).unwrap();
    let hi = generic_metric().try_inverse().unwrap();
    let zeta = [0.6, -0.8];
    let z = C64::new(0.3, 1.7);
    let tau = s.positive_root(&zeta, z).unwrap();
    let a = hi[(2, 2)];
    let b = 2.0 * (hi[(0, 2)] * zeta[0] + hi[(1, 2)] * zeta[1]);
    let c = z + hi[(0, 0)] * zeta[0] * zeta[0] + 2.0 * hi[(0, 1)] * zeta[0] * zeta[1] + hi[(1, 1)] * zeta[1] * zeta[1];
    // companion matrix of τ² + (b/a) τ + c/a
    let comp = DMatrix::from_row_slice(2, 2, &[C64::from(-b / a), -c / a, C64::from(1.0), C64::from(0.0)]);
    let roots = comp.eigenvalues().unwrap();
    let upper = roots.iter().find(|r| r.im > 0.0).unwrap();
    assert!((upper - tau).norm() < 1e-12);
}

#[test]
fn delta_matches_characteristic_polynomial() {
    // sphere-band coefficients at r = π/8 in coordinates (ϑ, ϕ, r) at ϑ = 1
    let psi = (std::f64::consts::PI / 8.0).sin();
    let mut h = Matrix3::from_diagonal(&nalgebra::Vector3::new(psi * psi, psi * psi * 1f64.sin().powi(2), 1.0));
    // a shear so the oracle is not reading off a diagonal
    h[(0, 2)] = 0.05;
    h[(2, 0)] = 0.05;
    let inv = h.try_inverse().unwrap();
    // eigenvalues of a symmetric 3×3 from the trigonometric solution of the cubic
    let p1 = inv[(0, 1)].powi(2) + inv[(0, 2)].powi(2) + inv[(1, 2)].powi(2);
    let q = inv.trace() / 3.0;
    let p2 = (inv[(0, 0)] - q).powi(2) + (inv[(1, 1)] - q).powi(2) + (inv[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let bmat = (inv - Matrix3::identity() * q) / p;
    let r = (bmat.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let smallest = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let dyn_h = DMatrix::from_iterator(3, 3, h.iter().cloned());
    assert!((parabolicity_check(&dyn_h).unwrap() - smallest).abs() < 1e-12);
}
