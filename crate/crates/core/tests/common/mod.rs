use nalgebra::DMatrix;
use ricci_boundary::complementarity::C64;

/// The 6×6 system written out by hand for `n = 3`, `ζ = (1, 0)`, `z = 1`,
/// in the plain unknowns `(v11, v12, v13, v22, v23, v33)`.
pub fn literal_matrix(tau: C64, z: C64, duplicate: bool) -> DMatrix<C64> {
    let i = C64::i();
    let (z1, z2) = (C64::from(1.0), C64::from(0.0));
    let o = C64::from(0.0);
    let half = C64::from(0.5);
    // A_α = -i(ζ_γ v_γα + τ v_3α - ½ ζ_α (v11 + v22 + v33))
    let a1 = [
        -i * (z1 - half * z1),
        -i * z2,
        -i * tau,
        -i * (-half * z1),
        o,
        -i * (-half * z1),
    ];
    let a2 = [-i * (-half * z2), -i * z1, o, -i * (z2 - half * z2), -i * tau, -i * (-half * z2)];
    // A_3 = -i(ζ_γ v_γ3 + ½ τ (v33 - v11 - v22))
    let a3 = [-i * (-half * tau), o, -i * z1, -i * (-half * tau), -i * z2, -i * (half * tau)];
    // B_11 = z (v11 - ½ (v11 + v22)), B_12 = z v12
    let b11 = [z * half, o, o, -z * half, o, o];
    let b12 = [o, z, o, o, o, o];
    // C = i z (ζ_α v_α3 - ½ τ (v11 + v22))
    let c = if duplicate {
        b11
    } else {
        [-i * z * half * tau, o, i * z * z1, -i * z * half * tau, i * z * z2, o]
    };
    let rows = [a1, a2, a3, b11, b12, c];
    DMatrix::from_fn(6, 6, |r, col| rows[r][col])
}
