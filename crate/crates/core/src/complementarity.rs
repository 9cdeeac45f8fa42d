//! Parabolicity and Lopatinskii–Shapiro complementarity for the linearized
//! boundary system of the Ricci-deTurck flow.
//!
//! Principal symbols replace `∂_k` by `i ξ_k` with `ξ = ζ + τν` and `∂_t` by
//! `z`. For the diagonal interior operator `z + h^{kl} ξ_k ξ_l` reduction
//! modulo `M⁺ = τ - τ⁺` is evaluation at the root `τ⁺` with positive
//! imaginary part. Unknowns are the entries `v_ij` (`i ≤ j`) with
//! off-diagonal entries scaled by `√2`, so the coordinate norm is the
//! Frobenius norm of `v`.

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Minimum singular value below which the boundary rows count as dependent.
pub const DEFAULT_THRESHOLD: f64 = 1e-6;
/// `Im τ` below this is treated as a real root.
pub const ROOT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RowVariant {
    #[default]
    Standard,
    /// The `C` row replaced by a copy of the first `B` row.
    DuplicatedRow,
}

/// Frozen coefficients of the boundary system at one boundary point. The
/// last coordinate is normal to the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSystem {
    n: usize,
    h: DMatrix<f64>,
    h_inv: DMatrix<f64>,
    tangential_inv: DMatrix<f64>,
    pub variant: RowVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub zeta: Vec<f64>,
    pub z_re: f64,
    pub z_im: f64,
}

impl Sample {
    pub fn z(&self) -> C64 {
        C64::new(self.z_re, self.z_im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub zeta: Vec<f64>,
    pub z_re: f64,
    pub z_im: f64,
    pub tau_re: f64,
    pub tau_im: f64,
    pub min_sv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityReport {
    pub n: usize,
    pub variant: RowVariant,
    pub samples: Vec<SampleResult>,
    pub min_sv: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Smallest eigenvalue of `h^{kl}`.
    pub delta: f64,
    /// Number of `B` rows kept after removing the trace redundancy.
    pub b_rows: usize,
}

/// `δ`, the smallest eigenvalue of `h^{kl}` (the inverse of the frozen metric).
pub fn parabolicity_check(h: &DMatrix<f64>) -> Result<f64> {
    if !h.is_square() || h.nrows() == 0 {
        return Err(Error::InvalidDimension(h.nrows(), "coefficient matrix must be square"));
    }
    if (h - h.transpose()).amax() > 1e-12 * (1.0 + h.amax()) {
        return Err(Error::BadConfig("coefficient matrix is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(h.clone()).eigenvalues;
    let min = eig.min();
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite(min));
    }
    Ok(1.0 / eig.max())
}

impl SymbolSystem {
    pub fn new(h: DMatrix<f64>) -> Result<Self> {
        let n = h.nrows();
        if n < 2 {
            return Err(Error::InvalidDimension(n, "the symbol system needs n >= 2"));
        }
        parabolicity_check(&h)?;
        let h_inv = h
            .clone()
            .try_inverse()
            .ok_or(Error::NotPositiveDefinite(0.0))?;
        let tangential_inv = h
            .view((0, 0), (n - 1, n - 1))
            .into_owned()
            .try_inverse()
            .ok_or(Error::NotPositiveDefinite(0.0))?;
        Ok(Self {
            n,
            h,
            h_inv,
            tangential_inv,
            variant: RowVariant::Standard,
        })
    }

    pub fn euclidean(n: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, n))
    }

    pub fn with_variant(mut self, variant: RowVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn unknowns(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn delta(&self) -> f64 {
        parabolicity_check(&self.h).unwrap_or(f64::NAN)
    }

    /// Root of `z + h^{kl}(ζ + τν)_k(ζ + τν)_l` with positive imaginary part.
    pub fn positive_root(&self, zeta: &[f64], z: C64) -> Result<C64> {
        let n = self.n;
        let hi = &self.h_inv;
        let a = hi[(n - 1, n - 1)];
        let b: f64 = 2.0 * (0..n - 1).map(|al| hi[(al, n - 1)] * zeta[al]).sum::<f64>();
        let mut c = z;
        for al in 0..n - 1 {
            for be in 0..n - 1 {
                c += hi[(al, be)] * zeta[al] * zeta[be];
            }
        }
        let disc = (C64::from(b * b) - 4.0 * a * c).sqrt();
        let r1 = (-b + disc) / (2.0 * a);
        let r2 = (-b - disc) / (2.0 * a);
        match (r1.im > ROOT_FLOOR, r2.im > ROOT_FLOOR) {
            (true, false) => Ok(r1),
            (false, true) => Ok(r2),
            _ => Err(Error::DegenerateRoot(r1.im, r2.im)),
        }
    }

    /// Position of `v_ij` in the unknown vector.
    pub fn unknown_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // rows of the upper triangle, i-major
        i * self.n - i * (i + 1) / 2 + j
    }

    /// Converts a coefficient matrix `c` of the functional `Σ c_ij v_ij` to a
    /// row over the scaled unknowns.
    fn to_row(&self, c: &DMatrix<C64>) -> Vec<C64> {
        let n = self.n;
        let mut row = vec![C64::from(0.0); self.unknowns()];
        for i in 0..n {
            for j in i..n {
                row[self.unknown_index(i, j)] = if i == j {
                    c[(i, i)]
                } else {
                    (c[(i, j)] + c[(j, i)]) / 2f64.sqrt()
                };
            }
        }
        row
    }

    /// The principal boundary rows evaluated at `τ`, grouped as
    /// `(A, B, C)` blocks, before normalization.
    pub fn boundary_rows(&self, zeta: &[f64], tau: C64, z: C64) -> [Vec<Vec<C64>>; 3] {
        let n = self.n;
        let i = C64::i();
        let hi = &self.h_inv;
        let ti = &self.tangential_inv;
        let mut xi: Vec<C64> = zeta.iter().map(|&x| C64::from(x)).collect();
        xi.push(tau);
        let zero = || DMatrix::<C64>::zeros(n, n);

        // A_m = -h^{kl}(∂_k v_lm - ½ ∂_m v_kl)
        let mut a_rows = Vec::with_capacity(n);
        for m in 0..n {
            let mut c = zero();
            for k in 0..n {
                for l in 0..n {
                    c[(l, m)] += -i * hi[(k, l)] * xi[k];
                    c[(k, l)] += 0.5 * i * hi[(k, l)] * xi[m];
                }
            }
            a_rows.push(self.to_row(&c));
        }

        // B_αβ = z (v_αβ - (n-1)⁻¹ h_αβ h_T^{γδ} v_γδ)
        let mut b_full = Vec::new();
        for al in 0..n - 1 {
            for be in al..n - 1 {
                let mut c = zero();
                if al == be {
                    c[(al, be)] += z;
                } else {
                    c[(al, be)] += 0.5 * z;
                    c[(be, al)] += 0.5 * z;
                }
                for ga in 0..n - 1 {
                    for de in 0..n - 1 {
                        c[(ga, de)] -= z * self.h[(al, be)] * ti[(ga, de)] / (n as f64 - 1.0);
                    }
                }
                // √2 on off-diagonal rows so the row index is orthonormal too
                let weight = if al == be { 1.0 } else { 2f64.sqrt() };
                b_full.push(self.to_row(&c).into_iter().map(|v| v * weight).collect::<Vec<_>>());
            }
        }
        let b_rows = compress_rows(&b_full, b_full.len() - 1);

        // C = (h^{nn})^{-½} h^{in} h_T^{αβ} (∂_α ∂_t v_βi - ½ ∂_i ∂_t v_αβ)
        let mut c = zero();
        let scale = 1.0 / hi[(n - 1, n - 1)].sqrt();
        for idx in 0..n {
            let w = scale * hi[(idx, n - 1)];
            for al in 0..n - 1 {
                for be in 0..n - 1 {
                    c[(be, idx)] += w * ti[(al, be)] * i * xi[al] * z;
                    c[(al, be)] -= 0.5 * w * ti[(al, be)] * i * xi[idx] * z;
                }
            }
        }
        let c_rows = match self.variant {
            RowVariant::Standard => vec![self.to_row(&c)],
            RowVariant::DuplicatedRow => vec![b_rows[0].clone()],
        };
        [a_rows, b_rows, c_rows]
    }

    /// The stacked square matrix with each block scaled to unit RMS row norm.
    /// Block scaling keeps the singular values invariant under tangential
    /// rotations and under the parabolic scaling `(sζ, s²z)`.
    pub fn stacked_matrix(&self, zeta: &[f64], z: C64) -> Result<(C64, DMatrix<C64>)> {
        let tau = self.positive_root(zeta, z)?;
        let blocks = self.boundary_rows(zeta, tau, z);
        let size = self.unknowns();
        let mut out = DMatrix::<C64>::zeros(size, size);
        let mut r = 0;
        for block in &blocks {
            let sq: f64 = block.iter().flatten().map(|c| c.norm_sqr()).sum();
            let rms = (sq / block.len() as f64).sqrt();
            let scale = if rms > 0.0 { 1.0 / rms } else { 1.0 };
            for row in block {
                for (col, v) in row.iter().enumerate() {
                    out[(r, col)] = v * scale;
                }
                r += 1;
            }
        }
        debug_assert_eq!(r, size);
        Ok((tau, out))
    }

    /// Minimum singular value of the stacked rows at one sample.
    pub fn min_singular_value(&self, zeta: &[f64], z: C64) -> Result<(C64, f64)> {
        let (tau, m) = self.stacked_matrix(zeta, z)?;
        let sv = m.singular_values();
        Ok((tau, sv.iter().cloned().fold(f64::INFINITY, f64::min)))
    }
}

/// Replaces a row block by `rank` rows `σ_k v_kᴴ` spanning the same row
/// space, taken from its singular value decomposition. The image of the `B`
/// block is trace-free, so one row is redundant; compressing instead of
/// dropping a fixed row keeps the result independent of the tangential frame.
fn compress_rows(rows: &[Vec<C64>], rank: usize) -> Vec<Vec<C64>> {
    let cols = rows[0].len();
    let m = DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    order
        .into_iter()
        .take(rank)
        .map(|k| (0..cols).map(|c| v_t[(k, c)] * svd.singular_values[k]).collect())
        .collect()
}

fn radical_inverse(mut k: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

/// Deterministic sweep over unit tangent directions and admissible `z`:
/// rays `arg z ∈ {0, ±π/4, ±0.99·π/2}` with `|z| ∈ {10⁻², 1, 10²}` and points
/// on the edge `Re z = -δ/2`.
pub fn default_samples(n: usize, count: usize, delta: f64) -> Vec<Sample> {
    let mut zs = Vec::new();
    for &arg in &[0.0, 0.25, -0.25, 0.495, -0.495] {
        for &modulus in &[1e-2, 1.0, 1e2] {
            let a = arg * std::f64::consts::PI;
            zs.push(C64::from_polar(modulus, a));
        }
    }
    for &im in &[0.0, 0.5, -0.5, 2.0, -2.0] {
        zs.push(C64::new(-0.5 * delta, im));
    }
    const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    let d = n - 1;
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    (0..count)
        .map(|k| {
            let zeta: Vec<f64> = match d {
                1 => vec![if k % 2 == 0 { 1.0 } else { -1.0 }],
                2 => {
                    let a = 2.0 * std::f64::consts::PI * ((k as f64 * golden) % 1.0);
                    vec![a.cos(), a.sin()]
                }
                _ => {
                    let raw: Vec<f64> = (0..d)
                        .map(|j| {
                            let u = radical_inverse(k + 1, PRIMES[j % PRIMES.len()]);
                            (std::f64::consts::PI * (u - 0.5)).tan() + 1e-3 * (j as f64 + 1.0)
                        })
                        .collect();
                    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
                    raw.iter().map(|x| x / norm).collect()
                }
            };
            let z = zs[k % zs.len()];
            Sample {
                zeta,
                z_re: z.re,
                z_im: z.im,
            }
        })
        .collect()
}

/// Evaluates every sample and reports the smallest singular value; never
/// fails on rank deficiency.
pub fn complementarity_report(system: &SymbolSystem, samples: &[Sample], threshold: f64) -> Result<ComplementarityReport> {
    let delta = system.delta();
    let mut results = Vec::with_capacity(samples.len());
    for s in samples {
        if s.zeta.len() != system.n() - 1 {
            return Err(Error::InvalidDimension(s.zeta.len(), "tangent vector must have n-1 entries"));
        }
        let norm2: f64 = s.zeta.iter().map(|x| x * x).sum();
        if norm2 == 0.0 || s.z_re < -0.5 * delta * norm2 - 1e-12 {
            return Err(Error::BadConfig(format!(
                "sample zeta = {:?}, z = {}+{}i is outside the admissible region",
                s.zeta, s.z_re, s.z_im
            )));
        }
        let (tau, min_sv) = system.min_singular_value(&s.zeta, s.z())?;
        results.push(SampleResult {
            zeta: s.zeta.clone(),
            z_re: s.z_re,
            z_im: s.z_im,
            tau_re: tau.re,
            tau_im: tau.im,
            min_sv,
        });
    }
    let min_sv = results.iter().map(|r| r.min_sv).fold(f64::INFINITY, f64::min);
    Ok(ComplementarityReport {
        n: system.n(),
        variant: system.variant,
        samples: results,
        min_sv,
        threshold,
        passed: min_sv > threshold,
        delta,
        b_rows: system.n() * (system.n() - 1) / 2 - 1,
    })
}

/// Like [`complementarity_report`] but fails with the worst sample when the
/// rows are dependent somewhere.
pub fn complementarity_check(system: &SymbolSystem, samples: &[Sample], threshold: f64) -> Result<ComplementarityReport> {
    let report = complementarity_report(system, samples, threshold)?;
    if !report.passed {
        let worst = report
            .samples
            .iter()
            .min_by(|a, b| a.min_sv.total_cmp(&b.min_sv))
            .expect("failing report has samples");
        return Err(Error::RankDeficient {
            zeta: worst.zeta.clone(),
            z_re: worst.z_re,
            z_im: worst.z_im,
            min_sv: worst.min_sv,
        });
    }
    Ok(report)
}
