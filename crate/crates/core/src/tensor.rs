//! Pointwise tensor calculus on 2-jets of metrics.
//!
//! A [`MetricJet`] holds the value, first and second coordinate derivatives of
//! a symmetric 2-tensor at a single point. Everything built from Christoffel
//! symbols (curvature, covariant Hessians, the deTurck field and the heat-form
//! remainder) is evaluated from jets with dense index loops, independently of
//! the closed-form backend formulas.
//!
//! Index layout: `Γ[k][i][j] = Γ^k_ij`, `riemann[i][j][k][l] = R_{ijk}^l`
//! with `R_{ijk}^l = ∂_i Γ^l_jk - ∂_j Γ^l_ik + Γ^p_jk Γ^l_ip - Γ^p_ik Γ^l_jp`
//! and `Ric_jk = R_{ijk}^i`.

use nalgebra::DMatrix;

/// Value, gradient and Hessian of a symmetric tensor at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricJet {
    pub n: usize,
    /// `g[i*n + j]`
    pub g: Vec<f64>,
    /// `dg[(c*n + i)*n + j] = ∂_c g_ij`
    pub dg: Vec<f64>,
    /// `ddg[((c*n + d)*n + i)*n + j] = ∂_c ∂_d g_ij`
    pub ddg: Vec<f64>,
}

/// Rank-3 array `a[k][i][j]` stored flat.
pub type Tensor3 = Vec<f64>;
/// Rank-4 array stored flat.
pub type Tensor4 = Vec<f64>;

#[inline]
fn i2(n: usize, a: usize, b: usize) -> usize {
    a * n + b
}

#[inline]
fn i3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

#[inline]
fn i4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

impl MetricJet {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            g: vec![0.0; n * n],
            dg: vec![0.0; n * n * n],
            ddg: vec![0.0; n * n * n * n],
        }
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.g[i2(self.n, i, j)]
    }

    pub fn d(&self, c: usize, i: usize, j: usize) -> f64 {
        self.dg[i3(self.n, c, i, j)]
    }

    pub fn dd(&self, c: usize, d: usize, i: usize, j: usize) -> f64 {
        self.ddg[i4(self.n, c, d, i, j)]
    }

    /// Jet of the warped product `A dr² + B ĝ` at a point of `I × S^k`, in
    /// coordinates `(r, x)` with `x` Riemann normal coordinates on the unit
    /// sphere centred at the point. Arguments are `(value, ∂_r, ∂_r²)`.
    pub fn warped(k: usize, a: [f64; 3], b: [f64; 3]) -> Self {
        let n = k + 1;
        let mut jet = Self::zeros(n);
        jet.g[0] = a[0];
        jet.dg[i3(n, 0, 0, 0)] = a[1];
        jet.ddg[i4(n, 0, 0, 0, 0)] = a[2];
        for p in 1..n {
            jet.g[i2(n, p, p)] = b[0];
            jet.dg[i3(n, 0, p, p)] = b[1];
            jet.ddg[i4(n, 0, 0, p, p)] = b[2];
        }
        // ∂_c ∂_d ĝ_ab = -(2 δ_ab δ_cd - δ_ac δ_bd - δ_ad δ_bc) / 3 at the centre
        let delta = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
        for c in 1..n {
            for d in 1..n {
                for p in 1..n {
                    for q in 1..n {
                        let v = -(2.0 * delta(p, q) * delta(c, d)
                            - delta(p, c) * delta(q, d)
                            - delta(p, d) * delta(q, c))
                            / 3.0;
                        jet.ddg[i4(n, c, d, p, q)] = b[0] * v;
                    }
                }
            }
        }
        jet
    }

    /// Jet of `e^{2u}(dr² + r² dθ²)` in polar coordinates. `du = (u_r, u_θ)`
    /// and `ddu = (u_rr, u_rθ, u_θθ)`.
    pub fn conformal(r: f64, u: f64, du: [f64; 2], ddu: [f64; 3]) -> Self {
        let n = 2;
        let e = (2.0 * u).exp();
        let (ur, ut) = (du[0], du[1]);
        let (urr, urt, utt) = (ddu[0], ddu[1], ddu[2]);
        // derivatives of E = e^{2u}
        let er = 2.0 * ur * e;
        let et = 2.0 * ut * e;
        let err = (2.0 * urr + 4.0 * ur * ur) * e;
        let ert = (2.0 * urt + 4.0 * ur * ut) * e;
        let ett = (2.0 * utt + 4.0 * ut * ut) * e;
        let mut jet = Self::zeros(n);
        jet.g[i2(n, 0, 0)] = e;
        jet.g[i2(n, 1, 1)] = e * r * r;
        jet.dg[i3(n, 0, 0, 0)] = er;
        jet.dg[i3(n, 1, 0, 0)] = et;
        jet.dg[i3(n, 0, 1, 1)] = er * r * r + 2.0 * r * e;
        jet.dg[i3(n, 1, 1, 1)] = et * r * r;
        let set = |jet: &mut Self, c: usize, d: usize, i: usize, v: f64| {
            jet.ddg[i4(n, c, d, i, i)] = v;
            jet.ddg[i4(n, d, c, i, i)] = v;
        };
        set(&mut jet, 0, 0, 0, err);
        set(&mut jet, 0, 1, 0, ert);
        set(&mut jet, 1, 1, 0, ett);
        set(&mut jet, 0, 0, 1, err * r * r + 4.0 * r * er + 2.0 * e);
        set(&mut jet, 0, 1, 1, ert * r * r + 2.0 * r * et);
        set(&mut jet, 1, 1, 1, ett * r * r);
        jet
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            g: self.g.iter().map(|x| c * x).collect(),
            dg: self.dg.iter().map(|x| c * x).collect(),
            ddg: self.ddg.iter().map(|x| c * x).collect(),
        }
    }

    pub fn inverse(&self) -> Vec<f64> {
        let m = DMatrix::from_row_slice(self.n, self.n, &self.g);
        let inv = m.try_inverse().expect("metric jet is singular");
        (0..self.n * self.n).map(|k| inv[(k / self.n, k % self.n)]).collect()
    }

    /// `∂_c g^{ij}`, stored `[c][i][j]`.
    pub fn d_inverse(&self) -> Tensor3 {
        let n = self.n;
        let gi = self.inverse();
        let mut out = vec![0.0; n * n * n];
        for c in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            s -= gi[i2(n, i, a)] * self.d(c, a, b) * gi[i2(n, b, j)];
                        }
                    }
                    out[i3(n, c, i, j)] = s;
                }
            }
        }
        out
    }

    /// `Γ^k_ij`, stored `[k][i][j]`.
    pub fn christoffel(&self) -> Tensor3 {
        let n = self.n;
        let gi = self.inverse();
        let mut out = vec![0.0; n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += gi[i2(n, k, l)] * (self.d(i, j, l) + self.d(j, i, l) - self.d(l, i, j));
                    }
                    out[i3(n, k, i, j)] = 0.5 * s;
                }
            }
        }
        out
    }

    /// `∂_m Γ^k_ij`, stored `[m][k][i][j]`.
    pub fn d_christoffel(&self) -> Tensor4 {
        let n = self.n;
        let gi = self.inverse();
        let dgi = self.d_inverse();
        let mut out = vec![0.0; n * n * n * n];
        for m in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            let first = self.d(i, j, l) + self.d(j, i, l) - self.d(l, i, j);
                            let second = self.dd(m, i, j, l) + self.dd(m, j, i, l) - self.dd(m, l, i, j);
                            s += dgi[i3(n, m, k, l)] * first + gi[i2(n, k, l)] * second;
                        }
                        out[i4(n, m, k, i, j)] = 0.5 * s;
                    }
                }
            }
        }
        out
    }

    /// `R_{ijk}^l`, stored `[i][j][k][l]`.
    pub fn riemann(&self) -> Tensor4 {
        let n = self.n;
        let gam = self.christoffel();
        let dgam = self.d_christoffel();
        let mut out = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = dgam[i4(n, i, l, j, k)] - dgam[i4(n, j, l, i, k)];
                        for p in 0..n {
                            s += gam[i3(n, p, j, k)] * gam[i3(n, l, i, p)]
                                - gam[i3(n, p, i, k)] * gam[i3(n, l, j, p)];
                        }
                        out[i4(n, i, j, k, l)] = s;
                    }
                }
            }
        }
        out
    }

    /// `Ric_jk = R_{ijk}^i`.
    pub fn ricci(&self) -> Vec<f64> {
        let n = self.n;
        let riem = self.riemann();
        let mut out = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                out[i2(n, j, k)] = (0..n).map(|i| riem[i4(n, i, j, k, i)]).sum();
            }
        }
        out
    }
}

/// `T(g1, g2) = Γ(g1) - Γ(g2)` together with its coordinate derivative.
fn christoffel_difference(g1: &MetricJet, g2: &MetricJet) -> (Tensor3, Tensor4) {
    let t: Vec<f64> = g1
        .christoffel()
        .iter()
        .zip(g2.christoffel())
        .map(|(a, b)| a - b)
        .collect();
    let dt: Vec<f64> = g1
        .d_christoffel()
        .iter()
        .zip(g2.d_christoffel())
        .map(|(a, b)| a - b)
        .collect();
    (t, dt)
}

/// `ξ_i = w_ij w^{kl} T(g̃, w)^j_kl`.
pub fn deturck(w: &MetricJet, gauge: &MetricJet) -> Vec<f64> {
    let n = w.n;
    let wi = w.inverse();
    let (t, _) = christoffel_difference(gauge, w);
    let mut contracted = vec![0.0; n];
    for (j, c) in contracted.iter_mut().enumerate() {
        for k in 0..n {
            for l in 0..n {
                *c += wi[i2(n, k, l)] * t[i3(n, j, k, l)];
            }
        }
    }
    (0..n)
        .map(|i| (0..n).map(|j| w.value(i, j) * contracted[j]).sum())
        .collect()
}

/// `∂_m ξ_i`, stored `[m][i]`.
pub fn d_deturck(w: &MetricJet, gauge: &MetricJet) -> Vec<f64> {
    let n = w.n;
    let wi = w.inverse();
    let dwi = w.d_inverse();
    let (t, dt) = christoffel_difference(gauge, w);
    let mut v = vec![0.0; n];
    let mut dv = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            for l in 0..n {
                v[j] += wi[i2(n, k, l)] * t[i3(n, j, k, l)];
                for m in 0..n {
                    dv[i2(n, m, j)] += dwi[i3(n, m, k, l)] * t[i3(n, j, k, l)]
                        + wi[i2(n, k, l)] * dt[i4(n, m, j, k, l)];
                }
            }
        }
    }
    let mut out = vec![0.0; n * n];
    for m in 0..n {
        for i in 0..n {
            out[i2(n, m, i)] = (0..n)
                .map(|j| w.d(m, i, j) * v[j] + w.value(i, j) * dv[i2(n, m, j)])
                .sum();
        }
    }
    out
}

/// `-2 Ric_w - 2 δ*_w ξ(w)` evaluated entirely from jets.
pub fn ricci_deturck_operator(w: &MetricJet, gauge: &MetricJet) -> Vec<f64> {
    let n = w.n;
    let ric = w.ricci();
    let xi = deturck(w, gauge);
    let dxi = d_deturck(w, gauge);
    let gam = w.christoffel();
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            let mut sym = 0.5 * (dxi[i2(n, j, k)] + dxi[i2(n, k, j)]);
            for p in 0..n {
                sym -= gam[i3(n, p, j, k)] * xi[p];
            }
            out[i2(n, j, k)] = -2.0 * ric[i2(n, j, k)] - 2.0 * sym;
        }
    }
    out
}

/// `tr_w ∇̄² w = w^{im} ∇̄_i ∇̄_m w_jk` with `∇̄` the connection of `background`.
pub fn trace_hessian(w: &MetricJet, background: &MetricJet) -> Vec<f64> {
    let n = w.n;
    let wi = w.inverse();
    let gb = background.christoffel();
    let dgb = background.d_christoffel();
    // first covariant derivative ∇̄_m w_jk and its coordinate derivative
    let nabla = |m: usize, j: usize, k: usize| {
        let mut s = w.d(m, j, k);
        for p in 0..n {
            s -= gb[i3(n, p, m, j)] * w.value(p, k) + gb[i3(n, p, m, k)] * w.value(j, p);
        }
        s
    };
    let d_nabla = |i: usize, m: usize, j: usize, k: usize| {
        let mut s = w.dd(i, m, j, k);
        for p in 0..n {
            s -= dgb[i4(n, i, p, m, j)] * w.value(p, k)
                + gb[i3(n, p, m, j)] * w.d(i, p, k)
                + dgb[i4(n, i, p, m, k)] * w.value(j, p)
                + gb[i3(n, p, m, k)] * w.d(i, j, p);
        }
        s
    };
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for m in 0..n {
                    let mut hess = d_nabla(i, m, j, k);
                    for p in 0..n {
                        hess -= gb[i3(n, p, i, m)] * nabla(p, j, k)
                            + gb[i3(n, p, i, j)] * nabla(m, p, k)
                            + gb[i3(n, p, i, k)] * nabla(m, j, p);
                    }
                    s += wi[i2(n, i, m)] * hess;
                }
            }
            out[i2(n, j, k)] = s;
        }
    }
    out
}

/// The heat-form remainder `R(w, ∇̄w, g̃, ∇̄g̃, ∇̄²g̃)` with `T = T(w, ḡ)` and
/// `T̃ = T(g̃, ḡ)`, so that `-2Ric_w - 2δ*_w ξ(w) = tr_w ∇̄²w + R`.
///
/// The purely quadratic terms enter as `-2 T^p_im T^i_lk`; with the opposite
/// sign the identity fails for any metric that is not conformally flat.
pub fn remainder(w: &MetricJet, gauge: &MetricJet, background: &MetricJet) -> Vec<f64> {
    remainder_with_quadratic_sign(w, gauge, background, -1.0)
}

pub(crate) fn remainder_with_quadratic_sign(
    w: &MetricJet,
    gauge: &MetricJet,
    background: &MetricJet,
    sign: f64,
) -> Vec<f64> {
    let n = w.n;
    let wi = w.inverse();
    let (t, _) = christoffel_difference(w, background);
    let (tt, dtt) = christoffel_difference(gauge, background);
    let gb = background.christoffel();
    let rb = background.riemann();
    let wv = |i: usize, j: usize| w.value(i, j);
    let winv = |i: usize, j: usize| wi[i2(n, i, j)];
    let tv = |k: usize, i: usize, j: usize| t[i3(n, k, i, j)];
    let ttv = |k: usize, i: usize, j: usize| tt[i3(n, k, i, j)];
    // R̄^p_klm = R̄_{klm}^p
    let rbar = |p: usize, k: usize, l: usize, m: usize| rb[i4(n, k, l, m, p)];
    // ∇̄_j T̃^i_lm
    let nabla_tt = |j: usize, i: usize, l: usize, m: usize| {
        let mut s = dtt[i4(n, j, i, l, m)];
        for p in 0..n {
            s += gb[i3(n, i, j, p)] * ttv(p, l, m)
                - gb[i3(n, p, j, l)] * ttv(i, p, m)
                - gb[i3(n, p, j, m)] * ttv(i, l, p);
        }
        s
    };
    let bracket = |p: usize, k: usize, l: usize, m: usize| {
        let mut s = -rbar(p, k, l, m);
        for i in 0..n {
            s += sign * 2.0 * tv(p, i, m) * tv(i, l, k) + 2.0 * ttv(p, i, m) * tv(i, l, k)
                - ttv(i, l, m) * tv(p, i, k);
        }
        s
    };
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for l in 0..n {
                for m in 0..n {
                    let wlm = winv(l, m);
                    if wlm == 0.0 {
                        continue;
                    }
                    for p in 0..n {
                        s += wlm * wv(p, j) * bracket(p, k, l, m);
                        s += wlm * wv(p, k) * bracket(p, j, l, m);
                    }
                    for i in 0..n {
                        s -= wlm * (wv(i, k) * nabla_tt(j, i, l, m) + wv(i, j) * nabla_tt(k, i, l, m));
                    }
                }
            }
            for i in 0..n {
                for m in 0..n {
                    let wim = winv(i, m);
                    if wim == 0.0 {
                        continue;
                    }
                    for p in 0..n {
                        for l in 0..n {
                            s -= 2.0 * wim * wv(p, l) * tv(p, i, k) * tv(l, j, m);
                        }
                    }
                }
            }
            out[i2(n, j, k)] = s;
        }
    }
    out
}
