//! First variations and the deTurck machinery.
//!
//! `H'_g(h) = ½ tr_{g^T}(∇_ν h) + δ_{g^T}(h·ν) - ½ h(ν,ν) H`,
//! `D_g(h) = ⟨δ_g h + ∇ tr_g h, ν⟩`, `φ_g(h) = tr_{g^T}(h^T) / (n-1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    self, mismatch, ConformalMetric, ConformalTensor, CovectorField, MetricField, Side,
    VariationField, WarpedMetric, WarpedTensor,
};
use crate::grid::HighOrderStencils;
use crate::tensor::{self, MetricJet};

/// Relative tolerance for the conformal boundary condition `h^T = φ g^T`.
pub const CONFORMAL_TOLERANCE: f64 = 1e-10;

/// A quantity with one value per node of a boundary component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryValues {
    pub side: Side,
    pub values: Vec<f64>,
}

impl BoundaryValues {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McVariation {
    pub side: Side,
    /// `H'_g(h)` per boundary node.
    pub values: Vec<f64>,
    /// The `δ_{g^T}(h·ν)` contribution, reported separately as a diagnostic.
    pub tangential_divergence: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTerm {
    pub side: Side,
    pub pointwise: Vec<f64>,
    pub integral: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EhVariation {
    pub action: f64,
    pub interior: f64,
    pub boundary: f64,
    pub total: f64,
}

/// `ξ` and `ξ♯` of a metric relative to a gauge metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeTurckField {
    pub covector: CovectorField,
    pub vector: CovectorField,
}

impl DeTurckField {
    /// Largest pointwise norm `|ξ|_w`.
    pub fn max_norm(&self, w: &MetricField) -> f64 {
        geometry::covector_inner(w, &self.covector, &self.covector)
            .map(|v| v.iter().fold(0.0f64, |a, x| a.max(x.abs().sqrt())))
            .unwrap_or(f64::NAN)
    }
}

/// `φ_g(h)` at every node of one boundary component.
pub fn phi_g(g: &MetricField, h: &VariationField, side: Side) -> Result<Vec<f64>> {
    match (g, h) {
        (MetricField::Warped(w), VariationField::Warped(h)) => {
            let i = g.boundary_nodes(side)[0];
            Ok(vec![h.sphere[i] / (w.psi()[i] * w.psi()[i])])
        }
        (MetricField::Conformal(c), VariationField::Conformal(h)) => Ok(g
            .boundary_nodes(side)
            .into_iter()
            .map(|idx| h.tt[idx] / c.components_at(idx).1)
            .collect()),
        _ => Err(mismatch()),
    }
}

/// `max |h^T - φ_g(h) g^T|` over boundary nodes, relative to `|h^T|`.
pub fn conformal_residual(g: &MetricField, h: &VariationField) -> Result<f64> {
    let mut worst = 0.0f64;
    for side in Side::BOTH {
        let phi = phi_g(g, h, side)?;
        for (n, idx) in g.boundary_nodes(side).into_iter().enumerate() {
            let (ht, gt) = match (g, h) {
                (MetricField::Warped(w), VariationField::Warped(h)) => {
                    (h.sphere[idx], w.psi()[idx] * w.psi()[idx])
                }
                (MetricField::Conformal(c), VariationField::Conformal(h)) => {
                    (h.tt[idx], c.components_at(idx).1)
                }
                _ => return Err(mismatch()),
            };
            // every tangential block in these ansätze is a multiple of g^T,
            // so only the diagonal entry can deviate
            worst = worst.max((ht - phi[n] * gt).abs() / (1.0 + ht.abs()));
        }
    }
    Ok(worst)
}

fn require_conformal(g: &MetricField, h: &VariationField) -> Result<()> {
    let residual = conformal_residual(g, h)?;
    if residual > CONFORMAL_TOLERANCE {
        return Err(Error::ConformalViolation {
            residual,
            tolerance: CONFORMAL_TOLERANCE,
        });
    }
    Ok(())
}

/// First variation of the mean curvature on both boundary components.
pub fn mc_first_variation(g: &MetricField, h: &VariationField) -> Result<Vec<McVariation>> {
    require_conformal(g, h)?;
    match (g, h) {
        (MetricField::Warped(w), VariationField::Warped(h)) => Ok(warped_mc_variation(w, h)),
        (MetricField::Conformal(c), VariationField::Conformal(h)) => Ok(conformal_mc_variation(c, h)),
        _ => Err(mismatch()),
    }
}

fn warped_mc_variation(w: &WarpedMetric, h: &WarpedTensor) -> Vec<McVariation> {
    let k = w.k() as f64;
    let grid = w.grid();
    Side::BOTH
        .iter()
        .map(|&side| {
            let i = if side.is_outer() { grid.last() } else { 0 };
            let s = side.orientation();
            let (phi, psi) = (w.phi()[i], w.psi()[i]);
            let psi_r = grid.boundary_d1(w.psi(), side.is_outer());
            let b_r = grid.boundary_d1(&h.sphere, side.is_outer());
            let b = h.sphere[i];
            // (∇_r h)_ab = (b' - 2 ψ'/ψ b) ĝ_ab and h(ν, ∂_a) = 0
            let half_trace = 0.5 * s * k / (phi * psi * psi) * (b_r - 2.0 * psi_r * b / psi);
            let tangential_divergence = 0.0;
            let mc = w.mean_curvature(side.is_outer());
            let normal = -0.5 * h.rr[i] / (phi * phi) * mc;
            McVariation {
                side,
                values: vec![half_trace + tangential_divergence + normal],
                tangential_divergence: vec![tangential_divergence],
            }
        })
        .collect()
}

fn conformal_mc_variation(c: &ConformalMetric, h: &ConformalTensor) -> Vec<McVariation> {
    let gam = c.christoffel();
    let tt_r = c.d_r(&h.tt);
    let ut = c.d_t(c.u());
    Side::BOTH
        .iter()
        .map(|&side| {
            let s = side.orientation();
            let nodes = c.boundary_nodes(side.is_outer());
            let mc = c.mean_curvature(side.is_outer());
            let dtheta = c.angular_spacing();
            let m = nodes.len();
            // ω_θ = h(ν, ∂_θ) around the boundary circle
            let nu: Vec<f64> = nodes.iter().map(|&idx| s * (-c.u()[idx]).exp()).collect();
            let omega: Vec<f64> = nodes.iter().zip(&nu).map(|(&idx, n)| n * h.rt[idx]).collect();
            let mut values = Vec::with_capacity(m);
            let mut tdiv = Vec::with_capacity(m);
            for (j, &idx) in nodes.iter().enumerate() {
                let (a, b) = c.components_at(idx);
                let g = &gam[idx];
                let nabla_tt = nu[j] * (tt_r[idx] - 2.0 * g[0][0][1] * h.rt[idx] - 2.0 * g[1][0][1] * h.tt[idx]);
                let half_trace = 0.5 * nabla_tt / b;
                let d_omega = (omega[(j + 1) % m] - omega[(j + m - 1) % m]) / (2.0 * dtheta);
                // intrinsic Christoffel symbol of the boundary circle is ∂_θ u
                let div = -(d_omega - ut[idx] * omega[j]) / b;
                let normal = -0.5 * nu[j] * nu[j] * h.rr[idx] * mc[j];
                let _ = a;
                values.push(half_trace + div + normal);
                tdiv.push(div);
            }
            McVariation {
                side,
                values,
                tangential_divergence: tdiv,
            }
        })
        .collect()
}

/// `D_g(h)` on both boundary components with its boundary integral.
pub fn boundary_term_d(g: &MetricField, h: &VariationField) -> Result<Vec<BoundaryTerm>> {
    let div = geometry::divergence(g, h)?;
    let tr = geometry::trace(g, h)?;
    let dtr = geometry::gradient(g, &tr);
    let states = geometry::boundary_state(g);
    let sum = match (&div, &dtr) {
        (CovectorField::Warped { r: a }, CovectorField::Warped { r: b }) => CovectorField::Warped {
            r: a.iter().zip(b).map(|(x, y)| x + y).collect(),
        },
        (CovectorField::Conformal { r: ar, theta: at }, CovectorField::Conformal { r: br, theta: bt }) => {
            CovectorField::Conformal {
                r: ar.iter().zip(br).map(|(x, y)| x + y).collect(),
                theta: at.iter().zip(bt).map(|(x, y)| x + y).collect(),
            }
        }
        _ => return Err(mismatch()),
    };
    Ok(states
        .iter()
        .map(|state| {
            let pointwise = geometry::normal_component(g, &sum, state.side);
            let integral = pointwise.iter().zip(&state.area_weights).map(|(d, w)| d * w).sum();
            BoundaryTerm {
                side: state.side,
                pointwise,
                integral,
            }
        })
        .collect())
}

/// Pointwise defect `D_g(h) - (2H'_g(h) - δ_{g^T}(h·ν) + φ_g(h) H)` of the
/// boundary identity for variations with `h^T = φ g^T`.
pub fn boundary_identity_residual(g: &MetricField, h: &VariationField) -> Result<Vec<BoundaryValues>> {
    let d = boundary_term_d(g, h)?;
    let hp = mc_first_variation(g, h)?;
    let states = geometry::boundary_state(g);
    let mut out = Vec::with_capacity(2);
    for ((d, hp), state) in d.iter().zip(&hp).zip(&states) {
        let phi = phi_g(g, h, state.side)?;
        let values = (0..d.pointwise.len())
            .map(|j| {
                d.pointwise[j]
                    - (2.0 * hp.values[j] - hp.tangential_divergence[j] + phi[j] * state.mean_curvature[j])
            })
            .collect();
        out.push(BoundaryValues {
            side: state.side,
            values,
        });
    }
    Ok(out)
}

/// Pointwise `H'_g(h) + ½ φ_g(h) H` on both boundary components; zero when
/// `h` obeys the mean-curvature evolution law.
pub fn mc_condition_residual(g: &MetricField, h: &VariationField) -> Result<Vec<BoundaryValues>> {
    let hp = mc_first_variation(g, h)?;
    let states = geometry::boundary_state(g);
    hp.into_iter()
        .zip(&states)
        .map(|(hp, state)| {
            let phi = phi_g(g, h, state.side)?;
            Ok(BoundaryValues {
                side: state.side,
                values: (0..hp.values.len())
                    .map(|j| hp.values[j] + 0.5 * phi[j] * state.mean_curvature[j])
                    .collect(),
            })
        })
        .collect()
}

/// Corrects `h` near the boundary so that `H'_g(h) = -½ φ_g(h) H` holds
/// exactly for the discrete operators. The correction is a smooth bump that
/// vanishes on the boundary and only changes the normal derivative of the
/// tangential part, so `φ_g(h)` is unchanged.
pub fn mc_compatible(g: &MetricField, h: &VariationField) -> Result<VariationField> {
    let grid = *g.grid();
    let width = 0.4 * (grid.r_max() - grid.r_min());
    // β(r_b) = 0, β'(r_b) = 1 and β = 0 on the far half of the interval
    let bump = |side: Side| -> Vec<f64> {
        let rb = if side.is_outer() { grid.r_max() } else { grid.r_min() };
        grid.nodes()
            .iter()
            .map(|&r| {
                let x = r - rb;
                let s = x / width;
                if s.abs() < 1.0 {
                    x * (1.0 - s * s).powi(3)
                } else {
                    0.0
                }
            })
            .collect()
    };
    let residual_at = |h: &VariationField, side: Side| -> Result<Vec<f64>> {
        let all = mc_condition_residual(g, h)?;
        Ok(all.into_iter().find(|b| b.side == side).map(|b| b.values).unwrap_or_default())
    };
    let mut out = h.clone();
    for side in Side::BOTH {
        let beta = bump(side);
        let r0 = residual_at(&out, side)?;
        match (g, &mut out) {
            (MetricField::Warped(w), VariationField::Warped(hw)) => {
                let dir = VariationField::Warped(WarpedTensor {
                    rr: vec![0.0; beta.len()],
                    sphere: beta.iter().zip(&w.b()).map(|(x, b)| x * b).collect(),
                });
                let trial = VariationField::Warped(hw.clone()).axpy(1.0, &dir)?;
                let slope = residual_at(&trial, side)?[0] - r0[0];
                let c = -r0[0] / slope;
                *hw = hw.axpy(c, dir.as_warped()?);
            }
            (MetricField::Conformal(c), VariationField::Conformal(hc)) => {
                let m = c.angular();
                let nodes = c.boundary_nodes(side.is_outer());
                let mut dir = ConformalTensor::zeros(c.len());
                for idx in 0..c.len() {
                    let (a, b) = c.components_at(idx);
                    dir.rr[idx] = 2.0 * beta[idx / m] * a;
                    dir.tt[idx] = 2.0 * beta[idx / m] * b;
                }
                let trial = VariationField::Conformal(hc.axpy(1.0, &dir));
                let r1 = residual_at(&trial, side)?;
                // each angular column only feeds its own boundary node
                let coef: Vec<f64> = (0..m).map(|j| -r0[j] / (r1[j] - r0[j])).collect();
                for idx in 0..c.len() {
                    let j = nodes.iter().position(|&n| n % m == idx % m).unwrap_or(idx % m);
                    hc.rr[idx] += coef[j] * dir.rr[idx];
                    hc.tt[idx] += coef[j] * dir.tt[idx];
                }
            }
            _ => return Err(mismatch()),
        }
    }
    Ok(out)
}

/// Einstein-Hilbert action `∫ scal dV` and its first variation
/// `-∫⟨G, h⟩ dV - ∫ D_g(h) dA`.
pub fn eh_action_and_variation(g: &MetricField, h: &VariationField) -> Result<EhVariation> {
    let curv = geometry::curvature(g);
    let action = g.integrate(&curv.scalar);
    let gh = geometry::inner_product(g, &curv.einstein, h)?;
    let interior = -g.integrate(&gh);
    let boundary = -boundary_term_d(g, h)?.iter().map(|b| b.integral).sum::<f64>();
    Ok(EhVariation {
        action,
        interior,
        boundary,
        total: interior + boundary,
    })
}

/// Bianchi operator `β_g(h) = δ_g h + ½ d tr_g h`.
pub fn bianchi(g: &MetricField, h: &VariationField) -> Result<CovectorField> {
    let div = geometry::divergence(g, h)?;
    let tr = geometry::trace(g, h)?;
    let d = geometry::gradient(g, &tr);
    Ok(match (div, d) {
        (CovectorField::Warped { r: a }, CovectorField::Warped { r: b }) => CovectorField::Warped {
            r: a.iter().zip(&b).map(|(x, y)| x + 0.5 * y).collect(),
        },
        (CovectorField::Conformal { r: ar, theta: at }, CovectorField::Conformal { r: br, theta: bt }) => {
            CovectorField::Conformal {
                r: ar.iter().zip(&br).map(|(x, y)| x + 0.5 * y).collect(),
                theta: at.iter().zip(&bt).map(|(x, y)| x + 0.5 * y).collect(),
            }
        }
        _ => return Err(mismatch()),
    })
}

fn same_grid(w: &MetricField, background: &MetricField) -> Result<()> {
    let ok = match (w, background) {
        (MetricField::Warped(a), MetricField::Warped(b)) => a.grid() == b.grid() && a.dim() == b.dim(),
        (MetricField::Conformal(a), MetricField::Conformal(b)) => {
            a.grid() == b.grid() && a.angular() == b.angular()
        }
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::BackendMismatch(
            "metric and background live on different grids or backends".into(),
        ))
    }
}

/// `ξ_r` of a warped metric `(A, B)` against a gauge `(Ã, B̃)` from the
/// component values and first derivatives at a node.
pub fn warped_xi(k: f64, a: f64, a_r: f64, b: f64, b_r: f64, at: f64, at_r: f64, bt_r: f64) -> f64 {
    0.5 * (at_r / at - a_r / a) + 0.5 * k * (b_r / b - (a / at) * bt_r / b)
}

/// The deTurck field `ξ_i = w_ij w^{kl} T(g̃, w)^j_kl`.
pub fn deturck_field(w: &MetricField, background: &MetricField) -> Result<DeTurckField> {
    same_grid(w, background)?;
    match (w, background) {
        (MetricField::Warped(w), MetricField::Warped(gt)) => {
            let k = w.k() as f64;
            let (a, b) = (w.a(), w.b());
            let (at, bt) = (gt.a(), gt.b());
            let st = HighOrderStencils::new(*w.grid(), STENCIL_WIDTH);
            let (a_r, b_r) = (st.derivative(&a, 1), st.derivative(&b, 1));
            let (at_r, bt_r) = (st.derivative(&at, 1), st.derivative(&bt, 1));
            let xi: Vec<f64> = (0..a.len())
                .map(|i| warped_xi(k, a[i], a_r[i], b[i], b_r[i], at[i], at_r[i], bt_r[i]))
                .collect();
            let sharp = xi.iter().zip(&a).map(|(x, a)| x / a).collect();
            Ok(DeTurckField {
                covector: CovectorField::Warped { r: xi },
                vector: CovectorField::Warped { r: sharp },
            })
        }
        (MetricField::Conformal(_), MetricField::Conformal(_)) => {
            let jw = jets(w);
            let jg = jets(background);
            let mut xr = Vec::with_capacity(jw.len());
            let mut xt = Vec::with_capacity(jw.len());
            let mut vr = Vec::with_capacity(jw.len());
            let mut vt = Vec::with_capacity(jw.len());
            for (a, b) in jw.iter().zip(&jg) {
                let xi = tensor::deturck(a, b);
                vr.push(xi[0] / a.value(0, 0));
                vt.push(xi[1] / a.value(1, 1));
                xr.push(xi[0]);
                xt.push(xi[1]);
            }
            Ok(DeTurckField {
                covector: CovectorField::Conformal { r: xr, theta: xt },
                vector: CovectorField::Conformal { r: vr, theta: vt },
            })
        }
        _ => Err(mismatch()),
    }
}

/// The deTurck field evaluated from metric jets by the generic Christoffel
/// routine; an independent check of the closed form on warped products.
pub fn deturck_field_from_jets(w: &MetricField, background: &MetricField) -> Result<CovectorField> {
    same_grid(w, background)?;
    let jw = jets(w);
    let jg = jets(background);
    let xi: Vec<Vec<f64>> = jw.iter().zip(&jg).map(|(a, b)| tensor::deturck(a, b)).collect();
    Ok(match w {
        MetricField::Warped(_) => CovectorField::Warped {
            r: xi.iter().map(|x| x[0]).collect(),
        },
        MetricField::Conformal(_) => CovectorField::Conformal {
            r: xi.iter().map(|x| x[0]).collect(),
            theta: xi.iter().map(|x| x[1]).collect(),
        },
    })
}

/// Width of the radial stencils behind [`jets`] and [`deturck_field`]. The
/// extra order keeps `δ*ξ` second-order accurate up to the boundary, where a
/// derivative of a one-sided derivative would otherwise lose an order.
pub const STENCIL_WIDTH: usize = 5;

fn radial_columns(c: &ConformalMetric, f: &[f64], st: &HighOrderStencils, order: usize) -> Vec<f64> {
    let m = c.angular();
    let mut out = vec![0.0; f.len()];
    let mut column = vec![0.0; c.grid().num_nodes()];
    for j in 0..m {
        for (i, v) in column.iter_mut().enumerate() {
            *v = f[i * m + j];
        }
        for i in 0..column.len() {
            out[i * m + j] = st.derivative_at(&column, i, order);
        }
    }
    out
}

/// Finite-difference 2-jets of the metric at every node.
pub fn jets(g: &MetricField) -> Vec<MetricJet> {
    let st = HighOrderStencils::new(*g.grid(), STENCIL_WIDTH);
    match g {
        MetricField::Warped(w) => {
            let (a, b) = (w.a(), w.b());
            let (a1, a2) = (st.derivative(&a, 1), st.derivative(&a, 2));
            let (b1, b2) = (st.derivative(&b, 1), st.derivative(&b, 2));
            (0..a.len())
                .map(|i| MetricJet::warped(w.k(), [a[i], a1[i], a2[i]], [b[i], b1[i], b2[i]]))
                .collect()
        }
        MetricField::Conformal(c) => {
            let u = c.u();
            let (ur, ut) = (radial_columns(c, u, &st, 1), c.d_t(u));
            let (urr, utt) = (radial_columns(c, u, &st, 2), c.d_tt(u));
            let urt = radial_columns(c, &ut, &st, 1);
            (0..c.len())
                .map(|idx| {
                    MetricJet::conformal(
                        c.radius(idx),
                        u[idx],
                        [ur[idx], ut[idx]],
                        [urr[idx], urt[idx], utt[idx]],
                    )
                })
                .collect()
        }
    }
}

fn project(g: &MetricField, values: Vec<Vec<f64>>) -> VariationField {
    match g {
        MetricField::Warped(_) => {
            let n = (values[0].len() as f64).sqrt() as usize;
            VariationField::Warped(WarpedTensor {
                rr: values.iter().map(|m| m[0]).collect(),
                // ĝ = identity at the centre of the normal coordinates
                sphere: values.iter().map(|m| m[n + 1]).collect(),
            })
        }
        MetricField::Conformal(_) => VariationField::Conformal(ConformalTensor {
            rr: values.iter().map(|m| m[0]).collect(),
            rt: values.iter().map(|m| m[1]).collect(),
            tt: values.iter().map(|m| m[3]).collect(),
        }),
    }
}

/// The remainder tensor with the gauge metric equal to the background.
pub fn remainder_tensor(w: &MetricField, background: &MetricField) -> Result<VariationField> {
    remainder_tensor_with_gauge(w, background, background)
}

/// The remainder tensor `R(w, ∇̄w, g̃, ∇̄g̃, ∇̄²g̃)` with gauge `g̃` and
/// connection metric `ḡ`.
pub fn remainder_tensor_with_gauge(
    w: &MetricField,
    gauge: &MetricField,
    background: &MetricField,
) -> Result<VariationField> {
    same_grid(w, gauge)?;
    same_grid(w, background)?;
    let (jw, jg, jb) = (jets(w), jets(gauge), jets(background));
    let values = (0..jw.len())
        .map(|i| tensor::remainder(&jw[i], &jg[i], &jb[i]))
        .collect();
    Ok(project(w, values))
}

/// `tr_w ∇̄² w` with `∇̄` the connection of `background`.
pub fn trace_hessian(w: &MetricField, background: &MetricField) -> Result<VariationField> {
    same_grid(w, background)?;
    let (jw, jb) = (jets(w), jets(background));
    let values = (0..jw.len())
        .map(|i| tensor::trace_hessian(&jw[i], &jb[i]))
        .collect();
    Ok(project(w, values))
}

/// `-2Ric_w - 2δ*_w ξ(w)` from `curvature()`, `deturck_field()` and
/// `codifferential_star()`.
pub fn ricci_deturck_rhs(w: &MetricField, gauge: &MetricField) -> Result<VariationField> {
    let ric = geometry::curvature(w).ricci;
    let xi = deturck_field(w, gauge)?;
    let lie = geometry::codifferential_star(w, &xi.covector)?;
    ric.scaled(-2.0).axpy(-2.0, &lie)
}

/// Pointwise residual of the heat-form rewrite
/// `-2Ric_w - 2δ*_w ξ(w) - (tr_w ∇̄²w + R)`, measured in the norm of `w`.
pub fn heat_form_residual(w: &MetricField, gauge: &MetricField, background: &MetricField) -> Result<Vec<f64>> {
    let lhs = ricci_deturck_rhs(w, gauge)?;
    let rhs = trace_hessian(w, background)?.axpy(1.0, &remainder_tensor_with_gauge(w, gauge, background)?)?;
    let diff = lhs.axpy(-1.0, &rhs)?;
    Ok(geometry::inner_product(w, &diff, &diff)?.into_iter().map(f64::sqrt).collect())
}

/// A smooth random tensor in the backend ansatz, sized relative to `g`.
pub fn random_variation(g: &MetricField, seed: u64) -> VariationField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = *g.grid();
    let len = grid.num_nodes();
    let profile = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
        (0..len)
            .map(|i| {
                let s = std::f64::consts::PI * (grid.node(i) - grid.r_min()) / (grid.r_max() - grid.r_min());
                c[0] + c[1] * s.cos() + c[2] * (2.0 * s).cos() + c[3] * (1.5 * s).sin()
            })
            .collect()
    };
    match g {
        MetricField::Warped(w) => {
            let (a, b) = (w.a(), w.b());
            let (pa, pb) = (profile(&mut rng), profile(&mut rng));
            VariationField::Warped(WarpedTensor {
                rr: (0..len).map(|i| pa[i] * a[i]).collect(),
                sphere: (0..len).map(|i| pb[i] * b[i]).collect(),
            })
        }
        MetricField::Conformal(c) => {
            let radial: Vec<Vec<f64>> = (0..6).map(|_| profile(&mut rng)).collect();
            let m = c.angular();
            let mut h = ConformalTensor::zeros(c.len());
            for idx in 0..c.len() {
                let (i, th) = (idx / m, c.theta(idx));
                let (ga, gb) = c.components_at(idx);
                h.rr[idx] = ga * (radial[0][i] + radial[1][i] * th.cos());
                h.rt[idx] = (ga * gb).sqrt() * (radial[2][i] * th.sin() + 0.2 * radial[3][i]);
                h.tt[idx] = gb * (radial[4][i] + radial[5][i] * th.sin());
            }
            VariationField::Conformal(h)
        }
    }
}

/// A smooth random conformal tensor `2v g` on the conformal backend.
pub fn random_conformal_variation(c: &ConformalMetric, seed: u64) -> (Vec<f64>, ConformalTensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let grid = c.grid();
    let v: Vec<f64> = (0..c.len())
        .map(|idx| {
            let s = (c.radius(idx) - grid.r_min()) / (grid.r_max() - grid.r_min());
            let th = c.theta(idx);
            coef[0] + coef[1] * s + coef[2] * s * s + coef[3] * th.cos() * (1.0 + s) + coef[4] * (2.0 * th).sin()
        })
        .collect();
    let h = c.conformal_variation(&v);
    (v, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{observed_rate, Grid1D};
    use std::f64::consts::PI;

    fn sphere_band(cells: usize) -> MetricField {
        let grid = Grid1D::new(PI / 8.0, 3.0 * PI / 8.0, cells).unwrap();
        MetricField::Warped(WarpedMetric::from_functions(3, grid, |_| 1.0, f64::sin).unwrap())
    }

    #[test]
    fn einstein_variation_of_mean_curvature() {
        let g = sphere_band(400);
        let mu = 2.0;
        let h = g.as_variation().scaled(-2.0 * mu);
        let hp = mc_first_variation(&g, &h).unwrap();
        let states = geometry::boundary_state(&g);
        for (v, s) in hp.iter().zip(&states) {
            assert!((v.values[0] - mu * s.mean_curvature[0]).abs() < 1e-4);
        }
    }

    #[test]
    fn zero_variation_gives_zero() {
        let g = sphere_band(50);
        let h = g.as_variation().zeros_like();
        assert!(mc_first_variation(&g, &h).unwrap().iter().all(|v| v.values[0] == 0.0));
        assert!(boundary_term_d(&g, &h).unwrap().iter().all(|b| b.integral == 0.0));
    }

    #[test]
    fn d_of_metric_vanishes() {
        let g = sphere_band(60);
        let d = boundary_term_d(&g, &g.as_variation()).unwrap();
        assert!(d.iter().all(|b| b.pointwise[0].abs() < 1e-12));
    }

    fn mc_fd_error(g: &MetricField, h: &VariationField) -> f64 {
        let t = 1e-5;
        let hp = mc_first_variation(g, h).unwrap();
        let plus = geometry::boundary_state(&g.perturbed(h, t).unwrap());
        let minus = geometry::boundary_state(&g.perturbed(h, -t).unwrap());
        (0..2)
            .map(|s| {
                let fd = (plus[s].mean_curvature[0] - minus[s].mean_curvature[0]) / (2.0 * t);
                (fd - hp[s].values[0]).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn mc_variation_matches_finite_difference() {
        let errors: Vec<f64> = [100, 200]
            .iter()
            .map(|&cells| {
                let grid = Grid1D::new(1.0, 2.0, cells).unwrap();
                let g = MetricField::Warped(WarpedMetric::from_functions(3, grid, |_| 1.0, |r| r).unwrap());
                mc_fd_error(&g, &random_variation(&g, 3))
            })
            .collect();
        assert!(errors[1] < 1e-3 && observed_rate(errors[0], errors[1]) > 1.8, "{errors:?}");
    }

    #[test]
    fn conformal_mc_variation_matches_finite_difference() {
        let error = |cells: usize| {
            let grid = Grid1D::new(0.5, 1.5, cells).unwrap();
            let c = ConformalMetric::from_function(grid, 16, |r, th| 0.2 * r * th.cos()).unwrap();
            let (v, h) = random_conformal_variation(&c, 5);
            let g = MetricField::Conformal(c.clone());
            let hp = mc_first_variation(&g, &VariationField::Conformal(h)).unwrap();
            let t = 1e-5;
            let plus = c.perturbed(&v, t).unwrap();
            let minus = c.perturbed(&v, -t).unwrap();
            let mut worst = 0.0f64;
            for (s, side) in Side::BOTH.iter().enumerate() {
                let a = plus.mean_curvature(side.is_outer());
                let b = minus.mean_curvature(side.is_outer());
                for j in 0..a.len() {
                    worst = worst.max(((a[j] - b[j]) / (2.0 * t) - hp[s].values[j]).abs());
                }
            }
            worst
        };
        let (a, b) = (error(80), error(160));
        assert!(b < 1e-3 && observed_rate(a, b) > 1.8, "{a} {b}");
    }

    #[test]
    fn eh_variation_matches_finite_difference() {
        for g in [sphere_band(200), {
            let grid = Grid1D::new(1.0, 2.0, 200).unwrap();
            MetricField::Warped(WarpedMetric::from_functions(3, grid, |r| 1.0 + 0.1 * r, |r| r * (1.0 + 0.05 * r * r)).unwrap())
        }] {
            let h = random_variation(&g, 11);
            let t = 1e-5;
            let s = eh_action_and_variation(&g, &h).unwrap();
            let sp = eh_action_and_variation(&g.perturbed(&h, t).unwrap(), &h).unwrap().action;
            let sm = eh_action_and_variation(&g.perturbed(&h, -t).unwrap(), &h).unwrap().action;
            let fd = (sp - sm) / (2.0 * t);
            assert!((fd - s.total).abs() < 1e-3 * (1.0 + fd.abs()), "{fd} vs {}", s.total);
        }
    }

    #[test]
    fn flat_annulus_action_vanishes() {
        let grid = Grid1D::new(1.0, 2.0, 40).unwrap();
        let g = MetricField::Warped(WarpedMetric::from_functions(3, grid, |_| 1.0, |r| r).unwrap());
        let h = random_variation(&g, 1);
        let s = eh_action_and_variation(&g, &h).unwrap();
        assert!(s.action.abs() < 1e-10 && s.interior.abs() < 1e-10);
    }

    #[test]
    fn deturck_field_vanishes_on_equal_metrics() {
        let g = sphere_band(40);
        let xi = deturck_field(&g, &g).unwrap();
        assert!(xi.covector.radial().iter().all(|&x| x == 0.0));
        let scaled = g.scaled(2.5).unwrap();
        let xi = deturck_field(&scaled, &g).unwrap();
        assert!(xi.covector.radial().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn deturck_closed_form_matches_jets() {
        let grid = Grid1D::new(1.0, 2.0, 100).unwrap();
        let flat = MetricField::Warped(WarpedMetric::from_functions(3, grid, |_| 1.0, |r| r).unwrap());
        let w = MetricField::Warped(
            WarpedMetric::from_functions(3, grid, |r| 1.0 + 0.1 * r * r, |r| r + 0.1 * (3.0 * r).sin()).unwrap(),
        );
        let a = deturck_field(&w, &flat).unwrap();
        let b = deturck_field_from_jets(&w, &flat).unwrap();
        for (x, y) in a.covector.radial().iter().zip(b.radial()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_form_residual_converges() {
        let residual = |cells: usize| {
            let grid = Grid1D::new(PI / 8.0, 3.0 * PI / 8.0, cells).unwrap();
            let w = MetricField::Warped(WarpedMetric::from_functions(3, grid, |r| 1.0 + 0.1 * r, f64::sin).unwrap());
            let flat = MetricField::Warped(WarpedMetric::from_functions(3, grid, |_| 1.0, |r| r).unwrap());
            heat_form_residual(&w, &flat, &flat).unwrap().into_iter().fold(0.0, f64::max)
        };
        let (a, b) = (residual(40), residual(80));
        assert!(observed_rate(a, b) > 1.8, "{a} {b}");
    }

    #[test]
    fn boundary_identity_converges() {
        let worst = |cells: usize| {
            let g = sphere_band(cells);
            let h = random_variation(&g, 9);
            boundary_identity_residual(&g, &h).unwrap().iter().map(|b| b.max_abs()).fold(0.0, f64::max)
        };
        let (a, b) = (worst(50), worst(100));
        assert!(observed_rate(a, b) > 1.8, "{a} {b}");
    }

    #[test]
    fn conformal_heat_form_converges() {
        let residual = |cells: usize| {
            let grid = Grid1D::new(0.5, 1.5, cells).unwrap();
            let w = MetricField::Conformal(
                ConformalMetric::from_function(grid, 32, |r, th| 0.2 * (2.0 * r).sin() + 0.05 * r * th.cos()).unwrap(),
            );
            let flat = MetricField::Conformal(ConformalMetric::from_function(grid, 32, |_, _| 0.0).unwrap());
            heat_form_residual(&w, &flat, &flat).unwrap().into_iter().fold(0.0, f64::max)
        };
        let (a, b) = (residual(20), residual(40));
        assert!(observed_rate(a, b) > 1.8, "{a} {b}");
    }

    #[test]
    fn mc_compatible_satisfies_law() {
        let grid = Grid1D::new(0.5, 1.5, 40).unwrap();
        let c = ConformalMetric::from_function(grid, 12, |r, th| 0.1 * r * th.sin()).unwrap();
        let g2 = MetricField::Conformal(c.clone());
        let h2 = VariationField::Conformal(random_conformal_variation(&c, 2).1);
        for (g, h) in [(sphere_band(60), None), (g2, Some(h2))] {
            let h = h.unwrap_or_else(|| random_variation(&g, 4));
            let fixed = mc_compatible(&g, &h).unwrap();
            let res = mc_condition_residual(&g, &fixed).unwrap();
            assert!(res.iter().all(|b| b.max_abs() < 1e-12), "{res:?}");
            for side in Side::BOTH {
                let (a, b) = (phi_g(&g, &h, side).unwrap(), phi_g(&g, &fixed, side).unwrap());
                assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn linearity_in_h() {
        let g = sphere_band(60);
        let (h1, h2) = (random_variation(&g, 1), random_variation(&g, 2));
        let combo = h1.scaled(2.0).axpy(-3.0, &h2).unwrap();
        let f = |h: &VariationField| mc_first_variation(&g, h).unwrap()[0].values[0];
        assert!((f(&combo) - (2.0 * f(&h1) - 3.0 * f(&h2))).abs() < 1e-12);
    }
}
