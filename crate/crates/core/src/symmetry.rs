//! Equilibrium and detailed-balance analysis: modular multipliers built from
//! faithful states, state-level and bimodule-level GNS/KMS checks, solving
//! for a compatible Δ̂, and long-time semigroup limits.

use num_rational::Ratio;

use crate::channel::BimoduleChannel;
use crate::error::{Error, Result};
use crate::generator::Lindbladian;
use crate::inclusion::{BoxElement, InclusionModel, ModelKind};
use crate::numerics::{self, cr, identity, kron, zeros, CMatrix, MatFun, ONE, ZERO};

/// A strictly positive Δ̂ ∈ B₂ with Δ̂e₂ = e₂Δ̂ = e₂; `half` marks data of
/// Δ̂_{ρ,1/2} type (square-root modular exponents, used by the KMS check).
#[derive(Clone, Debug)]
pub struct SymmetryDatum {
    pub model: InclusionModel,
    pub delta_hat: BoxElement,
    pub half: bool,
}

impl SymmetryDatum {
    pub fn new(model: &InclusionModel, delta_hat: CMatrix, half: bool) -> Result<Self> {
        let datum = SymmetryDatum { model: model.clone(), delta_hat: BoxElement::b2(delta_hat), half };
        datum.check_invariants()?;
        Ok(datum)
    }

    /// Δ̂ must be strictly positive, invertible and fix e₂ on both sides.
    pub fn check_invariants(&self) -> Result<()> {
        let m = &self.model;
        let d = &self.delta_hat.data;
        let herm = m.b2_herm_residual(d);
        if herm > m.tol.rel(m.tol.herm_tol(), numerics::max_abs(d)) {
            return Err(Error::InvalidDelta { what: format!("not self-adjoint (residual {herm:.3e})") });
        }
        let min = m.b2_eigenvalues(d)?[0];
        if min <= 1e-12 * (1.0 + numerics::max_abs(d)) {
            return Err(Error::InvalidDelta { what: format!("not strictly positive (min eig {min:.3e})") });
        }
        let e2 = m.e2();
        let r1 = numerics::max_abs(&(m.b2_mul(d, &e2) - &e2));
        let r2 = numerics::max_abs(&(m.b2_mul(&e2, d) - &e2));
        if r1.max(r2) > m.tol.rel(m.tol.herm_tol(), numerics::max_abs(d)) {
            return Err(Error::InvalidDelta { what: format!("e2 not fixed (residual {:.3e})", r1.max(r2)) });
        }
        Ok(())
    }

    pub fn conj(&self) -> CMatrix {
        self.model
            .contragredient(&self.delta_hat)
            .expect("B2 element")
            .data
    }
}

/// Modular multiplier Δ̂ρ of a strictly positive τ-density:
/// coefficient array d_j/d_k on the spin model, ρᵀ ⊗ ρ⁻¹ on the full model.
pub fn modular_multiplier(model: &InclusionModel, rho: &CMatrix) -> Result<SymmetryDatum> {
    modular_with_exponent(model, rho, 1.0, false)
}

/// Δ̂_{ρ,1/2}: the square-root-exponent variant entering KMS symmetry.
pub fn modular_multiplier_half(model: &InclusionModel, rho: &CMatrix) -> Result<SymmetryDatum> {
    modular_with_exponent(model, rho, 0.5, true)
}

fn modular_with_exponent(model: &InclusionModel, rho: &CMatrix, expo: f64, half: bool) -> Result<SymmetryDatum> {
    let tol = &model.tol;
    let herm = numerics::herm_residual(rho);
    if herm > tol.rel(tol.herm_tol(), numerics::op_norm(rho)) {
        return Err(Error::NotPositiveDensity { min_eig: f64::NAN });
    }
    let delta = match model.kind {
        ModelKind::Spin(n) => {
            let mut d = vec![0.0f64; n];
            for i in 0..n {
                d[i] = rho[(i, i)].re;
                if d[i] <= 0.0 {
                    return Err(Error::NotPositiveDensity { min_eig: d[i] });
                }
            }
            CMatrix::from_fn(n, n, |j, k| cr((d[j] / d[k]).powf(expo)))
        }
        ModelKind::FullMatrix(_) => {
            let eig = numerics::herm_eig(rho, tol)?;
            if eig.values[0] <= 0.0 {
                return Err(Error::NotPositiveDensity { min_eig: eig.values[0] });
            }
            let pos = eig.assemble(|v| v.powf(expo));
            let neg = eig.assemble(|v| v.powf(-expo));
            kron(&pos.transpose(), &neg)
        }
    };
    SymmetryDatum::new(model, delta, half)
}

/// Equilibrium report: the state-level residual ‖ρ∘Φ - ρ‖ over a basis and
/// the multiplier-condition cross-check E_M(e₂e₁Δ̂ρ conj(Φ̂) e₁e₂) = λ^{5/2},
/// plus the auxiliary vector condition surfaced as its own residual.
#[derive(Clone, Debug)]
pub struct EquilibriumReport {
    pub state_residual: f64,
    pub multiplier_residual: f64,
    pub vector_residual: f64,
    pub equilibrium: bool,
}

pub fn check_equilibrium(ch: &BimoduleChannel, rho: &CMatrix) -> Result<EquilibriumReport> {
    let m = &ch.model;
    let n = m.n();
    // primary: rho(Phi(x)) = rho(x) on a basis of M
    let mut state_residual: f64 = 0.0;
    for x in m_basis(m) {
        let lhs = m.tau_m(&(rho * ch.apply(&x)));
        let rhs = m.tau_m(&(rho * &x));
        state_residual = state_residual.max((lhs - rhs).norm());
    }
    // cross-check: E_M(e2 e1 Dhat conj(Phihat) e1 e2) = lambda^{5/2}
    let delta = modular_multiplier(m, rho)?;
    let barphi = m.contragredient(&ch.multiplier)?.data;
    let prod = m.b2_mul(&delta.delta_hat.data, &barphi);
    let e1 = m.m2_of_b1(&m.e1());
    let e2 = m.m2_e2();
    let z = &e2 * &e1 * m.m2_of_b2(&prod) * &e1 * &e2;
    let got = m.m2_expect_m(&z);
    let expect = identity(n).scale(m.lambda.powf(2.5));
    let multiplier_residual = numerics::max_abs(&(&got - &expect)) / m.lambda.powf(2.5);

    let vector_residual = equilibrium_vector_residual(m, &barphi, rho, &delta.delta_hat.data)?;

    let tol = m.tol.eq_tol().max(1e-10);
    Ok(EquilibriumReport {
        state_residual,
        multiplier_residual,
        vector_residual,
        equilibrium: state_residual <= tol && multiplier_residual <= tol,
    })
}

/// Residual of e₂e₁conj(Φ̂)Δρe₁Δρ⁻¹Ω₁ = e₂e₁conj(Φ̂)Δ̂ρe₁Ω₁ on L²(M₁).
fn equilibrium_vector_residual(
    m: &InclusionModel,
    barphi: &CMatrix,
    rho: &CMatrix,
    delta_hat: &CMatrix,
) -> Result<f64> {
    let rho_inv = match m.kind {
        ModelKind::Spin(n) => CMatrix::from_fn(n, n, |i, j| if i == j { cr(1.0 / rho[(i, i)].re) } else { ZERO }),
        ModelKind::FullMatrix(_) => numerics::mat_fun(rho, MatFun::Power(-1.0), &m.tol)?,
    };
    let e1 = m.m2_of_b1(&m.e1());
    let e2 = m.m2_e2();
    let bp = m.m2_of_b2(barphi);
    let lhs_op = &e2 * &e1 * &bp * m.m2_of_m(rho) * &e1 * m.m2_of_m(&rho_inv);
    let rhs_op = &e2 * &e1 * &bp * m.m2_of_b2(delta_hat) * &e1;
    let omega1 = omega1_block(m);
    let lhs = &lhs_op * &omega1;
    let rhs = &rhs_op * &omega1;
    Ok(numerics::max_abs(&(lhs - rhs)))
}

/// Ω₁ of L²(M₁) arranged as an (m2_dim × k) block so that M₂-representation
/// matrices act by left multiplication.
fn omega1_block(m: &InclusionModel) -> CMatrix {
    match m.kind {
        ModelKind::Spin(n) => {
            // L2(M1) = C^n ⊗ C^n; Omega1 = (1/sqrt n) sum_k e_k ⊗ e_k
            let mut v = zeros(n * n, 1);
            for k in 0..n {
                v[(k * n + k, 0)] = cr(1.0 / (n as f64).sqrt());
            }
            v
        }
        ModelKind::FullMatrix(n) => {
            // rows index tensor slots (1,2,4), the column indexes slot 3
            let mut v = zeros(n * n * n, n);
            for j in 0..n {
                for k in 0..n {
                    v[(j * n * n + k * n + k, j)] = cr(1.0 / n as f64);
                }
            }
            v
        }
    }
}

/// Max residual of the GNS bilinear identity ρ(y*Φ(x)) = ρ(Φ(y)*x) over the
/// matrix-unit basis, together with the modular-commutation residual
/// ‖[transfer, ad log Δρ]‖.
#[derive(Clone, Debug)]
pub struct StateSymmetryReport {
    pub bilinear_residual: f64,
    pub modular_commutation_residual: f64,
}

pub fn check_gns_state(ch: &BimoduleChannel, rho: &CMatrix) -> Result<StateSymmetryReport> {
    let m = &ch.model;
    let basis = m_basis(m);
    let mut worst: f64 = 0.0;
    for x in &basis {
        let fx = ch.apply(x);
        for y in &basis {
            let fy = ch.apply(y);
            let lhs = m.tau_m(&(rho * y.adjoint() * &fx));
            let rhs = m.tau_m(&(rho * fy.adjoint() * x));
            worst = worst.max((lhs - rhs).norm());
        }
    }
    let log_rho = match m.kind {
        ModelKind::Spin(n) => CMatrix::from_fn(n, n, |i, j| if i == j { cr(rho[(i, i)].re.ln()) } else { ZERO }),
        ModelKind::FullMatrix(_) => numerics::mat_fun(rho, MatFun::Log, &m.tol)?,
    };
    let s = m.left_mult(&log_rho) - m.right_mult(&log_rho);
    let t = &ch.transfer;
    let comm = t * &s - &s * t;
    Ok(StateSymmetryReport {
        bilinear_residual: worst,
        modular_commutation_residual: numerics::max_abs(&comm),
    })
}

/// Max residual of the KMS identity
/// τ(Δ^{1/2} y* Δ^{1/2} Φ(x)) = τ(Δ^{1/2} Φ(y)* Δ^{1/2} x) over basis pairs.
pub fn check_kms_state(ch: &BimoduleChannel, rho: &CMatrix) -> Result<f64> {
    let m = &ch.model;
    let half = match m.kind {
        ModelKind::Spin(n) => CMatrix::from_fn(n, n, |i, j| if i == j { cr(rho[(i, i)].re.sqrt()) } else { ZERO }),
        ModelKind::FullMatrix(_) => numerics::mat_fun(rho, MatFun::Sqrt, &m.tol)?,
    };
    let basis = m_basis(m);
    let mut worst: f64 = 0.0;
    for x in &basis {
        let fx = ch.apply(x);
        for y in &basis {
            let fy = ch.apply(y);
            let lhs = m.tau_m(&(&half * y.adjoint() * &half * &fx));
            let rhs = m.tau_m(&(&half * fy.adjoint() * &half * x));
            worst = worst.max((lhs - rhs).norm());
        }
    }
    Ok(worst)
}

/// Bimodule GNS report: the defining residual conj(Φ̂) = Φ̂·conj(Δ̂) and the
/// consequence suite (commutations with Δ̂ and conj Δ̂, normality of Φ̂ against
/// its rotation, and the range identity R(Φ̂)Δ̂conj(Δ̂) = R(Φ̂)).
#[derive(Clone, Debug)]
pub struct BimoduleGnsReport {
    pub defining_residual: f64,
    pub commute_delta_residual: f64,
    pub commute_conj_delta_residual: f64,
    pub normality_residual: f64,
    pub range_identity_residual: f64,
    pub pass: bool,
}

pub fn check_bimodule_gns(model: &InclusionModel, mult: &CMatrix, delta: &SymmetryDatum) -> Result<BimoduleGnsReport> {
    delta.check_invariants()?;
    let m = model;
    let bar_phi = m.contragredient(&BoxElement::b2(mult.clone()))?.data;
    let bar_delta = delta.conj();
    let d = &delta.delta_hat.data;
    let scale = 1.0 + numerics::max_abs(mult);

    let defining_residual = numerics::max_abs(&(&bar_phi - m.b2_mul(mult, &bar_delta))) / scale;
    let commute_delta_residual = numerics::max_abs(&(m.b2_mul(mult, d) - m.b2_mul(d, mult))) / scale;
    let commute_conj_delta_residual =
        numerics::max_abs(&(m.b2_mul(mult, &bar_delta) - m.b2_mul(&bar_delta, mult))) / scale;
    let normality_residual =
        numerics::max_abs(&(m.b2_mul(mult, &bar_phi) - m.b2_mul(&bar_phi, mult))) / (scale * scale);
    let r = m.b2_range_projection(mult);
    let dd = m.b2_mul(d, &bar_delta);
    let range_identity_residual = numerics::max_abs(&(m.b2_mul(&r, &dd) - &r));

    let tol = m.tol.eq_tol().max(1e-10);
    let pass = defining_residual <= tol
        && commute_delta_residual <= tol
        && commute_conj_delta_residual <= tol
        && normality_residual <= tol
        && range_identity_residual <= tol;
    Ok(BimoduleGnsReport {
        defining_residual,
        commute_delta_residual,
        commute_conj_delta_residual,
        normality_residual,
        range_identity_residual,
        pass,
    })
}

/// Bimodule KMS report: conj(Φ̂) = conj(Δ̂)·Φ̂·conj(Δ̂) plus the range
/// condition R(Φ̂)conj(Δ̂) = R(Φ̂)Δ̂⁻¹.
#[derive(Clone, Debug)]
pub struct BimoduleKmsReport {
    pub defining_residual: f64,
    pub range_condition_residual: f64,
    pub pass: bool,
}

pub fn check_bimodule_kms(model: &InclusionModel, mult: &CMatrix, delta: &SymmetryDatum) -> Result<BimoduleKmsReport> {
    delta.check_invariants()?;
    let m = model;
    let bar_phi = m.contragredient(&BoxElement::b2(mult.clone()))?.data;
    let bar_delta = delta.conj();
    let scale = 1.0 + numerics::max_abs(mult);
    let defining_residual =
        numerics::max_abs(&(&bar_phi - m.b2_mul(&m.b2_mul(&bar_delta, mult), &bar_delta))) / scale;
    let r = m.b2_range_projection(mult);
    let dinv = m.b2_fun(&delta.delta_hat.data, MatFun::Power(-1.0), false)?;
    let range_condition_residual =
        numerics::max_abs(&(m.b2_mul(&r, &bar_delta) - m.b2_mul(&r, &dinv)));
    let tol = m.tol.eq_tol().max(1e-10);
    Ok(BimoduleKmsReport {
        defining_residual,
        range_condition_residual,
        pass: defining_residual <= tol && range_condition_residual <= tol,
    })
}

/// A conflicting pair of derivations of the same density ratio, with exact
/// rational values: `direct` from the (j,k) entry of Δ̂, `via_first` chained
/// through the first index. Ratios are t_j/t_k in the orientation
/// `t_j/t_k = Δ̂[k,j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioConflict {
    pub j: usize,
    pub k: usize,
    pub direct: Ratio<i64>,
    pub via_first: Ratio<i64>,
}

/// Outcome of solving conj(Φ̂) = Φ̂·conj(Δ̂) for Δ̂.
#[derive(Clone, Debug)]
pub enum SolveDelta {
    Found {
        delta: SymmetryDatum,
        /// Whether Δ̂ is of modular (state) form, with the witness conflicts
        /// when it is not.
        state_realizable: bool,
        witness: Vec<RatioConflict>,
    },
    Infeasible {
        what: String,
    },
    Underdetermined,
}

/// Solve for a bimodule symmetry datum compatible with the multiplier.
/// Spin: entrywise ratios; FullMatrix: simultaneous diagonalization when the
/// multiplier is self-adjoint and normal with its rotation.
pub fn solve_delta(ch: &BimoduleChannel) -> Result<SolveDelta> {
    let m = &ch.model;
    let mult = &ch.multiplier.data;
    let bar = m.contragredient(&ch.multiplier)?.data;
    // range symmetry is necessary for any strictly positive Delta
    let r = m.b2_range_projection(mult);
    let rbar = m.b2_range_projection(&bar);
    if numerics::max_abs(&(&r - &rbar)) > 1e-9 {
        return Ok(SolveDelta::Infeasible { what: "R(multiplier) differs from R(rotated multiplier)".into() });
    }
    match m.kind {
        ModelKind::Spin(n) => {
            let floor = 1e-12 * (1.0 + numerics::max_abs(mult));
            let mut delta = CMatrix::from_element(n, n, ONE);
            for j in 0..n {
                for k in 0..n {
                    if j == k {
                        continue;
                    }
                    let num = mult[(j, k)];
                    let den = mult[(k, j)];
                    if den.norm() > floor {
                        // conj(Phi) = Phi .* conj(Delta) entrywise forces
                        // Delta[j,k] = Phi[j,k] / Phi[k,j]
                        let v = num / den;
                        if v.im.abs() > 1e-9 || v.re <= 0.0 {
                            return Ok(SolveDelta::Infeasible {
                                what: format!("entry ratio at ({j},{k}) is not positive"),
                            });
                        }
                        delta[(j, k)] = v;
                    }
                }
            }
            let datum = match SymmetryDatum::new(m, delta.clone(), false) {
                Ok(d) => d,
                Err(e) => return Ok(SolveDelta::Infeasible { what: e.to_string() }),
            };
            let rep = check_bimodule_gns(m, mult, &datum)?;
            if !rep.pass {
                return Ok(SolveDelta::Infeasible {
                    what: format!("re-check failed (defining residual {:.3e})", rep.defining_residual),
                });
            }
            let (state_realizable, witness) = spin_state_realizability(&delta, n);
            Ok(SolveDelta::Found { delta: datum, state_realizable, witness })
        }
        ModelKind::FullMatrix(_) => {
            if m.b2_herm_residual(mult) > 1e-9 * (1.0 + numerics::max_abs(mult)) {
                return Ok(SolveDelta::Underdetermined);
            }
            let comm = m.b2_mul(mult, &bar) - m.b2_mul(&bar, mult);
            if numerics::max_abs(&comm) > 1e-9 * (1.0 + numerics::max_abs(mult)).powi(2) {
                return Ok(SolveDelta::Underdetermined);
            }
            let spec = m.b2_spectral(mult)?;
            // pair eigenprojections under the rotation
            let mut bar_delta = &m.b2_identity() - &m.b2_range_projection(mult);
            for (val, proj) in &spec {
                if val.abs() < 1e-12 {
                    continue;
                }
                let pbar = m.contragredient(&BoxElement::b2(proj.clone()))?.data;
                // eigenvalue of the rotated multiplier on bar(p)
                let mut paired = None;
                for (val2, proj2) in &spec {
                    if numerics::max_abs(&(&pbar - proj2)) < 1e-7 {
                        paired = Some(*val2);
                        break;
                    }
                }
                let Some(val_star) = paired else {
                    return Ok(SolveDelta::Underdetermined);
                };
                if val_star / val <= 0.0 {
                    return Ok(SolveDelta::Infeasible { what: "negative eigenvalue ratio".into() });
                }
                bar_delta += proj.scale(val_star / val);
            }
            let delta = m.contragredient(&BoxElement::b2(bar_delta))?.data;
            let datum = match SymmetryDatum::new(m, delta, false) {
                Ok(d) => d,
                Err(e) => return Ok(SolveDelta::Infeasible { what: e.to_string() }),
            };
            let rep = check_bimodule_gns(m, mult, &datum)?;
            if !rep.pass {
                return Ok(SolveDelta::Infeasible {
                    what: format!("re-check failed (defining residual {:.3e})", rep.defining_residual),
                });
            }
            Ok(SolveDelta::Found { delta: datum, state_realizable: true, witness: vec![] })
        }
    }
}

/// Ratio-cocycle test for the spin model in exact rational arithmetic:
/// Δ̂ is modular iff Δ̂[j,k] = d_j/d_k, equivalently all chained ratios agree.
fn spin_state_realizability(delta: &CMatrix, n: usize) -> (bool, Vec<RatioConflict>) {
    // t-orientation of the worked example: t_j/t_k := Delta[k,j]
    let ratio = |j: usize, k: usize| -> Option<Ratio<i64>> { to_rational(delta[(k, j)].re) };
    let mut conflicts = Vec::new();
    let mut ok = true;
    // anchor t_1 = 1 and chain through the first index
    let mut t: Vec<Option<Ratio<i64>>> = vec![None; n];
    t[0] = Some(Ratio::new(1, 1));
    for k in 1..n {
        t[k] = ratio(0, k).map(|r| Ratio::new(1, 1) / r);
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let (Some(direct), Some(tj), Some(tk)) = (ratio(j, k), t[j], t[k]) else {
                ok = false;
                continue;
            };
            let chained = tj / tk;
            if direct != chained {
                ok = false;
                conflicts.push(RatioConflict { j, k, direct, via_first: chained });
            }
        }
    }
    (ok, conflicts)
}

/// Best small-rational reconstruction of a float (continued fractions),
/// verified to 1e-12; used so witnesses are exact when inputs are rational.
pub fn to_rational(x: f64) -> Option<Ratio<i64>> {
    if !x.is_finite() {
        return None;
    }
    let (mut a, mut b) = (x, 1.0f64);
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    for _ in 0..64 {
        if b.abs() < 1e-15 {
            break;
        }
        let q = (a / b).floor();
        let r = a - q * b;
        let qi = q as i64;
        let (p2, q2) = (qi.checked_mul(p1)?.checked_add(p0)?, qi.checked_mul(q1)?.checked_add(q0)?);
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        a = b;
        b = r;
        if q1 != 0 && (x - p1 as f64 / q1 as f64).abs() < 1e-12 * (1.0 + x.abs()) {
            break;
        }
        if q1.abs() > 1_000_000_000 {
            return None;
        }
    }
    if q1 == 0 {
        return None;
    }
    let cand = Ratio::new(p1, q1);
    if ((*cand.numer() as f64) / (*cand.denom() as f64) - x).abs() < 1e-10 * (1.0 + x.abs()) {
        Some(cand)
    } else {
        None
    }
}

/// Long-time limit of a bimodule GNS symmetric, relatively ergodic semigroup:
/// the limit multiplier and the stationary density d∞ with
/// Φ_t*(D) → τ(D)·d∞.
#[derive(Clone, Debug)]
pub struct SemigroupLimit {
    /// lim Φ̂_t as a B₂ element.
    pub multiplier: CMatrix,
    /// Stationary density in M.
    pub density: CMatrix,
}

/// Closed-form limit from E_{M₁}(conj Δ̂). Requires bimodule GNS symmetry at
/// the channel level (checked at t = 1, a strictly stronger condition than
/// generator-level symmetry) and relative ergodicity.
pub fn semigroup_limit(l: &Lindbladian, delta: &SymmetryDatum) -> Result<SemigroupLimit> {
    let m = &l.model;
    // generator-level symmetry
    let gen_rep = check_bimodule_gns(m, &l.lhat.data, delta)?;
    if !gen_rep.pass {
        return Err(Error::NotSymmetric { residual: gen_rep.defining_residual });
    }
    // channel-level symmetry at t = 1
    let phi1 = l.evolve(1.0)?;
    let ch_rep = check_bimodule_gns(m, &phi1.multiplier.data, delta)?;
    if !ch_rep.pass {
        return Err(Error::NotSymmetric { residual: ch_rep.defining_residual });
    }
    // relative ergodicity
    let fixed = phi1.fixed_points();
    if fixed.len() != 1 {
        return Err(Error::NotErgodic { dim: fixed.len() });
    }
    let bar_delta = delta.conj();
    let a = m.cond_expect_m1_of_b2(&bar_delta);
    // density: inverse of the rotation of E_{M1}(conj Delta) read in M
    let at = a.transpose();
    let density = match m.kind {
        ModelKind::Spin(n) => CMatrix::from_fn(n, n, |i, j| if i == j { cr(1.0 / at[(i, i)].re) } else { ZERO }),
        ModelKind::FullMatrix(_) => numerics::mat_fun(&at, MatFun::Power(-1.0), &m.tol)?,
    };
    // the limit multiplier carries the transposed density in the M'∩M₁ slot
    let multiplier = m.embed_m1c_in_b2(&density.transpose()).scale(m.lambda.sqrt());
    Ok(SemigroupLimit { multiplier, density })
}

fn m_basis(m: &InclusionModel) -> Vec<CMatrix> {
    match m.kind {
        ModelKind::Spin(n) => (0..n).map(|i| numerics::unit(n, i, i)).collect(),
        ModelKind::FullMatrix(n) => {
            let mut v = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    v.push(numerics::unit(n, i, j));
                }
            }
            v
        }
    }
}
