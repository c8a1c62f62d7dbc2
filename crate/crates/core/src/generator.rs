//! Lindbladians of bimodule quantum Markov semigroups: construction from
//! (L₀, L₁) data, validation of the three generator invariants, jump
//! decompositions, derivations and gradient forms, time evolution and
//! spectral-gap (Poincaré) margins.
//!
//! Sign convention: Φ_t = e^{-tL}, so the transfer matrix of the semigroup
//! at time t is expm(-t·transfer(L)).

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::channel::BimoduleChannel;
use crate::error::{Error, Result};
use crate::inclusion::{BoxElement, InclusionModel, ModelKind, Space};
use crate::numerics::{self, cr, identity, zeros, CMatrix, MatFun};

/// A validated generator multiplier L̂ with its components
/// L̂₀ = -(1-e₂)L̂(1-e₂) and L̂₁ = e₂L̂(1-e₂), plus the superoperator of L on
/// the GNS space.
#[derive(Debug)]
pub struct Lindbladian {
    pub model: InclusionModel,
    pub lhat: BoxElement,
    pub l0: BoxElement,
    pub l1: BoxElement,
    pub transfer: CMatrix,
    jumps: OnceLock<JumpDecomposition>,
}

impl Clone for Lindbladian {
    fn clone(&self) -> Self {
        Lindbladian {
            model: self.model.clone(),
            lhat: self.lhat.clone(),
            l0: self.l0.clone(),
            l1: self.l1.clone(),
            transfer: self.transfer.clone(),
            jumps: OnceLock::new(),
        }
    }
}

/// One jump direction: a weight, a minimal (clustered) projection in B₂ and,
/// for the full matrix model, the jump operators v of the cluster.
#[derive(Clone, Debug)]
pub struct Jump {
    pub omega: f64,
    pub projection: CMatrix,
    /// Jump operators spanning the cluster (absent for the spin model, where
    /// B₂ positions do not correspond to elements of M).
    pub operators: Vec<CMatrix>,
}

/// Spectral decomposition of L̂₀ into weighted, mutually orthogonal
/// projections. Jump operators are unique only up to phase and rotation
/// inside degenerate clusters; downstream consumers must be gauge-invariant.
#[derive(Clone, Debug)]
pub struct JumpDecomposition {
    pub items: Vec<Jump>,
    pub gauge_note: bool,
}

/// The three validity residuals of a generator multiplier.
#[derive(Clone, Debug)]
pub struct ValidityReport {
    pub herm_residual: f64,
    pub unitality_residual: f64,
    pub min_l0_eig: f64,
    pub valid: bool,
}

/// Spectral-gap data of Thm-style Poincaré bounds.
#[derive(Clone, Debug)]
pub struct PoincareReport {
    pub beta_hat: f64,
    pub beta: f64,
    /// Whether CS₀(L̂₀) = 1 so the bound is asserted.
    pub connected: bool,
    /// Second-route diagnostic (irreducible-inclusion bound), reported only.
    pub bound1_diagnostic: f64,
}

impl Lindbladian {
    /// Build from L₀ ≥ 0 in B₂ and Hermitian L₁ ∈ M:
    /// L(x) = ½(1∗L₀)x + ½x(1∗L₀) + iL₁x - ixL₁ - x∗L₀.
    pub fn build(model: &InclusionModel, l0: &CMatrix, l1: &CMatrix) -> Result<Self> {
        let tol = &model.tol;
        let min = model.b2_eigenvalues(l0)?[0];
        if min < -tol.rel(tol.eig_floor_tol(), numerics::max_abs(l0)) {
            return Err(Error::NotPositive { min_eig: min });
        }
        let herm = numerics::herm_residual(l1);
        if herm > tol.rel(tol.herm_tol(), numerics::op_norm(l1)) {
            return Err(Error::NotHermitian { residual: herm });
        }
        let one_star = model.apply_multiplier(l0, &identity(model.n()))?;
        let a = model.left_mult(&one_star).scale(0.5) + model.right_mult(&one_star).scale(0.5);
        let i = Complex64::new(0.0, 1.0);
        let comm = (model.left_mult(l1) - model.right_mult(l1)).map(|z| z * i);
        let conv = model.transfer_of_multiplier(l0)?;
        let transfer = a + comm - conv;
        Self::from_transfer(model, &transfer)
    }

    /// Wrap an already-assembled generator superoperator; validates.
    pub fn from_transfer(model: &InclusionModel, transfer: &CMatrix) -> Result<Self> {
        let lhat = model.multiplier_of_transfer(transfer)?;
        Self::from_lhat_unchecked(model, lhat, transfer.clone()).validated()
    }

    /// Wrap a generator multiplier; validates.
    pub fn from_lhat(model: &InclusionModel, lhat: &CMatrix) -> Result<Self> {
        let transfer = model.transfer_of_multiplier(lhat)?;
        Self::from_lhat_unchecked(model, lhat.clone(), transfer).validated()
    }

    fn from_lhat_unchecked(model: &InclusionModel, lhat: CMatrix, transfer: CMatrix) -> Self {
        let (l0, l1) = split_components(model, &lhat);
        Lindbladian {
            model: model.clone(),
            lhat: BoxElement::b2(lhat),
            l0: BoxElement::b2(l0),
            l1: BoxElement::b2(l1),
            transfer,
            jumps: OnceLock::new(),
        }
    }

    fn validated(self) -> Result<Self> {
        let report = self.validate();
        if !report.valid {
            if report.herm_residual > self.model.tol.rel(self.model.tol.herm_tol(), numerics::max_abs(&self.lhat.data)) {
                return Err(Error::NotHermitian { residual: report.herm_residual });
            }
            if report.min_l0_eig < 0.0 {
                return Err(Error::NotPositive { min_eig: report.min_l0_eig });
            }
            return Err(Error::RelationViolation {
                what: format!("unitality residual {:.3e}", report.unitality_residual),
            });
        }
        Ok(self)
    }

    /// The three generator invariants: L̂* = L̂, unitality L(1) = 0
    /// (equivalently E_M(e₂e₁L̂e₁e₂) = 0), and L̂₀ ≥ 0.
    pub fn validate(&self) -> ValidityReport {
        validate_multiplier(&self.model, &self.lhat.data)
    }

    /// Apply the generator to x ∈ M through the conditional-expectation
    /// formula λ^{-1/2}E_M(e₂L̂e₂)x + λ^{-3/2}E_M(e₂e₁L̂₁*)x
    /// + λ^{-3/2}xE_M(L̂₁e₁e₂) - x∗L̂₀.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        let m = &self.model;
        let lam = m.lambda;
        let e1 = m.m2_of_b1(&m.e1());
        let e2 = m.m2_e2();
        let lhat2 = m.m2_of_b2(&self.lhat.data);
        let l1hat2 = m.m2_of_b2(&self.l1.data);
        let a = m.m2_expect_m(&(&e2 * &lhat2 * &e2)).scale(lam.powf(-0.5));
        let b = m
            .m2_expect_m(&(&e2 * &e1 * m.m2_of_b2(&m.b2_adjoint(&self.l1.data))))
            .scale(lam.powf(-1.5));
        let c = m.m2_expect_m(&(&l1hat2 * &e1 * &e2)).scale(lam.powf(-1.5));
        let conv = m.apply_multiplier(&self.l0.data, x)?;
        Ok(&a * x + &b * x + x * &c - conv)
    }

    /// Apply through the cached superoperator.
    pub fn apply_transfer(&self, x: &CMatrix) -> CMatrix {
        self.model.unvec_m(&(&self.transfer * self.model.vec_m(x)))
    }

    /// Φ_t = e^{-tL} as a channel.
    pub fn evolve(&self, t: f64) -> Result<BimoduleChannel> {
        if t < 0.0 {
            return Err(Error::NegativeTime { t });
        }
        let e = numerics::expm_general(&self.transfer.scale(-t));
        BimoduleChannel::from_superoperator(&self.model, &e)
    }

    /// Superoperator of the dual semigroup generator L* (trace duality).
    pub fn dual_transfer(&self) -> CMatrix {
        self.transfer.adjoint()
    }

    /// L*(y) through trace duality.
    pub fn apply_dual(&self, y: &CMatrix) -> CMatrix {
        self.model.unvec_m(&(self.transfer.adjoint() * self.model.vec_m(y)))
    }

    /// Spectral decomposition of L̂₀ with eigenvalue clustering (relative gap
    /// 1e-9) and, for the full model, jump operators v with τ(v) = 0 and
    /// τ(v_j v_k*) = λ^{1/2}δ_jk.
    pub fn jump_decomposition(&self) -> &JumpDecomposition {
        self.jumps.get_or_init(|| {
            let m = &self.model;
            let spec = m.b2_spectral(&self.l0.data).expect("validated L0 is self-adjoint");
            let floor = m.tol.rel(m.tol.eig_floor_tol(), numerics::max_abs(&self.l0.data));
            let mut items = Vec::new();
            let mut gauge_note = false;
            for (omega, projection) in spec {
                if omega.abs() <= floor.max(1e-12) {
                    continue;
                }
                let mut operators = Vec::new();
                if let ModelKind::FullMatrix(n) = m.kind {
                    // rank-one pieces of the cluster: p = Σ |vec(conj v)><vec(conj v)|
                    let eig = numerics::herm_eig(&projection, &m.tol).expect("projection Hermitian");
                    let mut count = 0;
                    for i in 0..projection.nrows() {
                        if eig.values[i] > 0.5 {
                            let xi = eig.vectors.column(i);
                            let v = CMatrix::from_fn(n, n, |a, b| xi[a * n + b].conj());
                            operators.push(v);
                            count += 1;
                        }
                    }
                    if count > 1 {
                        gauge_note = true;
                    }
                }
                items.push(Jump { omega, projection, operators });
            }
            JumpDecomposition { items, gauge_note }
        })
    }

    /// Hamiltonian part w read off L̂₁:
    /// w = (λ^{-3/2}/2i)(E_M(e₂e₁L̂₁*) - E_M(L̂₁e₁e₂)).
    pub fn hamiltonian_part(&self) -> CMatrix {
        let m = &self.model;
        let e1 = m.m2_of_b1(&m.e1());
        let e2 = m.m2_e2();
        let a = m.m2_expect_m(&(&e2 * &e1 * m.m2_of_b2(&m.b2_adjoint(&self.l1.data))));
        let b = m.m2_expect_m(&(m.m2_of_b2(&self.l1.data) * &e1 * &e2));
        (a - b).map(|z| z * Complex64::new(0.0, -0.5)).scale(m.lambda.powf(-1.5))
    }

    /// GKLS route (full model): L(x) = Σ ω_j(½{v*v, x} - v*xv) + i[w, x].
    pub fn apply_gkls(&self, x: &CMatrix) -> Result<CMatrix> {
        if !matches!(self.model.kind, ModelKind::FullMatrix(_)) {
            return Err(Error::RelationViolation { what: "GKLS jump form needs the full matrix model".into() });
        }
        let w = self.hamiltonian_part();
        let i = Complex64::new(0.0, 1.0);
        let mut out = (&w * x - x * &w).map(|z| z * i);
        for jump in &self.jump_decomposition().items {
            for v in &jump.operators {
                let vv = v.adjoint() * v;
                out += ((&vv * x + x * &vv).scale(0.5) - v.adjoint() * x * v).scale(jump.omega);
            }
        }
        Ok(out)
    }

    /// 𝔉⁻¹(L̂₀^{1/2}) — the derivation kernel in M₁.
    pub fn derivation_kernel(&self) -> Result<CMatrix> {
        let sq = self.model.b2_fun(&self.l0.data, MatFun::Sqrt, true)?;
        Ok(self.model.inverse_fourier(&BoxElement::b2(sq))?.data)
    }

    /// ∂x = [x, 𝔉⁻¹(L̂₀^{1/2})] ∈ M₁.
    pub fn derivation(&self, x: &CMatrix) -> Result<BoxElement> {
        let k = self.derivation_kernel()?;
        let xl = self.model.left_mult(x);
        Ok(BoxElement::new(Space::M1, &xl * &k - &k * &xl))
    }

    /// Conjugated derivation ∂̄x = [x, 𝔉⁻¹(L̂₀^{1/2})*].
    pub fn conj_derivation(&self, x: &CMatrix) -> Result<BoxElement> {
        let k = self.derivation_kernel()?.adjoint();
        let xl = self.model.left_mult(x);
        Ok(BoxElement::new(Space::M1, &xl * &k - &k * &xl))
    }

    /// Directional derivation ∂_j x = ω_j^{1/2}[x, 𝔉⁻¹(p_j)].
    pub fn directional_derivation(&self, j: usize, x: &CMatrix) -> Result<BoxElement> {
        let jump = &self.jump_decomposition().items[j];
        let fp = self.model.inverse_fourier(&BoxElement::b2(jump.projection.clone()))?.data;
        let xl = self.model.left_mult(x);
        Ok(BoxElement::new(Space::M1, (&xl * &fp - &fp * &xl).scale(jump.omega.sqrt())))
    }

    /// Gradient form Γ(x, y) = ½(y*L(x) + L(y)*x - L(y*x)).
    pub fn gradient_form(&self, x: &CMatrix, y: &CMatrix) -> CMatrix {
        let lx = self.apply_transfer(x);
        let ly = self.apply_transfer(y);
        let lyx = self.apply_transfer(&(y.adjoint() * x));
        (y.adjoint() * lx + ly.adjoint() * x - lyx).scale(0.5)
    }

    /// Γ via the convolution formula:
    /// 2Γ = y*(1∗L̂₀)x - y*(x∗L̂₀) - (y*∗L̂₀)x + (y*x)∗L̂₀.
    pub fn gradient_form_convolution(&self, x: &CMatrix, y: &CMatrix) -> Result<CMatrix> {
        let m = &self.model;
        let l0 = &self.l0.data;
        let one_star = m.apply_multiplier(l0, &identity(m.n()))?;
        let t1 = y.adjoint() * &one_star * x;
        let t2 = y.adjoint() * m.apply_multiplier(l0, x)?;
        let t3 = m.apply_multiplier(l0, &y.adjoint())? * x;
        let t4 = m.apply_multiplier(l0, &(y.adjoint() * x))?;
        Ok((t1 - t2 - t3 + t4).scale(0.5))
    }

    /// Γ via the directional derivations:
    /// 2Γ = λ^{-1/2} Σ_j E_M((∂_j y)*(∂_j x)).
    pub fn gradient_form_derivation(&self, x: &CMatrix, y: &CMatrix) -> Result<CMatrix> {
        let m = &self.model;
        let mut s = zeros(m.n(), m.n());
        for j in 0..self.jump_decomposition().items.len() {
            let dx = self.directional_derivation(j, x)?;
            let dy = self.directional_derivation(j, y)?;
            s += m.cond_expect_m(&BoxElement::new(Space::M1, dy.data.adjoint() * &dx.data))?;
        }
        Ok(s.scale(0.5 * self.model.lambda.powf(-0.5)))
    }

    /// Spectral-gap report of the Poincaré bound
    /// τ(Γ(x,x)) ≥ (β̂ - β)τ(x*x) for traceless x.
    pub fn poincare_margins(&self) -> Result<PoincareReport> {
        let m = &self.model;
        let l0 = &self.l0.data;
        let cs0 = crate::channel::convolution_support0(m, l0);
        let connected = numerics::max_abs(&(&cs0 - m.b2_identity())) < 1e-9;

        // 2beta = second-largest eigenvalue of F^{-1}(L0 + bar L0); Hermitian
        // by the rotation identity, asserted before eigensolving.
        let bar = m.contragredient(&self.l0)?.data;
        let sym = m.inverse_fourier(&BoxElement::b2(l0 + &bar))?.data;
        let res = numerics::herm_residual(&sym);
        if res > m.tol.rel(m.tol.herm_tol(), numerics::op_norm(&sym)) {
            return Err(Error::NotHermitian { residual: res });
        }
        let eig = numerics::herm_eig(&sym, &m.tol)?;
        let nn = eig.values.len();
        let beta = if nn >= 2 { eig.values[nn - 2] / 2.0 } else { eig.values[0] / 2.0 };

        // beta-hat: minimal eigenvalue of λ^{-1/2}E_M(|F^{-1}(L0^{1/2})|²),
        // taken over both corner orders.
        let sq = self.derivation_kernel()?;
        let g1 = m.cond_expect_m(&BoxElement::new(Space::M1, sq.adjoint() * &sq))?;
        let g2 = m.cond_expect_m(&BoxElement::new(Space::M1, &sq * sq.adjoint()))?;
        let b1 = numerics::herm_eig(&g1, &m.tol)?.values[0];
        let b2 = numerics::herm_eig(&g2, &m.tol)?.values[0];
        let beta_hat = m.lambda.powf(-0.5) * b1.min(b2);
        if connected && beta_hat <= 0.0 {
            return Err(Error::RelationViolation {
                what: format!("connected kernel but beta_hat = {beta_hat:.3e} not positive"),
            });
        }

        // irreducible-inclusion variant, diagnostic only
        let bound1_diagnostic = m.lambda.powf(-0.5) * m.tau2(l0).re - beta;

        Ok(PoincareReport { beta_hat, beta, connected, bound1_diagnostic })
    }

    /// Margin functional m(x) = τ(Γ(x,x)) - (β̂-β)τ(x*x).
    pub fn poincare_margin(&self, report: &PoincareReport, x: &CMatrix) -> f64 {
        let g = self.gradient_form(x, x);
        let m = &self.model;
        m.tau_m(&g).re - (report.beta_hat - report.beta) * m.tau_m(&(x.adjoint() * x)).re
    }
}

/// Split a generator multiplier into (L̂₀, L̂₁).
pub fn split_components(model: &InclusionModel, lhat: &CMatrix) -> (CMatrix, CMatrix) {
    let e2 = model.e2();
    let one = model.b2_identity();
    let q = &one - &e2;
    let l0 = model.b2_mul(&model.b2_mul(&q, lhat), &q).scale(-1.0);
    let l1 = model.b2_mul(&model.b2_mul(&e2, lhat), &q);
    (l0, l1)
}

/// Validity residuals of a candidate generator multiplier.
pub fn validate_multiplier(model: &InclusionModel, lhat: &CMatrix) -> ValidityReport {
    let tol = &model.tol;
    let herm_residual = model.b2_herm_residual(lhat);
    let scale = numerics::max_abs(lhat);

    // unitality: L(1) = 0 via the transfer route
    let transfer = model.transfer_of_multiplier(lhat).expect("shape");
    let one = model.vec_m(&identity(model.n()));
    let unitality_residual = (transfer * one).norm();

    let (l0, _) = split_components(model, lhat);
    let min_l0_eig = model
        .b2_eigenvalues(&(&l0 + &model.b2_adjoint(&l0)).scale(0.5))
        .map(|v| v[0])
        .unwrap_or(f64::NEG_INFINITY);

    let valid = herm_residual <= tol.rel(tol.herm_tol(), scale)
        && unitality_residual <= tol.rel(tol.eq_tol(), scale)
        && min_l0_eig >= -tol.rel(tol.eig_floor_tol(), scale);
    ValidityReport { herm_residual, unitality_residual, min_l0_eig, valid }
}

/// Random valid generator data (L₀ ≥ 0 in B₂, Hermitian L₁ ∈ M).
pub fn random_generator(model: &InclusionModel, rng: &mut impl rand::Rng) -> Lindbladian {
    let r = numerics::rand_complex(rng, model.dim_b2, model.dim_b2);
    let l0 = model.b2_mul(&model.b2_adjoint(&r), &r);
    let l1 = numerics::rand_hermitian(rng, model.n());
    let l1 = match model.kind {
        ModelKind::Spin(n) => CMatrix::from_fn(n, n, |i, j| if i == j { cr(l1[(i, i)].re) } else { numerics::ZERO }),
        ModelKind::FullMatrix(_) => l1,
    };
    Lindbladian::build(model, &l0, &l1).expect("construction satisfies the generator form")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inclusion::InclusionModel;
    use crate::instances::c4_example_transfer;
    use crate::numerics::{max_abs, rand_complex, rand_hermitian, unit, ZERO};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rand_m(model: &InclusionModel, rng: &mut ChaCha20Rng) -> CMatrix {
        match model.kind {
            ModelKind::Spin(n) => {
                let v = rand_complex(rng, n, 1);
                CMatrix::from_fn(n, n, |i, j| if i == j { v[(i, 0)] } else { ZERO })
            }
            ModelKind::FullMatrix(n) => rand_complex(rng, n, n),
        }
    }

    #[test]
    fn zero_generator_is_identity_flow() {
        for m in [InclusionModel::spin(3), InclusionModel::full_matrix(2)] {
            let l = Lindbladian::build(&m, &zeros(m.dim_b2, m.dim_b2), &zeros(m.n(), m.n())).unwrap();
            assert!(max_abs(&l.transfer) < 1e-13);
            let ch = l.evolve(1.7).unwrap();
            assert!(max_abs(&(&ch.transfer - identity(m.gns_dim))) < 1e-12);
        }
    }

    #[test]
    fn pure_hamiltonian_flow() {
        // L1 = h alone: L(x) = i[h, x], so evolve(t) x = e^{ith} x e^{-ith}
        let m = InclusionModel::full_matrix(2);
        let mut rng = ChaCha20Rng::seed_from_u64(30);
        let h = rand_hermitian(&mut rng, 2);
        let l = Lindbladian::build(&m, &zeros(4, 4), &h).unwrap();
        let x = rand_complex(&mut rng, 2, 2);
        let lx = l.apply_transfer(&x);
        let i = Complex64::new(0.0, 1.0);
        assert!(max_abs(&(&lx - (&h * &x - &x * &h).map(|z| z * i))) < 1e-12);
        // with Phi_t = e^{-tL} and L = i ad_h the flow is x -> e^{-ith} x e^{ith}
        let t = 0.8;
        let u = numerics::expm_general(&h.map(|z| z * i * cr(-t)));
        let evolved = l.evolve(t).unwrap().apply(&x);
        assert!(max_abs(&(&evolved - &u * &x * u.adjoint())) < 1e-10);
    }

    #[test]
    fn build_validates_and_splits() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        for m in [InclusionModel::spin(4), InclusionModel::full_matrix(3)] {
            let r = rand_complex(&mut rng, m.dim_b2, m.dim_b2);
            let l0 = m.b2_mul(&m.b2_adjoint(&r), &r);
            let l1 = match m.kind {
                ModelKind::Spin(n) => CMatrix::from_fn(n, n, |i, j| if i == j { cr(0.3 * i as f64) } else { ZERO }),
                ModelKind::FullMatrix(n) => rand_hermitian(&mut rng, n),
            };
            let l = Lindbladian::build(&m, &l0, &l1).unwrap();
            let rep = l.validate();
            assert!(rep.valid, "{rep:?}");
            // split recovers (1-e2) L0 (1-e2)
            let q = &m.b2_identity() - &m.e2();
            let expect = m.b2_mul(&m.b2_mul(&q, &l0), &q);
            assert!(max_abs(&(&l.l0.data - &expect)) < 1e-10);
            // L(1) = 0
            assert!(max_abs(&l.apply_transfer(&identity(m.n()))) < 1e-10);
        }
    }

    #[test]
    fn invalid_candidates_detected() {
        let m = InclusionModel::spin(4);
        let mut rng = ChaCha20Rng::seed_from_u64(32);
        let l = random_generator(&m, &mut rng);
        // sign-flip L0 inside lhat: positivity violated
        let flipped = &l.lhat.data + l.l0.data.scale(2.0);
        let rep = validate_multiplier(&m, &flipped);
        assert!(!rep.valid && rep.min_l0_eig < -1e-6);
        // unitality offset: add c·lambda^{-1/2} e2
        let offset = &l.lhat.data + m.e2().scale(0.7 * m.lambda.powf(-0.5));
        let rep = validate_multiplier(&m, &offset);
        assert!(!rep.valid && rep.unitality_residual > 1e-3);
        assert!(rep.herm_residual < 1e-12);
    }

    #[test]
    fn expectation_formula_matches_transfer() {
        let mut rng = ChaCha20Rng::seed_from_u64(33);
        for m in [InclusionModel::spin(3), InclusionModel::full_matrix(2)] {
            let l = random_generator(&m, &mut rng);
            for _ in 0..5 {
                let x = rand_m(&m, &mut rng);
                let a = l.apply(&x).unwrap();
                let b = l.apply_transfer(&x);
                assert!(max_abs(&(&a - &b)) < 1e-9 * (1.0 + max_abs(&b)), "{:?}", m.kind);
            }
        }
    }

    #[test]
    fn validity_iff_cp_evolution() {
        let mut rng = ChaCha20Rng::seed_from_u64(34);
        let m = InclusionModel::full_matrix(2);
        for _ in 0..10 {
            let l = random_generator(&m, &mut rng);
            for t in [0.1, 1.0, 10.0] {
                assert!(l.evolve(t).unwrap().classify().cp);
            }
            // corrupt: flip the sign of L0hat inside lhat
            let bad = &l.lhat.data + l.l0.data.scale(2.0);
            assert!(!validate_multiplier(&m, &bad).valid);
            let t_bad = m.transfer_of_multiplier(&bad).unwrap();
            let ch = BimoduleChannel::from_superoperator(&m, &numerics::expm_general(&t_bad.scale(-1.0))).unwrap();
            assert!(!ch.classify().cp, "invalid generator must break CP at t=1");
        }
    }

    #[test]
    fn c4_generator_velocity() {
        // the printed 4x4 kernel gives transfer I - P on diagonals
        let m = InclusionModel::spin(4);
        let p = c4_example_transfer();
        let l0 = m.multiplier_of_transfer(&p).unwrap();
        let l = Lindbladian::build(&m, &l0, &zeros(4, 4)).unwrap();
        assert!(l.validate().valid);
        assert!(max_abs(&(&l.transfer - (identity(4) - &p))) < 1e-12);
        // heat semigroup on the weighted graph: evolve(t) = expm(-t(I-P))
        let t = 0.9;
        let ch = l.evolve(t).unwrap();
        let direct = numerics::expm_general(&(identity(4) - &p).scale(-t));
        assert!(max_abs(&(&ch.transfer - &direct)) < 1e-11);
    }

    #[test]
    fn semigroup_property() {
        let mut rng = ChaCha20Rng::seed_from_u64(35);
        for m in [InclusionModel::spin(3), InclusionModel::full_matrix(2)] {
            let l = random_generator(&m, &mut rng);
            let a = l.evolve(0.4).unwrap();
            let b = l.evolve(0.9).unwrap();
            let ab = a.compose(&b).unwrap();
            let direct = l.evolve(1.3).unwrap();
            assert!(max_abs(&(&ab.transfer - &direct.transfer)) < 1e-9);
            let id = l.evolve(0.0).unwrap();
            assert!(max_abs(&(&id.transfer - identity(m.gns_dim))) < 1e-12);
        }
    }

    #[test]
    fn jump_reconstruction_and_normalization() {
        let mut rng = ChaCha20Rng::seed_from_u64(36);
        let m = InclusionModel::full_matrix(3);
        let l = random_generator(&m, &mut rng);
        let jd = l.jump_decomposition();
        // reconstruction sum w_j p_j = L0hat
        let mut recon = zeros(m.dim_b2, m.dim_b2);
        for j in &jd.items {
            recon += j.projection.scale(j.omega);
        }
        assert!(max_abs(&(&recon - &l.l0.data)) < 1e-9 * (1.0 + max_abs(&l.l0.data)));
        // orthogonality and e2-annihilation
        let e2 = m.e2();
        for (i, a) in jd.items.iter().enumerate() {
            assert!(max_abs(&(m.b2_mul(&a.projection, &e2))) < 1e-9);
            for (k, b) in jd.items.iter().enumerate() {
                let prod = m.b2_mul(&a.projection, &b.projection);
                if i == k {
                    assert!(max_abs(&(&prod - &a.projection)) < 1e-8);
                } else {
                    assert!(max_abs(&prod) < 1e-8);
                }
            }
            // jump operator normalization
            for v in &a.operators {
                assert!(m.tau_m(v).norm() < 1e-9, "tau(v) = 0");
                assert!((m.tau_m(&(v * v.adjoint())).re - m.lambda.sqrt()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rank_one_jump_worked_example() {
        // L0hat = w * (minimal projection from unitary u): one jump v ~ u,
        // L(x) = w(x - u* x u) up to trace normalization
        let m = InclusionModel::full_matrix(2);
        let u = {
            // traceless unitary: Pauli-x
            numerics::from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
        };
        let v = u.scale(1.0 / 2.0f64.sqrt()); // tau(vv*) = 1/2 = lambda^{1/2}
        let xi = CMatrix::from_fn(4, 1, |i, _| v[(i / 2, i % 2)].conj());
        let p = &xi * xi.adjoint();
        let omega = 1.3;
        let l = Lindbladian::build(&m, &p.scale(omega), &zeros(2, 2)).unwrap();
        let jd = l.jump_decomposition();
        assert_eq!(jd.items.len(), 1);
        assert!((jd.items[0].omega - omega).abs() < 1e-10);
        let mut rng = ChaCha20Rng::seed_from_u64(37);
        let x = rand_complex(&mut rng, 2, 2);
        let expect = (&x - u.adjoint() * &x * &u).scale(omega * 0.5);
        assert!(max_abs(&(l.apply_transfer(&x) - expect)) < 1e-10);
    }

    #[test]
    fn gkls_equivalence() {
        let mut rng = ChaCha20Rng::seed_from_u64(38);
        for n in [2usize, 3] {
            let m = InclusionModel::full_matrix(n);
            for _ in 0..5 {
                let l = random_generator(&m, &mut rng);
                for _ in 0..3 {
                    let x = rand_complex(&mut rng, n, n);
                    let a = l.apply_gkls(&x).unwrap();
                    let b = l.apply_transfer(&x);
                    assert!(max_abs(&(&a - &b)) < 1e-9 * (1.0 + max_abs(&b)));
                }
            }
        }
    }

    #[test]
    fn gradient_form_three_routes() {
        let mut rng = ChaCha20Rng::seed_from_u64(39);
        for m in [InclusionModel::spin(4), InclusionModel::full_matrix(2)] {
            let l = random_generator(&m, &mut rng);
            for _ in 0..5 {
                let x = rand_m(&m, &mut rng);
                let y = rand_m(&m, &mut rng);
                let g = l.gradient_form(&x, &y);
                let gc = l.gradient_form_convolution(&x, &y).unwrap();
                let gd = l.gradient_form_derivation(&x, &y).unwrap();
                let scale = 1.0 + max_abs(&g);
                assert!(max_abs(&(&g - &gc)) < 1e-10 * scale, "{:?}", m.kind);
                assert!(max_abs(&(&g - &gd)) < 1e-8 * scale, "{:?}", m.kind);
                // positivity of Gamma(x,x)
                let gxx = l.gradient_form(&x, &x);
                let h = (&gxx + gxx.adjoint()).scale(0.5);
                let min = numerics::herm_eig(&h, &m.tol).unwrap().values[0];
                assert!(min > -1e-9 * scale);
                // scalars are flat
                let one = identity(m.n());
                assert!(max_abs(&l.gradient_form(&one, &one)) < 1e-10);
                assert!(max_abs(&l.derivation(&one).unwrap().data) < 1e-10);
            }
        }
    }

    #[test]
    fn directional_derivations_sum_and_orthogonality() {
        let mut rng = ChaCha20Rng::seed_from_u64(40);
        let m = InclusionModel::full_matrix(2);
        let l = random_generator(&m, &mut rng);
        let x = rand_complex(&mut rng, 2, 2);
        let total = l.derivation(&x).unwrap().data;
        let mut sum = zeros(m.dim_b1, m.dim_b1);
        let count = l.jump_decomposition().items.len();
        for j in 0..count {
            sum += l.directional_derivation(j, &x).unwrap().data;
        }
        assert!(max_abs(&(&sum - &total)) < 1e-9 * (1.0 + max_abs(&total)));
        // dj* dk = 0 for j != k: tau1((dj y)* (dk x)) = 0 for all x, y
        for j in 0..count {
            for k in 0..count {
                if j == k {
                    continue;
                }
                let y = rand_complex(&mut rng, 2, 2);
                let dj = l.directional_derivation(j, &y).unwrap().data;
                let dk = l.directional_derivation(k, &x).unwrap().data;
                let ip = numerics::ntrace(&(dj.adjoint() * dk));
                assert!(ip.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn laplacian_identity() {
        // (lambda^{-1/2}/2)(d*d + dbar*dbar) = L_a + L_abar as superoperators
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        for m in [InclusionModel::spin(3), InclusionModel::full_matrix(2)] {
            let l = random_generator(&m, &mut rng);
            let d = m.gns_dim;
            let dim_m1 = m.dim_b1;
            // assemble the derivation superoperators on the matrix-unit basis of M
            let mut basis: Vec<CMatrix> = Vec::new();
            match m.kind {
                ModelKind::Spin(n) => {
                    for i in 0..n {
                        basis.push(unit(n, i, i));
                    }
                }
                ModelKind::FullMatrix(n) => {
                    for i in 0..n {
                        for j in 0..n {
                            basis.push(unit(n, i, j));
                        }
                    }
                }
            }
            let mut pd = zeros(dim_m1 * dim_m1, d);
            let mut pb = zeros(dim_m1 * dim_m1, d);
            for (col, b) in basis.iter().enumerate() {
                let dx = l.derivation(b).unwrap().data;
                let bx = l.conj_derivation(b).unwrap().data;
                for r in 0..dim_m1 {
                    for ccc in 0..dim_m1 {
                        pd[(r * dim_m1 + ccc, col)] = dx[(r, ccc)];
                        pb[(r * dim_m1 + ccc, col)] = bx[(r, ccc)];
                    }
                }
            }
            // adjoints with the tau/tau1 scaling: dims ratio dim_m1^2 / gns-dim handled by
            // <A, B>_M1 = Tr(B* A)/dim_m1 and <a,b>_M = Tr(b* a)/n where the vec-basis
            // Gram of M is: Spin diag units orthonormal up to 1/n; FullMatrix units 1/n.
            let ratio = cr(m.n() as f64 / dim_m1 as f64);
            let lap = (pd.adjoint() * &pd + pb.adjoint() * &pb).map(|z| z * ratio).scale(0.5 * m.lambda.powf(-0.5));

            // L_a + L_abar superoperator on the same basis
            let one = identity(m.n());
            let bar_l0 = m.contragredient(&l.l0).unwrap().data;
            let one_star = m.apply_multiplier(&l.l0.data, &one).unwrap();
            let one_star_bar = m.apply_multiplier(&bar_l0, &one).unwrap();
            let mut lab = zeros(d, d);
            for (col, b) in basis.iter().enumerate() {
                let v = (&one_star * b + b * &one_star).scale(0.5)
                    + (&one_star_bar * b + b * &one_star_bar).scale(0.5)
                    - m.apply_multiplier(&l.l0.data, b).unwrap()
                    - m.apply_multiplier(&bar_l0, b).unwrap();
                let vv = m.vec_m(&v);
                for r in 0..d {
                    lab[(r, col)] = vv[r];
                }
            }
            assert!(max_abs(&(&lap - &lab)) < 1e-9 * (1.0 + max_abs(&lab)), "{:?}", m.kind);
        }
    }

    #[test]
    fn poincare_complete_graph() {
        // complete-graph kernel: F(L0) = adjacency of K_n; spectrum n-1, -1 by hand
        let n = 4;
        let m = InclusionModel::spin(n);
        let adj = CMatrix::from_fn(n, n, |i, j| if i != j { cr(1.0) } else { ZERO });
        let l0 = m.multiplier_of_transfer(&adj).unwrap();
        let l = Lindbladian::build(&m, &l0, &zeros(n, n)).unwrap();
        let rep = l.poincare_margins().unwrap();
        assert!(rep.connected);
        // F^{-1}(L0 + bar L0) = (c + c^T)/sqrt(n) with c = sqrt(n) adj^T: = 2 adj
        // eigenvalues {2(n-1), -2}: second largest is -2, so beta = -1
        assert!((rep.beta + 1.0).abs() < 1e-9, "beta = {}", rep.beta);
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        for _ in 0..100 {
            let mut x = rand_m(&m, &mut rng);
            let t = m.tau_m(&x);
            for i in 0..n {
                x[(i, i)] -= t;
            }
            assert!(l.poincare_margin(&rep, &x) > -1e-9);
        }
    }

    #[test]
    fn poincare_disconnected_reports() {
        let m = InclusionModel::spin(4);
        let block = numerics::from_real_rows(
            4,
            4,
            &[0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.],
        )
        .unwrap();
        let l0 = m.multiplier_of_transfer(&block).unwrap();
        let l = Lindbladian::build(&m, &l0, &zeros(4, 4)).unwrap();
        let rep = l.poincare_margins().unwrap();
        assert!(!rep.connected);
    }

    #[test]
    fn c4_poincare_margins() {
        let m = InclusionModel::spin(4);
        let p = c4_example_transfer();
        let l0 = m.multiplier_of_transfer(&p).unwrap();
        let l = Lindbladian::build(&m, &l0, &zeros(4, 4)).unwrap();
        let rep = l.poincare_margins().unwrap();
        assert!(rep.connected);
        let mut rng = ChaCha20Rng::seed_from_u64(43);
        for _ in 0..100 {
            let mut x = rand_m(&m, &mut rng);
            let t = m.tau_m(&x);
            for i in 0..4 {
                x[(i, i)] -= t;
            }
            assert!(l.poincare_margin(&rep, &x) > -1e-9);
        }
    }

    #[test]
    fn gauge_invariance_under_degenerate_clusters() {
        // two equal-weight orthogonal rank-one projections form one cluster;
        // downstream quantities must not depend on the basis chosen inside it
        let m = InclusionModel::full_matrix(2);
        let mk = |a: &CMatrix| {
            let xi = CMatrix::from_fn(4, 1, |i, _| a[(i / 2, i % 2)].conj());
            &xi * xi.adjoint()
        };
        let v1 = numerics::from_real_rows(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap() * cr(2.0f64.sqrt() / 2.0f64.sqrt());
        let v1 = v1.scale(1.0 / numerics::ntrace(&(&v1 * v1.adjoint())).re.sqrt() * m.lambda.powf(0.25));
        let v2 = numerics::from_real_rows(2, 2, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        let v2 = v2.scale(1.0 / numerics::ntrace(&(&v2 * v2.adjoint())).re.sqrt() * m.lambda.powf(0.25));
        let l0 = (mk(&v1) + mk(&v2)).scale(0.8);
        let l = Lindbladian::build(&m, &l0, &zeros(2, 2)).unwrap();
        let jd = l.jump_decomposition();
        assert_eq!(jd.items.len(), 1, "degenerate eigenvalues share one cluster");
        assert!(jd.gauge_note);
        assert_eq!(jd.items[0].operators.len(), 2);
        // GKLS route still matches independent of gauge
        let mut rng = ChaCha20Rng::seed_from_u64(44);
        let x = rand_complex(&mut rng, 2, 2);
        assert!(max_abs(&(l.apply_gkls(&x).unwrap() - l.apply_transfer(&x))) < 1e-9);
    }
}
