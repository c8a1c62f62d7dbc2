//! Bimodule quantum channels represented by Fourier multipliers: conversion
//! to and from transfer matrices, structural classification, composition,
//! Cesàro means, convolution supports and fixed-point spaces.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::inclusion::{BoxElement, InclusionModel, Space};
use crate::numerics::{self, cr, identity, zeros, CMatrix};

/// A channel represented by its Fourier multiplier in B₂ together with the
/// cached transfer matrix on the GNS space (the representation of 𝔉(Φ̂)
/// acting by left multiplication on L²(M)).
#[derive(Clone, Debug)]
pub struct BimoduleChannel {
    pub model: InclusionModel,
    pub multiplier: BoxElement,
    pub transfer: CMatrix,
}

/// Structural classification of a channel.
#[derive(Clone, Debug)]
pub struct ClassifyReport {
    pub cp: bool,
    pub unital: bool,
    pub trace_preserving: bool,
    /// Smallest eigenvalue of the multiplier (the CP witness when negative).
    pub min_multiplier_eig: f64,
    pub unital_residual: f64,
    pub trace_residual: f64,
    /// Disagreement between the transfer route and the conditional-expectation
    /// formula route for Φ, checked on a basis of M.
    pub expectation_residual: f64,
}

/// Three-valued relative-irreducibility certificate.
#[derive(Clone, Debug, PartialEq)]
pub enum Irreducibility {
    /// Full convolution support CS(Φ̂) = 1, a sufficient condition.
    YesByConvolutionSupport,
    /// A non-scalar projection fixed by the channel.
    NoByWitnessProjection,
    Unknown,
}

impl BimoduleChannel {
    /// Channel from its B₂ multiplier.
    pub fn from_multiplier(model: &InclusionModel, multiplier: CMatrix) -> Result<Self> {
        if multiplier.nrows() != model.dim_b2 || multiplier.ncols() != model.dim_b2 {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0}", model.dim_b2),
                got: format!("{}x{}", multiplier.nrows(), multiplier.ncols()),
            });
        }
        let transfer = model.transfer_of_multiplier(&multiplier)?;
        Ok(BimoduleChannel {
            model: model.clone(),
            multiplier: BoxElement::b2(multiplier),
            transfer,
        })
    }

    /// Channel from a superoperator on the GNS space (for Spin this is the
    /// n×n action on diagonal coordinates).
    pub fn from_superoperator(model: &InclusionModel, t: &CMatrix) -> Result<Self> {
        let multiplier = model.multiplier_of_transfer(t)?;
        // round trip is exact for these models; residual kept as a guard
        let back = model.transfer_of_multiplier(&multiplier)?;
        let res = numerics::max_abs(&(&back - t));
        if res > 1e-12 * (1.0 + numerics::max_abs(t)) {
            return Err(Error::NotBimodule { residual: res });
        }
        Ok(BimoduleChannel {
            model: model.clone(),
            multiplier: BoxElement::b2(multiplier),
            transfer: t.clone(),
        })
    }

    /// The identity channel.
    pub fn identity_channel(model: &InclusionModel) -> Self {
        BimoduleChannel::from_superoperator(model, &identity(model.gns_dim)).expect("identity is bimodule")
    }

    pub fn to_superoperator(&self) -> CMatrix {
        self.transfer.clone()
    }

    /// Apply the channel to x ∈ M through the transfer matrix.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let v = self.model.vec_m(x);
        self.model.unvec_m(&(&self.transfer * v))
    }

    /// Apply through the conditional-expectation formula
    /// Φ(x) = λ^{-5/2} E_M(e₂e₁ Φ̂ x e₁e₂); cross-check route.
    pub fn apply_via_expectation(&self, x: &CMatrix) -> CMatrix {
        self.model.apply_via_expectation(&self.multiplier.data, x)
    }

    /// Structural report: complete positivity, unitality, trace preservation,
    /// and the two-route consistency residual.
    pub fn classify(&self) -> ClassifyReport {
        let m = &self.model;
        let tol = &m.tol;
        let mult = &self.multiplier.data;
        let herm = m.b2_herm_residual(mult);
        let min_eig = if herm <= tol.rel(tol.herm_tol(), numerics::max_abs(mult)) {
            m.b2_eigenvalues(mult).map(|v| v[0]).unwrap_or(f64::NEG_INFINITY)
        } else {
            f64::NEG_INFINITY // non-Hermitian multiplier is never CP
        };
        let cp = min_eig >= -tol.rel(tol.eig_floor_tol(), numerics::max_abs(mult));

        let one = identity(m.n());
        let unital_residual = numerics::max_abs(&(self.apply(&one) - &one));
        let unital = unital_residual <= tol.eq_tol();

        // tau(Phi(x)) = tau(x) on a basis  <=>  T^† vec(1) = vec(1)
        let v1 = m.vec_m(&one);
        let trace_residual = (self.transfer.adjoint() * &v1 - &v1).norm();
        let trace_preserving = trace_residual <= tol.eq_tol();

        let expectation_residual = self.expectation_residual();

        ClassifyReport { cp, unital, trace_preserving, min_multiplier_eig: min_eig, unital_residual, trace_residual, expectation_residual }
    }

    /// Max disagreement of the two apply routes over the matrix-unit basis.
    /// For large models the basis is subsampled: the cross-check stays
    /// exercised while the M₂-representation products stay affordable.
    pub fn expectation_residual(&self) -> f64 {
        let n = self.model.n();
        let stride = if self.model.m2_dim() > 256 { (n / 2).max(1) } else { 1 };
        let mut worst: f64 = 0.0;
        for j in (0..n).step_by(stride) {
            for k in (0..n).step_by(stride) {
                if self.model.gns_dim == n && j != k {
                    continue; // Spin basis is diagonal
                }
                let x = numerics::unit(n, j, k);
                let a = self.apply(&x);
                let b = self.apply_via_expectation(&x);
                worst = worst.max(numerics::max_abs(&(a - b)));
            }
        }
        worst
    }

    /// Composition Φ∘Ψ; multipliers convolve in the opposite order.
    pub fn compose(&self, other: &BimoduleChannel) -> Result<BimoduleChannel> {
        if self.model.kind != other.model.kind {
            return Err(Error::ModelMismatch);
        }
        let mult = self
            .model
            .convolve(&other.multiplier, &self.multiplier)?;
        BimoduleChannel::from_multiplier(&self.model, mult.data)
    }

    /// Adjoint channel with respect to τ: transfer is the Frobenius adjoint,
    /// multiplier is conj(Φ̂)* (= conj(Φ̂) for CP channels).
    pub fn adjoint(&self) -> BimoduleChannel {
        BimoduleChannel::from_superoperator(&self.model, &self.transfer.adjoint())
            .expect("adjoint transfer is bimodule")
    }

    /// Spectral radius estimate of the transfer matrix: Gelfand limit
    /// ‖T^{2^k}‖^{1/2^k} with normalized repeated squaring.
    pub fn spectral_radius(&self) -> f64 {
        let mut a = self.transfer.clone();
        let mut log_r = 0.0f64;
        let k = 16;
        for i in 0..k {
            let nrm = numerics::op_norm(&a);
            if nrm == 0.0 {
                return 0.0;
            }
            log_r += nrm.ln() * 0.5f64.powi(i);
            a = (&a * &a).scale(1.0 / (nrm * nrm));
        }
        log_r += numerics::op_norm(&a).ln() * 0.5f64.powi(k);
        log_r.exp()
    }

    /// Cesàro mean lim (1/ℓ) Σ Φᵏ, computed as the spectral projection of the
    /// transfer at eigenvalue 1 (peripheral spectrum is semisimple for
    /// power-bounded transfers).
    pub fn cesaro_mean(&self) -> Result<BimoduleChannel> {
        let radius = self.spectral_radius();
        if radius > 1.0 + 1e-4 {
            return Err(Error::NotPowerBounded { radius });
        }
        let d = self.model.gns_dim;
        let a = &self.transfer - identity(d);
        // C^d = ker(T-1) ⊕ ran(T-1); the mean projects onto the kernel along the range.
        let (kernel, range) = numerics::kernel_range_split(&a, &self.model.tol, 1e-9);
        let kdim = kernel.len();
        let mut basis = zeros(d, d);
        for (i, col) in kernel.iter().chain(range.iter()).enumerate() {
            basis.set_column(i, col);
        }
        let inv = basis.clone().lu().try_inverse().ok_or(Error::NotPowerBounded { radius })?;
        // E = [K 0] * basis^{-1}
        let mut ke = zeros(d, d);
        for i in 0..kdim {
            ke.set_column(i, &basis.column(i).into_owned());
        }
        let e = ke * inv;
        BimoduleChannel::from_superoperator(&self.model, &e)
    }

    /// Basis of the fixed-point space M(Φ) (eigenspace of the transfer at 1),
    /// returned as elements of M.
    pub fn fixed_points(&self) -> Vec<CMatrix> {
        let d = self.model.gns_dim;
        let a = &self.transfer - identity(d);
        numerics::kernel_basis(&a, &self.model.tol, 1e-9)
            .iter()
            .map(|v| self.model.unvec_m(v))
            .collect()
    }

    /// Relative-irreducibility certificate.
    pub fn relative_irreducibility(&self) -> Irreducibility {
        let cs = convolution_support(&self.model, &self.multiplier.data);
        let one = self.model.b2_identity();
        if numerics::max_abs(&(&cs - &one)) < 1e-9 {
            return Irreducibility::YesByConvolutionSupport;
        }
        // search spectral projections of Hermitian fixed points for a witness
        let fixed = self.fixed_points();
        for f in &fixed {
            let h = (f + f.adjoint()).scale(0.5);
            if let Ok(eig) = numerics::herm_eig(&h, &self.model.tol) {
                let vals = &eig.values;
                if vals.last().unwrap_or(&0.0) - vals.first().unwrap_or(&0.0) < 1e-9 {
                    continue; // scalar
                }
                // spectral projection below the largest gap
                let mut split = 0;
                let mut best_gap = 0.0;
                for i in 1..vals.len() {
                    if vals[i] - vals[i - 1] > best_gap {
                        best_gap = vals[i] - vals[i - 1];
                        split = i;
                    }
                }
                let n = h.nrows();
                let mut p = zeros(n, n);
                for i in 0..split {
                    let col = eig.vectors.column(i);
                    p += &col * col.adjoint();
                }
                // Phi(p) <= c p with c = largest eigenvalue along p?
                let fp = self.apply(&p);
                let c = numerics::op_norm(&fp) + 1.0;
                let q = identity(n) - &p;
                let leak = numerics::op_norm(&(&q * &fp * &q)) + numerics::op_norm(&(&q * &fp * &p));
                if leak < 1e-8 * c {
                    return Irreducibility::NoByWitnessProjection;
                }
            }
        }
        Irreducibility::Unknown
    }

    /// Diagnostic for the convolution commutator bound: returns
    /// (min eigenvalue of lhs - rhs) for
    /// Φ(x*x) + x*Φ(1)x - x*Φ(x) - Φ(x*)x  ≥  λ^{1/2}|[x, 𝔉⁻¹(Φ̂^{1/2})]|².
    pub fn commutator_bound_margin(&self, x: &CMatrix) -> Result<f64> {
        let m = &self.model;
        let sq = m.b2_fun(&self.multiplier.data, numerics::MatFun::Sqrt, true)?;
        let f = m.inverse_fourier(&BoxElement::b2(sq))?;
        let xl = m.left_mult(x);
        let comm = &xl * &f.data - &f.data * &xl;
        let rhs_m1 = comm.adjoint() * &comm;
        let rhs = m.cond_expect_m(&BoxElement::new(Space::M1, rhs_m1))?.scale(m.lambda.sqrt());
        let one = identity(m.n());
        let lhs = self.apply(&(x.adjoint() * x))
            + x.adjoint() * self.apply(&one) * x
            - x.adjoint() * self.apply(x)
            - self.apply(&x.adjoint()) * x;
        let diff = lhs - rhs;
        let h = (&diff + diff.adjoint()).scale(0.5);
        Ok(numerics::herm_eig(&h, &m.tol)?.values[0])
    }
}

/// Convolution support projection CS(x): join of range projections of all
/// finite convolution words in {x, x̄}. For positive x this equals the join
/// over k of R((x + x̄)^{∗k}); iteration caps at dim(B₂) rounds.
pub fn convolution_support(model: &InclusionModel, x: &CMatrix) -> CMatrix {
    let bar = model
        .contragredient(&BoxElement::b2(x.clone()))
        .expect("B2 element");
    let s = x + &bar.data;
    cs_join(model, &s)
}

/// CS₀(x): join over k ≥ 1 of R(x^{∗k}).
pub fn convolution_support0(model: &InclusionModel, x: &CMatrix) -> CMatrix {
    cs_join(model, x)
}

fn cs_join(model: &InclusionModel, s: &CMatrix) -> CMatrix {
    let rounds = model.dim_b2 * model.dim_b2;
    let mut word = s.clone();
    let mut projs = vec![model.b2_range_projection(&word)];
    let mut join = projs[0].clone();
    for _ in 1..rounds.min(64) {
        word = model
            .convolve(&BoxElement::b2(word.clone()), &BoxElement::b2(s.clone()))
            .expect("B2 elements")
            .data;
        let nrm = numerics::max_abs(&word);
        if nrm > 0.0 {
            word = word.scale(1.0 / nrm); // keep word powers normalized
        }
        projs.push(model.b2_range_projection(&word));
        let next = model.b2_join(&projs);
        if numerics::max_abs(&(&next - &join)) < 1e-12 {
            join = next;
            break;
        }
        join = next;
    }
    join
}

/// Choi matrix Σ E_jk ⊗ Φ(E_jk) of a FullMatrix-model superoperator.
pub fn choi_matrix(model: &InclusionModel, transfer: &CMatrix) -> CMatrix {
    let n = model.n();
    let mut out = zeros(n * n, n * n);
    for j in 0..n {
        for k in 0..n {
            let e = numerics::unit(n, j, k);
            let fe = model.unvec_m(&(transfer * model.vec_m(&e)));
            for a in 0..n {
                for b in 0..n {
                    out[(j * n + a, k * n + b)] += fe[(a, b)];
                }
            }
        }
    }
    out
}

/// Davies-type random CP unital channel on the given model (for tests and
/// seeded probes): a convex mixture of conjugation channels, plus identity.
pub fn random_cp_unital(model: &InclusionModel, rng: &mut impl rand::Rng, terms: usize) -> BimoduleChannel {
    let d = model.gns_dim;
    let mut t = zeros(d, d);
    let mut wsum = 0.0;
    for _ in 0..terms {
        let w: f64 = rng.gen::<f64>() + 0.1;
        wsum += w;
        match model.kind {
            crate::inclusion::ModelKind::Spin(n) => {
                // random stochastic matrix row
                let mut row = CMatrix::from_fn(n, n, |_, _| cr(rng.gen::<f64>() + 0.05));
                for i in 0..n {
                    let s: Complex64 = (0..n).map(|j| row[(i, j)]).sum();
                    for j in 0..n {
                        row[(i, j)] /= s;
                    }
                }
                t += row.scale(w);
            }
            crate::inclusion::ModelKind::FullMatrix(n) => {
                // unitary conjugation x -> u* x u has transfer kron(u*, u^T)
                let h = numerics::rand_hermitian(rng, n);
                let u = numerics::expm_general(&h.map(|z| z * Complex64::new(0.0, 1.0)));
                t += numerics::kron(&u.adjoint(), &u.transpose()).scale(w);
            }
        }
    }
    t = t.scale(1.0 / wsum);
    BimoduleChannel::from_superoperator(model, &t).expect("bimodule by construction")
}
