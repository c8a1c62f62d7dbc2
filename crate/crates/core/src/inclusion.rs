//! Concrete λ-extensions: the spin inclusion ℂ ⊂ ℂⁿ and the full matrix
//! inclusion ℂ ⊂ Mₙ(ℂ), with their box spaces, Fourier transforms, traces,
//! Jones elements, embeddings and conditional expectations.
//!
//! Coordinate conventions (fixed once, conformance-tested against the
//! conditional-expectation formulas):
//!
//! Spin(n), λ = 1/n. B₁ = Mₙ acting on L²(M) = ℂⁿ. B₂ is commutative and is
//! stored as an n×n coefficient array over the basis E_jj⊗E_kk (entrywise
//! product). Then
//!   fourier(X)        = √n · X          (entrywise, B₁ → B₂)
//!   inverse_fourier(c) = c / √n
//!   contragredient     = transpose on both spaces.
//!
//! FullMatrix(n), λ = 1/n². B₁ = M_{n²} on vec(M) with row-major
//! vectorization vec(x)[j·n+k] = x_{jk}; left multiplication is x⊗I, right
//! multiplication is I⊗xᵀ. B₂ = Mₙ⊗Mₙ as an n²×n² matrix (row-major
//! Kronecker). Then, writing 4-index entries X[(a,b),(c,d)],
//!   fourier(X)[(k,q),(j,p)]        = X[(j,k),(p,q)]
//!   inverse_fourier(Y)[(a,b),(c,d)] = Y[(b,d),(a,c)]
//!   contragredient(Z)[(a,b),(c,d)]  = Z[(d,c),(b,a)]   on both spaces.
//!
//! The dual-directed transform (B₂ → B₁) is contragredient ∘ inverse_fourier
//! in every model; this realizes 𝔉² = contragredient and 𝔉⁴ = id.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{self, cr, identity, kron, unit, zeros, CMatrix, MatFun, ONE, ZERO};
use crate::tol::Tol;

/// Which box space an element lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    B1,
    B2,
    M,
    M1,
}

/// An element of a box space, tagged with the space it belongs to.
#[derive(Clone, Debug)]
pub struct BoxElement {
    pub space: Space,
    pub data: CMatrix,
}

impl BoxElement {
    pub fn new(space: Space, data: CMatrix) -> Self {
        BoxElement { space, data }
    }

    pub fn b2(data: CMatrix) -> Self {
        BoxElement::new(Space::B2, data)
    }

    pub fn b1(data: CMatrix) -> Self {
        BoxElement::new(Space::B1, data)
    }

    fn expect(&self, space: Space) -> Result<&CMatrix> {
        if self.space == space {
            Ok(&self.data)
        } else {
            Err(Error::WrongSpace { expected: space, got: self.space })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Spin(usize),
    FullMatrix(usize),
}

/// The full algebraic datum of a λ-extension at desk scale.
#[derive(Clone, Debug)]
pub struct InclusionModel {
    pub kind: ModelKind,
    pub lambda: f64,
    /// Complex dimension of M.
    pub dim_m: usize,
    /// Matrix dimension of the B₁ representation (= M₁ here since N = ℂ).
    pub dim_b1: usize,
    /// Matrix dimension of the B₂ representation (coefficient array for Spin).
    pub dim_b2: usize,
    /// Dimension of L²(M).
    pub gns_dim: usize,
    pub tol: Tol,
}

impl InclusionModel {
    pub fn spin(n: usize) -> Self {
        assert!(n >= 1);
        InclusionModel {
            kind: ModelKind::Spin(n),
            lambda: 1.0 / n as f64,
            dim_m: n,
            dim_b1: n,
            dim_b2: n,
            gns_dim: n,
            tol: Tol::default(),
        }
    }

    pub fn full_matrix(n: usize) -> Self {
        assert!(n >= 1);
        InclusionModel {
            kind: ModelKind::FullMatrix(n),
            lambda: 1.0 / (n * n) as f64,
            dim_m: n * n,
            dim_b1: n * n,
            dim_b2: n * n,
            gns_dim: n * n,
            tol: Tol::default(),
        }
    }

    pub fn with_tol(mut self, tol: Tol) -> Self {
        self.tol = tol;
        self
    }

    pub fn n(&self) -> usize {
        match self.kind {
            ModelKind::Spin(n) | ModelKind::FullMatrix(n) => n,
        }
    }

    fn is_spin(&self) -> bool {
        matches!(self.kind, ModelKind::Spin(_))
    }

    // ---- 4-index reshuffles for the FullMatrix model ----

    fn perm4(&self, x: &CMatrix, f: impl Fn(usize, usize, usize, usize) -> (usize, usize, usize, usize)) -> CMatrix {
        let n = self.n();
        let mut out = zeros(n * n, n * n);
        for a in 0..n {
            for b in 0..n {
                for cc in 0..n {
                    for d in 0..n {
                        let (p, q, r, s) = f(a, b, cc, d);
                        out[(a * n + b, cc * n + d)] = x[(p * n + q, r * n + s)];
                    }
                }
            }
        }
        out
    }

    // ---- Fourier calculus ----

    /// 𝔉 : B₁ → B₂.
    pub fn fourier(&self, x: &BoxElement) -> Result<BoxElement> {
        let m = x.expect(Space::B1)?;
        let data = match self.kind {
            ModelKind::Spin(n) => m.scale((n as f64).sqrt()),
            ModelKind::FullMatrix(_) => self.perm4(m, |a, b, cc, d| (cc, a, d, b)),
        };
        Ok(BoxElement::b2(data))
    }

    /// 𝔉⁻¹ : B₂ → B₁, inverse of [`Self::fourier`].
    pub fn inverse_fourier(&self, y: &BoxElement) -> Result<BoxElement> {
        let m = y.expect(Space::B2)?;
        let data = match self.kind {
            ModelKind::Spin(n) => m.scale(1.0 / (n as f64).sqrt()),
            ModelKind::FullMatrix(_) => self.perm4(m, |a, b, cc, d| (b, d, a, cc)),
        };
        Ok(BoxElement::b1(data))
    }

    /// 180-degree rotation x̄ = Jx*J on B₁ or B₂.
    pub fn contragredient(&self, x: &BoxElement) -> Result<BoxElement> {
        let data = match (&x.space, self.kind) {
            (Space::B1, ModelKind::Spin(_)) | (Space::B2, ModelKind::Spin(_)) => x.data.transpose(),
            (Space::B1, ModelKind::FullMatrix(_)) | (Space::B2, ModelKind::FullMatrix(_)) => {
                self.perm4(&x.data, |a, b, cc, d| (d, cc, b, a))
            }
            _ => return Err(Error::WrongSpace { expected: Space::B2, got: x.space }),
        };
        Ok(BoxElement::new(x.space, data))
    }

    /// Dual-directed transform 𝔉 : B₂ → B₁ (contragredient ∘ inverse_fourier).
    pub fn fourier_dual(&self, y: &BoxElement) -> Result<BoxElement> {
        self.contragredient(&self.inverse_fourier(y)?)
    }

    /// Inverse of the dual-directed transform, B₁ → B₂ (fourier ∘ contragredient).
    pub fn inverse_fourier_dual(&self, x: &BoxElement) -> Result<BoxElement> {
        self.fourier(&self.contragredient(x)?)
    }

    /// Convolution x ∗ y = 𝔉⁻¹(𝔉(y)𝔉(x)) of B₂ elements, which in these
    /// coordinates is fourier(inverse_fourier(x) · inverse_fourier(y)).
    pub fn convolve(&self, x: &BoxElement, y: &BoxElement) -> Result<BoxElement> {
        let a = self.inverse_fourier(x)?;
        let b = self.inverse_fourier(y)?;
        self.fourier(&BoxElement::b1(&a.data * &b.data))
    }

    // ---- B₂ as a C*-algebra ----

    /// Algebra product in B₂ (entrywise for Spin).
    pub fn b2_mul(&self, x: &CMatrix, y: &CMatrix) -> CMatrix {
        if self.is_spin() {
            x.component_mul(y)
        } else {
            x * y
        }
    }

    /// Adjoint in B₂.
    pub fn b2_adjoint(&self, x: &CMatrix) -> CMatrix {
        if self.is_spin() {
            x.map(|z| z.conj())
        } else {
            x.adjoint()
        }
    }

    pub fn b2_identity(&self) -> CMatrix {
        if self.is_spin() {
            CMatrix::from_element(self.dim_b2, self.dim_b2, ONE)
        } else {
            identity(self.dim_b2)
        }
    }

    /// Jones projection e₂ in the B₂ representation.
    pub fn e2(&self) -> CMatrix {
        match self.kind {
            ModelKind::Spin(n) => identity(n),
            ModelKind::FullMatrix(n) => {
                let mut s = zeros(n * n, n * n);
                for j in 0..n {
                    for k in 0..n {
                        s += kron(&unit(n, j, k), &unit(n, j, k));
                    }
                }
                s.scale(1.0 / n as f64)
            }
        }
    }

    /// Jones projection e₁ in the B₁ representation.
    pub fn e1(&self) -> CMatrix {
        match self.kind {
            ModelKind::Spin(n) => CMatrix::from_element(n, n, cr(1.0 / n as f64)),
            ModelKind::FullMatrix(n) => {
                let mut s = zeros(n * n, n * n);
                for j in 0..n {
                    for k in 0..n {
                        s[(j * n + j, k * n + k)] = ONE;
                    }
                }
                s.scale(1.0 / n as f64)
            }
        }
    }

    /// Hermiticity residual of a B₂ element.
    pub fn b2_herm_residual(&self, x: &CMatrix) -> f64 {
        numerics::max_abs(&(x - self.b2_adjoint(x)))
    }

    /// Eigenvalues (ascending) of a self-adjoint B₂ element.
    pub fn b2_eigenvalues(&self, x: &CMatrix) -> Result<Vec<f64>> {
        if self.is_spin() {
            let res = self.b2_herm_residual(x);
            if res > self.tol.rel(self.tol.herm_tol(), numerics::max_abs(x)) {
                return Err(Error::NotHermitian { residual: res });
            }
            let mut v: Vec<f64> = x.iter().map(|z| z.re).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Ok(v)
        } else {
            Ok(numerics::herm_eig(x, &self.tol)?.values)
        }
    }

    /// Apply a scalar function on the spectrum of a self-adjoint B₂ element.
    pub fn b2_fun(&self, x: &CMatrix, f: MatFun, clamp_floor: bool) -> Result<CMatrix> {
        if self.is_spin() {
            let res = self.b2_herm_residual(x);
            if res > self.tol.rel(self.tol.herm_tol(), numerics::max_abs(x)) {
                return Err(Error::NotHermitian { residual: res });
            }
            let norm = numerics::max_abs(x);
            let floor = -self.tol.rel(self.tol.eig_floor_tol(), norm);
            let mut out = x.clone();
            for z in out.iter_mut() {
                let mut v = z.re;
                if clamp_floor && v < 0.0 && v > floor {
                    v = 0.0;
                }
                let w = match f {
                    MatFun::Exp => v.exp(),
                    MatFun::Log => {
                        if v <= 1e-12 * norm.max(1e-300) {
                            return Err(Error::SingularForLog { min_eig: v });
                        }
                        v.ln()
                    }
                    MatFun::Sqrt => {
                        if v < floor {
                            return Err(Error::NotPositive { min_eig: v });
                        }
                        v.max(0.0).sqrt()
                    }
                    MatFun::Power(p) => {
                        if (p.fract() != 0.0 || p < 0.0) && v <= 1e-12 * norm.max(1e-300) {
                            return Err(Error::SingularForLog { min_eig: v });
                        }
                        v.powf(p)
                    }
                    MatFun::PositivePart => v.max(0.0),
                };
                *z = cr(w);
            }
            Ok(out)
        } else {
            numerics::mat_fun(x, f, &self.tol)
        }
    }

    /// Spectral decomposition of a self-adjoint B₂ element into clustered
    /// spectral projections, relative cluster gap 1e-9.
    pub fn b2_spectral(&self, x: &CMatrix) -> Result<Vec<(f64, CMatrix)>> {
        let gap = 1e-9 * (1.0 + numerics::max_abs(x));
        if self.is_spin() {
            let res = self.b2_herm_residual(x);
            if res > self.tol.rel(self.tol.herm_tol(), numerics::max_abs(x)) {
                return Err(Error::NotHermitian { residual: res });
            }
            let n = self.n();
            let mut entries: Vec<(f64, usize, usize)> = (0..n)
                .flat_map(|j| (0..n).map(move |k| (j, k)))
                .map(|(j, k)| (x[(j, k)].re, j, k))
                .collect();
            entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut out: Vec<(f64, CMatrix)> = Vec::new();
            for (v, j, k) in entries {
                match out.last_mut() {
                    Some((v0, p)) if (v - *v0).abs() <= gap => p[(j, k)] = ONE,
                    _ => {
                        let mut p = zeros(n, n);
                        p[(j, k)] = ONE;
                        out.push((v, p));
                    }
                }
            }
            Ok(out)
        } else {
            let eig = numerics::herm_eig(x, &self.tol)?;
            let d = self.dim_b2;
            let mut out: Vec<(f64, CMatrix)> = Vec::new();
            for i in 0..d {
                let v = eig.values[i];
                let col = eig.vectors.column(i);
                let p1 = &col * col.adjoint();
                match out.last_mut() {
                    Some((v0, p)) if (v - *v0).abs() <= gap => *p += p1,
                    _ => out.push((v, p1)),
                }
            }
            Ok(out)
        }
    }

    /// Smallest projection p in B₂ with p x = x (range projection), with the
    /// shared eigenvalue floor deciding rank.
    pub fn b2_range_projection(&self, x: &CMatrix) -> CMatrix {
        let floor = self.tol.rel(self.tol.eig_floor_tol(), numerics::max_abs(x)).max(1e-300);
        if self.is_spin() {
            x.map(|z| if z.norm() > floor { ONE } else { ZERO })
        } else {
            let g = x * x.adjoint();
            let eig = numerics::herm_eig(&g, &self.tol).expect("x x* is Hermitian");
            // Gram eigenvalues of exact-zero directions carry solver noise of
            // order eps*norm(g), which dominates floor^2
            let gnorm = eig.values.last().copied().unwrap_or(0.0).abs();
            let thresh = (floor * floor).max(1e-13 * (1.0 + gnorm));
            let mut p = zeros(self.dim_b2, self.dim_b2);
            for i in 0..self.dim_b2 {
                if eig.values[i] > thresh {
                    let col = eig.vectors.column(i);
                    p += &col * col.adjoint();
                }
            }
            p
        }
    }

    /// Join (span of ranges) of a family of projections.
    pub fn b2_join(&self, ps: &[CMatrix]) -> CMatrix {
        if ps.is_empty() {
            return zeros(self.dim_b2, self.dim_b2);
        }
        if self.is_spin() {
            let mut out = zeros(self.dim_b2, self.dim_b2);
            for p in ps {
                for (o, z) in out.iter_mut().zip(p.iter()) {
                    if z.norm() > 0.5 {
                        *o = ONE;
                    }
                }
            }
            out
        } else {
            let mut s = zeros(self.dim_b2, self.dim_b2);
            for p in ps {
                s += p;
            }
            self.b2_range_projection(&s)
        }
    }

    // ---- traces ----

    /// Normalized trace in the space the element belongs to.
    pub fn trace(&self, x: &BoxElement) -> Result<Complex64> {
        match x.space {
            Space::B2 => Ok(self.tau2(&x.data)),
            Space::B1 | Space::M1 => Ok(numerics::ntrace(&x.data)),
            Space::M => Ok(self.tau_m(&x.data)),
        }
    }

    /// τ on M.
    pub fn tau_m(&self, x: &CMatrix) -> Complex64 {
        numerics::ntrace(x)
    }

    /// τ₂ on B₂.
    pub fn tau2(&self, x: &CMatrix) -> Complex64 {
        match self.kind {
            ModelKind::Spin(n) => x.iter().sum::<Complex64>() / cr((n * n) as f64),
            ModelKind::FullMatrix(_) => numerics::ntrace(x),
        }
    }

    // ---- multipliers and transfer matrices ----

    /// GNS-space transfer matrix of a B₂ multiplier: the representation of
    /// 𝔉(Φ̂) acting on L²(M).
    pub fn transfer_of_multiplier(&self, mult: &CMatrix) -> Result<CMatrix> {
        Ok(self.fourier_dual(&BoxElement::b2(mult.clone()))?.data)
    }

    /// Multiplier of a GNS-space transfer matrix.
    pub fn multiplier_of_transfer(&self, t: &CMatrix) -> Result<CMatrix> {
        if t.nrows() != self.gns_dim || t.ncols() != self.gns_dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0}", self.gns_dim),
                got: format!("{}x{}", t.nrows(), t.ncols()),
            });
        }
        Ok(self.inverse_fourier_dual(&BoxElement::b1(t.clone()))?.data)
    }

    // ---- vectorization of M and multiplication superoperators ----

    /// vec of an M element on the GNS space (diagonal for Spin, row-major
    /// flattening for FullMatrix).
    pub fn vec_m(&self, x: &CMatrix) -> nalgebra::DVector<Complex64> {
        match self.kind {
            ModelKind::Spin(n) => nalgebra::DVector::from_fn(n, |i, _| x[(i, i)]),
            ModelKind::FullMatrix(n) => {
                nalgebra::DVector::from_fn(n * n, |i, _| x[(i / n, i % n)])
            }
        }
    }

    pub fn unvec_m(&self, v: &nalgebra::DVector<Complex64>) -> CMatrix {
        match self.kind {
            ModelKind::Spin(n) => CMatrix::from_fn(n, n, |i, j| if i == j { v[i] } else { ZERO }),
            ModelKind::FullMatrix(n) => CMatrix::from_fn(n, n, |i, j| v[i * n + j]),
        }
    }

    /// Superoperator of left multiplication by x ∈ M on the GNS space.
    pub fn left_mult(&self, x: &CMatrix) -> CMatrix {
        match self.kind {
            ModelKind::Spin(n) => CMatrix::from_fn(n, n, |i, j| if i == j { x[(i, i)] } else { ZERO }),
            ModelKind::FullMatrix(n) => kron(x, &identity(n)),
        }
    }

    /// Superoperator of right multiplication by x ∈ M on the GNS space.
    pub fn right_mult(&self, x: &CMatrix) -> CMatrix {
        match self.kind {
            ModelKind::Spin(_) => self.left_mult(x),
            ModelKind::FullMatrix(n) => kron(&identity(n), &x.transpose()),
        }
    }

    /// Apply the map encoded by a B₂ multiplier to x ∈ M (the mixed
    /// convolution x ∗ y of the planar calculus).
    pub fn apply_multiplier(&self, mult: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
        let t = self.transfer_of_multiplier(mult)?;
        Ok(self.unvec_m(&(t * self.vec_m(x))))
    }

    // ---- embeddings and conditional expectations ----

    /// Embed x ∈ M into M₁ (left regular representation).
    pub fn embed(&self, x: &CMatrix) -> BoxElement {
        BoxElement::new(Space::M1, self.left_mult(x))
    }

    /// τ-preserving conditional expectation M₁ → M.
    pub fn cond_expect_m(&self, y: &BoxElement) -> Result<CMatrix> {
        let m = match y.space {
            Space::M1 | Space::B1 => &y.data,
            _ => return Err(Error::WrongSpace { expected: Space::M1, got: y.space }),
        };
        Ok(match self.kind {
            ModelKind::Spin(n) => CMatrix::from_fn(n, n, |i, j| if i == j { m[(i, i)] } else { ZERO }),
            ModelKind::FullMatrix(n) => {
                // partial trace over the right leg, normalized
                CMatrix::from_fn(n, n, |a, cc| {
                    (0..n).map(|b| m[(a * n + b, cc * n + b)]).sum::<Complex64>() / cr(n as f64)
                })
            }
        })
    }

    /// E_N(x) = τ(x)·1 since N = ℂ.
    pub fn cond_expect_n(&self, x: &CMatrix) -> Complex64 {
        self.tau_m(x)
    }

    /// τ₂-preserving conditional expectation of a B₂ element onto M′∩M₁,
    /// returned as the element `a` of M′∩M₁ in its own matrix coordinates
    /// (diagonal of size n for Spin as an n×n diagonal matrix, an n×n matrix
    /// for FullMatrix).
    pub fn cond_expect_m1_of_b2(&self, y: &CMatrix) -> CMatrix {
        match self.kind {
            ModelKind::Spin(n) => {
                // diag of row means of the coefficient array
                CMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        (0..n).map(|k| y[(i, k)]).sum::<Complex64>() / cr(n as f64)
                    } else {
                        ZERO
                    }
                })
            }
            ModelKind::FullMatrix(n) => {
                // partial trace over the second tensor slot, normalized
                CMatrix::from_fn(n, n, |a, cc| {
                    (0..n).map(|b| y[(a * n + b, cc * n + b)]).sum::<Complex64>() / cr(n as f64)
                })
            }
        }
    }

    /// Embed an element a ∈ M′∩M₁ (n×n coordinates) into the B₂
    /// representation.
    pub fn embed_m1c_in_b2(&self, a: &CMatrix) -> CMatrix {
        match self.kind {
            ModelKind::Spin(n) => CMatrix::from_fn(n, n, |j, _| a[(j, j)]),
            ModelKind::FullMatrix(n) => kron(a, &identity(n)),
        }
    }

    /// Range projection of an arbitrary B₁/M₁/M element (column space at the
    /// shared eigenvalue floor).
    pub fn range_projection(&self, x: &BoxElement) -> BoxElement {
        match x.space {
            Space::B2 => BoxElement::b2(self.b2_range_projection(&x.data)),
            _ => {
                let g = &x.data * x.data.adjoint();
                let floor = self.tol.rel(self.tol.eig_floor_tol(), numerics::max_abs(&x.data)).max(1e-300);
                let eig = numerics::herm_eig(&g, &self.tol).expect("xx* Hermitian");
                let gnorm = eig.values.last().copied().unwrap_or(0.0).abs();
                let thresh = (floor * floor).max(1e-13 * (1.0 + gnorm));
                let mut p = zeros(g.nrows(), g.ncols());
                for i in 0..g.nrows() {
                    if eig.values[i] > thresh {
                        let col = eig.vectors.column(i);
                        p += &col * col.adjoint();
                    }
                }
                BoxElement::new(x.space, p)
            }
        }
    }

    // ---- M₂ representation (for expectation-formula conformance) ----
    //
    // Spin: M₂ ⊂ B(ℂⁿ⊗ℂⁿ), dimension n²×n².
    // FullMatrix: M₂ = Mₙ⊗Mₙ⊗Mₙ (tensor slots 1, 2 and 4), dimension n³×n³.

    pub fn m2_dim(&self) -> usize {
        match self.kind {
            ModelKind::Spin(n) => n * n,
            ModelKind::FullMatrix(n) => n * n * n,
        }
    }

    pub fn m2_e1(&self) -> CMatrix {
        match self.kind {
            ModelKind::Spin(n) => kron(&self.e1(), &identity(n)),
            ModelKind::FullMatrix(n) => {
                let mut s = zeros(n * n * n, n * n * n);
                for j in 0..n {
                    for k in 0..n {
                        s += kron(&kron(&unit(n, j, k), &unit(n, j, k)), &identity(n));
                    }
                }
                s.scale(1.0 / n as f64)
            }
        }
    }

    pub fn m2_e2(&self) -> CMatrix {
        match self.kind {
            ModelKind::Spin(n) => {
                let mut s = zeros(n * n, n * n);
                for k in 0..n {
                    s += kron(&unit(n, k, k), &unit(n, k, k));
                }
                s
            }
            ModelKind::FullMatrix(n) => {
                let mut s = zeros(n * n * n, n * n * n);
                for j in 0..n {
                    for k in 0..n {
                        s += kron(&kron(&identity(n), &unit(n, j, k)), &unit(n, j, k));
                    }
                }
                s.scale(1.0 / n as f64)
            }
        }
    }

    pub fn m2_of_m(&self, x: &CMatrix) -> CMatrix {
        match self.kind {
            ModelKind::Spin(n) => kron(x, &identity(n)),
            ModelKind::FullMatrix(n) => kron(x, &identity(n * n)),
        }
    }

    pub fn m2_of_b2(&self, y: &CMatrix) -> CMatrix {
        let n = self.n();
        match self.kind {
            ModelKind::Spin(_) => {
                let mut s = zeros(n * n, n * n);
                for j in 0..n {
                    for k in 0..n {
                        if y[(j, k)] != ZERO {
                            s += kron(&unit(n, j, j), &unit(n, k, k)).scale_c(y[(j, k)]);
                        }
                    }
                }
                s
            }
            ModelKind::FullMatrix(_) => {
                // B₂ entry Y[(a,b),(c,d)] sits in slots (2,4): I ⊗ E_{a,c} ⊗ E_{b,d}
                let d3 = n * n * n;
                let mut s = zeros(d3, d3);
                for a in 0..n {
                    for b in 0..n {
                        for cc in 0..n {
                            for d in 0..n {
                                let v = y[(a * n + b, cc * n + d)];
                                if v != ZERO {
                                    for e in 0..n {
                                        s[(e * n * n + a * n + b, e * n * n + cc * n + d)] += v;
                                    }
                                }
                            }
                        }
                    }
                }
                s
            }
        }
    }

    pub fn m2_of_b1(&self, x: &CMatrix) -> CMatrix {
        match self.kind {
            ModelKind::Spin(n) => kron(x, &identity(n)),
            ModelKind::FullMatrix(n) => kron(x, &identity(n)),
        }
    }

    /// E_M : M₂ → M in the M₂ representation.
    pub fn m2_expect_m(&self, z: &CMatrix) -> CMatrix {
        let n = self.n();
        match self.kind {
            ModelKind::Spin(_) => CMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    (0..n).map(|l| z[(i * n + l, i * n + l)]).sum::<Complex64>() / cr(n as f64)
                } else {
                    ZERO
                }
            }),
            ModelKind::FullMatrix(_) => CMatrix::from_fn(n, n, |a, d| {
                let mut s = ZERO;
                for b in 0..n {
                    for cc in 0..n {
                        s += z[(a * n * n + b * n + cc, d * n * n + b * n + cc)];
                    }
                }
                s / cr((n * n) as f64)
            }),
        }
    }

    /// E_{M₁} : M₂ → M₁ in the M₂ representation (result in B₁ coordinates).
    pub fn m2_expect_m1(&self, z: &CMatrix) -> CMatrix {
        let n = self.n();
        match self.kind {
            ModelKind::Spin(_) => CMatrix::from_fn(n, n, |j, k| {
                (0..n).map(|l| z[(j * n + l, k * n + l)]).sum::<Complex64>() / cr(n as f64)
            }),
            ModelKind::FullMatrix(_) => CMatrix::from_fn(n * n, n * n, |jk, pq| {
                let (j, k) = (jk / n, jk % n);
                let (p, q) = (pq / n, pq % n);
                (0..n)
                    .map(|l| z[(j * n * n + k * n + l, p * n * n + q * n + l)])
                    .sum::<Complex64>()
                    / cr(n as f64)
            }),
        }
    }

    /// Apply a channel through the multiplier formula
    /// Φ(x) = λ^{-5/2} E_M(e₂e₁ Φ̂ x e₁e₂) in the M₂ representation.
    pub fn apply_via_expectation(&self, mult: &CMatrix, x: &CMatrix) -> CMatrix {
        let e1 = self.m2_of_b1(&self.e1());
        let e2 = self.m2_e2();
        let z = &e2 * &e1 * self.m2_of_b2(mult) * self.m2_of_m(x) * &e1 * &e2;
        self.m2_expect_m(&z).scale(self.lambda.powf(-2.5))
    }
}

trait ScaleC {
    fn scale_c(self, z: Complex64) -> Self;
}

impl ScaleC for CMatrix {
    fn scale_c(mut self, z: Complex64) -> Self {
        for e in self.iter_mut() {
            *e *= z;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{max_abs, rand_complex};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn models() -> Vec<InclusionModel> {
        vec![
            InclusionModel::spin(2),
            InclusionModel::spin(3),
            InclusionModel::spin(5),
            InclusionModel::full_matrix(2),
            InclusionModel::full_matrix(3),
        ]
    }

    fn rand_b1(model: &InclusionModel, rng: &mut ChaCha20Rng) -> BoxElement {
        BoxElement::b1(rand_complex(rng, model.dim_b1, model.dim_b1))
    }

    #[test]
    fn spin_fourier_matrix_unit() {
        // F(E_{1,2}) = sqrt(2) * coefficient at (1,2)
        let m = InclusionModel::spin(2);
        let x = BoxElement::b1(unit(2, 0, 1));
        let y = m.fourier(&x).unwrap();
        assert!((y.data[(0, 1)].re - 2f64.sqrt()).abs() < 1e-14);
        assert!(y.data.iter().map(|z| z.norm()).sum::<f64>() - 2f64.sqrt() < 1e-14);
    }

    #[test]
    fn full_fourier_matrix_unit() {
        // F(E_{(1,2),(1,2)}) = E_{2,1} ⊗ E_{2,1}
        let m = InclusionModel::full_matrix(2);
        let x = BoxElement::b1(kron(&unit(2, 0, 0), &unit(2, 1, 1)));
        let y = m.fourier(&x).unwrap();
        let expect = kron(&unit(2, 1, 0), &unit(2, 1, 0));
        assert!(max_abs(&(&y.data - &expect)) < 1e-14);
    }

    #[test]
    fn identity_multiplier_is_scaled_e2() {
        for m in models() {
            let id = identity(m.gns_dim);
            let mult = m.multiplier_of_transfer(&id).unwrap();
            let expect = m.e2().scale(m.lambda.powf(-0.5));
            assert!(max_abs(&(&mult - &expect)) < 1e-12, "{:?}", m.kind);
        }
    }

    #[test]
    fn inverse_fourier_of_scaled_e2_is_one() {
        for m in models() {
            let y = BoxElement::b2(m.e2().scale(m.lambda.powf(-0.5)));
            let x = m.inverse_fourier(&y).unwrap();
            assert!(max_abs(&(&x.data - identity(m.dim_b1))) < 1e-12);
        }
    }

    #[test]
    fn spin_inverse_fourier_example() {
        let m = InclusionModel::spin(2);
        let mut cmat = zeros(2, 2);
        cmat[(0, 1)] = ONE;
        let x = m.inverse_fourier(&BoxElement::b2(cmat)).unwrap();
        assert!((x.data[(0, 1)].re - 1.0 / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn plancherel_and_round_trips() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        for m in models() {
            for _ in 0..50 {
                let x = rand_b1(&m, &mut rng);
                let y = m.fourier(&x).unwrap();
                // Plancherel
                let lhs = m.tau2(&m.b2_mul(&m.b2_adjoint(&y.data), &y.data));
                let xs = x.data.adjoint() * &x.data;
                let rhs = numerics::ntrace(&xs);
                assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
                // inverse round trip
                let back = m.inverse_fourier(&y).unwrap();
                assert!(max_abs(&(&back.data - &x.data)) < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_relations() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for m in models() {
            for _ in 0..20 {
                let x = rand_b1(&m, &mut rng);
                // F^2 = contragredient on B1 (two directed transforms)
                let f2 = m.fourier_dual(&m.fourier(&x).unwrap()).unwrap();
                let bar = m.contragredient(&x).unwrap();
                assert!(max_abs(&(&f2.data - &bar.data)) < 1e-12);
                // F^4 = id
                let f4 = m.fourier_dual(&m.fourier(&f2).unwrap()).unwrap();
                assert!(max_abs(&(&f4.data - &x.data)) < 1e-12);
                // F(x)* = F^{-1}(x*) with F^{-1} the B1->B2 inverse of the dual transform
                let lhs = m.b2_adjoint(&m.fourier(&x).unwrap().data);
                let rhs = m
                    .inverse_fourier_dual(&BoxElement::b1(x.data.adjoint()))
                    .unwrap();
                assert!(max_abs(&(&lhs - &rhs.data)) < 1e-12);
                // contragredient is involutive
                let b2 = m.contragredient(&bar).unwrap();
                assert!(max_abs(&(&b2.data - &x.data)) < 1e-12);
            }
        }
    }

    #[test]
    fn contragredient_antiautomorphism_in_b2() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        for m in models() {
            for _ in 0..10 {
                let x = rand_complex(&mut rng, m.dim_b2, m.dim_b2);
                let y = rand_complex(&mut rng, m.dim_b2, m.dim_b2);
                let lhs = m
                    .contragredient(&BoxElement::b2(m.b2_mul(&x, &y)))
                    .unwrap();
                let bx = m.contragredient(&BoxElement::b2(x)).unwrap();
                let by = m.contragredient(&BoxElement::b2(y)).unwrap();
                let rhs = m.b2_mul(&by.data, &bx.data);
                assert!(max_abs(&(&lhs.data - &rhs)) < 1e-12);
            }
        }
    }

    #[test]
    fn full_b2_contragredient_swaps_tensor_factors() {
        let m = InclusionModel::full_matrix(3);
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let x = rand_complex(&mut rng, 3, 3);
        let y = rand_complex(&mut rng, 3, 3);
        let z = BoxElement::b2(kron(&x, &y));
        let bar = m.contragredient(&z).unwrap();
        let expect = kron(&y.transpose(), &x.transpose());
        assert!(max_abs(&(&bar.data - &expect)) < 1e-13);
    }

    #[test]
    fn jones_elements_normalized() {
        for m in models() {
            // e1: projection in B1 with tau1(e1) = lambda
            let e1 = m.e1();
            assert!(max_abs(&(&e1 * &e1 - &e1)) < 1e-13);
            assert!(max_abs(&(&e1 - e1.adjoint())) < 1e-14);
            assert!((numerics::ntrace(&e1).re - m.lambda).abs() < 1e-13);
            // e2: projection in B2 with tau2(e2) = lambda
            let e2 = m.e2();
            assert!(max_abs(&(m.b2_mul(&e2, &e2) - &e2)) < 1e-13);
            assert!((m.tau2(&e2).re - m.lambda).abs() < 1e-13);
            // unit traces
            assert!((m.tau2(&m.b2_identity()).re - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn convolution_unit_and_zero() {
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        for m in models() {
            let unit_mult = BoxElement::b2(m.e2().scale(m.lambda.powf(-0.5)));
            let x = BoxElement::b2(rand_complex(&mut rng, m.dim_b2, m.dim_b2));
            let c1 = m.convolve(&x, &unit_mult).unwrap();
            let c2 = m.convolve(&unit_mult, &x).unwrap();
            assert!(max_abs(&(&c1.data - &x.data)) < 1e-12);
            assert!(max_abs(&(&c2.data - &x.data)) < 1e-12);
            let z = BoxElement::b2(zeros(m.dim_b2, m.dim_b2));
            assert!(max_abs(&m.convolve(&z, &x).unwrap().data) < 1e-14);
        }
    }

    #[test]
    fn spin3_convolution_order() {
        // F-images E_{1,2} and E_{2,3}: conv gives 0 or E_{1,3} depending on order
        let m = InclusionModel::spin(3);
        let to_b2 = |a: CMatrix| m.multiplier_of_transfer(&a).unwrap();
        let x = to_b2(unit(3, 0, 1));
        let y = to_b2(unit(3, 1, 2));
        let xy = m.convolve(&BoxElement::b2(x.clone()), &BoxElement::b2(y.clone())).unwrap();
        let yx = m.convolve(&BoxElement::b2(y), &BoxElement::b2(x)).unwrap();
        let f_xy = m.transfer_of_multiplier(&xy.data).unwrap();
        let f_yx = m.transfer_of_multiplier(&yx.data).unwrap();
        assert!(max_abs(&f_xy) < 1e-13);
        assert!(max_abs(&(&f_yx - &unit(3, 0, 2))) < 1e-13);
    }

    #[test]
    fn schur_positivity_of_convolution() {
        let mut rng = ChaCha20Rng::seed_from_u64(15);
        for m in models() {
            for _ in 0..10 {
                let a = {
                    let r = rand_complex(&mut rng, m.dim_b2, m.dim_b2);
                    m.b2_mul(&m.b2_adjoint(&r), &r)
                };
                let b = {
                    let r = rand_complex(&mut rng, m.dim_b2, m.dim_b2);
                    m.b2_mul(&m.b2_adjoint(&r), &r)
                };
                let cv = m.convolve(&BoxElement::b2(a), &BoxElement::b2(b)).unwrap();
                let min = m.b2_eigenvalues(&cv.data).unwrap()[0];
                assert!(min > -1e-10 * (1.0 + max_abs(&cv.data)));
            }
        }
    }

    #[test]
    fn expectations_and_embeddings() {
        let mut rng = ChaCha20Rng::seed_from_u64(16);
        for m in models() {
            let x = match m.kind {
                ModelKind::Spin(n) => {
                    let v = rand_complex(&mut rng, n, 1);
                    CMatrix::from_fn(n, n, |i, j| if i == j { v[(i, 0)] } else { ZERO })
                }
                ModelKind::FullMatrix(n) => rand_complex(&mut rng, n, n),
            };
            // E_M o embed = id
            let back = m.cond_expect_m(&m.embed(&x)).unwrap();
            assert!(max_abs(&(&back - &x)) < 1e-12);
            // embed(1) = 1
            let one = m.embed(&identity(m.n()));
            assert!(max_abs(&(&one.data - identity(m.dim_b1))) < 1e-13);
            // E_N = tau
            assert!((m.cond_expect_n(&x) - m.tau_m(&x)).norm() < 1e-14);
            // E_M trace preserving
            let y = rand_complex(&mut rng, m.dim_b1, m.dim_b1);
            let em = m.cond_expect_m(&BoxElement::new(Space::M1, y.clone())).unwrap();
            assert!((m.tau_m(&em) - numerics::ntrace(&y)).norm() < 1e-12);
        }
    }

    #[test]
    fn full_cond_expect_is_slice_expectation() {
        // E_M(a ⊗ b) = a tau(b) for the full model
        let m = InclusionModel::full_matrix(3);
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let a = rand_complex(&mut rng, 3, 3);
        let b = rand_complex(&mut rng, 3, 3);
        let em = m.cond_expect_m(&BoxElement::new(Space::M1, kron(&a, &b))).unwrap();
        let expect = a.scale_c(numerics::ntrace(&b));
        assert!(max_abs(&(&em - &expect)) < 1e-13);
    }

    #[test]
    fn range_projection_basics() {
        let m = InclusionModel::full_matrix(2);
        let z = BoxElement::b1(zeros(4, 4));
        assert!(max_abs(&m.range_projection(&z).data) < 1e-14);
        // range of E_{1,2} in a matrix space is E_{1,1}
        let e12 = BoxElement::b1(kron(&unit(2, 0, 1), &identity(2)));
        let p = m.range_projection(&e12);
        let expect = kron(&unit(2, 0, 0), &identity(2));
        assert!(max_abs(&(&p.data - &expect)) < 1e-12);
        // projections are fixed
        let pr = m.range_projection(&BoxElement::b1(expect.clone()));
        assert!(max_abs(&(&pr.data - &expect)) < 1e-12);
    }

    #[test]
    fn directed_transforms_match_expectation_formulas() {
        // F_dual(y) = lam^{-3/2} E_M1(e2 e1 y) in the M2 representation
        let mut rng = ChaCha20Rng::seed_from_u64(18);
        for m in [InclusionModel::spin(3), InclusionModel::full_matrix(2)] {
            let y = rand_complex(&mut rng, m.dim_b2, m.dim_b2);
            let e1 = m.m2_of_b1(&m.e1());
            let e2 = m.m2_e2();
            let got = m
                .m2_expect_m1(&(&e2 * &e1 * m.m2_of_b2(&y)))
                .scale(m.lambda.powf(-1.5));
            let expect = m.fourier_dual(&BoxElement::b2(y)).unwrap();
            assert!(max_abs(&(&got - &expect.data)) < 1e-11, "{:?}", m.kind);
        }
    }

    #[test]
    fn apply_via_expectation_matches_transfer() {
        let mut rng = ChaCha20Rng::seed_from_u64(19);
        for m in [InclusionModel::spin(4), InclusionModel::full_matrix(2)] {
            let t = rand_complex(&mut rng, m.gns_dim, m.gns_dim);
            let mult = m.multiplier_of_transfer(&t).unwrap();
            let x = match m.kind {
                ModelKind::Spin(n) => {
                    let v = rand_complex(&mut rng, n, 1);
                    CMatrix::from_fn(n, n, |i, j| if i == j { v[(i, 0)] } else { ZERO })
                }
                ModelKind::FullMatrix(n) => rand_complex(&mut rng, n, n),
            };
            let via_transfer = m.unvec_m(&(&t * m.vec_m(&x)));
            let via_expect = m.apply_via_expectation(&mult, &x);
            assert!(max_abs(&(&via_transfer - &via_expect)) < 1e-10, "{:?}", m.kind);
        }
    }

    #[test]
    fn spin_trace_of_e2() {
        let m = InclusionModel::spin(4);
        // n diagonal basis elements each of trace 1/n^2
        assert!((m.tau2(&m.e2()).re - 0.25).abs() < 1e-14);
        let f = InclusionModel::full_matrix(2);
        assert!((f.tau2(&f.e2()).re - 0.25).abs() < 1e-14);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_model() -> impl Strategy<Value = InclusionModel> {
            prop_oneof![
                (2usize..=6).prop_map(InclusionModel::spin),
                (2usize..=3).prop_map(InclusionModel::full_matrix),
            ]
        }

        fn arb_b1(m: &InclusionModel) -> impl Strategy<Value = CMatrix> {
            let d = m.dim_b1;
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d).prop_map(move |v| {
                CMatrix::from_fn(d, d, |i, j| {
                    let (re, im) = v[i * d + j];
                    crate::numerics::c(re, im)
                })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn plancherel_and_rotation((m, seedv) in arb_model().prop_flat_map(|m| {
                let s = arb_b1(&m);
                (Just(m), s)
            })) {
                let x = BoxElement::b1(seedv);
                let y = m.fourier(&x).unwrap();
                let lhs = m.tau2(&m.b2_mul(&m.b2_adjoint(&y.data), &y.data));
                let xs = x.data.adjoint() * &x.data;
                let rhs = numerics::ntrace(&xs);
                prop_assert!((lhs - rhs).norm() < 1e-11 * (1.0 + rhs.norm()));
                let back = m.inverse_fourier(&y).unwrap();
                prop_assert!(max_abs(&(&back.data - &x.data)) < 1e-11);
                // two directed transforms square to the contragredient, four to the identity
                let f2 = m.fourier_dual(&y).unwrap();
                prop_assert!(max_abs(&(&f2.data - &m.contragredient(&x).unwrap().data)) < 1e-11);
                let f4 = m.fourier_dual(&m.fourier(&f2).unwrap()).unwrap();
                prop_assert!(max_abs(&(&f4.data - &x.data)) < 1e-11);
            }

            #[test]
            fn convolution_unit_is_neutral((m, seedv) in arb_model().prop_flat_map(|m| {
                let d = m.dim_b2;
                let s = proptest::collection::vec(-1.0f64..1.0, d * d);
                (Just(m), s)
            })) {
                let d = m.dim_b2;
                let x = BoxElement::b2(CMatrix::from_fn(d, d, |i, j| cr(seedv[i * d + j])));
                let unit_mult = BoxElement::b2(m.e2().scale(m.lambda.powf(-0.5)));
                let c1 = m.convolve(&x, &unit_mult).unwrap();
                prop_assert!(max_abs(&(&c1.data - &x.data)) < 1e-11);
            }
        }
    }
}
