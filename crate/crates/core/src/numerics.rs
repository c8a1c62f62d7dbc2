//! Dense complex-matrix kernels: Hermitian eigendecomposition, matrix
//! functions, the general matrix exponential and Gauss-Legendre quadrature.
//!
//! All other modules build on these. Entries are `Complex64`, matrices are
//! `nalgebra::DMatrix` (the `CMatrix` alias); constructors that take raw data
//! use row-major order.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tol::Tol;

pub type CMatrix = DMatrix<Complex64>;

pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Build a matrix from row-major complex entries, rejecting non-finite input.
pub fn from_rows(rows: usize, cols: usize, entries: &[Complex64]) -> Result<CMatrix> {
    if entries.len() != rows * cols {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} = {} entries", rows, cols, rows * cols),
            got: format!("{} entries", entries.len()),
        });
    }
    if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(DMatrix::from_row_slice(rows, cols, entries))
}

/// Real row-major entries.
pub fn from_real_rows(rows: usize, cols: usize, entries: &[f64]) -> Result<CMatrix> {
    let v: Vec<Complex64> = entries.iter().map(|&x| cr(x)).collect();
    from_rows(rows, cols, &v)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(r: usize, cl: usize) -> CMatrix {
    CMatrix::zeros(r, cl)
}

/// Matrix unit E_{j,k}.
pub fn unit(n: usize, j: usize, k: usize) -> CMatrix {
    let mut m = zeros(n, n);
    m[(j, k)] = ONE;
    m
}

/// Largest singular value. For Hermitian input this is the spectral norm.
pub fn op_norm(a: &CMatrix) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    // power iteration on a* a with a hashed start vector (the all-ones vector
    // can sit exactly in the kernel of generator transfers)
    let m = a.adjoint() * a;
    let n = m.nrows();
    let mut v = nalgebra::DVector::from_fn(n, |i, _| {
        let h = (i as u64).wrapping_mul(2654435761).wrapping_add(104729) % 997;
        c(1.0 + h as f64 / 997.0, (h as f64 / 499.0) - 1.0)
    });
    v /= cr(v.norm());
    let mut lam = 0.0;
    for _ in 0..200 {
        let w = &m * &v;
        let nw = w.norm();
        if nw <= f64::MIN_POSITIVE {
            return 0.0;
        }
        v = w / cr(nw);
        if (nw - lam).abs() <= 1e-13 * (1.0 + nw) {
            lam = nw;
            break;
        }
        lam = nw;
    }
    lam.sqrt()
}

/// Cheap upper bound on the spectral norm: min(‖A‖_F, √(‖A‖₁‖A‖_∞)).
pub fn norm_upper_bound(a: &CMatrix) -> f64 {
    let fro = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut col_max = 0.0f64;
    for j in 0..a.ncols() {
        col_max = col_max.max((0..a.nrows()).map(|i| a[(i, j)].norm()).sum());
    }
    let mut row_max = 0.0f64;
    for i in 0..a.nrows() {
        row_max = row_max.max((0..a.ncols()).map(|j| a[(i, j)].norm()).sum());
    }
    fro.min((col_max * row_max).sqrt())
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Hermiticity residual ‖A - A*‖ (max-entry norm).
pub fn herm_residual(a: &CMatrix) -> f64 {
    max_abs(&(a - a.adjoint()))
}

/// Normalized trace Tr(a)/n.
pub fn ntrace(a: &CMatrix) -> Complex64 {
    a.trace() / cr(a.nrows() as f64)
}

/// Kronecker product with row-major index convention: `(A⊗B)[(a,b),(c,d)] = A[a,c] B[b,d]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Result of a Hermitian eigendecomposition: ascending eigenvalues and a
/// unitary matrix of eigenvectors (columns).
#[derive(Clone, Debug)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermEig {
    /// Reassemble V f(Λ) V*.
    pub fn assemble(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let d = nalgebra::DVector::from_iterator(self.values.len(), self.values.iter().map(|&v| cr(f(v))));
        &self.vectors * CMatrix::from_diagonal(&d) * self.vectors.adjoint()
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn herm_eig(a: &CMatrix, tol: &Tol) -> Result<HermEig> {
    let res = herm_residual(a);
    if res > tol.rel(tol.herm_tol(), op_norm(a)) {
        return Err(Error::NotHermitian { residual: res });
    }
    let h = (a + a.adjoint()).scale(0.5); // exact Hermitian input for the solver
    let eig = h.symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok(HermEig { values, vectors })
}

/// Scalar functions applied on the spectrum of a Hermitian matrix.
#[derive(Clone, Copy, Debug)]
pub enum MatFun {
    Exp,
    Log,
    Sqrt,
    Power(f64),
    /// Clamp negative eigenvalues to zero. Never applied implicitly.
    PositivePart,
}

/// Apply `f` on the spectrum in the eigenbasis. Log, sqrt and non-integer
/// powers require a strictly positive matrix (relative cutoff 1e-12·‖A‖₂).
pub fn mat_fun(a: &CMatrix, f: MatFun, tol: &Tol) -> Result<CMatrix> {
    let eig = herm_eig(a, tol)?;
    let norm = eig.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let cutoff = 1e-12 * norm.max(1e-300);
    let needs_positive = matches!(f, MatFun::Log | MatFun::Sqrt)
        || matches!(f, MatFun::Power(p) if p.fract() != 0.0 || p < 0.0);
    if needs_positive {
        let min = eig.values.first().copied().unwrap_or(0.0);
        if min <= cutoff && !matches!(f, MatFun::Sqrt) {
            return Err(Error::SingularForLog { min_eig: min });
        }
        if matches!(f, MatFun::Sqrt) && min < -tol.rel(tol.eig_floor_tol(), norm) {
            return Err(Error::NotPositive { min_eig: min });
        }
    }
    Ok(match f {
        MatFun::Exp => eig.assemble(f64::exp),
        MatFun::Log => eig.assemble(f64::ln),
        MatFun::Sqrt => eig.assemble(|v| v.max(0.0).sqrt()),
        MatFun::Power(p) => eig.assemble(|v| v.powf(p)),
        MatFun::PositivePart => eig.assemble(|v| v.max(0.0)),
    })
}

/// Matrix exponential of a general (square) matrix by scaling and squaring
/// with a fixed-degree Taylor kernel.
pub fn expm_general(a: &CMatrix) -> CMatrix {
    assert_eq!(a.nrows(), a.ncols(), "expm needs a square matrix");
    let n = a.nrows();
    // an upper bound is safe for scaling (over-scaling only costs squarings)
    let norm = norm_upper_bound(a);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a.scale(0.5f64.powi(s));
    // degree-18 Taylor: error < 1e-19 on ‖B‖ ≤ 1/2
    let mut term = identity(n);
    let mut sum = identity(n);
    for k in 1..=18u32 {
        term = (&term * &b).scale(1.0 / k as f64);
        sum += &term;
    }
    let mut out = sum;
    for _ in 0..s {
        out = &out * &out;
    }
    out
}

/// Gauss-Legendre nodes and weights on [a, b] (Golub-Welsch).
pub fn gauss_legendre_nodes(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut j = nalgebra::DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kk = k as f64;
        let off = kk / (4.0 * kk * kk - 1.0).sqrt();
        j[(k - 1, k)] = off;
        j[(k, k - 1)] = off;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let half = (b - a) / 2.0;
    let mid = (a + b) / 2.0;
    let nodes = pairs.iter().map(|p| mid + half * p.0).collect();
    let weights = pairs.iter().map(|p| half * p.1).collect();
    (nodes, weights)
}

/// ∫ f(s) ds over [a, b] for a matrix-valued integrand.
pub fn gauss_legendre(f: impl Fn(f64) -> CMatrix, a: f64, b: f64, nodes: usize) -> CMatrix {
    let (xs, ws) = gauss_legendre_nodes(nodes, a, b);
    let mut out = f(xs[0]).scale(ws[0]);
    for i in 1..nodes {
        out += f(xs[i]).scale(ws[i]);
    }
    out
}

/// Orthonormal basis of the kernel of `a`. nalgebra's complex SVD is not
/// accurate enough for these decompositions, so candidates come from the
/// Hermitian solver on a*a (a loose cut, since Gram eigenvalues near zero
/// carry squared noise) and are then kept by their measured residual ‖Av‖.
pub fn kernel_basis(a: &CMatrix, tol: &Tol, rel: f64) -> Vec<nalgebra::DVector<Complex64>> {
    let g = a.adjoint() * a;
    let eig = herm_eig(&g, tol).expect("a*a is Hermitian");
    let scale = 1.0 + eig.values.last().copied().unwrap_or(0.0).abs().sqrt();
    let loose = (1e-6f64.max(rel) * scale).powi(2);
    let mut out = Vec::new();
    for i in 0..g.nrows() {
        if eig.values[i] <= loose {
            let v = eig.vectors.column(i).into_owned();
            if (a * &v).norm() <= rel * scale {
                out.push(v);
            }
        }
    }
    out
}

/// Orthonormal bases (kernel, range) of `a` with consistent dimensions:
/// the range is spanned by the top `d - dim ker` eigenvectors of a a*.
pub fn kernel_range_split(
    a: &CMatrix,
    tol: &Tol,
    rel: f64,
) -> (Vec<nalgebra::DVector<Complex64>>, Vec<nalgebra::DVector<Complex64>>) {
    let kernel = kernel_basis(a, tol, rel);
    let rank = a.nrows() - kernel.len();
    let g = a * a.adjoint();
    let eig = herm_eig(&g, tol).expect("a a* is Hermitian");
    let range = (g.nrows() - rank..g.nrows())
        .map(|i| eig.vectors.column(i).into_owned())
        .collect();
    (kernel, range)
}

// ---- random matrices (seeded probes for tests and the CLI) ----

pub fn rand_complex(rng: &mut impl Rng, r: usize, cl: usize) -> CMatrix {
    CMatrix::from_fn(r, cl, |_, _| c(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0))
}

pub fn rand_hermitian(rng: &mut impl Rng, n: usize) -> CMatrix {
    let a = rand_complex(rng, n, n);
    (&a + a.adjoint()).scale(0.5)
}

pub fn rand_psd(rng: &mut impl Rng, n: usize) -> CMatrix {
    let a = rand_complex(rng, n, n);
    &a * a.adjoint()
}

/// Strictly positive density with normalized trace 1.
pub fn rand_density(rng: &mut impl Rng, n: usize) -> CMatrix {
    let p = rand_psd(rng, n) + identity(n).scale(0.1);
    let t = ntrace(&p).re;
    p.scale(1.0 / t)
}
