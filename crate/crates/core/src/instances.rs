//! Built-in worked instances used by tests and the `verify-paper` suite:
//! the ℂ⊂ℂ⁴ channel with its bimodule symmetry datum, reversible classical
//! chains on the spin model, and Davies-type constructions on the full
//! matrix model.

use rand::Rng;

use crate::inclusion::InclusionModel;
use crate::numerics::{self, cr, from_real_rows, kron, CMatrix, MatFun, ZERO};

/// Transfer matrix 𝔉(Φ̂) of the worked ℂ⊂ℂ⁴ channel: row-stochastic but not
/// doubly stochastic, bimodule GNS symmetric yet not GNS symmetric with
/// respect to any faithful state.
pub fn c4_example_transfer() -> CMatrix {
    from_real_rows(
        4,
        4,
        &[
            0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0,
            0.5, 0.0, 0.25, 0.25,
            0.25, 0.5, 0.0, 0.25,
            1.0 / 6.0, 0.5, 1.0 / 3.0, 0.0,
        ],
    )
    .unwrap()
}

/// 𝔉(Δ̂) printed alongside the ℂ⊂ℂ⁴ example: one half of
/// [[1,2/3,4/3,2],[3/2,1,1/2,1/2],[3/4,2,1,3/4],[1/2,2,4/3,1]].
pub fn c4_example_delta_transfer() -> CMatrix {
    from_real_rows(
        4,
        4,
        &[
            1.0, 2.0 / 3.0, 4.0 / 3.0, 2.0,
            1.5, 1.0, 0.5, 0.5,
            0.75, 2.0, 1.0, 0.75,
            0.5, 2.0, 4.0 / 3.0, 1.0,
        ],
    )
    .unwrap()
    .scale(0.5)
}

/// Rates of a reversible classical chain on Spin(n): a symmetric positive
/// rate pattern twisted by a stationary density d, so that d_j w_{jk} = d_k w_{kj}.
pub fn reversible_chain_kernel(n: usize, rng: &mut impl Rng) -> (CMatrix, Vec<f64>) {
    let mut d: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.5).collect();
    let s: f64 = d.iter().sum::<f64>() / n as f64;
    for v in &mut d {
        *v /= s; // tau-density: mean 1
    }
    let mut sym = vec![vec![0.0f64; n]; n];
    for j in 0..n {
        for k in (j + 1)..n {
            let r = rng.gen::<f64>() * 0.8 + 0.2;
            sym[j][k] = r;
            sym[k][j] = r;
        }
    }
    // L0hat coefficient array: w_{jk} = s_{jk} sqrt(d_j/d_k) * sqrt(n)-normalized later
    let l0 = CMatrix::from_fn(n, n, |j, k| {
        if j == k {
            ZERO
        } else {
            cr(sym[j][k] * (d[j] / d[k]).sqrt())
        }
    });
    (l0, d)
}

/// Davies-type generator kernel on FullMatrix(n): eigen-jumps of a Gibbs
/// density rho with detailed-balance weights. Returns (L0hat, rho).
pub fn davies_kernel(n: usize, rng: &mut impl Rng) -> (CMatrix, CMatrix) {
    let model = InclusionModel::full_matrix(n);
    let h = numerics::rand_hermitian(rng, n);
    let eig = numerics::herm_eig(&h, &model.tol).unwrap();
    let mut d: Vec<f64> = eig.values.iter().map(|&v| (-v).exp()).collect();
    let s: f64 = d.iter().sum::<f64>() / n as f64;
    for v in &mut d {
        *v /= s;
    }
    let rho = {
        let dd = nalgebra::DVector::from_iterator(n, d.iter().map(|&v| cr(v)));
        &eig.vectors * CMatrix::from_diagonal(&dd) * eig.vectors.adjoint()
    };
    let mut sym = vec![vec![0.0f64; n]; n];
    for j in 0..n {
        for k in (j + 1)..n {
            let r = rng.gen::<f64>() * 0.8 + 0.2;
            sym[j][k] = r;
            sym[k][j] = r;
        }
    }
    let mut l0 = numerics::zeros(n * n, n * n);
    for j in 0..n {
        for k in 0..n {
            if j == k {
                continue;
            }
            // u_{jk} = |e_j><e_k| / sqrt(n): tau(u u*) = lambda^{1/2}
            let u = (&eig.vectors.column(j) * eig.vectors.column(k).adjoint()).scale(1.0 / (n as f64).sqrt());
            let xi = numerics::CMatrix::from_fn(n * n, 1, |i, _| u[(i / n, i % n)].conj());
            let p = &xi * xi.adjoint();
            // detailed balance: symmetric base rate twisted by the density
            let w = sym[j][k] * (d[j] / d[k]).sqrt();
            l0 += p.scale(w);
        }
    }
    (l0, rho)
}

/// Modular multiplier Δ̂ρ = ρᵀ ⊗ ρ⁻¹ for the full model, coefficient array
/// d_j/d_k for the spin model.
pub fn modular_delta_of_density(model: &InclusionModel, rho: &CMatrix) -> CMatrix {
    match model.kind {
        crate::inclusion::ModelKind::Spin(n) => {
            CMatrix::from_fn(n, n, |j, k| rho[(j, j)] / rho[(k, k)])
        }
        crate::inclusion::ModelKind::FullMatrix(_) => {
            let inv = numerics::mat_fun(rho, MatFun::Power(-1.0), &model.tol).unwrap();
            kron(&rho.transpose(), &inv)
        }
    }
}
