//! Generalized symmetric eigensolver for the secular system `H c = E S c`.
//!
//! `S` is reduced by its Cholesky factor to a standard symmetric problem,
//! which a cyclic Jacobi iteration diagonalizes; the vectors are
//! back-transformed and S-normalized. The determinant condition
//! `det(H - E S) = 0` is not used here — it survives as an independent
//! root-finding oracle in the tests.

use thiserror::Error;

use crate::linalg::{back_substitute_transposed, cholesky, forward_substitute, Matrix};
use crate::matrix::MatrixPair;

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("overlap matrix is not positive definite")]
    Indefinite,
    #[error("Jacobi iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("empty system")]
    Empty,
}

/// Eigenpairs of the secular system, energies ascending, vectors
/// S-orthonormal with the largest-magnitude component positive.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub energies: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

const MAX_SWEEPS_PER_DIM: usize = 100;
const OFF_DIAG_TOL: f64 = 1e-14;

/// Solve `H c = E S c` for all `D` eigenpairs.
pub fn solve(pair: &MatrixPair) -> Result<Spectrum, EigenError> {
    let n = pair.h.rows();
    if n == 0 {
        return Err(EigenError::Empty);
    }
    let l = cholesky(&pair.s).ok_or(EigenError::Indefinite)?;

    // A = L⁻¹ H L⁻ᵀ, built column- then row-wise through substitutions.
    let mut w = Matrix::zeros(n, n);
    for j in 0..n {
        let col = forward_substitute(&l, &pair.h.column(j));
        for i in 0..n {
            w.set(i, j, col[i]);
        }
    }
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        let row = forward_substitute(&l, w.row(i));
        for j in 0..n {
            a.set(i, j, row[j]);
        }
    }
    // Symmetrize away substitution round-off.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }

    let frob = a.frobenius_norm();
    let mut v = Matrix::identity(n);
    let max_sweeps = MAX_SWEEPS_PER_DIM * n;
    let mut converged = n == 1;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * a.get(p, q) * a.get(p, q);
            }
        }
        if off.sqrt() <= OFF_DIAG_TOL * frob.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a.get(r, p);
                        let arq = a.get(r, q);
                        a.set(r, p, c * arp - s * arq);
                        a.set(p, r, c * arp - s * arq);
                        a.set(r, q, s * arp + c * arq);
                        a.set(q, r, s * arp + c * arq);
                    }
                    let vrp = v.get(r, p);
                    let vrq = v.get(r, q);
                    v.set(r, p, c * vrp - s * vrq);
                    v.set(r, q, s * vrp + c * vrq);
                }
            }
        }
    }
    if !converged {
        return Err(EigenError::NoConvergence(max_sweeps));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)));

    let mut energies = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for &idx in &order {
        energies.push(a.get(idx, idx));
        let y = v.column(idx);
        let mut x = back_substitute_transposed(&l, &y);
        // S-normalize, then fix the sign so the solver is deterministic.
        let norm = pair.s.quad_form(&x, &x).sqrt();
        for xi in x.iter_mut() {
            *xi /= norm;
        }
        let mut lead = 0;
        for (i, v) in x.iter().enumerate() {
            if v.abs() > x[lead].abs() {
                lead = i;
            }
        }
        if x[lead] < 0.0 {
            for xi in x.iter_mut() {
                *xi = -*xi;
            }
        }
        vectors.push(x);
    }
    Ok(Spectrum { energies, vectors })
}

/// Minimum-energy eigenpair.
pub fn ground_state(spec: &Spectrum) -> (f64, &[f64]) {
    (spec.energies[0], &spec.vectors[0])
}
