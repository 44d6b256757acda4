//! Closed-form matrix elements of the state equation.
//!
//! The state function is expanded over `D` isotropic Gaussians
//! `ψ_d(x) = Π_i exp{-λ_d (x_i - η_id)²}`. Every integral the secular
//! system needs — the overlap `S_mn`, the kinetic element, and the
//! potential contractions `Λ_mn`, `Ω_mnp`, `Φ_mnpq` — is a product of
//! one-dimensional Gaussian-product integrals and is evaluated here in
//! closed form. The independent quadrature checks live in [`crate::oracle`].
//!
//! Energies carry the unit `enat`: the factor `|Σ|^{-1/2}` multiplying the
//! otherwise dimensionless mutual-information terms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DatasetStats;
use crate::linalg::{cholesky, KahanSum, Matrix};
use crate::network::{eval_basis, eval_network, NetworkParams, PotentialConstants};

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("state exponent {0} must be strictly positive")]
    BadStateExponent(f64),
    #[error("non-finite matrix element at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("overlap matrix is not positive definite (near-duplicate basis functions)")]
    NotPositiveDefinite,
    #[error("c·S·c = {0} is not positive")]
    BadNorm(f64),
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
}

/// Exponents and centers of the `D` state basis functions. `centers` has
/// one row per basis function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBasis {
    #[serde(rename = "lambda")]
    pub exponents: Vec<f64>,
    #[serde(rename = "eta")]
    pub centers: Matrix,
}

impl StateBasis {
    pub fn new(exponents: Vec<f64>, centers: Matrix) -> Result<Self, MatrixError> {
        if exponents.is_empty() {
            return Err(MatrixError::Dimension("need at least one state".into()));
        }
        if centers.rows() != exponents.len() {
            return Err(MatrixError::Dimension(format!(
                "{} exponents but {} center rows",
                exponents.len(),
                centers.rows()
            )));
        }
        for &l in &exponents {
            // λ = 0 makes the self-overlap integral diverge and S singular.
            if !l.is_finite() || l <= 0.0 {
                return Err(MatrixError::BadStateExponent(l));
            }
        }
        if centers.data().iter().any(|c| !c.is_finite()) {
            return Err(MatrixError::Dimension("non-finite center".into()));
        }
        Ok(StateBasis { exponents, centers })
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.centers.cols()
    }

    /// `ψ_d(x)`.
    pub fn eval(&self, d: usize, x: &[f64]) -> f64 {
        let mut arg = 0.0;
        for (xi, ci) in x.iter().zip(self.centers.row(d)) {
            let dv = xi - ci;
            arg -= self.exponents[d] * dv * dv;
        }
        if arg < crate::network::KERNEL_EXP_FLOOR {
            0.0
        } else {
            arg.exp()
        }
    }

    /// State function `Ψ(x) = Σ_d c_d ψ_d(x)`.
    pub fn eval_state(&self, c: &[f64], x: &[f64]) -> f64 {
        (0..self.len()).map(|d| c[d] * self.eval(d, x)).sum()
    }
}

/// Hamiltonian and overlap matrices of the secular system.
#[derive(Debug, Clone)]
pub struct MatrixPair {
    pub h: Matrix,
    pub s: Matrix,
}

/// Full assembly output. The kinetic and potential parts are kept apart so
/// any coefficient vector yields an energy breakdown afterwards.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub pair: MatrixPair,
    pub kinetic: Matrix,
    pub potential: Matrix,
    /// True when the overlap diagonal needed a one-shot jitter to factorize.
    pub jitter_applied: bool,
}

/// Expected kinetic, potential, and total energy, in enats. `total` is
/// `kinetic + potential` by construction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

/// One-dimensional Gaussian product integral
/// `∫ Π_a exp{-k_a (u - c_a)²} du = √(π/K) exp{-Σ_{a<b} k_a k_b (c_a-c_b)²/K}`
/// with `K = Σ_a k_a`, returned as `(ln prefactor, exponent)`.
fn plain_product_1d(terms: &[(f64, f64)]) -> (f64, f64) {
    let k_total: f64 = terms.iter().map(|t| t.0).sum();
    let mut cross = 0.0;
    for a in 0..terms.len() {
        for b in (a + 1)..terms.len() {
            let d = terms[a].1 - terms[b].1;
            cross += terms[a].0 * terms[b].0 * d * d;
        }
    }
    (
        0.5 * (std::f64::consts::PI.ln() - k_total.ln()),
        -cross / k_total,
    )
}

/// One-dimensional Gaussian product integral against the input density
/// `N(μ, σ²)`:
/// `∫ Π_a exp{-k_a (u - c_a)²} N(μ,σ²)(u) du
///    = D^{-1/2} exp{-[2σ² Σ_{a<b} k_a k_b (c_a-c_b)² + Σ_a k_a (c_a-μ)²]/D}`
/// with `D = 2σ² Σ_a k_a + 1`, returned as `(ln prefactor, exponent)`.
fn weighted_product_1d(terms: &[(f64, f64)], mu: f64, sigma: f64) -> (f64, f64) {
    let two_sigma_sq = 2.0 * sigma * sigma;
    let k_total: f64 = terms.iter().map(|t| t.0).sum();
    let denom = two_sigma_sq * k_total + 1.0;
    let mut num = 0.0;
    for a in 0..terms.len() {
        let da = terms[a].1 - mu;
        num += terms[a].0 * da * da;
        for b in (a + 1)..terms.len() {
            let d = terms[a].1 - terms[b].1;
            num += two_sigma_sq * terms[a].0 * terms[b].0 * d * d;
        }
    }
    (-0.5 * denom.ln(), -num / denom)
}

/// Overlap element `S_mn = ∫ ψ_m ψ_n dx`.
pub fn overlap(m: usize, n: usize, basis: &StateBasis) -> f64 {
    let (lm, ln_) = (basis.exponents[m], basis.exponents[n]);
    let mut log_pref = KahanSum::new();
    let mut expo = KahanSum::new();
    for i in 0..basis.n_features() {
        let (lp, e) = plain_product_1d(&[
            (lm, basis.centers.get(m, i)),
            (ln_, basis.centers.get(n, i)),
        ]);
        log_pref.add(lp);
        expo.add(e);
    }
    (log_pref.total() + expo.total()).exp()
}

/// `Λ_mn = ∫ ψ_m ψ_n p(x) dx`.
pub fn lambda_mn(m: usize, n: usize, basis: &StateBasis, stats: &DatasetStats) -> f64 {
    weighted_element(basis, stats, &[(m, StateTerm::Basis), (n, StateTerm::Basis)], None, None)
}

/// `Ω_mnp = ∫ ψ_m ψ_n φ_p p(x) dx`.
pub fn omega_mnp(
    m: usize,
    n: usize,
    p: usize,
    basis: &StateBasis,
    net: &NetworkParams,
    stats: &DatasetStats,
) -> f64 {
    weighted_element(
        basis,
        stats,
        &[(m, StateTerm::Basis), (n, StateTerm::Basis)],
        Some((net, p)),
        None,
    )
}

/// `Φ_mnpq = ∫ ψ_m ψ_n φ_p φ_q p(x) dx`.
pub fn phi_mnpq(
    m: usize,
    n: usize,
    p: usize,
    q: usize,
    basis: &StateBasis,
    net: &NetworkParams,
    stats: &DatasetStats,
) -> f64 {
    weighted_element(
        basis,
        stats,
        &[(m, StateTerm::Basis), (n, StateTerm::Basis)],
        Some((net, p)),
        Some((net, q)),
    )
}

enum StateTerm {
    Basis,
}

fn weighted_element(
    basis: &StateBasis,
    stats: &DatasetStats,
    states: &[(usize, StateTerm)],
    kernel_p: Option<(&NetworkParams, usize)>,
    kernel_q: Option<(&NetworkParams, usize)>,
) -> f64 {
    let n_feat = basis.n_features();
    let mut log_pref = KahanSum::new();
    let mut expo = KahanSum::new();
    let mut terms: Vec<(f64, f64)> = Vec::with_capacity(4);
    for i in 0..n_feat {
        terms.clear();
        for (idx, _) in states {
            terms.push((basis.exponents[*idx], basis.centers.get(*idx, i)));
        }
        if let Some((net, p)) = kernel_p {
            terms.push((net.exponents[p], net.centers.get(p, i)));
        }
        if let Some((net, q)) = kernel_q {
            terms.push((net.exponents[q], net.centers.get(q, i)));
        }
        let (lp, e) = weighted_product_1d(&terms, stats.feature_means[i], stats.feature_stds[i]);
        log_pref.add(lp);
        expo.add(e);
    }
    (log_pref.total() + expo.total()).exp()
}

/// Scale of the kinetic operator, `2/((2π)^{N/2} |Σ|^{1/2})`.
///
/// The `(2π)^{N/2}` matches the printed definition of the operator
/// prefactor `ε = σ_x²/((2π)^{N/2}|Σ|^{1/2})`; it is what reproduces the
/// published POLLEN energies.
pub fn kinetic_scale(stats: &DatasetStats) -> f64 {
    let n = stats.feature_means.len() as f64;
    2.0 / ((2.0 * std::f64::consts::PI).powf(n / 2.0) * stats.sigma_det_sqrt())
}

/// Kinetic element
/// `T_mn = -ε Σ_i σ_i² ∫ ψ_m ∂²ψ_n/∂x_i² dx
///       = -scale · (λ_m λ_n / (λ_m+λ_n)) S_mn Σ_i σ_i² [2 (λ_m λ_n/(λ_m+λ_n)) (η_im-η_in)² - 1]`.
pub fn kinetic_element(m: usize, n: usize, basis: &StateBasis, stats: &DatasetStats) -> f64 {
    let (lm, ln_) = (basis.exponents[m], basis.exponents[n]);
    let ratio = lm * ln_ / (lm + ln_);
    let s_mn = overlap(m, n, basis);
    let mut acc = KahanSum::new();
    for i in 0..basis.n_features() {
        let d = basis.centers.get(m, i) - basis.centers.get(n, i);
        let sig = stats.feature_stds[i];
        acc.add(sig * sig * (2.0 * ratio * d * d - 1.0));
    }
    -kinetic_scale(stats) * ratio * s_mn * acc.total()
}

/// Potential element: the contraction of `(γ, β·w, α·w·w)` with
/// `Λ/Ω/Φ`, all targets summed.
pub fn potential_element(
    m: usize,
    n: usize,
    basis: &StateBasis,
    net: &NetworkParams,
    stats: &DatasetStats,
    pot: &PotentialConstants,
) -> f64 {
    let n_kernels = net.n_kernels();
    let lam = lambda_mn(m, n, basis, stats);
    let omegas: Vec<f64> = (0..n_kernels)
        .map(|p| omega_mnp(m, n, p, basis, net, stats))
        .collect();
    // Φ is symmetric in (p, q); compute the upper triangle once.
    let mut phis = vec![0.0; n_kernels * n_kernels];
    for p in 0..n_kernels {
        for q in p..n_kernels {
            let v = phi_mnpq(m, n, p, q, basis, net, stats);
            phis[p * n_kernels + q] = v;
            phis[q * n_kernels + p] = v;
        }
    }

    let mut total = 0.0;
    for k in 0..pot.n_targets() {
        let (a, b, g) = (pot.alpha[k], pot.beta[k], pot.gamma[k]);
        let w0 = net.bias(k);
        let mut acc = g * lam + b * w0 * lam + a * w0 * w0 * lam;
        for p in 0..n_kernels {
            let wp = net.kernel_weight(k, p + 1);
            acc += (b + 2.0 * a * w0) * wp * omegas[p];
            for q in 0..n_kernels {
                acc += a * wp * net.kernel_weight(k, q + 1) * phis[p * n_kernels + q];
            }
        }
        total += acc;
    }
    total
}

/// Full Hamiltonian element `H_mn = T_mn + V_mn`.
pub fn hamiltonian(
    m: usize,
    n: usize,
    basis: &StateBasis,
    net: &NetworkParams,
    stats: &DatasetStats,
    pot: &PotentialConstants,
) -> f64 {
    kinetic_element(m, n, basis, stats) + potential_element(m, n, basis, net, stats, pot)
}

/// Assemble the full `D×D` system. The upper triangle is computed and
/// mirrored, so symmetry is exact. The kinetic and potential parts are
/// kept in separate matrices.
pub fn assemble(
    basis: &StateBasis,
    net: &NetworkParams,
    stats: &DatasetStats,
    pot: &PotentialConstants,
) -> Result<Assembly, MatrixError> {
    let n_feat = basis.n_features();
    if net.n_features() != n_feat || stats.feature_means.len() != n_feat {
        return Err(MatrixError::Dimension(format!(
            "basis has {} features, network {}, stats {}",
            n_feat,
            net.n_features(),
            stats.feature_means.len()
        )));
    }
    if pot.n_targets() != net.n_outputs() {
        return Err(MatrixError::Dimension(
            "potential constants do not cover every output".into(),
        ));
    }
    let d = basis.len();
    let mut s = Matrix::zeros(d, d);
    let mut kin = Matrix::zeros(d, d);
    let mut pot_m = Matrix::zeros(d, d);
    for m in 0..d {
        for n in m..d {
            let sv = overlap(m, n, basis);
            let tv = kinetic_element(m, n, basis, stats);
            let vv = potential_element(m, n, basis, net, stats, pot);
            if !sv.is_finite() || !tv.is_finite() || !vv.is_finite() {
                return Err(MatrixError::NonFinite(m, n));
            }
            s.set(m, n, sv);
            s.set(n, m, sv);
            kin.set(m, n, tv);
            kin.set(n, m, tv);
            pot_m.set(m, n, vv);
            pot_m.set(n, m, vv);
        }
    }

    // Definiteness check with a single jitter retry on the diagonal. The
    // pivot floor is relative so that genuinely rank-deficient overlaps
    // (duplicate basis functions) are rejected rather than regularized:
    // a jittered singular S would hand the minimizer a spurious
    // zero-energy direction.
    let mut jitter_applied = false;
    if !is_positive_definite(&s) {
        let trace: f64 = (0..d).map(|i| s.get(i, i)).sum();
        let jitter = 1e-12 * trace / d as f64;
        for i in 0..d {
            s.set(i, i, s.get(i, i) + jitter);
        }
        jitter_applied = true;
        if !is_positive_definite(&s) {
            return Err(MatrixError::NotPositiveDefinite);
        }
    }

    let mut h = Matrix::zeros(d, d);
    for m in 0..d {
        for n in 0..d {
            h.set(m, n, kin.get(m, n) + pot_m.get(m, n));
        }
    }
    Ok(Assembly {
        pair: MatrixPair { h, s },
        kinetic: kin,
        potential: pot_m,
        jitter_applied,
    })
}

/// Cholesky with a relative pivot floor of `1e-10` of the largest
/// diagonal entry.
fn is_positive_definite(s: &Matrix) -> bool {
    let d = s.rows();
    let max_diag = (0..d).map(|i| s.get(i, i)).fold(0.0_f64, f64::max);
    let floor = 1e-10 * max_diag;
    match cholesky(s) {
        None => false,
        Some(l) => (0..d).all(|i| l.get(i, i) * l.get(i, i) >= floor),
    }
}

/// Energy breakdown of the state with coefficients `c`:
/// `T = c·T·c / c·S·c`, `V = c·V·c / c·S·c`, `E = T + V`.
pub fn energy_breakdown(c: &[f64], assembly: &Assembly) -> Result<EnergyBreakdown, MatrixError> {
    let norm = assembly.pair.s.quad_form(c, c);
    if norm.is_nan() || norm <= 0.0 {
        return Err(MatrixError::BadNorm(norm));
    }
    let kinetic = assembly.kinetic.quad_form(c, c) / norm;
    let potential = assembly.potential.quad_form(c, c) / norm;
    Ok(EnergyBreakdown {
        kinetic,
        potential,
        total: kinetic + potential,
    })
}

/// Potential `V(x) = p(x) Σ_k (α_k y_k² + β_k y_k + γ_k)`.
pub fn potential_value(
    x: &[f64],
    net: &NetworkParams,
    stats: &DatasetStats,
    pot: &PotentialConstants,
) -> Result<f64, MatrixError> {
    let y = eval_network(x, net)?;
    let mut q = 0.0;
    for k in 0..pot.n_targets() {
        q += pot.alpha[k] * y[k] * y[k] + pot.beta[k] * y[k] + pot.gamma[k];
    }
    Ok(stats.input_density(x) * q)
}

/// Force field `F_i(x) = -∂V/∂x_i`, in closed form.
pub fn force(
    x: &[f64],
    net: &NetworkParams,
    stats: &DatasetStats,
    pot: &PotentialConstants,
) -> Result<Vec<f64>, MatrixError> {
    let n_feat = net.n_features();
    if x.len() != n_feat {
        return Err(MatrixError::Dimension("input length".into()));
    }
    let density = stats.input_density(x);
    let kernels: Vec<f64> = (0..net.n_kernels()).map(|p| eval_basis(p, x, net)).collect();

    let mut out = vec![0.0; n_feat];
    for i in 0..n_feat {
        let pull = (x[i] - stats.feature_means[i])
            / (stats.feature_stds[i] * stats.feature_stds[i]);
        let mut acc = 0.0;
        for k in 0..pot.n_targets() {
            let (a, b, g) = (pot.alpha[k], pot.beta[k], pot.gamma[k]);
            let w0 = net.bias(k);
            // s0 = Σ_p w_p φ_p ; s1 = Σ_p w_p ξ_p (x_i - ω_pi) φ_p
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            for (p, phi) in kernels.iter().enumerate() {
                let wp = net.kernel_weight(k, p + 1);
                s0 += wp * phi;
                s1 += wp * net.exponents[p] * (x[i] - net.centers.get(p, i)) * phi;
            }
            acc += pull * (a * w0 * w0 + b * w0 + g)
                + (2.0 * a * w0 + b) * (2.0 * s1 + pull * s0)
                + a * (4.0 * s0 * s1 + pull * s0 * s0);
        }
        out[i] = density * acc;
    }
    Ok(out)
}
