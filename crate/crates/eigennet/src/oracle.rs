//! Independent numerical integration used to validate every closed form
//! before the fast path is trusted.
//!
//! Two schemes back the checks: Gauss-Hermite tensor quadrature for the
//! Gaussian-dominated integrands (overlap and Hamiltonian elements,
//! observable expectations) and plain uniform grids for the
//! mutual-information integrand, whose logarithmic factor is not
//! polynomial. Everything here integrates the raw N-dimensional integrand
//! directly; none of the per-dimension factorizations the closed forms
//! exploit are reused.

use rand::RngExt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DatasetStats;
use crate::linalg::Matrix;
use crate::matrix::{kinetic_scale, StateBasis};
use crate::network::{potential_constants, NetworkParams, PotentialConstants};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("tensor quadrature limited to 3 dimensions, got {0}")]
    CostGuard(usize),
    #[error("quadrature spec: {0}")]
    BadSpec(String),
}

/// Quadrature controls. `nodes` is per dimension; `half_width` only
/// applies to the uniform scheme, in units of the widest integrand factor.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes: usize,
    pub scheme: Scheme,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    Hermite,
    Uniform,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        // With per-term envelopes, 48 nodes leaves the worst observed
        // draw several digits under the 1e-8 acceptance tolerance.
        QuadratureSpec {
            nodes: 48,
            scheme: Scheme::Hermite,
            half_width: 8.0,
        }
    }
}

impl QuadratureSpec {
    fn check(&self) -> Result<(), OracleError> {
        if self.nodes < 8 {
            return Err(OracleError::BadSpec(format!(
                "need at least 8 nodes, got {}",
                self.nodes
            )));
        }
        if self.half_width < 6.0 {
            return Err(OracleError::BadSpec(
                "half width must cover at least 6 standard deviations".into(),
            ));
        }
        Ok(())
    }
}

/// Gauss-Hermite nodes and weights: `Σ w_j f(x_j) ≈ ∫ e^{-x²} f(x) dx`.
///
/// Newton iteration on the normalized three-term recurrence; standard
/// construction, accurate to near machine precision for n ≲ 128.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const EPS: f64 = 3e-14;
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    const MAX_IT: usize = 30;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..MAX_IT {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2
                    - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= EPS {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Per-dimension sampling points and weights for `∫ F dx` over an affine
/// Gauss-Hermite grid centered on the integrand's Gaussian envelope.
fn hermite_axis(center: f64, scale: f64, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let (t, w) = gauss_hermite(nodes);
    let xs: Vec<f64> = t.iter().map(|ti| center + scale * ti).collect();
    let ws: Vec<f64> = t
        .iter()
        .zip(&w)
        .map(|(ti, wi)| scale * wi * (ti * ti).exp())
        .collect();
    (xs, ws)
}

fn uniform_axis(lo: f64, hi: f64, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / (nodes - 1) as f64;
    let xs: Vec<f64> = (0..nodes).map(|k| lo + h * k as f64).collect();
    let mut ws = vec![h; nodes];
    ws[0] = 0.5 * h;
    ws[nodes - 1] = 0.5 * h;
    (xs, ws)
}

/// Tensor-product quadrature of `f` over per-dimension axes.
fn tensor_integrate(
    axes: &[(Vec<f64>, Vec<f64>)],
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let dims = axes.len();
    let total: usize = axes.iter().map(|a| a.0.len()).product();
    let mut x = vec![0.0; dims];
    let mut sum = crate::linalg::KahanSum::new();
    for flat in 0..total {
        let mut rem = flat;
        let mut weight = 1.0;
        for (d, (xs, ws)) in axes.iter().enumerate() {
            let idx = rem % xs.len();
            rem /= xs.len();
            x[d] = xs[idx];
            weight *= ws[idx];
        }
        sum.add(weight * f(&x));
    }
    sum.total()
}

fn guard_dims(n: usize) -> Result<(), OracleError> {
    if n > 3 {
        return Err(OracleError::CostGuard(n));
    }
    Ok(())
}

/// Envelope of `ψ_m ψ_n`, optionally sharpened by the input density.
fn state_pair_axes(
    m: usize,
    n: usize,
    basis: &StateBasis,
    stats: Option<&DatasetStats>,
    nodes: usize,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let (lm, ln_) = (basis.exponents[m], basis.exponents[n]);
    (0..basis.n_features())
        .map(|i| {
            let mut k = lm + ln_;
            let mut kc = lm * basis.centers.get(m, i) + ln_ * basis.centers.get(n, i);
            if let Some(st) = stats {
                let inv = 1.0 / (2.0 * st.feature_stds[i] * st.feature_stds[i]);
                k += inv;
                kc += inv * st.feature_means[i];
            }
            hermite_axis(kc / k, 1.0 / k.sqrt(), nodes)
        })
        .collect()
}

/// `∫ ψ_m ψ_n dx` by tensor quadrature.
pub fn numeric_overlap(
    m: usize,
    n: usize,
    basis: &StateBasis,
    spec: &QuadratureSpec,
) -> Result<f64, OracleError> {
    guard_dims(basis.n_features())?;
    spec.check()?;
    let axes = state_pair_axes(m, n, basis, None, spec.nodes);
    Ok(tensor_integrate(&axes, |x| basis.eval(m, x) * basis.eval(n, x)))
}

/// Log of `ψ_m ψ_n` at `x` (negative quadratic form).
#[inline]
fn log_state_pair(m: usize, n: usize, basis: &StateBasis, x: &[f64]) -> f64 {
    let mut arg = 0.0;
    for i in 0..x.len() {
        let dm = x[i] - basis.centers.get(m, i);
        let dn = x[i] - basis.centers.get(n, i);
        arg -= basis.exponents[m] * dm * dm + basis.exponents[n] * dn * dn;
    }
    arg
}

/// Log of the input density `p(x)`.
#[inline]
fn log_density(stats: &DatasetStats, x: &[f64]) -> f64 {
    let mut arg = 0.0;
    for i in 0..x.len() {
        let z = (x[i] - stats.feature_means[i]) / stats.feature_stds[i];
        arg += -0.5 * z * z
            - (stats.feature_stds[i] * (2.0 * std::f64::consts::PI).sqrt()).ln();
    }
    arg
}

/// Log of the kernel `φ_p(x)`.
#[inline]
fn log_kernel(p: usize, net: &NetworkParams, x: &[f64]) -> f64 {
    let mut sq = 0.0;
    for i in 0..x.len() {
        let d = x[i] - net.centers.get(p, i);
        sq += d * d;
    }
    -net.exponents[p] * sq
}

/// `∫ ψ_m ψ_n p(x) dx` by tensor quadrature.
pub fn numeric_lambda(
    m: usize,
    n: usize,
    basis: &StateBasis,
    stats: &DatasetStats,
    spec: &QuadratureSpec,
) -> Result<f64, OracleError> {
    guard_dims(basis.n_features())?;
    spec.check()?;
    let axes = state_pair_axes(m, n, basis, Some(stats), spec.nodes);
    Ok(tensor_integrate(&axes, |x| {
        (log_state_pair(m, n, basis, x) + log_density(stats, x)).exp()
    }))
}

/// `∫ ψ_m ψ_n φ_p p(x) dx` by tensor quadrature.
pub fn numeric_omega(
    m: usize,
    n: usize,
    p: usize,
    basis: &StateBasis,
    net: &NetworkParams,
    stats: &DatasetStats,
    spec: &QuadratureSpec,
) -> Result<f64, OracleError> {
    guard_dims(basis.n_features())?;
    spec.check()?;
    let axes = state_pair_axes(m, n, basis, Some(stats), spec.nodes);
    Ok(tensor_integrate(&axes, |x| {
        (log_state_pair(m, n, basis, x) + log_kernel(p, net, x) + log_density(stats, x)).exp()
    }))
}

/// `∫ ψ_m ψ_n φ_p φ_q p(x) dx` by tensor quadrature.
#[allow(clippy::too_many_arguments)]
pub fn numeric_phi(
    m: usize,
    n: usize,
    p: usize,
    q: usize,
    basis: &StateBasis,
    net: &NetworkParams,
    stats: &DatasetStats,
    spec: &QuadratureSpec,
) -> Result<f64, OracleError> {
    guard_dims(basis.n_features())?;
    spec.check()?;
    let axes = state_pair_axes(m, n, basis, Some(stats), spec.nodes);
    Ok(tensor_integrate(&axes, |x| {
        (log_state_pair(m, n, basis, x)
            + log_kernel(p, net, x)
            + log_kernel(q, net, x)
            + log_density(stats, x))
        .exp()
    }))
}

/// `∫ ψ_m Ĥ ψ_n dx` by tensor quadrature. The second derivatives of the
/// kinetic operator are applied to `ψ_n` analytically:
/// `∂²ψ_n/∂x_i² = (4λ_n²(x_i-η_in)² - 2λ_n) ψ_n`.
pub fn numeric_hamiltonian(
    m: usize,
    n: usize,
    basis: &StateBasis,
    net: &NetworkParams,
    stats: &DatasetStats,
    pot: &PotentialConstants,
    spec: &QuadratureSpec,
) -> Result<f64, OracleError> {
    let n_feat = basis.n_features();
    guard_dims(n_feat)?;
    spec.check()?;
    let ln_ = basis.exponents[n];
    let eps_scale = 0.5 * kinetic_scale(stats); // ε_i = σ_i² · eps_scale

    // The kinetic integrand carries no density factor and is much wider
    // than the potential one, so each term gets its own envelope.
    let kin_axes = state_pair_axes(m, n, basis, None, spec.nodes);
    let kinetic = tensor_integrate(&kin_axes, |x| {
        let mut lap = 0.0;
        for i in 0..n_feat {
            let d = x[i] - basis.centers.get(n, i);
            let sig = stats.feature_stds[i];
            lap += sig * sig * (4.0 * ln_ * ln_ * d * d - 2.0 * ln_);
        }
        -eps_scale * lap * log_state_pair(m, n, basis, x).exp()
    });

    let pot_axes = state_pair_axes(m, n, basis, Some(stats), spec.nodes);
    let n_kernels = net.n_kernels();
    let n_outputs = net.n_outputs();
    let mut kernels = vec![0.0; n_kernels];
    let potential = tensor_integrate(&pot_axes, move |x| {
        for (p, phi) in kernels.iter_mut().enumerate() {
            *phi = log_kernel(p, net, x).exp();
        }
        let mut quad = 0.0;
        for k in 0..n_outputs {
            let mut y = net.bias(k);
            for (p, phi) in kernels.iter().enumerate() {
                y += net.kernel_weight(k, p + 1) * phi;
            }
            quad += pot.alpha[k] * y * y + pot.beta[k] * y + pot.gamma[k];
        }
        (log_state_pair(m, n, basis, x) + log_density(stats, x)).exp() * quad
    });
    Ok(kinetic + potential)
}

/// `⟨V⟩` computed directly from the mutual-information integrand with
/// Gaussian densities, by nested uniform quadrature over the target and
/// then the inputs, weighted with `|Ψ|²/∫|Ψ|²`. Single-target only.
///
/// The target grid is centered on the conditional mean `y(x)` at every
/// input point — a grid fixed around the marginal mean loses the
/// conditional mass entirely once `|y - ρ|` exceeds a few `θ`, which
/// unconstrained networks do routinely. The input window covers both the
/// density and every basis function, with spacing set by the narrowest
/// integrand scale.
pub fn numeric_potential_expectation(
    basis: &StateBasis,
    c: &[f64],
    net: &NetworkParams,
    stats: &DatasetStats,
    chi: f64,
    t_nodes: usize,
) -> Result<f64, OracleError> {
    let n_feat = basis.n_features();
    if n_feat > 2 {
        return Err(OracleError::CostGuard(n_feat));
    }
    if net.n_outputs() != 1 {
        return Err(OracleError::BadSpec("MI oracle is single-target".into()));
    }
    // ±8 standard deviations per factor: the Chernoff bound exp(-z²/2)
    // leaves < 1e-12 of any Gaussian factor's mass outside.
    let z = 8.0;
    assert!((-z * z / 2.0_f64).exp() < 1e-12);

    let rho = stats.target_means[0];
    let theta = stats.target_stds[0];

    // Narrowest x-scale among the density, the basis, and the kernels.
    let mut finest = stats
        .feature_stds
        .iter()
        .fold(f64::INFINITY, |a, &s| a.min(s));
    for &l in &basis.exponents {
        finest = finest.min(1.0 / (2.0 * l).sqrt());
    }
    for &xi in &net.exponents {
        if xi > 0.0 {
            finest = finest.min(1.0 / (2.0 * xi).sqrt());
        }
    }

    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..n_feat)
        .map(|i| {
            let mut lo = stats.feature_means[i] - z * stats.feature_stds[i];
            let mut hi = stats.feature_means[i] + z * stats.feature_stds[i];
            for d in 0..basis.len() {
                let w = 1.0 / (2.0 * basis.exponents[d]).sqrt();
                lo = lo.min(basis.centers.get(d, i) - z * w);
                hi = hi.max(basis.centers.get(d, i) + z * w);
            }
            let nodes = (((hi - lo) / (finest / 3.0)).ceil() as usize).clamp(top_nodes(n_feat).0, top_nodes(n_feat).1);
            uniform_axis(lo, hi, nodes)
        })
        .collect();

    let ln_chi_norm = (chi * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let ln_theta_norm = (theta * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let mut num = crate::linalg::KahanSum::new();
    let mut den = crate::linalg::KahanSum::new();
    let dims = axes.len();
    let total: usize = axes.iter().map(|a| a.0.len()).product();
    let mut x = vec![0.0; dims];
    for flat in 0..total {
        let mut rem = flat;
        let mut wx = 1.0;
        for (d, (xs, ws)) in axes.iter().enumerate() {
            let idx = rem % xs.len();
            rem /= xs.len();
            x[d] = xs[idx];
            wx *= ws[idx];
        }
        let psi = basis.eval_state(c, &x);
        let psi_sq = psi * psi;
        let mut y = net.bias(0);
        for p in 0..net.n_kernels() {
            y += net.kernel_weight(0, p + 1) * log_kernel(p, net, &x).exp();
        }
        let px = log_density(stats, &x).exp();
        // Inner quadrature over the conditional's own support:
        // ∫ p(t|x) ln(p(t|x)/p(t)) dt on t ∈ y ± 8χ.
        let h = 2.0 * z * chi / (t_nodes - 1) as f64;
        let mut inner = 0.0;
        for j in 0..t_nodes {
            let t = y - z * chi + h * j as f64;
            let w = if j == 0 || j == t_nodes - 1 { 0.5 * h } else { h };
            let zc = (t - y) / chi;
            let zt = (t - rho) / theta;
            let ln_ptx = -0.5 * zc * zc - ln_chi_norm;
            let ln_pt = -0.5 * zt * zt - ln_theta_norm;
            inner += w * ln_ptx.exp() * (ln_ptx - ln_pt);
        }
        num.add(wx * psi_sq * px * inner);
        den.add(wx * psi_sq);
    }
    Ok(num.total() / den.total())
}

/// Node-count clamp for the MI grid: enough to resolve, few enough to
/// keep the 100-draw suite inside its time budget.
fn top_nodes(n_feat: usize) -> (usize, usize) {
    if n_feat == 1 {
        (201, 2001)
    } else {
        (101, 401)
    }
}

/// `⟨y_k⟩ = ∫ y_k |Ψ|² dx / ∫ |Ψ|² dx` by quadrature, expanded by
/// linearity over kernels and basis pairs so each raw product integrand
/// `φ_p ψ_d ψ_l` sits exactly on its own Gauss-Hermite envelope. Handles
/// any mix of kernel and state widths.
pub fn numeric_expected_output(
    net: &NetworkParams,
    basis: &StateBasis,
    c: &[f64],
    spec: &QuadratureSpec,
) -> Result<Vec<f64>, OracleError> {
    let n_feat = basis.n_features();
    guard_dims(n_feat)?;
    spec.check()?;
    let d_count = basis.len();
    let mut den = 0.0;
    for d in 0..d_count {
        for l in 0..d_count {
            let axes = state_pair_axes(d, l, basis, None, spec.nodes);
            den += c[d]
                * c[l]
                * tensor_integrate(&axes, |x| log_state_pair(d, l, basis, x).exp());
        }
    }
    let mut out = Vec::with_capacity(net.n_outputs());
    for k in 0..net.n_outputs() {
        let mut num = 0.0;
        for p in 0..net.n_kernels() {
            let wkp = net.kernel_weight(k, p + 1);
            if wkp == 0.0 {
                continue;
            }
            for d in 0..d_count {
                for l in 0..d_count {
                    // Envelope over all three Gaussian factors.
                    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..n_feat)
                        .map(|i| {
                            let kk = basis.exponents[d] + basis.exponents[l] + net.exponents[p];
                            let kc = basis.exponents[d] * basis.centers.get(d, i)
                                + basis.exponents[l] * basis.centers.get(l, i)
                                + net.exponents[p] * net.centers.get(p, i);
                            hermite_axis(kc / kk, 1.0 / kk.sqrt(), spec.nodes)
                        })
                        .collect();
                    num += wkp
                        * c[d]
                        * c[l]
                        * tensor_integrate(&axes, |x| {
                            (log_state_pair(d, l, basis, x) + log_kernel(p, net, x)).exp()
                        });
                }
            }
        }
        out.push(net.bias(k) + num / den);
    }
    Ok(out)
}

/// `∫ f(x) |Ψ|² dx / ∫ |Ψ|² dx` by quadrature.
///
/// Hermite scheme: `|Ψ|²` is expanded by linearity into basis-function
/// pairs and each raw integrand `f ψ_d ψ_l` is integrated on the pair's
/// own Gauss-Hermite envelope, so any mix of exponents is covered.
/// Uniform scheme: one uniform tensor window wide enough to hold every
/// basis function out to `half_width` of its standard deviations.
pub fn numeric_state_average(
    basis: &StateBasis,
    c: &[f64],
    spec: &QuadratureSpec,
    mut f: impl FnMut(&[f64]) -> f64,
) -> Result<f64, OracleError> {
    let n_feat = basis.n_features();
    guard_dims(n_feat)?;
    spec.check()?;
    let mut num = crate::linalg::KahanSum::new();
    let mut den = crate::linalg::KahanSum::new();
    match spec.scheme {
        Scheme::Hermite => {
            for d in 0..basis.len() {
                for l in 0..basis.len() {
                    let axes = state_pair_axes(d, l, basis, None, spec.nodes);
                    let weight = c[d] * c[l];
                    let mut pair_num = 0.0;
                    let mut pair_den = 0.0;
                    let dims = axes.len();
                    let total: usize = axes.iter().map(|a| a.0.len()).product();
                    let mut x = vec![0.0; dims];
                    for flat in 0..total {
                        let mut rem = flat;
                        let mut wx = 1.0;
                        for (k, (xs, ws)) in axes.iter().enumerate() {
                            let idx = rem % xs.len();
                            rem /= xs.len();
                            x[k] = xs[idx];
                            wx *= ws[idx];
                        }
                        let pair = log_state_pair(d, l, basis, &x).exp();
                        pair_num += wx * pair * f(&x);
                        pair_den += wx * pair;
                    }
                    num.add(weight * pair_num);
                    den.add(weight * pair_den);
                }
            }
        }
        Scheme::Uniform => {
            let widest = basis
                .exponents
                .iter()
                .map(|l| 0.5 / l.sqrt())
                .fold(0.0_f64, f64::max);
            let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..n_feat)
                .map(|i| {
                    let col: Vec<f64> =
                        (0..basis.len()).map(|d| basis.centers.get(d, i)).collect();
                    let lo = col.iter().fold(f64::INFINITY, |a, &b| a.min(b))
                        - spec.half_width * widest;
                    let hi = col.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
                        + spec.half_width * widest;
                    uniform_axis(lo, hi, spec.nodes)
                })
                .collect();
            let dims = axes.len();
            let total: usize = axes.iter().map(|a| a.0.len()).product();
            let mut x = vec![0.0; dims];
            for flat in 0..total {
                let mut rem = flat;
                let mut wx = 1.0;
                for (d, (xs, ws)) in axes.iter().enumerate() {
                    let idx = rem % xs.len();
                    rem /= xs.len();
                    x[d] = xs[idx];
                    wx *= ws[idx];
                }
                let psi = basis.eval_state(c, &x);
                let p = wx * psi * psi;
                num.add(p * f(&x));
                den.add(p);
            }
        }
    }
    Ok(num.total() / den.total())
}

// ── Validation harness ─────────────────────────────────────────────────

/// One random parameter draw, printable so failures can be reproduced.
#[derive(Debug, Clone, Serialize)]
pub struct Draw {
    pub n_features: usize,
    pub basis: StateBasis,
    pub net: NetworkParams,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    pub rho: f64,
    pub theta: f64,
    pub chi: f64,
    pub coeffs: Vec<f64>,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub q: usize,
}

impl Draw {
    pub fn stats(&self) -> DatasetStats {
        DatasetStats {
            feature_means: self.feature_means.clone(),
            feature_stds: self.feature_stds.clone(),
            target_means: vec![self.rho],
            target_stds: vec![self.theta],
            skewness: vec![0.0; self.n_features + 1],
            kurtosis: vec![0.0; self.n_features + 1],
            corr: Matrix::identity(self.n_features + 1),
        }
    }

    pub fn potential(&self) -> PotentialConstants {
        potential_constants(&[self.rho], &[self.theta], &[self.chi]).expect("valid draw")
    }
}

/// Sample a draw in the training parameter ranges. State exponents stay
/// off exact zero since that makes the basis invalid.
pub fn sample_draw(rng: &mut impl rand::Rng, n_features: usize, d: usize, p_kernels: usize) -> Draw {
    sample_draw_scaled(rng, n_features, d, p_kernels, 1e-3, 0.15)
}

/// Draw for the mutual-information comparison. The nested uniform grids
/// must resolve the density and the state on one window, so the scale
/// spread is kept commensurate; the closed forms' λ-dependence is already
/// covered at full range by the per-element checks.
pub fn sample_mi_draw(rng: &mut impl rand::Rng, n_features: usize, d: usize, p_kernels: usize) -> Draw {
    sample_draw_scaled(rng, n_features, d, p_kernels, 0.5, 0.3)
}

fn sample_draw_scaled(
    rng: &mut impl rand::Rng,
    n_features: usize,
    d: usize,
    p_kernels: usize,
    lambda_lo: f64,
    sigma_lo: f64,
) -> Draw {
    let exps: Vec<f64> = (0..d).map(|_| rng.random_range(lambda_lo..4.0)).collect();
    let centers: Vec<f64> = (0..d * n_features)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let basis = StateBasis::new(exps, Matrix::from_rows(d, n_features, centers)).unwrap();

    let weights = vec![(0..=p_kernels)
        .map(|_| rng.random_range(-4.0..4.0))
        .collect::<Vec<f64>>()];
    let kexps: Vec<f64> = (0..p_kernels).map(|_| rng.random_range(0.0..4.0)).collect();
    let kcenters: Vec<f64> = (0..p_kernels * n_features)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let net = NetworkParams::new(
        weights,
        kexps,
        Matrix::from_rows(p_kernels, n_features, kcenters),
    )
    .unwrap();

    let theta = rng.random_range(0.2..0.5);
    Draw {
        n_features,
        basis,
        net,
        feature_means: (0..n_features).map(|_| rng.random_range(-0.3..0.3)).collect(),
        feature_stds: (0..n_features).map(|_| rng.random_range(sigma_lo..0.5)).collect(),
        rho: rng.random_range(-0.3..0.3),
        theta,
        // The MI quadrature resolves the conditional density on a grid in
        // units of θ, so χ stays within a θ-comparable band.
        chi: theta * rng.random_range(0.3..1.0),
        coeffs: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
        m: rng.random_range(0..d),
        n: rng.random_range(0..d),
        p: rng.random_range(0..p_kernels),
        q: rng.random_range(0..p_kernels),
    }
}

/// Outcome of checking one closed form against its quadrature oracle.
#[derive(Debug, Clone, Serialize)]
pub struct FormulaReport {
    pub name: String,
    pub draws: usize,
    pub tolerance: f64,
    pub max_rel_err: f64,
    pub pass: bool,
    /// Pretty-printed worst draw, kept only when the check fails.
    pub worst_draw: Option<String>,
}

/// Full validation report, serializable as JSON.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub seed: u64,
    pub draws_per_formula: usize,
    pub formulas: Vec<FormulaReport>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.formulas.iter().all(|f| f.pass)
    }
}

/// Compare a closed form against its oracle over a set of draws. Draws
/// are independent, so they fan out over the available cores; the
/// reduction is sequential and the report deterministic.
pub fn compare_formula(
    name: &str,
    tolerance: f64,
    draws: &[Draw],
    closed: impl Fn(&Draw) -> f64 + Sync,
    oracle: impl Fn(&Draw) -> f64 + Sync,
) -> FormulaReport {
    let n_threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(draws.len().max(1));
    let chunk = draws.len().div_ceil(n_threads);
    let rel_errs: Vec<f64> = std::thread::scope(|s| {
        let handles: Vec<_> = draws
            .chunks(chunk)
            .map(|part| {
                let closed = &closed;
                let oracle = &oracle;
                s.spawn(move || {
                    part.iter()
                        .map(|d| {
                            let a = closed(d);
                            let b = oracle(d);
                            (a - b).abs() / b.abs().max(1e-300)
                        })
                        .collect::<Vec<f64>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("comparison thread"))
            .collect()
    });
    let mut max_rel = 0.0;
    let mut worst: Option<&Draw> = None;
    for (d, rel) in draws.iter().zip(&rel_errs) {
        if *rel > max_rel {
            max_rel = *rel;
            worst = Some(d);
        }
    }
    let pass = max_rel <= tolerance;
    FormulaReport {
        name: name.to_string(),
        draws: draws.len(),
        tolerance,
        max_rel_err: max_rel,
        pass,
        worst_draw: if pass {
            None
        } else {
            worst.map(|d| format!("{d:?}"))
        },
    }
}

/// Run the whole closed-form-versus-quadrature suite.
pub fn validate(seed: u64, draws_per_formula: usize) -> ValidationReport {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    let mut tensor_draws = Vec::with_capacity(draws_per_formula);
    for i in 0..draws_per_formula {
        let n_features = 1 + i % 3;
        tensor_draws.push(sample_draw(&mut rng, n_features, 3, 3));
    }
    let mut mi_draws = Vec::with_capacity(draws_per_formula);
    for i in 0..draws_per_formula {
        let n_features = 1 + i % 2;
        mi_draws.push(sample_mi_draw(&mut rng, n_features, 3, 3));
    }

    // Plain-product integrands sit exactly on their Gauss-Hermite
    // envelope and need few nodes; anything with network kernels inside
    // carries an envelope mismatch and gets the full default count.
    let cheap = QuadratureSpec {
        nodes: 32,
        ..QuadratureSpec::default()
    };
    let spec = QuadratureSpec::default();
    let formulas = vec![
        compare_formula(
            "overlap_s",
            1e-8,
            &tensor_draws,
            |d| crate::matrix::overlap(d.m, d.n, &d.basis),
            |d| numeric_overlap(d.m, d.n, &d.basis, &cheap).unwrap(),
        ),
        compare_formula(
            "lambda",
            1e-8,
            &tensor_draws,
            |d| crate::matrix::lambda_mn(d.m, d.n, &d.basis, &d.stats()),
            |d| numeric_lambda(d.m, d.n, &d.basis, &d.stats(), &cheap).unwrap(),
        ),
        compare_formula(
            "omega",
            1e-8,
            &tensor_draws,
            |d| crate::matrix::omega_mnp(d.m, d.n, d.p, &d.basis, &d.net, &d.stats()),
            |d| numeric_omega(d.m, d.n, d.p, &d.basis, &d.net, &d.stats(), &spec).unwrap(),
        ),
        compare_formula(
            "phi",
            1e-8,
            &tensor_draws,
            |d| crate::matrix::phi_mnpq(d.m, d.n, d.p, d.q, &d.basis, &d.net, &d.stats()),
            |d| {
                numeric_phi(d.m, d.n, d.p, d.q, &d.basis, &d.net, &d.stats(), &spec).unwrap()
            },
        ),
        compare_formula(
            "hamiltonian",
            1e-8,
            &tensor_draws,
            |d| crate::matrix::hamiltonian(d.m, d.n, &d.basis, &d.net, &d.stats(), &d.potential()),
            |d| {
                numeric_hamiltonian(
                    d.m,
                    d.n,
                    &d.basis,
                    &d.net,
                    &d.stats(),
                    &d.potential(),
                    &spec,
                )
                .unwrap()
            },
        ),
        compare_formula(
            "expected_output",
            1e-8,
            &tensor_draws,
            |d| crate::metrics::expected_output(&d.net, &d.basis, &d.coeffs)[0],
            |d| numeric_expected_output(&d.net, &d.basis, &d.coeffs, &cheap).unwrap()[0],
        ),
        compare_formula(
            "expected_position",
            1e-8,
            &tensor_draws,
            |d| crate::metrics::expected_position(&d.basis, &d.coeffs, 0),
            |d| numeric_state_average(&d.basis, &d.coeffs, &cheap, |x| x[0]).unwrap(),
        ),
        compare_formula(
            "potential_expectation_mi",
            1e-6,
            &mi_draws,
            |d| {
                let stats = d.stats();
                let pot = d.potential();
                let asm = crate::matrix::assemble(&d.basis, &d.net, &stats, &pot).unwrap();
                crate::matrix::energy_breakdown(&d.coeffs, &asm).unwrap().potential
            },
            |d| {
                numeric_potential_expectation(&d.basis, &d.coeffs, &d.net, &d.stats(), d.chi, 201)
                    .unwrap()
            },
        ),
    ];
    ValidationReport {
        schema_version: 1,
        seed,
        draws_per_formula,
        formulas,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gauss_hermite_even_moments() {
        // ∫ e^{-x²} dx = √π, ∫ e^{-x²} x² dx = √π/2, ∫ e^{-x²} x⁴ dx = 3√π/4
        let (x, w) = gauss_hermite(24);
        let m0: f64 = w.iter().sum();
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        let pi_sqrt = std::f64::consts::PI.sqrt();
        assert!((m0 - pi_sqrt).abs() < 1e-13);
        assert!((m2 - pi_sqrt / 2.0).abs() < 1e-13);
        assert!((m4 - 3.0 * pi_sqrt / 4.0).abs() < 1e-13);
    }

    #[test]
    fn pure_gaussian_overlap_analytic() {
        let basis = StateBasis::new(vec![0.7], Matrix::from_rows(1, 1, vec![0.2])).unwrap();
        let spec = QuadratureSpec::default();
        let v = numeric_overlap(0, 0, &basis, &spec).unwrap();
        let expect = (std::f64::consts::PI / 1.4).sqrt();
        assert!((v - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn node_count_plateau() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = sample_draw(&mut rng, 2, 3, 3);
        let at = |nodes| {
            let spec = QuadratureSpec {
                nodes,
                ..QuadratureSpec::default()
            };
            numeric_overlap(d.m, d.n, &d.basis, &spec).unwrap()
        };
        let reference = at(96);
        let e16 = (at(16) - reference).abs();
        let e32 = (at(32) - reference).abs();
        // Both errors may already sit at machine precision; only genuine
        // divergence is a failure.
        assert!(
            e32 <= e16.max(1e-13 * reference.abs()),
            "quadrature must not diverge with more nodes"
        );
        assert!((at(32) - at(64)).abs() < 1e-12 * reference.abs().max(1.0));
    }

    #[test]
    fn cost_guard_rejects_high_dims() {
        let basis = StateBasis::new(
            vec![1.0],
            Matrix::from_rows(1, 4, vec![0.0, 0.0, 0.0, 0.0]),
        )
        .unwrap();
        assert!(matches!(
            numeric_overlap(0, 0, &basis, &QuadratureSpec::default()),
            Err(OracleError::CostGuard(4))
        ));
    }

    #[test]
    fn independence_construction_zeroes_mi() {
        // y constant at ρ and χ = θ: p(t|x) = p(t), so the MI integrand
        // vanishes and ⟨V⟩ → 0.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut d = sample_mi_draw(&mut rng, 1, 2, 2);
        for w in d.net.weights[0].iter_mut() {
            *w = 0.0;
        }
        d.net.weights[0][0] = d.rho;
        let v =
            numeric_potential_expectation(&d.basis, &d.coeffs, &d.net, &d.stats(), d.theta, 201)
                .unwrap();
        assert!(v.abs() < 1e-9, "independence must zero the MI, got {v}");
    }

    #[test]
    fn mi_expectation_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let d = sample_mi_draw(&mut rng, 1, 2, 2);
            let v =
                numeric_potential_expectation(&d.basis, &d.coeffs, &d.net, &d.stats(), d.chi, 201)
                    .unwrap();
            assert!(v >= -1e-9, "mutual information must be non-negative, got {v}");
        }
    }

    #[test]
    fn fault_injection_names_the_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let draws: Vec<Draw> = (0..5).map(|i| sample_draw(&mut rng, 1 + i % 3, 3, 3)).collect();
        let spec = QuadratureSpec::default();
        let report = compare_formula(
            "lambda",
            1e-8,
            &draws,
            // Sign bug injected on purpose.
            |d| -crate::matrix::lambda_mn(d.m, d.n, &d.basis, &d.stats()),
            |d| numeric_lambda(d.m, d.n, &d.basis, &d.stats(), &spec).unwrap(),
        );
        assert!(!report.pass);
        assert_eq!(report.name, "lambda");
        assert!(report.worst_draw.is_some());
    }

    #[test]
    fn small_validation_run_passes() {
        let report = validate(99, 6);
        for f in &report.formulas {
            assert!(
                f.pass,
                "{} exceeded tolerance: {} > {} ({:?})",
                f.name, f.max_rel_err, f.tolerance, f.worst_draw
            );
        }
    }
}
