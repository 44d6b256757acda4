//! Post-solution observables and information-theoretic diagnostics.
//!
//! Given a solved state `Ψ = Σ_d c_d ψ_d`, this module evaluates the
//! expected network output, the expected position and its variance, a
//! one-dimensional uncertainty check, the self-organization/emergence/
//! complexity triple derived from the work of the force field, and the
//! pointwise refinement of the residual scale `χ(x)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DatasetStats;
use crate::matrix::{overlap, StateBasis};
use crate::network::{eval_network, NetworkParams};
use crate::oracle::gauss_hermite;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("expected potential must be non-negative, got {0}")]
    NegativePotential(f64),
    #[error("expected potential {v} exceeds the free-system entropy {h0}; the entropy bound is violated")]
    PotentialAboveBound { v: f64, h0: f64 },
    #[error("variance came out at {0}, below the numerical floor")]
    NegativeVariance(f64),
    #[error("momentum variance came out negative: {0}")]
    NegativeMomentumVariance(f64),
    #[error("uncertainty check requires a single feature, got {0}")]
    NotOneDimensional(usize),
    #[error("χ refinement requires a single target, got {0}")]
    NotSingleTarget(usize),
    #[error("χ refinement inapplicable: every grid point is masked")]
    AllMasked,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Information diagnostics of a solution, all derived from `⟨V⟩` and the
/// free-system entropy `h₀ = N ln Δ` (in nats).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InfoReport {
    pub h0: f64,
    pub work: f64,
    pub self_organization: f64,
    pub emergence: f64,
    pub complexity: f64,
}

/// `h₀ = N ln Δ`, `W = h₀ - ⟨V⟩`, `ℰ = ⟨V⟩/h₀`, `𝒮 = 1 - ℰ`, `𝒞 = 𝒮ℰ`.
pub fn info_report(v_exp: f64, n_features: usize, delta_width: f64) -> Result<InfoReport, MetricsError> {
    if v_exp < 0.0 {
        return Err(MetricsError::NegativePotential(v_exp));
    }
    let h0 = n_features as f64 * delta_width.ln();
    if v_exp > h0 {
        return Err(MetricsError::PotentialAboveBound { v: v_exp, h0 });
    }
    let emergence = v_exp / h0;
    let self_organization = 1.0 - emergence;
    Ok(InfoReport {
        h0,
        work: h0 - v_exp,
        self_organization,
        emergence,
        complexity: self_organization * emergence,
    })
}

/// `c·S·c` for the basis, used to normalize the state internally.
fn state_norm_sq(basis: &StateBasis, c: &[f64]) -> f64 {
    let d = basis.len();
    let mut acc = 0.0;
    for a in 0..d {
        for b in 0..d {
            acc += c[a] * c[b] * overlap(a, b, basis);
        }
    }
    acc
}

/// One-dimensional plain Gaussian-pair integral `∫ ψ_d ψ_l dx_i`.
fn pair_overlap_1d(basis: &StateBasis, d: usize, l: usize, i: usize) -> f64 {
    let (ld, ll) = (basis.exponents[d], basis.exponents[l]);
    let k = ld + ll;
    let diff = basis.centers.get(d, i) - basis.centers.get(l, i);
    (std::f64::consts::PI / k).sqrt() * (-(ld * ll / k) * diff * diff).exp()
}

/// Expected network outputs `⟨y_k⟩ = ∫ y_k |Ψ|² dx / ∫ |Ψ|² dx`, closed
/// form. The coefficient vector is normalized internally.
pub fn expected_output(net: &NetworkParams, basis: &StateBasis, c: &[f64]) -> Vec<f64> {
    let d_count = basis.len();
    let n_feat = basis.n_features();
    let norm = state_norm_sq(basis, c);
    (0..net.n_outputs())
        .map(|k| {
            let mut acc = 0.0;
            for p in 0..net.n_kernels() {
                let xi = net.exponents[p];
                let wkp = net.kernel_weight(k, p + 1);
                if wkp == 0.0 {
                    continue;
                }
                for d in 0..d_count {
                    for l in 0..d_count {
                        let (ld, ll) = (basis.exponents[d], basis.exponents[l]);
                        let total = xi + ld + ll;
                        let mut expo = 0.0;
                        for i in 0..n_feat {
                            let om = net.centers.get(p, i);
                            let ed = basis.centers.get(d, i);
                            let el = basis.centers.get(l, i);
                            expo -= (xi * (ll * (om - el) * (om - el) + ld * (om - ed) * (om - ed))
                                + ld * ll * (el - ed) * (el - ed))
                                / total;
                        }
                        acc += wkp
                            * c[d]
                            * c[l]
                            * (std::f64::consts::PI / total).powf(n_feat as f64 / 2.0)
                            * expo.exp();
                    }
                }
            }
            net.bias(k) + acc / norm
        })
        .collect()
}

/// Expected position `⟨x_i⟩`, closed form, internally normalized.
pub fn expected_position(basis: &StateBasis, c: &[f64], i: usize) -> f64 {
    let d_count = basis.len();
    let n_feat = basis.n_features();
    let norm = state_norm_sq(basis, c);
    let mut acc = 0.0;
    for d in 0..d_count {
        for l in 0..d_count {
            let (ld, ll) = (basis.exponents[d], basis.exponents[l]);
            let k = ld + ll;
            let center = (ld * basis.centers.get(d, i) + ll * basis.centers.get(l, i)) / k;
            let mut v = center;
            for j in 0..n_feat {
                v *= pair_overlap_1d(basis, d, l, j);
            }
            acc += c[d] * c[l] * v;
        }
    }
    acc / norm
}

/// Second moment `⟨x_i²⟩`. No closed form is printed for this one, so the
/// per-pair one-dimensional integral is done by Gauss-Hermite quadrature
/// (exact here: the integrand is a quadratic times a Gaussian).
pub fn position_second_moment(basis: &StateBasis, c: &[f64], i: usize) -> f64 {
    let d_count = basis.len();
    let n_feat = basis.n_features();
    let norm = state_norm_sq(basis, c);
    let (nodes, weights) = gauss_hermite(24);
    let mut acc = 0.0;
    for d in 0..d_count {
        for l in 0..d_count {
            let (ld, ll) = (basis.exponents[d], basis.exponents[l]);
            let k = ld + ll;
            let ed = basis.centers.get(d, i);
            let el = basis.centers.get(l, i);
            let center = (ld * ed + ll * el) / k;
            let scale = 1.0 / k.sqrt();
            // ∫ x² exp{-λ_d(x-η_d)²-λ_l(x-η_l)²} dx on the product envelope.
            let mut q = 0.0;
            for (t, w) in nodes.iter().zip(&weights) {
                let x = center + scale * t;
                let g = (-(ld * (x - ed) * (x - ed) + ll * (x - el) * (x - el))).exp();
                q += scale * w * (t * t).exp() * x * x * g;
            }
            let mut v = q;
            for j in 0..n_feat {
                if j != i {
                    v *= pair_overlap_1d(basis, d, l, j);
                }
            }
            acc += c[d] * c[l] * v;
        }
    }
    acc / norm
}

/// Variance `(Δx_i)² = ⟨x_i²⟩ - ⟨x_i⟩²`.
pub fn variance_position(basis: &StateBasis, c: &[f64], i: usize) -> Result<f64, MetricsError> {
    let mean = expected_position(basis, c, i);
    let second = position_second_moment(basis, c, i);
    let var = second - mean * mean;
    if var < -1e-10 {
        return Err(MetricsError::NegativeVariance(var));
    }
    Ok(var.max(0.0))
}

/// Outcome of the one-dimensional uncertainty check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub delta_x: f64,
    pub delta_p: f64,
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Check `Δx·Δp ≥ σ_x/2` for a real one-dimensional state.
///
/// `⟨p²⟩ = -σ_x² ∫ Ψ Ψ'' dx / ∫ Ψ² dx` with the second derivative taken
/// analytically on the Gaussian basis; `⟨p⟩ = 0` for real `Ψ`.
pub fn uncertainty_check(
    basis: &StateBasis,
    c: &[f64],
    sigma_x: f64,
) -> Result<UncertaintyReport, MetricsError> {
    if basis.n_features() != 1 {
        return Err(MetricsError::NotOneDimensional(basis.n_features()));
    }
    let d_count = basis.len();
    let norm = state_norm_sq(basis, c);
    let mut curvature = 0.0;
    for d in 0..d_count {
        for l in 0..d_count {
            // ∫ ψ_d ψ_l'' dx = S_dl · 2r (2r Δη² - 1), r = λ_d λ_l/(λ_d+λ_l).
            let (ld, ll) = (basis.exponents[d], basis.exponents[l]);
            let r = ld * ll / (ld + ll);
            let diff = basis.centers.get(d, 0) - basis.centers.get(l, 0);
            let s = pair_overlap_1d(basis, d, l, 0);
            curvature += c[d] * c[l] * s * 2.0 * r * (2.0 * r * diff * diff - 1.0);
        }
    }
    let p_sq = -sigma_x * sigma_x * curvature / norm;
    if p_sq < 0.0 {
        return Err(MetricsError::NegativeMomentumVariance(p_sq));
    }
    let delta_x = variance_position(basis, c, 0)?.sqrt();
    let delta_p = p_sq.sqrt();
    let bound = sigma_x / 2.0;
    let margin = delta_x * delta_p - bound;
    Ok(UncertaintyReport {
        delta_x,
        delta_p,
        bound,
        margin,
        pass: margin >= -1e-9,
    })
}

/// A point of the refined `χ(x)` table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChiPoint {
    pub x: Vec<f64>,
    pub chi: f64,
    pub masked: bool,
}

/// Result of the pointwise `χ(x)` fixed-point iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChiRefinement {
    pub points: Vec<ChiPoint>,
    pub masked_fraction: f64,
    pub iterations_run: usize,
    /// Whether `max |Δχ|` dropped below 1e-6; reported, never asserted.
    pub converged: bool,
}

/// Floor under `|Ψ|⁴` below which the refinement is meaningless.
pub const PSI4_FLOOR: f64 = 1e-280;

/// Iterate the single-target fixed point
/// `χ_{τ+1}(x) = √(θ² − 2πθ⁴ · p(x)²/|Ψ|⁴ · exp{(y-ρ)²/(θ²-χ_τ²)})`
/// on a user grid. Points where the radicand goes negative, where
/// `θ² − χ_τ²` is not positive, or where `|Ψ|⁴` underflows are masked and
/// reported, never silently dropped.
pub fn refine_chi(
    net: &NetworkParams,
    basis: &StateBasis,
    c: &[f64],
    stats: &DatasetStats,
    grid: &[Vec<f64>],
    chi0: f64,
    max_iterations: usize,
) -> Result<ChiRefinement, MetricsError> {
    if net.n_outputs() != 1 {
        return Err(MetricsError::NotSingleTarget(net.n_outputs()));
    }
    if stats.target_means.len() != 1 {
        return Err(MetricsError::NotSingleTarget(stats.target_means.len()));
    }
    let rho = stats.target_means[0];
    let theta = stats.target_stds[0];
    let theta_sq = theta * theta;
    let norm = state_norm_sq(basis, c).sqrt();

    struct PointState {
        x: Vec<f64>,
        y: f64,
        psi4: f64,
        px: f64,
        chi: f64,
        masked: bool,
    }
    let mut points: Vec<PointState> = grid
        .iter()
        .map(|x| {
            let psi = basis.eval_state(c, x) / norm;
            let y = eval_network(x, net).expect("grid dims")[0];
            PointState {
                x: x.clone(),
                y,
                psi4: psi.powi(4),
                px: stats.input_density(x),
                chi: chi0,
                masked: false,
            }
        })
        .collect();

    let mut iterations_run = 0;
    let mut converged = false;
    for _ in 0..max_iterations {
        iterations_run += 1;
        let mut max_delta = 0.0_f64;
        for pt in points.iter_mut() {
            if pt.masked {
                continue;
            }
            let gap = theta_sq - pt.chi * pt.chi;
            if gap <= 0.0 || pt.psi4 < PSI4_FLOOR {
                pt.masked = true;
                continue;
            }
            let dy = pt.y - rho;
            let radicand = theta_sq
                - 2.0 * std::f64::consts::PI * theta_sq * theta_sq * (pt.px * pt.px / pt.psi4)
                    * (dy * dy / gap).exp();
            if radicand < 0.0 || !radicand.is_finite() {
                pt.masked = true;
                continue;
            }
            let next = radicand.sqrt();
            max_delta = max_delta.max((next - pt.chi).abs());
            pt.chi = next;
        }
        if points.iter().all(|p| p.masked) {
            return Err(MetricsError::AllMasked);
        }
        if max_delta < 1e-6 {
            converged = true;
            break;
        }
    }

    let masked = points.iter().filter(|p| p.masked).count();
    Ok(ChiRefinement {
        masked_fraction: masked as f64 / points.len() as f64,
        points: points
            .into_iter()
            .map(|p| ChiPoint {
                x: p.x,
                chi: p.chi,
                masked: p.masked,
            })
            .collect(),
        iterations_run,
        converged,
    })
}
