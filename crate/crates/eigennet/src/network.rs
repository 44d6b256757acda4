//! RBF network evaluation and the constants of the mutual-information
//! potential.
//!
//! The network is a single hidden layer of Gaussian kernels,
//! `y_k(x) = Σ_p w_kp exp{-ξ_p ‖x - ω_p‖²} + w_k0`. Integrating the
//! mutual information between one target and the inputs over the target
//! (all densities Gaussian) leaves, for each output, a quadratic
//! `α_k y_k² + β_k y_k + γ_k` multiplying the input density. The
//! coefficients depend on the target moments (ρ_k, θ_k) and on the
//! residual scale χ_k of the network on the dataset.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::RawDataset;
use crate::linalg::Matrix;

/// Kernel exponents below this are flushed to zero kernel value instead of
/// calling `exp` on them; `exp(-700)` is already denormal territory.
pub const KERNEL_EXP_FLOOR: f64 = -700.0;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("kernel exponent {0} is negative")]
    NegativeExponent(f64),
    #[error("non-finite parameter")]
    NonFinite,
    #[error("network fits the data exactly; the residual scale is zero and the potential offset diverges")]
    ZeroResidual,
    #[error("target scale must be positive, got {0}")]
    BadTargetScale(f64),
    #[error("residual scale must be positive, got {0}")]
    BadResidualScale(f64),
    #[error("dataset is empty")]
    EmptyDataset,
}

/// Weights, exponents, and centers of the RBF network.
///
/// `weights[k]` is `[w_k0, w_k1, …, w_kP]` — bias first. `centers` is one
/// row per kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    #[serde(rename = "w")]
    pub weights: Vec<Vec<f64>>,
    #[serde(rename = "xi")]
    pub exponents: Vec<f64>,
    #[serde(rename = "omega")]
    pub centers: Matrix,
}

impl NetworkParams {
    pub fn new(
        weights: Vec<Vec<f64>>,
        exponents: Vec<f64>,
        centers: Matrix,
    ) -> Result<Self, NetworkError> {
        let p = exponents.len();
        if p == 0 {
            return Err(NetworkError::Dimension("need at least one kernel".into()));
        }
        if centers.rows() != p {
            return Err(NetworkError::Dimension(format!(
                "{} kernels but {} center rows",
                p,
                centers.rows()
            )));
        }
        if weights.is_empty() || weights.iter().any(|row| row.len() != p + 1) {
            return Err(NetworkError::Dimension(
                "each output needs bias plus one weight per kernel".into(),
            ));
        }
        for &xi in &exponents {
            if !xi.is_finite() {
                return Err(NetworkError::NonFinite);
            }
            if xi < 0.0 {
                return Err(NetworkError::NegativeExponent(xi));
            }
        }
        if weights.iter().flatten().any(|w| !w.is_finite())
            || centers.data().iter().any(|c| !c.is_finite())
        {
            return Err(NetworkError::NonFinite);
        }
        Ok(NetworkParams {
            weights,
            exponents,
            centers,
        })
    }

    pub fn n_outputs(&self) -> usize {
        self.weights.len()
    }

    pub fn n_kernels(&self) -> usize {
        self.exponents.len()
    }

    pub fn n_features(&self) -> usize {
        self.centers.cols()
    }

    pub fn bias(&self, k: usize) -> f64 {
        self.weights[k][0]
    }

    /// Kernel weight `w_kp` for kernel index `p` in `1..=P`.
    pub fn kernel_weight(&self, k: usize, p: usize) -> f64 {
        self.weights[k][p]
    }
}

/// Per-target constants of the potential quadratic plus the residual
/// scale they were computed from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialConstants {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub chi: Vec<f64>,
}

impl PotentialConstants {
    pub fn n_targets(&self) -> usize {
        self.alpha.len()
    }
}

/// Value of kernel `p` at `x`: `exp{-ξ_p ‖x - ω_p‖²} ∈ (0, 1]`.
pub fn eval_basis(p: usize, x: &[f64], params: &NetworkParams) -> f64 {
    debug_assert_eq!(x.len(), params.n_features());
    let center = params.centers.row(p);
    let mut sq = 0.0;
    for (xi, ci) in x.iter().zip(center) {
        let d = xi - ci;
        sq += d * d;
    }
    let arg = -params.exponents[p] * sq;
    if arg < KERNEL_EXP_FLOOR {
        0.0
    } else {
        arg.exp()
    }
}

/// Network output vector at `x`.
pub fn eval_network(x: &[f64], params: &NetworkParams) -> Result<Vec<f64>, NetworkError> {
    if x.len() != params.n_features() {
        return Err(NetworkError::Dimension(format!(
            "input has {} features, network expects {}",
            x.len(),
            params.n_features()
        )));
    }
    let kernels: Vec<f64> = (0..params.n_kernels())
        .map(|p| eval_basis(p, x, params))
        .collect();
    Ok((0..params.n_outputs())
        .map(|k| {
            let mut y = params.bias(k);
            for (p, phi) in kernels.iter().enumerate() {
                y += params.kernel_weight(k, p + 1) * phi;
            }
            y
        })
        .collect())
}

/// Root-mean-square residual per target over the dataset (divisor 𝒟,
/// the maximum-likelihood convention).
pub fn compute_chi(params: &NetworkParams, d: &RawDataset) -> Result<Vec<f64>, NetworkError> {
    if d.is_empty() {
        return Err(NetworkError::EmptyDataset);
    }
    let c = params.n_outputs();
    if d.n_targets() != c {
        return Err(NetworkError::Dimension(format!(
            "dataset has {} targets, network has {} outputs",
            d.n_targets(),
            c
        )));
    }
    let mut acc = vec![0.0; c];
    for i in 0..d.len() {
        let y = eval_network(d.x.row(i), params)?;
        for k in 0..c {
            let r = y[k] - d.t.get(i, k);
            acc[k] += r * r;
        }
    }
    let n = d.len() as f64;
    let chi: Vec<f64> = acc.iter().map(|s| (s / n).sqrt()).collect();
    if chi.contains(&0.0) {
        return Err(NetworkError::ZeroResidual);
    }
    Ok(chi)
}

/// Potential-quadratic constants for one target:
/// `α = 1/(2θ²)`, `β = -ρ/θ²`, `γ = (ρ² + χ²)/(2θ²) - ln(χ√e/θ)`.
pub fn potential_constants_single(
    rho: f64,
    theta: f64,
    chi: f64,
) -> Result<(f64, f64, f64), NetworkError> {
    if theta <= 0.0 {
        return Err(NetworkError::BadTargetScale(theta));
    }
    if chi <= 0.0 {
        return Err(NetworkError::BadResidualScale(chi));
    }
    let alpha = 1.0 / (2.0 * theta * theta);
    let beta = -rho / (theta * theta);
    let gamma = (rho * rho + chi * chi) / (2.0 * theta * theta)
        - (chi * std::f64::consts::E.sqrt() / theta).ln();
    Ok((alpha, beta, gamma))
}

/// Constants for every target from the target moments and residual scales.
pub fn potential_constants(
    rho: &[f64],
    theta: &[f64],
    chi: &[f64],
) -> Result<PotentialConstants, NetworkError> {
    if rho.len() != theta.len() || rho.len() != chi.len() {
        return Err(NetworkError::Dimension(
            "rho/theta/chi length mismatch".into(),
        ));
    }
    let mut alpha = Vec::with_capacity(rho.len());
    let mut beta = Vec::with_capacity(rho.len());
    let mut gamma = Vec::with_capacity(rho.len());
    for k in 0..rho.len() {
        let (a, b, g) = potential_constants_single(rho[k], theta[k], chi[k])?;
        alpha.push(a);
        beta.push(b);
        gamma.push(g);
    }
    Ok(PotentialConstants {
        alpha,
        beta,
        gamma,
        chi: chi.to_vec(),
    })
}

/// Square error percentage per target, for data normalized onto a target
/// range of width 2: `E_r = 100 / (4s) · Σ_s (y_s - t_s)²`.
pub fn error_percent(params: &NetworkParams, d: &RawDataset) -> Result<Vec<f64>, NetworkError> {
    if d.is_empty() {
        return Err(NetworkError::EmptyDataset);
    }
    let c = params.n_outputs();
    let mut acc = vec![0.0; c];
    for i in 0..d.len() {
        let y = eval_network(d.x.row(i), params)?;
        for k in 0..c {
            let r = y[k] - d.t.get(i, k);
            acc[k] += r * r;
        }
    }
    let s = d.len() as f64;
    Ok(acc.iter().map(|sum| 100.0 / (s * 4.0) * sum).collect())
}
