//! Published POLLEN reference solution and moments, shared by the
//! integration suites.

#![allow(dead_code)]

use eigennet::data::DatasetStats;
use eigennet::linalg::Matrix;
use eigennet::matrix::StateBasis;
use eigennet::network::NetworkParams;

/// Normalized-data means of the four features.
pub const FEATURE_MEANS: [f64; 4] = [0.0418, -0.0257, 0.0178, -0.0252];
/// Normalized-data standard deviations of the four features.
pub const FEATURE_STDS: [f64; 4] = [0.2863, 0.3082, 0.2551, 0.2876];
/// Normalized-data target mean and standard deviation.
pub const TARGET_MEAN: f64 = 0.0512;
pub const TARGET_STD: f64 = 0.2745;

/// Original-data moments (means, standard deviations) per column.
pub const RAW_MEANS: [f64; 5] = [-3.637e-3, 1.597e-4, 3.103e-3, 4.237e-3, 1.662e-4];
pub const RAW_STDS: [f64; 5] = [6.398, 5.186, 7.875, 10.004, 3.144];

/// Published skewness/kurtosis per column (reference for normality is 0).
pub const SKEWNESS: [f64; 5] = [-0.130, 0.072, -0.057, 0.109, 0.110];
pub const KURTOSIS: [f64; 5] = [-0.057, -0.311, -0.158, -0.163, 0.192];

/// Published correlation matrix (x1..x4, t1).
pub const CORRELATION: [[f64; 5]; 5] = [
    [1.00, 0.13, -0.13, -0.90, -0.57],
    [0.13, 1.00, 0.08, -0.17, 0.33],
    [-0.13, 0.08, 1.00, 0.27, -0.15],
    [-0.90, -0.17, 0.27, 1.00, 0.24],
    [-0.57, 0.33, -0.15, 0.24, 1.00],
];

/// Reference results, training partition.
pub const TRAIN_ALPHA: f64 = 6.504147;
pub const TRAIN_BETA: f64 = -7.050345e-1;
pub const TRAIN_GAMMA: f64 = 1.776158e-1;
pub const TRAIN_CHI: f64 = 1.752492e-1;
pub const TRAIN_ERROR_PCT: f64 = 0.768;
pub const TRAIN_ENERGY: f64 = 5.969894e-2;
pub const TRAIN_KINETIC: f64 = 5.944988e-2;
pub const TRAIN_POTENTIAL: f64 = 2.490563e-4;
pub const TRAIN_WORK: f64 = 2.772339;
pub const TRAIN_COMPLEXITY: f64 = 8.982000e-5;

/// Reference results, testing partition.
pub const TEST_ALPHA: f64 = 7.058333;
pub const TEST_BETA: f64 = -5.941080e-1;
pub const TEST_GAMMA: f64 = 1.418035e-1;
pub const TEST_CHI: f64 = 1.769226e-1;
pub const TEST_ERROR_PCT: f64 = 0.782;
pub const TEST_ENERGY: f64 = 5.989879e-2;
pub const TEST_KINETIC: f64 = 5.964383e-2;
pub const TEST_POTENTIAL: f64 = 2.549622e-4;
pub const TEST_WORK: f64 = 2.772333;
pub const TEST_COMPLEXITY: f64 = 9.194974e-5;

/// Kernel exponents of the reference network (20 kernels).
pub const KERNEL_EXPONENTS: [f64; 20] = [
    2.919328e0, 8.423300e-1, 2.087150e-1, 3.914241e0, 5.823370e-1, 1.926436e0, 3.097580e-1,
    3.858523e0, 2.705241e0, 9.479430e-1, 1.103653e0, 3.384321e0, 7.454340e-1, 1.926320e0,
    1.349549e0, 2.424388e0, 6.307950e-1, 2.245460e-1, 3.103390e0, 2.451465e0,
];

/// Kernel centers, one row per kernel (20 × 4).
pub const KERNEL_CENTERS: [[f64; 4]; 20] = [
    [-9.616850e-1, 5.699350e-1, -1.007076e-1, 8.523940e-1],
    [9.177860e-1, 1.001960e-1, 7.096600e-1, 4.823590e-1],
    [-2.578000e-1, 5.203320e-1, -8.117540e-1, -8.377960e-1],
    [-3.191230e-1, 4.871910e-1, -8.830230e-1, 5.089810e-1],
    [-6.928290e-1, 2.672930e-1, -4.297810e-1, -3.016050e-1],
    [-8.767050e-1, -3.759150e-1, -9.127510e-1, 9.698310e-1],
    [-5.724300e-1, 9.825380e-1, -6.680690e-1, 9.482790e-1],
    [2.538800e-1, 8.884770e-1, 8.543280e-1, 5.800880e-1],
    [-7.541110e-1, -1.327950e-1, -5.627170e-1, 9.081580e-1],
    [-6.158020e-1, 1.714950e-1, -9.497280e-1, 9.030120e-1],
    [-4.964920e-1, 1.040151e-1, -9.430600e-1, 3.068200e-1],
    [6.543940e-1, -9.356290e-1, 4.894600e-1, 7.890730e-1],
    [-8.030510e-1, -2.275000e-1, -4.027400e-1, -5.026880e-1],
    [-5.985470e-1, 1.618350e-1, -8.644710e-1, -2.648060e-1],
    [-2.659290e-1, -4.931090e-1, 7.594300e-1, 1.028353e-1],
    [5.962460e-1, 6.320610e-1, -4.129300e-1, -5.073280e-1],
    [-4.769380e-1, 8.363110e-1, 2.817150e-1, 1.914970e-1],
    [5.409380e-1, 7.000500e-1, 9.406210e-1, -3.607610e-1],
    [-1.407570e-1, -1.708480e-1, -3.897940e-1, 1.832320e-1],
    [-9.182390e-1, 3.936930e-1, 3.930220e-1, 4.795600e-1],
];

/// Network weights: bias first, then one weight per kernel.
pub const WEIGHTS: [f64; 21] = [
    1.638795e0, 1.419237e0, -1.858620e0, -2.603692e0, 1.118712e0, 1.239672e0, -1.197724e0,
    -1.490210e0, 1.755702e0, 9.814800e-1, -2.964685e0, 2.344582e0, -1.652975e0, 3.030500e-1,
    -6.988870e-1, -3.270600e-1, 5.944650e-1, 1.834500e0, -5.652970e-1, -1.576270e-1,
    -9.845600e-1,
];

/// State coefficients (12 states).
pub const COEFFICIENTS: [f64; 12] = [
    1.553121e0, -2.359102e-1, -1.904793e0, -2.639326e0, 2.014761e-1, 1.682093e-1, -2.765379e-1,
    9.654897e-1, 4.245192e-1, 8.729764e-1, 1.726046e-1, 7.787302e-1,
];

/// State exponents (12 states).
pub const STATE_EXPONENTS: [f64; 12] = [
    1.390160e-1, 1.925760e-1, 1.085620e-1, 1.093980e-1, 1.000033e-1, 1.394260e-1, 1.799000e-1,
    1.000023e-1, 1.382240e-1, 1.000193e-1, 1.000000e-1, 1.000035e-1,
];

/// State centers, one row per state (12 × 4).
pub const STATE_CENTERS: [[f64; 4]; 12] = [
    [-1.231300e-1, -4.406100e-1, -2.818570e-1, 2.351560e-1],
    [-1.194100e-1, 1.004575e-1, -1.022693e-1, 1.308700e-1],
    [8.793090e-1, 4.690850e-1, -3.208850e-1, 1.048543e-1],
    [-4.300890e-1, -4.877940e-1, -1.046653e-1, 2.051050e-1],
    [-8.999490e-1, 1.039123e-1, -4.522900e-1, 4.788520e-1],
    [-7.989670e-1, 1.157740e-1, 4.029300e-1, -1.007880e-1],
    [1.007745e-1, -6.873660e-1, -4.912310e-1, 2.924720e-1],
    [-5.837550e-1, -7.069950e-1, 1.034500e-1, 3.353310e-1],
    [9.013570e-1, 6.677700e-1, -2.735550e-1, 1.025390e-1],
    [9.922380e-1, 4.842470e-1, -4.106250e-1, 2.306550e-1],
    [-7.864230e-1, -9.010480e-1, -5.281260e-1, -4.112000e-1],
    [5.929010e-1, 2.620350e-1, -1.567570e-1, -1.024260e-1],
];

pub fn reference_network() -> NetworkParams {
    let centers: Vec<f64> = KERNEL_CENTERS.iter().flatten().copied().collect();
    NetworkParams::new(
        vec![WEIGHTS.to_vec()],
        KERNEL_EXPONENTS.to_vec(),
        Matrix::from_rows(20, 4, centers),
    )
    .expect("published network is valid")
}

pub fn reference_basis() -> StateBasis {
    let centers: Vec<f64> = STATE_CENTERS.iter().flatten().copied().collect();
    StateBasis::new(STATE_EXPONENTS.to_vec(), Matrix::from_rows(12, 4, centers))
        .expect("published basis is valid")
}

/// Stats as published for the normalized full dataset.
pub fn reference_stats() -> DatasetStats {
    DatasetStats {
        feature_means: FEATURE_MEANS.to_vec(),
        feature_stds: FEATURE_STDS.to_vec(),
        target_means: vec![TARGET_MEAN],
        target_stds: vec![TARGET_STD],
        skewness: SKEWNESS.to_vec(),
        kurtosis: KURTOSIS.to_vec(),
        corr: Matrix::from_nested(
            &CORRELATION
                .iter()
                .map(|row| row.to_vec())
                .collect::<Vec<_>>(),
        ),
    }
}

/// Path of the fetched POLLEN csv, if the user has run the fetch script.
pub fn pollen_path() -> std::path::PathBuf {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .expect("workspace root")
        .to_path_buf();
    root.join("data").join("pollen.csv")
}
