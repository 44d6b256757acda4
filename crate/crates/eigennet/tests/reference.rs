//! Checks anchored to the published POLLEN solution: an independent
//! re-evaluation of the network, genotype encoding of the published
//! parameters, and the shipped reference-solution file.

mod common;

use eigennet::data::{compute_stats, load_csv, normalize, split};
use eigennet::ga::{decode_params, encode_params, evaluate, Dims, EvalContext, Operator, ParamRanges};
use eigennet::network::eval_network;

/// The network value at the origin, recomputed in the test with nothing
/// but the published tables and a bare loop. The literal below was
/// produced by this very computation and frozen; the library path must
/// agree with both to full precision.
#[test]
fn published_network_at_origin_matches_hand_evaluation() {
    let net = common::reference_network();
    let x = [0.0; 4];

    let mut hand = common::WEIGHTS[0];
    for p in 0..20 {
        let mut sq = 0.0;
        for i in 0..4 {
            let d = x[i] - common::KERNEL_CENTERS[p][i];
            sq += d * d;
        }
        hand += common::WEIGHTS[p + 1] * (-common::KERNEL_EXPONENTS[p] * sq).exp();
    }

    let lib = eval_network(&x, &net).unwrap()[0];
    assert!((lib - hand).abs() < 1e-14, "library {lib} vs hand {hand}");

    const FROZEN: f64 = 0.108419097011869;
    assert!(
        (lib - FROZEN).abs() < 1e-12,
        "network at origin drifted: {lib} vs frozen {FROZEN}"
    );
}

fn reference_ranges() -> ParamRanges {
    // The published state exponents sit on the 0.1 grid floor.
    ParamRanges {
        lambda: (0.1, 4.0),
        ..ParamRanges::default()
    }
}

const REFERENCE_DIMS: Dims = Dims {
    n_features: 4,
    n_targets: 1,
    n_kernels: 20,
    n_states: 12,
};

/// Nearest-grid encoding of the published parameters decodes back to
/// them within one quantization step per parameter.
#[test]
fn published_solution_encodes_onto_the_grid()
{
    let net = common::reference_network();
    let basis = common::reference_basis();
    let ranges = reference_ranges();
    let bits = 20;
    let g = encode_params(&net, &basis, &ranges, &REFERENCE_DIMS, bits).unwrap();
    assert_eq!(g.bits.len(), 181 * bits + 2);
    let (net2, basis2) = decode_params(&g, &ranges, &REFERENCE_DIMS).unwrap();

    let max = (1u64 << bits) - 1;
    let step = |lo: f64, hi: f64| (hi - lo) / max as f64;
    for (a, b) in net.exponents.iter().zip(&net2.exponents) {
        assert!((a - b).abs() <= 0.5 * step(ranges.xi.0, ranges.xi.1) + 1e-12);
    }
    for (a, b) in net.weights[0].iter().zip(&net2.weights[0]) {
        assert!((a - b).abs() <= 0.5 * step(ranges.w.0, ranges.w.1) + 1e-12);
    }
    for (a, b) in basis.exponents.iter().zip(&basis2.exponents) {
        assert!((a - b).abs() <= 0.5 * step(ranges.lambda.0, ranges.lambda.1) + 1e-12);
    }
    for (a, b) in net.centers.data().iter().zip(net2.centers.data()) {
        assert!((a - b).abs() <= 0.5 * step(ranges.omega.0, ranges.omega.1) + 1e-12);
    }
    for (a, b) in basis.centers.data().iter().zip(basis2.centers.data()) {
        assert!((a - b).abs() <= 0.5 * step(ranges.eta.0, ranges.eta.1) + 1e-12);
    }
}

/// Full pipeline on the encoded published genotype, against the
/// published ground-state energy. Needs the fetched dataset.
#[test]
fn published_genotype_reproduces_published_energy() {
    let path = common::pollen_path();
    if !path.exists() {
        println!("SKIP: {} not fetched (run scripts/fetch_pollen.sh)", path.display());
        return;
    }
    let raw = load_csv(&path, 1).unwrap();
    let (norm, _) = normalize(&raw).unwrap();
    let (train, _) = split(&norm, 0.75, 7).unwrap();
    let stats = compute_stats(&train).unwrap();
    let ctx = EvalContext {
        data: &train,
        stats: &stats,
        dims: REFERENCE_DIMS,
        ranges: reference_ranges(),
        bits_per_param: 20,
    };
    let g = encode_params(
        &common::reference_network(),
        &common::reference_basis(),
        &ctx.ranges,
        &REFERENCE_DIMS,
        20,
    )
    .unwrap();
    let ind = evaluate(g, Operator::Crossover, &ctx);
    assert!(!ind.penalized, "published genotype must evaluate cleanly");
    let ratio = ind.energy / common::TRAIN_ENERGY;
    assert!(
        (ratio - 1.0).abs() <= 0.10,
        "pipeline energy {} vs published {} (ratio {ratio})",
        ind.energy,
        common::TRAIN_ENERGY
    );
    // The ground state the solver finds for this system can only sit at
    // or below the published state's quotient.
    assert!(ind.energy <= common::TRAIN_ENERGY * 1.10);
}

/// The shipped reference-solution file stays in lockstep with the
/// tables embedded here.
#[test]
fn shipped_reference_solution_matches_tables() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .unwrap()
        .join("data/reference_solution.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let solution: eigennet::ga::Solution = serde_json::from_str(&text).unwrap();
    assert_eq!(solution.schema_version, 1);
    assert_eq!(solution.network, common::reference_network());
    assert_eq!(solution.state_basis, common::reference_basis());
    assert_eq!(solution.coefficients, common::COEFFICIENTS.to_vec());
    assert_eq!(solution.chi, vec![common::TRAIN_CHI]);
    assert_eq!(solution.energy, common::TRAIN_ENERGY);
    assert_eq!(solution.kinetic, common::TRAIN_KINETIC);
    assert_eq!(solution.potential, common::TRAIN_POTENTIAL);
    assert_eq!(solution.error_percent, vec![common::TRAIN_ERROR_PCT]);
    assert_eq!(solution.work, Some(common::TRAIN_WORK));
    assert_eq!(solution.complexity, Some(common::TRAIN_COMPLEXITY));
}

/// Regenerates data/reference_solution.json from the embedded tables.
/// Run manually when the fixture changes:
/// `cargo test -p eigennet --test reference -- --ignored write_reference`
#[test]
#[ignore]
fn write_reference_solution() {
    let solution = eigennet::ga::Solution {
        schema_version: 1,
        dims: REFERENCE_DIMS,
        network: common::reference_network(),
        state_basis: common::reference_basis(),
        coefficients: common::COEFFICIENTS.to_vec(),
        chi: vec![common::TRAIN_CHI],
        energy: common::TRAIN_ENERGY,
        kinetic: common::TRAIN_KINETIC,
        potential: common::TRAIN_POTENTIAL,
        error_percent: vec![common::TRAIN_ERROR_PCT],
        work: Some(common::TRAIN_WORK),
        complexity: Some(common::TRAIN_COMPLEXITY),
        seed: 0,
    };
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .unwrap()
        .join("data/reference_solution.json");
    let mut bytes = serde_json::to_vec_pretty(&solution).unwrap();
    bytes.push(b'\n');
    std::fs::write(&path, bytes).unwrap();
}
