//! Shared setup for the pipeline benchmarks: a reference-sized problem
//! (four features, twenty kernels, twelve states) on synthetic data.

use eigennet::data::{compute_stats, normalize, split, synthetic_dataset, DatasetStats, RawDataset};
use eigennet::ga::{Dims, EvalContext, ParamRanges};

pub struct BenchSetup {
    pub train: RawDataset,
    pub stats: DatasetStats,
}

impl BenchSetup {
    pub fn reference() -> Self {
        let raw = synthetic_dataset(3848, 7);
        let (norm, _) = normalize(&raw).expect("synthetic data normalizes");
        let (train, _) = split(&norm, 0.75, 7).expect("split");
        let stats = compute_stats(&train).expect("stats");
        BenchSetup { train, stats }
    }

    pub fn ctx(&self) -> EvalContext<'_> {
        EvalContext {
            data: &self.train,
            stats: &self.stats,
            dims: Dims {
                n_features: 4,
                n_targets: 1,
                n_kernels: 20,
                n_states: 12,
            },
            ranges: ParamRanges {
                lambda: (0.1, 4.0),
                ..ParamRanges::default()
            },
            bits_per_param: 20,
        }
    }
}
