//! Command implementations and the output file formats.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use eigennet::data::{compute_stats, normalize, split, DatasetStats, RawDataset};
use eigennet::ga::{run_islands, Dims, EvalContext, Solution};
use eigennet::matrix::{assemble, energy_breakdown, Assembly};
use eigennet::metrics::{info_report, refine_chi, uncertainty_check, UncertaintyReport};
use eigennet::network::{compute_chi, error_percent, eval_network, potential_constants};
use eigennet::Matrix;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{input_err, AppError, Overrides};

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(input_err)?;
    }
    std::fs::write(path, bytes).map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn to_json_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report serialization");
    out.push(b'\n');
    out
}

// ── stats ──────────────────────────────────────────────────────────────

#[derive(Serialize)]
struct ColumnMoments {
    mean: f64,
    std: f64,
    skewness: f64,
    kurtosis_excess: f64,
}

#[derive(Serialize)]
struct StatsReport {
    schema_version: u32,
    records: usize,
    columns: Vec<String>,
    original: BTreeMap<String, ColumnMoments>,
    normalized: BTreeMap<String, ColumnMoments>,
    correlation: Vec<Vec<f64>>,
}

fn moments_map(d: &RawDataset, stats: &DatasetStats) -> BTreeMap<String, ColumnMoments> {
    let names = d.column_names();
    let mut map = BTreeMap::new();
    for (j, name) in names.iter().enumerate() {
        let (mean, std) = if j < d.n_features() {
            (stats.feature_means[j], stats.feature_stds[j])
        } else {
            (
                stats.target_means[j - d.n_features()],
                stats.target_stds[j - d.n_features()],
            )
        };
        map.insert(
            name.clone(),
            ColumnMoments {
                mean,
                std,
                skewness: stats.skewness[j],
                kurtosis_excess: stats.kurtosis[j],
            },
        );
    }
    map
}

pub fn cmd_stats(overrides: &Overrides) -> Result<(), AppError> {
    let cfg = RunConfig::load(overrides)?;
    let raw = cfg.dataset()?;
    let raw_stats = compute_stats(&raw).map_err(input_err)?;
    let (norm, _) = normalize(&raw).map_err(input_err)?;
    let norm_stats = compute_stats(&norm).map_err(input_err)?;

    let corr = (0..norm_stats.corr.rows())
        .map(|i| norm_stats.corr.row(i).to_vec())
        .collect();
    let report = StatsReport {
        schema_version: 1,
        records: raw.len(),
        columns: raw.column_names(),
        original: moments_map(&raw, &raw_stats),
        normalized: moments_map(&norm, &norm_stats),
        correlation: corr,
    };
    let path = cfg.output_dir.join("stats.json");
    write_file(&path, &to_json_pretty(&report))?;
    println!("wrote {}", path.display());
    Ok(())
}

// ── validate ───────────────────────────────────────────────────────────

pub fn cmd_validate(overrides: &Overrides, draws: usize) -> Result<(), AppError> {
    let cfg = RunConfig::load(overrides)?;
    let report = eigennet::oracle::validate(cfg.seed, draws);
    for f in &report.formulas {
        println!(
            "{:26} {:4} draws  max rel err {:9.2e}  (tolerance {:7.0e})  {}",
            f.name,
            f.draws,
            f.max_rel_err,
            f.tolerance,
            if f.pass { "ok" } else { "FAIL" }
        );
        if let Some(worst) = &f.worst_draw {
            eprintln!("worst {} draw: {worst}", f.name);
        }
    }
    let path = cfg.output_dir.join("validation.json");
    write_file(&path, &to_json_pretty(&report))?;
    println!("wrote {}", path.display());
    if report.all_pass() {
        Ok(())
    } else {
        Err(AppError::Numeric("validation tolerance breached".into()))
    }
}

// ── shared evaluation report ───────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct PartitionReport {
    records: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    chi: Vec<f64>,
    error_percent: Vec<f64>,
    kinetic: f64,
    potential: f64,
    energy: f64,
    work: Option<f64>,
    complexity: Option<f64>,
    /// c·S·c of the persisted coefficients under this partition's stats.
    state_norm: f64,
    /// One-dimensional problems only.
    uncertainty: Option<UncertaintyReport>,
}

#[derive(Serialize, Deserialize)]
struct EvaluationReport {
    schema_version: u32,
    train: PartitionReport,
    test: PartitionReport,
}

fn partition_report(
    solution: &Solution,
    part: &RawDataset,
) -> Result<(PartitionReport, Assembly), AppError> {
    let stats = compute_stats(part).map_err(input_err)?;
    let chi = compute_chi(&solution.network, part).map_err(|e| AppError::Numeric(e.to_string()))?;
    let pot = potential_constants(&stats.target_means, &stats.target_stds, &chi)
        .map_err(|e| AppError::Numeric(e.to_string()))?;
    let er = error_percent(&solution.network, part).map_err(|e| AppError::Numeric(e.to_string()))?;
    let asm = assemble(&solution.state_basis, &solution.network, &stats, &pot)
        .map_err(|e| AppError::Numeric(e.to_string()))?;
    let breakdown = energy_breakdown(&solution.coefficients, &asm)
        .map_err(|e| AppError::Numeric(e.to_string()))?;
    let info = info_report(breakdown.potential, part.n_features(), 2.0).ok();
    let uncertainty = (part.n_features() == 1)
        .then(|| {
            uncertainty_check(
                &solution.state_basis,
                &solution.coefficients,
                stats.feature_stds[0],
            )
            .ok()
        })
        .flatten();
    Ok((
        PartitionReport {
            records: part.len(),
            alpha: pot.alpha.clone(),
            beta: pot.beta.clone(),
            gamma: pot.gamma.clone(),
            chi,
            error_percent: er,
            kinetic: breakdown.kinetic,
            potential: breakdown.potential,
            energy: breakdown.total,
            work: info.as_ref().map(|i| i.work),
            complexity: info.as_ref().map(|i| i.complexity),
            state_norm: asm
                .pair
                .s
                .quad_form(&solution.coefficients, &solution.coefficients),
            uncertainty,
        },
        asm,
    ))
}

fn evaluation_report(
    solution: &Solution,
    train: &RawDataset,
    test: &RawDataset,
) -> Result<(EvaluationReport, Assembly), AppError> {
    let (train_report, train_asm) = partition_report(solution, train)?;
    let (test_report, _) = partition_report(solution, test)?;
    Ok((
        EvaluationReport {
            schema_version: 1,
            train: train_report,
            test: test_report,
        },
        train_asm,
    ))
}

fn dispersion_csv(solution: &Solution, train: &RawDataset, test: &RawDataset) -> String {
    let mut out = String::from("# schema_version=1\nindex,observed,computed,partition\n");
    for (name, part) in [("train", train), ("test", test)] {
        for i in 0..part.len() {
            let y = eval_network(part.x.row(i), &solution.network).expect("dims");
            let _ = writeln!(out, "{i},{},{},{name}", part.t.get(i, 0), y[0]);
        }
    }
    out
}

// ── train ──────────────────────────────────────────────────────────────

pub fn cmd_train(
    overrides: &Overrides,
    cycles: Option<usize>,
    islands: Option<usize>,
    population: Option<usize>,
) -> Result<(), AppError> {
    let mut cfg = RunConfig::load(overrides)?;
    if let Some(n) = islands {
        if n == 0 {
            return Err(input_err("need at least one island"));
        }
        let template = cfg.islands[0].clone();
        cfg.islands = (0..n)
            .map(|i| {
                let mut island = template.clone();
                island.niche_radius = i as f64 / 10.0;
                island.seed = cfg.seed.wrapping_add(1000 + i as u64);
                island
            })
            .collect();
    }
    if let Some(c) = cycles {
        for island in cfg.islands.iter_mut() {
            island.cycles = c;
        }
    }
    if let Some(p) = population {
        for island in cfg.islands.iter_mut() {
            island.population = p;
        }
    }

    let raw = cfg.dataset()?;
    let (norm, _) = normalize(&raw).map_err(input_err)?;
    let (train, test) = split(&norm, cfg.train_fraction, cfg.seed).map_err(input_err)?;
    let stats = compute_stats(&train).map_err(input_err)?;
    let ctx = EvalContext {
        data: &train,
        stats: &stats,
        dims: Dims {
            n_features: train.n_features(),
            n_targets: train.n_targets(),
            n_kernels: cfg.dims.kernels,
            n_states: cfg.dims.states,
        },
        ranges: cfg.ranges,
        bits_per_param: cfg.bits_per_param,
    };
    let run = run_islands(&cfg.islands, &ctx).map_err(|e| AppError::Numeric(e.to_string()))?;
    if run.failed_islands > 0 {
        eprintln!("warning: {} island(s) failed and were dropped", run.failed_islands);
    }

    let solution_path = cfg.output_dir.join("solution.json");
    write_file(&solution_path, &to_json_pretty(&run.solution))?;

    let mut history = String::new();
    for record in &run.history {
        let _ = writeln!(
            history,
            "{}",
            serde_json::to_string(record).expect("history serialization")
        );
    }
    let history_path = cfg.output_dir.join("history.jsonl");
    write_file(&history_path, history.as_bytes())?;

    let dispersion_path = cfg.output_dir.join("dispersion.csv");
    write_file(
        &dispersion_path,
        dispersion_csv(&run.solution, &train, &test).as_bytes(),
    )?;

    let (report, _) = evaluation_report(&run.solution, &train, &test)?;
    let report_path = cfg.output_dir.join("report.json");
    write_file(&report_path, &to_json_pretty(&report))?;

    println!(
        "best energy {:.6e} enats, train error {:.4}%, test error {:.4}%",
        run.solution.energy, report.train.error_percent[0], report.test.error_percent[0]
    );
    for path in [&solution_path, &history_path, &dispersion_path, &report_path] {
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ── evaluate ───────────────────────────────────────────────────────────

pub fn cmd_evaluate(
    overrides: &Overrides,
    solution_path: &Path,
    chi_table: Option<&Path>,
    chi_iterations: usize,
    dump_matrices: Option<&Path>,
) -> Result<(), AppError> {
    let cfg = RunConfig::load(overrides)?;
    let text = std::fs::read_to_string(solution_path)
        .map_err(|e| input_err(format!("{}: {e}", solution_path.display())))?;
    let solution: Solution = serde_json::from_str(&text)
        .map_err(|e| input_err(format!("{}: {e}", solution_path.display())))?;
    if solution.schema_version != 1 {
        return Err(input_err(format!(
            "{}: unsupported schema_version {}",
            solution_path.display(),
            solution.schema_version
        )));
    }

    let raw = cfg.dataset()?;
    let (norm, _) = normalize(&raw).map_err(input_err)?;
    let (train, test) = split(&norm, cfg.train_fraction, cfg.seed).map_err(input_err)?;
    let (report, train_asm) = evaluation_report(&solution, &train, &test)?;

    let report_path = cfg.output_dir.join("report.json");
    write_file(&report_path, &to_json_pretty(&report))?;
    println!("wrote {}", report_path.display());

    if let Some(path) = chi_table {
        let stats = compute_stats(&train).map_err(input_err)?;
        let grid: Vec<Vec<f64>> = (0..train.len()).map(|i| train.x.row(i).to_vec()).collect();
        match refine_chi(
            &solution.network,
            &solution.state_basis,
            &solution.coefficients,
            &stats,
            &grid,
            report.train.chi[0],
            chi_iterations,
        ) {
            Ok(refinement) => {
                let mut csv = String::from("# schema_version=1\n");
                for i in 0..train.n_features() {
                    let _ = write!(csv, "x{},", i + 1);
                }
                csv.push_str("chi,masked\n");
                for point in &refinement.points {
                    for v in &point.x {
                        let _ = write!(csv, "{v},");
                    }
                    let _ = writeln!(csv, "{},{}", point.chi, point.masked);
                }
                write_file(path, csv.as_bytes())?;
                println!(
                    "wrote {} ({} points, {:.1}% masked, converged: {})",
                    path.display(),
                    refinement.points.len(),
                    100.0 * refinement.masked_fraction,
                    refinement.converged
                );
            }
            // The refinement is a diagnostic; its fixed point being
            // inapplicable on this solution is a finding, not a failure
            // of the evaluation.
            Err(eigennet::metrics::MetricsError::AllMasked) => {
                eprintln!(
                    "warning: χ(x) refinement inapplicable (every grid point masked; \
                     the θ > χ assumption fails here); no table written"
                );
            }
            Err(e) => return Err(AppError::Numeric(e.to_string())),
        }
    }

    if let Some(dir) = dump_matrices {
        for (name, m) in [
            ("h.csv", &train_asm.pair.h),
            ("s.csv", &train_asm.pair.s),
            ("kinetic.csv", &train_asm.kinetic),
            ("potential.csv", &train_asm.potential),
        ] {
            write_file(&dir.join(name), matrix_csv(m).as_bytes())?;
        }
        println!("wrote matrices to {}", dir.display());
    }
    Ok(())
}

fn matrix_csv(m: &Matrix) -> String {
    let mut out = String::from("# schema_version=1\n");
    for i in 0..m.rows() {
        let cells: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}
