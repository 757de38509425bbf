use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;
use signcov::simharness::{
    run_gamma_sweep, run_qq_experiment, run_table_experiment, ExperimentMetadata, QqConfig, RunOptions,
    SweepConfig, TableConfig,
};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Table,
    Qq,
    Sweep,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::Table => "table",
            Experiment::Qq => "qq",
            Experiment::Sweep => "sweep",
        }
    }
}

pub struct ExperimentArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub workers: usize,
    pub fast: bool,
    pub out: Option<PathBuf>,
}

/// `--fast` profile: a tenth of the Monte Carlo effort.
fn tenth(v: usize, floor: usize) -> usize {
    (v / 10).max(floor)
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("config {}: {e}", path.display())))
}

fn write_artifacts(
    out: &Path,
    kind: Experiment,
    csv: &str,
    config: impl Serialize,
    seed: u64,
    args: &ExperimentArgs,
    seconds: f64,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::input(format!("cannot create {}: {e}", out.display())))?;
    let config = serde_json::to_value(config).expect("config serializes");
    let mut meta = ExperimentMetadata::new(kind.name(), config, seed, args.workers, seconds);
    meta.extra = serde_json::json!({ "fast": args.fast });
    let write = |name: String, body: &str| {
        let path = out.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
    };
    write(format!("{}.csv", kind.name()), csv)?;
    write(
        format!("{}.json", kind.name()),
        &serde_json::to_string_pretty(&meta).expect("metadata serializes"),
    )
}

/// Runs one experiment family and returns the printed summary.
pub fn run(kind: Experiment, args: &ExperimentArgs) -> Result<String, CliError> {
    let run = RunOptions { workers: args.workers };
    let start = Instant::now();
    let mut summary = String::new();
    let (csv, config, seed) = match kind {
        Experiment::Table => {
            let mut cfg: TableConfig = load(&args.config)?;
            if let Some(s) = args.seed {
                cfg.master_seed = s;
            }
            if args.fast {
                cfg.replications = tenth(cfg.replications, 2);
            }
            let r = run_table_experiment(&cfg, &run)?;
            summary += &format!("{:>6} {:>7} {:>8} {:>12} {:>10}\n", "p", "n", "method", "n*err^2", "se");
            for c in &r.cells {
                summary += &format!("{:>6} {:>7} {:>8} {:>12.4} {:>10.4}\n", c.p, c.n, c.method.label(), c.mean, c.se);
            }
            (r.to_csv(), serde_json::to_value(&cfg), cfg.master_seed)
        }
        Experiment::Qq => {
            let mut cfg: QqConfig = load(&args.config)?;
            if let Some(s) = args.seed {
                cfg.master_seed = s;
            }
            if args.fast {
                cfg.replications = tenth(cfg.replications, 2);
                cfg.variance_sample_size = tenth(cfg.variance_sample_size, 1000);
                cfg.population_draws = tenth(cfg.population_draws, 1000);
            }
            let r = run_qq_experiment(&cfg, &run)?;
            summary += &format!(
                "replications {}\nlimit variance {:.6}\nempirical mean square {:.6}\npopulation value {:.6} ({})\nKS {:.4}\nKS (fitted variance) {:.4}\n",
                r.empirical.len(),
                r.sigma2,
                r.empirical_mse,
                r.population_value,
                r.population_source,
                r.ks,
                r.ks_fitted
            );
            (r.to_csv(), serde_json::to_value(&cfg), cfg.master_seed)
        }
        Experiment::Sweep => {
            let mut cfg: SweepConfig = load(&args.config)?;
            if let Some(s) = args.seed {
                cfg.master_seed = s;
            }
            if args.fast {
                cfg.replications = tenth(cfg.replications, 2);
            }
            let r = run_gamma_sweep(&cfg, &run)?;
            summary += &format!("{:>6} {:>7} {:>8} {:>12} {:>10}\n", "gamma", "n", "method", "|S_ij|", "se");
            for c in &r.cells {
                summary += &format!(
                    "{:>6} {:>7} {:>8} {:>12.6} {:>10.6}\n",
                    c.gamma,
                    c.n,
                    c.method.label(),
                    c.mean_abs_error,
                    c.se
                );
            }
            (r.to_csv(), serde_json::to_value(&cfg), cfg.master_seed)
        }
    };
    let config = config.expect("config serializes");
    if let Some(out) = &args.out {
        write_artifacts(out, kind, &csv, config, seed, args, start.elapsed().as_secs_f64())?;
    }
    Ok(summary)
}
