mod experiments;
mod input;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use signcov::asymptotics::asymptotics_bundle;
use signcov::error::Error;
use signcov::location::{LocationMethod, MedianOptions};
use signcov::models::{population_sscm_closed_p2, population_sscm_mc, SeededStream, SimModel};
use signcov::scatter::{ssscm, sscm_plugin};

use experiments::{Experiment, ExperimentArgs};
use report::{AsymptoticsJson, EstimateReport, OracleReport, ScatterJson};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidInput(_) | Error::ShapeMismatch { .. } => 2,
            Error::DegenerateSample(_) => 3,
            Error::Unsupported(_) => 4,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

/// Spatial sign covariance matrices with known or estimated location.
#[derive(Debug, Parser)]
#[command(name = "signcov", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Location, SSCM variants and coincidence report for a CSV sample.
    Estimate(EstimateArgs),
    /// Asymptotic covariance estimates (W, B, Ξ, A Ξ Aᵀ) for a CSV sample.
    Asymptotics(LocatedInput),
    /// Population SSCM of a model, in closed form (p = 2) or by simulation.
    Oracle(OracleArgs),
    /// Frobenius-error table over dimensions and sample sizes.
    Table(ExperimentFlags),
    /// Quantiles of a standardized SSCM element against its normal limit.
    Qq(ExperimentFlags),
    /// Error of an off-diagonal element across the singularity family.
    Sweep(ExperimentFlags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Location {
    Mean,
    Median,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct LocatedInput {
    /// CSV file, one observation per row; a non-numeric first row is a header.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "median")]
    location: Location,
    /// Location for `--location fixed`, e.g. "0,0".
    #[arg(long, allow_hyphen_values = true)]
    fixed: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    located: LocatedInput,
    /// Also report the SSCM over the observations not equal to the location.
    #[arg(long)]
    star: bool,
    /// Also report the symmetrized SSCM.
    #[arg(long)]
    symmetrized: bool,
    /// Also report the asymptotic covariance estimates at the location.
    #[arg(long)]
    asymptotics: bool,
    #[arg(long, value_enum, default_value = "json")]
    output: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleMethod {
    Closed,
    Mc,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Model as inline JSON or a path to a JSON file.
    #[arg(long)]
    model: String,
    #[arg(long, value_enum, default_value = "closed")]
    method: OracleMethod,
    #[arg(long, default_value_t = 1_000_000)]
    mc_size: usize,
    #[arg(long, env = "SIGNCOV_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ExperimentFlags {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration's master seed.
    #[arg(long, env = "SIGNCOV_SEED")]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// A tenth of the configured replications.
    #[arg(long)]
    fast: bool,
    /// Directory for the CSV and JSON metadata artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn location_method(args: &LocatedInput) -> Result<LocationMethod, CliError> {
    match (args.location, &args.fixed) {
        (Location::Fixed, Some(s)) => Ok(LocationMethod::Fixed(input::parse_point(s)?)),
        (Location::Fixed, None) => Err(CliError::input("--location fixed needs --fixed")),
        (_, Some(_)) => Err(CliError::input("--fixed is only valid with --location fixed")),
        (Location::Mean, None) => Ok(LocationMethod::Mean),
        (Location::Median, None) => Ok(LocationMethod::SpatialMedian),
    }
}

fn emit(out: Option<&Path>, body: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn to_json(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let located = &args.located;
    let method = location_method(located)?;
    let x = input::read_observations(&located.input)?;
    let opts = MedianOptions::default();
    let plugin = sscm_plugin(&x, &method, &opts)?;
    let starred = if args.star {
        let s = plugin.starred.as_ref().ok_or_else(|| {
            CliError::from(Error::DegenerateSample("every observation equals the location".into()))
        })?;
        Some(ScatterJson::from(s))
    } else {
        None
    };
    let symmetrized = if args.symmetrized { Some(ScatterJson::from(&ssscm(&x)?)) } else { None };
    let asymptotics = if args.asymptotics {
        Some(AsymptoticsJson::from(&asymptotics_bundle(&x, &plugin.location.estimate)?))
    } else {
        None
    };
    let report = EstimateReport {
        n: x.n(),
        p: x.p(),
        sscm: ScatterJson::from(&plugin.scatter),
        location: plugin.location,
        starred,
        symmetrized,
        coincidence: plugin.coincidence,
        asymptotics,
    };
    let body = match args.output {
        Format::Json => to_json(&report),
        Format::Csv => report.to_csv(),
    };
    emit(located.out.as_deref(), &body)
}

fn asymptotics(args: &LocatedInput) -> Result<(), CliError> {
    let method = location_method(args)?;
    let x = input::read_observations(&args.input)?;
    let location = method.estimate(&x, &MedianOptions::default())?;
    let bundle = asymptotics_bundle(&x, &location.estimate)?;
    let body = to_json(&serde_json::json!({
        "location": location,
        "asymptotics": AsymptoticsJson::from(&bundle),
    }));
    emit(args.out.as_deref(), &body)
}

fn oracle(args: &OracleArgs) -> Result<(), CliError> {
    let text = if args.model.trim_start().starts_with('{') {
        args.model.clone()
    } else {
        std::fs::read_to_string(&args.model).map_err(|e| CliError::input(format!("cannot read model {}: {e}", args.model)))?
    };
    let model: SimModel = serde_json::from_str(&text).map_err(|e| CliError::input(format!("model: {e}")))?;
    let report = match args.method {
        OracleMethod::Closed => {
            let SimModel::Elliptical(m) = &model else {
                return Err(Error::Unsupported("closed form exists only for elliptical models".into()).into());
            };
            let s = population_sscm_closed_p2(m.shape())?;
            OracleReport {
                method: "closed".into(),
                p: m.p(),
                matrix: (&s.matrix).into(),
                standard_errors: None,
                draws: None,
                seed: None,
            }
        }
        OracleMethod::Mc => {
            let est = population_sscm_mc(&model, args.mc_size, SeededStream::new(args.seed, 0))?;
            OracleReport {
                method: "mc".into(),
                p: model.p(),
                matrix: (&est.scatter.matrix).into(),
                standard_errors: Some((&est.standard_errors).into()),
                draws: Some(args.mc_size),
                seed: Some(args.seed),
            }
        }
    };
    emit(None, &to_json(&report))
}

fn experiment(kind: Experiment, f: &ExperimentFlags) -> Result<(), CliError> {
    let args = ExperimentArgs {
        config: f.config.clone(),
        seed: f.seed,
        workers: f.workers,
        fast: f.fast,
        out: f.out.clone(),
    };
    let summary = experiments::run(kind, &args)?;
    print!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Asymptotics(a) => asymptotics(a),
        Command::Oracle(a) => oracle(a),
        Command::Table(f) => experiment(Experiment::Table, f),
        Command::Qq(f) => experiment(Experiment::Qq, f),
        Command::Sweep(f) => experiment(Experiment::Sweep, f),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
