use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use flowlab::runner::{run, run_suite, Emit, ExperimentConfig, Operation, RunRecord, SUITES};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "flowlab",
    version,
    about = "Pressure, Lyapunov and coding experiments on desk-scale flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Model file and catalog operations.
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
    /// Horocycle curvatures k^u, k^s at sampled points.
    Riccati(Common),
    /// Forward and backward Lyapunov exponents at sampled points.
    Lyapunov(Common),
    /// Periodic orbit enumeration and small-exponent families.
    Orbits(Common),
    /// Pressure curve of t * phi.
    Pressure(Common),
    /// Legendre transform and dimension spectrum.
    Spectrum(Common),
    /// Pressure on nested cycle-capped subsystems.
    Nested(Common),
    /// Symbolic coding of a hyperbolic envelope.
    Coding {
        #[command(subcommand)]
        action: CodingAction,
    },
    /// Acceptance battery, plus every matching config in --config DIR.
    Suite {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        name: String,
        /// Directory of experiment configs.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "flowlab-out/suite")]
        out: PathBuf,
    },
    /// Runs one experiment config of any operation.
    Run(Common),
}

#[derive(Subcommand)]
enum ModelAction {
    Validate(Common),
}

#[derive(Subcommand)]
enum CodingAction {
    Build(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog name or model file; overrides the config.
    #[arg(long)]
    model: Option<String>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the run's generator; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Plot-data format; overrides the config.
    #[arg(long, value_enum)]
    emit: Option<Emit>,
}

impl Common {
    fn config(&self, operation: Option<&str>) -> anyhow::Result<ExperimentConfig> {
        let mut config = match (&self.config, operation) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => {
                let Some(model) = &self.model else {
                    bail!(flowlab::Error::Config("either --model or --config is required".into()));
                };
                ExperimentConfig {
                    model: model.clone(),
                    seed: 7,
                    out: None,
                    emit: Emit::Csv,
                    tolerances: Default::default(),
                    operation: Operation::defaults(name, None)?,
                }
            }
            (None, None) => bail!(flowlab::Error::Config("run needs --config".into())),
        };
        if let Some(name) = operation {
            if config.operation.name() != name {
                bail!(flowlab::Error::Config(format!(
                    "config operation `{}` does not match subcommand `{name}`",
                    config.operation.name()
                )));
            }
        }
        if let Some(model) = &self.model {
            config.model = model.clone();
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(emit) = self.emit {
            config.emit = emit;
        }
        if let Some(out) = &self.out {
            config.out = Some(out.to_string_lossy().into_owned());
        }
        Ok(config)
    }
}

fn default_out(config: &ExperimentConfig) -> PathBuf {
    let stem = Path::new(&config.model)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| config.model.clone());
    PathBuf::from("flowlab-out").join(format!("{stem}-{}", config.operation.name()))
}

fn execute(common: &Common, operation: Option<&str>) -> anyhow::Result<ExitCode> {
    let config = common.config(operation)?;
    let out = config
        .out
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| default_out(&config));
    let record = run(&config, &out)?;
    report(&record, &out)
}

fn report(record: &RunRecord, out: &Path) -> anyhow::Result<ExitCode> {
    for c in &record.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {} files to {}", record.outputs.len() + 2, out.display());
    if let Some(e) = &record.error {
        eprintln!("error[{}]: {}", e.code, e.message);
        return Ok(ExitCode::FAILURE);
    }
    let failed: Vec<&str> = record
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if !failed.is_empty() {
        eprintln!("error[E_CHECK]: failed checks: {}", failed.join(", "));
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Model {
            action: ModelAction::Validate(c),
        } => execute(&c, Some("validate")),
        Command::Riccati(c) => execute(&c, Some("riccati")),
        Command::Lyapunov(c) => execute(&c, Some("lyapunov")),
        Command::Orbits(c) => execute(&c, Some("orbits")),
        Command::Pressure(c) => execute(&c, Some("pressure")),
        Command::Spectrum(c) => execute(&c, Some("spectrum")),
        Command::Nested(c) => execute(&c, Some("nested")),
        Command::Coding {
            action: CodingAction::Build(c),
        } => execute(&c, Some("coding")),
        Command::Run(c) => execute(&c, None),
        Command::Suite { name, config, out } => {
            let r = run_suite(&name, config.as_deref(), &out).with_context(|| format!("suite `{name}`"))?;
            for c in &r.criteria {
                println!("{}", c.line());
            }
            for run in &r.runs {
                println!("{} run {}", if run.passed { "PASS" } else { "FAIL" }, run.config);
            }
            println!("summary: {}", out.join("summary.json").display());
            if r.passed {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("error[E_SUITE]: failed: {}", r.failures.join(", "));
                Ok(ExitCode::FAILURE)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[E_USAGE]: {line}");
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            let code = e
                .chain()
                .find_map(|c| c.downcast_ref::<flowlab::Error>())
                .map(|e| e.code())
                .unwrap_or("E_USAGE");
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error[{code}]: {msg}");
            ExitCode::FAILURE
        }
    }
}
