use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ecobench::config::{DataSource, Overrides, RunConfig};
use ecobench::{pipeline, run_report, CliError, CliResult};
use ecobench_core::dataset::ColumnMapping;
use ecobench_core::energy::BackendKind;
use ecobench_core::models::Family;
use ecobench_core::ValidationPolicy;

#[derive(Parser)]
#[command(
    name = "ecobench",
    version,
    about = "Energy-aware anomaly-detection benchmark harness"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (ECOBENCH_OUT takes precedence).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated model families.
    #[arg(long, global = true, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// rapl, constant_power or trace_replay.
    #[arg(long, global = true)]
    backend: Option<String>,
    #[arg(long = "carbon-intensity", global = true, value_name = "G_PER_KWH")]
    carbon_intensity: Option<f64>,
    /// Drop power, carbon, cost and PUE columns from the features.
    #[arg(long = "exclude-sustainability", global = true)]
    exclude_sustainability: bool,
    /// Enable the PCA comparison at this retained-variance ratio.
    #[arg(long = "pca-threshold", global = true, value_name = "R")]
    pca_threshold: Option<f64>,
}

#[derive(Args)]
struct DataArgs {
    /// Flow CSV; the configured source (synthetic by default) otherwise.
    #[arg(long)]
    data: Option<PathBuf>,
    /// JSON object mapping file column names to canonical names.
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// reject, clamp or drop-row.
    #[arg(long)]
    policy: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic flow dataset.
    Synth {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "anomaly-fraction")]
        anomaly_fraction: Option<f64>,
        #[arg(long = "signal-strength")]
        signal_strength: Option<f64>,
        /// Disable the nonlinear traffic/content interaction.
        #[arg(long = "no-interaction")]
        no_interaction: bool,
    },
    /// Load, validate and normalise a flow CSV.
    Ingest {
        path: PathBuf,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        policy: Option<String>,
    },
    /// Exploratory statistics of a dataset.
    Eda {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train, evaluate and energy-track every configured model.
    Bench {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Bench plus randomized hyperparameter search for one family.
    Tune {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        family: Option<String>,
        #[arg(long = "n-iter")]
        n_iter: Option<usize>,
        #[arg(long = "cv-folds")]
        cv_folds: Option<usize>,
    },
    /// Print the ranked eco table of a run and write plot data.
    Report {
        /// Run directory; defaults to the output directory.
        dir: Option<PathBuf>,
    },
}

fn usage(e: impl ToString) -> CliError {
    CliError::usage("config", e.to_string())
}

fn read_mapping(path: &PathBuf) -> CliResult<ColumnMapping> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn apply_data(
    cfg: &mut RunConfig,
    path: Option<PathBuf>,
    mapping: Option<PathBuf>,
    policy: Option<String>,
) -> CliResult<()> {
    let mapping = mapping.as_ref().map(read_mapping).transpose()?;
    match (path, &mut cfg.dataset) {
        (Some(path), _) => {
            cfg.dataset = DataSource::File {
                path,
                mapping: mapping.unwrap_or_default(),
            }
        }
        (None, DataSource::File { mapping: m, .. }) => {
            if let Some(mapping) = mapping {
                *m = mapping;
            }
        }
        (None, DataSource::Synthetic(_)) if mapping.is_some() => {
            return Err(usage("--mapping needs a file dataset"));
        }
        _ => {}
    }
    if let Some(p) = policy {
        cfg.validation_policy = p.parse::<ValidationPolicy>().map_err(usage)?;
    }
    Ok(())
}

fn build_config(g: Global) -> CliResult<RunConfig> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    let models = g
        .models
        .map(|list| {
            list.iter()
                .map(|m| m.trim().parse::<Family>())
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()
        .map_err(usage)?;
    let backend = g.backend.map(|b| b.parse::<BackendKind>()).transpose().map_err(usage)?;
    let out = match std::env::var_os("ECOBENCH_OUT") {
        Some(v) if !v.is_empty() => Some(PathBuf::from(v)),
        _ => g.out,
    };
    cfg.apply(&Overrides {
        seed: g.seed,
        out,
        models,
        backend,
        carbon_intensity: g.carbon_intensity,
        exclude_sustainability: g.exclude_sustainability,
        pca_threshold: g.pca_threshold,
    });
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = build_config(cli.global)?;
    let manifest = match cli.command {
        Command::Synth {
            n,
            anomaly_fraction,
            signal_strength,
            no_interaction,
        } => {
            let DataSource::Synthetic(s) = &mut cfg.dataset else {
                return Err(usage("synth needs a synthetic dataset source"));
            };
            s.n = n.unwrap_or(s.n);
            s.anomaly_fraction = anomaly_fraction.unwrap_or(s.anomaly_fraction);
            s.signal_strength = signal_strength.unwrap_or(s.signal_strength);
            if no_interaction {
                s.interaction = false;
            }
            pipeline::run_synth(&cfg)?
        }
        Command::Ingest { path, mapping, policy } => {
            apply_data(&mut cfg, Some(path), mapping, policy)?;
            pipeline::run_ingest(&cfg)?
        }
        Command::Eda { data } => {
            apply_data(&mut cfg, data.data, data.mapping, data.policy)?;
            pipeline::run_eda(&cfg)?
        }
        Command::Bench { data } => {
            apply_data(&mut cfg, data.data, data.mapping, data.policy)?;
            pipeline::run_bench(&cfg)?
        }
        Command::Tune {
            data,
            family,
            n_iter,
            cv_folds,
        } => {
            apply_data(&mut cfg, data.data, data.mapping, data.policy)?;
            if let Some(f) = family {
                cfg.tune.family = f.parse().map_err(usage)?;
            }
            cfg.tune.n_iter = n_iter.unwrap_or(cfg.tune.n_iter);
            cfg.tune.cv_folds = cv_folds.unwrap_or(cfg.tune.cv_folds);
            pipeline::run_tune(&cfg)?
        }
        Command::Report { dir } => {
            let dir = dir.unwrap_or_else(|| pipeline::output_dir(&cfg));
            let report = run_report(&dir)?;
            print!("{}", report.text);
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            return Ok(());
        }
    };
    eprintln!(
        "{}: wrote {} file(s) to {}",
        manifest.command,
        manifest.files.len() + 1,
        pipeline::output_dir(&cfg).display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
