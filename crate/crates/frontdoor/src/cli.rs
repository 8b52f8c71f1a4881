use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use saffron_core::domain::RatingMatrix;
use saffron_core::evaluation::{
    generate_synthetic_dataset, run_experiment, Dataset, ExperimentSetting, SyntheticConfig,
};
use saffron_core::pipeline::{incorporate_new_requirements, initial_prioritization, reprioritize};
use saffron_core::similarity::SimilarityMethod;
use serde::Serialize;

use crate::bundle::{
    load_bundle, load_rating_file, read_requirements, save_bundle, BundleError, DatasetBundle, Manifest, ScaleSpec,
};
use crate::ops::{experiment_csv, incorporation_report, ranking_report, similarity_report, PredictionParams};
use crate::store::Store;

pub const STORAGE_ENV: &str = "SAFFRON_STORAGE";

#[derive(Parser, Debug)]
#[command(
    name = "saffron",
    version,
    about = "Influence-weighted requirements prioritization with rating prediction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rank the elicited requirements of a bundle
    Prioritize {
        bundle: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Add new requirements with partial ratings, predict likely ratings and re-rank
    Incorporate {
        bundle: PathBuf,
        /// Requirements table (`requirement_id,title,status`) to add as new
        #[arg(long)]
        new_requirements: Option<PathBuf>,
        /// Ratings table for the new requirements from the stakeholders asked so far
        #[arg(long, requires = "new_requirements")]
        partial_ratings: Option<PathBuf>,
        #[command(flatten)]
        params: PredictionParams,
        /// Write the updated bundle (with predicted.csv) to this directory
        #[arg(long)]
        save: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Requirement-by-requirement similarity matrix
    Similarity {
        bundle: PathBuf,
        #[arg(long, default_value_t = SimilarityMethod::default())]
        method: SimilarityMethod,
        #[command(flatten)]
        out: Output,
    },
    /// Repeated random sub-sampling experiment against the bundle's truth.csv
    Evaluate {
        bundle: PathBuf,
        #[command(flatten)]
        setting: EvaluateArgs,
        #[command(flatten)]
        params: PredictionParams,
        #[command(flatten)]
        out: Output,
    },
    /// Write a synthetic bundle drawn from a planted low-rank model
    Generate {
        out_dir: PathBuf,
        #[command(flatten)]
        config: GenerateArgs,
    },
    /// Serve the HTTP API
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Project storage root
        #[arg(long, env = STORAGE_ENV, default_value = "saffron-data")]
        storage: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Toml,
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct Output {
    /// Report format; csv is available for `similarity` and `evaluate`
    #[arg(long, value_enum, default_value_t = Format::Toml)]
    pub format: Format,
    /// Write the report here instead of stdout
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long, default_value_t = 50)]
    pub train_requirements: usize,
    #[arg(long, default_value_t = 40)]
    pub manual_users: usize,
    #[arg(long = "new-count", default_value_t = 15)]
    pub new_count: usize,
    #[arg(long, default_value_t = 30)]
    pub repeats: usize,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 62)]
    pub stakeholders: usize,
    #[arg(long, default_value_t = 82)]
    pub requirements: usize,
    #[arg(long, default_value_t = 6)]
    pub roles: usize,
    #[arg(long, default_value_t = 3)]
    pub planted_rank: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub scale_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub scale_max: f64,
}

/// Failure classes mapped to exit codes 1 (validation) and 2 (runtime).
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        match e {
            BundleError::Io { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<saffron_core::Error> for CliError {
    fn from(e: saffron_core::Error) -> Self {
        match e {
            saffron_core::Error::Divergence { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn render<T: Serialize>(report: &T, format: Format) -> Result<String, CliError> {
    match format {
        Format::Toml => toml::to_string(report).map_err(|e| CliError::Runtime(format!("cannot render report: {e}"))),
        Format::Json => serde_json::to_string_pretty(report)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| CliError::Runtime(format!("cannot render report: {e}"))),
        Format::Csv => Err(CliError::Validation(
            "csv output is not available for this command".into(),
        )),
    }
}

fn emit(text: &str, out: &Output) -> Result<(), CliError> {
    match &out.output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Runtime(format!("stdout: {e}")))
        }
    }
}

fn similarity_csv(report: &crate::ops::SimilarityReport) -> String {
    let mut out = String::from("requirement_id");
    for q in &report.requirements {
        out.push(',');
        out.push_str(q.as_str());
    }
    out.push('\n');
    for (q, row) in report.requirements.iter().zip(&report.rows) {
        out.push_str(q.as_str());
        for v in row {
            out.push(',');
            out.push_str(&crate::bundle::format_number(*v));
        }
        out.push('\n');
    }
    out
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Prioritize { bundle, out } => {
            let b = load_bundle(&bundle)?;
            let state = initial_prioritization(b.project, b.ratings)?;
            emit(&render(&ranking_report(&state), out.format)?, &out)
        }
        Command::Incorporate {
            bundle,
            new_requirements,
            partial_ratings,
            params,
            save,
            out,
        } => {
            let b = load_bundle(&bundle)?;
            let scale = b.ratings.scale();
            let state = initial_prioritization(b.project, b.ratings)?;
            let options = params.options();
            let result = match new_requirements {
                Some(path) => {
                    let requirements = read_requirements(&path)?.into_iter().map(|r| r.row).collect();
                    let partial = match partial_ratings {
                        Some(p) => load_rating_file(&p, scale)?,
                        None => RatingMatrix::new(scale),
                    };
                    incorporate_new_requirements(&state, requirements, &partial, &options)?
                }
                None => reprioritize(&state, &options)?,
            };
            if let Some(dir) = save {
                save_bundle(
                    &dir,
                    &DatasetBundle {
                        manifest: b.manifest,
                        project: result.state.project().clone(),
                        ratings: result.state.ratings().clone(),
                        truth: b.truth,
                    },
                )?;
            }
            emit(
                &render(&incorporation_report(&state, &result, &options), out.format)?,
                &out,
            )
        }
        Command::Similarity { bundle, method, out } => {
            let b = load_bundle(&bundle)?;
            let report = similarity_report(&b.ratings, method)?;
            let text = match out.format {
                Format::Csv => similarity_csv(&report),
                f => render(&report, f)?,
            };
            emit(&text, &out)
        }
        Command::Evaluate {
            bundle,
            setting,
            params,
            out,
        } => {
            let b = load_bundle(&bundle)?;
            let options = params.options();
            let dataset = Dataset {
                ground_truth: b.truth.unwrap_or_else(|| b.ratings.clone()),
                elicited: b.ratings,
                project: b.project,
            };
            let report = run_experiment(
                &dataset,
                &ExperimentSetting {
                    n_train_requirements: setting.train_requirements,
                    n_manual_users: setting.manual_users,
                    n_new_requirements: setting.new_count,
                    prediction_fraction: options.fraction,
                    repeats: setting.repeats,
                    rng_seed: params.seed.unwrap_or(0),
                    options,
                },
            )?;
            let text = match out.format {
                Format::Csv => experiment_csv(&report),
                f => render(&report, f)?,
            };
            emit(&text, &out)
        }
        Command::Generate { out_dir, config } => generate(&out_dir, config),
        Command::Serve { bind, storage } => serve(bind, storage),
    }
}

fn generate(dir: &Path, a: GenerateArgs) -> Result<(), CliError> {
    let config = SyntheticConfig {
        n_stakeholders: a.stakeholders,
        n_requirements: a.requirements,
        n_roles: a.roles,
        planted_rank: a.planted_rank,
        noise_std: a.noise_std,
        density: a.density,
        seed: a.seed,
        scale_min: a.scale_min,
        scale_max: a.scale_max,
    };
    let data = generate_synthetic_dataset(&config)?;
    let metadata = [
        ("generator", "planted low-rank".to_owned()),
        ("planted_rank", a.planted_rank.to_string()),
        ("noise_std", a.noise_std.to_string()),
        ("density", a.density.to_string()),
        ("seed", a.seed.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), v))
    .collect();
    save_bundle(
        dir,
        &DatasetBundle {
            manifest: Manifest {
                name: Some(format!("synthetic-{}", a.seed)),
                description: None,
                scale: ScaleSpec {
                    min: a.scale_min,
                    max: a.scale_max,
                },
                metadata,
            },
            project: data.project,
            ratings: data.elicited,
            truth: Some(data.ground_truth),
        },
    )?;
    Ok(())
}

fn serve(bind: SocketAddr, storage: PathBuf) -> Result<(), CliError> {
    let store = Store::open(&storage).map_err(|e| CliError::Runtime(format!("storage: {e}")))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot bind {bind}: {e}")))?;
        eprintln!(
            "saffron listening on http://{} (storage {})",
            listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?,
            storage.display()
        );
        axum::serve(listener, crate::api::router(Arc::new(store)))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Runtime(e.to_string()))
    })
}
