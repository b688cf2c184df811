//! Argument parsing. Every `RunConfig` field has a flag; flags override a
//! `--config` file, which overrides the environment, which overrides the
//! built-in defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sugsvarsel::eval::Covariance;
use sugsvarsel::{Criterion, PmlMode, ScenarioSpec};

use crate::config::{threads_from_env, KappaMode, Mu0Mode, Nu0Mode, RunConfig, THREADS_ENV};
use crate::{cmd_cluster, cmd_evaluate, cmd_simulate, commands, CliError};

#[derive(Debug, Parser)]
#[command(
    name = "sugsvarsel",
    version,
    about = "Greedy Dirichlet process mixture clustering with variable selection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster a numeric CSV and write the run artifacts.
    Cluster(Box<ClusterArgs>),
    /// Write a simulated dataset and its truth.
    Simulate(SimulateArgs),
    /// Score a run directory against simulation truth.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Ml,
    Pml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PmlModeArg {
    ExactLoo,
    FullDataApprox,
}

#[derive(Debug, Default, Args)]
pub struct ClusterArgs {
    /// Input CSV (header row required).
    pub input: Option<PathBuf>,
    /// JSON file with any subset of the run settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub id_column: Option<String>,
    /// Centre and scale every column to unit variance first.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
    #[arg(long, value_enum)]
    pub mu0_mode: Option<Mu0Mode>,
    /// One value for all variables or one per variable (implies explicit mode).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu0: Option<Vec<f64>>,
    #[arg(long)]
    pub lambda0: Option<f64>,
    #[arg(long, value_enum)]
    pub nu0_mode: Option<Nu0Mode>,
    /// Implies explicit mode.
    #[arg(long)]
    pub nu0: Option<f64>,
    #[arg(long)]
    pub s0: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub beta_grid: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub kappa_mode: Option<KappaMode>,
    #[arg(long)]
    pub prior_on: Option<f64>,
    /// Maximum allocation/selection iterations per pass.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Variable sub-samples (default: ceil(D/10)*2).
    #[arg(long)]
    pub subsamples: Option<usize>,
    /// Random orderings per sub-sample.
    #[arg(long)]
    pub orderings: Option<usize>,
    #[arg(long)]
    pub init_orderings: Option<usize>,
    #[arg(long)]
    pub p1_fraction: Option<f64>,
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,
    #[arg(long, value_enum)]
    pub pml_mode: Option<PmlModeArg>,
    #[arg(long)]
    pub window_k: Option<f64>,
    #[arg(long)]
    pub cut_height: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: $SUGSVARSEL_THREADS, else all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

impl ClusterArgs {
    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        if c.threads.is_none() {
            c.threads = threads_from_env()?;
        }
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        set!(
            input,
            standardize,
            mu0_mode,
            lambda0,
            nu0_mode,
            s0,
            beta_grid,
            kappa_mode
        );
        set!(
            prior_on,
            iterations,
            orderings,
            init_orderings,
            p1_fraction,
            window_k,
            cut_height,
            seed,
            output
        );
        if self.id_column.is_some() {
            c.id_column = self.id_column;
        }
        if let Some(mu0) = self.mu0 {
            c.mu0 = Some(mu0);
            c.mu0_mode = Mu0Mode::Explicit;
        }
        if let Some(nu0) = self.nu0 {
            c.nu0 = Some(nu0);
            c.nu0_mode = Nu0Mode::Explicit;
        }
        if self.subsamples.is_some() {
            c.subsamples = self.subsamples;
        }
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        if let Some(k) = self.criterion {
            c.criterion = match k {
                CriterionArg::Ml => Criterion::Ml,
                CriterionArg::Pml => Criterion::Pml,
            };
        }
        if let Some(m) = self.pml_mode {
            c.pml_mode = match m {
                PmlModeArg::ExactLoo => PmlMode::ExactLoo,
                PmlModeArg::FullDataApprox => PmlMode::FullDataApprox,
            };
        }
        if c.threads == Some(0) {
            return Err(CliError::Input(format!(
                "threads must be positive (flag, config or {THREADS_ENV})"
            )));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// Three components at 0, +2 and -2 in the relevant variables.
    HighDimensional,
    /// 30 observations with one correlated component.
    CorrelatedComponent,
    /// One standard normal component.
    Single,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "high-dimensional")]
    pub scenario: Scenario,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub d: usize,
    #[arg(long, default_value_t = 0.5)]
    pub relevant_fraction: f64,
    /// Full scenario as JSON; overrides the other scenario flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for data.csv and truth.json.
    #[arg(long, short)]
    pub output: PathBuf,
}

impl SimulateArgs {
    pub fn spec(&self) -> Result<ScenarioSpec, CliError> {
        if let Some(path) = &self.spec {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            return serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())));
        }
        Ok(match self.scenario {
            Scenario::HighDimensional => {
                if !(0.0..=1.0).contains(&self.relevant_fraction) {
                    return Err(CliError::Input(
                        "relevant-fraction must lie in [0, 1]".into(),
                    ));
                }
                ScenarioSpec::high_dimensional(self.n, self.d, self.relevant_fraction, self.seed)
            }
            Scenario::CorrelatedComponent => ScenarioSpec::correlated_component(self.seed),
            Scenario::Single => ScenarioSpec {
                n: self.n,
                d_total: self.d,
                d_relevant: self.d,
                weights: vec![1.0],
                means: vec![vec![0.0; self.d]],
                covariances: vec![Covariance::Identity],
                seed: self.seed,
            },
        })
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Output directory of a `cluster` run.
    #[arg(long)]
    pub run: PathBuf,
    /// truth.json written by `simulate`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Metrics file (default: <run>/metrics.json).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Cluster(args) => {
            let config = args.resolve()?;
            let outcome = cmd_cluster(&config)?;
            let k = outcome.partition.iter().max().map_or(0, |m| m + 1);
            println!(
                "{} models, {k} clusters; results in {}",
                outcome.n_models,
                outcome.output.display()
            );
        }
        Command::Simulate(args) => {
            let sim = cmd_simulate(&args.spec()?, &args.output)?;
            println!(
                "{} x {} written to {}",
                sim.data.nrows(),
                sim.data.ncols(),
                args.output.display()
            );
        }
        Command::Evaluate(args) => {
            let metrics = cmd_evaluate(&args.run, &args.truth)?;
            let path = args.output.unwrap_or_else(|| args.run.join("metrics.json"));
            commands::write_metrics(&metrics, &path)?;
            println!(
                "ARI (BMA) {:.4}, ARI (best) {:.4}; metrics in {}",
                metrics.ari_bma,
                metrics.ari_best,
                path.display()
            );
        }
    }
    Ok(())
}
