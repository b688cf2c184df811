//! Run configuration: defaults, JSON loading, validation and hashing.

use std::path::{Path, PathBuf};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sugsvarsel::bma::{DEFAULT_CUT_HEIGHT, DEFAULT_WINDOW_K};
use sugsvarsel::conjugate::{DEFAULT_LAMBDA0, DEFAULT_S0};
use sugsvarsel::sugs::DEFAULT_BETA_GRID;
use sugsvarsel::varsel::{
    default_subsamples, DEFAULT_INIT_ORDERINGS, DEFAULT_ITERATIONS, DEFAULT_P1_FRACTION,
    DEFAULT_PRIOR_ON,
};
use sugsvarsel::{BetaGrid, Criterion, Hyperparameters, PmlMode, SearchConfig};

use crate::CliError;

/// Environment variable giving the default worker count.
pub const THREADS_ENV: &str = "SUGSVARSEL_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mu0Mode {
    #[default]
    PerVariableMean,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Nu0Mode {
    #[default]
    NVariables,
    Explicit,
}

/// Prior weights over the concentration grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum KappaMode {
    /// Gamma(1, 1) density at each grid point, normalised.
    #[default]
    Gamma,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    pub id_column: Option<String>,
    pub standardize: bool,
    pub mu0_mode: Mu0Mode,
    pub mu0: Option<Vec<f64>>,
    pub lambda0: f64,
    pub nu0_mode: Nu0Mode,
    pub nu0: Option<f64>,
    pub s0: f64,
    pub beta_grid: Vec<f64>,
    pub kappa_mode: KappaMode,
    pub prior_on: f64,
    pub iterations: usize,
    /// `None` means `ceil(D / 10) * 2`.
    pub subsamples: Option<usize>,
    pub orderings: usize,
    pub init_orderings: usize,
    pub p1_fraction: f64,
    pub criterion: Criterion,
    pub pml_mode: PmlMode,
    pub window_k: f64,
    pub cut_height: f64,
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            id_column: None,
            standardize: false,
            mu0_mode: Mu0Mode::default(),
            mu0: None,
            lambda0: DEFAULT_LAMBDA0,
            nu0_mode: Nu0Mode::default(),
            nu0: None,
            s0: DEFAULT_S0,
            beta_grid: DEFAULT_BETA_GRID.to_vec(),
            kappa_mode: KappaMode::default(),
            prior_on: DEFAULT_PRIOR_ON,
            iterations: DEFAULT_ITERATIONS,
            subsamples: None,
            orderings: 30,
            init_orderings: DEFAULT_INIT_ORDERINGS,
            p1_fraction: DEFAULT_P1_FRACTION,
            criterion: Criterion::default(),
            pml_mode: PmlMode::default(),
            window_k: DEFAULT_WINDOW_K,
            cut_height: DEFAULT_CUT_HEIGHT,
            seed: 0,
            threads: None,
            output: PathBuf::from("sugsvarsel-out"),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    /// Range checks that do not need the data.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Input(m));
        if self.input.as_os_str().is_empty() {
            return bad("no input file given".into());
        }
        if self.mu0_mode == Mu0Mode::Explicit && self.mu0.is_none() {
            return bad("mu0-mode explicit requires mu0".into());
        }
        if self.nu0_mode == Nu0Mode::Explicit && self.nu0.is_none() {
            return bad("nu0-mode explicit requires nu0".into());
        }
        if self.beta_grid.is_empty() {
            return bad("beta grid is empty".into());
        }
        if self.beta_grid.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return bad("beta grid values must be positive".into());
        }
        if !(self.window_k.is_finite() && self.window_k >= 1.0) {
            return bad(format!(
                "window-k must be at least 1, got {}",
                self.window_k
            ));
        }
        if !(self.cut_height.is_finite() && (0.0..=1.0).contains(&self.cut_height)) {
            return bad(format!(
                "cut-height must lie in [0, 1], got {}",
                self.cut_height
            ));
        }
        if self.subsamples == Some(0) {
            return bad("subsamples must be at least 1".into());
        }
        Ok(())
    }

    pub fn hyperparameters(&self, data: ArrayView2<'_, f64>) -> Result<Hyperparameters, CliError> {
        let d = data.ncols();
        let mu0 = match self.mu0_mode {
            Mu0Mode::PerVariableMean => data
                .mean_axis(ndarray::Axis(0))
                .ok_or_else(|| CliError::Input("no observations".into()))?
                .to_vec(),
            Mu0Mode::Explicit => {
                let mu0 = self.mu0.clone().unwrap_or_default();
                match mu0.len() {
                    1 => vec![mu0[0]; d],
                    l if l == d => mu0,
                    l => {
                        return Err(CliError::Input(format!(
                            "mu0 has {l} values but the data has {d} variables"
                        )))
                    }
                }
            }
        };
        let nu0 = match self.nu0_mode {
            Nu0Mode::NVariables => d as f64,
            Nu0Mode::Explicit => self.nu0.unwrap_or(d as f64),
        };
        Ok(Hyperparameters::new(mu0, self.lambda0, nu0, self.s0)?)
    }

    pub fn beta_grid(&self) -> Result<BetaGrid, CliError> {
        let values = self.beta_grid.clone();
        Ok(match self.kappa_mode {
            KappaMode::Gamma => BetaGrid::gamma_prior(values, 1.0, 1.0)?,
            KappaMode::Uniform => BetaGrid::uniform(values)?,
        })
    }

    pub fn search_config(&self, n_vars: usize) -> SearchConfig {
        SearchConfig {
            prior_on: self.prior_on,
            iterations: self.iterations,
            subsamples: self
                .subsamples
                .unwrap_or_else(|| default_subsamples(n_vars)),
            orderings: self.orderings,
            init_orderings: self.init_orderings,
            p1_fraction: self.p1_fraction,
            seed: self.seed,
            threads: self.threads,
            pml_mode: Some(self.pml_mode),
        }
    }

    /// SHA-256 over the settings that can change results. Paths and the
    /// thread count are excluded.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Some(obj) = v.as_object_mut() {
            for key in ["input", "output", "threads"] {
                obj.remove(key);
            }
        }
        sha256_hex(v.to_string().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Thread count from the environment, if set to a positive integer.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(CliError::Input(format!(
                "{THREADS_ENV}={v:?} is not a positive integer"
            ))),
        },
        Err(_) => Ok(None),
    }
}
