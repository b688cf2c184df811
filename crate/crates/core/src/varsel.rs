//! Greedy variable selection alternating with sequential clustering, and the
//! restart search built on random variable sub-samples and random orderings.

use ndarray::{ArrayView2, Axis};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugate::Hyperparameters;
use crate::error::{Error, Result};
use crate::scoring::{
    log_pseudo_marginal_likelihood, FittedModel, PmlMode, Provenance, VariableEvidence,
};
use crate::sugs::{sugs_pass, BetaGrid};

/// Prior probability that a variable is relevant.
pub const DEFAULT_PRIOR_ON: f64 = 0.5;
/// Clustering / switch-update alternations per pass.
pub const DEFAULT_ITERATIONS: usize = 2;
/// Random orderings tried on each variable sub-sample.
pub const DEFAULT_INIT_ORDERINGS: usize = 10;
/// Fraction of variables drawn for each sub-sample.
pub const DEFAULT_P1_FRACTION: f64 = 0.1;

fn check_prior_on(prior_on: f64) -> Result<()> {
    if prior_on > 0.0 && prior_on < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "prior_on must lie in (0, 1), got {prior_on}"
        )))
    }
}

/// Normalised `(log p(γ_d = 1 | X, z), log p(γ_d = 0 | X, z))`.
pub fn variable_log_posterior(
    data: ArrayView2<'_, f64>,
    z: &[usize],
    d: usize,
    prior_on: f64,
    hyper: &Hyperparameters,
) -> Result<(f64, f64)> {
    check_prior_on(prior_on)?;
    if d >= data.ncols() {
        return Err(Error::InvalidArgument(format!(
            "variable {d} out of range for {} variables",
            data.ncols()
        )));
    }
    let column = data.select(Axis(1), &[d]);
    let evidence = VariableEvidence::compute(column.view(), z, &hyper.select(&[d]))?;
    Ok(switch_posterior(
        evidence.clustered[0],
        evidence.global[0],
        prior_on,
    ))
}

fn switch_posterior(clustered: f64, global: f64, prior_on: f64) -> (f64, f64) {
    let on = prior_on.ln() + clustered;
    let off = (1.0 - prior_on).ln() + global;
    let norm = crate::math::logsumexp(&[on, off]);
    (on - norm, off - norm)
}

/// Set every switch to its more probable state given `z`; exact ties keep
/// the variable.
pub fn greedy_gamma_update(
    data: ArrayView2<'_, f64>,
    z: &[usize],
    prior_on: f64,
    hyper: &Hyperparameters,
) -> Result<Vec<bool>> {
    check_prior_on(prior_on)?;
    let evidence = VariableEvidence::compute(data, z, hyper)?;
    Ok(gamma_from_evidence(&evidence, prior_on))
}

fn gamma_from_evidence(evidence: &VariableEvidence, prior_on: f64) -> Vec<bool> {
    evidence
        .clustered
        .iter()
        .zip(&evidence.global)
        .map(|(&c, &g)| {
            let (on, off) = switch_posterior(c, g, prior_on);
            on >= off
        })
        .collect()
}

/// Output of one clustering / variable-selection alternation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarSelFit {
    pub z: Vec<usize>,
    pub gamma: Vec<bool>,
    pub iterations_run: usize,
    pub log_ml: f64,
    /// Some iteration clustered with every switch off.
    pub degenerate_gamma: bool,
}

/// Alternate a sequential pass under the current switches with a greedy
/// switch update, `iterations` times, starting from `gamma0`.
pub fn sugsvarsel_pass(
    data: ArrayView2<'_, f64>,
    ordering: &[usize],
    gamma0: &[bool],
    iterations: usize,
    prior_on: f64,
    hyper: &Hyperparameters,
    grid: &BetaGrid,
) -> Result<VarSelFit> {
    if iterations == 0 {
        return Err(Error::InvalidArgument(
            "iterations must be at least 1".into(),
        ));
    }
    check_prior_on(prior_on)?;
    let mut gamma = gamma0.to_vec();
    let mut degenerate = false;
    let mut z = Vec::new();
    let mut log_ml = f64::NAN;
    for _ in 0..iterations {
        degenerate |= !gamma.iter().any(|&g| g);
        z = sugs_pass(data, ordering, &gamma, hyper, grid)?.z;
        let evidence = VariableEvidence::compute(data, &z, hyper)?;
        gamma = gamma_from_evidence(&evidence, prior_on);
        log_ml = evidence.total(&gamma);
    }
    Ok(VarSelFit {
        z,
        gamma,
        iterations_run: iterations,
        log_ml,
        degenerate_gamma: degenerate,
    })
}

/// Settings of the sub-sampling restart search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub prior_on: f64,
    /// Alternations per pass (`T`).
    pub iterations: usize,
    /// Variable sub-samples (`M`).
    pub subsamples: usize,
    /// Full-data orderings per sub-sample (`Q`).
    pub orderings: usize,
    /// Orderings tried on each reduced dataset.
    pub init_orderings: usize,
    pub p1_fraction: f64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Also score every model by pseudo-marginal likelihood.
    pub pml_mode: Option<PmlMode>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            prior_on: DEFAULT_PRIOR_ON,
            iterations: DEFAULT_ITERATIONS,
            subsamples: 20,
            orderings: 30,
            init_orderings: DEFAULT_INIT_ORDERINGS,
            p1_fraction: DEFAULT_P1_FRACTION,
            seed: 0,
            threads: None,
            pml_mode: Some(PmlMode::ExactLoo),
        }
    }
}

/// Heuristic default number of variable sub-samples: two per ten variables.
pub fn default_subsamples(n_vars: usize) -> usize {
    n_vars.div_ceil(10) * 2
}

impl SearchConfig {
    pub fn validate(&self, n_vars: usize) -> Result<usize> {
        check_prior_on(self.prior_on)?;
        if self.iterations == 0
            || self.subsamples == 0
            || self.orderings == 0
            || self.init_orderings == 0
        {
            return Err(Error::InvalidArgument(
                "iterations, subsamples, orderings and init_orderings must be at least 1".into(),
            ));
        }
        if !(self.p1_fraction > 0.0 && self.p1_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "p1_fraction must lie in (0, 1], got {}",
                self.p1_fraction
            )));
        }
        let p1 = (self.p1_fraction * n_vars as f64).round() as usize;
        if p1 < 1 {
            return Err(Error::InvalidArgument(format!(
                "p1_fraction {} selects no variables out of {n_vars}",
                self.p1_fraction
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("threads must be at least 1".into()));
        }
        Ok(p1)
    }

    fn run<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            None => Ok(job()),
            Some(t) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
                Ok(pool.install(job))
            }
        }
    }
}

const STAGE_SUBSAMPLE: u64 = 1;
const STAGE_INIT_ORDERING: u64 = 2;
const STAGE_SEARCH_ORDERING: u64 = 3;

/// Independent random stream for one task, derived only from the seed and the
/// task coordinates so results do not depend on scheduling.
fn task_rng(seed: u64, stage: u64, a: usize, b: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stage << 56) | ((a as u64 & 0xff_ffff) << 28) | (b as u64 & 0xfff_ffff));
    rng
}

fn random_ordering(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut ordering: Vec<usize> = (0..n).collect();
    ordering.shuffle(rng);
    ordering
}

/// Initial switch vectors from random variable sub-samples, one per
/// sub-sample.
///
/// Each sub-sample clusters the reduced data from all-on switches under
/// several random orderings, keeps the run with the best marginal likelihood,
/// and extends its switches to every variable by greedy updates under the
/// chosen partition.
pub fn subsample_init(
    data: ArrayView2<'_, f64>,
    config: &SearchConfig,
    hyper: &Hyperparameters,
    grid: &BetaGrid,
) -> Result<Vec<Vec<bool>>> {
    let (n, n_vars) = data.dim();
    let p1 = config.validate(n_vars)?;
    if n == 0 {
        return Err(Error::InvalidArgument("no observations".into()));
    }
    let one = |m: usize| -> Result<Vec<bool>> {
        let mut rng = task_rng(config.seed, STAGE_SUBSAMPLE, m, 0);
        let mut vars = index::sample(&mut rng, n_vars, p1).into_vec();
        vars.sort_unstable();
        let reduced = data.select(Axis(1), &vars);
        let reduced_hyper = hyper.select(&vars);
        let all_on = vec![true; p1];

        let mut best: Option<VarSelFit> = None;
        let mut last_err = None;
        for r in 0..config.init_orderings {
            let ordering =
                random_ordering(n, &mut task_rng(config.seed, STAGE_INIT_ORDERING, m, r));
            match sugsvarsel_pass(
                reduced.view(),
                &ordering,
                &all_on,
                config.iterations,
                config.prior_on,
                &reduced_hyper,
                grid,
            ) {
                Ok(fit) => {
                    if best.as_ref().is_none_or(|b| fit.log_ml > b.log_ml) {
                        best = Some(fit);
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        let best = match (best, last_err) {
            (Some(b), _) => b,
            (None, Some(e)) => return Err(e),
            (None, None) => unreachable!("init_orderings >= 1"),
        };
        let mut gamma = greedy_gamma_update(data, &best.z, config.prior_on, hyper)?;
        for (&d, &g) in vars.iter().zip(&best.gamma) {
            gamma[d] = g;
        }
        Ok(gamma)
    };
    config.run(|| (0..config.subsamples).into_par_iter().map(one).collect())?
}

/// A pass of the restart search that failed numerically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchFailure {
    pub provenance: Provenance,
    pub message: String,
}

/// All models of a restart search, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    pub models: Vec<FittedModel>,
    pub failures: Vec<SearchFailure>,
    /// Switch vectors produced by the sub-sampling initialisation.
    pub initial_gammas: Vec<Vec<bool>>,
}

/// Sub-sampling initialisation followed by `orderings` full-data passes from
/// each initial switch vector. Models are sorted by decreasing marginal
/// likelihood, ties by task id.
pub fn full_search(
    data: ArrayView2<'_, f64>,
    config: &SearchConfig,
    hyper: &Hyperparameters,
    grid: &BetaGrid,
) -> Result<ModelSet> {
    let n = data.nrows();
    let initial_gammas = subsample_init(data, config, hyper, grid)?;
    let q = config.orderings;
    let task = |task_id: usize| -> std::result::Result<FittedModel, SearchFailure> {
        let (m, o) = (task_id / q, task_id % q);
        let provenance = Provenance {
            task_id,
            subsample: m,
            ordering: o,
            seed: config.seed,
        };
        let fail = |e: Error| SearchFailure {
            provenance,
            message: e.to_string(),
        };
        let ordering = random_ordering(n, &mut task_rng(config.seed, STAGE_SEARCH_ORDERING, m, o));
        let fit = sugsvarsel_pass(
            data,
            &ordering,
            &initial_gammas[m],
            config.iterations,
            config.prior_on,
            hyper,
            grid,
        )
        .map_err(fail)?;
        let log_pml = config
            .pml_mode
            .map(|mode| log_pseudo_marginal_likelihood(data, &fit.z, &fit.gamma, hyper, grid, mode))
            .transpose()
            .map_err(fail)?;
        Ok(FittedModel {
            z: fit.z,
            gamma: fit.gamma,
            log_ml: fit.log_ml,
            log_pml,
            provenance,
            degenerate_gamma: fit.degenerate_gamma,
        })
    };
    let results: Vec<_> = config.run(|| {
        (0..config.subsamples * q)
            .into_par_iter()
            .map(task)
            .collect()
    })?;
    let mut models = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(model) => models.push(model),
            Err(f) => failures.push(f),
        }
    }
    models.sort_by(|a, b| {
        b.log_ml
            .total_cmp(&a.log_ml)
            .then(a.provenance.task_id.cmp(&b.provenance.task_id))
    });
    Ok(ModelSet {
        models,
        failures,
        initial_gammas,
    })
}
