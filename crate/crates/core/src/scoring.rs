//! Model scores for a fitted partition: marginal likelihood and
//! pseudo-marginal likelihood, plus best-model selection.
//!
//! A model is a partition `z` together with variable switches `gamma`.
//! Switched-on variables are scored under the cluster-specific components,
//! switched-off variables under one global component spanning all
//! observations, so models with different switches remain comparable.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::conjugate::{ClusterState, Hyperparameters};
use crate::error::{Error, Result};
use crate::math::logsumexp;
use crate::sugs::{active_vars, BetaGrid, BetaPosterior};

/// Validate that `z` holds compact zero-based labels and return the number of
/// clusters.
pub fn validate_partition(z: &[usize], n: usize) -> Result<usize> {
    if z.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: z.len(),
        });
    }
    let k = z.iter().max().map_or(0, |m| m + 1);
    let mut seen = vec![false; k];
    for &label in z {
        seen[label] = true;
    }
    if let Some(empty) = seen.iter().position(|s| !s) {
        return Err(Error::EmptyCluster(empty));
    }
    Ok(k)
}

/// Relabel an arbitrary labelling into compact zero-based labels ordered by
/// first appearance.
pub fn compact_labels(z: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    z.iter()
        .map(|&label| {
            let next = map.len();
            *map.entry(label).or_insert(next)
        })
        .collect()
}

pub(crate) fn cluster_states(
    data: ArrayView2<'_, f64>,
    z: &[usize],
    k: usize,
    hyper: &Hyperparameters,
) -> Result<Vec<ClusterState>> {
    let prior = ClusterState::prior(hyper)?;
    let mut states = vec![prior; k];
    for (row, &label) in data.rows().into_iter().zip(z) {
        states[label].update(&row.to_vec())?;
    }
    Ok(states)
}

pub(crate) fn global_state(
    data: ArrayView2<'_, f64>,
    hyper: &Hyperparameters,
) -> Result<ClusterState> {
    let mut state = ClusterState::prior(hyper)?;
    for row in data.rows() {
        state.update(&row.to_vec())?;
    }
    Ok(state)
}

/// Per-variable log marginal likelihoods of a partition: summed over its
/// clusters (`clustered`) and under the single global component (`global`).
#[derive(Debug, Clone, PartialEq)]
pub struct VariableEvidence {
    pub clustered: Vec<f64>,
    pub global: Vec<f64>,
}

impl VariableEvidence {
    pub fn compute(
        data: ArrayView2<'_, f64>,
        z: &[usize],
        hyper: &Hyperparameters,
    ) -> Result<Self> {
        let (n, n_vars) = data.dim();
        let k = validate_partition(z, n)?;
        if hyper.n_vars() != n_vars {
            return Err(Error::DimensionMismatch {
                expected: n_vars,
                found: hyper.n_vars(),
            });
        }
        let states = cluster_states(data, z, k, hyper)?;
        let global = global_state(data, hyper)?;
        let mut clustered = vec![0.0; n_vars];
        for (c, state) in states.iter().enumerate() {
            for (d, acc) in clustered.iter_mut().enumerate() {
                *acc += state
                    .log_marginal_likelihood_var(hyper, d)
                    .map_err(|e| match e {
                        Error::Degenerate { variable, .. } => Error::DegenerateCluster {
                            cluster: c,
                            variable,
                        },
                        other => other,
                    })?;
            }
        }
        let global = (0..n_vars)
            .map(|d| global.log_marginal_likelihood_var(hyper, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { clustered, global })
    }

    /// Log marginal likelihood of the model with switches `gamma`.
    pub fn total(&self, gamma: &[bool]) -> f64 {
        gamma
            .iter()
            .enumerate()
            .map(|(d, &on)| {
                if on {
                    self.clustered[d]
                } else {
                    self.global[d]
                }
            })
            .sum()
    }
}

/// `log p(X | z, Γ)`: clustered evidence over switched-on variables plus
/// global evidence over switched-off variables.
pub fn log_marginal_likelihood_model(
    data: ArrayView2<'_, f64>,
    z: &[usize],
    gamma: &[bool],
    hyper: &Hyperparameters,
) -> Result<f64> {
    if gamma.len() != data.ncols() {
        return Err(Error::DimensionMismatch {
            expected: data.ncols(),
            found: gamma.len(),
        });
    }
    Ok(VariableEvidence::compute(data, z, hyper)?.total(gamma))
}

/// How each observation's held-out predictive is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PmlMode {
    /// Remove the observation from its cluster before predicting it.
    #[default]
    ExactLoo,
    /// Predict with the full-data posteriors.
    FullDataApprox,
}

/// Log pseudo-marginal likelihood: the sum over observations of the log
/// predictive density of each observation given all others.
///
/// Allocation weights mix the CRP over the concentration grid using the
/// posterior implied by the cluster sizes of `z`.
pub fn log_pseudo_marginal_likelihood(
    data: ArrayView2<'_, f64>,
    z: &[usize],
    gamma: &[bool],
    hyper: &Hyperparameters,
    grid: &BetaGrid,
    mode: PmlMode,
) -> Result<f64> {
    let (n, n_vars) = data.dim();
    if gamma.len() != n_vars {
        return Err(Error::DimensionMismatch {
            expected: n_vars,
            found: gamma.len(),
        });
    }
    let k = validate_partition(z, n)?;
    let on = active_vars(gamma);
    let off: Vec<usize> = (0..n_vars).filter(|d| !gamma[*d]).collect();

    let states = cluster_states(data, z, k, hyper)?;
    let global = global_state(data, hyper)?;
    let prior = ClusterState::prior(hyper)?;
    let sizes: Vec<usize> = states.iter().map(ClusterState::count).collect();
    let phi = BetaPosterior::from_cluster_sizes(grid, &sizes);

    let others = match mode {
        PmlMode::ExactLoo => (n - 1) as f64,
        PmlMode::FullDataApprox => n as f64,
    };
    // log Σ_l φ_l / (β_l + N) and log Σ_l φ_l β_l / (β_l + N)
    let (existing, fresh): (Vec<f64>, Vec<f64>) = grid
        .values()
        .iter()
        .zip(phi.log_phi())
        .map(|(&b, &lp)| {
            let d = (b + others).ln();
            (lp - d, lp + b.ln() - d)
        })
        .unzip();
    let log_existing = logsumexp(&existing);
    let log_fresh = logsumexp(&fresh);

    let predictives = states
        .iter()
        .map(ClusterState::predictive)
        .collect::<Result<Vec<_>>>()?;
    let prior_pred = prior.predictive()?;
    let global_pred = global.predictive()?;

    let mut total = 0.0;
    let mut terms = Vec::with_capacity(k + 1);
    for (i, row) in data.rows().into_iter().enumerate() {
        let x = row.to_vec();
        let own = z[i];
        terms.clear();
        for (c, state) in states.iter().enumerate() {
            let mut count = state.count();
            let log_dens = if mode == PmlMode::ExactLoo && c == own {
                count -= 1;
                if count == 0 {
                    continue;
                }
                let mut loo = state.clone();
                loo.downdate(&x)?;
                loo.predictive()?.log_density_over(&x, &on)
            } else {
                predictives[c].log_density_over(&x, &on)
            };
            terms.push((count as f64).ln() + log_existing + log_dens);
        }
        terms.push(log_fresh + prior_pred.log_density_over(&x, &on));
        let mut log_p = logsumexp(&terms);
        if !off.is_empty() {
            log_p += match mode {
                PmlMode::ExactLoo => {
                    let mut loo = global.clone();
                    loo.downdate(&x)?;
                    loo.predictive()?.log_density_over(&x, &off)
                }
                PmlMode::FullDataApprox => global_pred.log_density_over(&x, &off),
            };
        }
        total += log_p;
    }
    Ok(total)
}

/// Where a model came from in a restart search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    /// Stable position of the task in the search.
    pub task_id: usize,
    pub subsample: usize,
    pub ordering: usize,
    pub seed: u64,
}

/// One scored model from a restart search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub z: Vec<usize>,
    pub gamma: Vec<bool>,
    pub log_ml: f64,
    pub log_pml: Option<f64>,
    pub provenance: Provenance,
    /// The switches went all-off at some iteration of the pass.
    pub degenerate_gamma: bool,
}

impl FittedModel {
    pub fn n_clusters(&self) -> usize {
        self.z.iter().max().map_or(0, |m| m + 1)
    }

    pub fn score(&self, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Ml => self.log_ml,
            Criterion::Pml => self.log_pml.unwrap_or(f64::NEG_INFINITY),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Ml,
    Pml,
}

/// The model maximising `criterion`; ties go to the earliest provenance.
pub fn select_best(models: &[FittedModel], criterion: Criterion) -> Result<&FittedModel> {
    models
        .iter()
        .max_by(|a, b| {
            a.score(criterion)
                .total_cmp(&b.score(criterion))
                .then_with(|| b.provenance.cmp(&a.provenance))
        })
        .ok_or(Error::EmptyModelSet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};

    fn toy() -> (Array2<f64>, Hyperparameters) {
        let data = array![
            [0.1, 5.0, -1.0],
            [0.3, 4.5, 0.2],
            [3.9, -0.5, 0.4],
            [4.2, 0.0, -0.3],
            [0.0, 5.2, 1.1]
        ];
        let h = Hyperparameters::new(vec![1.0, 2.0, 0.0], 0.5, 2.0, 0.4).unwrap();
        (data, h)
    }

    #[test]
    fn partition_validation() {
        assert_eq!(validate_partition(&[0, 1, 0], 3), Ok(2));
        assert_eq!(
            validate_partition(&[0, 2, 0], 3),
            Err(Error::EmptyCluster(1))
        );
        assert!(validate_partition(&[0, 1], 3).is_err());
        assert_eq!(compact_labels(&[7, 3, 7, 9]), vec![0, 1, 0, 2]);
    }

    #[test]
    fn single_cluster_collapses_to_conjugate_marginal() {
        let (data, h) = toy();
        let z = vec![0; 5];
        let ml = log_marginal_likelihood_model(data.view(), &z, &[true; 3], &h).unwrap();
        let state = global_state(data.view(), &h).unwrap();
        assert_relative_eq!(
            ml,
            state.log_marginal_likelihood(&h).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn all_off_ignores_partition() {
        let (data, h) = toy();
        let a =
            log_marginal_likelihood_model(data.view(), &[0, 0, 1, 1, 0], &[false; 3], &h).unwrap();
        let b =
            log_marginal_likelihood_model(data.view(), &[0, 1, 2, 3, 4], &[false; 3], &h).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scores_are_label_invariant() {
        let (data, h) = toy();
        let g = BetaGrid::default();
        let gamma = [true, false, true];
        let z1 = [0, 0, 1, 1, 2];
        let z2 = [2, 2, 0, 0, 1];
        let z2 = compact_labels(&z2);
        let ml1 = log_marginal_likelihood_model(data.view(), &z1, &gamma, &h).unwrap();
        let ml2 = log_marginal_likelihood_model(data.view(), &z2, &gamma, &h).unwrap();
        assert_relative_eq!(ml1, ml2, max_relative = 1e-13);
        for mode in [PmlMode::ExactLoo, PmlMode::FullDataApprox] {
            let p1 =
                log_pseudo_marginal_likelihood(data.view(), &z1, &gamma, &h, &g, mode).unwrap();
            let p2 =
                log_pseudo_marginal_likelihood(data.view(), &z2, &gamma, &h, &g, mode).unwrap();
            assert_relative_eq!(p1, p2, max_relative = 1e-12);
        }
    }

    #[test]
    fn pml_of_single_point_is_prior_predictive() {
        let data = array![[0.7, -2.0]];
        let h = Hyperparameters::new(vec![0.0, 0.0], 0.01, 2.0, 0.2).unwrap();
        let g = BetaGrid::default();
        let prior = ClusterState::prior(&h).unwrap();
        let expected = prior.predictive_log_density(&[0.7, -2.0]).unwrap();
        for gamma in [[true, true], [true, false], [false, false]] {
            let pml = log_pseudo_marginal_likelihood(
                data.view(),
                &[0],
                &gamma,
                &h,
                &g,
                PmlMode::ExactLoo,
            )
            .unwrap();
            assert_relative_eq!(pml, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn empty_cluster_is_rejected() {
        let (data, h) = toy();
        let err = log_marginal_likelihood_model(data.view(), &[0, 0, 2, 2, 0], &[true; 3], &h);
        assert_eq!(err, Err(Error::EmptyCluster(1)));
    }

    fn model(log_ml: f64, task_id: usize) -> FittedModel {
        FittedModel {
            z: vec![0],
            gamma: vec![true],
            log_ml,
            log_pml: Some(-log_ml),
            provenance: Provenance {
                task_id,
                subsample: 0,
                ordering: task_id,
                seed: 0,
            },
            degenerate_gamma: false,
        }
    }

    #[test]
    fn select_best_cases() {
        assert_eq!(select_best(&[], Criterion::Ml), Err(Error::EmptyModelSet));
        let one = [model(-3.0, 0)];
        assert_eq!(
            select_best(&one, Criterion::Ml).unwrap().provenance.task_id,
            0
        );
        let two = [model(-10.0, 0), model(-5.0, 1)];
        assert_eq!(select_best(&two, Criterion::Ml).unwrap().log_ml, -5.0);
        assert_eq!(select_best(&two, Criterion::Pml).unwrap().log_ml, -10.0);
        let tied = [model(-5.0, 3), model(-5.0, 1), model(-5.0, 2)];
        assert_eq!(
            select_best(&tied, Criterion::Ml)
                .unwrap()
                .provenance
                .task_id,
            1
        );
    }
}
