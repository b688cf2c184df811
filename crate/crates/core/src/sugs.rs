//! Sequential updating and greedy search over one ordering of the data.
//!
//! Observations are visited in the given order; each is allocated to the
//! existing cluster or the fresh cluster with highest posterior probability,
//! with the DP concentration marginalised over a discrete grid.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::conjugate::{ClusterState, Hyperparameters, Predictive};
use crate::error::{Error, Result};
use crate::math::{argmax, log_normalize, logsumexp};

/// Default grid of permissible concentration values.
pub const DEFAULT_BETA_GRID: [f64; 9] = [0.01, 0.1, 1.0, 5.0, 10.0, 15.0, 30.0, 50.0, 100.0];

/// Discrete prior over the DP concentration `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaGrid {
    values: Vec<f64>,
    kappa: Vec<f64>,
}

impl BetaGrid {
    /// Grid with explicit prior weights. Weights must sum to one within 1e-12.
    pub fn new(values: Vec<f64>, kappa: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("beta grid is empty".into()));
        }
        if values.len() != kappa.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                found: kappa.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "beta grid values must be positive, got {v}"
            )));
        }
        if kappa.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(Error::InvalidArgument(
                "beta grid weights must be non-negative".into(),
            ));
        }
        let total: f64 = kappa.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "beta grid weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { values, kappa })
    }

    /// Weights proportional to a Gamma(shape, rate) density evaluated at each
    /// grid point.
    pub fn gamma_prior(values: Vec<f64>, shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0) {
            return Err(Error::InvalidArgument(
                "gamma prior shape and rate must be positive".into(),
            ));
        }
        let log_density: Vec<f64> = values
            .iter()
            .map(|&b| (shape - 1.0) * b.ln() - rate * b)
            .collect();
        Self::from_log_weights(values, log_density)
    }

    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let log_w = vec![0.0; values.len()];
        Self::from_log_weights(values, log_w)
    }

    /// A grid with a single fixed concentration.
    pub fn fixed(beta: f64) -> Result<Self> {
        Self::new(vec![beta], vec![1.0])
    }

    fn from_log_weights(values: Vec<f64>, mut log_w: Vec<f64>) -> Result<Self> {
        if log_w.iter().any(|w| w.is_nan()) {
            return Err(Error::InvalidArgument("non-finite beta grid weight".into()));
        }
        log_normalize(&mut log_w);
        let mut kappa: Vec<f64> = log_w.iter().map(|w| w.exp()).collect();
        let total: f64 = kappa.iter().sum();
        kappa.iter_mut().for_each(|k| *k /= total);
        Self::new(values, kappa)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Default for BetaGrid {
    /// The default grid with Gamma(1, 1) weights.
    fn default() -> Self {
        Self::gamma_prior(DEFAULT_BETA_GRID.to_vec(), 1.0, 1.0).expect("default beta grid is valid")
    }
}

/// Posterior weights `φ_l` over the concentration grid, stored in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaPosterior {
    log_phi: Vec<f64>,
}

impl BetaPosterior {
    pub fn from_prior(grid: &BetaGrid) -> Self {
        let mut log_phi: Vec<f64> = grid.kappa.iter().map(|k| k.ln()).collect();
        log_normalize(&mut log_phi);
        Self { log_phi }
    }

    /// Posterior after allocating observations into clusters of the given
    /// sizes. The product of sequential CRP probabilities depends only on the
    /// sizes, so no ordering is needed:
    /// `φ_l ∝ κ_l β_l^K Γ(β_l) / Γ(β_l + n)`.
    pub fn from_cluster_sizes(grid: &BetaGrid, sizes: &[usize]) -> Self {
        let n: usize = sizes.iter().sum();
        let k = sizes.iter().filter(|&&s| s > 0).count() as f64;
        let mut log_phi: Vec<f64> = grid
            .values
            .iter()
            .zip(&grid.kappa)
            .map(|(&b, &kap)| kap.ln() + k * b.ln() + ln_gamma(b) - ln_gamma(b + n as f64))
            .collect();
        log_normalize(&mut log_phi);
        Self { log_phi }
    }

    pub fn log_phi(&self) -> &[f64] {
        &self.log_phi
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_phi.iter().map(|l| l.exp()).collect()
    }

    /// Posterior mean of `β`.
    pub fn mean(&self, grid: &BetaGrid) -> f64 {
        self.weights()
            .iter()
            .zip(&grid.values)
            .map(|(w, b)| w * b)
            .sum()
    }
}

/// Result of one sequential pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SugsFit {
    /// Zero-based compact cluster label of each observation, in data order.
    pub z: Vec<usize>,
    pub clusters: Vec<ClusterState>,
    pub beta_posterior: BetaPosterior,
    pub ordering: Vec<usize>,
}

impl SugsFit {
    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }
}

/// Log CRP prior of the `i`-th observation (1-based) joining each existing
/// cluster, with the final entry for a new cluster.
pub fn crp_log_prior(counts: &[usize], beta: f64, i: usize) -> Result<Vec<f64>> {
    if i < 1 {
        return Err(Error::InvalidArgument(
            "observation index is 1-based".into(),
        ));
    }
    check_counts(counts, i)?;
    let log_denom = (beta + (i - 1) as f64).ln();
    let mut out: Vec<f64> = counts
        .iter()
        .map(|&n| (n as f64).ln() - log_denom)
        .collect();
    out.push(beta.ln() - log_denom);
    Ok(out)
}

fn check_counts(counts: &[usize], i: usize) -> Result<()> {
    if let Some(k) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyCluster(k));
    }
    let total: usize = counts.iter().sum();
    if total != i - 1 {
        return Err(Error::InvalidArgument(format!(
            "cluster counts sum to {total}, expected {}",
            i - 1
        )));
    }
    Ok(())
}

/// `log Σ_l φ_l π_ikl` for each existing cluster and the new cluster.
fn marginal_log_prior(
    counts: &[usize],
    grid: &BetaGrid,
    post: &BetaPosterior,
    i: usize,
) -> Vec<f64> {
    let prev = (i - 1) as f64;
    let (existing, fresh): (Vec<f64>, Vec<f64>) = grid
        .values
        .iter()
        .zip(&post.log_phi)
        .map(|(&b, &lp)| {
            let d = (b + prev).ln();
            (lp - d, lp + b.ln() - d)
        })
        .unzip();
    let existing = logsumexp(&existing);
    let fresh = logsumexp(&fresh);
    let mut out: Vec<f64> = counts.iter().map(|&n| (n as f64).ln() + existing).collect();
    out.push(fresh);
    out
}

#[allow(clippy::too_many_arguments)]
fn allocation_from_predictives(
    x: &[f64],
    counts: &[usize],
    predictives: &[Predictive],
    prior: &Predictive,
    grid: &BetaGrid,
    post: &BetaPosterior,
    i: usize,
    active: &[usize],
) -> Result<Vec<f64>> {
    let mut logp = marginal_log_prior(counts, grid, post, i);
    for (lp, pred) in logp.iter_mut().zip(predictives.iter().chain(Some(prior))) {
        *lp += pred.log_density_over(x, active);
    }
    let z = log_normalize(&mut logp);
    if !z.is_finite() {
        return Err(Error::WeightUnderflow);
    }
    Ok(logp)
}

/// Normalised log posterior over allocating `x`, the `i`-th observation
/// (1-based), to each of `clusters` or to a new cluster (last entry).
///
/// Only variables switched on in `gamma` enter the likelihood; switched-off
/// variables share the global component and cancel from the normalisation.
pub fn allocation_log_posterior(
    x: &[f64],
    clusters: &[ClusterState],
    grid: &BetaGrid,
    post: &BetaPosterior,
    i: usize,
    gamma: &[bool],
    prior: &ClusterState,
) -> Result<Vec<f64>> {
    if post.log_phi.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: post.log_phi.len(),
        });
    }
    if gamma.len() != x.len() || prior.n_vars() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: gamma.len().min(prior.n_vars()),
        });
    }
    let counts: Vec<usize> = clusters.iter().map(ClusterState::count).collect();
    check_counts(&counts, i)?;
    let predictives = clusters
        .iter()
        .map(ClusterState::predictive)
        .collect::<Result<Vec<_>>>()?;
    let active = active_vars(gamma);
    allocation_from_predictives(
        x,
        &counts,
        &predictives,
        &prior.predictive()?,
        grid,
        post,
        i,
        &active,
    )
}

/// Posterior over `β` after the `i`-th observation (1-based) joined cluster
/// `chosen`; `chosen == counts.len()` denotes a new cluster. `counts` are the
/// sizes before the allocation.
pub fn update_phi(
    post: &BetaPosterior,
    chosen: usize,
    counts: &[usize],
    grid: &BetaGrid,
    i: usize,
) -> Result<BetaPosterior> {
    check_counts(counts, i)?;
    if chosen > counts.len() {
        return Err(Error::InvalidArgument(format!(
            "cluster {chosen} out of range for {} clusters",
            counts.len()
        )));
    }
    let prev = (i - 1) as f64;
    let mut log_phi: Vec<f64> = grid
        .values
        .iter()
        .zip(&post.log_phi)
        .map(|(&b, &lp)| {
            let num = if chosen == counts.len() {
                b.ln()
            } else {
                (counts[chosen] as f64).ln()
            };
            lp + num - (b + prev).ln()
        })
        .collect();
    log_normalize(&mut log_phi);
    Ok(BetaPosterior { log_phi })
}

pub(crate) fn active_vars(gamma: &[bool]) -> Vec<usize> {
    gamma
        .iter()
        .enumerate()
        .filter_map(|(d, &on)| on.then_some(d))
        .collect()
}

pub(crate) fn check_ordering(ordering: &[usize], n: usize) -> Result<()> {
    if ordering.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: ordering.len(),
        });
    }
    let mut seen = vec![false; n];
    for &i in ordering {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidArgument(format!(
                "ordering is not a permutation of 0..{n}"
            )));
        }
    }
    Ok(())
}

/// One greedy sequential pass over `data` (rows are observations) visiting
/// rows in `ordering`. Clustering uses only the variables switched on in
/// `gamma`; with none switched on every observation joins a single cluster.
pub fn sugs_pass(
    data: ArrayView2<'_, f64>,
    ordering: &[usize],
    gamma: &[bool],
    hyper: &Hyperparameters,
    grid: &BetaGrid,
) -> Result<SugsFit> {
    let (n, n_vars) = data.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("no observations".into()));
    }
    check_ordering(ordering, n)?;
    if gamma.len() != n_vars {
        return Err(Error::DimensionMismatch {
            expected: n_vars,
            found: gamma.len(),
        });
    }
    if hyper.n_vars() != n_vars {
        return Err(Error::DimensionMismatch {
            expected: n_vars,
            found: hyper.n_vars(),
        });
    }
    let active = active_vars(gamma);
    let prior = ClusterState::prior(hyper)?;
    let prior_pred = prior.predictive()?;

    let mut z = vec![usize::MAX; n];
    let mut clusters: Vec<ClusterState> = Vec::new();
    let mut predictives: Vec<Predictive> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut post = BetaPosterior::from_prior(grid);

    for (pos, &row) in ordering.iter().enumerate() {
        let i = pos + 1;
        let x = data.row(row);
        let x = x
            .as_slice()
            .map(std::borrow::Cow::Borrowed)
            .unwrap_or_else(|| std::borrow::Cow::Owned(x.to_vec()));
        let chosen = if clusters.is_empty() || active.is_empty() {
            0
        } else {
            let logp = allocation_from_predictives(
                &x,
                &counts,
                &predictives,
                &prior_pred,
                grid,
                &post,
                i,
                &active,
            )
            .map_err(|e| e.at_position(pos))?;
            argmax(&logp)
        };
        post = update_phi(&post, chosen, &counts, grid, i).map_err(|e| e.at_position(pos))?;
        if chosen == clusters.len() {
            clusters.push(prior.clone());
            counts.push(0);
            predictives.push(prior_pred.clone());
        }
        clusters[chosen]
            .update(&x)
            .map_err(|e| e.at_position(pos))?;
        counts[chosen] += 1;
        if !active.is_empty() {
            predictives[chosen] = clusters[chosen]
                .predictive()
                .map_err(|e| e.at_position(pos))?;
        }
        z[row] = chosen;
    }

    Ok(SugsFit {
        z,
        clusters,
        beta_posterior: post,
        ordering: ordering.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn exp_sum(xs: &[f64]) -> f64 {
        xs.iter().map(|x| x.exp()).sum()
    }

    #[test]
    fn crp_prior_symmetric_case() {
        let p = crp_log_prior(&[1], 1.0, 2).unwrap();
        assert_relative_eq!(p[0], 0.5f64.ln());
        assert_relative_eq!(p[1], 0.5f64.ln());
    }

    #[test]
    fn crp_prior_plugin_values() {
        let p = crp_log_prior(&[3, 1], 1.0, 5).unwrap();
        let expected = [0.6f64.ln(), 0.2f64.ln(), 0.2f64.ln()];
        for (a, b) in p.iter().zip(expected) {
            assert_relative_eq!(*a, b, max_relative = 1e-14);
        }
        assert_relative_eq!(exp_sum(&p), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn crp_new_cluster_probability_grows_with_beta() {
        let mut last = f64::NEG_INFINITY;
        for beta in [0.01, 0.1, 1.0, 10.0, 1e3, 1e6] {
            let p = crp_log_prior(&[4, 2], beta, 7).unwrap();
            assert!(p[2] > last);
            last = p[2];
        }
        assert!(last.exp() > 0.9999);
    }

    #[test]
    fn crp_prior_rejects_empty_cluster() {
        assert_eq!(crp_log_prior(&[2, 0], 1.0, 3), Err(Error::EmptyCluster(1)));
    }

    #[test]
    fn default_grid_uses_exponential_weights() {
        let g = BetaGrid::default();
        assert_eq!(g.values(), &DEFAULT_BETA_GRID);
        let norm: f64 = DEFAULT_BETA_GRID.iter().map(|b| (-b).exp()).sum();
        for (k, b) in g.kappa().iter().zip(DEFAULT_BETA_GRID) {
            assert_relative_eq!(*k, (-b).exp() / norm, max_relative = 1e-12);
        }
        assert_relative_eq!(g.kappa().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(BetaGrid::new(vec![], vec![]).is_err());
        assert!(BetaGrid::new(vec![1.0, -1.0], vec![0.5, 0.5]).is_err());
        assert!(BetaGrid::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(BetaGrid::new(vec![1.0, 2.0], vec![0.5]).is_err());
    }

    #[test]
    fn phi_single_grid_point_stays_put() {
        let g = BetaGrid::fixed(2.0).unwrap();
        let p = BetaPosterior::from_prior(&g);
        let p = update_phi(&p, 1, &[3], &g, 4).unwrap();
        assert_eq!(p.log_phi(), &[0.0]);
    }

    #[test]
    fn new_cluster_shifts_phi_toward_large_beta() {
        let g = BetaGrid::uniform(vec![0.5, 2.0, 8.0]).unwrap();
        let p0 = BetaPosterior::from_prior(&g);
        let p1 = update_phi(&p0, 2, &[2, 1], &g, 4).unwrap();
        let ratios: Vec<f64> = p1
            .log_phi()
            .iter()
            .zip(p0.log_phi())
            .map(|(a, b)| a - b)
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn phi_recursion_by_hand() {
        // L = 2, β ∈ {1, 3}, κ = (0.25, 0.75); allocations: new, existing, new.
        let g = BetaGrid::new(vec![1.0, 3.0], vec![0.25, 0.75]).unwrap();
        let mut p = BetaPosterior::from_prior(&g);
        p = update_phi(&p, 0, &[], &g, 1).unwrap();
        p = update_phi(&p, 0, &[1], &g, 2).unwrap();
        p = update_phi(&p, 1, &[2], &g, 3).unwrap();
        // hand recursion on unnormalised weights
        let w1 = 0.25 * 1.0 * (1.0 / 2.0) * (1.0 / 3.0);
        let w3 = 0.75 * 1.0 * (1.0 / 4.0) * (3.0 / 5.0);
        let w = p.weights();
        assert_relative_eq!(w[0], w1 / (w1 + w3), max_relative = 1e-12);
        assert_relative_eq!(w[1], w3 / (w1 + w3), max_relative = 1e-12);
        let closed = BetaPosterior::from_cluster_sizes(&g, &[2, 1]);
        assert_relative_eq!(closed.weights()[0], w[0], max_relative = 1e-12);
    }

    fn hyper1() -> Hyperparameters {
        Hyperparameters::new(vec![0.0], 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn identical_clusters_get_equal_posterior() {
        let h = hyper1();
        let mut a = ClusterState::prior(&h).unwrap();
        a.update(&[1.0]).unwrap();
        let clusters = vec![a.clone(), a];
        let g = BetaGrid::default();
        let post = BetaPosterior::from_prior(&g);
        let prior = ClusterState::prior(&h).unwrap();
        let p = allocation_log_posterior(&[0.3], &clusters, &g, &post, 3, &[true], &prior).unwrap();
        assert_relative_eq!(p[0], p[1], max_relative = 1e-14);
        assert_relative_eq!(exp_sum(&p), 1.0, epsilon = 1e-12);
    }

    /// Direct scalar evaluation of the fixed-β allocation posterior.
    fn scalar_t_logpdf(x: f64, loc: f64, nu: f64, scale_sq: f64) -> f64 {
        let z = (x - loc) * (x - loc) / (nu * scale_sq);
        ln_gamma((nu + 1.0) / 2.0)
            - ln_gamma(nu / 2.0)
            - 0.5 * (nu * std::f64::consts::PI * scale_sq).ln()
            - (nu + 1.0) / 2.0 * (1.0 + z).ln()
    }

    #[test]
    fn three_point_hand_case_with_fixed_beta() {
        // μ₀=0, λ₀=1, ν₀=1, S₀=1. Points 0.0 and 4.0 sit in separate clusters;
        // allocate x = 0.5 as the third observation with β = 1.
        let h = hyper1();
        let mut c1 = ClusterState::prior(&h).unwrap();
        c1.update(&[0.0]).unwrap();
        let mut c2 = ClusterState::prior(&h).unwrap();
        c2.update(&[4.0]).unwrap();
        let prior = ClusterState::prior(&h).unwrap();
        let g = BetaGrid::fixed(1.0).unwrap();
        let post = BetaPosterior::from_prior(&g);
        let p = allocation_log_posterior(&[0.5], &[c1, c2], &g, &post, 3, &[true], &prior).unwrap();

        // c1 after x=0: m=0, λ=2, ν=2, νS = 1 → S = 0.5, scale² = 3·0.5/2
        let l1 = scalar_t_logpdf(0.5, 0.0, 2.0, 0.75);
        // c2 after x=4: m=2, λ=2, ν=2, νS = 1 + 16 − 8 = 9 → S = 4.5, scale² = 6.75
        let l2 = scalar_t_logpdf(0.5, 2.0, 2.0, 6.75);
        // prior: m=0, λ=1, ν=1, S=1 → scale² = 2
        let l3 = scalar_t_logpdf(0.5, 0.0, 1.0, 2.0);
        let w = [l1.exp() / 3.0, l2.exp() / 3.0, l3.exp() / 3.0];
        let total: f64 = w.iter().sum();
        for (a, b) in p.iter().zip(w) {
            assert_relative_eq!(a.exp(), b / total, max_relative = 1e-12);
        }
    }

    #[test]
    fn single_observation_pass() {
        let data = array![[1.0, 2.0]];
        let h = Hyperparameters::from_data(data.view()).unwrap();
        let fit = sugs_pass(data.view(), &[0], &[true, true], &h, &BetaGrid::default()).unwrap();
        assert_eq!(fit.z, vec![0]);
        assert_eq!(fit.n_clusters(), 1);
        assert_eq!(fit.clusters[0].count(), 1);
    }

    #[test]
    fn far_apart_points_split() {
        let data = array![[-100.0], [100.0]];
        let h = Hyperparameters::from_data(data.view()).unwrap();
        let fit = sugs_pass(data.view(), &[0, 1], &[true], &h, &BetaGrid::default()).unwrap();
        assert_eq!(fit.z, vec![0, 1]);
    }

    #[test]
    fn pass_validates_inputs() {
        let data = array![[0.0], [1.0]];
        let h = Hyperparameters::from_data(data.view()).unwrap();
        let g = BetaGrid::default();
        assert!(sugs_pass(data.view(), &[0, 0], &[true], &h, &g).is_err());
        assert!(sugs_pass(data.view(), &[0], &[true], &h, &g).is_err());
        assert!(sugs_pass(data.view(), &[1, 0], &[true, false], &h, &g).is_err());
    }

    #[test]
    fn all_off_gamma_gives_one_cluster() {
        let data = array![[-50.0], [0.0], [50.0]];
        let h = Hyperparameters::from_data(data.view()).unwrap();
        let fit = sugs_pass(data.view(), &[2, 0, 1], &[false], &h, &BetaGrid::default()).unwrap();
        assert_eq!(fit.z, vec![0, 0, 0]);
    }

    #[test]
    fn labels_follow_visit_order() {
        let data = array![[-100.0], [100.0], [-99.0]];
        let h = Hyperparameters::from_data(data.view()).unwrap();
        let fit = sugs_pass(data.view(), &[1, 0, 2], &[true], &h, &BetaGrid::default()).unwrap();
        assert_eq!(fit.z, vec![1, 0, 1]);
        assert_eq!(fit.ordering, vec![1, 0, 2]);
    }
}
