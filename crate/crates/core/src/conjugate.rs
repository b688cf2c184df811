//! Normal–inverse-chi-squared conjugate model for diagonal Gaussian clusters.
//!
//! Each variable of a cluster carries an independent NIχ² posterior
//! `N(mean | m, Σ/λ) · Inv-χ²(Σ | ν, S)`. States are tracked through the
//! accumulator `t = ν₀S₀ + λ₀μ₀² + Σ x²`, from which `νS = t − λm²` is derived
//! on demand. All densities are returned in log space.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Default prior precision scale on the cluster mean.
pub const DEFAULT_LAMBDA0: f64 = 0.01;
/// Default prior scale of the per-variable variance.
pub const DEFAULT_S0: f64 = 0.2;

/// `νS` below `DEGENERACY_RATIO * t` is treated as a collapsed posterior.
const DEGENERACY_RATIO: f64 = 1e-12;

/// Prior hyperparameters `(μ₀, λ₀, ν₀, S₀)`. `μ₀` is per variable; the others
/// are shared by every variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub mu0: Vec<f64>,
    pub lambda0: f64,
    pub nu0: f64,
    pub s0: f64,
}

impl Hyperparameters {
    pub fn new(mu0: Vec<f64>, lambda0: f64, nu0: f64, s0: f64) -> Result<Self> {
        let hyper = Self {
            mu0,
            lambda0,
            nu0,
            s0,
        };
        hyper.validate()?;
        Ok(hyper)
    }

    /// Data-driven defaults: `μ₀` is the column mean, `λ₀ = 0.01`, `ν₀` is the
    /// number of variables and `S₀ = 0.2`.
    pub fn from_data(data: ArrayView2<'_, f64>) -> Result<Self> {
        let n_vars = data.ncols();
        let mu0 = column_means(data);
        Self::new(mu0, DEFAULT_LAMBDA0, n_vars.max(1) as f64, DEFAULT_S0)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidHyperparameter(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        check("lambda0", self.lambda0)?;
        check("nu0", self.nu0)?;
        check("s0", self.s0)?;
        if let Some(bad) = self.mu0.iter().find(|m| !m.is_finite()) {
            return Err(Error::InvalidHyperparameter(format!(
                "mu0 must be finite, got {bad}"
            )));
        }
        Ok(())
    }

    pub fn n_vars(&self) -> usize {
        self.mu0.len()
    }

    /// Hyperparameters restricted to a subset of variables.
    pub fn select(&self, vars: &[usize]) -> Self {
        Self {
            mu0: vars.iter().map(|&d| self.mu0[d]).collect(),
            ..self.clone()
        }
    }

    fn t0(&self, d: usize) -> f64 {
        self.nu0 * self.s0 + self.lambda0 * self.mu0[d] * self.mu0[d]
    }
}

fn column_means(data: ArrayView2<'_, f64>) -> Vec<f64> {
    let n = data.nrows();
    data.columns()
        .into_iter()
        .map(|c| if n == 0 { 0.0 } else { c.sum() / n as f64 })
        .collect()
}

/// Sequential sufficient statistics of one cluster's NIχ² posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    m: Vec<f64>,
    t: Vec<f64>,
    lambda: f64,
    nu: f64,
    count: usize,
}

impl ClusterState {
    /// The prior expressed as a state with no observations.
    pub fn prior(hyper: &Hyperparameters) -> Result<Self> {
        hyper.validate()?;
        Ok(Self {
            m: hyper.mu0.clone(),
            t: (0..hyper.n_vars()).map(|d| hyper.t0(d)).collect(),
            lambda: hyper.lambda0,
            nu: hyper.nu0,
            count: 0,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.m.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.m
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Raw sum-of-squares accumulator per variable.
    pub fn accumulator(&self) -> &[f64] {
        &self.t
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Absorb one observation.
    pub fn update(&mut self, x: &[f64]) -> Result<()> {
        self.check_dim(x)?;
        let lambda_next = self.lambda + 1.0;
        for ((m, t), &xd) in self.m.iter_mut().zip(self.t.iter_mut()).zip(x) {
            *m = (self.lambda * *m + xd) / lambda_next;
            *t += xd * xd;
        }
        self.lambda = lambda_next;
        self.nu += 1.0;
        self.count += 1;
        Ok(())
    }

    /// Remove an observation previously absorbed with [`update`](Self::update).
    pub fn downdate(&mut self, x: &[f64]) -> Result<()> {
        self.check_dim(x)?;
        if self.count == 0 {
            return Err(Error::Underflow);
        }
        let lambda_prev = self.lambda - 1.0;
        for ((m, t), &xd) in self.m.iter_mut().zip(self.t.iter_mut()).zip(x) {
            *m = (self.lambda * *m - xd) / lambda_prev;
            *t -= xd * xd;
        }
        self.lambda = lambda_prev;
        self.nu -= 1.0;
        self.count -= 1;
        Ok(())
    }

    /// `ν S` for variable `d`, guarded against collapse.
    pub fn nu_s(&self, d: usize) -> Result<f64> {
        let t = self.t[d];
        let nu_s = t - self.lambda * self.m[d] * self.m[d];
        if !(nu_s >= DEGENERACY_RATIO * t.abs()) || nu_s <= 0.0 {
            return Err(Error::Degenerate {
                variable: d,
                nu_s,
                t,
            });
        }
        Ok(nu_s)
    }

    /// Posterior predictive of a new observation: independent Student-t
    /// densities per variable.
    pub fn predictive(&self) -> Result<Predictive> {
        let nu = self.nu;
        let half_gap = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0);
        let mut loc = Vec::with_capacity(self.n_vars());
        let mut inv_nu_scale_sq = Vec::with_capacity(self.n_vars());
        let mut log_norm = Vec::with_capacity(self.n_vars());
        for d in 0..self.n_vars() {
            let s = self.nu_s(d)? / nu;
            let scale_sq = (1.0 + self.lambda) * s / self.lambda;
            loc.push(self.m[d]);
            inv_nu_scale_sq.push(1.0 / (nu * scale_sq));
            log_norm.push(half_gap - 0.5 * (nu * std::f64::consts::PI * scale_sq).ln());
        }
        Ok(Predictive {
            nu,
            loc,
            inv_nu_scale_sq,
            log_norm,
        })
    }

    /// Log predictive density of `x`, summed over variables.
    pub fn predictive_log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.predictive()?.log_density(x))
    }

    /// Log marginal likelihood of variable `d` over the observations absorbed.
    pub fn log_marginal_likelihood_var(&self, hyper: &Hyperparameters, d: usize) -> Result<f64> {
        if self.count == 0 {
            return Ok(0.0);
        }
        let n = self.count as f64;
        let nu0 = hyper.nu0;
        let prior_nu_s = nu0 * hyper.s0;
        let nu_s = self.nu_s(d)?;
        Ok(
            -0.5 * n * std::f64::consts::PI.ln() + ln_gamma(self.nu / 2.0) - ln_gamma(nu0 / 2.0)
                + 0.5
                    * (hyper.lambda0.ln() + nu0 * prior_nu_s.ln()
                        - self.lambda.ln()
                        - self.nu * nu_s.ln()),
        )
    }

    /// Log marginal likelihood of all absorbed observations, summed over
    /// variables. Zero for an empty state.
    pub fn log_marginal_likelihood(&self, hyper: &Hyperparameters) -> Result<f64> {
        if hyper.n_vars() != self.n_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars(),
                found: hyper.n_vars(),
            });
        }
        (0..self.n_vars()).try_fold(0.0, |acc, d| {
            Ok(acc + self.log_marginal_likelihood_var(hyper, d)?)
        })
    }
}

/// Cached Student-t predictive of a cluster: location `m`, `ν` degrees of
/// freedom and squared scale `(1 + λ) S / λ` per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictive {
    nu: f64,
    loc: Vec<f64>,
    inv_nu_scale_sq: Vec<f64>,
    log_norm: Vec<f64>,
}

impl Predictive {
    #[inline]
    pub fn log_density_var(&self, d: usize, x: f64) -> f64 {
        let z = x - self.loc[d];
        self.log_norm[d] - 0.5 * (self.nu + 1.0) * (z * z * self.inv_nu_scale_sq[d]).ln_1p()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(d, &xd)| self.log_density_var(d, xd))
            .sum()
    }

    /// Log density restricted to the variables listed in `vars`.
    pub fn log_density_over(&self, x: &[f64], vars: &[usize]) -> f64 {
        vars.iter().map(|&d| self.log_density_var(d, x[d])).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hyper1(mu0: f64, lambda0: f64, nu0: f64, s0: f64) -> Hyperparameters {
        Hyperparameters::new(vec![mu0], lambda0, nu0, s0).unwrap()
    }

    fn assert_state_close(a: &ClusterState, b: &ClusterState, tol: f64) {
        assert_eq!(a.count, b.count);
        assert_relative_eq!(a.lambda, b.lambda, max_relative = tol);
        assert_relative_eq!(a.nu, b.nu, max_relative = tol);
        for d in 0..a.n_vars() {
            assert_relative_eq!(a.m[d], b.m[d], max_relative = tol, epsilon = tol);
            assert_relative_eq!(a.t[d], b.t[d], max_relative = tol);
        }
    }

    #[test]
    fn prior_state_from_default_settings() {
        let s = ClusterState::prior(&hyper1(0.0, 0.01, 1.0, 0.2)).unwrap();
        assert_eq!(s.count(), 0);
        assert_eq!(s.mean(), &[0.0]);
        assert_eq!(s.lambda(), 0.01);
        assert_eq!(s.nu(), 1.0);
        assert_relative_eq!(s.accumulator()[0], 0.2);
    }

    #[test]
    fn prior_accumulator_includes_prior_mean() {
        let s = ClusterState::prior(&hyper1(0.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(s.accumulator(), &[1.0]);
        let s = ClusterState::prior(&hyper1(2.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(s.accumulator(), &[5.0]);
    }

    #[test]
    fn rejects_non_positive_hyperparameters() {
        for (l, n, s) in [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, 0.0)] {
            let err = Hyperparameters::new(vec![0.0], l, n, s).unwrap_err();
            assert!(matches!(err, Error::InvalidHyperparameter(_)));
        }
        let bad = Hyperparameters {
            mu0: vec![0.0],
            lambda0: 1.0,
            nu0: 0.0,
            s0: 1.0,
        };
        assert!(ClusterState::prior(&bad).is_err());
    }

    #[test]
    fn zero_observation_keeps_zero_mean() {
        let mut s = ClusterState::prior(&hyper1(0.0, 0.01, 1.0, 0.2)).unwrap();
        s.update(&[0.0]).unwrap();
        assert_eq!(s.mean(), &[0.0]);
        assert_relative_eq!(s.lambda(), 1.01);
        assert_eq!(s.nu(), 2.0);
        assert_relative_eq!(s.accumulator()[0], 0.2);
    }

    #[test]
    fn single_update_matches_batch_posterior() {
        let hyper = hyper1(0.0, 1.0, 1.0, 1.0);
        let mut s = ClusterState::prior(&hyper).unwrap();
        s.update(&[1.0]).unwrap();
        assert_relative_eq!(s.mean()[0], 0.5);
        assert_eq!(s.lambda(), 2.0);
        assert_eq!(s.nu(), 2.0);
        assert_relative_eq!(s.accumulator()[0], 2.0);
        // batch form: ν₀S₀ + Σ(x − x̄)² + λ₀n/(λ₀+n)(x̄ − μ₀)² = 1 + 0 + 0.5
        assert_relative_eq!(s.nu_s(0).unwrap(), 1.5, max_relative = 1e-14);
    }

    #[test]
    fn update_rejects_wrong_dimension() {
        let mut s = ClusterState::prior(&hyper1(0.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(
            s.update(&[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 1,
                found: 2
            })
        );
    }

    #[test]
    fn downdate_inverts_update_and_matches_rebuild() {
        let hyper = Hyperparameters::new(vec![0.3, -1.0], 0.5, 3.0, 0.7).unwrap();
        let xs = [[1.2, -0.4], [3.3, 0.9], [-0.7, 2.2]];
        let mut s = ClusterState::prior(&hyper).unwrap();
        for x in &xs {
            s.update(x).unwrap();
        }
        let snapshot = s.clone();
        s.update(&[9.0, -9.0]).unwrap();
        s.downdate(&[9.0, -9.0]).unwrap();
        assert_state_close(&s, &snapshot, 1e-10);

        s.downdate(&xs[1]).unwrap();
        let mut rebuilt = ClusterState::prior(&hyper).unwrap();
        rebuilt.update(&xs[0]).unwrap();
        rebuilt.update(&xs[2]).unwrap();
        assert_state_close(&s, &rebuilt, 1e-10);
    }

    #[test]
    fn downdate_on_empty_state_errors() {
        let mut s = ClusterState::prior(&hyper1(0.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(s.downdate(&[0.0]), Err(Error::Underflow));
    }

    #[test]
    fn predictive_is_symmetric_about_location() {
        let mut s = ClusterState::prior(&hyper1(1.0, 0.3, 2.0, 0.5)).unwrap();
        s.update(&[2.0]).unwrap();
        s.update(&[0.5]).unwrap();
        let m = s.mean()[0];
        for c in [0.1, 1.0, 7.5] {
            let a = s.predictive_log_density(&[m + c]).unwrap();
            let b = s.predictive_log_density(&[m - c]).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn empty_marginal_likelihood_is_zero() {
        let hyper = hyper1(0.0, 1.0, 1.0, 1.0);
        let s = ClusterState::prior(&hyper).unwrap();
        assert_eq!(s.log_marginal_likelihood(&hyper).unwrap(), 0.0);
    }

    #[test]
    fn one_observation_marginal_equals_prior_predictive() {
        let hyper = Hyperparameters::new(vec![0.2, 1.0], 0.01, 2.0, 0.2).unwrap();
        let x = [0.7, -1.3];
        let prior = ClusterState::prior(&hyper).unwrap();
        let pred = prior.predictive_log_density(&x).unwrap();
        let mut s = prior.clone();
        s.update(&x).unwrap();
        assert_relative_eq!(
            s.log_marginal_likelihood(&hyper).unwrap(),
            pred,
            max_relative = 1e-12
        );
    }

    #[test]
    fn marginal_likelihood_flags_degeneracy() {
        let hyper = hyper1(0.0, 1.0, 1.0, 1.0);
        let mut s = ClusterState::prior(&hyper).unwrap();
        s.update(&[1.0]).unwrap();
        // corrupt the accumulator so that νS collapses
        s.t[0] = s.lambda * s.m[0] * s.m[0];
        assert!(matches!(
            s.log_marginal_likelihood(&hyper),
            Err(Error::Degenerate { variable: 0, .. })
        ));
    }
}
