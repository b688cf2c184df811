//! Synthetic Gaussian-mixture scenarios with known truth, and the metrics
//! used to score a clustering against it.

use std::collections::HashMap;

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Covariance of one component over the relevant variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariance {
    Identity,
    /// Per-variable variances.
    Diagonal(Vec<f64>),
    /// Full symmetric positive-definite matrix.
    Dense(Vec<Vec<f64>>),
}

/// Generator description: a Gaussian mixture over the first `d_relevant`
/// variables, standard Gaussian noise on the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub d_total: usize,
    pub d_relevant: usize,
    pub weights: Vec<f64>,
    /// One mean vector of length `d_relevant` per component.
    pub means: Vec<Vec<f64>>,
    /// One covariance per component.
    pub covariances: Vec<Covariance>,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Three components with weights 0.5/0.3/0.2 centred at 0, 2 and -2 in
    /// every relevant variable, identity covariance.
    pub fn high_dimensional(n: usize, d_total: usize, relevant_fraction: f64, seed: u64) -> Self {
        let d_relevant = ((relevant_fraction * d_total as f64).round() as usize).min(d_total);
        Self {
            n,
            d_total,
            d_relevant,
            weights: vec![0.5, 0.3, 0.2],
            means: [0.0, 2.0, -2.0]
                .iter()
                .map(|&c| vec![c; d_relevant])
                .collect(),
            covariances: vec![Covariance::Identity; 3],
            seed,
        }
    }

    /// 30 observations, two relevant variables and two noise variables. Two
    /// isotropic components at (2, 2) and (-3, -3) with weight 0.4 each; the
    /// third, weight 0.2, sits at (-3, 4) with covariance [[2, 1], [1, 2]].
    pub fn correlated_component(seed: u64) -> Self {
        Self {
            n: 30,
            d_total: 4,
            d_relevant: 2,
            weights: vec![0.4, 0.4, 0.2],
            means: vec![vec![2.0, 2.0], vec![-3.0, -3.0], vec![-3.0, 4.0]],
            covariances: vec![
                Covariance::Identity,
                Covariance::Identity,
                Covariance::Dense(vec![vec![2.0, 1.0], vec![1.0, 2.0]]),
            ],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.d_relevant > self.d_total {
            return bad(format!(
                "d_relevant {} exceeds d_total {}",
                self.d_relevant, self.d_total
            ));
        }
        if self.weights.is_empty() {
            return bad("at least one component is required".into());
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("component weights must be non-negative".into());
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("component weights sum to {total}, expected 1"));
        }
        let k = self.weights.len();
        if self.means.len() != k || self.covariances.len() != k {
            return bad("one mean and one covariance per component required".into());
        }
        if self.means.iter().any(|m| m.len() != self.d_relevant) {
            return bad("each mean needs d_relevant entries".into());
        }
        for cov in &self.covariances {
            cholesky(cov, self.d_relevant)?;
        }
        Ok(())
    }
}

/// Lower-triangular factor of a component covariance.
fn cholesky(cov: &Covariance, d: usize) -> Result<Vec<Vec<f64>>> {
    let full: Vec<Vec<f64>> = match cov {
        Covariance::Identity => (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect(),
        Covariance::Diagonal(v) => {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            (0..d)
                .map(|i| (0..d).map(|j| if i == j { v[i] } else { 0.0 }).collect())
                .collect()
        }
        Covariance::Dense(m) => {
            if m.len() != d || m.iter().any(|r| r.len() != d) {
                return Err(Error::InvalidArgument(format!(
                    "dense covariance must be {d}x{d}"
                )));
            }
            m.clone()
        }
    };
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            if (full[i][j] - full[j][i]).abs() > 1e-12 {
                return Err(Error::InvalidArgument("covariance is not symmetric".into()));
            }
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = full[i][i] - s;
                if !(v > 0.0) {
                    return Err(Error::InvalidArgument(
                        "covariance is not positive definite".into(),
                    ));
                }
                l[i][i] = v.sqrt();
            } else {
                l[i][j] = (full[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Simulated data with its generating truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    #[serde(skip)]
    pub data: Array2<f64>,
    /// Zero-based generating component of each observation.
    pub true_z: Vec<usize>,
    pub true_gamma: Vec<bool>,
    pub spec: ScenarioSpec,
}

impl LabeledDataset {
    /// Rows as a dataset with ids `1..=n` and columns `v1..=vD`.
    pub fn to_dataset(&self) -> Dataset {
        Dataset {
            ids: (1..=self.data.nrows()).map(|i| i.to_string()).collect(),
            columns: (1..=self.data.ncols()).map(|d| format!("v{d}")).collect(),
            values: self.data.clone(),
        }
    }

    /// JSON sidecar carrying the truth and the generating spec.
    pub fn truth_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_parts(dataset: &Dataset, truth_json: &str) -> serde_json::Result<Self> {
        let mut out: Self = serde_json::from_str(truth_json)?;
        out.data = dataset.values.clone();
        Ok(out)
    }
}

/// Draw a dataset from `spec`; identical seeds give identical data.
pub fn simulate(spec: &ScenarioSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let factors = spec
        .covariances
        .iter()
        .map(|c| cholesky(c, spec.d_relevant))
        .collect::<Result<Vec<_>>>()?;
    let component = WeightedIndex::new(&spec.weights)
        .map_err(|e| Error::InvalidArgument(format!("component weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = Array2::zeros((spec.n, spec.d_total));
    let mut true_z = Vec::with_capacity(spec.n);
    let mut eps = vec![0.0; spec.d_relevant];
    for i in 0..spec.n {
        let k = component.sample(&mut rng);
        true_z.push(k);
        eps.iter_mut()
            .for_each(|e| *e = StandardNormal.sample(&mut rng));
        let l = &factors[k];
        for d in 0..spec.d_relevant {
            let shift: f64 = (0..=d).map(|j| l[d][j] * eps[j]).sum();
            data[[i, d]] = spec.means[k][d] + shift;
        }
        for d in spec.d_relevant..spec.d_total {
            data[[i, d]] = StandardNormal.sample(&mut rng);
        }
    }
    let true_gamma = (0..spec.d_total).map(|d| d < spec.d_relevant).collect();
    Ok(LabeledDataset {
        data,
        true_z,
        true_gamma,
        spec: spec.clone(),
    })
}

fn pairs(n: f64) -> f64 {
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same observations.
/// Returns 1 when both partitions are identical, including the degenerate
/// cases where the chance-corrected ratio is undefined.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let n = a.len();
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c as f64)).sum();
    let sum_rows: f64 = rows.values().map(|&c| pairs(c as f64)).sum();
    let sum_cols: f64 = cols.values().map(|&c| pairs(c as f64)).sum();
    let total = pairs(n as f64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_rows * sum_cols / total;
    let max = 0.5 * (sum_rows + sum_cols);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Fractions of truly relevant variables switched on and truly irrelevant
/// variables switched off. An empty class scores 1.
pub fn variable_recovery(gamma: &[bool], truth: &[bool]) -> Result<(f64, f64)> {
    if gamma.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: gamma.len(),
        });
    }
    let frac = |want: bool| {
        let (hit, total) = gamma
            .iter()
            .zip(truth)
            .filter(|(_, &t)| t == want)
            .fold((0usize, 0usize), |(h, t), (&g, _)| {
                (h + usize::from(g == want), t + 1)
            });
        if total == 0 {
            1.0
        } else {
            hit as f64 / total as f64
        }
    };
    Ok((frac(true), frac(false)))
}

/// Median with lower and upper quartiles (linear interpolation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some(Quartiles {
        lower: q(0.25),
        median: q(0.5),
        upper: q(0.75),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn high_dimensional_spec_shape() {
        let spec = ScenarioSpec::high_dimensional(100, 200, 0.5, 1);
        assert_eq!(spec.d_relevant, 100);
        let ds = simulate(&spec).unwrap();
        assert_eq!(ds.data.dim(), (100, 200));
        assert_eq!(ds.true_gamma.iter().filter(|&&g| g).count(), 100);
        assert!(ds.true_z.iter().all(|&z| z < 3));
    }

    #[test]
    fn correlated_component_spec_shape() {
        let spec = ScenarioSpec::correlated_component(3);
        let ds = simulate(&spec).unwrap();
        assert_eq!(ds.data.dim(), (30, 4));
        assert_eq!(ds.true_gamma, vec![true, true, false, false]);
    }

    #[test]
    fn single_component_weights() {
        let mut spec = ScenarioSpec::high_dimensional(50, 4, 0.5, 9);
        spec.weights = vec![1.0, 0.0, 0.0];
        let ds = simulate(&spec).unwrap();
        assert!(ds.true_z.iter().all(|&z| z == 0));
    }

    #[test]
    fn simulation_is_seeded() {
        let a = simulate(&ScenarioSpec::high_dimensional(20, 5, 0.4, 7)).unwrap();
        let b = simulate(&ScenarioSpec::high_dimensional(20, 5, 0.4, 7)).unwrap();
        let c = simulate(&ScenarioSpec::high_dimensional(20, 5, 0.4, 8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn spec_validation() {
        let mut spec = ScenarioSpec::high_dimensional(10, 4, 0.5, 0);
        spec.weights = vec![0.5, 0.3, 0.3];
        assert!(simulate(&spec).is_err());
        let mut spec = ScenarioSpec::correlated_component(0);
        spec.covariances[2] = Covariance::Dense(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(simulate(&spec).is_err());
        let mut spec = ScenarioSpec::high_dimensional(10, 4, 0.5, 0);
        spec.d_relevant = 5;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn correlated_draws_have_target_covariance() {
        let mut spec = ScenarioSpec::correlated_component(11);
        spec.n = 40_000;
        spec.weights = vec![0.0, 0.0, 1.0];
        let ds = simulate(&spec).unwrap();
        let n = ds.data.nrows() as f64;
        let (x, y) = (ds.data.column(0), ds.data.column(1));
        let (mx, my) = (x.sum() / n, y.sum() / n);
        let cxy = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>()
            / n;
        let cxx = x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>() / n;
        assert!((mx + 3.0).abs() < 0.05 && (my - 4.0).abs() < 0.05);
        assert!((cxx - 2.0).abs() < 0.1 && (cxy - 1.0).abs() < 0.1);
    }

    #[test]
    fn ari_reference_cases() {
        assert_eq!(
            adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 2, 2]).unwrap(),
            1.0
        );
        assert_eq!(adjusted_rand_index(&[0; 5], &[0, 1, 2, 3, 4]).unwrap(), 0.0);
        assert_eq!(adjusted_rand_index(&[0; 4], &[0; 4]).unwrap(), 1.0);
        assert!(adjusted_rand_index(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn recovery_cases() {
        let truth = [true, true, false, false, false];
        assert_eq!(variable_recovery(&truth, &truth).unwrap(), (1.0, 1.0));
        assert_eq!(variable_recovery(&[true; 5], &truth).unwrap(), (1.0, 0.0));
        let complement: Vec<bool> = truth.iter().map(|t| !t).collect();
        assert_eq!(variable_recovery(&complement, &truth).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn quartile_summary() {
        let q = quartiles(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((q.lower, q.median, q.upper), (2.0, 3.0, 4.0));
        assert!(quartiles(&[]).is_none());
    }

    #[test]
    fn truth_sidecar_roundtrip() {
        let ds = simulate(&ScenarioSpec::correlated_component(2)).unwrap();
        let json = ds.truth_json().unwrap();
        let back = LabeledDataset::from_parts(&ds.to_dataset(), &json).unwrap();
        assert_eq!(back, ds);
    }
}
