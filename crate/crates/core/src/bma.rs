//! Model averaging over a set of fitted partitions.
//!
//! Models inside Occam's window (within a Bayes-factor ratio of the best
//! model, uniform model prior) are weighted by their marginal likelihood. The
//! weighted co-clustering matrix is summarised into one partition with
//! average-linkage clustering on `1 - s`.

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::log_normalize;
use crate::scoring::{validate_partition, FittedModel};

/// Default Bayes-factor ratio bounding Occam's window.
pub const DEFAULT_WINDOW_K: f64 = 20.0;
/// Default dendrogram cut on the `1 - s` scale.
pub const DEFAULT_CUT_HEIGHT: f64 = 0.5;

/// Symmetric `n × n` matrix of same-cluster probabilities with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CoClusterMatrix(Array2<f64>);

impl CoClusterMatrix {
    pub fn new(s: Array2<f64>) -> Result<Self> {
        let (r, c) = s.dim();
        if r != c {
            return Err(Error::DimensionMismatch {
                expected: r,
                found: c,
            });
        }
        for i in 0..r {
            if s[[i, i]] != 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "diagonal entry {i} is not 1"
                )));
            }
            for j in 0..i {
                let v = s[[i, j]];
                if !(0.0..=1.0).contains(&v) || v != s[[j, i]] {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i}, {j}) must be symmetric and within [0, 1]"
                    )));
                }
            }
        }
        Ok(Self(s))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[[i, j]]
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    /// Dense CSV: a header of observation ids, then one row of values per
    /// observation.
    pub fn write_csv<W: Write>(&self, mut w: W, ids: &[String]) -> std::io::Result<()> {
        if ids.len() != self.n() {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                "one id per observation required",
            ));
        }
        writeln!(w, "{}", ids.join(","))?;
        for row in self.0.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Binary co-clustering matrix of one partition. Labels may be arbitrary.
pub fn coclustering(z: &[usize]) -> CoClusterMatrix {
    let n = z.len();
    CoClusterMatrix(Array2::from_shape_fn((n, n), |(i, j)| {
        if z[i] == z[j] {
            1.0
        } else {
            0.0
        }
    }))
}

/// Normalised log weights over the models retained in Occam's window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    /// Indices into the model list, in increasing order.
    pub window: Vec<usize>,
    /// One log weight per entry of `window`; they log-sum-exp to zero.
    pub log_weights: Vec<f64>,
}

impl ModelWeights {
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }
}

/// Indices of models whose posterior is within a factor `window_k` of the
/// best. Uniform model priors cancel, so only log-ML differences matter.
pub fn occams_window(log_mls: &[f64], window_k: f64) -> Result<Vec<usize>> {
    if log_mls.is_empty() {
        return Err(Error::EmptyModelSet);
    }
    if !(window_k >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "window ratio must be at least 1, got {window_k}"
        )));
    }
    let best = log_mls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Err(Error::InvalidArgument(
            "no finite log marginal likelihood".into(),
        ));
    }
    let log_k = window_k.ln();
    Ok(log_mls
        .iter()
        .enumerate()
        .filter(|(_, &l)| best - l <= log_k)
        .map(|(i, _)| i)
        .collect())
}

/// Occam's window plus renormalised posterior model weights.
pub fn model_weights(log_mls: &[f64], window_k: f64) -> Result<ModelWeights> {
    let window = occams_window(log_mls, window_k)?;
    let mut log_weights: Vec<f64> = window.iter().map(|&i| log_mls[i]).collect();
    log_normalize(&mut log_weights);
    Ok(ModelWeights {
        window,
        log_weights,
    })
}

fn check_weights(n_models: usize, weights: &ModelWeights) -> Result<()> {
    if weights.window.is_empty() {
        return Err(Error::EmptyModelSet);
    }
    if weights.window.len() != weights.log_weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.window.len(),
            found: weights.log_weights.len(),
        });
    }
    if let Some(&bad) = weights.window.iter().find(|&&i| i >= n_models) {
        return Err(Error::InvalidArgument(format!(
            "model index {bad} out of range"
        )));
    }
    Ok(())
}

/// Weighted average of the retained models' co-clustering matrices.
pub fn bma_coclustering(models: &[FittedModel], weights: &ModelWeights) -> Result<CoClusterMatrix> {
    check_weights(models.len(), weights)?;
    let n = models[weights.window[0]].z.len();
    let mut s = Array2::<f64>::zeros((n, n));
    for (&m, w) in weights.window.iter().zip(weights.weights()) {
        let z = &models[m].z;
        if z.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: z.len(),
            });
        }
        for i in 0..n {
            for j in 0..i {
                if z[i] == z[j] {
                    s[[i, j]] += w;
                }
            }
        }
    }
    for i in 0..n {
        s[[i, i]] = 1.0;
        for j in 0..i {
            let v = s[[i, j]].clamp(0.0, 1.0);
            s[[i, j]] = v;
            s[[j, i]] = v;
        }
    }
    Ok(CoClusterMatrix(s))
}

/// Per-variable averaged relevance, in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableScore(pub Vec<f64>);

/// Weighted average of the retained models' switch vectors.
pub fn bma_variable_scores(
    models: &[FittedModel],
    weights: &ModelWeights,
) -> Result<VariableScore> {
    check_weights(models.len(), weights)?;
    let d = models[weights.window[0]].gamma.len();
    let mut f = vec![0.0; d];
    for (&m, w) in weights.window.iter().zip(weights.weights()) {
        let gamma = &models[m].gamma;
        if gamma.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: gamma.len(),
            });
        }
        for (acc, &on) in f.iter_mut().zip(gamma) {
            if on {
                *acc += w;
            }
        }
    }
    f.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(VariableScore(f))
}

/// Average-linkage agglomerative clustering on `1 - s`, stopping before any
/// merge above `cut_height`. Among equally distant pairs the one whose
/// smallest members come first lexicographically merges first. Returns
/// compact labels ordered by first appearance.
pub fn summarize(s: &CoClusterMatrix, cut_height: f64) -> Vec<usize> {
    let n = s.n();
    // cluster identity = index of its smallest member; `alive[c]` marks live ones
    let mut dist = Array2::from_shape_fn((n, n), |(i, j)| 1.0 - s.get(i, j));
    let mut size = vec![1usize; n];
    let mut alive = vec![true; n];
    let mut parent: Vec<usize> = (0..n).collect();

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..n {
            if !alive[a] {
                continue;
            }
            for b in (a + 1)..n {
                if !alive[b] {
                    continue;
                }
                let d = dist[[a, b]];
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let Some((d, a, b)) = best else { break };
        if d > cut_height {
            break;
        }
        // merge b into a (a < b, so a stays the smallest member)
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for c in 0..n {
            if alive[c] && c != a && c != b {
                let v = (na * dist[[a, c]] + nb * dist[[b, c]]) / (na + nb);
                dist[[a, c]] = v;
                dist[[c, a]] = v;
            }
        }
        size[a] += size[b];
        alive[b] = false;
        parent[b] = a;
    }

    let root = |mut i: usize| {
        while parent[i] != i {
            i = parent[i];
        }
        i
    };
    let roots: Vec<usize> = (0..n).map(root).collect();
    crate::scoring::compact_labels(&roots)
}

/// Window, weights, averaged co-clustering and variable scores in one go.
#[derive(Debug, Clone, PartialEq)]
pub struct BmaSummary {
    pub weights: ModelWeights,
    pub coclustering: CoClusterMatrix,
    pub variable_scores: VariableScore,
    pub partition: Vec<usize>,
}

pub fn average_models(
    models: &[FittedModel],
    window_k: f64,
    cut_height: f64,
) -> Result<BmaSummary> {
    let log_mls: Vec<f64> = models.iter().map(|m| m.log_ml).collect();
    let weights = model_weights(&log_mls, window_k)?;
    for &m in &weights.window {
        validate_partition(&models[m].z, models[m].z.len())?;
    }
    let coclustering = bma_coclustering(models, &weights)?;
    let variable_scores = bma_variable_scores(models, &weights)?;
    let partition = summarize(&coclustering, cut_height);
    Ok(BmaSummary {
        weights,
        coclustering,
        variable_scores,
        partition,
    })
}
