use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sugsvarsel::data::{self, Dataset};
use sugsvarsel::varsel::SearchFailure;
use sugsvarsel::{
    adjusted_rand_index, average_models, full_search, select_best, simulate, variable_recovery,
    LabeledDataset, Provenance, ScenarioSpec,
};

use crate::config::{sha256_hex, RunConfig};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const ASSIGNMENTS: &str = "assignments.csv";
pub const COCLUSTERING: &str = "coclustering.csv";
pub const VARIABLE_SCORES: &str = "variable_scores.csv";
pub const MODELS: &str = "models.json";
pub const RUN_META: &str = "run_meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub rank: usize,
    /// One-based cluster labels in data order.
    pub clusters: Vec<usize>,
    pub n_clusters: usize,
    pub gamma: Vec<u8>,
    pub log_ml: f64,
    pub log_pml: Option<f64>,
    /// BMA weight; zero outside Occam's window.
    pub weight: f64,
    pub degenerate_gamma: bool,
    pub provenance: Provenance,
}

/// Contents of `models.json`. Holds nothing that varies between identical
/// runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelsFile {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub data_sha256: String,
    pub n_observations: usize,
    pub n_variables: usize,
    pub variables: Vec<String>,
    pub criterion: sugsvarsel::Criterion,
    /// Rank of the best model under the criterion.
    pub best_rank: usize,
    pub window_size: usize,
    pub models: Vec<ModelRecord>,
    pub failures: Vec<SearchFailure>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    pub subsamples: usize,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub n_models: usize,
    pub n_failures: usize,
}

/// What a successful `cluster` run produced.
#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub partition: Vec<usize>,
    pub best: Vec<usize>,
    pub n_models: usize,
    pub output: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(
        File::create(path).map_err(CliError::io(path))?,
    ))
}

fn provenance_line(seed: u64, hash: &str) -> String {
    format!("# sugsvarsel {VERSION} seed={seed} config_hash={hash}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_json_with(path, value, true)
}

fn write_json_with<T: Serialize>(path: &Path, value: &T, pretty: bool) -> Result<(), CliError> {
    let mut w = create(path)?;
    if pretty {
        serde_json::to_writer_pretty(&mut w, value)
    } else {
        serde_json::to_writer(&mut w, value)
    }
    .map_err(|e| CliError::io(path)(std::io::Error::other(e)))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(CliError::io(path))
}

pub fn read_dataset(path: &Path, id_column: Option<&str>) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    data::read_csv(file, id_column).map_err(|source| CliError::Data {
        path: path.to_owned(),
        source,
    })
}

/// Search, average and export. Writes every artifact into `config.output`.
pub fn cmd_cluster(config: &RunConfig) -> Result<ClusterOutcome, CliError> {
    let start = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    config.validate()?;
    let raw = fs::read(&config.input).map_err(CliError::io(&config.input))?;
    let mut dataset =
        data::read_csv(raw.as_slice(), config.id_column.as_deref()).map_err(|source| {
            CliError::Data {
                path: config.input.clone(),
                source,
            }
        })?;
    if config.standardize {
        data::standardize(&mut dataset.values);
    }
    let values = dataset.values.view();
    let (n, d) = values.dim();
    let hyper = config.hyperparameters(values)?;
    let grid = config.beta_grid()?;
    let search = config.search_config(d);
    search.validate(d)?;

    let set = full_search(values, &search, &hyper, &grid)?;
    if set.models.is_empty() {
        let first = set
            .failures
            .first()
            .map_or("no models", |f| f.message.as_str());
        return Err(CliError::Numerical(format!(
            "all {} models failed; first error: {first}",
            set.failures.len()
        )));
    }
    let summary = average_models(&set.models, config.window_k, config.cut_height)?;
    let best = select_best(&set.models, config.criterion)?;
    let best_rank = set
        .models
        .iter()
        .position(|m| std::ptr::eq(m, best))
        .expect("best model comes from the set");

    let hash = config.hash();
    let header = provenance_line(config.seed, &hash);
    fs::create_dir_all(&config.output).map_err(CliError::io(&config.output))?;
    let out = |name: &str| config.output.join(name);

    let path = out(ASSIGNMENTS);
    let mut w = create(&path)?;
    (|| -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        writeln!(w, "id,cluster,cluster_best")?;
        for ((id, a), b) in dataset.ids.iter().zip(&summary.partition).zip(&best.z) {
            writeln!(w, "{},{},{}", csv_field(id), a + 1, b + 1)?;
        }
        w.flush()
    })()
    .map_err(CliError::io(&path))?;

    let path = out(COCLUSTERING);
    let mut w = create(&path)?;
    let quoted: Vec<String> = dataset.ids.iter().map(|s| csv_field(s)).collect();
    writeln!(w, "{header}")
        .and_then(|_| summary.coclustering.write_csv(&mut w, &quoted))
        .and_then(|_| w.flush())
        .map_err(CliError::io(&path))?;

    let path = out(VARIABLE_SCORES);
    let mut w = create(&path)?;
    (|| -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        writeln!(w, "variable,gamma_best,f_bma")?;
        for ((name, g), f) in dataset
            .columns
            .iter()
            .zip(&best.gamma)
            .zip(&summary.variable_scores.0)
        {
            writeln!(w, "{},{},{f}", csv_field(name), u8::from(*g))?;
        }
        w.flush()
    })()
    .map_err(CliError::io(&path))?;

    let mut weights = vec![0.0; set.models.len()];
    for (&m, w) in summary.weights.window.iter().zip(summary.weights.weights()) {
        weights[m] = w;
    }
    let models = ModelsFile {
        version: VERSION.into(),
        seed: config.seed,
        config_hash: hash.clone(),
        data_sha256: sha256_hex(&raw),
        n_observations: n,
        n_variables: d,
        variables: dataset.columns.clone(),
        criterion: config.criterion,
        best_rank,
        window_size: summary.weights.window.len(),
        models: set
            .models
            .iter()
            .enumerate()
            .map(|(rank, m)| ModelRecord {
                rank,
                clusters: m.z.iter().map(|k| k + 1).collect(),
                n_clusters: m.n_clusters(),
                gamma: m.gamma.iter().map(|&g| u8::from(g)).collect(),
                log_ml: m.log_ml,
                log_pml: m.log_pml,
                weight: weights[rank],
                degenerate_gamma: m.degenerate_gamma,
                provenance: m.provenance,
            })
            .collect(),
        failures: set.failures.clone(),
    };
    write_json_with(&out(MODELS), &models, false)?;

    let meta = RunMeta {
        version: VERSION.into(),
        seed: config.seed,
        config_hash: hash,
        config: config.clone(),
        subsamples: search.subsamples,
        started_unix,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        n_models: set.models.len(),
        n_failures: set.failures.len(),
    };
    write_json(&out(RUN_META), &meta)?;

    Ok(ClusterOutcome {
        partition: summary.partition,
        best: best.z.clone(),
        n_models: set.models.len(),
        output: config.output.clone(),
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) || s.starts_with('#') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Write `data.csv` and `truth.json` for `spec` into `dir`.
pub fn cmd_simulate(spec: &ScenarioSpec, dir: &Path) -> Result<LabeledDataset, CliError> {
    let sim = simulate(spec)?;
    let spec_json = serde_json::to_string(spec).expect("spec serialises");
    let hash = sha256_hex(spec_json.as_bytes());
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;

    let path = dir.join("data.csv");
    let mut buf = provenance_line(spec.seed, &hash).into_bytes();
    buf.push(b'\n');
    data::write_csv(&mut buf, &sim.to_dataset()).map_err(|e| CliError::Input(e.to_string()))?;
    fs::write(&path, buf).map_err(CliError::io(&path))?;

    let mut truth = serde_json::to_value(&sim).expect("truth serialises");
    truth["seed"] = spec.seed.into();
    truth["config_hash"] = hash.into();
    write_json(&dir.join("truth.json"), &truth)?;
    Ok(sim)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub relevant: f64,
    pub irrelevant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub seed: u64,
    pub config_hash: String,
    pub ari_bma: f64,
    pub ari_best: f64,
    pub n_clusters_bma: usize,
    pub n_clusters_best: usize,
    pub n_clusters_true: usize,
    /// Switches of the best model.
    pub recovery_best: Recovery,
    /// Variables with BMA score at least 0.5.
    pub recovery_bma: Recovery,
    pub wall_clock_seconds: Option<f64>,
}

fn parse_u(s: &str, what: &str, row: usize) -> Result<usize, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Input(format!("{what}, row {row}: cannot parse {s:?}")))
}

fn read_rows(path: &Path, columns: usize) -> Result<Vec<Vec<String>>, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut rows = Vec::new();
    for (i, line) in text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .enumerate()
    {
        let cells: Vec<String> = line.rsplitn(columns, ',').map(str::to_owned).collect();
        if cells.len() != columns {
            return Err(CliError::Input(format!(
                "{}, row {}: expected {columns} fields",
                path.display(),
                i + 1
            )));
        }
        rows.push(cells.into_iter().rev().collect());
    }
    Ok(rows)
}

/// Score a finished run against simulation truth.
pub fn cmd_evaluate(run_dir: &Path, truth_path: &Path) -> Result<Metrics, CliError> {
    let truth_text = fs::read_to_string(truth_path).map_err(CliError::io(truth_path))?;
    let truth: LabeledDataset = serde_json::from_str(&truth_text)
        .map_err(|e| CliError::Input(format!("{}: {e}", truth_path.display())))?;

    let path = run_dir.join(ASSIGNMENTS);
    let rows = read_rows(&path, 3)?;
    let (mut bma, mut best) = (Vec::new(), Vec::new());
    for (i, r) in rows.iter().enumerate() {
        bma.push(parse_u(&r[1], ASSIGNMENTS, i + 1)?);
        best.push(parse_u(&r[2], ASSIGNMENTS, i + 1)?);
    }
    let path = run_dir.join(VARIABLE_SCORES);
    let rows = read_rows(&path, 3)?;
    let mut gamma_best = Vec::new();
    let mut gamma_bma = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        gamma_best.push(parse_u(&r[1], VARIABLE_SCORES, i + 1)? == 1);
        let f: f64 = r[2]
            .parse()
            .map_err(|_| CliError::Input(format!("{VARIABLE_SCORES}, row {}: bad score", i + 1)))?;
        gamma_bma.push(f >= 0.5);
    }

    let meta: Option<RunMeta> = fs::read_to_string(run_dir.join(RUN_META))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    let models: ModelsFile = {
        let path = run_dir.join(MODELS);
        let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
    };
    let count = |z: &[usize]| {
        let mut labels = z.to_vec();
        labels.sort_unstable();
        labels.dedup();
        labels.len()
    };
    let recovery = |g: &[bool]| -> Result<Recovery, CliError> {
        let (relevant, irrelevant) = variable_recovery(g, &truth.true_gamma)?;
        Ok(Recovery {
            relevant,
            irrelevant,
        })
    };
    Ok(Metrics {
        seed: models.seed,
        config_hash: models.config_hash,
        ari_bma: adjusted_rand_index(&bma, &truth.true_z)?,
        ari_best: adjusted_rand_index(&best, &truth.true_z)?,
        n_clusters_bma: count(&bma),
        n_clusters_best: count(&best),
        n_clusters_true: count(&truth.true_z),
        recovery_best: recovery(&gamma_best)?,
        recovery_bma: recovery(&gamma_bma)?,
        wall_clock_seconds: meta.map(|m| m.wall_clock_seconds),
    })
}

pub fn write_metrics(metrics: &Metrics, path: &Path) -> Result<(), CliError> {
    write_json(path, metrics)
}
