//! Declarative experiment sweeps: a TOML configuration names datasets,
//! methods with hyperparameter grids, tasks, and seeds; the runner expands
//! the cross product into content-addressed run descriptors, executes them
//! resumably, and appends scored rows to a results CSV.
//!
//! Resume contract: a run's rows are flushed to `results.csv` before its id
//! is appended to `completed.log`, so a crash can at worst duplicate rows
//! for one run (deduplicated at report time), never lose a completed id.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write as IoWrite};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embedding::EmbeddingMatrix;
use crate::eval::{
    edge_split, link_prediction_auc, property_task, ForestGrid, SplitKind, SplitSpec, Task,
};
use crate::generate::GeneratorSpec;
use crate::gnn::{train_unsupervised, Arch, GnnConfig};
use crate::graph::{load_edge_list, Graph};
use crate::metrics::{compute_properties, PropertyTable};
use crate::rng::derive_seed;
use crate::skipgram::{train_skipgram, SkipGramConfig, TrainMode};
use crate::walks::{biased_walks, uniform_walks, WalkParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("could not parse experiment config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("dataset '{name}': {message}")]
    Dataset { name: String, message: String },
}

/// Walk/epoch settings shared by every run of a sweep (the paper's
/// outer-loop values, frozen before the hyperparameter grid is explored).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkSettings {
    pub num_walks: usize,
    pub walk_length: usize,
    pub epochs: usize,
}

impl Default for WalkSettings {
    fn default() -> Self {
        WalkSettings {
            num_walks: 10,
            walk_length: 40,
            epochs: 5,
        }
    }
}

/// Search lists for the optional pre-search phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkGrid {
    pub num_walks: Vec<usize>,
    pub walk_length: Vec<usize>,
    pub epochs: Vec<usize>,
}

impl Default for WalkGrid {
    fn default() -> Self {
        WalkGrid {
            num_walks: vec![5, 8, 10, 32, 64],
            walk_length: vec![5, 25, 40, 80],
            epochs: vec![1, 2, 3, 4, 5, 8, 10],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    File { path: PathBuf },
    Generated(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    #[serde(flatten)]
    pub source: DatasetSource,
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Graph, SweepError> {
        match &self.source {
            DatasetSource::File { path } => {
                let (g, _report) = load_edge_list(path, None).map_err(|e| SweepError::Dataset {
                    name: self.name.clone(),
                    message: e.to_string(),
                })?;
                Ok(g)
            }
            DatasetSource::Generated(spec) => spec.generate().map_err(|e| SweepError::Dataset {
                name: self.name.clone(),
                message: e.to_string(),
            }),
        }
    }

    /// Stable JSON describing where the graph came from, recorded per row.
    pub fn params_json(&self) -> String {
        match &self.source {
            DatasetSource::File { path } => {
                format!("{{\"path\":{}}}", serde_json::to_string(path).unwrap())
            }
            DatasetSource::Generated(spec) => serde_json::to_string(spec).unwrap(),
        }
    }

    pub fn family(&self) -> String {
        match &self.source {
            DatasetSource::File { .. } => "file".to_string(),
            DatasetSource::Generated(spec) => spec.family.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Deepwalk,
    Node2vec,
    Gcn,
    SageMean,
    SageMaxpool,
    Gat,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Deepwalk => "deepwalk",
            Method::Node2vec => "node2vec",
            Method::Gcn => "gcn",
            Method::SageMean => "sage-mean",
            Method::SageMaxpool => "sage-maxpool",
            Method::Gat => "gat",
        }
    }

    pub fn is_shallow(self) -> bool {
        matches!(self, Method::Deepwalk | Method::Node2vec)
    }

    pub fn arch(self) -> Option<Arch> {
        match self {
            Method::Gcn => Some(Arch::Gcn),
            Method::SageMean => Some(Arch::SageMean),
            Method::SageMaxpool => Some(Arch::SageMaxpool),
            Method::Gat => Some(Arch::Gat),
            _ => None,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Method, String> {
        match s {
            "deepwalk" => Ok(Method::Deepwalk),
            "node2vec" => Ok(Method::Node2vec),
            "gcn" => Ok(Method::Gcn),
            "sage-mean" => Ok(Method::SageMean),
            "sage-maxpool" => Ok(Method::SageMaxpool),
            "gat" => Ok(Method::Gat),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

/// One method entry in the config; unset lists fall back to the documented
/// default grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns_exponent: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample_freq: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_degree: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s1: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s2: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heads: Option<Vec<usize>>,
}

impl MethodSpec {
    pub fn bare(name: Method) -> MethodSpec {
        MethodSpec {
            name,
            dim: None,
            ns_exponent: None,
            subsample_freq: None,
            p: None,
            q: None,
            max_degree: None,
            s1: None,
            s2: None,
            heads: None,
        }
    }
}

const DEFAULT_DIMS: &[usize] = &[32, 64, 128, 256];
const DEFAULT_NS_EXPONENTS: &[f64] = &[-0.75, 0.0, 0.75];
const DEFAULT_SUBSAMPLE_FREQS: &[f64] = &[0.0001, 0.001, 0.01];
const DEFAULT_P: &[f64] = &[1.0, 2.0];
const DEFAULT_Q: &[f64] = &[0.5, 1.0, 2.0];
const DEFAULT_MAX_DEGREE: &[usize] = &[50, 100, 200];
const DEFAULT_S1: &[usize] = &[25, 50, 100];
const DEFAULT_S2: &[usize] = &[10, 20, 40];
const DEFAULT_HEADS: &[usize] = &[4, 16, 32];

fn default_tasks() -> Vec<Task> {
    let mut tasks = vec![Task::LinkPrediction];
    tasks.extend(Task::PROPERTY_TASKS);
    tasks
}

fn default_train_fraction() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    #[serde(default = "default_tasks")]
    pub tasks: Vec<Task>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub walk: WalkSettings,
    /// Grid searched by the optional walk pre-search phase; runs themselves
    /// use the fixed `walk` settings (or the pre-search winner).
    #[serde(default)]
    pub walk_grid: WalkGrid,
    #[serde(default)]
    pub forest: ForestGrid,
    #[serde(rename = "dataset")]
    pub datasets: Vec<DatasetSpec>,
    #[serde(rename = "method")]
    pub methods: Vec<MethodSpec>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig, SweepError> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<ExperimentConfig, SweepError> {
        ExperimentConfig::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let fail = |m: String| Err(SweepError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "unsupported schema_version {} (this build understands {})",
                self.schema_version, SCHEMA_VERSION
            ));
        }
        if self.seeds.is_empty() {
            return fail("seeds list is empty".into());
        }
        if self.tasks.is_empty() {
            return fail("tasks list is empty".into());
        }
        if self.datasets.is_empty() {
            return fail("no datasets declared".into());
        }
        if self.methods.is_empty() {
            return fail("no methods declared".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            ));
        }
        let mut names = HashSet::new();
        for d in &self.datasets {
            if !names.insert(&d.name) {
                return fail(format!("duplicate dataset name '{}'", d.name));
            }
        }
        if self.forest.n_trees.is_empty() || self.forest.max_depths.is_empty() {
            return fail("empty forest grid dimension".into());
        }
        if self.walk.num_walks == 0 || self.walk.walk_length == 0 || self.walk.epochs == 0 {
            return fail("walk settings must be positive".into());
        }
        for m in &self.methods {
            m.grid_points().map(|_| ())?;
        }
        Ok(())
    }
}

/// One fully-specified hyperparameter point.
#[derive(Debug, Clone, PartialEq)]
pub enum RunPoint {
    Deepwalk {
        dim: usize,
        ns_exponent: f64,
        subsample_freq: f64,
    },
    Node2vec {
        dim: usize,
        p: f64,
        q: f64,
    },
    Gcn {
        dim: usize,
        max_degree: usize,
    },
    Sage {
        arch: Arch,
        dim: usize,
        max_degree: usize,
        s1: usize,
        s2: usize,
    },
    Gat {
        dim: usize,
        heads: usize,
    },
}

impl RunPoint {
    /// Deterministic JSON with a fixed key order, used both in result rows
    /// and in the run-id hash.
    pub fn json(&self) -> String {
        match self {
            RunPoint::Deepwalk {
                dim,
                ns_exponent,
                subsample_freq,
            } => format!(
                "{{\"dim\":{dim},\"ns_exponent\":{ns_exponent},\"subsample_freq\":{subsample_freq}}}"
            ),
            RunPoint::Node2vec { dim, p, q } => {
                format!("{{\"dim\":{dim},\"p\":{p},\"q\":{q}}}")
            }
            RunPoint::Gcn { dim, max_degree } => {
                format!("{{\"dim\":{dim},\"max_degree\":{max_degree}}}")
            }
            RunPoint::Sage {
                dim,
                max_degree,
                s1,
                s2,
                ..
            } => format!(
                "{{\"dim\":{dim},\"max_degree\":{max_degree},\"s1\":{s1},\"s2\":{s2}}}"
            ),
            RunPoint::Gat { dim, heads } => {
                format!("{{\"dim\":{dim},\"heads\":{heads}}}")
            }
        }
    }
}

impl MethodSpec {
    fn check_nonempty<T>(&self, label: &str, values: &[T]) -> Result<(), SweepError> {
        if values.is_empty() {
            Err(SweepError::Config(format!(
                "method '{}': empty grid dimension '{label}'",
                self.name.name()
            )))
        } else {
            Ok(())
        }
    }

    /// Expand this method's grid in deterministic order (dims outermost,
    /// then the method-specific dimensions in their documented order).
    pub fn grid_points(&self) -> Result<Vec<RunPoint>, SweepError> {
        let dims = self.dim.clone().unwrap_or_else(|| DEFAULT_DIMS.to_vec());
        self.check_nonempty("dim", &dims)?;
        if dims.iter().any(|&d| d == 0) {
            return Err(SweepError::Config(format!(
                "method '{}': dim values must be positive",
                self.name.name()
            )));
        }
        let mut points = Vec::new();
        match self.name {
            Method::Deepwalk => {
                let ns = self
                    .ns_exponent
                    .clone()
                    .unwrap_or_else(|| DEFAULT_NS_EXPONENTS.to_vec());
                let sf = self
                    .subsample_freq
                    .clone()
                    .unwrap_or_else(|| DEFAULT_SUBSAMPLE_FREQS.to_vec());
                self.check_nonempty("ns_exponent", &ns)?;
                self.check_nonempty("subsample_freq", &sf)?;
                if ns.iter().any(|e| !(-1.0..=1.0).contains(e)) {
                    return Err(SweepError::Config(
                        "deepwalk: ns_exponent outside [-1, 1]".into(),
                    ));
                }
                if sf.iter().any(|&f| !(0.0..1.0).contains(&f)) {
                    return Err(SweepError::Config(
                        "deepwalk: subsample_freq outside [0, 1)".into(),
                    ));
                }
                for &dim in &dims {
                    for &e in &ns {
                        for &f in &sf {
                            points.push(RunPoint::Deepwalk {
                                dim,
                                ns_exponent: e,
                                subsample_freq: f,
                            });
                        }
                    }
                }
            }
            Method::Node2vec => {
                let ps = self.p.clone().unwrap_or_else(|| DEFAULT_P.to_vec());
                let qs = self.q.clone().unwrap_or_else(|| DEFAULT_Q.to_vec());
                self.check_nonempty("p", &ps)?;
                self.check_nonempty("q", &qs)?;
                if ps.iter().chain(qs.iter()).any(|&v| v <= 0.0) {
                    return Err(SweepError::Config(
                        "node2vec: p and q must be positive".into(),
                    ));
                }
                for &dim in &dims {
                    for &p in &ps {
                        for &q in &qs {
                            points.push(RunPoint::Node2vec { dim, p, q });
                        }
                    }
                }
            }
            Method::Gcn => {
                let md = self
                    .max_degree
                    .clone()
                    .unwrap_or_else(|| DEFAULT_MAX_DEGREE.to_vec());
                self.check_nonempty("max_degree", &md)?;
                if md.iter().any(|&v| v == 0) {
                    return Err(SweepError::Config("gcn: max_degree must be positive".into()));
                }
                for &dim in &dims {
                    for &max_degree in &md {
                        points.push(RunPoint::Gcn { dim, max_degree });
                    }
                }
            }
            Method::SageMean | Method::SageMaxpool => {
                let md = self
                    .max_degree
                    .clone()
                    .unwrap_or_else(|| DEFAULT_MAX_DEGREE.to_vec());
                let s1 = self.s1.clone().unwrap_or_else(|| DEFAULT_S1.to_vec());
                let s2 = self.s2.clone().unwrap_or_else(|| DEFAULT_S2.to_vec());
                self.check_nonempty("max_degree", &md)?;
                self.check_nonempty("s1", &s1)?;
                self.check_nonempty("s2", &s2)?;
                if md.iter().chain(s1.iter()).chain(s2.iter()).any(|&v| v == 0) {
                    return Err(SweepError::Config(format!(
                        "{}: max_degree, s1, s2 must be positive",
                        self.name.name()
                    )));
                }
                let arch = self.name.arch().unwrap();
                for &dim in &dims {
                    for &max_degree in &md {
                        for &a in &s1 {
                            for &b in &s2 {
                                points.push(RunPoint::Sage {
                                    arch,
                                    dim,
                                    max_degree,
                                    s1: a,
                                    s2: b,
                                });
                            }
                        }
                    }
                }
            }
            Method::Gat => {
                let heads = self.heads.clone().unwrap_or_else(|| DEFAULT_HEADS.to_vec());
                self.check_nonempty("heads", &heads)?;
                if heads.iter().any(|&h| h == 0 || 128 % h != 0) {
                    return Err(SweepError::Config(
                        "gat: attention heads must divide the hidden width 128".into(),
                    ));
                }
                for &dim in &dims {
                    for &h in &heads {
                        points.push(RunPoint::Gat { dim, heads: h });
                    }
                }
            }
        }
        Ok(points)
    }
}

/// One executable unit of the sweep cross product.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDescriptor {
    pub run_id: String,
    pub dataset: String,
    pub generator_params: String,
    pub method: Method,
    pub point: RunPoint,
    pub walk: WalkSettings,
    pub seed: u64,
}

fn run_id(
    dataset: &DatasetSpec,
    method: Method,
    point: &RunPoint,
    walk: &WalkSettings,
    seed: u64,
    tasks: &[Task],
    train_fraction: f64,
) -> String {
    let task_names: Vec<&str> = tasks.iter().map(|t| t.name()).collect();
    let canonical = format!(
        "v{}|{}|{}|{}|{}|walks={},len={},epochs={}|seed={}|tasks={}|frac={}",
        SCHEMA_VERSION,
        dataset.name,
        dataset.params_json(),
        method.name(),
        point.json(),
        walk.num_walks,
        walk.walk_length,
        walk.epochs,
        seed,
        task_names.join(","),
        train_fraction,
    );
    let digest = Sha256::digest(canonical.as_bytes());
    let mut id = String::with_capacity(16);
    for byte in &digest[..8] {
        id.push_str(&format!("{byte:02x}"));
    }
    id
}

/// Per-(dataset name, method name) walk-setting replacements, produced by the
/// walk pre-search phase; pairs not present fall back to the config's walk
/// settings.
pub type WalkOverrides = HashMap<(String, String), WalkSettings>;

/// Expand the full dataset × method × grid × seed cross product in
/// deterministic order, each run tagged with a content-hash id.
pub fn enumerate_sweep(config: &ExperimentConfig) -> Result<Vec<RunDescriptor>, SweepError> {
    enumerate_sweep_with(config, &WalkOverrides::new())
}

/// Like [`enumerate_sweep`] but with per-(dataset, method) walk settings.
/// Overridden settings participate in the content hash, so pre-searched and
/// plain sweeps never share run ids unless the settings coincide.
pub fn enumerate_sweep_with(
    config: &ExperimentConfig,
    overrides: &WalkOverrides,
) -> Result<Vec<RunDescriptor>, SweepError> {
    config.validate()?;
    let mut runs = Vec::new();
    for dataset in &config.datasets {
        for method in &config.methods {
            let walk = overrides
                .get(&(dataset.name.clone(), method.name.name().to_string()))
                .copied()
                .unwrap_or(config.walk);
            for point in method.grid_points()? {
                for &seed in &config.seeds {
                    runs.push(RunDescriptor {
                        run_id: run_id(
                            dataset,
                            method.name,
                            &point,
                            &walk,
                            seed,
                            &config.tasks,
                            config.train_fraction,
                        ),
                        dataset: dataset.name.clone(),
                        generator_params: dataset.params_json(),
                        method: method.name,
                        point: point.clone(),
                        walk,
                        seed,
                    });
                }
            }
        }
    }
    Ok(runs)
}

/// One scored row of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub generator_params: String,
    pub method: String,
    pub hyperparam_json: String,
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
    pub wallclock_s: f64,
}

/// Train the configured method on the (edge-split) train graph.
pub fn embed_for_run(
    train: &Graph,
    point: &RunPoint,
    walk: &WalkSettings,
    seed: u64,
) -> Result<EmbeddingMatrix, String> {
    let walk_seed = derive_seed(seed, 11);
    let train_seed = derive_seed(seed, 12);
    match point {
        RunPoint::Deepwalk {
            dim,
            ns_exponent,
            subsample_freq,
        } => {
            let corpus = uniform_walks(train, &WalkParams::uniform(walk.num_walks, walk.walk_length, walk_seed));
            let cfg = SkipGramConfig {
                dim: *dim,
                ns_exponent: *ns_exponent,
                subsample_freq: *subsample_freq,
                epochs: walk.epochs,
                seed: train_seed,
                mode: TrainMode::Deterministic,
                ..SkipGramConfig::default()
            };
            train_skipgram(train, &corpus, &cfg)
                .map(|(emb, _)| emb)
                .map_err(|e| e.to_string())
        }
        RunPoint::Node2vec { dim, p, q } => {
            let params = WalkParams {
                num_walks: walk.num_walks,
                walk_length: walk.walk_length,
                p_return: *p,
                q_inout: *q,
                seed: walk_seed,
            };
            let corpus = biased_walks(train, &params).map_err(|e| e.to_string())?;
            let cfg = SkipGramConfig {
                dim: *dim,
                epochs: walk.epochs,
                seed: train_seed,
                mode: TrainMode::Deterministic,
                ..SkipGramConfig::default()
            };
            train_skipgram(train, &corpus, &cfg)
                .map(|(emb, _)| emb)
                .map_err(|e| e.to_string())
        }
        RunPoint::Gcn { dim, max_degree } => {
            let cfg = GnnConfig {
                arch: Arch::Gcn,
                dim: *dim,
                max_degree: *max_degree,
                epochs: walk.epochs,
                seed: train_seed,
                ..GnnConfig::default()
            };
            train_unsupervised(train, &cfg)
                .map(|(emb, _)| emb)
                .map_err(|e| e.to_string())
        }
        RunPoint::Sage {
            arch,
            dim,
            max_degree,
            s1,
            s2,
        } => {
            let cfg = GnnConfig {
                arch: *arch,
                dim: *dim,
                max_degree: *max_degree,
                sample_sizes: (*s1, *s2),
                epochs: walk.epochs,
                seed: train_seed,
                ..GnnConfig::default()
            };
            train_unsupervised(train, &cfg)
                .map(|(emb, _)| emb)
                .map_err(|e| e.to_string())
        }
        RunPoint::Gat { dim, heads } => {
            let cfg = GnnConfig {
                arch: Arch::Gat,
                dim: *dim,
                attention_heads: *heads,
                epochs: walk.epochs,
                seed: train_seed,
                ..GnnConfig::default()
            };
            train_unsupervised(train, &cfg)
                .map(|(emb, _)| emb)
                .map_err(|e| e.to_string())
        }
    }
}

/// Execute one run: edge-split the graph, train embeddings on the remainder,
/// then score every requested task. Task-level failures are reported next to
/// the rows that did succeed.
pub fn execute_run(
    g: &Graph,
    table: &PropertyTable,
    desc: &RunDescriptor,
    tasks: &[Task],
    train_fraction: f64,
    forest_grid: &ForestGrid,
) -> (Vec<ResultRow>, Vec<String>) {
    let started = Instant::now();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let spec = SplitSpec {
        kind: SplitKind::Edge,
        train_fraction,
        seed: desc.seed,
    };
    let split = match edge_split(g, &spec) {
        Ok(s) => s,
        Err(e) => {
            errors.push(format!("edge_split: {e}"));
            return (rows, errors);
        }
    };
    let emb = match embed_for_run(&split.train, &desc.point, &desc.walk, desc.seed) {
        Ok(emb) => emb,
        Err(e) => {
            errors.push(format!("embed: {e}"));
            return (rows, errors);
        }
    };
    let mut push = |task: Task, metric: &str, value: f64| {
        rows.push(ResultRow {
            dataset: desc.dataset.clone(),
            generator_params: desc.generator_params.clone(),
            method: desc.method.name().to_string(),
            hyperparam_json: desc.point.json(),
            task: task.name().to_string(),
            metric: metric.to_string(),
            value,
            seed: desc.seed,
            wallclock_s: 0.0, // patched after all tasks finish
        });
    };
    for &task in tasks {
        match task {
            Task::LinkPrediction => {
                match link_prediction_auc(&emb, &split.positives, &split.negatives) {
                    Ok(auc) => push(task, "auc", auc),
                    Err(e) => errors.push(format!("{}: {e}", task.name())),
                }
            }
            property => {
                let node_spec = SplitSpec {
                    kind: SplitKind::Node,
                    train_fraction,
                    seed: desc.seed,
                };
                match property_task(&emb, table, property, forest_grid, &node_spec) {
                    Ok(result) => push(task, result.metric.name(), result.value),
                    Err(e) => errors.push(format!("{}: {e}", task.name())),
                }
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64().max(1e-9);
    for row in &mut rows {
        row.wallclock_s = elapsed;
    }
    (rows, errors)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub enumerated: usize,
    pub executed: usize,
    pub skipped: usize,
    pub failed_runs: usize,
    pub failed_tasks: usize,
    pub results_path: PathBuf,
    pub wallclock_s: f64,
}

fn read_completed(path: &Path) -> Result<HashSet<String>, SweepError> {
    let mut done = HashSet::new();
    if path.exists() {
        for line in BufReader::new(File::open(path)?).lines() {
            let line = line?;
            let id = line.trim();
            if !id.is_empty() {
                done.insert(id.to_string());
            }
        }
    }
    Ok(done)
}

/// Per-dataset graph-level statistics, written once per sweep so reports can
/// relate performance to graph structure.
fn write_dataset_stats(
    path: &Path,
    stats: &[(String, String, crate::metrics::GraphStats)],
) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "dataset",
        "family",
        "nodes",
        "edges",
        "transitivity",
        "density",
        "avg_clustering",
        "modularity",
        "communities",
    ])?;
    for (name, family, s) in stats {
        w.write_record([
            name.as_str(),
            family.as_str(),
            &s.nodes.to_string(),
            &s.edges.to_string(),
            &s.transitivity.to_string(),
            &s.density.to_string(),
            &s.avg_clustering.to_string(),
            &s.modularity.to_string(),
            &s.communities.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Execute a sweep resumably with a pool of `threads` workers. Completed run
/// ids are skipped; results append to `<output_dir>/results.csv`; failures go
/// to `<output_dir>/errors.log` without stopping the sweep.
pub fn run_sweep(config: &ExperimentConfig, threads: usize) -> Result<SweepSummary, SweepError> {
    run_sweep_with(config, threads, &WalkOverrides::new())
}

/// [`run_sweep`] with per-(dataset, method) walk-setting overrides from a
/// pre-search phase.
pub fn run_sweep_with(
    config: &ExperimentConfig,
    threads: usize,
    overrides: &WalkOverrides,
) -> Result<SweepSummary, SweepError> {
    let started = Instant::now();
    let runs = enumerate_sweep_with(config, overrides)?;
    let out = &config.output_dir;
    fs::create_dir_all(out)?;

    // load graphs and property tables once per dataset
    let mut data: HashMap<String, (Graph, PropertyTable)> = HashMap::new();
    let mut stats = Vec::new();
    for d in &config.datasets {
        let g = d.load()?;
        let table = compute_properties(&g, 0).map_err(|e| SweepError::Dataset {
            name: d.name.clone(),
            message: e.to_string(),
        })?;
        stats.push((d.name.clone(), d.family(), table.graph_stats(&g)));
        data.insert(d.name.clone(), (g, table));
    }
    write_dataset_stats(&out.join("dataset_stats.csv"), &stats)?;

    let results_path = out.join("results.csv");
    let completed_path = out.join("completed.log");
    let errors_path = out.join("errors.log");
    let completed = read_completed(&completed_path)?;

    let pending: Vec<&RunDescriptor> = runs
        .iter()
        .filter(|r| !completed.contains(&r.run_id))
        .collect();
    let skipped = runs.len() - pending.len();

    let write_header = !results_path.exists();
    let mut results_writer = csv::WriterBuilder::new()
        .has_headers(write_header)
        .from_writer(OpenOptions::new().create(true).append(true).open(&results_path)?);
    let mut completed_writer = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&completed_path)?;
    let mut errors_writer = OpenOptions::new().create(true).append(true).open(&errors_path)?;

    struct Outcome {
        run_id: String,
        rows: Vec<ResultRow>,
        errors: Vec<String>,
    }

    let cursor = AtomicUsize::new(0);
    let threads = threads.max(1).min(pending.len().max(1));
    let (mut executed, mut failed_runs, mut failed_tasks) = (0usize, 0usize, 0usize);
    let tasks = &config.tasks;
    let forest_grid = &config.forest;
    let train_fraction = config.train_fraction;
    let data_ref = &data;

    std::thread::scope(|scope| -> Result<(), SweepError> {
        let (tx, rx) = mpsc::channel::<Outcome>();
        for _ in 0..threads {
            let tx = tx.clone();
            let pending = &pending;
            let cursor = &cursor;
            scope.spawn(move || loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= pending.len() {
                    break;
                }
                let desc = pending[i];
                let (g, table) = &data_ref[&desc.dataset];
                let (rows, errors) =
                    execute_run(g, table, desc, tasks, train_fraction, forest_grid);
                if tx
                    .send(Outcome {
                        run_id: desc.run_id.clone(),
                        rows,
                        errors,
                    })
                    .is_err()
                {
                    break;
                }
            });
        }
        drop(tx);
        // single appender: rows land in results.csv and are flushed before
        // the run id is committed to completed.log
        for outcome in rx {
            let run_failed = outcome.rows.is_empty() && !outcome.errors.is_empty();
            for row in &outcome.rows {
                results_writer.serialize(row)?;
            }
            results_writer.flush()?;
            for err in &outcome.errors {
                writeln!(errors_writer, "{}\t{}", outcome.run_id, err)?;
            }
            errors_writer.flush()?;
            if run_failed {
                failed_runs += 1;
            } else {
                failed_tasks += outcome.errors.len();
                writeln!(completed_writer, "{}", outcome.run_id)?;
                completed_writer.flush()?;
                executed += 1;
            }
        }
        Ok(())
    })?;

    Ok(SweepSummary {
        enumerated: runs.len(),
        executed,
        skipped,
        failed_runs,
        failed_tasks,
        results_path,
        wallclock_s: started.elapsed().as_secs_f64(),
    })
}

/// Read every result row from a results CSV.
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>, SweepError> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

/// Pre-search the walk grid for one (dataset, method) at default
/// hyperparameters, scoring link-prediction AUC on a fixed split; returns
/// the winning settings to freeze for the sweep.
pub fn walk_pre_search(
    g: &Graph,
    method: Method,
    grid: &WalkGrid,
    seed: u64,
) -> Result<(WalkSettings, f64), SweepError> {
    if grid.num_walks.is_empty() || grid.walk_length.is_empty() || grid.epochs.is_empty() {
        return Err(SweepError::Config("empty walk-grid dimension".into()));
    }
    let point = default_point(method);
    let spec = SplitSpec {
        kind: SplitKind::Edge,
        train_fraction: 0.9,
        seed,
    };
    let split = edge_split(g, &spec).map_err(|e| SweepError::Config(e.to_string()))?;
    let mut best: Option<(WalkSettings, f64)> = None;
    // walk dimensions only matter for walk-based methods; encoder methods
    // search epochs alone
    let (walk_lists, len_lists) = if method.is_shallow() {
        (grid.num_walks.clone(), grid.walk_length.clone())
    } else {
        (vec![WalkSettings::default().num_walks], vec![WalkSettings::default().walk_length])
    };
    for &num_walks in &walk_lists {
        for &walk_length in &len_lists {
            for &epochs in &grid.epochs {
                let settings = WalkSettings {
                    num_walks,
                    walk_length,
                    epochs,
                };
                let emb = match embed_for_run(&split.train, &point, &settings, seed) {
                    Ok(emb) => emb,
                    Err(_) => continue,
                };
                let auc = match link_prediction_auc(&emb, &split.positives, &split.negatives) {
                    Ok(a) => a,
                    Err(_) => continue,
                };
                if best.as_ref().is_none_or(|(_, b)| auc > *b) {
                    best = Some((settings, auc));
                }
            }
        }
    }
    best.ok_or_else(|| SweepError::Config("walk pre-search produced no scorable settings".into()))
}

/// The method's default grid point (the values held fixed during the walk
/// pre-search phase).
fn default_point(method: Method) -> RunPoint {
    match method {
        Method::Deepwalk => RunPoint::Deepwalk {
            dim: 128,
            ns_exponent: 0.75,
            subsample_freq: 0.001,
        },
        Method::Node2vec => RunPoint::Node2vec {
            dim: 128,
            p: 1.0,
            q: 1.0,
        },
        Method::Gcn => RunPoint::Gcn {
            dim: 128,
            max_degree: 100,
        },
        Method::SageMean => RunPoint::Sage {
            arch: Arch::SageMean,
            dim: 128,
            max_degree: 100,
            s1: 25,
            s2: 10,
        },
        Method::SageMaxpool => RunPoint::Sage {
            arch: Arch::SageMaxpool,
            dim: 128,
            max_degree: 100,
            s1: 25,
            s2: 10,
        },
        Method::Gat => RunPoint::Gat { dim: 128, heads: 4 },
    }
}
