//! Experiment configuration: JSON document, dotted overrides, defaults and
//! exhaustive validation.

use std::path::{Path, PathBuf};

use plcml::autoencoder::AeConfig;
use plcml::clustering::NoiseClusterConfig;
use plcml::diagnostics::{DiagConfig, LoadMode};
use plcml::gan::GanConfig;
use plcml::medium::MultipathConfig;
use plcml::routing::nn::RouterConfig;
use plcml::routing::DatasetConfig;
use plcml::seed;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Root of every random stream.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub channel: ChannelSection,
    pub noise_cluster: NoiseClusterConfig,
    pub gan: GanSection,
    pub ae_ser: AeSerSection,
    pub route: RouteSection,
    pub diagnose: DiagnoseSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            threads: 0,
            channel: ChannelSection::default(),
            noise_cluster: NoiseClusterConfig::default(),
            gan: GanSection::default(),
            ae_ser: AeSerSection::default(),
            route: RouteSection::default(),
            diagnose: DiagnoseSection::default(),
        }
    }
}

/// Echo-model channel corpus, shared by `channel-gen` and `gan-train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub n_responses: usize,
    pub multipath: MultipathConfig,
    pub seed: u64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self { n_responses: 1000, multipath: MultipathConfig::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanSection {
    pub model: GanConfig,
    /// Generated responses compared against the corpus.
    pub eval_samples: usize,
    /// Per-bin mean tolerance for the report, dB.
    pub tolerance_db: f64,
}

impl Default for GanSection {
    fn default() -> Self {
        Self { model: GanConfig::default(), eval_samples: 1000, tolerance_db: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AeSerSection {
    pub autoencoder: AeConfig,
    pub ebn0_db: Vec<f64>,
    /// Messages per Eb/N0 point.
    pub trials: usize,
}

impl Default for AeSerSection {
    fn default() -> Self {
        Self { autoencoder: AeConfig::default(), ebn0_db: (0..=12).map(f64::from).collect(), trials: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RouteSection {
    pub train: DatasetConfig,
    pub test: DatasetConfig,
    pub router: RouterConfig,
    /// Width of the node-count buckets in the match CSV.
    pub match_bucket: usize,
    /// Densities (nodes per km²) of the capacity-gain sweep.
    pub gain_densities: Vec<f64>,
    pub gain_n_nodes: usize,
    pub gain_topologies_per_density: usize,
    pub gain_problems: usize,
    /// `(density, distance)` bins of the capacity surface.
    pub regression_bins: (usize, usize),
    pub seed: u64,
}

impl Default for RouteSection {
    fn default() -> Self {
        Self {
            train: DatasetConfig { n_topologies: 150, ..Default::default() },
            test: DatasetConfig { n_topologies: 40, ..Default::default() },
            router: RouterConfig::default(),
            match_bucket: 25,
            gain_densities: vec![50.0, 100.0, 200.0, 400.0],
            gain_n_nodes: 150,
            gain_topologies_per_density: 5,
            gain_problems: 50,
            regression_bins: (8, 8),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseSection {
    /// Shared settings; `load_mode` is replaced by each entry of `load_modes`.
    pub config: DiagConfig,
    pub load_modes: Vec<LoadMode>,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        Self { config: DiagConfig::default(), load_modes: vec![LoadMode::Constant2kOhm, LoadMode::RandomVariable] }
    }
}

/// Seed fields filled from the root seed unless the document sets them.
const SEED_PATHS: [(&str, &str); 7] = [
    ("channel.seed", "channel"),
    ("noise_cluster.seed", "noise-cluster"),
    ("gan.model.seed", "gan"),
    ("ae_ser.autoencoder.seed", "ae-ser"),
    ("route.seed", "route"),
    ("route.router.seed", "route-router"),
    ("diagnose.config.seed", "diagnose"),
];

#[derive(Debug)]
pub enum ConfigError {
    /// The file could not be read or parsed, or an override was malformed.
    Input(String),
    /// One entry per violation, each prefixed by its key path.
    Invalid(Vec<String>),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Input(m) => write!(f, "{m}"),
            ConfigError::Invalid(v) => {
                writeln!(f, "{} configuration violation(s):", v.len())?;
                for e in v {
                    writeln!(f, "  {e}")?;
                }
                Ok(())
            }
        }
    }
}

pub fn read_document(path: Option<&Path>) -> Result<Value, ConfigError> {
    let Some(path) = path else { return Ok(Value::Object(Map::new())) };
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Input(format!("cannot read {}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Ok(Value::Object(Map::new()));
    }
    let v: Value = serde_json::from_str(&text).map_err(|e| ConfigError::Input(format!("{}: {e}", path.display())))?;
    if !v.is_object() {
        return Err(ConfigError::Input(format!("{}: top level must be an object", path.display())));
    }
    Ok(v)
}

/// Applies `key.path=value`. The value is read as JSON when it parses and
/// as a plain string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| ConfigError::Input(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_path(doc, key, value).map_err(ConfigError::Input)
}

pub fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<(), String> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("malformed key path `{key}`"));
    }
    let mut cur = doc;
    for (i, p) in parts.iter().enumerate() {
        let Value::Object(map) = cur else {
            return Err(format!("`{}` is not an object", parts[..i].join(".")));
        };
        if i + 1 == parts.len() {
            map.insert(p.to_string(), value);
            return Ok(());
        }
        cur = map.entry(p.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!()
}

fn get_path<'a>(doc: &'a Value, key: &str) -> Option<&'a Value> {
    key.split('.').try_fold(doc, |v, p| v.get(p))
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Keys of `user` that the defaults do not have. Only object-valued defaults
/// are descended into, so free-form values (lists, enums, optional fields)
/// are left to deserialization.
/// They are removed from `user` so deserialization can report the rest.
fn strip_unknown_keys(user: &mut Value, defaults: &Value, prefix: &str, out: &mut Vec<String>) {
    if let (Value::Object(u), Value::Object(d)) = (user, defaults) {
        u.retain(|k, _| {
            let known = d.contains_key(k);
            if !known {
                out.push(format!("{}: unknown key", join(prefix, k)));
            }
            known
        });
        for (k, v) in u.iter_mut() {
            strip_unknown_keys(v, &d[k], &join(prefix, k), out);
        }
    }
}

fn merge(base: &mut Value, user: &Value) {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, u) => *b = u.clone(),
    }
}

/// Deserializes `doc`, recording each type error with its path and
/// replacing the offending value by its default before retrying, so every
/// bad value is reported.
fn deserialize_all<T: DeserializeOwned>(mut doc: Value, defaults: &Value, out: &mut Vec<String>) -> Option<T> {
    for _ in 0..256 {
        let err = match serde_path_to_error::deserialize::<_, T>(doc.clone()) {
            Ok(v) => return Some(v),
            Err(e) => e,
        };
        let path = err.path().to_string();
        out.push(format!("{path}: {}", err.inner()));
        let fallback = get_path(defaults, &path).cloned();
        let replaced = match fallback {
            Some(v) if get_path(&doc, &path).is_some() => set_path(&mut doc, &path, v).is_ok(),
            _ => false,
        };
        if !replaced {
            return None;
        }
    }
    None
}

fn check(out: &mut Vec<String>, path: &str, r: plcml::Result<()>) {
    match r {
        Ok(()) => {}
        Err(plcml::Error::InvalidArgument(m)) => out.push(format!("{path}: {m}")),
        Err(e) => out.push(format!("{path}: {e}")),
    }
}

fn positive(out: &mut Vec<String>, path: &str, v: usize) {
    if v == 0 {
        out.push(format!("{path}: must be positive"));
    }
}

impl ExperimentConfig {
    /// Semantic checks after a successful parse.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        positive(&mut v, "channel.n_responses", self.channel.n_responses);
        check(&mut v, "channel.multipath", self.channel.multipath.validate());
        check(&mut v, "noise_cluster", self.noise_cluster.validate());
        check(&mut v, "gan.model", self.gan.model.validate());
        positive(&mut v, "gan.eval_samples", self.gan.eval_samples);
        if !(self.gan.tolerance_db > 0.0) {
            v.push("gan.tolerance_db: must be positive".into());
        }
        check(&mut v, "ae_ser.autoencoder", self.ae_ser.autoencoder.validate());
        positive(&mut v, "ae_ser.trials", self.ae_ser.trials);
        if self.ae_ser.ebn0_db.is_empty() || self.ae_ser.ebn0_db.iter().any(|x| x.is_nan()) {
            v.push("ae_ser.ebn0_db: must be a non-empty list of numbers".into());
        }
        let r = &self.route;
        check(&mut v, "route.train", r.train.validate());
        check(&mut v, "route.test", r.test.validate());
        check(&mut v, "route.router", r.router.validate());
        positive(&mut v, "route.match_bucket", r.match_bucket);
        if r.gain_densities.is_empty() || r.gain_densities.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            v.push("route.gain_densities: must be a non-empty list of positive densities".into());
        }
        if r.gain_n_nodes < 2 {
            v.push("route.gain_n_nodes: at least two nodes are needed".into());
        }
        positive(&mut v, "route.gain_topologies_per_density", r.gain_topologies_per_density);
        positive(&mut v, "route.gain_problems", r.gain_problems);
        if r.regression_bins.0 == 0 || r.regression_bins.1 == 0 {
            v.push("route.regression_bins: both bin counts must be positive".into());
        }
        check(&mut v, "diagnose.config", self.diagnose.config.validate());
        if self.diagnose.load_modes.is_empty() {
            v.push("diagnose.load_modes: at least one load mode is needed".into());
        }
        v
    }

    /// Defaults, then the document, then derived seeds for sections whose
    /// seed was not given, then validation.
    pub fn resolve(user: &Value) -> Result<Self, ConfigError> {
        let defaults = serde_json::to_value(Self::default()).expect("defaults serialize");
        let mut errors = Vec::new();
        let mut known = user.clone();
        strip_unknown_keys(&mut known, &defaults, "", &mut errors);
        let mut doc = defaults.clone();
        merge(&mut doc, &known);
        let parsed = deserialize_all::<Self>(doc, &defaults, &mut errors);
        let Some(mut cfg) = parsed else {
            return Err(ConfigError::Invalid(errors));
        };
        cfg.derive_seeds(user);
        errors.extend(cfg.violations());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    fn derive_seeds(&mut self, user: &Value) {
        for (path, label) in SEED_PATHS {
            if get_path(user, path).is_none() {
                let s = seed::derive(self.seed, label);
                match path {
                    "channel.seed" => self.channel.seed = s,
                    "noise_cluster.seed" => self.noise_cluster.seed = s,
                    "gan.model.seed" => self.gan.model.seed = s,
                    "ae_ser.autoencoder.seed" => self.ae_ser.autoencoder.seed = s,
                    "route.seed" => self.route.seed = s,
                    "route.router.seed" => self.route.router.seed = s,
                    "diagnose.config.seed" => self.diagnose.config.seed = s,
                    _ => unreachable!(),
                }
            }
        }
    }

    /// The experiment-defining part of the configuration; the output
    /// location and thread count are excluded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.threads = 0;
        let text = serde_json::to_string(&c).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}
