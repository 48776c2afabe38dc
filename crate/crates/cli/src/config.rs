//! Run configuration: one TOML file, optionally patched with `--set key=value`.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use ncgossip_core::netmodel::{ModelError, ModelVariant};
use ncgossip_core::{FieldSpec, GossipMode, Graph, JointSource, ModelSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::formats;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Directory receiving every output file.
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default = "default_q")]
    pub q: u32,
    #[serde(default)]
    pub flood: FloodConfig,
    #[serde(default)]
    pub gossip: Option<GossipConfig>,
    #[serde(default)]
    pub capacity: Option<CapacityConfig>,
    #[serde(default)]
    pub lemma4: Lemma4Config,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_q() -> u32 {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Push,
    Pull,
    Exchange,
}

impl From<Mode> for GossipMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Push => GossipMode::Push,
            Mode::Pull => GossipMode::Pull,
            Mode::Exchange => GossipMode::Exchange,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    PhoneCall {
        n: usize,
        mode: Mode,
        #[serde(default)]
        loss: f64,
    },
    UniformGossip {
        n: usize,
        mode: Mode,
        /// Edge-list file; the complete graph when absent.
        #[serde(default)]
        graph: Option<PathBuf>,
        #[serde(default)]
        directed: bool,
        #[serde(default)]
        loss: f64,
    },
    Static {
        n: usize,
        graph: PathBuf,
        #[serde(default)]
        directed: bool,
        #[serde(default)]
        loss: f64,
    },
    EdgeMarkovian {
        n: usize,
        p_birth: f64,
        p_death: f64,
        /// Edges present in round 1; none when absent.
        #[serde(default)]
        initial: Option<PathBuf>,
        #[serde(default)]
        loss: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloodConfig {
    #[serde(default = "default_flood_trials")]
    pub trials: usize,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: u32,
    #[serde(default = "default_alpha_cap")]
    pub alpha_cap: f64,
    #[serde(default)]
    pub max_starts: Option<usize>,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_flood_trials() -> usize {
    1000
}
fn default_max_rounds() -> u32 {
    10_000
}
fn default_alpha_cap() -> f64 {
    16.0
}
fn default_confidence() -> f64 {
    0.95
}

impl Default for FloodConfig {
    fn default() -> Self {
        FloodConfig {
            trials: default_flood_trials(),
            max_rounds: default_max_rounds(),
            alpha_cap: default_alpha_cap(),
            max_starts: None,
            confidence: default_confidence(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GossipConfig {
    /// Number of independent one-block messages (ignored when `blocks` or
    /// `source` is given).
    #[serde(default)]
    pub k: Option<usize>,
    /// Block count of each independent message.
    #[serde(default)]
    pub blocks: Option<Vec<usize>>,
    /// Correlated source; switches to binned messages.
    #[serde(default)]
    pub source: Option<SourceConfig>,
    #[serde(default)]
    pub l: Option<usize>,
    #[serde(default = "default_s_bits")]
    pub s_bits: u32,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// `placement[i]` lists the nodes starting with message `i`; message `i`
    /// sits at node `i mod n` when absent.
    #[serde(default)]
    pub placement: Option<Vec<Vec<usize>>>,
    /// `"all"` or a node index.
    #[serde(default)]
    pub stop: StopConfig,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_gossip_trials")]
    pub trials: usize,
    #[serde(default = "default_gossip_rounds")]
    pub max_rounds: u32,
    #[serde(default)]
    pub trace: Vec<usize>,
    /// `flood.json` written by `flood-estimate`; enables bound checks.
    #[serde(default)]
    pub flood_params: Option<PathBuf>,
}

fn default_s_bits() -> u32 {
    8
}
fn default_delta() -> f64 {
    0.1
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_gossip_trials() -> usize {
    1000
}
fn default_gossip_rounds() -> u32 {
    10_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StopConfig {
    #[default]
    #[serde(with = "all_literal")]
    All,
    Node(usize),
}

mod all_literal {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("all")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "all" {
            Ok(())
        } else {
            Err(de::Error::custom(format!(
                "expected \"all\" or a node index, got {s:?}"
            )))
        }
    }
}

/// A source given inline or by file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SourceConfig {
    File { file: PathBuf },
    Inline(formats::SourceFile),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityConfig {
    pub sources: Vec<usize>,
    /// One rational per source (`"1/8"`), or a single value for all.
    pub demands: Vec<String>,
    pub sink: usize,
    #[serde(default = "default_capacity_trials")]
    pub trials: usize,
    #[serde(default = "default_capacity_rounds")]
    pub max_rounds: u32,
    #[serde(default = "default_max_den")]
    pub max_denominator: u64,
    /// Write witness paths as well.
    #[serde(default)]
    pub dump_paths: bool,
}

fn default_capacity_trials() -> usize {
    200
}
fn default_capacity_rounds() -> u32 {
    1000
}
fn default_max_den() -> u64 {
    ncgossip_core::capacity::DEFAULT_MAX_DENOMINATOR
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma4Config {
    #[serde(default = "default_lemma_q")]
    pub q: Vec<u32>,
    #[serde(default = "default_lemma_ambient")]
    pub ambient: Vec<usize>,
    #[serde(default = "default_lemma_h")]
    pub h: Vec<usize>,
}

fn default_lemma_q() -> Vec<u32> {
    vec![2, 3, 4]
}
fn default_lemma_ambient() -> Vec<usize> {
    vec![2, 3, 4]
}
fn default_lemma_h() -> Vec<usize> {
    vec![0, 1, 2]
}

impl Default for Lemma4Config {
    fn default() -> Self {
        Lemma4Config {
            q: default_lemma_q(),
            ambient: default_lemma_ambient(),
            h: default_lemma_h(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Subcommand run for each value.
    pub command: String,
    /// Dotted key overridden for each run, e.g. `gossip.k`.
    pub key: String,
    pub values: Vec<toml::Value>,
}

/// Reads `path`, applies overrides, and validates the result.
pub fn load(path: &Path, overrides: &[String]) -> anyhow::Result<(RunConfig, toml::Value)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut tree: toml::Value =
        toml::from_str(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    for o in overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| anyhow!("override {o:?} is not key=value"))?;
        set_key(&mut tree, key.trim(), parse_value(value.trim()))?;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let config = from_tree(&tree, base)?;
    Ok((config, tree))
}

/// Deserializes a (possibly patched) tree, resolving relative paths
/// against `base`.
pub fn from_tree(tree: &toml::Value, base: &Path) -> anyhow::Result<RunConfig> {
    let text = toml::to_string(tree)?;
    let mut config: RunConfig = toml::from_str(&text).map_err(|e| anyhow!("{e}"))?;
    config.resolve_paths(base);
    Ok(config)
}

/// Parses an override value as a TOML literal, or as a bare string.
pub fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

pub fn set_key(tree: &mut toml::Value, key: &str, value: toml::Value) -> anyhow::Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| anyhow!("empty key"))?;
    let mut node = tree;
    for p in parts {
        let table = node
            .as_table_mut()
            .ok_or_else(|| anyhow!("{key}: {p} is not a table"))?;
        node = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    node.as_table_mut()
        .ok_or_else(|| anyhow!("{key}: parent is not a table"))?
        .insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        if let Some(m) = &mut self.model {
            match m {
                ModelConfig::UniformGossip { graph: Some(g), .. }
                | ModelConfig::Static { graph: g, .. } => fix(g),
                ModelConfig::EdgeMarkovian {
                    initial: Some(g), ..
                } => fix(g),
                _ => {}
            }
        }
        if let Some(g) = &mut self.gossip {
            if let Some(SourceConfig::File { file }) = &mut g.source {
                fix(file);
            }
            if let Some(f) = &mut g.flood_params {
                fix(f);
            }
        }
    }

    /// SHA-256 of the resolved configuration without its output directory,
    /// hex encoded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let canonical = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }

    pub fn field(&self) -> anyhow::Result<FieldSpec> {
        field_of_order(self.q)
    }

    pub fn model(&self) -> anyhow::Result<ModelSpec> {
        let m = self
            .model
            .as_ref()
            .ok_or_else(|| anyhow!("missing [model] table"))?;
        build_model(m, self.seed)
    }
}

pub fn field_of_order(q: u32) -> anyhow::Result<FieldSpec> {
    if q < 2 {
        bail!("q = {q} is not a prime power");
    }
    let p = (2..=q)
        .find(|&d| q.is_multiple_of(d))
        .expect("q has a divisor");
    let mut m = 0;
    let mut rest = q;
    while rest.is_multiple_of(p) {
        rest /= p;
        m += 1;
    }
    if rest != 1 {
        bail!("q = {q} is not a prime power");
    }
    FieldSpec::new(p, m).map_err(|e| anyhow!("q = {q}: {e}"))
}

fn model_err(e: ModelError) -> anyhow::Error {
    anyhow!("model: {e}")
}

pub fn build_model(m: &ModelConfig, seed: u64) -> anyhow::Result<ModelSpec> {
    let (n, variant, loss) = match m {
        ModelConfig::PhoneCall { n, mode, loss } => (
            *n,
            ModelVariant::RandomPhoneCall {
                mode: (*mode).into(),
            },
            *loss,
        ),
        ModelConfig::UniformGossip {
            n,
            mode,
            graph,
            directed,
            loss,
        } => {
            let graph = match graph {
                Some(path) => Graph::from_edges(*n, &formats::read_edge_list(path)?, *directed)
                    .map_err(model_err)?,
                None => Graph::complete(*n),
            };
            (
                *n,
                ModelVariant::UniformGossip {
                    graph,
                    mode: (*mode).into(),
                },
                *loss,
            )
        }
        ModelConfig::Static {
            n,
            graph,
            directed,
            loss,
        } => {
            let mut edges = formats::read_edge_list(graph)?;
            if !directed {
                let back: Vec<_> = edges.iter().map(|&(u, v)| (v, u)).collect();
                edges.extend(back);
            }
            (*n, ModelVariant::StaticGraph { edges }, *loss)
        }
        ModelConfig::EdgeMarkovian {
            n,
            p_birth,
            p_death,
            initial,
            loss,
        } => {
            let initial = match initial {
                Some(path) => formats::read_edge_list(path)?,
                None => Vec::new(),
            };
            (
                *n,
                ModelVariant::EdgeMarkovian {
                    p_birth: *p_birth,
                    p_death: *p_death,
                    initial,
                },
                *loss,
            )
        }
    };
    let variant = if loss > 0.0 {
        ModelVariant::Lossy {
            inner: Box::new(variant),
            loss,
        }
    } else {
        variant
    };
    ModelSpec::new(n, variant, seed).map_err(model_err)
}

impl GossipConfig {
    pub fn joint_source(&self) -> anyhow::Result<Option<JointSource>> {
        match &self.source {
            None => Ok(None),
            Some(SourceConfig::File { file }) => Ok(Some(formats::read_source(file)?.build()?)),
            Some(SourceConfig::Inline(s)) => Ok(Some(s.build()?)),
        }
    }
}
