//! File formats read and written by the runner.

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use ncgossip_core::netmodel::Edge;
use ncgossip_core::{FloodParams, JointSource, SideInfo};
use serde::{Deserialize, Serialize};

/// Edge list: one `u v` pair per line, `#` starts a comment.
pub fn read_edge_list(path: &Path) -> anyhow::Result<Vec<Edge>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_edge_list(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

pub fn parse_edge_list(text: &str) -> anyhow::Result<Vec<Edge>> {
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<u32>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(u)), Some(Ok(v)), None) => edges.push((u, v)),
            _ => bail!("line {}: expected two node indices", lineno + 1),
        }
    }
    Ok(edges)
}

/// Correlated source description, as a TOML table or JSON object.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceFile {
    /// `k` independent uniform symbols, no side information.
    Uniform {
        k: usize,
        #[serde(default = "two")]
        alphabet: u32,
        n: usize,
    },
    /// One uniform bit; node classes see it through BSCs, listed in node
    /// order. A class without `crossover` has no side information.
    Dsbs { classes: Vec<DsbsClass> },
    /// `k` copies of one uniform bit, each flipped independently with
    /// probability `flip`.
    SymmetricBits { k: usize, flip: f64, n: usize },
    /// Full joint table, messages first and side symbols after, row-major.
    Dense {
        message_alphabets: Vec<u32>,
        side_alphabets: Vec<u32>,
        pmf: Vec<f64>,
    },
    /// Message pmf with one channel per node.
    Factored {
        message_alphabets: Vec<u32>,
        message_pmf: Vec<f64>,
        side: Vec<SideEntry>,
    },
}

fn two() -> u32 {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsbsClass {
    #[serde(default)]
    pub crossover: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SideEntry {
    Bsc { bsc: f64 },
    Channel { alphabet: u32, matrix: Vec<f64> },
    Nothing { none: bool },
}

impl SourceFile {
    pub fn build(&self) -> anyhow::Result<JointSource> {
        let built = match self {
            SourceFile::Uniform { k, alphabet, n } => {
                JointSource::independent_uniform(*k, *alphabet, *n)
            }
            SourceFile::Dsbs { classes } => JointSource::dsbs(&self::dsbs_crossovers(classes)),
            SourceFile::SymmetricBits { k, flip, n } => JointSource::symmetric_bits(*k, *flip, *n),
            SourceFile::Dense {
                message_alphabets,
                side_alphabets,
                pmf,
            } => JointSource::dense(
                message_alphabets.clone(),
                side_alphabets.clone(),
                pmf.clone(),
            ),
            SourceFile::Factored {
                message_alphabets,
                message_pmf,
                side,
            } => {
                let side = side
                    .iter()
                    .map(|s| match s {
                        SideEntry::Bsc { bsc } => SideInfo::bsc(*bsc),
                        SideEntry::Channel { alphabet, matrix } => SideInfo::Channel {
                            alphabet: *alphabet,
                            matrix: matrix.clone(),
                        },
                        SideEntry::Nothing { .. } => SideInfo::None,
                    })
                    .collect();
                JointSource::factored(message_alphabets.clone(), message_pmf.clone(), side)
            }
        };
        built.map_err(|e| anyhow!("source: {e}"))
    }
}

pub fn dsbs_crossovers(classes: &[DsbsClass]) -> Vec<Option<f64>> {
    classes
        .iter()
        .flat_map(|c| std::iter::repeat_n(c.crossover, c.count))
        .collect()
}

/// JSON source file.
pub fn read_source(path: &Path) -> anyhow::Result<SourceFile> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// `flood.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodRecord {
    pub config_hash: String,
    pub seed: u64,
    #[serde(rename = "T")]
    pub t: u32,
    pub alpha: f64,
    pub q: u32,
    pub trials: usize,
    pub residual: f64,
    pub fitted_slope: f64,
    pub tail_points: usize,
    pub alpha_capped: bool,
}

impl FloodRecord {
    pub fn new(p: &FloodParams, config_hash: &str, seed: u64) -> Self {
        FloodRecord {
            config_hash: config_hash.to_string(),
            seed,
            t: p.t,
            alpha: p.alpha,
            q: p.q,
            trials: p.trials,
            residual: p.residual,
            fitted_slope: p.fitted_slope,
            tail_points: p.tail_points,
            alpha_capped: p.alpha_capped,
        }
    }

    /// Parameters without the empirical tail.
    pub fn params(&self) -> FloodParams {
        FloodParams {
            t: self.t,
            alpha: self.alpha,
            q: self.q,
            trials: self.trials,
            fitted_slope: self.fitted_slope,
            residual: self.residual,
            tail_points: self.tail_points,
            alpha_capped: self.alpha_capped,
            tail: Vec::new(),
        }
    }
}

pub fn read_flood_record(path: &Path) -> anyhow::Result<FloodRecord> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// Parses `"a/b"` or an integer into an exact rate.
pub fn parse_rate(s: &str) -> anyhow::Result<ncgossip_core::Rate> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse::<u64>()?, d.trim().parse::<u64>()?),
        None => (s.parse::<u64>()?, 1),
    };
    if d == 0 {
        bail!("rate {s:?} has zero denominator");
    }
    Ok(ncgossip_core::Rate::new(n, d))
}

/// Column documentation printed by `--schema`.
pub const SCHEMA: &str = "\
Every CSV starts with `# config_hash=<sha256> seed=<u64>`; every JSON object
carries `config_hash` and `seed` fields.

flood-estimate
  flood.json        T, alpha, q, trials, residual, fitted_slope, tail_points, alpha_capped
  flood_tail.csv    t                 round index
                    tail              max over start nodes of P[S_F >= t]

gossip-run
  trials.csv        trial             trial index
                    node              node index
                    threshold         rank the node needs to decode
                    decode_round      first round with that rank; empty on timeout
  stop_times.csv    trial             trial index
                    stop_round        stopping time under the stop rule; empty on timeout
  rank_trace.csv    trial, node, round, rank   (only with gossip.trace)
  gossip.json       thresholds, quantiles, per-class quantiles, bound, exceedance, timeouts

capacity-scan
  capacity.csv      trial             trial index
                    first_feasible_time   smallest horizon meeting every demand; empty on timeout
  capacity.json     trials, timeouts, denominator, median
  paths.txt         `# trial <i>` then one line per witness path:
                    `path <weight>: <v>@<t> <v>@<t> ...`   (with capacity.dump_paths)

lemma4-verify
  lemma4.csv        q, ambient, h, witnesses, subspaces_checked, verified

sweep
  <key>=<value>/    outputs of the swept subcommand for that value
  sweep_summary.json  one entry per value with its headline numbers
";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_lists() {
        assert_eq!(
            parse_edge_list("# ring\n0 1\n1 2 # last\n\n").unwrap(),
            vec![(0, 1), (1, 2)]
        );
        assert!(parse_edge_list("0 1 2").is_err());
        assert!(parse_edge_list("0 x").is_err());
    }

    #[test]
    fn rates() {
        assert_eq!(parse_rate("1/8").unwrap(), ncgossip_core::Rate::new(1, 8));
        assert_eq!(parse_rate(" 2 ").unwrap(), ncgossip_core::Rate::new(2, 1));
        assert!(parse_rate("1/0").is_err());
        assert!(parse_rate("0.5").is_err());
    }

    #[test]
    fn dsbs_classes_expand_in_order() {
        let s: SourceFile = toml::from_str(
            "family = \"dsbs\"\nclasses = [{ count = 1 }, { crossover = 0.05, count = 2 }]",
        )
        .unwrap();
        let SourceFile::Dsbs { classes } = &s else {
            panic!()
        };
        assert_eq!(dsbs_crossovers(classes), vec![None, Some(0.05), Some(0.05)]);
        let src = s.build().unwrap();
        assert_eq!(src.node_count(), 3);
        assert_eq!(src.decode_threshold(1, 200, 10.0, 0.1).unwrap(), 8);
    }

    #[test]
    fn factored_side_entries() {
        let json = r#"{"family": "factored", "message_alphabets": [2], "message_pmf": [0.5, 0.5],
                       "side": [{"none": true}, {"bsc": 0.1}, {"alphabet": 2, "matrix": [1, 0, 0, 1]}]}"#;
        let src = serde_json::from_str::<SourceFile>(json)
            .unwrap()
            .build()
            .unwrap();
        assert!((src.cond_entropy(&[0], 0).unwrap() - 1.0).abs() < 1e-12);
        assert!(src.cond_entropy(&[0], 2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn flood_record_round_trips() {
        let r = FloodRecord {
            config_hash: "ab".into(),
            seed: 3,
            t: 9,
            alpha: 0.75,
            q: 2,
            trials: 1000,
            residual: 0.1,
            fitted_slope: 0.9,
            tail_points: 5,
            alpha_capped: false,
        };
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"T\":9"));
        assert_eq!(serde_json::from_str::<FloodRecord>(&text).unwrap(), r);
        assert_eq!(r.params().rounds_for(3.0), 13.0);
    }
}
