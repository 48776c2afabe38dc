//! Subcommand execution.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::anyhow;
use ncgossip_core::capacity::{first_feasible_time, validate_paths, CapacityError};
use ncgossip_core::engine::{coded_bound, spreading_bound};
use ncgossip_core::flooding::{
    estimation_starts, fit_flood_params, sample_stop_times, MIN_TRIALS as FLOOD_MIN,
};
use ncgossip_core::linalg::verify_lemma4;
use ncgossip_core::rng::{child_seed, Domain};
use ncgossip_core::stats::quantile;
use ncgossip_core::{
    CapacityDemand, EngineError, EstimateConfig, Experiment, ExperimentSpec, FloodParams,
    MessageSetup, StopRule, TrialResult,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{self, field_of_order, RunConfig, StopConfig};
use crate::formats::{self, FloodRecord};
use crate::output::{opt, write_json, Csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    FloodEstimate,
    GossipRun,
    CapacityScan,
    Lemma4Verify,
    Sweep,
}

impl Command {
    pub fn parse(name: &str) -> Option<Self> {
        <Self as clap::ValueEnum>::from_str(name, false).ok()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0:#}")]
    Config(anyhow::Error),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{0:#}")]
    Io(anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Invariant(_) => 4,
            RunError::Io(_) => 1,
        }
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> RunError {
    RunError::Config(e.into())
}

fn io_err(e: impl Into<anyhow::Error>) -> RunError {
    RunError::Io(e.into())
}

/// Outcome of a completed run; outputs are on disk either way.
#[derive(Debug, Clone)]
pub struct Report {
    pub timeouts: usize,
    pub headline: Value,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.timeouts > 0 {
            3
        } else {
            0
        }
    }
}

pub fn run(
    command: Command,
    cfg: &RunConfig,
    tree: &toml::Value,
    base: &Path,
) -> Result<Report, RunError> {
    match command {
        Command::FloodEstimate => flood_estimate(cfg),
        Command::GossipRun => gossip_run(cfg),
        Command::CapacityScan => capacity_scan(cfg),
        Command::Lemma4Verify => lemma4(cfg),
        Command::Sweep => sweep(cfg, tree, base),
    }
}

fn flood_estimate(cfg: &RunConfig) -> Result<Report, RunError> {
    let model = cfg.model().map_err(config_err)?;
    cfg.field().map_err(config_err)?;
    let est = EstimateConfig {
        trials: cfg.flood.trials,
        max_rounds: cfg.flood.max_rounds,
        alpha_cap: cfg.flood.alpha_cap,
        max_starts: cfg.flood.max_starts,
        confidence: cfg.flood.confidence,
        seed: cfg.seed,
    };
    if est.trials < FLOOD_MIN {
        return Err(config_err(anyhow!(
            "flood.trials must be at least {FLOOD_MIN}"
        )));
    }
    let starts = estimation_starts(model.node_count(), est.max_starts);
    let samples: Vec<Vec<Option<u32>>> = starts
        .par_iter()
        .map(|&v| sample_stop_times(&model, cfg.q, v, &est))
        .collect();
    let timeouts = samples.iter().flatten().filter(|t| t.is_none()).count();
    let params = fit_flood_params(&samples, cfg.q, &est);

    let hash = cfg.hash();
    let record = FloodRecord::new(&params, &hash, cfg.seed);
    let mut json = serde_json::to_value(&record).map_err(io_err)?;
    json["timeouts"] = json!(timeouts);
    json["starts"] = json!(starts.len());
    write_json(&cfg.out_dir.join("flood.json"), &json).map_err(io_err)?;

    let mut csv = Csv::new(&hash, cfg.seed, &["t", "tail"]);
    for (t, p) in &params.tail {
        csv.row([t.to_string(), p.to_string()]);
    }
    csv.write(&cfg.out_dir.join("flood_tail.csv"))
        .map_err(io_err)?;
    Ok(Report {
        timeouts,
        headline: json!({ "T": params.t, "alpha": params.alpha }),
    })
}

/// Experiment described by the `[gossip]` table.
pub fn gossip_experiment(cfg: &RunConfig) -> anyhow::Result<Experiment> {
    let g = cfg
        .gossip
        .as_ref()
        .ok_or_else(|| anyhow!("missing [gossip] table"))?;
    let model = cfg.model()?;
    let n = model.node_count();
    let messages = match g.joint_source()? {
        Some(source) => MessageSetup::Binned {
            source,
            l: g.l
                .ok_or_else(|| anyhow!("gossip.l is required with a source"))?,
            s_bits: g.s_bits,
            delta: g.delta,
        },
        None => {
            let blocks = match (&g.blocks, g.k) {
                (Some(b), _) => b.clone(),
                (None, Some(k)) => vec![1; k],
                (None, None) => anyhow::bail!("gossip needs one of k, blocks or source"),
            };
            MessageSetup::Plain {
                blocks,
                s_bits: g.s_bits,
            }
        }
    };
    let placement = match &g.placement {
        Some(p) => p.clone(),
        None => (0..messages.message_count())
            .map(|i| vec![i % n.max(1)])
            .collect(),
    };
    let stop = match g.stop {
        StopConfig::All => StopRule::AllNodes,
        StopConfig::Node(v) => StopRule::Node(v),
    };
    if !(g.epsilon > 0.0 && g.epsilon < 1.0) {
        anyhow::bail!("gossip.epsilon must lie in (0, 1)");
    }
    Ok(Experiment::new(ExperimentSpec {
        field: cfg.field()?,
        model,
        messages,
        placement,
        stop,
        max_rounds: g.max_rounds,
        trials: g.trials,
        seed: cfg.seed,
        trace_nodes: g.trace.clone(),
    })?)
}

/// All trials in trial order, using the current rayon pool.
pub fn run_trials(exp: &Experiment) -> Result<Vec<TrialResult>, RunError> {
    (0..exp.spec().trials)
        .into_par_iter()
        .map(|i| exp.run_trial(i))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| match e {
            EngineError::Inconsistent { .. } => RunError::Invariant(e.to_string()),
            other => RunError::Config(other.into()),
        })
}

/// Rounds `r` that node `v`'s bound is built from: the unrounded block
/// requirement for one message, the rounded threshold otherwise.
fn requirement(exp: &Experiment, v: usize) -> f64 {
    match &exp.spec().messages {
        MessageSetup::Binned {
            source,
            l,
            s_bits,
            delta,
        } if source.message_count() == 1 => {
            let h = source.cond_entropy(&[0], v).unwrap_or(f64::NAN);
            (*l as f64 / *s_bits as f64) * (h + delta)
        }
        _ => exp.thresholds()[v] as f64,
    }
}

fn node_bound(exp: &Experiment, params: &FloodParams, v: usize, eps: f64) -> f64 {
    match &exp.spec().messages {
        MessageSetup::Plain { .. } => spreading_bound(params, exp.header_dim() as f64, eps),
        MessageSetup::Binned { .. } => coded_bound(params, requirement(exp, v), eps / 2.0),
    }
}

fn max_time(mut times: impl Iterator<Item = Option<u32>>) -> Option<u32> {
    times.try_fold(0, |acc, t| Some(acc.max(t?)))
}

fn gossip_run(cfg: &RunConfig) -> Result<Report, RunError> {
    let exp = gossip_experiment(cfg).map_err(config_err)?;
    let g = cfg.gossip.as_ref().expect("checked by gossip_experiment");
    let flood = match &g.flood_params {
        Some(p) => Some(formats::read_flood_record(p).map_err(config_err)?),
        None => None,
    };
    if let Some(f) = &flood {
        if f.q != cfg.q {
            return Err(config_err(anyhow!(
                "flood parameters were estimated at q = {}, run uses q = {}",
                f.q,
                cfg.q
            )));
        }
    }
    let params = flood.as_ref().map(FloodRecord::params);
    let eps = g.epsilon;
    let results = run_trials(&exp)?;
    let stop = exp.spec().stop;
    let times: Vec<Option<u32>> = results.iter().map(|r| r.stopping_time(stop)).collect();
    let timeouts = times.iter().filter(|t| t.is_none()).count();
    let n = exp.spec().model.node_count();

    let bound = params.as_ref().map(|p| match stop {
        StopRule::AllNodes => (0..n)
            .map(|v| node_bound(&exp, p, v, eps))
            .fold(f64::MIN, f64::max),
        StopRule::Node(v) => node_bound(&exp, p, v, eps),
    });
    let mut probs = vec![0.5, 0.9, 1.0 - eps];
    probs.sort_by(f64::total_cmp);
    probs.dedup();
    let summary = ncgossip_core::engine::summarize(&times, &probs, bound);

    // classes: non-source nodes grouped by threshold
    let starts: Vec<bool> = (0..n)
        .map(|v| exp.spec().placement.iter().any(|p| p.contains(&v)))
        .collect();
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in (0..n).filter(|&v| !starts[v]) {
        classes.entry(exp.thresholds()[v]).or_default().push(v);
    }
    let class_json: Vec<Value> = classes
        .iter()
        .map(|(&threshold, nodes)| {
            let pooled: Vec<Option<u32>> = results
                .iter()
                .flat_map(|r| nodes.iter().map(|&v| r.decode_round[v]))
                .collect();
            let class_times: Vec<Option<u32>> = results
                .iter()
                .map(|r| max_time(nodes.iter().map(|&v| r.decode_round[v])))
                .collect();
            let r = requirement(&exp, nodes[0]);
            let cb = params.as_ref().map(|p| {
                nodes
                    .iter()
                    .map(|&v| node_bound(&exp, p, v, eps))
                    .fold(f64::MIN, f64::max)
            });
            json!({
                "threshold": threshold,
                "nodes": nodes.len(),
                "requirement": r,
                "median": quantile(&pooled, 0.5),
                "quantile": quantile(&class_times, 1.0 - eps),
                "bound": cb,
                "exceedance": cb.map(|b| ncgossip_core::stats::exceedance(&class_times, b)),
            })
        })
        .collect();

    let hash = cfg.hash();
    let mut csv = Csv::new(
        &hash,
        cfg.seed,
        &["trial", "node", "threshold", "decode_round"],
    );
    for r in &results {
        for (v, d) in r.decode_round.iter().enumerate() {
            csv.row([
                r.trial.to_string(),
                v.to_string(),
                exp.thresholds()[v].to_string(),
                opt(*d),
            ]);
        }
    }
    csv.write(&cfg.out_dir.join("trials.csv")).map_err(io_err)?;

    let mut stops = Csv::new(&hash, cfg.seed, &["trial", "stop_round"]);
    for (r, t) in results.iter().zip(&times) {
        stops.row([r.trial.to_string(), opt(*t)]);
    }
    stops
        .write(&cfg.out_dir.join("stop_times.csv"))
        .map_err(io_err)?;

    if !exp.spec().trace_nodes.is_empty() {
        let mut trace = Csv::new(&hash, cfg.seed, &["trial", "node", "round", "rank"]);
        for r in &results {
            for (row, &v) in r.rank_trace.iter().zip(&exp.spec().trace_nodes) {
                for (t, rank) in row.iter().enumerate() {
                    trace.row([r.trial, v, t, *rank as usize]);
                }
            }
        }
        trace
            .write(&cfg.out_dir.join("rank_trace.csv"))
            .map_err(io_err)?;
    }

    let quantiles: Vec<Value> = summary
        .quantiles
        .iter()
        .map(|(p, q)| json!({ "p": p, "round": q }))
        .collect();
    let json = json!({
        "config_hash": hash,
        "seed": cfg.seed,
        "trials": summary.trials,
        "timeouts": timeouts,
        "header_dim": exp.header_dim(),
        "thresholds": exp.thresholds(),
        "epsilon": eps,
        "quantiles": quantiles,
        "bound": summary.bound,
        "exceedance": summary.exceedance,
        "flood": flood.as_ref().map(|f| json!({ "T": f.t, "alpha": f.alpha })),
        "classes": class_json,
    });
    write_json(&cfg.out_dir.join("gossip.json"), &json).map_err(io_err)?;
    Ok(Report {
        timeouts,
        headline: json!({
            "median": quantile(&times, 0.5),
            "quantile": quantile(&times, 1.0 - eps),
            "bound": summary.bound,
            "exceedance": summary.exceedance,
        }),
    })
}

fn capacity_scan(cfg: &RunConfig) -> Result<Report, RunError> {
    let c = cfg
        .capacity
        .as_ref()
        .ok_or_else(|| config_err(anyhow!("missing [capacity] table")))?;
    let model = cfg.model().map_err(config_err)?;
    let rates = c
        .demands
        .iter()
        .map(|s| formats::parse_rate(s))
        .collect::<anyhow::Result<Vec<_>>>()
        .map_err(config_err)?;
    let rates = match rates.len() {
        1 => vec![rates[0]; c.sources.len()],
        _ => rates,
    };
    let demand = CapacityDemand::new(c.sources.clone(), rates, c.sink).map_err(config_err)?;
    for &v in demand.sources.iter().chain([&demand.sink]) {
        if v >= model.node_count() {
            return Err(config_err(anyhow!(
                "capacity node {v} out of range for {} nodes",
                model.node_count()
            )));
        }
    }
    let outcomes: Vec<_> = (0..c.trials)
        .into_par_iter()
        .map(|i| {
            let seed = child_seed(cfg.seed, Domain::Trial, i as u64);
            match first_feasible_time(&model, &demand, c.max_rounds, seed, c.max_denominator) {
                Ok((t, f)) => Ok(Some((t, f))),
                Err(CapacityError::Timeout { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(config_err)?;

    let hash = cfg.hash();
    let mut csv = Csv::new(&hash, cfg.seed, &["trial", "first_feasible_time"]);
    let mut dump = format!("# config_hash={hash} seed={}\n", cfg.seed);
    let mut invalid = Vec::new();
    for (i, o) in outcomes.iter().enumerate() {
        csv.row([i.to_string(), opt(o.as_ref().map(|(t, _)| *t))]);
        if let Some((t, f)) = o {
            let graph = ncgossip_core::TimeExpandedGraph::from_active(
                model.node_count(),
                &model
                    .rounds(child_seed(cfg.seed, Domain::Trial, i as u64))
                    .take(*t as usize)
                    .collect::<Vec<_>>(),
            )
            .map_err(config_err)?;
            if !validate_paths(&f.paths, &graph, &demand) {
                invalid.push(i);
            }
            if c.dump_paths {
                dump.push_str(&format!("# trial {i}\n"));
                for p in &f.paths {
                    let hops: Vec<String> = p
                        .nodes
                        .iter()
                        .enumerate()
                        .map(|(t, v)| format!("{v}@{t}"))
                        .collect();
                    dump.push_str(&format!("path {}: {}\n", p.weight, hops.join(" ")));
                }
            }
        }
    }
    csv.write(&cfg.out_dir.join("capacity.csv"))
        .map_err(io_err)?;
    if c.dump_paths {
        crate::output::write_atomic(&cfg.out_dir.join("paths.txt"), dump.as_bytes())
            .map_err(io_err)?;
    }
    let times: Vec<Option<u32>> = outcomes
        .iter()
        .map(|o| o.as_ref().map(|(t, _)| *t))
        .collect();
    let timeouts = times.iter().filter(|t| t.is_none()).count();
    let median = if times.is_empty() {
        None
    } else {
        quantile(&times, 0.5)
    };
    let json = json!({
        "config_hash": hash,
        "seed": cfg.seed,
        "trials": times.len(),
        "timeouts": timeouts,
        "denominator": demand.denominator(),
        "median": median,
    });
    write_json(&cfg.out_dir.join("capacity.json"), &json).map_err(io_err)?;
    if !invalid.is_empty() {
        return Err(RunError::Invariant(format!(
            "witness paths failed validation in trials {invalid:?}"
        )));
    }
    Ok(Report {
        timeouts,
        headline: json!({ "median": median }),
    })
}

fn lemma4(cfg: &RunConfig) -> Result<Report, RunError> {
    let mut rows = Vec::new();
    for &q in &cfg.lemma4.q {
        let field = field_of_order(q).map_err(config_err)?;
        for &ambient in &cfg.lemma4.ambient {
            for &h in cfg.lemma4.h.iter().filter(|&&h| h < ambient) {
                rows.push(verify_lemma4(&field, ambient, h).map_err(config_err)?);
            }
        }
    }
    let hash = cfg.hash();
    let mut csv = Csv::new(
        &hash,
        cfg.seed,
        &[
            "q",
            "ambient",
            "h",
            "witnesses",
            "subspaces_checked",
            "verified",
        ],
    );
    println!(
        "{:>4} {:>8} {:>3} {:>10} {:>10} {:>9}",
        "q", "ambient", "h", "witnesses", "checked", "verified"
    );
    for r in &rows {
        println!(
            "{:>4} {:>8} {:>3} {:>10} {:>10} {:>9}",
            r.q,
            r.ambient_dim,
            r.h,
            r.witnesses.len(),
            r.subspaces_checked,
            r.verified
        );
        csv.row([
            r.q.to_string(),
            r.ambient_dim.to_string(),
            r.h.to_string(),
            r.witnesses.len().to_string(),
            r.subspaces_checked.to_string(),
            r.verified.to_string(),
        ]);
    }
    csv.write(&cfg.out_dir.join("lemma4.csv")).map_err(io_err)?;
    let failed: Vec<_> = rows
        .iter()
        .filter(|r| !r.verified)
        .map(|r| (r.q, r.ambient_dim, r.h))
        .collect();
    if !failed.is_empty() {
        return Err(RunError::Invariant(format!(
            "witness sets failed for (q, ambient, h) in {failed:?}"
        )));
    }
    Ok(Report {
        timeouts: 0,
        headline: json!({ "rows": rows.len(), "verified": true }),
    })
}

fn value_label(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn sweep(cfg: &RunConfig, tree: &toml::Value, base: &Path) -> Result<Report, RunError> {
    let s = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| config_err(anyhow!("missing [sweep] table")))?;
    let command = Command::parse(&s.command)
        .filter(|c| *c != Command::Sweep)
        .ok_or_else(|| {
            config_err(anyhow!(
                "sweep.command {:?} is not a runnable subcommand",
                s.command
            ))
        })?;
    let mut entries = Vec::new();
    let mut timeouts = 0;
    for value in &s.values {
        let label = value_label(value);
        let mut sub = tree.clone();
        if let Some(t) = sub.as_table_mut() {
            t.remove("sweep");
        }
        config::set_key(&mut sub, &s.key, value.clone()).map_err(config_err)?;
        let out =
            std::path::absolute(cfg.out_dir.join(format!("{}={label}", s.key))).map_err(io_err)?;
        config::set_key(
            &mut sub,
            "out_dir",
            toml::Value::String(out.to_string_lossy().into_owned()),
        )
        .map_err(config_err)?;
        let sub_cfg = config::from_tree(&sub, base).map_err(config_err)?;
        let report = run(command, &sub_cfg, &sub, base)?;
        timeouts += report.timeouts;
        entries.push(json!({
            "value": label,
            "config_hash": sub_cfg.hash(),
            "timeouts": report.timeouts,
            "result": report.headline,
        }));
    }
    let json = json!({
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "command": s.command,
        "key": s.key,
        "runs": entries,
    });
    write_json(&cfg.out_dir.join("sweep_summary.json"), &json).map_err(io_err)?;
    Ok(Report {
        timeouts,
        headline: json,
    })
}
