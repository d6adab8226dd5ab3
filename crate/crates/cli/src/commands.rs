use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ew_core::evaluation::{br_table, parse_gold_jsonl, GoldAnnotation, MetricsReport, PredictedTurn, QuerySource};
use ew_core::pipeline::{build_memory, predict_turn, retrieve_text};
use ew_core::preservation::prune_memory;
use ew_core::registry::{apply_embed_env, Rest};
use ew_core::types::fixed4;
use ew_core::{EdgeKind, EngineConfig, Error, LayeredGraph, NodeId, Strategies};

use crate::error::{CliError, EXIT_NO_EDGES, EXIT_UNRESOLVED_GOLD};
use crate::snapshot::GraphSnapshot;
use crate::transcript::{parse_transcript, turns};

/// Flags shared by every command. Applied on top of the config file (or
/// the snapshot's config when no file is given).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub k: Option<usize>,
    pub omega: Option<[f64; 3]>,
    pub seed: Option<u64>,
    pub json: bool,
    /// `Some(0)` scores every segment.
    pub max_sessions: Option<usize>,
    pub embedder: Option<String>,
    /// Value of the embedding-service environment variable.
    pub embed_url: Option<String>,
}

impl Overrides {
    pub fn resolve(&self, base: Option<&EngineConfig>) -> Result<EngineConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => EngineConfig::load(path)?,
            None => base.cloned().unwrap_or_default(),
        };
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(omega) = self.omega {
            cfg.omega = omega;
        }
        if let Some(m) = self.max_sessions {
            cfg.max_sessions = (m > 0).then_some(m);
        }
        apply_embed_env(&mut cfg, self.embed_url.clone());
        if let Some(name) = &self.embedder {
            cfg.strategies.embedder = name.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

pub fn parse_omega(s: &str) -> Result<[f64; 3], String> {
    let parts = parse_list(s)?;
    <[f64; 3]>::try_from(parts).map_err(|_| "expected three comma-separated weights r,v,s".to_string())
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{}` is not a number", p.trim()))
        })
        .collect()
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

fn rest_for(cfg: &EngineConfig) -> Result<Rest, CliError> {
    Ok(Strategies::from_config(cfg)?.split_extractor().1)
}

fn count_kind(lg: &LayeredGraph, kind: EdgeKind) -> usize {
    lg.segments
        .iter()
        .flat_map(|s| &s.edges)
        .filter(|e| e.kind == kind)
        .count()
}

pub fn cmd_build(transcript: &Path, out: &Path, ov: &Overrides) -> Result<String, CliError> {
    let cfg = ov.resolve(None)?;
    let records = parse_transcript(&read(transcript)?)?;
    let (memory, stats) = build_memory(&records, &cfg)?;
    let snap = GraphSnapshot::new(cfg, records, memory);
    snap.save(out)?;
    Ok(format!(
        "nodes={} edges={} interlayer={} segments={} pruned={}\n",
        snap.memory.node_count(),
        snap.memory.edge_count(),
        snap.memory.interlayer.len(),
        stats.segments,
        stats.pruned
    ))
}

pub fn cmd_retrieve(snapshot: &Path, query: &str, ov: &Overrides) -> Result<String, CliError> {
    let snap = GraphSnapshot::load(snapshot)?;
    let cfg = ov.resolve(Some(&snap.config))?;
    if snap.memory.node_count() == 0 {
        return Err(Error::EmptyMemory.into());
    }
    let rest = rest_for(&cfg)?;
    let ctx = retrieve_text(&snap.memory, query, &cfg, &rest)?;
    if ov.json {
        let mut s = serde_json::to_string(&ctx.selected).expect("scores serialize");
        s.push('\n');
        Ok(s)
    } else {
        Ok(ctx.prompt)
    }
}

/// Gold turn ids missing from the transcript and gold node ids missing
/// from the memory.
pub fn unresolved_gold(snap: &GraphSnapshot, gold: &GoldAnnotation) -> Vec<String> {
    let turn_ids: BTreeSet<u64> = turns(&snap.transcript).map(|t| t.turn_id).collect();
    let mut offenders = Vec::new();
    for g in &gold.turns {
        if !turn_ids.contains(&g.turn_id) {
            offenders.push(format!("turn {}", g.turn_id));
        }
        let missing: BTreeSet<NodeId> = g
            .referenced_ids()
            .filter(|id| snap.memory.node(*id).is_none())
            .collect();
        offenders.extend(missing.iter().map(|id| format!("node {id} (turn {})", g.turn_id)));
    }
    offenders
}

fn predictions(
    snap: &GraphSnapshot,
    gold: &GoldAnnotation,
    cfg: &EngineConfig,
    rest: &Rest,
) -> Result<Vec<PredictedTurn>, CliError> {
    let text: BTreeMap<u64, &str> = turns(&snap.transcript)
        .map(|t| (t.turn_id, t.text.as_str()))
        .collect();
    gold.turns
        .iter()
        .map(|g| match predict_turn(&snap.memory, text[&g.turn_id], cfg, rest) {
            Ok(p) => Ok(p),
            Err(Error::InvalidInput(_)) => Ok(PredictedTurn::default()),
            Err(e) => Err(e.into()),
        })
        .collect()
}

pub fn cmd_eval(
    snapshot: &Path,
    gold: &Path,
    rates: &[f64],
    runs: usize,
    ov: &Overrides,
) -> Result<String, CliError> {
    let snap = GraphSnapshot::load(snapshot)?;
    let cfg = ov.resolve(Some(&snap.config))?;
    let gold = parse_gold_jsonl(&read(gold)?)?;
    let offenders = unresolved_gold(&snap, &gold);
    if !offenders.is_empty() {
        return Err(CliError::new(
            EXIT_UNRESOLVED_GOLD,
            format!("unresolvable gold ids: {}", offenders.join(", ")),
        ));
    }
    if snap.memory.node_count() == 0 {
        return Err(Error::EmptyMemory.into());
    }
    let rest = rest_for(&cfg)?;
    let preds = predictions(&snap, &gold, &cfg, &rest)?;
    let mut report = MetricsReport::compute(&preds, &gold, rest.judge.as_ref(), cfg.tua_lambda)?;
    if !rates.is_empty() {
        for row in br_rows(&snap.memory, rates, runs, &cfg, ov)? {
            report.br.insert(row.rate.to_string(), row.mean);
        }
    }
    let mut s = report.to_json();
    s.push('\n');
    Ok(s)
}

fn br_rows(
    lg: &LayeredGraph,
    rates: &[f64],
    runs: usize,
    cfg: &EngineConfig,
    ov: &Overrides,
) -> Result<Vec<ew_core::evaluation::BrRow>, CliError> {
    if lg.edge_count() == 0 {
        return Err(CliError::new(EXIT_NO_EDGES, "memory has no base-layer edges"));
    }
    if runs == 0 {
        return Err(CliError::parse("--runs must be >= 1"));
    }
    let seeds: Vec<u64> = (0..runs as u64).map(|i| ov.seed().wrapping_add(i)).collect();
    Ok(br_table(lg, rates, &seeds, &QuerySource::FromDeleted, cfg)?)
}

pub fn cmd_br(snapshot: &Path, rates: &[f64], runs: usize, ov: &Overrides) -> Result<String, CliError> {
    let snap = GraphSnapshot::load(snapshot)?;
    let cfg = ov.resolve(Some(&snap.config))?;
    let rows = br_rows(&snap.memory, rates, runs, &cfg, ov)?
        .iter()
        .map(|r| {
            format!(
                "{{\"rate\":{},\"mean\":{},\"std\":{}}}",
                serde_json::Value::from(r.rate),
                fixed4(r.mean),
                fixed4(r.std)
            )
        })
        .collect::<Vec<_>>();
    Ok(format!(
        "{{\"k\":{},\"runs\":{},\"seed\":{},\"rows\":[{}]}}\n",
        cfg.k,
        runs,
        ov.seed(),
        rows.join(",")
    ))
}

pub const SWEEP_PARAMS: [&str; 3] = ["delta", "theta", "beta"];

/// Rebuilds the snapshot's transcript once per value and tabulates graph
/// shape, plus metrics when gold is given. CSV on stdout.
pub fn cmd_sweep(
    snapshot: &Path,
    param: &str,
    values: &[f64],
    gold: Option<&Path>,
    ov: &Overrides,
) -> Result<String, CliError> {
    if !SWEEP_PARAMS.contains(&param) {
        return Err(CliError::parse(format!(
            "unknown sweep parameter `{param}` (expected one of {})",
            SWEEP_PARAMS.join(", ")
        )));
    }
    if values.is_empty() {
        return Err(CliError::parse("sweep needs at least one value"));
    }
    let snap = GraphSnapshot::load(snapshot)?;
    let base = ov.resolve(Some(&snap.config))?;
    let configs = values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            match param {
                "delta" => cfg.delta = v,
                "theta" => cfg.theta = v,
                _ => cfg.beta = v,
            }
            cfg.validate().map(|_| cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let gold = gold.map(|p| read(p).and_then(|t| Ok(parse_gold_jsonl(&t)?))).transpose()?;

    let mut out = format!("{param},nodes,edges,reasoning,interlayer,segments");
    if gold.is_some() {
        out.push_str(",CEA,SEC,EC,TUA");
    }
    out.push('\n');
    for (v, cfg) in values.iter().zip(&configs) {
        let (memory, stats) = build_memory(&snap.transcript, cfg)?;
        write!(
            out,
            "{v},{},{},{},{},{}",
            memory.node_count(),
            memory.edge_count(),
            count_kind(&memory, EdgeKind::Reasoning),
            memory.interlayer.len(),
            stats.segments
        )
        .expect("string write");
        if let Some(gold) = &gold {
            let rebuilt = GraphSnapshot::new(cfg.clone(), snap.transcript.clone(), memory);
            let cell = |m: Option<f64>| m.map_or_else(|| "null".to_string(), fixed4);
            if unresolved_gold(&rebuilt, gold).is_empty() && rebuilt.memory.node_count() > 0 {
                let rest = rest_for(cfg)?;
                let preds = predictions(&rebuilt, gold, cfg, &rest)?;
                let r = MetricsReport::compute(&preds, gold, rest.judge.as_ref(), cfg.tua_lambda)?;
                write!(out, ",{},{},{},{}", cell(r.cea), cell(r.sec), cell(r.ec), cell(r.tua))
                    .expect("string write");
            } else {
                out.push_str(",null,null,null,null");
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn cmd_prune(
    snapshot: &Path,
    budget: Option<usize>,
    out: Option<&Path>,
    ov: &Overrides,
) -> Result<String, CliError> {
    let mut snap = GraphSnapshot::load(snapshot)?;
    let cfg = ov.resolve(Some(&snap.config))?;
    let budget = budget.unwrap_or(cfg.max_nodes);
    let rest = rest_for(&cfg)?;
    let w = cfg.summary_w.clone().map(ew_core::Embedding::new).transpose()?;
    let removed = prune_memory(
        &mut snap.memory,
        cfg.lambda,
        budget,
        w.as_ref(),
        rest.future.as_ref(),
        rest.compatibility.as_ref(),
    )?;
    snap.save(out.unwrap_or(snapshot))?;
    if ov.json {
        let ids: Vec<u64> = removed.iter().map(|n| n.0).collect();
        return Ok(format!("{}\n", serde_json::to_string(&ids).expect("ids serialize")));
    }
    let ids: Vec<String> = removed.iter().map(|n| n.to_string()).collect();
    Ok(format!(
        "removed=[{}] nodes={} edges={}\n",
        ids.join(","),
        snap.memory.node_count(),
        snap.memory.edge_count()
    ))
}
