use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{fixed4, NodeId};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldTurn {
    pub turn_id: u64,
    #[serde(default)]
    pub core: Option<NodeId>,
    #[serde(default)]
    pub supporting: BTreeSet<NodeId>,
    #[serde(default)]
    pub updates: BTreeSet<(NodeId, NodeId)>,
    #[serde(default)]
    pub outdated: BTreeSet<NodeId>,
}

impl GoldTurn {
    pub fn referenced_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.core
            .iter()
            .copied()
            .chain(self.supporting.iter().copied())
            .chain(self.updates.iter().flat_map(|(a, b)| [*a, *b]))
            .chain(self.outdated.iter().copied())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldAnnotation {
    pub turns: Vec<GoldTurn>,
}

/// One JSON object per non-blank line; errors carry the 1-based line number.
pub fn parse_gold_jsonl(text: &str) -> Result<GoldAnnotation> {
    let mut turns = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t: GoldTurn = serde_json::from_str(line)
            .map_err(|e| Error::invalid(format!("gold line {}: {e}", i + 1)))?;
        turns.push(t);
    }
    Ok(GoldAnnotation { turns })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictedTurn {
    pub core: Option<NodeId>,
    pub supporting: BTreeSet<NodeId>,
    pub updates: BTreeSet<(NodeId, NodeId)>,
    pub outdated: BTreeSet<NodeId>,
}

/// Maps a raw coherence product to a judged score.
pub trait CoherenceJudge: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, x: f64) -> f64;
}

pub struct IdentityJudge;

impl CoherenceJudge for IdentityJudge {
    fn name(&self) -> &str {
        "identity"
    }

    fn score(&self, x: f64) -> f64 {
        x
    }
}

fn aligned<'a>(
    preds: &'a [PredictedTurn],
    gold: &'a GoldAnnotation,
) -> Result<impl Iterator<Item = (&'a PredictedTurn, &'a GoldTurn)>> {
    if preds.len() != gold.turns.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} gold turns",
            preds.len(),
            gold.turns.len()
        )));
    }
    Ok(preds.iter().zip(&gold.turns))
}

fn ratio(num: usize, den: usize, what: &str) -> Result<f64> {
    if den == 0 {
        return Err(Error::UndefinedMetric(format!("{what}: zero denominator")));
    }
    Ok(num as f64 / den as f64)
}

/// Correct core predictions over turns that have a gold core event.
pub fn cea(preds: &[PredictedTurn], gold: &GoldAnnotation) -> Result<f64> {
    let (mut hit, mut total) = (0, 0);
    for (p, g) in aligned(preds, gold)? {
        if let Some(core) = g.core {
            total += 1;
            if p.core == Some(core) {
                hit += 1;
            }
        }
    }
    ratio(hit, total, "CEA")
}

/// Recalled-over-recalled factor: non-empty predictions over non-empty
/// predictions, as printed in the metric definition.
fn recalled_factor(preds: &[PredictedTurn]) -> Result<f64> {
    let recalled = preds.iter().filter(|p| !p.supporting.is_empty()).count();
    let non_empty = preds.iter().filter(|p| !p.supporting.is_empty()).count();
    ratio(recalled, non_empty, "supporting recall")
}

pub fn sec(preds: &[PredictedTurn], gold: &GoldAnnotation) -> Result<f64> {
    let (mut exact, mut with_gold) = (0, 0);
    for (p, g) in aligned(preds, gold)? {
        if !g.supporting.is_empty() {
            with_gold += 1;
            if p.supporting == g.supporting {
                exact += 1;
            }
        }
    }
    Ok(ratio(exact, with_gold, "SEC")? * recalled_factor(preds)?)
}

pub fn ec(preds: &[PredictedTurn], gold: &GoldAnnotation, judge: &dyn CoherenceJudge) -> Result<f64> {
    let core = cea(preds, gold)?;
    Ok(judge.score(recalled_factor(preds)? * core))
}

/// Weighted update/outdated agreement over turns with a gold core event.
/// Requires `l1, l2 >= 0` and `l1 + l2 <= 1` so the result stays in [0, 1].
pub fn tua(preds: &[PredictedTurn], gold: &GoldAnnotation, l1: f64, l2: f64) -> Result<f64> {
    if !(l1 >= 0.0 && l2 >= 0.0 && l1 + l2 <= 1.0) {
        return Err(Error::invalid("TUA weights must be non-negative with sum <= 1"));
    }
    let (mut num, mut den) = (0.0, 0usize);
    for (p, g) in aligned(preds, gold)? {
        if g.core.is_none() {
            continue;
        }
        den += 1;
        if p.updates == g.updates {
            num += l1;
        }
        if p.outdated == g.outdated {
            num += l2;
        }
    }
    if den == 0 {
        return Err(Error::UndefinedMetric("TUA: zero denominator".into()));
    }
    Ok(num / den as f64)
}

/// `None` marks an undefined metric and serializes as `null`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub cea: Option<f64>,
    pub sec: Option<f64>,
    pub ec: Option<f64>,
    pub tua: Option<f64>,
    /// Deletion rate (as written) to mean recall.
    pub br: BTreeMap<String, f64>,
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

impl MetricsReport {
    pub fn compute(
        preds: &[PredictedTurn],
        gold: &GoldAnnotation,
        judge: &dyn CoherenceJudge,
        tua_lambda: [f64; 2],
    ) -> Result<Self> {
        Ok(MetricsReport {
            cea: defined(cea(preds, gold))?,
            sec: defined(sec(preds, gold))?,
            ec: defined(ec(preds, gold, judge))?,
            tua: defined(tua(preds, gold, tua_lambda[0], tua_lambda[1]))?,
            br: BTreeMap::new(),
        })
    }

    /// Single-line JSON with four-decimal fixed-point values.
    pub fn to_json(&self) -> String {
        let field = |v: Option<f64>| v.map_or_else(|| "null".to_string(), fixed4);
        let br: Vec<String> = self
            .br
            .iter()
            .map(|(k, v)| format!("{}:{}", serde_json::Value::from(k.as_str()), fixed4(*v)))
            .collect();
        format!(
            "{{\"CEA\":{},\"SEC\":{},\"EC\":{},\"TUA\":{},\"BR\":{{{}}}}}",
            field(self.cea),
            field(self.sec),
            field(self.ec),
            field(self.tua),
            br.join(",")
        )
    }
}
