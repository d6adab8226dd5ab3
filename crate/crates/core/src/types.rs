//! Domain values shared by every stage of the memory engine.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logical time: the global turn index of a dialogue.
pub type Tick = u64;

const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MentionId(pub u64);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueTurn {
    pub turn_id: u64,
    pub session_id: u64,
    pub speaker: String,
    pub text: String,
    pub time: Tick,
}

/// A unit-norm embedding. Construction normalizes; deserialization only
/// checks the norm so stored bit patterns survive a round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// L2-normalizes `values`. Zero, empty, or non-finite input is rejected.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("embedding has zero dimension"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding has non-finite component"));
        }
        let norm = l2_norm(&values);
        if norm == 0.0 {
            return Err(Error::invalid("cannot normalize a zero vector"));
        }
        Ok(Embedding(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        dot(&self.0, &other.0)
    }

    /// Unit-normalized arithmetic mean.
    pub fn mean<'a, I>(items: I) -> Result<Embedding>
    where
        I: IntoIterator<Item = &'a Embedding>,
    {
        let mut iter = items.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::invalid("mean of an empty embedding set"))?;
        let mut acc = first.0.clone();
        let mut count = 1usize;
        for e in iter {
            if e.dim() != acc.len() {
                return Err(Error::invalid("dimension mismatch in mean"));
            }
            for (a, v) in acc.iter_mut().zip(&e.0) {
                *a += v;
            }
            count += 1;
        }
        let n = count as f64;
        Embedding::new(acc.into_iter().map(|v| v / n).collect())
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("stored embedding is empty or non-finite"));
        }
        let norm = l2_norm(&values);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::invalid(format!("stored embedding has norm {norm}")));
        }
        Ok(Embedding(values))
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(cosine_unchecked(a, b))
}

pub(crate) fn cosine_unchecked(a: &Embedding, b: &Embedding) -> f64 {
    let denom = l2_norm(&a.0) * l2_norm(&b.0);
    (a.dot(b) / denom).clamp(-1.0, 1.0)
}

/// Softmax of `scale * logits`, shifted by the max for stability.
pub fn softmax(logits: &[f64], scale: f64) -> Vec<f64> {
    let scaled: Vec<f64> = logits.iter().map(|l| scale * l).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Four-decimal fixed point, ties to even on the exact binary value;
/// negative zero prints as `0.0000`.
pub fn fixed4(x: f64) -> String {
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

/// A contiguous span of one turn expressing one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMention {
    pub mention_id: MentionId,
    pub turn_id: u64,
    pub time: Tick,
    /// Character (not byte) offsets, half-open.
    pub span: (usize, usize),
    pub text: String,
    pub embedding: Embedding,
    /// Set when the mention carries an explicit time reference.
    pub temporal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventNode {
    pub node_id: NodeId,
    pub members: Vec<MentionId>,
    pub centroid: Embedding,
    pub first_seen: Tick,
    pub last_updated: Tick,
    pub access_count: u64,
    pub layer: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Sequential,
    Temporal,
    Reasoning,
    Interlayer,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EdgeKind::Sequential => "Sequential",
            EdgeKind::Temporal => "Temporal",
            EdgeKind::Reasoning => "Reasoning",
            EdgeKind::Interlayer => "Interlayer",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypedEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: EdgeKind,
    pub weight: f64,
}

impl TypedEdge {
    pub fn new(src: NodeId, dst: NodeId, kind: EdgeKind, weight: f64) -> Result<Self> {
        if src == dst {
            return Err(Error::invalid(format!("self-loop on node {src}")));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::invalid(format!("edge weight {weight} outside [0, 1]")));
        }
        Ok(TypedEdge {
            src,
            dst,
            kind,
            weight,
        })
    }

    pub(crate) fn key(&self) -> (NodeId, NodeId, EdgeKind) {
        (self.src, self.dst, self.kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn basis(dim: usize, i: usize) -> Embedding {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Embedding::new(v).unwrap()
    }

    #[test]
    fn cosine_identity_orthogonal_antipodal() {
        let v = Embedding::new(vec![0.3, -1.2, 4.0, 0.1]).unwrap();
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() <= 1e-12);
        assert_eq!(cosine(&basis(3, 0), &basis(3, 2)).unwrap(), 0.0);
        let neg = Embedding::new(v.as_slice().iter().map(|x| -x).collect()).unwrap();
        assert!((cosine(&v, &neg).unwrap() + 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cosine_rejects_dimension_mismatch() {
        assert!(matches!(
            cosine(&basis(3, 0), &basis(4, 0)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn fixed4_rounds_half_even_and_drops_negative_zero() {
        assert_eq!(fixed4(0.03125), "0.0312");
        assert_eq!(fixed4(0.96875), "0.9688");
        assert_eq!(fixed4(-0.00001), "0.0000");
        assert_eq!(fixed4(1.0), "1.0000");
    }

    #[test]
    fn zero_vector_rejected() {
        assert!(Embedding::new(vec![0.0; 4]).is_err());
        assert!(Embedding::new(vec![]).is_err());
        assert!(Embedding::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn deserialization_keeps_bits_and_checks_norm() {
        let v = Embedding::new(vec![1.0, 2.0, 3.0]).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Embedding = serde_json::from_str(&json).unwrap();
        assert_eq!(v, back);
        assert!(serde_json::from_str::<Embedding>("[2.0, 0.0]").is_err());
    }

    #[test]
    fn edge_constructor_checks_invariants() {
        assert!(TypedEdge::new(NodeId(1), NodeId(1), EdgeKind::Sequential, 1.0).is_err());
        assert!(TypedEdge::new(NodeId(1), NodeId(2), EdgeKind::Reasoning, 1.5).is_err());
        assert!(TypedEdge::new(NodeId(1), NodeId(2), EdgeKind::Reasoning, 0.7).is_ok());
    }

    proptest! {
        #[test]
        fn constructed_embeddings_are_unit(values in prop::collection::vec(-10.0f64..10.0, 1..32)) {
            if let Ok(e) = Embedding::new(values) {
                prop_assert!((l2_norm(e.as_slice()) - 1.0).abs() <= 1e-9);
            }
        }

        #[test]
        fn cosine_is_symmetric(
            a in prop::collection::vec(-1.0f64..1.0, 8),
            b in prop::collection::vec(-1.0f64..1.0, 8),
        ) {
            if let (Ok(a), Ok(b)) = (Embedding::new(a), Embedding::new(b)) {
                let ab = cosine(&a, &b).unwrap();
                let ba = cosine(&b, &a).unwrap();
                prop_assert!((ab - ba).abs() <= 1e-12);
                prop_assert!((-1.0..=1.0).contains(&ab));
            }
        }
    }
}
