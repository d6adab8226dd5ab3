use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Engine configuration. Field names are the on-disk JSON names; any field
/// may be omitted from a config file and falls back to its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Embedding dimension.
    pub dim: usize,
    /// Cluster threshold.
    pub delta: f64,
    /// Reasoning-link threshold.
    pub theta: f64,
    /// Interlayer update threshold.
    pub beta: f64,
    /// Recency decay per tick.
    pub gamma: f64,
    pub alpha_damp: f64,
    /// Temperature of the context-vector softmax.
    pub eps_temp: f64,
    /// Recency, relevance, structural.
    pub omega: [f64; 3],
    /// Uniqueness, future reference, cost.
    pub lambda: [f64; 3],
    pub max_nodes: usize,
    pub k: usize,
    /// Turns on each side of a mention used as its context.
    pub context_window: usize,
    pub pagerank_tol: f64,
    /// Only the most recent segments are scored at retrieval; `None` scores all.
    pub max_sessions: Option<usize>,
    /// Summary attention vector; `None` uses the mean of the segment centroids.
    pub summary_w: Option<Vec<f64>>,
    /// Weights of the update and outdated terms of TUA.
    pub tua_lambda: [f64; 2],
    pub embed_url: Option<String>,
    pub strategies: StrategyNames,
    pub lexicons: LexiconPaths,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            dim: 256,
            delta: 0.8,
            theta: 0.6,
            beta: 0.85,
            gamma: 0.05,
            alpha_damp: 0.85,
            eps_temp: 1.0,
            omega: [0.2, 0.5, 0.3],
            lambda: [0.5, 0.3, 0.2],
            max_nodes: 30,
            k: 5,
            context_window: 2,
            pagerank_tol: 1e-10,
            max_sessions: Some(5),
            summary_w: None,
            tua_lambda: [0.5, 0.5],
            embed_url: None,
            strategies: StrategyNames::default(),
            lexicons: LexiconPaths::default(),
        }
    }
}

/// Registry names of the pluggable strategies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyNames {
    pub embedder: String,
    pub detector: String,
    pub future: String,
    pub compatibility: String,
    pub update_adjust: String,
    pub omega_policy: String,
    pub judge: String,
}

impl Default for StrategyNames {
    fn default() -> Self {
        StrategyNames {
            embedder: "hashing".into(),
            detector: "lexicon".into(),
            future: "frequency-recency".into(),
            compatibility: "unit".into(),
            update_adjust: "identity".into(),
            omega_policy: "fixed".into(),
            judge: "identity".into(),
        }
    }
}

/// Optional lexicon overrides; unset entries use the built-in lists.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconPaths {
    pub filler: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub discourse_markers: Option<PathBuf>,
    pub temporal: Option<PathBuf>,
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")))
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be positive".into()));
        }
        open_unit("delta", self.delta)?;
        open_unit("theta", self.theta)?;
        open_unit("beta", self.beta)?;
        open_unit("alpha_damp", self.alpha_damp)?;
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.eps_temp >= 0.0 && self.eps_temp.is_finite()) {
            return Err(Error::Config(format!(
                "eps_temp must be >= 0, got {}",
                self.eps_temp
            )));
        }
        validate_omega(&self.omega)?;
        if self.lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::Config("lambda must be finite".into()));
        }
        if self.max_nodes == 0 {
            return Err(Error::Config("max_nodes must be >= 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if !(self.pagerank_tol > 0.0) {
            return Err(Error::Config("pagerank_tol must be > 0".into()));
        }
        if self.max_sessions == Some(0) {
            return Err(Error::Config("max_sessions must be >= 1".into()));
        }
        if let Some(w) = &self.summary_w {
            if w.len() != self.dim {
                return Err(Error::Config(format!(
                    "summary_w has dimension {}, expected {}",
                    w.len(),
                    self.dim
                )));
            }
        }
        let [l1, l2] = self.tua_lambda;
        if !(l1 >= 0.0 && l2 >= 0.0 && l1 + l2 <= 1.0) {
            return Err(Error::Config(
                "tua_lambda must be non-negative with sum <= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: EngineConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

pub fn validate_omega(omega: &[f64; 3]) -> Result<()> {
    if omega.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Config("omega components must be >= 0".into()));
    }
    if omega.iter().all(|w| *w == 0.0) {
        return Err(Error::Config("omega must not be all zero".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_validate() {
        let cfg = EngineConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.delta, cfg.theta, cfg.beta), (0.8, 0.6, 0.85));
        assert_eq!(cfg.max_nodes, 30);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = EngineConfig::from_json(r#"{"delta": 0.7, "k": 3}"#).unwrap();
        assert_eq!(cfg.delta, 0.7);
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.theta, 0.6);
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(EngineConfig::from_json(r#"{"deltaa": 0.7}"#).is_err());
    }

    #[test]
    fn omega_all_zero_rejected() {
        let cfg = EngineConfig {
            omega: [0.0; 3],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    fn with(f: impl Fn(&mut EngineConfig)) -> EngineConfig {
        let mut cfg = EngineConfig::default();
        f(&mut cfg);
        cfg
    }

    proptest! {
        #[test]
        fn open_unit_fields_fuzzed_across_boundary(v in -0.5f64..1.5) {
            let inside = v > 0.0 && v < 1.0;
            prop_assert_eq!(with(|c| c.delta = v).validate().is_ok(), inside);
            prop_assert_eq!(with(|c| c.theta = v).validate().is_ok(), inside);
            prop_assert_eq!(with(|c| c.beta = v).validate().is_ok(), inside);
            prop_assert_eq!(with(|c| c.alpha_damp = v).validate().is_ok(), inside);
        }

        #[test]
        fn positive_fields_fuzzed_across_boundary(v in -1.0f64..1.0) {
            prop_assert_eq!(with(|c| c.gamma = v).validate().is_ok(), v > 0.0);
            prop_assert_eq!(with(|c| c.eps_temp = v).validate().is_ok(), v >= 0.0);
            prop_assert_eq!(with(|c| c.omega[1] = v).validate().is_ok(), v >= 0.0);
        }

        #[test]
        fn integer_fields_fuzzed_across_boundary(n in 0usize..3) {
            prop_assert_eq!(with(|c| c.max_nodes = n).validate().is_ok(), n >= 1);
            prop_assert_eq!(with(|c| c.k = n).validate().is_ok(), n >= 1);
            prop_assert_eq!(with(|c| c.dim = n).validate().is_ok(), n >= 1);
        }
    }
}
