//! Named strategy registries.
//!
//! Every pluggable algorithm sits behind a trait object and is registered
//! under a name. Config files and CLI flags pick implementations by name.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use crate::config::EngineConfig;
use crate::embed::{Embedder, HashingEmbedder, RemoteEmbedder};
use crate::error::{Error, Result};
use crate::evaluation::{CoherenceJudge, IdentityJudge};
use crate::extraction::{EventDetector, Extractor, LexiconDetector, Lexicons};
use crate::hierarchy::{IdentityAdjuster, UpdateAdjuster};
use crate::preservation::{Compatibility, FrequencyRecency, FutureEstimator, UnitCompatibility};
use crate::retrieval::{FixedOmega, OmegaPolicy, TemporalBoost};
use crate::types::{cosine_unchecked, DialogueTurn, EventNode, Tick};
use crate::graph_build::SegmentGraph;

pub const EMBED_URL_ENV: &str = "EW_EMBED_URL";

const REMOTE_TIMEOUT: Duration = Duration::from_secs(30);

/// What a factory may draw on.
pub struct BuildContext<'a> {
    pub config: &'a EngineConfig,
    pub lexicons: Arc<Lexicons>,
}

pub type Factory<T> = Box<dyn Fn(&BuildContext) -> Result<Box<T>> + Send + Sync>;

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    factories: BTreeMap<String, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            factories: BTreeMap::new(),
        }
    }

    /// Later registrations under the same name replace earlier ones.
    pub fn register<F>(&mut self, name: &str, factory: F) -> &mut Self
    where
        F: Fn(&BuildContext) -> Result<Box<T>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
        self
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn build(&self, name: &str, ctx: &BuildContext) -> Result<Box<T>> {
        match self.factories.get(name) {
            Some(f) => f(ctx),
            None => Err(Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                known: self.names().join(", "),
            }),
        }
    }
}

/// Every turn with at least one word token is an event.
pub struct EveryTurn;

impl EventDetector for EveryTurn {
    fn name(&self) -> &str {
        "every-turn"
    }

    fn is_event(&self, turn: &DialogueTurn) -> bool {
        !crate::embed::tokenize(&turn.text).is_empty()
    }
}

/// Exponential recency alone.
pub struct RecencyOnly {
    pub gamma: f64,
}

impl FutureEstimator for RecencyOnly {
    fn name(&self) -> &str {
        "recency"
    }

    fn estimate(&self, node: &EventNode, _: &SegmentGraph, now: Tick) -> f64 {
        (-self.gamma * now.saturating_sub(node.last_updated) as f64).exp()
    }
}

/// Hops between similar nodes are cheaper.
pub struct CosineCompatibility;

impl Compatibility for CosineCompatibility {
    fn name(&self) -> &str {
        "cosine"
    }

    fn omega(&self, from: &EventNode, to: &EventNode) -> f64 {
        cosine_unchecked(&from.centroid, &to.centroid).max(0.0)
    }
}

pub struct Registries {
    pub embedder: Registry<dyn Embedder>,
    pub detector: Registry<dyn EventDetector>,
    pub future: Registry<dyn FutureEstimator>,
    pub compatibility: Registry<dyn Compatibility>,
    pub update_adjust: Registry<dyn UpdateAdjuster>,
    pub omega_policy: Registry<dyn OmegaPolicy>,
    pub judge: Registry<dyn CoherenceJudge>,
}

impl Default for Registries {
    fn default() -> Self {
        let mut embedder: Registry<dyn Embedder> = Registry::new("embedder");
        embedder
            .register("hashing", |c| Ok(Box::new(HashingEmbedder::new(c.config.dim)?)))
            .register("remote", |c| {
                let url = c.config.embed_url.as_deref().ok_or_else(|| {
                    Error::Config(format!("remote embedder needs embed_url or {EMBED_URL_ENV}"))
                })?;
                Ok(Box::new(RemoteEmbedder::new(url, c.config.dim, REMOTE_TIMEOUT)?))
            });

        let mut detector: Registry<dyn EventDetector> = Registry::new("detector");
        detector
            .register("lexicon", |c| Ok(Box::new(LexiconDetector::new(c.lexicons.clone()))))
            .register("every-turn", |_| Ok(Box::new(EveryTurn)));

        let mut future: Registry<dyn FutureEstimator> = Registry::new("future");
        future
            .register("frequency-recency", |c| {
                Ok(Box::new(FrequencyRecency { gamma: c.config.gamma }))
            })
            .register("recency", |c| Ok(Box::new(RecencyOnly { gamma: c.config.gamma })));

        let mut compatibility: Registry<dyn Compatibility> = Registry::new("compatibility");
        compatibility
            .register("unit", |_| Ok(Box::new(UnitCompatibility)))
            .register("cosine", |_| Ok(Box::new(CosineCompatibility)));

        let mut update_adjust: Registry<dyn UpdateAdjuster> = Registry::new("update_adjust");
        update_adjust.register("identity", |_| Ok(Box::new(IdentityAdjuster)));

        let mut omega_policy: Registry<dyn OmegaPolicy> = Registry::new("omega_policy");
        omega_policy
            .register("fixed", |_| Ok(Box::new(FixedOmega)))
            .register("temporal-boost", |c| {
                Ok(Box::new(TemporalBoost {
                    lexicons: c.lexicons.clone(),
                    factor: 2.0,
                }))
            });

        let mut judge: Registry<dyn CoherenceJudge> = Registry::new("judge");
        judge.register("identity", |_| Ok(Box::new(IdentityJudge)));

        Registries {
            embedder,
            detector,
            future,
            compatibility,
            update_adjust,
            omega_policy,
            judge,
        }
    }
}

/// One instance of every strategy named in a config.
pub struct Strategies {
    pub lexicons: Arc<Lexicons>,
    pub embedder: Arc<dyn Embedder>,
    pub detector: Box<dyn EventDetector>,
    pub future: Box<dyn FutureEstimator>,
    pub compatibility: Box<dyn Compatibility>,
    pub update_adjust: Box<dyn UpdateAdjuster>,
    pub omega_policy: Box<dyn OmegaPolicy>,
    pub judge: Box<dyn CoherenceJudge>,
}

impl Strategies {
    pub fn from_config(cfg: &EngineConfig) -> Result<Self> {
        Registries::default().instantiate(cfg)
    }
}

impl Registries {
    pub fn instantiate(&self, cfg: &EngineConfig) -> Result<Strategies> {
        cfg.validate()?;
        let ctx = BuildContext {
            config: cfg,
            lexicons: Arc::new(Lexicons::load(&cfg.lexicons)?),
        };
        let names = &cfg.strategies;
        Ok(Strategies {
            embedder: Arc::from(self.embedder.build(&names.embedder, &ctx)?),
            detector: self.detector.build(&names.detector, &ctx)?,
            future: self.future.build(&names.future, &ctx)?,
            compatibility: self.compatibility.build(&names.compatibility, &ctx)?,
            update_adjust: self.update_adjust.build(&names.update_adjust, &ctx)?,
            omega_policy: self.omega_policy.build(&names.omega_policy, &ctx)?,
            judge: self.judge.build(&names.judge, &ctx)?,
            lexicons: ctx.lexicons,
        })
    }
}

impl Strategies {
    /// The extractor consumes the detector; the rest stays usable.
    pub fn split_extractor(self) -> (Extractor, Rest) {
        let extractor = Extractor::new(self.detector, self.lexicons.clone(), self.embedder.clone());
        (
            extractor,
            Rest {
                lexicons: self.lexicons,
                embedder: self.embedder,
                future: self.future,
                compatibility: self.compatibility,
                update_adjust: self.update_adjust,
                omega_policy: self.omega_policy,
                judge: self.judge,
            },
        )
    }
}

/// Strategies other than the detector.
pub struct Rest {
    pub lexicons: Arc<Lexicons>,
    pub embedder: Arc<dyn Embedder>,
    pub future: Box<dyn FutureEstimator>,
    pub compatibility: Box<dyn Compatibility>,
    pub update_adjust: Box<dyn UpdateAdjuster>,
    pub omega_policy: Box<dyn OmegaPolicy>,
    pub judge: Box<dyn CoherenceJudge>,
}

/// A non-empty embedding-service URL switches the config to the remote
/// embedder; an empty or missing one leaves it alone.
pub fn apply_embed_env(cfg: &mut EngineConfig, url: Option<String>) {
    if let Some(url) = url.filter(|u| !u.trim().is_empty()) {
        cfg.embed_url = Some(url);
        cfg.strategies.embedder = "remote".into();
    }
}
