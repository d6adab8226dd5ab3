use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::Embedder;
use crate::error::{Error, Result};
use crate::types::Embedding;

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
}

/// Client for an external embedding service speaking
/// `POST /embed {"texts": [...]}` -> `{"vectors": [[...], ...]}`.
pub struct RemoteEmbedder {
    endpoint: String,
    dim: usize,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    /// `base_url` is the service root; `/embed` is appended.
    pub fn new(base_url: &str, dim: usize, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Provider(e.to_string()))?;
        Ok(RemoteEmbedder {
            endpoint: format!("{}/embed", base_url.trim_end_matches('/')),
            dim,
            client,
        })
    }

    fn post(&self, texts: &[&str]) -> Result<EmbedResponse> {
        let body = EmbedRequest {
            texts: texts.iter().map(|t| t.to_string()).collect(),
        };
        let resp = self
            .client
            .post(&self.endpoint)
            .json(&body)
            .send()
            .map_err(|e| Error::Provider(format!("{}: {e}", self.endpoint)))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::Provider(format!(
                "{} returned HTTP {status}",
                self.endpoint
            )));
        }
        resp.json()
            .map_err(|e| Error::Provider(format!("malformed response: {e}")))
    }
}

/// Checks count and dimension, then renormalizes each vector.
pub(crate) fn decode_vectors(
    resp: EmbedResponse,
    expected: usize,
    dim: usize,
) -> Result<Vec<Embedding>> {
    if resp.vectors.len() != expected {
        return Err(Error::Provider(format!(
            "service returned {} vectors for {expected} texts",
            resp.vectors.len()
        )));
    }
    resp.vectors
        .into_iter()
        .map(|v| {
            if v.len() != dim {
                return Err(Error::Config(format!(
                    "service dimension {} does not match configured {dim}",
                    v.len()
                )));
            }
            Embedding::new(v).map_err(|e| Error::Provider(e.to_string()))
        })
        .collect()
}

impl Embedder for RemoteEmbedder {
    fn name(&self) -> &str {
        "remote"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        let mut out = self.embed_batch(&[text])?;
        Ok(out.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(Error::invalid("cannot embed empty text"));
        }
        decode_vectors(self.post(texts)?, texts.len(), self.dim)
    }
}
