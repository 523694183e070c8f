//! HTTP-backed clients. The wire is abstracted behind [`Transport`] so that
//! request building and response parsing can be exercised offline.

use std::time::Duration;

use serde_json::{json, Value};

use super::{FrontendError, GeneratedMesh, LanguageModelClient, MeshGeneratorClient};
use crate::mesh::MeshFormat;

#[derive(Debug, Clone, PartialEq)]
pub struct HttpResponse {
    pub status: u16,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

pub trait Transport {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpResponse, FrontendError>;
}

fn unavailable(e: impl std::fmt::Display) -> FrontendError {
    FrontendError::ClientUnavailable(e.to_string())
}

fn auth(api_key: &Option<String>) -> Vec<(String, String)> {
    api_key
        .iter()
        .map(|k| ("Authorization".to_string(), format!("Bearer {k}")))
        .collect()
}

fn ensure_ok(resp: HttpResponse, what: &str) -> Result<HttpResponse, FrontendError> {
    if (200..300).contains(&resp.status) {
        Ok(resp)
    } else {
        let snippet: String = String::from_utf8_lossy(&resp.body).chars().take(200).collect();
        Err(unavailable(format!("{what} returned HTTP {}: {snippet}", resp.status)))
    }
}

fn env_secs(name: &str, default: u64) -> Duration {
    Duration::from_secs(std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default))
}

/// Chat-completions style language model endpoint.
#[derive(Debug, Clone)]
pub struct ChatCompletionClient<T> {
    pub transport: T,
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

impl<T: Transport> ChatCompletionClient<T> {
    /// Reads `DA_LLM_API_KEY` (required), `DA_LLM_ENDPOINT`, `DA_LLM_MODEL`
    /// and `DA_LLM_TIMEOUT_S`.
    pub fn from_env(transport: T) -> Result<Self, FrontendError> {
        let api_key = std::env::var("DA_LLM_API_KEY").map_err(|_| unavailable("DA_LLM_API_KEY is not set"))?;
        Ok(Self {
            transport,
            endpoint: std::env::var("DA_LLM_ENDPOINT")
                .unwrap_or_else(|_| "https://api.openai.com/v1/chat/completions".into()),
            api_key: Some(api_key),
            model: std::env::var("DA_LLM_MODEL").unwrap_or_else(|_| "gpt-4-turbo".into()),
            timeout: env_secs("DA_LLM_TIMEOUT_S", 30),
        })
    }
}

impl<T: Transport> LanguageModelClient for ChatCompletionClient<T> {
    fn complete(&self, prompt: &str, user_text: &str) -> Result<String, FrontendError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": prompt},
                {"role": "user", "content": user_text},
            ],
        });
        let resp = self
            .transport
            .post_json(&self.endpoint, &auth(&self.api_key), &body, self.timeout)?;
        let resp = ensure_ok(resp, "language model")?;
        let v: Value = serde_json::from_slice(&resp.body).map_err(unavailable)?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| unavailable("language model response has no message content"))
    }

    fn timeout(&self) -> Duration {
        self.timeout
    }
}

/// Text-to-mesh endpoint: POSTs `{"prompt": ...}` and expects the mesh file
/// as the response body, typed by its content type.
#[derive(Debug, Clone)]
pub struct HttpMeshClient<T> {
    pub transport: T,
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl<T: Transport> HttpMeshClient<T> {
    /// Reads `DA_MESH_ENDPOINT` (required), `DA_MESH_API_KEY` and
    /// `DA_MESH_TIMEOUT_S`.
    pub fn from_env(transport: T) -> Result<Self, FrontendError> {
        Ok(Self {
            transport,
            endpoint: std::env::var("DA_MESH_ENDPOINT").map_err(|_| unavailable("DA_MESH_ENDPOINT is not set"))?,
            api_key: std::env::var("DA_MESH_API_KEY").ok(),
            timeout: env_secs("DA_MESH_TIMEOUT_S", 300),
        })
    }
}

fn format_from_content_type(ct: Option<&str>) -> Option<MeshFormat> {
    let ct = ct?.to_ascii_lowercase();
    if ct.contains("obj") {
        Some(MeshFormat::Obj)
    } else if ct.contains("stl") {
        Some(MeshFormat::StlBinary)
    } else {
        None
    }
}

impl<T: Transport> MeshGeneratorClient for HttpMeshClient<T> {
    fn generate(&self, prompt: &str) -> Result<GeneratedMesh, FrontendError> {
        let body = json!({ "prompt": prompt });
        let resp = self
            .transport
            .post_json(&self.endpoint, &auth(&self.api_key), &body, self.timeout)?;
        let resp = ensure_ok(resp, "mesh generator")?;
        Ok(GeneratedMesh {
            format: format_from_content_type(resp.content_type.as_deref()),
            bytes: resp.body,
        })
    }
}

#[cfg(feature = "http")]
#[derive(Debug, Clone, Copy, Default)]
pub struct UreqTransport;

#[cfg(feature = "http")]
impl Transport for UreqTransport {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpResponse, FrontendError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(url);
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let mut resp = req.send_json(body).map_err(unavailable)?;
        let status = resp.status().as_u16();
        let content_type = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .map(str::to_owned);
        let body = resp
            .body_mut()
            .with_config()
            .limit(256 << 20)
            .read_to_vec()
            .map_err(unavailable)?;
        Ok(HttpResponse {
            status,
            content_type,
            body,
        })
    }
}
