//! From a spoken-style request to a mesh: object filtering and mesh
//! acquisition behind replaceable clients.

mod clients;
mod filter;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

use crate::mesh::{format_from_path, parse_mesh, MeshError, MeshFormat, TriangleMesh};

#[cfg(feature = "http")]
pub use clients::UreqTransport;
pub use clients::{ChatCompletionClient, HttpMeshClient, HttpResponse, Transport};
pub use filter::{
    fallback_filter, fallback_filter_with, filter_request, FewShot, FilterOutcome, GuidedPrompt, ObjectRequest,
    Rejection, DEFAULT_ABSTRACT_LEXICON, DEFAULT_INSTRUCTION, MAX_RESPONSE_CHARS, RESTATE_MESSAGE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrontendError {
    #[error("client unavailable: {0}")]
    ClientUnavailable(String),
    #[error("request text is empty")]
    EmptyInput,
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Text completion service. Responses are untrusted.
pub trait LanguageModelClient {
    fn complete(&self, prompt: &str, user_text: &str) -> Result<String, FrontendError>;
    fn timeout(&self) -> Duration;
}

/// Raw mesh file as produced by a generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedMesh {
    pub bytes: Vec<u8>,
    /// `None` lets the parser sniff the format.
    pub format: Option<MeshFormat>,
}

/// Text-to-mesh service.
pub trait MeshGeneratorClient {
    fn generate(&self, prompt: &str) -> Result<GeneratedMesh, FrontendError>;
}

pub fn acquire_mesh(request: &ObjectRequest, client: &dyn MeshGeneratorClient) -> Result<TriangleMesh, FrontendError> {
    let generated = client.generate(&request.extracted_phrase)?;
    Ok(parse_mesh(&generated.bytes, generated.format)?)
}

/// Serves meshes from disk according to a JSON manifest mapping phrases to
/// files. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone)]
pub struct MockMeshClient {
    entries: BTreeMap<String, PathBuf>,
}

impl MockMeshClient {
    pub fn new(entries: impl IntoIterator<Item = (String, PathBuf)>) -> Self {
        Self {
            entries: entries.into_iter().map(|(k, v)| (normalize(&k), v)).collect(),
        }
    }

    pub fn from_manifest(path: &Path) -> Result<Self, FrontendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FrontendError::ClientUnavailable(format!("manifest {}: {e}", path.display())))?;
        let map: BTreeMap<String, PathBuf> = serde_json::from_str(&text)
            .map_err(|e| FrontendError::ClientUnavailable(format!("manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(Self::new(map.into_iter().map(|(k, v)| (k, base.join(v)))))
    }
}

fn normalize(phrase: &str) -> String {
    phrase.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl MeshGeneratorClient for MockMeshClient {
    fn generate(&self, prompt: &str) -> Result<GeneratedMesh, FrontendError> {
        let path = self
            .entries
            .get(&normalize(prompt))
            .ok_or_else(|| FrontendError::ClientUnavailable(format!("no mesh recorded for {prompt:?}")))?;
        let bytes =
            std::fs::read(path).map_err(|e| FrontendError::ClientUnavailable(format!("{}: {e}", path.display())))?;
        Ok(GeneratedMesh {
            bytes,
            format: format_from_path(path),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::write_stl_binary;
    use crate::shapes;

    #[test]
    fn manifest_lookup() {
        let dir = std::env::temp_dir().join(format!("da-manifest-{}", std::process::id()));
        std::fs::create_dir_all(dir.join("fixtures")).unwrap();
        let cube = shapes::cuboid(&[0.0; 3].into(), &[10.0; 3].into());
        std::fs::write(dir.join("fixtures/stool.stl"), write_stl_binary(&cube)).unwrap();
        std::fs::write(dir.join("manifest.json"), r#"{"stool": "fixtures/stool.stl"}"#).unwrap();

        let client = MockMeshClient::from_manifest(&dir.join("manifest.json")).unwrap();
        let req = ObjectRequest {
            raw_text: "I want a stool".into(),
            extracted_phrase: "Stool".into(),
        };
        let mesh = acquire_mesh(&req, &client).unwrap();
        assert_eq!(mesh.triangles.len(), 12);
        assert_eq!(mesh.format_origin, MeshFormat::StlBinary);

        let unknown = ObjectRequest {
            raw_text: "lamp".into(),
            extracted_phrase: "lamp".into(),
        };
        match acquire_mesh(&unknown, &client) {
            Err(FrontendError::ClientUnavailable(m)) => assert!(m.contains("lamp")),
            other => panic!("{other:?}"),
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn malformed_mesh_propagates() {
        struct Junk;
        impl MeshGeneratorClient for Junk {
            fn generate(&self, _: &str) -> Result<GeneratedMesh, FrontendError> {
                Ok(GeneratedMesh {
                    bytes: b"solid x\nfacet normal 0 0 1\nouter loop\nvertex 0 0\n".to_vec(),
                    format: Some(MeshFormat::StlAscii),
                })
            }
        }
        let req = ObjectRequest {
            raw_text: "x".into(),
            extracted_phrase: "x".into(),
        };
        assert!(matches!(
            acquire_mesh(&req, &Junk),
            Err(FrontendError::Mesh(MeshError::MalformedFile(_)))
        ));
    }
}
