use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ChatRequest, ChatResponse, EmbeddingRequest, GatewayError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CassetteMode {
    Record,
    Replay,
    Passthrough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RecordedRequest {
    Chat(ChatRequest),
    Embedding(EmbeddingRequest),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordedResponse {
    Chat(ChatResponse),
    Embedding { vectors: Vec<Vec<f64>> },
}

/// One line of a cassette file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub fingerprint: String,
    pub request: RecordedRequest,
    pub response: RecordedResponse,
}

/// Recorded request/response transcript, stored as JSON Lines.
///
/// In record mode every new entry is appended to the backing file as soon
/// as it is inserted.
#[derive(Debug)]
pub struct Cassette {
    entries: Vec<CassetteEntry>,
    index: HashMap<String, usize>,
    mode: CassetteMode,
    path: Option<PathBuf>,
}

impl Cassette {
    pub fn in_memory(mode: CassetteMode) -> Self {
        Cassette {
            entries: Vec::new(),
            index: HashMap::new(),
            mode,
            path: None,
        }
    }

    /// Opens a cassette file. Replay requires the file to exist; record
    /// mode starts from whatever the file already holds.
    pub fn open(path: impl AsRef<Path>, mode: CassetteMode) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let mut cassette = Cassette::in_memory(mode);
        if path.exists() {
            let file = File::open(path)
                .map_err(|e| GatewayError::Cassette(format!("{}: {e}", path.display())))?;
            for (n, line) in BufReader::new(file).lines().enumerate() {
                let line =
                    line.map_err(|e| GatewayError::Cassette(format!("{}: {e}", path.display())))?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CassetteEntry = serde_json::from_str(&line).map_err(|e| {
                    GatewayError::Cassette(format!("{} line {}: {e}", path.display(), n + 1))
                })?;
                cassette.push(entry);
            }
        } else if mode == CassetteMode::Replay {
            return Err(GatewayError::Cassette(format!(
                "{} does not exist",
                path.display()
            )));
        }
        if mode == CassetteMode::Record {
            cassette.path = Some(path.to_path_buf());
        }
        Ok(cassette)
    }

    pub fn mode(&self) -> CassetteMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CassetteEntry] {
        &self.entries
    }

    pub fn get(&self, fingerprint: &str) -> Option<&CassetteEntry> {
        self.index.get(fingerprint).map(|&i| &self.entries[i])
    }

    pub fn insert(&mut self, entry: CassetteEntry) -> Result<(), GatewayError> {
        if self.mode == CassetteMode::Replay {
            return Err(GatewayError::Cassette(
                "cassette is read-only in replay mode".into(),
            ));
        }
        if self.index.contains_key(&entry.fingerprint) {
            return Ok(());
        }
        if let Some(path) = &self.path {
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| GatewayError::Cassette(format!("{}: {e}", path.display())))?;
            let line =
                serde_json::to_string(&entry).map_err(|e| GatewayError::Cassette(e.to_string()))?;
            writeln!(file, "{line}")
                .map_err(|e| GatewayError::Cassette(format!("{}: {e}", path.display())))?;
        }
        self.push(entry);
        Ok(())
    }

    fn push(&mut self, entry: CassetteEntry) {
        // first entry for a fingerprint wins
        if !self.index.contains_key(&entry.fingerprint) {
            self.index
                .insert(entry.fingerprint.clone(), self.entries.len());
            self.entries.push(entry);
        }
    }
}
