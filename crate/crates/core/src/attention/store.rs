//! Attention-map storage and providers.
//!
//! Binary record layout, all integers and floats little-endian:
//!
//! ```text
//! u32 id_len | id bytes (UTF-8) | u32 n_layers | u32 n_heads | u32 T |
//! f32 x (n_layers * n_heads * T * T), row-major [layer][head][from][to]
//! ```
//!
//! A data file is a concatenation of records. A JSON manifest next to it maps
//! sentence ids to byte offsets:
//!
//! ```json
//! {"format": "aclm-attention-v1", "data": "attention.bin", "offsets": {"0": 0, "1": 2064}}
//! ```
//!
//! The HTTP provider receives the same single-record bytes base64-encoded:
//! `POST /attention {"id": ..., "tokens": [...]}` → `{"payload": "<base64>"}`.

use super::{AttentionError, AttentionMap};
use crate::corpus::TaggedSentence;
use crate::http::{HttpOptions, JsonClient};
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

pub const FORMAT_TAG: &str = "aclm-attention-v1";

/// Anything that can hand out the word-level attention map of a sentence.
pub trait AttentionProvider: Send + Sync {
    fn attention(&self, sentence: &TaggedSentence) -> Result<AttentionMap, AttentionError>;
}

fn io_err(context: &str, e: impl std::fmt::Display) -> AttentionError {
    AttentionError::Io(format!("{context}: {e}"))
}

/// Serialize one record.
pub fn write_record<W: Write>(out: &mut W, map: &AttentionMap) -> std::io::Result<u64> {
    let id = map.sentence_id().as_bytes();
    let (layers, heads, len, _) = map.scores().dim();
    let as_u32 = |v: usize| {
        u32::try_from(v).map_err(|_| {
            std::io::Error::new(std::io::ErrorKind::InvalidInput, "record dimension exceeds u32")
        })
    };
    out.write_all(&as_u32(id.len())?.to_le_bytes())?;
    out.write_all(id)?;
    for dim in [layers, heads, len] {
        out.write_all(&as_u32(dim)?.to_le_bytes())?;
    }
    for v in map.scores().iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(16 + id.len() as u64 + 4 * map.scores().len() as u64)
}

/// Deserialize one record.
pub fn read_record<R: Read>(input: &mut R) -> Result<AttentionMap, AttentionError> {
    let mut word = [0u8; 4];
    let mut read_u32 = |input: &mut R| -> Result<usize, AttentionError> {
        input.read_exact(&mut word).map_err(|e| io_err("truncated header", e))?;
        Ok(u32::from_le_bytes(word) as usize)
    };
    let id_len = read_u32(input)?;
    let mut id = vec![0u8; id_len];
    input.read_exact(&mut id).map_err(|e| io_err("truncated id", e))?;
    let id = String::from_utf8(id).map_err(|e| io_err("id is not UTF-8", e))?;
    let layers = read_u32(input)?;
    let heads = read_u32(input)?;
    let len = read_u32(input)?;
    let count = layers
        .checked_mul(heads)
        .and_then(|v| v.checked_mul(len))
        .and_then(|v| v.checked_mul(len))
        .ok_or_else(|| io_err("record header", "shape overflows"))?;
    let mut bytes = vec![0u8; count * 4];
    input.read_exact(&mut bytes).map_err(|e| io_err("truncated scores", e))?;
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    AttentionMap::from_flat(id, layers, heads, len, data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub format: String,
    /// Data file path, relative to the manifest's directory.
    pub data: String,
    pub offsets: BTreeMap<String, u64>,
}

/// Streams records into a data file and writes the manifest on finish.
pub struct AttentionWriter {
    out: BufWriter<File>,
    data_name: String,
    offset: u64,
    offsets: BTreeMap<String, u64>,
}

impl AttentionWriter {
    pub fn create(data_path: &Path) -> Result<Self, AttentionError> {
        let file = File::create(data_path).map_err(|e| io_err("create data file", e))?;
        let data_name = data_path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| io_err("data file", "path has no UTF-8 file name"))?
            .to_string();
        Ok(Self { out: BufWriter::new(file), data_name, offset: 0, offsets: BTreeMap::new() })
    }

    pub fn write(&mut self, map: &AttentionMap) -> Result<(), AttentionError> {
        if self.offsets.contains_key(map.sentence_id()) {
            return Err(io_err("write", format!("duplicate sentence id {:?}", map.sentence_id())));
        }
        self.offsets.insert(map.sentence_id().to_string(), self.offset);
        self.offset += write_record(&mut self.out, map).map_err(|e| io_err("write record", e))?;
        Ok(())
    }

    /// Flush the data file and write the manifest. The data file must live in
    /// the manifest's directory.
    pub fn finish(mut self, manifest_path: &Path) -> Result<StoreManifest, AttentionError> {
        self.out.flush().map_err(|e| io_err("flush", e))?;
        let manifest =
            StoreManifest { format: FORMAT_TAG.to_string(), data: self.data_name, offsets: self.offsets };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| io_err("manifest", e))?;
        std::fs::write(manifest_path, json).map_err(|e| io_err("write manifest", e))?;
        Ok(manifest)
    }
}

/// Random-access reader over a data file and its manifest.
pub struct AttentionStore {
    file: Mutex<File>,
    manifest: StoreManifest,
}

impl AttentionStore {
    pub fn open(manifest_path: &Path) -> Result<Self, AttentionError> {
        let text = std::fs::read_to_string(manifest_path)
            .map_err(|e| io_err(&format!("read {}", manifest_path.display()), e))?;
        let manifest: StoreManifest = serde_json::from_str(&text).map_err(|e| io_err("parse manifest", e))?;
        if manifest.format != FORMAT_TAG {
            return Err(io_err("manifest", format!("unsupported format {:?}", manifest.format)));
        }
        let data_path = manifest_path.parent().unwrap_or(Path::new(".")).join(&manifest.data);
        let file = File::open(&data_path).map_err(|e| io_err(&format!("open {}", data_path.display()), e))?;
        Ok(Self { file: Mutex::new(file), manifest })
    }

    pub fn manifest(&self) -> &StoreManifest {
        &self.manifest
    }

    pub fn contains(&self, id: &str) -> bool {
        self.manifest.offsets.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Result<AttentionMap, AttentionError> {
        let offset = *self.manifest.offsets.get(id).ok_or_else(|| AttentionError::Missing(id.to_string()))?;
        let mut file = self.file.lock().map_err(|_| io_err("store", "lock poisoned"))?;
        file.seek(SeekFrom::Start(offset)).map_err(|e| io_err("seek", e))?;
        let map = read_record(&mut *file)?;
        if map.sentence_id() != id {
            return Err(io_err(
                "store",
                format!("offset for {id:?} points at record {:?}", map.sentence_id()),
            ));
        }
        Ok(map)
    }
}

impl AttentionProvider for AttentionStore {
    fn attention(&self, sentence: &TaggedSentence) -> Result<AttentionMap, AttentionError> {
        self.get(sentence.id())
    }
}

/// Maps held in memory, keyed by sentence id.
#[derive(Debug, Clone, Default)]
pub struct InMemoryAttention {
    maps: HashMap<String, AttentionMap>,
}

impl InMemoryAttention {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, map: AttentionMap) {
        self.maps.insert(map.sentence_id().to_string(), map);
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

impl FromIterator<AttentionMap> for InMemoryAttention {
    fn from_iter<I: IntoIterator<Item = AttentionMap>>(iter: I) -> Self {
        let mut store = Self::new();
        for map in iter {
            store.insert(map);
        }
        store
    }
}

impl AttentionProvider for InMemoryAttention {
    fn attention(&self, sentence: &TaggedSentence) -> Result<AttentionMap, AttentionError> {
        self.maps
            .get(sentence.id())
            .cloned()
            .ok_or_else(|| AttentionError::Missing(sentence.id().to_string()))
    }
}

#[derive(Serialize)]
struct AttentionRequest<'a> {
    id: &'a str,
    tokens: &'a [String],
}

#[derive(Deserialize)]
struct AttentionResponse {
    payload: String,
}

/// Fetches maps from a tagger service, optionally caching the raw records
/// on disk.
pub struct HttpAttentionProvider {
    client: JsonClient,
    cache_dir: Option<PathBuf>,
}

impl HttpAttentionProvider {
    pub fn new(base_url: impl Into<String>, options: HttpOptions) -> Self {
        Self { client: JsonClient::new(base_url, options), cache_dir: None }
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    fn cache_path(&self, sentence: &TaggedSentence) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        let mut hasher = Sha256::new();
        hasher.update(self.client.base_url().as_bytes());
        hasher.update([0]);
        hasher.update(sentence.id().as_bytes());
        for t in sentence.tokens() {
            hasher.update([0]);
            hasher.update(t.as_bytes());
        }
        let digest: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Some(dir.join("attention").join(format!("{digest}.bin")))
    }
}

impl AttentionProvider for HttpAttentionProvider {
    fn attention(&self, sentence: &TaggedSentence) -> Result<AttentionMap, AttentionError> {
        let cache = self.cache_path(sentence);
        if let Some(path) = &cache {
            if let Ok(bytes) = std::fs::read(path) {
                return read_record(&mut bytes.as_slice());
            }
        }
        let resp: AttentionResponse = self
            .client
            .post("attention", &AttentionRequest { id: sentence.id(), tokens: sentence.tokens() })?;
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(resp.payload.as_bytes())
            .map_err(|e| io_err("payload is not base64", e))?;
        let map = read_record(&mut bytes.as_slice())?;
        if let Some(path) = cache {
            if let Some(parent) = path.parent() {
                let _ = std::fs::create_dir_all(parent);
            }
            if let Err(e) = std::fs::write(&path, &bytes) {
                log::warn!("could not cache attention for {:?}: {e}", sentence.id());
            }
        }
        Ok(map)
    }
}
