//! Fixtures for tests and demos: a toy corpus generator with matching
//! attention maps and embeddings, and a minimal HTTP server for exercising
//! the service adapters.

use crate::attention::{AttentionMap, AttentionWriter};
use crate::corpus::{serialize_conll, TaggedSentence};
use crate::mixner::EmbeddingIndex;
use crate::seed::rng_from_seed;
use rand::Rng;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

const SUBJECTS: &[(&str, &[&str])] = &[
    ("PER", &["john", "smith"]),
    ("PER", &["maria"]),
    ("LOC", &["paris"]),
    ("LOC", &["new", "york"]),
    ("ORG", &["acme", "corp"]),
    ("CW", &["the", "hobbit"]),
    ("PROD", &["iphone"]),
    ("GRP", &["the", "beatles"]),
];

const CONTEXT: &[&str] = &[
    "visited",
    "yesterday",
    "with",
    "friends",
    "during",
    "summer",
    "praised",
    "loudly",
    "near",
    "station",
    "after",
    "lunch",
    "quietly",
    "bought",
    "tickets",
    "for",
    "festival",
    ",",
    ".",
    "and",
    "then",
    "left",
    "early",
    "because",
    "rain",
    "started",
    "again",
    "in",
    "old",
    "town",
];

/// `n` distinct sentences. Every third sentence has no entity; the rest
/// carry one or two entities whose surface forms are suffixed with the
/// sentence number so that no two sentences share an entity token.
pub fn toy_corpus(n: usize, seed: u64) -> Vec<TaggedSentence> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|i| {
            let n_entities = match i % 3 {
                2 => 0,
                1 => 2,
                _ => 1,
            };
            let mut tokens = Vec::new();
            let mut spans = Vec::new();
            let lead = rng.random_range(0..3);
            for _ in 0..lead {
                tokens.push(CONTEXT[rng.random_range(0..CONTEXT.len())].to_string());
            }
            for e in 0..n_entities {
                let (label, words) = SUBJECTS[rng.random_range(0..SUBJECTS.len())];
                let start = tokens.len();
                for w in words.iter() {
                    tokens.push(format!("{w}{i}x{e}"));
                }
                spans.push((start, tokens.len(), label));
                for _ in 0..rng.random_range(1..5) {
                    tokens.push(CONTEXT[rng.random_range(0..CONTEXT.len())].to_string());
                }
            }
            tokens.push(format!("tail{i}"));
            TaggedSentence::from_spans(i.to_string(), tokens, &spans).expect("toy sentence is valid")
        })
        .collect()
}

/// A random valid sentence of `min_len..=max_len` tokens with entities of
/// up to `labels` distinct types. Tokens repeat freely and may be
/// punctuation or stopwords.
pub fn random_sentence<R: Rng + ?Sized>(
    rng: &mut R,
    id: &str,
    min_len: usize,
    max_len: usize,
    labels: usize,
) -> TaggedSentence {
    const LABELS: &[&str] = &["PER", "LOC", "ORG", "CW", "PROD", "GRP"];
    let len = rng.random_range(min_len.max(1)..=max_len.max(min_len.max(1)));
    let tokens: Vec<String> = (0..len)
        .map(|_| match rng.random_range(0..10) {
            0 => "the".to_string(),
            1 => ",".to_string(),
            _ => format!("w{}", rng.random_range(0..40)),
        })
        .collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < len {
        if rng.random_bool(0.3) {
            let end = (i + rng.random_range(1..=3)).min(len);
            let label = LABELS[rng.random_range(0..labels.clamp(1, LABELS.len()))];
            spans.push((i, end, label));
            i = end;
        } else {
            i += 1;
        }
    }
    TaggedSentence::from_spans(id, tokens, &spans).expect("generated sentence is valid")
}

/// A random non-negative map with the given shape for `sentence`.
pub fn toy_attention(sentence: &TaggedSentence, layers: usize, heads: usize, seed: u64) -> AttentionMap {
    let mut rng = rng_from_seed(seed);
    let len = sentence.len();
    let data = (0..layers * heads * len * len).map(|_| rng.random::<f32>()).collect();
    AttentionMap::from_flat(sentence.id(), layers, heads, len, data).expect("valid toy map")
}

/// A random embedding vector with no zero norm.
pub fn toy_embedding(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    v[0] += 2.0;
    v
}

/// Files written by [`write_toy_dataset`].
#[derive(Debug, Clone)]
pub struct ToyPaths {
    pub corpus: PathBuf,
    pub attention: PathBuf,
    pub embeddings: PathBuf,
}

/// Write a toy corpus (`train.conll`), its attention store
/// (`attention.json` + `attention.bin`, 4 layers by 2 heads) and sentence
/// embeddings (`embeddings.jsonl`, entity-bearing sentences only) into `dir`.
pub fn write_toy_dataset(dir: &Path, n: usize, seed: u64) -> std::io::Result<ToyPaths> {
    let err = |e: &dyn std::fmt::Display| std::io::Error::other(e.to_string());
    std::fs::create_dir_all(dir)?;
    let corpus = toy_corpus(n, seed);
    let paths = ToyPaths {
        corpus: dir.join("train.conll"),
        attention: dir.join("attention.json"),
        embeddings: dir.join("embeddings.jsonl"),
    };
    std::fs::write(&paths.corpus, serialize_conll(&corpus).map_err(|e| err(&e))?)?;
    let mut writer = AttentionWriter::create(&dir.join("attention.bin")).map_err(|e| err(&e))?;
    let mut index = EmbeddingIndex::new();
    for (i, s) in corpus.iter().enumerate() {
        writer.write(&toy_attention(s, 4, 2, seed ^ i as u64)).map_err(|e| err(&e))?;
        if s.has_entities() {
            index.insert(s.id(), toy_embedding(16, seed.wrapping_add(i as u64))).map_err(|e| err(&e))?;
        }
    }
    writer.finish(&paths.attention).map_err(|e| err(&e))?;
    index.write_jsonl(std::fs::File::create(&paths.embeddings)?)?;
    Ok(paths)
}

/// A request as seen by [`MockServer`].
#[derive(Debug, Clone)]
pub struct MockRequest {
    pub method: String,
    pub path: String,
    pub body: String,
}

type Handler = dyn Fn(&MockRequest) -> (u16, String) + Send + Sync;

/// A single-threaded HTTP/1.1 server on an ephemeral local port. The handler
/// returns a status code and a JSON body. Stops when dropped.
pub struct MockServer {
    port: u16,
    hits: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(&MockRequest) -> (u16, String) + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        let port = listener.local_addr().expect("local addr").port();
        let hits = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let handler: Arc<Handler> = Arc::new(handler);
        let thread = {
            let hits = Arc::clone(&hits);
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    hits.fetch_add(1, Ordering::SeqCst);
                    let _ = serve(stream, handler.as_ref());
                }
            })
        };
        Self { port, hits, stop, thread: Some(thread) }
    }

    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    /// Number of requests received so far.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(("127.0.0.1", self.port));
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn serve(stream: TcpStream, handler: &Handler) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let request = MockRequest { method, path, body: String::from_utf8_lossy(&body).into_owned() };
    let (status, body) = handler(&request);
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {status} Mock\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}
