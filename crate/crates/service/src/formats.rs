//! On-disk and wire formats of the uploaded artifacts.
//!
//! * corpus: UTF-8 text, one sentence per line, optional `<TAB>label`.
//! * tokens, attributions, dendrogram and alignment exports: one JSON
//!   record per line.
//! * embeddings: a JSON sidecar plus raw little-endian float32 rows.
//! * tags: `word<TAB>tag` per line, a blank line between sentences.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use conceptlens_core::{
    AttributionRecord, CoreError, EmbeddingView, OccurrenceIndex, SentenceRecord, TagAnnotation,
};
use memmap2::Mmap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, ServiceError};

fn utf8(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        ServiceError::Encoding { line }
    })
}

/// Lines without their terminators; a trailing `\r` is dropped.
fn lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l))
}

pub fn parse_corpus(bytes: &[u8]) -> Result<Vec<SentenceRecord>> {
    let text = utf8(bytes)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let all: Vec<&str> = lines(text).collect();
    let end = all.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |i| i + 1);
    if end == 0 {
        return Err(ServiceError::InvalidArtifact("corpus is empty".into()));
    }
    let mut sentences = Vec::with_capacity(end);
    for (i, line) in all[..end].iter().enumerate() {
        if line.trim().is_empty() {
            return Err(ServiceError::InvalidArtifact(format!("blank line {} inside corpus", i + 1)));
        }
        let (body, label) = match line.rsplit_once('\t') {
            Some((body, label)) if !body.trim().is_empty() => {
                let label = label.trim();
                (body, (!label.is_empty()).then(|| label.to_string()))
            }
            Some(_) => {
                return Err(ServiceError::InvalidArtifact(format!("line {} has a label but no words", i + 1)))
            }
            None => (*line, None),
        };
        sentences.push(SentenceRecord::from_text(sentences.len(), body, label));
    }
    Ok(sentences)
}

/// Canonical corpus text: words joined by single spaces, `\n` endings.
pub fn write_corpus(sentences: &[SentenceRecord]) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push_str(&s.text);
        if let Some(label) = &s.gold_label {
            out.push('\t');
            out.push_str(label);
        }
        out.push('\n');
    }
    out
}

/// One JSON value per non-blank line.
pub fn read_ndjson<T: DeserializeOwned>(bytes: &[u8]) -> Result<Vec<T>> {
    let text = utf8(bytes)?;
    lines(text)
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ServiceError::InvalidArtifact(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn write_ndjson<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("records serialize");
        out.push(b'\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub n: usize,
    pub d: usize,
    pub layer: u32,
    #[serde(default)]
    pub model_name: Option<String>,
    /// Hex SHA-256 of the float32 buffer.
    #[serde(default)]
    pub checksum: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Checks size, finiteness and (if declared) the checksum of a raw buffer.
/// Returns the checksum.
pub fn validate_embeddings(meta: &EmbeddingMeta, bytes: &[u8]) -> Result<String> {
    let expected = meta
        .n
        .checked_mul(meta.d)
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| ServiceError::InvalidArtifact("n·d overflows".into()))?;
    if meta.d == 0 {
        return Err(ServiceError::InvalidArtifact("d must be positive".into()));
    }
    if bytes.len() != expected {
        return Err(CoreError::Shape {
            expected,
            actual: bytes.len(),
        }
        .into());
    }
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if !v.is_finite() {
            return Err(CoreError::NonFinite {
                row: i / meta.d,
                col: i % meta.d,
            }
            .into());
        }
    }
    let sum = sha256_hex(bytes);
    if let Some(declared) = &meta.checksum {
        if !declared.eq_ignore_ascii_case(&sum) {
            return Err(ServiceError::InvalidArtifact(format!(
                "checksum mismatch: declared {declared}, computed {sum}"
            )));
        }
    }
    Ok(sum)
}

pub fn encode_embeddings(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

enum Buffer {
    Mapped(Mmap),
    Owned(Vec<f32>),
}

/// A stored embedding matrix, memory-mapped when the platform allows
/// reading it in place.
pub struct Embeddings {
    buffer: Buffer,
    rows: usize,
    dim: usize,
}

impl Embeddings {
    pub fn open(path: &Path, meta: &EmbeddingMeta) -> Result<Self> {
        let file = File::open(path)?;
        // SAFETY: stored artifacts are only ever replaced by rename, never
        // modified in place, so the mapping stays valid while held.
        let map = unsafe { Mmap::map(&file)? };
        if map.len() != meta.n * meta.d * 4 {
            return Err(ServiceError::Corrupt(format!("{} has the wrong length", path.display())));
        }
        let buffer = if cfg!(target_endian = "little") && bytemuck::try_cast_slice::<u8, f32>(&map).is_ok() {
            Buffer::Mapped(map)
        } else {
            Buffer::Owned(
                map.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
                    .collect(),
            )
        };
        Ok(Embeddings {
            buffer,
            rows: meta.n,
            dim: meta.d,
        })
    }

    pub fn values(&self) -> &[f32] {
        match &self.buffer {
            Buffer::Mapped(map) => bytemuck::cast_slice(map),
            Buffer::Owned(v) => v,
        }
    }

    pub fn view(&self) -> EmbeddingView<'_> {
        EmbeddingView::new(self.values(), self.rows, self.dim).expect("shape checked at open")
    }

    pub fn is_mapped(&self) -> bool {
        matches!(self.buffer, Buffer::Mapped(_))
    }
}

/// Tags per sentence and position; `None` where a word carries no tag.
pub type SentenceTags = Vec<Vec<Option<String>>>;

/// Parses a CoNLL-style tag file and checks every word against the corpus.
pub fn parse_tags(bytes: &[u8], sentences: &[SentenceRecord]) -> Result<SentenceTags> {
    let text = utf8(bytes)?;
    let mut blocks: Vec<Vec<(&str, Option<&str>)>> = vec![Vec::new()];
    for line in lines(text) {
        if line.trim().is_empty() {
            if !blocks.last().expect("nonempty").is_empty() {
                blocks.push(Vec::new());
            }
            continue;
        }
        let (word, tag) = match line.split_once('\t') {
            Some((w, t)) => (w.trim(), Some(t.trim()).filter(|t| !t.is_empty())),
            None => (line.trim(), None),
        };
        blocks.last_mut().expect("nonempty").push((word, tag));
    }
    if blocks.last().is_some_and(|b| b.is_empty()) {
        blocks.pop();
    }

    let mismatch = |sentence: usize, position: usize, expected: Option<&String>, found: Option<&str>| {
        ServiceError::AlignmentMismatch {
            sentence,
            position,
            expected: expected.cloned(),
            found: found.map(String::from),
        }
    };
    let mut out = Vec::with_capacity(sentences.len());
    for (sid, sentence) in sentences.iter().enumerate() {
        let Some(block) = blocks.get(sid) else {
            return Err(mismatch(sid, 0, sentence.words.first(), None));
        };
        let mut tags = Vec::with_capacity(sentence.words.len());
        for pos in 0..sentence.words.len().max(block.len()) {
            let expected = sentence.words.get(pos);
            let found = block.get(pos).map(|(w, _)| *w);
            if expected.map(String::as_str) != found {
                return Err(mismatch(sid, pos, expected, found));
            }
            tags.push(block[pos].1.map(String::from));
        }
        out.push(tags);
    }
    if blocks.len() > sentences.len() {
        let extra = &blocks[sentences.len()];
        return Err(mismatch(sentences.len(), 0, None, extra.first().map(|(w, _)| *w)));
    }
    Ok(out)
}

pub fn tagged_count(tags: &SentenceTags) -> usize {
    tags.iter().flatten().filter(|t| t.is_some()).count()
}

/// Keys sentence-level tags by occurrence id; positions missing from the
/// manifest are dropped.
pub fn annotation(name: &str, tags: &SentenceTags, occurrences: &OccurrenceIndex) -> TagAnnotation {
    let mut map = BTreeMap::new();
    for (sid, sentence) in tags.iter().enumerate() {
        for (pos, tag) in sentence.iter().enumerate() {
            if let (Some(tag), Some(occ)) = (tag, occurrences.lookup(sid, pos)) {
                map.insert(occ, tag.clone());
            }
        }
    }
    TagAnnotation {
        tagset_name: name.to_string(),
        tags: map,
    }
}

/// Validated attribution records keyed by sentence id.
pub fn parse_attributions(
    bytes: &[u8],
    sentences: &[SentenceRecord],
) -> Result<BTreeMap<usize, AttributionRecord>> {
    let records: Vec<AttributionRecord> = read_ndjson(bytes)?;
    let mut out = BTreeMap::new();
    for record in records {
        let sentence = sentences.get(record.sentence_id).ok_or_else(|| {
            CoreError::UnknownReference(format!("attribution for unknown sentence {}", record.sentence_id))
        })?;
        record.validate(sentence.words.len())?;
        let sid = record.sentence_id;
        if out.insert(sid, record).is_some() {
            return Err(ServiceError::InvalidArtifact(format!(
                "sentence {sid} has more than one attribution record"
            )));
        }
    }
    Ok(out)
}
