//! Project directory tree.
//!
//! ```text
//! <root>/index.json
//! <root>/projects/<id>/project.json
//! <root>/projects/<id>/artifacts/{corpus.txt, tokens.ndjson, embeddings.meta.json,
//!                                 embeddings.f32, attributions.ndjson, tags/<name>.tsv}
//! <root>/projects/<id>/derived/...
//! ```
//!
//! Every file is replaced by writing a sibling temporary and renaming it
//! over the target. Writes to one project are serialized by a per-project
//! lock; reads take no lock.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use conceptlens_core::config::is_valid_tagset_name;
use conceptlens_core::{
    AttributionRecord, JobStatus, OccurrenceIndex, PipelineConfig, SentenceRecord, TagAnnotation,
    TokenOccurrence,
};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::analysis::Analysis;
use crate::error::{Result, ServiceError};
use crate::formats::{self, EmbeddingMeta, Embeddings};

const CORPUS: &str = "corpus.txt";
const TOKENS: &str = "tokens.ndjson";
const EMBED_META: &str = "embeddings.meta.json";
const EMBED_DATA: &str = "embeddings.f32";
const ATTRIBUTIONS: &str = "attributions.ndjson";
const TAGS: &str = "tags";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobState {
    pub value: JobStatus,
    pub failure_reason: Option<String>,
    pub progress: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub project_id: String,
    pub name: String,
    pub model_name: Option<String>,
    pub layer: Option<u32>,
    pub config: PipelineConfig,
    pub state: JobState,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewProject {
    pub name: String,
    #[serde(default)]
    pub model_name: Option<String>,
    #[serde(default)]
    pub layer: Option<u32>,
    #[serde(default)]
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Index {
    projects: Vec<IndexEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexEntry {
    project_id: String,
    name: String,
    created_at: DateTime<Utc>,
}

/// Uploaded inputs of one project, parsed and cross-checked.
pub struct Inputs {
    pub sentences: Vec<SentenceRecord>,
    pub occurrences: OccurrenceIndex,
    pub meta: EmbeddingMeta,
    pub embeddings: Embeddings,
    pub tags: Vec<TagAnnotation>,
    pub attributions: BTreeMap<usize, AttributionRecord>,
}

/// Progress shown while a project sits in `status`.
pub fn progress_of(status: JobStatus) -> f64 {
    match status {
        JobStatus::Created | JobStatus::AcceptingArtifacts | JobStatus::Queued => 0.0,
        JobStatus::Clustering => 0.05,
        JobStatus::Aligning => 0.7,
        JobStatus::Scoring => 0.8,
        JobStatus::Ready => 1.0,
        JobStatus::Failed => 0.0,
    }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().expect("store paths have parents");
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("file"),
        Uuid::new_v4().simple()
    ));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| ServiceError::Corrupt(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &serde_json::to_vec_pretty(value)?)
}

fn remove_if_exists(path: &Path) -> Result<()> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
        _ => Ok(()),
    }
}

pub struct Store {
    root: PathBuf,
    index_lock: Mutex<()>,
    writers: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    ready: RwLock<HashMap<String, Arc<Analysis>>>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("projects"))?;
        let store = Store {
            root,
            index_lock: Mutex::new(()),
            writers: Mutex::new(HashMap::new()),
            ready: RwLock::new(HashMap::new()),
        };
        if !store.index_path().exists() {
            write_json(&store.index_path(), &Index::default())?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn index_path(&self) -> PathBuf {
        self.root.join("index.json")
    }

    fn project_dir(&self, id: &str) -> Result<PathBuf> {
        // Only canonical ids ever reach the filesystem.
        let parsed = Uuid::parse_str(id).map_err(|_| ServiceError::NotFound(format!("project {id}")))?;
        if parsed.to_string() != id {
            return Err(ServiceError::NotFound(format!("project {id}")));
        }
        let dir = self.root.join("projects").join(id);
        if !dir.join("project.json").exists() {
            return Err(ServiceError::NotFound(format!("project {id}")));
        }
        Ok(dir)
    }

    pub fn artifact_path(&self, id: &str, name: &str) -> Result<PathBuf> {
        Ok(self.project_dir(id)?.join("artifacts").join(name))
    }

    fn tag_path(&self, id: &str, tagset: &str) -> Result<PathBuf> {
        Ok(self.project_dir(id)?.join("artifacts").join(TAGS).join(format!("{tagset}.tsv")))
    }

    pub fn derived_path(&self, id: &str, name: &str) -> Result<PathBuf> {
        Ok(self.project_dir(id)?.join("derived").join(name))
    }

    fn writer(&self, id: &str) -> Arc<Mutex<()>> {
        self.writers.lock().entry(id.to_string()).or_default().clone()
    }

    pub fn create_project(&self, new: NewProject) -> Result<Project> {
        if new.name.trim().is_empty() {
            return Err(ServiceError::Validation("project name must not be empty".into()));
        }
        new.config.validate()?;
        let now = Utc::now();
        let id = Uuid::new_v4().to_string();
        let mut project = Project {
            project_id: id.clone(),
            name: new.name,
            model_name: new.model_name,
            layer: new.layer,
            config: new.config,
            state: JobState {
                value: JobStatus::Created,
                failure_reason: None,
                progress: 0.0,
            },
            created_at: now,
            updated_at: now,
        };
        let dir = self.root.join("projects").join(&id);
        fs::create_dir_all(dir.join("artifacts"))?;
        project.state.value = JobStatus::Created.transition(JobStatus::AcceptingArtifacts)?;
        write_json(&dir.join("project.json"), &project)?;

        let _guard = self.index_lock.lock();
        let mut index: Index = read_json(&self.index_path())?;
        index.projects.push(IndexEntry {
            project_id: id,
            name: project.name.clone(),
            created_at: now,
        });
        write_json(&self.index_path(), &index)?;
        Ok(project)
    }

    pub fn project(&self, id: &str) -> Result<Project> {
        read_json(&self.project_dir(id)?.join("project.json"))
    }

    pub fn list_projects(&self) -> Result<Vec<Project>> {
        let index: Index = read_json(&self.index_path())?;
        index.projects.iter().map(|e| self.project(&e.project_id)).collect()
    }

    fn save_project(&self, project: &Project) -> Result<()> {
        write_json(&self.project_dir(&project.project_id)?.join("project.json"), project)
    }

    /// Moves a project along the job state machine and persists the result
    /// before returning it.
    pub fn transition(&self, id: &str, to: JobStatus, reason: Option<String>) -> Result<Project> {
        let lock = self.writer(id);
        let _guard = lock.lock();
        self.transition_locked(id, to, reason)
    }

    fn transition_locked(&self, id: &str, to: JobStatus, reason: Option<String>) -> Result<Project> {
        let mut project = self.project(id)?;
        project.state = JobState {
            value: project.state.value.transition(to)?,
            failure_reason: reason,
            progress: progress_of(to),
        };
        project.updated_at = Utc::now();
        self.save_project(&project)?;
        self.ready.write().remove(id);
        Ok(project)
    }

    /// Artifacts a run still needs.
    pub fn missing_artifacts(&self, id: &str) -> Result<Vec<String>> {
        let project = self.project(id)?;
        let mut missing = Vec::new();
        for (name, file) in [("corpus", CORPUS), ("tokens", TOKENS), ("embeddings", EMBED_DATA)] {
            if !self.artifact_path(id, file)?.exists() {
                missing.push(name.to_string());
            }
        }
        for tagset in &project.config.tagsets {
            if !self.tag_path(id, tagset)?.exists() {
                missing.push(format!("tags/{tagset}"));
            }
        }
        Ok(missing)
    }

    /// Checks preconditions and queues the project in one step.
    pub fn enqueue(&self, id: &str) -> Result<Project> {
        let lock = self.writer(id);
        let _guard = lock.lock();
        let state = self.project(id)?.state.value;
        if state != JobStatus::AcceptingArtifacts {
            return Err(conceptlens_core::CoreError::InvalidTransition {
                from: state.as_str(),
                to: JobStatus::Queued.as_str(),
            }
            .into());
        }
        let missing = self.missing_artifacts(id)?;
        if !missing.is_empty() {
            return Err(ServiceError::PreconditionFailed { missing });
        }
        self.transition_locked(id, JobStatus::Queued, None)
    }

    /// Runs an upload under the writer lock of an accepting project.
    fn ingest<T>(&self, id: &str, f: impl FnOnce(&mut Project) -> Result<T>) -> Result<T> {
        let lock = self.writer(id);
        let _guard = lock.lock();
        let mut project = self.project(id)?;
        if project.state.value != JobStatus::AcceptingArtifacts {
            return Err(ServiceError::Conflict(format!(
                "artifacts can only be uploaded while ACCEPTING_ARTIFACTS (project is {})",
                project.state.value
            )));
        }
        let out = f(&mut project)?;
        project.updated_at = Utc::now();
        self.save_project(&project)?;
        Ok(out)
    }

    fn clear_artifacts(&self, id: &str, names: &[&str]) -> Result<()> {
        for name in names {
            remove_if_exists(&self.artifact_path(id, name)?)?;
        }
        Ok(())
    }

    /// Stores the canonical corpus. Replacing it drops every artifact that
    /// refers to sentences.
    pub fn ingest_corpus(&self, id: &str, bytes: &[u8]) -> Result<usize> {
        let sentences = formats::parse_corpus(bytes)?;
        self.ingest(id, |_| {
            self.clear_artifacts(id, &[TOKENS, EMBED_META, EMBED_DATA, ATTRIBUTIONS])?;
            let tags = self.artifact_path(id, TAGS)?;
            if tags.exists() {
                fs::remove_dir_all(tags)?;
            }
            write_atomic(
                &self.artifact_path(id, CORPUS)?,
                formats::write_corpus(&sentences).as_bytes(),
            )?;
            Ok(sentences.len())
        })
    }

    pub fn sentences(&self, id: &str) -> Result<Vec<SentenceRecord>> {
        let path = self.artifact_path(id, CORPUS)?;
        if !path.exists() {
            return Err(ServiceError::PreconditionFailed {
                missing: vec!["corpus".into()],
            });
        }
        formats::parse_corpus(&fs::read(path)?)
    }

    fn occurrence_index(&self, id: &str, sentences: &[SentenceRecord]) -> Result<OccurrenceIndex> {
        let path = self.artifact_path(id, TOKENS)?;
        if !path.exists() {
            return Err(ServiceError::PreconditionFailed {
                missing: vec!["tokens".into()],
            });
        }
        let tokens: Vec<TokenOccurrence> = formats::read_ndjson(&fs::read(path)?)?;
        Ok(OccurrenceIndex::new(tokens, sentences)?)
    }

    /// Stores the token manifest; replacing it drops the embeddings.
    pub fn ingest_tokens(&self, id: &str, bytes: &[u8]) -> Result<usize> {
        self.ingest(id, |_| {
            let sentences = self.sentences(id)?;
            let tokens: Vec<TokenOccurrence> = formats::read_ndjson(bytes)?;
            if tokens.is_empty() {
                return Err(ServiceError::InvalidArtifact("token manifest is empty".into()));
            }
            let index = OccurrenceIndex::new(tokens, &sentences)?;
            self.clear_artifacts(id, &[EMBED_META, EMBED_DATA])?;
            write_atomic(&self.artifact_path(id, TOKENS)?, bytes)?;
            Ok(index.len())
        })
    }

    pub fn ingest_embeddings(&self, id: &str, mut meta: EmbeddingMeta, bytes: &[u8]) -> Result<EmbeddingMeta> {
        self.ingest(id, |project| {
            let sentences = self.sentences(id)?;
            let index = self.occurrence_index(id, &sentences)?;
            if meta.n != index.len() {
                return Err(conceptlens_core::CoreError::Shape {
                    expected: index.len(),
                    actual: meta.n,
                }
                .into());
            }
            if let Some(layer) = project.layer {
                if layer != meta.layer {
                    return Err(ServiceError::InvalidArtifact(format!(
                        "embeddings come from layer {}, project analyses layer {layer}",
                        meta.layer
                    )));
                }
            }
            meta.checksum = Some(formats::validate_embeddings(&meta, bytes)?);
            write_atomic(&self.artifact_path(id, EMBED_DATA)?, bytes)?;
            write_json(&self.artifact_path(id, EMBED_META)?, &meta)?;
            project.layer = Some(meta.layer);
            if project.model_name.is_none() {
                project.model_name = meta.model_name.clone();
            }
            Ok(meta)
        })
    }

    pub fn embedding_meta(&self, id: &str) -> Result<EmbeddingMeta> {
        let path = self.artifact_path(id, EMBED_META)?;
        if !path.exists() {
            return Err(ServiceError::PreconditionFailed {
                missing: vec!["embeddings".into()],
            });
        }
        read_json(&path)
    }

    pub fn embeddings(&self, id: &str) -> Result<Embeddings> {
        let meta = self.embedding_meta(id)?;
        Embeddings::open(&self.artifact_path(id, EMBED_DATA)?, &meta)
    }

    /// Stores a tag file, replacing any earlier upload of the same tagset.
    pub fn ingest_tags(&self, id: &str, tagset: &str, bytes: &[u8]) -> Result<usize> {
        if !is_valid_tagset_name(tagset) {
            return Err(ServiceError::Validation(format!("invalid tagset name {tagset:?}")));
        }
        self.ingest(id, |_| {
            let sentences = self.sentences(id)?;
            let tags = formats::parse_tags(bytes, &sentences)?;
            write_atomic(&self.tag_path(id, tagset)?, bytes)?;
            Ok(formats::tagged_count(&tags))
        })
    }

    pub fn tagsets(&self, id: &str) -> Result<Vec<String>> {
        let dir = self.artifact_path(id, TAGS)?;
        let mut names = Vec::new();
        if dir.exists() {
            for entry in fs::read_dir(dir)? {
                let name = entry?.file_name();
                let name = name.to_string_lossy();
                if let Some(stem) = name.strip_suffix(".tsv") {
                    if is_valid_tagset_name(stem) {
                        names.push(stem.to_string());
                    }
                }
            }
        }
        names.sort();
        Ok(names)
    }

    pub fn ingest_attributions(&self, id: &str, bytes: &[u8]) -> Result<usize> {
        self.ingest(id, |_| {
            let sentences = self.sentences(id)?;
            let records = formats::parse_attributions(bytes, &sentences)?;
            write_atomic(&self.artifact_path(id, ATTRIBUTIONS)?, bytes)?;
            Ok(records.len())
        })
    }

    pub fn attributions(&self, id: &str, sentences: &[SentenceRecord]) -> Result<BTreeMap<usize, AttributionRecord>> {
        let path = self.artifact_path(id, ATTRIBUTIONS)?;
        if !path.exists() {
            return Ok(BTreeMap::new());
        }
        formats::parse_attributions(&fs::read(path)?, sentences)
    }

    /// Raw bytes of a stored artifact, as exported: `corpus`, `tokens`,
    /// `embeddings`, `embeddings.meta`, `attributions` or `tags/<tagset>`.
    pub fn export_artifact(&self, id: &str, name: &str) -> Result<Vec<u8>> {
        let file = match name {
            "corpus" => CORPUS,
            "tokens" => TOKENS,
            "embeddings" => EMBED_DATA,
            "embeddings.meta" => EMBED_META,
            "attributions" => ATTRIBUTIONS,
            _ => "",
        };
        let path = match name.strip_prefix("tags/") {
            Some(tagset) => self.tag_path(id, tagset)?,
            None if !file.is_empty() => self.artifact_path(id, file)?,
            None => return Err(ServiceError::NotFound(format!("artifact {name}"))),
        };
        fs::read(&path).map_err(|_| ServiceError::NotFound(format!("artifact {name}")))
    }

    /// Everything a run reads, parsed and validated against the corpus.
    /// Only the tagsets named in the config are loaded, or all when none
    /// are named.
    pub fn inputs(&self, id: &str) -> Result<Inputs> {
        let project = self.project(id)?;
        let sentences = self.sentences(id)?;
        let occurrences = self.occurrence_index(id, &sentences)?;
        let meta = self.embedding_meta(id)?;
        let embeddings = self.embeddings(id)?;
        let wanted = if project.config.tagsets.is_empty() {
            self.tagsets(id)?
        } else {
            project.config.tagsets.clone()
        };
        let mut tags = Vec::with_capacity(wanted.len());
        for name in wanted {
            let path = self.tag_path(id, &name)?;
            let bytes = fs::read(&path).map_err(|_| ServiceError::PreconditionFailed {
                missing: vec![format!("tags/{name}")],
            })?;
            let parsed = formats::parse_tags(&bytes, &sentences)?;
            tags.push(formats::annotation(&name, &parsed, &occurrences));
        }
        let attributions = self.attributions(id, &sentences)?;
        Ok(Inputs {
            sentences,
            occurrences,
            meta,
            embeddings,
            tags,
            attributions,
        })
    }

    pub fn write_derived(&self, id: &str, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.derived_path(id, name)?, bytes)
    }

    pub fn write_derived_json<T: Serialize>(&self, id: &str, name: &str, value: &T) -> Result<()> {
        self.write_derived(id, name, &serde_json::to_vec(value)?)
    }

    pub fn read_derived(&self, id: &str, name: &str) -> Result<Vec<u8>> {
        let path = self.derived_path(id, name)?;
        fs::read(&path).map_err(|e| ServiceError::Corrupt(format!("{}: {e}", path.display())))
    }

    pub fn read_derived_json<T: for<'de> Deserialize<'de>>(&self, id: &str, name: &str) -> Result<T> {
        read_json(&self.derived_path(id, name)?)
    }

    /// Results of a READY project, loaded once and shared.
    pub fn analysis(&self, id: &str) -> Result<Arc<Analysis>> {
        let project = self.project(id)?;
        if project.state.value != JobStatus::Ready {
            return Err(ServiceError::Conflict(format!(
                "project is {}, results are available once READY",
                project.state.value
            )));
        }
        if let Some(a) = self.ready.read().get(id) {
            return Ok(a.clone());
        }
        let loaded = Arc::new(Analysis::load(self, project)?);
        self.ready.write().insert(id.to_string(), loaded.clone());
        Ok(loaded)
    }

    /// Sets the user label of a concept; the generated label is kept.
    pub fn set_label(&self, id: &str, concept_id: usize, label: &str) -> Result<conceptlens_core::ConceptLabel> {
        let label = label.trim();
        if label.is_empty() {
            return Err(ServiceError::Validation("label must not be empty".into()));
        }
        if label.chars().count() > 200 {
            return Err(ServiceError::Validation("label is longer than 200 characters".into()));
        }
        let lock = self.writer(id);
        let _guard = lock.lock();
        self.analysis(id)?;
        let mut labels: Vec<conceptlens_core::ConceptLabel> = self.read_derived_json(id, crate::analysis::LABELS)?;
        let entry = labels
            .get_mut(concept_id)
            .ok_or_else(|| ServiceError::NotFound(format!("concept {concept_id}")))?;
        entry.user_label = Some(label.to_string());
        let updated = entry.clone();
        self.write_derived_json(id, crate::analysis::LABELS, &labels)?;
        self.ready.write().remove(id);
        Ok(updated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_root() -> PathBuf {
        let dir = std::env::temp_dir().join(format!("conceptlens-store-{}", Uuid::new_v4().simple()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn atomic_write_leaves_no_temporaries() {
        let root = temp_root();
        let path = root.join("a").join("f.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(root.join("a")).unwrap().count(), 1);
        fs::remove_dir_all(root).unwrap();
    }

    #[test]
    fn ids_must_be_canonical() {
        let root = temp_root();
        let store = Store::open(&root).unwrap();
        assert!(matches!(store.project("../x"), Err(ServiceError::NotFound(_))));
        let p = store
            .create_project(NewProject {
                name: "p".into(),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(p.state.value, JobStatus::AcceptingArtifacts);
        assert!(store.project(&p.project_id.to_uppercase()).is_err());
        fs::remove_dir_all(root).unwrap();
    }

    #[test]
    fn corpus_replacement_drops_dependents() {
        let root = temp_root();
        let store = Store::open(&root).unwrap();
        let id = store
            .create_project(NewProject {
                name: "p".into(),
                ..Default::default()
            })
            .unwrap()
            .project_id;
        store.ingest_corpus(&id, b"a b\n").unwrap();
        store.ingest_tags(&id, "pos", b"a\tX\nb\tY\n").unwrap();
        store
            .ingest_tokens(
                &id,
                b"{\"occurrence_id\":0,\"sentence_id\":0,\"position\":0,\"surface\":\"a\"}\n",
            )
            .unwrap();
        assert!(store.missing_artifacts(&id).unwrap() == ["embeddings"]);
        store.ingest_corpus(&id, b"c\n").unwrap();
        assert_eq!(store.missing_artifacts(&id).unwrap(), ["tokens", "embeddings"]);
        assert!(store.tagsets(&id).unwrap().is_empty());
        fs::remove_dir_all(root).unwrap();
    }
}
