//! Offline runs over an artifact directory.
//!
//! Expected layout: `corpus.txt`, `tokens.ndjson`, `embeddings.meta.json`,
//! `embeddings.f32`, optional `attributions.ndjson`, optional
//! `tags/<tagset>.tsv` and an optional `config.json`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use conceptlens_core::browse::{SortKey, SortOrder};
use conceptlens_core::{JobStatus, PipelineConfig};
use serde::Serialize;

use crate::error::{Result, ServiceError};
use crate::formats::EmbeddingMeta;
use crate::pipeline;
use crate::store::{NewProject, Project, Store};
use crate::views::{self, ListQuery, StatusView};

const OUTPUT_PAGE: usize = 100;

fn read(dir: &Path, name: &str) -> Result<Vec<u8>> {
    fs::read(dir.join(name)).map_err(|e| ServiceError::InvalidArtifact(format!("{}: {e}", dir.join(name).display())))
}

pub fn read_config(dir: &Path) -> Result<PipelineConfig> {
    let path = dir.join("config.json");
    if !path.exists() {
        return Ok(PipelineConfig::default());
    }
    serde_json::from_slice(&fs::read(&path)?)
        .map_err(|e| ServiceError::Validation(format!("{}: {e}", path.display())))
}

/// Uploads every artifact found in `dir` to an accepting project.
pub fn ingest_dir(store: &Store, id: &str, dir: &Path) -> Result<()> {
    store.ingest_corpus(id, &read(dir, "corpus.txt")?)?;
    store.ingest_tokens(id, &read(dir, "tokens.ndjson")?)?;
    let meta: EmbeddingMeta = serde_json::from_slice(&read(dir, "embeddings.meta.json")?)
        .map_err(|e| ServiceError::InvalidArtifact(format!("embeddings.meta.json: {e}")))?;
    store.ingest_embeddings(id, meta, &read(dir, "embeddings.f32")?)?;
    let tags = dir.join("tags");
    if tags.is_dir() {
        let mut files: Vec<_> = fs::read_dir(&tags)?.collect::<std::io::Result<_>>()?;
        files.sort_by_key(|e| e.file_name());
        for entry in files {
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(tagset) = name.strip_suffix(".tsv") {
                store.ingest_tags(id, tagset, &fs::read(entry.path())?)?;
            }
        }
    }
    if dir.join("attributions.ndjson").exists() {
        store.ingest_attributions(id, &read(dir, "attributions.ndjson")?)?;
    }
    Ok(())
}

/// Creates a project from `artifacts`, runs it to completion in this
/// thread, and writes the API's JSON responses under `out`.
pub fn run_local(store: &Store, artifacts: &Path, out: &Path, name: &str) -> Result<Project> {
    let config = read_config(artifacts)?;
    let project = store.create_project(NewProject {
        name: name.to_string(),
        config,
        ..Default::default()
    })?;
    let id = project.project_id.clone();
    ingest_dir(store, &id, artifacts)?;
    store.enqueue(&id)?;
    pipeline::run(store, &id)?;
    let project = store.project(&id)?;
    write_outputs(store, &project, out)?;
    Ok(project)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

pub fn write_outputs(store: &Store, project: &Project, out: &Path) -> Result<()> {
    let status: StatusView = views::status(project);
    write_json(&out.join("status.json"), &status)?;
    if project.state.value != JobStatus::Ready {
        return Ok(());
    }
    let a = store.analysis(&project.project_id)?;
    write_json(&out.join("overview.json"), &views::overview(&a))?;

    let pages = a.concepts.len().div_ceil(OUTPUT_PAGE).max(1);
    for page in 1..=pages {
        let q = ListQuery {
            sort: SortKey::Size,
            order: SortOrder::Desc,
            page,
            per_page: OUTPUT_PAGE,
            tagset: None,
        };
        write_json(&out.join(format!("concepts/page-{page}.json")), &views::concepts(&a, &q)?)?;
    }
    for c in &a.concepts {
        write_json(
            &out.join(format!("concepts/{}.json", c.concept_id)),
            &views::concept_detail(&a, c.concept_id)?,
        )?;
    }

    let pages = a.sentences.len().div_ceil(OUTPUT_PAGE).max(1);
    for page in 1..=pages {
        let params = HashMap::from([
            ("page".to_string(), page.to_string()),
            ("per_page".to_string(), OUTPUT_PAGE.to_string()),
        ]);
        write_json(&out.join(format!("sentences/page-{page}.json")), &views::sentences(&a, &params)?)?;
    }
    for &sid in a.attributions.keys() {
        write_json(
            &out.join(format!("sentences/{sid}/explanation.json")),
            &views::explanation(&a, sid)?,
        )?;
    }
    Ok(())
}
