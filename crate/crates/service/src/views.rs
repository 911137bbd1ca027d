//! Response bodies shared by the HTTP API and `run-local`.

use std::collections::HashMap;

use chrono::{DateTime, Utc};
use conceptlens_core::browse::{paginate, AlignmentBadge, ConceptPage, ConceptSummary, SortKey, SortOrder, DEFAULT_PER_PAGE};
use conceptlens_core::label::type_frequencies;
use conceptlens_core::{
    explain_sentence, overview as overview_stats, ClassAffinity, ConceptAlignment, ConceptLabel, ConceptRelevance,
    CoreError, JobStatus, OverviewStats, SentenceExplanation,
};
use serde::{Deserialize, Serialize};

use crate::analysis::Analysis;
use crate::error::{Result, ServiceError};
use crate::store::Project;

/// Words of context shown on each side of a concept member.
pub const CONTEXT_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusView {
    pub project_id: String,
    pub state: JobStatus,
    pub failure_reason: Option<String>,
    pub progress: f64,
    pub updated_at: DateTime<Utc>,
}

pub fn status(project: &Project) -> StatusView {
    StatusView {
        project_id: project.project_id.clone(),
        state: project.state.value,
        failure_reason: project.state.failure_reason.clone(),
        progress: project.state.progress,
        updated_at: project.updated_at,
    }
}

pub fn overview(a: &Analysis) -> OverviewStats {
    overview_stats(
        &a.concepts,
        &a.alignments,
        a.relevance.as_deref().unwrap_or(&[]),
        &a.labels,
        a.attributions.values(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ListQuery {
    pub sort: SortKey,
    pub order: SortOrder,
    pub page: usize,
    pub per_page: usize,
    pub tagset: Option<String>,
}

impl Default for ListQuery {
    fn default() -> Self {
        ListQuery {
            sort: SortKey::Size,
            order: SortOrder::Desc,
            page: 1,
            per_page: DEFAULT_PER_PAGE,
            tagset: None,
        }
    }
}

fn number(params: &HashMap<String, String>, key: &str, default: usize) -> Result<usize> {
    params.get(key).map_or(Ok(default), |v| {
        v.parse()
            .map_err(|_| ServiceError::Validation(format!("{key} must be a positive integer, got {v:?}")))
    })
}

impl ListQuery {
    /// Reads `sort`, `order`, `page`, `per_page` and `tagset`.
    pub fn from_params(params: &HashMap<String, String>) -> Result<Self> {
        let d = ListQuery::default();
        let validation = |e: CoreError| ServiceError::Validation(e.to_string());
        Ok(ListQuery {
            sort: params.get("sort").map_or(Ok(d.sort), |s| s.parse()).map_err(validation)?,
            order: params.get("order").map_or(Ok(d.order), |s| s.parse()).map_err(validation)?,
            page: number(params, "page", d.page)?,
            per_page: number(params, "per_page", d.per_page)?,
            tagset: params.get("tagset").filter(|t| !t.is_empty()).cloned(),
        })
    }
}

/// Browser rows. With a tagset, only concepts aligned under it are listed
/// and their badge shows that alignment.
pub fn summaries(a: &Analysis, tagset: Option<&str>) -> Result<Vec<ConceptSummary>> {
    if let Some(t) = tagset {
        if !a.alignments.coverage.contains_key(t) {
            return Err(ServiceError::Validation(format!("tagset {t:?} was not part of this run")));
        }
    }
    let mut out = Vec::with_capacity(a.concepts.len());
    for c in &a.concepts {
        let alignment = match tagset {
            Some(t) => match a.alignments.get(c.concept_id, t) {
                Some(x) => Some(x),
                None => continue,
            },
            None => a.alignments.best(c.concept_id),
        };
        let affinity = a.affinity[c.concept_id].as_ref();
        out.push(ConceptSummary {
            concept_id: c.concept_id,
            label: a.labels[c.concept_id].display().to_string(),
            size: c.size,
            best_alignment: alignment.map(|x| AlignmentBadge {
                tagset: x.tagset.clone(),
                tag: x.tag.clone(),
                score: x.score,
            }),
            purity: affinity.map(|x| x.purity),
            dominant_class: affinity.map(|x| x.dominant_class.clone()),
            relevance: a.relevance_of(c.concept_id),
        });
    }
    Ok(out)
}

pub fn concepts(a: &Analysis, q: &ListQuery) -> Result<ConceptPage> {
    let items = summaries(a, q.tagset.as_deref())?;
    paginate(items, q.sort, q.order, q.page, q.per_page).map_err(|e| ServiceError::Validation(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberContext {
    pub occurrence_id: usize,
    pub sentence_id: usize,
    pub position: usize,
    pub surface: String,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeCount {
    pub word: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDetail {
    pub concept_id: usize,
    pub label: ConceptLabel,
    pub size: usize,
    pub alignments: Vec<ConceptAlignment>,
    pub affinity: Option<ClassAffinity>,
    pub relevance: Option<ConceptRelevance>,
    pub word_types: Vec<TypeCount>,
    pub members: Vec<MemberContext>,
}

pub fn concept_detail(a: &Analysis, concept_id: usize) -> Result<ConceptDetail> {
    let c = a.concept(concept_id)?;
    let mut members = Vec::with_capacity(c.members.len());
    for &occ in &c.members {
        let o = a
            .occurrences
            .get(occ)
            .ok_or_else(|| ServiceError::Corrupt(format!("concept {concept_id} holds unknown occurrence {occ}")))?;
        let words = &a.sentences[o.sentence_id].words;
        let from = o.position.saturating_sub(CONTEXT_WINDOW);
        let to = (o.position + 1 + CONTEXT_WINDOW).min(words.len());
        members.push(MemberContext {
            occurrence_id: occ,
            sentence_id: o.sentence_id,
            position: o.position,
            surface: o.surface.clone(),
            left: words[from..o.position].join(" "),
            right: words[o.position + 1..to].join(" "),
        });
    }
    Ok(ConceptDetail {
        concept_id,
        label: a.labels[concept_id].clone(),
        size: c.size,
        alignments: a.alignments.for_concept(concept_id).cloned().collect(),
        affinity: a.affinity[concept_id].clone(),
        relevance: a.relevance.as_ref().map(|r| r[concept_id].clone()),
        word_types: type_frequencies(c, &a.occurrences)
            .into_iter()
            .map(|(word, count)| TypeCount { word, count })
            .collect(),
        members,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceSummary {
    pub sentence_id: usize,
    pub text: String,
    pub gold_label: Option<String>,
    pub predicted_class: Option<String>,
    pub has_attribution: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePage {
    pub items: Vec<SentenceSummary>,
    pub total: usize,
    pub page: usize,
    pub per_page: usize,
}

pub fn sentences(a: &Analysis, params: &HashMap<String, String>) -> Result<SentencePage> {
    let page = number(params, "page", 1)?;
    let per_page = number(params, "per_page", DEFAULT_PER_PAGE)?;
    if page == 0 || per_page == 0 || per_page > conceptlens_core::browse::MAX_PER_PAGE {
        return Err(ServiceError::Validation(format!(
            "page must be ≥ 1 and per_page in 1..={}",
            conceptlens_core::browse::MAX_PER_PAGE
        )));
    }
    let total = a.sentences.len();
    let start = (page - 1).saturating_mul(per_page).min(total);
    let end = start.saturating_add(per_page).min(total);
    let items = a.sentences[start..end]
        .iter()
        .map(|s| {
            let record = a.attributions.get(&s.sentence_id);
            SentenceSummary {
                sentence_id: s.sentence_id,
                text: s.text.clone(),
                gold_label: s.gold_label.clone(),
                predicted_class: record.map(|r| r.predicted_class.clone()),
                has_attribution: record.is_some(),
            }
        })
        .collect();
    Ok(SentencePage {
        items,
        total,
        page,
        per_page,
    })
}

pub fn explanation(a: &Analysis, sentence_id: usize) -> Result<SentenceExplanation> {
    let sentence = a
        .sentences
        .get(sentence_id)
        .ok_or_else(|| ServiceError::NotFound(format!("sentence {sentence_id}")))?;
    let record = a.attributions.get(&sentence_id).ok_or_else(|| {
        ServiceError::Core(CoreError::MissingArtifact(format!("attributions for sentence {sentence_id}")))
    })?;
    Ok(explain_sentence(
        sentence,
        record,
        &a.occurrences,
        &a.membership,
        &a.labels,
        a.project.config.saliency_floor,
    )?)
}
