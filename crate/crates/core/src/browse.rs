//! Sorting and pagination of concept listings.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

pub const DEFAULT_PER_PAGE: usize = 20;
pub const MAX_PER_PAGE: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortKey {
    Size,
    Alignment,
    Class,
    Relevance,
}

impl FromStr for SortKey {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "size" => Ok(SortKey::Size),
            "alignment" => Ok(SortKey::Alignment),
            "class" => Ok(SortKey::Class),
            "relevance" => Ok(SortKey::Relevance),
            other => Err(CoreError::InvalidConfig(alloc::format!("unknown sort key {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    Asc,
    #[default]
    Desc,
}

impl FromStr for SortOrder {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "asc" => Ok(SortOrder::Asc),
            "desc" => Ok(SortOrder::Desc),
            other => Err(CoreError::InvalidConfig(alloc::format!("unknown sort order {other:?}"))),
        }
    }
}

/// One row of the concept browser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptSummary {
    pub concept_id: usize,
    pub label: String,
    pub size: usize,
    pub best_alignment: Option<AlignmentBadge>,
    pub purity: Option<f64>,
    pub dominant_class: Option<String>,
    pub relevance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentBadge {
    pub tagset: String,
    pub tag: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptPage {
    pub items: Vec<ConceptSummary>,
    pub total: usize,
    pub page: usize,
    pub per_page: usize,
    pub sort_key: SortKey,
    pub sort_order: SortOrder,
}

/// Orders summaries by `key`. Missing values (unaligned, unlabeled) sort
/// last in either direction; ties always go to the smaller concept id.
pub fn sort_summaries(items: &mut [ConceptSummary], key: SortKey, order: SortOrder) {
    fn directed(o: Ordering, order: SortOrder) -> Ordering {
        match order {
            SortOrder::Asc => o,
            SortOrder::Desc => o.reverse(),
        }
    }
    fn optional(a: Option<f64>, b: Option<f64>, order: SortOrder) -> Ordering {
        match (a, b) {
            (Some(x), Some(y)) => directed(x.total_cmp(&y), order),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        }
    }
    items.sort_by(|a, b| {
        let primary = match key {
            SortKey::Size => directed(a.size.cmp(&b.size), order),
            SortKey::Alignment => optional(
                a.best_alignment.as_ref().map(|x| x.score),
                b.best_alignment.as_ref().map(|x| x.score),
                order,
            ),
            SortKey::Class => optional(a.purity, b.purity, order),
            SortKey::Relevance => directed(a.relevance.total_cmp(&b.relevance), order),
        };
        primary.then(a.concept_id.cmp(&b.concept_id))
    });
}

/// Sorts and slices one page (1-based). Pages past the end are empty.
pub fn paginate(
    mut items: Vec<ConceptSummary>,
    key: SortKey,
    order: SortOrder,
    page: usize,
    per_page: usize,
) -> Result<ConceptPage, CoreError> {
    if page == 0 {
        return Err(CoreError::InvalidConfig("page numbers start at 1".into()));
    }
    if per_page == 0 || per_page > MAX_PER_PAGE {
        return Err(CoreError::InvalidConfig(alloc::format!(
            "per_page must lie in 1..={MAX_PER_PAGE}"
        )));
    }
    sort_summaries(&mut items, key, order);
    let total = items.len();
    let start = (page - 1).saturating_mul(per_page).min(total);
    let end = start.saturating_add(per_page).min(total);
    let items = items.drain(start..end).collect();
    Ok(ConceptPage {
        items,
        total,
        page,
        per_page,
        sort_key: key,
        sort_order: order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn summaries(n: usize) -> Vec<ConceptSummary> {
        (0..n)
            .map(|i| ConceptSummary {
                concept_id: i,
                label: format!("latent:w#{i}"),
                size: 1 + (i * 7) % 5,
                best_alignment: (i % 3 != 0).then(|| AlignmentBadge {
                    tagset: "pos".into(),
                    tag: "NN".into(),
                    score: 0.9 + (i % 2) as f64 * 0.05,
                }),
                purity: (i % 4 != 0).then_some(0.5 + (i % 3) as f64 * 0.1),
                dominant_class: None,
                relevance: (i % 6) as f64 / 100.0,
            })
            .collect()
    }

    #[test]
    fn size_desc_first_is_max() {
        let p = paginate(summaries(25), SortKey::Size, SortOrder::Desc, 1, 10).unwrap();
        let max = summaries(25).iter().map(|s| s.size).max().unwrap();
        assert_eq!(p.items[0].size, max);
    }

    #[test]
    fn page_sizes() {
        let lens: Vec<usize> = (1..=4)
            .map(|page| {
                let p = paginate(summaries(25), SortKey::Relevance, SortOrder::Desc, page, 10).unwrap();
                assert_eq!(p.total, 25);
                p.items.len()
            })
            .collect();
        assert_eq!(lens, [10, 10, 5, 0]);
    }

    #[test]
    fn unaligned_last_both_ways() {
        for order in [SortOrder::Asc, SortOrder::Desc] {
            let mut s = summaries(12);
            sort_summaries(&mut s, SortKey::Alignment, order);
            let first_none = s.iter().position(|x| x.best_alignment.is_none()).unwrap();
            assert!(s[first_none..].iter().all(|x| x.best_alignment.is_none()));
        }
    }

    #[test]
    fn parse_keys() {
        assert_eq!("class".parse::<SortKey>().unwrap(), SortKey::Class);
        assert!("color".parse::<SortKey>().is_err());
        assert!("up".parse::<SortOrder>().is_err());
    }

    #[test]
    fn bad_paging() {
        assert!(paginate(summaries(3), SortKey::Size, SortOrder::Asc, 0, 10).is_err());
        assert!(paginate(summaries(3), SortKey::Size, SortOrder::Asc, 1, 0).is_err());
    }
}
