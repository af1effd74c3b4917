//! Case-insensitive substring search over a domain's texts.

use serde::{Deserialize, Serialize};

use super::{get_domain, list_programs, list_snippets, list_use_cases, Result, Store, StoreError};
use crate::model::DomainId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchScope {
    UseCases,
    Programs,
    Snippets,
}

impl SearchScope {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "use_cases" => Some(SearchScope::UseCases),
            "programs" => Some(SearchScope::Programs),
            "snippets" => Some(SearchScope::Snippets),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    /// Use-case, program or snippet id, per scope.
    pub id: i64,
    /// Ordinal of the use case or program; for snippets, of the owning program.
    pub ordinal: u32,
    /// Snippet ordinal within its program; 0 for other scopes.
    pub sub_ordinal: u32,
    /// Number of non-overlapping case-insensitive occurrences.
    pub matches: usize,
}

/// Non-overlapping occurrences of `needle` in `haystack`, ignoring case.
pub fn count_matches(haystack: &str, needle_lower: &str) -> usize {
    if needle_lower.is_empty() {
        return 0;
    }
    haystack.to_lowercase().matches(needle_lower).count()
}

impl Store {
    /// Hits ordered by match count (descending), then ordinal.
    ///
    /// Use cases match on their description, programs on their displayed
    /// source, snippets on goal or code.
    pub fn search(&self, domain: DomainId, query: &str, scope: SearchScope) -> Result<Vec<SearchHit>> {
        let q = query.trim().to_lowercase();
        if q.is_empty() {
            return Err(StoreError::Invalid("search query is empty".into()));
        }
        let mut hits: Vec<SearchHit> = self.read(|c| {
            get_domain(c, domain)?;
            Ok(match scope {
                SearchScope::UseCases => list_use_cases(c, domain)?
                    .into_iter()
                    .map(|u| SearchHit { id: u.id.0, ordinal: u.ordinal, sub_ordinal: 0, matches: count_matches(&u.description, &q) })
                    .collect(),
                SearchScope::Programs => list_programs(c, "WHERE domain_id = ?1", [domain])?
                    .into_iter()
                    .map(|p| SearchHit {
                        id: p.id.0,
                        ordinal: p.ordinal,
                        sub_ordinal: 0,
                        matches: count_matches(p.display_source(), &q),
                    })
                    .collect(),
                SearchScope::Snippets => {
                    let programs = list_programs(c, "WHERE domain_id = ?1", [domain])?;
                    list_snippets(c, "WHERE p.domain_id = ?1", [domain])?
                        .into_iter()
                        .map(|s| {
                            let ordinal = programs.iter().find(|p| p.id == s.program_id).map_or(0, |p| p.ordinal);
                            SearchHit {
                                id: s.id.0,
                                ordinal,
                                sub_ordinal: s.ordinal,
                                matches: count_matches(&s.goal, &q) + count_matches(&s.code, &q),
                            }
                        })
                        .collect()
                }
            })
        })?;
        hits.retain(|h| h.matches > 0);
        hits.sort_by(|a, b| {
            b.matches.cmp(&a.matches).then(a.ordinal.cmp(&b.ordinal)).then(a.sub_ordinal.cmp(&b.sub_ordinal))
        });
        Ok(hits)
    }
}
