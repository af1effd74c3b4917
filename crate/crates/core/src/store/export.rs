//! Plan export (JSON, Markdown) and JSON import.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::plans::NewPlan;
use super::{Result, Store, StoreError};
use crate::model::{check_spans, CodeSpan, DomainId, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Json,
    Markdown,
}

impl ExportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "json" => Some(ExportFormat::Json),
            "markdown" | "md" => Some(ExportFormat::Markdown),
            _ => None,
        }
    }
}

pub type ExportedSpan = CodeSpan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedPlan {
    pub name: String,
    pub goal: String,
    pub solution: String,
    pub changeable_areas: Vec<ExportedSpan>,
    /// Name of the plan's group, if any.
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedGroup {
    pub name: String,
    /// Indices into the document's `plans` array.
    pub plan_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanExport {
    pub domain: String,
    pub plans: Vec<ExportedPlan>,
    pub groups: Vec<ExportedGroup>,
}

impl Store {
    pub fn export_document(&self, domain: DomainId) -> Result<PlanExport> {
        let d = self.get_domain(domain)?;
        let plans = self.list_plans(domain)?;
        let groups = self.list_groups(domain)?;
        let index_of = |id| plans.iter().position(|p| p.id == id).expect("group members are domain plans");
        Ok(PlanExport {
            domain: d.name,
            plans: plans
                .iter()
                .map(|p| ExportedPlan {
                    name: p.name.clone(),
                    goal: p.goal.clone(),
                    solution: p.solution.clone(),
                    changeable_areas: p.changeable_areas.clone(),
                    group: p.group_id.and_then(|g| groups.iter().find(|x| x.id == g)).map(|g| g.name.clone()),
                })
                .collect(),
            groups: groups
                .iter()
                .map(|g| ExportedGroup { name: g.name.clone(), plan_ids: g.plan_ids.iter().map(|&id| index_of(id)).collect() })
                .collect(),
        })
    }

    pub fn export_plans(&self, domain: DomainId, format: ExportFormat) -> Result<String> {
        let doc = self.export_document(domain)?;
        match format {
            ExportFormat::Json => Ok(serde_json::to_string_pretty(&doc)?),
            ExportFormat::Markdown => {
                let language = self.get_domain(domain)?.language;
                Ok(to_markdown(&doc, &language))
            }
        }
    }

    /// Replaces the domain's plans and groups with the document's. Imported
    /// plans carry empty provenance and are laid out on the canvas grid.
    pub fn import_plans(&self, domain: DomainId, json: &str) -> Result<()> {
        let doc: PlanExport = serde_json::from_str(json)?;
        for (i, p) in doc.plans.iter().enumerate() {
            check_spans(&p.solution, &p.changeable_areas).map_err(|e| StoreError::Invalid(format!("plan {i}: {e}")))?;
        }
        let mut seen = vec![false; doc.plans.len()];
        for g in &doc.groups {
            for &i in &g.plan_ids {
                match seen.get_mut(i) {
                    Some(s) if !*s => *s = true,
                    Some(_) => return Err(StoreError::Invalid(format!("plan {i} appears in two groups"))),
                    None => return Err(StoreError::Invalid(format!("group member index {i} out of range"))),
                }
            }
        }
        let plans: Vec<NewPlan> = doc
            .plans
            .iter()
            .map(|p| NewPlan {
                domain_id: domain,
                name: p.name.clone(),
                goal: p.goal.clone(),
                solution: p.solution.clone(),
                changeable_areas: p.changeable_areas.clone(),
                provenance: Provenance::Empty,
                candidate_id: None,
                position: None,
            })
            .collect();
        let groups: Vec<(String, Vec<usize>)> = doc.groups.iter().map(|g| (g.name.clone(), g.plan_ids.clone())).collect();
        self.replace_plans(domain, &plans, &groups)
    }
}

fn inline_code(text: &str) -> String {
    let longest = text.split(|c| c != '`').map(str::len).max().unwrap_or(0);
    let ticks = "`".repeat(longest + 1);
    let pad = if text.starts_with('`') || text.ends_with('`') { " " } else { "" };
    format!("{ticks}{pad}{text}{pad}{ticks}")
}

fn fence_for(text: &str) -> String {
    let mut longest = 0;
    let mut run = 0;
    for c in text.chars() {
        run = if c == '`' { run + 1 } else { 0 };
        longest = longest.max(run);
    }
    "`".repeat(longest.max(2) + 1)
}

/// One section per group (ungrouped plans last), one subsection per plan.
pub fn to_markdown(doc: &PlanExport, language: &str) -> String {
    let mut out = format!("# {}\n", doc.domain);
    let mut sections: Vec<(String, Vec<usize>)> = doc.groups.iter().map(|g| (g.name.clone(), g.plan_ids.clone())).collect();
    let grouped: Vec<usize> = sections.iter().flat_map(|(_, ids)| ids.clone()).collect();
    let ungrouped: Vec<usize> = (0..doc.plans.len()).filter(|i| !grouped.contains(i)).collect();
    if !ungrouped.is_empty() {
        sections.push(("Ungrouped".into(), ungrouped));
    }
    for (name, ids) in sections {
        let _ = write!(out, "\n## {name}\n");
        for i in ids {
            let p = &doc.plans[i];
            let _ = write!(out, "\n### {}\n\n", if p.name.is_empty() { "Untitled plan" } else { &p.name });
            if !p.goal.is_empty() {
                let _ = write!(out, "**Goal:** {}\n\n", p.goal);
            }
            let fence = fence_for(&p.solution);
            let body = p.solution.strip_suffix('\n').unwrap_or(&p.solution);
            let _ = write!(out, "{fence}{language}\n{body}\n{fence}\n");
            if !p.changeable_areas.is_empty() {
                out.push_str("\nChangeable areas:\n\n");
                for s in &p.changeable_areas {
                    let fragment = s.slice(&p.solution).unwrap_or("");
                    match &s.note {
                        Some(n) => {
                            let _ = writeln!(out, "- {} — {n}", inline_code(fragment));
                        }
                        None => {
                            let _ = writeln!(out, "- {}", inline_code(fragment));
                        }
                    }
                }
            }
        }
    }
    out
}
