//! Plans and plan groups.

use std::collections::BTreeSet;

use rusqlite::{params, Connection, OptionalExtension, Row, Transaction};
use serde::{Deserialize, Serialize};

use super::{get_domain, Result, Store, StoreError};
use crate::model::*;

/// Canvas grid used to place new cards.
const SLOT_W: f64 = 320.0;
const SLOT_H: f64 = 240.0;
const SLOTS_PER_ROW: usize = 4;
/// Offset of a duplicate relative to its original.
pub const DUPLICATE_OFFSET: f64 = 40.0;

#[derive(Debug, Clone, PartialEq)]
pub struct NewPlan {
    pub domain_id: DomainId,
    pub name: String,
    pub goal: String,
    pub solution: String,
    pub changeable_areas: Vec<CodeSpan>,
    pub provenance: Provenance,
    pub candidate_id: Option<CandidateId>,
    /// `None` places the card in the first free canvas slot.
    pub position: Option<(f64, f64)>,
}

impl NewPlan {
    pub fn empty(domain_id: DomainId) -> Self {
        NewPlan {
            domain_id,
            name: String::new(),
            goal: String::new(),
            solution: String::new(),
            changeable_areas: Vec::new(),
            provenance: Provenance::Empty,
            candidate_id: None,
            position: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanPatch {
    pub name: Option<String>,
    pub goal: Option<String>,
    pub solution: Option<String>,
    pub canvas_x: Option<f64>,
    pub canvas_y: Option<f64>,
}

const PLAN_COLUMNS: &str =
    "id, domain_id, name, goal, solution, changeable_areas, provenance, candidate_id, canvas_x, canvas_y, group_id, version";

fn plan_row(r: &Row<'_>) -> rusqlite::Result<(Plan, String, String)> {
    Ok((
        Plan {
            id: r.get(0)?,
            domain_id: r.get(1)?,
            name: r.get(2)?,
            goal: r.get(3)?,
            solution: r.get(4)?,
            changeable_areas: Vec::new(),
            provenance: Provenance::Empty,
            candidate_id: r.get(7)?,
            canvas_x: r.get(8)?,
            canvas_y: r.get(9)?,
            group_id: r.get(10)?,
            version: r.get::<_, i64>(11)? as u64,
        },
        r.get(5)?,
        r.get(6)?,
    ))
}

fn plans_where<P: rusqlite::Params>(c: &Connection, filter: &str, p: P) -> Result<Vec<Plan>> {
    let mut st = c.prepare(&format!("SELECT {PLAN_COLUMNS} FROM plans {filter} ORDER BY id"))?;
    let rows = st.query_map(p, plan_row)?.collect::<rusqlite::Result<Vec<_>>>()?;
    rows.into_iter()
        .map(|(mut plan, spans, prov)| {
            plan.changeable_areas = serde_json::from_str(&spans)?;
            plan.provenance = serde_json::from_str(&prov)?;
            Ok(plan)
        })
        .collect()
}

pub(crate) fn list_plans(c: &Connection, domain: DomainId) -> Result<Vec<Plan>> {
    plans_where(c, "WHERE domain_id = ?1", [domain])
}

pub(crate) fn get_plan(c: &Connection, id: PlanId) -> Result<Plan> {
    plans_where(c, "WHERE id = ?1", [id])?.into_iter().next().ok_or_else(|| StoreError::NotFound(format!("plan {id}")))
}

pub(crate) fn list_groups(c: &Connection, domain: DomainId) -> Result<Vec<PlanGroup>> {
    let mut st = c.prepare("SELECT id FROM plan_groups WHERE domain_id = ?1 ORDER BY id")?;
    let ids: Vec<GroupId> = st.query_map([domain], |r| r.get(0))?.collect::<rusqlite::Result<_>>()?;
    ids.into_iter().map(|id| get_group(c, id)).collect()
}

pub(crate) fn get_group(c: &Connection, id: GroupId) -> Result<PlanGroup> {
    let (domain_id, name): (DomainId, String) = c
        .query_row("SELECT domain_id, name FROM plan_groups WHERE id = ?1", [id], |r| Ok((r.get(0)?, r.get(1)?)))
        .optional()?
        .ok_or_else(|| StoreError::NotFound(format!("group {id}")))?;
    let mut st = c.prepare("SELECT id FROM plans WHERE group_id = ?1 ORDER BY id")?;
    let plan_ids = st.query_map([id], |r| r.get(0))?.collect::<rusqlite::Result<_>>()?;
    Ok(PlanGroup { id, domain_id, name, plan_ids })
}

fn check_position(x: f64, y: f64) -> Result<()> {
    if x.is_finite() && y.is_finite() {
        Ok(())
    } else {
        Err(StoreError::Invalid("canvas position must be finite".into()))
    }
}

/// First grid slot not exactly occupied by an existing card.
fn free_slot(c: &Connection, domain: DomainId) -> Result<(f64, f64)> {
    let mut st = c.prepare("SELECT canvas_x, canvas_y FROM plans WHERE domain_id = ?1")?;
    let taken: Vec<(f64, f64)> = st.query_map([domain], |r| Ok((r.get(0)?, r.get(1)?)))?.collect::<rusqlite::Result<_>>()?;
    let slot = (0..)
        .map(|i| ((i % SLOTS_PER_ROW) as f64 * SLOT_W, (i / SLOTS_PER_ROW) as f64 * SLOT_H))
        .find(|p| !taken.contains(p))
        .expect("infinite slots");
    Ok(slot)
}

fn check_provenance(c: &Connection, domain: DomainId, p: &Provenance) -> Result<()> {
    let program_in_domain = |id: ProgramId| -> Result<ExampleProgram> {
        let prog = super::get_program(c, id)?;
        if prog.domain_id != domain {
            return Err(StoreError::NotFound(format!("program {id} in domain {domain}")));
        }
        Ok(prog)
    };
    match p {
        Provenance::Empty => Ok(()),
        Provenance::FromProgram { program_id } => program_in_domain(*program_id).map(|_| ()),
        Provenance::FromSelection { program_id, start, end } => {
            let prog = program_in_domain(*program_id)?;
            CodeSpan::new(*start, *end).check(prog.display_source())?;
            Ok(())
        }
        Provenance::FromCandidate { candidate_id, snippet_id } => {
            let cand = super::get_candidate(c, *candidate_id)?;
            if cand.domain_id != domain || !cand.snippet_ids.contains(snippet_id) {
                return Err(StoreError::NotFound(format!("snippet {snippet_id} in candidate {candidate_id}")));
            }
            Ok(())
        }
    }
}

/// Resets the provenance of plans whose source program, snippet or candidate
/// no longer exists. Plans themselves are never deleted by pipeline re-runs.
pub(crate) fn detach_orphans(tx: &Transaction<'_>) -> Result<usize> {
    let plans = plans_where(tx, "WHERE provenance NOT LIKE '{\"kind\":\"empty\"%'", [])?;
    let mut n = 0;
    for p in plans {
        if check_provenance(tx, p.domain_id, &p.provenance).is_err() {
            tx.execute(
                "UPDATE plans SET provenance = ?2, candidate_id = NULL WHERE id = ?1",
                params![p.id, serde_json::to_string(&Provenance::Empty)?],
            )?;
            n += 1;
        }
    }
    Ok(n)
}

fn insert_plan(tx: &Transaction<'_>, p: &NewPlan, group: Option<GroupId>) -> Result<Plan> {
    get_domain(tx, p.domain_id)?;
    check_spans(&p.solution, &p.changeable_areas)?;
    check_provenance(tx, p.domain_id, &p.provenance)?;
    if let Some(cid) = p.candidate_id {
        if super::get_candidate(tx, cid)?.domain_id != p.domain_id {
            return Err(StoreError::NotFound(format!("candidate {cid} in domain {}", p.domain_id)));
        }
    }
    let (x, y) = match p.position {
        Some(pos) => pos,
        None => free_slot(tx, p.domain_id)?,
    };
    check_position(x, y)?;
    tx.execute(
        &format!("INSERT INTO plans ({}) VALUES (NULL, ?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, 0)", PLAN_COLUMNS),
        params![
            p.domain_id,
            p.name,
            p.goal,
            p.solution,
            serde_json::to_string(&p.changeable_areas)?,
            serde_json::to_string(&p.provenance)?,
            p.candidate_id,
            x,
            y,
            group
        ],
    )?;
    get_plan(tx, PlanId(tx.last_insert_rowid()))
}

fn write_plan(tx: &Transaction<'_>, p: &Plan) -> Result<()> {
    tx.execute(
        "UPDATE plans SET name = ?2, goal = ?3, solution = ?4, changeable_areas = ?5, canvas_x = ?6, canvas_y = ?7,
                          version = ?8
         WHERE id = ?1",
        params![
            p.id,
            p.name,
            p.goal,
            p.solution,
            serde_json::to_string(&p.changeable_areas)?,
            p.canvas_x,
            p.canvas_y,
            p.version as i64
        ],
    )?;
    Ok(())
}

fn check_version(plan: &Plan, expected: Option<u64>) -> Result<()> {
    match expected {
        Some(v) if v != plan.version => Err(StoreError::Conflict(format!(
            "plan {} is at version {}, request expected {v}",
            plan.id, plan.version
        ))),
        _ => Ok(()),
    }
}

/// Removes groups left without members.
fn prune_groups(tx: &Transaction<'_>) -> Result<()> {
    tx.execute("DELETE FROM plan_groups WHERE id NOT IN (SELECT group_id FROM plans WHERE group_id IS NOT NULL)", [])?;
    Ok(())
}

/// Assigns `plan_ids` to `group`. Plans already in another group are moved
/// only when `move_plans` is set.
fn attach(tx: &Transaction<'_>, domain: DomainId, group: GroupId, plan_ids: &[PlanId], move_plans: bool) -> Result<()> {
    let unique: BTreeSet<PlanId> = plan_ids.iter().copied().collect();
    if unique.is_empty() {
        return Err(StoreError::Invalid("a group needs at least one plan".into()));
    }
    if unique.len() != plan_ids.len() {
        return Err(StoreError::Invalid("duplicate plan ids".into()));
    }
    for id in &unique {
        let plan = get_plan(tx, *id)?;
        if plan.domain_id != domain {
            return Err(StoreError::NotFound(format!("plan {id} in domain {domain}")));
        }
        if let Some(g) = plan.group_id {
            if g != group && !move_plans {
                return Err(StoreError::Conflict(format!("plan {id} already belongs to group {g}")));
            }
        }
        tx.execute("UPDATE plans SET group_id = ?2 WHERE id = ?1", params![id, group])?;
    }
    Ok(())
}

impl Store {
    pub fn create_plan(&self, plan: &NewPlan) -> Result<Plan> {
        self.transaction(|tx| insert_plan(tx, plan, None))
    }

    pub fn get_plan(&self, id: PlanId) -> Result<Plan> {
        self.read(|c| get_plan(c, id))
    }

    pub fn list_plans(&self, domain: DomainId) -> Result<Vec<Plan>> {
        self.read(|c| {
            get_domain(c, domain)?;
            list_plans(c, domain)
        })
    }

    /// Applies a partial update. A new solution keeps only the spans that
    /// still fit it; nothing is clipped or re-anchored.
    pub fn update_plan(&self, id: PlanId, patch: &PlanPatch, expected_version: Option<u64>) -> Result<Plan> {
        self.transaction(|tx| {
            let mut plan = get_plan(tx, id)?;
            check_version(&plan, expected_version)?;
            if let Some(v) = &patch.name {
                plan.name = v.clone();
            }
            if let Some(v) = &patch.goal {
                plan.goal = v.clone();
            }
            if let Some(v) = &patch.solution {
                plan.solution = v.clone();
                let solution = &plan.solution;
                plan.changeable_areas.retain(|s| s.check(solution).is_ok());
            }
            plan.canvas_x = patch.canvas_x.unwrap_or(plan.canvas_x);
            plan.canvas_y = patch.canvas_y.unwrap_or(plan.canvas_y);
            check_position(plan.canvas_x, plan.canvas_y)?;
            plan.version += 1;
            write_plan(tx, &plan)?;
            Ok(plan)
        })
    }

    /// Deep copy with a fresh id, version 0, offset canvas position and the
    /// same group.
    pub fn duplicate_plan(&self, id: PlanId) -> Result<Plan> {
        self.transaction(|tx| {
            let src = get_plan(tx, id)?;
            let copy = NewPlan {
                domain_id: src.domain_id,
                name: src.name.clone(),
                goal: src.goal.clone(),
                solution: src.solution.clone(),
                changeable_areas: src.changeable_areas.clone(),
                provenance: src.provenance.clone(),
                candidate_id: src.candidate_id,
                position: Some((src.canvas_x + DUPLICATE_OFFSET, src.canvas_y + DUPLICATE_OFFSET)),
            };
            insert_plan(tx, &copy, src.group_id)
        })
    }

    pub fn delete_plan(&self, id: PlanId) -> Result<()> {
        self.transaction(|tx| {
            if tx.execute("DELETE FROM plans WHERE id = ?1", [id])? == 0 {
                return Err(StoreError::NotFound(format!("plan {id}")));
            }
            prune_groups(tx)
        })
    }

    pub fn add_changeable_area(&self, id: PlanId, span: CodeSpan, expected_version: Option<u64>) -> Result<Plan> {
        self.transaction(|tx| {
            let mut plan = get_plan(tx, id)?;
            check_version(&plan, expected_version)?;
            insert_span(&plan.solution, &mut plan.changeable_areas, span)?;
            plan.version += 1;
            write_plan(tx, &plan)?;
            Ok(plan)
        })
    }

    pub fn remove_changeable_area(&self, id: PlanId, index: usize, expected_version: Option<u64>) -> Result<Plan> {
        self.transaction(|tx| {
            let mut plan = get_plan(tx, id)?;
            check_version(&plan, expected_version)?;
            if index >= plan.changeable_areas.len() {
                return Err(StoreError::NotFound(format!("changeable area {index} of plan {id}")));
            }
            plan.changeable_areas.remove(index);
            plan.version += 1;
            write_plan(tx, &plan)?;
            Ok(plan)
        })
    }

    pub fn create_group(&self, domain: DomainId, name: &str, plan_ids: &[PlanId], move_plans: bool) -> Result<PlanGroup> {
        self.transaction(|tx| {
            get_domain(tx, domain)?;
            tx.execute("INSERT INTO plan_groups (domain_id, name) VALUES (?1, ?2)", params![domain, name])?;
            let id = GroupId(tx.last_insert_rowid());
            attach(tx, domain, id, plan_ids, move_plans)?;
            prune_groups(tx)?;
            get_group(tx, id)
        })
    }

    /// Renames and/or replaces the membership of a group. Plans dropped from
    /// the group become ungrouped.
    pub fn update_group(
        &self,
        id: GroupId,
        name: Option<&str>,
        plan_ids: Option<&[PlanId]>,
        move_plans: bool,
    ) -> Result<PlanGroup> {
        self.transaction(|tx| {
            let group = get_group(tx, id)?;
            if let Some(n) = name {
                tx.execute("UPDATE plan_groups SET name = ?2 WHERE id = ?1", params![id, n])?;
            }
            if let Some(ids) = plan_ids {
                if ids.is_empty() {
                    return Err(StoreError::Invalid("a group needs at least one plan".into()));
                }
                tx.execute("UPDATE plans SET group_id = NULL WHERE group_id = ?1", [id])?;
                attach(tx, group.domain_id, id, ids, move_plans)?;
                prune_groups(tx)?;
            }
            get_group(tx, id)
        })
    }

    pub fn get_group(&self, id: GroupId) -> Result<PlanGroup> {
        self.read(|c| get_group(c, id))
    }

    pub fn list_groups(&self, domain: DomainId) -> Result<Vec<PlanGroup>> {
        self.read(|c| {
            get_domain(c, domain)?;
            list_groups(c, domain)
        })
    }

    pub fn delete_group(&self, id: GroupId) -> Result<()> {
        self.transaction(|tx| {
            get_group(tx, id)?;
            tx.execute("UPDATE plans SET group_id = NULL WHERE group_id = ?1", [id])?;
            tx.execute("DELETE FROM plan_groups WHERE id = ?1", [id])?;
            Ok(())
        })
    }

    /// Replaces all plans and groups of a domain in one transaction.
    pub(crate) fn replace_plans(&self, domain: DomainId, plans: &[NewPlan], groups: &[(String, Vec<usize>)]) -> Result<()> {
        self.transaction(|tx| {
            get_domain(tx, domain)?;
            tx.execute("DELETE FROM plans WHERE domain_id = ?1", [domain])?;
            tx.execute("DELETE FROM plan_groups WHERE domain_id = ?1", [domain])?;
            let mut ids = Vec::with_capacity(plans.len());
            for p in plans {
                ids.push(insert_plan(tx, &NewPlan { domain_id: domain, ..p.clone() }, None)?.id);
            }
            for (name, members) in groups {
                let plan_ids = members
                    .iter()
                    .map(|&i| ids.get(i).copied().ok_or_else(|| StoreError::Invalid(format!("group member index {i}"))))
                    .collect::<Result<Vec<_>>>()?;
                tx.execute("INSERT INTO plan_groups (domain_id, name) VALUES (?1, ?2)", params![domain, name])?;
                let gid = GroupId(tx.last_insert_rowid());
                attach(tx, domain, gid, &plan_ids, false)?;
            }
            Ok(())
        })
    }
}
