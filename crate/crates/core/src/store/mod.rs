//! Single-file SQLite persistence.
//!
//! A [`Store`] wraps one connection behind a mutex, so the handle can be
//! shared across threads and every mutation runs inside its own serialized
//! transaction. Embeddings and centroids are stored as packed little-endian
//! `f32`, so vectors read back are the `f32`-rounded values.

mod export;
mod ingest;
mod plans;
mod search;

use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use rusqlite::{params, Connection, OptionalExtension, Row, Transaction};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::*;
use crate::segment::Segment;

pub use export::{ExportFormat, ExportedGroup, ExportedPlan, ExportedSpan, PlanExport};
pub use ingest::CorpusFilter;
pub use plans::{NewPlan, PlanPatch};
pub use search::{count_matches, SearchHit, SearchScope};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("database error: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0} not found")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Span(#[from] SpanError),
}

pub type Result<T> = std::result::Result<T, StoreError>;

const SCHEMA: &str = r#"
CREATE TABLE IF NOT EXISTS domains (
    id INTEGER PRIMARY KEY,
    name TEXT NOT NULL UNIQUE,
    library_name TEXT NOT NULL CHECK (library_name <> ''),
    language TEXT NOT NULL,
    created_at INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS use_cases (
    id INTEGER PRIMARY KEY,
    domain_id INTEGER NOT NULL REFERENCES domains(id) ON DELETE CASCADE,
    description TEXT NOT NULL CHECK (description <> ''),
    ordinal INTEGER NOT NULL,
    UNIQUE (domain_id, ordinal)
);
CREATE TABLE IF NOT EXISTS programs (
    id INTEGER PRIMARY KEY,
    domain_id INTEGER NOT NULL REFERENCES domains(id) ON DELETE CASCADE,
    use_case_id INTEGER REFERENCES use_cases(id) ON DELETE CASCADE,
    ordinal INTEGER NOT NULL,
    source_path TEXT,
    raw_source TEXT NOT NULL,
    annotated_source TEXT NOT NULL,
    syntactically_valid INTEGER NOT NULL,
    origin TEXT NOT NULL,
    UNIQUE (domain_id, ordinal)
);
CREATE TABLE IF NOT EXISTS snippets (
    id INTEGER PRIMARY KEY,
    program_id INTEGER NOT NULL REFERENCES programs(id) ON DELETE CASCADE,
    ordinal INTEGER NOT NULL,
    goal TEXT NOT NULL,
    comment TEXT NOT NULL,
    code TEXT NOT NULL,
    code_offset INTEGER NOT NULL,
    spans TEXT NOT NULL,
    embedding BLOB,
    UNIQUE (program_id, ordinal)
);
CREATE TABLE IF NOT EXISTS candidates (
    id INTEGER PRIMARY KEY,
    domain_id INTEGER NOT NULL REFERENCES domains(id) ON DELETE CASCADE,
    rank INTEGER NOT NULL,
    name TEXT NOT NULL,
    name_pending INTEGER NOT NULL,
    centroid BLOB NOT NULL,
    top INTEGER NOT NULL,
    UNIQUE (domain_id, rank)
);
CREATE TABLE IF NOT EXISTS candidate_members (
    candidate_id INTEGER NOT NULL REFERENCES candidates(id) ON DELETE CASCADE,
    position INTEGER NOT NULL,
    snippet_id INTEGER NOT NULL REFERENCES snippets(id) ON DELETE CASCADE,
    representative INTEGER NOT NULL,
    PRIMARY KEY (candidate_id, position),
    UNIQUE (snippet_id)
);
CREATE TABLE IF NOT EXISTS plan_groups (
    id INTEGER PRIMARY KEY,
    domain_id INTEGER NOT NULL REFERENCES domains(id) ON DELETE CASCADE,
    name TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS plans (
    id INTEGER PRIMARY KEY,
    domain_id INTEGER NOT NULL REFERENCES domains(id) ON DELETE CASCADE,
    name TEXT NOT NULL,
    goal TEXT NOT NULL,
    solution TEXT NOT NULL,
    changeable_areas TEXT NOT NULL,
    provenance TEXT NOT NULL,
    candidate_id INTEGER REFERENCES candidates(id) ON DELETE SET NULL,
    canvas_x REAL NOT NULL,
    canvas_y REAL NOT NULL,
    group_id INTEGER REFERENCES plan_groups(id) ON DELETE SET NULL,
    version INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS pipeline_stages (
    domain_id INTEGER NOT NULL REFERENCES domains(id) ON DELETE CASCADE,
    stage TEXT NOT NULL,
    detail TEXT NOT NULL,
    PRIMARY KEY (domain_id, stage)
);
CREATE TABLE IF NOT EXISTS embedding_cache (
    provider TEXT NOT NULL,
    content_hash TEXT NOT NULL,
    vector BLOB NOT NULL,
    PRIMARY KEY (provider, content_hash)
);
CREATE INDEX IF NOT EXISTS snippets_program ON snippets(program_id);
CREATE INDEX IF NOT EXISTS plans_domain ON plans(domain_id);
"#;

/// A program about to be inserted.
#[derive(Debug, Clone, PartialEq)]
pub struct NewProgram {
    pub use_case_id: Option<UseCaseId>,
    pub source_path: Option<String>,
    pub raw_source: String,
    pub annotated_source: String,
    pub syntactically_valid: bool,
    pub origin: Origin,
}

/// Everything stored for one domain, for equality checks and exports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSnapshot {
    pub domain: Domain,
    pub use_cases: Vec<UseCase>,
    pub programs: Vec<ExampleProgram>,
    pub snippets: Vec<Snippet>,
    pub candidates: Vec<PlanCandidate>,
    pub plans: Vec<Plan>,
    pub groups: Vec<PlanGroup>,
    pub stages: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainCounts {
    pub use_cases: usize,
    pub programs: usize,
    pub valid_programs: usize,
    pub snippets: usize,
    pub embedded_snippets: usize,
    pub candidates: usize,
    pub plans: usize,
    pub groups: usize,
}

pub struct Store {
    conn: Mutex<Connection>,
    path: Option<PathBuf>,
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let conn = Connection::open(path)?;
        Self::init(conn, Some(path.to_path_buf()))
    }

    pub fn open_in_memory() -> Result<Self> {
        Self::init(Connection::open_in_memory()?, None)
    }

    fn init(conn: Connection, path: Option<PathBuf>) -> Result<Self> {
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        conn.execute_batch(SCHEMA)?;
        Ok(Store { conn: Mutex::new(conn), path })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn lock(&self) -> MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Runs `f` in one transaction; any error rolls everything back.
    pub fn transaction<T>(&self, f: impl FnOnce(&Transaction<'_>) -> Result<T>) -> Result<T> {
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        let out = f(&tx)?;
        tx.commit()?;
        Ok(out)
    }

    /// Read-only access to a consistent snapshot.
    pub fn read<T>(&self, f: impl FnOnce(&Connection) -> Result<T>) -> Result<T> {
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        let out = f(&tx)?;
        tx.finish()?;
        Ok(out)
    }

    // ---- domains

    pub fn create_domain(&self, name: &str, library_name: &str, language: &str) -> Result<Domain> {
        if name.trim().is_empty() || library_name.trim().is_empty() {
            return Err(StoreError::Invalid("domain name and library name must be non-empty".into()));
        }
        self.transaction(|tx| {
            if domain_by_name(tx, name)?.is_some() {
                return Err(StoreError::Conflict(format!("domain `{name}` already exists")));
            }
            tx.execute(
                "INSERT INTO domains (name, library_name, language, created_at) VALUES (?1, ?2, ?3, ?4)",
                params![name, library_name, language, now_secs()],
            )?;
            get_domain(tx, DomainId(tx.last_insert_rowid()))
        })
    }

    /// Returns the named domain, creating it when absent.
    pub fn ensure_domain(&self, name: &str, library_name: &str, language: &str) -> Result<Domain> {
        if let Some(d) = self.domain_by_name(name)? {
            if d.library_name != library_name {
                return Err(StoreError::Conflict(format!(
                    "domain `{name}` exists with library `{}`",
                    d.library_name
                )));
            }
            return Ok(d);
        }
        self.create_domain(name, library_name, language)
    }

    pub fn get_domain(&self, id: DomainId) -> Result<Domain> {
        self.read(|c| get_domain(c, id))
    }

    pub fn domain_by_name(&self, name: &str) -> Result<Option<Domain>> {
        self.read(|c| domain_by_name(c, name))
    }

    pub fn list_domains(&self) -> Result<Vec<Domain>> {
        self.read(|c| {
            let mut st = c.prepare("SELECT id, name, library_name, language, created_at FROM domains ORDER BY id")?;
            let rows = st.query_map([], domain_row)?.collect::<rusqlite::Result<_>>()?;
            Ok(rows)
        })
    }

    // ---- use cases

    /// Replaces the domain's use cases (and therefore its generated programs).
    pub fn replace_use_cases(&self, domain: DomainId, descriptions: &[String]) -> Result<Vec<UseCase>> {
        if descriptions.iter().any(|d| d.trim().is_empty()) {
            return Err(StoreError::Invalid("use case descriptions must be non-empty".into()));
        }
        self.transaction(|tx| {
            get_domain(tx, domain)?;
            tx.execute("DELETE FROM use_cases WHERE domain_id = ?1", [domain])?;
            let mut st = tx.prepare("INSERT INTO use_cases (domain_id, description, ordinal) VALUES (?1, ?2, ?3)")?;
            for (i, d) in descriptions.iter().enumerate() {
                st.execute(params![domain, d, i as i64 + 1])?;
            }
            plans::detach_orphans(tx)?;
            list_use_cases(tx, domain)
        })
    }

    pub fn list_use_cases(&self, domain: DomainId) -> Result<Vec<UseCase>> {
        self.read(|c| {
            get_domain(c, domain)?;
            list_use_cases(c, domain)
        })
    }

    pub fn get_use_case(&self, id: UseCaseId) -> Result<UseCase> {
        self.read(|c| {
            c.query_row("SELECT id, domain_id, description, ordinal FROM use_cases WHERE id = ?1", [id], use_case_row)
                .optional()?
                .ok_or_else(|| StoreError::NotFound(format!("use case {id}")))
        })
    }

    // ---- programs

    /// Inserts programs in order, numbering them after the domain's existing ones.
    pub fn insert_programs(&self, domain: DomainId, programs: &[NewProgram]) -> Result<Vec<ExampleProgram>> {
        self.transaction(|tx| insert_programs(tx, domain, programs))
    }

    pub fn list_programs(&self, domain: DomainId) -> Result<Vec<ExampleProgram>> {
        self.read(|c| {
            get_domain(c, domain)?;
            list_programs(c, "WHERE domain_id = ?1", [domain])
        })
    }

    pub fn get_program(&self, id: ProgramId) -> Result<ExampleProgram> {
        self.read(|c| get_program(c, id))
    }

    pub fn program_for_use_case(&self, use_case: UseCaseId) -> Result<Option<ExampleProgram>> {
        self.read(|c| Ok(list_programs(c, "WHERE use_case_id = ?1", [use_case])?.into_iter().next()))
    }

    pub fn set_annotations(&self, annotated: &[(ProgramId, String)]) -> Result<()> {
        self.transaction(|tx| {
            let mut st = tx.prepare("UPDATE programs SET annotated_source = ?2 WHERE id = ?1")?;
            for (id, text) in annotated {
                if st.execute(params![id, text])? == 0 {
                    return Err(StoreError::NotFound(format!("program {id}")));
                }
            }
            Ok(())
        })
    }

    /// Deletes a domain's generated programs (and their snippets).
    pub fn clear_programs(&self, domain: DomainId) -> Result<()> {
        self.transaction(|tx| {
            tx.execute("DELETE FROM programs WHERE domain_id = ?1 AND origin = 'generated'", [domain])?;
            plans::detach_orphans(tx)?;
            Ok(())
        })
    }

    // ---- snippets

    /// Replaces the snippets of each listed program, numbering them from 0.
    pub fn replace_snippets(&self, segmented: &[(ProgramId, Vec<Segment>)]) -> Result<()> {
        self.transaction(|tx| {
            let mut del = tx.prepare("DELETE FROM snippets WHERE program_id = ?1")?;
            let mut ins = tx.prepare(
                "INSERT INTO snippets (program_id, ordinal, goal, comment, code, code_offset, spans)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, '[]')",
            )?;
            for (program, segments) in segmented {
                del.execute([program])?;
                for (i, s) in segments.iter().enumerate() {
                    ins.execute(params![program, i as i64, s.goal, s.comment, s.code, s.code_offset as i64])?;
                }
            }
            drop((del, ins));
            plans::detach_orphans(tx)?;
            Ok(())
        })
    }

    /// Snippets of the domain, ordered by program ordinal then snippet ordinal.
    pub fn list_snippets(&self, domain: DomainId) -> Result<Vec<Snippet>> {
        self.read(|c| list_snippets(c, "WHERE p.domain_id = ?1", [domain]))
    }

    pub fn program_snippets(&self, program: ProgramId) -> Result<Vec<Snippet>> {
        self.read(|c| list_snippets(c, "WHERE s.program_id = ?1", [program]))
    }

    pub fn get_snippet(&self, id: SnippetId) -> Result<Snippet> {
        self.read(|c| get_snippet(c, id))
    }

    pub fn set_snippet_spans(&self, spans: &[(SnippetId, Vec<CodeSpan>)]) -> Result<()> {
        self.transaction(|tx| {
            for (id, list) in spans {
                let snip = get_snippet(tx, *id)?;
                check_spans(&snip.code, list)?;
                tx.execute("UPDATE snippets SET spans = ?2 WHERE id = ?1", params![id, serde_json::to_string(list)?])?;
            }
            Ok(())
        })
    }

    pub fn set_embeddings(&self, embeddings: &[(SnippetId, Vector)]) -> Result<()> {
        self.transaction(|tx| {
            let mut st = tx.prepare("UPDATE snippets SET embedding = ?2 WHERE id = ?1")?;
            for (id, v) in embeddings {
                if st.execute(params![id, v.to_le_f32_bytes()])? == 0 {
                    return Err(StoreError::NotFound(format!("snippet {id}")));
                }
            }
            Ok(())
        })
    }

    // ---- candidates

    /// Replaces the domain's candidates; ids are assigned in the given order.
    pub fn replace_candidates(&self, domain: DomainId, candidates: &[PlanCandidate]) -> Result<Vec<PlanCandidate>> {
        self.transaction(|tx| {
            get_domain(tx, domain)?;
            tx.execute("DELETE FROM candidates WHERE domain_id = ?1", [domain])?;
            let mut ins = tx.prepare(
                "INSERT INTO candidates (domain_id, rank, name, name_pending, centroid, top) VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            )?;
            let mut mem = tx.prepare(
                "INSERT INTO candidate_members (candidate_id, position, snippet_id, representative) VALUES (?1, ?2, ?3, ?4)",
            )?;
            for c in candidates {
                if c.snippet_ids.is_empty() || c.size != c.snippet_ids.len() {
                    return Err(StoreError::Invalid("candidate size must equal its non-empty member count".into()));
                }
                if c.representative_ids.iter().enumerate().any(|(i, r)| c.snippet_ids.get(i) != Some(r)) {
                    return Err(StoreError::Invalid("representatives must be the leading members".into()));
                }
                ins.execute(params![
                    domain,
                    c.rank as i64,
                    c.name,
                    c.name_pending,
                    c.centroid.to_le_f32_bytes(),
                    c.top
                ])?;
                let id = tx.last_insert_rowid();
                for (pos, s) in c.snippet_ids.iter().enumerate() {
                    mem.execute(params![id, pos as i64, s, pos < c.representative_ids.len()])?;
                }
            }
            drop((ins, mem));
            plans::detach_orphans(tx)?;
            list_candidates(tx, domain)
        })
    }

    /// Candidates ordered by rank (largest first).
    pub fn list_candidates(&self, domain: DomainId) -> Result<Vec<PlanCandidate>> {
        self.read(|c| {
            get_domain(c, domain)?;
            list_candidates(c, domain)
        })
    }

    pub fn get_candidate(&self, id: CandidateId) -> Result<PlanCandidate> {
        self.read(|c| get_candidate(c, id))
    }

    // ---- pipeline checkpoints

    pub fn completed_stages(&self, domain: DomainId) -> Result<Vec<String>> {
        self.read(|c| completed_stages(c, domain))
    }

    pub fn stage_detail(&self, domain: DomainId, stage: &str) -> Result<Option<String>> {
        self.read(|c| {
            Ok(c.query_row(
                "SELECT detail FROM pipeline_stages WHERE domain_id = ?1 AND stage = ?2",
                params![domain, stage],
                |r| r.get(0),
            )
            .optional()?)
        })
    }

    pub fn mark_stage(&self, domain: DomainId, stage: &str, detail: &str) -> Result<()> {
        self.transaction(|tx| {
            tx.execute(
                "INSERT OR REPLACE INTO pipeline_stages (domain_id, stage, detail) VALUES (?1, ?2, ?3)",
                params![domain, stage, detail],
            )?;
            Ok(())
        })
    }

    pub fn clear_stages(&self, domain: DomainId, stages: &[&str]) -> Result<()> {
        self.transaction(|tx| {
            for s in stages {
                tx.execute("DELETE FROM pipeline_stages WHERE domain_id = ?1 AND stage = ?2", params![domain, s])?;
            }
            Ok(())
        })
    }

    // ---- embedding cache

    pub fn cached_embedding(&self, provider: &str, content_hash: &str) -> Result<Option<Vector>> {
        self.read(|c| {
            let blob: Option<Vec<u8>> = c
                .query_row(
                    "SELECT vector FROM embedding_cache WHERE provider = ?1 AND content_hash = ?2",
                    params![provider, content_hash],
                    |r| r.get(0),
                )
                .optional()?;
            blob.map(|b| decode_vector(&b)).transpose()
        })
    }

    pub fn cache_embeddings(&self, provider: &str, entries: &[(String, Vector)]) -> Result<()> {
        self.transaction(|tx| {
            let mut st = tx.prepare(
                "INSERT OR REPLACE INTO embedding_cache (provider, content_hash, vector) VALUES (?1, ?2, ?3)",
            )?;
            for (hash, v) in entries {
                st.execute(params![provider, hash, v.to_le_f32_bytes()])?;
            }
            Ok(())
        })
    }

    // ---- aggregate views

    pub fn counts(&self, domain: DomainId) -> Result<DomainCounts> {
        self.read(|c| {
            get_domain(c, domain)?;
            let n = |sql: &str| -> Result<usize> { Ok(c.query_row(sql, [domain], |r| r.get::<_, i64>(0))? as usize) };
            Ok(DomainCounts {
                use_cases: n("SELECT COUNT(*) FROM use_cases WHERE domain_id = ?1")?,
                programs: n("SELECT COUNT(*) FROM programs WHERE domain_id = ?1")?,
                valid_programs: n("SELECT COUNT(*) FROM programs WHERE domain_id = ?1 AND syntactically_valid")?,
                snippets: n("SELECT COUNT(*) FROM snippets s JOIN programs p ON p.id = s.program_id WHERE p.domain_id = ?1")?,
                embedded_snippets: n(
                    "SELECT COUNT(*) FROM snippets s JOIN programs p ON p.id = s.program_id
                     WHERE p.domain_id = ?1 AND s.embedding IS NOT NULL",
                )?,
                candidates: n("SELECT COUNT(*) FROM candidates WHERE domain_id = ?1")?,
                plans: n("SELECT COUNT(*) FROM plans WHERE domain_id = ?1")?,
                groups: n("SELECT COUNT(*) FROM plan_groups WHERE domain_id = ?1")?,
            })
        })
    }

    pub fn snapshot(&self, domain: DomainId) -> Result<DomainSnapshot> {
        self.read(|c| {
            Ok(DomainSnapshot {
                domain: get_domain(c, domain)?,
                use_cases: list_use_cases(c, domain)?,
                programs: list_programs(c, "WHERE domain_id = ?1", [domain])?,
                snippets: list_snippets(c, "WHERE p.domain_id = ?1", [domain])?,
                candidates: list_candidates(c, domain)?,
                plans: plans::list_plans(c, domain)?,
                groups: plans::list_groups(c, domain)?,
                stages: completed_stages(c, domain)?,
            })
        })
    }
}

pub(crate) fn now_secs() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs() as i64)
}

fn decode_vector(bytes: &[u8]) -> Result<Vector> {
    Vector::from_le_f32_bytes(bytes).ok_or_else(|| StoreError::Invalid("corrupt vector blob".into()))
}

fn domain_row(r: &Row<'_>) -> rusqlite::Result<Domain> {
    Ok(Domain {
        id: r.get(0)?,
        name: r.get(1)?,
        library_name: r.get(2)?,
        language: r.get(3)?,
        created_at: r.get(4)?,
    })
}

pub(crate) fn get_domain(c: &Connection, id: DomainId) -> Result<Domain> {
    c.query_row("SELECT id, name, library_name, language, created_at FROM domains WHERE id = ?1", [id], domain_row)
        .optional()?
        .ok_or_else(|| StoreError::NotFound(format!("domain {id}")))
}

fn domain_by_name(c: &Connection, name: &str) -> Result<Option<Domain>> {
    Ok(c.query_row(
        "SELECT id, name, library_name, language, created_at FROM domains WHERE name = ?1",
        [name],
        domain_row,
    )
    .optional()?)
}

fn use_case_row(r: &Row<'_>) -> rusqlite::Result<UseCase> {
    Ok(UseCase { id: r.get(0)?, domain_id: r.get(1)?, description: r.get(2)?, ordinal: r.get(3)? })
}

pub(crate) fn list_use_cases(c: &Connection, domain: DomainId) -> Result<Vec<UseCase>> {
    let mut st =
        c.prepare("SELECT id, domain_id, description, ordinal FROM use_cases WHERE domain_id = ?1 ORDER BY ordinal")?;
    let rows = st.query_map([domain], use_case_row)?.collect::<rusqlite::Result<_>>()?;
    Ok(rows)
}

const PROGRAM_COLUMNS: &str =
    "id, domain_id, use_case_id, ordinal, source_path, raw_source, annotated_source, syntactically_valid, origin";

fn program_row(r: &Row<'_>) -> rusqlite::Result<ExampleProgram> {
    let origin: String = r.get(8)?;
    Ok(ExampleProgram {
        id: r.get(0)?,
        domain_id: r.get(1)?,
        use_case_id: r.get(2)?,
        ordinal: r.get(3)?,
        source_path: r.get(4)?,
        raw_source: r.get(5)?,
        annotated_source: r.get(6)?,
        syntactically_valid: r.get(7)?,
        origin: Origin::parse(&origin).ok_or_else(|| {
            rusqlite::Error::FromSqlConversionFailure(8, rusqlite::types::Type::Text, format!("origin `{origin}`").into())
        })?,
    })
}

pub(crate) fn list_programs<P: rusqlite::Params>(c: &Connection, filter: &str, p: P) -> Result<Vec<ExampleProgram>> {
    let mut st = c.prepare(&format!("SELECT {PROGRAM_COLUMNS} FROM programs {filter} ORDER BY domain_id, ordinal"))?;
    let rows = st.query_map(p, program_row)?.collect::<rusqlite::Result<_>>()?;
    Ok(rows)
}

pub(crate) fn get_program(c: &Connection, id: ProgramId) -> Result<ExampleProgram> {
    list_programs(c, "WHERE id = ?1", [id])?
        .into_iter()
        .next()
        .ok_or_else(|| StoreError::NotFound(format!("program {id}")))
}

fn insert_programs(tx: &Transaction<'_>, domain: DomainId, programs: &[NewProgram]) -> Result<Vec<ExampleProgram>> {
    get_domain(tx, domain)?;
    let start: i64 =
        tx.query_row("SELECT COALESCE(MAX(ordinal), 0) FROM programs WHERE domain_id = ?1", [domain], |r| r.get(0))?;
    let mut st = tx.prepare(
        "INSERT INTO programs (domain_id, use_case_id, ordinal, source_path, raw_source, annotated_source,
                               syntactically_valid, origin)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
    )?;
    let mut ids = Vec::with_capacity(programs.len());
    for (i, p) in programs.iter().enumerate() {
        st.execute(params![
            domain,
            p.use_case_id,
            start + i as i64 + 1,
            p.source_path,
            p.raw_source,
            p.annotated_source,
            p.syntactically_valid,
            p.origin.as_str()
        ])?;
        ids.push(ProgramId(tx.last_insert_rowid()));
    }
    ids.into_iter().map(|id| get_program(tx, id)).collect()
}

const SNIPPET_COLUMNS: &str =
    "s.id, s.program_id, s.ordinal, s.goal, s.comment, s.code, s.code_offset, s.spans, s.embedding";

fn snippet_row(r: &Row<'_>) -> rusqlite::Result<(Snippet, String, Option<Vec<u8>>)> {
    Ok((
        Snippet {
            id: r.get(0)?,
            program_id: r.get(1)?,
            ordinal: r.get(2)?,
            goal: r.get(3)?,
            comment: r.get(4)?,
            code: r.get(5)?,
            code_offset: r.get::<_, i64>(6)? as usize,
            changeable_spans: Vec::new(),
            embedding: None,
        },
        r.get(7)?,
        r.get(8)?,
    ))
}

pub(crate) fn list_snippets<P: rusqlite::Params>(c: &Connection, filter: &str, p: P) -> Result<Vec<Snippet>> {
    let mut st = c.prepare(&format!(
        "SELECT {SNIPPET_COLUMNS} FROM snippets s JOIN programs p ON p.id = s.program_id {filter}
         ORDER BY p.ordinal, s.ordinal"
    ))?;
    let rows = st.query_map(p, snippet_row)?.collect::<rusqlite::Result<Vec<_>>>()?;
    rows.into_iter()
        .map(|(mut s, spans, emb)| {
            s.changeable_spans = serde_json::from_str(&spans)?;
            s.embedding = emb.map(|b| decode_vector(&b)).transpose()?;
            Ok(s)
        })
        .collect()
}

pub(crate) fn get_snippet(c: &Connection, id: SnippetId) -> Result<Snippet> {
    list_snippets(c, "WHERE s.id = ?1", [id])?
        .into_iter()
        .next()
        .ok_or_else(|| StoreError::NotFound(format!("snippet {id}")))
}

fn candidates_where<P: rusqlite::Params>(c: &Connection, filter: &str, p: P) -> Result<Vec<PlanCandidate>> {
    let mut st = c.prepare(&format!(
        "SELECT id, domain_id, rank, name, name_pending, centroid, top FROM candidates {filter} ORDER BY domain_id, rank"
    ))?;
    let heads = st
        .query_map(p, |r| {
            Ok((
                r.get::<_, CandidateId>(0)?,
                r.get::<_, DomainId>(1)?,
                r.get::<_, i64>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, bool>(4)?,
                r.get::<_, Vec<u8>>(5)?,
                r.get::<_, bool>(6)?,
            ))
        })?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    let mut members =
        c.prepare("SELECT snippet_id, representative FROM candidate_members WHERE candidate_id = ?1 ORDER BY position")?;
    heads
        .into_iter()
        .map(|(id, domain_id, rank, name, name_pending, centroid, top)| {
            let rows: Vec<(SnippetId, bool)> =
                members.query_map([id], |r| Ok((r.get(0)?, r.get(1)?)))?.collect::<rusqlite::Result<_>>()?;
            Ok(PlanCandidate {
                id,
                domain_id,
                name,
                name_pending,
                size: rows.len(),
                representative_ids: rows.iter().filter(|(_, rep)| *rep).map(|(s, _)| *s).collect(),
                snippet_ids: rows.into_iter().map(|(s, _)| s).collect(),
                centroid: decode_vector(&centroid)?,
                rank: rank as usize,
                top,
            })
        })
        .collect()
}

pub(crate) fn list_candidates(c: &Connection, domain: DomainId) -> Result<Vec<PlanCandidate>> {
    candidates_where(c, "WHERE domain_id = ?1", [domain])
}

pub(crate) fn get_candidate(c: &Connection, id: CandidateId) -> Result<PlanCandidate> {
    candidates_where(c, "WHERE id = ?1", [id])?
        .into_iter()
        .next()
        .ok_or_else(|| StoreError::NotFound(format!("candidate {id}")))
}

fn completed_stages(c: &Connection, domain: DomainId) -> Result<Vec<String>> {
    let mut st = c.prepare("SELECT stage FROM pipeline_stages WHERE domain_id = ?1 ORDER BY rowid")?;
    let rows = st.query_map([domain], |r| r.get(0))?.collect::<rusqlite::Result<_>>()?;
    Ok(rows)
}
