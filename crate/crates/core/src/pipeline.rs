//! Staged generation-and-mining pipeline with per-stage checkpoints.
//!
//! Stages run in a fixed order. Each one reads its inputs from the store,
//! does its work, and commits its outputs in a single transaction before the
//! stage is marked complete, so an interrupted run resumes at the first
//! incomplete stage. A stage whose checkpoint was written under a different
//! fingerprint (config, providers, library) is re-run, and everything after a
//! re-run stage is re-run too.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cluster::{self, assemble_candidates, fit_pca, select_k_and_cluster, ClusterError};
use crate::embed::{content_hash, EmbedError, EmbeddingProvider};
use crate::llm::{Gateway, LlmError};
use crate::metrics::EvaluationCorpus;
use crate::model::*;
use crate::segment::{localize_fragments, segment};
use crate::store::{DomainCounts, NewProgram, Store, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    UseCases,
    Programs,
    Annotation,
    Segmentation,
    ChangeableAreas,
    Embedding,
    Clustering,
    Naming,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::UseCases,
        Stage::Programs,
        Stage::Annotation,
        Stage::Segmentation,
        Stage::ChangeableAreas,
        Stage::Embedding,
        Stage::Clustering,
        Stage::Naming,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::UseCases => "use_cases",
            Stage::Programs => "programs",
            Stage::Annotation => "annotation",
            Stage::Segmentation => "segmentation",
            Stage::ChangeableAreas => "changeable_areas",
            Stage::Embedding => "embedding",
            Stage::Clustering => "clustering",
            Stage::Naming => "naming",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: StageError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    /// False when the checkpoint was reused.
    pub ran: bool,
    pub millis: u128,
}

/// Summary written beside the store after a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub domain: String,
    pub library: String,
    pub config: PipelineConfig,
    pub provider: String,
    pub embedder: String,
    pub seed: u64,
    pub counts: DomainCounts,
    pub stages: Vec<StageReport>,
    pub clustering: Option<ClusteringSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub pca_components: usize,
    pub k: usize,
    pub silhouettes: Vec<(usize, f64)>,
    pub inertia: f64,
}

/// What the clustering stage hands to the naming stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClusteringCheckpoint {
    fingerprint: String,
    snippet_ids: Vec<SnippetId>,
    points: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    summary: Option<ClusteringSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    fingerprint: String,
}

const EMBED_BATCH: usize = 64;

pub struct Pipeline<'a> {
    store: &'a Store,
    gateway: Gateway,
    embedder: Arc<dyn EmbeddingProvider>,
    config: PipelineConfig,
}

impl<'a> Pipeline<'a> {
    pub fn new(store: &'a Store, gateway: Gateway, embedder: Arc<dyn EmbeddingProvider>, config: PipelineConfig) -> Self {
        Pipeline { store, gateway, embedder, config }
    }

    fn fingerprint(&self, domain: &Domain) -> String {
        let mut h = Sha256::new();
        h.update(domain.library_name.as_bytes());
        h.update([0]);
        h.update(self.gateway.provider_id().as_bytes());
        h.update([0]);
        h.update(self.embedder.id().as_bytes());
        h.update([0]);
        h.update(serde_json::to_vec(&self.config).expect("config serializes"));
        hex::encode(h.finalize())
    }

    pub fn run(&self, domain: &Domain) -> Result<RunManifest, PipelineError> {
        self.config.validate()?;
        let fingerprint = self.fingerprint(domain);
        let mut reports = Vec::new();
        let mut rerun_rest = false;
        for stage in Stage::ALL {
            let done = match self.store.stage_detail(domain.id, stage.as_str())? {
                Some(detail) => serde_json::from_str::<Checkpoint>(&detail).is_ok_and(|c| c.fingerprint == fingerprint),
                None => false,
            };
            if done && !rerun_rest {
                log::info!("stage {stage}: checkpoint reused");
                reports.push(StageReport { stage, ran: false, millis: 0 });
                continue;
            }
            if !rerun_rest {
                let later: Vec<&str> = Stage::ALL.iter().filter(|s| **s as u8 >= stage as u8).map(|s| s.as_str()).collect();
                self.store.clear_stages(domain.id, &later)?;
                rerun_rest = true;
            }
            let started = Instant::now();
            log::info!("stage {stage}: running");
            let detail = self
                .run_stage(stage, domain, &fingerprint)
                .map_err(|source| PipelineError::Stage { stage, source })?;
            self.store.mark_stage(domain.id, stage.as_str(), &detail)?;
            reports.push(StageReport { stage, ran: true, millis: started.elapsed().as_millis() });
        }
        let clustering = match self.store.stage_detail(domain.id, Stage::Clustering.as_str())? {
            Some(d) => serde_json::from_str::<ClusteringCheckpoint>(&d).ok().and_then(|c| c.summary),
            None => None,
        };
        Ok(RunManifest {
            domain: domain.name.clone(),
            library: domain.library_name.clone(),
            config: self.config.clone(),
            provider: self.gateway.provider_id().to_string(),
            embedder: self.embedder.id().to_string(),
            seed: self.config.seed,
            counts: self.store.counts(domain.id)?,
            stages: reports,
            clustering,
        })
    }

    fn run_stage(&self, stage: Stage, domain: &Domain, fingerprint: &str) -> Result<String, StageError> {
        let plain = || serde_json::to_string(&Checkpoint { fingerprint: fingerprint.to_string() });
        match stage {
            Stage::UseCases => {
                let items = self.gateway.generate_use_cases(&domain.library_name, self.config.n_use_cases)?;
                self.store.replace_use_cases(domain.id, &items)?;
            }
            Stage::Programs => self.programs(domain)?,
            Stage::Annotation => self.annotation(domain)?,
            Stage::Segmentation => self.segmentation(domain)?,
            Stage::ChangeableAreas => self.changeable_areas(domain)?,
            Stage::Embedding => self.embedding(domain)?,
            Stage::Clustering => return self.clustering(domain, fingerprint),
            Stage::Naming => self.naming(domain)?,
        }
        Ok(plain()?)
    }

    fn programs(&self, domain: &Domain) -> Result<(), StageError> {
        self.store.clear_programs(domain.id)?;
        let use_cases = self.store.list_use_cases(domain.id)?;
        let generated: Vec<(String, bool)> = use_cases
            .par_iter()
            .map(|u| self.gateway.generate_program(&domain.library_name, &u.description))
            .collect::<Result<_, _>>()?;
        let rows: Vec<NewProgram> = use_cases
            .iter()
            .zip(generated)
            .map(|(u, (code, valid))| NewProgram {
                use_case_id: Some(u.id),
                source_path: None,
                raw_source: code,
                annotated_source: String::new(),
                syntactically_valid: valid,
                origin: Origin::Generated,
            })
            .collect();
        self.store.insert_programs(domain.id, &rows)?;
        Ok(())
    }

    /// Only syntactically valid programs are annotated.
    fn annotation(&self, domain: &Domain) -> Result<(), StageError> {
        let programs: Vec<ExampleProgram> =
            self.store.list_programs(domain.id)?.into_iter().filter(|p| p.syntactically_valid).collect();
        let annotated: Vec<(ProgramId, String)> = programs
            .par_iter()
            .map(|p| Ok((p.id, self.gateway.annotate_subgoals(&p.raw_source)?)))
            .collect::<Result<_, LlmError>>()?;
        self.store.set_annotations(&annotated)?;
        Ok(())
    }

    fn segmentation(&self, domain: &Domain) -> Result<(), StageError> {
        let segmented: Vec<(ProgramId, Vec<crate::segment::Segment>)> = self
            .store
            .list_programs(domain.id)?
            .into_iter()
            .filter(|p| p.syntactically_valid && !p.annotated_source.is_empty())
            .map(|p| (p.id, segment(&p.annotated_source).all().cloned().collect()))
            .collect();
        self.store.replace_snippets(&segmented)?;
        Ok(())
    }

    fn goal_snippets(&self, domain: &Domain) -> Result<Vec<Snippet>, StoreError> {
        Ok(self.store.list_snippets(domain.id)?.into_iter().filter(|s| !s.goal.is_empty()).collect())
    }

    fn changeable_areas(&self, domain: &Domain) -> Result<(), StageError> {
        let snippets = self.goal_snippets(domain)?;
        let spans: Vec<(SnippetId, Vec<CodeSpan>)> = snippets
            .par_iter()
            .filter(|s| !s.code.trim().is_empty())
            .map(|s| {
                let fragments = self.gateway.extract_changeable_fragments(&s.code)?;
                let loc = localize_fragments(&s.code, &fragments);
                if !loc.discarded.is_empty() {
                    log::debug!("snippet {}: discarded {} fragment(s)", s.id, loc.discarded.len());
                }
                Ok((s.id, loc.spans))
            })
            .collect::<Result<_, LlmError>>()?;
        self.store.set_snippet_spans(&spans)?;
        Ok(())
    }

    /// Embeds goal-carrying snippets, reusing cached vectors.
    fn embedding(&self, domain: &Domain) -> Result<(), StageError> {
        let snippets: Vec<Snippet> =
            self.goal_snippets(domain)?.into_iter().filter(|s| !s.code.trim().is_empty()).collect();
        let provider = self.embedder.id().to_string();
        let mut vectors: Vec<Option<Vector>> = Vec::with_capacity(snippets.len());
        for s in &snippets {
            vectors.push(self.store.cached_embedding(&provider, &content_hash(&s.code))?);
        }
        let missing: Vec<usize> = (0..snippets.len()).filter(|&i| vectors[i].is_none()).collect();
        let fresh: Vec<Vec<Vector>> = missing
            .par_chunks(EMBED_BATCH)
            .map(|chunk| {
                let codes: Vec<&str> = chunk.iter().map(|&i| snippets[i].code.as_str()).collect();
                self.embedder.embed_batch(&codes)
            })
            .collect::<Result<_, _>>()?;
        let mut cache = Vec::with_capacity(missing.len());
        for (i, v) in missing.into_iter().zip(fresh.into_iter().flatten()) {
            cache.push((content_hash(&snippets[i].code), v.clone()));
            vectors[i] = Some(v);
        }
        self.store.cache_embeddings(&provider, &cache)?;
        let rows: Vec<(SnippetId, Vector)> =
            snippets.iter().zip(vectors).map(|(s, v)| (s.id, v.expect("every snippet embedded"))).collect();
        self.store.set_embeddings(&rows)?;
        Ok(())
    }

    fn clustering(&self, domain: &Domain, fingerprint: &str) -> Result<String, StageError> {
        // Read back from the store so resumed and fresh runs see identical
        // (f32-rounded) vectors.
        let embedded: Vec<Snippet> =
            self.store.list_snippets(domain.id)?.into_iter().filter(|s| s.embedding.is_some()).collect();
        let snippet_ids: Vec<SnippetId> = embedded.iter().map(|s| s.id).collect();
        let raw: Vec<Vec<f64>> = embedded.iter().map(|s| s.embedding.clone().expect("filtered").into_inner()).collect();
        let (points, assignments, summary) = cluster_points(&raw, &self.config)?;
        let cp = ClusteringCheckpoint { fingerprint: fingerprint.to_string(), snippet_ids, points, assignments, summary };
        Ok(serde_json::to_string(&cp)?)
    }

    fn naming(&self, domain: &Domain) -> Result<(), StageError> {
        let detail = self
            .store
            .stage_detail(domain.id, Stage::Clustering.as_str())?
            .ok_or_else(|| StoreError::NotFound("clustering checkpoint".into()))?;
        let cp: ClusteringCheckpoint = serde_json::from_str(&detail)?;
        let snippets = self.store.list_snippets(domain.id)?;
        let by_index: Vec<&Snippet> = cp
            .snippet_ids
            .iter()
            .map(|id| snippets.iter().find(|s| s.id == *id).ok_or_else(|| StoreError::NotFound(format!("snippet {id}"))))
            .collect::<Result<_, _>>()?;
        let candidates = assemble_candidates(domain.id, &cp.snippet_ids, &cp.points, &cp.assignments, &self.config, |reps| {
            let members: Vec<(&str, &str)> = reps.iter().map(|&i| (by_index[i].goal.as_str(), by_index[i].code.as_str())).collect();
            self.gateway.name_cluster(&members)
        });
        self.store.replace_candidates(domain.id, &candidates)?;
        Ok(())
    }
}

/// PCA-reduces the vectors and clusters them with silhouette-selected K.
/// Small or degenerate inputs fall back to a single cluster.
pub fn cluster_points(
    raw: &[Vec<f64>],
    config: &PipelineConfig,
) -> Result<(Vec<Vec<f64>>, Vec<usize>, Option<ClusteringSummary>), ClusterError> {
    if raw.is_empty() {
        return Ok((Vec::new(), Vec::new(), None));
    }
    let pca = match fit_pca(raw, config.pca_variance) {
        Ok(p) => Some(p),
        Err(ClusterError::Degenerate(msg)) => {
            log::warn!("PCA skipped: {msg}");
            None
        }
        Err(ClusterError::Precondition(_)) if raw.len() < 2 => None,
        Err(e) => return Err(e),
    };
    let points = match &pca {
        Some(p) => p.project_all(raw),
        None => raw.to_vec(),
    };
    let m = pca.as_ref().map_or(0, |p| p.m);
    if pca.is_none() || points.len() < config.k_min + 1 {
        let km = cluster::kmeans(&points, 1, &cluster::kmeans_options(config))?;
        let summary = ClusteringSummary { pca_components: m, k: 1, silhouettes: Vec::new(), inertia: km.inertia };
        return Ok((points, km.assignments, Some(summary)));
    }
    let result = select_k_and_cluster(&points, config)?;
    let summary =
        ClusteringSummary { pca_components: m, k: result.k, silhouettes: result.silhouettes, inertia: result.inertia };
    Ok((points, result.assignments, Some(summary)))
}

/// The domain's goal-snippet corpus for evaluation, with raw embeddings.
///
/// With `star`, only the representatives of the flagged (largest) candidates
/// are kept, in candidate rank order.
pub fn domain_corpus(store: &Store, domain: DomainId, label: &str, star: bool) -> Result<EvaluationCorpus, StoreError> {
    let snippets: Vec<Snippet> = store.list_snippets(domain)?.into_iter().filter(|s| s.embedding.is_some()).collect();
    let chosen: Vec<&Snippet> = if star {
        let candidates = store.list_candidates(domain)?;
        candidates
            .iter()
            .filter(|c| c.top)
            .flat_map(|c| c.representative_ids.iter())
            .filter_map(|id| snippets.iter().find(|s| s.id == *id))
            .collect()
    } else {
        snippets.iter().collect()
    };
    Ok(EvaluationCorpus {
        label: label.to_string(),
        members: chosen.iter().map(|s| s.code.clone()).collect(),
        embeddings: Some(chosen.iter().map(|s| s.embedding.clone().expect("filtered").into_inner()).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashEmbedder;
    use crate::llm::{FnProvider, GatewayOptions, PromptKind, PromptRequest};

    fn scripted() -> Gateway {
        let provider = FnProvider::new("scripted", |r: &PromptRequest| {
            let v = r.values[r.values.len() - 1].1.clone();
            Ok(match r.kind {
                PromptKind::UseCases => "1. Load data\n2. Sum a column\n3. Broken one\n4. Print rows".into(),
                PromptKind::CodeForUseCase if v.starts_with("Broken") => "def f(:".into(),
                PromptKind::CodeForUseCase => format!("import pandas as pd\ndf = pd.read_csv('x.csv')\nprint('{v}')\n"),
                PromptKind::SubgoalAnnotate => {
                    let mut lines = v.lines();
                    let first = lines.next().unwrap_or("");
                    let rest: Vec<&str> = lines.collect();
                    format!("# Import pandas\n{first}\n# Work with the data\n{}\n", rest.join("\n"))
                }
                PromptKind::ChangeableAreas => "```\n'x.csv'\n```".into(),
                PromptKind::ClusterName => "Name: Cluster".into(),
                _ => String::new(),
            })
        });
        Gateway::new(Arc::new(provider), GatewayOptions::default())
    }

    #[test]
    fn end_to_end_small() {
        let store = Store::open_in_memory().unwrap();
        let d = store.create_domain("pd", "pandas", "python").unwrap();
        let cfg = PipelineConfig { n_use_cases: 4, ..Default::default() };
        let p = Pipeline::new(&store, scripted(), Arc::new(HashEmbedder::new(32)), cfg);
        let m = p.run(&d).unwrap();
        assert_eq!((m.counts.use_cases, m.counts.programs, m.counts.valid_programs), (4, 4, 3));
        assert_eq!(m.counts.snippets, 6);
        assert_eq!(m.counts.embedded_snippets, 6);
        let cands = store.list_candidates(d.id).unwrap();
        assert_eq!(cands.iter().map(|c| c.size).sum::<usize>(), 6);
        let snips = store.list_snippets(d.id).unwrap();
        let with_spans = snips.iter().filter(|s| !s.changeable_spans.is_empty()).count();
        assert_eq!(with_spans, 3);

        // Second run reuses every checkpoint.
        let before = store.snapshot(d.id).unwrap();
        let m2 = p.run(&d).unwrap();
        assert!(m2.stages.iter().all(|s| !s.ran));
        assert_eq!(store.snapshot(d.id).unwrap(), before);
    }

    #[test]
    fn failing_stage_is_named_and_resumable() {
        let store = Store::open_in_memory().unwrap();
        let d = store.create_domain("pd", "pandas", "python").unwrap();
        let bad = Gateway::new(
            Arc::new(FnProvider::new("scripted", |r: &PromptRequest| match r.kind {
                PromptKind::UseCases => Ok("1. a\n2. b".into()),
                _ => Err(LlmError::Malformed("nope".into())),
            })),
            GatewayOptions::default(),
        );
        let cfg = PipelineConfig { n_use_cases: 2, ..Default::default() };
        let err = Pipeline::new(&store, bad, Arc::new(HashEmbedder::new(8)), cfg).run(&d).unwrap_err();
        assert!(matches!(err, PipelineError::Stage { stage: Stage::Programs, .. }));
        assert_eq!(store.completed_stages(d.id).unwrap(), vec!["use_cases"]);
        assert_eq!(store.counts(d.id).unwrap().programs, 0);
    }

    #[test]
    fn single_cluster_fallback() {
        let (pts, asg, s) = cluster_points(&[vec![1.0, 0.0], vec![0.0, 1.0]], &PipelineConfig::default()).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(asg, vec![0, 0]);
        assert_eq!(s.unwrap().k, 1);
    }
}
