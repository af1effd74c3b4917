//! Corpus evaluation: complexity means, distinct-method sets and pairwise set
//! distances, plus the fixed-layout text table.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::complexity::{distinct_methods, measure};
use super::distance::{hausdorff, wasserstein, WassersteinOptions};
use super::MetricsError;
use crate::model::squared_euclidean;

/// A labelled set of code members, optionally with one embedding per member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationCorpus {
    pub label: String,
    pub members: Vec<String>,
    pub embeddings: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    /// Label pairs to compare with both distances.
    pub pairs: Vec<(String, String)>,
    pub wasserstein: WassersteinOptions,
    /// Free-form description of the space the embeddings live in.
    pub embedding_space: Option<String>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { pairs: Vec::new(), wasserstein: WassersteinOptions::default(), embedding_space: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub loc: f64,
    pub cyclomatic: f64,
    pub halstead_volume: f64,
    pub cognitive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub label: String,
    pub n: usize,
    pub means: MetricMeans,
    pub distinct_methods: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    pub hausdorff: f64,
    pub wasserstein: f64,
    pub shared_methods: Vec<String>,
    pub only_a_methods: Vec<String>,
    pub only_b_methods: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub corpora: Vec<CorpusSummary>,
    pub pairs: Vec<PairComparison>,
    pub embedding_space: Option<String>,
}

pub fn evaluate(corpora: &[EvaluationCorpus], config: &EvaluationConfig) -> Result<EvaluationReport, MetricsError> {
    let mut seen = HashSet::new();
    for c in corpora {
        if !seen.insert(c.label.as_str()) {
            return Err(MetricsError::Precondition(format!("duplicate corpus label `{}`", c.label)));
        }
    }
    let summaries = corpora
        .iter()
        .map(|c| summarize(c).map_err(|e| in_corpus(&c.label, e)))
        .collect::<Result<Vec<_>, _>>()?;

    let find = |label: &str| {
        corpora
            .iter()
            .position(|c| c.label == label)
            .ok_or_else(|| MetricsError::UnknownLabel(label.to_string()))
    };
    let mut pairs = Vec::with_capacity(config.pairs.len());
    for (a, b) in &config.pairs {
        let (ia, ib) = (find(a)?, find(b)?);
        let ea = embeddings_of(&corpora[ia])?;
        let eb = embeddings_of(&corpora[ib])?;
        let h = hausdorff(ea, eb).map_err(|e| in_corpus(&format!("{a}:{b}"), e))?;
        let w = wasserstein(ea, eb, &config.wasserstein).map_err(|e| in_corpus(&format!("{a}:{b}"), e))?;
        let ma: BTreeSet<_> = summaries[ia].distinct_methods.iter().cloned().collect();
        let mb: BTreeSet<_> = summaries[ib].distinct_methods.iter().cloned().collect();
        pairs.push(PairComparison {
            a: a.clone(),
            b: b.clone(),
            hausdorff: h,
            wasserstein: w,
            shared_methods: ma.intersection(&mb).cloned().collect(),
            only_a_methods: ma.difference(&mb).cloned().collect(),
            only_b_methods: mb.difference(&ma).cloned().collect(),
        });
    }
    Ok(EvaluationReport { corpora: summaries, pairs, embedding_space: config.embedding_space.clone() })
}

fn in_corpus(label: &str, e: MetricsError) -> MetricsError {
    MetricsError::Corpus { label: label.to_string(), source: Box::new(e) }
}

fn embeddings_of(c: &EvaluationCorpus) -> Result<&[Vec<f64>], MetricsError> {
    match &c.embeddings {
        Some(e) if e.len() == c.members.len() => Ok(e),
        Some(e) => Err(in_corpus(
            &c.label,
            MetricsError::Precondition(format!("{} embeddings for {} members", e.len(), c.members.len())),
        )),
        None => Err(in_corpus(&c.label, MetricsError::Precondition("distances need embeddings".into()))),
    }
}

fn summarize(c: &EvaluationCorpus) -> Result<CorpusSummary, MetricsError> {
    if c.members.is_empty() {
        return Err(MetricsError::Precondition("corpus has no members".into()));
    }
    let records: Vec<_> = c.members.par_iter().map(|m| measure(m)).collect();
    let n = records.len() as f64;
    let means = MetricMeans {
        loc: records.iter().map(|r| r.loc as f64).sum::<f64>() / n,
        cyclomatic: records.iter().map(|r| r.cyclomatic as f64).sum::<f64>() / n,
        halstead_volume: records.iter().map(|r| r.halstead_volume).sum::<f64>() / n,
        cognitive: records.iter().map(|r| r.cognitive as f64).sum::<f64>() / n,
    };
    let methods: BTreeSet<String> = c.members.iter().flat_map(|m| distinct_methods(m)).collect();
    Ok(CorpusSummary { label: c.label.clone(), n: records.len(), means, distinct_methods: methods.into_iter().collect() })
}

/// Column headers of the complexity table, in reporting order.
pub const METRIC_COLUMNS: [&str; 4] = ["Lines of Code", "Cyclomatic Complexity", "Halstead Volume", "Cognitive Complexity"];

impl EvaluationReport {
    /// Aligned-column text rendering: one row per corpus with the four metric
    /// columns, then a Hausdorff row and a Wasserstein row with one column per
    /// compared pair.
    pub fn to_table(&self) -> String {
        let mut header = vec!["Corpus".to_string(), "n".to_string()];
        header.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
        let mut rows = vec![header];
        for c in &self.corpora {
            rows.push(vec![
                c.label.clone(),
                c.n.to_string(),
                format!("{:.2}", c.means.loc),
                format!("{:.2}", c.means.cyclomatic),
                format!("{:.2}", c.means.halstead_volume),
                format!("{:.3}", c.means.cognitive),
            ]);
        }
        let mut out = render_rows(&rows);
        if !self.pairs.is_empty() {
            let mut header = vec!["Distance".to_string()];
            header.extend(self.pairs.iter().map(|p| format!("{}:{}", p.a, p.b)));
            let mut h = vec!["Hausdorff".to_string()];
            h.extend(self.pairs.iter().map(|p| format!("{:.2}", p.hausdorff)));
            let mut w = vec!["Wasserstein".to_string()];
            w.extend(self.pairs.iter().map(|p| format!("{:.2}", p.wasserstein)));
            out.push('\n');
            out.push_str(&render_rows(&[header, h, w]));
        }
        if let Some(space) = &self.embedding_space {
            let _ = writeln!(out, "\nembedding space: {space}");
        }
        out
    }
}

fn render_rows(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|i| rows.iter().filter_map(|r| r.get(i)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, cell)| if i == 0 { format!("{cell:<w$}", w = widths[i]) } else { format!("{cell:>w$}", w = widths[i]) })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Picks the `per_cluster` members nearest each centroid from the `top`
/// largest clusters. Returns `(cluster index, member index)` pairs, clusters
/// in size order (ties by index), members by ascending distance (ties by
/// index).
pub fn representative_subsample(clusters: &[Vec<Vec<f64>>], top: usize, per_cluster: usize) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..clusters.len()).filter(|&i| !clusters[i].is_empty()).collect();
    order.sort_by(|&a, &b| clusters[b].len().cmp(&clusters[a].len()).then(a.cmp(&b)));
    order.truncate(top);
    let mut picked = Vec::new();
    for ci in order {
        let members = &clusters[ci];
        let dim = members[0].len();
        let mut centroid = vec![0.0; dim];
        for m in members {
            for (c, v) in centroid.iter_mut().zip(m) {
                *c += v;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= members.len() as f64);
        let mut idx: Vec<(f64, usize)> =
            members.iter().enumerate().map(|(i, m)| (squared_euclidean(m, &centroid), i)).collect();
        idx.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        picked.extend(idx.into_iter().take(per_cluster).map(|(_, i)| (ci, i)));
    }
    picked
}
