//! `eval run`: load labelled corpora, embed them into one shared space and
//! write the evaluation report.

use std::fs;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use planmine_core::cluster::fit_pca;
use planmine_core::config::Settings;
use planmine_core::metrics::{evaluate, EvaluationConfig, EvaluationCorpus};
use planmine_core::pipeline::domain_corpus;
use planmine_core::store::{CorpusFilter, Store};

use crate::{embedder, write_file, write_json, Failure};

type CliResult<T = ()> = Result<T, Failure>;

fn parse_corpus(spec: &str) -> CliResult<(String, String)> {
    match spec.split_once('=') {
        Some((l, s)) if !l.trim().is_empty() && !s.trim().is_empty() => Ok((l.trim().into(), s.trim().into())),
        _ => Err(Failure::usage(format!("--corpus expects `label=source`, got `{spec}`"))),
    }
}

fn parse_pair(spec: &str, labels: &[String]) -> CliResult<(String, String)> {
    let (a, b) = spec
        .split_once(':')
        .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
        .ok_or_else(|| Failure::usage(format!("--pairs expects `a:b`, got `{spec}`")))?;
    for l in [&a, &b] {
        if !labels.contains(l) {
            return Err(Failure::usage(format!("pair `{spec}` names unknown corpus `{l}`")));
        }
    }
    Ok((a, b))
}

/// Files under `path` the default filter accepts, one member each; a plain
/// file is a single member.
fn read_members(path: &Path) -> CliResult<Vec<String>> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| Failure::runtime(format!("{}: {e}", p.display())));
    if path.is_file() {
        return Ok(vec![read(path)?]);
    }
    let filter = CorpusFilter::default();
    let mut out = Vec::new();
    for entry in WalkDir::new(path).sort_by_file_name() {
        let entry = entry.map_err(Failure::runtime)?;
        let name = entry.file_name().to_string_lossy();
        if entry.file_type().is_file() && filter.accepts_name(&name) {
            out.push(read(entry.path())?);
        }
    }
    Ok(out)
}

pub fn run(settings: &Settings, corpora: &[String], pairs: &[String], out: &Path, star: bool) -> CliResult {
    let specs = corpora.iter().map(|c| parse_corpus(c)).collect::<CliResult<Vec<_>>>()?;
    let labels: Vec<String> = specs.iter().map(|(l, _)| l.clone()).collect();
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Failure::usage(format!("corpus label `{l}` given twice")));
        }
    }
    let pairs = pairs.iter().filter(|p| !p.trim().is_empty()).map(|p| parse_pair(p, &labels)).collect::<CliResult<Vec<_>>>()?;

    let emb = embedder(settings);
    let mut store: Option<Store> = None;
    let mut loaded = Vec::new();
    for (label, source) in &specs {
        let path = PathBuf::from(source);
        let corpus = if path.exists() {
            let members = read_members(&path)?;
            let refs: Vec<&str> = members.iter().map(String::as_str).collect();
            let vectors = emb.embed_batch(&refs).map_err(Failure::runtime)?;
            EvaluationCorpus {
                label: label.clone(),
                members,
                embeddings: Some(vectors.into_iter().map(|v| v.into_inner()).collect()),
            }
        } else {
            if store.is_none() {
                if !settings.db.exists() {
                    return Err(Failure::usage(format!("`{source}` is neither a path nor a domain (no store at {})", settings.db.display())));
                }
                store = Some(Store::open(&settings.db).map_err(Failure::runtime)?);
            }
            let s = store.as_ref().expect("opened above");
            let d = s
                .domain_by_name(source)
                .map_err(Failure::runtime)?
                .ok_or_else(|| Failure::usage(format!("`{source}` is neither a path nor a domain")))?;
            domain_corpus(s, d.id, label, star).map_err(Failure::runtime)?
        };
        loaded.push(corpus);
    }

    let space = project_pooled(&mut loaded, settings.pipeline.pca_variance, emb.id());
    let config = EvaluationConfig { pairs, embedding_space: Some(space), ..Default::default() };
    let report = evaluate(&loaded, &config).map_err(Failure::runtime)?;
    write_json(out, &report)?;
    let table = report.to_table();
    write_file(&out.with_extension("txt"), &table)?;
    print!("{table}");
    Ok(())
}

/// Fits one PCA over every corpus's embeddings and projects them all, so
/// distances are measured in a shared reduced space. Falls back to the raw
/// space when the pool is too small or degenerate.
fn project_pooled(corpora: &mut [EvaluationCorpus], target: f64, embedder_id: &str) -> String {
    let pooled: Vec<Vec<f64>> = corpora.iter().filter_map(|c| c.embeddings.as_ref()).flatten().cloned().collect();
    let same_dim = pooled.windows(2).all(|w| w[0].len() == w[1].len());
    if !same_dim {
        return format!("{embedder_id}, raw");
    }
    match fit_pca(&pooled, target).ok() {
        Some(model) => {
            for c in corpora.iter_mut() {
                if let Some(e) = c.embeddings.as_mut() {
                    *e = model.project_all(e);
                }
            }
            format!("{embedder_id}, pooled PCA to {} components ({target} variance)", model.m)
        }
        None => format!("{embedder_id}, raw"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_parse() {
        assert_eq!(parse_corpus("a=dir/x").ok().unwrap(), ("a".into(), "dir/x".into()));
        assert!(parse_corpus("nolabel").is_err());
        assert!(parse_corpus("=x").is_err());
        let labels = vec!["a".to_string(), "b".to_string()];
        assert_eq!(parse_pair("a:b", &labels).ok().unwrap(), ("a".into(), "b".into()));
        let err = parse_pair("a:c", &labels).err().unwrap();
        assert_eq!(err.code, 2);
    }
}
