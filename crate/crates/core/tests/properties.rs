//! Property tests for the invariants the metrics, segmenter, clustering and
//! prompt layers promise.

use proptest::collection::vec;
use proptest::prelude::*;

use planmine_core::cluster::{fit_pca, kmeans, mean_silhouette, KMeansOptions};
use planmine_core::llm::{render as render_prompt, Placeholder, PromptKind};
use planmine_core::metrics::distance::exact_matching_cost;
use planmine_core::metrics::{cyclomatic, halstead, halstead_volume, hausdorff, tokenize, wasserstein, WassersteinOptions};
use planmine_core::segment::{localize_fragments, render, segment, validate_syntax};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn brute_matching(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    permutations(a.len())
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| dist(&a[i], &b[j])).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        / a.len() as f64
}

fn point_set(n: std::ops::RangeInclusive<usize>, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    vec(vec(-10.0f64..10.0, d), n)
}

/// Python-ish text: code-like characters, comment markers, quotes and odd
/// line endings.
fn pythonish() -> impl Strategy<Value = String> {
    vec(
        prop_oneof![
            Just("# goal\n".to_string()),
            Just("    # nested\n".to_string()),
            Just("x = 1\n".to_string()),
            Just("if a and b:\n    pass\n".to_string()),
            Just("s = \"# no\"\n".to_string()),
            Just("'''\n# inside\n'''\n".to_string()),
            Just("\r\n".to_string()),
            Just("\n".to_string()),
            Just("\t".to_string()),
            Just("\\\n".to_string()),
            "[ -~]{0,12}",
            "\\PC{0,4}",
        ],
        0..12,
    )
    .prop_map(|parts| parts.concat())
}

/// Inter-token layout: whitespace and explicit line joins.
fn is_layout(gap: &str) -> bool {
    gap.replace("\\\r\n", "").replace("\\\n", "").chars().all(char::is_whitespace)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn tokens_cover_source_in_order(src in pythonish()) {
        let tokens = tokenize(&src);
        let mut at = 0;
        for t in &tokens {
            prop_assert!(t.span.start >= at);
            prop_assert!(is_layout(&src[at..t.span.start]), "gap {:?}", &src[at..t.span.start]);
            prop_assert_eq!(&src[t.span.clone()], t.text);
            at = t.span.end;
        }
        prop_assert!(is_layout(&src[at..]));
    }

    #[test]
    fn segmentation_round_trips(src in pythonish()) {
        let seg = segment(&src);
        prop_assert_eq!(render(&seg), src.clone());
        for s in seg.all() {
            prop_assert_eq!(&src[s.code_offset..s.code_offset + s.code.len()], s.code.as_str());
        }
    }

    #[test]
    fn syntax_check_is_pure(src in pythonish()) {
        prop_assert_eq!(validate_syntax(&src), validate_syntax(&src));
    }

    #[test]
    fn metrics_bounds(src in pythonish()) {
        prop_assert!(cyclomatic(&src) >= 1);
        prop_assert!(halstead_volume(&src) >= 0.0);
    }

    #[test]
    fn flat_if_adds_one_decision(body in "[a-z]{1,6} = [0-9]{1,3}") {
        let base = format!("{body}\n");
        let more = format!("{base}if {body}:\n    pass\n").replace("if ", "if x == ");
        prop_assert_eq!(cyclomatic(&more), cyclomatic(&base) + 1);
    }

    #[test]
    fn repeating_source_doubles_lengths(stmt in "[a-z]{1,4} = [a-z]{1,4} \\+ [0-9]{1,2}") {
        let once = halstead(&stmt);
        let doubled = format!("{stmt}\n{stmt}");
        let twice = halstead(&doubled);
        prop_assert_eq!(twice.vocabulary(), once.vocabulary());
        prop_assert_eq!(twice.length(), 2 * once.length());
        let diff = halstead_volume(&doubled) - 2.0 * halstead_volume(&stmt);
        prop_assert!(diff.abs() < 1e-9);
    }

    #[test]
    fn localized_spans_are_safe(code in "\\PC{0,40}", frags in vec("\\PC{0,6}", 0..6)) {
        let loc = localize_fragments(&code, &frags);
        prop_assert!(loc.spans.len() + loc.discarded.len() <= frags.len());
        prop_assert!(loc.spans.len() <= frags.len());
        for w in loc.spans.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }
        for s in &loc.spans {
            prop_assert!(s.check(&code).is_ok());
        }
    }

    #[test]
    fn hausdorff_matches_definition(a in point_set(1..=6, 3), b in point_set(1..=6, 3)) {
        let directed = |x: &[Vec<f64>], y: &[Vec<f64>]| {
            x.iter().map(|p| y.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
        };
        let expected = directed(&a, &b).max(directed(&b, &a));
        let h = hausdorff(&a, &b).unwrap();
        prop_assert!((h - expected).abs() < 1e-9);
        prop_assert!((h - hausdorff(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn hausdorff_triangle(a in point_set(1..=5, 2), b in point_set(1..=5, 2), c in point_set(1..=5, 2)) {
        let ab = hausdorff(&a, &b).unwrap();
        let bc = hausdorff(&b, &c).unwrap();
        let ac = hausdorff(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn wasserstein_equal_sizes_is_optimal_matching((a, b) in (1usize..=6).prop_flat_map(|n| (point_set(n..=n, 2), point_set(n..=n, 2)))) {
        let w = wasserstein(&a, &b, &WassersteinOptions::default()).unwrap();
        prop_assert!((w - brute_matching(&a, &b)).abs() < 1e-9);
        prop_assert!((w - wasserstein(&b, &a, &WassersteinOptions::default()).unwrap()).abs() < 1e-9);
        prop_assert_eq!(wasserstein(&a, &a, &WassersteinOptions::default()).unwrap(), 0.0);
        prop_assert!((exact_matching_cost(&a, &b) - w).abs() < 1e-12);
    }

    #[test]
    fn kmeans_is_locally_optimal(points in point_set(4..=30, 2), k in 1usize..4, seed in 0u64..1000) {
        let r = kmeans(&points, k, &KMeansOptions { n_init: 3, seed, ..Default::default() }).unwrap();
        // every point sits with its nearest centroid
        for (p, &a) in points.iter().zip(&r.assignments) {
            let own = dist(p, &r.centroids[a]);
            for c in &r.centroids {
                prop_assert!(own <= dist(p, c) + 1e-9);
            }
        }
        let inertia: f64 = points.iter().zip(&r.assignments).map(|(p, &a)| dist(p, &r.centroids[a]).powi(2)).sum();
        prop_assert!((inertia - r.inertia).abs() <= 1e-9 * inertia.max(1.0));
    }

    #[test]
    fn silhouette_matches_pairwise_oracle(points in point_set(3..=8, 2), labels in vec(0usize..3, 8)) {
        let labels = &labels[..points.len()];
        let distinct: std::collections::BTreeSet<_> = labels.iter().collect();
        prop_assume!(distinct.len() >= 2);
        let n = points.len();
        let mut total = 0.0;
        for i in 0..n {
            let same: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
            if same.is_empty() {
                continue;
            }
            let a = same.iter().map(|&j| dist(&points[i], &points[j])).sum::<f64>() / same.len() as f64;
            let b = distinct
                .iter()
                .filter(|&&&l| l != labels[i])
                .map(|&&l| {
                    let other: Vec<usize> = (0..n).filter(|&j| labels[j] == l).collect();
                    other.iter().map(|&j| dist(&points[i], &points[j])).sum::<f64>() / other.len() as f64
                })
                .fold(f64::INFINITY, f64::min);
            if a.max(b) > 0.0 {
                total += (b - a) / a.max(b);
            }
        }
        let got = mean_silhouette(&points, labels).unwrap();
        prop_assert!((got - total / n as f64).abs() < 1e-9);
    }

    #[test]
    fn pca_components_are_orthonormal(points in point_set(3..=20, 4), target in 0.5f64..1.0) {
        let Ok(model) = fit_pca(&points, target) else { return Ok(()) };
        for (i, u) in model.components.iter().enumerate() {
            for (j, v) in model.components.iter().enumerate() {
                let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - expected).abs() < 1e-8);
            }
        }
        prop_assert!(model.retained_variance() >= target - 1e-12);
        let fewer: f64 = model.explained_variance_ratio[..model.m - 1].iter().sum();
        prop_assert!(fewer < target);
        for w in model.explained_variance_ratio.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn prompts_substitute_verbatim(value in "[^{}]{0,30}") {
        for kind in PromptKind::ALL {
            let values: Vec<(Placeholder, &str)> = kind.placeholders().into_iter().map(|p| (p, value.as_str())).collect();
            let mut expected = kind.template().to_string();
            for p in kind.placeholders() {
                expected = expected.replace(p.token(), &value);
            }
            prop_assert_eq!(render_prompt(kind, &values).unwrap(), expected);
        }
    }
}

#[test]
fn prompt_values_are_not_re_expanded() {
    let text = render_prompt(PromptKind::ChangeableAreas, &[(Placeholder::CodeSnippet, "{CODE_SNIPPET}")]).unwrap();
    assert_eq!(text.matches("{CODE_SNIPPET}").count(), 1);
}
