//! Lossless segmentation over the fifty programs in
//! `fixtures/segment_programs.json`; the first entries are the edge cases below.

use planmine_core::segment::{render, segment};

/// (source, expected number of goal-carrying snippets, preamble expected)
const EDGE_CASES: &[(&str, usize, bool)] = &[
    ("", 0, false),
    ("\n", 0, true),
    ("x = 1", 0, true),
    ("# only a comment", 0, true),
    ("# goal\nx = 1", 1, false),
    ("# goal\nx = 1\n", 1, false),
    ("# a\n# b\nx = 1\n", 1, false),
    ("# dangling goal\n\nx = 1\n", 0, true),
    ("import os\n# goal\nos.getcwd()\n", 1, true),
    ("# one\na = 1\n# two\nb = 2\n# three\nc = 3\n", 3, false),
    ("# goal\r\nx = 1\r\n# next\r\ny = 2\r\n", 2, false),
    ("# goal\nif x:\n\t# nested goal\n\ty = 1\n", 2, false),
    ("#!/usr/bin/env python\nimport sys\n", 1, false),
    ("s = \"\"\"\n# not a comment\nvalue\n\"\"\"\n", 0, true),
    ("# goal\nx = 1\n# trailing comment\n", 1, false),
    ("# goal \u{e9}t\u{e9} \u{1f600}\nname = \"caf\u{e9}\"\n", 1, false),
    ("#\nx = 1\n", 1, false),
    ("    # indented goal\n    y = 2\n", 1, false),
    ("# goal\nx = 1  # inline comment\n# next\ny = 2\n", 2, false),
    ("# goal   \nx = 1   \n\n\n# next\t\ny = 2", 2, false),
    ("# goal\n@decorator\ndef f():\n    # inner\n    return 1\n", 2, false),
    ("x = (\n    # inside parentheses\n    1\n)\n", 1, true),
];

fn programs() -> Vec<String> {
    serde_json::from_str(include_str!("fixtures/segment_programs.json")).unwrap()
}

#[test]
fn fifty_programs_round_trip() {
    let started = std::time::Instant::now();
    let programs = programs();
    assert_eq!(programs.len(), 50);
    for (i, (src, _, _)) in EDGE_CASES.iter().enumerate() {
        assert_eq!(&programs[i], src, "fixture file is out of step with the edge cases");
    }
    for (i, p) in programs.iter().enumerate() {
        let seg = segment(p);
        assert_eq!(&render(&seg), p, "program {i} did not round-trip");
        for s in seg.all() {
            assert_eq!(&p[s.code_offset..s.code_offset + s.code.len()], s.code, "program {i} offset");
        }
    }
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn edge_case_structure() {
    for (i, (src, n, preamble)) in EDGE_CASES.iter().enumerate() {
        let seg = segment(src);
        assert_eq!(seg.snippets.len(), *n, "case {i}: {src:?}");
        assert_eq!(seg.preamble.is_some(), *preamble, "case {i}: {src:?}");
    }
}

#[test]
fn goals_strip_markers() {
    let seg = segment("# Clean missing values\n# (fill with the mean)\ndf = df.fillna(0)\n");
    assert_eq!(seg.snippets[0].goal, "Clean missing values (fill with the mean)");
    let seg = segment("#\n#Compute totals\nx = 1\n");
    assert_eq!(seg.snippets[0].goal, "Compute totals");
}

