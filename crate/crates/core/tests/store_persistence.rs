//! A file-backed store survives being closed and reopened unchanged.

use planmine_core::segment::segment;
use planmine_core::store::{NewPlan, NewProgram, Store};
use planmine_core::{CodeSpan, Origin, PlanId, Vector};

#[test]
fn reopen_preserves_everything() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plans.db");
    let (domain, before) = {
        let store = Store::open(&path).unwrap();
        let d = store.create_domain("pandas", "pandas", "python").unwrap();
        let ucs = store.replace_use_cases(d.id, &["Load a CSV".into(), "Sum a column".into()]).unwrap();
        let annotated = "# Load the data\ndf = pd.read_csv(\"a.csv\")\n# Sum it\nprint(df.sum())\n";
        let programs = store
            .insert_programs(
                d.id,
                &[NewProgram {
                    use_case_id: Some(ucs[0].id),
                    source_path: None,
                    raw_source: annotated.replace("# Load the data\n", "").replace("# Sum it\n", ""),
                    annotated_source: String::new(),
                    syntactically_valid: true,
                    origin: Origin::Generated,
                }],
            )
            .unwrap();
        store.set_annotations(&[(programs[0].id, annotated.to_string())]).unwrap();
        store.replace_snippets(&[(programs[0].id, segment(annotated).snippets)]).unwrap();
        let snippets = store.list_snippets(d.id).unwrap();
        store.set_snippet_spans(&[(snippets[0].id, vec![CodeSpan::new(16, 23)])]).unwrap();
        store
            .set_embeddings(&[
                (snippets[0].id, Vector::new(vec![0.25, -1.5, 3.0]).unwrap()),
                (snippets[1].id, Vector::new(vec![1.0, 0.0, 0.1]).unwrap()),
            ])
            .unwrap();
        let p = store
            .create_plan(&NewPlan {
                name: "Reading a file".into(),
                solution: "df = pd.read_csv(\"a.csv\")".into(),
                changeable_areas: vec![CodeSpan::new(16, 23)],
                ..NewPlan::empty(d.id)
            })
            .unwrap();
        let q = store.create_plan(&NewPlan::empty(d.id)).unwrap();
        store.create_group(d.id, "Input", &[p.id, q.id], false).unwrap();
        store.mark_stage(d.id, "use_cases", "{}").unwrap();
        let snap = store.snapshot(d.id).unwrap();
        (d, snap)
    };

    let store = Store::open(&path).unwrap();
    let after = store.snapshot(domain.id).unwrap();
    assert_eq!(before, after);
    assert_eq!(after.plans.len(), 2);
    assert_eq!(after.groups[0].plan_ids.len(), 2);
    assert_eq!(after.snippets[0].embedding.as_ref().unwrap().as_slice(), &[0.25, -1.5, 3.0]);
    assert!(store.get_plan(PlanId(999)).is_err());
}
