use edgelab_core::edgesym::assemble;
use edgelab_core::fredholm::{analyze, TrendPolicy};
use edgelab_core::mesh::{build_graded, refinement_sequence};
use edgelab_core::report::{emit_csv, emit_json, sha256_file, RunManifest};

#[test]
fn analysis_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let ms = refinement_sequence(&build_graded(20.0, 128, 4.0, 0).unwrap(), 3).unwrap();
    let run = |tag: &str| {
        let reports: Vec<_> = [0.25, 1.0, 1.75]
            .iter()
            .map(|&g| {
                analyze(
                    &assemble(g, 1.0, 1.0, &ms[0]).unwrap(),
                    &ms,
                    &TrendPolicy::default(),
                )
                .unwrap()
            })
            .collect();
        let c = dir.path().join(format!("{tag}.csv"));
        let j = dir.path().join(format!("{tag}.json"));
        emit_csv(&reports, &c).unwrap();
        emit_json(&reports, &j).unwrap();
        (sha256_file(&c).unwrap(), sha256_file(&j).unwrap())
    };
    assert_eq!(run("a"), run("b"));
    let text = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn manifest_side_file_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.json");
    std::fs::write(&input, "{}").unwrap();
    let mut m = RunManifest::new(
        "dtn spectrum",
        serde_json::json!({"dtn": {"modes": 8}}),
        None,
    );
    m.add_input(&input).unwrap();
    let out = dir.path().join("dtn_spectrum");
    let side = m.write_for(&out).unwrap();
    let back: RunManifest = serde_json::from_str(&std::fs::read_to_string(&side).unwrap()).unwrap();
    assert_eq!(back.digest().unwrap(), m.digest().unwrap());
    assert_eq!(
        back.input_digests.values().next().unwrap(),
        &sha256_file(&input).unwrap()
    );
}
