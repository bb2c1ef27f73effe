use pforge::model::DiagnosticKind;
use pforge::verifier::classify_diagnostics;
use serde::Deserialize;

#[derive(Deserialize)]
struct Corpus {
    cases: Vec<Case>,
}

#[derive(Deserialize)]
struct Case {
    id: String,
    exit_code: Option<i32>,
    raw_output: String,
    expected: Vec<Expected>,
}

#[derive(Deserialize, Debug, PartialEq)]
struct Expected {
    kind: DiagnosticKind,
    line: Option<u32>,
}

#[test]
fn corpus_labels_match_exactly() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/diagnostics_corpus.json")).unwrap();
    let corpus: Corpus = serde_json::from_str(&text).unwrap();
    assert!(corpus.cases.len() >= 12);
    for case in &corpus.cases {
        let got: Vec<Expected> = classify_diagnostics(&case.raw_output, case.exit_code)
            .into_iter()
            .map(|d| Expected { kind: d.kind, line: d.line })
            .collect();
        assert_eq!(got, case.expected, "case {}", case.id);
    }
}
