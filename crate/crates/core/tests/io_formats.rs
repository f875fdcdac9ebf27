use std::fs;

use annotinfer::harness::{simulate_replicate, CellEstimator, ExperimentSummary};
use annotinfer::io::{
    emit_figure, read_dataset, read_dataset_csv, read_summaries, render_summary, write_dataset,
    write_dataset_csv, write_summary, SummaryFormat,
};
use annotinfer::{
    pessimist_mean, ppi_mean, AnnotationCondition, Dataset64, Error, LabeledRecord, Label,
    SimulationConfig,
};
use proptest::prelude::*;

fn summary(cond: AnnotationCondition, delta: f64, mean: f64) -> ExperimentSummary {
    ExperimentSummary {
        condition: cond,
        delta,
        estimator: CellEstimator::Dsl,
        mean_estimate: mean,
        p2_5: mean - 0.123_456_789,
        p97_5: mean + 0.2,
        covers_truth: (mean - 0.123_456_789..=mean + 0.2).contains(&1.0),
        truth: 1.0,
    }
}

#[test]
fn two_row_file_has_two_labeled() {
    let csv = "id,y,x,llm_label,gold_label\na,1.5,0.2,1,1\nb,-0.5,1.1,0,0\n";
    let ds: Dataset64 = read_dataset(csv.as_bytes()).unwrap();
    assert_eq!(ds.n_labeled(), 2);
    assert_eq!(ds.covariates, vec!["x"]);
}

#[test]
fn empty_gold_column_leaves_nothing_labeled() {
    let csv = "id,y,x,llm_label,gold_label\na,1.5,0.2,1,\nb,-0.5,1.1,0,\nc,0.1,0.0,1,\n";
    let ds: Dataset64 = read_dataset(csv.as_bytes()).unwrap();
    assert_eq!(ds.n_labeled(), 0);
    assert!(ds.records.iter().all(|r| !r.sampled));
    assert!(pessimist_mean::<f64>(&ds.gold_labels()).is_err());
    let llm = ds.llm_labels().unwrap();
    assert!(ppi_mean::<f64>(&llm, &ds.paired_labels().unwrap()).is_err());
}

#[test]
fn several_covariates_and_yes_no_labels() {
    let csv = "id,y,age,urban,llm_label,gold_label\n1,2.0,30,0.5,yes,no\n2,1.0,41,0.1,No,\n";
    let ds: Dataset64 = read_dataset(csv.as_bytes()).unwrap();
    assert_eq!(ds.covariates, vec!["age", "urban"]);
    assert_eq!(ds.records[0].llm_label, Some(Label::ONE));
    assert_eq!(ds.records[0].gold_label, Some(Label::ZERO));
    assert_eq!(ds.records[1].x, vec![41.0, 0.1]);
}

#[test]
fn malformed_rows_report_line_numbers() {
    let csv = "id,y,x,llm_label,gold_label\na,1,0,1,1\nb,oops,0,1,1\n";
    match read_dataset::<f64, _>(csv.as_bytes()) {
        Err(Error::Parse { line, reason }) => {
            assert_eq!(line, 3);
            assert!(reason.contains("'y'"), "{reason}");
        }
        other => panic!("{other:?}"),
    }
    let short = "id,y,x,llm_label,gold_label\na,1,0,1,1\nb,1,0\n";
    assert!(matches!(
        read_dataset::<f64, _>(short.as_bytes()),
        Err(Error::Parse { line: 3, .. })
    ));
    let bad_label = "id,y,x,llm_label,gold_label\na,1,0,2,1\n";
    assert!(matches!(
        read_dataset::<f64, _>(bad_label.as_bytes()),
        Err(Error::Parse { line: 2, .. })
    ));
}

#[test]
fn mixed_alphabet_is_rejected() {
    let csv = "id,y,x,llm_label,gold_label\na,1,0,1,1\nb,1,0,yes,\n";
    match read_dataset::<f64, _>(csv.as_bytes()) {
        Err(Error::Parse { line, reason }) => {
            assert_eq!(line, 3);
            assert!(reason.contains("mixed label alphabet"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn bad_header_is_rejected() {
    let csv = "id,outcome,x,llm_label,gold_label\na,1,0,1,1\n";
    assert!(matches!(
        read_dataset::<f64, _>(csv.as_bytes()),
        Err(Error::Parse { line: 1, .. })
    ));
}

#[test]
fn simulated_dataset_round_trips() {
    let cfg = SimulationConfig {
        n_total: 1000,
        ..Default::default()
    };
    let ann =
        simulate_replicate(&cfg, AnnotationCondition::PRAGMATIST, CellEstimator::Dsl, 8).unwrap();
    let ds = ann.to_dataset::<f64>();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    write_dataset_csv(&ds, &path).unwrap();
    let back: Dataset64 = read_dataset_csv(&path).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back.n_labeled(), 100);
}

fn record_strategy() -> impl Strategy<Value = LabeledRecord<f64>> {
    (
        "[a-z0-9]{1,8}",
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        prop::option::of(any::<bool>()),
        prop::option::of(any::<bool>()),
    )
        .prop_map(|(id, y, x, f, g)| {
            LabeledRecord::new(id, y, vec![x], f.map(Label::from_bool), g.map(Label::from_bool))
        })
}

proptest! {
    #[test]
    fn read_after_write_is_identity(records in prop::collection::vec(record_strategy(), 0..40)) {
        let ds = Dataset64::new(vec!["x".into()], records);
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let back: Dataset64 = read_dataset(buf.as_slice()).unwrap();
        prop_assert_eq!(back, ds);
    }
}

#[test]
fn summary_csv_golden() {
    let rows = [summary(AnnotationCondition::PRAGMATIST, 0.1, 1.0123456789)];
    let bytes = render_summary(&rows, SummaryFormat::Csv, "abc123").unwrap();
    let expected = "condition,row,delta,estimator,mean_estimate,p2_5,p97_5,covers_truth,truth,manifest\n\
complete/complete,Pragmatist,0.1,dsl,1.01235,0.888889,1.21235,true,1,abc123\n";
    assert_eq!(String::from_utf8(bytes).unwrap(), expected);
}

#[test]
fn summary_json_golden() {
    let rows = [summary(AnnotationCondition::CONCEPTUALIZATION_ERROR, 0.3, -0.5427273)];
    let bytes = render_summary(&rows, SummaryFormat::Json, "abc123").unwrap();
    let expected = r#"{
  "manifest": "abc123",
  "summaries": [
    {
      "condition": "incomplete/incomplete",
      "covers_truth": false,
      "delta": 0.3,
      "estimator": "dsl",
      "mean_estimate": -0.542727,
      "p2_5": -0.666184,
      "p97_5": -0.342727,
      "row": "Conceptualization error",
      "truth": 1.0
    }
  ]
}
"#;
    assert_eq!(String::from_utf8(bytes).unwrap(), expected);
}

#[test]
fn summary_writes_are_deterministic_and_readable() {
    let rows: Vec<_> = [0.05, 0.1, 0.2, 0.3]
        .iter()
        .flat_map(|&d| {
            [
                summary(AnnotationCondition::PRAGMATIST, d, 1.0 + d),
                summary(AnnotationCondition::CONCEPTUALIZATION_ERROR, d, -0.5 - d),
            ]
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    for format in [SummaryFormat::Csv, SummaryFormat::Json] {
        let a = dir.path().join(format!("a.{}", format.extension()));
        let b = dir.path().join(format!("b.{}", format.extension()));
        write_summary(&rows, &a, format, "m").unwrap();
        write_summary(&rows, &b, format, "m").unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        let (back, manifest) = read_summaries(&a).unwrap();
        assert_eq!(manifest, "m");
        assert_eq!(back.len(), 8);
        assert_eq!(back[3].condition, rows[3].condition);
        assert!((back[3].mean_estimate - rows[3].mean_estimate).abs() < 1e-5);
    }
    let csv = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(write_summary(&[], dir.path().join("e.csv"), SummaryFormat::Csv, "m").is_err());
    assert!(write_summary(&rows, dir.path().join("no/such/dir.csv"), SummaryFormat::Csv, "m").is_err());
}

fn count(svg: &str, needle: &str) -> usize {
    svg.matches(needle).count()
}

#[test]
fn figure_elements() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.svg");
    emit_figure(&[summary(AnnotationCondition::PRAGMATIST, 0.1, 1.0)], &path, "m").unwrap();
    let svg = fs::read_to_string(&path).unwrap();
    assert_eq!(count(&svg, r#"class="mean""#), 1);
    assert_eq!(count(&svg, r#"class="band""#), 1);
    assert_eq!(count(&svg, r#"class="truth""#), 1);
    assert_eq!(count(&svg, "stroke-dasharray"), 1);
    assert!(svg.contains("manifest: m"));

    assert!(emit_figure(&[], &path, "m").is_err());

    let rows: Vec<_> = [0.05, 0.1, 0.2, 0.3]
        .iter()
        .flat_map(|&d| {
            [
                summary(AnnotationCondition::PRAGMATIST, d, 1.0 + d),
                summary(AnnotationCondition::CONCEPTUALIZATION_ERROR, d, -0.5 - d),
            ]
        })
        .collect();
    emit_figure(&rows, &path, "m").unwrap();
    let svg = fs::read_to_string(&path).unwrap();
    assert_eq!(count(&svg, r#"class="mean""#), 8);
    assert_eq!(count(&svg, r#"class="band""#), 8);
    assert_eq!(count(&svg, r#"class="group""#), 2);
    let first_group = svg.split(r#"class="group""#).nth(1).unwrap();
    let first_group = first_group.split("</g>").next().unwrap();
    assert_eq!(count(first_group, r#"class="mean""#), 4);

    let mut mixed = rows.clone();
    mixed[0].estimator = CellEstimator::OptimistOls;
    assert!(emit_figure(&mixed, &path, "m").is_err());
}
