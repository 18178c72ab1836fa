use std::collections::BTreeMap;

use chrono::DateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sentiflow_core::corpus::{AspectLabel, Document, DomainId, Sentiment, Source};
use sentiflow_core::evalreport::*;
use sentiflow_core::Error;

/// Precision, recall and F1 for class `c` by walking the pairs directly.
fn pair_oracle(gold: &[usize], pred: &[usize], c: usize) -> (f64, f64, f64) {
    let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
    for (&g, &p) in gold.iter().zip(pred) {
        match (g == c, p == c) {
            (true, true) => tp += 1.0,
            (false, true) => fp += 1.0,
            (true, false) => fneg += 1.0,
            _ => {}
        }
    }
    let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let r = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
    let f = if tp > 0.0 {
        2.0 * tp / (2.0 * tp + fp + fneg)
    } else {
        0.0
    };
    (p, r, f)
}

fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (Vec<usize>, Vec<usize>) {
    let gold: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let pred = gold
        .iter()
        .map(|&g| if rng.gen_bool(0.6) { g } else { rng.gen_range(0..k) })
        .collect();
    (gold, pred)
}

#[test]
fn metrics_match_pairwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let names = ["a", "b", "c", "d"];
    for _ in 0..1000 {
        let k = rng.gen_range(2..=4);
        let n = rng.gen_range(1..=200);
        let (gold, pred) = random_labels(&mut rng, n, k);
        let cm = ConfusionMatrix::from_indices(&names[..k], &gold, &pred).unwrap();
        let m = metrics::<f64>(&cm).unwrap();
        let correct = gold.iter().zip(&pred).filter(|(g, p)| g == p).count();
        assert!((m.accuracy - correct as f64 / n as f64).abs() < 1e-12);
        let mut sums = (0.0, 0.0, 0.0);
        for c in 0..k {
            let (p, r, f) = pair_oracle(&gold, &pred, c);
            assert!((m.precision[c] - p).abs() < 1e-12);
            assert!((m.recall[c] - r).abs() < 1e-12);
            assert!((m.f1[c] - f).abs() < 1e-12);
            assert_eq!(m.support[c], gold.iter().filter(|&&g| g == c).count() as u64);
            sums = (sums.0 + p, sums.1 + r, sums.2 + f);
        }
        assert!((m.macro_precision - sums.0 / k as f64).abs() < 1e-12);
        assert!((m.macro_recall - sums.1 / k as f64).abs() < 1e-12);
        assert!((m.macro_f1 - sums.2 / k as f64).abs() < 1e-12);
    }
}

#[test]
fn confusion_tally_and_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gold: Vec<Sentiment> = (0..200).map(|_| Sentiment::ALL[rng.gen_range(0..3)]).collect();
    let pred: Vec<Sentiment> = (0..200).map(|_| Sentiment::ALL[rng.gen_range(0..3)]).collect();
    let cm = confusion(&gold, &pred).unwrap();
    assert_eq!(cm.total(), 200);
    for g in 0..3 {
        for p in 0..3 {
            let n = gold
                .iter()
                .zip(&pred)
                .filter(|(a, b)| a.index() == g && b.index() == p)
                .count();
            assert_eq!(cm.get(g, p), n as u64);
        }
    }
    assert!(matches!(confusion(&gold, &pred[..10]), Err(Error::InvalidInput(_))));
    assert!(metrics::<f64>(&ConfusionMatrix::zeros(&["x", "y"])).is_err());
}

#[test]
fn relabelling_classes_permutes_the_metrics() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let names = ["a", "b", "c"];
    let perm = [2usize, 0, 1];
    for _ in 0..100 {
        let (gold, pred) = random_labels(&mut rng, 150, 3);
        let m = metrics::<f64>(&ConfusionMatrix::from_indices(&names, &gold, &pred).unwrap()).unwrap();
        let pg: Vec<usize> = gold.iter().map(|&g| perm[g]).collect();
        let pp: Vec<usize> = pred.iter().map(|&p| perm[p]).collect();
        let q = metrics::<f64>(&ConfusionMatrix::from_indices(&names, &pg, &pp).unwrap()).unwrap();
        assert_eq!(m.accuracy, q.accuracy);
        for c in 0..3 {
            assert_eq!(m.f1[c], q.f1[perm[c]]);
        }
        assert!((m.macro_f1 - q.macro_f1).abs() < 1e-12);
    }
}

#[test]
fn aspect_macro_is_the_mean_of_aspects() {
    use AspectLabel::*;
    let labels = [Negative, Neutral, Positive, NotMentioned];
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let names = ["quality", "price", "delivery"];
    let mut gold = BTreeMap::new();
    let mut pred = BTreeMap::new();
    for n in names {
        let g: Vec<AspectLabel> = (0..300).map(|_| labels[rng.gen_range(0..4)]).collect();
        let p = g
            .iter()
            .map(|&l| {
                if rng.gen_bool(0.8) {
                    l
                } else {
                    labels[rng.gen_range(0..4)]
                }
            })
            .collect();
        gold.insert(n.to_string(), g);
        pred.insert(n.to_string(), p);
    }
    let am = aspect_metrics::<f64>(&gold, &pred).unwrap();
    let mean = am.per_aspect.values().map(|m| m.macro_f1).sum::<f64>() / 3.0;
    assert!((am.macro_f1 - mean).abs() < 1e-12);
    for n in names {
        let gi: Vec<usize> = gold[n].iter().map(|l| l.index()).collect();
        let pi: Vec<usize> = pred[n].iter().map(|l| l.index()).collect();
        let f: f64 = (0..4).map(|c| pair_oracle(&gi, &pi, c).2).sum::<f64>() / 4.0;
        assert!((am.per_aspect[n].macro_f1 - f).abs() < 1e-12);
    }

    let perfect = aspect_metrics::<f64>(&gold, &gold).unwrap();
    for m in perfect.per_aspect.values() {
        assert_eq!(m.macro_f1, 1.0);
    }
    pred.remove("price");
    assert!(aspect_metrics::<f64>(&gold, &pred).is_err());
}

fn s(a: f64, p: f64, r: f64, f: f64) -> Option<Scores> {
    Some(Scores {
        accuracy: a,
        precision: p,
        recall: r,
        f1: f,
    })
}

fn main_results() -> ResultsTable {
    let row = |m: &str, v: [f64; 12]| ResultRow {
        method: m.into(),
        cells: vec![
            s(v[0], v[1], v[2], v[3]),
            s(v[4], v[5], v[6], v[7]),
            s(v[8], v[9], v[10], v[11]),
        ],
    };
    ResultsTable {
        datasets: vec!["APR".into(), "ECF".into(), "MPS".into()],
        rows: vec![
            row(
                "LSTM",
                [
                    0.823, 0.815, 0.819, 0.817, 0.798, 0.792, 0.795, 0.793, 0.785, 0.781, 0.783, 0.782,
                ],
            ),
            row(
                "Claude-3",
                [
                    0.891, 0.888, 0.889, 0.888, 0.873, 0.870, 0.871, 0.870, 0.861, 0.858, 0.859, 0.858,
                ],
            ),
            row(
                "Ours",
                [
                    0.889, 0.881, 0.892, 0.891, 0.871, 0.875, 0.866, 0.870, 0.867, 0.864, 0.865, 0.864,
                ],
            ),
        ],
    }
}

#[test]
fn results_table_renders_published_rows() {
    let md = render_results_table(&main_results(), ReportFormat::Markdown);
    assert!(md.contains(
        "| Ours | 0.889 | 0.881 | 0.892 | 0.891 | 0.871 | 0.875 | 0.866 | 0.870 | 0.867 | 0.864 | 0.865 | 0.864 |"
    ));
    assert!(md
        .lines()
        .next()
        .unwrap()
        .starts_with("| Method | APR Acc. | APR Prec. | APR Rec. | APR F1 | ECF Acc."));
    assert_eq!(md, render_results_table(&main_results(), ReportFormat::Markdown));

    let txt = render_results_table(&main_results(), ReportFormat::Text);
    let ours: Vec<&str> = txt
        .lines()
        .find(|l| l.starts_with("Ours"))
        .unwrap()
        .split_whitespace()
        .collect();
    assert_eq!(&ours[..5], ["Ours", "0.889", "0.881", "0.892", "0.891"]);

    let mut partial = main_results();
    partial.rows[0].cells[2] = None;
    let md = render_results_table(&partial, ReportFormat::Markdown);
    assert!(
        md.contains("| LSTM | 0.823 | 0.815 | 0.819 | 0.817 | 0.798 | 0.792 | 0.795 | 0.793 | --- | --- | --- | --- |")
    );
}

fn eff(hours: Option<f64>, ms: Option<f64>, params: u64) -> EfficiencyReport {
    EfficiencyReport {
        training_hours: hours,
        latency: ms.map(|m| LatencySummary {
            mean_ms: m,
            median_ms: m,
            p95_ms: m,
            samples: 100,
        }),
        param_count: params,
    }
}

#[test]
fn efficiency_table_renders_published_rows() {
    let rows = vec![
        ("LSTM".to_string(), eff(Some(4.5), Some(15.3), 110_000_000)),
        ("GPT-3.5".to_string(), eff(None, Some(156.8), 175_000_000_000)),
        ("Ours".to_string(), eff(Some(15.6), Some(52.4), 450_000_000)),
        ("Untimed".to_string(), eff(None, None, 70_000_000_000)),
        ("Desk".to_string(), eff(Some(0.0125), Some(0.42), 105_123)),
    ];
    let md = render_efficiency_table(&rows, ReportFormat::Markdown);
    assert!(md.starts_with("| Method | Training Time (h) | Inference Time (ms) | Model Size (B) |"));
    for line in [
        "| LSTM | 4.5 | 15.3 | 0.11 |",
        "| GPT-3.5 | --- | 156.8 | 175 |",
        "| Ours | 15.6 | 52.4 | 0.45 |",
        "| Untimed | --- | --- | 70 |",
        "| Desk | 0.013 | 0.420 | 1.05e-4 |",
    ] {
        assert!(md.lines().any(|l| l == line), "missing {line} in\n{md}");
    }
    let txt = render_efficiency_table(&rows, ReportFormat::Text);
    let lstm: Vec<&str> = txt
        .lines()
        .find(|l| l.starts_with("LSTM"))
        .unwrap()
        .split_whitespace()
        .collect();
    assert_eq!(lstm, ["LSTM", "4.5", "15.3", "0.11"]);
}

#[test]
fn latency_summary_order_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..200 {
        let n = rng.gen_range(1..300);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..50.0)).collect();
        let l = LatencySummary::from_samples(&xs).unwrap();
        assert!(l.p95_ms >= l.median_ms);
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let below = sorted.iter().filter(|&&x| x <= l.p95_ms).count();
        assert!(below as f64 >= 0.95 * n as f64);
    }
    assert!(LatencySummary::from_samples(&[]).is_none());
    let l = LatencySummary::from_samples(&[4.0, 1.0, 3.0, 2.0]).unwrap();
    assert_eq!((l.median_ms, l.mean_ms, l.p95_ms), (2.5, 2.5, 4.0));
}

#[test]
fn measured_efficiency_passes_values_through() {
    let docs = vec![Document::new(
        "d",
        Source::Review,
        DomainId(0),
        chrono::Utc::now(),
        "nice phone",
    )];
    let mut calls = 0usize;
    let r = measure_efficiency(
        |d| {
            calls += 1;
            Ok(d.text.len())
        },
        &docs,
        40,
        12_345,
        Some(0.5),
    )
    .unwrap();
    assert_eq!(calls, WARMUP_CALLS + 40);
    assert_eq!(r.param_count, 12_345);
    assert_eq!(r.training_hours, Some(0.5));
    let l = r.latency.unwrap();
    assert_eq!(l.samples, 40);
    assert!(l.p95_ms >= l.median_ms);
    assert!(matches!(
        measure_efficiency(|_| Ok(()), &docs, 29, 0, None),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn report_files_are_timestamped() {
    let at = DateTime::from_timestamp(1_700_000_000, 0).unwrap();
    assert_eq!(
        report_file_name("results", at, ReportFormat::Markdown),
        "results_20231114T221320Z.md"
    );
    let dir = tempfile::tempdir().unwrap();
    let path = write_report(dir.path().join("reports"), "efficiency", at, ReportFormat::Text, "x\n").unwrap();
    assert_eq!(std::fs::read_to_string(path).unwrap(), "x\n");
}
