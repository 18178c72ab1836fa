mod common;

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Utc};
use proptest::prelude::*;
use sentiflow_core::corpus::*;
use sentiflow_core::textprep::{normalize, tokenize};
use sentiflow_core::Error;

fn sentiment() -> impl Strategy<Value = Sentiment> {
    prop_oneof![
        Just(Sentiment::Negative),
        Just(Sentiment::Neutral),
        Just(Sentiment::Positive)
    ]
}

fn aspect_label() -> impl Strategy<Value = AspectLabel> {
    prop_oneof![
        Just(AspectLabel::Negative),
        Just(AspectLabel::Neutral),
        Just(AspectLabel::Positive),
        Just(AspectLabel::NotMentioned)
    ]
}

fn document() -> impl Strategy<Value = Document> {
    let gold = (sentiment(), prop::collection::vec(aspect_label(), 3)).prop_map(|(s, a)| {
        let names = AspectSet::default().names().to_vec();
        GoldLabels {
            sentiment: s,
            aspects: names.into_iter().zip(a).collect(),
        }
    });
    let extra = prop::collection::btree_map(
        "x_[a-z]{1,6}",
        prop_oneof![
            any::<i64>().prop_map(serde_json::Value::from),
            ".{0,12}".prop_map(serde_json::Value::from),
            any::<bool>().prop_map(serde_json::Value::from),
        ],
        0..3,
    );
    (
        "[A-Za-z0-9_-]{1,16}",
        prop_oneof![
            Just(Source::Review),
            Just(Source::ServiceInteraction),
            Just(Source::SocialComment)
        ],
        0usize..8,
        0i64..4_102_444_800_000,
        "\\PC{1,80}",
        prop::option::of(1u8..=5),
        prop::option::of(gold),
        extra,
    )
        .prop_map(|(id, source, domain, ms, text, rating, gold, extra)| {
            let mut d = Document::new(
                id,
                source,
                DomainId(domain),
                DateTime::<Utc>::from_timestamp_millis(ms).unwrap(),
                text,
            );
            d.rating = rating;
            d.gold = gold;
            d.extra = extra.into_iter().collect();
            d
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn store_then_load_round_trips_every_field(docs in prop::collection::vec(document(), 100)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.jsonl");
        prop_assert_eq!(store_documents(&docs, &path).unwrap(), 100);
        let back = load_documents(&path).unwrap();
        prop_assert_eq!(back.malformed, 0);
        prop_assert_eq!(back.documents, docs);
    }
}

#[test]
fn appends_keep_order_and_empty_input_is_a_no_op() {
    let docs = common::corpus(10, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.jsonl");
    store_documents(&docs[..5], &path).unwrap();
    store_documents(&docs[5..], &path).unwrap();
    let before = std::fs::read(&path).unwrap();
    assert_eq!(store_documents(&[], &path).unwrap(), 0);
    assert_eq!(std::fs::read(&path).unwrap(), before);
    assert_eq!(load_documents(&path).unwrap().documents, docs);
}

#[test]
fn malformed_lines_are_counted_and_empty_files_rejected() {
    let docs = common::corpus(3, 5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.jsonl");
    let mut text: Vec<String> = docs.iter().map(Document::to_json_line).collect();
    text.insert(1, "{not json".to_string());
    std::fs::write(&path, text.join("\n")).unwrap();
    let r = load_documents(&path).unwrap();
    assert_eq!(r.documents.len(), 3);
    assert_eq!(r.malformed, 1);
    assert_eq!(r.malformed_lines, vec![2]);

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    assert!(matches!(load_documents(&empty), Err(Error::EmptyCorpus(..))));
    assert!(matches!(
        load_documents(dir.path().join("missing.jsonl")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn manifest_matches_brute_force_recount() {
    let mut docs = common::corpus(500, 21);
    for d in docs.iter_mut().step_by(7) {
        d.gold = None;
    }
    let m = manifest(&docs);
    let mut classes: HashMap<Option<Sentiment>, usize> = HashMap::new();
    let mut domains: BTreeMap<DomainId, usize> = BTreeMap::new();
    let mut tokens = 0;
    for d in &docs {
        *classes.entry(d.gold.as_ref().map(|g| g.sentiment)).or_default() += 1;
        *domains.entry(d.domain).or_default() += 1;
        tokens += tokenize(&normalize(&d.text)).len();
    }
    assert_eq!(m.documents, 500);
    assert_eq!(m.negative, classes[&Some(Sentiment::Negative)]);
    assert_eq!(m.neutral, classes[&Some(Sentiment::Neutral)]);
    assert_eq!(m.positive, classes[&Some(Sentiment::Positive)]);
    assert_eq!(m.unlabeled, classes[&None]);
    assert_eq!(m.negative + m.neutral + m.positive + m.unlabeled, m.documents);
    assert_eq!(m.per_domain, domains);
    assert!((m.avg_tokens - tokens as f64 / 500.0).abs() < 1e-12);
    assert_eq!(manifest(&[]), CorpusManifest::default());
}

#[test]
fn general_terms_agree_with_the_gold_label() {
    let spec = GeneratorSpec {
        n_docs: 2000,
        term_noise: 0.0,
        ..GeneratorSpec::default()
    };
    let lists = [NEGATIVE_TERMS, NEUTRAL_TERMS, POSITIVE_TERMS];
    for d in generate_synthetic_corpus(&spec, 8).unwrap() {
        let gold = d.gold.as_ref().unwrap().sentiment;
        let toks = tokenize(&normalize(&d.text));
        let found: Vec<usize> = (0..3)
            .filter(|&c| toks.iter().any(|t| lists[c].contains(&t.as_str())))
            .collect();
        assert_eq!(found, vec![gold.index()], "{}", d.text);
    }

    // With noise, the gold class still holds a strict majority of the general terms.
    for d in common::corpus(2000, 9) {
        let gold = d.gold.as_ref().unwrap().sentiment;
        let toks = tokenize(&normalize(&d.text));
        let mut counts = [0usize; 3];
        for t in &toks {
            for c in 0..3 {
                if lists[c].contains(&t.as_str()) {
                    counts[c] += 1;
                }
            }
        }
        let total: usize = counts.iter().sum();
        assert!(2 * counts[gold.index()] > total, "{:?} {}", counts, d.text);
    }
}
