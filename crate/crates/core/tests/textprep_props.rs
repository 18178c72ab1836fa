mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sentiflow_core::textprep::*;

fn messy_text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[a-zA-Z]{1,8}",
        "[0-9]{1,4}",
        Just("$19.99".to_string()),
        Just("4/5".to_string()),
        Just("3 stars".to_string()),
        Just("SKU-AB12".to_string()),
        Just("http://shop.example/x?y=1".to_string()),
        Just("www.example.org".to_string()),
        "[!?.,;:()\"'-]{1,3}",
        "[ \t\n\r]{1,3}",
        Just("\u{7}\u{0}".to_string()),
        "[äöüéÇİß]{1,3}",
        Just("12usd".to_string()),
        Just("<num>".to_string()),
    ];
    prop::collection::vec(piece, 0..20).prop_map(|v| v.concat())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn normalize_is_idempotent(s in messy_text()) {
        let once = normalize(&s);
        let twice = normalize(once.as_str());
        prop_assert_eq!(once.as_str(), twice.as_str());
        prop_assert!(!once.as_str().starts_with(' ') && !once.as_str().ends_with(' '));
        prop_assert!(!once.as_str().contains("  "));
        prop_assert!(!once.as_str().contains("http://") && !once.as_str().contains("www."));
    }

    #[test]
    fn tokens_reconstruct_the_text(s in messy_text()) {
        let n = normalize(&s);
        let tokens = tokenize(&n);
        let squashed: String = n.as_str().chars().filter(|c| *c != ' ').collect();
        prop_assert_eq!(tokens.concat(), squashed);
        prop_assert!(tokens.iter().all(|t| !t.is_empty() && !t.contains(' ')));
        let rejoined = normalize(&tokens.join(" "));
        prop_assert_eq!(tokenize(&rejoined), tokens);
    }

    #[test]
    fn entity_spans_are_in_bounds_and_disjoint_per_kind(s in messy_text()) {
        let n = normalize(&s);
        let text = n.as_str();
        let ents = extract_entities(text);
        for e in &ents {
            prop_assert!(e.start < e.end && e.end <= text.len());
            prop_assert_eq!(&text[e.start..e.end], e.surface.as_str());
        }
        for kind in [EntityKind::Price, EntityKind::Rating, EntityKind::ProductCode] {
            let spans: Vec<_> = ents.iter().filter(|e| e.kind == kind).collect();
            for w in spans.windows(2) {
                prop_assert!(w[0].end <= w[1].start);
            }
        }
    }

    #[test]
    fn encode_stays_in_range(s in messy_text(), max_len in 1usize..40) {
        let docs = common::corpus(30, 1);
        let vocab = common::vocab_for(&docs);
        let ids = encode_text(&s, &vocab, max_len);
        prop_assert!(ids.len() <= max_len);
        prop_assert!(ids.iter().all(|&i| i < vocab.len()));
    }
}

#[test]
fn spec_examples() {
    assert_eq!(normalize("GREAT   phone!!").as_str(), "great phone!!");
    assert_eq!(normalize("see http://x.co now").as_str(), "see <url> now");
    assert_eq!(tokenize(&normalize("great phone!")), vec!["great", "phone", "!"]);
    assert!(tokenize(&normalize("")).is_empty());
}

#[test]
fn vocabulary_ids_follow_frequency_then_lexicographic_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let words: Vec<String> = (0..60)
        .map(|i| format!("w{}", (b'a' + (i % 26) as u8) as char).repeat(1 + i / 26))
        .collect();
    let corpus: Vec<Vec<String>> = (0..200)
        .map(|_| {
            (0..rng.gen_range(1..12))
                .map(|_| words[rng.gen_range(0..words.len())].clone())
                .collect()
        })
        .collect();
    for min_freq in [1, 2, 5, 20] {
        let vocab = Vocabulary::build(corpus.iter().map(|d| d.iter()), min_freq);

        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in corpus.iter().flatten() {
            *counts.entry(t.as_str()).or_default() += 1;
        }
        let mut expected: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_freq).collect();
        expected.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));

        assert_eq!(vocab.len(), 4 + expected.len());
        for (i, s) in SPECIALS.iter().enumerate() {
            assert_eq!(vocab.id(s), Some(i));
        }
        for (k, (tok, _)) in expected.iter().enumerate() {
            assert_eq!(vocab.id(tok), Some(4 + k), "token {tok}");
            assert_eq!(vocab.token(4 + k), Some(*tok));
        }
    }
    let empty: Vec<Vec<String>> = Vec::new();
    assert_eq!(Vocabulary::build(empty.iter().map(|d| d.iter()), 1).len(), 4);
}

#[test]
fn decode_inverts_encode_on_known_tokens() {
    let docs = common::corpus(200, 9);
    let vocab = common::vocab_for(&docs);
    for d in &docs {
        let toks = tokenize(&normalize(&d.text));
        let ids = vocab.encode(&toks, DEFAULT_MAX_LEN);
        assert_eq!(vocab.decode(&ids), toks[..ids.len()].to_vec());
    }
    let a = ["a".to_string(), "a".to_string(), "b".to_string()];
    let v = Vocabulary::build(std::iter::once(a.iter()), 2);
    assert_eq!(v.len(), 5);
    assert_eq!(v.encode(&["a".into(), "zzz".into()], 8), vec![4, UNK_ID]);
    let long: Vec<String> = (0..200).map(|_| "a".to_string()).collect();
    assert_eq!(v.encode(&long, 128).len(), 128);
}

#[test]
fn planted_entities_are_all_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let fillers = [
        "the", "box", "arrived", "and", "honestly", "worked", "fine", "for", "me",
    ];
    for _ in 0..300 {
        let mut words: Vec<String> = (0..rng.gen_range(3..10))
            .map(|_| fillers[rng.gen_range(0..fillers.len())].to_string())
            .collect();
        let (kind, surface) = match rng.gen_range(0..3) {
            0 => (
                EntityKind::Price,
                format!("${}.{:02}", rng.gen_range(1..500), rng.gen_range(0..100)),
            ),
            1 => (EntityKind::Rating, format!("{}/5", rng.gen_range(1..6))),
            _ => (
                EntityKind::ProductCode,
                format!(
                    "{}{}{}",
                    ["xk", "ab", "qt"][rng.gen_range(0..3)],
                    rng.gen_range(10..999),
                    ["", "z"][rng.gen_range(0..2)]
                ),
            ),
        };
        let at = rng.gen_range(0..=words.len());
        words.insert(at, surface.clone());
        let text = words.join(" ");
        let n = normalize(&text);
        let start = words[..at].iter().map(|w| w.len() + 1).sum::<usize>();
        let found = extract_entities(n.as_str());
        assert!(
            found
                .iter()
                .any(|e| e.kind == kind && e.start == start && e.surface == surface),
            "{kind:?} {surface} missing in {:?}: {found:?}",
            n.as_str()
        );
    }
}

#[test]
fn language_routing_separates_english_from_gibberish() {
    let profiles = vec![LanguageProfile::english()];
    let docs = common::corpus(50, 77);
    let held_out = [
        "The delivery was quick and the packaging kept everything safe during the trip.",
        "I returned the jacket because the sleeves were far too long for me.",
        "Customer support answered my question within an hour and solved the problem.",
        "This blender is louder than my old one but it crushes ice without any trouble.",
        "We bought two of these for the kids and they have held up well so far.",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let gibberish: Vec<String> = (0..50)
        .map(|_| {
            (0..rng.gen_range(4..9))
                .map(|_| {
                    (0..rng.gen_range(3..8))
                        .map(|_| (b'a' + rng.gen_range(0..26)) as char)
                        .collect::<String>()
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let mut correct = 0;
    let english: Vec<String> = docs
        .iter()
        .map(|d| d.text.clone())
        .chain(held_out.iter().map(|s| s.to_string()))
        .collect();
    for t in &english[..50] {
        if detect_language(normalize(t).as_str(), &profiles, 0.3).tag() == Some("en") {
            correct += 1;
        }
    }
    for t in &gibberish {
        if detect_language(t, &profiles, 0.3).tag().is_none() {
            correct += 1;
        }
    }
    for t in &held_out {
        assert_eq!(
            detect_language(normalize(t).as_str(), &profiles, 0.3).tag(),
            Some("en"),
            "{t}"
        );
    }
    assert!(correct >= 95, "{correct}/100 routed correctly");
    assert!(detect_language("xq", &profiles, 0.0).tag().is_none());
}

#[test]
fn cosine_is_symmetric_and_one_on_itself() {
    let a = trigram_profile("the quick brown fox jumps over the lazy dog", Some(DEFAULT_TOP_K));
    let b = trigram_profile("a completely different sentence about shoes", Some(DEFAULT_TOP_K));
    assert!((cosine(&a, &a) - 1.0).abs() < 1e-9);
    assert!((cosine(&a, &b) - cosine(&b, &a)).abs() < 1e-15);
    let en = LanguageProfile::english();
    assert!(en.trigrams.values().all(|&f| f >= 0.0));
    assert!(en.trigrams.values().sum::<f64>() <= 1.0 + 1e-9);
}
