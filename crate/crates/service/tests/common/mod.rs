#![allow(dead_code)]

use chrono::{DateTime, TimeZone, Utc};
use sentiflow_core::corpus::{Document, DomainId, Source};

pub const NEGATIVE: &str = "The charger arrived broken and the case is junk.";
pub const POSITIVE: &str = "Great phone, excellent battery and a perfect screen.";

pub const MINUTE: i64 = 60_000;

pub fn at(ms: i64) -> DateTime<Utc> {
    Utc.timestamp_millis_opt(1_700_000_000_000 - 1_700_000_000_000 % MINUTE + ms)
        .unwrap()
}

pub fn doc(id: impl Into<String>, ms: i64, text: &str) -> Document {
    Document::new(id, Source::Review, DomainId(0), at(ms), text)
}

/// `n` documents spread over window `w`, the first `neg` of them negative.
pub fn window(w: i64, n: usize, neg: usize) -> Vec<Document> {
    (0..n)
        .map(|i| {
            let text = if i < neg { NEGATIVE } else { POSITIVE };
            doc(format!("w{w}-{i}"), w * MINUTE + (i as i64 * 997) % MINUTE, text)
        })
        .collect()
}

/// Ten quiet windows at 10% negative, one window at 60% negative and then
/// three more quiet windows. 500 documents in total.
pub fn spike_stream() -> Vec<Document> {
    let mut docs = Vec::new();
    for w in 0..10 {
        docs.extend(window(w, 40, 4));
    }
    docs.extend(window(10, 60, 36));
    docs.extend(window(11, 14, 1));
    docs.extend(window(12, 13, 1));
    docs.extend(window(13, 13, 1));
    assert_eq!(docs.len(), 500);
    docs
}
