//! Synthetic labelled feedback. Texts are assembled from class-correlated
//! lexicon terms, aspect cue phrases and domain-specific product nouns so that
//! every gold label is recoverable from the words by construction.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AspectLabel, AspectSet, Document, DomainId, GoldLabels, Sentiment, Source};
use crate::error::{Error, Result};

pub const POSITIVE_TERMS: &[&str] = &[
    "great",
    "excellent",
    "love",
    "amazing",
    "fantastic",
    "wonderful",
    "perfect",
    "happy",
    "awesome",
    "superb",
    "delighted",
    "impressive",
    "brilliant",
    "recommend",
    "outstanding",
    "pleased",
    "terrific",
    "enjoyable",
    "flawless",
    "satisfied",
    "beautiful",
    "reliable",
    "favorite",
    "glad",
    "nice",
    "good",
    "best",
    "incredible",
    "lovely",
    "thrilled",
];

pub const NEGATIVE_TERMS: &[&str] = &[
    "terrible",
    "awful",
    "hate",
    "horrible",
    "disappointed",
    "worst",
    "poor",
    "broken",
    "useless",
    "bad",
    "refund",
    "defective",
    "annoying",
    "waste",
    "frustrating",
    "regret",
    "junk",
    "faulty",
    "unhappy",
    "disappointing",
    "failed",
    "angry",
    "rubbish",
    "dreadful",
    "garbage",
    "pathetic",
    "unacceptable",
    "returned",
    "complaint",
    "avoid",
];

pub const NEUTRAL_TERMS: &[&str] = &[
    "okay",
    "average",
    "fine",
    "decent",
    "acceptable",
    "ordinary",
    "standard",
    "expected",
    "adequate",
    "typical",
    "moderate",
    "fair",
    "plain",
    "usual",
    "normal",
    "regular",
    "alright",
    "middling",
    "unremarkable",
    "neutral",
];

/// Connective clauses with no sentiment content. `{n}` takes a product noun of
/// the document's domain.
const FILLER_CLAUSES: &[&str] = &[
    "i bought this {n} last week",
    "the {n} arrived in a small box",
    "we have been using the {n} every day",
    "i ordered it as a present for my sister",
    "this is my second {n} from this shop",
    "the package came on time",
    "we got the {n} a month ago",
    "i use it at home and at work",
    "my partner picked the {n} for our home",
    "the seller sent the {n} quickly",
    "it came with a short manual",
    "i had been looking for a new {n}",
    "we compared it with our old {n}",
    "after two weeks of use",
    "the {n} looks like the photos",
    "i will keep using it",
    "the box had everything inside",
    "it took a few days to arrive",
    "my friends asked about the {n}",
    "we keep the {n} in the living room",
    "i tried it the same day",
    "the {n} was the main thing i needed",
    "i read a few reviews before buying",
    "this was for our new apartment",
    "the {n} came wrapped in paper",
    "i have had the {n} since spring",
    "my brother has the same {n}",
    "we use the {n} on weekends",
    "i picked the blue one",
    "the courier left it at the door",
    "it is the first {n} i have owned",
    "i got it during the summer sale",
    "the {n} fits in my bag",
    "we ordered two of them",
    "i checked the {n} when it arrived",
    "this {n} replaced an older one",
    "the kids wanted this {n}",
    "i bought it online",
    "my neighbour told me about this {n}",
    "we unpacked the {n} in the evening",
];

/// Ways a general sentiment term is worked into a clause.
const TERM_FRAMES: &[&str] = &[
    "{t}",
    "really {t}",
    "honestly {t}",
    "{t} to be honest",
    "i would say {t}",
    "all in all {t}",
];

const DOMAIN_NOUNS: &[&[&str]] = &[
    &[
        "phone",
        "charger",
        "laptop",
        "headphones",
        "screen",
        "battery",
        "cable",
        "speaker",
    ],
    &[
        "shirt", "jacket", "shoes", "dress", "jeans", "fabric", "sleeve", "zipper",
    ],
    &[
        "sofa", "lamp", "blender", "kettle", "pillow", "curtain", "mattress", "shelf",
    ],
    &[
        "cream", "serum", "shampoo", "lotion", "perfume", "lipstick", "mascara", "cleanser",
    ],
    &["puzzle", "doll", "board", "game", "lego", "kite", "robot", "crayons"],
    &[
        "novel",
        "cookbook",
        "journal",
        "paperback",
        "hardcover",
        "atlas",
        "comic",
        "diary",
    ],
    &[
        "drill",
        "hammer",
        "wrench",
        "saw",
        "toolbox",
        "ladder",
        "screwdriver",
        "pliers",
    ],
    &[
        "hose",
        "shovel",
        "planter",
        "seeds",
        "rake",
        "mower",
        "fertilizer",
        "sprinkler",
    ],
];

/// Cue nouns and per-polarity terms for one aspect.
#[derive(Debug, Clone, PartialEq)]
pub struct AspectLexicon {
    pub cues: Vec<String>,
    pub negative: Vec<String>,
    pub neutral: Vec<String>,
    pub positive: Vec<String>,
}

impl AspectLexicon {
    fn from_static(cues: &[&str], neg: &[&str], neu: &[&str], pos: &[&str]) -> Self {
        let own = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        AspectLexicon {
            cues: own(cues),
            negative: own(neg),
            neutral: own(neu),
            positive: own(pos),
        }
    }

    fn terms(&self, label: AspectLabel) -> &[String] {
        match label {
            AspectLabel::Negative => &self.negative,
            AspectLabel::Neutral => &self.neutral,
            AspectLabel::Positive => &self.positive,
            AspectLabel::NotMentioned => &[],
        }
    }

    /// Lexicons for the default quality / price / experience aspect set.
    pub fn defaults() -> Vec<AspectLexicon> {
        vec![
            Self::from_static(
                &["quality", "build", "material", "durability"],
                &["flimsy", "shoddy", "fragile", "cracked"],
                &["serviceable", "passable", "functional", "sufficient"],
                &["sturdy", "durable", "robust", "premium"],
            ),
            Self::from_static(
                &["price", "cost", "value", "deal"],
                &["overpriced", "expensive", "costly", "ripoff"],
                &["midrange", "comparable", "moderately", "market"],
                &["affordable", "bargain", "inexpensive", "worthwhile"],
            ),
            Self::from_static(
                &["setup", "interface", "navigation", "usability"],
                &["confusing", "clunky", "laggy", "cumbersome"],
                &["manageable", "workable", "tolerable", "learnable"],
                &["intuitive", "seamless", "effortless", "smooth"],
            ),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub n_docs: usize,
    pub n_domains: usize,
    pub aspects: AspectSet,
    pub aspect_lexicons: Vec<AspectLexicon>,
    /// Sampling weights of Negative, Neutral, Positive.
    pub class_mix: [f64; 3],
    /// Number of general sentiment terms available per class.
    pub lexicon_terms: usize,
    /// Number of filler clause templates available.
    pub filler_terms: usize,
    /// Inclusive range of general sentiment terms per document.
    pub sentiment_terms_per_doc: (usize, usize),
    /// Inclusive range of filler clauses per document.
    pub filler_per_doc: (usize, usize),
    /// Probability that a sentiment term is drawn from another class. Off-class
    /// terms always stay a strict minority within a document.
    pub term_noise: f64,
    pub aspect_mention_prob: f64,
    /// Probability that a mentioned aspect agrees with the document polarity.
    pub aspect_agreement: f64,
    pub start: DateTime<Utc>,
    pub interval_ms: i64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            n_docs: 1000,
            n_domains: 4,
            aspects: AspectSet::default(),
            aspect_lexicons: AspectLexicon::defaults(),
            class_mix: [1.0, 1.0, 1.0],
            lexicon_terms: 20,
            filler_terms: 40,
            sentiment_terms_per_doc: (2, 4),
            filler_per_doc: (2, 4),
            term_noise: 0.2,
            aspect_mention_prob: 0.6,
            aspect_agreement: 0.6,
            start: DateTime::<Utc>::from_timestamp_millis(1_704_067_200_000).expect("valid epoch"),
            interval_ms: 1_000,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.n_domains < 2 || self.n_domains > DOMAIN_NOUNS.len() {
            return bad(&format!("n_domains must be in 2..={}", DOMAIN_NOUNS.len()));
        }
        if self.lexicon_terms == 0 || self.filler_terms == 0 {
            return bad("vocabulary sizes must be positive");
        }
        if self.lexicon_terms > NEUTRAL_TERMS.len().min(POSITIVE_TERMS.len()).min(NEGATIVE_TERMS.len()) {
            return bad("lexicon_terms exceeds the built-in lexicon");
        }
        if self.filler_terms > FILLER_CLAUSES.len() {
            return bad("filler_terms exceeds the built-in filler clauses");
        }
        if self.aspect_lexicons.len() != self.aspects.len() {
            return bad("one aspect lexicon per configured aspect is required");
        }
        for lex in &self.aspect_lexicons {
            if lex.cues.is_empty() || lex.negative.is_empty() || lex.neutral.is_empty() || lex.positive.is_empty() {
                return bad("aspect lexicons need cues and terms for every polarity");
            }
        }
        let (lo, hi) = self.sentiment_terms_per_doc;
        if lo == 0 || lo > hi {
            return bad("sentiment_terms_per_doc must be a non-empty range starting at >= 1");
        }
        if self.filler_per_doc.0 > self.filler_per_doc.1 {
            return bad("filler_per_doc range is inverted");
        }
        if self.class_mix.iter().any(|w| !w.is_finite() || *w < 0.0) || self.class_mix.iter().sum::<f64>() <= 0.0 {
            return bad("class_mix must be non-negative and not all zero");
        }
        for p in [self.term_noise, self.aspect_mention_prob, self.aspect_agreement] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

fn class_terms(s: Sentiment) -> &'static [&'static str] {
    match s {
        Sentiment::Negative => NEGATIVE_TERMS,
        Sentiment::Neutral => NEUTRAL_TERMS,
        Sentiment::Positive => POSITIVE_TERMS,
    }
}

fn pick_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Deterministic labelled corpus: equal `(spec, seed)` gives equal output.
pub fn generate_synthetic_corpus(spec: &GeneratorSpec, seed: u64) -> Result<Vec<Document>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(spec.n_docs);
    let sources = [Source::Review, Source::ServiceInteraction, Source::SocialComment];

    for i in 0..spec.n_docs {
        let sentiment = Sentiment::ALL[pick_weighted(&mut rng, &spec.class_mix)];
        let domain = rng.gen_range(0..spec.n_domains);
        let mut chunks: Vec<String> = Vec::new();

        let n_terms = rng.gen_range(spec.sentiment_terms_per_doc.0..=spec.sentiment_terms_per_doc.1);
        let max_noisy = (n_terms - 1) / 2;
        let mut noisy = 0;
        for _ in 0..n_terms {
            let class = if noisy < max_noisy && rng.gen_bool(spec.term_noise) {
                noisy += 1;
                let others: Vec<Sentiment> = Sentiment::ALL.into_iter().filter(|s| *s != sentiment).collect();
                *others.choose(&mut rng).expect("two other classes")
            } else {
                sentiment
            };
            let pool = &class_terms(class)[..spec.lexicon_terms];
            let term = pool.choose(&mut rng).expect("non-empty pool");
            let frame = TERM_FRAMES.choose(&mut rng).expect("non-empty frames");
            chunks.push(frame.replace("{t}", term));
        }

        let mut aspects = BTreeMap::new();
        for (name, lex) in spec.aspects.names().iter().zip(&spec.aspect_lexicons) {
            let label = if rng.gen_bool(spec.aspect_mention_prob) {
                if rng.gen_bool(spec.aspect_agreement) {
                    AspectLabel::from(sentiment)
                } else {
                    AspectLabel::from(*Sentiment::ALL.choose(&mut rng).expect("three classes"))
                }
            } else {
                AspectLabel::NotMentioned
            };
            if label != AspectLabel::NotMentioned {
                let cue = lex.cues.choose(&mut rng).expect("validated");
                let term = lex.terms(label).choose(&mut rng).expect("validated");
                let phrase = match rng.gen_range(0..3) {
                    0 => format!("the {cue} is {term}"),
                    1 => format!("{term} {cue}"),
                    _ => format!("{cue} felt {term}"),
                };
                chunks.push(phrase);
            }
            aspects.insert(name.clone(), label);
        }

        let n_filler = rng.gen_range(spec.filler_per_doc.0..=spec.filler_per_doc.1);
        let nouns = DOMAIN_NOUNS[domain];
        for _ in 0..n_filler {
            let clause = FILLER_CLAUSES[..spec.filler_terms].choose(&mut rng).expect("non-empty");
            let noun = nouns.choose(&mut rng).expect("non-empty");
            chunks.push(clause.replace("{n}", noun));
        }
        chunks.shuffle(&mut rng);

        let mut text = String::new();
        for (k, chunk) in chunks.iter().enumerate() {
            if k > 0 {
                text.push_str(match rng.gen_range(0..6) {
                    0 => ". ",
                    1 => " and ",
                    _ => ", ",
                });
            }
            text.push_str(chunk);
        }
        if let Some(first) = text.get(0..1) {
            let upper = first.to_uppercase();
            text.replace_range(0..1, &upper);
        }
        text.push(if sentiment == Sentiment::Positive && rng.gen_bool(0.5) {
            '!'
        } else {
            '.'
        });

        let rating = match sentiment {
            Sentiment::Negative => rng.gen_range(1..=2),
            Sentiment::Neutral => 3,
            Sentiment::Positive => rng.gen_range(4..=5),
        };
        let ts = spec.start + chrono::Duration::milliseconds(spec.interval_ms * i as i64);
        let mut doc = Document::new(
            format!("syn-{seed}-{i:06}"),
            *sources.choose(&mut rng).expect("three sources"),
            DomainId(domain),
            ts,
            text,
        );
        doc.rating = Some(rating);
        doc.gold = Some(GoldLabels { sentiment, aspects });
        docs.push(doc);
    }
    Ok(docs)
}
