#![allow(dead_code)]

//! Shared test support: a deterministic synthetic review corpus with the
//! stylistic contrasts the detector targets, plus small data helpers.
//!
//! The human-written style leans on emotive punctuation, typos, digits,
//! casing variance, and personal anecdotes; the machine-written style leans
//! on superlative-heavy, evenly punctuated, template-like prose with
//! repeated phrases. A contamination rate swaps style cues across classes so
//! the task stays learnable but not trivial.

use rand::seq::SliceRandom;
use rand::Rng;
use revhawk::corpus::{Corpus, ReviewRecord};
use revhawk::rng::{stream_rng, SubRng};
use revhawk::Label;
use std::fmt::Write as _;

const PRODUCTS: [&str; 14] = [
    "headphones",
    "backpack",
    "coffee maker",
    "phone case",
    "desk lamp",
    "running shoes",
    "blender",
    "keyboard",
    "water bottle",
    "monitor",
    "charger",
    "jacket",
    "toaster",
    "speaker",
];

const POSITIVE_PLAIN: [&str; 10] = [
    "good", "nice", "solid", "comfortable", "useful", "sturdy", "handy", "decent", "reliable",
    "fine",
];

const SUPERLATIVES: [&str; 9] = [
    "excellent",
    "amazing",
    "perfect",
    "outstanding",
    "exceptional",
    "flawless",
    "incredible",
    "superb",
    "fantastic",
];

const CG_PHRASES: [&str; 8] = [
    "highly recommend this product to anyone",
    "exceeded all of my expectations in every way",
    "the quality is truly remarkable for the price",
    "this is the best purchase I have ever made",
    "it works perfectly and looks amazing",
    "an excellent addition to any home",
    "delivers outstanding performance every single time",
    "you will not regret buying this item",
];

const OR_OPENERS: [&str; 8] = [
    "ok so",
    "honestly",
    "bought this last week and",
    "my wife says",
    "not gonna lie,",
    "update after 3 months:",
    "got it for my son and",
    "so glad",
];

const OR_DETAILS: [&str; 10] = [
    "the zipper broke after 2 weeks",
    "battery lasts about 6 hrs",
    "shipping took 11 days",
    "customer service didn't answer",
    "fits my 13 inch laptop",
    "my dog chewed the corner lol",
    "returned the first one",
    "the color is more blue than the photo",
    "smells weird at first",
    "works with my old charger",
];

fn cg_sentence(rng: &mut SubRng) -> String {
    let mut s = String::new();
    match rng.gen_range(0..3) {
        0 => {
            write!(
                s,
                "This {} is {} and {}.",
                PRODUCTS[rng.gen_range(0..PRODUCTS.len())],
                SUPERLATIVES[rng.gen_range(0..SUPERLATIVES.len())],
                SUPERLATIVES[rng.gen_range(0..SUPERLATIVES.len())]
            )
            .unwrap();
        }
        1 => {
            let phrase = CG_PHRASES[rng.gen_range(0..CG_PHRASES.len())];
            let mut chars = phrase.chars();
            let first = chars.next().unwrap().to_uppercase().to_string();
            write!(s, "{first}{}.", chars.as_str()).unwrap();
        }
        _ => {
            write!(
                s,
                "The {} quality is {} and I am very satisfied with it.",
                PRODUCTS[rng.gen_range(0..PRODUCTS.len())],
                SUPERLATIVES[rng.gen_range(0..SUPERLATIVES.len())]
            )
            .unwrap();
        }
    }
    s
}

fn or_sentence(rng: &mut SubRng) -> String {
    let mut s = String::new();
    match rng.gen_range(0..4) {
        0 => {
            write!(
                s,
                "{} it's {} {}",
                OR_OPENERS[rng.gen_range(0..OR_OPENERS.len())],
                POSITIVE_PLAIN[rng.gen_range(0..POSITIVE_PLAIN.len())],
                if rng.gen_bool(0.5) { "!!!" } else { "." }
            )
            .unwrap();
        }
        1 => {
            write!(
                s,
                "{}{}",
                OR_DETAILS[rng.gen_range(0..OR_DETAILS.len())],
                if rng.gen_bool(0.3) { "..." } else { "." }
            )
            .unwrap();
        }
        2 => {
            write!(
                s,
                "{} stars, would i buy again{}",
                rng.gen_range(2..=5),
                if rng.gen_bool(0.5) { "?" } else { ". maybe" }
            )
            .unwrap();
        }
        _ => {
            let word = POSITIVE_PLAIN[rng.gen_range(0..POSITIVE_PLAIN.len())];
            let loud = if rng.gen_bool(0.35) {
                word.to_uppercase()
            } else {
                word.to_string()
            };
            write!(
                s,
                "don't expect miracles but it's {loud} for the price{}",
                if rng.gen_bool(0.4) { "!!" } else { "." }
            )
            .unwrap();
        }
    }
    s
}

fn review_text(label: Label, rng: &mut SubRng, contamination: f64) -> String {
    // with small probability draw the other style's sentences
    let style_cg = match label {
        Label::Cg => !rng.gen_bool(contamination),
        Label::Or => rng.gen_bool(contamination),
    };
    let n_sentences = if style_cg {
        rng.gen_range(2..5)
    } else {
        rng.gen_range(1..6)
    };
    let mut sentences = Vec::with_capacity(n_sentences);
    for _ in 0..n_sentences {
        // a little cross-style mixing keeps the task non-trivial
        let from_cg = if style_cg {
            rng.gen_bool(0.95)
        } else {
            rng.gen_bool(0.06)
        };
        sentences.push(if from_cg {
            cg_sentence(rng)
        } else {
            or_sentence(rng)
        });
    }
    // machine style repeats a phrase now and then
    if style_cg && rng.gen_bool(0.3) && !sentences.is_empty() {
        let repeat = sentences[0].clone();
        sentences.push(repeat);
    }
    sentences.join(" ")
}

/// Deterministic two-class review corpus, balanced, shuffled.
pub fn synthetic_reviews(n: usize, seed: u64) -> Corpus {
    let mut rng = stream_rng(seed, "synthetic_reviews", &[]);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { Label::Or } else { Label::Cg };
        let text = review_text(label, &mut rng, 0.04);
        records.push(ReviewRecord {
            text,
            label,
            category: Some(PRODUCTS[rng.gen_range(0..PRODUCTS.len())].to_string()),
            rating: Some(rng.gen_range(1..=5) as f64),
        });
    }
    records.shuffle(&mut rng);
    Corpus::from_records(records)
}

/// Write a corpus in the default CSV schema.
pub fn write_corpus_csv(corpus: &Corpus, path: &std::path::Path) {
    let mut writer = csv::Writer::from_path(path).expect("create csv");
    writer
        .write_record(["category", "rating", "label", "text_"])
        .expect("header");
    for record in corpus.records() {
        writer
            .write_record([
                record.category.as_deref().unwrap_or(""),
                &record
                    .rating
                    .map(|r| format!("{r:.1}"))
                    .unwrap_or_default(),
                record.label.as_str(),
                &record.text,
            ])
            .expect("row");
    }
    writer.flush().expect("flush csv");
}

/// Stratified sample of `n` records from a corpus (deterministic).
pub fn stratified_sample(corpus: &Corpus, n: usize, seed: u64) -> Corpus {
    let labels = corpus.labels();
    let mut by_class: std::collections::BTreeMap<Label, Vec<usize>> = Default::default();
    for (ix, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(ix);
    }
    let mut take = Vec::new();
    let per_class = n / by_class.len();
    for (class_ix, (_, members)) in by_class.iter().enumerate() {
        let mut members = members.clone();
        let mut rng = stream_rng(seed, "stratified_sample", &[class_ix as u64]);
        members.shuffle(&mut rng);
        take.extend_from_slice(&members[..per_class.min(members.len())]);
    }
    take.sort_unstable();
    corpus.subset(&take)
}
