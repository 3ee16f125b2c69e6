//! The 43 hand-designed linguistic features, computed from the raw
//! (un-preprocessed) review text.
//!
//! The ordered contract: (1) char_count, (2) word_count, (3) sentence_count,
//! (4) avg_word_length, (5) std_word_length, (6) max_word_length,
//! (7) avg_sentence_length_words, (8) avg_chars_per_sentence,
//! (9) uppercase_char_ratio, (10) uppercase_word_ratio,
//! (11) titlecase_word_ratio, (12) start_uppercase_sentence_ratio,
//! (13) digit_char_ratio, (14) digit_token_ratio, (15) punctuation_density,
//! (16) exclamation_count, (17) question_count, (18) period_count,
//! (19) comma_count, (20) ellipsis_count, (21) repeated_punct_run_count,
//! (22) quote_count, (23) whitespace_ratio, (24) unique_char_ratio,
//! (25) vowel_ratio, (26) consecutive_repeated_char_run_count,
//! (27) nonascii_ratio, (28) type_token_ratio, (29) hapax_ratio,
//! (30) max_token_frequency_ratio, (31) bigram_repetition_ratio,
//! (32) stopword_ratio, (33) negation_count,
//! (34) first_person_pronoun_count, (35) second_person_pronoun_count,
//! (36) third_person_pronoun_count, (37) sentiment_polarity,
//! (38) sentiment_subjectivity_proxy, (39) positive_lexicon_ratio,
//! (40) negative_lexicon_ratio, (41) superlative_count,
//! (42) intensifier_count, (43) avg_syllables_per_word.
//!
//! Empty text yields the all-zero vector; every entry is finite.

use std::collections::{HashMap, HashSet};

use crate::preprocess::Resources;

pub const N_LINGUISTIC: usize = 43;

const FIRST_PERSON: [&str; 10] = [
    "i", "me", "my", "mine", "myself", "we", "us", "our", "ours", "ourselves",
];
const SECOND_PERSON: [&str; 5] = ["you", "your", "yours", "yourself", "yourselves"];
const THIRD_PERSON: [&str; 16] = [
    "he", "him", "his", "himself", "she", "her", "hers", "herself", "it", "its", "itself",
    "they", "them", "their", "theirs", "themselves",
];
const NEGATIONS: [&str; 11] = [
    "not", "no", "never", "none", "nor", "cannot", "nothing", "nobody", "neither", "nowhere",
    "without",
];

/// Words are maximal alphanumeric runs of the raw text.
fn words(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = None;
    for (ix, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(ix);
            }
        } else if let Some(s) = start.take() {
            out.push(&text[s..ix]);
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}

/// Rule-based sentence segments: spans between runs of `.`, `!`, `?` that
/// contain at least one alphanumeric character.
fn sentences(text: &str) -> Vec<&str> {
    text.split(['.', '!', '?'])
        .filter(|s| s.chars().any(char::is_alphanumeric))
        .collect()
}

fn syllable_estimate(word: &str) -> f64 {
    let lower = word.to_lowercase();
    let is_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let chars: Vec<char> = lower.chars().collect();
    let mut groups = 0usize;
    let mut in_group = false;
    for &c in &chars {
        if is_vowel(c) {
            if !in_group {
                groups += 1;
            }
            in_group = true;
        } else {
            in_group = false;
        }
    }
    // silent final 'e' ("make"), but not "-le" ("little")
    if chars.len() > 2
        && chars[chars.len() - 1] == 'e'
        && !is_vowel(chars[chars.len() - 2])
        && chars[chars.len() - 2] != 'l'
        && groups > 1
    {
        groups -= 1;
    }
    groups.max(1) as f64
}

/// Compute the fixed 43-entry feature vector for one document.
pub fn linguistic_features(raw_text: &str, res: &Resources) -> Vec<f64> {
    let mut f = vec![0.0; N_LINGUISTIC];
    if raw_text.is_empty() {
        return f;
    }

    let chars: Vec<char> = raw_text.chars().collect();
    let n_chars = chars.len() as f64;
    let letters: Vec<char> = chars.iter().copied().filter(|c| c.is_alphabetic()).collect();
    let word_list = words(raw_text);
    let n_words = word_list.len() as f64;
    let sentence_list = sentences(raw_text);
    let n_sentences = sentence_list.len() as f64;

    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };

    // 1-3: size counts
    f[0] = n_chars;
    f[1] = n_words;
    f[2] = n_sentences;

    // 4-6: word length stats
    let lengths: Vec<f64> = word_list.iter().map(|w| w.chars().count() as f64).collect();
    if !lengths.is_empty() {
        let mean = lengths.iter().sum::<f64>() / n_words;
        f[3] = mean;
        f[4] = (lengths.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n_words).sqrt();
        f[5] = lengths.iter().cloned().fold(0.0, f64::max);
    }

    // 7-8: sentence shape
    f[6] = ratio(n_words, n_sentences);
    f[7] = ratio(n_chars, n_sentences);

    // 9: uppercase chars over letters
    let n_upper = letters.iter().filter(|c| c.is_uppercase()).count() as f64;
    f[8] = ratio(n_upper, letters.len() as f64);

    // 10-11: word casing
    let is_upper_word = |w: &str| {
        let mut has_letter = false;
        for c in w.chars() {
            if c.is_alphabetic() {
                has_letter = true;
                if !c.is_uppercase() {
                    return false;
                }
            }
        }
        has_letter
    };
    let is_title_word = |w: &str| {
        let mut cs = w.chars();
        match cs.next() {
            Some(first) if first.is_uppercase() => {
                w.chars().count() >= 2 && cs.all(|c| !c.is_alphabetic() || c.is_lowercase())
            }
            _ => false,
        }
    };
    f[9] = ratio(word_list.iter().filter(|w| is_upper_word(w)).count() as f64, n_words);
    f[10] = ratio(word_list.iter().filter(|w| is_title_word(w)).count() as f64, n_words);

    // 12: sentences starting with an uppercase letter
    let starts_upper = sentence_list
        .iter()
        .filter(|s| {
            s.chars()
                .find(|c| c.is_alphabetic())
                .is_some_and(|c| c.is_uppercase())
        })
        .count() as f64;
    f[11] = ratio(starts_upper, n_sentences);

    // 13-14: digits
    let n_digits = chars.iter().filter(|c| c.is_ascii_digit()).count() as f64;
    f[12] = ratio(n_digits, n_chars);
    let digit_tokens = word_list
        .iter()
        .filter(|w| !w.is_empty() && w.chars().all(|c| c.is_ascii_digit()))
        .count() as f64;
    f[13] = ratio(digit_tokens, n_words);

    // 15: punctuation density
    let is_punct = |c: char| !c.is_alphanumeric() && !c.is_whitespace();
    let n_punct = chars.iter().filter(|&&c| is_punct(c)).count() as f64;
    f[14] = ratio(n_punct, n_chars);

    // 16-20: specific punctuation counts
    f[15] = chars.iter().filter(|&&c| c == '!').count() as f64;
    f[16] = chars.iter().filter(|&&c| c == '?').count() as f64;
    f[17] = chars.iter().filter(|&&c| c == '.').count() as f64;
    f[18] = chars.iter().filter(|&&c| c == ',').count() as f64;
    let mut ellipses = chars.iter().filter(|&&c| c == '\u{2026}').count();
    let mut dot_run = 0usize;
    for &c in chars.iter().chain(std::iter::once(&' ')) {
        if c == '.' {
            dot_run += 1;
        } else {
            ellipses += dot_run / 3;
            dot_run = 0;
        }
    }
    f[19] = ellipses as f64;

    // 21: runs of >=2 identical punctuation chars
    let mut repeated_runs = 0usize;
    let mut run_char = ' ';
    let mut run_len = 0usize;
    for &c in chars.iter().chain(std::iter::once(&' ')) {
        if is_punct(c) && c == run_char {
            run_len += 1;
        } else {
            if run_len >= 2 {
                repeated_runs += 1;
            }
            run_char = c;
            run_len = usize::from(is_punct(c));
        }
    }
    f[20] = repeated_runs as f64;

    // 22: quote characters
    f[21] = chars
        .iter()
        .filter(|&&c| matches!(c, '"' | '\'' | '\u{201c}' | '\u{201d}' | '\u{2018}' | '\u{2019}' | '`'))
        .count() as f64;

    // 23-27: character composition
    f[22] = ratio(chars.iter().filter(|c| c.is_whitespace()).count() as f64, n_chars);
    let distinct: HashSet<char> = chars.iter().copied().collect();
    f[23] = ratio(distinct.len() as f64, n_chars);
    let vowels = letters
        .iter()
        .filter(|c| matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u'))
        .count() as f64;
    f[24] = ratio(vowels, letters.len() as f64);
    let mut repeat_char_runs = 0usize;
    let mut prev = ' ';
    let mut len = 0usize;
    for &c in chars.iter().chain(std::iter::once(&' ')) {
        if c.is_alphanumeric() && c == prev {
            len += 1;
        } else {
            if len >= 3 {
                repeat_char_runs += 1;
            }
            prev = c;
            len = usize::from(c.is_alphanumeric());
        }
    }
    f[25] = repeat_char_runs as f64;
    f[26] = ratio(chars.iter().filter(|c| !c.is_ascii()).count() as f64, n_chars);

    // 28-31: lexical repetition over lowercased words
    let lower_words: Vec<String> = word_list.iter().map(|w| w.to_lowercase()).collect();
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for w in &lower_words {
        *freq.entry(w.as_str()).or_insert(0) += 1;
    }
    f[27] = ratio(freq.len() as f64, n_words);
    let hapaxes = freq.values().filter(|&&c| c == 1).count() as f64;
    f[28] = ratio(hapaxes, n_words);
    let max_freq = freq.values().copied().max().unwrap_or(0) as f64;
    f[29] = ratio(max_freq, n_words);
    if lower_words.len() >= 2 {
        let bigrams: HashSet<(&str, &str)> = lower_words
            .windows(2)
            .map(|w| (w[0].as_str(), w[1].as_str()))
            .collect();
        let total = (lower_words.len() - 1) as f64;
        f[30] = 1.0 - bigrams.len() as f64 / total;
    }

    // 32-36: function-word counts
    let count_in = |set: &[&str]| {
        lower_words
            .iter()
            .filter(|w| set.contains(&w.as_str()))
            .count() as f64
    };
    let stop_hits = lower_words
        .iter()
        .filter(|w| res.stopwords.contains(w.as_str()))
        .count() as f64;
    f[31] = ratio(stop_hits, n_words);
    f[32] = count_in(&NEGATIONS);
    f[33] = count_in(&FIRST_PERSON);
    f[34] = count_in(&SECOND_PERSON);
    f[35] = count_in(&THIRD_PERSON);

    // 37-40: valence lexicon
    let hits: Vec<f64> = lower_words
        .iter()
        .filter_map(|w| res.valence.get(w.as_str()).copied())
        .collect();
    if !hits.is_empty() {
        f[36] = hits.iter().sum::<f64>() / hits.len() as f64;
    }
    f[37] = ratio(hits.len() as f64, n_words);
    f[38] = ratio(hits.iter().filter(|&&v| v > 0.0).count() as f64, n_words);
    f[39] = ratio(hits.iter().filter(|&&v| v < 0.0).count() as f64, n_words);

    // 41-42: superlatives and intensifiers
    f[40] = lower_words
        .iter()
        .filter(|w| res.superlatives.contains(w.as_str()))
        .count() as f64;
    f[41] = lower_words
        .iter()
        .filter(|w| res.intensifiers.contains(w.as_str()))
        .count() as f64;

    // 43: syllable estimate over words containing letters
    let lettered: Vec<&&str> = word_list
        .iter()
        .filter(|w| w.chars().any(char::is_alphabetic))
        .collect();
    if !lettered.is_empty() {
        let total: f64 = lettered.iter().map(|w| syllable_estimate(w)).sum();
        f[42] = total / lettered.len() as f64;
    }

    debug_assert!(f.iter().all(|v| v.is_finite()));
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn res() -> &'static Resources {
        Resources::builtin()
    }

    #[test]
    fn empty_text_is_all_zero() {
        let f = linguistic_features("", res());
        assert_eq!(f.len(), N_LINGUISTIC);
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wow_example() {
        let f = linguistic_features("WOW!!!", res());
        assert_eq!(f[8], 1.0, "uppercase_char_ratio over letters");
        assert_eq!(f[15], 3.0, "exclamation_count");
        assert_eq!(f[20], 1.0, "repeated_punct_run_count");
        assert_eq!(f[9], 1.0, "uppercase_word_ratio");
        assert_eq!(f[2], 1.0, "one sentence");
    }

    #[test]
    fn repetition_example() {
        let f = linguistic_features("good good good", res());
        assert_eq!(f[29], 1.0, "max_token_frequency_ratio");
        assert!((f[27] - 1.0 / 3.0).abs() < 1e-12, "type_token_ratio");
        assert_eq!(f[28], 0.0, "no hapaxes");
        // bigrams: (good,good) twice -> 1 distinct of 2 total
        assert!((f[30] - 0.5).abs() < 1e-12, "bigram_repetition_ratio");
    }

    #[test]
    fn counts_by_hand() {
        let text = "I love it... really! Don't you? 5 stars, \"great\" y\u{e9}s";
        let f = linguistic_features(text, res());
        assert_eq!(f[15], 1.0, "exclamations");
        assert_eq!(f[16], 1.0, "questions");
        assert_eq!(f[18], 1.0, "commas");
        assert_eq!(f[19], 1.0, "ellipsis");
        assert_eq!(f[21], 3.0, "quotes: two doubles and one apostrophe");
        assert_eq!(f[33], 1.0, "first person: I");
        assert_eq!(f[34], 1.0, "second person: you");
        assert_eq!(f[35], 1.0, "third person: it");
        assert_eq!(f[13], 1.0 / 11.0, "digit token 5 of 11 words");
        assert!(f[26] > 0.0, "non-ascii present");
    }

    #[test]
    fn sentence_counting() {
        let f = linguistic_features("First one. second two! THIRD?", res());
        assert_eq!(f[2], 3.0);
        assert!((f[11] - 2.0 / 3.0).abs() < 1e-12, "two of three start uppercase");
        assert_eq!(f[6], 5.0 / 3.0, "avg words per sentence");
    }

    #[test]
    fn repeated_char_runs() {
        let f = linguistic_features("sooooo coool, ok", res());
        assert_eq!(f[25], 2.0, "ooooo and ooo");
    }

    #[test]
    fn sentiment_direction() {
        let pos = linguistic_features("excellent amazing perfect", res());
        let neg = linguistic_features("terrible awful broken", res());
        assert!(pos[36] > 0.5);
        assert!(neg[36] < -0.5);
        assert_eq!(pos[40], 3.0, "three superlatives");
        assert_eq!(pos[38], 1.0, "all words positive");
        assert_eq!(neg[39], 1.0, "all words negative");
    }

    #[test]
    fn syllables_plausible() {
        assert_eq!(syllable_estimate("cat"), 1.0);
        assert_eq!(syllable_estimate("little"), 2.0);
        assert_eq!(syllable_estimate("make"), 1.0);
        assert_eq!(syllable_estimate("beautiful"), 3.0);
        let f = linguistic_features("a tiny cat", res());
        assert!(f[42] >= 1.0 && f[42] <= 2.0);
    }

    #[test]
    fn all_finite_on_messy_input() {
        for text in ["....", "!!!", "???", "12 34", "\u{1F600}\u{1F600}", "a", " ", "\t\n"] {
            let f = linguistic_features(text, res());
            assert!(f.iter().all(|v| v.is_finite()), "non-finite for {text:?}");
            assert_eq!(f.len(), N_LINGUISTIC);
        }
    }
}
