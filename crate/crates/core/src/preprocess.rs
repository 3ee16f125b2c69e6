//! Text normalization: contraction expansion, cleaning, lemmatization, and
//! negation-preserving stopword removal.
//!
//! Every step is a pure function of its input; documents can be processed in
//! parallel. The language resources (contraction table, lemma lexicon,
//! stopword list, valence lexicon) are flat files versioned in
//! `resources/`; a compiled-in copy is the default and file overrides are
//! accepted for every table.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tokens that must survive stopword removal so negation context is kept.
pub const NEGATION_KEEP: [&str; 7] = ["not", "no", "never", "none", "nor", "n't", "cannot"];

#[derive(Debug, Error)]
pub enum ResourceError {
    #[error("cannot read resource {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed line {line} in {file}: expected key<TAB>value")]
    Malformed { file: String, line: usize },
    #[error("malformed line {line} in {file}: expected word<TAB>number in [-1,1]")]
    BadValence { file: String, line: usize },
}

/// Language resources shared by preprocessing and the linguistic features.
#[derive(Debug, Clone)]
pub struct Resources {
    pub contractions: HashMap<String, String>,
    pub lemmas: HashMap<String, String>,
    pub stopwords: HashSet<String>,
    pub valence: HashMap<String, f64>,
    pub superlatives: HashSet<String>,
    pub intensifiers: HashSet<String>,
}

fn parse_table(name: &str, content: &str) -> Result<HashMap<String, String>, ResourceError> {
    let mut map = HashMap::new();
    for (ix, line) in content.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('\t').ok_or_else(|| ResourceError::Malformed {
            file: name.to_string(),
            line: ix + 1,
        })?;
        map.insert(key.to_lowercase(), value.to_lowercase());
    }
    Ok(map)
}

fn parse_valence(name: &str, content: &str) -> Result<HashMap<String, f64>, ResourceError> {
    let mut map = HashMap::new();
    for (ix, line) in content.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || ResourceError::BadValence {
            file: name.to_string(),
            line: ix + 1,
        };
        let (word, value) = line.split_once('\t').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        if !(-1.0..=1.0).contains(&value) {
            return Err(bad());
        }
        map.insert(word.to_lowercase(), value);
    }
    Ok(map)
}

fn parse_word_list(content: &str) -> HashSet<String> {
    content
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

impl Resources {
    /// Parse a full resource set from in-memory file contents.
    pub fn from_strs(
        contractions: &str,
        lemmas: &str,
        stopwords: &str,
        valence: &str,
        superlatives: &str,
        intensifiers: &str,
    ) -> Result<Resources, ResourceError> {
        Ok(Resources {
            contractions: parse_table("contractions", contractions)?,
            lemmas: parse_table("lemmas", lemmas)?,
            stopwords: parse_word_list(stopwords),
            valence: parse_valence("valence", valence)?,
            superlatives: parse_word_list(superlatives),
            intensifiers: parse_word_list(intensifiers),
        })
    }

    /// The resource set compiled into the binary.
    pub fn builtin() -> &'static Resources {
        static BUILTIN: OnceLock<Resources> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            Resources::from_strs(
                include_str!("../resources/contractions.tsv"),
                include_str!("../resources/lemmas.tsv"),
                include_str!("../resources/stopwords.txt"),
                include_str!("../resources/valence.tsv"),
                include_str!("../resources/superlatives.txt"),
                include_str!("../resources/intensifiers.txt"),
            )
            .expect("bundled resources are well-formed")
        })
    }

    /// Load from files, falling back to the builtin copy for any `None` path.
    pub fn from_paths(paths: &ResourcePaths) -> Result<Resources, ResourceError> {
        let read = |p: &Option<std::path::PathBuf>, builtin: &str| -> Result<String, ResourceError> {
            match p {
                Some(path) => std::fs::read_to_string(path).map_err(|source| ResourceError::Io {
                    path: path.display().to_string(),
                    source,
                }),
                None => Ok(builtin.to_string()),
            }
        };
        Resources::from_strs(
            &read(&paths.contractions, include_str!("../resources/contractions.tsv"))?,
            &read(&paths.lemmas, include_str!("../resources/lemmas.tsv"))?,
            &read(&paths.stopwords, include_str!("../resources/stopwords.txt"))?,
            &read(&paths.valence, include_str!("../resources/valence.tsv"))?,
            &read(&paths.superlatives, include_str!("../resources/superlatives.txt"))?,
            &read(&paths.intensifiers, include_str!("../resources/intensifiers.txt"))?,
        )
    }

    /// Render each table back to its file format (used when persisting a
    /// model bundle, so prediction always sees the exact training resources).
    pub fn to_file_contents(&self) -> [(&'static str, String); 6] {
        fn table(map: &HashMap<String, String>) -> String {
            let mut rows: Vec<_> = map.iter().collect();
            rows.sort();
            rows.iter()
                .map(|(k, v)| format!("{k}\t{v}\n"))
                .collect::<String>()
        }
        fn list(set: &HashSet<String>) -> String {
            let mut rows: Vec<_> = set.iter().collect();
            rows.sort();
            rows.iter().map(|w| format!("{w}\n")).collect::<String>()
        }
        let mut valence: Vec<_> = self.valence.iter().collect();
        valence.sort_by(|a, b| a.0.cmp(b.0));
        let valence = valence
            .iter()
            .map(|(w, v)| format!("{w}\t{v}\n"))
            .collect::<String>();
        [
            ("contractions.tsv", table(&self.contractions)),
            ("lemmas.tsv", table(&self.lemmas)),
            ("stopwords.txt", list(&self.stopwords)),
            ("valence.tsv", valence),
            ("superlatives.txt", list(&self.superlatives)),
            ("intensifiers.txt", list(&self.intensifiers)),
        ]
    }
}

/// Optional file overrides for each bundled resource.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ResourcePaths {
    pub contractions: Option<std::path::PathBuf>,
    pub lemmas: Option<std::path::PathBuf>,
    pub stopwords: Option<std::path::PathBuf>,
    pub valence: Option<std::path::PathBuf>,
    pub superlatives: Option<std::path::PathBuf>,
    pub intensifiers: Option<std::path::PathBuf>,
}

impl ResourcePaths {
    pub fn from_dir(dir: &Path) -> ResourcePaths {
        ResourcePaths {
            contractions: Some(dir.join("contractions.tsv")),
            lemmas: Some(dir.join("lemmas.tsv")),
            stopwords: Some(dir.join("stopwords.txt")),
            valence: Some(dir.join("valence.tsv")),
            superlatives: Some(dir.join("superlatives.txt")),
            intensifiers: Some(dir.join("intensifiers.txt")),
        }
    }
}

/// Switches for the normalization pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub expand_contractions: bool,
    pub lowercase: bool,
    pub preserve_emotive_punct: bool,
    pub lemmatize: bool,
    pub remove_stopwords: bool,
    pub stopword_keep_list: BTreeSet<String>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            expand_contractions: true,
            lowercase: true,
            preserve_emotive_punct: true,
            lemmatize: true,
            remove_stopwords: true,
            stopword_keep_list: NEGATION_KEEP.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl PreprocessConfig {
    /// Re-establish the invariant that the keep list contains the negation
    /// set whenever stopword removal is enabled.
    pub fn normalized(mut self) -> Self {
        if self.remove_stopwords {
            for w in NEGATION_KEEP {
                self.stopword_keep_list.insert(w.to_string());
            }
        }
        self
    }
}

/// A preprocessed document. `raw` stays byte-identical to the ingested text;
/// the linguistic features are computed from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanDocument {
    pub tokens: Vec<String>,
    pub raw: String,
}

impl CleanDocument {
    /// The character stream seen by the character n-gram block: the processed
    /// tokens joined by single spaces.
    pub fn char_stream(&self) -> String {
        self.tokens.join(" ")
    }
}

fn normalize_apostrophes(text: &str) -> String {
    text.replace(['\u{2018}', '\u{2019}', '`'], "'")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

/// Expand contractions on word boundaries, case-insensitively, preserving the
/// casing of the first letter ("Can't" becomes "Cannot").
pub fn expand_contractions(text: &str, table: &HashMap<String, String>) -> String {
    let text = normalize_apostrophes(text);
    let mut out = String::with_capacity(text.len());
    let mut span = String::new();
    let flush = |span: &mut String, out: &mut String| {
        if span.is_empty() {
            return;
        }
        let key = span.to_lowercase();
        match table.get(&key) {
            Some(expansion) => {
                let first_upper = span
                    .chars()
                    .find(|c| c.is_alphabetic())
                    .is_some_and(|c| c.is_uppercase());
                if first_upper {
                    let mut chars = expansion.chars();
                    if let Some(first) = chars.next() {
                        out.extend(first.to_uppercase());
                        out.push_str(chars.as_str());
                    }
                } else {
                    out.push_str(expansion);
                }
            }
            None => out.push_str(span),
        }
        span.clear();
    };
    for c in text.chars() {
        if is_word_char(c) {
            span.push(c);
        } else {
            flush(&mut span, &mut out);
            out.push(c);
        }
    }
    flush(&mut span, &mut out);
    out
}

fn strip_markup_tags(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '<' {
            // Only treat as a tag when it looks like one: <b>, </b>, <!--.
            let mut j = i + 1;
            if j < chars.len() && chars[j] == '/' {
                j += 1;
            }
            let looks_like_tag = chars.get(j).is_some_and(|c| c.is_ascii_alphabetic() || *c == '!');
            if looks_like_tag {
                if let Some(close) = chars[i..].iter().position(|&c| c == '>') {
                    out.push(' ');
                    i += close + 1;
                    continue;
                }
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

fn is_url(token: &str) -> bool {
    let lower = token.to_lowercase();
    lower.starts_with("http://")
        || lower.starts_with("https://")
        || lower.starts_with("ftp://")
        || lower.starts_with("www.")
}

fn is_email(token: &str) -> bool {
    match token.find('@') {
        Some(at) if at > 0 => token[at + 1..].contains('.'),
        _ => false,
    }
}

/// Remove markup, URLs, and e-mail addresses; keep '!'/'?' runs as standalone
/// tokens when configured; strip the remaining punctuation and collapse
/// whitespace.
pub fn clean_text(text: &str, cfg: &PreprocessConfig) -> String {
    let text = strip_markup_tags(text);
    let mut pieces: Vec<String> = Vec::new();
    for token in text.split_whitespace() {
        if is_url(token) || is_email(token) {
            continue;
        }
        let mut word = String::new();
        let mut emotive = String::new();
        let flush_word = |word: &mut String, pieces: &mut Vec<String>| {
            if !word.is_empty() {
                pieces.push(std::mem::take(word));
            }
        };
        let flush_emotive = |emotive: &mut String, pieces: &mut Vec<String>| {
            if !emotive.is_empty() {
                pieces.push(std::mem::take(emotive));
            }
        };
        for c in token.chars() {
            if c == '!' || c == '?' {
                flush_word(&mut word, &mut pieces);
                if cfg.preserve_emotive_punct {
                    emotive.push(c);
                }
            } else {
                flush_emotive(&mut emotive, &mut pieces);
                if c.is_alphanumeric() {
                    if cfg.lowercase {
                        word.extend(c.to_lowercase());
                    } else {
                        word.push(c);
                    }
                } else {
                    flush_word(&mut word, &mut pieces);
                }
            }
        }
        flush_word(&mut word, &mut pieces);
        flush_emotive(&mut emotive, &mut pieces);
    }
    pieces.join(" ")
}

/// Replace each token by its lemma when the lexicon knows it.
pub fn lemmatize(tokens: &[String], lexicon: &HashMap<String, String>) -> Vec<String> {
    tokens
        .iter()
        .map(|t| lexicon.get(t).cloned().unwrap_or_else(|| t.clone()))
        .collect()
}

/// Drop stopwords, except tokens on the keep list.
pub fn remove_stopwords(
    tokens: &[String],
    stopwords: &HashSet<String>,
    cfg: &PreprocessConfig,
) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| cfg.stopword_keep_list.contains(*t) || !stopwords.contains(*t))
        .cloned()
        .collect()
}

/// Full per-document pipeline: contractions, cleaning, whitespace
/// tokenization, lemmatization, stopword removal.
pub fn preprocess_document(text: &str, cfg: &PreprocessConfig, res: &Resources) -> CleanDocument {
    let expanded = if cfg.expand_contractions {
        expand_contractions(text, &res.contractions)
    } else {
        text.to_string()
    };
    let cleaned = clean_text(&expanded, cfg);
    let mut tokens: Vec<String> = cleaned.split_whitespace().map(str::to_string).collect();
    if cfg.lemmatize {
        tokens = lemmatize(&tokens, &res.lemmas);
    }
    if cfg.remove_stopwords {
        tokens = remove_stopwords(&tokens, &res.stopwords, cfg);
    }
    CleanDocument {
        tokens,
        raw: text.to_string(),
    }
}
