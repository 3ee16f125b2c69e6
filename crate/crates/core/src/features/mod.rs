//! Multi-modal feature extraction: word TF-IDF, character TF-IDF, raw
//! count n-grams, and the 43 linguistic features, concatenated into one
//! sparse matrix with a fixed block order.

mod linguistic;
mod matrix;

pub use linguistic::{linguistic_features, N_LINGUISTIC};
pub use matrix::{DenseMatrix, FeatureMatrix};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{CleanDocument, Resources};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot fit features on an empty corpus")]
    EmptyCorpus,
    #[error("documents and raw texts are not aligned: {0} vs {1}")]
    Misaligned(usize, usize),
    #[error("feature space io error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed feature space file {file}, line {line}")]
    Malformed { file: String, line: usize },
    #[error("feature space metadata error: {0}")]
    Meta(String),
}

/// Which representation a vocabulary block produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    WordTfidf,
    CharTfidf,
    Count,
}

impl BlockKind {
    pub fn file_name(self) -> &'static str {
        match self {
            BlockKind::WordTfidf => "word_tfidf.tsv",
            BlockKind::CharTfidf => "char_tfidf.tsv",
            BlockKind::Count => "count.tsv",
        }
    }
}

/// A fitted n-gram vocabulary: term-to-column mapping plus document
/// frequencies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabularyBlock {
    pub kind: BlockKind,
    pub ngram_range: (usize, usize),
    pub max_features: usize,
    /// term for each local column, 0-based and contiguous
    terms: Vec<String>,
    #[serde(skip)]
    term_to_column: HashMap<String, u32>,
    document_frequency: Vec<u32>,
    pub n_documents_fitted: usize,
}

impl VocabularyBlock {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn column_of(&self, term: &str) -> Option<u32> {
        self.term_to_column.get(term).copied()
    }

    pub fn term(&self, column: usize) -> &str {
        &self.terms[column]
    }

    pub fn document_frequency(&self, column: usize) -> u32 {
        self.document_frequency[column]
    }

    fn rebuild_index(&mut self) {
        self.term_to_column = self
            .terms
            .iter()
            .enumerate()
            .map(|(ix, t)| (t.clone(), ix as u32))
            .collect();
    }
}

/// Smoothed inverse document frequency: `ln((1+N)/(1+df)) + 1`.
///
/// Panics if `df` exceeds the number of fitted documents; that indicates a
/// corrupted vocabulary, not recoverable input.
pub fn idf_weight(df: usize, n_docs: usize) -> f64 {
    assert!(n_docs >= 1, "idf undefined without documents");
    assert!(df <= n_docs, "document frequency {df} > document count {n_docs}");
    ((1 + n_docs) as f64 / (1 + df) as f64).ln() + 1.0
}

fn word_ngrams(tokens: &[String], range: (usize, usize), mut sink: impl FnMut(String)) {
    for n in range.0..=range.1 {
        if n == 0 || tokens.len() < n {
            continue;
        }
        for window in tokens.windows(n) {
            sink(window.join(" "));
        }
    }
}

fn char_ngrams(stream: &str, range: (usize, usize), mut sink: impl FnMut(String)) {
    let chars: Vec<char> = stream.chars().collect();
    for n in range.0..=range.1 {
        if n == 0 || chars.len() < n {
            continue;
        }
        for window in chars.windows(n) {
            sink(window.iter().collect());
        }
    }
}

fn for_each_term(doc: &CleanDocument, kind: BlockKind, range: (usize, usize), sink: impl FnMut(String)) {
    match kind {
        BlockKind::WordTfidf => word_ngrams(&doc.tokens, range, sink),
        BlockKind::CharTfidf => char_ngrams(&doc.char_stream(), range, sink),
        BlockKind::Count => word_ngrams(&doc.tokens, range, sink),
    }
}

fn fit_block(
    docs: &[CleanDocument],
    kind: BlockKind,
    ngram_range: (usize, usize),
    max_features: usize,
) -> Result<VocabularyBlock, FeatureError> {
    if docs.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    // term -> (corpus frequency, document frequency)
    let mut stats: HashMap<String, (u64, u32)> = HashMap::new();
    let mut doc_terms: HashMap<String, u64> = HashMap::new();
    for doc in docs {
        doc_terms.clear();
        for_each_term(doc, kind, ngram_range, |term| {
            *doc_terms.entry(term).or_insert(0) += 1;
        });
        for (term, count) in doc_terms.drain() {
            let entry = stats.entry(term).or_insert((0, 0));
            entry.0 += count;
            entry.1 += 1;
        }
    }

    // top max_features by corpus frequency, ties broken lexicographically
    let mut ranked: Vec<(String, (u64, u32))> = stats.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1 .0.cmp(&a.1 .0).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_features);
    // columns in lexicographic term order for a stable, readable layout
    ranked.sort_unstable_by(|a, b| a.0.cmp(&b.0));

    let mut block = VocabularyBlock {
        kind,
        ngram_range,
        max_features,
        terms: ranked.iter().map(|(t, _)| t.clone()).collect(),
        term_to_column: HashMap::new(),
        document_frequency: ranked.iter().map(|(_, s)| s.1).collect(),
        n_documents_fitted: docs.len(),
    };
    block.rebuild_index();
    Ok(block)
}

/// Word 1- to 4-gram TF-IDF vocabulary.
pub fn fit_word_tfidf(
    docs: &[CleanDocument],
    ngram_range: (usize, usize),
    max_features: usize,
) -> Result<VocabularyBlock, FeatureError> {
    fit_block(docs, BlockKind::WordTfidf, ngram_range, max_features)
}

/// Character 3- to 6-gram TF-IDF vocabulary over the processed token stream
/// (spaces and preserved '!'/'?' runs included).
pub fn fit_char_tfidf(
    docs: &[CleanDocument],
    ngram_range: (usize, usize),
    max_features: usize,
) -> Result<VocabularyBlock, FeatureError> {
    fit_block(docs, BlockKind::CharTfidf, ngram_range, max_features)
}

/// Raw-count word 1- to 2-gram vocabulary.
pub fn fit_count(
    docs: &[CleanDocument],
    ngram_range: (usize, usize),
    max_features: usize,
) -> Result<VocabularyBlock, FeatureError> {
    fit_block(docs, BlockKind::Count, ngram_range, max_features)
}

/// Per-feature standardization statistics for the linguistic block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinguisticScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub zero_variance: Vec<bool>,
}

impl LinguisticScaler {
    pub fn fit(rows: &[Vec<f64>]) -> LinguisticScaler {
        let n = rows.len().max(1) as f64;
        let dim = rows.first().map_or(N_LINGUISTIC, Vec::len);
        let mut mean = vec![0.0; dim];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();
        // near-constant features are flagged: summing identical ratios can
        // leave a residual variance around 1e-17 that must not be scaled by
        let zero_variance: Vec<bool> = std
            .iter()
            .zip(&mean)
            .map(|(&s, &m)| s <= 1e-9 * (1.0 + m.abs()))
            .collect();
        LinguisticScaler {
            mean,
            std,
            zero_variance,
        }
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .zip(&self.zero_variance)
            .map(|(((v, m), s), &zero)| if zero { 0.0 } else { (v - m) / s })
            .collect()
    }
}

/// Upper bounds and n-gram ranges for the three vocabulary blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCaps {
    pub word_max: usize,
    pub word_ngram: (usize, usize),
    pub char_max: usize,
    pub char_ngram: (usize, usize),
    pub count_max: usize,
    pub count_ngram: (usize, usize),
}

impl Default for FeatureCaps {
    fn default() -> Self {
        FeatureCaps {
            word_max: 10_000,
            word_ngram: (1, 4),
            char_max: 1_500,
            char_ngram: (3, 6),
            count_max: 2_000,
            count_ngram: (1, 2),
        }
    }
}

/// The fitted feature representation: three vocabulary blocks plus the
/// linguistic scaler. Block order is fixed: word TF-IDF, char TF-IDF,
/// counts, linguistic.
#[derive(Debug, Clone, Serialize)]
pub struct FeatureSpace {
    pub blocks: Vec<VocabularyBlock>,
    pub linguistic: LinguisticScaler,
    pub total_dim: usize,
}

impl FeatureSpace {
    /// Column offset of each block, in block order, linguistic last.
    pub fn offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.blocks.len() + 1);
        let mut at = 0;
        for b in &self.blocks {
            offsets.push(at);
            at += b.len();
        }
        offsets.push(at);
        offsets
    }

    pub fn linguistic_offset(&self) -> usize {
        self.blocks.iter().map(VocabularyBlock::len).sum()
    }

    /// Human-readable name of a global column (for reports).
    pub fn column_name(&self, col: usize) -> String {
        let mut at = col;
        for b in &self.blocks {
            if at < b.len() {
                let prefix = match b.kind {
                    BlockKind::WordTfidf => "word",
                    BlockKind::CharTfidf => "char",
                    BlockKind::Count => "count",
                };
                return format!("{prefix}:{}", b.term(at));
            }
            at -= b.len();
        }
        format!("linguistic:{at}")
    }
}

/// Fit all four blocks on the training documents.
pub fn fit_feature_space(
    docs: &[CleanDocument],
    raw_texts: &[&str],
    caps: &FeatureCaps,
    res: &Resources,
) -> Result<FeatureSpace, FeatureError> {
    if docs.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    if docs.len() != raw_texts.len() {
        return Err(FeatureError::Misaligned(docs.len(), raw_texts.len()));
    }
    let word = fit_word_tfidf(docs, caps.word_ngram, caps.word_max)?;
    let char_block = fit_char_tfidf(docs, caps.char_ngram, caps.char_max)?;
    let count = fit_count(docs, caps.count_ngram, caps.count_max)?;

    let ling_rows: Vec<Vec<f64>> = raw_texts
        .par_iter()
        .map(|raw| linguistic_features(raw, res))
        .collect();
    let linguistic = LinguisticScaler::fit(&ling_rows);

    let total_dim = word.len() + char_block.len() + count.len() + N_LINGUISTIC;
    Ok(FeatureSpace {
        blocks: vec![word, char_block, count],
        linguistic,
        total_dim,
    })
}

fn transform_row(space: &FeatureSpace, doc: &CleanDocument, raw: &str, res: &Resources) -> Vec<(u32, f64)> {
    let mut entries: Vec<(u32, f64)> = Vec::new();
    let offsets = space.offsets();
    let mut counts: HashMap<u32, f64> = HashMap::new();
    for (block, &offset) in space.blocks.iter().zip(&offsets) {
        counts.clear();
        for_each_term(doc, block.kind, block.ngram_range, |term| {
            if let Some(col) = block.column_of(&term) {
                *counts.entry(col).or_insert(0.0) += 1.0;
            }
        });
        match block.kind {
            BlockKind::WordTfidf | BlockKind::CharTfidf => {
                let mut weighted: Vec<(u32, f64)> = counts
                    .iter()
                    .map(|(&col, &tf)| {
                        let df = block.document_frequency(col as usize) as usize;
                        (col, tf * idf_weight(df, block.n_documents_fitted))
                    })
                    .collect();
                // fixed summation order: hash iteration order varies per
                // process and float addition is not associative
                weighted.sort_unstable_by_key(|(col, _)| *col);
                let norm = weighted.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for (_, v) in &mut weighted {
                        *v /= norm;
                    }
                }
                entries.extend(
                    weighted
                        .into_iter()
                        .map(|(col, v)| (offset as u32 + col, v)),
                );
            }
            BlockKind::Count => {
                entries.extend(counts.iter().map(|(&col, &tf)| (offset as u32 + col, tf)));
            }
        }
    }
    let ling = space.linguistic.apply(&linguistic_features(raw, res));
    let base = space.linguistic_offset() as u32;
    entries.extend(
        ling.into_iter()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .map(|(ix, v)| (base + ix as u32, v)),
    );
    entries
}

/// Map documents into the fitted space. Out-of-vocabulary terms are ignored;
/// TF-IDF block rows are L2-normalized per block; the linguistic block is
/// standardized.
pub fn transform(
    space: &FeatureSpace,
    docs: &[CleanDocument],
    raw_texts: &[&str],
    res: &Resources,
) -> Result<FeatureMatrix, FeatureError> {
    if docs.len() != raw_texts.len() {
        return Err(FeatureError::Misaligned(docs.len(), raw_texts.len()));
    }
    let rows: Vec<Vec<(u32, f64)>> = docs
        .par_iter()
        .zip(raw_texts.par_iter())
        .map(|(doc, raw)| transform_row(space, doc, raw, res))
        .collect();
    Ok(FeatureMatrix::from_rows(space.total_dim, rows))
}

const SPACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct SpaceMeta {
    format_version: u32,
    kinds: Vec<BlockKind>,
    ngram_ranges: Vec<(usize, usize)>,
    max_features: Vec<usize>,
    block_sizes: Vec<usize>,
    n_documents_fitted: Vec<usize>,
    total_dim: usize,
    scaler_mean: Vec<f64>,
    scaler_std: Vec<f64>,
}

impl FeatureSpace {
    /// Persist as a directory: one TSV per vocabulary block
    /// (`term<TAB>column<TAB>document_frequency`) plus `meta.json`.
    pub fn save_dir(&self, dir: &Path) -> Result<(), FeatureError> {
        let io_err = |path: &Path, source: std::io::Error| FeatureError::Io {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        for block in &self.blocks {
            let mut out = String::new();
            for (col, term) in block.terms.iter().enumerate() {
                writeln!(out, "{term}\t{col}\t{}", block.document_frequency[col])
                    .expect("write to string");
            }
            let path = dir.join(block.kind.file_name());
            std::fs::write(&path, out).map_err(|e| io_err(&path, e))?;
        }
        let meta = SpaceMeta {
            format_version: SPACE_FORMAT_VERSION,
            kinds: self.blocks.iter().map(|b| b.kind).collect(),
            ngram_ranges: self.blocks.iter().map(|b| b.ngram_range).collect(),
            max_features: self.blocks.iter().map(|b| b.max_features).collect(),
            block_sizes: self.blocks.iter().map(|b| b.len()).collect(),
            n_documents_fitted: self.blocks.iter().map(|b| b.n_documents_fitted).collect(),
            total_dim: self.total_dim,
            scaler_mean: self.linguistic.mean.clone(),
            scaler_std: self.linguistic.std.clone(),
        };
        let path = dir.join("meta.json");
        let json = serde_json::to_string_pretty(&meta).expect("serializable meta");
        std::fs::write(&path, json).map_err(|e| io_err(&path, e))
    }

    pub fn load_dir(dir: &Path) -> Result<FeatureSpace, FeatureError> {
        let io_err = |path: &Path, source: std::io::Error| FeatureError::Io {
            path: path.display().to_string(),
            source,
        };
        let meta_path = dir.join("meta.json");
        let meta_raw = std::fs::read_to_string(&meta_path).map_err(|e| io_err(&meta_path, e))?;
        let meta: SpaceMeta =
            serde_json::from_str(&meta_raw).map_err(|e| FeatureError::Meta(e.to_string()))?;
        if meta.format_version != SPACE_FORMAT_VERSION {
            return Err(FeatureError::Meta(format!(
                "unsupported feature space version {}",
                meta.format_version
            )));
        }
        let mut blocks = Vec::new();
        for (ix, &kind) in meta.kinds.iter().enumerate() {
            let path = dir.join(kind.file_name());
            let raw = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
            let file = path.display().to_string();
            let mut terms = vec![String::new(); meta.block_sizes[ix]];
            let mut dfs = vec![0u32; meta.block_sizes[ix]];
            for (line_no, line) in raw.lines().enumerate() {
                let bad = || FeatureError::Malformed {
                    file: file.clone(),
                    line: line_no + 1,
                };
                let mut parts = line.rsplitn(3, '\t');
                let df: u32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let col: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let term = parts.next().ok_or_else(bad)?;
                if col >= terms.len() {
                    return Err(bad());
                }
                terms[col] = term.to_string();
                dfs[col] = df;
            }
            let mut block = VocabularyBlock {
                kind,
                ngram_range: meta.ngram_ranges[ix],
                max_features: meta.max_features[ix],
                terms,
                term_to_column: HashMap::new(),
                document_frequency: dfs,
                n_documents_fitted: meta.n_documents_fitted[ix],
            };
            block.rebuild_index();
            blocks.push(block);
        }
        let zero_variance = meta
            .scaler_std
            .iter()
            .zip(&meta.scaler_mean)
            .map(|(&s, &m)| s <= 1e-9 * (1.0 + m.abs()))
            .collect();
        Ok(FeatureSpace {
            blocks,
            linguistic: LinguisticScaler {
                mean: meta.scaler_mean,
                std: meta.scaler_std,
                zero_variance,
            },
            total_dim: meta.total_dim,
        })
    }
}
