//! Labeled review corpus: loading, validation, and deterministic
//! stratified splits and folds.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_rng;

/// Review class. `Cg` (computer-generated) is the positive class everywhere
/// downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    /// Original, human-written review.
    Or,
    /// Computer-generated review.
    Cg,
}

impl Label {
    /// Case-insensitive parse of the two class names.
    pub fn parse(s: &str) -> Option<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "or" => Some(Label::Or),
            "cg" => Some(Label::Cg),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Or => "OR",
            Label::Cg => "CG",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One labeled review.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub text: String,
    pub label: Label,
    pub category: Option<String>,
    pub rating: Option<f64>,
}

/// Column-name mapping for the input table. Defaults follow the public
/// distribution of the benchmark dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSchema {
    pub text_column: String,
    pub label_column: String,
    pub category_column: Option<String>,
    pub rating_column: Option<String>,
}

impl Default for CorpusSchema {
    fn default() -> Self {
        CorpusSchema {
            text_column: "text_".into(),
            label_column: "label".into(),
            category_column: Some("category".into()),
            rating_column: Some("rating".into()),
        }
    }
}

/// Counts reported after ingestion.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_seen: usize,
    pub rows_kept: usize,
    pub dropped_empty_text: usize,
    pub dropped_malformed: usize,
    pub invalid_ratings: usize,
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rows_seen: {}", self.rows_seen)?;
        writeln!(f, "rows_kept: {}", self.rows_kept)?;
        writeln!(f, "dropped_empty_text: {}", self.dropped_empty_text)?;
        writeln!(f, "dropped_malformed: {}", self.dropped_malformed)?;
        write!(f, "invalid_ratings: {}", self.invalid_ratings)
    }
}

/// Immutable, ordered collection of records. Iteration order is file order.
#[derive(Debug, Clone)]
pub struct Corpus {
    records: Vec<ReviewRecord>,
    class_counts: BTreeMap<Label, usize>,
    pub ingest: IngestReport,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("missing required column '{0}' in header")]
    MissingColumn(String),
    #[error("unknown label value '{value}' at data row {row}")]
    UnknownLabel { value: String, row: usize },
    #[error("no valid rows in {0}")]
    Empty(String),
    #[error("malformed delimited input: {0}")]
    Csv(#[from] csv::Error),
    #[error("test fraction must lie in (0,1), got {0}")]
    BadFraction(f64),
    #[error("class {0} has {1} members; at least {2} required")]
    ClassTooSmall(Label, usize, usize),
    #[error("fold count must be at least 2, got {0}")]
    BadFoldCount(usize),
}

impl Corpus {
    pub fn from_records(records: Vec<ReviewRecord>) -> Corpus {
        let mut class_counts = BTreeMap::new();
        for r in &records {
            *class_counts.entry(r.label).or_insert(0) += 1;
        }
        Corpus {
            records,
            class_counts,
            ingest: IngestReport::default(),
        }
    }

    pub fn records(&self) -> &[ReviewRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.class_counts.get(&label).copied().unwrap_or(0)
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Reduce to the given record indices, preserving their order.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        Corpus::from_records(records)
    }
}

/// Train/test index partition produced by [`stratified_split`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Load a delimited UTF-8 table with a header row into a [`Corpus`].
///
/// Quoted fields (embedded commas and newlines) are handled. Rows whose text
/// is empty after trimming, and rows with too few fields, are dropped and
/// counted in the ingestion report. An unknown non-empty label aborts the
/// load: it almost always means the schema points at the wrong column.
pub fn load_corpus(path: &Path, schema: &CorpusSchema) -> Result<Corpus, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);

    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let text_ix = find(&schema.text_column)
        .ok_or_else(|| CorpusError::MissingColumn(schema.text_column.clone()))?;
    let label_ix = find(&schema.label_column)
        .ok_or_else(|| CorpusError::MissingColumn(schema.label_column.clone()))?;
    let category_ix = match &schema.category_column {
        Some(c) => find(c),
        None => None,
    };
    let rating_ix = match &schema.rating_column {
        Some(c) => find(c),
        None => None,
    };

    let mut records = Vec::new();
    let mut report = IngestReport::default();
    for (row_no, row) in reader.records().enumerate() {
        report.rows_seen += 1;
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                report.dropped_malformed += 1;
                continue;
            }
        };
        let (text, label_raw) = match (row.get(text_ix), row.get(label_ix)) {
            (Some(t), Some(l)) => (t, l),
            _ => {
                report.dropped_malformed += 1;
                continue;
            }
        };
        let label = match Label::parse(label_raw) {
            Some(l) => l,
            None if label_raw.trim().is_empty() => {
                report.dropped_malformed += 1;
                continue;
            }
            None => {
                return Err(CorpusError::UnknownLabel {
                    value: label_raw.to_string(),
                    row: row_no + 1,
                })
            }
        };
        if text.trim().is_empty() {
            report.dropped_empty_text += 1;
            continue;
        }
        let category = category_ix
            .and_then(|i| row.get(i))
            .map(str::to_string)
            .filter(|s| !s.is_empty());
        let rating = rating_ix.and_then(|i| row.get(i)).and_then(|s| {
            match s.trim().parse::<f64>() {
                Ok(v) if (1.0..=5.0).contains(&v) => Some(v),
                Ok(_) | Err(_) if !s.trim().is_empty() => {
                    report.invalid_ratings += 1;
                    None
                }
                _ => None,
            }
        });
        records.push(ReviewRecord {
            text: text.to_string(),
            label,
            category,
            rating,
        });
    }
    report.rows_kept = records.len();

    if records.is_empty() {
        return Err(CorpusError::Empty(path.display().to_string()));
    }
    let mut corpus = Corpus::from_records(records);
    corpus.ingest = report;
    Ok(corpus)
}

fn indices_by_class(labels: &[Label]) -> BTreeMap<Label, Vec<usize>> {
    let mut by_class: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    by_class
}

/// Deterministic stratified train/test split.
///
/// The overall test size is `ceil(fraction * n)`; it is apportioned to the
/// classes by largest remainder against the per-class quota `n_c * fraction`,
/// which keeps every class within one sample of exact proportionality.
pub fn stratified_split(
    corpus: &Corpus,
    test_fraction: f64,
    seed: u64,
) -> Result<SplitIndices, CorpusError> {
    stratified_split_labels(&corpus.labels(), test_fraction, seed)
}

/// [`stratified_split`] over a bare label list.
pub fn stratified_split_labels(
    labels: &[Label],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitIndices, CorpusError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::BadFraction(test_fraction));
    }
    let by_class = indices_by_class(labels);
    for (&label, members) in &by_class {
        if members.len() < 2 {
            return Err(CorpusError::ClassTooSmall(label, members.len(), 2));
        }
    }

    let n = labels.len();
    let n_test = (test_fraction * n as f64).ceil() as usize;

    // Per-class base allocation plus largest-remainder distribution.
    let mut alloc: Vec<(Label, usize, f64)> = by_class
        .iter()
        .map(|(&label, members)| {
            let quota = members.len() as f64 * test_fraction;
            (label, quota.floor() as usize, quota - quota.floor())
        })
        .collect();
    let mut leftover = n_test.saturating_sub(alloc.iter().map(|a| a.1).sum::<usize>());
    let mut order: Vec<usize> = (0..alloc.len()).collect();
    order.sort_by(|&a, &b| {
        alloc[b]
            .2
            .partial_cmp(&alloc[a].2)
            .unwrap()
            .then(alloc[a].0.cmp(&alloc[b].0))
    });
    for &ix in &order {
        if leftover == 0 {
            break;
        }
        alloc[ix].1 += 1;
        leftover -= 1;
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, take, _) in alloc {
        let mut members = by_class[&label].clone();
        let mut rng = stream_rng(seed, "split", &[label as u64]);
        members.shuffle(&mut rng);
        let take = take.min(members.len().saturating_sub(1));
        test.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test, seed })
}

/// One fold: (train indices, validation indices).
pub type FoldIndices = (Vec<usize>, Vec<usize>);

/// Deterministic stratified k-fold partition. Returns `(train, validation)`
/// index pairs; the validation sets partition the full index range and
/// per-class counts across folds differ by at most one.
pub fn stratified_kfold(
    labels: &[Label],
    k: usize,
    seed: u64,
) -> Result<Vec<FoldIndices>, CorpusError> {
    if k < 2 {
        return Err(CorpusError::BadFoldCount(k));
    }
    let by_class = indices_by_class(labels);
    for (&label, members) in &by_class {
        if members.len() < k {
            return Err(CorpusError::ClassTooSmall(label, members.len(), k));
        }
    }

    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (&label, members) in &by_class {
        let mut members = members.clone();
        let mut rng = stream_rng(seed, "kfold", &[label as u64]);
        members.shuffle(&mut rng);
        let n = members.len();
        let base = n / k;
        let extra = n % k;
        let mut start = 0;
        for (fold_ix, fold) in folds.iter_mut().enumerate() {
            let size = base + usize::from(fold_ix < extra);
            fold.extend_from_slice(&members[start..start + size]);
            start += size;
        }
    }

    let all: Vec<usize> = (0..labels.len()).collect();
    Ok(folds
        .into_iter()
        .map(|mut val| {
            val.sort_unstable();
            let train = all
                .iter()
                .copied()
                .filter(|i| val.binary_search(i).is_err())
                .collect();
            (train, val)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn toy_corpus(n_or: usize, n_cg: usize) -> Corpus {
        let mut records = Vec::new();
        for i in 0..n_or {
            records.push(ReviewRecord {
                text: format!("human text {i}"),
                label: Label::Or,
                category: None,
                rating: None,
            });
        }
        for i in 0..n_cg {
            records.push(ReviewRecord {
                text: format!("machine text {i}"),
                label: Label::Cg,
                category: None,
                rating: None,
            });
        }
        Corpus::from_records(records)
    }

    #[test]
    fn load_single_row() {
        let f = write_csv("category,rating,label,text_\nBooks,5.0,OR,hello\n");
        let corpus = load_corpus(f.path(), &CorpusSchema::default()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.count(Label::Or), 1);
        assert_eq!(corpus.count(Label::Cg), 0);
        assert_eq!(corpus.records()[0].rating, Some(5.0));
    }

    #[test]
    fn load_lowercase_label_and_quoted_text() {
        let f = write_csv("label,text_\ncg,\"nice, with a comma\nand a newline\"\n");
        let corpus = load_corpus(f.path(), &CorpusSchema::default()).unwrap();
        assert_eq!(corpus.records()[0].label, Label::Cg);
        assert!(corpus.records()[0].text.contains("comma\nand"));
    }

    #[test]
    fn load_balanced_counts() {
        let mut content = String::from("label,text_\n");
        for i in 0..40 {
            let label = if i % 2 == 0 { "OR" } else { "CG" };
            content.push_str(&format!("{label},review number {i}\n"));
        }
        let f = write_csv(&content);
        let corpus = load_corpus(f.path(), &CorpusSchema::default()).unwrap();
        assert_eq!(corpus.count(Label::Or), 20);
        assert_eq!(corpus.count(Label::Cg), 20);
        assert_eq!(corpus.len(), 40);
    }

    #[test]
    fn load_drops_empty_text_rows() {
        let f = write_csv("label,text_\nOR,   \nCG,real text\n");
        let corpus = load_corpus(f.path(), &CorpusSchema::default()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.ingest.dropped_empty_text, 1);
    }

    #[test]
    fn load_errors() {
        let missing = load_corpus(Path::new("/nonexistent/file.csv"), &CorpusSchema::default());
        assert!(matches!(missing, Err(CorpusError::Io { .. })));

        let f = write_csv("labels,texts\nOR,hi\n");
        assert!(matches!(
            load_corpus(f.path(), &CorpusSchema::default()),
            Err(CorpusError::MissingColumn(_))
        ));

        let f = write_csv("label,text_\nBANANA,hi\n");
        assert!(matches!(
            load_corpus(f.path(), &CorpusSchema::default()),
            Err(CorpusError::UnknownLabel { .. })
        ));

        let f = write_csv("label,text_\nOR,  \n");
        assert!(matches!(
            load_corpus(f.path(), &CorpusSchema::default()),
            Err(CorpusError::Empty(_))
        ));
    }

    #[test]
    fn split_reported_sizes() {
        // 21,905 rows at 15% must give the known 3,286 / 18,619 partition
        let corpus = toy_corpus(10_953, 10_952);
        let split = stratified_split(&corpus, 0.15, 1).unwrap();
        assert_eq!(split.test.len(), 3_286);
        assert_eq!(split.train.len(), 18_619);
    }

    #[test]
    fn split_exact_proportion_small() {
        let corpus = toy_corpus(5, 5);
        let split = stratified_split(&corpus, 0.2, 3).unwrap();
        assert_eq!(split.test.len(), 2);
        let labels = corpus.labels();
        let or_in_test = split.test.iter().filter(|&&i| labels[i] == Label::Or).count();
        assert_eq!(or_in_test, 1);
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let corpus = toy_corpus(31, 17);
        let a = stratified_split(&corpus, 0.3, 99).unwrap();
        let b = stratified_split(&corpus, 0.3, 99).unwrap();
        assert_eq!(a, b);

        let mut all: Vec<usize> = a.train.iter().chain(a.test.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..48).collect::<Vec<_>>());
    }

    #[test]
    fn split_per_class_within_one_sample() {
        for seed in 0..5u64 {
            for &(n_or, n_cg, f) in &[(31usize, 17usize, 0.3), (100, 3, 0.15), (7, 11, 0.5)] {
                let corpus = toy_corpus(n_or, n_cg);
                let split = stratified_split(&corpus, f, seed).unwrap();
                let labels = corpus.labels();
                for (label, n_c) in [(Label::Or, n_or), (Label::Cg, n_cg)] {
                    let got = split.test.iter().filter(|&&i| labels[i] == label).count();
                    assert!(
                        (got as f64 - n_c as f64 * f).abs() <= 1.0 + 1e-12,
                        "class {label} off by more than 1: got {got}, quota {}",
                        n_c as f64 * f
                    );
                }
            }
        }
    }

    #[test]
    fn split_rejects_bad_input() {
        let corpus = toy_corpus(5, 5);
        assert!(stratified_split(&corpus, 0.0, 0).is_err());
        assert!(stratified_split(&corpus, 1.0, 0).is_err());
        let lopsided = toy_corpus(5, 1);
        assert!(matches!(
            stratified_split(&lopsided, 0.2, 0),
            Err(CorpusError::ClassTooSmall(Label::Cg, 1, 2))
        ));
    }

    #[test]
    fn kfold_balanced_partition() {
        let corpus = toy_corpus(5, 5);
        let folds = stratified_kfold(&corpus.labels(), 5, 7).unwrap();
        assert_eq!(folds.len(), 5);
        let labels = corpus.labels();
        for (_, val) in &folds {
            assert_eq!(val.len(), 2);
            assert_eq!(val.iter().filter(|&&i| labels[i] == Label::Or).count(), 1);
        }
    }

    #[test]
    fn kfold_two_on_four() {
        let corpus = toy_corpus(2, 2);
        let folds = stratified_kfold(&corpus.labels(), 2, 0).unwrap();
        let labels = corpus.labels();
        for (train, val) in &folds {
            assert_eq!(val.len(), 2);
            assert_eq!(train.len(), 2);
            assert_eq!(val.iter().filter(|&&i| labels[i] == Label::Or).count(), 1);
        }
    }

    #[test]
    fn kfold_validation_sets_partition_everything() {
        for seed in 0..10u64 {
            let corpus = toy_corpus(13, 29);
            let folds = stratified_kfold(&corpus.labels(), 4, seed).unwrap();
            let mut seen: Vec<usize> = folds.iter().flat_map(|(_, v)| v.iter().copied()).collect();
            seen.sort_unstable();
            assert_eq!(seen, (0..42).collect::<Vec<_>>());
            // per-class fold counts differ by at most one
            let labels = corpus.labels();
            for label in [Label::Or, Label::Cg] {
                let counts: Vec<usize> = folds
                    .iter()
                    .map(|(_, v)| v.iter().filter(|&&i| labels[i] == label).count())
                    .collect();
                let min = counts.iter().min().unwrap();
                let max = counts.iter().max().unwrap();
                assert!(max - min <= 1);
            }
        }
    }

    #[test]
    fn kfold_rejects_bad_input() {
        let corpus = toy_corpus(5, 5);
        assert!(stratified_kfold(&corpus.labels(), 1, 0).is_err());
        assert!(stratified_kfold(&corpus.labels(), 6, 0).is_err());
    }

    #[test]
    fn subset_preserves_order() {
        let corpus = toy_corpus(3, 3);
        let sub = corpus.subset(&[4, 1, 2]);
        assert_eq!(sub.records()[0].text, corpus.records()[4].text);
        assert_eq!(sub.records()[1].text, corpus.records()[1].text);
        assert_eq!(sub.count(Label::Cg), 1);
        assert_eq!(sub.count(Label::Or), 2);
    }
}
