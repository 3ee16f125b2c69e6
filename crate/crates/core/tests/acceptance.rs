//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `--nocapture`). Thresholds are pinned here, not
//! tuned at runtime.

mod common;

use rand::Rng;
use revhawk::corpus::Label;
use revhawk::eval::{metrics, roc_auc};
use revhawk::features::{DenseMatrix, FeatureMatrix};
use revhawk::hho::{select_features, FitnessParams, HhoParams};
use revhawk::learners::{
    log_loss, logistic_loss_gradient, predict_proba_batch, train_gradient_boosting,
    train_random_forest, GbParams, TreeParams,
};
use revhawk::pipeline::{fitted_state_bytes, run_stages, PipelineConfig, StopAfter};
use revhawk::resample::{enn, smote};
use revhawk::rng::stream_rng;
use revhawk::{minimize, Corpus, ReviewRecord};

fn pass(criterion: &str) {
    println!("ACCEPT {criterion}: PASS");
}

/// Criterion 1 — the reported confusion counts reproduce the published
/// headline metrics to within 0.005 percentage points.
#[test]
fn criterion_1_metrics_oracle_exact() {
    let cm = revhawk::eval::ConfusionMatrix {
        tp: 1162,
        fn_: 61,
        fp: 90,
        tn: 1973,
    };
    assert_eq!(cm.total(), 3286);
    let report = metrics(&cm).unwrap();
    let checks = [
        ("accuracy", report.accuracy, 95.40),
        ("precision", report.precision, 92.81),
        ("recall", report.recall, 95.01),
        ("f1", report.f1, 93.90),
    ];
    for (name, got, expect_pct) in checks {
        let diff_pp = (got * 100.0 - expect_pct).abs();
        assert!(
            diff_pp <= 0.005,
            "{name}: {:.4}% vs {expect_pct}% (off by {diff_pp:.4} pp)",
            got * 100.0
        );
    }
    pass("1 metrics-oracle");
}

/// Criterion 2 — HHO reaches 1e-4 on the 10-dimensional sphere and its
/// best-so-far history never increases, over a 20-seed sweep.
#[test]
fn criterion_2_hho_sphere_sanity() {
    let sphere = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    for seed in 0..20u64 {
        let mut params = HhoParams::uniform_bounds(-10.0, 10.0, 10, seed);
        params.n_iterations = 200;
        let result = minimize(&sphere, 10, &params).unwrap();
        assert!(
            result.best_fitness < 1e-4,
            "seed {seed}: best fitness {}",
            result.best_fitness
        );
        for w in result.history.windows(2) {
            assert!(w[1] <= w[0], "seed {seed}: history increased");
        }
        assert_eq!(result.history.len(), 200);
    }
    pass("2 hho-sphere");
}

/// Criterion 3 — binary HHO recovers the informative columns of a
/// synthetic selection problem: >= 8/10 in the median over 5 seeds, and
/// never selects all 100 columns.
#[test]
fn criterion_3_feature_selection_recovery() {
    let mut hits_all = Vec::new();
    for seed in 0..5u64 {
        let n = 600;
        let d = 100;
        let informative = 10;
        let mut rng = stream_rng(seed, "recovery_data", &[]);
        let weights: Vec<f64> = (0..informative).map(|_| rng.gen_range(1.1..1.7)).collect();
        let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let score: f64 = (0..informative).map(|j| weights[j] * row[j]).sum();
            let noisy = score + rng.gen_range(-0.15..0.15);
            labels.push(if noisy > 0.0 { Label::Cg } else { Label::Or });
            rows.push(row.iter().enumerate().map(|(j, &v)| (j as u32, v)).collect());
        }
        let x = FeatureMatrix::from_rows(d, rows);
        // desk-profile selection settings
        let mut hho = HhoParams::uniform_bounds(-4.0, 4.0, d, seed);
        hho.n_hawks = 25;
        hho.n_iterations = 60;
        let fp = FitnessParams {
            max_rows: 1_000,
            holdout_fraction: 0.3,
            ..FitnessParams::default()
        };
        let result = select_features(&x, &labels, &hho, &fp).unwrap();
        assert!(
            result.mask.selected_count() < d,
            "seed {seed}: selected everything"
        );
        for w in result.history.windows(2) {
            assert!(w[1] <= w[0], "seed {seed}: history increased");
        }
        let hits = result
            .mask
            .selected_columns()
            .iter()
            .filter(|&&c| c < informative)
            .count();
        println!(
            "  seed {seed}: informative {hits}/10, selected {}/100",
            result.mask.selected_count()
        );
        hits_all.push(hits);
    }
    hits_all.sort_unstable();
    let median = hits_all[2];
    assert!(median >= 8, "median informative recovery {median}/10");
    pass("3 selection-recovery");
}

/// Brute-force segment membership oracle for SMOTE.
fn on_some_segment(minority: &DenseMatrix, point: &[f64], tol: f64) -> bool {
    for a in 0..minority.n_rows() {
        'pair: for b in 0..minority.n_rows() {
            if a == b {
                continue;
            }
            let (ra, rb) = (minority.row(a), minority.row(b));
            let mut u: Option<f64> = None;
            for j in 0..point.len() {
                let span = rb[j] - ra[j];
                if span.abs() > tol {
                    u = Some((point[j] - ra[j]) / span);
                    break;
                }
            }
            let u = match u {
                Some(u) if (-tol..=1.0 + tol).contains(&u) => u,
                Some(_) => continue,
                None => {
                    if ra.iter().zip(point).all(|(x, p)| (x - p).abs() <= tol) {
                        return true;
                    }
                    continue;
                }
            };
            for j in 0..point.len() {
                if (ra[j] + u * (rb[j] - ra[j]) - point[j]).abs() > tol {
                    continue 'pair;
                }
            }
            return true;
        }
    }
    false
}

/// Independent ENN reimplementation: full distance matrix plus sort.
fn brute_force_enn(x: &DenseMatrix, y: &[Label], k: usize) -> Vec<usize> {
    let n = x.n_rows();
    let mut kept = Vec::new();
    for i in 0..n {
        let mut dists: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (x.distance_sq(i, j), j))
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let disagree = dists[..k].iter().filter(|(_, j)| y[*j] != y[i]).count();
        if disagree * 2 <= k {
            kept.push(i);
        }
    }
    kept
}

/// Criterion 4 — SMOTE rows pass the segment test at 1e-9 and ENN matches
/// an independent brute-force reimplementation exactly on 50 random
/// 30-point instances.
#[test]
fn criterion_4_resampling_oracles() {
    for seed in 0..10u64 {
        let mut rng = stream_rng(seed, "smote_oracle", &[]);
        let n_min = rng.gen_range(3..8);
        let dim = rng.gen_range(2..5);
        let rows: Vec<Vec<f64>> = (0..n_min)
            .map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let minority = DenseMatrix::from_rows(rows);
        let mut srng = stream_rng(seed, "smote_draws", &[]);
        let synthetic = smote(&minority, 40, 3, &mut srng).unwrap();
        for i in 0..synthetic.n_rows() {
            assert!(
                on_some_segment(&minority, synthetic.row(i), 1e-9),
                "seed {seed}: synthetic row {i} off-segment"
            );
        }
    }

    for seed in 0..50u64 {
        let mut rng = stream_rng(seed, "enn_oracle_acc", &[]);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<Label> = (0..30)
            .map(|_| if rng.gen_bool(0.5) { Label::Cg } else { Label::Or })
            .collect();
        let x = DenseMatrix::from_rows(rows);
        assert_eq!(
            enn(&x, &y, 3).unwrap(),
            brute_force_enn(&x, &y, 3),
            "seed {seed}: ENN disagrees with oracle"
        );
    }
    pass("4 resampling-oracles");
}

/// Criterion 5 — learner numeric properties: gradient vs finite
/// differences, monotone boosting loss, forest probability contract, and
/// rank AUC vs the pairwise oracle on 100 random instances.
#[test]
fn criterion_5_learner_properties() {
    // logistic gradient against central differences, 5 perturbations
    let mut rng = stream_rng(3, "acc_fd", &[]);
    let rows: Vec<Vec<f64>> = (0..15)
        .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let y: Vec<u8> = (0..15).map(|i| u8::from(i % 2 == 0)).collect();
    let x = DenseMatrix::from_rows(rows);
    for _ in 0..5 {
        let weights: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bias = rng.gen_range(-0.5..0.5);
        let (_, grad, _) = logistic_loss_gradient(&x, &y, &weights, bias, 0.03);
        let eps = 1e-6;
        for j in 0..5 {
            let mut wp = weights.clone();
            wp[j] += eps;
            let mut wm = weights.clone();
            wm[j] -= eps;
            let (lp, _, _) = logistic_loss_gradient(&x, &y, &wp, bias, 0.03);
            let (lm, _, _) = logistic_loss_gradient(&x, &y, &wm, bias, 0.03);
            let numeric = (lp - lm) / (2.0 * eps);
            let denom = numeric.abs().max(grad[j].abs()).max(1e-8);
            assert!(
                ((grad[j] - numeric) / denom).abs() < 1e-5,
                "gradient component {j} off: {} vs {numeric}",
                grad[j]
            );
        }
    }

    // boosting training loss monotone per stage
    let mut rng = stream_rng(5, "acc_gb", &[]);
    let rows: Vec<Vec<f64>> = (0..150)
        .map(|_| (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let y: Vec<u8> = rows
        .iter()
        .map(|r| u8::from(r[0] - 0.7 * r[1] + rng.gen_range(-0.6..0.6) > 0.0))
        .collect();
    let x = DenseMatrix::from_rows(rows);
    let model = train_gradient_boosting(
        &x,
        &y,
        &GbParams {
            n_stages: 50,
            max_depth: 3,
            ..GbParams::default()
        },
    )
    .unwrap();
    let mut scores = vec![model.initial_logit; x.n_rows()];
    let mut last = log_loss(&scores, &y);
    for stage in &model.stages {
        for (i, s) in scores.iter_mut().enumerate() {
            *s += model.learning_rate * stage.predict(x.row(i));
        }
        let loss = log_loss(&scores, &y);
        assert!(loss <= last + 1e-12, "boosting loss increased: {loss} > {last}");
        last = loss;
    }

    // forest probability bounds and class-probability sum
    let forest = train_random_forest(&x, &y, 20, &TreeParams::default(), 9).unwrap();
    for p in predict_proba_batch(&forest, &x) {
        assert!((0.0..=1.0).contains(&p));
        assert!((p + (1.0 - p) - 1.0).abs() < 1e-9);
    }

    // rank AUC equals the pairwise oracle exactly, 100 random instances
    let brute = |y: &[Label], s: &[f64]| {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] == Label::Cg && y[j] == Label::Or {
                    pairs += 1.0;
                    if s[i] > s[j] {
                        wins += 1.0;
                    } else if s[i] == s[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    };
    let mut done = 0;
    let mut seed = 0u64;
    while done < 100 {
        seed += 1;
        let mut rng = stream_rng(seed, "acc_auc", &[]);
        let n = rng.gen_range(5..=500);
        let y: Vec<Label> = (0..n)
            .map(|_| if rng.gen_bool(0.5) { Label::Cg } else { Label::Or })
            .collect();
        if y.iter().all(|&l| l == y[0]) {
            continue;
        }
        let quantum = rng.gen_range(2..30);
        let scores: Vec<f64> = (0..n)
            .map(|_| (rng.gen_range(0..quantum) as f64) / quantum as f64)
            .collect();
        let rank = roc_auc(&y, &scores).unwrap();
        let oracle = brute(&y, &scores);
        assert!(
            (rank - oracle).abs() < 1e-12,
            "seed {seed}: rank {rank} vs oracle {oracle}"
        );
        done += 1;
    }
    pass("5 learner-properties");
}

/// Criterion 6 — on a 2,000-row stratified sample with the desk profile,
/// stacking is not worse than the best base model by more than 0.5 pp.
#[test]
fn criterion_6_stacking_benefit() {
    let full = common::synthetic_reviews(6_000, 31);
    let sample = common::stratified_sample(&full, 2_000, 5);
    let mut config = PipelineConfig::desk(17);
    // larger eval split so the 0.5 pp margin is measured on enough rows
    config.test_fraction = 0.25;
    let outcome = run_stages(&sample, &config, StopAfter::Train).unwrap();
    let model = outcome.bundle.model.as_ref().unwrap();

    // rebuild the masked test matrix through the bundle's own state
    let records = sample.records();
    let test_texts: Vec<String> = outcome
        .split
        .test
        .iter()
        .map(|&i| records[i].text.clone())
        .collect();
    let test_labels: Vec<Label> = outcome.split.test.iter().map(|&i| records[i].label).collect();
    let predictions = revhawk::pipeline::predict_texts(&outcome.bundle, &test_texts).unwrap();

    let accuracy_of = |scores: &[f64]| {
        scores
            .iter()
            .zip(&test_labels)
            .filter(|(&p, &l)| (p > 0.5) == (l == Label::Cg))
            .count() as f64
            / test_labels.len() as f64
    };
    let stacked_scores: Vec<f64> = predictions.iter().map(|p| p.cg_probability).collect();
    let stacked = accuracy_of(&stacked_scores);

    // base model accuracies on the identical masked representation
    let cfg = outcome.bundle.config.preprocess.clone().normalized();
    let docs: Vec<_> = test_texts
        .iter()
        .map(|t| revhawk::preprocess_document(t, &cfg, &outcome.bundle.resources))
        .collect();
    let raws: Vec<&str> = test_texts.iter().map(String::as_str).collect();
    let x_test = revhawk::transform(&outcome.bundle.space, &docs, &raws, &outcome.bundle.resources)
        .unwrap();
    let x_sel = x_test.select_columns(outcome.bundle.mask.bits()).to_dense();
    let base_accuracies = [
        ("extra_trees", accuracy_of(&predict_proba_batch(&model.extra_trees, &x_sel))),
        ("random_forest", accuracy_of(&predict_proba_batch(&model.random_forest, &x_sel))),
        ("boosting", accuracy_of(&predict_proba_batch(&model.boosting, &x_sel))),
        ("svm", accuracy_of(&predict_proba_batch(&model.svm, &x_sel))),
    ];
    let best = base_accuracies
        .iter()
        .map(|(_, a)| *a)
        .fold(f64::NEG_INFINITY, f64::max);
    println!("  stacking {stacked:.4}, bases {base_accuracies:?}");
    assert!(
        stacked >= best - 0.005,
        "stacking {stacked:.4} more than 0.5 pp below best base {best:.4}"
    );
    pass("6 stacking-benefit");
}

/// Criterion 7 — end-to-end desk run on a 4,000-row stratified sample:
/// held-out accuracy >= 85%, AUC >= 0.90, all artifacts emitted. The
/// paper-profile full-dataset job is documented in the README; its reported
/// full-scale numbers are not desk-reproducible.
#[test]
fn criterion_7_end_to_end_desk() {
    let full = common::synthetic_reviews(12_000, 47);
    let sample = common::stratified_sample(&full, 4_000, 3);
    let config = PipelineConfig::desk(23);
    let outcome = run_stages(&sample, &config, StopAfter::Train).unwrap();
    let metrics = outcome.metrics.as_ref().unwrap();
    let auc = metrics.auc.expect("both classes in the test split");
    println!(
        "  accuracy {:.4}, auc {auc:.4}, reduction {:.1}%",
        metrics.accuracy,
        100.0 * outcome.selection.mask.reduction_ratio()
    );
    assert!(metrics.accuracy >= 0.85, "accuracy {:.4}", metrics.accuracy);
    assert!(auc >= 0.90, "auc {auc:.4}");

    // all artifacts present
    let dir = tempfile::tempdir().unwrap();
    revhawk::pipeline::write_artifacts(&outcome, &sample, &config, dir.path()).unwrap();
    for name in [
        "ingestion_report.txt",
        "hho_history.tsv",
        "resample_report.txt",
        "metrics.txt",
        "metrics.json",
        "roc_points.tsv",
        "train_report.txt",
        "bundle/manifest.json",
        "bundle/config_snapshot.cfg",
        "bundle/mask.txt",
        "bundle/models/stacking.bin",
        "bundle/feature_space/meta.json",
        "bundle/resources/stopwords.txt",
    ] {
        assert!(dir.path().join(name).exists(), "missing artifact {name}");
    }
    pass("7 end-to-end-desk");
}

/// Criterion 8 — leakage guard: mutating test-partition texts changes no
/// fitted statistic in standard mode.
#[test]
fn criterion_8_leakage_guard() {
    let corpus = common::synthetic_reviews(800, 77);
    // reduced desk settings keep two full runs inside the budget
    let mut config = PipelineConfig::desk(5);
    config.hho.hawks = 8;
    config.hho.iterations = 10;
    config.learners.extra_trees = 10;
    config.learners.random_forest = 8;
    config.learners.boosting = 10;
    config.learners.stacking_folds = 3;

    let clean = run_stages(&corpus, &config, StopAfter::Train).unwrap();
    let clean_state = fitted_state_bytes(&clean);

    // poison every test row's text; labels stay, so the split is identical
    let mut records: Vec<ReviewRecord> = corpus.records().to_vec();
    for &ix in &clean.split.test {
        records[ix].text = format!("POISONED {ix} zz!!! http://leak.example xx@leak.example");
    }
    let poisoned_corpus = Corpus::from_records(records);
    let poisoned = run_stages(&poisoned_corpus, &config, StopAfter::Train).unwrap();
    assert_eq!(poisoned.split.test, clean.split.test, "split must not move");
    let poisoned_state = fitted_state_bytes(&poisoned);

    assert_eq!(
        clean_state, poisoned_state,
        "fitted state changed when test texts changed"
    );
    // sanity: the poisoned texts do change the test-side predictions
    assert_ne!(clean.test_scores, poisoned.test_scores);
    pass("8 leakage-guard");
}

/// Criterion 9 — two identical train runs produce byte-identical metric
/// reports and bundles.
#[test]
fn criterion_9_determinism() {
    let corpus = common::synthetic_reviews(1_500, 13);
    let config = PipelineConfig::desk(29);

    let run = |dir: &std::path::Path| {
        let outcome = run_stages(&corpus, &config, StopAfter::Train).unwrap();
        revhawk::pipeline::write_artifacts(&outcome, &corpus, &config, dir).unwrap();
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run(dir_a.path());
    run(dir_b.path());

    fn collect(root: &std::path::Path, base: &std::path::Path, out: &mut Vec<String>) {
        for entry in std::fs::read_dir(root).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                collect(&path, base, out);
            } else {
                out.push(path.strip_prefix(base).unwrap().display().to_string());
            }
        }
    }
    let mut files_a = Vec::new();
    collect(dir_a.path(), dir_a.path(), &mut files_a);
    files_a.sort();
    let mut files_b = Vec::new();
    collect(dir_b.path(), dir_b.path(), &mut files_b);
    files_b.sort();
    assert_eq!(files_a, files_b, "artifact file sets differ");
    assert!(files_a.iter().any(|f| f.contains("metrics")));
    assert!(files_a.iter().any(|f| f.contains("stacking.bin")));

    for rel in &files_a {
        let a = std::fs::read(dir_a.path().join(rel)).unwrap();
        let b = std::fs::read(dir_b.path().join(rel)).unwrap();
        assert_eq!(a, b, "artifact {rel} differs between identical runs");
    }
    pass("9 determinism");
}
