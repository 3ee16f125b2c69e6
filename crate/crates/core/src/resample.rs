//! SMOTE oversampling, single-pass Edited Nearest Neighbours cleaning, and
//! their composition. Operates on the dense post-selection representation.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::features::DenseMatrix;
use crate::rng::{stream_rng, SubRng};

#[derive(Debug, Error)]
pub enum ResampleError {
    #[error("SMOTE needs at least 2 minority rows, got {0}")]
    TooFewMinority(usize),
    #[error("ENN needs k < number of rows ({k} >= {rows})")]
    BadEnnK { k: usize, rows: usize },
    #[error("both classes must be present")]
    SingleClass,
    #[error("rows and labels disagree: {0} vs {1}")]
    Misaligned(usize, usize),
}

/// Knobs for the resampling stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResampleParams {
    pub smote_k: usize,
    pub enn_k: usize,
    /// desired minority/majority ratio after oversampling
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for ResampleParams {
    fn default() -> Self {
        ResampleParams {
            smote_k: 5,
            enn_k: 3,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

/// Origin of each row in a resampled set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Original,
    Synthetic,
}

/// Output of [`smoteenn`]: the cleaned matrix plus bookkeeping for the
/// resampling report.
#[derive(Debug, Clone)]
pub struct ResampledSet {
    pub x: DenseMatrix,
    pub y: Vec<Label>,
    pub provenance: Vec<Provenance>,
    pub removed_count: usize,
    pub synthetic_count: usize,
    pub input_counts: (usize, usize),
    pub output_counts: (usize, usize),
}

impl ResampledSet {
    pub fn report(&self) -> String {
        let mut out = String::new();
        writeln!(out, "input_or: {}", self.input_counts.0).unwrap();
        writeln!(out, "input_cg: {}", self.input_counts.1).unwrap();
        writeln!(out, "synthetic_added: {}", self.synthetic_count).unwrap();
        writeln!(out, "removed_by_enn: {}", self.removed_count).unwrap();
        writeln!(out, "output_or: {}", self.output_counts.0).unwrap();
        write!(out, "output_cg: {}", self.output_counts.1).unwrap();
        out
    }
}

/// Indices of the `k` nearest rows to `query` (excluding `skip`), distance
/// ties broken by row index.
fn k_nearest(x: &DenseMatrix, query: usize, skip: Option<usize>, k: usize) -> Vec<usize> {
    let mut nearest: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for row in 0..x.n_rows() {
        if Some(row) == skip || row == query {
            continue;
        }
        let d = x.distance_sq(query, row);
        let pos = nearest
            .binary_search_by(|probe| probe.0.total_cmp(&d).then(probe.1.cmp(&row)))
            .unwrap_or_else(|p| p);
        if pos < k {
            nearest.insert(pos, (d, row));
            nearest.truncate(k);
        }
    }
    nearest.into_iter().map(|(_, ix)| ix).collect()
}

/// Generate synthetic minority rows: each is `x + u * (x_nn - x)` for a
/// random minority row, one of its k nearest minority neighbors, and
/// `u ~ Uniform[0,1]`.
pub fn smote(
    minority: &DenseMatrix,
    n_synthetic: usize,
    k: usize,
    rng: &mut SubRng,
) -> Result<DenseMatrix, ResampleError> {
    let n = minority.n_rows();
    if n < 2 {
        return Err(ResampleError::TooFewMinority(n));
    }
    let k = k.min(n - 1).max(1);
    let neighbors: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| k_nearest(minority, i, None, k))
        .collect();

    let mut out = DenseMatrix::zeros(0, minority.n_cols());
    for _ in 0..n_synthetic {
        let base = rng.gen_range(0..n);
        let neighbor = neighbors[base][rng.gen_range(0..neighbors[base].len())];
        let u: f64 = rng.gen();
        let row: Vec<f64> = minority
            .row(base)
            .iter()
            .zip(minority.row(neighbor))
            .map(|(a, b)| a + u * (b - a))
            .collect();
        out.push_row(&row);
    }
    Ok(out)
}

/// Single-pass Edited Nearest Neighbours: a row is dropped when the strict
/// majority label of its k nearest neighbors (computed against the original
/// set) disagrees with its own. Returns the kept row indices, in order.
pub fn enn(x: &DenseMatrix, y: &[Label], k: usize) -> Result<Vec<usize>, ResampleError> {
    if x.n_rows() != y.len() {
        return Err(ResampleError::Misaligned(x.n_rows(), y.len()));
    }
    if k >= x.n_rows() {
        return Err(ResampleError::BadEnnK {
            k,
            rows: x.n_rows(),
        });
    }
    let keep: Vec<bool> = (0..x.n_rows())
        .into_par_iter()
        .map(|i| {
            let neighbors = k_nearest(x, i, None, k);
            let disagree = neighbors.iter().filter(|&&nb| y[nb] != y[i]).count();
            disagree * 2 <= neighbors.len()
        })
        .collect();
    Ok(keep
        .iter()
        .enumerate()
        .filter_map(|(ix, &kept)| kept.then_some(ix))
        .collect())
}

/// SMOTE to the target ratio, then ENN cleaning of the union (both classes).
pub fn smoteenn(
    x: &DenseMatrix,
    y: &[Label],
    params: &ResampleParams,
) -> Result<ResampledSet, ResampleError> {
    if x.n_rows() != y.len() {
        return Err(ResampleError::Misaligned(x.n_rows(), y.len()));
    }
    let or_rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == Label::Or).collect();
    let cg_rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == Label::Cg).collect();
    if or_rows.is_empty() || cg_rows.is_empty() {
        return Err(ResampleError::SingleClass);
    }
    let input_counts = (or_rows.len(), cg_rows.len());

    let (minority_rows, minority_label, majority_len) = if or_rows.len() <= cg_rows.len() {
        (&or_rows, Label::Or, cg_rows.len())
    } else {
        (&cg_rows, Label::Cg, or_rows.len())
    };
    let target = (params.target_ratio * majority_len as f64).round() as usize;
    let deficit = target.saturating_sub(minority_rows.len());

    let mut pool = x.clone();
    let mut labels = y.to_vec();
    let mut provenance = vec![Provenance::Original; y.len()];
    let synthetic_count = if deficit > 0 && minority_rows.len() >= 2 {
        let minority = x.select_rows(minority_rows);
        let mut rng = stream_rng(params.seed, "smote", &[]);
        let synthetic = smote(&minority, deficit, params.smote_k, &mut rng)?;
        for i in 0..synthetic.n_rows() {
            pool.push_row(synthetic.row(i));
            labels.push(minority_label);
            provenance.push(Provenance::Synthetic);
        }
        synthetic.n_rows()
    } else {
        0
    };

    let kept = enn(&pool, &labels, params.enn_k)?;
    let removed_count = pool.n_rows() - kept.len();
    let x_out = pool.select_rows(&kept);
    let y_out: Vec<Label> = kept.iter().map(|&i| labels[i]).collect();
    let prov_out: Vec<Provenance> = kept.iter().map(|&i| provenance[i]).collect();
    let output_counts = (
        y_out.iter().filter(|&&l| l == Label::Or).count(),
        y_out.iter().filter(|&&l| l == Label::Cg).count(),
    );
    Ok(ResampledSet {
        x: x_out,
        y: y_out,
        provenance: prov_out,
        removed_count,
        synthetic_count,
        input_counts,
        output_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force check that `point` lies on the segment between two rows of
    /// `minority`, within tolerance, component-wise.
    pub(crate) fn on_some_segment(minority: &DenseMatrix, point: &[f64], tol: f64) -> bool {
        for a in 0..minority.n_rows() {
            'pair: for b in 0..minority.n_rows() {
                if a == b {
                    continue;
                }
                let (ra, rb) = (minority.row(a), minority.row(b));
                // recover u from the first coordinate with a nonzero span
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
                    // zero-length segment: point must coincide with a
                    None => {
                        if ra.iter().zip(point).all(|(x, p)| (x - p).abs() <= tol) {
                            return true;
                        }
                        continue;
                    }
                };
                for j in 0..point.len() {
                    let expect = ra[j] + u * (rb[j] - ra[j]);
                    if (expect - point[j]).abs() > tol {
                        continue 'pair;
                    }
                }
                return true;
            }
        }
        false
    }

    #[test]
    fn smote_on_two_points_stays_on_diagonal() {
        let minority = DenseMatrix::from_rows(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        let mut rng = stream_rng(1, "t", &[]);
        let synth = smote(&minority, 50, 1, &mut rng).unwrap();
        for i in 0..synth.n_rows() {
            let row = synth.row(i);
            assert!((row[0] - row[1]).abs() < 1e-12, "point off the diagonal");
            assert!((0.0..=1.0).contains(&row[0]));
        }
    }

    #[test]
    fn smote_on_identical_points_reproduces_them() {
        let minority = DenseMatrix::from_rows(vec![vec![3.0, -1.0]; 4]);
        let mut rng = stream_rng(2, "t", &[]);
        let synth = smote(&minority, 10, 2, &mut rng).unwrap();
        for i in 0..synth.n_rows() {
            assert_eq!(synth.row(i), &[3.0, -1.0]);
        }
    }

    #[test]
    fn smote_rows_pass_segment_oracle() {
        let minority = DenseMatrix::from_rows(vec![
            vec![0.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
            vec![4.0, -1.0, 2.0],
        ]);
        let mut rng = stream_rng(3, "t", &[]);
        let synth = smote(&minority, 100, 2, &mut rng).unwrap();
        assert_eq!(synth.n_rows(), 100);
        for i in 0..synth.n_rows() {
            assert!(
                on_some_segment(&minority, synth.row(i), 1e-9),
                "row {i} not on any minority segment"
            );
        }
    }

    #[test]
    fn smote_rejects_tiny_minority() {
        let minority = DenseMatrix::from_rows(vec![vec![1.0]]);
        let mut rng = stream_rng(4, "t", &[]);
        assert!(matches!(
            smote(&minority, 5, 1, &mut rng),
            Err(ResampleError::TooFewMinority(1))
        ));
    }

    #[test]
    fn enn_removes_surrounded_outlier() {
        let x = DenseMatrix::from_rows(vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![0.0, 0.1],
            vec![0.05, 0.05], // class B point inside the A cluster
            vec![5.0, 5.0],
            vec![5.1, 5.0],
            vec![5.0, 5.1],
        ]);
        let y = vec![
            Label::Or,
            Label::Or,
            Label::Or,
            Label::Cg,
            Label::Cg,
            Label::Cg,
            Label::Cg,
        ];
        let kept = enn(&x, &y, 3).unwrap();
        assert!(!kept.contains(&3), "outlier must be removed");
        assert_eq!(kept.len(), 6);
    }

    #[test]
    fn enn_keeps_separated_clusters() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..10 {
            rows.push(vec![i as f64 * 0.01, 0.0]);
            y.push(Label::Or);
            rows.push(vec![100.0 + i as f64 * 0.01, 0.0]);
            y.push(Label::Cg);
        }
        let x = DenseMatrix::from_rows(rows);
        let kept = enn(&x, &y, 3).unwrap();
        assert_eq!(kept.len(), 20, "nothing removed from clean clusters");
    }

    #[test]
    fn enn_matches_brute_force_oracle() {
        // independent reimplementation: full distance matrix, sort, majority
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

        for seed in 0..50u64 {
            let mut rng = stream_rng(seed, "enn_oracle", &[]);
            let n = 30;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let y: Vec<Label> = (0..n)
                .map(|_| if rng.gen_bool(0.5) { Label::Cg } else { Label::Or })
                .collect();
            let x = DenseMatrix::from_rows(rows);
            assert_eq!(
                enn(&x, &y, 3).unwrap(),
                brute_force_enn(&x, &y, 3),
                "mismatch at seed {seed}"
            );
        }
    }

    #[test]
    fn enn_rejects_k_too_large() {
        let x = DenseMatrix::from_rows(vec![vec![0.0], vec![1.0]]);
        let y = vec![Label::Or, Label::Cg];
        assert!(matches!(
            enn(&x, &y, 2),
            Err(ResampleError::BadEnnK { k: 2, rows: 2 })
        ));
    }

    #[test]
    fn smoteenn_balanced_input_is_pure_enn() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..8 {
            rows.push(vec![i as f64, 0.0]);
            y.push(Label::Or);
            rows.push(vec![i as f64 + 100.0, 0.0]);
            y.push(Label::Cg);
        }
        let x = DenseMatrix::from_rows(rows);
        let result = smoteenn(&x, &y, &ResampleParams::default()).unwrap();
        assert_eq!(result.synthetic_count, 0, "no minority deficit");
        assert!(result.provenance.iter().all(|&p| p == Provenance::Original));
        let kept = enn(&x, &y, 3).unwrap();
        assert_eq!(result.x.n_rows(), kept.len());
    }

    #[test]
    fn smoteenn_fills_minority_deficit() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..10 {
            rows.push(vec![i as f64 * 0.1, 1.0]);
            y.push(Label::Cg);
        }
        for i in 0..20 {
            rows.push(vec![50.0 + i as f64 * 0.1, -1.0]);
            y.push(Label::Or);
        }
        let x = DenseMatrix::from_rows(rows);
        let params = ResampleParams::default();
        let result = smoteenn(&x, &y, &params).unwrap();
        assert_eq!(result.synthetic_count, 10, "10 synthetic rows before cleaning");
        assert_eq!(result.input_counts, (20, 10));
        // classes are far apart: ENN removes nothing, output balanced
        assert_eq!(result.output_counts, (20, 20));
        let synthetic: Vec<usize> = result
            .provenance
            .iter()
            .enumerate()
            .filter_map(|(ix, &p)| (p == Provenance::Synthetic).then_some(ix))
            .collect();
        assert_eq!(synthetic.len(), 10);
        let minority = x.select_rows(&(0..10).collect::<Vec<_>>());
        for &s in &synthetic {
            assert!(on_some_segment(&minority, result.x.row(s), 1e-9));
            assert_eq!(result.y[s], Label::Cg);
        }
    }

    #[test]
    fn smoteenn_never_worsens_imbalance() {
        for seed in 0..5u64 {
            let mut rng = stream_rng(seed, "imb", &[]);
            let mut rows = Vec::new();
            let mut y = Vec::new();
            for _ in 0..12 {
                rows.push(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
                y.push(Label::Cg);
            }
            for _ in 0..30 {
                rows.push(vec![rng.gen_range(1.5..3.5), rng.gen_range(-1.0..1.0)]);
                y.push(Label::Or);
            }
            let x = DenseMatrix::from_rows(rows);
            let params = ResampleParams {
                seed,
                ..ResampleParams::default()
            };
            let r = smoteenn(&x, &y, &params).unwrap();
            let (or_out, cg_out) = r.output_counts;
            let imbalance_in = 30.0 / 12.0;
            let imbalance_out =
                or_out.max(cg_out) as f64 / or_out.min(cg_out).max(1) as f64;
            assert!(
                imbalance_out <= imbalance_in + 1e-9,
                "imbalance grew: {imbalance_out} vs {imbalance_in}"
            );
        }
    }

    #[test]
    fn smoteenn_deterministic() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..15 {
            rows.push(vec![(i % 5) as f64, (i / 5) as f64]);
            y.push(if i < 6 { Label::Cg } else { Label::Or });
        }
        let x = DenseMatrix::from_rows(rows);
        let params = ResampleParams {
            seed: 9,
            ..ResampleParams::default()
        };
        let a = smoteenn(&x, &y, &params).unwrap();
        let b = smoteenn(&x, &y, &params).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
    }
}
