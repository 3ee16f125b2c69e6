//! Sparse row-major feature matrix and the small dense matrix used once the
//! column count has been cut down by feature selection.

use serde::{Deserialize, Serialize};

/// Compressed sparse row matrix. Within each row the column indices are
/// strictly increasing and no explicit zeros are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    /// Assemble from per-row `(col, value)` lists. Entries in a row must have
    /// unique columns; zeros are dropped, columns are sorted.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(u32, f64)>>) -> FeatureMatrix {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            for (col, value) in row {
                debug_assert!((col as usize) < n_cols, "column {col} out of range");
                debug_assert!(
                    cols.len() == row_ptr[row_ptr.len() - 1] || *cols.last().unwrap() != col,
                    "duplicate column {col}"
                );
                if value != 0.0 {
                    cols.push(col);
                    values.push(value);
                }
            }
            row_ptr.push(cols.len());
        }
        FeatureMatrix {
            n_rows,
            n_cols,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of one row.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[span.clone()], &self.values[span])
    }

    /// New matrix containing the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let rows = indices
            .iter()
            .map(|&i| {
                let (cols, values) = self.row(i);
                cols.iter().copied().zip(values.iter().copied()).collect()
            })
            .collect();
        FeatureMatrix::from_rows(self.n_cols, rows)
    }

    /// Restrict to the columns marked true, remapping them to a contiguous
    /// 0-based range in ascending original order.
    pub fn select_columns(&self, keep: &[bool]) -> FeatureMatrix {
        assert_eq!(keep.len(), self.n_cols, "mask dimension mismatch");
        let mut remap = vec![u32::MAX; self.n_cols];
        let mut next = 0u32;
        for (ix, &k) in keep.iter().enumerate() {
            if k {
                remap[ix] = next;
                next += 1;
            }
        }
        let rows = (0..self.n_rows)
            .map(|i| {
                let (cols, values) = self.row(i);
                cols.iter()
                    .zip(values)
                    .filter(|(c, _)| remap[**c as usize] != u32::MAX)
                    .map(|(c, v)| (remap[*c as usize], *v))
                    .collect()
            })
            .collect();
        FeatureMatrix::from_rows(next as usize, rows)
    }

    /// Densify. Intended for use after column selection.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut dense = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, values) = self.row(i);
            for (c, v) in cols.iter().zip(values) {
                dense.set(i, *c as usize, *v);
            }
        }
        dense
    }

    /// Squared Euclidean distance between two rows over the columns marked
    /// true in `mask` (pass `None` for all columns).
    pub fn masked_distance_sq(&self, a: usize, b: usize, mask: Option<&[bool]>) -> f64 {
        let (ac, av) = self.row(a);
        let (bc, bv) = self.row(b);
        let keep = |col: u32| mask.is_none_or(|m| m[col as usize]);
        let mut i = 0;
        let mut j = 0;
        let mut acc = 0.0;
        while i < ac.len() && j < bc.len() {
            let (ca, cb) = (ac[i], bc[j]);
            if ca == cb {
                if keep(ca) {
                    let d = av[i] - bv[j];
                    acc += d * d;
                }
                i += 1;
                j += 1;
            } else if ca < cb {
                if keep(ca) {
                    acc += av[i] * av[i];
                }
                i += 1;
            } else {
                if keep(cb) {
                    acc += bv[j] * bv[j];
                }
                j += 1;
            }
        }
        for k in i..ac.len() {
            if keep(ac[k]) {
                acc += av[k] * av[k];
            }
        }
        for k in j..bc.len() {
            if keep(bc[k]) {
                acc += bv[k] * bv[k];
            }
        }
        acc
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> DenseMatrix {
        DenseMatrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> DenseMatrix {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            assert_eq!(row.len(), n_cols, "ragged rows");
            data.extend_from_slice(&row);
        }
        DenseMatrix {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn select_rows(&self, indices: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        DenseMatrix {
            n_rows: indices.len(),
            n_cols: self.n_cols,
            data,
        }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.n_cols);
        self.data.extend_from_slice(row);
        self.n_rows += 1;
    }

    pub fn distance_sq(&self, a: usize, b: usize) -> f64 {
        let (ra, rb) = (self.row(a), self.row(b));
        ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum()
    }
}
