//! Compressed sparse row matrices with 64-bit values.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from `(row, col, value)` triplets. Duplicates are summed in
    /// input order, and columns are sorted within each row.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for r in 0..nrows {
            let (start, end) = (counts[r], counts[r + 1]);
            order.clear();
            order.extend(start..end);
            // stable: equal columns keep input order so summation is reproducible
            order.sort_by_key(|&k| cols[k]);
            let mut last: Option<usize> = None;
            for &k in &order {
                if last == Some(cols[k]) {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    col_idx.push(cols[k]);
                    values.push(vals[k]);
                    last = Some(cols[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Rebuilds from raw CSR arrays, checking structural consistency.
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let ok = row_ptr.len() == nrows + 1
            && row_ptr.first() == Some(&0)
            && row_ptr.last() == Some(&col_idx.len())
            && col_idx.len() == values.len()
            && row_ptr.windows(2).all(|w| w[0] <= w[1])
            && col_idx.iter().all(|&c| c < ncols);
        if !ok {
            return Err(Error::Invalid("inconsistent CSR arrays".into()));
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates the `(col, value)` entries of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Entry lookup; zero when not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// `Y = self · X` where `X` is a row-major `ncols × dim` block.
    pub fn mul_dense(&self, x: &[f64], dim: usize) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols * dim);
        let mut y = vec![0.0; self.nrows * dim];
        for r in 0..self.nrows {
            let out = &mut y[r * dim..(r + 1) * dim];
            for (c, v) in self.row(r) {
                let src = &x[c * dim..(c + 1) * dim];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        y
    }

    /// `Y = selfᵀ · X` where `X` is a row-major `nrows × dim` block.
    pub fn mul_dense_transpose(&self, x: &[f64], dim: usize) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows * dim);
        let mut y = vec![0.0; self.ncols * dim];
        for r in 0..self.nrows {
            let src = &x[r * dim..(r + 1) * dim];
            for (c, v) in self.row(r) {
                let out = &mut y[c * dim..(c + 1) * dim];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        d
    }

    /// Largest absolute asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Copies the submatrix with row and column `skip` removed into faer's
    /// column-compressed layout.
    pub(crate) fn to_faer_without(&self, skip: usize) -> Result<SparseColMat<usize, f64>> {
        let keep: Vec<usize> = (0..self.nrows).filter(|&i| i != skip).collect();
        self.to_faer_principal(&keep)
    }

    /// Copies the principal submatrix on the sorted index list `keep` into
    /// faer's column-compressed layout.
    pub(crate) fn to_faer_principal(&self, keep: &[usize]) -> Result<SparseColMat<usize, f64>> {
        let mut local = vec![usize::MAX; self.nrows.max(self.ncols)];
        for (k, &i) in keep.iter().enumerate() {
            local[i] = k;
        }
        let mut trips = Vec::with_capacity(self.nnz());
        for &r in keep {
            for (c, v) in self.row(r) {
                if local[c] != usize::MAX {
                    trips.push(Triplet::new(local[r], local[c], v));
                }
            }
        }
        SparseColMat::try_new_from_triplets(keep.len(), keep.len(), &trips)
            .map_err(|e| Error::Numeric(format!("sparse assembly failed: {e:?}")))
    }
}

/// Sparse LU of a principal submatrix, for systems with eliminated
/// (fixed) unknowns.
pub struct PrincipalLu {
    lu: Lu<usize, f64>,
    keep: Vec<usize>,
}

impl std::fmt::Debug for PrincipalLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PrincipalLu").field("size", &self.keep.len()).finish_non_exhaustive()
    }
}

impl PrincipalLu {
    /// Factorizes the submatrix on the sorted index list `keep`.
    pub fn factorize(matrix: &CsrMatrix, keep: Vec<usize>) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::Invalid("no free unknowns to solve for".into()));
        }
        let lu = matrix
            .to_faer_principal(&keep)?
            .sp_lu()
            .map_err(|e| Error::Numeric(format!("constrained system is singular ({e:?})")))?;
        Ok(Self { lu, keep })
    }

    pub fn keep(&self) -> &[usize] {
        &self.keep
    }

    /// Solves for a row-major `keep.len() × dim` right-hand side.
    pub fn solve(&self, rhs: &[f64], dim: usize) -> Vec<f64> {
        let m = self.keep.len();
        assert_eq!(rhs.len(), m * dim);
        let mut x = Mat::<f64>::from_fn(m, dim, |i, k| rhs[i * dim + k]);
        self.lu.solve_in_place(x.as_mut());
        let mut out = vec![0.0; m * dim];
        for i in 0..m {
            for k in 0..dim {
                out[i * dim + k] = x[(i, k)];
            }
        }
        out
    }
}
