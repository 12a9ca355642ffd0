/// Sparse least-squares system `min ‖A x − b‖₂` in coordinate format.
///
/// Assembly is append-heavy, so entries are collected as `(row, col, value)`
/// triplets; [`SparseSystem::to_csr`] converts to compressed-row storage for
/// the multiply-heavy solve. Duplicate `(row, col)` pairs are not allowed.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(u32, u32, f64)>,
    rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, entries: Vec::new(), rhs: vec![0.0; n_rows] }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Appends a coefficient. Zero values are skipped.
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols, "entry out of range");
        debug_assert!(value.is_finite());
        if value != 0.0 {
            self.entries.push((row as u32, col as u32, value));
        }
    }

    pub fn set_rhs(&mut self, row: usize, value: f64) {
        debug_assert!(value.is_finite());
        self.rhs[row] = value;
    }

    /// Converts to compressed-row storage, asserting the no-duplicate invariant.
    pub fn to_csr(&self) -> CsrMatrix {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_unstable_by_key(|&i| (self.entries[i].0, self.entries[i].1));
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        let mut prev: Option<(u32, u32)> = None;
        for &i in &order {
            let (r, c, v) = self.entries[i];
            assert!(prev != Some((r, c)), "duplicate entry at ({r}, {c})");
            prev = Some((r, c));
            row_ptr[r as usize + 1] += 1;
            col_idx.push(c as usize);
            values.push(v);
        }
        for r in 0..self.n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { n_rows: self.n_rows, n_cols: self.n_cols, row_ptr, col_idx, values }
    }

    /// Residual vector `b − A x` evaluated without the CSR conversion.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut r = self.rhs.clone();
        for &(row, col, v) in &self.entries {
            r[row as usize] -= v * x[col as usize];
        }
        r
    }
}

/// Compressed sparse row matrix used by the LSMR solver.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `y += A x`
    pub fn add_mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[i] * x[self.col_idx[i]];
            }
            y[r] += acc;
        }
    }

    /// `x += Aᵀ y`
    pub fn add_tr_mul_vec(&self, y: &[f64], x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let yr = y[r];
            if yr == 0.0 {
                continue;
            }
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                x[self.col_idx[i]] += self.values[i] * yr;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_round_trip_matvec() {
        let mut sys = SparseSystem::new(3, 2);
        sys.push(0, 0, 2.0);
        sys.push(0, 1, -1.0);
        sys.push(2, 1, 4.0);
        let csr = sys.to_csr();
        let mut y = vec![0.0; 3];
        csr.add_mul_vec(&[1.0, 3.0], &mut y);
        assert_eq!(y, vec![-1.0, 0.0, 12.0]);
        let mut x = vec![0.0; 2];
        csr.add_tr_mul_vec(&[1.0, 1.0, 1.0], &mut x);
        assert_eq!(x, vec![2.0, 3.0]);
    }

    #[test]
    #[should_panic(expected = "duplicate entry")]
    fn duplicate_entries_rejected() {
        let mut sys = SparseSystem::new(2, 2);
        sys.push(0, 0, 1.0);
        sys.push(0, 0, 2.0);
        sys.to_csr();
    }
}
