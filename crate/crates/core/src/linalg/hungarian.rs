use super::{DenseMatrix, LinalgError};

/// Minimum-cost assignment on a square cost matrix.
///
/// Shortest-augmenting-path formulation with row/column potentials, O(n³).
/// Returns the assignment as `(row, col)` pairs sorted by row.
pub fn hungarian(cost: &DenseMatrix) -> Result<Vec<(usize, usize)>, LinalgError> {
    let n = cost.rows();
    if cost.rows() != cost.cols() {
        return Err(LinalgError::NonSquare { rows: cost.rows(), cols: cost.cols() });
    }
    cost.check_finite()?;
    if n == 0 {
        return Ok(Vec::new());
    }

    // Potentials and matching use 1-based columns; index 0 is the virtual
    // start column of each augmenting search.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut match_col = vec![usize::MAX; n + 1]; // match_col[col] = row
    for row in 0..n {
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut prev_col = vec![0usize; n + 1];
        let mut used = vec![false; n + 1];
        let mut j0 = 0usize;
        match_col[0] = row;
        loop {
            used[j0] = true;
            let i0 = match_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0, j - 1) - u[i0 + 1] - v[j];
                if cur < min_to[j] {
                    min_to[j] = cur;
                    prev_col[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[match_col[j] + 1] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if match_col[j0] == usize::MAX {
                break;
            }
        }
        // Augment along the found path.
        while j0 != 0 {
            let j1 = prev_col[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
        }
    }

    let mut pairs: Vec<(usize, usize)> =
        (1..=n).map(|j| (match_col[j], j - 1)).collect();
    pairs.sort_unstable();
    Ok(pairs)
}
