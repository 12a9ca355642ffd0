use super::{DenseMatrix, LinalgError};
use nalgebra::DMatrix;

/// Singular values below `DEFAULT_RANK_TOL` times the largest one are treated
/// as zero when deciding numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

fn svd_of(m: &DenseMatrix) -> nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn> {
    m.to_na().svd(true, true)
}

/// Singular values of `m`, sorted in descending order.
pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>, LinalgError> {
    m.check_finite()?;
    let svd = svd_of(m);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(sv)
}

/// Moore–Penrose pseudoinverse via SVD.
///
/// Singular values below `rank_tol` times the largest are zeroed out, so the
/// result is the pseudoinverse of the closest matrix of that numerical rank.
pub fn pinv(m: &DenseMatrix, rank_tol: f64) -> Result<DenseMatrix, LinalgError> {
    assert!(rank_tol > 0.0, "rank_tol must be positive");
    m.check_finite()?;
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(DenseMatrix::zeros(m.cols(), m.rows()));
    }
    let svd = svd_of(m);
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let cut = rank_tol * smax;

    // A† = V Σ† Uᵀ, built as Σ†-scaled rows of Uᵀ folded through Vᵀ.
    let k = svd.singular_values.len();
    let mut out = DMatrix::zeros(m.cols(), m.rows());
    for i in 0..k {
        let s = svd.singular_values[i];
        if s <= cut || s == 0.0 {
            continue;
        }
        let inv = 1.0 / s;
        for r in 0..m.cols() {
            let vri = v_t[(i, r)];
            if vri == 0.0 {
                continue;
            }
            for c in 0..m.rows() {
                out[(r, c)] += vri * inv * u[(c, i)];
            }
        }
    }
    Ok(DenseMatrix::from_na(&out))
}

/// Orthonormal basis of the null space `{x : m·x = 0}`, returned as the
/// columns of the result. The column count equals `cols − numerical rank`.
pub fn null_space_basis(m: &DenseMatrix, rank_tol: f64) -> Result<DenseMatrix, LinalgError> {
    m.check_finite()?;
    let cols = m.cols();
    if cols == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    if m.rows() == 0 {
        return Ok(DenseMatrix::identity(cols));
    }
    // nalgebra's SVD is thin; pad with zero rows so that V comes out square
    // and carries the full right-singular basis.
    let padded = if m.rows() < cols {
        let mut p = DenseMatrix::zeros(cols, cols);
        for r in 0..m.rows() {
            for c in 0..cols {
                p.set(r, c, m.get(r, c));
            }
        }
        p
    } else {
        m.clone()
    };
    let svd = svd_of(&padded);
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let cut = rank_tol * smax;

    let mut null_rows: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= cut)
        .collect();
    null_rows.sort();
    let mut basis = DenseMatrix::zeros(cols, null_rows.len());
    for (j, &i) in null_rows.iter().enumerate() {
        for r in 0..cols {
            basis.set(r, j, v_t[(i, r)]);
        }
    }
    Ok(basis)
}
