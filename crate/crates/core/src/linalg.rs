//! Dense linear-algebra helpers shared by the border-basis, moment and
//! solver code. Everything here works on small matrices (at most a few
//! hundred rows or columns).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Pads a wide matrix with zero rows. The thin SVD of a wide matrix only
/// returns `rows` right vectors, and is noticeably less accurate on
/// rank-deficient input.
fn padded_square(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if r >= c {
        return a.clone();
    }
    let mut p = DMatrix::zeros(c, c);
    p.view_mut((0, 0), (r, c)).copy_from(a);
    p
}

/// Orthonormal basis (as rows) of the row space of `a`, keeping singular
/// values above `rel_tol * sigma_max`.
pub fn row_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let cols = a.ncols();
    if a.nrows() == 0 || cols == 0 {
        return DMatrix::zeros(0, cols);
    }
    let svd = padded_square(a).svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(0, cols);
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rel_tol * smax)
        .collect();
    DMatrix::from_fn(keep.len(), cols, |r, c| v_t[(keep[r], c)])
}

/// Orthonormal basis (as columns) of the null space `{ v : a v = 0 }`.
///
/// A singular value counts as zero when it is at most `abs_tol`.
pub fn null_space(a: &DMatrix<f64>, abs_tol: f64) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if r == 0 {
        return DMatrix::identity(c, c);
    }
    let svd = padded_square(a).svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let idx: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= abs_tol)
        .collect();
    DMatrix::from_fn(c, idx.len(), |i, j| v_t[(idx[j], i)])
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted ascending.
pub fn sorted_symmetric_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Least-squares solution of `a x = b` and its residual norm.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> (DVector<f64>, f64) {
    if a.ncols() == 0 {
        return (DVector::zeros(0), b.norm());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let x = svd
        .solve(b, rel_tol * smax.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DVector::zeros(a.ncols()));
    let res = (a * &x - b).norm();
    (x, res)
}
