//! Enlarging the ideal of a complete border basis by extra polynomials,
//! working in the finite-dimensional quotient `<B>`.
//!
//! Multiplication by `x_i` on `<B>` is exact once `F` covers all of `∂B`, so
//! the only rank decisions concern the span `W` of the extra polynomials and
//! its images under the multiplication matrices.

use log::debug;
use nalgebra::DMatrix;

use super::{BorderBasisError, CompletionOptions, NormalForm, RewriteRule, RewritingFamily};
use crate::linalg::row_space;
use crate::poly::{Monomial, MonomialBasis, Polynomial, PRUNE_RELATIVE};

fn coordinates(
    p: &Polynomial,
    index: &std::collections::HashMap<Monomial, usize>,
    size: usize,
) -> Vec<f64> {
    let mut v = vec![0.0; size];
    for (m, c) in p.terms() {
        v[index[m]] = c;
    }
    v
}

/// Border basis of `(F) + (extra)`, with a basis `B' ⊂ B`.
///
/// Requires `F` to cover every border monomial of its basis. Leading
/// monomials are chosen among the maximal elements of the current basis, by
/// largest absolute coefficient, so that `B'` stays closed under division.
pub fn extend_in_quotient(
    family: &RewritingFamily,
    extra: &[Polynomial],
    opts: CompletionOptions,
) -> Result<(RewritingFamily, MonomialBasis), BorderBasisError> {
    let basis = family.basis();
    let n = basis.n_vars();
    if let Some(m) = basis.border().iter().find(|m| family.rule(m).is_none()) {
        return Err(BorderBasisError::Incomplete(m.clone()));
    }
    let cols = basis.to_vec();
    let size = cols.len();
    let index = basis.index_map();
    let mut nf = NormalForm::new(family);

    let mut mult = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = DMatrix::zeros(size, size);
        for (j, b) in cols.iter().enumerate() {
            for (m, c) in nf.monomial(&b.mul_var(i))?.terms() {
                x[(index[m], j)] = c;
            }
        }
        mult.push(x);
    }

    let mut start = DMatrix::zeros(extra.len(), size);
    for (r, p) in extra.iter().enumerate() {
        let reduced = nf.reduce(p)?;
        let s = reduced.max_abs_coeff().max(f64::MIN_POSITIVE);
        for (j, c) in coordinates(&reduced, &index, size).into_iter().enumerate() {
            start[(r, j)] = c / s;
        }
    }
    let mut w = row_space(&start, opts.rank_tol);
    loop {
        let r = w.nrows();
        let mut stacked = DMatrix::zeros(r * (n + 1), size);
        stacked.rows_mut(0, r).copy_from(&w);
        // images are scaled by the size of x_i so that large coordinates
        // do not drown the rank decision
        for (i, x) in mult.iter().enumerate() {
            let scale = x.norm().max(1.0);
            stacked
                .rows_mut(r * (i + 1), r)
                .copy_from(&(&w * x.transpose() / scale));
        }
        let next = row_space(&stacked, opts.rank_tol);
        let grew = next.nrows() > r;
        w = next;
        if !grew {
            break;
        }
    }
    let r = w.nrows();
    if r == size {
        return Err(BorderBasisError::UnitIdeal);
    }
    debug!(
        "quotient of size {size}: extra polynomials span an ideal of codimension {}",
        size - r
    );

    // Reduced row echelon form of W with order-ideal-preserving pivots.
    let mut mat = w;
    let mut in_basis = vec![true; size];
    let mut free_rows: Vec<usize> = (0..r).collect();
    let mut pivots: Vec<(usize, usize)> = Vec::with_capacity(r);
    for _ in 0..r {
        let maximal: Vec<usize> = (0..size)
            .filter(|&j| {
                in_basis[j]
                    && (0..n).all(|i| index.get(&cols[j].mul_var(i)).is_none_or(|&k| !in_basis[k]))
            })
            .collect();
        let mut best: Option<(usize, usize, f64)> = None;
        for &row in &free_rows {
            for &col in &maximal {
                let v = mat[(row, col)].abs();
                if best.is_none_or(|(_, bc, bv)| v > bv || (v == bv && col > bc)) {
                    best = Some((row, col, v));
                }
            }
        }
        let (row, col, v) = best.expect("a free row and a maximal monomial remain");
        if v < opts.eps_pivot {
            return Err(BorderBasisError::Numerical {
                degree: cols[col].degree(),
                detail: format!("largest admissible pivot {v:e} below threshold"),
            });
        }
        let p = mat[(row, col)];
        let pivot_row = mat.row(row) / p;
        mat.set_row(row, &pivot_row);
        for k in 0..r {
            if k != row {
                let c = mat[(k, col)];
                if c != 0.0 {
                    let updated = mat.row(k) - &pivot_row * c;
                    mat.set_row(k, &updated);
                    mat[(k, col)] = 0.0;
                }
            }
        }
        in_basis[col] = false;
        free_rows.retain(|&k| k != row);
        pivots.push((row, col));
    }

    let new_basis = MonomialBasis::new(
        n,
        cols.iter()
            .zip(&in_basis)
            .filter(|(_, &b)| b)
            .map(|(m, _)| m.clone()),
    );
    let mut rules = Vec::new();
    for m in new_basis.border().iter() {
        let mut v = coordinates(&nf.monomial(m)?, &index, size);
        for &(row, col) in &pivots {
            let c = v[col];
            if c != 0.0 {
                for (j, vj) in v.iter_mut().enumerate() {
                    *vj -= c * mat[(row, j)];
                }
            }
        }
        let mut tail = Polynomial::from_terms(
            n,
            (0..size)
                .filter(|&j| in_basis[j] && v[j] != 0.0)
                .map(|j| (cols[j].clone(), v[j])),
        );
        tail.prune(PRUNE_RELATIVE);
        rules.push(RewriteRule::new(m.clone(), tail));
    }
    let family = RewritingFamily::from_rules(new_basis.clone(), rules)?;
    Ok((family, new_basis))
}
