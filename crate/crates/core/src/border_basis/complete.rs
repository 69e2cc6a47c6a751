//! Degree-by-degree construction of a border basis of the closure `V`.
//!
//! Degree `d` starts from the candidates `x_i * B_{d-1}`. Rows spanning
//! `V ∩ R_d` are reduced by the rules found so far (candidates count as basis
//! members during that reduction), which leaves a matrix whose nonzero part
//! lives on the candidate columns. Gaussian elimination with complete
//! pivoting on that block picks, at every step, the entry of largest absolute
//! value as the next leading monomial. Each pivot becomes a rule; the
//! remaining candidates join `B`.

use log::{debug, warn};
use nalgebra::DMatrix;

use super::span::IdealSpan;
use super::{BorderBasisError, NormalForm, RewriteRule, RewritingFamily};
use crate::poly::{Monomial, MonomialBasis, Polynomial, PRUNE_RELATIVE};

/// Tolerances for [`complete_in_degree`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompletionOptions {
    /// Relative pivot threshold for the elimination step.
    pub eps_pivot: f64,
    /// Relative singular-value threshold for rank decisions in the closure.
    pub rank_tol: f64,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        CompletionOptions {
            eps_pivot: 1e-9,
            rank_tol: 1e-9,
        }
    }
}

/// Builds a rewriting family `F` and basis `B` such that `F` is a border
/// basis for `B` in degree `<= t` of the ideal generated by `generators`,
/// truncated to degree `t`.
pub fn complete_in_degree(
    generators: &[Polynomial],
    t: u32,
    opts: CompletionOptions,
) -> Result<(RewritingFamily, MonomialBasis), BorderBasisError> {
    let span = IdealSpan::new(generators, t, opts.rank_tol)?;
    complete_from_span(&span, opts)
}

pub(crate) fn complete_from_span(
    span: &IdealSpan,
    opts: CompletionOptions,
) -> Result<(RewritingFamily, MonomialBasis), BorderBasisError> {
    let n = span.n_vars();
    let t = span.max_degree();
    let dims = span.dims();
    if dims[0] > 0 {
        return Err(BorderBasisError::UnitIdeal);
    }
    let mut family = RewritingFamily::new(MonomialBasis::new(n, [Monomial::one(n)]));
    for d in 1..=t {
        let prev: Vec<Monomial> = family
            .basis()
            .iter()
            .filter(|m| m.degree() == d - 1)
            .cloned()
            .collect();
        let mut cand: Vec<Monomial> = prev
            .iter()
            .flat_map(|m| (0..n).map(move |i| m.mul_var(i)))
            .collect();
        cand.sort();
        cand.dedup();
        let n_degree = Monomial::of_degree(n, d).len();
        let n_outside = n_degree - cand.len();
        let new_dim = dims[d as usize] as i64 - dims[d as usize - 1] as i64 - n_outside as i64;
        if new_dim < 0 || new_dim as usize > cand.len() {
            return Err(BorderBasisError::Numerical {
                degree: d,
                detail: format!(
                    "expected {new_dim} new rules among {} candidates",
                    cand.len()
                ),
            });
        }
        let r_d = new_dim as usize;

        // Candidates act as basis members while reducing the rows of V ∩ R_d.
        let mut scratch_basis = family.basis().clone();
        for c in &cand {
            scratch_basis.insert(c.clone());
        }
        let scratch = RewritingFamily::from_rules(scratch_basis.clone(), family.rules().cloned())?;
        let mut nf = NormalForm::new(&scratch);

        let rows = span.basis_up_to(d);
        let cols: Vec<Monomial> = scratch_basis.iter().cloned().collect();
        let col_of = scratch_basis.index_map();
        let cand_cols: Vec<usize> = cand.iter().map(|m| col_of[m]).collect();
        let mut mat = DMatrix::zeros(rows.nrows(), cols.len());
        for (r, row) in rows.row_iter().enumerate() {
            let p = span.row_to_polynomial(row.clone_owned().as_slice());
            let reduced = nf.reduce(&p)?;
            for (m, c) in reduced.terms() {
                mat[(r, col_of[m])] = c;
            }
        }

        let pivots = eliminate(&mut mat, &cand_cols, r_d, opts.eps_pivot, d);
        let mut rules = Vec::with_capacity(pivots.len());
        let mut pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
        pivot_cols.sort_unstable();
        for &(row, col) in &pivots {
            let mut tail = Polynomial::from_terms(
                n,
                (0..cols.len())
                    .filter(|&j| j != col && mat[(row, j)] != 0.0)
                    .map(|j| (cols[j].clone(), -mat[(row, j)])),
            );
            tail.prune(PRUNE_RELATIVE);
            debug_assert!(tail.support().all(|m| !pivot_cols.contains(&col_of[m])));
            rules.push(RewriteRule::new(cols[col].clone(), tail));
        }
        let chosen: Vec<&Monomial> = rules.iter().map(|r| &r.leading).collect();
        let mut basis = family.basis().clone();
        for c in &cand {
            if !chosen.contains(&c) {
                basis.insert(c.clone());
            }
        }
        debug!(
            "degree {d}: {} candidates, {} rules, |B| = {}",
            cand.len(),
            rules.len(),
            basis.len()
        );
        let old_rules: Vec<RewriteRule> = family.rules().cloned().collect();
        family = RewritingFamily::from_rules(basis, old_rules.into_iter().chain(rules))?;
        // Monomials of degree d outside B+ never need rules; border monomials do.
        debug_assert!(family.is_complete_in_degree(d));
    }
    let basis = family.basis().clone();
    Ok((family, basis))
}

/// Reduced row echelon form on the candidate columns with complete pivoting
/// (largest absolute value first, ties to the larger monomial). Exactly
/// `count` pivots are taken. Returns `(row, column)` for each pivot, with the
/// pivot entry normalized to 1 and eliminated from every other row.
fn eliminate(
    mat: &mut DMatrix<f64>,
    cand_cols: &[usize],
    count: usize,
    eps_pivot: f64,
    degree: u32,
) -> Vec<(usize, usize)> {
    let scale = cand_cols
        .iter()
        .flat_map(|&j| mat.column(j).iter().map(|v| v.abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    let mut used_rows = vec![false; mat.nrows()];
    let mut used_cols = vec![false; cand_cols.len()];
    let mut pivots = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best: Option<(usize, usize, f64)> = None;
        for r in (0..mat.nrows()).filter(|&r| !used_rows[r]) {
            for (k, &j) in cand_cols.iter().enumerate() {
                if used_cols[k] {
                    continue;
                }
                let v = mat[(r, j)].abs();
                // columns are ascending, so a later column wins ties
                if best.is_none_or(|(_, _, b)| v >= b) {
                    best = Some((r, k, v));
                }
            }
        }
        let Some((r, k, v)) = best else { break };
        if v <= eps_pivot * scale {
            warn!("degree {degree}: pivot {v:e} below threshold, relative to {scale:e}");
        }
        used_rows[r] = true;
        used_cols[k] = true;
        let j = cand_cols[k];
        let p = mat[(r, j)];
        let pivot_row = mat.row(r) / p;
        mat.set_row(r, &pivot_row);
        for i in 0..mat.nrows() {
            if i != r {
                let f = mat[(i, j)];
                if f != 0.0 {
                    let new_row = mat.row(i) - &pivot_row * f;
                    mat.set_row(i, &new_row);
                }
            }
        }
        pivots.push((r, j));
    }
    pivots
}
