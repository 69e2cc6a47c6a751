//! Degree-bounded closure of an ideal: the smallest subspace `V` of the
//! polynomials of degree `<= T` containing the generators and closed under
//! multiplication by each variable whenever the product stays in degree `<= T`.

use std::collections::HashMap;

use nalgebra::DMatrix;

use super::BorderBasisError;
use crate::linalg::{null_space, row_space};
use crate::poly::{Monomial, Polynomial};

#[derive(Clone, Debug)]
pub struct IdealSpan {
    n_vars: usize,
    max_degree: u32,
    monomials: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
    prefix: Vec<usize>,
    rows: DMatrix<f64>,
    rank_tol: f64,
}

impl IdealSpan {
    /// Computes the closure. `rank_tol` is the relative singular-value
    /// threshold used for every rank decision.
    pub fn new(
        generators: &[Polynomial],
        max_degree: u32,
        rank_tol: f64,
    ) -> Result<Self, BorderBasisError> {
        let first = generators.first().ok_or(BorderBasisError::NoGenerators)?;
        let n_vars = first.n_vars();
        let monomials = Monomial::up_to_degree(n_vars, max_degree);
        let index: HashMap<Monomial, usize> = monomials
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, m)| (m, i))
            .collect();
        let prefix = (0..=max_degree)
            .map(|d| monomials.iter().filter(|m| m.degree() <= d).count())
            .collect();
        let nonzero: Vec<&Polynomial> = generators.iter().filter(|g| !g.is_zero()).collect();
        for g in &nonzero {
            let d = g.degree().unwrap_or(0);
            if d > max_degree {
                return Err(BorderBasisError::DegreeTooLow {
                    bound: max_degree,
                    degree: d,
                });
            }
        }
        let cols = monomials.len();
        let mut gen = DMatrix::zeros(nonzero.len(), cols);
        for (r, g) in nonzero.iter().enumerate() {
            let s = g.max_abs_coeff();
            for (m, c) in g.terms() {
                gen[(r, index[m])] = c / s;
            }
        }
        let mut span = IdealSpan {
            n_vars,
            max_degree,
            monomials,
            index,
            prefix,
            rows: row_space(&gen, rank_tol),
            rank_tol,
        };
        span.close();
        Ok(span)
    }

    fn close(&mut self) {
        if self.max_degree == 0 {
            return;
        }
        loop {
            let low = self.basis_up_to(self.max_degree - 1);
            let r = self.rows.nrows();
            let cols = self.monomials.len();
            let mut stacked = DMatrix::zeros(r + low.nrows() * self.n_vars, cols);
            stacked.view_mut((0, 0), (r, cols)).copy_from(&self.rows);
            let mut k = r;
            for row in low.row_iter() {
                for i in 0..self.n_vars {
                    for (j, &c) in row.iter().enumerate() {
                        if c != 0.0 {
                            let m = self.monomials[j].mul_var(i);
                            stacked[(k, self.index[&m])] = c;
                        }
                    }
                    k += 1;
                }
            }
            let next = row_space(&stacked, self.rank_tol);
            let grew = next.nrows() > r;
            self.rows = next;
            if !grew {
                break;
            }
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    /// Monomials indexing the columns, ascending.
    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn column(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn dim(&self) -> usize {
        self.rows.nrows()
    }

    /// Number of columns for monomials of degree `<= d`.
    pub fn prefix_len(&self, d: u32) -> usize {
        self.prefix[d.min(self.max_degree) as usize]
    }

    /// Orthonormal rows spanning `V ∩ R_d`, over all columns.
    pub fn basis_up_to(&self, d: u32) -> DMatrix<f64> {
        if d >= self.max_degree {
            return self.rows.clone();
        }
        let k = self.prefix_len(d);
        let cols = self.monomials.len();
        let high = self.rows.columns(k, cols - k).transpose();
        let w = null_space(&high, self.rank_tol);
        let mut out = w.transpose() * &self.rows;
        // entries in high degree are noise at this point
        out.columns_mut(k, cols - k).fill(0.0);
        out
    }

    /// `dim(V ∩ R_d)`.
    pub fn dim_up_to(&self, d: u32) -> usize {
        self.basis_up_to(d).nrows()
    }

    /// `dim(V ∩ R_d)` for `d = 0..=T`.
    pub fn dims(&self) -> Vec<usize> {
        (0..=self.max_degree).map(|d| self.dim_up_to(d)).collect()
    }

    pub fn row_to_polynomial(&self, row: &[f64]) -> Polynomial {
        Polynomial::from_terms(
            self.n_vars,
            row.iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, &c)| (self.monomials[j].clone(), c)),
        )
    }

    /// Distance from `p / max|p|` to `V`.
    pub fn residual(&self, p: &Polynomial) -> f64 {
        if p.is_zero() {
            return 0.0;
        }
        let s = p.max_abs_coeff();
        let mut v = nalgebra::DVector::zeros(self.monomials.len());
        for (m, c) in p.terms() {
            match self.index.get(m) {
                Some(&j) => v[j] = c / s,
                None => return f64::INFINITY,
            }
        }
        let proj = self.rows.transpose() * (&self.rows * &v);
        (v - proj).norm()
    }
}
