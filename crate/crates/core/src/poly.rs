//! Sparse multivariate polynomials with `f64` coefficients, monomials and
//! monomial sets connected to 1.
//!
//! Monomials are ordered graded-lexicographically: total degree first, then
//! lexicographically on the exponent vector with `x_1` most significant. So
//! for two variables `1 < y < x < y^2 < x*y < x^2 < ...`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Coefficients smaller than this fraction of the largest coefficient are
/// dropped after every arithmetic operation.
pub const PRUNE_RELATIVE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("point has {got} coordinates, polynomial has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("variable count mismatch: {0} vs {1}")]
    VariableCountMismatch(usize, usize),
}

/// A monomial `x^alpha`, stored as its dense exponent vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(n_vars: usize) -> Self {
        Monomial(vec![0; n_vars])
    }

    /// The monomial `x_i`.
    pub fn var(n_vars: usize, i: usize) -> Self {
        let mut e = vec![0; n_vars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn n_vars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Coordinate-wise `self <= other`.
    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `x_i * self`.
    pub fn mul_var(&self, i: usize) -> Monomial {
        let mut e = self.0.clone();
        e[i] += 1;
        Monomial(e)
    }

    /// `self / x_i`, if `x_i` divides `self`.
    pub fn div_var(&self, i: usize) -> Option<Monomial> {
        if self.0[i] == 0 {
            return None;
        }
        let mut e = self.0.clone();
        e[i] -= 1;
        Some(Monomial(e))
    }

    pub fn evaluate(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }

    /// All monomials in `n_vars` variables of total degree exactly `d`, ascending.
    pub fn of_degree(n_vars: usize, d: u32) -> Vec<Monomial> {
        fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
            if pos + 1 == cur.len() {
                cur[pos] = left;
                out.push(Monomial(cur.clone()));
                return;
            }
            for e in 0..=left {
                cur[pos] = e;
                rec(pos + 1, left - e, cur, out);
            }
        }
        if n_vars == 0 {
            return if d == 0 {
                vec![Monomial(vec![])]
            } else {
                vec![]
            };
        }
        let mut out = Vec::new();
        rec(0, d, &mut vec![0; n_vars], &mut out);
        out.sort();
        out
    }

    /// All monomials of total degree at most `d`, ascending.
    pub fn up_to_degree(n_vars: usize, d: u32) -> Vec<Monomial> {
        (0..=d)
            .flat_map(|k| Monomial::of_degree(n_vars, k))
            .collect()
    }

    /// Render with the given variable names, e.g. `x^2*y`; `1` for the unit.
    pub fn format_with(&self, vars: &[impl AsRef<str>]) -> String {
        if self.is_one() {
            return "1".to_string();
        }
        let mut parts = Vec::new();
        for (i, &e) in self.0.iter().enumerate() {
            match e {
                0 => {}
                1 => parts.push(vars[i].as_ref().to_string()),
                _ => parts.push(format!("{}^{}", vars[i].as_ref(), e)),
            }
        }
        parts.join("*")
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.format_with(&default_var_names(self.n_vars())))
    }
}

/// `x, y, z` for up to three variables, `x1, x2, ...` otherwise.
pub fn default_var_names(n: usize) -> Vec<String> {
    if n <= 3 {
        ["x", "y", "z"][..n].iter().map(|s| s.to_string()).collect()
    } else {
        (1..=n).map(|i| format!("x{i}")).collect()
    }
}

/// Sparse polynomial: a map from monomials to non-zero coefficients.
#[derive(Clone, PartialEq)]
pub struct Polynomial {
    n_vars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(n_vars: usize) -> Self {
        Polynomial {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, c: f64) -> Self {
        Polynomial::from_terms(n_vars, [(Monomial::one(n_vars), c)])
    }

    pub fn monomial(m: Monomial) -> Self {
        let n = m.n_vars();
        Polynomial::from_terms(n, [(m, 1.0)])
    }

    pub fn var(n_vars: usize, i: usize) -> Self {
        Polynomial::monomial(Monomial::var(n_vars, i))
    }

    /// Builds a polynomial summing duplicate monomials; exact zeros are dropped
    /// but no relative pruning is applied.
    pub fn from_terms(n_vars: usize, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut map = BTreeMap::new();
        for (m, c) in terms {
            debug_assert_eq!(m.n_vars(), n_vars);
            *map.entry(m).or_insert(0.0) += c;
        }
        map.retain(|_, c| *c != 0.0);
        Polynomial { n_vars, terms: map }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_one())
    }

    /// Total degree; `None` stands for the degree of the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().next_back().map(|m| m.degree())
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn support(&self) -> impl DoubleEndedIterator<Item = &Monomial> {
        self.terms.keys()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    /// Largest monomial in graded-lex order.
    pub fn leading_monomial(&self) -> Option<&Monomial> {
        self.terms.keys().next_back()
    }

    /// Drops coefficients below `rel * max|c|`.
    pub fn prune(&mut self, rel: f64) {
        let thresh = rel * self.max_abs_coeff();
        self.terms.retain(|_, c| c.abs() > thresh);
    }

    fn pruned(mut self) -> Self {
        self.prune(PRUNE_RELATIVE);
        self
    }

    pub fn scale(&self, a: f64) -> Polynomial {
        if a == 0.0 {
            return Polynomial::zero(self.n_vars);
        }
        Polynomial {
            n_vars: self.n_vars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * a)).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Polynomial {
        Polynomial {
            n_vars: self.n_vars,
            terms: self.terms.iter().map(|(k, &c)| (k.mul(m), c)).collect(),
        }
    }

    pub fn mul_var(&self, i: usize) -> Polynomial {
        Polynomial {
            n_vars: self.n_vars,
            terms: self.terms.iter().map(|(k, &c)| (k.mul_var(i), c)).collect(),
        }
    }

    /// `self + a * other`, pruned.
    pub fn add_scaled(&self, other: &Polynomial, a: f64) -> Polynomial {
        assert_eq!(self.n_vars, other.n_vars, "variable count mismatch");
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            *terms.entry(m.clone()).or_insert(0.0) += a * c;
        }
        terms.retain(|_, c| *c != 0.0);
        Polynomial {
            n_vars: self.n_vars,
            terms,
        }
        .pruned()
    }

    pub fn partial_derivative(&self, i: usize) -> Polynomial {
        let terms = self.terms.iter().filter_map(|(m, &c)| {
            let e = m.exponents()[i];
            m.div_var(i).map(|d| (d, c * e as f64))
        });
        Polynomial::from_terms(self.n_vars, terms)
    }

    /// `(df/dx_1, ..., df/dx_n)`. A constant input yields the zero vector.
    pub fn gradient(&self) -> Vec<Polynomial> {
        if self.is_constant() {
            log::warn!("gradient of a constant polynomial is identically zero");
        }
        (0..self.n_vars)
            .map(|i| self.partial_derivative(i))
            .collect()
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.n_vars {
            return Err(PolyError::DimensionMismatch {
                expected: self.n_vars,
                got: point.len(),
            });
        }
        Ok(self.terms.iter().map(|(m, c)| c * m.evaluate(point)).sum())
    }

    /// Maximum absolute coefficient difference.
    pub fn max_coeff_diff(&self, other: &Polynomial) -> f64 {
        let keys: BTreeSet<&Monomial> = self.terms.keys().chain(other.terms.keys()).collect();
        keys.into_iter()
            .map(|m| (self.coeff(m) - other.coeff(m)).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}",
            crate::parser::format_polynomial(self, &default_var_names(self.n_vars))
        )
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.add_scaled(rhs, 1.0)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.add_scaled(rhs, -1.0)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.n_vars, rhs.n_vars, "variable count mismatch");
        let mut terms: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &rhs.terms {
                *terms.entry(a.mul(b)).or_insert(0.0) += ca * cb;
            }
        }
        terms.retain(|_, c| *c != 0.0);
        Polynomial {
            n_vars: self.n_vars,
            terms,
        }
        .pruned()
    }
}

impl Mul<f64> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: f64) -> Polynomial {
        self.scale(rhs)
    }
}

/// A finite monomial set, kept in graded-lex order.
#[derive(Clone, PartialEq, Eq)]
pub struct MonomialBasis {
    n_vars: usize,
    monomials: BTreeSet<Monomial>,
}

impl MonomialBasis {
    pub fn new(n_vars: usize, monomials: impl IntoIterator<Item = Monomial>) -> Self {
        MonomialBasis {
            n_vars,
            monomials: monomials.into_iter().collect(),
        }
    }

    /// All monomials of degree at most `d`.
    pub fn up_to_degree(n_vars: usize, d: u32) -> Self {
        MonomialBasis::new(n_vars, Monomial::up_to_degree(n_vars, d))
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn contains(&self, m: &Monomial) -> bool {
        self.monomials.contains(m)
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &Monomial> + Clone {
        self.monomials.iter()
    }

    pub fn to_vec(&self) -> Vec<Monomial> {
        self.monomials.iter().cloned().collect()
    }

    pub fn insert(&mut self, m: Monomial) -> bool {
        self.monomials.insert(m)
    }

    pub fn remove(&mut self, m: &Monomial) -> bool {
        self.monomials.remove(m)
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.monomials.iter().next_back().map(|m| m.degree())
    }

    /// Position of every member in graded-lex order.
    pub fn index_map(&self) -> HashMap<Monomial, usize> {
        self.monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect()
    }

    /// Members of degree at most `d`.
    pub fn truncate(&self, d: u32) -> MonomialBasis {
        MonomialBasis::new(
            self.n_vars,
            self.monomials.iter().filter(|m| m.degree() <= d).cloned(),
        )
    }

    /// True if 1 is a member and every other member is `x_i * m'` with `m'` a member.
    pub fn is_connected_to_one(&self) -> bool {
        if !self.contains(&Monomial::one(self.n_vars)) {
            return false;
        }
        self.monomials.iter().all(|m| {
            m.is_one() || (0..self.n_vars).any(|i| m.div_var(i).is_some_and(|d| self.contains(&d)))
        })
    }

    /// `B+ = B ∪ x_1 B ∪ ... ∪ x_n B`.
    pub fn prolong(&self) -> MonomialBasis {
        let mut out = self.monomials.clone();
        for m in &self.monomials {
            for i in 0..self.n_vars {
                out.insert(m.mul_var(i));
            }
        }
        MonomialBasis {
            n_vars: self.n_vars,
            monomials: out,
        }
    }

    /// `∂B = B+ \ B`.
    pub fn border(&self) -> MonomialBasis {
        let mut out = BTreeSet::new();
        for m in &self.monomials {
            for i in 0..self.n_vars {
                let p = m.mul_var(i);
                if !self.contains(&p) {
                    out.insert(p);
                }
            }
        }
        MonomialBasis {
            n_vars: self.n_vars,
            monomials: out,
        }
    }

    /// `{ a*b : a, b in B }`.
    pub fn products(&self) -> MonomialBasis {
        let mut out = BTreeSet::new();
        for a in &self.monomials {
            for b in self.monomials.range(a.clone()..) {
                out.insert(a.mul(b));
            }
        }
        MonomialBasis {
            n_vars: self.n_vars,
            monomials: out,
        }
    }

    /// The smallest `k` with `m ∈ B^[k]` (`B^[0] = B`, `B^[k] = (B^[k-1])+`).
    ///
    /// Returns `None` only when `1 ∉ B`, where some monomials are unreachable.
    pub fn b_index(&self, m: &Monomial) -> Option<u32> {
        let mut memo = HashMap::new();
        self.b_index_memo(m, &mut memo)
    }

    pub(crate) fn b_index_memo(
        &self,
        m: &Monomial,
        memo: &mut HashMap<Monomial, Option<u32>>,
    ) -> Option<u32> {
        if self.contains(m) {
            return Some(0);
        }
        if let Some(&k) = memo.get(m) {
            return k;
        }
        let mut best: Option<u32> = None;
        for i in 0..self.n_vars {
            if let Some(d) = m.div_var(i) {
                if let Some(k) = self.b_index_memo(&d, memo) {
                    best = Some(best.map_or(k + 1, |b| b.min(k + 1)));
                }
            }
        }
        memo.insert(m.clone(), best);
        best
    }

    pub fn format_with(&self, vars: &[impl AsRef<str>]) -> Vec<String> {
        self.monomials.iter().map(|m| m.format_with(vars)).collect()
    }
}

impl fmt::Debug for MonomialBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.monomials.iter()).finish()
    }
}

impl<'a> IntoIterator for &'a MonomialBasis {
    type Item = &'a Monomial;
    type IntoIter = std::collections::btree_set::Iter<'a, Monomial>;
    fn into_iter(self) -> Self::IntoIter {
        self.monomials.iter()
    }
}
