//! Rewriting families, the normal-form projection onto `<B>`, commutation
//! polynomials and degree-bounded border-basis completion.

mod complete;
mod quotient;
mod span;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::poly::{Monomial, MonomialBasis, Polynomial};

pub use complete::{complete_in_degree, CompletionOptions};
pub use quotient::extend_in_quotient;
pub use span::IdealSpan;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BorderBasisError {
    #[error("rewriting family is not complete: no rule for border monomial {0:?}")]
    Incomplete(Monomial),
    #[error("monomial {0:?} cannot be reached from the basis (1 is not in B)")]
    Unreachable(Monomial),
    #[error("leading monomial {0:?} is not in the border of B")]
    LeadingNotInBorder(Monomial),
    #[error("rule for {leading:?} has tail monomial {monomial:?} outside B")]
    TailOutsideBasis {
        leading: Monomial,
        monomial: Monomial,
    },
    #[error("rule for {0:?} is not graded: tail degree exceeds leading degree")]
    NotGraded(Monomial),
    #[error("duplicate rule for leading monomial {0:?}")]
    DuplicateLeading(Monomial),
    #[error("ideal is the whole ring")]
    UnitIdeal,
    #[error("generators are empty")]
    NoGenerators,
    #[error("degree bound {bound} is below generator degree {degree}")]
    DegreeTooLow { bound: u32, degree: u32 },
    #[error("numerical inconsistency in degree {degree}: {detail}")]
    Numerical { degree: u32, detail: String },
}

/// A rule `leading - tail`, with `leading` in the border of `B` and the tail
/// supported in `B`.
#[derive(Clone, Debug, PartialEq)]
pub struct RewriteRule {
    pub leading: Monomial,
    pub tail: Polynomial,
}

impl RewriteRule {
    pub fn new(leading: Monomial, tail: Polynomial) -> Self {
        RewriteRule { leading, tail }
    }

    /// The rule polynomial `leading - tail`, whose leading coefficient is 1.
    pub fn polynomial(&self) -> Polynomial {
        let n = self.leading.n_vars();
        let mut terms: Vec<(Monomial, f64)> =
            self.tail.terms().map(|(m, c)| (m.clone(), -c)).collect();
        terms.push((self.leading.clone(), 1.0));
        Polynomial::from_terms(n, terms)
    }

    pub fn degree(&self) -> u32 {
        self.leading.degree()
    }
}

/// A set of rewrite rules for a monomial set `B`, at most one per leading monomial.
#[derive(Clone, Debug, PartialEq)]
pub struct RewritingFamily {
    basis: MonomialBasis,
    rules: BTreeMap<Monomial, RewriteRule>,
}

impl RewritingFamily {
    pub fn new(basis: MonomialBasis) -> Self {
        RewritingFamily {
            basis,
            rules: BTreeMap::new(),
        }
    }

    /// Builds a family, validating every rule against `basis`.
    pub fn from_rules(
        basis: MonomialBasis,
        rules: impl IntoIterator<Item = RewriteRule>,
    ) -> Result<Self, BorderBasisError> {
        let mut fam = RewritingFamily::new(basis);
        for r in rules {
            fam.insert(r)?;
        }
        Ok(fam)
    }

    pub fn insert(&mut self, rule: RewriteRule) -> Result<(), BorderBasisError> {
        let lead = &rule.leading;
        if self.basis.contains(lead)
            || !(0..lead.n_vars()).any(|i| lead.div_var(i).is_some_and(|d| self.basis.contains(&d)))
        {
            return Err(BorderBasisError::LeadingNotInBorder(lead.clone()));
        }
        if let Some(m) = rule.tail.support().find(|m| !self.basis.contains(m)) {
            return Err(BorderBasisError::TailOutsideBasis {
                leading: lead.clone(),
                monomial: m.clone(),
            });
        }
        if rule.tail.degree().is_some_and(|d| d > lead.degree()) {
            return Err(BorderBasisError::NotGraded(lead.clone()));
        }
        if self.rules.contains_key(lead) {
            return Err(BorderBasisError::DuplicateLeading(lead.clone()));
        }
        self.rules.insert(lead.clone(), rule);
        Ok(())
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn n_vars(&self) -> usize {
        self.basis.n_vars()
    }

    pub fn rules(&self) -> impl Iterator<Item = &RewriteRule> {
        self.rules.values()
    }

    pub fn rule(&self, leading: &Monomial) -> Option<&RewriteRule> {
        self.rules.get(leading)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rule_polynomials(&self) -> Vec<Polynomial> {
        self.rules.values().map(|r| r.polynomial()).collect()
    }

    /// Largest absolute coefficient over all rule polynomials (at least 1).
    pub fn coefficient_scale(&self) -> f64 {
        self.rules
            .values()
            .map(|r| r.tail.max_abs_coeff())
            .fold(1.0, f64::max)
    }

    /// Every border monomial of degree `<= t` is the leading monomial of a rule.
    pub fn is_complete_in_degree(&self, t: u32) -> bool {
        self.basis
            .border()
            .iter()
            .filter(|m| m.degree() <= t)
            .all(|m| self.rules.contains_key(m))
    }

    /// Every border monomial is the leading monomial of a rule, so `F` is a
    /// candidate border basis of a zero-dimensional ideal.
    pub fn is_complete(&self) -> bool {
        self.basis
            .border()
            .iter()
            .all(|m| self.rules.contains_key(m))
    }

    /// `π_{F,B}(p)`.
    pub fn normal_form(&self, p: &Polynomial) -> Result<Polynomial, BorderBasisError> {
        NormalForm::new(self).reduce(p)
    }

    /// Restricts the family to rules of degree `<= t` and basis members of
    /// degree `<= t`.
    pub fn truncate(&self, t: u32) -> RewritingFamily {
        RewritingFamily {
            basis: self.basis.truncate(t),
            rules: self
                .rules
                .iter()
                .filter(|(m, _)| m.degree() <= t)
                .map(|(m, r)| (m.clone(), r.clone()))
                .collect(),
        }
    }
}

/// Memoized evaluator of `π_{F,B}`.
///
/// Members of `B` are fixed, border monomials are rewritten by their rule,
/// and a monomial `m` of index `k >= 2` is split as `x_i * m'` with `i` the
/// smallest variable index such that `m'` has index `k - 1`; then
/// `π(m) = π(x_i * π(m'))`.
pub struct NormalForm<'a> {
    family: &'a RewritingFamily,
    memo: HashMap<Monomial, Polynomial>,
    index_memo: HashMap<Monomial, Option<u32>>,
}

impl<'a> NormalForm<'a> {
    pub fn new(family: &'a RewritingFamily) -> Self {
        NormalForm {
            family,
            memo: HashMap::new(),
            index_memo: HashMap::new(),
        }
    }

    pub fn reduce(&mut self, p: &Polynomial) -> Result<Polynomial, BorderBasisError> {
        let n = p.n_vars();
        let mut acc: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (m, c) in p.terms() {
            let nf = self.monomial(m)?;
            for (b, a) in nf.terms() {
                *acc.entry(b.clone()).or_insert(0.0) += c * a;
            }
        }
        let mut out = Polynomial::from_terms(n, acc);
        out.prune(crate::poly::PRUNE_RELATIVE * 1e-2);
        Ok(out)
    }

    pub fn monomial(&mut self, m: &Monomial) -> Result<Polynomial, BorderBasisError> {
        let basis = &self.family.basis;
        if basis.contains(m) {
            return Ok(Polynomial::monomial(m.clone()));
        }
        if let Some(r) = self.family.rules.get(m) {
            return Ok(r.tail.clone());
        }
        if let Some(p) = self.memo.get(m) {
            return Ok(p.clone());
        }
        let k = basis
            .b_index_memo(m, &mut self.index_memo)
            .ok_or_else(|| BorderBasisError::Unreachable(m.clone()))?;
        if k <= 1 {
            return Err(BorderBasisError::Incomplete(m.clone()));
        }
        let (i0, m_prime) = (0..m.n_vars())
            .filter_map(|i| m.div_var(i).map(|d| (i, d)))
            .find(|(_, d)| basis.b_index_memo(d, &mut self.index_memo) == Some(k - 1))
            .expect("a predecessor of index k-1 exists");
        let inner = self.monomial(&m_prime)?;
        let shifted = inner.mul_var(i0);
        let result = self.reduce(&shifted)?;
        self.memo.insert(m.clone(), result.clone());
        Ok(result)
    }
}

/// Commutation polynomials `C+(F)` whose multiplied leading monomials have
/// degree at most `t`:
///
/// * `m f - m' f'` with `m, m' ∈ {1, x_1, ..., x_n}` and `m γ(f) = m' γ(f')`;
/// * `m f` with `m γ(f) ∈ B`;
/// * `m f` with `m γ(f)` a border monomial that no rule covers yet.
pub fn cplus_polynomials(family: &RewritingFamily, t: u32) -> Vec<Polynomial> {
    let n = family.n_vars();
    let basis = &family.basis;
    let border = basis.border();
    // every product m * γ(f), grouped by the monomial it lands on
    let mut landing: BTreeMap<Monomial, Vec<(Option<usize>, &RewriteRule)>> = BTreeMap::new();
    for r in family.rules.values() {
        if r.degree() <= t {
            landing
                .entry(r.leading.clone())
                .or_default()
                .push((None, r));
        }
        for i in 0..n {
            let m = r.leading.mul_var(i);
            if m.degree() <= t {
                landing.entry(m).or_default().push((Some(i), r));
            }
        }
    }
    let apply = |mult: Option<usize>, r: &RewriteRule| match mult {
        None => r.polynomial(),
        Some(i) => r.polynomial().mul_var(i),
    };
    let mut seen: BTreeSet<(Monomial, Option<usize>, Monomial, Option<usize>)> = BTreeSet::new();
    let mut out = Vec::new();
    for (target, prods) in &landing {
        if prods.len() == 1 {
            let (mult, r) = prods[0];
            if mult.is_some()
                && (basis.contains(target)
                    || (border.contains(target) && !family.rules.contains_key(target)))
            {
                out.push(apply(mult, r));
            }
            continue;
        }
        if basis.contains(target) {
            for &(mult, r) in prods {
                out.push(apply(mult, r));
            }
            continue;
        }
        // pair every product with the first one landing on the same monomial
        let (m0, r0) = prods[0];
        for &(m1, r1) in &prods[1..] {
            let key = (r0.leading.clone(), m0, r1.leading.clone(), m1);
            if seen.insert(key) {
                out.push(&apply(m0, r0) - &apply(m1, r1));
            }
        }
    }
    out
}

/// Result of [`check_border_basis`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BorderCheck {
    pub is_border_basis: bool,
    pub max_residual: f64,
}

/// Default tolerance of [`check_border_basis`], relative to the largest rule coefficient.
pub const CHECK_TOLERANCE: f64 = 1e-8;

/// Tests that every `c ∈ C+(F)` of degree `<= t` reduces to zero.
pub fn check_border_basis(family: &RewritingFamily, t: u32, rel_tol: f64) -> BorderCheck {
    let mut nf = NormalForm::new(family);
    let mut worst: f64 = 0.0;
    for c in cplus_polynomials(family, t) {
        match nf.reduce(&c) {
            Ok(r) => worst = worst.max(r.max_abs_coeff()),
            Err(_) => worst = f64::INFINITY,
        }
    }
    BorderCheck {
        is_border_basis: worst <= rel_tol * family.coefficient_scale(),
        max_residual: worst,
    }
}
