//! Linear forms stored as moment vectors, truncated Hankel matrices and the
//! rank tests used to detect that a relaxation has become exact.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::sorted_symmetric_eigen;
use crate::poly::{Monomial, MonomialBasis, Polynomial};

/// Relative eigenvalue threshold below which a direction counts as kernel.
pub const TAU_RANK: f64 = 1e-7;
/// Relative tolerance on negative eigenvalues in [`check_positive`].
pub const TAU_PSD: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error("moment for exponent {0:?} is not available")]
    Missing(Monomial),
}

/// A linear form `Λ`, given by its values `λ_α = Λ(x^α)` on a finite set of monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    index_set: MonomialBasis,
    values: BTreeMap<Monomial, f64>,
}

impl MomentVector {
    /// `index_set` is the basis `A`; `values` should cover `A·A`.
    pub fn new(index_set: MonomialBasis, values: BTreeMap<Monomial, f64>) -> Self {
        MomentVector { index_set, values }
    }

    /// `Σ w_i ev_{z_i}` on `A·A`.
    pub fn from_points(index_set: MonomialBasis, points: &[Vec<f64>], weights: &[f64]) -> Self {
        assert_eq!(points.len(), weights.len(), "one weight per point");
        let values = index_set
            .products()
            .iter()
            .map(|m| {
                let v = points
                    .iter()
                    .zip(weights)
                    .map(|(z, w)| w * m.evaluate(z))
                    .sum();
                (m.clone(), v)
            })
            .collect();
        MomentVector { index_set, values }
    }

    pub fn index_set(&self) -> &MonomialBasis {
        &self.index_set
    }

    pub fn values(&self) -> &BTreeMap<Monomial, f64> {
        &self.values
    }

    pub fn get(&self, m: &Monomial) -> Option<f64> {
        self.values.get(m).copied()
    }

    /// `λ_0 = Λ(1)`.
    pub fn mass(&self) -> f64 {
        let n = self.index_set.n_vars();
        self.get(&Monomial::one(n)).unwrap_or(0.0)
    }

    /// `Λ(p)`.
    pub fn apply(&self, p: &Polynomial) -> Result<f64, MomentError> {
        p.terms()
            .map(|(m, c)| {
                self.get(m)
                    .map(|v| c * v)
                    .ok_or_else(|| MomentError::Missing(m.clone()))
            })
            .sum()
    }

    /// Largest absolute moment, at least 1.
    pub fn scale(&self) -> f64 {
        self.values.values().fold(1.0, |a, v| a.max(v.abs()))
    }
}

/// `H[α, β] = λ_{α+β}` for `α, β` in a monomial basis.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedHankel {
    pub matrix: DMatrix<f64>,
    pub basis: MonomialBasis,
}

impl TruncatedHankel {
    pub fn size(&self) -> usize {
        self.basis.len()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        sorted_symmetric_eigen(&self.matrix)
            .0
            .iter()
            .copied()
            .collect()
    }

    pub fn rank(&self, tau_rank: f64) -> usize {
        self.size() - kernel_vectors(&self.matrix, tau_rank).ncols()
    }
}

pub fn build_hankel(
    lambda: &MomentVector,
    basis: &MonomialBasis,
) -> Result<TruncatedHankel, MomentError> {
    let mons = basis.to_vec();
    let k = mons.len();
    let mut h = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let m = mons[i].mul(&mons[j]);
            let v = lambda.get(&m).ok_or(MomentError::Missing(m))?;
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(TruncatedHankel {
        matrix: h,
        basis: basis.clone(),
    })
}

/// Orthonormal eigenvectors whose eigenvalue is at most
/// `tau_rank * max(max |eigenvalue|, 1)`, as columns.
fn kernel_vectors(h: &DMatrix<f64>, tau_rank: f64) -> DMatrix<f64> {
    let (vals, vecs) = sorted_symmetric_eigen(h);
    let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let count = vals.iter().take_while(|&&v| v <= tau_rank * scale).count();
    vecs.columns(0, count).into_owned()
}

/// Kernel of `H` as polynomials in `<B>`, each scaled so that its
/// largest-magnitude coefficient is 1.
pub fn kernel(h: &TruncatedHankel, tau_rank: f64) -> Vec<Polynomial> {
    let mons = h.basis.to_vec();
    let n = h.basis.n_vars();
    let k = kernel_vectors(&h.matrix, tau_rank);
    k.column_iter()
        .map(|v| {
            let (imax, _) = v
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .expect("nonempty basis");
            let s = v[imax];
            let mut p = Polynomial::from_terms(
                n,
                mons.iter().zip(v.iter()).map(|(m, &c)| (m.clone(), c / s)),
            );
            p.prune(crate::poly::PRUNE_RELATIVE);
            p
        })
        .collect()
}

/// `rank H^{B+} = rank H^B = |B|`.
pub fn flat_extension_test(
    lambda: &MomentVector,
    basis: &MonomialBasis,
    tau_rank: f64,
) -> Result<bool, MomentError> {
    let hb = build_hankel(lambda, basis)?;
    let hplus = build_hankel(lambda, &basis.prolong())?;
    let r = hb.rank(tau_rank);
    Ok(r == basis.len() && hplus.rank(tau_rank) == r)
}

/// Result of [`check_positive`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositivityCheck {
    pub is_positive: bool,
    pub min_eigenvalue: f64,
}

/// `min eig(H) >= -tau_psd * max(1, max eig(H))`.
pub fn check_positive(h: &TruncatedHankel, tau_psd: f64) -> PositivityCheck {
    let vals = h.eigenvalues();
    let (min, max) = match (vals.first(), vals.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => (0.0, 0.0),
    };
    PositivityCheck {
        is_positive: min >= -tau_psd * max.max(1.0),
        min_eigenvalue: min,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_polynomial;

    fn basis(n: usize, exps: &[&[u32]]) -> MonomialBasis {
        MonomialBasis::new(n, exps.iter().map(|e| Monomial::new(e.to_vec())))
    }

    fn square() -> MonomialBasis {
        basis(2, &[&[0, 0], &[1, 0], &[0, 1], &[1, 1]])
    }

    #[test]
    fn hankel_of_single_evaluation() {
        let lam = MomentVector::from_points(square(), &[vec![1.0, 1.0]], &[1.0]);
        let h = build_hankel(&lam, &square()).unwrap();
        assert_eq!(h.matrix, DMatrix::from_element(4, 4, 1.0));
        assert_eq!(h.rank(TAU_RANK), 1);
    }

    #[test]
    fn hankel_of_two_evaluations() {
        let b = basis(2, &[&[0, 0], &[1, 0], &[0, 1]]);
        let lam =
            MomentVector::from_points(b.clone(), &[vec![1.0, 1.0], vec![-1.0, -1.0]], &[0.5, 0.5]);
        let h = build_hankel(&lam, &b).unwrap();
        // basis order is 1, y, x
        let expected =
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(h.matrix, expected);
        assert_eq!(h.rank(TAU_RANK), 2);
    }

    #[test]
    fn hankel_of_dirac_at_origin() {
        let b = basis(1, &[&[0], &[1]]);
        let lam = MomentVector::from_points(b.clone(), &[vec![0.0]], &[1.0]);
        let h = build_hankel(&lam, &b).unwrap();
        assert_eq!(
            h.matrix,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])
        );
        let k = kernel(&h, TAU_RANK);
        assert_eq!(k, vec![Polynomial::var(1, 0)]);
    }

    #[test]
    fn missing_moment_is_named() {
        let b = basis(1, &[&[0], &[1]]);
        let lam = MomentVector::new(b.clone(), BTreeMap::from([(Monomial::new(vec![0]), 1.0)]));
        assert_eq!(
            build_hankel(&lam, &b).unwrap_err(),
            MomentError::Missing(Monomial::new(vec![1]))
        );
    }

    #[test]
    fn kernel_of_all_ones() {
        let lam = MomentVector::from_points(square(), &[vec![1.0, 1.0]], &[1.0]);
        let h = build_hankel(&lam, &square()).unwrap();
        let k = kernel(&h, TAU_RANK);
        assert_eq!(k.len(), 3);
        // each kernel polynomial vanishes at (1,1) and the span matches x-1, y-1, xy-1
        let vars = ["x", "y"];
        let expected: Vec<Polynomial> = ["x - 1", "y - 1", "x*y - 1"]
            .iter()
            .map(|s| parse_polynomial(s, &vars).unwrap())
            .collect();
        for p in &k {
            assert!(p.evaluate(&[1.0, 1.0]).unwrap().abs() < 1e-12);
            assert!((p.max_abs_coeff() - 1.0).abs() < 1e-15);
        }
        let mons = square().to_vec();
        let to_mat = |ps: &[Polynomial]| {
            DMatrix::from_fn(ps.len(), mons.len(), |i, j| ps[i].coeff(&mons[j]))
        };
        let mut both = to_mat(&k).transpose();
        both = both.insert_columns(3, 3, 0.0);
        both.columns_mut(3, 3)
            .copy_from(&to_mat(&expected).transpose());
        assert_eq!(both.rank(1e-9), 3);
    }

    #[test]
    fn positive_definite_has_empty_kernel() {
        let b = basis(1, &[&[0], &[1]]);
        let lam = MomentVector::from_points(b.clone(), &[vec![1.0], vec![-1.0]], &[0.5, 0.5]);
        let h = build_hankel(&lam, &b).unwrap();
        assert!(kernel(&h, TAU_RANK).is_empty());
    }

    #[test]
    fn flat_extension_examples() {
        let two = basis(2, &[&[0, 0]]);
        let lam = MomentVector::from_points(two.prolong().products(), &[vec![1.0, 1.0]], &[1.0]);
        assert!(flat_extension_test(&lam, &two, TAU_RANK).unwrap());

        let b = basis(1, &[&[0], &[1]]);
        let big = MonomialBasis::up_to_degree(1, 2);
        let lam = MomentVector::from_points(big, &[vec![1.0], vec![-1.0]], &[0.5, 0.5]);
        assert!(flat_extension_test(&lam, &b, TAU_RANK).unwrap());
        let one = basis(1, &[&[0]]);
        assert!(!flat_extension_test(&lam, &one, TAU_RANK).unwrap());
    }

    #[test]
    fn positivity_examples() {
        let lam = MomentVector::from_points(square(), &[vec![1.0, 1.0]], &[1.0]);
        let h = build_hankel(&lam, &square()).unwrap();
        let c = check_positive(&h, TAU_PSD);
        assert!(c.is_positive);
        assert!(c.min_eigenvalue.abs() < 1e-12);

        let h = TruncatedHankel {
            matrix: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
            basis: basis(1, &[&[0], &[1]]),
        };
        let c = check_positive(&h, TAU_PSD);
        assert!(!c.is_positive);
        assert!((c.min_eigenvalue + 1.0).abs() < 1e-12);
    }

    #[test]
    fn apply_is_linear_form() {
        let b = MonomialBasis::up_to_degree(2, 1);
        let lam = MomentVector::from_points(b, &[vec![2.0, 3.0]], &[1.0]);
        let p = parse_polynomial("x*y - 2*x + 1", &["x", "y"]).unwrap();
        assert_eq!(lam.apply(&p).unwrap(), 3.0);
        assert_eq!(lam.mass(), 1.0);
    }
}
