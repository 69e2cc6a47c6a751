//! Points of a zero-dimensional variety from a border basis, by the
//! eigenvalue method.
//!
//! For `h ∈ R[x]` the matrix `X_h` of multiplication by `h` on `<B>` has
//! `(X_h)^T ζ_B(v) = h(v) ζ_B(v)` for every root `v`, where `ζ_B(v)` is the
//! vector of values of the monomials of `B` at `v`. A random combination
//! `h = Σ c_i x_i` separates the roots, and each eigenvector of `X_h^T`
//! normalized at the monomial `1` reads off a root.

use log::debug;
use nalgebra::{Complex, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::border_basis::{BorderBasisError, NormalForm, RewritingFamily};
use crate::poly::{Monomial, MonomialBasis, Polynomial};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error(transparent)]
    BorderBasis(#[from] BorderBasisError),
    #[error("non-simple spectrum after {attempts} random combinations")]
    NonSimpleSpectrum { attempts: usize },
    #[error("the basis does not contain the monomial 1")]
    MissingUnit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootOptions {
    /// Imaginary parts above `tol_imag * (1 + |λ|)` mark a complex root.
    pub tol_imag: f64,
    /// Points closer than `tol_dedup * (1 + ‖z‖)` are merged.
    pub tol_dedup: f64,
    /// Minimal relative distance between eigenvalues of `X_c`.
    pub tol_sep: f64,
    /// Relative tolerance on `‖X_i X_j − X_j X_i‖_max`.
    pub tol_commute: f64,
    pub attempts: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            tol_imag: 1e-6,
            tol_dedup: 1e-6,
            tol_sep: 1e-8,
            tol_commute: 1e-6,
            attempts: 5,
        }
    }
}

/// The matrices `X_1, …, X_n` of multiplication by the variables on `<B>`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplicationMatrices {
    pub matrices: Vec<DMatrix<f64>>,
    pub basis: MonomialBasis,
}

impl MultiplicationMatrices {
    pub fn n_vars(&self) -> usize {
        self.matrices.len()
    }

    /// `max_{i<j} ‖X_i X_j − X_j X_i‖_max`, relative to the largest entry.
    pub fn commutation_residual(&self) -> f64 {
        let scale = self
            .matrices
            .iter()
            .map(|m| m.amax())
            .fold(1.0f64, f64::max);
        let mut worst = 0.0f64;
        for (i, a) in self.matrices.iter().enumerate() {
            for b in &self.matrices[i + 1..] {
                worst = worst.max((a * b - b * a).amax());
            }
        }
        worst / (scale * scale)
    }

    /// `Σ c_i X_i`.
    pub fn combination(&self, c: &[f64]) -> DMatrix<f64> {
        let n = self.basis.len();
        self.matrices
            .iter()
            .zip(c)
            .fold(DMatrix::zeros(n, n), |acc, (m, ci)| acc + m * *ci)
    }
}

/// Column `j` of `X_i` holds the coordinates of `π_{F,B}(x_i b_j)`.
pub fn build_multiplication_matrices(
    family: &RewritingFamily,
    basis: &MonomialBasis,
) -> Result<MultiplicationMatrices, RootError> {
    let n_vars = basis.n_vars();
    let index = basis.index_map();
    let size = basis.len();
    let mut nf = NormalForm::new(family);
    let mut matrices = Vec::with_capacity(n_vars);
    for i in 0..n_vars {
        let mut x = DMatrix::zeros(size, size);
        for (j, b) in basis.iter().enumerate() {
            let image = nf.monomial(&b.mul_var(i))?;
            for (m, c) in image.terms() {
                let row = index
                    .get(m)
                    .ok_or_else(|| BorderBasisError::TailOutsideBasis {
                        leading: b.mul_var(i),
                        monomial: m.clone(),
                    })?;
                x[(*row, j)] = c;
            }
        }
        matrices.push(x);
    }
    Ok(MultiplicationMatrices {
        matrices,
        basis: basis.clone(),
    })
}

/// A unit vector drawn uniformly from the sphere.
fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn well_separated(eigs: &[Complex<f64>], tol: f64) -> bool {
    let scale = eigs.iter().map(|e| e.norm()).fold(1.0f64, f64::max);
    eigs.iter()
        .enumerate()
        .all(|(i, a)| eigs[i + 1..].iter().all(|b| (a - b).norm() > tol * scale))
}

/// The unit vector spanning the (numerical) kernel of `m`.
fn kernel_vector(m: &DMatrix<f64>) -> DVector<f64> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let (k, _) =
        svd.singular_values
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |best, (i, &s)| if s < best.1 { (i, s) } else { best },
            );
    v_t.row(k).transpose()
}

/// The real points of the variety, up to `tol_dedup`.
pub fn extract_points(
    m: &MultiplicationMatrices,
    seed: u64,
    opts: &RootOptions,
) -> Result<Vec<Vec<f64>>, RootError> {
    let size = m.basis.len();
    if size == 0 {
        return Ok(Vec::new());
    }
    let one = Monomial::one(m.n_vars());
    let unit = m
        .basis
        .iter()
        .position(|b| *b == one)
        .ok_or(RootError::MissingUnit)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=opts.attempts.max(1) {
        let c = random_direction(&mut rng, m.n_vars());
        let xc = m.combination(&c);
        let eigs = xc.complex_eigenvalues();
        if !well_separated(eigs.as_slice(), opts.tol_sep) {
            debug!("roots: clustered spectrum on attempt {attempt}");
            continue;
        }
        let xt = xc.transpose();
        let mut points: Vec<Vec<f64>> = Vec::new();
        for e in eigs.iter() {
            if e.im.abs() > opts.tol_imag * (1.0 + e.re.abs()) {
                continue;
            }
            let shifted = &xt - DMatrix::identity(size, size) * e.re;
            let v = kernel_vector(&shifted);
            if v[unit].abs() < 1e-12 {
                debug!("roots: eigenvector vanishes at 1 for eigenvalue {}", e.re);
                continue;
            }
            let v = &v / v[unit];
            // coordinate i is the value of π(x_i) = X_i e_1 under ζ_B
            let point: Vec<f64> = m.matrices.iter().map(|x| v.dot(&x.column(unit))).collect();
            let norm = point.iter().map(|p| p * p).sum::<f64>().sqrt();
            let duplicate = points.iter().any(|q| {
                let d = q
                    .iter()
                    .zip(&point)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                d <= opts.tol_dedup * (1.0 + norm)
            });
            if !duplicate {
                points.push(point);
            }
        }
        // lexicographic, with coordinates equal up to tol_dedup treated as ties
        let tol = opts.tol_dedup;
        points.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .find(|(x, y)| (*x - *y).abs() > tol * (1.0 + x.abs()))
                .map_or(std::cmp::Ordering::Equal, |(x, y)| x.total_cmp(y))
        });
        return Ok(points);
    }
    Err(RootError::NonSimpleSpectrum {
        attempts: opts.attempts.max(1),
    })
}

/// Residuals of a candidate minimizer.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub value: f64,
    /// `‖∇f(z)‖_∞`.
    pub gradient_norm: f64,
    /// Largest `|g(z)|` over the rule polynomials `g` of the border basis.
    pub generator_residual: f64,
}

pub fn certify(points: &[Vec<f64>], f: &Polynomial, family: &RewritingFamily) -> Vec<Certificate> {
    let gradient = f.gradient();
    let rules = family.rule_polynomials();
    let eval = |p: &Polynomial, z: &[f64]| p.evaluate(z).unwrap_or(f64::NAN);
    points
        .iter()
        .map(|z| Certificate {
            value: eval(f, z),
            gradient_norm: gradient
                .iter()
                .map(|g| eval(g, z).abs())
                .fold(0.0, f64::max),
            generator_residual: rules.iter().map(|g| eval(g, z).abs()).fold(0.0, f64::max),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::border_basis::RewriteRule;
    use crate::parser::parse_polynomial;

    fn mono(e: &[u32]) -> Monomial {
        Monomial::new(e.to_vec())
    }

    fn poly(s: &str) -> Polynomial {
        parse_polynomial(s, &["x", "y"]).unwrap()
    }

    fn square_family() -> (RewritingFamily, MonomialBasis) {
        let basis = MonomialBasis::new(
            2,
            [mono(&[0, 0]), mono(&[1, 0]), mono(&[0, 1]), mono(&[1, 1])],
        );
        let rules = [
            (mono(&[2, 0]), "1"),
            (mono(&[0, 2]), "1"),
            (mono(&[2, 1]), "y"),
            (mono(&[1, 2]), "x"),
        ]
        .into_iter()
        .map(|(m, t)| RewriteRule::new(m, poly(t)));
        let fam = RewritingFamily::from_rules(basis.clone(), rules).unwrap();
        (fam, basis)
    }

    #[test]
    fn permutation_matrices() {
        let (fam, basis) = square_family();
        let m = build_multiplication_matrices(&fam, &basis).unwrap();
        // B is ordered 1 < y < x < xy
        let idx = basis.index_map();
        let (one, x, y, xy) = (
            idx[&mono(&[0, 0])],
            idx[&mono(&[1, 0])],
            idx[&mono(&[0, 1])],
            idx[&mono(&[1, 1])],
        );
        let xx = &m.matrices[0];
        for (from, to) in [(one, x), (x, one), (y, xy), (xy, y)] {
            assert_eq!(xx[(to, from)], 1.0);
        }
        assert_eq!(xx.sum(), 4.0);
        let (a, b) = (&m.matrices[0], &m.matrices[1]);
        assert_eq!(a * b, b * a);
        assert_eq!(m.commutation_residual(), 0.0);
    }

    #[test]
    fn single_point() {
        let basis = MonomialBasis::new(2, [mono(&[0, 0])]);
        let fam = RewritingFamily::from_rules(
            basis.clone(),
            [
                RewriteRule::new(mono(&[1, 0]), Polynomial::constant(2, -0.43636)),
                RewriteRule::new(mono(&[0, 1]), Polynomial::constant(2, 2.32727)),
            ],
        )
        .unwrap();
        let m = build_multiplication_matrices(&fam, &basis).unwrap();
        assert_eq!(m.matrices[0][(0, 0)], -0.43636);
        assert_eq!(m.matrices[1][(0, 0)], 2.32727);
        let pts = extract_points(&m, 0, &RootOptions::default()).unwrap();
        assert_eq!(pts.len(), 1);
        assert!((pts[0][0] + 0.43636).abs() < 1e-12);
        assert!((pts[0][1] - 2.32727).abs() < 1e-12);
    }

    #[test]
    fn four_corners() {
        let (fam, basis) = square_family();
        let m = build_multiplication_matrices(&fam, &basis).unwrap();
        for seed in [1, 2, 3] {
            let pts = extract_points(&m, seed, &RootOptions::default()).unwrap();
            let want = [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]];
            assert_eq!(pts.len(), 4);
            for w in want {
                assert!(
                    pts.iter()
                        .any(|p| (p[0] - w[0]).abs() < 1e-10 && (p[1] - w[1]).abs() < 1e-10),
                    "{w:?} missing from {pts:?}"
                );
            }
        }
    }

    #[test]
    fn complex_roots_are_dropped() {
        // x^2 + 1 = 0, y = 0
        let basis = MonomialBasis::new(2, [mono(&[0, 0]), mono(&[1, 0])]);
        let fam = RewritingFamily::from_rules(
            basis.clone(),
            [
                RewriteRule::new(mono(&[2, 0]), Polynomial::constant(2, -1.0)),
                RewriteRule::new(mono(&[0, 1]), Polynomial::zero(2)),
                RewriteRule::new(mono(&[1, 1]), Polynomial::zero(2)),
            ],
        )
        .unwrap();
        let m = build_multiplication_matrices(&fam, &basis).unwrap();
        assert!(extract_points(&m, 7, &RootOptions::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn double_root_is_rejected() {
        // x^2 = 0, y = 0: one point of multiplicity two
        let basis = MonomialBasis::new(2, [mono(&[0, 0]), mono(&[1, 0])]);
        let fam = RewritingFamily::from_rules(
            basis.clone(),
            [
                RewriteRule::new(mono(&[2, 0]), Polynomial::zero(2)),
                RewriteRule::new(mono(&[0, 1]), Polynomial::zero(2)),
                RewriteRule::new(mono(&[1, 1]), Polynomial::zero(2)),
            ],
        )
        .unwrap();
        let m = build_multiplication_matrices(&fam, &basis).unwrap();
        assert_eq!(
            extract_points(&m, 0, &RootOptions::default()),
            Err(RootError::NonSimpleSpectrum { attempts: 5 })
        );
    }

    #[test]
    fn certificates() {
        let (fam, _) = square_family();
        let f = poly("x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1");
        assert!(certify(&[], &f, &fam).is_empty());
        let pts = vec![
            vec![1.0, 1.0],
            vec![-1.0, 1.0],
            vec![1.0, -1.0],
            vec![-1.0, -1.0],
        ];
        for c in certify(&pts, &f, &fam) {
            assert!(c.value.abs() <= 1e-12);
            assert!(c.gradient_norm <= 1e-6);
            assert!(c.generator_residual <= 1e-6);
        }
        let c = &certify(&[vec![1.1, 1.0]], &f, &fam)[0];
        assert!(c.gradient_norm > 0.1 && c.generator_residual > 0.1);
    }
}
