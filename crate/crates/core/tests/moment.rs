use nalgebra::DMatrix;
use polymin::moment::{build_hankel, check_positive, kernel, MomentVector, TAU_PSD, TAU_RANK};
use polymin::{MonomialBasis, Polynomial};
use proptest::prelude::*;

fn points_strategy(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 2), 1..=max)
}

fn well_separated(points: &[Vec<f64>]) -> bool {
    points.iter().enumerate().all(|(i, p)| {
        points[i + 1..]
            .iter()
            .all(|q| (p[0] - q[0]).abs() + (p[1] - q[1]).abs() > 0.3)
    })
}

/// Dimension of the intersection of two column spaces, via rank counting.
fn intersection_dim(a: &DMatrix<f64>, b: &DMatrix<f64>) -> usize {
    let ra = a.rank(1e-8);
    let rb = b.rank(1e-8);
    let mut both = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    both.columns_mut(0, a.ncols()).copy_from(a);
    both.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    ra + rb - both.rank(1e-8)
}

fn kernel_matrix(ps: &[Polynomial], basis: &MonomialBasis) -> DMatrix<f64> {
    let mons = basis.to_vec();
    DMatrix::from_fn(mons.len(), ps.len(), |i, j| ps[j].coeff(&mons[i]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// A positive combination of distinct point evaluations has Hankel rank
    /// equal to the number of points once the basis separates them.
    #[test]
    fn rank_counts_points(pts in points_strategy(5), seed in 0u64..1000) {
        prop_assume!(well_separated(&pts));
        let weights: Vec<f64> = (0..pts.len()).map(|i| 0.2 + ((seed + i as u64 * 7) % 10) as f64 / 10.0).collect();
        let b = MonomialBasis::up_to_degree(2, 4);
        let lam = MomentVector::from_points(b.clone(), &pts, &weights);
        let h = build_hankel(&lam, &b).unwrap();
        prop_assert_eq!(h.rank(1e-10), pts.len());
    }

    /// Every kernel polynomial `p` satisfies `Λ(p·b) ≈ 0` for all `b ∈ B`.
    #[test]
    fn kernel_polynomials_annihilate(pts in points_strategy(4)) {
        prop_assume!(well_separated(&pts));
        let w = vec![1.0 / pts.len() as f64; pts.len()];
        let b = MonomialBasis::up_to_degree(2, 2);
        let lam = MomentVector::from_points(b.clone(), &pts, &w);
        let h = build_hankel(&lam, &b).unwrap();
        let scale = lam.scale();
        for p in kernel(&h, TAU_RANK) {
            for m in b.iter() {
                let v = lam.apply(&p.mul_monomial(m)).unwrap();
                prop_assert!(v.abs() <= 10.0 * TAU_RANK * scale, "{v}");
            }
        }
        prop_assert!(check_positive(&h, TAU_PSD).is_positive);
    }

    /// `ker H_{Λ+Λ'} = ker H_Λ ∩ ker H_Λ'` for positive semidefinite forms.
    #[test]
    fn kernel_of_sum_is_intersection(p1 in points_strategy(3), p2 in points_strategy(3)) {
        let mut all = p1.clone();
        all.extend(p2.iter().cloned());
        prop_assume!(well_separated(&all));
        let b = MonomialBasis::up_to_degree(2, 2);
        let l1 = MomentVector::from_points(b.clone(), &p1, &vec![1.0; p1.len()]);
        let l2 = MomentVector::from_points(b.clone(), &p2, &vec![1.0; p2.len()]);
        let sum = MomentVector::from_points(b.clone(), &all, &vec![1.0; all.len()]);
        let k1 = kernel_matrix(&kernel(&build_hankel(&l1, &b).unwrap(), TAU_RANK), &b);
        let k2 = kernel_matrix(&kernel(&build_hankel(&l2, &b).unwrap(), TAU_RANK), &b);
        let hs = build_hankel(&sum, &b).unwrap();
        let ks = kernel_matrix(&kernel(&hs, TAU_RANK), &b);
        prop_assert_eq!(ks.ncols(), intersection_dim(&k1, &k2));
        // cross residuals: the kernel of the sum annihilates both parts
        let h1 = build_hankel(&l1, &b).unwrap().matrix;
        let h2 = build_hankel(&l2, &b).unwrap().matrix;
        prop_assert!((&h1 * &ks).norm() < 1e-8 * (1.0 + h1.norm()));
        prop_assert!((&h2 * &ks).norm() < 1e-8 * (1.0 + h2.norm()));
    }

    /// Quantified near-kernel property: for unit `p`,
    /// `dist(p, ker H)^2 * (smallest nonzero eigenvalue) <= Λ(p^2)`.
    #[test]
    fn small_square_is_near_kernel(pts in points_strategy(3), coeffs in proptest::collection::vec(-1.0f64..1.0, 6)) {
        prop_assume!(well_separated(&pts));
        let b = MonomialBasis::up_to_degree(2, 2);
        let lam = MomentVector::from_points(b.clone(), &pts, &vec![1.0; pts.len()]);
        let h = build_hankel(&lam, &b).unwrap();
        let k = kernel_matrix(&kernel(&h, TAU_RANK), &b);
        let v = nalgebra::DVector::from_vec(coeffs);
        prop_assume!(v.norm() > 0.1);
        let p = &v / v.norm();
        let square = (p.transpose() * &h.matrix * &p)[(0, 0)];
        let q = k.clone().qr().q().columns(0, k.ncols()).into_owned();
        let dist = (&p - &q * (q.transpose() * &p)).norm();
        let eig = h.eigenvalues();
        let scale = eig.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let lmin = eig.iter().copied().filter(|&e| e > TAU_RANK * scale).fold(f64::INFINITY, f64::min);
        prop_assert!(dist * dist * lmin <= square + 1e-9, "{dist} {lmin} {square}");
    }
}
