//! Moment relaxations as semidefinite programs.
//!
//! The unknowns are the moments `λ_α` for `α ∈ B·B`, with `λ_0 = 1`, linear
//! equalities `Λ(g) = 0` and the Hankel matrix `H(λ)` constrained to be
//! positive semidefinite. Hankel symmetry is structural: each distinct
//! product `α` is a single variable.

pub mod ipm;
pub mod sdpa;

use std::collections::{BTreeMap, BTreeSet};

use log::debug;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::border_basis::{BorderBasisError, NormalForm, RewritingFamily};
use crate::linalg::{least_squares, null_space};
use crate::moment::{build_hankel, check_positive, MomentVector, TAU_PSD};
use crate::poly::{Monomial, MonomialBasis, Polynomial, PRUNE_RELATIVE};

pub use ipm::{IpmOptions, IpmResult, IpmStatus, StandardSdp};
pub use sdpa::{export_sdpa, SdpaEntry, SdpaError, SdpaProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error(transparent)]
    BorderBasis(#[from] BorderBasisError),
    #[error("the basis must contain the monomial 1")]
    MissingUnit,
    #[error("objective is not representable on B·B: {0}; increase the relaxation degree")]
    NotRepresentable(String),
    #[error("variable count mismatch: basis has {basis}, objective has {objective}")]
    VariableCountMismatch { basis: usize, objective: usize },
}

/// Linear equalities imposed on the moments.
#[derive(Clone, Copy, Debug)]
pub enum Constraints<'a> {
    None,
    /// `Λ(g) = 0` for each generator supported on `B·B`.
    Generators(&'a [Polynomial]),
    /// `Λ(u) = 0` for every `u ∈ <B·B>` with `π_{F,B}(u) = 0`.
    Family(&'a RewritingFamily),
}

/// A moment relaxation in the monomial basis `basis`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSDP {
    pub basis: MonomialBasis,
    /// `B·B`, ascending; the first entry is `1`.
    pub moments: Vec<Monomial>,
    pub objective: BTreeMap<Monomial, f64>,
    pub equality_constraints: Vec<BTreeMap<Monomial, f64>>,
}

impl MomentSDP {
    pub fn hankel_size(&self) -> usize {
        self.basis.len()
    }

    pub fn n_vars(&self) -> usize {
        self.basis.n_vars()
    }

    /// `(i, j)` positions with `i <= j` of each moment in the Hankel matrix.
    pub fn hankel_positions(&self) -> BTreeMap<Monomial, Vec<(usize, usize)>> {
        let mons = self.basis.to_vec();
        let mut out: BTreeMap<Monomial, Vec<(usize, usize)>> = BTreeMap::new();
        for i in 0..mons.len() {
            for j in i..mons.len() {
                out.entry(mons[i].mul(&mons[j])).or_default().push((i, j));
            }
        }
        out
    }

    /// `H(v)` for a vector `v` indexed like [`MomentSDP::moments`].
    fn hankel_of(&self, v: &[f64], positions: &[Vec<(usize, usize)>]) -> DMatrix<f64> {
        let k = self.basis.len();
        let mut h = DMatrix::zeros(k, k);
        for (val, pos) in v.iter().zip(positions) {
            for &(i, j) in pos {
                h[(i, j)] = *val;
                h[(j, i)] = *val;
            }
        }
        h
    }

    fn objective_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.moments.len(),
            self.moments
                .iter()
                .map(|m| self.objective.get(m).copied().unwrap_or(0.0)),
        )
    }
}

fn sparse_row(moments: &[Monomial], v: impl Iterator<Item = f64>) -> BTreeMap<Monomial, f64> {
    let vals: Vec<f64> = v.collect();
    let scale = vals.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    moments
        .iter()
        .zip(vals)
        .filter(|(_, c)| c.abs() > PRUNE_RELATIVE * scale)
        .map(|(m, c)| (m.clone(), c))
        .collect()
}

/// Builds the relaxation `min Λ(f)` over `Λ` with `Λ(1) = 1`, the given
/// equalities and `H_Λ^B ⪰ 0`.
pub fn assemble(
    f: &Polynomial,
    basis: &MonomialBasis,
    constraints: Constraints<'_>,
) -> Result<MomentSDP, SdpError> {
    let n = basis.n_vars();
    if f.n_vars() != n {
        return Err(SdpError::VariableCountMismatch {
            basis: n,
            objective: f.n_vars(),
        });
    }
    if !basis.contains(&Monomial::one(n)) {
        return Err(SdpError::MissingUnit);
    }
    let moments: Vec<Monomial> = basis.products().to_vec();
    let in_span: BTreeSet<&Monomial> = moments.iter().collect();
    let inside = |p: &Polynomial| p.support().all(|m| in_span.contains(m));

    let mut objective: BTreeMap<Monomial, f64> = BTreeMap::new();
    let mut outside: Vec<(Monomial, f64)> = Vec::new();
    for (m, c) in f.terms() {
        if in_span.contains(m) {
            objective.insert(m.clone(), c);
        } else {
            outside.push((m.clone(), c));
        }
    }

    let equality_constraints = match constraints {
        Constraints::None | Constraints::Generators(_) if !outside.is_empty() => {
            return Err(SdpError::NotRepresentable(format!(
                "monomial {:?} lies outside B·B",
                outside[0].0
            )));
        }
        Constraints::None => Vec::new(),
        Constraints::Generators(gens) => gens
            .iter()
            .filter(|g| !g.is_zero() && inside(g))
            .map(|g| g.terms().map(|(m, c)| (m.clone(), c)).collect())
            .collect(),
        Constraints::Family(fam) => {
            let mut nf = NormalForm::new(fam);
            let images: Vec<Polynomial> = moments
                .iter()
                .map(|m| nf.monomial(m))
                .collect::<Result<_, _>>()?;
            let mut coords: BTreeSet<Monomial> =
                images.iter().flat_map(|p| p.support().cloned()).collect();
            let tail = Polynomial::from_terms(n, outside.iter().cloned());
            let reduced_tail = nf.reduce(&tail)?;
            coords.extend(reduced_tail.support().cloned());
            let coords: Vec<Monomial> = coords.into_iter().collect();
            let row_of: BTreeMap<&Monomial, usize> =
                coords.iter().enumerate().map(|(i, m)| (m, i)).collect();
            let mut p = DMatrix::zeros(coords.len(), moments.len());
            for (j, img) in images.iter().enumerate() {
                for (m, c) in img.terms() {
                    p[(row_of[m], j)] = c;
                }
            }
            if !outside.is_empty() {
                let mut rhs = DVector::zeros(coords.len());
                for (m, c) in reduced_tail.terms() {
                    rhs[row_of[m]] = c;
                }
                let (u, res) = least_squares(&p, &rhs, 1e-12);
                if res > 1e-8 * (1.0 + rhs.norm()) {
                    return Err(SdpError::NotRepresentable(format!(
                        "normal form of the objective leaves residual {res:e} on <B·B>"
                    )));
                }
                for (m, c) in moments.iter().zip(u.iter()) {
                    if *c != 0.0 {
                        *objective.entry(m.clone()).or_insert(0.0) += c;
                    }
                }
            }
            let tol = 1e-10 * p.norm().max(1.0);
            let ker = null_space(&p, tol);
            ker.column_iter()
                .map(|k| sparse_row(&moments, k.iter().copied()))
                .filter(|r| !r.is_empty())
                .collect()
        }
    };
    let scale = objective.values().fold(0.0f64, |a, c| a.max(c.abs()));
    objective.retain(|_, c| c.abs() > PRUNE_RELATIVE * scale);
    Ok(MomentSDP {
        basis: basis.clone(),
        moments,
        objective,
        equality_constraints,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    GapDetected,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdpOptions {
    pub ipm: IpmOptions,
    /// Relative duality-gap threshold separating `Optimal` from `GapDetected`.
    pub tol_gap: f64,
    pub tol_psd: f64,
    /// Feasibility a stalled solve must still reach to be accepted as optimal.
    pub tol_stall: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            ipm: IpmOptions::default(),
            tol_gap: 1e-4,
            tol_psd: TAU_PSD,
            tol_stall: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SDPSolution {
    pub moments: MomentVector,
    /// `Λ(f)` at the returned moments.
    pub primal_objective: f64,
    /// Lower bound certified by the sum-of-squares side.
    pub dual_objective: f64,
    pub status: SdpStatus,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
}

impl SDPSolution {
    pub fn relative_gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs() / (1.0 + self.primal_objective.abs())
    }
}

/// The relaxation after eliminating `λ_0 = 1` and the equalities:
/// `λ = λ_p + N z`, so `H(λ) = H(λ_p) + sum_k z_k H(N_k)`.
struct Reduced {
    lambda_p: DVector<f64>,
    null: DMatrix<f64>,
    positions: Vec<Vec<(usize, usize)>>,
}

fn reduce_equalities(sdp: &MomentSDP) -> Option<Reduced> {
    let s = sdp.moments.len();
    let col: BTreeMap<&Monomial, usize> = sdp
        .moments
        .iter()
        .enumerate()
        .map(|(i, m)| (m, i))
        .collect();
    let rows = 1 + sdp.equality_constraints.len();
    let mut a = DMatrix::zeros(rows, s);
    let mut b = DVector::zeros(rows);
    a[(0, 0)] = 1.0;
    b[0] = 1.0;
    for (r, g) in sdp.equality_constraints.iter().enumerate() {
        let norm = g
            .values()
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        for (m, c) in g {
            a[(r + 1, col[m])] = c / norm;
        }
    }
    let (lambda_p, res) = least_squares(&a, &b, 1e-10);
    if res > 1e-8 {
        return None;
    }
    let null = null_space(&a, 1e-10 * a.norm().max(1.0));
    let pos = sdp.hankel_positions();
    let positions = sdp
        .moments
        .iter()
        .map(|m| pos.get(m).cloned().unwrap_or_default())
        .collect();
    Some(Reduced {
        lambda_p,
        null,
        positions,
    })
}

impl MomentSDP {
    /// The relaxation as a standard-form pair with `C = H(λ_p)`,
    /// `A_k = -H(N_k)` and `b = -N^T c`, plus the data needed to map back.
    fn standard_form(&self) -> Option<(StandardSdp, Reduced)> {
        let red = reduce_equalities(self)?;
        let c = self.objective_vector();
        let k = self.basis.len();
        let cz = red.null.transpose() * &c;
        let a = red
            .null
            .column_iter()
            .map(|nk| vec![-self.hankel_of(nk.as_slice(), &red.positions)])
            .collect();
        let std = StandardSdp {
            block_sizes: vec![k],
            c: vec![self.hankel_of(red.lambda_p.as_slice(), &red.positions)],
            a,
            b: -cz,
        };
        Some((std, red))
    }
}

pub fn solve(sdp: &MomentSDP, opts: &SdpOptions) -> SDPSolution {
    let c = sdp.objective_vector();
    let to_moments = |lambda: &DVector<f64>| {
        MomentVector::new(
            sdp.basis.clone(),
            sdp.moments
                .iter()
                .cloned()
                .zip(lambda.iter().copied())
                .collect(),
        )
    };
    let Some((std, red)) = sdp.standard_form() else {
        debug!("moment equalities force Λ(1) = 0");
        let zero = DVector::zeros(sdp.moments.len());
        return SDPSolution {
            moments: to_moments(&zero),
            primal_objective: f64::INFINITY,
            dual_objective: f64::INFINITY,
            status: SdpStatus::Infeasible,
            iterations: 0,
            primal_infeasibility: f64::INFINITY,
            dual_infeasibility: 0.0,
        };
    };
    let base = c.dot(&red.lambda_p);

    if std.n_constraints() == 0 {
        let moments = to_moments(&red.lambda_p);
        let psd = build_hankel(&moments, &sdp.basis)
            .map(|h| check_positive(&h, opts.tol_psd).is_positive)
            .unwrap_or(false);
        return SDPSolution {
            moments,
            primal_objective: if psd { base } else { f64::INFINITY },
            dual_objective: if psd { base } else { f64::INFINITY },
            status: if psd {
                SdpStatus::Optimal
            } else {
                SdpStatus::Infeasible
            },
            iterations: 0,
            primal_infeasibility: 0.0,
            dual_infeasibility: 0.0,
        };
    }

    let mut res = ipm::solve_standard(&std, &opts.ipm);
    if matches!(res.status, IpmStatus::Stalled | IpmStatus::IterationLimit) {
        // moments of very different magnitudes: retry with the slack
        // equilibrated to unit diagonal
        let d: Vec<DVector<f64>> = res
            .z
            .iter()
            .map(|z| {
                let top = z.diagonal().amax().max(f64::MIN_POSITIVE);
                z.diagonal().map(|v| 1.0 / v.max(1e-12 * top).sqrt())
            })
            .collect();
        let retry = ipm::solve_standard(&std.congruence(&d), &opts.ipm);
        let merit = |r: &IpmResult| {
            r.primal_infeasibility
                .max(r.dual_infeasibility)
                .max(r.relative_gap())
        };
        debug!(
            "equilibrated retry: {:?} (merit {:e}) after {:?} (merit {:e})",
            retry.status,
            merit(&retry),
            res.status,
            merit(&res)
        );
        if retry.status == IpmStatus::Optimal || merit(&retry) < merit(&res) {
            res = retry;
        }
    }
    let lambda = &red.lambda_p + &red.null * &res.y;
    let moments = to_moments(&lambda);
    let primal = c.dot(&lambda);
    let dual = base - res.primal_objective;
    let gap_ok = (primal - dual).abs() <= opts.tol_gap * (1.0 + primal.abs());
    let psd = || {
        build_hankel(&moments, &sdp.basis)
            .map(|h| check_positive(&h, opts.tol_psd).is_positive)
            .unwrap_or(false)
    };
    let status = match res.status {
        IpmStatus::Optimal => {
            if gap_ok && psd() {
                SdpStatus::Optimal
            } else {
                SdpStatus::GapDetected
            }
        }
        IpmStatus::PrimalInfeasible => SdpStatus::Unbounded,
        IpmStatus::DualInfeasible => SdpStatus::Infeasible,
        // the best iterate of a stall near the optimum is as good as it gets
        IpmStatus::Stalled
            if gap_ok
                && res.primal_infeasibility <= opts.tol_stall
                && res.dual_infeasibility <= opts.tol_stall
                && psd() =>
        {
            SdpStatus::Optimal
        }
        IpmStatus::Stalled | IpmStatus::IterationLimit => {
            if gap_ok {
                SdpStatus::IterationLimit
            } else {
                SdpStatus::GapDetected
            }
        }
    };
    debug!(
        "moment SDP of size {}: {:?} after {} iterations, moment {primal:.10e}, sos {dual:.10e}",
        sdp.hankel_size(),
        status,
        res.iterations
    );
    SDPSolution {
        moments,
        primal_objective: primal,
        dual_objective: dual,
        status,
        iterations: res.iterations,
        primal_infeasibility: res.primal_infeasibility,
        dual_infeasibility: res.dual_infeasibility,
    }
}
