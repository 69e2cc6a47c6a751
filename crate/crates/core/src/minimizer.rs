//! The minimizer-ideal loop.
//!
//! Starting from the gradient ideal at `t = ⌈deg f / 2⌉`, each pass completes
//! the generators to a border basis in degree `<= 2t`, solves the moment
//! relaxation on `B_t` and compares its value with the previous one. Once two
//! consecutive relaxations agree, the kernel of the Hankel matrix on
//! `B_{t-1}` is added to the generators; when the resulting quotient basis is
//! small enough and the relaxation on it has a trivial kernel, the border
//! basis generates the minimizer ideal.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use log::{debug, info, warn};
use thiserror::Error;

use crate::border_basis::{
    complete_in_degree, extend_in_quotient, BorderBasisError, CompletionOptions, NormalForm,
    RewritingFamily,
};
use crate::moment::{build_hankel, flat_extension_test, kernel, MomentVector, TAU_RANK};
use crate::poly::{MonomialBasis, Polynomial, PRUNE_RELATIVE};
use crate::roots::{
    build_multiplication_matrices, certify, extract_points, Certificate, RootError, RootOptions,
};
use crate::sdp::{
    assemble, export_sdpa, solve, Constraints, MomentSDP, SDPSolution, SdpError, SdpOptions,
    SdpStatus,
};

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizerOptions {
    pub t_max: u32,
    /// Two objectives `a`, `b` are equal when `|a − b| <= tol_min * (1 + |b|)`.
    pub tol_min: f64,
    /// Relative eigenvalue threshold for Hankel kernels.
    pub tau_rank: f64,
    pub completion: CompletionOptions,
    /// Multiples of `tau_rank` used to cut the harvested kernel, tried in order.
    pub harvest_tau_factors: Vec<f64>,
    /// Rank thresholds tried, in order, when completing the generators
    /// together with the numerical kernel polynomials. The first candidate
    /// basis whose relaxation confirms the minimum with a trivial kernel is
    /// accepted.
    pub harvest_rank_tols: Vec<f64>,
    pub sdp: SdpOptions,
    pub roots: RootOptions,
    pub seed: u64,
    /// Every relaxation solved is also written here in SDPA format.
    pub dump_sdpa: Option<PathBuf>,
}

impl Default for MinimizerOptions {
    fn default() -> Self {
        MinimizerOptions {
            t_max: 12,
            tol_min: 1e-6,
            tau_rank: TAU_RANK,
            completion: CompletionOptions::default(),
            harvest_tau_factors: vec![1.0, 10.0, 100.0],
            harvest_rank_tols: vec![1e-9, 1e-7, 1e-5, 1e-3],
            sdp: SdpOptions::default(),
            roots: RootOptions::default(),
            seed: 0,
            dump_sdpa: None,
        }
    }
}

/// Which relaxation a trace entry belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// The relaxation on `B_t` built from the current generators.
    Relaxation,
    /// The relaxation on the quotient basis after a kernel harvest.
    Harvest,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub t: u32,
    pub stage: Stage,
    pub hankel_size: usize,
    pub objective: f64,
    pub dual_objective: f64,
    pub status: SdpStatus,
    pub gap: bool,
    /// Kernel dimension of the Hankel matrix examined after this solve, if any.
    pub kernel_dim: Option<usize>,
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct MinimizerResult {
    pub minimum: f64,
    pub quotient_basis: MonomialBasis,
    pub border_basis: RewritingFamily,
    pub points: Vec<Vec<f64>>,
    pub certificates: Vec<Certificate>,
    /// Whether the final moments pass the flat-extension test on the
    /// quotient basis (moments on `B⁺·B⁺` obtained through the normal form).
    pub flat_extension: bool,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MinimizerError {
    #[error("objective is constant")]
    ConstantObjective,
    #[error("degree bound t_max = {t_max} exceeded; best lower bound {best_lower_bound:?}")]
    TMaxExceeded {
        t_max: u32,
        best_lower_bound: Option<f64>,
        trace: Vec<IterationRecord>,
    },
    #[error("border basis at t = {t}: {source}")]
    BorderBasis { t: u32, source: BorderBasisError },
    #[error("moment relaxation at t = {t}: {source}")]
    Sdp { t: u32, source: SdpError },
    #[error("root extraction: {0}")]
    Roots(#[from] RootError),
    #[error("writing SDPA dump {path}: {message}")]
    Dump { path: PathBuf, message: String },
}

impl MinimizerError {
    pub fn trace(&self) -> Option<&[IterationRecord]> {
        match self {
            MinimizerError::TMaxExceeded { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

/// The value and gap flag of one relaxation.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerBound {
    pub t: u32,
    pub objective: f64,
    pub dual_objective: f64,
    pub status: SdpStatus,
    pub gap: bool,
    pub hankel_size: usize,
}

fn first_degree(f: &Polynomial) -> Result<u32, MinimizerError> {
    match f.degree() {
        Some(d) if d > 0 => Ok(d.div_ceil(2)),
        _ => Err(MinimizerError::ConstantObjective),
    }
}

fn gradient_generators(f: &Polynomial) -> Vec<Polynomial> {
    f.gradient().into_iter().filter(|g| !g.is_zero()).collect()
}

struct Solved {
    sdp: MomentSDP,
    solution: SDPSolution,
    wall_ms: f64,
}

impl Solved {
    fn gap(&self) -> bool {
        self.solution.status != SdpStatus::Optimal
    }

    fn record(&self, t: u32, stage: Stage, kernel_dim: Option<usize>) -> IterationRecord {
        IterationRecord {
            t,
            stage,
            hankel_size: self.sdp.hankel_size(),
            objective: self.solution.primal_objective,
            dual_objective: self.solution.dual_objective,
            status: self.solution.status,
            gap: self.gap(),
            kernel_dim,
            wall_ms: self.wall_ms,
        }
    }
}

struct Runner<'a> {
    f: &'a Polynomial,
    opts: &'a MinimizerOptions,
}

impl Runner<'_> {
    fn relax(
        &self,
        t: u32,
        stage: Stage,
        basis: &MonomialBasis,
        family: &RewritingFamily,
        started: Instant,
    ) -> Result<Solved, MinimizerError> {
        let sdp = assemble(self.f, basis, Constraints::Family(family))
            .map_err(|source| MinimizerError::Sdp { t, source })?;
        if let Some(dir) = &self.opts.dump_sdpa {
            let name = match stage {
                Stage::Relaxation => format!("t{t}.dat-s"),
                Stage::Harvest => format!("t{t}_harvest.dat-s"),
            };
            let path = dir.join(name);
            export_sdpa(&sdp)
                .write(&path)
                .map_err(|e| MinimizerError::Dump {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
        }
        let solution = solve(&sdp, &self.opts.sdp);
        Ok(Solved {
            sdp,
            solution,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    fn complete(
        &self,
        t: u32,
        generators: &[Polynomial],
        degree: u32,
        opts: CompletionOptions,
    ) -> Result<(RewritingFamily, MonomialBasis), MinimizerError> {
        complete_in_degree(generators, degree, opts)
            .map_err(|source| MinimizerError::BorderBasis { t, source })
    }

    fn equal(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.opts.tol_min * (1.0 + b.abs())
    }
}

/// One relaxation at fixed degree `t` on the gradient ideal.
pub fn lower_bound_at_degree(
    f: &Polynomial,
    t: u32,
    opts: &MinimizerOptions,
) -> Result<LowerBound, MinimizerError> {
    let t = t.max(first_degree(f)?);
    let runner = Runner { f, opts };
    let started = Instant::now();
    let (family, basis) = runner.complete(t, &gradient_generators(f), 2 * t, opts.completion)?;
    let solved = runner.relax(t, Stage::Relaxation, &basis.truncate(t), &family, started)?;
    Ok(LowerBound {
        t,
        objective: solved.solution.primal_objective,
        dual_objective: solved.solution.dual_objective,
        status: solved.solution.status,
        gap: solved.gap(),
        hankel_size: solved.sdp.hankel_size(),
    })
}

/// Extends `lambda` from `B·B` to `B⁺·B⁺` through the normal form.
fn extend_moments(
    lambda: &MomentVector,
    family: &RewritingFamily,
    basis: &MonomialBasis,
) -> Result<MomentVector, BorderBasisError> {
    let index_set = basis.prolong().products();
    let mut nf = NormalForm::new(family);
    let mut values = BTreeMap::new();
    for m in index_set.iter() {
        let image = nf.monomial(m)?;
        let v = lambda
            .apply(&image)
            .map_err(|_| BorderBasisError::Incomplete(m.clone()))?;
        values.insert(m.clone(), v);
    }
    Ok(MomentVector::new(index_set, values))
}

/// Runs the minimizer-ideal loop on `f`.
pub fn minimize(
    f: &Polynomial,
    opts: &MinimizerOptions,
) -> Result<MinimizerResult, MinimizerError> {
    let mut t = first_degree(f)?;
    let gradient = gradient_generators(f);
    let runner = Runner { f, opts };
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut f_tilde: Option<f64> = None;
    let mut best_lower: Option<f64> = None;

    loop {
        if t > opts.t_max {
            return Err(MinimizerError::TMaxExceeded {
                t_max: opts.t_max,
                best_lower_bound: best_lower,
                trace,
            });
        }
        let started = Instant::now();
        let (family, basis) = runner.complete(t, &gradient, 2 * t, opts.completion)?;
        let bt = basis.truncate(t);
        let solved = runner.relax(t, Stage::Relaxation, &bt, &family, started)?;
        let objective = solved.solution.primal_objective;
        info!(
            "t = {t}: Hankel size {}, objective {objective:.8}, {:?}",
            bt.len(),
            solved.solution.status
        );

        if solved.gap() {
            trace.push(solved.record(t, Stage::Relaxation, None));
            t += 1;
            continue;
        }
        best_lower = Some(best_lower.map_or(objective, |b: f64| b.max(objective)));
        if !f_tilde.is_some_and(|prev| runner.equal(objective, prev)) {
            trace.push(solved.record(t, Stage::Relaxation, None));
            f_tilde = Some(objective);
            t += 1;
            continue;
        }
        let f_prev = f_tilde.expect("set above");

        // kernel of the Hankel matrix one degree below
        let lower = basis.truncate(t - 1);
        let h = build_hankel(&solved.solution.moments, &lower).expect("moments cover B_t·B_t");
        let mut nf = NormalForm::new(&family);
        let mut harvest = |tau: f64| -> Result<Vec<Polynomial>, MinimizerError> {
            let mut out = Vec::new();
            for p in kernel(&h, tau) {
                let mut r = nf
                    .reduce(&p)
                    .map_err(|source| MinimizerError::BorderBasis { t, source })?;
                r.prune(PRUNE_RELATIVE);
                if !r.is_zero() {
                    out.push(r);
                }
            }
            Ok(out)
        };
        let kernel_dim = harvest(opts.tau_rank)?.len();
        trace.push(solved.record(t, Stage::Relaxation, Some(kernel_dim)));
        debug!("t = {t}: {kernel_dim} kernel polynomials on B_{}", t - 1);

        let mut accepted = None;
        let mut tried: Vec<MonomialBasis> = Vec::new();
        let mut harvested_sets: Vec<usize> = Vec::new();
        'ladder: for &factor in &opts.harvest_tau_factors {
            let harvested = harvest(opts.tau_rank * factor)?;
            if harvested_sets.contains(&harvested.len()) {
                continue;
            }
            harvested_sets.push(harvested.len());
            let mut generators = gradient.clone();
            generators.extend(harvested.iter().cloned());
            for &rank_tol in &opts.harvest_rank_tols {
                let completion = CompletionOptions {
                    rank_tol,
                    ..opts.completion
                };
                // a zero-dimensional gradient ideal is cut down inside its quotient
                let extended = if family.is_complete() {
                    extend_in_quotient(&family, &harvested, completion)
                        .map_err(|source| MinimizerError::BorderBasis { t, source })
                } else {
                    runner.complete(t, &generators, 2 * (t - 1), completion)
                };
                let (family2, basis2) = match extended {
                    Ok(r) => r,
                    Err(e) => {
                        debug!("t = {t}, rank_tol {rank_tol:e}: no completion after harvest: {e}");
                        continue;
                    }
                };
                if tried.contains(&basis2) {
                    continue;
                }
                tried.push(basis2.clone());
                if basis2.max_degree().is_some_and(|d| d + 1 >= t) {
                    debug!(
                        "t = {t}, rank_tol {rank_tol:e}: quotient basis of size {} reaches degree {}",
                        basis2.len(),
                        t - 1
                    );
                    continue;
                }
                let (mut family2, mut basis2) = (family2, basis2);
                let started = Instant::now();
                let mut solved2 = runner.relax(t, Stage::Harvest, &basis2, &family2, started)?;
                loop {
                    let objective2 = solved2.solution.primal_objective;
                    let h2 = build_hankel(&solved2.solution.moments, &basis2)
                        .expect("moments cover B'·B'");
                    let kernel_dim = h2.size() - h2.rank(opts.tau_rank);
                    trace.push(solved2.record(t, Stage::Harvest, Some(kernel_dim)));
                    info!(
                        "t = {t}: quotient basis of size {}, objective {objective2:.8}, kernel {kernel_dim}",
                        basis2.len()
                    );
                    if solved2.gap() || !runner.equal(objective2, f_prev) {
                        break;
                    }
                    if kernel_dim == 0 {
                        accepted = Some((family2, basis2, solved2));
                        break 'ladder;
                    }
                    // a complete family is final, so a kernel left on B' is
                    // harvested again in place rather than at a higher degree
                    if !family2.is_complete() {
                        break;
                    }
                    let Ok((family3, basis3)) =
                        extend_in_quotient(&family2, &kernel(&h2, opts.tau_rank), completion)
                    else {
                        break;
                    };
                    if basis3.len() >= basis2.len() {
                        break;
                    }
                    let started = Instant::now();
                    solved2 = runner.relax(t, Stage::Harvest, &basis3, &family3, started)?;
                    (family2, basis2) = (family3, basis3);
                }
            }
        }
        let Some((family2, basis2, solved2)) = accepted else {
            if tried.is_empty() {
                warn!("t = {t}: no usable completion after kernel harvest");
            }
            t += 1;
            continue;
        };
        let objective2 = solved2.solution.primal_objective;

        let flat_extension = extend_moments(&solved2.solution.moments, &family2, &basis2)
            .ok()
            .and_then(|ext| flat_extension_test(&ext, &basis2, opts.tau_rank).ok())
            .unwrap_or(false);
        let mult = build_multiplication_matrices(&family2, &basis2)?;
        let points = extract_points(&mult, opts.seed, &opts.roots)?;
        let certificates = certify(&points, f, &family2);
        return Ok(MinimizerResult {
            minimum: objective2,
            quotient_basis: basis2,
            border_basis: family2,
            points,
            certificates,
            flat_extension,
            trace,
        });
    }
}
