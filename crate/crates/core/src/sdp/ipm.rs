//! Infeasible-start primal-dual interior-point method for block-diagonal
//! semidefinite programs
//!
//! ```text
//! (P)  min <C, X>   s.t. <A_i, X> = b_i,  X ⪰ 0
//! (D)  max b^T y    s.t. sum_i y_i A_i + Z = C,  Z ⪰ 0
//! ```
//!
//! Directions use Nesterov-Todd scaling and a Mehrotra predictor-corrector
//! step. Iterates stay in the interior of the cone, so on convergence the
//! solution approaches the analytic center of the optimal face.

use log::{debug, trace};
use std::ops::SubAssign;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

/// Problem data. `a[i][k]` is block `k` of constraint matrix `A_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardSdp {
    pub block_sizes: Vec<usize>,
    pub c: Vec<DMatrix<f64>>,
    pub a: Vec<Vec<DMatrix<f64>>>,
    pub b: DVector<f64>,
}

impl StandardSdp {
    pub fn n_constraints(&self) -> usize {
        self.b.len()
    }

    /// The same problem after `X -> D^{-1} X D^{-1}`, `Z -> D Z D` with one
    /// positive diagonal `D` per block. `y` and both objectives are unchanged.
    pub fn congruence(&self, d: &[DVector<f64>]) -> StandardSdp {
        let scale = |blocks: &[DMatrix<f64>]| -> Vec<DMatrix<f64>> {
            blocks
                .iter()
                .zip(d)
                .map(|(m, dk)| {
                    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * dk[i] * dk[j])
                })
                .collect()
        };
        StandardSdp {
            block_sizes: self.block_sizes.clone(),
            c: scale(&self.c),
            a: self.a.iter().map(|ai| scale(ai)).collect(),
            b: self.b.clone(),
        }
    }

    fn apply_a(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_fn(self.b.len(), |i, _| block_dot(&self.a[i], x))
    }

    fn apply_at(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self
            .block_sizes
            .iter()
            .map(|&n| DMatrix::zeros(n, n))
            .collect();
        for (i, ai) in self.a.iter().enumerate() {
            if y[i] != 0.0 {
                for (o, a) in out.iter_mut().zip(ai) {
                    *o += a * y[i];
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IpmOptions {
    /// Relative tolerance on primal and dual infeasibility and on the gap.
    pub tol: f64,
    /// Threshold for infeasibility certificates.
    pub tol_infeasible: f64,
    pub max_iterations: usize,
    /// Multiplies the default starting point `X0 = ξ I`, `Z0 = η I`.
    pub start_scale: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            tol: 1e-8,
            tol_infeasible: 1e-8,
            max_iterations: 200,
            start_scale: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IpmStatus {
    Optimal,
    /// A certificate `y` with `-A^T y ⪰ 0`, `b^T y > 0` was found.
    PrimalInfeasible,
    /// A certificate `X ⪰ 0` with `A(X) = 0`, `<C, X> < 0` was found.
    DualInfeasible,
    /// Step lengths collapsed or the Schur complement broke down.
    Stalled,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct IpmResult {
    pub status: IpmStatus,
    pub x: Vec<DMatrix<f64>>,
    pub y: DVector<f64>,
    pub z: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    /// `(<C,X>, b^T y)` at every iterate.
    pub history: Vec<(f64, f64)>,
}

impl IpmResult {
    pub fn relative_gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
            / (1.0 + self.primal_objective.abs() + self.dual_objective.abs())
    }
}

pub(crate) fn block_dot(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn block_norm(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Nesterov-Todd scaling of one block: `W = G G^T` with `W Z W = X` and
/// `G^{-1} X G^{-T} = G^T Z G = diag(v)`.
struct Scaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    v: DVector<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let lx = Cholesky::new(x.clone())?.l();
    let lz = Cholesky::new(z.clone())?.l();
    let svd = (lz.transpose() * &lx).svd(false, true);
    let vt = svd.v_t?;
    let s = svd.singular_values;
    if s.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let s_isqrt = DMatrix::from_diagonal(&s.map(|v| 1.0 / v.sqrt()));
    let s_sqrt = DMatrix::from_diagonal(&s.map(|v| v.sqrt()));
    let g = &lx * vt.transpose() * &s_isqrt;
    let lx_inv = lx.solve_lower_triangular(&DMatrix::identity(x.nrows(), x.nrows()))?;
    let g_inv = &s_sqrt * &vt * lx_inv;
    Some(Scaling { g, g_inv, v: s })
}

/// Largest step `α <= 1` keeping `X + α ΔX ⪰ 0`, for every block.
fn max_step(x: &[DMatrix<f64>], dx: &[DMatrix<f64>]) -> f64 {
    let mut alpha: f64 = 1.0;
    for (xb, dxb) in x.iter().zip(dx) {
        let Some(ch) = Cholesky::new(xb.clone()) else {
            return 0.0;
        };
        let l = ch.l();
        let Some(t) = l.solve_lower_triangular(dxb) else {
            return 0.0;
        };
        let Some(m) = l.solve_lower_triangular(&t.transpose()) else {
            return 0.0;
        };
        let lmin = SymmetricEigen::new(sym(&m)).eigenvalues.min();
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    alpha
}

struct Residuals {
    rp: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    relgap: f64,
    mu: f64,
}

pub fn solve_standard(p: &StandardSdp, opts: &IpmOptions) -> IpmResult {
    let m = p.n_constraints();
    let n_total: usize = p.block_sizes.iter().sum();
    let b_norm = p.b.norm();
    let c_norm = block_norm(&p.c);

    // starting point after SDPT3
    let mut x = Vec::new();
    let mut z = Vec::new();
    for (k, &n) in p.block_sizes.iter().enumerate() {
        let nf = n as f64;
        let mut xi: f64 = 10.0f64.max(nf.sqrt());
        let mut eta: f64 = 10.0f64.max(nf.sqrt()).max(p.c[k].norm());
        for i in 0..m {
            let an = p.a[i][k].norm();
            xi = xi.max(nf * (1.0 + p.b[i].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        x.push(DMatrix::identity(n, n) * (xi * opts.start_scale));
        z.push(DMatrix::identity(n, n) * (eta * opts.start_scale));
    }
    let mut y = DVector::zeros(m);

    let residuals = |x: &[DMatrix<f64>], y: &DVector<f64>, z: &[DMatrix<f64>]| {
        let rp = &p.b - p.apply_a(x);
        let aty = p.apply_at(y);
        let rd: Vec<DMatrix<f64>> =
            p.c.iter()
                .zip(&aty)
                .zip(z)
                .map(|((c, a), zz)| c - a - zz)
                .collect();
        let pobj = block_dot(&p.c, x);
        let dobj = p.b.dot(y);
        let gap = block_dot(x, z);
        Residuals {
            pinf: rp.norm() / (1.0 + b_norm),
            dinf: block_norm(&rd) / (1.0 + c_norm),
            relgap: (pobj - dobj).abs().max(gap.abs()) / (1.0 + pobj.abs() + dobj.abs()),
            mu: gap / n_total.max(1) as f64,
            rp,
            rd,
            pobj,
            dobj,
        }
    };

    let mut history = Vec::new();
    let mut status = IpmStatus::IterationLimit;
    let mut iterations = 0;
    let mut best: Option<(f64, Vec<DMatrix<f64>>, DVector<f64>, Vec<DMatrix<f64>>)> = None;
    let mut slow_steps = 0;

    for iter in 0..opts.max_iterations {
        iterations = iter;
        let r = residuals(&x, &y, &z);
        history.push((r.pobj, r.dobj));
        trace!(
            "ipm {iter}: pobj {:.10e} dobj {:.10e} pinf {:.2e} dinf {:.2e} gap {:.2e}",
            r.pobj,
            r.dobj,
            r.pinf,
            r.dinf,
            r.relgap
        );
        let merit = r.pinf.max(r.dinf).max(r.relgap);
        if best.as_ref().is_none_or(|(b, ..)| merit < *b) {
            best = Some((merit, x.clone(), y.clone(), z.clone()));
        }
        if r.pinf <= opts.tol && r.dinf <= opts.tol && r.relgap <= opts.tol {
            status = IpmStatus::Optimal;
            break;
        }
        // infeasibility certificates
        if r.dobj > 0.0 {
            let aty_z: Vec<DMatrix<f64>> = p.c.iter().zip(&r.rd).map(|(c, rd)| c - rd).collect();
            if block_norm(&aty_z) / r.dobj < opts.tol_infeasible {
                status = IpmStatus::PrimalInfeasible;
                break;
            }
        }
        if r.pobj < 0.0 {
            let ax = &p.b - &r.rp;
            if ax.norm() / (-r.pobj) < opts.tol_infeasible {
                status = IpmStatus::DualInfeasible;
                break;
            }
        }

        let mut scalings = Vec::with_capacity(x.len());
        for (xb, zb) in x.iter().zip(&z) {
            match nt_scaling(xb, zb) {
                Some(s) => scalings.push(s),
                None => break,
            }
        }
        if scalings.len() != x.len() {
            debug!("ipm {iter}: iterate left the cone numerically");
            status = IpmStatus::Stalled;
            break;
        }

        // Schur complement M = Ã Ã^T with row i of Ã = svec(G^T A_i G),
        // factored through a QR of Ã^T so M is never formed explicitly.
        let dim: usize = p.block_sizes.iter().map(|n| n * (n + 1) / 2).sum();
        let mut at = DMatrix::zeros(dim, m);
        for (i, ai) in p.a.iter().enumerate() {
            let mut off = 0;
            for (a, s) in ai.iter().zip(&scalings) {
                let scaled = s.g.transpose() * a * &s.g;
                off = write_svec(&scaled, &mut at, off, i);
            }
        }
        let Some(schur) = SchurFactor::new(at) else {
            debug!("ipm {iter}: Schur complement is singular");
            status = IpmStatus::Stalled;
            break;
        };
        let mut rd_scaled = DVector::zeros(dim);
        {
            let mut off = 0;
            for (rd, s) in r.rd.iter().zip(&scalings) {
                let m = s.g.transpose() * rd * &s.g;
                off = write_svec_vec(&m, &mut rd_scaled, off);
            }
        }

        // Newton system in scaled variables: ΔX̃ + ΔZ̃ = K, A(ΔX) = r_p,
        // A^T Δy + ΔZ = R_d.
        let direction = |k: &[DMatrix<f64>]| {
            let mut q = rd_scaled.clone();
            let mut off = 0;
            for kb in k {
                let n = kb.nrows();
                let mut kv = DVector::zeros(n * (n + 1) / 2);
                write_svec_vec(kb, &mut kv, 0);
                q.rows_mut(off, kv.len()).sub_assign(&kv);
                off += kv.len();
            }
            // rhs = r_p - A(G K G^T) + A(W R_d W) = r_p + Ã q
            let dy = schur.solve(&r.rp, &q);
            let atdy = p.apply_at(&dy);
            let dz: Vec<DMatrix<f64>> = r.rd.iter().zip(&atdy).map(|(rd, a)| rd - a).collect();
            let dx: Vec<DMatrix<f64>> = scalings
                .iter()
                .zip(k)
                .zip(&dz)
                .map(|((s, kb), dzb)| {
                    let dxs = kb - s.g.transpose() * dzb * &s.g;
                    sym(&(&s.g * dxs * s.g.transpose()))
                })
                .collect();
            (dx, dy, dz)
        };

        // predictor
        let k_aff: Vec<DMatrix<f64>> = scalings
            .iter()
            .map(|s| DMatrix::from_diagonal(&(-&s.v)))
            .collect();
        let (dx_a, _dy_a, dz_a) = direction(&k_aff);
        let ap = max_step(&x, &dx_a);
        let ad = max_step(&z, &dz_a);
        let x_aff: Vec<DMatrix<f64>> = x.iter().zip(&dx_a).map(|(a, d)| a + d * ap).collect();
        let z_aff: Vec<DMatrix<f64>> = z.iter().zip(&dz_a).map(|(a, d)| a + d * ad).collect();
        let mu_aff = block_dot(&x_aff, &z_aff) / n_total as f64;
        let sigma = if r.mu > 0.0 {
            (mu_aff / r.mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };

        // corrector
        let k_cor: Vec<DMatrix<f64>> = scalings
            .iter()
            .zip(&dx_a)
            .zip(&dz_a)
            .map(|((s, dxb), dzb)| {
                let n = s.v.len();
                let dxs = &s.g_inv * dxb * s.g_inv.transpose();
                let dzs = s.g.transpose() * dzb * &s.g;
                let cross = sym(&(dxs * dzs));
                let mut rc = -cross;
                for i in 0..n {
                    rc[(i, i)] += sigma * r.mu - s.v[i] * s.v[i];
                }
                DMatrix::from_fn(n, n, |i, j| 2.0 * rc[(i, j)] / (s.v[i] + s.v[j]))
            })
            .collect();
        let (dx, dy, dz) = direction(&k_cor);
        let ap = max_step(&x, &dx);
        let ad = max_step(&z, &dz);
        let gamma = (0.9 + 0.09 * ap.min(ad)).min(0.99);
        let sp = (gamma * ap).min(1.0);
        let sd = (gamma * ad).min(1.0);
        for (xb, d) in x.iter_mut().zip(&dx) {
            *xb += d * sp;
            *xb = sym(xb);
        }
        for (zb, d) in z.iter_mut().zip(&dz) {
            *zb += d * sd;
            *zb = sym(zb);
        }
        y += dy * sd;

        if sp < 1e-8 && sd < 1e-8 {
            slow_steps += 1;
            if slow_steps >= 3 {
                debug!("ipm {iter}: step lengths collapsed");
                status = IpmStatus::Stalled;
                iterations = iter + 1;
                break;
            }
        } else {
            slow_steps = 0;
        }
        iterations = iter + 1;
    }

    if !matches!(
        status,
        IpmStatus::Optimal | IpmStatus::PrimalInfeasible | IpmStatus::DualInfeasible
    ) {
        if let Some((_, bx, by, bz)) = best {
            x = bx;
            y = by;
            z = bz;
        }
    }
    let r = residuals(&x, &y, &z);
    IpmResult {
        status,
        primal_objective: r.pobj,
        dual_objective: r.dobj,
        primal_infeasibility: r.pinf,
        dual_infeasibility: r.dinf,
        x,
        y,
        z,
        iterations,
        history,
    }
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Writes `svec(m)` (upper triangle, off-diagonals times √2) into column
/// `col` of `out` starting at row `off`; returns the next free row.
fn write_svec(m: &DMatrix<f64>, out: &mut DMatrix<f64>, mut off: usize, col: usize) -> usize {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..=j {
            out[(off, col)] = if i == j {
                m[(i, j)]
            } else {
                SQRT2 * 0.5 * (m[(i, j)] + m[(j, i)])
            };
            off += 1;
        }
    }
    off
}

fn write_svec_vec(m: &DMatrix<f64>, out: &mut DVector<f64>, mut off: usize) -> usize {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..=j {
            out[off] = if i == j {
                m[(i, j)]
            } else {
                SQRT2 * 0.5 * (m[(i, j)] + m[(j, i)])
            };
            off += 1;
        }
    }
    off
}

/// `M = R^T R` from the QR factorization `Ã^T = Q R`.
struct SchurFactor {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl SchurFactor {
    fn new(at: DMatrix<f64>) -> Option<Self> {
        let (dim, m) = at.shape();
        if dim < m {
            return None;
        }
        let qr = at.qr();
        let r = qr.r();
        let diag_max = (0..m).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if (0..m).any(|i| !(r[(i, i)].abs() > 1e-15 * diag_max)) {
            return None;
        }
        Some(SchurFactor { q: qr.q(), r })
    }

    /// Solves `M Δy = r_p + Ã q`.
    fn solve(&self, rp: &DVector<f64>, q: &DVector<f64>) -> DVector<f64> {
        let mut t = self
            .r
            .tr_solve_upper_triangular(rp)
            .expect("nonsingular triangular factor");
        t += self.q.transpose() * q;
        self.r
            .solve_upper_triangular(&t)
            .expect("nonsingular triangular factor")
    }
}
