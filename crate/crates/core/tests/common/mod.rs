#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use polymin::{parse_polynomial, Polynomial};

pub const MOTZKIN: &str = "x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1";
pub const ROBINSON: &str =
    "1 + x^6 - x^4 - x^2 + y^6 - y^4 - y^2 - x^4*y^2 - x^2*y^4 + 3*x^2*y^2";
/// Unbounded below; its minimum over the real critical points is what the
/// relaxations see.
pub const CUBIC: &str = "-12*x^3 + 3*x*y^2 + 4*y^3 - 16*x^2*y + 48*x^2 - 12*y^2";
pub const LEEP_STARR: &str = "16 + x^2*y^4 + 2*x^2*y^3 - 4*x^3*y^3 + 4*x*y^2 + 20*x^2*y^2 \
     + 8*x^3*y^2 + 6*x^4*y^2 + 8*x*y - 16*x^2*y";

pub fn poly(s: &str) -> Polynomial {
    parse_polynomial(s, &["x", "y"]).unwrap()
}

/// Term list of a polynomial for fast repeated evaluation.
pub struct Compiled {
    terms: Vec<(Vec<i32>, f64)>,
    n: usize,
}

impl Compiled {
    pub fn new(f: &Polynomial) -> Self {
        Compiled {
            terms: f
                .terms()
                .map(|(m, c)| (m.exponents().iter().map(|&e| e as i32).collect(), c))
                .collect(),
            n: f.n_vars(),
        }
    }

    /// Value, gradient and Hessian in one pass over the terms.
    pub fn jet(&self, z: &[f64], hessian: bool) -> (f64, DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let mut v = 0.0;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        // ∂^d x^k for d = 0, 1, 2
        let part = |k: i32, x: f64, d: i32| -> f64 {
            match d {
                0 => x.powi(k),
                1 if k >= 1 => k as f64 * x.powi(k - 1),
                2 if k >= 2 => (k * (k - 1)) as f64 * x.powi(k - 2),
                _ => 0.0,
            }
        };
        let mut p0 = vec![0.0; n];
        for (e, c) in &self.terms {
            for j in 0..n {
                p0[j] = part(e[j], z[j], 0);
            }
            let without = |skip: &[usize]| -> f64 {
                (0..n).filter(|j| !skip.contains(j)).map(|j| p0[j]).product()
            };
            v += c * without(&[]);
            for i in 0..n {
                let d1 = part(e[i], z[i], 1);
                if d1 == 0.0 {
                    continue;
                }
                g[i] += c * d1 * without(&[i]);
                if hessian {
                    h[(i, i)] += c * part(e[i], z[i], 2) * without(&[i]);
                    for k in i + 1..n {
                        let d = c * d1 * part(e[k], z[k], 1) * without(&[i, k]);
                        h[(i, k)] += d;
                        h[(k, i)] += d;
                    }
                }
            }
        }
        (v, g, h)
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(z).map(|(&k, x)| x.powi(k)).product::<f64>())
            .sum()
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        self.jet(z, false).1.iter().copied().collect()
    }

    pub fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        self.jet(z, true).2
    }
}

/// Steepest descent with Armijo backtracking, switching to Newton steps
/// wherever the Hessian is positive definite.
fn descend(f: &Compiled, mut z: Vec<f64>) -> (f64, Vec<f64>) {
    let mut v = f.value(&z);
    let mut step = 1e-2;
    for k in 0..400 {
        let (_, g, h) = f.jet(&z, k >= 20);
        if g.norm() <= 1e-12 * (1.0 + v.abs()) {
            break;
        }
        let newton = (k >= 20).then(|| h.cholesky()).flatten().map(|ch| ch.solve(&g));
        let (dir, mut t) = match newton {
            Some(ref d) => (d.clone(), 1.0),
            None => {
                step *= 2.0;
                (g.clone(), step)
            }
        };
        let slope = dir.dot(&g);
        loop {
            let trial: Vec<f64> = z.iter().zip(dir.iter()).map(|(x, d)| x - t * d).collect();
            let tv = f.value(&trial);
            if tv <= v - 1e-4 * t * slope || (tv <= v && t < 1e-8) {
                let stalled = v - tv <= 1e-16 * (1.0 + v.abs()) && newton.is_some();
                z = trial;
                v = tv;
                if stalled {
                    return (v, z);
                }
                break;
            }
            t *= 0.5;
            if t < 1e-18 {
                return (v, z);
            }
        }
        if newton.is_none() {
            step = t;
        }
    }
    (v, z)
}

pub struct Oracle {
    pub minimum: f64,
    /// Distinct points attaining `minimum` up to `1e-6 (1 + |minimum|)`.
    pub minimizers: Vec<Vec<f64>>,
}

/// Multistart gradient descent from a `grid × grid` lattice over `[-r, r]^2`.
pub fn oracle(f: &Polynomial, grid: usize, r: f64) -> Oracle {
    let c = Compiled::new(f);
    let mut ends = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            let at = |k: usize| -r + 2.0 * r * k as f64 / (grid - 1) as f64;
            ends.push(descend(&c, vec![at(i), at(j)]));
        }
    }
    let minimum = ends.iter().map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
    let mut minimizers: Vec<Vec<f64>> = Vec::new();
    for (v, z) in ends {
        if v <= minimum + 1e-6 * (1.0 + minimum.abs())
            && !minimizers
                .iter()
                .any(|p| (p[0] - z[0]).hypot(p[1] - z[1]) < 1e-3)
        {
            minimizers.push(z);
        }
    }
    Oracle {
        minimum,
        minimizers,
    }
}
