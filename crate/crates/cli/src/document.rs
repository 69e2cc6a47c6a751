//! Result documents and their independent verification.

use polymin::minimizer::{IterationRecord, MinimizerResult, Stage};
use polymin::{format_polynomial, parse_polynomial, Polynomial};
use serde::{Deserialize, Serialize};

use crate::problem::ProblemFile;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `|f(z) − minimum| <= value * (1 + |minimum|)`.
    pub value: f64,
    /// `‖∇f(z)‖_∞ <= gradient`.
    pub gradient: f64,
    /// `|g(z)| <= generator` for every returned generator `g`.
    pub generator: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            value: 1e-4,
            gradient: 1e-4,
            generator: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateEntry {
    pub value: f64,
    pub gradient_norm: f64,
    pub generator_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub t: u32,
    pub stage: String,
    pub hankel_size: usize,
    pub objective: f64,
    pub gap_flag: bool,
    pub kernel_dim: Option<usize>,
    pub wall_ms: f64,
}

impl From<&IterationRecord> for TraceEntry {
    fn from(r: &IterationRecord) -> Self {
        TraceEntry {
            t: r.t,
            stage: match r.stage {
                Stage::Relaxation => "relaxation",
                Stage::Harvest => "harvest",
            }
            .to_string(),
            hankel_size: r.hankel_size,
            objective: r.objective,
            gap_flag: r.gap,
            kernel_dim: r.kernel_dim,
            wall_ms: r.wall_ms,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub problem: String,
    pub vars: Vec<String>,
    /// `optimal` or `t_max_exceeded`.
    pub status: String,
    pub minimum: Option<f64>,
    /// Largest relaxation value without a duality gap.
    pub lower_bound: Option<f64>,
    pub quotient_basis: Vec<String>,
    pub generators: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub certificates: Vec<CertificateEntry>,
    pub flat_extension: bool,
    pub tolerances: Tolerances,
    pub trace: Vec<TraceEntry>,
}

fn best_bound(trace: &[IterationRecord]) -> Option<f64> {
    trace
        .iter()
        .filter(|r| !r.gap)
        .map(|r| r.objective)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
}

impl ResultDocument {
    pub fn solved(problem: &str, vars: &[String], res: &MinimizerResult) -> Self {
        ResultDocument {
            problem: problem.to_string(),
            vars: vars.to_vec(),
            status: "optimal".into(),
            minimum: Some(res.minimum),
            lower_bound: best_bound(&res.trace),
            quotient_basis: res
                .quotient_basis
                .iter()
                .map(|m| m.format_with(vars))
                .collect(),
            generators: res
                .border_basis
                .rule_polynomials()
                .iter()
                .map(|g| format_polynomial(g, vars))
                .collect(),
            points: res.points.clone(),
            certificates: res
                .certificates
                .iter()
                .map(|c| CertificateEntry {
                    value: c.value,
                    gradient_norm: c.gradient_norm,
                    generator_residual: c.generator_residual,
                })
                .collect(),
            flat_extension: res.flat_extension,
            tolerances: Tolerances::default(),
            trace: res.trace.iter().map(TraceEntry::from).collect(),
        }
    }

    /// The document emitted when the degree bound is hit before termination.
    pub fn unfinished(problem: &str, vars: &[String], trace: &[IterationRecord]) -> Self {
        ResultDocument {
            problem: problem.to_string(),
            vars: vars.to_vec(),
            status: "t_max_exceeded".into(),
            minimum: None,
            lower_bound: best_bound(trace),
            quotient_basis: Vec::new(),
            generators: Vec::new(),
            points: Vec::new(),
            certificates: Vec::new(),
            flat_extension: false,
            tolerances: Tolerances::default(),
            trace: trace.iter().map(TraceEntry::from).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize") + "\n"
    }
}

fn agrees(recorded: f64, actual: f64) -> bool {
    (recorded - actual).abs() <= 1e-9 * (1.0 + actual.abs())
}

/// Re-evaluates `f`, `∇f` and the generators at every point of `doc` and
/// returns the failed checks.
pub fn check(doc: &ResultDocument, problem: &ProblemFile) -> Vec<String> {
    let mut failures = Vec::new();
    let f = &problem.objective;
    let tol = doc.tolerances;
    if doc.vars != problem.vars {
        failures.push(format!(
            "variables {:?} differ from the problem's {:?}",
            doc.vars, problem.vars
        ));
        return failures;
    }
    let mut generators: Vec<Polynomial> = Vec::new();
    for g in &doc.generators {
        match parse_polynomial(g, &doc.vars) {
            Ok(p) => generators.push(p),
            Err(e) => failures.push(format!("generator `{g}` does not parse: {e}")),
        }
    }
    match doc.status.as_str() {
        "optimal" => {
            if doc.minimum.is_none() {
                failures.push("status optimal without a minimum".into());
            }
            if doc.points.is_empty() {
                failures.push("status optimal without points".into());
            }
            if doc.points.len() > doc.quotient_basis.len() {
                failures.push(format!(
                    "{} points exceed the quotient dimension {}",
                    doc.points.len(),
                    doc.quotient_basis.len()
                ));
            }
        }
        "t_max_exceeded" => {}
        s => failures.push(format!("unknown status `{s}`")),
    }
    if doc.certificates.len() != doc.points.len() {
        failures.push(format!(
            "{} certificates for {} points",
            doc.certificates.len(),
            doc.points.len()
        ));
    }

    let gradient = f.gradient();
    for (i, z) in doc.points.iter().enumerate() {
        if z.len() != doc.vars.len() {
            failures.push(format!("point {i} has {} coordinates", z.len()));
            continue;
        }
        let eval = |p: &Polynomial| p.evaluate(z).unwrap_or(f64::NAN);
        let value = eval(f);
        let grad = gradient.iter().map(|g| eval(g).abs()).fold(0.0, f64::max);
        let residual = generators.iter().map(|g| eval(g).abs()).fold(0.0, f64::max);
        if !(grad <= tol.gradient) {
            failures.push(format!("point {i}: gradient norm {grad:e} above {:e}", tol.gradient));
        }
        if !(residual <= tol.generator) {
            failures.push(format!(
                "point {i}: generator residual {residual:e} above {:e}",
                tol.generator
            ));
        }
        if let Some(m) = doc.minimum {
            if !((value - m).abs() <= tol.value * (1.0 + m.abs())) {
                failures.push(format!("point {i}: f = {value} but minimum is {m}"));
            }
        }
        if let Some(lb) = doc.lower_bound {
            if !(lb <= value + tol.value * (1.0 + value.abs())) {
                failures.push(format!("point {i}: f = {value} below the lower bound {lb}"));
            }
        }
        if let Some(c) = doc.certificates.get(i) {
            let recorded = [
                ("value", c.value, value),
                ("gradient_norm", c.gradient_norm, grad),
                ("generator_residual", c.generator_residual, residual),
            ];
            for (name, r, a) in recorded {
                if !agrees(r, a) {
                    failures.push(format!("point {i}: recorded {name} {r} but recomputed {a}"));
                }
            }
        }
    }
    if let (Some(m), Some(lb)) = (doc.minimum, doc.lower_bound) {
        if lb > m + tol.value * (1.0 + m.abs()) {
            failures.push(format!("lower bound {lb} above the minimum {m}"));
        }
    }
    failures
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem() -> ProblemFile {
        ProblemFile::parse("vars: x, y\nminimize: (x - 1)^2 + (y + 2)^2 + 3").unwrap()
    }

    fn document() -> ResultDocument {
        ResultDocument {
            problem: "p.prob".into(),
            vars: vec!["x".into(), "y".into()],
            status: "optimal".into(),
            minimum: Some(3.0),
            lower_bound: Some(3.0),
            quotient_basis: vec!["1".into()],
            generators: vec!["x - 1".into(), "y + 2".into()],
            points: vec![vec![1.0, -2.0]],
            certificates: vec![CertificateEntry {
                value: 3.0,
                gradient_norm: 0.0,
                generator_residual: 0.0,
            }],
            flat_extension: true,
            tolerances: Tolerances::default(),
            trace: Vec::new(),
        }
    }

    #[test]
    fn consistent_document_passes() {
        assert_eq!(check(&document(), &problem()), Vec::<String>::new());
    }

    #[test]
    fn round_trip() {
        let doc = document();
        let back: ResultDocument = serde_json::from_str(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn field_order_is_stable() {
        let json = document().to_json();
        let keys = [
            "\"problem\"", "\"vars\"", "\"status\"", "\"minimum\"", "\"lower_bound\"",
            "\"quotient_basis\"", "\"generators\"", "\"points\"", "\"certificates\"",
            "\"flat_extension\"", "\"tolerances\"", "\"trace\"",
        ];
        let positions: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn moved_point_fails() {
        let mut doc = document();
        doc.points[0][1] += 0.1;
        let failures = check(&doc, &problem());
        assert!(failures.iter().any(|m| m.contains("gradient")), "{failures:?}");
        assert!(failures.iter().any(|m| m.contains("generator residual")));
        assert!(failures.iter().any(|m| m.contains("recorded value")));
    }

    #[test]
    fn bound_above_minimum_fails() {
        let mut doc = document();
        doc.lower_bound = Some(3.5);
        assert!(!check(&doc, &problem()).is_empty());
    }

    #[test]
    fn unknown_status_fails() {
        let mut doc = document();
        doc.status = "done".into();
        assert_eq!(check(&doc, &problem()).len(), 1);
    }
}
