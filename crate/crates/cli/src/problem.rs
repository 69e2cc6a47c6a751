//! Problem files.
//!
//! ```text
//! # Motzkin
//! vars: x, y
//! minimize: x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1
//! option t_max = 8
//! ```

use std::path::Path;

use polymin::parser::is_identifier;
use polymin::{parse_polynomial, Polynomial};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("no `minimize:` line")]
    MissingObjective,
}

fn syntax(line: usize, message: impl Into<String>) -> ProblemError {
    ProblemError::Syntax {
        line,
        message: message.into(),
    }
}

/// Overrides that may appear as `option <name> = <value>`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProblemOptions {
    pub t_max: Option<u32>,
    pub seed: Option<u64>,
    pub tol_rank: Option<f64>,
    pub tol_gap: Option<f64>,
    pub tol_min: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemFile {
    pub vars: Vec<String>,
    /// The expression as written after `minimize:`.
    pub objective_text: String,
    pub objective: Polynomial,
    pub options: ProblemOptions,
}

impl ProblemFile {
    pub fn read(path: &Path) -> Result<Self, ProblemError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProblemError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ProblemError> {
        let mut vars: Option<Vec<String>> = None;
        let mut objective: Option<(String, Polynomial)> = None;
        let mut options = ProblemOptions::default();

        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix("vars:") {
                if vars.is_some() {
                    return Err(syntax(line, "second `vars:` line"));
                }
                let names: Vec<String> = rest.split(',').map(|s| s.trim().to_string()).collect();
                for (i, name) in names.iter().enumerate() {
                    if !is_identifier(name) {
                        return Err(syntax(line, format!("`{name}` is not a variable name")));
                    }
                    if names[..i].contains(name) {
                        return Err(syntax(line, format!("variable `{name}` listed twice")));
                    }
                }
                vars = Some(names);
            } else if let Some(rest) = content.strip_prefix("minimize:") {
                let Some(names) = &vars else {
                    return Err(syntax(line, "`minimize:` before `vars:`"));
                };
                if objective.is_some() {
                    return Err(syntax(line, "second `minimize:` line"));
                }
                let expr = rest.trim();
                let p = parse_polynomial(expr, names).map_err(|e| syntax(line, e.to_string()))?;
                objective = Some((expr.to_string(), p));
            } else if let Some(rest) = content.strip_prefix("option ") {
                let (name, value) = rest
                    .split_once('=')
                    .ok_or_else(|| syntax(line, "expected `option <name> = <value>`"))?;
                set_option(&mut options, name.trim(), value.trim())
                    .map_err(|m| syntax(line, m))?;
            } else {
                return Err(syntax(line, format!("unrecognised line `{content}`")));
            }
        }

        // a `minimize:` line cannot have been accepted without `vars:`
        let (objective_text, objective) = objective.ok_or(ProblemError::MissingObjective)?;
        let vars = vars.expect("vars precede minimize");
        Ok(ProblemFile {
            vars,
            objective_text,
            objective,
            options,
        })
    }
}

fn set_option(opts: &mut ProblemOptions, name: &str, value: &str) -> Result<(), String> {
    fn num<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, String> {
        value
            .parse()
            .map_err(|_| format!("bad value `{value}` for option {name}"))
    }
    fn tol(name: &str, value: &str) -> Result<f64, String> {
        let v: f64 = num(name, value)?;
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(format!("option {name} must be positive"))
        }
    }
    match name {
        "t_max" => opts.t_max = Some(num(name, value)?),
        "seed" => opts.seed = Some(num(name, value)?),
        "tol_rank" => opts.tol_rank = Some(tol(name, value)?),
        "tol_gap" => opts.tol_gap = Some(tol(name, value)?),
        "tol_min" => opts.tol_min = Some(tol(name, value)?),
        _ => return Err(format!("unknown option `{name}`")),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn motzkin_file() {
        let p = ProblemFile::parse(
            "# Motzkin\nvars: x, y\n\nminimize: x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1  # f\noption t_max = 7\n",
        )
        .unwrap();
        assert_eq!(p.vars, ["x", "y"]);
        assert_eq!(p.objective.len(), 4);
        assert_eq!(p.options.t_max, Some(7));
        assert_eq!(p.objective_text, "x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1");
    }

    #[test]
    fn options_may_come_first() {
        let p = ProblemFile::parse("option tol_min = 1e-5\noption seed = 3\nvars: a\nminimize: a^2")
            .unwrap();
        assert_eq!(p.options.tol_min, Some(1e-5));
        assert_eq!(p.options.seed, Some(3));
    }

    #[test]
    fn missing_minimize() {
        assert_eq!(
            ProblemFile::parse("vars: x, y\n").unwrap_err(),
            ProblemError::MissingObjective
        );
        assert_eq!(
            ProblemFile::parse("# nothing here\n").unwrap_err(),
            ProblemError::MissingObjective
        );
    }

    #[test]
    fn minimize_before_vars() {
        let err = ProblemFile::parse("minimize: x^2\nvars: x").unwrap_err();
        assert!(matches!(err, ProblemError::Syntax { line: 1, .. }), "{err}");
    }

    #[test]
    fn rejected_lines() {
        for (src, line) in [
            ("vars: x, x\nminimize: x", 1),
            ("vars: x, 2y\nminimize: x", 1),
            ("vars: x\nminimize: x + z", 2),
            ("vars: x\nminimize: x\noption t_max = -1", 3),
            ("vars: x\nminimize: x\noption tol_gap = 0", 3),
            ("vars: x\nminimize: x\noption colour = 3", 3),
            ("vars: x\nmaximize: x", 2),
            ("vars: x\nminimize: x\nminimize: x^2", 3),
        ] {
            match ProblemFile::parse(src) {
                Err(ProblemError::Syntax { line: l, .. }) => assert_eq!(l, line, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }
}
