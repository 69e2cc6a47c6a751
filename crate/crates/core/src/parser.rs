//! Recursive-descent parser and printer for polynomial expressions.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := ('-' | '+') factor | base ('^' uint)?
//! base   := number | identifier | '(' expr ')'
//! ```
//!
//! Products must be written with an explicit `*`.

use thiserror::Error;

use crate::poly::{Monomial, Polynomial};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    fn new(offset: usize, message: impl Into<String>) -> Self {
        ParseError {
            offset,
            message: message.into(),
        }
    }
}

/// Checks `[a-zA-Z_][a-zA-Z0-9_]*`.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Variable names together with the text being parsed.
pub struct ParseContext<'a> {
    variable_names: Vec<&'a str>,
    source: &'a str,
    pos: usize,
}

impl<'a> ParseContext<'a> {
    pub fn new(source: &'a str, vars: &'a [impl AsRef<str>]) -> Result<Self, ParseError> {
        let variable_names: Vec<&str> = vars.iter().map(|v| v.as_ref()).collect();
        if variable_names.is_empty() {
            return Err(ParseError::new(0, "no variables declared"));
        }
        for (i, v) in variable_names.iter().enumerate() {
            if !is_identifier(v) {
                return Err(ParseError::new(0, format!("invalid variable name `{v}`")));
            }
            if variable_names[..i].contains(v) {
                return Err(ParseError::new(0, format!("duplicate variable name `{v}`")));
            }
        }
        Ok(ParseContext {
            variable_names,
            source,
            pos: 0,
        })
    }

    fn n_vars(&self) -> usize {
        self.variable_names.len()
    }

    fn bytes(&self) -> &[u8] {
        self.source.as_bytes()
    }

    fn skip_ws(&mut self) {
        while self.pos < self.source.len() && self.bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes().get(self.pos).copied()
    }

    fn describe_here(&self) -> String {
        match self.source[self.pos..].chars().next() {
            Some(c) => format!("`{c}`"),
            None => "end of input".to_string(),
        }
    }

    pub fn parse(mut self) -> Result<Polynomial, ParseError> {
        if self.peek().is_none() {
            return Err(ParseError::new(self.pos, "empty input"));
        }
        let p = self.expr()?;
        if self.peek().is_some() {
            let msg = if self.bytes()[self.pos] == b')' {
                "unbalanced `)`".to_string()
            } else {
                format!("unexpected {}", self.describe_here())
            };
            return Err(ParseError::new(self.pos, msg));
        }
        Ok(p)
    }

    fn expr(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = exact_add(&acc, &self.term()?, 1.0);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = exact_add(&acc, &self.term()?, -1.0);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            acc = exact_mul(&acc, &self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Polynomial, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                return Ok(self.factor()?.scale(-1.0));
            }
            Some(b'+') => {
                self.pos += 1;
                return self.factor();
            }
            _ => {}
        }
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.uint_exponent()?;
            let mut acc = Polynomial::constant(self.n_vars(), 1.0);
            for _ in 0..e {
                acc = exact_mul(&acc, &base);
            }
            return Ok(acc);
        }
        Ok(base)
    }

    fn uint_exponent(&mut self) -> Result<u32, ParseError> {
        let start = {
            self.skip_ws();
            self.pos
        };
        let bytes = self.bytes();
        let mut end = start;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
        }
        if end == start {
            let msg = match bytes.get(start) {
                Some(b'-') => "negative exponent".to_string(),
                _ => format!(
                    "exponent must be an unsigned integer literal, found {}",
                    self.describe_here()
                ),
            };
            return Err(ParseError::new(start, msg));
        }
        if matches!(bytes.get(end), Some(b'.') | Some(b'e') | Some(b'E')) {
            return Err(ParseError::new(end, "fractional exponent"));
        }
        self.pos = end;
        self.source[start..end]
            .parse()
            .map_err(|_| ParseError::new(start, "exponent out of range"))
    }

    fn base(&mut self) -> Result<Polynomial, ParseError> {
        let start = self.pos;
        match self.peek() {
            None => Err(ParseError::new(self.pos, "unexpected end of input")),
            Some(b'(') => {
                let open = self.pos;
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(ParseError::new(
                        open,
                        format!(
                            "unbalanced `(`: expected `)` before {}",
                            self.describe_here()
                        ),
                    ));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let s = self.pos;
                let bytes = self.bytes();
                let mut e = s;
                while e < bytes.len() && (bytes[e].is_ascii_alphanumeric() || bytes[e] == b'_') {
                    e += 1;
                }
                let name = &self.source[s..e];
                match self.variable_names.iter().position(|v| *v == name) {
                    Some(i) => {
                        self.pos = e;
                        Ok(Polynomial::var(self.n_vars(), i))
                    }
                    None => Err(ParseError::new(s, format!("unknown identifier `{name}`"))),
                }
            }
            Some(_) => {
                let _ = start;
                Err(ParseError::new(
                    self.pos,
                    format!("unexpected {}", self.describe_here()),
                ))
            }
        }
    }

    fn number(&mut self) -> Result<Polynomial, ParseError> {
        let bytes = self.bytes();
        let s = self.pos;
        let mut e = s;
        while e < bytes.len() && bytes[e].is_ascii_digit() {
            e += 1;
        }
        if e < bytes.len() && bytes[e] == b'.' {
            e += 1;
            while e < bytes.len() && bytes[e].is_ascii_digit() {
                e += 1;
            }
        }
        if e < bytes.len() && (bytes[e] == b'e' || bytes[e] == b'E') {
            let mut k = e + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            let digits = k;
            while k < bytes.len() && bytes[k].is_ascii_digit() {
                k += 1;
            }
            if k > digits {
                e = k;
            }
        }
        let text = &self.source[s..e];
        let v: f64 = text
            .parse()
            .map_err(|_| ParseError::new(s, format!("malformed number `{text}`")))?;
        self.pos = e;
        Ok(Polynomial::constant(self.n_vars(), v))
    }
}

// Parsing must be exact (no relative pruning) so that printing round-trips.
fn exact_add(a: &Polynomial, b: &Polynomial, s: f64) -> Polynomial {
    Polynomial::from_terms(
        a.n_vars(),
        a.terms()
            .map(|(m, c)| (m.clone(), c))
            .chain(b.terms().map(|(m, c)| (m.clone(), s * c))),
    )
}

fn exact_mul(a: &Polynomial, b: &Polynomial) -> Polynomial {
    let mut terms = Vec::with_capacity(a.len() * b.len());
    for (ma, ca) in a.terms() {
        for (mb, cb) in b.terms() {
            terms.push((ma.mul(mb), ca * cb));
        }
    }
    Polynomial::from_terms(a.n_vars(), terms)
}

/// Parses `text` as a polynomial in the ordered variables `vars`.
pub fn parse_polynomial(text: &str, vars: &[impl AsRef<str>]) -> Result<Polynomial, ParseError> {
    ParseContext::new(text, vars)?.parse()
}

fn format_coeff(c: f64) -> String {
    let a = c.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{c:e}")
    } else {
        format!("{c}")
    }
}

/// Prints terms in descending graded-lex order, e.g. `x^2 - 1`.
pub fn format_polynomial(p: &Polynomial, vars: &[impl AsRef<str>]) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (k, (m, c)) in p.terms().rev().enumerate() {
        let neg = c.is_sign_negative();
        if k == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let a = c.abs();
        if m.is_one() {
            out.push_str(&format_coeff(a));
        } else if a == 1.0 {
            out.push_str(&m.format_with(vars));
        } else {
            out.push_str(&format_coeff(a));
            out.push('*');
            out.push_str(&m.format_with(vars));
        }
    }
    out
}

/// Renders a monomial, e.g. `x^2*y`.
pub fn format_monomial(m: &Monomial, vars: &[impl AsRef<str>]) -> String {
    m.format_with(vars)
}

#[cfg(test)]
mod tests {
    use super::*;

    const XY: [&str; 2] = ["x", "y"];

    #[test]
    fn motzkin_parses_to_four_terms() {
        let p = parse_polynomial("1 + x^4*y^2 + x^2*y^4 - 3*x^2*y^2", &XY).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.coeff(&Monomial::new(vec![2, 2])), -3.0);
        assert_eq!(
            format_polynomial(&p, &XY),
            "x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1"
        );
    }

    #[test]
    fn cubic_parses_to_six_terms() {
        let p = parse_polynomial(
            "-12*x^3 + 3*x*y^2 + 4*y^3 - 16*x^2*y + 48*x^2 - 12*y^2",
            &XY,
        )
        .unwrap();
        assert_eq!(p.len(), 6);
        assert_eq!(p.coeff(&Monomial::new(vec![3, 0])), -12.0);
    }

    #[test]
    fn parenthesized_exponent_rejected() {
        let e = parse_polynomial("x^(2)", &XY).unwrap_err();
        assert_eq!(e.offset, 2);
    }

    #[test]
    fn error_cases() {
        assert_eq!(
            parse_polynomial("", &XY).unwrap_err().message,
            "empty input"
        );
        assert_eq!(parse_polynomial("   ", &XY).unwrap_err().offset, 3);
        let e = parse_polynomial("x + z", &XY).unwrap_err();
        assert_eq!(
            (e.offset, e.message.as_str()),
            (4, "unknown identifier `z`")
        );
        assert!(parse_polynomial("x^-1", &XY)
            .unwrap_err()
            .message
            .contains("negative"));
        assert!(parse_polynomial("x^1.5", &XY)
            .unwrap_err()
            .message
            .contains("fractional"));
        assert_eq!(parse_polynomial("(x + y", &XY).unwrap_err().offset, 0);
        assert!(parse_polynomial("x + y)", &XY)
            .unwrap_err()
            .message
            .contains("unbalanced"));
        assert!(parse_polynomial("2x", &XY).is_err());
        assert!(parse_polynomial("x y", &XY).is_err());
        assert!(parse_polynomial("x", &[] as &[&str]).is_err());
    }

    #[test]
    fn numbers_and_unary_minus() {
        let p = parse_polynomial("-x^2 + 1.5e1*y - .25", &XY).unwrap();
        assert_eq!(p.coeff(&Monomial::new(vec![2, 0])), -1.0);
        assert_eq!(p.coeff(&Monomial::new(vec![0, 1])), 15.0);
        assert_eq!(p.coeff(&Monomial::new(vec![0, 0])), -0.25);
        let q = parse_polynomial("(x - y)^2", &XY).unwrap();
        assert_eq!(format_polynomial(&q, &XY), "x^2 - 2*x*y + y^2");
    }

    #[test]
    fn formatting_examples() {
        assert_eq!(format_polynomial(&Polynomial::zero(2), &XY), "0");
        let p = parse_polynomial("x^2 - 1", &["x"]).unwrap();
        assert_eq!(format_polynomial(&p, &["x"]), "x^2 - 1");
        let q = Polynomial::constant(2, 0.1 + 0.2);
        assert_eq!(format_polynomial(&q, &XY), "0.30000000000000004");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn poly_strategy() -> impl Strategy<Value = Polynomial> {
            prop::collection::vec(
                (
                    (0u32..5, 0u32..5),
                    prop_oneof![
                        (-1000i64..1000).prop_map(|v| v as f64 / 8.0),
                        any::<f64>().prop_filter("finite", |v| v.is_finite()),
                    ],
                ),
                0..8,
            )
            .prop_map(|ts| {
                Polynomial::from_terms(
                    2,
                    ts.into_iter()
                        .map(|((a, b), c)| (Monomial::new(vec![a, b]), c)),
                )
            })
        }

        proptest! {
            #[test]
            fn format_parse_round_trip(p in poly_strategy()) {
                let text = format_polynomial(&p, &XY);
                let q = parse_polynomial(&text, &XY).unwrap();
                prop_assert_eq!(p, q, "{}", text);
            }

            #[test]
            fn parser_is_total(s in "[xy0-9+*^()\\-. e]{0,24}") {
                match parse_polynomial(&s, &XY) {
                    Ok(_) => {}
                    Err(e) => prop_assert!(e.offset <= s.len()),
                }
            }
        }
    }
}
