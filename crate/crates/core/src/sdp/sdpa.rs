//! SDPA sparse format (`.dat-s`).
//!
//! The format describes `min c^T x` subject to `sum_i F_i x_i - F_0 ⪰ 0`
//! over a block-diagonal matrix space. A negative block size marks a
//! diagonal (linear) block. Entries are `matno blkno i j value` with 1-based
//! indices and `i <= j`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::ipm::StandardSdp;
use super::MomentSDP;
use crate::poly::Monomial;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("SDPA line {line}: {message}")]
pub struct SdpaError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdpaEntry {
    /// 0 for `F_0`, `k` for `F_k`.
    pub matrix: usize,
    /// 1-based block index.
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpaProblem {
    pub n_vars: usize,
    pub block_sizes: Vec<i64>,
    pub c: Vec<f64>,
    pub entries: Vec<SdpaEntry>,
    /// Constant added to `c^T x`; kept in a comment line.
    pub objective_constant: f64,
}

const CONSTANT_TAG: &str = "* objective constant:";

impl SdpaProblem {
    pub fn to_sdpa_string(&self) -> String {
        let mut s = String::new();
        if self.objective_constant != 0.0 {
            writeln!(s, "{CONSTANT_TAG} {:e}", self.objective_constant).unwrap();
        }
        writeln!(s, "{} = mDIM", self.n_vars).unwrap();
        writeln!(s, "{} = nBLOCK", self.block_sizes.len()).unwrap();
        let sizes: Vec<String> = self.block_sizes.iter().map(|b| b.to_string()).collect();
        writeln!(s, "{} = bLOCKsTRUCT", sizes.join(" ")).unwrap();
        let c: Vec<String> = self.c.iter().map(|v| format!("{v:e}")).collect();
        writeln!(s, "{}", c.join(" ")).unwrap();
        for e in &self.entries {
            writeln!(s, "{} {} {} {} {:e}", e.matrix, e.block, e.i, e.j, e.value).unwrap();
        }
        s
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_sdpa_string())
    }

    pub fn read(path: &Path) -> Result<Self, SdpaError> {
        let text = std::fs::read_to_string(path).map_err(|e| SdpaError {
            line: 0,
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, SdpaError> {
        let mut constant = 0.0;
        // (line number, tokens) for every non-comment line
        let mut lines = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let t = raw.trim();
            if let Some(rest) = t.strip_prefix(CONSTANT_TAG) {
                constant = parse_f64(rest.trim(), line_no)?;
                continue;
            }
            if t.is_empty() || t.starts_with('"') || t.starts_with('*') {
                continue;
            }
            let cleaned: String = t
                .chars()
                .map(|ch| if ",{}()".contains(ch) { ' ' } else { ch })
                .collect();
            // anything after '=' is a label
            let body = cleaned.split('=').next().unwrap_or("");
            let toks: Vec<String> = body.split_whitespace().map(str::to_string).collect();
            if !toks.is_empty() {
                lines.push((line_no, toks));
            }
        }
        let mut it = lines.into_iter();
        let missing = |what: &str| SdpaError {
            line: text.lines().count(),
            message: format!("missing {what}"),
        };
        let (ln, toks) = it.next().ok_or_else(|| missing("mDIM"))?;
        let n_vars = parse_usize(&toks[0], ln)?;
        let (ln, toks) = it.next().ok_or_else(|| missing("nBLOCK"))?;
        let nblocks = parse_usize(&toks[0], ln)?;
        if nblocks == 0 {
            return Err(SdpaError {
                line: ln,
                message: "nBLOCK must be positive".into(),
            });
        }
        let (ln, toks) = it.next().ok_or_else(|| missing("block structure"))?;
        if toks.len() < nblocks {
            return Err(SdpaError {
                line: ln,
                message: format!("expected {nblocks} block sizes, found {}", toks.len()),
            });
        }
        let block_sizes = toks[..nblocks]
            .iter()
            .map(|t| {
                let v: i64 = t.parse().map_err(|_| SdpaError {
                    line: ln,
                    message: format!("invalid block size `{t}`"),
                })?;
                if v == 0 {
                    return Err(SdpaError {
                        line: ln,
                        message: "block size 0".into(),
                    });
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>, _>>()?;
        // the cost vector may span several lines
        let mut c = Vec::with_capacity(n_vars);
        let mut rest: Vec<(usize, Vec<String>)> = Vec::new();
        for (ln, toks) in it {
            if c.len() < n_vars {
                for t in &toks {
                    if c.len() == n_vars {
                        return Err(SdpaError {
                            line: ln,
                            message: "cost vector line has extra values".into(),
                        });
                    }
                    c.push(parse_f64(t, ln)?);
                }
            } else {
                rest.push((ln, toks));
            }
        }
        if c.len() < n_vars {
            return Err(missing("cost vector entries"));
        }
        let mut entries = Vec::with_capacity(rest.len());
        for (ln, toks) in rest {
            if toks.len() != 5 {
                return Err(SdpaError {
                    line: ln,
                    message: format!("expected 5 fields, found {}", toks.len()),
                });
            }
            let e = SdpaEntry {
                matrix: parse_usize(&toks[0], ln)?,
                block: parse_usize(&toks[1], ln)?,
                i: parse_usize(&toks[2], ln)?,
                j: parse_usize(&toks[3], ln)?,
                value: parse_f64(&toks[4], ln)?,
            };
            let err = |m: String| SdpaError {
                line: ln,
                message: m,
            };
            if e.matrix > n_vars {
                return Err(err(format!("matrix index {} exceeds mDIM", e.matrix)));
            }
            if e.block == 0 || e.block > nblocks {
                return Err(err(format!("block index {} out of range", e.block)));
            }
            let size = block_sizes[e.block - 1].unsigned_abs() as usize;
            if e.i == 0 || e.j == 0 || e.i > size || e.j > size {
                return Err(err(format!("position ({}, {}) outside block", e.i, e.j)));
            }
            if block_sizes[e.block - 1] < 0 && e.i != e.j {
                return Err(err("off-diagonal entry in a diagonal block".into()));
            }
            entries.push(e);
        }
        Ok(SdpaProblem {
            n_vars,
            block_sizes,
            c,
            entries,
            objective_constant: constant,
        })
    }

    /// Dense standard form with `y = x`, `b = -c`, `A_i = -F_i`, `C = -F_0`.
    /// Diagonal blocks become runs of 1×1 blocks.
    pub fn to_standard(&self) -> StandardSdp {
        // map (sdpa block, index) -> (dense block, row)
        let mut dense_sizes = Vec::new();
        let mut offsets = Vec::new();
        for &b in &self.block_sizes {
            offsets.push(dense_sizes.len());
            if b > 0 {
                dense_sizes.push(b as usize);
            } else {
                dense_sizes.extend(std::iter::repeat_n(1, b.unsigned_abs() as usize));
            }
        }
        let locate = |e: &SdpaEntry| {
            let b = self.block_sizes[e.block - 1];
            if b > 0 {
                (offsets[e.block - 1], e.i - 1, e.j - 1)
            } else {
                (offsets[e.block - 1] + e.i - 1, 0, 0)
            }
        };
        let zeros =
            || -> Vec<DMatrix<f64>> { dense_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect() };
        let mut mats: Vec<Vec<DMatrix<f64>>> = (0..=self.n_vars).map(|_| zeros()).collect();
        for e in &self.entries {
            let (blk, i, j) = locate(e);
            mats[e.matrix][blk][(i, j)] = -e.value;
            mats[e.matrix][blk][(j, i)] = -e.value;
        }
        let c = mats.remove(0);
        StandardSdp {
            block_sizes: dense_sizes,
            c,
            a: mats,
            b: DVector::from_iterator(self.c.len(), self.c.iter().map(|v| -v)),
        }
    }
}

fn parse_usize(t: &str, line: usize) -> Result<usize, SdpaError> {
    t.parse().map_err(|_| SdpaError {
        line,
        message: format!("expected a non-negative integer, found `{t}`"),
    })
}

fn parse_f64(t: &str, line: usize) -> Result<f64, SdpaError> {
    t.parse().map_err(|_| SdpaError {
        line,
        message: format!("expected a number, found `{t}`"),
    })
}

/// Writes a moment relaxation with one variable per moment `λ_α`, `α ≠ 0`.
/// The Hankel matrix is block 1 with `F_0 = -E_0`, so that
/// `sum_α λ_α E_α - F_0 = H(λ)`. Each equality becomes a pair of opposite
/// entries in a trailing diagonal block.
pub fn export_sdpa(sdp: &MomentSDP) -> SdpaProblem {
    let one = Monomial::one(sdp.n_vars());
    let vars: Vec<&Monomial> = sdp.moments.iter().filter(|m| **m != one).collect();
    let var_index: BTreeMap<&Monomial, usize> =
        vars.iter().enumerate().map(|(i, m)| (*m, i + 1)).collect();
    let mut entries = Vec::new();
    for (m, pos) in sdp.hankel_positions() {
        let (matrix, sign) = match var_index.get(&m) {
            Some(&k) => (k, 1.0),
            None => (0, -1.0),
        };
        for (i, j) in pos {
            entries.push(SdpaEntry {
                matrix,
                block: 1,
                i: i + 1,
                j: j + 1,
                value: sign,
            });
        }
    }
    let mut block_sizes = vec![sdp.hankel_size() as i64];
    if !sdp.equality_constraints.is_empty() {
        block_sizes.push(-2 * sdp.equality_constraints.len() as i64);
        for (e, g) in sdp.equality_constraints.iter().enumerate() {
            for (row, sign) in [(2 * e + 1, 1.0), (2 * e + 2, -1.0)] {
                for (m, &c) in g {
                    let (matrix, value) = match var_index.get(m) {
                        Some(&k) => (k, sign * c),
                        None => (0, -sign * c),
                    };
                    entries.push(SdpaEntry {
                        matrix,
                        block: 2,
                        i: row,
                        j: row,
                        value,
                    });
                }
            }
        }
    }
    entries.sort_by(|a, b| {
        (a.matrix, a.block, a.i, a.j)
            .cmp(&(b.matrix, b.block, b.i, b.j))
            .then(a.value.total_cmp(&b.value))
    });
    SdpaProblem {
        n_vars: vars.len(),
        block_sizes,
        c: vars
            .iter()
            .map(|m| sdp.objective.get(*m).copied().unwrap_or(0.0))
            .collect(),
        entries,
        objective_constant: sdp.objective.get(&one).copied().unwrap_or(0.0),
    }
}
