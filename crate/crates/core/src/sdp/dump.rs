//! Plain-text sparse triplet dump of a program, for bug reports.
//!
//! ```text
//! N <vars> EQ <rows> BLOCKS <count>
//! SIZES <s_1> ... <s_p>
//! C <var> <value>                    objective coefficient
//! A <row> <var> <value>              equality coefficient
//! B <row> <value>                    equality right-hand side
//! F <block> <row> <col> <var> <value>  LMI coefficient, row <= col
//! K <block> <row> <col> <value>        LMI constant, row <= col
//! R <block> <i> <j> <value>            range basis entry
//! ```
//!
//! Indices are 0-based. Lines starting with `#` are comments. Range bases
//! are written with their column count as `RC <block> <cols>` before the
//! `R` lines.

use std::fmt::Write as _;

use faer::Mat;

use super::{ConicProgram, LmiBlock};
use crate::error::{Error, Result};
use crate::moment::MapEntry;

pub fn write_dump(prog: &ConicProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# conic program dump");
    let _ = writeln!(out, "N {} EQ {} BLOCKS {}", prog.num_vars, prog.equalities.len(), prog.blocks.len());
    let sizes: Vec<String> = prog.blocks.iter().map(|b| b.size.to_string()).collect();
    let _ = writeln!(out, "SIZES {}", sizes.join(" "));
    for (v, &c) in prog.objective.iter().enumerate() {
        if c != 0.0 {
            let _ = writeln!(out, "C {v} {c:e}");
        }
    }
    for (r, row) in prog.equalities.iter().enumerate() {
        for &(v, a) in &row.terms {
            let _ = writeln!(out, "A {r} {v} {a:e}");
        }
        let _ = writeln!(out, "B {r} {:e}", row.rhs);
    }
    for (j, b) in prog.blocks.iter().enumerate() {
        for e in &b.entries {
            let _ = writeln!(out, "F {j} {} {} {} {:e}", e.row, e.col, e.var, e.coef);
        }
        for &(r, c, v) in &b.constant {
            let _ = writeln!(out, "K {j} {r} {c} {v:e}");
        }
        if let Some(basis) = &b.range_basis {
            let _ = writeln!(out, "RC {j} {}", basis.ncols());
            for jj in 0..basis.ncols() {
                for i in 0..basis.nrows() {
                    let _ = writeln!(out, "R {j} {i} {jj} {:e}", basis[(i, jj)]);
                }
            }
        }
    }
    out
}

fn bad(line: usize, msg: &str) -> Error {
    Error::Format(format!("dump line {line}: {msg}"))
}

pub fn read_dump(text: &str) -> Result<ConicProgram> {
    let mut prog: Option<ConicProgram> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let us = |i: usize| -> Result<usize> {
            tok.get(i).ok_or_else(|| bad(ln + 1, "missing field"))?.parse().map_err(|_| bad(ln + 1, "bad integer"))
        };
        let fl = |i: usize| -> Result<f64> {
            tok.get(i).ok_or_else(|| bad(ln + 1, "missing field"))?.parse().map_err(|_| bad(ln + 1, "bad number"))
        };
        if tok[0] == "N" {
            let (n, m, p) = (us(1)?, us(3)?, us(5)?);
            let mut pr = ConicProgram::new(n, vec![0.0; n]);
            for _ in 0..m {
                pr.add_equality(Vec::new(), 0.0);
            }
            for _ in 0..p {
                pr.add_block(LmiBlock::new(0, Vec::new()));
            }
            prog = Some(pr);
            continue;
        }
        let pr = prog.as_mut().ok_or_else(|| bad(ln + 1, "header must come first"))?;
        let row_of = |pr: &ConicProgram, r: usize| {
            if r < pr.equalities.len() {
                Ok(r)
            } else {
                Err(bad(ln + 1, "row out of range"))
            }
        };
        let blk_of = |pr: &ConicProgram, j: usize| {
            if j < pr.blocks.len() {
                Ok(j)
            } else {
                Err(bad(ln + 1, "block out of range"))
            }
        };
        match tok[0] {
            "SIZES" => {
                if tok.len() - 1 != pr.blocks.len() {
                    return Err(bad(ln + 1, "block size count"));
                }
                for j in 0..pr.blocks.len() {
                    pr.blocks[j].size = us(j + 1)?;
                }
            }
            "C" => {
                let v = us(1)?;
                if v >= pr.num_vars {
                    return Err(bad(ln + 1, "variable out of range"));
                }
                pr.objective[v] = fl(2)?;
            }
            "A" => {
                let r = row_of(pr, us(1)?)?;
                let (v, a) = (us(2)?, fl(3)?);
                pr.equalities[r].terms.push((v, a));
            }
            "B" => {
                let r = row_of(pr, us(1)?)?;
                pr.equalities[r].rhs = fl(2)?;
            }
            "F" => {
                let j = blk_of(pr, us(1)?)?;
                let e = MapEntry { row: us(2)?, col: us(3)?, var: us(4)?, coef: fl(5)? };
                pr.blocks[j].entries.push(e);
            }
            "K" => {
                let j = blk_of(pr, us(1)?)?;
                let t = (us(2)?, us(3)?, fl(4)?);
                pr.blocks[j].constant.push(t);
            }
            "RC" => {
                let j = blk_of(pr, us(1)?)?;
                let cols = us(2)?;
                let size = pr.blocks[j].size;
                pr.blocks[j].range_basis = Some(Mat::zeros(size, cols));
            }
            "R" => {
                let j = blk_of(pr, us(1)?)?;
                let (i, jj, v) = (us(2)?, us(3)?, fl(4)?);
                let basis = pr.blocks[j].range_basis.as_mut().ok_or_else(|| bad(ln + 1, "R before RC"))?;
                if i >= basis.nrows() || jj >= basis.ncols() {
                    return Err(bad(ln + 1, "basis index out of range"));
                }
                basis[(i, jj)] = v;
            }
            other => return Err(bad(ln + 1, &format!("unknown record {other}"))),
        }
    }
    let prog = prog.ok_or_else(|| Error::Format("empty dump".into()))?;
    prog.validate()?;
    Ok(prog)
}
