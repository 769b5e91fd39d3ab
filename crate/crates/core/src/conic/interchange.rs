//! Plain-text dump of a [`ConicProgram`] for golden files and bug reports.
//!
//! ```text
//! polycert-conic 1
//! vars 3
//! objective 1
//! 0 1.0000000000000000e0
//! equalities 1
//! eq 2.0000000000000000e0 2 0:1.0000000000000000e0 1:-1.0000000000000000e0
//! nonneg 1
//! 0
//! rotated 1
//! rc 0 1 2
//! psd 0
//! end
//! ```
//!
//! Reals are written with 17 significant digits so text → program → text is
//! the identity.

use std::fmt::Write;

use super::{ConicError, ConicProgram, Var};

const HEADER: &str = "polycert-conic 1";

pub(crate) fn real(x: f64) -> String {
    format!("{x:.16e}")
}

impl ConicProgram {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{HEADER}").unwrap();
        writeln!(s, "vars {}", self.num_vars).unwrap();
        writeln!(s, "objective {}", self.objective.len()).unwrap();
        for &(v, c) in &self.objective {
            writeln!(s, "{} {}", v.0, real(c)).unwrap();
        }
        writeln!(s, "equalities {}", self.equalities.len()).unwrap();
        for e in &self.equalities {
            write!(s, "eq {} {}", real(e.rhs), e.terms.len()).unwrap();
            for &(v, c) in &e.terms {
                write!(s, " {}:{}", v.0, real(c)).unwrap();
            }
            s.push('\n');
        }
        writeln!(s, "nonneg {}", self.nonneg.len()).unwrap();
        if !self.nonneg.is_empty() {
            let ids: Vec<String> = self.nonneg.iter().map(|v| v.0.to_string()).collect();
            writeln!(s, "{}", ids.join(" ")).unwrap();
        }
        writeln!(s, "rotated {}", self.rotated.len()).unwrap();
        for rc in &self.rotated {
            write!(s, "rc {} {}", rc.u.0, rc.v.0).unwrap();
            for w in &rc.w {
                write!(s, " {}", w.0).unwrap();
            }
            s.push('\n');
        }
        writeln!(s, "psd {}", self.psd.len()).unwrap();
        for b in &self.psd {
            write!(s, "block {}", b.dim).unwrap();
            for v in &b.entries {
                write!(s, " {}", v.0).unwrap();
            }
            s.push('\n');
        }
        writeln!(s, "end").unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<ConicProgram, ConicError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| -> Result<(usize, &str), ConicError> {
            lines.next().ok_or(ConicError::Format {
                line: 0,
                msg: format!("unexpected end of input, expected {what}"),
            })
        };
        let fail = |line: usize, msg: &str| ConicError::Format {
            line,
            msg: msg.to_string(),
        };

        let (ln, h) = next("header")?;
        if h != HEADER {
            return Err(fail(ln, "bad header"));
        }
        let count = |line: (usize, &str), key: &str| -> Result<usize, ConicError> {
            let rest = line
                .1
                .strip_prefix(key)
                .ok_or_else(|| fail(line.0, &format!("expected '{key}'")))?;
            rest.trim()
                .parse()
                .map_err(|_| fail(line.0, "bad count"))
        };
        let num = |ln: usize, t: &str| -> Result<f64, ConicError> {
            t.parse().map_err(|_| fail(ln, &format!("bad real '{t}'")))
        };
        let idx = |ln: usize, t: &str| -> Result<usize, ConicError> {
            t.parse().map_err(|_| fail(ln, &format!("bad index '{t}'")))
        };

        let mut prog = ConicProgram::new();
        let nv = count(next("vars")?, "vars")?;
        prog.add_variables(nv);

        let nobj = count(next("objective")?, "objective")?;
        for _ in 0..nobj {
            let (ln, l) = next("objective term")?;
            let mut it = l.split_whitespace();
            let v = idx(ln, it.next().unwrap_or(""))?;
            let c = num(ln, it.next().unwrap_or(""))?;
            prog.add_objective_term(Var(v), c)
                .map_err(|e| fail(ln, &e.to_string()))?;
        }

        let neq = count(next("equalities")?, "equalities")?;
        for _ in 0..neq {
            let (ln, l) = next("equality")?;
            let mut it = l.split_whitespace();
            if it.next() != Some("eq") {
                return Err(fail(ln, "expected 'eq'"));
            }
            let rhs = num(ln, it.next().unwrap_or(""))?;
            let k = idx(ln, it.next().unwrap_or(""))?;
            let mut terms = Vec::with_capacity(k);
            for tok in it {
                let (v, c) = tok.split_once(':').ok_or_else(|| fail(ln, "bad term"))?;
                terms.push((Var(idx(ln, v)?), num(ln, c)?));
            }
            if terms.len() != k {
                return Err(fail(ln, "term count mismatch"));
            }
            prog.add_equality(terms, rhs)
                .map_err(|e| fail(ln, &e.to_string()))?;
        }

        let nnn = count(next("nonneg")?, "nonneg")?;
        if nnn > 0 {
            let (ln, l) = next("nonneg list")?;
            let vars = l
                .split_whitespace()
                .map(|t| idx(ln, t).map(Var))
                .collect::<Result<Vec<_>, _>>()?;
            if vars.len() != nnn {
                return Err(fail(ln, "nonneg count mismatch"));
            }
            prog.add_nonneg(&vars).map_err(|e| fail(ln, &e.to_string()))?;
        }

        let nrc = count(next("rotated")?, "rotated")?;
        for _ in 0..nrc {
            let (ln, l) = next("rotated cone")?;
            let mut it = l.split_whitespace();
            if it.next() != Some("rc") {
                return Err(fail(ln, "expected 'rc'"));
            }
            let ids = it.map(|t| idx(ln, t).map(Var)).collect::<Result<Vec<_>, _>>()?;
            if ids.len() < 2 {
                return Err(fail(ln, "rotated cone needs u and v"));
            }
            prog.add_rotated_cone(ids[0], ids[1], ids[2..].to_vec())
                .map_err(|e| fail(ln, &e.to_string()))?;
        }

        let npsd = count(next("psd")?, "psd")?;
        for _ in 0..npsd {
            let (ln, l) = next("psd block")?;
            let mut it = l.split_whitespace();
            if it.next() != Some("block") {
                return Err(fail(ln, "expected 'block'"));
            }
            let dim = idx(ln, it.next().unwrap_or(""))?;
            let ids = it.map(|t| idx(ln, t).map(Var)).collect::<Result<Vec<_>, _>>()?;
            prog.add_psd_block(dim, ids)
                .map_err(|e| fail(ln, &e.to_string()))?;
        }
        let (ln, l) = next("end")?;
        if l != "end" {
            return Err(fail(ln, "expected 'end'"));
        }
        Ok(prog)
    }
}
