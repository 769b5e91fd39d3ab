//! Structured-text form of a [`PutinarCertificate`], readable by a separate
//! verifier process.
//!
//! ```text
//! polycert-certificate 1
//! nvars 1
//! poly 1.0 * x0
//! constraints 1
//! g 1.0 * x0
//! gram sdsos 2
//! basis 0 1
//! row 0.0000000000000000e0 0.0000000000000000e0
//! row 0.0000000000000000e0
//! witness 1
//! blk 0 1 0.0000000000000000e0 0.0000000000000000e0 0.0000000000000000e0
//! gram sdsos 1
//! basis 0
//! row 1.0000000000000000e0
//! witness none
//! end
//! ```
//!
//! The first `gram` is σ₀, then one per constraint. Basis monomials are
//! comma-separated exponent vectors. Reals carry 17 significant digits.

use std::fmt::Write;

use super::{CertifyError, ConeTag, GramCertificate, PutinarCertificate, SemialgebraicSet};
use crate::cones::{SddBlock, SddWitness, SymMatrix};
use crate::conic::real;
use crate::poly::{Monomial, Polynomial};

const HEADER: &str = "polycert-certificate 1";

fn write_gram(s: &mut String, g: &GramCertificate) {
    let n = g.q.dim();
    writeln!(s, "gram {} {}", g.cone, n).unwrap();
    let basis: Vec<String> = g
        .basis
        .iter()
        .map(|m| {
            m.exponents()
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    writeln!(s, "basis {}", basis.join(" ")).unwrap();
    for i in 0..n {
        let row: Vec<String> = (i..n).map(|j| real(g.q.get(i, j))).collect();
        writeln!(s, "row {}", row.join(" ")).unwrap();
    }
    match &g.witness {
        None => writeln!(s, "witness none").unwrap(),
        Some(w) => {
            writeln!(s, "witness {}", w.blocks.len()).unwrap();
            for b in &w.blocks {
                writeln!(
                    s,
                    "blk {} {} {} {} {}",
                    b.i,
                    b.j,
                    real(b.m_ii),
                    real(b.m_ij),
                    real(b.m_jj)
                )
                .unwrap();
            }
        }
    }
}

impl PutinarCertificate {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{HEADER}").unwrap();
        writeln!(s, "nvars {}", self.poly.nvars()).unwrap();
        writeln!(s, "poly {}", self.poly).unwrap();
        writeln!(s, "constraints {}", self.set.constraints().len()).unwrap();
        for g in self.set.constraints() {
            writeln!(s, "g {g}").unwrap();
        }
        write_gram(&mut s, &self.sigma0);
        for m in &self.multipliers {
            write_gram(&mut s, m);
        }
        writeln!(s, "end").unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<PutinarCertificate, CertifyError> {
        let mut r = Reader {
            lines: text
                .lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.trim()))
                .filter(|(_, l)| !l.is_empty())
                .collect(),
            pos: 0,
        };
        let (ln, h) = r.next("header")?;
        if h != HEADER {
            return Err(fail(ln, "bad header"));
        }
        let (ln, rest) = r.keyed("nvars")?;
        let nvars: usize = parse(ln, rest)?;
        let (ln, rest) = r.keyed("poly")?;
        let poly = Polynomial::parse(rest, nvars).map_err(|e| fail(ln, &e.to_string()))?;
        let (ln, rest) = r.keyed("constraints")?;
        let k: usize = parse(ln, rest)?;
        let mut set = SemialgebraicSet::new(nvars);
        for _ in 0..k {
            let (ln, rest) = r.keyed("g")?;
            let g = Polynomial::parse(rest, nvars).map_err(|e| fail(ln, &e.to_string()))?;
            set = set.with_inequality(g)?;
        }
        let sigma0 = r.gram(nvars)?;
        let mut multipliers = Vec::with_capacity(k);
        for _ in 0..k {
            multipliers.push(r.gram(nvars)?);
        }
        let (ln, l) = r.next("end")?;
        if l != "end" {
            return Err(fail(ln, "expected 'end'"));
        }
        Ok(PutinarCertificate {
            poly,
            set,
            sigma0,
            multipliers,
        })
    }
}

fn fail(line: usize, msg: &str) -> CertifyError {
    CertifyError::Format {
        line,
        msg: msg.to_string(),
    }
}

fn parse<T: std::str::FromStr>(ln: usize, t: &str) -> Result<T, CertifyError> {
    t.trim()
        .parse()
        .map_err(|_| fail(ln, &format!("cannot parse '{t}'")))
}

struct Reader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str), CertifyError> {
        let l = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| fail(0, &format!("unexpected end of input, expected {what}")))?;
        self.pos += 1;
        Ok(l)
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str), CertifyError> {
        let (ln, l) = self.next(key)?;
        match l.split_once(' ') {
            Some((k, rest)) if k == key => Ok((ln, rest.trim())),
            _ if l == key => Ok((ln, "")),
            _ => Err(fail(ln, &format!("expected '{key}'"))),
        }
    }

    fn gram(&mut self, nvars: usize) -> Result<GramCertificate, CertifyError> {
        let (ln, rest) = self.keyed("gram")?;
        let mut it = rest.split_whitespace();
        let cone: ConeTag = it
            .next()
            .ok_or_else(|| fail(ln, "missing cone"))?
            .parse()
            .map_err(|e: CertifyError| fail(ln, &e.to_string()))?;
        let n: usize = parse(ln, it.next().unwrap_or(""))?;

        let (ln, rest) = self.keyed("basis")?;
        let basis = rest
            .split_whitespace()
            .map(|tok| {
                let ex = tok
                    .split(',')
                    .map(|e| parse::<u32>(ln, e))
                    .collect::<Result<Vec<_>, _>>()?;
                if ex.len() != nvars {
                    return Err(fail(ln, "basis monomial has wrong arity"));
                }
                Ok(Monomial::new(ex))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if basis.len() != n {
            return Err(fail(ln, "basis length does not match Gram dimension"));
        }

        let mut q = SymMatrix::zeros(n);
        for i in 0..n {
            let (ln, rest) = self.keyed("row")?;
            let vals = rest
                .split_whitespace()
                .map(|t| parse::<f64>(ln, t))
                .collect::<Result<Vec<_>, _>>()?;
            if vals.len() != n - i {
                return Err(fail(ln, "row has wrong length"));
            }
            for (k, v) in vals.into_iter().enumerate() {
                q.set(i, i + k, v);
            }
        }

        let (ln, rest) = self.keyed("witness")?;
        let witness = if rest == "none" {
            None
        } else {
            let m: usize = parse(ln, rest)?;
            let mut blocks = Vec::with_capacity(m);
            for _ in 0..m {
                let (ln, rest) = self.keyed("blk")?;
                let t: Vec<&str> = rest.split_whitespace().collect();
                if t.len() != 5 {
                    return Err(fail(ln, "blk needs i j m_ii m_ij m_jj"));
                }
                let (i, j): (usize, usize) = (parse(ln, t[0])?, parse(ln, t[1])?);
                if i >= j || j >= n {
                    return Err(fail(ln, "block index out of range"));
                }
                blocks.push(SddBlock {
                    i,
                    j,
                    m_ii: parse(ln, t[2])?,
                    m_ij: parse(ln, t[3])?,
                    m_jj: parse(ln, t[4])?,
                });
            }
            Some(SddWitness { blocks })
        };
        Ok(GramCertificate {
            basis,
            q,
            cone,
            witness,
        })
    }
}
