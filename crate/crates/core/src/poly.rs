//! Sparse multivariate polynomials with real coefficients.
//!
//! Variables are anonymous indices `x0 .. x{n-1}`. Terms are kept in graded
//! lexicographic order (total degree first, then `x0 > x1 > ...`), which is
//! also the order used for Gram bases and serialization.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected} variables, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("variable index {index} out of range for {nvars} variables")]
    IndexOutOfRange { index: usize, nvars: usize },
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Exponent vector of a monomial.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, index: usize) -> Self {
        let mut e = vec![0; nvars];
        e[index] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn evaluate(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .filter(|(e, _)| **e > 0)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, " ")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{i}")?;
            } else {
                write!(f, "x{i}^{e}")?;
            }
        }
        Ok(())
    }
}

/// All monomials in `n` variables with total degree in `lo..=hi`, graded-lex.
pub fn graded_basis(n: usize, lo: u32, hi: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in lo..=hi {
        let mut exps = vec![0u32; n];
        push_degree(&mut out, &mut exps, 0, d);
    }
    out
}

// Enumerates exponent vectors of exactly degree `rem` over positions `pos..`,
// highest power of the leading variable first.
fn push_degree(out: &mut Vec<Monomial>, exps: &mut Vec<u32>, pos: usize, rem: u32) {
    if exps.is_empty() {
        if rem == 0 {
            out.push(Monomial(Vec::new()));
        }
        return;
    }
    if pos == exps.len() - 1 {
        exps[pos] = rem;
        out.push(Monomial(exps.clone()));
        exps[pos] = 0;
        return;
    }
    for e in (0..=rem).rev() {
        exps[pos] = e;
        push_degree(out, exps, pos + 1, rem - e);
    }
    exps[pos] = 0;
}

/// All monomials in `n` variables of total degree at most `d`.
pub fn monomial_basis(n: usize, d: u32) -> Vec<Monomial> {
    graded_basis(n, 0, d)
}

/// Binomial coefficient, used to size bases.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Clone, PartialEq, Debug)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    pub fn var(nvars: usize, index: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(nvars, index), 1.0);
        p
    }

    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Monomial, f64)>,
    {
        let mut p = Self::zero(nvars);
        for (m, c) in terms {
            if m.nvars() != nvars {
                return Err(PolyError::DimensionMismatch {
                    expected: nvars,
                    got: m.nvars(),
                });
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    /// Accumulates `c * m`, dropping the entry if it cancels to exactly zero.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.nvars(), self.nvars);
        if c == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Smallest total degree among nonzero terms (0 for the zero polynomial).
    pub fn min_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).min().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn check_dims(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.nvars != other.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                got: other.nvars,
            });
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dims(other)?;
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dims(other)?;
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), -c);
        }
        Ok(out)
    }

    pub fn checked_mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dims(other)?;
        let mut out = Polynomial::zero(self.nvars);
        for (ma, ca) in self.terms() {
            for (mb, cb) in other.terms() {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (m, c) in self.terms() {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.nvars, 1.0);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Drops every term of total degree above `d`.
    pub fn truncate(&self, d: u32) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() <= d)
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                got: point.len(),
            });
        }
        Ok(self.eval(point))
    }

    /// Unchecked evaluation; `point` must have `nvars` entries.
    pub fn eval(&self, point: &[f64]) -> f64 {
        self.terms.iter().map(|(m, c)| c * m.evaluate(point)).sum()
    }

    pub fn partial_derivative(&self, var: usize) -> Result<Polynomial, PolyError> {
        if var >= self.nvars {
            return Err(PolyError::IndexOutOfRange {
                index: var,
                nvars: self.nvars,
            });
        }
        let mut out = Polynomial::zero(self.nvars);
        for (m, c) in self.terms() {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let mut d = m.0.clone();
            d[var] -= 1;
            out.add_term(Monomial(d), c * e as f64);
        }
        Ok(out)
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.nvars)
            .map(|i| self.partial_derivative(i).expect("index in range"))
            .collect()
    }

    /// Σ_i (∂V/∂x_i) f_i.
    pub fn lie_derivative(&self, field: &[Polynomial]) -> Result<Polynomial, PolyError> {
        if field.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                got: field.len(),
            });
        }
        let mut out = Polynomial::zero(self.nvars);
        for (i, fi) in field.iter().enumerate() {
            self.check_dims(fi)?;
            let d = self.partial_derivative(i)?;
            out = &out + &(&d * fi);
        }
        Ok(out)
    }

    /// Composition with polynomial maps: `q(x) = p(sub_0(x), ..., sub_{n-1}(x))`.
    /// The substitutes may live in a different number of variables.
    pub fn compose(&self, subs: &[Polynomial]) -> Result<Polynomial, PolyError> {
        if subs.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                got: subs.len(),
            });
        }
        let target = subs.first().map(|s| s.nvars).unwrap_or(0);
        if let Some(bad) = subs.iter().find(|s| s.nvars != target) {
            return Err(PolyError::DimensionMismatch {
                expected: target,
                got: bad.nvars,
            });
        }
        // cache powers of each substitute
        let mut powers: Vec<Vec<Polynomial>> = subs
            .iter()
            .map(|s| vec![Polynomial::constant(target, 1.0), s.clone()])
            .collect();
        let mut out = Polynomial::zero(target);
        for (m, c) in self.terms() {
            let mut term = Polynomial::constant(target, c);
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = powers[i].last().unwrap() * &subs[i];
                    powers[i].push(next);
                }
                term = &term * &powers[i][e as usize];
            }
            out = &out + &term;
        }
        Ok(out)
    }

    /// `q(x) = p(A x + b)` with `A` given row-major as `n` rows of length `n`.
    pub fn substitute_affine(&self, a: &[Vec<f64>], b: &[f64]) -> Result<Polynomial, PolyError> {
        let n = self.nvars;
        if a.len() != n || b.len() != n {
            return Err(PolyError::DimensionMismatch {
                expected: n,
                got: a.len().min(b.len()),
            });
        }
        let mut subs = Vec::with_capacity(n);
        for (row, &bi) in a.iter().zip(b) {
            if row.len() != n {
                return Err(PolyError::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            let mut s = Polynomial::constant(n, bi);
            for (j, &aij) in row.iter().enumerate() {
                s.add_term(Monomial::var(n, j), aij);
            }
            subs.push(s);
        }
        self.compose(&subs)
    }

    /// Re-embeds into `nvars` variables, sending old variable `i` to `map[i]`.
    pub fn embed(&self, nvars: usize, map: &[usize]) -> Polynomial {
        assert_eq!(map.len(), self.nvars);
        let mut out = Polynomial::zero(nvars);
        for (m, c) in self.terms() {
            let mut e = vec![0; nvars];
            for (i, &k) in m.0.iter().enumerate() {
                e[map[i]] += k;
            }
            out.add_term(Monomial(e), c);
        }
        out
    }

    /// Max-abs coefficient difference.
    pub fn max_coeff_diff(&self, other: &Polynomial) -> f64 {
        (self - other).max_abs_coeff()
    }

    /// Parses the textual form produced by `Display`.
    pub fn parse(s: &str, nvars: usize) -> Result<Polynomial, PolyError> {
        Parser::new(s, nvars).parse()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{c:?}")?;
            } else {
                write!(f, "{c:?} * {m}")?;
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.checked_add(rhs).expect("polynomial dimension mismatch")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.checked_sub(rhs).expect("polynomial dimension mismatch")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.checked_mul(rhs).expect("polynomial dimension mismatch")
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: Polynomial) -> Polynomial {
        &self + &rhs
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: Polynomial) -> Polynomial {
        &self - &rhs
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        &self * &rhs
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trig {
    Sin,
    Cos,
}

/// Truncated Taylor series of sin/cos about `center`, univariate in the
/// offset `t = ψ - center`.
pub fn taylor_trig(kind: Trig, center: f64, degree: u32) -> Polynomial {
    let (s, c) = center.sin_cos();
    // k-th derivative of sin at center cycles sin, cos, -sin, -cos
    let derivs = match kind {
        Trig::Sin => [s, c, -s, -c],
        Trig::Cos => [c, -s, -c, s],
    };
    let mut p = Polynomial::zero(1);
    let mut fact = 1.0;
    for k in 0..=degree {
        if k > 0 {
            fact *= k as f64;
        }
        p.add_term(Monomial(vec![k]), derivs[(k % 4) as usize] / fact);
    }
    p
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    nvars: usize,
}

impl<'a> Parser<'a> {
    fn new(s: &'a str, nvars: usize) -> Self {
        Parser {
            src: s.as_bytes(),
            pos: 0,
            nvars,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, PolyError> {
        Err(PolyError::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn parse(mut self) -> Result<Polynomial, PolyError> {
        let mut p = Polynomial::zero(self.nvars);
        let mut sign = 1.0;
        loop {
            while let Some(ch) = self.peek() {
                match ch {
                    b'+' => self.pos += 1,
                    b'-' => {
                        sign = -sign;
                        self.pos += 1;
                    }
                    _ => break,
                }
            }
            let (m, c) = self.term()?;
            p.add_term(m, sign * c);
            sign = 1.0;
            match self.peek() {
                None => break,
                Some(b'+') | Some(b'-') => continue,
                Some(_) => return self.err("expected '+' or '-'"),
            }
        }
        Ok(p)
    }

    fn term(&mut self) -> Result<(Monomial, f64), PolyError> {
        let mut coeff = 1.0;
        let mut exps = vec![0u32; self.nvars];
        let mut seen_any = false;
        if let Some(ch) = self.peek() {
            if ch.is_ascii_digit() || ch == b'.' || ch == b'i' || ch == b'N' {
                coeff = self.number()?;
                seen_any = true;
                if self.peek() == Some(b'*') {
                    self.pos += 1;
                    if self.peek() != Some(b'x') {
                        return self.err("expected variable after '*'");
                    }
                }
            }
        }
        while let Some(b'x') = self.peek() {
            self.pos += 1;
            let idx = self.uint()? as usize;
            if idx >= self.nvars {
                return self.err(format!("variable x{idx} out of range"));
            }
            let mut e = 1;
            if self.peek() == Some(b'^') {
                self.pos += 1;
                e = self.uint()?;
            }
            exps[idx] += e;
            seen_any = true;
            if self.peek() == Some(b'*') {
                self.pos += 1;
            }
        }
        if !seen_any {
            return self.err("expected coefficient or variable");
        }
        Ok((Monomial(exps), coeff))
    }

    fn uint(&mut self) -> Result<u32, PolyError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected integer");
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .or_else(|_| self.err("integer overflow"))
    }

    fn number(&mut self) -> Result<f64, PolyError> {
        let start = self.pos;
        for kw in ["inf", "NaN"] {
            if self.src[self.pos..].starts_with(kw.as_bytes()) {
                self.pos += kw.len();
                return Ok(kw.parse().unwrap());
            }
        }
        while self.pos < self.src.len() {
            let ch = self.src[self.pos];
            let exp_sign = (ch == b'+' || ch == b'-')
                && self.pos > start
                && matches!(self.src[self.pos - 1], b'e' | b'E');
            if ch.is_ascii_digit() || ch == b'.' || ch == b'e' || ch == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse()
            .or_else(|_| self.err(format!("bad number '{text}'")))
    }
}
