use std::collections::BTreeMap;

use crate::conic::{ConicProgram, ConicSolution, LinExpr, Var};
use crate::poly::{monomial_basis, Monomial, PolyError, Polynomial};

/// Polynomial whose coefficients are affine in program variables.
#[derive(Clone, Debug, PartialEq)]
pub struct LinPoly {
    nvars: usize,
    terms: BTreeMap<Monomial, LinExpr>,
}

impl LinPoly {
    pub fn zero(nvars: usize) -> Self {
        LinPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &LinExpr)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> Option<&LinExpr> {
        self.terms.get(m)
    }

    /// `self += s · e · m`.
    pub fn add_term(&mut self, m: Monomial, e: &LinExpr, s: f64) {
        if s == 0.0 || e.is_zero() {
            return;
        }
        let entry = self.terms.entry(m).or_default();
        entry.add_scaled(e, s);
        // entries that cancelled are left in place; degree queries skip them
    }

    pub fn add_const_term(&mut self, m: Monomial, c: f64) {
        if c != 0.0 {
            self.terms.entry(m).or_default().add_constant(c);
        }
    }

    fn live(&self) -> impl Iterator<Item = (&Monomial, &LinExpr)> {
        self.terms.iter().filter(|(_, e)| !e.is_zero())
    }

    /// Highest degree among structurally nonzero coefficients.
    pub fn degree(&self) -> u32 {
        self.live().map(|(m, _)| m.degree()).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> u32 {
        self.live().map(|(m, _)| m.degree()).min().unwrap_or(0)
    }

    pub fn add(&self, other: &LinPoly) -> LinPoly {
        let mut out = self.clone();
        out.add_assign_scaled(other, 1.0);
        out
    }

    pub fn sub(&self, other: &LinPoly) -> LinPoly {
        let mut out = self.clone();
        out.add_assign_scaled(other, -1.0);
        out
    }

    pub fn add_assign_scaled(&mut self, other: &LinPoly, s: f64) {
        assert_eq!(self.nvars, other.nvars, "LinPoly dimension mismatch");
        for (m, e) in &other.terms {
            self.add_term(m.clone(), e, s);
        }
    }

    pub fn add_poly(&self, p: &Polynomial) -> LinPoly {
        let mut out = self.clone();
        for (m, c) in p.terms() {
            out.add_const_term(m.clone(), c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> LinPoly {
        let mut out = LinPoly::zero(self.nvars);
        out.add_assign_scaled(self, s);
        out
    }

    /// Product with a fixed polynomial (still affine in the variables).
    pub fn mul_poly(&self, p: &Polynomial) -> LinPoly {
        assert_eq!(self.nvars, p.nvars(), "LinPoly dimension mismatch");
        let mut out = LinPoly::zero(self.nvars);
        for (m, e) in self.live() {
            for (pm, pc) in p.terms() {
                out.add_term(m.mul(pm), e, pc);
            }
        }
        out
    }

    /// `self · e` for an affine scalar `e`, valid only when one side is constant.
    pub fn mul_scalar_expr(&self, e: &LinExpr) -> Option<LinPoly> {
        let mut out = LinPoly::zero(self.nvars);
        if e.is_constant() {
            return Some(self.scale(e.constant()));
        }
        for (m, c) in self.live() {
            if !c.is_constant() {
                return None;
            }
            out.add_term(m.clone(), e, c.constant());
        }
        Some(out)
    }

    pub fn partial_derivative(&self, var: usize) -> LinPoly {
        let mut out = LinPoly::zero(self.nvars);
        for (m, e) in self.live() {
            let k = m.exponents()[var];
            if k == 0 {
                continue;
            }
            let mut ex = m.exponents().to_vec();
            ex[var] -= 1;
            out.add_term(Monomial::new(ex), e, k as f64);
        }
        out
    }

    /// `Σ_i ∂self/∂x_i · field_i` for a fixed vector field.
    pub fn lie_derivative(&self, field: &[Polynomial]) -> Result<LinPoly, PolyError> {
        if field.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                got: field.len(),
            });
        }
        let mut out = LinPoly::zero(self.nvars);
        for (i, f) in field.iter().enumerate() {
            out.add_assign_scaled(&self.partial_derivative(i).mul_poly(f), 1.0);
        }
        Ok(out)
    }

    /// Re-indexes variables: variable `i` becomes `map[i]` among `nvars`.
    pub fn embed(&self, nvars: usize, map: &[usize]) -> LinPoly {
        let mut out = LinPoly::zero(nvars);
        for (m, e) in self.live() {
            let mut ex = vec![0; nvars];
            for (i, &k) in m.exponents().iter().enumerate() {
                ex[map[i]] += k;
            }
            out.add_term(Monomial::new(ex), e, 1.0);
        }
        out
    }

    /// Evaluates every coefficient at a solution.
    pub fn value(&self, sol: &ConicSolution) -> Polynomial {
        let mut p = Polynomial::zero(self.nvars);
        for (m, e) in &self.terms {
            p.add_term(m.clone(), sol.eval(e));
        }
        p
    }

    pub fn value_at(&self, x: &[f64]) -> Polynomial {
        let mut p = Polynomial::zero(self.nvars);
        for (m, e) in &self.terms {
            p.add_term(m.clone(), e.eval(x));
        }
        p
    }

    /// The polynomial evaluated at a point of its own variables, as an affine expression.
    pub fn eval_point(&self, point: &[f64]) -> LinExpr {
        let mut out = LinExpr::zero();
        for (m, e) in &self.terms {
            out.add_scaled(e, m.evaluate(point));
        }
        out
    }
}

impl From<&Polynomial> for LinPoly {
    fn from(p: &Polynomial) -> Self {
        LinPoly::zero(p.nvars()).add_poly(p)
    }
}

impl From<Polynomial> for LinPoly {
    fn from(p: Polynomial) -> Self {
        LinPoly::from(&p)
    }
}

/// A polynomial decision variable: one program variable per basis monomial.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyVar {
    nvars: usize,
    basis: Vec<Monomial>,
    coeffs: Vec<Var>,
}

impl PolyVar {
    pub fn basis(&self) -> &[Monomial] {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Var] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn to_linpoly(&self) -> LinPoly {
        let mut p = LinPoly::zero(self.nvars);
        for (m, &v) in self.basis.iter().zip(&self.coeffs) {
            p.add_term(m.clone(), &LinExpr::var(v), 1.0);
        }
        p
    }

    pub fn value(&self, sol: &ConicSolution) -> Polynomial {
        let mut p = Polynomial::zero(self.nvars);
        for (m, &v) in self.basis.iter().zip(&self.coeffs) {
            p.add_term(m.clone(), sol.value(v));
        }
        p
    }
}

/// Free polynomial of degree ≤ `degree` in `n` variables.
pub fn declare_poly_var(prog: &mut ConicProgram, n: usize, degree: u32) -> PolyVar {
    declare_poly_var_with_basis(prog, n, monomial_basis(n, degree))
}

/// Free polynomial over an explicit (graded-lex, duplicate-free) basis.
pub fn declare_poly_var_with_basis(
    prog: &mut ConicProgram,
    n: usize,
    mut basis: Vec<Monomial>,
) -> PolyVar {
    basis.sort();
    basis.dedup();
    let coeffs = prog.add_variables(basis.len());
    PolyVar {
        nvars: n,
        basis,
        coeffs,
    }
}
