//! Polynomial nonnegativity certificates.
//!
//! A polynomial `p` is written as `zᵀQz` over a monomial basis `z`, and the
//! Gram matrix `Q` is constrained to one of three cones:
//!
//! | tag   | cone on `Q`                 | program |
//! |-------|-----------------------------|---------|
//! | DSOS  | diagonally dominant         | LP      |
//! | SDSOS | scaled diagonally dominant  | SOCP    |
//! | SOS   | positive semidefinite       | SDP     |
//!
//! Constrained nonnegativity on `S = {g_i ≥ 0}` uses the Putinar form
//! `p = σ₀ + Σ σ_i g_i` with every `σ` in the chosen cone.
//!
//! When every structurally nonzero coefficient of `p` has degree ≥ `2k`, the
//! Gram basis starts at degree `k` instead of 0. This drops rows that would be
//! forced to zero and does not change the feasible set of `p`.

mod linpoly;
mod text;

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use linpoly::{declare_poly_var, declare_poly_var_with_basis, LinPoly, PolyVar};

use crate::cones::{is_dd, is_psd, is_sdd, SddBlock, SddWitness, SymMatrix};
use crate::conic::{
    Backend, ConicError, ConicProgram, ConicSolution, LinExpr, PsdBlock, SolveOptions, SolveStatus,
    Var,
};
use crate::poly::{graded_basis, Monomial, PolyError, Polynomial};

/// Default absolute tolerance for [`verify_certificate`].
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConeTag {
    Dsos,
    Sdsos,
    Sos,
}

impl ConeTag {
    pub const ALL: [ConeTag; 3] = [ConeTag::Dsos, ConeTag::Sdsos, ConeTag::Sos];

    pub fn as_str(self) -> &'static str {
        match self {
            ConeTag::Dsos => "dsos",
            ConeTag::Sdsos => "sdsos",
            ConeTag::Sos => "sos",
        }
    }
}

impl fmt::Display for ConeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConeTag {
    type Err = CertifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dsos" => Ok(ConeTag::Dsos),
            "sdsos" => Ok(ConeTag::Sdsos),
            "sos" => Ok(ConeTag::Sos),
            _ => Err(CertifyError::UnknownCone(s.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("polynomial degree {degree} exceeds twice the half-degree {half_degree}")]
    DegreeOverflow { degree: u32, half_degree: u32 },
    #[error("multiplier degree must be even, got {0}")]
    OddMultiplierDegree(u32),
    #[error("expected {expected} variables, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown cone '{0}' (expected dsos, sdsos or sos)")]
    UnknownCone(String),
    #[error("infeasible: no certificate at this degree and cone (solver: {0})")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("certificate failed verification: {0}")]
    Verification(Box<VerificationReport>),
    #[error("certificate format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Gram variables living inside a [`ConicProgram`].
#[derive(Clone, Debug)]
pub struct GramHandle {
    nvars: usize,
    basis: Vec<Monomial>,
    cone: ConeTag,
    /// Upper triangle, row-major (see [`PsdBlock::index`]).
    entries: Vec<LinExpr>,
    /// SDSOS only: `(i, j, u, v, w)` with `M^{ij} = [[u, w/√2], [w/√2, v]]`.
    blocks: Vec<(usize, usize, Var, Var, Var)>,
}

impl GramHandle {
    pub fn basis(&self) -> &[Monomial] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn cone(&self) -> ConeTag {
        self.cone
    }

    pub fn entry(&self, i: usize, j: usize) -> &LinExpr {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        &self.entries[PsdBlock::index(self.dim(), i, j)]
    }

    pub fn trace(&self) -> LinExpr {
        let mut t = LinExpr::zero();
        for i in 0..self.dim() {
            t.add_scaled(self.entry(i, i), 1.0);
        }
        t
    }

    /// `zᵀQz` as a polynomial affine in the Gram variables.
    pub fn to_linpoly(&self) -> LinPoly {
        let n = self.dim();
        let mut p = LinPoly::zero(self.nvars);
        for i in 0..n {
            for j in i..n {
                let s = if i == j { 1.0 } else { 2.0 };
                p.add_term(self.basis[i].mul(&self.basis[j]), self.entry(i, j), s);
            }
        }
        p
    }

    /// `Q` evaluated at a primal point.
    pub fn gram_at(&self, x: &[f64]) -> SymMatrix {
        SymMatrix::from_fn(self.dim(), |i, j| self.entry(i, j).eval(x))
    }

    pub fn extract(&self, sol: &ConicSolution) -> GramCertificate {
        let x = sol.primal.as_deref().unwrap_or(&[]);
        self.extract_at(x)
    }

    pub fn extract_at(&self, x: &[f64]) -> GramCertificate {
        let witness = (self.cone == ConeTag::Sdsos && self.dim() >= 2).then(|| SddWitness {
            blocks: self
                .blocks
                .iter()
                .map(|&(i, j, u, v, w)| SddBlock {
                    i,
                    j,
                    m_ii: x[u.0],
                    m_ij: x[w.0] / SQRT_2,
                    m_jj: x[v.0],
                })
                .collect(),
        });
        GramCertificate {
            basis: self.basis.clone(),
            q: self.gram_at(x),
            cone: self.cone,
            witness,
        }
    }
}

/// Fresh Gram variables over `basis`, constrained to `cone`, with no
/// coefficient matching. Use [`GramHandle::to_linpoly`] to place the
/// resulting polynomial into identities.
pub fn gram_in_cone(
    prog: &mut ConicProgram,
    nvars: usize,
    basis: Vec<Monomial>,
    cone: ConeTag,
) -> Result<GramHandle, CertifyError> {
    let n = basis.len();
    let mut entries = vec![LinExpr::zero(); n * (n + 1) / 2];
    let mut blocks = Vec::new();
    let idx = |i: usize, j: usize| PsdBlock::index(n, i, j);

    if n == 1 {
        let v = prog.add_variable();
        prog.add_nonneg(&[v])?;
        entries[0] = LinExpr::var(v);
    } else if n > 1 {
        match cone {
            ConeTag::Dsos => {
                let diag = prog.add_variables(n);
                let mut row_sum: Vec<LinExpr> = diag.iter().map(|&d| LinExpr::var(d)).collect();
                for i in 0..n {
                    entries[idx(i, i)] = LinExpr::var(diag[i]);
                    for j in (i + 1)..n {
                        let q = prog.add_variable();
                        let t = prog.add_variable();
                        let mut up = LinExpr::var(t);
                        up.add_term(q, -1.0);
                        prog.add_linear_nonneg(&up)?;
                        let mut lo = LinExpr::var(t);
                        lo.add_term(q, 1.0);
                        prog.add_linear_nonneg(&lo)?;
                        row_sum[i].add_term(t, -1.0);
                        row_sum[j].add_term(t, -1.0);
                        entries[idx(i, j)] = LinExpr::var(q);
                    }
                }
                for r in &row_sum {
                    prog.add_linear_nonneg(r)?;
                }
            }
            ConeTag::Sdsos => {
                for i in 0..n {
                    for j in (i + 1)..n {
                        let u = prog.add_variable();
                        let v = prog.add_variable();
                        let w = prog.add_variable();
                        prog.add_rotated_cone(u, v, vec![w])?;
                        entries[idx(i, i)].add_term(u, 1.0);
                        entries[idx(j, j)].add_term(v, 1.0);
                        entries[idx(i, j)] = LinExpr::term(w, 1.0 / SQRT_2);
                        blocks.push((i, j, u, v, w));
                    }
                }
            }
            ConeTag::Sos => {
                let blk = prog.new_psd_block(n);
                for (e, &v) in entries.iter_mut().zip(&blk.entries) {
                    *e = LinExpr::var(v);
                }
            }
        }
    }
    Ok(GramHandle {
        nvars,
        basis,
        cone,
        entries,
        blocks,
    })
}

/// Gram basis for certifying `p` at `half_degree`, trimmed from below when
/// `p` has no low-degree terms.
pub fn gram_basis(p: &LinPoly, half_degree: u32) -> Vec<Monomial> {
    let lo = (p.min_degree() / 2).min(half_degree);
    graded_basis(p.nvars(), lo, half_degree)
}

/// Asserts `p ∈ cone` by matching `p = zᵀQz` coefficientwise.
pub fn constrain_in_cone(
    prog: &mut ConicProgram,
    p: &LinPoly,
    cone: ConeTag,
    half_degree: u32,
) -> Result<GramHandle, CertifyError> {
    let degree = p.degree();
    if degree > 2 * half_degree {
        return Err(CertifyError::DegreeOverflow {
            degree,
            half_degree,
        });
    }
    let basis = gram_basis(p, half_degree);
    let gram = gram_in_cone(prog, p.nvars(), basis, cone)?;
    let diff = gram.to_linpoly().sub(p);
    for (_, e) in diff.terms() {
        if e.is_zero() {
            continue;
        }
        prog.add_linear_equality(e, 0.0)?;
    }
    Ok(gram)
}

/// A solved Gram matrix with its basis and cone tag.
#[derive(Clone, Debug, PartialEq)]
pub struct GramCertificate {
    pub basis: Vec<Monomial>,
    pub q: SymMatrix,
    pub cone: ConeTag,
    /// SDSOS block decomposition of `q`, when the solver produced one.
    pub witness: Option<SddWitness>,
}

impl GramCertificate {
    pub fn nvars(&self) -> Option<usize> {
        self.basis.first().map(Monomial::nvars)
    }

    /// `zᵀQz`.
    pub fn polynomial(&self, nvars: usize) -> Polynomial {
        let n = self.basis.len();
        let mut p = Polynomial::zero(nvars);
        for i in 0..n {
            for j in i..n {
                let s = if i == j { 1.0 } else { 2.0 };
                p.add_term(self.basis[i].mul(&self.basis[j]), s * self.q.get(i, j));
            }
        }
        p
    }

    /// Checks `q` against the predicate for its tag. Returns `(ok, margin)`.
    ///
    /// The margin is the dd slack for DSOS, the smallest witness block
    /// eigenvalue for SDSOS (NaN when `q` is not sdd), and the smallest
    /// eigenvalue for SOS.
    pub fn check_cone(&self, tol: f64) -> (bool, f64) {
        let n = self.q.dim();
        if n == 0 {
            return (true, 0.0);
        }
        match self.cone {
            ConeTag::Dsos => (is_dd(&self.q, tol), self.q.dd_margin()),
            ConeTag::Sdsos => {
                if n == 1 {
                    let a = self.q.get(0, 0);
                    return (a >= -tol, a);
                }
                if let Some(w) = &self.witness {
                    if w.certifies(&self.q, tol) {
                        return (true, w.min_block_eigenvalue());
                    }
                }
                match is_sdd(&self.q, tol) {
                    Ok((true, Some(w))) => (true, w.min_block_eigenvalue()),
                    Ok((true, None)) => (true, 0.0),
                    // no witness: there is no block margin to report
                    _ => (false, f64::NAN),
                }
            }
            ConeTag::Sos => (is_psd(&self.q, tol), self.q.min_eigenvalue()),
        }
    }
}

/// `{x ∈ Rⁿ : g_i(x) ≥ 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SemialgebraicSet {
    nvars: usize,
    constraints: Vec<Polynomial>,
}

impl SemialgebraicSet {
    /// All of `Rⁿ`.
    pub fn new(nvars: usize) -> Self {
        SemialgebraicSet {
            nvars,
            constraints: Vec::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn constraints(&self) -> &[Polynomial] {
        &self.constraints
    }

    fn check(&self, g: &Polynomial) -> Result<(), CertifyError> {
        if g.nvars() != self.nvars {
            return Err(CertifyError::DimensionMismatch {
                expected: self.nvars,
                got: g.nvars(),
            });
        }
        Ok(())
    }

    /// Adds `g ≥ 0`.
    pub fn with_inequality(mut self, g: Polynomial) -> Result<Self, CertifyError> {
        self.check(&g)?;
        self.constraints.push(g);
        Ok(self)
    }

    /// Adds `h = 0` as the pair `h ≥ 0`, `−h ≥ 0`.
    pub fn with_equality(mut self, h: Polynomial) -> Result<Self, CertifyError> {
        self.check(&h)?;
        let neg = -&h;
        self.constraints.push(h);
        self.constraints.push(neg);
        Ok(self)
    }

    /// Adds `R² − Σ x_i² ≥ 0`.
    pub fn with_ball(self, radius: f64) -> Self {
        let n = self.nvars;
        let mut g = Polynomial::constant(n, radius * radius);
        for i in 0..n {
            let mut e = vec![0; n];
            e[i] = 2;
            g.add_term(Monomial::new(e), -1.0);
        }
        let mut s = self;
        s.constraints.push(g);
        s
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.constraints.iter().all(|g| g.eval(x) >= -tol)
    }
}

/// `p = σ₀ + Σ σ_i g_i` with every `σ` in `cone`.
#[derive(Clone, Debug, PartialEq)]
pub struct PutinarCertificate {
    pub poly: Polynomial,
    pub set: SemialgebraicSet,
    pub sigma0: GramCertificate,
    pub multipliers: Vec<GramCertificate>,
}

impl PutinarCertificate {
    pub fn cone(&self) -> ConeTag {
        self.sigma0.cone
    }

    /// Coefficients of `p − σ₀ − Σ σ_i g_i`.
    pub fn identity_residual(&self) -> Result<Polynomial, CertifyError> {
        let n = self.poly.nvars();
        if self.multipliers.len() != self.set.constraints.len() {
            return Err(CertifyError::DimensionMismatch {
                expected: self.set.constraints.len(),
                got: self.multipliers.len(),
            });
        }
        let mut r = self.poly.checked_sub(&self.sigma0.polynomial(n))?;
        for (s, g) in self.multipliers.iter().zip(&self.set.constraints) {
            r = r.checked_sub(&s.polynomial(n).checked_mul(g)?)?;
        }
        Ok(r)
    }
}

/// Builder state for a Putinar identity inside a caller-owned program.
#[derive(Clone, Debug)]
pub struct PutinarHandle {
    pub poly: LinPoly,
    pub set: SemialgebraicSet,
    pub sigma0: GramHandle,
    pub multipliers: Vec<GramHandle>,
}

impl PutinarHandle {
    /// Sum of the Gram traces of σ₀ and every σ_i.
    pub fn trace(&self) -> LinExpr {
        let mut t = self.sigma0.trace();
        for m in &self.multipliers {
            t.add_scaled(&m.trace(), 1.0);
        }
        t
    }
}

impl PutinarHandle {
    pub fn extract(&self, sol: &ConicSolution) -> PutinarCertificate {
        let x = sol.primal.as_deref().unwrap_or(&[]);
        PutinarCertificate {
            poly: self.poly.value_at(x),
            set: self.set.clone(),
            sigma0: self.sigma0.extract_at(x),
            multipliers: self.multipliers.iter().map(|m| m.extract_at(x)).collect(),
        }
    }
}

/// Adds `p − Σ σ_i g_i ∈ cone` with fresh `σ_i ∈ cone` of degree `mult_degree`.
///
/// σ₀'s half-degree is `⌈deg p / 2⌉`, raised to cover every `σ_i g_i`.
pub fn add_putinar(
    prog: &mut ConicProgram,
    p: &LinPoly,
    set: &SemialgebraicSet,
    cone: ConeTag,
    mult_degree: u32,
) -> Result<PutinarHandle, CertifyError> {
    if mult_degree % 2 != 0 {
        return Err(CertifyError::OddMultiplierDegree(mult_degree));
    }
    if p.nvars() != set.nvars {
        return Err(CertifyError::DimensionMismatch {
            expected: set.nvars,
            got: p.nvars(),
        });
    }
    let n = set.nvars;
    let mut rest = p.clone();
    let mut half = p.degree().div_ceil(2);
    let mut multipliers = Vec::with_capacity(set.constraints.len());
    for g in &set.constraints {
        let sigma = gram_in_cone(prog, n, graded_basis(n, 0, mult_degree / 2), cone)?;
        rest.add_assign_scaled(&sigma.to_linpoly().mul_poly(g), -1.0);
        half = half.max((mult_degree + g.degree()).div_ceil(2));
        multipliers.push(sigma);
    }
    let sigma0 = constrain_in_cone(prog, &rest, cone, half)?;
    Ok(PutinarHandle {
        poly: p.clone(),
        set: set.clone(),
        sigma0,
        multipliers,
    })
}

/// Interprets a solve: extracts, verifies, and maps statuses to errors.
pub fn finish_putinar(
    handle: &PutinarHandle,
    sol: &ConicSolution,
    tol: f64,
) -> Result<PutinarCertificate, CertifyError> {
    match sol.status {
        SolveStatus::Optimal | SolveStatus::Inaccurate => {
            let cert = handle.extract(sol);
            let report = verify_certificate(&cert, tol);
            if report.passed {
                Ok(cert)
            } else {
                Err(CertifyError::Verification(Box::new(report)))
            }
        }
        SolveStatus::Infeasible => Err(CertifyError::Infeasible(sol.backend_status.clone())),
        SolveStatus::Unbounded | SolveStatus::Failed => {
            Err(CertifyError::SolverFailure(sol.backend_status.clone()))
        }
    }
}

/// Searches for a Putinar certificate of `p ≥ 0` on `set`.
///
/// A returned certificate has already passed [`verify_certificate`] at
/// [`VERIFY_TOL`]. `Infeasible` means no certificate exists at this degree
/// and cone; it is not a proof that `p` goes negative.
pub fn putinar_feasibility(
    p: &Polynomial,
    set: &SemialgebraicSet,
    cone: ConeTag,
    mult_degree: u32,
    backend: &dyn Backend,
) -> Result<PutinarCertificate, CertifyError> {
    let mut prog = ConicProgram::new();
    let handle = add_putinar(&mut prog, &LinPoly::from(p), set, cone, mult_degree)?;
    let sol = crate::conic::solve(&prog, backend, &SolveOptions::default())?;
    finish_putinar(&handle, &sol, VERIFY_TOL)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Diagnosis {
    IdentityResidual { residual: f64 },
    /// `multiplier` 0 is σ₀, `k` is the multiplier of constraint `k − 1`.
    ConeViolation {
        multiplier: usize,
        cone: ConeTag,
        margin: f64,
    },
    Malformed(String),
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnosis::IdentityResidual { residual } => {
                write!(f, "identity residual {residual:.3e}")
            }
            Diagnosis::ConeViolation {
                multiplier,
                cone,
                margin,
            } => write!(f, "sigma{multiplier} not in {cone} (margin {margin:.3e})"),
            Diagnosis::Malformed(m) => write!(f, "malformed certificate: {m}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierReport {
    pub cone: ConeTag,
    pub cone_ok: bool,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub tol: f64,
    /// Max-abs coefficient of `p − σ₀ − Σ σ_i g_i`.
    pub identity_residual: f64,
    /// σ₀ first.
    pub multipliers: Vec<MultiplierReport>,
    pub failures: Vec<Diagnosis>,
    pub passed: bool,
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (identity residual {:.3e}, tol {:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.identity_residual,
            self.tol
        )?;
        for (k, m) in self.multipliers.iter().enumerate() {
            write!(f, "; sigma{k} {} margin {:.3e}", m.cone, m.margin)?;
        }
        write!(f, ")")?;
        for d in &self.failures {
            write!(f, "; {d}")?;
        }
        Ok(())
    }
}

/// Recomputes every σ from its Gram data and checks the identity and cones.
pub fn verify_certificate(cert: &PutinarCertificate, tol: f64) -> VerificationReport {
    let mut failures = Vec::new();
    let n = cert.poly.nvars();
    let mut grams = vec![&cert.sigma0];
    grams.extend(cert.multipliers.iter());

    for (k, g) in grams.iter().enumerate() {
        if g.q.dim() != g.basis.len() {
            failures.push(Diagnosis::Malformed(format!(
                "sigma{k}: basis has {} monomials but Gram matrix is {}x{}",
                g.basis.len(),
                g.q.dim(),
                g.q.dim()
            )));
        }
        if g.basis.iter().any(|m| m.nvars() != n) {
            failures.push(Diagnosis::Malformed(format!("sigma{k}: basis dimension")));
        }
    }
    if cert.set.nvars != n {
        failures.push(Diagnosis::Malformed("set dimension".into()));
    }
    if !failures.is_empty() {
        return VerificationReport {
            tol,
            identity_residual: f64::INFINITY,
            multipliers: Vec::new(),
            failures,
            passed: false,
        };
    }

    let identity_residual = match cert.identity_residual() {
        Ok(r) => r.max_abs_coeff(),
        Err(e) => {
            failures.push(Diagnosis::Malformed(e.to_string()));
            f64::INFINITY
        }
    };
    if !(identity_residual <= tol) {
        failures.push(Diagnosis::IdentityResidual {
            residual: identity_residual,
        });
    }
    let mut multipliers = Vec::with_capacity(grams.len());
    for (k, g) in grams.iter().enumerate() {
        let (cone_ok, margin) = g.check_cone(tol);
        if !cone_ok {
            failures.push(Diagnosis::ConeViolation {
                multiplier: k,
                cone: g.cone,
                margin,
            });
        }
        multipliers.push(MultiplierReport {
            cone: g.cone,
            cone_ok,
            margin,
        });
    }
    VerificationReport {
        tol,
        identity_residual,
        multipliers,
        passed: failures.is_empty(),
        failures,
    }
}
