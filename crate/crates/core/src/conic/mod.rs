//! Solver-agnostic conic programs (LP, SOCP, SDP) and the backend contract.
//!
//! A [`ConicProgram`] is `minimize cᵀx` over scalar variables subject to
//! sparse linear equalities and cone memberships. Backends translate it to
//! whatever their solver consumes; see [`clarabel_backend`].

pub mod clarabel_backend;
mod expr;
mod interchange;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use clarabel_backend::ClarabelBackend;
pub use expr::LinExpr;
pub(crate) use interchange::real;

/// Index of a scalar program variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub usize);

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("variable index {0} out of range")]
    InvalidVar(usize),
    #[error("psd block of dimension {dim} needs {expected} entries, got {got}")]
    PsdLayout {
        dim: usize,
        expected: usize,
        got: usize,
    },
    #[error("backend '{backend}' does not support {cone} cones")]
    UnsupportedCone { backend: String, cone: ConeKind },
    #[error("unknown backend '{0}'")]
    UnknownBackend(String),
    #[error("interchange format error on line {line}: {msg}")]
    Format { line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeKind {
    Nonnegative,
    RotatedSecondOrder,
    PositiveSemidefinite,
}

impl fmt::Display for ConeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConeKind::Nonnegative => "nonnegative",
            ConeKind::RotatedSecondOrder => "rotated second-order",
            ConeKind::PositiveSemidefinite => "psd",
        })
    }
}

/// `Σ coef·x = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Equality {
    pub terms: Vec<(Var, f64)>,
    pub rhs: f64,
}

/// `2·u·v ≥ ‖w‖²`, `u, v ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct RotatedCone {
    pub u: Var,
    pub v: Var,
    pub w: Vec<Var>,
}

/// Symmetric matrix of variables, upper triangle stored row-major
/// (`(0,0), (0,1), .., (0,m-1), (1,1), ..`).
#[derive(Clone, Debug, PartialEq)]
pub struct PsdBlock {
    pub dim: usize,
    pub entries: Vec<Var>,
}

impl PsdBlock {
    pub fn index(dim: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * dim - i * i.saturating_sub(1) / 2 + (j - i)
    }

    pub fn entry(&self, i: usize, j: usize) -> Var {
        self.entries[Self::index(self.dim, i, j)]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConicProgram {
    num_vars: usize,
    objective: Vec<(Var, f64)>,
    equalities: Vec<Equality>,
    nonneg: Vec<Var>,
    rotated: Vec<RotatedCone>,
    psd: Vec<PsdBlock>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self) -> Var {
        self.num_vars += 1;
        Var(self.num_vars - 1)
    }

    pub fn add_variables(&mut self, count: usize) -> Vec<Var> {
        (0..count).map(|_| self.add_variable()).collect()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    fn check(&self, v: Var) -> Result<(), ConicError> {
        if v.0 < self.num_vars {
            Ok(())
        } else {
            Err(ConicError::InvalidVar(v.0))
        }
    }

    /// Adds `coef·x` to the (minimized) objective.
    pub fn add_objective_term(&mut self, v: Var, coef: f64) -> Result<(), ConicError> {
        self.check(v)?;
        self.objective.push((v, coef));
        Ok(())
    }

    pub fn add_objective(&mut self, e: &LinExpr) -> Result<(), ConicError> {
        for &(v, c) in e.terms() {
            self.add_objective_term(v, c)?;
        }
        Ok(())
    }

    pub fn add_equality(&mut self, terms: Vec<(Var, f64)>, rhs: f64) -> Result<(), ConicError> {
        for &(v, _) in &terms {
            self.check(v)?;
        }
        self.equalities.push(Equality { terms, rhs });
        Ok(())
    }

    /// `e == rhs`, with the constant part of `e` moved to the right.
    pub fn add_linear_equality(&mut self, e: &LinExpr, rhs: f64) -> Result<(), ConicError> {
        self.add_equality(e.terms().to_vec(), rhs - e.constant())
    }

    pub fn add_nonneg(&mut self, vars: &[Var]) -> Result<(), ConicError> {
        for &v in vars {
            self.check(v)?;
        }
        self.nonneg.extend_from_slice(vars);
        Ok(())
    }

    /// Introduces a fresh variable `s ≥ 0` with `s = e`, i.e. `e ≥ 0`.
    pub fn add_linear_nonneg(&mut self, e: &LinExpr) -> Result<Var, ConicError> {
        let s = self.add_variable();
        let mut terms = e.terms().to_vec();
        terms.push((s, -1.0));
        self.add_equality(terms, -e.constant())?;
        self.nonneg.push(s);
        Ok(s)
    }

    pub fn add_rotated_cone(&mut self, u: Var, v: Var, w: Vec<Var>) -> Result<(), ConicError> {
        self.check(u)?;
        self.check(v)?;
        for &x in &w {
            self.check(x)?;
        }
        self.rotated.push(RotatedCone { u, v, w });
        Ok(())
    }

    pub fn add_psd_block(&mut self, dim: usize, entries: Vec<Var>) -> Result<(), ConicError> {
        let expected = dim * (dim + 1) / 2;
        if entries.len() != expected {
            return Err(ConicError::PsdLayout {
                dim,
                expected,
                got: entries.len(),
            });
        }
        for &x in &entries {
            self.check(x)?;
        }
        self.psd.push(PsdBlock { dim, entries });
        Ok(())
    }

    /// Allocates a fresh `dim × dim` psd block of new variables.
    pub fn new_psd_block(&mut self, dim: usize) -> PsdBlock {
        let entries = self.add_variables(dim * (dim + 1) / 2);
        let block = PsdBlock { dim, entries };
        self.psd.push(block.clone());
        block
    }

    pub fn objective(&self) -> &[(Var, f64)] {
        &self.objective
    }

    pub fn equalities(&self) -> &[Equality] {
        &self.equalities
    }

    pub fn nonneg(&self) -> &[Var] {
        &self.nonneg
    }

    pub fn rotated_cones(&self) -> &[RotatedCone] {
        &self.rotated
    }

    pub fn psd_blocks(&self) -> &[PsdBlock] {
        &self.psd
    }

    pub fn cone_kinds(&self) -> Vec<ConeKind> {
        let mut kinds = Vec::new();
        if !self.nonneg.is_empty() {
            kinds.push(ConeKind::Nonnegative);
        }
        if !self.rotated.is_empty() {
            kinds.push(ConeKind::RotatedSecondOrder);
        }
        if !self.psd.is_empty() {
            kinds.push(ConeKind::PositiveSemidefinite);
        }
        kinds
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * x[v.0]).sum()
    }

    /// Largest equality / cone violation of `x`, each scaled by `max(1, |rhs|)`
    /// for equalities and absolute for cones.
    pub fn residuals(&self, x: &[f64]) -> Residuals {
        let mut eq: f64 = 0.0;
        for e in &self.equalities {
            let lhs: f64 = e.terms.iter().map(|&(v, c)| c * x[v.0]).sum();
            eq = eq.max((lhs - e.rhs).abs() / e.rhs.abs().max(1.0));
        }
        let mut cone: f64 = 0.0;
        for v in &self.nonneg {
            cone = cone.max(-x[v.0]);
        }
        for r in &self.rotated {
            let (u, v) = (x[r.u.0], x[r.v.0]);
            let ww: f64 = r.w.iter().map(|w| x[w.0] * x[w.0]).sum();
            // distance-like violation of (u+v)/√2 ≥ ‖((u-v)/√2, w)‖
            let lhs = (u + v) / std::f64::consts::SQRT_2;
            let rhs = (((u - v) * (u - v)) / 2.0 + ww).sqrt();
            cone = cone.max(rhs - lhs);
        }
        for b in &self.psd {
            let m = crate::cones::SymMatrix::from_fn(b.dim, |i, j| x[b.entry(i, j).0]);
            cone = cone.max(-m.min_eigenvalue());
        }
        Residuals {
            equality: eq,
            cone: cone.max(0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residuals {
    pub equality: f64,
    pub cone: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.equality.max(self.cone)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Inaccurate,
    Failed,
}

impl SolveStatus {
    pub fn has_primal(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Inaccurate)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Inaccurate => "inaccurate",
            SolveStatus::Failed => "failed",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Present iff `status.has_primal()`.
    pub primal: Option<Vec<f64>>,
    pub objective: f64,
    pub solve_time: f64,
    /// The backend's own status string, surfaced verbatim.
    pub backend_status: String,
}

impl ConicSolution {
    pub fn value(&self, v: Var) -> f64 {
        self.primal.as_ref().map(|x| x[v.0]).unwrap_or(f64::NAN)
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        match &self.primal {
            Some(x) => e.eval(x),
            None => f64::NAN,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub max_iter: u32,
    pub time_limit: Option<f64>,
    pub verbose: bool,
    /// Post-solve residual bound for reporting `Optimal`.
    pub residual_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iter: 200,
            time_limit: None,
            verbose: false,
            residual_tol: 1e-6,
        }
    }
}

/// A conic solver adapter.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn supports(&self, cone: ConeKind) -> bool;

    /// Whether one handle may serve concurrent `solve` calls.
    fn is_reentrant(&self) -> bool;

    fn solve(&self, prog: &ConicProgram, opts: &SolveOptions) -> Result<ConicSolution, ConicError>;

    fn check_supported(&self, prog: &ConicProgram) -> Result<(), ConicError> {
        for kind in prog.cone_kinds() {
            if !self.supports(kind) {
                return Err(ConicError::UnsupportedCone {
                    backend: self.name().to_string(),
                    cone: kind,
                });
            }
        }
        Ok(())
    }
}

pub type BackendHandle = Arc<dyn Backend>;

/// Environment variable overriding the backend choice.
pub const BACKEND_ENV: &str = "POLYCERT_BACKEND";

/// Registered backend names.
pub const BACKENDS: &[&str] = &["clarabel", "clarabel-socp"];

pub fn backend_by_name(name: &str) -> Result<BackendHandle, ConicError> {
    match name {
        "clarabel" => Ok(Arc::new(ClarabelBackend::new())),
        "clarabel-socp" => Ok(Arc::new(ClarabelBackend::socp_only())),
        other => Err(ConicError::UnknownBackend(other.to_string())),
    }
}

/// The default backend, honoring [`BACKEND_ENV`].
pub fn default_backend() -> Result<BackendHandle, ConicError> {
    match std::env::var(BACKEND_ENV) {
        Ok(name) if !name.is_empty() => backend_by_name(&name),
        _ => backend_by_name("clarabel"),
    }
}

pub fn solve(
    prog: &ConicProgram,
    backend: &dyn Backend,
    opts: &SolveOptions,
) -> Result<ConicSolution, ConicError> {
    backend.check_supported(prog)?;
    backend.solve(prog, opts)
}
