//! Region-of-attraction estimation by bilinear alternation.
//!
//! For `ẋ = f(x) + G(x)u(x)` with an equilibrium at the origin, the set
//! `{V ≤ ρ}` is certified invariant and attracted to the origin by
//!
//! * `V − ε‖x‖² ∈ cone`,
//! * `−V̇ + L·(V − ρ) − ε‖x‖² ∈ cone` with `L ∈ cone`,
//!
//! normalised by `Σ_j V(e_j) = 1`. The product `L·(V − ρ)` is bilinear, so the
//! search alternates between `(ρ, L, u)` with `V` fixed (bisection on `ρ`) and
//! `(V, ρ)` with `L, u` fixed (one conic program maximising `ρ`).

use std::fmt::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::certify::{
    add_putinar, declare_poly_var_with_basis, finish_putinar, gram_in_cone, CertifyError, ConeTag,
    GramCertificate, LinPoly, PutinarCertificate, SemialgebraicSet, VERIFY_TOL,
};
use crate::conic::{self, Backend, ConicProgram, LinExpr, SolveOptions, SolveStatus};
use crate::poly::{graded_basis, monomial_basis, Monomial, PolyError, Polynomial};

#[derive(Debug, Error)]
pub enum RoaError {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("linearization is not Hurwitz (max real part {0:.3e})")]
    NotHurwitz(f64),
    #[error("(A, B) is not stabilizable by the fallback gain")]
    NotStabilizable,
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),
    #[error("multiplier step infeasible at the smallest level ρ = {0:e}")]
    InitInfeasible(f64),
    #[error("iteration {iteration} failed after ρ trace {trace:?}: {source}")]
    StepFailed {
        iteration: usize,
        trace: Vec<f64>,
        source: Box<RoaError>,
    },
    #[error("sublevel sampling needs a quadratic V")]
    NotQuadratic,
    #[error("system format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Certify(#[from] CertifyError),
}

impl From<PolyError> for RoaError {
    fn from(e: PolyError) -> Self {
        RoaError::Certify(e.into())
    }
}

impl From<conic::ConicError> for RoaError {
    fn from(e: conic::ConicError) -> Self {
        RoaError::Certify(e.into())
    }
}

/// `ẋ = f(x) + G(x)u`, with `f(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySystem {
    pub f: Vec<Polynomial>,
    /// `n` rows of `m` input channels; empty when the system has no inputs.
    pub g: Vec<Vec<Polynomial>>,
}

impl PolySystem {
    pub fn new(f: Vec<Polynomial>) -> Result<Self, RoaError> {
        Self::with_inputs(f, Vec::new())
    }

    pub fn with_inputs(f: Vec<Polynomial>, g: Vec<Vec<Polynomial>>) -> Result<Self, RoaError> {
        let n = f.len();
        if n == 0 {
            return Err(RoaError::InvalidSystem("no states".into()));
        }
        if f.iter().any(|p| p.nvars() != n) {
            return Err(RoaError::InvalidSystem(format!("every f_i must have {n} variables")));
        }
        if !g.is_empty() {
            let m = g[0].len();
            if g.len() != n || m == 0 || g.iter().any(|row| row.len() != m) {
                return Err(RoaError::InvalidSystem(format!("G must be {n} × m with m ≥ 1")));
            }
            if g.iter().flatten().any(|p| p.nvars() != n) {
                return Err(RoaError::InvalidSystem(format!("every G_ij must have {n} variables")));
            }
        }
        let zero = vec![0.0; n];
        if let Some(i) = f.iter().position(|p| p.eval(&zero).abs() > 1e-12) {
            return Err(RoaError::InvalidSystem(format!("f_{i}(0) ≠ 0")));
        }
        Ok(PolySystem { f, g })
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn m(&self) -> usize {
        self.g.first().map_or(0, Vec::len)
    }

    /// `f + G u` as polynomials.
    pub fn closed_loop(&self, u: &[Polynomial]) -> Vec<Polynomial> {
        let mut out = self.f.clone();
        for (i, row) in self.g.iter().enumerate() {
            for (gik, uk) in row.iter().zip(u) {
                out[i] = &out[i] + &(gik * uk);
            }
        }
        out
    }

    /// Change of coordinates `x = T z`.
    pub fn transformed(&self, t: &DMatrix<f64>) -> Result<PolySystem, RoaError> {
        let n = self.n();
        let tinv = t
            .clone()
            .try_inverse()
            .ok_or(RoaError::InvalidSystem("singular transform".into()))?;
        let rows = rows_of(t);
        let zero = vec![0.0; n];
        let fx: Vec<Polynomial> = self
            .f
            .iter()
            .map(|p| p.substitute_affine(&rows, &zero))
            .collect::<Result<_, _>>()?;
        let mix = |v: &[Polynomial], i: usize| {
            let mut acc = Polynomial::zero(n);
            for (j, p) in v.iter().enumerate() {
                acc = &acc + &p.scale(tinv[(i, j)]);
            }
            acc
        };
        let f = (0..n).map(|i| mix(&fx, i)).collect();
        let mut g = Vec::new();
        if self.m() > 0 {
            let gx: Vec<Vec<Polynomial>> = self
                .g
                .iter()
                .map(|row| row.iter().map(|p| p.substitute_affine(&rows, &zero)).collect())
                .collect::<Result<_, _>>()?;
            g = (0..n)
                .map(|i| {
                    (0..self.m())
                        .map(|k| {
                            let col: Vec<Polynomial> = gx.iter().map(|row| row[k].clone()).collect();
                            mix(&col, i)
                        })
                        .collect()
                })
                .collect();
        }
        PolySystem::with_inputs(f, g)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("polycert-system 1\nn {}\nm {}\n", self.n(), self.m());
        for p in &self.f {
            writeln!(s, "f {p}").unwrap();
        }
        for (i, row) in self.g.iter().enumerate() {
            for (k, p) in row.iter().enumerate() {
                if !p.is_zero() {
                    writeln!(s, "g {i} {k} {p}").unwrap();
                }
            }
        }
        s.push_str("end\n");
        s
    }

    /// Reads the format written by [`PolySystem::to_text`]; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<PolySystem, RoaError> {
        let err = |line: usize, msg: &str| RoaError::Format {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, "polycert-system 1")) => {}
            Some((ln, _)) => return Err(err(ln, "expected 'polycert-system 1'")),
            None => return Err(err(0, "empty input")),
        }
        let mut header = |key: &str| -> Result<usize, RoaError> {
            let (ln, l) = lines.next().ok_or(err(0, "truncated header"))?;
            l.strip_prefix(key)
                .and_then(|r| r.trim().parse().ok())
                .ok_or(err(ln, &format!("expected '{key} <count>'")))
        };
        let n = header("n ")?;
        let m = header("m ")?;
        let mut f = Vec::with_capacity(n);
        let mut g = if m > 0 {
            vec![vec![Polynomial::zero(n); m]; n]
        } else {
            Vec::new()
        };
        let mut ended = false;
        for (ln, l) in lines {
            if l == "end" {
                ended = true;
                break;
            }
            if let Some(rest) = l.strip_prefix("f ") {
                f.push(Polynomial::parse(rest, n).map_err(|e| err(ln, &e.to_string()))?);
            } else if let Some(rest) = l.strip_prefix("g ") {
                let mut it = rest.splitn(3, ' ');
                let i: usize = it.next().and_then(|s| s.parse().ok()).ok_or(err(ln, "bad row"))?;
                let k: usize = it.next().and_then(|s| s.parse().ok()).ok_or(err(ln, "bad column"))?;
                if i >= n || k >= m {
                    return Err(err(ln, "G index out of range"));
                }
                let p = it.next().ok_or(err(ln, "missing polynomial"))?;
                g[i][k] = Polynomial::parse(p, n).map_err(|e| err(ln, &e.to_string()))?;
            } else {
                return Err(err(ln, &format!("unexpected line '{l}'")));
            }
        }
        if !ended {
            return Err(err(0, "missing 'end'"));
        }
        if f.len() != n {
            return Err(err(0, &format!("expected {n} f lines, got {}", f.len())));
        }
        PolySystem::with_inputs(f, g)
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Jacobian of a polynomial field at `x`.
pub fn jacobian_at(field: &[Polynomial], x: &[f64]) -> Result<DMatrix<f64>, RoaError> {
    let n = x.len();
    let mut a = DMatrix::zeros(field.len(), n);
    for (i, p) in field.iter().enumerate() {
        for j in 0..n {
            a[(i, j)] = p.partial_derivative(j)?.eval(x);
        }
    }
    Ok(a)
}

/// `A = ∂f/∂x(0)` and, with inputs, `B = G(0)`.
pub fn linearize(sys: &PolySystem) -> Result<(DMatrix<f64>, Option<DMatrix<f64>>), RoaError> {
    let n = sys.n();
    let zero = vec![0.0; n];
    let a = jacobian_at(&sys.f, &zero)?;
    let b = (sys.m() > 0).then(|| DMatrix::from_fn(n, sys.m(), |i, k| sys.g[i][k].eval(&zero)));
    Ok((a, b))
}

pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solves `AᵀP + PA = −Q` through the Kronecker form.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, RoaError> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let m = id.kronecker(&at) + at.kronecker(&id);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or(RoaError::InvalidSystem("singular Lyapunov operator".into()))?;
    let p = DMatrix::from_column_slice(n, n, x.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// `xᵀPx` as a polynomial.
pub fn quadratic_form(p: &DMatrix<f64>) -> Polynomial {
    let n = p.nrows();
    let mut v = Polynomial::zero(n);
    for i in 0..n {
        for j in i..n {
            let c = if i == j { p[(i, i)] } else { p[(i, j)] + p[(j, i)] };
            let mut e = vec![0; n];
            e[i] += 1;
            e[j] += 1;
            v.add_term(Monomial::new(e), c);
        }
    }
    v
}

/// `Σ_j V(e_j)`.
pub fn normalization(v: &Polynomial) -> f64 {
    let n = v.nvars();
    (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            v.eval(&e)
        })
        .sum()
}

/// `V₀ = xᵀPx / tr P` with `AᵀP + PA = −I`.
pub fn lyap_init(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Polynomial), RoaError> {
    let s = spectral_abscissa(a);
    if s >= 0.0 {
        return Err(RoaError::NotHurwitz(s));
    }
    let n = a.nrows();
    let p = solve_lyapunov(a, &DMatrix::identity(n, n))?;
    if p.clone().cholesky().is_none() {
        return Err(RoaError::NotPositiveDefinite("Lyapunov solution"));
    }
    let v = quadratic_form(&p);
    let scale = normalization(&v);
    Ok((p, v.scale(1.0 / scale)))
}

/// A gain `K` with `A − BK` Hurwitz, by Bass's construction.
///
/// With `λ` beyond the spectrum of `−A`, `(A + λI)P + P(A + λI)ᵀ = BBᵀ` has a
/// positive definite solution iff `(A, B)` is controllable, and `K = BᵀP⁻¹`
/// puts every closed-loop eigenvalue left of `−λ`.
pub fn stabilizing_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, RoaError> {
    let n = a.nrows();
    let min_re = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    let lambda = (-min_re).max(0.0) + 1.0;
    let shifted = -(a + DMatrix::<f64>::identity(n, n) * lambda).transpose();
    let p = solve_lyapunov(&shifted, &(b * b.transpose()))?;
    let pinv = p
        .clone()
        .cholesky()
        .ok_or(RoaError::NotStabilizable)?
        .inverse();
    let k = b.transpose() * pinv;
    if spectral_abscissa(&(a - b * &k)) >= 0.0 {
        return Err(RoaError::NotStabilizable);
    }
    Ok(k)
}

/// Hessian of `p` at the origin.
pub fn hessian_at_origin(p: &Polynomial) -> Result<DMatrix<f64>, RoaError> {
    let n = p.nvars();
    let zero = vec![0.0; n];
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let di = p.partial_derivative(i)?;
        for j in 0..n {
            h[(i, j)] = di.partial_derivative(j)?.eval(&zero);
        }
    }
    Ok(h)
}

/// `T` with `TᵀH₁T = I` and `TᵀH₂T` diagonal.
pub fn hessian_diagonalizing_transform(
    h1: &DMatrix<f64>,
    h2: &DMatrix<f64>,
) -> Result<DMatrix<f64>, RoaError> {
    let l = h1
        .clone()
        .cholesky()
        .ok_or(RoaError::NotPositiveDefinite("Hessian of V"))?
        .l();
    if h2.clone().cholesky().is_none() {
        return Err(RoaError::NotPositiveDefinite("Hessian of −V̇"));
    }
    let linv = l
        .try_inverse()
        .ok_or(RoaError::NotPositiveDefinite("Hessian of V"))?;
    let m = &linv * h2 * linv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = m.symmetric_eigen();
    Ok(linv.transpose() * eig.eigenvectors)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoaOptions {
    pub cone: ConeTag,
    pub v_degree: u32,
    pub l_degree: u32,
    pub u_degree: u32,
    pub max_iters: usize,
    /// Stop when `|ρ_k − ρ_{k−1}| < rel_tol · ρ_{k−1}`.
    pub rel_tol: f64,
    /// Bisection stops when `hi − lo ≤ bisect_tol · hi`.
    pub bisect_tol: f64,
    pub rho_min: f64,
    pub rho_cap: f64,
    /// Margin in `V − ε‖x‖²` and in the decrease condition.
    pub eps: f64,
    /// Run in coordinates that diagonalise the Hessians of `V₀` and `−V̇₀`.
    pub transform: bool,
    /// Initial linear feedback `u = −Kx`; Bass's gain when absent.
    pub gain: Option<DMatrix<f64>>,
    pub solve: SolveOptions,
}

impl Default for RoaOptions {
    fn default() -> Self {
        RoaOptions {
            cone: ConeTag::Sdsos,
            v_degree: 2,
            l_degree: 4,
            u_degree: 3,
            max_iters: 30,
            rel_tol: 0.01,
            bisect_tol: 1e-4,
            rho_min: 1e-3,
            rho_cap: 1e6,
            eps: 1e-6,
            transform: false,
            gain: None,
            solve: SolveOptions::default(),
        }
    }
}

fn sum_squares(n: usize, eps: f64) -> Polynomial {
    let mut p = Polynomial::zero(n);
    for i in 0..n {
        p.add_term(Monomial::var(n, i).mul(&Monomial::var(n, i)), eps);
    }
    p
}

/// `∇V · G` as one polynomial per input.
fn grad_dot_columns(v: &Polynomial, sys: &PolySystem) -> Result<Vec<Polynomial>, RoaError> {
    let grad = v.gradient();
    Ok((0..sys.m())
        .map(|k| {
            grad.iter()
                .zip(&sys.g)
                .fold(Polynomial::zero(sys.n()), |acc, (d, row)| &acc + &(d * &row[k]))
        })
        .collect())
}

/// Handles of one multiplier-step program.
pub struct MultiplierProgram {
    pub prog: ConicProgram,
    pub l: crate::certify::GramHandle,
    pub u: Vec<crate::certify::PolyVar>,
    pub main: crate::certify::PutinarHandle,
}

/// Builds `−V̇ + L(V − ρ) − ε‖x‖² ∈ cone, L ∈ cone` for fixed `V` and `ρ`.
///
/// The controller coefficients are free when the system has inputs.
pub fn build_multiplier_program(
    sys: &PolySystem,
    v: &Polynomial,
    rho: f64,
    opts: &RoaOptions,
) -> Result<MultiplierProgram, RoaError> {
    let n = sys.n();
    let mut prog = ConicProgram::new();
    let l = gram_in_cone(&mut prog, n, graded_basis(n, 1, opts.l_degree / 2), opts.cone)?;
    let u: Vec<_> = (0..sys.m())
        .map(|_| declare_poly_var_with_basis(&mut prog, n, graded_basis(n, 1, opts.u_degree)))
        .collect();

    let vl = LinPoly::from(v);
    let mut main = vl.lie_derivative(&sys.f)?.scale(-1.0);
    for (col, uk) in grad_dot_columns(v, sys)?.iter().zip(&u) {
        main.add_assign_scaled(&uk.to_linpoly().mul_poly(col), -1.0);
    }
    let mut shifted = v.clone();
    shifted.add_term(Monomial::one(n), -rho);
    main.add_assign_scaled(&l.to_linpoly().mul_poly(&shifted), 1.0);
    let main = main.add_poly(&sum_squares(n, -opts.eps));
    let main = add_putinar(&mut prog, &main, &SemialgebraicSet::new(n), opts.cone, 0)?;
    Ok(MultiplierProgram { prog, l, u, main })
}

#[derive(Clone, Debug)]
pub struct MultiplierStep {
    pub rho: f64,
    pub l: Polynomial,
    pub u: Vec<Polynomial>,
    pub l_cert: GramCertificate,
    pub main: PutinarCertificate,
    /// `ρ` reached the cap: effectively global.
    pub capped: bool,
    pub solves: usize,
}

fn try_multiplier(
    sys: &PolySystem,
    v: &Polynomial,
    rho: f64,
    opts: &RoaOptions,
    backend: &dyn Backend,
) -> Result<Option<MultiplierStep>, RoaError> {
    let mp = build_multiplier_program(sys, v, rho, opts)?;
    let sol = conic::solve(&mp.prog, backend, &opts.solve)?;
    if !matches!(sol.status, SolveStatus::Optimal | SolveStatus::Inaccurate) {
        return Ok(None);
    }
    let main = match finish_putinar(&mp.main, &sol, VERIFY_TOL) {
        Ok(c) => c,
        Err(_) => return Ok(None),
    };
    let l_cert = mp.l.extract(&sol);
    if !l_cert.check_cone(VERIFY_TOL).0 {
        return Ok(None);
    }
    Ok(Some(MultiplierStep {
        rho,
        l: l_cert.polynomial(sys.n()),
        u: mp.u.iter().map(|u| u.value(&sol)).collect(),
        l_cert,
        main,
        capped: false,
        solves: 1,
    }))
}

/// Largest `ρ` (to `bisect_tol`) for which `L` and `u` exist with `V` fixed.
///
/// `lo` is a level believed feasible; it is re-checked and replaced by
/// `rho_min` if the check fails. Solver failures count as infeasible.
pub fn multiplier_step(
    sys: &PolySystem,
    v: &Polynomial,
    lo: Option<f64>,
    opts: &RoaOptions,
    backend: &dyn Backend,
) -> Result<MultiplierStep, RoaError> {
    let mut solves = 0;
    let probe = |rho: f64, solves: &mut usize| {
        *solves += 1;
        try_multiplier(sys, v, rho, opts, backend)
    };
    let mut best = None;
    if let Some(lo) = lo.filter(|&r| r > opts.rho_min) {
        best = probe(lo, &mut solves)?;
    }
    if best.is_none() {
        best = probe(opts.rho_min, &mut solves)?;
    }
    let mut best = best.ok_or(RoaError::InitInfeasible(opts.rho_min))?;

    // grow geometrically until infeasible, then bisect
    let mut hi = None;
    while hi.is_none() {
        let next = (best.rho * 2.0).min(opts.rho_cap);
        match probe(next, &mut solves)? {
            Some(s) => {
                best = s;
                if next >= opts.rho_cap {
                    best.capped = true;
                    best.solves = solves;
                    return Ok(best);
                }
            }
            None => hi = Some(next),
        }
    }
    let mut hi = hi.unwrap();
    while hi - best.rho > opts.bisect_tol * hi {
        let mid = 0.5 * (best.rho + hi);
        match probe(mid, &mut solves)? {
            Some(s) => best = s,
            None => hi = mid,
        }
    }
    best.solves = solves;
    Ok(best)
}

#[derive(Clone, Debug)]
pub struct LyapunovStep {
    pub v: Polynomial,
    pub rho: f64,
    pub main: PutinarCertificate,
    pub positivity: PutinarCertificate,
}

/// Maximises `ρ` over `V` with `L` and `u` fixed.
pub fn lyapunov_step(
    sys: &PolySystem,
    l: &Polynomial,
    u: &[Polynomial],
    opts: &RoaOptions,
    backend: &dyn Backend,
) -> Result<LyapunovStep, RoaError> {
    let n = sys.n();
    let mut prog = ConicProgram::new();
    let v = declare_poly_var_with_basis(&mut prog, n, graded_basis(n, 2, opts.v_degree));
    let rho = prog.add_variable();
    let rho_e = LinExpr::var(rho);
    let vl = v.to_linpoly();

    // Σ_j V(e_j) = 1
    let mut norm = LinExpr::zero();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        norm.add_scaled(&vl.eval_point(&e), 1.0);
    }
    prog.add_linear_equality(&norm, 1.0)?;
    let mut cap = LinExpr::constant_expr(opts.rho_cap);
    cap.add_term(rho, -1.0);
    prog.add_linear_nonneg(&cap)?;

    let empty = SemialgebraicSet::new(n);
    let pd = vl.add_poly(&sum_squares(n, -opts.eps));
    let pd = add_putinar(&mut prog, &pd, &empty, opts.cone, 0)?;

    let field = sys.closed_loop(u);
    let mut main = vl.lie_derivative(&field)?.scale(-1.0);
    main.add_assign_scaled(&vl.mul_poly(l), 1.0);
    let rho_l = LinPoly::from(l)
        .mul_scalar_expr(&rho_e)
        .expect("L is numeric");
    main.add_assign_scaled(&rho_l, -1.0);
    let main = main.add_poly(&sum_squares(n, -opts.eps));
    let main = add_putinar(&mut prog, &main, &empty, opts.cone, 0)?;
    prog.add_objective_term(rho, -1.0)?;

    let sol = conic::solve(&prog, backend, &opts.solve)?;
    let main_cert = finish_putinar(&main, &sol, VERIFY_TOL)?;
    let positivity = finish_putinar(&pd, &sol, VERIFY_TOL)?;
    Ok(LyapunovStep {
        v: v.value(&sol),
        rho: sol.value(rho),
        main: main_cert,
        positivity,
    })
}

#[derive(Clone, Debug)]
pub struct RoaResult {
    /// In the original coordinates, normalised.
    pub v: Polynomial,
    pub rho: f64,
    pub u: Vec<Polynomial>,
    pub l: Polynomial,
    /// `ρ` after each completed iteration, in the working coordinates.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub capped: bool,
    /// `x = T z` when the Hessian transform was used.
    pub transform: Option<DMatrix<f64>>,
    /// Certificates in the working coordinates.
    pub main: PutinarCertificate,
    pub positivity: Option<PutinarCertificate>,
    pub l_cert: GramCertificate,
}

impl RoaResult {
    pub fn to_text(&self) -> String {
        let mut s = String::from("polycert-roa 1\n");
        writeln!(s, "n {}", self.v.nvars()).unwrap();
        writeln!(s, "rho {:?}", self.rho).unwrap();
        writeln!(s, "V {}", self.v).unwrap();
        for u in &self.u {
            writeln!(s, "u {u}").unwrap();
        }
        writeln!(s, "L {}", self.l).unwrap();
        let trace: Vec<String> = self.trace.iter().map(|r| format!("{r:?}")).collect();
        writeln!(s, "trace {}", trace.join(" ")).unwrap();
        writeln!(s, "iterations {}", self.iterations).unwrap();
        writeln!(s, "converged {}", self.converged).unwrap();
        writeln!(s, "capped {}", self.capped).unwrap();
        s
    }

    pub fn in_region(&self, x: &[f64]) -> bool {
        self.v.eval(x) <= self.rho
    }
}

fn linear_gain_controller(k: &DMatrix<f64>) -> Vec<Polynomial> {
    let n = k.ncols();
    (0..k.nrows())
        .map(|r| {
            let mut p = Polynomial::zero(n);
            for j in 0..n {
                p.add_term(Monomial::var(n, j), -k[(r, j)]);
            }
            p
        })
        .collect()
}

/// Initial `V₀` and linear controller from the (closed-loop) linearization.
pub fn initialize(
    sys: &PolySystem,
    opts: &RoaOptions,
) -> Result<(Polynomial, Vec<Polynomial>), RoaError> {
    let (a, b) = linearize(sys)?;
    match b {
        None => Ok((lyap_init(&a)?.1, Vec::new())),
        Some(b) => {
            let k = match &opts.gain {
                Some(k) => k.clone(),
                None => stabilizing_gain(&a, &b)?,
            };
            let v = lyap_init(&(a - &b * &k))?.1;
            Ok((v, linear_gain_controller(&k)))
        }
    }
}

fn map_back(p: &Polynomial, tinv: &DMatrix<f64>) -> Result<Polynomial, RoaError> {
    Ok(p.substitute_affine(&rows_of(tinv), &vec![0.0; p.nvars()])?)
}

/// Alternates multiplier and Lyapunov steps from the linearised seed.
pub fn run_alternation(
    sys: &PolySystem,
    opts: &RoaOptions,
    backend: &dyn Backend,
) -> Result<RoaResult, RoaError> {
    let (v0, u0) = initialize(sys, opts)?;
    let (work, mut v, mut u, t) = if opts.transform {
        let vdot = v0.lie_derivative(&sys.closed_loop(&u0))?;
        let t = hessian_diagonalizing_transform(
            &hessian_at_origin(&v0)?,
            &hessian_at_origin(&vdot.scale(-1.0))?,
        )?;
        let rows = rows_of(&t);
        let zero = vec![0.0; sys.n()];
        let vz = v0.substitute_affine(&rows, &zero)?;
        let vz = vz.scale(1.0 / normalization(&vz));
        let uz = u0
            .iter()
            .map(|p| p.substitute_affine(&rows, &zero))
            .collect::<Result<Vec<_>, _>>()?;
        (sys.transformed(&t)?, vz, uz, Some(t))
    } else {
        (sys.clone(), v0, u0, None)
    };

    let fail = |iteration: usize, trace: &[f64], e: RoaError| RoaError::StepFailed {
        iteration,
        trace: trace.to_vec(),
        source: Box::new(e),
    };
    let mut trace: Vec<f64> = Vec::new();
    let mut lo = None;
    let mut converged = false;
    let mut last: Option<(MultiplierStep, Option<LyapunovStep>)> = None;
    for it in 1..=opts.max_iters {
        let ms = multiplier_step(&work, &v, lo, opts, backend).map_err(|e| fail(it, &trace, e))?;
        if work.m() > 0 {
            u = ms.u.clone();
        }
        if ms.capped {
            trace.push(ms.rho);
            last = Some((ms, None));
            break;
        }
        // a failed Lyapunov step keeps the certified multiplier iterate
        let ls = lyapunov_step(&work, &ms.l, &u, opts, backend)
            .ok()
            .filter(|ls| ls.rho >= ms.rho);
        let rho = ls.as_ref().map_or(ms.rho, |ls| ls.rho);
        if let Some(ls) = &ls {
            v = ls.v.clone();
        }
        let prev = trace.last().copied();
        trace.push(rho);
        lo = Some(rho);
        let stalled = ls.is_none();
        last = Some((ms, ls));
        if let Some(p) = prev {
            if (rho - p).abs() < opts.rel_tol * p {
                converged = true;
                break;
            }
        }
        if stalled {
            converged = true;
            break;
        }
    }
    let (ms, ls) = last.expect("at least one iteration");
    let capped = ms.capped;
    let rho_work = *trace.last().unwrap();
    let (main, positivity) = match ls {
        Some(ls) => (ls.main, Some(ls.positivity)),
        None => (ms.main.clone(), None),
    };

    let (v_out, rho_out, u_out) = match &t {
        Some(t) => {
            let tinv = t.clone().try_inverse().expect("invertible transform");
            let vx = map_back(&v, &tinv)?;
            let s = normalization(&vx);
            let ux = u.iter().map(|p| map_back(p, &tinv)).collect::<Result<Vec<_>, _>>()?;
            (vx.scale(1.0 / s), rho_work / s, ux)
        }
        None => (v, rho_work, u),
    };
    Ok(RoaResult {
        v: v_out,
        rho: rho_out,
        u: u_out,
        l: ms.l,
        iterations: trace.len(),
        trace,
        converged,
        capped,
        transform: t,
        main,
        positivity,
        l_cert: ms.l_cert,
    })
}

/// Uniform samples of `{xᵀPx ≤ ρ}` for a quadratic `V`.
pub fn sample_sublevel(
    v: &Polynomial,
    rho: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>, RoaError> {
    let n = v.nvars();
    if v.terms().any(|(m, _)| m.degree() != 2) {
        return Err(RoaError::NotQuadratic);
    }
    let h = hessian_at_origin(v)? * 0.5;
    let l = h
        .cholesky()
        .ok_or(RoaError::NotPositiveDefinite("V"))?
        .l();
    let lt_inv = l
        .transpose()
        .try_inverse()
        .ok_or(RoaError::NotPositiveDefinite("V"))?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let g: DVector<f64> = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        let r = rng.gen_range(0.0..1.0f64).powf(1.0 / n as f64);
        let unit = g.normalize() * r;
        let x = &lt_inv * unit * rho.sqrt();
        out.push(x.iter().copied().collect());
    }
    Ok(out)
}

fn rk4_step(field: &[Polynomial], x: &[f64], dt: f64) -> Vec<f64> {
    let f = |y: &[f64]| -> Vec<f64> { field.iter().map(|p| p.eval(y)).collect() };
    let axpy = |y: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + h * b).collect()
    };
    let k1 = f(x);
    let k2 = f(&axpy(x, &k1, dt / 2.0));
    let k3 = f(&axpy(x, &k2, dt / 2.0));
    let k4 = f(&axpy(x, &k3, dt));
    (0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Fixed-step RK4; stops early once `‖x‖` drops below `stop_norm` or
/// exceeds `blowup`.
pub fn simulate_field(
    field: &[Polynomial],
    x0: &[f64],
    dt: f64,
    horizon: f64,
    stop_norm: f64,
    blowup: f64,
) -> Vec<f64> {
    let steps = (horizon / dt).ceil() as usize;
    let mut x = x0.to_vec();
    for _ in 0..steps {
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm < stop_norm || nrm > blowup || !nrm.is_finite() {
            break;
        }
        x = rk4_step(field, &x, dt);
    }
    x
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationCheck {
    pub samples: usize,
    pub failures: usize,
    pub horizon: f64,
    pub dt: f64,
    pub worst_final_norm: f64,
}

/// Samples `{V ≤ ρ}` and simulates the exact closed loop from each point.
///
/// The horizon is `20 / |slowest mode|` of the closed-loop linearization;
/// a sample passes if it ends within `1e−3` of the origin.
pub fn check_by_simulation(
    sys: &PolySystem,
    result: &RoaResult,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SimulationCheck, RoaError> {
    let field = sys.closed_loop(&result.u);
    let a = jacobian_at(&field, &vec![0.0; sys.n()])?;
    let eig = a.complex_eigenvalues();
    let slow = eig.iter().map(|z| -z.re).fold(f64::INFINITY, f64::min).max(1e-3);
    let fast = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let horizon = (20.0 / slow).min(1e3);
    let dt = (0.1 / fast.max(1.0)).min(0.01);
    let pts = sample_sublevel(&result.v, result.rho, samples, rng)?;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for x0 in &pts {
        let x = simulate_field(&field, x0, dt, horizon, 1e-4, 1e6);
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(nrm);
        if !(nrm <= 1e-3) {
            failures += 1;
        }
    }
    Ok(SimulationCheck {
        samples,
        failures,
        horizon,
        dt,
        worst_final_norm: worst,
    })
}

/// Indicator of `V ≤ ρ` on a grid over the `(i, j)` slice, other states zero.
pub fn slice_csv(result: &RoaResult, dims: (usize, usize), bbox: [f64; 4], res: usize) -> String {
    let n = result.v.nvars();
    let mut s = String::from("xi,xj,v,inside\n");
    let step = |lo: f64, hi: f64, k: usize| {
        if res <= 1 {
            lo
        } else {
            lo + (hi - lo) * k as f64 / (res - 1) as f64
        }
    };
    for a in 0..res {
        for b in 0..res {
            let mut x = vec![0.0; n];
            x[dims.0] = step(bbox[0], bbox[1], a);
            x[dims.1] = step(bbox[2], bbox[3], b);
            let v = result.v.eval(&x);
            writeln!(s, "{},{},{:.9e},{}", x[dims.0], x[dims.1], v, u8::from(v <= result.rho)).unwrap();
        }
    }
    s
}

/// `ẋ = −x + x³`.
pub fn cubic_1d() -> PolySystem {
    PolySystem::new(vec![Polynomial::parse("-1.0 * x0 + 1.0 * x0^3", 1).unwrap()]).unwrap()
}

/// Time-reversed Van der Pol: `ẋ₁ = −x₂`, `ẋ₂ = x₁ + (x₁² − 1)x₂`.
pub fn van_der_pol_reversed() -> PolySystem {
    PolySystem::new(vec![
        Polynomial::parse("-1.0 * x1", 2).unwrap(),
        Polynomial::parse("1.0 * x0 + -1.0 * x1 + 1.0 * x0^2 x1", 2).unwrap(),
    ])
    .unwrap()
}

/// Cross-track servo around primitive 1 with cubic Taylor kinematics.
///
/// States `(x, ψ, s)`: lateral offset, yaw, and a heading command that an
/// outer loop steers from the offset. `ẋ = −ψ + ψ³/6`, `ψ̇ = −K(ψ − s)`,
/// `ṡ = x − 2s`, with `K = 50`.
pub fn dubins_servo() -> PolySystem {
    let k = crate::barrier::GAIN;
    PolySystem::new(vec![
        Polynomial::parse("-1.0 * x1 + 0.16666666666666666 * x1^3", 3).unwrap(),
        Polynomial::parse(&format!("{:?} * x1 + {:?} * x2", -k, k), 3).unwrap(),
        Polynomial::parse("1.0 * x0 + -2.0 * x2", 3).unwrap(),
    ])
    .unwrap()
}

/// A 16-state, 4-input quadrotor-like model with cubic Taylor rotations.
///
/// States: position (3), velocity (3), roll/pitch/yaw (3), body rates (3)
/// and four rotor-thrust deviations with first-order lag. Inputs command the
/// rotor thrusts.
pub fn quadrotor16() -> PolySystem {
    const G: f64 = 9.81;
    const MASS: f64 = 0.5;
    const IXY: f64 = 0.0023;
    const IZ: f64 = 0.004;
    const ARM: f64 = 0.175;
    const DRAG: f64 = 0.01;
    const TAU: f64 = 0.05;
    let n = 16;
    let x = |i: usize| Polynomial::var(n, i);
    let c = |v: f64| Polynomial::constant(n, v);
    let (phi, theta, psi) = (x(6), x(7), x(8));
    let (p, q, r) = (x(9), x(10), x(11));
    let thrust = (12..16).fold(Polynomial::zero(n), |acc, i| &acc + &x(i));
    let accel = &c(G) + &thrust.scale(1.0 / MASS);
    let sin3 = |a: &Polynomial| a - &a.pow(3).scale(1.0 / 6.0);
    let half_sq = &(&phi * &phi) + &(&theta * &theta);
    let mut f = vec![x(3), x(4), x(5)];
    f.push(&accel * &sin3(&theta));
    f.push(&(&accel * &sin3(&phi)).scale(-1.0) + &(&psi * &theta).scale(G));
    f.push(&thrust.scale(1.0 / MASS) - &(&accel * &half_sq).scale(0.5));
    f.push(&p + &(&(&q * &phi) * &theta));
    f.push(&q - &(&r * &phi));
    f.push(&r + &(&q * &phi));
    let gyro = (IXY - IZ) / IXY;
    f.push(&(&x(13) - &x(15)).scale(ARM / IXY) + &(&q * &r).scale(gyro));
    f.push(&(&x(14) - &x(12)).scale(ARM / IXY) - &(&p * &r).scale(gyro));
    f.push((&(&x(12) - &x(13)) + &(&x(14) - &x(15))).scale(DRAG / IZ));
    for i in 12..16 {
        f.push(x(i).scale(-1.0 / TAU));
    }
    let mut g = vec![vec![Polynomial::zero(n); 4]; n];
    for k in 0..4 {
        g[12 + k][k] = c(1.0 / TAU);
    }
    PolySystem::with_inputs(f, g).expect("valid quadrotor model")
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssemblyReport {
    pub states: usize,
    pub inputs: usize,
    pub full_basis: usize,
    pub gram_dim: usize,
    pub variables: usize,
    pub equalities: usize,
    pub rotated_cones: usize,
    pub psd_blocks: usize,
    pub assembly_time: f64,
}

/// Assembles one multiplier-step program at the initial `V₀` without solving it.
pub fn assemble_multiplier_report(
    sys: &PolySystem,
    opts: &RoaOptions,
    rho: f64,
) -> Result<(AssemblyReport, MultiplierProgram), RoaError> {
    let started = std::time::Instant::now();
    let (v0, _) = initialize(sys, opts)?;
    let mp = build_multiplier_program(sys, &v0, rho, opts)?;
    let half = mp.main.sigma0.basis().iter().map(Monomial::degree).max().unwrap_or(0);
    let report = AssemblyReport {
        states: sys.n(),
        inputs: sys.m(),
        full_basis: monomial_basis(sys.n(), half).len(),
        gram_dim: mp.main.sigma0.dim(),
        variables: mp.prog.num_vars(),
        equalities: mp.prog.equalities().len(),
        rotated_cones: mp.prog.rotated_cones().len(),
        psd_blocks: mp.prog.psd_blocks().len(),
        assembly_time: started.elapsed().as_secs_f64(),
    };
    Ok((report, mp))
}
