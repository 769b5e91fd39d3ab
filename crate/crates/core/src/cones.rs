//! Diagonally dominant, scaled diagonally dominant and psd matrix tests.
//!
//! `dd ⊆ sdd ⊆ psd`. The dd test is a row inequality, psd uses a shifted
//! Cholesky factorization, and sdd is decided by a small second-order cone
//! program over the `C(n,2)` two-by-two principal blocks.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::conic::{
    self, Backend, ClarabelBackend, ConicError, ConicProgram, LinExpr, SolveOptions, SolveStatus,
    Var,
};

#[derive(Debug, Error)]
pub enum ConesError {
    #[error("sdd feasibility solve failed: {0}")]
    SolverFailure(String),
    #[error(transparent)]
    Conic(#[from] ConicError),
}

/// Dense symmetric matrix; only the upper triangle is stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            upper: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Builds from `f(i, j)` evaluated on the upper triangle (`i ≤ j`).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Takes the upper triangle of `rows`; the lower triangle is ignored.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        Self::from_fn(rows.len(), |i, j| rows[i][j])
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        conic::PsdBlock::index(self.n, i, j)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.upper[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.upper[k] += v;
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.upper
            .iter()
            .zip(&other.upper)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.to_dmatrix()
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |m, &x| m.min(x))
    }

    /// `min_i (a_ii − Σ_{j≠i} |a_ij|)`; nonnegative iff dd.
    pub fn dd_margin(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let off: f64 = (0..self.n)
                    .filter(|&j| j != i)
                    .map(|j| self.get(i, j).abs())
                    .sum();
                self.get(i, i) - off
            })
            .fold(f64::INFINITY, f64::min)
    }
}

// Allowance for rounding in exact-looking comparisons.
fn rounding_slack(a: &SymMatrix) -> f64 {
    16.0 * (a.dim().max(1) as f64) * f64::EPSILON * a.max_abs().max(1.0)
}

pub fn is_dd(a: &SymMatrix, tol: f64) -> bool {
    a.n == 0 || a.dd_margin() + tol >= 0.0
}

/// True iff `A + tol·I` factors, i.e. the minimum eigenvalue is at least
/// `−tol` (up to a rounding allowance proportional to `n·ε·max|a_ij|`).
pub fn is_psd(a: &SymMatrix, tol: f64) -> bool {
    let shift = tol + rounding_slack(a);
    let mut m = a.to_dmatrix();
    for i in 0..a.n {
        m[(i, i)] += shift;
    }
    m.cholesky().is_some()
}

/// One 2×2 principal block `[[m_ii, m_ij], [m_ij, m_jj]]` placed at rows/cols `i, j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SddBlock {
    pub i: usize,
    pub j: usize,
    pub m_ii: f64,
    pub m_ij: f64,
    pub m_jj: f64,
}

impl SddBlock {
    /// Smallest eigenvalue of the 2×2 block.
    pub fn min_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.m_ii + self.m_jj);
        let half = 0.5 * (self.m_ii - self.m_jj);
        mean - (half * half + self.m_ij * self.m_ij).sqrt()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SddWitness {
    pub blocks: Vec<SddBlock>,
}

impl SddWitness {
    pub fn reconstruct(&self, n: usize) -> SymMatrix {
        let mut m = SymMatrix::zeros(n);
        for b in &self.blocks {
            m.add(b.i, b.i, b.m_ii);
            m.add(b.j, b.j, b.m_jj);
            m.add(b.i, b.j, b.m_ij);
        }
        m
    }

    /// Max-abs difference between the block sum and `a`.
    pub fn residual(&self, a: &SymMatrix) -> f64 {
        self.reconstruct(a.dim()).max_abs_diff(a)
    }

    /// Smallest eigenvalue over all blocks (`+∞` when there are none).
    pub fn min_block_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(SddBlock::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    /// Blocks psd within `tol` and reconstruction residual within `tol`.
    pub fn certifies(&self, a: &SymMatrix, tol: f64) -> bool {
        self.min_block_eigenvalue() >= -tol && self.residual(a) <= tol + rounding_slack(a)
    }

    /// The explicit decomposition of a dd matrix: `[[|a_ij|, a_ij], [a_ij, |a_ij|]]`
    /// per pair, leftover diagonal mass on the first block touching each row.
    pub fn from_dd(a: &SymMatrix) -> SddWitness {
        let n = a.dim();
        let mut blocks = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = a.get(i, j);
                blocks.push(SddBlock {
                    i,
                    j,
                    m_ii: v.abs(),
                    m_ij: v,
                    m_jj: v.abs(),
                });
            }
        }
        let mut w = SddWitness { blocks };
        w.absorb_diagonal(a);
        w
    }

    // Puts any positive diagonal shortfall `a_ii − Σ m_ii` onto one block.
    fn absorb_diagonal(&mut self, a: &SymMatrix) {
        let n = a.dim();
        let recon = self.reconstruct(n);
        for i in 0..n {
            let r = a.get(i, i) - recon.get(i, i);
            if r <= 0.0 {
                continue;
            }
            if let Some(b) = self.blocks.iter_mut().find(|b| b.i == i || b.j == i) {
                if b.i == i {
                    b.m_ii += r;
                } else {
                    b.m_jj += r;
                }
            }
        }
    }
}

/// Decides scaled diagonal dominance.
///
/// Solves `max t` s.t. `A − t·I = Σ_{i<j} M^{ij}`, `M^{ij} ⪰ 0` (rotated cones);
/// `A` is sdd within `tol` iff `t* ≥ −tol`. The returned witness has its
/// off-diagonals set exactly to `a_ij` and its blocks repaired to be psd.
pub fn is_sdd(a: &SymMatrix, tol: f64) -> Result<(bool, Option<SddWitness>), ConesError> {
    is_sdd_with(a, tol, &ClarabelBackend::new())
}

pub fn is_sdd_with(
    a: &SymMatrix,
    tol: f64,
    backend: &dyn Backend,
) -> Result<(bool, Option<SddWitness>), ConesError> {
    let n = a.dim();
    if n <= 1 {
        let ok = n == 0 || a.get(0, 0) >= -tol;
        return Ok((ok, ok.then(SddWitness::default)));
    }
    if is_dd(a, 0.0) {
        return Ok((true, Some(SddWitness::from_dd(a))));
    }

    let mut prog = ConicProgram::new();
    let t = prog.add_variable();
    let mut diag: Vec<LinExpr> = (0..n).map(|_| LinExpr::term(t, 1.0)).collect();
    let mut pairs: Vec<(usize, usize, Var, Var, Var)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let u = prog.add_variable();
            let v = prog.add_variable();
            let w = prog.add_variable();
            prog.add_rotated_cone(u, v, vec![w])?;
            diag[i].add_term(u, 1.0);
            diag[j].add_term(v, 1.0);
            // m_ij = w/√2 so that 2uv ≥ w² ⇔ m_ii m_jj ≥ m_ij²
            prog.add_equality(vec![(w, std::f64::consts::FRAC_1_SQRT_2)], a.get(i, j))?;
            pairs.push((i, j, u, v, w));
        }
    }
    for (i, d) in diag.iter().enumerate() {
        prog.add_linear_equality(d, a.get(i, i))?;
    }
    prog.add_objective_term(t, -1.0)?;

    let sol = conic::solve(&prog, backend, &SolveOptions::default())?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::Inaccurate => {}
        other => {
            return Err(ConesError::SolverFailure(format!(
                "{other} ({})",
                sol.backend_status
            )))
        }
    }
    let t_star = sol.value(t);
    if t_star < -tol {
        return Ok((false, None));
    }

    let mut blocks = Vec::with_capacity(pairs.len());
    for &(i, j, u, v, _) in &pairs {
        let m_ij = a.get(i, j);
        let (mut m_ii, mut m_jj) = (sol.value(u).max(0.0), sol.value(v).max(0.0));
        let need = m_ij * m_ij;
        if m_ii * m_jj < need {
            if m_ii > 0.0 && m_jj > 0.0 {
                let s = (need / (m_ii * m_jj)).sqrt() * (1.0 + 4.0 * f64::EPSILON);
                m_ii *= s;
                m_jj *= s;
            } else if m_ii > 0.0 {
                m_jj = need / m_ii * (1.0 + 4.0 * f64::EPSILON);
            } else if m_jj > 0.0 {
                m_ii = need / m_jj * (1.0 + 4.0 * f64::EPSILON);
            } else {
                m_ii = m_ij.abs();
                m_jj = m_ij.abs();
            }
        }
        blocks.push(SddBlock {
            i,
            j,
            m_ii,
            m_ij,
            m_jj,
        });
    }
    let mut w = SddWitness { blocks };
    w.absorb_diagonal(a);
    if w.certifies(a, tol) {
        Ok((true, Some(w)))
    } else {
        Ok((false, None))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn dd_examples() {
        assert!(is_dd(&SymMatrix::identity(4), 0.0));
        assert!(!is_dd(&m(&[&[1.0, 2.0], &[2.0, 1.0]]), 0.0));
        assert!(is_dd(
            &m(&[&[2.0, 1.0, 1.0], &[1.0, 2.0, 1.0], &[1.0, 1.0, 2.0]]),
            0.0
        ));
        assert!(is_dd(&m(&[&[1.0, 1.1], &[1.1, 1.0]]), 0.1 + 1e-12));
    }

    #[test]
    fn psd_examples() {
        assert!(is_psd(&SymMatrix::identity(3), 0.0));
        assert!(!is_psd(&m(&[&[1.0, 2.0], &[2.0, 1.0]]), 0.0));
        assert!(is_psd(&m(&[&[1.0, 2.0], &[2.0, 1.0]]), 1.0 + 1e-9));
        // singular dd matrix
        assert!(is_psd(&m(&[&[1.0, -1.0], &[-1.0, 1.0]]), 0.0));
        assert!(is_psd(
            &m(&[&[2.0, 1.0, 1.0], &[1.0, 2.0, 1.0], &[1.0, 1.0, 2.0]]),
            0.0
        ));
    }

    #[test]
    fn sdd_two_by_two_psd_is_its_own_block() {
        let a = m(&[&[1.0, 2.0], &[2.0, 5.0]]);
        let (ok, w) = is_sdd(&a, 1e-8).unwrap();
        assert!(ok);
        let w = w.unwrap();
        assert_eq!(w.blocks.len(), 1);
        assert!(w.certifies(&a, 1e-8));
        let b = m(&[&[1.0, 2.0], &[2.0, 3.0]]);
        assert!(!is_sdd(&b, 1e-8).unwrap().0);
    }

    #[test]
    fn dd_is_sdd_with_exact_witness() {
        let a = m(&[&[2.0, 1.0, 1.0], &[1.0, 2.0, 1.0], &[1.0, 1.0, 2.0]]);
        let (ok, w) = is_sdd(&a, 0.0).unwrap();
        assert!(ok);
        let w = w.unwrap();
        assert_eq!(w.blocks.len(), 3);
        assert!(w.certifies(&a, 0.0));
    }

    #[test]
    fn one_by_one() {
        assert!(is_sdd(&m(&[&[0.5]]), 0.0).unwrap().0);
        assert!(!is_sdd(&m(&[&[-0.5]]), 0.0).unwrap().0);
    }

    #[test]
    fn tridiagonal_near_boundary() {
        // psd (eigenvalues 1, 1 ± 0.999√2 → smallest negative) so not sdd
        let a = m(&[
            &[1.0, 0.999, 0.0],
            &[0.999, 1.0, 0.999],
            &[0.0, 0.999, 1.0],
        ]);
        assert!(!is_psd(&a, 1e-8));
        assert!(!is_sdd(&a, 1e-8).unwrap().0);
        // scaled so that the middle row dominates
        let b = m(&[&[1.0, 0.7, 0.0], &[0.7, 1.0, 0.7], &[0.0, 0.7, 1.0]]);
        let (ok, w) = is_sdd(&b, 1e-8).unwrap();
        assert_eq!(ok, b.min_eigenvalue() > 0.0);
        if ok {
            assert!(w.unwrap().certifies(&b, 1e-8));
        }
    }

    #[test]
    fn witness_fault_detected() {
        let a = m(&[&[2.0, 1.0, 1.0], &[1.0, 2.0, 1.0], &[1.0, 1.0, 2.0]]);
        let mut w = SddWitness::from_dd(&a);
        w.blocks[0].m_ij += 1e-3;
        assert!(!w.certifies(&a, 1e-6));
    }
}
