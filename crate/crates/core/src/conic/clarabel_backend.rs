//! Adapter for the Clarabel interior-point solver.
//!
//! Clarabel solves `min ½xᵀPx + qᵀx` s.t. `Ax + s = b`, `s ∈ K`. Rows are
//! emitted in the order: equalities (zero cone), nonnegative variables,
//! rotated cones (as standard second-order cones), psd blocks (scaled
//! upper-triangle vectorization).

use std::f64::consts::SQRT_2;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{Backend, ConeKind, ConicError, ConicProgram, ConicSolution, SolveOptions, SolveStatus};

#[derive(Clone, Debug)]
pub struct ClarabelBackend {
    name: String,
    sdp: bool,
}

impl ClarabelBackend {
    /// LP + SOCP + SDP.
    pub fn new() -> Self {
        ClarabelBackend {
            name: "clarabel".into(),
            sdp: true,
        }
    }

    /// Same solver restricted to LP + SOCP; rejects psd blocks.
    pub fn socp_only() -> Self {
        ClarabelBackend {
            name: "clarabel-socp".into(),
            sdp: false,
        }
    }
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self::new()
    }
}

struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl Triplets {
    fn push(&mut self, row: usize, col: usize, val: f64) {
        if val != 0.0 {
            self.rows.push(row);
            self.cols.push(col);
            self.vals.push(val);
        }
    }

    fn next_row(&self) -> usize {
        self.b.len()
    }
}

fn assemble(prog: &ConicProgram) -> (Triplets, Vec<SupportedConeT<f64>>) {
    let mut t = Triplets {
        rows: Vec::new(),
        cols: Vec::new(),
        vals: Vec::new(),
        b: Vec::new(),
    };
    let mut cones = Vec::new();

    let eqs = prog.equalities();
    if !eqs.is_empty() {
        for e in eqs {
            let r = t.next_row();
            for &(v, c) in &e.terms {
                t.push(r, v.0, c);
            }
            t.b.push(e.rhs);
        }
        cones.push(SupportedConeT::ZeroConeT(eqs.len()));
    }

    let nn = prog.nonneg();
    if !nn.is_empty() {
        for v in nn {
            let r = t.next_row();
            t.push(r, v.0, -1.0);
            t.b.push(0.0);
        }
        cones.push(SupportedConeT::NonnegativeConeT(nn.len()));
    }

    for rc in prog.rotated_cones() {
        // (u+v)/√2 ≥ ‖((u-v)/√2, w)‖  ⇔  2uv ≥ ‖w‖², u,v ≥ 0
        let r = t.next_row();
        let h = 1.0 / SQRT_2;
        t.push(r, rc.u.0, -h);
        t.push(r, rc.v.0, -h);
        t.push(r + 1, rc.u.0, -h);
        t.push(r + 1, rc.v.0, h);
        t.b.extend([0.0, 0.0]);
        for (k, w) in rc.w.iter().enumerate() {
            t.push(r + 2 + k, w.0, -1.0);
            t.b.push(0.0);
        }
        cones.push(SupportedConeT::SecondOrderConeT(2 + rc.w.len()));
    }

    for blk in prog.psd_blocks() {
        // column-major upper triangle, off-diagonals scaled by √2
        for j in 0..blk.dim {
            for i in 0..=j {
                let r = t.next_row();
                let s = if i == j { 1.0 } else { SQRT_2 };
                t.push(r, blk.entry(i, j).0, -s);
                t.b.push(0.0);
            }
        }
        cones.push(SupportedConeT::PSDTriangleConeT(blk.dim));
    }
    (t, cones)
}

fn map_status(s: SolverStatus) -> SolveStatus {
    match s {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::AlmostSolved => SolveStatus::Inaccurate,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::Failed,
    }
}

impl Backend for ClarabelBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn supports(&self, cone: ConeKind) -> bool {
        match cone {
            ConeKind::Nonnegative | ConeKind::RotatedSecondOrder => true,
            ConeKind::PositiveSemidefinite => self.sdp,
        }
    }

    fn is_reentrant(&self) -> bool {
        // each solve builds its own solver instance
        true
    }

    fn solve(&self, prog: &ConicProgram, opts: &SolveOptions) -> Result<ConicSolution, ConicError> {
        self.check_supported(prog)?;
        let n = prog.num_vars();
        let (t, cones) = assemble(prog);
        let m = t.b.len();
        let a = CscMatrix::new_from_triplets(m, n, t.rows, t.cols, t.vals);
        let p = CscMatrix::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(v, c) in prog.objective() {
            q[v.0] += c;
        }

        let mut builder = DefaultSettingsBuilder::default();
        builder
            .verbose(opts.verbose)
            .max_iter(opts.max_iter)
            .max_threads(1)
            .tol_feas(1e-9)
            .tol_gap_abs(1e-9)
            .tol_gap_rel(1e-9);
        if let Some(limit) = opts.time_limit {
            builder.time_limit(limit);
        }
        let settings = builder.build().expect("valid clarabel settings");

        let started = std::time::Instant::now();
        let mut solver = match DefaultSolver::new(&p, &q, &a, &t.b, &cones, settings) {
            Ok(s) => s,
            Err(e) => {
                return Ok(ConicSolution {
                    status: SolveStatus::Failed,
                    primal: None,
                    objective: f64::NAN,
                    solve_time: started.elapsed().as_secs_f64(),
                    backend_status: format!("setup error: {e}"),
                })
            }
        };
        // clarabel panics when a LAPACK eigensolve fails mid-iteration
        let solved = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| solver.solve()));
        if solved.is_err() {
            return Ok(ConicSolution {
                status: SolveStatus::Failed,
                primal: None,
                objective: f64::NAN,
                solve_time: started.elapsed().as_secs_f64(),
                backend_status: "solver panicked".into(),
            });
        }
        let sol = &solver.solution;
        let mut status = map_status(sol.status);
        let primal = if status.has_primal() {
            let x = sol.x.clone();
            if status == SolveStatus::Optimal && prog.residuals(&x).max() > opts.residual_tol {
                status = SolveStatus::Inaccurate;
            }
            Some(x)
        } else {
            None
        };
        let objective = match &primal {
            Some(x) => prog.objective_value(x),
            None => match status {
                SolveStatus::Infeasible => f64::INFINITY,
                SolveStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::NAN,
            },
        };
        Ok(ConicSolution {
            status,
            primal,
            objective,
            solve_time: started.elapsed().as_secs_f64(),
            backend_status: format!("{:?}", sol.status),
        })
    }
}
