use polycert::conic::{
    self, backend_by_name, ConeKind, ConicError, ConicProgram, LinExpr, SolveOptions, SolveStatus,
    BACKENDS,
};
use proptest::prelude::*;

fn solve_all(prog: &ConicProgram) -> Vec<(String, conic::ConicSolution)> {
    BACKENDS
        .iter()
        .map(|name| backend_by_name(name).unwrap())
        .filter(|b| prog.cone_kinds().iter().all(|&k| b.supports(k)))
        .map(|b| {
            let sol = conic::solve(prog, b.as_ref(), &SolveOptions::default()).unwrap();
            (b.name().to_string(), sol)
        })
        .collect()
}

#[test]
fn lp_optimum() {
    let mut p = ConicProgram::new();
    let x = p.add_variable();
    let y = p.add_variable();
    p.add_nonneg(&[x, y]).unwrap();
    p.add_equality(vec![(x, 1.0), (y, 2.0)], 2.0).unwrap();
    p.add_objective_term(x, 1.0).unwrap();
    p.add_objective_term(y, 1.0).unwrap();
    let sols = solve_all(&p);
    assert_eq!(sols.len(), BACKENDS.len());
    for (name, s) in sols {
        assert_eq!(s.status, SolveStatus::Optimal, "{name}");
        assert!((s.objective - 1.0).abs() < 1e-7, "{name}: {}", s.objective);
        assert!((s.value(y) - 1.0).abs() < 1e-6);
        assert!(p.residuals(s.primal.as_ref().unwrap()).max() < 1e-7);
    }
}

#[test]
fn rotated_cone_optimum() {
    // min u + v with 2uv ≥ w², w = 2: u = v = √2
    let mut p = ConicProgram::new();
    let (u, v, w) = (p.add_variable(), p.add_variable(), p.add_variable());
    p.add_rotated_cone(u, v, vec![w]).unwrap();
    p.add_equality(vec![(w, 1.0)], 2.0).unwrap();
    p.add_objective_term(u, 1.0).unwrap();
    p.add_objective_term(v, 1.0).unwrap();
    for (name, s) in solve_all(&p) {
        assert_eq!(s.status, SolveStatus::Optimal, "{name}");
        assert!((s.objective - 2.0 * 2f64.sqrt()).abs() < 1e-6, "{name}: {}", s.objective);
    }
}

#[test]
fn psd_optimum_and_socp_rejection() {
    // min X₀₀ + X₁₁ with X₀₁ = 1, X ⪰ 0: value 2
    let mut p = ConicProgram::new();
    let blk = p.new_psd_block(2);
    p.add_equality(vec![(blk.entry(0, 1), 1.0)], 1.0).unwrap();
    p.add_objective_term(blk.entry(0, 0), 1.0).unwrap();
    p.add_objective_term(blk.entry(1, 1), 1.0).unwrap();
    let sols = solve_all(&p);
    assert!(!sols.is_empty());
    for (name, s) in sols {
        assert_eq!(s.status, SolveStatus::Optimal, "{name}");
        assert!((s.objective - 2.0).abs() < 1e-6);
    }
    let socp = backend_by_name("clarabel-socp").unwrap();
    assert!(!socp.supports(ConeKind::PositiveSemidefinite));
    let err = conic::solve(&p, socp.as_ref(), &SolveOptions::default()).unwrap_err();
    assert!(matches!(err, ConicError::UnsupportedCone { .. }));
}

#[test]
fn infeasible_and_unbounded_are_reported() {
    let mut p = ConicProgram::new();
    let x = p.add_variable();
    p.add_nonneg(&[x]).unwrap();
    p.add_equality(vec![(x, 1.0)], -1.0).unwrap();
    for (name, s) in solve_all(&p) {
        assert_eq!(s.status, SolveStatus::Infeasible, "{name}");
        assert!(s.primal.is_none());
    }

    let mut p = ConicProgram::new();
    let x = p.add_variable();
    p.add_nonneg(&[x]).unwrap();
    p.add_objective_term(x, -1.0).unwrap();
    for (name, s) in solve_all(&p) {
        assert_eq!(s.status, SolveStatus::Unbounded, "{name}");
    }
}

#[test]
fn linear_nonneg_slack() {
    // min x with x ≥ 3 written as a slack on 3 − x ≤ 0
    let mut p = ConicProgram::new();
    let x = p.add_variable();
    let mut e = LinExpr::var(x);
    e.add_constant(-3.0);
    p.add_linear_nonneg(&e).unwrap();
    p.add_objective_term(x, 1.0).unwrap();
    for (name, s) in solve_all(&p) {
        assert!((s.value(x) - 3.0).abs() < 1e-7, "{name}");
    }
}

#[test]
fn unknown_backend_is_an_error() {
    assert!(matches!(backend_by_name("mosek"), Err(ConicError::UnknownBackend(_))));
}

#[test]
fn malformed_interchange_is_rejected() {
    assert!(ConicProgram::from_text("polycert-conic 2\n").is_err());
    assert!(ConicProgram::from_text("polycert-conic 1\nvars x\n").is_err());
}

fn program_strategy() -> impl Strategy<Value = ConicProgram> {
    (
        1usize..8,
        prop::collection::vec((0usize..8, -10.0f64..10.0), 0..6),
        prop::collection::vec((prop::collection::vec((0usize..8, -5.0f64..5.0), 1..4), -5.0f64..5.0), 0..4),
        prop::collection::vec(0usize..8, 0..4),
        prop::collection::vec((0usize..8, 0usize..8, 0usize..8), 0..3),
        prop::option::of(1usize..4),
    )
        .prop_map(|(n, obj, eqs, nonneg, rot, psd)| {
            let mut p = ConicProgram::new();
            let vars = p.add_variables(n);
            let v = |i: usize| vars[i % n];
            for (i, c) in obj {
                p.add_objective_term(v(i), c).unwrap();
            }
            for (terms, rhs) in eqs {
                p.add_equality(terms.into_iter().map(|(i, c)| (v(i), c)).collect(), rhs).unwrap();
            }
            let nn: Vec<_> = nonneg.into_iter().map(v).collect();
            p.add_nonneg(&nn).unwrap();
            for (a, b, c) in rot {
                p.add_rotated_cone(v(a), v(b), vec![v(c)]).unwrap();
            }
            if let Some(d) = psd {
                p.new_psd_block(d);
            }
            p
        })
}

proptest! {
    #[test]
    fn interchange_round_trip(p in program_strategy()) {
        let text = p.to_text();
        let back = ConicProgram::from_text(&text).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(back.to_text(), text);
    }
}
