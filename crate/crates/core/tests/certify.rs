use polycert::certify::{
    add_putinar, constrain_in_cone, declare_poly_var, finish_putinar, putinar_feasibility,
    verify_certificate, CertifyError, ConeTag, Diagnosis, LinPoly, PutinarCertificate,
    SemialgebraicSet, VERIFY_TOL,
};
use polycert::cones::SymMatrix;
use polycert::conic::{solve, ClarabelBackend, ConicProgram, LinExpr, SolveOptions, SolveStatus};
use polycert::poly::Polynomial;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p2(s: &str) -> Polynomial {
    Polynomial::parse(s, 2).unwrap()
}

fn motzkin() -> Polynomial {
    p2("1.0 * x0^4 x1^2 + 1.0 * x0^2 x1^4 + -3.0 * x0^2 x1^2 + 1.0")
}

fn grid_min(p: &Polynomial, lo: f64, hi: f64, n: usize) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..=n {
        for j in 0..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            let y = lo + (hi - lo) * j as f64 / n as f64;
            m = m.min(p.eval(&[x, y]));
        }
    }
    m
}

fn global(p: &Polynomial, cone: ConeTag) -> Result<PutinarCertificate, CertifyError> {
    putinar_feasibility(p, &SemialgebraicSet::new(p.nvars()), cone, 0, &ClarabelBackend::new())
}

#[test]
fn poly_var_sizes() {
    let mut prog = ConicProgram::new();
    assert_eq!(declare_poly_var(&mut prog, 2, 2).len(), 6);
    assert_eq!(declare_poly_var(&mut prog, 1, 0).len(), 1);
    assert_eq!(declare_poly_var(&mut prog, 3, 4).len(), 35);
    assert_eq!(prog.num_vars(), 42);
}

#[test]
fn perfect_square_in_every_cone() {
    let p = p2("1.0 * x0^2 + -2.0 * x0 x1 + 1.0 * x1^2");
    for cone in ConeTag::ALL {
        let c = global(&p, cone).unwrap();
        assert_eq!(c.sigma0.q.dim(), 2, "basis [x, y]");
        let want = SymMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        assert!(c.sigma0.q.max_abs_diff(&want) < 1e-6, "{cone}: {:?}", c.sigma0.q);
    }
}

#[test]
fn single_square_is_dsos() {
    let p = p2("1.0 * x0^2 x1^2");
    let c = global(&p, ConeTag::Dsos).unwrap();
    let q = &c.sigma0.q;
    let xy = c
        .sigma0
        .basis
        .iter()
        .position(|m| m.exponents() == [1, 1])
        .expect("xy in basis");
    assert!((q.get(xy, xy) - 1.0).abs() < 1e-6);
    assert!(q.max_abs() <= 1.0 + 1e-6);
}

#[test]
fn motzkin_not_sos_but_multiplied_is() {
    let m = motzkin();
    // oracle: the polynomial is nonnegative on a dense grid
    assert!(grid_min(&m, -2.0, 2.0, 400) >= -1e-12);
    match global(&m, ConeTag::Sos) {
        Err(CertifyError::Infeasible(_)) => {}
        other => panic!("expected infeasible, got {other:?}"),
    }
    let lifted = &p2("1.0 * x0^2 + 1.0 * x1^2") * &m;
    assert!(grid_min(&lifted, -2.0, 2.0, 400) >= -1e-12);
    let mut prog = ConicProgram::new();
    let h = add_putinar(
        &mut prog,
        &LinPoly::from(&lifted),
        &SemialgebraicSet::new(2),
        ConeTag::Sos,
        0,
    )
    .unwrap();
    assert_eq!(h.sigma0.basis().last().unwrap().degree(), 4);
    let sol = solve(&prog, &ClarabelBackend::new(), &SolveOptions::default()).unwrap();
    let cert = finish_putinar(&h, &sol, VERIFY_TOL).unwrap();
    assert!(verify_certificate(&cert, VERIFY_TOL).passed);
}

#[test]
fn degree_overflow_is_reported() {
    let mut prog = ConicProgram::new();
    let p = LinPoly::from(p2("1.0 * x0^4"));
    assert!(matches!(
        constrain_in_cone(&mut prog, &p, ConeTag::Sos, 1),
        Err(CertifyError::DegreeOverflow { .. })
    ));
}

#[test]
fn odd_multiplier_degree_is_rejected() {
    let set = SemialgebraicSet::new(1).with_ball(1.0);
    let p = Polynomial::parse("1.0", 1).unwrap();
    assert!(matches!(
        putinar_feasibility(&p, &set, ConeTag::Sos, 1, &ClarabelBackend::new()),
        Err(CertifyError::OddMultiplierDegree(1))
    ));
}

#[test]
fn linear_on_halfline() {
    let x = Polynomial::parse("1.0 * x0", 1).unwrap();
    let set = SemialgebraicSet::new(1).with_inequality(x.clone()).unwrap();
    for cone in ConeTag::ALL {
        let c = putinar_feasibility(&x, &set, cone, 0, &ClarabelBackend::new()).unwrap();
        assert!((c.multipliers[0].q.get(0, 0) - 1.0).abs() < 1e-6);
        assert!(c.sigma0.polynomial(1).max_abs_coeff() < 1e-6);
    }
}

#[test]
fn interval_constraint_certifies_itself() {
    let g = Polynomial::parse("1.0 + -1.0 * x0^2", 1).unwrap();
    let set = SemialgebraicSet::new(1).with_inequality(g.clone()).unwrap();
    for cone in ConeTag::ALL {
        let c = putinar_feasibility(&g, &set, cone, 0, &ClarabelBackend::new()).unwrap();
        assert!((c.multipliers[0].q.get(0, 0) - 1.0).abs() < 1e-6, "{cone}");
        assert!(c.sigma0.polynomial(1).max_abs_coeff() < 1e-6);
    }
}

#[test]
fn equality_constraints_become_pairs() {
    let h = p2("1.0 * x0 + -1.0 * x1");
    let set = SemialgebraicSet::new(2).with_equality(h.clone()).unwrap();
    assert_eq!(set.constraints().len(), 2);
    assert_eq!(set.constraints()[1], -&h);
    // x0 − x1 ≥ 0 on {x0 = x1}
    let c = putinar_feasibility(&h, &set, ConeTag::Sos, 0, &ClarabelBackend::new()).unwrap();
    assert!(verify_certificate(&c, VERIFY_TOL).passed);
}

fn ellipse(rng: &mut ChaCha8Rng) -> Polynomial {
    // 1 − (x−c)ᵀA(x−c) with A positive definite
    let l = [rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0)];
    let a = [l[0] * l[0], l[0] * l[1], l[1] * l[1] + l[2] * l[2]];
    let c = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let dx = p2(&format!("1.0 * x0 + {:?}", -c[0]));
    let dy = p2(&format!("1.0 * x1 + {:?}", -c[1]));
    let q = &(&(&dx * &dx).scale(a[0]) + &(&dx * &dy).scale(2.0 * a[1])) + &(&dy * &dy).scale(a[2]);
    &Polynomial::constant(2, 1.0) - &q
}

fn random_quadratic(rng: &mut ChaCha8Rng) -> Polynomial {
    let mut p = Polynomial::zero(2);
    for m in ["1.0", "1.0 * x0", "1.0 * x1", "1.0 * x0^2", "1.0 * x0 x1", "1.0 * x1^2"] {
        p = &p + &p2(m).scale(rng.gen_range(-1.0..1.0));
    }
    p
}

fn min_on_set(p: &Polynomial, set: &SemialgebraicSet, n: usize) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..=n {
        for j in 0..=n {
            let x = -3.0 + 6.0 * i as f64 / n as f64;
            let y = -3.0 + 6.0 * j as f64 / n as f64;
            if set.contains(&[x, y], 0.0) {
                m = m.min(p.eval(&[x, y]));
            }
        }
    }
    m
}

#[test]
fn s_lemma_on_random_ellipses() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut certified = 0;
    let mut tried = 0;
    while tried < 12 {
        let g = ellipse(&mut rng);
        let mut p = random_quadratic(&mut rng);
        let set = SemialgebraicSet::new(2).with_inequality(g).unwrap();
        // oracle: dense grid minimum over the ellipse, then shift to a clear positive margin
        let m = min_on_set(&p, &set, 300);
        if !m.is_finite() {
            continue;
        }
        tried += 1;
        p = &p + &Polynomial::constant(2, 0.05 - m);
        let c = putinar_feasibility(&p, &set, ConeTag::Sos, 0, &ClarabelBackend::new())
            .unwrap_or_else(|e| panic!("quadratic positive on ellipse not certified: {e}"));
        assert_eq!(c.multipliers[0].q.dim(), 1, "degree-0 multiplier");
        certified += 1;
    }
    assert_eq!(certified, 12);
}

#[test]
fn sampled_soundness_of_certificates() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let set = SemialgebraicSet::new(2)
        .with_inequality(p2("1.0 + -1.0 * x0^2"))
        .unwrap()
        .with_inequality(p2("1.0 + -1.0 * x1^2"))
        .unwrap();
    let mut found = 0;
    for _ in 0..6 {
        let mut p = Polynomial::constant(2, rng.gen_range(0.5..2.0));
        for m in ["1.0 * x0 x1", "1.0 * x0^3", "1.0 * x1^2 x0", "1.0 * x0^2"] {
            p = &p + &p2(m).scale(rng.gen_range(-0.6..0.6));
        }
        let Ok(c) = putinar_feasibility(&p, &set, ConeTag::Sos, 2, &ClarabelBackend::new()) else {
            continue;
        };
        found += 1;
        let mut lo = f64::INFINITY;
        for _ in 0..10_000 {
            let x = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
            lo = lo.min(c.poly.eval(&x));
        }
        assert!(lo >= -1e-5, "certified polynomial sampled at {lo}");
    }
    assert!(found >= 3);
}

#[test]
fn cone_and_degree_monotonicity_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let backend = ClarabelBackend::new();
    let set = SemialgebraicSet::new(2).with_ball(1.0);
    for _ in 0..5 {
        // minimize t s.t. p + t ≥ 0 on the disc
        let mut p = Polynomial::zero(2);
        for m in ["1.0 * x0", "1.0 * x1", "1.0 * x0 x1", "1.0 * x0^2 x1", "1.0 * x1^4", "1.0 * x0^3"] {
            p = &p + &p2(m).scale(rng.gen_range(-1.0..1.0));
        }
        let solve_shift = |cone: ConeTag, d: u32| -> f64 {
            let mut prog = ConicProgram::new();
            let t = prog.add_variable();
            let mut lp = LinPoly::from(&p);
            lp.add_term(polycert::Monomial::one(2), &LinExpr::var(t), 1.0);
            let h = add_putinar(&mut prog, &lp, &set, cone, d).unwrap();
            prog.add_objective_term(t, 1.0).unwrap();
            let sol = solve(&prog, &backend, &SolveOptions::default()).unwrap();
            assert!(matches!(sol.status, SolveStatus::Optimal | SolveStatus::Inaccurate));
            let cert = finish_putinar(&h, &sol, 1e-5).unwrap();
            assert!(verify_certificate(&cert, 1e-5).passed);
            sol.objective
        };
        let d = solve_shift(ConeTag::Dsos, 2);
        let s = solve_shift(ConeTag::Sdsos, 2);
        let q = solve_shift(ConeTag::Sos, 2);
        assert!(d >= s - 1e-6 && s >= q - 1e-6, "{d} {s} {q}");
        let q4 = solve_shift(ConeTag::Sos, 4);
        assert!(q >= q4 - 1e-6, "degree monotonicity {q} {q4}");
        // the true minimum over the disc bounds every relaxation from below
        let mut truth = f64::INFINITY;
        for i in 0..200 {
            for j in 0..200 {
                let r = i as f64 / 199.0;
                let a = j as f64 / 200.0 * std::f64::consts::TAU;
                truth = truth.min(p.eval(&[r * a.cos(), r * a.sin()]));
            }
        }
        assert!(q4 >= -truth - 1e-5, "relaxation {q4} below true shift {}", -truth);
    }
}

#[test]
fn verification_diagnoses_injected_faults() {
    let g = p2("1.0 + -1.0 * x0^2 + -1.0 * x1^2");
    let set = SemialgebraicSet::new(2).with_inequality(g).unwrap();
    let p = p2("2.0 + 1.0 * x0 + -1.0 * x0 x1 + 1.0 * x1^2");
    let cert = putinar_feasibility(&p, &set, ConeTag::Dsos, 2, &ClarabelBackend::new()).unwrap();
    assert!(verify_certificate(&cert, VERIFY_TOL).passed);

    let mut bumped = cert.clone();
    let v = bumped.sigma0.q.get(0, 1);
    bumped.sigma0.q.set(0, 1, v + 1e-2);
    let r = verify_certificate(&bumped, VERIFY_TOL);
    assert!(!r.passed);
    assert!(r
        .failures
        .iter()
        .any(|d| matches!(d, Diagnosis::IdentityResidual { .. })));

    let mut broken = cert.clone();
    let n = broken.multipliers[0].q.dim();
    broken.multipliers[0].q = SymMatrix::from_fn(n, |i, j| if i == j { 1.0 } else { 0.9 });
    let r = verify_certificate(&broken, VERIFY_TOL);
    assert!(r.failures.iter().any(|d| matches!(
        d,
        Diagnosis::ConeViolation {
            multiplier: 1,
            cone: ConeTag::Dsos,
            ..
        }
    )));
}

#[test]
fn sdsos_witness_is_checked() {
    let p = p2("2.0 + 1.0 * x0 + 1.0 * x0^2 + 1.0 * x0 x1 + 1.0 * x1^2");
    let cert = global(&p, ConeTag::Sdsos).unwrap();
    let w = cert.sigma0.witness.as_ref().expect("sdsos witness");
    assert!(w.residual(&cert.sigma0.q) < 1e-9);
    let mut bad = cert.clone();
    bad.sigma0.witness.as_mut().unwrap().blocks[0].m_ij = 10.0;
    // a wrong witness falls back to the independent sdd test, which still passes
    assert!(verify_certificate(&bad, VERIFY_TOL).passed);
}

#[test]
fn text_round_trip_is_exact() {
    let set = SemialgebraicSet::new(2).with_ball(1.5);
    let p = p2("1.0 + 0.1 * x0 + 0.2 * x1^3 + 1e-3 * x0^2");
    for cone in ConeTag::ALL {
        let cert = putinar_feasibility(&p, &set, cone, 2, &ClarabelBackend::new()).unwrap();
        let text = cert.to_text();
        let back = PutinarCertificate::from_text(&text).unwrap();
        assert_eq!(back, cert);
        assert_eq!(back.to_text(), text);
    }
}

#[test]
fn malformed_text_is_rejected() {
    assert!(matches!(
        PutinarCertificate::from_text("nonsense"),
        Err(CertifyError::Format { line: 1, .. })
    ));
    let cert = global(&p2("1.0 * x0^2 + 1.0"), ConeTag::Sos).unwrap();
    let text = cert.to_text().replace("row ", "row 1.0 ");
    assert!(PutinarCertificate::from_text(&text).is_err());
}
