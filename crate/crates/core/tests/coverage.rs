use polycert::certify::{verify_certificate, ConeTag, VERIFY_TOL};
use polycert::conic::{ClarabelBackend, LinExpr};
use polycert::coverage::{
    energy_field, grid_csv, min_energy_in_region, min_energy_on_regions, sample_energy_grid,
    solve_coverage, CoverageError, CoverageInstance, Ellipse, DEFAULT_BBOX,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Independent oracle: one transmitter needs c = C · max over the regions of
// the squared distance, found on the ellipse boundary by sampling and
// golden-section refinement.
fn farthest_sq_dist(e: &Ellipse, t: [f64; 2]) -> f64 {
    let f = |th: f64| {
        let z = e.boundary_point(th);
        (z[0] - t[0]).powi(2) + (z[1] - t[1]).powi(2)
    };
    let n = 4000;
    let h = std::f64::consts::TAU / n as f64;
    let best = (0..n).max_by(|&a, &b| f(a as f64 * h).total_cmp(&f(b as f64 * h))).unwrap();
    let (mut lo, mut hi) = ((best as f64 - 1.0) * h, (best as f64 + 1.0) * h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) > f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    f(0.5 * (lo + hi))
}

fn single_oracle(inst: &CoverageInstance, i: usize) -> f64 {
    let t = inst.transmitters[i];
    inst.level
        * inst
            .regions
            .iter()
            .map(|e| farthest_sq_dist(e, t))
            .fold(0.0, f64::max)
}

#[test]
fn energy_field_examples() {
    let t = [[0.0, 0.0]];
    assert_eq!(energy_field(&t, &[1.0], [1.0, 0.0]).unwrap(), 1.0);
    assert_eq!(energy_field(&t, &[1.0], [2.0, 0.0]).unwrap(), 0.25);
    assert!(matches!(
        energy_field(&t, &[1.0], [0.0, 0.0]),
        Err(CoverageError::AtTransmitter(..))
    ));
}

#[test]
fn numerator_examples() {
    let inst = CoverageInstance {
        transmitters: vec![[0.0, 0.0]],
        rate_bounds: vec![1.0],
        level: 10.0,
        regions: vec![],
    };
    let p = inst.numerator_at(&[3.0]);
    let want = polycert::Polynomial::parse("3.0 + -10.0 * x0^2 + -10.0 * x1^2", 2).unwrap();
    assert!(p.max_coeff_diff(&want) < 1e-15);

    let fig = CoverageInstance::paper_fig1();
    let v: Vec<LinExpr> = (0..2).map(|i| LinExpr::var(polycert::conic::Var(i))).collect();
    assert_eq!(fig.numerator(&v).degree(), 4);
}

#[test]
fn numerator_matches_energy_identity() {
    let inst = CoverageInstance::paper_fig1();
    let rates = [2.561, 5.550];
    let p = inst.numerator_at(&rates);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let z = [rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)];
        let lhs = p.eval(&z) / inst.denominator_at(z);
        let rhs = inst.energy(&rates, z).unwrap() - inst.level;
        assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }
}

#[test]
fn paper_instance_is_valid() {
    let inst = CoverageInstance::paper_fig1();
    inst.validate().unwrap();
    for e in &inst.regions {
        for t in &inst.transmitters {
            assert!(e.constraint().eval(t) < 0.0);
        }
    }
    let back = CoverageInstance::from_text(&inst.to_text()).unwrap();
    assert_eq!(back, inst);
}

#[test]
fn instance_validation_rejects_bad_input() {
    let mut inst = CoverageInstance::paper_fig1();
    inst.transmitters[0] = [1.5, 1.75];
    assert!(inst.validate().is_err());
    assert!(CoverageInstance::from_text("level 10\nfoo 1").is_err());
    assert!(CoverageInstance::from_text("level 10\ntransmitter 1 2").is_err());
}

#[test]
fn single_transmitters_match_paper_and_oracle() {
    let inst = CoverageInstance::paper_fig1();
    let b = ClarabelBackend::new();
    for (i, paper) in [(1, 17.594), (0, 11.446)] {
        let single = inst.single(i);
        let sol = solve_coverage(&single, 0, ConeTag::Sos, &b).unwrap();
        let oracle = single_oracle(&inst, i);
        assert!((sol.total - paper).abs() <= 0.01, "transmitter {i}: {}", sol.total);
        assert!((sol.total - oracle).abs() <= 1e-4, "S-lemma exactness: {} vs {oracle}", sol.total);
    }
}

#[test]
fn both_transmitters_need_degree_two() {
    let inst = CoverageInstance::paper_fig1();
    let b = ClarabelBackend::new();
    assert!(matches!(
        solve_coverage(&inst, 0, ConeTag::Sos, &b),
        Err(CoverageError::Infeasible(_))
    ));
    let d2 = solve_coverage(&inst, 2, ConeTag::Sos, &b).unwrap();
    assert!((d2.rates[0] - 2.561).abs() <= 0.05, "{:?}", d2.rates);
    assert!((d2.rates[1] - 5.550).abs() <= 0.05, "{:?}", d2.rates);
    assert!((d2.total - 8.111).abs() <= 0.02);
    for c in &d2.certificates {
        assert!(verify_certificate(c, VERIFY_TOL).passed);
    }
    for j in 0..inst.regions.len() {
        let m = min_energy_in_region(&inst, &d2.rates, j, 200);
        assert!(m >= inst.level - 1e-4, "region {j}: {m}");
    }
    assert!(min_energy_on_regions(&inst, &d2.rates, DEFAULT_BBOX, 400) >= inst.level - 1e-3);

    let d4 = solve_coverage(&inst, 4, ConeTag::Sos, &b).unwrap();
    assert!(d4.total <= d2.total + 1e-6);
    assert!((d2.total - d4.total).abs() <= 1e-3, "{} {}", d2.total, d4.total);
}

#[test]
fn paper_rates_cover_the_regions() {
    let inst = CoverageInstance::paper_fig1();
    let m = min_energy_on_regions(&inst, &[2.561, 5.550], DEFAULT_BBOX, 200);
    assert!(m >= 10.0 - 1e-3, "{m}");
}

#[test]
fn grid_sampling() {
    let inst = CoverageInstance::paper_fig1();
    let rates = [1.0, 2.0];
    let g = sample_energy_grid(&inst, &rates, [0.0, 3.0, 0.0, 3.0], 2);
    assert_eq!(g.len(), 4);
    for s in &g {
        assert_eq!(s.energy, Some(inst.energy(&rates, [s.x, s.y]).unwrap()));
    }
    // a point with E exactly C is covered
    let one = CoverageInstance {
        transmitters: vec![[0.0, 0.0]],
        rate_bounds: vec![20.0],
        level: 10.0,
        regions: vec![],
    };
    let g = sample_energy_grid(&one, &[10.0], [1.0, 1.0, 0.0, 0.0], 1);
    assert_eq!(g[0].energy, Some(10.0));
    assert!(g[0].covered);
    let csv = grid_csv(&g);
    assert!(csv.starts_with("x,y,energy,log_energy,covered\n"));
    assert!(csv.trim_end().ends_with(",1"));
}
