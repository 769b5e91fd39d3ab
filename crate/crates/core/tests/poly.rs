use polycert::poly::{binomial, graded_basis, monomial_basis, taylor_trig, Trig};
use polycert::{Monomial, Polynomial};
use proptest::prelude::*;

const N: usize = 3;

/// Small-integer coefficients keep ring identities exact in floating point.
fn poly_strategy(max_deg: u32) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0..=max_deg, N), -4i32..=4), 0..6).prop_map(|terms| {
        let mut p = Polynomial::zero(N);
        for (e, c) in terms {
            p.add_term(Monomial::new(e), c as f64);
        }
        p
    })
}

fn real_poly(max_deg: u32) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0..=max_deg, N), -2.0f64..2.0), 1..6).prop_map(|terms| {
        let mut p = Polynomial::zero(N);
        for (e, c) in terms {
            p.add_term(Monomial::new(e), c);
        }
        p
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, N)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn basis_sizes_match_binomials() {
    for n in 1..=6 {
        for d in 0..=4 {
            let b = monomial_basis(n, d);
            assert_eq!(b.len() as u64, binomial((n as u64) + d as u64, d as u64));
            assert!(b.windows(2).all(|w| w[0] < w[1]), "sorted and unique");
        }
    }
    assert_eq!(monomial_basis(16, 3).len(), 969);
    assert_eq!(graded_basis(16, 1, 3).len(), 968);
    assert_eq!(graded_basis(2, 2, 2).len(), 3);
}

#[test]
fn taylor_matches_library_trig() {
    for &c in &[0.0, 0.3, -1.1] {
        let s = taylor_trig(Trig::Sin, c, 7);
        let co = taylor_trig(Trig::Cos, c, 7);
        for &d in &[-0.2, 0.05, 0.2] {
            assert!((s.eval(&[d]) - (c + d).sin()).abs() < 1e-8);
            assert!((co.eval(&[d]) - (c + d).cos()).abs() < 1e-8);
        }
    }
}

proptest! {
    #[test]
    fn ring_axioms(p in poly_strategy(2), q in poly_strategy(2), r in poly_strategy(2)) {
        prop_assert_eq!(&p + &q, &q + &p);
        prop_assert_eq!(&p * &q, &q * &p);
        prop_assert_eq!(&(&p + &q) + &r, &p + &(&q + &r));
        prop_assert_eq!(&(&p * &q) * &r, &p * &(&q * &r));
        prop_assert_eq!(&p * &(&q + &r), &(&p * &q) + &(&p * &r));
        prop_assert!((&p - &p).is_zero());
        prop_assert_eq!(&p * &Polynomial::constant(N, 1.0), p.clone());
        prop_assert!((&p * &Polynomial::zero(N)).is_zero());
    }

    #[test]
    fn evaluation_is_a_homomorphism(p in real_poly(3), q in real_poly(3), x in point()) {
        let (pv, qv) = (p.eval(&x), q.eval(&x));
        prop_assert!(close((&p + &q).eval(&x), pv + qv, 1e-12));
        prop_assert!(close((&p * &q).eval(&x), pv * qv, 1e-10));
        prop_assert!(close(p.pow(2).eval(&x), pv * pv, 1e-10));
    }

    #[test]
    fn lie_derivative_matches_finite_differences(
        v in real_poly(3),
        f in prop::collection::vec(real_poly(2), N),
        x in point(),
    ) {
        let lie = v.lie_derivative(&f).unwrap().eval(&x);
        let h = 1e-6;
        let fx: Vec<f64> = f.iter().map(|fi| fi.eval(&x)).collect();
        let xp: Vec<f64> = x.iter().zip(&fx).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&fx).map(|(a, b)| a - h * b).collect();
        let fd = (v.eval(&xp) - v.eval(&xm)) / (2.0 * h);
        prop_assert!((lie - fd).abs() <= 1e-5 * (1.0 + lie.abs()), "{lie} vs {fd}");
    }

    #[test]
    fn product_rule(p in real_poly(3), q in real_poly(3), i in 0..N) {
        let lhs = (&p * &q).partial_derivative(i).unwrap();
        let rhs = &(&p.partial_derivative(i).unwrap() * &q) + &(&p * &q.partial_derivative(i).unwrap());
        prop_assert!(lhs.max_coeff_diff(&rhs) < 1e-10);
    }

    #[test]
    fn affine_substitution_round_trip(
        p in real_poly(3),
        a in prop::collection::vec(-1.0f64..1.0, N * N),
        b in prop::collection::vec(-1.0f64..1.0, N),
    ) {
        // diagonal boost keeps A well conditioned
        let mut m = nalgebra::DMatrix::from_row_slice(N, N, &a);
        for i in 0..N {
            m[(i, i)] += 3.0;
        }
        let inv = m.clone().try_inverse().unwrap();
        let rows = |m: &nalgebra::DMatrix<f64>| (0..N).map(|i| m.row(i).iter().copied().collect()).collect::<Vec<Vec<f64>>>();
        let bv = nalgebra::DVector::from_row_slice(&b);
        let back_b = -(&inv * &bv);
        let q = p.substitute_affine(&rows(&m), &b).unwrap();
        let r = q.substitute_affine(&rows(&inv), back_b.as_slice()).unwrap();
        prop_assert!(p.max_coeff_diff(&r) < 1e-8 * (1.0 + p.max_abs_coeff()));
    }

    #[test]
    fn affine_substitution_evaluates_at_the_image(
        p in real_poly(3),
        a in prop::collection::vec(-1.0f64..1.0, N * N),
        b in prop::collection::vec(-1.0f64..1.0, N),
        x in point(),
    ) {
        let rows: Vec<Vec<f64>> = a.chunks(N).map(<[f64]>::to_vec).collect();
        let y: Vec<f64> = rows.iter().zip(&b).map(|(r, bi)| bi + r.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>()).collect();
        let q = p.substitute_affine(&rows, &b).unwrap();
        prop_assert!(close(q.eval(&x), p.eval(&y), 1e-9));
    }

    #[test]
    fn display_parse_round_trip(p in real_poly(4)) {
        let back = Polynomial::parse(&p.to_string(), N).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn degree_is_additive(p in poly_strategy(3), q in poly_strategy(3)) {
        prop_assume!(!p.is_zero() && !q.is_zero());
        // R[x] has no zero divisors and small integers multiply exactly
        prop_assert_eq!((&p * &q).degree(), p.degree() + q.degree());
    }
}
