mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use simlab::bhatskeide::{
    bs_check_interpolation, bs_matrix, bs_semigroup_residual, CircleGrid, InterpolatedSemigroup,
};
use simlab::numkit::{
    cond_pd, eigenvalues, format_matrix, kron, matexp, max_abs_diff, min_eig, op_norm,
    parse_matrix, real, spectral_abscissa, spectral_radius, Operator, TolerancePolicy,
};
use simlab::simcert::{
    neumann_certificate, power_lower_bound, quasi_rate, rota_renorm, similarity_constant, Verdict,
};
use simlab::tensorsplit::{split_scaling_discrete, ScalingKind};

use common::{conjugated_contraction, random_stable, random_unitary, rel, rng, with_radius};

fn matrix(n: usize) -> impl Strategy<Value = Operator> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
        Operator::from_iterator(n, n, v.into_iter().map(|(re, im)| Complex64::new(re, im)))
    })
}

fn square(max: usize) -> impl Strategy<Value = Operator> {
    (1..=max).prop_flat_map(matrix)
}

/// A matrix rescaled to spectral radius `r` (left alone if nilpotent).
fn with_spectral_radius(max: usize, r: std::ops::Range<f64>) -> impl Strategy<Value = Operator> {
    (square(max), r).prop_map(|(m, r)| with_radius(m, r))
}

fn tol() -> TolerancePolicy {
    TolerancePolicy::default()
}

proptest! {
    #[test]
    fn kron_norm_and_radius_multiply(a in square(5), b in square(5)) {
        let k = kron(&a, &b);
        prop_assert!(rel(op_norm(&k), op_norm(&a) * op_norm(&b)) <= 1e-10);
        let (ra, rb) = (spectral_radius(&a).unwrap(), spectral_radius(&b).unwrap());
        prop_assert!((spectral_radius(&k).unwrap() - ra * rb).abs() <= 1e-8 * (ra * rb).max(1.0));
    }

    #[test]
    fn kron_spectrum_is_pairwise_products(a in square(4), b in square(4)) {
        let (ea, eb) = (eigenvalues(&a).unwrap(), eigenvalues(&b).unwrap());
        for z in eigenvalues(&kron(&a, &b)).unwrap() {
            let d = ea.iter().flat_map(|x| eb.iter().map(move |y| (x * y - z).norm())).fold(f64::INFINITY, f64::min);
            prop_assert!(d <= 1e-7 * z.norm().max(1.0), "eigenvalue {z} is {d} away from every product");
        }
    }

    #[test]
    fn exponential_is_a_semigroup(a in square(5), s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let lhs = matexp(&(&a * real(s + t))).unwrap();
        let rhs = matexp(&(&a * real(s))).unwrap() * matexp(&(&a * real(t))).unwrap();
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-10 * op_norm(&lhs).max(1.0));
    }

    #[test]
    fn matrix_text_round_trips_bitwise(m in square(6)) {
        let back = parse_matrix(&format_matrix(&m)).unwrap();
        prop_assert_eq!(back, m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn certificates_are_sound_and_sandwiched(t in with_spectral_radius(5, 0.2..0.95)) {
        let tol = tol();
        let res = similarity_constant(&t, tol.kappa_max, &tol).unwrap();
        prop_assert_eq!(res.verdict, Verdict::Similar);
        let cert = res.certificate.as_ref().unwrap();
        let p = cert.p.matrix();
        prop_assert!(min_eig(p) >= 1.0 - tol.tol_psd);
        prop_assert!(min_eig(&(p - t.adjoint() * p * &t)) >= -tol.tol_psd * cert.kappa);
        prop_assert!(rel(cond_pd(p).unwrap(), cert.kappa) <= 1e-8);
        let lower = power_lower_bound(&t, 32).unwrap();
        let upper = cond_pd(neumann_certificate(&t, &tol).unwrap().p.matrix()).unwrap().sqrt();
        prop_assert!(lower <= res.constant * (1.0 + 1e-8), "{lower} > {}", res.constant);
        prop_assert!(res.constant <= upper * (1.0 + 1e-8), "{} > {upper}", res.constant);
    }

    #[test]
    fn constant_is_unitarily_invariant(seed in any::<u64>(), n in 2usize..=3) {
        let tol = tol();
        let mut rng = rng(seed);
        let t = with_radius(common::random_matrix(&mut rng, n), 0.8);
        let u = random_unitary(&mut rng, n);
        let a = similarity_constant(&t, tol.kappa_max, &tol).unwrap().constant;
        let b = similarity_constant(&(u.adjoint() * &t * &u), tol.kappa_max, &tol).unwrap().constant;
        prop_assert!(rel(a, b) <= 1e-6, "{a} vs {b}");
    }

    #[test]
    fn quasi_rate_decreases_to_abscissa(seed in any::<u64>()) {
        let tol = tol();
        let mut rng = rng(seed);
        let a = random_stable(&mut rng, 3, -0.5);
        let abscissa = spectral_abscissa(&a).unwrap();
        let rates: Vec<f64> = [1.0, 10.0, 100.0, 1e4].iter().map(|&k| quasi_rate(&a, k, &tol).unwrap()).collect();
        for w in rates.windows(2) {
            prop_assert!(w[1] <= w[0] + tol.tol_rel, "{rates:?}");
        }
        prop_assert!(rates.iter().all(|&r| r >= abscissa - tol.tol_rel), "{rates:?} below {abscissa}");
    }

    #[test]
    fn rota_metric_certifies_rate(seed in any::<u64>(), n in 1usize..=5, frac in 0.01f64..0.99) {
        let tol = tol();
        let mut rng = rng(seed);
        let a = random_stable(&mut rng, n, -0.3);
        let rate = spectral_abscissa(&a).unwrap() * frac;
        let cert = rota_renorm(&a, rate, &tol).unwrap();
        prop_assert!(cert.residual <= 1e-9);
        prop_assert!(cert.validates_continuous(&a, tol.tol_psd));
    }

    #[test]
    fn split_round_trip(seed in any::<u64>(), n1 in 1usize..=3, n2 in 1usize..=3) {
        let tol = tol();
        let mut rng = rng(seed);
        let t1 = conjugated_contraction(&mut rng, n1);
        let t2 = conjugated_contraction(&mut rng, n2);
        let res = split_scaling_discrete(&[t1.clone(), t2.clone()], tol.kappa_max, &tol).unwrap();
        prop_assert_eq!(res.verdict, Verdict::Similar);
        prop_assert_eq!(res.kind, ScalingKind::Multiplicative);
        prop_assert!(res.constraint_defect() <= tol.tol_rel);
        let tc = res.tensor_certificate.as_ref().unwrap();
        let k1 = res.factor_certificates[0].as_ref().unwrap().kappa;
        let k2 = res.factor_certificates[1].as_ref().unwrap().kappa;
        prop_assert!(rel(tc.kappa, k1 * k2) <= 1e-8);
        let s1 = &t1 * real(res.scalings[0]);
        let s2 = &t2 * real(res.scalings[1]);
        prop_assert!(tc.validates_discrete(&kron(&s1, &s2), tol.tol_psd));
        let whole = similarity_constant(&kron(&s1, &s2), tol.kappa_max, &tol).unwrap().constant;
        for s in [&s1, &s2] {
            let part = similarity_constant(s, tol.kappa_max, &tol).unwrap().constant;
            prop_assert!(part <= whole + 1e-6, "{part} > {whole}");
        }
    }

    #[test]
    fn radius_product_above_one_is_obstructed(
        a in with_spectral_radius(3, 0.2..3.0),
        b in square(3),
        excess in 1.01f64..4.0,
    ) {
        let tol = tol();
        let ra = spectral_radius(&a).unwrap();
        prop_assume!(ra > 0.0);
        let b = with_radius(b, excess / ra);
        prop_assume!(spectral_radius(&b).unwrap() > 0.0);
        let res = split_scaling_discrete(&[a, b], tol.kappa_max, &tol).unwrap();
        prop_assert_eq!(res.verdict, Verdict::SpectralObstruction);
        prop_assert!(res.tensor_certificate.is_none());
        prop_assert!(res.factor_certificates.iter().all(Option::is_none));
    }

    #[test]
    fn interpolation_is_exact(t in with_spectral_radius(3, 0.1..1.5), arcs in 2usize..=8) {
        let grid = CircleGrid::new(arcs).unwrap();
        let s = InterpolatedSemigroup::new(t.clone(), grid).unwrap();
        let times = grid.times_up_to(2.0);
        for &t1 in &times {
            for &t2 in &times {
                prop_assert_eq!(bs_semigroup_residual(&s, t1, t2).unwrap(), 0.0);
            }
        }
        for n in 0..=4 {
            prop_assert_eq!(bs_check_interpolation(&s, n), 0.0);
        }
        let c = &t * real(0.99 / op_norm(&t));
        let sc = InterpolatedSemigroup::new(c, grid).unwrap();
        for &time in &times {
            prop_assert!(op_norm(&bs_matrix(&sc, time).unwrap()) <= 1.0 + 1e-12);
        }
    }
}
