//! Property-based invariants: quadrature linearity and domain splitting,
//! norm homogeneity, Lorentz/Lebesgue agreement and Lyapunov monotonicity
//! on randomized inputs.

use proptest::prelude::*;

use ribound::norms::{
    lorentz_quasinorm, lp_norm_empirical, EmpiricalSample, LorentzQ, MomentCurve, Provenance,
    TailSource,
};
use ribound::quadrature::{integrate, integrate_with, Domain, QuadratureRequest};

const INV_SQRT_2PI: f64 = 0.398942280401432677939946059934;

fn gauss_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Linearity of the integral on polynomial-times-Gaussian integrands.
    #[test]
    fn quadrature_linearity(
        ca in proptest::collection::vec(-3.0..3.0f64, 1..4),
        cb in proptest::collection::vec(-3.0..3.0f64, 1..4),
        a in -4.0..4.0f64,
        b in -4.0..4.0f64,
    ) {
        let f = |x: f64| poly(&ca, x) * gauss_pdf(x);
        let g = |x: f64| poly(&cb, x) * gauss_pdf(x);
        let combined = |x: f64| a * f(x) + b * g(x);
        let rf = integrate_with(f, Domain::FullLine, 1e-12, 1e-11).unwrap();
        let rg = integrate_with(g, Domain::FullLine, 1e-12, 1e-11).unwrap();
        let rc = integrate_with(combined, Domain::FullLine, 1e-12, 1e-11).unwrap();
        prop_assert!(rf.converged && rg.converged && rc.converged);
        let want = a * rf.value + b * rg.value;
        let tol = 1e-9 * (1.0 + want.abs());
        prop_assert!((rc.value - want).abs() < tol, "{} vs {}", rc.value, want);
    }

    // Full-line integral of an even integrand equals twice the half-line
    // integral.
    #[test]
    fn quadrature_domain_splitting(k in 0usize..4) {
        let f = move |x: f64| x.powi(2 * k as i32) * gauss_pdf(x);
        let full = integrate_with(f, Domain::FullLine, 1e-12, 1e-11).unwrap();
        let half = integrate_with(f, Domain::HalfLine { a: 0.0 }, 1e-12, 1e-11).unwrap();
        prop_assert!(full.converged && half.converged);
        prop_assert!(
            (full.value - 2.0 * half.value).abs() < 2e-10 * (1.0 + full.value.abs())
        );
    }

    // Split hints never change a converged value beyond tolerance.
    #[test]
    fn quadrature_split_hint_consistency(hint in -2.0..2.0f64) {
        let plain = integrate_with(gauss_pdf, Domain::FullLine, 1e-12, 1e-11).unwrap();
        let hinted = integrate(
            &QuadratureRequest::new(gauss_pdf, Domain::FullLine)
                .with_tolerance(1e-12, 1e-11)
                .with_split_points(&[hint]),
        )
        .unwrap();
        prop_assert!((plain.value - hinted.value).abs() < 1e-10);
    }

    // Empirical p-norm is absolutely homogeneous.
    #[test]
    fn lp_homogeneity(
        values in proptest::collection::vec(-50.0..50.0f64, 2..60),
        c in prop_oneof![Just(-2.0), Just(0.5), Just(3.0)],
        p in 1.0..6.0f64,
    ) {
        let base = lp_norm_empirical(&values, p).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| c * v).collect();
        let got = lp_norm_empirical(&scaled, p).unwrap();
        prop_assert!((got - c.abs() * base).abs() <= 1e-10 * (1.0 + base));
    }

    // L_{p,p} agrees with L_p on the same sample (a few ulps of rounding).
    #[test]
    fn lorentz_diagonal_matches_lp(
        values in proptest::collection::vec(-100.0..100.0f64, 2..80),
        p in prop_oneof![Just(1.0), Just(2.0), Just(3.0)],
    ) {
        let sample = EmpiricalSample::new(values.clone(), Provenance::synthetic("prop")).unwrap();
        let lor = lorentz_quasinorm(TailSource::Empirical(&sample), p, LorentzQ::Finite(p))
            .unwrap()
            .finite()
            .unwrap();
        let lp = lp_norm_empirical(&values, p).unwrap();
        prop_assert!(
            (lor - lp).abs() <= 8.0 * f64::EPSILON * (1.0 + lp),
            "{lor} vs {lp}"
        );
    }

    // Lyapunov: the plug-in moment curve never decreases in p.
    #[test]
    fn moment_curve_monotone(
        values in proptest::collection::vec(-20.0..20.0f64, 2..60),
    ) {
        let sample = EmpiricalSample::new(values, Provenance::synthetic("prop")).unwrap();
        let grid = [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0];
        // The constructor itself asserts monotonicity.
        prop_assert!(MomentCurve::from_empirical(&sample, &grid).is_ok());
    }
}
