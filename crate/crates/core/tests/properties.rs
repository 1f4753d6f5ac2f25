use proptest::prelude::*;

use kbl_core::krylov::{build_krylov, solvability_sweep, Thresholds};
use kbl_core::linalg::{c, distance_to_span, norm2, real, sub, Matrix, C64};
use kbl_core::resolvent::{
    apply_shifted_power, evaluate_polynomial, extract_polynomial, kclass_inverse, resolvent_direct, resolvent_laurent,
    resolvent_neumann_step,
};
use kbl_core::spectral::{projection, Contour};
use kbl_core::{Exponent, OpMatrix, Operator, SpaceSpec};

fn complex() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| c(re, im))
}

fn positive_diag(max: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(0.05f64..1.0, 2..max).prop_map(|v| v.into_iter().map(real).collect())
}

fn dense(n: usize) -> impl Strategy<Value = (Matrix, Vec<C64>)> {
    (prop::collection::vec(complex(), n * n), prop::collection::vec(complex(), n)).prop_map(move |(e, g)| {
        let m = Matrix::from_fn(n, n, |i, j| e[i * n + j] + if i == j { real(2.5) } else { real(0.0) });
        (m, g)
    })
}

/// Diagonal spectrum with the first eigenvalue separated from the rest by at
/// least `gap`; returns the radius of an isolating circle.
fn separated(max: usize) -> impl Strategy<Value = (Vec<C64>, f64)> {
    (complex(), prop::collection::vec(complex(), 1..max)).prop_filter_map("eigenvalue too close", |(first, rest)| {
        let gap = rest.iter().map(|z| (z - first).norm()).fold(f64::INFINITY, f64::min);
        if gap < 0.2 {
            return None;
        }
        let mut all = vec![first];
        all.extend(rest);
        Some((all, 0.5 * gap))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distances_never_increase(sigma in positive_diag(24), f in prop::collection::vec(0.1f64..1.0, 24)) {
        let n = sigma.len();
        let a = Operator::diagonal(sigma);
        let f: Vec<C64> = f[..n].iter().copied().map(real).collect();
        for p in [Exponent::One, Exponent::Two, Exponent::Inf] {
            let space = SpaceSpec::unweighted(p, n).unwrap();
            let r = solvability_sweep(&a, &f, &space, n.min(8), &Thresholds::default()).unwrap();
            prop_assert!(r.max_increase() <= 1e-9 * (1.0 + r.distances[0]), "{:?}", r.distances);
        }
    }

    #[test]
    fn krylov_space_is_invariant((m, g) in dense(5)) {
        let a = Operator::dense(m).unwrap();
        let kb = build_krylov(&a, &g, 5, false).unwrap();
        let grade = kb.grade().unwrap_or(kb.rank());
        let basis = kb.ortho_for(grade);
        for q in basis {
            let aq = a.apply(q).unwrap();
            prop_assert!(distance_to_span(&aq, basis) <= 1e-8 * (1.0 + norm2(&aq)));
        }
    }

    #[test]
    fn projection_is_idempotent_and_commutes((sigma, r) in separated(6)) {
        let a = Operator::diagonal(sigma.clone());
        let p = projection(&a, &Contour::circle(sigma[0], r, 128).unwrap()).unwrap();
        prop_assert!(p.idempotency_residual <= 1e-8);
        prop_assert!(p.commutator_residual <= 1e-8);
        prop_assert_eq!(p.rank, p.enclosed_multiplicity.unwrap());
    }

    #[test]
    fn projected_vectors_stay_in_range((sigma, r) in separated(6), g in prop::collection::vec(complex(), 6)) {
        let n = sigma.len();
        let a = Operator::diagonal(sigma.clone());
        let p = projection(&a, &Contour::circle(sigma[0], r, 128).unwrap()).unwrap().p;
        let pg = p.apply(&g[..n]).unwrap();
        let ppg = p.apply(&pg).unwrap();
        prop_assert!(norm2(&sub(&ppg, &pg)) <= 1e-8 * (1.0 + norm2(&pg)));
    }

    #[test]
    fn quadrature_converges((sigma, r) in separated(5)) {
        let a = Operator::diagonal(sigma.clone());
        let p128 = projection(&a, &Contour::circle(sigma[0], r, 128).unwrap()).unwrap().p;
        let p256 = projection(&a, &Contour::circle(sigma[0], r, 256).unwrap()).unwrap().p;
        prop_assert!(p128.distance_inf(&p256).unwrap() < 1e-10);
    }

    #[test]
    fn series_bounds_are_upper_bounds(sigma in prop::collection::vec(complex(), 1..6), angle in 0.0f64..6.28, order in 3usize..30, frac in 0.05f64..0.7) {
        let a = Operator::diagonal(sigma);
        let zeta = C64::from_polar(3.0, angle);
        let l = resolvent_laurent(&a, zeta, order).unwrap();
        let exact = resolvent_direct(&a, zeta).unwrap().value;
        prop_assert!(l.value.distance_inf(&exact).unwrap() <= l.error_bound.unwrap());
        let target = zeta + C64::from_polar(frac * a.spectrum_distance(zeta).unwrap(), angle + 1.0);
        let step = resolvent_neumann_step(&a, &l, target, order).unwrap();
        let exact = resolvent_direct(&a, target).unwrap().value;
        prop_assert!(step.value.distance_inf(&exact).unwrap() <= step.error_bound.unwrap());
    }

    #[test]
    fn laurent_polynomial_reproduces_value(sigma in prop::collection::vec(complex(), 1..5), power in 0usize..3, lambda in complex(), order in 1usize..12) {
        let a = Operator::diagonal(sigma);
        let l = resolvent_laurent(&a, real(4.0), order).unwrap();
        let ap = kbl_core::resolvent::ApproxOperator {
            zeta: l.zeta,
            value: l.value.clone(),
            provenance: l.provenance.clone().unwrap(),
            degree_bound: Some(order),
            error_bound: l.error_bound.unwrap(),
            plan: None,
            step_bounds: vec![],
        };
        let shifted = apply_shifted_power(&a, &ap, lambda, power).unwrap();
        let coeffs = extract_polynomial(&shifted, 64).unwrap();
        prop_assert_eq!(coeffs.len(), order + power + 1);
        let rebuilt = evaluate_polynomial(&a, &coeffs).unwrap();
        prop_assert!(rebuilt.distance_inf(&shifted.value).unwrap() <= 1e-12 * (1.0 + shifted.value.norm_inf()));
    }

    #[test]
    fn shifted_power_matches_its_polynomial(sigma in prop::collection::vec(0.5f64..2.0, 1..5), lambda in complex(), power in 0usize..4) {
        let a = Operator::diagonal(sigma.into_iter().map(real).collect());
        let ap = kclass_inverse(&a, 1e-8, None).unwrap();
        let shifted = apply_shifted_power(&a, &ap, lambda, power).unwrap();
        prop_assert_eq!(shifted.provenance.degree(), ap.provenance.degree().saturating_add(power));
        let scale = 1.0 + shifted.value.norm_inf();
        // (A − λI)^k A⁻¹ against the exact product
        let mut exact = resolvent_direct(&a, real(0.0)).unwrap().value;
        let s = OpMatrix::from_operator(&a).shift_diagonal(lambda);
        for _ in 0..power {
            exact = s.mul(&exact).unwrap();
        }
        prop_assert!(shifted.value.distance_inf(&exact).unwrap() <= shifted.error_bound + 1e-12 * scale);
    }
}
