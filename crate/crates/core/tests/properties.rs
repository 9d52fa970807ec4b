//! Randomized invariants across modules.

use proptest::prelude::*;

use pnhybrid::bounds::{hybrid_error_bound, kernel_functions, pn_error_bound, BoundInputs};
use pnhybrid::grid::{l2_norm, MomentField, ScalarField, SpatialGrid};
use pnhybrid::harmonics::{
    angular_norm_circ, angular_seminorm, equivalence_constants, MomentVector,
};
use pnhybrid::harness::config::{emit, parse_str, RunSpec};
use pnhybrid::harness::manufactured::{manufactured, ProblemParams};
use pnhybrid::transport::solve_pn;

fn moments(coeffs: &[f64]) -> MomentVector {
    let mut l = 0;
    while (l + 1) * (l + 1) < coeffs.len() {
        l += 1;
    }
    let mut v = MomentVector::zeros(l);
    v.coeffs_mut()[..coeffs.len()].copy_from_slice(coeffs);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_are_ordered_and_bounded(tau in 1e-6f64..200.0) {
        let k = kernel_functions(tau).unwrap();
        prop_assert!(k.kappa > 0.0 && k.kappa <= 1.0);
        prop_assert!(k.gamma >= k.kappa && k.gamma <= 1.0);
        prop_assert!(k.beta1 > 0.0 && k.beta2 > 0.0 && k.beta3 > 0.0);
        prop_assert!(k.beta3 <= k.beta2 && k.beta2 <= k.beta1);
    }

    #[test]
    fn truncation_tail_is_bounded_by_seminorm(c in prop::collection::vec(-1.0f64..1.0, 1..200), s in 1u32..4) {
        let u = moments(&c);
        for n in (s as usize - 1)..=u.max_degree() {
            let rhs = (n as f64 + 1.0).powi(-(s as i32)) * angular_seminorm(&u, s);
            prop_assert!(u.tail(n).norm() <= rhs * (1.0 + 1e-13) + 1e-15);
        }
    }

    #[test]
    fn upper_equivalence_constant_holds(c in prop::collection::vec(-1.0f64..1.0, 1..200), s in 0u32..4) {
        let u = moments(&c);
        let (_, c2) = equivalence_constants(s);
        let h = u.norm().powi(2) + angular_seminorm(&u, s).powi(2);
        prop_assert!(angular_norm_circ(&u, s) <= c2 * h.sqrt() * (1.0 + 1e-13));
    }

    #[test]
    fn pn_norm_never_grows(eps in 0.1f64..2.0, sigma in 0.0f64..3.0, n in 1usize..6) {
        let p = ProblemParams { eps, sigma_t: sigma, ..Default::default() };
        let m = manufactured("sobolev-s", &p).unwrap();
        let traj = solve_pn(&m.spec, n, &[0.25, 0.5, 1.0]).unwrap();
        for w in traj.norms.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn bounds_shrink_with_degree(eps in 0.05f64..2.0, sigma in 0.05f64..4.0, n in 2usize..12) {
        let p = ProblemParams { eps, sigma_t: sigma, ..Default::default() };
        let m = manufactured("sobolev-s", &p).unwrap();
        let lo = BoundInputs::from_spec(&m.spec, 2, n).unwrap();
        let hi = BoundInputs::from_spec(&m.spec, 2, n + 1).unwrap();
        prop_assert!(pn_error_bound(&hi).unwrap().total < pn_error_bound(&lo).unwrap().total);
        prop_assert!(hybrid_error_bound(&hi).unwrap().total < hybrid_error_bound(&lo).unwrap().total);
    }

    #[test]
    fn separable_fields_have_product_norm(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let grid = SpatialGrid::new(1, 5).unwrap();
        let f = ScalarField::cosine(grid, [1, 0, 0], a).unwrap();
        let mut v = MomentVector::zeros(1);
        v.set(1, 0, b);
        let m = MomentField::separable(&f, &v);
        prop_assert!((l2_norm(&m) - f.l2_norm() * v.norm()).abs() <= 1e-12 * (1.0 + l2_norm(&m)));
    }

    #[test]
    fn config_round_trips(n in 0usize..20, eps in 0.01f64..10.0, steps in 1usize..9, seed in any::<u64>()) {
        let mut spec = RunSpec { n, seed, ..Default::default() };
        spec.params.eps = eps;
        spec.params.t_final = 2.0;
        spec.params.dt = 2.0 / steps as f64;
        spec.sweep.n = vec![n, n + 1];
        let back = parse_str(&emit(&spec)).unwrap();
        prop_assert_eq!(back, spec);
    }
}
