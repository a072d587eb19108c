use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;

use latent_count::io::fmt_f64;
use latent_count::link::LinkContext;
use latent_count::marginals::MarginalSpec;
use latent_count::rng::stream_seed;
use latent_count::sparse_var::{kkt_residual, lasso_solve, psd_project, soft_threshold, LassoOptions, LassoProblem};

fn spec_strategy() -> impl Strategy<Value = MarginalSpec> {
    prop_oneof![
        (0.05f64..0.95).prop_map(|p| MarginalSpec::bernoulli(p).unwrap()),
        (1u32..6, 0.1f64..0.9).prop_map(|(n, p)| MarginalSpec::binomial(n, p).unwrap()),
        (0.2f64..5.0).prop_map(|l| MarginalSpec::poisson(l).unwrap()),
        (1u32..4, 0.3f64..0.9).prop_map(|(r, p)| MarginalSpec::neg_binomial(r, p).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn link_is_increasing_and_invertible(a in spec_strategy(), b in spec_strategy(), u in -0.95f64..0.95, du in 0.001f64..0.05) {
        let ctx = LinkContext::new(a, b).unwrap();
        let lo = ctx.link_eval(u).unwrap();
        let hi = ctx.link_eval((u + du).min(0.99)).unwrap();
        prop_assert!(hi > lo);
        prop_assert!(ctx.link_deriv(u).unwrap() > 0.0);
        prop_assert!((ctx.link_invert(lo) - u).abs() < 1e-8);
    }

    #[test]
    fn link_is_odd_for_symmetric_pairs(p in 0.05f64..0.95, u in 0.0f64..0.95) {
        // Bernoulli(p) x Bernoulli(1-p) has the reflected link of Bernoulli(p) x Bernoulli(p)
        let same = LinkContext::new(MarginalSpec::bernoulli(p).unwrap(), MarginalSpec::bernoulli(p).unwrap()).unwrap();
        let flip = LinkContext::new(MarginalSpec::bernoulli(p).unwrap(), MarginalSpec::bernoulli(1.0 - p).unwrap()).unwrap();
        prop_assert!((same.link_eval(u).unwrap() + flip.link_eval(-u).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn soft_threshold_is_the_l1_prox(z in -5.0f64..5.0, t in 0.0f64..3.0, y in -5.0f64..5.0) {
        let x = soft_threshold(z, t);
        let f = |v: f64| 0.5 * (v - z) * (v - z) + t * v.abs();
        prop_assert!(f(x) <= f(y) + 1e-12);
        prop_assert!(x.abs() <= z.abs());
    }

    #[test]
    fn lasso_meets_optimality(seed in any::<u64>(), lambda in 0.0f64..0.5) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (d, p) = (3, 1);
        let w = DMatrix::from_fn(3, 5, |_, _| rng.random_range(-1.0..1.0));
        let g = &w * w.transpose() / 5.0 + DMatrix::identity(3, 3) * 0.1;
        let gamma = DVector::from_fn(9, |_, _| rng.random_range(-0.5..0.5));
        let prob = LassoProblem::new(gamma, g, lambda, d, p).unwrap();
        let sol = lasso_solve(&prob, &LassoOptions::default()).unwrap();
        prop_assert!(sol.converged);
        prop_assert!(kkt_residual(&prob, &sol.beta_hat) < 1e-6);
        prop_assert!(prob.objective(&sol.beta_hat) <= prob.objective(&DVector::zeros(9)) + 1e-12);
    }

    #[test]
    fn psd_projection_keeps_the_diagonal(entries in proptest::collection::vec(-1.0f64..1.0, 16)) {
        let m = DMatrix::from_vec(4, 4, entries);
        let mut a = (&m + m.transpose()) * 0.5;
        a.fill_diagonal(1.0);
        let proj = psd_project(&a);
        prop_assert!(SymmetricEigen::new(proj.clone()).eigenvalues.min() > -1e-10);
        for i in 0..4 {
            prop_assert!((proj[(i, i)] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn floats_round_trip_through_csv(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn seed_streams_are_distinct(master in any::<u64>(), i in 0u64..1000, j in 0u64..1000) {
        prop_assume!(i != j);
        prop_assert_ne!(stream_seed(master, i), stream_seed(master, j));
    }
}
