use dirjump::estimators::{claim_rule, Binning, ClaimId, Diagnostics, EstimateReport};
use dirjump::exec::{Executor, Merge};
use dirjump::grid::{assemble, heat_row, BoundaryMode, GridSpec};
use dirjump::model::JumpKernel;
use dirjump::stats::{fit_line, Moments};
use dirjump::{JumpKernelSpec, ModelSpec, Point};
use proptest::prelude::*;

fn kernels() -> impl Strategy<Value = JumpKernelSpec> {
    prop_oneof![
        Just(JumpKernelSpec::zero()),
        (0.1..1.9f64).prop_map(JumpKernelSpec::stable),
        (0.1..1.9f64, 0.2..3.0f64).prop_map(|(a, r)| JumpKernelSpec::truncated(a, r)),
        (0.1..1.0f64, 1.0..1.9f64).prop_map(|(a, b)| JumpKernelSpec::mixed(a, b)),
        (0.1..1.9f64).prop_map(JumpKernelSpec::violating),
        (0.1..1.9f64, 0.1..1.0f64, 1.0..3.0f64).prop_map(|(a, lo, hi)| JumpKernelSpec::stable(a).with_modulation(lo, hi)),
    ]
}

fn point(dim: usize) -> impl Strategy<Value = Point> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(move |(x, y)| if dim == 1 { Point::new1(x) } else { Point::new2(x, y) })
}

fn claims() -> impl Strategy<Value = ClaimId> {
    proptest::sample::select(ClaimId::ALL.to_vec())
}

proptest! {
    #[test]
    fn kernels_are_symmetric_and_nonnegative(spec in kernels(), x in point(2), y in point(2), two_d in any::<bool>()) {
        let dim = if two_d { 2 } else { 1 };
        let (x, y) = if two_d { (x, y) } else { (Point::new1(x.x()), Point::new1(y.x())) };
        let k = JumpKernel::new(spec, dim);
        let a = k.eval(&x, &y);
        prop_assert!(a >= 0.0);
        prop_assert_eq!(a.to_bits(), k.eval(&y, &x).to_bits());
    }

    #[test]
    fn claim_rule_agrees_with_stored_pass(claim in claims(), vals in proptest::collection::vec(-1.0..5.0f64, 12)) {
        let keys = ["c_observed", "c_observed_refined", "c_observed_coarse_t", "c1", "theta", "slope",
                    "lhs", "rhs", "se_lhs", "se_rhs", "alpha", "c_harnack"];
        let fitted = keys.iter().zip(&vals).map(|(k, v)| (k.to_string(), *v)).collect();
        let tol = [("rel_change".to_string(), 0.2)].into_iter().collect();
        let r = EstimateReport::new(claim, fitted, tol, Diagnostics::new(&["x"]));
        prop_assert!(r.is_consistent());
        prop_assert_eq!(r.pass, claim_rule(claim, &r.fitted_constants, &r.tolerance));
        let back: EstimateReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn claim_ids_parse_back(claim in claims()) {
        prop_assert_eq!(claim.as_str().parse::<ClaimId>().unwrap(), claim);
    }

    #[test]
    fn bin_centres_are_within_half_width(dim in 1usize..=2, w in 0.01..0.5f64, half in 0.5..3.0f64, p in point(2)) {
        let b = Binning::centered(dim, &Point::ORIGIN, w, half);
        let p = if dim == 1 { Point::new1(p.x()) } else { p };
        if let Some(i) = b.bin_of(&p) {
            let c = b.center(i);
            for k in 0..dim {
                prop_assert!((c.0[k] - p.0[k]).abs() <= w / 2.0 + 1e-12);
            }
        }
        // The centre point always lands in the middle bin.
        let mid = b.bin_of(&Point::ORIGIN).unwrap();
        prop_assert!(b.center(mid).norm() < 1e-12);
    }

    #[test]
    fn moments_merge_equals_push(xs in proptest::collection::vec(-100.0..100.0f64, 0..60), cut in 0usize..60) {
        let cut = cut.min(xs.len());
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..cut].iter().for_each(|&x| a.push(x));
        xs[cut..].iter().for_each(|&x| b.push(x));
        a.merge(b);
        prop_assert_eq!(a.n, all.n);
        prop_assert!((a.sum - all.sum).abs() <= 1e-9 * (1.0 + all.sum.abs()));
        prop_assert!((a.sum_sq - all.sum_sq).abs() <= 1e-9 * (1.0 + all.sum_sq));
    }

    #[test]
    fn fit_line_is_exact_without_noise(a in -5.0..5.0f64, b in -5.0..5.0f64, n in 3usize..30) {
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.37 - 2.0).collect();
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let f = fit_line(&x, &y);
        prop_assert!((f.slope - a).abs() < 1e-9);
        prop_assert!((f.intercept - b).abs() < 1e-9);
        prop_assert!(f.max_abs_residual < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fold_is_bitwise_independent_of_workers(n in 0usize..3000, workers in 1usize..6, scale in 0.1..10.0f64) {
        let item = |i: usize, m: &mut Moments| {
            m.push(((i as f64) * scale).sin() * 1e3);
            Ok(())
        };
        let s = Executor::sequential().fold(n, Moments::default, item).unwrap();
        let p = Executor::parallel(Some(workers)).fold(n, Moments::default, item).unwrap();
        prop_assert_eq!(s.n, p.n);
        prop_assert_eq!(s.sum.to_bits(), p.sum.to_bits());
        prop_assert_eq!(s.sum_sq.to_bits(), p.sum_sq.to_bits());
    }

    #[test]
    fn periodic_heat_rows_are_stochastic_and_symmetric(spec in kernels(), t in 0.01..1.0f64) {
        let model = ModelSpec::unit_diffusion(1, spec).unwrap();
        let gen = assemble(&model, &GridSpec::new(1, 1.0, 1.0 / 8.0, BoundaryMode::Periodic)).unwrap();
        let (i, j) = (0, gen.n() / 3);
        let pi = heat_row(&gen, t, i).unwrap();
        let pj = heat_row(&gen, t, j).unwrap();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        prop_assert!(pi.iter().all(|&p| p >= -1e-12));
        prop_assert!((pi[j] - pj[i]).abs() < 1e-10);
    }
}
