use ksfront::kernel::{psi_direct, psi_fast};
use ksfront::{Grid, ModelParams, ScalarField, TailPolicy};
use proptest::prelude::*;

fn model() -> impl Strategy<Value = ModelParams> {
    (0.0..5.0f64, 0.05..10.0f64, 0.05..10.0f64, 0.05..10.0f64, 0.05..10.0f64)
        .prop_map(|(chi, a, b, lambda, mu)| ModelParams::new(chi, a, b, lambda, mu).unwrap())
}

fn field(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..5.0f64, n + 1)
}

fn tail() -> impl Strategy<Value = TailPolicy> {
    prop_oneof![Just(TailPolicy::Zero), Just(TailPolicy::ConstantLeft), Just(TailPolicy::ConstantBoth)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_linear(p in model(), u in field(200), w in field(200), s in 0.0..3.0f64, t in tail()) {
        let g = Grid::new(10.0, 200).unwrap();
        let combo: Vec<f64> = u.iter().zip(&w).map(|(x, y)| x + s * y).collect();
        let psi = |v: &[f64]| psi_fast(&ScalarField::new(g, v.to_vec()).unwrap(), &p, t).0;
        let (pu, pw, pc) = (psi(&u), psi(&w), psi(&combo));
        let scale = pc.max_abs().max(1e-300);
        for i in 0..g.n_nodes() {
            prop_assert!((pc[i] - pu[i] - s * pw[i]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn kernel_is_positive_and_bounded(p in model(), u in field(150), t in tail()) {
        let g = Grid::new(8.0, 150).unwrap();
        let u = ScalarField::new(g, u).unwrap();
        let psi = psi_fast(&u, &p, t).0;
        let cap = p.mu / p.lambda * u.max();
        prop_assert!(psi.min() >= 0.0);
        prop_assert!(psi.max() <= cap * (1.0 + 1e-12));
    }

    #[test]
    fn fast_matches_direct(p in model(), u in field(128), t in tail()) {
        let g = Grid::new(6.0, 128).unwrap();
        let u = ScalarField::new(g, u).unwrap();
        let fast = psi_fast(&u, &p, t).0;
        let direct = psi_direct(&u, &p, t);
        prop_assert!(fast.sup_distance(&direct).unwrap() <= 1e-10 * direct.max_abs().max(1e-300));
    }

    #[test]
    fn a_star_is_sqrt_a_iff_admissible(p in model()) {
        prop_assume!(p.global_existence());
        let a_star = p.a_star().unwrap();
        prop_assert_eq!(a_star == p.sqrt_a(), p.kappa_admissible(p.sqrt_a()));
        // Under the standing hypothesis the minimal speed collapses to 2 sqrt(a).
        if p.hypothesis_h() {
            prop_assert!((p.speed_constants().unwrap().c_star - 2.0 * p.sqrt_a()).abs() <= 1e-12 * p.sqrt_a());
        }
    }

    #[test]
    fn c_star_dominates_kpp_speed(p in model()) {
        prop_assume!(p.global_existence());
        let s = p.speed_constants().unwrap();
        prop_assert!(s.c_star >= s.c0_star * (1.0 - 1e-15));
        prop_assert!(s.a_star > 0.0 && s.a_star <= p.sqrt_a());
        prop_assert!(p.kappa_admissible(s.a_star * (1.0 - 1e-12)));
    }
}
