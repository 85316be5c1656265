use num_traits::{One, Signed};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use minimax_mdp::ext::{Fin, NegInf};
use minimax_mdp::mdp::{check_feasible, check_feasible_fast, oracle_feasible, FiniteMinimaxMdp};
use minimax_mdp::multiphase::changing::{
    build_changing_cost_glinear, cost_grid, ptas_round_costs, ChangingCostJson,
};
use minimax_mdp::multiphase::glinear::check_glinear;
use minimax_mdp::multiphase::MultiPhaseJson;
use minimax_mdp::oracle::{random_changing_cost, random_mdp, random_multiphase, random_pwl, random_rmowp, Sampler};
use minimax_mdp::polygon::{hull, Polygon};
use minimax_mdp::pwl::upper_envelope;
use minimax_mdp::rmowp::{
    adversary_search, cr_star, regret_policy, regret_star, Metric, RmowpJson, SequenceFamily,
};
use minimax_mdp::scalar::{q, qi, simplest_between, Q};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn small_q() -> impl Strategy<Value = Q> {
    (-16i64..=16).prop_map(|n| q(n, 4))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn both_checkers_agree_with_the_oracle(seed in any::<u64>()) {
        let mdp = random_mdp(&Sampler::new(seed));
        let v = check_feasible(&mdp).is_feasible();
        prop_assert_eq!(v, check_feasible_fast(&mdp).is_feasible());
        prop_assert_eq!(v, oracle_feasible(&mdp).0);
    }

    #[test]
    fn mdp_json_round_trips(seed in any::<u64>()) {
        let mdp = random_mdp(&Sampler::new(seed));
        let back = FiniteMinimaxMdp::<Q>::from_json(&mdp.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), mdp.to_json());
    }

    #[test]
    fn closed_forms_are_in_range(seed in any::<u64>()) {
        let inst = random_rmowp(&mut rng(seed), 4);
        prop_assert!(!regret_star(&inst).unwrap().is_negative());
        let phi = cr_star(&inst).unwrap();
        prop_assert!(!phi.is_negative() && phi <= Q::one());
        let j = RmowpJson::from_regular(&inst);
        prop_assert_eq!(j.regular().unwrap(), inst);
    }

    #[test]
    fn regret_policy_meets_its_guarantee(seed in any::<u64>()) {
        let inst = random_rmowp(&mut rng(seed), 2);
        let pol = regret_policy(&inst).unwrap();
        let r = adversary_search(&inst, &pol, &q(1, 4), Metric::Regret, SequenceFamily::Grid, 1_000_000).unwrap();
        prop_assert!(r.value <= Fin(regret_star(&inst).unwrap()));
    }

    #[test]
    fn ratio_feasibility_is_monotone(seed in any::<u64>(), a in 0i64..=16, b in 0i64..=16) {
        let inst = random_changing_cost(&mut rng(seed)).merged();
        let (lo, hi) = if a <= b { (q(a, 16), q(b, 16)) } else { (q(b, 16), q(a, 16)) };
        let at = |phi: &Q| check_glinear(&build_changing_cost_glinear(&inst, phi).unwrap()).unwrap();
        prop_assert!(!at(&hi) || at(&lo));
    }

    #[test]
    fn snapped_costs_obey_the_grid_bounds(seed in any::<u64>(), k in 1i64..=8) {
        let inst = random_changing_cost(&mut rng(seed));
        let delta = q(1, 5 * k);
        let rounded = ptas_round_costs(&inst, &delta).unwrap();
        let grid = cost_grid(&inst.gamma[0], &inst.gamma[inst.k - 1], &inst.p, &delta).unwrap();
        let one = Q::one() + &delta;
        for (g, h) in inst.gamma.iter().zip(&rounded.gamma) {
            prop_assert!(grid.contains(h));
            prop_assert!(h <= g && *g <= &one * h);
            prop_assert!(&inst.p - h <= &one * (&inst.p - g));
        }
        let j = ChangingCostJson::from_instance(&inst);
        prop_assert_eq!(j.instance().unwrap(), inst);
    }

    #[test]
    fn multiphase_json_round_trips(seed in any::<u64>()) {
        let inst = random_multiphase(&mut rng(seed));
        prop_assert_eq!(MultiPhaseJson::from_instance(&inst).instance().unwrap(), inst);
    }

    #[test]
    fn envelope_dominates_its_inputs(seed in any::<u64>(), x in small_q()) {
        let mut r = rng(seed);
        let fs = vec![random_pwl(&mut r, false, true), random_pwl(&mut r, false, false), random_pwl(&mut r, true, true)];
        let env = upper_envelope(&fs).unwrap();
        let want = fs.iter().map(|f| f.eval(&x)).fold(NegInf, |a, b| a.max(b));
        prop_assert_eq!(env.eval(&x), want);
    }

    #[test]
    fn simplest_rational_is_inside_and_minimal(a in -40i64..40, b in -40i64..40, d in 1i64..12) {
        let (lo, hi) = if a <= b { (q(a, d), q(b, d)) } else { (q(b, d), q(a, d)) };
        let s = simplest_between(&lo, &hi);
        prop_assert!(lo <= s && s <= hi);
        for den in (1i64..).take_while(|&k| num_bigint::BigInt::from(k) < *s.denom()) {
            let n = (&lo * qi(den)).ceil();
            prop_assert!(n / qi(den) > hi, "denominator {} fits", den);
        }
    }

    #[test]
    fn polygon_clip_and_intersect(
        pts in prop::collection::vec((small_q(), small_q()), 1..7),
        a in small_q(), b in small_q(), c in small_q(),
        probe in (small_q(), small_q()),
    ) {
        let poly = hull(pts);
        let clipped = poly.clip(&a, &b, &c);
        let inside = poly.contains(&probe) && !(&a * &probe.0 + &b * &probe.1 + &c).is_positive();
        prop_assert_eq!(clipped.contains(&probe), inside);
        let other = Polygon::square(&qi(-1), &qi(1));
        let both = poly.intersect(&other);
        prop_assert_eq!(both.contains(&probe), poly.contains(&probe) && other.contains(&probe));
        prop_assert_eq!(both, other.intersect(&poly));
    }

    #[test]
    fn sweep_contains_every_shift(pts in prop::collection::vec((small_q(), small_q()), 1..5), k in 0i64..=4) {
        let poly = hull(pts);
        let swept = poly.sweep(&(qi(1), qi(-1)), &qi(0), &qi(1));
        let t = q(k, 4);
        for v in poly.vertices() {
            prop_assert!(swept.contains(&(&v.0 + &t, &v.1 - &t)));
        }
        prop_assert!(Polygon::empty().sweep(&(qi(1), qi(0)), &qi(0), &qi(1)).is_empty());
    }
}
