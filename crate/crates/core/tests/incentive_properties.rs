mod common;

use proptest::prelude::*;
use rand::Rng;
use stgames_core::game::{best_responses, is_nash, ActionProfile, StrategicGame};
use stgames_core::incentives::{
    apply_hierarchical, budget_check, design_incentive, flatten, is_pareto_improving, modified_payoff, BudgetSpec,
    GroupPartition, HierarchicalIncentive, Horizon, IncentiveDesign, IncentiveSchedule, PayoffRecord, Transfer,
};
use stgames_core::rng::{seeded, SimRng};

use common::random_game;

fn random_schedule(rng: &mut SimRng, g: &StrategicGame) -> IncentiveSchedule {
    IncentiveSchedule::from_fn(g, |_, _| rng.random_range(-3.0..3.0)).unwrap()
}

fn close_games(a: &StrategicGame, b: &StrategicGame, tol: f64) -> bool {
    a.signals().len() == b.signals().len()
        && a.num_profiles() == b.num_profiles()
        && (0..a.signals().len()).all(|s| {
            (0..a.num_profiles())
                .all(|p| a.payoffs_at(s, p).iter().zip(b.payoffs_at(s, p)).all(|(x, y)| (x - y).abs() <= tol))
        })
}

fn random_transfer(rng: &mut SimRng, profiles: usize) -> Transfer {
    if rng.random_bool(0.5) {
        Transfer::Constant(rng.random_range(-2.0..2.0))
    } else {
        Transfer::PerProfile((0..profiles).map(|_| rng.random_range(-2.0..2.0)).collect())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn negated_schedule_undoes_the_change(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let g = random_game(&mut rng, &[2, 3, 2], 2);
        let s = random_schedule(&mut rng, &g);
        let back = modified_payoff(&modified_payoff(&g, &s).unwrap(), &s.negated()).unwrap();
        prop_assert!(close_games(&g, &back, 1e-12));
        prop_assert!(s.negated().negated() == s);
    }

    #[test]
    fn constant_schedules_keep_best_responses(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let g = random_game(&mut rng, &[3, 3], 1);
        // Binary fractions keep the shifted comparisons exact.
        let shift: Vec<f64> = (0..2).map(|_| rng.random_range(-40..40) as f64 / 8.0).collect();
        let h = modified_payoff(&g, &IncentiveSchedule::constant(&g, &shift).unwrap()).unwrap();
        for idx in 0..g.num_profiles() {
            let x = g.profile_at(idx);
            for i in 0..2 {
                prop_assert_eq!(best_responses(&g, i, &x, 0).unwrap(), best_responses(&h, i, &x, 0).unwrap());
            }
        }
    }

    #[test]
    fn hierarchical_terms_flatten_to_sums(seed in any::<u64>(), split in 0usize..4) {
        let mut rng = seeded(seed);
        let g = random_game(&mut rng, &[2, 2, 3], 1);
        let blocks = match split {
            0 => vec![vec![0, 1, 2]],
            1 => vec![vec![0], vec![1, 2]],
            2 => vec![vec![1], vec![0, 2]],
            _ => vec![vec![0], vec![1], vec![2]],
        };
        let part = GroupPartition::new(3, blocks).unwrap();
        let p = g.num_profiles();
        let hier = HierarchicalIncentive {
            intra: (0..3).map(|_| random_transfer(&mut rng, p)).collect(),
            inter: (0..part.blocks().len()).map(|_| random_transfer(&mut rng, p)).collect(),
        };
        let flat = flatten(&g, &part, &hier).unwrap();
        let at = |t: &Transfer, k: usize| match t {
            Transfer::Constant(v) => *v,
            Transfer::PerProfile(v) => v[k],
        };
        for k in 0..p {
            for i in 0..3 {
                let expect = at(&hier.intra[i], k) + at(&hier.inter[part.group_of(i)], k);
                prop_assert_eq!(flat.get(k, i), expect);
            }
        }
        let direct = apply_hierarchical(&g, &part, &hier).unwrap();
        prop_assert!(close_games(&direct, &modified_payoff(&g, &flat).unwrap(), 0.0));
    }

    #[test]
    fn designs_pass_independent_checks(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let g = random_game(&mut rng, &[3, 2], 1);
        let target = g.profile_at(rng.random_range(0..g.num_profiles()));
        let baseline = PayoffRecord::stationary(&g, &g.profile_at(rng.random_range(0..g.num_profiles())), 0).unwrap();
        let spec = BudgetSpec::new(1e3, 0.9, Horizon::Infinite).unwrap();
        match design_incentive(&g, &target, &baseline, &spec, 0).unwrap() {
            IncentiveDesign::Designed { schedule, transfers, spent, .. } => {
                prop_assert!(transfers.iter().all(|&r| r >= 0.0));
                let m = modified_payoff(&g, &schedule).unwrap();
                prop_assert!(is_nash(&m, &target, 0, 1e-9).unwrap().is_nash);
                let induced = PayoffRecord::evaluate(&g, std::slice::from_ref(&target), 0, Some(&schedule)).unwrap();
                prop_assert!(is_pareto_improving(&baseline, &induced, 0.9).unwrap());
                let report = budget_check(&g, &schedule, std::slice::from_ref(&target), &spec).unwrap();
                prop_assert!(report.feasible);
                prop_assert!((report.spent - spent).abs() <= 1e-9);
            }
            IncentiveDesign::Infeasible => prop_assert!(false, "ample budget must be feasible"),
        }
    }
}

/// Cheapest grid transfer (step 1e-2) meeting the same conditions as the LP.
fn grid_spend(g: &StrategicGame, target: &ActionProfile, base: &[f64]) -> f64 {
    let idx = g.profile_index(&target.0);
    let own = g.payoffs_at(0, idx);
    let need: Vec<f64> =
        (0..2).map(|i| g.deviation_payoffs(i, &target.0, 0).into_iter().fold(f64::NEG_INFINITY, f64::max) - own[i]).collect();
    let mut best = f64::INFINITY;
    for a in 0..=600 {
        for b in 0..=600 {
            let rho = [a as f64 / 100.0, b as f64 / 100.0];
            let ok = (0..2).all(|i| rho[i] >= need[i] - 1e-12 && own[i] + rho[i] >= base[i] - 1e-12);
            let strict = (0..2).any(|i| own[i] + rho[i] > base[i] + 1e-12);
            if ok && strict {
                best = best.min(rho[0] + rho[1]);
            }
        }
    }
    best
}

#[test]
fn designs_are_minimal_against_a_grid() {
    let mut rng = seeded(23);
    for _ in 0..25 {
        let g = random_game(&mut rng, &[3, 3], 1);
        let target = g.profile_at(rng.random_range(0..9));
        let base_profile = g.profile_at(rng.random_range(0..9));
        let baseline = PayoffRecord::stationary(&g, &base_profile, 0).unwrap();
        let spec = BudgetSpec::new(1e6, 0.5, Horizon::Infinite).unwrap();
        let IncentiveDesign::Designed { per_period, .. } = design_incentive(&g, &target, &baseline, &spec, 0).unwrap()
        else {
            panic!("ample budget must be feasible");
        };
        let grid = grid_spend(&g, &target, &baseline.payoffs[0]);
        assert!(per_period <= grid + 1e-6, "lp {per_period} grid {grid}");
        assert!(per_period >= grid - 1e-2 - 1e-6, "lp {per_period} grid {grid}");
    }
}
