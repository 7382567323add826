mod common;

use proptest::prelude::*;
use stgames_core::game::{
    best_responses, enumerate_pure_nash, is_nash, mixed_nash_gap, welfare_and_poa, ActionProfile, MixedProfile,
};
use stgames_core::rng::seeded;

use common::random_game;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn enumeration_matches_brute_force(seed in any::<u64>(), counts in prop::collection::vec(1usize..=3, 1..=3)) {
        let g = random_game(&mut seeded(seed), &counts, 1);
        let found = enumerate_pure_nash(&g, 0).unwrap();
        let mut oracle = Vec::new();
        for idx in 0..g.num_profiles() {
            let x = g.profile_at(idx);
            let stable = (0..g.num_agents()).all(|i| {
                (0..g.num_actions(i)).all(|a| {
                    g.payoff(&x.with_action(i, a), 0).unwrap()[i] <= g.payoff(&x, 0).unwrap()[i]
                })
            });
            if stable {
                oracle.push(x);
            }
        }
        prop_assert_eq!(&found, &oracle);
        for idx in 0..g.num_profiles() {
            let x = g.profile_at(idx);
            prop_assert_eq!(is_nash(&g, &x, 0, 0.0).unwrap().is_nash, oracle.contains(&x));
        }
    }

    #[test]
    fn equilibrium_iff_everyone_best_responds(seed in any::<u64>(), counts in prop::collection::vec(1usize..=3, 2..=3)) {
        let g = random_game(&mut seeded(seed), &counts, 1);
        for idx in 0..g.num_profiles() {
            let x = g.profile_at(idx);
            let all_br = (0..g.num_agents()).all(|i| best_responses(&g, i, &x, 0).unwrap().contains(&x.0[i]));
            let check = is_nash(&g, &x, 0, 0.0).unwrap();
            prop_assert_eq!(all_br, check.is_nash);
            if let Some(w) = check.witness {
                let gain = g.payoff(&x.with_action(w.agent, w.action), 0).unwrap()[w.agent] - g.payoff(&x, 0).unwrap()[w.agent];
                prop_assert!((gain - check.max_gain).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn positive_affine_maps_keep_equilibria(seed in any::<u64>(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let g = random_game(&mut seeded(seed), &[3, 2, 2], 1);
        // Powers of two keep the transformed comparisons exact.
        let scale = scale.log2().round().exp2();
        let h = g.map_payoffs(|_, _, i, v| if i == 0 { v * scale + shift.round() } else { v });
        prop_assert_eq!(enumerate_pure_nash(&g, 0).unwrap(), enumerate_pure_nash(&h, 0).unwrap());
    }

    #[test]
    fn pure_equilibria_have_zero_mixed_gap(seed in any::<u64>()) {
        let g = random_game(&mut seeded(seed), &[2, 3], 1);
        for x in enumerate_pure_nash(&g, 0).unwrap() {
            prop_assert_eq!(mixed_nash_gap(&g, &MixedProfile::pure(&g, &x), 0).unwrap(), 0.0);
        }
        let report = welfare_and_poa(&g, 0).unwrap();
        if let Some((_, w)) = report.worst_equilibrium {
            prop_assert!(w <= report.optimal_welfare);
        }
    }
}

#[test]
fn profile_labels_round_trip() {
    let g = random_game(&mut seeded(1), &[2, 3], 2);
    for idx in 0..g.num_profiles() {
        let x = g.profile_at(idx);
        let labels = g.profile_labels(&x);
        assert_eq!(ActionProfile::from_labels(&g, &labels).unwrap(), x);
        assert_eq!(g.profile_index(&x.0), idx);
    }
}
