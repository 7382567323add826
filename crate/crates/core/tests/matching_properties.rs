mod common;

use proptest::prelude::*;
use stgames_core::matching::{
    blocking_pairs, deferred_acceptance, deferred_acceptance_in_order, enumerate_stable, Side,
};
use stgames_core::rng::seeded;

use common::random_market;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn both_sides_yield_stable_matchings(seed in any::<u64>(), n in 1usize..=8) {
        let market = random_market(&mut seeded(seed), n);
        for side in [Side::M, Side::W] {
            let mu = deferred_acceptance(&market, side);
            prop_assert!(blocking_pairs(&market, &mu).unwrap().is_empty());
        }
    }

    #[test]
    fn proposal_order_does_not_matter(seed in any::<u64>(), n in 1usize..=7) {
        let market = random_market(&mut seeded(seed), n);
        let reversed: Vec<usize> = (0..n).rev().collect();
        for side in [Side::M, Side::W] {
            prop_assert_eq!(
                deferred_acceptance(&market, side),
                deferred_acceptance_in_order(&market, side, &reversed)
            );
        }
    }

    #[test]
    fn proposers_get_their_best_and_receivers_their_worst(seed in any::<u64>(), n in 1usize..=6) {
        let market = random_market(&mut seeded(seed), n);
        let m_opt = deferred_acceptance(&market, Side::M);
        let w_opt = deferred_acceptance(&market, Side::W);
        let stable = enumerate_stable(&market).unwrap();
        prop_assert!(stable.contains(&m_opt) && stable.contains(&w_opt));
        let m_inv = m_opt.w_to_m();
        for mu in &stable {
            let inv = mu.w_to_m();
            for m in 0..n {
                prop_assert!(market.m_rank(m, m_opt.partner_of_m(m)) <= market.m_rank(m, mu.partner_of_m(m)));
                prop_assert!(market.m_rank(m, w_opt.partner_of_m(m)) >= market.m_rank(m, mu.partner_of_m(m)));
            }
            for w in 0..n {
                prop_assert!(market.w_rank(w, m_inv[w]) >= market.w_rank(w, inv[w]));
            }
        }
    }
}
