//! One-to-one two-sided matching with strict, complete preferences.

use std::collections::VecDeque;

use itertools::Itertools;

use crate::{Error, Result};

/// `enumerate_stable` walks all `n!` bijections up to this size.
pub const MAX_ENUMERATION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    M,
    W,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingMarket {
    m_prefs: Vec<Vec<usize>>,
    w_prefs: Vec<Vec<usize>>,
    /// `m_rank[m][w]` is the position of `w` in `m`'s list (0 = favourite).
    m_rank: Vec<Vec<usize>>,
    w_rank: Vec<Vec<usize>>,
}

impl MatchingMarket {
    /// `m_prefs[m]` ranks side W from most to least preferred, and vice versa.
    pub fn new(m_prefs: Vec<Vec<usize>>, w_prefs: Vec<Vec<usize>>) -> Result<Self> {
        let n = m_prefs.len();
        if n == 0 {
            return Err(Error::domain("a market needs at least one agent per side"));
        }
        if w_prefs.len() != n {
            return Err(Error::domain(format!("side M has {n} agents, side W has {}", w_prefs.len())));
        }
        let m_rank = ranks(&m_prefs, "m")?;
        let w_rank = ranks(&w_prefs, "w")?;
        Ok(MatchingMarket { m_prefs, w_prefs, m_rank, w_rank })
    }

    pub fn size(&self) -> usize {
        self.m_prefs.len()
    }

    pub fn m_prefs(&self) -> &[Vec<usize>] {
        &self.m_prefs
    }

    pub fn w_prefs(&self) -> &[Vec<usize>] {
        &self.w_prefs
    }

    pub fn m_rank(&self, m: usize, w: usize) -> usize {
        self.m_rank[m][w]
    }

    pub fn w_rank(&self, w: usize, m: usize) -> usize {
        self.w_rank[w][m]
    }

    /// Same market with the sides exchanged.
    pub fn swapped(&self) -> Self {
        MatchingMarket {
            m_prefs: self.w_prefs.clone(),
            w_prefs: self.m_prefs.clone(),
            m_rank: self.w_rank.clone(),
            w_rank: self.m_rank.clone(),
        }
    }
}

fn ranks(prefs: &[Vec<usize>], side: &str) -> Result<Vec<Vec<usize>>> {
    let n = prefs.len();
    prefs
        .iter()
        .enumerate()
        .map(|(a, list)| {
            if list.len() != n {
                return Err(Error::domain(format!("{side}{a} ranks {} partners, expected {n}", list.len())));
            }
            let mut rank = vec![usize::MAX; n];
            for (pos, &b) in list.iter().enumerate() {
                if b >= n || rank[b] != usize::MAX {
                    return Err(Error::domain(format!("{side}{a}'s list is not a permutation of the other side")));
                }
                rank[b] = pos;
            }
            Ok(rank)
        })
        .collect()
}

/// Bijection `m -> w`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Matching {
    m_to_w: Vec<usize>,
}

impl Matching {
    pub fn new(m_to_w: Vec<usize>) -> Result<Self> {
        let n = m_to_w.len();
        let mut seen = vec![false; n];
        for &w in &m_to_w {
            if w >= n || seen[w] {
                return Err(Error::domain("matching is not a bijection"));
            }
            seen[w] = true;
        }
        Ok(Matching { m_to_w })
    }

    pub fn partner_of_m(&self, m: usize) -> usize {
        self.m_to_w[m]
    }

    pub fn w_to_m(&self) -> Vec<usize> {
        let mut inv = vec![0; self.m_to_w.len()];
        for (m, &w) in self.m_to_w.iter().enumerate() {
            inv[w] = m;
        }
        inv
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.m_to_w.iter().copied().enumerate().collect()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.m_to_w
    }
}

/// Proposer-optimal stable matching; free proposers are served in ascending index.
pub fn deferred_acceptance(market: &MatchingMarket, proposing: Side) -> Matching {
    let order: Vec<usize> = (0..market.size()).collect();
    deferred_acceptance_in_order(market, proposing, &order)
}

/// Deferred Acceptance with an explicit initial proposal queue. A rejected
/// proposer rejoins the back of the queue.
pub fn deferred_acceptance_in_order(market: &MatchingMarket, proposing: Side, order: &[usize]) -> Matching {
    match proposing {
        Side::M => Matching { m_to_w: propose(market, order) },
        Side::W => {
            let w_to_m = propose(&market.swapped(), order);
            let mut m_to_w = vec![0; w_to_m.len()];
            for (w, &m) in w_to_m.iter().enumerate() {
                m_to_w[m] = w;
            }
            Matching { m_to_w }
        }
    }
}

fn propose(market: &MatchingMarket, order: &[usize]) -> Vec<usize> {
    let n = market.size();
    let mut next_choice = vec![0usize; n];
    let mut held: Vec<Option<usize>> = vec![None; n];
    let mut queue: VecDeque<usize> = order.iter().copied().collect();
    while let Some(m) = queue.pop_front() {
        let w = market.m_prefs[m][next_choice[m]];
        next_choice[m] += 1;
        match held[w] {
            None => held[w] = Some(m),
            Some(cur) if market.w_rank[w][m] < market.w_rank[w][cur] => {
                held[w] = Some(m);
                queue.push_back(cur);
            }
            Some(_) => queue.push_back(m),
        }
    }
    let mut m_to_w = vec![0; n];
    for (w, m) in held.into_iter().enumerate() {
        m_to_w[m.expect("complete lists leave nobody unmatched")] = w;
    }
    m_to_w
}

/// Pairs `(m, w)` that strictly prefer each other to their partners, ordered by `m` then `w`.
pub fn blocking_pairs(market: &MatchingMarket, matching: &Matching) -> Result<Vec<(usize, usize)>> {
    let n = market.size();
    if matching.m_to_w.len() != n {
        return Err(Error::domain(format!("matching covers {} agents, market has {n}", matching.m_to_w.len())));
    }
    Matching::new(matching.m_to_w.clone())?;
    let w_to_m = matching.w_to_m();
    let mut out = Vec::new();
    for m in 0..n {
        let current = market.m_rank[m][matching.m_to_w[m]];
        for w in 0..n {
            if market.m_rank[m][w] < current && market.w_rank[w][m] < market.w_rank[w][w_to_m[w]] {
                out.push((m, w));
            }
        }
    }
    Ok(out)
}

/// Every stable matching, in lexicographic order of the `m -> w` vector.
pub fn enumerate_stable(market: &MatchingMarket) -> Result<Vec<Matching>> {
    let n = market.size();
    if n > MAX_ENUMERATION {
        return Err(Error::capacity(format!("stable-set enumeration limited to n <= {MAX_ENUMERATION}, got {n}")));
    }
    let mut out = Vec::new();
    for perm in (0..n).permutations(n) {
        let mu = Matching { m_to_w: perm };
        if blocking_pairs(market, &mu)?.is_empty() {
            out.push(mu);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cyclic() -> MatchingMarket {
        MatchingMarket::new(vec![vec![0, 1], vec![1, 0]], vec![vec![1, 0], vec![0, 1]]).unwrap()
    }

    #[test]
    fn invalid_markets() {
        assert!(MatchingMarket::new(vec![], vec![]).is_err());
        assert!(MatchingMarket::new(vec![vec![0, 0], vec![1, 0]], vec![vec![0, 1], vec![0, 1]]).is_err());
        assert!(MatchingMarket::new(vec![vec![0]], vec![vec![0], vec![0]]).is_err());
        assert!(Matching::new(vec![0, 0]).is_err());
    }

    #[test]
    fn identical_preferences_are_assortative() {
        let n = 4;
        let prefs: Vec<Vec<usize>> = (0..n).map(|_| (0..n).collect()).collect();
        let market = MatchingMarket::new(prefs.clone(), prefs).unwrap();
        for side in [Side::M, Side::W] {
            assert_eq!(deferred_acceptance(&market, side).as_slice(), &[0, 1, 2, 3]);
        }
    }

    #[test]
    fn cyclic_market_side_optimal() {
        let market = cyclic();
        assert_eq!(deferred_acceptance(&market, Side::M).as_slice(), &[0, 1]);
        assert_eq!(deferred_acceptance(&market, Side::W).as_slice(), &[1, 0]);
        let stable = enumerate_stable(&market).unwrap();
        assert_eq!(stable.len(), 2);
    }

    #[test]
    fn blocked_identity_matching() {
        // Side M's lists swapped relative to the cyclic market.
        let market = MatchingMarket::new(vec![vec![1, 0], vec![0, 1]], vec![vec![1, 0], vec![0, 1]]).unwrap();
        let identity = Matching::new(vec![0, 1]).unwrap();
        // Oracle: scan the definition directly.
        let mut expected = Vec::new();
        let inv = identity.w_to_m();
        for m in 0..2 {
            for w in 0..2 {
                let m_pos = |x: usize| market.m_prefs()[m].iter().position(|&y| y == x).unwrap();
                let w_pos = |x: usize| market.w_prefs()[w].iter().position(|&y| y == x).unwrap();
                if m_pos(w) < m_pos(identity.partner_of_m(m)) && w_pos(m) < w_pos(inv[w]) {
                    expected.push((m, w));
                }
            }
        }
        let found = blocking_pairs(&market, &identity).unwrap();
        assert_eq!(found, expected);
        assert_eq!(found, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn single_pair_market() {
        let market = MatchingMarket::new(vec![vec![0]], vec![vec![0]]).unwrap();
        let only = Matching::new(vec![0]).unwrap();
        assert!(blocking_pairs(&market, &only).unwrap().is_empty());
        assert_eq!(enumerate_stable(&market).unwrap(), vec![only]);
    }

    #[test]
    fn identical_three_has_one_stable_matching() {
        let prefs: Vec<Vec<usize>> = (0..3).map(|_| vec![0, 1, 2]).collect();
        let market = MatchingMarket::new(prefs.clone(), prefs).unwrap();
        assert_eq!(enumerate_stable(&market).unwrap().len(), 1);
    }

    #[test]
    fn mismatched_matching_size() {
        let market = cyclic();
        let m = Matching::new(vec![0, 1, 2]).unwrap();
        assert!(matches!(blocking_pairs(&market, &m), Err(Error::Domain(_))));
    }

    #[test]
    fn enumeration_capacity() {
        let prefs: Vec<Vec<usize>> = (0..9).map(|_| (0..9).collect()).collect();
        let market = MatchingMarket::new(prefs.clone(), prefs).unwrap();
        assert!(matches!(enumerate_stable(&market), Err(Error::Capacity(_))));
    }
}
