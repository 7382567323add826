//! Transferable-utility cooperative games.
//!
//! Coalitions are bitmasks with agent `i` at bit `i`; the value table is
//! indexed directly by the mask. All comparisons use the absolute tolerance
//! [`TOL`](crate::TOL).

use std::ops::Deref;

use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation};
use crate::{Error, Result, TOL};

pub type Coalition = u32;

pub const MAX_AGENTS: usize = 20;
pub const MAX_NUCLEOLUS_AGENTS: usize = 12;

pub fn coalition_of(members: &[usize]) -> Coalition {
    members.iter().fold(0, |m, &i| m | (1 << i))
}

pub fn members(mask: Coalition) -> Vec<usize> {
    (0..32).filter(|&i| mask >> i & 1 == 1).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionGame {
    n: usize,
    values: Vec<f64>,
}

impl CoalitionGame {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if !(2..=MAX_AGENTS).contains(&n) {
            return Err(Error::capacity(format!("coalition games need 2..={MAX_AGENTS} agents, got {n}")));
        }
        if values.len() != 1 << n {
            return Err(Error::dims(format!("value table has {} entries, expected {}", values.len(), 1usize << n)));
        }
        if values[0] != 0.0 {
            return Err(Error::domain("the empty coalition must have value 0"));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("coalition {k} has a non-finite value")));
        }
        Ok(CoalitionGame { n, values })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(Coalition) -> f64) -> Result<Self> {
        if !(2..=MAX_AGENTS).contains(&n) {
            return Err(Error::capacity(format!("coalition games need 2..={MAX_AGENTS} agents, got {n}")));
        }
        let values = (0..1u32 << n).map(|m| if m == 0 { 0.0 } else { f(m) }).collect();
        Self::new(n, values)
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    pub fn grand(&self) -> Coalition {
        ((1u64 << self.n) - 1) as Coalition
    }

    pub fn value(&self, s: Coalition) -> f64 {
        self.values[s as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Game with agents relabelled so that agent `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::dims("permutation length"));
        }
        let map = |m: Coalition| -> Coalition { members(m).into_iter().fold(0, |acc, i| acc | (1 << perm[i])) };
        let mut values = vec![0.0; self.values.len()];
        for m in 0..self.values.len() as Coalition {
            values[map(m) as usize] = self.values[m as usize];
        }
        Self::new(self.n, values)
    }

    fn coalition_sums(&self, r: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.values.len()];
        for m in 1..sums.len() {
            let low = m.trailing_zeros() as usize;
            sums[m] = sums[m & (m - 1)] + r[low];
        }
        sums
    }

    fn check_allocation(&self, r: &[f64]) -> Result<()> {
        if r.len() != self.n {
            return Err(Error::dims(format!("allocation has {} entries for {} agents", r.len(), self.n)));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("allocation has a non-finite entry"));
        }
        Ok(())
    }
}

/// Payoff vector over agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation(pub Vec<f64>);

impl Deref for Allocation {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Superadditivity with the first violating disjoint pair `(S, T)`, `S < T`.
pub fn is_superadditive(game: &CoalitionGame) -> (bool, Option<(Coalition, Coalition)>) {
    let full = game.grand();
    for s in 1..=full {
        let comp = full & !s;
        // Ascending submasks of the complement.
        let mut t: Coalition = 0;
        loop {
            t = ((t | !comp).wrapping_add(1)) & comp;
            if t == 0 {
                break;
            }
            if t > s && game.value(s | t) < game.value(s) + game.value(t) - TOL {
                return (false, Some((s, t)));
            }
        }
    }
    (true, None)
}

pub fn cooperative_surplus(game: &CoalitionGame) -> f64 {
    game.value(game.grand()) - (0..game.n).map(|i| game.value(1 << i)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoreCheck {
    InCore,
    /// Total allocated differs from the grand-coalition value.
    Inefficient { allocated: f64, value: f64 },
    /// First coalition (bitmask order) receiving less than its value.
    Blocked { coalition: Coalition, shortfall: f64 },
}

impl CoreCheck {
    pub fn in_core(&self) -> bool {
        matches!(self, CoreCheck::InCore)
    }
}

pub fn in_core(game: &CoalitionGame, r: &[f64]) -> Result<CoreCheck> {
    game.check_allocation(r)?;
    let sums = game.coalition_sums(r);
    let full = game.grand() as usize;
    if (sums[full] - game.value(game.grand())).abs() > TOL {
        return Ok(CoreCheck::Inefficient { allocated: sums[full], value: game.value(game.grand()) });
    }
    for m in 1..full {
        if sums[m] < game.values[m] - TOL {
            return Ok(CoreCheck::Blocked { coalition: m as Coalition, shortfall: game.values[m] - sums[m] });
        }
    }
    Ok(CoreCheck::InCore)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreVerdict {
    pub nonempty: bool,
    /// Optimum of `min sum r` subject to every coalition constraint.
    pub min_total: f64,
    /// Efficient core allocation when nonempty.
    pub certificate: Option<Allocation>,
}

/// Decides core nonemptiness through `min sum_i r_i` s.t. `r(S) >= v(S)` for
/// every nonempty coalition. The core is nonempty iff the optimum does not
/// exceed `v(N)`.
pub fn core_nonempty(game: &CoalitionGame) -> Result<CoreVerdict> {
    let n = game.n;
    let mut lp = LinearProgram::minimize(vec![1.0; n]);
    for i in 0..n {
        lp.set_free(i);
    }
    for m in 1..=game.grand() {
        lp.add_constraint(indicator(n, m), Relation::Ge, game.value(m));
    }
    let sol = solve_lp(&lp).map_err(as_capacity)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::capacity(format!("core LP ended with status {:?}", sol.status)));
    }
    let nonempty = sol.objective <= game.value(game.grand()) + TOL;
    // Spreading the leftover evenly keeps every coalition constraint and
    // restores efficiency.
    let gap = (game.value(game.grand()) - sol.objective) / n as f64;
    Ok(CoreVerdict {
        nonempty,
        min_total: sol.objective,
        certificate: nonempty.then(|| Allocation(sol.x.iter().map(|x| x + gap).collect())),
    })
}

fn indicator(n: usize, mask: Coalition) -> Vec<f64> {
    (0..n).map(|i| if mask >> i & 1 == 1 { 1.0 } else { 0.0 }).collect()
}

fn as_capacity(e: Error) -> Error {
    match e {
        Error::IterationLimit(m) => Error::Capacity(m),
        other => other,
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for k in 1..=n {
        f[k] = f[k - 1] * k as f64;
    }
    f
}

/// Exact Shapley value by subset enumeration.
///
/// Marginal contributions are first summed per coalition size and weighted by
/// the integer `|S|! (N-|S|-1)!` before a single division by `N!`.
pub fn shapley(game: &CoalitionGame) -> Result<Allocation> {
    let n = game.n;
    if n > MAX_AGENTS {
        return Err(Error::capacity(format!("Shapley value limited to {MAX_AGENTS} agents")));
    }
    let fact = factorials(n);
    let mut phi = vec![0.0; n];
    for (i, out) in phi.iter_mut().enumerate() {
        let bit = 1 << i;
        let mut by_size = vec![0.0; n];
        for s in 0..=game.grand() {
            if s & bit == 0 {
                by_size[s.count_ones() as usize] += game.value(s | bit) - game.value(s);
            }
        }
        let total: f64 = by_size.iter().enumerate().map(|(k, acc)| acc * fact[k] * fact[n - k - 1]).sum();
        *out = total / fact[n];
    }
    Ok(Allocation(phi))
}

pub fn excess(game: &CoalitionGame, s: Coalition, r: &[f64]) -> Result<f64> {
    game.check_allocation(r)?;
    if s == 0 {
        return Err(Error::domain("excess of the empty coalition is undefined"));
    }
    if s > game.grand() {
        return Err(Error::domain(format!("coalition {s:#b} contains unknown agents")));
    }
    Ok(game.value(s) - members(s).into_iter().map(|i| r[i]).sum::<f64>())
}

/// Nucleolus by successive linear programs.
///
/// Each stage minimises the largest excess `t` over the coalitions not yet
/// fixed, subject to efficiency and the excess levels fixed so far. Coalitions
/// with a strictly positive multiplier at the stage optimum are fixed at `t`
/// (falling back to every tight coalition if no multiplier is positive), and
/// coalitions whose incidence vector is spanned by the fixed ones drop out.
/// Stages repeat until the fixed coalitions determine the allocation.
pub fn nucleolus(game: &CoalitionGame) -> Result<Allocation> {
    let n = game.n;
    if n > MAX_NUCLEOLUS_AGENTS {
        return Err(Error::capacity(format!("nucleolus limited to {MAX_NUCLEOLUS_AGENTS} agents, got {n}")));
    }
    let full = game.grand();
    let mut span = Span::new(n);
    span.insert(&indicator(n, full));
    let mut free: Vec<Coalition> = (1..full).collect();
    let mut fixed: Vec<(Coalition, f64)> = Vec::new();

    loop {
        // Variables r_0..r_{n-1}, t.
        let mut obj = vec![0.0; n + 1];
        obj[n] = 1.0;
        let mut lp = LinearProgram::minimize(obj);
        for j in 0..=n {
            lp.set_free(j);
        }
        let mut eff = indicator(n, full);
        eff.push(0.0);
        lp.add_constraint(eff, Relation::Eq, game.value(full));
        for &(s, e) in &fixed {
            let mut row = indicator(n, s);
            row.push(0.0);
            lp.add_constraint(row, Relation::Eq, game.value(s) - e);
        }
        let offset = 1 + fixed.len();
        for &s in &free {
            let mut row = indicator(n, s);
            row.push(1.0);
            lp.add_constraint(row, Relation::Ge, game.value(s));
        }
        let sol = solve_lp(&lp).map_err(as_capacity)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::capacity(format!("nucleolus stage LP ended with status {:?}", sol.status)));
        }
        let r = &sol.x[..n];
        let t = sol.x[n];
        if free.is_empty() || span.rank == n {
            return Ok(Allocation(r.to_vec()));
        }

        let mut newly: Vec<Coalition> = free
            .iter()
            .enumerate()
            .filter(|&(k, _)| sol.duals[offset + k] > TOL)
            .map(|(_, &s)| s)
            .collect();
        if newly.is_empty() {
            newly = free
                .iter()
                .copied()
                .filter(|&s| {
                    let e = game.value(s) - members(s).into_iter().map(|i| r[i]).sum::<f64>();
                    (e - t).abs() <= TOL
                })
                .collect();
        }
        if newly.is_empty() {
            return Err(Error::Contract("nucleolus stage fixed no coalition".into()));
        }
        for &s in &newly {
            span.insert(&indicator(n, s));
            fixed.push((s, t));
        }
        free.retain(|s| !newly.contains(s) && !span.contains(&indicator(n, *s)));
        if span.rank == n || free.is_empty() {
            return Ok(Allocation(r.to_vec()));
        }
    }
}

/// Row-echelon basis used to track which incidence vectors are determined.
struct Span {
    rows: Vec<(usize, Vec<f64>)>,
    rank: usize,
}

impl Span {
    fn new(_n: usize) -> Self {
        Span { rows: Vec::new(), rank: 0 }
    }

    fn reduce(&self, v: &[f64]) -> Vec<f64> {
        let mut v = v.to_vec();
        for (pivot, row) in &self.rows {
            let f = v[*pivot];
            if f.abs() > TOL {
                for (x, &y) in v.iter_mut().zip(row) {
                    *x -= f * y;
                }
            }
        }
        v
    }

    fn contains(&self, v: &[f64]) -> bool {
        self.reduce(v).iter().all(|x| x.abs() <= 1e-7)
    }

    fn insert(&mut self, v: &[f64]) {
        let mut r = self.reduce(v);
        let Some(pivot) = (0..r.len()).max_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs())) else { return };
        if r[pivot].abs() <= 1e-7 {
            return;
        }
        let p = r[pivot];
        for x in r.iter_mut() {
            *x /= p;
        }
        // Keep the basis fully reduced so that `reduce` is a single pass.
        for (_, row) in self.rows.iter_mut() {
            let f = row[pivot];
            if f != 0.0 {
                for (x, &y) in row.iter_mut().zip(&r) {
                    *x -= f * y;
                }
            }
        }
        self.rows.push((pivot, r));
        self.rank += 1;
    }
}

/// Supermodularity check with the first violating pair `(S, T)`, `S < T`, in
/// bitmask order. Games above 12 agents use the equivalent local test on
/// `(S+i, S+j)` pairs, which avoids the quadratic pair scan.
pub fn is_convex(game: &CoalitionGame) -> (bool, Option<(Coalition, Coalition)>) {
    let full = game.grand();
    let violated =
        |s: Coalition, t: Coalition| game.value(s) + game.value(t) > game.value(s | t) + game.value(s & t) + TOL;
    if game.n <= 12 {
        for s in 1..=full {
            for t in (s + 1)..=full {
                if s & t != s && violated(s, t) {
                    return (false, Some((s, t)));
                }
            }
        }
        return (true, None);
    }
    for s in 0..=full {
        for i in 0..game.n {
            for j in (i + 1)..game.n {
                let (bi, bj) = (1 << i, 1 << j);
                if s & (bi | bj) == 0 && violated(s | bi, s | bj) {
                    return (false, Some((s | bi, s | bj)));
                }
            }
        }
    }
    (true, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templates;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn additive(n: usize) -> CoalitionGame {
        CoalitionGame::from_fn(n, |m| m.count_ones() as f64).unwrap()
    }

    #[test]
    fn construction_errors() {
        assert!(CoalitionGame::new(1, vec![0.0, 1.0]).is_err());
        assert!(CoalitionGame::new(2, vec![0.0; 3]).is_err());
        assert!(CoalitionGame::new(2, vec![1.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn superadditivity_examples() {
        assert_eq!(is_superadditive(&templates::pairwise_synergy_game()), (true, None));
        assert_eq!(is_superadditive(&additive(4)), (true, None));
        let g = CoalitionGame::new(2, vec![0.0, 0.0, 0.0, -1.0]).unwrap();
        assert_eq!(is_superadditive(&g), (false, Some((0b01, 0b10))));
    }

    #[test]
    fn surplus_examples() {
        assert_eq!(cooperative_surplus(&templates::pairwise_synergy_game()), 1.0);
        assert_eq!(cooperative_surplus(&additive(3)), 0.0);
        let g = CoalitionGame::from_fn(3, |m| if m == 7 { 5.0 } else { m.count_ones() as f64 }).unwrap();
        assert_eq!(cooperative_surplus(&g), 2.0);
    }

    #[test]
    fn core_membership_examples() {
        let g = templates::pairwise_synergy_game();
        let third = 1.0 / 3.0;
        assert_eq!(in_core(&g, &[third, third, third]).unwrap(), CoreCheck::InCore);
        match in_core(&g, &[0.6, 0.4, 0.0]).unwrap() {
            CoreCheck::Blocked { coalition, shortfall } => {
                assert_eq!(coalition, coalition_of(&[1, 2]));
                assert!((shortfall - 0.1).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(in_core(&g, &[0.5, 0.5, 0.5]).unwrap(), CoreCheck::Inefficient { .. }));
        assert!(in_core(&g, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn core_lp_examples() {
        let v = core_nonempty(&templates::pairwise_synergy_game()).unwrap();
        assert!(v.nonempty);
        let cert = v.certificate.unwrap();
        assert!(in_core(&templates::pairwise_synergy_game(), &cert).unwrap().in_core());

        let maj = core_nonempty(&templates::majority_game()).unwrap();
        assert!(!maj.nonempty);
        assert!((maj.min_total - 1.5).abs() < 1e-9);
        assert!(maj.certificate.is_none());

        let add = core_nonempty(&additive(4)).unwrap();
        assert!(close(&add.certificate.unwrap(), &[1.0; 4], 1e-9));
    }

    #[test]
    fn shapley_examples() {
        let third = 1.0 / 3.0;
        assert_eq!(shapley(&templates::pairwise_synergy_game()).unwrap().0, vec![third; 3]);
        let dummy = CoalitionGame::from_fn(3, |m| if m & 1 == 1 { 1.0 } else { 0.0 }).unwrap();
        assert!(close(&shapley(&dummy).unwrap(), &[1.0, 0.0, 0.0], 1e-12));
    }

    #[test]
    fn excess_examples() {
        let g = templates::pairwise_synergy_game();
        let third = 1.0 / 3.0;
        let e = excess(&g, coalition_of(&[0, 1]), &[third; 3]).unwrap();
        assert!((e - (0.5 - 2.0 / 3.0)).abs() < 1e-12);
        assert!(excess(&g, g.grand(), &[third; 3]).unwrap().abs() < 1e-12);
        assert!(matches!(excess(&g, 0, &[third; 3]), Err(Error::Domain(_))));
    }

    #[test]
    fn nucleolus_examples() {
        let third = 1.0 / 3.0;
        assert!(close(&nucleolus(&templates::pairwise_synergy_game()).unwrap(), &[third; 3], 1e-9));
        let two = CoalitionGame::new(2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(close(&nucleolus(&two).unwrap(), &[0.5, 0.5], 1e-9));
        // Two-agent nucleolus splits the surplus equally on top of stand-alone values.
        let two = CoalitionGame::new(2, vec![0.0, 0.2, 0.4, 1.0]).unwrap();
        assert!(close(&nucleolus(&two).unwrap(), &[0.4, 0.6], 1e-9));
    }

    #[test]
    fn nucleolus_capacity() {
        let g = CoalitionGame::from_fn(13, |m| m.count_ones() as f64).unwrap();
        assert!(matches!(nucleolus(&g), Err(Error::Capacity(_))));
    }

    #[test]
    fn nucleolus_at_twelve_agents() {
        // Symmetric convex game: the nucleolus is the equal split.
        let g = CoalitionGame::from_fn(12, |m| (m.count_ones() as f64).powi(2)).unwrap();
        let nu = nucleolus(&g).unwrap();
        assert!(close(&nu, &[12.0; 12], 1e-6), "{:?}", nu.0);
    }

    #[test]
    fn convexity_examples() {
        assert_eq!(is_convex(&templates::pairwise_synergy_game()), (true, None));
        assert_eq!(is_convex(&additive(4)), (true, None));
        let maj = templates::majority_game();
        let (ok, witness) = is_convex(&maj);
        assert!(!ok);
        let (s, t) = witness.unwrap();
        assert!(maj.value(s) + maj.value(t) > maj.value(s | t) + maj.value(s & t));
        // The pair S={1,2}, T={2,3} (1-based) is also a violation: 2 > 1 + 0.
        let (s, t) = (coalition_of(&[0, 1]), coalition_of(&[1, 2]));
        assert_eq!(maj.value(s) + maj.value(t), 2.0);
        assert_eq!(maj.value(s | t) + maj.value(s & t), 1.0);
    }

    #[test]
    fn permutation_relabels_values() {
        let g = CoalitionGame::from_fn(3, |m| m as f64).unwrap();
        let p = g.permuted(&[1, 2, 0]).unwrap();
        assert_eq!(p.value(coalition_of(&[1])), g.value(coalition_of(&[0])));
        assert_eq!(p.value(coalition_of(&[0, 2])), g.value(coalition_of(&[1, 2])));
    }
}
