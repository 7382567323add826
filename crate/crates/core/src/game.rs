//! Finite strategic-form games.
//!
//! Payoffs are maximised. Joint profiles are indexed in mixed radix with agent 0
//! as the most significant digit, so iterating `0..num_profiles()` walks the grid
//! in lexicographic order of action indices. A game may carry several payoff
//! tables, one per coordination signal; a game without signals has the single
//! signal [`NO_SIGNAL`].

use crate::{Error, Result};

pub const NO_SIGNAL: &str = "none";
/// Largest joint-action grid any enumeration will walk.
pub const MAX_PROFILES: usize = 1_000_000;

/// One action index per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionProfile(pub Vec<usize>);

impl ActionProfile {
    pub fn new(actions: Vec<usize>) -> Self {
        ActionProfile(actions)
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    /// Resolves action labels against `game`.
    pub fn from_labels<S: AsRef<str>>(game: &StrategicGame, labels: &[S]) -> Result<Self> {
        if labels.len() != game.num_agents() {
            return Err(Error::domain(format!(
                "profile has {} entries for {} agents",
                labels.len(),
                game.num_agents()
            )));
        }
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| game.action_index(i, l.as_ref()))
            .collect::<Result<Vec<_>>>()
            .map(ActionProfile)
    }

    pub fn with_action(&self, agent: usize, action: usize) -> Self {
        let mut v = self.0.clone();
        v[agent] = action;
        ActionProfile(v)
    }
}

/// One probability vector per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedProfile(pub Vec<Vec<f64>>);

impl MixedProfile {
    pub fn new(game: &StrategicGame, probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.len() != game.num_agents() {
            return Err(Error::dims("mixed profile agent count"));
        }
        for (i, p) in probs.iter().enumerate() {
            if p.len() != game.num_actions(i) {
                return Err(Error::dims(format!("mixed strategy of agent {i} has wrong length")));
            }
            if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::domain(format!("mixed strategy of agent {i} has a negative entry")));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::domain(format!("mixed strategy of agent {i} sums to {s}")));
            }
        }
        Ok(MixedProfile(probs))
    }

    pub fn uniform(game: &StrategicGame) -> Self {
        MixedProfile(
            (0..game.num_agents())
                .map(|i| vec![1.0 / game.num_actions(i) as f64; game.num_actions(i)])
                .collect(),
        )
    }

    pub fn pure(game: &StrategicGame, profile: &ActionProfile) -> Self {
        MixedProfile(
            (0..game.num_agents())
                .map(|i| {
                    let mut v = vec![0.0; game.num_actions(i)];
                    v[profile.0[i]] = 1.0;
                    v
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategicGame {
    actions: Vec<Vec<String>>,
    signals: Vec<String>,
    /// `tables[signal][profile * n + agent]`.
    tables: Vec<Vec<f64>>,
    radix: Vec<usize>,
}

impl StrategicGame {
    /// Builds a game from per-signal tables of per-agent payoff rows, listed in
    /// lexicographic profile order.
    pub fn new(actions: Vec<Vec<String>>, signals: Vec<String>, tables: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n = actions.len();
        if n == 0 {
            return Err(Error::domain("a game needs at least one agent"));
        }
        for (i, a) in actions.iter().enumerate() {
            if a.is_empty() {
                return Err(Error::domain(format!("agent {i} has no actions")));
            }
            for (k, label) in a.iter().enumerate() {
                if a[..k].contains(label) {
                    return Err(Error::domain(format!("agent {i} has duplicate action {label:?}")));
                }
            }
        }
        if signals.is_empty() {
            return Err(Error::domain("signal set must be nonempty"));
        }
        for (k, s) in signals.iter().enumerate() {
            if signals[..k].contains(s) {
                return Err(Error::domain(format!("duplicate signal {s:?}")));
            }
        }
        if tables.len() != signals.len() {
            return Err(Error::dims(format!("{} tables for {} signals", tables.len(), signals.len())));
        }
        let mut grid = 1usize;
        for a in &actions {
            grid = grid
                .checked_mul(a.len())
                .filter(|&g| g <= MAX_PROFILES)
                .ok_or_else(|| Error::capacity(format!("joint-action grid exceeds {MAX_PROFILES} profiles")))?;
        }
        let mut flat = Vec::with_capacity(tables.len());
        for (s, table) in tables.into_iter().enumerate() {
            if table.len() != grid {
                return Err(Error::dims(format!(
                    "table for signal {:?} has {} rows, grid has {grid} profiles",
                    signals[s],
                    table.len()
                )));
            }
            let mut row = Vec::with_capacity(grid * n);
            for (p, payoffs) in table.into_iter().enumerate() {
                if payoffs.len() != n {
                    return Err(Error::dims(format!("profile {p} lists {} payoffs for {n} agents", payoffs.len())));
                }
                if payoffs.iter().any(|v| !v.is_finite()) {
                    return Err(Error::domain(format!("profile {p} has a non-finite payoff")));
                }
                row.extend(payoffs);
            }
            flat.push(row);
        }
        let radix = actions.iter().map(Vec::len).collect();
        Ok(StrategicGame { actions, signals, tables: flat, radix })
    }

    /// Single-signal game.
    pub fn simple(actions: Vec<Vec<String>>, table: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(actions, vec![NO_SIGNAL.to_string()], vec![table])
    }

    /// Builds tables by evaluating `f(signal, profile)` over the whole grid.
    pub fn from_fn<F>(actions: Vec<Vec<String>>, signals: Vec<String>, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, &[usize]) -> Vec<f64>,
    {
        let radix: Vec<usize> = actions.iter().map(Vec::len).collect();
        let grid = radix.iter().try_fold(1usize, |g, &r| g.checked_mul(r).filter(|&g| g <= MAX_PROFILES));
        let grid = grid.ok_or_else(|| Error::capacity(format!("joint-action grid exceeds {MAX_PROFILES} profiles")))?;
        let tables = (0..signals.len())
            .map(|s| (0..grid).map(|p| f(s, &decode(&radix, p))).collect())
            .collect();
        Self::new(actions, signals, tables)
    }

    pub fn num_agents(&self) -> usize {
        self.actions.len()
    }

    pub fn num_actions(&self, agent: usize) -> usize {
        self.actions[agent].len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.radix
    }

    pub fn action_labels(&self, agent: usize) -> &[String] {
        &self.actions[agent]
    }

    pub fn signals(&self) -> &[String] {
        &self.signals
    }

    pub fn num_profiles(&self) -> usize {
        self.radix.iter().product()
    }

    pub fn action_index(&self, agent: usize, label: &str) -> Result<usize> {
        self.actions
            .get(agent)
            .ok_or_else(|| Error::domain(format!("agent {agent} out of range")))?
            .iter()
            .position(|a| a == label)
            .ok_or_else(|| Error::domain(format!("unknown action {label:?} for agent {agent}")))
    }

    pub fn signal_index(&self, label: &str) -> Result<usize> {
        self.signals
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| Error::domain(format!("unknown signal {label:?}")))
    }

    pub fn check_signal(&self, signal: usize) -> Result<()> {
        if signal < self.signals.len() {
            Ok(())
        } else {
            Err(Error::domain(format!("signal index {signal} out of range")))
        }
    }

    pub fn check_profile(&self, profile: &ActionProfile) -> Result<()> {
        if profile.0.len() != self.num_agents() {
            return Err(Error::domain(format!(
                "profile has {} entries for {} agents",
                profile.0.len(),
                self.num_agents()
            )));
        }
        for (i, &a) in profile.0.iter().enumerate() {
            if a >= self.radix[i] {
                return Err(Error::domain(format!("action {a} out of range for agent {i}")));
            }
        }
        Ok(())
    }

    pub fn profile_index(&self, actions: &[usize]) -> usize {
        actions.iter().zip(&self.radix).fold(0, |acc, (&a, &r)| acc * r + a)
    }

    pub fn profile_at(&self, index: usize) -> ActionProfile {
        ActionProfile(decode(&self.radix, index))
    }

    pub fn profile_labels(&self, profile: &ActionProfile) -> Vec<String> {
        profile.0.iter().enumerate().map(|(i, &a)| self.actions[i][a].clone()).collect()
    }

    /// Unchecked payoff of `agent` at a profile index.
    #[inline]
    pub fn payoff_at(&self, signal: usize, profile_index: usize, agent: usize) -> f64 {
        self.tables[signal][profile_index * self.num_agents() + agent]
    }

    /// All agents' payoffs at a profile index.
    pub fn payoffs_at(&self, signal: usize, profile_index: usize) -> &[f64] {
        let n = self.num_agents();
        &self.tables[signal][profile_index * n..(profile_index + 1) * n]
    }

    /// Payoff vector `(J_1, ..., J_N)` at a profile under a signal.
    pub fn payoff(&self, profile: &ActionProfile, signal: usize) -> Result<Vec<f64>> {
        self.check_profile(profile)?;
        self.check_signal(signal)?;
        Ok(self.payoffs_at(signal, self.profile_index(&profile.0)).to_vec())
    }

    /// Sum of payoffs at a profile.
    pub fn welfare_at(&self, signal: usize, profile_index: usize) -> f64 {
        self.payoffs_at(signal, profile_index).iter().sum()
    }

    /// Payoff of `agent` for each of its actions, opponents fixed at `profile`.
    pub fn deviation_payoffs(&self, agent: usize, profile: &[usize], signal: usize) -> Vec<f64> {
        let mut p = profile.to_vec();
        (0..self.radix[agent])
            .map(|a| {
                p[agent] = a;
                self.payoff_at(signal, self.profile_index(&p), agent)
            })
            .collect()
    }

    /// Expected payoff of each of `agent`'s actions when opponents play `mixed`.
    pub fn expected_deviation_payoffs(&self, agent: usize, mixed: &[Vec<f64>], signal: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.radix[agent]];
        for idx in 0..self.num_profiles() {
            let prof = decode(&self.radix, idx);
            let w: f64 = (0..self.num_agents()).filter(|&j| j != agent).map(|j| mixed[j][prof[j]]).product();
            if w != 0.0 {
                out[prof[agent]] += w * self.payoff_at(signal, idx, agent);
            }
        }
        out
    }

    /// Expected payoff of every agent under a product distribution.
    pub fn expected_payoffs(&self, mixed: &[Vec<f64>], signal: usize) -> Vec<f64> {
        let n = self.num_agents();
        let mut out = vec![0.0; n];
        for idx in 0..self.num_profiles() {
            let prof = decode(&self.radix, idx);
            let w: f64 = (0..n).map(|j| mixed[j][prof[j]]).product();
            if w != 0.0 {
                for (i, o) in out.iter_mut().enumerate() {
                    *o += w * self.payoff_at(signal, idx, i);
                }
            }
        }
        out
    }

    /// Returns a copy with `f(signal, profile_index, agent, payoff)` applied to every entry.
    pub fn map_payoffs<F>(&self, mut f: F) -> StrategicGame
    where
        F: FnMut(usize, usize, usize, f64) -> f64,
    {
        let n = self.num_agents();
        let tables = self
            .tables
            .iter()
            .enumerate()
            .map(|(s, t)| t.iter().enumerate().map(|(k, &v)| f(s, k / n, k % n, v)).collect())
            .collect();
        StrategicGame { tables, ..self.clone() }
    }

    /// Single-signal game holding the table of `signal`.
    pub fn at_signal(&self, signal: usize) -> Result<StrategicGame> {
        self.check_signal(signal)?;
        Ok(StrategicGame {
            actions: self.actions.clone(),
            signals: vec![self.signals[signal].clone()],
            tables: vec![self.tables[signal].clone()],
            radix: self.radix.clone(),
        })
    }
}

pub(crate) fn decode(radix: &[usize], mut index: usize) -> Vec<usize> {
    let mut out = vec![0; radix.len()];
    for (slot, &r) in out.iter_mut().zip(radix).rev() {
        *slot = index % r;
        index /= r;
    }
    out
}

/// Actions maximising `agent`'s payoff against the other entries of `profile`.
/// Ties are compared exactly and all returned in index order.
pub fn best_responses(game: &StrategicGame, agent: usize, profile: &ActionProfile, signal: usize) -> Result<Vec<usize>> {
    if agent >= game.num_agents() {
        return Err(Error::domain(format!("agent {agent} out of range")));
    }
    game.check_profile(profile)?;
    game.check_signal(signal)?;
    Ok(argmax_all(&game.deviation_payoffs(agent, &profile.0, signal)))
}

pub(crate) fn argmax_all(values: &[f64]) -> Vec<usize> {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..values.len()).filter(|&k| values[k] == best).collect()
}

/// Smallest-index argmax.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Deviation {
    pub agent: usize,
    pub action: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashCheck {
    pub is_nash: bool,
    /// Largest unilateral gain over all agents and actions (never negative).
    pub max_gain: f64,
    /// Deviation attaining `max_gain`; present iff `is_nash` is false.
    pub witness: Option<Deviation>,
}

pub fn is_nash(game: &StrategicGame, profile: &ActionProfile, signal: usize, eps: f64) -> Result<NashCheck> {
    if !(eps >= 0.0) {
        return Err(Error::domain(format!("eps must be nonnegative, got {eps}")));
    }
    game.check_profile(profile)?;
    game.check_signal(signal)?;
    let base = game.profile_index(&profile.0);
    let mut max_gain = 0.0;
    let mut arg = None;
    for agent in 0..game.num_agents() {
        let current = game.payoff_at(signal, base, agent);
        for (action, v) in game.deviation_payoffs(agent, &profile.0, signal).into_iter().enumerate() {
            let gain = v - current;
            if gain > max_gain {
                max_gain = gain;
                arg = Some(Deviation { agent, action });
            }
        }
    }
    let ok = max_gain <= eps;
    Ok(NashCheck { is_nash: ok, max_gain, witness: if ok { None } else { arg } })
}

/// All pure Nash equilibria in lexicographic profile order.
pub fn enumerate_pure_nash(game: &StrategicGame, signal: usize) -> Result<Vec<ActionProfile>> {
    game.check_signal(signal)?;
    let n = game.num_agents();
    let mut out = Vec::new();
    'profiles: for idx in 0..game.num_profiles() {
        let prof = decode(game.action_counts(), idx);
        for agent in 0..n {
            let current = game.payoff_at(signal, idx, agent);
            let devs = game.deviation_payoffs(agent, &prof, signal);
            if devs.iter().any(|&v| v > current) {
                continue 'profiles;
            }
        }
        out.push(ActionProfile(prof));
    }
    Ok(out)
}

/// Largest gain any agent can obtain by a pure deviation from a mixed profile.
pub fn mixed_nash_gap(game: &StrategicGame, mixed: &MixedProfile, signal: usize) -> Result<f64> {
    game.check_signal(signal)?;
    let current = game.expected_payoffs(&mixed.0, signal);
    let mut gap: f64 = 0.0;
    for agent in 0..game.num_agents() {
        let devs = game.expected_deviation_payoffs(agent, &mixed.0, signal);
        let best = devs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        gap = gap.max(best - current[agent]);
    }
    Ok(gap)
}

/// Welfare summary. Payoffs are maximised, welfare is their sum, and the
/// ratio is `optimal / worst equilibrium` when both are strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct WelfareReport {
    pub optimal_welfare: f64,
    pub optimal_profile: ActionProfile,
    pub worst_equilibrium: Option<(ActionProfile, f64)>,
    pub ratio: PoaRatio,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoaRatio {
    Defined(f64),
    /// Equilibria exist but the welfare values are not both positive.
    NonPositiveWelfare,
    /// No pure equilibrium exists.
    NoPureEquilibrium,
}

impl PoaRatio {
    pub fn value(&self) -> Option<f64> {
        match self {
            PoaRatio::Defined(v) => Some(*v),
            _ => None,
        }
    }
}

pub fn welfare_and_poa(game: &StrategicGame, signal: usize) -> Result<WelfareReport> {
    game.check_signal(signal)?;
    let mut best = (0usize, f64::NEG_INFINITY);
    for idx in 0..game.num_profiles() {
        let w = game.welfare_at(signal, idx);
        if w > best.1 {
            best = (idx, w);
        }
    }
    let eqs = enumerate_pure_nash(game, signal)?;
    let worst = eqs
        .into_iter()
        .map(|p| {
            let w = game.welfare_at(signal, game.profile_index(&p.0));
            (p, w)
        })
        .fold(None::<(ActionProfile, f64)>, |acc, (p, w)| match acc {
            Some((_, bw)) if bw <= w => acc,
            _ => Some((p, w)),
        });
    let ratio = match &worst {
        None => PoaRatio::NoPureEquilibrium,
        Some((_, w)) if *w > 0.0 && best.1 > 0.0 => PoaRatio::Defined(best.1 / w),
        Some(_) => PoaRatio::NonPositiveWelfare,
    };
    Ok(WelfareReport {
        optimal_welfare: best.1,
        optimal_profile: game.profile_at(best.0),
        worst_equilibrium: worst,
        ratio,
    })
}
