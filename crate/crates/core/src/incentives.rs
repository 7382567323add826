//! Incentive terms added to payoffs, Pareto and budget checks, and
//! minimum-spend synthesis of transfers that make a target profile stable.
//!
//! Sign convention: a positive entry is a transfer to the agent.

use crate::game::{ActionProfile, StrategicGame};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation};
use crate::{Error, Result, TOL};

/// Stationary schedule `rho[profile][agent]`, shared by every signal.
#[derive(Debug, Clone, PartialEq)]
pub struct IncentiveSchedule {
    agents: usize,
    values: Vec<f64>,
}

impl IncentiveSchedule {
    pub fn zeros(game: &StrategicGame) -> Self {
        IncentiveSchedule { agents: game.num_agents(), values: vec![0.0; game.num_profiles() * game.num_agents()] }
    }

    /// `rows[profile]` lists one transfer per agent, profiles in lexicographic order.
    pub fn from_rows(game: &StrategicGame, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = game.num_agents();
        if rows.len() != game.num_profiles() {
            return Err(Error::dims(format!("schedule has {} rows, game has {} profiles", rows.len(), game.num_profiles())));
        }
        let mut values = Vec::with_capacity(rows.len() * n);
        for (p, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::dims(format!("schedule row {p} has {} entries for {n} agents", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("schedule row {p} is not finite")));
            }
            values.extend(row);
        }
        Ok(IncentiveSchedule { agents: n, values })
    }

    pub fn from_fn(game: &StrategicGame, mut f: impl FnMut(&ActionProfile, usize) -> f64) -> Result<Self> {
        let rows = (0..game.num_profiles())
            .map(|p| {
                let profile = game.profile_at(p);
                (0..game.num_agents()).map(|i| f(&profile, i)).collect()
            })
            .collect();
        Self::from_rows(game, rows)
    }

    /// The same per-agent transfer at every profile.
    pub fn constant(game: &StrategicGame, per_agent: &[f64]) -> Result<Self> {
        if per_agent.len() != game.num_agents() {
            return Err(Error::dims("one constant transfer per agent"));
        }
        Self::from_fn(game, |_, i| per_agent[i])
    }

    /// Transfers paid only at `profile`.
    pub fn at_profile(game: &StrategicGame, profile: &ActionProfile, transfers: &[f64]) -> Result<Self> {
        game.check_profile(profile)?;
        if transfers.len() != game.num_agents() {
            return Err(Error::dims("one transfer per agent"));
        }
        Self::from_fn(game, |x, i| if x == profile { transfers[i] } else { 0.0 })
    }

    pub fn num_agents(&self) -> usize {
        self.agents
    }

    pub fn num_profiles(&self) -> usize {
        self.values.len() / self.agents.max(1)
    }

    pub fn get(&self, profile_index: usize, agent: usize) -> f64 {
        self.values[profile_index * self.agents + agent]
    }

    pub fn row(&self, profile_index: usize) -> &[f64] {
        &self.values[profile_index * self.agents..(profile_index + 1) * self.agents]
    }

    pub fn total_at(&self, profile_index: usize) -> f64 {
        self.row(profile_index).iter().sum()
    }

    pub fn negated(&self) -> Self {
        IncentiveSchedule { agents: self.agents, values: self.values.iter().map(|v| -v).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    fn check_grid(&self, game: &StrategicGame) -> Result<()> {
        if self.agents != game.num_agents() || self.values.len() != game.num_profiles() * game.num_agents() {
            return Err(Error::dims("schedule is not defined on the game's profile grid"));
        }
        Ok(())
    }
}

/// `J~_i(x) = J_i(x) + rho_i(x)` under every signal.
pub fn modified_payoff(game: &StrategicGame, schedule: &IncentiveSchedule) -> Result<StrategicGame> {
    schedule.check_grid(game)?;
    Ok(game.map_payoffs(|_, p, i, v| v + schedule.get(p, i)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    blocks: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl GroupPartition {
    pub fn new(agents: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut group_of = vec![usize::MAX; agents];
        for (m, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::domain(format!("group {m} is empty")));
            }
            for &i in block {
                if i >= agents {
                    return Err(Error::domain(format!("group {m} names agent {i}, game has {agents}")));
                }
                if group_of[i] != usize::MAX {
                    return Err(Error::domain(format!("agent {i} belongs to two groups")));
                }
                group_of[i] = m;
            }
        }
        if let Some(i) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(Error::domain(format!("agent {i} is missing from the partition")));
        }
        Ok(GroupPartition { blocks, group_of })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn group_of(&self, agent: usize) -> usize {
        self.group_of[agent]
    }
}

/// One incentive term: a scalar paid at every profile, or a per-profile table.
#[derive(Debug, Clone, PartialEq)]
pub enum Transfer {
    Constant(f64),
    PerProfile(Vec<f64>),
}

impl Transfer {
    fn at(&self, profile_index: usize) -> f64 {
        match self {
            Transfer::Constant(v) => *v,
            Transfer::PerProfile(t) => t[profile_index],
        }
    }

    fn check(&self, profiles: usize, what: &str) -> Result<()> {
        match self {
            Transfer::Constant(v) if !v.is_finite() => Err(Error::domain(format!("{what} is not finite"))),
            Transfer::PerProfile(t) if t.len() != profiles => {
                Err(Error::dims(format!("{what} lists {} profiles, game has {profiles}", t.len())))
            }
            Transfer::PerProfile(t) if t.iter().any(|v| !v.is_finite()) => {
                Err(Error::domain(format!("{what} is not finite")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalIncentive {
    /// Intragroup term per agent.
    pub intra: Vec<Transfer>,
    /// Intergroup term per group, inherited by every member.
    pub inter: Vec<Transfer>,
}

pub fn flatten(
    game: &StrategicGame,
    partition: &GroupPartition,
    hier: &HierarchicalIncentive,
) -> Result<IncentiveSchedule> {
    let n = game.num_agents();
    if partition.group_of.len() != n {
        return Err(Error::domain(format!("partition covers {} agents, game has {n}", partition.group_of.len())));
    }
    if hier.intra.len() != n {
        return Err(Error::dims(format!("{} intragroup terms for {n} agents", hier.intra.len())));
    }
    if hier.inter.len() != partition.blocks.len() {
        return Err(Error::dims(format!(
            "{} intergroup terms for {} groups",
            hier.inter.len(),
            partition.blocks.len()
        )));
    }
    let profiles = game.num_profiles();
    for (i, t) in hier.intra.iter().enumerate() {
        t.check(profiles, &format!("intragroup term of agent {i}"))?;
    }
    for (m, t) in hier.inter.iter().enumerate() {
        t.check(profiles, &format!("intergroup term of group {m}"))?;
    }
    let rows = (0..profiles)
        .map(|p| (0..n).map(|i| hier.intra[i].at(p) + hier.inter[partition.group_of(i)].at(p)).collect())
        .collect();
    IncentiveSchedule::from_rows(game, rows)
}

/// `J~_i = J_i + rho_in_i + rho_out_{m(i)}`.
pub fn apply_hierarchical(
    game: &StrategicGame,
    partition: &GroupPartition,
    hier: &HierarchicalIncentive,
) -> Result<StrategicGame> {
    modified_payoff(game, &flatten(game, partition, hier)?)
}

/// Per-period payoffs of a profile path, `payoffs[t][agent]`. A single row
/// stands for a stationary outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffRecord {
    pub profiles: Vec<ActionProfile>,
    pub payoffs: Vec<Vec<f64>>,
}

impl PayoffRecord {
    /// Payoffs of `profiles` in `game`, plus `schedule` when given.
    pub fn evaluate(
        game: &StrategicGame,
        profiles: &[ActionProfile],
        signal: usize,
        schedule: Option<&IncentiveSchedule>,
    ) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::domain("a payoff record needs at least one period"));
        }
        if let Some(s) = schedule {
            s.check_grid(game)?;
        }
        game.check_signal(signal)?;
        let payoffs = profiles
            .iter()
            .map(|x| {
                game.check_profile(x)?;
                let idx = game.profile_index(&x.0);
                Ok((0..game.num_agents())
                    .map(|i| game.payoff_at(signal, idx, i) + schedule.map_or(0.0, |s| s.get(idx, i)))
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(PayoffRecord { profiles: profiles.to_vec(), payoffs })
    }

    pub fn stationary(game: &StrategicGame, profile: &ActionProfile, signal: usize) -> Result<Self> {
        Self::evaluate(game, std::slice::from_ref(profile), signal, None)
    }

    pub fn horizon(&self) -> usize {
        self.payoffs.len()
    }

    /// Per-agent totals, discounted by `delta^t`; per-period payoffs when the
    /// record has one row.
    pub fn totals(&self, delta: f64) -> Vec<f64> {
        let n = self.payoffs.first().map_or(0, Vec::len);
        let mut out = vec![0.0; n];
        let mut w = 1.0;
        for row in &self.payoffs {
            for (o, v) in out.iter_mut().zip(row) {
                *o += w * v;
            }
            w *= delta;
        }
        out
    }
}

/// Weakly better for all (tolerance `1e-9`) and strictly better for one.
/// Trajectories are compared by `delta`-discounted sums.
pub fn is_pareto_improving(baseline: &PayoffRecord, induced: &PayoffRecord, delta: f64) -> Result<bool> {
    if baseline.horizon() != induced.horizon() {
        return Err(Error::dims(format!(
            "baseline covers {} periods, induced record {}",
            baseline.horizon(),
            induced.horizon()
        )));
    }
    if baseline.payoffs.first().map(Vec::len) != induced.payoffs.first().map(Vec::len) {
        return Err(Error::dims("records cover different agents"));
    }
    let b = baseline.totals(delta);
    let x = induced.totals(delta);
    let weak = b.iter().zip(&x).all(|(b, x)| *x >= b - TOL);
    let strict = b.iter().zip(&x).any(|(b, x)| *x > b + TOL);
    Ok(weak && strict)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetSpec {
    pub budget: f64,
    pub discount: f64,
    pub horizon: Horizon,
}

impl BudgetSpec {
    pub fn new(budget: f64, discount: f64, horizon: Horizon) -> Result<Self> {
        let spec = BudgetSpec { budget, discount, horizon };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.budget >= 0.0) {
            return Err(Error::domain(format!("budget must be nonnegative, got {}", self.budget)));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::domain(format!("discount must lie in (0, 1], got {}", self.discount)));
        }
        match self.horizon {
            Horizon::Infinite if self.discount >= 1.0 => {
                Err(Error::domain("an infinite horizon needs a discount below 1"))
            }
            Horizon::Finite(0) => Err(Error::domain("a finite horizon needs at least one period")),
            _ => Ok(()),
        }
    }

    /// `sum_t delta^t` over the horizon.
    pub fn annuity(&self) -> f64 {
        match self.horizon {
            Horizon::Infinite => 1.0 / (1.0 - self.discount),
            Horizon::Finite(t) => (0..t).map(|k| self.discount.powi(k as i32)).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetReport {
    pub spent: f64,
    pub feasible: bool,
}

/// Discounted total transfer along `path`. A one-profile path is stationary;
/// a longer finite path must match the horizon, and under an infinite
/// horizon its last profile repeats forever.
pub fn budget_check(
    game: &StrategicGame,
    schedule: &IncentiveSchedule,
    path: &[ActionProfile],
    spec: &BudgetSpec,
) -> Result<BudgetReport> {
    spec.validate()?;
    schedule.check_grid(game)?;
    if path.is_empty() {
        return Err(Error::domain("budget check needs a nonempty path"));
    }
    let mut totals = Vec::with_capacity(path.len());
    for x in path {
        game.check_profile(x)?;
        totals.push(schedule.total_at(game.profile_index(&x.0)));
    }
    let d = spec.discount;
    let spent = match (spec.horizon, totals.len()) {
        (_, 1) => totals[0] * spec.annuity(),
        (Horizon::Finite(t), len) if len == t => totals.iter().enumerate().map(|(k, v)| d.powi(k as i32) * v).sum(),
        (Horizon::Finite(t), len) => {
            return Err(Error::dims(format!("path has {len} periods, horizon is {t}")));
        }
        (Horizon::Infinite, len) => {
            let head: f64 = totals[..len - 1].iter().enumerate().map(|(k, v)| d.powi(k as i32) * v).sum();
            head + d.powi((len - 1) as i32) * totals[len - 1] / (1.0 - d)
        }
    };
    Ok(BudgetReport { spent, feasible: spent <= spec.budget + TOL })
}

#[derive(Debug, Clone, PartialEq)]
pub enum IncentiveDesign {
    Designed {
        schedule: IncentiveSchedule,
        /// Transfers paid at the target profile.
        transfers: Vec<f64>,
        per_period: f64,
        spent: f64,
    },
    Infeasible,
}

/// Minimum-spend nonnegative transfers paid only at `target` that make it a
/// pure Nash equilibrium (weak inequalities), Pareto-improving against the
/// stationary `baseline`, and affordable under `spec`.
///
/// Strict improvement for some agent cannot be expressed as a closed LP
/// constraint; when the cheapest solution leaves every agent exactly at its
/// baseline, the cheapest variant lifting one agent by a margin of `2e-9`
/// is used instead.
pub fn design_incentive(
    game: &StrategicGame,
    target: &ActionProfile,
    baseline: &PayoffRecord,
    spec: &BudgetSpec,
    signal: usize,
) -> Result<IncentiveDesign> {
    spec.validate()?;
    game.check_profile(target)?;
    game.check_signal(signal)?;
    let n = game.num_agents();
    if baseline.payoffs.first().map(Vec::len) != Some(n) {
        return Err(Error::dims("baseline does not cover the game's agents"));
    }
    let annuity = spec.annuity();
    let base_totals = baseline.totals(spec.discount);
    // A stationary baseline is compared per period; a trajectory by its
    // discounted sum over the same periods.
    let (base_level, weight) = if baseline.horizon() == 1 {
        (base_totals, 1.0)
    } else {
        let w: f64 = (0..baseline.horizon()).map(|k| spec.discount.powi(k as i32)).sum();
        (base_totals, w)
    };
    let idx = game.profile_index(&target.0);
    let own = game.payoffs_at(signal, idx).to_vec();

    let solve = |lift: Option<usize>| -> Result<Option<Vec<f64>>> {
        let mut lp = LinearProgram::minimize(vec![1.0; n]);
        for i in 0..n {
            let dev = game.deviation_payoffs(i, &target.0, signal);
            let need = dev.iter().copied().fold(f64::NEG_INFINITY, f64::max) - own[i];
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            lp.add_constraint(row.clone(), Relation::Ge, need);
            let margin = if lift == Some(i) { 2e-9 } else { 0.0 };
            let pareto = (base_level[i] + margin) / weight - own[i];
            lp.add_constraint(row, Relation::Ge, pareto);
        }
        let sol = solve_lp(&lp)?;
        Ok(match sol.status {
            LpStatus::Optimal => Some(sol.x.iter().map(|v| v.max(0.0)).collect()),
            _ => None,
        })
    };

    let strict = |rho: &[f64]| (0..n).any(|i| (own[i] + rho[i]) * weight > base_level[i] + TOL);
    let mut best = solve(None)?;
    if let Some(rho) = &best {
        if !strict(rho) {
            best = None;
            for k in 0..n {
                if let Some(r) = solve(Some(k))? {
                    if strict(&r) && best.as_ref().is_none_or(|b| r.iter().sum::<f64>() < b.iter().sum::<f64>()) {
                        best = Some(r);
                    }
                }
            }
        }
    }
    let Some(rho) = best else {
        return Ok(IncentiveDesign::Infeasible);
    };
    let per_period: f64 = rho.iter().sum();
    let spent = per_period * annuity;
    if spent > spec.budget + TOL {
        return Ok(IncentiveDesign::Infeasible);
    }
    let schedule = IncentiveSchedule::at_profile(game, target, &rho)?;
    Ok(IncentiveDesign::Designed { schedule, transfers: rho, per_period, spent })
}
