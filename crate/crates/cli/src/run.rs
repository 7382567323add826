use std::time::Instant;

use stgames_core::coop::{
    core_nonempty, cooperative_surplus, excess, in_core, is_convex, is_superadditive, members, nucleolus, shapley,
};
use stgames_core::coordination::{run_two_timescale, stackelberg_solve, SelectionMode, StackelbergOutcome, TwoTimescaleConfig};
use stgames_core::game::{enumerate_pure_nash, is_nash, welfare_and_poa, ActionProfile, PoaRatio, StrategicGame};
use stgames_core::incentives::{budget_check, design_incentive, is_pareto_improving, IncentiveDesign, PayoffRecord};
use stgames_core::learning::{diagnostics_with_stride, run_dynamics, SignalSchedule};
use stgames_core::matching::{blocking_pairs, deferred_acceptance, enumerate_stable, Matching, Side};
use stgames_core::network::{
    braess_delta, marginal_cost_tolls, price_of_anarchy, system_optimum, tolled_equilibrium, wardrop_equilibrium_traced,
    CongestionNetwork, PriceOfAnarchy,
};
use stgames_core::resilience::{run_adversarial_consensus, run_adversarial_learning, ResilienceMetrics};

use crate::config::{GameSetup, ModeSpec, Payload, ScenarioConfig, TwoTimescalePayload};
use crate::error::{CliError, CliResult};
use crate::record::{Cell, RunRecord, Summary, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

struct Output {
    summary: Summary,
    tables: Vec<Table>,
}

impl Output {
    fn new() -> Self {
        Output { summary: Summary::default(), tables: Vec::new() }
    }
}

/// Runs a validated scenario. Everything except `wall_clock_seconds` and
/// `version` is a function of the config.
pub fn run_scenario(cfg: &ScenarioConfig) -> CliResult<RunRecord> {
    let start = Instant::now();
    for w in &cfg.warnings {
        log::warn!("{}: {w}", cfg.kind.name());
    }
    let kind = cfg.kind.name();
    let seed = cfg.seed.unwrap_or(0);
    let fail = |e| CliError::from_run(kind, e);
    let out = match &cfg.payload {
        Payload::Coop(game) => run_coop(game).map_err(fail)?,
        Payload::Match { market, proposing, enumerate } => run_match(market, *proposing, *enumerate).map_err(fail)?,
        Payload::Nash { setup, signals } => run_nash(setup, signals).map_err(fail)?,
        Payload::Learn { setup, learners, horizon, schedule, record_every } => {
            let sched = if schedule.len() == 1 {
                SignalSchedule::Constant(schedule[0])
            } else {
                SignalSchedule::Sequence(schedule.clone())
            };
            run_learn(&setup.game, learners, *horizon, seed, &sched, *record_every).map_err(fail)?
        }
        Payload::TwoTimescale(p) => run_ttscale(p, seed).map_err(fail)?,
        Payload::Stackelberg { setup, candidates, mode, leader } => {
            run_stackelberg(setup, candidates, *mode, leader).map_err(fail)?
        }
        Payload::Wardrop { network, shortcut, tolls } => run_wardrop(network, *shortcut, *tolls).map_err(fail)?,
        Payload::Incentive { setup, target, baseline, signal, budget } => {
            run_incentive(&setup.game, target, baseline, *signal, budget).map_err(fail)?
        }
        Payload::ResilienceConsensus { scenario, adversary, defense, steps } => {
            let run = run_adversarial_consensus(scenario, adversary, defense, *steps, seed).map_err(fail)?;
            let mut out = Output::new();
            out.summary.put("agents", scenario.initial.len());
            out.summary.put("attack", if adversary.compromised.is_empty() { "none" } else { adversary.attack.name() });
            put_metrics(&mut out.summary, &run.metrics);
            let mut values = Table::new("values", ["t", "agent", "value", "nominal", "compromised"]);
            for (t, (row, nom)) in run.values.iter().zip(&run.nominal).enumerate() {
                for (i, (&v, &w)) in row.iter().zip(nom).enumerate() {
                    values.push(vec![t.into(), i.into(), v.into(), w.into(), adversary.is_compromised(i).into()]);
                }
            }
            let mut trust = Table::new("trust", ["agent", "neighbor", "weight"]);
            for (i, nb) in run.trust.neighbors.iter().enumerate() {
                for &j in nb {
                    trust.push(vec![i.into(), j.into(), run.trust.weights[i][j].into()]);
                }
            }
            out.tables = vec![values, trust, diameter_table(&run.metrics)];
            out
        }
        Payload::ResilienceLearning { setup, learners, adversary, steps } => {
            let run = run_adversarial_learning(&setup.game, learners, adversary, *steps, seed).map_err(fail)?;
            let mut out = Output::new();
            out.summary.put("agents", setup.game.num_agents());
            out.summary.put("attack", if adversary.compromised.is_empty() { "none" } else { adversary.attack.name() });
            put_metrics(&mut out.summary, &run.metrics);
            let last = run.trace.steps.last().expect("steps >= 1");
            for (i, p) in last.policies.iter().enumerate() {
                for (a, v) in p.iter().enumerate() {
                    out.summary.put(format!("final_policy_{i}_{}", setup.game.action_labels(i)[a]), *v);
                }
            }
            out.tables = vec![diameter_table(&run.metrics)];
            out
        }
    };
    let mut summary = Summary::default();
    summary.put("kind", kind);
    summary.put("digest", cfg.digest());
    summary.put("seed", cfg.seed.map(|s| s.to_string()));
    summary.0.extend(out.summary.0);
    Ok(RunRecord {
        kind: cfg.kind,
        digest: cfg.digest(),
        seed: cfg.seed,
        config: cfg.canonical.clone(),
        summary,
        tables: out.tables,
        warnings: cfg.warnings.clone(),
        version: VERSION.to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

type R<T> = stgames_core::Result<T>;

fn vector_into(summary: &mut Summary, key: &str, v: &[f64]) {
    for (i, x) in v.iter().enumerate() {
        summary.put(format!("{key}_{i}"), *x);
    }
}

fn run_coop(game: &stgames_core::coop::CoalitionGame) -> R<Output> {
    let mut out = Output::new();
    let n = game.num_agents();
    let phi = shapley(game)?;
    let nu = nucleolus(game)?;
    let core = core_nonempty(game)?;
    out.summary.put("agents", n);
    out.summary.put("superadditive", is_superadditive(game).0);
    out.summary.put("convex", is_convex(game).0);
    out.summary.put("cooperative_surplus", cooperative_surplus(game));
    out.summary.put("core_nonempty", core.nonempty);
    out.summary.put("core_min_total", core.min_total);
    out.summary.put("shapley_in_core", in_core(game, &phi)?.in_core());
    vector_into(&mut out.summary, "shapley", &phi);
    vector_into(&mut out.summary, "nucleolus", &nu);
    if let Some(c) = &core.certificate {
        vector_into(&mut out.summary, "core_certificate", c);
    }

    let mut alloc = Table::new("allocations", ["agent", "shapley", "nucleolus"]);
    for i in 0..n {
        alloc.push(vec![i.into(), phi[i].into(), nu[i].into()]);
    }
    let mut coalitions = Table::new("coalitions", ["mask", "members", "value", "shapley_excess", "nucleolus_excess"]);
    for mask in 1..=game.grand() {
        let names: Vec<String> = members(mask).iter().map(ToString::to_string).collect();
        coalitions.push(vec![
            (mask as usize).into(),
            names.join(" ").into(),
            game.value(mask).into(),
            excess(game, mask, &phi)?.into(),
            excess(game, mask, &nu)?.into(),
        ]);
    }
    out.tables = vec![alloc, coalitions];
    Ok(out)
}

fn matching_rows(t: &mut Table, id: Option<usize>, m: &Matching) {
    for (a, b) in m.pairs() {
        let mut row: Vec<Cell> = id.map(Into::into).into_iter().collect();
        row.extend([a.into(), b.into()]);
        t.push(row);
    }
}

fn run_match(market: &stgames_core::matching::MatchingMarket, side: Side, enumerate: bool) -> R<Output> {
    let mut out = Output::new();
    let mu = deferred_acceptance(market, side);
    let blocking = blocking_pairs(market, &mu)?;
    out.summary.put("size", market.size());
    out.summary.put("proposing", if side == Side::M { "m" } else { "w" });
    out.summary.put("blocking_pairs", blocking.len());
    let mut matching = Table::new("matching", ["m", "w"]);
    matching_rows(&mut matching, None, &mu);
    out.tables.push(matching);
    if enumerate {
        let stable = enumerate_stable(market)?;
        // Proposer-optimal: every stable matching is weakly worse for the proposing side.
        let optimal = stable.iter().all(|other| {
            (0..market.size()).all(|k| match side {
                Side::M => market.m_rank(k, mu.partner_of_m(k)) <= market.m_rank(k, other.partner_of_m(k)),
                Side::W => {
                    let (a, b) = (mu.w_to_m(), other.w_to_m());
                    market.w_rank(k, a[k]) <= market.w_rank(k, b[k])
                }
            })
        });
        out.summary.put("stable_matchings", stable.len());
        out.summary.put("proposer_optimal", optimal);
        let mut all = Table::new("stable", ["matching", "m", "w"]);
        for (k, s) in stable.iter().enumerate() {
            matching_rows(&mut all, Some(k), s);
        }
        out.tables.push(all);
    }
    Ok(out)
}

fn profile_cells(game: &StrategicGame, x: &ActionProfile) -> Vec<Cell> {
    game.profile_labels(x).into_iter().map(Cell::Text).collect()
}

fn agent_columns(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn run_nash(setup: &GameSetup, signals: &[usize]) -> R<Output> {
    let game = &setup.game;
    let welfare = setup.welfare.as_ref().unwrap_or(game);
    let n = game.num_agents();
    let mut out = Output::new();
    let mut cols = vec!["signal".to_string()];
    cols.extend(agent_columns("x", n));
    cols.extend(agent_columns("u", n));
    cols.push("welfare".into());
    let mut eqs = Table::new("equilibria", cols);
    for &s in signals {
        let label = &game.signals()[s];
        let found = enumerate_pure_nash(game, s)?;
        let report = welfare_and_poa(welfare, s)?;
        out.summary.put(format!("equilibria[{label}]"), found.len());
        out.summary.put(format!("optimal_welfare[{label}]"), report.optimal_welfare);
        out.summary.put(format!("optimal_profile[{label}]"), game.profile_labels(&report.optimal_profile).join(","));
        // The equilibrium set comes from the learning game, welfare from the welfare game.
        let worst = found
            .iter()
            .map(|x| welfare.welfare_at(s, game.profile_index(&x.0)))
            .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |a| a.min(w))));
        out.summary.put(format!("worst_equilibrium_welfare[{label}]"), worst);
        let ratio = if setup.welfare.is_none() {
            report.ratio
        } else {
            match worst {
                None => PoaRatio::NoPureEquilibrium,
                Some(w) if w > 0.0 && report.optimal_welfare > 0.0 => PoaRatio::Defined(report.optimal_welfare / w),
                Some(_) => PoaRatio::NonPositiveWelfare,
            }
        };
        let ratio: Cell = match ratio {
            PoaRatio::Defined(r) => r.into(),
            PoaRatio::NonPositiveWelfare => "undefined (non-positive welfare)".into(),
            PoaRatio::NoPureEquilibrium => "undefined (no pure equilibrium)".into(),
        };
        out.summary.put(format!("price_of_anarchy[{label}]"), ratio);
        for x in &found {
            let idx = game.profile_index(&x.0);
            let mut row: Vec<Cell> = vec![label.clone().into()];
            row.extend(profile_cells(game, x));
            row.extend(game.payoffs_at(s, idx).iter().map(|&v| Cell::Num(v)));
            row.push(welfare.welfare_at(s, idx).into());
            eqs.push(row);
        }
    }
    out.tables.push(eqs);
    Ok(out)
}

fn run_learn(
    game: &StrategicGame,
    learners: &[stgames_core::learning::LearnerSpec],
    horizon: usize,
    seed: u64,
    schedule: &SignalSchedule,
    every: usize,
) -> R<Output> {
    let trace = run_dynamics(game, learners, horizon, seed, schedule)?;
    let diag = diagnostics_with_stride(&trace, game, every)?;
    let n = game.num_agents();
    let mut out = Output::new();
    out.summary.put("horizon", horizon);
    for i in 0..n {
        out.summary.put(format!("learner_{i}"), learners[i].kind.name());
    }
    vector_into(&mut out.summary, "regret", &diag.regret);
    for (i, f) in diag.marginal_frequencies.iter().enumerate() {
        for (a, v) in f.iter().enumerate() {
            out.summary.put(format!("frequency_{i}_{}", game.action_labels(i)[a]), *v);
        }
    }
    out.summary.put("final_gap", *diag.equilibrium_gap.last().expect("horizon >= 1"));

    let mut cols = vec!["t".to_string(), "signal".into()];
    cols.extend(agent_columns("a", n));
    cols.extend(agent_columns("u", n));
    for i in 0..n {
        cols.extend(game.action_labels(i).iter().map(|l| format!("pi{i}_{l}")));
    }
    let mut steps = Table::new("steps", cols);
    for s in trace.steps.iter().filter(|s| s.t % every == 0 || s.t == horizon) {
        let mut row: Vec<Cell> = vec![s.t.into(), game.signals()[s.signal].clone().into()];
        row.extend(s.actions.iter().enumerate().map(|(i, &a)| Cell::Text(game.action_labels(i)[a].clone())));
        row.extend(s.payoffs.iter().map(|&v| Cell::Num(v)));
        row.extend(s.policies.iter().flatten().map(|&v| Cell::Num(v)));
        steps.push(row);
    }
    let mut gap = Table::new("gap", ["t", "gap"]);
    let ts = (1..=horizon).filter(|t| t % every == 0 || *t == horizon);
    for (t, g) in ts.zip(&diag.equilibrium_gap) {
        gap.push(vec![t.into(), (*g).into()]);
    }
    let mut joint = Table::new("joint", {
        let mut c = agent_columns("x", n);
        c.push("frequency".into());
        c
    });
    for (x, f) in &diag.joint_frequencies {
        let mut row = profile_cells(game, x);
        row.push((*f).into());
        joint.push(row);
    }
    out.tables = vec![steps, gap, joint];
    Ok(out)
}

fn run_ttscale(p: &TwoTimescalePayload, seed: u64) -> R<Output> {
    let game = &p.setup.game;
    let cfg = TwoTimescaleConfig {
        game: game.clone(),
        learners: p.learners.clone(),
        coordinator: p.coordinator.clone(),
        initial_signal: p.initial_signal,
        outer_steps: p.outer_steps,
        epoch_len: p.epoch_len,
        seed,
        admissible: p.admissible.clone(),
        incentives: None,
        welfare: p.setup.welfare.clone(),
    };
    let trace = run_two_timescale(&cfg)?;
    let n = game.num_agents();
    let label = |s: usize| game.signals()[s].clone();
    let mut out = Output::new();
    let first = trace.epochs.first().expect("outer_steps >= 1");
    let last = trace.epochs.last().expect("outer_steps >= 1");
    out.summary.put("epochs", trace.epochs.len());
    out.summary.put("epoch_len", p.epoch_len);
    out.summary.put("first_welfare", first.mean_welfare);
    out.summary.put("last_welfare", last.mean_welfare);
    out.summary.put("last_signal", label(last.signal));
    out.summary.put("next_signal", label(*trace.decisions.last().expect("outer_steps >= 1")));
    let mut cols = vec!["epoch".to_string(), "signal".into(), "mean_welfare".into(), "next_signal".into()];
    cols.extend(agent_columns("mean_u", n));
    let mut epochs = Table::new("epochs", cols);
    for (e, &next) in trace.epochs.iter().zip(&trace.decisions) {
        let mut row: Vec<Cell> = vec![e.epoch.into(), label(e.signal).into(), e.mean_welfare.into(), label(next).into()];
        row.extend(e.mean_payoffs.iter().map(|&v| Cell::Num(v)));
        epochs.push(row);
    }
    let mut freqs = Table::new("frequencies", ["epoch", "agent", "action", "frequency"]);
    for e in &trace.epochs {
        for (i, f) in e.frequencies.iter().enumerate() {
            for (a, v) in f.iter().enumerate() {
                freqs.push(vec![e.epoch.into(), i.into(), game.action_labels(i)[a].clone().into(), (*v).into()]);
            }
        }
    }
    out.tables = vec![epochs, freqs];
    Ok(out)
}

fn run_stackelberg(setup: &GameSetup, candidates: &[usize], mode: ModeSpec, leader: &[Vec<f64>]) -> R<Output> {
    let game = &setup.game;
    let value = |c: usize, x: &ActionProfile| leader[c][game.profile_index(&x.0)];
    let modes: Vec<(SelectionMode, &str)> = match mode {
        ModeSpec::Optimistic => vec![(SelectionMode::Optimistic, "optimistic")],
        ModeSpec::Pessimistic => vec![(SelectionMode::Pessimistic, "pessimistic")],
        ModeSpec::Both => vec![(SelectionMode::Optimistic, "optimistic"), (SelectionMode::Pessimistic, "pessimistic")],
    };
    let mut out = Output::new();
    let mut table = Table::new("candidates", ["mode", "signal", "value", "equilibrium"]);
    for (m, name) in modes {
        match stackelberg_solve(game, candidates, value, m)? {
            StackelbergOutcome::Solved { signal, value, equilibrium, candidates } => {
                out.summary.put(format!("{name}_signal"), game.signals()[signal].clone());
                out.summary.put(format!("{name}_value"), value);
                out.summary.put(format!("{name}_equilibrium"), game.profile_labels(&equilibrium).join(","));
                for c in candidates {
                    table.push(vec![
                        name.into(),
                        game.signals()[c.signal].clone().into(),
                        c.value.into(),
                        c.equilibrium.map(|x| game.profile_labels(&x).join(",")).into(),
                    ]);
                }
            }
            StackelbergOutcome::NoSolution => {
                out.summary.put(format!("{name}_signal"), "none");
            }
        }
    }
    out.tables.push(table);
    Ok(out)
}

fn edge_label(net: &CongestionNetwork, e: usize) -> String {
    format!("{}->{}", net.edges[e].tail, net.edges[e].head)
}

fn run_wardrop(net: &CongestionNetwork, shortcut: Option<stgames_core::network::Edge>, tolls: bool) -> R<Output> {
    let (eq, potential) = wardrop_equilibrium_traced(net)?;
    let opt = system_optimum(net)?;
    let mut out = Output::new();
    out.summary.put("demand", net.demand);
    out.summary.put("paths", eq.paths.len());
    out.summary.put("equilibrium_cost", eq.per_unit_cost(net.demand));
    out.summary.put("optimum_cost", opt.per_unit_cost(net.demand));
    out.summary.put("wardrop_gap", eq.wardrop_gap());
    out.summary.put(
        "price_of_anarchy",
        match price_of_anarchy(net)? {
            PriceOfAnarchy::Ratio(r) => Cell::Num(r),
            PriceOfAnarchy::Undefined => "undefined (zero optimum cost)".into(),
        },
    );
    if let Some(e) = shortcut {
        let b = braess_delta(net, e)?;
        out.summary.put("before", b.before);
        out.summary.put("after", b.after);
        out.summary.put("delta", b.delta);
    }
    let toll_values = if tolls { Some(marginal_cost_tolls(net)?) } else { None };
    let tolled = toll_values.as_ref().map(|t| tolled_equilibrium(net, t)).transpose()?;
    if let Some(t) = &tolled {
        out.summary.put("tolled_cost", t.social_cost / net.demand);
    }
    let mut edges = Table::new("edges", ["edge", "link", "a", "b", "equilibrium_flow", "optimum_flow", "toll", "tolled_flow"]);
    for (k, e) in net.edges.iter().enumerate() {
        edges.push(vec![
            k.into(),
            edge_label(net, k).into(),
            e.free_flow.into(),
            e.slope.into(),
            eq.edge_flows[k].into(),
            opt.edge_flows[k].into(),
            toll_values.as_ref().map(|t| t[k]).into(),
            tolled.as_ref().map(|t| t.equilibrium.edge_flows[k]).into(),
        ]);
    }
    let mut paths = Table::new("paths", ["path", "edges", "equilibrium_flow", "latency", "optimum_flow"]);
    for (k, p) in eq.paths.iter().enumerate() {
        let names: Vec<String> = p.iter().map(|&e| edge_label(net, e)).collect();
        paths.push(vec![
            k.into(),
            names.join(" ").into(),
            eq.path_flows[k].into(),
            eq.path_latencies[k].into(),
            opt.path_flows[k].into(),
        ]);
    }
    let mut pot = Table::new("potential", ["iteration", "potential"]);
    for (k, v) in potential.iter().enumerate() {
        pot.push(vec![k.into(), (*v).into()]);
    }
    out.tables = vec![edges, paths, pot];
    Ok(out)
}

fn run_incentive(
    game: &StrategicGame,
    target: &ActionProfile,
    baseline: &ActionProfile,
    signal: usize,
    budget: &stgames_core::incentives::BudgetSpec,
) -> R<Output> {
    let base = PayoffRecord::stationary(game, baseline, signal)?;
    let mut out = Output::new();
    out.summary.put("target", game.profile_labels(target).join(","));
    out.summary.put("baseline", game.profile_labels(baseline).join(","));
    out.summary.put("budget", budget.budget);
    let mut table = Table::new("transfers", ["agent", "transfer", "baseline_payoff", "induced_payoff"]);
    match design_incentive(game, target, &base, budget, signal)? {
        IncentiveDesign::Designed { schedule, transfers, per_period, spent } => {
            let induced = PayoffRecord::evaluate(game, std::slice::from_ref(target), signal, Some(&schedule))?;
            let modified = stgames_core::incentives::modified_payoff(game, &schedule)?;
            out.summary.put("status", "designed");
            out.summary.put("per_period", per_period);
            out.summary.put("spent", spent);
            out.summary.put("target_is_nash", is_nash(&modified, target, signal, 0.0)?.is_nash);
            out.summary.put("pareto_improving", is_pareto_improving(&base, &induced, budget.discount)?);
            out.summary
                .put("within_budget", budget_check(game, &schedule, std::slice::from_ref(target), budget)?.feasible);
            for (i, r) in transfers.iter().enumerate() {
                table.push(vec![i.into(), (*r).into(), base.payoffs[0][i].into(), induced.payoffs[0][i].into()]);
            }
        }
        IncentiveDesign::Infeasible => {
            out.summary.put("status", "infeasible");
        }
    }
    out.tables.push(table);
    Ok(out)
}

fn put_metrics(summary: &mut Summary, m: &ResilienceMetrics) {
    summary.put("max_deviation", m.max_deviation);
    summary.put("final_diameter", *m.diameter.last().expect("nonempty"));
    summary.put("recovery_time", m.recovery_time);
    summary.put("hull_exit", m.hull_exit);
}

fn diameter_table(m: &ResilienceMetrics) -> Table {
    let mut t = Table::new("diameter", ["t", "diameter"]);
    for (k, d) in m.diameter.iter().enumerate() {
        t.push(vec![k.into(), (*d).into()]);
    }
    t
}
