//! Nonatomic routing on small networks with affine latencies `a + b f`.
//!
//! Costs are minimised here, unlike [`game`](crate::game) payoffs. Flows are
//! kept on the explicit acyclic path set; edge flows are always recomputed
//! from path flows.

use crate::{Error, Result};

pub const MAX_PATHS: usize = 32;
/// Stationarity target for the descent: largest latency spread among used paths.
pub const GAP_TOL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    /// Free-flow latency `a`.
    pub free_flow: f64,
    /// Congestion slope `b`.
    pub slope: f64,
}

impl Edge {
    pub fn new(tail: usize, head: usize, free_flow: f64, slope: f64) -> Self {
        Edge { tail, head, free_flow, slope }
    }

    pub fn latency(&self, flow: f64) -> f64 {
        self.free_flow + self.slope * flow
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CongestionNetwork {
    pub nodes: usize,
    pub edges: Vec<Edge>,
    pub origin: usize,
    pub destination: usize,
    pub demand: f64,
}

impl CongestionNetwork {
    pub fn new(nodes: usize, edges: Vec<Edge>, origin: usize, destination: usize, demand: f64) -> Result<Self> {
        let net = CongestionNetwork { nodes, edges, origin, destination, demand };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        if self.origin >= self.nodes || self.destination >= self.nodes {
            return Err(Error::domain("origin or destination is not a node"));
        }
        if self.origin == self.destination {
            return Err(Error::domain("origin and destination coincide"));
        }
        if !(self.demand.is_finite() && self.demand > 0.0) {
            return Err(Error::domain(format!("demand must be positive, got {}", self.demand)));
        }
        for (k, e) in self.edges.iter().enumerate() {
            if e.tail >= self.nodes || e.head >= self.nodes {
                return Err(Error::domain(format!("edge {k} references a missing node")));
            }
            let ok = |v: f64| v.is_finite() && v >= 0.0;
            if !ok(e.free_flow) || !ok(e.slope) {
                return Err(Error::domain(format!("edge {k} needs finite nonnegative a and b")));
            }
        }
        Ok(())
    }

    /// Copy with one more edge appended.
    pub fn with_edge(&self, edge: Edge) -> Result<Self> {
        let mut edges = self.edges.clone();
        edges.push(edge);
        Self::new(self.nodes, edges, self.origin, self.destination, self.demand)
    }

    /// Copy with `tolls[e]` added to each edge's free-flow latency.
    pub fn with_tolls(&self, tolls: &[f64]) -> Result<Self> {
        if tolls.len() != self.edges.len() {
            return Err(Error::dims(format!("{} tolls for {} edges", tolls.len(), self.edges.len())));
        }
        let edges = self
            .edges
            .iter()
            .zip(tolls)
            .map(|(e, &t)| Edge { free_flow: e.free_flow + t, ..*e })
            .collect();
        Self::new(self.nodes, edges, self.origin, self.destination, self.demand)
    }

    /// Acyclic origin-destination paths as edge-index lists, in depth-first
    /// order following the edge list.
    pub fn paths(&self) -> Result<Vec<Vec<usize>>> {
        let mut out = Vec::new();
        let mut visited = vec![false; self.nodes];
        let mut stack = Vec::new();
        visited[self.origin] = true;
        self.dfs(self.origin, &mut visited, &mut stack, &mut out)?;
        if out.is_empty() {
            return Err(Error::domain("no path from origin to destination"));
        }
        Ok(out)
    }

    fn dfs(&self, node: usize, visited: &mut [bool], stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) -> Result<()> {
        if node == self.destination {
            if out.len() == MAX_PATHS {
                return Err(Error::capacity(format!("more than {MAX_PATHS} acyclic paths")));
            }
            out.push(stack.clone());
            return Ok(());
        }
        for (k, e) in self.edges.iter().enumerate() {
            if e.tail == node && !visited[e.head] {
                visited[e.head] = true;
                stack.push(k);
                self.dfs(e.head, visited, stack, out)?;
                stack.pop();
                visited[e.head] = false;
            }
        }
        Ok(())
    }

    pub fn edge_flows(&self, paths: &[Vec<usize>], path_flows: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.edges.len()];
        for (p, &h) in paths.iter().zip(path_flows) {
            for &e in p {
                f[e] += h;
            }
        }
        f
    }

    pub fn total_cost(&self, edge_flows: &[f64]) -> f64 {
        self.edges.iter().zip(edge_flows).map(|(e, &f)| f * e.latency(f)).sum()
    }

    /// Beckmann potential `sum_e (a_e f_e + b_e f_e^2 / 2)`.
    pub fn beckmann_potential(&self, edge_flows: &[f64]) -> f64 {
        self.edges.iter().zip(edge_flows).map(|(e, &f)| e.free_flow * f + 0.5 * e.slope * f * f).sum()
    }

    /// Full assignment record for given path flows.
    pub fn evaluate(&self, paths: &[Vec<usize>], path_flows: &[f64]) -> FlowAssignment {
        let edge_flows = self.edge_flows(paths, path_flows);
        let path_latencies = paths
            .iter()
            .map(|p| p.iter().map(|&e| self.edges[e].latency(edge_flows[e])).sum())
            .collect();
        FlowAssignment {
            paths: paths.to_vec(),
            path_flows: path_flows.to_vec(),
            total_cost: self.total_cost(&edge_flows),
            edge_flows,
            path_latencies,
            iterations: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowAssignment {
    pub paths: Vec<Vec<usize>>,
    pub path_flows: Vec<f64>,
    pub edge_flows: Vec<f64>,
    pub path_latencies: Vec<f64>,
    /// `sum_e f_e l_e(f_e)`.
    pub total_cost: f64,
    pub iterations: usize,
}

impl FlowAssignment {
    pub fn per_unit_cost(&self, demand: f64) -> f64 {
        self.total_cost / demand
    }

    /// Largest latency excess of a used path over the shortest path.
    pub fn wardrop_gap(&self) -> f64 {
        let min = self.path_latencies.iter().copied().fold(f64::INFINITY, f64::min);
        self.path_flows
            .iter()
            .zip(&self.path_latencies)
            .filter(|(&h, _)| h > 0.0)
            .map(|(_, &l)| l - min)
            .fold(0.0, f64::max)
    }
}

/// Pairwise-exchange coordinate descent on the path-flow simplex for
/// `sum_e (a_e f_e + weight * b_e f_e^2)`. Each step moves flow from the
/// costliest used path to the cheapest path with an exact line search, so the
/// objective never increases.
fn descend(net: &CongestionNetwork, weight: f64, mut trace: Option<&mut Vec<f64>>) -> Result<FlowAssignment> {
    let paths = net.paths()?;
    let np = paths.len();
    let mut h = vec![net.demand / np as f64; np];
    let objective = |f: &[f64]| -> f64 {
        net.edges.iter().zip(f).map(|(e, &x)| e.free_flow * x + weight * e.slope * x * x).sum()
    };
    let mut iterations = 0;
    loop {
        let f = net.edge_flows(&paths, &h);
        if let Some(t) = trace.as_deref_mut() {
            t.push(objective(&f));
        }
        let grad: Vec<f64> = paths
            .iter()
            .map(|p| p.iter().map(|&e| net.edges[e].free_flow + 2.0 * weight * net.edges[e].slope * f[e]).sum())
            .collect();
        let mut q = 0;
        for k in 1..np {
            if grad[k] < grad[q] {
                q = k;
            }
        }
        let mut p = None;
        for k in 0..np {
            if h[k] > 0.0 && p.is_none_or(|best: usize| grad[k] > grad[best]) {
                p = Some(k);
            }
        }
        let p = p.expect("demand is positive");
        let gap = grad[p] - grad[q];
        if gap < GAP_TOL {
            let mut out = net.evaluate(&paths, &h);
            out.iterations = iterations;
            return Ok(out);
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::IterationLimit(format!("flow descent did not reach gap {GAP_TOL}")));
        }
        let curvature: f64 = 2.0
            * weight
            * net
                .edges
                .iter()
                .enumerate()
                .filter(|(e, _)| paths[p].contains(e) != paths[q].contains(e))
                .map(|(_, edge)| edge.slope)
                .sum::<f64>();
        let step = if curvature > 0.0 { (gap / curvature).min(h[p]) } else { h[p] };
        h[p] -= step;
        h[q] += step;
        iterations += 1;
    }
}

/// Wardrop equilibrium as the Beckmann-potential minimiser.
pub fn wardrop_equilibrium(net: &CongestionNetwork) -> Result<FlowAssignment> {
    descend(net, 0.5, None)
}

/// Same as [`wardrop_equilibrium`], also returning the potential at every iterate.
pub fn wardrop_equilibrium_traced(net: &CongestionNetwork) -> Result<(FlowAssignment, Vec<f64>)> {
    let mut trace = Vec::new();
    let a = descend(net, 0.5, Some(&mut trace))?;
    Ok((a, trace))
}

/// Minimiser of total cost `sum_e f_e (a_e + b_e f_e)`.
pub fn system_optimum(net: &CongestionNetwork) -> Result<FlowAssignment> {
    descend(net, 1.0, None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriceOfAnarchy {
    Ratio(f64),
    /// The optimum has zero cost.
    Undefined,
}

impl PriceOfAnarchy {
    pub fn value(&self) -> Option<f64> {
        match self {
            PriceOfAnarchy::Ratio(r) => Some(*r),
            PriceOfAnarchy::Undefined => None,
        }
    }
}

pub fn price_of_anarchy(net: &CongestionNetwork) -> Result<PriceOfAnarchy> {
    let eq = wardrop_equilibrium(net)?;
    let opt = system_optimum(net)?;
    if opt.total_cost <= 0.0 {
        return Ok(PriceOfAnarchy::Undefined);
    }
    Ok(PriceOfAnarchy::Ratio(eq.total_cost / opt.total_cost))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BraessReport {
    /// Per-unit equilibrium cost before adding the edge.
    pub before: f64,
    pub after: f64,
    pub delta: f64,
}

pub fn braess_delta(net: &CongestionNetwork, extra: Edge) -> Result<BraessReport> {
    let before = wardrop_equilibrium(net)?.per_unit_cost(net.demand);
    let augmented = net.with_edge(extra)?;
    let after = wardrop_equilibrium(&augmented)?.per_unit_cost(net.demand);
    Ok(BraessReport { before, after, delta: after - before })
}

/// First-best tolls `b_e f*_e` at the system optimum.
pub fn marginal_cost_tolls(net: &CongestionNetwork) -> Result<Vec<f64>> {
    let opt = system_optimum(net)?;
    Ok(net.edges.iter().zip(&opt.edge_flows).map(|(e, &f)| e.slope * f).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TolledOutcome {
    pub tolls: Vec<f64>,
    /// Equilibrium of the tolled network; latencies include tolls.
    pub equilibrium: FlowAssignment,
    /// Total cost of the tolled equilibrium flows under the untolled latencies.
    pub social_cost: f64,
}

pub fn tolled_equilibrium(net: &CongestionNetwork, tolls: &[f64]) -> Result<TolledOutcome> {
    let tolled = net.with_tolls(tolls)?;
    let equilibrium = wardrop_equilibrium(&tolled)?;
    let social_cost = net.total_cost(&equilibrium.edge_flows);
    Ok(TolledOutcome { tolls: tolls.to_vec(), equilibrium, social_cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templates;

    #[test]
    fn single_link() {
        let net = templates::single_link();
        let eq = wardrop_equilibrium(&net).unwrap();
        assert!((eq.path_flows[0] - 1.0).abs() < 1e-12);
        assert!((eq.total_cost - 1.0).abs() < 1e-12);
        let so = system_optimum(&net).unwrap();
        assert_eq!(eq.path_flows, so.path_flows);
        assert_eq!(price_of_anarchy(&net).unwrap(), PriceOfAnarchy::Ratio(1.0));
    }

    #[test]
    fn pigou() {
        let net = templates::pigou();
        let eq = wardrop_equilibrium(&net).unwrap();
        assert!((eq.path_flows[1] - 1.0).abs() < 1e-9);
        assert!((eq.total_cost - 1.0).abs() < 1e-9);
        let so = system_optimum(&net).unwrap();
        assert!((so.path_flows[0] - 0.5).abs() < 1e-9);
        assert!((so.total_cost - 0.75).abs() < 1e-9);
        let poa = price_of_anarchy(&net).unwrap().value().unwrap();
        assert!((poa - 4.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn braess_base_and_shortcut() {
        let net = templates::braess_base();
        let eq = wardrop_equilibrium(&net).unwrap();
        assert!((eq.per_unit_cost(1.0) - 1.5).abs() < 1e-9);
        let r = braess_delta(&net, templates::braess_shortcut()).unwrap();
        assert!((r.before - 1.5).abs() < 1e-9);
        assert!((r.after - 2.0).abs() < 1e-9);
        assert!((r.delta - 0.5).abs() < 1e-9);
    }

    #[test]
    fn unused_edge_changes_nothing() {
        // A very slow bypass never carries flow.
        let net = templates::braess_base();
        let r = braess_delta(&net, Edge::new(0, 3, 10.0, 0.0)).unwrap();
        assert!(r.delta.abs() < 1e-9);
    }

    #[test]
    fn parallel_copy_halves_cost() {
        let net = templates::single_link();
        let r = braess_delta(&net, Edge::new(0, 1, 0.0, 1.0)).unwrap();
        assert!((r.before - 1.0).abs() < 1e-12);
        assert!((r.after - 0.5).abs() < 1e-9);
        assert!((r.delta + 0.5).abs() < 1e-9);
    }

    #[test]
    fn constant_latencies_need_no_tolls() {
        let net = CongestionNetwork::new(2, vec![Edge::new(0, 1, 2.0, 0.0), Edge::new(0, 1, 3.0, 0.0)], 0, 1, 1.0)
            .unwrap();
        assert_eq!(marginal_cost_tolls(&net).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn pigou_toll() {
        let net = templates::pigou();
        let tolls = marginal_cost_tolls(&net).unwrap();
        assert!(tolls[0].abs() < 1e-12);
        assert!((tolls[1] - 0.5).abs() < 1e-9);
        let out = tolled_equilibrium(&net, &tolls).unwrap();
        assert!((out.equilibrium.path_flows[0] - 0.5).abs() < 1e-6);
        assert!((out.social_cost - 0.75).abs() < 1e-9);
    }

    #[test]
    fn invalid_networks() {
        assert!(CongestionNetwork::new(2, vec![], 0, 1, 1.0).unwrap().paths().is_err());
        assert!(CongestionNetwork::new(2, vec![Edge::new(0, 1, -1.0, 0.0)], 0, 1, 1.0).is_err());
        assert!(CongestionNetwork::new(2, vec![Edge::new(0, 1, 1.0, 0.0)], 0, 1, 0.0).is_err());
    }

    #[test]
    fn path_cap() {
        // 6 parallel layers of 2 edges each give 64 paths.
        let mut edges = Vec::new();
        for layer in 0..6 {
            edges.push(Edge::new(layer, layer + 1, 1.0, 0.0));
            edges.push(Edge::new(layer, layer + 1, 1.0, 1.0));
        }
        let net = CongestionNetwork::new(7, edges, 0, 6, 1.0).unwrap();
        assert!(matches!(wardrop_equilibrium(&net), Err(Error::Capacity(_))));
    }
}
