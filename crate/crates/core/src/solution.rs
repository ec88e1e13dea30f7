//! Route/solution representation, cost and feasibility evaluation, the
//! undirected edge-set view and gap computation.

use crate::error::{Error, Result};
use crate::instance::{DistanceOracle, Instance, InstanceKind, NodeId};
use std::collections::HashMap;
use std::fmt;

/// Undirected edge, canonicalized as `(min id, max id)`.
pub type Edge = (NodeId, NodeId);

pub fn edge(a: NodeId, b: NodeId) -> Edge {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// One vehicle route. The depot is implicit at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub customers: Vec<NodeId>,
    /// Cached total demand of the customers.
    pub load: u64,
    /// Cached length including both depot legs.
    pub length: f64,
    /// Cached time-window feasibility; always true for CVRP.
    pub tw_ok: bool,
}

impl Route {
    pub fn new(customers: Vec<NodeId>, inst: &Instance, oracle: &DistanceOracle) -> Self {
        let mut route = Route { customers, load: 0, length: 0.0, tw_ok: true };
        route.refresh(inst, oracle);
        route
    }

    /// Recomputes the cached load, length and TW flag from the sequence.
    pub fn refresh(&mut self, inst: &Instance, oracle: &DistanceOracle) {
        self.load = self.customers.iter().map(|&c| inst.demand(c) as u64).sum();
        self.length = route_length(&self.customers, oracle);
        self.tw_ok = match inst.kind {
            InstanceKind::Cvrp => true,
            InstanceKind::Cvrptw => tw_feasible(&self.customers, inst, oracle),
        };
    }

    pub fn len(&self) -> usize {
        self.customers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }
}

fn route_length(customers: &[NodeId], oracle: &DistanceOracle) -> f64 {
    if customers.is_empty() {
        return 0.0;
    }
    let mut length = oracle.distance(0, customers[0]);
    for pair in customers.windows(2) {
        length += oracle.distance(pair[0], pair[1]);
    }
    length + oracle.distance(*customers.last().unwrap(), 0)
}

/// Forward time sweep: arrivals clamp to window opens (waiting allowed);
/// feasible iff every arrival meets its close and the vehicle returns before
/// the depot closes.
pub fn tw_feasible(customers: &[NodeId], inst: &Instance, oracle: &DistanceOracle) -> bool {
    let depot_tw = match inst.nodes[0].tw {
        Some(tw) => tw,
        None => return true,
    };
    let mut time = depot_tw.open;
    let mut prev = 0;
    for &c in customers {
        let tw = inst.nodes[c].tw.expect("CVRPTW node has a window");
        let arrival = time + oracle.distance(prev, c);
        let start = arrival.max(tw.open);
        if arrival > tw.close {
            return false;
        }
        time = start + tw.service;
        prev = c;
    }
    time + oracle.distance(prev, 0) <= depot_tw.close
}

/// Total time-window lateness of a route: how far each arrival overruns its
/// close, plus the overrun of the depot return. Zero iff `tw_feasible`.
pub fn tw_violation(customers: &[NodeId], inst: &Instance, oracle: &DistanceOracle) -> f64 {
    let depot_tw = match inst.nodes[0].tw {
        Some(tw) => tw,
        None => return 0.0,
    };
    let mut time = depot_tw.open;
    let mut prev = 0;
    let mut lateness = 0.0;
    for &c in customers {
        let tw = inst.nodes[c].tw.expect("CVRPTW node has a window");
        let arrival = time + oracle.distance(prev, c);
        if arrival > tw.close {
            lateness += arrival - tw.close;
        }
        time = arrival.max(tw.open) + tw.service;
        prev = c;
    }
    let back = time + oracle.distance(prev, 0);
    if back > depot_tw.close {
        lateness += back - depot_tw.close;
    }
    lateness
}

/// An ordered set of routes partitioning the customers.
///
/// `cost` is maintained incrementally by the search engine; `evaluate`
/// recomputes everything from scratch and is the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub routes: Vec<Route>,
    pub cost: f64,
}

impl Solution {
    /// Builds a solution from raw route sequences; empty routes are dropped.
    pub fn from_routes(
        routes: Vec<Vec<NodeId>>,
        inst: &Instance,
        oracle: &DistanceOracle,
    ) -> Self {
        let routes: Vec<Route> = routes
            .into_iter()
            .filter(|r| !r.is_empty())
            .map(|r| Route::new(r, inst, oracle))
            .collect();
        let cost = routes.iter().map(|r| r.length).sum();
        Solution { routes, cost }
    }

    pub fn num_routes(&self) -> usize {
        self.routes.len()
    }

    pub fn num_customers(&self) -> usize {
        self.routes.iter().map(|r| r.len()).sum()
    }

    /// Drops empty routes (kept during editing) and refreshes `cost` from the
    /// route caches.
    pub fn normalize(&mut self) {
        self.routes.retain(|r| !r.is_empty());
        self.cost = self.routes.iter().map(|r| r.length).sum();
    }

    pub fn edges(&self) -> EdgeSet {
        EdgeSet::from_solution(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    CapacityExceeded { route: usize, load: u64, capacity: u32 },
    TimeWindow { route: usize },
    DuplicateCustomer { id: NodeId },
    MissingCustomer { id: NodeId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CapacityExceeded { route, load, capacity } => {
                write!(f, "route {route}: load {load} exceeds capacity {capacity}")
            }
            Violation::TimeWindow { route } => write!(f, "route {route}: time window violated"),
            Violation::DuplicateCustomer { id } => write!(f, "customer {id} visited twice"),
            Violation::MissingCustomer { id } => write!(f, "customer {id} not visited"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub cost: f64,
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Recomputes cost and feasibility from scratch, ignoring all caches.
/// Infeasibility is reported, not an error: population methods keep
/// capacity-infeasible individuals alive.
pub fn evaluate(sol: &Solution, inst: &Instance, oracle: &DistanceOracle) -> Evaluation {
    let mut cost = 0.0;
    let mut violations = Vec::new();
    let mut seen = vec![false; inst.len()];

    for (k, route) in sol.routes.iter().enumerate() {
        cost += route_length(&route.customers, oracle);
        let load: u64 = route.customers.iter().map(|&c| inst.demand(c) as u64).sum();
        if load > inst.capacity as u64 {
            violations.push(Violation::CapacityExceeded {
                route: k,
                load,
                capacity: inst.capacity,
            });
        }
        for &c in &route.customers {
            if seen[c] {
                violations.push(Violation::DuplicateCustomer { id: c });
            }
            seen[c] = true;
        }
        if inst.kind == InstanceKind::Cvrptw && !tw_feasible(&route.customers, inst, oracle) {
            violations.push(Violation::TimeWindow { route: k });
        }
    }
    for c in inst.customers() {
        if !seen[c] {
            violations.push(Violation::MissingCustomer { id: c });
        }
    }
    Evaluation { cost, feasible: violations.is_empty(), violations }
}

/// Relative deviation from a best-known cost, in percent.
pub fn compute_gap(obtained: f64, bks: f64) -> Result<f64> {
    if bks <= 0.0 {
        return Err(Error::Invalid(format!("best-known cost must be positive, got {bks}")));
    }
    Ok((obtained - bks) / bks * 100.0)
}

/// Undirected edges of a solution, with per-edge multiplicity (an
/// out-and-back route uses its depot edge twice).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeSet {
    counts: HashMap<Edge, u32>,
    total: usize,
}

impl EdgeSet {
    pub fn from_solution(sol: &Solution) -> Self {
        let mut set = EdgeSet::default();
        for route in &sol.routes {
            if route.is_empty() {
                continue;
            }
            set.insert(edge(0, route.customers[0]));
            for pair in route.customers.windows(2) {
                set.insert(edge(pair[0], pair[1]));
            }
            set.insert(edge(*route.customers.last().unwrap(), 0));
        }
        set
    }

    pub fn insert(&mut self, e: Edge) {
        *self.counts.entry(e).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn contains(&self, e: Edge) -> bool {
        self.counts.contains_key(&e)
    }

    pub fn multiplicity(&self, e: Edge) -> u32 {
        self.counts.get(&e).copied().unwrap_or(0)
    }

    /// Edge count with multiplicity; equals route length in nodes + 1 summed
    /// over routes.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn distinct_len(&self) -> usize {
        self.counts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Edge, u32)> + '_ {
        self.counts.iter().map(|(&e, &c)| (e, c))
    }

    /// Distinct edges in deterministic order.
    pub fn sorted_edges(&self) -> Vec<Edge> {
        let mut edges: Vec<Edge> = self.counts.keys().copied().collect();
        edges.sort_unstable();
        edges
    }

    /// The customer-customer subset: edges not incident to the depot.
    pub fn customer_customer(&self) -> impl Iterator<Item = Edge> + '_ {
        self.counts.keys().copied().filter(|&(a, _)| a != 0)
    }
}

/// Writes a solution in the conventional text form, one route per line.
pub fn render_solution(sol: &Solution) -> String {
    let mut out = String::new();
    for (k, route) in sol.routes.iter().enumerate() {
        let ids: Vec<String> = route.customers.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("Route #{}: {}\n", k + 1, ids.join(" ")));
    }
    out.push_str(&format!("Cost {}\n", sol.cost));
    out
}

/// Parses the conventional solution text form against an instance.
pub fn parse_solution(text: &str, inst: &Instance, oracle: &DistanceOracle) -> Result<Solution> {
    let mut routes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("Cost") {
            continue;
        }
        let (_, ids) = line
            .split_once(':')
            .ok_or_else(|| Error::parse(i + 1, format!("expected 'Route #k: ...', got '{line}'")))?;
        let customers: Vec<NodeId> = ids
            .split_whitespace()
            .map(|t| {
                t.parse::<NodeId>()
                    .map_err(|_| Error::parse(i + 1, format!("bad customer id '{t}'")))
            })
            .collect::<Result<_>>()?;
        for &c in &customers {
            if c == 0 || c >= inst.len() {
                return Err(Error::parse(i + 1, format!("customer id {c} out of range")));
            }
        }
        routes.push(customers);
    }
    Ok(Solution::from_routes(routes, inst, oracle))
}
