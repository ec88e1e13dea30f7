//! Per-edge features feeding the tabular classifiers. Four features per
//! customer-customer solution edge: demand share of the whole instance,
//! demand share of the owning route, granular neighbor rank (with a -1
//! sentinel beyond granularity) and the edge's share of the solution cost.

use crate::error::{Error, Result};
use crate::instance::{DistanceOracle, Instance};
use crate::solution::{edge, Edge, Solution};

pub const NUM_FEATURES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFeatures {
    /// (q_i + q_j) / total instance demand.
    pub percentage_load: f64,
    /// (q_i + q_j) / demand of the route holding the edge.
    pub utilization_edge: f64,
    /// Neighbor rank of the edge within granularity, else -1.
    pub neighborhood_rank: f64,
    /// d(i,j) / total solution cost.
    pub percentage_distance: f64,
}

impl EdgeFeatures {
    pub fn as_array(&self) -> [f64; NUM_FEATURES] {
        [
            self.percentage_load,
            self.utilization_edge,
            self.neighborhood_rank,
            self.percentage_distance,
        ]
    }
}

fn build(
    e: Edge,
    route_load: u64,
    sol_cost: f64,
    inst: &Instance,
    oracle: &DistanceOracle,
) -> EdgeFeatures {
    let (i, j) = e;
    let pair_demand = (inst.demand(i) + inst.demand(j)) as f64;
    let total = inst.total_demand() as f64;
    let percentage_load = if total > 0.0 { pair_demand / total } else { 0.0 };
    let utilization_edge = if route_load > 0 { pair_demand / route_load as f64 } else { 0.0 };
    // rank taken in canonical (lower id -> higher id) direction
    let neighborhood_rank = oracle.neighbor_rank(i, j) as f64;
    let percentage_distance =
        if sol_cost > 0.0 { oracle.distance(i, j) / sol_cost } else { 0.0 };
    EdgeFeatures { percentage_load, utilization_edge, neighborhood_rank, percentage_distance }
}

/// Features of one customer-customer edge of `sol`; errors when the edge is
/// not part of the solution (or touches the depot).
pub fn extract_features(
    sol: &Solution,
    e: Edge,
    inst: &Instance,
    oracle: &DistanceOracle,
) -> Result<EdgeFeatures> {
    let e = edge(e.0, e.1);
    if e.0 == 0 {
        return Err(Error::Invalid(format!(
            "edge {e:?} touches the depot; features are defined between customers"
        )));
    }
    for route in &sol.routes {
        let adjacent = route
            .customers
            .windows(2)
            .any(|w| edge(w[0], w[1]) == e);
        if adjacent {
            return Ok(build(e, route.load, sol.cost, inst, oracle));
        }
    }
    Err(Error::Invalid(format!("edge {e:?} is not part of the solution")))
}

/// Features for every customer-customer edge of the solution, in route order.
pub fn solution_features(
    sol: &Solution,
    inst: &Instance,
    oracle: &DistanceOracle,
) -> Vec<(Edge, EdgeFeatures)> {
    let mut out = Vec::new();
    for route in &sol.routes {
        for w in route.customers.windows(2) {
            let e = edge(w[0], w[1]);
            out.push((e, build(e, route.load, sol.cost, inst, oracle)));
        }
    }
    out
}
