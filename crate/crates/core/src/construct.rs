//! Initial-solution builders: parallel Clarke-Wright savings (optionally
//! restricted to granular neighbor pairs), polar-angle sweep, a randomized
//! giant-tour split used to seed populations, and the greedy route-count
//! estimate driving route minimization.

use crate::instance::{DistanceOracle, Instance, NodeId};
use crate::solution::Solution;
use rand::seq::SliceRandom;
use rand::Rng;

/// Candidate merge pairs with their savings value
/// `s(i,j) = d(0,i) + d(0,j) - d(i,j)`, descending, ties broken
/// lexicographically. When `restricted`, only pairs within granularity of
/// each other are considered, bounding the list by `n * gamma`.
pub fn savings_pairs(
    inst: &Instance,
    oracle: &DistanceOracle,
    restricted: bool,
) -> Vec<(NodeId, NodeId, f64)> {
    let mut pairs = Vec::new();
    let mut push = |i: NodeId, j: NodeId| {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let s = oracle.distance(0, i) + oracle.distance(0, j) - oracle.distance(i, j);
        if s > 0.0 {
            pairs.push((i, j, s));
        }
    };
    if restricted {
        for i in inst.customers() {
            for &j in oracle.neighbors(i) {
                if j != 0 && j > i {
                    push(i, j);
                }
            }
        }
    } else {
        for i in inst.customers() {
            for j in (i + 1)..inst.len() {
                push(i, j);
            }
        }
    }
    pairs.sort_unstable_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    pairs.dedup_by_key(|p| (p.0, p.1));
    pairs
}

/// Clarke-Wright parallel savings construction. Always returns a feasible
/// solution: singleton routes are feasible since every demand fits capacity.
pub fn savings_construct(inst: &Instance, oracle: &DistanceOracle, restricted: bool) -> Solution {
    let n = inst.len();
    let pairs = savings_pairs(inst, oracle, restricted);

    let mut route_of: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<NodeId>> = (0..n).map(|i| if i == 0 { vec![] } else { vec![i] }).collect();
    let mut loads: Vec<u64> = (0..n).map(|i| inst.demand(i) as u64).collect();

    for (i, j, _) in pairs {
        let (ri, rj) = (route_of[i], route_of[j]);
        if ri == rj {
            continue;
        }
        if loads[ri] + loads[rj] > inst.capacity as u64 {
            continue;
        }
        let i_head = members[ri].first() == Some(&i);
        let i_tail = members[ri].last() == Some(&i);
        let j_head = members[rj].first() == Some(&j);
        let j_tail = members[rj].last() == Some(&j);

        // connect i and j by joining route ends, reversing a side if needed
        let (from, into) = if i_tail && j_head {
            (rj, ri)
        } else if j_tail && i_head {
            (ri, rj)
        } else if i_tail && j_tail {
            members[rj].reverse();
            (rj, ri)
        } else if i_head && j_head {
            members[ri].reverse();
            (rj, ri)
        } else {
            continue; // an endpoint is interior to its route
        };

        let mut moved = std::mem::take(&mut members[from]);
        loads[into] += loads[from];
        loads[from] = 0;
        for &c in &moved {
            route_of[c] = into;
        }
        members[into].append(&mut moved);
    }

    let routes: Vec<Vec<NodeId>> = members.into_iter().filter(|m| !m.is_empty()).collect();
    Solution::from_routes(routes, inst, oracle)
}

/// Sweep construction: customers sorted by polar angle around the depot
/// (starting at customer 1's angle), packed greedily into capacity-feasible
/// routes in sweep order.
pub fn sweep_construct(inst: &Instance, oracle: &DistanceOracle) -> Solution {
    let depot = &inst.nodes[0];
    let angle = |c: NodeId| {
        let node = &inst.nodes[c];
        (node.y - depot.y).atan2(node.x - depot.x)
    };
    let start = angle(1);
    let two_pi = std::f64::consts::TAU;
    let mut order: Vec<NodeId> = inst.customers().collect();
    order.sort_by(|&a, &b| {
        let ka = (angle(a) - start).rem_euclid(two_pi);
        let kb = (angle(b) - start).rem_euclid(two_pi);
        ka.partial_cmp(&kb).unwrap().then(a.cmp(&b))
    });

    let mut routes = Vec::new();
    let mut current: Vec<NodeId> = Vec::new();
    let mut load = 0u64;
    for c in order {
        let d = inst.demand(c) as u64;
        if load + d > inst.capacity as u64 && !current.is_empty() {
            routes.push(std::mem::take(&mut current));
            load = 0;
        }
        current.push(c);
        load += d;
    }
    if !current.is_empty() {
        routes.push(current);
    }
    Solution::from_routes(routes, inst, oracle)
}

/// Random giant tour split greedily by capacity; used to diversify
/// population initialization and restarts.
pub fn random_solution<R: Rng>(inst: &Instance, oracle: &DistanceOracle, rng: &mut R) -> Solution {
    let mut order: Vec<NodeId> = inst.customers().collect();
    order.shuffle(rng);
    split_giant_tour(&order, inst, oracle)
}

/// Packs a giant tour into consecutive capacity-feasible routes.
pub fn split_giant_tour(tour: &[NodeId], inst: &Instance, oracle: &DistanceOracle) -> Solution {
    let mut routes = Vec::new();
    let mut current: Vec<NodeId> = Vec::new();
    let mut load = 0u64;
    for &c in tour {
        let d = inst.demand(c) as u64;
        if load + d > inst.capacity as u64 && !current.is_empty() {
            routes.push(std::mem::take(&mut current));
            load = 0;
        }
        current.push(c);
        load += d;
    }
    if !current.is_empty() {
        routes.push(current);
    }
    Solution::from_routes(routes, inst, oracle)
}

/// Lower-bound-style route count: `ceil(total demand / capacity)`.
pub fn greedy_route_estimate(inst: &Instance) -> usize {
    let total = inst.total_demand();
    let q = inst.capacity as u64;
    ((total + q - 1) / q) as usize
}
