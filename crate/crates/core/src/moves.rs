//! Local-search moves over a solution: relocate, swap, intra-route 2-opt and
//! inter-route 2-opt* (tail exchange).
//!
//! Every move carries the exact net sets of removed and added undirected
//! edges; the cost delta is their distance difference, which is exact in
//! integer-distance mode. Edges that a move removes and re-adds (for example
//! the inner edge of an adjacent swap) cancel and appear in neither set, so
//! the tabu filter only sees edges that actually leave the solution.

use crate::instance::{DistanceOracle, Instance, NodeId};
use crate::solution::{edge, Edge, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Relocate,
    Swap,
    TwoOpt,
    TwoOptStar,
}

pub const ALL_KINDS: [MoveKind; 4] =
    [MoveKind::Relocate, MoveKind::Swap, MoveKind::TwoOpt, MoveKind::TwoOptStar];

/// How to apply a move; positions refer to the solution it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MoveSpec {
    /// Remove the customer at `from` and insert it so it occupies index
    /// `to.1` of route `to.0` (index taken before the removal).
    Relocate { from: (usize, usize), to: (usize, usize) },
    Swap { a: (usize, usize), b: (usize, usize) },
    /// Reverse `customers[start..=end]` of one route.
    TwoOpt { route: usize, start: usize, end: usize },
    /// Swap route tails: `a[cut_a..]` and `b[cut_b..]`.
    TwoOptStar { route_a: usize, cut_a: usize, route_b: usize, cut_b: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Move {
    pub kind: MoveKind,
    pub spec: MoveSpec,
    /// Net removed edges (no longer present after the move).
    pub removed: Vec<Edge>,
    /// Net added edges (newly present after the move).
    pub added: Vec<Edge>,
    /// Exact cost change: sum of added minus sum of removed distances.
    pub delta: f64,
    /// Loads of the affected routes after the move.
    pub new_loads: Vec<(usize, u64)>,
}

/// Node occupying `pos` of `customers`, with the depot beyond both ends.
fn node_at(customers: &[NodeId], pos: isize) -> NodeId {
    if pos < 0 || pos as usize >= customers.len() {
        0
    } else {
        customers[pos as usize]
    }
}

fn route_load(customers: &[NodeId], inst: &Instance) -> u64 {
    customers.iter().map(|&c| inst.demand(c) as u64).sum()
}

/// Drops (0,0) pseudo-edges (a vanishing route has no depot loop) and cancels
/// edges appearing on both sides, leaving only the net change.
fn finish(
    kind: MoveKind,
    spec: MoveSpec,
    mut removed: Vec<Edge>,
    mut added: Vec<Edge>,
    new_loads: Vec<(usize, u64)>,
    oracle: &DistanceOracle,
) -> Option<Move> {
    removed.retain(|&e| e != (0, 0));
    added.retain(|&e| e != (0, 0));
    let mut i = 0;
    while i < removed.len() {
        if let Some(k) = added.iter().position(|&e| e == removed[i]) {
            added.swap_remove(k);
            removed.swap_remove(i);
        } else {
            i += 1;
        }
    }
    if removed.is_empty() && added.is_empty() {
        return None; // structurally a no-op
    }
    let delta: f64 = added.iter().map(|&(a, b)| oracle.distance(a, b)).sum::<f64>()
        - removed.iter().map(|&(a, b)| oracle.distance(a, b)).sum::<f64>();
    Some(Move { kind, spec, removed, added, delta, new_loads })
}

/// Builds the relocate of `sol.routes[ru][pu]` into slot `it` of route `rt`
/// (slot index taken before the removal). Returns `None` for no-ops.
pub fn relocate_move(
    sol: &Solution,
    inst: &Instance,
    oracle: &DistanceOracle,
    (ru, pu): (usize, usize),
    (rt, it): (usize, usize),
) -> Option<Move> {
    let src = &sol.routes[ru].customers;
    let dst = &sol.routes[rt].customers;
    if rt == ru && (it == pu || it == pu + 1) {
        return None;
    }
    let u = src[pu];
    let prev_u = node_at(src, pu as isize - 1);
    let next_u = node_at(src, pu as isize + 1);
    let a = node_at(dst, it as isize - 1);
    let b = node_at(dst, it as isize);

    let removed = vec![edge(prev_u, u), edge(u, next_u), edge(a, b)];
    let added = vec![edge(prev_u, next_u), edge(a, u), edge(u, b)];

    let demand = inst.demand(u) as u64;
    let new_loads = if ru == rt {
        vec![(ru, sol.routes[ru].load)]
    } else {
        vec![(ru, sol.routes[ru].load - demand), (rt, sol.routes[rt].load + demand)]
    };
    finish(
        MoveKind::Relocate,
        MoveSpec::Relocate { from: (ru, pu), to: (rt, it) },
        removed,
        added,
        new_loads,
        oracle,
    )
}

/// Builds the swap of two distinct customers.
pub fn swap_move(
    sol: &Solution,
    inst: &Instance,
    oracle: &DistanceOracle,
    (ra, pa): (usize, usize),
    (rb, pb): (usize, usize),
) -> Option<Move> {
    if (ra, pa) == (rb, pb) {
        return None;
    }
    let ca = &sol.routes[ra].customers;
    let cb = &sol.routes[rb].customers;
    let (u, w) = (ca[pa], cb[pb]);

    let (removed, added) = if ra == rb && pa.abs_diff(pb) == 1 {
        // adjacent in one route: the inner edge survives
        let (first, second) = if pa < pb { (pa, pb) } else { (pb, pa) };
        let (x, y) = (ca[first], ca[second]);
        let prev = node_at(ca, first as isize - 1);
        let next = node_at(ca, second as isize + 1);
        (vec![edge(prev, x), edge(y, next)], vec![edge(prev, y), edge(x, next)])
    } else {
        let prev_u = node_at(ca, pa as isize - 1);
        let next_u = node_at(ca, pa as isize + 1);
        let prev_w = node_at(cb, pb as isize - 1);
        let next_w = node_at(cb, pb as isize + 1);
        (
            vec![edge(prev_u, u), edge(u, next_u), edge(prev_w, w), edge(w, next_w)],
            vec![edge(prev_u, w), edge(w, next_u), edge(prev_w, u), edge(u, next_w)],
        )
    };

    let (du, dw) = (inst.demand(u) as u64, inst.demand(w) as u64);
    let new_loads = if ra == rb {
        vec![(ra, sol.routes[ra].load)]
    } else {
        vec![(ra, sol.routes[ra].load - du + dw), (rb, sol.routes[rb].load - dw + du)]
    };
    finish(
        MoveKind::Swap,
        MoveSpec::Swap { a: (ra, pa), b: (rb, pb) },
        removed,
        added,
        new_loads,
        oracle,
    )
}

/// Builds the intra-route reversal of `customers[start..=end]`.
pub fn two_opt_move(
    sol: &Solution,
    oracle: &DistanceOracle,
    route: usize,
    start: usize,
    end: usize,
) -> Option<Move> {
    if start >= end {
        return None;
    }
    let c = &sol.routes[route].customers;
    let prev = node_at(c, start as isize - 1);
    let next = node_at(c, end as isize + 1);
    let removed = vec![edge(prev, c[start]), edge(c[end], next)];
    let added = vec![edge(prev, c[end]), edge(c[start], next)];
    let new_loads = vec![(route, sol.routes[route].load)];
    finish(
        MoveKind::TwoOpt,
        MoveSpec::TwoOpt { route, start, end },
        removed,
        added,
        new_loads,
        oracle,
    )
}

/// Builds the inter-route tail exchange at the given cut points.
pub fn two_opt_star_move(
    sol: &Solution,
    inst: &Instance,
    oracle: &DistanceOracle,
    route_a: usize,
    cut_a: usize,
    route_b: usize,
    cut_b: usize,
) -> Option<Move> {
    if route_a == route_b {
        return None;
    }
    let ca = &sol.routes[route_a].customers;
    let cb = &sol.routes[route_b].customers;
    let ha = node_at(ca, cut_a as isize - 1);
    let ta = node_at(ca, cut_a as isize);
    let hb = node_at(cb, cut_b as isize - 1);
    let tb = node_at(cb, cut_b as isize);

    let removed = vec![edge(ha, ta), edge(hb, tb)];
    let added = vec![edge(ha, tb), edge(hb, ta)];

    let tail_a: u64 = route_load(&ca[cut_a..], inst);
    let tail_b: u64 = route_load(&cb[cut_b..], inst);
    let new_loads = vec![
        (route_a, sol.routes[route_a].load - tail_a + tail_b),
        (route_b, sol.routes[route_b].load - tail_b + tail_a),
    ];
    finish(
        MoveKind::TwoOptStar,
        MoveSpec::TwoOptStar { route_a, cut_a, route_b, cut_b },
        removed,
        added,
        new_loads,
        oracle,
    )
}

/// Node id -> (route, position) for every routed customer.
pub fn position_index(sol: &Solution, num_nodes: usize) -> Vec<Option<(usize, usize)>> {
    let mut pos = vec![None; num_nodes];
    for (r, route) in sol.routes.iter().enumerate() {
        for (p, &c) in route.customers.iter().enumerate() {
            pos[c] = Some((r, p));
        }
    }
    pos
}

/// Generates the candidate moves of one kind pairing customer `u` with its
/// granular neighbor `v`, pushing them into `out`.
pub fn pair_moves(
    sol: &Solution,
    inst: &Instance,
    oracle: &DistanceOracle,
    kind: MoveKind,
    u: NodeId,
    v: NodeId,
    pos: &[Option<(usize, usize)>],
    out: &mut Vec<Move>,
) {
    if v == 0 || u == v {
        return;
    }
    let (Some(&Some((ru, pu))), Some(&Some((rv, pv)))) = (pos.get(u), pos.get(v)) else {
        return;
    };
    match kind {
        MoveKind::Relocate => {
            // insert u right before and right after v
            for slot in [pv, pv + 1] {
                if let Some(mv) = relocate_move(sol, inst, oracle, (ru, pu), (rv, slot)) {
                    out.push(mv);
                }
            }
        }
        MoveKind::Swap => {
            if let Some(mv) = swap_move(sol, inst, oracle, (ru, pu), (rv, pv)) {
                out.push(mv);
            }
        }
        MoveKind::TwoOpt => {
            if ru == rv {
                let (s, e) = if pu < pv { (pu + 1, pv) } else { (pv + 1, pu) };
                if let Some(mv) = two_opt_move(sol, oracle, ru, s, e) {
                    out.push(mv);
                }
            }
        }
        MoveKind::TwoOptStar => {
            if ru != rv {
                // reconnect u -> v, and symmetrically v -> u
                for (ca, cb) in [(pu + 1, pv), (pu, pv + 1)] {
                    if let Some(mv) = two_opt_star_move(sol, inst, oracle, ru, ca, rv, cb) {
                        out.push(mv);
                    }
                }
            }
        }
    }
}

/// Snapshot enumeration of all granular moves of one kind: every customer
/// paired with its neighbors within granularity, in rank order.
pub fn enumerate_moves(
    sol: &Solution,
    inst: &Instance,
    oracle: &DistanceOracle,
    kind: MoveKind,
) -> Vec<Move> {
    let pos = position_index(sol, inst.len());
    let mut out = Vec::new();
    for u in inst.customers() {
        for &v in oracle.neighbors(u) {
            pair_moves(sol, inst, oracle, kind, u, v, &pos, &mut out);
        }
    }
    out
}

/// Applies a move in place, updating route caches and the incremental cost.
/// Empty routes are kept (callers normalize at safe points) so route indices
/// stay valid for subsequent moves built from the same state.
pub fn apply_move(sol: &mut Solution, mv: &Move, inst: &Instance, oracle: &DistanceOracle) {
    match mv.spec {
        MoveSpec::Relocate { from: (ru, pu), to: (rt, mut it) } => {
            let u = sol.routes[ru].customers.remove(pu);
            if rt == ru && it > pu {
                it -= 1;
            }
            sol.routes[rt].customers.insert(it, u);
            sol.routes[ru].refresh(inst, oracle);
            if rt != ru {
                sol.routes[rt].refresh(inst, oracle);
            }
        }
        MoveSpec::Swap { a: (ra, pa), b: (rb, pb) } => {
            let u = sol.routes[ra].customers[pa];
            let w = sol.routes[rb].customers[pb];
            sol.routes[ra].customers[pa] = w;
            sol.routes[rb].customers[pb] = u;
            sol.routes[ra].refresh(inst, oracle);
            if ra != rb {
                sol.routes[rb].refresh(inst, oracle);
            }
        }
        MoveSpec::TwoOpt { route, start, end } => {
            sol.routes[route].customers[start..=end].reverse();
            sol.routes[route].refresh(inst, oracle);
        }
        MoveSpec::TwoOptStar { route_a, cut_a, route_b, cut_b } => {
            let tail_a = sol.routes[route_a].customers.split_off(cut_a);
            let tail_b = sol.routes[route_b].customers.split_off(cut_b);
            sol.routes[route_a].customers.extend(tail_b);
            sol.routes[route_b].customers.extend(tail_a);
            sol.routes[route_a].refresh(inst, oracle);
            sol.routes[route_b].refresh(inst, oracle);
        }
    }
    sol.cost += mv.delta;
}
