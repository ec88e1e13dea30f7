//! Granular local-search engine: first-improvement descent or simulated
//! annealing over the granular move neighborhood, filtered by a tabu-edge
//! set with probabilistic aspiration, plus the perturbation operators used
//! between descents.

use crate::instance::{DistanceOracle, Instance, InstanceKind, NodeId};
use crate::moves::{apply_move, pair_moves, position_index, Move, MoveKind, MoveSpec, ALL_KINDS};
use crate::solution::{edge, tw_feasible, tw_violation, Edge, Solution};
use rand::Rng;
use std::collections::HashSet;

const IMPROVE_EPS: f64 = 1e-10;

/// Fixed-edge filter: a move is tabu iff it would remove a fixed edge.
/// A blocked move may still fire when the aspiration draw exceeds `p_theta`.
#[derive(Debug, Clone)]
pub struct TabuEdgeFilter {
    fixed: HashSet<Edge>,
    p_theta: f64,
}

impl TabuEdgeFilter {
    /// `p_theta = 1.0` disables aspiration entirely.
    pub fn new(fixed: HashSet<Edge>, p_theta: f64) -> Self {
        assert!((0.0..=1.0).contains(&p_theta), "p_theta must lie in [0,1]");
        TabuEdgeFilter { fixed, p_theta }
    }

    pub fn empty() -> Self {
        TabuEdgeFilter { fixed: HashSet::new(), p_theta: 1.0 }
    }

    pub fn fixed_edges(&self) -> &HashSet<Edge> {
        &self.fixed
    }

    pub fn p_theta(&self) -> f64 {
        self.p_theta
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }

    /// Checks a set of edges about to be removed. Draws the aspiration
    /// uniform only when blocked; aspired iff the draw exceeds `p_theta`.
    pub fn check_edges<R: Rng>(&self, removed: &[Edge], rng: &mut R) -> (bool, bool) {
        let blocked = !self.fixed.is_empty() && removed.iter().any(|e| self.fixed.contains(e));
        if !blocked {
            return (false, false);
        }
        let aspired = rng.gen::<f64>() > self.p_theta;
        (true, aspired)
    }

    /// True when the edges may be removed (not blocked, or aspired).
    pub fn allows<R: Rng>(&self, removed: &[Edge], rng: &mut R) -> bool {
        let (blocked, aspired) = self.check_edges(removed, rng);
        !blocked || aspired
    }
}

/// Tabu status of one move: `(blocked, aspired)`.
pub fn is_blocked<R: Rng>(mv: &Move, filter: &TabuEdgeFilter, rng: &mut R) -> (bool, bool) {
    filter.check_edges(&mv.removed, rng)
}

/// Simulated-annealing schedule: Metropolis acceptance of worsening moves
/// with geometric cooling per accepted move.
#[derive(Debug, Clone, Copy)]
pub struct SaParams {
    pub t0: f64,
    pub cooling: f64,
    pub floor: f64,
    /// Hard cap on accepted moves per descent call.
    pub max_moves: u64,
}

impl SaParams {
    /// Declared default schedule: T0 scales with average route-leg cost.
    pub fn for_instance(initial_cost: f64, n: usize) -> Self {
        SaParams {
            t0: 0.1 * initial_cost / n.max(1) as f64,
            cooling: 0.999,
            floor: 1e-6,
            max_moves: 2_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Acceptance {
    /// Accept strictly improving moves only.
    Descent,
    /// Metropolis rule on the effective delta.
    Anneal(SaParams),
}

/// Engine configuration for one `descend` call.
#[derive(Debug, Clone)]
pub struct SearchParams {
    pub kinds: Vec<MoveKind>,
    pub acceptance: Acceptance,
    /// `None`: reject capacity-infeasible moves outright. `Some(w)`: allow
    /// them, charging `w` per unit of capacity excess.
    pub capacity_penalty: Option<f64>,
    /// Same for time windows, charged per unit of lateness. Ignored on CVRP.
    pub tw_penalty: Option<f64>,
}

impl SearchParams {
    pub fn descent() -> Self {
        SearchParams {
            kinds: ALL_KINDS.to_vec(),
            acceptance: Acceptance::Descent,
            capacity_penalty: None,
            tw_penalty: None,
        }
    }

    pub fn anneal(sa: SaParams) -> Self {
        SearchParams { acceptance: Acceptance::Anneal(sa), ..SearchParams::descent() }
    }
}

/// Customer sequences of the routes a move touches, after the move.
fn preview_routes(sol: &Solution, mv: &Move) -> Vec<(usize, Vec<NodeId>)> {
    match mv.spec {
        MoveSpec::Relocate { from: (ru, pu), to: (rt, mut it) } => {
            let mut src = sol.routes[ru].customers.clone();
            let u = src.remove(pu);
            if rt == ru {
                if it > pu {
                    it -= 1;
                }
                src.insert(it, u);
                vec![(ru, src)]
            } else {
                let mut dst = sol.routes[rt].customers.clone();
                dst.insert(it, u);
                vec![(ru, src), (rt, dst)]
            }
        }
        MoveSpec::Swap { a: (ra, pa), b: (rb, pb) } => {
            if ra == rb {
                let mut r = sol.routes[ra].customers.clone();
                r.swap(pa, pb);
                vec![(ra, r)]
            } else {
                let mut ca = sol.routes[ra].customers.clone();
                let mut cb = sol.routes[rb].customers.clone();
                std::mem::swap(&mut ca[pa], &mut cb[pb]);
                vec![(ra, ca), (rb, cb)]
            }
        }
        MoveSpec::TwoOpt { route, start, end } => {
            let mut r = sol.routes[route].customers.clone();
            r[start..=end].reverse();
            vec![(route, r)]
        }
        MoveSpec::TwoOptStar { route_a, cut_a, route_b, cut_b } => {
            let ca = &sol.routes[route_a].customers;
            let cb = &sol.routes[route_b].customers;
            let mut na = ca[..cut_a].to_vec();
            na.extend_from_slice(&cb[cut_b..]);
            let mut nb = cb[..cut_b].to_vec();
            nb.extend_from_slice(&ca[cut_a..]);
            vec![(route_a, na), (route_b, nb)]
        }
    }
}

struct MoveJudge<'a> {
    inst: &'a Instance,
    oracle: &'a DistanceOracle,
    params: &'a SearchParams,
}

impl MoveJudge<'_> {
    /// Penalized cost change, or `None` when the move is hard-infeasible.
    fn effective_delta(&self, sol: &Solution, mv: &Move) -> Option<f64> {
        let mut eff = mv.delta;
        let capacity = self.inst.capacity as u64;
        match self.params.capacity_penalty {
            None => {
                for &(r, new_load) in &mv.new_loads {
                    if new_load > capacity && new_load > sol.routes[r].load {
                        return None;
                    }
                }
            }
            Some(w) => {
                for &(r, new_load) in &mv.new_loads {
                    let old = sol.routes[r].load.saturating_sub(capacity) as f64;
                    let new = new_load.saturating_sub(capacity) as f64;
                    eff += w * (new - old);
                }
            }
        }
        if self.inst.kind == InstanceKind::Cvrptw {
            match self.params.tw_penalty {
                None => {
                    for (r, seq) in preview_routes(sol, mv) {
                        // only newly broken routes are rejected
                        if !tw_feasible(&seq, self.inst, self.oracle)
                            && sol.routes[r].tw_ok
                        {
                            return None;
                        }
                    }
                }
                Some(w) => {
                    for (r, seq) in preview_routes(sol, mv) {
                        let old = tw_violation(&sol.routes[r].customers, self.inst, self.oracle);
                        let new = tw_violation(&seq, self.inst, self.oracle);
                        eff += w * (new - old);
                    }
                }
            }
        }
        Some(eff)
    }
}

/// Improves `sol` in place until no unblocked improving move of the enabled
/// kinds exists (descent) or the annealing budget is exhausted. Returns the
/// number of accepted moves. The partition invariant is preserved move by
/// move; empty routes are dropped before returning.
pub fn descend<R: Rng>(
    sol: &mut Solution,
    inst: &Instance,
    oracle: &DistanceOracle,
    filter: Option<&TabuEdgeFilter>,
    params: &SearchParams,
    rng: &mut R,
) -> u64 {
    let judge = MoveJudge { inst, oracle, params };
    let mut pos = position_index(sol, inst.len());
    let mut accepted: u64 = 0;
    let mut temp = match params.acceptance {
        Acceptance::Anneal(sa) => sa.t0.max(sa.floor),
        Acceptance::Descent => 0.0,
    };
    let mut buf: Vec<Move> = Vec::with_capacity(8);

    'outer: loop {
        let mut accepted_this_pass = false;
        for u in inst.customers() {
            for &v in oracle.neighbors(u) {
                for &kind in &params.kinds {
                    buf.clear();
                    pair_moves(sol, inst, oracle, kind, u, v, &pos, &mut buf);
                    let mut chosen: Option<Move> = None;
                    for mv in &buf {
                        let Some(eff) = judge.effective_delta(sol, mv) else {
                            continue;
                        };
                        let take = if eff < -IMPROVE_EPS {
                            filter.map_or(true, |f| f.allows(&mv.removed, rng))
                        } else if let Acceptance::Anneal(_) = params.acceptance {
                            rng.gen::<f64>() < (-eff / temp).exp()
                                && filter.map_or(true, |f| f.allows(&mv.removed, rng))
                        } else {
                            false
                        };
                        if take {
                            chosen = Some(mv.clone());
                            break;
                        }
                    }
                    if let Some(mv) = chosen {
                        apply_move(sol, &mv, inst, oracle);
                        for &(r, _) in &mv.new_loads {
                            for (p, &c) in sol.routes[r].customers.iter().enumerate() {
                                pos[c] = Some((r, p));
                            }
                        }
                        accepted += 1;
                        accepted_this_pass = true;
                        if let Acceptance::Anneal(sa) = params.acceptance {
                            temp = (temp * sa.cooling).max(sa.floor);
                            if accepted >= sa.max_moves {
                                break 'outer;
                            }
                        }
                    }
                }
            }
        }
        if !accepted_this_pass {
            break;
        }
    }
    sol.normalize();
    accepted
}

/// Perturbation between descents: a double bridge inside one route or a
/// segment exchange across two routes. Both preserve the partition and
/// capacity feasibility, respect the tabu filter (with aspiration) and keep
/// hard TW feasibility on CVRPTW. Returns the number of operations applied.
pub fn perturb<R: Rng>(
    sol: &mut Solution,
    inst: &Instance,
    oracle: &DistanceOracle,
    filter: Option<&TabuEdgeFilter>,
    strength: usize,
    rng: &mut R,
) -> usize {
    let mut applied = 0;
    for _ in 0..strength {
        let mut done = false;
        for _ in 0..12 {
            let op: bool = rng.gen();
            done = if op && sol.routes.iter().any(|r| r.len() >= 4) {
                try_double_bridge(sol, inst, oracle, filter, rng)
            } else {
                try_segment_exchange(sol, inst, oracle, filter, rng)
            };
            if done {
                break;
            }
        }
        if done {
            applied += 1;
        }
    }
    sol.normalize();
    applied
}

fn seq_edges(customers: &[NodeId]) -> Vec<Edge> {
    if customers.is_empty() {
        return Vec::new();
    }
    let mut edges = Vec::with_capacity(customers.len() + 1);
    edges.push(edge(0, customers[0]));
    for pair in customers.windows(2) {
        edges.push(edge(pair[0], pair[1]));
    }
    edges.push(edge(*customers.last().unwrap(), 0));
    edges
}

/// Net removed/added edges between old and new versions of the same routes.
fn edge_diff(old: &[&[NodeId]], new: &[&[NodeId]]) -> (Vec<Edge>, Vec<Edge>) {
    let mut removed: Vec<Edge> = old.iter().flat_map(|r| seq_edges(r)).collect();
    let mut added: Vec<Edge> = new.iter().flat_map(|r| seq_edges(r)).collect();
    let mut i = 0;
    while i < removed.len() {
        if let Some(k) = added.iter().position(|&e| e == removed[i]) {
            added.swap_remove(k);
            removed.swap_remove(i);
        } else {
            i += 1;
        }
    }
    (removed, added)
}

fn replace_route(
    sol: &mut Solution,
    r: usize,
    customers: Vec<NodeId>,
    delta: f64,
    inst: &Instance,
    oracle: &DistanceOracle,
) {
    sol.routes[r].customers = customers;
    sol.routes[r].refresh(inst, oracle);
    sol.cost += delta;
}

fn try_double_bridge<R: Rng>(
    sol: &mut Solution,
    inst: &Instance,
    oracle: &DistanceOracle,
    filter: Option<&TabuEdgeFilter>,
    rng: &mut R,
) -> bool {
    let candidates: Vec<usize> =
        (0..sol.routes.len()).filter(|&r| sol.routes[r].len() >= 4).collect();
    if candidates.is_empty() {
        return false;
    }
    let r = candidates[rng.gen_range(0..candidates.len())];
    let old = sol.routes[r].customers.clone();
    let len = old.len();
    let mut cuts = [rng.gen_range(1..len), rng.gen_range(1..len), rng.gen_range(1..len)];
    cuts.sort_unstable();
    let [a, b, c] = cuts;
    if a == b || b == c {
        return false;
    }
    let mut new = Vec::with_capacity(len);
    new.extend_from_slice(&old[..a]);
    new.extend_from_slice(&old[b..c]);
    new.extend_from_slice(&old[a..b]);
    new.extend_from_slice(&old[c..]);

    let (removed, added) = edge_diff(&[&old], &[&new]);
    if removed.is_empty() {
        return false;
    }
    if let Some(f) = filter {
        if !f.allows(&removed, rng) {
            return false;
        }
    }
    if inst.kind == InstanceKind::Cvrptw && !tw_feasible(&new, inst, oracle) {
        return false;
    }
    let delta: f64 = added.iter().map(|&(x, y)| oracle.distance(x, y)).sum::<f64>()
        - removed.iter().map(|&(x, y)| oracle.distance(x, y)).sum::<f64>();
    replace_route(sol, r, new, delta, inst, oracle);
    true
}

fn try_segment_exchange<R: Rng>(
    sol: &mut Solution,
    inst: &Instance,
    oracle: &DistanceOracle,
    filter: Option<&TabuEdgeFilter>,
    rng: &mut R,
) -> bool {
    if sol.routes.len() < 2 {
        return false;
    }
    let ra = rng.gen_range(0..sol.routes.len());
    let rb = rng.gen_range(0..sol.routes.len());
    if ra == rb {
        return false;
    }
    let (la, lb) = (sol.routes[ra].len(), sol.routes[rb].len());
    if la == 0 || lb == 0 {
        return false;
    }
    let sa_len = rng.gen_range(1..=la.min(3));
    let sb_len = rng.gen_range(1..=lb.min(3));
    let sa = rng.gen_range(0..=la - sa_len);
    let sb = rng.gen_range(0..=lb - sb_len);

    let old_a = sol.routes[ra].customers.clone();
    let old_b = sol.routes[rb].customers.clone();
    let mut new_a: Vec<NodeId> = old_a[..sa].to_vec();
    new_a.extend_from_slice(&old_b[sb..sb + sb_len]);
    new_a.extend_from_slice(&old_a[sa + sa_len..]);
    let mut new_b: Vec<NodeId> = old_b[..sb].to_vec();
    new_b.extend_from_slice(&old_a[sa..sa + sa_len]);
    new_b.extend_from_slice(&old_b[sb + sb_len..]);

    let load = |seq: &[NodeId]| seq.iter().map(|&c| inst.demand(c) as u64).sum::<u64>();
    if load(&new_a) > inst.capacity as u64 || load(&new_b) > inst.capacity as u64 {
        return false;
    }
    let (removed, added) = edge_diff(&[&old_a, &old_b], &[&new_a, &new_b]);
    if removed.is_empty() {
        return false;
    }
    if let Some(f) = filter {
        if !f.allows(&removed, rng) {
            return false;
        }
    }
    if inst.kind == InstanceKind::Cvrptw
        && (!tw_feasible(&new_a, inst, oracle) || !tw_feasible(&new_b, inst, oracle))
    {
        return false;
    }
    let delta: f64 = added.iter().map(|&(x, y)| oracle.distance(x, y)).sum::<f64>()
        - removed.iter().map(|&(x, y)| oracle.distance(x, y)).sum::<f64>();
    replace_route(sol, ra, new_a, 0.0, inst, oracle);
    replace_route(sol, rb, new_b, delta, inst, oracle);
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{random_solution, savings_construct};
    use crate::generate::{generate_instance, CustomerDistribution, DemandProfile, DepotPosition};
    use crate::instance::DistanceMode;
    use crate::moves::enumerate_moves;
    use crate::solution::evaluate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64, n: usize) -> (Instance, DistanceOracle) {
        let inst = generate_instance(
            seed,
            n,
            DepotPosition::Central,
            CustomerDistribution::Random,
            DemandProfile::SmallSpread,
        );
        let oracle = DistanceOracle::new(&inst, DistanceMode::RoundedEuclidean, 25);
        (inst, oracle)
    }

    #[test]
    fn unblocked_move_reports_false_false() {
        let (inst, oracle) = setup(0, 10);
        let sol = savings_construct(&inst, &oracle, false);
        let filter = TabuEdgeFilter::new(HashSet::new(), 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for mv in enumerate_moves(&sol, &inst, &oracle, MoveKind::Relocate).iter().take(10) {
            assert_eq!(is_blocked(mv, &filter, &mut rng), (false, false));
        }
    }

    #[test]
    fn full_aspiration_off_always_blocks() {
        let (inst, oracle) = setup(1, 10);
        let sol = savings_construct(&inst, &oracle, false);
        let fixed: HashSet<Edge> = sol.edges().iter().map(|(e, _)| e).collect();
        let filter = TabuEdgeFilter::new(fixed, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut blocked_seen = 0;
        for kind in ALL_KINDS {
            for mv in enumerate_moves(&sol, &inst, &oracle, kind) {
                let (blocked, aspired) = is_blocked(&mv, &filter, &mut rng);
                assert!(blocked, "every move removes a solution edge here");
                assert!(!aspired, "p_theta = 1 never aspires");
                blocked_seen += 1;
            }
        }
        assert!(blocked_seen > 0);
    }

    #[test]
    fn aspiration_rate_tracks_one_minus_p_theta() {
        let filter = TabuEdgeFilter::new(HashSet::from([(1, 2)]), 0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 20_000;
        let mut aspired = 0;
        for _ in 0..draws {
            let (blocked, asp) = filter.check_edges(&[(1, 2)], &mut rng);
            assert!(blocked);
            if asp {
                aspired += 1;
            }
        }
        let rate = aspired as f64 / draws as f64;
        assert!((rate - 0.2).abs() < 0.02, "aspiration rate {rate}");
    }

    #[test]
    fn descent_never_increases_cost_and_reaches_fixpoint() {
        for seed in 0..5 {
            let (inst, oracle) = setup(seed, 30);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sol = random_solution(&inst, &oracle, &mut rng);
            let start = sol.cost;
            let params = SearchParams::descent();
            descend(&mut sol, &inst, &oracle, None, &params, &mut rng);
            assert!(sol.cost <= start);
            let eval = evaluate(&sol, &inst, &oracle);
            assert!(eval.feasible, "{:?}", eval.violations);
            assert_eq!(eval.cost, sol.cost);
            // local optimum: a second descent changes nothing
            let frozen = sol.clone();
            let accepted = descend(&mut sol, &inst, &oracle, None, &params, &mut rng);
            assert_eq!(accepted, 0);
            assert_eq!(sol, frozen);
        }
    }

    #[test]
    fn all_edges_fixed_without_aspiration_freezes_the_solution() {
        let (inst, oracle) = setup(3, 25);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sol = random_solution(&inst, &oracle, &mut rng);
        let fixed: HashSet<Edge> = sol.edges().iter().map(|(e, _)| e).collect();
        let filter = TabuEdgeFilter::new(fixed, 1.0);
        let frozen = sol.clone();
        descend(&mut sol, &inst, &oracle, Some(&filter), &SearchParams::descent(), &mut rng);
        assert_eq!(sol, frozen);
    }

    #[test]
    fn empty_filter_matches_no_filter_trajectory() {
        let (inst, oracle) = setup(4, 30);
        let mut sol_a = random_solution(&inst, &oracle, &mut ChaCha8Rng::seed_from_u64(5));
        let mut sol_b = sol_a.clone();
        let params = SearchParams::descent();
        let mut rng_a = ChaCha8Rng::seed_from_u64(42);
        let mut rng_b = ChaCha8Rng::seed_from_u64(42);
        let filter = TabuEdgeFilter::empty();
        let a = descend(&mut sol_a, &inst, &oracle, None, &params, &mut rng_a);
        let b = descend(&mut sol_b, &inst, &oracle, Some(&filter), &params, &mut rng_b);
        assert_eq!(a, b);
        assert_eq!(sol_a, sol_b);
    }

    #[test]
    fn fixed_edges_survive_descent_without_aspiration() {
        for seed in 0..5 {
            let (inst, oracle) = setup(seed + 100, 30);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sol = random_solution(&inst, &oracle, &mut rng);
            let all_edges = sol.edges().sorted_edges();
            let fixed: HashSet<Edge> =
                all_edges.iter().copied().filter(|_| rng.gen_bool(0.3)).collect();
            let filter = TabuEdgeFilter::new(fixed.clone(), 1.0);
            descend(&mut sol, &inst, &oracle, Some(&filter), &SearchParams::descent(), &mut rng);
            let after = sol.edges();
            for e in &fixed {
                assert!(after.contains(*e), "fixed edge {e:?} was removed");
            }
            assert!(evaluate(&sol, &inst, &oracle).feasible);
        }
    }

    #[test]
    fn annealing_terminates_and_keeps_partition() {
        let (inst, oracle) = setup(6, 25);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut sol = random_solution(&inst, &oracle, &mut rng);
        let sa = SaParams { t0: sol.cost * 0.01, cooling: 0.99, floor: 1e-6, max_moves: 500 };
        let accepted = descend(&mut sol, &inst, &oracle, None, &SearchParams::anneal(sa), &mut rng);
        assert!(accepted > 0);
        let eval = evaluate(&sol, &inst, &oracle);
        assert!(eval.feasible, "{:?}", eval.violations);
        assert_eq!(eval.cost, sol.cost);
    }

    #[test]
    fn perturbation_keeps_feasibility_and_respects_fixed_edges() {
        let (inst, oracle) = setup(8, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut sol = savings_construct(&inst, &oracle, false);
        let fixed: HashSet<Edge> = sol
            .edges()
            .sorted_edges()
            .into_iter()
            .filter(|_| rng.gen_bool(0.25))
            .collect();
        let filter = TabuEdgeFilter::new(fixed.clone(), 1.0);
        for _ in 0..30 {
            perturb(&mut sol, &inst, &oracle, Some(&filter), 3, &mut rng);
            let eval = evaluate(&sol, &inst, &oracle);
            assert!(eval.feasible, "{:?}", eval.violations);
            assert_eq!(eval.cost, sol.cost);
            let edges = sol.edges();
            for e in &fixed {
                assert!(edges.contains(*e), "perturbation removed fixed edge {e:?}");
            }
        }
    }

    #[test]
    fn penalized_capacity_mode_accepts_and_charges_overloads() {
        let (inst, oracle) = setup(9, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut sol = random_solution(&inst, &oracle, &mut rng);
        let params = SearchParams {
            capacity_penalty: Some(1000.0),
            ..SearchParams::descent()
        };
        descend(&mut sol, &inst, &oracle, None, &params, &mut rng);
        // with a high penalty weight, the result stays capacity-feasible
        let eval = evaluate(&sol, &inst, &oracle);
        assert!(eval.feasible, "{:?}", eval.violations);
    }
}
