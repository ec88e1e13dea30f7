//! Graph batches feeding the ConvNet: nodes with normalized coordinate and
//! demand-utilization features, a sparse directed arc structure (both
//! orientations per undirected edge) and per-arc distance/type inputs.

use crate::error::{Error, Result};
use crate::instance::{DistanceOracle, Instance, NodeId};
use crate::solution::{edge, Edge, Solution};
use std::collections::BTreeSet;

/// Edge selection for a batch: every pair, k nearest neighbors, or the edges
/// of a given solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphMode {
    Full,
    Knn(usize),
    SolutionEdges,
}

/// Arc type channels for the edge-type embedding.
pub const ARC_TYPE_BACKGROUND: usize = 0; // full/k-NN graph edge
pub const ARC_TYPE_SOLUTION: usize = 1; // edge of the input solution
pub const ARC_TYPE_SELF: usize = 2; // reserved for self-loops
pub const NUM_ARC_TYPES: usize = 3;

#[derive(Debug, Clone)]
pub struct GraphBatch {
    /// Number of nodes in the batch (after any truncation).
    pub n: usize,
    /// Per batch node: min-max normalized x, y and demand utilization q/Q.
    pub node_feats: Vec<[f64; 3]>,
    /// Directed arcs `(i, j)` over batch node indices; each undirected edge
    /// appears in both orientations.
    pub arcs: Vec<(usize, usize)>,
    /// Min-max normalized distance per arc.
    pub arc_dist: Vec<f64>,
    /// Type channel per arc.
    pub arc_type: Vec<usize>,
    /// Arc ids grouped by tail node: `arcs_from[i]` lists arcs `(i, j)`.
    pub arcs_from: Vec<Vec<usize>>,
    /// Undirected edges in original instance node ids, one per arc pair.
    pub edges: Vec<Edge>,
    /// `(arc ij, arc ji)` per undirected edge, same order as `edges`.
    pub edge_arcs: Vec<(usize, usize)>,
    /// Batch node index -> original instance node id.
    pub node_map: Vec<NodeId>,
    /// Solution edges left out by depot truncation; scored as probability 0.
    pub omitted_edges: Vec<Edge>,
}

/// Builds a batch. `sol` is required in `SolutionEdges` mode. With
/// `depot_truncate = Some(k)`, only the k nodes nearest the depot enter the
/// batch; solution edges falling outside are reported in `omitted_edges`.
pub fn build_graph(
    inst: &Instance,
    oracle: &DistanceOracle,
    mode: GraphMode,
    sol: Option<&Solution>,
    depot_truncate: Option<usize>,
) -> Result<GraphBatch> {
    let total = inst.len();
    let node_map: Vec<NodeId> = match depot_truncate {
        Some(k) if total > k => {
            let mut by_depot_dist: Vec<NodeId> = (0..total).collect();
            by_depot_dist
                .sort_by(|&a, &b| oracle.distance(0, a).partial_cmp(&oracle.distance(0, b)).unwrap().then(a.cmp(&b)));
            let mut kept: Vec<NodeId> = by_depot_dist.into_iter().take(k).collect();
            kept.sort_unstable();
            kept
        }
        _ => (0..total).collect(),
    };
    let n = node_map.len();
    let mut batch_of = vec![usize::MAX; total];
    for (b, &orig) in node_map.iter().enumerate() {
        batch_of[orig] = b;
    }

    // min-max normalize coordinates over the batch
    let xs: Vec<f64> = node_map.iter().map(|&i| inst.nodes[i].x).collect();
    let ys: Vec<f64> = node_map.iter().map(|&i| inst.nodes[i].y).collect();
    let norm = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    let (x_lo, x_hi) = min_max(&xs);
    let (y_lo, y_hi) = min_max(&ys);
    let node_feats: Vec<[f64; 3]> = node_map
        .iter()
        .map(|&i| {
            let nd = &inst.nodes[i];
            [
                norm(nd.x, x_lo, x_hi),
                norm(nd.y, y_lo, y_hi),
                nd.demand as f64 / inst.capacity as f64,
            ]
        })
        .collect();

    // undirected edge set over batch indices
    let mut undirected: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut solution_marks: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut omitted_edges = Vec::new();
    match mode {
        GraphMode::Full => {
            for i in 0..n {
                for j in (i + 1)..n {
                    undirected.insert((i, j));
                }
            }
        }
        GraphMode::Knn(k) => {
            if k >= n {
                return Err(Error::Invalid(format!(
                    "k-NN parameter {k} must be below the batch size {n}"
                )));
            }
            for (b, &orig) in node_map.iter().enumerate() {
                let mut taken = 0;
                for &nbr in oracle.neighbors(orig) {
                    if taken == k {
                        break;
                    }
                    let nb = batch_of[nbr];
                    if nb == usize::MAX {
                        continue; // neighbor truncated away
                    }
                    undirected.insert((b.min(nb), b.max(nb)));
                    taken += 1;
                }
            }
        }
        GraphMode::SolutionEdges => {
            let sol = sol.ok_or_else(|| {
                Error::Invalid("solution-edges mode requires an input solution".into())
            })?;
            for e in sol.edges().sorted_edges() {
                let (a, b) = (batch_of[e.0], batch_of[e.1]);
                if a == usize::MAX || b == usize::MAX {
                    omitted_edges.push(e);
                } else {
                    undirected.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    // mark which batch edges belong to the input solution (for arc types)
    if mode == GraphMode::SolutionEdges {
        solution_marks.extend(undirected.iter().copied());
    } else if let Some(sol) = sol {
        for e in sol.edges().sorted_edges() {
            let (a, b) = (batch_of[e.0], batch_of[e.1]);
            if a != usize::MAX && b != usize::MAX {
                solution_marks.insert((a.min(b), a.max(b)));
            }
        }
    }

    let mut arcs = Vec::with_capacity(undirected.len() * 2);
    let mut edges = Vec::with_capacity(undirected.len());
    let mut edge_arcs = Vec::with_capacity(undirected.len());
    let mut raw_dist = Vec::with_capacity(undirected.len() * 2);
    let mut arc_type = Vec::with_capacity(undirected.len() * 2);
    for &(a, b) in &undirected {
        let d = oracle.distance(node_map[a], node_map[b]);
        let ty = if solution_marks.contains(&(a, b)) {
            ARC_TYPE_SOLUTION
        } else {
            ARC_TYPE_BACKGROUND
        };
        let ij = arcs.len();
        arcs.push((a, b));
        raw_dist.push(d);
        arc_type.push(ty);
        let ji = arcs.len();
        arcs.push((b, a));
        raw_dist.push(d);
        arc_type.push(ty);
        edges.push(edge(node_map[a], node_map[b]));
        edge_arcs.push((ij, ji));
    }

    let (d_lo, d_hi) = min_max(&raw_dist);
    let arc_dist: Vec<f64> = raw_dist.iter().map(|&d| norm(d, d_lo, d_hi)).collect();

    let mut arcs_from = vec![Vec::new(); n];
    for (a, &(i, _)) in arcs.iter().enumerate() {
        arcs_from[i].push(a);
    }

    Ok(GraphBatch {
        n,
        node_feats,
        arcs,
        arc_dist,
        arc_type,
        arcs_from,
        edges,
        edge_arcs,
        node_map,
        omitted_edges,
    })
}

fn min_max(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if values.is_empty() {
        (0.0, 0.0)
    } else {
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_instance, CustomerDistribution, DemandProfile, DepotPosition};
    use crate::instance::DistanceMode;

    fn inst_oracle(seed: u64, n: usize) -> (Instance, DistanceOracle) {
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
    fn full_mode_has_all_pairs() {
        let (inst, oracle) = inst_oracle(0, 9); // 10 nodes with depot
        let batch = build_graph(&inst, &oracle, GraphMode::Full, None, None).unwrap();
        assert_eq!(batch.edges.len(), 45);
        assert_eq!(batch.arcs.len(), 90);
    }

    #[test]
    fn solution_mode_matches_route_structure() {
        let (inst, oracle) = inst_oracle(1, 22);
        let routes: Vec<Vec<usize>> =
            vec![(1..=6).collect(), (7..=12).collect(), (13..=17).collect(), (18..=22).collect()];
        let sol = Solution::from_routes(routes, &inst, &oracle);
        let batch =
            build_graph(&inst, &oracle, GraphMode::SolutionEdges, Some(&sol), None).unwrap();
        assert_eq!(batch.edges.len(), 26); // 22 customers + 4 routes
        assert!(batch.arc_type.iter().all(|&t| t == ARC_TYPE_SOLUTION));
        for e in sol.edges().sorted_edges() {
            assert!(batch.edges.contains(&e));
        }
    }

    #[test]
    fn truncation_keeps_exactly_k_nodes() {
        let (inst, oracle) = inst_oracle(2, 1499); // 1500 nodes
        let batch = build_graph(&inst, &oracle, GraphMode::Knn(8), None, Some(1000)).unwrap();
        assert_eq!(batch.n, 1000);
        assert!(batch.node_map.contains(&0), "depot survives truncation");
    }

    #[test]
    fn truncated_solution_edges_are_reported() {
        let (inst, oracle) = inst_oracle(3, 60);
        let sol = crate::construct::savings_construct(&inst, &oracle, false);
        let batch =
            build_graph(&inst, &oracle, GraphMode::SolutionEdges, Some(&sol), Some(30)).unwrap();
        let total = batch.edges.len() + batch.omitted_edges.len();
        assert_eq!(total, sol.edges().distinct_len());
        assert!(!batch.omitted_edges.is_empty());
    }

    #[test]
    fn knn_k_must_be_below_batch_size() {
        let (inst, oracle) = inst_oracle(4, 9);
        assert!(build_graph(&inst, &oracle, GraphMode::Knn(10), None, None).is_err());
        assert!(build_graph(&inst, &oracle, GraphMode::Knn(5), None, None).is_ok());
    }

    #[test]
    fn features_are_normalized() {
        let (inst, oracle) = inst_oracle(5, 50);
        let batch = build_graph(&inst, &oracle, GraphMode::Knn(10), None, None).unwrap();
        for f in &batch.node_feats {
            for v in f {
                assert!((0.0..=1.0).contains(v));
            }
        }
        for d in &batch.arc_dist {
            assert!((0.0..=1.0).contains(d));
        }
        // reverse arc bookkeeping is consistent
        for (k, &(ij, ji)) in batch.edge_arcs.iter().enumerate() {
            let (a, b) = batch.arcs[ij];
            assert_eq!(batch.arcs[ji], (b, a));
            let expected = edge(batch.node_map[a], batch.node_map[b]);
            assert_eq!(batch.edges[k], expected);
        }
    }
}
