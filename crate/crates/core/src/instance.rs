//! Instance data model and the distance oracle.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub type NodeId = usize;

/// Granularity bound used throughout: neighbor ranks above this are treated
/// as "far" by the feature extractor and the move generator.
pub const DEFAULT_GAMMA: usize = 25;

/// Full distance matrices are cached only up to this node count; larger
/// instances fall back to on-demand computation plus the k-NN rank table.
pub const MATRIX_CACHE_LIMIT: usize = 2000;

/// Time-window data attached to a node of a CVRPTW instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub open: f64,
    pub close: f64,
    pub service: f64,
}

/// A depot or customer. The depot is always node 0 and has demand 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub demand: u32,
    pub tw: Option<TimeWindow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceKind {
    Cvrp,
    Cvrptw,
}

/// A routing instance: one depot (node 0), customers 1..N, uniform capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub kind: InstanceKind,
    pub capacity: u32,
    pub nodes: Vec<Node>,
}

impl Instance {
    /// Validates the structural invariants and returns the instance.
    pub fn new(
        name: impl Into<String>,
        kind: InstanceKind,
        capacity: u32,
        nodes: Vec<Node>,
    ) -> Result<Self> {
        let inst = Instance {
            name: name.into(),
            kind,
            capacity,
            nodes,
        };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::Instance("capacity must be positive".into()));
        }
        if self.nodes.is_empty() {
            return Err(Error::Instance("no nodes".into()));
        }
        if self.nodes[0].demand != 0 {
            return Err(Error::Instance("depot must have demand 0".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return Err(Error::Instance(format!(
                    "node ids must be contiguous: found id {} at position {i}",
                    node.id
                )));
            }
            if !node.x.is_finite() || !node.y.is_finite() {
                return Err(Error::Instance(format!("node {i} has non-finite coordinates")));
            }
            if i > 0 && node.demand > self.capacity {
                return Err(Error::Instance(format!(
                    "customer {i} demand {} exceeds capacity {}",
                    node.demand, self.capacity
                )));
            }
            match (self.kind, &node.tw) {
                (InstanceKind::Cvrptw, Some(tw)) => {
                    if tw.open > tw.close {
                        return Err(Error::Instance(format!(
                            "node {i} has open {} after close {}",
                            tw.open, tw.close
                        )));
                    }
                    if tw.open < 0.0 || tw.service < 0.0 {
                        return Err(Error::Instance(format!("node {i} has negative time data")));
                    }
                }
                (InstanceKind::Cvrptw, None) => {
                    return Err(Error::Instance(format!("node {i} missing time window")));
                }
                (InstanceKind::Cvrp, Some(_)) => {
                    return Err(Error::Instance(format!(
                        "node {i} carries a time window in a CVRP instance"
                    )));
                }
                (InstanceKind::Cvrp, None) => {}
            }
        }
        Ok(())
    }

    /// Number of nodes including the depot.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of customers (nodes excluding the depot).
    pub fn num_customers(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn demand(&self, i: NodeId) -> u32 {
        self.nodes[i].demand
    }

    pub fn total_demand(&self) -> u64 {
        self.nodes.iter().map(|n| n.demand as u64).sum()
    }

    /// Customer ids 1..=N.
    pub fn customers(&self) -> impl Iterator<Item = NodeId> + '_ {
        1..self.nodes.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceMode {
    /// Nearest-integer Euclidean distances (CVRPLIB X convention).
    RoundedEuclidean,
    /// Real-valued Euclidean distances (Solomon convention).
    ExactEuclidean,
}

/// Immutable distance/rank oracle shared by all search workers.
///
/// Caches the full matrix for instances up to [`MATRIX_CACHE_LIMIT`] nodes
/// and always keeps a `gamma`-nearest-neighbor table per node, ranks tied
/// by lower node id so the table is deterministic.
#[derive(Debug, Clone)]
pub struct DistanceOracle {
    mode: DistanceMode,
    coords: Vec<(f64, f64)>,
    matrix: Option<Vec<f64>>,
    n: usize,
    gamma: usize,
    /// `neighbors[i]` holds up to `gamma` node ids in rank order (rank 1 first).
    neighbors: Vec<Vec<NodeId>>,
}

impl DistanceOracle {
    pub fn new(inst: &Instance, mode: DistanceMode, gamma: usize) -> Self {
        let n = inst.len();
        let coords: Vec<(f64, f64)> = inst.nodes.iter().map(|nd| (nd.x, nd.y)).collect();
        let mut oracle = DistanceOracle {
            mode,
            coords,
            matrix: None,
            n,
            gamma,
            neighbors: Vec::new(),
        };
        if n <= MATRIX_CACHE_LIMIT {
            let mut matrix = vec![0.0; n * n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = oracle.compute(i, j);
                    matrix[i * n + j] = d;
                    matrix[j * n + i] = d;
                }
            }
            oracle.matrix = Some(matrix);
        }
        oracle.neighbors = (0..n).map(|i| oracle.nearest(i)).collect();
        oracle
    }

    /// Default oracle for an instance: rounded distances for CVRP, exact for
    /// CVRPTW (Solomon convention), granularity [`DEFAULT_GAMMA`].
    pub fn for_instance(inst: &Instance) -> Self {
        let mode = match inst.kind {
            InstanceKind::Cvrp => DistanceMode::RoundedEuclidean,
            InstanceKind::Cvrptw => DistanceMode::ExactEuclidean,
        };
        Self::new(inst, mode, DEFAULT_GAMMA)
    }

    fn compute(&self, i: NodeId, j: NodeId) -> f64 {
        let (xi, yi) = self.coords[i];
        let (xj, yj) = self.coords[j];
        let d = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
        match self.mode {
            DistanceMode::RoundedEuclidean => d.round(),
            DistanceMode::ExactEuclidean => d,
        }
    }

    fn nearest(&self, i: NodeId) -> Vec<NodeId> {
        let mut cands: Vec<NodeId> = (0..self.n).filter(|&j| j != i).collect();
        let k = self.gamma.min(cands.len());
        if k == 0 {
            return Vec::new();
        }
        let key = |&j: &NodeId| (self.distance(i, j), j);
        if k < cands.len() {
            cands.select_nth_unstable_by(k - 1, |a, b| key(a).partial_cmp(&key(b)).unwrap());
            cands.truncate(k);
        }
        cands.sort_unstable_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        cands
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }

    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn distance(&self, i: NodeId, j: NodeId) -> f64 {
        if i == j {
            return 0.0;
        }
        match &self.matrix {
            Some(m) => m[i * self.n + j],
            None => self.compute(i, j),
        }
    }

    /// 1-based rank of `j` among `i`'s nearest neighbors, or -1 when the rank
    /// exceeds `gamma`. Ties are broken by lower node id.
    pub fn neighbor_rank(&self, i: NodeId, j: NodeId) -> i32 {
        debug_assert_ne!(i, j, "neighbor_rank is undefined for i == j");
        match self.neighbors[i].iter().position(|&k| k == j) {
            Some(pos) => (pos + 1) as i32,
            None => -1,
        }
    }

    /// Node ids within granularity of `i`, in rank order (rank 1 first).
    pub fn neighbors(&self, i: NodeId) -> &[NodeId] {
        &self.neighbors[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn grid_instance(points: &[(f64, f64)], capacity: u32) -> Instance {
        let nodes = points
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Node {
                id,
                x,
                y,
                demand: if id == 0 { 0 } else { 1 },
                tw: None,
            })
            .collect();
        Instance::new("grid", InstanceKind::Cvrp, capacity, nodes).unwrap()
    }

    #[test]
    fn rounded_distance_345_triangle() {
        let inst = grid_instance(&[(0.0, 0.0), (3.0, 4.0)], 10);
        let oracle = DistanceOracle::new(&inst, DistanceMode::RoundedEuclidean, 5);
        assert_eq!(oracle.distance(0, 1), 5.0);
    }

    #[test]
    fn rounded_distance_rounds_to_nearest() {
        let inst = grid_instance(&[(0.0, 0.0), (1.0, 1.0)], 10);
        let oracle = DistanceOracle::new(&inst, DistanceMode::RoundedEuclidean, 5);
        // sqrt(2) = 1.414... rounds to 1
        assert_eq!(oracle.distance(0, 1), 1.0);
        let exact = DistanceOracle::new(&inst, DistanceMode::ExactEuclidean, 5);
        assert!((exact.distance(0, 1) - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn zero_diagonal() {
        let inst = grid_instance(&[(0.0, 0.0), (7.0, 1.0), (2.0, 9.0)], 10);
        let oracle = DistanceOracle::for_instance(&inst);
        for i in 0..3 {
            assert_eq!(oracle.distance(i, i), 0.0);
        }
    }

    #[test]
    fn symmetry_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<(f64, f64)> = (0..40)
            .map(|_| (rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0)))
            .collect();
        let inst = grid_instance(&pts, 100);
        for mode in [DistanceMode::RoundedEuclidean, DistanceMode::ExactEuclidean] {
            let oracle = DistanceOracle::new(&inst, mode, 10);
            for i in 0..40 {
                for j in 0..40 {
                    assert_eq!(oracle.distance(i, j), oracle.distance(j, i));
                }
            }
        }
    }

    #[test]
    fn neighbor_rank_basics() {
        // customers on a line: 1 at x=1, 2 at x=2, 3 at x=3
        let inst = grid_instance(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)], 10);
        let oracle = DistanceOracle::new(&inst, DistanceMode::ExactEuclidean, 25);
        assert_eq!(oracle.neighbor_rank(1, 2), 2); // rank 1 is the depot
        assert_eq!(oracle.neighbor_rank(1, 0), 1);
        assert_eq!(oracle.neighbor_rank(3, 1), 2);
        assert_eq!(oracle.neighbor_rank(3, 0), 3);
    }

    #[test]
    fn neighbor_rank_sentinel_beyond_gamma() {
        let pts: Vec<(f64, f64)> = (0..40).map(|i| (i as f64, 0.0)).collect();
        let inst = grid_instance(&pts, 100);
        let oracle = DistanceOracle::new(&inst, DistanceMode::ExactEuclidean, 25);
        // from node 0, node k sits at rank k for k = 1..39
        assert_eq!(oracle.neighbor_rank(0, 25), 25); // boundary rank is kept
        assert_eq!(oracle.neighbor_rank(0, 30), -1); // beyond gamma
        assert_eq!(oracle.neighbor_rank(0, 1), 1);
    }

    #[test]
    fn rank_ties_broken_by_lower_id() {
        // nodes 2 and 3 are equidistant from node 1
        let inst = grid_instance(&[(10.0, 10.0), (0.0, 0.0), (1.0, 0.0), (-1.0, 0.0)], 10);
        let oracle = DistanceOracle::new(&inst, DistanceMode::ExactEuclidean, 25);
        assert_eq!(oracle.neighbor_rank(1, 2), 1);
        assert_eq!(oracle.neighbor_rank(1, 3), 2);
    }

    #[test]
    fn ranks_unique_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<(f64, f64)> = (0..60)
            .map(|_| (rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)))
            .collect();
        let inst = grid_instance(&pts, 100);
        let oracle = DistanceOracle::new(&inst, DistanceMode::RoundedEuclidean, 25);
        for i in 0..60 {
            let mut seen = vec![false; 26];
            for j in 0..60 {
                if i == j {
                    continue;
                }
                let r = oracle.neighbor_rank(i, j);
                if r > 0 {
                    assert!(!seen[r as usize], "rank {r} assigned twice from node {i}");
                    seen[r as usize] = true;
                }
            }
            // every rank 1..gamma is used exactly once when enough nodes exist
            assert!(seen[1..=25].iter().all(|&s| s));
        }
    }

    #[test]
    fn validation_rejects_bad_instances() {
        let mut nodes = vec![
            Node { id: 0, x: 0.0, y: 0.0, demand: 0, tw: None },
            Node { id: 1, x: 1.0, y: 0.0, demand: 20, tw: None },
        ];
        assert!(Instance::new("bad", InstanceKind::Cvrp, 10, nodes.clone()).is_err());
        nodes[1].demand = 5;
        assert!(Instance::new("ok", InstanceKind::Cvrp, 10, nodes.clone()).is_ok());
        nodes[0].demand = 3;
        assert!(Instance::new("bad-depot", InstanceKind::Cvrp, 10, nodes).is_err());
    }
}
