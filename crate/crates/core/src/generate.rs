//! Seeded instance generator producing random, clustered and mixed customer
//! layouts on a 1000x1000 integer grid.

use crate::instance::{Instance, InstanceKind, Node};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const GRID: f64 = 1000.0;
const CLUSTER_STDDEV: f64 = 25.0;
/// Capacity is sized for roughly this many customers per route.
const ROUTE_SIZE_TARGET: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepotPosition {
    Central,
    Corner,
    Random,
}

/// Customer layout: uniform (R), Gaussian blobs (C), or a half/half mix (RC).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CustomerDistribution {
    Random,
    Clustered,
    RandomClustered,
}

impl CustomerDistribution {
    pub fn tag(self) -> &'static str {
        match self {
            CustomerDistribution::Random => "R",
            CustomerDistribution::Clustered => "C",
            CustomerDistribution::RandomClustered => "RC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemandProfile {
    Unit,
    /// Uniform in 1..=10.
    SmallSpread,
    /// Uniform in 50..=100.
    LargeSpread,
}

/// Generates a CVRP instance deterministically from its arguments.
pub fn generate_instance(
    seed: u64,
    n: usize,
    depot_pos: DepotPosition,
    customer_dist: CustomerDistribution,
    demand_profile: DemandProfile,
) -> Instance {
    assert!(n >= 1, "need at least one customer");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let depot = match depot_pos {
        DepotPosition::Central => (GRID / 2.0, GRID / 2.0),
        DepotPosition::Corner => (0.0, 0.0),
        DepotPosition::Random => (grid_coord(&mut rng), grid_coord(&mut rng)),
    };

    let coords = sample_coords(&mut rng, n, customer_dist);
    let demands: Vec<u32> = (0..n)
        .map(|_| match demand_profile {
            DemandProfile::Unit => 1,
            DemandProfile::SmallSpread => rng.gen_range(1..=10),
            DemandProfile::LargeSpread => rng.gen_range(50..=100),
        })
        .collect();

    let mean_demand = demands.iter().map(|&d| d as f64).sum::<f64>() / n as f64;
    let max_demand = demands.iter().copied().max().unwrap_or(1);
    let capacity = ((mean_demand * ROUTE_SIZE_TARGET).round() as u32).max(max_demand);

    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(Node { id: 0, x: depot.0, y: depot.1, demand: 0, tw: None });
    for (i, (&(x, y), &demand)) in coords.iter().zip(&demands).enumerate() {
        nodes.push(Node { id: i + 1, x, y, demand, tw: None });
    }

    let name = format!("gen-s{seed}-n{n}-{}", customer_dist.tag());
    Instance::new(name, InstanceKind::Cvrp, capacity, nodes)
        .expect("generated instance is valid by construction")
}

fn grid_coord(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0..=GRID as u32) as f64
}

fn sample_coords(
    rng: &mut ChaCha8Rng,
    n: usize,
    dist: CustomerDistribution,
) -> Vec<(f64, f64)> {
    match dist {
        CustomerDistribution::Random => (0..n)
            .map(|_| (grid_coord(rng), grid_coord(rng)))
            .collect(),
        CustomerDistribution::Clustered => sample_clustered(rng, n),
        CustomerDistribution::RandomClustered => {
            let clustered = n / 2;
            let mut coords = sample_clustered(rng, clustered);
            coords.extend((0..n - clustered).map(|_| (grid_coord(rng), grid_coord(rng))));
            coords
        }
    }
}

fn sample_clustered(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
    let num_clusters = rng.gen_range(3..=8).min(n.max(1));
    let centers: Vec<(f64, f64)> = (0..num_clusters)
        .map(|_| {
            (
                rng.gen_range(0.15 * GRID..0.85 * GRID),
                rng.gen_range(0.15 * GRID..0.85 * GRID),
            )
        })
        .collect();
    let noise = Normal::new(0.0, CLUSTER_STDDEV).unwrap();
    (0..n)
        .map(|_| {
            let (cx, cy) = centers[rng.gen_range(0..num_clusters)];
            let x = (cx + noise.sample(rng)).clamp(0.0, GRID).round();
            let y = (cy + noise.sample(rng)).clamp(0.0, GRID).round();
            (x, y)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_cvrplib, render_cvrplib};

    #[test]
    fn deterministic_for_fixed_arguments() {
        let a = generate_instance(0, 100, DepotPosition::Central, CustomerDistribution::Random, DemandProfile::SmallSpread);
        let b = generate_instance(0, 100, DepotPosition::Central, CustomerDistribution::Random, DemandProfile::SmallSpread);
        assert_eq!(a, b);
        let c = generate_instance(1, 100, DepotPosition::Central, CustomerDistribution::Random, DemandProfile::SmallSpread);
        assert_ne!(a, c);
    }

    #[test]
    fn single_customer_instance() {
        let inst = generate_instance(0, 1, DepotPosition::Central, CustomerDistribution::Random, DemandProfile::Unit);
        assert_eq!(inst.num_customers(), 1);
        assert!(inst.nodes[1].demand <= inst.capacity);
    }

    #[test]
    fn round_trips_through_cvrplib_text() {
        let inst = generate_instance(4, 30, DepotPosition::Corner, CustomerDistribution::RandomClustered, DemandProfile::LargeSpread);
        let again = parse_cvrplib(&render_cvrplib(&inst)).unwrap();
        assert_eq!(inst, again);
    }

    // -- independent clustering oracle: 2-means plus silhouette score --

    fn two_means(points: &[(f64, f64)]) -> (Vec<usize>, [(f64, f64); 2]) {
        let mut centroids = [points[0], points[points.len() / 2]];
        let mut assign = vec![0usize; points.len()];
        for _ in 0..50 {
            for (i, p) in points.iter().enumerate() {
                assign[i] = if dist2(*p, centroids[0]) <= dist2(*p, centroids[1]) { 0 } else { 1 };
            }
            for c in 0..2 {
                let members: Vec<&(f64, f64)> =
                    points.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(p, _)| p).collect();
                if !members.is_empty() {
                    let k = members.len() as f64;
                    centroids[c] = (
                        members.iter().map(|p| p.0).sum::<f64>() / k,
                        members.iter().map(|p| p.1).sum::<f64>() / k,
                    );
                }
            }
        }
        (assign, centroids)
    }

    fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
        (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
    }

    fn silhouette(points: &[(f64, f64)], assign: &[usize]) -> f64 {
        let mut total = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (mut same, mut other) = (Vec::new(), Vec::new());
            for (j, q) in points.iter().enumerate() {
                if i == j {
                    continue;
                }
                if assign[j] == assign[i] {
                    same.push(dist2(*p, *q).sqrt());
                } else {
                    other.push(dist2(*p, *q).sqrt());
                }
            }
            if same.is_empty() || other.is_empty() {
                continue;
            }
            let a = same.iter().sum::<f64>() / same.len() as f64;
            let b = other.iter().sum::<f64>() / other.len() as f64;
            total += (b - a) / a.max(b);
        }
        total / points.len() as f64
    }

    #[test]
    fn clustered_layout_has_detectable_clusters() {
        let coords = |dist| {
            let inst = generate_instance(0, 100, DepotPosition::Central, dist, DemandProfile::Unit);
            inst.nodes[1..].iter().map(|n| (n.x, n.y)).collect::<Vec<_>>()
        };
        let clustered = coords(CustomerDistribution::Clustered);
        let uniform = coords(CustomerDistribution::Random);

        let (assign_c, centroids) = two_means(&clustered);
        assert!(assign_c.iter().any(|&a| a == 0) && assign_c.iter().any(|&a| a == 1));
        assert!(dist2(centroids[0], centroids[1]).sqrt() > 4.0 * CLUSTER_STDDEV);

        let (assign_u, _) = two_means(&uniform);
        let sil_c = silhouette(&clustered, &assign_c);
        let sil_u = silhouette(&uniform, &assign_u);
        assert!(sil_c > sil_u, "clustered {sil_c} should beat uniform {sil_u}");
        assert!(sil_c > 0.35, "clustered silhouette too weak: {sil_c}");
    }
}
