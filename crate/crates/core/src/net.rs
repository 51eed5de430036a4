//! Maximal `r_k`-separated nets `{x_{j,k}}` at scales `r_k = 10^{-k}` and the
//! dilated neighborhoods `V_k^λ = ∪_j λ B_{j,k}`.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{dist, dist2, scale_radius};
use crate::spatial::{HashGrid, KdTree};

/// Net points of a single scale.
#[derive(Debug, Clone)]
pub struct NetLevel {
    k: usize,
    radius: f64,
    indices: Vec<usize>,
    centers: Vec<f64>,
    tree: KdTree,
}

impl NetLevel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Cloud indices of the net points, in selection order.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// The nets `J_0, ..., J_K` of a cloud.
#[derive(Debug, Clone)]
pub struct MultiscaleNet {
    n: usize,
    levels: Vec<NetLevel>,
}

/// Result of a `V_k^λ` membership query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub inside: bool,
    /// Net-local index of the nearest net point (lowest index on ties).
    pub nearest: usize,
    pub distance: f64,
}

/// Serialized form: cloud indices per scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetRecord {
    pub scales: Vec<NetScaleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetScaleRecord {
    pub k: usize,
    pub r: f64,
    pub indices: Vec<usize>,
}

/// Greedy nets in ascending point-index order, scales `0..=max_k`.
pub fn build_net(cloud: &PointCloud, max_k: usize) -> MultiscaleNet {
    let order: Vec<usize> = (0..cloud.len()).collect();
    build_net_ordered(cloud, max_k, &order)
}

/// Greedy nets scanning candidates in the given priority order.
///
/// Any permutation yields a valid maximal separated net; a cloud index
/// missing from `order` is never selected but still covered only if some
/// selected point lies within `r_k` of it, so callers pass a full permutation.
pub fn build_net_ordered(cloud: &PointCloud, max_k: usize, order: &[usize]) -> MultiscaleNet {
    let n = cloud.n();
    let levels = (0..=max_k)
        .map(|k| {
            let r = scale_radius(k);
            let mut grid = HashGrid::new(n, r);
            let mut indices = Vec::new();
            let mut centers = Vec::new();
            for &i in order {
                let p = cloud.point(i);
                let mut taken = false;
                grid.for_each_candidate(p, r, |id| {
                    if !taken && dist2(&centers[id as usize * n..(id as usize + 1) * n], p) < r * r {
                        taken = true;
                    }
                });
                if !taken {
                    grid.insert(indices.len() as u32, p);
                    indices.push(i);
                    centers.extend_from_slice(p);
                }
            }
            let tree = KdTree::build(&centers, n);
            NetLevel {
                k,
                radius: r,
                indices,
                centers,
                tree,
            }
        })
        .collect();
    MultiscaleNet { n, levels }
}

impl MultiscaleNet {
    /// Rebuilds a net from recorded indices, checking both net invariants.
    pub fn from_record(cloud: &PointCloud, record: &NetRecord) -> Result<Self> {
        let n = cloud.n();
        let mut levels = Vec::new();
        for (pos, s) in record.scales.iter().enumerate() {
            if s.k != pos {
                return Err(Error::Input(format!("net scales out of order at position {pos}")));
            }
            let mut centers = Vec::with_capacity(s.indices.len() * n);
            for &i in &s.indices {
                if i >= cloud.len() {
                    return Err(Error::Input(format!("net index {i} out of range")));
                }
                centers.extend_from_slice(cloud.point(i));
            }
            let tree = KdTree::build(&centers, n);
            levels.push(NetLevel {
                k: s.k,
                radius: scale_radius(s.k),
                indices: s.indices.clone(),
                centers,
                tree,
            });
        }
        let net = MultiscaleNet { n, levels };
        net.check(cloud)?;
        Ok(net)
    }

    pub fn to_record(&self) -> NetRecord {
        NetRecord {
            scales: self
                .levels
                .iter()
                .map(|l| NetScaleRecord {
                    k: l.k,
                    r: l.radius,
                    indices: l.indices.clone(),
                })
                .collect(),
        }
    }

    /// Verifies separation and maximality at every scale.
    pub fn check(&self, cloud: &PointCloud) -> Result<()> {
        for level in &self.levels {
            let r = level.radius;
            for j in 0..level.len() {
                let c = self.center(level.k, j);
                if let Some(i) = level.tree.within(c, r).into_iter().find(|&i| i != j && dist(self.center(level.k, i), c) < r) {
                    return Err(Error::Input(format!(
                        "net points {j} and {i} at scale {} are closer than r_k",
                        level.k
                    )));
                }
            }
            for (i, p) in cloud.points().enumerate() {
                match level.tree.nearest(p, None) {
                    Some((_, t)) if t <= r => {}
                    _ => {
                        return Err(Error::Input(format!(
                            "cloud point {i} is not covered at scale {}",
                            level.k
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Finest scale index `K`.
    pub fn max_scale(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &NetLevel {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[NetLevel] {
        &self.levels
    }

    pub fn len(&self, k: usize) -> usize {
        self.levels[k].len()
    }

    /// Coordinates of `x_{j,k}`.
    pub fn center(&self, k: usize, j: usize) -> &[f64] {
        let n = self.n;
        &self.levels[k].centers[j * n..(j + 1) * n]
    }

    pub fn cloud_index(&self, k: usize, j: usize) -> usize {
        self.levels[k].indices[j]
    }

    /// Net-local indices `j` with `|y - x_{j,k}| <= radius`, ascending.
    pub fn within(&self, k: usize, y: &[f64], radius: f64) -> Vec<usize> {
        self.levels[k].tree.within(y, radius)
    }

    /// Nearest net point at scale `k`: `(j, distance)`, lowest index on ties.
    pub fn nearest(&self, k: usize, y: &[f64]) -> (usize, f64) {
        self.levels[k].tree.nearest(y, None).expect("nets are nonempty")
    }

    /// Whether `y ∈ V_k^λ`, with the nearest net point.
    pub fn in_v(&self, y: &[f64], k: usize, lambda: f64) -> Membership {
        let (nearest, distance) = self.nearest(k, y);
        Membership {
            inside: distance <= lambda * self.levels[k].radius,
            nearest,
            distance,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn segment_cloud(count: usize) -> PointCloud {
        let coords = (0..count)
            .flat_map(|i| [i as f64 / (count - 1) as f64, 0.0])
            .collect();
        PointCloud::new(2, 1, coords, None).unwrap()
    }

    #[test]
    fn single_point_net() {
        let cloud = PointCloud::new(2, 1, vec![0.3, 0.4], None).unwrap();
        let net = build_net(&cloud, 4);
        for k in 0..=4 {
            assert_eq!(net.level(k).indices(), &[0]);
        }
    }

    #[test]
    fn segment_net_is_separated_and_maximal() {
        let cloud = segment_cloud(101);
        let net = build_net(&cloud, 2);
        let level = net.level(1);
        assert!((10..=11).contains(&level.len()), "{}", level.len());
        // Brute-force separation and covering over all pairs.
        for a in 0..level.len() {
            for b in 0..a {
                assert!(dist(net.center(1, a), net.center(1, b)) >= 0.1 - 1e-12);
            }
        }
        for p in cloud.points() {
            let cover = (0..level.len()).map(|j| dist(net.center(1, j), p)).fold(f64::INFINITY, f64::min);
            assert!(cover <= 0.1 + 1e-12);
        }
        net.check(&cloud).unwrap();
    }

    #[test]
    fn close_pair_gives_one_net_point() {
        let cloud = PointCloud::new(2, 1, vec![0.0, 0.0, 0.05, 0.0], None).unwrap();
        let net = build_net(&cloud, 1);
        assert_eq!(net.len(1), 1);
    }

    #[test]
    fn membership_thresholds() {
        let cloud = PointCloud::new(2, 1, vec![0.0, 0.0], None).unwrap();
        let net = build_net(&cloud, 2);
        let r = scale_radius(2);
        let y = [9.5 * r, 0.0];
        assert!(net.in_v(&y, 2, 10.0).inside);
        assert!(!net.in_v(&y, 2, 8.0).inside);
        let m = net.in_v(&[0.0, 0.0], 2, 1.0);
        assert!(m.inside && m.nearest == 0 && m.distance == 0.0);
    }

    #[test]
    fn nearest_agrees_with_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let coords: Vec<f64> = (0..3000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cloud = PointCloud::new(3, 2, coords, None).unwrap();
        let net = build_net(&cloud, 2);
        for _ in 0..200 {
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.2..1.2)).collect();
            for k in 0..=2 {
                let m = net.in_v(&y, k, 3.0);
                let (bj, bd) = (0..net.len(k))
                    .map(|j| (j, dist(net.center(k, j), &y)))
                    .fold((usize::MAX, f64::INFINITY), |acc, (j, d)| if d < acc.1 { (j, d) } else { acc });
                assert_eq!(m.nearest, bj);
                assert!((m.distance - bd).abs() < 1e-15);
                assert_eq!(m.inside, bd <= 3.0 * scale_radius(k));
            }
        }
    }

    #[test]
    fn nets_are_deterministic_nested_and_bounded_multiplicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coords: Vec<f64> = (0..4000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cloud = PointCloud::new(2, 2, coords, None).unwrap();
        let a = build_net(&cloud, 3);
        let b = build_net(&cloud, 3);
        for k in 0..=3 {
            assert_eq!(a.level(k).indices(), b.level(k).indices());
        }
        for k in 0..3 {
            for j in 0..a.len(k + 1) {
                assert!(a.nearest(k, a.center(k + 1, j)).1 <= scale_radius(k));
            }
        }
        for _ in 0..100 {
            let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for k in 0..=3 {
                assert!(a.within(k, &y, 10.0 * scale_radius(k)).len() <= 40usize.pow(2));
            }
        }
    }

    #[test]
    fn record_round_trip_checks_invariants() {
        let cloud = segment_cloud(50);
        let net = build_net(&cloud, 2);
        let back = MultiscaleNet::from_record(&cloud, &net.to_record()).unwrap();
        assert_eq!(back.level(2).indices(), net.level(2).indices());
        let mut bad = net.to_record();
        bad.scales[1].indices.truncate(1);
        assert!(MultiscaleNet::from_record(&cloud, &bad).is_err());
    }
}
