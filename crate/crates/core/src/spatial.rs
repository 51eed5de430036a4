//! Spatial indices: a static k-d tree over cloud points and a hashed uniform
//! grid used by the multiscale nets.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use crate::geometry::dist2;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// Static k-d tree over a flat coordinate buffer (`n` values per point).
#[derive(Debug, Clone)]
pub struct KdTree {
    n: usize,
    coords: Vec<f64>,
    perm: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn build(coords: &[f64], n: usize) -> Self {
        let count = if n == 0 { 0 } else { coords.len() / n };
        let mut tree = KdTree {
            n,
            coords: coords.to_vec(),
            perm: (0..count).collect(),
            nodes: Vec::new(),
        };
        if count > 0 {
            tree.build_node(0, count);
        }
        tree
    }

    fn coord(&self, i: usize, c: usize) -> f64 {
        self.coords[i * self.n + c]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // Split along the axis of largest spread at the median.
        let mut dim = 0;
        let mut spread = -1.0;
        for c in 0..self.n {
            let (lo, hi) = self.perm[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = self.coord(i, c);
                (lo.min(v), hi.max(v))
            });
            if hi - lo > spread {
                spread = hi - lo;
                dim = c;
            }
        }
        if spread <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let n = self.n;
        let coords = &self.coords;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            coords[a * n + dim].total_cmp(&coords[b * n + dim]).then(a.cmp(&b))
        });
        let value = self.coord(self.perm[mid], dim);
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    /// Indices of all points with `|p - center| <= radius`, ascending.
    pub fn within(&self, center: &[f64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            match self.nodes[id] {
                Node::Leaf { start, end } => {
                    for &i in &self.perm[start..end] {
                        if dist2(&self.coords[i * self.n..(i + 1) * self.n], center) <= r2 {
                            out.push(i);
                        }
                    }
                }
                Node::Split { dim, value, left, right } => {
                    let delta = center[dim] - value;
                    if delta <= radius {
                        stack.push(left);
                    }
                    if delta >= -radius {
                        stack.push(right);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Nearest point to `center`, skipping index `exclude`; returns `(index, distance)`.
    pub fn nearest(&self, center: &[f64], exclude: Option<usize>) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        if self.nodes.is_empty() {
            return None;
        }
        let mut stack = vec![(0usize, 0.0f64)];
        while let Some((id, bound)) = stack.pop() {
            if let Some((_, b)) = best {
                if bound > b {
                    continue;
                }
            }
            match self.nodes[id] {
                Node::Leaf { start, end } => {
                    for &i in &self.perm[start..end] {
                        if Some(i) == exclude {
                            continue;
                        }
                        let d2 = dist2(&self.coords[i * self.n..(i + 1) * self.n], center);
                        let better = match best {
                            None => true,
                            Some((bi, b)) => d2 < b || (d2 == b && i < bi),
                        };
                        if better {
                            best = Some((i, d2));
                        }
                    }
                }
                Node::Split { dim, value, left, right } => {
                    let delta = center[dim] - value;
                    let (near, far) = if delta <= 0.0 { (left, right) } else { (right, left) };
                    stack.push((far, bound.max(delta * delta)));
                    stack.push((near, bound));
                }
            }
        }
        best.map(|(i, d2)| (i, d2.sqrt()))
    }
}

/// Pass-through hasher for keys that are already well-mixed `u64`s.
#[derive(Default)]
pub(crate) struct IdentityHasher(u64);

impl Hasher for IdentityHasher {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, _bytes: &[u8]) {
        unreachable!("IdentityHasher only hashes u64 keys")
    }
    fn write_u64(&mut self, v: u64) {
        self.0 = v;
    }
}

type CellMap = HashMap<u64, Vec<u32>, BuildHasherDefault<IdentityHasher>>;

/// Uniform grid of side `cell` with hashed cell keys.
///
/// Hash collisions only merge buckets; every query re-checks true distances.
#[derive(Debug, Clone, Default)]
pub struct HashGrid {
    n: usize,
    cell: f64,
    buckets: CellMap,
}

fn mix(mut h: u64, v: i64) -> u64 {
    h ^= (v as u64).wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^ (h >> 31)
}

impl HashGrid {
    pub fn new(n: usize, cell: f64) -> Self {
        HashGrid {
            n,
            cell,
            buckets: CellMap::default(),
        }
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    fn cell_of(&self, p: &[f64]) -> Vec<i64> {
        p.iter().map(|v| (v / self.cell).floor() as i64).collect()
    }

    fn key(cell: &[i64]) -> u64 {
        cell.iter().fold(0x51_7cc1_b727_220a, |h, &c| mix(h, c))
    }

    pub fn insert(&mut self, id: u32, p: &[f64]) {
        let key = Self::key(&self.cell_of(p));
        self.buckets.entry(key).or_default().push(id);
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    /// Calls `visit` for every stored id whose cell lies within `radius` (in cells, rounded up) of `center`.
    /// Ids may repeat when hashed buckets collide; callers filter by true distance.
    pub fn for_each_candidate(&self, center: &[f64], radius: f64, mut visit: impl FnMut(u32)) {
        let base = self.cell_of(center);
        let reach = (radius / self.cell).ceil() as i64;
        let mut offset = vec![-reach; self.n];
        let mut cell = vec![0i64; self.n];
        let mut seen_keys: Vec<u64> = Vec::new();
        loop {
            for i in 0..self.n {
                cell[i] = base[i] + offset[i];
            }
            let key = Self::key(&cell);
            if let Some(ids) = self.buckets.get(&key) {
                // Colliding cells map to the same bucket; visit it once.
                if !seen_keys.contains(&key) {
                    seen_keys.push(key);
                    for &id in ids {
                        visit(id);
                    }
                }
            }
            // Odometer increment over [-reach, reach]^n.
            let mut c = 0;
            loop {
                if c == self.n {
                    return;
                }
                offset[c] += 1;
                if offset[c] <= reach {
                    break;
                }
                offset[c] = -reach;
                c += 1;
            }
        }
    }

    /// Number of cells visited by a query of the given radius.
    pub fn cells_for_radius(&self, radius: f64) -> f64 {
        (2.0 * (radius / self.cell).ceil() + 1.0).powi(self.n as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_within(coords: &[f64], n: usize, c: &[f64], r: f64) -> Vec<usize> {
        (0..coords.len() / n)
            .filter(|&i| dist2(&coords[i * n..(i + 1) * n], c) <= r * r)
            .collect()
    }

    #[test]
    fn kdtree_ball_and_nearest_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 3] {
            let coords: Vec<f64> = (0..700 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let tree = KdTree::build(&coords, n);
            for _ in 0..50 {
                let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.2..1.2)).collect();
                let r = rng.gen_range(0.0..0.6);
                assert_eq!(tree.within(&c, r), brute_within(&coords, n, &c, r));
                let (i, d) = tree.nearest(&c, None).unwrap();
                let brute = (0..700)
                    .map(|j| (j, dist2(&coords[j * n..(j + 1) * n], &c)))
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                    .unwrap();
                assert_eq!(i, brute.0);
                assert!((d - brute.1.sqrt()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn grid_candidates_cover_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 2;
        let coords: Vec<f64> = (0..500 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut grid = HashGrid::new(n, 0.1);
        for i in 0..500 {
            grid.insert(i as u32, &coords[i * n..(i + 1) * n]);
        }
        for _ in 0..30 {
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = rng.gen_range(0.0..0.35);
            let mut got = Vec::new();
            grid.for_each_candidate(&c, r, |id| {
                let i = id as usize;
                if dist2(&coords[i * n..(i + 1) * n], &c) <= r * r {
                    got.push(i);
                }
            });
            got.sort_unstable();
            got.dedup();
            assert_eq!(got, brute_within(&coords, n, &c, r));
        }
    }
}
