//! Surface deviation between a simplified mesh and its reference, used to
//! judge simplification quality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};

/// Mean over `samples` area-uniform points on `simplified` of the squared
/// distance to the nearest point of `reference`'s surface (m²).
pub fn mean_squared_deviation(
    simplified: &TriangleMesh,
    reference: &TriangleMesh,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if simplified.is_empty() || reference.is_empty() {
        return Err(Error::invalid("deviation needs two non-empty meshes"));
    }
    if samples == 0 {
        return Err(Error::invalid("deviation needs at least one sample"));
    }
    let sampler = AreaSampler::new(simplified)?;
    let tree = TriangleTree::build(reference);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: f64 = (0..samples)
        .map(|_| {
            let p = sampler.sample(&mut rng);
            tree.nearest_squared_distance(&p)
        })
        .sum();
    Ok(total / samples as f64)
}

struct AreaSampler<'a> {
    mesh: &'a TriangleMesh,
    cumulative: Vec<f64>,
}

impl<'a> AreaSampler<'a> {
    fn new(mesh: &'a TriangleMesh) -> Result<Self> {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = (0..mesh.triangle_count())
            .map(|t| {
                acc += mesh.triangle_area(t);
                acc
            })
            .collect();
        if acc <= 0.0 {
            return Err(Error::invalid("mesh has zero surface area"));
        }
        Ok(Self { mesh, cumulative })
    }

    fn sample(&self, rng: &mut impl Rng) -> Vec3 {
        let total = *self.cumulative.last().unwrap();
        let target = rng.random::<f64>() * total;
        let t = self.cumulative.partition_point(|&c| c <= target).min(self.cumulative.len() - 1);
        let [a, b, c] = self.mesh.corners(t);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
    }
}

/// Closest point to `p` on triangle `abc` (Ericson, Real-Time Collision Detection).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

#[derive(Clone, Copy)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self { lo: Vec3::repeat(f64::INFINITY), hi: Vec3::repeat(f64::NEG_INFINITY) }
    }

    fn grow(&mut self, p: &Vec3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    fn squared_distance(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let excess = (self.lo[k] - p[k]).max(0.0) + (p[k] - self.hi[k]).max(0.0);
            d += excess * excess;
        }
        d
    }
}

enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Median-split bounding volume hierarchy for nearest-surface queries.
struct TriangleTree {
    corners: Vec<[Vec3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 4;

impl TriangleTree {
    fn build(mesh: &TriangleMesh) -> Self {
        let corners: Vec<[Vec3; 3]> = (0..mesh.triangle_count()).map(|t| mesh.corners(t)).collect();
        let centroids: Vec<Vec3> = corners.iter().map(|c| (c[0] + c[1] + c[2]) / 3.0).collect();
        let mut tree = Self { corners, order: (0..centroids.len()).collect(), nodes: Vec::new() };
        let n = tree.order.len();
        tree.split(&centroids, 0, n);
        tree
    }

    fn split(&mut self, centroids: &[Vec3], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut centre_box = Aabb::empty();
        for &t in &self.order[start..end] {
            for p in &self.corners[t] {
                bounds.grow(p);
            }
            centre_box.grow(&centroids[t]);
        }
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return self.nodes.len() - 1;
        }
        let extent = centre_box.hi - centre_box.lo;
        let axis = extent.imax();
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis])
        });
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { bounds, start, end });
        let left = self.split(centroids, start, mid);
        let right = self.split(centroids, mid, end);
        self.nodes[slot] = Node::Inner { bounds, left, right };
        slot
    }

    fn nearest_squared_distance(&self, p: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.bounds().squared_distance(p) >= best {
                continue;
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.order[start..end] {
                        let [a, b, c] = &self.corners[t];
                        let q = closest_point_on_triangle(p, a, b, c);
                        best = best.min((q - p).norm_squared());
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().squared_distance(p);
                    let dr = self.nodes[right].bounds().squared_distance(p);
                    if dl < dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn brute_force(mesh: &TriangleMesh, p: &Vec3) -> f64 {
        (0..mesh.triangle_count())
            .map(|t| {
                let [a, b, c] = mesh.corners(t);
                // Dense barycentric scan, independent of the closed-form routine.
                let mut best = f64::INFINITY;
                let n = 60;
                for i in 0..=n {
                    for j in 0..=(n - i) {
                        let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                        let q = a + (b - a) * u + (c - a) * v;
                        best = best.min((q - p).norm_squared());
                    }
                }
                best
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn tree_matches_brute_force_scan() {
        let mesh = corpus::uv_sphere(1.0, 6, 4);
        let tree = TriangleTree::build(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let p = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let fast = tree.nearest_squared_distance(&p);
            let slow = brute_force(&mesh, &p);
            // The scan only over-estimates, by at most the grid spacing.
            assert!(fast <= slow + 1e-12);
            assert!(slow - fast < 5e-2 * (1.0 + slow), "{fast} vs {slow}");
        }
    }

    #[test]
    fn identity_is_zero() {
        for mesh in corpus::small_corpus() {
            let d = mean_squared_deviation(&mesh, &mesh, 500, 11).unwrap();
            assert!(d < 1e-12, "{:?}: {d}", mesh.name);
        }
    }

    #[test]
    fn parallel_planes() {
        let lower = corpus::planar_grid(1, 1, 1.0, 1.0);
        let mut upper = lower.clone();
        for v in &mut upper.vertices {
            v.z = 0.1;
        }
        let d = mean_squared_deviation(&upper, &lower, 200, 1).unwrap();
        assert!((d - 0.01).abs() < 1e-12, "{d}");
    }

    #[test]
    fn deterministic_for_seed() {
        let a = corpus::uv_sphere(1.0, 10, 8);
        let b = corpus::uv_sphere(1.05, 12, 9);
        let x = mean_squared_deviation(&a, &b, 300, 9).unwrap();
        let y = mean_squared_deviation(&a, &b, 300, 9).unwrap();
        assert_eq!(x.to_bits(), y.to_bits());
    }

    #[test]
    fn rejects_empty_input() {
        let m = corpus::planar_grid(1, 1, 1.0, 1.0);
        assert!(mean_squared_deviation(&TriangleMesh::default(), &m, 10, 0).is_err());
        assert!(mean_squared_deviation(&m, &m, 0, 0).is_err());
    }
}
