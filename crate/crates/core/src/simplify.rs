//! Greedy quadric-error edge collapse and LOD chain generation.
//!
//! Face quadrics are weighted by triangle area relative to the mesh's mean
//! triangle area, so the position subsystem stays dimensionless and the
//! singularity test does not depend on mesh scale. Boundary edges add a
//! heavily weighted plane through the edge, perpendicular to its face.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};

use crate::error::{Error, Result};
use crate::mesh::{triangle_area, TriangleMesh, Vec3, MIN_TRIANGLE_AREA};
use crate::quadric::{optimal_collapse, triangle_plane, CollapseTarget, Quadric};

/// Simplification never goes below this many triangles.
pub const MIN_TRIANGLES: usize = 4;

/// Weight multiplier for the boundary-preserving constraint planes.
pub const BOUNDARY_WEIGHT: f64 = 1000.0;

/// Seven aggressiveness fractions used when none are supplied, ending at a 20× reduction.
pub const DEFAULT_LADDER: [f64; 7] = [0.50, 0.625, 0.70, 0.775, 0.85, 0.90, 0.95];

fn relative_weights(mesh: &TriangleMesh) -> Vec<f64> {
    let areas: Vec<f64> = (0..mesh.triangle_count()).map(|t| mesh.triangle_area(t)).collect();
    let valid: Vec<f64> = areas.iter().copied().filter(|&a| a >= MIN_TRIANGLE_AREA).collect();
    let mean = if valid.is_empty() { 1.0 } else { valid.iter().sum::<f64>() / valid.len() as f64 };
    areas.iter().map(|a| a / mean).collect()
}

/// Per-vertex sum of the (area-weighted) plane quadrics of incident triangles.
/// Isolated vertices and degenerate triangles contribute nothing.
pub fn vertex_quadrics(mesh: &TriangleMesh) -> Vec<Quadric> {
    let weights = relative_weights(mesh);
    let mut out = vec![Quadric::ZERO; mesh.vertex_count()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = mesh.corners(t);
        let Ok((n, d)) = triangle_plane(&a, &b, &c) else { continue };
        let q = Quadric::from_plane(&n, d).scaled(weights[t]);
        for &v in tri {
            out[v as usize] += q;
        }
    }
    out
}

fn boundary_quadrics(mesh: &TriangleMesh, quadrics: &mut [Quadric]) {
    let weights = relative_weights(mesh);
    let mut directed: Vec<(u32, u32, usize)> = Vec::with_capacity(mesh.triangle_count() * 3);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            directed.push((tri[k], tri[(k + 1) % 3], t));
        }
    }
    let mut undirected: Vec<(u32, u32)> = directed.iter().map(|&(a, b, _)| (a.min(b), a.max(b))).collect();
    undirected.sort_unstable();
    for &(a, b, t) in &directed {
        let key = (a.min(b), a.max(b));
        let lo = undirected.partition_point(|e| *e < key);
        let hi = undirected.partition_point(|e| *e <= key);
        if hi - lo != 1 {
            continue;
        }
        let [p, q, r] = mesh.corners(t);
        let Ok((n, _)) = triangle_plane(&p, &q, &r) else { continue };
        let (pa, pb) = (mesh.vertices[a as usize], mesh.vertices[b as usize]);
        let m = (pb - pa).cross(&n);
        if m.norm() == 0.0 {
            continue;
        }
        let m = m.normalize();
        let cq = Quadric::from_plane(&m, -m.dot(&pa)).scaled(BOUNDARY_WEIGHT * weights[t]);
        quadrics[a as usize] += cq;
        quadrics[b as usize] += cq;
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    a: u32,
    b: u32,
    stamps: (u32, u32),
    position: Vec3,
}

impl Candidate {
    fn key(&self) -> (f64, u32, u32, u32, u32) {
        (self.cost, self.a, self.b, self.stamps.0, self.stamps.1)
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        let (x, y) = (self.key(), other.key());
        x.0.total_cmp(&y.0).then((x.1, x.2, x.3, x.4).cmp(&(y.1, y.2, y.3, y.4)))
    }
}

/// One applied collapse: `removed` was merged into `kept` (`kept < removed`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseRecord {
    pub kept: u32,
    pub removed: u32,
    pub position: Vec3,
    pub cost: f64,
    pub triangles_removed: usize,
}

/// Incremental edge-collapse state.
///
/// Candidates live in a lazy min-heap ordered by `(cost, low index, high index)`.
/// A popped candidate that fails the legality checks is parked; parked edges
/// are re-queued whenever a collapse touches their neighbourhood, so each
/// applied collapse is the cheapest legal one at that moment.
pub struct Simplifier {
    positions: Vec<Vec3>,
    quadrics: Vec<Quadric>,
    alive: Vec<bool>,
    stamps: Vec<u32>,
    triangles: Vec<[u32; 3]>,
    live: Vec<bool>,
    incident: Vec<Vec<u32>>,
    live_count: usize,
    heap: BinaryHeap<Reverse<Candidate>>,
    parked: BTreeSet<(u32, u32)>,
    name: Option<String>,
}

impl Simplifier {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        mesh.validate()?;
        let mut quadrics = vertex_quadrics(mesh);
        boundary_quadrics(mesh, &mut quadrics);
        let mut incident = vec![Vec::new(); mesh.vertex_count()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for &v in tri {
                incident[v as usize].push(t as u32);
            }
        }
        let mut s = Simplifier {
            positions: mesh.vertices.clone(),
            quadrics,
            alive: vec![true; mesh.vertex_count()],
            stamps: vec![0; mesh.vertex_count()],
            triangles: mesh.triangles.clone(),
            live: vec![true; mesh.triangle_count()],
            incident,
            live_count: mesh.triangle_count(),
            heap: BinaryHeap::new(),
            parked: BTreeSet::new(),
            name: mesh.name.clone(),
        };
        for (a, b) in s.edges() {
            s.push(a, b);
        }
        Ok(s)
    }

    pub fn live_triangle_count(&self) -> usize {
        self.live_count
    }

    pub fn position(&self, v: u32) -> Vec3 {
        self.positions[v as usize]
    }

    pub fn quadric(&self, v: u32) -> Quadric {
        self.quadrics[v as usize]
    }

    /// All current edges as `(low, high)` pairs, sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out: Vec<(u32, u32)> = self
            .triangles
            .iter()
            .zip(&self.live)
            .filter(|(_, &l)| l)
            .flat_map(|(t, _)| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Optimal merge position and cost for edge `(a, b)` in the current state.
    pub fn evaluate(&self, a: u32, b: u32) -> CollapseTarget {
        let q = self.quadrics[a as usize] + self.quadrics[b as usize];
        optimal_collapse(&q, &self.positions[a as usize], &self.positions[b as usize])
    }

    fn push(&mut self, a: u32, b: u32) {
        let (a, b) = (a.min(b), a.max(b));
        let target = self.evaluate(a, b);
        self.heap.push(Reverse(Candidate {
            cost: target.cost,
            a,
            b,
            stamps: (self.stamps[a as usize], self.stamps[b as usize]),
            position: target.position,
        }));
    }

    fn neighbours(&self, v: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self.incident[v as usize]
            .iter()
            .flat_map(|&t| self.triangles[t as usize])
            .filter(|&u| u != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn shared_triangles(&self, a: u32, b: u32) -> Vec<u32> {
        self.incident[a as usize]
            .iter()
            .copied()
            .filter(|&t| self.triangles[t as usize].contains(&b))
            .collect()
    }

    fn is_boundary_vertex(&self, v: u32) -> bool {
        self.neighbours(v).into_iter().any(|u| self.shared_triangles(v, u).len() == 1)
    }

    /// Whether collapsing `(a, b)` to `position` keeps the mesh manifold, keeps at
    /// least [`MIN_TRIANGLES`], creates no degenerate or duplicate triangle, and
    /// turns no surviving triangle's normal by more than 90°.
    pub fn is_legal(&self, a: u32, b: u32, position: &Vec3) -> bool {
        if a == b || !self.alive[a as usize] || !self.alive[b as usize] {
            return false;
        }
        let shared = self.shared_triangles(a, b);
        if shared.is_empty() || shared.len() > 2 {
            return false;
        }
        if self.live_count < MIN_TRIANGLES + shared.len() {
            return false;
        }

        // Link condition: the only common neighbours are the apexes of the shared triangles.
        let na = self.neighbours(a);
        let nb = self.neighbours(b);
        let common = na.iter().filter(|v| nb.binary_search(v).is_ok()).count();
        if common != shared.len() {
            return false;
        }
        if shared.len() == 2 && self.is_boundary_vertex(a) && self.is_boundary_vertex(b) {
            return false;
        }

        let mut kept_sets: Vec<[u32; 3]> = Vec::new();
        for &t in &self.incident[a as usize] {
            if shared.contains(&t) {
                continue;
            }
            let mut s = self.triangles[t as usize];
            s.sort_unstable();
            kept_sets.push(s);
        }
        for (owner, other) in [(a, b), (b, a)] {
            for &t in &self.incident[owner as usize] {
                if shared.contains(&t) {
                    continue;
                }
                let tri = self.triangles[t as usize];
                let old: Vec<Vec3> = tri.iter().map(|&v| self.positions[v as usize]).collect();
                let new: Vec<Vec3> = tri
                    .iter()
                    .map(|&v| if v == owner || v == other { *position } else { self.positions[v as usize] })
                    .collect();
                let n_old = (old[1] - old[0]).cross(&(old[2] - old[0]));
                let n_new = (new[1] - new[0]).cross(&(new[2] - new[0]));
                if triangle_area(&new[0], &new[1], &new[2]) < MIN_TRIANGLE_AREA || n_old.dot(&n_new) < 0.0 {
                    return false;
                }
                if owner == b {
                    let mut s = tri.map(|v| if v == b { a } else { v });
                    s.sort_unstable();
                    if kept_sets.contains(&s) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Applies the cheapest legal collapse, or returns `None` when none remains.
    pub fn step(&mut self) -> Option<CollapseRecord> {
        while let Some(Reverse(c)) = self.heap.pop() {
            let (a, b) = (c.a, c.b);
            if !self.alive[a as usize]
                || !self.alive[b as usize]
                || c.stamps != (self.stamps[a as usize], self.stamps[b as usize])
            {
                continue;
            }
            if !self.is_legal(a, b, &c.position) {
                self.parked.insert((a, b));
                continue;
            }
            let removed = self.collapse(a, b, c.position);
            return Some(CollapseRecord { kept: a, removed: b, position: c.position, cost: c.cost, triangles_removed: removed });
        }
        None
    }

    fn collapse(&mut self, a: u32, b: u32, position: Vec3) -> usize {
        for v in self.neighbours(a).into_iter().chain(self.neighbours(b)) {
            self.parked.remove(&(a.min(v), a.max(v)));
            self.parked.remove(&(b.min(v), b.max(v)));
        }

        let shared = self.shared_triangles(a, b);
        for &t in &shared {
            self.live[t as usize] = false;
            for v in self.triangles[t as usize] {
                self.incident[v as usize].retain(|&x| x != t);
            }
        }
        self.live_count -= shared.len();

        let moved = std::mem::take(&mut self.incident[b as usize]);
        for &t in &moved {
            for v in self.triangles[t as usize].iter_mut() {
                if *v == b {
                    *v = a;
                }
            }
        }
        self.incident[a as usize].extend(moved);
        self.incident[a as usize].sort_unstable();
        self.alive[b as usize] = false;
        self.positions[a as usize] = position;
        let qb = self.quadrics[b as usize];
        self.quadrics[a as usize] += qb;
        self.stamps[a as usize] += 1;

        let ring = self.neighbours(a);
        for &v in &ring {
            self.push(a, v);
        }
        for &v in &ring {
            for u in self.neighbours(v) {
                let key = (v.min(u), v.max(u));
                if self.parked.remove(&key) {
                    self.push(key.0, key.1);
                }
            }
        }
        shared.len()
    }

    /// Current state as a compact mesh; surviving triangles keep their relative order.
    pub fn to_mesh(&self) -> TriangleMesh {
        let triangles = self
            .triangles
            .iter()
            .zip(&self.live)
            .filter(|(_, &l)| l)
            .map(|(t, _)| *t)
            .collect();
        TriangleMesh { vertices: self.positions.clone(), triangles, name: self.name.clone() }.compacted()
    }
}

#[derive(Debug, Clone)]
pub struct SimplifyOutcome {
    pub mesh: TriangleMesh,
    pub target_triangles: usize,
    pub achieved_triangle_count: usize,
    /// False when legal collapses ran out before the target was met.
    pub reached_target: bool,
    pub collapses: usize,
}

fn check_target(mesh: &TriangleMesh, target: usize) -> Result<()> {
    if target < MIN_TRIANGLES {
        return Err(Error::invalid(format!("target {target} is below the minimum of {MIN_TRIANGLES} triangles")));
    }
    if target > mesh.triangle_count() {
        return Err(Error::invalid(format!(
            "target {target} exceeds the mesh's {} triangles",
            mesh.triangle_count()
        )));
    }
    Ok(())
}

/// Collapses edges greedily until at most `target_triangles` remain.
pub fn simplify(mesh: &TriangleMesh, target_triangles: usize) -> Result<SimplifyOutcome> {
    check_target(mesh, target_triangles)?;
    if target_triangles == mesh.triangle_count() {
        mesh.validate()?;
        return Ok(SimplifyOutcome {
            mesh: mesh.clone(),
            target_triangles,
            achieved_triangle_count: target_triangles,
            reached_target: true,
            collapses: 0,
        });
    }
    let mut s = Simplifier::new(mesh)?;
    let mut collapses = 0;
    while s.live_triangle_count() > target_triangles {
        if s.step().is_none() {
            break;
        }
        collapses += 1;
    }
    let out = s.to_mesh();
    Ok(SimplifyOutcome {
        achieved_triangle_count: out.triangle_count(),
        reached_target: out.triangle_count() <= target_triangles,
        mesh: out,
        target_triangles,
        collapses,
    })
}

#[derive(Debug, Clone)]
pub struct LodLevel {
    pub aggressiveness: f64,
    pub target_triangles: usize,
    pub achieved_triangle_count: usize,
    pub reached_target: bool,
    pub mesh: TriangleMesh,
}

#[derive(Debug, Clone)]
pub struct LodChain {
    pub reference: TriangleMesh,
    pub levels: Vec<LodLevel>,
}

impl LodChain {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Triangle budget for removing `aggressiveness` of `reference_count` triangles.
pub fn lod_target(reference_count: usize, aggressiveness: f64) -> usize {
    ((reference_count as f64 * (1.0 - aggressiveness)).round() as usize).max(MIN_TRIANGLES)
}

pub fn validate_ladder(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::invalid("aggressiveness ladder is empty"));
    }
    if let Some(a) = levels.iter().find(|&&a| !(a > 0.0 && a < 1.0)) {
        return Err(Error::invalid(format!("aggressiveness {a} is outside (0, 1)")));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("aggressiveness ladder must be strictly increasing"));
    }
    Ok(())
}

/// Builds the reference plus one simplified level per fraction. Because the greedy
/// sequence does not depend on where it stops, each level is a snapshot of one run.
pub fn generate_lod_chain(mesh: &TriangleMesh, levels: &[f64]) -> Result<LodChain> {
    validate_ladder(levels)?;
    let reference_count = mesh.triangle_count();
    let mut s = Simplifier::new(mesh)?;
    let mut out = vec![LodLevel {
        aggressiveness: 0.0,
        target_triangles: reference_count,
        achieved_triangle_count: reference_count,
        reached_target: true,
        mesh: mesh.clone(),
    }];
    let mut exhausted = false;
    for &aggressiveness in levels {
        let target = lod_target(reference_count, aggressiveness);
        while !exhausted && s.live_triangle_count() > target {
            exhausted = s.step().is_none();
        }
        let level_mesh = s.to_mesh();
        out.push(LodLevel {
            aggressiveness,
            target_triangles: target,
            achieved_triangle_count: level_mesh.triangle_count(),
            reached_target: level_mesh.triangle_count() <= target,
            mesh: level_mesh,
        });
    }
    Ok(LodChain { reference: mesh.clone(), levels: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::deviation::mean_squared_deviation;

    #[test]
    fn single_triangle_quadrics_equal_plane_quadric() {
        let m = TriangleMesh::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 1.0)],
            vec![[0, 1, 2]],
        );
        let q = crate::quadric::plane_quadric(m.corners(0)).unwrap();
        for vq in vertex_quadrics(&m) {
            for k in 0..10 {
                assert!((vq.0[k] - q.0[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn isolated_vertex_has_zero_quadric() {
        let mut m = corpus::planar_grid(1, 1, 1.0, 1.0);
        m.vertices.push(Vec3::new(5.0, 5.0, 5.0));
        assert_eq!(*vertex_quadrics(&m).last().unwrap(), Quadric::ZERO);
    }

    #[test]
    fn interior_grid_vertex_is_flat() {
        let m = corpus::planar_grid(4, 4, 1.0, 1.0);
        let q = vertex_quadrics(&m)[12];
        for (x, y) in [(0.3, 0.7), (-4.0, 2.0), (10.0, -3.0)] {
            assert!(q.error(&Vec3::new(x, y, 0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn target_equal_to_count_is_noop() {
        let m = corpus::uv_sphere(1.0, 8, 6);
        let out = simplify(&m, m.triangle_count()).unwrap();
        assert_eq!(out.mesh, m);
        assert_eq!(out.collapses, 0);
    }

    #[test]
    fn bad_targets() {
        let m = corpus::uv_sphere(1.0, 8, 6);
        assert!(simplify(&m, 3).is_err());
        assert!(simplify(&m, m.triangle_count() + 1).is_err());
    }

    #[test]
    fn planar_grid_is_lossless() {
        let grid = corpus::planar_grid(10, 10, 1.0, 1.0);
        assert_eq!(grid.triangle_count(), 200);
        let out = simplify(&grid, 50).unwrap();
        assert!(out.reached_target);
        assert!(out.achieved_triangle_count <= 50);
        out.mesh.validate().unwrap();
        let d = mean_squared_deviation(&out.mesh, &grid, 2000, 1).unwrap();
        assert!(d < 1e-10, "{d}");
        // Simplified vertices stay in the original footprint.
        for v in &out.mesh.vertices {
            assert!(v.z.abs() < 1e-12);
            assert!((-1e-12..=1.0 + 1e-12).contains(&v.x) && (-1e-12..=1.0 + 1e-12).contains(&v.y));
        }
        let area = out.mesh.metrics().surface_area;
        assert!((area - 1.0).abs() < 1e-9, "{area}");
    }

    #[test]
    fn counts_stay_in_bounds() {
        for m in corpus::small_corpus() {
            let target = (m.triangle_count() / 4).max(MIN_TRIANGLES);
            let out = simplify(&m, target).unwrap();
            out.mesh.validate().unwrap();
            assert!(out.achieved_triangle_count >= MIN_TRIANGLES);
            if out.reached_target {
                assert!(out.achieved_triangle_count <= target + 2);
            }
        }
    }

    #[test]
    fn surviving_triangles_never_fold() {
        // In-plane jitter keeps every normal at ±z, so rejecting >90° turns is the same as rejecting folds.
        let mut m = corpus::planar_grid(12, 12, 1.0, 1.0);
        for (i, v) in m.vertices.iter_mut().enumerate() {
            let (x, y) = (v.x, v.y);
            if x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0 {
                v.x += 0.025 * ((i * 7919) % 13) as f64 / 13.0;
                v.y += 0.025 * ((i * 104729) % 11) as f64 / 11.0;
            }
        }
        let out = simplify(&m, 40).unwrap();
        for t in 0..out.mesh.triangle_count() {
            let [a, b, c] = out.mesh.corners(t);
            assert!((b - a).cross(&(c - a)).z > 0.0);
        }
        assert!((out.mesh.metrics().surface_area - 1.0).abs() < 1e-9);
    }

    #[test]
    fn chain_targets_and_order() {
        let m = corpus::uv_sphere(1.0, 24, 16);
        let chain = generate_lod_chain(&m, &[0.5, 0.75, 0.9]).unwrap();
        assert_eq!(chain.len(), 4);
        assert_eq!(chain.levels[0].aggressiveness, 0.0);
        assert_eq!(chain.levels[0].achieved_triangle_count, m.triangle_count());
        for pair in chain.levels.windows(2) {
            assert!(pair[1].aggressiveness > pair[0].aggressiveness);
            assert!(pair[1].achieved_triangle_count <= pair[0].achieved_triangle_count);
        }
        for level in &chain.levels {
            level.mesh.validate().unwrap();
            assert!(level.achieved_triangle_count as f64 <= m.triangle_count() as f64 * (1.0 - level.aggressiveness) + 2.0);
        }
    }

    #[test]
    fn chain_levels_match_independent_runs() {
        let m = corpus::torus(1.0, 0.4, 16, 10);
        let chain = generate_lod_chain(&m, &[0.3, 0.6]).unwrap();
        for level in &chain.levels[1..] {
            let direct = simplify(&m, level.target_triangles).unwrap();
            assert_eq!(direct.mesh, level.mesh);
        }
    }

    #[test]
    fn ladder_targets() {
        assert_eq!(lod_target(12074, 0.95), 604);
        assert_eq!(lod_target(12074, 0.75), 3019);
        assert!(validate_ladder(&[]).is_err());
        assert!(validate_ladder(&[0.5, 0.5]).is_err());
        assert!(validate_ladder(&[0.7, 0.5]).is_err());
        assert!(validate_ladder(&[0.0, 0.5]).is_err());
        assert!(validate_ladder(&DEFAULT_LADDER).is_ok());
        let m = corpus::uv_sphere(1.0, 8, 6);
        assert!(generate_lod_chain(&m, &[0.6, 0.4]).is_err());
    }
}
