//! Indexed triangle meshes and the geometric measurements taken on them.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Triangles with an area below this (m²) are treated as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshMetrics {
    pub triangle_count: usize,
    pub vertex_count: usize,
    pub surface_area: f64,
    pub bounding_box: (Vec3, Vec3),
}

pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        Self { vertices, triangles, name: None }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        triangle_area(&a, &b, &c)
    }

    /// Index-range and repeated-vertex checks only.
    pub fn check_structure(&self) -> Result<()> {
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i as usize >= n) {
                return Err(Error::structure(format!(
                    "triangle {t} references vertex {bad} but the mesh has {n} vertices"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::structure(format!("triangle {t} repeats a vertex: {tri:?}")));
            }
        }
        Ok(())
    }

    /// Full invariant check, including degenerate-area rejection and finite coordinates.
    pub fn validate(&self) -> Result<()> {
        self.check_structure()?;
        if let Some(i) = self.vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::structure(format!("vertex {i} has a non-finite coordinate")));
        }
        for t in 0..self.triangles.len() {
            let area = self.triangle_area(t);
            if area < MIN_TRIANGLE_AREA {
                return Err(Error::structure(format!("triangle {t} is degenerate (area {area:e})")));
            }
        }
        Ok(())
    }

    /// Drops degenerate triangles, then unreferenced vertices. Vertex order is preserved.
    pub fn cleaned(&self) -> TriangleMesh {
        let triangles: Vec<[u32; 3]> = (0..self.triangles.len())
            .filter(|&t| self.triangle_area(t) >= MIN_TRIANGLE_AREA)
            .map(|t| self.triangles[t])
            .collect();
        TriangleMesh {
            vertices: self.vertices.clone(),
            triangles,
            name: self.name.clone(),
        }
        .compacted()
    }

    /// Removes vertices no triangle references, remapping indices in order.
    pub fn compacted(&self) -> TriangleMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        for tri in &self.triangles {
            for &i in tri {
                remap[i as usize] = 0;
            }
        }
        let mut vertices = Vec::new();
        for (i, slot) in remap.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = vertices.len() as u32;
                vertices.push(self.vertices[i]);
            }
        }
        let triangles = self
            .triangles
            .iter()
            .map(|t| [remap[t[0] as usize], remap[t[1] as usize], remap[t[2] as usize]])
            .collect();
        TriangleMesh { vertices, triangles, name: self.name.clone() }
    }

    /// Concatenates two meshes into one with disjoint components.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let offset = self.vertices.len() as u32;
        let mut out = self.clone();
        out.vertices.extend_from_slice(&other.vertices);
        out.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]));
        out
    }

    pub fn metrics(&self) -> MeshMetrics {
        metrics(self)
    }
}

pub fn metrics(mesh: &TriangleMesh) -> MeshMetrics {
    let surface_area = (0..mesh.triangles.len()).map(|t| mesh.triangle_area(t)).sum();
    let bounding_box = if mesh.vertices.is_empty() {
        (Vec3::zeros(), Vec3::zeros())
    } else {
        mesh.vertices.iter().fold(
            (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), v| (lo.inf(v), hi.sup(v)),
        )
    };
    MeshMetrics {
        triangle_count: mesh.triangles.len(),
        vertex_count: mesh.vertices.len(),
        surface_area,
        bounding_box,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_right_triangle() -> TriangleMesh {
        TriangleMesh::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
    }

    #[test]
    fn right_triangle_area() {
        let m = metrics(&unit_right_triangle());
        assert_eq!(m.triangle_count, 1);
        assert_eq!(m.vertex_count, 3);
        assert!((m.surface_area - 0.5).abs() < 1e-15);
        assert_eq!(m.bounding_box.1, Vec3::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn disjoint_triangles_add_area() {
        let mut other = unit_right_triangle();
        for v in &mut other.vertices {
            v.z += 5.0;
        }
        let m = unit_right_triangle().merged(&other).metrics();
        assert_eq!(m.triangle_count, 2);
        assert!((m.surface_area - 1.0).abs() < 1e-15);
    }

    #[test]
    fn metrics_ignore_triangle_order() {
        let mesh = crate::corpus::uv_sphere(1.0, 8, 6);
        let mut shuffled = mesh.clone();
        shuffled.triangles.reverse();
        shuffled.triangles.rotate_left(5);
        let (a, b) = (mesh.metrics(), shuffled.metrics());
        assert_eq!(a.triangle_count, b.triangle_count);
        assert!((a.surface_area - b.surface_area).abs() < 1e-12);
        assert_eq!(a.bounding_box, b.bounding_box);
    }

    #[test]
    fn structure_errors() {
        let mut m = unit_right_triangle();
        m.triangles.push([0, 1, 5]);
        assert!(matches!(m.validate(), Err(Error::Structure(_))));
        let mut m = unit_right_triangle();
        m.triangles[0] = [0, 0, 1];
        assert!(m.check_structure().is_err());
        let mut m = unit_right_triangle();
        m.vertices[2] = Vec3::new(2.0, 0.0, 0.0);
        assert!(m.validate().is_err());
        assert!(m.cleaned().is_empty());
    }

    #[test]
    fn compaction_drops_unused_vertices() {
        let mut m = unit_right_triangle();
        m.vertices.insert(0, Vec3::new(9.0, 9.0, 9.0));
        m.triangles[0] = [1, 2, 3];
        let c = m.compacted();
        assert_eq!(c.vertex_count(), 3);
        assert_eq!(c.triangles[0], [0, 1, 2]);
    }
}
