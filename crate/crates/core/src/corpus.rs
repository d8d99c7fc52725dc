//! Procedural test meshes: closed and open surfaces, planar grids, and a
//! 12074-triangle statue stand-in used in place of the original scan.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::mesh::{TriangleMesh, Vec3};

/// Triangle count of the statue reference model the experiment degraded.
pub const STATUE_TRIANGLES: usize = 12074;

/// Flat `nx` × `ny` cell grid in z = 0 spanning `[0, width] × [0, height]`, two triangles per cell.
pub fn planar_grid(nx: usize, ny: usize, width: f64, height: f64) -> TriangleMesh {
    heightfield(nx, ny, width, height, |_, _| 0.0).with_name("planar_grid")
}

/// Open grid displaced along z by `f(x, y)`.
pub fn heightfield(nx: usize, ny: usize, width: f64, height: f64, f: impl Fn(f64, f64) -> f64) -> TriangleMesh {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = width * i as f64 / nx as f64;
            let y = height * j as f64 / ny as f64;
            vertices.push(Vec3::new(x, y, f(x, y)));
        }
    }
    let idx = |i: usize, j: usize| (j * (nx + 1) + i) as u32;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, triangles).with_name("heightfield")
}

/// Closed UV sphere with `segments` around the axis and `bands` latitude bands:
/// `2 · segments · (bands − 1)` triangles. `radius(theta, phi)` may deform it.
pub fn deformed_sphere(segments: usize, bands: usize, radius: impl Fn(f64, f64) -> f64) -> TriangleMesh {
    assert!(segments >= 3 && bands >= 2);
    let point = |theta: f64, phi: f64| {
        let r = radius(theta, phi);
        Vec3::new(r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos())
    };
    let mut vertices = vec![point(0.0, 0.0)];
    for i in 1..bands {
        let theta = PI * i as f64 / bands as f64;
        for j in 0..segments {
            vertices.push(point(theta, 2.0 * PI * j as f64 / segments as f64));
        }
    }
    vertices.push(point(PI, 0.0));
    let bottom = (vertices.len() - 1) as u32;
    let ring = |i: usize, j: usize| (1 + (i - 1) * segments + j % segments) as u32;

    let mut triangles = Vec::with_capacity(2 * segments * (bands - 1));
    for j in 0..segments {
        triangles.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..bands - 1 {
        for j in 0..segments {
            let (u0, u1, l0, l1) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
            triangles.push([u0, l0, l1]);
            triangles.push([u0, l1, u1]);
        }
    }
    for j in 0..segments {
        triangles.push([bottom, ring(bands - 1, j + 1), ring(bands - 1, j)]);
    }
    TriangleMesh::new(vertices, triangles).with_name("sphere")
}

pub fn uv_sphere(radius: f64, segments: usize, bands: usize) -> TriangleMesh {
    deformed_sphere(segments, bands, |_, _| radius)
}

/// Upper half of a UV sphere; open along the equator.
pub fn hemisphere(radius: f64, segments: usize, bands: usize) -> TriangleMesh {
    let full = uv_sphere(radius, segments, 2 * bands);
    // Keep the top fan and the first `bands - 1` quad bands.
    let keep = segments + 2 * segments * (bands - 1);
    TriangleMesh::new(full.vertices, full.triangles[..keep].to_vec())
        .compacted()
        .with_name("hemisphere")
}

pub fn torus(major: f64, minor: f64, rings: usize, sides: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(rings * sides);
    for i in 0..rings {
        let u = 2.0 * PI * i as f64 / rings as f64;
        for j in 0..sides {
            let v = 2.0 * PI * j as f64 / sides as f64;
            let r = major + minor * v.cos();
            vertices.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % rings) * sides + j % sides) as u32;
    let mut triangles = Vec::with_capacity(2 * rings * sides);
    for i in 0..rings {
        for j in 0..sides {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, triangles).with_name("torus")
}

/// Axis-aligned cube of edge `size` centred on the origin, each face split into `n × n` cells.
pub fn cube(size: f64, n: usize) -> TriangleMesh {
    let h = size / 2.0;
    // (origin, u, v) with u × v pointing outward.
    let faces = [
        (Vec3::new(-h, -h, h), Vec3::x(), Vec3::y()),
        (Vec3::new(-h, h, -h), Vec3::x(), -Vec3::y()),
        (Vec3::new(h, -h, -h), Vec3::y(), Vec3::z()),
        (Vec3::new(-h, h, -h), -Vec3::y(), Vec3::z()),
        (Vec3::new(-h, h, -h), Vec3::z(), Vec3::x()),
        (Vec3::new(-h, -h, -h), Vec3::x(), Vec3::z()),
    ];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (origin, u, v) in faces {
        let base = vertices.len() as u32;
        for j in 0..=n {
            for i in 0..=n {
                vertices.push(origin + u * (size * i as f64 / n as f64) + v * (size * j as f64 / n as f64));
            }
        }
        let idx = |i: usize, j: usize| base + (j * (n + 1) + i) as u32;
        for j in 0..n {
            for i in 0..n {
                triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
    }
    welded(&TriangleMesh::new(vertices, triangles)).with_name("cube")
}

/// Merges vertices whose coordinates agree to 1e-9 m.
pub fn welded(mesh: &TriangleMesh) -> TriangleMesh {
    let key = |v: &Vec3| {
        let q = |c: f64| (c * 1e9).round() as i64;
        (q(v.x), q(v.y), q(v.z))
    };
    let mut seen: HashMap<(i64, i64, i64), u32> = HashMap::new();
    let mut vertices = Vec::new();
    let remap: Vec<u32> = mesh
        .vertices
        .iter()
        .map(|v| {
            *seen.entry(key(v)).or_insert_with(|| {
                vertices.push(*v);
                (vertices.len() - 1) as u32
            })
        })
        .collect();
    let triangles = mesh
        .triangles
        .iter()
        .map(|t| [remap[t[0] as usize], remap[t[1] as usize], remap[t[2] as usize]])
        .collect();
    TriangleMesh { vertices, triangles, name: mesh.name.clone() }
}

/// A lumpy, roughly human-height closed body plus a small disc, totalling exactly
/// [`STATUE_TRIANGLES`] triangles. Two components, both closed.
pub fn statue_standin() -> TriangleMesh {
    let body = deformed_sphere(60, 101, |theta, phi| {
        0.35 * (1.0
            + 0.18 * (3.0 * theta).sin() * (2.0 * phi).cos()
            + 0.07 * (7.0 * phi).sin() * (5.0 * theta).sin()
            + 0.04 * (11.0 * theta).cos())
    });
    let body = TriangleMesh::new(
        body.vertices.iter().map(|v| Vec3::new(v.x, v.y * 0.8, v.z * 2.6 + 0.9)).collect(),
        body.triangles,
    );
    let disc = deformed_sphere(37, 2, |theta, _| if theta == 0.0 || theta == PI { 0.03 } else { 0.11 });
    let disc = TriangleMesh::new(
        disc.vertices.iter().map(|v| Vec3::new(v.x + 0.75, v.y, v.z + 1.45)).collect(),
        disc.triangles,
    );
    body.merged(&disc).with_name("statue_standin")
}

/// Small meshes (≤ 100 triangles) used for exhaustive checks.
pub fn small_corpus() -> Vec<TriangleMesh> {
    vec![
        planar_grid(5, 5, 1.0, 1.0),
        planar_grid(7, 3, 2.0, 0.5),
        heightfield(6, 6, 1.0, 1.0, |x, y| 0.2 * (3.0 * x).sin() * (2.0 * y).cos()).with_name("bumpy"),
        uv_sphere(1.0, 8, 6),
        cube(1.0, 2),
        torus(1.0, 0.35, 8, 6),
        hemisphere(1.0, 10, 3),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn edge_use(mesh: &TriangleMesh) -> HashMap<(u32, u32), usize> {
        let mut uses = HashMap::new();
        for t in &mesh.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *uses.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        uses
    }

    fn is_closed(mesh: &TriangleMesh) -> bool {
        edge_use(mesh).values().all(|&n| n == 2)
    }

    #[test]
    fn closed_and_open_shapes() {
        assert!(is_closed(&uv_sphere(1.0, 8, 6)));
        assert!(is_closed(&torus(1.0, 0.3, 8, 6)));
        assert!(is_closed(&cube(1.0, 3)));
        assert!(!is_closed(&hemisphere(1.0, 8, 3)));
        assert!(!is_closed(&planar_grid(3, 3, 1.0, 1.0)));
    }

    #[test]
    fn corpus_is_valid_and_small() {
        for m in small_corpus() {
            m.validate().unwrap();
            assert!(m.triangle_count() <= 100, "{:?} has {}", m.name, m.triangle_count());
        }
    }

    #[test]
    fn outward_orientation() {
        for m in [uv_sphere(1.0, 8, 6), cube(2.0, 2)] {
            let c: Vec3 = m.vertices.iter().sum::<Vec3>() / m.vertex_count() as f64;
            for t in 0..m.triangle_count() {
                let [a, b, p] = m.corners(t);
                let n = (b - a).cross(&(p - a));
                assert!(n.dot(&((a + b + p) / 3.0 - c)) > 0.0);
            }
        }
    }

    #[test]
    fn statue_has_reference_count() {
        let s = statue_standin();
        assert_eq!(s.triangle_count(), STATUE_TRIANGLES);
        s.validate().unwrap();
        assert!(is_closed(&s));
        let m = s.metrics();
        assert!(m.bounding_box.1.z - m.bounding_box.0.z > 1.5);
    }
}
