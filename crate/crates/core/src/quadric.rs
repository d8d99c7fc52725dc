//! Quadric error forms: each one sums squared distances to a set of planes.

use std::ops::{Add, AddAssign};

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::mesh::{triangle_area, Vec3, MIN_TRIANGLE_AREA};

/// Determinant magnitude below which the position subsystem is treated as singular.
pub const SINGULAR_DETERMINANT: f64 = 1e-10;

/// Upper triangle of a symmetric 4×4 matrix, row-major:
/// `[q00, q01, q02, q03, q11, q12, q13, q22, q23, q33]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quadric(pub [f64; 10]);

impl Quadric {
    pub const ZERO: Quadric = Quadric([0.0; 10]);

    /// `p pᵀ` for the plane `n·x + d = 0`; `n` should be unit length.
    pub fn from_plane(n: &Vec3, d: f64) -> Self {
        let (a, b, c) = (n.x, n.y, n.z);
        Quadric([a * a, a * b, a * c, a * d, b * b, b * c, b * d, c * c, c * d, d * d])
    }

    pub fn scaled(&self, w: f64) -> Self {
        Quadric(self.0.map(|q| q * w))
    }

    /// `[x, 1]ᵀ Q [x, 1]`.
    pub fn error(&self, x: &Vec3) -> f64 {
        let q = &self.0;
        let (px, py, pz) = (x.x, x.y, x.z);
        q[0] * px * px
            + q[4] * py * py
            + q[7] * pz * pz
            + 2.0 * (q[1] * px * py + q[2] * px * pz + q[5] * py * pz)
            + 2.0 * (q[3] * px + q[6] * py + q[8] * pz)
            + q[9]
    }

    fn position_block(&self) -> Matrix3<f64> {
        let q = &self.0;
        Matrix3::new(q[0], q[1], q[2], q[1], q[4], q[5], q[2], q[5], q[7])
    }

    /// Point minimizing the error, when the 3×3 position subsystem is invertible.
    pub fn minimizer(&self) -> Option<Vec3> {
        let a = self.position_block();
        if a.determinant().abs() <= SINGULAR_DETERMINANT {
            return None;
        }
        let rhs = -Vec3::new(self.0[3], self.0[6], self.0[8]);
        a.try_inverse().map(|inv| inv * rhs)
    }
}

impl Add for Quadric {
    type Output = Quadric;

    fn add(mut self, rhs: Quadric) -> Quadric {
        self += rhs;
        self
    }
}

impl AddAssign for Quadric {
    fn add_assign(&mut self, rhs: Quadric) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

/// Unit normal and offset of the plane through a triangle.
pub fn triangle_plane(a: &Vec3, b: &Vec3, c: &Vec3) -> Result<(Vec3, f64)> {
    if triangle_area(a, b, c) < MIN_TRIANGLE_AREA {
        return Err(Error::invalid("cannot build a plane from a degenerate triangle"));
    }
    let n = (b - a).cross(&(c - a)).normalize();
    Ok((n, -n.dot(a)))
}

/// Unweighted quadric of a triangle's supporting plane.
pub fn plane_quadric(triangle: [Vec3; 3]) -> Result<Quadric> {
    let (n, d) = triangle_plane(&triangle[0], &triangle[1], &triangle[2])?;
    Ok(Quadric::from_plane(&n, d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseTarget {
    pub position: Vec3,
    pub cost: f64,
    pub used_fallback: bool,
}

/// Position and cost for merging `v1` and `v2` under `q_sum`. Falls back to the
/// cheapest of `{v1, v2, midpoint}` (first wins ties) when the solve is singular.
pub fn optimal_collapse(q_sum: &Quadric, v1: &Vec3, v2: &Vec3) -> CollapseTarget {
    if let Some(p) = q_sum.minimizer() {
        let cost = q_sum.error(&p);
        if p.iter().all(|c| c.is_finite()) && cost.is_finite() {
            return CollapseTarget { position: p, cost: cost.max(0.0), used_fallback: false };
        }
    }
    let mid = (v1 + v2) * 0.5;
    let mut best = CollapseTarget { position: *v1, cost: q_sum.error(v1), used_fallback: true };
    for p in [*v2, mid] {
        let e = q_sum.error(&p);
        if e < best.cost {
            best.position = p;
            best.cost = e;
        }
    }
    best.cost = best.cost.max(0.0);
    best
}
