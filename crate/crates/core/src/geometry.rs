//! Planar polygon utilities shared by scenes and inclusion shapes.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point (or vector) in the plane.
pub type Point = [f64; 2];

/// Unit direction for an angle given in degrees.
///
/// Multiples of 45° are reduced to the first octant before evaluating the
/// trigonometric functions, so that mirrored angles produce exactly mirrored
/// vectors (e.g. 45° and 315° differ only in the sign of `y`).
pub fn unit_direction(deg: f64) -> Point {
    let d = deg.rem_euclid(360.0);
    // quadrant reduction: d = 90 q + r with r in [0, 90)
    let q = (d / 90.0).floor();
    let r = d - 90.0 * q;
    let (c, s) = if r == 0.0 {
        (1.0, 0.0)
    } else if r == 45.0 {
        let v = std::f64::consts::FRAC_1_SQRT_2;
        (v, v)
    } else if r > 45.0 {
        let t = (90.0 - r).to_radians();
        (t.sin(), t.cos())
    } else {
        let t = r.to_radians();
        (t.cos(), t.sin())
    };
    match q as i64 {
        0 => [c, s],
        1 => [-s, c],
        2 => [-c, -s],
        _ => [s, -c],
    }
}

pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

/// Euclidean distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Closed polygon given by its vertex list (the closing edge is implicit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

/// Area and centroid of a polygon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub area: f64,
    pub centroid: Point,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    /// Regular `n`-gon inscribed in the circle of given radius centred at the origin.
    pub fn regular(n: usize, radius: f64) -> Self {
        let vertices = (0..n)
            .map(|k| {
                let d = unit_direction(360.0 * k as f64 / n as f64);
                [radius * d[0], radius * d[1]]
            })
            .collect();
        Self { vertices }
    }

    /// True if the vertex list is exactly invariant under `v -> -v`.
    pub fn is_point_symmetric(&self) -> bool {
        let n = self.vertices.len();
        n % 2 == 0
            && (0..n / 2).all(|k| {
                let (a, b) = (self.vertices[k], self.vertices[k + n / 2]);
                a[0] == -b[0] && a[1] == -b[1]
            })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Signed shoelace area (positive for counterclockwise orientation).
    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| cross(a, b)).sum::<f64>()
    }

    /// Exact area and first-moment centroid. Requires counterclockwise orientation.
    pub fn moments(&self) -> Result<Moments> {
        let mut a2 = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for (p, q) in self.edges() {
            let c = cross(p, q);
            a2 += c;
            cx += (p[0] + q[0]) * c;
            cy += (p[1] + q[1]) * c;
        }
        let area = 0.5 * a2;
        if !(area > 0.0) {
            return Err(Error::Geometry(format!(
                "polygon has non-positive signed area {area:e} (expected counterclockwise)"
            )));
        }
        let centroid = if self.is_point_symmetric() {
            [0.0, 0.0]
        } else {
            [cx / (6.0 * area), cy / (6.0 * area)]
        };
        Ok(Moments { area, centroid })
    }

    /// Even-odd ray casting test. Points exactly on an edge may go either way;
    /// use [`Polygon::on_boundary`] when ties matter.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        let n = self.vertices.len();
        let mut j = n - 1;
        for i in 0..n {
            let vi = self.vertices[i];
            let vj = self.vertices[j];
            if (vi[1] > p[1]) != (vj[1] > p[1]) {
                let x = vj[0] + (p[1] - vj[1]) * (vi[0] - vj[0]) / (vi[1] - vj[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// True if `p` lies within `tol` of some edge.
    pub fn on_boundary(&self, p: Point, tol: f64) -> bool {
        self.edges().any(|(a, b)| point_segment_distance(p, a, b) <= tol)
    }

    /// Inside or on the boundary (within `tol`).
    pub fn covers(&self, p: Point, tol: f64) -> bool {
        self.on_boundary(p, tol) || self.contains(p)
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Checks that no two non-adjacent edges intersect and that adjacent
    /// edges only share their common vertex.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let e: Vec<(Point, Point)> = self.edges().collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    // Adjacent edges must not fold back onto each other.
                    let (a, b) = e[i];
                    let (c, d) = e[j];
                    let (shared, u, v) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                    let du = sub(u, shared);
                    let dv = sub(v, shared);
                    if cross(du, dv).abs() <= 1e-14 && du[0] * dv[0] + du[1] * dv[1] > 0.0 {
                        return false;
                    }
                    let _ = (c, d);
                    continue;
                }
                if segments_intersect(e[i].0, e[i].1, e[j].0, e[j].1) {
                    return false;
                }
            }
        }
        true
    }

    pub fn translate_scale(&self, center: Point, scale: f64) -> Polygon {
        Polygon {
            vertices: self
                .vertices
                .iter()
                .map(|v| [center[0] + scale * v[0], center[1] + scale * v[1]])
                .collect(),
        }
    }

    pub fn rotate(&self, deg: f64) -> Polygon {
        let [c, s] = unit_direction(deg);
        Polygon {
            vertices: self
                .vertices
                .iter()
                .map(|v| [c * v[0] - s * v[1], s * v[0] + c * v[1]])
                .collect(),
        }
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    cross(sub(b, a), sub(c, a))
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_moments() {
        let sq = Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let m = sq.moments().unwrap();
        assert_eq!(m.area, 1.0);
        assert_eq!(m.centroid, [0.5, 0.5]);
    }

    #[test]
    fn clockwise_polygon_is_rejected() {
        let sq = Polygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]);
        assert!(matches!(sq.moments(), Err(Error::Geometry(_))));
    }

    #[test]
    fn mirrored_directions_are_exact() {
        for deg in [0.0, 10.0, 30.0, 45.0, 60.0, 80.0, 135.0, 170.0] {
            let a = unit_direction(deg);
            let b = unit_direction(360.0 - deg);
            assert_eq!(a[0], b[0], "{deg}");
            assert_eq!(a[1], -b[1], "{deg}");
        }
        assert_eq!(unit_direction(90.0), [0.0, 1.0]);
        assert_eq!(unit_direction(180.0), [-1.0, 0.0]);
        assert_eq!(unit_direction(270.0), [0.0, -1.0]);
        let d = unit_direction(30.0);
        assert!((d[0] - 30f64.to_radians().cos()).abs() < 1e-15);
        assert!((d[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bowtie_is_not_simple() {
        let p = Polygon::new(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(!p.is_simple());
        let q = Polygon::regular(12, 1.0);
        assert!(q.is_simple());
    }

    #[test]
    fn containment_and_distance() {
        let sq = Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        assert!(sq.contains([0.5, 0.5]));
        assert!(!sq.contains([1.5, 0.5]));
        assert!(sq.on_boundary([1.0, 0.3], 1e-12));
        assert!((point_segment_distance([0.5, 2.0], [0.0, 1.0], [1.0, 1.0]) - 1.0).abs() < 1e-15);
        assert!((point_segment_distance([2.0, 1.0], [0.0, 1.0], [1.0, 1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn regular_polygon_has_zero_centroid() {
        let d = Polygon::regular(64, 1.0);
        assert!(d.is_point_symmetric());
        let m = d.moments().unwrap();
        assert_eq!(m.centroid, [0.0, 0.0]);
        let exact = 0.5 * 64.0 * (2.0 * std::f64::consts::PI / 64.0).sin();
        assert!((m.area - exact).abs() < 1e-14);
        assert!(!Polygon::regular(5, 1.0).is_point_symmetric());
    }
}
