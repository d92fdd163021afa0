//! Polygonal inclusion shapes: thickened fans of 2–4 unit rays meeting at the
//! origin, and the candidate sets generated from an angular subdivision.

use std::fmt::Write as _;

use crate::geometry::{cross, unit_direction, Moments, Point, Polygon};
use crate::{Error, Result};

/// Default arm width of the thickened rays.
pub const DEFAULT_WIDTH: f64 = 0.05;
/// Smallest admissible angular gap between adjacent rays, in degrees.
pub const GAP_MIN_DEG: f64 = 10.0;
/// Largest admissible distance of a join vertex from the origin.
const MAX_JOIN_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct InclusionShape {
    /// Ray angles in degrees, strictly increasing in `[0, 360)`. Empty for
    /// reference shapes that are not ray fans (e.g. the disk oracle).
    pub angles: Vec<f64>,
    pub width: f64,
    /// Counterclockwise boundary.
    pub polygon: Polygon,
    pub id: String,
}

fn fmt_angle(a: f64) -> String {
    if a.fract() == 0.0 {
        format!("{}", a as i64)
    } else {
        format!("{a}")
    }
}

/// `w[a1,a2,...]`
pub fn shape_id(angles: &[f64]) -> String {
    let mut s = String::from("w[");
    for (k, a) in angles.iter().enumerate() {
        if k > 0 {
            s.push(',');
        }
        let _ = write!(s, "{}", fmt_angle(*a));
    }
    s.push(']');
    s
}

/// Parses `w[a1,a2(,a3(,a4))]` into its angle list.
pub fn parse_shape_id(id: &str) -> Result<Vec<f64>> {
    let inner = id
        .trim()
        .strip_prefix("w[")
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| Error::Parameter(format!("shape id `{id}` is not of the form w[a1,a2,...]")))?;
    inner
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parameter(format!("bad angle `{t}` in shape id `{id}`")))
        })
        .collect()
}

/// Builds the thickened ray fan for the given angles (degrees) and arm width.
///
/// Every ray of length 1 is offset by `w / 2` to both sides and closed by a
/// square cap. Facing offset lines of angularly adjacent rays are intersected;
/// the join lies in front of the origin for gaps below 180°, behind it for
/// gaps above, and is dropped for exactly 180° where the offsets are collinear.
pub fn build_inclusion(angles: &[f64], w: f64) -> Result<InclusionShape> {
    if !(2..=4).contains(&angles.len()) {
        return Err(Error::Parameter(format!("need 2 to 4 rays, got {}", angles.len())));
    }
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::Parameter(format!("width must be positive, got {w}")));
    }
    let mut sorted: Vec<f64> = angles.iter().map(|a| a.rem_euclid(360.0)).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let h = 0.5 * w;
    let gaps: Vec<f64> = (0..n)
        .map(|k| {
            let next = if k + 1 < n { sorted[k + 1] } else { sorted[0] + 360.0 };
            next - sorted[k]
        })
        .collect();
    if let Some(g) = gaps.iter().find(|g| **g < GAP_MIN_DEG) {
        return Err(Error::Degenerate(format!(
            "angular gap {g}° in {} is below the minimum {GAP_MIN_DEG}°",
            shape_id(&sorted)
        )));
    }
    let dirs: Vec<Point> = sorted.iter().map(|a| unit_direction(*a)).collect();
    let normal = |d: Point| -> Point { [-d[1], d[0]] };
    let mut vertices = Vec::with_capacity(3 * n);
    for k in 0..n {
        let d = dirs[k];
        let nk = normal(d);
        vertices.push([d[0] - h * nk[0], d[1] - h * nk[1]]);
        vertices.push([d[0] + h * nk[0], d[1] + h * nk[1]]);
        if (gaps[k] - 180.0).abs() < 1e-9 {
            continue;
        }
        // left offset of ray k meets right offset of ray k+1
        let e = dirs[(k + 1) % n];
        let ne = normal(e);
        let p0 = [h * nk[0], h * nk[1]];
        let q0 = [-h * ne[0], -h * ne[1]];
        // p0 + t d = q0 + s e
        let det = cross(d, e);
        let rhs = [q0[0] - p0[0], q0[1] - p0[1]];
        let t = cross(rhs, e) / det;
        let join = [p0[0] + t * d[0], p0[1] + t * d[1]];
        let r = (join[0] * join[0] + join[1] * join[1]).sqrt();
        if r > MAX_JOIN_RADIUS {
            return Err(Error::Degenerate(format!(
                "join vertex of {} lies {r:.3} from the origin",
                shape_id(&sorted)
            )));
        }
        vertices.push(join);
    }
    let polygon = Polygon::new(vertices);
    let id = shape_id(&sorted);
    if !polygon.is_simple() {
        return Err(Error::Degenerate(format!("{id} is not a simple polygon")));
    }
    if !polygon.contains([0.0, 0.0]) {
        return Err(Error::Degenerate(format!("{id} does not contain the origin")));
    }
    Ok(InclusionShape {
        angles: sorted,
        width: w,
        polygon,
        id,
    })
}

impl InclusionShape {
    /// Regular `sides`-gon approximating the unit disk; used as the reference
    /// shape with a closed-form corrector.
    pub fn disk(sides: usize) -> Self {
        Self {
            angles: Vec::new(),
            width: 0.0,
            polygon: Polygon::regular(sides, 1.0),
            id: format!("disk{sides}"),
        }
    }

    /// Exact area and centroid of the polygon.
    pub fn moments(&self) -> Result<Moments> {
        polygon_moments(self)
    }

    /// True if the ray set is closed under adding 180°.
    pub fn is_centrally_symmetric(&self) -> bool {
        let has = |a: f64| self.angles.iter().any(|b| (b - a.rem_euclid(360.0)).abs() < 1e-9);
        !self.angles.is_empty() && self.angles.iter().all(|a| has(a + 180.0))
    }
}

/// Exact area `|w|` and centroid `m` (mean of `x` over the shape).
pub fn polygon_moments(shape: &InclusionShape) -> Result<Moments> {
    shape.polygon.moments()
}

/// A set of candidate shapes.
#[derive(Debug, Clone)]
pub struct ShapeSet {
    pub shapes: Vec<InclusionShape>,
    pub subdivisions: usize,
    pub line_counts: Vec<usize>,
}

impl ShapeSet {
    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }
}

fn combinations(m: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for j in start..m {
        cur.push(j);
        combinations(m, k, j + 1, cur, out);
        cur.pop();
    }
}

/// All strictly increasing angle tuples `j * 360 / m` for each requested line count.
pub fn generate_theta(m: usize, line_counts: &[usize], w: f64) -> Result<ShapeSet> {
    if m < 3 {
        return Err(Error::Parameter(format!("need at least 3 subdivisions, got {m}")));
    }
    let step = 360.0 / m as f64;
    if step < GAP_MIN_DEG {
        return Err(Error::Parameter(format!("angular step {step}° is below {GAP_MIN_DEG}°")));
    }
    let mut counts: Vec<usize> = line_counts.to_vec();
    counts.sort_unstable();
    counts.dedup();
    if let Some(c) = counts.iter().find(|c| !(2..=4).contains(*c)) {
        return Err(Error::Parameter(format!("line count {c} not in 2..=4")));
    }
    let mut shapes = Vec::new();
    for &k in &counts {
        let mut combos = Vec::new();
        combinations(m, k, 0, &mut Vec::new(), &mut combos);
        for c in combos {
            let angles: Vec<f64> = c.iter().map(|j| *j as f64 * step).collect();
            match build_inclusion(&angles, w) {
                Ok(s) => shapes.push(s),
                Err(e) => log::info!("skipping {}: {e}", shape_id(&angles)),
            }
        }
    }
    Ok(ShapeSet {
        shapes,
        subdivisions: m,
        line_counts: counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_strip_is_a_rectangle() {
        let s = build_inclusion(&[0.0, 180.0], 0.05).unwrap();
        assert_eq!(
            s.polygon.vertices,
            vec![[1.0, -0.025], [1.0, 0.025], [-1.0, 0.025], [-1.0, -0.025]]
        );
        let m = s.moments().unwrap();
        assert!((m.area - 0.1).abs() < 1e-15);
        assert_eq!(m.centroid, [0.0, 0.0]);
        assert_eq!(s.id, "w[0,180]");
    }

    #[test]
    fn right_angle_hexagon() {
        let s = build_inclusion(&[0.0, 90.0], 0.05).unwrap();
        let expect = [[1.0, -0.025], [1.0, 0.025], [0.025, 0.025], [0.025, 1.0], [-0.025, 1.0], [-0.025, -0.025]];
        assert_eq!(s.polygon.len(), 6);
        for (v, e) in s.polygon.vertices.iter().zip(expect) {
            assert!((v[0] - e[0]).abs() < 1e-15 && (v[1] - e[1]).abs() < 1e-15, "{v:?} vs {e:?}");
        }
        // shoelace on the listed vertices
        let area = 0.5
            * (0..6)
                .map(|k| {
                    let (a, b) = (expect[k], expect[(k + 1) % 6]);
                    a[0] * b[1] - a[1] * b[0]
                })
                .sum::<f64>();
        assert!((s.moments().unwrap().area - area).abs() < 1e-15);
        assert!((area - 0.1).abs() < 1e-15);
    }

    #[test]
    fn t_shape_membership() {
        let s = build_inclusion(&[0.0, 90.0, 180.0], 0.05).unwrap();
        assert!(s.polygon.contains([0.5, 0.0]));
        assert!(!s.polygon.contains([0.5, 0.5]));
        assert!(s.polygon.contains([0.0, 0.7]));
        assert_eq!(s.polygon.len(), 3 * 3 - 1);
    }

    #[test]
    fn reflex_join_sits_behind_origin() {
        // 45° corner: one join in front, one behind.
        let s = build_inclusion(&[0.0, 45.0], 0.05).unwrap();
        let v = &s.polygon.vertices;
        assert_eq!(v.len(), 6);
        assert!(v[2][0] > 0.0 && v[2][1] > 0.0);
        assert!(v[5][0] < 0.0 && v[5][1] < 0.0);
    }

    #[test]
    fn degenerate_gaps_are_rejected() {
        assert!(matches!(build_inclusion(&[0.0, 5.0], 0.05), Err(Error::Degenerate(_))));
        assert!(matches!(build_inclusion(&[0.0, 20.0], 0.5), Err(Error::Degenerate(_))));
        assert!(build_inclusion(&[0.0], 0.05).is_err());
        assert!(build_inclusion(&[0.0, 90.0, 180.0, 270.0, 45.0], 0.05).is_err());
    }

    #[test]
    fn theta_counts() {
        assert_eq!(generate_theta(8, &[2], 0.05).unwrap().len(), 28);
        assert_eq!(generate_theta(8, &[2, 3], 0.05).unwrap().len(), 84);
        let four = generate_theta(4, &[4], 0.05).unwrap();
        assert_eq!(four.len(), 1);
        assert_eq!(four.shapes[0].id, "w[0,90,180,270]");
    }

    #[test]
    fn shape_id_round_trip() {
        assert_eq!(parse_shape_id("w[0,45,270]").unwrap(), vec![0.0, 45.0, 270.0]);
        assert_eq!(shape_id(&[22.5, 90.0]), "w[22.5,90]");
        assert!(parse_shape_id("0,90").is_err());
    }

    #[test]
    fn central_symmetry_flag() {
        assert!(build_inclusion(&[0.0, 180.0], 0.05).unwrap().is_centrally_symmetric());
        assert!(build_inclusion(&[45.0, 135.0, 225.0, 315.0], 0.05).unwrap().is_centrally_symmetric());
        assert!(!build_inclusion(&[0.0, 90.0], 0.05).unwrap().is_centrally_symmetric());
    }
}
