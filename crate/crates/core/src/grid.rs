//! Tensor-product grids and nodal fields.
//!
//! Nodes are numbered `n = i + nx * j` with `i` running along `x`.
//! Elements are numbered the same way on the `(nx - 1) x (ny - 1)` cell array.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Grid2D {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        for (name, c) in [("x", &xs), ("y", &ys)] {
            if c.len() < 2 {
                return Err(Error::Parameter(format!("{name}-coordinates need at least 2 entries")));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parameter(format!("{name}-coordinates must be finite")));
            }
            if c.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Parameter(format!("{name}-coordinates must be strictly increasing")));
            }
        }
        Ok(Self { xs, ys })
    }

    /// Uniform grid on `[0,1]^2` with `cells` elements per direction.
    pub fn unit_square(cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::Parameter("need at least one cell".into()));
        }
        let c: Vec<f64> = (0..=cells).map(|k| k as f64 / cells as f64).collect();
        Self::new(c.clone(), c)
    }

    /// Uniform grid on `[0, cells * h]^2`.
    pub fn square(cells: usize, h: f64) -> Result<Self> {
        if cells == 0 {
            return Err(Error::Parameter("need at least one cell".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Parameter(format!("cell size must be positive, got {h}")));
        }
        let c: Vec<f64> = (0..=cells).map(|k| k as f64 * h).collect();
        Self::new(c.clone(), c)
    }

    /// Lower-left corner and side lengths of the covered box.
    pub fn extent(&self) -> ([f64; 2], [f64; 2]) {
        let (x0, y0) = (self.xs[0], self.ys[0]);
        ([x0, y0], [self.xs[self.xs.len() - 1] - x0, self.ys[self.ys.len() - 1] - y0])
    }

    /// Maps a physical point to `[0,1]^2` coordinates of the covered box.
    pub fn normalize(&self, p: [f64; 2]) -> [f64; 2] {
        let (o, l) = self.extent();
        [(p[0] - o[0]) / l[0], (p[1] - o[1]) / l[1]]
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn num_elements(&self) -> usize {
        (self.xs.len() - 1) * (self.ys.len() - 1)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        i + self.xs.len() * j
    }

    #[inline]
    pub fn element(&self, i: usize, j: usize) -> usize {
        i + (self.xs.len() - 1) * j
    }

    pub fn coords(&self, n: usize) -> [f64; 2] {
        let nx = self.xs.len();
        [self.xs[n % nx], self.ys[n / nx]]
    }

    pub fn hx(&self, i: usize) -> f64 {
        self.xs[i + 1] - self.xs[i]
    }

    pub fn hy(&self, j: usize) -> f64 {
        self.ys[j + 1] - self.ys[j]
    }

    pub fn element_area(&self, i: usize, j: usize) -> f64 {
        self.hx(i) * self.hy(j)
    }

    pub fn element_centroid(&self, i: usize, j: usize) -> [f64; 2] {
        [0.5 * (self.xs[i] + self.xs[i + 1]), 0.5 * (self.ys[j] + self.ys[j + 1])]
    }

    /// Common spacing if the grid is uniform and isotropic (relative tolerance 1e-9).
    pub fn uniform_spacing(&self) -> Option<f64> {
        let h = self.xs[1] - self.xs[0];
        let ok = |c: &[f64]| c.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
        (ok(&self.xs) && ok(&self.ys)).then_some(h)
    }

    /// Index of the node closest to `p`.
    pub fn nearest_node(&self, p: [f64; 2]) -> (usize, usize) {
        (nearest(&self.xs, p[0]), nearest(&self.ys, p[1]))
    }
}

fn nearest(c: &[f64], v: f64) -> usize {
    let k = c.partition_point(|&x| x < v);
    if k == 0 {
        0
    } else if k == c.len() {
        c.len() - 1
    } else if (c[k] - v).abs() < (v - c[k - 1]).abs() {
        k
    } else {
        k - 1
    }
}

/// Nodal values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::Dimension(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.num_nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("field values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.num_nodes());
        for &y in grid.ys() {
            for &x in grid.xs() {
                values.push(f(x, y));
            }
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.node(i, j)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Coordinates `centre - half .. centre + half` with spacing `h`, extended on
/// both sides by cells growing geometrically with ratio `rho` (capped at
/// `h_max`) until `lo` and `hi` are reached. The last cell on each side is
/// clipped to land exactly on the end point.
///
/// The fine block must be an integer number of cells: `2 * half / h` is
/// rounded and `h` adjusted accordingly.
pub fn graded_coordinates(lo: f64, hi: f64, centre: f64, half: f64, h: f64, rho: f64, h_max: f64) -> Result<Vec<f64>> {
    if !(lo < centre - half && centre + half < hi) {
        return Err(Error::Parameter(format!(
            "fine block [{}, {}] must lie strictly inside [{lo}, {hi}]",
            centre - half,
            centre + half
        )));
    }
    if !(h > 0.0 && rho > 1.0 && h_max >= h) {
        return Err(Error::Parameter(format!("bad grading h={h}, rho={rho}, h_max={h_max}")));
    }
    let cells_half = (half / h).round().max(1.0) as usize;
    let h = half / cells_half as f64;
    let outward = |dist: f64| -> Vec<f64> {
        // offsets measured from the edge of the fine block
        let mut out = Vec::new();
        let mut s = 0.0;
        let mut step = h;
        loop {
            step = (step * rho).min(h_max);
            if s + step >= dist - 1e-12 * dist.max(1.0) {
                // share a sliver with the previous cell
                if dist - s < 0.3 * step && !out.is_empty() {
                    out.pop();
                    let before = out.last().copied().unwrap_or(0.0);
                    out.push(0.5 * (before + dist));
                }
                out.push(dist);
                break;
            }
            s += step;
            out.push(s);
        }
        out
    };
    let left = outward(centre - half - lo);
    let right = outward(hi - centre - half);
    let mut c = Vec::with_capacity(left.len() + right.len() + 2 * cells_half + 1);
    for &d in left.iter().rev() {
        c.push(if d == centre - half - lo { lo } else { centre - half - d });
    }
    for k in 0..=(2 * cells_half) {
        let t = k as f64 - cells_half as f64;
        c.push(centre + t * h);
    }
    for &d in &right {
        c.push(if d == hi - centre - half { hi } else { centre + half + d });
    }
    Ok(c)
}
