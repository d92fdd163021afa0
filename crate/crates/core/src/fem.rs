//! Bilinear finite elements on tensor-product grids for the smoothing state
//! equation `-alpha div(lambda grad u) + u = f` with natural boundary
//! conditions, plus finite-difference extraction of state derivatives.

use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Polygon};
use crate::grid::{Grid2D, ScalarField};
use crate::solver::{pcg, Boundary, Jacobi, Multigrid, Preconditioner};
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    #[default]
    Jacobi,
    Multigrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    pub alpha: f64,
    pub lambda_in: f64,
    pub lambda_out: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    #[serde(default)]
    pub preconditioner: PreconditionerKind,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            alpha: 8.0,
            lambda_in: 0.05,
            lambda_out: 1.0,
            cg_tol: 1e-10,
            cg_max_iter: 20_000,
            preconditioner: PreconditionerKind::Jacobi,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        // lambda_in == lambda_out is accepted: it switches the perturbation off,
        // which the checks rely on.
        if !(self.lambda_in > 0.0 && self.lambda_in <= self.lambda_out && self.lambda_out.is_finite()) {
            return Err(Error::Parameter(format!(
                "need 0 < lambda_in <= lambda_out, got {} and {}",
                self.lambda_in, self.lambda_out
            )));
        }
        if !(self.cg_tol > 0.0) || self.cg_max_iter == 0 {
            return Err(Error::Parameter("cg tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }

    pub fn with_preconditioner(mut self, kind: PreconditionerKind) -> Self {
        self.preconditioner = kind;
        self
    }

    /// `lambda_in - lambda_out`
    pub fn contrast(&self) -> f64 {
        self.lambda_in - self.lambda_out
    }
}

/// Per-element diffusivity, optionally with the inclusion volume fraction it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub lambda: Vec<f64>,
    pub theta: Option<Vec<f64>>,
}

impl CoefficientField {
    pub fn uniform(grid: &Grid2D, lambda: f64) -> Self {
        Self {
            lambda: vec![lambda; grid.num_elements()],
            theta: None,
        }
    }

    /// Arithmetic mixing `theta * lambda_in + (1 - theta) * lambda_out`.
    pub fn from_fractions(theta: Vec<f64>, lambda_in: f64, lambda_out: f64) -> Self {
        let lambda = theta.iter().map(|t| t * lambda_in + (1.0 - t) * lambda_out).collect();
        Self {
            lambda,
            theta: Some(theta),
        }
    }

    fn check(&self, grid: &Grid2D) -> Result<()> {
        if self.lambda.len() != grid.num_elements() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} elements",
                self.lambda.len(),
                grid.num_elements()
            )));
        }
        Ok(())
    }
}

/// How perturbed-state elements are marked as inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    /// `lambda_in` where the element centroid lies in the inclusion.
    Centroid,
    /// Arithmetic mixing by the 4x4 sub-sample volume fraction.
    Fractions,
}

// 1D element matrices for a cell of length h.
#[inline]
fn stiff_1d(h: f64) -> [[f64; 2]; 2] {
    [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]]
}

#[inline]
fn mass_1d(h: f64) -> [[f64; 2]; 2] {
    [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]]
}

/// Element matrices `(stiffness, mass)` on an `hx x hy` rectangle; local node
/// `a` sits at offset `(a & 1, a >> 1)`.
pub fn element_matrices(hx: f64, hy: f64) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let (sx, mx, sy, my) = (stiff_1d(hx), mass_1d(hx), stiff_1d(hy), mass_1d(hy));
    let mut k = [[0.0; 4]; 4];
    let mut m = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let (ax, ay, bx, by) = (a & 1, a >> 1, b & 1, b >> 1);
            k[a][b] = sx[ax][bx] * my[ay][by] + mx[ax][bx] * sy[ay][by];
            m[a][b] = mx[ax][bx] * my[ay][by];
        }
    }
    (k, m)
}

/// Integral of the gradient of each local basis function over the element.
pub fn element_gradient_integrals(hx: f64, hy: f64) -> [[f64; 2]; 4] {
    let mut g = [[0.0; 2]; 4];
    for (a, ga) in g.iter_mut().enumerate() {
        let sx = if a & 1 == 1 { 1.0 } else { -1.0 };
        let sy = if a >> 1 == 1 { 1.0 } else { -1.0 };
        *ga = [sx * hy / 2.0, sy * hx / 2.0];
    }
    g
}

/// Maps grid nodes to unknown indices (`None` for eliminated Dirichlet nodes).
pub struct DofMap {
    pub bc: Boundary,
    nx: usize,
    nfx: usize,
    nfy: usize,
}

impl DofMap {
    pub fn new(grid: &Grid2D, bc: Boundary) -> Self {
        Self {
            bc,
            nx: grid.nx(),
            nfx: bc.free_range(grid.nx()).len(),
            nfy: bc.free_range(grid.ny()).len(),
        }
    }

    pub fn len(&self) -> usize {
        self.nfx * self.nfy
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn dof(&self, node: usize) -> Option<usize> {
        let (i, j) = (node % self.nx, node / self.nx);
        match self.bc {
            Boundary::Natural => Some(node),
            Boundary::Dirichlet => {
                if i == 0 || j == 0 || i > self.nfx || j > self.nfy {
                    None
                } else {
                    Some((i - 1) + self.nfx * (j - 1))
                }
            }
        }
    }

    /// Expands a vector of unknowns to all nodes (eliminated nodes get zero).
    pub fn expand(&self, x: &[f64], grid: &Grid2D) -> Vec<f64> {
        (0..grid.num_nodes()).map(|n| self.dof(n).map_or(0.0, |d| x[d])).collect()
    }
}

/// Assembles `sum_e stiff_coef[e] K_e + mass_coef M` restricted to the free nodes.
pub fn assemble(grid: &Grid2D, stiff_coef: &[f64], mass_coef: f64, bc: Boundary) -> CsrMatrix {
    let dofs = DofMap::new(grid, bc);
    let mut trip = Vec::with_capacity(grid.num_elements() * 16);
    for j in 0..grid.ny() - 1 {
        for i in 0..grid.nx() - 1 {
            let (k, m) = element_matrices(grid.hx(i), grid.hy(j));
            let c = stiff_coef[grid.element(i, j)];
            let nodes = local_nodes(grid, i, j);
            for a in 0..4 {
                let Some(ra) = dofs.dof(nodes[a]) else { continue };
                for b in 0..4 {
                    let Some(rb) = dofs.dof(nodes[b]) else { continue };
                    trip.push((ra, rb, c * k[a][b] + mass_coef * m[a][b]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(dofs.len(), dofs.len(), &trip)
}

#[inline]
pub(crate) fn local_nodes(grid: &Grid2D, i: usize, j: usize) -> [usize; 4] {
    let n0 = grid.node(i, j);
    let nx = grid.nx();
    [n0, n0 + 1, n0 + nx, n0 + nx + 1]
}

pub(crate) fn solve_system(a: &CsrMatrix, b: &[f64], grid: &Grid2D, bc: Boundary, p: &SolveParams) -> Result<Vec<f64>> {
    let pc: Box<dyn Preconditioner> = match p.preconditioner {
        PreconditionerKind::Jacobi => Box::new(Jacobi::new(a)),
        PreconditionerKind::Multigrid => Box::new(Multigrid::new(a.clone(), grid.xs(), grid.ys(), bc)?),
    };
    let mut x = vec![0.0; b.len()];
    let stats = pcg(a, b, &mut x, pc.as_ref(), p.cg_tol, p.cg_max_iter)?;
    log::debug!("cg converged in {} iterations (residual {:e})", stats.iterations, stats.residual);
    Ok(x)
}

/// Solves `int alpha lambda grad u . grad v + u v = int f v` for all bilinear `v`.
pub fn solve_state(f: &ScalarField, p: &SolveParams, lambda: &CoefficientField, grid: &Grid2D) -> Result<ScalarField> {
    p.validate()?;
    if &f.grid != grid {
        return Err(Error::Dimension("image field does not live on the solve grid".into()));
    }
    lambda.check(grid)?;
    let coef: Vec<f64> = lambda.lambda.iter().map(|l| p.alpha * l).collect();
    let a = assemble(grid, &coef, 1.0, Boundary::Natural);
    let mass = assemble(grid, &vec![0.0; grid.num_elements()], 1.0, Boundary::Natural);
    let b = mass.mul_vec(&f.values);
    let u = solve_system(&a, &b, grid, Boundary::Natural, p)?;
    ScalarField::new(grid.clone(), u)
}

/// Volume fraction of each element covered by `polygon`, estimated from a
/// 4x4 grid of sub-cell midpoints. Elements outside the polygon's bounding
/// box are skipped.
pub fn polygon_fractions(grid: &Grid2D, polygon: &Polygon) -> Vec<f64> {
    const S: usize = 4;
    let mut theta = vec![0.0; grid.num_elements()];
    let (lo, hi) = polygon.bbox();
    let xs = grid.xs();
    let ys = grid.ys();
    let i0 = xs.partition_point(|&x| x <= lo[0]).saturating_sub(1);
    let i1 = xs.partition_point(|&x| x < hi[0]).min(xs.len() - 1);
    let j0 = ys.partition_point(|&y| y <= lo[1]).saturating_sub(1);
    let j1 = ys.partition_point(|&y| y < hi[1]).min(ys.len() - 1);
    for j in j0..j1 {
        for i in i0..i1 {
            let mut hits = 0usize;
            for sy in 0..S {
                let t = (sy as f64 + 0.5) / S as f64;
                let y = ys[j] * (1.0 - t) + ys[j + 1] * t;
                for sx in 0..S {
                    let s = (sx as f64 + 0.5) / S as f64;
                    let x = xs[i] * (1.0 - s) + xs[i + 1] * s;
                    if polygon.contains([x, y]) {
                        hits += 1;
                    }
                }
            }
            theta[grid.element(i, j)] = hits as f64 / (S * S) as f64;
        }
    }
    theta
}

/// Coefficient field for the perturbed state with inclusion `center + eps * shape`.
pub fn perturbed_coefficients(grid: &Grid2D, p: &SolveParams, shape: &Polygon, center: Point, eps: f64, assignment: Assignment) -> Result<CoefficientField> {
    if eps == 0.0 {
        return Ok(CoefficientField::uniform(grid, p.lambda_out));
    }
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("inclusion size must be non-negative, got {eps}")));
    }
    let scaled = shape.translate_scale(center, eps);
    let (lo, hi) = scaled.bbox();
    let (x0, x1) = (grid.xs()[0], *grid.xs().last().unwrap());
    let (y0, y1) = (grid.ys()[0], *grid.ys().last().unwrap());
    if !(lo[0] > x0 && lo[1] > y0 && hi[0] < x1 && hi[1] < y1) {
        return Err(Error::Geometry(format!(
            "inclusion [{:?}, {:?}] extends outside the domain",
            lo, hi
        )));
    }
    let cells_across = {
        let h = grid
            .xs()
            .windows(2)
            .chain(grid.ys().windows(2))
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max);
        let (slo, shi) = shape.bbox();
        eps * (shi[0] - slo[0]).min(shi[1] - slo[1]) / h
    };
    if cells_across < 2.0 {
        log::warn!("perturbation of size {eps} spans only {cells_across:.2} elements");
    }
    Ok(match assignment {
        Assignment::Fractions => CoefficientField::from_fractions(polygon_fractions(grid, &scaled), p.lambda_in, p.lambda_out),
        Assignment::Centroid => {
            let mut lambda = vec![p.lambda_out; grid.num_elements()];
            for j in 0..grid.ny() - 1 {
                for i in 0..grid.nx() - 1 {
                    if scaled.contains(grid.element_centroid(i, j)) {
                        lambda[grid.element(i, j)] = p.lambda_in;
                    }
                }
            }
            CoefficientField { lambda, theta: None }
        }
    })
}

/// State for the domain perturbed by the inclusion `center + eps * shape`
/// (with `Omega` empty outside of it).
pub fn solve_perturbed_state(
    f: &ScalarField,
    p: &SolveParams,
    grid: &Grid2D,
    shape: &Polygon,
    center: Point,
    eps: f64,
    assignment: Assignment,
) -> Result<ScalarField> {
    let coeff = perturbed_coefficients(grid, p, shape, center, eps, assignment)?;
    solve_state(f, p, &coeff, grid)
}

/// `J(u) = 1/2 int (u - f)^2 + alpha lambda |grad u|^2`, integrated exactly for bilinear fields.
pub fn cost_functional(f: &ScalarField, u: &ScalarField, lambda: &CoefficientField, alpha: f64) -> Result<f64> {
    let grid = &u.grid;
    if &f.grid != grid {
        return Err(Error::Dimension("f and u live on different grids".into()));
    }
    lambda.check(grid)?;
    let mut total = 0.0;
    for j in 0..grid.ny() - 1 {
        for i in 0..grid.nx() - 1 {
            let (k, m) = element_matrices(grid.hx(i), grid.hy(j));
            let nodes = local_nodes(grid, i, j);
            let uu: [f64; 4] = nodes.map(|n| u.values[n]);
            let d: [f64; 4] = nodes.map(|n| u.values[n] - f.values[n]);
            let c = alpha * lambda.lambda[grid.element(i, j)];
            let mut e = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    e += d[a] * m[a][b] * d[b] + c * uu[a] * k[a][b] * uu[b];
                }
            }
            total += 0.5 * e;
        }
    }
    Ok(total)
}

/// Pointwise first and second derivatives of the state at grid nodes.
#[derive(Debug, Clone)]
pub struct DerivativeFields {
    pub grid: Grid2D,
    pub margin: usize,
    gradient: Vec<[f64; 2]>,
    hessian: Vec<[[f64; 2]; 2]>,
    mask: Vec<bool>,
}

impl DerivativeFields {
    /// `(grad u, hess u)` at node `(i, j)`, or `None` inside the masked margin.
    pub fn at(&self, i: usize, j: usize) -> Option<([f64; 2], [[f64; 2]; 2])> {
        let n = self.grid.node(i, j);
        self.mask[n].then(|| (self.gradient[n], self.hessian[n]))
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.mask[self.grid.node(i, j)]
    }

    /// Index ranges of unmasked nodes.
    pub fn interior(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        (self.margin..self.grid.nx() - self.margin, self.margin..self.grid.ny() - self.margin)
    }
}

/// Central differences on a uniform grid; nodes within `margin` of the boundary are masked.
pub fn extract_derivatives(u: &ScalarField, margin: usize) -> Result<DerivativeFields> {
    let grid = &u.grid;
    let h = grid
        .uniform_spacing()
        .ok_or_else(|| Error::Parameter("derivative extraction needs a uniform grid".into()))?;
    if margin < 2 {
        return Err(Error::Parameter(format!("margin must be at least 2, got {margin}")));
    }
    if 2 * margin >= grid.nx() || 2 * margin >= grid.ny() {
        return Err(Error::Parameter(format!(
            "margin {margin} leaves no interior nodes on a {}x{} grid",
            grid.nx(),
            grid.ny()
        )));
    }
    let n = grid.num_nodes();
    let mut gradient = vec![[0.0; 2]; n];
    let mut hessian = vec![[[0.0; 2]; 2]; n];
    let mut mask = vec![false; n];
    let v = |i: usize, j: usize| u.at(i, j);
    for j in margin..grid.ny() - margin {
        for i in margin..grid.nx() - margin {
            let k = grid.node(i, j);
            let gx = (v(i + 1, j) - v(i - 1, j)) / (2.0 * h);
            let gy = (v(i, j + 1) - v(i, j - 1)) / (2.0 * h);
            let hxx = (v(i + 1, j) - 2.0 * v(i, j) + v(i - 1, j)) / (h * h);
            let hyy = (v(i, j + 1) - 2.0 * v(i, j) + v(i, j - 1)) / (h * h);
            let hxy = (v(i + 1, j + 1) - v(i + 1, j - 1) - v(i - 1, j + 1) + v(i - 1, j - 1)) / (4.0 * h * h);
            gradient[k] = [gx, gy];
            hessian[k] = [[hxx, hxy], [hxy, hyy]];
            mask[k] = true;
        }
    }
    Ok(DerivativeFields {
        grid: grid.clone(),
        margin,
        gradient,
        hessian,
        mask,
    })
}

/// `L^2` distance between the bilinear interpolant of `u` and `exact`, by
/// 3x3 Gauss quadrature per element.
pub fn l2_error(u: &ScalarField, exact: impl Fn(f64, f64) -> f64) -> f64 {
    let g = &u.grid;
    let gp = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
    let gw = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let mut s = 0.0;
    for j in 0..g.ny() - 1 {
        for i in 0..g.nx() - 1 {
            let (hx, hy) = (g.hx(i), g.hy(j));
            let c = [u.at(i, j), u.at(i + 1, j), u.at(i, j + 1), u.at(i + 1, j + 1)];
            for (a, wa) in gp.iter().zip(gw) {
                for (b, wb) in gp.iter().zip(gw) {
                    let (sx, sy) = (0.5 * (a + 1.0), 0.5 * (b + 1.0));
                    let uh = c[0] * (1.0 - sx) * (1.0 - sy) + c[1] * sx * (1.0 - sy) + c[2] * (1.0 - sx) * sy + c[3] * sx * sy;
                    let e = uh - exact(g.xs()[i] + sx * hx, g.ys()[j] + sy * hy);
                    s += wa * wb * 0.25 * hx * hy * e * e;
                }
            }
        }
    }
    s.sqrt()
}
