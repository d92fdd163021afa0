//! First- and second-order topological derivative maps over the image, and a
//! finite-size check of the expansion against directly perturbed solves.
//!
//! At a node `z` with `g = grad u(z)`, `H = hess u(z)`:
//!
//! * `TD1 = alpha/2 (lin - lout) g^T (I + P1) g`
//! * `TD2 = alpha (lin - lout) vec(H)^T (X + P2) g`

use rayon::prelude::*;
use serde::Serialize;

use crate::exterior::ExteriorParams;
use crate::fem::{
    cost_functional, extract_derivatives, perturbed_coefficients, solve_state, Assignment, CoefficientField,
    DerivativeFields, PreconditionerKind, SolveParams,
};
use crate::geometry::Point;
use crate::grid::{graded_coordinates, Grid2D, ScalarField};
use crate::inclusion::InclusionShape;
use crate::polarization::{vec_row_major, PolarizationData};
use crate::{Error, Result};

/// A topological derivative map on the unmasked nodes of the image grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TdMap {
    pub order: u8,
    pub shape_id: String,
    pub grid: Grid2D,
    pub margin: usize,
    /// Row-major over the unmasked block, `values[(j - margin) * width + (i - margin)]`.
    pub values: Vec<f64>,
    pub argmin: (usize, usize),
    pub min_value: f64,
}

impl TdMap {
    fn from_rows(order: u8, shape_id: &str, d: &DerivativeFields, rows: Vec<Vec<f64>>) -> Result<Self> {
        let (ir, jr) = d.interior();
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Consistency(format!("non-finite map value at position {k} for {shape_id}")));
        }
        let width = ir.len();
        let mut best = 0;
        for (k, v) in values.iter().enumerate() {
            if *v < values[best] {
                best = k;
            }
        }
        Ok(Self {
            order,
            shape_id: shape_id.to_string(),
            grid: d.grid.clone(),
            margin: d.margin,
            argmin: (ir.start + best % width, jr.start + best / width),
            min_value: values[best],
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.grid.nx() - 2 * self.margin
    }

    pub fn height(&self) -> usize {
        self.grid.ny() - 2 * self.margin
    }

    /// Value at node `(i, j)`, `None` inside the masked margin.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let m = self.margin;
        if i < m || j < m || i >= self.grid.nx() - m || j >= self.grid.ny() - m {
            return None;
        }
        Some(self.values[(j - m) * self.width() + (i - m)])
    }

    /// Physical coordinates of the argmin node.
    pub fn argmin_point(&self) -> Point {
        let (i, j) = self.argmin;
        [self.grid.xs()[i], self.grid.ys()[j]]
    }
}

/// `alpha/2 (lin - lout) g^T (I + P1) g`
pub fn td1_value(g: [f64; 2], pol: &PolarizationData, p: &SolveParams) -> f64 {
    let a = &pol.p1;
    let q0 = (1.0 + a[0][0]) * g[0] + a[0][1] * g[1];
    let q1 = a[1][0] * g[0] + (1.0 + a[1][1]) * g[1];
    0.5 * p.alpha * p.contrast() * (g[0] * q0 + g[1] * q1)
}

/// `alpha (lin - lout) vec(H)^T (X + P2) g`
pub fn td2_value(g: [f64; 2], h: &[[f64; 2]; 2], pol: &PolarizationData, p: &SolveParams) -> f64 {
    let v = vec_row_major(h);
    let mut s = 0.0;
    for r in 0..4 {
        s += v[r] * ((pol.x[r][0] + pol.p2[r][0]) * g[0] + (pol.x[r][1] + pol.p2[r][1]) * g[1]);
    }
    p.alpha * p.contrast() * s
}

fn eval_map(
    order: u8,
    derivs: &DerivativeFields,
    pol: &PolarizationData,
    p: &SolveParams,
    f: impl Fn([f64; 2], &[[f64; 2]; 2]) -> f64 + Sync,
) -> Result<TdMap> {
    pol.check_params(p)?;
    let (ir, jr) = derivs.interior();
    let rows: Vec<Vec<f64>> = jr
        .into_par_iter()
        .map(|j| {
            ir.clone()
                .map(|i| {
                    let (g, h) = derivs.at(i, j).expect("interior node is unmasked");
                    f(g, &h)
                })
                .collect()
        })
        .collect();
    TdMap::from_rows(order, &pol.shape_id, derivs, rows)
}

pub fn eval_td1(derivs: &DerivativeFields, pol: &PolarizationData, p: &SolveParams) -> Result<TdMap> {
    eval_map(1, derivs, pol, p, |g, _| td1_value(g, pol, p))
}

pub fn eval_td2(derivs: &DerivativeFields, pol: &PolarizationData, p: &SolveParams) -> Result<TdMap> {
    eval_map(2, derivs, pol, p, |g, h| td2_value(g, h, pol, p))
}

/// Smooth image used by the finite-size check.
pub fn smooth_test_image(x: f64, y: f64) -> f64 {
    (2.0 * std::f64::consts::PI * x).sin() * (y * y + 0.2 * y)
}

#[derive(Debug, Clone)]
pub struct FiniteEpsOptions {
    /// Cells per direction of the uniform grid the derivatives at `z` come from.
    pub base_cells: usize,
    pub eps: Vec<f64>,
    /// Coarsest spacing of the locally refined grids.
    pub h_max: f64,
}

impl Default for FiniteEpsOptions {
    fn default() -> Self {
        Self {
            base_cells: 400,
            eps: vec![0.2, 0.1, 0.05],
            h_max: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FiniteEpsRow {
    pub eps: f64,
    /// `J(u_eps) - J(u)`
    pub delta: f64,
    /// `eps^2 |w|`
    pub area: f64,
    /// `delta / |w_eps|`
    pub r1: f64,
    /// `(delta - |w_eps| dJ) / (eps |w_eps|)`
    pub r2: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FiniteEpsReport {
    pub shape_id: String,
    pub z: Point,
    pub gradient: [f64; 2],
    pub hessian: [[f64; 2]; 2],
    pub td1: f64,
    pub td2: f64,
    pub rows: Vec<FiniteEpsRow>,
}

impl FiniteEpsReport {
    pub fn td1_gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| (r.r1 - self.td1).abs()).collect()
    }

    pub fn td2_gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| (r.r2 - self.td2).abs()).collect()
    }

    /// Relative first-order gap at the smallest size.
    pub fn final_td1_relative_gap(&self) -> f64 {
        self.td1_gaps().last().copied().unwrap_or(f64::NAN) / self.td1.abs()
    }

    /// Both gaps shrink strictly from one size to the next.
    pub fn is_monotone(&self) -> bool {
        let dec = |v: Vec<f64>| v.windows(2).all(|w| w[1] < w[0]);
        dec(self.td1_gaps()) && dec(self.td2_gaps())
    }
}

/// Grid on `[0,1]^2` resolving `z + eps w` at the same relative resolution as
/// the exterior corrector grid: spacing `eps h_f` on `z +- eps L_f`, graded
/// outward to `h_max`.
pub fn local_grid(z: Point, eps: f64, ext: &ExteriorParams, h_max: f64) -> Result<Grid2D> {
    let half = eps * ext.core;
    if !(z[0] - half > 0.0 && z[0] + half < 1.0 && z[1] - half > 0.0 && z[1] + half < 1.0) {
        return Err(Error::Resolution(format!(
            "refinement box of half-width {half} around {z:?} leaves the unit square"
        )));
    }
    let h = eps * ext.h_fine;
    let hm = h_max.max(h);
    let xs = graded_coordinates(0.0, 1.0, z[0], half, h, ext.rho, hm)?;
    let ys = graded_coordinates(0.0, 1.0, z[1], half, h, ext.rho, hm)?;
    Grid2D::new(xs, ys)
}

/// Compares direct cost differences `J(u_eps) - J(u)` for the inclusions
/// `z + eps w` with the expansion `|w_eps| (TD1 + eps TD2)` predicted by `pol`.
///
/// `z` is snapped to the nearest node of the base grid. Each perturbed pair of
/// solves runs on [`local_grid`] with volume-fraction coefficients.
pub fn finite_eps_check(
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
    shape: &InclusionShape,
    pol: &PolarizationData,
    z: Point,
    p: &SolveParams,
    opts: &FiniteEpsOptions,
) -> Result<FiniteEpsReport> {
    p.validate()?;
    pol.check_params(p)?;
    if pol.shape_id != shape.id {
        return Err(Error::Consistency(format!("polarization of {} used for {}", pol.shape_id, shape.id)));
    }
    if opts.eps.is_empty() || opts.eps.windows(2).any(|w| w[1] >= w[0]) || opts.eps.iter().any(|e| *e <= 0.0) {
        return Err(Error::Parameter("size ladder must be positive and strictly decreasing".into()));
    }
    let fine = p.with_preconditioner(PreconditionerKind::Multigrid);
    let base = Grid2D::unit_square(opts.base_cells)?;
    let (zi, zj) = base.nearest_node(z);
    let z = [base.xs()[zi], base.ys()[zj]];
    let u = solve_state(
        &ScalarField::from_fn(&base, f),
        &fine,
        &CoefficientField::uniform(&base, p.lambda_out),
        &base,
    )?;
    let d = extract_derivatives(&u, 3)?;
    let (g, h) = d
        .at(zi, zj)
        .ok_or_else(|| Error::Parameter(format!("point {z:?} lies in the masked margin")))?;
    let td1 = td1_value(g, pol, p);
    let td2 = td2_value(g, &h, pol, p);
    let ext = pol.params.exterior();
    let area = shape.moments()?.area;
    let mut rows = Vec::with_capacity(opts.eps.len());
    for &eps in &opts.eps {
        let grid = local_grid(z, eps, &ext, opts.h_max)?;
        let fg = ScalarField::from_fn(&grid, f);
        let lam0 = CoefficientField::uniform(&grid, p.lambda_out);
        let lam1 = perturbed_coefficients(&grid, p, &shape.polygon, z, eps, Assignment::Fractions)?;
        let u0 = solve_state(&fg, &fine, &lam0, &grid)?;
        let u1 = solve_state(&fg, &fine, &lam1, &grid)?;
        let delta = cost_functional(&fg, &u1, &lam1, p.alpha)? - cost_functional(&fg, &u0, &lam0, p.alpha)?;
        let a = eps * eps * area;
        let r1 = delta / a;
        let r2 = (delta - a * td1) / (eps * a);
        log::info!("eps={eps}: delta={delta:e} r1={r1} r2={r2} ({} nodes)", grid.num_nodes());
        rows.push(FiniteEpsRow {
            eps,
            delta,
            area: a,
            r1,
            r2,
            nodes: grid.num_nodes(),
        });
    }
    Ok(FiniteEpsReport {
        shape_id: shape.id.clone(),
        z,
        gradient: g,
        hessian: h,
        td1,
        td2,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarization::{geometric_matrix, PrecomputeParams};

    fn fake_pol(p1: [[f64; 2]; 2], p2: [[f64; 2]; 4], m: [f64; 2]) -> PolarizationData {
        let params = PrecomputeParams::new(&SolveParams::default(), &ExteriorParams::default(), 0.05);
        PolarizationData {
            shape_id: "w[0,90]".into(),
            angles: vec![0.0, 90.0],
            hash: params.hash("w[0,90]"),
            params,
            p1,
            p2,
            x: geometric_matrix(m),
            area: 0.1,
            centroid: m,
        }
    }

    fn derivs_of(f: impl Fn(f64, f64) -> f64) -> DerivativeFields {
        let g = Grid2D::unit_square(20).unwrap();
        extract_derivatives(&ScalarField::from_fn(&g, f), 3).unwrap()
    }

    #[test]
    fn closed_forms_at_a_point() {
        let p = SolveParams::default();
        let pol = fake_pol([[0.5, 0.1], [0.2, 0.3]], [[0.0; 2]; 4], [0.2, -0.1]);
        let g = [1.0, 2.0];
        // g^T (I + P1) g = 1.5 + 0.2 + 0.4 + 1.3 * 4
        let expect = 0.5 * 8.0 * (0.05 - 1.0) * (1.5 + 0.6 + 5.2);
        assert!((td1_value(g, &pol, &p) - expect).abs() < 1e-12);
        assert_eq!(td1_value([0.0, 0.0], &pol, &p), 0.0);
        // with P2 = 0 the second-order term is alpha (lin - lout) g^T H m
        let h = [[2.0, 0.5], [0.5, -1.0]];
        let hm = [2.0 * 0.2 - 0.05, 0.1 + 0.1];
        let expect2 = 8.0 * (0.05 - 1.0) * (g[0] * hm[0] + g[1] * hm[1]);
        assert!((td2_value(g, &h, &pol, &p) - expect2).abs() < 1e-12);
        assert_eq!(td2_value(g, &[[0.0; 2]; 2], &pol, &p), 0.0);
    }

    #[test]
    fn maps_track_their_minimum() {
        let p = SolveParams::default();
        let pol = fake_pol([[0.9, 0.0], [0.0, 0.9]], [[0.01; 2]; 4], [0.1, 0.2]);
        let d = derivs_of(|x, y| (x - 0.4).powi(2) * y + y * y * x);
        let m = eval_td2(&d, &pol, &p).unwrap();
        assert_eq!(m.values.len(), 15 * 15);
        let min = m.values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(m.min_value, min);
        assert_eq!(m.get(m.argmin.0, m.argmin.1), Some(min));
        assert_eq!(m.get(0, 5), None);
        let m1 = eval_td1(&d, &pol, &p).unwrap();
        assert!(m1.values.iter().all(|v| *v <= 0.0));
    }

    #[test]
    fn constant_state_gives_zero_maps() {
        let p = SolveParams::default();
        let pol = fake_pol([[0.9, 0.0], [0.0, 0.9]], [[0.3; 2]; 4], [0.1, 0.2]);
        let d = derivs_of(|_, _| 4.0);
        assert!(eval_td1(&d, &pol, &p).unwrap().values.iter().all(|v| *v == 0.0));
        assert!(eval_td2(&d, &pol, &p).unwrap().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn parameter_mismatch_is_rejected() {
        let pol = fake_pol([[0.0; 2]; 2], [[0.0; 2]; 4], [0.0, 0.0]);
        let d = derivs_of(|x, _| x);
        let p = SolveParams {
            alpha: 4.0,
            ..Default::default()
        };
        assert!(matches!(eval_td1(&d, &pol, &p), Err(Error::Consistency(_))));
        assert!(matches!(eval_td2(&d, &pol, &p), Err(Error::Consistency(_))));
    }

    #[test]
    fn local_grid_resolves_the_inclusion() {
        let ext = ExteriorParams::default();
        let g = local_grid([0.5, 0.5], 0.05, &ext, 0.01).unwrap();
        assert_eq!(g.xs()[0], 0.0);
        assert_eq!(*g.xs().last().unwrap(), 1.0);
        let fine = g.xs().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        assert!((fine - 0.05 * 0.0125).abs() < 1e-12);
        assert!(local_grid([0.1, 0.5], 0.2, &ext, 0.01).is_err());
    }
}
