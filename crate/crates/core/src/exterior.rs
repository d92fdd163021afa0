//! Corrector problems on a truncated exterior domain.
//!
//! For a far-field direction `e_k` the corrector `K` solves
//! `int alpha lambda_w grad K . grad v = -alpha (lin - lout) int_w e_k . grad v`
//! on `[-R, R]^2` with `K = 0` on the outer boundary. The grid is uniform on a
//! core box around the shape and grows geometrically outside of it.

use serde::{Deserialize, Serialize};

use crate::fem::{self, assemble, element_gradient_integrals, local_nodes, polygon_fractions, CoefficientField, DofMap, PreconditionerKind, SolveParams};
use crate::grid::{graded_coordinates, Grid2D, ScalarField};
use crate::inclusion::InclusionShape;
use crate::solver::Boundary;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExteriorParams {
    /// Half-width of the truncated square `[-R, R]^2`.
    pub radius: f64,
    /// Spacing on the core box.
    pub h_fine: f64,
    /// Half-width of the core box.
    pub core: f64,
    /// Geometric growth ratio outside the core.
    pub rho: f64,
    pub h_max: f64,
}

impl Default for ExteriorParams {
    fn default() -> Self {
        Self {
            radius: 30.0,
            h_fine: 0.0125,
            core: 1.6,
            rho: 1.2,
            h_max: 1.0,
        }
    }
}

/// Symmetric graded grid on `[-R, R]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedGrid {
    pub grid: Grid2D,
    pub params: ExteriorParams,
}

pub fn build_graded_grid(params: &ExteriorParams) -> Result<GradedGrid> {
    let ExteriorParams {
        radius,
        h_fine,
        core,
        rho,
        h_max,
    } = *params;
    if !(radius > core && core > 1.0 && h_fine > 0.0 && h_fine < core && rho > 1.0 && h_max >= h_fine) {
        return Err(Error::Parameter(format!("inconsistent exterior grid parameters {params:?}")));
    }
    let c = graded_coordinates(-radius, radius, 0.0, core, h_fine, rho, h_max)?;
    Ok(GradedGrid {
        grid: Grid2D::new(c.clone(), c)?,
        params: *params,
    })
}

/// Per-element inclusion fractions and the mixed diffusivity.
pub fn assign_inclusion_fractions(grid: &GradedGrid, shape: &InclusionShape, p: &SolveParams) -> Result<CoefficientField> {
    let (lo, hi) = shape.polygon.bbox();
    let core = grid.params.core;
    let margin = (core - lo[0].abs().max(lo[1].abs()).max(hi[0].abs()).max(hi[1].abs())).min(core);
    if margin < 0.3 {
        return Err(Error::Geometry(format!(
            "{} leaves only {margin:.3} margin inside the core box",
            shape.id
        )));
    }
    Ok(CoefficientField::from_fractions(
        polygon_fractions(&grid.grid, &shape.polygon),
        p.lambda_in,
        p.lambda_out,
    ))
}

/// Element-mean data on an element that intersects the inclusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclusionElement {
    pub element: usize,
    /// `theta_e * |e|`
    pub weight: f64,
    pub centroid: [f64; 2],
    /// Mean gradient of the corrector for `e_1` and `e_2`.
    pub grad: [[f64; 2]; 2],
}

#[derive(Debug, Clone)]
pub struct CorrectorPair {
    pub k1: ScalarField,
    pub k2: ScalarField,
    pub coefficients: CoefficientField,
    pub elements: Vec<InclusionElement>,
    pub shape_id: String,
}

fn mean_gradient(field: &ScalarField, i: usize, j: usize) -> [f64; 2] {
    let g = &field.grid;
    let [n0, n1, n2, n3] = local_nodes(g, i, j);
    let v = &field.values;
    [
        ((v[n1] - v[n0]) + (v[n3] - v[n2])) / (2.0 * g.hx(i)),
        ((v[n2] - v[n0]) + (v[n3] - v[n1])) / (2.0 * g.hy(j)),
    ]
}

fn load_vector(grid: &Grid2D, dofs: &DofMap, theta: &[f64], p: &SolveParams, dir: [f64; 2]) -> Vec<f64> {
    let mut b = vec![0.0; dofs.len()];
    let scale = -p.alpha * p.contrast();
    for j in 0..grid.ny() - 1 {
        for i in 0..grid.nx() - 1 {
            let t = theta[grid.element(i, j)];
            if t == 0.0 {
                continue;
            }
            let gi = element_gradient_integrals(grid.hx(i), grid.hy(j));
            for (a, node) in local_nodes(grid, i, j).into_iter().enumerate() {
                if let Some(d) = dofs.dof(node) {
                    b[d] += scale * t * (dir[0] * gi[a][0] + dir[1] * gi[a][1]);
                }
            }
        }
    }
    b
}

fn corrector_params(p: &SolveParams) -> SolveParams {
    p.with_preconditioner(PreconditionerKind::Multigrid)
}

/// Solves the corrector for direction `e_k` (`k` in `{1, 2}`).
pub fn solve_corrector(grid: &GradedGrid, shape: &InclusionShape, p: &SolveParams, k: usize) -> Result<ScalarField> {
    let dir = match k {
        1 => [1.0, 0.0],
        2 => [0.0, 1.0],
        _ => return Err(Error::Parameter(format!("direction index must be 1 or 2, got {k}"))),
    };
    solve_corrector_direction(grid, shape, p, dir)
}

/// Corrector for an arbitrary far-field direction `eta`.
pub fn solve_corrector_direction(grid: &GradedGrid, shape: &InclusionShape, p: &SolveParams, eta: [f64; 2]) -> Result<ScalarField> {
    p.validate()?;
    let coeff = assign_inclusion_fractions(grid, shape, p)?;
    let g = &grid.grid;
    let dofs = DofMap::new(g, Boundary::Dirichlet);
    let stiff: Vec<f64> = coeff.lambda.iter().map(|l| p.alpha * l).collect();
    let a = assemble(g, &stiff, 0.0, Boundary::Dirichlet);
    let b = load_vector(g, &dofs, coeff.theta.as_ref().unwrap(), p, eta);
    let x = fem::solve_system(&a, &b, g, Boundary::Dirichlet, &corrector_params(p))?;
    ScalarField::new(g.clone(), dofs.expand(&x, g))
}

/// Solves both basis directions with one assembled operator and preconditioner.
pub fn solve_corrector_pair(grid: &GradedGrid, shape: &InclusionShape, p: &SolveParams) -> Result<CorrectorPair> {
    p.validate()?;
    let coeff = assign_inclusion_fractions(grid, shape, p)?;
    let g = &grid.grid;
    let dofs = DofMap::new(g, Boundary::Dirichlet);
    let theta = coeff.theta.as_ref().unwrap();
    let stiff: Vec<f64> = coeff.lambda.iter().map(|l| p.alpha * l).collect();
    let a = assemble(g, &stiff, 0.0, Boundary::Dirichlet);
    let cp = corrector_params(p);
    let mg = crate::solver::Multigrid::new(a.clone(), g.xs(), g.ys(), Boundary::Dirichlet)?;
    let mut fields = Vec::with_capacity(2);
    for dir in [[1.0, 0.0], [0.0, 1.0]] {
        let b = load_vector(g, &dofs, theta, p, dir);
        let mut x = vec![0.0; b.len()];
        let st = crate::solver::pcg(&a, &b, &mut x, &mg, cp.cg_tol, cp.cg_max_iter)?;
        log::debug!("{}: corrector {:?} in {} iterations", shape.id, dir, st.iterations);
        fields.push(ScalarField::new(g.clone(), dofs.expand(&x, g))?);
    }
    let k2 = fields.pop().unwrap();
    let k1 = fields.pop().unwrap();
    let mut elements = Vec::new();
    for j in 0..g.ny() - 1 {
        for i in 0..g.nx() - 1 {
            let e = g.element(i, j);
            if theta[e] > 0.0 {
                elements.push(InclusionElement {
                    element: e,
                    weight: theta[e] * g.element_area(i, j),
                    centroid: g.element_centroid(i, j),
                    grad: [mean_gradient(&k1, i, j), mean_gradient(&k2, i, j)],
                });
            }
        }
    }
    Ok(CorrectorPair {
        k1,
        k2,
        coefficients: coeff,
        elements,
        shape_id: shape.id.clone(),
    })
}

impl CorrectorPair {
    fn field(&self, k: usize) -> &ScalarField {
        if k == 1 {
            &self.k1
        } else {
            &self.k2
        }
    }

    /// `int alpha lambda |grad K_k|^2`
    pub fn energy(&self, k: usize, p: &SolveParams) -> f64 {
        let f = self.field(k);
        let g = &f.grid;
        let mut total = 0.0;
        for j in 0..g.ny() - 1 {
            for i in 0..g.nx() - 1 {
                let (km, _) = fem::element_matrices(g.hx(i), g.hy(j));
                let u = local_nodes(g, i, j).map(|n| f.values[n]);
                let mut e = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        e += u[a] * km[a][b] * u[b];
                    }
                }
                total += p.alpha * self.coefficients.lambda[g.element(i, j)] * e;
            }
        }
        total
    }

    /// `-alpha (lin - lout) int_w e_k . grad K_k`, the load tested against the solution.
    pub fn load_work(&self, k: usize, p: &SolveParams) -> f64 {
        -p.alpha
            * p.contrast()
            * self
                .elements
                .iter()
                .map(|e| e.weight * e.grad[k - 1][k - 1])
                .sum::<f64>()
    }

    /// `sum_e theta_e |e|`, the discrete inclusion area.
    pub fn discrete_area(&self) -> f64 {
        self.elements.iter().map(|e| e.weight).sum()
    }
}
