//! Preconditioned conjugate gradients for the SPD systems of the bilinear
//! element discretizations, with a Jacobi and a geometric multigrid
//! preconditioner for tensor-product grids.

use nalgebra::{DMatrix, DVector};

use crate::sparse::CsrMatrix;
use crate::{Error, Result};

pub trait Preconditioner {
    /// `z = B r` for an SPD approximation `B` of the inverse.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Self {
        Self {
            inv_diag: a.diagonal().into_iter().map(|d| 1.0 / d).collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` starting from the given `x`, stopping once
/// `|b - A x| <= tol |b|`.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], pc: &dyn Preconditioner, tol: f64, max_iter: usize) -> Result<CgStats> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = a.mul_vec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut res = dot(&r, &r).sqrt() / bnorm;
    if res <= tol {
        return Ok(CgStats {
            iterations: 0,
            residual: res,
        });
    }
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotConverged {
                iterations: it,
                residual: res,
            });
        }
        let step = rz / pap;
        for k in 0..n {
            x[k] += step * p[k];
            r[k] -= step * ap[k];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        if res <= tol {
            return Ok(CgStats {
                iterations: it,
                residual: res,
            });
        }
        pc.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: res,
    })
}

/// Which nodes of a tensor grid carry unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// All nodes are unknowns (natural boundary condition).
    Natural,
    /// Boundary nodes are fixed to zero and eliminated.
    Dirichlet,
}

impl Boundary {
    /// Free-node index range along one direction with `n` nodes.
    pub fn free_range(self, n: usize) -> std::ops::Range<usize> {
        match self {
            Boundary::Natural => 0..n,
            Boundary::Dirichlet => 1..n - 1,
        }
    }
}

/// Linear interpolation from every-other node in one direction.
/// Returns the coarse coordinates and, per free fine node, its `(coarse free index, weight)` pairs.
fn prolong_1d(c: &[f64], bc: Boundary) -> (Vec<f64>, Vec<Vec<(usize, f64)>>) {
    let n = c.len();
    let mut sel: Vec<usize> = (0..n).step_by(2).collect();
    if *sel.last().unwrap() != n - 1 {
        sel.push(n - 1);
    }
    let coarse: Vec<f64> = sel.iter().map(|&k| c[k]).collect();
    let nc = sel.len();
    let fine_free = bc.free_range(n);
    let coarse_free = bc.free_range(nc);
    let cfree = |k: usize| -> Option<usize> { coarse_free.contains(&k).then(|| k - coarse_free.start) };
    let mut rows = Vec::with_capacity(fine_free.len());
    let mut kc = 0usize;
    for i in 0..n {
        while kc + 1 < nc && sel[kc + 1] <= i {
            kc += 1;
        }
        let mut entries = Vec::with_capacity(2);
        if sel[kc] == i {
            if let Some(f) = cfree(kc) {
                entries.push((f, 1.0));
            }
        } else {
            let (a, b) = (sel[kc], sel[kc + 1]);
            let t = (c[i] - c[a]) / (c[b] - c[a]);
            if let Some(f) = cfree(kc) {
                entries.push((f, 1.0 - t));
            }
            if let Some(f) = cfree(kc + 1) {
                entries.push((f, t));
            }
        }
        if fine_free.contains(&i) {
            rows.push(entries);
        }
    }
    (coarse, rows)
}

fn identity_1d(n_free: usize) -> Vec<Vec<(usize, f64)>> {
    (0..n_free).map(|k| vec![(k, 1.0)]).collect()
}

fn kron_prolongation(px: &[Vec<(usize, f64)>], ncx_free: usize, py: &[Vec<(usize, f64)>], ncy_free: usize) -> CsrMatrix {
    let nfx = px.len();
    let mut trip = Vec::with_capacity(px.len() * py.len() * 4);
    for (jf, ry) in py.iter().enumerate() {
        for (if_, rx) in px.iter().enumerate() {
            let row = if_ + nfx * jf;
            for &(jc, wy) in ry {
                for &(ic, wx) in rx {
                    trip.push((row, ic + ncx_free * jc, wx * wy));
                }
            }
        }
    }
    CsrMatrix::from_triplets(px.len() * py.len(), ncx_free * ncy_free, &trip)
}

struct Level {
    a: CsrMatrix,
    /// Free nodes per direction; unknown `i + nfx * j`.
    nfx: usize,
    nfy: usize,
    /// Prolongation from the next coarser level (absent on the coarsest).
    p: Option<CsrMatrix>,
    r: Option<CsrMatrix>,
}

/// Geometric multigrid V-cycle on a tensor-product grid with Galerkin coarse
/// operators and alternating line Gauss–Seidel smoothing (x lines then y lines
/// before the coarse correction, reversed after); symmetric, so usable as a
/// CG preconditioner.
pub struct Multigrid {
    levels: Vec<Level>,
    coarse: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    sweeps: usize,
}

impl Multigrid {
    /// `a` must be ordered by free nodes `i + nfx * j` of the grid spanned by `xs`, `ys`.
    pub fn new(a: CsrMatrix, xs: &[f64], ys: &[f64], bc: Boundary) -> Result<Self> {
        const MIN_NODES: usize = 5;
        const COARSEST: usize = 400;
        let mut levels = Vec::new();
        let mut xs = xs.to_vec();
        let mut ys = ys.to_vec();
        let mut a = a;
        loop {
            let nfx = bc.free_range(xs.len()).len();
            let nfy = bc.free_range(ys.len()).len();
            let coarsen_x = xs.len() > MIN_NODES;
            let coarsen_y = ys.len() > MIN_NODES;
            if nfx * nfy <= COARSEST || !(coarsen_x || coarsen_y) {
                break;
            }
            let (cx, px) = if coarsen_x {
                prolong_1d(&xs, bc)
            } else {
                (xs.clone(), identity_1d(nfx))
            };
            let (cy, py) = if coarsen_y {
                prolong_1d(&ys, bc)
            } else {
                (ys.clone(), identity_1d(nfy))
            };
            let p = kron_prolongation(&px, bc.free_range(cx.len()).len(), &py, bc.free_range(cy.len()).len());
            let r = p.transpose();
            let ac = r.matmul(&a).matmul(&p);
            levels.push(Level {
                a,
                nfx,
                nfy,
                p: Some(p),
                r: Some(r),
            });
            a = ac;
            xs = cx;
            ys = cy;
        }
        let n = a.nrows();
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (c, v) in cols.iter().zip(vals) {
                dense[(i, *c)] = *v;
            }
        }
        let coarse = dense
            .cholesky()
            .ok_or_else(|| Error::Parameter("coarsest multigrid operator is not positive definite".into()))?;
        let nfx = bc.free_range(xs.len()).len();
        let nfy = bc.free_range(ys.len()).len();
        levels.push(Level {
            a,
            nfx,
            nfy,
            p: None,
            r: None,
        });
        Ok(Self {
            levels,
            coarse,
            sweeps: 1,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Block Gauss–Seidel over grid lines: each line of unknowns along `x`
    /// (or `y`) is solved exactly with the tridiagonal part of its rows.
    fn line_relax(level: &Level, b: &[f64], x: &mut [f64], along_x: bool, forward: bool) {
        let (nfx, nfy) = (level.nfx, level.nfy);
        let (len, count, stride) = if along_x { (nfx, nfy, 1) } else { (nfy, nfx, nfx) };
        let mut lower = vec![0.0; len];
        let mut diag = vec![0.0; len];
        let mut upper = vec![0.0; len];
        let mut rhs = vec![0.0; len];
        let mut relax = |line: usize| {
            let first = if along_x { nfx * line } else { line };
            for k in 0..len {
                let r = first + k * stride;
                let (cols, vals) = level.a.row(r);
                let mut s = b[r];
                lower[k] = 0.0;
                upper[k] = 0.0;
                diag[k] = 0.0;
                for (c, v) in cols.iter().zip(vals) {
                    let c = *c;
                    if c == r {
                        diag[k] = *v;
                    } else if k > 0 && c + stride == r {
                        lower[k] = *v;
                    } else if k + 1 < len && c == r + stride {
                        upper[k] = *v;
                    } else {
                        s -= v * x[c];
                    }
                }
                rhs[k] = s;
            }
            // Thomas algorithm, overwriting upper and rhs
            for k in 0..len {
                let m = if k > 0 { diag[k] - lower[k] * upper[k - 1] } else { diag[k] };
                upper[k] /= m;
                rhs[k] = if k > 0 { (rhs[k] - lower[k] * rhs[k - 1]) / m } else { rhs[k] / m };
            }
            for k in (0..len).rev() {
                let v = if k + 1 < len { rhs[k] - upper[k] * rhs[k + 1] } else { rhs[k] };
                rhs[k] = v;
                x[first + k * stride] = v;
            }
        };
        if forward {
            (0..count).for_each(&mut relax);
        } else {
            (0..count).rev().for_each(&mut relax);
        }
    }

    fn vcycle(&self, k: usize, b: &[f64], x: &mut [f64]) {
        let level = &self.levels[k];
        if level.p.is_none() {
            let sol = self.coarse.solve(&DVector::from_column_slice(b));
            x.copy_from_slice(sol.as_slice());
            return;
        }
        x.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..self.sweeps {
            Self::line_relax(level, b, x, true, true);
            Self::line_relax(level, b, x, false, true);
        }
        let mut res = level.a.mul_vec(x);
        for (ri, bi) in res.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let rc = level.r.as_ref().unwrap().mul_vec(&res);
        let mut xc = vec![0.0; rc.len()];
        self.vcycle(k + 1, &rc, &mut xc);
        let corr = level.p.as_ref().unwrap().mul_vec(&xc);
        for (xi, ci) in x.iter_mut().zip(&corr) {
            *xi += ci;
        }
        for _ in 0..self.sweeps {
            Self::line_relax(level, b, x, false, false);
            Self::line_relax(level, b, x, true, false);
        }
    }
}

impl Preconditioner for Multigrid {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.vcycle(0, r, z);
    }
}
