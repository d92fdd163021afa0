//! Weak polarization matrices of an inclusion shape and their on-disk cache.
//!
//! `P1[:, k] = 1/|w| int_w grad K_k` and `P2[:, k] = 1/|w| int_w vec(grad K_k (x) x)`
//! with row-major `vec`, so `vec(a (x) b) = (a1 b1, a1 b2, a2 b1, a2 b2)`.
//! `X = I2 (x) m` under the same convention.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exterior::{build_graded_grid, solve_corrector_pair, CorrectorPair, ExteriorParams, GradedGrid};
use crate::fem::SolveParams;
use crate::inclusion::InclusionShape;
use crate::{Error, Result};

/// Everything the polarization data depends on besides the shape angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecomputeParams {
    pub w: f64,
    pub alpha: f64,
    pub lambda_in: f64,
    pub lambda_out: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub h_f: f64,
    #[serde(rename = "L_f")]
    pub core: f64,
    pub rho: f64,
    pub h_max: f64,
}

impl PrecomputeParams {
    pub fn new(p: &SolveParams, e: &ExteriorParams, w: f64) -> Self {
        Self {
            w,
            alpha: p.alpha,
            lambda_in: p.lambda_in,
            lambda_out: p.lambda_out,
            radius: e.radius,
            h_f: e.h_fine,
            core: e.core,
            rho: e.rho,
            h_max: e.h_max,
        }
    }

    pub fn exterior(&self) -> ExteriorParams {
        ExteriorParams {
            radius: self.radius,
            h_fine: self.h_f,
            core: self.core,
            rho: self.rho,
            h_max: self.h_max,
        }
    }

    /// SHA-256 over a canonical rendering of the shape id and every parameter.
    pub fn hash(&self, shape_id: &str) -> String {
        let canon = format!(
            "{shape_id}|w={:?}|alpha={:?}|lin={:?}|lout={:?}|R={:?}|hf={:?}|Lf={:?}|rho={:?}|hmax={:?}",
            self.w, self.alpha, self.lambda_in, self.lambda_out, self.radius, self.h_f, self.core, self.rho, self.h_max
        );
        Sha256::digest(canon.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn matches(&self, p: &SolveParams) -> bool {
        self.alpha == p.alpha && self.lambda_in == p.lambda_in && self.lambda_out == p.lambda_out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationData {
    pub shape_id: String,
    pub angles: Vec<f64>,
    #[serde(flatten)]
    pub params: PrecomputeParams,
    #[serde(rename = "P1")]
    pub p1: [[f64; 2]; 2],
    #[serde(rename = "P2")]
    pub p2: [[f64; 2]; 4],
    #[serde(rename = "X")]
    pub x: [[f64; 2]; 4],
    pub area: f64,
    pub centroid: [f64; 2],
    pub hash: String,
}

/// `I2 (x) m` with row-major `vec`.
pub fn geometric_matrix(m: [f64; 2]) -> [[f64; 2]; 4] {
    [[m[0], 0.0], [m[1], 0.0], [0.0, m[0]], [0.0, m[1]]]
}

/// Row-major `vec` of a 2x2 matrix.
pub fn vec_row_major(h: &[[f64; 2]; 2]) -> [f64; 4] {
    [h[0][0], h[0][1], h[1][0], h[1][1]]
}

/// Extracts `P1`, `P2`, `X` from solved correctors.
pub fn compute_polarization(
    shape: &InclusionShape,
    correctors: &CorrectorPair,
    grid: &GradedGrid,
    p: &SolveParams,
) -> Result<PolarizationData> {
    if correctors.shape_id != shape.id {
        return Err(Error::Consistency(format!(
            "correctors belong to {} but shape is {}",
            correctors.shape_id, shape.id
        )));
    }
    if correctors.k1.grid != grid.grid {
        return Err(Error::Consistency("correctors were solved on a different grid".into()));
    }
    let mom = shape.moments()?;
    let inv = 1.0 / mom.area;
    let mut p1 = [[0.0; 2]; 2];
    let mut p2 = [[0.0; 2]; 4];
    for e in &correctors.elements {
        let c = e.centroid;
        for k in 0..2 {
            let g = e.grad[k];
            for i in 0..2 {
                p1[i][k] += e.weight * g[i];
                for j in 0..2 {
                    p2[2 * i + j][k] += e.weight * g[i] * c[j];
                }
            }
        }
    }
    p1.iter_mut().flatten().for_each(|v| *v *= inv);
    p2.iter_mut().flatten().for_each(|v| *v *= inv);
    let params = PrecomputeParams::new(p, &grid.params, shape.width);
    let data = PolarizationData {
        shape_id: shape.id.clone(),
        angles: shape.angles.clone(),
        hash: params.hash(&shape.id),
        params,
        p1,
        p2,
        x: geometric_matrix(mom.centroid),
        area: mom.area,
        centroid: mom.centroid,
    };
    if !data.is_finite() {
        return Err(Error::Consistency(format!("non-finite polarization entries for {}", shape.id)));
    }
    Ok(data)
}

/// Builds the graded grid, solves both correctors and extracts the matrices.
pub fn precompute_shape(shape: &InclusionShape, p: &SolveParams, ext: &ExteriorParams) -> Result<PolarizationData> {
    let grid = build_graded_grid(ext)?;
    let pair = solve_corrector_pair(&grid, shape, p)?;
    compute_polarization(shape, &pair, &grid, p)
}

impl PolarizationData {
    fn is_finite(&self) -> bool {
        self.p1.iter().chain(self.p2.iter()).chain(self.x.iter()).flatten().all(|v| v.is_finite())
    }

    /// Checks that the data was computed with the same `alpha`, `lambda_in`, `lambda_out`.
    pub fn check_params(&self, p: &SolveParams) -> Result<()> {
        if !self.params.matches(p) {
            return Err(Error::Consistency(format!(
                "{} was precomputed with alpha={}, lambda_in={}, lambda_out={} but evaluation uses {}, {}, {}",
                self.shape_id,
                self.params.alpha,
                self.params.lambda_in,
                self.params.lambda_out,
                p.alpha,
                p.lambda_in,
                p.lambda_out
            )));
        }
        Ok(())
    }

    /// `max |P2_ij|`
    pub fn p2_max_abs(&self) -> f64 {
        self.p2.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
    }
}

fn file_prefix(shape_id: &str) -> String {
    format!("{shape_id}-")
}

pub fn cache_path(dir: &Path, shape_id: &str, hash: &str) -> PathBuf {
    dir.join(format!("{}{}.pol.json", file_prefix(shape_id), &hash[..8]))
}

/// Writes `data` atomically into `dir` and returns the file path.
pub fn cache_store(data: &PolarizationData, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = cache_path(dir, &data.shape_id, &data.hash);
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, serde_json::to_string_pretty(data)?)?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

/// Loads the entry for `shape_id` computed with `params`.
///
/// A file for the same shape with a different parameter hash is reported as
/// stale; no file at all is reported as not found.
pub fn cache_load(shape_id: &str, params: &PrecomputeParams, dir: &Path) -> Result<PolarizationData> {
    let expected = params.hash(shape_id);
    let path = cache_path(dir, shape_id, &expected);
    if path.is_file() {
        let data: PolarizationData = serde_json::from_str(&fs::read_to_string(&path)?)?;
        if data.hash != expected || data.params != *params || data.shape_id != shape_id {
            return Err(Error::StaleCache {
                path,
                expected,
                found: data.hash,
            });
        }
        return Ok(data);
    }
    let prefix = file_prefix(shape_id);
    if let Ok(entries) = fs::read_dir(dir) {
        let mut others: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with(&prefix) && n.ends_with(".pol.json") && n.len() == prefix.len() + 8 + 9)
            })
            .collect();
        others.sort();
        if let Some(other) = others.into_iter().next() {
            let found = serde_json::from_str::<serde_json::Value>(&fs::read_to_string(&other)?)?
                .get("hash")
                .and_then(|h| h.as_str())
                .unwrap_or_default()
                .to_string();
            return Err(Error::StaleCache {
                path: other,
                expected,
                found,
            });
        }
    }
    Err(Error::NotFound(path))
}

/// Loads a cached entry, computing and storing it on a miss. With
/// `recompute`, stale and fresh entries alike are overwritten.
pub fn load_or_compute(
    shape: &InclusionShape,
    p: &SolveParams,
    ext: &ExteriorParams,
    dir: &Path,
    recompute: bool,
) -> Result<PolarizationData> {
    let params = PrecomputeParams::new(p, ext, shape.width);
    if !recompute {
        match cache_load(&shape.id, &params, dir) {
            Ok(d) => return Ok(d),
            Err(Error::NotFound(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let data = precompute_shape(shape, p, ext)?;
    if recompute {
        remove_entries(&shape.id, dir)?;
    }
    cache_store(&data, dir)?;
    Ok(data)
}

fn remove_entries(shape_id: &str, dir: &Path) -> Result<()> {
    let prefix = file_prefix(shape_id);
    if let Ok(entries) = fs::read_dir(dir) {
        for e in entries.flatten() {
            let name = e.file_name();
            let name = name.to_string_lossy();
            if name.starts_with(&prefix) && name.ends_with(".pol.json") && name.len() == prefix.len() + 8 + 9 {
                fs::remove_file(e.path())?;
            }
        }
    }
    Ok(())
}
