//! One-shot vertex detection: a single state solve, one second-order map per
//! candidate shape, shapes ranked by the minimum of their map.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::exterior::ExteriorParams;
use crate::fem::{extract_derivatives, solve_state, CoefficientField, DerivativeFields, SolveParams};
use crate::geometry::Point;
use crate::grid::Grid2D;
use crate::inclusion::ShapeSet;
use crate::polarization::{load_or_compute, PolarizationData};
use crate::scene::{IntensityField, Label, LabelGeometry};
use crate::tdmap::{eval_td2, TdMap};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingEntry {
    /// 1-based position in the ranking.
    pub rank: usize,
    pub min_value: f64,
    pub shape_id: String,
    pub angles: Vec<f64>,
    pub argmin: (usize, usize),
    pub position: Point,
    /// Nearest scene label and its distance in pixels.
    pub label: Option<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct DetectOptions {
    pub margin: usize,
    pub exterior: ExteriorParams,
    /// Ignore cached polarization data and recompute it.
    pub recompute: bool,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            margin: 3,
            exterior: ExteriorParams::default(),
            recompute: false,
        }
    }
}

/// Loads (or computes and caches) the polarization data of every shape, in set order.
pub fn precompute_all(theta: &ShapeSet, p: &SolveParams, ext: &ExteriorParams, cache_dir: &Path, recompute: bool) -> Result<Vec<PolarizationData>> {
    theta
        .shapes
        .par_iter()
        .map(|s| load_or_compute(s, p, ext, cache_dir, recompute))
        .collect()
}

/// State solve on the image with `Omega` empty, followed by derivative extraction.
pub fn state_derivatives(f: &IntensityField, p: &SolveParams, margin: usize) -> Result<DerivativeFields> {
    let u = solve_state(f, p, &CoefficientField::uniform(&f.grid, p.lambda_out), &f.grid)?;
    extract_derivatives(&u, margin)
}

/// Sorts maps ascending by minimum, ties by shape id, and numbers them.
pub fn rank_maps(maps: &[TdMap], pols: &[PolarizationData]) -> Vec<RankingEntry> {
    let mut entries: Vec<RankingEntry> = maps
        .iter()
        .zip(pols)
        .map(|(m, pol)| RankingEntry {
            rank: 0,
            min_value: m.min_value,
            shape_id: m.shape_id.clone(),
            angles: pol.angles.clone(),
            argmin: m.argmin,
            position: m.argmin_point(),
            label: None,
        })
        .collect();
    entries.sort_by(|a, b| a.min_value.total_cmp(&b.min_value).then_with(|| a.shape_id.cmp(&b.shape_id)));
    for (k, e) in entries.iter_mut().enumerate() {
        e.rank = k + 1;
    }
    entries
}

/// Second-order maps for every shape of `theta`, in set order.
pub fn detection_maps(f: &IntensityField, theta: &ShapeSet, p: &SolveParams, cache_dir: &Path, opts: &DetectOptions) -> Result<(Vec<TdMap>, Vec<PolarizationData>)> {
    if theta.is_empty() {
        return Err(Error::Parameter("candidate shape set is empty".into()));
    }
    let pols = precompute_all(theta, p, &opts.exterior, cache_dir, opts.recompute)?;
    let d = state_derivatives(f, p, opts.margin)?;
    let maps = pols.par_iter().map(|pol| eval_td2(&d, pol, p)).collect::<Result<Vec<_>>>()?;
    Ok((maps, pols))
}

/// Full ranking of `theta` on the image `f`.
pub fn run_detection(f: &IntensityField, theta: &ShapeSet, p: &SolveParams, cache_dir: &Path, opts: &DetectOptions) -> Result<Vec<RankingEntry>> {
    let (maps, pols) = detection_maps(f, theta, p, cache_dir, opts)?;
    Ok(rank_maps(&maps, &pols))
}

/// Annotates entries with the nearest label within `radius_px` pixels of the
/// image grid. Labels are in scene coordinates on `[0,1]^2`. Vertex labels take
/// precedence over edge labels.
pub fn label_positions(entries: &mut [RankingEntry], labels: &[Label], radius_px: f64, image: &Grid2D) {
    let (_, side) = image.extent();
    let pixel = image.hx(0) / side[0];
    let nearest = |p: Point, want_vertex: bool| -> Option<(String, f64)> {
        labels
            .iter()
            .filter(|l| matches!(l.geometry, LabelGeometry::Vertex { .. }) == want_vertex)
            .map(|l| (l.name.clone(), l.distance(p) / pixel))
            .filter(|(_, d)| *d <= radius_px + 1e-9)
            .min_by(|a, b| a.1.total_cmp(&b.1))
    };
    for e in entries {
        let p = image.normalize(e.position);
        e.label = nearest(p, true).or_else(|| nearest(p, false));
    }
}
