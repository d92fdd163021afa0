//! Vertex detection in piecewise-constant images by second-order topological
//! derivatives of a Mumford-Shah type functional.
//!
//! The pipeline has two halves:
//!
//! * a shape-only precompute: each candidate inclusion shape (a thickened fan of
//!   2–4 rays) gets its corrector functions solved on a truncated exterior
//!   domain, from which the weak polarization matrices are extracted and
//!   cached ([`exterior`], [`polarization`]);
//! * an image-dependent evaluation: one elliptic smoothing solve on the image
//!   ([`fem`]), finite-difference gradients and Hessians of the state, and one
//!   topological-derivative map per shape ([`tdmap`]), ranked by their minima
//!   ([`detect`]).

pub mod detect;
pub mod exterior;
pub mod fem;
pub mod geometry;
pub mod grid;
pub mod inclusion;
pub mod io;
pub mod polarization;
pub mod scene;
pub mod solver;
pub mod sparse;
pub mod tdmap;

pub use detect::{label_positions, run_detection, DetectOptions, RankingEntry};
pub use exterior::{
    assign_inclusion_fractions, build_graded_grid, solve_corrector, solve_corrector_pair, CorrectorPair,
    ExteriorParams,
};
pub use fem::{
    extract_derivatives, solve_perturbed_state, solve_state, CoefficientField, DerivativeFields, SolveParams,
};
pub use geometry::{Point, Polygon};
pub use grid::{Grid2D, ScalarField};
pub use inclusion::{build_inclusion, generate_theta, InclusionShape, ShapeSet, DEFAULT_WIDTH};
pub use polarization::{cache_load, cache_store, compute_polarization, PolarizationData};
pub use scene::{builtin_scene, image_grid, rasterize, BuiltinScene, IntensityField, SceneSpec};
pub use tdmap::{eval_td1, eval_td2, finite_eps_check, TdMap};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("degenerate inclusion shape: {0}")]
    Degenerate(String),
    #[error("conjugate gradients did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("stale cache entry {path}: expected hash {expected}, found {found}")]
    StaleCache {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("cache entry not found: {0}")]
    NotFound(PathBuf),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("scene format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
