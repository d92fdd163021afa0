//! Piecewise-constant synthetic images: polygonal regions with one gray value
//! each, rasterized at grid nodes.

use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{point_segment_distance, Point, Polygon};
use crate::grid::{Grid2D, ScalarField};
use crate::{Error, Result};

/// Nodal image values.
pub type IntensityField = ScalarField;

/// Distance below which a node counts as lying on a region edge.
const EDGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// 1-based index into the intensity vector. Several polygons may share an id.
    pub id: usize,
    pub polygon: Polygon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelGeometry {
    Vertex { at: Point },
    Edge { from: Point, to: Point },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub name: String,
    #[serde(flatten)]
    pub geometry: LabelGeometry,
}

impl Label {
    pub fn vertex(name: &str, at: Point) -> Self {
        Self {
            name: name.into(),
            geometry: LabelGeometry::Vertex { at },
        }
    }

    pub fn edge(name: &str, from: Point, to: Point) -> Self {
        Self {
            name: name.into(),
            geometry: LabelGeometry::Edge { from, to },
        }
    }

    pub fn distance(&self, p: Point) -> f64 {
        match self.geometry {
            LabelGeometry::Vertex { at } => ((p[0] - at[0]).powi(2) + (p[1] - at[1]).powi(2)).sqrt(),
            LabelGeometry::Edge { from, to } => point_segment_distance(p, from, to),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub regions: Vec<Region>,
    pub intensities: Vec<f64>,
    pub background_id: usize,
    #[serde(default)]
    pub labels: Vec<Label>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinScene {
    Cube,
    OverlappingCubes,
}

impl BuiltinScene {
    pub fn num_regions(self) -> usize {
        match self {
            Self::Cube => 4,
            Self::OverlappingCubes => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Cube => "cube",
            Self::OverlappingCubes => "overlapping_cubes",
        }
    }
}

impl FromStr for BuiltinScene {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "cube" => Ok(Self::Cube),
            "overlapping_cubes" => Ok(Self::OverlappingCubes),
            other => Err(Error::Parameter(format!("unknown builtin scene `{other}`"))),
        }
    }
}

fn poly(v: &[Point]) -> Polygon {
    Polygon::new(v.to_vec())
}

fn unit_square() -> Polygon {
    poly(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
}

fn cube() -> (Vec<Region>, Vec<Label>) {
    let a = [0.25, 0.15];
    let g = [0.65, 0.15];
    let b = [0.25, 0.55];
    let e = [0.65, 0.55];
    let c = [0.45, 0.75];
    let d = [0.85, 0.75];
    let f = [0.85, 0.35];
    let regions = vec![
        Region { id: 1, polygon: poly(&[a, g, e, b]) },
        Region { id: 2, polygon: poly(&[b, e, d, c]) },
        Region { id: 3, polygon: poly(&[g, f, d, e]) },
        Region { id: 4, polygon: unit_square() },
    ];
    let mut labels: Vec<Label> = [("A", a), ("B", b), ("C", c), ("D", d), ("E", e), ("F", f), ("G", g)]
        .iter()
        .map(|(n, p)| Label::vertex(n, *p))
        .collect();
    for (n, p, q) in [
        ("(AB)", a, b),
        ("(AG)", a, g),
        ("(BE)", b, e),
        ("(EG)", e, g),
        ("(BC)", b, c),
        ("(CD)", c, d),
        ("(DE)", d, e),
        ("(GF)", g, f),
        ("(FD)", f, d),
    ] {
        labels.push(Label::edge(n, p, q));
    }
    (regions, labels)
}

fn overlapping_cubes() -> (Vec<Region>, Vec<Label>) {
    // small cube in front
    let front = poly(&[[0.15, 0.20], [0.45, 0.20], [0.45, 0.50], [0.15, 0.50]]);
    let top = poly(&[[0.15, 0.50], [0.45, 0.50], [0.60, 0.65], [0.30, 0.65]]);
    let right = poly(&[[0.45, 0.20], [0.60, 0.35], [0.60, 0.65], [0.45, 0.50]]);
    // bar behind it, visible parts only: front face y in [0.12, 0.75], top face up to 0.90
    let bar_low = poly(&[[0.39, 0.12], [0.54, 0.12], [0.54, 0.29], [0.45, 0.20], [0.39, 0.20]]);
    let bar_high = poly(&[[0.39, 0.65], [0.54, 0.65], [0.54, 0.75], [0.39, 0.75]]);
    let bar_top = poly(&[[0.39, 0.75], [0.54, 0.75], [0.69, 0.90], [0.54, 0.90]]);
    let bar_side = poly(&[
        [0.54, 0.12],
        [0.69, 0.27],
        [0.69, 0.90],
        [0.54, 0.75],
        [0.54, 0.65],
        [0.60, 0.65],
        [0.60, 0.35],
        [0.54, 0.29],
    ]);
    let regions = vec![
        Region { id: 1, polygon: front },
        Region { id: 2, polygon: top },
        Region { id: 3, polygon: right },
        Region { id: 4, polygon: bar_low },
        Region { id: 4, polygon: bar_high },
        Region { id: 5, polygon: bar_top },
        Region { id: 6, polygon: bar_side },
        Region { id: 7, polygon: unit_square() },
    ];
    let labels = vec![
        Label::vertex("T1", [0.39, 0.65]),
        Label::vertex("T2", [0.54, 0.65]),
        Label::vertex("T3", [0.39, 0.20]),
        Label::vertex("T4", [0.54, 0.29]),
    ];
    (regions, labels)
}

/// One of the two fixed test scenes with the given gray values.
pub fn builtin_scene(name: BuiltinScene, intensities: &[f64]) -> Result<SceneSpec> {
    if intensities.len() != name.num_regions() {
        return Err(Error::Dimension(format!(
            "{} needs {} intensities, got {}",
            name.name(),
            name.num_regions(),
            intensities.len()
        )));
    }
    let (regions, labels) = match name {
        BuiltinScene::Cube => cube(),
        BuiltinScene::OverlappingCubes => overlapping_cubes(),
    };
    let spec = SceneSpec {
        regions,
        intensities: intensities.to_vec(),
        background_id: name.num_regions(),
        labels,
    };
    spec.validate()?;
    Ok(spec)
}

impl SceneSpec {
    pub fn num_regions(&self) -> usize {
        self.intensities.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.intensities.len();
        if n == 0 {
            return Err(Error::Format("scene has no intensities".into()));
        }
        if !(1..=n).contains(&self.background_id) {
            return Err(Error::Dimension(format!("background id {} outside 1..={n}", self.background_id)));
        }
        if let Some(v) = self.intensities.iter().find(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite intensity {v}")));
        }
        for r in &self.regions {
            if !(1..=n).contains(&r.id) {
                return Err(Error::Dimension(format!("region id {} outside 1..={n}", r.id)));
            }
            if !r.polygon.is_simple() {
                return Err(Error::Format(format!("region {} polygon is not simple", r.id)));
            }
        }
        Ok(())
    }

    /// Parses the JSON scene format and validates it.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SceneSpec = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Same scene with different gray values.
    pub fn with_intensities(&self, intensities: &[f64]) -> Result<Self> {
        if intensities.len() != self.intensities.len() {
            return Err(Error::Dimension(format!(
                "scene has {} regions, got {} intensities",
                self.intensities.len(),
                intensities.len()
            )));
        }
        Ok(Self {
            intensities: intensities.to_vec(),
            ..self.clone()
        })
    }

    /// Region id at `p`: the lowest id whose polygon covers `p`, else the background.
    pub fn region_at(&self, p: Point) -> usize {
        self.regions
            .iter()
            .filter(|r| r.polygon.covers(p, EDGE_TOL))
            .map(|r| r.id)
            .min()
            .unwrap_or(self.background_id)
    }

    /// Mirror image about `x = 1/2`.
    pub fn mirrored_x(&self) -> Self {
        let flip = |p: Point| [1.0 - p[0], p[1]];
        Self {
            regions: self
                .regions
                .iter()
                .map(|r| Region {
                    id: r.id,
                    polygon: Polygon::new(r.polygon.vertices.iter().rev().map(|p| flip(*p)).collect()),
                })
                .collect(),
            intensities: self.intensities.clone(),
            background_id: self.background_id,
            labels: self
                .labels
                .iter()
                .map(|l| Label {
                    name: l.name.clone(),
                    geometry: match l.geometry {
                        LabelGeometry::Vertex { at } => LabelGeometry::Vertex { at: flip(at) },
                        LabelGeometry::Edge { from, to } => LabelGeometry::Edge {
                            from: flip(from),
                            to: flip(to),
                        },
                    },
                })
                .collect(),
        }
    }

    pub fn label(&self, name: &str) -> Option<&Label> {
        self.labels.iter().find(|l| l.name == name)
    }

    /// Coordinates of a vertex label.
    pub fn vertex(&self, name: &str) -> Option<Point> {
        match self.label(name)?.geometry {
            LabelGeometry::Vertex { at } => Some(at),
            LabelGeometry::Edge { .. } => None,
        }
    }
}

/// Square image grid with `pixels` cells of side `pixel_size` per direction.
pub fn image_grid(pixels: usize, pixel_size: f64) -> Result<Grid2D> {
    Grid2D::square(pixels, pixel_size)
}

/// Samples the scene at every grid node. Scene coordinates live on `[0,1]^2`
/// and are stretched over the box covered by the grid.
pub fn rasterize(spec: &SceneSpec, grid: &Grid2D) -> Result<IntensityField> {
    let (o, l) = grid.extent();
    let xs: Vec<f64> = grid.xs().iter().map(|x| (x - o[0]) / l[0]).collect();
    let values: Vec<f64> = grid
        .ys()
        .par_iter()
        .flat_map_iter(|&y| {
            let v = (y - o[1]) / l[1];
            xs.iter().map(move |&u| spec.intensities[spec.region_at([u, v]) - 1])
        })
        .collect();
    ScalarField::new(grid.clone(), values)
}
