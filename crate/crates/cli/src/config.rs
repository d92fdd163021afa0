//! Command-line arguments and the run configuration recorded next to every output.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tdvertex::{builtin_scene, BuiltinScene, ExteriorParams, SceneSpec, SolveParams};

#[derive(Debug, Parser, Serialize)]
#[command(name = "tdvertex", version, about = "Vertex detection by second-order topological derivatives")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case", tag = "subcommand")]
pub enum Command {
    /// Render a scene to PGM and CSV.
    Scene {
        #[command(flatten)]
        scene: SceneArgs,
    },
    /// Fill the polarization cache for a candidate set.
    Precompute {
        #[command(flatten)]
        theta: ThetaArgs,
    },
    /// First- and second-order maps of one shape on one scene.
    Map {
        #[command(flatten)]
        scene: SceneArgs,
        /// Shape id such as `w[0,90,180]`.
        #[arg(long)]
        shape: String,
    },
    /// Rank every candidate shape by the minimum of its second-order map.
    Detect {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        theta: ThetaArgs,
        /// Keep only the first N entries.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Run the built-in numerical checks.
    Validate,
}

#[derive(Debug, Args, Serialize)]
pub struct SceneArgs {
    /// Builtin scene name (`cube`, `overlapping_cubes`) or path to a JSON scene file.
    #[arg(long)]
    pub scene: String,
    /// Comma-separated gray values, one per region; required for builtin scenes.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub f: Option<Vec<f64>>,
}

#[derive(Debug, Args, Serialize)]
pub struct ThetaArgs {
    /// Number of angular subdivisions.
    #[arg(long, default_value_t = 8)]
    pub m: usize,
    /// Line counts of the candidate shapes.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    pub lines: Vec<usize>,
    /// Ignore cached polarization data and recompute it.
    #[arg(long)]
    pub recompute: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Polarization cache directory.
    #[arg(long, global = true, default_value = "polarization-cache")]
    pub cache: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 8.0)]
    pub alpha: f64,
    #[arg(long, global = true, default_value_t = 0.05)]
    pub lambda_in: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub lambda_out: f64,
    /// Arm width of the candidate shapes.
    #[arg(long, global = true, default_value_t = 0.05)]
    pub w: f64,
    /// Half-width of the truncated exterior domain.
    #[arg(long = "R", global = true, default_value_t = 30.0)]
    pub radius: f64,
    /// Fine spacing of the exterior grid.
    #[arg(long, global = true, default_value_t = 0.0125)]
    pub h_f: f64,
    /// Half-width of the finely resolved core box.
    #[arg(long = "L-f", global = true, default_value_t = 1.6)]
    pub core: f64,
    #[arg(long, global = true, default_value_t = 1.2)]
    pub rho: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub h_max: f64,
    /// Masked boundary band of the maps, in pixels.
    #[arg(long, global = true, default_value_t = 3)]
    pub margin: usize,
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub cg_tol: f64,
    #[arg(long, global = true, default_value_t = 20_000)]
    pub cg_max_iter: usize,
    /// Image size in pixels per direction.
    #[arg(long, global = true, default_value_t = 100)]
    pub pixels: usize,
    /// Physical side length of one pixel.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub pixel_size: f64,
    /// Label search radius for reported positions, in pixels.
    #[arg(long, global = true, default_value_t = 3.0)]
    pub label_radius: f64,
}

impl Common {
    pub fn solve_params(&self) -> anyhow::Result<SolveParams> {
        let p = SolveParams {
            alpha: self.alpha,
            lambda_in: self.lambda_in,
            lambda_out: self.lambda_out,
            cg_tol: self.cg_tol,
            cg_max_iter: self.cg_max_iter,
            ..SolveParams::default()
        };
        p.validate()?;
        Ok(p)
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
}

impl SceneArgs {
    pub fn load(&self) -> anyhow::Result<SceneSpec> {
        if let Ok(name) = BuiltinScene::from_str(&self.scene) {
            let Some(f) = &self.f else {
                bail!("builtin scene `{}` needs --f with {} values", name.name(), name.num_regions());
            };
            return Ok(builtin_scene(name, f)?);
        }
        let path = PathBuf::from(&self.scene);
        if !path.is_file() {
            bail!("`{}` is neither a builtin scene nor a scene file", self.scene);
        }
        let spec = SceneSpec::load(&path).with_context(|| format!("loading scene {}", path.display()))?;
        Ok(match &self.f {
            Some(f) => spec.with_intensities(f)?,
            None => spec,
        })
    }
}
