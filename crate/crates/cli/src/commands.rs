use std::path::PathBuf;

use anyhow::{bail, Context};
use serde::Serialize;
use tdvertex::detect::{detection_maps, label_positions, precompute_all, rank_maps, state_derivatives, RankingEntry};
use tdvertex::inclusion::{build_inclusion, parse_shape_id};
use tdvertex::io::{field_to_csv, field_to_pgm, map_to_csv, map_to_pgm, ranking_to_csv, write_atomic};
use tdvertex::polarization::load_or_compute;
use tdvertex::scene::image_grid;
use tdvertex::{eval_td1, eval_td2, generate_theta, rasterize, DetectOptions, Grid2D, SceneSpec, TdMap};

use crate::config::{Cli, Command, SceneArgs, ThetaArgs};
use crate::validate;

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting the thread pool")?;
    }
    match &cli.command {
        Command::Scene { scene } => render_scene(cli, scene),
        Command::Precompute { theta } => precompute(cli, theta),
        Command::Map { scene, shape } => map(cli, scene, shape),
        Command::Detect { scene, theta, top } => detect(cli, scene, theta, *top),
        Command::Validate => validate::run(cli),
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    output: String,
    config: &'a Cli,
}

/// Writes `bytes` to `out/name` and records the run configuration next to it.
fn emit(cli: &Cli, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
    let path = cli.common.out.join(name);
    write_atomic(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    let meta = Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        output: name.to_string(),
        config: cli,
    };
    let mut json = serde_json::to_string_pretty(&meta)?;
    json.push('\n');
    write_atomic(&cli.common.out.join(format!("{name}.meta.json")), json.as_bytes())?;
    Ok(path)
}

/// File-system friendly form of a shape id: `w[0,90]` becomes `w_0_90`.
fn file_stem(shape_id: &str) -> String {
    shape_id
        .chars()
        .filter_map(|c| match c {
            '[' | ',' => Some('_'),
            ']' => None,
            c => Some(c),
        })
        .collect()
}

fn image(cli: &Cli, spec: &SceneSpec) -> anyhow::Result<tdvertex::IntensityField> {
    let grid = image_grid(cli.common.pixels, cli.common.pixel_size)?;
    Ok(rasterize(spec, &grid)?)
}

fn render_scene(cli: &Cli, args: &SceneArgs) -> anyhow::Result<()> {
    let spec = args.load()?;
    let f = image(cli, &spec)?;
    emit(cli, "scene.csv", field_to_csv(&f).as_bytes())?;
    let path = emit(cli, "scene.pgm", &field_to_pgm(&f))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn precompute(cli: &Cli, args: &ThetaArgs) -> anyhow::Result<()> {
    let p = cli.common.solve_params()?;
    let theta = generate_theta(args.m, &args.lines, cli.common.w)?;
    let pols = precompute_all(&theta, &p, &cli.common.exterior(), &cli.common.cache, args.recompute)?;
    println!("{} shapes cached in {}", pols.len(), cli.common.cache.display());
    Ok(())
}

/// Nearest label of a physical point as `name (d px)`, or `-`.
fn describe(position: tdvertex::Point, spec: &SceneSpec, grid: &Grid2D, radius: f64) -> String {
    let mut e = [RankingEntry {
        rank: 1,
        min_value: 0.0,
        shape_id: String::new(),
        angles: Vec::new(),
        argmin: (0, 0),
        position,
        label: None,
    }];
    label_positions(&mut e, &spec.labels, radius, grid);
    match &e[0].label {
        Some((name, d)) => format!("{name} ({d:.1} px)"),
        None => "-".into(),
    }
}

fn write_map(cli: &Cli, m: &TdMap, prefix: &str) -> anyhow::Result<()> {
    let stem = format!("{prefix}-{}", file_stem(&m.shape_id));
    emit(cli, &format!("{stem}.csv"), map_to_csv(m).as_bytes())?;
    emit(cli, &format!("{stem}.pgm"), &map_to_pgm(m))?;
    Ok(())
}

fn map(cli: &Cli, args: &SceneArgs, shape_id: &str) -> anyhow::Result<()> {
    let p = cli.common.solve_params()?;
    let spec = args.load()?;
    let angles = parse_shape_id(shape_id)?;
    let shape = build_inclusion(&angles, cli.common.w)?;
    let pol = load_or_compute(&shape, &p, &cli.common.exterior(), &cli.common.cache, false)?;
    let f = image(cli, &spec)?;
    let d = state_derivatives(&f, &p, cli.common.margin)?;
    for (prefix, m) in [("td1", eval_td1(&d, &pol, &p)?), ("td2", eval_td2(&d, &pol, &p)?)] {
        write_map(cli, &m, prefix)?;
        let at = m.argmin_point();
        println!(
            "{prefix} {}: min {:.6e} at pixel ({}, {}) = ({}, {}), nearest label {}",
            m.shape_id,
            m.min_value,
            m.argmin.0,
            m.argmin.1,
            at[0],
            at[1],
            describe(at, &spec, &f.grid, cli.common.label_radius)
        );
    }
    Ok(())
}

fn detect(cli: &Cli, args: &SceneArgs, theta_args: &ThetaArgs, top: Option<usize>) -> anyhow::Result<()> {
    let p = cli.common.solve_params()?;
    let spec = args.load()?;
    let theta = generate_theta(theta_args.m, &theta_args.lines, cli.common.w)?;
    let f = image(cli, &spec)?;
    let opts = DetectOptions {
        margin: cli.common.margin,
        exterior: cli.common.exterior(),
        recompute: theta_args.recompute,
    };
    let (maps, pols) = detection_maps(&f, &theta, &p, &cli.common.cache, &opts)?;
    let mut entries = rank_maps(&maps, &pols);
    label_positions(&mut entries, &spec.labels, cli.common.label_radius, &f.grid);
    if let Some(n) = top {
        entries.truncate(n);
    }
    let path = emit(cli, "ranking.csv", ranking_to_csv(&entries).as_bytes())?;
    print_ranking(&entries);
    println!("wrote {}", path.display());
    Ok(())
}

fn print_ranking(entries: &[RankingEntry]) {
    println!("{:>4}  {:>14}  {:<16} {:>10}  label", "rank", "min", "shape", "pixel");
    for e in entries {
        let label = match &e.label {
            Some((name, d)) => format!("{name} ({d:.1} px)"),
            None => "-".into(),
        };
        println!(
            "{:>4}  {:>14.6e}  {:<16} {:>10}  {label}",
            e.rank,
            e.min_value,
            e.shape_id,
            format!("({},{})", e.argmin.0, e.argmin.1)
        );
    }
}
