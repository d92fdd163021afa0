//! End-to-end acceptance checks. Runs without the libtest harness so that each
//! criterion prints exactly one PASS/FAIL line; the process exits non-zero if
//! any criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use tdvertex::detect::{detection_maps, rank_maps, state_derivatives};
use tdvertex::exterior::{build_graded_grid, solve_corrector_pair};
use tdvertex::fem::l2_error;
use tdvertex::inclusion::build_inclusion;
use tdvertex::io::{map_to_csv, ranking_to_csv};
use tdvertex::polarization::{load_or_compute, precompute_shape};
use tdvertex::scene::image_grid;
use tdvertex::tdmap::{smooth_test_image, FiniteEpsOptions};
use tdvertex::*;

const F1: [f64; 4] = [15.0, 10.0, 5.0, 0.0];
const F2: [f64; 4] = [10.0, 15.0, 5.0, 0.0];
const F3: [f64; 7] = [15.0, 5.0, 10.0, 30.0, 20.0, 25.0, 0.0];
const F4: [f64; 7] = [10.0, 5.0, 15.0, 30.0, 20.0, 0.0, 25.0];
const RADIUS_PX: f64 = 3.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn cache_dir() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-polarization")
}

fn image() -> Grid2D {
    image_grid(100, 1.0).unwrap()
}

fn within(t: Duration, limit_s: u64) -> bool {
    t.as_secs_f64() < limit_s as f64
}

/// Distance in pixels from a physical image point to a named scene vertex.
fn pixel_distance(scene: &SceneSpec, name: &str, position: Point) -> f64 {
    let g = image();
    let q = g.normalize(position);
    let v = scene.vertex(name).unwrap();
    ((q[0] - v[0]).powi(2) + (q[1] - v[1]).powi(2)).sqrt() * (g.nx() - 1) as f64
}

fn disk_oracle() -> Outcome {
    let t = Instant::now();
    let p = SolveParams::default();
    let pol = precompute_shape(&InclusionShape::disk(64), &p, &ExteriorParams::default()).unwrap();
    let c = (p.lambda_out - p.lambda_in) / (p.lambda_in + p.lambda_out);
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for k in 0..2 {
            let target = if i == k { c } else { 0.0 };
            worst = worst.max((pol.p1[i][k] - target).abs() / c);
        }
    }
    let x_zero = pol.x.iter().flatten().all(|v| *v == 0.0);
    let p2 = pol.p2_max_abs();
    let el = t.elapsed();
    outcome(
        worst <= 0.05 && x_zero && p2 < 0.02 && within(el, 60),
        format!("P1 worst rel dev {worst:.4}, X zero {x_zero}, |P2|max {p2:.2e}, {:.1}s", el.as_secs_f64()),
    )
}

fn manufactured_convergence() -> Outcome {
    let t = Instant::now();
    let p = SolveParams::default();
    let exact = |x: f64, y: f64| (PI * x).cos() * (PI * y).cos();
    let errs: Vec<f64> = [50, 100, 200]
        .iter()
        .map(|&n| {
            let g = Grid2D::unit_square(n).unwrap();
            let f = ScalarField::from_fn(&g, |x, y| (1.0 + 2.0 * PI * PI * p.alpha * p.lambda_out) * exact(x, y));
            let u = solve_state(&f, &p, &CoefficientField::uniform(&g, p.lambda_out), &g).unwrap();
            l2_error(&u, exact)
        })
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let el = t.elapsed();
    outcome(
        orders.iter().all(|o| *o >= 1.9) && within(el, 30),
        format!("L2 errors {}, orders {orders:.3?}, {:.1}s", sci(&errs), el.as_secs_f64()),
    )
}

fn finite_eps() -> Outcome {
    let t = Instant::now();
    let p = SolveParams::default();
    let shape = build_inclusion(&[0.0, 90.0], DEFAULT_WIDTH).unwrap();
    let pol = load_or_compute(&shape, &p, &ExteriorParams::default(), &cache_dir(), false).unwrap();
    let r = finite_eps_check(&smooth_test_image, &shape, &pol, [0.45, 0.55], &p, &FiniteEpsOptions::default()).unwrap();
    let gap = r.final_td1_relative_gap();
    let el = t.elapsed();
    outcome(
        r.is_monotone() && gap < 0.15 && within(el, 300),
        format!(
            "dJ gaps {}, d2J gaps {}, final rel dJ gap {:.3}, {:.1}s",
            sci(&r.td1_gaps()),
            sci(&r.td2_gaps()),
            gap,
            el.as_secs_f64()
        ),
    )
}

fn find<'a>(entries: &'a [RankingEntry], id: &str) -> Option<&'a RankingEntry> {
    entries.iter().find(|e| e.shape_id == id)
}

fn table_rank_one(ranking: &[RankingEntry], elapsed: Duration) -> Outcome {
    let scene = builtin_scene(BuiltinScene::Cube, &F1).unwrap();
    let top = &ranking[0];
    let d_a = pixel_distance(&scene, "A", top.position);
    let mut ok = top.shape_id == "w[0,90]" && d_a <= RADIUS_PX;
    let mut detail = format!("rank 1 {} at {:.1}px from A", top.shape_id, d_a);
    for (id, vertex) in [("w[0,45,270]", "B"), ("w[45,90,180]", "G")] {
        match find(ranking, id) {
            Some(e) => {
                let d = pixel_distance(&scene, vertex, e.position);
                ok &= e.rank <= 15 && d <= RADIUS_PX;
                detail += &format!("; {id} rank {} at {d:.1}px from {vertex}", e.rank);
            }
            None => {
                ok = false;
                detail += &format!("; {id} missing");
            }
        }
    }
    outcome(ok && within(elapsed, 600), format!("{detail}, {:.1}s", elapsed.as_secs_f64()))
}

fn vertex_localizations() -> Outcome {
    let p = SolveParams::default();
    let cases: [(BuiltinScene, &[f64], &[f64], &str); 5] = [
        (BuiltinScene::Cube, &F2, &[0.0, 225.0], "C"),
        (BuiltinScene::Cube, &F2, &[180.0, 225.0, 270.0], "D"),
        (BuiltinScene::OverlappingCubes, &F3, &[0.0, 90.0, 180.0], "T1"),
        (BuiltinScene::OverlappingCubes, &F3, &[0.0, 180.0, 270.0], "T3"),
        (BuiltinScene::OverlappingCubes, &F4, &[0.0, 90.0, 180.0], "T2"),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    let mut slowest: f64 = 0.0;
    for (which, f, angles, vertex) in cases {
        let shape = build_inclusion(angles, DEFAULT_WIDTH).unwrap();
        let pol = load_or_compute(&shape, &p, &ExteriorParams::default(), &cache_dir(), false).unwrap();
        let t = Instant::now();
        let scene = builtin_scene(which, f).unwrap();
        let img = rasterize(&scene, &image()).unwrap();
        let d = state_derivatives(&img, &p, 3).unwrap();
        let map = eval_td2(&d, &pol, &p).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let dist = pixel_distance(&scene, vertex, map.argmin_point());
        ok &= dist <= RADIUS_PX;
        parts.push(format!("{} at {dist:.1}px from {vertex}", shape.id));
    }
    outcome(ok && slowest < 120.0, format!("{}; slowest map {slowest:.2}s", parts.join(", ")))
}

fn ranking_csv(theta: &ShapeSet, f: &[f64], threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let img = rasterize(&builtin_scene(BuiltinScene::Cube, f).unwrap(), &image()).unwrap();
        let (maps, pols) = detection_maps(&img, theta, &SolveParams::default(), &cache_dir(), &DetectOptions::default()).unwrap();
        let mut csv = ranking_to_csv(&rank_maps(&maps, &pols));
        csv += &map_to_csv(&maps[0]);
        csv
    })
}

fn property_suite(theta: &ShapeSet, ranking: &[RankingEntry]) -> Outcome {
    let t = Instant::now();
    let p = SolveParams::default();
    let ext = ExteriorParams::default();
    let mut ok = true;
    let mut parts = Vec::new();

    // energy identity of the corrector solve
    let grid = build_graded_grid(&ext).unwrap();
    let shape = build_inclusion(&[0.0, 90.0, 225.0], DEFAULT_WIDTH).unwrap();
    let pair = solve_corrector_pair(&grid, &shape, &p).unwrap();
    let rel = (1..=2)
        .map(|k| (pair.energy(k, &p) - pair.load_work(k, &p)).abs() / pair.load_work(k, &p).abs())
        .fold(0.0, f64::max);
    ok &= rel <= 1e-6;
    parts.push(format!("energy rel {rel:.1e}"));

    // symmetry nulls
    let mut worst_p2: f64 = 0.0;
    for angles in [vec![0.0, 180.0], vec![0.0, 90.0, 180.0, 270.0], vec![45.0, 135.0, 225.0, 315.0]] {
        let s = build_inclusion(&angles, DEFAULT_WIDTH).unwrap();
        let pol = load_or_compute(&s, &p, &ext, &cache_dir(), false).unwrap();
        ok &= pol.x.iter().flatten().all(|v| *v == 0.0);
        worst_p2 = worst_p2.max(pol.p2_max_abs());
    }
    ok &= worst_p2 < 0.02;
    parts.push(format!("symmetric |P2|max {worst_p2:.1e}"));

    // first-order map of the disk is non-positive
    let disk = load_or_compute(&InclusionShape::disk(64), &p, &ext, &cache_dir(), false).unwrap();
    let img = rasterize(&builtin_scene(BuiltinScene::Cube, &F1).unwrap(), &image()).unwrap();
    let td1 = eval_td1(&state_derivatives(&img, &p, 3).unwrap(), &disk, &p).unwrap();
    let td1_max = td1.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ok &= td1_max <= 0.0;
    parts.push(format!("disk TD1 max {td1_max:.1e}"));

    // intensity scaling keeps order and positions
    let scaled: Vec<f64> = F1.iter().map(|v| 3.0 * v).collect();
    let img = rasterize(&builtin_scene(BuiltinScene::Cube, &scaled).unwrap(), &image()).unwrap();
    let (maps, pols) = detection_maps(&img, theta, &p, &cache_dir(), &DetectOptions::default()).unwrap();
    let rescaled = rank_maps(&maps, &pols);
    let same = rescaled.len() == ranking.len()
        && rescaled.iter().zip(ranking).all(|(a, b)| a.shape_id == b.shape_id && a.argmin == b.argmin);
    ok &= same;
    parts.push(format!("scaling invariant {same}"));

    // determinism across runs and thread counts
    let a = ranking_csv(theta, &F1, 1);
    let b = ranking_csv(theta, &F1, 1);
    let c = ranking_csv(theta, &F1, 4);
    let identical = a == b && a == c;
    ok &= identical;
    parts.push(format!("byte-identical {identical}"));

    let el = t.elapsed();
    outcome(ok && within(el, 180), format!("{}, {:.1}s", parts.join(", "), el.as_secs_f64()))
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn report(n: usize, name: &str, o: &Outcome) -> bool {
    println!("criterion {n} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn main() {
    // `cargo test -- --list` and filters come through here as well
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut all = true;
    all &= report(1, "disk polarization oracle", &disk_oracle());
    all &= report(2, "manufactured convergence", &manufactured_convergence());
    all &= report(3, "finite-size expansion", &finite_eps());

    let t = Instant::now();
    let theta = generate_theta(8, &[2, 3], DEFAULT_WIDTH).unwrap();
    let img = rasterize(&builtin_scene(BuiltinScene::Cube, &F1).unwrap(), &image()).unwrap();
    let ranking = run_detection(&img, &theta, &SolveParams::default(), &cache_dir(), &DetectOptions::default()).unwrap();
    all &= report(4, "cube ranking", &table_rank_one(&ranking, t.elapsed()));

    all &= report(5, "vertex localizations", &vertex_localizations());
    all &= report(6, "property suite", &property_suite(&theta, &ranking));

    if !all {
        std::process::exit(1);
    }
}
