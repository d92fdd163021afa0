use std::path::Path;
use std::process::{Command, Output};

const COARSE: [&str; 4] = ["--R", "8", "--h-f", "0.05"];

fn tdvertex(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdvertex"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn scene_renders_a_pgm_with_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdvertex(dir.path(), &["scene", "--scene", "cube", "--f", "15,10,5,0", "--out", "s"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let img = std::fs::read(dir.path().join("s/scene.pgm")).unwrap();
    assert!(img.starts_with(b"P5\n101 101\n255\n"));
    assert_eq!(img.len(), b"P5\n101 101\n255\n".len() + 101 * 101);
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("s/scene.pgm.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["command"]["subcommand"], "scene");
    assert_eq!(meta["config"]["common"]["alpha"], 8.0);
}

#[test]
fn detect_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for (out, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let mut args = vec!["detect", "--scene", "cube", "--f", "15,10,5,0", "--m", "4", "--lines", "2", "--top", "4"];
        args.extend(["--out", out, "--threads", threads]);
        args.extend(COARSE);
        let o = tdvertex(dir.path(), &args);
        assert_eq!(code(&o), 0, "{o:?}");
        outs.push(std::fs::read(dir.path().join(out).join("ranking.csv")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
    let csv = String::from_utf8(outs[0].clone()).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "rank,min_value,angles,argmin_i,argmin_j,x,y,label,label_distance_px");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("1,"));
}

#[test]
fn map_locates_the_lower_junction() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdvertex(
        dir.path(),
        &["map", "--scene", "overlapping_cubes", "--f", "15,5,10,30,20,25,0", "--shape", "w[0,180,270]", "--out", "m"],
    );
    assert_eq!(code(&o), 0, "{o:?}");
    let text = stdout(&o);
    let td2 = text.lines().find(|l| l.starts_with("td2")).unwrap();
    assert!(td2.contains("nearest label T3"), "{text}");
    for name in ["td1-w_0_180_270.csv", "td2-w_0_180_270.csv", "td2-w_0_180_270.pgm", "td2-w_0_180_270.pgm.meta.json"] {
        assert!(dir.path().join("m").join(name).is_file(), "{name}");
    }
}

#[test]
fn stale_cache_needs_recompute() {
    let dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["precompute", "--m", "4", "--lines", "2"];
        args.extend(COARSE);
        args.extend(extra);
        tdvertex(dir.path(), &args)
    };
    assert_eq!(code(&run(&[])), 0);
    let stale = run(&["--rho", "1.3"]);
    assert_eq!(code(&stale), 1);
    assert!(String::from_utf8_lossy(&stale.stderr).contains("stale"));
    assert_eq!(code(&run(&["--rho", "1.3", "--recompute"])), 0);
    assert_eq!(code(&run(&["--rho", "1.3"])), 0);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\"regions\": 3}").unwrap();
    for args in [
        vec!["validate", "--bogus"],
        vec!["frobnicate"],
        vec!["scene", "--scene", "bad.json"],
        vec!["scene", "--scene", "cube"],
        vec!["scene", "--scene", "cube", "--f", "1,2"],
        vec!["map", "--scene", "cube", "--f", "1,2,3,0", "--shape", "w[0,5]"],
        vec!["detect", "--scene", "cube", "--f", "1,2,3,0", "--threads", "0"],
    ] {
        let o = tdvertex(dir.path(), &args);
        assert_eq!(code(&o), 1, "{args:?}: {o:?}");
    }
    assert_eq!(code(&tdvertex(dir.path(), &["--help"])), 0);
}

#[test]
fn solver_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["map", "--scene", "cube", "--f", "15,10,5,0", "--shape", "w[0,90]", "--cg-max-iter", "2"];
    args.extend(COARSE);
    let o = tdvertex(dir.path(), &args);
    assert_eq!(code(&o), 2, "{o:?}");
}

#[test]
fn validate_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdvertex(dir.path(), &["validate"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.contains(": PASS")).count(), 4, "{text}");
}
