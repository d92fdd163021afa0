//! CSV and 8-bit PGM export of fields, maps and rankings.
//!
//! Floats are written with 17 significant digits so that every value
//! round-trips exactly.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::detect::RankingEntry;
use crate::grid::ScalarField;
use crate::tdmap::TdMap;
use crate::Result;

/// Round-trip float formatting.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_matrix(rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut s = String::new();
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt_f64).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

/// One line per grid row `j` (bottom to top), one column per `i`.
pub fn field_to_csv(field: &ScalarField) -> String {
    let nx = field.grid.nx();
    write_matrix((0..field.grid.ny()).map(|j| field.values[j * nx..(j + 1) * nx].to_vec()))
}

/// The unmasked block of a map, one line per row.
pub fn map_to_csv(map: &TdMap) -> String {
    let w = map.width();
    write_matrix((0..map.height()).map(|r| map.values[r * w..(r + 1) * w].to_vec()))
}

/// Binary P5 image; `rows` are given bottom to top and written top to bottom.
fn pgm(width: usize, height: usize, rows: impl Fn(usize) -> Vec<u8>) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    for r in (0..height).rev() {
        out.extend(rows(r));
    }
    out
}

fn scale(v: f64, lo: f64, hi: f64) -> u8 {
    if hi > lo {
        (255.0 * (v - lo) / (hi - lo)).round().clamp(0.0, 255.0) as u8
    } else {
        0
    }
}

/// Min-max scaled grayscale image of a nodal field.
pub fn field_to_pgm(field: &ScalarField) -> Vec<u8> {
    let (lo, hi) = field.min_max();
    let nx = field.grid.nx();
    pgm(nx, field.grid.ny(), |j| {
        field.values[j * nx..(j + 1) * nx].iter().map(|v| scale(*v, lo, hi)).collect()
    })
}

/// Map image with positive values clipped to 0, so the minimum is black and
/// everything non-negative is white.
pub fn map_to_pgm(map: &TdMap) -> Vec<u8> {
    let w = map.width();
    let lo = map.min_value.min(0.0);
    pgm(w, map.height(), |r| {
        map.values[r * w..(r + 1) * w].iter().map(|v| scale(v.min(0.0), lo, 0.0)).collect()
    })
}

pub const RANKING_HEADER: &str = "rank,min_value,angles,argmin_i,argmin_j,x,y,label,label_distance_px";

/// Ranking table; angles are `;`-separated, a missing label is `-`.
pub fn ranking_to_csv(entries: &[RankingEntry]) -> String {
    let mut s = String::from(RANKING_HEADER);
    s.push('\n');
    for e in entries {
        let angles: Vec<String> = e.angles.iter().map(|a| format!("{a}")).collect();
        let (label, dist) = match &e.label {
            Some((name, d)) => (name.clone(), fmt_f64(*d)),
            None => ("-".to_string(), String::new()),
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            e.rank,
            fmt_f64(e.min_value),
            angles.join(";"),
            e.argmin.0,
            e.argmin.1,
            fmt_f64(e.position[0]),
            fmt_f64(e.position[1]),
            label,
            dist
        );
    }
    s
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
