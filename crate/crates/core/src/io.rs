//! Snapshot output: node CSV, SVG contour plots and the run summary.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::driver::{MeshSnapshot, StageTimings};
use crate::error::{Error, Result};
use crate::geometry::{MeshState, PhysicalDomain, Point, ScalarField, StructuredGrid};
use crate::quality::QualityReport;

pub const CSV_HEADER: [&str; 6] = ["i", "j", "x", "y", "xi", "eta"];

/// One row per node, `j` outer, floats in shortest round-trip form.
pub fn write_mesh_csv<W: Write>(state: &MeshState, out: W) -> Result<()> {
    let g = state.grid();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for j in 0..g.ny {
        for i in 0..g.nx {
            w.write_record([
                i.to_string(),
                j.to_string(),
                format!("{:?}", g.x(i)),
                format!("{:?}", g.y(j)),
                format!("{:?}", state.xi.at(i, j)),
                format!("{:?}", state.eta.at(i, j)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_mesh_csv(state: &MeshState, path: &Path) -> Result<()> {
    write_mesh_csv(state, fs::File::create(path)?)
}

/// Inverse of [`write_mesh_csv`]. The grid is rebuilt from the node
/// coordinates; the time is not stored and is set to zero.
pub fn read_mesh_csv<R: Read>(input: R) -> Result<MeshState> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Snapshot(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows: Vec<(usize, usize, f64, f64, f64, f64)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let bad = |k: usize| Error::Snapshot(format!("bad value in column {} of row {}", CSV_HEADER[k], rows.len() + 1));
        let int = |k: usize| rec[k].parse::<usize>().map_err(|_| bad(k));
        let flt = |k: usize| rec[k].parse::<f64>().map_err(|_| bad(k));
        rows.push((int(0)?, int(1)?, flt(2)?, flt(3)?, flt(4)?, flt(5)?));
    }
    let nx = rows.iter().map(|r| r.0).max().map_or(0, |m| m + 1);
    let ny = rows.iter().map(|r| r.1).max().map_or(0, |m| m + 1);
    if nx * ny != rows.len() || nx < 2 || ny < 2 {
        return Err(Error::Snapshot(format!("{} rows do not form a {nx}x{ny} grid", rows.len())));
    }
    let last = rows[rows.len() - 1];
    let domain = PhysicalDomain::new(rows[0].2, last.2, rows[0].3, last.3)?;
    let grid = StructuredGrid::new(domain, nx, ny)?;
    let mut xi = vec![f64::NAN; nx * ny];
    let mut eta = vec![f64::NAN; nx * ny];
    for &(i, j, _, _, a, b) in &rows {
        let k = grid.index(i, j);
        xi[k] = a;
        eta[k] = b;
    }
    Ok(MeshState {
        t: 0.0,
        xi: ScalarField::new(grid, xi)?,
        eta: ScalarField::new(grid, eta)?,
    })
}

pub fn load_mesh_csv(path: &Path) -> Result<MeshState> {
    read_mesh_csv(fs::File::open(path)?)
}

fn edge_point(grid: &StructuredGrid, a: (usize, usize), b: (usize, usize), fa: f64, fb: f64, level: f64) -> Point {
    let s = if fb == fa { 0.5 } else { ((level - fa) / (fb - fa)).clamp(0.0, 1.0) };
    let (xa, ya) = (grid.x(a.0), grid.y(a.1));
    let (xb, yb) = (grid.x(b.0), grid.y(b.1));
    Point::new(xa + s * (xb - xa), ya + s * (yb - ya))
}

/// Iso-lines of `field` at `level` by marching squares, chained into
/// polylines. Saddle cells are resolved with the cell-centre average.
pub fn contour_polylines(field: &ScalarField, level: f64) -> Vec<Vec<Point>> {
    let g = *field.grid();
    // edge keys: (i, j, 0) joins (i, j)-(i+1, j); (i, j, 1) joins (i, j)-(i, j+1)
    type Key = (usize, usize, u8);
    let mut segments: Vec<(Key, Key)> = Vec::new();
    let mut points: HashMap<Key, Point> = HashMap::new();
    let mut point_of = |k: Key| -> Key {
        points.entry(k).or_insert_with(|| {
            let (a, b) = if k.2 == 0 { ((k.0, k.1), (k.0 + 1, k.1)) } else { ((k.0, k.1), (k.0, k.1 + 1)) };
            edge_point(&g, a, b, field.at(a.0, a.1), field.at(b.0, b.1), level)
        });
        k
    };
    for j in 0..g.ny - 1 {
        for i in 0..g.nx - 1 {
            let f = [field.at(i, j), field.at(i + 1, j), field.at(i + 1, j + 1), field.at(i, j + 1)];
            let above = f.map(|v| v >= level);
            let case = above.iter().enumerate().fold(0u8, |c, (k, &a)| c | (u8::from(a) << k));
            // edges: 0 bottom, 1 right, 2 top, 3 left
            let keys: [Key; 4] = [(i, j, 0), (i + 1, j, 1), (i, j + 1, 0), (i, j, 1)];
            let pairs: &[(usize, usize)] = match case {
                0 | 15 => &[],
                1 | 14 => &[(3, 0)],
                2 | 13 => &[(0, 1)],
                3 | 12 => &[(3, 1)],
                4 | 11 => &[(1, 2)],
                6 | 9 => &[(0, 2)],
                7 | 8 => &[(3, 2)],
                5 | 10 => {
                    let centre_above = f.iter().sum::<f64>() / 4.0 >= level;
                    if (case == 5) == centre_above {
                        &[(3, 2), (0, 1)]
                    } else {
                        &[(3, 0), (1, 2)]
                    }
                }
                _ => unreachable!(),
            };
            for &(a, b) in pairs {
                segments.push((point_of(keys[a]), point_of(keys[b])));
            }
        }
    }

    let mut adjacency: HashMap<Key, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        adjacency.entry(a).or_default().push(s);
        adjacency.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let walk = |start: Key, used: &mut Vec<bool>, chain: &mut Vec<Key>| {
        let mut at = start;
        while let Some(&s) = adjacency[&at].iter().find(|&&s| !used[s]) {
            used[s] = true;
            let (a, b) = segments[s];
            at = if a == at { b } else { a };
            chain.push(at);
        }
    };
    // open chains first, starting from keys with a single segment
    let mut starts: Vec<Key> = adjacency.iter().filter(|(_, v)| v.len() == 1).map(|(k, _)| *k).collect();
    starts.sort_unstable();
    starts.extend(segments.iter().map(|seg| seg.0));
    for start in starts {
        if adjacency[&start].iter().all(|&s| used[s]) {
            continue;
        }
        let mut chain = vec![start];
        walk(start, &mut used, &mut chain);
        lines.push(chain.iter().map(|k| points[k]).collect());
    }
    lines
}

#[derive(Clone, Debug)]
pub struct SvgStyle {
    pub size_px: f64,
    pub margin_px: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle { size_px: 640.0, margin_px: 20.0 }
    }
}

/// Physical mesh lines as contours of `xi` and `eta` at the levels
/// `q / (nx - 1)` and `q / (ny - 1)`, with interfaces and stochastic points
/// overlaid. Levels 0 and 1 coincide with the domain edges and are drawn as
/// such.
pub fn render_svg(snapshot: &MeshSnapshot, style: &SvgStyle) -> String {
    let state = &snapshot.state;
    let g = *state.grid();
    let d = g.domain;
    let scale = (style.size_px - 2.0 * style.margin_px) / d.width().max(d.height());
    let w = d.width() * scale + 2.0 * style.margin_px;
    let h = d.height() * scale + 2.0 * style.margin_px;
    let px = |p: Point| (style.margin_px + (p.x - d.x_l) * scale, style.margin_px + (d.y_u - p.y) * scale);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#);
    let _ = writeln!(s, r#"<title>t = {:.4}, step {}, seed {}</title>"#, snapshot.t, snapshot.step, snapshot.seed);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let mut polyline = |pts: &[Point], class: &str, stroke: &str, width: f64| {
        let coords: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="{class}" points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
            coords.join(" ")
        );
    };
    let (bl, br, tr, tl) = (
        Point::new(d.x_l, d.y_l),
        Point::new(d.x_r, d.y_l),
        Point::new(d.x_r, d.y_u),
        Point::new(d.x_l, d.y_u),
    );
    for (field, n, class, low, high) in [
        (&state.xi, g.nx, "xi", [bl, tl], [br, tr]),
        (&state.eta, g.ny, "eta", [bl, br], [tl, tr]),
    ] {
        polyline(&low, class, "black", 1.5);
        for q in 1..n - 1 {
            for line in contour_polylines(field, q as f64 / (n - 1) as f64) {
                polyline(&line, class, "#1f4e79", 0.6);
            }
        }
        polyline(&high, class, "black", 1.5);
    }
    for &i in &snapshot.interface_columns {
        polyline(&[Point::new(g.x(i), d.y_l), Point::new(g.x(i), d.y_u)], "interface", "#c0392b", 2.0);
    }
    for &j in &snapshot.interface_rows {
        polyline(&[Point::new(d.x_l, g.y(j)), Point::new(d.x_r, g.y(j))], "interface", "#c0392b", 2.0);
    }
    for &(i, j) in &snapshot.stochastic_points {
        let (x, y) = px(Point::new(g.x(i), g.y(j)));
        let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="#e67e22" stroke="black" stroke-width="0.5"/>"##);
    }
    s.push_str("</svg>\n");
    s
}

/// Largest distance of an interior `xi` (or `eta`) contour from the straight
/// line it follows on the uniform mesh, measured along `x` (or `y`).
pub fn max_contour_deflection(state: &MeshState) -> f64 {
    let g = *state.grid();
    let d = g.domain;
    let mut worst = 0.0f64;
    for q in 1..g.nx - 1 {
        let c = q as f64 / (g.nx - 1) as f64;
        for line in contour_polylines(&state.xi, c) {
            for p in line {
                worst = worst.max((p.x - (d.x_l + c * d.width())).abs());
            }
        }
    }
    for q in 1..g.ny - 1 {
        let c = q as f64 / (g.ny - 1) as f64;
        for line in contour_polylines(&state.eta, c) {
            for p in line {
                worst = worst.max((p.y - (d.y_l + c * d.height())).abs());
            }
        }
    }
    worst
}

pub fn save_svg(snapshot: &MeshSnapshot, path: &Path) -> Result<()> {
    fs::write(path, render_svg(snapshot, &SvgStyle::default()))?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SnapshotSummary {
    pub t: f64,
    pub step: u64,
    pub quality: QualityReport,
    pub stochastic_points: usize,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_seconds: f64,
    pub max_std_error: f64,
    pub timings: StageTimings,
    pub snapshots: Vec<SnapshotSummary>,
}

pub fn save_summary(summary: &RunSummary, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::Snapshot(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}
