//! CSV formats: fields (`x,y,u`), nodal curves (`curve_id,x,y`) and fit
//! trajectories (`x,t_1..t_N,F,H`).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{Curve, Field2D, Grid2D};
use crate::fitspec::FitTrajectory;

/// Largest ratio of grid nodes to rows accepted when reading a masked field.
const MAX_FILL: usize = 4;

/// Writes the active nodes row by row with round-trip float formatting.
pub fn write_field_csv<W: Write>(f: &Field2D, mut out: W) -> Result<()> {
    writeln!(out, "x,y,u")?;
    let grid = f.grid();
    for (k, (&v, &m)) in f.samples().iter().zip(f.mask()).enumerate() {
        if m {
            let (x, y) = grid.point(k);
            writeln!(out, "{x},{y},{v}")?;
        }
    }
    Ok(())
}

/// Reads a field written by [`write_field_csv`]. Nodes absent from the file
/// are inactive. The grid spacing is recovered bit-exactly when some spacing
/// reproduces every coordinate.
pub fn read_field_csv<R: BufRead>(reader: R) -> Result<Field2D> {
    let rows = read_rows(reader, &["x", "y", "u"])?;
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, msg: "field table has no rows".into() });
    }
    let mut xs: Vec<f64> = rows.iter().map(|r| r.1[0]).collect();
    let mut ys: Vec<f64> = rows.iter().map(|r| r.1[1]).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let h = recover_spacing(&xs, &ys)?;
    let (x0, y0) = (xs[0], ys[0]);
    let cells_x = ((xs[xs.len() - 1] - x0) / h).round();
    let cells_y = ((ys[ys.len() - 1] - y0) / h).round();
    let limit = MAX_FILL.saturating_mul(rows.len()).max(64) as f64;
    if (cells_x + 1.0) * (cells_y + 1.0) > limit {
        return Err(Error::Parse { line: 1, msg: format!("{cells_x}x{cells_y} cell grid is too sparse for {} rows", rows.len()) });
    }
    let (nx, ny) = (cells_x as usize + 1, cells_y as usize + 1);
    let grid = Grid2D::new((x0, y0), h, nx, ny).map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
    let mut samples = vec![0.0; grid.len()];
    let mut mask = vec![false; grid.len()];
    for (line, [x, y, u]) in rows {
        let i = ((x - x0) / h).round();
        let j = ((y - y0) / h).round();
        let (i, j) = (i as usize, j as usize);
        if i >= nx || j >= ny || (grid.x(i) - x).abs() > 1e-6 * h || (grid.y(j) - y).abs() > 1e-6 * h {
            return Err(Error::Parse { line, msg: format!("point ({x}, {y}) is off the grid") });
        }
        let k = grid.index(i, j);
        if mask[k] {
            return Err(Error::Parse { line, msg: format!("duplicate node ({x}, {y})") });
        }
        mask[k] = true;
        samples[k] = u;
    }
    Field2D::with_mask(grid, samples, mask)
}

pub fn read_field_path(path: &Path) -> Result<Field2D> {
    read_field_csv(BufReader::new(File::open(path)?))
}

/// Smallest spacing consistent with both coordinate sets, nudged by a few
/// ulps until `origin + i·h` reproduces every coordinate exactly.
fn recover_spacing(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let gap = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let rough = gap(xs).min(gap(ys));
    if !(rough.is_finite() && rough > 0.0) {
        return Err(Error::Parse { line: 1, msg: "cannot infer grid spacing from fewer than two columns and rows".into() });
    }
    let exact_for = |v: &[f64], h: f64| {
        v.iter().all(|&c| {
            let i = ((c - v[0]) / h).round();
            v[0] + i * h == c
        })
    };
    let span = |v: &[f64]| {
        let cells = ((v[v.len() - 1] - v[0]) / rough).round();
        if cells >= 1.0 {
            Some((v[v.len() - 1] - v[0]) / cells)
        } else {
            None
        }
    };
    let mut candidates: Vec<f64> = [span(xs), span(ys), Some(rough)].into_iter().flatten().collect();
    candidates.dedup();
    for &c in &candidates {
        let (mut lo, mut hi) = (c, c);
        for _ in 0..16 {
            for h in [lo, hi] {
                if exact_for(xs, h) && exact_for(ys, h) {
                    return Ok(h);
                }
            }
            lo = lo.next_down();
            hi = hi.next_up();
        }
    }
    let h = candidates[0];
    let uniform = |v: &[f64]| {
        v.iter().all(|&c| {
            let i = ((c - v[0]) / h).round();
            (v[0] + i * h - c).abs() <= 1e-6 * h
        })
    };
    if uniform(xs) && uniform(ys) {
        Ok(h)
    } else {
        Err(Error::Parse { line: 1, msg: "coordinates do not lie on a uniform isotropic grid".into() })
    }
}

/// Parses a headed numeric CSV with exactly `header.len()` columns.
fn read_rows<R: BufRead, const N: usize>(reader: R, header: &[&str; N]) -> Result<Vec<(usize, [f64; N])>> {
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if !seen_header {
            let cols: Vec<&str> = t.split(',').map(str::trim).collect();
            if cols != header.as_slice() {
                return Err(Error::Parse { line: line_no, msg: format!("expected header `{}`, found `{t}`", header.join(",")) });
            }
            seen_header = true;
            continue;
        }
        let mut vals = [0.0; N];
        let mut parts = t.split(',');
        for v in vals.iter_mut() {
            let s = parts.next().ok_or_else(|| Error::Parse { line: line_no, msg: "missing column".into() })?;
            *v = s
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line: line_no, msg: format!("not a finite number: `{}`", s.trim()) })?;
        }
        if parts.next().is_some() {
            return Err(Error::Parse { line: line_no, msg: "too many columns".into() });
        }
        rows.push((line_no, vals));
    }
    if !seen_header {
        return Err(Error::Parse { line: 1, msg: format!("missing header `{}`", header.join(",")) });
    }
    Ok(rows)
}

pub fn write_curves_csv<W: Write>(curves: &[Curve], mut out: W) -> Result<()> {
    writeln!(out, "curve_id,x,y")?;
    for (id, c) in curves.iter().enumerate() {
        for (x, y) in &c.points {
            writeln!(out, "{id},{x},{y}")?;
        }
    }
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(traj: &FitTrajectory, mut out: W) -> Result<()> {
    let names: Vec<String> = (1..=traj.n).map(|i| format!("t_{i}")).collect();
    writeln!(out, "x,{},F,H", names.join(","))?;
    for c in 0..traj.xs.len() {
        let ts: Vec<String> = traj.ts[c].iter().map(|t| t.to_string()).collect();
        writeln!(out, "{},{},{},{}", traj.xs[c], ts.join(","), traj.misfit[c], traj.hamiltonian[c])?;
    }
    Ok(())
}

/// Creates `path` and hands a buffered writer to `body`.
pub fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}
