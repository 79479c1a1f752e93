//! The stress potential `U` with Hessian
//! `[[ux² - uy² + 2W, 2ux uy], [2ux uy, uy² - ux² + 2W]]`, recovered by line
//! integration, and the gradient jumps of its level sets.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{self, Field2D, Grid2D};
use crate::potentials::Potential;

/// Tolerance factor on the path-consistency defect, in units of `h² · diameter`.
pub const STATIONARITY_FACTOR: f64 = 100.0;

#[derive(Debug, Clone)]
pub struct StressPotential {
    pub u: Field2D,
    pub grad_x: Field2D,
    pub grad_y: Field2D,
    pub uxx: Field2D,
    pub uxy: Field2D,
    pub uyy: Field2D,
    /// Largest difference between the gradients integrated along the
    /// rows-then-columns and columns-then-rows paths.
    pub consistency_defect: f64,
    /// Largest plaquette loop integral of the Hessian rows divided by `h²`.
    pub max_curl: f64,
    pub origin: (usize, usize),
}

/// Integrates the Hessian from the node nearest the origin.
pub fn build_potential(f: &Field2D, p: &Potential) -> Result<StressPotential> {
    let grid = *f.grid();
    if f.mask().iter().any(|&m| !m) {
        return Err(Error::Geometry("stress potential needs a full rectangular field".into()));
    }
    let (nx, ny) = grid.dims();
    let h = grid.spacing();
    let (i0, j0) = grid
        .nearest(0.0, 0.0)
        .filter(|&(i, j)| !grid.is_frontier(i, j))
        .ok_or_else(|| Error::Geometry("the origin must be an interior grid point".into()))?;
    let (gx, gy) = field::gradient(f);
    let mask = gx.mask().to_vec();
    let n = grid.len();
    let mut hxx = vec![0.0; n];
    let mut hxy = vec![0.0; n];
    let mut hyy = vec![0.0; n];
    for k in 0..n {
        if mask[k] {
            let (ux, uy) = (gx.samples()[k], gy.samples()[k]);
            let w2 = 2.0 * p.w(f.samples()[k]);
            let d = ux * ux - uy * uy;
            hxx[k] = d + w2;
            hxy[k] = 2.0 * ux * uy;
            hyy[k] = -d + w2;
        }
    }
    let idx = |i: usize, j: usize| grid.index(i, j);
    let (ilo, ihi, jlo, jhi) = (1, nx - 2, 1, ny - 2);

    // Rows then columns.
    let integrate_rc = |row: &[f64], col: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; n];
        for i in (i0 + 1)..=ihi {
            g[idx(i, j0)] = g[idx(i - 1, j0)] + 0.5 * h * (row[idx(i - 1, j0)] + row[idx(i, j0)]);
        }
        for i in (ilo..i0).rev() {
            g[idx(i, j0)] = g[idx(i + 1, j0)] - 0.5 * h * (row[idx(i + 1, j0)] + row[idx(i, j0)]);
        }
        for i in ilo..=ihi {
            for j in (j0 + 1)..=jhi {
                g[idx(i, j)] = g[idx(i, j - 1)] + 0.5 * h * (col[idx(i, j - 1)] + col[idx(i, j)]);
            }
            for j in (jlo..j0).rev() {
                g[idx(i, j)] = g[idx(i, j + 1)] - 0.5 * h * (col[idx(i, j + 1)] + col[idx(i, j)]);
            }
        }
        g
    };
    // Columns then rows.
    let integrate_cr = |row: &[f64], col: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; n];
        for j in (j0 + 1)..=jhi {
            g[idx(i0, j)] = g[idx(i0, j - 1)] + 0.5 * h * (col[idx(i0, j - 1)] + col[idx(i0, j)]);
        }
        for j in (jlo..j0).rev() {
            g[idx(i0, j)] = g[idx(i0, j + 1)] - 0.5 * h * (col[idx(i0, j + 1)] + col[idx(i0, j)]);
        }
        for j in jlo..=jhi {
            for i in (i0 + 1)..=ihi {
                g[idx(i, j)] = g[idx(i - 1, j)] + 0.5 * h * (row[idx(i - 1, j)] + row[idx(i, j)]);
            }
            for i in (ilo..i0).rev() {
                g[idx(i, j)] = g[idx(i + 1, j)] - 0.5 * h * (row[idx(i + 1, j)] + row[idx(i, j)]);
            }
        }
        g
    };
    let mut px = integrate_rc(&hxx, &hxy);
    let mut py = integrate_rc(&hxy, &hyy);
    let qx = integrate_cr(&hxx, &hxy);
    let qy = integrate_cr(&hxy, &hyy);
    let consistency_defect = (0..n)
        .filter(|&k| mask[k])
        .map(|k| (px[k] - qx[k]).hypot(py[k] - qy[k]))
        .fold(0.0, f64::max);

    let mut max_curl: f64 = 0.0;
    for j in jlo..jhi {
        for i in ilo..ihi {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            let loop_of = |r: &[f64], s: &[f64]| {
                0.5 * h * ((r[a] + r[b]) + (s[b] + s[c]) - (r[d] + r[c]) - (s[a] + s[d]))
            };
            let l = loop_of(&hxx, &hxy).abs().max(loop_of(&hxy, &hyy).abs());
            max_curl = max_curl.max(l / (h * h));
        }
    }

    let (ex, ey) = grid.extent();
    let diameter = ex.hypot(ey);
    if consistency_defect > STATIONARITY_FACTOR * h * h * diameter {
        return Err(Error::Stationarity {
            defect: consistency_defect,
            limit: STATIONARITY_FACTOR * h * h * diameter,
        });
    }

    let mut u = integrate_rc(&px, &py);
    let c = (
        (u[idx(i0 + 1, j0)] - u[idx(i0 - 1, j0)]) / (2.0 * h),
        (u[idx(i0, j0 + 1)] - u[idx(i0, j0 - 1)]) / (2.0 * h),
    );
    let (x0, y0) = (grid.x(i0), grid.y(j0));
    let u0 = u[idx(i0, j0)];
    for k in 0..n {
        if mask[k] {
            let (x, y) = grid.point(k);
            u[k] -= u0 + c.0 * (x - x0) + c.1 * (y - y0);
            px[k] -= c.0;
            py[k] -= c.1;
        } else {
            u[k] = 0.0;
            px[k] = 0.0;
            py[k] = 0.0;
        }
    }
    let mk = |v: Vec<f64>| Field2D::from_parts_unchecked(grid, v, mask.clone());
    Ok(StressPotential {
        u: mk(u),
        grad_x: mk(px),
        grad_y: mk(py),
        uxx: mk(hxx),
        uxy: mk(hxy),
        uyy: mk(hyy),
        consistency_defect,
        max_curl,
        origin: (i0, j0),
    })
}

impl StressPotential {
    pub fn grid(&self) -> &Grid2D {
        self.u.grid()
    }

    /// Largest `|ΔU - 4W(u)|` with the five-point Laplacian of `U`.
    pub fn trace_defect(&self, f: &Field2D, p: &Potential) -> f64 {
        let l = field::laplacian(&self.u);
        (0..self.grid().len())
            .filter(|&k| l.mask()[k])
            .map(|k| (l.samples()[k] - 4.0 * p.w(f.samples()[k])).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest Hessian eigenvalue over the grid.
    pub fn min_hessian_eigenvalue(&self) -> f64 {
        (0..self.grid().len())
            .filter(|&k| self.uxx.mask()[k])
            .map(|k| {
                let (a, b, d) = (self.uxx.samples()[k], self.uxy.samples()[k], self.uyy.samples()[k]);
                0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `|Uxx|`.
    pub fn max_abs_uxx(&self) -> f64 {
        self.uxx.max_abs()
    }
}

/// Largest `U / (|x| + |y|)` on the boundary of the integration region.
pub fn linear_growth_check(sp: &StressPotential) -> f64 {
    linear_growth_on_box(sp, 1.0)
}

/// As [`linear_growth_check`] on the boundary of the region scaled by `scale`
/// about the origin node.
pub fn linear_growth_on_box(sp: &StressPotential, scale: f64) -> f64 {
    let grid = sp.grid();
    let (nx, ny) = grid.dims();
    let (i0, j0) = sp.origin;
    let s = scale.clamp(0.0, 1.0);
    let lo_i = i0 - ((i0 - 1) as f64 * s).round() as usize;
    let hi_i = i0 + ((nx - 2 - i0) as f64 * s).round() as usize;
    let lo_j = j0 - ((j0 - 1) as f64 * s).round() as usize;
    let hi_j = j0 + ((ny - 2 - j0) as f64 * s).round() as usize;
    let mut best = f64::NEG_INFINITY;
    let mut visit = |i: usize, j: usize| {
        let (x, y) = (grid.x(i), grid.y(j));
        let d = x.abs() + y.abs();
        if d > 0.0 {
            best = best.max(sp.u.at(i, j) / d);
        }
    };
    for i in lo_i..=hi_i {
        visit(i, lo_j);
        visit(i, hi_j);
    }
    for j in lo_j..=hi_j {
        visit(lo_i, j);
        visit(hi_i, j);
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolygonVertex {
    pub vertex_angle_deg: f64,
    pub direction: [f64; 2],
    pub jump: [f64; 2],
    pub jump_over_2sigma0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolygonResult {
    pub level: f64,
    /// Gradient plateaus of `U` along the level set, ordered by angle.
    pub plateaus: Vec<[f64; 2]>,
    pub vertices: Vec<PolygonVertex>,
    pub hull: Vec<(f64, f64)>,
    /// Largest distance of a level-set point from the convex hull boundary.
    pub hull_defect: f64,
    /// The level set reaches the domain boundary.
    pub clipped: bool,
    /// `U < level` everywhere; no level set.
    pub whole_domain: bool,
}

/// Level set `{U = level}`, its convex hull, gradient plateaus and the jumps
/// between consecutive plateaus. Errors when the level set is clipped.
pub fn blowdown_polygon(sp: &StressPotential, level: f64, sigma0: f64) -> Result<PolygonResult> {
    let r = polygon_impl(sp, level, sigma0)?;
    if r.clipped {
        return Err(Error::EnlargeDomain);
    }
    Ok(r)
}

/// As [`blowdown_polygon`], accepting level sets clipped by the domain
/// (slabs of layer solutions).
pub fn blowdown_polygon_clipped(sp: &StressPotential, level: f64, sigma0: f64) -> Result<PolygonResult> {
    polygon_impl(sp, level, sigma0)
}

fn polygon_impl(sp: &StressPotential, level: f64, sigma0: f64) -> Result<PolygonResult> {
    if !(level > 0.0 && sigma0 > 0.0) {
        return Err(Error::Argument("level and sigma0 must be positive".into()));
    }
    let shifted = sp.u.map(|v| v - level);
    let curves = field::zero_contours(&shifted);
    if curves.is_empty() {
        if shifted.active_values().all(|v| v < 0.0) {
            return Ok(PolygonResult {
                level,
                plateaus: Vec::new(),
                vertices: Vec::new(),
                hull: Vec::new(),
                hull_defect: 0.0,
                clipped: false,
                whole_domain: true,
            });
        }
        return Err(Error::EnlargeDomain);
    }
    let clipped = curves.iter().any(|c| !c.closed);
    let mut runs = Vec::new();
    for c in &curves {
        let samples: Vec<Sample> = c
            .points
            .iter()
            .filter_map(|&q| {
                Some(Sample { pos: q, grad: [sp.grad_x.sample(q.0, q.1)?, sp.grad_y.sample(q.0, q.1)?] })
            })
            .collect();
        runs.extend(flat_runs(&samples, c.closed, sp.grid().spacing()));
    }
    runs.sort_by(|a, b| polar(a.pos).total_cmp(&polar(b.pos)));
    let runs = merge_similar(runs, true);
    let plateaus: Vec<[f64; 2]> = runs.iter().map(|r| r.grad).collect();
    let m = runs.len();
    let (ex, ey) = sp.grid().extent();
    let diameter = ex.hypot(ey);
    let vertices = if m < 2 {
        Vec::new()
    } else {
        (0..m)
            .map(|k| {
                let (a, b) = (runs[k].grad, runs[(k + 1) % m].grad);
                let det = a[0] * b[1] - a[1] * b[0];
                let norm = a[0].hypot(a[1]) * b[0].hypot(b[1]);
                // Intersection of a·X = level and b·X = level, unless it lies
                // far outside the domain.
                let corner = (det.abs() > 1e-6 * norm)
                    .then(|| (level * (b[1] - a[1]) / det, level * (a[0] - b[0]) / det))
                    .filter(|&(x, y)| x.hypot(y) <= 2.0 * diameter);
                let direction = if let Some((x, y)) = corner {
                    let r = x.hypot(y);
                    [x / r, y / r]
                } else {
                    let (ta, mut tb) = (polar((a[0], a[1])), polar((b[0], b[1])));
                    if tb <= ta {
                        tb += TAU;
                    }
                    let t = 0.5 * (ta + tb);
                    [t.cos(), t.sin()]
                };
                vertex(direction, a, b, sigma0)
            })
            .collect()
    };
    let points: Vec<(f64, f64)> = curves.iter().flat_map(|c| c.points.iter().copied()).collect();
    let hull = convex_hull(&points);
    let hull_defect = if clipped {
        0.0
    } else {
        points.iter().map(|&q| distance_to_polygon(q, &hull)).fold(0.0, f64::max)
    };
    Ok(PolygonResult { level, plateaus, vertices, hull, hull_defect, clipped, whole_domain: false })
}

/// Gradient jumps of `U` along the circle of radius `radius` about the
/// origin; each vertex direction is the polar angle of the transition.
pub fn circle_jumps(sp: &StressPotential, radius: f64, sigma0: f64) -> Result<Vec<PolygonVertex>> {
    if !(radius > 0.0 && sigma0 > 0.0) {
        return Err(Error::Argument("radius and sigma0 must be positive".into()));
    }
    let h = sp.grid().spacing();
    let count = ((TAU * radius / (0.25 * h)).ceil() as usize).max(720);
    let mut samples = Vec::with_capacity(count);
    for k in 0..count {
        let t = k as f64 * TAU / count as f64;
        let (x, y) = (radius * t.cos(), radius * t.sin());
        match (sp.grad_x.sample(x, y), sp.grad_y.sample(x, y)) {
            (Some(gx), Some(gy)) => samples.push(Sample { pos: (x, y), grad: [gx, gy] }),
            _ => return Err(Error::Geometry(format!("circle of radius {radius} leaves the domain"))),
        }
    }
    let runs = merge_similar(flat_runs(&samples, true, h), true);
    let m = runs.len();
    if m < 2 {
        return Ok(Vec::new());
    }
    Ok((0..m)
        .map(|k| {
            let (a, b) = (&runs[k], &runs[(k + 1) % m]);
            let (ta, mut tb) = (polar(a.last), polar(b.first));
            if tb < ta {
                tb += TAU;
            }
            let t = 0.5 * (ta + tb);
            vertex([t.cos(), t.sin()], a.grad, b.grad, sigma0)
        })
        .collect())
}

fn vertex(direction: [f64; 2], a: [f64; 2], b: [f64; 2], sigma0: f64) -> PolygonVertex {
    let jump = [b[0] - a[0], b[1] - a[1]];
    PolygonVertex {
        vertex_angle_deg: polar((direction[0], direction[1])).to_degrees() % 360.0,
        direction,
        jump,
        jump_over_2sigma0: jump[0].hypot(jump[1]) / (2.0 * sigma0),
    }
}

fn polar(p: (f64, f64)) -> f64 {
    p.1.atan2(p.0).rem_euclid(TAU)
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    pos: (f64, f64),
    grad: [f64; 2],
}

/// A stretch of samples along which `∇U` is nearly constant.
#[derive(Debug, Clone, Copy)]
struct Run {
    grad: [f64; 2],
    pos: (f64, f64),
    first: (f64, f64),
    last: (f64, f64),
    length: f64,
}

/// Relative rate of change of `∇U` per unit length below which a sample
/// counts as flat.
const FLAT_RATE: f64 = 0.01;
/// Relative difference below which consecutive plateaus are merged.
const SAME_PLATEAU: f64 = 0.02;

fn flat_runs(samples: &[Sample], closed: bool, h: f64) -> Vec<Run> {
    let m = samples.len();
    if m < 3 {
        return Vec::new();
    }
    let scale = samples.iter().map(|s| s.grad[0].hypot(s.grad[1])).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Vec::new();
    }
    let at = |k: isize| -> Option<&Sample> {
        if closed {
            Some(&samples[k.rem_euclid(m as isize) as usize])
        } else if k >= 0 && (k as usize) < m {
            Some(&samples[k as usize])
        } else {
            None
        }
    };
    let flat: Vec<bool> = (0..m as isize)
        .map(|k| {
            let a = at(k - 1).unwrap_or(&samples[k as usize]);
            let b = at(k + 1).unwrap_or(&samples[k as usize]);
            let ds = dist(a.pos, b.pos);
            ds > 0.0 && (b.grad[0] - a.grad[0]).hypot(b.grad[1] - a.grad[1]) / ds < FLAT_RATE * scale
        })
        .collect();
    // For closed curves start the scan at a non-flat sample.
    let start = if closed { (0..m).find(|&k| !flat[k]) } else { Some(0) };
    let Some(start) = start else {
        return Vec::new();
    };
    let mut runs = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let flush = |cur: &mut Vec<usize>, runs: &mut Vec<Run>| {
        if cur.len() >= 2 {
            let mut length = 0.0;
            let (mut gx, mut gy, mut px, mut py, mut w) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (t, &k) in cur.iter().enumerate() {
                let ds = if t + 1 < cur.len() { dist(samples[k].pos, samples[cur[t + 1]].pos) } else { 0.0 };
                length += ds;
                gx += samples[k].grad[0];
                gy += samples[k].grad[1];
                px += samples[k].pos.0;
                py += samples[k].pos.1;
                w += 1.0;
            }
            if length >= 5.0 * h {
                runs.push(Run {
                    grad: [gx / w, gy / w],
                    pos: (px / w, py / w),
                    first: samples[cur[0]].pos,
                    last: samples[*cur.last().unwrap()].pos,
                    length,
                });
            }
        }
        cur.clear();
    };
    for t in 0..m {
        let k = (start + t) % m;
        if flat[k] {
            current.push(k);
        } else {
            flush(&mut current, &mut runs);
        }
    }
    flush(&mut current, &mut runs);
    runs
}

/// Merges consecutive runs with nearly equal gradients, cyclically when
/// `cyclic` is set.
fn merge_similar(runs: Vec<Run>, cyclic: bool) -> Vec<Run> {
    let scale = runs.iter().map(|r| r.grad[0].hypot(r.grad[1])).fold(0.0, f64::max);
    let same = |a: &Run, b: &Run| (a.grad[0] - b.grad[0]).hypot(a.grad[1] - b.grad[1]) <= SAME_PLATEAU * scale;
    let join = |a: Run, b: Run| {
        let (wa, wb) = (a.length, b.length);
        let w = (wa + wb).max(f64::MIN_POSITIVE);
        Run {
            grad: [(wa * a.grad[0] + wb * b.grad[0]) / w, (wa * a.grad[1] + wb * b.grad[1]) / w],
            pos: ((wa * a.pos.0 + wb * b.pos.0) / w, (wa * a.pos.1 + wb * b.pos.1) / w),
            first: a.first,
            last: b.last,
            length: wa + wb,
        }
    };
    let mut out: Vec<Run> = Vec::new();
    for r in runs {
        match out.last() {
            Some(prev) if same(prev, &r) => {
                let prev = out.pop().unwrap();
                out.push(join(prev, r));
            }
            _ => out.push(r),
        }
    }
    if cyclic && out.len() > 1 && same(&out[out.len() - 1], &out[0]) {
        let last = out.pop().unwrap();
        let first = out.remove(0);
        out.insert(0, join(last, first));
    }
    out
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Andrew's monotone chain; counter-clockwise, no repeated end point.
fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut p: Vec<(f64, f64)> = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let chain = |it: &mut dyn Iterator<Item = (f64, f64)>| {
        let mut c: Vec<(f64, f64)> = Vec::new();
        for q in it {
            while c.len() >= 2 && cross(c[c.len() - 2], c[c.len() - 1], q) <= 0.0 {
                c.pop();
            }
            c.push(q);
        }
        c.pop();
        c
    };
    let mut hull = chain(&mut p.iter().copied());
    hull.extend(chain(&mut p.iter().rev().copied()));
    hull
}

fn distance_to_polygon(q: (f64, f64), poly: &[(f64, f64)]) -> f64 {
    let m = poly.len();
    if m == 0 {
        return 0.0;
    }
    if m == 1 {
        return dist(q, poly[0]);
    }
    (0..m)
        .map(|k| {
            let (a, b) = (poly[k], poly[(k + 1) % m]);
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let l2 = dx * dx + dy * dy;
            let t = if l2 > 0.0 { (((q.0 - a.0) * dx + (q.1 - a.1) * dy) / l2).clamp(0.0, 1.0) } else { 0.0 };
            dist(q, (a.0 + t * dx, a.1 + t * dy))
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Profile1D;

    fn profile() -> Profile1D {
        Profile1D::solve(&Potential::quartic(), 10.0, 1e-10).unwrap()
    }

    #[test]
    fn layer_potential_depends_on_y_only() {
        let q = Potential::quartic();
        let p = profile();
        let g = Grid2D::centered((0.0, 0.0), (4.0, 16.0), 0.05).unwrap();
        let f = Field2D::from_fn(g, |_, y| p.g(y)).unwrap();
        let sp = build_potential(&f, &q).unwrap();
        assert!(sp.max_abs_uxx() < 0.05 * 0.05);
        assert_eq!(sp.uxy.max_abs(), 0.0);
        // U(0, y) = 2 ∫₀^y ∫₀^s g'² against the symmetric trapezoid oracle.
        let (nx, ny) = g.dims();
        let i = nx / 2;
        let j = ny - 10;
        let y = g.y(j);
        let m = 4000;
        let dy = y / m as f64;
        let mut inner = 0.0;
        let mut outer = 0.0;
        let mut prev_inner = 0.0;
        for k in 1..=m {
            let (s0, s1) = ((k - 1) as f64 * dy, k as f64 * dy);
            inner += dy * (p.g_prime(s0).powi(2) + p.g_prime(s1).powi(2));
            outer += 0.5 * dy * (prev_inner + inner);
            prev_inner = inner;
        }
        assert!((sp.u.at(i, j) - outer).abs() < 1e-2, "{} vs {outer}", sp.u.at(i, j));
        let r = linear_growth_check(&sp);
        assert!(r > 0.8 * p.sigma0() && r < p.sigma0() * 1.01, "{r}");
    }

    #[test]
    fn well_gives_zero_potential() {
        let q = Potential::quartic();
        let g = Grid2D::centered((0.0, 0.0), (6.0, 6.0), 0.1).unwrap();
        let one = Field2D::constant(g, 1.0).unwrap();
        let sp = build_potential(&one, &q).unwrap();
        assert_eq!(sp.u.max_abs(), 0.0);
        assert_eq!(linear_growth_check(&sp), 0.0);
        let poly = blowdown_polygon(&sp, 1.0, 1.0).unwrap();
        assert!(poly.whole_domain && poly.vertices.is_empty());
    }

    #[test]
    fn non_solution_is_rejected() {
        let q = Potential::quartic();
        let g = Grid2D::centered((0.0, 0.0), (10.0, 10.0), 0.05).unwrap();
        let f = Field2D::from_fn(g, |x, y| 0.3 * (x + y)).unwrap();
        assert!(matches!(build_potential(&f, &q), Err(Error::Stationarity { .. })));
    }

    #[test]
    fn layer_slab_jump() {
        let q = Potential::quartic();
        let p = profile();
        let g = Grid2D::centered((0.0, 0.0), (10.0, 20.0), 0.05).unwrap();
        let f = Field2D::from_fn(g, |_, y| p.g(y)).unwrap();
        let sp = build_potential(&f, &q).unwrap();
        assert!(matches!(blowdown_polygon(&sp, 4.0, p.sigma0()), Err(Error::EnlargeDomain)));
        let poly = blowdown_polygon_clipped(&sp, 4.0, p.sigma0()).unwrap();
        assert!(poly.clipped);
        assert_eq!(poly.vertices.len(), 2);
        let mut angles: Vec<f64> = poly.vertices.iter().map(|v| v.vertex_angle_deg).collect();
        angles.sort_by(f64::total_cmp);
        assert!(angles[0].abs() < 1e-6 || (angles[1] - 360.0).abs() < 1e-6);
        assert!(angles.iter().any(|a| (a - 180.0).abs() < 1e-6));
        for v in &poly.vertices {
            assert!((v.jump_over_2sigma0 - 1.0).abs() < 0.01, "{}", v.jump_over_2sigma0);
        }
        let cj = circle_jumps(&sp, 4.0, p.sigma0()).unwrap();
        assert_eq!(cj.len(), 2);
        assert!(cj.iter().all(|v| (v.jump_over_2sigma0 - 1.0).abs() < 0.01));
    }

    #[test]
    fn hull_of_square() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5), (0.5, 0.0)];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!((distance_to_polygon((0.5, 0.5), &h) - 0.5).abs() < 1e-15);
    }
}
