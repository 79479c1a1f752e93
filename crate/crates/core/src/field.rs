//! Uniform isotropic grids, masked scalar fields, finite-difference operators
//! and zero-contour extraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::Potential;

pub const MIN_DIM: usize = 8;

/// Node `(i, j)` sits at `(x0 + i h, y0 + j h)`; storage is row-major with
/// rows of constant `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    origin: (f64, f64),
    h: f64,
    nx: usize,
    ny: usize,
}

impl Grid2D {
    pub fn new(origin: (f64, f64), h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Argument(format!("grid spacing must be positive, got {h}")));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(Error::Argument("grid origin must be finite".into()));
        }
        if nx < MIN_DIM || ny < MIN_DIM {
            return Err(Error::Argument(format!("grid dims must be at least {MIN_DIM}, got {nx}x{ny}")));
        }
        if nx.checked_mul(ny).is_none_or(|n| n > u32::MAX as usize) {
            return Err(Error::Argument("grid too large".into()));
        }
        Ok(Self { origin, h, nx, ny })
    }

    /// Grid covering `[cx - w/2, cx + w/2] x [cy - ht/2, cy + ht/2]`; the
    /// extents are rounded to whole multiples of `h`.
    pub fn centered(center: (f64, f64), extent: (f64, f64), h: f64) -> Result<Self> {
        if !(extent.0 > 0.0 && extent.1 > 0.0) {
            return Err(Error::Argument("grid extent must be positive".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Argument(format!("grid spacing must be positive, got {h}")));
        }
        let cells_x = (extent.0 / h).round() as usize;
        let cells_y = (extent.1 / h).round() as usize;
        let origin = (
            center.0 - 0.5 * cells_x as f64 * h,
            center.1 - 0.5 * cells_y as f64 * h,
        );
        Self::new(origin, h, cells_x + 1, cells_y + 1)
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn extent(&self) -> (f64, f64) {
        ((self.nx - 1) as f64 * self.h, (self.ny - 1) as f64 * self.h)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.origin.0 + i as f64 * self.h
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.origin.1 + j as f64 * self.h
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn point(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.coords(k);
        (self.x(i), self.y(j))
    }

    /// Bounding box `(xmin, xmax, ymin, ymax)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (self.x(0), self.x(self.nx - 1), self.y(0), self.y(self.ny - 1))
    }

    /// Nearest node to `(x, y)`, if inside the bounding box.
    pub fn nearest(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fi = ((x - self.origin.0) / self.h).round();
        let fj = ((y - self.origin.1) / self.h).round();
        if fi < 0.0 || fj < 0.0 || fi > (self.nx - 1) as f64 || fj > (self.ny - 1) as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    pub fn is_frontier(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    grid: Grid2D,
    samples: Vec<f64>,
    mask: Vec<bool>,
}

impl Field2D {
    /// Field on the full rectangle.
    pub fn new(grid: Grid2D, samples: Vec<f64>) -> Result<Self> {
        let mask = vec![true; grid.len()];
        Self::with_mask(grid, samples, mask)
    }

    /// Checks sizes, finiteness at active points and that the active set is
    /// a single 4-connected component.
    pub fn with_mask(grid: Grid2D, samples: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if samples.len() != grid.len() || mask.len() != grid.len() {
            return Err(Error::Argument(format!(
                "expected {} samples and mask entries, got {} and {}",
                grid.len(),
                samples.len(),
                mask.len()
            )));
        }
        if let Some(k) = (0..grid.len()).find(|&k| mask[k] && !samples[k].is_finite()) {
            let (x, y) = grid.point(k);
            return Err(Error::Numerical(format!("non-finite sample at ({x}, {y})")));
        }
        let components = count_components(&grid, &mask);
        if components != 1 {
            return Err(Error::Argument(format!(
                "active region must be one connected component, found {components}"
            )));
        }
        Ok(Self { grid, samples, mask })
    }

    pub(crate) fn from_parts_unchecked(grid: Grid2D, samples: Vec<f64>, mask: Vec<bool>) -> Self {
        debug_assert_eq!(samples.len(), grid.len());
        debug_assert_eq!(mask.len(), grid.len());
        Self { grid, samples, mask }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let samples = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.point(k);
                f(x, y)
            })
            .collect();
        Self::new(grid, samples)
    }

    pub fn constant(grid: Grid2D, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()])
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.samples[self.grid.index(i, j)]
    }

    #[inline]
    pub fn is_active(&self, i: usize, j: usize) -> bool {
        self.mask[self.grid.index(i, j)]
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Same grid and mask, new values.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let samples = self
            .samples
            .iter()
            .zip(&self.mask)
            .map(|(&v, &m)| if m { f(v) } else { 0.0 })
            .collect();
        Self::from_parts_unchecked(self.grid, samples, self.mask.clone())
    }

    /// Active points whose four neighbours are also active.
    pub fn interior_mask(&self) -> Vec<bool> {
        let (nx, ny) = self.grid.dims();
        let mut out = vec![false; self.grid.len()];
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let k = self.grid.index(i, j);
                out[k] = self.mask[k]
                    && self.mask[k - 1]
                    && self.mask[k + 1]
                    && self.mask[k - nx]
                    && self.mask[k + nx];
            }
        }
        out
    }

    /// Largest `|u|` over active points.
    pub fn max_abs(&self) -> f64 {
        self.active_values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn active_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().zip(&self.mask).filter(|(_, &m)| m).map(|(&v, _)| v)
    }

    /// Bilinear interpolation; `None` outside the grid or when a corner of
    /// the containing cell is inactive.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let (nx, ny) = self.grid.dims();
        let (x0, y0) = self.grid.origin();
        let h = self.grid.spacing();
        let fx = (x - x0) / h;
        let fy = (y - y0) / h;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= (nx - 1) as f64 && fy <= (ny - 1) as f64) {
            return None;
        }
        let i = (fx.floor() as usize).min(nx - 2);
        let j = (fy.floor() as usize).min(ny - 2);
        let (a, b) = (fx - i as f64, fy - j as f64);
        let k = self.grid.index(i, j);
        let corners = [k, k + 1, k + nx, k + nx + 1];
        if corners.iter().any(|&c| !self.mask[c]) {
            return None;
        }
        let s = &self.samples;
        Some(
            (1.0 - b) * ((1.0 - a) * s[k] + a * s[k + 1])
                + b * ((1.0 - a) * s[k + nx] + a * s[k + nx + 1]),
        )
    }

    pub fn max_abs_difference(&self, other: &Field2D) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Argument("fields live on different grids".into()));
        }
        Ok((0..self.grid.len())
            .filter(|&k| self.mask[k] && other.mask[k])
            .fold(0.0, |m, k| m.max((self.samples[k] - other.samples[k]).abs())))
    }
}

fn count_components(grid: &Grid2D, mask: &[bool]) -> usize {
    let (nx, ny) = grid.dims();
    let mut seen = vec![false; mask.len()];
    let mut stack = Vec::new();
    let mut count = 0;
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(k) = stack.pop() {
            let (i, j) = grid.coords(k);
            let mut visit = |n: usize| {
                if mask[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            };
            if i > 0 {
                visit(k - 1);
            }
            if i + 1 < nx {
                visit(k + 1);
            }
            if j > 0 {
                visit(k - nx);
            }
            if j + 1 < ny {
                visit(k + nx);
            }
        }
    }
    count
}

/// Five-point Laplacian at interior active points.
pub fn laplacian(f: &Field2D) -> Field2D {
    let grid = f.grid;
    let nx = grid.nx;
    let inv = 1.0 / (grid.h * grid.h);
    let mask = f.interior_mask();
    let s = &f.samples;
    let samples = (0..grid.len())
        .map(|k| {
            if mask[k] {
                (s[k - 1] + s[k + 1] + s[k - nx] + s[k + nx] - 4.0 * s[k]) * inv
            } else {
                0.0
            }
        })
        .collect();
    Field2D::from_parts_unchecked(grid, samples, mask)
}

/// Central differences at interior active points.
pub fn gradient(f: &Field2D) -> (Field2D, Field2D) {
    let grid = f.grid;
    let nx = grid.nx;
    let inv = 0.5 / grid.h;
    let mask = f.interior_mask();
    let s = &f.samples;
    let mut gx = vec![0.0; grid.len()];
    let mut gy = vec![0.0; grid.len()];
    for k in 0..grid.len() {
        if mask[k] {
            gx[k] = (s[k + 1] - s[k - 1]) * inv;
            gy[k] = (s[k + nx] - s[k - nx]) * inv;
        }
    }
    (
        Field2D::from_parts_unchecked(grid, gx, mask.clone()),
        Field2D::from_parts_unchecked(grid, gy, mask),
    )
}

/// `½|∇f|² + W(f)` at interior active points.
pub fn energy_density(f: &Field2D, p: &Potential) -> Field2D {
    let (gx, gy) = gradient(f);
    let mask = gx.mask.clone();
    let samples = (0..f.grid.len())
        .map(|k| {
            if mask[k] {
                0.5 * (gx.samples[k] * gx.samples[k] + gy.samples[k] * gy.samples[k]) + p.w(f.samples[k])
            } else {
                0.0
            }
        })
        .collect();
    Field2D::from_parts_unchecked(f.grid, samples, mask)
}

/// Polyline approximation of a component of a level set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
    /// `(x, y)` samples of `y = f(x)` at the grid columns the curve crosses,
    /// present when every column is crossed at most once.
    pub graph: Option<Vec<(f64, f64)>>,
}

impl Curve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_graph(&self) -> bool {
        self.graph.is_some()
    }

    /// Arc length of the polyline.
    pub fn length(&self) -> f64 {
        let mut l: f64 = self.points.windows(2).map(|w| dist(w[0], w[1])).sum();
        if self.closed && self.points.len() > 1 {
            l += dist(self.points[0], *self.points.last().unwrap());
        }
        l
    }

    pub fn mean_y(&self) -> f64 {
        self.points.iter().map(|p| p.1).sum::<f64>() / self.points.len().max(1) as f64
    }

    /// Linear interpolation of the graph representation at `x`.
    pub fn graph_at(&self, x: f64) -> Option<f64> {
        let g = self.graph.as_ref()?;
        if g.is_empty() || x < g[0].0 || x > g[g.len() - 1].0 {
            return None;
        }
        let k = g.partition_point(|p| p.0 <= x);
        if k == 0 {
            return Some(g[0].1);
        }
        if k == g.len() {
            return Some(g[k - 1].1);
        }
        let (a, b) = (g[k - 1], g[k]);
        Some(a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0))
    }

    /// Centred slopes of the graph representation, at interior columns.
    pub fn graph_slopes(&self) -> Option<Vec<(f64, f64)>> {
        let g = self.graph.as_ref()?;
        Some(
            g.windows(3)
                .filter(|w| w[2].0 > w[0].0)
                .map(|w| (w[1].0, (w[2].1 - w[0].1) / (w[2].0 - w[0].0)))
                .collect(),
        )
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Edge identifiers: horizontal edge `(i,j)-(i+1,j)` is `2k`, vertical edge
/// `(i,j)-(i,j+1)` is `2k+1`, where `k` is the index of `(i,j)`.
fn crossing(f: &Field2D, a: usize, b: usize) -> Option<(f64, f64)> {
    let (va, vb) = (f.samples[a], f.samples[b]);
    if (va > 0.0) == (vb > 0.0) {
        return None;
    }
    let t = va / (va - vb);
    let (xa, ya) = f.grid.point(a);
    let (xb, yb) = f.grid.point(b);
    Some((xa + t * (xb - xa), ya + t * (yb - ya)))
}

/// Marching squares on cells with four active corners. Saddle cells pair
/// edges according to the sign of the corner average.
pub fn zero_contours(f: &Field2D) -> Vec<Curve> {
    let grid = f.grid;
    let (nx, ny) = grid.dims();
    let n_edges = 2 * grid.len();
    let mut point: Vec<Option<(f64, f64)>> = vec![None; n_edges];
    let mut links: Vec<[u32; 2]> = vec![[u32::MAX; 2]; n_edges];
    let link = |links: &mut Vec<[u32; 2]>, a: usize, b: usize| {
        for (e, o) in [(a, b), (b, a)] {
            let slot = &mut links[e];
            if slot[0] == u32::MAX {
                slot[0] = o as u32;
            } else {
                slot[1] = o as u32;
            }
        }
    };
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let k00 = grid.index(i, j);
            let (k10, k01, k11) = (k00 + 1, k00 + nx, k00 + nx + 1);
            if !(f.mask[k00] && f.mask[k10] && f.mask[k01] && f.mask[k11]) {
                continue;
            }
            // Edges in counter-clockwise order: bottom, right, top, left.
            let edges = [2 * k00, 2 * k10 + 1, 2 * k01, 2 * k00 + 1];
            let ends = [(k00, k10), (k10, k11), (k01, k11), (k00, k01)];
            let mut hit = [false; 4];
            for s in 0..4 {
                let e = edges[s];
                if point[e].is_none() {
                    point[e] = crossing(f, ends[s].0, ends[s].1);
                }
                hit[s] = point[e].is_some();
            }
            match hit.iter().filter(|&&h| h).count() {
                2 => {
                    let mut it = (0..4).filter(|&s| hit[s]);
                    let (a, b) = (it.next().unwrap(), it.next().unwrap());
                    link(&mut links, edges[a], edges[b]);
                }
                4 => {
                    let s = &f.samples;
                    let centre = 0.25 * (s[k00] + s[k10] + s[k01] + s[k11]);
                    // With a positive centre the positive corners join through the
                    // middle, which cuts off the negative corners.
                    let bl_positive = s[k00] > 0.0;
                    if (centre > 0.0) == bl_positive {
                        // Cut off the bottom-right and top-left corners.
                        link(&mut links, edges[0], edges[1]);
                        link(&mut links, edges[2], edges[3]);
                    } else {
                        // Cut off the bottom-left and top-right corners.
                        link(&mut links, edges[3], edges[0]);
                        link(&mut links, edges[1], edges[2]);
                    }
                }
                _ => {}
            }
        }
    }

    let degree = |e: usize| links[e].iter().filter(|&&l| l != u32::MAX).count();
    let mut used = vec![false; n_edges];
    let mut curves = Vec::new();
    let walk = |start: usize, used: &mut Vec<bool>| -> Vec<usize> {
        let mut path = vec![start];
        used[start] = true;
        let mut cur = start;
        loop {
            let next = links[cur]
                .iter()
                .copied()
                .find(|&l| l != u32::MAX && !used[l as usize]);
            match next {
                Some(l) => {
                    cur = l as usize;
                    used[cur] = true;
                    path.push(cur);
                }
                None => return path,
            }
        }
    };
    for e in 0..n_edges {
        if point[e].is_some() && !used[e] && degree(e) <= 1 {
            let path = walk(e, &mut used);
            curves.push((path, false));
        }
    }
    for e in 0..n_edges {
        if point[e].is_some() && !used[e] {
            let path = walk(e, &mut used);
            curves.push((path, true));
        }
    }

    let mut out: Vec<Curve> = curves
        .into_iter()
        .filter(|(path, _)| path.len() >= 2)
        .map(|(path, closed)| {
            let mut points: Vec<(f64, f64)> = path.iter().map(|&e| point[e].unwrap()).collect();
            if !closed && points[0].0 > points[points.len() - 1].0 {
                points.reverse();
            }
            let graph = graph_representation(&grid, &path, &point);
            Curve { points, closed, graph }
        })
        .collect();
    out.sort_by(|a, b| {
        a.mean_y()
            .total_cmp(&b.mean_y())
            .then_with(|| a.points[0].0.total_cmp(&b.points[0].0))
    });
    out
}

fn graph_representation(grid: &Grid2D, path: &[usize], point: &[Option<(f64, f64)>]) -> Option<Vec<(f64, f64)>> {
    let mut cols: Vec<(usize, f64)> = path
        .iter()
        .filter(|&&e| e % 2 == 1)
        .map(|&e| (grid.coords(e / 2).0, point[e].unwrap().1))
        .collect();
    cols.sort_by_key(|c| c.0);
    if cols.windows(2).any(|w| w[0].0 == w[1].0) {
        return None;
    }
    Some(cols.into_iter().map(|(i, y)| (grid.x(i), y)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Profile1D;

    fn square(h: f64, half: f64) -> Grid2D {
        Grid2D::centered((0.0, 0.0), (2.0 * half, 2.0 * half), h).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid2D::new((0.0, 0.0), 0.0, 10, 10).is_err());
        assert!(Grid2D::new((0.0, 0.0), 0.1, 7, 10).is_err());
        let g = Grid2D::new((1.0, -2.0), 0.5, 9, 11).unwrap();
        assert_eq!(g.extent(), (4.0, 5.0));
        assert_eq!(g.point(g.index(2, 3)), (2.0, -0.5));
        let c = square(0.1, 1.0);
        assert_eq!(c.dims(), (21, 21));
        assert_eq!(c.nearest(0.0, 0.0), Some((10, 10)));
    }

    #[test]
    fn mask_must_be_connected() {
        let g = Grid2D::new((0.0, 0.0), 1.0, 8, 8).unwrap();
        let mut mask = vec![true; 64];
        for j in 0..8 {
            mask[g.index(4, j)] = false;
        }
        assert!(Field2D::with_mask(g, vec![0.0; 64], mask).is_err());
        let mut v = vec![0.0; 64];
        v[3] = f64::NAN;
        assert!(Field2D::new(g, v).is_err());
    }

    #[test]
    fn laplacian_constant_and_quadratic() {
        let g = square(0.1, 1.0);
        let c = Field2D::constant(g, 3.5).unwrap();
        assert!(laplacian(&c).max_abs() == 0.0);
        let q = Field2D::from_fn(g, |x, y| x * x + y * y).unwrap();
        let l = laplacian(&q);
        for v in l.active_values() {
            assert!((v - 4.0).abs() < 1e-10);
        }
        assert!(!l.is_active(0, 5));
        assert!(l.is_active(1, 5));
    }

    #[test]
    fn laplacian_of_profile_is_dw() {
        let p = Profile1D::solve(&Potential::quartic(), 8.0, 1e-10).unwrap();
        let mut errs = Vec::new();
        for h in [0.1, 0.05] {
            let g = Grid2D::centered((0.0, 0.0), (1.0, 8.0), h).unwrap();
            let f = Field2D::from_fn(g, |_, y| p.g(y)).unwrap();
            let l = laplacian(&f);
            let mut e: f64 = 0.0;
            for k in 0..g.len() {
                if l.mask()[k] {
                    e = e.max((l.samples()[k] - p.potential().dw(f.samples()[k])).abs());
                }
            }
            errs.push(e);
        }
        assert!(errs[0] < 1e-2);
        let ratio = errs[0] / errs[1];
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn laplacian_order_of_accuracy() {
        let err = |h: f64| {
            let g = square(h, 1.5);
            let f = Field2D::from_fn(g, |x, y| x.sin() * y.cos()).unwrap();
            let l = laplacian(&f);
            (0..g.len())
                .filter(|&k| l.mask()[k])
                .map(|k| {
                    let (x, y) = g.point(k);
                    (l.samples()[k] + 2.0 * x.sin() * y.cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        let r = err(0.1) / err(0.05);
        assert!((r - 4.0).abs() <= 0.4, "ratio {r}");
    }

    #[test]
    fn gradient_examples() {
        let g = square(0.1, 1.0);
        let f = Field2D::from_fn(g, |x, y| 3.0 * x - 2.0 * y).unwrap();
        let (gx, gy) = gradient(&f);
        assert!(gx.active_values().all(|v| (v - 3.0).abs() < 1e-12));
        assert!(gy.active_values().all(|v| (v + 2.0).abs() < 1e-12));
        let z = Field2D::constant(g, 0.0).unwrap();
        let (zx, zy) = gradient(&z);
        assert_eq!(zx.max_abs() + zy.max_abs(), 0.0);

        let p = Profile1D::solve(&Potential::quartic(), 8.0, 1e-10).unwrap();
        let t = Field2D::from_fn(g, |_, y| p.g(y)).unwrap();
        let (tx, ty) = gradient(&t);
        assert_eq!(tx.max_abs(), 0.0);
        for k in 0..g.len() {
            if ty.mask()[k] {
                let y = g.point(k).1;
                // Truncation bound h²/6 · max|g'''| with max|g'''| = 1/√2.
                assert!((ty.samples()[k] - p.g_prime(y)).abs() < 0.01 / 6.0 * 0.75);
            }
        }
    }

    #[test]
    fn energy_density_equipartition_and_integral() {
        let q = Potential::quartic();
        let p = Profile1D::solve(&q, 10.0, 1e-10).unwrap();
        let one = Field2D::constant(square(0.1, 1.0), 1.0).unwrap();
        assert_eq!(energy_density(&one, &q).max_abs(), 0.0);

        let h = 0.02;
        let g = Grid2D::new((0.0, -8.0), h, 51, 801).unwrap();
        let f = Field2D::from_fn(g, |_, y| p.g(y)).unwrap();
        let e = energy_density(&f, &q);
        for k in 0..g.len() {
            if e.mask()[k] {
                let y = g.point(k).1;
                assert!((e.samples()[k] - p.g_prime(y).powi(2)).abs() < 1e-4);
            }
        }
        // One interior column integrated over y (trapezoid), unit width in x.
        let i = 25;
        let col: Vec<f64> = (1..g.dims().1 - 1).map(|j| e.at(i, j)).collect();
        let integral = h * (col.iter().sum::<f64>() - 0.5 * (col[0] + col[col.len() - 1]));
        assert!((integral - p.sigma0()).abs() < 1e-3, "{integral}");
    }

    #[test]
    fn contour_of_line() {
        let g = Grid2D::centered((0.0, 0.0), (2.0, 2.0), 0.13).unwrap();
        let f = Field2D::from_fn(g, |_, y| y - 0.5).unwrap();
        let c = zero_contours(&f);
        assert_eq!(c.len(), 1);
        assert!(!c[0].closed);
        assert!(c[0].points.iter().all(|p| (p.1 - 0.5).abs() < g.spacing() / 100.0));
        let gr = c[0].graph.as_ref().unwrap();
        assert_eq!(gr.len(), g.dims().0);
        assert!(c[0].points.windows(2).all(|w| w[0].0 <= w[1].0));
    }

    #[test]
    fn contour_two_layers_and_empty() {
        let p = Profile1D::solve(&Potential::quartic(), 8.0, 1e-10).unwrap();
        let g = Grid2D::centered((0.0, 0.0), (6.0, 12.0), 0.1).unwrap();
        let f = Field2D::from_fn(g, |_, y| p.multilayer(&[-2.0, 2.0], y).unwrap()).unwrap();
        let c = zero_contours(&f);
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|c| c.is_graph()));
        assert!((c[0].mean_y() + 2.0).abs() < 1e-3);
        assert!((c[1].mean_y() - 2.0).abs() < 1e-3);

        let e = Field2D::from_fn(g, |x, y| x * x + y * y + 1.0).unwrap();
        assert!(zero_contours(&e).is_empty());
    }

    #[test]
    fn circle_is_closed() {
        let g = square(0.05, 2.0);
        let f = Field2D::from_fn(g, |x, y| x * x + y * y - 1.0).unwrap();
        let c = zero_contours(&f);
        assert_eq!(c.len(), 1);
        assert!(c[0].closed);
        assert!(c[0].graph.is_none());
        assert!((c[0].length() - std::f64::consts::TAU).abs() < 1e-2);
        assert!(c[0].points.iter().all(|p| (p.0.hypot(p.1) - 1.0).abs() < 2e-3));
    }

    #[test]
    fn bilinear_sampling() {
        let g = square(0.1, 1.0);
        let f = Field2D::from_fn(g, |x, y| 2.0 * x - y + 0.5 * x * y).unwrap();
        let v = f.sample(0.123, -0.377).unwrap();
        assert!((v - (0.246 + 0.377 + 0.5 * 0.123 * -0.377)).abs() < 1e-3);
        assert!(f.sample(1.5, 0.0).is_none());
        assert_eq!(f.sample(g.x(3), g.y(4)).unwrap(), f.at(3, 4));
    }
}
