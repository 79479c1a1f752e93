//! Dirichlet solves of `Δu = W'(u)` on rectangles: a semi-implicit gradient
//! flow as globalizer followed by damped Newton with sparse LDLᵀ solves.
//!
//! The discrete energy is the trapezoid-weighted sum
//! `Σ_edges w_e ½(u_a - u_b)² + Σ_nodes h² w_n W(u_n)`, whose gradient at an
//! interior node is `h²(-Δ_h u + W'(u))` with the five-point Laplacian.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, Field2D, Grid2D};
use crate::potentials::Potential;
use crate::profile::{check_increasing, window_of, Profile1D};
use crate::sparse::{factor_with_retry, nested_dissection, SparseSym, Symbolic};

const NONE: u32 = u32::MAX;
const ND_LEAF: usize = 64;
/// Tail widths of margin required between a layer and the domain edge.
const TAIL_WIDTHS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayEnd {
    /// Direction of the ray, radians.
    pub angle: f64,
    /// Sign of the sector between this ray and the next one counter-clockwise.
    pub sign: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryKind {
    Layer { t: f64 },
    Multilayer { ts: Vec<f64> },
    Saddle,
    Multiend { ends: Vec<RayEnd> },
}

#[derive(Debug, Clone)]
pub struct BoundarySpec {
    kind: BoundaryKind,
    profile: Profile1D,
    inflow_bump: f64,
    ends: Vec<RayEnd>,
}

impl BoundarySpec {
    pub fn new(kind: BoundaryKind, profile: Profile1D) -> Result<Self> {
        let mut ends = Vec::new();
        match &kind {
            BoundaryKind::Layer { t } if !t.is_finite() => {
                return Err(Error::Config(format!("boundary.t must be finite, got {t}")));
            }
            BoundaryKind::Multilayer { ts } => {
                check_increasing(ts).map_err(|e| Error::Config(format!("boundary.ts: {e}")))?;
            }
            BoundaryKind::Multiend { ends: given } => {
                ends = normalize_ends(given)?;
            }
            _ => {}
        }
        Ok(Self { kind, profile, inflow_bump: 0.0, ends })
    }

    /// Adds `eta (-1)^i exp(-(y - t_i - 1)²)` to the data on the left edge,
    /// for layer and multilayer kinds.
    pub fn with_inflow_bump(mut self, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta.abs() < 0.5) {
            return Err(Error::Config(format!("inflow bump must lie in (-0.5, 0.5), got {eta}")));
        }
        if eta != 0.0 && !matches!(self.kind, BoundaryKind::Layer { .. } | BoundaryKind::Multilayer { .. }) {
            return Err(Error::Config("inflow bump applies to layer and multilayer data only".into()));
        }
        self.inflow_bump = eta;
        Ok(self)
    }

    pub fn kind(&self) -> &BoundaryKind {
        &self.kind
    }

    pub fn profile(&self) -> &Profile1D {
        &self.profile
    }

    pub fn inflow_bump(&self) -> f64 {
        self.inflow_bump
    }

    /// Layer positions for layer kinds.
    pub fn translations(&self) -> Option<Vec<f64>> {
        match &self.kind {
            BoundaryKind::Layer { t } => Some(vec![*t]),
            BoundaryKind::Multilayer { ts } => Some(ts.clone()),
            _ => None,
        }
    }

    /// The ansatz extended to the whole plane.
    pub fn ansatz(&self, x: f64, y: f64) -> f64 {
        let g = &self.profile;
        match &self.kind {
            BoundaryKind::Layer { t } => g.g(y - t),
            BoundaryKind::Multilayer { ts } => {
                let (i, sign) = window_of(ts, y);
                sign * g.g(y - ts[i])
            }
            BoundaryKind::Saddle => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                g.g((x + y) * s) * g.g((y - x) * s)
            }
            BoundaryKind::Multiend { .. } => self.multiend_value(x, y),
        }
    }

    fn multiend_value(&self, x: f64, y: f64) -> f64 {
        let theta = y.atan2(x).rem_euclid(TAU);
        let n = self.ends.len();
        let sector = (0..n).rev().find(|&k| self.ends[k].angle <= theta).unwrap_or(n - 1);
        let d = self
            .ends
            .iter()
            .map(|e| {
                let (c, s) = (e.angle.cos(), e.angle.sin());
                let along = x * c + y * s;
                if along >= 0.0 {
                    (y * c - x * s).abs()
                } else {
                    x.hypot(y)
                }
            })
            .fold(f64::INFINITY, f64::min);
        self.ends[sector].sign * self.profile.g(d)
    }

    fn bump(&self, y: f64) -> f64 {
        if self.inflow_bump == 0.0 {
            return 0.0;
        }
        let ts = self.translations().unwrap_or_default();
        ts.iter()
            .enumerate()
            .map(|(i, t)| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * (-(y - t - 1.0).powi(2)).exp()
            })
            .sum::<f64>()
            * self.inflow_bump
    }

    fn check_grid(&self, grid: &Grid2D) -> Result<()> {
        let [k0, k1] = self.profile.tail_rates();
        let margin = TAIL_WIDTHS / k0.min(k1);
        let (x0, x1, y0, y1) = grid.bounds();
        let inside = |v: f64, lo: f64, hi: f64| v - lo >= margin && hi - v >= margin;
        match &self.kind {
            BoundaryKind::Layer { .. } | BoundaryKind::Multilayer { .. } => {
                for t in self.translations().unwrap() {
                    if !inside(t, y0, y1) {
                        return Err(Error::Config(format!(
                            "layer at y = {t} is closer than {margin:.3} to the domain edge [{y0}, {y1}]"
                        )));
                    }
                }
            }
            BoundaryKind::Saddle | BoundaryKind::Multiend { .. } => {
                if !(inside(0.0, x0, x1) && inside(0.0, y0, y1)) {
                    return Err(Error::Config(format!(
                        "the origin must lie at least {margin:.3} inside the domain"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn normalize_ends(given: &[RayEnd]) -> Result<Vec<RayEnd>> {
    if given.len() < 2 {
        return Err(Error::Config("multiend boundary needs at least two rays".into()));
    }
    let mut ends: Vec<RayEnd> = given
        .iter()
        .map(|e| RayEnd { angle: e.angle.rem_euclid(TAU), sign: e.sign })
        .collect();
    if ends.iter().any(|e| !e.angle.is_finite() || (e.sign != 1.0 && e.sign != -1.0)) {
        return Err(Error::Config("multiend rays need finite angles and signs ±1".into()));
    }
    ends.sort_by(|a, b| a.angle.total_cmp(&b.angle));
    let n = ends.len();
    for k in 0..n {
        let next = &ends[(k + 1) % n];
        let mut gap = next.angle - ends[k].angle;
        if k + 1 == n {
            gap += TAU;
        }
        if gap < 1e-9 {
            return Err(Error::Config("multiend angles must be distinct mod 2π".into()));
        }
        if next.sign == ends[k].sign {
            return Err(Error::Config("multiend sector signs must alternate".into()));
        }
    }
    Ok(ends)
}

/// Dirichlet data on the grid frontier; interior entries are `None`.
pub fn make_boundary(spec: &BoundarySpec, grid: &Grid2D) -> Result<Vec<Option<f64>>> {
    spec.check_grid(grid)?;
    let (nx, ny) = grid.dims();
    let mut out = vec![None; grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            if grid.is_frontier(i, j) {
                let (x, y) = (grid.x(i), grid.y(j));
                // Far tails round to exactly ±1 in floating point.
                let mut v = spec.ansatz(x, y).clamp((-1.0f64).next_up(), 1.0f64.next_down());
                if i == 0 {
                    v += spec.bump(y);
                }
                if !(v > -1.0 && v < 1.0) {
                    return Err(Error::Config(format!("boundary value {v} at ({x}, {y}) outside (-1, 1)")));
                }
                out[grid.index(i, j)] = Some(v);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_newton: usize,
    pub max_flow: usize,
    /// Flow time step; `None` selects `2h²`.
    pub flow_step: Option<f64>,
    pub damping: f64,
    /// Homogeneous Neumann condition on the right edge instead of Dirichlet.
    pub outflow: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_newton: 50, max_flow: 50, flow_step: None, damping: 0.5, outflow: false }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("solver.tol must be positive, got {}", self.tol)));
        }
        if self.max_newton == 0 {
            return Err(Error::Config("solver.max_newton must be positive".into()));
        }
        if let Some(s) = self.flow_step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("solver.flow_step must be positive, got {s}")));
            }
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("solver.damping must lie in (0, 1], got {}", self.damping)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    pub flow_iterations: usize,
    pub newton_iterations: usize,
    pub residual: f64,
    pub energy_history: Vec<f64>,
    pub modica_violation: f64,
    /// Negative eigenvalues of the last Newton Jacobian.
    pub jacobian_negative: usize,
    pub unknowns: usize,
}

/// Discrete problem: unknown numbering, weights and the fixed sparsity
/// pattern shared by the flow and Newton matrices.
struct System<'a> {
    grid: Grid2D,
    p: &'a Potential,
    h2: f64,
    unknown_of: Vec<u32>,
    nodes: Vec<u32>,
    node_weight: Vec<f64>,
    /// Per node: neighbours as `(node, edge weight)`.
    nbrs: Vec<[(u32, f64); 4]>,
    edge_sum: Vec<f64>,
    pattern: SparseSym,
    diag_pos: Vec<usize>,
    offdiag: Vec<(usize, f64)>,
    symbolic: Symbolic,
}

impl<'a> System<'a> {
    fn new(grid: Grid2D, p: &'a Potential, outflow: bool) -> Result<Self> {
        let (nx, ny) = grid.dims();
        let h = grid.spacing();
        let mut unknown_of = vec![NONE; grid.len()];
        let mut nodes = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let free = !grid.is_frontier(i, j) || (outflow && i == nx - 1 && j > 0 && j < ny - 1);
                if free {
                    unknown_of[grid.index(i, j)] = nodes.len() as u32;
                    nodes.push(grid.index(i, j) as u32);
                }
            }
        }
        let side = |i: usize, n: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let mut node_weight = vec![0.0; grid.len()];
        let mut nbrs = vec![[(NONE, 0.0); 4]; grid.len()];
        let mut edge_sum = vec![0.0; grid.len()];
        for j in 0..ny {
            for i in 0..nx {
                let k = grid.index(i, j);
                node_weight[k] = side(i, nx) * side(j, ny);
                let hw = side(j, ny);
                let vw = side(i, nx);
                let cand = [
                    (i > 0).then(|| (k - 1, hw)),
                    (i + 1 < nx).then(|| (k + 1, hw)),
                    (j > 0).then(|| (k - nx, vw)),
                    (j + 1 < ny).then(|| (k + nx, vw)),
                ];
                for (s, c) in cand.iter().enumerate() {
                    if let Some((m, w)) = *c {
                        nbrs[k][s] = (m as u32, w);
                        edge_sum[k] += w;
                    }
                }
            }
        }
        let mut entries = Vec::with_capacity(3 * nodes.len());
        for (a, &n) in nodes.iter().enumerate() {
            entries.push((a, a, 0.0));
            for &(m, w) in &nbrs[n as usize] {
                if m != NONE {
                    let b = unknown_of[m as usize];
                    if b != NONE && (b as usize) > a {
                        entries.push((a, b as usize, -w));
                    }
                }
            }
        }
        if nodes.is_empty() {
            return Err(Error::Argument("no interior unknowns".into()));
        }
        let pattern = SparseSym::from_entries(nodes.len(), &entries)?;
        let diag_pos = (0..nodes.len()).map(|a| pattern.find(a, a).unwrap()).collect();
        let offdiag = pattern
            .entry_positions()
            .enumerate()
            .filter(|(_, (r, c))| r != c)
            .map(|(q, _)| (q, pattern.values()[q]))
            .collect();
        let coords: Vec<(i32, i32)> = nodes
            .iter()
            .map(|&n| {
                let (i, j) = grid.coords(n as usize);
                (i as i32, j as i32)
            })
            .collect();
        let symbolic = Symbolic::analyze(&pattern, nested_dissection(&coords, ND_LEAF))?;
        Ok(Self { grid, p, h2: h * h, unknown_of, nodes, node_weight, nbrs, edge_sum, pattern, diag_pos, offdiag, symbolic })
    }

    fn n(&self) -> usize {
        self.nodes.len()
    }

    /// Energy gradient at each unknown.
    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|&n| {
                let n = n as usize;
                let [l, r, d, t] = self.nbrs[n];
                let pair = |a: (u32, f64), b: (u32, f64)| {
                    let fa = if a.0 == NONE { 0.0 } else { a.1 * (u[n] - u[a.0 as usize]) };
                    let fb = if b.0 == NONE { 0.0 } else { b.1 * (u[n] - u[b.0 as usize]) };
                    fa + fb
                };
                (pair(l, r) + pair(d, t)) + self.h2 * self.node_weight[n] * self.p.dw(u[n])
            })
            .collect()
    }

    /// Sup-norm of `Δ_h u - W'(u)` over the unknowns (ghost-node form on
    /// Neumann rows).
    fn residual(&self, grad: &[f64]) -> f64 {
        grad.iter()
            .zip(&self.nodes)
            .map(|(g, &n)| (g / (self.h2 * self.node_weight[n as usize])).abs())
            .fold(0.0, f64::max)
    }

    fn energy(&self, u: &[f64]) -> f64 {
        let (nx, ny) = self.grid.dims();
        let mut e = 0.0;
        for j in 0..ny {
            let mut row = 0.0;
            for i in 0..nx {
                let k = self.grid.index(i, j);
                row += self.h2 * self.node_weight[k] * self.p.w(u[k]);
                // Right and upper edges, so each edge is counted once.
                for (m, w) in [self.nbrs[k][1], self.nbrs[k][3]] {
                    if m != NONE {
                        row += 0.5 * w * (u[k] - u[m as usize]).powi(2);
                    }
                }
            }
            e += row;
        }
        e
    }

    fn matrix(&self, diag: impl Fn(usize, usize) -> f64, off_scale: f64) -> SparseSym {
        let mut a = self.pattern.clone();
        let vals = a.values_mut();
        for &(q, v) in &self.offdiag {
            vals[q] = v * off_scale;
        }
        for (a_idx, &n) in self.nodes.iter().enumerate() {
            vals[self.diag_pos[a_idx]] = diag(a_idx, n as usize);
        }
        a
    }

    fn scatter(&self, u: &mut [f64], x: &[f64]) {
        for (a, &n) in self.nodes.iter().enumerate() {
            u[n as usize] = x[a];
        }
    }
}

/// Solves `Δu = W'(u)` with Dirichlet data from `spec` on the frontier of
/// `grid`, starting from the ansatz.
pub fn solve_dirichlet(grid: &Grid2D, spec: &BoundarySpec, p: &Potential, opts: &SolveOptions) -> Result<(Field2D, SolveDiagnostics)> {
    opts.validate()?;
    if p != spec.profile().potential() {
        return Err(Error::Argument("potential differs from the one used for the profile".into()));
    }
    let data = make_boundary(spec, grid)?;
    let mut u: Vec<f64> = (0..grid.len())
        .map(|k| {
            data[k].unwrap_or_else(|| {
                let (x, y) = grid.point(k);
                spec.ansatz(x, y)
            })
        })
        .collect();
    let sys = System::new(*grid, p, opts.outflow)?;
    let n = sys.n();
    let energy_tol = |e: f64| 1e-12 * e.abs().max(1.0);
    let mut history = vec![sys.energy(&u)];
    let mut grad = sys.gradient(&u);
    let mut res = sys.residual(&grad);
    log::debug!("solve: {n} unknowns, initial residual {res:e}");

    // Phase 1: semi-implicit flow (M + τK) u⁺ = M u - τ(b + M W'(u)).
    let mut tau = opts.flow_step.unwrap_or(2.0 * sys.h2);
    let mut flow_iterations = 0;
    let mut flow_factor = None;
    while flow_iterations < opts.max_flow && res >= 10.0 * opts.tol {
        if flow_factor.is_none() {
            let a = sys.matrix(|_, nd| sys.h2 * sys.node_weight[nd] + tau * sys.edge_sum[nd], tau);
            flow_factor = Some(factor_with_retry(&sys.symbolic, &a, 0.0)?);
        }
        let f = flow_factor.as_ref().unwrap();
        // M u - τ(b + M W'(u)) where b + Ku is the Dirichlet-energy gradient.
        let rhs: Vec<f64> = sys
            .nodes
            .iter()
            .map(|&nd| {
                let nd = nd as usize;
                let m = sys.h2 * sys.node_weight[nd];
                let b: f64 = sys.nbrs[nd]
                    .iter()
                    .filter(|(k, _)| *k != NONE && sys.unknown_of[*k as usize] == NONE)
                    .map(|&(k, w)| -w * u[k as usize])
                    .sum();
                m * u[nd] - tau * (b + m * p.dw(u[nd]))
            })
            .collect();
        let x = f.solve(&rhs);
        let mut trial = u.clone();
        sys.scatter(&mut trial, &x);
        let e = sys.energy(&trial);
        let last = *history.last().unwrap();
        if e > last + energy_tol(last) {
            tau *= 0.5;
            flow_factor = None;
            if tau < 1e-6 * sys.h2 {
                break;
            }
            continue;
        }
        u = trial;
        history.push(e);
        grad = sys.gradient(&u);
        res = sys.residual(&grad);
        flow_iterations += 1;
    }
    log::debug!("flow: {flow_iterations} steps, residual {res:e}");

    // Phase 2: damped Newton.
    let mut newton_iterations = 0;
    let mut jacobian_negative = 0;
    while res >= opts.tol {
        if newton_iterations == opts.max_newton {
            return Err(Error::NonConvergence {
                iterations: newton_iterations,
                residual: res,
                context: format!("Newton budget exhausted after {flow_iterations} flow steps"),
            });
        }
        let a = sys.matrix(|_, nd| sys.edge_sum[nd] + sys.h2 * sys.node_weight[nd] * p.d2w(u[nd]), 1.0);
        let f = factor_with_retry(&sys.symbolic, &a, 0.0)?;
        jacobian_negative = f.inertia().negative;
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let dir = f.solve(&rhs);
        if dir.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolver("non-finite Newton direction".into()));
        }
        let e0 = *history.last().unwrap();
        let g0 = norm2(&grad);
        let mut alpha = 1.0;
        let accepted = loop {
            let mut trial = u.clone();
            for (a_idx, &nd) in sys.nodes.iter().enumerate() {
                trial[nd as usize] += alpha * dir[a_idx];
            }
            let e = sys.energy(&trial);
            let tg = sys.gradient(&trial);
            let ok = if jacobian_negative == 0 { e <= e0 + energy_tol(e0) } else { norm2(&tg) < g0 };
            if ok {
                break Some((trial, e, tg));
            }
            alpha *= opts.damping;
            if alpha < 1e-10 {
                break None;
            }
        };
        let Some((trial, e, tg)) = accepted else {
            return Err(Error::NonConvergence {
                iterations: newton_iterations,
                residual: res,
                context: "line search failed to reduce the merit function".into(),
            });
        };
        u = trial;
        history.push(e);
        grad = tg;
        res = sys.residual(&grad);
        newton_iterations += 1;
        log::debug!("newton {newton_iterations}: step {alpha}, residual {res:e}, negative {jacobian_negative}");
    }
    let field = Field2D::new(*grid, u)?;
    let modica_violation = modica_check(&field, p);
    Ok((
        field,
        SolveDiagnostics {
            flow_iterations,
            newton_iterations,
            residual: res,
            energy_history: history,
            modica_violation,
            jacobian_negative,
            unknowns: n,
        },
    ))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sup-norm of `Δf - W'(f)` over the active interior.
pub fn residual(f: &Field2D, p: &Potential) -> f64 {
    let l = field::laplacian(f);
    (0..f.grid().len())
        .filter(|&k| l.mask()[k])
        .map(|k| (l.samples()[k] - p.dw(f.samples()[k])).abs())
        .fold(0.0, f64::max)
}

/// Largest `½|∇f|² - W(f)` over the active interior.
pub fn modica_check(f: &Field2D, p: &Potential) -> f64 {
    let (gx, gy) = field::gradient(f);
    (0..f.grid().len())
        .filter(|&k| gx.mask()[k])
        .map(|k| {
            0.5 * (gx.samples()[k].powi(2) + gy.samples()[k].powi(2)) - p.w(f.samples()[k])
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Angles of the diagonal rays of the saddle ansatz.
pub fn saddle_ray_angles() -> [f64; 4] {
    [PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> Profile1D {
        Profile1D::solve(&Potential::quartic(), 10.0, 1e-10).unwrap()
    }

    #[test]
    fn boundary_examples() {
        let p = profile();
        let grid = Grid2D::centered((0.0, 0.0), (16.0, 16.0), 0.1).unwrap();
        let layer = BoundarySpec::new(BoundaryKind::Layer { t: 0.0 }, p.clone()).unwrap();
        let b = make_boundary(&layer, &grid).unwrap();
        let k = grid.index(0, 37);
        assert_eq!(b[k].unwrap(), p.g(grid.y(37)));
        assert!(b[grid.index(5, 5)].is_none());

        let saddle = BoundarySpec::new(BoundaryKind::Saddle, p.clone()).unwrap();
        let b = make_boundary(&saddle, &grid).unwrap();
        let (nx, ny) = grid.dims();
        let corner = b[grid.index(nx - 1, ny - 1)].unwrap();
        assert!((corner - p.g(8.0 * 2f64.sqrt()) * p.g(0.0)).abs() < 1e-15);
        for k in 0..grid.len() {
            if let Some(v) = b[k] {
                let (x, y) = grid.point(k);
                let s = y * y - x * x;
                assert!(v * s >= 0.0, "sign at ({x}, {y})");
            }
        }

        let a = 3.0;
        let two = BoundarySpec::new(BoundaryKind::Multilayer { ts: vec![-a, a] }, p.clone()).unwrap();
        let b = make_boundary(&two, &grid).unwrap();
        let top = b[grid.index(nx / 2, ny - 1)].unwrap();
        let tail = (-(2f64).sqrt() * (8.0 - a)).exp();
        assert!((top + 1.0).abs() < 3.0 * tail && top > -1.0);

        let bad = BoundarySpec::new(BoundaryKind::Layer { t: 6.0 }, p.clone()).unwrap();
        assert!(matches!(make_boundary(&bad, &grid), Err(Error::Config(_))));
        assert!(BoundarySpec::new(BoundaryKind::Multilayer { ts: vec![1.0, 1.0] }, p.clone()).is_err());
    }

    #[test]
    fn multiend_matches_layer_for_two_antipodal_rays() {
        let p = profile();
        let ends = vec![RayEnd { angle: 0.0, sign: 1.0 }, RayEnd { angle: PI, sign: -1.0 }];
        let spec = BoundarySpec::new(BoundaryKind::Multiend { ends }, p.clone()).unwrap();
        for &(x, y) in &[(1.0, 2.0), (-3.0, -0.5), (0.0, 4.0)] {
            assert!((spec.ansatz(x, y) - p.g(y)).abs() < 1e-12);
        }
        let same = vec![RayEnd { angle: 0.0, sign: 1.0 }, RayEnd { angle: 1.0, sign: 1.0 }];
        assert!(BoundarySpec::new(BoundaryKind::Multiend { ends: same }, p).is_err());
    }

    #[test]
    fn residual_and_modica_examples() {
        let q = Potential::quartic();
        let grid = Grid2D::centered((0.0, 0.0), (4.0, 4.0), 0.1).unwrap();
        let one = Field2D::constant(grid, 1.0).unwrap();
        assert_eq!(residual(&one, &q), 0.0);
        let zero = Field2D::constant(grid, 0.0).unwrap();
        assert_eq!(modica_check(&zero, &q), -0.25);

        let p = profile();
        let mut r = Vec::new();
        for h in [0.1, 0.05] {
            let g = Grid2D::centered((0.0, 0.0), (2.0, 12.0), h).unwrap();
            let f = Field2D::from_fn(g, |_, y| p.g(y)).unwrap();
            r.push(residual(&f, &q));
            assert!(modica_check(&f, &q).abs() < 2.0 * h * h);
        }
        assert!((r[0] / r[1] - 4.0).abs() < 0.4);
    }

    #[test]
    fn layer_solve_converges() {
        let q = Potential::quartic();
        let p = profile();
        let grid = Grid2D::centered((0.0, 0.0), (10.0, 10.0), 0.1).unwrap();
        let spec = BoundarySpec::new(BoundaryKind::Layer { t: 0.0 }, p.clone()).unwrap();
        let (u, d) = solve_dirichlet(&grid, &spec, &q, &SolveOptions::default()).unwrap();
        assert!(d.residual < 1e-8);
        assert!(residual(&u, &q) < 1e-8);
        assert!(d.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)));
        let err = (0..grid.len()).map(|k| (u.samples()[k] - p.g(grid.point(k).1)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
        assert_eq!(d.jacobian_negative, 0);
    }

    #[test]
    fn outflow_rows_are_consistent() {
        let q = Potential::quartic();
        let p = profile();
        let grid = Grid2D::centered((0.0, 0.0), (8.0, 10.0), 0.1).unwrap();
        let spec = BoundarySpec::new(BoundaryKind::Layer { t: 0.0 }, p)
            .unwrap()
            .with_inflow_bump(0.2)
            .unwrap();
        let opts = SolveOptions { outflow: true, ..SolveOptions::default() };
        let (u, d) = solve_dirichlet(&grid, &spec, &q, &opts).unwrap();
        assert!(d.residual < 1e-8);
        // Ghost-node Neumann residual on the right edge.
        let (nx, ny) = grid.dims();
        let h = grid.spacing();
        for j in 1..ny - 1 {
            let c = u.at(nx - 1, j);
            let lap = (2.0 * u.at(nx - 2, j) + u.at(nx - 1, j - 1) + u.at(nx - 1, j + 1) - 4.0 * c) / (h * h);
            assert!((lap - q.dw(c)).abs() < 1e-7);
        }
    }
}
