//! Layered cross-section analysis: nodal graphs, the translation fit of the
//! multilayer profile, the cross-section Hamiltonian and decay-rate fits.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::potentials::Potential;
use crate::profile::{check_increasing, window_of, Profile1D};

/// Gradient sup-norm at which the translation fit stops.
pub const FIT_TOL: f64 = 1e-10;
pub const FIT_MAX_ITER: usize = 50;
/// Below this R² a decay fit is flagged as non-exponential.
pub const MIN_R2: f64 = 0.9;
pub const MIN_FIT_COLUMNS: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct InterfaceSet {
    pub xs: Vec<f64>,
    /// `graphs[i][c]` is the height of graph `i` at column `xs[c]`.
    pub graphs: Vec<Vec<f64>>,
    pub ordered: bool,
    /// `max_i |f_i'(x)|` per column, by central differences.
    pub max_slope: Vec<f64>,
}

impl InterfaceSet {
    pub fn count(&self) -> usize {
        self.graphs.len()
    }

    pub fn heights_at(&self, c: usize) -> Vec<f64> {
        self.graphs.iter().map(|g| g[c]).collect()
    }
}

/// Zero crossings of every grid column with `x` in `[x_min, x_max]`.
pub fn extract_interfaces(f: &Field2D, x_min: f64, x_max: f64) -> Result<InterfaceSet> {
    let grid = f.grid();
    let (nx, ny) = grid.dims();
    let mut xs = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for i in 0..nx {
        let x = grid.x(i);
        if x < x_min || x > x_max {
            continue;
        }
        let mut crossings = Vec::new();
        for j in 0..ny - 1 {
            if !(f.is_active(i, j) && f.is_active(i, j + 1)) {
                continue;
            }
            let (a, b) = (f.at(i, j), f.at(i, j + 1));
            if (a > 0.0) != (b > 0.0) {
                crossings.push(grid.y(j) + grid.spacing() * a / (a - b));
            }
        }
        if let Some(first) = cols.first() {
            if crossings.len() != first.len() {
                return Err(Error::Topology { x, found: crossings.len(), expected: first.len() });
            }
        } else if crossings.is_empty() {
            return Err(Error::Topology { x, found: 0, expected: 1 });
        }
        xs.push(x);
        cols.push(crossings);
    }
    if xs.is_empty() {
        return Err(Error::Argument(format!("no grid column in [{x_min}, {x_max}]")));
    }
    let n = cols[0].len();
    let graphs: Vec<Vec<f64>> = (0..n).map(|k| cols.iter().map(|c| c[k]).collect()).collect();
    let ordered = cols.iter().all(|c| c.windows(2).all(|w| w[0] < w[1]));
    let m = xs.len();
    let max_slope = (0..m)
        .map(|c| {
            if m < 2 {
                return 0.0;
            }
            let (a, b) = (c.saturating_sub(1), (c + 1).min(m - 1));
            graphs.iter().map(|g| ((g[b] - g[a]) / (xs[b] - xs[a])).abs()).fold(0.0, f64::max)
        })
        .collect();
    Ok(InterfaceSet { xs, graphs, ordered, max_slope })
}

/// Nodes of the cross-section at `x` restricted to `|y| <= lambda |x|`, with
/// trapezoid weights.
#[derive(Debug, Clone)]
struct Section {
    ys: Vec<f64>,
    us: Vec<f64>,
    weights: Vec<f64>,
}

/// Values of `f` (or of a derived per-node quantity) on the column at `x`,
/// interpolated linearly between neighbouring grid columns.
fn column_values(f: &Field2D, x: f64, node: impl Fn(usize, usize) -> f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = f.grid();
    let (nx, ny) = grid.dims();
    let h = grid.spacing();
    let s = (x - grid.origin().0) / h;
    if !(s > -1e-9 && s < (nx - 1) as f64 + 1e-9) {
        return Err(Error::Argument(format!("column x = {x} lies outside the domain")));
    }
    let s = s.clamp(0.0, (nx - 1) as f64);
    let i = (s.floor() as usize).min(nx - 2);
    let mut frac = s - i as f64;
    if frac < 1e-9 {
        frac = 0.0;
    } else if frac > 1.0 - 1e-9 {
        frac = 1.0;
    }
    let mut ys = Vec::with_capacity(ny);
    let mut vs = Vec::with_capacity(ny);
    for j in 0..ny {
        let active = (frac == 1.0 || f.is_active(i, j)) && (frac == 0.0 || f.is_active(i + 1, j));
        if !active {
            continue;
        }
        let v = match frac {
            0.0 => node(i, j),
            1.0 => node(i + 1, j),
            t => (1.0 - t) * node(i, j) + t * node(i + 1, j),
        };
        ys.push(grid.y(j));
        vs.push(v);
    }
    Ok((ys, vs))
}

fn section_of(ys: Vec<f64>, vs: Vec<f64>, x: f64, lambda: f64) -> Result<Section> {
    let half = lambda * x.abs();
    let keep: Vec<usize> = (0..ys.len()).filter(|&k| ys[k].abs() <= half + 1e-12).collect();
    if keep.len() < 3 || keep.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::Argument(format!("section at x = {x} has too few contiguous nodes")));
    }
    let ys: Vec<f64> = keep.iter().map(|&k| ys[k]).collect();
    let us: Vec<f64> = keep.iter().map(|&k| vs[k]).collect();
    let m = ys.len();
    let weights = (0..m)
        .map(|k| {
            let left = if k > 0 { ys[k] - ys[k - 1] } else { 0.0 };
            let right = if k + 1 < m { ys[k + 1] - ys[k] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    Ok(Section { ys, us, weights })
}

fn section(f: &Field2D, x: f64, lambda: f64) -> Result<Section> {
    if !(lambda > 0.0) {
        return Err(Error::Argument("cone slope lambda must be positive".into()));
    }
    let (ys, vs) = column_values(f, x, |i, j| f.at(i, j))?;
    section_of(ys, vs, x, lambda)
}

fn check_inside(sec: &Section, ts: &[f64]) -> Result<()> {
    check_increasing(ts)?;
    let (lo, hi) = (sec.ys[0], sec.ys[sec.ys.len() - 1]);
    if ts.iter().any(|&t| t <= lo || t >= hi) {
        return Err(Error::Argument(format!("translations {ts:?} leave the section [{lo}, {hi}]")));
    }
    Ok(())
}

/// `F(x; t) = ∫ |u(x, y) - g(y; t)|² dy` over the section `|y| < lambda |x|`.
pub fn misfit(f: &Field2D, prof: &Profile1D, x: f64, ts: &[f64], lambda: f64) -> Result<f64> {
    let sec = section(f, x, lambda)?;
    check_inside(&sec, ts)?;
    Ok(misfit_on(&sec, prof, ts))
}

fn misfit_on(sec: &Section, prof: &Profile1D, ts: &[f64]) -> f64 {
    sec.ys
        .iter()
        .zip(&sec.us)
        .zip(&sec.weights)
        .map(|((&y, &u), &w)| {
            let (i, s) = window_of(ts, y);
            let d = u - s * prof.g(y - ts[i]);
            w * d * d
        })
        .sum()
}

/// Gradient and Hessian of the misfit in the translations.
#[derive(Debug, Clone, Serialize)]
pub struct MisfitDerivatives {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `N × N`.
    pub hessian: Vec<f64>,
}

impl MisfitDerivatives {
    pub fn hessian_at(&self, i: usize, j: usize) -> f64 {
        self.hessian[i * self.gradient.len() + j]
    }
}

pub fn misfit_derivatives(f: &Field2D, prof: &Profile1D, x: f64, ts: &[f64], lambda: f64) -> Result<MisfitDerivatives> {
    let sec = section(f, x, lambda)?;
    check_inside(&sec, ts)?;
    Ok(derivatives_on(&sec, prof, ts))
}

fn derivatives_on(sec: &Section, prof: &Profile1D, ts: &[f64]) -> MisfitDerivatives {
    let n = ts.len();
    let mut gradient = vec![0.0; n];
    let mut hessian = vec![0.0; n * n];
    let mut value = 0.0;
    for ((&y, &u), &w) in sec.ys.iter().zip(&sec.us).zip(&sec.weights) {
        let (i, s) = window_of(ts, y);
        let z = y - ts[i];
        let d = u - s * prof.g(z);
        let gp = prof.g_prime(z);
        value += w * d * d;
        gradient[i] += 2.0 * w * d * s * gp;
        hessian[i * n + i] += 2.0 * w * (gp * gp - s * d * prof.g_second(z));
    }
    // Window-boundary terms: the midpoint between t_i and t_{i+1} moves with
    // both translations.
    for i in 0..n.saturating_sub(1) {
        let m = 0.5 * (ts[i] + ts[i + 1]);
        let Some(u) = interpolate(&sec.ys, &sec.us, m) else { continue };
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        let (zl, zr) = (m - ts[i], m - ts[i + 1]);
        let left = 2.0 * (u - s * prof.g(zl)) * s * prof.g_prime(zl);
        let right = 2.0 * (u + s * prof.g(zr)) * (-s) * prof.g_prime(zr);
        hessian[i * n + i] += 0.5 * left;
        hessian[(i + 1) * n + i + 1] -= 0.5 * right;
        let off = 0.25 * (left - right);
        hessian[i * n + i + 1] += off;
        hessian[(i + 1) * n + i] += off;
    }
    MisfitDerivatives { value, gradient, hessian }
}

fn interpolate(ys: &[f64], vs: &[f64], y: f64) -> Option<f64> {
    let k = ys.partition_point(|&v| v <= y);
    if k == 0 || k == ys.len() {
        return None;
    }
    let t = (y - ys[k - 1]) / (ys[k] - ys[k - 1]);
    Some((1.0 - t) * vs[k - 1] + t * vs[k])
}

/// Cholesky solve of a small dense SPD system; `None` if not positive definite.
fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[i * n + k] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] -= l[k * n + i] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    Some(z)
}

#[derive(Debug, Clone, Serialize)]
pub struct TranslationFit {
    pub ts: Vec<f64>,
    pub misfit: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub hessian_diagonal: Vec<f64>,
    pub hessian_offdiagonal: Vec<f64>,
}

/// Newton iteration on `∂F/∂t = 0` starting from `init`.
pub fn fit_translations(f: &Field2D, prof: &Profile1D, x: f64, init: &[f64], lambda: f64) -> Result<TranslationFit> {
    let sec = section(f, x, lambda)?;
    check_inside(&sec, init)?;
    let max_step = 0.25 * f.grid().spacing().max(0.1);
    let mut ts = init.to_vec();
    for iterations in 0..=FIT_MAX_ITER {
        let d = derivatives_on(&sec, prof, &ts);
        let norm = d.gradient.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        let neg: Vec<f64> = d.gradient.iter().map(|g| -g).collect();
        let Some(step) = cholesky_solve(&d.hessian, &neg) else {
            return Err(Error::OutOfBasin(format!("misfit Hessian is not positive definite at x = {x}, t = {ts:?}")));
        };
        if norm < FIT_TOL {
            let n = ts.len();
            return Ok(TranslationFit {
                misfit: d.value,
                gradient_norm: norm,
                iterations,
                hessian_diagonal: (0..n).map(|i| d.hessian_at(i, i)).collect(),
                hessian_offdiagonal: (0..n.saturating_sub(1)).map(|i| d.hessian_at(i, i + 1)).collect(),
                ts,
            });
        }
        if iterations == FIT_MAX_ITER {
            return Err(Error::NonConvergence {
                iterations,
                residual: norm,
                context: format!("translation fit at x = {x}"),
            });
        }
        let longest = step.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
        let scale = if longest > max_step { max_step / longest } else { 1.0 };
        for (t, s) in ts.iter_mut().zip(&step) {
            *t += scale * s;
        }
        if check_inside(&sec, &ts).is_err() {
            return Err(Error::OutOfBasin(format!("translations left the section at x = {x}: {ts:?}")));
        }
    }
    unreachable!()
}

/// `∫ (u_y² - u_x²)/2 + W(u) dy` over `|y| < lambda |x|` at column `x`.
pub fn hamiltonian_section(f: &Field2D, p: &Potential, x: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Argument("cone slope lambda must be positive".into()));
    }
    let grid = f.grid();
    let (nx, ny) = grid.dims();
    let h = grid.spacing();
    let density = |i: usize, j: usize| {
        let ux = diff(|a| f.at(a, j), i, nx, h);
        let uy = diff(|b| f.at(i, b), j, ny, h);
        0.5 * (uy * uy - ux * ux) + p.w(f.at(i, j))
    };
    let (ys, vs) = column_values(f, x, density)?;
    let sec = section_of(ys, vs, x, lambda)?;
    Ok(sec.us.iter().zip(&sec.weights).map(|(v, w)| v * w).sum())
}

/// Second-order difference of `get` at index `k` of `0..n`, one-sided at the ends.
fn diff(get: impl Fn(usize) -> f64, k: usize, n: usize, h: f64) -> f64 {
    match k {
        0 => (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h),
        k if k == n - 1 => (3.0 * get(k) - 4.0 * get(k - 1) + get(k - 2)) / (2.0 * h),
        k => (get(k + 1) - get(k - 1)) / (2.0 * h),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitTrajectory {
    pub n: usize,
    pub lambda: f64,
    pub xs: Vec<f64>,
    /// `ts[c][i]`: translation of layer `i` at column `c`.
    pub ts: Vec<Vec<f64>>,
    pub misfit: Vec<f64>,
    pub hamiltonian: Vec<f64>,
    pub separations: Vec<Vec<f64>>,
    pub converged: Vec<bool>,
    /// `-s_i ∫ u_x g'(y - t_i) / ∫ g'²` over each window, a first-order
    /// estimate of `t_i'(x)`.
    pub t_prime_estimate: Vec<Vec<f64>>,
    pub hessian_diagonal_min: Vec<f64>,
    pub hessian_offdiagonal_max: Vec<f64>,
}

/// Fits every column of `set` (initialised from the extracted graphs).
pub fn trajectory(f: &Field2D, prof: &Profile1D, set: &InterfaceSet, lambda: f64) -> Result<FitTrajectory> {
    let n = set.count();
    let cap = set.xs.len();
    let mut out = FitTrajectory {
        n,
        lambda,
        xs: Vec::with_capacity(cap),
        ts: Vec::with_capacity(cap),
        misfit: Vec::with_capacity(cap),
        hamiltonian: Vec::with_capacity(cap),
        separations: Vec::with_capacity(cap),
        converged: Vec::with_capacity(cap),
        t_prime_estimate: Vec::with_capacity(cap),
        hessian_diagonal_min: Vec::with_capacity(cap),
        hessian_offdiagonal_max: Vec::with_capacity(cap),
    };
    for (c, &x) in set.xs.iter().enumerate() {
        let init = set.heights_at(c);
        if section(f, x, lambda).and_then(|s| check_inside(&s, &init)).is_err() {
            continue;
        }
        let (ts, value, ok, dmin, omax) = match fit_translations(f, prof, x, &init, lambda) {
            Ok(fit) => (
                fit.ts,
                fit.misfit,
                true,
                fit.hessian_diagonal.iter().copied().fold(f64::INFINITY, f64::min),
                fit.hessian_offdiagonal.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
            ),
            Err(Error::OutOfBasin(_)) | Err(Error::NonConvergence { .. }) => {
                let v = misfit(f, prof, x, &init, lambda)?;
                (init, v, false, f64::NAN, f64::NAN)
            }
            Err(e) => return Err(e),
        };
        out.hamiltonian.push(hamiltonian_section(f, prof.potential(), x, lambda)?);
        out.t_prime_estimate.push(t_prime_leading(f, prof, x, &ts, lambda)?);
        out.separations.push(ts.windows(2).map(|w| w[1] - w[0]).collect());
        out.xs.push(x);
        out.ts.push(ts);
        out.misfit.push(value);
        out.converged.push(ok);
        out.hessian_diagonal_min.push(dmin);
        out.hessian_offdiagonal_max.push(omax);
    }
    Ok(out)
}

fn t_prime_leading(f: &Field2D, prof: &Profile1D, x: f64, ts: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let grid = f.grid();
    let (nx, _) = grid.dims();
    let h = grid.spacing();
    let ux = |i: usize, j: usize| diff(|a| f.at(a, j), i, nx, h);
    let (ys, vs) = column_values(f, x, ux)?;
    let sec = section_of(ys, vs, x, lambda)?;
    let n = ts.len();
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for ((&y, &v), &w) in sec.ys.iter().zip(&sec.us).zip(&sec.weights) {
        let (i, s) = window_of(ts, y);
        let gp = prof.g_prime(y - ts[i]);
        num[i] -= w * s * v * gp;
        den[i] += w * gp * gp;
    }
    Ok(num.iter().zip(&den).map(|(a, b)| a / b).collect())
}

/// Result of a log-linear least-squares fit `y ≈ C e^{-c x}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateFit {
    pub rate: Option<f64>,
    pub prefactor: Option<f64>,
    pub r2: Option<f64>,
    pub samples: usize,
    pub noise_dominated: bool,
    pub non_exponential: bool,
}

/// Least squares for `ln y = ln C - c x`; returns `(c, C, R²)`.
pub fn fit_log_linear(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Argument("log-linear fit needs at least 3 paired samples".into()));
    }
    if ys.iter().any(|&y| !(y > 0.0 && y.is_finite())) {
        return Err(Error::Argument("log-linear fit needs positive finite values".into()));
    }
    let m = xs.len() as f64;
    let ls: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let ml = ls.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxl: f64 = xs.iter().zip(&ls).map(|(x, l)| (x - mx) * (l - ml)).sum();
    let sll: f64 = ls.iter().map(|l| (l - ml).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Argument("log-linear fit needs distinct abscissae".into()));
    }
    let slope = sxl / sxx;
    let r2 = if sll > 0.0 { (sxl * sxl / (sxx * sll)).min(1.0) } else { 1.0 };
    Ok((-slope, (ml - slope * mx).exp(), r2))
}

/// Fits the samples whose value exceeds `floor`; flags noise when fewer than
/// three remain or they cover less than half of the input.
pub fn rate_above_floor(xs: &[f64], ys: &[f64], floor: f64) -> RateFit {
    let keep: Vec<usize> = (0..xs.len()).filter(|&k| ys[k].is_finite() && ys[k] > floor).collect();
    let noise = keep.len() < 3 || 2 * keep.len() < xs.len();
    let kx: Vec<f64> = keep.iter().map(|&k| xs[k]).collect();
    let ky: Vec<f64> = keep.iter().map(|&k| ys[k]).collect();
    match fit_log_linear(&kx, &ky) {
        Ok((c, a, r2)) if !noise => RateFit {
            rate: Some(c),
            prefactor: Some(a),
            r2: Some(r2),
            samples: keep.len(),
            noise_dominated: false,
            non_exponential: r2 < MIN_R2,
        },
        _ => RateFit {
            rate: None,
            prefactor: None,
            r2: None,
            samples: keep.len(),
            noise_dominated: true,
            non_exponential: false,
        },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayRates {
    #[serde(rename = "F")]
    pub misfit: RateFit,
    pub hamiltonian: RateFit,
    /// One fit per layer of `|Δt_i / Δx|`.
    pub t_prime: Vec<RateFit>,
    pub x_range: (f64, f64),
}

/// Noise floors of the decay fits.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NoiseFloors {
    pub misfit: f64,
    pub hamiltonian: f64,
    pub t_prime: f64,
}

impl NoiseFloors {
    /// Floors for grid spacing `h`: the Hamiltonian floor is `N σ₀ h²`.
    pub fn for_grid(n: usize, sigma0: f64, h: f64) -> Self {
        NoiseFloors { misfit: 1e-20, hamiltonian: n as f64 * sigma0 * h * h, t_prime: 1e-8 }
    }
}

/// Decay fits over the middle third of the trajectory's converged columns.
pub fn decay_rates(traj: &FitTrajectory, sigma0: f64, floors: NoiseFloors) -> Result<DecayRates> {
    let cols: Vec<usize> = (0..traj.xs.len()).filter(|&c| traj.converged[c]).collect();
    if cols.is_empty() {
        return Err(Error::Argument("trajectory has no converged columns".into()));
    }
    let (x0, x1) = (traj.xs[cols[0]], traj.xs[*cols.last().unwrap()]);
    let (a, b) = (x0 + (x1 - x0) / 3.0, x1 - (x1 - x0) / 3.0);
    let mid: Vec<usize> = cols.into_iter().filter(|&c| traj.xs[c] >= a - 1e-12 && traj.xs[c] <= b + 1e-12).collect();
    if mid.len() < MIN_FIT_COLUMNS {
        return Err(Error::Argument(format!(
            "decay fit needs at least {MIN_FIT_COLUMNS} converged columns in the middle third, found {}",
            mid.len()
        )));
    }
    let xs: Vec<f64> = mid.iter().map(|&c| traj.xs[c]).collect();
    let f: Vec<f64> = mid.iter().map(|&c| traj.misfit[c]).collect();
    let target = traj.n as f64 * sigma0;
    let hdev: Vec<f64> = mid.iter().map(|&c| (traj.hamiltonian[c] - target).abs()).collect();
    let t_prime = (0..traj.n)
        .map(|i| {
            let (mut px, mut py) = (Vec::new(), Vec::new());
            for w in mid.windows(2) {
                let (c, d) = (w[0], w[1]);
                let dx = traj.xs[d] - traj.xs[c];
                px.push(0.5 * (traj.xs[c] + traj.xs[d]));
                py.push(((traj.ts[d][i] - traj.ts[c][i]) / dx).abs());
            }
            rate_above_floor(&px, &py, floors.t_prime)
        })
        .collect();
    Ok(DecayRates {
        misfit: rate_above_floor(&xs, &f, floors.misfit),
        hamiltonian: rate_above_floor(&xs, &hdev, floors.hamiltonian),
        t_prime,
        x_range: (a, b),
    })
}

/// Samples `1 - u²` along the ray at `angle` (radians) from the origin for
/// radii in `[r_min, r_max]` and fits its exponential decay rate.
pub fn far_field_decay(f: &Field2D, angle: f64, r_min: f64, r_max: f64, samples: usize, floor: f64) -> Result<RateFit> {
    if !(r_max > r_min && r_min >= 0.0) || samples < 3 {
        return Err(Error::Argument("need 0 <= r_min < r_max and at least 3 samples".into()));
    }
    let (c, s) = (angle.cos(), angle.sin());
    let mut xs = Vec::with_capacity(samples);
    let mut ys = Vec::with_capacity(samples);
    for k in 0..samples {
        let r = r_min + (r_max - r_min) * k as f64 / (samples - 1) as f64;
        let u = f
            .sample(r * c, r * s)
            .ok_or_else(|| Error::Geometry(format!("ray point at r = {r} leaves the domain")))?;
        xs.push(r);
        ys.push(1.0 - u * u);
    }
    Ok(rate_above_floor(&xs, &ys, floor))
}
