//! Annulus statistics of the energy measures: angular energy profiles, ray
//! extraction with integer densities, and the anisotropy tensor per ray.

use std::f64::consts::TAU;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{self, Field2D};
use crate::potentials::Potential;

pub const MIN_BINS: usize = 64;
pub const DEFAULT_BINS: usize = 720;
pub const DEFAULT_PEAK_THRESHOLD: f64 = 0.2;
/// Peaks closer than this many bins form one cluster.
pub const MERGE_BINS: usize = 3;
pub const AMBIGUOUS_RESIDUAL: f64 = 0.25;

/// Per-bin sector integrals over the annulus `r_in < r < r_out` centred at
/// the origin, divided by `r_out - r_in`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngularProfile {
    pub r_in: f64,
    pub r_out: f64,
    pub theta: Vec<f64>,
    /// Gradient energy `|∇u|²`.
    pub a1: Vec<f64>,
    /// Potential energy `W(u)`.
    pub a2: Vec<f64>,
    /// `∇u ⊗ ∇u` as `[xx, xy, yy]`.
    pub grad_tensor: Vec<[f64; 3]>,
}

impl AngularProfile {
    pub fn bins(&self) -> usize {
        self.theta.len()
    }

    pub fn total_a1(&self) -> f64 {
        self.a1.iter().sum()
    }

    pub fn total_a2(&self) -> f64 {
        self.a2.iter().sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "theta,a1,a2")?;
        for ((t, a1), a2) in self.theta.iter().zip(&self.a1).zip(&self.a2) {
            writeln!(out, "{t},{a1},{a2}")?;
        }
        Ok(())
    }
}

/// Radial trapezoid integration along the bin centre rays with bilinear
/// sampling of `u` and of its central-difference gradient.
pub fn angular_energy(f: &Field2D, p: &Potential, r_in: f64, r_out: f64, bins: usize) -> Result<AngularProfile> {
    if bins < MIN_BINS {
        return Err(Error::Argument(format!("bins must be at least {MIN_BINS}, got {bins}")));
    }
    if !(r_in >= 0.0 && r_out > r_in && r_out.is_finite()) {
        return Err(Error::Geometry(format!("invalid annulus ({r_in}, {r_out})")));
    }
    let (gx, gy) = field::gradient(f);
    let h = f.grid().spacing();
    let steps = ((r_out - r_in) / (0.5 * h)).ceil().max(2.0) as usize;
    let dr = (r_out - r_in) / steps as f64;
    let dtheta = TAU / bins as f64;
    let scale = dtheta / (r_out - r_in);
    let mut theta = Vec::with_capacity(bins);
    let mut a1 = Vec::with_capacity(bins);
    let mut a2 = Vec::with_capacity(bins);
    let mut grad_tensor = Vec::with_capacity(bins);
    for j in 0..bins {
        let t = (j as f64 + 0.5) * dtheta;
        let (c, s) = (t.cos(), t.sin());
        let (mut e1, mut e2, mut txx, mut txy, mut tyy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..=steps {
            let r = r_in + k as f64 * dr;
            let (x, y) = (r * c, r * s);
            let sample = |g: &Field2D| {
                g.sample(x, y).ok_or_else(|| {
                    Error::Geometry(format!("annulus point ({x:.4}, {y:.4}) outside the active interior"))
                })
            };
            let u = sample(f)?;
            let (ux, uy) = (sample(&gx)?, sample(&gy)?);
            let w = if k == 0 || k == steps { 0.5 } else { 1.0 } * r * dr;
            e1 += w * (ux * ux + uy * uy);
            e2 += w * p.w(u);
            txx += w * ux * ux;
            txy += w * ux * uy;
            tyy += w * uy * uy;
        }
        theta.push(t);
        a1.push(e1 * scale);
        a2.push(e2 * scale);
        grad_tensor.push([txx * scale, txy * scale, tyy * scale]);
    }
    Ok(AngularProfile { r_in, r_out, theta, a1, a2, grad_tensor })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ray {
    pub angle_deg: f64,
    pub direction: [f64; 2],
    pub density_raw: f64,
    pub n: u32,
    pub rounding_residual: f64,
    pub equipartition: f64,
    pub tau: [[f64; 2]; 2],
    /// First and last bin of the cluster sector (cyclic, inclusive).
    pub sector: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowDownResult {
    pub rays: Vec<Ray>,
    pub balancing_defect: f64,
    /// Some density has a rounding residual above the ambiguity threshold.
    pub ambiguous: bool,
    /// Total gradient mass over `σ₀ Σ nᵢ`.
    pub sum_rule: f64,
}

impl BlowDownResult {
    pub fn densities(&self) -> Vec<u32> {
        self.rays.iter().map(|r| r.n).collect()
    }

    pub fn directions(&self) -> Vec<[f64; 2]> {
        self.rays.iter().map(|r| r.direction).collect()
    }
}

/// Clusters the peaks of `a1`, splits the circle at the minima between
/// neighbouring clusters and summarizes each sector as a ray.
pub fn extract_rays(profile: &AngularProfile, sigma0: f64, peak_threshold: f64) -> Result<BlowDownResult> {
    if !(sigma0 > 0.0) {
        return Err(Error::Argument(format!("sigma0 must be positive, got {sigma0}")));
    }
    if !(peak_threshold > 0.0 && peak_threshold < 1.0) {
        return Err(Error::Argument(format!("peak threshold must lie in (0, 1), got {peak_threshold}")));
    }
    let a = &profile.a1;
    let n = a.len();
    if n < MIN_BINS {
        return Err(Error::Argument("angular profile has too few bins".into()));
    }
    let max = a.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::Degenerate("no gradient energy in the annulus".into()));
    }
    let cut = peak_threshold * max;
    let prev = |j: usize| (j + n - 1) % n;
    let next = |j: usize| (j + 1) % n;
    let peaks: Vec<usize> = (0..n)
        .filter(|&j| a[j] >= cut && a[j] >= a[prev(j)] && a[j] > a[next(j)])
        .collect();
    if peaks.is_empty() {
        return Err(Error::Degenerate("no peaks above threshold".into()));
    }
    // Group cyclically adjacent peaks; start after the widest gap.
    let gap = |a: usize, b: usize| (b + n - a) % n;
    let m = peaks.len();
    let start = (0..m)
        .max_by_key(|&k| (gap(peaks[k], peaks[(k + 1) % m]), std::cmp::Reverse(k)))
        .map_or(0, |k| (k + 1) % m);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for k in 0..m {
        let pk = peaks[(start + k) % m];
        match clusters.last_mut() {
            Some(c) if gap(*c.last().unwrap(), pk) <= MERGE_BINS && m > 1 => c.push(pk),
            _ => clusters.push(vec![pk]),
        }
    }
    if clusters.len() > 1 {
        let first = clusters[0][0];
        let last = *clusters.last().unwrap().last().unwrap();
        if gap(last, first) <= MERGE_BINS {
            let tail = clusters.pop().unwrap();
            clusters[0].splice(0..0, tail);
        }
    }
    // Sector boundaries: the minimum of a1 between consecutive clusters.
    let c = clusters.len();
    let mut sectors = Vec::with_capacity(c);
    if c == 1 {
        let peak = clusters[0][0];
        let lo = (peak + n / 2) % n;
        sectors.push((next(lo), lo));
    } else {
        let mut splits = Vec::with_capacity(c);
        for k in 0..c {
            let from = *clusters[k].last().unwrap();
            let to = clusters[(k + 1) % c][0];
            let len = gap(from, to);
            let mut best = from;
            for s in 0..=len {
                let j = (from + s) % n;
                if a[j] < a[best] {
                    best = j;
                }
            }
            splits.push(best);
        }
        for k in 0..c {
            let lo = splits[(k + c - 1) % c];
            sectors.push((next(lo), splits[k]));
        }
    }

    let mut rays = Vec::with_capacity(c);
    for &(lo, hi) in &sectors {
        let len = gap(lo, hi) + 1;
        let (mut m1, mut m2, mut sx, mut sy) = (0.0, 0.0, 0.0, 0.0);
        let mut t = [0.0; 3];
        for s in 0..len {
            let j = (lo + s) % n;
            m1 += a[j];
            m2 += profile.a2[j];
            sx += a[j] * profile.theta[j].cos();
            sy += a[j] * profile.theta[j].sin();
            for q in 0..3 {
                t[q] += profile.grad_tensor[j][q];
            }
        }
        let norm = sx.hypot(sy);
        let direction = if norm > 0.0 { [sx / norm, sy / norm] } else { [1.0, 0.0] };
        let ratio = m1 / sigma0;
        let n_i = ratio.round().max(1.0);
        let tau = if m1 > 0.0 {
            [[t[0] / m1, t[1] / m1], [t[1] / m1, t[2] / m1]]
        } else {
            [[0.0; 2]; 2]
        };
        rays.push(Ray {
            angle_deg: direction[1].atan2(direction[0]).rem_euclid(TAU).to_degrees(),
            direction,
            density_raw: m1,
            n: n_i as u32,
            rounding_residual: (ratio - n_i).abs(),
            equipartition: if m2 > 0.0 { m1 / (2.0 * m2) } else { f64::INFINITY },
            tau,
            sector: (lo, hi),
        });
    }
    rays.sort_by(|x, y| x.angle_deg.total_cmp(&y.angle_deg));
    let (bx, by) = rays
        .iter()
        .fold((0.0, 0.0), |(x, y), r| (x + r.n as f64 * r.direction[0], y + r.n as f64 * r.direction[1]));
    let total_n: u32 = rays.iter().map(|r| r.n).sum();
    let ambiguous = rays.iter().any(|r| r.rounding_residual > AMBIGUOUS_RESIDUAL);
    if ambiguous {
        log::warn!("ambiguous ray density: rounding residual above {AMBIGUOUS_RESIDUAL}");
    }
    Ok(BlowDownResult {
        rays,
        balancing_defect: bx.hypot(by),
        ambiguous,
        sum_rule: profile.total_a1() / (sigma0 * total_n as f64),
    })
}

/// Frobenius norm of `(I - τᵢ) - eᵢ⊗eᵢ` for each ray.
pub fn tau_check(result: &BlowDownResult) -> Vec<f64> {
    result
        .rays
        .iter()
        .map(|r| {
            let [ex, ey] = r.direction;
            let d = [
                [1.0 - r.tau[0][0] - ex * ex, -r.tau[0][1] - ex * ey],
                [-r.tau[1][0] - ey * ex, 1.0 - r.tau[1][1] - ey * ey],
            ];
            d.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid2D;
    use crate::profile::Profile1D;

    fn layer_field(h: f64, half: f64) -> (Field2D, Profile1D) {
        let p = Profile1D::solve(&Potential::quartic(), 10.0, 1e-10).unwrap();
        let g = Grid2D::centered((0.0, 0.0), (2.0 * half, 2.0 * half), h).unwrap();
        (Field2D::from_fn(g, |_, y| p.g(y)).unwrap(), p)
    }

    #[test]
    fn layer_gives_two_antipodal_rays() {
        let (f, p) = layer_field(0.05, 12.0);
        let q = Potential::quartic();
        let prof = angular_energy(&f, &q, 5.0, 10.0, DEFAULT_BINS).unwrap();
        let r = extract_rays(&prof, p.sigma0(), DEFAULT_PEAK_THRESHOLD).unwrap();
        assert_eq!(r.rays.len(), 2);
        assert_eq!(r.densities(), vec![1, 1]);
        assert!(r.balancing_defect < 1e-10);
        assert!(r.rays[0].angle_deg.abs() < 1e-9 || (r.rays[0].angle_deg - 360.0).abs() < 1e-9);
        assert!((r.rays[1].angle_deg - 180.0).abs() < 1e-9);
        for ray in &r.rays {
            assert!((ray.density_raw / p.sigma0() - 1.0).abs() < 0.01);
            assert!((ray.equipartition - 1.0).abs() < 0.01);
        }
        assert!(tau_check(&r).iter().all(|&d| d <= 0.05));
        assert!((r.sum_rule - 1.0).abs() < 0.05);
    }

    #[test]
    fn constant_field_has_no_rays() {
        let g = Grid2D::centered((0.0, 0.0), (20.0, 20.0), 0.1).unwrap();
        let one = Field2D::constant(g, 1.0).unwrap();
        let prof = angular_energy(&one, &Potential::quartic(), 2.0, 4.0, 64).unwrap();
        assert!(prof.a1.iter().chain(&prof.a2).all(|&v| v == 0.0));
        assert!(matches!(extract_rays(&prof, 1.0, 0.2), Err(Error::Degenerate(_))));
    }

    #[test]
    fn annulus_outside_domain_is_rejected() {
        let (f, _) = layer_field(0.1, 5.0);
        let q = Potential::quartic();
        assert!(matches!(angular_energy(&f, &q, 2.0, 8.0, 64), Err(Error::Geometry(_))));
        assert!(angular_energy(&f, &q, 2.0, 3.0, 16).is_err());
    }

    #[test]
    fn bump_tau_is_diagnostic_only() {
        let g = Grid2D::centered((0.0, 0.0), (16.0, 16.0), 0.1).unwrap();
        let f = Field2D::from_fn(g, |x, y| (-(x * x + y * y) / 20.0).exp()).unwrap();
        let prof = angular_energy(&f, &Potential::quartic(), 2.0, 6.0, 64).unwrap();
        if let Ok(r) = extract_rays(&prof, 1.0, 0.2) {
            assert_eq!(tau_check(&r).len(), r.rays.len());
        }
    }
}
