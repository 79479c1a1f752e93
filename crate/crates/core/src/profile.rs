//! The heteroclinic profile g and the multi-layer ansatz built from it.
//!
//! The profile is obtained by inverting t(g) = ∫₀^g ds / √(2W(s)). Near a
//! well the integrand has a logarithmic singularity, so the integral is
//! taken in the variable z = -ln(1 ∓ g), in which it is smooth and bounded.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potentials::Potential;

/// Node spacing of the sampled profile.
pub const PROFILE_SPACING: f64 = 0.005;

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS.iter())
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

#[derive(Debug, Clone)]
pub struct Profile1D {
    potential: Potential,
    nodes: Vec<f64>,
    values: Vec<f64>,
    derivs: Vec<f64>,
    spacing: f64,
    half_width: f64,
    sigma0: f64,
    sigma0_energy: f64,
    /// Decay rates √W''(∓1) of the lower and upper tails.
    tail_rates: [f64; 2],
    /// Amplitudes A with g(t) = ∓1 ± A e^{∓κ t} beyond the window.
    tail_amplitudes: [f64; 2],
    first_integral_residual: f64,
}

/// Half-line of the profile in well coordinates: returns (t_k, s_k) for
/// t_k = k·dt, k = 0..=n, where s = 1 - side·g is the distance to the well.
fn half_line(p: &Potential, side: f64, dt: f64, n: usize) -> Result<Vec<f64>> {
    let phi = |z: f64| -> f64 {
        let s = (-z).exp();
        let w = p.w_from_well(side, s);
        s / (2.0 * w).sqrt()
    };
    let mut s_vals = Vec::with_capacity(n + 1);
    s_vals.push(1.0);
    let mut z_prev = 0.0;
    for k in 1..=n {
        let mut z = z_prev + dt / phi(z_prev);
        let mut converged = false;
        for _ in 0..50 {
            let t = gauss_legendre(z_prev, z, phi);
            let f = t - dt;
            let d = phi(z);
            if !(f.is_finite() && d.is_finite() && d > 0.0) {
                return Err(Error::Numerical(format!(
                    "profile quadrature broke down at t = {:.4} (z = {z:.4}, integrand {d:e})",
                    side * k as f64 * dt
                )));
            }
            let step = f / d;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(format!(
                "profile inversion did not converge at t = {:.4}",
                side * k as f64 * dt
            )));
        }
        s_vals.push((-z).exp());
        z_prev = z;
    }
    Ok(s_vals)
}

impl Profile1D {
    pub fn solve(p: &Potential, half_width: f64, tol: f64) -> Result<Self> {
        if !(half_width >= 5.0) {
            return Err(Error::Argument(format!("half_width {half_width} < 5")));
        }
        if !(tol > 0.0 && tol <= 1e-4) {
            return Err(Error::Argument(format!("tol {tol} outside (0, 1e-4]")));
        }
        let n = (half_width / PROFILE_SPACING).ceil() as usize;
        let dt = half_width / n as f64;

        let upper = half_line(p, 1.0, dt, n)?;
        let lower = if p.is_even() { upper.clone() } else { half_line(p, -1.0, dt, n)? };

        let total = 2 * n + 1;
        let mut nodes = Vec::with_capacity(total);
        let mut values = Vec::with_capacity(total);
        let mut derivs = Vec::with_capacity(total);
        for k in (1..=n).rev() {
            let s = lower[k];
            nodes.push(-(k as f64) * dt);
            values.push(-(1.0 - s));
            derivs.push((2.0 * p.w_from_well(-1.0, s)).sqrt());
        }
        for (k, &s) in upper.iter().enumerate() {
            nodes.push(k as f64 * dt);
            values.push(if k == 0 { 0.0 } else { 1.0 - s });
            derivs.push((2.0 * p.w_from_well(1.0, s)).sqrt());
        }

        let curv = p.well_curvatures();
        let tail_rates = [curv[0].sqrt(), curv[1].sqrt()];
        let tail_amplitudes = [
            lower[n] * (tail_rates[0] * half_width).exp(),
            upper[n] * (tail_rates[1] * half_width).exp(),
        ];

        // First-integral residual against an independent fourth-order
        // difference of the node values.
        let mut residual: f64 = 0.0;
        for k in 2..total - 2 {
            let fd = (values[k - 2] - 8.0 * values[k - 1] + 8.0 * values[k + 1] - values[k + 2]) / (12.0 * dt);
            residual = residual.max((fd - derivs[k]).abs());
        }

        let tails: f64 = (0..2)
            .map(|i| {
                let (k, a) = (tail_rates[i], tail_amplitudes[i]);
                0.5 * k * a * a * (-2.0 * k * half_width).exp()
            })
            .sum();
        let sigma0 = simpson(dt, derivs.iter().map(|d| d * d)) + tails;
        let sigma0_energy = simpson(dt, derivs.iter().zip(&values).map(|(d, &g)| 0.5 * d * d + p.w(g))) + tails;

        if (sigma0 - sigma0_energy).abs() > 10.0 * tol {
            return Err(Error::Inconsistent(format!(
                "σ₀ from ∫|g'|² ({sigma0}) and from ∫½|g'|²+W(g) ({sigma0_energy}) disagree"
            )));
        }

        Ok(Self {
            potential: p.clone(),
            nodes,
            values,
            derivs,
            spacing: dt,
            half_width,
            sigma0,
            sigma0_energy,
            tail_rates,
            tail_amplitudes,
            first_integral_residual: residual,
        })
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.derivs
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// σ₀ = ∫|g'|² dt, including the analytic tail contribution.
    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    /// The same quantity computed as ∫ ½|g'|² + W(g) dt.
    pub fn sigma0_energy_form(&self) -> f64 {
        self.sigma0_energy
    }

    pub fn tail_rates(&self) -> [f64; 2] {
        self.tail_rates
    }

    /// max over nodes of |g'_k - (fourth-order difference of g)_k|.
    pub fn first_integral_residual(&self) -> f64 {
        self.first_integral_residual
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let x = t / self.spacing + ((self.nodes.len() - 1) / 2) as f64;
        let last = self.nodes.len() - 2;
        let i = (x.floor() as usize).min(last);
        (i, x - i as f64)
    }

    /// g(t); Hermite interpolation inside the window, exponential tails outside.
    pub fn g(&self, t: f64) -> f64 {
        if t < 0.0 && self.potential.is_even() {
            return -self.g(-t);
        }
        if t > self.half_width {
            let [_, k] = self.tail_rates;
            1.0 - self.tail_amplitudes[1] * (-k * t).exp()
        } else if t < -self.half_width {
            let [k, _] = self.tail_rates;
            -1.0 + self.tail_amplitudes[0] * (k * t).exp()
        } else {
            let (i, s) = self.locate(t);
            let h = self.spacing;
            let (y0, y1) = (self.values[i], self.values[i + 1]);
            let (d0, d1) = (self.derivs[i], self.derivs[i + 1]);
            let s2 = s * s;
            let s3 = s2 * s;
            (2.0 * s3 - 3.0 * s2 + 1.0) * y0
                + (s3 - 2.0 * s2 + s) * h * d0
                + (-2.0 * s3 + 3.0 * s2) * y1
                + (s3 - s2) * h * d1
        }
    }

    /// g'(t), through the first integral g' = √(2W(g)).
    pub fn g_prime(&self, t: f64) -> f64 {
        if t > self.half_width {
            let [_, k] = self.tail_rates;
            k * self.tail_amplitudes[1] * (-k * t).exp()
        } else if t < -self.half_width {
            let [k, _] = self.tail_rates;
            k * self.tail_amplitudes[0] * (k * t).exp()
        } else {
            let g = self.g(t);
            let side = if t >= 0.0 { 1.0 } else { -1.0 };
            (2.0 * self.potential.w_from_well(side, 1.0 - side * g)).max(0.0).sqrt()
        }
    }

    /// g''(t) = W'(g(t)).
    pub fn g_second(&self, t: f64) -> f64 {
        self.potential.dw(self.g(t))
    }

    /// g(y; t₁,…,t_N): (-1)^{i-1} g(y - tᵢ) on (tᵢ⁻, tᵢ⁺), the windows being
    /// bounded by the midpoints between consecutive translations.
    pub fn multilayer(&self, ts: &[f64], y: f64) -> Result<f64> {
        check_increasing(ts)?;
        let (i, sign) = window_of(ts, y);
        Ok(sign * self.g(y - ts[i]))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,g,gprime")?;
        for ((t, g), d) in self.nodes.iter().zip(&self.values).zip(&self.derivs) {
            writeln!(out, "{t},{g},{d}")?;
        }
        Ok(())
    }

    pub fn summary(&self) -> ProfileSummary {
        ProfileSummary {
            sigma0: self.sigma0,
            sigma0_energy_form: self.sigma0_energy,
            half_width: self.half_width,
            spacing: self.spacing,
            first_integral_residual: self.first_integral_residual,
            tail_rates: self.tail_rates,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileSummary {
    pub sigma0: f64,
    pub sigma0_energy_form: f64,
    pub half_width: f64,
    pub spacing: f64,
    pub first_integral_residual: f64,
    pub tail_rates: [f64; 2],
}

pub fn check_increasing(ts: &[f64]) -> Result<()> {
    if ts.is_empty() {
        return Err(Error::Argument("at least one translation is required".into()));
    }
    if ts.iter().any(|t| !t.is_finite()) || ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Argument(format!("translations must be strictly increasing, got {ts:?}")));
    }
    Ok(())
}

/// Index of the layer window containing `y` and the sign (-1)^{i} (0-based).
pub fn window_of(ts: &[f64], y: f64) -> (usize, f64) {
    let mut i = 0;
    while i + 1 < ts.len() && y >= 0.5 * (ts[i] + ts[i + 1]) {
        i += 1;
    }
    (i, if i % 2 == 0 { 1.0 } else { -1.0 })
}

/// Composite Simpson over an odd number of equally spaced samples.
fn simpson(h: f64, f: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = f.collect();
    let n = v.len();
    debug_assert!(n % 2 == 1);
    let mut s = v[0] + v[n - 1];
    for (k, x) in v.iter().enumerate().take(n - 1).skip(1) {
        s += if k % 2 == 1 { 4.0 * x } else { 2.0 * x };
    }
    s * h / 3.0
}
