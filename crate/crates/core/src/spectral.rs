//! Spectra of the linearized operator `-Δ + W''(u)`: Morse index by inertia,
//! the lowest eigenvalue outside a disk, and the one-dimensional gap above
//! the translation mode of the heteroclinic profile.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Field2D, Grid2D};
use crate::potentials::Potential;
use crate::profile::Profile1D;
use crate::sparse::{factor_with_retry, nested_dissection, Factor, SparseSym, Symbolic};

const ND_LEAF: usize = 64;
const EIGEN_TOL: f64 = 1e-8;
const MAX_FACTORIZATIONS: usize = 40;
const INNER_ITERATIONS: usize = 25;
const MARGIN_ITERATIONS: usize = 300;

/// `-Δ_h + W''(u)` on the unknowns of a region, zero Dirichlet data outside.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    grid: Grid2D,
    nodes: Vec<usize>,
    matrix: SparseSym,
    symbolic: Symbolic,
}

impl LinearizedOperator {
    /// Unknowns are the nodes of `region` whose four neighbours are active.
    pub fn assemble(f: &Field2D, p: &Potential, region: &[bool]) -> Result<Self> {
        let grid = *f.grid();
        if region.len() != grid.len() {
            return Err(Error::Argument("region mask does not match the grid".into()));
        }
        let interior = f.interior_mask();
        let mut number = vec![u32::MAX; grid.len()];
        let mut nodes = Vec::new();
        for k in 0..grid.len() {
            if region[k] && interior[k] {
                number[k] = nodes.len() as u32;
                nodes.push(k);
            }
        }
        if nodes.is_empty() {
            return Err(Error::Argument("region contains no interior unknowns".into()));
        }
        let h2 = grid.spacing().powi(2);
        let (nx, _) = grid.dims();
        let mut entries = Vec::with_capacity(3 * nodes.len());
        for (r, &k) in nodes.iter().enumerate() {
            entries.push((r, r, 4.0 / h2 + p.d2w(f.samples()[k])));
            for q in [k + 1, k + nx] {
                if q < grid.len() && number[q] != u32::MAX {
                    entries.push((r, number[q] as usize, -1.0 / h2));
                }
            }
        }
        let matrix = SparseSym::from_entries(nodes.len(), &entries)?;
        let coords: Vec<(i32, i32)> = nodes
            .iter()
            .map(|&k| {
                let (i, j) = grid.coords(k);
                (i as i32, j as i32)
            })
            .collect();
        let symbolic = Symbolic::analyze(&matrix, nested_dissection(&coords, ND_LEAF))?;
        Ok(LinearizedOperator { grid, nodes, matrix, symbolic })
    }

    pub fn matrix(&self) -> &SparseSym {
        &self.matrix
    }

    pub fn unknowns(&self) -> usize {
        self.nodes.len()
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Grid index of each unknown.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn factor(&self, shift: f64) -> Result<Factor> {
        factor_with_retry(&self.symbolic, &self.matrix, shift)
    }

    /// Number of eigenvalues below `shift`.
    pub fn count_below(&self, shift: f64) -> Result<usize> {
        Ok(self.factor(shift)?.inertia().negative)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Deterministic start vector with no special symmetry.
fn start_vector(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|k| 1.0 + 0.5 * ((k as f64 + 1.0) * 0.618_033_988_75).fract()).collect();
    normalize(&mut v);
    v
}

/// Rayleigh quotient and residual norm of a unit vector.
fn rayleigh_residual(a: &SparseSym, x: &[f64]) -> (f64, f64) {
    let ax = a.mul_vec(x);
    let rho = dot(x, &ax);
    let r = ax.iter().zip(x).map(|(v, w)| (v - rho * w).powi(2)).sum::<f64>().sqrt();
    (rho, r)
}

fn gershgorin_lower(a: &SparseSym) -> f64 {
    let mut off = vec![0.0; a.order()];
    for ((i, j), v) in a.entry_positions().zip(a.values()) {
        if i != j {
            off[j] += v.abs();
        }
    }
    a.diagonal().iter().zip(&off).map(|(d, o)| d - o).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LowestEigenvalue {
    pub value: f64,
    /// Certified by an inertia count: no eigenvalue lies below this.
    pub lower_bound: f64,
    pub residual: f64,
    pub factorizations: usize,
}

/// Lowest eigenvalue by inverse iteration with shifts kept below the
/// spectrum (each shift is certified by an inertia count).
pub fn lowest_eigenvalue(op: &LinearizedOperator) -> Result<LowestEigenvalue> {
    let a = &op.matrix;
    let mut certified = gershgorin_lower(a) - 1e-3;
    let mut shift = certified;
    let mut x = start_vector(a.order());
    let (mut rho, mut r) = rayleigh_residual(a, &x);
    for factorizations in 1..=MAX_FACTORIZATIONS {
        let f = op.factor(shift)?;
        if f.inertia().negative > 0 {
            shift = 0.5 * (certified + shift);
            continue;
        }
        certified = shift;
        let tol = EIGEN_TOL * rho.abs().max(1.0);
        if r <= tol {
            return Ok(LowestEigenvalue { value: rho, lower_bound: certified, residual: r, factorizations });
        }
        for _ in 0..INNER_ITERATIONS {
            x = f.solve(&x);
            normalize(&mut x);
            (rho, r) = rayleigh_residual(a, &x);
            if r <= tol {
                break;
            }
        }
        // An eigenvalue lies within r of rho; step the shift just below it.
        let next = rho - 2.0 * r - tol;
        shift = if next > certified { next } else { certified };
    }
    Err(Error::NonConvergence {
        iterations: MAX_FACTORIZATIONS,
        residual: r,
        context: "lowest eigenvalue by shifted inverse iteration".into(),
    })
}

/// Eigenvalue nearest zero by unshifted inverse iteration; returns the
/// Rayleigh quotient and its residual.
fn nearest_zero(f: &Factor, a: &SparseSym) -> (f64, f64) {
    let mut x = start_vector(a.order());
    let (mut rho, mut r) = rayleigh_residual(a, &x);
    for _ in 0..MARGIN_ITERATIONS {
        x = f.solve(&x);
        normalize(&mut x);
        (rho, r) = rayleigh_residual(a, &x);
        if r <= EIGEN_TOL * rho.abs().max(1.0) {
            break;
        }
    }
    (rho, r)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MorseIndex {
    pub index: usize,
    /// Magnitude of the eigenvalue nearest zero.
    pub margin: f64,
    pub margin_residual: f64,
    /// Diagonal shift applied after a zero pivot, else 0.
    pub shift: f64,
    pub unknowns: usize,
}

/// Negative eigenvalue count of the Dirichlet problem on `region` (the whole
/// active domain when `None`). Dirichlet truncation gives a lower bound for
/// the index of the entire solution.
pub fn morse_index_2d(f: &Field2D, p: &Potential, region: Option<&[bool]>) -> Result<MorseIndex> {
    let full;
    let region = match region {
        Some(r) => r,
        None => {
            full = f.mask().to_vec();
            &full
        }
    };
    let op = LinearizedOperator::assemble(f, p, region)?;
    let fac = op.factor(0.0)?;
    let (rho, residual) = nearest_zero(&fac, &op.matrix);
    Ok(MorseIndex {
        index: fac.inertia().negative,
        margin: rho.abs(),
        margin_residual: residual,
        shift: fac.shift(),
        unknowns: op.unknowns(),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExteriorStability {
    pub radius: f64,
    pub min_eigenvalue: f64,
    pub lower_bound: f64,
    pub residual: f64,
    pub unknowns: usize,
}

/// Lowest Dirichlet eigenvalue on the active domain minus the closed disk of
/// `radius` about the origin.
pub fn stability_outside_compact(f: &Field2D, p: &Potential, radius: f64) -> Result<ExteriorStability> {
    let grid = f.grid();
    let (x0, x1, y0, y1) = grid.bounds();
    if !(radius >= 0.0) || radius >= x1.min(-x0).min(y1).min(-y0) {
        return Err(Error::Argument(format!("disk of radius {radius} does not fit inside the domain")));
    }
    let region: Vec<bool> = (0..grid.len())
        .map(|k| {
            let (x, y) = grid.point(k);
            radius == 0.0 || x.hypot(y) > radius
        })
        .collect();
    let op = LinearizedOperator::assemble(f, p, &region)?;
    let low = lowest_eigenvalue(&op)?;
    Ok(ExteriorStability {
        radius,
        min_eigenvalue: low.value,
        lower_bound: low.lower_bound,
        residual: low.residual,
        unknowns: op.unknowns(),
    })
}

/// The form `∫ |v'|² + W''(g) v²` on `(-L⁻, L⁺)` with P1 elements, free ends
/// and lumped mass, in the symmetric scaling `M^{-1/2} A M^{-1/2}`.
#[derive(Debug, Clone)]
pub struct GapProblem {
    nodes: Vec<f64>,
    mass: Vec<f64>,
    /// `A` (stiffness plus potential), tridiagonal.
    diag: Vec<f64>,
    off: Vec<f64>,
    gprime: Vec<f64>,
    scaled: SparseSym,
    bordered: SparseSym,
    sym_scaled: Symbolic,
    sym_bordered: Symbolic,
    warnings: Vec<String>,
}

impl GapProblem {
    pub fn new(prof: &Profile1D, p: &Potential, l_minus: f64, l_plus: f64, h: f64) -> Result<Self> {
        if p != prof.potential() {
            return Err(Error::Argument("profile was built for a different potential".into()));
        }
        if !(l_minus >= 5.0 && l_plus >= 5.0) {
            return Err(Error::Argument(format!("interval ends must be at least 5, got ({l_minus}, {l_plus})")));
        }
        if !(h > 0.0 && h <= 0.05) {
            return Err(Error::Argument(format!("spacing {h} must lie in (0, 0.05]")));
        }
        let mut warnings = Vec::new();
        let rate = prof.tail_rates().iter().copied().fold(0.0, f64::max);
        if h * rate > 0.1 {
            warnings.push(format!("spacing {h} is coarse relative to tail rate {rate:.3}"));
        }
        let cells = ((l_minus + l_plus) / h).round() as usize;
        let h = (l_minus + l_plus) / cells as f64;
        let n = cells + 1;
        let nodes: Vec<f64> = (0..n).map(|k| -l_minus + k as f64 * h).collect();
        let mass: Vec<f64> = (0..n).map(|k| if k == 0 || k == n - 1 { 0.5 * h } else { h }).collect();
        let diag: Vec<f64> = (0..n)
            .map(|k| {
                let stiff = if k == 0 || k == n - 1 { 1.0 / h } else { 2.0 / h };
                stiff + mass[k] * p.d2w(prof.g(nodes[k]))
            })
            .collect();
        let off = vec![-1.0 / h; n - 1];
        let gprime: Vec<f64> = nodes.iter().map(|&t| prof.g_prime(t)).collect();

        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(3 * n + 1);
        for k in 0..n {
            entries.push((k, k, diag[k] / mass[k]));
            if k + 1 < n {
                entries.push((k, k + 1, off[k] / (mass[k] * mass[k + 1]).sqrt()));
            }
        }
        let scaled = SparseSym::from_entries(n, &entries)?;
        let q: Vec<f64> = (0..n).map(|k| mass[k].sqrt() * gprime[k]).collect();
        let qn = dot(&q, &q).sqrt();
        for (k, v) in q.iter().enumerate() {
            entries.push((k, n, v / qn));
        }
        let bordered = SparseSym::from_entries(n + 1, &entries)?;
        let sym_scaled = Symbolic::analyze(&scaled, (0..n as u32).collect())?;
        let sym_bordered = Symbolic::analyze(&bordered, (0..=n as u32).collect())?;
        Ok(GapProblem { nodes, mass, diag, off, gprime, scaled, bordered, sym_scaled, sym_bordered, warnings })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `vᵀ A v / vᵀ M v`.
    pub fn rayleigh(&self, v: &[f64]) -> f64 {
        let n = self.nodes.len();
        let mut num = 0.0;
        for k in 0..n {
            num += self.diag[k] * v[k] * v[k];
            if k + 1 < n {
                num += 2.0 * self.off[k] * v[k] * v[k + 1];
            }
        }
        let den: f64 = v.iter().zip(&self.mass).map(|(x, m)| m * x * x).sum();
        num / den
    }

    /// Lumped inner product `Σ m_k v_k w_k`.
    pub fn inner(&self, v: &[f64], w: &[f64]) -> f64 {
        v.iter().zip(w).zip(&self.mass).map(|((a, b), m)| m * a * b).sum()
    }

    /// Removes the component along the sampled `g'`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let c = self.inner(v, &self.gprime) / self.inner(&self.gprime, &self.gprime);
        v.iter().zip(&self.gprime).map(|(a, g)| a - c * g).collect()
    }

    pub fn gprime(&self) -> &[f64] {
        &self.gprime
    }

    fn bounds(&self) -> (f64, f64) {
        let lo = gershgorin_lower(&self.scaled);
        let hi = self.scaled.diagonal().iter().fold(f64::NEG_INFINITY, |m, &d| m.max(d)) + 4.0 / self.step();
        (lo - 1.0, hi)
    }

    fn step(&self) -> f64 {
        self.nodes[1] - self.nodes[0]
    }

    fn bisect(&self, mut below: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
        let (mut lo, mut hi) = self.bounds();
        while hi - lo > 1e-13 * hi.abs().max(1.0) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if below(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Smallest eigenvalue of the unconstrained problem.
    pub fn unconstrained_min(&self) -> Result<f64> {
        self.bisect(|s| Ok(factor_with_retry(&self.sym_scaled, &self.scaled, s)?.inertia().negative > 0))
    }

    /// Eigenvector (nodal values) of the smallest unconstrained eigenvalue.
    pub fn unconstrained_mode(&self, lambda: f64) -> Result<Vec<f64>> {
        let f = factor_with_retry(&self.sym_scaled, &self.scaled, lambda - 1e-9 * lambda.abs().max(1.0))?;
        let mut w = start_vector(self.nodes.len());
        for _ in 0..5 {
            w = f.solve(&w);
            normalize(&mut w);
        }
        Ok(w.iter().zip(&self.mass).map(|(x, m)| x / m.sqrt()).collect())
    }

    /// Smallest eigenvalue on the lumped-orthogonal complement of `g'`,
    /// from the inertia of the bordered matrix `[[B - s, q], [qᵀ, 0]]`
    /// (one more negative eigenvalue than the compressed operator).
    pub fn constrained_min(&self) -> Result<f64> {
        let n = self.nodes.len();
        let corner = self.bordered.find(n, n).expect("bordered matrix stores its diagonal");
        let mut b = self.bordered.clone();
        self.bisect(|s| {
            b.values_mut()[corner] = s;
            Ok(factor_with_retry(&self.sym_bordered, &b, s)?.inertia().negative > 1)
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GapResult {
    #[serde(rename = "L_minus")]
    pub l_minus: f64,
    #[serde(rename = "L_plus")]
    pub l_plus: f64,
    pub h: f64,
    pub mu_hat: f64,
    pub unconstrained_min: f64,
    /// Lumped correlation of the lowest mode with `g'`.
    pub zero_mode_correlation: f64,
    pub warnings: Vec<String>,
}

pub fn constrained_gap(prof: &Profile1D, p: &Potential, l_minus: f64, l_plus: f64, h: f64) -> Result<GapResult> {
    let gp = GapProblem::new(prof, p, l_minus, l_plus, h)?;
    let mu_hat = gp.constrained_min()?;
    let lambda = gp.unconstrained_min()?;
    let mode = gp.unconstrained_mode(lambda)?;
    let g = gp.gprime();
    let corr = gp.inner(&mode, g).abs() / (gp.inner(&mode, &mode) * gp.inner(g, g)).sqrt();
    Ok(GapResult {
        l_minus,
        l_plus,
        h,
        mu_hat,
        unconstrained_min: lambda,
        zero_mode_correlation: corr,
        warnings: gp.warnings().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn profile() -> Profile1D {
        Profile1D::solve(&Potential::quartic(), 30.0, 1e-12).unwrap()
    }

    #[test]
    fn constant_states() {
        let q = Potential::quartic();
        let g = Grid2D::centered((0.0, 0.0), (20.0, 20.0), 0.25).unwrap();
        let one = Field2D::constant(g, 1.0).unwrap();
        let m = morse_index_2d(&one, &q, None).unwrap();
        assert_eq!(m.index, 0);
        let lowest = 2.0 + (4.0 / 0.0625) * (1.0 - (PI * 0.25 / 20.0).cos());
        assert!((m.margin - lowest).abs() < 1e-6, "{}", m.margin);

        let zero = Field2D::constant(g, 0.0).unwrap();
        let m = morse_index_2d(&zero, &q, None).unwrap();
        assert!(m.index >= 1);
        let ext = stability_outside_compact(&zero, &q, 0.0).unwrap();
        let discrete = -1.0 + (4.0 / 0.0625) * (1.0 - (PI * 0.25 / 20.0).cos());
        assert!((ext.min_eigenvalue - discrete).abs() < 1e-7);
        assert!((ext.min_eigenvalue - (2.0 * PI * PI / 400.0 - 1.0)).abs() < 1e-3);
        assert!(ext.lower_bound <= ext.min_eigenvalue);
    }

    #[test]
    fn layer_is_stable() {
        let q = Potential::quartic();
        let p = profile();
        let g = Grid2D::centered((0.0, 0.0), (10.0, 16.0), 0.1).unwrap();
        let f = Field2D::from_fn(g, |_, y| p.g(y)).unwrap();
        assert_eq!(morse_index_2d(&f, &q, None).unwrap().index, 0);
        let ext = stability_outside_compact(&f, &q, 2.0).unwrap();
        assert!(ext.min_eigenvalue > 0.0);
        let matrix = LinearizedOperator::assemble(&f, &q, f.mask()).unwrap();
        assert!(matrix.matrix().is_symmetric(0.0));
    }

    #[test]
    fn gap_of_quartic() {
        let q = Potential::quartic();
        let p = profile();
        let r = constrained_gap(&p, &q, 20.0, 20.0, 0.01).unwrap();
        assert!(r.unconstrained_min.abs() < 1e-3, "{}", r.unconstrained_min);
        assert!(r.zero_mode_correlation > 0.999);
        assert!((r.mu_hat - 1.5).abs() < 0.01, "{}", r.mu_hat);
        assert!(constrained_gap(&p, &q, 4.0, 20.0, 0.01).is_err());
        assert!(constrained_gap(&p, &q, 20.0, 20.0, 0.1).is_err());
    }
}
