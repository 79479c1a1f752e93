//! Double-well potentials with wells at -1 and +1.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::CubicSpline;

/// Absolute tolerance on the well values of a tabulated potential; within it
/// the table entry is snapped to exactly zero.
pub const WELL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// W(u) = (1 - u^2)^2 / 4.
    Quartic,
    Tabulated(CubicSpline),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
    curvatures: [f64; 2],
    even: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    Value,
    First,
    Second,
}

impl TryFrom<u8> for Order {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Order::Value),
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            _ => Err(Error::Argument(format!("derivative order {v} not in {{0,1,2}}"))),
        }
    }
}

impl Potential {
    pub fn quartic() -> Self {
        Self {
            kind: PotentialKind::Quartic,
            curvatures: [2.0, 2.0],
            even: true,
        }
    }

    /// Builds a tabulated potential. The table must contain the nodes -1 and
    /// +1; their values are snapped to zero if within [`WELL_TOLERANCE`].
    pub fn tabulated(mut u: Vec<f64>, mut w: Vec<f64>) -> Result<Self> {
        let well_index = |target: f64| u.iter().position(|&x| (x - target).abs() <= 1e-12);
        let (Some(lo), Some(hi)) = (well_index(-1.0), well_index(1.0)) else {
            return Err(Error::Potential("table must contain the wells u = -1 and u = +1".into()));
        };
        for i in [lo, hi] {
            if w.get(i).is_none_or(|v| v.abs() > WELL_TOLERANCE) {
                return Err(Error::Potential(format!("W({}) is not zero", u[i])));
            }
            w[i] = 0.0;
        }
        u[lo] = -1.0;
        u[hi] = 1.0;
        let spline = CubicSpline::not_a_knot(u, w)?;
        let curvatures = [spline.eval_all(-1.0)[2], spline.eval_all(1.0)[2]];
        let even = {
            let (k, v) = (spline.knots(), spline.values());
            let n = k.len();
            (0..n).all(|i| (k[i] + k[n - 1 - i]).abs() <= 1e-12 && (v[i] - v[n - 1 - i]).abs() <= 1e-14)
        };
        Ok(Self {
            kind: PotentialKind::Tabulated(spline),
            curvatures,
            even,
        })
    }

    /// Reads a two-column CSV with header `u,W`.
    pub fn from_csv_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, l)) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        break l;
                    }
                }
                None => return Err(Error::Parse { line: 1, msg: "empty potential table".into() }),
            }
        };
        let cols: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        if cols != ["u", "W"] {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header `u,W`, found `{}`", header.trim()),
            });
        }
        let mut u = Vec::new();
        let mut w = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                let s = s.ok_or_else(|| Error::Parse { line: idx + 1, msg: "missing column".into() })?;
                let v: f64 = s.trim().parse().map_err(|_| Error::Parse {
                    line: idx + 1,
                    msg: format!("not a number: `{}`", s.trim()),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse { line: idx + 1, msg: "non-finite value".into() });
                }
                Ok(v)
            };
            u.push(parse(parts.next())?);
            w.push(parse(parts.next())?);
            if parts.next().is_some() {
                return Err(Error::Parse { line: idx + 1, msg: "too many columns".into() });
            }
        }
        Self::tabulated(u, w)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(f))
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PotentialKind::Quartic => "quartic",
            PotentialKind::Tabulated(_) => "tabulated",
        }
    }

    pub fn well_locations(&self) -> [f64; 2] {
        [-1.0, 1.0]
    }

    /// W''(-1), W''(+1).
    pub fn well_curvatures(&self) -> [f64; 2] {
        self.curvatures
    }

    /// True when W(-u) = W(u), which makes the heteroclinic profile odd.
    pub fn is_even(&self) -> bool {
        self.even
    }

    #[inline]
    pub fn w(&self, u: f64) -> f64 {
        match &self.kind {
            PotentialKind::Quartic => {
                let a = 1.0 - u * u;
                0.25 * a * a
            }
            PotentialKind::Tabulated(s) => s.eval_all(u)[0],
        }
    }

    #[inline]
    pub fn dw(&self, u: f64) -> f64 {
        match &self.kind {
            PotentialKind::Quartic => u * u * u - u,
            PotentialKind::Tabulated(s) => s.eval_all(u)[1],
        }
    }

    #[inline]
    pub fn d2w(&self, u: f64) -> f64 {
        match &self.kind {
            PotentialKind::Quartic => 3.0 * u * u - 1.0,
            PotentialKind::Tabulated(s) => s.eval_all(u)[2],
        }
    }

    /// W evaluated at `side * (1 - s)`, i.e. at distance `s` from the well on
    /// the given side. Exact for the quartic even when `1 - s` rounds to 1.
    pub fn w_from_well(&self, side: f64, s: f64) -> f64 {
        match &self.kind {
            PotentialKind::Quartic => {
                let a = s * (2.0 - s);
                0.25 * a * a
            }
            PotentialKind::Tabulated(_) => self.w(side * (1.0 - s)),
        }
    }

    /// Checked evaluation; tabulated potentials reject arguments outside
    /// their table.
    pub fn evaluate(&self, u: f64, order: Order) -> Result<f64> {
        if let PotentialKind::Tabulated(s) = &self.kind {
            let (lo, hi) = s.range();
            if !(u >= lo && u <= hi) {
                return Err(Error::OutOfRange { value: u, lo, hi });
            }
        }
        Ok(match order {
            Order::Value => self.w(u),
            Order::First => self.dw(u),
            Order::Second => self.d2w(u),
        })
    }

    pub fn validate(&self, samples: usize, tol: f64) -> Result<ValidationReport> {
        if samples < 16 {
            return Err(Error::Argument("validation needs at least 16 samples".into()));
        }
        let mut checks = Vec::new();

        let well = self.w(-1.0).abs().max(self.w(1.0).abs());
        checks.push(Check {
            name: "wells".into(),
            passed: well <= tol,
            margin: tol - well,
        });

        let min_w = (1..samples)
            .map(|k| self.w(-1.0 + 2.0 * k as f64 / samples as f64))
            .fold(f64::INFINITY, f64::min);
        checks.push(Check {
            name: "positivity".into(),
            passed: min_w > 0.0,
            margin: min_w,
        });

        let min_curv = self.curvatures[0].min(self.curvatures[1]);
        checks.push(Check {
            name: "curvature".into(),
            passed: min_curv > 0.0,
            margin: min_curv,
        });

        let delta = 0.1;
        let per_side = (samples / 2).max(8);
        let mut min_conv = f64::INFINITY;
        for k in 0..=per_side {
            let s = delta * k as f64 / per_side as f64;
            min_conv = min_conv.min(self.d2w(-1.0 + s)).min(self.d2w(1.0 - s));
        }
        checks.push(Check {
            name: "convexity_near_wells".into(),
            passed: min_conv > 0.0,
            margin: min_conv,
        });

        Ok(ValidationReport { delta, checks })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Width of the neighborhoods of the wells checked for convexity.
    pub delta: f64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic_table(n: usize) -> (Vec<f64>, Vec<f64>) {
        let q = Potential::quartic();
        let u: Vec<f64> = (0..=n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect();
        let w = u.iter().map(|&x| q.w(x)).collect();
        (u, w)
    }

    #[test]
    fn quartic_values() {
        let p = Potential::quartic();
        assert_eq!(p.w(0.0), 0.25);
        assert_eq!(p.w(1.0), 0.0);
        assert_eq!(p.w(-1.0), 0.0);
        assert_eq!(p.d2w(1.0), 2.0);
        assert_eq!(p.d2w(-1.0), 2.0);
        assert_eq!(p.d2w(0.0), -1.0);
        assert!((p.evaluate(0.5, Order::First).unwrap() + 0.375).abs() < 1e-15);
        assert_eq!(p.evaluate(1.0, Order::Value).unwrap(), 0.0);
        assert!((p.evaluate(-0.3, Order::Second).unwrap() + 0.73).abs() < 1e-15);
    }

    #[test]
    fn order_dispatch_rejects_three() {
        assert!(Order::try_from(3).is_err());
        assert_eq!(Order::try_from(2).unwrap(), Order::Second);
    }

    #[test]
    fn quartic_validates() {
        let r = Potential::quartic().validate(64, 1e-12).unwrap();
        assert!(r.all_passed());
        assert!(r.checks.iter().all(|c| c.margin > 0.0));
    }

    #[test]
    fn too_few_samples() {
        assert!(Potential::quartic().validate(8, 1e-12).is_err());
    }

    #[test]
    fn tabulated_quartic_is_close() {
        let (u, w) = quartic_table(200);
        let p = Potential::tabulated(u, w).unwrap();
        assert!(p.is_even());
        for &x in &[-0.9, -0.31, 0.0, 0.5, 0.97] {
            assert!((p.w(x) - Potential::quartic().w(x)).abs() < 1e-9);
            assert!((p.dw(x) - Potential::quartic().dw(x)).abs() < 1e-6);
        }
        let [a, b] = p.well_curvatures();
        assert!((a - 2.0).abs() < 1e-3 && (b - 2.0).abs() < 1e-3);
        assert!(p.validate(64, 1e-12).unwrap().all_passed());
        assert!(matches!(p.evaluate(1.5, Order::Value), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn negative_dip_fails_positivity() {
        let mut u: Vec<f64> = (0..=100).map(|i| -1.0 + 0.02 * i as f64).collect();
        u.insert(100, 0.99);
        let mut w: Vec<f64> = u.iter().map(|&x| Potential::quartic().w(x)).collect();
        w[100] = -1e-6;
        let p = Potential::tabulated(u, w).unwrap();
        // Sample grid with 200 intervals hits u = 0.99 exactly.
        let r = p.validate(200, 1e-12).unwrap();
        assert!(!r.check("positivity").unwrap().passed);
    }

    #[test]
    fn flat_well_fails_curvature() {
        // W = (1 - u^2)^4 has W''(+-1) = 0.
        let u: Vec<f64> = (0..=100).map(|i| -1.0 + 0.02 * i as f64).collect();
        let w: Vec<f64> = u.iter().map(|&x| (1.0 - x * x).powi(4)).collect();
        let p = Potential::tabulated(u, w).unwrap();
        let r = p.validate(64, 1e-12).unwrap();
        assert!(!r.check("curvature").unwrap().passed);
    }

    #[test]
    fn table_without_wells_is_rejected() {
        let u: Vec<f64> = (0..10).map(|i| -0.9 + 0.2 * i as f64).collect();
        let w = vec![0.1; 10];
        assert!(matches!(Potential::tabulated(u, w), Err(Error::Potential(_))));
    }

    #[test]
    fn csv_round_trip() {
        let (u, w) = quartic_table(40);
        let mut text = String::from("u,W\n");
        for (a, b) in u.iter().zip(&w) {
            text.push_str(&format!("{a},{b}\n"));
        }
        let p = Potential::from_csv_reader(text.as_bytes()).unwrap();
        assert!((p.w(0.0) - 0.25).abs() < 1e-12);
        assert!(Potential::from_csv_reader("x,y\n1,2\n".as_bytes()).is_err());
        assert!(Potential::from_csv_reader("u,W\n1,abc\n".as_bytes()).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = Potential::quartic();
        let step = 1e-5;
        for k in 0..=80 {
            let u = -2.0 + 0.05 * k as f64;
            let fd = (p.w(u + step) - p.w(u - step)) / (2.0 * step);
            assert!((fd - p.dw(u)).abs() < 1e-8, "u = {u}");
        }
    }
}
