//! Not-a-knot cubic spline used for tabulated potentials.
//!
//! Second derivatives at the end knots follow the data (unlike the natural
//! spline, which pins them to zero), so curvature at the wells is meaningful.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivative at each knot.
    moments: Vec<f64>,
}

impl CubicSpline {
    pub fn not_a_knot(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n != values.len() {
            return Err(Error::Argument("knot and value counts differ".into()));
        }
        if n < 5 {
            return Err(Error::Argument("a not-a-knot spline needs at least 5 knots".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Argument("knots must be strictly increasing".into()));
        }
        if knots.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Argument("knots and values must be finite".into()));
        }
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|i| (values[i + 1] - values[i]) / h[i]).collect();

        // Interior rows: h[i-1] M[i-1] + 2(h[i-1]+h[i]) M[i] + h[i] M[i+1] = 6 (slope[i] - slope[i-1]).
        // Not-a-knot eliminates M[0] and M[n-1]:
        //   M[0]   = M[1] (1 + h0/h1) - (h0/h1) M[2]
        //   M[n-1] = M[n-2] (1 + hb/ha) - (hb/ha) M[n-3], ha = h[n-3], hb = h[n-2]
        let m = n - 2;
        let mut sub = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut sup = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for r in 0..m {
            let i = r + 1;
            sub[r] = h[i - 1];
            diag[r] = 2.0 * (h[i - 1] + h[i]);
            sup[r] = h[i];
            rhs[r] = 6.0 * (slope[i] - slope[i - 1]);
        }
        let (h0, h1) = (h[0], h[1]);
        diag[0] += h0 * (1.0 + h0 / h1);
        sup[0] -= h0 * h0 / h1;
        let (ha, hb) = (h[n - 3], h[n - 2]);
        diag[m - 1] += hb * (1.0 + hb / ha);
        sub[m - 1] -= hb * hb / ha;
        let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
        let mut moments = vec![0.0; n];
        moments[1..n - 1].copy_from_slice(&inner);
        moments[0] = moments[1] * (1.0 + h0 / h1) - (h0 / h1) * moments[2];
        moments[n - 1] = moments[n - 2] * (1.0 + hb / ha) - (hb / ha) * moments[n - 3];
        Ok(Self { knots, values, moments })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn interval(&self, x: f64) -> usize {
        let n = self.knots.len();
        match self.knots.binary_search_by(|k| k.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value, first and second derivative at `x`; outside the knot range the
    /// end cubic pieces are continued.
    pub fn eval_all(&self, x: f64) -> [f64; 3] {
        let i = self.interval(x);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let dd = a * m0 + b * m1;
        [v, d, dd]
    }
}

/// Thomas algorithm. Fails on a vanishing pivot.
pub(crate) fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 {
        return Err(Error::LinearSolver("zero pivot in tridiagonal solve".into()));
    }
    c[0] = sup[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - sub[i] * c[i - 1];
        if piv == 0.0 {
            return Err(Error::LinearSolver("zero pivot in tridiagonal solve".into()));
        }
        c[i] = if i + 1 < n { sup[i] / piv } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics_exactly() {
        let knots: Vec<f64> = (0..9).map(|i| -1.0 + 0.25 * i as f64 + 0.01 * (i % 3) as f64).collect();
        let f = |x: f64| 2.0 * x * x * x - x * x + 0.5 * x - 3.0;
        let values = knots.iter().map(|&x| f(x)).collect();
        let s = CubicSpline::not_a_knot(knots, values).unwrap();
        for &x in &[-0.93, -0.2, 0.0, 0.41, 0.99] {
            let [v, d, dd] = s.eval_all(x);
            assert!((v - f(x)).abs() < 1e-12);
            assert!((d - (6.0 * x * x - 2.0 * x + 0.5)).abs() < 1e-10);
            assert!((dd - (12.0 * x - 2.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_unsorted_knots() {
        let r = CubicSpline::not_a_knot(vec![0.0, 2.0, 1.0, 3.0, 4.0], vec![0.0; 5]);
        assert!(r.is_err());
    }
}
