//! Translation fit on solved multi-layer fields.

use std::f64::consts::PI;

use aclab::fitspec::{self, FitTrajectory};
use aclab::solver::{self, BoundaryKind, BoundarySpec, RayEnd, SolveOptions};
use aclab::{Field2D, Grid2D, Potential, Profile1D};

/// Two layers leaving the origin at ±30° to the right (and mirrored to the
/// left), oriented like the multilayer model on the right half.
fn diverging_pair(q: &Potential, p: &Profile1D) -> Field2D {
    let d = 30f64.to_radians();
    let ends = vec![
        RayEnd { angle: -d, sign: 1.0 },
        RayEnd { angle: d, sign: -1.0 },
        RayEnd { angle: PI - d, sign: 1.0 },
        RayEnd { angle: PI + d, sign: -1.0 },
    ];
    let grid = Grid2D::centered((0.0, 0.0), (30.0, 30.0), 0.1).unwrap();
    let spec = BoundarySpec::new(BoundaryKind::Multiend { ends }, p.clone()).unwrap();
    let (f, d) = solver::solve_dirichlet(&grid, &spec, q, &SolveOptions::default()).unwrap();
    assert!(d.residual < 1e-8);
    f
}

fn middle_third(t: &FitTrajectory) -> std::ops::Range<usize> {
    let n = t.xs.len();
    n / 3..2 * n / 3
}

#[test]
fn diverging_layers_fit_and_separate() {
    let q = Potential::quartic();
    let p = Profile1D::solve(&q, 30.0, 1e-12).unwrap();
    let f = diverging_pair(&q, &p);
    let set = fitspec::extract_interfaces(&f, 3.0, 14.9).unwrap();
    assert_eq!(set.count(), 2);
    let traj = fitspec::trajectory(&f, &p, &set, 1.0).unwrap();
    assert!(traj.converged.iter().all(|&c| c));

    let mid = middle_third(&traj);
    let seps: Vec<f64> = traj.separations[mid.clone()].iter().map(|s| s[0]).collect();
    assert!(seps.windows(2).all(|w| w[1] >= w[0]), "separation decreases somewhere in {seps:?}");

    let gap = |c: usize| {
        let heights = set.heights_at(set.xs.iter().position(|&x| x == traj.xs[c]).unwrap());
        heights.iter().zip(&traj.ts[c]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let first = gap(0);
    let mid_worst = mid.clone().map(gap).fold(0.0, f64::max);
    assert!(mid_worst < first / 10.0, "|t - f| {first} at the start, {mid_worst} in the middle");

    for c in mid.clone() {
        assert!(traj.hessian_diagonal_min[c] >= p.sigma0(), "column {c}: {}", traj.hessian_diagonal_min[c]);
        let d = fitspec::misfit_derivatives(&f, &p, traj.xs[c], &traj.ts[c], 1.0).unwrap();
        let g = d.gradient.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(g <= 1e-9, "column {c}: gradient {g}");
    }

    let offd: Vec<f64> = mid.clone().map(|c| traj.hessian_offdiagonal_max[c]).collect();
    let (rate, _, r2) = fitspec::fit_log_linear(&seps, &offd).unwrap();
    assert!(rate > 0.0 && r2 > 0.9, "off-diagonal decay rate {rate}, R2 {r2}");
}

#[test]
fn parallel_layers_on_outflow_strip() {
    let q = Potential::quartic();
    let p = Profile1D::solve(&q, 30.0, 1e-12).unwrap();
    let h = 0.1;
    let grid = Grid2D::new((0.0, -10.0), h, 121, 201).unwrap();
    let spec = BoundarySpec::new(BoundaryKind::Multilayer { ts: vec![-5.0, 5.0] }, p.clone()).unwrap();
    let opts = SolveOptions { outflow: true, ..SolveOptions::default() };
    let (f, _) = solver::solve_dirichlet(&grid, &spec, &q, &opts).unwrap();
    let set = fitspec::extract_interfaces(&f, 0.5, 11.9).unwrap();
    let traj = fitspec::trajectory(&f, &p, &set, 2.0).unwrap();
    for c in middle_third(&traj) {
        let (a, b) = (traj.ts[c][0], traj.ts[c][1]);
        assert!((a + 5.0).abs() < 0.01 && (b - 5.0).abs() < 0.01, "x = {}: {a}, {b}", traj.xs[c]);
        assert!((a + b).abs() < 1e-6, "symmetric data gives symmetric translations");
        let hv = traj.hamiltonian[c];
        assert!((hv - 2.0 * p.sigma0()).abs() < 0.01 * p.sigma0(), "H = {hv}");
    }
}

#[test]
fn single_layer_far_field_rate() {
    let q = Potential::quartic();
    let p = Profile1D::solve(&q, 30.0, 1e-12).unwrap();
    let grid = Grid2D::centered((0.0, 0.0), (20.0, 20.0), 0.05).unwrap();
    let spec = BoundarySpec::new(BoundaryKind::Layer { t: 0.0 }, p.clone()).unwrap();
    let (f, _) = solver::solve_dirichlet(&grid, &spec, &q, &SolveOptions::default()).unwrap();
    let fit = fitspec::far_field_decay(&f, PI / 2.0, 2.0, 8.0, 60, 1e-10).unwrap();
    let rate = fit.rate.unwrap();
    assert!((rate - 2f64.sqrt()).abs() < 0.05, "rate {rate}");
    assert!(fit.r2.unwrap() > 0.99);
}
