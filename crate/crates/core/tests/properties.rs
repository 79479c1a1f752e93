//! Property tests for invariants that hold for arbitrary inputs.

use aclab::field::{self, zero_contours};
use aclab::fitspec;
use aclab::io;
use aclab::spectral::GapProblem;
use aclab::{Field2D, Grid2D, Potential, Profile1D};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn quartic_profile() -> &'static Profile1D {
    static P: OnceLock<Profile1D> = OnceLock::new();
    P.get_or_init(|| Profile1D::solve(&Potential::quartic(), 30.0, 1e-12).unwrap())
}

fn wavy(grid: Grid2D, k: [f64; 4], phase: f64) -> Field2D {
    Field2D::from_fn(grid, |x, y| (k[0] * x + phase).sin() + (k[1] * y).cos() * (k[2] * x).sin() - k[3]).unwrap()
}

fn sorted_points(f: &Field2D) -> Vec<(i64, i64)> {
    let mut pts: Vec<(i64, i64)> = zero_contours(f)
        .iter()
        .flat_map(|c| c.points.iter().map(|&(x, y)| ((x * 1e9).round() as i64, (y * 1e9).round() as i64)))
        .collect();
    pts.sort_unstable();
    pts.dedup();
    pts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn zero_set_is_invariant_under_negation(
        k in prop::array::uniform4(0.2f64..1.5),
        phase in -3.0f64..3.0,
    ) {
        let grid = Grid2D::centered((0.0, 0.0), (8.0, 6.0), 0.25).unwrap();
        let f = wavy(grid, k, phase);
        let neg = f.map(|v| -v);
        prop_assert_eq!(sorted_points(&f), sorted_points(&neg));
    }

    #[test]
    fn misfit_is_nonnegative(
        a in 2.0f64..6.0,
        eps in -0.2f64..0.2,
        lo in 0.05f64..0.95,
        hi in 0.05f64..0.95,
        x in 4.0f64..9.0,
    ) {
        let p = quartic_profile();
        let grid = Grid2D::new((0.0, -10.0), 0.1, 101, 201).unwrap();
        let f = Field2D::from_fn(grid, |x, y| {
            (p.multilayer(&[-a, a], y).unwrap() + eps * (0.7 * x + y).sin()).clamp(-1.0, 1.0)
        })
        .unwrap();
        let v = fitspec::misfit(&f, p, x, &[-lo * x, hi * x], 1.0).unwrap();
        prop_assert!(v >= 0.0);
    }

    #[test]
    fn misfit_vanishes_on_the_model(a in 1.5f64..6.0, x in 7.0f64..9.5) {
        let p = quartic_profile();
        let grid = Grid2D::new((0.0, -10.0), 0.05, 201, 401).unwrap();
        let f = Field2D::from_fn(grid, |_, y| p.multilayer(&[-a, a], y).unwrap()).unwrap();
        let x = (x / 0.05).round() * 0.05;
        let v = fitspec::misfit(&f, p, x, &[-a, a], 1.0).unwrap();
        prop_assert!(v <= 1e-12, "F = {}", v);
    }

    #[test]
    fn log_linear_fit_recovers_exact_rates(c in 0.05f64..3.0, pre in 1e-3f64..1e3, x0 in -5.0f64..5.0) {
        let xs: Vec<f64> = (0..25).map(|k| x0 + 0.3 * k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| pre * (-c * x).exp()).collect();
        let (rate, prefactor, r2) = fitspec::fit_log_linear(&xs, &ys).unwrap();
        prop_assert!((rate - c).abs() <= 1e-9 * c.max(1.0));
        prop_assert!((prefactor / pre - 1.0).abs() <= 1e-8);
        prop_assert!(r2 > 1.0 - 1e-12);
    }

    #[test]
    fn field_csv_round_trip_is_bit_exact(
        x0 in -50.0f64..50.0,
        y0 in -50.0f64..50.0,
        h in 0.01f64..0.5,
        nx in 8usize..30,
        ny in 8usize..30,
        seed in any::<u64>(),
    ) {
        let grid = Grid2D::new((x0, y0), h, nx, ny).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = Field2D::new(grid, samples).unwrap();
        let mut buf = Vec::new();
        io::write_field_csv(&f, &mut buf).unwrap();
        let back = io::read_field_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.samples(), f.samples());
        prop_assert_eq!(back.grid().dims(), f.grid().dims());
        for k in 0..grid.len() {
            prop_assert_eq!(back.grid().point(k), f.grid().point(k));
        }
    }

    #[test]
    fn tabulated_quartic_is_a_valid_double_well(n in 41usize..400) {
        let q = Potential::quartic();
        let us: Vec<f64> = (0..n).map(|k| -1.0 + 2.0 * k as f64 / (n - 1) as f64).collect();
        let ws: Vec<f64> = us.iter().map(|&u| q.w(u)).collect();
        let t = Potential::tabulated(us, ws).unwrap();
        for k in 1..100 {
            let u = -1.0 + k as f64 / 50.0;
            prop_assert!(t.w(u) > 0.0);
        }
    }

    #[test]
    fn laplacian_is_symmetric_as_a_bilinear_form(seed in any::<u64>()) {
        let grid = Grid2D::centered((0.0, 0.0), (3.0, 3.0), 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let interior = Field2D::constant(grid, 0.0).unwrap().interior_mask();
        let mut rand_field = || {
            let s: Vec<f64> = (0..grid.len()).map(|k| if interior[k] { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect();
            Field2D::new(grid, s).unwrap()
        };
        let (a, b) = (rand_field(), rand_field());
        let (la, lb) = (field::laplacian(&a), field::laplacian(&b));
        let dot = |u: &Field2D, v: &Field2D| -> f64 {
            (0..grid.len()).filter(|&k| interior[k]).map(|k| u.samples()[k] * v.samples()[k]).sum()
        };
        let (ab, ba) = (dot(&la, &b), dot(&a, &lb));
        prop_assert!((ab - ba).abs() <= 1e-9 * ab.abs().max(1.0));
    }
}

#[test]
fn rayleigh_quotient_bounded_below_on_complement_of_translation_mode() {
    let p = quartic_profile();
    let gp = GapProblem::new(p, &Potential::quartic(), 10.0, 10.0, 0.02).unwrap();
    let mu = gp.constrained_min().unwrap();
    let n = gp.nodes().len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for trial in 0..100 {
        let width = rng.gen_range(0.3..5.0);
        let center = rng.gen_range(-6.0..6.0);
        let v: Vec<f64> = gp
            .nodes()
            .iter()
            .map(|&t| rng.gen_range(-1.0..1.0) * 0.1 + (-(t - center).powi(2) / width).exp())
            .collect();
        assert_eq!(v.len(), n);
        let w = gp.project(&v);
        assert!(gp.inner(&w, gp.gprime()).abs() <= 1e-10 * gp.inner(&w, &w).sqrt());
        let r = gp.rayleigh(&w);
        assert!(r >= mu - 1e-9, "trial {trial}: Rayleigh quotient {r} below {mu}");
    }
}
