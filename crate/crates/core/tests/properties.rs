use std::path::Path;

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use resolvent_lab::cli::config::{ExperimentConfig, Family};
use resolvent_lab::cli::report::format_real;
use resolvent_lab::energymethod::hardy_check;
use resolvent_lab::model::{make_grid, PotentialSpec, RepulsiveWeight};
use resolvent_lab::sector::{adjoint_solve, eigendecompose, relative_residual, solve_shifted, SectorOperator};
use resolvent_lab::specfun::{hs_finite, schur_bound};
use resolvent_lab::tridiag::SymTridiag;
use resolvent_lab::verifier::weighted_sector_norm;
use resolvent_lab::wave::{bump, conserved_energy, Propagator};

fn tridiag() -> impl Strategy<Value = SymTridiag> {
    (2usize..120).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(-3.0..3.0f64, n - 1),
        )
            .prop_map(|(d, o)| SymTridiag::new(d, o))
    })
}

fn shift() -> impl Strategy<Value = Complex64> {
    (-6.0..6.0f64, 1e-3..3.0f64, any::<bool>()).prop_map(|(re, im, neg)| Complex64::new(re, if neg { -im } else { im }))
}

fn rhs(n: usize, seed: u64) -> Vec<Complex64> {
    (0..n)
        .map(|i| {
            let x = (i as f64 + 1.0) * (seed as f64 * 0.37 + 1.3);
            Complex64::new(x.sin(), (1.7 * x).cos())
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shifted_solve_is_backward_stable(t in tridiag(), z in shift(), seed in 0u64..1000) {
        let f = rhs(t.len(), seed);
        let u = solve_shifted(&t, z, &f).unwrap();
        prop_assert!(relative_residual(&t, z, &u, &f) <= 1e-13);
    }

    #[test]
    fn adjoint_solve_is_conjugate_shift(t in tridiag(), z in shift(), seed in 0u64..1000) {
        let g = rhs(t.len(), seed);
        let a = adjoint_solve(&t, z, &g).unwrap();
        let b = solve_shifted(&t, z.conj(), &g).unwrap();
        let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn weighted_norm_below_inverse_distance(t in tridiag(), z in shift(), w in 0.05..1.0f64) {
        let n = t.len();
        let w1: Vec<f64> = (0..n).map(|i| w.powf(1.0 + (i % 3) as f64)).collect();
        let w2 = vec![w; n];
        let sn = weighted_sector_norm(&t, z, &w1, &w2, 1).unwrap();
        prop_assert!(sn.value > 0.0);
        prop_assert!(sn.value <= (1.0 + 1e-9) / z.im.abs());
    }

    #[test]
    fn repulsive_weight_is_increasing(c_v in 0.1..3.0f64, delta in 0.05..0.95f64, r in 0.0..1e3f64, dr in 1e-3..10.0f64) {
        let w = RepulsiveWeight::new(c_v, delta).unwrap();
        let (a, b) = (w.value(r), w.value(r + dr));
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(b >= a);
        prop_assert!(w.derivative(r) > 0.0);
    }

    #[test]
    fn reals_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(format_real(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn hardy_holds_for_gaussians(b in 0.1..5.0f64, q in 0.0..3.0f64, n in 3usize..6) {
        let u = |r: f64| (1.0 + q * r * r) * (-b * r * r).exp();
        let du = |r: f64| (2.0 * q * r - 2.0 * b * r * (1.0 + q * r * r)) * (-b * r * r).exp();
        let pair = hardy_check(u, du, n, 12.0 / b.sqrt());
        prop_assert!(pair.lhs < pair.rhs);
    }

    #[test]
    fn hs_verdict_symmetric(s in 0.0..5.0f64, t in 0.0..5.0f64, p in 0.0..4.0f64) {
        prop_assert_eq!(hs_finite(s, t, p, 3), hs_finite(t, s, p, 3));
    }

    #[test]
    fn schur_dominates_spectral_norm(r in 1usize..9, c in 1usize..9, seed in 0u64..10_000) {
        let m = DMatrix::from_fn(r, c, |i, j| (((i * 31 + j * 17) as u64 + seed) % 97) as f64 / 97.0);
        let bound = schur_bound(&m).unwrap();
        prop_assert!(bound >= m.singular_values().max() * (1.0 - 1e-12));
    }

    #[test]
    fn h_sweep_round_trips(hs in prop::collection::vec(1e-3..10.0f64, 1..6)) {
        let list = hs.iter().map(|h| format_real(*h)).collect::<Vec<_>>().join(", ");
        let text = format!("[potential]\nkind = zero\n[verify-bound]\nh = {list}\nz = -1\ns = 0.75\n");
        let cfg = ExperimentConfig::parse(&text, Path::new(".")).unwrap();
        let Family::VerifyBound(b) = &cfg.families[0] else { panic!("family") };
        prop_assert_eq!(&b.h, &hs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn wave_energy_conserved(a in 0.5..3.0f64, c in 3.0..8.0f64, t in -40.0..40.0f64, g in 0.0..2.0f64) {
        let grid = make_grid(3, 20.0, 150).unwrap();
        let op = SectorOperator::build(&grid, &PotentialSpec::yukawa(g), 1.0, 0);
        let sp = eigendecompose(op.matrix()).unwrap();
        let v0: Vec<f64> = (0..150).map(|i| grid.r(i) * bump(grid.r(i) / a)).collect();
        let v1: Vec<f64> = (0..150).map(|i| bump(grid.r(i) - c)).collect();
        let prop = Propagator::new(&sp, &grid, &v0, &v1).unwrap();
        let e0 = conserved_energy(op.matrix(), &prop.state(0.0, 2.0));
        let e1 = conserved_energy(op.matrix(), &prop.state(t, 2.0));
        assert_relative_eq!(e0, e1, max_relative = 1e-8);
    }
}
