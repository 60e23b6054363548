//! Cross-module properties.

use std::f64::consts::TAU;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tracelab::billiard::{is_closed, length_spectrum, reflection_defect, simulate, Table, Vec2};
use tracelab::heat::{heat_evolve, random_trig_samples, HeatMethod};
use tracelab::kernels::{apply_kernel, TabulatedKernel};
use tracelab::linalg::{eigen_decompose, matrix_trace_identity, spectral_outer_reconstruction, DEFAULT_TOL};
use tracelab::nystrom::discretize;
use tracelab::sturm::{random_smooth_samples, residual_check, solve_direct};
use tracelab::{Grid, GridKind, KernelSpec, SymMatrix};

fn kernel(choice: u8, t: f64) -> KernelSpec {
    match choice {
        0 => KernelSpec::GreenDirichlet,
        1 => KernelSpec::heat_line(t).unwrap(),
        _ => KernelSpec::heat_circle(t).unwrap(),
    }
}

fn grid_kind(midpoint: bool) -> GridKind {
    if midpoint {
        GridKind::UniformMidpoint
    } else {
        GridKind::UniformTrapezoid
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eigenvalue_sum_equals_matrix_trace(choice in 0u8..3, t in 0.01f64..1.0, n in 3usize..60, midpoint: bool) {
        let g = Grid::new(grid_kind(midpoint), n).unwrap();
        let b = discretize(&kernel(choice, t), &g).unwrap();
        let d = eigen_decompose(&b, DEFAULT_TOL).unwrap();
        prop_assert!((d.value_sum() - b.trace()).abs() < 1e-10);
    }

    #[test]
    fn tabulated_kernels_obey_trace_identity(seed in 0u64..10_000, n in 3usize..40) {
        let g = Grid::trapezoid(n).unwrap();
        let phase = seed as f64 * 0.37;
        let k = TabulatedKernel::from_fn(g.clone(), |x, y| (3.0 * x + phase).sin() * (3.0 * y + phase).sin() + x * y).unwrap();
        let b = discretize(&KernelSpec::Tabulated(k), &g).unwrap();
        let r = matrix_trace_identity(&b).unwrap();
        prop_assert!(r.residual < 1e-10);
    }

    #[test]
    fn green_discretization_is_positive(n in 3usize..120, midpoint: bool) {
        let g = Grid::new(grid_kind(midpoint), n).unwrap();
        let b = discretize(&KernelSpec::GreenDirichlet, &g).unwrap();
        let d = eigen_decompose(&b, DEFAULT_TOL).unwrap();
        prop_assert!(d.values().iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn green_operator_inverts_second_derivative(seed in 0u64..10_000) {
        let g = Grid::trapezoid(401).unwrap();
        let f = random_smooth_samples(&g, seed, 6);
        let u = apply_kernel(&KernelSpec::GreenDirichlet, &f, &g).unwrap();
        prop_assert!(residual_check(&u, &f, &g).unwrap() < 1e-3);
        let direct = solve_direct(&f, &g).unwrap();
        let diff = u.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-12);
    }

    #[test]
    fn heat_conserves_mass(seed in 0u64..10_000, t in 0.001f64..1.0) {
        let g = Grid::midpoint(128).unwrap();
        let f = random_trig_samples(&g, seed, 10);
        let mass = g.integrate(&f).unwrap();
        for method in [HeatMethod::full_spectral(&g), HeatMethod::Kernel { l_max: 12 }] {
            let u = heat_evolve(&f, &g, t, method).unwrap();
            prop_assert!((g.integrate(&u).unwrap() - mass).abs() < 1e-10);
        }
    }

    #[test]
    fn rational_rectangle_orbits_are_in_the_spectrum(
        a in 0.5f64..2.0,
        b in 0.5f64..2.0,
        p in 0u32..4,
        q in 1u32..4,
        sx in 0.05f64..0.95,
        sy in 0.05f64..0.95,
    ) {
        let table = Table::rectangle(a, b).unwrap();
        let dir = Vec2::new(p as f64 * a, q as f64 * b).normalized();
        let start = Vec2::new(sx * a, sy * b);
        let expected = 2.0 * (p as f64 * a).hypot(q as f64 * b);
        let traj = simulate(&table, start, dir, 1.5 * expected).unwrap();
        prop_assume!(traj.terminated_by == tracelab::billiard::Termination::LengthBudget);
        let c = is_closed(&traj, start, dir, 1e-9).unwrap();
        let lengths = length_spectrum(&table, expected + 1.0).unwrap().lengths();
        prop_assert!(lengths.iter().any(|l| (l - c.length).abs() < 1e-8));
    }

    #[test]
    fn trajectories_keep_unit_speed(radius in 0.3f64..3.0, r in 0.0f64..0.95, phi in 0.0f64..TAU, heading in 0.0f64..TAU) {
        let table = Table::disc(radius).unwrap();
        let start = Vec2::new(r * radius * phi.cos(), r * radius * phi.sin());
        let traj = simulate(&table, start, Vec2::new(heading.cos(), heading.sin()), 25.0).unwrap();
        let sum: f64 = traj.segments.iter().map(|s| s.length).sum();
        prop_assert_eq!(sum, traj.total_length);
        prop_assert!(traj.segments.iter().all(|s| (s.dir.norm() - 1.0).abs() < 1e-12));
        prop_assert!(reflection_defect(&table, &traj) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn large_matrices_reconstruct(seed in 0u64..1000, n in 129usize..180) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = SymMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)).unwrap();
        let d = eigen_decompose(&m, DEFAULT_TOL).unwrap();
        prop_assert!((d.value_sum() - m.trace()).abs() < 1e-9);
        prop_assert!(spectral_outer_reconstruction(&d).max_abs_diff(&m) < 1e-9);
    }
}
