//! Property tests for the pairing, the solvers and time reversal on random
//! small systems.

use evoq_core::signal::{restrict, time_reverse, weight_flip};
use evoq_core::solver::timestep_oracle;
use evoq_core::transform::{fourier_laplace, inverse_fourier_laplace};
use evoq_core::{
    nu_product, support_leakage, CMatrix, Direction, EvoProblem, EvoSystem, MaterialLaw,
    SupportWindow, TimeGrid, WeightedSignal, C64,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian(rng: &mut ChaCha8Rng, r: usize, k: usize) -> CMatrix {
    CMatrix::from_fn(r, k, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn noise(rng: &mut ChaCha8Rng, grid: TimeGrid, nu: f64, m: usize) -> WeightedSignal {
    let data = (0..grid.len() * m)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    WeightedSignal::from_flat(grid, nu, m, data).unwrap()
}

/// `M₀` positive definite, `Re M₁ ⪰ 0` and `A` skew, so `νM₀ + Re M₁` is coercive.
fn random_system(seed: u64, m: usize, nu: f64, grid: TimeGrid) -> EvoSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(&mut rng, m, m);
    let m0 = &x * x.adjoint() + CMatrix::identity(m, m) * C64::new(0.5, 0.0);
    let y = gaussian(&mut rng, m, m);
    let s = gaussian(&mut rng, m, m);
    let m1 = &y * y.adjoint() * C64::new(0.3, 0.0) + (&s - s.adjoint()) * C64::new(0.5, 0.0);
    let z = gaussian(&mut rng, m, m);
    let a = evoq_core::spatial::check_skew(&z - z.adjoint()).unwrap();
    EvoSystem::new(nu, grid, MaterialLaw::finite_sum(vec![m0, m1]).unwrap(), a).unwrap()
}

fn grid() -> TimeGrid {
    TimeGrid::new(-3.0, 3.0, 128).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solution_operators_are_nu_adjoint(seed in any::<u64>(), m in 1usize..4, nu in 0.5f64..2.0) {
        let sys = random_system(seed, m, nu, grid());
        let op = sys.operator().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
        let f = noise(&mut rng, grid(), nu, m);
        let g = noise(&mut rng, grid(), -nu, m);
        let lhs = nu_product(&op.apply(Direction::Forward, &f).unwrap(), &g).unwrap();
        let rhs = nu_product(&f, &op.apply(Direction::Adjoint, &g).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * f.norm() * g.norm());
    }

    #[test]
    fn solution_norm_is_bounded_by_the_certificate(seed in any::<u64>(), m in 1usize..4) {
        let sys = random_system(seed, m, 1.0, grid());
        let op = sys.operator().unwrap();
        let c = op.certificate().c_est;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(7));
        let f = noise(&mut rng, grid(), 1.0, m);
        let g = noise(&mut rng, grid(), -1.0, m);
        prop_assert!(op.apply(Direction::Forward, &f).unwrap().norm() <= 1.05 * f.norm() / c);
        prop_assert!(op.apply(Direction::Adjoint, &g).unwrap().norm() <= 1.05 * g.norm() / c);
    }

    #[test]
    fn stepper_is_exactly_causal(seed in any::<u64>(), m in 1usize..4, cut in 10usize..110) {
        let g0 = grid();
        let sys = random_system(seed, m, 1.0, g0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let t = g0.time(cut);
        let f = restrict(&noise(&mut rng, g0, 1.0, m), SupportWindow::at_least(t)).unwrap();
        let g = restrict(&noise(&mut rng, g0, -1.0, m), SupportWindow::at_most(t)).unwrap();
        let u = timestep_oracle(&EvoProblem::forward(sys.clone(), f).unwrap()).unwrap();
        let v = timestep_oracle(&EvoProblem::adjoint(sys, g).unwrap()).unwrap();
        prop_assert_eq!(support_leakage(&u, SupportWindow::at_least(t)).unwrap(), 0.0);
        prop_assert_eq!(support_leakage(&v, SupportWindow::at_most(t)).unwrap(), 0.0);
    }

    #[test]
    fn time_reversal_is_an_isometric_involution(seed in any::<u64>(), m in 1usize..4, nu in 0.1f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g0 = TimeGrid::symmetric(2.0, 64).unwrap();
        let f = noise(&mut rng, g0, nu, m);
        let h = noise(&mut rng, g0, -nu, m);
        let rf = time_reverse(&f).unwrap();
        prop_assert_eq!(rf.nu(), -nu);
        prop_assert!((rf.norm() - f.norm()).abs() <= 1e-12 * f.norm());
        let back = time_reverse(&rf).unwrap();
        prop_assert_eq!(back.flat(), f.flat());
        let rh = time_reverse(&h).unwrap();
        let gap = nu_product(&rh, &rf).unwrap() - nu_product(&h, &f).unwrap();
        prop_assert!(gap.norm() <= 1e-12 * f.norm() * h.norm());
        let w = weight_flip(&f);
        prop_assert_eq!(w.nu(), -nu);
        let back = weight_flip(&w);
        prop_assert_eq!(back.flat(), f.flat());
    }

    #[test]
    fn restriction_is_self_adjoint(seed in any::<u64>(), cut in 0usize..64, upper in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g0 = TimeGrid::new(-1.0, 3.0, 64).unwrap();
        let f = noise(&mut rng, g0, 1.5, 2);
        let g = noise(&mut rng, g0, -1.5, 2);
        let t = g0.time(cut);
        let w = if upper { SupportWindow::at_least(t) } else { SupportWindow::at_most(t) };
        let lhs = nu_product(&restrict(&f, w).unwrap(), &g).unwrap();
        let rhs = nu_product(&f, &restrict(&g, w).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * f.norm() * g.norm());
        let split = restrict(&f, w).unwrap().axpy(C64::new(1.0, 0.0), &restrict(&f, w.complement()).unwrap()).unwrap();
        prop_assert!(split.relative_distance(&f).unwrap() <= 1e-15);
    }

    #[test]
    fn reversal_intertwines_restrictions_at_nodes(seed in any::<u64>(), k in 0usize..=64) {
        // T and −T are both nodes of the symmetric grid
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g0 = TimeGrid::symmetric(2.0, 64).unwrap();
        let t = g0.time(k.min(63)) + if k == 64 { g0.dt() } else { 0.0 };
        let f = noise(&mut rng, g0, 0.9, 2);
        let lhs = time_reverse(&restrict(&f, SupportWindow::at_least(t)).unwrap()).unwrap();
        let rhs = restrict(&time_reverse(&f).unwrap(), SupportWindow::at_most(-t)).unwrap();
        prop_assert_eq!(lhs.flat(), rhs.flat());
    }

    #[test]
    fn transform_is_unitary_and_invertible(seed in any::<u64>(), m in 1usize..3, n in 4usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g0 = TimeGrid::new(-1.0, 2.0, n).unwrap();
        let f = noise(&mut rng, g0, 0.7, m);
        let s = fourier_laplace(&f);
        prop_assert!((s.norm() - f.norm()).abs() <= 1e-12 * f.norm());
        let back = inverse_fourier_laplace(&s);
        prop_assert!(back.relative_distance(&f).unwrap() <= 1e-13);
    }
}
