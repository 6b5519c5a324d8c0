//! Control synthesis against closed-form minimum-norm controls and
//! structural identities.

use evoq_core::control::{
    certify_duality, douglas_check, null_control, observability_lower_bound,
    pointwise_null_control, ControlProblem,
};
use evoq_core::linalg::{c, real_diag};
use evoq_core::{CMatrix, CVector, EvoSystem, MaterialLaw, SpatialOperator, TimeGrid, WeightedSignal, C64};
use proptest::prelude::*;

/// `u' + a·u = f` as `M(z) = 1 + a/z`.
fn decay(a: f64, nu: f64, grid: TimeGrid) -> EvoSystem {
    let law = MaterialLaw::finite_sum(vec![CMatrix::identity(1, 1), real_diag(&[a])]).unwrap();
    EvoSystem::new(nu, grid, law, SpatialOperator::zero(1)).unwrap()
}

fn bump(t: f64, center: f64, width: f64) -> f64 {
    let x = (t - center) / width;
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

/// Composite Simpson rule on `[lo, hi]` with `k` (even) panels.
fn simpson(lo: f64, hi: f64, k: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (hi - lo) / k as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..k {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn supported_control_matches_closed_form_minimum_norm() {
    // G = −F after T; before T the least weighted-norm G cancelling
    // c₀ = ∫ e^{−a(T−s)}F(s) ds has ‖G‖² = c₀²/∫ e^{−2a(T−s)}e^{2νs} ds.
    let (a, nu, horizon) = (0.7, 1.0, 1.0);
    let grid = TimeGrid::new(-2.0, 2.0, 256).unwrap();
    let f = |t: f64| bump(t, 0.5, 1.0);
    let system = decay(a, nu, grid);
    let forcing = WeightedSignal::from_fn(grid, nu, 1, |t| vec![c(f(t))]).unwrap();
    let cp = ControlProblem::supported(system, CMatrix::identity(1, 1), horizon, forcing).unwrap();
    let r = null_control(&cp).unwrap();
    assert!(r.feasible);

    let lo = grid.t_min();
    let c0 = simpson(lo, horizon, 4000, |s| (-a * (horizon - s)).exp() * f(s));
    let gram = simpson(lo, horizon, 4000, |s| (-2.0 * a * (horizon - s) + 2.0 * nu * s).exp());
    let tail = simpson(horizon, grid.t_max(), 4000, |s| f(s) * f(s) * (-2.0 * nu * s).exp());
    let expected = (c0 * c0 / gram + tail).sqrt();
    let rel = (r.control_norm - expected).abs() / expected;
    assert!(rel < 0.05, "control norm {} vs closed form {expected} ({rel:.3e})", r.control_norm);
}

#[test]
fn pointwise_control_matches_closed_form_minimum_norm() {
    // u(T) = e^{−aT}U₀ + ∫₀ᵀ e^{−a(T−s)}G(s) ds = 0 at least weighted norm.
    let (a, nu, horizon, u0) = (0.4, 1.0, 1.0, 1.3);
    let grid = TimeGrid::new(-1.0, 2.0, 768).unwrap();
    let cp = ControlProblem::pointwise(
        decay(a, nu, grid),
        CMatrix::identity(1, 1),
        horizon,
        CVector::from_vec(vec![c(u0)]),
    )
    .unwrap();
    let r = pointwise_null_control(&cp).unwrap();
    assert!(r.feasible && r.terminal_residual < 1e-10);
    let gram = simpson(0.0, horizon, 4000, |s| (-2.0 * a * (horizon - s) + 2.0 * nu * s).exp());
    let expected = (-a * horizon).exp() * u0 / gram.sqrt();
    let rel = (r.control_norm - expected).abs() / expected;
    assert!(rel < 0.02, "control norm {} vs closed form {expected} ({rel:.3e})", r.control_norm);
}

fn small_rotation(grid: TimeGrid, b: CMatrix, horizon: f64, f: &[C64; 2]) -> ControlProblem {
    let a = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(-1.0), c(0.0)]);
    let system = EvoSystem::new(
        1.0,
        grid,
        MaterialLaw::finite_sum(vec![CMatrix::identity(2, 2), real_diag(&[0.3, 0.0])]).unwrap(),
        evoq_core::spatial::check_skew(a).unwrap(),
    )
    .unwrap();
    let forcing =
        WeightedSignal::from_fn(grid, 1.0, 2, |t| f.iter().map(|z| z * bump(t, 0.0, 1.2)).collect())
            .unwrap();
    ControlProblem::supported(system, b, horizon, forcing).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn least_norm_control_is_linear_in_the_forcing(
        alpha in -3.0f64..3.0, beta in -3.0f64..3.0, x in -1.0f64..1.0, y in -1.0f64..1.0,
    ) {
        let grid = TimeGrid::new(-2.0, 2.0, 32).unwrap();
        let b = CMatrix::identity(2, 2);
        let f1 = [c(1.0), C64::new(x, y)];
        let f2 = [C64::new(y, 0.5), c(x)];
        let mix = [f1[0] * alpha + f2[0] * beta, f1[1] * alpha + f2[1] * beta];
        let g1 = null_control(&small_rotation(grid, b.clone(), 1.5, &f1)).unwrap().g;
        let g2 = null_control(&small_rotation(grid, b.clone(), 1.5, &f2)).unwrap().g;
        let g = null_control(&small_rotation(grid, b, 1.5, &mix)).unwrap().g;
        let combo = g1.scaled(c(alpha)).axpy(c(beta), &g2).unwrap();
        let scale = g.norm().max(combo.norm()).max(1e-300);
        prop_assert!(g.sub(&combo).unwrap().norm() <= 1e-9 * scale);
    }

    #[test]
    fn random_search_never_exceeds_the_observability_constant(seed in 0u64..1000) {
        let grid = TimeGrid::new(-2.0, 2.0, 32).unwrap();
        let b = CMatrix::from_row_slice(2, 1, &[c(1.0), c(0.0)]);
        let cp = small_rotation(grid, b, grid.time(31), &[c(1.0), c(0.0)]);
        let cert = certify_duality(&cp).unwrap();
        prop_assert!(cert.verdict.agree);
        let lb = observability_lower_bound(&cert.adjoint, 200, seed);
        prop_assert!(cert.observability.c_obs.is_finite());
        prop_assert!(lb <= cert.observability.c_obs * (1.0 + 1e-9));
    }

    #[test]
    fn douglas_recovers_constructed_inclusions(
        p in 3usize..7, extra in 0usize..3, seed in 0u64..10_000, excluded in any::<bool>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let s = (p - 1).min(1 + extra);
        let mut draw = |r: usize, k: usize| {
            CMatrix::from_fn(r, k, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        };
        let b = draw(p, s);
        let mut a = &b * draw(s, 2);
        if excluded {
            let q = b.clone().qr().q();
            let w = draw(p, 1);
            let u = &w - &q * (q.adjoint() * &w);
            a += &u * draw(1, 2) * c(1.0 / u.norm());
        }
        let r = douglas_check(&a, &b);
        prop_assert_eq!(r.included, !excluded);
        prop_assert!(r.consistent);
        if !excluded {
            prop_assert!(r.factor_residual < 1e-10);
            prop_assert!(r.constant.is_finite());
        } else {
            let w = r.witness.clone().unwrap();
            prop_assert!((b.adjoint() * &w).norm() < 1e-8 * b.norm());
            prop_assert!((a.adjoint() * &w).norm() > 1e-3);
        }
    }
}

#[test]
fn observability_constant_equals_douglas_constant_when_finite() {
    let grid = TimeGrid::new(-2.0, 2.0, 32).unwrap();
    let b = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.5), c(0.0), c(2.0)]);
    let cp = small_rotation(grid, b, 1.0, &[c(1.0), c(-1.0)]);
    let cert = certify_duality(&cp).unwrap();
    let v = &cert.verdict;
    assert!(v.agree && v.feasible);
    let (c_obs, d) = (v.c_obs.unwrap(), v.douglas_constant.unwrap());
    assert!((c_obs - d).abs() <= 1e-8 * c_obs, "{c_obs} vs {d}");
}
