use alnls::diagnostics::{p_derivative_bound, p_derivative_exact, p_functional};
use alnls::dynamics::{eval_rhs, RhsKind};
use alnls::integrators::{
    convergence_order, convergence_order_against, integrate, integrate_states, StepperConfig,
};
use alnls::sampling::{localized_state, rng_from_seed};
use alnls::{Forcing, ForcingFamily, LatticeState, ModelParams};
use num_complex::Complex64;

/// Closed form for an isolated site with `g = 0`: modulus `|φ0| e^{-δt}`,
/// phase `θ0 - γ|φ0|² (1 - e^{-2δt}) / (2δ)`.
fn isolated_site(phi0: Complex64, gamma: f64, delta: f64, t: f64) -> Complex64 {
    let a0 = phi0.norm_sqr();
    let phase = phi0.arg() - gamma * a0 * (1.0 - (-2.0 * delta * t).exp()) / (2.0 * delta);
    Complex64::from_polar(phi0.norm() * (-delta * t).exp(), phase)
}

#[test]
fn isolated_site_matches_closed_form() {
    let phi0 = Complex64::new(0.8, 0.6);
    for delta in [0.5, 1.0, 2.0] {
        for kind in [RhsKind::DfDNLS, RhsKind::Combined] {
            let p = ModelParams::new(0.7, 1.3, delta).unwrap();
            let s = LatticeState::single_site(0, 0, phi0).unwrap();
            let (times, states) =
                integrate_states(&s, &p, &Forcing::zero(0), kind, &StepperConfig::adaptive(20.0, 0.1)).unwrap();
            for (t, st) in times.iter().zip(&states) {
                let exact = isolated_site(phi0, p.gamma, delta, *t);
                assert!((st.at(0) - exact).norm() < 1e-9, "delta={delta} t={t}");
            }
        }
    }
}

#[test]
fn rk4_order_on_isolated_site() {
    let phi0 = Complex64::new(1.0, 0.0);
    let p = ModelParams::new(0.0, 1.0, 0.5).unwrap();
    let s = LatticeState::single_site(0, 0, phi0).unwrap();
    let exact = LatticeState::single_site(0, 0, isolated_site(phi0, 1.0, 0.5, 2.0)).unwrap();
    let dts = [0.2, 0.1, 0.05, 0.025];
    let fit = convergence_order_against(&s, &p, &Forcing::zero(0), RhsKind::DfDNLS, &dts, 2.0, &exact).unwrap();
    let order = fit.order.unwrap();
    assert!((order - 4.0).abs() <= 0.2, "order {order}");
    let ratio = fit.errors[1] / fit.errors[2];
    assert!((ratio - 16.0).abs() < 2.0, "ratio {ratio}");
}

#[test]
fn rk4_order_on_lattice() {
    let p = ModelParams::new(0.4, 0.8, 0.3).unwrap();
    let g = Forcing::realize(ForcingFamily::Gaussian { amplitude: 0.2, width: 2.0 }, 12).unwrap();
    let s = localized_state(&mut rng_from_seed(8), 12, 2.0, 1.0);
    let fit = convergence_order(&s, &p, &g, RhsKind::Combined, &[0.2, 0.1, 0.05, 0.025], 2.0).unwrap();
    assert!((fit.order.unwrap() - 4.0).abs() <= 0.2, "{fit:?}");
}

#[test]
fn pure_damping_is_exponential() {
    let p = ModelParams::new(0.0, 1.0, 0.7).unwrap();
    let s = localized_state(&mut rng_from_seed(2), 24, 3.0, 1.2);
    let rec = integrate(&s, &p, &Forcing::zero(24), RhsKind::DfDNLS, &StepperConfig::adaptive(10.0, 0.5)).unwrap();
    for (t, n) in rec.times.iter().zip(&rec.l2) {
        assert!((n - 1.2 * (-0.7 * t).exp()).abs() < 1e-9, "t={t}");
    }
}

#[test]
fn conservative_limits_conserve() {
    let s = localized_state(&mut rng_from_seed(4), 40, 3.0, 1.5);
    let zero = Forcing::zero(40);
    let cfg = StepperConfig::adaptive(20.0, 1.0);
    let dnls = integrate(&s, &ModelParams::conservative(0.0, 1.0).unwrap(), &zero, RhsKind::DfDNLS, &cfg).unwrap();
    let n0 = dnls.l2[0];
    assert!(dnls.l2.iter().all(|n| (n - n0).abs() / n0 < 1e-8));
    let al = integrate(&s, &ModelParams::conservative(1.0, 0.0).unwrap(), &zero, RhsKind::DfAL, &cfg).unwrap();
    let p0 = al.p_functional[0];
    assert!(al.p_functional.iter().all(|p| (p - p0).abs() / p0 < 1e-8));
}

#[test]
fn conserved_p_matches_tiny_step_reference() {
    let s = localized_state(&mut rng_from_seed(6), 20, 2.0, 1.0);
    let p = ModelParams::conservative(1.0, 0.0).unwrap();
    let zero = Forcing::zero(20);
    let coarse = integrate(&s, &p, &zero, RhsKind::DfAL, &StepperConfig::adaptive(5.0, 5.0)).unwrap();
    let fine = integrate(&s, &p, &zero, RhsKind::DfAL, &StepperConfig::rk4(0.001, 5.0, 5.0)).unwrap();
    assert!((coarse.final_state.distance(&fine.final_state)) < 1e-8);
    assert!((p_functional(&fine.final_state) - p_functional(&s)).abs() < 1e-12);
}

#[test]
fn runs_are_bitwise_deterministic() {
    let p = ModelParams::new(0.5, 0.5, 0.2).unwrap();
    let g = Forcing::realize(ForcingFamily::ExponentialDecay { amplitude: 0.3, decay: 0.5 }, 16).unwrap();
    let s = localized_state(&mut rng_from_seed(1), 16, 2.0, 1.0);
    let cfg = StepperConfig::adaptive(8.0, 0.2).with_tails(vec![2, 4]);
    let a = integrate(&s, &p, &g, RhsKind::Combined, &cfg).unwrap();
    let b = integrate(&s, &p, &g, RhsKind::Combined, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn doubling_truncation_changes_little() {
    let p = ModelParams::new(0.3, 0.6, 0.4).unwrap();
    let family = ForcingFamily::Gaussian { amplitude: 0.2, width: 1.5 };
    let s = localized_state(&mut rng_from_seed(3), 32, 1.5, 1.0);
    let cfg = StepperConfig::rk4(0.01, 4.0, 0.5).with_tails(vec![2, 4]);
    let small = integrate(&s, &p, &Forcing::realize(family, 32).unwrap(), RhsKind::Combined, &cfg).unwrap();
    let large = integrate(&s.padded(64).unwrap(), &p, &Forcing::realize(family, 64).unwrap(), RhsKind::Combined, &cfg)
        .unwrap();
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-10 * y.abs().max(1e-300));
    assert!(close(&small.l2, &large.l2));
    assert!(close(&small.l4, &large.l4));
    assert!(close(&small.linf, &large.linf));
    assert!(close(&small.p_functional, &large.p_functional));
    assert!(close(&small.tails[0], &large.tails[0]));
}

#[test]
fn p_derivative_along_trajectory() {
    // Finite differences of P along a μ = 1 Ablowitz-Ladik run against the
    // exact derivative, which must also stay below its bound.
    let p = ModelParams::new(1.0, 0.0, 0.4).unwrap();
    let g = Forcing::realize(ForcingFamily::Gaussian { amplitude: 0.3, width: 1.5 }, 16).unwrap();
    let s = localized_state(&mut rng_from_seed(9), 16, 2.0, 1.0);
    let h = 1e-3;
    let (_, states) = integrate_states(&s, &p, &g, RhsKind::DfAL, &StepperConfig::rk4(1e-4, 3.0, h)).unwrap();
    for w in states.windows(3).step_by(100) {
        let fd = (p_functional(&w[2]) - p_functional(&w[0])) / (2.0 * h);
        let exact = p_derivative_exact(&w[1], &p, &g);
        assert!((fd - exact).abs() < 1e-5 * (1.0 + exact.abs()), "fd {fd} exact {exact}");
        assert!(exact <= p_derivative_bound(&w[1], &p, &g).unwrap() + 1e-12);
    }
}

#[test]
fn dnls_norm_stays_below_large_start() {
    // (2/δ)||g|| <= ||φ0|| keeps ||φ(t)|| <= ||φ0||.
    let p = ModelParams::new(0.0, 1.0, 0.5).unwrap();
    let g = Forcing::realize(ForcingFamily::Gaussian { amplitude: 0.1, width: 2.0 }, 20).unwrap();
    for seed in 0..4 {
        let norm = 2.0 / p.delta * g.norm() * (1.0 + seed as f64);
        let s = localized_state(&mut rng_from_seed(seed), 20, 2.0, norm);
        let rec = integrate(&s, &p, &g, RhsKind::DfDNLS, &StepperConfig::adaptive(30.0, 0.1)).unwrap();
        assert!(rec.l2.iter().all(|n| *n <= norm + 1e-9), "seed {seed}");
    }
}

#[test]
fn rhs_vanishes_at_zero_without_forcing() {
    let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
    let f = eval_rhs(&LatticeState::zeros(5), &p, &Forcing::zero(5), RhsKind::Combined).unwrap();
    assert_eq!(f.l2_norm(), 0.0);
}
