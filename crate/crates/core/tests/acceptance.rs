//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Tolerances and budgets are pinned below.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use alnls::cli_io::{parse_config_str, replay, run_with_manifest, Command, Overrides};
use alnls::dynamics::{sample_lipschitz, RhsKind};
use alnls::experiments::absorbing::{run_absorbing, AbsorbingConfig};
use alnls::experiments::closeness::{run_closeness, ClosenessConfig};
use alnls::experiments::congruence::{run_congruence, CongruenceConfig};
use alnls::experiments::tails::{run_tails, TailsConfig};
use alnls::experiments::uniform::run_uniform_bound;
use alnls::experiments::validation::{run_conservation, run_operator_suite, ConservationConfig};
use alnls::experiments::{norm_ensemble, Profile};
use alnls::integrators::{convergence_order_against, integrate_states, Scheme, StepperConfig};
use alnls::{Boundary, Forcing, ForcingFamily, LatticeState, ModelParams};
use num_complex::Complex64;

const OPERATOR_TOL: f64 = 1e-12;
const DRIFT_TOL: f64 = 1e-8;
const DRIFT_SCHEME_TOL: f64 = 1e-12;
const SINGLE_SITE_TOL: f64 = 1e-9;
const ORDER_TOL: f64 = 0.2;
const SLOPE_WINDOW: (f64, f64) = (2.7, 3.3);
const XI: f64 = 1e-6;
const IDENTICAL_TOL: f64 = 1e-10;
const T0_DNLS: f64 = 2.95;
const T0_TOL: f64 = 0.01;
const AL_RATE: f64 = 0.6;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

fn operator_suite() -> Outcome {
    let r = run_operator_suite(256, Boundary::Periodic, 1000, 0);
    let worst = [r.adjoint, r.factorization, r.negativity, r.a_bound, r.shift_bound]
        .into_iter()
        .fold(0.0, f64::max);
    check(r.passed() && r.tol <= OPERATOR_TOL, format!("worst residual {worst:.2e} (tol {OPERATOR_TOL:e})"))
}

fn lipschitz() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (mu, gamma, radius) in [(1.0, 0.0, 1.0), (0.0, 1.0, 2.0), (1.0, 1.0, 1.0)] {
        let p = ModelParams::new(mu, gamma, 1.0).map_err(err)?;
        let r = sample_lipschitz(&p, radius, 10_000, 11, 8).map_err(err)?;
        ok &= r.violations == 0 && r.sampled_max_ratio <= r.theoretical_constant;
        parts.push(format!(
            "({mu},{gamma},{radius}) max {:.3} <= {:.3}, {} violations",
            r.sampled_max_ratio, r.theoretical_constant, r.violations
        ));
    }
    check(ok, parts.join("; "))
}

fn conservation() -> Outcome {
    let r = run_conservation(&ConservationConfig {
        n_half: 512,
        t_end: 100.0,
        sample_every: 1.0,
        scheme: Scheme::Rk45Adaptive {
            atol: DRIFT_SCHEME_TOL,
            rtol: DRIFT_SCHEME_TOL,
            dt_min: 1e-12,
            dt_max: 0.25,
        },
        width: 2.0,
        norm: 2.0,
        seed: 0,
    })
    .map_err(err)?;
    check(
        r.dnls_norm_drift < DRIFT_TOL && r.al_p_drift < DRIFT_TOL,
        format!("norm drift {:.2e}, P drift {:.2e} (tol {DRIFT_TOL:e})", r.dnls_norm_drift, r.al_p_drift),
    )
}

fn single_site() -> Outcome {
    let phi0 = Complex64::new(0.6, 0.8);
    let start = LatticeState::single_site(0, 0, phi0).map_err(err)?;
    let zero = Forcing::zero(0);
    let mut worst: f64 = 0.0;
    for delta in [0.5, 1.0, 2.0] {
        let p = ModelParams::new(1.0, 1.0, delta).map_err(err)?;
        let cfg = StepperConfig::adaptive(20.0, 0.05);
        let (times, states) = integrate_states(&start, &p, &zero, RhsKind::Combined, &cfg).map_err(err)?;
        for (t, s) in times.iter().zip(&states) {
            worst = worst.max((s.at(0).norm() - phi0.norm() * (-delta * t).exp()).abs());
        }
    }
    // RK4 against the closed-form solution, modulus and phase.
    let (gamma, delta, t_end) = (1.0, 0.5, 2.0);
    let p = ModelParams::new(0.0, gamma, delta).map_err(err)?;
    let phase = phi0.arg() - gamma * phi0.norm_sqr() * (1.0 - (-2.0 * delta * t_end).exp()) / (2.0 * delta);
    let exact = LatticeState::single_site(0, 0, Complex64::from_polar(phi0.norm() * (-delta * t_end).exp(), phase))
        .map_err(err)?;
    let fit = convergence_order_against(&start, &p, &zero, RhsKind::DfDNLS, &[0.1, 0.05, 0.025, 0.0125], t_end, &exact)
        .map_err(err)?;
    let order = fit.order.unwrap_or(f64::NAN);
    check(
        worst <= SINGLE_SITE_TOL && (order - 4.0).abs() <= ORDER_TOL,
        format!("modulus error {worst:.2e} (tol {SINGLE_SITE_TOL:e}), RK4 order {order:.3}"),
    )
}

fn envelopes() -> Outcome {
    let g = Forcing::realize(ForcingFamily::Gaussian { amplitude: 0.05, width: 3.0 }, 32).map_err(err)?;
    let mut parts = Vec::new();
    let mut ok = true;
    for (kind, mu, gamma) in [(RhsKind::DfDNLS, 0.0, 1.0), (RhsKind::DfAL, 0.1, 0.0)] {
        let p = ModelParams::new(mu, gamma, 0.8).map_err(err)?;
        let mut cfg = AbsorbingConfig::new(32, 1.0, 0.5, 21);
        cfg.horizon = 30.0;
        let r = run_absorbing(&p, &g, kind, &cfg).map_err(err)?;
        let excess = r.members.iter().map(|m| m.max_envelope_excess).fold(f64::NEG_INFINITY, f64::max);
        ok &= r.envelope_violations.is_empty() && r.members.len() == 32;
        parts.push(format!("{kind:?} max excess {excess:.2e} (slack {:.0e})", r.slack));
    }
    check(ok, parts.join("; "))
}

fn uniform_bound() -> Outcome {
    let mu = 0.1;
    let n_half = 64;
    let mut applicable = Vec::new();
    for (delta, gauss, compact) in [
        (0.1, 0.00192, 0.00138),
        (0.2, 0.00542, 0.0039),
        (0.3, 0.00996, 0.00717),
        (0.5, 0.0214, 0.0154),
    ] {
        applicable.push((delta, ForcingFamily::Gaussian { amplitude: gauss, width: 12.0 }));
        applicable.push((delta, ForcingFamily::CompactSupport { amplitude: compact, half_width: 20 }));
    }
    let not_applicable = [
        (1.0, ForcingFamily::SingleSite { amplitude: 0.05 }),
        (1.0, ForcingFamily::SingleSite { amplitude: 0.1 }),
        (2.0, ForcingFamily::SingleSite { amplitude: 0.05 }),
        (2.0, ForcingFamily::SingleSite { amplitude: 0.2 }),
    ];
    let mut ok = true;
    let mut held = 0;
    let mut skipped = 0;
    let mut worst = f64::NEG_INFINITY;
    for (i, (delta, family)) in applicable.iter().chain(&not_applicable).enumerate() {
        let p = ModelParams::new(mu, 0.0, *delta).map_err(err)?;
        let g = Forcing::realize(*family, n_half).map_err(err)?;
        // Ring between the asymptotic radius and the ball where the
        // Ablowitz-Ladik decay rate is at least δ/2.
        let max_norm = (delta / (8.0 * mu)).sqrt();
        let min_norm = (8.0f64).sqrt() * g.norm() / delta;
        if min_norm >= max_norm {
            return Err(format!("pair {i} has an empty ring"));
        }
        let initials = norm_ensemble(100 + i as u64, n_half, 3.0, 8, min_norm, max_norm);
        let stepper = StepperConfig::adaptive(50.0, 0.1);
        let r = run_uniform_bound(&p, &g, &initials, &stepper).map_err(err)?;
        if i < applicable.len() {
            ok &= r.applicable && r.violations.is_empty();
            held += usize::from(r.applicable && r.violations.is_empty());
            worst = worst.max(r.max_growth);
        } else {
            ok &= !r.applicable;
            skipped += usize::from(!r.applicable);
        }
    }
    check(
        ok,
        format!("{held}/8 applicable pairs bounded (max growth {worst:.2e}), {skipped}/4 reported not-applicable"),
    )
}

fn absorbing_entry() -> Outcome {
    let g = Forcing::realize(ForcingFamily::SingleSite { amplitude: 0.1 }, 32).map_err(err)?;
    let dnls = run_absorbing(
        &ModelParams::new(0.0, 1.0, 1.0).map_err(err)?,
        &g,
        RhsKind::DfDNLS,
        &AbsorbingConfig::new(32, 1.0, 0.3, 31),
    )
    .map_err(err)?;
    let al = run_absorbing(
        &ModelParams::new(0.1, 0.0, 1.0).map_err(err)?,
        &g,
        RhsKind::DfAL,
        &AbsorbingConfig::new(32, 1.0, 0.3, 32),
    )
    .map_err(err)?;
    let ok = dnls.passed()
        && al.passed()
        && (dnls.estimate.t0 - T0_DNLS).abs() <= T0_TOL
        && (al.estimate.decay_rate - AL_RATE).abs() <= 1e-12
        && dnls.members.iter().chain(&al.members).all(|m| m.entry_time.is_some_and(|t| t <= dnls.estimate.t0.max(al.estimate.t0)));
    check(
        ok,
        format!(
            "dfDNLS t0 {:.3} margin {:.3}, dfAL t0 {:.3} rate {:.2} margin {:.3}, counterexamples {}",
            dnls.estimate.t0,
            dnls.margin,
            al.estimate.t0,
            al.estimate.decay_rate,
            al.margin,
            dnls.counterexamples.len() + al.counterexamples.len()
        ),
    )
}

fn closeness() -> Outcome {
    let p = ModelParams::new(1.0, 1.0, 1.0).map_err(err)?;
    let g = Forcing::realize(ForcingFamily::Gaussian { amplitude: 1.0, width: 3.0 }, 32).map_err(err)?;
    let in_window = |s: Option<f64>| s.is_some_and(|s| (SLOPE_WINDOW.0..=SLOPE_WINDOW.1).contains(&s));
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, profile) in [("gaussian", Profile::Gaussian { width: 2.0 }), ("sech", Profile::Sech { width: 2.0 })] {
        let cfg = ClosenessConfig {
            epsilons: vec![0.2, 0.1, 0.05, 0.025],
            t0: 10.0,
            c0: 0.1,
            k_phi: 2.0,
            initial_profile: profile,
            perturbation_profile: Profile::Gaussian { width: 1.0 },
            forcing_fraction: 0.5,
            sample_every: 0.05,
            scheme: Scheme::adaptive_default(),
        };
        let r = run_closeness(&cfg, &p, &g).map_err(err)?;
        ok &= in_window(r.slope_l2) && in_window(r.slope_linf) && r.embedding_holds();
        parts.push(format!(
            "{name} slopes l2 {:.3} linf {:.3}",
            r.slope_l2.unwrap_or(f64::NAN),
            r.slope_linf.unwrap_or(f64::NAN)
        ));
    }
    check(ok, parts.join("; "))
}

fn tails() -> Outcome {
    let n_half = 64;
    let initial = LatticeState::from_fn(n_half, |n| {
        if n.abs() <= 3 {
            Complex64::new(0.3, 0.1 * n as f64)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
    .map_err(err)?;
    let g = Forcing::realize(ForcingFamily::CompactSupport { amplitude: 0.1, half_width: 2 }, n_half).map_err(err)?;
    let cfg = TailsConfig {
        xis: vec![XI],
        horizon: 50.0,
        sample_every: 0.5,
        scheme: Scheme::adaptive_default(),
        ks: Vec::new(),
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for (kind, mu, gamma) in [(RhsKind::DfAL, 0.2, 0.0), (RhsKind::DfDNLS, 0.0, 1.0)] {
        let p = ModelParams::new(mu, gamma, 1.0).map_err(err)?;
        let r = run_tails(&p, &g, kind, &initial, &cfg).map_err(err)?;
        ok &= r.all_found() && r.monotone_in_k;
        let th = &r.thresholds[0];
        parts.push(format!("{kind:?} K={:?} T={:?} monotone {}", th.k, th.t, r.monotone_in_k));
    }
    check(ok, parts.join("; "))
}

fn congruence() -> Outcome {
    let g = Forcing::realize(ForcingFamily::Gaussian { amplitude: 1.0, width: 20.0 }, 64).map_err(err)?;
    let cfg = CongruenceConfig::new(vec![0.2, 0.1, 0.05], 10.0, 2.1, 7);
    let sweep = run_congruence(&ModelParams::new(0.01, 0.01, 0.3).map_err(err)?, &g, &cfg).map_err(err)?;
    let trend: Vec<String> = sweep
        .reports
        .iter()
        .map(|r| format!("{:.2e}/{:.2e}", r.dist_mu_to_gamma, r.dist_gamma_to_mu))
        .collect();
    let same = run_congruence(&ModelParams::new(0.0, 0.0, 0.3).map_err(err)?, &g, &cfg).map_err(err)?;
    let same_max = same.reports.iter().map(|r| r.hausdorff()).fold(0.0, f64::max);
    check(
        sweep.nonincreasing && same_max < IDENTICAL_TOL,
        format!("distances [{}], mu=gamma max {same_max:.1e}", trend.join(", ")),
    )
}

const REPLAY_CONFIG: &str = r#"
[run]
system = "dfal"
n_half = 24
seed = 9

[model]
mu = 0.2
delta = 0.5

[forcing]
family = "gaussian"
amplitude = 0.05
width = 2.0

[initial]
profile = { family = "random", width = 3.0, seed = 4 }
norm = 0.6

[integrator]
t_end = 10.0
sample_every = 0.5
tail_ks = [2, 4, 8]

[tails]
xis = [1e-3, 1e-5]
horizon = 20.0
"#;

fn reproducibility() -> Outcome {
    let config = parse_config_str(REPLAY_CONFIG, Overrides::default()).map_err(err)?;
    let dir = tempfile::tempdir().map_err(err)?;
    let mut compared = 0;
    for command in [Command::Simulate, Command::Tails] {
        let first = dir.path().join(format!("{}-first", command.name()));
        let (manifest, failure) = run_with_manifest(command, &config, &first, None).map_err(err)?;
        if let Some(e) = failure {
            return Err(err(e));
        }
        let report = replay(&manifest, &dir.path().join(format!("{}-second", command.name()))).map_err(err)?;
        if !report.identical() {
            return Err(format!("{} differs: {:?}", command.name(), report.mismatched));
        }
        compared += report.matched.len();
    }
    check(compared >= 3, format!("{compared} files byte-identical on replay"))
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { name: "operator suite", budget: secs(1), run: operator_suite },
        Criterion { name: "lipschitz sampling", budget: secs(5), run: lipschitz },
        Criterion { name: "conservative drift", budget: secs(30), run: conservation },
        Criterion { name: "single-site oracle", budget: None, run: single_site },
        Criterion { name: "gronwall envelopes", budget: None, run: envelopes },
        Criterion { name: "uniform bound", budget: None, run: uniform_bound },
        Criterion { name: "absorbing entry", budget: None, run: absorbing_entry },
        Criterion { name: "closeness scaling", budget: secs(300), run: closeness },
        Criterion { name: "tail property", budget: None, run: tails },
        Criterion { name: "congruence trend", budget: secs(600), run: congruence },
        Criterion { name: "reproducibility", budget: None, run: reproducibility },
    ];
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let over = c.budget.is_some_and(|b| elapsed > b);
        let (pass, detail) = match outcome {
            Ok(d) if !over => (true, d),
            Ok(d) => (false, format!("{d}; over budget {:?}", c.budget.unwrap())),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        println!(
            "{:>2} {:<20} {} [{:.2}s] {detail}",
            i + 1,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
