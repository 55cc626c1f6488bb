//! Operator identities on random states and conservation in the undamped,
//! unforced limit.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    apply_backward_difference, apply_forward_difference, apply_second_difference, apply_shift_laplacian, RhsKind,
};
use crate::error::Result;
use crate::integrators::{integrate, Scheme, StepperConfig};
use crate::lattice::{Boundary, Forcing, ModelParams};
use crate::sampling::{localized_state, rng_from_seed, unit_state};

/// Worst residuals over the sampled states; every entry should be `<= tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSuiteReport {
    pub n_half: usize,
    pub boundary: Boundary,
    pub states: usize,
    pub tol: f64,
    /// `|(Bφ, θ) - (φ, B*θ)|`.
    pub adjoint: f64,
    /// `||Aφ + B*Bφ||`.
    pub factorization: f64,
    /// `max Re (Aφ, φ)`, which must not be positive.
    pub negativity: f64,
    /// `max (||Aφ|| - 4||φ||)`.
    pub a_bound: f64,
    /// `max (||Δφ|| - 2||φ||)`.
    pub shift_bound: f64,
}

impl OperatorSuiteReport {
    pub fn passed(&self) -> bool {
        [self.adjoint, self.factorization, self.negativity, self.a_bound, self.shift_bound]
            .iter()
            .all(|&r| r <= self.tol)
    }
}

/// Checks the identities on `states` pairs of unit-norm random states.
pub fn run_operator_suite(n_half: usize, boundary: Boundary, states: usize, seed: u64) -> OperatorSuiteReport {
    let mut rng = rng_from_seed(seed);
    let mut r = OperatorSuiteReport {
        n_half,
        boundary,
        states,
        tol: 1e-12,
        adjoint: 0.0,
        factorization: 0.0,
        negativity: f64::NEG_INFINITY,
        a_bound: f64::NEG_INFINITY,
        shift_bound: f64::NEG_INFINITY,
    };
    for _ in 0..states {
        let phi = unit_state(&mut rng, n_half);
        let theta = unit_state(&mut rng, n_half);
        let b_phi = apply_forward_difference(&phi, boundary);
        let lhs = b_phi.inner(&theta);
        let rhs = phi.inner(&apply_backward_difference(&theta, boundary));
        r.adjoint = r.adjoint.max((lhs - rhs).norm());
        let a_phi = apply_second_difference(&phi, boundary);
        r.factorization = r
            .factorization
            .max(a_phi.add(&apply_backward_difference(&b_phi, boundary)).l2_norm());
        r.negativity = r.negativity.max(a_phi.inner(&phi).re);
        r.a_bound = r.a_bound.max(a_phi.l2_norm() - 4.0 * phi.l2_norm());
        r.shift_bound = r
            .shift_bound
            .max(apply_shift_laplacian(&phi, boundary).l2_norm() - 2.0 * phi.l2_norm());
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationConfig {
    pub n_half: usize,
    pub t_end: f64,
    pub sample_every: f64,
    pub scheme: Scheme,
    /// Envelope width and l2 norm of the random initial state.
    pub width: f64,
    pub norm: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    /// `max_t |N(t) - N(0)| / N(0)` for `N = ||φ||` under the DNLS flow.
    pub dnls_norm_drift: f64,
    /// `max_t |P(t) - P(0)| / P(0)` under the Ablowitz-Ladik flow with `μ = 1`.
    pub al_p_drift: f64,
}

pub fn run_conservation(config: &ConservationConfig) -> Result<ConservationReport> {
    let psi0 = localized_state(&mut rng_from_seed(config.seed), config.n_half, config.width, config.norm);
    let zero = Forcing::zero(config.n_half);
    let stepper = StepperConfig {
        scheme: config.scheme,
        t_end: config.t_end,
        sample_every: config.sample_every,
        tail_ks: Vec::new(),
    };
    let drift = |series: &[f64]| {
        let q0 = series[0];
        series.iter().map(|q| (q - q0).abs() / q0).fold(0.0, f64::max)
    };
    let dnls = integrate(&psi0, &ModelParams::conservative(0.0, 1.0)?, &zero, RhsKind::DfDNLS, &stepper)?;
    let al = integrate(&psi0, &ModelParams::conservative(1.0, 0.0)?, &zero, RhsKind::DfAL, &stepper)?;
    Ok(ConservationReport {
        dnls_norm_drift: drift(&dnls.l2),
        al_p_drift: drift(&al.p_functional),
    })
}
