//! Lattice operators and right-hand sides of the damped-forced lattice systems.
//!
//! The canonical evolution is written with the shift-sum operator
//! `(Δφ)_n = φ_{n+1} + φ_{n-1}`:
//!
//! ```text
//! dφ_n/dt = -i (κ + μ|φ_n|²)(Δφ)_n - iγ|φ_n|²φ_n - δφ_n - i g_n
//! ```
//!
//! The difference operators `A`, `B`, `B*` are provided for identity checks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Boundary, Forcing, LatticeState, ModelParams};
use crate::sampling;

/// Which lattice system a right-hand side evaluation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RhsKind {
    /// Ablowitz-Ladik nonlinearity only (`gamma` ignored).
    #[serde(rename = "dfal")]
    DfAL,
    /// Local cubic nonlinearity only (`mu` ignored).
    #[serde(rename = "dfdnls")]
    DfDNLS,
    #[serde(rename = "combined")]
    Combined,
}

impl RhsKind {
    /// `(mu, gamma)` actually used for this kind.
    pub fn effective_nonlinearity(&self, params: &ModelParams) -> (f64, f64) {
        match self {
            RhsKind::DfAL => (params.mu, 0.0),
            RhsKind::DfDNLS => (0.0, params.gamma),
            RhsKind::Combined => (params.mu, params.gamma),
        }
    }
}

/// Flattened coefficients for the RHS kernel.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RhsCoefficients {
    kappa: f64,
    mu: f64,
    gamma: f64,
    delta: f64,
    boundary: Boundary,
}

impl RhsCoefficients {
    pub(crate) fn new(params: &ModelParams, kind: RhsKind) -> Self {
        let (mu, gamma) = kind.effective_nonlinearity(params);
        Self {
            kappa: params.kappa,
            mu,
            gamma,
            delta: params.delta,
            boundary: params.boundary,
        }
    }
}

#[inline(always)]
fn edge_neighbours(phi: &[Complex64], boundary: Boundary) -> (Complex64, Complex64) {
    match boundary {
        Boundary::ZeroPadding => (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
        // (left of first site, right of last site)
        Boundary::Periodic => (phi[phi.len() - 1], phi[0]),
    }
}

/// Calls `f(n, left, centre, right)` for every slot.
#[inline(always)]
fn for_each_stencil(
    phi: &[Complex64],
    boundary: Boundary,
    mut f: impl FnMut(usize, Complex64, Complex64, Complex64),
) {
    let m = phi.len();
    let (outer_left, outer_right) = edge_neighbours(phi, boundary);
    if m == 1 {
        f(0, outer_left, phi[0], outer_right);
        return;
    }
    f(0, outer_left, phi[0], phi[1]);
    for n in 1..m - 1 {
        f(n, phi[n - 1], phi[n], phi[n + 1]);
    }
    f(m - 1, phi[m - 2], phi[m - 1], outer_right);
}

/// Writes `F(φ)` into `out`; returns `false` if any entry is non-finite.
pub(crate) fn rhs_into(
    phi: &[Complex64],
    forcing: &[Complex64],
    c: &RhsCoefficients,
    out: &mut [Complex64],
) -> bool {
    debug_assert_eq!(phi.len(), out.len());
    debug_assert_eq!(phi.len(), forcing.len());
    let mut finite = true;
    for_each_stencil(phi, c.boundary, |n, left, centre, right| {
        let a = centre.norm_sqr();
        let w = (left + right) * (c.kappa + c.mu * a) + centre * (c.gamma * a) + forcing[n];
        // -i w - δφ
        let v = Complex64::new(w.im - c.delta * centre.re, -w.re - c.delta * centre.im);
        finite &= v.re.is_finite() && v.im.is_finite();
        out[n] = v;
    });
    finite
}

fn map_stencil(
    state: &LatticeState,
    boundary: Boundary,
    f: impl Fn(Complex64, Complex64, Complex64) -> Complex64,
) -> LatticeState {
    let phi = state.amplitudes();
    let mut out = vec![Complex64::new(0.0, 0.0); phi.len()];
    for_each_stencil(phi, boundary, |n, l, c, r| out[n] = f(l, c, r));
    LatticeState::from_vec_unchecked(out, state.n_half())
}

/// `(Δφ)_n = φ_{n+1} + φ_{n-1}`.
pub fn apply_shift_laplacian(state: &LatticeState, boundary: Boundary) -> LatticeState {
    map_stencil(state, boundary, |l, _, r| l + r)
}

/// `(Aφ)_n = φ_{n+1} - 2φ_n + φ_{n-1}`.
pub fn apply_second_difference(state: &LatticeState, boundary: Boundary) -> LatticeState {
    map_stencil(state, boundary, |l, c, r| l - c * 2.0 + r)
}

/// `(Bφ)_n = φ_{n+1} - φ_n`.
pub fn apply_forward_difference(state: &LatticeState, boundary: Boundary) -> LatticeState {
    map_stencil(state, boundary, |_, c, r| r - c)
}

/// `(B*φ)_n = φ_{n-1} - φ_n`.
pub fn apply_backward_difference(state: &LatticeState, boundary: Boundary) -> LatticeState {
    map_stencil(state, boundary, |l, c, _| l - c)
}

/// Full right-hand side `F(φ)` for the chosen system.
pub fn eval_rhs(
    state: &LatticeState,
    params: &ModelParams,
    forcing: &Forcing,
    kind: RhsKind,
) -> Result<LatticeState> {
    check_forcing_shape(state, forcing)?;
    let coeffs = RhsCoefficients::new(params, kind);
    let mut out = vec![Complex64::new(0.0, 0.0); state.len()];
    if !rhs_into(state.amplitudes(), forcing.values(), &coeffs, &mut out) {
        return Err(Error::BlowUp { t: f64::NAN });
    }
    Ok(LatticeState::from_vec_unchecked(out, state.n_half()))
}

pub(crate) fn check_forcing_shape(state: &LatticeState, forcing: &Forcing) -> Result<()> {
    if forcing.n_half() != state.n_half() {
        return Err(Error::InvalidParameter(format!(
            "forcing realized for n_half={} but state has n_half={}",
            forcing.n_half(),
            state.n_half()
        )));
    }
    Ok(())
}

/// Nonlinear part `(N(θ))_n = -iμ|θ_n|²(θ_{n+1}+θ_{n-1}) - iγ|θ_n|²θ_n`.
pub fn eval_nonlinear_part(state: &LatticeState, params: &ModelParams) -> LatticeState {
    let (mu, gamma) = (params.mu, params.gamma);
    map_stencil(state, params.boundary, |l, c, r| {
        let a = c.norm_sqr();
        let w = (l + r) * (mu * a) + c * (gamma * a);
        Complex64::new(w.im, -w.re)
    })
}

/// Outcome of sampling the Lipschitz ratio of `N` on a ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub radius: f64,
    pub n_half: usize,
    /// `sqrt(6μ² + 5γ²) R²`.
    pub theoretical_constant: f64,
    /// Elementwise bound `((2 + 2√2)μ + 3γ) R²`, which single-site pairs approach.
    pub rigorous_constant: f64,
    pub sampled_max_ratio: f64,
    /// Same ratio for the full right-hand side (no bound asserted).
    pub sampled_max_ratio_full_rhs: f64,
    pub sample_count: usize,
    pub skipped_degenerate: usize,
    pub violations: usize,
}

impl LipschitzReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

pub fn theoretical_lipschitz_constant(params: &ModelParams, radius: f64) -> f64 {
    (6.0 * params.mu.powi(2) + 5.0 * params.gamma.powi(2)).sqrt() * radius * radius
}

pub fn rigorous_lipschitz_constant(params: &ModelParams, radius: f64) -> f64 {
    ((2.0 + 2.0 * std::f64::consts::SQRT_2) * params.mu + 3.0 * params.gamma) * radius * radius
}

/// Slack allowed on the sampled ratio before a pair counts as a violation.
pub const LIPSCHITZ_SLACK: f64 = 1e-9;

/// Draws `n_samples` pairs uniformly from the ball of radius `radius` and
/// records the largest `||N(θ) - N(φ)|| / ||θ - φ||`.
pub fn sample_lipschitz(
    params: &ModelParams,
    radius: f64,
    n_samples: usize,
    seed: u64,
    n_half: usize,
) -> Result<LipschitzReport> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    params.validate()?;
    let theoretical = theoretical_lipschitz_constant(params, radius);
    let zero = Forcing::zero(n_half);
    let mut rng = sampling::rng_from_seed(seed);
    let mut report = LipschitzReport {
        radius,
        n_half,
        theoretical_constant: theoretical,
        rigorous_constant: rigorous_lipschitz_constant(params, radius),
        sampled_max_ratio: 0.0,
        sampled_max_ratio_full_rhs: 0.0,
        sample_count: 0,
        skipped_degenerate: 0,
        violations: 0,
    };
    for _ in 0..n_samples {
        let theta = sampling::ball_state(&mut rng, n_half, radius);
        let phi = sampling::ball_state(&mut rng, n_half, radius);
        let gap = theta.distance(&phi);
        if gap == 0.0 {
            report.skipped_degenerate += 1;
            continue;
        }
        let ratio = eval_nonlinear_part(&theta, params).distance(&eval_nonlinear_part(&phi, params)) / gap;
        let full = eval_rhs(&theta, params, &zero, RhsKind::Combined)?
            .distance(&eval_rhs(&phi, params, &zero, RhsKind::Combined)?)
            / gap;
        report.sample_count += 1;
        report.sampled_max_ratio = report.sampled_max_ratio.max(ratio);
        report.sampled_max_ratio_full_rhs = report.sampled_max_ratio_full_rhs.max(full);
        if ratio > theoretical + LIPSCHITZ_SLACK {
            report.violations += 1;
        }
    }
    Ok(report)
}
