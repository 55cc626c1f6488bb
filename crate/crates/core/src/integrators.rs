//! Time stepping for the lattice ODE: classical RK4 and Dormand-Prince 5(4).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics;
use crate::dynamics::{check_forcing_shape, rhs_into, RhsCoefficients, RhsKind};
use crate::error::{Error, Result};
use crate::lattice::{check_finite, Boundary, Forcing, LatticeState, ModelParams};

pub const DEFAULT_ATOL: f64 = 1e-10;
pub const DEFAULT_RTOL: f64 = 1e-10;
pub const DEFAULT_SAMPLE_EVERY: f64 = 0.1;
pub const DEFAULT_DT_MIN: f64 = 1e-12;
pub const DEFAULT_DT_MAX: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum Scheme {
    Rk4Fixed {
        dt: f64,
    },
    Rk45Adaptive {
        atol: f64,
        rtol: f64,
        dt_min: f64,
        dt_max: f64,
    },
}

impl Scheme {
    pub fn adaptive_default() -> Self {
        Scheme::Rk45Adaptive {
            atol: DEFAULT_ATOL,
            rtol: DEFAULT_RTOL,
            dt_min: DEFAULT_DT_MIN,
            dt_max: DEFAULT_DT_MAX,
        }
    }

    /// Absolute tolerance used to size envelope slack; for RK4 the step's
    /// fifth power stands in for the local error.
    pub fn atol(&self) -> f64 {
        match *self {
            Scheme::Rk4Fixed { dt } => dt.powi(5).max(f64::EPSILON),
            Scheme::Rk45Adaptive { atol, .. } => atol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub scheme: Scheme,
    pub t_end: f64,
    pub sample_every: f64,
    /// Tail indices `K` recorded as `sum_{|n| > 2K} |ψ_n|²`.
    #[serde(default)]
    pub tail_ks: Vec<usize>,
}

impl StepperConfig {
    pub fn rk4(dt: f64, t_end: f64, sample_every: f64) -> Self {
        Self {
            scheme: Scheme::Rk4Fixed { dt },
            t_end,
            sample_every,
            tail_ks: Vec::new(),
        }
    }

    pub fn adaptive(t_end: f64, sample_every: f64) -> Self {
        Self {
            scheme: Scheme::adaptive_default(),
            t_end,
            sample_every,
            tail_ks: Vec::new(),
        }
    }

    pub fn with_tolerances(mut self, atol: f64, rtol: f64) -> Self {
        if let Scheme::Rk45Adaptive {
            atol: a, rtol: r, ..
        } = &mut self.scheme
        {
            *a = atol;
            *r = rtol;
        }
        self
    }

    pub fn with_tails(mut self, tail_ks: Vec<usize>) -> Self {
        self.tail_ks = tail_ks;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive");
        }
        if !(self.sample_every > 0.0 && self.sample_every <= self.t_end) {
            return bad("sample_every must be positive and at most t_end");
        }
        match self.scheme {
            Scheme::Rk4Fixed { dt } => {
                if !(dt > 0.0 && dt.is_finite()) {
                    return bad("dt must be positive");
                }
            }
            Scheme::Rk45Adaptive {
                atol,
                rtol,
                dt_min,
                dt_max,
            } => {
                if !(atol > 0.0 && rtol > 0.0) {
                    return bad("tolerances must be positive");
                }
                if !(dt_min > 0.0 && dt_min <= dt_max) {
                    return bad("dt_min must be positive and at most dt_max");
                }
            }
        }
        Ok(())
    }

    /// Diagnostic sample times `0, s, 2s, ...` plus `t_end` if off-grid.
    pub fn sample_times(&self) -> Vec<f64> {
        let mut times = Vec::new();
        let mut k = 0usize;
        loop {
            let t = k as f64 * self.sample_every;
            if t > self.t_end * (1.0 + 1e-12) {
                break;
            }
            times.push(t.min(self.t_end));
            k += 1;
        }
        let last = *times.last().expect("t = 0 is always sampled");
        if self.t_end - last > 1e-12 * self.t_end {
            times.push(self.t_end);
        }
        times
    }
}

/// Diagnostics sampled along one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub l4: Vec<f64>,
    pub linf: Vec<f64>,
    pub p_functional: Vec<f64>,
    pub tail_ks: Vec<usize>,
    /// `tails[j][i]` is the tail mass beyond `2 tail_ks[j]` at `times[i]`.
    pub tails: Vec<Vec<f64>>,
    pub final_state: LatticeState,
}

impl TrajectoryRecord {
    pub fn empty(tail_ks: Vec<usize>, final_state: LatticeState) -> Self {
        let tails = vec![Vec::new(); tail_ks.len()];
        Self {
            times: Vec::new(),
            l2: Vec::new(),
            l4: Vec::new(),
            linf: Vec::new(),
            p_functional: Vec::new(),
            tail_ks,
            tails,
            final_state,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, state: &LatticeState) -> Result<()> {
        self.times.push(t);
        self.l2.push(state.l2_norm());
        self.l4.push(state.l4_norm());
        self.linf.push(state.linf_norm());
        self.p_functional.push(diagnostics::p_functional(state));
        for (j, &k) in self.tail_ks.iter().enumerate() {
            self.tails[j].push(diagnostics::tail_mass(state, k)?);
        }
        Ok(())
    }
}

/// Integrates and records diagnostics at each sample time.
pub fn integrate(
    initial: &LatticeState,
    params: &ModelParams,
    forcing: &Forcing,
    kind: RhsKind,
    config: &StepperConfig,
) -> Result<TrajectoryRecord> {
    for &k in &config.tail_ks {
        if 2 * k >= initial.n_half() {
            return Err(Error::TailOutOfRange {
                two_k: 2 * k,
                n_half: initial.n_half(),
            });
        }
    }
    let mut record = TrajectoryRecord::empty(config.tail_ks.clone(), initial.clone());
    let final_state = integrate_observed(initial, params, forcing, kind, config, |t, s| {
        record.push(t, s)
    })?;
    record.final_state = final_state;
    Ok(record)
}

/// Integrates and returns the sampled states themselves.
pub fn integrate_states(
    initial: &LatticeState,
    params: &ModelParams,
    forcing: &Forcing,
    kind: RhsKind,
    config: &StepperConfig,
) -> Result<(Vec<f64>, Vec<LatticeState>)> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    integrate_observed(initial, params, forcing, kind, config, |t, s| {
        times.push(t);
        states.push(s.clone());
        Ok(())
    })?;
    Ok((times, states))
}

/// Core driver: steps from `t = 0` to `t_end`, calling `observe` at every
/// sample time (including `t = 0`). Returns the final state.
pub fn integrate_observed<F>(
    initial: &LatticeState,
    params: &ModelParams,
    forcing: &Forcing,
    kind: RhsKind,
    config: &StepperConfig,
    mut observe: F,
) -> Result<LatticeState>
where
    F: FnMut(f64, &LatticeState) -> Result<()>,
{
    config.validate()?;
    params.validate()?;
    check_forcing_shape(initial, forcing)?;
    let coeffs = RhsCoefficients::new(params, kind);
    let n_half = initial.n_half();
    let mut y = initial.amplitudes().to_vec();
    let times = config.sample_times();
    observe(times[0], initial)?;

    let mut stepper: Box<dyn Stepper> = match config.scheme {
        Scheme::Rk4Fixed { dt } => Box::new(Rk4::new(y.len(), dt)),
        Scheme::Rk45Adaptive {
            atol,
            rtol,
            dt_min,
            dt_max,
        } => Box::new(DormandPrince::new(y.len(), atol, rtol, dt_min, dt_max)),
    };
    for w in times.windows(2) {
        stepper.advance(&mut y, w[0], w[1], forcing.values(), &coeffs)?;
        check_finite(&y, n_half).map_err(|_| Error::BlowUp { t: w[1] })?;
        let state = LatticeState::from_vec_unchecked(y.clone(), n_half);
        observe(w[1], &state)?;
    }
    Ok(LatticeState::from_vec_unchecked(y, n_half))
}

trait Stepper {
    fn advance(
        &mut self,
        y: &mut [Complex64],
        t0: f64,
        t1: f64,
        g: &[Complex64],
        c: &RhsCoefficients,
    ) -> Result<()>;
}

fn eval(y: &[Complex64], g: &[Complex64], c: &RhsCoefficients, out: &mut [Complex64], t: f64) -> Result<()> {
    if rhs_into(y, g, c, out) {
        Ok(())
    } else {
        Err(Error::BlowUp { t })
    }
}

struct Rk4 {
    dt: f64,
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl Rk4 {
    fn new(len: usize, dt: f64) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); len];
        Self {
            dt,
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
        }
    }
}

impl Stepper for Rk4 {
    fn advance(
        &mut self,
        y: &mut [Complex64],
        t0: f64,
        t1: f64,
        g: &[Complex64],
        c: &RhsCoefficients,
    ) -> Result<()> {
        let span = t1 - t0;
        let steps = ((span / self.dt) - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        for s in 0..steps {
            let t = t0 + s as f64 * h;
            eval(y, g, c, k1, t)?;
            for i in 0..y.len() {
                tmp[i] = y[i] + k1[i] * (0.5 * h);
            }
            eval(tmp, g, c, k2, t)?;
            for i in 0..y.len() {
                tmp[i] = y[i] + k2[i] * (0.5 * h);
            }
            eval(tmp, g, c, k3, t)?;
            for i in 0..y.len() {
                tmp[i] = y[i] + k3[i] * h;
            }
            eval(tmp, g, c, k4, t)?;
            for i in 0..y.len() {
                y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            }
        }
        Ok(())
    }
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct DormandPrince {
    atol: f64,
    rtol: f64,
    dt_min: f64,
    dt_max: f64,
    h: Option<f64>,
    k: [Vec<Complex64>; 7],
    ynew: Vec<Complex64>,
    tmp: Vec<Complex64>,
    fsal_valid: bool,
}

impl DormandPrince {
    fn new(len: usize, atol: f64, rtol: f64, dt_min: f64, dt_max: f64) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); len];
        Self {
            atol,
            rtol,
            dt_min,
            dt_max,
            h: None,
            k: std::array::from_fn(|_| z.clone()),
            ynew: z.clone(),
            tmp: z,
            fsal_valid: false,
        }
    }

    /// Attempts one step of size `h`; leaves the candidate in `ynew` and the
    /// scaled max-norm error estimate as the return value. Overflow inside
    /// the trial stages yields an infinite estimate so the step shrinks.
    fn try_step(&mut self, y: &[Complex64], h: f64, t: f64, g: &[Complex64], c: &RhsCoefficients) -> Result<f64> {
        let n = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        let ynew = &mut self.ynew;
        if !self.fsal_valid {
            eval(y, g, c, k1, t)?;
            self.fsal_valid = true;
        }
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (h * A21);
        }
        if !rhs_into(tmp, g, c, k2) {
            return Ok(f64::INFINITY);
        }
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        if !rhs_into(tmp, g, c, k3) {
            return Ok(f64::INFINITY);
        }
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        if !rhs_into(tmp, g, c, k4) {
            return Ok(f64::INFINITY);
        }
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        if !rhs_into(tmp, g, c, k5) {
            return Ok(f64::INFINITY);
        }
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        if !rhs_into(tmp, g, c, k6) {
            return Ok(f64::INFINITY);
        }
        for i in 0..n {
            ynew[i] = y[i] + (k1[i] * B1 + k3[i] * B3 + k4[i] * B4 + k5[i] * B5 + k6[i] * B6) * h;
        }
        if !rhs_into(ynew, g, c, k7) {
            return Ok(f64::INFINITY);
        }
        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let scale = self.atol + self.rtol * y[i].norm().max(ynew[i].norm());
            err = err.max(e.norm() / scale);
        }
        // Non-finite trial stages count as a rejected step.
        Ok(if err.is_finite() { err } else { f64::INFINITY })
    }
}

impl Stepper for DormandPrince {
    fn advance(
        &mut self,
        y: &mut [Complex64],
        t0: f64,
        t1: f64,
        g: &[Complex64],
        c: &RhsCoefficients,
    ) -> Result<()> {
        const SAFETY: f64 = 0.9;
        const FAC_MIN: f64 = 0.2;
        const FAC_MAX: f64 = 5.0;
        let mut t = t0;
        let mut wanted = self.h.unwrap_or((0.01f64).min(self.dt_max)).min(self.dt_max);
        while t1 - t > 1e-14 * t1.abs().max(1.0) {
            if wanted < self.dt_min {
                return Err(Error::StepUnderflow {
                    t,
                    dt: wanted,
                    dt_min: self.dt_min,
                });
            }
            let clipped = t + wanted >= t1;
            let h = if clipped { t1 - t } else { wanted };
            let err = self.try_step(y, h, t, g, c)?;
            let fac = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };
            if err <= 1.0 {
                t = if clipped { t1 } else { t + h };
                y.copy_from_slice(&self.ynew);
                let [k1, .., k7] = &mut self.k;
                std::mem::swap(k1, k7);
                let next = (h * fac).min(self.dt_max);
                wanted = if clipped { next.max(wanted) } else { next };
            } else {
                wanted = h * fac.min(1.0);
            }
        }
        self.h = Some(wanted);
        Ok(())
    }
}

/// Stationary solution of the linear damped-forced lattice (`mu = gamma = 0`):
/// solves `κΔφ - iδφ = -g` in the eigenbasis of `Δ`.
pub fn linear_fixed_point(params: &ModelParams, forcing: &Forcing) -> Result<LatticeState> {
    params.validate()?;
    if params.mu != 0.0 || params.gamma != 0.0 {
        return Err(Error::InvalidParameter(
            "linear fixed point requires mu = gamma = 0".into(),
        ));
    }
    if params.delta <= 0.0 {
        return Err(Error::Singular("delta must be positive for a unique fixed point".into()));
    }
    let n_half = forcing.n_half();
    let m = 2 * n_half + 1;
    let g = forcing.values();
    let mut phi = vec![Complex64::new(0.0, 0.0); m];
    let shift = Complex64::new(0.0, -params.delta);
    match params.boundary {
        Boundary::ZeroPadding => {
            // v_k(j) = sqrt(2/(m+1)) sin(k j π/(m+1)), eigenvalue 2cos(kπ/(m+1))
            let norm = (2.0 / (m + 1) as f64).sqrt();
            let basis = |k: usize, j: usize| {
                norm * ((k * j) as f64 * std::f64::consts::PI / (m + 1) as f64).sin()
            };
            for k in 1..=m {
                let lambda = 2.0 * (k as f64 * std::f64::consts::PI / (m + 1) as f64).cos();
                let proj: Complex64 = (1..=m).map(|j| g[j - 1] * basis(k, j)).sum();
                let denom = shift + params.kappa * lambda;
                if denom.norm() == 0.0 {
                    return Err(Error::Singular("zero eigenvalue in linear solve".into()));
                }
                let coeff = -proj / denom;
                for j in 1..=m {
                    phi[j - 1] += coeff * basis(k, j);
                }
            }
        }
        Boundary::Periodic => {
            let w = |k: usize, j: usize| {
                Complex64::from_polar(
                    1.0 / (m as f64).sqrt(),
                    2.0 * std::f64::consts::PI * ((k * j) % m) as f64 / m as f64,
                )
            };
            for k in 0..m {
                let lambda = 2.0 * (2.0 * std::f64::consts::PI * k as f64 / m as f64).cos();
                let proj: Complex64 = (0..m).map(|j| g[j] * w(k, j).conj()).sum();
                let denom = shift + params.kappa * lambda;
                if denom.norm() == 0.0 {
                    return Err(Error::Singular("zero eigenvalue in linear solve".into()));
                }
                let coeff = -proj / denom;
                for (j, p) in phi.iter_mut().enumerate() {
                    *p += coeff * w(k, j);
                }
            }
        }
    }
    LatticeState::new(phi, n_half)
}

/// Errors of a step-halving sweep and the fitted global order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFit {
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `ln error` against `ln dt`; `None` when every
    /// error is exactly zero.
    pub order: Option<f64>,
}

/// Step-halving order estimate for RK4 against a reference run at
/// `min(dt) / 64`, comparing final states at `t_end`.
pub fn convergence_order(
    initial: &LatticeState,
    params: &ModelParams,
    forcing: &Forcing,
    kind: RhsKind,
    dts: &[f64],
    t_end: f64,
) -> Result<ConvergenceFit> {
    validate_halving(dts)?;
    let dt_ref = dts.iter().copied().fold(f64::INFINITY, f64::min) / 64.0;
    let run = |dt: f64| {
        integrate_observed(
            initial,
            params,
            forcing,
            kind,
            &StepperConfig::rk4(dt, t_end, t_end),
            |_, _| Ok(()),
        )
    };
    let reference = run(dt_ref)?;
    let mut errors = Vec::with_capacity(dts.len());
    for &dt in dts {
        errors.push(run(dt)?.distance(&reference));
    }
    fit_order(dts, &errors)
}

/// Same sweep against a known exact final state.
pub fn convergence_order_against(
    initial: &LatticeState,
    params: &ModelParams,
    forcing: &Forcing,
    kind: RhsKind,
    dts: &[f64],
    t_end: f64,
    exact: &LatticeState,
) -> Result<ConvergenceFit> {
    validate_halving(dts)?;
    let mut errors = Vec::with_capacity(dts.len());
    for &dt in dts {
        let end = integrate_observed(
            initial,
            params,
            forcing,
            kind,
            &StepperConfig::rk4(dt, t_end, t_end),
            |_, _| Ok(()),
        )?;
        errors.push(end.distance(exact));
    }
    fit_order(dts, &errors)
}

fn validate_halving(dts: &[f64]) -> Result<()> {
    if dts.len() < 3 {
        return Err(Error::InvalidParameter("need at least 3 step sizes".into()));
    }
    for w in dts.windows(2) {
        if !(w[0] > 0.0) || ((w[1] - w[0] / 2.0).abs() > 1e-12 * w[0]) {
            return Err(Error::InvalidParameter(
                "step sizes must halve successively".into(),
            ));
        }
    }
    Ok(())
}

/// Least-squares order fit; errors must decrease strictly as dt shrinks.
pub fn fit_order(dts: &[f64], errors: &[f64]) -> Result<ConvergenceFit> {
    if errors.iter().all(|&e| e == 0.0) {
        return Ok(ConvergenceFit {
            dts: dts.to_vec(),
            errors: errors.to_vec(),
            order: None,
        });
    }
    if errors.iter().any(|&e| e <= 0.0) || errors.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::NonMonotone {
            errors: errors.to_vec(),
        });
    }
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (slope, _) = least_squares(&xs, &ys);
    Ok(ConvergenceFit {
        dts: dts.to_vec(),
        errors: errors.to_vec(),
        order: Some(slope),
    })
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
