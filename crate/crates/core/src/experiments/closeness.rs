//! Sweeps over ε comparing Ablowitz-Ladik and DNLS trajectories that start
//! O(ε³) apart with O(ε) data and O(ε) forcing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Profile;
use crate::dynamics::RhsKind;
use crate::error::{Error, Result};
use crate::integrators::{integrate_states, least_squares, Scheme, StepperConfig};
use crate::lattice::{Forcing, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosenessConfig {
    /// Strictly decreasing, at least four values.
    pub epsilons: Vec<f64>,
    /// Horizon over which the peak distance is taken.
    pub t0: f64,
    /// `||y(0)||_{l1} = c0 ε³`.
    pub c0: f64,
    /// `||φ(0)||_{l2} = k_phi ε`.
    pub k_phi: f64,
    pub initial_profile: Profile,
    pub perturbation_profile: Profile,
    /// Forcing is rescaled per ε to `||g|| = forcing_fraction (δ/2) k_phi ε`.
    pub forcing_fraction: f64,
    pub sample_every: f64,
    pub scheme: Scheme,
}

impl ClosenessConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.epsilons.len() < 4 {
            return bad("closeness needs at least 4 epsilons for the slope fit");
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return bad("epsilons must be positive");
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return bad("epsilons must be strictly decreasing");
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return bad("t0 must be positive");
        }
        if !(self.c0 >= 0.0 && self.c0.is_finite()) {
            return bad("c0 must be non-negative");
        }
        if !(self.k_phi > 0.0 && self.k_phi.is_finite()) {
            return bad("k_phi must be positive");
        }
        if !(0.0..=1.0).contains(&self.forcing_fraction) {
            return Err(Error::Hypothesis(
                "forcing_fraction must lie in [0, 1] so that (2/delta)||g|| <= ||phi(0)||".into(),
            ));
        }
        self.initial_profile.validate()?;
        self.perturbation_profile.validate()?;
        self.stepper().validate()
    }

    fn stepper(&self) -> StepperConfig {
        StepperConfig {
            scheme: self.scheme,
            t_end: self.t0,
            sample_every: self.sample_every,
            tail_ks: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosenessPoint {
    pub epsilon: f64,
    pub phi0_norm: f64,
    pub forcing_norm: f64,
    pub y0_l2: f64,
    pub y0_l1: f64,
    /// `sup_{t <= t0} ||y(t)||_{l2}`.
    pub sup_l2: f64,
    /// `sup_{t <= t0} ||y(t)||_{l∞}`.
    pub sup_linf: f64,
    /// Samples where `||y||_{l∞} > ||y||_{l2}`.
    pub embedding_violations: usize,
}

/// Log-log fit `sup ||y|| ≈ C ε^slope`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosenessFitReport {
    pub t0: f64,
    pub points: Vec<ClosenessPoint>,
    /// `None` when some peak distance is exactly zero.
    pub slope_l2: Option<f64>,
    pub prefactor_l2: Option<f64>,
    pub slope_linf: Option<f64>,
    pub prefactor_linf: Option<f64>,
    /// `max_ε sup ||y||_{l2} / ε³`.
    pub max_scaled_l2: f64,
    pub max_scaled_linf: f64,
}

impl ClosenessFitReport {
    pub fn embedding_holds(&self) -> bool {
        self.points.iter().all(|p| p.embedding_violations == 0)
    }
}

/// Runs the sweep. `forcing` supplies the shape of `g`; its norm is reset per ε.
/// The Ablowitz-Ladik run uses `params.mu`, the DNLS run `params.gamma`.
pub fn run_closeness(config: &ClosenessConfig, params: &ModelParams, forcing: &Forcing) -> Result<ClosenessFitReport> {
    config.validate()?;
    params.validate()?;
    if params.delta <= 0.0 {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    let points = config
        .epsilons
        .par_iter()
        .map(|&eps| closeness_point(config, params, forcing, eps))
        .collect::<Result<Vec<_>>>()?;

    let fit = |sup: fn(&ClosenessPoint) -> f64| {
        if points.iter().any(|p| sup(p) <= 0.0) {
            return (None, None);
        }
        let xs: Vec<f64> = points.iter().map(|p| p.epsilon.ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| sup(p).ln()).collect();
        let (slope, intercept) = least_squares(&xs, &ys);
        (Some(slope), Some(intercept.exp()))
    };
    let (slope_l2, prefactor_l2) = fit(|p| p.sup_l2);
    let (slope_linf, prefactor_linf) = fit(|p| p.sup_linf);
    let scaled_max = |sup: fn(&ClosenessPoint) -> f64| {
        points.iter().map(|p| sup(p) / p.epsilon.powi(3)).fold(0.0, f64::max)
    };
    Ok(ClosenessFitReport {
        t0: config.t0,
        max_scaled_l2: scaled_max(|p| p.sup_l2),
        max_scaled_linf: scaled_max(|p| p.sup_linf),
        points,
        slope_l2,
        prefactor_l2,
        slope_linf,
        prefactor_linf,
    })
}

fn closeness_point(config: &ClosenessConfig, params: &ModelParams, forcing: &Forcing, eps: f64) -> Result<ClosenessPoint> {
    let n_half = forcing.n_half();
    let phi0 = config.initial_profile.with_l2_norm(n_half, config.k_phi * eps)?;
    let y0 = if config.c0 == 0.0 {
        phi0.scaled(0.0)
    } else {
        config.perturbation_profile.with_l1_norm(n_half, config.c0 * eps.powi(3))?
    };
    let psi0 = phi0.add(&y0);
    let g = forcing.with_norm(config.forcing_fraction * 0.5 * params.delta * config.k_phi * eps)?;

    let slack = 1.0 + 1e-12;
    if 2.0 / params.delta * g.norm() > phi0.l2_norm() * slack {
        return Err(Error::Hypothesis(format!(
            "(2/delta)||g|| = {} exceeds ||phi(0)|| = {} at epsilon = {eps}",
            2.0 / params.delta * g.norm(),
            phi0.l2_norm()
        )));
    }
    if y0.l2_norm() > y0.l1_norm() * slack || y0.l1_norm() > config.c0 * eps.powi(3) * slack {
        return Err(Error::Hypothesis(format!("initial gap exceeds c0 eps^3 at epsilon = {eps}")));
    }

    let stepper = config.stepper();
    let (_, psi) = integrate_states(&psi0, params, &g, RhsKind::DfAL, &stepper)?;
    let (_, phi) = integrate_states(&phi0, params, &g, RhsKind::DfDNLS, &stepper)?;
    let mut sup_l2: f64 = 0.0;
    let mut sup_linf: f64 = 0.0;
    let mut embedding_violations = 0;
    for (a, b) in psi.iter().zip(&phi) {
        let y = a.sub(b);
        let (l2, linf) = (y.l2_norm(), y.linf_norm());
        if linf > l2 {
            embedding_violations += 1;
        }
        sup_l2 = sup_l2.max(l2);
        sup_linf = sup_linf.max(linf);
    }
    Ok(ClosenessPoint {
        epsilon: eps,
        phi0_norm: phi0.l2_norm(),
        forcing_norm: g.norm(),
        y0_l2: y0.l2_norm(),
        y0_l1: y0.l1_norm(),
        sup_l2,
        sup_linf,
        embedding_violations,
    })
}
