//! Ensemble check of absorbing-ball entry and of the Gronwall envelope.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::norm_ensemble;
use crate::diagnostics::{absorbing_estimate, gronwall_envelope, AbsorbingEstimate};
use crate::dynamics::RhsKind;
use crate::error::{Error, Result};
use crate::integrators::{integrate_observed, Scheme, StepperConfig};
use crate::lattice::{Forcing, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingConfig {
    pub ensemble_size: usize,
    /// Radius of the ball holding the initial data.
    pub big_r: f64,
    /// Radius of the absorbing ball.
    pub r: f64,
    pub horizon: f64,
    pub sample_every: f64,
    pub scheme: Scheme,
    /// Envelope width of the random initial states.
    pub initial_width: f64,
    /// Smallest initial norm as a fraction of `big_r`.
    pub min_fraction: f64,
    pub seed: u64,
}

impl AbsorbingConfig {
    pub fn new(ensemble_size: usize, big_r: f64, r: f64, seed: u64) -> Self {
        Self {
            ensemble_size,
            big_r,
            r,
            horizon: 50.0,
            sample_every: 0.05,
            scheme: Scheme::adaptive_default(),
            initial_width: 3.0,
            min_fraction: 0.5,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingMember {
    pub initial_norm: f64,
    /// First sample time after which the trajectory stays in `B_r`.
    pub entry_time: Option<f64>,
    /// Largest norm over samples with `t >= t0`.
    pub max_norm_after_t0: f64,
    /// Largest `||ψ(t)||² - envelope(t)` over all samples.
    pub max_envelope_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingReport {
    pub kind: RhsKind,
    pub estimate: AbsorbingEstimate,
    pub horizon: f64,
    /// Tolerance on squared norms, `10 atol`.
    pub slack: f64,
    pub members: Vec<AbsorbingMember>,
    pub worst_entry_time: Option<f64>,
    /// `r - max ||ψ(t)||` over all members and samples with `t >= t0`.
    pub margin: f64,
    /// Members found outside `B_r` at some sample with `t >= t0`.
    pub counterexamples: Vec<usize>,
    /// Members exceeding the Gronwall envelope by more than `slack`.
    pub envelope_violations: Vec<usize>,
}

impl AbsorbingReport {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty() && self.envelope_violations.is_empty()
    }

    pub fn verdict(&self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(Error::Failed(format!(
                "absorbing check failed: counterexamples {:?}, envelope violations {:?}",
                self.counterexamples, self.envelope_violations
            )))
        }
    }
}

pub fn run_absorbing(
    params: &ModelParams,
    forcing: &Forcing,
    kind: RhsKind,
    config: &AbsorbingConfig,
) -> Result<AbsorbingReport> {
    if config.ensemble_size == 0 {
        return Err(Error::InvalidParameter("ensemble_size must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&config.min_fraction) {
        return Err(Error::InvalidParameter("min_fraction must lie in [0, 1]".into()));
    }
    let estimate = absorbing_estimate(params, forcing, config.big_r, config.r, kind)?;
    if estimate.t0 > config.horizon {
        return Err(Error::InvalidParameter(format!(
            "entry time t0 = {} lies beyond the horizon {}",
            estimate.t0, config.horizon
        )));
    }
    let stepper = StepperConfig {
        scheme: config.scheme,
        t_end: config.horizon,
        sample_every: config.sample_every,
        tail_ks: Vec::new(),
    };
    let slack = 10.0 * config.scheme.atol();
    let initials = norm_ensemble(
        config.seed,
        forcing.n_half(),
        config.initial_width,
        config.ensemble_size,
        config.min_fraction * config.big_r,
        config.big_r,
    );

    let members = initials
        .par_iter()
        .map(|psi0| {
            let n0 = psi0.l2_norm_sq();
            let mut norms = Vec::new();
            let mut max_after: f64 = 0.0;
            let mut excess = f64::NEG_INFINITY;
            integrate_observed(psi0, params, forcing, kind, &stepper, |t, s| {
                let x = s.l2_norm_sq();
                norms.push((t, x.sqrt()));
                if t >= estimate.t0 {
                    max_after = max_after.max(x.sqrt());
                }
                excess = excess.max(x - gronwall_envelope(n0, &estimate, t));
                Ok(())
            })?;
            let entry_time = match norms.iter().rposition(|&(_, n)| n > config.r) {
                None => Some(0.0),
                Some(i) => norms.get(i + 1).map(|&(t, _)| t),
            };
            Ok(AbsorbingMember {
                initial_norm: n0.sqrt(),
                entry_time,
                max_norm_after_t0: max_after,
                max_envelope_excess: excess,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let r_slack = (config.r * config.r + slack).sqrt();
    let counterexamples = indices(&members, |m| m.max_norm_after_t0 > r_slack);
    let envelope_violations = indices(&members, |m| m.max_envelope_excess > slack);
    let worst_entry_time = members
        .iter()
        .map(|m| m.entry_time)
        .try_fold(0.0f64, |acc, t| t.map(|t| acc.max(t)));
    let margin = config.r - members.iter().map(|m| m.max_norm_after_t0).fold(0.0, f64::max);
    Ok(AbsorbingReport {
        kind,
        estimate,
        horizon: config.horizon,
        slack,
        members,
        worst_entry_time,
        margin,
        counterexamples,
        envelope_violations,
    })
}

fn indices(members: &[AbsorbingMember], pred: impl Fn(&AbsorbingMember) -> bool) -> Vec<usize> {
    members
        .iter()
        .enumerate()
        .filter(|(_, m)| pred(m))
        .map(|(i, _)| i)
        .collect()
}
