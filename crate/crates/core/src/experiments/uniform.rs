//! Monotone bound `||ψ(t)|| <= ||ψ(0)||` for forced Ablowitz-Ladik runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::uniform_bound_condition;
use crate::dynamics::RhsKind;
use crate::error::{Error, Result};
use crate::integrators::{integrate_observed, StepperConfig};
use crate::lattice::{Forcing, LatticeState, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformBoundReport {
    pub delta_sq: f64,
    /// `3 sum |g_n|^{4/3}`.
    pub forcing_sum: f64,
    /// `δ² < 3 sum |g_n|^{4/3}`; when false the bound is not asserted.
    pub applicable: bool,
    /// Tolerance on norms, `10 atol`.
    pub slack: f64,
    /// Largest `||ψ(t)|| - ||ψ(0)||` over all members and samples.
    pub max_growth: f64,
    pub growth_per_member: Vec<f64>,
    /// Members exceeding the bound (empty when not applicable).
    pub violations: Vec<usize>,
}

impl UniformBoundReport {
    pub fn verdict(&self) -> Result<()> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Failed(format!(
                "norm grew above its initial value for members {:?} (max growth {:e})",
                self.violations, self.max_growth
            )))
        }
    }
}

pub fn run_uniform_bound(
    params: &ModelParams,
    forcing: &Forcing,
    initials: &[LatticeState],
    stepper: &StepperConfig,
) -> Result<UniformBoundReport> {
    if initials.is_empty() {
        return Err(Error::InvalidParameter("need at least one initial state".into()));
    }
    let applicable = uniform_bound_condition(params, forcing);
    let slack = 10.0 * stepper.scheme.atol();
    let growth_per_member = initials
        .par_iter()
        .map(|psi0| {
            let n0 = psi0.l2_norm();
            let mut growth = f64::NEG_INFINITY;
            integrate_observed(psi0, params, forcing, RhsKind::DfAL, stepper, |_, s| {
                growth = growth.max(s.l2_norm() - n0);
                Ok(())
            })?;
            Ok(growth)
        })
        .collect::<Result<Vec<f64>>>()?;
    let violations = if applicable {
        growth_per_member
            .iter()
            .enumerate()
            .filter(|(_, &g)| g > slack)
            .map(|(i, _)| i)
            .collect()
    } else {
        Vec::new()
    };
    Ok(UniformBoundReport {
        delta_sq: params.delta * params.delta,
        forcing_sum: 3.0 * forcing.sum_abs_pow_4_3(),
        applicable,
        slack,
        max_growth: growth_per_member.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        growth_per_member,
        violations,
    })
}
