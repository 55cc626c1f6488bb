//! Hausdorff semi-distances between post-transient clouds of the
//! Ablowitz-Ladik and DNLS lattices started from a shared ensemble.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::norm_ensemble;
use crate::diagnostics::{absorbing_estimate, cloud_semidistance, uniform_bound_condition, AttractorCloud};
use crate::dynamics::RhsKind;
use crate::error::{Error, Result};
use crate::integrators::{integrate_observed, Scheme, StepperConfig};
use crate::lattice::{Forcing, LatticeState, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongruenceConfig {
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    /// Initial norms lie in `[forcing_fraction k_phi ε, k_phi ε]`.
    pub k_phi: f64,
    /// Radius of the restricted ball for the Ablowitz-Ladik flow.
    pub r_mu: f64,
    /// Forcing is rescaled per ε to `||g|| = forcing_fraction (δ/2) k_phi ε`.
    pub forcing_fraction: f64,
    pub initial_count: usize,
    pub samples_per_trajectory: usize,
    pub sample_spacing: f64,
    /// Defaults to three times the largest closed-form entry time over the
    /// sweep, so every ε shares one burn-in.
    pub burn_in: Option<f64>,
    pub initial_width: f64,
    pub scheme: Scheme,
    pub seed: u64,
}

impl CongruenceConfig {
    pub fn new(epsilons: Vec<f64>, k_phi: f64, r_mu: f64, seed: u64) -> Self {
        Self {
            epsilons,
            k_phi,
            r_mu,
            forcing_fraction: 0.5,
            initial_count: 16,
            samples_per_trajectory: 64,
            sample_spacing: 1.0,
            burn_in: None,
            initial_width: 4.0,
            scheme: Scheme::adaptive_default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return bad("epsilons must be a non-empty list of positive values");
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return bad("epsilons must be strictly decreasing");
        }
        if self.initial_count == 0 || self.samples_per_trajectory == 0 {
            return bad("insufficient cloud samples: initial_count and samples_per_trajectory must be positive");
        }
        if !(self.sample_spacing > 0.0) || !(self.k_phi > 0.0) || !(self.r_mu > 0.0) {
            return bad("sample_spacing, k_phi and r_mu must be positive");
        }
        if !(self.forcing_fraction > 0.0 && self.forcing_fraction < 1.0) {
            return bad("forcing_fraction must lie in (0, 1)");
        }
        if let Some(b) = self.burn_in {
            if !(b >= 0.0) {
                return bad("burn_in must be non-negative");
            }
        }
        Ok(())
    }
}

/// Hypotheses of the congruence statement, evaluated per ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisFlags {
    /// Shared initial data inside `B_{R_μ}`.
    pub shared_data_in_ball: bool,
    /// `(2/δ)||g|| <= ||φ0|| <= k_phi ε <= R_μ` for every member.
    pub size_bounds: bool,
    /// `δ² < 3 sum |g|^{4/3}` and `0 < ||ψ0||² <= R_μ² < δ/(4μ)`.
    pub forcing_and_ball: bool,
}

impl HypothesisFlags {
    pub fn all(&self) -> bool {
        self.shared_data_in_ball && self.size_bounds && self.forcing_and_ball
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongruenceReport {
    pub epsilon: f64,
    pub forcing_norm: f64,
    pub dist_mu_to_gamma: f64,
    pub dist_gamma_to_mu: f64,
    pub cloud_size_mu: usize,
    pub cloud_size_gamma: usize,
    pub burn_in: f64,
    pub absorbing_radius: f64,
    /// Every cloud state lies in the absorbing ball (up to `10 atol`).
    pub clouds_in_absorbing_ball: bool,
    pub hypotheses: HypothesisFlags,
}

impl CongruenceReport {
    /// Upper bound on the Hausdorff distance between the two clouds.
    pub fn hausdorff(&self) -> f64 {
        self.dist_mu_to_gamma.max(self.dist_gamma_to_mu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongruenceSweep {
    pub reports: Vec<CongruenceReport>,
    /// Both semi-distances are nonincreasing as ε decreases.
    pub nonincreasing: bool,
}

impl CongruenceSweep {
    pub fn verdict(&self) -> Result<()> {
        if self.nonincreasing {
            Ok(())
        } else {
            Err(Error::Failed("cloud distances increase as epsilon decreases".into()))
        }
    }
}

/// Samples a cloud: integrates every initial state to `burn_in` (rounded up to
/// a multiple of `spacing`) and keeps `samples` states spaced by `spacing`.
#[allow(clippy::too_many_arguments)]
pub fn sample_cloud(
    params: &ModelParams,
    forcing: &Forcing,
    kind: RhsKind,
    initials: &[LatticeState],
    burn_in: f64,
    samples: usize,
    spacing: f64,
    scheme: Scheme,
) -> Result<AttractorCloud> {
    if initials.is_empty() || samples == 0 {
        return Err(Error::EmptyCloud);
    }
    let first = (burn_in / spacing - 1e-9).ceil().max(0.0) as usize;
    let stepper = StepperConfig {
        scheme,
        t_end: (first + samples - 1) as f64 * spacing,
        sample_every: spacing,
        tail_ks: Vec::new(),
    };
    let runs = initials
        .par_iter()
        .map(|psi0| {
            let mut kept = Vec::with_capacity(samples);
            let mut index = 0usize;
            if first + samples == 1 {
                kept.push((0.0, psi0.clone()));
            } else {
                integrate_observed(psi0, params, forcing, kind, &stepper, |t, s| {
                    if index >= first {
                        kept.push((t, s.clone()));
                    }
                    index += 1;
                    Ok(())
                })?;
            }
            Ok(kept)
        })
        .collect::<Result<Vec<_>>>()?;
    let (times, states) = runs.into_iter().flatten().unzip();
    AttractorCloud::new(states, times, first as f64 * spacing, kind)
}

pub fn run_congruence(params: &ModelParams, forcing: &Forcing, config: &CongruenceConfig) -> Result<CongruenceSweep> {
    config.validate()?;
    params.validate()?;
    if params.delta <= 0.0 {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    let n_half = forcing.n_half();
    let unit = norm_ensemble(
        config.seed,
        n_half,
        config.initial_width,
        config.initial_count,
        config.forcing_fraction,
        1.0,
    );
    let setups = config
        .epsilons
        .iter()
        .map(|&eps| setup_at(params, forcing, config, &unit, eps))
        .collect::<Result<Vec<_>>>()?;
    let burn_in = config
        .burn_in
        .unwrap_or_else(|| 3.0 * setups.iter().map(|s| s.t0).fold(0.0, f64::max));
    let mut reports = Vec::with_capacity(setups.len());
    for setup in &setups {
        reports.push(clouds_at(params, config, setup, burn_in)?);
    }
    let nonincreasing = reports.windows(2).all(|w| {
        w[1].dist_mu_to_gamma <= w[0].dist_mu_to_gamma && w[1].dist_gamma_to_mu <= w[0].dist_gamma_to_mu
    });
    Ok(CongruenceSweep { reports, nonincreasing })
}

struct Setup {
    eps: f64,
    forcing: Forcing,
    initials: Vec<LatticeState>,
    hypotheses: HypothesisFlags,
    absorbing_radius: f64,
    t0: f64,
}

fn setup_at(
    params: &ModelParams,
    template: &Forcing,
    config: &CongruenceConfig,
    unit: &[LatticeState],
    eps: f64,
) -> Result<Setup> {
    let delta = params.delta;
    let size = config.k_phi * eps;
    let g = template.with_norm(config.forcing_fraction * 0.5 * delta * size)?;
    let initials: Vec<LatticeState> = unit.iter().map(|s| s.scaled(size)).collect();
    let slack = 1.0 + 1e-12;
    let max_norm = initials.iter().map(|s| s.l2_norm()).fold(0.0, f64::max);
    let min_norm = initials.iter().map(|s| s.l2_norm()).fold(f64::INFINITY, f64::min);
    let al_limit = if params.mu > 0.0 { delta / (4.0 * params.mu) } else { f64::INFINITY };
    let hypotheses = HypothesisFlags {
        shared_data_in_ball: max_norm <= config.r_mu * slack,
        size_bounds: 2.0 / delta * g.norm() <= min_norm * slack && max_norm <= size * slack && size <= config.r_mu,
        forcing_and_ball: uniform_bound_condition(params, &g)
            && min_norm > 0.0
            && config.r_mu * config.r_mu < al_limit,
    };
    if !hypotheses.all() {
        return Err(Error::Hypothesis(format!(
            "congruence hypotheses fail at epsilon = {eps}: {hypotheses:?}"
        )));
    }

    // Absorbing ball halfway (in squared norm) between ρ and the data radius.
    let (mut rho_sq, mut rate) = (0.0f64, f64::INFINITY);
    for kind in [RhsKind::DfAL, RhsKind::DfDNLS] {
        let e = absorbing_estimate(params, &g, size, size, kind)?;
        rho_sq = rho_sq.max(e.rho_sq);
        rate = rate.min(e.decay_rate);
    }
    let absorbing_radius = (0.5 * (rho_sq + size * size)).sqrt();
    let t0 = [RhsKind::DfAL, RhsKind::DfDNLS]
        .iter()
        .map(|&k| absorbing_estimate(params, &g, size, absorbing_radius, k).map(|e| e.t0))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(Setup {
        eps,
        forcing: g,
        initials,
        hypotheses,
        absorbing_radius,
        t0,
    })
}

fn clouds_at(params: &ModelParams, config: &CongruenceConfig, setup: &Setup, burn_in: f64) -> Result<CongruenceReport> {
    let cloud = |kind| {
        sample_cloud(
            params,
            &setup.forcing,
            kind,
            &setup.initials,
            burn_in,
            config.samples_per_trajectory,
            config.sample_spacing,
            config.scheme,
        )
    };
    let mu_cloud = cloud(RhsKind::DfAL)?;
    let gamma_cloud = cloud(RhsKind::DfDNLS)?;
    let ball_sq = setup.absorbing_radius.powi(2) + 10.0 * config.scheme.atol();
    let inside = |c: &AttractorCloud| c.states.iter().all(|s| s.l2_norm_sq() <= ball_sq);
    Ok(CongruenceReport {
        epsilon: setup.eps,
        forcing_norm: setup.forcing.norm(),
        dist_mu_to_gamma: cloud_semidistance(&mu_cloud, &gamma_cloud)?,
        dist_gamma_to_mu: cloud_semidistance(&gamma_cloud, &mu_cloud)?,
        cloud_size_mu: mu_cloud.len(),
        cloud_size_gamma: gamma_cloud.len(),
        burn_in: mu_cloud.burn_in,
        absorbing_radius: setup.absorbing_radius,
        clouds_in_absorbing_ball: inside(&mu_cloud) && inside(&gamma_cloud),
        hypotheses: setup.hypotheses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::hausdorff_semidistance;
    use crate::lattice::ForcingFamily;

    #[test]
    fn unforced_clouds_collapse_to_origin() {
        let p = ModelParams::new(0.5, 0.5, 1.0).unwrap();
        let g = Forcing::zero(10);
        let initials = norm_ensemble(2, 10, 2.0, 3, 0.2, 0.5);
        let a = sample_cloud(&p, &g, RhsKind::DfAL, &initials, 30.0, 4, 1.0, Scheme::adaptive_default()).unwrap();
        let b = sample_cloud(&p, &g, RhsKind::DfDNLS, &initials, 30.0, 4, 1.0, Scheme::adaptive_default()).unwrap();
        assert_eq!(a.len(), 12);
        assert!(a.max_norm() < 0.5 * (-30.0f64).exp() * 1.01);
        assert!(hausdorff_semidistance(&a.states, &b.states).unwrap() < 1e-12);
    }

    #[test]
    fn linear_systems_give_identical_clouds() {
        let p = ModelParams::new(0.0, 0.0, 0.2).unwrap();
        let g = Forcing::realize(ForcingFamily::Gaussian { amplitude: 1.0, width: 8.0 }, 24).unwrap();
        let mut cfg = CongruenceConfig::new(vec![0.2, 0.1], 5.0, 1.5, 1);
        cfg.initial_count = 2;
        cfg.samples_per_trajectory = 3;
        let sweep = run_congruence(&p, &g, &cfg).unwrap();
        for r in &sweep.reports {
            assert_eq!(r.dist_mu_to_gamma, 0.0);
            assert_eq!(r.dist_gamma_to_mu, 0.0);
            assert_eq!(r.cloud_size_mu, 6);
        }
    }

    #[test]
    fn hypothesis_failure_refuses_to_run() {
        let p = ModelParams::new(0.0, 0.0, 0.5).unwrap();
        let mut cfg = CongruenceConfig::new(vec![0.2], 5.0, 0.5, 1);
        cfg.initial_count = 1;
        let g = Forcing::realize(ForcingFamily::Gaussian { amplitude: 1.0, width: 6.0 }, 16).unwrap();
        assert!(matches!(run_congruence(&p, &g, &cfg), Err(Error::Hypothesis(_))));
        assert!(matches!(
            run_congruence(&p, &Forcing::zero(16), &CongruenceConfig::new(vec![0.2], 5.0, 1.5, 1)),
            Err(Error::Hypothesis(_))
        ));
    }
}
