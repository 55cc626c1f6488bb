//! Functionals evaluated along trajectories: the logarithmic functional `P`,
//! Gronwall envelopes, absorbing-ball estimates, tail masses and Hausdorff
//! semi-distances between sampled state clouds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::RhsKind;
use crate::error::{Error, Result};
use crate::lattice::{Forcing, LatticeState, ModelParams};

/// `P = sum_n ln(1 + |ψ_n|²)`.
pub fn p_functional(state: &LatticeState) -> f64 {
    state
        .amplitudes()
        .iter()
        .map(|z| z.norm_sqr().ln_1p())
        .sum()
}

/// Upper bound on `dP/dt` for the Ablowitz-Ladik lattice with `μ = 1`:
/// `-2δ sum (|ψ_n|²/(1+|ψ_n|²))² + (2/δ)||g||²`.
pub fn p_derivative_bound(state: &LatticeState, params: &ModelParams, forcing: &Forcing) -> Result<f64> {
    params.require_damping()?;
    let delta = params.delta;
    let sum: f64 = state
        .amplitudes()
        .iter()
        .map(|z| {
            let a = z.norm_sqr();
            let q = a / (1.0 + a);
            q * q
        })
        .sum();
    Ok(-2.0 * delta * sum + 2.0 / delta * forcing.norm_sq())
}

/// Exact `dP/dt` for the Ablowitz-Ladik lattice with `μ = 1`:
/// `2 sum (Re ψ Im g - Re g Im ψ - δ|ψ|²) / (1 + |ψ|²)`.
pub fn p_derivative_exact(state: &LatticeState, params: &ModelParams, forcing: &Forcing) -> f64 {
    state
        .amplitudes()
        .iter()
        .zip(forcing.values())
        .map(|(psi, g)| {
            let a = psi.norm_sqr();
            2.0 * (psi.re * g.im - g.re * psi.im - params.delta * a) / (1.0 + a)
        })
        .sum()
}

/// `δ² < 3 sum |g_n|^{4/3}`.
pub fn uniform_bound_condition(params: &ModelParams, forcing: &Forcing) -> bool {
    params.delta * params.delta < 3.0 * forcing.sum_abs_pow_4_3()
}

/// Closed-form absorbing-ball data for one system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingEstimate {
    /// Asymptotic bound on `limsup ||ψ(t)||²`.
    pub rho_sq: f64,
    /// Radius of the absorbing ball.
    pub r: f64,
    /// Radius of the ball holding the initial data.
    #[serde(rename = "R")]
    pub big_r: f64,
    /// Guaranteed entry time into `B_r` for data in `B_R`.
    pub t0: f64,
    /// `δ - 4μR²` (Ablowitz-Ladik) or `δ` (DNLS).
    pub decay_rate: f64,
}

pub fn absorbing_estimate(
    params: &ModelParams,
    forcing: &Forcing,
    big_r: f64,
    r: f64,
    kind: RhsKind,
) -> Result<AbsorbingEstimate> {
    params.require_damping()?;
    if !(big_r >= 0.0 && r > 0.0) {
        return Err(Error::InvalidParameter("radii must be positive".into()));
    }
    let delta = params.delta;
    let g_sq = forcing.norm_sq();
    let (decay_rate, rho_sq) = match kind {
        RhsKind::DfAL => {
            let limit = delta / (4.0 * params.mu);
            if params.mu > 0.0 && big_r * big_r >= limit {
                return Err(Error::Hypothesis(format!(
                    "R^2 = {} must be below delta/(4 mu) = {limit}",
                    big_r * big_r
                )));
            }
            let rate = delta - 4.0 * params.mu * big_r * big_r;
            (rate, 4.0 / delta * g_sq / rate)
        }
        RhsKind::DfDNLS => (delta, 4.0 / (delta * delta) * g_sq),
        RhsKind::Combined => {
            return Err(Error::InvalidParameter(
                "absorbing estimates exist for dfAL and dfDNLS only".into(),
            ))
        }
    };
    if r * r <= rho_sq {
        return Err(Error::Hypothesis(format!(
            "absorbing radius r = {r} must exceed rho = {}",
            rho_sq.sqrt()
        )));
    }
    let t0 = if big_r <= r {
        0.0
    } else {
        ((big_r * big_r - rho_sq) / (r * r - rho_sq)).ln() / decay_rate
    };
    Ok(AbsorbingEstimate {
        rho_sq,
        r,
        big_r,
        t0,
        decay_rate,
    })
}

/// Gronwall envelope `||ψ(0)||² e^{-λt} + ρ²(1 - e^{-λt})`.
pub fn gronwall_envelope(initial_norm_sq: f64, estimate: &AbsorbingEstimate, t: f64) -> f64 {
    let decay = (-estimate.decay_rate * t).exp();
    initial_norm_sq * decay + estimate.rho_sq * (1.0 - decay)
}

/// `sum_{|n| > 2K} |ψ_n|²`.
pub fn tail_mass(state: &LatticeState, k: usize) -> Result<f64> {
    let n_half = state.n_half();
    if 2 * k >= n_half {
        return Err(Error::TailOutOfRange {
            two_k: 2 * k,
            n_half,
        });
    }
    let cut = 2 * k as i64;
    Ok(state
        .iter_sites()
        .filter(|(n, _)| n.abs() > cut)
        .map(|(_, z)| z.norm_sqr())
        .sum())
}

/// Finite sample of post-transient states standing in for an attractor.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractorCloud {
    pub states: Vec<LatticeState>,
    pub sample_times: Vec<f64>,
    pub burn_in: f64,
    pub system: RhsKind,
}

impl AttractorCloud {
    pub fn new(
        states: Vec<LatticeState>,
        sample_times: Vec<f64>,
        burn_in: f64,
        system: RhsKind,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if states.len() != sample_times.len() {
            return Err(Error::InvalidParameter(
                "cloud states and sample times differ in length".into(),
            ));
        }
        if sample_times.iter().any(|&t| t < burn_in) {
            return Err(Error::InvalidParameter(
                "cloud sample taken before burn-in".into(),
            ));
        }
        Ok(Self {
            states,
            sample_times,
            burn_in,
            system,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        self.states.iter().map(|s| s.l2_norm()).fold(0.0, f64::max)
    }
}

/// `sup_{u in U} inf_{v in V} ||u - v||`, brute force over all pairs.
pub fn hausdorff_semidistance(u: &[LatticeState], v: &[LatticeState]) -> Result<f64> {
    if u.is_empty() || v.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let sup_sq = u
        .par_iter()
        .map(|a| v.iter().map(|b| a.distance_sq(b)).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max);
    Ok(sup_sq.sqrt())
}

pub fn cloud_semidistance(u: &AttractorCloud, v: &AttractorCloud) -> Result<f64> {
    hausdorff_semidistance(&u.states, &v.states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ForcingFamily;
    use crate::sampling::{gaussian_state, localized_state, rng_from_seed};
    use num_complex::Complex64;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn p_functional_examples() {
        assert_eq!(p_functional(&LatticeState::zeros(4)), 0.0);
        let s = LatticeState::single_site(4, 1, Complex64::new(0.0, 1.0)).unwrap();
        assert!((p_functional(&s) - 2f64.ln()).abs() < 1e-15);
        let mut rng = rng_from_seed(0);
        for _ in 0..20 {
            let s = gaussian_state(&mut rng, 10);
            assert!(p_functional(&s) <= s.l2_norm_sq());
        }
    }

    #[test]
    fn p_derivative_bound_examples() {
        let p = ModelParams::new(1.0, 0.0, 0.5).unwrap();
        let g = Forcing::realize(ForcingFamily::SingleSite { amplitude: 0.3 }, 4).unwrap();
        let b = p_derivative_bound(&LatticeState::zeros(4), &p, &g).unwrap();
        assert!((b - 2.0 / 0.5 * 0.09).abs() < 1e-15);
        let s = gaussian_state(&mut rng_from_seed(1), 4);
        assert!(p_derivative_bound(&s, &p, &Forcing::zero(4)).unwrap() <= 0.0);
        // exact derivative never exceeds the bound
        let mut rng = rng_from_seed(2);
        for _ in 0..100 {
            let s = gaussian_state(&mut rng, 4);
            assert!(p_derivative_exact(&s, &p, &g) <= p_derivative_bound(&s, &p, &g).unwrap() + 1e-14);
        }
    }

    #[test]
    fn uniform_bound_condition_examples() {
        let g1 = Forcing::realize(ForcingFamily::SingleSite { amplitude: 1.0 }, 2).unwrap();
        assert!(uniform_bound_condition(&ModelParams::new(1.0, 0.0, 0.1).unwrap(), &g1));
        assert!(!uniform_bound_condition(&ModelParams::new(1.0, 0.0, 0.1).unwrap(), &Forcing::zero(2)));
        let g = Forcing::realize(ForcingFamily::SingleSite { amplitude: 0.5 }, 2).unwrap();
        assert!(!uniform_bound_condition(&ModelParams::new(1.0, 0.0, 2.0).unwrap(), &g));
    }

    fn forcing_with_norm_sq(n_sq: f64) -> Forcing {
        Forcing::realize(ForcingFamily::SingleSite { amplitude: n_sq.sqrt() }, 4).unwrap()
    }

    #[test]
    fn absorbing_estimate_dnls() {
        let p = ModelParams::new(0.0, 1.0, 1.0).unwrap();
        let est = absorbing_estimate(&p, &forcing_with_norm_sq(0.01), 1.0, 0.3, RhsKind::DfDNLS).unwrap();
        assert!((est.rho_sq - 0.04).abs() < 1e-15);
        assert_eq!(est.decay_rate, 1.0);
        let t0 = ((1.0f64 - 0.04) / (0.09 - 0.04)).ln();
        assert!((est.t0 - t0).abs() < 1e-12);
        assert!((est.t0 - 2.955).abs() < 1e-3);
    }

    #[test]
    fn absorbing_estimate_al() {
        let p = ModelParams::new(0.1, 0.0, 1.0).unwrap();
        let est = absorbing_estimate(&p, &forcing_with_norm_sq(0.01), 1.0, 0.3, RhsKind::DfAL).unwrap();
        assert!((est.decay_rate - 0.6).abs() < 1e-15);
        assert!((est.rho_sq - 0.04 / 0.6).abs() < 1e-15);
        assert!(est.t0 > 0.0);
    }

    #[test]
    fn absorbing_estimate_gates() {
        let p = ModelParams::new(1.0, 0.0, 1.0).unwrap();
        let err = absorbing_estimate(&p, &forcing_with_norm_sq(0.01), 1.0, 0.3, RhsKind::DfAL).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
        let p = ModelParams::new(0.0, 1.0, 1.0).unwrap();
        let err = absorbing_estimate(&p, &forcing_with_norm_sq(0.01), 1.0, 0.2, RhsKind::DfDNLS).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
        assert!(absorbing_estimate(&p, &forcing_with_norm_sq(0.01), 1.0, 0.3, RhsKind::Combined).is_err());
    }

    #[test]
    fn envelope_examples() {
        let p = ModelParams::new(0.0, 1.0, 1.0).unwrap();
        let est = absorbing_estimate(&p, &forcing_with_norm_sq(0.01), 1.0, 0.3, RhsKind::DfDNLS).unwrap();
        assert_eq!(gronwall_envelope(0.8, &est, 0.0), 0.8);
        assert!((gronwall_envelope(0.8, &est, 1e3) - est.rho_sq).abs() < 1e-15);
        assert!((gronwall_envelope(1.0, &est, 2f64.ln()) - 0.52).abs() < 1e-15);
    }

    #[test]
    fn tail_mass_examples() {
        let s = LatticeState::from_fn(10, |n| if n.abs() <= 4 { c(1.0) } else { c(0.0) }).unwrap();
        assert_eq!(tail_mass(&s, 2).unwrap(), 0.0);
        let s = gaussian_state(&mut rng_from_seed(3), 10);
        let k0 = tail_mass(&s, 0).unwrap();
        assert!((k0 - (s.l2_norm_sq() - s.at(0).norm_sqr())).abs() < 1e-12);
        assert!(matches!(tail_mass(&s, 5), Err(Error::TailOutOfRange { .. })));
        let d = localized_state(&mut rng_from_seed(3), 30, 4.0, 1.0);
        let tails: Vec<f64> = (0..15).map(|k| tail_mass(&d, k).unwrap()).collect();
        assert!(tails.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn hausdorff_examples() {
        let mut rng = rng_from_seed(7);
        let u: Vec<_> = (0..5).map(|_| gaussian_state(&mut rng, 3)).collect();
        assert_eq!(hausdorff_semidistance(&u, &u).unwrap(), 0.0);
        let zero = vec![LatticeState::zeros(3)];
        let x = vec![u[0].clone()];
        assert!((hausdorff_semidistance(&zero, &x).unwrap() - u[0].l2_norm()).abs() < 1e-15);
        assert!((hausdorff_semidistance(&x, &zero).unwrap() - u[0].l2_norm()).abs() < 1e-15);
        // asymmetric: {0} ⊂ {0, x}
        let both = vec![LatticeState::zeros(3), u[0].clone()];
        assert_eq!(hausdorff_semidistance(&zero, &both).unwrap(), 0.0);
        assert!(hausdorff_semidistance(&both, &zero).unwrap() > 0.0);
        assert!(matches!(hausdorff_semidistance(&[], &u), Err(Error::EmptyCloud)));
    }

    #[test]
    fn cloud_rejects_samples_before_burn_in() {
        let s = vec![LatticeState::zeros(1)];
        assert!(AttractorCloud::new(s.clone(), vec![1.0], 2.0, RhsKind::DfAL).is_err());
        assert!(AttractorCloud::new(vec![], vec![], 0.0, RhsKind::DfAL).is_err());
        assert!(AttractorCloud::new(s, vec![3.0], 2.0, RhsKind::DfAL).is_ok());
    }
}
