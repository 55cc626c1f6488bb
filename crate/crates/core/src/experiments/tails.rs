//! Tail masses `sum_{|n| > 2K} |ψ_n|²` along a trajectory and the smallest
//! `(K, T)` beyond which they stay below a threshold.

use serde::{Deserialize, Serialize};

use crate::dynamics::RhsKind;
use crate::error::{Error, Result};
use crate::integrators::{integrate, Scheme, StepperConfig};
use crate::lattice::{Forcing, LatticeState, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailsConfig {
    pub xis: Vec<f64>,
    pub horizon: f64,
    pub sample_every: f64,
    pub scheme: Scheme,
    /// Tail indices to record; empty means every `K` with `2K < N`.
    #[serde(default)]
    pub ks: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailThreshold {
    pub xi: f64,
    /// Smallest recorded `K` whose tail stays below `xi` from some time on.
    pub k: Option<usize>,
    /// Earliest sample time from which that tail stays below `xi`.
    pub t: Option<f64>,
}

/// Comparison of the tails against `tail(0) e^{-λt} + (4/δ) tail(g) (1 - e^{-λt}) / λ`.
/// Informational only: the partial sums also exchange mass across the cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEnvelopeCheck {
    pub decay_rate: f64,
    /// Largest `tail(t) - envelope(t)` over all recorded `K` and samples.
    pub max_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailsReport {
    pub kind: RhsKind,
    pub ks: Vec<usize>,
    pub times: Vec<f64>,
    /// `curves[j][i]`: tail beyond `2 ks[j]` at `times[i]`.
    pub curves: Vec<Vec<f64>>,
    pub thresholds: Vec<TailThreshold>,
    /// Tails are nonincreasing in `K` at every sample.
    pub monotone_in_k: bool,
    pub envelope: Option<TailEnvelopeCheck>,
}

impl TailsReport {
    pub fn all_found(&self) -> bool {
        self.thresholds.iter().all(|t| t.k.is_some())
    }

    pub fn verdict(&self) -> Result<()> {
        let missing: Vec<f64> = self.thresholds.iter().filter(|t| t.k.is_none()).map(|t| t.xi).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Failed(format!(
                "no (K, T) within the truncation for xi = {missing:?}; smallest final tail = {:e}",
                self.curves.last().and_then(|c| c.last()).copied().unwrap_or(f64::NAN)
            )))
        }
    }
}

pub fn run_tails(
    params: &ModelParams,
    forcing: &Forcing,
    kind: RhsKind,
    initial: &LatticeState,
    config: &TailsConfig,
) -> Result<TailsReport> {
    if config.xis.is_empty() || config.xis.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidParameter("xis must be a non-empty list of positive values".into()));
    }
    let n_half = initial.n_half();
    if n_half == 0 {
        return Err(Error::TailOutOfRange { two_k: 0, n_half });
    }
    let mut ks = if config.ks.is_empty() {
        (0..).take_while(|k| 2 * k < n_half).collect()
    } else {
        config.ks.clone()
    };
    ks.sort_unstable();
    ks.dedup();
    let stepper = StepperConfig {
        scheme: config.scheme,
        t_end: config.horizon,
        sample_every: config.sample_every,
        tail_ks: ks.clone(),
    };
    let record = integrate(initial, params, forcing, kind, &stepper)?;
    let curves = record.tails;
    let times = record.times;

    let thresholds = config
        .xis
        .iter()
        .map(|&xi| {
            let hit = ks.iter().zip(&curves).find_map(|(&k, curve)| {
                let last_above = curve.iter().rposition(|&v| v > xi);
                let start = match last_above {
                    None => 0,
                    Some(i) if i + 1 < curve.len() => i + 1,
                    Some(_) => return None,
                };
                Some((k, times[start]))
            });
            TailThreshold {
                xi,
                k: hit.map(|h| h.0),
                t: hit.map(|h| h.1),
            }
        })
        .collect();

    let monotone_in_k = curves
        .windows(2)
        .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| b <= a));

    let decay_rate = match kind {
        RhsKind::DfAL => Some(params.delta - 4.0 * params.mu * initial.l2_norm_sq()),
        RhsKind::DfDNLS => Some(params.delta),
        RhsKind::Combined => None,
    }
    .filter(|&rate| rate > 0.0 && params.delta > 0.0);
    let envelope = decay_rate.map(|rate| {
        let g = forcing.as_state();
        let mut max_excess = f64::NEG_INFINITY;
        for (&k, curve) in ks.iter().zip(&curves) {
            let cut = 2 * k as i64;
            let tail = |s: &LatticeState| -> f64 {
                s.iter_sites().filter(|(n, _)| n.abs() > cut).map(|(_, z)| z.norm_sqr()).sum()
            };
            let (tail0, tail_g) = (tail(initial), tail(&g));
            for (&t, &v) in times.iter().zip(curve) {
                let e = (-rate * t).exp();
                let bound = tail0 * e + 4.0 / params.delta * tail_g / rate * (1.0 - e);
                max_excess = max_excess.max(v - bound);
            }
        }
        TailEnvelopeCheck {
            decay_rate: rate,
            max_excess,
        }
    });

    Ok(TailsReport {
        kind,
        ks,
        times,
        curves,
        thresholds,
        monotone_in_k,
        envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ForcingFamily;
    use num_complex::Complex64;

    fn compact(n_half: usize, half_width: i64, amp: f64) -> LatticeState {
        LatticeState::from_fn(n_half, |n| {
            Complex64::new(if n.abs() <= half_width { amp } else { 0.0 }, 0.0)
        })
        .unwrap()
    }

    fn config(xis: Vec<f64>) -> TailsConfig {
        TailsConfig {
            xis,
            horizon: 10.0,
            sample_every: 0.5,
            scheme: Scheme::adaptive_default(),
            ks: Vec::new(),
        }
    }

    #[test]
    fn large_threshold_is_met_immediately() {
        let p = ModelParams::new(0.0, 1.0, 1.0).unwrap();
        let g = Forcing::realize(ForcingFamily::CompactSupport { amplitude: 0.1, half_width: 2 }, 20).unwrap();
        let psi0 = compact(20, 2, 0.3);
        let rho_sq = 4.0 * g.norm_sq();
        let r = run_tails(&p, &g, RhsKind::DfDNLS, &psi0, &config(vec![psi0.l2_norm_sq() + rho_sq])).unwrap();
        assert_eq!(r.thresholds[0].k, Some(0));
        assert_eq!(r.thresholds[0].t, Some(0.0));
    }

    #[test]
    fn small_threshold_needs_larger_k() {
        let p = ModelParams::new(0.2, 0.0, 1.0).unwrap();
        let g = Forcing::realize(ForcingFamily::CompactSupport { amplitude: 0.1, half_width: 2 }, 30).unwrap();
        let r = run_tails(&p, &g, RhsKind::DfAL, &compact(30, 2, 0.3), &config(vec![1e-6])).unwrap();
        assert!(r.all_found());
        assert!(r.thresholds[0].k.unwrap() > 0);
        assert!(r.monotone_in_k);
        assert!(r.envelope.is_some());
    }

    #[test]
    fn out_of_range_k_is_rejected() {
        let p = ModelParams::new(0.0, 1.0, 1.0).unwrap();
        let mut cfg = config(vec![1e-3]);
        cfg.ks = vec![5];
        let err = run_tails(&p, &Forcing::zero(10), RhsKind::DfDNLS, &compact(10, 1, 0.1), &cfg).unwrap_err();
        assert!(matches!(err, Error::TailOutOfRange { .. }));
    }
}
