//! Verification campaigns: closeness sweeps, absorbing-set and tail checks,
//! attractor congruence and the monotone uniform bound.

pub mod absorbing;
pub mod closeness;
pub mod congruence;
mod profile;
pub mod tails;
pub mod uniform;
pub mod validation;

pub use profile::Profile;

use crate::lattice::LatticeState;
use crate::sampling::{localized_state, rng_from_seed};
use rand::Rng;

/// Random localized states with l2 norms spread over `[min_norm, max_norm]`.
///
/// Member 0 sits exactly at `max_norm` and member 1 (if any) at `min_norm`;
/// the rest draw their norm uniformly in between.
pub fn norm_ensemble(
    seed: u64,
    n_half: usize,
    width: f64,
    count: usize,
    min_norm: f64,
    max_norm: f64,
) -> Vec<LatticeState> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|i| {
            let norm = match i {
                0 => max_norm,
                1 => min_norm,
                _ => min_norm + (max_norm - min_norm) * rng.random::<f64>(),
            };
            localized_state(&mut rng, n_half, width, norm)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ensemble_norms_stay_in_range() {
        let e = norm_ensemble(5, 16, 3.0, 10, 0.2, 0.9);
        assert_eq!(e.len(), 10);
        assert!((e[0].l2_norm() - 0.9).abs() < 1e-14);
        assert!((e[1].l2_norm() - 0.2).abs() < 1e-14);
        assert!(e.iter().all(|s| s.l2_norm() <= 0.9 + 1e-14 && s.l2_norm() >= 0.2 - 1e-14));
        assert_eq!(e, norm_ensemble(5, 16, 3.0, 10, 0.2, 0.9));
    }
}
