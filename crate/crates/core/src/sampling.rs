//! Seeded random states and ball sampling.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::lattice::LatticeState;

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// State with i.i.d. standard complex normal entries.
pub fn gaussian_state<R: Rng + ?Sized>(rng: &mut R, n_half: usize) -> LatticeState {
    let values = (0..2 * n_half + 1).map(|_| complex_normal(rng)).collect();
    LatticeState::from_vec_unchecked(values, n_half)
}

/// Random state with unit l2 norm.
pub fn unit_state<R: Rng + ?Sized>(rng: &mut R, n_half: usize) -> LatticeState {
    loop {
        let s = gaussian_state(rng, n_half);
        let norm = s.l2_norm();
        if norm > 0.0 {
            return s.scaled(1.0 / norm);
        }
    }
}

/// Uniform sample from the ball of radius `radius` in the truncated space.
///
/// Direction is uniform on the unit sphere; the radius is `radius * u^(1/d)`
/// with `d = 2 (2N + 1)` real dimensions.
pub fn ball_state<R: Rng + ?Sized>(rng: &mut R, n_half: usize, radius: f64) -> LatticeState {
    let dim = 2.0 * (2 * n_half + 1) as f64;
    let u: f64 = rng.random();
    unit_state(rng, n_half).scaled(radius * u.powf(1.0 / dim))
}

/// Random state localized under a Gaussian envelope of the given width,
/// scaled to l2 norm `norm`.
pub fn localized_state<R: Rng + ?Sized>(
    rng: &mut R,
    n_half: usize,
    width: f64,
    norm: f64,
) -> LatticeState {
    loop {
        let values: Vec<Complex64> = crate::lattice::sites(n_half)
            .map(|n| {
                let x = n as f64 / width;
                complex_normal(rng) * (-0.5 * x * x).exp()
            })
            .collect();
        let s = LatticeState::from_vec_unchecked(values, n_half);
        let current = s.l2_norm();
        if current > 0.0 {
            return s.scaled(norm / current);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = rng_from_seed(3);
        for _ in 0..200 {
            let s = ball_state(&mut rng, 4, 2.0);
            assert!(s.l2_norm() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn seeded_streams_are_reproducible() {
        let a = gaussian_state(&mut rng_from_seed(9), 6);
        let b = gaussian_state(&mut rng_from_seed(9), 6);
        assert_eq!(a, b);
    }

    #[test]
    fn localized_state_has_requested_norm() {
        let s = localized_state(&mut rng_from_seed(1), 20, 3.0, 0.7);
        assert!((s.l2_norm() - 0.7).abs() < 1e-14);
        assert!(s.at(20).norm() < s.linf_norm());
    }
}
