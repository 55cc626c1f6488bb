use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeState;
use crate::sampling::{localized_state, rng_from_seed};

/// Named shapes for initial data and perturbations. Shapes are unnormalized;
/// callers rescale them to the norm they need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    /// `exp(-n² / (2 width²))`.
    Gaussian { width: f64 },
    /// `sech(n / width)`, the envelope of a lattice soliton.
    Sech { width: f64 },
    SingleSite,
    /// Complex normal entries under a Gaussian envelope, drawn from `seed`.
    Random { width: f64, seed: u64 },
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Profile::Gaussian { width } | Profile::Sech { width } | Profile::Random { width, .. } => {
                if width > 0.0 && width.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("profile width must be positive".into()))
                }
            }
            Profile::SingleSite => Ok(()),
        }
    }

    pub fn shape(&self, n_half: usize) -> Result<LatticeState> {
        self.validate()?;
        let real = |f: &dyn Fn(f64) -> f64| LatticeState::from_fn(n_half, |n| Complex64::new(f(n as f64), 0.0));
        match *self {
            Profile::Gaussian { width } => real(&|x| (-0.5 * (x / width).powi(2)).exp()),
            Profile::Sech { width } => real(&|x| 1.0 / (x / width).cosh()),
            Profile::SingleSite => real(&|x| if x == 0.0 { 1.0 } else { 0.0 }),
            Profile::Random { width, seed } => Ok(localized_state(&mut rng_from_seed(seed), n_half, width, 1.0)),
        }
    }

    /// Shape rescaled to the given l2 norm.
    pub fn with_l2_norm(&self, n_half: usize, norm: f64) -> Result<LatticeState> {
        let s = self.shape(n_half)?;
        Ok(s.scaled(norm / s.l2_norm()))
    }

    /// Shape rescaled to the given l1 norm.
    pub fn with_l1_norm(&self, n_half: usize, norm: f64) -> Result<LatticeState> {
        let s = self.shape(n_half)?;
        Ok(s.scaled(norm / s.l1_norm()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescaling_hits_target_norms() {
        for p in [
            Profile::Gaussian { width: 3.0 },
            Profile::Sech { width: 2.0 },
            Profile::SingleSite,
            Profile::Random { width: 4.0, seed: 1 },
        ] {
            let a = p.with_l2_norm(20, 0.3).unwrap();
            assert!((a.l2_norm() - 0.3).abs() < 1e-15);
            let b = p.with_l1_norm(20, 0.3).unwrap();
            assert!((b.l1_norm() - 0.3).abs() < 1e-15);
            assert!(b.l2_norm() <= b.l1_norm());
        }
    }

    #[test]
    fn bad_width_is_rejected() {
        assert!(Profile::Sech { width: 0.0 }.shape(4).is_err());
    }
}
