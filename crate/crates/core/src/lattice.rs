//! Lattice states, model parameters, forcing families and the truncation policy.
//!
//! The infinite lattice is truncated to sites `-N..=N`; amplitudes are stored
//! in a flat `Vec<Complex64>` (interleaved re/im in memory) with site `n` at
//! slot `n + N`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How neighbours outside the truncation are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Sites beyond `|n| = N` are zero.
    #[default]
    ZeroPadding,
    /// Site `N + 1` is identified with `-N`.
    Periodic,
}

/// A finite truncation of a complex lattice sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    amplitudes: Vec<Complex64>,
    n_half: usize,
}

impl LatticeState {
    /// Builds a state from `2 * n_half + 1` finite amplitudes ordered from site `-n_half`.
    pub fn new(values: Vec<Complex64>, n_half: usize) -> Result<Self> {
        let expected = 2 * n_half + 1;
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: values.len(),
                n_half,
            });
        }
        check_finite(&values, n_half)?;
        Ok(Self {
            amplitudes: values,
            n_half,
        })
    }

    pub fn zeros(n_half: usize) -> Self {
        Self {
            amplitudes: vec![Complex64::new(0.0, 0.0); 2 * n_half + 1],
            n_half,
        }
    }

    /// Evaluates `f(n)` at every site `n` in `-n_half..=n_half`.
    pub fn from_fn(n_half: usize, mut f: impl FnMut(i64) -> Complex64) -> Result<Self> {
        let values = sites(n_half).map(&mut f).collect();
        Self::new(values, n_half)
    }

    /// Unit amplitude `value` at site `site`, zero elsewhere.
    pub fn single_site(n_half: usize, site: i64, value: Complex64) -> Result<Self> {
        if site.unsigned_abs() as usize > n_half {
            return Err(Error::InvalidParameter(format!(
                "site {site} outside truncation |n| <= {n_half}"
            )));
        }
        let mut state = Self::zeros(n_half);
        state.amplitudes[slot(site, n_half)] = value;
        check_finite(&state.amplitudes, n_half)?;
        Ok(state)
    }

    pub(crate) fn from_vec_unchecked(amplitudes: Vec<Complex64>, n_half: usize) -> Self {
        debug_assert_eq!(amplitudes.len(), 2 * n_half + 1);
        Self {
            amplitudes,
            n_half,
        }
    }

    pub fn n_half(&self) -> usize {
        self.n_half
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// Amplitude at lattice site `n`; zero outside the truncation.
    pub fn at(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.n_half {
            Complex64::new(0.0, 0.0)
        } else {
            self.amplitudes[slot(n, self.n_half)]
        }
    }

    /// Iterates `(n, amplitude)` pairs from `-N` to `N`.
    pub fn iter_sites(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        sites(self.n_half).zip(self.amplitudes.iter().copied())
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn l4_norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|z| z.norm_sqr() * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
            .sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn l1_norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm()).sum()
    }

    /// Complex inner product `(self, other) = sum self_n * conj(other_n)`.
    pub fn inner(&self, other: &LatticeState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    /// `||self - other||_{l2}`.
    pub fn distance(&self, other: &LatticeState) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn distance_sq(&self, other: &LatticeState) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum()
    }

    pub fn sub(&self, other: &LatticeState) -> LatticeState {
        let amplitudes = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a - b)
            .collect();
        Self::from_vec_unchecked(amplitudes, self.n_half)
    }

    pub fn add(&self, other: &LatticeState) -> LatticeState {
        let amplitudes = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a + b)
            .collect();
        Self::from_vec_unchecked(amplitudes, self.n_half)
    }

    pub fn scaled(&self, factor: f64) -> LatticeState {
        let amplitudes = self.amplitudes.iter().map(|a| a * factor).collect();
        Self::from_vec_unchecked(amplitudes, self.n_half)
    }

    /// Embeds the state into a wider truncation, zero-filling the new sites.
    pub fn padded(&self, n_half: usize) -> Result<LatticeState> {
        if n_half < self.n_half {
            return Err(Error::InvalidParameter(format!(
                "cannot pad from n_half={} down to {n_half}",
                self.n_half
            )));
        }
        Self::from_fn(n_half, |n| self.at(n))
    }
}

pub(crate) fn slot(n: i64, n_half: usize) -> usize {
    (n + n_half as i64) as usize
}

pub(crate) fn sites(n_half: usize) -> impl Iterator<Item = i64> {
    let n = n_half as i64;
    -n..=n
}

pub(crate) fn check_finite(values: &[Complex64], n_half: usize) -> Result<()> {
    match values.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        Some(i) => Err(Error::NonFinite {
            site: i as i64 - n_half as i64,
        }),
        None => Ok(()),
    }
}

/// Coupling, nonlinearity and damping constants plus the boundary policy.
///
/// `gamma = 0` gives the damped-forced Ablowitz-Ladik lattice, `mu = 0` the
/// damped-forced DNLS lattice; both nonzero is the combined system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kappa: f64,
    pub mu: f64,
    pub gamma: f64,
    pub delta: f64,
    pub boundary: Boundary,
}

impl ModelParams {
    /// Dissipative parameters with `kappa = 1` and zero-padding boundaries.
    pub fn new(mu: f64, gamma: f64, delta: f64) -> Result<Self> {
        let params = Self {
            kappa: 1.0,
            mu,
            gamma,
            delta,
            boundary: Boundary::ZeroPadding,
        };
        params.validate()?;
        if delta <= 0.0 {
            return Err(Error::InvalidParameter("delta must be positive".into()));
        }
        Ok(params)
    }

    /// Undamped parameters (`delta = 0`) for conservative-limit diagnostics.
    pub fn conservative(mu: f64, gamma: f64) -> Result<Self> {
        let params = Self {
            kappa: 1.0,
            mu,
            gamma,
            delta: 0.0,
            boundary: Boundary::ZeroPadding,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    /// Checks finiteness and signs; `delta = 0` is accepted here.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa", self.kappa),
            ("mu", self.mu),
            ("gamma", self.gamma),
            ("delta", self.delta),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        if self.mu < 0.0 {
            return Err(Error::InvalidParameter("mu must be non-negative".into()));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidParameter("gamma must be non-negative".into()));
        }
        if self.delta < 0.0 {
            return Err(Error::InvalidParameter("delta must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn require_damping(&self) -> Result<()> {
        if self.delta > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter("delta must be positive".into()))
        }
    }
}

/// Named shapes for the external force `g`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForcingFamily {
    #[default]
    Zero,
    /// `g_0 = amplitude`, zero elsewhere.
    SingleSite { amplitude: f64 },
    /// `amplitude * exp(-n^2 / (2 width^2))`.
    Gaussian { amplitude: f64, width: f64 },
    /// `amplitude * exp(-decay * |n|)`.
    ExponentialDecay { amplitude: f64, decay: f64 },
    /// `amplitude` on `|n| <= half_width`, zero outside.
    CompactSupport { amplitude: f64, half_width: usize },
}

impl ForcingFamily {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("forcing {name} must be finite")))
            }
        };
        match *self {
            ForcingFamily::Zero => Ok(()),
            ForcingFamily::SingleSite { amplitude } => finite("amplitude", amplitude),
            ForcingFamily::Gaussian { amplitude, width } => {
                finite("amplitude", amplitude)?;
                if !(width > 0.0 && width.is_finite()) {
                    return Err(Error::InvalidParameter("forcing width must be positive".into()));
                }
                Ok(())
            }
            ForcingFamily::ExponentialDecay { amplitude, decay } => {
                finite("amplitude", amplitude)?;
                if !(decay > 0.0 && decay.is_finite()) {
                    return Err(Error::InvalidParameter("forcing decay must be positive".into()));
                }
                Ok(())
            }
            ForcingFamily::CompactSupport { amplitude, .. } => finite("amplitude", amplitude),
        }
    }

    fn value_at(&self, n: i64) -> f64 {
        match *self {
            ForcingFamily::Zero => 0.0,
            ForcingFamily::SingleSite { amplitude } => {
                if n == 0 {
                    amplitude
                } else {
                    0.0
                }
            }
            ForcingFamily::Gaussian { amplitude, width } => {
                let x = n as f64 / width;
                amplitude * (-0.5 * x * x).exp()
            }
            ForcingFamily::ExponentialDecay { amplitude, decay } => {
                amplitude * (-decay * n.unsigned_abs() as f64).exp()
            }
            ForcingFamily::CompactSupport {
                amplitude,
                half_width,
            } => {
                if n.unsigned_abs() as usize <= half_width {
                    amplitude
                } else {
                    0.0
                }
            }
        }
    }

    /// Same shape with the amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> ForcingFamily {
        match *self {
            ForcingFamily::Zero => ForcingFamily::Zero,
            ForcingFamily::SingleSite { amplitude } => ForcingFamily::SingleSite {
                amplitude: amplitude * factor,
            },
            ForcingFamily::Gaussian { amplitude, width } => ForcingFamily::Gaussian {
                amplitude: amplitude * factor,
                width,
            },
            ForcingFamily::ExponentialDecay { amplitude, decay } => {
                ForcingFamily::ExponentialDecay {
                    amplitude: amplitude * factor,
                    decay,
                }
            }
            ForcingFamily::CompactSupport {
                amplitude,
                half_width,
            } => ForcingFamily::CompactSupport {
                amplitude: amplitude * factor,
                half_width,
            },
        }
    }
}

/// A forcing family realized on a truncation, with cached sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    family: ForcingFamily,
    values: Vec<Complex64>,
    n_half: usize,
    norm_sq: f64,
    sum_pow_4_3: f64,
}

impl Forcing {
    pub fn realize(family: ForcingFamily, n_half: usize) -> Result<Self> {
        family.validate()?;
        let values: Vec<Complex64> = sites(n_half)
            .map(|n| Complex64::new(family.value_at(n), 0.0))
            .collect();
        check_finite(&values, n_half)?;
        let norm_sq = values.iter().map(|g| g.norm_sqr()).sum();
        let sum_pow_4_3 = values.iter().map(|g| g.norm().powf(4.0 / 3.0)).sum();
        Ok(Self {
            family,
            values,
            n_half,
            norm_sq,
            sum_pow_4_3,
        })
    }

    pub fn zero(n_half: usize) -> Self {
        Self::realize(ForcingFamily::Zero, n_half).expect("zero forcing is always valid")
    }

    pub fn family(&self) -> ForcingFamily {
        self.family
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn n_half(&self) -> usize {
        self.n_half
    }

    /// `||g||^2_{l2}`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    /// `sum_n |g_n|^{4/3}`.
    pub fn sum_abs_pow_4_3(&self) -> f64 {
        self.sum_pow_4_3
    }

    pub fn is_zero(&self) -> bool {
        self.norm_sq == 0.0
    }

    /// Rescales the amplitude so that `||g|| = target` (zero stays zero).
    pub fn with_norm(&self, target: f64) -> Result<Forcing> {
        if self.is_zero() {
            return Ok(self.clone());
        }
        Forcing::realize(self.family.scaled(target / self.norm()), self.n_half)
    }

    pub fn as_state(&self) -> LatticeState {
        LatticeState::from_vec_unchecked(self.values.clone(), self.n_half)
    }
}

/// A closed ball `{ ||x|| <= radius }` in the truncated l2 space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    radius: f64,
}

impl BallSpec {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter("ball radius must be non-negative".into()));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, state: &LatticeState, tol: f64) -> bool {
        state.l2_norm() <= self.radius + tol
    }
}
