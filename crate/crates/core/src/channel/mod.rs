//! Sparse ULA channel: steering vectors, beamforming gain, the AR(1) complex
//! gain process and the beamformed pilot observation.
//!
//! Beamformer and combiner are steering vectors pointed at `phi_bar`, so the
//! received sample for a path reduces to `alpha * g(phi_A) * conj(g(phi_D))`
//! with `g` the inner product `a(phi_bar)^H a(phi)`.

mod source;
pub mod trace;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use source::{ChannelProcess, ChannelSource};
pub use trace::{generate_trace, load_trace, parse_trace, route_records, write_trace, Trace, TraceError, TraceRecord};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("antenna count must be at least 1")]
    NoAntennas,
    #[error("channel snapshot has no paths")]
    NoPaths,
    #[error("invalid channel parameter: {0}")]
    Invalid(String),
}

/// Parameters of the array and the synthetic channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub n_t: usize,
    pub n_r: usize,
    /// Element spacing over wavelength.
    pub d_over_lambda: f64,
    /// Per-slot correlation coefficient of each gain component.
    pub rho: f64,
    /// Complex noise variance after beamforming.
    pub noise_variance: f64,
    pub snr_threshold_db: f64,
    /// Path count for the synthetic multipath source (LoS included).
    pub multipath_paths: usize,
    /// Amplitude scale of reflected paths relative to the LoS path.
    pub reflection_coeff: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            n_t: 16,
            n_r: 16,
            d_over_lambda: 0.5,
            rho: 0.995,
            // 20 dB aligned SNR at |alpha| = 1.
            noise_variance: 0.01,
            snr_threshold_db: 5.0,
            multipath_paths: 3,
            reflection_coeff: 0.3,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.n_t == 0 || self.n_r == 0 {
            return Err(ChannelError::NoAntennas);
        }
        let bad = |m: String| Err(ChannelError::Invalid(m));
        if !(0.0..=1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1], got {}", self.rho));
        }
        if !(self.noise_variance >= 0.0) {
            return bad(format!("noise_variance must be >= 0, got {}", self.noise_variance));
        }
        if !(self.d_over_lambda > 0.0) {
            return bad(format!("d_over_lambda must be > 0, got {}", self.d_over_lambda));
        }
        if self.multipath_paths == 0 {
            return bad("multipath_paths must be >= 1".into());
        }
        Ok(())
    }

    /// Complex noise variance for a target aligned SNR at unit gain.
    pub fn noise_for_snr_db(snr_db: f64) -> f64 {
        10f64.powf(-snr_db / 10.0)
    }
}

/// Unit-norm ULA response.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringVector {
    pub elements: Vec<Complex64>,
    pub pointing: f64,
    pub d_over_lambda: f64,
}

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.elements.iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `self^H other`.
    pub fn inner(&self, other: &SteeringVector) -> Complex64 {
        self.elements.iter().zip(&other.elements).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Steering vector of an `m`-element ULA towards `phi`.
pub fn steering(phi: f64, m: usize, d_over_lambda: f64) -> Result<SteeringVector, ChannelError> {
    if m == 0 {
        return Err(ChannelError::NoAntennas);
    }
    let scale = 1.0 / (m as f64).sqrt();
    let k = 2.0 * PI * d_over_lambda * phi.cos();
    let elements = (0..m).map(|i| Complex64::from_polar(scale, k * i as f64)).collect();
    Ok(SteeringVector { elements, pointing: phi, d_over_lambda })
}

/// `a(phi_bar)^H a(phi)` for an `m`-element ULA, via the Dirichlet kernel.
///
/// Falls back to the explicit sum where `sin(psi/2)` vanishes, which covers
/// exact alignment and the grating-lobe points.
pub fn beam_gain(phi: f64, phi_bar: f64, m: usize, d_over_lambda: f64) -> Complex64 {
    if m == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let psi = 2.0 * PI * d_over_lambda * (phi.cos() - phi_bar.cos());
    let mf = m as f64;
    let den = (0.5 * psi).sin();
    if den.abs() < 1e-9 {
        let sum: Complex64 = (0..m).map(|i| Complex64::from_polar(1.0, psi * i as f64)).sum();
        return sum / mf;
    }
    let amp = (0.5 * mf * psi).sin() / (mf * den);
    Complex64::from_polar(1.0, 0.5 * (mf - 1.0) * psi) * amp
}

/// One propagation path of a snapshot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathComponent {
    pub gain: Complex64,
    pub aoa: f64,
    pub aod: f64,
}

/// Multipath set seen during one slot. `paths[0]` is the LoS path.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSnapshot {
    pub slot: usize,
    pub paths: Vec<PathComponent>,
}

impl ChannelSnapshot {
    pub fn single(slot: usize, gain: Complex64, aoa: f64, aod: f64) -> Self {
        Self { slot, paths: vec![PathComponent { gain, aoa, aod }] }
    }

    pub fn path_count(&self) -> usize {
        self.paths.len()
    }

    /// Noise-free beamformed sample for pointing `(phi_bar_a, phi_bar_d)`.
    pub fn beamformed(&self, phi_bar_a: f64, phi_bar_d: f64, n_r: usize, n_t: usize, d: f64) -> Complex64 {
        self.paths
            .iter()
            .map(|p| p.gain * beam_gain(p.aoa, phi_bar_a, n_r, d) * beam_gain(p.aod, phi_bar_d, n_t, d).conj())
            .sum()
    }
}

/// AR(1) complex gain with unit stationary variance per real component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainProcess {
    pub alpha: Complex64,
    pub rho: f64,
}

impl GainProcess {
    pub fn new(alpha: Complex64, rho: f64) -> Self {
        Self { alpha, rho }
    }

    pub fn innovation_variance(&self) -> f64 {
        1.0 - self.rho * self.rho
    }

    /// `x' = rho x + u`, `u ~ N(0, 1 - rho^2)` per component.
    pub fn evolve<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let sd = self.innovation_variance().max(0.0).sqrt();
        let ur: f64 = rng.sample(StandardNormal);
        let ui: f64 = rng.sample(StandardNormal);
        Self {
            alpha: Complex64::new(self.rho * self.alpha.re + sd * ur, self.rho * self.alpha.im + sd * ui),
            rho: self.rho,
        }
    }
}

/// Beamformed pilot sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservationSignal {
    pub y_re: f64,
    pub y_im: f64,
    pub noise_variance: f64,
}

impl ObservationSignal {
    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.y_re, self.y_im)
    }
}

/// Noisy received pilot. Always consumes two normal draws so that RNG
/// consumption does not depend on the noise level.
#[allow(clippy::too_many_arguments)]
pub fn observe<R: Rng + ?Sized>(
    snapshot: &ChannelSnapshot,
    phi_bar_a: f64,
    phi_bar_d: f64,
    n_r: usize,
    n_t: usize,
    d_over_lambda: f64,
    noise_variance: f64,
    rng: &mut R,
) -> Result<ObservationSignal, ChannelError> {
    if snapshot.paths.is_empty() {
        return Err(ChannelError::NoPaths);
    }
    if n_r == 0 || n_t == 0 {
        return Err(ChannelError::NoAntennas);
    }
    let clean = snapshot.beamformed(phi_bar_a, phi_bar_d, n_r, n_t, d_over_lambda);
    let sd = (0.5 * noise_variance).sqrt();
    let nr: f64 = rng.sample(StandardNormal);
    let ni: f64 = rng.sample(StandardNormal);
    Ok(ObservationSignal { y_re: clean.re + sd * nr, y_im: clean.im + sd * ni, noise_variance })
}
