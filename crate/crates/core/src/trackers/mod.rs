//! Beam trackers over the state `x = [alpha_re, alpha_im, s, v, a]`.
//!
//! Instead of tracking the angle directly, the filters track the vehicle's
//! distance, speed and acceleration together with the complex path gain.
//! The pointing direction is derived from the filtered distance through the
//! scenario geometry, and the beam is only re-steered when the prediction
//! drifts more than a threshold away from the current pointing.

mod ekf;
mod episode;
mod measurement;
mod pf;
mod pointing;

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

pub use ekf::{ekf_predict, ekf_update};
pub use episode::{run_tracked_episode, TrackedEpisode, TrackerKind, TrackerParams};
pub use measurement::{BeamMeasurement, LinearMeasurement, MeasurementModel, FD_STEP_S};
pub use pf::{estimate, pf_predict, pf_step, systematic_resample, ParticleSet, PfStep};
pub use pointing::PointingState;

pub type StateVec = SVector<f64, 5>;
pub type StateCov = SMatrix<f64, 5, 5>;
pub type MeasVec = SVector<f64, 2>;
pub type MeasCov = SMatrix<f64, 2, 2>;
pub type MeasJacobian = SMatrix<f64, 2, 5>;

/// Index of each component in the state vector.
pub mod idx {
    pub const ALPHA_RE: usize = 0;
    pub const ALPHA_IM: usize = 1;
    pub const S: usize = 2;
    pub const V: usize = 3;
    pub const A: usize = 4;
}

#[derive(Debug, Error, PartialEq)]
pub enum TrackerError {
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("particle set is empty")]
    NoParticles,
    #[error("tracking interval {interval} s is not a positive multiple of the slot duration {slot} s")]
    BadInterval { interval: f64, slot: f64 },
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),
}

/// Gaussian belief over the state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterState {
    pub x: StateVec,
    pub p: StateCov,
}

impl FilterState {
    pub fn new(x: StateVec, p: StateCov) -> Self {
        Self { x, p }
    }

    /// Prior centred on the true initial state: unit gain, `s = 0`, the
    /// scenario's initial speed and acceleration.
    pub fn initial(v0: f64, a0: f64) -> Self {
        Self {
            x: StateVec::from([1.0, 0.0, 0.0, v0, a0]),
            p: StateCov::from_diagonal(&StateVec::from([0.1, 0.1, 1.0, 1.0, 1.0])),
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.p - self.p.transpose()).amax() <= tol
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = 0.5 * (self.p + self.p.transpose());
        sym.symmetric_eigenvalues().min()
    }
}

/// Linear transition `x' = A x + u`, `u ~ N(0, Q)`.
///
/// The gain block is an AR(1) with coefficient `rho`; the kinematic block is
/// a constant-acceleration integrator over one slot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionModel {
    pub a: StateCov,
    pub q: StateCov,
    pub rho: f64,
    pub sigma_u2: f64,
    pub dt: f64,
}

impl TransitionModel {
    pub fn new(rho: f64, sigma_u2: f64, dt: f64) -> Self {
        #[rustfmt::skip]
        let a = StateCov::from_row_slice(&[
            rho, 0.0, 0.0, 0.0, 0.0,
            0.0, rho, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, dt,  0.5 * dt * dt,
            0.0, 0.0, 0.0, 1.0, dt,
            0.0, 0.0, 0.0, 0.0, 1.0,
        ]);
        let g = 1.0 - rho * rho;
        let q = StateCov::from_diagonal(&StateVec::from([
            g,
            g,
            sigma_u2 * dt * dt / 2.0,
            sigma_u2 * dt,
            sigma_u2,
        ]));
        Self { a, q, rho, sigma_u2, dt }
    }

    /// Square roots of the diagonal of `Q`, for sampling.
    pub fn noise_std(&self) -> StateVec {
        self.q.diagonal().map(|v| v.max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_matrix_layout() {
        let tm = TransitionModel::new(0.995, 0.5, 0.005);
        assert_eq!(tm.a[(0, 0)], 0.995);
        assert_eq!(tm.a[(1, 1)], 0.995);
        assert_eq!(tm.a[(2, 3)], 0.005);
        assert_eq!(tm.a[(2, 4)], 0.005 * 0.005 / 2.0);
        assert_eq!(tm.a[(3, 4)], 0.005);
        assert_eq!(tm.a[(0, 2)], 0.0);
        let nonzero = tm.a.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 8);
        let d = tm.q.diagonal();
        assert!((d[0] - (1.0 - 0.995f64.powi(2))).abs() < 1e-15);
        assert_eq!(d[2], 0.5 * 0.005 * 0.005 / 2.0);
        assert_eq!(d[3], 0.5 * 0.005);
        assert_eq!(d[4], 0.5);
        assert_eq!(tm.q.iter().filter(|v| **v != 0.0).count(), 5);
    }
}
