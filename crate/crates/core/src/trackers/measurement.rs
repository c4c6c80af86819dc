use std::f64::consts::PI;

use num_complex::Complex64;

use super::{idx, MeasJacobian, MeasVec, StateVec};
use crate::channel::beam_gain;
use crate::scenario::{aoa_at, ScenarioConfig};

/// Step (m) of the central difference used for the distance column.
pub const FD_STEP_S: f64 = 1e-6;

/// Maps a state to the expected noise-free pilot `(y_re, y_im)` for a beam
/// pointed at `beam` (the base-station side angle).
pub trait MeasurementModel: Sync {
    fn predict(&self, x: &StateVec, beam: f64) -> MeasVec;
    fn jacobian(&self, x: &StateVec, beam: f64) -> MeasJacobian;
}

/// The LoS pilot model: distance to angles through the scenario geometry,
/// then the two-sided beamforming gain applied to the complex path gain.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamMeasurement {
    pub h_c: f64,
    pub h_r: f64,
    pub n_r: usize,
    pub n_t: usize,
    pub d_over_lambda: f64,
}

impl BeamMeasurement {
    pub fn new(scenario: &ScenarioConfig, n_r: usize, n_t: usize, d_over_lambda: f64) -> Self {
        Self { h_c: scenario.h_c, h_r: scenario.h_r, n_r, n_t, d_over_lambda }
    }

    fn geometry(&self) -> ScenarioConfig {
        ScenarioConfig { h_c: self.h_c, h_r: self.h_r, ..ScenarioConfig::default() }
    }

    /// Combined gain `g_r * conj(g_t)` for a vehicle at `s`.
    pub fn gain(&self, s: f64, beam: f64) -> Complex64 {
        let phi_a = aoa_at(s, &self.geometry());
        let phi_d = PI - phi_a;
        beam_gain(phi_a, beam, self.n_r, self.d_over_lambda) * beam_gain(phi_d, PI - beam, self.n_t, self.d_over_lambda).conj()
    }

    fn h(&self, x: &StateVec, beam: f64) -> Complex64 {
        Complex64::new(x[idx::ALPHA_RE], x[idx::ALPHA_IM]) * self.gain(x[idx::S], beam)
    }
}

impl MeasurementModel for BeamMeasurement {
    fn predict(&self, x: &StateVec, beam: f64) -> MeasVec {
        let h = self.h(x, beam);
        MeasVec::new(h.re, h.im)
    }

    /// Analytic in the gain components, central difference in `s`, zero in
    /// `v` and `a`.
    fn jacobian(&self, x: &StateVec, beam: f64) -> MeasJacobian {
        let g = self.gain(x[idx::S], beam);
        let mut jac = MeasJacobian::zeros();
        jac[(0, idx::ALPHA_RE)] = g.re;
        jac[(1, idx::ALPHA_RE)] = g.im;
        jac[(0, idx::ALPHA_IM)] = -g.im;
        jac[(1, idx::ALPHA_IM)] = g.re;
        let mut hi = *x;
        let mut lo = *x;
        hi[idx::S] += FD_STEP_S;
        lo[idx::S] -= FD_STEP_S;
        let d = (self.h(&hi, beam) - self.h(&lo, beam)) / (2.0 * FD_STEP_S);
        jac[(0, idx::S)] = d.re;
        jac[(1, idx::S)] = d.im;
        jac
    }
}

/// `h(x) = C x`, independent of the beam. Used to check the filters against
/// their linear-Gaussian closed forms.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMeasurement {
    pub c: MeasJacobian,
}

impl MeasurementModel for LinearMeasurement {
    fn predict(&self, x: &StateVec, _beam: f64) -> MeasVec {
        self.c * x
    }

    fn jacobian(&self, _x: &StateVec, _beam: f64) -> MeasJacobian {
        self.c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{observe, ChannelSnapshot};
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model() -> BeamMeasurement {
        BeamMeasurement::new(&ScenarioConfig::default(), 16, 16, 0.5)
    }

    #[test]
    fn aligned_unit_gain() {
        let m = model();
        let s = 10.0;
        let beam = aoa_at(s, &m.geometry());
        let h = m.predict(&StateVec::from([1.0, 0.0, s, 16.0, -4.0]), beam);
        assert_relative_eq!(h[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(h[1], 0.0, epsilon = 1e-14);
        let h = m.predict(&StateVec::from([0.0, 0.0, s, 16.0, -4.0]), beam);
        assert_eq!(h, MeasVec::zeros());
    }

    #[test]
    fn gain_columns_at_alignment() {
        let m = model();
        let beam = aoa_at(5.0, &m.geometry());
        let jac = m.jacobian(&StateVec::from([0.7, -0.2, 5.0, 3.0, 1.0]), beam);
        assert_relative_eq!(jac[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(jac[(1, 1)], 1.0, epsilon = 1e-14);
        assert_eq!(jac[(0, 3)], 0.0);
        assert_eq!(jac[(1, 4)], 0.0);
    }

    proptest! {
        #[test]
        fn matches_single_path_observation(ar in -2.0f64..2.0, ai in -2.0f64..2.0, s in -20.0f64..120.0, beam in 2.0f64..2.8) {
            let m = model();
            let x = StateVec::from([ar, ai, s, 8.0, 0.0]);
            let phi_a = aoa_at(s, &m.geometry());
            let snap = ChannelSnapshot::single(0, Complex64::new(ar, ai), phi_a, PI - phi_a);
            let mut rng = stream_rng(0, 0);
            let y = observe(&snap, beam, PI - beam, 16, 16, 0.5, 0.0, &mut rng).unwrap();
            let h = m.predict(&x, beam);
            prop_assert!((h[0] - y.y_re).abs() < 1e-12 && (h[1] - y.y_im).abs() < 1e-12);
        }

        #[test]
        fn finite_difference_agrees_with_analytic_gain_columns(ar in -2.0f64..2.0, ai in -2.0f64..2.0, s in 0.0f64..64.0, beam in 2.2f64..2.7) {
            let m = model();
            let x = StateVec::from([ar, ai, s, 8.0, 0.0]);
            let jac = m.jacobian(&x, beam);
            for col in [idx::ALPHA_RE, idx::ALPHA_IM] {
                let mut hi = x;
                let mut lo = x;
                hi[col] += 1e-6;
                lo[col] -= 1e-6;
                let fd = (m.predict(&hi, beam) - m.predict(&lo, beam)) / 2e-6;
                for row in 0..2 {
                    let (a, f) = (jac[(row, col)], fd[row]);
                    let rel = (a - f).abs() / a.abs().max(f.abs()).max(1e-3);
                    prop_assert!(rel < 1e-5, "col {col} row {row}: {a} vs {f}");
                }
            }
        }
    }
}
