/// Current beam direction and the threshold rule that re-steers it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointingState {
    /// Base-station beam direction (rad), in `(0, pi)`.
    pub beam: f64,
    /// Correction threshold (rad).
    pub threshold: f64,
    pub last_track_slot: usize,
}

impl PointingState {
    pub fn new(beam: f64, threshold: f64) -> Self {
        Self { beam, threshold, last_track_slot: 0 }
    }

    /// Default threshold for an `m`-element array: `2 / m` rad.
    pub fn default_threshold(m: usize) -> f64 {
        2.0 / m as f64
    }

    /// Re-steers to `predicted` when it differs from the current beam by
    /// strictly more than the threshold.
    #[must_use]
    pub fn maybe_correct(&self, predicted: f64) -> Self {
        if (predicted - self.beam).abs() > self.threshold {
            let beam = predicted.clamp(1e-6, std::f64::consts::PI - 1e-6);
            Self { beam, ..*self }
        } else {
            *self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn threshold_rule() {
        let p = PointingState::new(2.0, 0.1);
        assert_eq!(p.maybe_correct(2.0), p);
        assert_eq!(p.maybe_correct(2.2).beam, 2.2);
        assert_eq!(p.maybe_correct(1.8).beam, 1.8);
        let p = PointingState::new(2.0, 0.125);
        assert_eq!(p.maybe_correct(2.125), p);
    }

    proptest! {
        #[test]
        fn idempotent(beam in 0.1f64..3.0, th in 0.0f64..0.5, pred in 0.1f64..3.0) {
            let p = PointingState::new(beam, th);
            prop_assert_eq!(p.maybe_correct(pred).maybe_correct(pred), p.maybe_correct(pred));
        }
    }
}
