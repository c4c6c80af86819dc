use super::{FilterState, MeasCov, MeasVec, MeasurementModel, StateCov, TrackerError, TransitionModel};

/// `x' = A x`, `P' = A P A^T + Q`.
pub fn ekf_predict(fs: &FilterState, tm: &TransitionModel) -> FilterState {
    FilterState { x: tm.a * fs.x, p: tm.a * fs.p * tm.a.transpose() + tm.q }
}

/// Measurement update linearised at the current mean. The posterior
/// covariance is symmetrised.
pub fn ekf_update<M: MeasurementModel + ?Sized>(
    fs: &FilterState,
    z: &MeasVec,
    beam: f64,
    model: &M,
    r: &MeasCov,
) -> Result<FilterState, TrackerError> {
    let h = model.jacobian(&fs.x, beam);
    let innovation = z - model.predict(&fs.x, beam);
    let s = h * fs.p * h.transpose() + r;
    let s_inv = s.try_inverse().ok_or(TrackerError::SingularInnovation)?;
    if !s_inv.iter().all(|v| v.is_finite()) {
        return Err(TrackerError::SingularInnovation);
    }
    let k = fs.p * h.transpose() * s_inv;
    let x = fs.x + k * innovation;
    let p = (StateCov::identity() - k * h) * fs.p;
    Ok(FilterState { x, p: 0.5 * (p + p.transpose()) })
}
