use rand::Rng;
use rand_distr::StandardNormal;

use super::{FilterState, MeasCov, MeasVec, MeasurementModel, StateVec, TrackerError, TransitionModel};
use crate::parallel::{self, Exec};

/// Weighted sample approximation of the state posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<StateVec>,
    /// Normalised weights.
    pub weights: Vec<f64>,
}

/// Result of one predict-weight-resample cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct PfStep {
    pub set: ParticleSet,
    /// Effective sample size after weighting, before any resampling.
    pub ess: f64,
    pub resampled: bool,
    /// Every weight vanished; weights were reset to uniform.
    pub degenerate: bool,
}

impl ParticleSet {
    /// `n` equally weighted draws from `N(fs.x, fs.p)`.
    pub fn from_gaussian<R: Rng + ?Sized>(fs: &FilterState, n: usize, rng: &mut R) -> Self {
        let sym = 0.5 * (fs.p + fs.p.transpose());
        let l = sym
            .cholesky()
            .map(|c| c.l())
            .unwrap_or_else(|| super::StateCov::from_diagonal(&sym.diagonal().map(|v| v.max(0.0).sqrt())));
        let particles = (0..n)
            .map(|_| {
                let z = StateVec::from_fn(|_, _| rng.sample(StandardNormal));
                fs.x + l * z
            })
            .collect();
        Self::uniform(particles)
    }

    pub fn uniform(particles: Vec<StateVec>) -> Self {
        let n = particles.len();
        Self { weights: vec![1.0 / n.max(1) as f64; n], particles }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Weighted covariance around the weighted mean.
    pub fn covariance(&self) -> super::StateCov {
        let mean = estimate(self);
        self.particles
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| {
                let d = p - mean;
                d * d.transpose() * *w
            })
            .sum()
    }
}

/// Weighted mean of the particle cloud.
pub fn estimate(ps: &ParticleSet) -> StateVec {
    ps.particles.iter().zip(&ps.weights).map(|(p, w)| p * *w).sum()
}

fn propagate<R: Rng + ?Sized>(ps: &mut ParticleSet, tm: &TransitionModel, rng: &mut R) {
    let sd = tm.noise_std();
    for p in &mut ps.particles {
        let noise = StateVec::from_fn(|i, _| sd[i] * rng.sample::<f64, _>(StandardNormal));
        *p = tm.a * *p + noise;
    }
}

/// Moves every particle through the transition with sampled noise. Weights
/// are unchanged.
pub fn pf_predict<R: Rng + ?Sized>(ps: &ParticleSet, tm: &TransitionModel, rng: &mut R) -> ParticleSet {
    let mut out = ps.clone();
    propagate(&mut out, tm, rng);
    out
}

/// Systematic resampling: ancestor indices for offsets `(u0 + i) / n`,
/// `u0 in [0, 1)`.
pub fn systematic_resample(weights: &[f64], u0: f64) -> Vec<usize> {
    let n = weights.len();
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights.first().copied().unwrap_or(0.0);
    let mut i = 0;
    for k in 0..n {
        let target = (u0 + k as f64) / n as f64;
        while cumulative < target && i + 1 < n {
            i += 1;
            cumulative += weights[i];
        }
        out.push(i);
    }
    out
}

/// Log-likelihood of innovation `e` under `N(0, R)` up to a constant. With a
/// singular `R` only an exact match has non-zero likelihood.
fn log_likelihood(e: &MeasVec, r_inv: Option<&MeasCov>) -> f64 {
    match r_inv {
        Some(ri) => -0.5 * (e.transpose() * ri * e)[(0, 0)],
        None if e.iter().all(|v| *v == 0.0) => 0.0,
        None => f64::NEG_INFINITY,
    }
}

/// One bootstrap filter step: propagate, weight by the Gaussian likelihood
/// of `z`, normalise, and resample systematically if the effective sample
/// size drops below half the particle count.
#[allow(clippy::too_many_arguments)]
pub fn pf_step<M: MeasurementModel + ?Sized, R: Rng + ?Sized>(
    ps: &ParticleSet,
    tm: &TransitionModel,
    z: &MeasVec,
    beam: f64,
    model: &M,
    r: &MeasCov,
    rng: &mut R,
    exec: Exec,
) -> Result<PfStep, TrackerError> {
    if ps.is_empty() {
        return Err(TrackerError::NoParticles);
    }
    let mut set = pf_predict(ps, tm, rng);
    let r_inv = r.try_inverse().filter(|m| m.iter().all(|v| v.is_finite()));
    let log_w: Vec<f64> = parallel::map(exec, &set.particles, |p| {
        log_likelihood(&(z - model.predict(p, beam)), r_inv.as_ref())
    });
    let log_w: Vec<f64> = log_w.iter().zip(&set.weights).map(|(l, w)| l + w.ln()).collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut degenerate = false;
    if max.is_finite() {
        let mut total = 0.0;
        for (w, l) in set.weights.iter_mut().zip(&log_w) {
            *w = (l - max).exp();
            total += *w;
        }
        for w in &mut set.weights {
            *w /= total;
        }
    } else {
        degenerate = true;
        let n = set.len() as f64;
        set.weights.iter_mut().for_each(|w| *w = 1.0 / n);
    }
    let ess = set.effective_sample_size();
    let resampled = ess < set.len() as f64 / 2.0;
    if resampled {
        let u0: f64 = rng.random();
        let picks = systematic_resample(&set.weights, u0);
        let particles = picks.into_iter().map(|i| set.particles[i]).collect();
        set = ParticleSet::uniform(particles);
    }
    Ok(PfStep { set, ess, resampled, degenerate })
}
