//! Belief-state containers and Gaussian mixture algebra.
//!
//! The tracker represents its posterior as a Poisson point process over
//! undetected objects plus a list of Bernoulli components for detected
//! objects. Both share the same 6-dimensional motion state
//! `[x, y, v, phi, omega, a]`: planar position, speed along the heading,
//! heading, turn rate, and tangential acceleration.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, SMatrix, SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::wrap_angle;

pub const STATE_DIM: usize = 6;
/// Index of the heading channel within the motion state.
pub const STATE_PHI: usize = 3;

pub type StateVec = SVector<f64, STATE_DIM>;
pub type StateCov = SMatrix<f64, STATE_DIM, STATE_DIM>;

/// Gaussian over the motion state. Heading is kept wrapped to `[-pi, pi)`;
/// the covariance is kept symmetric by every operation that produces one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub mean: StateVec,
    pub cov: StateCov,
}

impl GaussianState {
    pub fn new(mean: StateVec, cov: StateCov) -> Self {
        GaussianState { mean, cov }
    }

    /// Planar position block of the mean.
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[1])
    }
}

/// Bounding-box state carried alongside the motion state but outside the
/// Bayesian recursion: box extents and the vertical coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxState {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub z: f64,
}

/// Identity of a track: the step and measurement index of its first
/// detection. Formats as `step-index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrackId {
    pub step: u64,
    pub index: u32,
}

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.step, self.index)
    }
}

impl FromStr for TrackId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (step, index) = s
            .split_once('-')
            .ok_or_else(|| format!("track id `{s}` is not of the form step-index"))?;
        let step = step
            .parse::<u64>()
            .map_err(|e| format!("track id `{s}`: bad step: {e}"))?;
        let index = index
            .parse::<u32>()
            .map_err(|e| format!("track id `{s}`: bad index: {e}"))?;
        Ok(TrackId { step, index })
    }
}

/// Per-object state that never changes after creation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeInvariantState {
    pub class: String,
    pub track_id: TrackId,
}

/// One weighted component of the Poisson intensity over undetected objects.
/// Weights are expected intensity mass, not probabilities; they are never
/// renormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonComponent {
    pub weight: f64,
    pub density: GaussianState,
    pub class: String,
    /// Prediction steps survived since birth.
    pub age: u32,
    /// Set when a first-detection hypothesis consumed this component; marked
    /// components are recycled at the next pruning pass.
    pub marked: bool,
}

/// One detected potential object: existence probability plus state density,
/// box state, and the track-management counters of the lightweight filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliComponent {
    pub existence: f64,
    pub density: GaussianState,
    pub aux: AuxState,
    pub fixed: TimeInvariantState,
    /// Consecutive misdetections since the last association.
    pub miss_count: u32,
    /// Updates survived since birth; 0 only between first-detection
    /// hypothesis creation and the lightweight update of the same step.
    pub track_len: u32,
    /// Confidence score maintained by the lightweight filter, in `[0, 1]`.
    pub score: f64,
}

/// Full tracker posterior after an update step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PmbPosterior {
    pub poisson: Vec<PoissonComponent>,
    pub bernoulli: Vec<BernoulliComponent>,
    /// Every track id extracted at any past step. Never shrinks.
    pub extracted_ids: BTreeSet<TrackId>,
}

impl PmbPosterior {
    pub fn empty() -> Self {
        PmbPosterior::default()
    }
}

pub(crate) fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

/// Natural log of a bivariate Gaussian likelihood `N(z; z_hat, s)`.
///
/// Fails when `s` is not positive definite. The linear-domain value is
/// `gaussian_position_likelihood`; this form is what the hypothesis costs
/// consume, so that likelihoods near underflow still produce finite costs.
pub fn log_gaussian_position_likelihood(
    z: &Vector2<f64>,
    z_hat: &Vector2<f64>,
    s: &Matrix2<f64>,
) -> Result<f64> {
    let sym = symmetrize(s);
    let chol = sym
        .cholesky()
        .ok_or(Error::NumericalFailure("position innovation covariance"))?;
    let l = chol.l();
    let log_det = 2.0 * (l[(0, 0)].ln() + l[(1, 1)].ln());
    let d = z - z_hat;
    let quad = d.dot(&chol.solve(&d));
    Ok(-(2.0 * std::f64::consts::PI).ln() - 0.5 * log_det - 0.5 * quad)
}

/// Bivariate Gaussian likelihood `N(z; z_hat, s)`.
pub fn gaussian_position_likelihood(
    z: &Vector2<f64>,
    z_hat: &Vector2<f64>,
    s: &Matrix2<f64>,
) -> Result<f64> {
    log_gaussian_position_likelihood(z, z_hat, s).map(f64::exp)
}

/// Collapse a weighted Gaussian mixture to a single Gaussian with the same
/// first two moments. The heading channel is averaged circularly and its
/// residuals are wrapped.
///
/// Weights must be non-negative with a positive sum; they are divided by
/// their sum only when it differs from 1 by more than 1e-12, so an already
/// normalized mixture is used verbatim.
pub fn moment_match(terms: &[(f64, GaussianState)]) -> Result<GaussianState> {
    if terms.is_empty() {
        return Err(Error::InvalidArgument(
            "moment_match needs at least one term",
        ));
    }
    if terms.iter().any(|(w, _)| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument(
            "mixture weights must be finite and non-negative",
        ));
    }
    let total: f64 = terms.iter().map(|(w, _)| w).sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("mixture weights sum to zero"));
    }
    let scale = if (total - 1.0).abs() > 1e-12 {
        1.0 / total
    } else {
        1.0
    };

    let mut mean = StateVec::zeros();
    let mut sin_sum = 0.0;
    let mut cos_sum = 0.0;
    for (w, term) in terms {
        let w = w * scale;
        mean += w * term.mean;
        sin_sum += w * term.mean[STATE_PHI].sin();
        cos_sum += w * term.mean[STATE_PHI].cos();
    }
    mean[STATE_PHI] = wrap_angle(sin_sum.atan2(cos_sum));

    let mut cov = StateCov::zeros();
    for (w, term) in terms {
        let w = w * scale;
        let mut d = term.mean - mean;
        d[STATE_PHI] = wrap_angle(d[STATE_PHI]);
        cov += w * (term.cov + d * d.transpose());
    }
    Ok(GaussianState::new(mean, symmetrize(&cov)))
}
