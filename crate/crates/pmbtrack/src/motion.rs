//! Constant turn rate and acceleration motion model, the scaled unscented
//! transform, and the unscented Kalman measurement update.
//!
//! The measurement is 5-dimensional: planar position, planar velocity, and
//! heading `[x, y, vx, vy, phi]`. Heading channels are treated circularly
//! everywhere: sigma-point means use the atan2 of averaged sines and
//! cosines, and residuals are wrapped before forming covariances.

use nalgebra::{Matrix2, SMatrix, SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::density::{symmetrize, GaussianState, StateCov, StateVec, STATE_PHI};
use crate::error::{Error, Result};

pub const MEAS_DIM: usize = 5;
/// Index of the heading channel within the measurement.
pub const MEAS_PHI: usize = 4;

pub type MeasVec = SVector<f64, MEAS_DIM>;
pub type MeasCov = SMatrix<f64, MEAS_DIM, MEAS_DIM>;

/// Turn rates below this magnitude use the straight-line limit of the
/// closed-form transition, which is numerically unstable near zero.
pub const TURN_RATE_EPS: f64 = 1e-6;

/// Wrap an angle to `[-pi, pi)`. In-range values pass through bitwise
/// unchanged, so wrapping is exactly idempotent.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    if (-PI..PI).contains(&a) {
        return a;
    }
    // rem_euclid can return exactly TAU when rounding absorbs a tiny
    // negative input, so the result needs one more range check.
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Process and measurement noise for one object class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Process noise intensity; prediction adds `q * dt`.
    pub q: StateCov,
    /// Measurement noise covariance.
    pub r: MeasCov,
}

impl NoiseConfig {
    pub fn from_diagonals(q_diag: &[f64; 6], r_diag: &[f64; 5]) -> Self {
        NoiseConfig {
            q: StateCov::from_diagonal(&StateVec::from(*q_diag)),
            r: MeasCov::from_diagonal(&MeasVec::from(*r_diag)),
        }
    }

    /// Position block of the measurement noise: exactly the upper-left 2x2.
    pub fn r_xy(&self) -> Matrix2<f64> {
        self.r.fixed_view::<2, 2>(0, 0).into_owned()
    }
}

/// Scaled unscented transform parameters. `kappa` defaults to `3 - n` for
/// an `n`-dimensional input when unset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtParams {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub kappa: Option<f64>,
}

impl Default for UtParams {
    fn default() -> Self {
        UtParams {
            alpha: 1.0,
            beta: 2.0,
            kappa: None,
        }
    }
}

pub(crate) struct UtWeights {
    pub wm0: f64,
    pub wc0: f64,
    pub wi: f64,
    /// `n + lambda`, the squared sigma-point spread factor.
    pub scale: f64,
}

pub(crate) fn ut_weights(n: usize, params: &UtParams) -> Result<UtWeights> {
    let nf = n as f64;
    let kappa = params.kappa.unwrap_or(3.0 - nf);
    let alpha2 = params.alpha * params.alpha;
    let lambda = alpha2 * (nf + kappa) - nf;
    let scale = nf + lambda;
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::InvalidArgument(
            "unscented scale n + lambda must be positive",
        ));
    }
    Ok(UtWeights {
        wm0: lambda / scale,
        wc0: lambda / scale + 1.0 - alpha2 + params.beta,
        wi: 0.5 / scale,
        scale,
    })
}

/// Lower Cholesky factor of a symmetrized covariance.
///
/// Channels whose row is exactly zero carry no uncertainty: they are left
/// out of the factorization so their sigma offsets stay exactly zero. Any
/// other failure retries once with `1e-9 * trace / n` added to the
/// diagonal, then fails.
pub(crate) fn cholesky_with_jitter<const N: usize>(
    cov: &SMatrix<f64, N, N>,
    what: &'static str,
) -> Result<SMatrix<f64, N, N>> {
    let sym = symmetrize(cov);
    if let Some(c) = sym.cholesky() {
        return Ok(c.l());
    }
    let active: Vec<usize> = (0..N)
        .filter(|&i| (0..N).any(|j| sym[(i, j)] != 0.0))
        .collect();
    if active.len() < N {
        let k = active.len();
        let sub = nalgebra::DMatrix::from_fn(k, k, |r, c| sym[(active[r], active[c])]);
        if let Some(c) = sub.cholesky() {
            let l = c.l();
            let mut out = SMatrix::<f64, N, N>::zeros();
            for r in 0..k {
                for c in 0..=r {
                    out[(active[r], active[c])] = l[(r, c)];
                }
            }
            return Ok(out);
        }
    }
    let jitter = 1e-9 * sym.trace() / N as f64;
    (sym + SMatrix::<f64, N, N>::identity() * jitter)
        .cholesky()
        .map(|c| c.l())
        .ok_or(Error::NumericalFailure(what))
}

pub(crate) struct UtResult<const N: usize, const M: usize> {
    pub mean: SVector<f64, M>,
    /// Output covariance before any additive noise.
    pub cov: SMatrix<f64, M, M>,
    pub cross: SMatrix<f64, N, M>,
}

/// Core sigma-point transform. `angular_out` lists output channels that are
/// angles; their means are computed circularly and their residuals wrapped.
pub(crate) fn ut_transform<const N: usize, const M: usize>(
    mean: &SVector<f64, N>,
    cov: &SMatrix<f64, N, N>,
    f: impl Fn(&SVector<f64, N>) -> SVector<f64, M>,
    params: &UtParams,
    angular_out: &[usize],
) -> Result<UtResult<N, M>> {
    let w = ut_weights(N, params)?;
    let l = cholesky_with_jitter(cov, "sigma-point factorization")?;
    let spread = w.scale.sqrt();

    let mut points = Vec::with_capacity(2 * N + 1);
    points.push(*mean);
    for i in 0..N {
        let offset = l.column(i) * spread;
        points.push(mean + offset);
        points.push(mean - offset);
    }
    let outputs: Vec<SVector<f64, M>> = points.iter().map(f).collect();

    let mut out_mean = outputs[0] * w.wm0;
    for o in &outputs[1..] {
        out_mean += o * w.wi;
    }
    for &c in angular_out {
        let mut sin_sum = w.wm0 * outputs[0][c].sin();
        let mut cos_sum = w.wm0 * outputs[0][c].cos();
        for o in &outputs[1..] {
            sin_sum += w.wi * o[c].sin();
            cos_sum += w.wi * o[c].cos();
        }
        out_mean[c] = wrap_angle(sin_sum.atan2(cos_sum));
    }

    let mut out_cov = SMatrix::<f64, M, M>::zeros();
    let mut cross = SMatrix::<f64, N, M>::zeros();
    for (k, o) in outputs.iter().enumerate() {
        let wc = if k == 0 { w.wc0 } else { w.wi };
        let mut dz = o - out_mean;
        for &c in angular_out {
            dz[c] = wrap_angle(dz[c]);
        }
        out_cov += wc * dz * dz.transpose();
        let dx = points[k] - mean;
        cross += wc * dx * dz.transpose();
    }
    Ok(UtResult {
        mean: out_mean,
        cov: out_cov,
        cross,
    })
}

/// Propagate a Gaussian through an arbitrary function with the scaled
/// unscented transform. Exact for affine functions.
pub fn ut_propagate<const N: usize, const M: usize>(
    mean: &SVector<f64, N>,
    cov: &SMatrix<f64, N, N>,
    f: impl Fn(&SVector<f64, N>) -> SVector<f64, M>,
    params: &UtParams,
) -> Result<(SVector<f64, M>, SMatrix<f64, M, M>)> {
    let t = ut_transform(mean, cov, f, params, &[])?;
    Ok((t.mean, symmetrize(&t.cov)))
}

/// Closed-form constant turn rate and acceleration transition over `dt`
/// seconds. Turn rates below `TURN_RATE_EPS` take the straight-line limit.
/// The output heading is wrapped; `dt = 0` is an exact identity.
pub fn ctra_transition(state: &StateVec, dt: f64) -> StateVec {
    if dt == 0.0 {
        return *state;
    }
    let (x, y, v, phi, omega, a) = (state[0], state[1], state[2], state[3], state[4], state[5]);
    let v1 = v + a * dt;
    let mut out = *state;
    out[2] = v1;
    if omega.abs() < TURN_RATE_EPS {
        let arc = v * dt + 0.5 * a * dt * dt;
        out[0] = x + arc * phi.cos();
        out[1] = y + arc * phi.sin();
    } else {
        let phi1 = phi + omega * dt;
        let inv_w2 = 1.0 / (omega * omega);
        out[0] = x + inv_w2
            * (v1 * omega * phi1.sin() + a * phi1.cos() - v * omega * phi.sin() - a * phi.cos());
        out[1] = y + inv_w2
            * (-v1 * omega * phi1.cos() + a * phi1.sin() + v * omega * phi.cos() - a * phi.sin());
        out[STATE_PHI] = wrap_angle(phi1);
    }
    out
}

/// Motion prediction: sigma-point propagation through the transition plus
/// process noise scaled by the horizon. `dt = 0` returns the input
/// unchanged.
pub fn predict_motion(
    state: &GaussianState,
    dt: f64,
    noise: &NoiseConfig,
    params: &UtParams,
) -> Result<GaussianState> {
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let t = ut_transform(
        &state.mean,
        &state.cov,
        |x| ctra_transition(x, dt),
        params,
        &[STATE_PHI],
    )?;
    let cov = symmetrize(&(t.cov + noise.q * dt));
    Ok(GaussianState::new(t.mean, cov))
}

/// Map a motion state to measurement space:
/// `[x, y, v cos(phi), v sin(phi), phi]`.
pub fn measurement_fn(x: &StateVec) -> MeasVec {
    MeasVec::from([x[0], x[1], x[2] * x[3].cos(), x[2] * x[3].sin(), x[3]])
}

/// Unscented Kalman update against an arbitrary measurement function.
/// `angular_meas` lists angular measurement channels; the state heading is
/// always re-wrapped. The gain solves through the Cholesky factor of the
/// innovation covariance, with the same single-jitter retry policy as the
/// sigma-point factorization.
pub fn ukf_update_with<const M: usize>(
    pred: &GaussianState,
    z: &SVector<f64, M>,
    r: &SMatrix<f64, M, M>,
    h: impl Fn(&StateVec) -> SVector<f64, M>,
    angular_meas: &[usize],
    params: &UtParams,
) -> Result<GaussianState> {
    let t = ut_transform(&pred.mean, &pred.cov, h, params, angular_meas)?;
    let s = symmetrize(&(t.cov + r));
    let chol = match s.cholesky() {
        Some(c) => c,
        None => {
            let jitter = 1e-9 * s.trace() / M as f64;
            (s + SMatrix::<f64, M, M>::identity() * jitter)
                .cholesky()
                .ok_or(Error::NumericalFailure("innovation covariance"))?
        }
    };
    // K = C S^-1, via S K^T = C^T.
    let k = chol.solve(&t.cross.transpose()).transpose();
    let mut innovation = z - t.mean;
    for &c in angular_meas {
        innovation[c] = wrap_angle(innovation[c]);
    }
    let mut mean = pred.mean + k * innovation;
    mean[STATE_PHI] = wrap_angle(mean[STATE_PHI]);
    let cov = symmetrize(&(pred.cov - k * s * k.transpose()));
    Ok(GaussianState::new(mean, cov))
}

/// Unscented Kalman update against the 5-channel measurement model.
pub fn ukf_update(
    pred: &GaussianState,
    z: &MeasVec,
    noise: &NoiseConfig,
    params: &UtParams,
) -> Result<GaussianState> {
    ukf_update_with(pred, z, &noise.r, measurement_fn, &[MEAS_PHI], params)
}

/// Predicted position measurement: the planar mean and its innovation
/// covariance `P_xy + R_xy`. Position extraction is linear, so no sigma
/// points are involved.
pub fn predict_position_measurement(
    pred: &GaussianState,
    noise: &NoiseConfig,
) -> (Vector2<f64>, Matrix2<f64>) {
    let s = pred.cov.fixed_view::<2, 2>(0, 0).into_owned() + noise.r_xy();
    (pred.position(), symmetrize(&s))
}
