//! The probabilistic core of the tracker: gating, local association
//! hypotheses for existing and newly detected objects, adaptive detection
//! probability, and the undetected-intensity update with hybrid birth.
//!
//! All hypothesis costs are negative log weights, computed in the log
//! domain so that likelihoods near underflow still yield finite, orderable
//! costs.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::config::{ClassParams, Region, RunConfig};
use crate::density::{
    log_gaussian_position_likelihood, moment_match, AuxState, BernoulliComponent, GaussianState,
    PmbPosterior, PoissonComponent, StateVec, TimeInvariantState, TrackId,
};
use crate::error::{Error, Result};
use crate::motion::{predict_motion, predict_position_measurement, ukf_update, MeasVec, UtParams};

/// One detector output box in the ground plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub pos: Vector2<f64>,
    pub vel: Vector2<f64>,
    pub yaw: f64,
    pub aux: AuxState,
    pub class: String,
    /// Detector confidence in (0, 1].
    pub score: f64,
    /// LiDAR return count when the detector provides one.
    pub lidar_pts: Option<u64>,
}

impl Detection {
    /// The 5-channel measurement vector `[x, y, vx, vy, yaw]`.
    pub fn measurement(&self) -> MeasVec {
        MeasVec::from([self.pos.x, self.pos.y, self.vel.x, self.vel.y, self.yaw])
    }

    /// Initial motion state for a track born from this detection: measured
    /// position, speed and course from the measured velocity, zero turn
    /// rate and acceleration.
    pub fn newborn_mean(&self) -> StateVec {
        StateVec::from([
            self.pos.x,
            self.pos.y,
            self.vel.norm(),
            self.vel.y.atan2(self.vel.x),
            0.0,
            0.0,
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HypKind {
    Misdetection,
    Detection,
    FirstDetection,
}

/// One local association hypothesis, carrying the Bernoulli component the
/// tracker keeps if the global assignment selects it.
#[derive(Debug, Clone)]
pub struct LocalHypothesis {
    pub kind: HypKind,
    /// Negative log association weight; lower is better.
    pub cost: f64,
    pub component: BernoulliComponent,
    /// Measurement consumed by this hypothesis; `None` for misdetection.
    pub measurement_index: Option<usize>,
    /// Existing object updated by this hypothesis; `None` for first
    /// detections, which create a new object.
    pub object_index: Option<usize>,
}

/// Detection probabilities are kept strictly below 1 inside hypothesis
/// weights so misdetection mass never vanishes and costs stay finite. The
/// clamp preserves the `existence = 1` fixed point of misdetection exactly.
fn clamp_pd(p_d: f64) -> f64 {
    p_d.min(1.0 - 1e-9)
}

/// Floor applied inside logarithms of clutter and birth intensities so a
/// zero-rate configuration yields a huge finite cost instead of an
/// infeasible assignment column.
const MIN_INTENSITY: f64 = 1e-300;

/// Spatial clutter intensity: expected clutter detections per frame spread
/// uniformly over the region.
pub fn clutter_intensity(params: &ClassParams, region: &Region) -> f64 {
    params.mu_c / region.area()
}

/// Detection probability scaled by the observed point count: the baseline
/// for well-observed objects, shrinking linearly to `s_d * p_d0` as the
/// count approaches zero. `None` means the detector reports no counts and
/// the baseline applies.
pub fn adaptive_pd(params: &ClassParams, lidar_pts: Option<u64>) -> f64 {
    match lidar_pts {
        None => params.p_d0,
        Some(pts) => {
            let scale = ((1.0 - params.s_d) * pts as f64 / params.pts0 + params.s_d).min(1.0);
            params.p_d0 * scale
        }
    }
}

/// Detection probability for an entity at `position`: driven by the point
/// count of the nearest same-class detection within the gating radius that
/// carries one, falling back to the class baseline.
pub fn entity_pd(
    position: &Vector2<f64>,
    class: &str,
    dets: &[Detection],
    params: &ClassParams,
) -> f64 {
    let mut nearest: Option<(f64, u64)> = None;
    for det in dets {
        if det.class != class {
            continue;
        }
        let Some(pts) = det.lidar_pts else { continue };
        let dist = (det.pos - position).norm();
        if dist <= params.eta_dist && nearest.is_none_or(|(best, _)| dist < best) {
            nearest = Some((dist, pts));
        }
    }
    adaptive_pd(params, nearest.map(|(_, pts)| pts))
}

/// Survival-scaled prediction of the full posterior: Gaussians go through
/// the motion model, weights and existences shrink by the class survival
/// probability, undetected-component ages increment. Birth mass is not
/// added here; it enters during the update through the hybrid birth model.
pub fn predict(posterior: &PmbPosterior, dt: f64, config: &RunConfig) -> Result<PmbPosterior> {
    let mut out = PmbPosterior {
        poisson: Vec::with_capacity(posterior.poisson.len()),
        bernoulli: Vec::with_capacity(posterior.bernoulli.len()),
        extracted_ids: posterior.extracted_ids.clone(),
    };
    for c in &posterior.poisson {
        let params = config.class(&c.class)?;
        out.poisson.push(PoissonComponent {
            weight: c.weight * params.p_s,
            density: predict_motion(&c.density, dt, &params.noise(), &config.ut)?,
            class: c.class.clone(),
            age: c.age + 1,
            marked: c.marked,
        });
    }
    for b in &posterior.bernoulli {
        let params = config.class(&b.fixed.class)?;
        let mut next = b.clone();
        next.existence = (b.existence * params.p_s).min(1.0);
        next.density = predict_motion(&b.density, dt, &params.noise(), &config.ut)?;
        out.bernoulli.push(next);
    }
    Ok(out)
}

/// Indices of measurements whose class matches the object and whose center
/// lies within the gating radius (inclusive) of its predicted position.
pub fn gate_object(bern: &BernoulliComponent, dets: &[Detection], eta_dist: f64) -> Vec<usize> {
    let center = bern.density.position();
    dets.iter()
        .enumerate()
        .filter(|(_, d)| d.class == bern.fixed.class && (d.pos - center).norm() <= eta_dist)
        .map(|(m, _)| m)
        .collect()
}

/// Indices of undetected-intensity components matching the measurement's
/// class within the gating radius (inclusive) of the measurement.
pub fn gate_measurement(
    det: &Detection,
    poisson: &[PoissonComponent],
    eta_dist: f64,
) -> Vec<usize> {
    poisson
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            c.class == det.class && (c.density.position() - det.pos).norm() <= eta_dist
        })
        .map(|(j, _)| j)
        .collect()
}

/// Hypothesis that an existing object went undetected: existence shrinks
/// by the misdetection odds and the density is untouched. Misdetection is
/// the assignment baseline, not a cost-matrix column; its cost is recorded
/// for diagnostics.
pub fn hyp_misdetection(
    bern: &BernoulliComponent,
    p_d: f64,
    object_index: usize,
) -> LocalHypothesis {
    let p_d = clamp_pd(p_d);
    let r = bern.existence;
    let q = 1.0 - r + r * (1.0 - p_d);
    let mut component = bern.clone();
    component.existence = (r * (1.0 - p_d) / q).clamp(0.0, 1.0);
    LocalHypothesis {
        kind: HypKind::Misdetection,
        cost: -q.ln(),
        component,
        measurement_index: None,
        object_index: Some(object_index),
    }
}

/// Hypothesis that a gated measurement belongs to an existing object: the
/// density takes the full measurement update, existence snaps to 1, and
/// the cost is the negative log association weight relative to the
/// misdetection baseline.
pub fn hyp_detection(
    bern: &BernoulliComponent,
    det: &Detection,
    measurement_index: usize,
    object_index: usize,
    p_d: f64,
    params: &ClassParams,
    ut: &UtParams,
) -> Result<LocalHypothesis> {
    let p_d = clamp_pd(p_d);
    let noise = params.noise();
    let (z_hat, s) = predict_position_measurement(&bern.density, &noise);
    let log_n = log_gaussian_position_likelihood(&det.pos, &z_hat, &s)?;
    let r = bern.existence;
    let q = 1.0 - r + r * (1.0 - p_d);
    let cost = -(r.max(MIN_INTENSITY).ln() + p_d.ln() + log_n - q.ln());
    let mut component = bern.clone();
    component.existence = 1.0;
    component.density = ukf_update(&bern.density, &det.measurement(), &noise, ut)?;
    Ok(LocalHypothesis {
        kind: HypKind::Detection,
        cost,
        component,
        measurement_index: Some(measurement_index),
        object_index: Some(object_index),
    })
}

/// Hypothesis that a measurement is the first detection of an undetected
/// object covered by gated intensity components. Each gated component
/// contributes mass `weight * p_d * likelihood`; the new object's density
/// moment-matches the per-component measurement updates and every
/// contributing component is returned for marking.
#[allow(clippy::too_many_arguments)]
pub fn hyp_first_detection_ppp(
    poisson: &[PoissonComponent],
    gated: &[usize],
    pds: &[f64],
    det: &Detection,
    measurement_index: usize,
    lambda_c: f64,
    id: TrackId,
    params: &ClassParams,
    ut: &UtParams,
) -> Result<(LocalHypothesis, Vec<usize>)> {
    if gated.is_empty() || gated.len() != pds.len() {
        return Err(Error::InvalidArgument(
            "first-detection hypothesis needs gated components and matching detection probabilities",
        ));
    }
    let noise = params.noise();
    let mut terms = Vec::with_capacity(gated.len());
    let mut mass = 0.0;
    for (&j, &p_d) in gated.iter().zip(pds) {
        let comp = &poisson[j];
        let p_d = clamp_pd(p_d);
        let (z_hat, s) = predict_position_measurement(&comp.density, &noise);
        let log_n = log_gaussian_position_likelihood(&det.pos, &z_hat, &s)?;
        let contribution = comp.weight * p_d * log_n.exp();
        mass += contribution;
        let updated = ukf_update(&comp.density, &det.measurement(), &noise, ut)?;
        terms.push((contribution, updated));
    }
    let denom = mass + lambda_c;
    let existence = if denom > 0.0 {
        (mass / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let cost = -denom.max(MIN_INTENSITY).ln();
    if terms.iter().map(|(w, _)| w).sum::<f64>() <= 0.0 {
        // Every contribution underflowed; fall back to an unweighted match
        // so the hypothesis still carries a usable density.
        for term in &mut terms {
            term.0 = 1.0;
        }
    }
    let density = moment_match(&terms)?;
    let component = BernoulliComponent {
        existence,
        density,
        aux: det.aux,
        fixed: TimeInvariantState {
            class: det.class.clone(),
            track_id: id,
        },
        miss_count: 0,
        track_len: 0,
        score: 0.0,
    };
    Ok((
        LocalHypothesis {
            kind: HypKind::FirstDetection,
            cost,
            component,
            measurement_index: Some(measurement_index),
            object_index: None,
        },
        gated.to_vec(),
    ))
}

/// Probability that a measurement is already explained by some detected
/// object: summed positional likelihoods of same-class objects, clamped
/// at 1.
pub fn association_probability(
    det: &Detection,
    objects: &[BernoulliComponent],
    params: &ClassParams,
) -> Result<f64> {
    let noise = params.noise();
    let mut total = 0.0;
    for b in objects.iter().filter(|b| b.fixed.class == det.class) {
        let (z_hat, s) = predict_position_measurement(&b.density, &noise);
        total += log_gaussian_position_likelihood(&det.pos, &z_hat, &s)?.exp();
    }
    Ok(total.min(1.0))
}

/// Hypothesis for a measurement no intensity component covers. Scores at
/// or above the class threshold create a full newborn track whose cost
/// weighs direct birth against clutter; lower scores are treated as
/// clutter (existence 0, dropped at pruning) and instead reinforce the
/// undetected intensity through `habm_birth_intensity`.
pub fn habm_unused(
    det: &Detection,
    p_a: f64,
    measurement_index: usize,
    lambda_c: f64,
    id: TrackId,
    params: &ClassParams,
    region: &Region,
) -> LocalHypothesis {
    let density = GaussianState::new(det.newborn_mean(), params.birth_cov());
    let (cost, existence) = if det.score < params.eta_score {
        (-lambda_c.max(MIN_INTENSITY).ln(), 0.0)
    } else {
        let birth = params.mu_b0 * (1.0 - p_a) / region.area();
        (-(birth + lambda_c).max(MIN_INTENSITY).ln(), 1.0)
    };
    LocalHypothesis {
        kind: HypKind::FirstDetection,
        cost,
        component: BernoulliComponent {
            existence,
            density,
            aux: det.aux,
            fixed: TimeInvariantState {
                class: det.class.clone(),
                track_id: id,
            },
            miss_count: 0,
            track_len: 0,
            score: 0.0,
        },
        measurement_index: Some(measurement_index),
        object_index: None,
    }
}

/// Undetected-intensity components seeded by low-score unused
/// measurements: mass `mu_ab * (1 - p_a)` at the measurement with the
/// newborn covariance, age 0, unmarked.
pub fn habm_birth_intensity(
    low_score: &[(&Detection, f64)],
    config: &RunConfig,
) -> Result<Vec<PoissonComponent>> {
    low_score
        .iter()
        .map(|(det, p_a)| {
            let params = config.class(&det.class)?;
            Ok(PoissonComponent {
                weight: params.mu_ab * (1.0 - p_a),
                density: GaussianState::new(det.newborn_mean(), params.birth_cov()),
                class: det.class.clone(),
                age: 0,
                marked: false,
            })
        })
        .collect()
}

/// Measurement update of the undetected intensity: each surviving
/// component keeps the `1 - p_d` share of its mass (the detected share
/// moved into first-detection hypotheses), then adaptive-birth components
/// are appended.
pub fn ppp_update(
    poisson: Vec<PoissonComponent>,
    pds: &[f64],
    birth: Vec<PoissonComponent>,
) -> Vec<PoissonComponent> {
    assert_eq!(
        poisson.len(),
        pds.len(),
        "one detection probability per component"
    );
    let mut out = poisson;
    for (c, &p_d) in out.iter_mut().zip(pds) {
        c.weight *= 1.0 - p_d;
    }
    out.extend(birth);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::gaussian_position_likelihood;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn car_config() -> RunConfig {
        let mut config = RunConfig::default_tuned();
        config.region = Region {
            x_min: 0.0,
            x_max: 100.0,
            y_min: 0.0,
            y_max: 100.0,
        };
        config
    }

    fn detection(x: f64, y: f64, score: f64) -> Detection {
        Detection {
            pos: Vector2::new(x, y),
            vel: Vector2::new(3.0, 4.0),
            yaw: 0.9,
            aux: AuxState {
                length: 4.5,
                width: 1.9,
                height: 1.6,
                z: 0.8,
            },
            class: "car".into(),
            score,
            lidar_pts: None,
        }
    }

    fn bernoulli(x: f64, y: f64, existence: f64) -> BernoulliComponent {
        bernoulli_with_cov(x, y, existence, 1.0)
    }

    fn bernoulli_with_cov(x: f64, y: f64, existence: f64, pos_var: f64) -> BernoulliComponent {
        let mut cov = crate::density::StateCov::identity();
        cov[(0, 0)] = pos_var;
        cov[(1, 1)] = pos_var;
        BernoulliComponent {
            existence,
            density: GaussianState::new(StateVec::from([x, y, 5.0, 0.9, 0.0, 0.0]), cov),
            aux: AuxState {
                length: 4.5,
                width: 1.9,
                height: 1.6,
                z: 0.8,
            },
            fixed: TimeInvariantState {
                class: "car".into(),
                track_id: TrackId { step: 0, index: 0 },
            },
            miss_count: 0,
            track_len: 3,
            score: 0.5,
        }
    }

    fn poisson(x: f64, y: f64, weight: f64, pos_var: f64) -> PoissonComponent {
        let mut cov = crate::density::StateCov::identity();
        cov[(0, 0)] = pos_var;
        cov[(1, 1)] = pos_var;
        PoissonComponent {
            weight,
            density: GaussianState::new(StateVec::from([x, y, 5.0, 0.9, 0.0, 0.0]), cov),
            class: "car".into(),
            age: 1,
            marked: false,
        }
    }

    /// Position variance that makes the centered positional likelihood
    /// equal `n` under the default 0.25 position measurement noise.
    fn pos_var_for_likelihood(n: f64) -> f64 {
        1.0 / (2.0 * PI * n) - 0.25
    }

    #[test]
    fn clutter_intensity_spreads_rate_over_area() {
        let config = car_config();
        let params = config.class("car").unwrap();
        assert_eq!(clutter_intensity(params, &config.region), 1e-4);
        let mut zero = params.clone();
        zero.mu_c = 0.0;
        assert_eq!(clutter_intensity(&zero, &config.region), 0.0);
    }

    #[test]
    fn adaptive_pd_scales_with_point_count() {
        let config = car_config();
        let params = config.class("car").unwrap();
        assert_relative_eq!(adaptive_pd(params, Some(0)), 0.45, epsilon = 1e-15);
        assert_relative_eq!(adaptive_pd(params, Some(20)), 0.9, epsilon = 1e-15);
        assert_relative_eq!(adaptive_pd(params, Some(5)), 0.675, epsilon = 1e-15);
        assert_eq!(adaptive_pd(params, None), 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let pts = rng.gen_range(0..200u64);
            let p = adaptive_pd(params, Some(pts));
            assert!(p >= params.p_d0 * params.s_d - 1e-15 && p <= params.p_d0 + 1e-15);
        }
    }

    #[test]
    fn entity_pd_uses_nearest_counted_neighbor() {
        let config = car_config();
        let params = config.class("car").unwrap();
        let here = Vector2::new(10.0, 10.0);
        // No detections with counts: baseline.
        let no_counts = vec![detection(10.0, 10.0, 0.9)];
        assert_eq!(entity_pd(&here, "car", &no_counts, params), 0.9);
        // Nearest counted neighbor wins over a farther one.
        let mut near = detection(11.0, 10.0, 0.9);
        near.lidar_pts = Some(0);
        let mut far = detection(15.0, 10.0, 0.9);
        far.lidar_pts = Some(20);
        assert_relative_eq!(entity_pd(&here, "car", &[far.clone(), near], params), 0.45);
        // Out-of-gate counts are ignored.
        let mut outside = detection(10.0 + params.eta_dist + 1.0, 10.0, 0.9);
        outside.lidar_pts = Some(0);
        assert_eq!(entity_pd(&here, "car", &[outside], params), 0.9);
    }

    #[test]
    fn prediction_scales_mass_and_ages() {
        let config = car_config();
        let mut posterior = PmbPosterior::empty();
        posterior.poisson.push(poisson(10.0, 10.0, 2.0, 1.0));
        posterior.bernoulli.push(bernoulli(20.0, 20.0, 0.8));
        let out = predict(&posterior, 0.5, &config).unwrap();
        assert_eq!(out.poisson.len(), 1);
        assert_eq!(out.bernoulli.len(), 1);
        assert_relative_eq!(out.poisson[0].weight, 2.0 * 0.99, epsilon = 1e-15);
        assert_relative_eq!(out.bernoulli[0].existence, 0.792, epsilon = 1e-15);
        assert_eq!(out.poisson[0].age, 2);
        // Lightweight fields ride along unchanged.
        assert_eq!(out.bernoulli[0].track_len, 3);
        assert_eq!(out.bernoulli[0].miss_count, 0);
        assert_eq!(out.bernoulli[0].score, 0.5);
    }

    #[test]
    fn prediction_with_unit_survival_and_zero_horizon_is_conservative() {
        let mut config = car_config();
        config.classes.get_mut("car").unwrap().p_s = 1.0;
        let mut posterior = PmbPosterior::empty();
        posterior.poisson.push(poisson(10.0, 10.0, 2.0, 1.0));
        posterior.bernoulli.push(bernoulli(20.0, 20.0, 0.8));
        let out = predict(&posterior, 0.0, &config).unwrap();
        assert_eq!(out.poisson[0].weight, 2.0);
        assert_eq!(out.bernoulli[0].existence, 0.8);
        assert_eq!(out.poisson[0].density, posterior.poisson[0].density);
        assert_eq!(out.bernoulli[0].density, posterior.bernoulli[0].density);
        assert_eq!(out.poisson[0].age, 2);
    }

    #[test]
    fn gating_is_class_segregated_and_inclusive() {
        let bern = bernoulli(10.0, 10.0, 0.9);
        let mut dets = vec![
            detection(12.0, 10.0, 0.9),
            detection(10.0 + 10.0, 10.0, 0.9),
            detection(21.0, 10.0, 0.9),
        ];
        dets.push(Detection {
            class: "bus".into(),
            ..detection(10.0, 10.0, 0.9)
        });
        // Gate radius 10: distances 2, 10 (inclusive boundary), 11, and a
        // class mismatch at distance 0.
        assert_eq!(gate_object(&bern, &dets, 10.0), vec![0, 1]);

        let comps = vec![poisson(10.0, 10.0, 1.0, 1.0), poisson(25.0, 10.0, 1.0, 1.0)];
        let det = detection(15.0, 10.0, 0.9);
        assert_eq!(gate_measurement(&det, &comps, 10.0), vec![0, 1]);
        assert_eq!(gate_measurement(&det, &comps, 5.0), vec![0]);
        let mut bus = detection(15.0, 10.0, 0.9);
        bus.class = "bus".into();
        assert!(gate_measurement(&bus, &comps, 10.0).is_empty());
    }

    #[test]
    fn misdetection_follows_the_odds_formula() {
        let bern = bernoulli(0.0, 0.0, 0.5);
        let hyp = hyp_misdetection(&bern, 0.9, 4);
        assert_relative_eq!(hyp.component.existence, 0.05 / 0.55, epsilon = 1e-12);
        assert_relative_eq!(hyp.cost, -(0.55f64).ln(), epsilon = 1e-12);
        assert_eq!(hyp.object_index, Some(4));
        assert_eq!(hyp.measurement_index, None);
        assert_eq!(hyp.component.density, bern.density);

        // p_d = 0 leaves existence untouched.
        let hyp = hyp_misdetection(&bern, 0.0, 0);
        assert_eq!(hyp.component.existence, 0.5);
        // Certain existence stays certain for any p_d < 1, including the
        // clamped p_d = 1 case.
        for p_d in [0.3, 0.9, 1.0] {
            let certain = bernoulli(0.0, 0.0, 1.0);
            let hyp = hyp_misdetection(&certain, p_d, 0);
            assert_eq!(hyp.component.existence, 1.0);
        }
    }

    #[test]
    fn detection_hypothesis_matches_scalar_weight() {
        let config = car_config();
        let params = config.class("car").unwrap();
        // Position variance tuned so the centered likelihood is exactly 0.1.
        let bern = bernoulli_with_cov(10.0, 10.0, 1.0, pos_var_for_likelihood(0.1));
        let det = detection(10.0, 10.0, 0.9);
        let hyp = hyp_detection(&bern, &det, 2, 0, 0.9, params, &config.ut).unwrap();
        assert_relative_eq!(hyp.cost, -(0.9f64).ln(), epsilon = 1e-12);
        assert_eq!(hyp.component.existence, 1.0);
        assert_eq!(hyp.measurement_index, Some(2));
        assert_eq!(hyp.object_index, Some(0));

        // Independent scalar route for a partial-existence object.
        let bern = bernoulli_with_cov(10.0, 10.0, 0.7, 0.6);
        let det = detection(10.8, 9.5, 0.9);
        let p_d = 0.825;
        let hyp = hyp_detection(&bern, &det, 0, 1, p_d, params, &config.ut).unwrap();
        let (z_hat, s) = predict_position_measurement(&bern.density, &params.noise());
        let n = gaussian_position_likelihood(&det.pos, &z_hat, &s).unwrap();
        let want = -(0.7 * p_d * n / (1.0 - 0.7 + 0.7 * (1.0 - p_d))).ln();
        assert_relative_eq!(hyp.cost, want, epsilon = 1e-12);
        // The density is the measurement update of the prior.
        let want_density = ukf_update(
            &bern.density,
            &det.measurement(),
            &params.noise(),
            &config.ut,
        )
        .unwrap();
        assert_eq!(hyp.component.density, want_density);
    }

    #[test]
    fn first_detection_matches_scalar_weight() {
        let config = car_config();
        let params = config.class("car").unwrap();
        let comps = vec![poisson(10.0, 10.0, 2.0, pos_var_for_likelihood(0.05))];
        let det = detection(10.0, 10.0, 0.9);
        let id = TrackId { step: 3, index: 1 };
        let (hyp, marks) =
            hyp_first_detection_ppp(&comps, &[0], &[0.9], &det, 1, 1e-4, id, params, &config.ut)
                .unwrap();
        // mass = 2 * 0.9 * 0.05 = 0.09.
        assert_relative_eq!(hyp.component.existence, 0.09 / 0.0901, epsilon = 1e-9);
        assert_relative_eq!(hyp.cost, -(0.0901f64).ln(), epsilon = 1e-9);
        assert_eq!(marks, vec![0]);
        assert_eq!(hyp.component.fixed.track_id, id);
        assert_eq!(hyp.component.track_len, 0);
        assert_eq!(hyp.kind, HypKind::FirstDetection);
        // A single contribution moment-matches to its own update.
        let want = ukf_update(
            &comps[0].density,
            &det.measurement(),
            &params.noise(),
            &config.ut,
        )
        .unwrap();
        assert_relative_eq!(hyp.component.density.mean, want.mean, epsilon = 1e-12);
        assert_relative_eq!(hyp.component.density.cov, want.cov, epsilon = 1e-12);
    }

    #[test]
    fn first_detection_mixes_multiple_components() {
        let config = car_config();
        let params = config.class("car").unwrap();
        let comps = vec![poisson(10.0, 10.0, 2.0, 0.5), poisson(12.0, 10.0, 1.0, 0.5)];
        let det = detection(11.0, 10.0, 0.9);
        let (hyp, marks) = hyp_first_detection_ppp(
            &comps,
            &[0, 1],
            &[0.9, 0.9],
            &det,
            0,
            1e-4,
            TrackId { step: 0, index: 0 },
            params,
            &config.ut,
        )
        .unwrap();
        assert_eq!(marks, vec![0, 1]);
        // Scalar route for the total mass.
        let noise = params.noise();
        let mut mass = 0.0;
        for c in &comps {
            let (z_hat, s) = predict_position_measurement(&c.density, &noise);
            mass += c.weight * 0.9 * gaussian_position_likelihood(&det.pos, &z_hat, &s).unwrap();
        }
        assert_relative_eq!(
            hyp.component.existence,
            mass / (mass + 1e-4),
            epsilon = 1e-12
        );
        assert_relative_eq!(hyp.cost, -(mass + 1e-4).ln(), epsilon = 1e-12);
        // The mixed mean sits between the two component updates, nearer the
        // heavier, closer component only through its contribution weight.
        assert!(hyp.component.density.mean[0] > 10.0 && hyp.component.density.mean[0] < 12.0);
    }

    #[test]
    fn first_detection_existence_grows_with_mass_over_clutter() {
        let config = car_config();
        let params = config.class("car").unwrap();
        let det = detection(10.0, 10.0, 0.9);
        let mut last = -1.0;
        for weight in [0.01, 0.1, 1.0, 10.0] {
            let comps = vec![poisson(10.0, 10.0, weight, 0.5)];
            let (hyp, _) = hyp_first_detection_ppp(
                &comps,
                &[0],
                &[0.9],
                &det,
                0,
                1e-4,
                TrackId { step: 0, index: 0 },
                params,
                &config.ut,
            )
            .unwrap();
            assert!(hyp.component.existence > last);
            last = hyp.component.existence;
        }
    }

    #[test]
    fn association_probability_sums_and_clamps() {
        let config = car_config();
        let params = config.class("car").unwrap();
        let det = detection(10.0, 10.0, 0.9);
        assert_eq!(association_probability(&det, &[], params).unwrap(), 0.0);

        let var = pos_var_for_likelihood(0.3);
        let objects = vec![
            bernoulli_with_cov(10.0, 10.0, 0.9, var),
            bernoulli_with_cov(10.0, 10.0, 0.9, var),
        ];
        let p = association_probability(&det, &objects, params).unwrap();
        assert_relative_eq!(p, 0.6, epsilon = 1e-12);

        let var = pos_var_for_likelihood(0.6);
        let crowded = vec![
            bernoulli_with_cov(10.0, 10.0, 0.9, var),
            bernoulli_with_cov(10.0, 10.0, 0.9, var),
            bernoulli_with_cov(10.0, 10.0, 0.9, var),
        ];
        assert_eq!(
            association_probability(&det, &crowded, params).unwrap(),
            1.0
        );

        // Other classes do not contribute.
        let mut bus_det = detection(10.0, 10.0, 0.9);
        bus_det.class = "bus".into();
        assert_eq!(
            association_probability(&bus_det, &objects, config.class("bus").unwrap()).unwrap(),
            0.0
        );
    }

    #[test]
    fn unused_measurement_branches_on_score() {
        let config = car_config();
        let params = config.class("car").unwrap();
        let id = TrackId { step: 7, index: 2 };

        // Low score: clutter hypothesis, flagged by zero existence.
        let low = detection(10.0, 10.0, 0.2);
        let hyp = habm_unused(&low, 0.4, 2, 1e-4, id, params, &config.region);
        assert_relative_eq!(hyp.cost, -(1e-4f64).ln(), epsilon = 1e-12);
        assert_eq!(hyp.component.existence, 0.0);
        assert_eq!(hyp.kind, HypKind::FirstDetection);

        // High score, fully explained by existing objects: birth mass 0.
        let high = detection(10.0, 10.0, 0.9);
        let hyp = habm_unused(&high, 1.0, 0, 1e-4, id, params, &config.region);
        assert_relative_eq!(hyp.cost, -(1e-4f64).ln(), epsilon = 1e-12);
        assert_eq!(hyp.component.existence, 1.0);

        // High score, unexplained: birth mass mu_b0 / area joins clutter.
        let hyp = habm_unused(&high, 0.0, 0, 1e-4, id, params, &config.region);
        assert_relative_eq!(hyp.cost, -(3e-4f64).ln(), epsilon = 1e-12);
        assert_eq!(hyp.component.existence, 1.0);
        // Newborn state resolves speed and course from velocity.
        assert_relative_eq!(hyp.component.density.mean[2], 5.0, epsilon = 1e-12);
        assert_relative_eq!(
            hyp.component.density.mean[3],
            (4.0f64).atan2(3.0),
            epsilon = 1e-12
        );
        assert_eq!(hyp.component.fixed.track_id, id);
    }

    #[test]
    fn adaptive_birth_mass_shrinks_with_association_probability() {
        let config = car_config();
        let d1 = detection(10.0, 10.0, 0.2);
        let d2 = detection(30.0, 30.0, 0.1);
        let birth = habm_birth_intensity(&[(&d1, 0.0), (&d2, 0.75)], &config).unwrap();
        assert_eq!(birth.len(), 2);
        assert_relative_eq!(birth[0].weight, 2.0, epsilon = 1e-15);
        assert_relative_eq!(birth[1].weight, 0.5, epsilon = 1e-15);
        assert!(birth.iter().all(|c| c.age == 0 && !c.marked));
        assert_eq!(birth[0].density.mean[0], 10.0);
    }

    #[test]
    fn ppp_update_keeps_undetected_mass_share() {
        let comps = vec![poisson(0.0, 0.0, 2.0, 1.0), poisson(5.0, 5.0, 1.0, 1.0)];
        // p_d = 0 leaves weights bitwise unchanged.
        let out = ppp_update(comps.clone(), &[0.0, 0.0], vec![]);
        assert_eq!(out[0].weight, 2.0);
        assert_eq!(out[1].weight, 1.0);
        // p_d = 1 empties the component exactly.
        let out = ppp_update(comps.clone(), &[1.0, 0.6], vec![]);
        assert_eq!(out[0].weight, 0.0);
        assert_relative_eq!(out[1].weight, 0.4, epsilon = 1e-15);
        // Birth components land after the survivors.
        let out = ppp_update(comps, &[0.6, 0.6], vec![poisson(9.0, 9.0, 0.7, 1.0)]);
        assert_eq!(out.len(), 3);
        assert_relative_eq!(out[0].weight, 0.8, epsilon = 1e-15);
        assert_eq!(out[2].weight, 0.7);
    }

    #[test]
    fn hypothesis_costs_stay_finite_and_probabilities_in_range() {
        let config = car_config();
        let params = config.class("car").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10_000 {
            let r = rng.gen_range(1e-4..=1.0);
            let p_d = rng.gen_range(0.0..=1.0);
            let offset = rng.gen_range(-3.0..3.0);
            let var = rng.gen_range(0.05..5.0);
            let bern = bernoulli_with_cov(10.0, 10.0, r, var);
            let det = detection(10.0 + offset, 10.0 - offset, rng.gen_range(0.05..1.0));

            let miss = hyp_misdetection(&bern, p_d, 0);
            assert!(miss.cost.is_finite());
            assert!((0.0..=1.0).contains(&miss.component.existence));
            assert!(
                miss.component.existence <= r + 1e-15,
                "misdetection cannot raise existence"
            );

            let hyp = hyp_detection(&bern, &det, 0, 0, p_d, params, &config.ut).unwrap();
            assert!(hyp.cost.is_finite());
            assert!((0.0..=1.0).contains(&hyp.component.existence));

            let comps = vec![poisson(10.0, 10.0, rng.gen_range(0.0..4.0), var)];
            let (first, _) = hyp_first_detection_ppp(
                &comps,
                &[0],
                &[p_d],
                &det,
                0,
                1e-4,
                TrackId { step: 0, index: 0 },
                params,
                &config.ut,
            )
            .unwrap();
            assert!(first.cost.is_finite());
            assert!((0.0..=1.0).contains(&first.component.existence));

            let p_a = rng.gen_range(0.0..=1.0);
            let unused = habm_unused(
                &det,
                p_a,
                0,
                1e-4,
                TrackId { step: 0, index: 0 },
                params,
                &config.region,
            );
            assert!(unused.cost.is_finite());
            assert!((0.0..=1.0).contains(&unused.component.existence));
        }
    }

    #[test]
    fn map_choice_matches_bayes_enumeration() {
        // One object, one measurement, one undetected component: the
        // assignment picks detection over first detection exactly when the
        // direct two-hypothesis Bayes weights say so.
        let config = car_config();
        let params = config.class("car").unwrap();
        let noise = params.noise();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut detections_chosen = 0;
        for _ in 0..500 {
            let r = rng.gen_range(0.2..=0.99);
            let p_d = rng.gen_range(0.1..0.95);
            let bern = bernoulli_with_cov(10.0, 10.0, r, rng.gen_range(0.1..2.0));
            let comp = poisson(
                10.0 + rng.gen_range(-2.0..2.0),
                10.0 + rng.gen_range(-2.0..2.0),
                rng.gen_range(0.01..3.0),
                rng.gen_range(0.1..2.0),
            );
            let det = detection(
                10.0 + rng.gen_range(-2.0..2.0),
                10.0 + rng.gen_range(-2.0..2.0),
                0.9,
            );
            let lambda_c = 1e-4;

            let det_hyp = hyp_detection(&bern, &det, 0, 0, p_d, params, &config.ut).unwrap();
            let (first_hyp, _) = hyp_first_detection_ppp(
                std::slice::from_ref(&comp),
                &[0],
                &[p_d],
                &det,
                0,
                lambda_c,
                TrackId { step: 0, index: 0 },
                params,
                &config.ut,
            )
            .unwrap();
            let chose_detection = det_hyp.cost < first_hyp.cost;

            // Independent enumeration. Joint weight of "measurement from
            // the object" is r p_d N_obj; of "object missed, measurement a
            // first detection or clutter" is (1 - r + r(1 - p_d)) (mass +
            // lambda_c).
            let (z_hat, s) = predict_position_measurement(&bern.density, &noise);
            let n_obj = gaussian_position_likelihood(&det.pos, &z_hat, &s).unwrap();
            let (z_hat, s) = predict_position_measurement(&comp.density, &noise);
            let n_ppp = gaussian_position_likelihood(&det.pos, &z_hat, &s).unwrap();
            let w_det = r * p_d * n_obj;
            let w_first = (1.0 - r + r * (1.0 - p_d)) * (comp.weight * p_d * n_ppp + lambda_c);
            assert_eq!(
                chose_detection,
                w_det > w_first,
                "costs {} vs {} disagree with weights {} vs {}",
                det_hyp.cost,
                first_hyp.cost,
                w_det,
                w_first
            );
            if chose_detection {
                detections_chosen += 1;
            }
        }
        // The draw ranges should exercise both outcomes.
        assert!(detections_chosen > 50 && detections_chosen < 450);
    }
}
