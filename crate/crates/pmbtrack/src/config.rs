//! Run configuration: per-class tracker parameters, the surveillance
//! region, sigma-point settings, and the TOML format they load from.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::density::{StateCov, StateVec};
use crate::error::{Error, Result};
use crate::motion::{NoiseConfig, UtParams};

/// Axis-aligned surveillance region in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }
}

/// Tuning knobs for one object class. Field names follow the config file
/// keys one-to-one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    /// Detections scoring below this are dropped before tracking.
    pub eta_sf: f64,
    /// Overlap threshold for non-maximum suppression.
    pub eta_iou: f64,
    /// Per-step survival probability.
    pub p_s: f64,
    /// Gating radius on planar center distance, meters.
    pub eta_dist: f64,
    /// Baseline detection probability.
    pub p_d0: f64,
    /// Expected LiDAR return count for a well-observed object.
    pub pts0: f64,
    /// Minimum scaling of `p_d0` for sparsely observed objects.
    pub s_d: f64,
    /// Detections scoring at or above this may seed new tracks directly;
    /// below it they only reinforce the undetected-object intensity.
    pub eta_score: f64,
    /// Intensity mass granted to adaptive birth components.
    pub mu_ab: f64,
    /// Intensity mass for direct newborn tracks.
    pub mu_b0: f64,
    /// Expected clutter detections per frame over the whole region.
    pub mu_c: f64,
    /// Undetected-intensity components older than this are recycled.
    pub eta_step: u32,
    /// Existence needed to extract a track the first time.
    pub eta_ext1: f64,
    /// Existence needed to keep reporting a known track.
    pub eta_ext2: f64,
    /// Consecutive misses after which a known track is no longer reported.
    pub eta_cnt: u32,
    /// Diagonal of the process noise intensity.
    pub q_diag: [f64; 6],
    /// Diagonal of the measurement noise covariance.
    pub r_diag: [f64; 5],
    /// Diagonal of the state covariance granted to newborn tracks.
    pub birth_cov_diag: [f64; 6],
}

impl ClassParams {
    pub fn noise(&self) -> NoiseConfig {
        NoiseConfig::from_diagonals(&self.q_diag, &self.r_diag)
    }

    pub fn birth_cov(&self) -> StateCov {
        StateCov::from_diagonal(&StateVec::from(self.birth_cov_diag))
    }
}

/// Complete configuration for a tracking run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Horizon for the first frame, which has no predecessor timestamp.
    pub fallback_dt: f64,
    /// Bernoulli components below this existence are dropped at pruning.
    pub existence_floor: f64,
    /// Base seed for simulation entry points; the tracker itself draws no
    /// randomness.
    pub seed: u64,
    pub region: Region,
    pub ut: UtParams,
    pub classes: BTreeMap<String, ClassParams>,
}

const DEFAULT_Q_DIAG: [f64; 6] = [0.05, 0.05, 0.5, 0.02, 0.05, 0.5];
const DEFAULT_R_DIAG: [f64; 5] = [0.25, 0.25, 0.25, 0.25, 0.09];
const DEFAULT_BIRTH_COV_DIAG: [f64; 6] = [1.0, 1.0, 4.0, 1.0, 0.25, 1.0];

#[allow(clippy::too_many_arguments)]
fn class(
    eta_sf: f64,
    eta_dist: f64,
    p_d0: f64,
    eta_score: f64,
    mu_b0: f64,
    mu_c: f64,
    eta_step: u32,
    eta_ext1: f64,
    eta_ext2: f64,
    eta_cnt: u32,
) -> ClassParams {
    ClassParams {
        eta_sf,
        eta_iou: 0.1,
        p_s: 0.99,
        eta_dist,
        p_d0,
        pts0: 10.0,
        s_d: 0.5,
        eta_score,
        mu_ab: 2.0,
        mu_b0,
        mu_c,
        eta_step,
        eta_ext1,
        eta_ext2,
        eta_cnt,
        q_diag: DEFAULT_Q_DIAG,
        r_diag: DEFAULT_R_DIAG,
        birth_cov_diag: DEFAULT_BIRTH_COV_DIAG,
    }
}

impl RunConfig {
    /// Tuned urban-driving parameter set covering the seven standard
    /// classes at a 2 Hz frame rate.
    pub fn default_tuned() -> RunConfig {
        let mut classes = BTreeMap::new();
        classes.insert(
            "bicycle".into(),
            class(0.15, 3.0, 0.8, 0.17, 1.0, 0.5, 3, 0.7, 0.95, 3),
        );
        classes.insert(
            "bus".into(),
            class(0.0, 10.0, 0.9, 0.3, 5.0, 0.2, 3, 0.7, 0.7, 2),
        );
        classes.insert(
            "car".into(),
            class(0.1, 10.0, 0.9, 0.25, 2.0, 1.0, 3, 0.7, 0.8, 2),
        );
        classes.insert(
            "motorcycle".into(),
            class(0.16, 4.0, 0.8, 0.18, 1.0, 0.5, 2, 0.7, 0.95, 2),
        );
        classes.insert(
            "pedestrian".into(),
            class(0.2, 3.0, 0.8, 0.2, 1.0, 0.5, 2, 0.7, 0.8, 2),
        );
        classes.insert(
            "trailer".into(),
            class(0.1, 10.0, 0.9, 0.15, 2.0, 0.5, 2, 0.7, 0.8, 2),
        );
        classes.insert(
            "truck".into(),
            class(0.0, 10.0, 0.9, 0.15, 2.0, 1.0, 2, 0.5, 0.9, 2),
        );
        RunConfig {
            fallback_dt: 0.5,
            existence_floor: 1e-4,
            seed: 0,
            region: Region {
                x_min: -54.0,
                x_max: 54.0,
                y_min: -54.0,
                y_max: 54.0,
            },
            ut: UtParams::default(),
            classes,
        }
    }

    /// Car-only parameter set for a 10 Hz highway-style sequence.
    pub fn kitti_car() -> RunConfig {
        let mut params = class(0.3, 4.0, 0.9, 0.65, 0.5, 10.0, 1, 0.85, 0.9, 5);
        params.p_s = 1.0;
        params.s_d = 0.7;
        params.mu_ab = 0.2;
        let mut classes = BTreeMap::new();
        classes.insert("car".into(), params);
        RunConfig {
            fallback_dt: 0.1,
            existence_floor: 1e-4,
            seed: 0,
            region: Region {
                x_min: -80.0,
                x_max: 80.0,
                y_min: -80.0,
                y_max: 80.0,
            },
            ut: UtParams::default(),
            classes,
        }
    }

    pub fn class(&self, name: &str) -> Result<&ClassParams> {
        self.classes
            .get(name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, msg: String) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(msg))
            }
        }
        check(
            self.fallback_dt.is_finite() && self.fallback_dt > 0.0,
            format!("fallback_dt must be positive, got {}", self.fallback_dt),
        )?;
        check(
            (0.0..1.0).contains(&self.existence_floor),
            format!(
                "existence_floor must be in [0, 1), got {}",
                self.existence_floor
            ),
        )?;
        check(
            self.region.area() > 0.0,
            format!("region must have positive area, got {:?}", self.region),
        )?;
        check(
            !self.classes.is_empty(),
            "at least one class is required".into(),
        )?;
        for (name, p) in &self.classes {
            let probability = |v: f64| v.is_finite() && 0.0 < v && v <= 1.0;
            check(
                probability(p.p_s),
                format!("{name}: p_s must be in (0, 1], got {}", p.p_s),
            )?;
            check(
                probability(p.p_d0),
                format!("{name}: p_d0 must be in (0, 1], got {}", p.p_d0),
            )?;
            check(
                probability(p.s_d),
                format!("{name}: s_d must be in (0, 1], got {}", p.s_d),
            )?;
            check(
                probability(p.eta_ext1) && probability(p.eta_ext2),
                format!("{name}: extraction thresholds must be in (0, 1]"),
            )?;
            check(
                p.eta_ext1 <= p.eta_ext2,
                format!(
                    "{name}: eta_ext1 {} must not exceed eta_ext2 {}",
                    p.eta_ext1, p.eta_ext2
                ),
            )?;
            check(
                (0.0..1.0).contains(&p.eta_sf),
                format!("{name}: eta_sf must be in [0, 1), got {}", p.eta_sf),
            )?;
            check(
                (0.0..=1.0).contains(&p.eta_iou),
                format!("{name}: eta_iou must be in [0, 1], got {}", p.eta_iou),
            )?;
            check(
                (0.0..=1.0).contains(&p.eta_score),
                format!("{name}: eta_score must be in [0, 1], got {}", p.eta_score),
            )?;
            check(
                p.eta_dist.is_finite() && p.eta_dist > 0.0,
                format!("{name}: eta_dist must be positive, got {}", p.eta_dist),
            )?;
            check(
                p.pts0.is_finite() && p.pts0 > 0.0,
                format!("{name}: pts0 must be positive, got {}", p.pts0),
            )?;
            for (rate, key) in [(p.mu_ab, "mu_ab"), (p.mu_b0, "mu_b0"), (p.mu_c, "mu_c")] {
                check(
                    rate.is_finite() && rate >= 0.0,
                    format!("{name}: {key} must be non-negative, got {rate}"),
                )?;
            }
            check(
                p.eta_step >= 1,
                format!("{name}: eta_step must be at least 1"),
            )?;
            check(
                p.eta_cnt >= 1,
                format!("{name}: eta_cnt must be at least 1"),
            )?;
            for v in p.q_diag {
                check(
                    v.is_finite() && v >= 0.0,
                    format!("{name}: q_diag entries must be non-negative"),
                )?;
            }
            for v in p.r_diag {
                check(
                    v.is_finite() && v > 0.0,
                    format!("{name}: r_diag entries must be positive"),
                )?;
            }
            for v in p.birth_cov_diag {
                check(
                    v.is_finite() && v > 0.0,
                    format!("{name}: birth_cov_diag entries must be positive"),
                )?;
            }
        }
        Ok(())
    }
}
