//! Synthetic scenario generation: noiseless ground-truth trajectories on
//! the turning motion model, plus noisy detections with misses and
//! uniform clutter.
//!
//! Draw order per frame is fixed so a seed pins the whole scenario: for
//! each alive object, five standard normal measurement perturbations, a
//! confidence draw, then the keep decision; afterwards one clutter count
//! and, per clutter point, position, velocity, yaw, and confidence.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::Region;
use crate::density::{AuxState, StateVec, TrackId, STATE_PHI};
use crate::error::{Error, Result};
use crate::filter::Detection;
use crate::motion::ctra_transition;
use crate::tracks::TrackRecord;

/// One simulated object: a motion state that evolves deterministically
/// from its birth frame until its death frame (exclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub class: String,
    pub birth: u64,
    pub death: u64,
    /// Initial `[x, y, speed, heading, turn rate, acceleration]`.
    pub init: [f64; 6],
    /// Box extent `[length, width, height]`.
    pub size: [f64; 3],
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub dt: f64,
    pub frames: u64,
    /// Per-frame detection probability of every alive object.
    pub p_d: f64,
    /// Expected clutter detections per frame.
    pub clutter_rate: f64,
    pub region: Region,
    /// Measurement noise standard deviations `[x, y, vx, vy, yaw]`.
    pub noise_std: [f64; 5],
    /// Confidence range for true detections.
    pub true_score: [f64; 2],
    /// Confidence range for clutter detections.
    pub clutter_score: [f64; 2],
    /// Clutter velocity components are uniform in `[-speed, speed]`.
    pub clutter_speed: f64,
    pub clutter_size: [f64; 3],
    pub clutter_z: f64,
    pub clutter_class: String,
    pub objects: Vec<SimObject>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::InvalidConfig("dt must be positive".into()));
        }
        if self.frames == 0 {
            return Err(Error::InvalidConfig("frames must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p_d) {
            return Err(Error::InvalidConfig("p_d must lie in [0, 1]".into()));
        }
        if !self.clutter_rate.is_finite() || self.clutter_rate < 0.0 {
            return Err(Error::InvalidConfig(
                "clutter_rate must be nonnegative".into(),
            ));
        }
        if self.region.area() <= 0.0 {
            return Err(Error::InvalidConfig(
                "region must have positive area".into(),
            ));
        }
        for (name, range) in [
            ("true_score", self.true_score),
            ("clutter_score", self.clutter_score),
        ] {
            if !(0.0 < range[0] && range[0] <= range[1] && range[1] <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must satisfy 0 < low <= high <= 1"
                )));
            }
        }
        if self.noise_std.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidConfig(
                "noise_std entries must be nonnegative".into(),
            ));
        }
        if !self.clutter_speed.is_finite() || self.clutter_speed < 0.0 {
            return Err(Error::InvalidConfig(
                "clutter_speed must be nonnegative".into(),
            ));
        }
        for obj in &self.objects {
            if obj.death <= obj.birth {
                return Err(Error::InvalidConfig(
                    "object death must come after birth".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

/// A ten-car desk scenario on a 100 by 100 meter region: slow turning
/// trajectories that stay in view, moderate measurement noise, five
/// clutter detections per frame on average.
pub fn desk_scenario() -> ScenarioConfig {
    let mut objects = Vec::new();
    for i in 0..10u32 {
        let angle = i as f64 * std::f64::consts::TAU / 10.0;
        // Speeds and turn rates keep every loop radius under 10 meters,
        // so a start 25 meters out never leaves the region.
        let speed = 1.0 + 0.15 * i as f64;
        let turn = (0.15 + 0.01 * i as f64) * if i % 2 == 0 { 1.0 } else { -1.0 };
        objects.push(SimObject {
            class: "car".into(),
            birth: 0,
            death: 100,
            init: [
                25.0 * angle.cos(),
                25.0 * angle.sin(),
                speed,
                angle + std::f64::consts::FRAC_PI_2,
                turn,
                0.0,
            ],
            size: [4.5, 1.9, 1.6],
            z: 0.8,
        });
    }
    ScenarioConfig {
        dt: 0.5,
        frames: 100,
        p_d: 0.95,
        clutter_rate: 5.0,
        region: Region {
            x_min: -50.0,
            x_max: 50.0,
            y_min: -50.0,
            y_max: 50.0,
        },
        noise_std: [0.3, 0.3, 0.2, 0.2, 0.05],
        true_score: [0.5, 1.0],
        clutter_score: [0.1, 0.6],
        clutter_speed: 5.0,
        clutter_size: [4.5, 1.9, 1.6],
        clutter_z: 0.8,
        clutter_class: "car".into(),
        objects,
    }
}

fn uniform(rng: &mut ChaCha8Rng, low: f64, high: f64) -> f64 {
    if low == high {
        low
    } else {
        rng.gen_range(low..high)
    }
}

/// Flat detection stream: each detection tagged with its frame and
/// timestamp, ordered by frame.
pub type DetectionStream = Vec<(u64, f64, Detection)>;

/// Generates the ground-truth track records and the detection stream for
/// a scenario. The same seed always produces the same output.
pub fn simulate(config: &ScenarioConfig, seed: u64) -> Result<(Vec<TrackRecord>, DetectionStream)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truth = Vec::new();
    let mut detections = Vec::new();
    let mut states: Vec<StateVec> = config
        .objects
        .iter()
        .map(|o| StateVec::from(o.init))
        .collect();
    for frame in 0..config.frames {
        let t = frame as f64 * config.dt;
        for (i, obj) in config.objects.iter().enumerate() {
            if frame < obj.birth || frame >= obj.death {
                continue;
            }
            if frame > obj.birth {
                states[i] = ctra_transition(&states[i], config.dt);
            }
            let state = &states[i];
            let speed = state[2];
            let heading = state[STATE_PHI];
            truth.push(TrackRecord {
                frame,
                t,
                track_id: TrackId {
                    step: 0,
                    index: i as u32,
                },
                class: obj.class.clone(),
                x: state[0],
                y: state[1],
                z: obj.z,
                vx: speed * heading.cos(),
                vy: speed * heading.sin(),
                yaw: heading,
                length: obj.size[0],
                width: obj.size[1],
                height: obj.size[2],
                score: 1.0,
            });
            let noise: [f64; 5] = std::array::from_fn(|k| {
                let n: f64 = StandardNormal.sample(&mut rng);
                n * config.noise_std[k]
            });
            let score = uniform(&mut rng, config.true_score[0], config.true_score[1]);
            let keep = rng.gen_bool(config.p_d);
            if keep {
                detections.push((
                    frame,
                    t,
                    Detection {
                        pos: Vector2::new(state[0] + noise[0], state[1] + noise[1]),
                        vel: Vector2::new(
                            speed * heading.cos() + noise[2],
                            speed * heading.sin() + noise[3],
                        ),
                        yaw: heading + noise[4],
                        aux: AuxState {
                            length: obj.size[0],
                            width: obj.size[1],
                            height: obj.size[2],
                            z: obj.z,
                        },
                        class: obj.class.clone(),
                        score,
                        lidar_pts: None,
                    },
                ));
            }
        }
        let clutter_count = if config.clutter_rate > 0.0 {
            let poisson = Poisson::new(config.clutter_rate)
                .map_err(|_| Error::InvalidConfig("clutter_rate is not a valid rate".into()))?;
            poisson.sample(&mut rng) as u64
        } else {
            0
        };
        for _ in 0..clutter_count {
            let x = uniform(&mut rng, config.region.x_min, config.region.x_max);
            let y = uniform(&mut rng, config.region.y_min, config.region.y_max);
            let vx = uniform(&mut rng, -config.clutter_speed, config.clutter_speed);
            let vy = uniform(&mut rng, -config.clutter_speed, config.clutter_speed);
            let yaw = uniform(&mut rng, -std::f64::consts::PI, std::f64::consts::PI);
            let score = uniform(&mut rng, config.clutter_score[0], config.clutter_score[1]);
            detections.push((
                frame,
                t,
                Detection {
                    pos: Vector2::new(x, y),
                    vel: Vector2::new(vx, vy),
                    yaw,
                    aux: AuxState {
                        length: config.clutter_size[0],
                        width: config.clutter_size[1],
                        height: config.clutter_size[2],
                        z: config.clutter_z,
                    },
                    class: config.clutter_class.clone(),
                    score,
                    lidar_pts: None,
                },
            ));
        }
    }
    Ok((truth, detections))
}
