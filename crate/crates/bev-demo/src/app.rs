//! Demo logic shared between the wasm bindings and host tests: runs the
//! desk scenario through the tracker and shapes the results for a canvas.
//!
//! Everything here is plain Rust so the host test suite exercises the same
//! code the browser calls; the wasm layer only converts types.

use pmbtrack::config::RunConfig;
use pmbtrack::filter::Detection;
use pmbtrack::io::{group_detections, FrameBundle};
use pmbtrack::metrics::clear_metrics;
use pmbtrack::sim::{desk_scenario, simulate, ScenarioConfig};
use pmbtrack::tracker::Tracker;
use pmbtrack::tracks::TrackRecord;
use serde::Serialize;

/// One oriented box in the ground plane, ready to draw.
#[derive(Debug, Clone, Serialize)]
pub struct SceneBox {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub length: f64,
    pub width: f64,
    /// Track identity for coloring; absent for raw detections.
    pub id: Option<String>,
    pub score: f64,
}

/// Everything visible in a single frame.
#[derive(Debug, Clone, Serialize)]
pub struct SceneFrame {
    pub frame: u64,
    pub t: f64,
    pub truth: Vec<SceneBox>,
    pub detections: Vec<SceneBox>,
    pub tracks: Vec<SceneBox>,
}

/// Bounds of the drawing area, taken from the scenario region.
#[derive(Debug, Clone, Serialize)]
pub struct SceneInfo {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub frames: u64,
    pub dt: f64,
}

fn record_box(r: &TrackRecord, with_id: bool) -> SceneBox {
    SceneBox {
        x: r.x,
        y: r.y,
        yaw: r.yaw,
        length: r.length,
        width: r.width,
        id: with_id.then(|| r.track_id.to_string()),
        score: r.score,
    }
}

fn detection_box(d: &Detection) -> SceneBox {
    SceneBox {
        x: d.pos.x,
        y: d.pos.y,
        yaw: d.yaw,
        length: d.aux.length,
        width: d.aux.width,
        id: None,
        score: d.score,
    }
}

/// The desk scenario with the two knobs the page exposes applied.
fn scenario_with(p_d: f64, clutter_rate: f64) -> ScenarioConfig {
    let mut scenario = desk_scenario();
    scenario.p_d = p_d.clamp(0.0, 1.0);
    scenario.clutter_rate = clutter_rate.max(0.0);
    scenario
}

fn config_for(scenario: &ScenarioConfig) -> RunConfig {
    let mut config = RunConfig::default_tuned();
    config.region = scenario.region;
    config
}

/// A scenario played one frame at a time, holding the tracker between
/// calls so the page can step interactively.
pub struct StepSession {
    truth: Vec<TrackRecord>,
    bundles: Vec<FrameBundle>,
    tracker: Tracker,
    cursor: usize,
}

impl StepSession {
    pub fn new(seed: u64, p_d: f64, clutter_rate: f64) -> Result<StepSession, String> {
        let scenario = scenario_with(p_d, clutter_rate);
        let (truth, stream) = simulate(&scenario, seed).map_err(|e| e.to_string())?;
        let tracker = Tracker::new(config_for(&scenario)).map_err(|e| e.to_string())?;
        Ok(StepSession {
            truth,
            bundles: group_detections(&stream),
            tracker,
            cursor: 0,
        })
    }

    pub fn info(&self) -> SceneInfo {
        let scenario = desk_scenario();
        SceneInfo {
            x_min: scenario.region.x_min,
            x_max: scenario.region.x_max,
            y_min: scenario.region.y_min,
            y_max: scenario.region.y_max,
            frames: self.bundles.len() as u64,
            dt: scenario.dt,
        }
    }

    /// Advance one frame; `None` once the scenario is exhausted.
    pub fn step(&mut self) -> Result<Option<SceneFrame>, String> {
        let Some(bundle) = self.bundles.get(self.cursor) else {
            return Ok(None);
        };
        self.cursor += 1;
        let records = self
            .tracker
            .step(bundle.frame, bundle.t, &bundle.detections)
            .map_err(|e| e.to_string())?;
        Ok(Some(SceneFrame {
            frame: bundle.frame,
            t: bundle.t,
            truth: self
                .truth
                .iter()
                .filter(|r| r.frame == bundle.frame)
                .map(|r| record_box(r, true))
                .collect(),
            detections: bundle.detections.iter().map(detection_box).collect(),
            tracks: records.iter().map(|r| record_box(r, true)).collect(),
        }))
    }
}

/// Full playback: every frame of a seeded run, for the animation loop.
pub fn run_scenario(seed: u64, p_d: f64, clutter_rate: f64) -> Result<Vec<SceneFrame>, String> {
    let mut session = StepSession::new(seed, p_d, clutter_rate)?;
    let mut frames = Vec::new();
    while let Some(frame) = session.step()? {
        frames.push(frame);
    }
    Ok(frames)
}

/// MOTA over the desk scenario for each miss-tolerance setting, with the
/// other knobs at the page's current values.
pub fn sweep_miss_limit(
    seed: u64,
    p_d: f64,
    clutter_rate: f64,
    limits: &[u32],
) -> Result<Vec<(u32, f64)>, String> {
    let scenario = scenario_with(p_d, clutter_rate);
    let (truth, stream) = simulate(&scenario, seed).map_err(|e| e.to_string())?;
    let bundles = group_detections(&stream);
    let mut out = Vec::new();
    for &limit in limits {
        if limit == 0 {
            return Err("miss tolerance must be at least 1".into());
        }
        let mut config = config_for(&scenario);
        for params in config.classes.values_mut() {
            params.eta_cnt = limit;
        }
        let mut tracker = Tracker::new(config).map_err(|e| e.to_string())?;
        let mut records = Vec::new();
        for bundle in &bundles {
            records.extend(
                tracker
                    .step(bundle.frame, bundle.t, &bundle.detections)
                    .map_err(|e| e.to_string())?,
            );
        }
        out.push((limit, clear_metrics(&truth, &records, 2.0).mota));
    }
    Ok(out)
}
