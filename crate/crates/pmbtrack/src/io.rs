//! Text formats for detections and tracks, and the file-to-file tracking
//! entry point.
//!
//! Both formats are comma-separated with one record per line. Blank lines
//! and lines starting with `#` are skipped. Floats are written in Rust's
//! shortest round-trip form except confidence scores, which use full
//! scientific notation; reloading a written file reproduces the values
//! bit for bit either way.
//!
//! Detection line: `frame,t,class,x,y,z,vx,vy,yaw,l,w,h,score,num_pts`
//! with `num_pts = -1` when the detector reports no point count.
//! Track line: `frame,t,track_id,class,x,y,z,vx,vy,yaw,l,w,h,score`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::Vector2;

use crate::config::RunConfig;
use crate::density::{AuxState, TrackId};
use crate::error::{Error, Result};
use crate::filter::Detection;
use crate::tracker::Tracker;
use crate::tracks::TrackRecord;

/// All detections sharing one frame and timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBundle {
    pub frame: u64,
    pub t: f64,
    pub detections: Vec<Detection>,
}

struct LineParser<'a> {
    path: &'a Path,
    line: usize,
    fields: Vec<&'a str>,
    cursor: usize,
}

impl<'a> LineParser<'a> {
    fn new(path: &'a Path, line: usize, text: &'a str, expected: usize) -> Result<Self> {
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != expected {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line,
                msg: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        Ok(LineParser {
            path,
            line,
            fields,
            cursor: 0,
        })
    }

    fn fail(&self, msg: String) -> Error {
        Error::Parse {
            path: self.path.display().to_string(),
            line: self.line,
            msg,
        }
    }

    fn next<T: std::str::FromStr>(&mut self, name: &str) -> Result<T> {
        let raw = self.fields[self.cursor];
        self.cursor += 1;
        raw.parse()
            .map_err(|_| self.fail(format!("invalid {name}: {raw:?}")))
    }
}

/// Loads a detection file, grouping consecutive lines by frame. Frames
/// must appear in strictly ascending order, timestamps must be constant
/// within a frame and strictly increasing across frames, and scores must
/// lie in (0, 1]. Every class must exist in the configuration.
pub fn load_detections(path: &Path, config: &RunConfig) -> Result<Vec<FrameBundle>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut bundles: Vec<FrameBundle> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let mut p = LineParser::new(path, line, raw, 14)?;
        let frame: u64 = p.next("frame")?;
        let t: f64 = p.next("t")?;
        let class: String = p.next("class")?;
        let x: f64 = p.next("x")?;
        let y: f64 = p.next("y")?;
        let z: f64 = p.next("z")?;
        let vx: f64 = p.next("vx")?;
        let vy: f64 = p.next("vy")?;
        let yaw: f64 = p.next("yaw")?;
        let length: f64 = p.next("l")?;
        let width: f64 = p.next("w")?;
        let height: f64 = p.next("h")?;
        let score: f64 = p.next("score")?;
        let num_pts: i64 = p.next("num_pts")?;
        if config.class(&class).is_err() {
            return Err(p.fail(format!("unknown class {class:?}")));
        }
        if !(score > 0.0 && score <= 1.0) {
            return Err(p.fail(format!("score must lie in (0, 1], found {score}")));
        }
        let lidar_pts = match num_pts {
            -1 => None,
            n if n >= 0 => Some(n as u64),
            n => return Err(p.fail(format!("num_pts must be -1 or nonnegative, found {n}"))),
        };
        let det = Detection {
            pos: Vector2::new(x, y),
            vel: Vector2::new(vx, vy),
            yaw,
            aux: AuxState {
                length,
                width,
                height,
                z,
            },
            class,
            score,
            lidar_pts,
        };
        match bundles.last_mut() {
            Some(bundle) if bundle.frame == frame => {
                if bundle.t != t {
                    return Err(p.fail(format!(
                        "timestamp {t} differs from {} earlier in frame {frame}",
                        bundle.t
                    )));
                }
                bundle.detections.push(det);
            }
            Some(bundle) if bundle.frame > frame => {
                return Err(p.fail(format!(
                    "frame {frame} appears after frame {}; frames must ascend",
                    bundle.frame
                )));
            }
            last => {
                if let Some(bundle) = last {
                    if t <= bundle.t {
                        return Err(
                            p.fail(format!("timestamp {t} does not increase past {}", bundle.t))
                        );
                    }
                }
                bundles.push(FrameBundle {
                    frame,
                    t,
                    detections: vec![det],
                });
            }
        }
    }
    Ok(bundles)
}

pub fn write_detections(path: &Path, bundles: &[FrameBundle]) -> Result<()> {
    let mut out = String::from("# frame,t,class,x,y,z,vx,vy,yaw,l,w,h,score,num_pts\n");
    for bundle in bundles {
        for d in &bundle.detections {
            let pts = d.lidar_pts.map_or(-1i64, |p| p as i64);
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{:.16e},{}",
                bundle.frame,
                bundle.t,
                d.class,
                d.pos.x,
                d.pos.y,
                d.aux.z,
                d.vel.x,
                d.vel.y,
                d.yaw,
                d.aux.length,
                d.aux.width,
                d.aux.height,
                d.score,
                pts
            )
            .expect("writing to a string cannot fail");
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_tracks(path: &Path, records: &[TrackRecord]) -> Result<()> {
    let mut out = String::from("# frame,t,track_id,class,x,y,z,vx,vy,yaw,l,w,h,score\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{:.16e}",
            r.frame,
            r.t,
            r.track_id,
            r.class,
            r.x,
            r.y,
            r.z,
            r.vx,
            r.vy,
            r.yaw,
            r.length,
            r.width,
            r.height,
            r.score
        )
        .expect("writing to a string cannot fail");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_tracks(path: &Path) -> Result<Vec<TrackRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let mut p = LineParser::new(path, line, raw, 14)?;
        let frame: u64 = p.next("frame")?;
        let t: f64 = p.next("t")?;
        let track_id: TrackId = p.next("track_id")?;
        let class: String = p.next("class")?;
        let x: f64 = p.next("x")?;
        let y: f64 = p.next("y")?;
        let z: f64 = p.next("z")?;
        let vx: f64 = p.next("vx")?;
        let vy: f64 = p.next("vy")?;
        let yaw: f64 = p.next("yaw")?;
        let length: f64 = p.next("l")?;
        let width: f64 = p.next("w")?;
        let height: f64 = p.next("h")?;
        let score: f64 = p.next("score")?;
        records.push(TrackRecord {
            frame,
            t,
            track_id,
            class,
            x,
            y,
            z,
            vx,
            vy,
            yaw,
            length,
            width,
            height,
            score,
        });
    }
    Ok(records)
}

/// Groups a time-ordered detection stream into per-frame bundles. Frames
/// without detections simply do not appear.
pub fn group_detections(stream: &[(u64, f64, Detection)]) -> Vec<FrameBundle> {
    let mut bundles: Vec<FrameBundle> = Vec::new();
    for (frame, t, det) in stream {
        match bundles.last_mut() {
            Some(bundle) if bundle.frame == *frame => bundle.detections.push(det.clone()),
            _ => bundles.push(FrameBundle {
                frame: *frame,
                t: *t,
                detections: vec![det.clone()],
            }),
        }
    }
    bundles
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub frames: u64,
    pub tracks_emitted: u64,
    pub unique_track_ids: u64,
    pub wall: Duration,
}

/// Runs the tracker over a detection file and writes the resulting track
/// file.
pub fn run_tracker(config: &RunConfig, input: &Path, output: &Path) -> Result<RunSummary> {
    let start = Instant::now();
    let bundles = load_detections(input, config)?;
    let mut tracker = Tracker::new(config.clone())?;
    let mut records = Vec::new();
    let mut frames = 0u64;
    for bundle in &bundles {
        records.extend(tracker.step(bundle.frame, bundle.t, &bundle.detections)?);
        frames += 1;
    }
    write_tracks(output, &records)?;
    let unique: std::collections::BTreeSet<TrackId> = records.iter().map(|r| r.track_id).collect();
    Ok(RunSummary {
        frames,
        tracks_emitted: records.len() as u64,
        unique_track_ids: unique.len() as u64,
        wall: start.elapsed(),
    })
}
