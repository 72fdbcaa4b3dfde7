//! Track bookkeeping after the global assignment: selecting the winning
//! hypothesis per object, pruning negligible components, maintaining the
//! lightweight per-track state, and extracting confirmed tracks.

use serde::{Deserialize, Serialize};

use crate::association::GlobalHypothesis;
use crate::config::RunConfig;
use crate::density::{
    AuxState, BernoulliComponent, PmbPosterior, PoissonComponent, TrackId, STATE_PHI,
};
use crate::error::Result;
use crate::filter::{Detection, HypKind, LocalHypothesis};

/// Keeps the hypothesis the assignment selected for every existing object
/// (detection if a measurement chose its column, misdetection otherwise)
/// and for every first-detection column, dropping components whose
/// existence fell below the floor. Clutter-flagged newborns carry
/// existence 0 and vanish here. Output order: existing objects ascending,
/// then new objects in measurement order, each paired with the measurement
/// it consumed.
pub fn prune_bernoulli(
    hyps: &[LocalHypothesis],
    global: &GlobalHypothesis,
    n_objects: usize,
    floor: f64,
) -> Vec<(BernoulliComponent, Option<usize>)> {
    let mut object_meas = vec![None; n_objects];
    for (m, &col) in global.assignment.iter().enumerate() {
        if col < n_objects {
            object_meas[col] = Some(m);
        }
    }
    let mut out = Vec::new();
    for (j, &meas) in object_meas.iter().enumerate() {
        let chosen = match meas {
            Some(m) => hyps.iter().find(|h| {
                h.kind == HypKind::Detection
                    && h.object_index == Some(j)
                    && h.measurement_index == Some(m)
            }),
            None => hyps
                .iter()
                .find(|h| h.kind == HypKind::Misdetection && h.object_index == Some(j)),
        };
        let hyp = chosen.expect("a hypothesis exists for every selected object column");
        if hyp.component.existence >= floor {
            out.push((hyp.component.clone(), meas));
        }
    }
    for (m, &col) in global.assignment.iter().enumerate() {
        if col >= n_objects {
            let hyp = hyps
                .iter()
                .find(|h| h.kind == HypKind::FirstDetection && h.measurement_index == Some(m))
                .expect("a first-detection hypothesis exists for every measurement");
            if hyp.component.existence >= floor {
                out.push((hyp.component.clone(), Some(m)));
            }
        }
    }
    out
}

/// Removes undetected-intensity components that were absorbed into a
/// first-detection hypothesis (marked) or that outlived their class's
/// step budget. A component exactly at the budget survives.
pub fn prune_ppp(
    poisson: Vec<PoissonComponent>,
    config: &RunConfig,
) -> Result<Vec<PoissonComponent>> {
    let mut out = Vec::with_capacity(poisson.len());
    for c in poisson {
        let eta_step = config.class(&c.class)?.eta_step;
        if !c.marked && c.age <= eta_step {
            out.push(c);
        }
    }
    Ok(out)
}

/// Per-step maintenance of the fields the Gaussian recursion does not
/// touch. Track length always grows. An associated detection resets the
/// miss counter, refreshes the score with a length-based ramp, and blends
/// the box extent by detector confidence; the first detection of a track
/// adopts the measured extent outright. A miss zeroes the score.
pub fn lightweight_update(bern: &mut BernoulliComponent, assoc: Option<&Detection>) {
    bern.track_len += 1;
    match assoc {
        Some(det) => {
            if bern.track_len == 1 {
                bern.aux = det.aux;
            } else {
                let s = det.score;
                bern.aux = AuxState {
                    length: (1.0 - s) * bern.aux.length + s * det.aux.length,
                    width: (1.0 - s) * bern.aux.width + s * det.aux.width,
                    height: (1.0 - s) * bern.aux.height + s * det.aux.height,
                    z: (1.0 - s) * bern.aux.z + s * det.aux.z,
                };
            }
            bern.miss_count = 0;
            bern.score = (1.0 - (-(bern.track_len as f64)).exp()) * det.score;
        }
        None => {
            bern.miss_count += 1;
            bern.score = 0.0;
        }
    }
}

/// One confirmed track state at one frame, in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub frame: u64,
    pub t: f64,
    pub track_id: TrackId,
    pub class: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub score: f64,
}

impl TrackRecord {
    fn from_component(bern: &BernoulliComponent, frame: u64, t: f64) -> Self {
        let mean = &bern.density.mean;
        let speed = mean[2];
        let heading = mean[STATE_PHI];
        TrackRecord {
            frame,
            t,
            track_id: bern.fixed.track_id,
            class: bern.fixed.class.clone(),
            x: mean[0],
            y: mean[1],
            z: bern.aux.z,
            vx: speed * heading.cos(),
            vy: speed * heading.sin(),
            yaw: heading,
            length: bern.aux.length,
            width: bern.aux.width,
            height: bern.aux.height,
            score: bern.score,
        }
    }
}

/// Emits confirmed tracks for this frame. A track never extracted before
/// confirms once its existence reaches the entry threshold; a previously
/// extracted track keeps reporting while its existence holds the
/// maintenance threshold and its miss streak stays under the class cap.
/// Extraction history persists for the life of the run.
pub fn extract_tracks(
    posterior: &mut PmbPosterior,
    config: &RunConfig,
    frame: u64,
    t: f64,
) -> Result<Vec<TrackRecord>> {
    let mut records = Vec::new();
    let mut newly_extracted: Vec<TrackId> = Vec::new();
    for bern in &posterior.bernoulli {
        let params = config.class(&bern.fixed.class)?;
        let known = posterior.extracted_ids.contains(&bern.fixed.track_id);
        let confirmed = if known {
            bern.existence >= params.eta_ext2 && bern.miss_count < params.eta_cnt
        } else {
            bern.existence >= params.eta_ext1
        };
        if confirmed {
            if !known {
                newly_extracted.push(bern.fixed.track_id);
            }
            records.push(TrackRecord::from_component(bern, frame, t));
        }
    }
    posterior.extracted_ids.extend(newly_extracted);
    Ok(records)
}
