//! The per-frame tracking recursion: preprocessing, prediction, hypothesis
//! generation, optimal global assignment, pruning, and track extraction.

use crate::association::{build_cost_matrix, solve_assignment};
use crate::config::RunConfig;
use crate::density::{PmbPosterior, TrackId};
use crate::error::{Error, Result};
use crate::filter::{
    association_probability, clutter_intensity, entity_pd, gate_measurement, gate_object,
    habm_birth_intensity, habm_unused, hyp_detection, hyp_first_detection_ppp, hyp_misdetection,
    ppp_update, predict, Detection, LocalHypothesis,
};
use crate::preprocess::preprocess;
use crate::tracks::{extract_tracks, lightweight_update, prune_bernoulli, prune_ppp, TrackRecord};

/// Stateful multi-object tracker. Feed frames in time order through
/// [`Tracker::step`]; each call returns the tracks confirmed at that frame.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: RunConfig,
    posterior: PmbPosterior,
    last_t: Option<f64>,
    /// Count of processed frames; stamps new track identities so they stay
    /// unique regardless of the caller's frame numbering.
    step_count: u64,
}

impl Tracker {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        Ok(Tracker {
            config,
            posterior: PmbPosterior::empty(),
            last_t: None,
            step_count: 0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn posterior(&self) -> &PmbPosterior {
        &self.posterior
    }

    /// Processes one frame of detections and returns the confirmed tracks.
    /// Timestamps must increase strictly; the first frame predicts over
    /// the configured fallback horizon.
    pub fn step(
        &mut self,
        frame: u64,
        t: f64,
        detections: &[Detection],
    ) -> Result<Vec<TrackRecord>> {
        let dt = match self.last_t {
            Some(prev) => {
                if t <= prev {
                    return Err(Error::NonMonotoneTime { frame, t, prev });
                }
                t - prev
            }
            None => self.config.fallback_dt,
        };
        let dets = preprocess(detections, &self.config)?;
        let mut posterior = predict(&self.posterior, dt, &self.config)?;
        let n_objects = posterior.bernoulli.len();
        let n_meas = dets.len();

        // Local hypotheses for existing objects: the misdetection baseline
        // plus one detection hypothesis per gated measurement.
        let mut hyps: Vec<LocalHypothesis> = Vec::new();
        for (j, bern) in posterior.bernoulli.iter().enumerate() {
            let params = self.config.class(&bern.fixed.class)?;
            let p_d = entity_pd(&bern.density.position(), &bern.fixed.class, &dets, params);
            hyps.push(hyp_misdetection(bern, p_d, j));
            for m in gate_object(bern, &dets, params.eta_dist) {
                hyps.push(hyp_detection(
                    bern,
                    &dets[m],
                    m,
                    j,
                    p_d,
                    params,
                    &self.config.ut,
                )?);
            }
        }

        // Detection probability of each undetected-intensity component,
        // shared by the first-detection hypotheses and the intensity update.
        let mut ppp_pds = Vec::with_capacity(posterior.poisson.len());
        for c in &posterior.poisson {
            let params = self.config.class(&c.class)?;
            ppp_pds.push(entity_pd(&c.density.position(), &c.class, &dets, params));
        }

        // One first-detection hypothesis per measurement: through the gated
        // intensity components when any exist, through the hybrid birth
        // model otherwise. Low-score uncovered measurements also seed new
        // intensity mass.
        let mut marks: Vec<usize> = Vec::new();
        let mut low_score: Vec<(usize, f64)> = Vec::new();
        for (m, det) in dets.iter().enumerate() {
            let params = self.config.class(&det.class)?;
            let lambda_c = clutter_intensity(params, &self.config.region);
            let id = TrackId {
                step: self.step_count,
                index: m as u32,
            };
            let gated = gate_measurement(det, &posterior.poisson, params.eta_dist);
            if gated.is_empty() {
                let p_a = association_probability(det, &posterior.bernoulli, params)?;
                hyps.push(habm_unused(
                    det,
                    p_a,
                    m,
                    lambda_c,
                    id,
                    params,
                    &self.config.region,
                ));
                if det.score < params.eta_score {
                    low_score.push((m, p_a));
                }
            } else {
                let pds: Vec<f64> = gated.iter().map(|&j| ppp_pds[j]).collect();
                let (hyp, marked) = hyp_first_detection_ppp(
                    &posterior.poisson,
                    &gated,
                    &pds,
                    det,
                    m,
                    lambda_c,
                    id,
                    params,
                    &self.config.ut,
                )?;
                hyps.push(hyp);
                marks.extend(marked);
            }
        }

        let low: Vec<(&Detection, f64)> =
            low_score.iter().map(|&(m, p_a)| (&dets[m], p_a)).collect();
        let birth = habm_birth_intensity(&low, &self.config)?;
        for j in marks {
            posterior.poisson[j].marked = true;
        }
        let poisson = ppp_update(std::mem::take(&mut posterior.poisson), &ppp_pds, birth);

        // Every measurement row keeps a finite first-detection column, so
        // the assignment is always feasible.
        let matrix = build_cost_matrix(&hyps, n_meas, n_objects);
        let global = solve_assignment(&matrix)?;
        let selected = prune_bernoulli(&hyps, &global, n_objects, self.config.existence_floor);
        let mut bernoulli = Vec::with_capacity(selected.len());
        for (mut bern, assoc) in selected {
            lightweight_update(&mut bern, assoc.map(|m| &dets[m]));
            bernoulli.push(bern);
        }
        let poisson = prune_ppp(poisson, &self.config)?;

        self.posterior = PmbPosterior {
            poisson,
            bernoulli,
            extracted_ids: std::mem::take(&mut posterior.extracted_ids),
        };
        self.last_t = Some(t);
        self.step_count += 1;
        extract_tracks(&mut self.posterior, &self.config, frame, t)
    }
}
