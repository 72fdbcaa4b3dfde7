//! Tracking quality metrics: per-frame optimal matching with match
//! persistence, the classic accuracy and precision summary, and a
//! recall-averaged accuracy sweep over confidence thresholds.

use std::collections::BTreeMap;

use crate::association::{solve_assignment, CostMatrix};
use crate::density::TrackId;
use crate::tracks::TrackRecord;

/// Center-distance similarity: 1 at zero distance, linearly down to 0 at
/// the cutoff `d0`.
pub fn similarity(distance: f64, d0: f64) -> f64 {
    (1.0 - distance / d0).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearMetrics {
    pub mota: f64,
    /// Mean matched center distance; 0 when nothing matched.
    pub motp: f64,
    pub tp: u64,
    pub fp: u64,
    pub misses: u64,
    pub id_switches: u64,
    pub gt_count: u64,
}

/// Cost of leaving a truth box unmatched; any real match within the
/// cutoff is cheaper, so matches are maximized first, distance second.
const UNMATCH_COST: f64 = 1e6;

fn by_frame(records: &[TrackRecord]) -> BTreeMap<u64, Vec<&TrackRecord>> {
    let mut map: BTreeMap<u64, Vec<&TrackRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.frame).or_default().push(r);
    }
    map
}

fn distance(a: &TrackRecord, b: &TrackRecord) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

/// Classic multi-object tracking accuracy over center distance. Matches
/// persist from frame to frame while they stay within `d0`; the remainder
/// is matched per frame by minimum total distance. An identity switch is
/// counted when a truth object's matched track differs from the track it
/// was matched to the last time it was matched at all.
pub fn clear_metrics(truth: &[TrackRecord], tracks: &[TrackRecord], d0: f64) -> ClearMetrics {
    let truth_frames = by_frame(truth);
    let track_frames = by_frame(tracks);
    let mut frames: Vec<u64> = truth_frames
        .keys()
        .chain(track_frames.keys())
        .copied()
        .collect();
    frames.sort_unstable();
    frames.dedup();

    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut misses = 0u64;
    let mut id_switches = 0u64;
    let mut total_distance = 0.0;
    let mut last_match: BTreeMap<TrackId, TrackId> = BTreeMap::new();
    let empty: Vec<&TrackRecord> = Vec::new();

    for frame in frames {
        let gts = truth_frames.get(&frame).unwrap_or(&empty);
        let trks = track_frames.get(&frame).unwrap_or(&empty);
        let mut gt_taken = vec![false; gts.len()];
        let mut trk_taken = vec![false; trks.len()];
        let mut matches: Vec<(usize, usize)> = Vec::new();

        // Persist surviving matches from earlier frames.
        for (gi, gt) in gts.iter().enumerate() {
            let Some(&prev) = last_match.get(&gt.track_id) else {
                continue;
            };
            let Some(ti) = trks.iter().position(|t| t.track_id == prev) else {
                continue;
            };
            if !trk_taken[ti] && distance(gt, trks[ti]) <= d0 {
                gt_taken[gi] = true;
                trk_taken[ti] = true;
                matches.push((gi, ti));
            }
        }

        // Optimal assignment for the rest, with an unmatch column per
        // truth box so the instance is always feasible.
        let free_gts: Vec<usize> = (0..gts.len()).filter(|&g| !gt_taken[g]).collect();
        let free_trks: Vec<usize> = (0..trks.len()).filter(|&t| !trk_taken[t]).collect();
        if !free_gts.is_empty() {
            let rows = free_gts.len();
            let cols = free_trks.len() + rows;
            let mut costs = CostMatrix::infinite(rows, cols);
            for (r, &gi) in free_gts.iter().enumerate() {
                for (c, &ti) in free_trks.iter().enumerate() {
                    let d = distance(gts[gi], trks[ti]);
                    if d <= d0 {
                        costs.set(r, c, d);
                    }
                }
                costs.set(r, free_trks.len() + r, UNMATCH_COST);
            }
            let solution = solve_assignment(&costs).expect("unmatch columns keep this feasible");
            for (r, &col) in solution.assignment.iter().enumerate() {
                if col < free_trks.len() {
                    matches.push((free_gts[r], free_trks[col]));
                    trk_taken[free_trks[col]] = true;
                }
            }
        }

        tp += matches.len() as u64;
        misses += (gts.len() - matches.len()) as u64;
        fp += trk_taken.iter().filter(|taken| !**taken).count() as u64;
        for (gi, ti) in matches {
            total_distance += distance(gts[gi], trks[ti]);
            let gt_id = gts[gi].track_id;
            let trk_id = trks[ti].track_id;
            if let Some(&prev) = last_match.get(&gt_id) {
                if prev != trk_id {
                    id_switches += 1;
                }
            }
            last_match.insert(gt_id, trk_id);
        }
    }

    let gt_count = truth.len() as u64;
    let mota = if gt_count == 0 {
        if fp + id_switches == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - (misses + fp + id_switches) as f64 / gt_count as f64
    };
    let motp = if tp == 0 {
        0.0
    } else {
        total_distance / tp as f64
    };
    ClearMetrics {
        mota,
        motp,
        tp,
        fp,
        misses,
        id_switches,
        gt_count,
    }
}

/// Accuracy averaged over recall targets. For each target the confidence
/// threshold is lowered until the kept tracks reach that recall, the
/// summary is computed there, and the miss shortfall unavoidable at that
/// recall is forgiven; targets beyond the best achievable recall score 0.
pub fn amota(truth: &[TrackRecord], tracks: &[TrackRecord], d0: f64, recall_steps: u32) -> f64 {
    assert!(recall_steps > 0);
    if truth.is_empty() {
        return 0.0;
    }
    let gt = truth.len() as f64;
    // Distinct confidence thresholds, descending. Recall can only grow as
    // the threshold drops, so a binary search per target suffices.
    let mut thresholds: Vec<f64> = tracks
        .iter()
        .map(|r| r.score)
        .filter(|s| s.is_finite())
        .collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
    thresholds.dedup();
    if thresholds.is_empty() {
        return 0.0;
    }
    let mut memo: BTreeMap<usize, ClearMetrics> = BTreeMap::new();
    let mut eval = |i: usize, tracks: &[TrackRecord]| -> ClearMetrics {
        if let Some(&m) = memo.get(&i) {
            return m;
        }
        let kept: Vec<TrackRecord> = tracks
            .iter()
            .filter(|r| r.score >= thresholds[i])
            .cloned()
            .collect();
        let m = clear_metrics(truth, &kept, d0);
        memo.insert(i, m);
        m
    };
    let mut total = 0.0;
    for step in 1..=recall_steps {
        let target = step as f64 / recall_steps as f64;
        // Smallest threshold index whose recall reaches the target.
        let mut lo = 0usize;
        let mut hi = thresholds.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            let recall = eval(mid, tracks).tp as f64 / gt;
            if recall >= target {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        if lo == thresholds.len() {
            continue;
        }
        let m = eval(lo, tracks);
        let errors = (m.id_switches + m.fp + m.misses) as f64 - (1.0 - target) * gt;
        total += (1.0 - errors / (target * gt)).clamp(0.0, 1.0);
    }
    total / recall_steps as f64
}
