//! Detection preprocessing: a per-class confidence floor followed by
//! non-maximum suppression on bird's-eye-view box overlap.

use nalgebra::Vector2;

use crate::config::RunConfig;
use crate::error::Result;
use crate::filter::Detection;

/// An oriented rectangle in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BevBox {
    pub cx: f64,
    pub cy: f64,
    pub yaw: f64,
    pub length: f64,
    pub width: f64,
}

impl BevBox {
    pub fn from_detection(det: &Detection) -> Self {
        BevBox {
            cx: det.pos.x,
            cy: det.pos.y,
            yaw: det.yaw,
            length: det.aux.length,
            width: det.aux.width,
        }
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    /// Corner points in counterclockwise order.
    pub fn corners(&self) -> [Vector2<f64>; 4] {
        let (s, c) = self.yaw.sin_cos();
        let hl = self.length / 2.0;
        let hw = self.width / 2.0;
        let center = Vector2::new(self.cx, self.cy);
        [
            center + Vector2::new(c * hl - s * hw, s * hl + c * hw),
            center + Vector2::new(-c * hl - s * hw, -s * hl + c * hw),
            center + Vector2::new(-c * hl + s * hw, -s * hl - c * hw),
            center + Vector2::new(c * hl + s * hw, s * hl - c * hw),
        ]
    }

    /// Whether the point falls inside the box (boundary inclusive).
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        let (s, c) = self.yaw.sin_cos();
        let dx = p.x - self.cx;
        let dy = p.y - self.cy;
        let along = c * dx + s * dy;
        let across = -s * dx + c * dy;
        along.abs() <= self.length / 2.0 && across.abs() <= self.width / 2.0
    }
}

fn polygon_area(poly: &[Vector2<f64>]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        twice += p.x * q.y - p.y * q.x;
    }
    twice.abs() / 2.0
}

/// Area of the intersection of two convex counterclockwise polygons,
/// clipping the first against each edge of the second.
fn convex_intersection_area(subject: &[Vector2<f64>], clip: &[Vector2<f64>]) -> f64 {
    let mut poly: Vec<Vector2<f64>> = subject.to_vec();
    for i in 0..clip.len() {
        if poly.is_empty() {
            return 0.0;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let side = |p: &Vector2<f64>| (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        let mut clipped = Vec::with_capacity(poly.len() + 1);
        for j in 0..poly.len() {
            let cur = poly[j];
            let prev = poly[(j + poly.len() - 1) % poly.len()];
            let d_cur = side(&cur);
            let d_prev = side(&prev);
            if (d_cur >= 0.0) != (d_prev >= 0.0) {
                let t = d_prev / (d_prev - d_cur);
                clipped.push(prev + (cur - prev) * t);
            }
            if d_cur >= 0.0 {
                clipped.push(cur);
            }
        }
        poly = clipped;
    }
    polygon_area(&poly)
}

/// Intersection over union of two oriented boxes. Boxes of zero area
/// overlap nothing.
pub fn bev_iou(a: &BevBox, b: &BevBox) -> f64 {
    let inter = convex_intersection_area(&a.corners(), &b.corners());
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Drops detections under their class confidence floor, then suppresses
/// same-class detections whose box overlap with a higher-confidence kept
/// detection exceeds the class threshold. Surviving detections keep their
/// input order, which makes the operation idempotent.
pub fn preprocess(dets: &[Detection], config: &RunConfig) -> Result<Vec<Detection>> {
    let mut candidates: Vec<usize> = Vec::with_capacity(dets.len());
    for (i, det) in dets.iter().enumerate() {
        if det.score >= config.class(&det.class)?.eta_sf {
            candidates.push(i);
        }
    }
    // Greedy suppression in confidence order; earlier input index wins
    // ties so the result is deterministic.
    let mut order = candidates.clone();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .expect("scores are ordered")
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::with_capacity(order.len());
    for &i in &order {
        let candidate = &dets[i];
        let eta_iou = config.class(&candidate.class)?.eta_iou;
        let candidate_box = BevBox::from_detection(candidate);
        let suppressed = kept.iter().any(|&k| {
            dets[k].class == candidate.class
                && bev_iou(&candidate_box, &BevBox::from_detection(&dets[k])) > eta_iou
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    Ok(kept.into_iter().map(|i| dets[i].clone()).collect())
}
