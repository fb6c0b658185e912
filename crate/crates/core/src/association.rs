//! Cost construction and track/detection matching.

use crate::assignment::{solve_assignment, CostMatrix, INFEASIBLE};
use crate::kalman::{KalmanModel, CHI2_95_4DOF};
use crate::model::{BoundingBox, Detection, TrackerConfig};
use crate::track::{measurement, Track};

/// Intersection over union; boxes with non-positive size count as empty.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.right().min(b.right()) - a.left.max(b.left)).max(0.0);
    let h = (a.bottom().min(b.bottom()) - a.top.max(b.top)).max(0.0);
    let inter = w * h;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 - dot).clamp(0.0, 2.0)
}

/// Matches between `tracks` and `detections` indices, plus leftovers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchResult {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Pooled-appearance cosine cost, gated by `max_dist` and the Mahalanobis chi-square gate.
///
/// Rows follow `track_indices`, columns follow `detection_indices`.
pub fn appearance_cost(
    kf: &KalmanModel,
    tracks: &[Track],
    detections: &[Detection],
    track_indices: &[usize],
    detection_indices: &[usize],
    max_dist: f64,
) -> CostMatrix {
    let mut costs = CostMatrix::filled(track_indices.len(), detection_indices.len(), INFEASIBLE);
    let measurements: Vec<_> = detection_indices.iter().map(|&d| measurement(&detections[d].bbox)).collect();
    for (row, &t) in track_indices.iter().enumerate() {
        let track = &tracks[t];
        let Ok(pooled) = track.features.pooled() else {
            continue;
        };
        let Ok(gate) = kf.gating_distance(&track.mean, &track.covariance, &measurements) else {
            continue;
        };
        for (col, &d) in detection_indices.iter().enumerate() {
            let cost = cosine_distance(&pooled, &detections[d].embedding);
            if cost <= max_dist && gate[col] <= CHI2_95_4DOF {
                costs.set(row, col, cost);
            }
        }
    }
    costs
}

/// `1 - IoU` between predicted track boxes and detections, gated by `max_iou_distance`.
pub fn iou_cost(
    tracks: &[Track],
    detections: &[Detection],
    track_indices: &[usize],
    detection_indices: &[usize],
    max_iou_distance: f64,
) -> CostMatrix {
    let mut costs = CostMatrix::filled(track_indices.len(), detection_indices.len(), INFEASIBLE);
    for (row, &t) in track_indices.iter().enumerate() {
        let predicted = tracks[t].bbox();
        for (col, &d) in detection_indices.iter().enumerate() {
            let cost = 1.0 - iou(&predicted, &detections[d].bbox);
            if cost <= max_iou_distance {
                costs.set(row, col, cost);
            }
        }
    }
    costs
}

/// Runs the solver on `costs` and maps row/column positions back to indices.
pub fn min_cost_matching(costs: &CostMatrix, track_indices: &[usize], detection_indices: &[usize]) -> MatchResult {
    let a = solve_assignment(costs);
    MatchResult {
        matches: a
            .matches
            .iter()
            .map(|&(r, c)| (track_indices[r], detection_indices[c]))
            .collect(),
        unmatched_tracks: a.unmatched_rows.iter().map(|&r| track_indices[r]).collect(),
        unmatched_detections: a.unmatched_cols.iter().map(|&c| detection_indices[c]).collect(),
    }
}

/// Appearance matching that gives tracks seen more recently first pick of the detections.
///
/// Depth `level` handles tracks with `time_since_update == level + 1`, for
/// `level` in `0..max_age`.
pub fn matching_cascade(
    kf: &KalmanModel,
    tracks: &[Track],
    detections: &[Detection],
    track_indices: &[usize],
    detection_indices: &[usize],
    config: &TrackerConfig,
) -> MatchResult {
    let mut unmatched_detections = detection_indices.to_vec();
    let mut matches = Vec::new();
    for level in 0..config.max_age {
        if unmatched_detections.is_empty() {
            break;
        }
        let level_tracks: Vec<usize> = track_indices
            .iter()
            .copied()
            .filter(|&t| tracks[t].time_since_update == level + 1)
            .collect();
        if level_tracks.is_empty() {
            continue;
        }
        let costs = appearance_cost(kf, tracks, detections, &level_tracks, &unmatched_detections, config.max_dist);
        let result = min_cost_matching(&costs, &level_tracks, &unmatched_detections);
        matches.extend(result.matches);
        unmatched_detections = result.unmatched_detections;
    }

    let mut unmatched_tracks: Vec<usize> = track_indices
        .iter()
        .copied()
        .filter(|t| !matches.iter().any(|&(m, _)| m == *t))
        .collect();
    unmatched_tracks.sort_unstable();
    matches.sort_unstable();
    MatchResult {
        matches,
        unmatched_tracks,
        unmatched_detections,
    }
}
