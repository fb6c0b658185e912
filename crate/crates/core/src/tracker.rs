//! The per-frame tracking pipeline.

use crate::association::{iou, iou_cost, matching_cascade, min_cost_matching};
use crate::error::{Error, Result};
use crate::kalman::KalmanModel;
use crate::model::{BoundingBox, Detection, TrackerConfig};
use crate::track::Track;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord {
    pub track_id: u64,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

/// Confirmed tracks reported for one frame, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub frame: u32,
    pub records: Vec<TrackRecord>,
}

/// Confidence filtering followed by greedy non-maximum suppression.
///
/// Survivors are returned in descending confidence order; ties keep input order.
pub fn preprocess(detections: &[Detection], config: &TrackerConfig) -> Vec<Detection> {
    let mut candidates: Vec<&Detection> = detections
        .iter()
        .filter(|d| d.confidence >= config.min_confidence)
        .collect();
    candidates.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));

    let mut kept: Vec<Detection> = Vec::with_capacity(candidates.len());
    for d in candidates {
        if kept.iter().all(|k| iou(&k.bbox, &d.bbox) <= config.nms_max_overlap) {
            kept.push(d.clone());
        }
    }
    kept
}

/// Tracking state for one sequence.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    kf: KalmanModel,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u32>,
    numerical_failures: usize,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            kf: KalmanModel::default(),
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
            numerical_failures: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Live (non-deleted) tracks.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Kalman updates that failed and fell back to the predicted state.
    pub fn numerical_failures(&self) -> usize {
        self.numerical_failures
    }

    /// Advances the tracker by one frame. Detections not belonging to `frame` are rejected.
    pub fn step(&mut self, frame: u32, detections: &[Detection]) -> Result<FrameResult> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::OutOfOrderFrame { last, got: frame });
            }
        }
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(Error::OutOfOrderFrame {
                last: frame,
                got: d.frame,
            });
        }
        self.last_frame = Some(frame);

        let detections = preprocess(detections, &self.config);
        for track in &mut self.tracks {
            track.predict(&self.kf);
        }

        let (confirmed, unconfirmed): (Vec<usize>, Vec<usize>) =
            (0..self.tracks.len()).partition(|&i| self.tracks[i].is_confirmed());
        let all_detections: Vec<usize> = (0..detections.len()).collect();

        let cascade = matching_cascade(
            &self.kf,
            &self.tracks,
            &detections,
            &confirmed,
            &all_detections,
            &self.config,
        );

        let (recent, stale): (Vec<usize>, Vec<usize>) = cascade
            .unmatched_tracks
            .iter()
            .partition(|&&t| self.tracks[t].time_since_update == 1);
        let iou_candidates: Vec<usize> = unconfirmed.iter().chain(&recent).copied().collect();
        let costs = iou_cost(
            &self.tracks,
            &detections,
            &iou_candidates,
            &cascade.unmatched_detections,
            self.config.max_iou_distance,
        );
        let by_iou = min_cost_matching(&costs, &iou_candidates, &cascade.unmatched_detections);

        let mut matches = cascade.matches;
        matches.extend(by_iou.matches);
        let unmatched_tracks = stale.into_iter().chain(by_iou.unmatched_tracks);

        for (t, d) in matches {
            match self.tracks[t].update(&self.kf, &detections[d], self.config.n_init) {
                Ok(()) => {}
                Err(Error::Numerical(_)) => self.numerical_failures += 1,
                Err(e) => return Err(e),
            }
        }
        for t in unmatched_tracks {
            self.tracks[t].mark_missed(self.config.max_age);
        }
        for &d in &by_iou.unmatched_detections {
            let track = Track::from_detection(
                self.next_id,
                &self.kf,
                &detections[d],
                self.config.feature_buffer_size,
                self.config.n_init,
            )?;
            self.next_id += 1;
            self.tracks.push(track);
        }
        self.tracks.retain(|t| !t.is_deleted());

        let mut records: Vec<TrackRecord> = self
            .tracks
            .iter()
            .filter(|t| t.is_confirmed() && t.time_since_update <= 1)
            .map(|t| TrackRecord {
                track_id: t.id,
                bbox: t.bbox(),
                confidence: t.confidence,
            })
            .collect();
        records.sort_by_key(|r| r.track_id);
        Ok(FrameResult { frame, records })
    }
}

/// Tracks frames `1..=frame_count` (extended to the last detection's frame if later).
///
/// `detections` must be sorted by frame.
pub fn run_sequence(detections: &[Detection], config: &TrackerConfig, frame_count: u32) -> Result<Vec<FrameResult>> {
    if let Some(w) = detections.windows(2).find(|w| w[1].frame < w[0].frame) {
        return Err(Error::OutOfOrderFrame {
            last: w[0].frame,
            got: w[1].frame,
        });
    }
    let last = detections.last().map_or(0, |d| d.frame).max(frame_count);
    let mut tracker = Tracker::new(config.clone())?;
    let mut results = Vec::with_capacity(last as usize);
    let mut rest = detections;
    for frame in 1..=last {
        let n = rest.iter().take_while(|d| d.frame == frame).count();
        if n == 0 && rest.first().is_some_and(|d| d.frame < frame) {
            return Err(Error::OutOfOrderFrame {
                last: frame,
                got: rest[0].frame,
            });
        }
        let (now, later) = rest.split_at(n);
        results.push(tracker.step(frame, now)?);
        rest = later;
    }
    Ok(results)
}
