use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::kalman::{KalmanModel, Measurement, StateCovariance, StateVector};
use crate::model::{BoundingBox, Detection, TrackState};

/// FIFO of the most recent appearance embeddings of one track.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBuffer {
    entries: VecDeque<Vec<f64>>,
    capacity: usize,
}

impl FeatureBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "feature buffer capacity must be positive");
        Self {
            entries: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.iter().map(Vec::as_slice)
    }

    pub fn newest(&self) -> Option<&[f64]> {
        self.entries.back().map(Vec::as_slice)
    }

    pub fn dim(&self) -> Option<usize> {
        self.entries.front().map(Vec::len)
    }

    /// Appends `feature`, evicting the oldest entry when full.
    pub fn push(&mut self, feature: Vec<f64>) -> Result<()> {
        if let Some(expected) = self.dim() {
            if expected != feature.len() {
                return Err(Error::DimensionMismatch {
                    expected,
                    got: feature.len(),
                });
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(feature);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Average-pooled embedding, re-normalized to unit length.
    ///
    /// When the mean cancels to zero the newest entry is returned instead.
    pub fn pooled(&self) -> Result<Vec<f64>> {
        let dim = self.dim().ok_or(Error::EmptyBuffer)?;
        let mut mean = vec![0.0; dim];
        for entry in &self.entries {
            for (m, x) in mean.iter_mut().zip(entry) {
                *m += x;
            }
        }
        let n = self.entries.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);

        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-12 {
            return Ok(self.newest().expect("non-empty").to_vec());
        }
        mean.iter_mut().for_each(|m| *m /= norm);
        Ok(mean)
    }
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub mean: StateVector,
    pub covariance: StateCovariance,
    pub state: TrackState,
    pub hits: u32,
    pub age: u32,
    pub time_since_update: u32,
    pub features: FeatureBuffer,
    /// Confidence of the most recently associated detection.
    pub confidence: f64,
}

impl Track {
    pub(crate) fn from_detection(
        id: u64,
        kf: &KalmanModel,
        det: &Detection,
        buffer_size: usize,
        n_init: u32,
    ) -> Result<Self> {
        let (mean, covariance) = kf.initiate(&measurement(&det.bbox))?;
        let mut features = FeatureBuffer::new(buffer_size);
        features.push(det.embedding.clone())?;
        let state = if n_init <= 1 {
            TrackState::Confirmed
        } else {
            TrackState::Tentative
        };
        Ok(Self {
            id,
            mean,
            covariance,
            state,
            hits: 1,
            age: 1,
            time_since_update: 0,
            features,
            confidence: det.confidence,
        })
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::from_center_form([self.mean[0], self.mean[1], self.mean[2], self.mean[3]])
    }

    pub fn is_confirmed(&self) -> bool {
        self.state == TrackState::Confirmed
    }

    pub fn is_tentative(&self) -> bool {
        self.state == TrackState::Tentative
    }

    pub fn is_deleted(&self) -> bool {
        self.state == TrackState::Deleted
    }

    pub(crate) fn predict(&mut self, kf: &KalmanModel) {
        (self.mean, self.covariance) = kf.predict(&self.mean, &self.covariance);
        self.age += 1;
        self.time_since_update += 1;
    }

    /// Folds a matched detection into the track.
    ///
    /// A failed Kalman update leaves the predicted state in place; bookkeeping
    /// and the feature buffer still advance. The numerical error is returned
    /// for the caller to record.
    pub(crate) fn update(&mut self, kf: &KalmanModel, det: &Detection, n_init: u32) -> Result<()> {
        let kalman = kf.update(&self.mean, &self.covariance, &measurement(&det.bbox));
        if let Ok((mean, cov)) = &kalman {
            self.mean = *mean;
            self.covariance = *cov;
        }
        self.features.push(det.embedding.clone())?;
        self.hits += 1;
        self.time_since_update = 0;
        self.confidence = det.confidence;
        if self.state == TrackState::Tentative && self.hits >= n_init {
            self.state = TrackState::Confirmed;
        }
        kalman.map(|_| ())
    }

    pub(crate) fn mark_missed(&mut self, max_age: u32) {
        if self.state == TrackState::Tentative || self.time_since_update > max_age {
            self.state = TrackState::Deleted;
            self.features.clear();
        }
    }
}

pub fn measurement(bbox: &BoundingBox) -> Measurement {
    Measurement::from(bbox.to_center_form())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f(i: usize) -> Vec<f64> {
        let mut v = vec![0.0; 8];
        v[i] = 1.0;
        v
    }

    #[test]
    fn push_evicts_oldest() {
        let mut b = FeatureBuffer::new(5);
        for i in 1..=5 {
            b.push(f(i)).unwrap();
        }
        b.push(f(6)).unwrap();
        let got: Vec<_> = b.iter().map(|e| e.to_vec()).collect();
        assert_eq!(got, (2..=6).map(f).collect::<Vec<_>>());
    }

    #[test]
    fn push_onto_empty() {
        let mut b = FeatureBuffer::new(5);
        b.push(f(0)).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.newest().unwrap(), f(0).as_slice());
    }

    #[test]
    fn seven_pushes_keep_last_five() {
        let mut b = FeatureBuffer::new(5);
        for i in 1..=7 {
            b.push(f(i)).unwrap();
        }
        let got: Vec<_> = b.iter().map(|e| e.to_vec()).collect();
        assert_eq!(got, (3..=7).map(f).collect::<Vec<_>>());
    }

    #[test]
    fn push_dimension_mismatch() {
        let mut b = FeatureBuffer::new(2);
        b.push(vec![1.0, 0.0]).unwrap();
        assert!(matches!(b.push(vec![1.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn pooled_examples() {
        let mut b = FeatureBuffer::new(5);
        assert!(matches!(b.pooled(), Err(Error::EmptyBuffer)));
        b.push(vec![1.0, 0.0]).unwrap();
        assert_eq!(b.pooled().unwrap(), vec![1.0, 0.0]);
        b.push(vec![0.0, 1.0]).unwrap();
        let p = b.pooled().unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((p[0] - r).abs() < 1e-12 && (p[1] - r).abs() < 1e-12);

        let mut b = FeatureBuffer::new(5);
        b.push(vec![1.0, 0.0]).unwrap();
        b.push(vec![-1.0, 0.0]).unwrap();
        assert_eq!(b.pooled().unwrap(), vec![-1.0, 0.0]);
    }

    #[test]
    fn mark_missed_clears_features_on_delete() {
        let kf = KalmanModel::default();
        let det = Detection::new(1, BoundingBox::new(0., 0., 10., 20.).unwrap(), 0.9, vec![1.0, 0.0]).unwrap();
        let mut t = Track::from_detection(1, &kf, &det, 5, 3).unwrap();
        t.mark_missed(30);
        assert!(t.is_deleted());
        assert!(t.features.is_empty());
    }

    proptest! {
        #[test]
        fn buffer_never_exceeds_capacity(cap in 1usize..8, pushes in 0usize..30) {
            let mut b = FeatureBuffer::new(cap);
            for i in 0..pushes {
                b.push(vec![i as f64, 1.0]).unwrap();
                prop_assert!(b.len() <= cap);
            }
            prop_assert_eq!(b.len(), pushes.min(cap));
            if pushes > 0 {
                prop_assert_eq!(b.newest().unwrap()[0], (pushes - 1) as f64);
            }
        }

        #[test]
        fn pooled_is_order_invariant(seed in any::<u64>(), n in 1usize..6) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let feats: Vec<Vec<f64>> = (0..n)
                .map(|_| crate::model::normalize((0..4).map(|_| rng.random_range(0.1..1.0)).collect()).unwrap())
                .collect();
            let mut a = FeatureBuffer::new(5);
            let mut b = FeatureBuffer::new(5);
            for x in &feats { a.push(x.clone()).unwrap(); }
            for x in feats.iter().rev() { b.push(x.clone()).unwrap(); }
            let (pa, pb) = (a.pooled().unwrap(), b.pooled().unwrap());
            for (x, y) in pa.iter().zip(&pb) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
