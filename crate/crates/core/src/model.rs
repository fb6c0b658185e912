//! Shared domain types: boxes, detections, track states and tracker configuration.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::{parse_kv, parse_value};

/// Axis-aligned box in pixel space, top-left anchored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidMeasurement(format!("box width {width} must be > 0")));
        }
        if !(height > 0.0 && height.is_finite()) {
            return Err(Error::InvalidMeasurement(format!("box height {height} must be > 0")));
        }
        if !left.is_finite() || !top.is_finite() {
            return Err(Error::InvalidMeasurement("box origin must be finite".into()));
        }
        Ok(Self {
            left,
            top,
            width,
            height,
        })
    }

    /// `(cx, cy, aspect, height)` with `aspect = width / height`.
    pub fn to_center_form(&self) -> [f64; 4] {
        [
            self.left + self.width / 2.0,
            self.top + self.height / 2.0,
            self.width / self.height,
            self.height,
        ]
    }

    /// Inverse of [`to_center_form`](Self::to_center_form).
    ///
    /// Kalman predictions can drift to non-positive sizes, so the result is not
    /// validated; [`iou`](crate::association::iou) treats such boxes as empty.
    pub fn from_center_form(xyah: [f64; 4]) -> Self {
        let [cx, cy, a, h] = xyah;
        let width = a * h;
        Self {
            left: cx - width / 2.0,
            top: cy - h / 2.0,
            width,
            height: h,
        }
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width.max(0.0) * self.height.max(0.0)
    }
}

/// One detector output with its appearance embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub embedding: Vec<f64>,
}

impl Detection {
    /// Builds a detection, L2-normalizing the embedding.
    pub fn new(frame: u32, bbox: BoundingBox, confidence: f64, embedding: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidMeasurement(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        let embedding = normalize(embedding)
            .ok_or_else(|| Error::InvalidMeasurement("embedding has zero or non-finite norm".into()))?;
        Ok(Self {
            frame,
            bbox,
            confidence,
            embedding,
        })
    }
}

/// Scales `v` to unit L2 norm. `None` for zero or non-finite norms.
pub fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Tentative,
    Confirmed,
    Deleted,
}

impl TrackState {
    pub fn can_transition_to(self, next: TrackState) -> bool {
        use TrackState::*;
        matches!(
            (self, next),
            (Tentative, Confirmed) | (Tentative, Deleted) | (Confirmed, Deleted)
        )
    }
}

/// Tunable tracker hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub min_confidence: f64,
    /// Appearance (cosine) cost threshold.
    pub max_dist: f64,
    pub max_iou_distance: f64,
    pub nms_max_overlap: f64,
    pub max_age: u32,
    pub n_init: u32,
    /// Kept for compatibility with DeepSort configs; the feature buffer supersedes it.
    pub nn_budget: u32,
    pub feature_buffer_size: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            min_confidence: 0.5,
            max_dist: 0.2,
            max_iou_distance: 0.7,
            nms_max_overlap: 0.7,
            max_age: 30,
            n_init: 3,
            nn_budget: 100,
            feature_buffer_size: 5,
        }
    }
}

impl TrackerConfig {
    pub const FIELDS: [&'static str; 8] = [
        "min_confidence",
        "max_dist",
        "max_iou_distance",
        "nms_max_overlap",
        "max_age",
        "n_init",
        "nn_budget",
        "feature_buffer_size",
    ];

    pub fn is_integer_field(name: &str) -> bool {
        matches!(name, "max_age" | "n_init" | "nn_budget" | "feature_buffer_size")
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64, lo_inclusive: bool| -> Result<()> {
            let ok = v.is_finite() && v <= 1.0 && if lo_inclusive { v >= 0.0 } else { v > 0.0 };
            if ok {
                Ok(())
            } else {
                let range = if lo_inclusive { "[0, 1]" } else { "(0, 1]" };
                Err(Error::config(name, format!("{v} outside {range}")))
            }
        };
        unit("min_confidence", self.min_confidence, true)?;
        unit("max_dist", self.max_dist, false)?;
        unit("max_iou_distance", self.max_iou_distance, false)?;
        unit("nms_max_overlap", self.nms_max_overlap, false)?;
        for (name, v) in [
            ("max_age", self.max_age as usize),
            ("n_init", self.n_init as usize),
            ("nn_budget", self.nn_budget as usize),
            ("feature_buffer_size", self.feature_buffer_size),
        ] {
            if v == 0 {
                return Err(Error::config(name, "must be a positive integer"));
            }
        }
        Ok(())
    }

    /// Field value by name, as a real.
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "min_confidence" => self.min_confidence,
            "max_dist" => self.max_dist,
            "max_iou_distance" => self.max_iou_distance,
            "nms_max_overlap" => self.nms_max_overlap,
            "max_age" => self.max_age as f64,
            "n_init" => self.n_init as f64,
            "nn_budget" => self.nn_budget as f64,
            "feature_buffer_size" => self.feature_buffer_size as f64,
            _ => return None,
        })
    }

    /// Sets a field by name. Integer fields are rounded to nearest.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let int = || -> Result<u32> {
            let r = value.round();
            if !(r >= 0.0 && r <= u32::MAX as f64) {
                return Err(Error::config(name, format!("{value} is not a valid count")));
            }
            Ok(r as u32)
        };
        match name {
            "min_confidence" => self.min_confidence = value,
            "max_dist" => self.max_dist = value,
            "max_iou_distance" => self.max_iou_distance = value,
            "nms_max_overlap" => self.nms_max_overlap = value,
            "max_age" => self.max_age = int()?,
            "n_init" => self.n_init = int()?,
            "nn_budget" => self.nn_budget = int()?,
            "feature_buffer_size" => self.feature_buffer_size = int()? as usize,
            _ => return Err(Error::config(name, "unknown key")),
        }
        Ok(())
    }

    /// Parses the `key = value` config format. Keys not given keep the config1 default.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for kv in parse_kv(text, path)? {
            if !Self::FIELDS.contains(&kv.key.as_str()) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: kv.line,
                    reason: format!("unknown key `{}`", kv.key),
                });
            }
            let value: f64 = if Self::is_integer_field(&kv.key) {
                parse_value::<u32>(&kv, path)? as f64
            } else {
                parse_value(&kv, path)?
            };
            cfg.set(&kv.key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for name in Self::FIELDS {
            let v = self.get(name).unwrap();
            if Self::is_integer_field(name) {
                let _ = writeln!(out, "{name} = {}", v as u64);
            } else {
                let _ = writeln!(out, "{name} = {v}");
            }
        }
        out
    }
}

pub const PRESET_NAMES: [&str; 7] = [
    "config1", "config2", "config3", "config4", "config5", "config6", "config7",
];

/// Named configuration presets. `config7` is the slot for GA-optimized values;
/// until an optimizer run replaces it, it carries the baseline.
pub fn load_preset(name: &str) -> Result<TrackerConfig> {
    let base = TrackerConfig::default();
    let cfg = match name {
        "config1" | "config7" => base,
        "config2" => TrackerConfig {
            min_confidence: 0.7,
            ..base
        },
        "config3" => TrackerConfig {
            max_dist: 0.4,
            max_age: 80,
            ..base
        },
        "config4" => TrackerConfig {
            nms_max_overlap: 0.3,
            max_iou_distance: 0.3,
            ..base
        },
        "config5" => TrackerConfig {
            nms_max_overlap: 1.0,
            max_iou_distance: 0.9,
            ..base
        },
        "config6" => TrackerConfig {
            min_confidence: 0.3,
            max_dist: 0.6,
            ..base
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}
