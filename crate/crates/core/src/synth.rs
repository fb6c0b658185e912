//! Deterministic synthetic sequences: random-walk identities, noisy detections
//! and identity-conditioned embeddings.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::kv::{parse_kv, parse_value};
use crate::metrics::LabeledBox;
use crate::model::{normalize, BoundingBox, Detection};

/// Inclusive frame interval during which one identity is hidden.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occlusion {
    pub identity: u64,
    pub start_frame: u32,
    pub end_frame: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub identities: usize,
    pub frames: u32,
    pub width: f64,
    pub height: f64,
    /// Detection box jitter, pixels.
    pub motion_noise_sigma: f64,
    pub miss_rate: f64,
    /// Expected false positives per frame.
    pub false_positive_rate: f64,
    pub embedding_dim: usize,
    pub embedding_noise_sigma: f64,
    /// Per-frame velocity perturbation, pixels/frame².
    pub acceleration_sigma: f64,
    pub occlusions: Vec<Occlusion>,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            identities: 3,
            frames: 300,
            width: 1280.0,
            height: 720.0,
            motion_noise_sigma: 0.0,
            miss_rate: 0.0,
            false_positive_rate: 0.0,
            embedding_dim: 16,
            embedding_noise_sigma: 0.0,
            acceleration_sigma: 0.3,
            occlusions: Vec::new(),
            seed: 0,
        }
    }
}

/// Fraction of the arena width an identity may travel per frame.
const MAX_SPEED_FRACTION: f64 = 0.05;

pub const SCENARIO_NAMES: [&str; 4] = ["clean", "occlusion", "lookalike", "crowded"];

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if self.identities == 0 || self.frames == 0 {
            return bad("identities and frames must be positive".into());
        }
        if self.identities > self.embedding_dim {
            return bad(format!(
                "{} identities cannot have orthogonal anchors in {} dimensions",
                self.identities, self.embedding_dim
            ));
        }
        if !(self.width >= 200.0 && self.height >= 200.0) {
            return bad("arena must be at least 200x200 pixels".into());
        }
        for (name, v) in [("miss_rate", self.miss_rate), ("false_positive_rate", self.false_positive_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0, 1]"));
            }
        }
        for (name, v) in [
            ("motion_noise_sigma", self.motion_noise_sigma),
            ("embedding_noise_sigma", self.embedding_noise_sigma),
            ("acceleration_sigma", self.acceleration_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a non-negative number"));
            }
        }
        for o in &self.occlusions {
            if o.identity == 0 || o.identity as usize > self.identities {
                return bad(format!("occlusion names unknown identity {}", o.identity));
            }
            if o.start_frame < 1 || o.end_frame > self.frames || o.start_frame > o.end_frame {
                return bad(format!(
                    "occlusion {}..{} outside [1, {}]",
                    o.start_frame, o.end_frame, self.frames
                ));
            }
        }
        Ok(())
    }

    fn occluded(&self, identity: u64, frame: u32) -> bool {
        self.occlusions
            .iter()
            .any(|o| o.identity == identity && (o.start_frame..=o.end_frame).contains(&frame))
    }

    /// `key = value` scenario file; `occlusion = id, start, end` may repeat.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut spec = Self::default();
        for kv in parse_kv(text, path)? {
            match kv.key.as_str() {
                "identities" => spec.identities = parse_value(&kv, path)?,
                "frames" => spec.frames = parse_value(&kv, path)?,
                "width" => spec.width = parse_value(&kv, path)?,
                "height" => spec.height = parse_value(&kv, path)?,
                "motion_noise_sigma" => spec.motion_noise_sigma = parse_value(&kv, path)?,
                "miss_rate" => spec.miss_rate = parse_value(&kv, path)?,
                "false_positive_rate" => spec.false_positive_rate = parse_value(&kv, path)?,
                "embedding_dim" => spec.embedding_dim = parse_value(&kv, path)?,
                "embedding_noise_sigma" => spec.embedding_noise_sigma = parse_value(&kv, path)?,
                "acceleration_sigma" => spec.acceleration_sigma = parse_value(&kv, path)?,
                "seed" => spec.seed = parse_value(&kv, path)?,
                "occlusion" => {
                    let parts: Vec<&str> = kv.value.split(',').map(str::trim).collect();
                    let parsed: Option<(u64, u32, u32)> = match parts.as_slice() {
                        [a, b, c] => (|| Some((a.parse().ok()?, b.parse().ok()?, c.parse().ok()?)))(),
                        _ => None,
                    };
                    let (identity, start_frame, end_frame) = parsed.ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        line: kv.line,
                        reason: "expected `occlusion = identity, start, end`".into(),
                    })?;
                    spec.occlusions.push(Occlusion {
                        identity,
                        start_frame,
                        end_frame,
                    });
                }
                other => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: kv.line,
                        reason: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Named scenario with the given seed.
pub fn preset_scenario(name: &str, seed: u64) -> Result<ScenarioSpec> {
    let base = ScenarioSpec {
        seed,
        ..Default::default()
    };
    let spec = match name {
        "clean" => base,
        "occlusion" => ScenarioSpec {
            motion_noise_sigma: 1.0,
            embedding_noise_sigma: 0.15,
            acceleration_sigma: 0.1,
            occlusions: vec![
                Occlusion { identity: 1, start_frame: 60, end_frame: 79 },
                Occlusion { identity: 2, start_frame: 130, end_frame: 149 },
                Occlusion { identity: 3, start_frame: 200, end_frame: 219 },
                Occlusion { identity: 1, start_frame: 240, end_frame: 259 },
            ],
            ..base
        },
        "lookalike" => ScenarioSpec {
            motion_noise_sigma: 2.0,
            miss_rate: 0.05,
            false_positive_rate: 0.2,
            embedding_noise_sigma: 0.35,
            acceleration_sigma: 0.4,
            width: 640.0,
            height: 400.0,
            frames: 200,
            occlusions: vec![
                Occlusion { identity: 1, start_frame: 50, end_frame: 60 },
                Occlusion { identity: 2, start_frame: 120, end_frame: 135 },
            ],
            ..base
        },
        "crowded" => ScenarioSpec {
            motion_noise_sigma: 1.5,
            miss_rate: 0.02,
            false_positive_rate: 0.1,
            embedding_noise_sigma: 0.1,
            acceleration_sigma: 0.5,
            width: 400.0,
            height: 300.0,
            ..base
        },
        other => return Err(Error::Scenario(format!("unknown scenario preset `{other}`"))),
    };
    spec.validate()?;
    Ok(spec)
}

/// All named scenarios with seed 0.
pub fn preset_scenarios() -> Vec<(&'static str, ScenarioSpec)> {
    SCENARIO_NAMES
        .iter()
        .map(|&n| (n, preset_scenario(n, 0).expect("presets are valid")))
        .collect()
}

/// Ground truth and detections of one generated sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub ground_truth: Vec<LabeledBox>,
    pub detections: Vec<Detection>,
    /// Unit anchor embedding of each identity (index = identity - 1).
    pub anchors: Vec<Vec<f64>>,
    /// False positives injected in each frame (index = frame - 1).
    pub false_positives: Vec<usize>,
}

struct Walker {
    cx: f64,
    cy: f64,
    vx: f64,
    vy: f64,
    w: f64,
    h: f64,
}

/// Gram-Schmidt on `k` Gaussian vectors.
fn orthonormal_anchors(k: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut anchors: Vec<Vec<f64>> = Vec::with_capacity(k);
    while anchors.len() < k {
        let mut v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
        for a in &anchors {
            let dot: f64 = v.iter().zip(a).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(a).for_each(|(x, y)| *x -= dot * y);
        }
        if let Some(u) = normalize(v) {
            if u.iter().all(|x| x.is_finite()) {
                anchors.push(u);
            }
        }
    }
    anchors
}

fn noisy_embedding(anchor: &[f64], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).unwrap();
    let v: Vec<f64> = anchor
        .iter()
        .map(|a| if sigma > 0.0 { a + noise.sample(rng) } else { *a })
        .collect();
    normalize(v).unwrap_or_else(|| anchor.to_vec())
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    loop {
        if let Some(u) = normalize((0..dim).map(|_| normal.sample(rng)).collect()) {
            return u;
        }
    }
}

/// Keeps `pos` within `[lo, hi]` by reflection; flips `vel` when it bounces.
fn reflect(pos: &mut f64, vel: &mut f64, lo: f64, hi: f64) {
    for _ in 0..4 {
        if *pos < lo {
            *pos = 2.0 * lo - *pos;
            *vel = -*vel;
        } else if *pos > hi {
            *pos = 2.0 * hi - *pos;
            *vel = -*vel;
        } else {
            return;
        }
    }
    *pos = pos.clamp(lo, hi);
}

pub fn generate(spec: &ScenarioSpec) -> Result<SyntheticSequence> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let anchors = orthonormal_anchors(spec.identities, spec.embedding_dim, &mut rng);

    let max_speed = MAX_SPEED_FRACTION * spec.width;
    let mut walkers: Vec<Walker> = (0..spec.identities)
        .map(|_| {
            let h = rng.random_range(0.15..0.25) * spec.height;
            let w = h * rng.random_range(0.35..0.55);
            Walker {
                cx: rng.random_range(w / 2.0..spec.width - w / 2.0),
                cy: rng.random_range(h / 2.0..spec.height - h / 2.0),
                vx: rng.random_range(-1.5..1.5),
                vy: rng.random_range(-1.0..1.0),
                w,
                h,
            }
        })
        .collect();

    let accel = Normal::new(0.0, spec.acceleration_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let jitter = Normal::new(0.0, spec.motion_noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let fp_count = (spec.false_positive_rate > 0.0).then(|| Poisson::new(spec.false_positive_rate).unwrap());

    let mut ground_truth = Vec::new();
    let mut detections = Vec::new();
    let mut false_positives = Vec::with_capacity(spec.frames as usize);
    for frame in 1..=spec.frames {
        for (idx, walker) in walkers.iter_mut().enumerate() {
            let identity = idx as u64 + 1;
            if frame > 1 {
                if spec.acceleration_sigma > 0.0 {
                    walker.vx += accel.sample(&mut rng);
                    walker.vy += accel.sample(&mut rng);
                }
                let speed = walker.vx.hypot(walker.vy);
                if speed > max_speed {
                    walker.vx *= max_speed / speed;
                    walker.vy *= max_speed / speed;
                }
                walker.cx += walker.vx;
                walker.cy += walker.vy;
                reflect(&mut walker.cx, &mut walker.vx, walker.w / 2.0, spec.width - walker.w / 2.0);
                reflect(&mut walker.cy, &mut walker.vy, walker.h / 2.0, spec.height - walker.h / 2.0);
            }
            let gt_box = BoundingBox::new(walker.cx - walker.w / 2.0, walker.cy - walker.h / 2.0, walker.w, walker.h)?;

            // draws happen for hidden identities too, so an occlusion leaves the
            // rest of the sequence unchanged
            let missed = rng.random::<f64>() < spec.miss_rate;
            let noise: [f64; 4] = std::array::from_fn(|_| {
                if spec.motion_noise_sigma > 0.0 {
                    jitter.sample(&mut rng)
                } else {
                    0.0
                }
            });
            let confidence = rng.random_range(0.75..=1.0);
            let embedding = noisy_embedding(&anchors[idx], spec.embedding_noise_sigma, &mut rng);

            if spec.occluded(identity, frame) {
                continue;
            }
            ground_truth.push(LabeledBox {
                frame,
                id: identity,
                bbox: gt_box,
            });
            if missed {
                continue;
            }
            let det_box = BoundingBox::new(
                gt_box.left + noise[0],
                gt_box.top + noise[1],
                (gt_box.width + noise[2]).max(1.0),
                (gt_box.height + noise[3]).max(1.0),
            )?;
            detections.push(Detection {
                frame,
                bbox: det_box,
                confidence,
                embedding,
            });
        }

        let n_fp = fp_count.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        false_positives.push(n_fp);
        for _ in 0..n_fp {
            let h = rng.random_range(0.1..0.25) * spec.height;
            let w = h * rng.random_range(0.3..0.6);
            let bbox = BoundingBox::new(
                rng.random_range(0.0..spec.width - w),
                rng.random_range(0.0..spec.height - h),
                w,
                h,
            )?;
            let confidence = rng.random_range(0.2..0.8);
            detections.push(Detection {
                frame,
                bbox,
                confidence,
                embedding: random_unit(spec.embedding_dim, &mut rng),
            });
        }
    }

    Ok(SyntheticSequence {
        ground_truth,
        detections,
        anchors,
        false_positives,
    })
}
