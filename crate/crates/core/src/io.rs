//! On-disk sequence layout and result files.
//!
//! A sequence directory holds `meta.txt` (`key = value`), `det.txt`
//! (`frame,-1,left,top,width,height,conf,e1,...,eD`) and optionally `gt.txt`
//! (`frame,id,left,top,width,height,...`). Result files use the 10-column
//! `frame,id,left,top,width,height,conf,-1,-1,-1` layout.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kv::{parse_kv, parse_value};
use crate::metrics::LabeledBox;
use crate::model::{BoundingBox, Detection};
use crate::tracker::{FrameResult, TrackRecord};

pub const META_FILE: &str = "meta.txt";
pub const DETECTIONS_FILE: &str = "det.txt";
pub const GROUND_TRUTH_FILE: &str = "gt.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMeta {
    pub name: String,
    pub frame_count: u32,
    pub width: u32,
    pub height: u32,
    pub embedding_dim: usize,
}

impl SequenceMeta {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let (mut name, mut frame_count, mut width, mut height, mut dim) = (None, None, None, None, None);
        for kv in parse_kv(text, path)? {
            match kv.key.as_str() {
                "name" => name = Some(kv.value.clone()),
                "frame_count" => frame_count = Some(parse_value(&kv, path)?),
                "width" => width = Some(parse_value(&kv, path)?),
                "height" => height = Some(parse_value(&kv, path)?),
                "embedding_dim" => dim = Some(parse_value(&kv, path)?),
                other => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: kv.line,
                        reason: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        let missing = |key: &str| Error::Schema {
            path: path.to_path_buf(),
            reason: format!("missing `{key}`"),
        };
        let meta = Self {
            name: name.ok_or_else(|| missing("name"))?,
            frame_count: frame_count.ok_or_else(|| missing("frame_count"))?,
            width: width.ok_or_else(|| missing("width"))?,
            height: height.ok_or_else(|| missing("height"))?,
            embedding_dim: dim.ok_or_else(|| missing("embedding_dim"))?,
        };
        if meta.embedding_dim == 0 {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                reason: "embedding_dim must be positive".into(),
            });
        }
        Ok(meta)
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "name = {}\nframe_count = {}\nwidth = {}\nheight = {}\nembedding_dim = {}\n",
            self.name, self.frame_count, self.width, self.height, self.embedding_dim
        )
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn row_error(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn parse_fields(line: &str, path: &Path, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|f| {
            let f = f.trim();
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| row_error(path, lineno, format!("`{f}` is not a number")))
        })
        .collect()
}

fn parse_frame(v: f64, path: &Path, line: usize) -> Result<u32> {
    if v.fract() != 0.0 || v < 1.0 || v > u32::MAX as f64 {
        return Err(row_error(path, line, format!("invalid frame index {v}")));
    }
    Ok(v as u32)
}

fn parse_box(fields: &[f64], path: &Path, line: usize) -> Result<BoundingBox> {
    BoundingBox::new(fields[0], fields[1], fields[2], fields[3]).map_err(|e| row_error(path, line, e.to_string()))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parses detections, normalizing embeddings. Rows come back sorted by frame.
///
/// With `embedding_dim` set, every row must have exactly `7 + embedding_dim` fields.
pub fn parse_detections(text: &str, path: &Path, embedding_dim: Option<usize>) -> Result<Vec<Detection>> {
    let mut dim = embedding_dim;
    let mut out = Vec::new();
    for (line, content) in data_lines(text) {
        let fields = parse_fields(content, path, line)?;
        if fields.len() < 8 {
            return Err(row_error(path, line, format!("expected at least 8 fields, got {}", fields.len())));
        }
        let row_dim = fields.len() - 7;
        match dim {
            Some(d) if d != row_dim => {
                return Err(Error::Schema {
                    path: path.to_path_buf(),
                    reason: format!("line {line}: embedding has {row_dim} values, expected {d}"),
                })
            }
            None => dim = Some(row_dim),
            _ => {}
        }
        let frame = parse_frame(fields[0], path, line)?;
        let bbox = parse_box(&fields[2..6], path, line)?;
        let det = Detection::new(frame, bbox, fields[6], fields[7..].to_vec())
            .map_err(|e| row_error(path, line, e.to_string()))?;
        out.push(det);
    }
    out.sort_by_key(|d| d.frame);
    Ok(out)
}

pub fn load_detections(path: &Path, embedding_dim: Option<usize>) -> Result<Vec<Detection>> {
    parse_detections(&read(path)?, path, embedding_dim)
}

pub fn format_detections(detections: &[Detection]) -> String {
    let mut out = String::new();
    for d in detections {
        let b = &d.bbox;
        let _ = write!(
            out,
            "{},-1,{:.2},{:.2},{:.2},{:.2},{:.4}",
            d.frame, b.left, b.top, b.width, b.height, d.confidence
        );
        for e in &d.embedding {
            let _ = write!(out, ",{e:.6}");
        }
        out.push('\n');
    }
    out
}

/// Boxes with identities: ground truth or tracker results. Needs at least 6 fields per row.
pub fn parse_labeled_boxes(text: &str, path: &Path) -> Result<Vec<LabeledBox>> {
    let mut out = Vec::new();
    for (line, content) in data_lines(text) {
        let fields = parse_fields(content, path, line)?;
        if fields.len() < 6 {
            return Err(row_error(path, line, format!("expected at least 6 fields, got {}", fields.len())));
        }
        let frame = parse_frame(fields[0], path, line)?;
        if fields[1].fract() != 0.0 || fields[1] < 1.0 {
            return Err(row_error(path, line, format!("invalid identity {}", fields[1])));
        }
        out.push(LabeledBox {
            frame,
            id: fields[1] as u64,
            bbox: parse_box(&fields[2..6], path, line)?,
        });
    }
    out.sort_by_key(|e| (e.frame, e.id));
    if let Some(w) = out.windows(2).find(|w| (w[0].frame, w[0].id) == (w[1].frame, w[1].id)) {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            reason: format!("identity {} appears twice in frame {}", w[0].id, w[0].frame),
        });
    }
    Ok(out)
}

pub fn load_ground_truth(path: &Path) -> Result<Vec<LabeledBox>> {
    parse_labeled_boxes(&read(path)?, path)
}

pub fn format_ground_truth(entries: &[LabeledBox]) -> String {
    let mut sorted = entries.to_vec();
    sorted.sort_by_key(|e| (e.frame, e.id));
    let mut out = String::new();
    for e in &sorted {
        let b = &e.bbox;
        let _ = writeln!(
            out,
            "{},{},{:.2},{:.2},{:.2},{:.2},1,-1,-1,-1",
            e.frame, e.id, b.left, b.top, b.width, b.height
        );
    }
    out
}

/// Result rows sorted by `(frame, id)`, boxes and confidence at 2 decimals.
pub fn format_results(results: &[FrameResult]) -> String {
    let mut rows: Vec<(u32, &TrackRecord)> = results
        .iter()
        .flat_map(|r| r.records.iter().map(move |rec| (r.frame, rec)))
        .collect();
    rows.sort_by_key(|(f, rec)| (*f, rec.track_id));
    let mut out = String::new();
    for (frame, rec) in rows {
        let b = &rec.bbox;
        let _ = writeln!(
            out,
            "{},{},{:.2},{:.2},{:.2},{:.2},{:.2},-1,-1,-1",
            frame, rec.track_id, b.left, b.top, b.width, b.height, rec.confidence
        );
    }
    out
}

pub fn write_results(results: &[FrameResult], path: &Path) -> Result<()> {
    write(path, &format_results(results))
}

/// Inverse of [`format_results`]; only frames that have at least one row appear.
pub fn parse_results(text: &str, path: &Path) -> Result<Vec<FrameResult>> {
    let mut out: Vec<FrameResult> = Vec::new();
    for (line, content) in data_lines(text) {
        let fields = parse_fields(content, path, line)?;
        if fields.len() != 10 {
            return Err(row_error(path, line, format!("expected 10 fields, got {}", fields.len())));
        }
        let frame = parse_frame(fields[0], path, line)?;
        if fields[1].fract() != 0.0 || fields[1] < 1.0 {
            return Err(row_error(path, line, format!("invalid track id {}", fields[1])));
        }
        let record = TrackRecord {
            track_id: fields[1] as u64,
            bbox: parse_box(&fields[2..6], path, line)?,
            confidence: fields[6],
        };
        match out.last_mut() {
            Some(last) if last.frame == frame => last.records.push(record),
            Some(last) if last.frame > frame => {
                return Err(row_error(path, line, "rows are not sorted by frame"));
            }
            _ => out.push(FrameResult {
                frame,
                records: vec![record],
            }),
        }
    }
    Ok(out)
}

pub fn load_results(path: &Path) -> Result<Vec<FrameResult>> {
    parse_results(&read(path)?, path)
}

/// Plain-text overlay for external renderers: one `frame id left top width height` line per box.
pub fn format_overlay(results: &[FrameResult]) -> String {
    let mut out = String::new();
    for r in results {
        for rec in &r.records {
            let b = &rec.bbox;
            let _ = writeln!(
                out,
                "{} {} {:.2} {:.2} {:.2} {:.2}",
                r.frame, rec.track_id, b.left, b.top, b.width, b.height
            );
        }
    }
    out
}

/// A loaded sequence directory.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub dir: PathBuf,
    pub meta: SequenceMeta,
    pub detections: Vec<Detection>,
    pub ground_truth: Option<Vec<LabeledBox>>,
}

pub fn load_sequence(dir: &Path) -> Result<Sequence> {
    let meta_path = dir.join(META_FILE);
    let meta = SequenceMeta::parse(&read(&meta_path)?, &meta_path)?;
    let det_path = dir.join(DETECTIONS_FILE);
    let detections = load_detections(&det_path, Some(meta.embedding_dim))?;
    if let Some(d) = detections.iter().find(|d| d.frame > meta.frame_count) {
        return Err(Error::Schema {
            path: det_path,
            reason: format!("frame {} beyond frame_count {}", d.frame, meta.frame_count),
        });
    }
    let gt_path = dir.join(GROUND_TRUTH_FILE);
    let ground_truth = if gt_path.exists() {
        let gt = load_ground_truth(&gt_path)?;
        if let Some(g) = gt.iter().find(|g| g.frame > meta.frame_count) {
            return Err(Error::Schema {
                path: gt_path,
                reason: format!("frame {} beyond frame_count {}", g.frame, meta.frame_count),
            });
        }
        Some(gt)
    } else {
        None
    };
    Ok(Sequence {
        dir: dir.to_path_buf(),
        meta,
        detections,
        ground_truth,
    })
}

pub fn write_sequence(
    dir: &Path,
    meta: &SequenceMeta,
    detections: &[Detection],
    ground_truth: Option<&[LabeledBox]>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join(META_FILE), &meta.to_kv_string())?;
    write(&dir.join(DETECTIONS_FILE), &format_detections(detections))?;
    if let Some(gt) = ground_truth {
        write(&dir.join(GROUND_TRUTH_FILE), &format_ground_truth(gt))?;
    }
    Ok(())
}
