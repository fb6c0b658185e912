//! Tracking evaluation: CLEAR-MOT, identity F1 and the HOTA family.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::assignment::{solve_assignment, CostMatrix, INFEASIBLE};
use crate::association::iou;
use crate::error::{Error, Result};
use crate::model::BoundingBox;
use crate::tracker::FrameResult;

/// IoU a pair needs to count as a CLEAR / identity match.
pub const MATCH_IOU: f64 = 0.5;

/// A box with an identity in one frame; used for ground truth and predictions alike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledBox {
    pub frame: u32,
    pub id: u64,
    pub bbox: BoundingBox,
}

pub type GtEntry = LabeledBox;

/// Flattens tracker output into labeled boxes.
pub fn predictions_from_results(results: &[FrameResult]) -> Vec<LabeledBox> {
    results
        .iter()
        .flat_map(|r| {
            r.records.iter().map(move |rec| LabeledBox {
                frame: r.frame,
                id: rec.track_id,
                bbox: rec.bbox,
            })
        })
        .collect()
}

type FrameBoxes = Vec<(u64, BoundingBox)>;

/// Boxes grouped by frame, each frame sorted by id.
#[derive(Debug, Clone, Default)]
struct Frames(BTreeMap<u32, FrameBoxes>);

impl Frames {
    fn new(entries: &[LabeledBox]) -> Self {
        let mut map: BTreeMap<u32, FrameBoxes> = BTreeMap::new();
        for e in entries {
            map.entry(e.frame).or_default().push((e.id, e.bbox));
        }
        for boxes in map.values_mut() {
            boxes.sort_by_key(|&(id, _)| id);
        }
        Frames(map)
    }

    fn get(&self, frame: u32) -> &[(u64, BoundingBox)] {
        self.0.get(&frame).map_or(&[], Vec::as_slice)
    }

    fn len(&self) -> usize {
        self.0.values().map(Vec::len).sum()
    }

    fn counts_by_id(&self) -> BTreeMap<u64, usize> {
        let mut counts = BTreeMap::new();
        for boxes in self.0.values() {
            for (id, _) in boxes {
                *counts.entry(*id).or_insert(0) += 1;
            }
        }
        counts
    }
}

fn all_frames(gt: &Frames, pred: &Frames) -> Vec<u32> {
    let mut frames: Vec<u32> = gt.0.keys().chain(pred.0.keys()).copied().collect();
    frames.sort_unstable();
    frames.dedup();
    frames
}

/// Max-cardinality, then max-total-IoU matching of boxes with IoU >= `threshold`.
/// Returns index pairs into `gt` and `pred`.
fn match_by_iou(gt: &[(u64, BoundingBox)], pred: &[(u64, BoundingBox)], threshold: f64) -> Vec<(usize, usize)> {
    let mut costs = CostMatrix::filled(gt.len(), pred.len(), INFEASIBLE);
    for (i, (_, g)) in gt.iter().enumerate() {
        for (j, (_, p)) in pred.iter().enumerate() {
            let overlap = iou(g, p);
            if overlap >= threshold {
                costs.set(i, j, 1.0 - overlap);
            }
        }
    }
    solve_assignment(&costs).matches
}

/// CLEAR-MOT outcome for one frame.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClearFrame {
    /// `(gt id, predicted id)` pairs.
    pub matches: Vec<(u64, u64)>,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub id_switches: usize,
}

/// Matches one frame under CLEAR-MOT rules.
///
/// `last_match` maps each GT id to the predicted id it was most recently matched
/// with. Those correspondences are kept when they still overlap; the rest are
/// assigned by minimum `1 - IoU`.
pub fn clear_match(
    gt: &[(u64, BoundingBox)],
    pred: &[(u64, BoundingBox)],
    last_match: &BTreeMap<u64, u64>,
) -> ClearFrame {
    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut matches = Vec::new();

    for (i, (gid, gbox)) in gt.iter().enumerate() {
        let Some(prev) = last_match.get(gid) else {
            continue;
        };
        if let Some(j) = pred.iter().position(|(pid, _)| pid == prev) {
            if !pred_used[j] && iou(gbox, &pred[j].1) >= MATCH_IOU {
                gt_used[i] = true;
                pred_used[j] = true;
                matches.push((*gid, *prev));
            }
        }
    }

    let gt_rest: Vec<usize> = (0..gt.len()).filter(|&i| !gt_used[i]).collect();
    let pred_rest: Vec<usize> = (0..pred.len()).filter(|&j| !pred_used[j]).collect();
    let gt_boxes: Vec<_> = gt_rest.iter().map(|&i| gt[i]).collect();
    let pred_boxes: Vec<_> = pred_rest.iter().map(|&j| pred[j]).collect();
    let mut id_switches = 0;
    for (a, b) in match_by_iou(&gt_boxes, &pred_boxes, MATCH_IOU) {
        let (gid, pid) = (gt_boxes[a].0, pred_boxes[b].0);
        if last_match.get(&gid).is_some_and(|&prev| prev != pid) {
            id_switches += 1;
        }
        matches.push((gid, pid));
    }
    matches.sort_unstable();

    ClearFrame {
        false_negatives: gt.len() - matches.len(),
        false_positives: pred.len() - matches.len(),
        id_switches,
        matches,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClearCounts {
    pub gt_total: usize,
    pub matches: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub id_switches: usize,
    pub fragmentations: usize,
}

pub fn clear_counts(gt: &[LabeledBox], pred: &[LabeledBox]) -> ClearCounts {
    let (gt, pred) = (Frames::new(gt), Frames::new(pred));
    let mut last_match = BTreeMap::new();
    // per GT id: (currently matched, ever matched)
    let mut coverage: BTreeMap<u64, (bool, bool)> = BTreeMap::new();
    let mut counts = ClearCounts {
        gt_total: gt.len(),
        ..Default::default()
    };
    for frame in all_frames(&gt, &pred) {
        let (g, p) = (gt.get(frame), pred.get(frame));
        let result = clear_match(g, p, &last_match);
        counts.matches += result.matches.len();
        counts.false_negatives += result.false_negatives;
        counts.false_positives += result.false_positives;
        counts.id_switches += result.id_switches;
        for (gid, _) in g {
            let matched = result.matches.iter().any(|(m, _)| m == gid);
            let state = coverage.entry(*gid).or_insert((false, false));
            if matched && !state.0 && state.1 {
                counts.fragmentations += 1;
            }
            *state = (matched, state.1 || matched);
        }
        for (gid, pid) in result.matches {
            last_match.insert(gid, pid);
        }
    }
    counts
}

/// `1 - (FN + FP + IDSW) / |GT|`.
pub fn mota(gt: &[LabeledBox], pred: &[LabeledBox]) -> Result<f64> {
    let c = clear_counts(gt, pred);
    mota_from_counts(&c)
}

fn mota_from_counts(c: &ClearCounts) -> Result<f64> {
    if c.gt_total == 0 {
        return Err(Error::UndefinedMetric("MOTA needs at least one ground-truth box"));
    }
    Ok(1.0 - (c.false_negatives + c.false_positives + c.id_switches) as f64 / c.gt_total as f64)
}

/// Number of times a GT trajectory regains coverage after losing it.
pub fn fragmentation_count(gt: &[LabeledBox], pred: &[LabeledBox]) -> usize {
    clear_counts(gt, pred).fragmentations
}

/// Identity-level counts under the best global GT-to-prediction mapping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IdentityCounts {
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

impl IdentityCounts {
    pub fn idf1(&self) -> f64 {
        let denom = 2 * self.idtp + self.idfp + self.idfn;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.idtp as f64 / denom as f64
        }
    }
}

pub fn identity_counts(gt: &[LabeledBox], pred: &[LabeledBox]) -> IdentityCounts {
    let (gt, pred) = (Frames::new(gt), Frames::new(pred));
    let gt_ids: Vec<u64> = gt.counts_by_id().into_keys().collect();
    let pred_ids: Vec<u64> = pred.counts_by_id().into_keys().collect();
    let gi: BTreeMap<u64, usize> = gt_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let pi: BTreeMap<u64, usize> = pred_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let mut overlap = vec![vec![0usize; pred_ids.len()]; gt_ids.len()];
    for frame in all_frames(&gt, &pred) {
        for (gid, gbox) in gt.get(frame) {
            for (pid, pbox) in pred.get(frame) {
                if iou(gbox, pbox) >= MATCH_IOU {
                    overlap[gi[gid]][pi[pid]] += 1;
                }
            }
        }
    }
    let costs = CostMatrix::from_rows(
        &overlap
            .iter()
            .map(|row| row.iter().map(|&n| -(n as f64)).collect())
            .collect::<Vec<_>>(),
    );
    let idtp: usize = if gt_ids.is_empty() || pred_ids.is_empty() {
        0
    } else {
        solve_assignment(&costs).matches.iter().map(|&(g, p)| overlap[g][p]).sum()
    };
    IdentityCounts {
        idtp,
        idfp: pred.len() - idtp,
        idfn: gt.len() - idtp,
    }
}

pub fn idf1(gt: &[LabeledBox], pred: &[LabeledBox]) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::UndefinedMetric("IDF1 needs at least one ground-truth box"));
    }
    Ok(identity_counts(gt, pred).idf1())
}

/// Localization thresholds used by HOTA: 0.05, 0.10, ..., 0.95.
pub fn hota_alphas() -> impl Iterator<Item = f64> {
    (1..=19).map(|k| k as f64 / 20.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HotaScores {
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub det_re: f64,
    pub det_pr: f64,
}

/// HOTA sub-scores at a single localization threshold.
pub fn hota_at(gt: &[LabeledBox], pred: &[LabeledBox], alpha: f64) -> HotaScores {
    let (gt, pred) = (Frames::new(gt), Frames::new(pred));
    hota_frames(&gt, &pred, alpha)
}

fn hota_frames(gt: &Frames, pred: &Frames, alpha: f64) -> HotaScores {
    let mut pair_tp: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    let mut tp = 0usize;
    for frame in all_frames(gt, pred) {
        let (g, p) = (gt.get(frame), pred.get(frame));
        for (i, j) in match_by_iou(g, p, alpha) {
            *pair_tp.entry((g[i].0, p[j].0)).or_insert(0) += 1;
            tp += 1;
        }
    }
    let (n_gt, n_pred) = (gt.len(), pred.len());
    let fn_ = n_gt - tp;
    let fp = n_pred - tp;

    let gt_counts = gt.counts_by_id();
    let pred_counts = pred.counts_by_id();
    // every TP of pair (g, p) has the same score |TPA| / (|g| + |p| - |TPA|)
    let ass_sum: f64 = pair_tp
        .iter()
        .map(|(&(g, p), &n)| {
            let denom = gt_counts[&g] + pred_counts[&p] - n;
            n as f64 * (n as f64 / denom as f64)
        })
        .sum();

    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let det_a = ratio(tp, tp + fn_ + fp);
    let ass_a = if tp == 0 { 0.0 } else { ass_sum / tp as f64 };
    HotaScores {
        hota: (det_a * ass_a).sqrt(),
        det_a,
        ass_a,
        det_re: ratio(tp, tp + fn_),
        det_pr: ratio(tp, tp + fp),
    }
}

/// HOTA family averaged over the 19 localization thresholds.
pub fn hota(gt: &[LabeledBox], pred: &[LabeledBox]) -> Result<HotaScores> {
    if gt.is_empty() {
        return Err(Error::UndefinedMetric("HOTA needs at least one ground-truth box"));
    }
    let (gt, pred) = (Frames::new(gt), Frames::new(pred));
    let mut sum = HotaScores::default();
    let mut n = 0.0;
    for alpha in hota_alphas() {
        let s = hota_frames(&gt, &pred, alpha);
        sum.hota += s.hota;
        sum.det_a += s.det_a;
        sum.ass_a += s.ass_a;
        sum.det_re += s.det_re;
        sum.det_pr += s.det_pr;
        n += 1.0;
    }
    Ok(HotaScores {
        hota: sum.hota / n,
        det_a: sum.det_a / n,
        ass_a: sum.ass_a / n,
        det_re: sum.det_re / n,
        det_pr: sum.det_pr / n,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub hota: f64,
    pub mota: f64,
    pub idf1: f64,
    pub det_re: f64,
    pub det_pr: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub fn_count: usize,
    pub fp_count: usize,
    pub idsw_count: usize,
    pub frag_count: usize,
}

impl EvalReport {
    /// `metric = value` lines; rates with 5 decimals.
    pub fn to_report_string(&self) -> String {
        let mut out = String::new();
        for (name, v) in self.rates() {
            let _ = writeln!(out, "{name} = {v:.5}");
        }
        for (name, v) in self.counts() {
            let _ = writeln!(out, "{name} = {v}");
        }
        out
    }

    pub fn table_header() -> String {
        let names: Vec<&str> = Self::default()
            .rates()
            .iter()
            .map(|(n, _)| *n)
            .chain(Self::default().counts().iter().map(|(n, _)| *n))
            .collect();
        names.join(",")
    }

    pub fn table_row(&self) -> String {
        let rates = self.rates().into_iter().map(|(_, v)| format!("{v:.5}"));
        let counts = self.counts().into_iter().map(|(_, v)| v.to_string());
        rates.chain(counts).collect::<Vec<_>>().join(",")
    }

    fn rates(&self) -> [(&'static str, f64); 7] {
        [
            ("HOTA", self.hota),
            ("MOTA", self.mota),
            ("IDF1", self.idf1),
            ("DetRe", self.det_re),
            ("DetPr", self.det_pr),
            ("DetA", self.det_a),
            ("AssA", self.ass_a),
        ]
    }

    fn counts(&self) -> [(&'static str, usize); 4] {
        [
            ("FN", self.fn_count),
            ("FP", self.fp_count),
            ("IDSW", self.idsw_count),
            ("Frag", self.frag_count),
        ]
    }
}

/// Full evaluation of one sequence.
pub fn evaluate(gt: &[LabeledBox], pred: &[LabeledBox]) -> Result<EvalReport> {
    let clear = clear_counts(gt, pred);
    let mota = mota_from_counts(&clear)?;
    let h = hota(gt, pred)?;
    Ok(EvalReport {
        hota: h.hota,
        mota,
        idf1: idf1(gt, pred)?,
        det_re: h.det_re,
        det_pr: h.det_pr,
        det_a: h.det_a,
        ass_a: h.ass_a,
        fn_count: clear.false_negatives,
        fp_count: clear.false_positives,
        idsw_count: clear.id_switches,
        frag_count: clear.fragmentations,
    })
}

/// Equal-weight aggregate used as optimizer fitness: HOTA + MOTA + IDF1.
pub fn score(report: &EvalReport) -> f64 {
    report.hota + report.mota + report.idf1
}

/// Mean of every rate, sum of every count.
pub fn average_reports(reports: &[EvalReport]) -> Result<EvalReport> {
    if reports.is_empty() {
        return Err(Error::UndefinedMetric("cannot average an empty list of reports"));
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let sum = |f: fn(&EvalReport) -> usize| reports.iter().map(f).sum::<usize>();
    Ok(EvalReport {
        hota: mean(|r| r.hota),
        mota: mean(|r| r.mota),
        idf1: mean(|r| r.idf1),
        det_re: mean(|r| r.det_re),
        det_pr: mean(|r| r.det_pr),
        det_a: mean(|r| r.det_a),
        ass_a: mean(|r| r.ass_a),
        fn_count: sum(|r| r.fn_count),
        fp_count: sum(|r| r.fp_count),
        idsw_count: sum(|r| r.idsw_count),
        frag_count: sum(|r| r.frag_count),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lb(frame: u32, id: u64, left: f64) -> LabeledBox {
        LabeledBox {
            frame,
            id,
            bbox: BoundingBox::new(left, 0.0, 10.0, 10.0).unwrap(),
        }
    }

    /// One GT track at x=0 for frames 1..=n.
    fn single_track(n: u32) -> Vec<LabeledBox> {
        (1..=n).map(|f| lb(f, 1, 0.0)).collect()
    }

    #[test]
    fn identical_frame_matches_everything() {
        let g = vec![(1, BoundingBox::new(0., 0., 10., 10.).unwrap()), (2, BoundingBox::new(50., 0., 10., 10.).unwrap())];
        let r = clear_match(&g, &g, &BTreeMap::new());
        assert_eq!(r.matches, vec![(1, 1), (2, 2)]);
        assert_eq!((r.false_negatives, r.false_positives, r.id_switches), (0, 0, 0));
    }

    #[test]
    fn empty_predictions_are_misses() {
        let g: Vec<_> = (1..=3).map(|i| (i, BoundingBox::new(i as f64 * 50.0, 0., 10., 10.).unwrap())).collect();
        let r = clear_match(&g, &[], &BTreeMap::new());
        assert_eq!(r.false_negatives, 3);
    }

    #[test]
    fn swapped_ids_count_two_switches() {
        let mut gt = Vec::new();
        let mut pred = Vec::new();
        for f in 1..=10 {
            gt.push(lb(f, 1, 0.0));
            gt.push(lb(f, 2, 100.0));
            let (a, b) = if f <= 5 { (11, 12) } else { (12, 11) };
            pred.push(lb(f, a, 0.0));
            pred.push(lb(f, b, 100.0));
        }
        let c = clear_counts(&gt, &pred);
        assert_eq!(c.id_switches, 2);
        assert_eq!((c.false_negatives, c.false_positives), (0, 0));
        assert!((mota(&gt, &pred).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn mota_examples() {
        let gt = single_track(10);
        assert_eq!(mota(&gt, &gt).unwrap(), 1.0);
        let pred: Vec<_> = gt.iter().copied().filter(|e| e.frame != 4).collect();
        assert!((mota(&gt, &pred).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(mota(&gt, &[]).unwrap(), 0.0);
        assert!(mota(&[], &gt).is_err());
    }

    #[test]
    fn mota_drops_as_false_positives_are_added() {
        let gt = single_track(10);
        let mut pred = gt.clone();
        let mut prev = mota(&gt, &pred).unwrap();
        for f in 1..=10 {
            pred.push(lb(f, 99, 500.0));
            let m = mota(&gt, &pred).unwrap();
            assert!(m < prev);
            prev = m;
        }
    }

    #[test]
    fn split_track_idf1_and_hota() {
        let gt = single_track(10);
        let pred: Vec<_> = (1..=10).map(|f| lb(f, if f <= 5 { 7 } else { 8 }, 0.0)).collect();
        assert!((idf1(&gt, &pred).unwrap() - 0.5).abs() < 1e-12);
        let h = hota(&gt, &pred).unwrap();
        assert!((h.det_a - 1.0).abs() < 1e-12);
        assert!((h.ass_a - 0.5).abs() < 1e-12);
        assert!((h.hota - 0.5f64.sqrt()).abs() < 1e-9);
        for alpha in hota_alphas() {
            let s = hota_at(&gt, &pred, alpha);
            assert!((s.hota - 0.5f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let gt = single_track(6);
        assert_eq!(idf1(&gt, &gt).unwrap(), 1.0);
        let h = hota(&gt, &gt).unwrap();
        assert_eq!((h.hota, h.det_a, h.ass_a), (1.0, 1.0, 1.0));
        assert_eq!(idf1(&gt, &[]).unwrap(), 0.0);
        assert_eq!(hota(&gt, &[]).unwrap().hota, 0.0);
        assert!(idf1(&[], &gt).is_err());
        assert!(hota(&[], &gt).is_err());
    }

    #[test]
    fn fragmentation_examples() {
        let gt = single_track(20);
        assert_eq!(fragmentation_count(&gt, &gt), 0);
        let gap: Vec<_> = gt.iter().copied().filter(|e| !(8..=10).contains(&e.frame)).collect();
        assert_eq!(fragmentation_count(&gt, &gap), 1);
        let gaps: Vec<_> = gap.iter().copied().filter(|e| !(14..=15).contains(&e.frame)).collect();
        assert_eq!(fragmentation_count(&gt, &gaps), 2);
    }

    #[test]
    fn score_examples() {
        let r = EvalReport {
            hota: 0.68,
            mota: 0.98,
            idf1: 0.98,
            ..Default::default()
        };
        assert!((score(&r) - 2.64).abs() < 1e-12);
        assert_eq!(score(&EvalReport::default()), 0.0);
        let gt = single_track(4);
        assert_eq!(score(&evaluate(&gt, &gt).unwrap()), 3.0);
    }

    #[test]
    fn averaging() {
        let a = EvalReport {
            mota: 0.8,
            idsw_count: 2,
            ..Default::default()
        };
        let b = EvalReport {
            mota: 1.0,
            idsw_count: 3,
            ..Default::default()
        };
        assert_eq!(average_reports(std::slice::from_ref(&a)).unwrap(), a);
        let ab = average_reports(&[a.clone(), b.clone()]).unwrap();
        assert!((ab.mota - 0.9).abs() < 1e-12);
        assert_eq!(ab.idsw_count, 5);
        assert_eq!(ab, average_reports(&[b, a]).unwrap());
        assert!(average_reports(&[]).is_err());
    }

    #[test]
    fn relabeling_predictions_does_not_change_identity_metrics() {
        let mut gt = Vec::new();
        let mut pred = Vec::new();
        for f in 1..=8 {
            gt.push(lb(f, 1, 0.0));
            gt.push(lb(f, 2, 100.0));
            pred.push(lb(f, if f < 4 { 5 } else { 6 }, 0.0));
            pred.push(lb(f, 7, 102.0));
        }
        let relabeled: Vec<_> = pred.iter().map(|e| LabeledBox { id: 100 - e.id, ..*e }).collect();
        assert_eq!(idf1(&gt, &pred).unwrap(), idf1(&gt, &relabeled).unwrap());
        assert_eq!(hota(&gt, &pred).unwrap(), hota(&gt, &relabeled).unwrap());
    }

    #[test]
    fn report_formats() {
        let gt = single_track(3);
        let r = evaluate(&gt, &gt).unwrap();
        let text = r.to_report_string();
        assert!(text.starts_with("HOTA = 1.00000\nMOTA = 1.00000\nIDF1 = 1.00000\n"), "{text}");
        assert!(text.ends_with("FN = 0\nFP = 0\nIDSW = 0\nFrag = 0\n"));
        assert_eq!(EvalReport::table_header(), "HOTA,MOTA,IDF1,DetRe,DetPr,DetA,AssA,FN,FP,IDSW,Frag");
        assert_eq!(r.table_row(), "1.00000,1.00000,1.00000,1.00000,1.00000,1.00000,1.00000,0,0,0,0");
    }
}
