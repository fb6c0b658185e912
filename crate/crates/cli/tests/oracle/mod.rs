//! Brute-force reference implementations. Slow and deliberately naive.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use mttsort::{BoundingBox, LabeledBox};

pub type Dense = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn eye(n: usize) -> Dense {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mul(a: &Dense, b: &Dense) -> Dense {
    let mut out = zeros(a.len(), b[0].len());
    for i in 0..a.len() {
        for j in 0..b[0].len() {
            for k in 0..b.len() {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn transpose(a: &Dense) -> Dense {
    let mut out = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            out[j][i] = x;
        }
    }
    out
}

pub fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn sub(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect())
        .collect()
}

pub fn diag(values: &[f64]) -> Dense {
    let mut m = zeros(values.len(), values.len());
    for (i, &v) in values.iter().enumerate() {
        m[i][i] = v;
    }
    m
}

pub fn column(v: &[f64]) -> Dense {
    v.iter().map(|&x| vec![x]).collect()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        assert!(p != 0.0, "singular matrix");
        for x in m[col].iter_mut() {
            *x /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                let pivot_row = m[col].clone();
                for (x, y) in m[r].iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Constant-velocity transition over `(cx, cy, a, h, vcx, vcy, va, vh)`.
pub fn transition() -> Dense {
    let mut f = eye(8);
    for i in 0..4 {
        f[i][i + 4] = 1.0;
    }
    f
}

pub fn observation() -> Dense {
    let mut h = zeros(4, 8);
    for i in 0..4 {
        h[i][i] = 1.0;
    }
    h
}

pub fn process_noise(h: f64) -> Dense {
    let (p, v) = (h / 20.0, h / 160.0);
    diag(&[p * p, p * p, 1e-4, p * p, v * v, v * v, 1e-10, v * v])
}

pub fn measurement_noise(h: f64) -> Dense {
    let p = h / 20.0;
    diag(&[p * p, p * p, 1e-2, p * p])
}

pub fn kf_predict(x: &[f64], p: &Dense) -> (Vec<f64>, Dense) {
    let f = transition();
    let x_new = mul(&f, &column(x)).into_iter().map(|r| r[0]).collect();
    let p_new = add(&mul(&mul(&f, p), &transpose(&f)), &process_noise(x[3]));
    (x_new, p_new)
}

/// Textbook update: `K = P Hᵀ S⁻¹`, `x' = x + K (z - H x)`, `P' = (I - K H) P`.
pub fn kf_update(x: &[f64], p: &Dense, z: &[f64]) -> (Vec<f64>, Dense) {
    let h = observation();
    let s = add(&mul(&mul(&h, p), &transpose(&h)), &measurement_noise(x[3]));
    let k = mul(&mul(p, &transpose(&h)), &inverse(&s));
    let hx = mul(&h, &column(x));
    let innovation: Vec<f64> = z.iter().zip(&hx).map(|(a, b)| a - b[0]).collect();
    let dx = mul(&k, &column(&innovation));
    let x_new = x.iter().zip(&dx).map(|(a, b)| a + b[0]).collect();
    let p_new = mul(&sub(&eye(8), &mul(&k, &h)), p);
    (x_new, p_new)
}

pub fn kf_gating(x: &[f64], p: &Dense, z: &[f64]) -> f64 {
    let h = observation();
    let s = add(&mul(&mul(&h, p), &transpose(&h)), &measurement_noise(x[3]));
    let hx = mul(&h, &column(x));
    let d: Vec<f64> = z.iter().zip(&hx).map(|(a, b)| a - b[0]).collect();
    let sd = mul(&inverse(&s), &column(&d));
    d.iter().zip(&sd).map(|(a, b)| a * b[0]).sum()
}

/// Every injective partial map from `0..n` into `0..m`, as `Option<col>` per row.
pub fn partial_injections(n: usize, m: usize) -> Vec<Vec<Option<usize>>> {
    fn go(row: usize, n: usize, used: &mut Vec<bool>, cur: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>) {
        if row == n {
            out.push(cur.clone());
            return;
        }
        cur.push(None);
        go(row + 1, n, used, cur, out);
        cur.pop();
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                cur.push(Some(c));
                go(row + 1, n, used, cur, out);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(0, n, &mut vec![false; m], &mut Vec::new(), &mut out);
    out
}

/// Best `(pairs, summed cost)` over all matchings using only finite entries.
pub fn brute_assignment(costs: &[Vec<f64>]) -> (usize, f64) {
    let n = costs.len();
    let m = costs.first().map_or(0, Vec::len);
    let mut best = (0usize, 0.0f64);
    for map in partial_injections(n, m) {
        let mut count = 0;
        let mut total = 0.0;
        let mut ok = true;
        for (r, c) in map.iter().enumerate() {
            if let Some(c) = c {
                if !costs[r][*c].is_finite() {
                    ok = false;
                    break;
                }
                count += 1;
                total += costs[r][*c];
            }
        }
        if ok && (count > best.0 || (count == best.0 && total < best.1)) {
            best = (count, total);
        }
    }
    best
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.left + a.width).min(b.left + b.width) - a.left.max(b.left);
    let h = (a.top + a.height).min(b.top + b.height) - a.top.max(b.top);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    inter / (a.width * a.height + b.width * b.height - inter)
}

fn frames_of(gt: &[LabeledBox], pred: &[LabeledBox]) -> Vec<u32> {
    let mut f: Vec<u32> = gt.iter().chain(pred).map(|b| b.frame).collect();
    f.sort_unstable();
    f.dedup();
    f
}

fn in_frame(boxes: &[LabeledBox], frame: u32) -> Vec<&LabeledBox> {
    let mut v: Vec<&LabeledBox> = boxes.iter().filter(|b| b.frame == frame).collect();
    v.sort_by_key(|b| b.id);
    v
}

/// Max-count, max-IoU matching by enumeration. `None` when the optimum is not unique.
pub fn unique_best_matching(g: &[&LabeledBox], p: &[&LabeledBox], threshold: f64) -> Option<Vec<(usize, usize)>> {
    let mut best: Option<(usize, f64)> = None;
    let mut winners: Vec<Vec<(usize, usize)>> = Vec::new();
    for map in partial_injections(g.len(), p.len()) {
        let pairs: Vec<(usize, usize)> = map.iter().enumerate().filter_map(|(i, c)| c.map(|c| (i, c))).collect();
        let overlaps: Vec<f64> = pairs.iter().map(|&(i, j)| iou(&g[i].bbox, &p[j].bbox)).collect();
        if overlaps.iter().any(|&o| o < threshold) {
            continue;
        }
        let key = (pairs.len(), overlaps.iter().sum::<f64>());
        match best {
            Some((c, s)) if key.0 < c || (key.0 == c && key.1 < s - 1e-12) => {}
            Some((c, s)) if key.0 == c && (key.1 - s).abs() <= 1e-12 => winners.push(pairs),
            _ => {
                best = Some(key);
                winners = vec![pairs];
            }
        }
    }
    (winners.len() == 1).then(|| winners.pop().unwrap())
}

/// Max over all global GT-id to predicted-id maps of co-located (IoU >= 0.5) boxes.
pub fn brute_idtp(gt: &[LabeledBox], pred: &[LabeledBox]) -> usize {
    let ids = |v: &[LabeledBox]| {
        let mut ids: Vec<u64> = v.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    let (gids, pids) = (ids(gt), ids(pred));
    let mut best = 0;
    for map in partial_injections(gids.len(), pids.len()) {
        let mut tp = 0;
        for g in gt {
            let gi = gids.iter().position(|&x| x == g.id).unwrap();
            if let Some(pi) = map[gi] {
                tp += pred
                    .iter()
                    .filter(|p| p.frame == g.frame && p.id == pids[pi] && iou(&g.bbox, &p.bbox) >= 0.5)
                    .count();
            }
        }
        best = best.max(tp);
    }
    best
}

/// Association accuracy and detection accuracy at one threshold, computed per TP.
pub fn brute_hota_at(gt: &[LabeledBox], pred: &[LabeledBox], alpha: f64) -> Option<(f64, f64)> {
    let mut tps: Vec<(u64, u64)> = Vec::new();
    for frame in frames_of(gt, pred) {
        let (g, p) = (in_frame(gt, frame), in_frame(pred, frame));
        for (i, j) in unique_best_matching(&g, &p, alpha)? {
            tps.push((g[i].id, p[j].id));
        }
    }
    let det_a = tps.len() as f64 / (gt.len() + pred.len() - tps.len()) as f64;
    if tps.is_empty() {
        return Some((det_a, 0.0));
    }
    let mut sum = 0.0;
    for &(g, p) in &tps {
        let tpa = tps.iter().filter(|&&c| c == (g, p)).count();
        let fna = gt.iter().filter(|b| b.id == g).count() - tpa;
        let fpa = pred.iter().filter(|b| b.id == p).count() - tpa;
        sum += tpa as f64 / (tpa + fna + fpa) as f64;
    }
    Some((det_a, sum / tps.len() as f64))
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct Clear {
    pub matches: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub id_switches: usize,
    pub fragmentations: usize,
}

/// CLEAR-MOT bookkeeping by hand: keep last correspondences, match the rest optimally.
pub fn brute_clear(gt: &[LabeledBox], pred: &[LabeledBox]) -> Option<Clear> {
    let mut last: BTreeMap<u64, u64> = BTreeMap::new();
    let mut status: BTreeMap<u64, (bool, bool)> = BTreeMap::new();
    let mut out = Clear::default();
    for frame in frames_of(gt, pred) {
        let (g, p) = (in_frame(gt, frame), in_frame(pred, frame));
        let mut pairs: Vec<(u64, u64)> = Vec::new();
        let mut p_taken = vec![false; p.len()];
        let mut g_taken = vec![false; g.len()];
        for (i, gb) in g.iter().enumerate() {
            if let Some(&prev) = last.get(&gb.id) {
                if let Some(j) = p.iter().position(|pb| pb.id == prev) {
                    if !p_taken[j] && iou(&gb.bbox, &p[j].bbox) >= 0.5 {
                        p_taken[j] = true;
                        g_taken[i] = true;
                        pairs.push((gb.id, prev));
                    }
                }
            }
        }
        let g_rest: Vec<&LabeledBox> = g.iter().zip(&g_taken).filter(|(_, &t)| !t).map(|(b, _)| *b).collect();
        let p_rest: Vec<&LabeledBox> = p.iter().zip(&p_taken).filter(|(_, &t)| !t).map(|(b, _)| *b).collect();
        for (i, j) in unique_best_matching(&g_rest, &p_rest, 0.5)? {
            let (gid, pid) = (g_rest[i].id, p_rest[j].id);
            if last.get(&gid).is_some_and(|&prev| prev != pid) {
                out.id_switches += 1;
            }
            pairs.push((gid, pid));
        }
        out.matches += pairs.len();
        out.false_negatives += g.len() - pairs.len();
        out.false_positives += p.len() - pairs.len();
        for gb in &g {
            let matched = pairs.iter().any(|&(x, _)| x == gb.id);
            let s = status.entry(gb.id).or_insert((false, false));
            if matched && !s.0 && s.1 {
                out.fragmentations += 1;
            }
            *s = (matched, s.1 || matched);
        }
        for (gid, pid) in pairs {
            last.insert(gid, pid);
        }
    }
    Some(out)
}
