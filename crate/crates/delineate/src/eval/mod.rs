//! Evaluation: tolerance-based boundary precision/recall, the connectivity
//! measure `C`, the combined `F1C`, patch-level PR curves, and the
//! skeleton-of-thresholded-segmentation baseline.
//!
//! `C` measures how much of each ground-truth component is covered by its
//! single best-matching predicted component, weighted by component size:
//! fragmented coverage lowers `C` even at high recall. `F1C` is the harmonic
//! mean of precision and `C`.

mod thin;

pub use thin::skeletonize;

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::netgraph::{NetworkGraph, SkeletonRaster};
use crate::patchgt::Heatmap;
use crate::predictor::extract_peaks;
use crate::tracer::ConfidenceMap;

/// One-to-one pixel matching between a predicted and a ground-truth skeleton.
#[derive(Debug, Clone)]
pub struct Matching {
    /// Accepted `(pred_pixel, gt_pixel)` pairs in greedy acceptance order.
    pub pairs: Vec<((i32, i32), (i32, i32))>,
    pub unmatched_pred: Vec<(i32, i32)>,
    pub unmatched_gt: Vec<(i32, i32)>,
    pub tolerance: f64,
}

/// Metric report. Scalar fields live in `[0, 1]`; CLI output scales by 100.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "F1R")]
    pub f1_r: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "F1C")]
    pub f1_c: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tolerance_px: f64,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialization cannot fail")
    }
}

/// Maximal one-to-one matching between skeleton pixels at Euclidean distance
/// `<= d`, built greedily by increasing pair distance. Ties resolve to the
/// smaller pred pixel (y, then x), then the smaller gt pixel.
pub fn match_skeletons(pred: &SkeletonRaster, gt: &SkeletonRaster, d: f64) -> Result<Matching> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(Error::DimensionMismatch {
            left: format!("{}x{}", pred.width, pred.height),
            right: format!("{}x{}", gt.width, gt.height),
        });
    }
    if d < 0.0 || !d.is_finite() {
        return Err(Error::InvalidParameter(format!("tolerance {d}")));
    }
    let pred_px: Vec<(i32, i32)> = pred.iter_set().collect();
    let gt_px: Vec<(i32, i32)> = gt.iter_set().collect();

    // bucket gt pixels for radius queries
    let cell = d.ceil().max(1.0) as i64;
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &(x, y)) in gt_px.iter().enumerate() {
        buckets
            .entry((x as i64 / cell, y as i64 / cell))
            .or_default()
            .push(i);
    }

    let d2_limit = d * d;
    // (d2, pred_y, pred_x, gt_y, gt_x, pred_idx, gt_idx)
    let mut candidates: Vec<(i64, i32, i32, i32, i32, usize, usize)> = Vec::new();
    for (pi, &(px, py)) in pred_px.iter().enumerate() {
        let (bx, by) = (px as i64 / cell, py as i64 / cell);
        for cy in by - 1..=by + 1 {
            for cx in bx - 1..=bx + 1 {
                let Some(list) = buckets.get(&(cx, cy)) else {
                    continue;
                };
                for &gi in list {
                    let (gx, gy) = gt_px[gi];
                    let d2 = ((px - gx) as i64).pow(2) + ((py - gy) as i64).pow(2);
                    if d2 as f64 <= d2_limit {
                        candidates.push((d2, py, px, gy, gx, pi, gi));
                    }
                }
            }
        }
    }
    candidates.sort_unstable_by_key(|c| (c.0, c.1, c.2, c.3, c.4));

    let mut pred_used = vec![false; pred_px.len()];
    let mut gt_used = vec![false; gt_px.len()];
    let mut pairs = Vec::new();
    for (_, _, _, _, _, pi, gi) in candidates {
        if pred_used[pi] || gt_used[gi] {
            continue;
        }
        pred_used[pi] = true;
        gt_used[gi] = true;
        pairs.push((pred_px[pi], gt_px[gi]));
    }
    let unmatched_pred = pred_px
        .iter()
        .zip(&pred_used)
        .filter(|(_, &u)| !u)
        .map(|(&p, _)| p)
        .collect();
    let unmatched_gt = gt_px
        .iter()
        .zip(&gt_used)
        .filter(|(_, &u)| !u)
        .map(|(&p, _)| p)
        .collect();
    Ok(Matching {
        pairs,
        unmatched_pred,
        unmatched_gt,
        tolerance: d,
    })
}

/// `(P, R, F1R)` with the empty-prediction convention `P = 1` (vacuous).
pub fn precision_recall(m: &Matching) -> (f64, f64, f64) {
    let tp = m.pairs.len() as f64;
    let fp = m.unmatched_pred.len() as f64;
    let fn_ = m.unmatched_gt.len() as f64;
    let p = if tp + fp == 0.0 { 1.0 } else { tp / (tp + fp) };
    let r = if tp + fn_ == 0.0 { 0.0 } else { tp / (tp + fn_) };
    (p, r, f_measure(p, r))
}

/// Connectivity `C`: per ground-truth component, the fraction covered by the
/// largest single predicted component among its matched pixels, weighted by
/// component size.
pub fn connectivity(m: &Matching, pred: &SkeletonRaster, gt: &SkeletonRaster) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let gt_labels = label_components(gt);
    let pred_labels = label_components(pred);
    // (gt component, pred component) -> matched pixel count
    let mut groups: HashMap<(u32, u32), usize> = HashMap::new();
    for &(pp, gp) in &m.pairs {
        let gl = gt_labels.label_at(gp.0, gp.1);
        let pl = pred_labels.label_at(pp.0, pp.1);
        debug_assert!(gl != 0 && pl != 0);
        *groups.entry((gl, pl)).or_insert(0) += 1;
    }
    let mut largest: HashMap<u32, usize> = HashMap::new();
    for ((gl, _), n) in groups {
        let e = largest.entry(gl).or_insert(0);
        *e = (*e).max(n);
    }
    let total_gt: usize = gt.count();
    let covered: usize = largest.values().sum();
    Ok(covered as f64 / total_gt as f64)
}

/// Harmonic mean, defined as 0 when both inputs are 0.
pub fn f_measure(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Full report for a predicted skeleton against a ground-truth skeleton.
pub fn evaluate_skeletons(
    pred: &SkeletonRaster,
    gt: &SkeletonRaster,
    d: f64,
) -> Result<EvalReport> {
    let m = match_skeletons(pred, gt, d)?;
    let (p, r, f1_r) = precision_recall(&m);
    let c = connectivity(&m, pred, gt)?;
    Ok(EvalReport {
        p,
        r,
        f1_r,
        c,
        f1_c: f_measure(p, c),
        tp: m.pairs.len(),
        fp: m.unmatched_pred.len(),
        fn_: m.unmatched_gt.len(),
        tolerance_px: d,
    })
}

/// Skeleton baseline: binarize a confidence map at `level/255`, thin it, and
/// evaluate against the rasterized ground-truth graph.
pub fn baseline_eval(
    conf: &ConfidenceMap,
    level: u8,
    gt: &NetworkGraph,
    d: f64,
) -> Result<EvalReport> {
    if conf.width != gt.width || conf.height != gt.height {
        return Err(Error::DimensionMismatch {
            left: format!("{}x{}", conf.width, conf.height),
            right: format!("{}x{}", gt.width, gt.height),
        });
    }
    let skel = skeletonize(&conf.binarize(level as f32 / 255.0));
    let gt_raster = gt.rasterize(None);
    evaluate_skeletons(&skel, &gt_raster, d)
}

/// A point on a patch-level precision-recall curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PrPoint {
    pub threshold: f32,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

#[derive(Debug, Clone)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    /// The point with the highest F; ties go to the lowest threshold.
    pub best: Option<PrPoint>,
}

impl PrCurve {
    /// One `threshold P R F` line per evaluated threshold.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            out.push_str(&format!(
                "{:.6} {:.6} {:.6} {:.6}\n",
                p.threshold, p.precision, p.recall, p.f
            ));
        }
        out
    }
}

/// Patch-level detection PR curve: extract peaks per threshold, match
/// detections one-to-one to ground-truth points within `match_radius`, and
/// aggregate counts over all patches.
pub fn patch_pr_curve(
    heatmaps: &[Heatmap],
    gt_point_sets: &[Vec<Point>],
    match_radius: f64,
    thresholds: &[f32],
    nms_radius: i32,
) -> Result<PrCurve> {
    if heatmaps.len() != gt_point_sets.len() {
        return Err(Error::DimensionMismatch {
            left: format!("{} heatmaps", heatmaps.len()),
            right: format!("{} ground-truth sets", gt_point_sets.len()),
        });
    }
    let mut points = Vec::with_capacity(thresholds.len());
    for &theta in thresholds {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (h, gts) in heatmaps.iter().zip(gt_point_sets) {
            let dets = extract_peaks(h, theta, nms_radius);
            let matched = match_points(&dets, gts, match_radius);
            tp += matched;
            fp += dets.len() - matched;
            fn_ += gts.len() - matched;
        }
        let p = if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let r = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        points.push(PrPoint {
            threshold: theta,
            precision: p,
            recall: r,
            f: f_measure(p, r),
        });
    }
    let best = points
        .iter()
        .copied()
        .reduce(|best, p| if p.f > best.f { p } else { best });
    Ok(PrCurve { points, best })
}

/// Greedy one-to-one matching count between detections and target points.
fn match_points(dets: &[crate::predictor::Peak], gts: &[Point], radius: f64) -> usize {
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (di, det) in dets.iter().enumerate() {
        let dp = Point::new(det.x as f64, det.y as f64);
        for (gi, g) in gts.iter().enumerate() {
            let dist = dp.dist(*g);
            if dist <= radius {
                cands.push((dist, di, gi));
            }
        }
    }
    cands.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
    });
    let mut det_used = vec![false; dets.len()];
    let mut gt_used = vec![false; gts.len()];
    let mut n = 0;
    for (_, di, gi) in cands {
        if !det_used[di] && !gt_used[gi] {
            det_used[di] = true;
            gt_used[gi] = true;
            n += 1;
        }
    }
    n
}

/// 8-connected component labels; 0 is background, labels start at 1 in
/// row-major first-encounter order.
pub struct ComponentLabels {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u32>,
    pub count: usize,
}

impl ComponentLabels {
    pub fn label_at(&self, x: i32, y: i32) -> u32 {
        if x < 0 || y < 0 || x >= self.width as i32 || y >= self.height as i32 {
            return 0;
        }
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// Pixel count per label (index 0 unused).
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.count + 1];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

/// Label 8-connected foreground components with an explicit flood-fill stack.
pub fn label_components(raster: &SkeletonRaster) -> ComponentLabels {
    let w = raster.width as i32;
    let h = raster.height as i32;
    let mut labels = vec![0u32; (w * h) as usize];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !raster.get(x, y) || labels[(y * w + x) as usize] != 0 {
                continue;
            }
            next += 1;
            labels[(y * w + x) as usize] = next;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (cx + dx, cy + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let idx = (ny * w + nx) as usize;
                        if raster.get(nx, ny) && labels[idx] == 0 {
                            labels[idx] = next;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
        }
    }
    ComponentLabels {
        width: raster.width,
        height: raster.height,
        labels,
        count: next as usize,
    }
}

/// RGB overlay: true positives green, false positives blue, false negatives
/// red, black background.
pub fn render_overlay(m: &Matching, width: u32, height: u32) -> Vec<u8> {
    let mut rgb = vec![0u8; width as usize * height as usize * 3];
    let mut paint = |p: (i32, i32), color: [u8; 3]| {
        if p.0 < 0 || p.1 < 0 || p.0 >= width as i32 || p.1 >= height as i32 {
            return;
        }
        let i = (p.1 as usize * width as usize + p.0 as usize) * 3;
        rgb[i..i + 3].copy_from_slice(&color);
    };
    for &(pp, gp) in &m.pairs {
        paint(pp, [0, 255, 0]);
        paint(gp, [0, 255, 0]);
    }
    for &p in &m.unmatched_pred {
        paint(p, [0, 0, 255]);
    }
    for &p in &m.unmatched_gt {
        paint(p, [255, 0, 0]);
    }
    rgb
}
