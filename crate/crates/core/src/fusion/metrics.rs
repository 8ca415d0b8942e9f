// SPDX-License-Identifier: Apache-2.0

//! Detection scoring against labeled truth.
//!
//! Within a frame, detections and truth objects are paired greedily by
//! ascending xy distance, one-to-one, inside the distance gate. A detection
//! paired with a beacon is a true positive; any other detection is a false
//! positive. Unpaired beacons are false negatives and unpaired non-beacons are
//! true negatives.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Detection;
use crate::error::{Error, Result};
use crate::simulator::ObjectKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthObject {
    pub frame_id: u64,
    pub object_id: u64,
    pub kind: ObjectKind,
    #[serde(rename = "dist_m")]
    pub distance: f64,
    #[serde(rename = "angle_deg")]
    pub angle: f64,
}

impl TruthObject {
    pub fn xy(&self) -> [f64; 2] {
        let a = self.angle.to_radians();
        [self.distance * a.cos(), self.distance * a.sin()]
    }

    pub fn is_beacon(&self) -> bool {
        self.kind == ObjectKind::Beacon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDetections {
    pub frame_id: u64,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Maximum detection-to-truth xy distance for a match (meters).
    pub gate: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { gate: 1.0 }
    }
}

/// Half-open range band `[min, max)` in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub min: f64,
    pub max: f64,
}

impl Band {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, d: f64) -> bool {
        d >= self.min && d < self.max
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub counts: Counts,
    pub tpr: f64,
    /// Zero when there are no negatives.
    pub fpr: f64,
    pub fnr: f64,
    /// Mean xy error over true positives, `None` when there are none.
    pub mean_position_error: Option<f64>,
}

/// Per-frame pairing: `det_match[i]` is the truth index paired with
/// detection `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameMatch {
    pub det_match: Vec<Option<usize>>,
    pub truth_matched: Vec<bool>,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn match_frame(dets: &[Detection], truth: &[&TruthObject], gate: f64) -> FrameMatch {
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (i, d) in dets.iter().enumerate() {
        let p = d.xy();
        for (j, t) in truth.iter().enumerate() {
            let e = dist(p, t.xy());
            if e <= gate {
                cand.push((e, i, j));
            }
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_match = vec![None; dets.len()];
    let mut truth_matched = vec![false; truth.len()];
    for (_, i, j) in cand {
        if det_match[i].is_none() && !truth_matched[j] {
            det_match[i] = Some(j);
            truth_matched[j] = true;
        }
    }
    FrameMatch { det_match, truth_matched }
}

/// Scores `frames` against `truth`. With a `band`, true positives, false
/// negatives and true negatives are attributed by truth distance and false
/// positives by detection distance.
pub fn detection_metrics(
    frames: &[FrameDetections],
    truth: &[TruthObject],
    cfg: &MetricsConfig,
    band: Option<Band>,
) -> Result<DetectionMetrics> {
    let mut by_frame: BTreeMap<u64, Vec<&TruthObject>> = BTreeMap::new();
    for t in truth {
        by_frame.entry(t.frame_id).or_default().push(t);
    }
    let in_band = |d: f64| band.is_none_or(|b| b.contains(d));

    let mut counts = Counts::default();
    let mut err_sum = 0.0;
    let empty = Vec::new();
    for frame in frames {
        let objs = by_frame.get(&frame.frame_id).unwrap_or(&empty);
        let m = match_frame(&frame.detections, objs, cfg.gate);
        let mut c = Counts::default();
        for (d, matched) in frame.detections.iter().zip(&m.det_match) {
            match matched {
                Some(j) if objs[*j].is_beacon() => {
                    if in_band(objs[*j].distance) {
                        c.tp += 1;
                        err_sum += dist(d.xy(), objs[*j].xy());
                    }
                }
                _ => {
                    if in_band(d.distance) {
                        c.fp += 1;
                    }
                }
            }
        }
        for (t, hit) in objs.iter().zip(&m.truth_matched) {
            if !hit && in_band(t.distance) {
                if t.is_beacon() {
                    c.fn_ += 1;
                } else {
                    c.tn += 1;
                }
            }
        }
        counts.add(&c);
    }

    let pos = counts.tp + counts.fn_;
    if pos == 0 {
        return Err(Error::InsufficientData("no beacons in truth; TPR is undefined".into()));
    }
    let tpr = counts.tp as f64 / pos as f64;
    let neg = counts.fp + counts.tn;
    let fpr = if neg == 0 { 0.0 } else { counts.fp as f64 / neg as f64 };
    Ok(DetectionMetrics {
        counts,
        tpr,
        fpr,
        fnr: counts.fn_ as f64 / pos as f64,
        mean_position_error: (counts.tp > 0).then(|| err_sum / counts.tp as f64),
    })
}
