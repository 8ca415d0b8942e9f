// SPDX-License-Identifier: Apache-2.0

//! Exhaustive `(alpha, C)` search maximizing `TPR - FPR`.
//!
//! Discriminants are computed once per frame; each cell only re-squashes them,
//! fuses and scores. Cells are independent and evaluated in parallel. Ties are
//! broken toward the larger `C`, then the larger `alpha`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{detection_metrics, FrameDetections, MetricsConfig, TruthObject};
use super::{fuse_frame, Detection, FusionConfig, FuzzySystem, Source};
use crate::classifier::{pseudo_confidence, SigmoidConfig};
use crate::error::{Error, Result};

pub const DEFAULT_ALPHAS: [f64; 9] = [
    1.0 / 100.0,
    1.0 / 500.0,
    1.0 / 1_000.0,
    1.0 / 5_000.0,
    1.0 / 10_000.0,
    1.0 / 50_000.0,
    1.0 / 100_000.0,
    1.0 / 500_000.0,
    1.0 / 1_000_000.0,
];

pub const DEFAULT_CS: [f64; 10] = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];

/// A LiDAR cluster declared a beacon, before confidence squashing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarCandidate {
    pub distance: f64,
    pub angle: f64,
    pub discriminant: f64,
}

impl LidarCandidate {
    pub fn detection(&self, sigmoid: &SigmoidConfig) -> Detection {
        Detection::new(
            self.distance,
            self.angle,
            pseudo_confidence(self.discriminant, sigmoid),
            Source::Lidar,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub frame_id: u64,
    pub lidar: Vec<LidarCandidate>,
    pub camera: Vec<Detection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub alpha: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub ks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub alphas: Vec<f64>,
    pub cs: Vec<f64>,
    /// Row-major over `alphas` then `cs`.
    pub cells: Vec<GridCell>,
    pub best: GridCell,
}

impl GridResult {
    pub fn cell(&self, ai: usize, ci: usize) -> &GridCell {
        &self.cells[ai * self.cs.len() + ci]
    }
}

/// `true` when `a` should be preferred over `b`.
pub fn better(a: &GridCell, b: &GridCell) -> bool {
    (a.ks, a.c, a.alpha) > (b.ks, b.c, b.alpha)
}

pub fn evaluate_cell(
    frames: &[GridFrame],
    truth: &[TruthObject],
    base: &FusionConfig,
    system: &FuzzySystem,
    metrics: &MetricsConfig,
    alpha: f64,
    c: f64,
) -> Result<GridCell> {
    let cfg = FusionConfig {
        alpha,
        confidence_threshold: c,
        ..*base
    };
    let sigmoid = cfg.sigmoid();
    let fused: Vec<FrameDetections> = frames
        .iter()
        .map(|f| {
            let lidar: Vec<Detection> = f.lidar.iter().map(|l| l.detection(&sigmoid)).collect();
            FrameDetections {
                frame_id: f.frame_id,
                detections: fuse_frame(&f.camera, &lidar, &cfg, system),
            }
        })
        .collect();
    let m = detection_metrics(&fused, truth, metrics, None)?;
    Ok(GridCell {
        alpha,
        c,
        tpr: m.tpr,
        fpr: m.fpr,
        ks: m.tpr - m.fpr,
    })
}

pub fn grid_search(
    frames: &[GridFrame],
    truth: &[TruthObject],
    alphas: &[f64],
    cs: &[f64],
    base: &FusionConfig,
    system: &FuzzySystem,
    metrics: &MetricsConfig,
) -> Result<GridResult> {
    if alphas.is_empty() || cs.is_empty() {
        return Err(Error::config("grid search needs at least one alpha and one C"));
    }
    if alphas.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::config("grid alphas must be positive"));
    }
    let coords: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| cs.iter().map(move |&c| (a, c))).collect();
    let cells = coords
        .par_iter()
        .map(|&(a, c)| evaluate_cell(frames, truth, base, system, metrics, a, c))
        .collect::<Result<Vec<_>>>()?;
    let mut best = cells[0];
    for cell in &cells[1..] {
        if better(cell, &best) {
            best = *cell;
        }
    }
    Ok(GridResult {
        alphas: alphas.to_vec(),
        cs: cs.to_vec(),
        cells,
        best,
    })
}
