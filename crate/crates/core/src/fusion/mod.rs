// SPDX-License-Identifier: Apache-2.0

//! Camera/LiDAR detection fusion.
//!
//! Camera detections drive the association: each one claims the still
//! unmatched LiDAR detection with the nearest azimuth, provided the angular
//! gap is below the threshold. Matched pairs keep the LiDAR position and get a
//! fuzzy-combined confidence; everything else passes through. Detections under
//! the confidence threshold are dropped last.

pub mod fuzzy;
pub mod grid;
pub mod metrics;

use serde::{Deserialize, Serialize};

use crate::classifier::SigmoidConfig;
use crate::error::{Error, Result};

pub use fuzzy::{fuzzy_fuse, FuzzySystem, Membership};
pub use grid::{grid_search, GridCell, GridFrame, GridResult, LidarCandidate, DEFAULT_ALPHAS, DEFAULT_CS};
pub use metrics::{
    detection_metrics, match_frame, Band, Counts, DetectionMetrics, FrameDetections, FrameMatch, MetricsConfig, TruthObject,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Lidar,
    Camera,
    Fused,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Lidar => "lidar",
            Source::Camera => "camera",
            Source::Fused => "fused",
        }
    }
}

impl std::str::FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lidar" => Ok(Source::Lidar),
            "camera" => Ok(Source::Camera),
            "fused" => Ok(Source::Fused),
            other => Err(Error::invalid(format!("unknown detection source {other:?}"))),
        }
    }
}

/// Polar detection in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Meters.
    pub distance: f64,
    /// Degrees, positive to the left.
    pub angle: f64,
    /// In `[0, 1]`.
    pub confidence: f64,
    pub source: Source,
}

impl Detection {
    pub fn new(distance: f64, angle: f64, confidence: f64, source: Source) -> Self {
        Self {
            distance,
            angle,
            confidence,
            source,
        }
    }

    pub fn from_xy(xy: [f64; 2], confidence: f64, source: Source) -> Self {
        Self::new(xy[0].hypot(xy[1]), xy[1].atan2(xy[0]).to_degrees(), confidence, source)
    }

    pub fn xy(&self) -> [f64; 2] {
        let a = self.angle.to_radians();
        [self.distance * a.cos(), self.distance * a.sin()]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance >= 0.0 && self.distance.is_finite()) {
            return Err(Error::invalid(format!("detection distance {} must be non-negative", self.distance)));
        }
        if !self.angle.is_finite() {
            return Err(Error::invalid("detection angle must be finite"));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::invalid(format!("detection confidence {} outside [0, 1]", self.confidence)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    /// Association gate `A` (degrees).
    pub angle_threshold: f64,
    /// Final confidence threshold `C`.
    pub confidence_threshold: f64,
    /// Sigmoid gain applied to LiDAR discriminants.
    pub alpha: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            angle_threshold: 3.0,
            confidence_threshold: 0.65,
            alpha: SigmoidConfig::default().alpha,
        }
    }
}

impl FusionConfig {
    pub fn sigmoid(&self) -> SigmoidConfig {
        SigmoidConfig { alpha: self.alpha }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.angle_threshold > 0.0) {
            return Err(Error::config("angle threshold must be positive"));
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(Error::config("confidence threshold must lie in [0, 1]"));
        }
        self.sigmoid().validate()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Association {
    /// `(camera index, lidar index)` in camera order.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_camera: Vec<usize>,
    pub unmatched_lidar: Vec<usize>,
}

/// Greedy one-to-one matching on azimuth. Ties go to the lower LiDAR index.
pub fn associate(camera: &[Detection], lidar: &[Detection], angle_threshold: f64) -> Association {
    let mut taken = vec![false; lidar.len()];
    let mut out = Association::default();
    for (ci, cam) in camera.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (li, l) in lidar.iter().enumerate() {
            if taken[li] {
                continue;
            }
            let gap = (cam.angle - l.angle).abs();
            if gap < angle_threshold && best.is_none_or(|(_, g)| gap < g) {
                best = Some((li, gap));
            }
        }
        match best {
            Some((li, _)) => {
                taken[li] = true;
                out.pairs.push((ci, li));
            }
            None => out.unmatched_camera.push(ci),
        }
    }
    out.unmatched_lidar = (0..lidar.len()).filter(|&i| !taken[i]).collect();
    out
}

/// Fusion output before the confidence threshold: fused or passed-through
/// camera detections in camera order, then unmatched LiDAR detections.
pub fn fuse_unthresholded(
    camera: &[Detection],
    lidar: &[Detection],
    angle_threshold: f64,
    system: &FuzzySystem,
) -> Vec<Detection> {
    let assoc = associate(camera, lidar, angle_threshold);
    let mut partner = vec![None; camera.len()];
    for &(ci, li) in &assoc.pairs {
        partner[ci] = Some(li);
    }
    let mut out = Vec::with_capacity(camera.len() + assoc.unmatched_lidar.len());
    for (cam, p) in camera.iter().zip(partner) {
        match p {
            Some(li) => {
                let l = &lidar[li];
                let score = fuzzy_fuse(l.confidence * 100.0, cam.confidence * 100.0, system);
                out.push(Detection::new(l.distance, l.angle, score / 100.0, Source::Fused));
            }
            None => out.push(*cam),
        }
    }
    out.extend(assoc.unmatched_lidar.iter().map(|&li| lidar[li]));
    out
}

pub fn fuse_frame(camera: &[Detection], lidar: &[Detection], cfg: &FusionConfig, system: &FuzzySystem) -> Vec<Detection> {
    let mut out = fuse_unthresholded(camera, lidar, cfg.angle_threshold, system);
    out.retain(|d| d.confidence >= cfg.confidence_threshold);
    out
}
