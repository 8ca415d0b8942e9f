// SPDX-License-Identifier: Apache-2.0

//! Point-cloud data model and the preprocessing filters that run ahead of
//! clustering and feature extraction:
//!
//! 1. **Non-return removal** – drop rays that produced no echo.
//! 2. **Ground removal** – keep points with `z >= T_G` (flat-ground assumption).
//! 3. **Threshold split** – the high-threshold (HT) and low-threshold (LT)
//!    subsets used by the feature table.
//!
//! Every filter is a stable subsequence selection: output order always
//! follows input order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of beams on the sensor. Beam 6 is horizontal, beam 7 points up.
pub const NUM_BEAMS: u8 = 8;

/// One LiDAR return in the sensor frame.
///
/// `x` is forward, `y` is left, `z` is up, all in meters with the origin at
/// the sensor center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: u32,
    pub beam: u8,
}

impl LidarPoint {
    pub fn new(x: f64, y: f64, z: f64, intensity: u32, beam: u8) -> Result<Self> {
        let p = Self {
            x,
            y,
            z,
            intensity,
            beam,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beam >= NUM_BEAMS {
            return Err(Error::invalid(format!("beam {} out of range 0-7", self.beam)));
        }
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(Error::invalid("non-finite point coordinates"));
        }
        Ok(())
    }

    #[inline]
    pub fn xy(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    #[inline]
    pub fn xy_distance_to(&self, c: [f64; 2]) -> f64 {
        (self.x - c[0]).hypot(self.y - c[1])
    }
}

/// A raw sensor sample: either a return, or a ray that produced no echo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointRecord", into = "PointRecord")]
pub enum RawPoint {
    Return(LidarPoint),
    NoReturn { beam: u8 },
}

impl RawPoint {
    pub fn beam(&self) -> u8 {
        match self {
            RawPoint::Return(p) => p.beam,
            RawPoint::NoReturn { beam } => *beam,
        }
    }

    pub fn as_return(&self) -> Option<&LidarPoint> {
        match self {
            RawPoint::Return(p) => Some(p),
            RawPoint::NoReturn { .. } => None,
        }
    }
}

/// Flat record used by both the CSV and JSON frame formats. A no-return is
/// encoded as empty (or null) `x`, `y`, `z`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PointRecord {
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    #[serde(default)]
    pub intensity: u32,
    pub beam: u8,
}

impl TryFrom<PointRecord> for RawPoint {
    type Error = Error;

    fn try_from(r: PointRecord) -> Result<Self> {
        match (r.x, r.y, r.z) {
            (Some(x), Some(y), Some(z)) => Ok(RawPoint::Return(LidarPoint::new(
                x,
                y,
                z,
                r.intensity,
                r.beam,
            )?)),
            (None, None, None) => {
                if r.beam >= NUM_BEAMS {
                    return Err(Error::invalid(format!("beam {} out of range 0-7", r.beam)));
                }
                Ok(RawPoint::NoReturn { beam: r.beam })
            }
            _ => Err(Error::invalid("partially empty coordinates")),
        }
    }
}

impl From<RawPoint> for PointRecord {
    fn from(p: RawPoint) -> Self {
        match p {
            RawPoint::Return(p) => PointRecord {
                x: Some(p.x),
                y: Some(p.y),
                z: Some(p.z),
                intensity: p.intensity,
                beam: p.beam,
            },
            RawPoint::NoReturn { beam } => PointRecord {
                x: None,
                y: None,
                z: None,
                intensity: 0,
                beam,
            },
        }
    }
}

/// A frame as delivered by the sensor, possibly containing no-return samples.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawCloud {
    pub frame_id: u64,
    pub timestamp: f64,
    pub points: Vec<RawPoint>,
}

/// A frame containing returns only.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub frame_id: u64,
    pub timestamp: f64,
    pub points: Vec<LidarPoint>,
}

impl PointCloud {
    pub fn new(frame_id: u64, timestamp: f64, points: Vec<LidarPoint>) -> Self {
        Self {
            frame_id,
            timestamp,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Stable selection of the points matching `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&LidarPoint) -> bool) -> PointCloud {
        PointCloud {
            frame_id: self.frame_id,
            timestamp: self.timestamp,
            points: self.points.iter().filter(|p| keep(p)).copied().collect(),
        }
    }
}

/// Thresholds for ground removal and the HT/LT split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// `T_G`: points with `z` below this are ground (meters).
    pub ground_z_threshold: f64,
    /// `T_L`: intensity floor of the LT subset.
    pub low_intensity_threshold: u32,
    /// `T_H`: intensity floor of the HT (bright) subset.
    pub high_intensity_threshold: u32,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        // Sensor sits 1.4 m above the ground; 0.2 m clearance.
        Self {
            ground_z_threshold: -1.2,
            low_intensity_threshold: 0,
            high_intensity_threshold: 15,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.low_intensity_threshold > self.high_intensity_threshold {
            return Err(Error::config(format!(
                "low intensity threshold {} exceeds high intensity threshold {}",
                self.low_intensity_threshold, self.high_intensity_threshold
            )));
        }
        if !self.ground_z_threshold.is_finite() {
            return Err(Error::config("ground z threshold must be finite"));
        }
        Ok(())
    }
}

pub fn remove_non_returns(cloud: &RawCloud) -> PointCloud {
    PointCloud {
        frame_id: cloud.frame_id,
        timestamp: cloud.timestamp,
        points: cloud.points.iter().filter_map(RawPoint::as_return).copied().collect(),
    }
}

pub fn remove_ground(cloud: &PointCloud, ground_z_threshold: f64) -> PointCloud {
    cloud.filter(|p| p.z >= ground_z_threshold)
}

/// Splits a ground-free cloud into `(P_HT, P_LT)`.
pub fn threshold_split(cloud: &PointCloud, cfg: &PreprocessConfig) -> Result<(PointCloud, PointCloud)> {
    cfg.validate()?;
    let high = cloud.filter(|p| p.intensity >= cfg.high_intensity_threshold);
    let low = cloud.filter(|p| p.intensity >= cfg.low_intensity_threshold);
    Ok((high, low))
}

/// Output of the full preprocessing chain for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    /// Returns with ground removed (all intensities).
    pub nonground: PointCloud,
    /// `P_HT`, the bright points.
    pub high: PointCloud,
    /// `P_LT`.
    pub low: PointCloud,
}

pub fn preprocess(cloud: &RawCloud, cfg: &PreprocessConfig) -> Result<Preprocessed> {
    let returns = remove_non_returns(cloud);
    let nonground = remove_ground(&returns, cfg.ground_z_threshold);
    let (high, low) = threshold_split(&nonground, cfg)?;
    Ok(Preprocessed { nonground, high, low })
}
