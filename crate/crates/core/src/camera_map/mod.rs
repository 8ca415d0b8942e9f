// SPDX-License-Identifier: Apache-2.0

//! Camera bounding box to polar position mapping.
//!
//! A small fully connected network regresses `(distance, angle)` from the
//! normalized box geometry. Closed-form baselines (a line for angle, an
//! exponential in box width for distance) give a reference error level.

mod baselines;
mod network;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{Detection, Source};

pub use baselines::{fit_baselines, fit_exponential, fit_line, ExponentialFit, LinearFit, RegressionBaselines};
pub use network::{
    gradient_check, train_mapper, Activation, Dense, MapperNetwork, MapperTrainConfig, Scales, HIDDEN_WIDTHS,
    INPUTS, OUTPUTS,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
    pub confidence: f64,
    pub image_width: f64,
    pub image_height: f64,
}

impl BoundingBox {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64, confidence: f64, image: (f64, f64)) -> Result<Self> {
        let b = Self {
            xmin,
            ymin,
            xmax,
            ymax,
            confidence,
            image_width: image.0,
            image_height: image.1,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.xmin, self.ymin, self.xmax, self.ymax, self.confidence]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("bounding box has non-finite values"));
        }
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if !(self.xmin < self.xmax && self.ymin < self.ymax) {
            return Err(Error::invalid(format!(
                "bounding box corners out of order: ({}, {}) ({}, {})",
                self.xmin, self.ymin, self.xmax, self.ymax
            )));
        }
        if self.xmin < 0.0 || self.ymin < 0.0 || self.xmax > self.image_width || self.ymax > self.image_height {
            return Err(Error::invalid("bounding box extends outside the image"));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::invalid("bounding box confidence outside [0, 1]"));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    /// Horizontal center, normalized to `[0, 1]`.
    pub fn center_x(&self) -> f64 {
        0.5 * (self.xmin + self.xmax) / self.image_width
    }
}

/// `(xmin, xmax, width, height)` divided by the image dimensions.
pub fn bbox_features(b: &BoundingBox) -> [f64; INPUTS] {
    [
        b.xmin / b.image_width,
        b.xmax / b.image_width,
        b.width() / b.image_width,
        b.height() / b.image_height,
    ]
}

/// Training pair: a box and the LiDAR-frame position of the same object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapperPair {
    pub bbox: BoundingBox,
    pub distance: f64,
    pub angle: f64,
}

pub fn predict(net: &MapperNetwork, b: &BoundingBox) -> Detection {
    let (distance, angle) = net.predict_features(&bbox_features(b));
    Detection::new(distance.max(0.0), angle, b.confidence, Source::Camera)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingMetrics {
    pub mse_distance: f64,
    pub mse_angle: f64,
    pub r2_distance: f64,
    pub r2_angle: f64,
}

fn mse_r2(pred: &[f64], truth: &[f64], what: &str) -> Result<(f64, f64)> {
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::InsufficientData(format!("{what} truth has zero variance; r2 undefined")));
    }
    Ok((ss_res / n, 1.0 - ss_res / ss_tot))
}

/// Inputs are `(distance, angle)` pairs.
pub fn mapping_metrics(predictions: &[(f64, f64)], truths: &[(f64, f64)]) -> Result<MappingMetrics> {
    if predictions.is_empty() {
        return Err(Error::InsufficientData("no predictions to score".into()));
    }
    if predictions.len() != truths.len() {
        return Err(Error::invalid("predictions and truths differ in length"));
    }
    let split = |v: &[(f64, f64)]| -> (Vec<f64>, Vec<f64>) { v.iter().copied().unzip() };
    let (pd, pa) = split(predictions);
    let (td, ta) = split(truths);
    let (mse_distance, r2_distance) = mse_r2(&pd, &td, "distance")?;
    let (mse_angle, r2_angle) = mse_r2(&pa, &ta, "angle")?;
    Ok(MappingMetrics {
        mse_distance,
        mse_angle,
        r2_distance,
        r2_angle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_image_box() {
        let b = BoundingBox::new(0.0, 0.0, 640.0, 480.0, 0.9, (640.0, 480.0)).unwrap();
        assert_eq!(bbox_features(&b), [0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn feature_arithmetic() {
        let b = BoundingBox::new(100.0, 200.0, 300.0, 400.0, 0.9, (640.0, 480.0)).unwrap();
        let f = bbox_features(&b);
        let expected = [0.15625, 0.46875, 0.3125, 200.0 / 480.0];
        for (a, e) in f.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
        assert!((f[3] - 0.41667).abs() < 1e-5);
    }

    #[test]
    fn invalid_boxes() {
        assert!(BoundingBox::new(10.0, 0.0, 5.0, 10.0, 0.5, (640.0, 480.0)).is_err());
        assert!(BoundingBox::new(0.0, 0.0, 700.0, 10.0, 0.5, (640.0, 480.0)).is_err());
        assert!(BoundingBox::new(0.0, 0.0, 10.0, 10.0, 1.5, (640.0, 480.0)).is_err());
    }

    #[test]
    fn perfect_predictions() {
        let t = vec![(1.0, 2.0), (3.0, -1.0), (5.0, 0.5)];
        let m = mapping_metrics(&t, &t).unwrap();
        assert_eq!((m.mse_distance, m.mse_angle, m.r2_distance, m.r2_angle), (0.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn mean_predictor_has_zero_r2() {
        let t = vec![(1.0, 2.0), (3.0, -1.0), (5.0, 0.5)];
        let p = vec![(3.0, 0.5); 3];
        let m = mapping_metrics(&p, &t).unwrap();
        assert!(m.r2_distance.abs() < 1e-12 && m.r2_angle.abs() < 1e-12);
    }

    #[test]
    fn metric_errors() {
        assert!(mapping_metrics(&[], &[]).is_err());
        assert!(mapping_metrics(&[(1.0, 1.0), (1.0, 2.0)], &[(1.0, 1.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn prediction_passes_confidence_through() {
        let net = MapperNetwork::zeros();
        let b = BoundingBox::new(10.0, 10.0, 20.0, 40.0, 0.42, (640.0, 480.0)).unwrap();
        let d = predict(&net, &b);
        assert_eq!(d.confidence, 0.42);
        assert_eq!(d.source, Source::Camera);
    }
}
