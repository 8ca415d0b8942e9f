// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::{bbox_features, MapperPair};
use crate::error::{Error, Result};

/// `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// `y = a * exp(b * x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub a: f64,
    pub b: f64,
}

impl ExponentialFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.a * (self.b * x).exp()
    }
}

/// Angle from normalized box center, distance from normalized box width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionBaselines {
    pub angle: LinearFit,
    pub distance: ExponentialFit,
}

impl RegressionBaselines {
    /// `(distance, angle)` for a box.
    pub fn predict(&self, b: &super::BoundingBox) -> (f64, f64) {
        let f = bbox_features(b);
        (self.distance.eval(f[2]), self.angle.eval(b.center_x()))
    }
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("regressor and response differ in length"));
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData("line fit needs at least 2 points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("regressor has zero variance".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Least squares on `ln y`.
pub fn fit_exponential(xs: &[f64], ys: &[f64]) -> Result<ExponentialFit> {
    if let Some(bad) = ys.iter().find(|y| !(**y > 0.0)) {
        return Err(Error::invalid(format!("exponential fit needs positive responses, got {bad}")));
    }
    let logs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let line = fit_line(xs, &logs)?;
    Ok(ExponentialFit {
        a: line.intercept.exp(),
        b: line.slope,
    })
}

pub fn fit_baselines(pairs: &[MapperPair]) -> Result<RegressionBaselines> {
    if pairs.len() < 3 {
        return Err(Error::InsufficientData(format!("baselines need at least 3 pairs, got {}", pairs.len())));
    }
    let centers: Vec<f64> = pairs.iter().map(|p| p.bbox.center_x()).collect();
    let angles: Vec<f64> = pairs.iter().map(|p| p.angle).collect();
    let widths: Vec<f64> = pairs.iter().map(|p| bbox_features(&p.bbox)[2]).collect();
    let dists: Vec<f64> = pairs.iter().map(|p| p.distance).collect();
    Ok(RegressionBaselines {
        angle: fit_line(&centers, &angles)?,
        distance: fit_exponential(&widths, &dists)?,
    })
}
