// SPDX-License-Identifier: Apache-2.0

//! Cluster descriptors for beacon classification.
//!
//! Each bright cluster is described by 20 features computed over two nested
//! rectangular analysis regions centered on the cluster centroid and over two
//! intensity subsets (HT and LT). The layout is fixed by [`FEATURE_TABLE`].
//!
//! Features are normalized with `f' = (f - mu) / (4 sigma + 1e-5)`, where the
//! statistics come from the training set only.

use serde::{Deserialize, Serialize};

use crate::classifier::{self, Label, SvmParams};
use crate::error::{Error, Result};
use crate::point_cloud::{LidarPoint, PointCloud};

pub const NUM_FEATURES: usize = 20;

/// Guard added to `4 sigma` in the normalization denominator.
pub const NORMALIZATION_EPS: f64 = 1e-5;

/// Guard added to the cluster radius in the count-per-radius feature.
pub const RADIUS_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionConfig {
    pub dx_inner: f64,
    pub dy_inner: f64,
    pub dx_outer: f64,
    pub dy_outer: f64,
    /// Lower z bound shared by both regions (meters, sensor frame).
    pub z_min: f64,
    /// Sensor height above the ground (meters).
    pub lidar_height: f64,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self {
            dx_inner: 0.5,
            dy_inner: 0.5,
            dx_outer: 2.0,
            dy_outer: 2.0,
            z_min: -1.18,
            lidar_height: 1.4,
        }
    }
}

impl RegionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dx_inner > 0.0 && self.dy_inner > 0.0) {
            return Err(Error::config("inner region extents must be positive"));
        }
        if self.dx_inner > self.dx_outer || self.dy_inner > self.dy_outer {
            return Err(Error::config("inner region must not exceed outer region"));
        }
        Ok(())
    }
}

fn in_region(p: &LidarPoint, centroid: [f64; 3], dx: f64, dy: f64, z_min: f64) -> bool {
    (p.x - centroid[0]).abs() <= dx / 2.0 && (p.y - centroid[1]).abs() <= dy / 2.0 && p.z >= z_min
}

pub fn in_inner_region(p: &LidarPoint, centroid: [f64; 3], cfg: &RegionConfig) -> bool {
    in_region(p, centroid, cfg.dx_inner, cfg.dy_inner, cfg.z_min)
}

pub fn in_outer_region(p: &LidarPoint, centroid: [f64; 3], cfg: &RegionConfig) -> bool {
    in_region(p, centroid, cfg.dx_outer, cfg.dy_outer, cfg.z_min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Inner,
    Outer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    ExtentX,
    ExtentY,
    ExtentZ,
    /// `max(extent x, extent y)`.
    MaxXyExtent,
    /// `max z - lidar_height`.
    MaxZMinusSensorHeight,
    Count,
    /// Count divided by (cluster radius + guard).
    CountPerRadius,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureDef {
    pub subset: Subset,
    pub region: Region,
    pub beam: Option<u8>,
    pub stat: Statistic,
}

const fn def(subset: Subset, region: Region, beam: Option<u8>, stat: Statistic) -> FeatureDef {
    FeatureDef {
        subset,
        region,
        beam,
        stat,
    }
}

use Region::{Inner, Outer};
use Statistic::*;
use Subset::{High, Low};

/// Feature layout, index `k` is feature `k + 1`.
///
/// Features 9 and 16 are defined identically. Feature 20 is the y extent.
pub const FEATURE_TABLE: [FeatureDef; NUM_FEATURES] = [
    def(High, Inner, None, ExtentZ),
    def(Low, Outer, Some(7), MaxXyExtent),
    def(Low, Outer, Some(5), MaxXyExtent),
    def(High, Outer, None, MaxZMinusSensorHeight),
    def(Low, Outer, None, ExtentZ),
    def(Low, Inner, Some(7), Count),
    def(Low, Inner, Some(6), MaxXyExtent),
    def(Low, Outer, Some(5), Count),
    def(Low, Inner, None, ExtentX),
    def(Low, Inner, Some(4), Count),
    def(Low, Inner, Some(5), Count),
    def(Low, Outer, Some(6), Count),
    def(High, Inner, Some(6), Count),
    def(Low, Inner, Some(5), MaxXyExtent),
    def(Low, Outer, Some(5), CountPerRadius),
    def(Low, Inner, None, ExtentX),
    def(High, Inner, Some(7), Count),
    def(Low, Inner, None, Count),
    def(Low, Outer, None, Count),
    def(Low, Outer, None, ExtentY),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn zeros() -> Self {
        Self([0.0; NUM_FEATURES])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for FeatureVector {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

fn extent(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

fn evaluate(def: &FeatureDef, points: &[&LidarPoint], radius: f64, lidar_height: f64) -> f64 {
    let sel = || points.iter().filter(|p| def.beam.is_none_or(|b| p.beam == b));
    match def.stat {
        ExtentX => extent(sel().map(|p| p.x)),
        ExtentY => extent(sel().map(|p| p.y)),
        ExtentZ => extent(sel().map(|p| p.z)),
        MaxXyExtent => extent(sel().map(|p| p.x)).max(extent(sel().map(|p| p.y))),
        MaxZMinusSensorHeight => sel()
            .map(|p| p.z - lidar_height)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            .unwrap_or(0.0),
        Count => sel().count() as f64,
        CountPerRadius => sel().count() as f64 / (radius + RADIUS_EPS),
    }
}

/// Computes the feature vector of the cluster at `centroid`.
///
/// `radius` is the cluster radius (largest member distance from the centroid
/// in the xy plane). Empty selections give zero.
pub fn extract_features(
    high: &PointCloud,
    low: &PointCloud,
    centroid: [f64; 3],
    radius: f64,
    cfg: &RegionConfig,
) -> FeatureVector {
    fn pick<'a>(cloud: &'a PointCloud, inner: bool, centroid: [f64; 3], cfg: &RegionConfig) -> Vec<&'a LidarPoint> {
        cloud
            .points
            .iter()
            .filter(|p| {
                if inner {
                    in_inner_region(p, centroid, cfg)
                } else {
                    in_outer_region(p, centroid, cfg)
                }
            })
            .collect()
    }
    let ht_inner = pick(high, true, centroid, cfg);
    let ht_outer = pick(high, false, centroid, cfg);
    let lt_inner = pick(low, true, centroid, cfg);
    let lt_outer = pick(low, false, centroid, cfg);

    let mut out = [0.0; NUM_FEATURES];
    for (slot, def) in out.iter_mut().zip(FEATURE_TABLE.iter()) {
        let pts = match (def.subset, def.region) {
            (High, Inner) => &ht_inner,
            (High, Outer) => &ht_outer,
            (Low, Inner) => &lt_inner,
            (Low, Outer) => &lt_outer,
        };
        *slot = evaluate(def, pts, radius, cfg.lidar_height);
    }
    FeatureVector(out)
}

/// Per-feature mean and (population) standard deviation of a training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureNormalizer {
    pub mu: [f64; NUM_FEATURES],
    pub sigma: [f64; NUM_FEATURES],
}

impl FeatureNormalizer {
    /// Leaves features unchanged apart from the `1e-5` scale.
    pub fn identity() -> Self {
        Self {
            mu: [0.0; NUM_FEATURES],
            sigma: [0.25; NUM_FEATURES],
        }
    }

    pub fn normalize(&self, f: &FeatureVector) -> FeatureVector {
        FeatureVector(std::array::from_fn(|k| {
            (f.0[k] - self.mu[k]) / (4.0 * self.sigma[k] + NORMALIZATION_EPS)
        }))
    }
}

pub fn fit_normalizer(training: &[FeatureVector]) -> Result<FeatureNormalizer> {
    if training.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "normalizer needs at least 2 vectors, got {}",
            training.len()
        )));
    }
    let n = training.len() as f64;
    let mut mu = [0.0; NUM_FEATURES];
    let mut sigma = [0.0; NUM_FEATURES];
    for k in 0..NUM_FEATURES {
        mu[k] = training.iter().map(|f| f.0[k]).sum::<f64>() / n;
        let var = training.iter().map(|f| (f.0[k] - mu[k]).powi(2)).sum::<f64>() / n;
        sigma[k] = var.sqrt();
    }
    Ok(FeatureNormalizer { mu, sigma })
}

pub fn normalize(f: &FeatureVector, n: &FeatureNormalizer) -> FeatureVector {
    n.normalize(f)
}

/// Balanced detection score in `[0, 1000]`.
pub fn feature_score(tp: usize, tn: usize, fp: usize, fn_: usize) -> Result<f64> {
    if tp + fn_ == 0 {
        return Err(Error::MissingClass("beacon"));
    }
    if tn + fp == 0 {
        return Err(Error::MissingClass("non-beacon"));
    }
    Ok(500.0 * tp as f64 / (tp + fn_) as f64 + 500.0 * tn as f64 / (tn + fp) as f64)
}

/// Single-feature decision stump: beacon iff `value <= threshold` when
/// `beacon_below`, else iff `value >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub threshold: f64,
    pub beacon_below: bool,
    pub score: f64,
}

impl Stump {
    pub fn predict(&self, v: f64) -> Label {
        let beacon = if self.beacon_below {
            v <= self.threshold
        } else {
            v >= self.threshold
        };
        if beacon {
            Label::Beacon
        } else {
            Label::NonBeacon
        }
    }
}

/// Best stump by score over every distinct cut of `values`.
pub fn best_stump(values: &[f64], labels: &[Label]) -> Result<Stump> {
    if values.len() != labels.len() {
        return Err(Error::invalid("values and labels differ in length"));
    }
    let pos = labels.iter().filter(|l| **l == Label::Beacon).count();
    let neg = labels.len() - pos;
    if pos == 0 {
        return Err(Error::MissingClass("beacon"));
    }
    if neg == 0 {
        return Err(Error::MissingClass("non-beacon"));
    }

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    // Candidate thresholds: below all values, then each distinct value.
    // For a "below" stump at distinct value v every point <= v is a beacon;
    // for an "above" stump at v every point >= v is a beacon.
    let score = |tp: usize, fp: usize| {
        500.0 * tp as f64 / pos as f64 + 500.0 * (neg - fp) as f64 / neg as f64
    };
    let first = values[order[0]];
    let mut best = Stump {
        threshold: first - 1.0,
        beacon_below: true,
        score: score(0, 0),
    };
    let (mut tp_le, mut fp_le) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let v = values[order[i]];
        // counts strictly below v, for the "above" stump at v
        let (tp_lt, fp_lt) = (tp_le, fp_le);
        while i < order.len() && values[order[i]] == v {
            match labels[order[i]] {
                Label::Beacon => tp_le += 1,
                Label::NonBeacon => fp_le += 1,
            }
            i += 1;
        }
        let below = score(tp_le, fp_le);
        if below > best.score {
            best = Stump {
                threshold: v,
                beacon_below: true,
                score: below,
            };
        }
        let above = score(pos - tp_lt, neg - fp_lt);
        if above > best.score {
            best = Stump {
                threshold: v,
                beacon_below: false,
                score: above,
            };
        }
    }
    Ok(best)
}

/// Features in descending order of single-feature discriminating power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    /// Zero-based feature indices, best first.
    pub order: Vec<usize>,
    /// Score of each feature, indexed by feature.
    pub scores: Vec<f64>,
}

pub fn rank_features(training: &[FeatureVector], labels: &[Label]) -> Result<FeatureRanking> {
    let mut scores = Vec::with_capacity(NUM_FEATURES);
    for k in 0..NUM_FEATURES {
        let column: Vec<f64> = training.iter().map(|f| f.0[k]).collect();
        scores.push(best_stump(&column, labels)?.score);
    }
    let mut order: Vec<usize> = (0..NUM_FEATURES).collect();
    // Stable sort keeps lower feature numbers first on ties.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(FeatureRanking { order, scores })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub score_train: f64,
    pub score_test: f64,
}

/// Score of a linear SVM trained on the top-`k` ranked features, for
/// `k = 1..=20`.
pub fn score_curve(
    ranking: &FeatureRanking,
    train: (&[FeatureVector], &[Label]),
    test: (&[FeatureVector], &[Label]),
    params: &SvmParams,
) -> Result<Vec<CurvePoint>> {
    let normalizer = fit_normalizer(train.0)?;
    let project = |set: &[FeatureVector], k: usize| -> Vec<Vec<f64>> {
        set.iter()
            .map(|f| {
                let n = normalizer.normalize(f);
                ranking.order[..k].iter().map(|&j| n.0[j]).collect()
            })
            .collect()
    };
    let mut curve = Vec::with_capacity(NUM_FEATURES);
    for k in 1..=NUM_FEATURES {
        let xtr = project(train.0, k);
        let svm = classifier::train_linear_svm(&xtr, train.1, params)?;
        let score_train = svm.confusion(&xtr, train.1).score()?;
        let xte = project(test.0, k);
        let score_test = svm.confusion(&xte, test.1).score()?;
        curve.push(CurvePoint {
            k,
            score_train,
            score_test,
        });
    }
    Ok(curve)
}
