// SPDX-License-Identifier: Apache-2.0

//! Linear SVM over normalized cluster features.
//!
//! Training solves the L2-regularized hinge-loss problem
//! `0.5 (|w|^2 + b^2) + C sum_i max(0, 1 - y_i (w.x_i + b))`
//! by dual coordinate descent, with the bias folded in as a constant feature.
//! Beacons are labeled `-1` so that beacon-like clusters get `D <= 0`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{self, FeatureNormalizer, FeatureVector, NUM_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Beacon,
    NonBeacon,
}

impl Label {
    /// Training target: beacon `-1`, non-beacon `+1`.
    pub fn target(self) -> f64 {
        match self {
            Label::Beacon => -1.0,
            Label::NonBeacon => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmParams {
    /// Hinge-loss weight.
    pub c: f64,
    pub tol: f64,
    /// Maximum number of passes over the data.
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-6,
            max_iter: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Beacon, Label::Beacon) => self.tp += 1,
            (Label::Beacon, Label::NonBeacon) => self.fn_ += 1,
            (Label::NonBeacon, Label::Beacon) => self.fp += 1,
            (Label::NonBeacon, Label::NonBeacon) => self.tn += 1,
        }
    }

    pub fn tpr(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fn_).max(1) as f64
    }

    pub fn tnr(&self) -> f64 {
        self.tn as f64 / (self.tn + self.fp).max(1) as f64
    }

    pub fn score(&self) -> Result<f64> {
        features::feature_score(self.tp, self.tn, self.fp, self.fn_)
    }
}

/// Linear decision function of arbitrary dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub w: Vec<f64>,
    pub b: f64,
    /// Passes over the data used by the solver.
    #[serde(skip)]
    pub iterations: usize,
}

impl LinearSvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        decide(self.decision(x))
    }

    pub fn confusion(&self, x: &[Vec<f64>], y: &[Label]) -> Confusion {
        let mut c = Confusion::default();
        for (xi, &yi) in x.iter().zip(y) {
            c.record(yi, self.predict(xi));
        }
        c
    }

    /// Primal objective `0.5 (|w|^2 + b^2) + C sum hinge`.
    pub fn objective(&self, x: &[Vec<f64>], y: &[Label], c: f64) -> f64 {
        let reg = 0.5 * (dot(&self.w, &self.w) + self.b * self.b);
        let loss: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| (1.0 - yi.target() * self.decision(xi)).max(0.0))
            .sum();
        reg + c * loss
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Beacon iff `d <= 0`.
pub fn decide(d: f64) -> Label {
    if d <= 0.0 {
        Label::Beacon
    } else {
        Label::NonBeacon
    }
}

pub fn train_linear_svm(x: &[Vec<f64>], y: &[Label], params: &SvmParams) -> Result<LinearSvm> {
    if x.len() != y.len() {
        return Err(Error::invalid("feature rows and labels differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!("svm needs at least 2 samples, got {}", x.len())));
    }
    if !y.contains(&Label::Beacon) {
        return Err(Error::MissingClass("beacon"));
    }
    if !y.contains(&Label::NonBeacon) {
        return Err(Error::MissingClass("non-beacon"));
    }
    if !(params.c > 0.0) {
        return Err(Error::config("svm regularization must be positive"));
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim) {
        return Err(Error::invalid("feature rows differ in dimension"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite feature value"));
    }

    let n = x.len();
    let c = params.c;
    let qd: Vec<f64> = x.iter().map(|r| dot(r, r) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        order.shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            let yi = y[i].target();
            let g = yi * (dot(&w, &x[i]) + b) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * yi;
                if step != 0.0 {
                    for (wk, xk) in w.iter_mut().zip(&x[i]) {
                        *wk += step * xk;
                    }
                    b += step;
                }
            }
        }
        if pg_max - pg_min <= params.tol {
            break;
        }
    }

    Ok(LinearSvm { w, b, iterations })
}

/// Fitted beacon classifier applied to raw (unnormalized) features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSvmModel {
    pub w: [f64; NUM_FEATURES],
    pub b: f64,
    pub normalizer: FeatureNormalizer,
}

impl LinearSvmModel {
    pub fn discriminant(&self, raw: &FeatureVector) -> f64 {
        let f = self.normalizer.normalize(raw);
        dot(&self.w, &f.0) + self.b
    }

    pub fn classify(&self, raw: &FeatureVector) -> Label {
        decide(self.discriminant(raw))
    }
}

/// Fits the normalizer on `features` and trains the SVM on the normalized set.
pub fn train_svm(features: &[FeatureVector], labels: &[Label], params: &SvmParams) -> Result<LinearSvmModel> {
    let normalizer = features::fit_normalizer(features)?;
    let x: Vec<Vec<f64>> = features.iter().map(|f| normalizer.normalize(f).0.to_vec()).collect();
    let svm = train_linear_svm(&x, labels, params)?;
    let mut w = [0.0; NUM_FEATURES];
    w.copy_from_slice(&svm.w);
    Ok(LinearSvmModel {
        w,
        b: svm.b,
        normalizer,
    })
}

pub fn discriminant(model: &LinearSvmModel, raw: &FeatureVector) -> f64 {
    model.discriminant(raw)
}

pub fn classify(model: &LinearSvmModel, raw: &FeatureVector) -> Label {
    model.classify(raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SigmoidConfig {
    pub alpha: f64,
}

impl Default for SigmoidConfig {
    fn default() -> Self {
        Self { alpha: 1.0 / 500_000.0 }
    }
}

impl SigmoidConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("sigmoid alpha must be positive"));
        }
        Ok(())
    }
}

/// Maps a discriminant to `(0, 1)`; negative (beacon-like) `d` gives more
/// than one half.
pub fn pseudo_confidence(d: f64, cfg: &SigmoidConfig) -> f64 {
    1.0 / (1.0 + (cfg.alpha * d).exp())
}

/// On-disk model layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmModelFile {
    pub w: Vec<f64>,
    pub b: f64,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub alpha: f64,
}

fn to_array(v: &[f64], what: &str) -> Result<[f64; NUM_FEATURES]> {
    v.try_into()
        .map_err(|_| Error::invalid(format!("{what} must have {NUM_FEATURES} entries, got {}", v.len())))
}

impl SvmModelFile {
    pub fn new(model: &LinearSvmModel, sigmoid: &SigmoidConfig) -> Self {
        Self {
            w: model.w.to_vec(),
            b: model.b,
            mu: model.normalizer.mu.to_vec(),
            sigma: model.normalizer.sigma.to_vec(),
            alpha: sigmoid.alpha,
        }
    }

    pub fn into_parts(&self) -> Result<(LinearSvmModel, SigmoidConfig)> {
        let model = LinearSvmModel {
            w: to_array(&self.w, "w")?,
            b: self.b,
            normalizer: FeatureNormalizer {
                mu: to_array(&self.mu, "mu")?,
                sigma: to_array(&self.sigma, "sigma")?,
            },
        };
        if model.normalizer.sigma.iter().any(|s| *s < 0.0) {
            return Err(Error::invalid("sigma entries must be non-negative"));
        }
        let sigmoid = SigmoidConfig { alpha: self.alpha };
        sigmoid.validate()?;
        Ok((model, sigmoid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_model() -> LinearSvmModel {
        LinearSvmModel {
            w: [0.0; NUM_FEATURES],
            b: 0.0,
            normalizer: FeatureNormalizer::identity(),
        }
    }

    #[test]
    fn zero_model_gives_zero_discriminant() {
        let m = zero_model();
        assert_eq!(m.discriminant(&FeatureVector([7.5; NUM_FEATURES])), 0.0);
        assert_eq!(m.classify(&FeatureVector::zeros()), Label::Beacon);
    }

    #[test]
    fn discriminant_arithmetic() {
        let mut m = zero_model();
        m.w[0] = 2.0;
        m.b = 1.0;
        m.normalizer.sigma = [0.0; NUM_FEATURES];
        // normalized f_1 = 1 requires raw f_1 = 1e-5 under sigma 0.
        let mut f = FeatureVector::zeros();
        f.0[0] = 1e-5;
        assert!((m.discriminant(&f) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn decision_boundary_is_inclusive() {
        assert_eq!(decide(0.0), Label::Beacon);
        assert_eq!(decide(0.001), Label::NonBeacon);
        assert_eq!(decide(-0.001), Label::Beacon);
    }

    #[test]
    fn sigmoid_values() {
        let cfg = SigmoidConfig::default();
        assert_eq!(pseudo_confidence(0.0, &cfg), 0.5);
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((pseudo_confidence(-500_000.0, &cfg) - expected).abs() < 1e-12);
        assert!((expected - 0.7311).abs() < 1e-4);
        assert!(pseudo_confidence(1e12, &cfg) < 1e-12);
    }

    #[test]
    fn separable_toy_set() {
        let x = vec![vec![2.0, 2.0], vec![3.0, 1.0], vec![-2.0, -1.0], vec![-1.0, -3.0]];
        let y = [Label::NonBeacon, Label::NonBeacon, Label::Beacon, Label::Beacon];
        let svm = train_linear_svm(&x, &y, &SvmParams::default()).unwrap();
        let c = svm.confusion(&x, &y);
        assert_eq!(c.tp + c.tn, 4);
    }

    #[test]
    fn symmetric_classes_split_at_origin() {
        let x = vec![vec![-1.0], vec![1.0]];
        let y = [Label::Beacon, Label::NonBeacon];
        let svm = train_linear_svm(&x, &y, &SvmParams::default()).unwrap();
        let crossing = -svm.b / svm.w[0];
        assert!(crossing.abs() < 1e-3, "crossing at {crossing}");
    }

    #[test]
    fn missing_class_is_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        let err = train_linear_svm(&x, &[Label::Beacon, Label::Beacon], &SvmParams::default()).unwrap_err();
        assert!(matches!(err, Error::MissingClass("non-beacon")));
    }

    #[test]
    fn model_file_round_trip() {
        let mut m = zero_model();
        m.w[3] = -0.25;
        m.b = 0.5;
        let file = SvmModelFile::new(&m, &SigmoidConfig::default());
        let json = serde_json::to_string(&file).unwrap();
        let back: SvmModelFile = serde_json::from_str(&json).unwrap();
        let (m2, s2) = back.into_parts().unwrap();
        assert_eq!(m2, m);
        assert_eq!(s2, SigmoidConfig::default());
    }

    #[test]
    fn model_file_rejects_short_weights() {
        let mut file = SvmModelFile::new(&zero_model(), &SigmoidConfig::default());
        file.w.pop();
        assert!(file.into_parts().is_err());
    }
}
