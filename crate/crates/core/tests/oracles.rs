// SPDX-License-Identifier: Apache-2.0

mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use beacon_core::clustering::{cluster_labels, cluster_points};
use beacon_core::features::{
    feature_score, fit_normalizer, in_inner_region, in_outer_region, normalize, FeatureVector, RegionConfig,
    NUM_FEATURES,
};
use beacon_core::fusion::{
    associate, detection_metrics, grid_search, Detection, FrameDetections, FusionConfig, FuzzySystem, GridFrame,
    LidarCandidate, MetricsConfig, Source, TruthObject, DEFAULT_ALPHAS, DEFAULT_CS,
};
use beacon_core::point_cloud::LidarPoint;
use beacon_core::simulator::ObjectKind;
use support::oracles;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn clustering_matches_transcribed_algorithm() {
    let mut r = rng(1);
    for _ in 0..300 {
        let pts = oracles::random_bright_cloud(&mut r, 200);
        let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.x, p.y)).collect();
        let got = cluster_labels(&cluster_points(&pts, 0.5), pts.len());
        assert_eq!(got, oracles::algorithm1(&xy, 0.5));
    }
}

#[test]
fn regions_match_inequalities() {
    let mut r = rng(2);
    let cfg = RegionConfig::default();
    for _ in 0..1000 {
        let c = [r.random_range(-5.0..5.0), r.random_range(-5.0..5.0), 0.0];
        let p = LidarPoint::new(
            c[0] + r.random_range(-1.5..1.5),
            c[1] + r.random_range(-1.5..1.5),
            r.random_range(-1.5..1.5),
            20,
            3,
        )
        .unwrap();
        let (dx, dy) = ((p.x - c[0]).abs(), (p.y - c[1]).abs());
        let z_ok = p.z >= -1.18;
        assert_eq!(in_inner_region(&p, c, &cfg), dx <= 0.25 && dy <= 0.25 && z_ok);
        assert_eq!(in_outer_region(&p, c, &cfg), dx <= 1.0 && dy <= 1.0 && z_ok);
    }
}

#[test]
fn normalizer_matches_statistics_oracle() {
    let mut r = rng(3);
    let rows: Vec<FeatureVector> = (0..257)
        .map(|_| FeatureVector(std::array::from_fn(|k| r.random_range(-1.0..1.0) * (k as f64 + 1.0) + k as f64)))
        .collect();
    let n = fit_normalizer(&rows).unwrap();
    for k in 0..NUM_FEATURES {
        let col: Vec<f64> = rows.iter().map(|f| f[k]).collect();
        let (mu, sigma) = oracles::mean_std(&col);
        assert!((n.mu[k] - mu).abs() < 1e-12);
        assert!((n.sigma[k] - sigma).abs() < 1e-12);
        for f in &rows {
            let want = (f[k] - mu) / (4.0 * sigma + 1e-5);
            assert!((normalize(f, &n)[k] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn score_matches_formula() {
    let mut r = rng(4);
    for _ in 0..500 {
        let (tp, tn, fp, fn_) = (
            r.random_range(0..100),
            r.random_range(0..100),
            r.random_range(0..100),
            r.random_range(0..100),
        );
        let got = feature_score(tp, tn, fp, fn_);
        if tp + fn_ == 0 || tn + fp == 0 {
            assert!(got.is_err());
        } else {
            let want = 500.0 * tp as f64 / (tp + fn_) as f64 + 500.0 * tn as f64 / (tn + fp) as f64;
            assert!((got.unwrap() - want).abs() < 1e-9);
        }
    }
}

fn det(angle: f64, distance: f64, confidence: f64, source: Source) -> Detection {
    Detection::new(distance, angle, confidence, source)
}

#[test]
fn association_matches_exhaustive_matcher() {
    let mut r = rng(5);
    for _ in 0..2000 {
        // Coarse angles make exact ties common.
        let cam: Vec<f64> = (0..r.random_range(0..6)).map(|_| r.random_range(-8..8) as f64 * 0.5).collect();
        let lid: Vec<f64> = (0..r.random_range(0..6)).map(|_| r.random_range(-8..8) as f64 * 0.5).collect();
        let c: Vec<Detection> = cam.iter().map(|&a| det(a, 5.0, 0.9, Source::Camera)).collect();
        let l: Vec<Detection> = lid.iter().map(|&a| det(a, 5.0, 0.6, Source::Lidar)).collect();
        let got = associate(&c, &l, 3.0);
        assert_eq!(got.pairs, oracles::associate(&cam, &lid, 3.0));
        let matched: Vec<usize> = got.pairs.iter().map(|p| p.1).collect();
        assert_eq!(got.unmatched_lidar.len() + matched.len(), lid.len());
        assert_eq!(got.unmatched_camera.len() + got.pairs.len(), cam.len());
    }
}

fn truth(frame_id: u64, object_id: u64, kind: ObjectKind, distance: f64, angle: f64) -> TruthObject {
    TruthObject {
        frame_id,
        object_id,
        kind,
        distance,
        angle,
    }
}

fn random_truth(r: &mut ChaCha8Rng, frames: u64) -> Vec<TruthObject> {
    let mut out = Vec::new();
    for f in 0..frames {
        for id in 0..r.random_range(1..5) {
            let kind = if r.random::<f64>() < 0.6 {
                ObjectKind::Beacon
            } else {
                ObjectKind::PersonVest
            };
            out.push(truth(f, id, kind, r.random_range(3.0..30.0), r.random_range(-18.0..18.0)));
        }
    }
    out
}

#[test]
fn metrics_match_direct_counting() {
    let mut r = rng(6);
    let truth = random_truth(&mut r, 40);
    let frames: Vec<FrameDetections> = (0..40u64)
        .map(|f| {
            let mut dets = Vec::new();
            for t in truth.iter().filter(|t| t.frame_id == f) {
                if r.random::<f64>() < 0.7 {
                    let [x, y] = t.xy();
                    let xy = [x + r.random_range(-1.0..1.0), y + r.random_range(-1.0..1.0)];
                    dets.push(Detection::from_xy(xy, 0.9, Source::Fused));
                }
            }
            if r.random::<f64>() < 0.3 {
                dets.push(det(r.random_range(-18.0..18.0), r.random_range(3.0..30.0), 0.9, Source::Camera));
            }
            FrameDetections { frame_id: f, detections: dets }
        })
        .collect();
    let m = detection_metrics(&frames, &truth, &MetricsConfig::default(), None).unwrap();
    let (tp, fp, fn_, tn) = oracles::count_outcomes(&frames, &truth, 1.0);
    assert_eq!((m.counts.tp, m.counts.fp, m.counts.fn_, m.counts.tn), (tp, fp, fn_, tn));
    assert!((m.tpr - tp as f64 / (tp + fn_) as f64).abs() < 1e-15);
}

#[test]
fn grid_search_matches_exhaustive_oracle() {
    let mut r = rng(7);
    let truth = random_truth(&mut r, 60);
    let frames: Vec<GridFrame> = (0..60u64)
        .map(|f| {
            let objs: Vec<&TruthObject> = truth.iter().filter(|t| t.frame_id == f).collect();
            let (mut lidar, mut camera) = (Vec::new(), Vec::new());
            for t in objs {
                if t.distance < 20.0 && r.random::<f64>() < 0.8 {
                    lidar.push(LidarCandidate {
                        distance: t.distance + r.random_range(-0.05..0.05),
                        angle: t.angle + r.random_range(-0.3..0.3),
                        discriminant: r.random_range(-400_000.0..50_000.0),
                    });
                }
                if r.random::<f64>() < 0.85 {
                    let conf = if t.kind == ObjectKind::Beacon {
                        r.random_range(0.6..0.98)
                    } else {
                        r.random_range(0.3..0.75)
                    };
                    let (a, d) = (t.angle + r.random_range(-1.0..1.0), t.distance * r.random_range(0.97..1.03));
                    camera.push(det(a, d, conf, Source::Camera));
                }
            }
            GridFrame { frame_id: f, lidar, camera }
        })
        .collect();
    let base = FusionConfig::default();
    let sys = FuzzySystem::default();
    let mc = MetricsConfig::default();
    let got = grid_search(&frames, &truth, &DEFAULT_ALPHAS, &DEFAULT_CS, &base, &sys, &mc).unwrap();
    assert_eq!(got.cells.len(), 90);
    let (a, c, ks) = oracles::grid_argmax(&frames, &truth, &DEFAULT_ALPHAS, &DEFAULT_CS, &base, &sys, &mc);
    assert_eq!((got.best.alpha, got.best.c), (a, c));
    assert!((got.best.ks - ks).abs() < 1e-12);
}
