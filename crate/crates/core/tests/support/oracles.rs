// SPDX-License-Identifier: Apache-2.0

//! Straightforward re-implementations used as test oracles. They favor
//! obviousness over speed and share no code with the library.

use rand::Rng;

use beacon_core::fusion::{self, FrameDetections, FusionConfig, FuzzySystem, GridFrame, MetricsConfig, TruthObject};
use beacon_core::point_cloud::LidarPoint;

/// Line-by-line bright point clustering. Returns a 1-based cluster number
/// per point. The centroid is recomputed from all members after each
/// assignment.
pub fn algorithm1(xy: &[(f64, f64)], epsilon: f64) -> Vec<usize> {
    let np = xy.len();
    let mut cluster = vec![0usize; np];
    let mut cl = 0;
    for j in 0..np {
        if cluster[j] != 0 {
            continue;
        }
        cl += 1;
        cluster[j] = cl;
        let mut centroid = xy[j];
        for m in (j + 1)..np {
            if cluster[m] != 0 {
                continue;
            }
            let d = ((xy[m].0 - centroid.0).powi(2) + (xy[m].1 - centroid.1).powi(2)).sqrt();
            if d < epsilon {
                cluster[m] = cl;
                let members: Vec<usize> = (0..np).filter(|&i| cluster[i] == cl).collect();
                let n = members.len() as f64;
                centroid = (
                    members.iter().map(|&i| xy[i].0).sum::<f64>() / n,
                    members.iter().map(|&i| xy[i].1).sum::<f64>() / n,
                );
            }
        }
    }
    cluster
}

/// Bright cloud of up to `max_points` points made of a few blobs plus
/// scattered singles.
pub fn random_bright_cloud(rng: &mut impl Rng, max_points: usize) -> Vec<LidarPoint> {
    let n = rng.random_range(0..=max_points);
    let blobs: Vec<(f64, f64, f64)> = (0..rng.random_range(1..8))
        .map(|_| {
            (
                rng.random_range(1.0..25.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(0.05..1.0),
            )
        })
        .collect();
    (0..n)
        .map(|_| {
            let (x, y) = if rng.random::<f64>() < 0.8 {
                let (bx, by, s) = blobs[rng.random_range(0..blobs.len())];
                (bx + rng.random_range(-s..s), by + rng.random_range(-s..s))
            } else {
                (rng.random_range(0.0..30.0), rng.random_range(-15.0..15.0))
            };
            LidarPoint::new(x, y, rng.random_range(-1.0..1.0), rng.random_range(15..255), rng.random_range(0..8))
                .unwrap()
        })
        .collect()
}

/// Population mean and standard deviation, two-pass.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Camera-driven nearest-azimuth matching by exhaustive candidate listing.
pub fn associate(camera: &[f64], lidar: &[f64], a: f64) -> Vec<(usize, usize)> {
    let mut used = vec![false; lidar.len()];
    let mut pairs = Vec::new();
    for (ci, c) in camera.iter().enumerate() {
        let mut cands: Vec<(f64, usize)> = lidar
            .iter()
            .enumerate()
            .filter(|(li, _)| !used[*li])
            .map(|(li, l)| ((c - l).abs(), li))
            .filter(|(g, _)| *g < a)
            .collect();
        cands.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        if let Some(&(_, li)) = cands.first() {
            used[li] = true;
            pairs.push((ci, li));
        }
    }
    pairs
}

/// Repeatedly pairs the globally closest unmatched detection and truth
/// object within the gate. Returns the truth index per detection.
pub fn match_greedy(dets: &[[f64; 2]], truth: &[[f64; 2]], gate: f64) -> Vec<Option<usize>> {
    let mut out = vec![None; dets.len()];
    let mut taken = vec![false; truth.len()];
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, d) in dets.iter().enumerate() {
            if out[i].is_some() {
                continue;
            }
            for (j, t) in truth.iter().enumerate() {
                if taken[j] {
                    continue;
                }
                let e = ((d[0] - t[0]).powi(2) + (d[1] - t[1]).powi(2)).sqrt();
                if e <= gate && best.is_none_or(|(be, _, _)| e < be) {
                    best = Some((e, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        out[i] = Some(j);
        taken[j] = true;
    }
    out
}

/// `(tp, fp, fn, tn)` over all frames by direct counting.
pub fn count_outcomes(frames: &[FrameDetections], truth: &[TruthObject], gate: f64) -> (usize, usize, usize, usize) {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for f in frames {
        let objs: Vec<&TruthObject> = truth.iter().filter(|t| t.frame_id == f.frame_id).collect();
        let dets: Vec<[f64; 2]> = f.detections.iter().map(|d| d.xy()).collect();
        let txy: Vec<[f64; 2]> = objs.iter().map(|t| t.xy()).collect();
        let m = match_greedy(&dets, &txy, gate);
        for mj in &m {
            match mj {
                Some(j) if objs[*j].is_beacon() => tp += 1,
                _ => fp += 1,
            }
        }
        for (j, t) in objs.iter().enumerate() {
            if !m.contains(&Some(j)) {
                if t.is_beacon() {
                    fn_ += 1;
                } else {
                    tn += 1;
                }
            }
        }
    }
    (tp, fp, fn_, tn)
}

/// Sequential exhaustive grid evaluation. Returns `(alpha, C, ks)` of the
/// best cell, preferring larger `C` and then larger `alpha` on ties.
pub fn grid_argmax(
    frames: &[GridFrame],
    truth: &[TruthObject],
    alphas: &[f64],
    cs: &[f64],
    base: &FusionConfig,
    system: &FuzzySystem,
    metrics: &MetricsConfig,
) -> (f64, f64, f64) {
    let mut best: Option<(f64, f64, f64)> = None;
    for &alpha in alphas {
        for &c in cs {
            let cfg = FusionConfig {
                alpha,
                confidence_threshold: c,
                ..*base
            };
            let fused: Vec<FrameDetections> = frames
                .iter()
                .map(|f| {
                    let lidar: Vec<fusion::Detection> = f
                        .lidar
                        .iter()
                        .map(|l| {
                            let conf = 1.0 / (1.0 + (alpha * l.discriminant).exp());
                            fusion::Detection::new(l.distance, l.angle, conf, fusion::Source::Lidar)
                        })
                        .collect();
                    FrameDetections {
                        frame_id: f.frame_id,
                        detections: fusion::fuse_frame(&f.camera, &lidar, &cfg, system),
                    }
                })
                .collect();
            let (tp, fp, fn_, tn) = count_outcomes(&fused, truth, metrics.gate);
            let tpr = tp as f64 / (tp + fn_) as f64;
            let fpr = if fp + tn == 0 { 0.0 } else { fp as f64 / (fp + tn) as f64 };
            let ks = tpr - fpr;
            let better = match best {
                None => true,
                Some((ba, bc, bks)) => ks > bks || (ks == bks && (c > bc || (c == bc && alpha > ba))),
            };
            if better {
                best = Some((alpha, c, ks));
            }
        }
    }
    best.expect("non-empty grid")
}
