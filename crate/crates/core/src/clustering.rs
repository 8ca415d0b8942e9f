// SPDX-License-Identifier: Apache-2.0

//! Greedy centroid clustering of bright points, and the front-guard obstacle
//! check.
//!
//! The clustering is a single forward scan. An unassigned point seeds a new
//! cluster whose centroid starts at that point; every later unassigned point
//! whose xy-distance to the *current* centroid is below `epsilon` joins the
//! cluster and the centroid is updated as a running mean. Cluster ids start
//! at 1 and follow seed order.
//!
//! Because the test is against an evolving centroid, the result depends on
//! point order. Permuting the input can change the partition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{Detection, Source};
use crate::point_cloud::{LidarPoint, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    /// Join distance in the xy plane (meters).
    pub epsilon: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { epsilon: 0.5 }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("cluster epsilon must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// 1-based, in seed order.
    pub id: usize,
    /// Indices into the clustered cloud, ascending.
    pub members: Vec<usize>,
    /// Mean xy of the members.
    pub centroid: [f64; 2],
}

impl Cluster {
    /// Largest xy-distance of a member from the centroid.
    pub fn radius(&self, points: &[LidarPoint]) -> f64 {
        self.members
            .iter()
            .map(|&i| points[i].xy_distance_to(self.centroid))
            .fold(0.0, f64::max)
    }

    pub fn mean_z(&self, points: &[LidarPoint]) -> f64 {
        let sum: f64 = self.members.iter().map(|&i| points[i].z).sum();
        sum / self.members.len() as f64
    }

    /// Centroid with the mean member height as third coordinate.
    pub fn centroid3(&self, points: &[LidarPoint]) -> [f64; 3] {
        [self.centroid[0], self.centroid[1], self.mean_z(points)]
    }
}

pub fn cluster_bright_points(bright: &PointCloud, cfg: &ClusterConfig) -> Vec<Cluster> {
    cluster_points(&bright.points, cfg.epsilon)
}

pub fn cluster_points(points: &[LidarPoint], epsilon: f64) -> Vec<Cluster> {
    let mut assigned = vec![false; points.len()];
    let mut clusters = Vec::new();

    for seed in 0..points.len() {
        if assigned[seed] {
            continue;
        }
        assigned[seed] = true;
        let mut members = vec![seed];
        let mut centroid = points[seed].xy();

        for (m, p) in points.iter().enumerate().skip(seed + 1) {
            if assigned[m] || p.xy_distance_to(centroid) >= epsilon {
                continue;
            }
            assigned[m] = true;
            members.push(m);
            let n = members.len() as f64;
            centroid[0] += (p.x - centroid[0]) / n;
            centroid[1] += (p.y - centroid[1]) / n;
        }

        clusters.push(Cluster {
            id: clusters.len() + 1,
            members,
            centroid,
        });
    }
    clusters
}

/// Per-point cluster id (1-based) for a clustering of `n` points.
pub fn cluster_labels(clusters: &[Cluster], n: usize) -> Vec<usize> {
    let mut labels = vec![0; n];
    for c in clusters {
        for &i in &c.members {
            labels[i] = c.id;
        }
    }
    labels
}

/// Rectangular volume ahead of the vehicle; bounds are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontGuardRegion {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub z_range: (f64, f64),
}

impl Default for FrontGuardRegion {
    fn default() -> Self {
        Self {
            x_range: (0.5, 6.0),
            y_range: (-1.0, 1.0),
            z_range: (-1.2, 1.5),
        }
    }
}

impl FrontGuardRegion {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("x", self.x_range), ("y", self.y_range), ("z", self.z_range)] {
            if !(lo < hi) {
                return Err(Error::config(format!("front guard {name} range must have min < max")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &LidarPoint) -> bool {
        (self.x_range.0..=self.x_range.1).contains(&p.x)
            && (self.y_range.0..=self.y_range.1).contains(&p.y)
            && (self.z_range.0..=self.z_range.1).contains(&p.z)
    }
}

/// Reports every point group inside the guard region, regardless of
/// intensity.
pub fn front_guard_detect(
    nonground: &PointCloud,
    region: &FrontGuardRegion,
    cfg: &ClusterConfig,
) -> Vec<Detection> {
    let inside: Vec<LidarPoint> = nonground.points.iter().filter(|p| region.contains(p)).copied().collect();
    cluster_points(&inside, cfg.epsilon)
        .iter()
        .map(|c| Detection::from_xy(c.centroid, 1.0, Source::Lidar))
        .collect()
}
