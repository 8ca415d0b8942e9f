// SPDX-License-Identifier: Apache-2.0

//! Hand-built clusters with every feature value worked out by hand.

use beacon_core::features::{extract_features, RegionConfig, NUM_FEATURES};
use beacon_core::point_cloud::{LidarPoint, PointCloud};

pub type Row = (f64, f64, f64, u32, u8);

pub struct Fixture {
    pub centroid: [f64; 3],
    pub radius: f64,
    pub high: &'static [Row],
    /// Points present only in the low-threshold set; the bright points are
    /// added automatically.
    pub low_only: &'static [Row],
    pub expected: [f64; NUM_FEATURES],
}

pub const COUNT_FEATURES: [usize; 9] = [5, 7, 9, 10, 11, 12, 16, 17, 18];

pub fn cloud(rows: &[Row]) -> PointCloud {
    let pts = rows
        .iter()
        .map(|&(x, y, z, i, b)| LidarPoint::new(x, y, z, i, b).unwrap())
        .collect();
    PointCloud::new(0, 0.0, pts)
}

/// Feature mismatches of `f`, one message per wrong feature.
pub fn mismatches(f: &Fixture) -> Vec<String> {
    let high = cloud(f.high);
    let mut low_rows = f.high.to_vec();
    low_rows.extend_from_slice(f.low_only);
    let low = cloud(&low_rows);
    let got = extract_features(&high, &low, f.centroid, f.radius, &RegionConfig::default());
    (0..NUM_FEATURES)
        .filter(|&k| {
            if COUNT_FEATURES.contains(&k) {
                got[k] != f.expected[k]
            } else {
                (got[k] - f.expected[k]).abs() > 1e-9
            }
        })
        .map(|k| format!("f{} = {} expected {}", k + 1, got[k], f.expected[k]))
        .collect()
}

// Eight pole returns from z = -1.0 to 0.9 on beams 4..7, three cone returns,
// one return under z_min and one outer-region return.
pub const POLE: Fixture = Fixture {
    centroid: [10.0, 0.0, -0.05],
    radius: 0.01,
    high: &[
        (9.98, 0.0, -1.0, 120, 4),
        (9.98, 0.01, -0.7, 121, 4),
        (9.98, -0.01, -0.5, 122, 5),
        (9.98, 0.0, -0.2, 123, 5),
        (9.98, 0.01, 0.0, 124, 6),
        (9.98, -0.01, 0.3, 125, 6),
        (9.98, 0.0, 0.6, 126, 7),
        (9.98, 0.01, 0.9, 127, 7),
    ],
    low_only: &[
        (9.85, 0.1, -1.15, 8, 4),
        (9.9, -0.12, -1.1, 7, 4),
        (10.1, 0.05, -1.17, 9, 4),
        (9.8, 0.0, -1.19, 6, 3),
        (10.7, -0.6, -0.4, 5, 5),
    ],
    expected: [
        1.9,
        0.01,
        0.72,
        -0.5,
        2.07,
        2.0,
        0.02,
        3.0,
        0.25,
        5.0,
        2.0,
        2.0,
        2.0,
        0.01,
        3.0 / 0.01001,
        0.25,
        2.0,
        11.0,
        12.0,
        0.7,
    ],
};

pub const VEST: Fixture = Fixture {
    centroid: [5.8, 2.0, -0.15],
    radius: 0.11,
    high: &[
        (5.82, 1.95, -0.31, 110, 5),
        (5.81, 2.05, -0.31, 112, 5),
        (5.83, 2.1, 0.0, 108, 6),
        (5.8, 1.9, 0.0, 111, 6),
    ],
    low_only: &[
        (5.86, 1.98, -0.63, 6, 4),
        (5.87, 2.02, -0.63, 5, 4),
        (5.84, 2.12, -0.31, 7, 5),
        (5.85, 1.84, 0.0, 6, 6),
        (6.6, 2.7, -0.9, 4, 4),
    ],
    expected: [
        0.31,
        0.0,
        0.17,
        -1.4,
        0.9,
        0.0,
        0.26,
        3.0,
        0.07,
        2.0,
        3.0,
        3.0,
        2.0,
        0.17,
        3.0 / 0.11001,
        0.07,
        0.0,
        8.0,
        9.0,
        0.86,
    ],
};

// Beam-5 side returns spanning 2.0 m in x (to both outer edges) and 1.5 m
// in y.
pub const VEHICLE: Fixture = Fixture {
    centroid: [12.0, -3.0, -0.42],
    radius: 0.1,
    high: &[
        (11.9, -3.0, -0.63, 130, 5),
        (12.1, -3.0, -0.63, 131, 5),
        (12.0, -3.05, 0.0, 129, 6),
    ],
    low_only: &[
        (11.0, -3.0, -0.63, 9, 5),
        (13.0, -3.5, -0.63, 9, 5),
        (12.2, -2.25, -0.63, 10, 5),
        (12.5, -3.75, -0.63, 8, 5),
        (12.0, -2.9, 0.62, 10, 7),
    ],
    expected: [
        0.63,
        0.0,
        2.0,
        -1.4,
        1.25,
        1.0,
        0.0,
        6.0,
        0.2,
        0.0,
        2.0,
        1.0,
        1.0,
        0.2,
        6.0 / 0.10001,
        0.2,
        0.0,
        4.0,
        8.0,
        1.5,
    ],
};

// Nothing inside either region: one bright point 3 m ahead of the window,
// one under z_min, one far to the side.
pub const EMPTY: Fixture = Fixture {
    centroid: [8.0, 1.0, 0.0],
    radius: 0.0,
    high: &[(11.0, 1.0, 0.0, 140, 6)],
    low_only: &[(8.0, 1.0, -1.25, 4, 2), (5.0, -2.0, 0.5, 7, 7)],
    expected: [0.0; NUM_FEATURES],
};

// Points exactly on each region face are inside; points 1e-7 beyond are out.
pub const BOUNDARY: Fixture = Fixture {
    centroid: [4.0, 0.0, 0.0],
    radius: 0.2,
    high: &[
        (4.25, 0.0, 0.0, 100, 6),
        (3.75, 0.25, -1.18, 101, 5),
        (4.2500001, 0.0, 0.1, 102, 6),
        (4.0, 0.0, -1.1800001, 103, 5),
    ],
    low_only: &[
        (5.0, 1.0, 0.2, 5, 7),
        (3.0, -1.0, 0.4, 5, 7),
        (5.0000001, 0.0, 0.3, 5, 7),
        (4.0, -1.0000001, 0.3, 5, 6),
    ],
    expected: [
        1.18,
        2.0,
        0.0,
        -1.3,
        1.58,
        0.0,
        0.0,
        1.0,
        0.5,
        0.0,
        1.0,
        2.0,
        1.0,
        0.0,
        1.0 / 0.20001,
        0.5,
        0.0,
        2.0,
        5.0,
        2.0,
    ],
};

pub const ALL: [(&str, &Fixture); 5] = [
    ("beacon pole", &POLE),
    ("vest person", &VEST),
    ("wide vehicle", &VEHICLE),
    ("empty regions", &EMPTY),
    ("boundary points", &BOUNDARY),
];
