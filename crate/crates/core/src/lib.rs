// SPDX-License-Identifier: Apache-2.0

//! Beacon detection from an eight-beam LiDAR and a camera detector, fused
//! with a fuzzy-logic confidence system.
//!
//! Per frame, LiDAR returns are filtered and split by intensity, bright
//! points are clustered, each cluster is described by twenty geometric
//! features and scored by a linear SVM. Camera boxes are mapped to polar
//! positions by a small neural network. Detections from both sensors are
//! associated by azimuth and their confidences combined by a Mamdani
//! inference system.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera_map;
pub mod classifier;
pub mod clustering;
pub mod error;
pub mod features;
pub mod fusion;
pub mod io;
pub mod ops;
pub mod pipeline;
pub mod point_cloud;
pub mod simulator;

pub use error::{Error, Result};
