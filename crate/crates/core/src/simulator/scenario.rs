// SPDX-License-Identifier: Apache-2.0

//! Scenario files and on-disk datasets.
//!
//! A scenario is a TOML document with optional `[lidar]` and `[camera]`
//! tables and any number of `[[grid]]`, `[[sweep]]` and `[[random]]`
//! sections, expanded into frames in that order. Object layouts depend only
//! on `layout_seed`; sensor noise depends only on the render seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    derive_seed, render_camera, render_lidar, CameraDetection, CameraModel, LidarModel, ObjectKind, Scene,
    SceneObject,
};
use crate::camera_map::{BoundingBox, MapperPair};
use crate::error::{Error, Result};
use crate::fusion::TruthObject;
use crate::io::{self, BoxRecord};
use crate::point_cloud::RawCloud;

fn default_angles() -> Vec<f64> {
    (-4..=4).map(|k| k as f64 * 5.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub angles_deg: Vec<f64>,
    pub distance_min: f64,
    pub distance_max: f64,
    pub distance_step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            angles_deg: default_angles(),
            distance_min: 3.0,
            distance_max: 40.0,
            distance_step: 1.0,
        }
    }
}

impl GridSpec {
    pub fn distances(&self) -> Vec<f64> {
        let n = ((self.distance_max - self.distance_min) / self.distance_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.distance_min + i as f64 * self.distance_step).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.angles_deg.is_empty() || !(self.distance_step > 0.0) || self.distance_min > self.distance_max {
            return Err(Error::config("grid needs angles, a positive step and min <= max"));
        }
        Ok(())
    }
}

/// One beacon dragged along a fixed bearing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub angle_deg: f64,
    pub start_m: f64,
    pub end_m: f64,
    pub frames: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            angle_deg: 0.0,
            start_m: 30.0,
            end_m: 3.0,
            frames: 28,
        }
    }
}

impl SweepSpec {
    fn validate(&self) -> Result<()> {
        if self.frames < 2 || !(self.start_m > 0.0 && self.end_m > 0.0) {
            return Err(Error::config("sweep needs at least 2 frames and positive distances"));
        }
        Ok(())
    }
}

/// Randomized cluttered scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomSpec {
    pub frames: usize,
    /// Inclusive count ranges per object kind.
    pub beacons: [usize; 2],
    pub people: [usize; 2],
    pub vehicles: [usize; 2],
    pub pallets: [usize; 2],
    pub distance_m: [f64; 2],
    pub angle_deg: [f64; 2],
    /// Chance that a person is placed right next to a beacon.
    pub person_near_beacon: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            frames: 100,
            beacons: [1, 4],
            people: [0, 3],
            vehicles: [0, 1],
            pallets: [0, 1],
            distance_m: [3.0, 40.0],
            angle_deg: [-20.0, 20.0],
            person_near_beacon: 0.3,
        }
    }
}

impl RandomSpec {
    fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("beacons", self.beacons),
            ("people", self.people),
            ("vehicles", self.vehicles),
            ("pallets", self.pallets),
        ] {
            if r[0] > r[1] {
                return Err(Error::config(format!("random {name} range must have min <= max")));
            }
        }
        if !(self.distance_m[0] > 0.0 && self.distance_m[0] < self.distance_m[1]) {
            return Err(Error::config("random distance range must be positive and increasing"));
        }
        if !(self.angle_deg[0] < self.angle_deg[1]) {
            return Err(Error::config("random angle range must be increasing"));
        }
        if !(0.0..=1.0).contains(&self.person_near_beacon) {
            return Err(Error::config("person_near_beacon must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn default_layout_seed() -> u64 {
    7
}

fn default_frame_rate() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_layout_seed")]
    pub layout_seed: u64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    #[serde(default)]
    pub lidar: LidarModel,
    #[serde(default)]
    pub camera: CameraModel,
    #[serde(default)]
    pub grid: Vec<GridSpec>,
    #[serde(default)]
    pub sweep: Vec<SweepSpec>,
    #[serde(default)]
    pub random: Vec<RandomSpec>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: String::new(),
            layout_seed: default_layout_seed(),
            frame_rate: default_frame_rate(),
            lidar: LidarModel::default(),
            camera: CameraModel::default(),
            grid: Vec::new(),
            sweep: Vec::new(),
            random: Vec::new(),
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

/// Parses and validates a scenario. `origin` names the source in errors.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        Error::Parse {
            path: origin.to_string(),
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.lidar.validate()?;
        self.camera.validate()?;
        if !(self.frame_rate > 0.0) {
            return Err(Error::config("frame rate must be positive"));
        }
        self.grid.iter().try_for_each(GridSpec::validate)?;
        self.sweep.iter().try_for_each(SweepSpec::validate)?;
        self.random.iter().try_for_each(RandomSpec::validate)?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Object layouts for every frame, in frame order.
    pub fn scenes(&self) -> Vec<Scene> {
        let mut scenes = Vec::new();
        let push = |objects: Vec<SceneObject>, scenes: &mut Vec<Scene>| {
            let frame_id = scenes.len() as u64;
            scenes.push(Scene {
                frame_id,
                timestamp: frame_id as f64 / self.frame_rate,
                objects,
            });
        };
        for g in &self.grid {
            for &a in &g.angles_deg {
                for d in g.distances() {
                    push(vec![SceneObject::new(1, ObjectKind::Beacon, polar(d, a), 0.0)], &mut scenes);
                }
            }
        }
        for s in &self.sweep {
            for i in 0..s.frames {
                let d = s.start_m + (s.end_m - s.start_m) * i as f64 / (s.frames - 1) as f64;
                push(vec![SceneObject::new(1, ObjectKind::Beacon, polar(d, s.angle_deg), 0.0)], &mut scenes);
            }
        }
        for r in &self.random {
            for _ in 0..r.frames {
                let id = scenes.len() as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.layout_seed, id));
                push(random_layout(r, &mut rng), &mut scenes);
            }
        }
        scenes
    }

    pub fn frame_count(&self) -> usize {
        let grid: usize = self.grid.iter().map(|g| g.angles_deg.len() * g.distances().len()).sum();
        let sweep: usize = self.sweep.iter().map(|s| s.frames).sum();
        let random: usize = self.random.iter().map(|r| r.frames).sum();
        grid + sweep + random
    }

    /// Renders one scene with noise streams derived from `(seed, frame_id)`.
    pub fn render_frame(&self, scene: &Scene, seed: u64) -> Frame {
        let cloud = render_lidar(scene, &self.lidar, derive_seed(seed, 2 * scene.frame_id));
        let boxes = render_camera(scene, &self.camera, self.lidar.height, derive_seed(seed, 2 * scene.frame_id + 1));
        Frame {
            frame_id: scene.frame_id,
            timestamp: scene.timestamp,
            cloud,
            boxes,
            truth: truth_rows(scene),
        }
    }
}

fn polar(d: f64, angle_deg: f64) -> [f64; 2] {
    let a = angle_deg.to_radians();
    [d * a.cos(), d * a.sin()]
}

pub fn truth_rows(scene: &Scene) -> Vec<TruthObject> {
    scene
        .objects
        .iter()
        .map(|o| TruthObject {
            frame_id: scene.frame_id,
            object_id: o.id,
            kind: o.kind,
            distance: o.distance(),
            angle: o.angle_deg(),
        })
        .collect()
}

fn clear_of(objects: &[SceneObject], p: [f64; 2], r: f64, margin: f64) -> bool {
    objects.iter().all(|o| {
        let d = (o.position[0] - p[0]).hypot(o.position[1] - p[1]);
        d >= o.footprint_radius() + r + margin
    })
}

fn random_layout(spec: &RandomSpec, rng: &mut ChaCha8Rng) -> Vec<SceneObject> {
    let mut objects: Vec<SceneObject> = Vec::new();
    let count = |r: [usize; 2], rng: &mut ChaCha8Rng| rng.random_range(r[0]..=r[1]);
    let plan = [
        (ObjectKind::Beacon, count(spec.beacons, rng)),
        (ObjectKind::Vehicle, count(spec.vehicles, rng)),
        (ObjectKind::Pallet, count(spec.pallets, rng)),
        (ObjectKind::PersonVest, count(spec.people, rng)),
    ];
    for (kind, n) in plan {
        for _ in 0..n {
            let probe = SceneObject::new(0, kind, [0.0, 0.0], 0.0);
            let r = probe.footprint_radius();
            let beacons: Vec<[f64; 2]> = objects
                .iter()
                .filter(|o| o.kind == ObjectKind::Beacon)
                .map(|o| o.position)
                .collect();
            let near_beacon =
                kind == ObjectKind::PersonVest && !beacons.is_empty() && rng.random::<f64>() < spec.person_near_beacon;
            for _attempt in 0..50 {
                let (p, margin) = if near_beacon {
                    let b = beacons[rng.random_range(0..beacons.len())];
                    let a = rng.random_range(0.0..std::f64::consts::TAU);
                    let d = rng.random_range(0.7..1.5);
                    ([b[0] + d * a.cos(), b[1] + d * a.sin()], 0.1)
                } else {
                    let d = rng.random_range(spec.distance_m[0]..spec.distance_m[1]);
                    let a = rng.random_range(spec.angle_deg[0]..spec.angle_deg[1]);
                    (polar(d, a), 1.0)
                };
                let dist = p[0].hypot(p[1]);
                if dist < spec.distance_m[0] || dist > spec.distance_m[1] || !clear_of(&objects, p, r, margin) {
                    continue;
                }
                let yaw = rng.random_range(-180.0..180.0);
                objects.push(SceneObject::new(objects.len() as u64 + 1, kind, p, yaw));
                break;
            }
        }
    }
    objects
}

/// One rendered frame with its labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub frame_id: u64,
    pub timestamp: f64,
    pub cloud: RawCloud,
    pub boxes: Vec<CameraDetection>,
    pub truth: Vec<TruthObject>,
}

impl Frame {
    pub fn bounding_boxes(&self) -> Vec<BoundingBox> {
        self.boxes.iter().map(|b| b.bbox).collect()
    }

    /// Mapper training pairs from boxes on beacons.
    pub fn mapper_pairs(&self) -> Vec<MapperPair> {
        self.boxes
            .iter()
            .filter(|b| b.truth.kind == ObjectKind::Beacon)
            .map(|b| MapperPair {
                bbox: b.bbox,
                distance: b.truth.distance,
                angle: b.truth.angle,
            })
            .collect()
    }
}

/// Renders every frame of the scenario in memory.
pub fn generate_dataset(scenario: &Scenario, seed: u64) -> Vec<Frame> {
    scenario.scenes().par_iter().map(|s| scenario.render_frame(s, seed)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub frame_id: u64,
    pub timestamp: f64,
    pub lidar: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub seed: u64,
    pub layout_seed: u64,
    pub image_width: f64,
    pub image_height: f64,
    pub lidar_height: f64,
    pub frames: Vec<ManifestFrame>,
}

pub const LIDAR_DIR: &str = "lidar";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BOXES_FILE: &str = "camera_boxes.csv";
pub const PAIRS_FILE: &str = "mapper_pairs.csv";
pub const TRUTH_FILE: &str = "truth.csv";

pub fn lidar_file_name(frame_id: u64) -> String {
    format!("{LIDAR_DIR}/frame_{frame_id:06}.csv")
}

/// Incremental dataset writer; frames must arrive in order.
pub struct DatasetWriter {
    dir: PathBuf,
    manifest: DatasetManifest,
    boxes: Vec<BoxRecord>,
    pairs: Vec<MapperPair>,
    truth: Vec<TruthObject>,
}

impl DatasetWriter {
    pub fn create(dir: &Path, scenario: &Scenario, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(dir.join(LIDAR_DIR)).map_err(|e| Error::from(e).at_path(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: DatasetManifest {
                name: scenario.name.clone(),
                seed,
                layout_seed: scenario.layout_seed,
                image_width: scenario.camera.image_width,
                image_height: scenario.camera.image_height,
                lidar_height: scenario.lidar.height,
                frames: Vec::new(),
            },
            boxes: Vec::new(),
            pairs: Vec::new(),
            truth: Vec::new(),
        })
    }

    pub fn push(&mut self, frame: &Frame) -> Result<()> {
        let name = lidar_file_name(frame.frame_id);
        io::write_cloud_csv(&self.dir.join(&name), &frame.cloud)?;
        self.boxes.extend(frame.boxes.iter().map(|b| BoxRecord::new(frame.frame_id, &b.bbox)));
        self.pairs.extend(frame.mapper_pairs());
        self.truth.extend(frame.truth.iter().cloned());
        self.manifest.frames.push(ManifestFrame {
            frame_id: frame.frame_id,
            timestamp: frame.timestamp,
            lidar: name,
        });
        Ok(())
    }

    pub fn finish(self) -> Result<DatasetManifest> {
        io::write_csv(&self.dir.join(BOXES_FILE), &io::BOX_HEADER, &self.boxes)?;
        io::write_pairs(&self.dir.join(PAIRS_FILE), &self.pairs)?;
        io::write_csv(&self.dir.join(TRUTH_FILE), &io::TRUTH_HEADER, &self.truth)?;
        io::write_json(&self.dir.join(MANIFEST_FILE), &self.manifest)?;
        Ok(self.manifest)
    }
}

/// Renders and writes the scenario to `dir`, in bounded-memory batches.
pub fn write_dataset(dir: &Path, scenario: &Scenario, seed: u64) -> Result<DatasetManifest> {
    let mut writer = DatasetWriter::create(dir, scenario, seed)?;
    let scenes = scenario.scenes();
    for chunk in scenes.chunks(64) {
        let frames: Vec<Frame> = chunk.par_iter().map(|s| scenario.render_frame(s, seed)).collect();
        for f in &frames {
            writer.push(f)?;
        }
    }
    writer.finish()
}

/// A dataset directory with its small tables loaded; clouds are read on
/// demand.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
    pub truth: Vec<TruthObject>,
    pub boxes: BTreeMap<u64, Vec<BoundingBox>>,
}

impl Dataset {
    pub fn image(&self) -> (f64, f64) {
        (self.manifest.image_width, self.manifest.image_height)
    }

    pub fn cloud(&self, frame: &ManifestFrame) -> Result<RawCloud> {
        io::read_cloud(&self.dir.join(&frame.lidar), frame.frame_id, frame.timestamp)
    }

    pub fn boxes_for(&self, frame_id: u64) -> &[BoundingBox] {
        self.boxes.get(&frame_id).map_or(&[], Vec::as_slice)
    }

    pub fn pairs(&self) -> Result<Vec<MapperPair>> {
        io::read_pairs(&self.dir.join(PAIRS_FILE), self.image())
    }
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest: DatasetManifest = io::read_json(&dir.join(MANIFEST_FILE))?;
    let truth: Vec<TruthObject> = io::read_csv(&dir.join(TRUTH_FILE))?;
    let image = (manifest.image_width, manifest.image_height);
    let mut boxes: BTreeMap<u64, Vec<BoundingBox>> = BTreeMap::new();
    let path = dir.join(BOXES_FILE);
    for (i, r) in io::read_csv::<BoxRecord>(&path)?.iter().enumerate() {
        let b = r.to_box(image).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 2,
            column: 1,
            message: e.to_string(),
        })?;
        boxes.entry(r.frame_id).or_default().push(b);
    }
    Ok(Dataset {
        dir: dir.to_path_buf(),
        manifest,
        truth,
        boxes,
    })
}
