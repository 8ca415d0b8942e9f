// SPDX-License-Identifier: Apache-2.0

//! End-to-end orchestration: training, per-frame detection and fusion,
//! evaluation and the hyperparameter grid.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera_map::{self, BoundingBox, MapperNetwork, MapperTrainConfig};
use crate::classifier::{self, Label, LinearSvmModel, SvmModelFile, SvmParams};
use crate::clustering::{self, ClusterConfig, FrontGuardRegion};
use crate::error::{Error, Result};
use crate::features::{self, FeatureVector, RegionConfig};
use crate::fusion::{
    self, grid_search, Band, Detection, DetectionMetrics, FrameDetections, FusionConfig, FuzzySystem, GridFrame,
    GridResult, LidarCandidate, MetricsConfig, TruthObject,
};
use crate::io::{self, DetectionRecord};
use crate::point_cloud::{self, PreprocessConfig, RawCloud};
use crate::simulator::{Dataset, ManifestFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// LiDAR candidates beyond this range (meters) are discarded.
    pub lidar_max_range: f64,
    /// Clusters within this distance of a true beacon are labeled beacons
    /// when building training samples.
    pub label_radius: f64,
    /// Per-frame processing budget (milliseconds).
    pub frame_budget_ms: f64,
    pub image_width: f64,
    pub image_height: f64,
    pub svm_model: Option<PathBuf>,
    pub mapper_model: Option<PathBuf>,
    pub preprocess: PreprocessConfig,
    pub cluster: ClusterConfig,
    pub region: RegionConfig,
    pub fusion: FusionConfig,
    pub front_guard: FrontGuardRegion,
    pub metrics: MetricsConfig,
    pub svm: SvmParams,
    pub mapper: MapperTrainConfig,
    pub fuzzy: FuzzySystem,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            lidar_max_range: 20.0,
            label_radius: 0.6,
            frame_budget_ms: 200.0,
            image_width: 640.0,
            image_height: 480.0,
            svm_model: None,
            mapper_model: None,
            preprocess: PreprocessConfig::default(),
            cluster: ClusterConfig::default(),
            region: RegionConfig::default(),
            fusion: FusionConfig::default(),
            front_guard: FrontGuardRegion::default(),
            metrics: MetricsConfig::default(),
            svm: SvmParams::default(),
            mapper: MapperTrainConfig::default(),
            fuzzy: FuzzySystem::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lidar_max_range > 0.0 && self.label_radius > 0.0 && self.frame_budget_ms > 0.0) {
            return Err(Error::config("ranges and frame budget must be positive"));
        }
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(Error::config("image size must be positive"));
        }
        if !(self.metrics.gate > 0.0) {
            return Err(Error::config("match gate must be positive"));
        }
        self.preprocess.validate()?;
        self.cluster.validate()?;
        self.region.validate()?;
        self.fusion.validate()?;
        self.front_guard.validate()?;
        self.mapper.validate()?;
        self.fuzzy.validate()
    }

    pub fn image(&self) -> (f64, f64) {
        (self.image_width, self.image_height)
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            Error::Parse {
                path: origin.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

pub fn load_svm(path: &Path) -> Result<LinearSvmModel> {
    let file: SvmModelFile = io::read_json(path)?;
    let (model, _) = file.into_parts().map_err(|e| e.at_path(path))?;
    Ok(model)
}

pub fn load_mapper(path: &Path) -> Result<MapperNetwork> {
    let net: MapperNetwork = io::read_json(path)?;
    net.validate().map_err(|e| e.at_path(path))?;
    Ok(net)
}

/// One frame of sensor input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameInput {
    pub cloud: RawCloud,
    #[serde(default)]
    pub boxes: Vec<BoundingBox>,
}

/// Wall time per stage, milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub preprocess: f64,
    pub cluster: f64,
    pub features: f64,
    pub classify: f64,
    pub camera: f64,
    pub fusion: f64,
}

impl StageTimings {
    pub const HEADER: [&'static str; 8] =
        ["frame_id", "preprocess_ms", "cluster_ms", "features_ms", "classify_ms", "camera_ms", "fusion_ms", "total_ms"];

    pub fn total(&self) -> f64 {
        self.preprocess + self.cluster + self.features + self.classify + self.camera + self.fusion
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub frame_id: u64,
    /// Every in-range cluster with its discriminant.
    pub candidates: Vec<LidarCandidate>,
    /// Clusters the classifier declares beacons, with pseudo-confidence.
    pub lidar: Vec<Detection>,
    /// Mapped camera boxes, nearest first.
    pub camera: Vec<Detection>,
    /// Final output after association, fuzzy fusion and thresholding.
    pub fused: Vec<Detection>,
    /// Obstacles in the guard volume ahead.
    pub front_guard: Vec<Detection>,
    pub timings: StageTimings,
}

impl FrameResult {
    pub fn grid_frame(&self) -> GridFrame {
        GridFrame {
            frame_id: self.frame_id,
            lidar: self.candidates.iter().filter(|c| c.discriminant <= 0.0).copied().collect(),
            camera: self.camera.clone(),
        }
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Trained models plus configuration; immutable and shareable across
/// threads.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: PipelineConfig,
    pub svm: LinearSvmModel,
    pub mapper: MapperNetwork,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, svm: LinearSvmModel, mapper: MapperNetwork) -> Result<Self> {
        config.validate()?;
        mapper.validate()?;
        Ok(Self { config, svm, mapper })
    }

    /// Loads the models named in the configuration.
    pub fn from_config(config: PipelineConfig) -> Result<Self> {
        let svm_path = config
            .svm_model
            .as_deref()
            .ok_or_else(|| Error::config("no svm_model path configured"))?;
        let mapper_path = config
            .mapper_model
            .as_deref()
            .ok_or_else(|| Error::config("no mapper_model path configured"))?;
        let svm = load_svm(svm_path)?;
        let mapper = load_mapper(mapper_path)?;
        Self::new(config, svm, mapper)
    }

    pub fn process_frame(&self, input: &FrameInput) -> Result<FrameResult> {
        let cfg = &self.config;
        let frame_id = input.cloud.frame_id;
        let mut t = StageTimings::default();

        let start = Instant::now();
        let pre = point_cloud::preprocess(&input.cloud, &cfg.preprocess).map_err(|e| e.in_frame(frame_id, "preprocess"))?;
        t.preprocess = ms(start);

        let start = Instant::now();
        let clusters = clustering::cluster_bright_points(&pre.high, &cfg.cluster);
        let front_guard = clustering::front_guard_detect(&pre.nonground, &cfg.front_guard, &cfg.cluster);
        t.cluster = ms(start);

        let start = Instant::now();
        let in_range: Vec<_> = clusters
            .iter()
            .filter(|c| c.centroid[0].hypot(c.centroid[1]) <= cfg.lidar_max_range)
            .collect();
        let feats: Vec<FeatureVector> = in_range
            .iter()
            .map(|c| {
                let centroid = c.centroid3(&pre.high.points);
                features::extract_features(&pre.high, &pre.low, centroid, c.radius(&pre.high.points), &cfg.region)
            })
            .collect();
        if let Some(bad) = feats.iter().position(|f| !f.is_finite()) {
            return Err(Error::invalid(format!("non-finite features for cluster {}", in_range[bad].id))
                .in_frame(frame_id, "features"));
        }
        t.features = ms(start);

        let start = Instant::now();
        let sigmoid = cfg.fusion.sigmoid();
        let candidates: Vec<LidarCandidate> = in_range
            .iter()
            .zip(&feats)
            .map(|(c, f)| {
                let d = Detection::from_xy(c.centroid, 0.0, fusion::Source::Lidar);
                LidarCandidate {
                    distance: d.distance,
                    angle: d.angle,
                    discriminant: self.svm.discriminant(f),
                }
            })
            .collect();
        let lidar: Vec<Detection> = candidates
            .iter()
            .filter(|c| classifier::decide(c.discriminant) == Label::Beacon)
            .map(|c| c.detection(&sigmoid))
            .collect();
        t.classify = ms(start);

        let start = Instant::now();
        let mut camera = input
            .boxes
            .iter()
            .map(|b| {
                b.validate()?;
                Ok(camera_map::predict(&self.mapper, b))
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_frame(frame_id, "camera"))?;
        // Nearest first, so a far box cannot claim the LiDAR partner of a
        // nearer object on the same bearing.
        camera.sort_by(|a, b| a.distance.total_cmp(&b.distance));
        t.camera = ms(start);

        let start = Instant::now();
        let fused = fusion::fuse_frame(&camera, &lidar, &cfg.fusion, &cfg.fuzzy);
        t.fusion = ms(start);

        Ok(FrameResult {
            frame_id,
            candidates,
            lidar,
            camera,
            fused,
            front_guard,
            timings: t,
        })
    }

    /// Processes frames in parallel; results keep input order. In strict
    /// mode a frame over the budget is an error.
    pub fn run(&self, inputs: &[FrameInput], strict: bool) -> Result<Vec<FrameResult>> {
        inputs
            .par_iter()
            .map(|i| {
                let r = self.process_frame(i)?;
                self.check_budget(&r, strict)?;
                Ok(r)
            })
            .collect()
    }

    fn check_budget(&self, r: &FrameResult, strict: bool) -> Result<()> {
        let total = r.timings.total();
        if strict && total > self.config.frame_budget_ms {
            return Err(Error::invalid(format!(
                "took {total:.1} ms, over the {:.0} ms budget",
                self.config.frame_budget_ms
            ))
            .in_frame(r.frame_id, "budget"));
        }
        Ok(())
    }

    /// Streams a dataset through the pipeline in bounded-memory batches,
    /// calling `sink` for each result in frame order.
    pub fn run_dataset(
        &self,
        dataset: &Dataset,
        strict: bool,
        mut sink: impl FnMut(FrameResult) -> Result<()>,
    ) -> Result<()> {
        for chunk in dataset.manifest.frames.chunks(64) {
            let results: Vec<FrameResult> = chunk
                .par_iter()
                .map(|f| {
                    let input = dataset_input(dataset, f)?;
                    let r = self.process_frame(&input)?;
                    self.check_budget(&r, strict)?;
                    Ok(r)
                })
                .collect::<Result<_>>()?;
            for r in results {
                sink(r)?;
            }
        }
        Ok(())
    }
}

fn dataset_input(dataset: &Dataset, f: &ManifestFrame) -> Result<FrameInput> {
    let cloud = dataset.cloud(f).map_err(|e| e.in_frame(f.frame_id, "load"))?;
    Ok(FrameInput {
        cloud,
        boxes: dataset.boxes_for(f.frame_id).to_vec(),
    })
}

/// Labeled classifier training samples.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<Label>,
    /// Cluster range, for per-band analysis.
    pub distances: Vec<f64>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn extend(&mut self, other: Samples) {
        self.features.extend(other.features);
        self.labels.extend(other.labels);
        self.distances.extend(other.distances);
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }
}

/// Clusters one frame and labels each cluster against the truth beacons.
pub fn frame_samples(cloud: &RawCloud, truth: &[&TruthObject], cfg: &PipelineConfig) -> Result<Samples> {
    let pre = point_cloud::preprocess(cloud, &cfg.preprocess).map_err(|e| e.in_frame(cloud.frame_id, "preprocess"))?;
    let mut out = Samples::default();
    for c in clustering::cluster_bright_points(&pre.high, &cfg.cluster) {
        let centroid = c.centroid3(&pre.high.points);
        let f = features::extract_features(&pre.high, &pre.low, centroid, c.radius(&pre.high.points), &cfg.region);
        let near_beacon = truth.iter().any(|t| {
            let [x, y] = t.xy();
            t.is_beacon() && (x - c.centroid[0]).hypot(y - c.centroid[1]) <= cfg.label_radius
        });
        out.features.push(f);
        out.labels.push(if near_beacon { Label::Beacon } else { Label::NonBeacon });
        out.distances.push(c.centroid[0].hypot(c.centroid[1]));
    }
    Ok(out)
}

fn truth_by_frame(truth: &[TruthObject]) -> BTreeMap<u64, Vec<&TruthObject>> {
    let mut m: BTreeMap<u64, Vec<&TruthObject>> = BTreeMap::new();
    for t in truth {
        m.entry(t.frame_id).or_default().push(t);
    }
    m
}

pub fn dataset_samples(dataset: &Dataset, cfg: &PipelineConfig) -> Result<Samples> {
    let truth = truth_by_frame(&dataset.truth);
    let parts: Vec<Samples> = dataset
        .manifest
        .frames
        .par_iter()
        .map(|f| {
            let cloud = dataset.cloud(f).map_err(|e| e.in_frame(f.frame_id, "load"))?;
            frame_samples(&cloud, truth.get(&f.frame_id).map_or(&[], Vec::as_slice), cfg)
        })
        .collect::<Result<_>>()?;
    let mut out = Samples::default();
    for p in parts {
        out.extend(p);
    }
    Ok(out)
}

pub fn train_svm_on(samples: &Samples, cfg: &PipelineConfig) -> Result<SvmModelFile> {
    let model = classifier::train_svm(&samples.features, &samples.labels, &cfg.svm)?;
    Ok(SvmModelFile::new(&model, &cfg.fusion.sigmoid()))
}

/// Mapper trained on the dataset's beacon box pairs.
pub fn train_mapper_on(dataset: &Dataset, cfg: &PipelineConfig) -> Result<MapperNetwork> {
    let pairs = dataset.pairs()?;
    camera_map::train_mapper(&pairs, &MapperTrainConfig { seed: cfg.seed, ..cfg.mapper })
}

/// Groups detection rows by frame, adding an empty entry for every truth
/// frame that has none so misses are still counted.
pub fn group_detections(records: &[DetectionRecord], truth: &[TruthObject]) -> Vec<FrameDetections> {
    let mut frames: BTreeMap<u64, Vec<Detection>> = BTreeMap::new();
    for t in truth {
        frames.entry(t.frame_id).or_default();
    }
    for r in records {
        frames.entry(r.frame_id).or_default().push(r.detection());
    }
    frames
        .into_iter()
        .map(|(frame_id, detections)| FrameDetections { frame_id, detections })
        .collect()
}

pub fn detection_records(frame_id: u64, dets: &[Detection]) -> impl Iterator<Item = DetectionRecord> + '_ {
    dets.iter().map(move |d| DetectionRecord::new(frame_id, d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandMetrics {
    pub min: f64,
    pub max: f64,
    /// Absent when the band holds no beacons.
    pub metrics: Option<DetectionMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frames: usize,
    pub overall: DetectionMetrics,
    pub bands: Vec<BandMetrics>,
}

pub const REPORT_BANDS: [(f64, f64); 2] = [(3.0, 20.0), (20.0, 40.0)];

pub fn evaluate(frames: &[FrameDetections], truth: &[TruthObject], cfg: &MetricsConfig) -> Result<MetricsReport> {
    let overall = fusion::detection_metrics(frames, truth, cfg, None)?;
    let bands = REPORT_BANDS
        .iter()
        .map(|&(min, max)| BandMetrics {
            min,
            max,
            metrics: fusion::detection_metrics(frames, truth, cfg, Some(Band { min, max })).ok(),
        })
        .collect();
    Ok(MetricsReport {
        frames: frames.len(),
        overall,
        bands,
    })
}

/// Writes `alpha x C` matrices of TPR, FPR and TPR - FPR plus a long-form
/// table of every cell. Returns the written paths.
pub fn write_grid(dir: &Path, grid: &GridResult) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).at_path(dir))?;
    let mut header = vec!["alpha".to_string()];
    header.extend(grid.cs.iter().map(|c| format!("C={c}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut paths = Vec::new();
    type Pick = fn(&fusion::GridCell) -> f64;
    let metrics: [(&str, Pick); 3] = [("tpr", |c| c.tpr), ("fpr", |c| c.fpr), ("ks", |c| c.ks)];
    for (name, pick) in metrics {
        let path = dir.join(format!("grid_{name}.csv"));
        let rows: Vec<Vec<f64>> = grid
            .alphas
            .iter()
            .enumerate()
            .map(|(ai, &a)| {
                let mut row = vec![a];
                row.extend((0..grid.cs.len()).map(|ci| pick(grid.cell(ai, ci))));
                row
            })
            .collect();
        io::write_csv(&path, &header, rows)?;
        paths.push(path);
    }
    let path = dir.join("grid_cells.csv");
    io::write_csv(&path, &["alpha", "C", "tpr", "fpr", "ks"], &grid.cells)?;
    paths.push(path);
    Ok(paths)
}

pub fn run_grid(
    frames: &[GridFrame],
    truth: &[TruthObject],
    alphas: &[f64],
    cs: &[f64],
    cfg: &PipelineConfig,
) -> Result<GridResult> {
    grid_search(frames, truth, alphas, cs, &cfg.fusion, &cfg.fuzzy, &cfg.metrics)
}

/// Truth restricted to the given frames.
pub fn truth_for_frames(truth: &[TruthObject], frame_ids: &BTreeSet<u64>) -> Vec<TruthObject> {
    truth.iter().filter(|t| frame_ids.contains(&t.frame_id)).cloned().collect()
}

/// Median of per-frame total times, or `None` for no frames.
pub fn median_total_ms(timings: &[StageTimings]) -> Option<f64> {
    if timings.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = timings.iter().map(StageTimings::total).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera_map::MapperNetwork;
    use crate::features::FeatureNormalizer;

    fn pipeline() -> Pipeline {
        let svm = LinearSvmModel {
            w: [0.0; features::NUM_FEATURES],
            b: -1.0,
            normalizer: FeatureNormalizer::identity(),
        };
        Pipeline::new(PipelineConfig::default(), svm, MapperNetwork::init(1)).unwrap()
    }

    #[test]
    fn empty_frame_still_yields_result() {
        let input = FrameInput {
            cloud: RawCloud {
                frame_id: 9,
                timestamp: 0.0,
                points: vec![],
            },
            boxes: vec![],
        };
        let r = pipeline().process_frame(&input).unwrap();
        assert_eq!(r.frame_id, 9);
        assert!(r.fused.is_empty() && r.lidar.is_empty() && r.camera.is_empty());
        assert!(r.timings.total() >= 0.0);
    }

    #[test]
    fn config_round_trip() {
        let cfg = PipelineConfig {
            svm_model: Some("m/svm.json".into()),
            seed: 11,
            ..Default::default()
        };
        let text = cfg.to_toml().unwrap();
        assert_eq!(PipelineConfig::from_toml(&text, "x").unwrap(), cfg);
    }

    #[test]
    fn unknown_config_key_rejected() {
        let err = PipelineConfig::from_toml("[fusion]\nangle = 3.0\n", "cfg.toml").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn bad_box_names_frame_and_stage() {
        let input = FrameInput {
            cloud: RawCloud {
                frame_id: 4,
                timestamp: 0.0,
                points: vec![],
            },
            boxes: vec![BoundingBox {
                xmin: 10.0,
                ymin: 10.0,
                xmax: 5.0,
                ymax: 20.0,
                confidence: 0.9,
                image_width: 640.0,
                image_height: 480.0,
            }],
        };
        match pipeline().process_frame(&input).unwrap_err() {
            Error::Frame { frame_id, stage, .. } => assert_eq!((frame_id, stage), (4, "camera")),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_truth_frames_are_kept() {
        let truth = vec![TruthObject {
            frame_id: 2,
            object_id: 1,
            kind: crate::simulator::ObjectKind::Beacon,
            distance: 5.0,
            angle: 0.0,
        }];
        let frames = group_detections(&[], &truth);
        assert_eq!(frames.len(), 1);
        let m = evaluate(&frames, &truth, &MetricsConfig::default()).unwrap();
        assert_eq!(m.overall.counts.fn_, 1);
    }

    #[test]
    fn median_of_even_count() {
        let t = |v| StageTimings {
            preprocess: v,
            ..Default::default()
        };
        assert_eq!(median_total_ms(&[t(1.0), t(3.0), t(2.0), t(10.0)]), Some(2.5));
        assert_eq!(median_total_ms(&[]), None);
    }
}
