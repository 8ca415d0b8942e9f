// SPDX-License-Identifier: Apache-2.0

//! File-level operations behind the command line and the HTTP service. Each
//! takes a serializable request, writes its artifacts under `out_dir` and
//! returns a summary.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera_map::{self, fit_baselines, mapping_metrics, MappingMetrics};
use crate::classifier::{Confusion, Label};
use crate::error::{Error, Result};
use crate::features::{
    fit_normalizer, rank_features, score_curve, CurvePoint, FeatureRanking, NUM_FEATURES,
};
use crate::fusion::{Detection, GridCell, GridFrame, LidarCandidate, MetricsConfig, TruthObject};
use crate::io::{self, DetectionRecord, DETECTION_HEADER};
use crate::pipeline::{
    self, dataset_samples, evaluate, group_detections, train_mapper_on, train_svm_on, MetricsReport, Pipeline,
    PipelineConfig, Samples, StageTimings,
};
use crate::simulator::{load_dataset, parse_scenario, write_dataset, TRUTH_FILE};

pub const SVM_MODEL_FILE: &str = "svm_model.json";
pub const MAPPER_MODEL_FILE: &str = "mapper_model.json";
pub const DETECTIONS_FILE: &str = "detections.csv";
pub const LIDAR_DETECTIONS_FILE: &str = "lidar_detections.csv";
pub const CAMERA_DETECTIONS_FILE: &str = "camera_detections.csv";
pub const CANDIDATES_FILE: &str = "lidar_candidates.csv";
pub const FRONT_GUARD_FILE: &str = "front_guard.csv";
pub const FEATURE_MODEL_FILE: &str = "feature_model.json";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const METRICS_FILE: &str = "metrics.json";

/// Body of every failed service response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

/// One-shot processing of in-memory frames with the models named in the
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramesRequest {
    pub config: PipelineConfig,
    pub frames: Vec<pipeline::FrameInput>,
}

pub fn process_frames(req: &FramesRequest) -> Result<Vec<pipeline::FrameResult>> {
    Pipeline::from_config(req.config.clone())?.run(&req.frames, false)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).at_path(dir))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRequest {
    /// Scenario document in TOML.
    pub scenario: String,
    pub seed: u64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateResponse {
    pub out_dir: PathBuf,
    pub frames: usize,
    pub objects: usize,
    pub beacons: usize,
}

pub fn simulate(req: &SimulateRequest) -> Result<SimulateResponse> {
    let scenario = parse_scenario(&req.scenario, "scenario")?;
    let manifest = write_dataset(&req.out_dir, &scenario, req.seed)?;
    let truth: Vec<TruthObject> = io::read_csv(&req.out_dir.join(TRUTH_FILE))?;
    Ok(SimulateResponse {
        out_dir: req.out_dir.clone(),
        frames: manifest.frames.len(),
        objects: truth.len(),
        beacons: truth.iter().filter(|t| t.is_beacon()).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRequest {
    pub config: PipelineConfig,
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSvmResponse {
    pub model: PathBuf,
    pub samples: usize,
    pub beacons: usize,
    pub training: Confusion,
}

pub fn train_svm(req: &TrainRequest) -> Result<TrainSvmResponse> {
    req.config.validate()?;
    let dataset = load_dataset(&req.dataset)?;
    let samples = dataset_samples(&dataset, &req.config)?;
    let file = train_svm_on(&samples, &req.config)?;
    let (model, _) = file.into_parts()?;
    let mut training = Confusion::default();
    for (f, &l) in samples.features.iter().zip(&samples.labels) {
        training.record(l, model.classify(f));
    }
    create_dir(&req.out_dir)?;
    let path = req.out_dir.join(SVM_MODEL_FILE);
    io::write_json(&path, &file)?;
    Ok(TrainSvmResponse {
        model: path,
        samples: samples.len(),
        beacons: samples.count(Label::Beacon),
        training,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMapperResponse {
    pub model: PathBuf,
    pub pairs: usize,
    /// Fit of the network on its training pairs.
    pub training: MappingMetrics,
    /// Fit of the closed-form regressions on the same pairs.
    pub baseline: MappingMetrics,
}

pub fn train_mapper(req: &TrainRequest) -> Result<TrainMapperResponse> {
    req.config.validate()?;
    let dataset = load_dataset(&req.dataset)?;
    let pairs = dataset.pairs()?;
    let net = train_mapper_on(&dataset, &req.config)?;
    let truth: Vec<(f64, f64)> = pairs.iter().map(|p| (p.distance, p.angle)).collect();
    let nn: Vec<(f64, f64)> = pairs
        .iter()
        .map(|p| {
            let d = camera_map::predict(&net, &p.bbox);
            (d.distance, d.angle)
        })
        .collect();
    let baselines = fit_baselines(&pairs)?;
    let base: Vec<(f64, f64)> = pairs.iter().map(|p| baselines.predict(&p.bbox)).collect();
    create_dir(&req.out_dir)?;
    let path = req.out_dir.join(MAPPER_MODEL_FILE);
    io::write_json(&path, &net)?;
    Ok(TrainMapperResponse {
        model: path,
        pairs: pairs.len(),
        training: mapping_metrics(&nn, &truth)?,
        baseline: mapping_metrics(&base, &truth)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankFeaturesRequest {
    pub config: PipelineConfig,
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    /// Fraction of samples held out for the test score.
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankFeaturesResponse {
    pub ranking: FeatureRanking,
    pub curve: Vec<CurvePoint>,
    pub files: Vec<PathBuf>,
}

fn split(samples: &Samples, test_fraction: f64, seed: u64) -> (Samples, Samples) {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (samples.len() as f64 * test_fraction).round() as usize;
    let pick = |ids: &[usize]| Samples {
        features: ids.iter().map(|&i| samples.features[i]).collect(),
        labels: ids.iter().map(|&i| samples.labels[i]).collect(),
        distances: ids.iter().map(|&i| samples.distances[i]).collect(),
    };
    (pick(&idx[n_test..]), pick(&idx[..n_test]))
}

/// Normalizer statistics of the training split with the feature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub mu: [f64; NUM_FEATURES],
    pub sigma: [f64; NUM_FEATURES],
    /// One-based feature numbers, best first.
    pub ranking: Vec<usize>,
}

#[derive(Serialize)]
struct RankRow {
    rank: usize,
    feature: usize,
    score: f64,
}

pub fn rank(req: &RankFeaturesRequest) -> Result<RankFeaturesResponse> {
    req.config.validate()?;
    if !(req.test_fraction > 0.0 && req.test_fraction < 1.0) {
        return Err(Error::invalid("test fraction must lie in (0, 1)"));
    }
    let dataset = load_dataset(&req.dataset)?;
    let samples = dataset_samples(&dataset, &req.config)?;
    let (train, test) = split(&samples, req.test_fraction, req.config.seed);
    let ranking = rank_features(&train.features, &train.labels)?;
    let curve = score_curve(
        &ranking,
        (&train.features, &train.labels),
        (&test.features, &test.labels),
        &req.config.svm,
    )?;
    create_dir(&req.out_dir)?;
    let ranking_path = req.out_dir.join("feature_ranking.csv");
    let rows = ranking.order.iter().enumerate().map(|(r, &k)| RankRow {
        rank: r + 1,
        feature: k + 1,
        score: ranking.scores[k],
    });
    io::write_csv(&ranking_path, &["rank", "feature", "score"], rows)?;
    let curve_path = req.out_dir.join("score_curve.csv");
    io::write_csv(&curve_path, &["k", "score_train", "score_test"], &curve)?;
    let normalizer = fit_normalizer(&train.features)?;
    let model_path = req.out_dir.join(FEATURE_MODEL_FILE);
    let model = FeatureModel {
        mu: normalizer.mu,
        sigma: normalizer.sigma,
        ranking: ranking.order.iter().map(|k| k + 1).collect(),
    };
    io::write_json(&model_path, &model)?;
    Ok(RankFeaturesResponse {
        ranking,
        curve,
        files: vec![ranking_path, curve_path, model_path],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    pub config: PipelineConfig,
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    /// Treat a frame over the time budget as an error.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResponse {
    pub frames: usize,
    pub detections: usize,
    pub median_frame_ms: f64,
    pub max_frame_ms: f64,
    /// Frames that exceeded the per-frame budget.
    pub over_budget: Vec<u64>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct CandidateRecord {
    frame_id: u64,
    dist_m: f64,
    angle_deg: f64,
    discriminant: f64,
}

type CsvOut = csv::Writer<BufWriter<File>>;

fn csv_out(path: &Path, header: &[&str]) -> Result<CsvOut> {
    let f = File::create(path).map_err(|e| Error::from(e).at_path(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(f));
    w.write_record(header)?;
    Ok(w)
}

fn write_records(w: &mut CsvOut, frame_id: u64, dets: &[Detection]) -> Result<()> {
    for r in pipeline::detection_records(frame_id, dets) {
        w.serialize(r)?;
    }
    Ok(())
}

pub fn run(req: &RunRequest) -> Result<RunResponse> {
    let pipeline = Pipeline::from_config(req.config.clone())?;
    let dataset = load_dataset(&req.dataset)?;
    create_dir(&req.out_dir)?;
    let names = [
        DETECTIONS_FILE,
        LIDAR_DETECTIONS_FILE,
        CAMERA_DETECTIONS_FILE,
        FRONT_GUARD_FILE,
    ];
    let files: Vec<PathBuf> = names
        .iter()
        .chain(&[CANDIDATES_FILE, TIMINGS_FILE])
        .map(|n| req.out_dir.join(n))
        .collect();
    let mut outs = files[..4]
        .iter()
        .map(|p| csv_out(p, &DETECTION_HEADER))
        .collect::<Result<Vec<_>>>()?;
    let mut candidates = csv_out(&files[4], &["frame_id", "dist_m", "angle_deg", "discriminant"])?;
    let mut timings = csv_out(&files[5], &StageTimings::HEADER)?;

    let budget = req.config.frame_budget_ms;
    let mut all_times = Vec::new();
    let mut over_budget = Vec::new();
    let mut detections = 0;
    pipeline.run_dataset(&dataset, req.strict, |r| {
        let id = r.frame_id;
        write_records(&mut outs[0], id, &r.fused)?;
        write_records(&mut outs[1], id, &r.lidar)?;
        write_records(&mut outs[2], id, &r.camera)?;
        write_records(&mut outs[3], id, &r.front_guard)?;
        for c in &r.candidates {
            candidates.serialize(CandidateRecord {
                frame_id: id,
                dist_m: c.distance,
                angle_deg: c.angle,
                discriminant: c.discriminant,
            })?;
        }
        let t = r.timings;
        timings.serialize((id, t.preprocess, t.cluster, t.features, t.classify, t.camera, t.fusion, t.total()))?;
        if t.total() > budget {
            over_budget.push(id);
        }
        detections += r.fused.len();
        all_times.push(t);
        Ok(())
    })?;
    for w in outs.iter_mut().chain([&mut candidates, &mut timings]) {
        w.flush()?;
    }
    Ok(RunResponse {
        frames: all_times.len(),
        detections,
        median_frame_ms: pipeline::median_total_ms(&all_times).unwrap_or(0.0),
        max_frame_ms: all_times.iter().map(StageTimings::total).fold(0.0, f64::max),
        over_budget,
        files,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateRequest {
    pub metrics: MetricsConfig,
    pub detections: PathBuf,
    pub truth: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateResponse {
    pub report: MetricsReport,
    pub file: PathBuf,
}

pub fn evaluate_detections(req: &EvaluateRequest) -> Result<EvaluateResponse> {
    let records: Vec<DetectionRecord> = io::read_csv(&req.detections)?;
    let truth: Vec<TruthObject> = io::read_csv(&req.truth)?;
    let frames = group_detections(&records, &truth);
    let report = evaluate(&frames, &truth, &req.metrics)?;
    create_dir(&req.out_dir)?;
    let file = req.out_dir.join(METRICS_FILE);
    io::write_json(&file, &report)?;
    Ok(EvaluateResponse { report, file })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchRequest {
    pub config: PipelineConfig,
    /// Output directory of an earlier `run`.
    pub run_dir: PathBuf,
    pub truth: PathBuf,
    pub alphas: Vec<f64>,
    pub cs: Vec<f64>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResponse {
    pub best: GridCell,
    pub cells: usize,
    pub files: Vec<PathBuf>,
}

/// Rebuilds per-frame grid inputs from the candidate and camera tables of a
/// run. Frames with truth but no detections are included empty.
pub fn load_grid_frames(run_dir: &Path, truth: &[TruthObject]) -> Result<Vec<GridFrame>> {
    let candidates: Vec<CandidateRecord> = io::read_csv(&run_dir.join(CANDIDATES_FILE))?;
    let camera: Vec<DetectionRecord> = io::read_csv(&run_dir.join(CAMERA_DETECTIONS_FILE))?;
    let mut ids: BTreeSet<u64> = truth.iter().map(|t| t.frame_id).collect();
    ids.extend(candidates.iter().map(|c| c.frame_id));
    ids.extend(camera.iter().map(|c| c.frame_id));
    let mut frames: std::collections::BTreeMap<u64, GridFrame> = ids
        .into_iter()
        .map(|frame_id| {
            let f = GridFrame {
                frame_id,
                lidar: Vec::new(),
                camera: Vec::new(),
            };
            (frame_id, f)
        })
        .collect();
    for c in candidates.iter().filter(|c| c.discriminant <= 0.0) {
        frames.get_mut(&c.frame_id).expect("frame listed").lidar.push(LidarCandidate {
            distance: c.dist_m,
            angle: c.angle_deg,
            discriminant: c.discriminant,
        });
    }
    for c in &camera {
        frames.get_mut(&c.frame_id).expect("frame listed").camera.push(c.detection());
    }
    Ok(frames.into_values().collect())
}

pub fn grid_search(req: &GridSearchRequest) -> Result<GridSearchResponse> {
    req.config.validate()?;
    let truth: Vec<TruthObject> = io::read_csv(&req.truth)?;
    let frames = load_grid_frames(&req.run_dir, &truth)?;
    let grid = pipeline::run_grid(&frames, &truth, &req.alphas, &req.cs, &req.config)?;
    let mut files = pipeline::write_grid(&req.out_dir, &grid)?;
    let best = req.out_dir.join("grid_best.json");
    io::write_json(&best, &grid.best)?;
    files.push(best);
    Ok(GridSearchResponse {
        best: grid.best,
        cells: grid.cells.len(),
        files,
    })
}
