// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use tokio::net::TcpListener;

use beacon_client::Client;
use beacon_core::fusion::{DEFAULT_ALPHAS, DEFAULT_CS};
use beacon_core::ops::{
    EvaluateRequest, GridSearchRequest, RankFeaturesRequest, RunRequest, SimulateRequest, TrainRequest,
    MAPPER_MODEL_FILE, SVM_MODEL_FILE,
};
use beacon_core::pipeline::PipelineConfig;

/// Beacon detection from LiDAR and camera with fuzzy fusion.
///
/// Commands are executed by a beacon service. Without `--server` an
/// in-process one is started on a loopback port.
#[derive(Parser)]
#[command(name = "beacon", version, propagate_version = true)]
struct Cli {
    /// Pipeline configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory receiving the command's artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// URL of a running service, e.g. http://127.0.0.1:8080.
    #[arg(long, global = true)]
    server: Option<String>,

    /// Print the full response as JSON instead of a summary.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scenario into a dataset directory.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Train the LiDAR cluster classifier.
    TrainSvm {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Train the camera box to position network.
    TrainMapper {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Rank features by single-feature score and sweep the top-k curve.
    RankFeatures {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
    },
    /// Detect and fuse beacons in every frame of a dataset.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        /// Defaults to the configured path, then to the output directory.
        #[arg(long)]
        svm_model: Option<PathBuf>,
        #[arg(long)]
        mapper_model: Option<PathBuf>,
        /// Fail when a frame exceeds the time budget.
        #[arg(long)]
        strict: bool,
    },
    /// Score detections against ground truth.
    Evaluate {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Sweep the sigmoid slope and confidence threshold.
    GridSearch {
        /// Output directory of `run`.
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        cs: Option<Vec<f64>>,
    },
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).with_context(|| format!("resolving {}", p.display()))
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let mut cfg = PipelineConfig::load(path)?;
            // Model paths in a config file are relative to that file.
            let base = absolute(path)?.parent().map(Path::to_path_buf).unwrap_or_default();
            for p in [&mut cfg.svm_model, &mut cfg.mapper_model].into_iter().flatten() {
                *p = base.join(&*p);
            }
            cfg
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

async fn connect(server: Option<&str>) -> Result<Client> {
    if let Some(url) = server {
        return Ok(Client::new(url));
    }
    let listener = TcpListener::bind("127.0.0.1:0").await.context("starting embedded server")?;
    let addr = listener.local_addr()?;
    tokio::spawn(beacon_server::serve(listener, std::future::pending()));
    Ok(Client::new(format!("http://{addr}")))
}

fn emit<T: Serialize>(json: bool, value: &T, summary: impl FnOnce(&T) -> String) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        println!("{}", summary(value));
    }
    Ok(())
}

#[tokio::main]
async fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut config = load_config(&cli)?;
    let out_dir = absolute(&cli.out_dir)?;
    let client = connect(cli.server.as_deref()).await?;
    let json = cli.json;

    match &cli.command {
        Command::Simulate { scenario } => {
            let text =
                std::fs::read_to_string(scenario).with_context(|| format!("reading {}", scenario.display()))?;
            let req = SimulateRequest {
                scenario: text,
                seed: config.seed,
                out_dir,
            };
            let r = client.simulate(&req).await?;
            emit(json, &r, |r| {
                format!(
                    "wrote {} frames ({} objects, {} beacons) to {}",
                    r.frames,
                    r.objects,
                    r.beacons,
                    r.out_dir.display()
                )
            })?;
        }
        Command::TrainSvm { dataset } => {
            let req = TrainRequest {
                config,
                dataset: absolute(dataset)?,
                out_dir,
            };
            let r = client.train_svm(&req).await?;
            emit(json, &r, |r| {
                format!(
                    "trained on {} samples ({} beacons): TPR={:.4} TNR={:.4}\nmodel: {}",
                    r.samples,
                    r.beacons,
                    r.training.tpr(),
                    r.training.tnr(),
                    r.model.display()
                )
            })?;
        }
        Command::TrainMapper { dataset } => {
            let req = TrainRequest {
                config,
                dataset: absolute(dataset)?,
                out_dir,
            };
            let r = client.train_mapper(&req).await?;
            emit(json, &r, |r| {
                format!(
                    "trained on {} pairs: distance MSE={:.4} (regression {:.4}), angle MSE={:.4} (regression {:.4})\nmodel: {}",
                    r.pairs,
                    r.training.mse_distance,
                    r.baseline.mse_distance,
                    r.training.mse_angle,
                    r.baseline.mse_angle,
                    r.model.display()
                )
            })?;
        }
        Command::RankFeatures { dataset, test_fraction } => {
            let req = RankFeaturesRequest {
                config,
                dataset: absolute(dataset)?,
                out_dir,
                test_fraction: *test_fraction,
            };
            let r = client.rank_features(&req).await?;
            emit(json, &r, |r| {
                let order: Vec<String> = r.ranking.order.iter().map(|k| format!("f{}", k + 1)).collect();
                let best = r.curve.iter().max_by(|a, b| a.score_test.total_cmp(&b.score_test));
                let mut s = format!("ranking: {}", order.join(" "));
                if let Some(b) = best {
                    s += &format!("\nbest test score {:.1} with top {} features", b.score_test, b.k);
                }
                s
            })?;
        }
        Command::Run {
            dataset,
            svm_model,
            mapper_model,
            strict,
        } => {
            let pick = |flag: &Option<PathBuf>, configured: &Option<PathBuf>, file: &str| -> Result<PathBuf> {
                match (flag, configured) {
                    (Some(p), _) => absolute(p),
                    (None, Some(p)) => Ok(p.clone()),
                    (None, None) => Ok(out_dir.join(file)),
                }
            };
            config.svm_model = Some(pick(svm_model, &config.svm_model, SVM_MODEL_FILE)?);
            config.mapper_model = Some(pick(mapper_model, &config.mapper_model, MAPPER_MODEL_FILE)?);
            let budget = config.frame_budget_ms;
            let req = RunRequest {
                config,
                dataset: absolute(dataset)?,
                out_dir,
                strict: *strict,
            };
            let r = client.run(&req).await?;
            emit(json, &r, |r| {
                format!(
                    "processed {} frames, {} detections; median {:.2} ms, max {:.2} ms per frame, {} over the {budget} ms budget",
                    r.frames,
                    r.detections,
                    r.median_frame_ms,
                    r.max_frame_ms,
                    r.over_budget.len()
                )
            })?;
        }
        Command::Evaluate { detections, truth } => {
            let req = EvaluateRequest {
                metrics: config.metrics,
                detections: absolute(detections)?,
                truth: absolute(truth)?,
                out_dir,
            };
            let r = client.evaluate(&req).await?;
            emit(json, &r, |r| {
                let m = &r.report.overall;
                let mut s = format!("TPR={:.3} FPR={:.3} FNR={:.3}", m.tpr, m.fpr, m.fnr);
                for b in &r.report.bands {
                    if let Some(bm) = &b.metrics {
                        s += &format!(
                            "\n  {}-{} m: TPR={:.3} FPR={:.3} FNR={:.3}",
                            b.min, b.max, bm.tpr, bm.fpr, bm.fnr
                        );
                    }
                }
                s
            })?;
        }
        Command::GridSearch {
            run_dir,
            truth,
            alphas,
            cs,
        } => {
            let req = GridSearchRequest {
                config,
                run_dir: absolute(run_dir)?,
                truth: absolute(truth)?,
                alphas: alphas.clone().unwrap_or_else(|| DEFAULT_ALPHAS.to_vec()),
                cs: cs.clone().unwrap_or_else(|| DEFAULT_CS.to_vec()),
                out_dir,
            };
            let r = client.grid_search(&req).await?;
            emit(json, &r, |r| {
                format!(
                    "best of {} cells: alpha={} C={} TPR={:.3} FPR={:.3}",
                    r.cells, r.best.alpha, r.best.c, r.best.tpr, r.best.fpr
                )
            })?;
        }
    }
    Ok(())
}
