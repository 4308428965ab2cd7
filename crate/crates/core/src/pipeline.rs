//! End-to-end orchestration: synthetic demonstration, finger assignment,
//! online retargeting, dataset sampling, controller training and tracking.
//!
//! Every command writes into a run directory through [`RunDir`], which keeps a
//! manifest of the files it produced together with their SHA-256 digests and
//! the hash of the configuration that produced them. Artifacts carry no
//! timestamps, so identical configurations give byte-identical runs.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, Stream};
use crate::control::{evaluate, fit_controllers, BenchmarkResult, FittedControllers};
use crate::demo::{synth_demo_with, Demonstration, SynthOptions, Template};
use crate::sim::{sample_dataset, Dataset, RobotHand, SpineFinger};
use crate::stage1::{run_stage1, FingerAssignment};
use crate::stage2::{run_stage2, RetargetedTrajectory};
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_SNAPSHOT: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifact {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// In write order; the config snapshot comes first.
    pub artifacts: Vec<Artifact>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse("manifest JSON", e))
    }

    pub fn artifact(&self, path: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.path == path)
    }
}

/// Output directory of one command.
#[derive(Debug)]
pub struct RunDir {
    dir: PathBuf,
    manifest: Manifest,
}

impl RunDir {
    /// Creates `dir` if needed and writes the config snapshot.
    pub fn create(dir: impl Into<PathBuf>, command: &str, config: &RunConfig) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut run = Self {
            dir,
            manifest: Manifest {
                command: command.to_string(),
                config_hash: config.hash(),
                seed: config.seed,
                artifacts: Vec::new(),
                warnings: Vec::new(),
            },
        };
        run.write(CONFIG_SNAPSHOT, config.to_toml_string())?;
        Ok(run)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config_hash(&self) -> &str {
        &self.manifest.config_hash
    }

    /// Writes `contents` to `rel` (creating parent directories) and records it.
    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let contents = contents.as_ref();
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.manifest.artifacts.retain(|a| a.path != rel);
        self.manifest.artifacts.push(Artifact {
            path: rel.to_string(),
            bytes: contents.len(),
            sha256: hex::encode(Sha256::digest(contents)),
        });
        Ok(path)
    }

    /// Records a warning in the manifest; logging is left to the caller.
    pub fn warn(&mut self, message: impl Into<String>) {
        self.manifest.warnings.push(message.into());
    }

    /// Writes the manifest and returns it.
    pub fn finish(self) -> Result<Manifest> {
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.dir.join(MANIFEST);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(self.manifest)
    }
}

/// Synthetic demonstration from `config.demo`, seeded by the demo stream.
pub fn synth_stage(config: &RunConfig) -> Result<Demonstration> {
    let d = &config.demo;
    let template = Template::from_str(&d.template)?;
    let opts = SynthOptions {
        frames: d.frames,
        rate_hz: d.rate_hz,
        mesh_resolution: d.mesh_resolution,
    };
    Ok(synth_demo_with(template, config.seed_for(Stream::Demo), &opts)?)
}

pub fn plant(config: &RunConfig) -> Result<SpineFinger> {
    SpineFinger::new(config.spine, config.limits()?)
}

pub fn robot_hand(config: &RunConfig) -> Result<RobotHand> {
    config.hand.validate()?;
    RobotHand::ring(config.hand.n_fingers, config.hand.ring_radius, config.hand.base_height, plant(config)?)
}

pub fn assign_stage(demo: &Demonstration, config: &RunConfig) -> Result<FingerAssignment> {
    let hand = robot_hand(config)?;
    let mut a = run_stage1(
        demo,
        &hand,
        &config.retarget,
        config.hand.envelope_samples,
        config.seed_for(Stream::Envelope),
    )?;
    a.config_hash = Some(config.hash());
    Ok(a)
}

pub fn retarget_stage(demo: &Demonstration, assignment: &FingerAssignment, config: &RunConfig) -> Result<RetargetedTrajectory> {
    let mut t = run_stage2(demo, assignment, &config.retarget)?;
    t.config_hash = Some(config.hash());
    Ok(t)
}

/// The shared controller dataset from `config.benchmark`.
pub fn sample_stage(config: &RunConfig) -> Result<Dataset> {
    config.benchmark.validate()?;
    sample_dataset(
        &plant(config)?,
        config.benchmark.samples,
        config.seed_for(Stream::Dataset),
        config.benchmark.noise_std,
    )
}

pub fn train_stage(dataset: &Dataset, config: &RunConfig) -> Result<FittedControllers> {
    config.spine.validate()?;
    config.train.validate()?;
    config.benchmark.validate()?;
    let mut fitted = fit_controllers(dataset, config)?;
    fitted.forward.metadata.config_hash = Some(config.hash());
    Ok(fitted)
}

pub fn track_stage(fitted: &FittedControllers, dataset: &Dataset, config: &RunConfig) -> Result<BenchmarkResult> {
    config.invert.validate()?;
    let mut result = evaluate(fitted, &plant(config)?, dataset, config)?;
    result.config_hash = Some(config.hash());
    Ok(result)
}

/// File stem for a tracking report, e.g. `inverse_mlp_circle`.
pub fn report_stem(controller: &str, shape: Option<crate::control::Shape>) -> String {
    match shape {
        Some(s) => format!("{controller}_{s}"),
        None => controller.to_string(),
    }
}

/// Writes per-report CSV, JSON and SVG under `tracking/`, then the benchmark
/// summary.
pub fn write_benchmark(run: &mut RunDir, result: &BenchmarkResult) -> Result<()> {
    for r in &result.reports {
        let stem = report_stem(&r.controller, r.shape);
        run.write(&format!("tracking/{stem}.csv"), r.to_csv_string())?;
        run.write(&format!("tracking/{stem}.json"), r.to_json_string())?;
        run.write(&format!("tracking/{stem}.svg"), r.overlay_plot().to_svg())?;
    }
    run.write("benchmark.json", result.to_json_string())?;
    run.write("benchmark_summary.csv", result.summary_csv())?;
    Ok(())
}

pub fn write_trajectory(run: &mut RunDir, trajectory: &RetargetedTrajectory, plot: bool) -> Result<()> {
    run.write("trajectory.json", trajectory.to_json_string())?;
    run.write("trajectory.csv", trajectory.to_csv_string())?;
    if plot {
        run.write("trajectory_delta.svg", trajectory.delta_plot().to_svg())?;
    }
    Ok(())
}

/// Everything the full pipeline produced, kept in memory for callers.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub manifest: Manifest,
    pub assignment: FingerAssignment,
    pub trajectory: RetargetedTrajectory,
    pub benchmark: BenchmarkResult,
}

/// Runs every stage into `out_dir`. With `demo = None` the demonstration is
/// synthesised from `config.demo`. Errors name the stage that failed.
pub fn run_pipeline(config: &RunConfig, demo: Option<Demonstration>, out_dir: impl Into<PathBuf>) -> Result<PipelineOutput> {
    let demo = match demo {
        Some(d) => d,
        None => synth_stage(config).map_err(|e| e.in_stage("synth"))?,
    };
    let mut run = RunDir::create(out_dir, "pipeline", config)?;
    run.write("demo.json", demo.to_json_string())?;

    let assignment = assign_stage(&demo, config).map_err(|e| e.in_stage("assign"))?;
    for w in &assignment.warnings {
        run.warn(w.clone());
    }
    run.write("assignment.json", assignment.to_json_string())?;

    let trajectory = retarget_stage(&demo, &assignment, config).map_err(|e| e.in_stage("retarget"))?;
    write_trajectory(&mut run, &trajectory, true)?;

    let dataset = sample_stage(config).map_err(|e| e.in_stage("sample"))?;
    run.write("dataset.csv", dataset.to_csv_string())?;

    let fitted = train_stage(&dataset, config).map_err(|e| e.in_stage("train"))?;
    run.write("forward_model.json", fitted.forward.to_json_string())?;

    let benchmark = track_stage(&fitted, &dataset, config).map_err(|e| e.in_stage("track"))?;
    write_benchmark(&mut run, &benchmark)?;

    let manifest = run.finish()?;
    Ok(PipelineOutput {
        manifest,
        assignment,
        trajectory,
        benchmark,
    })
}
