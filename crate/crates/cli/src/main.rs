use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use softhand::config::RunConfig;
use softhand::control::{track, ForwardModel, InverseController, Shape};
use softhand::demo::Demonstration;
use softhand::error::ErrorKind;
use softhand::pipeline::{self, RunDir};
use softhand::sim::{Dataset, SpineFinger};
use softhand::stage1::FingerAssignment;
use softhand::Result;

#[derive(Parser, Debug)]
#[command(name = "softhand", version, about = "Retarget hand demonstrations to a soft robot hand and evaluate fingertip controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Root seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the command's artifacts and manifest.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic demonstration (demo.json).
    SynthDemo {
        #[command(flatten)]
        common: Common,
        /// pinch_lift, twist or pour.
        #[arg(long)]
        template: Option<String>,
        #[arg(long)]
        frames: Option<usize>,
        /// Vertices per finger strip.
        #[arg(long)]
        mesh_resolution: Option<usize>,
    },
    /// Assign robot fingers to human fingers (assignment.json).
    Assign {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE")]
        demo: PathBuf,
        #[arg(long)]
        n_fingers: Option<usize>,
    },
    /// Retarget a demonstration under a fixed assignment (trajectory.json/.csv).
    Retarget {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE")]
        demo: PathBuf,
        #[arg(long, value_name = "FILE")]
        assignment: PathBuf,
        /// Also write an SVG of the adjustment norms.
        #[arg(long)]
        plot: bool,
    },
    /// Sample the simulated finger (dataset.csv).
    SimSample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
        /// Displacement noise standard deviation (m).
        #[arg(long)]
        noise_std: Option<f64>,
    },
    /// Train the forward model on a dataset (forward_model.json).
    TrainFwd {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Track a reference shape with the inverse_mlp controller.
    Track {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// square, circle, triangle or rectangle.
        #[arg(long, default_value = "circle")]
        shape: String,
        #[arg(long)]
        waypoints: Option<usize>,
        #[arg(long)]
        loops: Option<usize>,
        /// Start every inversion from u = 0 instead of the previous solution.
        #[arg(long)]
        cold: bool,
    },
    /// Fit all four controllers on one dataset and track every shape.
    EvalControllers {
        #[command(flatten)]
        common: Common,
        /// Use this dataset instead of sampling one.
        #[arg(long, value_name = "FILE")]
        dataset: Option<PathBuf>,
    },
    /// Run every stage end to end.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Use this demonstration instead of synthesising one.
        #[arg(long, value_name = "FILE")]
        demo: Option<PathBuf>,
        #[arg(long)]
        template: Option<String>,
    },
}

fn finish(run: RunDir) -> Result<()> {
    let dir = run.dir().display().to_string();
    let m = run.finish()?;
    println!("wrote {} artifacts to {dir}", m.artifacts.len() + 1);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthDemo {
            common,
            template,
            frames,
            mesh_resolution,
        } => {
            let mut cfg = common.load()?;
            if let Some(t) = template {
                cfg.demo.template = t;
            }
            if let Some(f) = frames {
                cfg.demo.frames = f;
            }
            if let Some(r) = mesh_resolution {
                cfg.demo.mesh_resolution = r;
            }
            let demo = pipeline::synth_stage(&cfg)?;
            let mut run = RunDir::create(&common.out_dir, "synth-demo", &cfg)?;
            run.write("demo.json", demo.to_json_string())?;
            finish(run)
        }
        Command::Assign { common, demo, n_fingers } => {
            let mut cfg = common.load()?;
            if let Some(n) = n_fingers {
                cfg.hand.n_fingers = n;
            }
            let demo = Demonstration::load(&demo)?;
            let a = pipeline::assign_stage(&demo, &cfg)?;
            let mut run = RunDir::create(&common.out_dir, "assign", &cfg)?;
            for w in &a.warnings {
                run.warn(w.clone());
            }
            run.write("assignment.json", a.to_json_string())?;
            println!("objective {} matching_cost {}", a.objective, a.matching_cost);
            finish(run)
        }
        Command::Retarget {
            common,
            demo,
            assignment,
            plot,
        } => {
            let cfg = common.load()?;
            let demo = Demonstration::load(&demo)?;
            let assignment = FingerAssignment::load(&assignment)?;
            let t = pipeline::retarget_stage(&demo, &assignment, &cfg)?;
            let mut run = RunDir::create(&common.out_dir, "retarget", &cfg)?;
            pipeline::write_trajectory(&mut run, &t, plot)?;
            println!("frames {} max_delta_m {}", t.frames.len(), t.max_delta());
            finish(run)
        }
        Command::SimSample {
            common,
            samples,
            noise_std,
        } => {
            let mut cfg = common.load()?;
            if let Some(n) = samples {
                cfg.benchmark.samples = n;
            }
            if let Some(s) = noise_std {
                cfg.benchmark.noise_std = s;
            }
            let data = pipeline::sample_stage(&cfg)?;
            let mut run = RunDir::create(&common.out_dir, "sim-sample", &cfg)?;
            run.write("dataset.csv", data.to_csv_string())?;
            finish(run)
        }
        Command::TrainFwd {
            common,
            dataset,
            epochs,
            learning_rate,
            batch_size,
        } => {
            let mut cfg = common.load()?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(l) = learning_rate {
                cfg.train.learning_rate = l;
            }
            if let Some(b) = batch_size {
                cfg.train.batch_size = b;
            }
            cfg.train.validate()?;
            let data = Dataset::load(&dataset)?;
            let seed = cfg.seed_for(softhand::config::Stream::Training);
            let mut model = softhand::control::train_forward(&data, cfg.limits()?, &cfg.train, seed)?;
            model.metadata.config_hash = Some(cfg.hash());
            let mut run = RunDir::create(&common.out_dir, "train-fwd", &cfg)?;
            run.write("forward_model.json", model.to_json_string())?;
            if let Some(r) = &model.metadata.train.validation_rmse {
                println!("validation_rmse_m {} {} {}", r[0], r[1], r[2]);
            }
            finish(run)
        }
        Command::Track {
            common,
            model,
            shape,
            waypoints,
            loops,
            cold,
        } => {
            let mut cfg = common.load()?;
            if let Some(w) = waypoints {
                cfg.benchmark.waypoints = w;
            }
            if let Some(l) = loops {
                cfg.benchmark.loops = l;
            }
            cfg.benchmark.validate()?;
            cfg.invert.validate()?;
            let shape: Shape = shape.parse()?;
            let model = ForwardModel::load(&model)?;
            let plant = SpineFinger::new(cfg.spine, model.limits)?;
            let mut c = InverseController::new(&model, cfg.invert);
            if cold {
                c = c.cold();
            }
            let report = track(&mut c, &shape.waypoints(cfg.benchmark.waypoints), &plant, cfg.benchmark.loops, Some(shape))?;
            let mut run = RunDir::create(&common.out_dir, "track", &cfg)?;
            let stem = pipeline::report_stem(&report.controller, report.shape);
            run.write(&format!("{stem}.csv"), report.to_csv_string())?;
            run.write(&format!("{stem}.json"), report.to_json_string())?;
            run.write(&format!("{stem}.svg"), report.overlay_plot().to_svg())?;
            println!("rmse_mm {} mean_mm {} max_mm {}", report.rmse_mm, report.mean_mm, report.max_mm);
            finish(run)
        }
        Command::EvalControllers { common, dataset } => {
            let cfg = common.load()?;
            let data = match dataset {
                Some(p) => Dataset::load(&p)?,
                None => pipeline::sample_stage(&cfg)?,
            };
            let fitted = pipeline::train_stage(&data, &cfg)?;
            let result = pipeline::track_stage(&fitted, &data, &cfg)?;
            let mut run = RunDir::create(&common.out_dir, "eval-controllers", &cfg)?;
            pipeline::write_benchmark(&mut run, &result)?;
            for s in &result.summary {
                println!("{} rmse_mm {}", s.controller, s.rmse_mm);
            }
            finish(run)
        }
        Command::Pipeline { common, demo, template } => {
            let mut cfg = common.load()?;
            if let Some(t) = template {
                cfg.demo.template = t;
            }
            let demo = demo.as_deref().map(Demonstration::load).transpose()?;
            let out = pipeline::run_pipeline(&cfg, demo, &common.out_dir)?;
            for s in &out.benchmark.summary {
                println!("{} rmse_mm {}", s.controller, s.rmse_mm);
            }
            println!("wrote {} artifacts to {}", out.manifest.artifacts.len() + 1, common.out_dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = match e.kind() {
                ErrorKind::Input => ("input", 2),
                ErrorKind::Numerical => ("numerical", 3),
            };
            let msg = e.to_string().replace('\n', " ");
            eprintln!("softhand: error[{kind}]: {msg}");
            ExitCode::from(code)
        }
    }
}
