use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chunkvqa::csf::{band_edges, scale_weights, weights_from_sensitivity, ViewingEnvironment};
use chunkvqa::datasets::{load_manifest, synthesize_dataset, SynthProfile};
use chunkvqa::training::{
    bench_video, cross_database_eval, run_protocol, score_video, QualityModel, RunConfig,
    RunConfigFile, ScoreReport,
};
use chunkvqa::video::open_video;
use chunkvqa::VqaError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chunkvqa", version, about = "No-reference video quality assessment")]
struct Cli {
    /// Emit machine-readable JSON instead of a table.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and test on ten seeded 80/20 splits; report the median criteria.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `data.manifest` from the config file.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Overrides `data.output_dir`; checkpoints and results go here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score one video with a trained checkpoint.
    Score {
        #[arg(long)]
        checkpoint: PathBuf,
        video: PathBuf,
        /// Fuse scores at the configured display scales.
        #[arg(long)]
        multiscale: bool,
        /// Supplies the viewing environment for --multiscale.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print viewing-resolution factors and per-scale weights.
    Weights {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Debug: flat sensitivity over unit-width bands.
        #[arg(long)]
        flat_csf: bool,
    },
    /// Frame-access counts and per-stage wall time for scoring one video.
    Bench {
        #[arg(long)]
        checkpoint: PathBuf,
        video: PathBuf,
    },
    /// Evaluate a checkpoint on whole target databases, with and without
    /// multi-scale fusion.
    CrossEval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Target manifests (added to `data.targets`).
        #[arg(long = "target")]
        targets: Vec<PathBuf>,
    },
    /// Generate a synthetic labelled dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "stub")]
        profile: String,
    },
}

/// Exit codes: 0 ok, 2 config/validation, 3 I/O, 4 numeric failure.
fn exit_code(err: &VqaError) -> u8 {
    match err {
        VqaError::Io { .. } | VqaError::Decode { .. } | VqaError::UnsupportedContainer(_) => 3,
        VqaError::Numeric(_) | VqaError::Domain(_) | VqaError::UndefinedCorrelation(_) => 4,
        VqaError::InvalidArgument(_)
        | VqaError::ContractViolation(_)
        | VqaError::Validation(_)
        | VqaError::Config(_)
        | VqaError::AdapterUnavailable { .. } => 2,
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<VqaError> for Failure {
    fn from(e: VqaError) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => {
            let file = RunConfigFile::load(p).map_err(|e| config_error(e.to_string()))?;
            let base = p.parent().unwrap_or(Path::new("."));
            file.resolve(base).map_err(|e| config_error(e.to_string()))
        }
        None => RunConfigFile::default()
            .resolve(Path::new("."))
            .map_err(|e| config_error(e.to_string())),
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serialisable"));
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train {
            config,
            manifest,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let manifest_path = manifest
                .or(cfg.manifest)
                .ok_or_else(|| config_error("no manifest given (--manifest or data.manifest)"))?;
            // A missing or malformed manifest is a configuration problem.
            let dataset = load_manifest(&manifest_path)
                .map_err(|e| config_error(format!("manifest {}: {e}", manifest_path.display())))?;
            let out_dir = out.or(cfg.output_dir);
            let report = run_protocol(&dataset, &cfg.train, out_dir.as_deref())?;
            if cli.json {
                print_json(&report.median);
            } else {
                println!("database {} ({} splits)", dataset.name, report.splits.len());
                println!("{:>6} {:>8} {:>10} {:>12}", "split", "SRCC", "PLCC raw", "PLCC fitted");
                for s in &report.splits {
                    println!(
                        "{:>6} {:>8.4} {:>10.4} {:>12.4}",
                        s.repeat_index, s.result.srcc, s.result.plcc_raw, s.result.plcc_fitted
                    );
                }
                let m = &report.median;
                println!(
                    "{:>6} {:>8.4} {:>10.4} {:>12.4}",
                    "median", m.srcc, m.plcc_raw, m.plcc_fitted
                );
            }
        }
        Command::Score {
            checkpoint,
            video,
            multiscale,
            config,
        } => {
            let env = load_config(config.as_deref())?.environment;
            let model = QualityModel::load(&checkpoint)?;
            let report = score_video(&model, &video, &env, multiscale)?;
            if cli.json {
                print_json(&report);
            } else {
                match &report {
                    ScoreReport::Single(s) => println!("Q={}", s.score),
                    ScoreReport::Multi(m) => {
                        for (i, s) in m.per_scale.iter().enumerate() {
                            println!("Q{}={}", i + 1, s.score);
                        }
                        println!("Q_m={}", m.fused);
                    }
                }
            }
        }
        Command::Weights { config, flat_csf } => {
            let env: ViewingEnvironment = load_config(config.as_deref())?.environment;
            let weights = if flat_csf {
                let edges: Vec<f64> = (0..=env.scale_lines.len()).map(|i| i as f64).collect();
                weights_from_sensitivity(&edges, |_| 1.0)?
            } else {
                band_edges(&env)?;
                scale_weights(&env)?
            };
            if cli.json {
                print_json(&weights);
            } else {
                println!("{:>6} {:>10} {:>8}", "scale", "xi (cpd)", "weight");
                for (i, w) in weights.weights.iter().enumerate() {
                    let label = if flat_csf {
                        format!("{}", i + 1)
                    } else {
                        format!("{}p", env.scale_lines[i])
                    };
                    println!("{:>6} {:>10.4} {:>8.4}", label, weights.band_edges[i + 1], w);
                }
            }
        }
        Command::Bench { checkpoint, video } => {
            let model = QualityModel::load(&checkpoint)?;
            let source = open_video(&video)?;
            let report = bench_video(&model, source.as_ref())?;
            if cli.json {
                print_json(&report);
            } else {
                let t = &report.timings;
                println!("video          {}", report.uri);
                println!("frames         {}", report.frame_count);
                println!("chunks         {}", report.chunk_count);
                println!("key frames     {}", report.key_frames);
                println!("motion frames  {}", report.motion_frames);
                println!("score          {:.4}", report.score);
                println!("key-frame preprocessing  {:.4} s", t.key_frame_preprocess_s);
                println!("motion preprocessing     {:.4} s", t.motion_preprocess_s);
                println!("spatial features         {:.4} s", t.spatial_features_s);
                println!("motion features          {:.4} s", t.motion_features_s);
                println!("regression               {:.4} s", t.regression_s);
                println!("total                    {:.4} s", t.total_s);
            }
        }
        Command::CrossEval {
            checkpoint,
            config,
            targets,
        } => {
            let cfg = load_config(config.as_deref())?;
            let model = QualityModel::load(&checkpoint)?;
            let mut paths = cfg.targets;
            paths.extend(targets);
            if paths.is_empty() {
                return Err(config_error("no target manifests given"));
            }
            let manifests = paths
                .iter()
                .map(|p| load_manifest(p).map_err(|e| config_error(format!("manifest {}: {e}", p.display()))))
                .collect::<Result<Vec<_>, _>>()?;
            let rows = cross_database_eval(&model, &manifests, &cfg.environment)?;
            if cli.json {
                print_json(&rows);
            } else {
                println!("{:<24} {:>10} {:>8} {:>12}", "database", "multiscale", "SRCC", "PLCC fitted");
                for r in &rows {
                    println!(
                        "{:<24} {:>10} {:>8.4} {:>12.4}",
                        r.database, r.multiscale, r.result.srcc, r.result.plcc_fitted
                    );
                }
            }
        }
        Command::Synth {
            out,
            count,
            seed,
            profile,
        } => {
            let profile = SynthProfile::by_name(&profile)?;
            let manifest = synthesize_dataset(&out, count, seed, &profile)?;
            println!(
                "wrote {} clips and manifest.tsv to {}",
                manifest.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
