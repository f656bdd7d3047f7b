//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::Settings;
use crate::error::{Error, ErrorCategory, Result};
use crate::eval::{evaluate, EvalReport};
use crate::io::{self, CloudFormat, PlaneSetFile};
use crate::octree::{run_pipeline, StageTimings};
use crate::ransac::ransac_extract_all;
use crate::synthetic::{GroundTruthCloud, Scene};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "voxplane",
    version,
    about = "Voxel-octree plane extraction for LiDAR point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract plane groups from a point cloud.
    Extract {
        /// Input cloud, or `-` for stdin.
        #[arg(required_unless_present = "print_config")]
        cloud: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = CloudFormat::Auto)]
        format: CloudFormat,
        /// Settings file (TOML); falls back to $VOXPLANE_CONFIG.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Plane-set output, `-` for stdout.
        #[arg(long, default_value = "-")]
        out: PathBuf,
        /// Also write an ASCII PLY colored by group.
        #[arg(long)]
        colored: Option<PathBuf>,
        #[arg(long)]
        no_merge: bool,
        /// Leave member point indices out of the plane set.
        #[arg(long)]
        no_indices: bool,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Print the effective settings and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Generate a labeled synthetic scene.
    Synth {
        #[arg(value_enum)]
        scene: Scene,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.005)]
        sigma: f64,
        /// Output cloud; format from the extension, labeled binary otherwise.
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Score a plane set against a labeled cloud.
    Eval {
        #[arg(long)]
        planes: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value = "-")]
        report: PathBuf,
    },
    /// Run several extraction methods on one cloud or scene and report each.
    Compare {
        /// Cloud path or scene name.
        input: String,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Method::Ours, Method::Ransac])]
        methods: Vec<Method>,
        #[arg(long, default_value = "-")]
        report: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scene seed, when `input` names a scene.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.005)]
        sigma: f64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Per-stage timing of the extraction pipeline, median over repeats.
    Bench {
        /// Cloud path or scene name.
        input: String,
        #[arg(long, default_value_t = 5)]
        repeat: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        no_merge: bool,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Ours,
    Ransac,
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.category() {
        ErrorCategory::Input => EXIT_INPUT,
        ErrorCategory::Config => EXIT_CONFIG,
        ErrorCategory::Io => EXIT_IO,
    }
}

/// A labeled scene by name, or a cloud file (labels optional).
fn load_input(input: &str, sigma: f64, seed: u64) -> Result<GroundTruthCloud> {
    if let Some(scene) = Scene::parse(input) {
        return scene.generate(sigma, seed);
    }
    let cloud = io::read_cloud(Path::new(input), CloudFormat::Auto)?;
    let n = cloud.points.len();
    Ok(GroundTruthCloud::from_labels(
        cloud.points,
        cloud
            .labels
            .unwrap_or_else(|| vec![crate::synthetic::UNLABELED; n]),
    ))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Extract {
            cloud,
            format,
            config,
            out,
            colored,
            no_merge,
            no_indices,
            threads,
            print_config,
        } => {
            let mut settings = Settings::resolve(config.as_deref())?;
            if no_merge {
                settings.extraction.merging_enabled = false;
            }
            if print_config {
                print!("{}", settings.to_toml());
                return Ok(());
            }
            let cloud_path = cloud.expect("clap enforces cloud");
            let cloud = io::read_cloud(&cloud_path, format)?;
            let extraction = run_pipeline(&cloud.points, &settings.extraction, threads.max(1))?;
            log::info!(
                "{} points, {} groups, {:.3}s",
                cloud.points.len(),
                extraction.groups.len(),
                extraction.timings.total
            );
            let set =
                PlaneSetFile::from_groups(&extraction.groups, cloud.points.len(), !no_indices);
            io::write_planes(&out, &set)?;
            if let Some(path) = colored {
                io::write_colored_cloud(&path, &cloud.points, &extraction.groups)?;
            }
            Ok(())
        }
        Command::Synth {
            scene,
            seed,
            sigma,
            out,
        } => {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "sigma must be non-negative, got {sigma}"
                )));
            }
            let cloud = scene.generate(sigma, seed)?;
            io::write_cloud(&out, &cloud.points, Some(&cloud.labels))
        }
        Command::Eval {
            planes,
            truth,
            report,
        } => {
            let set = io::read_planes(&planes)?;
            let cloud = io::read_cloud(&truth, CloudFormat::Auto)?;
            let labels = cloud.labels.ok_or_else(|| Error::Parse {
                path: truth.clone(),
                line: 0,
                detail: "truth cloud carries no labels".into(),
            })?;
            if set.groups.iter().any(|g| g.point_indices.is_none()) {
                return Err(Error::Parse {
                    path: planes.clone(),
                    line: 0,
                    detail: "plane set lacks point indices".into(),
                });
            }
            let n = cloud.points.len();
            if set.cloud_point_count != n
                || set
                    .groups
                    .iter()
                    .flat_map(|g| g.point_indices.iter().flatten())
                    .any(|&i| i >= n)
            {
                return Err(Error::Parse {
                    path: planes.clone(),
                    line: 0,
                    detail: format!("plane set does not index a cloud of {n} points"),
                });
            }
            let gt = GroundTruthCloud::from_labels(cloud.points, labels);
            let r = evaluate("ours", &set.groups, &gt, None);
            io::write_bytes(&report, (r.to_json() + "\n").as_bytes())
        }
        Command::Compare {
            input,
            methods,
            report,
            config,
            seed,
            sigma,
            threads,
        } => {
            let settings = Settings::resolve(config.as_deref())?;
            let truth = load_input(&input, sigma, seed)?;
            let mut reports: Vec<EvalReport> = Vec::new();
            for m in methods {
                reports.push(match m {
                    Method::Ours => {
                        let ex = run_pipeline(&truth.points, &settings.extraction, threads.max(1))?;
                        evaluate("ours", &ex.groups, &truth, Some(ex.timings))
                    }
                    Method::Ransac => {
                        let start = Instant::now();
                        let patches = ransac_extract_all(
                            &truth.points,
                            &settings.extraction,
                            &settings.ransac,
                        )?;
                        let total = start.elapsed().as_secs_f64();
                        let timing = StageTimings {
                            total,
                            ..Default::default()
                        };
                        evaluate("ransac", &patches, &truth, Some(timing))
                    }
                });
            }
            #[derive(Serialize)]
            struct Comparison<'a> {
                input: &'a str,
                points: usize,
                reports: Vec<EvalReport>,
            }
            let doc = Comparison {
                input: &input,
                points: truth.len(),
                reports,
            };
            let text = serde_json::to_string_pretty(&doc).expect("comparison serializes") + "\n";
            io::write_bytes(&report, text.as_bytes())
        }
        Command::Bench {
            input,
            repeat,
            config,
            no_merge,
            threads,
        } => {
            let mut settings = Settings::resolve(config.as_deref())?;
            if no_merge {
                settings.extraction.merging_enabled = false;
            }
            let cloud = load_input(&input, 0.005, 0)?;
            let mut runs = Vec::new();
            let mut groups = 0;
            for _ in 0..repeat.max(1) {
                let ex = run_pipeline(&cloud.points, &settings.extraction, threads.max(1))?;
                groups = ex.groups.len();
                runs.push(ex.timings);
            }
            #[derive(Serialize)]
            struct Bench {
                points: usize,
                groups: usize,
                repeat: usize,
                median: StageTimings,
            }
            let doc = Bench {
                points: cloud.len(),
                groups,
                repeat: runs.len(),
                median: median_timings(&runs),
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&doc).expect("bench serializes")
            );
            Ok(())
        }
    }
}

/// Stage-wise median of `runs`.
pub fn median_timings(runs: &[StageTimings]) -> StageTimings {
    let med = |f: fn(&StageTimings) -> f64| {
        let mut v: Vec<f64> = runs.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        match v.len() {
            0 => 0.0,
            n if n % 2 == 1 => v[n / 2],
            n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
        }
    };
    StageTimings {
        voxelize: med(|t| t.voxelize),
        subdivide: med(|t| t.subdivide),
        merge: med(|t| t.merge),
        total: med(|t| t.total),
    }
}
