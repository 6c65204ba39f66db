//! Command-line interface: `extruflow pattern|measure|identify|optimize|
//! simulate|plot`.
//!
//! Exit codes are stable for scripting: 0 on success, 1 for domain or data
//! errors (bad G-code, failed fits, missing beads), 2 for usage errors
//! (bad arguments, unreadable inputs, missing checkerboard). Verbosity is
//! controlled by the `EXTRUFLOW_LOG` environment variable.

use crate::config::{BlurFlag, ProjectConfig};
use crate::error::{Error, VisionError};
use crate::pipeline;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "extruflow",
    version,
    about = "One-shot extrusion and cornering calibration with optimal G-code extrusion control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Project configuration (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed override for stochastic subroutines (simulation noise).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a calibration pattern G-code file.
    Pattern {
        /// Which pattern: 'extrusion' (four lines) or 'corner' (four Ls).
        kind: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Measure a photograph into per-region width profile CSVs.
    Measure {
        image: PathBuf,
        /// Output directory for profile CSVs and the rectified debug image.
        #[arg(long)]
        out: PathBuf,
        /// External checkerboard corner file (CSV of x_px,y_px), bypassing
        /// detection.
        #[arg(long)]
        corners: Option<PathBuf>,
        /// Force the segmentation method for every region.
        #[arg(long, value_parser = parse_blur_flag)]
        blurry: Option<BlurFlag>,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate model parameters from measured width profiles.
    Identify {
        /// Extrusion calibration profiles: one whole-pattern CSV or four
        /// per-line CSVs, comma separated. Repeat per repetition.
        #[arg(long = "extrusion")]
        extrusion: Vec<String>,
        /// Corner calibration profiles: one whole-pattern CSV or four
        /// per-corner CSVs, comma separated. Repeat per repetition.
        #[arg(long = "corner")]
        corner: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Rewrite a G-code file with the optimal extrusion-ratio sequence.
    Optimize {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Machine-readable report sidecar (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate a G-code file on the virtual printer.
    Simulate {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Output width profile CSV.
        #[arg(long)]
        out: PathBuf,
        /// Additive measurement noise sigma (mm) for
        /// simulate-as-measurement runs.
        #[arg(long)]
        noise: Option<f64>,
        /// Metrics sidecar (JSON).
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Render width-profile CSVs into an overlay plot PNG.
    Plot {
        csvs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_blur_flag(s: &str) -> Result<BlurFlag, String> {
    match s {
        "on" => Ok(BlurFlag::On),
        "off" => Ok(BlurFlag::Off),
        "auto" => Ok(BlurFlag::Auto),
        other => Err(format!("expected on|off|auto, got '{other}'")),
    }
}

fn load_config(common: &Common) -> Result<ProjectConfig, Error> {
    let mut config = match &common.config {
        Some(path) => ProjectConfig::load(path)?,
        None => ProjectConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::Config(_) | Error::Io { .. } => 2,
        Error::Vision(VisionError::CornerCount { .. }) => 2,
        _ => 1,
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Pattern { kind, out, common } => {
            let config = load_config(&common)?;
            let kind: pipeline::PatternKind = kind.parse()?;
            pipeline::cmd_pattern(kind, &config, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Measure { image, out, corners, blurry, common } => {
            let config = load_config(&common)?;
            if config.rois.is_empty() {
                return Err(Error::Usage(
                    "config defines no regions of interest to measure".to_string(),
                ));
            }
            let written = pipeline::cmd_measure(&image, &config, &out, corners.as_deref(), blurry)?;
            for path in written {
                println!("wrote {}", path.display());
            }
        }
        Command::Identify { extrusion, corner, out, common } => {
            let config = load_config(&common)?;
            let split = |sets: &[String]| -> Vec<Vec<PathBuf>> {
                sets.iter()
                    .map(|s| s.split(',').map(|p| PathBuf::from(p.trim())).collect())
                    .collect()
            };
            let model =
                pipeline::cmd_identify(&config, &split(&extrusion), &split(&corner), &out)?;
            println!("wrote {}", out.display());
            println!("{}", model.provenance);
        }
        Command::Optimize { input, model, out, report, common } => {
            let config = load_config(&common)?;
            let summary =
                pipeline::cmd_optimize(&input, &model, &config, &out, report.as_deref())?;
            println!("wrote {}", out.display());
            print!("{}", summary.human_readable());
        }
        Command::Simulate { input, model, out, noise, metrics, common } => {
            let config = load_config(&common)?;
            let noise = noise.map(|sigma| (sigma, config.seed));
            let m = pipeline::cmd_simulate(&input, &model, &config, &out, noise, metrics.as_deref())?;
            println!("wrote {}", out.display());
            println!("max |w - w*|: {:.6} mm", m.max_abs_error_mm);
            match m.corner_window_variance_mm2 {
                Some(v) => println!("corner window variance: {:.8} mm^2", v),
                None => println!("corner window variance: n/a (no corner model)"),
            }
        }
        Command::Plot { csvs, out, common } => {
            let _ = load_config(&common)?;
            if csvs.is_empty() {
                return Err(Error::Usage("plot needs at least one CSV".to_string()));
            }
            pipeline::cmd_plot(&csvs, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

/// Runs the CLI; returns the process exit code.
pub fn run() -> i32 {
    let env = env_logger::Env::new().filter_or("EXTRUFLOW_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap reports help/version through Err as well; keep its codes
            // (0 for help/version, 2 for usage problems).
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}
