use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crater_sr::{Error, Result};
use crater_sr_cli::{
    cmd_combine, cmd_evaluate, cmd_gridsearch, cmd_postprocess, cmd_sr, cmd_synth, cmd_train_sr, config_targets,
    exit_code, Overrides, RunConfig, SrTarget,
};

#[derive(Parser)]
#[command(name = "crater-sr", version, about = "Arbitrary-scale super-resolution and crater detection evaluation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for every random stream; required by each command.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Catalog diameter band in km.
    #[arg(long, global = true, value_name = "DMIN,DMAX", value_delimiter = ',', num_args = 1)]
    band: Option<Vec<f64>>,
    /// Minimum box IoU for a detection to match a catalog crater.
    #[arg(long, global = true, value_name = "F")]
    iou_min: Option<f64>,
    /// Boundary margins (px) searched by gridsearch.
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    m_grid: Option<Vec<f64>>,
    /// Score thresholds searched by gridsearch.
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    s_grid: Option<Vec<f64>>,
    /// NMS IoU thresholds searched by gridsearch.
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    tau_grid: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the super-resolution model on a directory of PGM images.
    TrainSr,
    /// Super-resolve one PGM image.
    Sr {
        /// 8- or 16-bit binary PGM.
        input: PathBuf,
        /// Output/input size ratio; defaults to the config's targets.
        #[arg(long, value_name = "F")]
        scale: Option<f64>,
    },
    /// Turn raw patch detections into merged geographic detections.
    Postprocess {
        /// Patch detections CSV; defaults to paths.detections.
        detections: Option<PathBuf>,
    },
    /// Union several geographic detection files with cross-model NMS.
    Combine {
        /// Geographic detection CSVs, one per model.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Score geographic detections against a catalog.
    Evaluate {
        /// Geographic detections CSV; defaults to paths.detections.
        detections: Option<PathBuf>,
        /// Catalog CSV; defaults to paths.catalog.
        catalog: Option<PathBuf>,
    },
    /// Search post-processing thresholds on raw detections.
    Gridsearch {
        /// Patch detections CSV; defaults to paths.detections.
        detections: Option<PathBuf>,
        /// Catalog CSV; defaults to paths.catalog.
        catalog: Option<PathBuf>,
    },
    /// Generate a synthetic catalog and detections.
    Synth,
}

fn overrides(g: &Global) -> Result<Overrides> {
    let band = match g.band.as_deref() {
        None => None,
        Some([lo, hi]) => Some([*lo, *hi]),
        Some(_) => return Err(Error::Argument("--band takes exactly DMIN,DMAX".into())),
    };
    Ok(Overrides {
        seed: g.seed,
        out_dir: g.out.clone(),
        band,
        iou_min: g.iou_min,
        m_grid: g.m_grid.clone(),
        s_grid: g.s_grid.clone(),
        tau_grid: g.tau_grid.clone(),
    })
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.global.config.as_deref(), &overrides(&cli.global)?)?;
    match cli.command {
        Command::TrainSr => {
            let out = cmd_train_sr(&cfg)?;
            let last = out.epochs.last().map_or(f64::NAN, |e| e.mean_loss);
            println!("trained {} epochs, final loss {last:.6}; bundle {}", out.epochs.len(), out.bundle_dir.display());
        }
        Command::Sr { input, scale } => {
            let targets = match scale {
                Some(s) => vec![SrTarget::Scale(s)],
                None => config_targets(&cfg),
            };
            for p in cmd_sr(&cfg, &input, &targets)? {
                println!("{}", p.display());
            }
        }
        Command::Postprocess { detections } => {
            let (set, path) = cmd_postprocess(&cfg, detections.as_deref())?;
            println!("{} detections -> {}", set.detections.len(), path.display());
        }
        Command::Combine { inputs } => {
            let (set, path) = cmd_combine(&cfg, &inputs)?;
            println!("{} detections -> {}", set.detections.len(), path.display());
        }
        Command::Evaluate { detections, catalog } => {
            let r = cmd_evaluate(&cfg, detections.as_deref(), catalog.as_deref())?;
            println!(
                "TP {} FP {} FN {}  P {:.2} R {:.2} F1 {:.2}",
                r.tp, r.fp, r.fn_, r.metrics.precision, r.metrics.recall, r.metrics.f1
            );
        }
        Command::Gridsearch { detections, catalog } => {
            let r = cmd_gridsearch(&cfg, detections.as_deref(), catalog.as_deref())?;
            let b = r.best;
            println!(
                "{} combinations; best m {} s {} tau {}: P {:.2} R {:.2} F1 {:.2}",
                r.rows.len(),
                b.m,
                b.s,
                b.tau,
                b.metrics.precision,
                b.metrics.recall,
                b.metrics.f1
            );
        }
        Command::Synth => {
            let o = cmd_synth(&cfg)?;
            println!("{} craters, {} boxes ({} dropped)", o.craters, o.boxes, o.dropped);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
