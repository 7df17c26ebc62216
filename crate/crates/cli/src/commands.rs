use std::fs;
use std::path::{Path, PathBuf};

use crater_sr::detect::{
    combine_models, read_geo_csv, read_px_csv, run_postprocess, write_geo_csv, write_px_csv, GeoDetections,
    PostprocParams, GEOREF_COMMENT_PREFIX,
};
use crater_sr::eval::synth::{synth_catalog, synth_detections, Tiling};
use crater_sr::eval::{
    evaluate, filter_band, grid_search, load_catalog, write_catalog, write_grid_csv, CatalogEntry, EvalReport,
    GridSearchResult,
};
use crater_sr::liif::{load_bundle, predict_sr, save_bundle, EpochSummary, LiifModel, Trainer};
use crater_sr::raster::{encode_pgm16, load_pgm16, ImageGrid};
use crater_sr::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{require_path, RunConfig};
use crate::output::{write_atomic, write_dir_atomic, write_json_atomic, Provenance};

pub const BUNDLE_DIR: &str = "model";
pub const LOSS_LOG: &str = "loss.csv";
pub const GEO_OUT: &str = "detections_geo.csv";
pub const COMBINED_OUT: &str = "combined_geo.csv";
pub const METRICS_OUT: &str = "metrics.json";
pub const LOCALIZATION_OUT: &str = "localization.csv";
pub const ARC_IMG_OUT: &str = "arc_img.csv";
pub const GRID_OUT: &str = "grid.csv";
pub const BEST_OUT: &str = "best.json";
pub const SYNTH_CATALOG_OUT: &str = "catalog.csv";
pub const SYNTH_DETECTIONS_OUT: &str = "detections_px.csv";

/// Requested output raster size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SrTarget {
    /// Output side is `round(input side × scale)`.
    Scale(f64),
    Size { height: usize, width: usize },
}

impl SrTarget {
    pub fn output_size(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        match *self {
            SrTarget::Scale(s) => {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::Argument(format!("scale {s} must be positive")));
                }
                let side = |n: usize| (n as f64 * s).round() as usize;
                let (h, w) = (side(height), side(width));
                if h == 0 || w == 0 {
                    return Err(Error::Argument(format!("scale {s} gives an empty image")));
                }
                Ok((h, w))
            }
            SrTarget::Size { height: 0, .. } | SrTarget::Size { width: 0, .. } => {
                Err(Error::Argument("output size must be positive".into()))
            }
            SrTarget::Size { height, width } => Ok((height, width)),
        }
    }

    fn suffix(&self) -> String {
        match self {
            SrTarget::Scale(s) => format!("x{s}"),
            SrTarget::Size { height, width } => format!("{height}x{width}"),
        }
    }
}

fn comments(cfg: &RunConfig) -> Vec<String> {
    vec![Provenance::of(cfg).line()]
}

fn pgm_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")));
    files.sort();
    Ok(files)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle_dir: PathBuf,
    pub loss_log: PathBuf,
    pub epochs: Vec<EpochSummary>,
}

/// Trains a model on every PGM in `paths.images_dir` and writes the bundle
/// plus a per-epoch loss log.
pub fn cmd_train_sr(cfg: &RunConfig) -> Result<TrainOutcome> {
    let dir = require_path(None, &cfg.paths.images_dir, "images_dir")?;
    let files = pgm_files(&dir)?;
    if files.is_empty() {
        return Err(Error::Argument(format!("no .pgm images in {}", dir.display())));
    }
    let min_side = cfg.train.sampling.min_hr_side();
    let mut images = Vec::with_capacity(files.len());
    for f in &files {
        let img = load_pgm16(f)?;
        if img.height() < min_side || img.width() < min_side {
            return Err(Error::Argument(format!(
                "{} is {}x{}; training crops need at least {min_side}x{min_side}",
                f.display(),
                img.height(),
                img.width()
            )));
        }
        images.push(img);
    }
    let spec = cfg.model;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let model = LiifModel::init(spec.depth, spec.blocks, spec.hidden, &mut init_rng);
    let mut trainer = Trainer::new(model, cfg.train.clone(), cfg.seed().wrapping_add(1))?;
    let epochs = trainer.fit(&images, |_| {})?;
    let model = trainer.into_model();

    let out = cfg.out_dir();
    let bundle_dir = out.join(BUNDLE_DIR);
    let prov = Provenance::of(cfg).line();
    write_dir_atomic(&bundle_dir, |d| save_bundle(&model, d, Some(&prov)).map(|_| ()))?;
    let loss_log = out.join(LOSS_LOG);
    write_atomic(&loss_log, |w| {
        writeln!(w, "# {prov}")?;
        writeln!(w, "epoch,steps,mean_loss,lr")?;
        for e in &epochs {
            writeln!(w, "{},{},{},{}", e.epoch, e.steps, e.mean_loss, e.lr)?;
        }
        Ok(())
    })?;
    Ok(TrainOutcome { bundle_dir, loss_log, epochs })
}

/// Every target listed in the config's `sr` section.
pub fn config_targets(cfg: &RunConfig) -> Vec<SrTarget> {
    let scales = cfg.sr.scales.iter().map(|&s| SrTarget::Scale(s));
    let sizes = cfg.sr.sizes.iter().map(|&[height, width]| SrTarget::Size { height, width });
    scales.chain(sizes).collect()
}

/// Super-resolves `input` once per target with the bundle at `paths.model`
/// (default `<out>/model`). Returns the written files.
pub fn cmd_sr(cfg: &RunConfig, input: &Path, targets: &[SrTarget]) -> Result<Vec<PathBuf>> {
    if targets.is_empty() {
        return Err(Error::Argument("no output scale or size requested".into()));
    }
    let bundle = cfg.paths.model.clone().unwrap_or_else(|| cfg.out_dir().join(BUNDLE_DIR));
    let (model, _) = load_bundle(&bundle)?;
    let img = load_pgm16(input)?;
    let stem = input.file_stem().map_or_else(|| "sr".into(), |s| s.to_string_lossy().into_owned());
    let prov = Provenance::of(cfg).line();
    let mut written = Vec::new();
    for t in targets {
        let (h, w) = t.output_size(img.height(), img.width())?;
        let sr: ImageGrid = predict_sr(&model.encoder, &model.mlp, &img, h, w)?;
        let path = cfg.out_dir().join(format!("{stem}_{}.pgm", t.suffix()));
        let bytes = encode_pgm16(&sr, Some(&prov));
        write_atomic(&path, |out| Ok(out.write_all(&bytes)?))?;
        written.push(path);
    }
    Ok(written)
}

/// Boundary removal, score filter, geographic conversion and patch merging
/// with the config's `(m, s, tau)`.
pub fn cmd_postprocess(cfg: &RunConfig, detections: Option<&Path>) -> Result<(GeoDetections, PathBuf)> {
    let path = require_path(detections, &cfg.paths.detections, "detections CSV")?;
    let dets = read_px_csv(fs::File::open(&path)?)?;
    let georef = cfg.georef()?;
    let p = &cfg.postprocess;
    let params = PostprocParams { m: p.m, s: p.s, tau: p.tau };
    let merged = run_postprocess(&dets, &params, p.patch_size, p.patch_size, &georef)?;
    let out = cfg.out_dir().join(GEO_OUT);
    write_atomic(&out, |w| write_geo_csv(w, &merged, &comments(cfg)))?;
    Ok((merged, out))
}

fn read_geo_set(cfg: &RunConfig, path: &Path) -> Result<GeoDetections> {
    let (georef, detections) = read_geo_csv(fs::File::open(path)?)?;
    let georef = match georef {
        Some(g) => g,
        None => cfg.georef().map_err(|_| {
            Error::Argument(format!("{} has no georef comment and the config has none", path.display()))
        })?,
    };
    Ok(GeoDetections { georef, detections })
}

/// Union of several geographic detection files, then NMS at `tau_combine`.
pub fn cmd_combine(cfg: &RunConfig, inputs: &[PathBuf]) -> Result<(GeoDetections, PathBuf)> {
    if inputs.is_empty() {
        return Err(Error::Argument("combine needs at least one detection file".into()));
    }
    let sets = inputs.iter().map(|p| read_geo_set(cfg, p)).collect::<Result<Vec<_>>>()?;
    let combined = combine_models(&sets, cfg.postprocess.tau_combine)?;
    let out = cfg.out_dir().join(COMBINED_OUT);
    write_atomic(&out, |w| write_geo_csv(w, &combined, &comments(cfg)))?;
    Ok((combined, out))
}

fn banded_catalog(cfg: &RunConfig, catalog: Option<&Path>) -> Result<Vec<CatalogEntry>> {
    let path = require_path(catalog, &cfg.paths.catalog, "catalog")?;
    let all = load_catalog(path)?;
    match cfg.eval.band {
        Some([lo, hi]) => filter_band(&all, lo, hi),
        None => Ok(all),
    }
}

#[derive(Debug, Clone, Serialize)]
struct MetricsFile<'a> {
    provenance: Provenance,
    band_km: Option<[f64; 2]>,
    iou_min: f64,
    #[serde(flatten)]
    report: &'a EvalReport,
}

/// Scores geographic detections against the banded catalog; writes the
/// metrics JSON plus localization and rim-completeness tables.
pub fn cmd_evaluate(cfg: &RunConfig, detections: Option<&Path>, catalog: Option<&Path>) -> Result<EvalReport> {
    let path = require_path(detections, &cfg.paths.detections, "detections CSV")?;
    let set = read_geo_set(cfg, &path)?;
    let cat = banded_catalog(cfg, catalog)?;
    let (report, _) = evaluate(&set, &cat, cfg.eval.iou_min, &cfg.eval.localization_edges)?;
    let out = cfg.out_dir();
    write_json_atomic(
        &out.join(METRICS_OUT),
        &MetricsFile { provenance: Provenance::of(cfg), band_km: cfg.eval.band, iou_min: cfg.eval.iou_min, report: &report },
    )?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.4}"));
    write_atomic(&out.join(LOCALIZATION_OUT), |w| {
        writeln!(w, "# {}", Provenance::of(cfg).line())?;
        writeln!(w, "d_min_km,d_max_km,count,mean_iou,std_iou")?;
        for b in report.localization.iter().chain(std::iter::once(&report.localization_overall)) {
            writeln!(w, "{},{},{},{},{}", b.d_min, b.d_max, b.count, opt(b.mean_iou), opt(b.std_iou))?;
        }
        Ok(())
    })?;
    write_atomic(&out.join(ARC_IMG_OUT), |w| {
        writeln!(w, "# {}", Provenance::of(cfg).line())?;
        writeln!(w, "arc_min,arc_max,total,matched,recall")?;
        for b in &report.arc_img {
            writeln!(w, "{},{},{},{},{}", b.lo, b.hi, b.total, b.matched, opt(b.recall))?;
        }
        Ok(())
    })?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
struct BestFile<'a> {
    provenance: Provenance,
    rows: usize,
    best: &'a crater_sr::eval::GridRow,
}

/// Exhaustive `(m, s, tau)` search on raw patch detections.
pub fn cmd_gridsearch(cfg: &RunConfig, detections: Option<&Path>, catalog: Option<&Path>) -> Result<GridSearchResult> {
    let path = require_path(detections, &cfg.paths.detections, "detections CSV")?;
    let dets = read_px_csv(fs::File::open(&path)?)?;
    let cat = banded_catalog(cfg, catalog)?;
    let georef = cfg.georef()?;
    let ps = cfg.postprocess.patch_size;
    let result = grid_search(&dets, ps, ps, &georef, &cat, &cfg.grids, cfg.eval.iou_min)?;
    let out = cfg.out_dir();
    write_atomic(&out.join(GRID_OUT), |w| write_grid_csv(w, &result, &comments(cfg)))?;
    write_json_atomic(
        &out.join(BEST_OUT),
        &BestFile { provenance: Provenance::of(cfg), rows: result.rows.len(), best: &result.best },
    )?;
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct SynthOutcome {
    pub catalog: PathBuf,
    pub detections: PathBuf,
    pub craters: usize,
    pub boxes: usize,
    pub dropped: usize,
}

/// Writes a random catalog and matching synthetic patch detections.
pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthOutcome> {
    let georef = cfg.georef()?;
    let s = &cfg.synth;
    let patch = cfg.postprocess.patch_size;
    if patch.fract() != 0.0 {
        return Err(Error::Argument(format!("patch_size {patch} must be whole pixels for synth")));
    }
    let tiling = Tiling { mosaic_w: s.mosaic_w, mosaic_h: s.mosaic_h, patch_size: patch as usize, overlap: s.overlap };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let catalog = synth_catalog(&georef, s.mosaic_w, s.mosaic_h, &s.catalog, &mut rng)?;
    let synth = synth_detections(&catalog, &georef, &tiling, &s.noise, &mut rng)?;
    let out = cfg.out_dir();
    let mut notes = comments(cfg);
    notes.push(format!("{}{}", GEOREF_COMMENT_PREFIX.trim_start_matches("# "), serde_json::to_string(&georef)?));
    let cat_path = out.join(SYNTH_CATALOG_OUT);
    write_atomic(&cat_path, |w| write_catalog(w, &catalog, &notes))?;
    let det_path = out.join(SYNTH_DETECTIONS_OUT);
    write_atomic(&det_path, |w| write_px_csv(w, &synth.detections, &notes))?;
    Ok(SynthOutcome {
        catalog: cat_path,
        detections: det_path,
        craters: catalog.len(),
        boxes: synth.detections.len(),
        dropped: synth.dropped.len(),
    })
}

/// Process exit status for an error: 2 for argument, format and range
/// problems, 3 for numeric failures, 4 for I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Argument(_) | Error::Format(_) | Error::Range(_) => 2,
        Error::Numeric(_) => 3,
        Error::Io(_) => 4,
    }
}
