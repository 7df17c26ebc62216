use std::fs;
use std::path::{Path, PathBuf};

use crater_sr::detect::GeoRef;
use crater_sr::eval::synth::{CatalogSpec, NoiseSpec};
use crater_sr::eval::{Grids, DEFAULT_LOCALIZATION_EDGES};
use crater_sr::liif::TrainConfig;
use crater_sr::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Filesystem locations; command-line positionals take precedence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub images_dir: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

/// Encoder and decoder sizes for a freshly initialized model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub depth: usize,
    pub blocks: usize,
    pub hidden: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { depth: 16, blocks: 2, hidden: 256 }
    }
}

/// Post-processing thresholds, the detector's patch size and the
/// cross-model NMS threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocSection {
    pub m: f64,
    pub s: f64,
    pub tau: f64,
    pub patch_size: f64,
    pub tau_combine: f64,
}

impl Default for PostprocSection {
    fn default() -> Self {
        Self { m: 5.0, s: 0.7, tau: 0.5, patch_size: 1024.0, tau_combine: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Inclusive catalog diameter band in km; `None` keeps every entry.
    pub band: Option<[f64; 2]>,
    pub iou_min: f64,
    pub localization_edges: Vec<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            band: Some([5.0, 10.0]),
            iou_min: 0.5,
            localization_edges: DEFAULT_LOCALIZATION_EDGES.to_vec(),
        }
    }
}

/// Output sizes for `sr`: every scale and every explicit `[height, width]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrSection {
    pub scales: Vec<f64>,
    pub sizes: Vec<[usize; 2]>,
}

impl Default for SrSection {
    fn default() -> Self {
        Self { scales: vec![2.0], sizes: Vec::new() }
    }
}

/// Synthetic fixture layout; the patch size comes from the post-processing
/// section so generated detections match what `postprocess` expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub mosaic_w: usize,
    pub mosaic_h: usize,
    pub overlap: f64,
    pub catalog: CatalogSpec,
    pub noise: NoiseSpec,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            mosaic_w: 4096,
            mosaic_h: 4096,
            overlap: 0.5,
            catalog: CatalogSpec::default(),
            noise: NoiseSpec::default(),
        }
    }
}

/// Everything a run depends on. Serialized back out, it reproduces the run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub georef: Option<GeoRef>,
    pub postprocess: PostprocSection,
    pub grids: Grids,
    pub eval: EvalSection,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub sr: SrSection,
    pub synth: SynthSection,
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub band: Option<[f64; 2]>,
    pub iou_min: Option<f64>,
    pub m_grid: Option<Vec<f64>>,
    pub s_grid: Option<Vec<f64>>,
    pub tau_grid: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))
    }

    /// Reads `path` (or starts from defaults) and applies `overrides`.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_json(&fs::read_to_string(p)?)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = Some(seed);
        }
        if let Some(dir) = &o.out_dir {
            self.paths.out_dir = Some(dir.clone());
        }
        if let Some(band) = o.band {
            self.eval.band = Some(band);
        }
        if let Some(v) = o.iou_min {
            self.eval.iou_min = v;
        }
        if let Some(g) = &o.m_grid {
            self.grids.m = g.clone();
        }
        if let Some(g) = &o.s_grid {
            self.grids.s = g.clone();
        }
        if let Some(g) = &o.tau_grid {
            self.grids.tau = g.clone();
        }
    }

    /// Checks everything that does not depend on the chosen command.
    pub fn validate(&self) -> Result<()> {
        if self.seed.is_none() {
            return Err(Error::Argument("a seed is required (config \"seed\" or --seed)".into()));
        }
        self.grids.validate()?;
        if let Some(g) = &self.georef {
            g.validate()?;
        }
        if let Some([lo, hi]) = self.eval.band {
            if !(lo < hi) {
                return Err(Error::Argument(format!("band [{lo}, {hi}] is empty")));
            }
        }
        if !(self.eval.iou_min > 0.0 && self.eval.iou_min <= 1.0) {
            return Err(Error::Argument(format!("iou_min {} outside (0, 1]", self.eval.iou_min)));
        }
        if self.eval.localization_edges.len() < 2
            || self.eval.localization_edges.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(Error::Argument("localization_edges must be increasing with at least two edges".into()));
        }
        if !(self.postprocess.patch_size >= 1.0) {
            return Err(Error::Argument("patch_size must be at least one pixel".into()));
        }
        let tc = self.postprocess.tau_combine;
        if !(tc > 0.0 && tc <= 1.0) {
            return Err(Error::Argument(format!("tau_combine {tc} outside (0, 1]")));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or_default()
    }

    pub fn georef(&self) -> Result<GeoRef> {
        self.georef.ok_or_else(|| Error::Argument("config has no georef".into()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Lowercase hex SHA-256 of the canonical JSON form, excluding the
    /// output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.paths.out_dir = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Resolves a positional argument against a config path.
pub fn require_path(arg: Option<&Path>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    let p = arg
        .map(Path::to_path_buf)
        .or_else(|| fallback.clone())
        .ok_or_else(|| Error::Argument(format!("no {what} given")))?;
    if !p.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{what} {} does not exist", p.display()),
        )));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_need_a_seed() {
        assert!(matches!(RunConfig::default().validate(), Err(Error::Argument(_))));
        let cfg = RunConfig::load(None, &Overrides { seed: Some(3), ..Overrides::default() }).unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.grids.len(), 120);
    }

    #[test]
    fn flags_win_over_file() {
        let mut cfg = RunConfig::from_json(r#"{"seed": 1, "eval": {"iou_min": 0.3}, "grids": {"m": [1], "s": [0.5], "tau": [0.2]}}"#).unwrap();
        cfg.apply(&Overrides {
            seed: Some(9),
            iou_min: Some(0.6),
            tau_grid: Some(vec![0.4, 0.5]),
            band: Some([1.0, 2.0]),
            ..Overrides::default()
        });
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.eval.iou_min, 0.6);
        assert_eq!(cfg.grids.m, vec![1.0]);
        assert_eq!(cfg.grids.tau, vec![0.4, 0.5]);
        assert_eq!(cfg.eval.band, Some([1.0, 2.0]));
    }

    #[test]
    fn unknown_keys_are_format_errors() {
        assert!(matches!(RunConfig::from_json(r#"{"sed": 1}"#), Err(Error::Format(_))));
        assert!(matches!(RunConfig::from_json("{"), Err(Error::Format(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig { seed: Some(1), ..RunConfig::default() };
        let b = RunConfig { seed: Some(2), ..RunConfig::default() };
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let mut moved = a.clone();
        moved.paths.out_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), moved.hash());
    }

    #[test]
    fn invalid_values() {
        let base = RunConfig { seed: Some(1), ..RunConfig::default() };
        let mut c = base.clone();
        c.eval.band = Some([10.0, 5.0]);
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.grids.s.clear();
        assert!(c.validate().is_err());
        let mut c = base;
        c.eval.iou_min = 0.0;
        assert!(c.validate().is_err());
    }
}
