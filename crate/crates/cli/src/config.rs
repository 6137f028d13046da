//! Shared tuning flags and their `key=value` config file.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use afis::preprocess::PreprocessConfig;
use afis::{DistanceMode, MatchConfig, PipelineConfig};
use anyhow::{anyhow, bail, Context, Result};
use clap::Args;

pub const DEFAULT_MATCH_RADIUS: f64 = 8.0;

#[derive(Debug, Clone, Default, Args)]
pub struct Tuning {
    /// Binarization cutoff on mean intensity (0-255).
    #[arg(long, global = true)]
    pub threshold: Option<u32>,
    /// Target ridge width after enhancement (odd).
    #[arg(long, global = true)]
    pub thickness: Option<u32>,
    /// Disk radius of the shaping stage.
    #[arg(long, global = true)]
    pub radius: Option<u32>,
    /// Side of the centered minutiae region as a fraction of the image.
    #[arg(long, global = true)]
    pub region_fraction: Option<f64>,
    /// Distance rule stored in templates: paper or canonical.
    #[arg(long, global = true)]
    pub mode: Option<DistanceMode>,
    /// Largest distance difference that still counts as equal.
    #[arg(long, global = true)]
    pub tolerance: Option<u64>,
    /// Share of a point's distances that must agree for it to match.
    #[arg(long, global = true)]
    pub sig_fraction: Option<f64>,
    /// Minimum EQ score to accept.
    #[arg(long, global = true)]
    pub decision_threshold: Option<f64>,
    /// Pixel radius for pairing detections with ground truth.
    #[arg(long, global = true)]
    pub match_radius: Option<f64>,
    /// Random seed for synthetic data.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// File of key=value lines supplying defaults for the flags above.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Fully resolved settings: flag, then config file, then built-in default.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub matching: MatchConfig,
    pub match_radius: f64,
    pub seed: u64,
}

const KEYS: [&str; 10] = [
    "threshold",
    "thickness",
    "radius",
    "region-fraction",
    "mode",
    "tolerance",
    "sig-fraction",
    "decision-threshold",
    "match-radius",
    "seed",
];

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
/// Underscores in keys are accepted in place of dashes.
pub fn parse_config(text: &str) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key=value", n + 1))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            bail!("config line {}: unknown key {:?}", n + 1, k.trim());
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

impl Tuning {
    pub fn resolve(&self) -> Result<Settings> {
        let file = match &self.config {
            Some(path) => load_config(path)?,
            None => HashMap::new(),
        };
        let pick = |flag: Option<String>, key: &str| flag.or_else(|| file.get(key).cloned());
        fn parsed<T: std::str::FromStr>(v: Option<String>, key: &str, default: T) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            match v {
                None => Ok(default),
                Some(s) => s
                    .parse()
                    .map_err(|e| anyhow!("invalid value {s:?} for {key}: {e}")),
            }
        }
        let s = |o: Option<u32>| o.map(|v| v.to_string());
        let dp = PreprocessConfig::default();
        let dm = MatchConfig::default();
        let pipeline = PipelineConfig {
            preprocess: PreprocessConfig {
                threshold: parsed(
                    pick(s(self.threshold), "threshold"),
                    "threshold",
                    dp.threshold,
                )?,
                ridge_thickness: parsed(
                    pick(s(self.thickness), "thickness"),
                    "thickness",
                    dp.ridge_thickness,
                )?,
                shape_radius: parsed(pick(s(self.radius), "radius"), "radius", dp.shape_radius)?,
            },
            region_fraction: parsed(
                pick(
                    self.region_fraction.map(|v| v.to_string()),
                    "region-fraction",
                ),
                "region-fraction",
                PipelineConfig::default().region_fraction,
            )?,
            mode: parsed(
                pick(self.mode.map(|m| m.to_string()), "mode"),
                "mode",
                DistanceMode::default(),
            )?,
        };
        let matching = MatchConfig {
            distance_tolerance: parsed(
                pick(self.tolerance.map(|v| v.to_string()), "tolerance"),
                "tolerance",
                dm.distance_tolerance,
            )?,
            signature_fraction: parsed(
                pick(self.sig_fraction.map(|v| v.to_string()), "sig-fraction"),
                "sig-fraction",
                dm.signature_fraction,
            )?,
            decision_threshold: parsed(
                pick(
                    self.decision_threshold.map(|v| v.to_string()),
                    "decision-threshold",
                ),
                "decision-threshold",
                dm.decision_threshold,
            )?,
        };
        let match_radius = parsed(
            pick(self.match_radius.map(|v| v.to_string()), "match-radius"),
            "match-radius",
            DEFAULT_MATCH_RADIUS,
        )?;
        if match_radius.is_nan() || match_radius < 0.0 {
            bail!("match radius must be non-negative, got {match_radius}");
        }
        let seed = parsed(pick(self.seed.map(|v| v.to_string()), "seed"), "seed", 0)?;
        pipeline.validate()?;
        matching.validate()?;
        Ok(Settings {
            pipeline,
            matching,
            match_radius,
            seed,
        })
    }
}

fn load_config(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}
