//! Run configuration and the `key = value` config-file format.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::belief::Evolution;
use crate::error::{Error, Result};
use crate::map::MapConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Normal,
    OracleLocations,
    FlatBruteForce,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Normal => "normal",
            Mode::OracleLocations => "oracle",
            Mode::FlatBruteForce => "flat",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "normal" | "hierarchical" => Ok(Mode::Normal),
            "oracle" | "oraclelocations" => Ok(Mode::OracleLocations),
            "flat" | "flatbruteforce" | "bruteforce" => Ok(Mode::FlatBruteForce),
            _ => Err(Error::Config(format!(
                "unknown mode {s:?} (expected normal, oracle or flat)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub descriptors: Option<PathBuf>,
    pub features: Option<PathBuf>,
    /// Directory of PGM images to extract PHOG and local features from.
    pub images: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub map: MapConfig,
    pub t_nn_values: Vec<f64>,
    pub mode: Mode,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub dump_beliefs: bool,
    pub threads: Option<usize>,
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "" | "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean {value:?} for {key}"))),
    }
}

impl RunConfig {
    /// Applies one setting; keys are the long CLI flag names without dashes prefix.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let v = value.trim();
        match key.as_str() {
            "descriptors" => self.descriptors = Some(v.into()),
            "features" => self.features = Some(v.into()),
            "images" => self.images = Some(v.into()),
            "gt" => self.gt = Some(v.into()),
            "out" => self.out = Some(v.into()),
            "tnn" => {
                let values = v
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| num::<f64>("tnn", s))
                    .collect::<Result<Vec<_>>>()?;
                if values.is_empty() {
                    return Err(Error::Config("tnn needs at least one value".into()));
                }
                self.map.t_nn = values[0];
                self.t_nn_values = values;
            }
            "tllc" => self.map.t_llc = num(&key, v)?,
            "tinliers" => self.map.t_inliers = num(&key, v)?,
            "margin" => self.map.margin_m = num(&key, v)?,
            "tci" => self.map.t_ci = num(&key, v)?,
            "temporal-mask" => self.map.temporal_mask = num(&key, v)?,
            "ratio" => self.map.ratio = num(&key, v)?,
            "ransac-threshold" => self.map.ransac.threshold_px = num(&key, v)?,
            "ransac-iterations" => self.map.ransac.iterations = num(&key, v)?,
            "mode" => self.mode = v.parse()?,
            "seed" => self.seed = num(&key, v)?,
            "threads" => self.threads = Some(num(&key, v)?),
            "dump-beliefs" => self.dump_beliefs = boolean(&key, v)?,
            "legacy-evolution" => {
                self.map.evolution = if boolean(&key, v)? {
                    Evolution::Legacy
                } else {
                    Evolution::Fixed
                }
            }
            _ => return Err(Error::Config(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    pub fn apply<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Map configuration for the point `t_nn` with the run seed applied.
    pub fn map_config(&self, t_nn: f64) -> MapConfig {
        let mut cfg = self.map.clone();
        cfg.t_nn = t_nn;
        cfg.ransac.seed = self.seed;
        cfg
    }

    pub fn sweep_values(&self) -> Vec<f64> {
        if self.t_nn_values.is_empty() {
            vec![self.map.t_nn]
        } else {
            self.t_nn_values.clone()
        }
    }

    /// Checks that inputs are named and exist.
    pub fn validate_inputs(&self) -> Result<()> {
        self.map.validate()?;
        for t in &self.t_nn_values {
            if !(*t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("t_nn values must be positive, got {t}")));
            }
        }
        match (&self.descriptors, &self.images) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either descriptors or images, not both".into()))
            }
            (None, None) => return Err(Error::Config("no descriptors or images given".into())),
            (Some(_), None) if self.features.is_none() => {
                return Err(Error::Config("descriptor files need a matching features file".into()))
            }
            _ => {}
        }
        if self.gt.is_none() {
            return Err(Error::Config("a ground-truth file is required".into()));
        }
        for p in [&self.descriptors, &self.features, &self.images, &self.gt].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

/// Parses `key = value` lines. `#` starts a comment; a bare key means `true`.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = match line.split_once('=') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => (line, "true"),
        };
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(Error::Config(format!("config line {}: malformed {raw:?}", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_text(&text)
}
