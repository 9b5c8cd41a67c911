//! Run configuration and its plain-text `key = value` file format.
//!
//! ```text
//! # defaults shown
//! tau_d_ini = 0.01
//! calibration_frames = 100     # alias: K
//! reference_frames = 10        # alias: N
//! tighten_delta_m = 0.001
//! close_speed_mps = 0.0015
//! reverse_on_slip = true
//! react_to_slip = true
//! timeout_steps = 10000
//! dt_s = 0.0333333333
//! seed = 0
//! scenario = glass             # optional
//! archive = run.tgf            # optional
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::DetectionConfig;
use crate::error::{Error, Result};

/// Environment variable naming a config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "TACTILE_SLIP_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tau_d_ini: f64,
    pub calibration_frames: usize,
    pub reference_frames: usize,
    pub tighten_delta_m: f64,
    pub close_speed_mps: f64,
    /// Reverse the task motion before tightening after a slip.
    pub reverse_on_slip: bool,
    /// When false, slip events are recorded but the grasp is never adjusted.
    pub react_to_slip: bool,
    pub timeout_steps: u64,
    /// Seconds per control step.
    pub dt_s: f64,
    pub seed: u64,
    pub scenario: Option<String>,
    pub archive: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tau_d_ini: 0.01,
            calibration_frames: 100,
            reference_frames: 10,
            tighten_delta_m: 0.001,
            close_speed_mps: 0.0015,
            reverse_on_slip: true,
            react_to_slip: true,
            timeout_steps: 10_000,
            dt_s: 1.0 / 30.0,
            seed: 0,
            scenario: None,
            archive: None,
        }
    }
}

impl RunConfig {
    pub fn detection(&self) -> DetectionConfig {
        DetectionConfig {
            tau_d_ini: self.tau_d_ini,
            calibration_frames: self.calibration_frames,
            reference_frames: self.reference_frames,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.detection().validate()?;
        for (name, v) in [
            ("tighten_delta_m", self.tighten_delta_m),
            ("close_speed_mps", self.close_speed_mps),
            ("dt_s", self.dt_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.timeout_steps == 0 {
            return Err(Error::Config("timeout_steps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse(&text, path)
    }

    /// Parses `text` on top of the defaults. `origin` only labels errors.
    pub fn parse(text: &str, origin: &Path) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        for (line, key, value) in key_values(text, origin)? {
            let err = |message: String| Error::ConfigParse {
                path: origin.to_path_buf(),
                line,
                message,
            };
            match key {
                "tau_d_ini" => config.tau_d_ini = parse_num(value).map_err(err)?,
                "calibration_frames" | "K" => {
                    config.calibration_frames = parse_num(value).map_err(err)?
                }
                "reference_frames" | "N" => {
                    config.reference_frames = parse_num(value).map_err(err)?
                }
                "tighten_delta_m" => config.tighten_delta_m = parse_num(value).map_err(err)?,
                "close_speed_mps" => config.close_speed_mps = parse_num(value).map_err(err)?,
                "reverse_on_slip" => config.reverse_on_slip = parse_num(value).map_err(err)?,
                "react_to_slip" => config.react_to_slip = parse_num(value).map_err(err)?,
                "timeout_steps" => config.timeout_steps = parse_num(value).map_err(err)?,
                "dt_s" => config.dt_s = parse_num(value).map_err(err)?,
                "seed" => config.seed = parse_num(value).map_err(err)?,
                "scenario" => config.scenario = Some(value.to_string()),
                "archive" => config.archive = Some(PathBuf::from(value)),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Loads `path` if given, else the file named by [`CONFIG_ENV`], else
    /// the defaults.
    pub fn resolve(path: Option<&Path>) -> Result<RunConfig> {
        if let Some(path) = path {
            return RunConfig::load(path);
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => RunConfig::load(Path::new(&p)),
            _ => Ok(RunConfig::default()),
        }
    }
}

pub(crate) fn parse_num<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| format!("cannot parse `{value}`: {e}"))
}

/// Splits `key = value` lines, skipping blanks and `#` comments.
pub(crate) fn key_values<'a>(
    text: &'a str,
    origin: &Path,
) -> Result<Vec<(usize, &'a str, &'a str)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::ConfigParse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        out.push((i + 1, key.trim(), value.trim()));
    }
    Ok(out)
}
