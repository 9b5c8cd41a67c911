//! Object presets and scenario files.
//!
//! Preset values are synthetic. They are chosen so that the relative
//! difficulty of the seven household and lab objects comes out in the
//! expected order, not to match any physical measurement.
//!
//! Scenario files use `key = value` lines. `base` names a preset to start
//! from; every other key overrides one parameter:
//!
//! ```text
//! name = sticky_plug
//! base = smooth_connector
//! load_force = 0.9
//! texture = 0.5
//! task_direction = 0, 0, 1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsm::TaskMotion;
use crate::image::Dims;
use crate::io::config::{key_values, parse_num};

/// Physical stand-in for a grasped object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    /// Uncompressed width between the fingers, metres.
    pub width_free: f64,
    /// Imprint growth per metre of compression. Objects much softer than the
    /// gel deform themselves instead of the gel and get low values, which
    /// makes their imprints faint.
    pub softness: f64,
    /// Holding capacity per metre of compression.
    pub mu_hold: f64,
    /// Resistance the task motion must overcome (unplug force, weight).
    pub load_force: f64,
    /// Pull travel, metres, after which the task is complete.
    pub detach_threshold: f64,
    /// Compression fraction beyond which the object is damaged.
    pub fragile_limit: f64,
    /// Surface texture contrast in `[0, 1]`; 0 is a smooth imprint.
    pub texture: f64,
    /// Imprint radius at full strength, as a fraction of the sensor's
    /// shorter side.
    pub contact_radius: f64,
}

/// Sensor and world parameters shared by all objects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub dims: Dims,
    /// Per-sample Gaussian noise, intensity units.
    pub noise_sigma: f64,
    /// Gripper opening beyond the object width at the start, metres.
    pub initial_gap_m: f64,
    /// Slip advance in pixels per step per unit of holding deficit.
    pub slip_gain: f64,
    /// Slip offset at which the object is lost, pixels.
    pub lost_limit_px: f64,
    /// Imprint sensitivity of each sensor.
    pub sensor_gain: [f64; 2],
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dims: Dims { h: 40, w: 30 },
            noise_sigma: 0.01,
            initial_gap_m: 0.004,
            slip_gain: 1.0,
            lost_limit_px: 24.0,
            sensor_gain: [1.0, 0.9],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub object: SimObject,
    pub task: TaskMotion,
    pub params: SimParams,
}

pub const PRESET_NAMES: [&str; 7] = [
    "rough_connector",
    "smooth_connector",
    "egg",
    "glass",
    "tomato",
    "white_grape",
    "black_grape",
];

impl Scenario {
    pub fn preset(name: &str) -> Result<Scenario> {
        let unplug = TaskMotion {
            direction: [0.0, 0.0, 1.0],
            speed: 0.005,
        };
        let lift = TaskMotion::lift();
        let (object, task) = match name {
            "rough_connector" => (
                SimObject {
                    width_free: 0.024,
                    softness: 900.0,
                    mu_hold: 150.0,
                    load_force: 0.86,
                    detach_threshold: 0.008,
                    fragile_limit: 1.0,
                    texture: 1.0,
                    contact_radius: 0.45,
                },
                unplug,
            ),
            "smooth_connector" => (
                SimObject {
                    width_free: 0.02,
                    softness: 900.0,
                    mu_hold: 150.0,
                    load_force: 0.56,
                    detach_threshold: 0.008,
                    fragile_limit: 1.0,
                    texture: 0.3,
                    contact_radius: 0.35,
                },
                unplug,
            ),
            "egg" => (
                SimObject {
                    width_free: 0.045,
                    softness: 600.0,
                    mu_hold: 120.0,
                    load_force: 0.15,
                    detach_threshold: 0.02,
                    fragile_limit: 0.12,
                    texture: 0.0,
                    contact_radius: 0.3,
                },
                lift,
            ),
            "glass" => (
                SimObject {
                    width_free: 0.06,
                    softness: 500.0,
                    mu_hold: 150.0,
                    load_force: 0.03,
                    detach_threshold: 0.02,
                    fragile_limit: 0.08,
                    texture: 0.0,
                    contact_radius: 0.3,
                },
                lift,
            ),
            "tomato" => (
                SimObject {
                    width_free: 0.04,
                    softness: 300.0,
                    mu_hold: 80.0,
                    load_force: 0.03,
                    detach_threshold: 0.015,
                    fragile_limit: 0.2,
                    texture: 0.0,
                    contact_radius: 0.35,
                },
                lift,
            ),
            "white_grape" => (
                SimObject {
                    width_free: 0.018,
                    softness: 250.0,
                    mu_hold: 60.0,
                    load_force: 0.1,
                    detach_threshold: 0.012,
                    fragile_limit: 0.4,
                    texture: 0.0,
                    contact_radius: 0.25,
                },
                lift,
            ),
            "black_grape" => (
                SimObject {
                    width_free: 0.016,
                    softness: 250.0,
                    mu_hold: 60.0,
                    load_force: 0.16,
                    detach_threshold: 0.012,
                    fragile_limit: 0.45,
                    texture: 0.0,
                    contact_radius: 0.25,
                },
                lift,
            ),
            other => return Err(Error::UnknownScenario(other.to_string())),
        };
        Ok(Scenario {
            name: name.to_string(),
            object,
            task,
            params: SimParams::default(),
        })
    }

    pub fn presets() -> Vec<Scenario> {
        PRESET_NAMES
            .iter()
            .map(|n| Scenario::preset(n).expect("built-in preset"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let o = &self.object;
        let positive = [
            ("width_free", o.width_free),
            ("softness", o.softness),
            ("mu_hold", o.mu_hold),
            ("load_force", o.load_force),
            ("detach_threshold", o.detach_threshold),
            ("fragile_limit", o.fragile_limit),
            ("contact_radius", o.contact_radius),
            ("initial_gap_m", self.params.initial_gap_m),
            ("slip_gain", self.params.slip_gain),
            ("lost_limit_px", self.params.lost_limit_px),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{key} must be positive, got {v}")));
            }
        }
        if o.fragile_limit > 1.0 {
            return Err(Error::Config(format!(
                "fragile_limit must lie in (0, 1], got {}",
                o.fragile_limit
            )));
        }
        if !(0.0..=1.0).contains(&o.texture) {
            return Err(Error::Config(format!(
                "texture must lie in [0, 1], got {}",
                o.texture
            )));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
        if !(self.params.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        Dims::new(self.params.dims.h, self.params.dims.w)?;
        Ok(())
    }

    /// Resolves a preset name, or a path to a scenario file.
    pub fn resolve(name_or_path: &str) -> Result<Scenario> {
        if PRESET_NAMES.contains(&name_or_path) {
            return Scenario::preset(name_or_path);
        }
        let path = Path::new(name_or_path);
        if path.is_file() {
            return Scenario::load(path);
        }
        Err(Error::UnknownScenario(name_or_path.to_string()))
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Scenario> {
        let entries = key_values(text, origin)?;
        let base = entries
            .iter()
            .find(|(_, k, _)| *k == "base")
            .map(|(_, _, v)| *v);
        let mut scenario = match base {
            Some(base) => Scenario::preset(base)?,
            None => Scenario::preset("glass")?,
        };
        scenario.name = origin
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        let mut direction = scenario.task.direction;
        let mut speed = scenario.task.speed;
        for (line, key, value) in entries {
            let err = |message: String| Error::ConfigParse {
                path: origin.to_path_buf(),
                line,
                message,
            };
            let o = &mut scenario.object;
            let p = &mut scenario.params;
            match key {
                "base" => {}
                "name" => scenario.name = value.to_string(),
                "width_free" => o.width_free = parse_num(value).map_err(err)?,
                "softness" => o.softness = parse_num(value).map_err(err)?,
                "mu_hold" => o.mu_hold = parse_num(value).map_err(err)?,
                "load_force" => o.load_force = parse_num(value).map_err(err)?,
                "detach_threshold" => o.detach_threshold = parse_num(value).map_err(err)?,
                "fragile_limit" => o.fragile_limit = parse_num(value).map_err(err)?,
                "texture" => o.texture = parse_num(value).map_err(err)?,
                "contact_radius" => o.contact_radius = parse_num(value).map_err(err)?,
                "noise_sigma" => p.noise_sigma = parse_num(value).map_err(err)?,
                "sensor_h" => p.dims.h = parse_num(value).map_err(err)?,
                "sensor_w" => p.dims.w = parse_num(value).map_err(err)?,
                "initial_gap_m" => p.initial_gap_m = parse_num(value).map_err(err)?,
                "slip_gain" => p.slip_gain = parse_num(value).map_err(err)?,
                "lost_limit_px" => p.lost_limit_px = parse_num(value).map_err(err)?,
                "task_speed" => speed = parse_num(value).map_err(err)?,
                "task_direction" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    let [x, y, z] = parts.as_slice() else {
                        return Err(err(format!(
                            "task_direction needs 3 components, got `{value}`"
                        )));
                    };
                    direction = [
                        parse_num(x).map_err(err)?,
                        parse_num(y).map_err(err)?,
                        parse_num(z).map_err(err)?,
                    ];
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        scenario.task = TaskMotion::new(direction, speed)?;
        scenario.validate()?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_are_valid() {
        for s in Scenario::presets() {
            s.validate().unwrap();
        }
        assert!(matches!(
            Scenario::preset("banana"),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn presets_are_ordered_by_required_holding_capacity() {
        let need = |n: &str| {
            let o = Scenario::preset(n).unwrap().object;
            o.load_force / o.mu_hold
        };
        let rough = need("rough_connector");
        for other in PRESET_NAMES.iter().filter(|n| **n != "rough_connector") {
            assert!(rough > need(other), "{other}");
        }
        assert!(need("glass") <= need("egg"));
        assert!(need("tomato") <= need("egg"));
    }

    #[test]
    fn scenario_file_overrides_base() {
        let text =
            "name = sticky\nbase = smooth_connector\nload_force = 0.9\ntask_direction = 0, 3, 4\n";
        let s = Scenario::parse(text, Path::new("sticky.scn")).unwrap();
        assert_eq!(s.name, "sticky");
        assert_eq!(s.object.load_force, 0.9);
        assert_eq!(
            s.object.width_free,
            Scenario::preset("smooth_connector")
                .unwrap()
                .object
                .width_free
        );
        assert_eq!(s.task.direction, [0.0, 0.6, 0.8]);
    }

    #[test]
    fn scenario_file_errors() {
        let p = Path::new("bad.scn");
        assert!(matches!(
            Scenario::parse("wobble = 1", p),
            Err(Error::ConfigParse { .. })
        ));
        assert!(matches!(
            Scenario::parse("texture = 2", p),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Scenario::parse("base = banana", p),
            Err(Error::UnknownScenario(_))
        ));
        assert!(Scenario::parse("task_direction = 1, 2", p).is_err());
    }
}
