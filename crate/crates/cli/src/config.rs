//! Run configuration: flat `key = value` text with dotted keys, checked
//! against a typed schema. Environment variables `U2FLOW_<KEY>` override the
//! file, upper or lower case, with `__` standing for `.`
//! (`U2FLOW_REMAP__TIP_CELLS=48` sets `remap.tip_cells`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;
use u2flow::flow::{Gauge, InitialData};
use u2flow::grid::Grading;
use u2flow::io::{self, IoError};
use u2flow::run::{FlowConfig, OutputCadence, RemapPolicy};

pub const ENV_PREFIX: &str = "U2FLOW_";

/// Every key the schema knows.
pub const KEYS: [&str; 30] = [
    "k",
    "initial",
    "initial.scale",
    "initial.cap_radius",
    "initial.b0",
    "initial.amplitude",
    "initial.center",
    "initial.width",
    "initial.path",
    "xi_max",
    "n",
    "grading",
    "grading.ratio",
    "gauge",
    "cfl_safety",
    "dt_max",
    "t_max",
    "b_tip_min",
    "riem_max",
    "max_steps",
    "output.dt",
    "output.b_log_step",
    "output.times",
    "output.keep_snapshots",
    "remap",
    "remap.lapse_floor",
    "remap.tip_cells",
    "remap.far_cells",
    "remap.ratio",
    "c_hpm",
];

/// Where a value came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Env(String),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(l) => write!(f, "line {l}"),
            Origin::Env(v) => write!(f, "environment variable {v}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Syntax(#[from] IoError),
    #[error("{path}: missing required key `{key}`")]
    Missing { path: PathBuf, key: String },
    #[error("{path}: {origin}: unknown key `{key}`")]
    Unknown { path: PathBuf, origin: Origin, key: String },
    #[error("{path}: {origin}: `{key}`: {msg}")]
    Value { path: PathBuf, origin: Origin, key: String, msg: String },
    #[error("{path}: {msg}")]
    Invalid { path: PathBuf, msg: String },
}

/// A validated run configuration with the text it was read from.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub flow: FlowConfig,
    pub text: String,
    /// Applied environment overrides as `key = value`.
    pub overrides: Vec<String>,
}

struct Entries {
    path: PathBuf,
    map: BTreeMap<String, (Origin, String)>,
    used: BTreeSet<String>,
}

impl Entries {
    fn raw(&mut self, key: &str) -> Option<(Origin, String)> {
        self.used.insert(key.to_string());
        self.map.get(key).cloned()
    }

    fn value_err(&self, origin: Origin, key: &str, msg: impl fmt::Display) -> ConfigError {
        ConfigError::Value { path: self.path.clone(), origin, key: key.to_string(), msg: msg.to_string() }
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((origin, v)) => v.parse().map(Some).map_err(|e| self.value_err(origin, key, format!("`{v}`: {e}"))),
        }
    }

    fn or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)?.ok_or_else(|| ConfigError::Missing { path: self.path.clone(), key: key.to_string() })
    }

    /// One of `options`, or `default` when absent.
    fn choice(&mut self, key: &str, options: &[&'static str], default: &'static str) -> Result<&'static str, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some((origin, v)) => options
                .iter()
                .find(|o| **o == v)
                .copied()
                .ok_or_else(|| self.value_err(origin, key, format!("`{v}` is not one of {}", options.join(", ")))),
        }
    }

    /// Rejects keys that exist in the schema but were not read under the
    /// chosen options, such as `initial.b0` with `initial = tanh_cap`.
    fn finish(self) -> Result<(), ConfigError> {
        let unused = self.map.iter().filter(|(k, _)| !self.used.contains(*k)).min_by_key(|(_, (o, _))| match o {
            Origin::Line(l) => *l,
            Origin::Env(_) => usize::MAX,
        });
        match unused {
            None => Ok(()),
            Some((k, (origin, _))) => Err(ConfigError::Value {
                path: self.path.clone(),
                origin: origin.clone(),
                key: k.clone(),
                msg: "does not apply to the chosen options".into(),
            }),
        }
    }
}

/// Environment key for a schema key.
pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('.', "__").to_uppercase())
}

/// Reads `path` and applies overrides from the process environment.
pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
    parse(path, &text, std::env::vars())
}

/// Parses config text, with `env` supplying override candidates (variables
/// without the prefix are ignored).
pub fn parse(path: &Path, text: &str, env: impl IntoIterator<Item = (String, String)>) -> Result<RunConfig, ConfigError> {
    let mut map = BTreeMap::new();
    for (k, (line, v)) in io::parse_key_values(path, text)? {
        if !KEYS.contains(&k.as_str()) {
            return Err(ConfigError::Unknown { path: path.to_owned(), origin: Origin::Line(line), key: k });
        }
        map.insert(k, (Origin::Line(line), v));
    }
    let mut env: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.to_uppercase().starts_with(ENV_PREFIX)).collect();
    env.sort();
    let mut overrides = vec![];
    for (var, v) in env {
        let key = var[ENV_PREFIX.len()..].to_lowercase().replace("__", ".");
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::Unknown { path: path.to_owned(), origin: Origin::Env(var), key });
        }
        overrides.push(format!("{key} = {v}"));
        map.insert(key, (Origin::Env(var), v.trim().to_string()));
    }
    let mut e = Entries { path: path.to_owned(), map, used: BTreeSet::new() };
    let flow = build(&mut e, path)?;
    e.finish()?;
    flow.validate().map_err(|err| ConfigError::Invalid { path: path.to_owned(), msg: err.to_string() })?;
    Ok(RunConfig { flow, text: text.to_string(), overrides })
}

fn build(e: &mut Entries, path: &Path) -> Result<FlowConfig, ConfigError> {
    let d = FlowConfig::default();
    let k = e.require("k")?;
    let family = e.choice(
        "initial",
        &["tanh_cap", "eh_capped_cylinder", "cylinder", "cylinder_segment", "flat", "round_bump", "from_file"],
        "tanh_cap",
    )?;
    let initial = match family {
        "tanh_cap" => InitialData::TanhCap,
        "eh_capped_cylinder" => {
            InitialData::EhCappedCylinder { scale: e.require("initial.scale")?, cap_radius: e.require("initial.cap_radius")? }
        }
        "cylinder" => InitialData::Cylinder { b0: e.require("initial.b0")? },
        "cylinder_segment" => InitialData::CylinderSegment { b0: e.require("initial.b0")? },
        "flat" => InitialData::Flat,
        "round_bump" => InitialData::RoundBump {
            amplitude: e.require("initial.amplitude")?,
            center: e.require("initial.center")?,
            width: e.require("initial.width")?,
        },
        _ => {
            let rel: PathBuf = e.require("initial.path")?;
            let base = path.parent().unwrap_or(Path::new("."));
            InitialData::FromFile { path: base.join(rel) }
        }
    };
    let grading = match e.choice("grading", &["uniform", "geometric"], "uniform")? {
        "uniform" => Grading::Uniform,
        _ => Grading::Geometric { ratio: e.require("grading.ratio")? },
    };
    let gauge = match e.choice("gauge", &["fixed", "arclength"], "arclength")? {
        "fixed" => Gauge::Fixed,
        _ => Gauge::Arclength,
    };
    let times = match e.raw("output.times") {
        None => vec![],
        Some((origin, v)) => v
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|err| e.value_err(origin.clone(), "output.times", format!("`{s}`: {err}"))))
            .collect::<Result<_, _>>()?,
    };
    let output = OutputCadence {
        dt: e.or("output.dt", d.output.dt)?,
        b_log_step: e.or("output.b_log_step", d.output.b_log_step)?,
        times,
        keep_snapshots: e.or("output.keep_snapshots", d.output.keep_snapshots)?,
    };
    let remap = match e.choice("remap", &["on", "off"], "on")? {
        "on" => {
            let p = RemapPolicy::default();
            Some(RemapPolicy {
                lapse_floor: e.or("remap.lapse_floor", p.lapse_floor)?,
                tip_cells: e.or("remap.tip_cells", p.tip_cells)?,
                far_cells: e.or("remap.far_cells", p.far_cells)?,
                ratio: e.or("remap.ratio", p.ratio)?,
            })
        }
        _ => None,
    };
    Ok(FlowConfig {
        k,
        initial,
        xi_max: e.or("xi_max", d.xi_max)?,
        n: e.or("n", d.n)?,
        grading,
        gauge,
        cfl_safety: e.or("cfl_safety", d.cfl_safety)?,
        dt_max: e.or("dt_max", d.dt_max)?,
        t_max: e.or("t_max", d.t_max)?,
        b_tip_min: e.or("b_tip_min", d.b_tip_min)?,
        riem_max: e.or("riem_max", d.riem_max)?,
        max_steps: e.or("max_steps", d.max_steps)?,
        output,
        remap,
        c_hpm: e.get("c_hpm")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
        parse(Path::new("run.cfg"), text, [])
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse_str("k = 2\n").unwrap();
        assert_eq!(c.flow, FlowConfig::default());
    }

    #[test]
    fn family_keys_are_required_and_exclusive() {
        let err = parse_str("k = 1\ninitial = cylinder\n").unwrap_err();
        assert!(matches!(err, ConfigError::Missing { ref key, .. } if key == "initial.b0"), "{err}");
        let err = parse_str("k = 1\ninitial.b0 = 2\n").unwrap_err();
        assert!(matches!(err, ConfigError::Value { origin: Origin::Line(2), .. }), "{err}");
    }

    #[test]
    fn bad_values_name_their_line() {
        let err = parse_str("k = 2\n\nn = many\n").unwrap_err();
        assert!(err.to_string().starts_with("run.cfg: line 3: `n`"), "{err}");
        let err = parse_str("k = 2\ngauge = sideways\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn environment_overrides_the_file() {
        let env = [("U2FLOW_REMAP__TIP_CELLS".to_string(), "48".to_string()), ("HOME".into(), "/".into())];
        let c = parse(Path::new("run.cfg"), "k = 2\nremap.tip_cells = 16\n", env).unwrap();
        assert_eq!(c.flow.remap.unwrap().tip_cells, 48.0);
        assert_eq!(c.overrides, vec!["remap.tip_cells = 48".to_string()]);
        let env = [("U2FLOW_NOPE".to_string(), "1".to_string())];
        assert!(matches!(parse(Path::new("c"), "k = 2", env), Err(ConfigError::Unknown { .. })));
    }

    #[test]
    fn env_names_round_trip() {
        for key in KEYS {
            let var = env_name(key);
            assert_eq!(var[ENV_PREFIX.len()..].to_lowercase().replace("__", "."), key);
        }
    }
}
