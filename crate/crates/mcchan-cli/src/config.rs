//! Flat JSON configuration: `SystemConfig` keys plus optional run
//! parameters, all at the top level.

use std::fmt;
use std::path::Path;

use mcchan::{Channel, MobilityScenario, SystemConfig};
use serde_json::{Map, Value};

use crate::args::Params;

/// Keys that belong to [`Params`] rather than to the physical configuration.
const PARAM_KEYS: [&str; 11] = [
    "scenario",
    "realizations",
    "t",
    "t1",
    "t2_max",
    "points",
    "eta",
    "h_min",
    "p_target",
    "mode",
    "estimator",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FileConfig {
    pub system: SystemConfig,
    pub params: Params,
}

pub fn load_config(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

pub fn parse_config(text: &str) -> Result<FileConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
    from_value(value)
}

pub fn from_value(value: Value) -> Result<FileConfig, ConfigError> {
    let Value::Object(map) = value else {
        return Err(ConfigError("configuration must be a JSON object".into()));
    };
    let (params, system): (Map<String, Value>, Map<String, Value>) =
        map.into_iter().partition(|(k, _)| PARAM_KEYS.contains(&k.as_str()));
    let field = |e: serde_path_to_error::Error<serde_json::Error>| {
        let path = e.path().to_string();
        if path == "." {
            ConfigError(e.inner().to_string())
        } else {
            ConfigError(format!("field `{path}`: {}", e.inner()))
        }
    };
    let system: SystemConfig = serde_path_to_error::deserialize(Value::Object(system)).map_err(field)?;
    let params: Params = serde_path_to_error::deserialize(Value::Object(params)).map_err(field)?;
    system.validate().map_err(|e| ConfigError(e.to_string()))?;
    Ok(FileConfig { system, params })
}

/// The scenario implied by which diffusion coefficients are nonzero and
/// whether a flow is present.
pub fn infer_scenario(cfg: &SystemConfig) -> MobilityScenario {
    MobilityScenario::from_parts(!cfg.v.is_zero(), cfg.d_tx > 0.0, cfg.d_rx > 0.0)
}

/// Builds the channel, checking the scenario against the configuration.
pub fn channel(cfg: &SystemConfig, scenario: Option<MobilityScenario>) -> Result<Channel, ConfigError> {
    let sc = scenario.unwrap_or_else(|| infer_scenario(cfg));
    Channel::new(cfg.clone(), sc).map_err(|e| ConfigError(e.to_string()))
}

/// The flat JSON form of a configuration; `parse_config` reads it back.
pub fn to_value(system: &SystemConfig, params: &Params) -> Value {
    let mut map = match serde_json::to_value(system).expect("config serializes") {
        Value::Object(m) => m,
        _ => unreachable!("SystemConfig is a struct"),
    };
    if let Value::Object(p) = serde_json::to_value(params).expect("params serialize") {
        map.extend(p);
    }
    Value::Object(map)
}
