//! Per-model run configurations.
//!
//! Values are resolved in three layers: built-in defaults, then the JSON
//! config file, then command-line flags. The resolved config is what goes
//! into the manifest.

use std::fs;
use std::path::Path;

use fraglaw_core::discrete::{BigLength, StoppingSequence};
use fraglaw_core::DensitySpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{CliError, ModelKind, SimulateArgs};

fn default_seed() -> u64 {
    1
}

fn uniform() -> DensitySpec {
    DensitySpec::Uniform
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "TreeConfig::default_levels")]
    pub levels: u64,
    #[serde(default = "TreeConfig::default_trials")]
    pub trials: u64,
    #[serde(default = "uniform")]
    pub density: DensitySpec,
    #[serde(default)]
    pub emit_pieces: bool,
}

impl TreeConfig {
    fn default_levels() -> u64 {
        10
    }
    fn default_trials() -> u64 {
        200
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Number of pieces.
    #[serde(default = "ChainConfig::default_levels")]
    pub levels: u64,
    #[serde(default = "ChainConfig::default_trials")]
    pub trials: u64,
    #[serde(default = "uniform")]
    pub density: DensitySpec,
    #[serde(default)]
    pub emit_pieces: bool,
}

impl ChainConfig {
    fn default_levels() -> u64 {
        100_000
    }
    fn default_trials() -> u64 {
        50
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "FixedConfig::default_p")]
    pub p: f64,
    #[serde(default = "FixedConfig::default_levels")]
    pub levels: u64,
    #[serde(default = "FixedConfig::default_q_max")]
    pub q_max: u64,
    #[serde(default = "FixedConfig::default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub emit_pieces: bool,
}

impl FixedConfig {
    fn default_p() -> f64 {
        0.3
    }
    fn default_levels() -> u64 {
        5000
    }
    fn default_q_max() -> u64 {
        1000
    }
    fn default_tol() -> f64 {
        1e-9
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "DiscreteConfig::default_length")]
    pub length: BigLength,
    #[serde(default = "DiscreteConfig::default_stop")]
    pub stop: StoppingSequence,
    #[serde(default = "DiscreteConfig::default_trials")]
    pub trials: u64,
}

impl DiscreteConfig {
    fn default_length() -> BigLength {
        BigLength::from_u64(1_000_001).expect("positive")
    }
    fn default_stop() -> StoppingSequence {
        StoppingSequence::Evens
    }
    fn default_trials() -> u64 {
        200
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeterminantConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "DeterminantConfig::default_n")]
    pub n: u64,
    #[serde(default = "DeterminantConfig::default_matrices")]
    pub matrices: u64,
    /// Sampled permutations per matrix; all of `S_n` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutations: Option<u64>,
    #[serde(default = "uniform")]
    pub density: DensitySpec,
    /// Trials of the shared-position (fixed point) experiment; 0 skips it.
    #[serde(default)]
    pub fixed_point_trials: u64,
}

impl DeterminantConfig {
    fn default_n() -> u64 {
        7
    }
    fn default_matrices() -> u64 {
        100
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Unrestricted(TreeConfig),
    Restricted(ChainConfig),
    Fixed(FixedConfig),
    Discrete(DiscreteConfig),
    Determinant(DeterminantConfig),
}

impl ModelConfig {
    pub fn seed(&self) -> u64 {
        match self {
            ModelConfig::Unrestricted(c) => c.seed,
            ModelConfig::Restricted(c) => c.seed,
            ModelConfig::Fixed(c) => c.seed,
            ModelConfig::Discrete(c) => c.seed,
            ModelConfig::Determinant(c) => c.seed,
        }
    }

    pub fn to_value(&self) -> Value {
        let v = match self {
            ModelConfig::Unrestricted(c) => serde_json::to_value(c),
            ModelConfig::Restricted(c) => serde_json::to_value(c),
            ModelConfig::Fixed(c) => serde_json::to_value(c),
            ModelConfig::Discrete(c) => serde_json::to_value(c),
            ModelConfig::Determinant(c) => serde_json::to_value(c),
        };
        v.expect("configs serialize to JSON")
    }
}

/// Parses a density flag: a bare kind name such as `uniform` or a JSON object.
pub fn parse_density(text: &str) -> Result<Value, CliError> {
    let text = text.trim();
    if text.starts_with('{') {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("density: {e}")))
    } else {
        Ok(serde_json::json!({ "kind": text }))
    }
}

pub fn density_spec(text: &str) -> Result<DensitySpec, CliError> {
    typed("density", parse_density(text)?)
}

fn typed<T: DeserializeOwned>(what: &str, value: Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Usage(format!("{what}: {inner}"))
        } else {
            CliError::Usage(format!("{what}: field `{path}`: {inner}"))
        }
    })
}

fn read_config_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Usage(format!(
            "{}: config must be a JSON object",
            path.display()
        ))),
        Err(e) => Err(CliError::Usage(format!("{}: {e}", path.display()))),
    }
}

/// Resolves defaults, config file and flags into a typed config.
pub fn resolve(args: &SimulateArgs) -> Result<ModelConfig, CliError> {
    let mut map = match &args.config {
        Some(path) => read_config_file(path)?,
        None => Map::new(),
    };
    let mut set = |key: &str, v: Value| {
        map.insert(key.to_string(), v);
    };
    if let Some(v) = args.seed {
        set("seed", v.into());
    }
    if let Some(v) = args.trials {
        set("trials", v.into());
    }
    if let Some(v) = args.levels {
        set("levels", v.into());
    }
    if let Some(v) = &args.density {
        set("density", parse_density(v)?);
    }
    if let Some(v) = args.p {
        set("p", v.into());
    }
    if let Some(v) = args.q_max {
        set("q_max", v.into());
    }
    if let Some(v) = &args.stop {
        set("stop", v.clone().into());
    }
    if let Some(v) = &args.length {
        set("length", v.clone().into());
    }
    if let Some(v) = args.n {
        set("n", v.into());
    }
    if let Some(v) = args.matrices {
        set("matrices", v.into());
    }
    if let Some(v) = args.permutations {
        set("permutations", v.into());
    }
    if args.emit_pieces {
        set("emit_pieces", true.into());
    }
    let value = Value::Object(map);
    let what = format!("{} config", args.model.name());
    Ok(match args.model {
        ModelKind::Unrestricted => ModelConfig::Unrestricted(typed(&what, value)?),
        ModelKind::Restricted => ModelConfig::Restricted(typed(&what, value)?),
        ModelKind::Fixed => ModelConfig::Fixed(typed(&what, value)?),
        ModelKind::Discrete => ModelConfig::Discrete(typed(&what, value)?),
        ModelKind::Determinant => ModelConfig::Determinant(typed(&what, value)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn args(line: &str) -> SimulateArgs {
        let cli = crate::Cli::try_parse_from(line.split_whitespace()).unwrap();
        match cli.command {
            crate::Command::Simulate(a) => *a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn defaults_and_flags() {
        let c = resolve(&args("fraglaw simulate fixed --p 0.25 --levels 50")).unwrap();
        match c {
            ModelConfig::Fixed(f) => {
                assert_eq!((f.p, f.levels, f.q_max, f.seed), (0.25, 50, 1000, 1));
            }
            _ => panic!(),
        }
        let c = resolve(&args(
            "fraglaw simulate discrete --stop squares --L 1e6 --trials 3",
        ))
        .unwrap();
        match c {
            ModelConfig::Discrete(d) => {
                assert_eq!(d.stop, StoppingSequence::Squares);
                assert_eq!(d.length, BigLength::from_u64(1_000_000).unwrap());
                assert_eq!(d.trials, 3);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn flags_override_file() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("c.json");
        fs::write(
            &path,
            r#"{"levels": 12, "trials": 5, "density": {"kind": "logbox", "epsilon": 0.1}}"#,
        )
        .unwrap();
        let line = format!(
            "fraglaw simulate unrestricted --config {} --trials 9",
            path.display()
        );
        match resolve(&args(&line)).unwrap() {
            ModelConfig::Unrestricted(t) => {
                assert_eq!((t.levels, t.trials), (12, 9));
                assert_eq!(
                    t.density,
                    DensitySpec::Logbox {
                        epsilon: 0.1,
                        center_log: None
                    }
                );
            }
            _ => panic!(),
        }
    }

    #[test]
    fn errors_name_the_field() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("c.json");
        fs::write(&path, r#"{"levels": "deep"}"#).unwrap();
        let e = resolve(&args(&format!(
            "fraglaw simulate unrestricted --config {}",
            path.display()
        )))
        .unwrap_err();
        assert!(e.to_string().contains("levels"), "{e}");
        assert_eq!(e.exit_code(), 2);
        fs::write(&path, r#"{"levles": 3}"#).unwrap();
        let e = resolve(&args(&format!(
            "fraglaw simulate unrestricted --config {}",
            path.display()
        )))
        .unwrap_err();
        assert!(e.to_string().contains("levles"), "{e}");
        let e = resolve(&args("fraglaw simulate discrete --p 0.3")).unwrap_err();
        assert!(e.to_string().contains('p'), "{e}");
        let e = resolve(&args(
            "fraglaw simulate unrestricted --config /nonexistent/c.json",
        ))
        .unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn density_flag_forms() {
        assert_eq!(density_spec("uniform").unwrap(), DensitySpec::Uniform);
        assert_eq!(
            density_spec(r#"{"kind":"counterexample","delta":0.001}"#).unwrap(),
            DensitySpec::Counterexample { delta: 0.001 }
        );
        assert!(density_spec("gaussian").is_err());
    }
}
