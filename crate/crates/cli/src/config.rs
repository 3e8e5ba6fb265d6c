use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dualab_core::harness::{InvariantSuite, Scenario, ScenarioName};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// Contents of a configuration file.
///
/// `params` holds scenario parameters layered over the built-in defaults of
/// `scenario`; `check` configures the invariant suite.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Table::is_empty")]
    pub params: Table,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<InvariantSuite>,
}

impl FromStr for RunConfig {
    type Err = toml::de::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        toml::from_str(s)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse().map_err(|e: toml::de::Error| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// One `key.path=value` override. The value is read as a TOML value and
/// falls back to a bare string.
#[derive(Debug, Clone, PartialEq)]
pub struct SetOverride {
    pub path: Vec<String>,
    pub value: Value,
}

impl FromStr for SetOverride {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got '{s}'"))?;
        let path: Vec<String> = key
            .trim()
            .split('.')
            .map(|p| p.trim().to_string())
            .collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(format!("empty key segment in '{key}'"));
        }
        let raw = raw.trim();
        let value = toml::from_str::<Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        Ok(Self { path, value })
    }
}

/// Overlay `over` onto `base`. Tables merge key by key, except tables with a
/// `kind` key (generator recipes), which replace the previous value whole.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) if !o.contains_key("kind") => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn apply_set(root: &mut Value, set: &SetOverride) -> Result<(), CliError> {
    let mut node = root;
    let (last, parents) = set.path.split_last().expect("non-empty path");
    for p in parents {
        let Value::Table(t) = node else {
            return Err(CliError::Usage(format!(
                "--set {}: '{p}' is not a table",
                set.path.join(".")
            )));
        };
        node = t
            .entry(p.clone())
            .or_insert_with(|| Value::Table(Table::new()));
    }
    let Value::Table(t) = node else {
        return Err(CliError::Usage(format!(
            "--set {}: parent is not a table",
            set.path.join(".")
        )));
    };
    match t.get_mut(last) {
        Some(slot) => merge(slot, set.value.clone()),
        None => {
            t.insert(last.clone(), set.value.clone());
        }
    }
    Ok(())
}

/// Flag values that take precedence over the configuration file.
#[derive(Debug, Clone, Default)]
pub struct FlagOverrides {
    pub scenario: Option<ScenarioName>,
    pub reps: Option<usize>,
    pub sets: Vec<SetOverride>,
}

/// Defaults, then file `params`, then `--set` entries in order, then `--reps`.
pub fn resolve_scenario(cfg: &RunConfig, flags: &FlagOverrides) -> Result<Scenario, CliError> {
    let name = flags.scenario.or(cfg.scenario).ok_or_else(|| {
        let names: Vec<&str> = ScenarioName::ALL.iter().map(|n| n.as_str()).collect();
        CliError::Usage(format!(
            "no scenario given; choose one of {}",
            names.join(", ")
        ))
    })?;
    let mut tree =
        Value::try_from(Scenario::default_for(name)).expect("default scenario serializes");
    merge(&mut tree, Value::Table(cfg.params.clone()));
    for s in &flags.sets {
        apply_set(&mut tree, s)?;
    }
    if let Some(r) = flags.reps {
        apply_set(
            &mut tree,
            &SetOverride {
                path: vec!["reps".into()],
                value: Value::Integer(r as i64),
            },
        )?;
    }
    if let Value::Table(t) = &mut tree {
        t.insert("name".into(), Value::String(name.as_str().into()));
    }
    let scenario: Scenario = tree.try_into().map_err(|e: toml::de::Error| {
        CliError::Usage(format!("scenario parameters: {}", e.message()))
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Invariant suite from the file's `[check]` table (defaults when absent),
/// with `--set` entries applied to it.
pub fn resolve_suite(cfg: &RunConfig, sets: &[SetOverride]) -> Result<InvariantSuite, CliError> {
    let mut tree =
        Value::try_from(cfg.check.clone().unwrap_or_default()).expect("suite serializes");
    for s in sets {
        apply_set(&mut tree, s)?;
    }
    tree.try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("check parameters: {}", e.message())))
}
