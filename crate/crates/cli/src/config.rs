//! Config files and the flag-over-file merge.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug)]
pub enum CliError {
    /// Bad input: config file, flags or parameter values.
    Config(String),
    Core(sip_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_runtime_abort() => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(s) => write!(f, "{s}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<sip_core::Error> for CliError {
    fn from(e: sip_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Keys a config file may carry besides the command's own parameters.
#[derive(Debug, Default)]
pub struct FileSettings {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub params: Map<String, Value>,
}

/// Read a TOML or JSON config (by extension; anything but `.toml` is
/// parsed as JSON) and split off the shared keys.
pub fn load(path: &Path, command: &str) -> CliResult<FileSettings> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let bad = |e: String| CliError::Config(format!("{}: {e}", path.display()));
    let value: Value = if path.extension().is_some_and(|x| x == "toml") {
        let t: toml::Table = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
        serde_json::to_value(t).map_err(|e| bad(e.to_string()))?
    } else {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
    };
    let Value::Object(mut params) = value else {
        return Err(bad("top level must be a table".into()));
    };
    if let Some(c) = params.remove("command") {
        if c.as_str() != Some(command) {
            return Err(bad(format!("config is for command {c}, not \"{command}\"")));
        }
    }
    let mut out = FileSettings::default();
    if let Some(v) = params.remove("seed") {
        out.seed = Some(
            v.as_u64()
                .ok_or_else(|| bad(format!("seed: expected an unsigned integer, got {v}")))?,
        );
    }
    if let Some(v) = params.remove("threads") {
        out.threads = Some(
            v.as_u64()
                .ok_or_else(|| bad(format!("threads: expected an unsigned integer, got {v}")))? as usize,
        );
    }
    if let Some(v) = params.remove("output") {
        out.output = Some(
            v.as_str()
                .ok_or_else(|| bad(format!("output: expected a path, got {v}")))?
                .into(),
        );
    }
    out.params = params;
    Ok(out)
}

/// Parameters from the file, then every flag that was given on top.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: Map<String, Value>) -> CliResult<T> {
    let base: T = serde_json::from_value(Value::Object(file)).map_err(|e| CliError::Config(format!("config: {e}")))?;
    let mut merged = serde_json::to_value(base).expect("parameters serialize");
    if let (Value::Object(m), Value::Object(f)) =
        (&mut merged, serde_json::to_value(flags).expect("parameters serialize"))
    {
        for (k, v) in f {
            if !v.is_null() {
                m.insert(k, v);
            }
        }
    }
    serde_json::from_value(merged).map_err(|e| CliError::Config(format!("parameters: {e}")))
}

/// Value of a required key.
pub fn need<T: Clone>(v: &Option<T>, key: &str) -> CliResult<T> {
    v.clone().ok_or_else(|| {
        CliError::Config(format!(
            "missing required key `{key}` (flag --{})",
            key.replace('_', "-")
        ))
    })
}
