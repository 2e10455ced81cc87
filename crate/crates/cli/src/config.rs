//! Run configuration in TOML.
//!
//! ```toml
//! experiment = "qkr-localization"
//! seed = 7
//! out = "runs/loc"
//!
//! [params]
//! k = 20.0
//! period = 0.25
//! ```
//!
//! Top-level keys other than `experiment`, `seed`, `out` and `params` are
//! rejected, as are parameter keys the experiment does not declare.

use crate::error::{CliError, CliResult};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use toml::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

impl RunConfig {
    pub fn new(experiment: &str) -> Self {
        RunConfig {
            experiment: experiment.to_string(),
            seed: 0,
            out: None,
            params: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are plain TOML")
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Applies `key=value`; the value is read as a TOML literal and falls
    /// back to a bare string. `seed` and `out` address the top level.
    pub fn apply_set(&mut self, assignment: &str) -> CliResult<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("`{assignment}` is not key=value")))?;
        let key = key.trim();
        let value = parse_value(raw.trim());
        match key {
            "seed" => {
                self.seed = value
                    .as_integer()
                    .and_then(|i| u64::try_from(i).ok())
                    .ok_or_else(|| CliError::Config("seed must be a non-negative integer".into()))?;
            }
            "out" => self.out = Some(PathBuf::from(raw.trim())),
            "experiment" => self.experiment = raw.trim().to_string(),
            _ => {
                self.params.insert(key.to_string(), value);
            }
        }
        Ok(())
    }
}

pub fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Comma-separated sweep values; brackets group list values, as in
/// `[1.5,2],[3]`.
pub fn parse_values(raw: &str) -> Vec<Value> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for ch in raw.chars() {
        match ch {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                if !cur.trim().is_empty() {
                    out.push(parse_value(cur.trim()));
                }
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push(parse_value(cur.trim()));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Float,
    Int,
    Bool,
    Str,
    FloatList,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub key: &'static str,
    pub kind: Kind,
    pub default: Value,
    pub help: &'static str,
}

pub fn float(key: &'static str, default: f64, help: &'static str) -> ParamSpec {
    ParamSpec {
        key,
        kind: Kind::Float,
        default: Value::Float(default),
        help,
    }
}

pub fn int(key: &'static str, default: i64, help: &'static str) -> ParamSpec {
    ParamSpec {
        key,
        kind: Kind::Int,
        default: Value::Integer(default),
        help,
    }
}

pub fn boolean(key: &'static str, default: bool, help: &'static str) -> ParamSpec {
    ParamSpec {
        key,
        kind: Kind::Bool,
        default: Value::Boolean(default),
        help,
    }
}

pub fn string(key: &'static str, default: &str, help: &'static str) -> ParamSpec {
    ParamSpec {
        key,
        kind: Kind::Str,
        default: Value::String(default.to_string()),
        help,
    }
}

pub fn floats(key: &'static str, default: &[f64], help: &'static str) -> ParamSpec {
    ParamSpec {
        key,
        kind: Kind::FloatList,
        default: Value::Array(default.iter().map(|&x| Value::Float(x)).collect()),
        help,
    }
}

fn coerce(spec: &ParamSpec, v: &Value) -> Option<Value> {
    let as_float = |v: &Value| match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    };
    match spec.kind {
        Kind::Float => as_float(v).map(Value::Float),
        Kind::Int => v.as_integer().map(Value::Integer),
        Kind::Bool => v.as_bool().map(Value::Boolean),
        Kind::Str => v.as_str().map(|s| Value::String(s.to_string())),
        Kind::FloatList => match v {
            Value::Array(a) => a.iter().map(as_float).collect::<Option<Vec<_>>>().map(|xs| Value::Array(xs.into_iter().map(Value::Float).collect())),
            other => as_float(other).map(|x| Value::Array(vec![Value::Float(x)])),
        },
    }
}

/// Parameters after defaults and type checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub values: toml::Table,
    pub seed: u64,
}

impl Params {
    pub fn resolve(schema: &[ParamSpec], given: &BTreeMap<String, Value>, seed: u64) -> CliResult<Self> {
        for key in given.keys() {
            if !schema.iter().any(|p| p.key == key) {
                let known: Vec<&str> = schema.iter().map(|p| p.key).collect();
                return Err(CliError::Config(format!("unknown parameter `{key}`; expected one of {}", known.join(", "))));
            }
        }
        let mut values = toml::Table::new();
        for p in schema {
            let v = match given.get(p.key) {
                Some(v) => coerce(p, v).ok_or_else(|| CliError::Config(format!("parameter `{}` must be {:?}, got {v}", p.key, p.kind)))?,
                None => p.default.clone(),
            };
            if p.kind == Kind::Int && v.as_integer().is_some_and(|i| i < 0) {
                return Err(CliError::Config(format!("parameter `{}` must be non-negative", p.key)));
            }
            values.insert(p.key.to_string(), v);
        }
        Ok(Params { values, seed })
    }

    fn get(&self, key: &str) -> &Value {
        self.values.get(key).unwrap_or_else(|| panic!("parameter `{key}` missing from schema"))
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.get(key).as_float().expect("resolved as float")
    }

    pub fn i64(&self, key: &str) -> i64 {
        self.get(key).as_integer().expect("resolved as int")
    }

    pub fn usize(&self, key: &str) -> usize {
        self.i64(key) as usize
    }

    pub fn bool(&self, key: &str) -> bool {
        self.get(key).as_bool().expect("resolved as bool")
    }

    pub fn str(&self, key: &str) -> &str {
        self.get(key).as_str().expect("resolved as string")
    }

    pub fn f64_list(&self, key: &str) -> Vec<f64> {
        self.get(key)
            .as_array()
            .expect("resolved as list")
            .iter()
            .map(|v| v.as_float().expect("resolved as float"))
            .collect()
    }

    /// Builds a core parameter struct from the keys that match its fields.
    pub fn extract<T: DeserializeOwned>(&self) -> CliResult<T> {
        Value::Table(self.values.clone())
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))
    }
}
