//! Parsing of systems, sets, functions and run configurations.

use std::path::Path;

use mvdyn::pcfunc::PCFunction;
use mvdyn::{gallery, IntervalSet, MultiSystem, Rational, Scalar};
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

pub fn rational(text: &str, what: &str) -> Result<Rational, CliError> {
    Rational::parse_repr(text.trim()).map_err(|e| CliError::Domain(format!("--{what}: {e}")))
}

pub fn set(text: &str, what: &str) -> Result<IntervalSet, CliError> {
    IntervalSet::parse(text).map_err(|e| CliError::Domain(format!("--{what}: {e}")))
}

/// Loads `gallery:<name>` or a JSON file.
pub fn system(source: &str) -> Result<MultiSystem, CliError> {
    if let Some(name) = source.strip_prefix("gallery:") {
        return gallery::by_name(name).map_err(|e| CliError::Domain(e.to_string()));
    }
    let text = read(Path::new(source))?;
    serde_json::from_str(&text).map_err(|e| CliError::Domain(format!("{source}: {e}")))
}

/// A step function on `[0, 1]`:
///
/// - `const:c`: the constant `c`
/// - `chi:a,b;c,d`: indicator of an interval set
/// - `cells:v0,v1,...`: values on a uniform grid
/// - `x:n`: the identity sampled at the midpoints of `n` cells
/// - inline JSON `{"breakpoints":[...],"values":[...]}` or a path to one
pub fn function(text: &str, what: &str) -> Result<PCFunction<Rational>, CliError> {
    let bad = |e: String| CliError::Domain(format!("--{what}: {e}"));
    let text = text.trim();
    if let Some(c) = text.strip_prefix("const:") {
        return Ok(PCFunction::constant(rational(c, what)?));
    }
    if let Some(s) = text.strip_prefix("chi:") {
        return Ok(PCFunction::indicator(&set(s, what)?, Rational::from_count(1)));
    }
    if let Some(cells) = text.strip_prefix("cells:") {
        let values = cells.split(',').map(|v| rational(v, what)).collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(bad("no cell values".into()));
        }
        return Ok(PCFunction::from_cells(values));
    }
    if let Some(n) = text.strip_prefix("x:") {
        let n: usize = n.trim().parse().map_err(|_| bad(format!("`{n}` is not a cell count")))?;
        if n == 0 {
            return Err(bad("cell count must be positive".into()));
        }
        return Ok(PCFunction::sampled(n, |x: &Rational| x.clone()));
    }
    let json = if text.starts_with('{') { text.to_string() } else { read(Path::new(text))? };
    serde_json::from_str(&json).map_err(|e| bad(e.to_string()))
}

pub fn list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(|v| v.trim().parse().map_err(|_| CliError::Domain(format!("--{what}: cannot parse `{v}`"))))
        .collect()
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// A whole invocation stored as JSON.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    #[serde(default)]
    pub system: Option<String>,
    #[serde(default)]
    pub params: serde_json::Map<String, Value>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub format: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
    }

    /// The equivalent command line, without the program name.
    pub fn to_args(&self) -> Result<Vec<String>, CliError> {
        let mut args = vec![self.command.clone()];
        let mut push = |flag: &str, value: Option<String>| {
            args.push(format!("--{flag}"));
            args.extend(value);
        };
        if let Some(s) = &self.system {
            push("system", Some(s.clone()));
        }
        push("seed", Some(self.seed.to_string()));
        if let Some(o) = &self.output {
            push("out", Some(o.clone()));
        }
        if let Some(f) = &self.format {
            push("format", Some(f.clone()));
        }
        for (key, value) in &self.params {
            let flag = key.replace('_', "-");
            match value {
                Value::Bool(true) => push(&flag, None),
                Value::Bool(false) | Value::Null => {}
                Value::String(s) => push(&flag, Some(s.clone())),
                Value::Number(n) => push(&flag, Some(n.to_string())),
                Value::Array(items) => {
                    let parts: Vec<String> = items
                        .iter()
                        .map(|v| match v {
                            Value::String(s) => s.clone(),
                            other => other.to_string(),
                        })
                        .collect();
                    push(&flag, Some(parts.join(",")));
                }
                Value::Object(_) => {
                    return Err(CliError::Domain(format!("params.{key}: nested objects are not supported")));
                }
            }
        }
        Ok(args)
    }
}
