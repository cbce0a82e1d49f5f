//! Experiment configuration: a line-oriented `key = value` format with
//! `[section]` headers and function bodies in the expression language.
//!
//! A config file has up to four sections:
//!
//! ```text
//! [experiment]
//! name = reconstruct      # one of the ten experiment names
//! seed = 7                # optional, default 0
//! out  = results          # optional output directory
//!
//! [grid]
//! dim = 1                 # optional, default 1
//! half_width = 16         # optional, default 16
//! points = 1024           # optional, default 1024
//!
//! [functions]
//! f = x * exp(-x^2)       # expression-language bodies, one per key
//!
//! [params]
//! scales = 48             # numeric knobs; every key has a documented
//! tolerance = 0.02        # default and unknown keys are rejected
//! ```
//!
//! Blank lines and `#` comments are ignored.  Every diagnostic carries the
//! 1-based line number of the offending entry.

use std::collections::BTreeMap;

use crate::error::{CzError, Result};
use crate::expr::{parse_expression, Expr};
use crate::grid::Grid;

/// The ten experiment names the runner accepts.
pub const EXPERIMENT_NAMES: &[&str] = &[
    "reconstruct",
    "admissibility",
    "highlow",
    "tensor",
    "averaging",
    "upsilon",
    "sparse-certify",
    "ap-weights",
    "leibniz",
    "sharpness",
];

/// Numeric parameters accepted by each experiment, with their defaults.
/// Keys not listed here are rejected with a diagnostic naming the key.
pub fn allowed_params(experiment: &str) -> &'static [(&'static str, f64)] {
    match experiment {
        "reconstruct" => &[
            ("cancellation", 0.0),
            ("stride", 1.0),
            ("t_min", 0.25),
            ("t_max", 4096.0),
            ("scales", 48.0),
            ("tolerance", 0.02),
        ],
        "admissibility" => &[
            ("cancellation", 1.0),
            ("admissibility_tolerance", 1e-6),
            ("moment_tolerance", 1e-8),
        ],
        "highlow" => &[
            ("cancellation", 0.0),
            ("smoothness", 2.0),
            ("stride", 1.0),
            ("t_min", 0.25),
            ("t_max", 4096.0),
            ("scales", 48.0),
            ("tolerance", 0.02),
        ],
        "tensor" => &[
            ("cancellation", 0.0),
            ("smoothness", 2.0),
            ("stride", 8.0),
            ("t_min", 0.25),
            ("t_max", 512.0),
            ("scales", 60.0),
            ("tolerance", 0.05),
        ],
        "averaging" => &[
            ("delta", 0.75),
            ("scale", 0.5),
            ("stride", 4.0),
            ("t_min", 0.5),
            ("t_max", 8.0),
            ("scales", 8.0),
            ("base_points", 5.0),
            ("variation", 0.2),
        ],
        "upsilon" => &[
            ("k1", 0.0),
            ("k2", 0.0),
            ("eta", 0.5),
            ("samples", 500.0),
            ("reference_scale", 0.25),
            ("slope_threshold", -2.0),
        ],
        "sparse-certify" => &[
            ("sigma", 0.0),
            ("p1", 1.0),
            ("p2", 1.0),
            ("p3", 1.0),
            ("pair_dict_size", 3.0),
            ("max_dict_size", 2.0),
            ("depth", 2.0),
            ("stride", 32.0),
            ("t_min", 1.0),
            ("t_max", 8.0),
            ("scales", 4.0),
        ],
        "ap-weights" => &[
            ("exponent", 0.3),
            ("generations", 3.0),
            ("p1", 4.0),
            ("p2", 4.0),
            ("jensen_vectors", 30.0),
            ("tolerance", 1e-10),
        ],
        "leibniz" => &[
            ("sigma", 0.5),
            ("p1", 4.0),
            ("p2", 4.0),
            ("r1", 4.0),
            ("r2", 4.0),
            ("r3", 1.0),
            ("weight_exponent", 0.0),
        ],
        "sharpness" => &[
            ("sigma", 0.5),
            ("k_min", 4.0),
            ("k_max", 8.0),
            ("r1", 2.0),
            ("r2", 2.0),
            ("tolerance", 0.1),
        ],
        _ => &[],
    }
}

/// A fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    /// Output directory from the config file; the command line may override.
    pub out: Option<String>,
    pub grid: Grid,
    /// Named function definitions: `(name, source text, parsed rule)`.
    pub functions: Vec<(String, String, Expr)>,
    /// Numeric parameters, with defaults filled in.
    pub params: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    /// Look up a numeric parameter; validation guarantees presence.
    pub fn param(&self, key: &str) -> f64 {
        *self
            .params
            .get(key)
            .unwrap_or_else(|| panic!("parameter {key} missing after validation"))
    }

    /// Look up a function definition by name.
    pub fn function(&self, name: &str) -> Option<&Expr> {
        self.functions
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, _, e)| e)
    }
}

fn cfg_err(line: usize, msg: impl Into<String>) -> CzError {
    CzError::Config {
        line: Some(line),
        msg: msg.into(),
    }
}

/// One raw `key = value` entry with its source line.
#[derive(Debug, Clone)]
struct RawEntry {
    line: usize,
    key: String,
    value: String,
}

/// Split the text into sections of raw entries, preserving order.
fn split_sections(text: &str) -> Result<Vec<(String, usize, Vec<RawEntry>)>> {
    let mut sections: Vec<(String, usize, Vec<RawEntry>)> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(inner) = content.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| cfg_err(line, "unterminated section header"))?
                .trim();
            if name.is_empty() {
                return Err(cfg_err(line, "empty section name"));
            }
            sections.push((name.to_string(), line, Vec::new()));
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| cfg_err(line, format!("expected `key = value`, got \"{content}\"")))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(cfg_err(line, "empty key"));
        }
        let section = sections
            .last_mut()
            .ok_or_else(|| cfg_err(line, format!("entry \"{key}\" before any [section] header")))?;
        if section.2.iter().any(|e| e.key == key) {
            return Err(cfg_err(line, format!("duplicate key \"{key}\"")));
        }
        section.2.push(RawEntry {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(sections)
}

fn parse_f64(e: &RawEntry) -> Result<f64> {
    e.value
        .parse::<f64>()
        .map_err(|_| cfg_err(e.line, format!("key \"{}\": expected a number, got \"{}\"", e.key, e.value)))
}

fn parse_u64(e: &RawEntry) -> Result<u64> {
    e.value
        .parse::<u64>()
        .map_err(|_| cfg_err(e.line, format!("key \"{}\": expected a non-negative integer, got \"{}\"", e.key, e.value)))
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let sections = split_sections(text)?;
    let mut name: Option<String> = None;
    let mut seed = 0u64;
    let mut out: Option<String> = None;
    let mut grid_dim = 1usize;
    let mut grid_half_width = 16.0f64;
    let mut grid_points = 1024usize;
    let mut functions: Vec<(String, String, Expr)> = Vec::new();
    let mut raw_params: Vec<RawEntry> = Vec::new();

    let mut seen = Vec::new();
    for (section, header_line, entries) in &sections {
        if seen.contains(section) {
            return Err(cfg_err(*header_line, format!("duplicate section [{section}]")));
        }
        seen.push(section.clone());
        match section.as_str() {
            "experiment" => {
                for e in entries {
                    match e.key.as_str() {
                        "name" => {
                            if !EXPERIMENT_NAMES.contains(&e.value.as_str()) {
                                return Err(cfg_err(
                                    e.line,
                                    format!(
                                        "unknown experiment name \"{}\"; expected one of {}",
                                        e.value,
                                        EXPERIMENT_NAMES.join(", ")
                                    ),
                                ));
                            }
                            name = Some(e.value.clone());
                        }
                        "seed" => seed = parse_u64(e)?,
                        "out" => out = Some(e.value.clone()),
                        other => {
                            return Err(cfg_err(
                                e.line,
                                format!("unknown key \"{other}\" in [experiment]; expected name, seed, or out"),
                            ))
                        }
                    }
                }
            }
            "grid" => {
                for e in entries {
                    match e.key.as_str() {
                        "dim" => {
                            grid_dim = parse_u64(e)? as usize;
                        }
                        "half_width" => grid_half_width = parse_f64(e)?,
                        "points" => grid_points = parse_u64(e)? as usize,
                        other => {
                            return Err(cfg_err(
                                e.line,
                                format!("unknown key \"{other}\" in [grid]; expected dim, half_width, or points"),
                            ))
                        }
                    }
                }
            }
            "functions" => {
                for e in entries {
                    let rule = parse_expression(&e.value).map_err(|err| match err {
                        CzError::Parse { col, msg } => cfg_err(
                            e.line,
                            format!("function \"{}\": parse error at column {col}: {msg}", e.key),
                        ),
                        other => other,
                    })?;
                    if grid_dim == 1 && rule.uses_y() {
                        return Err(cfg_err(
                            e.line,
                            format!("function \"{}\": unknown variable y in a 1-dimensional context", e.key),
                        ));
                    }
                    functions.push((e.key.clone(), e.value.clone(), rule));
                }
            }
            "params" => {
                raw_params = entries.clone();
            }
            other => {
                return Err(cfg_err(
                    *header_line,
                    format!("unknown section [{other}]; expected experiment, grid, functions, or params"),
                ))
            }
        }
    }

    let name = name.ok_or_else(|| CzError::Config {
        line: None,
        msg: "missing required key \"name\" in [experiment]".into(),
    })?;

    let allowed = allowed_params(&name);
    let mut params: BTreeMap<String, f64> = allowed
        .iter()
        .map(|&(k, v)| (k.to_string(), v))
        .collect();
    for e in &raw_params {
        if !allowed.iter().any(|&(k, _)| k == e.key) {
            return Err(cfg_err(
                e.line,
                format!(
                    "unknown key \"{}\" in [params] for experiment {name}; expected one of {}",
                    e.key,
                    allowed.iter().map(|&(k, _)| k).collect::<Vec<_>>().join(", ")
                ),
            ));
        }
        params.insert(e.key.clone(), parse_f64(e)?);
    }

    let grid = Grid::new(grid_dim, grid_half_width, grid_points).map_err(|err| CzError::Config {
        line: None,
        msg: format!("invalid [grid] section: {err}"),
    })?;

    Ok(ExperimentConfig {
        name,
        seed,
        out,
        grid,
        functions,
        params,
    })
}
