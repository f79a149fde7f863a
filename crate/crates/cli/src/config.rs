//! Plain-text run configuration: `[section]` headers over `key = value`
//! lines, `#` or `;` comments, keys case-insensitive, last assignment wins.
//!
//! Precedence is defaults < config file < command-line flags; the resolved
//! values are echoed into the run manifest so a run can be reproduced from
//! its outputs alone.

use std::collections::BTreeMap;
use std::path::Path;

use crate::errors::CliError;

/// Allowed keys per section. Unknown sections or keys are usage errors so a
/// typo cannot silently fall back to a default.
const SCHEMA: &[(&str, &[&str])] = &[
    (
        "experiment",
        &[
            "kind",
            "methods",
            "modes",
            "sensors",
            "seeds",
            "budget",
            "qdeim_rule",
        ],
    ),
    (
        "dataset",
        &[
            "source",
            "grid",
            "terms",
            "samples",
            "train_fraction",
            "seed",
            "path",
            "format",
            "amplitude",
        ],
    ),
    ("noise", &["sigma"]),
    ("risk_sweep", &["k", "modes", "seed"]),
    ("dice", &["k", "modes", "sigmas"]),
    ("output", &["dir", "svg"]),
];

/// Parsed config: flat map from `section.key` to the raw value string.
#[derive(Debug, Default, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::io(format!("cannot read config '{}': {}", path.display(), e))
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        let mut section: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| {
                        CliError::usage(format!(
                            "{origin}:{}: unterminated section header '{raw}'",
                            lineno + 1
                        ))
                    })?
                    .trim()
                    .to_ascii_lowercase();
                if !SCHEMA.iter().any(|(s, _)| *s == name) {
                    return Err(CliError::usage(format!(
                        "{origin}:{}: unknown section '[{name}]' (expected one of {})",
                        lineno + 1,
                        SCHEMA
                            .iter()
                            .map(|(s, _)| *s)
                            .collect::<Vec<_>>()
                            .join(", ")
                    )));
                }
                section = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "{origin}:{}: expected 'key = value', got '{raw}'",
                    lineno + 1
                )));
            };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            let Some(section) = section.as_deref() else {
                return Err(CliError::usage(format!(
                    "{origin}:{}: '{key}' appears before any [section] header",
                    lineno + 1
                )));
            };
            let allowed = SCHEMA
                .iter()
                .find(|(s, _)| *s == section)
                .map(|(_, keys)| *keys)
                .unwrap_or(&[]);
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::usage(format!(
                    "{origin}:{}: unknown key '{key}' in [{section}] (expected one of {})",
                    lineno + 1,
                    allowed.join(", ")
                )));
            }
            values.insert(format!("{section}.{key}"), value);
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Override one resolved value (used to layer flags over the file).
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    /// All resolved `section.key` → value pairs, for the manifest.
    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(idx) => &line[..idx],
        None => line,
    }
}

/// Parse "a..b" (inclusive) or a comma-separated list into sorted values.
pub fn parse_usize_list(text: &str, what: &str) -> Result<Vec<usize>, CliError> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: usize = parse_scalar(lo, what)?;
        let hi: usize = parse_scalar(hi, what)?;
        if hi < lo {
            return Err(CliError::usage(format!(
                "{what}: range '{text}' is empty (upper end below lower)"
            )));
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|piece| parse_scalar(piece, what))
        .collect()
}

pub fn parse_u64_list(text: &str, what: &str) -> Result<Vec<u64>, CliError> {
    parse_usize_list(text, what).map(|v| v.into_iter().map(|x| x as u64).collect())
}

pub fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|piece| {
            let piece = piece.trim();
            piece.parse::<f64>().map_err(|_| {
                CliError::usage(format!("{what}: '{piece}' is not a number"))
            })
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(piece: &str, what: &str) -> Result<T, CliError> {
    let piece = piece.trim();
    piece
        .parse::<T>()
        .map_err(|_| CliError::usage(format!("{what}: '{piece}' is not a valid value")))
}
