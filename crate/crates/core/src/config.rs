//! Engine parameters and the `key = value` config file format.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("`{key}` = {value} violates {constraint}")]
    OutOfRange {
        key: &'static str,
        value: f64,
        constraint: &'static str,
    },
}

/// Every free parameter of the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub struct EngineConfig {
    /// Per-insertion multiplicative decay of focus salience.
    pub focus_decay: f64,
    /// Salience below which focus entities are demoted to memory.
    pub focus_demote: f64,
    /// Per-tick multiplicative decay of shadow weights.
    pub shadow_decay: f64,
    /// Minimum verb similarity for a spike.
    pub match_floor: f64,
    /// Floor applied to role consistency factors.
    pub consistency_floor: f64,
    /// Fraction of a VI spike spilled onto its role instances.
    pub argument_spill: f64,
    pub diffusion_rate: f64,
    /// Shadow weights below this are pruned.
    pub shadow_prune: f64,
    /// Number of most recent focus VIs voting for continuations.
    pub continuation_window: usize,
    pub successor_depth: usize,
    pub successor_discount: f64,
    pub cluster_threshold: f64,
    pub instance_threshold: f64,
    pub matched_threshold: f64,
    pub reference_threshold: f64,
    /// Attribute weight needed to be copied into a confabulated instance.
    pub attribute_floor: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            focus_decay: 0.9,
            focus_demote: 0.1,
            shadow_decay: 0.95,
            match_floor: 0.2,
            consistency_floor: 0.05,
            argument_spill: 0.5,
            diffusion_rate: 0.1,
            shadow_prune: 1e-6,
            continuation_window: 5,
            successor_depth: 3,
            successor_discount: 0.5,
            cluster_threshold: 0.5,
            instance_threshold: 0.1,
            matched_threshold: 0.05,
            reference_threshold: 0.1,
            attribute_floor: 0.1,
        }
    }
}

const RATES: &[&str] = &[
    "focus_decay",
    "shadow_decay",
    "consistency_floor",
    "argument_spill",
    "diffusion_rate",
    "successor_discount",
];

impl EngineConfig {
    /// Shadow and continuation scores reduce to plain successor frequencies.
    pub fn oracle() -> Self {
        EngineConfig {
            shadow_decay: 1.0,
            diffusion_rate: 0.0,
            argument_spill: 1.0,
            consistency_floor: 1.0,
            match_floor: 0.5,
            continuation_window: 1,
            successor_depth: 1,
            ..EngineConfig::default()
        }
    }

    fn fields_mut(&mut self) -> Vec<(&'static str, Field<'_>)> {
        vec![
            ("focus_decay", Field::Real(&mut self.focus_decay)),
            ("focus_demote", Field::Real(&mut self.focus_demote)),
            ("shadow_decay", Field::Real(&mut self.shadow_decay)),
            ("match_floor", Field::Real(&mut self.match_floor)),
            (
                "consistency_floor",
                Field::Real(&mut self.consistency_floor),
            ),
            ("argument_spill", Field::Real(&mut self.argument_spill)),
            ("diffusion_rate", Field::Real(&mut self.diffusion_rate)),
            ("shadow_prune", Field::Real(&mut self.shadow_prune)),
            (
                "continuation_window",
                Field::Count(&mut self.continuation_window),
            ),
            ("successor_depth", Field::Count(&mut self.successor_depth)),
            (
                "successor_discount",
                Field::Real(&mut self.successor_discount),
            ),
            (
                "cluster_threshold",
                Field::Real(&mut self.cluster_threshold),
            ),
            (
                "instance_threshold",
                Field::Real(&mut self.instance_threshold),
            ),
            (
                "matched_threshold",
                Field::Real(&mut self.matched_threshold),
            ),
            (
                "reference_threshold",
                Field::Real(&mut self.reference_threshold),
            ),
            ("attribute_floor", Field::Real(&mut self.attribute_floor)),
        ]
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_str(mut self, source: &str) -> Result<Self, ConfigError> {
        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or(ConfigError::Malformed { line })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || ConfigError::BadValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
            };
            let mut fields = self.fields_mut();
            let (_, field) = fields
                .iter_mut()
                .find(|(name, _)| *name == key)
                .ok_or_else(|| ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })?;
            match field {
                Field::Real(slot) => **slot = value.parse().map_err(|_| bad())?,
                Field::Count(slot) => **slot = value.parse().map_err(|_| bad())?,
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut copy = self.clone();
        for (key, field) in copy.fields_mut() {
            match field {
                Field::Real(v) => {
                    let v = *v;
                    if RATES.contains(&key) {
                        if !(v > 0.0 && v <= 1.0) {
                            // Oracle mode switches diffusion off entirely.
                            if !(key == "diffusion_rate" && v == 0.0) {
                                return Err(ConfigError::OutOfRange {
                                    key,
                                    value: v,
                                    constraint: "(0, 1]",
                                });
                            }
                        }
                    } else if !(0.0..=1.0).contains(&v) {
                        return Err(ConfigError::OutOfRange {
                            key,
                            value: v,
                            constraint: "[0, 1]",
                        });
                    }
                }
                Field::Count(v) => {
                    if *v < 1 {
                        return Err(ConfigError::OutOfRange {
                            key,
                            value: *v as f64,
                            constraint: ">= 1",
                        });
                    }
                }
            }
        }
        if self.focus_demote <= 0.0 {
            return Err(ConfigError::OutOfRange {
                key: "focus_demote",
                value: self.focus_demote,
                constraint: "(0, 1]",
            });
        }
        if self.shadow_prune <= 0.0 {
            return Err(ConfigError::OutOfRange {
                key: "shadow_prune",
                value: self.shadow_prune,
                constraint: "(0, 1]",
            });
        }
        Ok(())
    }
}

enum Field<'a> {
    Real(&'a mut f64),
    Count(&'a mut usize),
}
