use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Reward weights and thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub w_fmt: f64,
    pub w_must: f64,
    pub w_sugg: f64,
    pub traj_match_bonus: f64,
    pub optional_tool_bonus: f64,
    pub iou_floor: f64,
    pub group_k: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            beta1: 1.0,
            beta2: 0.5,
            w_fmt: 0.1,
            w_must: 1.0,
            w_sugg: 0.2,
            traj_match_bonus: 0.5,
            optional_tool_bonus: 0.1,
            iou_floor: 0.1,
            group_k: 8,
        }
    }
}

const KEYS: [&str; 9] = [
    "beta1",
    "beta2",
    "w_fmt",
    "w_must",
    "w_sugg",
    "traj_match_bonus",
    "optional_tool_bonus",
    "iou_floor",
    "group_k",
];

impl RewardConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let weights = [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("w_fmt", self.w_fmt),
            ("w_must", self.w_must),
            ("w_sugg", self.w_sugg),
            ("traj_match_bonus", self.traj_match_bonus),
            ("optional_tool_bonus", self.optional_tool_bonus),
        ];
        for (key, w) in weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(ConfigError::Invalid(format!("{key} must be a finite non-negative number, got {w}")));
            }
        }
        if !(self.iou_floor > 0.0 && self.iou_floor < 1.0) {
            return Err(ConfigError::Invalid(format!("iou_floor must lie in (0, 1), got {}", self.iou_floor)));
        }
        if self.group_k < 2 {
            return Err(ConfigError::Invalid(format!("group_k must be at least 2, got {}", self.group_k)));
        }
        Ok(())
    }

    /// Sets one key from its textual value. Does not validate the result.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let float = |v: &str| v.parse::<f64>().map_err(|_| format!("'{key}' expects a number, got '{v}'"));
        match key {
            "beta1" => self.beta1 = float(value)?,
            "beta2" => self.beta2 = float(value)?,
            "w_fmt" => self.w_fmt = float(value)?,
            "w_must" => self.w_must = float(value)?,
            "w_sugg" => self.w_sugg = float(value)?,
            "traj_match_bonus" => self.traj_match_bonus = float(value)?,
            "optional_tool_bonus" => self.optional_tool_bonus = float(value)?,
            "iou_floor" => self.iou_floor = float(value)?,
            "group_k" => {
                self.group_k = value
                    .parse()
                    .map_err(|_| format!("'group_k' expects a count, got '{value}'"))?
            }
            _ => return Err(format!("unknown key '{key}' (known: {})", KEYS.join(", "))),
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and `#`
    /// comments are skipped; unknown keys are errors.
    pub fn merge_str(mut self, text: &str) -> Result<Self, ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| ConfigError::Syntax { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected key=value, found '{line}'")))?;
            self.set(key.trim(), value.trim()).map_err(syntax)?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let values = [
            self.beta1.to_string(),
            self.beta2.to_string(),
            self.w_fmt.to_string(),
            self.w_must.to_string(),
            self.w_sugg.to_string(),
            self.traj_match_bonus.to_string(),
            self.optional_tool_bonus.to_string(),
            self.iou_floor.to_string(),
            self.group_k.to_string(),
        ];
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}

impl FromStr for RewardConfig {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RewardConfig::default().merge_str(s)
    }
}
