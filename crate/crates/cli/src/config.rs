//! Run configuration: defaults, flat key=value config files, and
//! command-line overrides, resolved into one validated record that is
//! embedded verbatim in every report.

use std::path::{Path, PathBuf};

use serde::Serialize;

use cuspclose_core::WindowMode;

/// Fault injection drills for CI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    /// Bump one sample in the first cap's profile band.
    Curvature,
    /// Zero out the first interface's collar width.
    Completeness,
}

/// Fiber choice for curvature scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FiberKind {
    Exact,
    Smoothed,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub epsilon: f64,
    pub dim: usize,
    pub rank: u32,
    pub core_length: f64,
    /// `None` means auto: threshold plus ten.
    pub i_max: Option<u32>,
    pub mode: WindowMode,
    pub samples: usize,
    pub fd_step: f64,
    pub tol: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Cone order override for solve-smoothing; `None` solves at the
    /// threshold.
    pub order: Option<u32>,
    pub fiber: FiberKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inject_fault: Option<FaultKind>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            dim: 4,
            rank: 2,
            core_length: 1.0,
            i_max: None,
            mode: WindowMode::TwoSided,
            samples: 1000,
            fd_step: 1e-3,
            tol: 1e-3,
            seed: 42,
            out: PathBuf::from("out"),
            order: None,
            fiber: FiberKind::Exact,
            inject_fault: None,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn parse_mode(v: &str) -> Result<WindowMode, ConfigError> {
    match v {
        "one-sided" | "one_sided" => Ok(WindowMode::OneSided),
        "two-sided" | "two_sided" => Ok(WindowMode::TwoSided),
        other => Err(ConfigError(format!(
            "mode must be one-sided or two-sided, got {other}"
        ))),
    }
}

fn parse_fiber(v: &str) -> Result<FiberKind, ConfigError> {
    match v {
        "exact" => Ok(FiberKind::Exact),
        "smoothed" => Ok(FiberKind::Smoothed),
        other => Err(ConfigError(format!(
            "fiber must be exact or smoothed, got {other}"
        ))),
    }
}

impl RunConfig {
    /// Apply one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |what: &str| ConfigError(format!("invalid {what}: {value}"));
        match key {
            "epsilon" => self.epsilon = value.parse().map_err(|_| bad("epsilon"))?,
            "dim" => self.dim = value.parse().map_err(|_| bad("dim"))?,
            "rank" => self.rank = value.parse().map_err(|_| bad("rank"))?,
            "core_length" => self.core_length = value.parse().map_err(|_| bad("core_length"))?,
            "i_max" => {
                self.i_max = if value == "auto" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad("i_max"))?)
                }
            }
            "mode" => self.mode = parse_mode(value)?,
            "samples" => self.samples = value.parse().map_err(|_| bad("samples"))?,
            "fd_step" => self.fd_step = value.parse().map_err(|_| bad("fd_step"))?,
            "tol" => self.tol = value.parse().map_err(|_| bad("tol"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "out" => self.out = PathBuf::from(value),
            "order" => {
                self.order = if value == "auto" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad("order"))?)
                }
            }
            "fiber" => self.fiber = parse_fiber(value)?,
            other => return Err(ConfigError(format!("unknown config key: {other}"))),
        }
        Ok(())
    }

    /// Load a flat key=value file over the current values. `#` starts a
    /// comment; blank lines are skipped.
    pub fn load_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.epsilon > 0.0) {
            return Err(ConfigError(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.dim < 3 {
            return Err(ConfigError(format!("dim must be >= 3, got {}", self.dim)));
        }
        if self.rank < 1 {
            return Err(ConfigError("rank must be >= 1".into()));
        }
        if !(self.core_length > 0.0) {
            return Err(ConfigError(format!(
                "core_length must be > 0, got {}",
                self.core_length
            )));
        }
        if let Some(m) = self.i_max {
            if m < 2 {
                return Err(ConfigError(format!("i_max must be >= 2, got {m}")));
            }
        }
        if self.samples == 0 {
            return Err(ConfigError("samples must be >= 1".into()));
        }
        if !(self.fd_step > 0.0) || self.fd_step > 1e-2 {
            return Err(ConfigError(format!(
                "fd_step must lie in (0, 1e-2], got {} (step too large for the O(h^2) oracle)",
                self.fd_step
            )));
        }
        if !(self.tol > 0.0) {
            return Err(ConfigError(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn fd_step_bounds() {
        let mut cfg = RunConfig::default();
        cfg.set("fd_step", "1").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("epsilonn", "0.2").is_err());
    }

    #[test]
    fn file_with_comments_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\nepsilon = 0.2\nmode = one-sided\ni_max = 64\n")
            .unwrap();
        let mut cfg = RunConfig::default();
        cfg.load_file(&path).unwrap();
        assert_eq!(cfg.epsilon, 0.2);
        assert_eq!(cfg.mode, WindowMode::OneSided);
        assert_eq!(cfg.i_max, Some(64));
    }
}
