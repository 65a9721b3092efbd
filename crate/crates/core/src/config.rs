//! `.sciwrite-lint.toml` configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::finding::{check, Level};
use crate::matching::DEFAULT_MATCH_THRESHOLD;
use crate::registry::ratelimit::DEFAULT_REQUESTS_PER_SECOND;
use crate::registry::DEFAULT_PARALLELISM;
use crate::reliability::{DEFAULT_TITLE_ERROR_THRESHOLD, DEFAULT_UNRELIABLE_THRESHOLD};
use crate::score::{default_beta, Axis};

pub const CONFIG_FILE_NAME: &str = ".sciwrite-lint.toml";
pub const CACHE_ENV_VAR: &str = "SCIWRITE_LINT_CACHE";
pub const DEFAULT_OVERSIZE_PAGES: u32 = 50;
/// Snapshots older than this trigger an info finding.
pub const DEFAULT_SNAPSHOT_MAX_AGE_DAYS: u64 = 30;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Per-check switch; checks not listed are enabled.
    pub checks: BTreeMap<String, bool>,
    /// Per-check level replacing the built-in one.
    pub severity: BTreeMap<String, Level>,
    pub match_threshold: f64,
    pub title_error_threshold: f64,
    pub unreliable_threshold: f64,
    pub oversize_pages: u32,
    pub rate_limit_rps: f64,
    pub parallelism: usize,
    pub beta: BTreeMap<Axis, f64>,
    pub cache_dir: Option<PathBuf>,
    /// Contact address passed to registries that ask for one.
    pub mailto: Option<String>,
    /// Exit with status 2 when only warnings are present.
    pub fail_on_warnings: bool,
    pub snapshot_max_age_days: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            checks: BTreeMap::new(),
            severity: BTreeMap::new(),
            match_threshold: DEFAULT_MATCH_THRESHOLD,
            title_error_threshold: DEFAULT_TITLE_ERROR_THRESHOLD,
            unreliable_threshold: DEFAULT_UNRELIABLE_THRESHOLD,
            oversize_pages: DEFAULT_OVERSIZE_PAGES,
            rate_limit_rps: DEFAULT_REQUESTS_PER_SECOND,
            parallelism: DEFAULT_PARALLELISM,
            beta: default_beta(),
            cache_dir: None,
            mailto: None,
            fail_on_warnings: true,
            snapshot_max_age_days: DEFAULT_SNAPSHOT_MAX_AGE_DAYS,
        }
    }
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut config: Config = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })?;
        // a relative cache dir is relative to the config file
        if let (Some(dir), Some(parent)) = (&config.cache_dir, path.parent()) {
            if dir.is_relative() {
                config.cache_dir = Some(parent.join(dir));
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("match_threshold", self.match_threshold),
            ("title_error_threshold", self.title_error_threshold),
            ("unreliable_threshold", self.unreliable_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::Invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.parallelism < 1 {
            return Err(ConfigError::Invalid("parallelism must be at least 1".into()));
        }
        if self.rate_limit_rps.is_nan() || self.rate_limit_rps <= 0.0 {
            return Err(ConfigError::Invalid(format!(
                "rate_limit_rps must be positive, got {}",
                self.rate_limit_rps
            )));
        }
        for id in self.checks.keys().chain(self.severity.keys()) {
            if !check::is_registered(id) {
                return Err(ConfigError::Invalid(format!("unknown check `{id}`")));
            }
        }
        if let Some(bad) = self.beta.values().find(|b| b.is_nan() || **b < 0.0) {
            return Err(ConfigError::Invalid(format!("beta weights must be nonnegative, got {bad}")));
        }
        Ok(())
    }

    pub fn is_enabled(&self, check_id: &str) -> bool {
        self.checks.get(check_id).copied().unwrap_or(true)
    }

    pub fn level_for(&self, check_id: &str, default: Level) -> Level {
        self.severity.get(check_id).copied().unwrap_or(default)
    }

    /// Cache directory: environment variable, then config, then
    /// `~/.cache/sciwrite-lint`.
    pub fn resolve_cache_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os(CACHE_ENV_VAR).filter(|v| !v.is_empty()) {
            return PathBuf::from(dir);
        }
        if let Some(dir) = &self.cache_dir {
            return dir.clone();
        }
        let home = std::env::var_os("HOME").map(PathBuf::from).unwrap_or_default();
        home.join(".cache").join("sciwrite-lint")
    }
}

/// Look for the config file in `start` and its ancestors.
pub fn discover(start: &Path) -> Option<PathBuf> {
    let start = if start.as_os_str().is_empty() {
        Path::new(".")
    } else {
        start
    };
    let start = fs::canonicalize(start).unwrap_or_else(|_| start.to_owned());
    start
        .ancestors()
        .map(|dir| dir.join(CONFIG_FILE_NAME))
        .find(|p| p.is_file())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = Config::default();
        assert_eq!(c.match_threshold, 0.70);
        assert_eq!(c.title_error_threshold, 0.80);
        assert_eq!(c.unreliable_threshold, 0.5);
        assert_eq!(c.oversize_pages, 50);
        assert!(c.is_enabled(check::DANGLING_CITE));
        assert!((c.beta.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parses_checks_severity_and_beta() {
        let text = r#"
match_threshold = 0.75
fail_on_warnings = false

[checks]
unreferenced-figure = false

[severity]
reference-accuracy = "error"

[beta]
empirical = 0.4
progressiveness = 0.15
unification = 0.15
problem_solving = 0.15
severity = 0.15
"#;
        let c = Config::parse(text, Path::new("/x/.sciwrite-lint.toml")).unwrap();
        assert!(!c.is_enabled(check::UNREFERENCED_FIGURE));
        assert_eq!(c.level_for(check::REFERENCE_ACCURACY, Level::Warning), Level::Error);
        assert_eq!(c.beta[&Axis::Empirical], 0.4);
        assert!(!c.fail_on_warnings);
    }

    #[test]
    fn rejects_unknown_and_out_of_range() {
        let p = Path::new("c.toml");
        assert!(Config::parse("bogus = 1", p).is_err());
        assert!(Config::parse("[checks]\nno-such-check = false", p).is_err());
        assert!(Config::parse("match_threshold = 1.5", p).is_err());
        assert!(Config::parse("parallelism = 0", p).is_err());
    }

    #[test]
    fn discovered_upward() {
        let dir = tempfile::tempdir().unwrap();
        let nested = dir.path().join("paper/sections");
        fs::create_dir_all(&nested).unwrap();
        fs::write(dir.path().join(CONFIG_FILE_NAME), "").unwrap();
        let found = discover(&nested).unwrap();
        assert_eq!(found.file_name().unwrap(), CONFIG_FILE_NAME);
    }
}
