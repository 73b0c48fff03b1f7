//! Optional `key=value` configuration file and policy resolution.
//!
//! Recognized keys: `policy.kind`, `policy.base`, `policy.cap_exponent`,
//! `policy.alpha`, `policy.min_delay`, `session.max_age`. Lines starting
//! with `#` are comments. Command-line flags win over file values.

use std::path::Path;

use pvbpp_core::protocol::DEFAULT_MAX_AGE;
use pvbpp_core::throttle::{
    DelayPolicy, PolicyKind, ThrottleError, DEFAULT_ALPHA, DEFAULT_BASE, DEFAULT_CAP_EXPONENT,
    DEFAULT_MIN_DELAY,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("config i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Policy(#[from] ThrottleError),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    pub policy_kind: Option<PolicyKind>,
    pub policy_base: Option<f64>,
    pub policy_cap_exponent: Option<u32>,
    pub policy_alpha: Option<f64>,
    pub policy_min_delay: Option<f64>,
    pub session_max_age: Option<u64>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = FileConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                reason: "expected key=value".to_string(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |reason: String| ConfigError::Parse { line, reason };
            match key {
                "policy.kind" => {
                    config.policy_kind = Some(match value {
                        "exponential" | "exp" => PolicyKind::Exponential,
                        "timestamp" | "ts" => PolicyKind::Timestamp,
                        "none" | "unthrottled" => PolicyKind::Unthrottled,
                        other => return Err(bad(format!("unknown policy.kind {other:?}"))),
                    })
                }
                "policy.base" => {
                    config.policy_base = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("bad number {value:?}")))?,
                    )
                }
                "policy.cap_exponent" => {
                    config.policy_cap_exponent = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("bad integer {value:?}")))?,
                    )
                }
                "policy.alpha" => {
                    config.policy_alpha = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("bad number {value:?}")))?,
                    )
                }
                "policy.min_delay" => {
                    config.policy_min_delay = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("bad number {value:?}")))?,
                    )
                }
                "session.max_age" => {
                    config.session_max_age = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("bad integer {value:?}")))?,
                    )
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn to_policy(&self) -> Result<DelayPolicy, ThrottleError> {
        DelayPolicy::build(
            self.policy_kind.unwrap_or(PolicyKind::Exponential),
            self.policy_base.unwrap_or(DEFAULT_BASE),
            self.policy_cap_exponent.unwrap_or(DEFAULT_CAP_EXPONENT),
            self.policy_alpha.unwrap_or(DEFAULT_ALPHA),
            self.policy_min_delay.unwrap_or(DEFAULT_MIN_DELAY),
        )
    }
}

/// CLI spec string beats the config file beats the default `exp:2:cap20`.
pub fn resolve_policy(
    cli_spec: Option<&str>,
    file: Option<&FileConfig>,
) -> Result<DelayPolicy, ConfigError> {
    if let Some(spec) = cli_spec {
        return Ok(DelayPolicy::parse(spec)?);
    }
    if let Some(file) = file {
        return Ok(file.to_policy()?);
    }
    Ok(DelayPolicy::default())
}

/// CLI max-age beats the config file beats [`DEFAULT_MAX_AGE`].
pub fn resolve_max_age(cli_max_age: Option<u64>, file: Option<&FileConfig>) -> u64 {
    cli_max_age
        .or_else(|| file.and_then(|f| f.session_max_age))
        .unwrap_or(DEFAULT_MAX_AGE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys_and_comments() {
        let text = "# policy\npolicy.kind = exponential\npolicy.base = 4\npolicy.cap_exponent = 10\npolicy.alpha = 0.5\npolicy.min_delay = 1\n\nsession.max_age = 120\n";
        let config = FileConfig::parse(text).unwrap();
        assert_eq!(config.policy_kind, Some(PolicyKind::Exponential));
        assert_eq!(config.policy_base, Some(4.0));
        assert_eq!(config.policy_cap_exponent, Some(10));
        assert_eq!(config.policy_alpha, Some(0.5));
        assert_eq!(config.policy_min_delay, Some(1.0));
        assert_eq!(config.session_max_age, Some(120));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(FileConfig::parse("nonsense\n").is_err());
        assert!(FileConfig::parse("what.ever = 1\n").is_err());
        assert!(FileConfig::parse("policy.base = many\n").is_err());
        assert!(FileConfig::parse("policy.kind = cubic\n").is_err());
    }

    #[test]
    fn cli_spec_wins_over_file_over_default() {
        let file = FileConfig::parse("policy.kind = none\nsession.max_age = 60\n").unwrap();
        let from_cli = resolve_policy(Some("exp:4"), Some(&file)).unwrap();
        assert_eq!(from_cli.base(), 4.0);
        let from_file = resolve_policy(None, Some(&file)).unwrap();
        assert_eq!(from_file.kind(), PolicyKind::Unthrottled);
        let fallback = resolve_policy(None, None).unwrap();
        assert_eq!(fallback, DelayPolicy::default());

        assert_eq!(resolve_max_age(Some(10), Some(&file)), 10);
        assert_eq!(resolve_max_age(None, Some(&file)), 60);
        assert_eq!(resolve_max_age(None, None), DEFAULT_MAX_AGE);
    }

    #[test]
    fn file_policy_falls_back_to_defaults_per_field() {
        let file = FileConfig::parse("policy.base = 3\n").unwrap();
        let policy = resolve_policy(None, Some(&file)).unwrap();
        assert_eq!(policy.kind(), PolicyKind::Exponential);
        assert_eq!(policy.base(), 3.0);
        assert_eq!(policy.cap_exponent(), DEFAULT_CAP_EXPONENT);
    }
}
