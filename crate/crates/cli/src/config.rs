//! Flat `key=value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored, except lines that
//! start with `#:`. Every output file carries the resolved configuration as
//! `#: key=value` lines, and a file that contains such lines is read from
//! them alone, so any output can be passed back through `--config`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

pub const ECHO_PREFIX: &str = "#:";

/// Every key the CLI understands.
pub const KNOWN_KEYS: &[&str] = &[
    "omega1",
    "omega2",
    "t1",
    "t2",
    "gamma0",
    "lambda",
    "omega_c",
    "omega_m",
    "tol_abs",
    "tol_rel",
    "bath",
    "n0",
    "wc_min",
    "wc_max",
    "wc_points",
    "omega_c_list",
    "t0",
    "panels",
    "delta_t_min",
    "delta_t_max",
    "delta_t_points",
    "delta_omega_min",
    "delta_omega_max",
    "delta_omega_points",
    "gamma0_min",
    "gamma0_max",
    "gamma0_points",
    "lambda_min",
    "lambda_max",
    "lambda_points",
    "a0_re",
    "a0_im",
    "aa0_re",
    "aa0_im",
    "points",
    "horizon",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io(String),
    Syntax { line: usize, text: String },
    UnknownKey(String),
    Missing(&'static str),
    Value { key: String, value: String, reason: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(msg) => write!(f, "cannot read config: {msg}"),
            ConfigError::Syntax { line, text } => {
                write!(f, "line {line}: expected key=value, got `{text}`")
            }
            ConfigError::UnknownKey(k) => write!(f, "unknown key `{k}`"),
            ConfigError::Missing(k) => write!(f, "missing required key `{k}`"),
            ConfigError::Value { key, value, reason } => {
                write!(f, "bad value `{value}` for `{key}`: {reason}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Values as written, plus the keys read so far for the echo.
#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    used: std::cell::RefCell<BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let echoed = text.lines().any(|l| l.trim_start().starts_with(ECHO_PREFIX));
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let body = if echoed {
                match line.strip_prefix(ECHO_PREFIX) {
                    Some(rest) => rest.trim(),
                    None => continue,
                }
            } else {
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                line
            };
            let (k, v) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: line.to_string(),
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            text: pair.to_string(),
        })?;
        self.set(k.trim(), v.trim())
    }

    fn record(&self, key: &str, value: String) {
        self.used.borrow_mut().insert(key.to_string(), value);
    }

    fn raw(&self, key: &'static str) -> Option<&str> {
        debug_assert!(KNOWN_KEYS.contains(&key), "{key} is not registered");
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::Value {
                    key: key.to_string(),
                    value: v.to_string(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    pub fn f64(&self, key: &'static str) -> Result<f64, ConfigError> {
        let v: f64 = self.parsed(key)?.ok_or(ConfigError::Missing(key))?;
        self.record(key, num(v));
        Ok(v)
    }

    pub fn f64_or(&self, key: &'static str, default: f64) -> Result<f64, ConfigError> {
        let v = self.parsed(key)?.unwrap_or(default);
        self.record(key, num(v));
        Ok(v)
    }

    /// Optional key with no default; echoed only when present.
    pub fn f64_opt(&self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = self.parsed(key)?;
        if let Some(x) = v {
            self.record(key, num(x));
        }
        Ok(v)
    }

    pub fn usize_or(&self, key: &'static str, default: usize) -> Result<usize, ConfigError> {
        let v = self.parsed(key)?.unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn str_or(&self, key: &'static str, default: &str) -> String {
        let v = self.raw(key).unwrap_or(default).to_string();
        self.record(key, v.clone());
        v
    }

    /// Comma-separated list of numbers.
    pub fn list_or(&self, key: &'static str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        let v = match self.raw(key) {
            None => default.to_vec(),
            Some(text) => text
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| ConfigError::Value {
                        key: key.to_string(),
                        value: text.to_string(),
                        reason: e.to_string(),
                    })
                })
                .collect::<Result<_, _>>()?,
        };
        self.record(key, join(&v, ","));
        Ok(v)
    }

    /// Comma-separated `a:b` pairs.
    pub fn pairs_or(&self, key: &'static str, default: &[(f64, f64)]) -> Result<Vec<(f64, f64)>, ConfigError> {
        let bad = |text: &str, reason: &str| ConfigError::Value {
            key: key.to_string(),
            value: text.to_string(),
            reason: reason.to_string(),
        };
        let v = match self.raw(key) {
            None => default.to_vec(),
            Some(text) => text
                .split(',')
                .map(|item| {
                    let (a, b) = item.split_once(':').ok_or_else(|| bad(text, "expected a:b"))?;
                    let a = a.trim().parse::<f64>().map_err(|e| bad(text, &e.to_string()))?;
                    let b = b.trim().parse::<f64>().map_err(|e| bad(text, &e.to_string()))?;
                    Ok((a, b))
                })
                .collect::<Result<_, _>>()?,
        };
        let text: Vec<String> = v.iter().map(|&(a, b)| format!("{}:{}", num(a), num(b))).collect();
        self.record(key, text.join(","));
        Ok(v)
    }

    /// Resolved values read so far, one `#: key=value` line each, sorted.
    pub fn echo(&self) -> String {
        self.used
            .borrow()
            .iter()
            .map(|(k, v)| format!("{ECHO_PREFIX} {k}={v}\n"))
            .collect()
    }
}

/// Shortest round-trip form, in exponent notation for very small or large values.
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn join(v: &[f64], sep: &str) -> String {
    v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(sep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let cfg = Config::parse("# run\n\nomega1 = 14\n  omega2=16 \n").unwrap();
        assert_eq!(cfg.f64("omega1").unwrap(), 14.0);
        assert_eq!(cfg.f64("omega2").unwrap(), 16.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert_eq!(
            Config::parse("omega3=1").unwrap_err(),
            ConfigError::UnknownKey("omega3".into())
        );
        assert!(matches!(
            Config::parse("omega1").unwrap_err(),
            ConfigError::Syntax { line: 1, .. }
        ));
    }

    #[test]
    fn missing_key_is_named() {
        let cfg = Config::parse("omega1=14").unwrap();
        let err = cfg.f64("omega2").unwrap_err();
        assert!(err.to_string().contains("omega2"));
    }

    #[test]
    fn echo_reads_back() {
        let cfg = Config::parse("lambda=0.2\nomega1=14\npanels=0.1:0.2,1:1").unwrap();
        cfg.f64("omega1").unwrap();
        cfg.f64("lambda").unwrap();
        cfg.f64_or("t0", 17.5).unwrap();
        cfg.pairs_or("panels", &[]).unwrap();
        let echo = cfg.echo();
        assert_eq!(
            echo,
            "#: lambda=0.2\n#: omega1=14\n#: panels=0.1:0.2,1:1\n#: t0=17.5\n"
        );
        let file = format!("# comment\n{echo}a,b\n1,2\n");
        let back = Config::parse(&file).unwrap();
        back.f64("omega1").unwrap();
        back.f64("lambda").unwrap();
        assert_eq!(back.f64("t0").unwrap(), 17.5);
        assert_eq!(back.pairs_or("panels", &[]).unwrap(), vec![(0.1, 0.2), (1.0, 1.0)]);
        assert_eq!(back.echo(), echo);
    }

    #[test]
    fn small_values_echo_in_exponent_form() {
        let cfg = Config::parse("tol_abs=0.00000001").unwrap();
        assert_eq!(cfg.f64("tol_abs").unwrap(), 1e-8);
        assert_eq!(cfg.echo(), "#: tol_abs=1e-8\n");
    }

    #[test]
    fn lists_parse() {
        let cfg = Config::parse("omega_c_list=13, 15,17").unwrap();
        assert_eq!(cfg.list_or("omega_c_list", &[]).unwrap(), vec![13.0, 15.0, 17.0]);
        let cfg = Config::parse("omega_c_list=13,x").unwrap();
        assert!(cfg.list_or("omega_c_list", &[]).is_err());
    }
}
