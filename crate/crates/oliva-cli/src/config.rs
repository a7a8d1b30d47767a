//! Simple `key=value` config files mirroring the command-line flags.
//!
//! Lines starting with `#` and blank lines are ignored. Keys use the flag
//! names without the leading dashes (e.g. `outcome=y`, `lambda-values=...`).
//! Explicit command-line flags take precedence over config entries.

use std::collections::HashMap;
use std::path::Path;

use oliva::{OlivaError, Result};

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    entries: HashMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            OlivaError::ParseError {
                line: 0,
                column: path.display().to_string(),
                message: e.to_string(),
            }
        })?;
        let mut entries = HashMap::new();
        for (lineno, line) in raw.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or(OlivaError::ParseError {
                line: lineno + 1,
                column: "config".into(),
                message: "expected key=value".into(),
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

/// Fill an optional flag from the config when the command line left it unset.
pub fn fall_back<T: std::str::FromStr>(
    slot: &mut Option<T>,
    config: &ConfigFile,
    key: &str,
) -> Result<()> {
    if slot.is_none() {
        if let Some(raw) = config.get(key) {
            let parsed = raw.parse().map_err(|_| OlivaError::ParseError {
                line: 0,
                column: key.to_string(),
                message: format!("cannot parse config value '{raw}'"),
            })?;
            *slot = Some(parsed);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_key_value_lines() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# comment\noutcome = y\nlevel=0.9\n").unwrap();
        let cfg = ConfigFile::load(file.path()).unwrap();
        assert_eq!(cfg.get("outcome"), Some("y"));
        assert_eq!(cfg.get("level"), Some("0.9"));
        assert_eq!(cfg.get("missing"), None);
    }

    #[test]
    fn rejects_lines_without_equals() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "just-some-noise").unwrap();
        assert!(ConfigFile::load(file.path()).is_err());
    }

    #[test]
    fn fallback_only_fills_unset_slots() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "level=0.9").unwrap();
        let cfg = ConfigFile::load(file.path()).unwrap();
        let mut set: Option<f64> = Some(0.8);
        let mut unset: Option<f64> = None;
        fall_back(&mut set, &cfg, "level").unwrap();
        fall_back(&mut unset, &cfg, "level").unwrap();
        assert_eq!(set, Some(0.8));
        assert_eq!(unset, Some(0.9));
    }
}
