//! TOML experiment configs.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;

/// Parse and validate a config document. Missing keys take their defaults;
/// unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// The fully resolved config as a TOML document.
pub fn effective_config(config: &ExperimentConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_dump_parses_back() {
        let c = ExperimentConfig::default();
        let text = effective_config(&c).unwrap();
        assert_eq!(parse_config(&text).unwrap(), c);
    }

    #[test]
    fn partial_documents_take_defaults() {
        let c = parse_config("seed = 9\nreplications = 3\n[cohort]\nsubjects = 4\n").unwrap();
        assert_eq!((c.seed, c.replications, c.cohort.subjects), (9, 3, 4));
        assert_eq!(c.daily_cap, ExperimentConfig::default().daily_cap);
    }

    #[test]
    fn rejects_unknown_keys_and_invalid_values() {
        assert!(matches!(parse_config("sede = 1\n"), Err(Error::Config(_))));
        assert!(parse_config("replications = 0\n").is_err());
    }
}
