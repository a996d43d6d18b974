//! Run configuration: a JSON file naming the document, the prompt templates,
//! the provider ensemble, and the tuning knobs. Relative paths resolve
//! against the configuration file's own directory, so a fixture directory is
//! self-contained and relocatable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specfsm_core::{ProtocolProfile, ProviderConfig, DEFAULT_MAX_WINDOW_WORDS, DEFAULT_THETA};

use crate::error::CliError;

fn default_theta() -> f64 {
    DEFAULT_THETA
}

fn default_max_words() -> usize {
    DEFAULT_MAX_WINDOW_WORDS
}

fn default_context_budget() -> usize {
    specfsm_core::prompting::DEFAULT_CONTEXT_BUDGET_WORDS
}

fn default_context_tail() -> usize {
    specfsm_core::prompting::DEFAULT_CONTEXT_TAIL
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Everything one pipeline run needs. See `docs/config.example.jsonc` for a
/// commented example.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// The specification document (plain text).
    pub document: PathBuf,
    /// Directory holding the six prompt template files.
    pub templates: PathBuf,
    /// Protocol under extraction: name, document style, naming hints.
    pub profile: ProtocolProfile,
    /// Version label stamped into exported machines.
    #[serde(default)]
    pub spec_version: String,
    /// The provider ensemble, one entry per model.
    pub providers: Vec<ProviderConfig>,
    /// Span-overlap alignment threshold in (0, 1].
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Explicit vote threshold; omitted means strict majority.
    #[serde(default)]
    pub votes: Option<usize>,
    /// Window merging budget in words.
    #[serde(default = "default_max_words")]
    pub max_words: usize,
    /// Word budget of the rolling context digest.
    #[serde(default = "default_context_budget")]
    pub context_budget_words: usize,
    /// How many recent transitions the context digest keeps.
    #[serde(default = "default_context_tail")]
    pub context_tail: usize,
    /// Extra pseudo-state names rejected on top of the built-in ones.
    #[serde(default)]
    pub denylist: Vec<String>,
    /// Ground truth for `eval`; optional.
    #[serde(default)]
    pub truth: Option<PathBuf>,
    /// Directory for artifacts; created on demand.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Write auxiliary artifacts (readable windows, clusters, DOT export).
    #[serde(default)]
    pub dump: bool,
}

/// Flag overrides applied on top of the loaded file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub theta: Option<f64>,
    pub votes: Option<usize>,
    pub max_words: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub dump: bool,
}

impl RunConfig {
    /// Loads and validates a configuration file. Relative paths inside the
    /// file are resolved against its parent directory; the output directory
    /// resolves against the current directory when overridden on the command
    /// line.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;

        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.document = resolve(base, &cfg.document);
        cfg.templates = resolve(base, &cfg.templates);
        cfg.truth = cfg.truth.as_ref().map(|t| resolve(base, t));
        cfg.out_dir = resolve(base, &cfg.out_dir);

        if let Some(theta) = overrides.theta {
            cfg.theta = theta;
        }
        if let Some(votes) = overrides.votes {
            cfg.votes = Some(votes);
        }
        if let Some(max_words) = overrides.max_words {
            cfg.max_words = max_words;
        }
        if let Some(out_dir) = &overrides.out_dir {
            cfg.out_dir = out_dir.clone();
        }
        cfg.dump = cfg.dump || overrides.dump;

        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.providers.is_empty() {
            return Err(CliError::Config(
                "config must name at least one provider".to_string(),
            ));
        }
        let mut names: Vec<&str> = self.providers.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.providers.len() {
            return Err(CliError::Config(
                "provider names must be unique".to_string(),
            ));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(CliError::Config(format!(
                "theta must be in (0, 1], got {}",
                self.theta
            )));
        }
        if let Some(votes) = self.votes {
            if votes < 1 || votes > self.providers.len() {
                return Err(CliError::Config(format!(
                    "votes must be between 1 and the provider count ({}), got {votes}",
                    self.providers.len()
                )));
            }
        }
        if self.max_words == 0 {
            return Err(CliError::Config("max_words must be positive".to_string()));
        }
        if !self.document.is_file() {
            return Err(CliError::Config(format!(
                "document not found: {}",
                self.document.display()
            )));
        }
        if !self.templates.is_dir() {
            return Err(CliError::Config(format!(
                "templates directory not found: {}",
                self.templates.display()
            )));
        }
        if let Some(truth) = &self.truth {
            if !truth.is_file() {
                return Err(CliError::Config(format!(
                    "ground truth not found: {}",
                    truth.display()
                )));
            }
        }
        Ok(())
    }
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use specfsm_core::ProtocolStyle;
    use std::fs;

    fn write_minimal_fixture(dir: &Path) -> PathBuf {
        fs::write(dir.join("doc.txt"), "1 Scope\n\nSome text.\n").unwrap();
        fs::create_dir(dir.join("tpl")).unwrap();
        let config = serde_json::json!({
            "document": "doc.txt",
            "templates": "tpl",
            "profile": {"name": "NAS", "style": "procedure_oriented"},
            "providers": [{"name": "alpha", "base_url": "http://localhost:1", "model": "m"}],
        });
        let path = dir.join("config.json");
        fs::write(&path, serde_json::to_vec_pretty(&config).unwrap()).unwrap();
        path
    }

    #[test]
    fn loads_and_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_minimal_fixture(dir.path());
        let cfg = RunConfig::load(&path, &Overrides::default()).unwrap();
        assert_eq!(cfg.document, dir.path().join("doc.txt"));
        assert_eq!(cfg.templates, dir.path().join("tpl"));
        assert_eq!(cfg.out_dir, dir.path().join("out"));
        assert_eq!(cfg.theta, DEFAULT_THETA);
        assert_eq!(cfg.max_words, DEFAULT_MAX_WINDOW_WORDS);
        assert_eq!(cfg.profile.style, ProtocolStyle::ProcedureOriented);
        assert!(cfg.votes.is_none());
    }

    #[test]
    fn overrides_beat_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_minimal_fixture(dir.path());
        let overrides = Overrides {
            theta: Some(0.9),
            votes: Some(1),
            max_words: Some(500),
            out_dir: Some(PathBuf::from("/tmp/elsewhere")),
            dump: true,
        };
        let cfg = RunConfig::load(&path, &overrides).unwrap();
        assert_eq!(cfg.theta, 0.9);
        assert_eq!(cfg.votes, Some(1));
        assert_eq!(cfg.max_words, 500);
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/elsewhere"));
        assert!(cfg.dump);
    }

    #[test]
    fn rejects_empty_provider_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_minimal_fixture(dir.path());
        let mut raw: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        raw["providers"] = serde_json::json!([]);
        fs::write(&path, serde_json::to_vec(&raw).unwrap()).unwrap();
        let err = RunConfig::load(&path, &Overrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("at least one provider"));
    }

    #[test]
    fn rejects_duplicate_provider_names() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_minimal_fixture(dir.path());
        let mut raw: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        let provider = raw["providers"][0].clone();
        raw["providers"] = serde_json::json!([provider.clone(), provider]);
        fs::write(&path, serde_json::to_vec(&raw).unwrap()).unwrap();
        let err = RunConfig::load(&path, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("unique"));
    }

    #[test]
    fn rejects_bad_theta_and_votes() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_minimal_fixture(dir.path());
        let bad_theta = Overrides {
            theta: Some(1.5),
            ..Overrides::default()
        };
        assert!(RunConfig::load(&path, &bad_theta)
            .unwrap_err()
            .to_string()
            .contains("theta"));
        let bad_votes = Overrides {
            votes: Some(2), // only one provider configured
            ..Overrides::default()
        };
        assert!(RunConfig::load(&path, &bad_votes)
            .unwrap_err()
            .to_string()
            .contains("votes"));
    }

    #[test]
    fn rejects_missing_document() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_minimal_fixture(dir.path());
        fs::remove_file(dir.path().join("doc.txt")).unwrap();
        let err = RunConfig::load(&path, &Overrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("document not found"));
    }

    #[test]
    fn rejects_unknown_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_minimal_fixture(dir.path());
        let mut raw: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        raw["no_such_knob"] = serde_json::json!(true);
        fs::write(&path, serde_json::to_vec(&raw).unwrap()).unwrap();
        let err = RunConfig::load(&path, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("no_such_knob"));
    }
}
