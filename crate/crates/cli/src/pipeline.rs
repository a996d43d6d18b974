//! Shared stage plumbing: artifact paths, document segmentation, filter and
//! prompter construction, and the provider-ensemble extraction driver. Both
//! the CLI commands and the fixture generator go through these helpers so a
//! generated fixture replays through exactly the code that produced it.

use std::path::{Path, PathBuf};

use specfsm_core::extract::{ExtractError, Extractor, ProviderOutput};
use specfsm_core::preproc::{
    clean_document, extract_section_numbers, map_paragraphs_to_sections, merge_windows, CleanRules,
    RawDocument, SectionNode, Window,
};
use specfsm_core::prompting::{Prompter, RefLimits, SectionIndex, TemplateSet};
use specfsm_core::providers::{ExchangeLog, HttpProvider, Provider, ReplayProvider};
use specfsm_core::PseudoStateFilter;

use crate::config::RunConfig;
use crate::error::CliError;

/// Fixed artifact names inside the output directory.
pub struct Artifacts {
    out_dir: PathBuf,
}

impl Artifacts {
    #[must_use]
    pub fn new(out_dir: &Path) -> Self {
        Artifacts {
            out_dir: out_dir.to_path_buf(),
        }
    }

    pub fn ensure_dir(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| {
            CliError::Pipeline(format!(
                "cannot create output directory {}: {e}",
                self.out_dir.display()
            ))
        })
    }

    #[must_use]
    pub fn windows(&self) -> PathBuf {
        self.out_dir.join("windows.json")
    }

    #[must_use]
    pub fn windows_text(&self) -> PathBuf {
        self.out_dir.join("windows.txt")
    }

    #[must_use]
    pub fn candidates(&self, provider: &str) -> PathBuf {
        self.out_dir.join(format!("candidates_{provider}.json"))
    }

    #[must_use]
    pub fn exchanges(&self) -> PathBuf {
        self.out_dir.join("exchanges.jsonl")
    }

    #[must_use]
    pub fn fsm(&self) -> PathBuf {
        self.out_dir.join("fsm.json")
    }

    #[must_use]
    pub fn fsm_dot(&self) -> PathBuf {
        self.out_dir.join("fsm.dot")
    }

    #[must_use]
    pub fn clusters(&self) -> PathBuf {
        self.out_dir.join("clusters.json")
    }

    #[must_use]
    pub fn eval(&self) -> PathBuf {
        self.out_dir.join("eval.json")
    }

    #[must_use]
    pub fn cost(&self) -> PathBuf {
        self.out_dir.join("cost.txt")
    }
}

/// The built-in pseudo-state names plus the config's extra denylist entries.
#[must_use]
pub fn build_filter(cfg: &RunConfig) -> PseudoStateFilter {
    let defaults = PseudoStateFilter::default();
    let entries: Vec<String> = defaults
        .entries()
        .map(str::to_string)
        .chain(cfg.denylist.iter().cloned())
        .collect();
    PseudoStateFilter::new(entries)
}

/// Output of the segmentation stage.
#[derive(Debug)]
pub struct Segmented {
    pub document: RawDocument,
    pub tree: SectionNode,
    pub windows: Vec<Window>,
}

/// Reads, cleans, and windows the configured document.
pub fn segment_document(cfg: &RunConfig) -> Result<Segmented, CliError> {
    let text = std::fs::read_to_string(&cfg.document).map_err(|e| {
        CliError::Pipeline(format!(
            "cannot read document {}: {e}",
            cfg.document.display()
        ))
    })?;
    let doc_id = cfg
        .document
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "document".to_string());
    let raw = RawDocument::new(&doc_id, &text, &cfg.profile.name, &cfg.spec_version)
        .map_err(|e| CliError::Pipeline(format!("document rejected: {e}")))?;
    let cleaned = clean_document(&raw, &CleanRules::default())
        .map_err(|e| CliError::Pipeline(format!("cleaning failed: {e}")))?;
    let headings = extract_section_numbers(&cleaned)
        .map_err(|e| CliError::Pipeline(format!("heading scan failed: {e}")))?;
    let tree = map_paragraphs_to_sections(&cleaned, &headings)
        .map_err(|e| CliError::Pipeline(format!("section mapping failed: {e}")))?;
    let windows = merge_windows(&tree, cfg.max_words);
    Ok(Segmented {
        document: cleaned,
        tree,
        windows,
    })
}

pub fn load_templates(cfg: &RunConfig) -> Result<TemplateSet, CliError> {
    TemplateSet::load(&cfg.templates)
        .map_err(|e| CliError::Config(format!("cannot load templates: {e}")))
}

/// Ready-to-call providers, each paired with its window concurrency limit.
pub type ProviderStack = Vec<(Box<dyn Provider>, usize)>;

/// The provider stack for one run: replay providers when a fixture directory
/// is given (one subdirectory per provider name), live HTTP providers
/// otherwise.
pub fn build_providers(cfg: &RunConfig, replay: Option<&Path>) -> Result<ProviderStack, CliError> {
    let mut providers: ProviderStack = Vec::new();
    for pc in &cfg.providers {
        let concurrency = pc.max_concurrency;
        let provider: Box<dyn Provider> = match replay {
            Some(dir) => Box::new(ReplayProvider::new(&pc.name, dir.join(&pc.name))),
            None => Box::new(
                HttpProvider::new(pc.clone())
                    .map_err(|e| CliError::Pipeline(format!("provider setup failed: {e}")))?,
            ),
        };
        providers.push((provider, concurrency));
    }
    Ok(providers)
}

/// Runs two-phase extraction for every provider. The exchange log is written
/// by the caller (even after a failed run it holds the recorded traffic).
pub fn run_extraction(
    cfg: &RunConfig,
    segmented: &Segmented,
    providers: &[(Box<dyn Provider>, usize)],
    log: &ExchangeLog,
) -> Result<Vec<ProviderOutput>, ExtractError> {
    let templates = load_templates(cfg).map_err(|e| {
        // Template problems surface before any provider call; report them
        // through the prompt-error channel.
        ExtractError::Prompt(specfsm_core::prompting::PromptError::Template {
            path: cfg.templates.clone(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()),
        })
    })?;
    let filter = build_filter(cfg);
    let index = SectionIndex::from_tree(&segmented.tree);
    let prompter = Prompter::new(&templates, &cfg.profile, &index, RefLimits::default());
    let extractor = Extractor::new(prompter, &filter, log)
        .with_context(cfg.context_budget_words, cfg.context_tail);
    let refs: Vec<(&dyn Provider, usize)> =
        providers.iter().map(|(p, c)| (p.as_ref(), *c)).collect();
    extractor.run_all(&refs, &segmented.windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Overrides;
    use std::fs;

    #[test]
    fn filter_includes_config_denylist() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("doc.txt"), "1 Scope\n\nBody text.\n").unwrap();
        fs::create_dir(dir.path().join("tpl")).unwrap();
        let config = serde_json::json!({
            "document": "doc.txt",
            "templates": "tpl",
            "profile": {"name": "NAS", "style": "state_oriented"},
            "providers": [{"name": "a", "base_url": "http://localhost:1", "model": "m"}],
            "denylist": ["PENDING STATE"],
        });
        let path = dir.path().join("config.json");
        fs::write(&path, serde_json::to_vec(&config).unwrap()).unwrap();
        let cfg = RunConfig::load(&path, &Overrides::default()).unwrap();
        let filter = build_filter(&cfg);
        assert!(filter.is_denied("pending state"));
        assert!(filter.is_denied("UNKNOWN"), "built-ins are kept");
        assert!(!filter.is_denied("EMM-REGISTERED"));
    }

    #[test]
    fn segmentation_reports_missing_headings_as_pipeline_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("doc.txt"), "prose without any headings\n").unwrap();
        fs::create_dir(dir.path().join("tpl")).unwrap();
        let config = serde_json::json!({
            "document": "doc.txt",
            "templates": "tpl",
            "profile": {"name": "NAS", "style": "state_oriented"},
            "providers": [{"name": "a", "base_url": "http://localhost:1", "model": "m"}],
        });
        let path = dir.path().join("config.json");
        fs::write(&path, serde_json::to_vec(&config).unwrap()).unwrap();
        let cfg = RunConfig::load(&path, &Overrides::default()).unwrap();
        let err = segment_document(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
