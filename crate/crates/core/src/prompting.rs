//! Prompt construction for the two extraction phases.
//!
//! Prompts are rendered from plain-text template files kept in a directory
//! under version control, so wording changes show up in diffs and
//! deliberately invalidate replay fixtures (which are keyed by prompt hash).
//! Templates use `{{NAME}}` placeholders; the ones a template can draw on are
//! `{{PROTOCOL}}`, `{{STYLE_GUIDANCE}}`, `{{KNOWN_PREFIXES}}`,
//! `{{SECTION_NUMBERS}}`, `{{CONTEXT}}`, `{{REFERENCES}}`, `{{CATALOG}}`
//! (transition phase only), and `{{WINDOW_TEXT}}`.
//!
//! Construction is pure: the same window, profile, catalog, and context
//! digest always produce byte-identical prompts.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::StateName;
use crate::preproc::{SectionNode, Window, ANNEX_PREFIX};
use crate::text::{truncate_words, word_count};

/// Which of the two extraction phases a prompt (or a response parse) belongs
/// to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    StateExtraction,
    TransitionExtraction,
}

/// How a protocol's specification prose is organized, which selects the
/// wording variant of the state-phase prompt.
///
/// State-oriented documents (e.g. mobility management) enumerate named states
/// explicitly; procedure-oriented documents (e.g. tunneling control planes)
/// describe message flows and leave states implicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolStyle {
    StateOriented,
    ProcedureOriented,
}

/// Domain knowledge about the protocol under extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolProfile {
    /// Protocol name as it should appear in prompts and the output machine.
    pub name: String,
    pub style: ProtocolStyle,
    /// State-name prefixes the protocol uses (e.g. `5GMM-`), quoted in the
    /// state prompt so models emit standardized names.
    #[serde(default)]
    pub known_prefixes: Vec<String>,
    /// Sub-procedure tags usable as evaluation layers.
    #[serde(default)]
    pub layer_tags: Vec<String>,
}

/// Errors from template loading and prompt construction.
#[derive(Debug, Error)]
pub enum PromptError {
    #[error("cannot read template {path}: {source}")]
    Template {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("transition prompt requires a non-empty state catalog")]
    EmptyCatalog,
}

/// The template files a prompt run needs, all loaded up front.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub state_system: String,
    pub state_user: String,
    pub transition_system: String,
    pub transition_user: String,
    pub style_state_oriented: String,
    pub style_procedure_oriented: String,
}

/// File names looked up inside a templates directory.
pub const TEMPLATE_FILES: &[&str] = &[
    "state_system.txt",
    "state_user.txt",
    "transition_system.txt",
    "transition_user.txt",
    "style_state_oriented.txt",
    "style_procedure_oriented.txt",
];

impl TemplateSet {
    /// Loads all template files from a directory.
    pub fn load(dir: &Path) -> Result<Self, PromptError> {
        let read = |name: &str| -> Result<String, PromptError> {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| PromptError::Template { path, source })
        };
        Ok(TemplateSet {
            state_system: read("state_system.txt")?,
            state_user: read("state_user.txt")?,
            transition_system: read("transition_system.txt")?,
            transition_user: read("transition_user.txt")?,
            style_state_oriented: read("style_state_oriented.txt")?,
            style_procedure_oriented: read("style_procedure_oriented.txt")?,
        })
    }

    fn style_guidance(&self, style: ProtocolStyle) -> &str {
        match style {
            ProtocolStyle::StateOriented => &self.style_state_oriented,
            ProtocolStyle::ProcedureOriented => &self.style_procedure_oriented,
        }
    }
}

/// Replaces every `{{KEY}}` placeholder present in `vars`. Unknown
/// placeholders are left in place so a template typo is visible in output
/// rather than silently swallowed.
fn render(template: &str, vars: &BTreeMap<&str, String>) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    out
}

/// Rolling summary of what earlier windows established, carried into later
/// prompts so the model stays consistent across windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextDigest {
    /// States seen so far, first-seen order, deduplicated.
    prior_states: Vec<StateName>,
    /// Endpoints of the most recent accepted transitions (bounded tail).
    prior_tail: VecDeque<(StateName, StateName)>,
    /// Rendered summary, kept within the word budget.
    prior_summary: String,
    budget_words: usize,
    tail_len: usize,
}

/// Default word budget for the rendered context digest.
pub const DEFAULT_CONTEXT_BUDGET_WORDS: usize = 400;
/// Default number of recent transitions retained in the digest tail.
pub const DEFAULT_CONTEXT_TAIL: usize = 10;

impl ContextDigest {
    #[must_use]
    pub fn new(budget_words: usize, tail_len: usize) -> Self {
        ContextDigest {
            prior_states: Vec::new(),
            prior_tail: VecDeque::new(),
            prior_summary: String::new(),
            budget_words,
            tail_len,
        }
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.prior_states.is_empty() && self.prior_tail.is_empty()
    }

    /// The bounded text that goes into the `{{CONTEXT}}` slot. Empty for a
    /// fresh digest.
    #[must_use]
    pub fn render(&self) -> &str {
        &self.prior_summary
    }

    fn rebuild_summary(&mut self) {
        loop {
            let mut parts = Vec::new();
            if !self.prior_states.is_empty() {
                let names: Vec<&str> = self.prior_states.iter().map(StateName::as_str).collect();
                parts.push(format!("Known states so far: {}.", names.join("; ")));
            }
            if !self.prior_tail.is_empty() {
                let pairs: Vec<String> = self
                    .prior_tail
                    .iter()
                    .map(|(from, to)| format!("{from} -> {to}"))
                    .collect();
                parts.push(format!("Recent transitions: {}.", pairs.join("; ")));
            }
            let summary = parts.join("\n");
            if word_count(&summary) <= self.budget_words {
                self.prior_summary = summary;
                return;
            }
            // Over budget: evict the oldest state first; once states are
            // gone, evict the oldest tail entry.
            if !self.prior_states.is_empty() {
                self.prior_states.remove(0);
            } else if self.prior_tail.pop_front().is_none() {
                self.prior_summary = summary;
                return;
            }
        }
    }
}

impl Default for ContextDigest {
    fn default() -> Self {
        ContextDigest::new(DEFAULT_CONTEXT_BUDGET_WORDS, DEFAULT_CONTEXT_TAIL)
    }
}

/// Folds newly accepted states and transition endpoints into the digest,
/// keeping first-seen state order, the last-K transition tail, and the word
/// budget (evicting oldest entries first).
#[must_use]
pub fn update_context(
    mut ctx: ContextDigest,
    accepted_states: &[StateName],
    accepted_transitions: &[(StateName, StateName)],
) -> ContextDigest {
    for state in accepted_states {
        if !ctx.prior_states.contains(state) {
            ctx.prior_states.push(state.clone());
        }
    }
    for pair in accepted_transitions {
        ctx.prior_tail.push_back(pair.clone());
        while ctx.prior_tail.len() > ctx.tail_len {
            ctx.prior_tail.pop_front();
        }
    }
    ctx.rebuild_summary();
    ctx
}

/// Lookup from section number to section text (own paragraphs plus all
/// descendants, document order), used to expand cross-references.
#[derive(Debug, Clone, Default)]
pub struct SectionIndex {
    by_number: BTreeMap<String, String>,
}

impl SectionIndex {
    /// Builds the index from a populated section tree.
    #[must_use]
    pub fn from_tree(root: &SectionNode) -> Self {
        fn subtree_paragraphs(node: &SectionNode, out: &mut Vec<String>) {
            out.extend(node.paragraphs.iter().cloned());
            for child in &node.children {
                subtree_paragraphs(child, out);
            }
        }
        fn walk(node: &SectionNode, index: &mut BTreeMap<String, String>) {
            if !node.number.is_empty() {
                let mut paragraphs = Vec::new();
                subtree_paragraphs(node, &mut paragraphs);
                index
                    .entry(node.number.clone())
                    .or_insert_with(|| paragraphs.join("\n\n"));
            }
            for child in &node.children {
                walk(child, index);
            }
        }
        let mut by_number = BTreeMap::new();
        walk(root, &mut by_number);
        SectionIndex { by_number }
    }

    #[must_use]
    pub fn get(&self, number: &str) -> Option<&str> {
        self.by_number.get(number).map(String::as_str)
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.by_number.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.by_number.is_empty()
    }
}

/// Budgets for cross-reference expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefLimits {
    /// Maximum references expanded per window, nearest (earliest mention)
    /// first.
    pub max_refs: usize,
    /// Word cap per expanded excerpt.
    pub excerpt_words: usize,
}

impl Default for RefLimits {
    fn default() -> Self {
        RefLimits {
            max_refs: 3,
            excerpt_words: 200,
        }
    }
}

/// A cross-reference found in a window, with the referenced section's
/// excerpt. `excerpt` is empty when the referenced number is not in the
/// index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedRef {
    pub number: String,
    pub excerpt: String,
}

static CROSS_REF: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:(?:sub)?clause|section)\s+(\d+(?:\.\d+)*)|\bannex\s+([A-Z])\b")
        .expect("cross-reference pattern compiles")
});

/// Finds `subclause X.Y` / `clause X.Y` / `section X.Y` / `annex X` mentions
/// in a window and expands them from the section index.
///
/// Mentions of sections already inside the window are skipped; the rest are
/// deduplicated in order of first appearance and capped at
/// `limits.max_refs`. Excerpts are capped at `limits.excerpt_words` words.
/// Numbers missing from the index come back with an empty excerpt and a
/// warning in the log.
#[must_use]
pub fn resolve_cross_references(
    window: &Window,
    index: &SectionIndex,
    limits: &RefLimits,
) -> Vec<ResolvedRef> {
    let own: BTreeSet<&str> = window.section_numbers.iter().map(String::as_str).collect();
    let mut seen = BTreeSet::new();
    let mut refs = Vec::new();
    for caps in CROSS_REF.captures_iter(&window.text) {
        if refs.len() >= limits.max_refs {
            break;
        }
        let number = match (caps.get(1), caps.get(2)) {
            (Some(n), _) => n.as_str().to_string(),
            (None, Some(letter)) => format!("{ANNEX_PREFIX}.{}", letter.as_str().to_uppercase()),
            (None, None) => continue,
        };
        if own.contains(number.as_str()) || !seen.insert(number.clone()) {
            continue;
        }
        let excerpt = match index.get(&number) {
            Some(text) => truncate_words(text, limits.excerpt_words),
            None => {
                log::warn!(
                    "window {}: cross-reference to {number} not found in section index",
                    window.window_id
                );
                String::new()
            }
        };
        refs.push(ResolvedRef { number, excerpt });
    }
    refs
}

/// A fully rendered prompt ready to send to a provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub phase: Phase,
    pub window_id: u32,
    pub system_text: String,
    pub user_text: String,
    /// The rendered context digest that went into the `{{CONTEXT}}` slot.
    pub context_digest: String,
    pub resolved_refs: Vec<ResolvedRef>,
}

/// Builds prompts for both phases from one set of templates, one protocol
/// profile, and one section index.
#[derive(Debug, Clone)]
pub struct Prompter<'a> {
    templates: &'a TemplateSet,
    profile: &'a ProtocolProfile,
    index: &'a SectionIndex,
    limits: RefLimits,
}

impl<'a> Prompter<'a> {
    #[must_use]
    pub fn new(
        templates: &'a TemplateSet,
        profile: &'a ProtocolProfile,
        index: &'a SectionIndex,
        limits: RefLimits,
    ) -> Self {
        Prompter {
            templates,
            profile,
            index,
            limits,
        }
    }

    fn common_vars(&self, window: &Window, ctx: &ContextDigest) -> BTreeMap<&'static str, String> {
        let mut vars = BTreeMap::new();
        vars.insert("PROTOCOL", self.profile.name.clone());
        vars.insert(
            "STYLE_GUIDANCE",
            self.templates
                .style_guidance(self.profile.style)
                .trim_end()
                .to_string(),
        );
        vars.insert(
            "KNOWN_PREFIXES",
            if self.profile.known_prefixes.is_empty() {
                "(none)".to_string()
            } else {
                self.profile.known_prefixes.join(", ")
            },
        );
        vars.insert("SECTION_NUMBERS", window.section_numbers.join(", "));
        vars.insert("CONTEXT", ctx.render().to_string());
        vars.insert("WINDOW_TEXT", window.text.clone());
        vars
    }

    fn render_refs(refs: &[ResolvedRef]) -> String {
        refs.iter()
            .map(|r| {
                if r.excerpt.is_empty() {
                    format!("[{}] (referenced section not available)", r.number)
                } else {
                    format!("[{}] {}", r.number, r.excerpt)
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Builds the state-phase prompt for one window: style-variant wording,
    /// standardized-name instructions with the profile's known prefixes, the
    /// context digest, expanded cross-references, and the window text.
    #[must_use]
    pub fn build_state_prompt(&self, window: &Window, ctx: &ContextDigest) -> PromptBundle {
        let refs = resolve_cross_references(window, self.index, &self.limits);
        let mut vars = self.common_vars(window, ctx);
        vars.insert("REFERENCES", Self::render_refs(&refs));
        PromptBundle {
            phase: Phase::StateExtraction,
            window_id: window.window_id,
            system_text: render(&self.templates.state_system, &vars),
            user_text: render(&self.templates.state_user, &vars),
            context_digest: ctx.render().to_string(),
            resolved_refs: refs,
        }
    }

    /// Builds the transition-phase prompt for one window. The full state
    /// catalog is embedded so the model picks endpoints from it; errors if
    /// the catalog is empty.
    pub fn build_transition_prompt(
        &self,
        window: &Window,
        catalog: &BTreeSet<StateName>,
        ctx: &ContextDigest,
    ) -> Result<PromptBundle, PromptError> {
        if catalog.is_empty() {
            return Err(PromptError::EmptyCatalog);
        }
        let refs = resolve_cross_references(window, self.index, &self.limits);
        let mut vars = self.common_vars(window, ctx);
        vars.insert("REFERENCES", Self::render_refs(&refs));
        vars.insert(
            "CATALOG",
            catalog
                .iter()
                .map(|name| format!("- {name}"))
                .collect::<Vec<_>>()
                .join("\n"),
        );
        Ok(PromptBundle {
            phase: Phase::TransitionExtraction,
            window_id: window.window_id,
            system_text: render(&self.templates.transition_system, &vars),
            user_text: render(&self.templates.transition_user, &vars),
            context_digest: ctx.render().to_string(),
            resolved_refs: refs,
        })
    }
}
