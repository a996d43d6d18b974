//! Document preprocessing: noise removal, section-number extraction,
//! section-tree construction, and window merging.
//!
//! The merge step implements section-level paragraph window merging: walking
//! the section tree, the content of every leaf section is merged into its
//! parent (each block prefixed by its section number and title, the parent's
//! own paragraphs first), and each merged parent becomes one extraction
//! window. Sections whose paragraphs are not consumed by any merge — for
//! example a section whose subsections all have further subsections — are
//! emitted as windows of their own, so that every body paragraph of the
//! cleaned document lands in exactly one window. A merged window that would
//! exceed the word budget falls back to per-section windows.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::word_count;

/// Default upper bound on merged window size, in whitespace-separated words.
pub const DEFAULT_MAX_WINDOW_WORDS: usize = 3000;

/// Synthetic top-level section number that annex headings nest under.
pub const ANNEX_PREFIX: &str = "ANNEX";

/// Line-matching patterns removed by [`clean_document`] when the run config
/// does not supply its own list: table-of-contents lines with dotted leaders,
/// running page headers and footers, bare page numbers, figure and table
/// captions, and standalone footnote markers.
pub const DEFAULT_CLEAN_PATTERNS: &[&str] = &[
    r"^.*\.{4,}\s*\d+\s*$",
    r"^\s*3GPP\s+TS\s+\d+\.\d+.*$",
    r"^\s*Release\s+\d+\s*$",
    r"^\s*ETSI\s*$",
    r"^\s*(?:Page\s+)?\d+\s*(?:of\s+\d+)?\s*$",
    r"^\s*(?:Figure|Table)\s+[A-Za-z0-9][A-Za-z0-9.\-]*\s*[:.].*$",
    r"^\s*[*†‡]+\s*$",
];

/// Errors from the preprocessing stage.
#[derive(Debug, Error)]
pub enum PreprocError {
    #[error("document text is empty")]
    EmptyDocument,
    #[error("document is empty after noise removal")]
    EmptyAfterClean,
    #[error("no section headings found in document")]
    NoSectionsFound,
    #[error("invalid cleaning pattern {pattern:?}: {source}")]
    BadPattern {
        pattern: String,
        #[source]
        source: Box<regex::Error>,
    },
}

/// A plain-text specification document plus the metadata used downstream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub doc_id: String,
    pub text: String,
    pub protocol: String,
    pub spec_version: String,
}

impl RawDocument {
    /// Builds a document, rejecting empty text.
    pub fn new(
        doc_id: &str,
        text: &str,
        protocol: &str,
        spec_version: &str,
    ) -> Result<Self, PreprocError> {
        if text.trim().is_empty() {
            return Err(PreprocError::EmptyDocument);
        }
        Ok(RawDocument {
            doc_id: doc_id.to_string(),
            text: text.to_string(),
            protocol: protocol.to_string(),
            spec_version: spec_version.to_string(),
        })
    }
}

/// Compiled line-matching rules for noise removal.
#[derive(Debug, Clone)]
pub struct CleanRules {
    patterns: Vec<Regex>,
}

impl CleanRules {
    /// Compiles a rule set from regex source strings. Each pattern is matched
    /// against whole lines; matching lines are dropped.
    pub fn from_patterns<I, S>(patterns: I) -> Result<Self, PreprocError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut compiled = Vec::new();
        for p in patterns {
            let p = p.as_ref();
            compiled.push(Regex::new(p).map_err(|e| PreprocError::BadPattern {
                pattern: p.to_string(),
                source: Box::new(e),
            })?);
        }
        Ok(CleanRules { patterns: compiled })
    }

    fn is_noise(&self, line: &str) -> bool {
        self.patterns.iter().any(|p| p.is_match(line))
    }
}

impl Default for CleanRules {
    fn default() -> Self {
        CleanRules::from_patterns(DEFAULT_CLEAN_PATTERNS.iter().copied())
            .expect("default cleaning patterns compile")
    }
}

/// Removes non-normative noise from a document: lines matching the cleaning
/// rules are dropped, line endings are normalized to `\n`, and every run of
/// three or more blank lines collapses to a single blank line. Body lines are
/// never altered, so a document without noise comes back byte-identical.
/// Idempotent: cleaning a cleaned document is the identity.
pub fn clean_document(doc: &RawDocument, rules: &CleanRules) -> Result<RawDocument, PreprocError> {
    let normalized = doc.text.replace("\r\n", "\n").replace('\r', "\n");
    let kept: Vec<&str> = normalized
        .split('\n')
        .filter(|line| !rules.is_noise(line))
        .collect();

    let mut lines: Vec<&str> = Vec::with_capacity(kept.len());
    let mut blank_run = 0usize;
    for line in kept {
        if line.trim().is_empty() {
            blank_run += 1;
        } else {
            let kept = if blank_run >= 3 { 1 } else { blank_run };
            lines.extend(std::iter::repeat_n("", kept));
            blank_run = 0;
            lines.push(line);
        }
    }
    // Trailing blank runs collapse by the same rule.
    let kept = if blank_run >= 3 { 1 } else { blank_run };
    lines.extend(std::iter::repeat_n("", kept));

    let text = lines.join("\n");
    if text.trim().is_empty() {
        return Err(PreprocError::EmptyAfterClean);
    }
    Ok(RawDocument {
        doc_id: doc.doc_id.clone(),
        text,
        protocol: doc.protocol.clone(),
        spec_version: doc.spec_version.clone(),
    })
}

/// A section heading found in a cleaned document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionHeading {
    /// Dotted section number, e.g. `5.5.1`. Annex headings get synthetic
    /// numbers under [`ANNEX_PREFIX`]: `Annex A` becomes `ANNEX.A`.
    pub number: String,
    pub title: String,
    /// Byte offset of the heading line within the cleaned text.
    pub offset: usize,
}

static NUMBERED_HEADING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(\d+(?:\.\d+)*)[ \t]+(\S.*)$").expect("heading pattern compiles")
});
static ANNEX_HEADING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^annex[ \t]+([A-Z])\b[ \t:.\-]*(.*)$").expect("annex pattern compiles")
});
static ANNEX_SUBSECTION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^([A-Z])((?:\.\d+)+)[ \t]+(\S.*)$").expect("annex subsection pattern compiles")
});

/// Scans a cleaned document for section headings, in document order.
///
/// The heading grammar: a line starting (without indentation) with a dotted
/// section number followed by whitespace and a non-empty title. Annex
/// headings (`Annex A …`) and annex subsections (`A.1 Title`) map to
/// synthetic numbers under [`ANNEX_PREFIX`]. Errors with
/// [`PreprocError::NoSectionsFound`] when the document has no headings.
pub fn extract_section_numbers(doc: &RawDocument) -> Result<Vec<SectionHeading>, PreprocError> {
    let mut headings = Vec::new();
    let mut offset = 0usize;
    for line in doc.text.split('\n') {
        if let Some(caps) = NUMBERED_HEADING.captures(line) {
            headings.push(SectionHeading {
                number: caps[1].to_string(),
                title: caps[2].trim().to_string(),
                offset,
            });
        } else if let Some(caps) = ANNEX_HEADING.captures(line) {
            let letter = caps[1].to_uppercase();
            let rest = caps[2].trim();
            headings.push(SectionHeading {
                number: format!("{ANNEX_PREFIX}.{letter}"),
                title: if rest.is_empty() {
                    format!("Annex {letter}")
                } else {
                    rest.to_string()
                },
                offset,
            });
        } else if let Some(caps) = ANNEX_SUBSECTION.captures(line) {
            headings.push(SectionHeading {
                number: format!("{ANNEX_PREFIX}.{}{}", &caps[1], &caps[2]),
                title: caps[3].trim().to_string(),
                offset,
            });
        }
        offset += line.len() + 1;
    }
    if headings.is_empty() {
        return Err(PreprocError::NoSectionsFound);
    }
    Ok(headings)
}

/// A node of the section tree. The root is synthetic (empty number, depth 0)
/// and holds any paragraphs that appear before the first heading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionNode {
    pub number: String,
    pub title: String,
    /// Number of dotted components in `number`; 0 for the root.
    pub depth: usize,
    /// True for structural nodes that do not correspond to a heading line:
    /// the root and the annex holder.
    pub synthetic: bool,
    /// True when the node's immediate parent by numbering was missing from
    /// the document and it was attached to a shallower ancestor instead.
    pub ancestor_gap: bool,
    /// Byte offset of the heading line in the cleaned text (0 for the root).
    pub offset: usize,
    pub paragraphs: Vec<String>,
    pub children: Vec<SectionNode>,
}

impl SectionNode {
    fn synthetic_root() -> Self {
        SectionNode {
            number: String::new(),
            title: String::new(),
            depth: 0,
            synthetic: true,
            ancestor_gap: false,
            offset: 0,
            paragraphs: Vec::new(),
            children: Vec::new(),
        }
    }

    fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

fn depth_of(number: &str) -> usize {
    if number.is_empty() {
        0
    } else {
        number.split('.').count()
    }
}

fn parent_number(number: &str) -> Option<String> {
    number.rsplit_once('.').map(|(head, _)| head.to_string())
}

/// Flat arena used while attaching headings to their parents; folded into an
/// owned tree afterwards.
struct Arena {
    nodes: Vec<SectionNode>,
    child_ids: Vec<Vec<usize>>,
    first_by_number: std::collections::BTreeMap<String, usize>,
}

impl Arena {
    fn new() -> Self {
        Arena {
            nodes: vec![SectionNode::synthetic_root()],
            child_ids: vec![Vec::new()],
            first_by_number: std::collections::BTreeMap::new(),
        }
    }

    fn push(&mut self, node: SectionNode, parent: usize) -> usize {
        let id = self.nodes.len();
        let number = node.number.clone();
        self.nodes.push(node);
        self.child_ids.push(Vec::new());
        self.child_ids[parent].push(id);
        self.first_by_number.entry(number).or_insert(id);
        id
    }

    /// Deepest existing ancestor of `number`, walking prefixes toward the
    /// root. Returns the node id and whether any prefix level was skipped.
    fn ancestor_of(&self, number: &str) -> (usize, bool) {
        let mut gap = false;
        let mut prefix = parent_number(number);
        while let Some(p) = prefix {
            if let Some(&id) = self.first_by_number.get(&p) {
                return (id, gap);
            }
            gap = true;
            prefix = parent_number(&p);
        }
        (0, gap && depth_of(number) > 1)
    }

    fn insert_heading(&mut self, heading: &SectionHeading) {
        if heading.number.starts_with(&format!("{ANNEX_PREFIX}."))
            && !self.first_by_number.contains_key(ANNEX_PREFIX)
        {
            let holder = SectionNode {
                number: ANNEX_PREFIX.to_string(),
                title: "Annexes".to_string(),
                depth: 1,
                synthetic: true,
                ancestor_gap: false,
                offset: heading.offset,
                paragraphs: Vec::new(),
                children: Vec::new(),
            };
            self.push(holder, 0);
        }
        let (parent, gap) = self.ancestor_of(&heading.number);
        let node = SectionNode {
            number: heading.number.clone(),
            title: heading.title.clone(),
            depth: depth_of(&heading.number),
            synthetic: false,
            ancestor_gap: gap,
            offset: heading.offset,
            paragraphs: Vec::new(),
            children: Vec::new(),
        };
        self.push(node, parent);
    }

    fn into_tree(mut self) -> SectionNode {
        fn assemble(arena: &mut Arena, id: usize) -> SectionNode {
            let child_ids = std::mem::take(&mut arena.child_ids[id]);
            let mut node = std::mem::replace(&mut arena.nodes[id], SectionNode::synthetic_root());
            node.children = child_ids.into_iter().map(|c| assemble(arena, c)).collect();
            node
        }
        assemble(&mut self, 0)
    }
}

/// Builds the section hierarchy from headings in document order. Every
/// child's number extends its parent's by one dotted component; when the
/// immediate parent is missing from the document, the child attaches to the
/// deepest present ancestor with [`SectionNode::ancestor_gap`] set. Returns
/// the synthetic root.
#[must_use]
pub fn build_section_tree(sections: &[SectionHeading]) -> SectionNode {
    let mut arena = Arena::new();
    for heading in sections {
        arena.insert_heading(heading);
    }
    arena.into_tree()
}

/// Builds the section tree and assigns every paragraph of the cleaned
/// document to the section whose heading most closely precedes it.
/// Paragraphs before the first heading go to the synthetic root. A paragraph
/// is a maximal run of non-blank lines.
pub fn map_paragraphs_to_sections(
    doc: &RawDocument,
    sections: &[SectionHeading],
) -> Result<SectionNode, PreprocError> {
    let mut arena = Arena::new();
    let mut heading_ids = Vec::with_capacity(sections.len());
    for heading in sections {
        arena.insert_heading(heading);
        heading_ids.push(arena.nodes.len() - 1);
    }

    let mut current = 0usize; // arena id receiving paragraphs
    let mut next_heading = 0usize;
    let mut paragraph: Vec<&str> = Vec::new();
    let mut offset = 0usize;

    let flush = |arena: &mut Arena, target: usize, paragraph: &mut Vec<&str>| {
        if !paragraph.is_empty() {
            arena.nodes[target].paragraphs.push(paragraph.join("\n"));
            paragraph.clear();
        }
    };

    for line in doc.text.split('\n') {
        let is_heading = next_heading < sections.len() && sections[next_heading].offset == offset;
        if is_heading {
            flush(&mut arena, current, &mut paragraph);
            current = heading_ids[next_heading];
            next_heading += 1;
        } else if line.trim().is_empty() {
            flush(&mut arena, current, &mut paragraph);
        } else {
            paragraph.push(line);
        }
        offset += line.len() + 1;
    }
    flush(&mut arena, current, &mut paragraph);

    Ok(arena.into_tree())
}

/// One prompt-sized extraction window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub window_id: u32,
    /// Dotted numbers of the sections whose content the window carries, in
    /// document order. Empty only for a window of pre-heading paragraphs.
    pub section_numbers: Vec<String>,
    pub text: String,
    pub word_count: usize,
}

/// A window under construction, keyed by the document offset of its first
/// content for final ordering.
struct PendingWindow {
    sort_offset: usize,
    section_numbers: Vec<String>,
    text: String,
}

/// Renders one section's contribution to a window: its heading line (for
/// real sections) followed by its paragraphs, blank-line separated.
fn section_block(node: &SectionNode) -> String {
    let mut parts = Vec::new();
    if !node.synthetic {
        parts.push(format!("{} {}", node.number, node.title));
    }
    parts.extend(node.paragraphs.iter().cloned());
    parts.join("\n\n")
}

fn block_has_content(node: &SectionNode) -> bool {
    !node.paragraphs.is_empty()
}

/// Merges the section tree into extraction windows.
///
/// For every section with at least one leaf (childless) subsection, the
/// parent's own paragraphs and all its leaf children's content merge into a
/// single window, each section prefixed by its number and title. Sections
/// not consumed by any merge keep their paragraphs as windows of their own.
/// A merged window whose word count exceeds `max_words` is replaced by
/// per-section windows (a single section larger than the budget still
/// becomes one window — sections are the splitting floor). Windows come out
/// in document order of their first content; sections without any paragraph
/// contribute no window.
#[must_use]
pub fn merge_windows(root: &SectionNode, max_words: usize) -> Vec<Window> {
    let mut pending = Vec::new();
    collect_windows(root, max_words, &mut pending);
    pending.sort_by_key(|w| w.sort_offset);
    pending
        .into_iter()
        .enumerate()
        .map(|(i, w)| Window {
            window_id: i as u32,
            section_numbers: w.section_numbers,
            word_count: word_count(&w.text),
            text: w.text,
        })
        .collect()
}

fn singleton_window(node: &SectionNode) -> PendingWindow {
    PendingWindow {
        sort_offset: node.offset,
        section_numbers: if node.synthetic {
            Vec::new()
        } else {
            vec![node.number.clone()]
        },
        text: section_block(node),
    }
}

fn collect_windows(node: &SectionNode, max_words: usize, out: &mut Vec<PendingWindow>) {
    let leaf_children: Vec<&SectionNode> = node.children.iter().filter(|c| c.is_leaf()).collect();

    if leaf_children.is_empty() {
        if block_has_content(node) {
            out.push(singleton_window(node));
        }
    } else {
        let mut blocks = Vec::new();
        let mut numbers = Vec::new();
        let mut first_offset = None;
        if !node.synthetic || block_has_content(node) {
            blocks.push(section_block(node));
            if !node.synthetic {
                numbers.push(node.number.clone());
            }
            first_offset = Some(node.offset);
        }
        for child in &leaf_children {
            blocks.push(section_block(child));
            numbers.push(child.number.clone());
            first_offset.get_or_insert(child.offset);
        }
        let text = blocks
            .iter()
            .filter(|b| !b.is_empty())
            .cloned()
            .collect::<Vec<_>>()
            .join("\n\n");
        let has_paragraphs =
            block_has_content(node) || leaf_children.iter().any(|c| block_has_content(c));

        if has_paragraphs {
            if word_count(&text) <= max_words {
                out.push(PendingWindow {
                    sort_offset: first_offset.unwrap_or(node.offset),
                    section_numbers: numbers,
                    text,
                });
            } else {
                if block_has_content(node) {
                    out.push(singleton_window(node));
                }
                for child in &leaf_children {
                    if block_has_content(child) {
                        out.push(singleton_window(child));
                    }
                }
            }
        }
    }

    for child in node.children.iter().filter(|c| !c.is_leaf()) {
        collect_windows(child, max_words, out);
    }
}
