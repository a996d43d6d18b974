//! Seeded generator of specification-shaped documents.
//!
//! Produces plain-text documents with numbered section trees, protocol-style
//! prose, cross-references, and (optionally) the kinds of noise lines real
//! documents carry — page numbers, release banners, dotted table-of-contents
//! leaders. Output is a pure function of the configuration, so benchmarks
//! and property tests are reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::preproc::RawDocument;

/// Knobs for the generator. All sizes are approximate targets, not exact
/// guarantees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthConfig {
    pub seed: u64,
    /// Top-level sections to emit.
    pub top_sections: usize,
    /// Maximum heading depth (1 = only top-level sections).
    pub max_depth: usize,
    /// Maximum subsections per section.
    pub max_children: usize,
    /// Inclusive range of paragraphs per section.
    pub paragraphs_per_section: (usize, usize),
    /// Inclusive range of sentences per paragraph.
    pub sentences_per_paragraph: (usize, usize),
    /// Sprinkle page numbers, banners, and a dotted table of contents.
    pub noise: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0xC0FFEE,
            top_sections: 8,
            max_depth: 3,
            max_children: 3,
            paragraphs_per_section: (1, 3),
            sentences_per_paragraph: (1, 4),
            noise: true,
        }
    }
}

const VOCAB: &[&str] = &[
    "the",
    "network",
    "shall",
    "consider",
    "procedure",
    "message",
    "request",
    "response",
    "timer",
    "value",
    "cause",
    "indication",
    "registration",
    "session",
    "context",
    "bearer",
    "identity",
    "security",
    "mode",
    "control",
    "parameter",
    "received",
    "pending",
    "valid",
    "applicable",
    "serving",
    "cell",
    "access",
    "stratum",
    "upper",
    "layers",
    "release",
    "establishment",
    "initiated",
    "accepted",
    "rejected",
    "aborted",
    "stored",
    "deleted",
];

const STATES: &[&str] = &[
    "PX-NULL",
    "PX-IDLE",
    "PX-SEARCHING",
    "PX-CONNECTED",
    "PX-CONNECTED.NORMAL-SERVICE",
    "PX-CONNECTED.LIMITED-SERVICE",
    "PX-SUSPENDED",
    "PX-DETACHED",
];

const MESSAGES: &[&str] = &[
    "ATTACH REQUEST",
    "ATTACH ACCEPT",
    "DETACH REQUEST",
    "SERVICE REJECT",
    "CONFIGURATION UPDATE",
];

const TIMERS: &[&str] = &["T3410", "T3411", "T3421", "T3440"];

const NOISE_LINES: &[&str] = &[
    "3GPP TS 24.501 V17.5.0 (2022-06)",
    "Release 17",
    "ETSI",
    "47",
    "Page 12 of 317",
];

struct Gen {
    rng: ChaCha8Rng,
    cfg: SynthConfig,
}

impl Gen {
    fn pick<'a>(&mut self, items: &[&'a str]) -> &'a str {
        items[self.rng.gen_range(0..items.len())]
    }

    fn word_run(&mut self, n: usize) -> String {
        (0..n)
            .map(|_| self.pick(VOCAB))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn title(&mut self) -> String {
        let n = self.rng.gen_range(2..=4);
        let raw = self.word_run(n);
        let mut chars = raw.chars();
        match chars.next() {
            Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
            None => raw,
        }
    }

    fn sentence(&mut self) -> String {
        match self.rng.gen_range(0..6) {
            0 => format!(
                "The UE shall enter state {} upon receipt of the {} message.",
                self.pick(STATES),
                self.pick(MESSAGES)
            ),
            1 => format!(
                "Upon expiry of timer {} the UE shall abort the procedure and enter state {}.",
                self.pick(TIMERS),
                self.pick(STATES)
            ),
            2 => format!(
                "The requirements of clause {}.{} apply accordingly.",
                self.rng.gen_range(3..9),
                self.rng.gen_range(1..6)
            ),
            3 => format!(
                "In state {} the UE shall start timer {} and proceed as specified.",
                self.pick(STATES),
                self.pick(TIMERS)
            ),
            _ => {
                let n = self.rng.gen_range(8..18);
                let mut s = self.word_run(n);
                s.push('.');
                // Sentences never start with a digit, so a wrapped body line
                // can never be mistaken for a section heading.
                format!("The {s}")
            }
        }
    }

    fn paragraph(&mut self) -> String {
        let (lo, hi) = self.cfg.sentences_per_paragraph;
        let n = self.rng.gen_range(lo..=hi.max(lo));
        (0..n)
            .map(|_| self.sentence())
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn maybe_noise(&mut self, out: &mut String) {
        if self.cfg.noise && self.rng.gen_bool(0.15) {
            out.push_str(self.pick(NOISE_LINES));
            out.push('\n');
        }
    }

    fn section(&mut self, number: &str, depth: usize, out: &mut String) {
        out.push_str(number);
        out.push('\t');
        out.push_str(&self.title());
        out.push('\n');
        let (lo, hi) = self.cfg.paragraphs_per_section;
        let paragraphs = self.rng.gen_range(lo..=hi.max(lo));
        for _ in 0..paragraphs {
            self.maybe_noise(out);
            out.push_str(&self.paragraph());
            out.push_str("\n\n");
        }
        if depth < self.cfg.max_depth {
            let children = self.rng.gen_range(0..=self.cfg.max_children);
            for child in 1..=children {
                self.section(&format!("{number}.{child}"), depth + 1, out);
            }
        }
    }

    fn table_of_contents(&mut self, out: &mut String) {
        out.push_str("Contents\n");
        for i in 1..=self.cfg.top_sections.min(6) {
            out.push_str(&format!(
                "{i} {} ........ {}\n",
                self.title(),
                self.rng.gen_range(5..300)
            ));
        }
        out.push('\n');
    }
}

/// Generates a document from the configuration. Deterministic: equal
/// configurations produce byte-identical documents.
#[must_use]
pub fn generate(cfg: &SynthConfig) -> RawDocument {
    let mut gen = Gen {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        cfg: cfg.clone(),
    };
    let mut text = String::new();
    text.push_str("Technical Specification\nProtocol description, stage 3\n\n");
    if cfg.noise {
        gen.table_of_contents(&mut text);
    }
    for i in 1..=cfg.top_sections {
        gen.section(&i.to_string(), 1, &mut text);
    }
    let doc_id = format!("synth-{:#x}", cfg.seed);
    RawDocument::new(&doc_id, &text, "PX", "R1").expect("generated documents are never empty")
}

/// Generates a document of roughly `approx_words` words (within about ten
/// percent) by appending top-level sections until the target is reached.
#[must_use]
pub fn generate_sized(seed: u64, approx_words: usize) -> RawDocument {
    let mut gen = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        cfg: SynthConfig {
            seed,
            top_sections: usize::MAX, // unused by the incremental loop
            ..SynthConfig::default()
        },
    };
    let mut text = String::new();
    text.push_str("Technical Specification\nProtocol description, stage 3\n\n");
    gen.table_of_contents(&mut text);
    let mut section = 0usize;
    while crate::text::word_count(&text) < approx_words {
        section += 1;
        gen.section(&section.to_string(), 1, &mut text);
    }
    let doc_id = format!("synth-{seed:#x}-{approx_words}w");
    RawDocument::new(&doc_id, &text, "PX", "R1").expect("generated documents are never empty")
}
