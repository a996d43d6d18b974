//! Core library for extracting protocol finite state machines from plain-text
//! specification documents.
//!
//! The pipeline has four stages, each usable on its own:
//!
//! 1. [`preproc`] — clean a raw document, recover its section hierarchy, and
//!    merge sibling sections into prompt-sized windows.
//! 2. [`prompting`] + [`providers`] + [`extract`] — build two-phase prompts
//!    (state catalog first, then transitions), send them to one or more
//!    OpenAI-compatible chat endpoints (or a deterministic replay provider),
//!    and parse the responses into candidate states and transitions.
//! 3. [`ensemble`] — align candidates across providers by fuzzy span overlap
//!    and keep only majority-voted transitions.
//! 4. [`evalkit`] — score an extracted machine against a hand-written ground
//!    truth with precision / recall / F1, per layer if the truth is tagged.
//!
//! Shared vocabulary types ([`StateName`], [`Transition`], [`Fsm`],
//! [`Window`], [`CandidateSet`], …) are defined in the module that produces
//! them and re-exported here so downstream crates can use one import path.

pub mod ensemble;
pub mod evalkit;
pub mod extract;
pub mod fsm;
pub mod preproc;
pub mod prompting;
pub mod providers;
pub mod synth;
pub mod text;

pub use ensemble::{
    cluster_candidates, majority_vote, span_overlap, tally_states, transitions_aligned,
    AlignmentParams, ClusterMember, StateVoteTally, TransitionCluster, TransitionLike, VoteParams,
    DEFAULT_THETA,
};
pub use evalkit::{
    harmonic_f1, match_transitions, render_eval_table, score, state_score, EvalError, EvalReport,
    GroundTruth, LayerScore, MatchPartition, TruthState, TruthTransition, UNLAYERED,
};
pub use extract::{
    build_catalog, parse_model_output, postprocess, CandidateSet, CandidateState,
    CandidateTransition, CatalogBuild, ExtractError, Extractor, ParseFailure, ParseOutcome,
    ParsedCandidates, Phase, PhaseReport, ProviderOutput,
};
pub use fsm::{
    Fsm, FsmError, Provenance, PseudoStateFilter, QualifiedState, StateFlags, StateName, Transition,
};
pub use preproc::{
    clean_document, extract_section_numbers, map_paragraphs_to_sections, merge_windows, CleanRules,
    PreprocError, RawDocument, SectionHeading, SectionNode, Window, DEFAULT_MAX_WINDOW_WORDS,
};
pub use prompting::{
    resolve_cross_references, update_context, ContextDigest, PromptBundle, PromptError, Prompter,
    ProtocolProfile, ProtocolStyle, RefLimits, ResolvedRef, SectionIndex, TemplateSet,
};
pub use providers::{
    cost_report, prompt_sha256, render_cost_table, CostRow, ExchangeLog, HttpProvider, LlmExchange,
    Provider, ProviderConfig, ProviderError, ReplayFixture, ReplayProvider,
};
