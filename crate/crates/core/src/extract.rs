//! Turning model responses into vetted candidate states and transitions.
//!
//! Each provider runs the same two-phase protocol independently:
//!
//! 1. **State phase** — every window is prompted for state names (windows
//!    may run concurrently per provider; prompts carry no rolling context,
//!    so order cannot matter). The survivors form that provider's state
//!    catalog.
//! 2. **Transition phase** — windows are prompted strictly in document
//!    order, each prompt embedding the full catalog plus a rolling digest of
//!    recently extracted transitions.
//!
//! Responses are treated as untrusted: parsing tolerates prose around the
//! JSON, malformed elements are dropped with a recorded reason, and a
//! response with no usable JSON at all becomes a parse-failure record rather
//! than an error. Only authentication failures and broken replay fixtures
//! abort a run — everything else is data.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::fsm::{canonical_state_text, qualify_state, FsmError, PseudoStateFilter, StateName};
use crate::preproc::Window;
pub use crate::prompting::Phase;
use crate::prompting::{update_context, ContextDigest, PromptError, Prompter};
use crate::providers::{prompt_sha256, ExchangeLog, LlmExchange, Provider, ProviderError};
use crate::text::normalize_ws;

/// Errors that abort an extraction run.
#[derive(Debug, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    /// A provider failed in a way retrying or skipping cannot fix:
    /// authentication is broken, or replay fixtures are missing/corrupt.
    #[error(transparent)]
    Provider(ProviderError),
    #[error("document produced no windows to extract from")]
    NoWindows,
}

/// A state name proposed by a model for one window, before vetting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateState {
    pub name: String,
    #[serde(default)]
    pub initial: bool,
    #[serde(default, rename = "final")]
    pub is_final: bool,
    /// Verbatim supporting quote from the window; cleared when it cannot be
    /// found in the window text.
    #[serde(default)]
    pub evidence: String,
    #[serde(default)]
    pub window_id: u32,
}

/// A transition proposed by a model for one window, before vetting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateTransition {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub condition: String,
    #[serde(default)]
    pub action: String,
    /// Marked by the model when the transition is implied rather than
    /// stated. Inferred candidates must name catalog states on both ends and
    /// quote a verbatim supporting span, or they are dropped.
    #[serde(default)]
    pub inferred: bool,
    #[serde(default)]
    pub span: String,
    #[serde(default)]
    pub window_id: u32,
}

/// What one provider proposed across all windows, after vetting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub provider: String,
    pub states: Vec<CandidateState>,
    pub transitions: Vec<CandidateTransition>,
    pub parse_failures: Vec<ParseFailure>,
}

impl CandidateSet {
    #[must_use]
    pub fn new(provider: impl Into<String>) -> Self {
        CandidateSet {
            provider: provider.into(),
            states: Vec::new(),
            transitions: Vec::new(),
            parse_failures: Vec::new(),
        }
    }
}

/// A response that yielded no usable JSON. Kept as data so ensemble voting
/// can proceed with the providers that did answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub provider: String,
    pub window_id: u32,
    pub phase: Phase,
    pub detail: String,
}

/// Result of parsing one model response.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub parsed: ParsedCandidates,
    /// Reasons for individually skipped elements.
    pub dropped: Vec<String>,
    /// Set when the response held no JSON array at all.
    pub failure: Option<String>,
}

/// Payload of a successfully located JSON array, by phase.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedCandidates {
    States(Vec<CandidateState>),
    Transitions(Vec<CandidateTransition>),
}

impl ParsedCandidates {
    fn empty(phase: Phase) -> Self {
        match phase {
            Phase::StateExtraction => ParsedCandidates::States(Vec::new()),
            Phase::TransitionExtraction => ParsedCandidates::Transitions(Vec::new()),
        }
    }

    #[must_use]
    pub fn len(&self) -> usize {
        match self {
            ParsedCandidates::States(v) => v.len(),
            ParsedCandidates::Transitions(v) => v.len(),
        }
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn string_field(obj: &serde_json::Map<String, Value>, key: &str) -> Option<String> {
    match obj.get(key) {
        Some(Value::String(s)) => Some(s.clone()),
        _ => None,
    }
}

fn bool_field(obj: &serde_json::Map<String, Value>, key: &str) -> bool {
    matches!(obj.get(key), Some(Value::Bool(true)))
}

fn state_from_value(idx: usize, value: &Value) -> Result<CandidateState, String> {
    let obj = value
        .as_object()
        .ok_or_else(|| format!("element {idx}: not an object"))?;
    let name = string_field(obj, "name")
        .ok_or_else(|| format!("element {idx}: missing string field \"name\""))?;
    if name.trim().is_empty() {
        return Err(format!("element {idx}: empty state name"));
    }
    Ok(CandidateState {
        name,
        initial: bool_field(obj, "initial"),
        is_final: bool_field(obj, "final"),
        evidence: string_field(obj, "evidence").unwrap_or_default(),
        window_id: 0,
    })
}

fn transition_from_value(idx: usize, value: &Value) -> Result<CandidateTransition, String> {
    let obj = value
        .as_object()
        .ok_or_else(|| format!("element {idx}: not an object"))?;
    let from = string_field(obj, "from")
        .ok_or_else(|| format!("element {idx}: missing string field \"from\""))?;
    let to = string_field(obj, "to")
        .ok_or_else(|| format!("element {idx}: missing string field \"to\""))?;
    if from.trim().is_empty() || to.trim().is_empty() {
        return Err(format!("element {idx}: empty endpoint"));
    }
    let condition = string_field(obj, "condition").unwrap_or_default();
    let action = string_field(obj, "action").unwrap_or_default();
    if condition.trim().is_empty() && action.trim().is_empty() {
        return Err(format!(
            "element {idx}: needs a condition or an action, has neither"
        ));
    }
    Ok(CandidateTransition {
        from,
        to,
        condition,
        action,
        inferred: bool_field(obj, "inferred"),
        span: string_field(obj, "span").unwrap_or_default(),
        window_id: 0,
    })
}

/// Finds the first JSON array in a model response and validates its
/// elements against the phase's schema.
///
/// The scan is tolerant: prose before or after the array, Markdown fences,
/// and object wrappers around the array are all fine — the first position
/// where a JSON array parses wins. Elements that do not fit the schema are
/// skipped with a reason; a response with no array at all yields a
/// `failure`, never an error.
#[must_use]
pub fn parse_model_output(response_text: &str, phase: Phase) -> ParseOutcome {
    let mut array = None;
    for (pos, _) in response_text.match_indices('[') {
        let mut stream =
            serde_json::Deserializer::from_str(&response_text[pos..]).into_iter::<Value>();
        if let Some(Ok(Value::Array(items))) = stream.next() {
            array = Some(items);
            break;
        }
    }
    let Some(items) = array else {
        return ParseOutcome {
            parsed: ParsedCandidates::empty(phase),
            dropped: Vec::new(),
            failure: Some("no JSON array found in response".to_string()),
        };
    };
    let mut dropped = Vec::new();
    let parsed = match phase {
        Phase::StateExtraction => {
            let mut states = Vec::new();
            for (idx, item) in items.iter().enumerate() {
                match state_from_value(idx, item) {
                    Ok(state) => states.push(state),
                    Err(reason) => dropped.push(reason),
                }
            }
            ParsedCandidates::States(states)
        }
        Phase::TransitionExtraction => {
            let mut transitions = Vec::new();
            for (idx, item) in items.iter().enumerate() {
                match transition_from_value(idx, item) {
                    Ok(t) => transitions.push(t),
                    Err(reason) => dropped.push(reason),
                }
            }
            ParsedCandidates::Transitions(transitions)
        }
    };
    ParseOutcome {
        parsed,
        dropped,
        failure: None,
    }
}

/// How a provider's state catalog was assembled from its raw candidates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogBuild {
    pub catalog: BTreeSet<StateName>,
    /// Bare names merged into the unique dotted entry they are a suffix of:
    /// `(suffix, expanded)`.
    pub merged: Vec<(String, String)>,
    /// Bare names that matched several dotted entries and were kept
    /// standalone: `(suffix, matches)`.
    pub ambiguous: Vec<(String, Vec<String>)>,
    /// Names rejected outright: `(name, reason)`.
    pub rejected: Vec<(String, String)>,
}

/// Builds a provider's state catalog: canonicalize names, reject
/// pseudo-states, then fold bare names into the unique dotted entry whose
/// final component they match (`PLMN-SEARCH` into
/// `5GMM-REGISTERED.PLMN-SEARCH`). A bare name matching several dotted
/// entries stays standalone and is reported as ambiguous.
#[must_use]
pub fn build_catalog(states: &[CandidateState], filter: &PseudoStateFilter) -> CatalogBuild {
    let mut rejected = Vec::new();
    let mut preliminary: BTreeSet<String> = BTreeSet::new();
    for state in states {
        let canonical = canonical_state_text(&state.name);
        if filter.is_denied(&canonical) {
            rejected.push((state.name.clone(), "pseudo-state".to_string()));
            continue;
        }
        preliminary.insert(canonical);
    }

    let mut merged = Vec::new();
    let mut ambiguous = Vec::new();
    let mut catalog: BTreeSet<StateName> = BTreeSet::new();
    for name in &preliminary {
        if !name.contains('.') {
            let matches: Vec<&String> = preliminary
                .iter()
                .filter(|other| {
                    other.contains('.') && other.rsplit('.').next() == Some(name.as_str())
                })
                .collect();
            match matches.len() {
                1 => {
                    merged.push((name.clone(), matches[0].clone()));
                    continue;
                }
                n if n >= 2 => {
                    ambiguous.push((name.clone(), matches.into_iter().cloned().collect()));
                }
                _ => {}
            }
        }
        match StateName::new(name, filter) {
            Ok(state_name) => {
                catalog.insert(state_name);
            }
            Err(e) => rejected.push((name.clone(), e.to_string())),
        }
    }
    CatalogBuild {
        catalog,
        merged,
        ambiguous,
        rejected,
    }
}

/// Counters for one phase of one provider's run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub phase: Phase,
    pub windows: u32,
    pub successful_calls: u32,
    /// Calls that failed after retries and were recorded instead of
    /// aborting the run.
    pub failed_calls: u32,
    pub parse_failures: u32,
    /// Elements dropped or adjusted during vetting.
    pub dropped_elements: u32,
    pub dropped_reasons: Vec<String>,
}

impl PhaseReport {
    fn new(phase: Phase) -> Self {
        PhaseReport {
            phase,
            windows: 0,
            successful_calls: 0,
            failed_calls: 0,
            parse_failures: 0,
            dropped_elements: 0,
            dropped_reasons: Vec::new(),
        }
    }
}

/// Everything one provider contributed to a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderOutput {
    pub provider: String,
    /// Vetted, deduplicated candidates.
    pub candidates: CandidateSet,
    pub catalog: CatalogBuild,
    pub state_report: PhaseReport,
    pub transition_report: PhaseReport,
}

/// Provider failures that leave no way to continue the run.
fn is_fatal(error: &ProviderError) -> bool {
    matches!(
        error,
        ProviderError::AuthFailure { .. }
            | ProviderError::FixtureMiss { .. }
            | ProviderError::BadFixture { .. }
    )
}

fn synthetic_failure_record(provider: &str, system: &str, user: &str, detail: &str) -> LlmExchange {
    LlmExchange {
        provider: provider.to_string(),
        prompt_sha256: prompt_sha256(system, user),
        response_text: String::new(),
        input_tokens: 0,
        output_tokens: 0,
        latency_ms: 0,
        attempt: 0,
        error: Some(detail.to_string()),
    }
}

struct WindowResult {
    outcome: Option<ParseOutcome>,
    call_error: Option<String>,
}

/// Runs the two-phase extraction against providers, recording every exchange
/// in the shared log.
pub struct Extractor<'a> {
    prompter: Prompter<'a>,
    filter: &'a PseudoStateFilter,
    log: &'a ExchangeLog,
    context_budget_words: usize,
    context_tail: usize,
}

impl<'a> Extractor<'a> {
    #[must_use]
    pub fn new(
        prompter: Prompter<'a>,
        filter: &'a PseudoStateFilter,
        log: &'a ExchangeLog,
    ) -> Self {
        Extractor {
            prompter,
            filter,
            log,
            context_budget_words: crate::prompting::DEFAULT_CONTEXT_BUDGET_WORDS,
            context_tail: crate::prompting::DEFAULT_CONTEXT_TAIL,
        }
    }

    /// Overrides the rolling context digest's word budget and transition
    /// tail length.
    #[must_use]
    pub fn with_context(mut self, budget_words: usize, tail: usize) -> Self {
        self.context_budget_words = budget_words;
        self.context_tail = tail;
        self
    }

    fn fresh_context(&self) -> ContextDigest {
        ContextDigest::new(self.context_budget_words, self.context_tail)
    }

    fn call(
        &self,
        provider: &dyn Provider,
        bundle: &crate::prompting::PromptBundle,
    ) -> Result<WindowResult, ExtractError> {
        match provider.complete(bundle) {
            Ok(exchange) => {
                let outcome = parse_model_output(&exchange.response_text, bundle.phase);
                self.log.record(exchange);
                Ok(WindowResult {
                    outcome: Some(outcome),
                    call_error: None,
                })
            }
            Err(e) => {
                self.log.record(synthetic_failure_record(
                    provider.name(),
                    &bundle.system_text,
                    &bundle.user_text,
                    &e.to_string(),
                ));
                if is_fatal(&e) {
                    Err(ExtractError::Provider(e))
                } else {
                    log::warn!(
                        "provider {} window {} ({:?}): call failed, continuing: {e}",
                        provider.name(),
                        bundle.window_id,
                        bundle.phase
                    );
                    Ok(WindowResult {
                        outcome: None,
                        call_error: Some(e.to_string()),
                    })
                }
            }
        }
    }

    /// State phase: prompts every window (concurrently up to
    /// `max_concurrency`), vets evidence quotes, and aggregates candidates
    /// in window order.
    pub fn run_state_phase(
        &self,
        provider: &dyn Provider,
        windows: &[Window],
        max_concurrency: usize,
    ) -> Result<(Vec<CandidateState>, Vec<ParseFailure>, PhaseReport), ExtractError> {
        let mut report = PhaseReport::new(Phase::StateExtraction);
        report.windows = windows.len() as u32;
        let slots: Vec<Mutex<Option<WindowResult>>> =
            windows.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let fatal: Mutex<Option<ExtractError>> = Mutex::new(None);
        let workers = max_concurrency.max(1).min(windows.len().max(1));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if fatal.lock().expect("fatal flag lock").is_some() {
                        return;
                    }
                    let idx = next.fetch_add(1, Ordering::SeqCst);
                    if idx >= windows.len() {
                        return;
                    }
                    // State prompts carry no rolling context, so concurrent
                    // windows cannot observe each other.
                    let bundle = self
                        .prompter
                        .build_state_prompt(&windows[idx], &self.fresh_context());
                    match self.call(provider, &bundle) {
                        Ok(result) => {
                            *slots[idx].lock().expect("slot lock") = Some(result);
                        }
                        Err(e) => {
                            let mut guard = fatal.lock().expect("fatal flag lock");
                            if guard.is_none() {
                                *guard = Some(e);
                            }
                            return;
                        }
                    }
                });
            }
        });
        if let Some(e) = fatal.into_inner().expect("fatal flag lock") {
            return Err(e);
        }

        let mut states = Vec::new();
        let mut failures = Vec::new();
        for (idx, slot) in slots.into_iter().enumerate() {
            let window = &windows[idx];
            let Some(result) = slot.into_inner().expect("slot lock") else {
                continue;
            };
            if let Some(detail) = result.call_error {
                report.failed_calls += 1;
                report.dropped_reasons.push(format!(
                    "window {}: call failed: {detail}",
                    window.window_id
                ));
                continue;
            }
            report.successful_calls += 1;
            let outcome = result.outcome.expect("successful call has an outcome");
            if let Some(detail) = outcome.failure {
                report.parse_failures += 1;
                failures.push(ParseFailure {
                    provider: provider.name().to_string(),
                    window_id: window.window_id,
                    phase: Phase::StateExtraction,
                    detail,
                });
                continue;
            }
            report.dropped_elements += outcome.dropped.len() as u32;
            report.dropped_reasons.extend(
                outcome
                    .dropped
                    .iter()
                    .map(|r| format!("window {}: {r}", window.window_id)),
            );
            let ParsedCandidates::States(parsed) = outcome.parsed else {
                unreachable!("state phase parses state candidates");
            };
            let window_text = normalize_ws(&window.text);
            for mut state in parsed {
                state.window_id = window.window_id;
                // Evidence must be a verbatim quote; an unfindable quote is
                // cleared but the state itself survives.
                if !state.evidence.is_empty()
                    && !window_text.contains(&normalize_ws(&state.evidence))
                {
                    report.dropped_reasons.push(format!(
                        "window {}: cleared ungrounded evidence for state {:?}",
                        window.window_id, state.name
                    ));
                    state.evidence.clear();
                }
                states.push(state);
            }
        }
        Ok((states, failures, report))
    }

    /// Transition phase: prompts windows strictly in document order,
    /// threading a rolling context digest, resolving endpoints against the
    /// catalog, and vetting inferred transitions.
    pub fn run_transition_phase(
        &self,
        provider: &dyn Provider,
        windows: &[Window],
        catalog: &BTreeSet<StateName>,
    ) -> Result<(Vec<CandidateTransition>, Vec<ParseFailure>, PhaseReport), ExtractError> {
        let mut report = PhaseReport::new(Phase::TransitionExtraction);
        report.windows = windows.len() as u32;
        let mut transitions = Vec::new();
        let mut failures = Vec::new();
        let mut ctx = self.fresh_context();
        for window in windows {
            let bundle = self
                .prompter
                .build_transition_prompt(window, catalog, &ctx)?;
            let result = self.call(provider, &bundle)?;
            if let Some(detail) = result.call_error {
                report.failed_calls += 1;
                report.dropped_reasons.push(format!(
                    "window {}: call failed: {detail}",
                    window.window_id
                ));
                continue;
            }
            report.successful_calls += 1;
            let outcome = result.outcome.expect("successful call has an outcome");
            if let Some(detail) = outcome.failure {
                report.parse_failures += 1;
                failures.push(ParseFailure {
                    provider: provider.name().to_string(),
                    window_id: window.window_id,
                    phase: Phase::TransitionExtraction,
                    detail,
                });
                continue;
            }
            report.dropped_elements += outcome.dropped.len() as u32;
            report.dropped_reasons.extend(
                outcome
                    .dropped
                    .iter()
                    .map(|r| format!("window {}: {r}", window.window_id)),
            );
            let ParsedCandidates::Transitions(parsed) = outcome.parsed else {
                unreachable!("transition phase parses transition candidates");
            };
            let window_text = normalize_ws(&window.text);
            let mut accepted_pairs = Vec::new();
            for mut t in parsed {
                t.window_id = window.window_id;
                let (from, from_known) =
                    self.resolve_endpoint(&t.from, catalog, &mut report, window.window_id);
                let (to, to_known) =
                    self.resolve_endpoint(&t.to, catalog, &mut report, window.window_id);
                t.from = from;
                t.to = to;
                if t.inferred {
                    // An inferred transition is only trusted when it stays
                    // inside the known state space and quotes its basis.
                    if !(from_known && to_known) {
                        report.dropped_elements += 1;
                        report.dropped_reasons.push(format!(
                            "window {}: inferred transition {} -> {} leaves the state catalog",
                            window.window_id, t.from, t.to
                        ));
                        continue;
                    }
                    if t.span.is_empty() || !window_text.contains(&normalize_ws(&t.span)) {
                        report.dropped_elements += 1;
                        report.dropped_reasons.push(format!(
                            "window {}: inferred transition {} -> {} lacks a verbatim supporting span",
                            window.window_id, t.from, t.to
                        ));
                        continue;
                    }
                }
                if let Ok(from_name) = StateName::new(&t.from, self.filter) {
                    if let Ok(to_name) = StateName::new(&t.to, self.filter) {
                        accepted_pairs.push((from_name, to_name));
                    }
                }
                transitions.push(t);
            }
            ctx = update_context(ctx, &[], &accepted_pairs);
        }
        Ok((transitions, failures, report))
    }

    /// Maps a raw endpoint to its canonical form. Bare substate names expand
    /// to their unique dotted catalog entry; everything else is kept
    /// canonicalized (pseudo-states are culled later, in one place).
    fn resolve_endpoint(
        &self,
        raw: &str,
        catalog: &BTreeSet<StateName>,
        report: &mut PhaseReport,
        window_id: u32,
    ) -> (String, bool) {
        match qualify_state(raw, catalog, self.filter) {
            Ok(q) => (q.name.as_str().to_string(), q.in_catalog),
            Err(FsmError::AmbiguousSubstate { candidate, matches }) => {
                report.dropped_reasons.push(format!(
                    "window {window_id}: endpoint {candidate:?} is a substate of several catalog states ({}); kept unexpanded",
                    matches.join(", ")
                ));
                (canonical_state_text(raw), false)
            }
            Err(_) => (canonical_state_text(raw), false),
        }
    }

    /// Runs both phases for one provider and assembles its vetted output.
    pub fn run_provider(
        &self,
        provider: &dyn Provider,
        windows: &[Window],
        max_concurrency: usize,
    ) -> Result<ProviderOutput, ExtractError> {
        if windows.is_empty() {
            return Err(ExtractError::NoWindows);
        }
        let (raw_states, state_failures, state_report) =
            self.run_state_phase(provider, windows, max_concurrency)?;
        let catalog = build_catalog(&raw_states, self.filter);

        let (raw_transitions, transition_failures, transition_report) =
            if catalog.catalog.is_empty() {
                log::warn!(
                    "provider {}: state phase produced an empty catalog; skipping transition phase",
                    provider.name()
                );
                (
                    Vec::new(),
                    Vec::new(),
                    PhaseReport::new(Phase::TransitionExtraction),
                )
            } else {
                self.run_transition_phase(provider, windows, &catalog.catalog)?
            };

        let mut candidates = CandidateSet::new(provider.name());
        candidates.states = raw_states;
        candidates.transitions = raw_transitions;
        candidates.parse_failures = state_failures;
        candidates.parse_failures.extend(transition_failures);
        let (candidates, post_dropped) = postprocess(candidates, self.filter);
        let mut transition_report = transition_report;
        transition_report.dropped_elements += post_dropped.len() as u32;
        transition_report.dropped_reasons.extend(post_dropped);
        Ok(ProviderOutput {
            provider: provider.name().to_string(),
            candidates,
            catalog,
            state_report,
            transition_report,
        })
    }

    /// Runs every provider (each in its own thread) and returns their
    /// outputs in the order given.
    pub fn run_all(
        &self,
        providers: &[(&dyn Provider, usize)],
        windows: &[Window],
    ) -> Result<Vec<ProviderOutput>, ExtractError> {
        if windows.is_empty() {
            return Err(ExtractError::NoWindows);
        }
        let slots: Vec<Mutex<Option<Result<ProviderOutput, ExtractError>>>> =
            providers.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for (idx, (provider, cap)) in providers.iter().enumerate() {
                let slot = &slots[idx];
                let provider: &dyn Provider = *provider;
                let cap = *cap;
                scope.spawn(move || {
                    let result = self.run_provider(provider, windows, cap);
                    *slot.lock().expect("provider slot lock") = Some(result);
                });
            }
        });
        let mut outputs = Vec::with_capacity(providers.len());
        for slot in slots {
            match slot.into_inner().expect("provider slot lock") {
                Some(Ok(output)) => outputs.push(output),
                Some(Err(e)) => return Err(e),
                None => unreachable!("every provider thread fills its slot"),
            }
        }
        Ok(outputs)
    }
}

/// Final per-provider cleanup: canonicalize names and spans, drop candidates
/// touching pseudo-states, and deduplicate.
///
/// Duplicate states merge their flags (a state is initial/final if any
/// duplicate said so) and keep the first non-empty evidence. Duplicate
/// transitions (same endpoints, condition, and action) keep the earliest
/// window and stay `inferred` only if every duplicate was inferred.
#[must_use]
pub fn postprocess(set: CandidateSet, filter: &PseudoStateFilter) -> (CandidateSet, Vec<String>) {
    let mut dropped = Vec::new();
    let mut out = CandidateSet::new(set.provider.clone());
    out.parse_failures = set.parse_failures;

    let mut seen_states: Vec<usize> = Vec::new(); // indexes into out.states
    for state in set.states {
        let canonical = canonical_state_text(&state.name);
        if filter.is_denied(&canonical) {
            dropped.push(format!(
                "state {:?} (window {}): pseudo-state",
                state.name, state.window_id
            ));
            continue;
        }
        if let Some(&idx) = seen_states
            .iter()
            .find(|&&idx| out.states[idx].name == canonical)
        {
            let existing = &mut out.states[idx];
            existing.initial |= state.initial;
            existing.is_final |= state.is_final;
            if existing.evidence.is_empty() && !state.evidence.is_empty() {
                existing.evidence = state.evidence;
            }
            continue;
        }
        let mut state = state;
        state.name = canonical;
        seen_states.push(out.states.len());
        out.states.push(state);
    }

    let mut seen_transitions: Vec<usize> = Vec::new();
    for t in set.transitions {
        let mut t = t;
        t.from = canonical_state_text(&t.from);
        t.to = canonical_state_text(&t.to);
        t.condition = normalize_ws(&t.condition);
        t.action = normalize_ws(&t.action);
        t.span = normalize_ws(&t.span);
        if filter.is_denied(&t.from) || filter.is_denied(&t.to) {
            dropped.push(format!(
                "transition {} -> {} (window {}): pseudo-state endpoint",
                t.from, t.to, t.window_id
            ));
            continue;
        }
        if let Some(&idx) = seen_transitions.iter().find(|&&idx| {
            let other = &out.transitions[idx];
            other.from == t.from
                && other.to == t.to
                && other.condition == t.condition
                && other.action == t.action
        }) {
            let existing = &mut out.transitions[idx];
            existing.window_id = existing.window_id.min(t.window_id);
            // A transition stated outright anywhere is not inferred.
            existing.inferred &= t.inferred;
            if existing.span.is_empty() && !t.span.is_empty() {
                existing.span = t.span;
            }
            continue;
        }
        seen_transitions.push(out.transitions.len());
        out.transitions.push(t);
    }

    (out, dropped)
}
