//! Finite state machine model: canonical state names, transitions with
//! provenance, suffix-based state qualification, and deterministic JSON and
//! DOT exports.
//!
//! State names follow 3GPP conventions: uppercase, hyphenated, with dotted
//! suffixes for substates (`5GMM-REGISTERED.PLMN-SEARCH`). Model output often
//! mentions only the final component (`PLMN-SEARCH`); [`qualify_state`]
//! expands such mentions against a catalog when the expansion is unambiguous.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from state-name handling and machine assembly.
#[derive(Debug, Error)]
pub enum FsmError {
    #[error("state name is empty after canonicalization")]
    EmptyStateName,
    #[error("state name {0:?} is a denylisted pseudo-state")]
    PseudoState(String),
    #[error("substate {candidate:?} matches several catalog entries: {matches:?}")]
    AmbiguousSubstate {
        candidate: String,
        matches: Vec<String>,
    },
    #[error("machine JSON is malformed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("machine JSON is inconsistent: {0}")]
    Schema(String),
}

/// Canonicalizes a raw state mention: trims, collapses internal whitespace to
/// single spaces, uppercases. Hyphens and dots are preserved because they are
/// meaningful in protocol state names.
#[must_use]
pub fn canonical_state_text(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_uppercase()
}

/// A canonicalized, non-empty protocol state name.
///
/// Ordering is plain lexicographic order on the canonical text, which is what
/// every deterministic listing in this crate relies on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateName(String);

impl StateName {
    /// Builds a state name from raw text, rejecting empty and denylisted
    /// values.
    pub fn new(raw: &str, filter: &PseudoStateFilter) -> Result<Self, FsmError> {
        let canonical = canonical_state_text(raw);
        if canonical.is_empty() {
            return Err(FsmError::EmptyStateName);
        }
        if filter.is_denied(&canonical) {
            return Err(FsmError::PseudoState(canonical));
        }
        Ok(StateName(canonical))
    }

    #[must_use]
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Final dotted component of the name: the substate part of
    /// `PARENT.SUBSTATE`, or the whole name when there is no dot.
    #[must_use]
    pub fn last_component(&self) -> &str {
        self.0.rsplit('.').next().unwrap_or(&self.0)
    }
}

impl fmt::Display for StateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Case-insensitive denylist of pseudo-state names that models emit when they
/// have nothing concrete to say ("UNKNOWN", "ANY STATE", …).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoStateFilter {
    entries: BTreeSet<String>,
}

impl PseudoStateFilter {
    /// Builds a filter from raw entries; each entry is canonicalized so that
    /// membership checks are case- and whitespace-insensitive.
    #[must_use]
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        PseudoStateFilter {
            entries: entries
                .into_iter()
                .map(|e| canonical_state_text(e.as_ref()))
                .collect(),
        }
    }

    /// True when the canonicalized candidate is denylisted. The empty string
    /// is always denied.
    #[must_use]
    pub fn is_denied(&self, raw_or_canonical: &str) -> bool {
        let canonical = canonical_state_text(raw_or_canonical);
        canonical.is_empty() || self.entries.contains(&canonical)
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }
}

impl Default for PseudoStateFilter {
    fn default() -> Self {
        PseudoStateFilter::new(["UNKNOWN", "UNDEFINED", "ANY STATE", "SOME STATE", "N/A", ""])
    }
}

/// Result of qualifying a raw state mention against a catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualifiedState {
    pub name: StateName,
    /// False when the mention resolved to nothing in the catalog and the
    /// canonicalized raw text was kept instead.
    pub in_catalog: bool,
}

/// Resolves a raw state mention against a catalog of full state names.
///
/// Resolution order:
/// 1. exact match on the canonical form;
/// 2. the mention equals the final dotted component of exactly one catalog
///    entry — the mention is an abbreviated substate and expands to it
///    (`PLMN-SEARCH` → `5GMM-REGISTERED.PLMN-SEARCH`);
/// 3. the mention matches two or more entries that way —
///    [`FsmError::AmbiguousSubstate`], listing the contenders;
/// 4. otherwise the canonicalized mention is returned flagged as
///    out-of-catalog.
pub fn qualify_state(
    candidate: &str,
    catalog: &BTreeSet<StateName>,
    filter: &PseudoStateFilter,
) -> Result<QualifiedState, FsmError> {
    let name = StateName::new(candidate, filter)?;
    if catalog.contains(&name) {
        return Ok(QualifiedState {
            name,
            in_catalog: true,
        });
    }
    let suffix_matches: Vec<&StateName> = catalog
        .iter()
        .filter(|entry| entry.last_component() == name.as_str())
        .collect();
    match suffix_matches.as_slice() {
        [] => Ok(QualifiedState {
            name,
            in_catalog: false,
        }),
        [only] => Ok(QualifiedState {
            name: (*only).clone(),
            in_catalog: true,
        }),
        many => Err(FsmError::AmbiguousSubstate {
            candidate: name.as_str().to_string(),
            matches: many.iter().map(|m| m.as_str().to_string()).collect(),
        }),
    }
}

/// Per-state role flags, both decided by majority vote.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateFlags {
    pub initial: bool,
    #[serde(rename = "final")]
    pub is_final: bool,
}

/// Where a transition came from: which providers voted for it, which windows
/// it was seen in, and whether every sighting was inferred rather than read
/// off an explicit statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub providers: BTreeSet<String>,
    pub window_ids: BTreeSet<u32>,
    pub inferred: bool,
}

impl Provenance {
    /// Single-provider provenance for a fresh sighting.
    #[must_use]
    pub fn single(provider: &str, window_id: u32, inferred: bool) -> Self {
        Provenance {
            providers: BTreeSet::from([provider.to_string()]),
            window_ids: BTreeSet::from([window_id]),
            inferred,
        }
    }

    /// Vote count: number of distinct providers that produced the transition.
    #[must_use]
    pub fn votes(&self) -> usize {
        self.providers.len()
    }

    /// Folds another sighting of the same transition into this one. A
    /// transition stays inferred only while every sighting is inferred; one
    /// explicit sighting makes it explicit.
    pub fn merge(&mut self, other: &Provenance) {
        self.providers.extend(other.providers.iter().cloned());
        self.window_ids.extend(other.window_ids.iter().copied());
        self.inferred = self.inferred && other.inferred;
    }
}

/// A labeled transition between two canonical states.
///
/// `condition` and `action` are verbatim spans from the source document
/// (whitespace-normalized); at least one of them is non-empty for any
/// transition that survives extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub from: StateName,
    pub to: StateName,
    pub condition: String,
    pub action: String,
    pub provenance: Provenance,
}

/// Key under which transitions deduplicate: endpoints plus both label spans.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct TransitionKey {
    from: StateName,
    to: StateName,
    condition: String,
    action: String,
}

/// An extracted protocol state machine.
///
/// States and transitions are kept in ordered maps, so every iteration,
/// export, and comparison is deterministic. Endpoint closure holds by
/// construction: [`Fsm::add_transition`] inserts missing endpoint states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fsm {
    pub protocol: String,
    pub spec_version: String,
    states: BTreeMap<StateName, StateFlags>,
    transitions: BTreeMap<TransitionKey, Provenance>,
}

impl Fsm {
    #[must_use]
    pub fn new(protocol: &str, spec_version: &str) -> Self {
        Fsm {
            protocol: protocol.to_string(),
            spec_version: spec_version.to_string(),
            states: BTreeMap::new(),
            transitions: BTreeMap::new(),
        }
    }

    /// Ensures a state exists, leaving existing flags untouched.
    pub fn ensure_state(&mut self, name: StateName) {
        self.states.entry(name).or_default();
    }

    /// Sets both role flags of a state, inserting it if necessary.
    pub fn set_state_flags(&mut self, name: StateName, flags: StateFlags) {
        *self.states.entry(name).or_default() = flags;
    }

    /// Adds a transition, rejecting denylisted endpoints. An exact duplicate
    /// (same endpoints, condition, and action) merges provenance instead of
    /// creating a second edge. Missing endpoint states are inserted.
    pub fn add_transition(
        &mut self,
        t: Transition,
        filter: &PseudoStateFilter,
    ) -> Result<(), FsmError> {
        for endpoint in [&t.from, &t.to] {
            if filter.is_denied(endpoint.as_str()) {
                return Err(FsmError::PseudoState(endpoint.as_str().to_string()));
            }
        }
        self.ensure_state(t.from.clone());
        self.ensure_state(t.to.clone());
        let key = TransitionKey {
            from: t.from,
            to: t.to,
            condition: t.condition,
            action: t.action,
        };
        match self.transitions.get_mut(&key) {
            Some(existing) => existing.merge(&t.provenance),
            None => {
                self.transitions.insert(key, t.provenance);
            }
        }
        Ok(())
    }

    /// States with their flags, in lexicographic name order.
    pub fn states(&self) -> impl Iterator<Item = (&StateName, &StateFlags)> {
        self.states.iter()
    }

    #[must_use]
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    /// Transitions in canonical `(from, to, condition, action)` order.
    pub fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        self.transitions.iter().map(|(key, provenance)| Transition {
            from: key.from.clone(),
            to: key.to.clone(),
            condition: key.condition.clone(),
            action: key.action.clone(),
            provenance: provenance.clone(),
        })
    }

    #[must_use]
    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    /// Serializes to the canonical JSON schema: top-level `protocol`,
    /// `spec_version`, `states`, `transitions`; states sorted by name;
    /// transitions sorted by `(from, to, condition, action)`. The output is
    /// byte-identical across runs for equal machines.
    #[must_use]
    pub fn export_json(&self) -> Vec<u8> {
        let doc = FsmJson::from(self);
        let mut bytes = serde_json::to_vec_pretty(&doc).expect("machine serialization is total");
        bytes.push(b'\n');
        bytes
    }

    /// Parses a machine from its canonical JSON. Round-trips with
    /// [`Fsm::export_json`]: `Fsm::from_json(&f.export_json()) == f`.
    pub fn from_json(bytes: &[u8]) -> Result<Self, FsmError> {
        let doc: FsmJson = serde_json::from_slice(bytes)?;
        let mut machine = Fsm::new(&doc.protocol, &doc.spec_version);
        for state in doc.states {
            let name = nonempty_name(&state.name)?;
            machine.set_state_flags(
                name,
                StateFlags {
                    initial: state.initial,
                    is_final: state.is_final,
                },
            );
        }
        for t in doc.transitions {
            if t.votes != t.providers.len() {
                return Err(FsmError::Schema(format!(
                    "transition {} -> {}: votes={} but {} providers listed",
                    t.from,
                    t.to,
                    t.votes,
                    t.providers.len()
                )));
            }
            let from = nonempty_name(&t.from)?;
            let to = nonempty_name(&t.to)?;
            if !machine.states.contains_key(&from) || !machine.states.contains_key(&to) {
                return Err(FsmError::Schema(format!(
                    "transition {} -> {} references a state missing from the state list",
                    t.from, t.to
                )));
            }
            machine.transitions.insert(
                TransitionKey {
                    from,
                    to,
                    condition: t.condition,
                    action: t.action,
                },
                Provenance {
                    providers: t.providers.into_iter().collect(),
                    window_ids: t.window_ids.into_iter().collect(),
                    inferred: t.inferred,
                },
            );
        }
        Ok(machine)
    }

    /// Renders the machine as a Graphviz digraph. Initial states get an
    /// arrow from an anonymous point node, final states a double circle, and
    /// each edge is labeled `condition / action` truncated to 60 characters.
    #[must_use]
    pub fn export_dot(&self) -> String {
        use std::fmt::Write as _;

        let mut out = String::from("digraph {\n");
        if self.states.is_empty() && self.transitions.is_empty() {
            out.push_str("}\n");
            return out;
        }
        out.push_str("    rankdir=LR;\n    node [shape=circle];\n");
        for (i, (name, _)) in self.states.iter().filter(|(_, f)| f.initial).enumerate() {
            let _ = writeln!(out, "    __start{i} [shape=point];");
            let _ = writeln!(out, "    __start{i} -> \"{}\";", escape_dot(name.as_str()));
        }
        for (name, flags) in &self.states {
            let shape = if flags.is_final {
                "doublecircle"
            } else {
                "circle"
            };
            let _ = writeln!(
                out,
                "    \"{}\" [shape={shape}];",
                escape_dot(name.as_str())
            );
        }
        for key in self.transitions.keys() {
            let label =
                crate::text::truncate_chars(&format!("{} / {}", key.condition, key.action), 60);
            let _ = writeln!(
                out,
                "    \"{}\" -> \"{}\" [label=\"{}\"];",
                escape_dot(key.from.as_str()),
                escape_dot(key.to.as_str()),
                escape_dot(&label)
            );
        }
        out.push_str("}\n");
        out
    }
}

fn nonempty_name(raw: &str) -> Result<StateName, FsmError> {
    let canonical = canonical_state_text(raw);
    if canonical.is_empty() {
        return Err(FsmError::EmptyStateName);
    }
    Ok(StateName(canonical))
}

/// Escapes a string for use inside a double-quoted DOT identifier or label.
fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Serde mirror of the canonical machine JSON schema.
#[derive(Serialize, Deserialize)]
struct FsmJson {
    protocol: String,
    spec_version: String,
    states: Vec<StateJson>,
    transitions: Vec<TransitionJson>,
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    name: String,
    initial: bool,
    #[serde(rename = "final")]
    is_final: bool,
}

#[derive(Serialize, Deserialize)]
struct TransitionJson {
    from: String,
    to: String,
    condition: String,
    action: String,
    votes: usize,
    providers: Vec<String>,
    window_ids: Vec<u32>,
    inferred: bool,
}

impl From<&Fsm> for FsmJson {
    fn from(machine: &Fsm) -> Self {
        FsmJson {
            protocol: machine.protocol.clone(),
            spec_version: machine.spec_version.clone(),
            states: machine
                .states
                .iter()
                .map(|(name, flags)| StateJson {
                    name: name.as_str().to_string(),
                    initial: flags.initial,
                    is_final: flags.is_final,
                })
                .collect(),
            transitions: machine
                .transitions
                .iter()
                .map(|(key, provenance)| TransitionJson {
                    from: key.from.as_str().to_string(),
                    to: key.to.as_str().to_string(),
                    condition: key.condition.clone(),
                    action: key.action.clone(),
                    votes: provenance.votes(),
                    providers: provenance.providers.iter().cloned().collect(),
                    window_ids: provenance.window_ids.iter().copied().collect(),
                    inferred: provenance.inferred,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filter() -> PseudoStateFilter {
        PseudoStateFilter::default()
    }

    fn name(s: &str) -> StateName {
        StateName::new(s, &filter()).unwrap()
    }

    fn catalog(names: &[&str]) -> BTreeSet<StateName> {
        names.iter().map(|n| name(n)).collect()
    }

    #[test]
    fn canonicalization_uppercases_and_collapses_whitespace() {
        assert_eq!(
            name("  5gmm   registered\tinitiated ").as_str(),
            "5GMM REGISTERED INITIATED"
        );
        assert_eq!(name("5GMM-DEREGISTERED").as_str(), "5GMM-DEREGISTERED");
    }

    #[test]
    fn empty_and_pseudo_names_are_rejected() {
        assert!(matches!(
            StateName::new("   ", &filter()),
            Err(FsmError::EmptyStateName)
        ));
        assert!(matches!(
            StateName::new("unknown", &filter()),
            Err(FsmError::PseudoState(_))
        ));
        assert!(matches!(
            StateName::new("Any  State", &filter()),
            Err(FsmError::PseudoState(_))
        ));
    }

    #[test]
    fn custom_denylist_replaces_default() {
        let custom = PseudoStateFilter::new(["VOID"]);
        assert!(StateName::new("unknown", &custom).is_ok());
        assert!(StateName::new("void", &custom).is_err());
    }

    #[test]
    fn qualify_exact_match_wins() {
        let cat = catalog(&["5GMM-REGISTERED", "5GMM-REGISTERED.PLMN-SEARCH"]);
        let q = qualify_state("5gmm-registered", &cat, &filter()).unwrap();
        assert_eq!(q.name.as_str(), "5GMM-REGISTERED");
        assert!(q.in_catalog);
    }

    #[test]
    fn qualify_expands_unique_suffix() {
        let cat = catalog(&["5GMM-REGISTERED", "5GMM-REGISTERED.PLMN-SEARCH"]);
        let q = qualify_state("PLMN-SEARCH", &cat, &filter()).unwrap();
        assert_eq!(q.name.as_str(), "5GMM-REGISTERED.PLMN-SEARCH");
        assert!(q.in_catalog);
    }

    #[test]
    fn qualify_reports_ambiguous_suffix() {
        let cat = catalog(&["A.IDLE", "B.IDLE"]);
        match qualify_state("IDLE", &cat, &filter()) {
            Err(FsmError::AmbiguousSubstate { candidate, matches }) => {
                assert_eq!(candidate, "IDLE");
                assert_eq!(matches, vec!["A.IDLE".to_string(), "B.IDLE".to_string()]);
            }
            other => panic!("expected ambiguity, got {other:?}"),
        }
    }

    #[test]
    fn qualify_keeps_unmatched_name_flagged() {
        let cat = catalog(&["5GMM-NULL"]);
        let q = qualify_state("emm-registered", &cat, &filter()).unwrap();
        assert_eq!(q.name.as_str(), "EMM-REGISTERED");
        assert!(!q.in_catalog);
    }

    fn transition(from: &str, to: &str, cond: &str, act: &str, provider: &str) -> Transition {
        Transition {
            from: name(from),
            to: name(to),
            condition: cond.to_string(),
            action: act.to_string(),
            provenance: Provenance::single(provider, 0, false),
        }
    }

    #[test]
    fn add_transition_inserts_endpoints() {
        let mut machine = Fsm::new("NAS", "R17");
        machine
            .add_transition(transition("A", "B", "c", "a", "p1"), &filter())
            .unwrap();
        assert_eq!(machine.state_count(), 2);
        assert_eq!(machine.transition_count(), 1);
    }

    #[test]
    fn duplicate_transition_merges_provenance() {
        let mut machine = Fsm::new("NAS", "R17");
        machine
            .add_transition(transition("A", "B", "c", "a", "p1"), &filter())
            .unwrap();
        let mut second = transition("A", "B", "c", "a", "p2");
        second.provenance.window_ids = BTreeSet::from([3]);
        machine.add_transition(second, &filter()).unwrap();
        let t = machine.transitions().next().unwrap();
        assert_eq!(t.provenance.votes(), 2);
        assert_eq!(t.provenance.window_ids, BTreeSet::from([0, 3]));
    }

    #[test]
    fn one_explicit_sighting_clears_inferred() {
        let mut machine = Fsm::new("NAS", "R17");
        let mut inferred = transition("A", "B", "c", "a", "p1");
        inferred.provenance.inferred = true;
        machine.add_transition(inferred, &filter()).unwrap();
        machine
            .add_transition(transition("A", "B", "c", "a", "p2"), &filter())
            .unwrap();
        assert!(!machine.transitions().next().unwrap().provenance.inferred);
    }

    #[test]
    fn pseudo_state_endpoint_is_rejected() {
        let mut machine = Fsm::new("NAS", "R17");
        let custom = PseudoStateFilter::new(["LIMBO"]);
        let t = transition("A", "LIMBO", "c", "a", "p1");
        assert!(matches!(
            machine.add_transition(t, &custom),
            Err(FsmError::PseudoState(_))
        ));
    }

    #[test]
    fn json_round_trip_is_identity() {
        let mut machine = Fsm::new("NAS", "R17");
        machine
            .add_transition(transition("B", "A", "cond two", "act two", "p2"), &filter())
            .unwrap();
        machine
            .add_transition(transition("A", "B", "cond one", "act one", "p1"), &filter())
            .unwrap();
        machine.set_state_flags(
            name("A"),
            StateFlags {
                initial: true,
                is_final: false,
            },
        );
        let bytes = machine.export_json();
        let parsed = Fsm::from_json(&bytes).unwrap();
        assert_eq!(parsed, machine);
        assert_eq!(parsed.export_json(), bytes);
    }

    #[test]
    fn export_is_byte_stable_regardless_of_insertion_order() {
        let build = |reversed: bool| {
            let mut machine = Fsm::new("NAS", "R17");
            let mut ts = vec![
                transition("A", "B", "c1", "a1", "p1"),
                transition("B", "C", "c2", "a2", "p2"),
            ];
            if reversed {
                ts.reverse();
            }
            for t in ts {
                machine.add_transition(t, &filter()).unwrap();
            }
            machine.export_json()
        };
        assert_eq!(build(false), build(true));
    }

    #[test]
    fn from_json_rejects_vote_mismatch_and_unlisted_states() {
        let mut machine = Fsm::new("NAS", "R17");
        machine
            .add_transition(transition("A", "B", "c", "a", "p1"), &filter())
            .unwrap();
        let text = String::from_utf8(machine.export_json()).unwrap();
        let bad_votes = text.replace("\"votes\": 1", "\"votes\": 2");
        assert!(matches!(
            Fsm::from_json(bad_votes.as_bytes()),
            Err(FsmError::Schema(_))
        ));
        let bad_state = text.replace("\"name\": \"A\"", "\"name\": \"Z\"");
        assert!(matches!(
            Fsm::from_json(bad_state.as_bytes()),
            Err(FsmError::Schema(_))
        ));
    }

    #[test]
    fn empty_machine_exports_bare_digraph() {
        let machine = Fsm::new("NAS", "R17");
        assert_eq!(machine.export_dot(), "digraph {\n}\n");
    }

    #[test]
    fn dot_marks_initial_and_final_states() {
        let mut machine = Fsm::new("NAS", "R17");
        machine
            .add_transition(transition("A", "B", "cond", "act", "p1"), &filter())
            .unwrap();
        machine.set_state_flags(
            name("A"),
            StateFlags {
                initial: true,
                is_final: false,
            },
        );
        machine.set_state_flags(
            name("B"),
            StateFlags {
                initial: false,
                is_final: true,
            },
        );
        let dot = machine.export_dot();
        assert!(dot.contains("__start0 [shape=point];"));
        assert!(dot.contains("__start0 -> \"A\";"));
        assert!(dot.contains("\"B\" [shape=doublecircle];"));
        assert!(dot.contains("\"A\" -> \"B\" [label=\"cond / act\"];"));
    }

    #[test]
    fn dot_truncates_long_labels_and_escapes_quotes() {
        let mut machine = Fsm::new("NAS", "R17");
        let long = "x".repeat(80);
        machine
            .add_transition(transition("A", "B", &long, "say \"hi\"", "p1"), &filter())
            .unwrap();
        let dot = machine.export_dot();
        let label_line = dot.lines().find(|l| l.contains("label=")).unwrap();
        let label = label_line.split("label=\"").nth(1).unwrap();
        let label = label.trim_end_matches("\"];");
        // 60 characters of the raw label; the escape for any quote adds one
        // backslash which does not count against the limit.
        assert_eq!(label.replace("\\\"", "\"").chars().count(), 60);
        assert!(!dot.contains("say \"hi\""));
    }
}
