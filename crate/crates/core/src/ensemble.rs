//! Combining per-provider candidates into one voted state machine.
//!
//! Providers phrase the same transition differently, so agreement is decided
//! by token overlap rather than string equality: two transitions align when
//! their endpoints match exactly and both label spans overlap at least
//! `theta`. Aligned candidates are grouped by greedy seeded clustering over
//! a globally sorted candidate list — the ordering makes the result
//! independent of provider order, thread timing, or input shuffling — and
//! every cluster with a majority of distinct providers behind it becomes a
//! transition of the final machine.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::extract::{CandidateSet, CandidateTransition};
use crate::fsm::{
    canonical_state_text, Fsm, FsmError, Provenance, PseudoStateFilter, StateFlags, StateName,
    Transition,
};
use crate::text::tokenize;

/// Thresholds for deciding that two spans, and two transitions, agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentParams {
    /// Minimum token overlap for both the condition pair and the action
    /// pair.
    pub theta: f64,
}

/// Default span-overlap threshold.
pub const DEFAULT_THETA: f64 = 0.75;

impl Default for AlignmentParams {
    fn default() -> Self {
        AlignmentParams {
            theta: DEFAULT_THETA,
        }
    }
}

/// Token overlap between two spans: the size of the multiset intersection of
/// their token bags, divided by the size of the smaller bag.
///
/// Tokens are case-folded and stripped of punctuation, so clause-numbering
/// and capitalization differences do not count against agreement. Two empty
/// spans overlap fully (both providers agree there is nothing to say); an
/// empty span against a non-empty one does not overlap at all.
#[must_use]
pub fn span_overlap(a: &str, b: &str) -> f64 {
    let ta = tokenize(a);
    let tb = tokenize(b);
    if ta.is_empty() && tb.is_empty() {
        return 1.0;
    }
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for token in &ta {
        *counts.entry(token.as_str()).or_insert(0) += 1;
    }
    let mut intersection = 0usize;
    for token in &tb {
        if let Some(count) = counts.get_mut(token.as_str()) {
            if *count > 0 {
                *count -= 1;
                intersection += 1;
            }
        }
    }
    intersection as f64 / ta.len().min(tb.len()) as f64
}

/// Read access to the four fields alignment cares about, so candidate
/// transitions, final transitions, and ground-truth records can all be
/// compared with one predicate.
pub trait TransitionLike {
    fn source_state(&self) -> &str;
    fn target_state(&self) -> &str;
    fn condition(&self) -> &str;
    fn action(&self) -> &str;
}

impl TransitionLike for CandidateTransition {
    fn source_state(&self) -> &str {
        &self.from
    }
    fn target_state(&self) -> &str {
        &self.to
    }
    fn condition(&self) -> &str {
        &self.condition
    }
    fn action(&self) -> &str {
        &self.action
    }
}

impl TransitionLike for Transition {
    fn source_state(&self) -> &str {
        self.from.as_str()
    }
    fn target_state(&self) -> &str {
        self.to.as_str()
    }
    fn condition(&self) -> &str {
        &self.condition
    }
    fn action(&self) -> &str {
        &self.action
    }
}

/// Two transitions align when their endpoints are identical and both label
/// spans overlap at least `theta`.
#[must_use]
pub fn transitions_aligned<A, B>(a: &A, b: &B, params: &AlignmentParams) -> bool
where
    A: TransitionLike + ?Sized,
    B: TransitionLike + ?Sized,
{
    a.source_state() == b.source_state()
        && a.target_state() == b.target_state()
        && span_overlap(a.condition(), b.condition()) >= params.theta
        && span_overlap(a.action(), b.action()) >= params.theta
}

fn pair_score<A, B>(a: &A, b: &B) -> f64
where
    A: TransitionLike + ?Sized,
    B: TransitionLike + ?Sized,
{
    span_overlap(a.condition(), b.condition()) + span_overlap(a.action(), b.action())
}

/// One provider's candidate inside a cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterMember {
    pub provider: String,
    pub transition: CandidateTransition,
}

impl ClusterMember {
    fn sort_key(&self) -> (&str, u32, &str, &str, &str, &str) {
        (
            &self.provider,
            self.transition.window_id,
            &self.transition.from,
            &self.transition.to,
            &self.transition.condition,
            &self.transition.action,
        )
    }
}

/// A group of mutually aligned candidates, at most one per provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCluster {
    /// The medoid member: the candidate with the highest summed overlap
    /// against the rest of the cluster. Its wording goes into the final
    /// machine.
    pub representative: CandidateTransition,
    /// All members, in the global candidate order (seed first).
    pub members: Vec<ClusterMember>,
}

impl TransitionCluster {
    /// Distinct providers backing this cluster.
    #[must_use]
    pub fn providers(&self) -> BTreeSet<&str> {
        self.members.iter().map(|m| m.provider.as_str()).collect()
    }

    /// Vote count: one per distinct provider.
    #[must_use]
    pub fn votes(&self) -> usize {
        self.providers().len()
    }

    /// Every window any member was extracted from.
    #[must_use]
    pub fn window_ids(&self) -> BTreeSet<u32> {
        self.members
            .iter()
            .map(|m| m.transition.window_id)
            .collect()
    }

    /// A cluster is inferred only if every member was inferred.
    #[must_use]
    pub fn inferred(&self) -> bool {
        self.members.iter().all(|m| m.transition.inferred)
    }
}

/// Groups all providers' candidate transitions into clusters of agreement.
///
/// Candidates are first sorted by `(provider, window, from, to, condition,
/// action)` so the outcome is a pure function of the candidate multiset.
/// The earliest unclustered candidate seeds a cluster; then, provider by
/// provider, the not-yet-clustered candidate aligning with the seed at the
/// highest summed overlap joins (ties to the earliest in order), keeping at
/// most one member per provider. Candidates that lose the per-provider pick
/// stay available to seed or join later clusters.
#[must_use]
pub fn cluster_candidates(
    sets: &[CandidateSet],
    params: &AlignmentParams,
) -> Vec<TransitionCluster> {
    let mut members: Vec<ClusterMember> = sets
        .iter()
        .flat_map(|set| {
            set.transitions.iter().map(|t| ClusterMember {
                provider: set.provider.clone(),
                transition: t.clone(),
            })
        })
        .collect();
    members.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let mut assigned = vec![false; members.len()];
    let mut clusters = Vec::new();
    for seed_idx in 0..members.len() {
        if assigned[seed_idx] {
            continue;
        }
        assigned[seed_idx] = true;
        let mut cluster_members = vec![members[seed_idx].clone()];
        let seed = &members[seed_idx].transition;

        // Candidates aligned with the seed, grouped by provider, in order.
        let mut by_provider: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (idx, member) in members.iter().enumerate() {
            if assigned[idx] || member.provider == members[seed_idx].provider {
                continue;
            }
            if transitions_aligned(seed, &member.transition, params) {
                by_provider.entry(&member.provider).or_default().push(idx);
            }
        }
        for (_, indexes) in by_provider {
            // Closest to the seed wins; ties go to the earliest candidate.
            let best = indexes
                .into_iter()
                .map(|idx| (idx, pair_score(seed, &members[idx].transition)))
                .max_by(|(ia, sa), (ib, sb)| {
                    sa.partial_cmp(sb)
                        .expect("overlap scores are never NaN")
                        .then(ib.cmp(ia))
                })
                .map(|(idx, _)| idx)
                .expect("group is non-empty");
            assigned[best] = true;
            cluster_members.push(members[best].clone());
        }

        cluster_members.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let representative = medoid(&cluster_members, params);
        clusters.push(TransitionCluster {
            representative,
            members: cluster_members,
        });
    }
    clusters
}

/// The member with the highest summed overlap against all other members;
/// ties go to the earliest member in cluster order. Only members that align
/// with every other member are eligible, so the alignment predicate holds
/// between the representative and each member. The set is never empty: every
/// member joined by aligning with the cluster's seed, so at least the seed
/// qualifies.
fn medoid(members: &[ClusterMember], params: &AlignmentParams) -> CandidateTransition {
    let best = members
        .iter()
        .enumerate()
        .filter(|(idx, member)| {
            members.iter().enumerate().all(|(other_idx, other)| {
                other_idx == *idx
                    || transitions_aligned(&member.transition, &other.transition, params)
            })
        })
        .map(|(idx, member)| {
            let total: f64 = members
                .iter()
                .enumerate()
                .filter(|(other_idx, _)| *other_idx != idx)
                .map(|(_, other)| pair_score(&member.transition, &other.transition))
                .sum();
            (idx, total)
        })
        .max_by(|(ia, sa), (ib, sb)| {
            sa.partial_cmp(sb)
                .expect("overlap scores are never NaN")
                .then(ib.cmp(ia))
        })
        .map(|(idx, _)| idx)
        .expect("the seed always aligns with every member it admitted");
    members[best].transition.clone()
}

/// Vote tally for one state across the ensemble.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateVoteTally {
    /// Providers that proposed the state at all.
    pub providers: BTreeSet<String>,
    /// Providers that marked it initial.
    pub initial_votes: BTreeSet<String>,
    /// Providers that marked it final.
    pub final_votes: BTreeSet<String>,
    /// Windows it was proposed in, across providers.
    pub window_ids: BTreeSet<u32>,
}

/// Tallies state votes across providers under one shared name space.
///
/// Names are canonicalized, pseudo-states are excluded, and a bare substate
/// name counts toward the unique dotted name (from any provider) whose final
/// component it matches — so a provider abbreviating
/// `5GMM-REGISTERED.PLMN-SEARCH` as `PLMN-SEARCH` still votes for the full
/// name. Bare names matching several dotted names stay standalone.
#[must_use]
pub fn tally_states(
    sets: &[CandidateSet],
    filter: &PseudoStateFilter,
) -> BTreeMap<StateName, StateVoteTally> {
    // Dotted names proposed by anyone, for global suffix resolution.
    let mut dotted: BTreeSet<String> = BTreeSet::new();
    for set in sets {
        for state in &set.states {
            let canonical = canonical_state_text(&state.name);
            if canonical.contains('.') && !filter.is_denied(&canonical) {
                dotted.insert(canonical);
            }
        }
    }
    let resolve = |canonical: &str| -> String {
        if canonical.contains('.') {
            return canonical.to_string();
        }
        let mut matches = dotted
            .iter()
            .filter(|d| d.rsplit('.').next() == Some(canonical));
        match (matches.next(), matches.next()) {
            (Some(unique), None) => unique.clone(),
            _ => canonical.to_string(),
        }
    };

    let mut tallies: BTreeMap<StateName, StateVoteTally> = BTreeMap::new();
    for set in sets {
        // A provider's duplicate proposals were already merged by
        // postprocessing, but resolution can re-collide names, so votes go
        // through sets keyed by provider.
        for state in &set.states {
            let canonical = canonical_state_text(&state.name);
            if filter.is_denied(&canonical) {
                continue;
            }
            let resolved = resolve(&canonical);
            let Ok(name) = StateName::new(&resolved, filter) else {
                continue;
            };
            let tally = tallies.entry(name).or_default();
            tally.providers.insert(set.provider.clone());
            if state.initial {
                tally.initial_votes.insert(set.provider.clone());
            }
            if state.is_final {
                tally.final_votes.insert(set.provider.clone());
            }
            tally.window_ids.insert(state.window_id);
        }
    }
    tallies
}

/// Majority-vote settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteParams {
    /// Number of providers in the ensemble (`k`).
    pub ensemble_size: usize,
    /// Explicit vote threshold; when unset, a strict majority
    /// (`floor(k/2) + 1`) is required.
    pub min_votes: Option<usize>,
}

impl VoteParams {
    #[must_use]
    pub fn majority(ensemble_size: usize) -> Self {
        VoteParams {
            ensemble_size,
            min_votes: None,
        }
    }

    /// The vote count a state or transition needs to be accepted.
    #[must_use]
    pub fn threshold(&self) -> usize {
        self.min_votes.unwrap_or(self.ensemble_size / 2 + 1).max(1)
    }
}

/// Builds the final machine from clustered transitions and state tallies.
///
/// A transition is accepted when its cluster reaches the vote threshold; its
/// wording is the cluster representative's and its provenance is the union
/// of the members'. A state is kept when its mention votes reach the
/// threshold **or** it is an endpoint of an accepted transition; its
/// initial/final flags each need the threshold independently.
pub fn majority_vote(
    clusters: &[TransitionCluster],
    tallies: &BTreeMap<StateName, StateVoteTally>,
    params: &VoteParams,
    protocol: &str,
    spec_version: &str,
    filter: &PseudoStateFilter,
) -> Result<Fsm, FsmError> {
    let threshold = params.threshold();
    let mut fsm = Fsm::new(protocol, spec_version);
    let mut present: BTreeSet<StateName> = BTreeSet::new();

    for (name, tally) in tallies {
        if tally.providers.len() >= threshold {
            fsm.ensure_state(name.clone());
            present.insert(name.clone());
        }
    }

    for cluster in clusters {
        if cluster.votes() < threshold {
            continue;
        }
        let rep = &cluster.representative;
        let from = StateName::new(&rep.from, filter)?;
        let to = StateName::new(&rep.to, filter)?;
        present.insert(from.clone());
        present.insert(to.clone());
        fsm.add_transition(
            Transition {
                from,
                to,
                condition: rep.condition.clone(),
                action: rep.action.clone(),
                provenance: Provenance {
                    providers: cluster
                        .providers()
                        .into_iter()
                        .map(str::to_string)
                        .collect(),
                    window_ids: cluster.window_ids(),
                    inferred: cluster.inferred(),
                },
            },
            filter,
        )?;
    }

    for (name, tally) in tallies {
        if present.contains(name) {
            fsm.set_state_flags(
                name.clone(),
                StateFlags {
                    initial: tally.initial_votes.len() >= threshold,
                    is_final: tally.final_votes.len() >= threshold,
                },
            );
        }
    }
    Ok(fsm)
}
