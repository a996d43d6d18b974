//! Property-based checks over the algorithmic core: token-overlap scoring
//! against a brute-force oracle, window partitioning over randomized
//! documents, context-digest budgets, clustering determinism, and the greedy
//! evaluation matching's structural guarantees.

use std::collections::BTreeMap;

use proptest::prelude::*;

use specfsm_core::ensemble::{
    cluster_candidates, span_overlap, transitions_aligned, AlignmentParams,
};
use specfsm_core::evalkit::{match_transitions, GroundTruth, TruthTransition};
use specfsm_core::extract::{CandidateSet, CandidateTransition};
use specfsm_core::fsm::{Provenance, PseudoStateFilter, StateName, Transition};
use specfsm_core::preproc::{
    clean_document, extract_section_numbers, map_paragraphs_to_sections, merge_windows, CleanRules,
    SectionNode,
};
use specfsm_core::prompting::{update_context, ContextDigest};
use specfsm_core::synth::{generate, SynthConfig};
use specfsm_core::text::word_count;

// ---------------------------------------------------------------------
// span_overlap against a brute-force oracle
// ---------------------------------------------------------------------

/// The same tokenization contract as the library's, written independently.
fn oracle_tokenize(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in s.split_whitespace() {
        let mut token = String::new();
        for c in raw.chars() {
            if c.is_alphanumeric() {
                for lower in c.to_lowercase() {
                    token.push(lower);
                }
            }
        }
        if !token.is_empty() {
            out.push(token);
        }
    }
    out
}

/// Multiset intersection by sort-and-walk instead of hash counting.
fn oracle_overlap(a: &str, b: &str) -> f64 {
    let mut ta = oracle_tokenize(a);
    let mut tb = oracle_tokenize(b);
    if ta.is_empty() && tb.is_empty() {
        return 1.0;
    }
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    ta.sort();
    tb.sort();
    let (mut i, mut j, mut common) = (0usize, 0usize, 0usize);
    while i < ta.len() && j < tb.len() {
        match ta[i].cmp(&tb[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    common as f64 / ta.len().min(tb.len()) as f64
}

/// Spans drawn from a small shared vocabulary, so intersections are common.
fn pool_span() -> impl Strategy<Value = String> {
    let pool = [
        "the",
        "UE",
        "shall",
        "start",
        "timer",
        "T3410",
        "attach",
        "request",
        "enter",
        "state",
        "upon",
        "receipt",
        "abort",
        "procedure",
        "T3410,",
    ];
    prop::collection::vec(prop::sample::select(pool.to_vec()), 0..10)
        .prop_map(|words| words.join(" "))
}

fn any_span() -> impl Strategy<Value = String> {
    prop_oneof![".{0,60}", pool_span()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(600))]

    #[test]
    fn overlap_matches_the_brute_force_oracle(a in any_span(), b in any_span()) {
        prop_assert_eq!(span_overlap(&a, &b), oracle_overlap(&a, &b));
    }

    #[test]
    fn overlap_is_bounded_and_symmetric(a in any_span(), b in any_span()) {
        let v = span_overlap(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, span_overlap(&b, &a));
    }

    #[test]
    fn overlap_with_itself_is_total(a in any_span()) {
        prop_assert_eq!(span_overlap(&a, &a), 1.0);
    }
}

fn ct(from: &str, to: &str, condition: &str, action: &str) -> CandidateTransition {
    CandidateTransition {
        from: from.to_string(),
        to: to.to_string(),
        condition: condition.to_string(),
        action: action.to_string(),
        inferred: false,
        span: String::new(),
        window_id: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn alignment_is_symmetric_and_reflexive(
        from in "[A-C]",
        to in "[A-C]",
        ca in pool_span(),
        cb in pool_span(),
        aa in pool_span(),
        ab in pool_span(),
        theta in 0.0f64..=1.0,
    ) {
        let x = ct(&from, &to, &ca, &aa);
        let y = ct(&from, &to, &cb, &ab);
        let params = AlignmentParams { theta };
        prop_assert_eq!(
            transitions_aligned(&x, &y, &params),
            transitions_aligned(&y, &x, &params)
        );
        prop_assert!(transitions_aligned(&x, &x, &params), "self-alignment");
        prop_assert!(transitions_aligned(&y, &y, &params), "self-alignment");
    }

    /// Alignment is exactly the conjunction of its four conditions, and it
    /// is monotone in the threshold: a pair aligned at a stricter theta is
    /// aligned at every looser one.
    #[test]
    fn alignment_is_the_four_condition_conjunction_and_theta_monotone(
        from_a in "[A-B]",
        from_b in "[A-B]",
        to_a in "[A-B]",
        to_b in "[A-B]",
        ca in any_span(),
        cb in any_span(),
        aa in any_span(),
        ab in any_span(),
        lo in 0.01f64..=1.0,
        hi in 0.01f64..=1.0,
    ) {
        let x = ct(&from_a, &to_a, &ca, &aa);
        let y = ct(&from_b, &to_b, &cb, &ab);
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };

        let expected = from_a == from_b
            && to_a == to_b
            && span_overlap(&ca, &cb) >= hi
            && span_overlap(&aa, &ab) >= hi;
        prop_assert_eq!(
            transitions_aligned(&x, &y, &AlignmentParams { theta: hi }),
            expected
        );
        if transitions_aligned(&x, &y, &AlignmentParams { theta: hi }) {
            prop_assert!(
                transitions_aligned(&x, &y, &AlignmentParams { theta: lo }),
                "aligned at {hi} but not at looser {lo}"
            );
        }
    }
}

// ---------------------------------------------------------------------
// Window partitioning over randomized documents
// ---------------------------------------------------------------------

fn collect_paragraphs(node: &SectionNode, out: &mut BTreeMap<String, i64>) {
    for p in &node.paragraphs {
        *out.entry(p.clone()).or_insert(0) += 1;
    }
    for child in &node.children {
        collect_paragraphs(child, out);
    }
}

fn collect_heading_lines(node: &SectionNode, out: &mut BTreeMap<String, i64>) {
    if !node.synthetic && !node.number.is_empty() {
        *out.entry(format!("{} {}", node.number, node.title))
            .or_insert(0) += 1;
    }
    for child in &node.children {
        collect_heading_lines(child, out);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    /// Every paragraph of the section tree lands in exactly one window, and
    /// nothing else lands in any window except section heading lines.
    #[test]
    fn windows_partition_the_section_tree(
        seed in any::<u64>(),
        top in 1usize..7,
        depth in 1usize..4,
        children in 0usize..4,
        pmin in 0usize..2,
        pspan in 0usize..3,
        noise in any::<bool>(),
        max_words in prop_oneof![Just(60usize), 60usize..400, Just(3000usize)],
    ) {
        let cfg = SynthConfig {
            seed,
            top_sections: top,
            max_depth: depth,
            max_children: children,
            paragraphs_per_section: (pmin, pmin + pspan),
            sentences_per_paragraph: (1, 3),
            noise,
        };
        let doc = generate(&cfg);
        let cleaned = clean_document(&doc, &CleanRules::default()).unwrap();
        let headings = extract_section_numbers(&cleaned).unwrap();
        let tree = map_paragraphs_to_sections(&cleaned, &headings).unwrap();
        let windows = merge_windows(&tree, max_words);

        // Structural window invariants. A window may lack section numbers
        // only when it carries nothing but pre-heading (root) paragraphs.
        for (idx, w) in windows.iter().enumerate() {
            prop_assert_eq!(w.window_id as usize, idx, "ids are contiguous");
            prop_assert!(!w.text.is_empty());
            prop_assert_eq!(w.word_count, word_count(&w.text));
            if w.section_numbers.is_empty() {
                for part in w.text.split("\n\n") {
                    prop_assert!(
                        tree.paragraphs.iter().any(|p| p == part),
                        "unnumbered window holds non-preamble content: {part:?}"
                    );
                }
            }
        }

        let mut paragraphs = BTreeMap::new();
        collect_paragraphs(&tree, &mut paragraphs);
        let mut heading_lines = BTreeMap::new();
        collect_heading_lines(&tree, &mut heading_lines);

        // Count every "\n\n"-separated part across all windows.
        let mut parts: BTreeMap<String, i64> = BTreeMap::new();
        for w in &windows {
            for part in w.text.split("\n\n") {
                *parts.entry(part.to_string()).or_insert(0) += 1;
            }
        }

        // Subtract the tree's paragraphs: each must be present exactly as
        // many times as the tree holds it.
        for (paragraph, count) in &paragraphs {
            let have = parts.get_mut(paragraph.as_str());
            prop_assert!(
                have.is_some(),
                "paragraph missing from all windows: {paragraph:?}"
            );
            let have = have.unwrap();
            prop_assert!(
                *have >= *count,
                "paragraph appears {have} times in windows but {count} times in the tree: {paragraph:?}"
            );
            *have -= count;
        }

        // Whatever remains must be heading lines, each at most as often as
        // the tree carries that heading.
        for (part, count) in parts {
            if count == 0 {
                continue;
            }
            let allowed = heading_lines.get(part.as_str()).copied().unwrap_or(0);
            prop_assert!(
                count <= allowed,
                "window content is neither a tree paragraph nor a section heading: {part:?} (x{count})"
            );
        }
    }
}

// ---------------------------------------------------------------------
// Context digest budget
// ---------------------------------------------------------------------

fn state_names() -> impl Strategy<Value = Vec<StateName>> {
    prop::collection::vec("[A-Z]{1,8}(-[A-Z0-9]{1,6})?", 0..40).prop_map(|names| {
        let filter = PseudoStateFilter::default();
        names
            .iter()
            .filter_map(|n| StateName::new(n, &filter).ok())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn digest_never_exceeds_its_word_budget(
        budget in 1usize..200,
        tail in 1usize..15,
        batches in prop::collection::vec(state_names(), 1..5),
    ) {
        let mut ctx = ContextDigest::new(budget, tail);
        for batch in &batches {
            let pairs: Vec<(StateName, StateName)> = batch
                .windows(2)
                .map(|w| (w[0].clone(), w[1].clone()))
                .collect();
            ctx = update_context(ctx, batch, &pairs);
            prop_assert!(
                word_count(ctx.render()) <= budget,
                "digest exceeded {budget} words: {:?}",
                ctx.render()
            );
        }
    }
}

// ---------------------------------------------------------------------
// Clustering determinism under permutation
// ---------------------------------------------------------------------

fn candidate_pool() -> impl Strategy<Value = Vec<CandidateTransition>> {
    let states = ["A", "B", "C"];
    let conditions = [
        "when the timer expires",
        "when the timer finally expires",
        "upon attach request",
        "upon detach request",
        "on service reject",
    ];
    let actions = [
        "abort the procedure",
        "abort this procedure",
        "start registration",
        "purge the context",
    ];
    prop::collection::vec(
        (
            prop::sample::select(states.to_vec()),
            prop::sample::select(states.to_vec()),
            prop::sample::select(conditions.to_vec()),
            prop::sample::select(actions.to_vec()),
            0u32..4,
        ),
        0..8,
    )
    .prop_map(|specs| {
        specs
            .into_iter()
            .map(|(from, to, condition, action, window)| {
                let mut t = ct(from, to, condition, action);
                t.window_id = window;
                t
            })
            .collect()
    })
}

fn provider_sets() -> impl Strategy<Value = Vec<CandidateSet>> {
    prop::collection::vec(candidate_pool(), 2..5).prop_map(|pools| {
        pools
            .into_iter()
            .enumerate()
            .map(|(idx, transitions)| {
                let mut set = CandidateSet::new(format!("provider-{idx}"));
                set.transitions = transitions;
                set
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn clustering_is_invariant_under_input_permutation(sets in provider_sets()) {
        let baseline = cluster_candidates(&sets, &AlignmentParams::default());

        // Reverse provider order and each provider's candidate order.
        let mut permuted: Vec<CandidateSet> = sets.iter().cloned().rev().collect();
        for set in &mut permuted {
            set.transitions.reverse();
        }
        let shuffled = cluster_candidates(&permuted, &AlignmentParams::default());
        prop_assert_eq!(&baseline, &shuffled);

        // Each member aligns with its cluster's representative, and no
        // cluster holds two candidates from one provider.
        for cluster in &baseline {
            let providers: Vec<&str> =
                cluster.members.iter().map(|m| m.provider.as_str()).collect();
            let mut unique = providers.clone();
            unique.sort_unstable();
            unique.dedup();
            prop_assert_eq!(providers.len(), unique.len());
            prop_assert!(cluster.members.iter().any(|m| m.transition == cluster.representative));
        }

        // Every candidate ends up in exactly one cluster.
        let total: usize = baseline.iter().map(|c| c.members.len()).sum();
        let expected: usize = sets.iter().map(|s| s.transitions.len()).sum();
        prop_assert_eq!(total, expected);
    }
}

// ---------------------------------------------------------------------
// Greedy evaluation matching: structural guarantees and optimality on
// disjoint instances
// ---------------------------------------------------------------------

fn pred(from: &str, to: &str, condition: &str, action: &str) -> Transition {
    let filter = PseudoStateFilter::default();
    Transition {
        from: StateName::new(from, &filter).unwrap(),
        to: StateName::new(to, &filter).unwrap(),
        condition: condition.to_string(),
        action: action.to_string(),
        provenance: Provenance::single("p", 0, false),
    }
}

/// Maximum bipartite matching (Kuhn's algorithm) over an adjacency list
/// from predictions to truths.
fn max_matching(adjacency: &[Vec<usize>], truth_count: usize) -> usize {
    fn try_assign(
        pred: usize,
        adjacency: &[Vec<usize>],
        visited: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &truth in &adjacency[pred] {
            if visited[truth] {
                continue;
            }
            visited[truth] = true;
            if owner[truth].is_none()
                || try_assign(owner[truth].unwrap(), adjacency, visited, owner)
            {
                owner[truth] = Some(pred);
                return true;
            }
        }
        false
    }
    let mut owner: Vec<Option<usize>> = vec![None; truth_count];
    let mut size = 0;
    for pred in 0..adjacency.len() {
        let mut visited = vec![false; truth_count];
        if try_assign(pred, adjacency, &mut visited, &mut owner) {
            size += 1;
        }
    }
    size
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    /// On instances whose truths are mutually un-alignable (disjoint
    /// endpoints and vocabularies), the greedy assignment is a maximum
    /// matching; on any instance it is one-to-one, aligned, and maximal.
    #[test]
    fn greedy_matching_is_sound_and_optimal_on_disjoint_instances(
        star_sizes in prop::collection::vec(0usize..4, 1..6),
        noise in 0usize..3,
    ) {
        let mut truths = Vec::new();
        let mut predicted = Vec::new();
        for (i, &copies) in star_sizes.iter().enumerate() {
            truths.push(TruthTransition {
                from: format!("S{i}"),
                to: format!("T{i}"),
                condition: format!("trigger kind{i} alpha{i} beta{i} gamma{i}"),
                action: format!("perform task{i} delta{i}"),
                layer: None,
            });
            for _ in 0..copies {
                predicted.push(pred(
                    &format!("S{i}"),
                    &format!("T{i}"),
                    &format!("trigger kind{i} alpha{i} beta{i} gamma{i}"),
                    &format!("perform task{i} delta{i}"),
                ));
            }
        }
        for j in 0..noise {
            predicted.push(pred(
                &format!("X{j}"),
                &format!("Y{j}"),
                "unrelated words entirely",
                "unmatched action words",
            ));
        }
        let truth = GroundTruth {
            protocol: String::new(),
            spec_version: String::new(),
            states: vec![],
            transitions: truths,
        };
        let params = AlignmentParams::default();
        let partition = match_transitions(&predicted, &truth, &params);

        // One-to-one.
        let mut seen_preds = std::collections::BTreeSet::new();
        let mut seen_truths = std::collections::BTreeSet::new();
        for &(p, t) in &partition.matched {
            prop_assert!(seen_preds.insert(p));
            prop_assert!(seen_truths.insert(t));
            prop_assert!(transitions_aligned(&predicted[p], &truth.transitions[t], &params));
        }

        // Maximal: no unmatched prediction aligns with an unmatched truth.
        for &p in &partition.unmatched_predictions {
            for &t in &partition.unmatched_truths {
                prop_assert!(
                    !transitions_aligned(&predicted[p], &truth.transitions[t], &params),
                    "greedy left an alignable pair unmatched: pred {p} / truth {t}"
                );
            }
        }

        // Optimal on this disjoint family (verified against Kuhn's
        // algorithm over the full alignment graph).
        let adjacency: Vec<Vec<usize>> = predicted
            .iter()
            .map(|p| {
                truth
                    .transitions
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| transitions_aligned(p, *t, &params))
                    .map(|(idx, _)| idx)
                    .collect()
            })
            .collect();
        let optimal = max_matching(&adjacency, truth.transitions.len());
        prop_assert_eq!(partition.matched.len(), optimal);

        // Accounting: everything is matched or unmatched, never both.
        prop_assert_eq!(
            partition.matched.len() + partition.unmatched_predictions.len(),
            predicted.len()
        );
        prop_assert_eq!(
            partition.matched.len() + partition.unmatched_truths.len(),
            truth.transitions.len()
        );
    }
}
