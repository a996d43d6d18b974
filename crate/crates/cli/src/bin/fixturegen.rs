//! Development tool that (re)generates the committed toy-protocol fixture:
//! the TMM specification document, its ground truth, the run configuration,
//! and the per-provider replay fixtures. The planned responses run through
//! the real extraction pipeline, so the recorded prompt hashes are exactly
//! the ones a `specfsm run --replay` over the same inputs will ask for.
//!
//! Usage: `cargo run -p specfsm-cli --bin fixturegen -- [fixtures/toy]`

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde_json::json;

use specfsm_cli::commands;
use specfsm_cli::config::{Overrides, RunConfig};
use specfsm_cli::pipeline::segment_document;
use specfsm_core::prompting::Phase;
use specfsm_core::providers::{
    prompt_sha256, ExchangeLog, LlmExchange, Provider, ProviderError, ReplayFixture, ReplayProvider,
};
use specfsm_core::text::word_count;

const PROVIDERS: [&str; 5] = ["alpha", "bravo", "charlie", "delta", "echo"];

// ---------------------------------------------------------------------
// The document, ground truth, and configuration
// ---------------------------------------------------------------------

const DOCUMENT: &str = "\
Toy Mobility Management (TMM) protocol specification

Stage 3

3GPP TS 99.999 V1.0.0 (2026-01)
Release 1

Contents
1 Scope ................ 2
2 TMM states ................ 2
3 Registration procedures ................ 3
4 Service and deregistration procedures ................ 4

1\tScope
The present document specifies the Toy Mobility Management (TMM) protocol used by the UE to register with the toy core network. It defines the TMM states, the registration procedures, and the service procedures.

2\tTMM states
The TMM sublayer of the UE takes one of five states. The main states are described in subclause 2.1 and the substates in subclause 2.2.

2.1\tMain states of the TMM sublayer
In state TMM-NULL the TMM sublayer is inactive and no signalling is possible. TMM-NULL is the state entered when the UE is switched off.

In state TMM-DEREGISTERED no TMM context has been established and the UE is not reachable by the network.

In state TMM-REGISTERED-INITIATED the UE has started the initial registration procedure and is waiting for a response from the network.

In state TMM-REGISTERED a TMM context has been established and the UE may request services.

2.2\tSubstates of TMM-REGISTERED
When a TMM context has been established, the substate describes the service situation. In substate TMM-REGISTERED.PLMN-SEARCH the UE is searching for a suitable cell of the selected PLMN and no services are available.

3\tRegistration procedures
Registration procedures establish the TMM context between the UE and the network.

3.1\tActivation and initial registration
When the UE is switched on, the TMM sublayer shall be activated and the UE shall enter state TMM-DEREGISTERED.

If no TMM context has been established, the UE shall start the initial registration procedure, send a REGISTRATION REQUEST message, start timer T3510 and enter state TMM-REGISTERED-INITIATED.

3.2\tRegistration completion and failure
Upon receipt of a REGISTRATION ACCEPT message, the UE shall stop timer T3510, send a REGISTRATION COMPLETE message and enter state TMM-REGISTERED.

Upon the fifth expiry of timer T3510, the UE shall abort the registration procedure and enter state TMM-DEREGISTERED.

4\tService and deregistration procedures
Service procedures maintain the TMM context while the UE is registered. The UE may periodically refresh its registration as described in subclause 3.1.

4.1\tLoss and recovery of coverage
When the radio link fails, the UE shall start a PLMN search and enter substate TMM-REGISTERED.PLMN-SEARCH.

When a suitable cell is found, the UE shall resume normal service and return to state TMM-REGISTERED.

4.2\tDeregistration
Upon receipt of a DEREGISTRATION REQUEST message, the UE shall stop all running timers and enter state TMM-DEREGISTERED.

When the UE is switched off, the TMM sublayer shall be deactivated and the UE shall enter state TMM-NULL.
";

fn truth() -> serde_json::Value {
    json!({
        "protocol": "TMM",
        "spec_version": "R1",
        "states": [
            {"name": "TMM-NULL", "initial": true},
            {"name": "TMM-DEREGISTERED"},
            {"name": "TMM-REGISTERED-INITIATED"},
            {"name": "TMM-REGISTERED"},
            {"name": "TMM-REGISTERED.PLMN-SEARCH"}
        ],
        "transitions": [
            {"from": "TMM-NULL", "to": "TMM-DEREGISTERED",
             "condition": "when the UE is switched on",
             "action": "the TMM sublayer shall be activated",
             "layer": "registration"},
            {"from": "TMM-DEREGISTERED", "to": "TMM-REGISTERED-INITIATED",
             "condition": "no TMM context has been established",
             "action": "the UE shall start the initial registration procedure, send a REGISTRATION REQUEST message and start timer T3510",
             "layer": "registration"},
            {"from": "TMM-REGISTERED-INITIATED", "to": "TMM-REGISTERED",
             "condition": "upon receipt of a REGISTRATION ACCEPT message",
             "action": "the UE shall stop timer T3510 and send a REGISTRATION COMPLETE message",
             "layer": "registration"},
            {"from": "TMM-REGISTERED-INITIATED", "to": "TMM-DEREGISTERED",
             "condition": "upon the fifth expiry of timer T3510",
             "action": "the UE shall abort the registration procedure",
             "layer": "registration"},
            {"from": "TMM-REGISTERED", "to": "TMM-REGISTERED.PLMN-SEARCH",
             "condition": "when the radio link fails",
             "action": "the UE shall start a PLMN search",
             "layer": "service"},
            {"from": "TMM-REGISTERED.PLMN-SEARCH", "to": "TMM-REGISTERED",
             "condition": "when a suitable cell is found",
             "action": "the UE shall resume normal service",
             "layer": "service"},
            {"from": "TMM-REGISTERED", "to": "TMM-DEREGISTERED",
             "condition": "upon receipt of a DEREGISTRATION REQUEST message",
             "action": "the UE shall stop all running timers",
             "layer": "registration"},
            {"from": "TMM-REGISTERED", "to": "TMM-NULL",
             "condition": "when the UE is switched off",
             "action": "the TMM sublayer shall be deactivated",
             "layer": "service"}
        ]
    })
}

fn config() -> serde_json::Value {
    let provider = |name: &str, model: &str| {
        json!({
            "name": name,
            "base_url": format!("https://api.{name}.example/v1"),
            "model": model,
            "api_key_env": ""
        })
    };
    json!({
        "document": "document.txt",
        "templates": "../../templates",
        "profile": {
            "name": "TMM",
            "style": "state_oriented",
            "known_prefixes": ["TMM"],
            "layer_tags": ["registration", "service"]
        },
        "spec_version": "R1",
        "providers": [
            provider("alpha", "alpha-large"),
            provider("bravo", "bravo-chat"),
            provider("charlie", "charlie-pro"),
            provider("delta", "delta-instruct"),
            provider("echo", "echo-mini")
        ],
        "theta": 0.75,
        "truth": "truth.json"
    })
}

// ---------------------------------------------------------------------
// Planned model responses, per provider / phase / window
// ---------------------------------------------------------------------

/// Windows (by construction of the document): 0 = scope, 1 = states,
/// 2 = registration procedures, 3 = service/deregistration procedures.
const W_STATES: u32 = 1;
const W_REG: u32 = 2;
const W_SRV: u32 = 3;

fn state_object(name: &str, initial: bool, evidence: &str) -> serde_json::Value {
    let mut obj = json!({"name": name});
    if initial {
        obj["initial"] = json!(true);
    }
    if !evidence.is_empty() {
        obj["evidence"] = json!(evidence);
    }
    obj
}

fn transition_object(
    from: &str,
    to: &str,
    condition: &str,
    action: &str,
    span: &str,
    inferred: bool,
) -> serde_json::Value {
    let mut obj = json!({
        "from": from,
        "to": to,
        "condition": condition,
        "action": action,
        "span": span,
    });
    if inferred {
        obj["inferred"] = json!(true);
    }
    obj
}

/// Evidence sentences, verbatim from the document.
const EV_NULL: &str =
    "In state TMM-NULL the TMM sublayer is inactive and no signalling is possible.";
const EV_DEREG: &str =
    "In state TMM-DEREGISTERED no TMM context has been established and the UE is not reachable by the network.";
const EV_REG_INIT: &str =
    "In state TMM-REGISTERED-INITIATED the UE has started the initial registration procedure and is waiting for a response from the network.";
const EV_REG: &str =
    "In state TMM-REGISTERED a TMM context has been established and the UE may request services.";
const EV_PLMN: &str =
    "In substate TMM-REGISTERED.PLMN-SEARCH the UE is searching for a suitable cell of the selected PLMN and no services are available.";

/// Transition spans, verbatim from the document.
const SPAN_T1: &str =
    "When the UE is switched on, the TMM sublayer shall be activated and the UE shall enter state TMM-DEREGISTERED.";
const SPAN_T2: &str =
    "If no TMM context has been established, the UE shall start the initial registration procedure, send a REGISTRATION REQUEST message, start timer T3510 and enter state TMM-REGISTERED-INITIATED.";
const SPAN_T3: &str =
    "Upon receipt of a REGISTRATION ACCEPT message, the UE shall stop timer T3510, send a REGISTRATION COMPLETE message and enter state TMM-REGISTERED.";
const SPAN_T4: &str =
    "Upon the fifth expiry of timer T3510, the UE shall abort the registration procedure and enter state TMM-DEREGISTERED.";
const SPAN_T5: &str =
    "When the radio link fails, the UE shall start a PLMN search and enter substate TMM-REGISTERED.PLMN-SEARCH.";
const SPAN_T6: &str =
    "When a suitable cell is found, the UE shall resume normal service and return to state TMM-REGISTERED.";
const SPAN_T7: &str =
    "Upon receipt of a DEREGISTRATION REQUEST message, the UE shall stop all running timers and enter state TMM-DEREGISTERED.";
const SPAN_T8: &str =
    "When the UE is switched off, the TMM sublayer shall be deactivated and the UE shall enter state TMM-NULL.";

fn state_response(provider: &str) -> Vec<serde_json::Value> {
    match provider {
        "alpha" => vec![
            state_object("TMM-NULL", true, EV_NULL),
            state_object("TMM-DEREGISTERED", false, EV_DEREG),
            state_object("TMM-REGISTERED-INITIATED", false, EV_REG_INIT),
            state_object("TMM-REGISTERED", false, EV_REG),
            state_object("TMM-REGISTERED.PLMN-SEARCH", false, EV_PLMN),
        ],
        "bravo" => vec![
            state_object(
                "TMM-NULL",
                true,
                "the TMM sublayer is inactive and no signalling is possible",
            ),
            state_object(
                "TMM-DEREGISTERED",
                false,
                "no TMM context has been established and the UE is not reachable by the network",
            ),
            state_object("TMM-REGISTERED-INITIATED", false, EV_REG_INIT),
            state_object("TMM-REGISTERED", false, EV_REG),
            state_object("TMM-REGISTERED.PLMN-SEARCH", false, EV_PLMN),
        ],
        // charlie abbreviates the substate to its final component; the
        // ensemble's suffix resolution folds its vote into the full name.
        "charlie" => vec![
            state_object("TMM-NULL", true, EV_NULL),
            state_object("TMM-DEREGISTERED", false, EV_DEREG),
            state_object("TMM-REGISTERED-INITIATED", false, EV_REG_INIT),
            state_object("TMM-REGISTERED", false, EV_REG),
            state_object(
                "PLMN-SEARCH",
                false,
                "the UE is searching for a suitable cell of the selected PLMN",
            ),
        ],
        // delta invents a pseudo-state (rejected by the denylist) and
        // paraphrases one evidence quote (cleared as ungrounded).
        "delta" => vec![
            state_object("TMM-NULL", false, EV_NULL),
            state_object("TMM-DEREGISTERED", false, EV_DEREG),
            state_object("TMM-REGISTERED-INITIATED", false, EV_REG_INIT),
            state_object(
                "TMM-REGISTERED",
                false,
                "a TMM context exists and services may be requested",
            ),
            state_object("TMM-REGISTERED.PLMN-SEARCH", false, EV_PLMN),
            state_object(
                "Unknown",
                false,
                "the substate describes the service situation",
            ),
        ],
        "echo" => vec![
            state_object("TMM-NULL", false, ""),
            state_object("TMM-DEREGISTERED", false, ""),
            state_object("TMM-REGISTERED-INITIATED", false, EV_REG_INIT),
            state_object("TMM-REGISTERED", false, EV_REG),
            state_object("TMM-REGISTERED.PLMN-SEARCH", false, EV_PLMN),
        ],
        other => unreachable!("no state plan for provider {other}"),
    }
}

/// Registration-window transitions (t1–t4). Echo has no entry here: its
/// planned response is prose, exercising the parse-failure path.
fn registration_response(provider: &str) -> Vec<serde_json::Value> {
    let t = |from: &str, to: &str, c: &str, a: &str, span: &str| {
        transition_object(from, to, c, a, span, false)
    };
    match provider {
        "alpha" => vec![
            t("TMM-NULL", "TMM-DEREGISTERED", "when the UE is switched on",
              "the TMM sublayer shall be activated", SPAN_T1),
            t("TMM-DEREGISTERED", "TMM-REGISTERED-INITIATED",
              "no TMM context has been established",
              "the UE shall start the initial registration procedure, send a REGISTRATION REQUEST message and start timer T3510",
              SPAN_T2),
            t("TMM-REGISTERED-INITIATED", "TMM-REGISTERED",
              "upon receipt of a REGISTRATION ACCEPT message",
              "the UE shall stop timer T3510 and send a REGISTRATION COMPLETE message", SPAN_T3),
            t("TMM-REGISTERED-INITIATED", "TMM-DEREGISTERED",
              "upon the fifth expiry of timer T3510",
              "the UE shall abort the registration procedure", SPAN_T4),
        ],
        "bravo" => vec![
            t("TMM-NULL", "TMM-DEREGISTERED", "When the UE is switched on",
              "the TMM sublayer shall be activated immediately", SPAN_T1),
            t("TMM-DEREGISTERED", "TMM-REGISTERED-INITIATED",
              "If no TMM context has been established",
              "the UE shall start the initial registration procedure, send a REGISTRATION REQUEST message and start timer T3510",
              SPAN_T2),
            t("TMM-REGISTERED-INITIATED", "TMM-REGISTERED",
              "Upon receipt of a REGISTRATION ACCEPT message",
              "the UE shall stop timer T3510 and send a REGISTRATION COMPLETE message to the network",
              SPAN_T3),
            t("TMM-REGISTERED-INITIATED", "TMM-DEREGISTERED",
              "Upon the fifth expiry of timer T3510",
              "the UE shall abort the registration procedure", SPAN_T4),
        ],
        "charlie" => vec![
            t("TMM-NULL", "TMM-DEREGISTERED", "when the UE is switched on",
              "the TMM sublayer shall then be activated", SPAN_T1),
            t("TMM-DEREGISTERED", "TMM-REGISTERED-INITIATED",
              "no TMM context has been established",
              "the UE shall then start the initial registration procedure, send a REGISTRATION REQUEST message and start timer T3510",
              SPAN_T2),
            t("TMM-REGISTERED-INITIATED", "TMM-REGISTERED",
              "upon receipt of a REGISTRATION ACCEPT message",
              "the UE shall stop timer T3510 and send a REGISTRATION COMPLETE message", SPAN_T3),
            t("TMM-REGISTERED-INITIATED", "TMM-DEREGISTERED",
              "upon the fifth expiry of timer T3510",
              "the UE shall then abort the registration procedure", SPAN_T4),
        ],
        "delta" => vec![
            t("TMM-NULL", "TMM-DEREGISTERED", "when the UE is switched on",
              "the TMM sublayer shall be activated", SPAN_T1),
            t("TMM-DEREGISTERED", "TMM-REGISTERED-INITIATED",
              "no TMM context has been established",
              "start the initial registration procedure, send a REGISTRATION REQUEST message and start timer T3510",
              SPAN_T2),
            t("TMM-REGISTERED-INITIATED", "TMM-REGISTERED",
              "upon receipt of a REGISTRATION ACCEPT message",
              "stop timer T3510 and send a REGISTRATION COMPLETE message", SPAN_T3),
            t("TMM-REGISTERED-INITIATED", "TMM-DEREGISTERED",
              "upon the fifth expiry of timer T3510",
              "abort the registration procedure", SPAN_T4),
        ],
        other => unreachable!("no registration plan for provider {other}"),
    }
}

/// Service-window transitions (t5–t8) for all five providers, plus delta's
/// unsupported extra (a one-vote cluster the majority drops). Charlie names
/// the substate by its bare suffix; its own catalog carries the bare name,
/// so its two affected candidates stay singletons and lose the vote.
fn service_response(provider: &str) -> Vec<serde_json::Value> {
    let t = |from: &str, to: &str, c: &str, a: &str, span: &str| {
        transition_object(from, to, c, a, span, false)
    };
    match provider {
        "alpha" => vec![
            t(
                "TMM-REGISTERED",
                "TMM-REGISTERED.PLMN-SEARCH",
                "when the radio link fails",
                "the UE shall start a PLMN search",
                SPAN_T5,
            ),
            t(
                "TMM-REGISTERED.PLMN-SEARCH",
                "TMM-REGISTERED",
                "when a suitable cell is found",
                "the UE shall resume normal service",
                SPAN_T6,
            ),
            t(
                "TMM-REGISTERED",
                "TMM-DEREGISTERED",
                "upon receipt of a DEREGISTRATION REQUEST message",
                "the UE shall stop all running timers",
                SPAN_T7,
            ),
            t(
                "TMM-REGISTERED",
                "TMM-NULL",
                "when the UE is switched off",
                "the TMM sublayer shall be deactivated",
                SPAN_T8,
            ),
        ],
        "bravo" => vec![
            t(
                "TMM-REGISTERED",
                "TMM-REGISTERED.PLMN-SEARCH",
                "When the radio link fails",
                "the UE shall immediately start a PLMN search",
                SPAN_T5,
            ),
            t(
                "TMM-REGISTERED.PLMN-SEARCH",
                "TMM-REGISTERED",
                "When a suitable cell is found",
                "the UE shall resume normal service",
                SPAN_T6,
            ),
            t(
                "TMM-REGISTERED",
                "TMM-DEREGISTERED",
                "Upon receipt of a DEREGISTRATION REQUEST message",
                "the UE shall stop all of its running timers",
                SPAN_T7,
            ),
            // bravo hedges here: the span still grounds the transition, so
            // the inferred marking is cleared by the explicit majority.
            transition_object(
                "TMM-REGISTERED",
                "TMM-NULL",
                "when the UE is switched off",
                "the TMM sublayer shall be deactivated",
                SPAN_T8,
                true,
            ),
        ],
        "charlie" => vec![
            t(
                "TMM-REGISTERED",
                "PLMN-SEARCH",
                "when the radio link fails",
                "the UE shall start a PLMN search",
                SPAN_T5,
            ),
            t(
                "PLMN-SEARCH",
                "TMM-REGISTERED",
                "when a suitable cell is found",
                "the UE shall then resume normal service",
                SPAN_T6,
            ),
            t(
                "TMM-REGISTERED",
                "TMM-DEREGISTERED",
                "upon receipt of a DEREGISTRATION REQUEST message",
                "the UE shall stop all running timers",
                SPAN_T7,
            ),
            t(
                "TMM-REGISTERED",
                "TMM-NULL",
                "when the UE is switched off",
                "the TMM sublayer shall then be deactivated",
                SPAN_T8,
            ),
        ],
        "delta" => {
            vec![
            t("TMM-REGISTERED", "TMM-REGISTERED.PLMN-SEARCH", "when the radio link fails",
              "start a PLMN search", SPAN_T5),
            t("TMM-REGISTERED.PLMN-SEARCH", "TMM-REGISTERED", "when a suitable cell is found",
              "resume normal service", SPAN_T6),
            t("TMM-REGISTERED", "TMM-DEREGISTERED",
              "upon receipt of a DEREGISTRATION REQUEST message",
              "stop all running timers", SPAN_T7),
            t("TMM-REGISTERED", "TMM-NULL", "when the UE is switched off",
              "the TMM sublayer shall be deactivated", SPAN_T8),
            t("TMM-REGISTERED", "TMM-REGISTERED", "when timer T3512 expires",
              "perform a periodic registration update",
              "The UE may periodically refresh its registration as described in subclause 3.1."),
        ]
        }
        "echo" => vec![
            t(
                "TMM-REGISTERED",
                "TMM-REGISTERED.PLMN-SEARCH",
                "when the radio link fails",
                "the UE shall start a PLMN search",
                SPAN_T5,
            ),
            t(
                "TMM-REGISTERED.PLMN-SEARCH",
                "TMM-REGISTERED",
                "when a suitable cell is found",
                "the UE shall resume normal service",
                SPAN_T6,
            ),
            t(
                "TMM-REGISTERED",
                "TMM-DEREGISTERED",
                "upon receipt of a DEREGISTRATION REQUEST message",
                "the UE shall stop all running timers",
                SPAN_T7,
            ),
            t(
                "TMM-REGISTERED",
                "TMM-NULL",
                "when the UE is switched off",
                "the TMM sublayer shall be deactivated",
                SPAN_T8,
            ),
        ],
        other => unreachable!("no service plan for provider {other}"),
    }
}

/// Wraps a JSON array the way this provider tends to answer.
fn wrap(provider: &str, items: &[serde_json::Value]) -> String {
    let array = serde_json::to_string_pretty(&serde_json::Value::Array(items.to_vec()))
        .expect("planned responses serialize");
    match provider {
        "alpha" | "echo" => array,
        "bravo" => format!("```json\n{array}\n```"),
        "charlie" => format!("Here is what the excerpt defines:\n\n{array}"),
        "delta" => format!("{array}\n\nLet me know if you need anything else."),
        other => unreachable!("no wrapper for provider {other}"),
    }
}

fn plan_for(provider: &str) -> BTreeMap<(Phase, u32), String> {
    let mut plan = BTreeMap::new();
    for window in 0..4u32 {
        let states = if window == W_STATES {
            state_response(provider)
        } else if window == W_REG && provider == "alpha" {
            // alpha re-mentions a state it sees in procedure text; the
            // duplicate merges away in postprocessing.
            vec![state_object(
                "TMM-DEREGISTERED",
                false,
                "the UE shall enter state TMM-DEREGISTERED",
            )]
        } else {
            Vec::new()
        };
        plan.insert((Phase::StateExtraction, window), wrap(provider, &states));

        let response = if window == W_REG {
            if provider == "echo" {
                "The excerpt describes the registration procedures of the TMM protocol \
                 in prose form. The UE performs registration with the network."
                    .to_string()
            } else {
                wrap(provider, &registration_response(provider))
            }
        } else if window == W_SRV {
            wrap(provider, &service_response(provider))
        } else {
            wrap(provider, &[])
        };
        plan.insert((Phase::TransitionExtraction, window), response);
    }
    plan
}

// ---------------------------------------------------------------------
// The recording provider
// ---------------------------------------------------------------------

/// Serves planned responses through the real pipeline and records every
/// prompt-hash/response pair it was asked for.
struct PlanProvider {
    name: String,
    plan: BTreeMap<(Phase, u32), String>,
    recorded: Mutex<BTreeMap<String, ReplayFixture>>,
}

impl PlanProvider {
    fn new(name: &str) -> Self {
        PlanProvider {
            name: name.to_string(),
            plan: plan_for(name),
            recorded: Mutex::new(BTreeMap::new()),
        }
    }
}

impl Provider for PlanProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(
        &self,
        bundle: &specfsm_core::prompting::PromptBundle,
    ) -> Result<LlmExchange, ProviderError> {
        let response = self
            .plan
            .get(&(bundle.phase, bundle.window_id))
            .unwrap_or_else(|| {
                panic!(
                    "provider {} has no planned response for {:?} window {}",
                    self.name, bundle.phase, bundle.window_id
                )
            })
            .clone();
        let hash = prompt_sha256(&bundle.system_text, &bundle.user_text);
        let input_tokens = (word_count(&bundle.system_text) + word_count(&bundle.user_text)) as u64;
        let output_tokens = word_count(&response) as u64;
        self.recorded.lock().expect("recorder lock").insert(
            hash.clone(),
            ReplayFixture {
                response_text: response.clone(),
                input_tokens,
                output_tokens,
            },
        );
        Ok(LlmExchange {
            provider: self.name.clone(),
            prompt_sha256: hash,
            response_text: response,
            input_tokens,
            output_tokens,
            latency_ms: 0,
            attempt: 1,
            error: None,
        })
    }
}

// ---------------------------------------------------------------------
// Generation and self-check
// ---------------------------------------------------------------------

fn write(path: &Path, bytes: &[u8]) {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).expect("create fixture directories");
    }
    std::fs::write(path, bytes).unwrap_or_else(|e| panic!("write {}: {e}", path.display()));
    println!("wrote {}", path.display());
}

fn main() {
    let out_dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "fixtures/toy".to_string()),
    );

    write(&out_dir.join("document.txt"), DOCUMENT.as_bytes());
    let mut truth_bytes = serde_json::to_vec_pretty(&truth()).expect("truth serializes");
    truth_bytes.push(b'\n');
    write(&out_dir.join("truth.json"), &truth_bytes);
    let mut config_bytes = serde_json::to_vec_pretty(&config()).expect("config serializes");
    config_bytes.push(b'\n');
    write(&out_dir.join("config.json"), &config_bytes);

    let cfg = RunConfig::load(&out_dir.join("config.json"), &Overrides::default())
        .expect("generated config loads");
    let segmented = segment_document(&cfg).expect("toy document segments");
    assert_eq!(
        segmented.windows.len(),
        4,
        "the toy document is designed to produce exactly four windows"
    );

    // Record fixtures by running the planned responses through the real
    // two-phase extraction (transition prompts depend on the rolling
    // context, so only a real run asks for the right hashes).
    let providers: Vec<PlanProvider> = PROVIDERS.iter().map(|p| PlanProvider::new(p)).collect();
    let log = ExchangeLog::default();
    {
        let templates =
            specfsm_core::prompting::TemplateSet::load(&cfg.templates).expect("templates load");
        let filter = specfsm_cli::pipeline::build_filter(&cfg);
        let index = specfsm_core::prompting::SectionIndex::from_tree(&segmented.tree);
        let prompter = specfsm_core::prompting::Prompter::new(
            &templates,
            &cfg.profile,
            &index,
            specfsm_core::prompting::RefLimits::default(),
        );
        let extractor = specfsm_core::extract::Extractor::new(prompter, &filter, &log)
            .with_context(cfg.context_budget_words, cfg.context_tail);
        let refs: Vec<(&dyn Provider, usize)> =
            providers.iter().map(|p| (p as &dyn Provider, 2)).collect();
        extractor
            .run_all(&refs, &segmented.windows)
            .expect("planned extraction succeeds");
    }

    let replay_root = out_dir.join("replay");
    if replay_root.exists() {
        std::fs::remove_dir_all(&replay_root).expect("clear stale replay fixtures");
    }
    let mut total = 0usize;
    for provider in &providers {
        let dir = replay_root.join(&provider.name);
        let recorded = provider.recorded.lock().expect("recorder lock");
        for (hash, fixture) in recorded.iter() {
            ReplayProvider::store(&dir, hash, fixture)
                .unwrap_or_else(|e| panic!("store fixture {hash}: {e}"));
            total += 1;
        }
        println!(
            "recorded {} fixtures for provider {}",
            recorded.len(),
            provider.name
        );
    }
    println!("total fixtures: {total}");

    // Self-check: replay the freshly written fixtures end to end and demand
    // a perfect score against the ground truth.
    let check_out = std::env::temp_dir().join(format!("fixturegen-check-{}", std::process::id()));
    let overrides = Overrides {
        out_dir: Some(check_out.clone()),
        ..Overrides::default()
    };
    let cfg_check =
        RunConfig::load(&out_dir.join("config.json"), &overrides).expect("config reloads");
    let outputs = commands::cmd_extract(&cfg_check, Some(&replay_root)).expect("replay extracts");
    let sets = outputs.into_iter().map(|o| o.candidates).collect();
    let fsm = commands::cmd_ensemble(&cfg_check, Some(sets)).expect("ensemble votes");
    assert_eq!(fsm.state_count(), 5, "toy machine has five states");
    assert_eq!(
        fsm.transition_count(),
        8,
        "toy machine has eight transitions"
    );
    let artifact = commands::cmd_eval(&cfg_check, None).expect("evaluation runs");
    assert_eq!(artifact.transitions.f1, 1.0, "transition F1 must be exact");
    assert_eq!(artifact.states.f1, 1.0, "state F1 must be exact");
    std::fs::remove_dir_all(&check_out).ok();
    println!("self-check passed: 5 states, 8 transitions, F1 = 1.0");
}
