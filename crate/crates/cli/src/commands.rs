//! The pipeline stages behind each subcommand. Every stage reads and writes
//! plain files in the output directory, so stages can be re-run and mixed
//! freely; `run` chains them all.

use std::path::Path;

use specfsm_core::ensemble::{
    cluster_candidates, majority_vote, tally_states, AlignmentParams, VoteParams,
};
use specfsm_core::evalkit::{
    match_transitions, render_eval_table, score, state_score, EvalReport, GroundTruth,
};
use specfsm_core::extract::{CandidateSet, ExtractError, ProviderOutput};
use specfsm_core::fsm::Fsm;
use specfsm_core::providers::{cost_report, render_cost_table, ExchangeLog};
use specfsm_core::StateName;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::pipeline::{
    build_filter, build_providers, run_extraction, segment_document, Artifacts, Segmented,
};

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Pipeline(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path)
        .map_err(|e| CliError::Pipeline(format!("cannot read {}: {e}", path.display())))
}

/// Segments the document and writes `windows.json`; prints the window count.
pub fn cmd_segment(cfg: &RunConfig) -> Result<Segmented, CliError> {
    let artifacts = Artifacts::new(&cfg.out_dir);
    artifacts.ensure_dir()?;
    let segmented = segment_document(cfg)?;
    let json = serde_json::to_vec_pretty(&segmented.windows)
        .map_err(|e| CliError::Pipeline(format!("cannot encode windows: {e}")))?;
    write_file(&artifacts.windows(), &json)?;
    if cfg.dump {
        let mut text = String::new();
        for w in &segmented.windows {
            text.push_str(&format!(
                "=== window {} | sections {} | {} words ===\n{}\n\n",
                w.window_id,
                w.section_numbers.join(", "),
                w.word_count,
                w.text
            ));
        }
        write_file(&artifacts.windows_text(), text.as_bytes())?;
    }
    println!(
        "segmented {} into {} windows (max {} words)",
        cfg.document.display(),
        segmented.windows.len(),
        cfg.max_words
    );
    Ok(segmented)
}

/// Runs two-phase extraction against every provider; writes per-provider
/// candidate files and the exchange log. Parse failures are data, not
/// errors; provider hard failures abort with a pipeline error.
pub fn cmd_extract(
    cfg: &RunConfig,
    replay: Option<&Path>,
) -> Result<Vec<ProviderOutput>, CliError> {
    let artifacts = Artifacts::new(&cfg.out_dir);
    artifacts.ensure_dir()?;
    let segmented = segment_document(cfg)?;
    let providers = build_providers(cfg, replay)?;
    let log = ExchangeLog::default();
    let result = run_extraction(cfg, &segmented, &providers, &log);

    // The log keeps whatever traffic happened, success or not.
    if !log.is_empty() {
        log.write_jsonl(&artifacts.exchanges())
            .map_err(|e| CliError::Pipeline(format!("cannot write exchange log: {e}")))?;
    }

    let outputs = result.map_err(|e| match e {
        ExtractError::Provider(inner) => CliError::Pipeline(format!("provider failure: {inner}")),
        other => CliError::Pipeline(other.to_string()),
    })?;

    for output in &outputs {
        let json = serde_json::to_vec_pretty(output)
            .map_err(|e| CliError::Pipeline(format!("cannot encode candidates: {e}")))?;
        write_file(&artifacts.candidates(&output.provider), &json)?;
        let failures = output.candidates.parse_failures.len();
        println!(
            "provider {}: {} state candidates, {} transition candidates, {} parse failure(s)",
            output.provider,
            output.candidates.states.len(),
            output.candidates.transitions.len(),
            failures
        );
    }
    println!("exchange log: {} calls recorded", log.len());
    Ok(outputs)
}

/// Reads the per-provider candidate files back from the output directory.
fn load_candidate_sets(cfg: &RunConfig) -> Result<Vec<CandidateSet>, CliError> {
    let artifacts = Artifacts::new(&cfg.out_dir);
    let mut sets = Vec::new();
    for pc in &cfg.providers {
        let path = artifacts.candidates(&pc.name);
        let bytes = read_file(&path)?;
        let output: ProviderOutput = serde_json::from_slice(&bytes).map_err(|e| {
            CliError::Pipeline(format!("invalid candidate file {}: {e}", path.display()))
        })?;
        sets.push(output.candidates);
    }
    Ok(sets)
}

/// Clusters candidates, votes, and writes `fsm.json`; prints the counts.
pub fn cmd_ensemble(cfg: &RunConfig, sets: Option<Vec<CandidateSet>>) -> Result<Fsm, CliError> {
    let artifacts = Artifacts::new(&cfg.out_dir);
    artifacts.ensure_dir()?;
    let sets = match sets {
        Some(sets) => sets,
        None => load_candidate_sets(cfg)?,
    };
    let filter = build_filter(cfg);
    let align = AlignmentParams { theta: cfg.theta };
    let vote = VoteParams {
        ensemble_size: sets.len(),
        min_votes: cfg.votes,
    };
    let clusters = cluster_candidates(&sets, &align);
    let tallies = tally_states(&sets, &filter);
    let fsm = majority_vote(
        &clusters,
        &tallies,
        &vote,
        &cfg.profile.name,
        &cfg.spec_version,
        &filter,
    )
    .map_err(|e| CliError::Pipeline(format!("voting failed: {e}")))?;

    write_file(&artifacts.fsm(), &fsm.export_json())?;
    if cfg.dump {
        write_file(&artifacts.fsm_dot(), fsm.export_dot().as_bytes())?;
        let clusters_json = serde_json::to_vec_pretty(&clusters)
            .map_err(|e| CliError::Pipeline(format!("cannot encode clusters: {e}")))?;
        write_file(&artifacts.clusters(), &clusters_json)?;
    }
    println!(
        "ensemble of {} providers, threshold {}: {} states, {} transitions",
        vote.ensemble_size,
        vote.threshold(),
        fsm.state_count(),
        fsm.transition_count()
    );
    Ok(fsm)
}

/// The eval artifact: transition metrics plus state metrics.
#[derive(serde::Serialize, serde::Deserialize)]
pub struct EvalArtifact {
    pub transitions: EvalReport,
    pub states: EvalReport,
}

/// Scores `fsm.json` against the configured ground truth; writes `eval.json`
/// and prints both metric tables.
pub fn cmd_eval(cfg: &RunConfig, fsm_path: Option<&Path>) -> Result<EvalArtifact, CliError> {
    let artifacts = Artifacts::new(&cfg.out_dir);
    artifacts.ensure_dir()?;
    let truth_path = cfg.truth.as_ref().ok_or_else(|| {
        CliError::Eval("no ground truth configured (set \"truth\" in the config)".to_string())
    })?;
    let truth_bytes = std::fs::read(truth_path).map_err(|e| {
        CliError::Eval(format!(
            "cannot read ground truth {}: {e}",
            truth_path.display()
        ))
    })?;
    let truth = GroundTruth::from_slice(&truth_bytes)
        .map_err(|e| CliError::Eval(format!("invalid ground truth: {e}")))?;

    let fsm_file = fsm_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| artifacts.fsm());
    let fsm_bytes = std::fs::read(&fsm_file)
        .map_err(|e| CliError::Eval(format!("cannot read machine {}: {e}", fsm_file.display())))?;
    let fsm = Fsm::from_json(&fsm_bytes)
        .map_err(|e| CliError::Eval(format!("invalid machine {}: {e}", fsm_file.display())))?;

    let align = AlignmentParams { theta: cfg.theta };
    let predicted: Vec<_> = fsm.transitions().collect();
    let partition = match_transitions(&predicted, &truth, &align);
    let transition_report = score(&partition, &truth);
    let predicted_states: Vec<StateName> = fsm.states().map(|(name, _)| name.clone()).collect();
    let state_report = state_score(&predicted_states, &truth);

    let artifact = EvalArtifact {
        transitions: transition_report,
        states: state_report,
    };
    let json = serde_json::to_vec_pretty(&artifact)
        .map_err(|e| CliError::Pipeline(format!("cannot encode eval report: {e}")))?;
    write_file(&artifacts.eval(), &json)?;
    println!(
        "{}",
        render_eval_table("Transition extraction", &artifact.transitions)
    );
    println!(
        "{}",
        render_eval_table("State extraction", &artifact.states)
    );
    Ok(artifact)
}

/// Renders the per-provider token/latency table from the exchange log.
pub fn cmd_cost(cfg: &RunConfig, log_path: Option<&Path>) -> Result<String, CliError> {
    let artifacts = Artifacts::new(&cfg.out_dir);
    let path = log_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| artifacts.exchanges());
    let records = ExchangeLog::read_jsonl(&path)
        .map_err(|e| CliError::Pipeline(format!("cannot read exchange log: {e}")))?;
    let rows = cost_report(&records);
    let table = render_cost_table(&rows);
    artifacts.ensure_dir()?;
    write_file(&artifacts.cost(), table.as_bytes())?;
    println!("{table}");
    Ok(table)
}

/// The umbrella command: segment, extract, ensemble, then eval (when ground
/// truth is configured) and the cost table.
pub fn cmd_run(cfg: &RunConfig, replay: Option<&Path>) -> Result<(), CliError> {
    cmd_segment(cfg)?;
    let outputs = cmd_extract(cfg, replay)?;
    let sets = outputs.into_iter().map(|o| o.candidates).collect();
    cmd_ensemble(cfg, Some(sets))?;
    if cfg.truth.is_some() {
        cmd_eval(cfg, None)?;
    }
    cmd_cost(cfg, None)?;
    Ok(())
}
