//! Computes QA acceptance rates over the fixture pipeline output.
//!
//!     cargo run --example qa_statistics

use std::path::Path;

use icbe::backend::ScriptedBackend;
use icbe::evaluator::{qa_stats, DEFAULT_QA_ALERT_THRESHOLD};
use icbe::extractor::{run_pipeline, PipelineConfig};
use icbe::normalize::AliasTable;
use icbe::ontology::{ActorDirectory, Codebook};
use icbe::segmenter::Narrative;

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let codebook = Codebook::shipped();

    let body = std::fs::read_to_string(fixtures.join("narrative.txt")).unwrap();
    let narrative =
        Narrative::new("carib-1962", "Caribbean Missile Confrontation", body).unwrap();
    let backend = ScriptedBackend::load(&fixtures.join("rules.json")).unwrap();
    let output = run_pipeline(
        &narrative,
        &codebook,
        &backend,
        &PipelineConfig::default(),
        &AliasTable::shipped(),
        &ActorDirectory::shipped(),
    )
    .unwrap();

    let universe: Vec<String> = codebook.nodes.iter().map(|n| n.id.clone()).collect();
    let report = qa_stats(&output.events, &universe, DEFAULT_QA_ALERT_THRESHOLD);
    for (node, qa) in &report.per_node {
        println!(
            "  {node:<18} {:>2}/{:<2} accepted ({:.0}%){}",
            qa.accepted,
            qa.total,
            100.0 * qa.rate,
            if qa.flagged { "  <-- below threshold" } else { "" }
        );
    }
    println!(
        "\noverall {}/{} = {:.1}% (alert threshold {:.0}%)",
        report.overall_accepted,
        report.overall_total,
        100.0 * report.overall_rate,
        100.0 * report.threshold
    );
    if !report.not_applicable.is_empty() {
        println!("no verdicts for: {:?}", report.not_applicable);
    }
}
