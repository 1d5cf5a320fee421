//! Runs the full coding pipeline over the bundled fixture crisis with a
//! scripted backend and prints the resulting event records.
//!
//!     cargo run --example code_pipeline

use std::path::Path;

use icbe::backend::ScriptedBackend;
use icbe::extractor::{run_pipeline, PipelineConfig};
use icbe::normalize::AliasTable;
use icbe::ontology::{ActorDirectory, Codebook};
use icbe::segmenter::Narrative;

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let body = std::fs::read_to_string(fixtures.join("narrative.txt")).unwrap();
    let narrative =
        Narrative::new("carib-1962", "Caribbean Missile Confrontation", body).unwrap();
    let backend = ScriptedBackend::load(&fixtures.join("rules.json")).unwrap();

    let output = run_pipeline(
        &narrative,
        &Codebook::shipped(),
        &backend,
        &PipelineConfig::default(),
        &AliasTable::shipped(),
        &ActorDirectory::shipped(),
    )
    .unwrap();

    println!(
        "{} sentences -> {} events ({} backend calls)\n",
        output.sentences.len(),
        output.events.len(),
        output.manifest.total_calls
    );
    for event in &output.events {
        let marker = if event.draft.is_secondary() { "  ↳" } else { "-" };
        println!(
            "{marker} [{}] {} | class={} behavior={} abstained={:?}",
            event.event_id,
            event.draft.text,
            event.event_class,
            event.behavior.as_deref().unwrap_or("-"),
            event.abstentions
        );
    }
    println!("\nper-stage calls: {:?}", output.manifest.stage_calls);
    println!("output digest: {}", output.manifest.output_digest);
}
