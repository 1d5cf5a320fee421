//! Renders the fixture crisis as an HTML timeline and as a plain-text
//! table.
//!
//!     cargo run --example render_report

use std::path::Path;

use icbe::backend::ScriptedBackend;
use icbe::extractor::{run_pipeline, PipelineConfig};
use icbe::normalize::AliasTable;
use icbe::ontology::{ActorDirectory, Codebook};
use icbe::reporter::{render_text_table, render_timeline, IconMap};
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

    let text = render_text_table(&narrative, &output.sentences, &output.events).unwrap();
    println!("{text}");

    let html = render_timeline(
        &narrative,
        &output.sentences,
        &output.events,
        &IconMap::default(),
    )
    .unwrap();
    let out = std::env::temp_dir().join("icbe_timeline.html");
    std::fs::write(&out, html).unwrap();
    println!("HTML timeline written to {}", out.display());
}
