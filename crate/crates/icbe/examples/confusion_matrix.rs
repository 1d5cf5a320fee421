//! Builds the Do-behavior confusion matrix for the fixture crisis and
//! shows min-count row pruning.
//!
//!     cargo run --example confusion_matrix

use std::path::Path;

use icbe::backend::ScriptedBackend;
use icbe::evaluator::{build_agreed_wide, build_confusion, AgreedWideConfig};
use icbe::extractor::{run_pipeline, PipelineConfig};
use icbe::normalize::AliasTable;
use icbe::ontology::{ActorDirectory, Codebook, EventClass};
use icbe::segmenter::Narrative;
use icbe::store::{ingest_gold, GoldMapping};

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let aliases = AliasTable::shipped();
    let codebook = Codebook::shipped();

    let mapping = GoldMapping::load(&fixtures.join("gold_mapping.json")).unwrap();
    let (gold, _) = ingest_gold(&fixtures.join("gold.csv"), &mapping).unwrap();
    let consensus = build_agreed_wide(&gold, &aliases, &AgreedWideConfig::default());

    let body = std::fs::read_to_string(fixtures.join("narrative.txt")).unwrap();
    let narrative =
        Narrative::new("carib-1962", "Caribbean Missile Confrontation", body).unwrap();
    let backend = ScriptedBackend::load(&fixtures.join("rules.json")).unwrap();
    let output = run_pipeline(
        &narrative,
        &codebook,
        &backend,
        &PipelineConfig::default(),
        &aliases,
        &ActorDirectory::shipped(),
    )
    .unwrap();

    let matrix = build_confusion(
        &output.events,
        &consensus,
        EventClass::Do,
        &codebook,
        &aliases,
    )
    .unwrap();
    println!(
        "eligible {} of {} candidate sentences ({:.1}%)",
        matrix.eligible,
        matrix.total_candidates,
        100.0 * matrix.eligibility()
    );
    // With the default pruning threshold every sparse fixture row would
    // vanish; use 1 to show the populated cells.
    let pruned = matrix.filter_min_count(1);
    for (row, counts) in pruned.rows.iter().zip(&pruned.counts) {
        let cells: Vec<String> = counts
            .iter()
            .zip(&pruned.cols)
            .filter(|(n, _)| **n > 0)
            .map(|(n, col)| format!("{col}={n}"))
            .collect();
        println!("  gold {row:<12} -> {}", cells.join(", "));
    }
}
