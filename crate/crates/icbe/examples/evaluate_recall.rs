//! Ingests multi-coder gold codings, builds the Agreed-Wide consensus,
//! and scores the fixture pipeline output against it.
//!
//!     cargo run --example evaluate_recall

use std::path::Path;

use icbe::backend::ScriptedBackend;
use icbe::evaluator::{build_agreed_wide, compute_recall, AgreedWideConfig};
use icbe::extractor::{run_pipeline, PipelineConfig};
use icbe::normalize::AliasTable;
use icbe::ontology::{ActorDirectory, Codebook};
use icbe::segmenter::Narrative;
use icbe::store::{ingest_gold, GoldMapping};

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let aliases = AliasTable::shipped();
    let codebook = Codebook::shipped();

    // Gold side: raw per-coder rows -> consensus codings.
    let mapping = GoldMapping::load(&fixtures.join("gold_mapping.json")).unwrap();
    let (gold, dropped) = ingest_gold(&fixtures.join("gold.csv"), &mapping).unwrap();
    println!("{} gold rows ({} dropped)", gold.len(), dropped.len());
    let consensus = build_agreed_wide(&gold, &aliases, &AgreedWideConfig::default());
    for c in &consensus {
        println!(
            "  consensus s{} {}: {:?} (expert votes >= {})",
            c.sentence_index, c.node_id, c.tokens, c.support.expert_votes
        );
    }

    // System side: the scripted fixture run.
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

    let report = compute_recall(&output.events, &consensus, &codebook, &aliases);
    println!();
    for (node, r) in &report.per_node {
        println!("  {node:<18} {:>2}/{:<2} = {:.2}", r.hits, r.human_tokens, r.recall);
    }
    println!(
        "\noverall (token-weighted) {:.3}, macro mean {:.3}, {} sentences",
        report.overall, report.macro_overall, report.sentences_covered
    );
}
