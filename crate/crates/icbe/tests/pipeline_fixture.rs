//! End-to-end pipeline run over the scripted fixture crisis.
//!
//! The fixture is a twelve-sentence narrative with a fully scripted
//! backend: one multi-event sentence, two compound events (one
//! thought-about-action, one speech-about-action), one forced
//! abstention, and one QA rejection. The serialized output is frozen in
//! `fixtures/expected_events.jsonl`; set `ICBE_REGEN_FIXTURES=1` to
//! regenerate it after a deliberate change.

use std::path::{Path, PathBuf};

use icbe::backend::ScriptedBackend;
use icbe::extractor::{run_pipeline, LinkKind, PipelineConfig};
use icbe::normalize::AliasTable;
use icbe::ontology::{ActorDirectory, Codebook, EventClass};
use icbe::segmenter::Narrative;
use icbe::store;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run_fixture() -> icbe::extractor::PipelineOutput {
    let body = std::fs::read_to_string(fixture("narrative.txt")).unwrap();
    let narrative = Narrative::new("carib-1962", "Caribbean Missile Confrontation", body).unwrap();
    let backend = ScriptedBackend::load(&fixture("rules.json")).unwrap();
    run_pipeline(
        &narrative,
        &Codebook::shipped(),
        &backend,
        &PipelineConfig::default(),
        &AliasTable::shipped(),
        &ActorDirectory::shipped(),
    )
    .unwrap()
}

#[test]
fn fixture_run_matches_frozen_events() {
    let output = run_fixture();
    let rendered = store::render_events(&output.events);
    let expected_path = fixture("expected_events.jsonl");
    if std::env::var("ICBE_REGEN_FIXTURES").is_ok() {
        std::fs::write(&expected_path, &rendered).unwrap();
    }
    let expected = std::fs::read_to_string(&expected_path).unwrap();
    assert_eq!(rendered, expected, "fixture output drifted from frozen file");
}

#[test]
fn fixture_structure() {
    let output = run_fixture();
    assert_eq!(output.sentences.len(), 12);
    assert_eq!(output.events.len(), 15);
    assert_eq!(output.manifest.fallback_count, 0);

    // The multi-event sentence produced two events.
    let s1: Vec<_> = output
        .events
        .iter()
        .filter(|e| e.draft.sentence_ref.flat_index == 1)
        .collect();
    assert_eq!(s1.len(), 2);
    assert_eq!(s1[0].event_class, EventClass::Say);
    assert_eq!(s1[1].event_class, EventClass::Do);

    // Sentence 0 is a thought-about-action compound pair.
    let s0: Vec<_> = output
        .events
        .iter()
        .filter(|e| e.draft.sentence_ref.flat_index == 0)
        .collect();
    assert_eq!(s0.len(), 2);
    assert_eq!(s0[0].event_class, EventClass::Think);
    assert!(!s0[0].draft.is_secondary());
    assert!(s0[1].draft.is_secondary());
    assert_eq!(s0[1].draft.link_kind, Some(LinkKind::ThoughtAbout));
    assert_eq!(s0[1].draft.parent.as_deref(), Some(s0[0].event_id.as_str()));
    assert_eq!(s0[1].event_class, EventClass::Do);
    assert_eq!(s0[1].behavior.as_deref(), Some("deployment"));

    // Sentence 5 is a speech-about-action compound pair.
    let s5: Vec<_> = output
        .events
        .iter()
        .filter(|e| e.draft.sentence_ref.flat_index == 5)
        .collect();
    assert_eq!(s5.len(), 2);
    assert_eq!(s5[0].event_class, EventClass::Say);
    assert_eq!(s5[1].draft.link_kind, Some(LinkKind::SpeechAbout));
    assert_eq!(s5[1].behavior.as_deref(), Some("withdrawal"));
}

#[test]
fn fixture_abstention_and_qa_flag() {
    let output = run_fixture();

    // The forces answer for the air-attack event is unmappable twice:
    // the node abstains rather than guessing.
    let attack = output
        .events
        .iter()
        .find(|e| e.draft.text == "Cuban forces fired on an American aircraft.")
        .unwrap();
    assert!(attack.abstentions.contains(&"forces".to_string()));
    assert!(attack.do_details.as_ref().unwrap().forces.is_none());
    assert!(!attack.qa.contains_key("forces"));
    assert!(attack.error.is_none());

    // The fatalities answer on the final withdrawal is rejected by QA
    // but kept on the record.
    let withdrawal = output
        .events
        .iter()
        .find(|e| e.draft.text.starts_with("On Nov. 1"))
        .unwrap();
    assert_eq!(
        withdrawal.do_details.as_ref().unwrap().fatalities.as_deref(),
        Some("3")
    );
    let verdict = &withdrawal.qa["fatalities"];
    assert!(!verdict.accepted);
    assert!(!verdict.qa_unavailable);

    // Aliases resolved: "U.S." became the canonical usa.
    let protest = output
        .events
        .iter()
        .find(|e| e.draft.text == "The United States protested to Cuba.")
        .unwrap();
    assert_eq!(protest.actor_a[0].canonical_name, "usa");
    assert_eq!(protest.actor_a[0].country_code.as_deref(), Some("US"));
}

#[test]
fn fixture_rerun_is_byte_identical() {
    let first = store::render_events(&run_fixture().events);
    let second = store::render_events(&run_fixture().events);
    assert_eq!(first, second);
    let a = run_fixture();
    let b = run_fixture();
    assert_eq!(a.manifest.output_digest, b.manifest.output_digest);
    assert_eq!(a.manifest.config_digest, b.manifest.config_digest);
    assert_eq!(a.manifest.run_id, b.manifest.run_id);
}
