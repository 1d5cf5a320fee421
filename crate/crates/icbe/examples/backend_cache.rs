//! Demonstrates the completion backends: a scripted double, the
//! persistent call cache around it, and the constrained multiple-choice
//! helper.
//!
//!     cargo run --example backend_cache

use icbe::backend::{
    choose_option, CachingBackend, ChooseConfig, CompletionBackend, CompletionRequest,
    ScriptedBackend, ScriptedRule,
};
use icbe::ontology::OptionLabel;

fn main() {
    let rules = vec![
        ScriptedRule::new("capital of France", "Paris"),
        ScriptedRule::new("best option", "B"),
    ];
    let scripted = ScriptedBackend::new(rules);

    let path = std::env::temp_dir().join("icbe_demo_cache.jsonl");
    let _ = std::fs::remove_file(&path);
    let backend = CachingBackend::open(scripted, &path).unwrap();

    let request = CompletionRequest::new("The capital of France is ", "demo");
    let first = backend.complete(&request).unwrap();
    let second = backend.complete(&request).unwrap();
    println!(
        "first: {:?} (cached={}), second: {:?} (cached={})",
        first.text, first.cached, second.text, second.cached
    );
    println!("hits={} misses={}", backend.hits(), backend.misses());

    let options = vec![
        OptionLabel::from_canonical("threat"),
        OptionLabel::from_canonical("offer"),
    ];
    let (idx, raw) = choose_option(
        &backend,
        "Pick the best option:\nA. threat\nB. offer\nMy answer is the single letter of the best option. That letter is ",
        &options,
        "demo/choose",
        &ChooseConfig::default(),
    )
    .unwrap();
    println!("model said {raw:?} -> option {} ({})", idx, options[idx].canonical);
    println!("cache file: {}", path.display());
}
