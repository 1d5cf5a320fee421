//! Sentence-level event coding for crisis narratives.
//!
//! A staged prompting pipeline turns a narrative into structured event
//! records: paragraphs are split into sentences, sentences are
//! disaggregated into single-event rewrites, compound speech/thought
//! events are split into primary and secondary rows, each event is coded
//! node by node against a fixed ontology, and every answer passes a
//! binary quality gate. Alongside the pipeline live the evaluation
//! tools (token recall against consensus human codings, behavior
//! confusion matrices, QA acceptance statistics) and a static timeline
//! report renderer.
//!
//! Start with [`extractor::run_pipeline`] for coding,
//! [`evaluator::compute_recall`] for evaluation, and
//! [`reporter::render_timeline`] for reports. The `examples/` directory
//! has one runnable walkthrough per capability.

pub mod backend;
pub mod evaluator;
pub mod extractor;
pub mod normalize;
pub mod ontology;
pub mod reporter;
pub mod segmenter;
pub mod store;

pub use backend::{CompletionBackend, CompletionRequest, CompletionResponse};
pub use extractor::{run_pipeline, CodedEvent, PipelineConfig, PipelineOutput};
pub use ontology::Codebook;
pub use segmenter::Narrative;
