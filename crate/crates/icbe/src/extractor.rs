//! Stages 2-4: event extraction.
//!
//! Each sentence is disaggregated into single-event rewritten sentences,
//! each draft is checked for a compound speech/thought-about-action and
//! split into a linked primary/secondary pair if so, and each resulting
//! event is coded node by node (class, actors, behavior, do-details)
//! with a QA pass over every answer.
//!
//! Per-item failures degrade instead of aborting: a backend failure
//! while coding leaves the event with its remaining nodes abstained and
//! an error annotation, and the run continues.

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{
    choose_option, format_options, BackendError, ChooseConfig, ChooseError, CompletionBackend,
    CompletionRequest, CompletionResponse,
};
use crate::normalize::AliasTable;
use crate::ontology::{
    Actor, ActorDirectory, AnswerMode, Codebook, CodebookError, EventClass, NodeKind, OptionLabel,
    Stage,
};
use crate::segmenter::{self, Narrative, SegmentError, SentenceRecord};
use crate::store::RunManifest;

/// Coordinates of the sentence an event came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRef {
    pub crisis_id: String,
    pub paragraph_index: usize,
    pub sentence_index: usize,
    pub flat_index: usize,
}

impl SentenceRef {
    pub fn of(record: &SentenceRecord) -> Self {
        Self {
            crisis_id: record.crisis_id.clone(),
            paragraph_index: record.paragraph_index,
            sentence_index: record.sentence_index,
            flat_index: record.flat_index,
        }
    }
}

/// How a secondary event relates to its primary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    SpeechAbout,
    ThoughtAbout,
}

/// A rewritten self-contained event sentence, before coding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventDraft {
    pub sentence_ref: SentenceRef,
    pub event_index: usize,
    pub text: String,
    /// Set iff this is the secondary (action) member of a compound pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_kind: Option<LinkKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl EventDraft {
    pub fn event_id(&self) -> String {
        let base = format!(
            "{}:{}:{}",
            self.sentence_ref.crisis_id, self.sentence_ref.flat_index, self.event_index
        );
        if self.parent.is_some() {
            format!("{base}:s")
        } else {
            base
        }
    }

    pub fn is_secondary(&self) -> bool {
        self.parent.is_some()
    }
}

/// Do-event attributes. Present iff the event is a Do event or the
/// secondary member of a compound pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoDetails {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forces: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fatalities: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub territory: Option<String>,
    /// Answers from detail nodes the shipped schema does not name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub other: BTreeMap<String, String>,
}

/// Verdict of the QA pass over one answered node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaVerdict {
    pub node_id: String,
    pub accepted: bool,
    pub raw_text: String,
    /// True when the QA call itself failed; QA is a filter, not a gate,
    /// so the answer is kept with accepted = true.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub qa_unavailable: bool,
}

/// One fully coded event record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodedEvent {
    pub event_id: String,
    pub draft: EventDraft,
    pub event_class: EventClass,
    pub actor_a: Vec<Actor>,
    pub actor_b: Vec<Actor>,
    /// Canonical behavior label; `None` iff the behavior node abstained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavior: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub do_details: Option<DoDetails>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub abstentions: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub qa: BTreeMap<String, QaVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CodedEvent {
    /// Number of scheduled nodes that received an answer (used by the
    /// densest-event filter).
    pub fn coded_node_count(&self, codebook: &Codebook) -> usize {
        let with_details = self.event_class == EventClass::Do || self.draft.is_secondary();
        let scheduled = codebook.schedule_for(self.event_class, with_details);
        scheduled
            .iter()
            .filter(|n| !self.abstentions.contains(n))
            .count()
    }

    /// Tokens this event emitted for one ontology node, for evaluation.
    pub fn tokens_for_node(&self, node_id: &str) -> Vec<String> {
        let actor_tokens = |actors: &[Actor]| {
            actors
                .iter()
                .map(|a| a.canonical_name.clone())
                .collect::<Vec<_>>()
        };
        let detail = |value: &Option<String>| value.iter().cloned().collect::<Vec<_>>();
        match node_id {
            "do_actor_a" | "say_actor_a" | "think_actor_a" => actor_tokens(&self.actor_a),
            "do_actor_b" | "say_actor_b" => actor_tokens(&self.actor_b),
            "do_behavior" | "speech_behavior" | "thought_behavior" => {
                self.behavior.iter().cloned().collect()
            }
            _ => match &self.do_details {
                Some(d) => match node_id {
                    "units" => detail(&d.units),
                    "domains" => detail(&d.domains),
                    "forces" => detail(&d.forces),
                    "fatalities" => detail(&d.fatalities),
                    "territory" => detail(&d.territory),
                    other => d.other.get(other).cloned().into_iter().collect(),
                },
                None => Vec::new(),
            },
        }
    }
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error("secondary event {id} must not be re-split")]
    ResplitSecondary { id: String },
}

/// Tunables for one pipeline run. Serialized into the run manifest's
/// config digest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Override for the paragraph delimiter regex.
    pub paragraph_pattern: Option<String>,
    /// Token budget for sentence splitting and event rewriting stages.
    pub split_max_tokens: u32,
    /// Token budget for open-ended node answers.
    pub open_max_tokens: u32,
    pub choose: ChooseConfig,
    /// Permit multiple actors per actor node. Off by default: single
    /// short answers are the tested regime.
    pub multi_actor: bool,
    pub temperature: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paragraph_pattern: None,
            split_max_tokens: 512,
            open_max_tokens: 32,
            choose: ChooseConfig::default(),
            multi_actor: false,
            temperature: 0.0,
        }
    }
}

/// Counts backend calls per stage (the part of the tag before '/').
struct TagCounter<'a> {
    inner: &'a dyn CompletionBackend,
    counts: Mutex<BTreeMap<String, u64>>,
}

impl<'a> TagCounter<'a> {
    fn new(inner: &'a dyn CompletionBackend) -> Self {
        Self {
            inner,
            counts: Mutex::new(BTreeMap::new()),
        }
    }

    fn counts(&self) -> BTreeMap<String, u64> {
        self.counts.lock().unwrap().clone()
    }

    fn total(&self) -> u64 {
        self.counts.lock().unwrap().values().sum()
    }
}

impl CompletionBackend for TagCounter<'_> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let stage = request
            .tag
            .split('/')
            .next()
            .unwrap_or("unknown")
            .to_string();
        *self.counts.lock().unwrap().entry(stage).or_insert(0) += 1;
        self.inner.complete(request)
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }
}

pub const FLAG_UNDISAGGREGATED: &str = "undisaggregated";
pub const FLAG_OVER_BUDGET: &str = "over_budget";
pub const FLAG_COMPOUND_PARSE_FAILED: &str = "compound_parse_failed";
pub const FLAG_COMPOUND_DETECT_ABSTAINED: &str = "compound_detect_abstained";

/// Disaggregates one sentence into single-event drafts. Drafts past the
/// third are kept but flagged over budget rather than truncated.
pub fn disaggregate(
    sentence: &SentenceRecord,
    context: &str,
    backend: &dyn CompletionBackend,
    codebook: &Codebook,
    config: &PipelineConfig,
) -> Result<Vec<EventDraft>, ExtractError> {
    let template = codebook.template_for(Stage::Disaggregate, None)?;
    let prompt = template.fill(&[("context", context), ("event_text", &sentence.text)]);
    let request = CompletionRequest::new(prompt, "disaggregate")
        .with_max_new_tokens(config.split_max_tokens)
        .with_temperature(config.temperature)
        .with_stop(vec!["\n\n".to_string()]);
    let response = backend.complete(&request)?;
    let lines: Vec<&str> = response
        .text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let sentence_ref = SentenceRef::of(sentence);
    if lines.is_empty() {
        return Ok(vec![EventDraft {
            sentence_ref,
            event_index: 0,
            text: sentence.text.clone(),
            parent: None,
            link_kind: None,
            flags: vec![FLAG_UNDISAGGREGATED.to_string()],
        }]);
    }
    Ok(lines
        .into_iter()
        .enumerate()
        .map(|(i, text)| EventDraft {
            sentence_ref: sentence_ref.clone(),
            event_index: i,
            text: text.to_string(),
            parent: None,
            link_kind: None,
            flags: if i > 2 {
                vec![FLAG_OVER_BUDGET.to_string()]
            } else {
                Vec::new()
            },
        })
        .collect())
}

fn compound_options() -> Vec<OptionLabel> {
    vec![
        OptionLabel::from_canonical("neither"),
        OptionLabel::from_canonical("speech_about_an_action"),
        OptionLabel::from_canonical("thought_about_an_action"),
    ]
}

/// Checks a draft for a speech/thought-about-action and, if found,
/// rewrites it into a linked primary/secondary pair. Recursion depth is
/// one: secondaries are never re-split.
pub fn split_compound(
    draft: &EventDraft,
    backend: &dyn CompletionBackend,
    codebook: &Codebook,
    config: &PipelineConfig,
) -> Result<(EventDraft, Option<EventDraft>), ExtractError> {
    if draft.is_secondary() {
        return Err(ExtractError::ResplitSecondary {
            id: draft.event_id(),
        });
    }
    let options = compound_options();
    let detect_template = codebook.template_for(Stage::CompoundDetect, None)?;
    let prompt = detect_template.fill(&[
        ("event_text", &draft.text),
        ("options", &format_options(&options)),
    ]);
    let choice = choose_option(backend, &prompt, &options, "compound_detect", &config.choose);
    let link_kind = match choice {
        Ok((0, _)) => return Ok((draft.clone(), None)),
        Ok((1, _)) => LinkKind::SpeechAbout,
        Ok((2, _)) => LinkKind::ThoughtAbout,
        Ok(_) => unreachable!("choose_option index is in range"),
        Err(ChooseError::Unmappable { .. }) => {
            let mut primary = draft.clone();
            primary
                .flags
                .push(FLAG_COMPOUND_DETECT_ABSTAINED.to_string());
            return Ok((primary, None));
        }
        Err(ChooseError::Backend(e)) => return Err(e.into()),
        Err(ChooseError::TooFewOptions { .. }) => unreachable!("three options"),
    };
    let rewrite_template = codebook.template_for(Stage::CompoundRewrite, None)?;
    let prompt = rewrite_template.fill(&[("event_text", &draft.text)]);
    let request = CompletionRequest::new(prompt, "compound_rewrite")
        .with_max_new_tokens(config.split_max_tokens)
        .with_temperature(config.temperature)
        .with_stop(vec!["\n\n".to_string()]);
    let response = backend.complete(&request)?;
    let lines: Vec<&str> = response
        .text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    if lines.len() < 2 {
        let mut primary = draft.clone();
        primary.flags.push(FLAG_COMPOUND_PARSE_FAILED.to_string());
        return Ok((primary, None));
    }
    let mut primary = draft.clone();
    primary.text = lines[0].to_string();
    let secondary = EventDraft {
        sentence_ref: draft.sentence_ref.clone(),
        event_index: draft.event_index,
        text: lines[1].to_string(),
        parent: Some(primary.event_id()),
        link_kind: Some(link_kind),
        flags: Vec::new(),
    };
    Ok((primary, Some(secondary)))
}

/// QA pass: a binary correct/incorrect multiple choice over a previous
/// answer. Failures never block the pipeline; they yield an accepted
/// verdict flagged unavailable.
pub fn qa_check(
    draft: &EventDraft,
    node_id: &str,
    question: &str,
    answer: &str,
    backend: &dyn CompletionBackend,
    codebook: &Codebook,
    config: &PipelineConfig,
) -> QaVerdict {
    let options = vec![
        OptionLabel::from_canonical("correct"),
        OptionLabel::from_canonical("incorrect"),
    ];
    let template = match codebook.template_for(Stage::Qa, Some(node_id)) {
        Ok(t) => t,
        Err(_) => {
            return QaVerdict {
                node_id: node_id.to_string(),
                accepted: true,
                raw_text: String::new(),
                qa_unavailable: true,
            }
        }
    };
    let prompt = template.fill(&[
        ("event_text", &draft.text),
        ("question", question),
        ("answer", answer),
        ("options", &format_options(&options)),
    ]);
    match choose_option(
        backend,
        &prompt,
        &options,
        &format!("qa/{node_id}"),
        &config.choose,
    ) {
        Ok((idx, raw)) => QaVerdict {
            node_id: node_id.to_string(),
            accepted: idx == 0,
            raw_text: raw,
            qa_unavailable: false,
        },
        Err(_) => QaVerdict {
            node_id: node_id.to_string(),
            accepted: true,
            raw_text: String::new(),
            qa_unavailable: true,
        },
    }
}

fn class_options() -> Vec<OptionLabel> {
    EventClass::ALL
        .iter()
        .map(|c| OptionLabel::from_canonical(c.canonical()))
        .collect()
}

/// Splits an open actor answer into actor names. Accepts comma and
/// semicolon separators plus the word "and".
fn parse_actor_answer(raw: &str, multi: bool) -> Vec<String> {
    let cleaned = raw.trim().trim_end_matches(['.', '!']);
    if cleaned.is_empty() {
        return Vec::new();
    }
    let lowered = cleaned.to_lowercase();
    if matches!(lowered.as_str(), "none" | "n/a" | "nobody" | "no one") {
        return Vec::new();
    }
    let mut names: Vec<String> = cleaned
        .replace(" and ", ",")
        .split([',', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if !multi {
        names.truncate(1);
    }
    names
}

fn parse_open_answer(raw: &str) -> Option<String> {
    let cleaned = raw.trim().trim_end_matches(['.', '!']).trim().to_string();
    if cleaned.is_empty() {
        return None;
    }
    match cleaned.to_lowercase().as_str() {
        "none" | "n/a" | "unknown" => None,
        _ => Some(cleaned),
    }
}

/// Codes one event draft across its class's node schedule. Never fails:
/// a backend error leaves the remaining nodes abstained and annotates
/// the event.
pub fn code_event(
    draft: &EventDraft,
    codebook: &Codebook,
    backend: &dyn CompletionBackend,
    config: &PipelineConfig,
    aliases: &AliasTable,
    directory: &ActorDirectory,
) -> CodedEvent {
    let mut event = CodedEvent {
        event_id: draft.event_id(),
        draft: draft.clone(),
        event_class: EventClass::Do,
        actor_a: Vec::new(),
        actor_b: Vec::new(),
        behavior: None,
        do_details: None,
        abstentions: Vec::new(),
        qa: BTreeMap::new(),
        error: None,
    };

    // Stage A: event class.
    let options = class_options();
    let class = match codebook
        .template_for(Stage::ClassSelect, None)
        .map_err(ExtractError::from)
        .and_then(|template| {
            let prompt = template.fill(&[
                ("event_text", &draft.text),
                ("options", &format_options(&options)),
            ]);
            choose_option(backend, &prompt, &options, "class_select", &config.choose).map_err(
                |e| match e {
                    ChooseError::Backend(b) => ExtractError::Backend(b),
                    other => ExtractError::Backend(BackendError::MalformedBody {
                        tag: "class_select".to_string(),
                        message: other.to_string(),
                    }),
                },
            )
        }) {
        Ok((idx, _)) => EventClass::ALL[idx],
        Err(e) => {
            // Class unknown: record the whole event as abstained. The
            // class field defaults to Do so downstream schemas stay
            // total; "event_class" in abstentions marks it unanswered.
            event.abstentions.push("event_class".to_string());
            event.error = Some(e.to_string());
            let with_details = draft.is_secondary();
            for node in codebook.schedule_for(EventClass::Do, with_details) {
                event.abstentions.push(node);
            }
            return event;
        }
    };
    event.event_class = class;

    let with_details = class == EventClass::Do || draft.is_secondary();
    if with_details {
        event.do_details = Some(DoDetails::default());
    }

    // Stage B: node schedule (actors, behavior, details).
    let schedule = codebook.schedule_for(class, with_details);
    let mut aborted = false;
    for node_id in &schedule {
        if aborted {
            event.abstentions.push(node_id.clone());
            continue;
        }
        let node = match codebook.node(node_id) {
            Ok(n) => n,
            Err(e) => {
                event.abstentions.push(node_id.clone());
                event.error = Some(e.to_string());
                continue;
            }
        };
        let template = match codebook.template_for(Stage::Elicit, Some(node_id)) {
            Ok(t) => t,
            Err(e) => {
                event.abstentions.push(node_id.clone());
                event.error = Some(e.to_string());
                continue;
            }
        };
        let answer: Option<String> = match node.answer_mode {
            AnswerMode::MultipleChoice => {
                let prompt = template.fill(&[
                    ("event_text", &draft.text),
                    ("question", &node.question),
                    ("options", &format_options(&node.options)),
                ]);
                match choose_option(
                    backend,
                    &prompt,
                    &node.options,
                    &format!("elicit/{node_id}"),
                    &config.choose,
                ) {
                    Ok((idx, _)) => Some(node.options[idx].canonical.clone()),
                    Err(ChooseError::Backend(e)) => {
                        event.error = Some(e.to_string());
                        event.abstentions.push(node_id.clone());
                        aborted = true;
                        continue;
                    }
                    Err(_) => {
                        // Unmappable after retry: abstain, never guess.
                        event.abstentions.push(node_id.clone());
                        continue;
                    }
                }
            }
            AnswerMode::OpenEnded => {
                let prompt =
                    template.fill(&[("event_text", &draft.text), ("question", &node.question)]);
                let request = CompletionRequest::new(prompt, format!("elicit/{node_id}"))
                    .with_max_new_tokens(config.open_max_tokens)
                    .with_temperature(config.temperature)
                    .with_stop(vec!["\n".to_string()]);
                match backend.complete(&request) {
                    Ok(response) => Some(response.text),
                    Err(e) => {
                        event.error = Some(e.to_string());
                        event.abstentions.push(node_id.clone());
                        aborted = true;
                        continue;
                    }
                }
            }
        };
        let Some(raw_answer) = answer else {
            continue;
        };

        // Record the answer onto the event.
        let recorded = match node.kind {
            NodeKind::ActorA | NodeKind::ActorB => {
                let names = parse_actor_answer(&raw_answer, config.multi_actor);
                let actors: Vec<Actor> = names
                    .iter()
                    .filter_map(|n| Actor::resolve(n, aliases, directory))
                    .collect();
                let target = if node.kind == NodeKind::ActorA {
                    &mut event.actor_a
                } else {
                    &mut event.actor_b
                };
                *target = actors;
                if node.kind == NodeKind::ActorA && target.is_empty() {
                    // An empty initiator answer is an abstention.
                    event.abstentions.push(node_id.clone());
                    false
                } else {
                    true
                }
            }
            NodeKind::Behavior => {
                event.behavior = Some(raw_answer.trim().to_string());
                true
            }
            NodeKind::Detail => {
                let details = event.do_details.get_or_insert_with(DoDetails::default);
                let value = parse_open_answer(&raw_answer)
                    .or_else(|| match node.answer_mode {
                        // Multiple-choice detail answers are already canonical.
                        AnswerMode::MultipleChoice => Some(raw_answer.trim().to_string()),
                        AnswerMode::OpenEnded => None,
                    });
                match value {
                    Some(v) => {
                        match node_id.as_str() {
                            "units" => details.units = Some(v),
                            "domains" => details.domains = Some(v),
                            "forces" => details.forces = Some(v),
                            "fatalities" => details.fatalities = Some(v),
                            "territory" => details.territory = Some(v),
                            other => {
                                details.other.insert(other.to_string(), v);
                            }
                        }
                        true
                    }
                    None => {
                        event.abstentions.push(node_id.clone());
                        false
                    }
                }
            }
        };

        // Stage C: QA over the recorded answer.
        if recorded {
            let verdict = qa_check(
                draft,
                node_id,
                &node.question,
                raw_answer.trim(),
                backend,
                codebook,
                config,
            );
            event.qa.insert(node_id.clone(), verdict);
        }
    }
    event
}

/// Output of one full pipeline run over a narrative.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub sentences: Vec<SentenceRecord>,
    pub events: Vec<CodedEvent>,
    pub manifest: RunManifest,
}

/// Runs the full pipeline: paragraphs, sentences, disaggregation,
/// compound splitting, coding. Only configuration errors abort;
/// per-item failures degrade and are recorded in the manifest.
pub fn run_pipeline(
    narrative: &Narrative,
    codebook: &Codebook,
    backend: &dyn CompletionBackend,
    config: &PipelineConfig,
    aliases: &AliasTable,
    directory: &ActorDirectory,
) -> Result<PipelineOutput, ExtractError> {
    let started_at = chrono::Utc::now();
    let counter = TagCounter::new(backend);

    let paragraphs =
        segmenter::split_paragraphs(&narrative.body, config.paragraph_pattern.as_deref())?;
    let mut sentences = Vec::new();
    let mut fallback_count = 0u64;
    let mut flat = 0usize;
    for (p_idx, paragraph) in paragraphs.iter().enumerate() {
        let outcome =
            match segmenter::split_sentences(paragraph, &counter, codebook, config.split_max_tokens)
            {
                Ok(outcome) => outcome,
                Err(SegmentError::Backend(_)) => segmenter::SplitOutcome {
                    sentences: segmenter::fallback_split(paragraph),
                    used_fallback: true,
                },
                Err(e) => return Err(e.into()),
            };
        if outcome.used_fallback {
            fallback_count += 1;
        }
        for (s_idx, text) in outcome.sentences.into_iter().enumerate() {
            sentences.push(SentenceRecord {
                crisis_id: narrative.crisis_id.clone(),
                paragraph_index: p_idx,
                sentence_index: s_idx,
                flat_index: flat,
                text,
            });
            flat += 1;
        }
    }

    let mut events: Vec<CodedEvent> = Vec::new();
    for sentence in &sentences {
        let context = &paragraphs[sentence.paragraph_index];
        let drafts = match disaggregate(sentence, context, &counter, codebook, config) {
            Ok(drafts) => drafts,
            Err(ExtractError::Backend(_)) => vec![EventDraft {
                sentence_ref: SentenceRef::of(sentence),
                event_index: 0,
                text: sentence.text.clone(),
                parent: None,
                link_kind: None,
                flags: vec![FLAG_UNDISAGGREGATED.to_string()],
            }],
            Err(e) => return Err(e),
        };
        for draft in drafts {
            let (primary, secondary) = match split_compound(&draft, &counter, codebook, config) {
                Ok(pair) => pair,
                Err(ExtractError::Backend(_)) => (draft.clone(), None),
                Err(e) => return Err(e),
            };
            events.push(code_event(
                &primary, codebook, &counter, config, aliases, directory,
            ));
            if let Some(secondary) = secondary {
                events.push(code_event(
                    &secondary, codebook, &counter, config, aliases, directory,
                ));
            }
        }
    }

    // Stable ordering: sentence, then event, primary before secondary.
    events.sort_by(|a, b| {
        (
            a.draft.sentence_ref.flat_index,
            a.draft.event_index,
            a.draft.is_secondary(),
        )
            .cmp(&(
                b.draft.sentence_ref.flat_index,
                b.draft.event_index,
                b.draft.is_secondary(),
            ))
    });

    let abstention_count: u64 = events.iter().map(|e| e.abstentions.len() as u64).sum();
    let manifest = RunManifest::build(
        &narrative.crisis_id,
        &codebook.version,
        &backend.identity(),
        config,
        counter.counts(),
        counter.total(),
        fallback_count,
        abstention_count,
        &events,
        started_at,
        chrono::Utc::now(),
    );
    Ok(PipelineOutput {
        sentences,
        events,
        manifest,
    })
}
