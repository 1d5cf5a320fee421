//! The event ontology as data: event classes, coding nodes, option
//! vocabularies, and the prompt templates that drive every stage.
//!
//! Everything that controls what gets asked of the model lives in the
//! codebook file, so the ontology can be revised without touching code.
//! The default codebook ships with the crate and carries the twelve core
//! coding nodes (actor, behavior, and do-detail questions for the Think,
//! Say, and Do classes).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::{normalize_bare, normalize_token, AliasTable};

/// The three overarching classes of events. Every coded event carries
/// exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventClass {
    Think,
    Say,
    Do,
}

impl EventClass {
    pub const ALL: [EventClass; 3] = [EventClass::Think, EventClass::Say, EventClass::Do];

    pub fn canonical(&self) -> &'static str {
        match self {
            EventClass::Think => "think",
            EventClass::Say => "say",
            EventClass::Do => "do",
        }
    }

    pub fn from_canonical(s: &str) -> Option<Self> {
        match s {
            "think" => Some(EventClass::Think),
            "say" => Some(EventClass::Say),
            "do" => Some(EventClass::Do),
            _ => None,
        }
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical())
    }
}

/// What role a node plays in describing an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    ActorA,
    ActorB,
    Behavior,
    Detail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerMode {
    MultipleChoice,
    OpenEnded,
}

/// One answer option of a multiple-choice node.
///
/// `canonical` must be the normalized form of `display`; this is checked
/// at codebook load so vocabulary labels and evaluation tokens can never
/// drift apart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OptionLabel {
    pub canonical: String,
    pub display: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

impl OptionLabel {
    /// Builds an option from its canonical token; the display text is the
    /// canonical with underscores replaced by spaces.
    pub fn from_canonical(canonical: &str) -> Self {
        Self {
            canonical: canonical.to_string(),
            display: canonical.replace('_', " "),
            aliases: Vec::new(),
        }
    }
}

// Codebook files may spell an option as a bare canonical string or as the
// full object.
impl<'de> Deserialize<'de> for OptionLabel {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Shorthand(String),
            Full {
                canonical: String,
                display: String,
                #[serde(default)]
                aliases: Vec<String>,
            },
        }
        match Raw::deserialize(deserializer)? {
            Raw::Shorthand(s) => Ok(OptionLabel::from_canonical(&s)),
            Raw::Full {
                canonical,
                display,
                aliases,
            } => Ok(OptionLabel {
                canonical,
                display,
                aliases,
            }),
        }
    }
}

/// One coding question of the ontology.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OntologyNode {
    pub id: String,
    pub display: String,
    pub event_class: EventClass,
    pub kind: NodeKind,
    pub answer_mode: AnswerMode,
    /// Question text substituted into prompt templates.
    pub question: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<OptionLabel>,
    /// Core nodes are the evaluated part of the ontology; non-core nodes
    /// (territory) are coded but reported separately.
    #[serde(default = "default_true")]
    pub core: bool,
}

fn default_true() -> bool {
    true
}

/// Pipeline stages that consume a prompt template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    SentenceSplit,
    Disaggregate,
    CompoundDetect,
    CompoundRewrite,
    ClassSelect,
    Elicit,
    Qa,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::SentenceSplit => "sentence_split",
            Stage::Disaggregate => "disaggregate",
            Stage::CompoundDetect => "compound_detect",
            Stage::CompoundRewrite => "compound_rewrite",
            Stage::ClassSelect => "class_select",
            Stage::Elicit => "elicit",
            Stage::Qa => "qa",
        }
    }

    /// Stages whose answer is mapped onto a fixed option set. Templates
    /// bound to these must pre-draft the answer.
    pub fn is_multiple_choice(&self) -> bool {
        matches!(
            self,
            Stage::CompoundDetect | Stage::ClassSelect | Stage::Qa
        )
    }
}

/// A prompt with its question side and the pre-drafted opening of the
/// model's answer. Placeholders: `{context}`, `{event_text}`, `{question}`,
/// `{options}`, `{answer}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub question_part: String,
    pub answer_drafting_part: String,
}

impl PromptTemplate {
    pub fn fill(&self, slots: &[(&str, &str)]) -> String {
        let mut text = format!("{}{}", self.question_part, self.answer_drafting_part);
        for (name, value) in slots {
            text = text.replace(&format!("{{{name}}}"), value);
        }
        text
    }
}

/// Associates a template with a stage, optionally for one specific node.
/// Lookup prefers the node-specific binding and falls back to the stage
/// default.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateBinding {
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    pub template: String,
}

#[derive(Debug, Error)]
pub enum CodebookError {
    #[error("failed to read codebook {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse codebook {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("empty ontology: codebook {path} declares no nodes")]
    EmptyOntology { path: String },
    #[error("duplicate node id {id:?} in codebook {path}")]
    DuplicateNode { path: String, id: String },
    #[error("node {node:?}: duplicate option {option:?} (after normalization)")]
    DuplicateOption { node: String, option: String },
    #[error("node {node:?}: option {option:?} display {display:?} does not normalize to its canonical")]
    CanonicalMismatch {
        node: String,
        option: String,
        display: String,
    },
    #[error("node {node:?}: multiple_choice requires at least 2 options, found {count}")]
    TooFewOptions { node: String, count: usize },
    #[error("node {node:?}: open_ended node must not declare options")]
    OpenEndedWithOptions { node: String },
    #[error("binding for stage {stage:?} references unknown node {node:?}")]
    UnknownBoundNode { stage: String, node: String },
    #[error("binding for stage {stage:?} references unknown template {template:?}")]
    UnknownTemplate { stage: String, template: String },
    #[error("duplicate template id {id:?}")]
    DuplicateTemplate { id: String },
    #[error("template {id:?} is bound to multiple-choice stage {stage:?} but has an empty answer_drafting_part")]
    MissingAnswerDrafting { id: String, stage: String },
    #[error("no template bound for stage {stage:?}")]
    NoTemplateForStage { stage: String },
    #[error("unknown node id {id:?}")]
    UnknownNode { id: String },
    #[error("event class {class} has no behavior node")]
    NoBehaviorNode { class: EventClass },
}

/// The full data-driven ontology: nodes, vocabularies, and templates.
/// Immutable after load; safe for shared concurrent reads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Codebook {
    pub version: String,
    pub nodes: Vec<OntologyNode>,
    pub templates: Vec<PromptTemplate>,
    pub bindings: Vec<TemplateBinding>,
}

impl Codebook {
    /// Loads and validates a codebook file.
    pub fn load(path: &Path) -> Result<Self, CodebookError> {
        let text = std::fs::read_to_string(path).map_err(|source| CodebookError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// The codebook shipped with the crate.
    pub fn shipped() -> Self {
        Self::from_json(include_str!("../data/codebook.json"), "<shipped>")
            .expect("shipped codebook validates")
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self, CodebookError> {
        let book: Codebook =
            serde_json::from_str(text).map_err(|source| CodebookError::Parse {
                path: origin.to_string(),
                source,
            })?;
        book.validate(origin)?;
        Ok(book)
    }

    /// Canonical serialization: pretty JSON with a trailing newline.
    /// `save(load(f))` is byte-stable under re-load.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("codebook serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), std::io::Error> {
        std::fs::write(path, self.to_canonical_json())
    }

    fn validate(&self, origin: &str) -> Result<(), CodebookError> {
        if self.nodes.is_empty() {
            return Err(CodebookError::EmptyOntology {
                path: origin.to_string(),
            });
        }
        let mut ids = BTreeSet::new();
        for node in &self.nodes {
            if !ids.insert(node.id.clone()) {
                return Err(CodebookError::DuplicateNode {
                    path: origin.to_string(),
                    id: node.id.clone(),
                });
            }
            match node.answer_mode {
                AnswerMode::MultipleChoice => {
                    if node.options.len() < 2 {
                        return Err(CodebookError::TooFewOptions {
                            node: node.id.clone(),
                            count: node.options.len(),
                        });
                    }
                }
                AnswerMode::OpenEnded => {
                    if !node.options.is_empty() {
                        return Err(CodebookError::OpenEndedWithOptions {
                            node: node.id.clone(),
                        });
                    }
                }
            }
            let mut seen = BTreeSet::new();
            for opt in &node.options {
                if normalize_bare(&opt.display) != opt.canonical {
                    return Err(CodebookError::CanonicalMismatch {
                        node: node.id.clone(),
                        option: opt.canonical.clone(),
                        display: opt.display.clone(),
                    });
                }
                let mut forms = vec![opt.canonical.clone()];
                forms.extend(opt.aliases.iter().map(|a| normalize_bare(a)));
                for form in forms {
                    if !seen.insert(form.clone()) {
                        return Err(CodebookError::DuplicateOption {
                            node: node.id.clone(),
                            option: form,
                        });
                    }
                }
            }
        }
        let mut template_ids = BTreeSet::new();
        for t in &self.templates {
            if !template_ids.insert(t.id.as_str()) {
                return Err(CodebookError::DuplicateTemplate { id: t.id.clone() });
            }
        }
        for b in &self.bindings {
            if let Some(node) = &b.node {
                if !ids.contains(node) {
                    return Err(CodebookError::UnknownBoundNode {
                        stage: b.stage.name().to_string(),
                        node: node.clone(),
                    });
                }
            }
            if !template_ids.contains(b.template.as_str()) {
                return Err(CodebookError::UnknownTemplate {
                    stage: b.stage.name().to_string(),
                    template: b.template.clone(),
                });
            }
            if b.stage.is_multiple_choice() {
                let t = self
                    .templates
                    .iter()
                    .find(|t| t.id == b.template)
                    .expect("checked above");
                if t.answer_drafting_part.trim().is_empty() {
                    return Err(CodebookError::MissingAnswerDrafting {
                        id: t.id.clone(),
                        stage: b.stage.name().to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn node(&self, id: &str) -> Result<&OntologyNode, CodebookError> {
        self.nodes
            .iter()
            .find(|n| n.id == id)
            .ok_or_else(|| CodebookError::UnknownNode { id: id.to_string() })
    }

    /// The node's options in codebook order; empty iff open-ended.
    pub fn options_for(&self, node_id: &str) -> Result<&[OptionLabel], CodebookError> {
        Ok(&self.node(node_id)?.options)
    }

    /// Behavior vocabulary of an event class, read off its behavior node.
    pub fn behavior_vocab(&self, class: EventClass) -> Result<&[OptionLabel], CodebookError> {
        self.nodes
            .iter()
            .find(|n| n.event_class == class && n.kind == NodeKind::Behavior)
            .map(|n| n.options.as_slice())
            .ok_or(CodebookError::NoBehaviorNode { class })
    }

    pub fn behavior_node(&self, class: EventClass) -> Result<&OntologyNode, CodebookError> {
        self.nodes
            .iter()
            .find(|n| n.event_class == class && n.kind == NodeKind::Behavior)
            .ok_or(CodebookError::NoBehaviorNode { class })
    }

    /// Resolves the template for a stage, preferring a node-specific
    /// binding over the stage default.
    pub fn template_for(
        &self,
        stage: Stage,
        node_id: Option<&str>,
    ) -> Result<&PromptTemplate, CodebookError> {
        let binding = self
            .bindings
            .iter()
            .find(|b| b.stage == stage && b.node.as_deref() == node_id)
            .or_else(|| {
                self.bindings
                    .iter()
                    .find(|b| b.stage == stage && b.node.is_none())
            })
            .ok_or_else(|| CodebookError::NoTemplateForStage {
                stage: stage.name().to_string(),
            })?;
        Ok(self
            .templates
            .iter()
            .find(|t| t.id == binding.template)
            .expect("validated at load"))
    }

    /// Node ids scheduled for an event class, in elicitation order:
    /// actors, then behavior, then do-details.
    pub fn schedule_for(&self, class: EventClass, with_do_details: bool) -> Vec<String> {
        let mut out = Vec::new();
        let class_nodes = |kind: NodeKind| {
            self.nodes
                .iter()
                .filter(move |n| n.event_class == class && n.kind == kind)
                .map(|n| n.id.clone())
        };
        out.extend(class_nodes(NodeKind::ActorA));
        if class != EventClass::Think {
            out.extend(class_nodes(NodeKind::ActorB));
        }
        out.extend(class_nodes(NodeKind::Behavior));
        if with_do_details {
            out.extend(
                self.nodes
                    .iter()
                    .filter(|n| n.event_class == EventClass::Do && n.kind == NodeKind::Detail)
                    .map(|n| n.id.clone()),
            );
        }
        out
    }
}

/// A named participant in an event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Actor {
    pub canonical_name: String,
    pub display_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country_code: Option<String>,
}

impl Actor {
    /// Resolves a raw surface form against the alias table and country
    /// directory. Returns `None` when the name normalizes to nothing.
    pub fn resolve(raw: &str, aliases: &AliasTable, directory: &ActorDirectory) -> Option<Actor> {
        let canonical = normalize_token(raw, aliases);
        if canonical.is_empty() {
            return None;
        }
        Some(Actor {
            country_code: directory.country_code(&canonical).map(str::to_string),
            canonical_name: canonical,
            display_name: raw.trim().to_string(),
        })
    }
}

/// Maps canonical actor names to ISO-3166 alpha-2 codes for flag
/// rendering. Actors without a code fall back to their display text.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActorDirectory {
    entries: BTreeMap<String, String>,
}

impl ActorDirectory {
    pub fn shipped() -> Self {
        serde_json::from_str(include_str!("../data/actors.json"))
            .expect("shipped actor directory parses")
    }

    pub fn load(path: &Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn country_code(&self, canonical: &str) -> Option<&str> {
        self.entries.get(canonical).map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_codebook_has_twelve_core_nodes() {
        let book = Codebook::shipped();
        let core: Vec<&str> = book
            .nodes
            .iter()
            .filter(|n| n.core)
            .map(|n| n.id.as_str())
            .collect();
        assert_eq!(core.len(), 12, "core nodes: {core:?}");
        for id in [
            "do_actor_a",
            "do_actor_b",
            "do_behavior",
            "say_actor_a",
            "say_actor_b",
            "speech_behavior",
            "think_actor_a",
            "thought_behavior",
            "units",
            "domains",
            "forces",
            "fatalities",
        ] {
            assert!(core.contains(&id), "missing core node {id}");
        }
    }

    #[test]
    fn thought_vocab_has_twelve_entries() {
        let book = Codebook::shipped();
        assert_eq!(book.behavior_vocab(EventClass::Think).unwrap().len(), 12);
    }

    #[test]
    fn thought_vocab_names_the_expected_behaviors() {
        let book = Codebook::shipped();
        let vocab: Vec<&str> = book
            .behavior_vocab(EventClass::Think)
            .unwrap()
            .iter()
            .map(|o| o.canonical.as_str())
            .collect();
        for expected in [
            "crisis_start",
            "crisis_end",
            "fear",
            "convinced",
            "discovery",
            "policy",
        ] {
            assert!(vocab.contains(&expected), "missing {expected}");
        }
    }

    #[test]
    fn speech_vocab_covers_named_behaviors() {
        let book = Codebook::shipped();
        let vocab: Vec<&str> = book
            .behavior_vocab(EventClass::Say)
            .unwrap()
            .iter()
            .map(|o| o.canonical.as_str())
            .collect();
        for expected in [
            "appeal",
            "offer",
            "disapproval",
            "accusation",
            "rejection",
            "express_intent",
            "ultimatum",
            "threat",
            "promise",
        ] {
            assert!(vocab.contains(&expected), "missing {expected}");
        }
    }

    #[test]
    fn units_is_open_ended() {
        let book = Codebook::shipped();
        let node = book.node("units").unwrap();
        assert_eq!(node.answer_mode, AnswerMode::OpenEnded);
        assert!(book.options_for("units").unwrap().is_empty());
    }

    #[test]
    fn unknown_node_errors() {
        let book = Codebook::shipped();
        assert!(matches!(
            book.options_for("Mood"),
            Err(CodebookError::UnknownNode { .. })
        ));
    }

    #[test]
    fn empty_ontology_rejected() {
        let err = Codebook::from_json(
            r#"{"version":"1","nodes":[],"templates":[],"bindings":[]}"#,
            "<test>",
        )
        .unwrap_err();
        assert!(matches!(err, CodebookError::EmptyOntology { .. }));
    }

    #[test]
    fn duplicate_thought_option_rejected() {
        let mut book = Codebook::shipped();
        let node = book
            .nodes
            .iter_mut()
            .find(|n| n.id == "thought_behavior")
            .unwrap();
        node.options.push(OptionLabel::from_canonical("discovery"));
        let text = serde_json::to_string(&book).unwrap();
        let err = Codebook::from_json(&text, "<test>").unwrap_err();
        match err {
            CodebookError::DuplicateOption { node, option } => {
                assert_eq!(node, "thought_behavior");
                assert_eq!(option, "discovery");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn canonical_roundtrip_is_byte_stable() {
        let book = Codebook::shipped();
        let first = book.to_canonical_json();
        let reloaded = Codebook::from_json(&first, "<roundtrip>").unwrap();
        assert_eq!(first, reloaded.to_canonical_json());
    }

    #[test]
    fn schedule_orders_actors_before_behavior_before_details() {
        let book = Codebook::shipped();
        let schedule = book.schedule_for(EventClass::Do, true);
        let pos = |id: &str| schedule.iter().position(|n| n == id).unwrap();
        assert!(pos("do_actor_a") < pos("do_behavior"));
        assert!(pos("do_actor_b") < pos("do_behavior"));
        assert!(pos("do_behavior") < pos("domains"));
        let think = book.schedule_for(EventClass::Think, false);
        assert_eq!(think, vec!["think_actor_a", "thought_behavior"]);
    }
}
