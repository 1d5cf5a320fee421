//! Evaluation against multi-coder gold codings: Agreed-Wide consensus
//! construction, densest-event selection, per-node token recall,
//! behavior confusion matrices, and QA acceptance statistics.
//!
//! Recall is one-directional: the probability that a token the human
//! consensus emitted for a sentence was also emitted by the system at
//! the same ontology node. Precision is deliberately not measured here.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extractor::CodedEvent;
use crate::normalize::{normalize_token, AliasTable};
use crate::ontology::{Codebook, CodebookError, EventClass};

pub use crate::normalize::normalize_bare;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoderTier {
    Expert,
    Trained,
    Novice,
}

impl CoderTier {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "expert" => Some(CoderTier::Expert),
            "trained" => Some(CoderTier::Trained),
            "novice" => Some(CoderTier::Novice),
            _ => None,
        }
    }
}

/// One coder's tokens for one (crisis, sentence, node).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldCoding {
    pub crisis_id: String,
    /// Crisis-level sentence index.
    pub sentence_index: usize,
    pub coder_id: String,
    pub coder_tier: CoderTier,
    pub node_id: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusSupport {
    /// Minimum expert votes across the kept tokens; at least 1 by the
    /// Agreed-Wide conditions.
    pub expert_votes: usize,
    /// Expert when every kept token carried an expert-tier majority,
    /// Novice otherwise.
    pub majority_tier: CoderTier,
}

/// Tokens surviving the Agreed-Wide filter for one (crisis, sentence, node).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusCoding {
    pub crisis_id: String,
    pub sentence_index: usize,
    pub node_id: String,
    /// Normalized, sorted, deduplicated.
    pub tokens: Vec<String>,
    pub support: ConsensusSupport,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct AgreedWideConfig {
    /// Pool trained coders with experts for both conditions. Off by
    /// default: trained coders count toward neither condition.
    pub pool_trained_with_experts: bool,
}

/// Applies the Agreed-Wide filter: a token survives iff at least one
/// expert voted for it and it holds a strict majority within the expert
/// tier or within the novice tier. Deterministic under input permutation.
pub fn build_agreed_wide(
    gold: &[GoldCoding],
    aliases: &AliasTable,
    config: &AgreedWideConfig,
) -> Vec<ConsensusCoding> {
    // Group votes: (crisis, sentence, node) -> token -> tier -> coder set.
    type Key = (String, usize, String);
    let mut groups: BTreeMap<Key, BTreeMap<String, BTreeMap<CoderTier, BTreeSet<String>>>> =
        BTreeMap::new();
    let mut tier_members: BTreeMap<Key, BTreeMap<CoderTier, BTreeSet<String>>> = BTreeMap::new();
    for record in gold {
        let tier = if config.pool_trained_with_experts && record.coder_tier == CoderTier::Trained {
            CoderTier::Expert
        } else {
            record.coder_tier
        };
        let key = (
            record.crisis_id.clone(),
            record.sentence_index,
            record.node_id.clone(),
        );
        tier_members
            .entry(key.clone())
            .or_default()
            .entry(tier)
            .or_default()
            .insert(record.coder_id.clone());
        for token in &record.tokens {
            let normalized = normalize_token(token, aliases);
            if normalized.is_empty() {
                continue;
            }
            groups
                .entry(key.clone())
                .or_default()
                .entry(normalized)
                .or_default()
                .entry(tier)
                .or_default()
                .insert(record.coder_id.clone());
        }
    }

    let mut out = Vec::new();
    for ((crisis_id, sentence_index, node_id), token_votes) in groups {
        let members = &tier_members[&(crisis_id.clone(), sentence_index, node_id.clone())];
        let tier_size = |tier: CoderTier| members.get(&tier).map_or(0, BTreeSet::len);
        let mut kept: Vec<(String, usize, bool)> = Vec::new();
        for (token, votes) in token_votes {
            let votes_in = |tier: CoderTier| votes.get(&tier).map_or(0, BTreeSet::len);
            let expert_votes = votes_in(CoderTier::Expert);
            if expert_votes == 0 {
                continue;
            }
            let expert_majority = 2 * expert_votes > tier_size(CoderTier::Expert);
            let novice_majority = tier_size(CoderTier::Novice) > 0
                && 2 * votes_in(CoderTier::Novice) > tier_size(CoderTier::Novice);
            if expert_majority || novice_majority {
                kept.push((token, expert_votes, expert_majority));
            }
        }
        if kept.is_empty() {
            continue;
        }
        let expert_votes = kept.iter().map(|(_, v, _)| *v).min().unwrap_or(0);
        let majority_tier = if kept.iter().all(|(_, _, em)| *em) {
            CoderTier::Expert
        } else {
            CoderTier::Novice
        };
        out.push(ConsensusCoding {
            crisis_id,
            sentence_index,
            node_id,
            tokens: kept.into_iter().map(|(t, _, _)| t).collect(),
            support: ConsensusSupport {
                expert_votes,
                majority_tier,
            },
        });
    }
    out
}

/// Picks the one event per sentence carrying the most coded information;
/// ties break to the earliest event in the sentence, primary before
/// secondary.
pub fn select_densest_event<'a>(
    events: &[&'a CodedEvent],
    codebook: &Codebook,
) -> Option<&'a CodedEvent> {
    events
        .iter()
        .min_by_key(|e| {
            (
                usize::MAX - e.coded_node_count(codebook),
                e.draft.event_index,
                e.draft.is_secondary(),
            )
        })
        .copied()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecall {
    pub hits: u64,
    pub human_tokens: u64,
    pub recall: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecallReport {
    pub per_node: BTreeMap<String, NodeRecall>,
    /// Token-weighted: total hits over total human tokens.
    pub overall: f64,
    /// Unweighted mean of per-node recalls.
    pub macro_overall: f64,
    pub sentences_covered: usize,
    /// Gold node ids not present in the codebook; excluded from scoring.
    pub unknown_nodes: Vec<String>,
}

/// Groups system events by (crisis, crisis-level sentence index) and
/// selects the densest event for each sentence.
fn select_per_sentence<'a>(
    system: &'a [CodedEvent],
    codebook: &Codebook,
) -> BTreeMap<(String, usize), &'a CodedEvent> {
    let mut by_sentence: BTreeMap<(String, usize), Vec<&CodedEvent>> = BTreeMap::new();
    for event in system {
        by_sentence
            .entry((
                event.draft.sentence_ref.crisis_id.clone(),
                event.draft.sentence_ref.flat_index,
            ))
            .or_default()
            .push(event);
    }
    by_sentence
        .into_iter()
        .filter_map(|(key, events)| select_densest_event(&events, codebook).map(|e| (key, e)))
        .collect()
}

/// Per-node token recall of the system against the consensus gold.
/// A consensus token hits iff the selected system event for that
/// sentence emitted the same normalized token at the same node.
pub fn compute_recall(
    system: &[CodedEvent],
    consensus: &[ConsensusCoding],
    codebook: &Codebook,
    aliases: &AliasTable,
) -> RecallReport {
    let known: BTreeSet<&str> = codebook.nodes.iter().map(|n| n.id.as_str()).collect();
    let selected = select_per_sentence(system, codebook);
    let mut per_node: BTreeMap<String, NodeRecall> = BTreeMap::new();
    let mut unknown_nodes = BTreeSet::new();
    let mut sentences = BTreeSet::new();
    for record in consensus {
        if !known.contains(record.node_id.as_str()) {
            unknown_nodes.insert(record.node_id.clone());
            continue;
        }
        sentences.insert((record.crisis_id.clone(), record.sentence_index));
        let system_tokens: BTreeSet<String> = selected
            .get(&(record.crisis_id.clone(), record.sentence_index))
            .map(|event| {
                event
                    .tokens_for_node(&record.node_id)
                    .iter()
                    .map(|t| normalize_token(t, aliases))
                    .collect()
            })
            .unwrap_or_default();
        let entry = per_node.entry(record.node_id.clone()).or_insert(NodeRecall {
            hits: 0,
            human_tokens: 0,
            recall: 0.0,
        });
        for token in &record.tokens {
            let token = normalize_token(token, aliases);
            if token.is_empty() {
                continue;
            }
            entry.human_tokens += 1;
            if system_tokens.contains(&token) {
                entry.hits += 1;
            }
        }
    }
    let mut total_hits = 0u64;
    let mut total_tokens = 0u64;
    for node in per_node.values_mut() {
        node.recall = if node.human_tokens == 0 {
            0.0
        } else {
            node.hits as f64 / node.human_tokens as f64
        };
        total_hits += node.hits;
        total_tokens += node.human_tokens;
    }
    let overall = if total_tokens == 0 {
        0.0
    } else {
        total_hits as f64 / total_tokens as f64
    };
    let macro_overall = if per_node.is_empty() {
        0.0
    } else {
        per_node.values().map(|n| n.recall).sum::<f64>() / per_node.len() as f64
    };
    RecallReport {
        per_node,
        overall,
        macro_overall,
        sentences_covered: sentences.len(),
        unknown_nodes: unknown_nodes.into_iter().collect(),
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error("behavior label {label:?} is outside the {class} vocabulary")]
    UnknownLabel { class: EventClass, label: String },
}

/// Behavior confusion counts for one event class. Rows are gold labels,
/// columns are system labels; only sentences where both sides assigned
/// exactly one behavior token are eligible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub event_class: EventClass,
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub eligible: u64,
    pub total_candidates: u64,
}

impl ConfusionMatrix {
    pub fn count(&self, gold: &str, system: &str) -> Option<u64> {
        let g = self.labels.iter().position(|l| l == gold)?;
        let s = self.labels.iter().position(|l| l == system)?;
        Some(self.counts[g][s])
    }

    pub fn cell_sum(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Fraction of recall-eligible sentences that enter the matrix.
    pub fn eligibility(&self) -> f64 {
        if self.total_candidates == 0 {
            0.0
        } else {
            self.eligible as f64 / self.total_candidates as f64
        }
    }

    /// Drops gold rows that appear fewer than `min_count` times. Columns
    /// keep the full label set so off-diagonal confusions stay visible;
    /// `eligible` is recomputed over the remaining cells.
    pub fn filter_min_count(&self, min_count: u64) -> PrunedConfusion {
        let keep: Vec<usize> = (0..self.labels.len())
            .filter(|&g| self.counts[g].iter().sum::<u64>() >= min_count)
            .collect();
        let counts: Vec<Vec<u64>> = keep.iter().map(|&g| self.counts[g].clone()).collect();
        let eligible = counts.iter().flatten().sum();
        PrunedConfusion {
            event_class: self.event_class,
            rows: keep.iter().map(|&g| self.labels[g].clone()).collect(),
            cols: self.labels.clone(),
            counts,
            eligible,
            total_candidates: self.total_candidates,
        }
    }
}

/// A confusion matrix after min-count row pruning: rows are the kept
/// gold labels, columns the full vocabulary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrunedConfusion {
    pub event_class: EventClass,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub eligible: u64,
    pub total_candidates: u64,
}

/// Builds the behavior confusion matrix for one event class.
///
/// A sentence is a candidate when the consensus carries at least one
/// token at the class's behavior node. It is eligible when the consensus
/// has exactly one token there and the selected system event of that
/// class also emitted exactly one behavior token.
pub fn build_confusion(
    system: &[CodedEvent],
    consensus: &[ConsensusCoding],
    event_class: EventClass,
    codebook: &Codebook,
    aliases: &AliasTable,
) -> Result<ConfusionMatrix, EvalError> {
    let behavior_node = codebook.behavior_node(event_class)?;
    let labels: Vec<String> = behavior_node
        .options
        .iter()
        .map(|o| o.canonical.clone())
        .collect();
    let index: BTreeMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();

    // Select one system event of this class per sentence.
    let class_events: Vec<CodedEvent> = system
        .iter()
        .filter(|e| e.event_class == event_class)
        .cloned()
        .collect();
    let selected = select_per_sentence(&class_events, codebook);

    let mut counts = vec![vec![0u64; labels.len()]; labels.len()];
    let mut eligible = 0u64;
    let mut total_candidates = 0u64;
    for record in consensus {
        if record.node_id != behavior_node.id || record.tokens.is_empty() {
            continue;
        }
        total_candidates += 1;
        if record.tokens.len() != 1 {
            continue;
        }
        let Some(event) = selected.get(&(record.crisis_id.clone(), record.sentence_index)) else {
            continue;
        };
        let system_tokens: Vec<String> = event
            .tokens_for_node(&behavior_node.id)
            .iter()
            .map(|t| normalize_token(t, aliases))
            .collect();
        if system_tokens.len() != 1 {
            continue;
        }
        let gold_label = normalize_token(&record.tokens[0], aliases);
        let g = *index
            .get(gold_label.as_str())
            .ok_or_else(|| EvalError::UnknownLabel {
                class: event_class,
                label: gold_label.clone(),
            })?;
        let s = *index
            .get(system_tokens[0].as_str())
            .ok_or_else(|| EvalError::UnknownLabel {
                class: event_class,
                label: system_tokens[0].clone(),
            })?;
        counts[g][s] += 1;
        eligible += 1;
    }
    Ok(ConfusionMatrix {
        event_class,
        labels,
        counts,
        eligible,
        total_candidates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeQa {
    pub accepted: u64,
    pub total: u64,
    pub rate: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QaReport {
    pub per_node: BTreeMap<String, NodeQa>,
    pub overall_accepted: u64,
    pub overall_total: u64,
    pub overall_rate: f64,
    /// Nodes that saw zero verdicts.
    pub not_applicable: Vec<String>,
    pub threshold: f64,
}

pub const DEFAULT_QA_ALERT_THRESHOLD: f64 = 0.60;

/// Acceptance rates of the QA pass, per node and overall. Verdicts
/// recorded while QA was unavailable are excluded. Nodes below the
/// alert threshold are flagged.
pub fn qa_stats(events: &[CodedEvent], node_universe: &[String], threshold: f64) -> QaReport {
    let mut per_node: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for event in events {
        for (node_id, verdict) in &event.qa {
            if verdict.qa_unavailable {
                continue;
            }
            let entry = per_node.entry(node_id.clone()).or_insert((0, 0));
            entry.1 += 1;
            if verdict.accepted {
                entry.0 += 1;
            }
        }
    }
    let mut overall_accepted = 0u64;
    let mut overall_total = 0u64;
    let mut report_nodes = BTreeMap::new();
    for (node, (accepted, total)) in &per_node {
        overall_accepted += accepted;
        overall_total += total;
        let rate = if *total == 0 {
            0.0
        } else {
            *accepted as f64 / *total as f64
        };
        report_nodes.insert(
            node.clone(),
            NodeQa {
                accepted: *accepted,
                total: *total,
                rate,
                flagged: *total > 0 && rate < threshold,
            },
        );
    }
    let not_applicable: Vec<String> = node_universe
        .iter()
        .filter(|n| !per_node.contains_key(*n))
        .cloned()
        .collect();
    QaReport {
        per_node: report_nodes,
        overall_accepted,
        overall_total,
        overall_rate: if overall_total == 0 {
            0.0
        } else {
            overall_accepted as f64 / overall_total as f64
        },
        not_applicable,
        threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::{EventDraft, QaVerdict, SentenceRef};

    fn gold(
        sentence: usize,
        coder: &str,
        tier: CoderTier,
        node: &str,
        tokens: &[&str],
    ) -> GoldCoding {
        GoldCoding {
            crisis_id: "c1".to_string(),
            sentence_index: sentence,
            coder_id: coder.to_string(),
            coder_tier: tier,
            node_id: node.to_string(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn agreed_wide_keeps_expert_plus_novice_majority() {
        let records = vec![
            gold(0, "e1", CoderTier::Expert, "do_behavior", &["attack"]),
            gold(0, "n1", CoderTier::Novice, "do_behavior", &["attack"]),
            gold(0, "n2", CoderTier::Novice, "do_behavior", &["attack"]),
        ];
        let out = build_agreed_wide(&records, &AliasTable::empty(), &AgreedWideConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].tokens, vec!["attack"]);
        assert_eq!(out[0].support.expert_votes, 1);
        assert_eq!(out[0].support.majority_tier, CoderTier::Expert);
    }

    #[test]
    fn agreed_wide_drops_token_without_expert_vote() {
        let records = vec![
            gold(0, "e1", CoderTier::Expert, "do_behavior", &["attack"]),
            gold(0, "n1", CoderTier::Novice, "do_behavior", &["blockade"]),
            gold(0, "n2", CoderTier::Novice, "do_behavior", &["blockade"]),
        ];
        let out = build_agreed_wide(&records, &AliasTable::empty(), &AgreedWideConfig::default());
        // "blockade" has a novice majority but zero expert votes;
        // "attack" has one expert vote and an expert-tier majority.
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].tokens, vec!["attack"]);
    }

    #[test]
    fn agreed_wide_is_permutation_invariant() {
        let mut records = vec![
            gold(0, "e1", CoderTier::Expert, "do_actor_a", &["usa", "cuba"]),
            gold(0, "e2", CoderTier::Expert, "do_actor_a", &["usa"]),
            gold(0, "n1", CoderTier::Novice, "do_actor_a", &["cuba"]),
            gold(0, "n2", CoderTier::Novice, "do_actor_a", &["cuba"]),
        ];
        let forward = build_agreed_wide(&records, &AliasTable::empty(), &AgreedWideConfig::default());
        records.reverse();
        let backward =
            build_agreed_wide(&records, &AliasTable::empty(), &AgreedWideConfig::default());
        assert_eq!(forward, backward);
    }

    fn event(sentence: usize, index: usize, abstained: &[&str]) -> CodedEvent {
        let codebook = Codebook::shipped();
        let draft = EventDraft {
            sentence_ref: SentenceRef {
                crisis_id: "c1".to_string(),
                paragraph_index: 0,
                sentence_index: sentence,
                flat_index: sentence,
            },
            event_index: index,
            text: "x".to_string(),
            parent: None,
            link_kind: None,
            flags: Vec::new(),
        };
        let mut e = CodedEvent {
            event_id: draft.event_id(),
            draft,
            event_class: EventClass::Do,
            actor_a: Vec::new(),
            actor_b: Vec::new(),
            behavior: Some("attack".to_string()),
            do_details: None,
            abstentions: abstained.iter().map(|s| s.to_string()).collect(),
            qa: BTreeMap::new(),
            error: None,
        };
        // Sanity: abstentions must name scheduled nodes.
        let schedule = codebook.schedule_for(EventClass::Do, true);
        for a in &e.abstentions {
            assert!(schedule.contains(a));
        }
        e.do_details = Some(Default::default());
        e
    }

    #[test]
    fn densest_event_wins_and_ties_break_low() {
        let codebook = Codebook::shipped();
        let five = event(0, 1, &[]);
        let three = event(0, 0, &["units", "domains"]);
        let events = vec![&three, &five];
        assert_eq!(
            select_densest_event(&events, &codebook).unwrap().event_id,
            five.event_id
        );
        let a = event(0, 0, &["units"]);
        let b = event(0, 1, &["units"]);
        let events = vec![&b, &a];
        assert_eq!(
            select_densest_event(&events, &codebook).unwrap().event_id,
            a.event_id
        );
    }

    #[test]
    fn recall_half_hit() {
        let codebook = Codebook::shipped();
        let mut system = event(0, 0, &[]);
        system.actor_a = vec![crate::ontology::Actor {
            canonical_name: "usa".to_string(),
            display_name: "USA".to_string(),
            country_code: None,
        }];
        let consensus = vec![ConsensusCoding {
            crisis_id: "c1".to_string(),
            sentence_index: 0,
            node_id: "do_actor_a".to_string(),
            tokens: vec!["cuba".to_string(), "usa".to_string()],
            support: ConsensusSupport {
                expert_votes: 1,
                majority_tier: CoderTier::Expert,
            },
        }];
        let report = compute_recall(&[system], &consensus, &codebook, &AliasTable::empty());
        let node = &report.per_node["do_actor_a"];
        assert_eq!(node.hits, 1);
        assert_eq!(node.human_tokens, 2);
        assert_eq!(node.recall, 0.5);
        assert_eq!(report.overall, 0.5);
    }

    #[test]
    fn recall_unknown_gold_node_is_excluded_and_listed() {
        let codebook = Codebook::shipped();
        let consensus = vec![ConsensusCoding {
            crisis_id: "c1".to_string(),
            sentence_index: 0,
            node_id: "mood".to_string(),
            tokens: vec!["happy".to_string()],
            support: ConsensusSupport {
                expert_votes: 1,
                majority_tier: CoderTier::Expert,
            },
        }];
        let report = compute_recall(&[], &consensus, &codebook, &AliasTable::empty());
        assert!(report.per_node.is_empty());
        assert_eq!(report.unknown_nodes, vec!["mood"]);
    }

    #[test]
    fn confusion_diagonal_when_system_matches_gold() {
        let codebook = Codebook::shipped();
        let mut system = Vec::new();
        let mut consensus = Vec::new();
        for (i, label) in ["attack", "blockade", "meeting"].iter().enumerate() {
            let mut e = event(i, 0, &[]);
            e.behavior = Some(label.to_string());
            system.push(e);
            consensus.push(ConsensusCoding {
                crisis_id: "c1".to_string(),
                sentence_index: i,
                node_id: "do_behavior".to_string(),
                tokens: vec![label.to_string()],
                support: ConsensusSupport {
                    expert_votes: 1,
                    majority_tier: CoderTier::Expert,
                },
            });
        }
        let matrix = build_confusion(
            &system,
            &consensus,
            EventClass::Do,
            &codebook,
            &AliasTable::empty(),
        )
        .unwrap();
        assert_eq!(matrix.eligible, 3);
        assert_eq!(matrix.total_candidates, 3);
        assert_eq!(matrix.cell_sum(), 3);
        assert_eq!(matrix.count("attack", "attack"), Some(1));
        assert_eq!(matrix.count("attack", "blockade"), Some(0));
    }

    #[test]
    fn confusion_rejects_label_outside_vocabulary() {
        let codebook = Codebook::shipped();
        let consensus = vec![ConsensusCoding {
            crisis_id: "c1".to_string(),
            sentence_index: 0,
            node_id: "do_behavior".to_string(),
            tokens: vec!["tickle".to_string()],
            support: ConsensusSupport {
                expert_votes: 1,
                majority_tier: CoderTier::Expert,
            },
        }];
        let mut e = event(0, 0, &[]);
        e.behavior = Some("attack".to_string());
        let err = build_confusion(
            &[e],
            &consensus,
            EventClass::Do,
            &codebook,
            &AliasTable::empty(),
        )
        .unwrap_err();
        match err {
            EvalError::UnknownLabel { label, .. } => assert_eq!(label, "tickle"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn qa_rates() {
        let mut events = Vec::new();
        for i in 0..100 {
            let mut e = event(i, 0, &[]);
            e.qa.insert(
                "do_behavior".to_string(),
                QaVerdict {
                    node_id: "do_behavior".to_string(),
                    accepted: i < 87,
                    raw_text: String::new(),
                    qa_unavailable: false,
                },
            );
            events.push(e);
        }
        let universe = vec!["do_behavior".to_string(), "units".to_string()];
        let report = qa_stats(&events, &universe, DEFAULT_QA_ALERT_THRESHOLD);
        assert_eq!(report.overall_rate, 0.87);
        assert_eq!(report.not_applicable, vec!["units"]);
        assert!(!report.per_node["do_behavior"].flagged);
    }

    #[test]
    fn qa_empty_input_no_division_by_zero() {
        let report = qa_stats(&[], &[], DEFAULT_QA_ALERT_THRESHOLD);
        assert_eq!(report.overall_total, 0);
        assert_eq!(report.overall_rate, 0.0);
    }
}
