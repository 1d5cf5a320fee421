//! Stage 1: narrative segmentation.
//!
//! Paragraphs are split mechanically on blank lines; sentences are split
//! by the model one paragraph at a time (splitting many paragraphs at
//! once is known to fail). Every model split is checked against the
//! verbatim-reconstruction invariant; on violation the deterministic
//! rule-based splitter takes over and the fallback is recorded.

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, CompletionBackend, CompletionRequest};
use crate::ontology::{Codebook, CodebookError, Stage};

/// One source document: a historical crisis narrative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Narrative {
    pub crisis_id: String,
    pub title: String,
    pub body: String,
}

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("narrative {crisis_id:?} has an empty body")]
    EmptyBody { crisis_id: String },
    #[error("invalid paragraph pattern {pattern:?}: {source}")]
    BadPattern {
        pattern: String,
        source: regex::Error,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
}

impl Narrative {
    pub fn new(
        crisis_id: impl Into<String>,
        title: impl Into<String>,
        body: impl Into<String>,
    ) -> Result<Self, SegmentError> {
        let crisis_id = crisis_id.into();
        let body = body.into();
        if body.trim().is_empty() {
            return Err(SegmentError::EmptyBody { crisis_id });
        }
        Ok(Self {
            crisis_id,
            title: title.into(),
            body,
        })
    }
}

/// One sentence with its segmentation coordinates. `flat_index` is the
/// running sentence number within the whole crisis, which is the unit
/// the gold codings are keyed by.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub crisis_id: String,
    pub paragraph_index: usize,
    pub sentence_index: usize,
    pub flat_index: usize,
    pub text: String,
}

/// Splits a narrative body into paragraphs on runs of blank lines,
/// trimming whitespace and dropping empty results. `pattern` overrides
/// the default delimiter regex.
pub fn split_paragraphs(body: &str, pattern: Option<&str>) -> Result<Vec<String>, SegmentError> {
    let pattern = pattern.unwrap_or(r"\n[ \t\r]*\n+");
    let re = Regex::new(pattern).map_err(|source| SegmentError::BadPattern {
        pattern: pattern.to_string(),
        source,
    })?;
    Ok(re
        .split(body)
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect())
}

/// Whitespace-normalized reconstruction: the split may reorder nothing
/// and paraphrase nothing, so the concatenated sentences must carry
/// exactly the paragraph's non-whitespace characters.
pub fn reconstructs(paragraph: &str, sentences: &[String]) -> bool {
    let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
    strip(paragraph) == strip(&sentences.join(""))
}

/// Outcome of sentence splitting one paragraph.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub sentences: Vec<String>,
    /// True when the model's split violated reconstruction and the
    /// rule-based splitter was used instead.
    pub used_fallback: bool,
}

/// Splits one paragraph into sentences with the model. The prompt asks
/// for one sentence per line; the reconstruction invariant is checked
/// and a violation falls back to [`fallback_split`].
pub fn split_sentences(
    paragraph: &str,
    backend: &dyn CompletionBackend,
    codebook: &Codebook,
    max_new_tokens: u32,
) -> Result<SplitOutcome, SegmentError> {
    let template = codebook.template_for(Stage::SentenceSplit, None)?;
    let prompt = template.fill(&[("event_text", paragraph)]);
    let request = CompletionRequest::new(prompt, "sentence_split")
        .with_max_new_tokens(max_new_tokens)
        .with_stop(vec!["\n\n".to_string()]);
    let response = backend.complete(&request)?;
    let sentences: Vec<String> = response
        .text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    if !sentences.is_empty() && reconstructs(paragraph, &sentences) {
        Ok(SplitOutcome {
            sentences,
            used_fallback: false,
        })
    } else {
        Ok(SplitOutcome {
            sentences: fallback_split(paragraph),
            used_fallback: true,
        })
    }
}

/// Abbreviations after which a period does not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "st", "gen", "col", "lt", "sgt", "capt", "adm", "gov", "sen", "rep",
    "pres", "prof", "hon", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct",
    "nov", "dec", "no", "vs", "etc", "approx", "dept", "div",
];

/// Deterministic rule-based sentence splitter: terminal punctuation
/// followed by whitespace and an uppercase letter, with an abbreviation
/// exception list. Never emits an empty sentence.
pub fn fallback_split(paragraph: &str) -> Vec<String> {
    let text = paragraph.trim();
    if text.is_empty() {
        return Vec::new();
    }
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        if c == '.' || c == '?' || c == '!' {
            // Consume closing quotes/brackets after the terminator.
            let mut end = i + 1;
            while end < chars.len() && matches!(chars[end], '"' | '\'' | ')' | ']' | '\u{201d}') {
                end += 1;
            }
            let followed_by_break = end < chars.len()
                && chars[end].is_whitespace()
                && chars[end..]
                    .iter()
                    .find(|ch| !ch.is_whitespace())
                    .map(|ch| ch.is_uppercase())
                    .unwrap_or(false);
            if followed_by_break && (c != '.' || !is_abbreviation(&chars[start..i])) {
                let sentence: String = chars[start..end].iter().collect();
                let sentence = sentence.trim().to_string();
                if !sentence.is_empty() {
                    sentences.push(sentence);
                }
                // Skip the whitespace run.
                let mut next = end;
                while next < chars.len() && chars[next].is_whitespace() {
                    next += 1;
                }
                start = next;
                i = next;
                continue;
            }
        }
        i += 1;
    }
    if start < chars.len() {
        let tail: String = chars[start..].iter().collect();
        let tail = tail.trim().to_string();
        if !tail.is_empty() {
            sentences.push(tail);
        }
    }
    sentences
}

/// Whether the word ending just before a period is a known abbreviation
/// or a single letter (initials like "D.C.").
fn is_abbreviation(before: &[char]) -> bool {
    let word: String = before
        .iter()
        .rev()
        .take_while(|c| c.is_alphanumeric() || **c == '.')
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    let last: String = word
        .rsplit('.')
        .next()
        .unwrap_or("")
        .chars()
        .collect();
    if last.chars().count() == 1 && last.chars().all(|c| c.is_alphabetic()) {
        return true;
    }
    ABBREVIATIONS.contains(&last.to_lowercase().as_str())
}

/// Segments a whole narrative: paragraphs, then sentences per paragraph.
/// Returns the sentence table plus the indices of paragraphs that needed
/// the fallback splitter.
pub fn segment_narrative(
    narrative: &Narrative,
    backend: &dyn CompletionBackend,
    codebook: &Codebook,
    paragraph_pattern: Option<&str>,
    max_new_tokens: u32,
) -> Result<(Vec<SentenceRecord>, Vec<usize>), SegmentError> {
    let paragraphs = split_paragraphs(&narrative.body, paragraph_pattern)?;
    let mut records = Vec::new();
    let mut fallbacks = Vec::new();
    let mut flat = 0usize;
    for (p_idx, paragraph) in paragraphs.iter().enumerate() {
        let outcome = split_sentences(paragraph, backend, codebook, max_new_tokens)?;
        if outcome.used_fallback {
            fallbacks.push(p_idx);
        }
        for (s_idx, text) in outcome.sentences.into_iter().enumerate() {
            records.push(SentenceRecord {
                crisis_id: narrative.crisis_id.clone(),
                paragraph_index: p_idx,
                sentence_index: s_idx,
                flat_index: flat,
                text,
            });
            flat += 1;
        }
    }
    Ok((records, fallbacks))
}
