//! Timeline report rendering: source sentence, rewritten events (with
//! "↳" rows for compound secondaries), and an icon-coded summary column,
//! as a self-contained HTML document or a plain-text table.
//!
//! Rendering is total: every label without a glyph falls back to its
//! display text, and a fixed input always renders byte-identically.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extractor::CodedEvent;
use crate::ontology::Actor;
use crate::segmenter::{Narrative, SentenceRecord};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("event {event_id} references sentence {flat_index} outside narrative {crisis_id}")]
    UnknownSentence {
        event_id: String,
        crisis_id: String,
        flat_index: usize,
    },
    #[error("event {event_id} belongs to crisis {event_crisis}, not {narrative_crisis}")]
    WrongCrisis {
        event_id: String,
        event_crisis: String,
        narrative_crisis: String,
    },
}

/// Glyph assignments for the summary column. All maps are fallible by
/// design; a missing entry renders as bracketed text.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IconMap {
    pub behavior_glyphs: BTreeMap<String, String>,
    pub domain_glyphs: BTreeMap<String, String>,
    pub force_glyphs: BTreeMap<String, String>,
    pub casualty_glyph: String,
    pub troops_glyph: String,
}

impl Default for IconMap {
    fn default() -> Self {
        let behaviors = [
            ("threat", "⚠️"),
            ("offer", "🤝"),
            ("appeal", "🙏"),
            ("promise", "🤞"),
            ("accusation", "👉"),
            ("ultimatum", "⏳"),
            ("attack", "💥"),
            ("battle_clash", "⚔️"),
            ("bombardment", "💣"),
            ("mobilization", "🪖"),
            ("deployment", "📦"),
            ("blockade", "🚧"),
            ("invasion_occupation", "🏴"),
            ("withdrawal", "↩️"),
            ("ceasefire", "🕊️"),
            ("meeting", "🪑"),
            ("discussion", "💬"),
            ("discovery", "🔍"),
            ("fear", "😨"),
            ("crisis_start", "🔔"),
            ("crisis_end", "🔕"),
            ("convinced", "💡"),
        ];
        let domains = [("ground", "🟫"), ("sea", "🌊"), ("air", "☁️")];
        let forces = [
            ("troops", "🪖"),
            ("missiles", "🚀"),
            ("aircraft", "✈️"),
            ("ships", "🚢"),
            ("nuclear_weapons", "☢️"),
            ("unarmed", "🕊️"),
        ];
        let to_map = |pairs: &[(&str, &str)]| {
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect()
        };
        Self {
            behavior_glyphs: to_map(&behaviors),
            domain_glyphs: to_map(&domains),
            force_glyphs: to_map(&forces),
            casualty_glyph: "☠️".to_string(),
            troops_glyph: "💂".to_string(),
        }
    }
}

/// Emoji flag from an ISO-3166 alpha-2 code via regional indicators.
fn flag_glyph(code: &str) -> Option<String> {
    if code.len() != 2 || !code.chars().all(|c| c.is_ascii_alphabetic()) {
        return None;
    }
    code.chars()
        .map(|c| char::from_u32(0x1F1E6 + (c.to_ascii_uppercase() as u32 - 'A' as u32)))
        .collect::<Option<String>>()
}

fn actor_glyph(actor: &Actor) -> String {
    actor
        .country_code
        .as_deref()
        .and_then(flag_glyph)
        .unwrap_or_else(|| format!("[{}]", actor.display_name))
}

fn is_nonzero(value: &str) -> bool {
    match value.trim().parse::<f64>() {
        Ok(n) => n > 0.0,
        Err(_) => !matches!(value.trim().to_lowercase().as_str(), "" | "0" | "none" | "zero"),
    }
}

/// Summary column: initiator flags, behavior glyph, target flags, then
/// do-detail glyphs (domain, forces, troop and casualty markers).
fn icon_summary(event: &CodedEvent, icons: &IconMap) -> String {
    let mut parts: Vec<String> = Vec::new();
    for actor in &event.actor_a {
        parts.push(actor_glyph(actor));
    }
    if let Some(behavior) = &event.behavior {
        parts.push(
            icons
                .behavior_glyphs
                .get(behavior)
                .cloned()
                .unwrap_or_else(|| format!("[{behavior}]")),
        );
    }
    for actor in &event.actor_b {
        parts.push(actor_glyph(actor));
    }
    if let Some(details) = &event.do_details {
        if let Some(domain) = &details.domains {
            parts.push(
                icons
                    .domain_glyphs
                    .get(domain)
                    .cloned()
                    .unwrap_or_else(|| format!("[{domain}]")),
            );
        }
        if let Some(force) = &details.forces {
            parts.push(
                icons
                    .force_glyphs
                    .get(force)
                    .cloned()
                    .unwrap_or_else(|| format!("[{force}]")),
            );
        }
        if details.units.as_deref().map(is_nonzero).unwrap_or(false) {
            parts.push(icons.troops_glyph.clone());
        }
        if details
            .fatalities
            .as_deref()
            .map(is_nonzero)
            .unwrap_or(false)
        {
            parts.push(icons.casualty_glyph.clone());
        }
    }
    parts.join(" ")
}

fn bracket_summary(event: &CodedEvent) -> String {
    let mut parts: Vec<String> = Vec::new();
    for actor in &event.actor_a {
        parts.push(format!("[{}]", actor.canonical_name));
    }
    if let Some(behavior) = &event.behavior {
        parts.push(format!("[{behavior}]"));
    }
    for actor in &event.actor_b {
        parts.push(format!("[{}]", actor.canonical_name));
    }
    if let Some(details) = &event.do_details {
        for value in [
            &details.domains,
            &details.forces,
            &details.units,
            &details.fatalities,
            &details.territory,
        ]
        .into_iter()
        .flatten()
        {
            parts.push(format!("[{value}]"));
        }
    }
    parts.join("")
}

fn sentence_text<'a>(
    sentences: &'a [SentenceRecord],
    event: &CodedEvent,
    narrative: &Narrative,
) -> Result<&'a str, ReportError> {
    let sref = &event.draft.sentence_ref;
    if sref.crisis_id != narrative.crisis_id {
        return Err(ReportError::WrongCrisis {
            event_id: event.event_id.clone(),
            event_crisis: sref.crisis_id.clone(),
            narrative_crisis: narrative.crisis_id.clone(),
        });
    }
    sentences
        .iter()
        .find(|s| s.crisis_id == sref.crisis_id && s.flat_index == sref.flat_index)
        .map(|s| s.text.as_str())
        .ok_or_else(|| ReportError::UnknownSentence {
            event_id: event.event_id.clone(),
            crisis_id: sref.crisis_id.clone(),
            flat_index: sref.flat_index,
        })
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders the three-column timeline as a self-contained HTML document:
/// one row per event in pipeline order, secondary events on an
/// immediately following row leading with "↳".
pub fn render_timeline(
    narrative: &Narrative,
    sentences: &[SentenceRecord],
    events: &[CodedEvent],
    icons: &IconMap,
) -> Result<String, ReportError> {
    let mut rows = String::new();
    let mut last_flat: Option<usize> = None;
    for event in events {
        let source = sentence_text(sentences, event, narrative)?;
        let flat = event.draft.sentence_ref.flat_index;
        let source_cell = if last_flat == Some(flat) {
            String::new()
        } else {
            html_escape(source)
        };
        last_flat = Some(flat);
        let prefix = if event.draft.is_secondary() {
            "↳ "
        } else {
            ""
        };
        rows.push_str(&format!(
            "    <tr class=\"{}\"><td class=\"src\">{}</td><td class=\"evt\">{}{}</td><td class=\"icons\">{}</td></tr>\n",
            if event.draft.is_secondary() {
                "secondary"
            } else {
                "primary"
            },
            source_cell,
            prefix,
            html_escape(&event.draft.text),
            icon_summary(event, icons),
        ));
    }
    Ok(format!(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>{title}</title>\n<style>\n\
         body {{ font-family: sans-serif; margin: 2em; }}\n\
         table {{ border-collapse: collapse; width: 100%; }}\n\
         td {{ border: 1px solid #ccc; padding: 0.4em 0.6em; vertical-align: top; }}\n\
         td.src {{ width: 40%; color: #333; }}\n\
         td.evt {{ width: 40%; }}\n\
         td.icons {{ width: 20%; font-size: 1.2em; }}\n\
         tr.secondary td.evt {{ padding-left: 1.6em; color: #555; }}\n\
         </style>\n</head>\n<body>\n<h1>{title}</h1>\n<table>\n\
         <tr><th>Source</th><th>Events</th><th>Coding</th></tr>\n{rows}</table>\n</body>\n</html>\n",
        title = html_escape(&narrative.title),
        rows = rows,
    ))
}

/// Monospace fallback of the timeline: glyphs replaced by bracketed
/// labels, secondary rows prefixed with "↳".
pub fn render_text_table(
    narrative: &Narrative,
    sentences: &[SentenceRecord],
    events: &[CodedEvent],
) -> Result<String, ReportError> {
    let mut out = String::new();
    out.push_str(&format!("== {} ({}) ==\n", narrative.title, narrative.crisis_id));
    out.push_str("SOURCE | EVENT | CODING\n");
    let mut last_flat: Option<usize> = None;
    for event in events {
        let source = sentence_text(sentences, event, narrative)?;
        let flat = event.draft.sentence_ref.flat_index;
        let source_cell = if last_flat == Some(flat) { "" } else { source };
        last_flat = Some(flat);
        let prefix = if event.draft.is_secondary() {
            "↳ "
        } else {
            ""
        };
        out.push_str(&format!(
            "{} | {}{} | {}\n",
            source_cell,
            prefix,
            event.draft.text,
            bracket_summary(event),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::{DoDetails, EventDraft, LinkKind, SentenceRef};
    use crate::ontology::EventClass;

    fn narrative() -> Narrative {
        Narrative::new("c1", "Fixture Crisis", "The US mobilized. Others watched.").unwrap()
    }

    fn sentences() -> Vec<SentenceRecord> {
        vec![SentenceRecord {
            crisis_id: "c1".to_string(),
            paragraph_index: 0,
            sentence_index: 0,
            flat_index: 0,
            text: "The US mobilized its army against Cuba.".to_string(),
        }]
    }

    fn do_event() -> CodedEvent {
        let draft = EventDraft {
            sentence_ref: SentenceRef {
                crisis_id: "c1".to_string(),
                paragraph_index: 0,
                sentence_index: 0,
                flat_index: 0,
            },
            event_index: 0,
            text: "The United States mobilized its army against Cuba.".to_string(),
            parent: None,
            link_kind: None,
            flags: Vec::new(),
        };
        CodedEvent {
            event_id: draft.event_id(),
            draft,
            event_class: EventClass::Do,
            actor_a: vec![Actor {
                canonical_name: "usa".to_string(),
                display_name: "US".to_string(),
                country_code: Some("US".to_string()),
            }],
            actor_b: vec![Actor {
                canonical_name: "cuba".to_string(),
                display_name: "Cuba".to_string(),
                country_code: Some("CU".to_string()),
            }],
            behavior: Some("mobilization".to_string()),
            do_details: Some(DoDetails {
                domains: Some("ground".to_string()),
                forces: Some("troops".to_string()),
                fatalities: Some("0".to_string()),
                ..Default::default()
            }),
            abstentions: Vec::new(),
            qa: Default::default(),
            error: None,
        }
    }

    #[test]
    fn text_table_row_dumps_fields() {
        let out = render_text_table(&narrative(), &sentences(), &[do_event()]).unwrap();
        assert!(out.contains("[usa][mobilization][cuba][ground][troops]"), "{out}");
    }

    #[test]
    fn zero_fatalities_shows_no_skull() {
        let icons = IconMap::default();
        let summary = icon_summary(&do_event(), &icons);
        assert!(!summary.contains(&icons.casualty_glyph), "{summary}");
        let mut event = do_event();
        event.do_details.as_mut().unwrap().fatalities = Some("40".to_string());
        let summary = icon_summary(&event, &icons);
        assert!(summary.contains(&icons.casualty_glyph), "{summary}");
    }

    #[test]
    fn secondary_rows_lead_with_arrow() {
        let primary = do_event();
        let mut secondary = do_event();
        secondary.draft.parent = Some(primary.event_id.clone());
        secondary.draft.link_kind = Some(LinkKind::ThoughtAbout);
        secondary.event_id = secondary.draft.event_id();
        let html =
            render_timeline(&narrative(), &sentences(), &[primary.clone(), secondary.clone()], &IconMap::default())
                .unwrap();
        assert_eq!(html.matches("↳ ").count(), 1);
        let text = render_text_table(&narrative(), &sentences(), &[primary, secondary]).unwrap();
        assert_eq!(text.matches("↳ ").count(), 1);
    }

    #[test]
    fn actor_without_country_code_falls_back_to_text() {
        let mut event = do_event();
        event.actor_a[0].country_code = None;
        event.actor_a[0].display_name = "Soviet Union".to_string();
        let html =
            render_timeline(&narrative(), &sentences(), &[event], &IconMap::default()).unwrap();
        assert!(html.contains("[Soviet Union]"));
    }

    #[test]
    fn event_outside_narrative_errors() {
        let mut event = do_event();
        event.draft.sentence_ref.flat_index = 99;
        assert!(matches!(
            render_timeline(&narrative(), &sentences(), &[event], &IconMap::default()),
            Err(ReportError::UnknownSentence { .. })
        ));
    }

    #[test]
    fn rendering_is_deterministic() {
        let a = render_timeline(&narrative(), &sentences(), &[do_event()], &IconMap::default())
            .unwrap();
        let b = render_timeline(&narrative(), &sentences(), &[do_event()], &IconMap::default())
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_event_list_renders_header_only() {
        let out = render_text_table(&narrative(), &sentences(), &[]).unwrap();
        assert!(out.ends_with("SOURCE | EVENT | CODING\n"));
    }
}
