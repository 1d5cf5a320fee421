//! Token normalization and the alias table.
//!
//! Both the system output and the human gold codings are pushed through the
//! same normalization before any comparison, so that capitalization,
//! punctuation, and abbreviation differences never count as misses.
//!
//! The chain is: Unicode compatibility normalization (NFKC), lowercase,
//! strip enclosing punctuation, collapse internal whitespace runs to a
//! single underscore, then a final alias-table lookup. The chain is
//! idempotent; the empty string is the distinguished empty token and never
//! counts as a hit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Canonical token produced by normalization when the input carries no
/// usable characters.
pub const EMPTY_TOKEN: &str = "";

#[derive(Debug, Error)]
pub enum AliasError {
    #[error("failed to read alias table {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse alias table {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("alias table is not closed: value {value:?} is itself an alias key")]
    NotClosed { value: String },
    #[error("alias key {key:?} normalizes to the empty token")]
    EmptyKey { key: String },
}

/// Mapping from normalized surface forms to their canonical token.
///
/// Keys are stored pre-normalized (without the alias step), so lookups
/// happen after the mechanical part of the chain. The table must be
/// closed: no value may itself be a key, which is what makes the full
/// chain idempotent.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AliasTable {
    entries: BTreeMap<String, String>,
}

impl AliasTable {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a table from raw (surface, canonical) pairs, normalizing the
    /// keys and checking closure.
    pub fn from_pairs<I, K, V>(pairs: I) -> Result<Self, AliasError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut entries = BTreeMap::new();
        for (k, v) in pairs {
            let key = mechanical_normalize(k.as_ref());
            if key == EMPTY_TOKEN {
                return Err(AliasError::EmptyKey {
                    key: k.as_ref().to_string(),
                });
            }
            let value = mechanical_normalize(v.as_ref());
            entries.insert(key, value);
        }
        for value in entries.values() {
            if entries.contains_key(value) {
                return Err(AliasError::NotClosed {
                    value: value.clone(),
                });
            }
        }
        Ok(Self { entries })
    }

    /// Loads a JSON object of {"surface": "canonical"} pairs.
    pub fn load(path: &Path) -> Result<Self, AliasError> {
        let text = std::fs::read_to_string(path).map_err(|source| AliasError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let raw: BTreeMap<String, String> =
            serde_json::from_str(&text).map_err(|source| AliasError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        Self::from_pairs(raw)
    }

    /// The alias table shipped with the crate: country abbreviations and
    /// common actor aliases. User tables extend or replace it.
    pub fn shipped() -> Self {
        let raw: BTreeMap<String, String> =
            serde_json::from_str(include_str!("../data/aliases.json"))
                .expect("shipped alias table parses");
        Self::from_pairs(raw).expect("shipped alias table is closed")
    }

    pub fn lookup(&self, normalized: &str) -> Option<&str> {
        self.entries.get(normalized).map(String::as_str)
    }

    pub fn is_key(&self, normalized: &str) -> bool {
        self.entries.contains_key(normalized)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// The normalization chain minus the alias lookup.
fn mechanical_normalize(raw: &str) -> String {
    let folded: String = raw.nfkc().collect::<String>().to_lowercase();
    let trimmed = folded
        .trim()
        .trim_matches(|c: char| c.is_ascii_punctuation() || (c.is_whitespace()));
    // Collapse internal whitespace runs to single underscores.
    let mut out = String::with_capacity(trimmed.len());
    let mut in_space = false;
    for c in trimmed.chars() {
        if c.is_whitespace() {
            in_space = true;
        } else {
            if in_space && !out.is_empty() {
                out.push('_');
            }
            in_space = false;
            out.push(c);
        }
    }
    out
}

/// Normalizes a raw token to its canonical form under the given alias
/// table. Idempotent: `normalize_token(normalize_token(x)) == normalize_token(x)`.
pub fn normalize_token(raw: &str, aliases: &AliasTable) -> String {
    let mechanical = mechanical_normalize(raw);
    match aliases.lookup(&mechanical) {
        Some(canonical) => canonical.to_string(),
        None => mechanical,
    }
}

/// Normalization with no alias substitution. Used when checking that a
/// codebook option's canonical form matches its display text.
pub fn normalize_bare(raw: &str) -> String {
    mechanical_normalize(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercase_only() {
        assert_eq!(normalize_token("Threat", &AliasTable::empty()), "threat");
    }

    #[test]
    fn abbreviation_alias() {
        let table = AliasTable::from_pairs([("u.s.", "usa")]).unwrap();
        assert_eq!(normalize_token("U.S.", &table), "usa");
    }

    #[test]
    fn whitespace_collapses_to_underscore() {
        assert_eq!(
            normalize_token("  express   intent ", &AliasTable::empty()),
            "express_intent"
        );
    }

    #[test]
    fn enclosing_punctuation_stripped() {
        assert_eq!(normalize_token("\"Offer.\"", &AliasTable::empty()), "offer");
    }

    #[test]
    fn empty_maps_to_empty_token() {
        assert_eq!(normalize_token("  ...  ", &AliasTable::empty()), EMPTY_TOKEN);
    }

    #[test]
    fn idempotent_on_shipped_table() {
        let table = AliasTable::shipped();
        for raw in ["U.S.", "the  U.S.S.R.", "Offer", "", "a b c", "D.C."] {
            let once = normalize_token(raw, &table);
            assert_eq!(normalize_token(&once, &table), once, "raw = {raw:?}");
        }
    }

    #[test]
    fn closure_violation_rejected() {
        let err = AliasTable::from_pairs([("us", "usa"), ("usa", "united_states")]).unwrap_err();
        assert!(matches!(err, AliasError::NotClosed { .. }));
    }
}
