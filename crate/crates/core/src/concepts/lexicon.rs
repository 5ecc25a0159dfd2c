use std::collections::HashMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{normalize_surface, ConceptType};

/// Identifier of the key normalization applied by [`Lexicon`].
pub const NORMALIZATION_ID: &str = "lowercase-word-tokens";

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("failed to read lexicon {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("lexicon entry `{key}` is listed as both {first} and {second}")]
    Ambiguous {
        key: String,
        first: ConceptType,
        second: ConceptType,
    },
    #[error("lexicon entry `{0}` has no word characters")]
    EmptyKey(String),
    #[error("lexicon is empty")]
    Empty,
}

/// Surface form to concept type, keyed by normalized token sequence.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: HashMap<String, ConceptType>,
    max_key_tokens: usize,
}

impl Lexicon {
    pub fn from_entries(
        entries: impl IntoIterator<Item = (String, ConceptType)>,
    ) -> Result<Self, LexiconError> {
        let mut map = HashMap::new();
        let mut max_key_tokens = 0;
        for (surface, ctype) in entries {
            let key = normalize_surface(&surface);
            if key.is_empty() {
                return Err(LexiconError::EmptyKey(surface));
            }
            match map.get(&key) {
                Some(&first) if first != ctype => {
                    return Err(LexiconError::Ambiguous {
                        key,
                        first,
                        second: ctype,
                    })
                }
                _ => {}
            }
            max_key_tokens = max_key_tokens.max(key.split(' ').count());
            map.insert(key, ctype);
        }
        if map.is_empty() {
            return Err(LexiconError::Empty);
        }
        Ok(Lexicon {
            entries: map,
            max_key_tokens,
        })
    }

    /// Reads `surface<TAB>type` lines. Blank lines and lines starting with
    /// `#` are skipped.
    pub fn parse_tsv(text: &str) -> Result<Self, LexiconError> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let mut cols = raw.split('\t');
            let (Some(surface), Some(kind), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(LexiconError::Parse {
                    line,
                    reason: "expected two tab-separated columns".into(),
                });
            };
            let ctype = kind
                .parse()
                .map_err(|reason| LexiconError::Parse { line, reason })?;
            entries.push((surface.to_string(), ctype));
        }
        Self::from_entries(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_tsv(&text)
    }

    pub fn get(&self, normalized_key: &str) -> Option<ConceptType> {
        self.entries.get(normalized_key).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_key_tokens(&self) -> usize {
        self.max_key_tokens
    }

    pub fn normalization_id(&self) -> &'static str {
        NORMALIZATION_ID
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ConceptType)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}
