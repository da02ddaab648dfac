use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::MARKER;
use crate::error::{Error, Result};

pub const UNKNOWN: &str = "<unk>";
pub const PADDING: &str = "<pad>";

/// Token <-> id bijection. Regular entries are ordered by descending
/// frequency, then lexicographically; the marker, unknown and padding
/// entries follow them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    tokens: Vec<String>,
}

impl From<VocabRepr> for Vocab {
    fn from(r: VocabRepr) -> Self {
        Vocab::from_tokens(r.tokens)
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        VocabRepr { tokens: v.tokens }
    }
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }

    /// Build from token sequences, keeping entries seen at least `min_count`
    /// times.
    pub fn build<'a, I>(sequences: I, min_count: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut any = false;
        for seq in sequences {
            any = true;
            for t in seq {
                if t != MARKER && t != UNKNOWN && t != PADDING {
                    *counts.entry(t.as_str()).or_default() += 1;
                }
            }
        }
        if !any {
            return Err(Error::usage("cannot build a vocabulary from no samples"));
        }
        let mut entries: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut tokens: Vec<String> = entries.into_iter().map(|(t, _)| t.to_string()).collect();
        tokens.extend([MARKER, UNKNOWN, PADDING].map(String::from));
        Ok(Vocab::from_tokens(tokens))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or the unknown id.
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or_else(|| self.unk_id())
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn marker_id(&self) -> usize {
        self.index[MARKER]
    }

    pub fn unk_id(&self) -> usize {
        self.index[UNKNOWN]
    }

    pub fn pad_id(&self) -> usize {
        self.index[PADDING]
    }
}
