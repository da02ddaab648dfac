//! Mining balanced positive/negative samples from annotated corpora.
//!
//! Positives are windows around the governor of a target adverb with the
//! adverb deleted; negatives are windows around another occurrence of the
//! same governor surface form in a sentence without any target adverb. A
//! `@@@@` marker sits right before the governor in both cases.

mod extract;
mod io;
mod parse;
mod split;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use extract::{
    extract_datasets, extract_negatives, extract_positive, filter_too, find_occurrences,
    resolve_governor, truncate_sample, Dataset, ExtractionOutput, NegativeMining, OccurrenceScan,
    ALL_DATASET,
};
pub use io::{read_samples, write_samples, write_stats, StatsRow, STATS_HEADER};
pub use parse::{parse_corpus, CorpusFormat};
pub use split::{split_dataset, SectionRange};

/// Inserted right before the governor in every sample, in both the token and
/// the POS list.
pub const MARKER: &str = "@@@@";

/// Label of negative samples.
pub const NEGATIVE_LABEL: &str = "none";

pub const DEFAULT_ADVERBS: [&str; 5] = ["too", "again", "also", "still", "yet"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub tokens: Vec<String>,
    pub pos: Vec<String>,
    /// 0-based index of each token's governor, `-1` for root or unknown.
    pub head: Vec<i64>,
}

impl AnnotatedSentence {
    pub fn new(tokens: Vec<String>, pos: Vec<String>, head: Vec<i64>) -> Result<Self> {
        if tokens.len() != pos.len() || tokens.len() != head.len() {
            return Err(Error::usage(format!(
                "ragged sentence: {} tokens, {} tags, {} heads",
                tokens.len(),
                pos.len(),
                head.len()
            )));
        }
        let n = tokens.len() as i64;
        if let Some(h) = head.iter().find(|&&h| h < -1 || h >= n) {
            return Err(Error::usage(format!(
                "head index {h} outside sentence of {n}"
            )));
        }
        Ok(AnnotatedSentence { tokens, pos, head })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub section_id: String,
    pub sentences: Vec<AnnotatedSentence>,
}

impl Document {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(AnnotatedSentence::len).sum()
    }
}

/// One target adverb found in a document, with its resolved governor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    pub doc_id: String,
    pub sentence: usize,
    pub adverb: String,
    pub adverb_index: usize,
    pub governor_index: usize,
    pub governor: String,
    pub governor_pos: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub label: String,
    pub tokens: Vec<String>,
    pub pos: Vec<String>,
    /// Corpus section the sample was drawn from; drives the test split.
    pub section: String,
}

impl Sample {
    pub fn is_positive(&self) -> bool {
        self.label != NEGATIVE_LABEL
    }

    /// Binary target: 1 for presence of a trigger, 0 for absence.
    pub fn target(&self) -> usize {
        usize::from(self.is_positive())
    }

    pub fn marker_index(&self) -> Option<usize> {
        self.tokens.iter().position(|t| t == MARKER)
    }

    /// Check the structural invariants every extracted sample must satisfy.
    pub fn validate(&self, max_len: usize, adverbs: &[String]) -> Result<()> {
        if self.tokens.len() != self.pos.len() {
            return Err(Error::usage(format!(
                "{} tokens but {} tags",
                self.tokens.len(),
                self.pos.len()
            )));
        }
        if self.tokens.len() > max_len {
            return Err(Error::usage(format!(
                "sample length {} exceeds {max_len}",
                self.tokens.len()
            )));
        }
        let markers = self.tokens.iter().filter(|t| *t == MARKER).count();
        let pos_markers = self.pos.iter().filter(|t| *t == MARKER).count();
        if markers != 1 || pos_markers != 1 {
            return Err(Error::usage(format!(
                "expected one marker, found {markers} tokens / {pos_markers} tags"
            )));
        }
        let m = self.marker_index().expect("counted above");
        if self.pos[m] != MARKER {
            return Err(Error::usage("marker misaligned between tokens and tags"));
        }
        if m + 1 >= self.tokens.len() {
            return Err(Error::usage("marker is not followed by a governor"));
        }
        if self.is_positive() {
            if let Some(t) = self.tokens.iter().find(|t| is_target(t, adverbs)) {
                return Err(Error::usage(format!(
                    "positive sample contains adverb {t:?}"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn is_target(token: &str, adverbs: &[String]) -> bool {
    adverbs.iter().any(|a| a.eq_ignore_ascii_case(token))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    pub adverbs: Vec<String>,
    /// Tokens kept before the governor.
    pub window_before: usize,
    pub max_len: usize,
    pub seed: u64,
    /// Sections that form the test split, e.g. `"22-23"` or `"700-760"`.
    pub test_sections: Vec<SectionRange>,
    pub dev_fraction: f64,
    /// Require the whole negative window, not just the pivot sentence, to be
    /// free of target adverbs.
    pub strict_negatives: bool,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            adverbs: DEFAULT_ADVERBS.iter().map(|s| s.to_string()).collect(),
            window_before: 50,
            max_len: 60,
            seed: 0,
            test_sections: vec![SectionRange::new(22, 23)],
            dev_fraction: 0.10,
            strict_negatives: false,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_before < 1 {
            return Err(Error::usage("window_before must be at least 1"));
        }
        if self.max_len < 2 {
            return Err(Error::usage(
                "max_len must leave room for marker and governor",
            ));
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return Err(Error::usage(format!(
                "dev_fraction must be in (0, 1), got {}",
                self.dev_fraction
            )));
        }
        if self.adverbs.is_empty() {
            return Err(Error::usage("no target adverbs configured"));
        }
        split::check_disjoint(&self.test_sections)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitCounts {
    pub positive: usize,
    pub negative: usize,
}

impl SplitCounts {
    pub fn of(samples: &[Sample]) -> Self {
        let positive = samples.iter().filter(|s| s.is_positive()).count();
        SplitCounts {
            positive,
            negative: samples.len() - positive,
        }
    }

    pub fn total(&self) -> usize {
        self.positive + self.negative
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<Sample>,
    pub dev: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl DatasetSplit {
    pub fn train_counts(&self) -> SplitCounts {
        SplitCounts::of(&self.train)
    }

    pub fn dev_counts(&self) -> SplitCounts {
        SplitCounts::of(&self.dev)
    }

    pub fn test_counts(&self) -> SplitCounts {
        SplitCounts::of(&self.test)
    }
}
