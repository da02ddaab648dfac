use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{DatasetSplit, ExtractionConfig, Sample};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Inclusive range of numeric corpus sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectionRange {
    pub first: u32,
    pub last: u32,
}

impl SectionRange {
    pub fn new(first: u32, last: u32) -> Self {
        SectionRange { first, last }
    }

    /// Non-numeric section ids never match.
    pub fn contains(&self, section: &str) -> bool {
        section
            .parse::<u32>()
            .is_ok_and(|s| (self.first..=self.last).contains(&s))
    }

    fn overlaps(&self, other: &SectionRange) -> bool {
        self.first <= other.last && other.first <= self.last
    }
}

impl fmt::Display for SectionRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.first == self.last {
            write!(f, "{}", self.first)
        } else {
            write!(f, "{}-{}", self.first, self.last)
        }
    }
}

impl FromStr for SectionRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::usage(format!("bad section range {s:?}"));
        let (a, b) = s.split_once('-').unwrap_or((s, s));
        let first: u32 = a.trim().parse().map_err(|_| bad())?;
        let last: u32 = b.trim().parse().map_err(|_| bad())?;
        if first > last {
            return Err(bad());
        }
        Ok(SectionRange { first, last })
    }
}

impl Serialize for SectionRange {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SectionRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub(crate) fn check_disjoint(ranges: &[SectionRange]) -> Result<()> {
    for (i, a) in ranges.iter().enumerate() {
        if let Some(b) = ranges[i + 1..].iter().find(|b| a.overlaps(b)) {
            return Err(Error::usage(format!(
                "overlapping test section ranges {a} and {b}"
            )));
        }
    }
    Ok(())
}

/// Samples from configured test sections go to test; the rest are shuffled
/// and divided into dev (`dev_fraction`, rounded) and train.
pub fn split_dataset(
    samples: Vec<Sample>,
    cfg: &ExtractionConfig,
    rng: &mut Rng,
) -> Result<DatasetSplit> {
    check_disjoint(&cfg.test_sections)?;
    let (test, mut rest): (Vec<Sample>, Vec<Sample>) = samples
        .into_iter()
        .partition(|s| cfg.test_sections.iter().any(|r| r.contains(&s.section)));
    rng.shuffle(&mut rest);
    let n_dev = ((rest.len() as f64) * cfg.dev_fraction).round() as usize;
    let train = rest.split_off(n_dev);
    Ok(DatasetSplit {
        train,
        dev: rest,
        test,
    })
}
