use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Sample, SplitCounts};
use crate::error::{Error, Result};

/// One JSON object per line: `{"label":..,"tokens":[..],"pos":[..],"section":..}`.
pub fn write_samples(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<Vec<Sample>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Sample = serde_json::from_str(&line)
            .map_err(|e| Error::parse(i + 1, format!("bad sample record: {e}")))?;
        if s.tokens.len() != s.pos.len() {
            return Err(Error::parse(i + 1, "tokens and pos differ in length"));
        }
        out.push(s);
    }
    Ok(out)
}

/// Per-dataset extraction counts, laid out like a dataset size table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatsRow {
    pub dataset: String,
    pub positives: usize,
    pub negatives: usize,
    pub unmatched_governors: usize,
    pub filtered_too: usize,
    pub unresolved_governors: usize,
    pub train: SplitCounts,
    pub dev: SplitCounts,
    pub test: SplitCounts,
}

pub const STATS_HEADER: &str = "dataset\ttrain_pos\ttrain_neg\ttrain_total\tdev_pos\tdev_neg\tdev_total\ttest_pos\ttest_neg\ttest_total\tpositives\tnegatives\tunmatched_governors\tfiltered_too\tunresolved_governors";

impl StatsRow {
    pub fn to_tsv(&self) -> String {
        let cols = [
            self.train.positive,
            self.train.negative,
            self.train.total(),
            self.dev.positive,
            self.dev.negative,
            self.dev.total(),
            self.test.positive,
            self.test.negative,
            self.test.total(),
            self.positives,
            self.negatives,
            self.unmatched_governors,
            self.filtered_too,
            self.unresolved_governors,
        ];
        let mut line = self.dataset.clone();
        for c in cols {
            line.push('\t');
            line.push_str(&c.to_string());
        }
        line
    }
}

pub fn write_stats(path: &Path, rows: &[StatsRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{STATS_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.to_tsv())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("aptrigger-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn sample(i: usize) -> Sample {
        Sample {
            label: if i.is_multiple_of(2) {
                "still".into()
            } else {
                "none".into()
            },
            tokens: vec![format!("tok \"{i}\""), "@@@@".into(), "place".into()],
            pos: vec!["NN".into(), "@@@@".into(), "VBP".into()],
            section: "700".into(),
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let samples: Vec<Sample> = (0..3).map(sample).collect();
        let p1 = tmp("a.jsonl");
        let p2 = tmp("b.jsonl");
        write_samples(&p1, &samples).unwrap();
        let back = read_samples(&p1).unwrap();
        assert_eq!(back, samples);
        write_samples(&p2, &back).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn empty_list_empty_file() {
        let p = tmp("empty.jsonl");
        write_samples(&p, &[]).unwrap();
        assert_eq!(std::fs::read(&p).unwrap().len(), 0);
        assert!(read_samples(&p).unwrap().is_empty());
    }

    #[test]
    fn missing_pos_field_names_line() {
        let p = tmp("bad.jsonl");
        std::fs::write(
            &p,
            "{\"label\":\"none\",\"tokens\":[\"@@@@\",\"go\"],\"pos\":[\"@@@@\",\"VB\"],\"section\":\"1\"}\n{\"label\":\"none\",\"tokens\":[\"a\"],\"section\":\"1\"}\n",
        )
        .unwrap();
        let err = read_samples(&p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }
}
