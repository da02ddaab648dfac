use std::collections::{BTreeMap, HashMap, VecDeque};

use super::io::StatsRow;
use super::split::split_dataset;
use super::{
    is_target, AnnotatedSentence, DatasetSplit, Document, ExtractionConfig, Occurrence, Sample,
    MARKER, NEGATIVE_LABEL,
};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Name of the dataset that pools every target adverb.
pub const ALL_DATASET: &str = "all";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OccurrenceScan {
    pub occurrences: Vec<Occurrence>,
    /// Adverb tokens whose governor could not be resolved, per adverb.
    pub unresolved: BTreeMap<String, usize>,
}

fn is_verb_tag(tag: &str) -> bool {
    tag.starts_with('V')
}

/// Governor of the token at `adverb_index`: the annotated head when there is
/// one, otherwise the nearest verb-tagged token (left wins ties).
pub fn resolve_governor(sentence: &AnnotatedSentence, adverb_index: usize) -> Option<usize> {
    let head = sentence.head[adverb_index];
    if head >= 0 && head as usize != adverb_index {
        return Some(head as usize);
    }
    for d in 1..sentence.len() {
        if let Some(left) = adverb_index.checked_sub(d) {
            if is_verb_tag(&sentence.pos[left]) {
                return Some(left);
            }
        }
        let right = adverb_index + d;
        if right < sentence.len() && is_verb_tag(&sentence.pos[right]) {
            return Some(right);
        }
    }
    None
}

/// Every target-adverb token in `doc`, in document order.
pub fn find_occurrences(doc: &Document, cfg: &ExtractionConfig) -> OccurrenceScan {
    let mut scan = OccurrenceScan::default();
    for (si, sentence) in doc.sentences.iter().enumerate() {
        for (ti, token) in sentence.tokens.iter().enumerate() {
            let Some(adverb) = cfg.adverbs.iter().find(|a| a.eq_ignore_ascii_case(token)) else {
                continue;
            };
            let governor = resolve_governor(sentence, ti)
                .filter(|&g| !is_target(&sentence.tokens[g], &cfg.adverbs));
            match governor {
                Some(g) => scan.occurrences.push(Occurrence {
                    doc_id: doc.doc_id.clone(),
                    sentence: si,
                    adverb: adverb.clone(),
                    adverb_index: ti,
                    governor_index: g,
                    governor: sentence.tokens[g].clone(),
                    governor_pos: sentence.pos[g].clone(),
                }),
                None => *scan.unresolved.entry(adverb.clone()).or_default() += 1,
            }
        }
    }
    scan
}

/// False for "too" governed by an adjective or adverb: the excess-quantity
/// sense ("too far"), which triggers no presupposition.
pub fn filter_too(occ: &Occurrence) -> bool {
    !(occ.adverb == "too" && matches!(occ.governor_pos.as_str(), "JJ" | "RB"))
}

/// Keep at most `max_len` tokens. Context is dropped from the front first;
/// once the marker reaches position 0 the remaining excess comes off the tail.
pub fn truncate_sample(mut sample: Sample, max_len: usize) -> Sample {
    let len = sample.tokens.len();
    if len <= max_len {
        return sample;
    }
    let excess = len - max_len;
    let marker = sample.marker_index().unwrap_or(0);
    let front = excess.min(marker);
    sample.tokens.drain(..front);
    sample.pos.drain(..front);
    sample.tokens.truncate(max_len);
    sample.pos.truncate(max_len);
    sample
}

/// Tokens around the pivot at `(sent, pivot)`: up to `window_before` tokens
/// before it (crossing sentence boundaries inside the document), the marker,
/// the pivot, and the rest of the pivot's sentence. Tokens for which `skip`
/// holds are left out and do not count toward the window.
fn build_window(
    doc: &Document,
    sent: usize,
    pivot: usize,
    window_before: usize,
    skip: impl Fn(&str) -> bool,
) -> (Vec<String>, Vec<String>) {
    let mut before: Vec<(&str, &str)> = Vec::with_capacity(window_before);
    'outer: for si in (0..=sent).rev() {
        let s = &doc.sentences[si];
        let end = if si == sent { pivot } else { s.len() };
        for ti in (0..end).rev() {
            if before.len() == window_before {
                break 'outer;
            }
            if !skip(&s.tokens[ti]) {
                before.push((&s.tokens[ti], &s.pos[ti]));
            }
        }
    }
    before.reverse();

    let s = &doc.sentences[sent];
    let mut tokens: Vec<String> = before.iter().map(|(t, _)| t.to_string()).collect();
    let mut pos: Vec<String> = before.iter().map(|(_, p)| p.to_string()).collect();
    tokens.push(MARKER.to_string());
    pos.push(MARKER.to_string());
    tokens.push(s.tokens[pivot].clone());
    pos.push(s.pos[pivot].clone());
    for ti in pivot + 1..s.len() {
        if !skip(&s.tokens[ti]) {
            tokens.push(s.tokens[ti].clone());
            pos.push(s.pos[ti].clone());
        }
    }
    (tokens, pos)
}

/// Positive sample for one occurrence. Every target adverb inside the window,
/// the triggering one included, is deleted.
pub fn extract_positive(
    doc: &Document,
    occ: &Occurrence,
    cfg: &ExtractionConfig,
) -> Result<Sample> {
    let sentence = doc.sentences.get(occ.sentence).ok_or_else(|| {
        Error::usage(format!("occurrence sentence {} out of range", occ.sentence))
    })?;
    if occ.governor_index >= sentence.len() || occ.adverb_index >= sentence.len() {
        return Err(Error::usage("occurrence index out of range"));
    }
    let (tokens, pos) = build_window(
        doc,
        occ.sentence,
        occ.governor_index,
        cfg.window_before,
        |t| is_target(t, &cfg.adverbs),
    );
    Ok(truncate_sample(
        Sample {
            label: occ.adverb.clone(),
            tokens,
            pos,
            section: doc.section_id.clone(),
        },
        cfg.max_len,
    ))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NegativeMining {
    pub samples: Vec<Sample>,
    /// For each negative, the index of the positive occurrence it balances.
    pub balances: Vec<usize>,
    /// Positive occurrences for which no negative pivot was found.
    pub unmatched: Vec<usize>,
}

/// One negative per positive occurrence: another occurrence of the same
/// governor surface form whose sentence holds no target adverb. Documents are
/// visited in shuffled order, each scanned cyclically from a random token.
pub fn extract_negatives(
    corpus: &[Document],
    positives: &[Occurrence],
    cfg: &ExtractionConfig,
    rng: &mut Rng,
) -> NegativeMining {
    let mut demand: HashMap<&str, VecDeque<usize>> = HashMap::new();
    for (i, occ) in positives.iter().enumerate() {
        demand
            .entry(occ.governor.as_str())
            .or_default()
            .push_back(i);
    }
    let mut outstanding = positives.len();
    let mut out = NegativeMining::default();

    let mut order: Vec<usize> = (0..corpus.len()).collect();
    rng.shuffle(&mut order);

    for &di in &order {
        if outstanding == 0 {
            break;
        }
        let doc = &corpus[di];
        let positions: Vec<(usize, usize)> = doc
            .sentences
            .iter()
            .enumerate()
            .flat_map(|(si, s)| (0..s.len()).map(move |ti| (si, ti)))
            .collect();
        if positions.is_empty() {
            continue;
        }
        let clean: Vec<bool> = doc
            .sentences
            .iter()
            .map(|s| !s.tokens.iter().any(|t| is_target(t, &cfg.adverbs)))
            .collect();
        let start = rng.below(positions.len());

        for k in 0..positions.len() {
            let (si, ti) = positions[(start + k) % positions.len()];
            if !clean[si] {
                continue;
            }
            let token = doc.sentences[si].tokens[ti].as_str();
            let Some(queue) = demand.get_mut(token) else {
                continue;
            };
            if queue.is_empty() {
                continue;
            }
            let (tokens, pos) = build_window(doc, si, ti, cfg.window_before, |_| false);
            if cfg.strict_negatives && tokens.iter().any(|t| is_target(t, &cfg.adverbs)) {
                continue;
            }
            let owner = queue.pop_front().expect("non-empty");
            outstanding -= 1;
            out.samples.push(truncate_sample(
                Sample {
                    label: NEGATIVE_LABEL.to_string(),
                    tokens,
                    pos,
                    section: doc.section_id.clone(),
                },
                cfg.max_len,
            ));
            out.balances.push(owner);
            if outstanding == 0 {
                break;
            }
        }
    }

    let mut unmatched: Vec<usize> = demand.into_values().flatten().collect();
    unmatched.sort_unstable();
    out.unmatched = unmatched;
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub split: DatasetSplit,
    pub stats: StatsRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionOutput {
    /// One dataset per target adverb, then the pooled [`ALL_DATASET`].
    pub datasets: Vec<Dataset>,
}

/// Full pipeline: occurrences, the "too" filter, positives, negative mining
/// and splitting, for each adverb separately and for all adverbs pooled.
pub fn extract_datasets(corpus: &[Document], cfg: &ExtractionConfig) -> Result<ExtractionOutput> {
    cfg.validate()?;
    let by_id: HashMap<&str, &Document> = corpus.iter().map(|d| (d.doc_id.as_str(), d)).collect();

    let mut kept = Vec::new();
    let mut filtered: BTreeMap<String, usize> = BTreeMap::new();
    let mut unresolved: BTreeMap<String, usize> = BTreeMap::new();
    for doc in corpus {
        let scan = find_occurrences(doc, cfg);
        for (adverb, n) in scan.unresolved {
            *unresolved.entry(adverb).or_default() += n;
        }
        for occ in scan.occurrences {
            if filter_too(&occ) {
                kept.push(occ);
            } else {
                *filtered.entry(occ.adverb.clone()).or_default() += 1;
            }
        }
    }

    let root = Rng::new(cfg.seed);
    let mut names: Vec<String> = cfg.adverbs.clone();
    names.push(ALL_DATASET.to_string());

    let mut datasets = Vec::with_capacity(names.len());
    for name in names {
        let in_set = |adverb: &str| name == ALL_DATASET || adverb == name;
        let positives: Vec<Occurrence> =
            kept.iter().filter(|o| in_set(&o.adverb)).cloned().collect();

        let mut samples = Vec::with_capacity(positives.len() * 2);
        for occ in &positives {
            let doc = by_id[occ.doc_id.as_str()];
            samples.push(extract_positive(doc, occ, cfg)?);
        }
        let mining = extract_negatives(
            corpus,
            &positives,
            cfg,
            &mut root.split(&format!("negatives/{name}")),
        );
        samples.extend(mining.samples.iter().cloned());
        for s in &samples {
            s.validate(cfg.max_len, &cfg.adverbs)?;
        }

        let split = split_dataset(samples, cfg, &mut root.split(&format!("split/{name}")))?;
        let count = |m: &BTreeMap<String, usize>| -> usize {
            m.iter().filter(|(a, _)| in_set(a)).map(|(_, n)| n).sum()
        };
        let stats = StatsRow {
            dataset: name.clone(),
            positives: positives.len(),
            negatives: mining.samples.len(),
            unmatched_governors: mining.unmatched.len(),
            filtered_too: count(&filtered),
            unresolved_governors: count(&unresolved),
            train: split.train_counts(),
            dev: split.dev_counts(),
            test: split.test_counts(),
        };
        datasets.push(Dataset { name, split, stats });
    }
    Ok(ExtractionOutput { datasets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_corpus, CorpusFormat};

    fn sentence(rows: &[(&str, &str, i64)]) -> AnnotatedSentence {
        AnnotatedSentence::new(
            rows.iter().map(|s| s.0.to_string()).collect(),
            rows.iter().map(|s| s.1.to_string()).collect(),
            rows.iter().map(|s| s.2).collect(),
        )
        .unwrap()
    }

    fn doc(id: &str, sentences: Vec<AnnotatedSentence>) -> Document {
        Document {
            doc_id: id.into(),
            section_id: "01".into(),
            sentences,
        }
    }

    fn park() -> AnnotatedSentence {
        sentence(&[
            ("We", "PRP", 2),
            ("will", "MD", 2),
            ("go", "VB", -1),
            ("to", "TO", 2),
            ("the", "DT", 5),
            ("park", "NN", 3),
            ("again", "RB", 2),
            ("tomorrow", "NN", 2),
            (".", ".", 2),
        ])
    }

    fn words(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn annotated_head_wins() {
        assert_eq!(resolve_governor(&park(), 6), Some(2));
    }

    #[test]
    fn fallback_to_nearest_verb() {
        let s = sentence(&[
            ("John", "N", -1),
            ("went", "V", -1),
            ("home", "N", -1),
            ("again", "RB", -1),
        ]);
        assert_eq!(resolve_governor(&s, 3), Some(1));
    }

    #[test]
    fn fallback_prefers_left_on_tie() {
        let s = sentence(&[("ran", "VBD", -1), ("still", "RB", -1), ("swam", "VBD", -1)]);
        assert_eq!(resolve_governor(&s, 1), Some(0));
    }

    #[test]
    fn verbless_sentence_unresolved() {
        let s = sentence(&[("Yet", "RB", -1), ("more", "JJR", -1), ("rain", "NN", -1)]);
        assert_eq!(resolve_governor(&s, 0), None);
        let d = doc("d", vec![s]);
        let scan = find_occurrences(&d, &ExtractionConfig::default());
        assert!(scan.occurrences.is_empty());
        assert_eq!(scan.unresolved["yet"], 1);
    }

    #[test]
    fn occurrence_with_annotated_governor() {
        let d = doc("d", vec![park()]);
        let scan = find_occurrences(&d, &ExtractionConfig::default());
        assert_eq!(scan.occurrences.len(), 1);
        let occ = &scan.occurrences[0];
        assert_eq!(
            (occ.adverb.as_str(), occ.governor.as_str()),
            ("again", "go")
        );
        assert_eq!((occ.adverb_index, occ.governor_index), (6, 2));
    }

    #[test]
    fn two_adverbs_two_occurrences() {
        let s = sentence(&[
            ("She", "PRP", 2),
            ("also", "RB", 2),
            ("left", "VBD", -1),
            ("again", "RB", 2),
        ]);
        let scan = find_occurrences(&doc("d", vec![s]), &ExtractionConfig::default());
        assert_eq!(scan.occurrences.len(), 2);
        let none = sentence(&[("She", "PRP", 1), ("left", "VBD", -1)]);
        assert!(
            find_occurrences(&doc("e", vec![none]), &ExtractionConfig::default())
                .occurrences
                .is_empty()
        );
    }

    fn occ(adverb: &str, gov_pos: &str) -> Occurrence {
        Occurrence {
            doc_id: "d".into(),
            sentence: 0,
            adverb: adverb.into(),
            adverb_index: 0,
            governor_index: 1,
            governor: "x".into(),
            governor_pos: gov_pos.into(),
        }
    }

    #[test]
    fn too_filter_rules() {
        assert!(!filter_too(&occ("too", "JJ")));
        assert!(!filter_too(&occ("too", "RB")));
        assert!(filter_too(&occ("too", "VB")));
        assert!(filter_too(&occ("again", "RB")));
    }

    #[test]
    fn positive_park_example() {
        let d = doc("d", vec![park()]);
        let cfg = ExtractionConfig::default();
        let o = &find_occurrences(&d, &cfg).occurrences[0];
        let s = extract_positive(&d, o, &cfg).unwrap();
        assert_eq!(s.label, "again");
        assert_eq!(
            s.tokens,
            words(&["We", "will", "@@@@", "go", "to", "the", "park", "tomorrow", "."])
        );
        assert_eq!(
            s.pos,
            words(&["PRP", "MD", "@@@@", "VB", "TO", "DT", "NN", "NN", "."])
        );
    }

    #[test]
    fn governor_at_document_start() {
        let s = sentence(&[("Go", "VB", -1), ("home", "NN", 0), ("again", "RB", 0)]);
        let d = doc("d", vec![s]);
        let cfg = ExtractionConfig::default();
        let o = &find_occurrences(&d, &cfg).occurrences[0];
        let sample = extract_positive(&d, o, &cfg).unwrap();
        assert_eq!(sample.tokens, words(&["@@@@", "Go", "home"]));
    }

    #[test]
    fn window_keeps_last_fifty_across_sentences() {
        // 70 context tokens spread over two earlier sentences.
        let filler: Vec<AnnotatedSentence> = (0..2)
            .map(|k| {
                let toks: Vec<(String, &str, i64)> = (0..35)
                    .map(|i| (format!("w{}", k * 35 + i), "NN", -1))
                    .collect();
                AnnotatedSentence::new(
                    toks.iter().map(|t| t.0.clone()).collect(),
                    toks.iter().map(|t| t.1.to_string()).collect(),
                    toks.iter().map(|t| t.2).collect(),
                )
                .unwrap()
            })
            .collect();
        let mut sents = filler;
        sents.push(sentence(&[("left", "VBD", -1), ("again", "RB", 0)]));
        let d = doc("d", sents);
        let cfg = ExtractionConfig::default();
        let o = &find_occurrences(&d, &cfg).occurrences[0];
        let s = extract_positive(&d, o, &cfg).unwrap();
        assert_eq!(s.tokens.len(), 52);
        assert_eq!(s.tokens[0], "w20");
        assert_eq!(s.tokens[49], "w69");
        assert_eq!(&s.tokens[50..], &words(&["@@@@", "left"])[..]);
    }

    fn marker_sample(len: usize, marker: usize) -> Sample {
        let tokens: Vec<String> = (0..len)
            .map(|i| {
                if i == marker {
                    MARKER.to_string()
                } else {
                    format!("t{i}")
                }
            })
            .collect();
        Sample {
            label: "yet".into(),
            pos: tokens.clone(),
            tokens,
            section: "1".into(),
        }
    }

    #[test]
    fn truncate_short_unchanged() {
        let s = marker_sample(59, 10);
        assert_eq!(truncate_sample(s.clone(), 60), s);
    }

    #[test]
    fn truncate_drops_front() {
        let s = truncate_sample(marker_sample(80, 51), 60);
        assert_eq!(s.tokens.len(), 60);
        assert_eq!(s.tokens[0], "t20");
        assert_eq!(s.marker_index(), Some(31));
        assert_eq!(s.tokens[59], "t79");
    }

    #[test]
    fn truncate_marker_first_drops_tail() {
        let s = truncate_sample(marker_sample(80, 0), 60);
        assert_eq!(s.tokens.len(), 60);
        assert_eq!(s.marker_index(), Some(0));
        assert_eq!(s.tokens[59], "t59");
    }

    #[test]
    fn truncate_mixed_policy() {
        let s = truncate_sample(marker_sample(80, 10), 60);
        assert_eq!(s.marker_index(), Some(0));
        assert_eq!(s.tokens[1], "t11");
        assert_eq!(s.tokens.len(), 60);
        assert_eq!(s.tokens[59], "t69");
    }

    const NEG_CORPUS: &str = "\
#doc a 01
We\tPRP\t2
will\tMD\t2
go\tVB\t-1
to\tTO\t2
the\tDT\t5
park\tNN\t3
again\tRB\t2
tomorrow\tNN\t2
.\t.\t2

#doc b 02
They\tPRP\t1
go\tVBP\t-1
home\tNN\t1
early\tRB\t1
.\t.\t1
";

    #[test]
    fn negative_for_shared_governor() {
        let corpus = parse_corpus(NEG_CORPUS.as_bytes(), CorpusFormat::Conll3).unwrap();
        let cfg = ExtractionConfig::default();
        let occs = find_occurrences(&corpus[0], &cfg).occurrences;
        let m = extract_negatives(&corpus, &occs, &cfg, &mut Rng::new(3));
        assert_eq!(m.samples.len(), 1);
        assert_eq!(
            m.samples[0].tokens,
            words(&["They", "@@@@", "go", "home", "early", "."])
        );
        assert_eq!(m.samples[0].label, "none");
        assert_eq!(m.samples[0].section, "02");
        assert!(m.unmatched.is_empty());
    }

    #[test]
    fn governor_only_in_adverb_sentences_is_unmatched() {
        let corpus = parse_corpus(NEG_CORPUS.as_bytes(), CorpusFormat::Conll3).unwrap();
        let cfg = ExtractionConfig::default();
        let mut occs = find_occurrences(&corpus[0], &cfg).occurrences;
        occs[0].governor = "park".into();
        let m = extract_negatives(&corpus, &occs, &cfg, &mut Rng::new(3));
        assert!(m.samples.is_empty());
        assert_eq!(m.unmatched, vec![0]);
    }

    #[test]
    fn negatives_deterministic_per_seed() {
        let corpus = parse_corpus(NEG_CORPUS.as_bytes(), CorpusFormat::Conll3).unwrap();
        let cfg = ExtractionConfig::default();
        let occs = find_occurrences(&corpus[0], &cfg).occurrences;
        let a = extract_negatives(&corpus, &occs, &cfg, &mut Rng::new(9));
        let b = extract_negatives(&corpus, &occs, &cfg, &mut Rng::new(9));
        assert_eq!(a, b);
    }

    #[test]
    fn pivots_are_never_reused() {
        // Two positives share governor "go" but only one clean pivot exists.
        let corpus = parse_corpus(NEG_CORPUS.as_bytes(), CorpusFormat::Conll3).unwrap();
        let cfg = ExtractionConfig::default();
        let mut occs = find_occurrences(&corpus[0], &cfg).occurrences;
        occs.push(occs[0].clone());
        let m = extract_negatives(&corpus, &occs, &cfg, &mut Rng::new(1));
        assert_eq!(m.samples.len(), 1);
        assert_eq!(m.unmatched.len(), 1);
    }
}
