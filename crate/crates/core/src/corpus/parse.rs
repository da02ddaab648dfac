use std::collections::HashSet;
use std::io::BufRead;
use std::str::FromStr;

use super::{AnnotatedSentence, Document};
use crate::error::{Error, Result};

/// Input formats understood by [`parse_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// `token<TAB>pos<TAB>head` rows, blank line between sentences,
    /// `#doc <doc_id> <section_id>` before each document.
    Conll3,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conll3" => Ok(CorpusFormat::Conll3),
            other => Err(Error::usage(format!("unknown corpus format {other:?}"))),
        }
    }
}

#[derive(Default)]
struct SentenceBuf {
    tokens: Vec<String>,
    pos: Vec<String>,
    head: Vec<i64>,
    first_line: usize,
}

impl SentenceBuf {
    fn flush(&mut self, doc: &mut Option<Document>) -> Result<()> {
        if self.tokens.is_empty() {
            return Ok(());
        }
        let line = self.first_line;
        let sentence = AnnotatedSentence::new(
            std::mem::take(&mut self.tokens),
            std::mem::take(&mut self.pos),
            std::mem::take(&mut self.head),
        )
        .map_err(|e| Error::parse(line, format!("sentence starting here: {e}")))?;
        doc.as_mut()
            .expect("rows are only accepted inside a document")
            .sentences
            .push(sentence);
        Ok(())
    }
}

pub fn parse_corpus<R: BufRead>(reader: R, format: CorpusFormat) -> Result<Vec<Document>> {
    let CorpusFormat::Conll3 = format;
    let mut docs = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut current: Option<Document> = None;
    let mut buf = SentenceBuf::default();

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');

        if let Some(rest) = line.strip_prefix("#doc") {
            buf.flush(&mut current)?;
            docs.extend(current.take());
            let fields: Vec<&str> = rest.split_whitespace().collect();
            let [doc_id, section_id] = fields[..] else {
                return Err(Error::parse(
                    lineno,
                    "expected `#doc <doc_id> <section_id>`",
                ));
            };
            if !seen_ids.insert(doc_id.to_string()) {
                return Err(Error::parse(lineno, format!("duplicate doc id {doc_id:?}")));
            }
            current = Some(Document {
                doc_id: doc_id.to_string(),
                section_id: section_id.to_string(),
                sentences: Vec::new(),
            });
            continue;
        }
        if line.trim().is_empty() {
            buf.flush(&mut current)?;
            continue;
        }
        if current.is_none() {
            return Err(Error::parse(lineno, "token row before any `#doc` header"));
        }

        let cols: Vec<&str> = line.split('\t').collect();
        let [token, pos, head] = cols[..] else {
            return Err(Error::parse(
                lineno,
                format!(
                    "expected 3 tab-separated columns (token, pos, head), found {}",
                    cols.len()
                ),
            ));
        };
        if token.is_empty() || pos.is_empty() {
            return Err(Error::parse(lineno, "empty token or POS column"));
        }
        let head: i64 = head
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("head index {head:?} is not an integer")))?;
        if buf.tokens.is_empty() {
            buf.first_line = lineno;
        }
        buf.tokens.push(token.to_string());
        buf.pos.push(pos.to_string());
        buf.head.push(head);
    }
    buf.flush(&mut current)?;
    docs.extend(current.take());
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Vec<Document>> {
        parse_corpus(s.as_bytes(), CorpusFormat::Conll3)
    }

    #[test]
    fn two_sentence_document() {
        let docs = parse(
            "#doc d1 700\nJohn\tNNP\t1\nleft\tVBD\t-1\n.\t.\t1\n\nHe\tPRP\t1\nreturned\tVBD\t-1\n",
        )
        .unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].section_id, "700");
        assert_eq!(docs[0].sentences.len(), 2);
        assert_eq!(docs[0].sentences[0].len(), 3);
        assert_eq!(docs[0].sentences[1].tokens, ["He", "returned"]);
        assert_eq!(docs[0].sentences[1].head, [1, -1]);
    }

    #[test]
    fn empty_stream() {
        assert!(parse("").unwrap().is_empty());
    }

    #[test]
    fn missing_pos_names_line() {
        let err = parse("#doc d 1\nJohn\tNNP\t-1\nleft\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn head_out_of_range() {
        let err = parse("#doc d 1\n\nJohn\tNNP\t5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn rows_outside_document() {
        assert!(parse("John\tNNP\t-1\n").is_err());
    }

    #[test]
    fn duplicate_doc_ids() {
        assert!(parse("#doc a 1\n#doc a 2\n").is_err());
    }

    #[test]
    fn unknown_format_id() {
        assert!(matches!(
            "xml".parse::<CorpusFormat>(),
            Err(Error::Usage(_))
        ));
    }
}
