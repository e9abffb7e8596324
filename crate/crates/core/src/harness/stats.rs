use serde::{Deserialize, Serialize};

use super::report::{format_count, Report, Table};
use crate::error::Result;
use crate::ngram::{perplexity, NGramModel};
use crate::text::{build_vocabulary, oov_rate, Corpus};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainCell {
    /// Fraction of running words missing from the LM vocabulary.
    pub oov: f64,
    pub ppl: f64,
}

/// One LM with the size of its training text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmRow {
    pub name: String,
    pub running_words: u64,
    pub vocab_size: u64,
    /// One cell per evaluation corpus; `None` renders as `-`.
    pub cells: Vec<Option<DomainCell>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusInfo {
    pub name: String,
    pub running_words: u64,
    pub vocab_size: u64,
}

/// LMs as rows, an (OOV, PPL) column pair per evaluation corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainStats {
    pub corpora: Vec<CorpusInfo>,
    pub rows: Vec<LmRow>,
}

fn info(name: &str, corpus: &Corpus) -> Result<CorpusInfo> {
    Ok(CorpusInfo {
        name: name.to_owned(),
        running_words: corpus.running_words() as u64,
        vocab_size: build_vocabulary(corpus, None)?.regular_words().len() as u64,
    })
}

/// OOV rate and perplexity of every LM on every corpus. Each LM comes with
/// its training text, which supplies the running-word and vocabulary counts.
pub fn domain_stats(
    lms: &[(&str, &NGramModel, &Corpus)],
    corpora: &[(&str, &Corpus)],
) -> Result<DomainStats> {
    let mut rows = Vec::with_capacity(lms.len());
    for &(name, lm, train) in lms {
        let train_info = info(name, train)?;
        let cells = corpora
            .iter()
            .map(|&(_, c)| {
                Ok(Some(DomainCell {
                    oov: oov_rate(c, lm.vocab()),
                    ppl: perplexity(lm, c)?.perplexity,
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(LmRow {
            name: name.to_owned(),
            running_words: train_info.running_words,
            vocab_size: train_info.vocab_size,
            cells,
        });
    }
    let corpora = corpora
        .iter()
        .map(|&(n, c)| info(n, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(DomainStats { corpora, rows })
}

impl Report for DomainStats {
    fn to_table(&self) -> Table {
        let mut header = vec![
            "LM".to_owned(),
            "Running Words".to_owned(),
            "Vocab Size".to_owned(),
        ];
        for c in &self.corpora {
            header.push(format!("{} OOV[%]", c.name));
            header.push(format!("{} PPL", c.name));
        }
        let numeric = (0..header.len()).map(|i| i > 0).collect();
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = vec![
                    r.name.clone(),
                    format_count(r.running_words),
                    format_count(r.vocab_size),
                ];
                for c in &r.cells {
                    match c {
                        Some(c) => {
                            cells.push(format!("{:.1}", c.oov * 100.0));
                            cells.push(format!("{:.0}", c.ppl));
                        }
                        None => cells.extend(["-".to_owned(), "-".to_owned()]),
                    }
                }
                cells
            })
            .collect();
        Table {
            header,
            numeric,
            rows,
        }
    }
}
