//! ARPA text serialization.
//!
//! Probabilities are written with six decimals; back-off weights carry nine so
//! that a back-off chain accumulates at most one rounded probability term.
//! Zero probabilities (and zero back-off mass) are written as `-99`, and any
//! value at or below `-99` reads back as zero.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::model::Entry;
use super::NGramModel;
use crate::error::{Error, Result};
use crate::ngram::MAX_ORDER;
use crate::text::{TokenId, Vocabulary};

const ZERO_LOG: f64 = -99.0;

fn fmt_log(x: f64, decimals: usize) -> String {
    if x == f64::NEG_INFINITY || x <= ZERO_LOG {
        format!("{ZERO_LOG:.decimals$}")
    } else {
        format!("{x:.decimals$}")
    }
}

fn parse_log(s: &str, line: usize) -> Result<f64> {
    let x: f64 = s.parse().map_err(|_| Error::Arpa {
        line,
        msg: format!("invalid number {s:?}"),
    })?;
    Ok(if x <= ZERO_LOG { f64::NEG_INFINITY } else { x })
}

/// Renders `model` as ARPA text. Entries are ordered by token id sequence so
/// the output is byte-deterministic.
pub fn write_arpa(model: &NGramModel) -> String {
    let vocab = model.vocab();
    let tables = model.tables();
    let mut out = String::from("\\data\\\n");
    for (k, t) in tables.iter().enumerate() {
        let _ = writeln!(out, "ngram {}={}", k + 1, t.len());
    }
    for (k, t) in tables.iter().enumerate() {
        let _ = write!(out, "\n\\{}-grams:\n", k + 1);
        let mut keys: Vec<&Vec<TokenId>> = t.keys().collect();
        keys.sort();
        for key in keys {
            let e = &t[key];
            out.push_str(&fmt_log(e.log10_prob, 6));
            out.push('\t');
            let words: Vec<&str> = key.iter().map(|&id| vocab.word(id)).collect();
            out.push_str(&words.join(" "));
            if let Some(b) = e.backoff {
                out.push('\t');
                out.push_str(&fmt_log(b, 9));
            }
            out.push('\n');
        }
    }
    out.push_str("\n\\end\\\n");
    out
}

/// Parses ARPA text. Section counts must match the `\data\` header.
pub fn read_arpa(text: &str) -> Result<NGramModel> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .peekable();

    // skip any preamble before \data\
    loop {
        match lines.next() {
            Some((_, "\\data\\")) => break,
            Some(_) => continue,
            None => {
                return Err(Error::Arpa {
                    line: 1,
                    msg: "missing \\data\\ section".into(),
                })
            }
        }
    }

    let mut declared: Vec<usize> = Vec::new();
    let mut last_line = 1;
    while let Some(&(ln, line)) = lines.peek() {
        last_line = ln;
        if line.is_empty() {
            lines.next();
            if !declared.is_empty() {
                break;
            }
            continue;
        }
        let Some(rest) = line.strip_prefix("ngram ") else {
            break;
        };
        let (n, count) = rest.split_once('=').ok_or_else(|| Error::Arpa {
            line: ln,
            msg: format!("malformed count line {line:?}"),
        })?;
        let n: usize = n.trim().parse().map_err(|_| Error::Arpa {
            line: ln,
            msg: format!("malformed count line {line:?}"),
        })?;
        let count: usize = count.trim().parse().map_err(|_| Error::Arpa {
            line: ln,
            msg: format!("malformed count line {line:?}"),
        })?;
        if n != declared.len() + 1 {
            return Err(Error::Arpa {
                line: ln,
                msg: format!(
                    "expected ngram {} count, found ngram {n}",
                    declared.len() + 1
                ),
            });
        }
        declared.push(count);
        lines.next();
    }
    if declared.is_empty() {
        return Err(Error::Arpa {
            line: last_line,
            msg: "empty \\data\\ section".into(),
        });
    }
    let order = declared.len();
    if order > MAX_ORDER {
        return Err(Error::Arpa {
            line: last_line,
            msg: format!("order {order} exceeds the maximum of {MAX_ORDER}"),
        });
    }

    let mut raw: Vec<Vec<(Vec<String>, f64, Option<f64>)>> = Vec::with_capacity(order);
    for (k, &count) in declared.iter().enumerate() {
        let n = k + 1;
        let header = format!("\\{n}-grams:");
        let header_line = loop {
            match lines.next() {
                Some((_, "")) => continue,
                Some((ln, l)) if l == header => break ln,
                Some((ln, l)) => {
                    return Err(Error::Arpa {
                        line: ln,
                        msg: format!("expected section header {header}, found {l:?}"),
                    })
                }
                None => {
                    return Err(Error::Arpa {
                        line: last_line,
                        msg: format!("missing section {header}"),
                    })
                }
            }
        };
        let mut entries = Vec::with_capacity(count);
        let mut end_line = header_line;
        while let Some(&(ln, line)) = lines.peek() {
            if line.is_empty() || line.starts_with('\\') {
                break;
            }
            end_line = ln;
            lines.next();
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != n + 1 && fields.len() != n + 2 {
                return Err(Error::Arpa {
                    line: ln,
                    msg: format!("{header} entry must have {} or {} fields", n + 1, n + 2),
                });
            }
            let lp = parse_log(fields[0], ln)?;
            let words = fields[1..=n].iter().map(|w| (*w).to_owned()).collect();
            let bow = match fields.get(n + 1) {
                Some(b) => Some(parse_log(b, ln)?),
                None => None,
            };
            entries.push((words, lp, bow));
        }
        if entries.len() != count {
            return Err(Error::Arpa {
                line: end_line,
                msg: format!(
                    "section {header} declares {count} entries but lists {}",
                    entries.len()
                ),
            });
        }
        raw.push(entries);
    }
    loop {
        match lines.next() {
            Some((_, "")) => continue,
            Some((_, "\\end\\")) => break,
            Some((ln, l)) => {
                return Err(Error::Arpa {
                    line: ln,
                    msg: format!("expected \\end\\, found {l:?}"),
                })
            }
            None => {
                return Err(Error::Arpa {
                    line: last_line,
                    msg: "missing \\end\\".into(),
                })
            }
        }
    }

    let vocab = Vocabulary::from_words(raw[0].iter().map(|(w, _, _)| w[0].as_str()));
    let mut tables = Vec::with_capacity(order);
    for (k, entries) in raw.into_iter().enumerate() {
        let mut table = HashMap::with_capacity(entries.len());
        for (words, log10_prob, backoff) in entries {
            let mut key = Vec::with_capacity(words.len());
            for w in &words {
                key.push(vocab.id(w).ok_or_else(|| Error::Arpa {
                    line: 0,
                    msg: format!("{}-gram uses word {w:?} missing from the unigrams", k + 1),
                })?);
            }
            table.insert(
                key,
                Entry {
                    log10_prob,
                    backoff,
                },
            );
        }
        tables.push(table);
    }
    Ok(NGramModel::from_tables(order, vocab, tables))
}

impl NGramModel {
    pub fn read_arpa_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        read_arpa(&crate::error::read_to_string(path.as_ref())?)
    }

    pub fn write_arpa_file(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::error::write_string(path.as_ref(), &write_arpa(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ngram::{count_ngrams, estimate_ngram, Smoothing};
    use crate::text::{build_vocabulary, Corpus};

    fn model(text: &str, order: usize, smoothing: Smoothing) -> NGramModel {
        let c = Corpus::from_text("t", text);
        let v = build_vocabulary(&c, None).unwrap();
        estimate_ngram(&count_ngrams(&c, &v, order).unwrap(), smoothing).unwrap()
    }

    fn max_drift(a: &NGramModel, b: &NGramModel, contexts: &[Vec<TokenId>]) -> f64 {
        let mut worst: f64 = 0.0;
        for ctx in contexts {
            for t in 0..a.vocab().len() as TokenId {
                let (x, y) = (a.log10_prob(ctx, t), b.log10_prob(ctx, t));
                if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
                    assert_eq!(x, y);
                } else {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    }

    #[test]
    fn mle_bigram_round_trip_all_queries() {
        let m = model("a a b", 2, Smoothing::Mle);
        let back = read_arpa(&write_arpa(&m)).unwrap();
        assert_eq!(back.vocab(), m.vocab());
        // the three states <s>, a, b against the three tokens a, b, </s>
        let ids = |w: &str| m.vocab().id(w).unwrap();
        let states: Vec<Vec<TokenId>> = ["<s>", "a", "b"].iter().map(|w| vec![ids(w)]).collect();
        let mut checked = 0;
        for s in &states {
            for w in ["a", "b", "</s>"] {
                let (x, y) = (m.log10_prob(s, ids(w)), back.log10_prob(s, ids(w)));
                assert!(x == y || (x - y).abs() <= 1e-6, "{x} vs {y}");
                checked += 1;
            }
        }
        assert_eq!(checked, 9);
    }

    #[test]
    fn discounted_trigram_round_trip() {
        let m = model("a b c a b\nb c a\nc c b a", 3, Smoothing::default());
        let text = write_arpa(&m);
        let back = read_arpa(&text).unwrap();
        let v = m.vocab().len() as TokenId;
        let mut contexts = vec![vec![]];
        for a in 0..v {
            contexts.push(vec![a]);
            for b in 0..v {
                contexts.push(vec![a, b]);
            }
        }
        assert!(max_drift(&m, &back, &contexts) <= 1e-6);
        // writing the parsed model again is stable
        assert_eq!(write_arpa(&back), text);
    }

    #[test]
    fn empty_data_section_is_rejected() {
        let err = read_arpa("\\data\\\n\n\\end\\\n").unwrap_err();
        assert!(err.to_string().contains("empty \\data\\ section"), "{err}");
    }

    #[test]
    fn count_mismatch_names_the_section() {
        let text = "\\data\\\nngram 1=3\n\n\\1-grams:\n-0.3\ta\n-0.3\t</s>\n\n\\end\\\n";
        let err = read_arpa(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("\\1-grams:"), "{msg}");
        assert!(msg.contains("line 6"), "{msg}");
    }

    #[test]
    fn missing_end_is_rejected() {
        let text = "\\data\\\nngram 1=1\n\n\\1-grams:\n-0.3\ta\n";
        assert!(read_arpa(text).is_err());
    }

    #[test]
    fn output_layout() {
        let m = model("a", 1, Smoothing::Mle);
        let text = write_arpa(&m);
        let expected = "\\data\\\nngram 1=3\n\n\\1-grams:\n-99.000000\t<s>\n-0.301030\t</s>\n-0.301030\ta\n\n\\end\\\n";
        assert_eq!(text, expected);
    }
}
