use std::path::Path;

use crate::error::{read_to_string, Error, Result};

/// Whitespace-tokenized text, one sentence per line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    name: String,
    lines: Vec<Vec<String>>,
}

impl Corpus {
    /// Builds a corpus from already tokenized lines. Tokens must be non-empty
    /// and free of whitespace.
    pub fn new(name: impl Into<String>, lines: Vec<Vec<String>>) -> Result<Self> {
        for line in &lines {
            for token in line {
                if token.is_empty() || token.chars().any(char::is_whitespace) {
                    return Err(Error::InvalidArgument(format!(
                        "invalid corpus token {token:?}"
                    )));
                }
            }
        }
        Ok(Corpus {
            name: name.into(),
            lines,
        })
    }

    /// Splits each non-blank line of `text` on whitespace.
    pub fn from_text(name: impl Into<String>, text: &str) -> Self {
        let lines = text
            .lines()
            .map(|l| l.split_whitespace().map(str::to_owned).collect::<Vec<_>>())
            .filter(|l| !l.is_empty())
            .collect();
        Corpus {
            name: name.into(),
            lines,
        }
    }

    pub fn from_lines<I, S>(name: impl Into<String>, lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let text = lines
            .into_iter()
            .map(|l| l.as_ref().to_owned())
            .collect::<Vec<_>>()
            .join("\n");
        Self::from_text(name, &text)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self::from_text(name, &text))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lines(&self) -> &[Vec<String>] {
        &self.lines
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    /// Number of running words (tokens) over all lines.
    pub fn running_words(&self) -> usize {
        self.lines.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.running_words() == 0
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().flatten().map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_text_skips_blank_lines() {
        let c = Corpus::from_text("c", "a b\n\n  \nc\n");
        assert_eq!(c.num_lines(), 2);
        assert_eq!(c.running_words(), 3);
    }

    #[test]
    fn rejects_whitespace_tokens() {
        assert!(Corpus::new("c", vec![vec!["a b".into()]]).is_err());
        assert!(Corpus::new("c", vec![vec!["".into()]]).is_err());
    }
}
