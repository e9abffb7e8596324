use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EditOp {
    Match,
    Substitution,
    Insertion,
    Deletion,
}

/// Error counts against `ref_words` reference tokens.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_words: usize,
}

impl ErrorCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    /// `(S + I + D) / N`. An empty reference gives 0 without errors and
    /// infinity with insertions.
    pub fn wer(&self) -> f64 {
        match (self.errors(), self.ref_words) {
            (0, _) => 0.0,
            (_, 0) => f64::INFINITY,
            (e, n) => e as f64 / n as f64,
        }
    }

    fn add(&mut self, o: &ErrorCounts) {
        self.substitutions += o.substitutions;
        self.insertions += o.insertions;
        self.deletions += o.deletions;
        self.ref_words += o.ref_words;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceErrors {
    pub id: String,
    #[serde(flatten)]
    pub counts: ErrorCounts,
}

/// Aggregate error counts with the per-utterance breakdown, ordered by
/// utterance id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WerReport {
    #[serde(flatten)]
    pub totals: ErrorCounts,
    pub utterances: Vec<UtteranceErrors>,
}

impl WerReport {
    pub fn from_utterances(mut utterances: Vec<UtteranceErrors>) -> Self {
        utterances.sort_by(|a, b| a.id.cmp(&b.id));
        let mut totals = ErrorCounts::default();
        for u in &utterances {
            totals.add(&u.counts);
        }
        WerReport { totals, utterances }
    }

    pub fn wer(&self) -> f64 {
        self.totals.wer()
    }

    pub fn substitutions(&self) -> usize {
        self.totals.substitutions
    }

    pub fn insertions(&self) -> usize {
        self.totals.insertions
    }

    pub fn deletions(&self) -> usize {
        self.totals.deletions
    }

    pub fn ref_words(&self) -> usize {
        self.totals.ref_words
    }

    /// Shares of substitutions, insertions and deletions among all errors.
    pub fn profile(&self) -> Result<[f64; 3]> {
        let e = self.totals.errors();
        if e == 0 {
            return Err(Error::ProfileUndefined);
        }
        let t = &self.totals;
        Ok([t.substitutions, t.insertions, t.deletions].map(|c| c as f64 / e as f64))
    }
}

/// Minimal unit-cost edit script turning `reference` into `hypothesis`.
///
/// Among minimal scripts the one with the fewest insertions plus deletions
/// wins; remaining ties put substitutions as far left as possible.
pub fn align<S: PartialEq>(reference: &[S], hypothesis: &[S]) -> Vec<EditOp> {
    let (n, m) = (reference.len(), hypothesis.len());
    // cost[i][j]: (edits, insertions + deletions) to align the suffixes
    let w = m + 1;
    let mut cost = vec![(0usize, 0usize); (n + 1) * w];
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            let c = if i == n {
                (m - j, m - j)
            } else if j == m {
                (n - i, n - i)
            } else {
                let d = cost[(i + 1) * w + j + 1];
                let diag = if reference[i] == hypothesis[j] {
                    d
                } else {
                    (d.0 + 1, d.1)
                };
                let del = cost[(i + 1) * w + j];
                let ins = cost[i * w + j + 1];
                diag.min((del.0 + 1, del.1 + 1)).min((ins.0 + 1, ins.1 + 1))
            };
            cost[i * w + j] = c;
        }
    }
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        let here = cost[i * w + j];
        if i < n && j < m {
            let d = cost[(i + 1) * w + j + 1];
            let same = reference[i] == hypothesis[j];
            if (same && d == here) || (!same && (d.0 + 1, d.1) == here) {
                ops.push(if same {
                    EditOp::Match
                } else {
                    EditOp::Substitution
                });
                i += 1;
                j += 1;
                continue;
            }
        }
        if i < n {
            let d = cost[(i + 1) * w + j];
            if (d.0 + 1, d.1 + 1) == here {
                ops.push(EditOp::Deletion);
                i += 1;
                continue;
            }
        }
        ops.push(EditOp::Insertion);
        j += 1;
    }
    ops
}

pub fn error_counts<S: PartialEq>(reference: &[S], hypothesis: &[S]) -> ErrorCounts {
    let mut c = ErrorCounts {
        ref_words: reference.len(),
        ..ErrorCounts::default()
    };
    for op in align(reference, hypothesis) {
        match op {
            EditOp::Match => {}
            EditOp::Substitution => c.substitutions += 1,
            EditOp::Insertion => c.insertions += 1,
            EditOp::Deletion => c.deletions += 1,
        }
    }
    c
}

/// WER of a single utterance; tokens compare by exact string equality.
pub fn compute_wer<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> WerReport {
    let r: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    let h: Vec<&str> = hypothesis.iter().map(AsRef::as_ref).collect();
    WerReport::from_utterances(vec![UtteranceErrors {
        id: String::new(),
        counts: error_counts(&r, &h),
    }])
}

/// Largest absolute difference between the S, I and D shares of two
/// reports, computed from their aggregate counts.
pub fn error_profile_delta(a: &WerReport, b: &WerReport) -> Result<f64> {
    let (pa, pb) = (a.profile()?, b.profile()?);
    Ok(pa
        .iter()
        .zip(&pb)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}
