use std::path::{Path, PathBuf};

use super::posteriorgram::{check_groups, check_labels, decode, encode};
use crate::error::{Error, Result};

/// Factored context posteriors: `p(l|t)`, `p(c|l,t)` and `p(r|c,l,t)` over
/// one label set, stored as natural logs.
///
/// Layouts are `left[t][l]`, `center[t][l][c]` and `right[t][l][c][r]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredScores {
    labels: Vec<String>,
    frames: usize,
    left: Vec<f32>,
    center: Vec<f32>,
    right: Vec<f32>,
}

fn center_labels(labels: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(labels.len() * labels.len());
    for l in labels {
        for c in labels {
            out.push(format!("{c}|{l}"));
        }
    }
    out
}

fn right_labels(labels: &[String]) -> Vec<String> {
    let n = labels.len();
    let mut out = Vec::with_capacity(n * n * n);
    for l in labels {
        for c in labels {
            for r in labels {
                out.push(format!("{r}|{c},{l}"));
            }
        }
    }
    out
}

impl FactoredScores {
    pub fn new(
        labels: Vec<String>,
        frames: usize,
        left: Vec<f32>,
        center: Vec<f32>,
        right: Vec<f32>,
    ) -> Result<Self> {
        check_labels(&labels)?;
        let n = labels.len();
        if frames == 0 {
            return Err(Error::Posteriorgram("no frames".into()));
        }
        for (name, len, want) in [
            ("left", left.len(), frames * n),
            ("center", center.len(), frames * n * n),
            ("right", right.len(), frames * n * n * n),
        ] {
            if len != want {
                return Err(Error::Posteriorgram(format!(
                    "{name} factor has {len} values, expected {want}"
                )));
            }
        }
        check_groups(&left, n, "left factor, frame")?;
        check_groups(&center, n, "center factor, context")?;
        check_groups(&right, n, "right factor, context")?;
        Ok(FactoredScores {
            labels,
            frames,
            left,
            center,
            right,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn num_frames(&self) -> usize {
        self.frames
    }

    #[inline]
    pub fn left(&self, t: usize, l: usize) -> f64 {
        self.left[t * self.labels.len() + l] as f64
    }

    #[inline]
    pub fn center(&self, t: usize, l: usize, c: usize) -> f64 {
        let n = self.labels.len();
        self.center[(t * n + l) * n + c] as f64
    }

    #[inline]
    pub fn right(&self, t: usize, l: usize, c: usize, r: usize) -> f64 {
        let n = self.labels.len();
        self.right[((t * n + l) * n + c) * n + r] as f64
    }

    /// File names of the three factor files for a base path.
    pub fn paths(base: impl AsRef<Path>) -> [PathBuf; 3] {
        let base = base.as_ref().as_os_str();
        ["left", "center", "right"].map(|k| {
            let mut p = base.to_owned();
            p.push(format!(".{k}.pgm"));
            PathBuf::from(p)
        })
    }

    pub fn save(&self, base: impl AsRef<Path>) -> Result<()> {
        let [lp, cp, rp] = Self::paths(base);
        let files = [
            (lp, encode(&self.labels, self.frames, &self.left)),
            (
                cp,
                encode(&center_labels(&self.labels), self.frames, &self.center),
            ),
            (
                rp,
                encode(&right_labels(&self.labels), self.frames, &self.right),
            ),
        ];
        for (p, bytes) in files {
            std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    pub fn load(base: impl AsRef<Path>) -> Result<Self> {
        let paths = Self::paths(base);
        let mut parts = Vec::with_capacity(3);
        for p in &paths {
            let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
            let part = decode(&bytes).map_err(|e| match e {
                Error::Posteriorgram(msg) => {
                    Error::Posteriorgram(format!("{}: {msg}", p.display()))
                }
                e => e,
            })?;
            parts.push(part);
        }
        let (right_l, right_t, right) = parts.pop().unwrap();
        let (center_l, center_t, center) = parts.pop().unwrap();
        let (labels, frames, left) = parts.pop().unwrap();
        if center_t != frames || right_t != frames {
            return Err(Error::Posteriorgram(
                "factor files disagree on frame count".into(),
            ));
        }
        if center_l != center_labels(&labels) {
            return Err(Error::Posteriorgram(format!(
                "{}: labels are not the \"c|l\" expansion of the left factor labels",
                paths[1].display()
            )));
        }
        if right_l != right_labels(&labels) {
            return Err(Error::Posteriorgram(format!(
                "{}: labels are not the \"r|c,l\" expansion of the left factor labels",
                paths[2].display()
            )));
        }
        Self::new(labels, frames, left, center, right)
    }
}
