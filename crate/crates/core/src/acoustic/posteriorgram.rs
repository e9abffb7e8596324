use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PGRM";
const VERSION: u32 = 1;

/// Tolerance on the probability mass of a stored row.
pub const ROW_TOLERANCE: f64 = 1e-5;

/// Per-frame natural-log label probabilities, `T x V`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Posteriorgram {
    labels: Vec<String>,
    frames: usize,
    data: Vec<f32>,
}

/// Mass of `row` in probability space.
pub(crate) fn row_mass(row: &[f32]) -> f64 {
    row.iter().map(|&x| (x as f64).exp()).sum()
}

pub(crate) fn check_labels(labels: &[String]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::Posteriorgram("empty label set".into()));
    }
    let mut seen = HashSet::new();
    for l in labels {
        if l.is_empty() || l.contains('\0') {
            return Err(Error::Posteriorgram(format!("invalid label {l:?}")));
        }
        if !seen.insert(l.as_str()) {
            return Err(Error::Posteriorgram(format!("duplicate label {l:?}")));
        }
    }
    Ok(())
}

/// Checks that every group of `group` consecutive values is a normalized
/// log distribution.
pub(crate) fn check_groups(data: &[f32], group: usize, what: &str) -> Result<()> {
    for (i, g) in data.chunks(group).enumerate() {
        if let Some(x) = g
            .iter()
            .find(|x| x.is_nan() || **x == f32::INFINITY || **x > 1e-4)
        {
            return Err(Error::Posteriorgram(format!(
                "{what} {i}: invalid log-probability {x}"
            )));
        }
        let s = row_mass(g);
        if (s - 1.0).abs() > ROW_TOLERANCE {
            return Err(Error::Posteriorgram(format!(
                "{what} {i}: row not normalized (mass {s:.6})"
            )));
        }
    }
    Ok(())
}

impl Posteriorgram {
    pub fn new(labels: Vec<String>, frames: usize, data: Vec<f32>) -> Result<Self> {
        check_labels(&labels)?;
        if frames == 0 {
            return Err(Error::Posteriorgram("no frames".into()));
        }
        if data.len() != frames * labels.len() {
            return Err(Error::Posteriorgram(format!(
                "expected {} values for {frames} x {}, got {}",
                frames * labels.len(),
                labels.len(),
                data.len()
            )));
        }
        check_groups(&data, labels.len(), "frame")?;
        Ok(Posteriorgram {
            labels,
            frames,
            data,
        })
    }

    /// Builds a posteriorgram from probability rows.
    pub fn from_probs(labels: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let data = rows.iter().flatten().map(|&p| p.ln() as f32).collect();
        Self::new(labels, rows.len(), data)
    }

    /// Builds a posteriorgram from natural-log rows.
    pub fn from_log_rows(labels: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let data = rows.iter().flatten().map(|&p| p as f32).collect();
        Self::new(labels, rows.len(), data)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn num_frames(&self) -> usize {
        self.frames
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, t: usize) -> &[f32] {
        let v = self.labels.len();
        &self.data[t * v..(t + 1) * v]
    }

    pub fn log_prob(&self, t: usize, label: usize) -> f64 {
        self.data[t * self.labels.len() + label] as f64
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode(&self.labels, self.frames, &self.data)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (labels, frames, data) = decode(bytes)?;
        Self::new(labels, frames, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Posteriorgram(msg) => Error::Posteriorgram(format!("{}: {msg}", path.display())),
            e => e,
        })
    }
}

pub(crate) fn encode(labels: &[String], frames: usize, data: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(frames as u32).to_le_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_le_bytes());
    for l in labels {
        out.extend_from_slice(l.as_bytes());
        out.push(0);
    }
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Posteriorgram("unexpected end of data".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Reads the raw matrix without checking normalization.
pub(crate) fn decode(bytes: &[u8]) -> Result<(Vec<String>, usize, Vec<f32>)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Posteriorgram("magic mismatch".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Posteriorgram(format!(
            "unsupported version {version}"
        )));
    }
    let frames = r.u32()? as usize;
    let v = r.u32()? as usize;
    // every label needs at least two bytes and every value four
    let cells = frames.checked_mul(v).and_then(|c| c.checked_mul(4));
    match cells {
        Some(c) if v.saturating_mul(2).saturating_add(c) <= bytes.len() - r.pos => {}
        Some(_) => return Err(Error::Posteriorgram("unexpected end of data".into())),
        None => {
            return Err(Error::Posteriorgram(format!(
                "dimension overflow ({frames} x {v})"
            )))
        }
    }
    let mut labels = Vec::with_capacity(v);
    for _ in 0..v {
        let rest = &r.bytes[r.pos..];
        let end = rest
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| Error::Posteriorgram("unexpected end of data".into()))?;
        let label = std::str::from_utf8(&rest[..end])
            .map_err(|_| Error::Posteriorgram("label is not UTF-8".into()))?
            .to_owned();
        r.pos += end + 1;
        labels.push(label);
    }
    let raw = r.take(frames * v * 4)?;
    let data = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if r.pos != bytes.len() {
        return Err(Error::Posteriorgram(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok((labels, frames, data))
}
