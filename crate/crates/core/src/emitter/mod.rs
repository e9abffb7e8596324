//! Synthetic acoustic scores with temperature-controlled noise.
//!
//! Every frame carries a reference label `r`; its logits are
//! `gain * onehot(r) + temperature * eps` with `eps` i.i.d. standard normal,
//! and the row is their softmax. Noise streams are keyed by
//! `(seed, utterance index)`, so a set regenerates bit-identically no matter
//! how utterances are scheduled, and two models fed the same references and
//! seed see the same draws.

mod calibrate;
mod set;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::acoustic::{FactoredScores, Posteriorgram, BLANK};
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, SILENCE};
use crate::text::EOS;

pub use calibrate::{calibrate_tau, mean_wer, Calibration, CalibrationConfig};
pub use set::{synth_set, Emission, SynthSet, SynthTarget, SynthUtterance};

/// Frames per reference label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Durations {
    Fixed(usize),
    /// Per-label counts; labels missing from the table get `default`.
    Table {
        frames: BTreeMap<String, usize>,
        default: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitterConfig {
    pub temperature: f64,
    pub gain: f64,
    pub durations: Durations,
    pub seed: u64,
}

impl Default for EmitterConfig {
    fn default() -> Self {
        EmitterConfig {
            temperature: 0.0,
            gain: 50.0,
            durations: Durations::Fixed(2),
            seed: 0,
        }
    }
}

impl EmitterConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "temperature must be finite and >= 0, got {}",
                self.temperature
            )));
        }
        if !self.gain.is_finite() || self.gain < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "gain must be finite and >= 0, got {}",
                self.gain
            )));
        }
        let zero = match &self.durations {
            Durations::Fixed(k) => *k == 0,
            Durations::Table { frames, default } => {
                *default == 0 || frames.values().any(|&k| k == 0)
            }
        };
        if zero {
            return Err(Error::InvalidArgument(
                "durations must be at least one frame".into(),
            ));
        }
        Ok(())
    }

    pub fn with_temperature(&self, temperature: f64) -> Self {
        EmitterConfig {
            temperature,
            ..self.clone()
        }
    }
}

pub fn sample_durations<S: AsRef<str>>(labels: &[S], cfg: &EmitterConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no labels to emit".into()));
    }
    Ok(labels
        .iter()
        .map(|l| match &cfg.durations {
            Durations::Fixed(k) => *k,
            Durations::Table { frames, default } => {
                frames.get(l.as_ref()).copied().unwrap_or(*default)
            }
        })
        .collect())
}

/// How reference labels are laid out over frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Each label fills all of its frames (HMM).
    Repeat,
    /// Label on its first frame, blank on the rest. A label equal to its
    /// predecessor needs the predecessor to span two frames or more, or the
    /// pair would collapse.
    Ctc,
    /// Label on its first frame, blank on the rest.
    Transducer,
    /// One row per output position and a final end row; durations unused.
    LabelSync,
}

/// Label set and layout of a synthesized posteriorgram.
#[derive(Clone, Debug, PartialEq)]
pub struct EmissionTarget {
    labels: Vec<String>,
    layout: Layout,
    special: Option<usize>,
}

impl EmissionTarget {
    pub fn new(labels: Vec<String>, layout: Layout) -> Result<Self> {
        let need = match layout {
            Layout::Repeat => None,
            Layout::Ctc | Layout::Transducer => Some(BLANK),
            Layout::LabelSync => Some(EOS),
        };
        let special = match need {
            None => None,
            Some(s) => Some(labels.iter().position(|l| l == s).ok_or_else(|| {
                Error::UnknownLabel(format!("{s} missing from the emission labels"))
            })?),
        };
        Ok(EmissionTarget {
            labels,
            layout,
            special,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    fn index_of(&self, label: &str) -> Result<usize> {
        match self.labels.iter().position(|l| l == label) {
            Some(i) if Some(i) != self.special => Ok(i),
            _ => Err(Error::UnknownLabel(label.to_owned())),
        }
    }

    /// Reference label index of every frame.
    fn frame_labels<S: AsRef<str>>(
        &self,
        reference: &[S],
        cfg: &EmitterConfig,
    ) -> Result<Vec<usize>> {
        let ids = reference
            .iter()
            .map(|l| self.index_of(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        if self.layout == Layout::LabelSync {
            cfg.validate()?;
            let mut out = ids;
            out.push(self.special.unwrap());
            return Ok(out);
        }
        let dur = sample_durations(reference, cfg)?;
        let mut out = Vec::with_capacity(dur.iter().sum());
        for (i, (&id, &d)) in ids.iter().zip(&dur).enumerate() {
            match self.layout {
                Layout::Repeat => out.extend(std::iter::repeat_n(id, d)),
                _ => {
                    if self.layout == Layout::Ctc && i > 0 && ids[i - 1] == id && dur[i - 1] < 2 {
                        return Err(Error::InvalidArgument(format!(
                            "repeated label {} at position {i} needs a blank frame in between",
                            self.labels[id]
                        )));
                    }
                    out.push(id);
                    out.extend(std::iter::repeat_n(self.special.unwrap(), d - 1));
                }
            }
        }
        Ok(out)
    }
}

/// Noise source of one utterance.
pub(crate) fn utterance_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Log-softmax of `gain * onehot(target) + temperature * eps`.
fn noisy_row(target: usize, eps: &[f64], cfg: &EmitterConfig, out: &mut Vec<f32>) {
    let logits: Vec<f64> = eps
        .iter()
        .enumerate()
        .map(|(j, e)| cfg.temperature * e + if j == target { cfg.gain } else { 0.0 })
        .collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    out.extend(logits.iter().map(|x| (x - z) as f32));
}

/// Synthesizes a posteriorgram for `reference` using noise stream `stream`.
pub fn synth_posteriorgram<S: AsRef<str>>(
    target: &EmissionTarget,
    reference: &[S],
    cfg: &EmitterConfig,
    stream: u64,
) -> Result<Posteriorgram> {
    let frames = target.frame_labels(reference, cfg)?;
    let n = target.labels.len();
    let mut rng = utterance_rng(cfg.seed, stream);
    let mut data = Vec::with_capacity(frames.len() * n);
    for &r in &frames {
        noisy_row(r, &draw(&mut rng, n), cfg, &mut data);
    }
    Posteriorgram::new(target.labels.clone(), frames.len(), data)
}

/// Synthesizes factored hybrid scores over `labels`, which must include the
/// silence unit.
///
/// Frames follow the `Repeat` layout. Each frame draws one noise vector and
/// uses it for all three factors: the left factor peaks on the reference
/// left neighbour, the center factor on the reference unit (in every left
/// context) and the right factor on the reference right neighbour (in every
/// left and center context). Neighbours beyond the utterance are silence.
pub fn synth_factored<S: AsRef<str>>(
    labels: &[String],
    reference: &[S],
    cfg: &EmitterConfig,
    stream: u64,
) -> Result<FactoredScores> {
    let target = EmissionTarget::new(labels.to_vec(), Layout::Repeat)?;
    let sil = target.index_of(SILENCE)?;
    let ids = reference
        .iter()
        .map(|l| target.index_of(l.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let dur = sample_durations(reference, cfg)?;
    let n = labels.len();
    let total: usize = dur.iter().sum();
    let mut rng = utterance_rng(cfg.seed, stream);
    let (mut left, mut center, mut right) = (
        Vec::with_capacity(total * n),
        Vec::with_capacity(total * n * n),
        Vec::with_capacity(total * n * n * n),
    );
    for (i, (&c, &d)) in ids.iter().zip(&dur).enumerate() {
        let l = if i == 0 { sil } else { ids[i - 1] };
        let r = ids.get(i + 1).copied().unwrap_or(sil);
        for _ in 0..d {
            let eps = draw(&mut rng, n);
            let mut row = Vec::with_capacity(n);
            noisy_row(l, &eps, cfg, &mut left);
            noisy_row(c, &eps, cfg, &mut row);
            for _ in 0..n {
                center.extend_from_slice(&row);
            }
            row.clear();
            noisy_row(r, &eps, cfg, &mut row);
            for _ in 0..n * n {
                right.extend_from_slice(&row);
            }
        }
    }
    FactoredScores::new(labels.to_vec(), total, left, center, right)
}

/// Units of the first pronunciation of every word.
pub fn pronounce<S: AsRef<str>>(lexicon: &Lexicon, words: &[S]) -> Result<Vec<String>> {
    let inv = lexicon.inventory();
    let mut out = Vec::new();
    for w in words {
        let id = lexicon.word_id(w.as_ref()).ok_or_else(|| {
            Error::VocabMismatch(format!("word {:?} not in the lexicon", w.as_ref()))
        })?;
        out.extend(
            lexicon.prons(id)[0]
                .iter()
                .map(|&u| inv.symbol(u).to_owned()),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
