use super::factored::FactoredScores;
use super::ilm::IlmModel;
use super::posteriorgram::Posteriorgram;
use super::prior::{ContextOrder, ContextPrior, StateContext};
use crate::error::{Error, Result};
use crate::text::EOS;

/// Label name of the CTC and transducer blank.
pub const BLANK: &str = "<blank>";

/// Context-dependent step posteriors `p(y | history, step)`.
pub trait StepScorer: Sync {
    fn labels(&self) -> &[String];

    fn num_steps(&self) -> usize;

    /// How many trailing history labels the scores depend on; `None` means
    /// the whole history.
    fn context_len(&self) -> Option<usize>;

    /// Writes natural-log scores for every label into `out`.
    fn log_probs(&self, step: usize, history: &[usize], out: &mut [f64]);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Special {
    Blank(usize),
    End(usize),
}

impl Special {
    fn index(self) -> usize {
        match self {
            Special::Blank(i) | Special::End(i) => i,
        }
    }
}

/// Maps a scorer label index to the index used by a label model that lacks
/// the special label. The special label itself maps to the model's end.
#[inline]
pub(crate) fn to_model_index(idx: usize, special: usize, num_labels: usize) -> usize {
    match idx.cmp(&special) {
        std::cmp::Ordering::Less => idx,
        std::cmp::Ordering::Greater => idx - 1,
        std::cmp::Ordering::Equal => num_labels - 1,
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Table-driven step scorer: per-step evidence from a posteriorgram, shifted
/// towards a label model learned from training transcripts.
///
/// For transducers the blank keeps its evidence probability and the label
/// mass `1 - p(blank)` is redistributed in proportion to
/// `p(y|t) * P_int(y|history)^w`. For label-synchronous models every label,
/// the end symbol included, is rescored that way. Steps past the last row
/// reuse the last row.
#[derive(Clone, Debug)]
pub struct BiasedScorer {
    pg: Posteriorgram,
    special: Special,
    bias: Option<(IlmModel, f64)>,
}

impl BiasedScorer {
    /// Frame-synchronous scorer; the posteriorgram must hold [`BLANK`].
    pub fn transducer(pg: Posteriorgram, bias: Option<(IlmModel, f64)>) -> Result<Self> {
        let blank = pg
            .label_index(BLANK)
            .ok_or_else(|| Error::UnknownLabel(format!("{BLANK} missing from step posteriors")))?;
        Self::build(pg, Special::Blank(blank), bias, false)
    }

    /// Label-synchronous scorer; the posteriorgram holds one row per output
    /// position and must include the end symbol `</s>`.
    pub fn label_sync(pg: Posteriorgram, bias: Option<(IlmModel, f64)>) -> Result<Self> {
        let end = pg
            .label_index(EOS)
            .ok_or_else(|| Error::UnknownLabel(format!("{EOS} missing from step posteriors")))?;
        Self::build(pg, Special::End(end), bias, true)
    }

    fn build(
        pg: Posteriorgram,
        special: Special,
        bias: Option<(IlmModel, f64)>,
        with_end: bool,
    ) -> Result<Self> {
        if let Some((ilm, w)) = &bias {
            let expect: Vec<&String> = pg
                .labels()
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != special.index())
                .map(|(_, l)| l)
                .collect();
            let got: Vec<&String> = ilm.labels().iter().collect();
            if expect != got || ilm.has_end() != with_end {
                return Err(Error::VocabMismatch(
                    "label model does not match the step posterior labels".into(),
                ));
            }
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidArgument(format!("bias weight {w}")));
            }
        }
        Ok(BiasedScorer { pg, special, bias })
    }

    pub fn posteriorgram(&self) -> &Posteriorgram {
        &self.pg
    }

    /// Index of the blank or end label.
    pub fn special(&self) -> usize {
        self.special.index()
    }
}

impl StepScorer for BiasedScorer {
    fn labels(&self) -> &[String] {
        self.pg.labels()
    }

    fn num_steps(&self) -> usize {
        self.pg.num_frames()
    }

    fn context_len(&self) -> Option<usize> {
        Some(self.bias.as_ref().map_or(0, |(ilm, _)| ilm.context_len()))
    }

    fn log_probs(&self, step: usize, history: &[usize], out: &mut [f64]) {
        let row = self.pg.row(step.min(self.pg.num_frames() - 1));
        let Some((ilm, w)) = &self.bias else {
            for (o, &x) in out.iter_mut().zip(row) {
                *o = x as f64;
            }
            return;
        };
        let sp = self.special.index();
        let n_model = ilm.num_outputs();
        let n_all = ilm.labels().len() + 1;
        let hist: Vec<usize> = history
            .iter()
            .map(|&h| to_model_index(h, sp, n_all))
            .collect();
        let mut lm = vec![0.0; n_model];
        ilm.log_probs(&hist, &mut lm);
        match self.special {
            Special::Blank(b) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = if i == b {
                        f64::NEG_INFINITY
                    } else {
                        row[i] as f64 + w * lm[to_model_index(i, b, n_all)]
                    };
                }
                let lse = log_sum_exp(out.iter().copied());
                let pb = row[b] as f64;
                let label_mass = (-pb.exp()).ln_1p();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = if i == b { pb } else { label_mass + *o - lse };
                }
            }
            Special::End(e) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = row[i] as f64 + w * lm[to_model_index(i, e, n_all)];
                }
                let lse = log_sum_exp(out.iter().copied());
                for o in out.iter_mut() {
                    *o -= lse;
                }
            }
        }
    }
}

fn check_index(i: usize, n: usize) -> Result<()> {
    if i >= n {
        return Err(Error::UnknownLabel(format!(
            "label index {i} outside 0..{n}"
        )));
    }
    Ok(())
}

/// Factored hybrid frame score: the factor chain `p(l) p(c|l) p(r|c,l)` (or
/// `p(l) p(c|l)` without a right context) divided by the context prior
/// raised to `alpha`, in natural log.
pub fn fh_score(
    factors: &FactoredScores,
    prior: &ContextPrior,
    t: usize,
    left: usize,
    center: usize,
    right: Option<usize>,
    alpha: f64,
) -> Result<f64> {
    let n = factors.num_labels();
    check_index(left, n)?;
    check_index(center, n)?;
    if let Some(r) = right {
        check_index(r, n)?;
    }
    if t >= factors.num_frames() {
        return Err(Error::InvalidArgument(format!("frame {t} out of range")));
    }
    let want = if right.is_some() {
        ContextOrder::Tri
    } else {
        ContextOrder::Di
    };
    if prior.order() != want || prior.labels() != factors.labels() {
        return Err(Error::VocabMismatch(format!(
            "prior of order {:?} does not fit {:?} factors",
            prior.order(),
            want
        )));
    }
    Ok(fh_score_unchecked(
        factors, prior, t, left, center, right, alpha,
    ))
}

#[inline]
pub(crate) fn fh_score_unchecked(
    factors: &FactoredScores,
    prior: &ContextPrior,
    t: usize,
    left: usize,
    center: usize,
    right: Option<usize>,
    alpha: f64,
) -> f64 {
    let chain = factors.left(t, left) + factors.center(t, left, center);
    match right {
        Some(r) => {
            chain + factors.right(t, left, center, r)
                - alpha * prior.log_prob(StateContext::new(left, center, r))
        }
        None => chain - alpha * prior.log_prob(StateContext::new(left, center, 0)),
    }
}

/// CTC frame score: label posterior divided by the label prior raised to
/// `alpha`. The prior is a monophone prior over the posteriorgram labels,
/// blank included.
pub fn ctc_score(
    pg: &Posteriorgram,
    prior: &ContextPrior,
    t: usize,
    label: usize,
    alpha: f64,
) -> f64 {
    pg.log_prob(t, label) - alpha * prior.log_prob(StateContext::new(0, label, 0))
}

/// Transducer step score. Labels are divided by the internal LM raised to
/// `alpha`, evaluated on the same truncated history; the blank is returned
/// unchanged.
///
/// `step` holds the log posteriors of one step, `history` the previously
/// emitted labels, both indexed like the step labels. The internal LM must
/// be defined over the step labels without the blank, in the same order.
pub fn transducer_score(
    step: &[f64],
    blank: usize,
    ilm: &IlmModel,
    label: usize,
    history: &[usize],
    alpha: f64,
) -> Result<f64> {
    check_index(label, step.len())?;
    if ilm.labels().len() + 1 != step.len() {
        return Err(Error::VocabMismatch(
            "internal LM label count differs from step labels".into(),
        ));
    }
    if let Some(&h) = history.iter().find(|&&h| h == blank || h >= step.len()) {
        return Err(Error::UnknownLabel(format!(
            "history symbol {h} outside the label set"
        )));
    }
    if label == blank {
        return Ok(step[blank]);
    }
    let n_all = step.len();
    let hist: Vec<usize> = history
        .iter()
        .map(|&h| to_model_index(h, blank, n_all))
        .collect();
    let internal = ilm.log_prob(&hist, to_model_index(label, blank, n_all))?;
    Ok(step[label] - alpha * internal)
}
