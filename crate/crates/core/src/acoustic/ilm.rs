use std::fmt;
use std::str::FromStr;

use super::prior::floor_and_renormalize;
use crate::error::{Error, Result};
use crate::ngram::{count_ngrams, estimate_ngram, NGramModel, Smoothing, LN_10};
use crate::text::{Corpus, TokenId, Vocabulary, BOS_ID, EOS_ID};

/// Lower bound on internal-LM probabilities.
pub const ILM_FLOOR: f64 = 1e-8;

/// Label context of an internal LM: none, the previous label, or an n-gram
/// of the given order standing in for the unbounded history.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IlmOrder {
    Zero,
    One,
    Full(usize),
}

impl IlmOrder {
    /// Number of trailing history labels the distribution depends on.
    pub fn context_len(self) -> usize {
        match self {
            IlmOrder::Zero => 0,
            IlmOrder::One => 1,
            IlmOrder::Full(n) => n - 1,
        }
    }
}

impl fmt::Display for IlmOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IlmOrder::Zero => write!(f, "0"),
            IlmOrder::One => write!(f, "1"),
            IlmOrder::Full(n) => write!(f, "inf:{n}"),
        }
    }
}

impl FromStr for IlmOrder {
    type Err = Error;

    /// Accepts `0`, `1` and `inf:N` with `N >= 2`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0" => Ok(IlmOrder::Zero),
            "1" => Ok(IlmOrder::One),
            _ => s
                .strip_prefix("inf:")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| (2..=crate::ngram::MAX_ORDER).contains(&n))
                .map(IlmOrder::Full)
                .ok_or_else(|| Error::InvalidArgument(format!("invalid label context {s:?}"))),
        }
    }
}

/// Count-based label-sequence model over a fixed label list.
///
/// Label `i` is index `i` into [`IlmModel::labels`]. With an end symbol the
/// model also predicts sequence end at index `labels().len()`. N-gram
/// distributions are renormalized over exactly these outputs.
#[derive(Clone, Debug)]
pub struct IlmModel {
    order: IlmOrder,
    labels: Vec<String>,
    with_end: bool,
    unigram: Vec<f64>,
    lm: Option<NGramModel>,
    ids: Vec<TokenId>,
}

/// Estimates a label model from training transcripts.
pub fn estimate_ilm(
    transcripts: &[Vec<String>],
    labels: Vec<String>,
    order: IlmOrder,
    with_end: bool,
    smoothing: Smoothing,
) -> Result<IlmModel> {
    if transcripts.iter().all(|t| t.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    let vocab = Vocabulary::from_words(&labels);
    if vocab.len() != labels.len() + 3 {
        return Err(Error::InvalidArgument(
            "label list has duplicates or reserved symbols".into(),
        ));
    }
    for w in transcripts.iter().flatten() {
        if vocab.id(w).is_none() {
            return Err(Error::UnknownLabel(w.clone()));
        }
    }
    let ids: Vec<TokenId> = labels.iter().map(|l| vocab.id(l).unwrap()).collect();
    let mut model = IlmModel {
        order,
        labels,
        with_end,
        unigram: Vec::new(),
        lm: None,
        ids,
    };
    match order {
        IlmOrder::Zero => {
            let n = model.num_outputs();
            let mut counts = vec![0.0; n];
            for t in transcripts {
                for w in t {
                    counts[(vocab.id(w).unwrap() - 3) as usize] += 1.0;
                }
                if with_end {
                    counts[n - 1] += 1.0;
                }
            }
            floor_and_renormalize(&mut counts, ILM_FLOOR)?;
            model.unigram = counts.into_iter().map(f64::ln).collect();
        }
        IlmOrder::One | IlmOrder::Full(_) => {
            let n = order.context_len() + 1;
            let corpus = Corpus::new("ilm", transcripts.to_vec())?;
            model.lm = Some(estimate_ngram(
                &count_ngrams(&corpus, &vocab, n)?,
                smoothing,
            )?);
        }
    }
    Ok(model)
}

impl IlmModel {
    pub fn order(&self) -> IlmOrder {
        self.order
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn has_end(&self) -> bool {
        self.with_end
    }

    /// Index of the end symbol, when modelled.
    pub fn end(&self) -> Option<usize> {
        self.with_end.then_some(self.labels.len())
    }

    /// Number of predicted symbols: labels plus the optional end.
    pub fn num_outputs(&self) -> usize {
        self.labels.len() + self.with_end as usize
    }

    pub fn context_len(&self) -> usize {
        self.order.context_len()
    }

    /// Natural-log probability of `y` after `history` (label indices).
    pub fn log_prob(&self, history: &[usize], y: usize) -> Result<f64> {
        if let Some(&h) = history.iter().find(|&&h| h >= self.labels.len()) {
            return Err(Error::UnknownLabel(format!("history index {h}")));
        }
        if y >= self.num_outputs() {
            return Err(Error::UnknownLabel(format!("label index {y}")));
        }
        let mut out = vec![0.0; self.num_outputs()];
        self.log_probs(history, &mut out);
        Ok(out[y])
    }

    /// Fills `out` with the log-probabilities of every output after
    /// `history`. History entries must be valid label indices.
    pub fn log_probs(&self, history: &[usize], out: &mut [f64]) {
        let floor = ILM_FLOOR.ln();
        let Some(lm) = &self.lm else {
            out.copy_from_slice(&self.unigram);
            return;
        };
        let k = self.order.context_len();
        let mut ctx = Vec::with_capacity(k);
        if history.len() < k {
            ctx.push(BOS_ID);
        }
        let start = history.len().saturating_sub(k);
        ctx.extend(history[start..].iter().map(|&h| self.ids[h]));
        for (o, &id) in out.iter_mut().zip(&self.ids) {
            *o = lm.log10_prob(&ctx, id) * LN_10;
        }
        if self.with_end {
            out[self.labels.len()] = lm.log10_prob(&ctx, EOS_ID) * LN_10;
        }
        // restrict to the closed output set: drop the unknown-word mass and,
        // without an end symbol, the sentence-end mass
        let norm = out.iter().map(|x| x.exp()).sum::<f64>().ln();
        if norm == f64::NEG_INFINITY {
            // unseen context under maximum likelihood
            out.fill(-(out.len() as f64).ln());
            return;
        }
        for o in out.iter_mut() {
            *o = (*o - norm).max(floor);
        }
    }

    /// The underlying n-gram model, for orders above zero.
    pub fn ngram(&self) -> Option<&NGramModel> {
        self.lm.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ngram::DEFAULT_DISCOUNT;

    fn seqs(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(String::from).collect())
            .collect()
    }

    fn ab() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn unigram_relative_frequency() {
        let ilm = estimate_ilm(
            &seqs(&["a b a"]),
            ab(),
            IlmOrder::Zero,
            false,
            Smoothing::Mle,
        )
        .unwrap();
        assert!((ilm.log_prob(&[], 0).unwrap() - (2.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((ilm.log_prob(&[], 1).unwrap() - (1.0f64 / 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn bigram_mle() {
        let ilm = estimate_ilm(
            &seqs(&["a b a b"]),
            ab(),
            IlmOrder::One,
            false,
            Smoothing::Mle,
        )
        .unwrap();
        assert!(ilm.log_prob(&[0], 1).unwrap().abs() < 1e-12);
        // only the previous label matters
        assert_eq!(
            ilm.log_prob(&[1, 1, 0], 1).unwrap(),
            ilm.log_prob(&[0], 1).unwrap()
        );
    }

    #[test]
    fn full_order_matches_ngram_model() {
        let data = seqs(&["a b a b", "b b a", "a a b a"]);
        let smoothing = Smoothing::AbsoluteDiscount(DEFAULT_DISCOUNT);
        let ilm = estimate_ilm(&data, ab(), IlmOrder::Full(3), true, smoothing).unwrap();
        let corpus = Corpus::new("x", data.clone()).unwrap();
        let vocab = Vocabulary::from_words(ab());
        let lm = estimate_ngram(&count_ngrams(&corpus, &vocab, 3).unwrap(), smoothing).unwrap();
        let hist = [vec![], vec![0], vec![1, 0], vec![0, 1, 1]];
        for h in &hist {
            let mut ctx: Vec<TokenId> = vec![BOS_ID];
            ctx.extend(h.iter().map(|&i| i as TokenId + 3));
            let ctx = &ctx[ctx.len().saturating_sub(2)..];
            let ids = [3, 4, EOS_ID];
            // same n-gram scores, conditioned on not producing <unk>
            let mass: f64 = ids
                .iter()
                .map(|&id| 10f64.powf(lm.log10_prob(ctx, id)))
                .sum();
            for (y, &id) in ids.iter().enumerate() {
                let want = lm.log10_prob(ctx, id) * LN_10 - mass.ln();
                assert!((ilm.log_prob(h, y).unwrap() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalized_per_context_without_end() {
        let data = seqs(&["a b a b", "b b a"]);
        for order in [IlmOrder::Zero, IlmOrder::One, IlmOrder::Full(3)] {
            let ilm = estimate_ilm(&data, ab(), order, false, Smoothing::default()).unwrap();
            for h in [vec![], vec![0], vec![1], vec![0, 1]] {
                let mut out = vec![0.0; 2];
                ilm.log_probs(&h, &mut out);
                let s: f64 = out.iter().map(|x| x.exp()).sum();
                assert!((s - 1.0).abs() < 1e-6, "{order:?} {h:?}: {s}");
            }
        }
    }

    #[test]
    fn errors() {
        assert!(estimate_ilm(&[], ab(), IlmOrder::Zero, false, Smoothing::Mle).is_err());
        assert!(estimate_ilm(&seqs(&["c"]), ab(), IlmOrder::Zero, false, Smoothing::Mle).is_err());
        let ilm = estimate_ilm(
            &seqs(&["a"]),
            ab(),
            IlmOrder::One,
            false,
            Smoothing::default(),
        )
        .unwrap();
        assert!(ilm.log_prob(&[5], 0).is_err());
    }

    #[test]
    fn order_strings() {
        for s in ["0", "1", "inf:4"] {
            assert_eq!(s.parse::<IlmOrder>().unwrap().to_string(), s);
        }
        assert!("inf:1".parse::<IlmOrder>().is_err());
        assert!("2".parse::<IlmOrder>().is_err());
    }
}
