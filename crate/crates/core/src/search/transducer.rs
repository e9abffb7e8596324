use std::collections::HashMap;

use super::common::{check_granularity, lm_ids, Beam, Hyp, LmCache, Traces, NIL};
use super::time_sync::{pick_final, result};
use super::{DecodeConfig, DecodeResult, LmScorer, SearchLexicon, VocabMode};
use crate::acoustic::{to_model_index, IlmModel, StepScorer, BLANK};
use crate::error::{Error, Result};
use crate::lexicon::{NodeId, ROOT};
use crate::text::{tokens_to_words, END_OF_WORD};

/// Output space of transducer search.
#[derive(Clone, Copy, Debug)]
pub enum TransducerVocab<'a> {
    /// Words of a lexicon, spelled in step labels; word LM applied at word
    /// ends.
    Closed(&'a SearchLexicon),
    /// Any sequence of step labels ending in a word-final token; subword LM
    /// applied per token.
    Open,
}

/// Interned label histories truncated to the last `k` labels.
pub(super) struct Contexts {
    k: Option<usize>,
    seqs: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, u32>,
}

impl Contexts {
    pub fn new(k: Option<usize>) -> Self {
        let mut index = HashMap::new();
        index.insert(Vec::new(), 0);
        Contexts {
            k,
            seqs: vec![Vec::new()],
            index,
        }
    }

    pub fn get(&self, id: u32) -> &[usize] {
        &self.seqs[id as usize]
    }

    pub fn extend(&mut self, id: u32, label: usize) -> u32 {
        let prev = &self.seqs[id as usize];
        let keep = self.k.map_or(prev.len() + 1, |k| k.min(prev.len() + 1));
        if keep == 0 {
            return 0;
        }
        let mut seq = Vec::with_capacity(keep);
        seq.extend_from_slice(&prev[prev.len() + 1 - keep..]);
        seq.push(label);
        if let Some(&i) = self.index.get(&seq) {
            return i;
        }
        let i = self.seqs.len() as u32;
        self.seqs.push(seq.clone());
        self.index.insert(seq, i);
        i
    }
}

/// Step scores with the internal LM divided out, per label history.
pub(super) struct Fused<'a> {
    scorer: &'a dyn StepScorer,
    ilm: Option<(&'a IlmModel, f64)>,
    special: usize,
    pub ctx: Contexts,
    memo: HashMap<(usize, u32), Vec<f64>>,
}

impl<'a> Fused<'a> {
    /// `special` is the blank or end label, the one the internal LM lacks
    /// (or models as its end symbol). The internal LM only takes part when
    /// `alpha > 0`.
    pub fn new(
        scorer: &'a dyn StepScorer,
        ilm: Option<&'a IlmModel>,
        alpha: f64,
        special: usize,
        with_end: bool,
    ) -> Result<Self> {
        let ilm = if alpha > 0.0 {
            let ilm = ilm.ok_or_else(|| {
                Error::InvalidArgument("internal LM scale > 0 without an internal LM".into())
            })?;
            let expect: Vec<&String> = scorer
                .labels()
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != special)
                .map(|(_, l)| l)
                .collect();
            if ilm.labels().iter().collect::<Vec<_>>() != expect || ilm.has_end() != with_end {
                return Err(Error::VocabMismatch(
                    "internal LM labels differ from the step labels".into(),
                ));
            }
            Some((ilm, alpha))
        } else {
            None
        };
        let k = match (scorer.context_len(), ilm) {
            (None, _) => None,
            (Some(a), Some((m, _))) => Some(a.max(m.context_len())),
            (Some(a), None) => Some(a),
        };
        Ok(Fused {
            scorer,
            ilm,
            special,
            ctx: Contexts::new(k),
            memo: HashMap::new(),
        })
    }

    /// Fused log scores of every label at `step` after history `ctx`.
    pub fn scores(&mut self, step: usize, ctx: u32) -> &[f64] {
        if !self.memo.contains_key(&(step, ctx)) {
            let n = self.scorer.labels().len();
            let hist = self.ctx.get(ctx);
            let mut out = vec![0.0; n];
            self.scorer.log_probs(step, hist, &mut out);
            if let Some((ilm, alpha)) = self.ilm {
                let model_hist: Vec<usize> = hist
                    .iter()
                    .map(|&h| to_model_index(h, self.special, n))
                    .collect();
                let mut lp = vec![0.0; ilm.num_outputs()];
                ilm.log_probs(&model_hist, &mut lp);
                let blank_free = !ilm.has_end();
                for (y, o) in out.iter_mut().enumerate() {
                    if y == self.special && blank_free {
                        continue;
                    }
                    *o -= alpha * lp[to_model_index(y, self.special, n)];
                }
            }
            self.memo.insert((step, ctx), out);
        }
        &self.memo[&(step, ctx)]
    }

    /// Drops memoized scores of finished steps.
    pub fn forget_before(&mut self, step: usize) {
        self.memo.retain(|&(s, _), _| s >= step);
    }
}

/// Time-synchronous beam search for a strictly monotonic transducer: every
/// frame emits exactly one symbol, blank or label. Label scores are divided
/// by the internal LM raised to `cfg.prior_scale` on the same history; the
/// external LM enters with `cfg.lm_scale`.
pub fn decode_transducer(
    scorer: &dyn StepScorer,
    ilm: Option<&IlmModel>,
    lm: &dyn LmScorer,
    vocab: TransducerVocab<'_>,
    cfg: &DecodeConfig,
) -> Result<DecodeResult> {
    cfg.validate()?;
    let open = matches!(vocab, TransducerVocab::Open);
    if open != (cfg.vocab_mode == VocabMode::Open) {
        return Err(Error::InvalidArgument(
            "vocabulary mode differs from the supplied search vocabulary".into(),
        ));
    }
    check_granularity(lm, open)?;
    let blank = scorer
        .labels()
        .iter()
        .position(|l| l == BLANK)
        .ok_or_else(|| Error::UnknownLabel(format!("{BLANK} missing from step labels")))?;
    let mut fused = Fused::new(scorer, ilm, cfg.prior_scale, blank, false)?;
    let mut cache = LmCache::new(lm, cfg.lm_scale);
    let mut traces = Traces::default();
    match vocab {
        TransducerVocab::Closed(lex) => {
            let (score, trace) =
                closed(scorer, lex, &mut fused, &mut cache, &mut traces, blank, cfg)?;
            Ok(result(lex, &traces, trace, score))
        }
        TransducerVocab::Open => {
            let (score, trace) =
                open_vocab(scorer, &mut fused, &mut cache, &mut traces, blank, cfg)?;
            let units: Vec<String> = traces
                .collect(trace)
                .into_iter()
                .map(|(y, _)| scorer.labels()[y as usize].clone())
                .collect();
            Ok(DecodeResult {
                words: tokens_to_words(&units),
                score,
                units,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct ClosedKey {
    node: NodeId,
    lm: u32,
    ctx: u32,
}

fn closed(
    scorer: &dyn StepScorer,
    lex: &SearchLexicon,
    fused: &mut Fused,
    cache: &mut LmCache,
    traces: &mut Traces,
    blank: usize,
    cfg: &DecodeConfig,
) -> Result<(f64, u32)> {
    let tree = lex.tree();
    let inv = lex.lexicon().inventory();
    let word_ids = if cache.active() {
        lm_ids(
            cache.lm(),
            lex.lexicon().entries().iter().map(|e| e.word.as_str()),
        )?
    } else {
        vec![0; lex.lexicon().len()]
    };
    let mut col = vec![0usize; tree.len()];
    for n in 1..tree.len() as NodeId {
        let sym = inv.symbol(tree.unit(n).unwrap());
        col[n as usize] = scorer
            .labels()
            .iter()
            .position(|l| l == sym)
            .ok_or_else(|| Error::VocabMismatch(format!("unit {sym} missing from step labels")))?;
    }
    let mut hyps = vec![Hyp {
        key: ClosedKey {
            node: ROOT,
            lm: 0,
            ctx: 0,
        },
        score: 0.0,
        trace: NIL,
    }];
    for t in 0..scorer.num_steps() {
        let mut beam = Beam::new();
        for &Hyp { key, score, trace } in &hyps {
            let adj = fused.scores(t, key.ctx).to_vec();
            beam.add(key, score + adj[blank], trace);
            let from = if key.node == ROOT || tree.is_word_end(key.node) {
                ROOT
            } else {
                key.node
            };
            for &(_, ch) in tree.children(from) {
                let y = col[ch as usize];
                let s = score + adj[y];
                let ctx = fused.ctx.extend(key.ctx, y);
                if tree.is_word_end(ch) {
                    for we in tree.word_ends(ch) {
                        let (ls, lm2) = cache.step(key.lm, word_ids[we.word as usize]);
                        let tr = traces.push(trace, we.word, ch);
                        beam.add(
                            ClosedKey {
                                node: ch,
                                lm: lm2,
                                ctx,
                            },
                            s + ls + we.log_prob,
                            tr,
                        );
                    }
                } else {
                    beam.add(
                        ClosedKey {
                            node: ch,
                            lm: key.lm,
                            ctx,
                        },
                        s,
                        trace,
                    );
                }
            }
        }
        fused.forget_before(t + 1);
        hyps = beam.finish(cfg.beam_size, cfg.score_margin);
    }
    let finals = hyps
        .iter()
        .filter(|h| h.key.node != ROOT && tree.is_word_end(h.key.node))
        .map(|h| (h.score + cache.end(h.key.lm), h.trace))
        .collect();
    pick_final(traces, finals)
}

/// Position within the token stream of open-vocabulary search.
const START: u8 = 0;
const INSIDE: u8 = 1;
const BOUNDARY: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct OpenKey {
    pos: u8,
    lm: u32,
    ctx: u32,
}

fn open_vocab(
    scorer: &dyn StepScorer,
    fused: &mut Fused,
    cache: &mut LmCache,
    traces: &mut Traces,
    blank: usize,
    cfg: &DecodeConfig,
) -> Result<(f64, u32)> {
    let labels = scorer.labels();
    let token_ids = if cache.active() {
        let toks = labels
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != blank)
            .map(|(_, l)| l.as_str());
        let mut ids = lm_ids(cache.lm(), toks)?;
        ids.insert(blank, 0);
        ids
    } else {
        vec![0; labels.len()]
    };
    let word_final: Vec<bool> = labels.iter().map(|l| l.ends_with(END_OF_WORD)).collect();
    let mut hyps = vec![Hyp {
        key: OpenKey {
            pos: START,
            lm: 0,
            ctx: 0,
        },
        score: 0.0,
        trace: NIL,
    }];
    for t in 0..scorer.num_steps() {
        let mut beam = Beam::new();
        for &Hyp { key, score, trace } in &hyps {
            let adj = fused.scores(t, key.ctx).to_vec();
            beam.add(key, score + adj[blank], trace);
            for (y, &a) in adj.iter().enumerate() {
                if y == blank {
                    continue;
                }
                let (ls, lm2) = cache.step(key.lm, token_ids[y]);
                let ctx = fused.ctx.extend(key.ctx, y);
                let pos = if word_final[y] { BOUNDARY } else { INSIDE };
                let tr = traces.push(trace, y as u32, 0);
                beam.add(OpenKey { pos, lm: lm2, ctx }, score + a + ls, tr);
            }
        }
        fused.forget_before(t + 1);
        hyps = beam.finish(cfg.beam_size, cfg.score_margin);
    }
    let finals = hyps
        .iter()
        .filter(|h| h.key.pos == BOUNDARY)
        .map(|h| (h.score + cache.end(h.key.lm), h.trace))
        .collect();
    pick_final(traces, finals)
}
