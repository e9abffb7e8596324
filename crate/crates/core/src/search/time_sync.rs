use super::common::{check_granularity, history_cmp, lm_ids, Beam, Hyp, LmCache, Traces, NIL};
use super::{DecodeConfig, DecodeResult, LmScorer, SearchLexicon, VocabMode};
use crate::acoustic::{
    ctc_score, fh_score_unchecked, ContextOrder, ContextPrior, FactoredScores, Posteriorgram, BLANK,
};
use crate::error::{Error, Result};
use crate::lexicon::{NodeId, ROOT};
use crate::text::TokenId;
use crate::topology::TransitionModel;

/// Acoustic model of a time-synchronous decode.
#[derive(Clone, Copy, Debug)]
pub enum TimeSyncModel<'a> {
    /// Factored hybrid with left and right context; needs a triphone prior.
    FhTri {
        scores: &'a FactoredScores,
        prior: &'a ContextPrior,
    },
    /// Factored hybrid with left context only; needs a diphone prior.
    FhDi {
        scores: &'a FactoredScores,
        prior: &'a ContextPrior,
    },
    /// Phoneme CTC; needs a monophone prior over the posteriorgram labels.
    Ctc {
        pg: &'a Posteriorgram,
        prior: &'a ContextPrior,
    },
}

/// Viterbi beam search over the lexical prefix tree.
///
/// Hybrid models run one HMM state per unit with loop and forward
/// transitions; the loop and forward log-probabilities come from `trans`,
/// the exponent from `cfg.transition_scale`. Optional silence may precede,
/// separate and follow words and serves as the context at utterance edges.
/// CTC inserts blanks freely and needs one between two equal units.
/// Every result holds at least one word.
pub fn decode_time_sync(
    model: TimeSyncModel<'_>,
    lex: &SearchLexicon,
    lm: &dyn LmScorer,
    trans: &TransitionModel,
    cfg: &DecodeConfig,
) -> Result<DecodeResult> {
    cfg.validate()?;
    if cfg.vocab_mode != VocabMode::Closed {
        return Err(Error::InvalidArgument(
            "time-synchronous search is closed-vocabulary only".into(),
        ));
    }
    check_granularity(lm, false)?;
    let mut cache = LmCache::new(lm, cfg.lm_scale);
    let lexicon = lex.lexicon();
    let word_ids = if cache.active() {
        lm_ids(lm, lexicon.entries().iter().map(|e| e.word.as_str()))?
    } else {
        vec![0; lexicon.len()]
    };
    let tm = TransitionModel {
        beta: cfg.transition_scale,
        ..*trans
    };
    let mut traces = Traces::default();
    let ctx = Ctx {
        lex,
        word_ids: &word_ids,
        cfg,
    };
    let (best, trace) = match model {
        TimeSyncModel::FhTri { scores, prior } => {
            fh(&ctx, scores, prior, true, &tm, &mut cache, &mut traces)?
        }
        TimeSyncModel::FhDi { scores, prior } => {
            fh(&ctx, scores, prior, false, &tm, &mut cache, &mut traces)?
        }
        TimeSyncModel::Ctc { pg, prior } => ctc(&ctx, pg, prior, &mut cache, &mut traces)?,
    };
    Ok(result(lex, &traces, trace, best))
}

struct Ctx<'a> {
    lex: &'a SearchLexicon,
    word_ids: &'a [TokenId],
    cfg: &'a DecodeConfig,
}

pub(super) fn result(lex: &SearchLexicon, traces: &Traces, trace: u32, score: f64) -> DecodeResult {
    let inv = lex.lexicon().inventory();
    let mut words = Vec::new();
    let mut units = Vec::new();
    for (w, node) in traces.collect(trace) {
        words.push(lex.lexicon().word(w).to_owned());
        units.extend(
            lex.tree()
                .spelling(node)
                .iter()
                .map(|&u| inv.symbol(u).to_owned()),
        );
    }
    DecodeResult {
        words,
        score,
        units,
    }
}

/// Picks the best final hypothesis: score, then word ids, then length.
pub(super) fn pick_final(traces: &Traces, finals: Vec<(f64, u32)>) -> Result<(f64, u32)> {
    let mut best: Option<(f64, u32, Vec<u32>)> = None;
    for (score, trace) in finals {
        if !score.is_finite() {
            continue;
        }
        let hist: Vec<u32> = traces.collect(trace).into_iter().map(|(w, _)| w).collect();
        let better = match &best {
            None => true,
            Some((bs, _, bh)) => score > *bs || (score == *bs && history_cmp(&hist, bh).is_lt()),
        };
        if better {
            best = Some((score, trace, hist));
        }
    }
    best.map(|(s, t, _)| (s, t)).ok_or(Error::NoFinalHypothesis)
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct FhKey {
    /// Tree node, or [`ROOT`] for silence.
    node: NodeId,
    left: u32,
    /// Right context; [`NONE`] without one.
    right: u32,
    lm: u32,
}

struct Fh<'a> {
    scores: &'a FactoredScores,
    prior: &'a ContextPrior,
    tri: bool,
    alpha: f64,
    sil: u32,
    /// Allowed right contexts per node.
    rights: Vec<Vec<u32>>,
    root_units: Vec<u32>,
    after_word: Vec<u32>,
}

impl Fh<'_> {
    #[inline]
    fn emit(&self, t: usize, l: u32, c: u32, r: u32) -> f64 {
        let right = self.tri.then_some(r as usize);
        fh_score_unchecked(
            self.scores,
            self.prior,
            t,
            l as usize,
            c as usize,
            right,
            self.alpha,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn enter(
        &self,
        ctx: &Ctx,
        beam: &mut Beam<FhKey>,
        cache: &mut LmCache,
        traces: &mut Traces,
        t: usize,
        base: f64,
        trace: u32,
        lm: u32,
        left: u32,
        node: NodeId,
    ) {
        let tree = ctx.lex.tree();
        let c = tree.unit(node).expect("non-root node");
        let none = [NONE];
        let rights: &[u32] = if self.tri {
            &self.rights[node as usize]
        } else {
            &none
        };
        if tree.is_word_end(node) {
            for we in tree.word_ends(node) {
                let (ls, lm2) = cache.step(lm, ctx.word_ids[we.word as usize]);
                let s = base + ls + we.log_prob;
                let tr = traces.push(trace, we.word, node);
                for &r in rights {
                    beam.add(
                        FhKey {
                            node,
                            left,
                            right: r,
                            lm: lm2,
                        },
                        s + self.emit(t, left, c, r),
                        tr,
                    );
                }
            }
        } else {
            for &r in rights {
                beam.add(
                    FhKey {
                        node,
                        left,
                        right: r,
                        lm,
                    },
                    base + self.emit(t, left, c, r),
                    trace,
                );
            }
        }
    }

    fn silence(
        &self,
        beam: &mut Beam<FhKey>,
        t: usize,
        base: f64,
        trace: u32,
        lm: u32,
        left: u32,
        rights: &[u32],
    ) {
        if self.tri {
            for &r in rights {
                beam.add(
                    FhKey {
                        node: ROOT,
                        left,
                        right: r,
                        lm,
                    },
                    base + self.emit(t, left, self.sil, r),
                    trace,
                );
            }
        } else {
            beam.add(
                FhKey {
                    node: ROOT,
                    left,
                    right: NONE,
                    lm,
                },
                base + self.emit(t, left, self.sil, NONE),
                trace,
            );
        }
    }
}

fn fh(
    ctx: &Ctx,
    scores: &FactoredScores,
    prior: &ContextPrior,
    tri: bool,
    tm: &TransitionModel,
    cache: &mut LmCache,
    traces: &mut Traces,
) -> Result<(f64, u32)> {
    let lex = ctx.lex;
    let inv = lex.lexicon().inventory();
    let tree = lex.tree();
    if scores.labels() != inv.symbols() {
        return Err(Error::VocabMismatch(
            "factored score labels differ from the unit inventory".into(),
        ));
    }
    let want = if tri {
        ContextOrder::Tri
    } else {
        ContextOrder::Di
    };
    if prior.order() != want || prior.labels() != inv.symbols() {
        return Err(Error::VocabMismatch(format!(
            "hybrid search needs a {want:?} prior over the unit inventory"
        )));
    }
    let sil = inv
        .silence()
        .ok_or_else(|| Error::InvalidArgument("hybrid search needs a silence unit".into()))?;
    let root_units: Vec<u32> = tree.children(ROOT).iter().map(|&(u, _)| u).collect();
    let mut after_word = root_units.clone();
    after_word.push(sil);
    let rights = (0..tree.len() as NodeId)
        .map(|n| {
            if n == ROOT {
                Vec::new()
            } else if tree.is_word_end(n) {
                after_word.clone()
            } else {
                tree.children(n).iter().map(|&(u, _)| u).collect()
            }
        })
        .collect();
    let f = Fh {
        scores,
        prior,
        tri,
        alpha: ctx.cfg.prior_scale,
        sil,
        rights,
        root_units,
        after_word,
    };
    let (beam_size, margin) = (ctx.cfg.beam_size, ctx.cfg.score_margin);

    let mut beam = Beam::new();
    for &(_, ch) in tree.children(ROOT) {
        f.enter(ctx, &mut beam, cache, traces, 0, 0.0, NIL, 0, sil, ch);
    }
    f.silence(&mut beam, 0, 0.0, NIL, 0, sil, &f.root_units);
    let mut hyps = beam.finish(beam_size, margin);

    for t in 1..scores.num_frames() {
        let mut beam = Beam::new();
        for &Hyp { key, score, trace } in &hyps {
            let c = if key.node == ROOT {
                sil
            } else {
                tree.unit(key.node).unwrap()
            };
            beam.add(
                key,
                score + tm.loop_score() + f.emit(t, key.left, c, key.right),
                trace,
            );
            let fwd = score + tm.forward_score();
            if key.node == ROOT {
                if tri {
                    if key.right != sil {
                        let ch = tree.child(ROOT, key.right).unwrap();
                        f.enter(
                            ctx, &mut beam, cache, traces, t, fwd, trace, key.lm, sil, ch,
                        );
                    }
                } else {
                    for &(_, ch) in tree.children(ROOT) {
                        f.enter(
                            ctx, &mut beam, cache, traces, t, fwd, trace, key.lm, sil, ch,
                        );
                    }
                }
            } else if tree.is_word_end(key.node) {
                if tri {
                    if key.right == sil {
                        f.silence(&mut beam, t, fwd, trace, key.lm, c, &f.after_word);
                    } else {
                        let ch = tree.child(ROOT, key.right).unwrap();
                        f.enter(ctx, &mut beam, cache, traces, t, fwd, trace, key.lm, c, ch);
                    }
                } else {
                    f.silence(&mut beam, t, fwd, trace, key.lm, c, &[]);
                    for &(_, ch) in tree.children(ROOT) {
                        f.enter(ctx, &mut beam, cache, traces, t, fwd, trace, key.lm, c, ch);
                    }
                }
            } else if tri {
                let ch = tree.child(key.node, key.right).unwrap();
                f.enter(ctx, &mut beam, cache, traces, t, fwd, trace, key.lm, c, ch);
            } else {
                for &(_, ch) in tree.children(key.node) {
                    f.enter(ctx, &mut beam, cache, traces, t, fwd, trace, key.lm, c, ch);
                }
            }
        }
        hyps = beam.finish(beam_size, margin);
    }

    let exit = tm.forward_score();
    let finals = hyps
        .iter()
        .filter(|h| {
            let edge = !tri || h.key.right == sil;
            let done = if h.key.node == ROOT {
                h.key.left != sil
            } else {
                tree.is_word_end(h.key.node)
            };
            edge && done
        })
        .map(|h| (h.score + exit + cache.end(h.key.lm), h.trace))
        .collect();
    pick_final(traces, finals)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct CtcKey {
    node: NodeId,
    /// Last frame was blank (or nothing emitted yet).
    blank: bool,
    lm: u32,
}

fn ctc(
    ctx: &Ctx,
    pg: &Posteriorgram,
    prior: &ContextPrior,
    cache: &mut LmCache,
    traces: &mut Traces,
) -> Result<(f64, u32)> {
    let lex = ctx.lex;
    let inv = lex.lexicon().inventory();
    let tree = lex.tree();
    let blank = pg
        .label_index(BLANK)
        .ok_or_else(|| Error::UnknownLabel(format!("{BLANK} missing from CTC posteriors")))?;
    if prior.order() != ContextOrder::Mono || prior.labels() != pg.labels() {
        return Err(Error::VocabMismatch(
            "CTC search needs a monophone prior over the posteriorgram labels".into(),
        ));
    }
    // posteriorgram column of each tree node's unit
    let mut col = vec![0usize; tree.len()];
    for n in 1..tree.len() as NodeId {
        let sym = inv.symbol(tree.unit(n).unwrap());
        col[n as usize] = pg.label_index(sym).ok_or_else(|| {
            Error::VocabMismatch(format!("unit {sym} missing from CTC posteriors"))
        })?;
    }
    let alpha = ctx.cfg.prior_scale;
    let (beam_size, margin) = (ctx.cfg.beam_size, ctx.cfg.score_margin);
    let mut hyps = vec![Hyp {
        key: CtcKey {
            node: ROOT,
            blank: true,
            lm: 0,
        },
        score: 0.0,
        trace: NIL,
    }];
    for t in 0..pg.num_frames() {
        let mut beam = Beam::new();
        let blank_score = ctc_score(pg, prior, t, blank, alpha);
        for &Hyp { key, score, trace } in &hyps {
            beam.add(CtcKey { blank: true, ..key }, score + blank_score, trace);
            let n = key.node;
            let cur = tree.unit(n);
            if n != ROOT && !key.blank {
                beam.add(
                    key,
                    score + ctc_score(pg, prior, t, col[n as usize], alpha),
                    trace,
                );
            }
            let from = if n == ROOT || tree.is_word_end(n) {
                ROOT
            } else {
                n
            };
            for &(u, ch) in tree.children(from) {
                if !key.blank && cur == Some(u) {
                    continue;
                }
                let s = score + ctc_score(pg, prior, t, col[ch as usize], alpha);
                if tree.is_word_end(ch) {
                    for we in tree.word_ends(ch) {
                        let (ls, lm2) = cache.step(key.lm, ctx.word_ids[we.word as usize]);
                        let tr = traces.push(trace, we.word, ch);
                        let k = CtcKey {
                            node: ch,
                            blank: false,
                            lm: lm2,
                        };
                        beam.add(k, s + ls + we.log_prob, tr);
                    }
                } else {
                    let k = CtcKey {
                        node: ch,
                        blank: false,
                        lm: key.lm,
                    };
                    beam.add(k, s, trace);
                }
            }
        }
        hyps = beam.finish(beam_size, margin);
    }
    let finals = hyps
        .iter()
        .filter(|h| h.key.node != ROOT && tree.is_word_end(h.key.node))
        .map(|h| (h.score + cache.end(h.key.lm), h.trace))
        .collect();
    pick_final(traces, finals)
}
