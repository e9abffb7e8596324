use super::common::{check_granularity, history_cmp, lm_ids, LmCache};
use super::transducer::Fused;
use super::{DecodeConfig, DecodeResult, LmScorer};
use crate::acoustic::{IlmModel, StepScorer};
use crate::error::{Error, Result};
use crate::text::{tokens_to_words, END_OF_WORD, EOS, EOS_ID};

struct Open {
    score: f64,
    lm: u32,
    ctx: u32,
    hist: Vec<u32>,
}

/// Label-synchronous beam search over subword tokens.
///
/// Each step adds the step log-posterior, minus `cfg.prior_scale` times the
/// internal LM, plus `cfg.lm_scale` times the subword LM. A hypothesis ends
/// with `</s>`, which may follow only a word-final token (or nothing). Ended
/// hypotheses are ranked by `score - length_norm * ln max(M, 1)`, with `M`
/// the number of tokens before `</s>`; the returned score is that normalized
/// value. The search runs for `cfg.max_output_len` steps, by default
/// `2 + ceil(1.5 * n)` for `n` score rows.
pub fn decode_label_sync(
    scorer: &dyn StepScorer,
    ilm: Option<&IlmModel>,
    lm: &dyn LmScorer,
    cfg: &DecodeConfig,
) -> Result<DecodeResult> {
    cfg.validate()?;
    check_granularity(lm, true)?;
    let labels = scorer.labels();
    let eos = labels
        .iter()
        .position(|l| l == EOS)
        .ok_or_else(|| Error::UnknownLabel(format!("{EOS} missing from step labels")))?;
    let mut fused = Fused::new(scorer, ilm, cfg.prior_scale, eos, true)?;
    let mut cache = LmCache::new(lm, cfg.lm_scale);
    let token_ids = if cache.active() {
        let toks = labels
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != eos)
            .map(|(_, l)| l.as_str());
        let mut ids = lm_ids(lm, toks)?;
        ids.insert(eos, EOS_ID);
        ids
    } else {
        vec![0; labels.len()]
    };
    let word_final: Vec<bool> = labels.iter().map(|l| l.ends_with(END_OF_WORD)).collect();
    let max_steps = cfg
        .max_output_len
        .unwrap_or_else(|| 2 + (1.5 * scorer.num_steps() as f64).ceil() as usize);

    let mut open = vec![Open {
        score: 0.0,
        lm: 0,
        ctx: 0,
        hist: Vec::new(),
    }];
    let mut best: Option<(f64, Vec<u32>)> = None;
    for m in 0..max_steps {
        let mut next = Vec::new();
        for h in &open {
            let adj = fused.scores(m, h.ctx).to_vec();
            for (y, &a) in adj.iter().enumerate() {
                if y == eos {
                    if h.hist.last().is_some_and(|&p| !word_final[p as usize]) {
                        continue;
                    }
                    let s = h.score + a + cache.end(h.lm);
                    let fin = s - cfg.length_norm * (h.hist.len().max(1) as f64).ln();
                    if !fin.is_finite() {
                        continue;
                    }
                    let better = match &best {
                        None => true,
                        Some((bs, bh)) => {
                            fin > *bs || (fin == *bs && history_cmp(&h.hist, bh).is_lt())
                        }
                    };
                    if better {
                        best = Some((fin, h.hist.clone()));
                    }
                    continue;
                }
                let (ls, lm2) = cache.step(h.lm, token_ids[y]);
                let s = h.score + a + ls;
                if !s.is_finite() {
                    continue;
                }
                let mut hist = h.hist.clone();
                hist.push(y as u32);
                next.push(Open {
                    score: s,
                    lm: lm2,
                    ctx: fused.ctx.extend(h.ctx, y),
                    hist,
                });
            }
        }
        fused.forget_before(m + 1);
        next.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| history_cmp(&a.hist, &b.hist))
        });
        next.truncate(cfg.beam_size);
        if let (Some(margin), Some(top)) = (cfg.score_margin, next.first().map(|h| h.score)) {
            next.retain(|h| h.score >= top - margin);
        }
        open = next;
        if open.is_empty() {
            break;
        }
    }
    let (score, hist) = best.ok_or(Error::NoTerminatedHypothesis(max_steps))?;
    let units: Vec<String> = hist.iter().map(|&y| labels[y as usize].clone()).collect();
    Ok(DecodeResult {
        words: tokens_to_words(&units),
        score,
        units,
    })
}
