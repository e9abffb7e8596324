//! Exhaustive reference searches. Each enumerates every admissible output
//! and alignment explicitly and scores it from the public scoring functions,
//! sharing no search code with the decoders.

use seqshift::acoustic::{
    ctc_score, fh_score, transducer_score, ContextPrior, FactoredScores, IlmModel, Posteriorgram,
    StepScorer, BLANK,
};
use seqshift::lexicon::{Lexicon, UnitId};
use seqshift::ngram::{NGramModel, LN_10};
use seqshift::text::{tokens_to_words, TokenId, BOS_ID, END_OF_WORD, EOS, EOS_ID};
use seqshift::topology::TransitionModel;

#[derive(Clone, Debug)]
pub struct Best {
    pub words: Vec<String>,
    pub score: f64,
    /// Word ids (closed) or label ids (open), for tie-breaking.
    pub ids: Vec<u32>,
}

fn consider(best: &mut Option<Best>, score: f64, ids: Vec<u32>, words: Vec<String>) {
    if !score.is_finite() {
        return;
    }
    let better = match best {
        None => true,
        Some(b) => score > b.score || (score == b.score && ids < b.ids),
    };
    if better {
        *best = Some(Best { words, score, ids });
    }
}

/// `lam * ln P(seq </s>)` under `lm`, or 0 when `lam` is 0.
pub fn lm_sentence(lm: &NGramModel, lam: f64, seq: &[TokenId], with_end: bool) -> f64 {
    if lam == 0.0 {
        return 0.0;
    }
    let mut hist = vec![BOS_ID];
    let mut total = 0.0;
    let mut toks = seq.to_vec();
    if with_end {
        toks.push(EOS_ID);
    }
    for &w in &toks {
        total += lam * lm.log10_prob(&hist, w) * LN_10;
        hist.push(w);
    }
    total
}

/// Every way to split `units` into lexicon pronunciations: (word, lp).
pub fn parses(lex: &Lexicon, units: &[UnitId]) -> Vec<Vec<u32>> {
    if units.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (w, e) in lex.entries().iter().enumerate() {
        for p in &e.prons {
            if units.starts_with(p) {
                for mut rest in parses(lex, &units[p.len()..]) {
                    rest.insert(0, w as u32);
                    out.push(rest);
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

fn word_lm_ids(lex: &Lexicon, lm: &NGramModel, words: &[u32]) -> Vec<TokenId> {
    words
        .iter()
        .map(|&w| lm.vocab().id(lex.word(w)).unwrap())
        .collect()
}

fn word_strings(lex: &Lexicon, words: &[u32]) -> Vec<String> {
    words.iter().map(|&w| lex.word(w).to_owned()).collect()
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 {
            vec![Vec::new()]
        } else {
            Vec::new()
        };
    }
    let mut out = Vec::new();
    for first in 1..=total.saturating_sub(parts - 1) {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
enum Segment {
    Sil,
    Word(u32, usize),
}

fn segment_sequences(lex: &Lexicon, max_units: usize) -> Vec<Vec<Segment>> {
    fn rec(lex: &Lexicon, left: usize, cur: &mut Vec<Segment>, out: &mut Vec<Vec<Segment>>) {
        if cur.iter().any(|s| matches!(s, Segment::Word(..))) {
            out.push(cur.clone());
        }
        if left == 0 {
            return;
        }
        if !matches!(cur.last(), Some(Segment::Sil)) {
            cur.push(Segment::Sil);
            rec(lex, left - 1, cur, out);
            cur.pop();
        }
        for (w, e) in lex.entries().iter().enumerate() {
            for (pi, p) in e.prons.iter().enumerate() {
                if p.len() <= left {
                    cur.push(Segment::Word(w as u32, pi));
                    rec(lex, left - p.len(), cur, out);
                    cur.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    rec(lex, max_units, &mut Vec::new(), &mut out);
    out
}

/// Factored hybrid: all word/silence segmentations and all unit durations.
#[allow(clippy::too_many_arguments)]
pub fn fh_oracle(
    scores: &FactoredScores,
    prior: &ContextPrior,
    lex: &Lexicon,
    lm: &NGramModel,
    tri: bool,
    lam: f64,
    alpha: f64,
    tm: &TransitionModel,
) -> Option<Best> {
    let t_len = scores.num_frames();
    let sil = lex.inventory().silence().unwrap();
    let mut best = None;
    for segs in segment_sequences(lex, t_len) {
        let mut units: Vec<UnitId> = Vec::new();
        let mut words = Vec::new();
        for s in &segs {
            match *s {
                Segment::Sil => units.push(sil),
                Segment::Word(w, p) => {
                    units.extend(&lex.prons(w)[p]);
                    words.push(w);
                }
            }
        }
        let k = units.len();
        let mut acoustic = f64::NEG_INFINITY;
        for durs in compositions(t_len, k) {
            let mut s = 0.0;
            let mut t = 0;
            for (i, &d) in durs.iter().enumerate() {
                let l = if i == 0 { sil } else { units[i - 1] } as usize;
                let r = if i + 1 == k { sil } else { units[i + 1] } as usize;
                for _ in 0..d {
                    s += fh_score(
                        scores,
                        prior,
                        t,
                        l,
                        units[i] as usize,
                        tri.then_some(r),
                        alpha,
                    )
                    .unwrap();
                    t += 1;
                }
            }
            acoustic = acoustic.max(s);
        }
        let trans = (t_len - k) as f64 * tm.loop_score() + k as f64 * tm.forward_score();
        let pron: f64 = words.iter().map(|&w| lex.pron_log_prob(w)).sum();
        let lm_s = lm_sentence(lm, lam, &word_lm_ids(lex, lm, &words), true);
        consider(
            &mut best,
            acoustic + trans + pron + lm_s,
            words.clone(),
            word_strings(lex, &words),
        );
    }
    best
}

fn all_strings(n_labels: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..n_labels).map(move |y| {
                    let mut s = s.clone();
                    s.push(y);
                    s
                })
            })
            .collect();
    }
    out
}

/// CTC: every frame labelling, collapsed and parsed into words.
pub fn ctc_oracle(
    pg: &Posteriorgram,
    prior: &ContextPrior,
    lex: &Lexicon,
    lm: &NGramModel,
    lam: f64,
    alpha: f64,
) -> Option<Best> {
    let blank = pg.label_index(BLANK).unwrap();
    let mut best = None;
    for path in all_strings(pg.num_labels(), pg.num_frames()) {
        let mut units = Vec::new();
        let mut prev = None;
        let mut ok = true;
        for &y in &path {
            if y != blank && prev != Some(y) {
                match lex.inventory().id(&pg.labels()[y]) {
                    Some(u) => units.push(u),
                    None => ok = false,
                }
            }
            prev = Some(y);
        }
        if !ok || units.is_empty() {
            continue;
        }
        let ac: f64 = path
            .iter()
            .enumerate()
            .map(|(t, &y)| ctc_score(pg, prior, t, y, alpha))
            .sum();
        for words in parses(lex, &units) {
            let pron: f64 = words.iter().map(|&w| lex.pron_log_prob(w)).sum();
            let lm_s = lm_sentence(lm, lam, &word_lm_ids(lex, lm, &words), true);
            consider(
                &mut best,
                ac + pron + lm_s,
                words.clone(),
                word_strings(lex, &words),
            );
        }
    }
    best
}

/// Transducer: every one-symbol-per-frame string. `lex` selects closed
/// vocabulary; without it the labels are subword tokens.
pub fn transducer_oracle(
    scorer: &dyn StepScorer,
    ilm: Option<&IlmModel>,
    lm: &NGramModel,
    lex: Option<&Lexicon>,
    lam: f64,
    alpha: f64,
) -> Option<Best> {
    let labels = scorer.labels();
    let blank = labels.iter().position(|l| l == BLANK).unwrap();
    let mut best = None;
    let mut step = vec![0.0; labels.len()];
    for path in all_strings(labels.len(), scorer.num_steps()) {
        let mut hist: Vec<usize> = Vec::new();
        let mut ac = 0.0;
        for (t, &y) in path.iter().enumerate() {
            scorer.log_probs(t, &hist, &mut step);
            ac += match ilm {
                Some(m) if alpha > 0.0 => {
                    transducer_score(&step, blank, m, y, &hist, alpha).unwrap()
                }
                _ => step[y],
            };
            if y != blank {
                hist.push(y);
            }
        }
        match lex {
            Some(lex) => {
                let units: Option<Vec<UnitId>> = hist
                    .iter()
                    .map(|&y| lex.inventory().id(&labels[y]))
                    .collect();
                let Some(units) = units else { continue };
                if units.is_empty() {
                    continue;
                }
                for words in parses(lex, &units) {
                    let pron: f64 = words.iter().map(|&w| lex.pron_log_prob(w)).sum();
                    let lm_s = lm_sentence(lm, lam, &word_lm_ids(lex, lm, &words), true);
                    consider(
                        &mut best,
                        ac + pron + lm_s,
                        words.clone(),
                        word_strings(lex, &words),
                    );
                }
            }
            None => {
                if !hist
                    .last()
                    .is_some_and(|&y| labels[y].ends_with(END_OF_WORD))
                {
                    continue;
                }
                let toks: Vec<String> = hist.iter().map(|&y| labels[y].clone()).collect();
                let ids: Vec<TokenId> = toks.iter().map(|t| lm.vocab().id(t).unwrap()).collect();
                let lm_s = lm_sentence(lm, lam, &ids, true);
                let lab: Vec<u32> = hist.iter().map(|&y| y as u32).collect();
                consider(&mut best, ac + lm_s, lab, tokens_to_words(&toks));
            }
        }
    }
    best
}

/// Label-synchronous: every token sequence closed by `</s>` within
/// `max_steps` steps.
pub fn label_sync_oracle(
    scorer: &dyn StepScorer,
    ilm: Option<&IlmModel>,
    lm: &NGramModel,
    lam: f64,
    alpha: f64,
    delta: f64,
    max_steps: usize,
) -> Option<Best> {
    let labels = scorer.labels();
    let eos = labels.iter().position(|l| l == EOS).unwrap();
    let ilm_index = |y: usize| -> usize {
        if y == eos {
            labels.len() - 1
        } else if y > eos {
            y - 1
        } else {
            y
        }
    };
    let mut best = None;
    let mut stack: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 0.0)];
    let mut step = vec![0.0; labels.len()];
    while let Some((hist, ac)) = stack.pop() {
        let m = hist.len();
        if m >= max_steps {
            continue;
        }
        scorer.log_probs(m, &hist, &mut step);
        let model_hist: Vec<usize> = hist.iter().map(|&h| ilm_index(h)).collect();
        for y in 0..labels.len() {
            let mut s = step[y];
            if let (Some(ilm), true) = (ilm, alpha > 0.0) {
                s -= alpha * ilm.log_prob(&model_hist, ilm_index(y)).unwrap();
            }
            if y == eos {
                if hist
                    .last()
                    .is_some_and(|&p| !labels[p].ends_with(END_OF_WORD))
                {
                    continue;
                }
                let toks: Vec<String> = hist.iter().map(|&h| labels[h].clone()).collect();
                let ids: Vec<TokenId> = toks.iter().map(|t| lm.vocab().id(t).unwrap()).collect();
                let total =
                    ac + s + lm_sentence(lm, lam, &ids, true) - delta * (m.max(1) as f64).ln();
                let lab: Vec<u32> = hist.iter().map(|&h| h as u32).collect();
                consider(&mut best, total, lab, tokens_to_words(&toks));
            } else {
                let mut h2 = hist.clone();
                h2.push(y);
                stack.push((h2, ac + s));
            }
        }
    }
    best
}
