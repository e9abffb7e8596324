//! Seeded random toy instances.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqshift::acoustic::{
    estimate_ilm, BiasedScorer, ContextOrder, ContextPrior, FactoredScores, IlmModel, IlmOrder,
    Posteriorgram, BLANK,
};
use seqshift::lexicon::{Inventory, Lexicon, UnitId};
use seqshift::ngram::{count_ngrams, estimate_ngram, NGramModel, Smoothing};
use seqshift::search::SearchLexicon;
use seqshift::text::{Corpus, Vocabulary, EOS};
use seqshift::topology::TransitionModel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Softmax of uniform random logits scaled by `spread`.
pub fn random_dist(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<f64> {
    let logits: Vec<f64> = (0..n).map(|_| spread * rng.random::<f64>()).collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, frames: usize, spread: f64) -> Vec<Vec<f64>> {
    (0..frames).map(|_| random_dist(rng, n, spread)).collect()
}

fn log_groups(rng: &mut ChaCha8Rng, groups: usize, n: usize) -> Vec<f32> {
    (0..groups)
        .flat_map(|_| random_dist(rng, n, 4.0))
        .map(|p| p.ln() as f32)
        .collect()
}

pub fn random_factors(rng: &mut ChaCha8Rng, labels: &[String], frames: usize) -> FactoredScores {
    let n = labels.len();
    let left = log_groups(rng, frames, n);
    let center = log_groups(rng, frames * n, n);
    let right = log_groups(rng, frames * n * n, n);
    FactoredScores::new(labels.to_vec(), frames, left, center, right).unwrap()
}

pub fn random_prior(rng: &mut ChaCha8Rng, order: ContextOrder, labels: &[String]) -> ContextPrior {
    let size = labels.len().pow(order.arity());
    let probs = (0..size).map(|_| 0.05 + rng.random::<f64>()).collect();
    ContextPrior::from_probs(order, labels.to_vec(), probs, 1e-8).unwrap()
}

/// Random lexicon over the bases of `inv` with distinct pronunciations of
/// one or two units; about one word in five gets a second pronunciation.
pub fn random_lexicon(rng: &mut ChaCha8Rng, inv: &Inventory, n_words: usize) -> Lexicon {
    let bases: Vec<String> = inv.bases().iter().map(|s| s.to_string()).collect();
    let mut used: Vec<Vec<UnitId>> = Vec::new();
    let mut entries = Vec::new();
    let mut fresh = |rng: &mut ChaCha8Rng| loop {
        let len = rng.random_range(1..=2);
        let mut pron: Vec<UnitId> = (0..len)
            .map(|_| inv.id(bases.choose(rng).unwrap()).unwrap())
            .collect();
        let last = inv.symbol(pron[len - 1]).to_owned();
        pron[len - 1] = inv.word_end_twin(&last).unwrap();
        if !used.contains(&pron) {
            used.push(pron.clone());
            return pron;
        }
    };
    for w in 0..n_words {
        let name = format!("w{w}");
        entries.push((name.clone(), fresh(rng)));
        if rng.random_bool(0.2) {
            entries.push((name, fresh(rng)));
        }
    }
    Lexicon::new(inv.clone(), entries).unwrap()
}

/// Discounted n-gram over `words` from a few random sentences.
pub fn random_lm(
    rng: &mut ChaCha8Rng,
    words: &[String],
    order: usize,
    sentences: usize,
) -> NGramModel {
    let lines: Vec<Vec<String>> = (0..sentences)
        .map(|_| {
            let len = rng.random_range(1..=4);
            (0..len)
                .map(|_| words.choose(rng).unwrap().clone())
                .collect()
        })
        .collect();
    let corpus = Corpus::new("rand", lines).unwrap();
    let vocab = Vocabulary::from_words(words);
    let d = rng.random_range(0.3..0.9);
    estimate_ngram(
        &count_ngrams(&corpus, &vocab, order).unwrap(),
        Smoothing::AbsoluteDiscount(d),
    )
    .unwrap()
}

pub fn random_ilm(
    rng: &mut ChaCha8Rng,
    labels: &[String],
    order: IlmOrder,
    with_end: bool,
) -> IlmModel {
    let lines: Vec<Vec<String>> = (0..6)
        .map(|_| {
            let len = rng.random_range(1..=4);
            (0..len)
                .map(|_| labels.choose(rng).unwrap().clone())
                .collect()
        })
        .collect();
    let d = rng.random_range(0.3..0.9);
    estimate_ilm(
        &lines,
        labels.to_vec(),
        order,
        with_end,
        Smoothing::AbsoluteDiscount(d),
    )
    .unwrap()
}

fn random_ilm_order(rng: &mut ChaCha8Rng) -> IlmOrder {
    [IlmOrder::Zero, IlmOrder::One, IlmOrder::Full(3)][rng.random_range(0..3)]
}

pub fn phone_inventory() -> Inventory {
    Inventory::phonemes(["a", "b", "c"]).unwrap()
}

/// Exponents of a random instance; `lam` and `alpha` are zero a quarter of
/// the time each.
pub fn random_scales(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let lam = if rng.random_bool(0.25) {
        0.0
    } else {
        rng.random_range(0.2..2.0)
    };
    let alpha = if rng.random_bool(0.25) {
        0.0
    } else {
        rng.random_range(0.1..1.0)
    };
    (lam, alpha)
}

pub struct TimeSyncCase {
    pub lex: SearchLexicon,
    pub lm: NGramModel,
    pub factors: FactoredScores,
    pub tri_prior: ContextPrior,
    pub di_prior: ContextPrior,
    pub pg: Posteriorgram,
    pub ctc_prior: ContextPrior,
    pub lam: f64,
    pub alpha: f64,
    pub trans: TransitionModel,
}

pub fn time_sync_case(seed: u64) -> TimeSyncCase {
    let mut r = rng(seed);
    let inv = phone_inventory();
    let n_words = r.random_range(2..=5);
    let lexicon = random_lexicon(&mut r, &inv, n_words);
    let words: Vec<String> = lexicon.entries().iter().map(|e| e.word.clone()).collect();
    let order = r.random_range(1..=3);
    let lm = random_lm(&mut r, &words, order, 6);
    let frames = r.random_range(1..=4);
    let labels = inv.symbols().to_vec();
    let factors = random_factors(&mut r, &labels, frames);
    let tri_prior = random_prior(&mut r, ContextOrder::Tri, &labels);
    let di_prior = random_prior(&mut r, ContextOrder::Di, &labels);
    let mut ctc_labels = vec![BLANK.to_owned()];
    ctc_labels.extend(labels.iter().filter(|l| l.as_str() != "[SIL]").cloned());
    let rows = random_rows(&mut r, ctc_labels.len(), frames, 4.0);
    let pg = Posteriorgram::from_probs(ctc_labels.clone(), &rows).unwrap();
    let ctc_prior = random_prior(&mut r, ContextOrder::Mono, &ctc_labels);
    let (lam, alpha) = random_scales(&mut r);
    let beta = r.random_range(0.0..2.0);
    let trans = TransitionModel::new(r.random_range(0.1..0.9), beta).unwrap();
    TimeSyncCase {
        lex: SearchLexicon::new(lexicon).unwrap(),
        lm,
        factors,
        tri_prior,
        di_prior,
        pg,
        ctc_prior,
        lam,
        alpha,
        trans,
    }
}

pub struct TransducerCase {
    pub scorer: BiasedScorer,
    pub ilm: IlmModel,
    pub lm: NGramModel,
    /// Present for closed-vocabulary cases.
    pub lex: Option<SearchLexicon>,
    pub lam: f64,
    pub alpha: f64,
}

pub fn subword_labels() -> Vec<String> {
    strings(&["a", "a</w>", "b</w>"])
}

/// Closed cases spell lexicon words in phoneme units; open cases emit the
/// three subword tokens freely.
pub fn transducer_case(seed: u64, closed: bool) -> TransducerCase {
    let mut r = rng(seed);
    let frames = r.random_range(1..=4);
    let (labels, lm, lex) = if closed {
        let inv = phone_inventory();
        let n_words = r.random_range(2..=5);
        let lexicon = random_lexicon(&mut r, &inv, n_words);
        let words: Vec<String> = lexicon.entries().iter().map(|e| e.word.clone()).collect();
        let order = r.random_range(1..=3);
        let lm = random_lm(&mut r, &words, order, 6);
        let units: Vec<String> = inv
            .symbols()
            .iter()
            .filter(|s| s.as_str() != "[SIL]")
            .cloned()
            .collect();
        (units, lm, Some(SearchLexicon::new(lexicon).unwrap()))
    } else {
        let toks = subword_labels();
        let order = r.random_range(1..=3);
        let lm = random_lm(&mut r, &toks, order, 6);
        (toks, lm, None)
    };
    let mut all = vec![BLANK.to_owned()];
    all.extend(labels.iter().cloned());
    let rows = random_rows(&mut r, all.len(), frames, 4.0);
    let pg = Posteriorgram::from_probs(all, &rows).unwrap();
    let bias_order = random_ilm_order(&mut r);
    let bias = random_ilm(&mut r, &labels, bias_order, false);
    let w = r.random_range(0.0..1.5);
    let scorer = BiasedScorer::transducer(pg, Some((bias, w))).unwrap();
    let ilm_order = random_ilm_order(&mut r);
    let ilm = random_ilm(&mut r, &labels, ilm_order, false);
    let (lam, alpha) = random_scales(&mut r);
    TransducerCase {
        scorer,
        ilm,
        lm,
        lex,
        lam,
        alpha,
    }
}

pub struct LabelSyncCase {
    pub scorer: BiasedScorer,
    pub ilm: IlmModel,
    pub lm: NGramModel,
    pub lam: f64,
    pub alpha: f64,
    pub delta: f64,
    pub max_steps: usize,
}

pub fn label_sync_case(seed: u64) -> LabelSyncCase {
    let mut r = rng(seed);
    let toks = subword_labels();
    let order = r.random_range(1..=3);
    let lm = random_lm(&mut r, &toks, order, 6);
    let mut all = toks.clone();
    all.insert(r.random_range(0..=toks.len()), EOS.to_owned());
    let rows = r.random_range(1..=4);
    let pg =
        Posteriorgram::from_probs(all, &random_rows(&mut r, toks.len() + 1, rows, 4.0)).unwrap();
    let bias_order = random_ilm_order(&mut r);
    let bias = random_ilm(&mut r, &toks, bias_order, true);
    let scorer = BiasedScorer::label_sync(pg, Some((bias, r.random_range(0.0..1.5)))).unwrap();
    let ilm_order = random_ilm_order(&mut r);
    let ilm = random_ilm(&mut r, &toks, ilm_order, true);
    let (lam, alpha) = random_scales(&mut r);
    let delta = if r.random_bool(0.3) {
        0.0
    } else {
        r.random_range(0.0..1.5)
    };
    LabelSyncCase {
        scorer,
        ilm,
        lm,
        lam,
        alpha,
        delta,
        max_steps: 4,
    }
}
