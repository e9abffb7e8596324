//! Decoder outputs against exhaustive search on seeded toy instances.

use super::fixtures::{label_sync_case, time_sync_case, transducer_case};
use super::oracle::{ctc_oracle, fh_oracle, label_sync_oracle, transducer_oracle, Best};
use seqshift::search::{
    decode_label_sync, decode_time_sync, decode_transducer, DecodeConfig, DecodeResult,
    TimeSyncModel, TransducerVocab, VocabMode,
};
use seqshift::Result;

pub fn unbounded(lam: f64, alpha: f64) -> DecodeConfig {
    DecodeConfig {
        lm_scale: lam,
        prior_scale: alpha,
        beam_size: usize::MAX,
        ..DecodeConfig::default()
    }
}

/// Panics on disagreement. Returns whether a hypothesis existed, so callers
/// can make sure most cases compare real outputs.
fn check(what: &str, seed: u64, got: Result<DecodeResult>, want: Option<Best>) -> bool {
    match (got, want) {
        (Ok(g), Some(w)) => {
            assert_eq!(g.words, w.words, "{what} seed {seed}");
            assert!(
                (g.score - w.score).abs() <= 1e-6,
                "{what} seed {seed}: {} vs {}",
                g.score,
                w.score
            );
            true
        }
        (Err(_), None) => false,
        (g, w) => panic!("{what} seed {seed}: decoder {g:?}, oracle {w:?}"),
    }
}

/// FH triphone, FH diphone and CTC on `cases` instances; returns the number
/// of comparisons with a hypothesis.
pub fn time_sync_sweep(cases: u64) -> usize {
    let mut found = 0;
    for seed in 0..cases {
        let c = time_sync_case(seed);
        let cfg = DecodeConfig {
            transition_scale: c.trans.beta,
            ..unbounded(c.lam, c.alpha)
        };
        let lex = c.lex.lexicon();
        for tri in [true, false] {
            let (model, prior) = if tri {
                (
                    TimeSyncModel::FhTri {
                        scores: &c.factors,
                        prior: &c.tri_prior,
                    },
                    &c.tri_prior,
                )
            } else {
                (
                    TimeSyncModel::FhDi {
                        scores: &c.factors,
                        prior: &c.di_prior,
                    },
                    &c.di_prior,
                )
            };
            let got = decode_time_sync(model, &c.lex, &c.lm, &c.trans, &cfg);
            let want = fh_oracle(&c.factors, prior, lex, &c.lm, tri, c.lam, c.alpha, &c.trans);
            found += check(if tri { "fh-tri" } else { "fh-di" }, seed, got, want) as usize;
        }
        let got = decode_time_sync(
            TimeSyncModel::Ctc {
                pg: &c.pg,
                prior: &c.ctc_prior,
            },
            &c.lex,
            &c.lm,
            &c.trans,
            &cfg,
        );
        found += check(
            "ctc",
            seed,
            got,
            ctc_oracle(&c.pg, &c.ctc_prior, lex, &c.lm, c.lam, c.alpha),
        ) as usize;
    }
    found
}

/// Closed- and open-vocabulary transducer on `cases` instances each.
pub fn transducer_sweep(cases: u64) -> usize {
    let mut found = 0;
    for seed in 0..cases {
        for closed in [true, false] {
            let c = transducer_case(seed, closed);
            let mut cfg = unbounded(c.lam, c.alpha);
            let vocab = match &c.lex {
                Some(l) => TransducerVocab::Closed(l),
                None => {
                    cfg.vocab_mode = VocabMode::Open;
                    TransducerVocab::Open
                }
            };
            let got = decode_transducer(&c.scorer, Some(&c.ilm), &c.lm, vocab, &cfg);
            let want = transducer_oracle(
                &c.scorer,
                Some(&c.ilm),
                &c.lm,
                c.lex.as_ref().map(|l| l.lexicon()),
                c.lam,
                c.alpha,
            );
            found += check(
                if closed {
                    "transducer-closed"
                } else {
                    "transducer-open"
                },
                seed,
                got,
                want,
            ) as usize;
        }
    }
    found
}

pub fn label_sync_sweep(cases: u64) -> usize {
    let mut found = 0;
    for seed in 0..cases {
        let c = label_sync_case(seed);
        let cfg = DecodeConfig {
            length_norm: c.delta,
            max_output_len: Some(c.max_steps),
            vocab_mode: VocabMode::Open,
            ..unbounded(c.lam, c.alpha)
        };
        let got = decode_label_sync(&c.scorer, Some(&c.ilm), &c.lm, &cfg);
        let want = label_sync_oracle(
            &c.scorer,
            Some(&c.ilm),
            &c.lm,
            c.lam,
            c.alpha,
            c.delta,
            c.max_steps,
        );
        found += check("label-sync", seed, got, want) as usize;
    }
    found
}
