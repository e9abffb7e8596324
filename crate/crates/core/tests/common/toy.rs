//! Seeded two-domain toy experiment written to a temporary directory.
//!
//! Words are consonant-vowel strings spelled one phoneme per letter. Each
//! domain has its own dominant vocabulary and a sparse word bigram chain;
//! ten percent of its running words come from the other domain. Models are
//! trained on source text; dev and test references come from the target
//! chain.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use seqshift::emitter::{Durations, EmitterConfig};
use seqshift::harness::{
    DatasetSpec, ExperimentSpec, GridSpec, LmSpec, ModelKind, ModelSpec, SearchSpec, Split, Unit,
    SCHEMA,
};
use seqshift::ngram::{count_ngrams, estimate_ngram, Smoothing};
use seqshift::search::VocabMode;
use seqshift::text::{bpe_apply, bpe_learn, BpeModel, Corpus, Vocabulary, END_OF_WORD};
use tempfile::TempDir;

use super::fixtures::rng;

const CONSONANTS: [&str; 6] = ["b", "d", "k", "m", "p", "t"];
const VOWELS: [&str; 3] = ["a", "i", "o"];

pub struct ToyOptions {
    pub words_per_domain: usize,
    pub train_sentences: usize,
    pub lm_sentences: usize,
    pub dev_utterances: usize,
    pub test_utterances: usize,
    pub temperature: f64,
    pub gain: f64,
    pub seeds: Vec<u64>,
    pub bpe_merges: usize,
    /// Internal-LM weight of the first-order phoneme transducer.
    pub weak_bias: f64,
    /// Internal-LM weight of the full-context BPE models.
    pub strong_bias: f64,
    pub grid: GridSpec,
    pub beam: usize,
}

impl Default for ToyOptions {
    fn default() -> Self {
        ToyOptions {
            words_per_domain: 12,
            train_sentences: 300,
            lm_sentences: 300,
            dev_utterances: 20,
            test_utterances: 150,
            temperature: 3.5,
            gain: 6.0,
            seeds: vec![0],
            bpe_merges: 40,
            weak_bias: 0.2,
            strong_bias: 0.8,
            grid: GridSpec {
                lm_scale: vec![0.6, 1.0, 1.4],
                prior_scale: vec![0.0, 0.3],
                transition_scale: vec![1.0],
                length_norm: vec![0.0, 1.0],
                ..GridSpec::default()
            },
            beam: 8,
        }
    }
}

pub struct Toy {
    pub dir: TempDir,
    pub spec: ExperimentSpec,
}

fn random_word(r: &mut ChaCha8Rng) -> String {
    let syllables = r.random_range(1..=2);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(CONSONANTS.choose(r).unwrap());
        w.push_str(VOWELS.choose(r).unwrap());
    }
    w
}

/// Sparse bigram chain over `own` with excursions into `other`.
struct Chain {
    own: Vec<String>,
    other: Vec<String>,
    next: Vec<Vec<usize>>,
}

impl Chain {
    fn new(r: &mut ChaCha8Rng, own: &[String], other: &[String]) -> Self {
        let next = (0..own.len())
            .map(|_| (0..3).map(|_| r.random_range(0..own.len())).collect())
            .collect();
        Chain {
            own: own.to_vec(),
            other: other.to_vec(),
            next,
        }
    }

    fn sentence(&self, r: &mut ChaCha8Rng, len: usize) -> Vec<String> {
        let mut out = Vec::with_capacity(len);
        let mut cur = r.random_range(0..self.own.len());
        for _ in 0..len {
            if r.random_bool(0.1) {
                out.push(self.other.choose(r).unwrap().clone());
            } else {
                out.push(self.own[cur].clone());
            }
            cur = *self.next[cur].choose(r).unwrap();
        }
        out
    }

    fn text(&self, r: &mut ChaCha8Rng, n: usize) -> Vec<Vec<String>> {
        (0..n)
            .map(|_| {
                let len = r.random_range(3..=7);
                self.sentence(r, len)
            })
            .collect()
    }
}

fn write_lines(path: &Path, lines: &[Vec<String>]) {
    let text: String = lines.iter().map(|l| l.join(" ") + "\n").collect();
    std::fs::write(path, text).unwrap();
}

fn write_lm(path: &Path, lines: &[Vec<String>], vocab: &Vocabulary, order: usize) {
    let corpus = Corpus::new("lm", lines.to_vec()).unwrap();
    let lm = estimate_ngram(
        &count_ngrams(&corpus, vocab, order).unwrap(),
        Smoothing::default(),
    )
    .unwrap();
    lm.write_arpa_file(path).unwrap();
}

pub fn two_domain(seed: u64, opt: &ToyOptions) -> Toy {
    let mut r = rng(seed);
    let mut seen = BTreeSet::new();
    let mut fresh = |r: &mut ChaCha8Rng, n: usize| -> Vec<String> {
        let mut out = Vec::new();
        while out.len() < n {
            let w = random_word(r);
            if seen.insert(w.clone()) {
                out.push(w);
            }
        }
        out
    };
    let source_words = fresh(&mut r, opt.words_per_domain);
    let target_words = fresh(&mut r, opt.words_per_domain);
    let source = Chain::new(&mut r, &source_words, &target_words);
    let target = Chain::new(&mut r, &target_words, &source_words);
    let train = source.text(&mut r, opt.train_sentences);
    let source_lm_text = source.text(&mut r, opt.lm_sentences);
    let target_lm_text = target.text(&mut r, opt.lm_sentences);
    let dev = target.text(&mut r, opt.dev_utterances);
    let test = target.text(&mut r, opt.test_utterances);

    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let all: Vec<&String> = source_words.iter().chain(&target_words).collect();
    let lexicon: String = all
        .iter()
        .map(|w| {
            format!(
                "{w}\t{}\n",
                w.chars().map(String::from).collect::<Vec<_>>().join(" ")
            )
        })
        .collect();
    std::fs::write(p("lexicon.txt"), lexicon).unwrap();
    write_lines(&p("train.txt"), &train);
    write_lines(&p("dev.txt"), &dev);
    write_lines(&p("test.txt"), &test);

    // merges from source text over the full letter alphabet
    let learned = bpe_learn(
        &Corpus::new("train", train.clone()).unwrap(),
        opt.bpe_merges,
    )
    .unwrap();
    let alphabet: Vec<String> = CONSONANTS
        .iter()
        .chain(&VOWELS)
        .flat_map(|c| [c.to_string(), format!("{c}{END_OF_WORD}")])
        .collect();
    let bpe = BpeModel::from_parts(Some(alphabet), learned.merges().to_vec()).unwrap();
    bpe.write(p("bpe.txt")).unwrap();

    let words = Vocabulary::from_words(all.iter().map(|s| s.as_str()));
    let tokens = Vocabulary::from_words(bpe.vocab());
    let seg = |lines: &[Vec<String>]| -> Vec<Vec<String>> {
        lines.iter().map(|l| bpe_apply(&bpe, l)).collect()
    };
    write_lm(&p("source.word.arpa"), &source_lm_text, &words, 2);
    write_lm(&p("target.word.arpa"), &target_lm_text, &words, 2);
    write_lm(&p("source.sub.arpa"), &seg(&source_lm_text), &tokens, 3);
    write_lm(&p("target.sub.arpa"), &seg(&target_lm_text), &tokens, 3);

    let model = |name: &str, kind, unit, context: Option<&str>, bias: f64| ModelSpec {
        name: name.into(),
        kind,
        unit,
        context: context.map(str::to_owned),
        lexicon: Some(p("lexicon.txt")),
        bpe: (unit == Unit::Bpe).then(|| p("bpe.txt")),
        train_text: p("train.txt"),
        bias,
        vocab_mode: VocabMode::Closed,
        loop_prob: 0.5,
    };
    let spec = ExperimentSpec {
        schema: SCHEMA.into(),
        seeds: opt.seeds.clone(),
        emitter: EmitterConfig {
            temperature: opt.temperature,
            gain: opt.gain,
            durations: Durations::Fixed(2),
            seed: 0,
        },
        models: vec![
            model("ctc", ModelKind::Ctc, Unit::Phon, None, 0.0),
            model("fh-tri", ModelKind::FhTri, Unit::Phon, None, 0.0),
            model("fh-di", ModelKind::FhDi, Unit::Phon, None, 0.0),
            model(
                "rnnt-phon",
                ModelKind::Transducer,
                Unit::Phon,
                Some("1"),
                opt.weak_bias,
            ),
            model(
                "rnnt-bpe",
                ModelKind::Transducer,
                Unit::Bpe,
                Some("inf:3"),
                opt.strong_bias,
            ),
            model(
                "aed",
                ModelKind::Aed,
                Unit::Bpe,
                Some("inf:3"),
                opt.strong_bias,
            ),
        ],
        lms: ["source", "target"]
            .iter()
            .map(|n| LmSpec {
                name: n.to_string(),
                word: Some(p(&format!("{n}.word.arpa"))),
                subword: Some(p(&format!("{n}.sub.arpa"))),
            })
            .collect(),
        datasets: vec![
            DatasetSpec {
                name: "target dev".into(),
                domain: "target".into(),
                split: Split::Dev,
                text: p("dev.txt"),
            },
            DatasetSpec {
                name: "target test".into(),
                domain: "target".into(),
                split: Split::Test,
                text: p("test.txt"),
            },
        ],
        grid: opt.grid.clone(),
        search: SearchSpec {
            beam_size: opt.beam,
            score_margin: None,
        },
    };
    Toy { dir, spec }
}
