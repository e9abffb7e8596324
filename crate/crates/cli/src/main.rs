//! `seqshift` command line tool.
//!
//! Exit codes: 0 on success, 2 for invalid input or usage, 3 when a valid job
//! fails while running.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use seqshift::emitter::{CalibrationConfig, SynthSet};
use seqshift::harness::{
    domain_stats, emit_report, read_references, run_experiment, synth_dataset, ExperimentResults,
    ExperimentSpec, Recognizer, ReportFormat, UtteranceErrors, WerReport,
};
use seqshift::lexicon::Lexicon;
use seqshift::ngram::{
    count_ngrams, estimate_ngram, perplexity, renormalize_subword_ppl, NGramModel, Smoothing,
    DEFAULT_DISCOUNT,
};
use seqshift::search::DecodeConfig;
use seqshift::text::{bpe_apply, bpe_learn, build_vocabulary, BpeModel, Corpus, Vocabulary};
use seqshift::Error;

#[derive(Parser)]
#[command(
    name = "seqshift",
    version,
    about = "Sequence decoding and domain-shift evaluation"
)]
struct Cli {
    /// Generation seed; overrides the seeds of the experiment config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Experiment config (JSON, schema "seqshift-exp/1").
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a back-off n-gram LM and write it as ARPA.
    LmTrain(LmTrain),
    /// Perplexity and OOV rate of an ARPA LM on a text.
    LmEval(LmEval),
    /// Learn BPE merges from a text.
    BpeLearn(BpeLearn),
    /// Segment a text into BPE tokens.
    BpeApply(BpeApply),
    /// Parse a lexicon and report words it does not cover.
    LexiconCheck(LexiconCheck),
    /// Synthesize acoustic scores for a dataset of the config.
    SynthGen(SynthGen),
    /// Find the emitter temperature that yields a target WER.
    CalibrateTau(CalibrateTau),
    /// Decode a synthesized set and score it against its references.
    Decode(Decode),
    /// Run the full experiment grid of the config.
    Experiment(Experiment),
    /// Print WER tables from experiment results, or LM domain statistics.
    Report(Report),
}

#[derive(Args)]
struct LmTrain {
    text: PathBuf,
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Absolute discount in (0, 1).
    #[arg(long, default_value_t = DEFAULT_DISCOUNT, conflicts_with = "mle")]
    discount: f64,
    /// Unsmoothed relative frequencies.
    #[arg(long)]
    mle: bool,
    /// Keep only the most frequent words.
    #[arg(long, conflicts_with = "bpe")]
    max_vocab: Option<usize>,
    /// Train a subword LM: segment the text with this BPE model and use its
    /// full token inventory as vocabulary.
    #[arg(long)]
    bpe: Option<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct LmEval {
    lm: PathBuf,
    text: PathBuf,
    /// Segment the text with this BPE model and also report word-level
    /// perplexity.
    #[arg(long)]
    bpe: Option<PathBuf>,
}

#[derive(Args)]
struct BpeLearn {
    text: PathBuf,
    #[arg(long)]
    merges: usize,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct BpeApply {
    bpe: PathBuf,
    text: PathBuf,
    /// Output file (default: stdout).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LexiconCheck {
    lexicon: PathBuf,
    /// Text whose words must be covered.
    #[arg(long)]
    text: Option<PathBuf>,
    /// ARPA LM whose vocabulary must be covered.
    #[arg(long)]
    lm: Option<PathBuf>,
    /// Fail when any word is missing.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct SynthGen {
    #[arg(long)]
    model: String,
    #[arg(long)]
    dataset: String,
    /// Overrides the emitter temperature of the config.
    #[arg(long)]
    temperature: Option<f64>,
    /// Manifest path; score matrices go next to it.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct Exponents {
    #[arg(long, default_value_t = 1.0)]
    lm_scale: f64,
    #[arg(long, default_value_t = 0.0)]
    prior_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    transition_scale: f64,
    #[arg(long, default_value_t = 0.0)]
    length_norm: f64,
    /// Beam size (default: the config's search beam).
    #[arg(long)]
    beam: Option<usize>,
}

impl Exponents {
    fn config(&self, spec: &ExperimentSpec) -> DecodeConfig {
        DecodeConfig {
            lm_scale: self.lm_scale,
            prior_scale: self.prior_scale,
            transition_scale: self.transition_scale,
            length_norm: self.length_norm,
            beam_size: self.beam.unwrap_or(spec.search.beam_size),
            score_margin: spec.search.score_margin,
            ..DecodeConfig::default()
        }
    }
}

#[derive(Args)]
struct CalibrateTau {
    #[arg(long)]
    model: String,
    #[arg(long)]
    lm: String,
    #[arg(long)]
    dataset: String,
    /// Target WER as a fraction.
    #[arg(long)]
    target: f64,
    #[arg(long, default_value_t = 0.002)]
    tolerance: f64,
    #[arg(long, default_value_t = 64.0)]
    tau_max: f64,
    /// Number of generation seeds, counted up from --seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[command(flatten)]
    exps: Exponents,
}

#[derive(Args)]
struct Decode {
    #[arg(long)]
    model: String,
    #[arg(long)]
    lm: String,
    /// Manifest written by synth-gen.
    manifest: PathBuf,
    /// Write hypotheses here, one `id<TAB>words` line per utterance.
    #[arg(long)]
    hyp: Option<PathBuf>,
    #[command(flatten)]
    exps: Exponents,
}

#[derive(Args)]
struct Experiment {
    /// Results JSON.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
}

#[derive(Args)]
struct Report {
    /// Results JSON written by `experiment`.
    #[arg(long, conflicts_with = "stats_lm")]
    results: Option<PathBuf>,
    /// Only this LM's table.
    #[arg(long, requires = "results")]
    lm: Option<String>,
    /// LM row for domain statistics: NAME=ARPA=TRAIN_TEXT.
    #[arg(long = "stats-lm", value_name = "NAME=ARPA=TEXT")]
    stats_lm: Vec<String>,
    /// Evaluation corpus column: NAME=TEXT.
    #[arg(long, value_name = "NAME=TEXT", requires = "stats_lm")]
    corpus: Vec<String>,
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidArgument(msg.into()).into()
}

fn load_spec(cli: &Cli) -> anyhow::Result<ExperimentSpec> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| invalid("this command needs --config"))?;
    let mut spec = ExperimentSpec::read(path)?;
    if let Some(seed) = cli.seed {
        spec.seeds = vec![seed];
    }
    spec.validate()?;
    Ok(spec)
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn print_json(value: &serde_json::Value) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn segment(bpe: &BpeModel, corpus: &Corpus) -> anyhow::Result<Corpus> {
    let lines = corpus.lines().iter().map(|l| bpe_apply(bpe, l)).collect();
    Ok(Corpus::new(corpus.name(), lines)?)
}

fn lm_train(a: &LmTrain) -> anyhow::Result<()> {
    let mut corpus = Corpus::read(&a.text)?;
    let vocab = match &a.bpe {
        Some(bpe) => {
            let bpe = BpeModel::read(bpe)?;
            corpus = segment(&bpe, &corpus)?;
            Vocabulary::from_words(bpe.vocab())
        }
        None => build_vocabulary(&corpus, a.max_vocab)?,
    };
    let smoothing = if a.mle {
        Smoothing::Mle
    } else {
        Smoothing::AbsoluteDiscount(a.discount)
    };
    let lm = estimate_ngram(&count_ngrams(&corpus, &vocab, a.order)?, smoothing)?;
    lm.write_arpa_file(&a.out)?;
    let ngrams: Vec<usize> = (1..=lm.order()).map(|n| lm.num_ngrams(n)).collect();
    print_json(&json!({
        "order": lm.order(),
        "vocab_size": vocab.regular_words().len(),
        "ngrams": ngrams,
        "running_words": corpus.running_words(),
    }))
}

fn lm_eval(a: &LmEval) -> anyhow::Result<()> {
    let lm = NGramModel::read_arpa_file(&a.lm)?;
    let corpus = Corpus::read(&a.text)?;
    let mut out = match &a.bpe {
        None => {
            let p = perplexity(&lm, &corpus)?;
            json!({
                "perplexity": p.perplexity,
                "log10_prob": p.log10_prob,
                "tokens": p.tokens,
                "oov": p.oov,
            })
        }
        Some(bpe) => {
            let bpe = BpeModel::read(bpe)?;
            let p = perplexity(&lm, &segment(&bpe, &corpus)?)?;
            // one sentence end per line on both levels
            let words = corpus.running_words() + corpus.num_lines();
            json!({
                "perplexity": p.perplexity,
                "word_perplexity": renormalize_subword_ppl(p.perplexity, p.tokens, words)?,
                "log10_prob": p.log10_prob,
                "tokens": p.tokens,
                "words": words,
                "oov": p.oov,
            })
        }
    };
    let oov_rate = out["oov"].as_f64().unwrap_or(0.0)
        / (out["tokens"].as_f64().unwrap_or(1.0) - corpus.num_lines() as f64).max(1.0);
    out["oov_rate"] = json!(oov_rate);
    out["sentences"] = json!(corpus.num_lines());
    print_json(&out)
}

fn bpe_learn_cmd(a: &BpeLearn) -> anyhow::Result<()> {
    let model = bpe_learn(&Corpus::read(&a.text)?, a.merges)?;
    model.write(&a.out)?;
    print_json(&json!({
        "merges": model.merges().len(),
        "vocab_size": model.vocab().len(),
    }))
}

fn bpe_apply_cmd(a: &BpeApply) -> anyhow::Result<()> {
    let model = BpeModel::read(&a.bpe)?;
    let corpus = Corpus::read(&a.text)?;
    let text: String = corpus
        .lines()
        .iter()
        .map(|l| bpe_apply(&model, l).join(" ") + "\n")
        .collect();
    write_output(a.out.as_deref(), &text)
}

fn lexicon_check(a: &LexiconCheck) -> anyhow::Result<()> {
    let lex = Lexicon::read(&a.lexicon, None)?;
    let mut out = json!({
        "words": lex.len(),
        "units": lex.num_units(),
    });
    let mut missing_total = 0;
    let mut check = |key: &str, vocab: &Vocabulary| {
        let missing = lex.missing_words(vocab);
        missing_total += missing.len();
        out[key] = json!(missing);
    };
    if let Some(text) = &a.text {
        check(
            "missing_from_text",
            &build_vocabulary(&Corpus::read(text)?, None)?,
        );
    }
    if let Some(lm) = &a.lm {
        check("missing_from_lm", NGramModel::read_arpa_file(lm)?.vocab());
    }
    print_json(&out)?;
    if a.strict && missing_total > 0 {
        return Err(
            Error::VocabMismatch(format!("{missing_total} words have no pronunciation")).into(),
        );
    }
    Ok(())
}

fn synth_gen(cli: &Cli, a: &SynthGen) -> anyhow::Result<()> {
    let spec = load_spec(cli)?;
    let mut emitter = spec.emitter.clone();
    if let Some(t) = a.temperature {
        emitter.temperature = t;
    }
    if let Some(s) = cli.seed {
        emitter.seed = s;
    }
    let set = synth_dataset(&spec, &a.model, &a.dataset, &emitter)?;
    set.save(&a.out)?;
    print_json(&json!({
        "utterances": set.utterances.len(),
        "seed": set.seed,
        "temperature": set.temperature,
    }))
}

fn references(spec: &ExperimentSpec, dataset: &str) -> anyhow::Result<Vec<(String, Vec<String>)>> {
    let d = spec
        .datasets
        .iter()
        .find(|d| d.name == dataset)
        .ok_or_else(|| invalid(format!("no dataset named {dataset:?}")))?;
    Ok(read_references(&d.text)?)
}

fn calibrate(cli: &Cli, a: &CalibrateTau) -> anyhow::Result<()> {
    let spec = load_spec(cli)?;
    if a.seeds == 0 {
        bail!(invalid("--seeds must be positive"));
    }
    let rec = Recognizer::load(&spec, &a.model, &a.lm)?;
    let refs = references(&spec, &a.dataset)?;
    let base = cli.seed.unwrap_or(0);
    let cal = CalibrationConfig {
        target: a.target,
        tolerance: a.tolerance,
        tau_max: a.tau_max,
        seeds: (base..base + a.seeds).collect(),
        ..CalibrationConfig::default()
    };
    let res = rec.calibrate(&refs, &spec.emitter, &a.exps.config(&spec), &cal)?;
    print_json(&serde_json::to_value(&res)?)
}

fn decode(cli: &Cli, a: &Decode) -> anyhow::Result<()> {
    let spec = load_spec(cli)?;
    let rec = Recognizer::load(&spec, &a.model, &a.lm)?;
    let cfg = a.exps.config(&spec);
    let set = SynthSet::load(&a.manifest)?;
    let mut hyps = String::new();
    let mut errs = Vec::with_capacity(set.utterances.len());
    for u in &set.utterances {
        let hyp = rec.recognize(&u.emission, &cfg)?;
        hyps.push_str(&format!("{}\t{}\n", u.id, hyp.join(" ")));
        errs.push(UtteranceErrors {
            id: u.id.clone(),
            counts: seqshift::harness::error_counts(&u.words, &hyp),
        });
    }
    if let Some(p) = &a.hyp {
        write_output(Some(p), &hyps)?;
    }
    let r = WerReport::from_utterances(errs);
    print_json(&json!({
        "wer": r.wer(),
        "substitutions": r.substitutions(),
        "insertions": r.insertions(),
        "deletions": r.deletions(),
        "ref_words": r.ref_words(),
        "utterances": set.utterances.len(),
    }))
}

fn experiment(cli: &Cli, a: &Experiment) -> anyhow::Result<()> {
    let spec = load_spec(cli)?;
    let results = run_experiment(&spec)?;
    if let Some(p) = &a.out {
        write_output(Some(p), &results.to_json())?;
    }
    print_wer_tables(&results, None, a.format)
}

fn print_wer_tables(
    results: &ExperimentResults,
    lm: Option<&str>,
    format: ReportFormat,
) -> anyhow::Result<()> {
    let lms: Vec<&str> = match lm {
        Some(l) => vec![l],
        None => results.lms.iter().map(String::as_str).collect(),
    };
    for (i, lm) in lms.iter().enumerate() {
        if i > 0 {
            println!();
        }
        println!("LM: {lm}");
        print!("{}", emit_report(&results.wer_table(lm)?, format)?);
    }
    Ok(())
}

fn split_arg<const N: usize>(arg: &str) -> anyhow::Result<[&str; N]> {
    let parts: Vec<&str> = arg.splitn(N, '=').collect();
    parts
        .try_into()
        .map_err(|_| invalid(format!("expected {N} '='-separated fields in {arg:?}")))
}

fn report(a: &Report) -> anyhow::Result<()> {
    if let Some(path) = &a.results {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        return print_wer_tables(
            &ExperimentResults::from_json(&text)?,
            a.lm.as_deref(),
            a.format,
        );
    }
    if a.stats_lm.is_empty() {
        bail!(invalid("report needs --results or --stats-lm"));
    }
    let mut lms = Vec::new();
    for arg in &a.stats_lm {
        let [name, arpa, text] = split_arg::<3>(arg)?;
        lms.push((name, NGramModel::read_arpa_file(arpa)?, Corpus::read(text)?));
    }
    let mut corpora = Vec::new();
    for arg in &a.corpus {
        let [name, text] = split_arg::<2>(arg)?;
        corpora.push((name, Corpus::read(text)?));
    }
    let lm_refs: Vec<_> = lms.iter().map(|(n, m, c)| (*n, m, c)).collect();
    let corpus_refs: Vec<_> = corpora.iter().map(|(n, c)| (*n, c)).collect();
    print!(
        "{}",
        emit_report(&domain_stats(&lm_refs, &corpus_refs)?, a.format)?
    );
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(invalid("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting thread pool")?;
    }
    match &cli.command {
        Command::LmTrain(a) => lm_train(a),
        Command::LmEval(a) => lm_eval(a),
        Command::BpeLearn(a) => bpe_learn_cmd(a),
        Command::BpeApply(a) => bpe_apply_cmd(a),
        Command::LexiconCheck(a) => lexicon_check(a),
        Command::SynthGen(a) => synth_gen(cli, a),
        Command::CalibrateTau(a) => calibrate(cli, a),
        Command::Decode(a) => decode(cli, a),
        Command::Experiment(a) => experiment(cli, a),
        Command::Report(a) => report(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_validation() => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
