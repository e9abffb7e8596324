//! Domain-shift experiments: every model decodes every dataset with every
//! LM, exponents tuned on the dev sets of the dataset's domain.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{WerRow, WerTable};
use super::wer::{error_counts, UtteranceErrors, WerReport};
use crate::acoustic::{
    estimate_context_prior, estimate_ilm, BiasedScorer, ContextOrder, ContextPrior, IlmModel,
    IlmOrder, StateContext, BLANK, PRIOR_FLOOR,
};
use crate::emitter::{
    calibrate_tau, pronounce, sample_durations, synth_factored, synth_posteriorgram, Calibration,
    CalibrationConfig, Emission, EmissionTarget, EmitterConfig, Layout, SynthSet, SynthUtterance,
};
use crate::error::{read_to_string, Error, Result};
use crate::lexicon::{Lexicon, SILENCE};
use crate::ngram::{NGramModel, Smoothing};
use crate::search::{
    decode_label_sync, decode_time_sync, decode_transducer, DecodeConfig, SearchLexicon,
    TimeSyncModel, TransducerVocab, VocabMode,
};
use crate::text::{bpe_apply, tokens_to_words, BpeModel, Corpus, EOS};
use crate::topology::TransitionModel;

pub const SCHEMA: &str = "seqshift-exp/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Ctc,
    FhTri,
    FhDi,
    Transducer,
    Aed,
}

impl ModelKind {
    pub fn display(self) -> &'static str {
        match self {
            ModelKind::Ctc => "CTC",
            ModelKind::FhTri | ModelKind::FhDi => "FH",
            ModelKind::Transducer => "Transducer",
            ModelKind::Aed => "AED",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Phon,
    Bpe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub kind: ModelKind,
    pub unit: Unit,
    /// Label context of transducer and AED models: `0`, `1` or `inf:N`.
    #[serde(default)]
    pub context: Option<String>,
    /// Pronunciation lexicon; for BPE units only its word list is used.
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub bpe: Option<PathBuf>,
    /// Source-domain transcripts the model was trained on. They give the
    /// internal LM, the label bias of the synthetic scorer and the priors.
    pub train_text: PathBuf,
    /// Weight of the internal LM inside the synthetic scorer.
    #[serde(default)]
    pub bias: f64,
    #[serde(default)]
    pub vocab_mode: VocabMode,
    #[serde(default = "default_loop")]
    pub loop_prob: f64,
}

fn default_loop() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmSpec {
    pub name: String,
    /// Word-level ARPA model for closed-vocabulary decoding.
    #[serde(default)]
    pub word: Option<PathBuf>,
    /// Subword-level ARPA model for open-vocabulary decoding.
    #[serde(default)]
    pub subword: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Dev,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub domain: String,
    pub split: Split,
    /// Reference transcripts, `id<TAB>words` or bare words per line.
    pub text: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub lm_scale_base: f64,
    /// Multiples of `lm_scale_base`.
    pub lm_scale: Vec<f64>,
    pub prior_scale: Vec<f64>,
    pub transition_scale: Vec<f64>,
    pub length_norm: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lm_scale_base: 1.0,
            lm_scale: vec![0.4, 0.6, 0.8, 1.0, 1.2],
            prior_scale: vec![0.0, 0.2, 0.4, 0.6],
            transition_scale: vec![1.0],
            length_norm: vec![0.0, 0.5, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpec {
    pub beam_size: usize,
    pub score_margin: Option<f64>,
}

impl Default for SearchSpec {
    fn default() -> Self {
        SearchSpec {
            beam_size: 16,
            score_margin: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema: String,
    /// Emitter seeds; every dataset is synthesized once per seed and WER is
    /// aggregated over all of them.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// The seed field is ignored in favour of `seeds`.
    #[serde(default)]
    pub emitter: EmitterConfig,
    pub models: Vec<ModelSpec>,
    pub lms: Vec<LmSpec>,
    pub datasets: Vec<DatasetSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub search: SearchSpec,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Experiment(msg.into())
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a spec; relative paths are taken relative to its directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut spec = Self::from_json(&read_to_string(path)?)?;
        spec.resolve(path.parent().unwrap_or(Path::new("")));
        Ok(spec)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for m in &mut self.models {
            m.lexicon.as_mut().map(fix);
            m.bpe.as_mut().map(fix);
            fix(&mut m.train_text);
        }
        for l in &mut self.lms {
            l.word.as_mut().map(fix);
            l.subword.as_mut().map(fix);
        }
        for d in &mut self.datasets {
            fix(&mut d.text);
        }
    }

    /// Structural checks and file existence; nothing is decoded.
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(invalid(format!(
                "schema {:?}, expected {SCHEMA:?}",
                self.schema
            )));
        }
        if self.models.is_empty()
            || self.lms.is_empty()
            || self.datasets.is_empty()
            || self.seeds.is_empty()
        {
            return Err(invalid("models, lms, datasets and seeds must be non-empty"));
        }
        let g = &self.grid;
        if g.lm_scale.is_empty()
            || g.prior_scale.is_empty()
            || g.transition_scale.is_empty()
            || g.length_norm.is_empty()
        {
            return Err(invalid("every grid axis needs at least one value"));
        }
        self.emitter.validate()?;
        for (what, names) in [
            (
                "model",
                self.models.iter().map(|m| &m.name).collect::<Vec<_>>(),
            ),
            ("lm", self.lms.iter().map(|m| &m.name).collect()),
            ("dataset", self.datasets.iter().map(|m| &m.name).collect()),
        ] {
            let mut seen = BTreeSet::new();
            for n in names {
                if !seen.insert(n) {
                    return Err(invalid(format!("duplicate {what} name {n:?}")));
                }
            }
        }
        let mut missing = Vec::new();
        let mut need = |p: &Option<PathBuf>, what: String| match p {
            None => missing.push(format!("{what}: not given")),
            Some(p) if !p.exists() => {
                missing.push(format!("{what}: {} does not exist", p.display()))
            }
            _ => {}
        };
        for m in &self.models {
            let closed = m.kind != ModelKind::Aed
                && (m.unit == Unit::Phon || m.vocab_mode == VocabMode::Closed);
            match (m.kind, m.unit) {
                (ModelKind::Ctc | ModelKind::FhTri | ModelKind::FhDi, Unit::Bpe) => {
                    return Err(invalid(format!(
                        "model {:?}: {:?} models use phoneme units",
                        m.name, m.kind
                    )))
                }
                (ModelKind::Aed, Unit::Phon) => {
                    return Err(invalid(format!("model {:?}: AED uses BPE units", m.name)))
                }
                _ => {}
            }
            if m.unit == Unit::Phon && m.vocab_mode == VocabMode::Open {
                return Err(invalid(format!(
                    "model {:?}: phoneme models decode with a closed vocabulary",
                    m.name
                )));
            }
            if m.unit == Unit::Bpe {
                need(&m.bpe, format!("model {:?} bpe", m.name));
            }
            if closed {
                need(&m.lexicon, format!("model {:?} lexicon", m.name));
            }
            need(
                &Some(m.train_text.clone()),
                format!("model {:?} train_text", m.name),
            );
            model_context(m)?;
            if !m.bias.is_finite() || m.bias < 0.0 {
                return Err(invalid(format!("model {:?}: bias must be >= 0", m.name)));
            }
            for l in &self.lms {
                let p = if closed { &l.word } else { &l.subword };
                need(
                    p,
                    format!(
                        "lm {:?} {} model for {:?}",
                        l.name,
                        if closed { "word" } else { "subword" },
                        m.name
                    ),
                );
            }
        }
        for d in &self.datasets {
            need(&Some(d.text.clone()), format!("dataset {:?}", d.name));
        }
        let dev: BTreeSet<&str> = self
            .datasets
            .iter()
            .filter(|d| d.split == Split::Dev)
            .map(|d| d.domain.as_str())
            .collect();
        for d in &self.datasets {
            if !dev.contains(d.domain.as_str()) {
                return Err(invalid(format!(
                    "domain {:?} of {:?} has no dev set to tune on",
                    d.domain, d.name
                )));
            }
        }
        if !missing.is_empty() {
            return Err(invalid(format!(
                "missing artifacts: {}",
                missing.join("; ")
            )));
        }
        Ok(())
    }

    /// Every configuration tried for a model kind, in selection tie order.
    pub fn grid_for(&self, kind: ModelKind) -> Vec<DecodeConfig> {
        let g = &self.grid;
        let one = |v: &[f64]| vec![v[0]];
        let betas = if matches!(kind, ModelKind::FhTri | ModelKind::FhDi) {
            g.transition_scale.clone()
        } else {
            one(&g.transition_scale)
        };
        let deltas = if kind == ModelKind::Aed {
            g.length_norm.clone()
        } else {
            vec![0.0]
        };
        let mut out = Vec::new();
        for &l in &g.lm_scale {
            for &a in &g.prior_scale {
                for &b in &betas {
                    for &d in &deltas {
                        out.push(DecodeConfig {
                            lm_scale: l * g.lm_scale_base,
                            prior_scale: a,
                            transition_scale: b,
                            length_norm: d,
                            beam_size: self.search.beam_size,
                            score_margin: self.search.score_margin,
                            ..DecodeConfig::default()
                        });
                    }
                }
            }
        }
        out
    }
}

fn model_context(m: &ModelSpec) -> Result<IlmOrder> {
    let default = match m.unit {
        Unit::Phon => "1",
        Unit::Bpe => "inf:3",
    };
    m.context.as_deref().unwrap_or(default).parse()
}

/// Index of the dev-best configuration: lowest WER, ties to the smaller
/// LM scale, then prior scale, transition scale and length norm. Only dev
/// results are passed in.
pub fn select_config(dev: &[(DecodeConfig, WerReport)]) -> Option<usize> {
    let key = |c: &DecodeConfig| [c.lm_scale, c.prior_scale, c.transition_scale, c.length_norm];
    (0..dev.len()).min_by(|&i, &j| {
        let (ci, ri) = &dev[i];
        let (cj, rj) = &dev[j];
        ri.wer().total_cmp(&rj.wer()).then_with(|| {
            key(ci)
                .iter()
                .zip(key(cj))
                .map(|(a, b)| a.total_cmp(&b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    })
}

/// Reads `id<TAB>words` lines; lines without a tab get ids from their line
/// number.
pub fn read_references(path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    let mut out = Vec::new();
    for (i, line) in read_to_string(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, words) = match line.split_once('\t') {
            Some((id, w)) => (id.trim().to_owned(), w),
            None => (format!("{:05}", i + 1), line),
        };
        out.push((id, words.split_whitespace().map(str::to_owned).collect()));
    }
    if out.is_empty() {
        return Err(invalid(format!("{}: no utterances", path.display())));
    }
    Ok(out)
}

/// A model with everything needed to synthesize and decode.
struct Model {
    spec: ModelSpec,
    context: IlmOrder,
    lexicon: Option<Lexicon>,
    bpe: Option<BpeModel>,
    /// Labels of synthesized scores (factored labels for FH).
    labels: Vec<String>,
    prior: Option<ContextPrior>,
    ilm: Option<IlmModel>,
    trans: TransitionModel,
}

impl Model {
    fn closed(&self) -> bool {
        self.spec.kind != ModelKind::Aed
            && (self.spec.unit == Unit::Phon || self.spec.vocab_mode == VocabMode::Closed)
    }

    fn units(&self, words: &[String]) -> Result<Vec<String>> {
        match (&self.bpe, &self.lexicon) {
            (Some(bpe), _) => Ok(bpe_apply(bpe, words)),
            (None, Some(lex)) => pronounce(lex, words),
            (None, None) => unreachable!("validated"),
        }
    }

    fn emission_target(&self) -> Result<Option<EmissionTarget>> {
        let layout = match self.spec.kind {
            ModelKind::FhTri | ModelKind::FhDi => return Ok(None),
            ModelKind::Ctc => Layout::Ctc,
            ModelKind::Transducer => Layout::Transducer,
            ModelKind::Aed => Layout::LabelSync,
        };
        EmissionTarget::new(self.labels.clone(), layout).map(Some)
    }

    fn synth(&self, words: &[String], cfg: &EmitterConfig, stream: u64) -> Result<Emission> {
        let units = self.units(words)?;
        if units.is_empty() {
            return Err(invalid(format!(
                "model {:?}: empty reference",
                self.spec.name
            )));
        }
        Ok(match self.emission_target()? {
            None => Emission::Factored(synth_factored(&self.labels, &units, cfg, stream)?),
            Some(t) => Emission::Posteriorgram(synth_posteriorgram(&t, &units, cfg, stream)?),
        })
    }

    fn ctx_label(&self) -> String {
        match self.spec.kind {
            ModelKind::Ctc => "0".into(),
            ModelKind::FhDi => "1".into(),
            ModelKind::FhTri => "2".into(),
            ModelKind::Transducer | ModelKind::Aed => match self.context {
                IlmOrder::Zero => "0".into(),
                IlmOrder::One => "1".into(),
                IlmOrder::Full(_) => "∞".into(),
            },
        }
    }
}

fn load_model(spec: &ModelSpec, emitter: &EmitterConfig) -> Result<Model> {
    let context = model_context(spec)?;
    let bpe = spec.bpe.as_ref().map(BpeModel::read).transpose()?;
    let lexicon = match &spec.lexicon {
        Some(p) if spec.unit == Unit::Phon => Some(Lexicon::read(p, None)?),
        Some(p) => {
            let words: Vec<String> = Lexicon::read(p, None)?
                .entries()
                .iter()
                .map(|e| e.word.clone())
                .collect();
            Some(Lexicon::from_bpe(bpe.as_ref().unwrap(), words)?)
        }
        None => None,
    };
    let train = Corpus::read(&spec.train_text)?;
    let mut model = Model {
        spec: spec.clone(),
        context,
        lexicon,
        bpe,
        labels: Vec::new(),
        prior: None,
        ilm: None,
        trans: TransitionModel::new(spec.loop_prob, 1.0)?,
    };
    let units: Vec<Vec<String>> = train
        .lines()
        .iter()
        .map(|l| model.units(l))
        .collect::<Result<_>>()?;
    let core: Vec<String> = match (&model.bpe, &model.lexicon) {
        (Some(b), _) => b.vocab().to_vec(),
        (None, Some(l)) => l
            .inventory()
            .symbols()
            .iter()
            .filter(|s| *s != SILENCE)
            .cloned()
            .collect(),
        (None, None) => unreachable!("validated"),
    };
    match spec.kind {
        ModelKind::Ctc | ModelKind::Transducer => {
            model.labels = std::iter::once(BLANK.to_owned())
                .chain(core.iter().cloned())
                .collect();
        }
        ModelKind::Aed => model.labels = core.iter().cloned().chain([EOS.to_owned()]).collect(),
        ModelKind::FhTri | ModelKind::FhDi => {
            model.labels = model
                .lexicon
                .as_ref()
                .unwrap()
                .inventory()
                .symbols()
                .to_vec();
        }
    }
    match spec.kind {
        ModelKind::Ctc => {
            let ctx = frame_contexts(&units, &model.labels, emitter, false)?;
            model.prior = Some(estimate_context_prior(
                &ctx,
                ContextOrder::Mono,
                model.labels.clone(),
                PRIOR_FLOOR,
            )?);
        }
        ModelKind::FhTri | ModelKind::FhDi => {
            let ctx = frame_contexts(&units, &model.labels, emitter, true)?;
            let order = if spec.kind == ModelKind::FhTri {
                ContextOrder::Tri
            } else {
                ContextOrder::Di
            };
            model.prior = Some(estimate_context_prior(
                &ctx,
                order,
                model.labels.clone(),
                PRIOR_FLOOR,
            )?);
        }
        ModelKind::Transducer | ModelKind::Aed => {
            let with_end = spec.kind == ModelKind::Aed;
            model.ilm = Some(estimate_ilm(
                &units,
                core,
                context,
                with_end,
                Smoothing::default(),
            )?);
        }
    }
    Ok(model)
}

/// Frame contexts of the training transcripts laid out as the emitter
/// would. Hybrid layouts repeat each unit and add one silence frame at
/// both ends; otherwise a unit is followed by blanks.
fn frame_contexts(
    units: &[Vec<String>],
    labels: &[String],
    emitter: &EmitterConfig,
    hybrid: bool,
) -> Result<Vec<Vec<StateContext>>> {
    let index = |x: &str| {
        labels
            .iter()
            .position(|l| l == x)
            .ok_or_else(|| Error::UnknownLabel(x.to_owned()))
    };
    let mut out = Vec::new();
    for u in units.iter().filter(|u| !u.is_empty()) {
        let dur = sample_durations(u, emitter)?;
        let mut frames = Vec::new();
        if hybrid {
            let sil = index(SILENCE)?;
            let mut segs = vec![(sil, 1)];
            for (x, d) in u.iter().zip(dur) {
                segs.push((index(x)?, d));
            }
            segs.push((sil, 1));
            for i in 1..segs.len() - 1 {
                let ctx = StateContext::new(segs[i - 1].0, segs[i].0, segs[i + 1].0);
                frames.extend(std::iter::repeat_n(ctx, segs[i].1));
            }
            frames.insert(0, StateContext::new(sil, sil, segs[1].0));
            frames.push(StateContext::new(segs[segs.len() - 2].0, sil, sil));
        } else {
            let blank = index(BLANK)?;
            for (x, d) in u.iter().zip(dur) {
                frames.push(StateContext::new(0, index(x)?, 0));
                frames.extend(std::iter::repeat_n(StateContext::new(0, blank, 0), d - 1));
            }
        }
        out.push(frames);
    }
    Ok(out)
}

struct Utterance {
    id: String,
    words: Vec<String>,
    emission: Emission,
}

struct LoadedLm {
    word: Option<NGramModel>,
    subword: Option<NGramModel>,
}

fn decode(
    model: &Model,
    lex: Option<&SearchLexicon>,
    lm: &NGramModel,
    emission: &Emission,
    cfg: &DecodeConfig,
) -> Result<Vec<String>> {
    let prior = model.prior.as_ref();
    let res = match (model.spec.kind, emission) {
        (ModelKind::FhTri, Emission::Factored(f)) => decode_time_sync(
            TimeSyncModel::FhTri {
                scores: f,
                prior: prior.unwrap(),
            },
            lex.unwrap(),
            lm,
            &model.trans,
            cfg,
        ),
        (ModelKind::FhDi, Emission::Factored(f)) => decode_time_sync(
            TimeSyncModel::FhDi {
                scores: f,
                prior: prior.unwrap(),
            },
            lex.unwrap(),
            lm,
            &model.trans,
            cfg,
        ),
        (ModelKind::Ctc, Emission::Posteriorgram(pg)) => decode_time_sync(
            TimeSyncModel::Ctc {
                pg,
                prior: prior.unwrap(),
            },
            lex.unwrap(),
            lm,
            &model.trans,
            cfg,
        ),
        (ModelKind::Transducer, Emission::Posteriorgram(pg)) => {
            let bias =
                (model.spec.bias > 0.0).then(|| (model.ilm.clone().unwrap(), model.spec.bias));
            let scorer = BiasedScorer::transducer(pg.clone(), bias)?;
            let vocab = match lex {
                Some(l) => TransducerVocab::Closed(l),
                None => TransducerVocab::Open,
            };
            let cfg = DecodeConfig {
                vocab_mode: if lex.is_some() {
                    VocabMode::Closed
                } else {
                    VocabMode::Open
                },
                ..cfg.clone()
            };
            decode_transducer(&scorer, model.ilm.as_ref(), lm, vocab, &cfg)
        }
        (ModelKind::Aed, Emission::Posteriorgram(pg)) => {
            let bias =
                (model.spec.bias > 0.0).then(|| (model.ilm.clone().unwrap(), model.spec.bias));
            let scorer = BiasedScorer::label_sync(pg.clone(), bias)?;
            let cfg = DecodeConfig {
                vocab_mode: VocabMode::Open,
                ..cfg.clone()
            };
            decode_label_sync(&scorer, model.ilm.as_ref(), lm, &cfg)
        }
        _ => unreachable!("emission matches the model kind"),
    };
    match res {
        Ok(r) => Ok(if lex.is_none() {
            tokens_to_words(&r.units)
        } else {
            r.words
        }),
        // no complete hypothesis: nothing recognized
        Err(Error::NoFinalHypothesis | Error::NoTerminatedHypothesis(_)) => Ok(Vec::new()),
        Err(e) => Err(e),
    }
}

/// Lexicon restricted to the words the LM knows.
fn search_lexicon(lex: &Lexicon, lm: &NGramModel) -> Result<SearchLexicon> {
    let entries: Vec<(String, Vec<_>)> = lex
        .entries()
        .iter()
        .filter(|e| lm.vocab().contains(&e.word))
        .flat_map(|e| e.prons.iter().map(|p| (e.word.clone(), p.clone())))
        .collect();
    if entries.is_empty() {
        return Err(invalid("no lexicon word is in the LM vocabulary"));
    }
    SearchLexicon::new(Lexicon::new(lex.inventory().clone(), entries)?)
}

fn score_set(
    model: &Model,
    lex: Option<&SearchLexicon>,
    lm: &NGramModel,
    utts: &[&Utterance],
    cfg: &DecodeConfig,
) -> Result<WerReport> {
    let errs = utts
        .par_iter()
        .map(|u| {
            let hyp = decode(model, lex, lm, &u.emission, cfg)?;
            Ok(UtteranceErrors {
                id: u.id.clone(),
                counts: error_counts(&u.words, &hyp),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WerReport::from_utterances(errs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub kind: ModelKind,
    /// Model family as printed in reports.
    pub display: String,
    pub unit: String,
    pub context: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultCell {
    pub model: String,
    pub lm: String,
    pub dataset: String,
    pub config: DecodeConfig,
    pub report: WerReport,
}

/// WER of every (model, LM, dataset) with the dev-selected configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub models: Vec<ModelInfo>,
    pub lms: Vec<String>,
    pub datasets: Vec<String>,
    pub cells: Vec<ResultCell>,
}

impl ExperimentResults {
    pub fn cell(&self, model: &str, lm: &str, dataset: &str) -> Option<&ResultCell> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.lm == lm && c.dataset == dataset)
    }

    /// Models as rows, datasets as columns, for one LM.
    pub fn wer_table(&self, lm: &str) -> Result<WerTable> {
        if !self.lms.iter().any(|l| l == lm) {
            return Err(invalid(format!("no results for LM {lm:?}")));
        }
        let rows = self
            .models
            .iter()
            .map(|m| WerRow {
                model: m.display.clone(),
                unit: m.unit.clone(),
                context: m.context.clone(),
                wers: self
                    .datasets
                    .iter()
                    .map(|d| self.cell(&m.name, lm, d).map(|c| c.report.wer()))
                    .collect(),
            })
            .collect();
        Ok(WerTable {
            datasets: self.datasets.clone(),
            rows,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Runs an experiment. The experiment config is validated and every artifact loaded
/// before any decoding starts.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResults> {
    spec.validate()?;
    let models = spec
        .models
        .iter()
        .map(|m| load_model(m, &spec.emitter))
        .collect::<Result<Vec<_>>>()?;
    let lms = spec
        .lms
        .iter()
        .map(|l| {
            Ok(LoadedLm {
                word: l
                    .word
                    .as_ref()
                    .map(NGramModel::read_arpa_file)
                    .transpose()?,
                subword: l
                    .subword
                    .as_ref()
                    .map(NGramModel::read_arpa_file)
                    .transpose()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let refs = spec
        .datasets
        .iter()
        .map(|d| read_references(&d.text))
        .collect::<Result<Vec<_>>>()?;
    for (d, r) in spec.datasets.iter().zip(&refs) {
        for m in &models {
            for (id, words) in r {
                m.units(words)
                    .map_err(|e| invalid(format!("dataset {:?} utterance {id}: {e}", d.name)))?;
            }
        }
    }
    let domains: BTreeMap<&str, Vec<usize>> =
        spec.datasets
            .iter()
            .enumerate()
            .fold(BTreeMap::new(), |mut m, (i, d)| {
                m.entry(d.domain.as_str()).or_default().push(i);
                m
            });

    let mut cells = Vec::new();
    for model in &models {
        // one synthesized copy of each dataset per seed, shared by all LMs
        let data: Vec<Vec<Utterance>> = refs
            .iter()
            .map(|r| {
                let mut utts = Vec::new();
                for &seed in &spec.seeds {
                    let cfg = EmitterConfig {
                        seed,
                        ..spec.emitter.clone()
                    };
                    let part = r
                        .par_iter()
                        .enumerate()
                        .map(|(i, (id, words))| {
                            Ok(Utterance {
                                id: format!("{seed}/{id}"),
                                words: words.clone(),
                                emission: model.synth(words, &cfg, i as u64)?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    utts.extend(part);
                }
                Ok(utts)
            })
            .collect::<Result<_>>()?;
        let grid = spec.grid_for(model.spec.kind);
        for (lm_spec, lm) in spec.lms.iter().zip(&lms) {
            let closed = model.closed();
            let lm_model = if closed {
                lm.word.as_ref()
            } else {
                lm.subword.as_ref()
            }
            .unwrap();
            let lex = match (&model.lexicon, closed) {
                (Some(l), true) => Some(search_lexicon(l, lm_model)?),
                _ => None,
            };
            for datasets in domains.values() {
                let dev: Vec<&Utterance> = datasets
                    .iter()
                    .filter(|&&i| spec.datasets[i].split == Split::Dev)
                    .flat_map(|&i| &data[i])
                    .collect();
                let dev_results = grid
                    .iter()
                    .map(|cfg| {
                        Ok((
                            cfg.clone(),
                            score_set(model, lex.as_ref(), lm_model, &dev, cfg)?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let best = select_config(&dev_results).expect("grid is non-empty");
                let cfg = &dev_results[best].0;
                for &i in datasets {
                    let utts: Vec<&Utterance> = data[i].iter().collect();
                    let report = score_set(model, lex.as_ref(), lm_model, &utts, cfg)?;
                    cells.push(ResultCell {
                        model: model.spec.name.clone(),
                        lm: lm_spec.name.clone(),
                        dataset: spec.datasets[i].name.clone(),
                        config: cfg.clone(),
                        report,
                    });
                }
            }
        }
    }
    let order = |c: &ResultCell| {
        (
            spec.models.iter().position(|m| m.name == c.model),
            spec.lms.iter().position(|m| m.name == c.lm),
            spec.datasets.iter().position(|m| m.name == c.dataset),
        )
    };
    cells.sort_by_key(order);
    Ok(ExperimentResults {
        models: models
            .iter()
            .map(|m| ModelInfo {
                name: m.spec.name.clone(),
                kind: m.spec.kind,
                display: m.spec.kind.display().into(),
                unit: match m.spec.unit {
                    Unit::Phon => "Phon".into(),
                    Unit::Bpe => "BPE".into(),
                },
                context: m.ctx_label(),
            })
            .collect(),
        lms: spec.lms.iter().map(|l| l.name.clone()).collect(),
        datasets: spec.datasets.iter().map(|d| d.name.clone()).collect(),
        cells,
    })
}

/// One model of an experiment paired with one of its LMs.
pub struct Recognizer {
    model: Model,
    lm: NGramModel,
    lexicon: Option<SearchLexicon>,
}

impl Recognizer {
    pub fn load(spec: &ExperimentSpec, model: &str, lm: &str) -> Result<Self> {
        spec.validate()?;
        let m = spec
            .models
            .iter()
            .find(|m| m.name == model)
            .ok_or_else(|| invalid(format!("no model named {model:?}")))?;
        let l = spec
            .lms
            .iter()
            .find(|l| l.name == lm)
            .ok_or_else(|| invalid(format!("no LM named {lm:?}")))?;
        let model = load_model(m, &spec.emitter)?;
        let closed = model.closed();
        let path = if closed {
            l.word.as_ref()
        } else {
            l.subword.as_ref()
        }
        .ok_or_else(|| {
            invalid(format!(
                "LM {lm:?} has no {} model",
                if closed { "word" } else { "subword" }
            ))
        })?;
        let lm = NGramModel::read_arpa_file(path)?;
        let lexicon = match (&model.lexicon, closed) {
            (Some(x), true) => Some(search_lexicon(x, &lm)?),
            _ => None,
        };
        Ok(Recognizer { model, lm, lexicon })
    }

    pub fn synth(
        &self,
        words: &[String],
        emitter: &EmitterConfig,
        stream: u64,
    ) -> Result<Emission> {
        self.model.synth(words, emitter, stream)
    }

    /// Best word sequence; empty when no hypothesis completes.
    pub fn recognize(&self, emission: &Emission, cfg: &DecodeConfig) -> Result<Vec<String>> {
        decode(&self.model, self.lexicon.as_ref(), &self.lm, emission, cfg)
    }

    /// Synthesizes `refs` with `emitter` (utterance `i` on stream `i`) and
    /// scores the decoded output.
    pub fn wer(
        &self,
        refs: &[(String, Vec<String>)],
        emitter: &EmitterConfig,
        cfg: &DecodeConfig,
    ) -> Result<WerReport> {
        let errs = refs
            .par_iter()
            .enumerate()
            .map(|(i, (id, words))| {
                let emission = self.synth(words, emitter, i as u64)?;
                let hyp = self.recognize(&emission, cfg)?;
                Ok(UtteranceErrors {
                    id: id.clone(),
                    counts: error_counts(words, &hyp),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(WerReport::from_utterances(errs))
    }

    /// Temperature whose mean WER over `cal.seeds` hits `cal.target`.
    pub fn calibrate(
        &self,
        refs: &[(String, Vec<String>)],
        emitter: &EmitterConfig,
        cfg: &DecodeConfig,
        cal: &CalibrationConfig,
    ) -> Result<Calibration> {
        calibrate_tau(
            |tau, seed| {
                let e = EmitterConfig {
                    temperature: tau,
                    seed,
                    ..emitter.clone()
                };
                Ok(self.wer(refs, &e, cfg)?.wer())
            },
            cal,
        )
    }
}

/// Synthesizes one dataset of `spec` for one model; utterance `i` uses
/// noise stream `i`.
pub fn synth_dataset(
    spec: &ExperimentSpec,
    model: &str,
    dataset: &str,
    emitter: &EmitterConfig,
) -> Result<SynthSet> {
    spec.validate()?;
    emitter.validate()?;
    let m = spec
        .models
        .iter()
        .find(|m| m.name == model)
        .ok_or_else(|| invalid(format!("no model named {model:?}")))?;
    let d = spec
        .datasets
        .iter()
        .find(|d| d.name == dataset)
        .ok_or_else(|| invalid(format!("no dataset named {dataset:?}")))?;
    let model = load_model(m, &spec.emitter)?;
    let utterances = read_references(&d.text)?
        .par_iter()
        .enumerate()
        .map(|(i, (id, words))| {
            Ok(SynthUtterance {
                id: id.clone(),
                words: words.clone(),
                emission: model.synth(words, emitter, i as u64)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthSet {
        seed: emitter.seed,
        temperature: emitter.temperature,
        utterances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::wer::ErrorCounts;

    fn report(errors: usize) -> WerReport {
        WerReport {
            totals: ErrorCounts {
                substitutions: errors,
                ref_words: 10,
                ..ErrorCounts::default()
            },
            utterances: vec![],
        }
    }

    fn cfg(l: f64, a: f64, b: f64, d: f64) -> DecodeConfig {
        DecodeConfig {
            lm_scale: l,
            prior_scale: a,
            transition_scale: b,
            length_norm: d,
            ..DecodeConfig::default()
        }
    }

    #[test]
    fn selection_prefers_lower_wer_then_smaller_exponents() {
        assert_eq!(select_config(&[]), None);
        let dev = vec![
            (cfg(1.0, 0.0, 1.0, 0.0), report(3)),
            (cfg(0.8, 0.4, 1.0, 0.0), report(2)),
            (cfg(0.8, 0.2, 1.0, 1.0), report(2)),
            (cfg(0.8, 0.2, 1.0, 0.5), report(2)),
            (cfg(1.2, 0.0, 1.0, 0.0), report(2)),
        ];
        assert_eq!(select_config(&dev), Some(3));
        let dev = vec![
            (cfg(0.4, 0.0, 1.0, 0.0), report(5)),
            (cfg(1.2, 0.6, 1.0, 1.0), report(4)),
        ];
        assert_eq!(select_config(&dev), Some(1));
    }

    fn minimal_json(dir: &Path) -> String {
        for f in ["lex.txt", "train.txt", "w.arpa", "dev.txt"] {
            std::fs::write(dir.join(f), "").unwrap();
        }
        r#"{
            "schema": "seqshift-exp/1",
            "emitter": {"temperature": 1.0, "gain": 5.0, "durations": {"fixed": 2}, "seed": 0},
            "models": [{"name": "m", "kind": "ctc", "unit": "phon", "lexicon": "lex.txt", "train_text": "train.txt"}],
            "lms": [{"name": "l", "word": "w.arpa"}],
            "datasets": [{"name": "d", "domain": "x", "split": "dev", "text": "dev.txt"}]
        }"#
        .to_owned()
    }

    fn spec_in(dir: &Path, json: &str) -> ExperimentSpec {
        let mut s = ExperimentSpec::from_json(json).unwrap();
        s.resolve(dir);
        s
    }

    #[test]
    fn json_defaults_and_grid() {
        let dir = tempfile::tempdir().unwrap();
        let s = spec_in(dir.path(), &minimal_json(dir.path()));
        s.validate().unwrap();
        assert_eq!(s.seeds, vec![0]);
        assert_eq!(s.search.beam_size, 16);
        assert_eq!(s.models[0].loop_prob, 0.5);
        // beta only varies for FH, delta only for AED
        assert_eq!(s.grid_for(ModelKind::Ctc).len(), 5 * 4);
        assert_eq!(s.grid_for(ModelKind::FhTri).len(), 5 * 4);
        assert_eq!(s.grid_for(ModelKind::Aed).len(), 5 * 4 * 3);
        assert!(s
            .grid_for(ModelKind::Ctc)
            .iter()
            .all(|c| c.length_norm == 0.0 && c.beam_size == 16));
        assert!(ExperimentSpec::from_json(
            &minimal_json(dir.path()).replace("\"seed\": 0}", "\"seed\": 0, \"extra\": 1}")
        )
        .is_err());
    }

    #[test]
    fn validation_failures() {
        let dir = tempfile::tempdir().unwrap();
        let base = minimal_json(dir.path());
        let bad = |from: &str, to: &str| {
            assert!(base.contains(from), "{from}");
            let err = match spec_in(dir.path(), &base.replace(from, to)).validate() {
                Err(e) => e,
                Ok(()) => panic!("{to} accepted"),
            };
            assert!(err.is_validation(), "{err}");
            err.to_string()
        };
        bad("seqshift-exp/1", "seqshift-exp/0");
        bad("\"unit\": \"phon\"", "\"unit\": \"bpe\"");
        bad("\"split\": \"dev\"", "\"split\": \"test\"");
        bad("\"gain\": 5.0", "\"gain\": -1.0");
        assert!(bad("dev.txt", "nowhere.txt").contains("does not exist"));
        assert!(bad("\"kind\": \"ctc\"", "\"kind\": \"aed\"").contains("AED"));
        let dup = base.replace(
            r#"[{"name": "l", "word": "w.arpa"}]"#,
            r#"[{"name": "l", "word": "w.arpa"}, {"name": "l", "word": "w.arpa"}]"#,
        );
        assert!(spec_in(dir.path(), &dup)
            .validate()
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
    }
}
