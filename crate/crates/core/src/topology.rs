//! Label topologies and exact alignment scoring over a posteriorgram.
//!
//! Three topologies are supported. `Hmm` uses one state per label with loop
//! and forward transitions. `Ctc` interleaves optional blanks and requires a
//! blank between repeated labels. `Transducer` is the strictly monotonic
//! variant where every frame emits either the blank or the next label.
//! Transducer states are laid out like CTC states (even indices are blank
//! states, `2j + 1` emits label `j`) but label states have no self-loop.

use crate::acoustic::Posteriorgram;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    Hmm,
    Ctc,
    Transducer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransitionKind {
    Loop,
    Forward,
    BlankEmit,
    LabelEmit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub kind: TransitionKind,
}

/// HMM loop/forward probabilities (natural log) and their exponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionModel {
    pub loop_logprob: f64,
    pub forward_logprob: f64,
    pub beta: f64,
}

impl TransitionModel {
    pub fn new(loop_prob: f64, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&loop_prob) || !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "transition model needs loop probability in [0, 1] and beta >= 0, got {loop_prob} and {beta}"
            )));
        }
        Ok(TransitionModel {
            loop_logprob: loop_prob.ln(),
            forward_logprob: (1.0 - loop_prob).ln(),
            beta,
        })
    }

    pub fn from_log(loop_logprob: f64, forward_logprob: f64, beta: f64) -> Result<Self> {
        let mass = loop_logprob.exp() + forward_logprob.exp();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "loop and forward mass is {mass}, not 1"
            )));
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidArgument(format!("beta {beta}")));
        }
        Ok(TransitionModel {
            loop_logprob,
            forward_logprob,
            beta,
        })
    }

    /// Scaled loop score; zero when `beta` is zero, even for a zero loop
    /// probability.
    #[inline]
    pub fn loop_score(&self) -> f64 {
        scaled(self.beta, self.loop_logprob)
    }

    #[inline]
    pub fn forward_score(&self) -> f64 {
        scaled(self.beta, self.forward_logprob)
    }
}

impl Default for TransitionModel {
    fn default() -> Self {
        TransitionModel::new(0.5, 1.0).unwrap()
    }
}

#[inline]
fn scaled(beta: f64, lp: f64) -> f64 {
    if beta == 0.0 {
        0.0
    } else {
        beta * lp
    }
}

/// Alignment automaton over emitting states.
#[derive(Clone, Debug)]
pub struct StateGraph {
    topology: Topology,
    labels: Vec<usize>,
    transitions: Vec<Transition>,
    preds: Vec<Vec<(usize, TransitionKind)>>,
    initial: Vec<usize>,
    finals: Vec<usize>,
}

impl StateGraph {
    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    /// Emission label of `state`, as a posteriorgram column.
    pub fn label(&self, state: usize) -> usize {
        self.labels[state]
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn finals(&self) -> &[usize] {
        &self.finals
    }

    /// Predecessors of `state`: the self-loop first (if any), then by index.
    pub fn predecessors(&self, state: usize) -> &[(usize, TransitionKind)] {
        &self.preds[state]
    }

    fn weight(&self, kind: TransitionKind, trans: &TransitionModel) -> f64 {
        match (self.topology, kind) {
            (Topology::Hmm, TransitionKind::Loop) => trans.loop_score(),
            (Topology::Hmm, TransitionKind::Forward) => trans.forward_score(),
            _ => 0.0,
        }
    }

    fn exit_weight(&self, trans: &TransitionModel) -> f64 {
        match self.topology {
            Topology::Hmm => trans.forward_score(),
            _ => 0.0,
        }
    }
}

/// Builds the alignment graph of `labels` (posteriorgram columns). CTC and
/// transducer graphs need the blank column.
pub fn expand_labels(
    topology: Topology,
    labels: &[usize],
    blank: Option<usize>,
) -> Result<StateGraph> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("empty label sequence".into()));
    }
    let n = labels.len();
    let mut states = Vec::new();
    let mut transitions = Vec::new();
    let mut add = |from, to, kind| transitions.push(Transition { from, to, kind });
    let (initial, finals) = match topology {
        Topology::Hmm => {
            states.extend_from_slice(labels);
            for i in 0..n {
                add(i, i, TransitionKind::Loop);
                if i + 1 < n {
                    add(i, i + 1, TransitionKind::Forward);
                }
            }
            (vec![0], vec![n - 1])
        }
        Topology::Ctc | Topology::Transducer => {
            let b = blank.ok_or_else(|| Error::InvalidArgument("blank label required".into()))?;
            if labels.contains(&b) {
                return Err(Error::InvalidArgument(
                    "label sequence contains the blank".into(),
                ));
            }
            for &l in labels {
                states.push(b);
                states.push(l);
            }
            states.push(b);
            let ctc = topology == Topology::Ctc;
            for s in 0..states.len() {
                let is_blank = s % 2 == 0;
                if is_blank || ctc {
                    let kind = if is_blank {
                        TransitionKind::BlankEmit
                    } else {
                        TransitionKind::LabelEmit
                    };
                    add(s, s, kind);
                }
                if s + 1 < states.len() {
                    let kind = if is_blank {
                        TransitionKind::LabelEmit
                    } else {
                        TransitionKind::BlankEmit
                    };
                    add(s, s + 1, kind);
                }
                if !is_blank && s + 2 < states.len() {
                    let j = s / 2;
                    if !ctc || labels[j] != labels[j + 1] {
                        add(s, s + 2, TransitionKind::LabelEmit);
                    }
                }
            }
            let last = states.len() - 1;
            (vec![0, 1], vec![last - 1, last])
        }
    };
    let mut preds = vec![Vec::new(); states.len()];
    for t in &transitions {
        preds[t.to].push((t.from, t.kind));
    }
    for (s, p) in preds.iter_mut().enumerate() {
        p.sort_by_key(|&(from, _)| (from != s, from));
    }
    Ok(StateGraph {
        topology,
        labels: states,
        transitions,
        preds,
        initial,
        finals,
    })
}

/// Total alignment probability. `valid` is false when no path fits the
/// frame count, in which case `log_prob` is negative infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardScore {
    pub log_prob: f64,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub log_prob: f64,
    pub valid: bool,
    /// State per frame; empty when no path exists.
    pub states: Vec<usize>,
    /// Emitted posteriorgram column per frame.
    pub labels: Vec<usize>,
}

#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn check_graph(graph: &StateGraph, pg: &Posteriorgram) -> Result<()> {
    if graph.labels.iter().any(|&l| l >= pg.num_labels()) {
        return Err(Error::UnknownLabel(
            "graph label outside the posteriorgram".into(),
        ));
    }
    Ok(())
}

/// Sum over all alignment paths, computed in log space.
pub fn forward_score(
    graph: &StateGraph,
    pg: &Posteriorgram,
    trans: &TransitionModel,
) -> Result<ForwardScore> {
    check_graph(graph, pg)?;
    let s_count = graph.num_states();
    let neg = f64::NEG_INFINITY;
    let mut alpha = vec![neg; s_count];
    for &s in &graph.initial {
        alpha[s] = pg.log_prob(0, graph.labels[s]);
    }
    let mut next = vec![neg; s_count];
    for t in 1..pg.num_frames() {
        for s in 0..s_count {
            let mut acc = neg;
            for &(p, kind) in &graph.preds[s] {
                if alpha[p] > neg {
                    acc = log_add(acc, alpha[p] + graph.weight(kind, trans));
                }
            }
            next[s] = if acc > neg {
                acc + pg.log_prob(t, graph.labels[s])
            } else {
                neg
            };
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    let exit = graph.exit_weight(trans);
    let total = graph.finals.iter().fold(neg, |acc, &s| {
        if alpha[s] > neg {
            log_add(acc, alpha[s] + exit)
        } else {
            acc
        }
    });
    Ok(ForwardScore {
        log_prob: total,
        valid: total > neg,
    })
}

/// Best single alignment path. Ties prefer staying in the same state, then
/// the lower-indexed predecessor, then the lower-indexed final state.
pub fn viterbi_align(
    graph: &StateGraph,
    pg: &Posteriorgram,
    trans: &TransitionModel,
) -> Result<Alignment> {
    check_graph(graph, pg)?;
    let s_count = graph.num_states();
    let frames = pg.num_frames();
    let neg = f64::NEG_INFINITY;
    let mut score = vec![neg; s_count];
    for &s in &graph.initial {
        score[s] = pg.log_prob(0, graph.labels[s]);
    }
    let mut back = vec![usize::MAX; s_count * frames];
    let mut next = vec![neg; s_count];
    for t in 1..frames {
        for s in 0..s_count {
            let mut best = neg;
            let mut arg = usize::MAX;
            for &(p, kind) in &graph.preds[s] {
                if score[p] == neg {
                    continue;
                }
                let v = score[p] + graph.weight(kind, trans);
                if v > best {
                    best = v;
                    arg = p;
                }
            }
            next[s] = if arg == usize::MAX {
                neg
            } else {
                best + pg.log_prob(t, graph.labels[s])
            };
            back[t * s_count + s] = arg;
        }
        std::mem::swap(&mut score, &mut next);
    }
    let exit = graph.exit_weight(trans);
    let mut best = neg;
    let mut end = usize::MAX;
    for &s in &graph.finals {
        if score[s] > neg && score[s] + exit > best {
            best = score[s] + exit;
            end = s;
        }
    }
    if end == usize::MAX {
        return Ok(Alignment {
            log_prob: neg,
            valid: false,
            states: Vec::new(),
            labels: Vec::new(),
        });
    }
    let mut states = vec![0; frames];
    let mut s = end;
    for t in (0..frames).rev() {
        states[t] = s;
        if t > 0 {
            s = back[t * s_count + s];
        }
    }
    let labels = states.iter().map(|&s| graph.labels[s]).collect();
    Ok(Alignment {
        log_prob: best,
        valid: true,
        states,
        labels,
    })
}
