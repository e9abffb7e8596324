use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, write_string, Error, Result};

/// Default lower bound on prior entries.
pub const PRIOR_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextOrder {
    Mono,
    Di,
    Tri,
}

impl ContextOrder {
    pub fn arity(self) -> u32 {
        match self {
            ContextOrder::Mono => 1,
            ContextOrder::Di => 2,
            ContextOrder::Tri => 3,
        }
    }
}

/// Phoneme-in-context label of one aligned frame, as label indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateContext {
    pub left: usize,
    pub center: usize,
    pub right: usize,
}

impl StateContext {
    pub fn new(left: usize, center: usize, right: usize) -> Self {
        StateContext {
            left,
            center,
            right,
        }
    }
}

/// Prior over context tuples: `c`, `(l, c)` or `(l, c, r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextPrior {
    order: ContextOrder,
    labels: Vec<String>,
    floor: f64,
    probs: Vec<f64>,
    #[serde(skip)]
    log_probs: Vec<f64>,
}

/// Raises entries below `floor` to `floor` and rescales the rest so the total
/// stays one. Repeats until no rescaled entry drops below the floor.
pub fn floor_and_renormalize(probs: &mut [f64], floor: f64) -> Result<()> {
    let n = probs.len();
    if !(floor > 0.0) || floor * n as f64 >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "floor {floor} is not usable for {n} entries"
        )));
    }
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) || probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidArgument(
            "prior needs finite non-negative mass".into(),
        ));
    }
    for p in probs.iter_mut() {
        *p /= total;
    }
    let mut fixed = vec![false; n];
    loop {
        let mut changed = false;
        for (p, f) in probs.iter_mut().zip(fixed.iter_mut()) {
            if !*f && *p < floor {
                *f = true;
                *p = floor;
                changed = true;
            }
        }
        let nfixed = fixed.iter().filter(|f| **f).count();
        let free_mass: f64 = probs
            .iter()
            .zip(&fixed)
            .filter(|(_, f)| !**f)
            .map(|(p, _)| p)
            .sum();
        let target = 1.0 - floor * nfixed as f64;
        for (p, f) in probs.iter_mut().zip(&fixed) {
            if !*f {
                *p *= target / free_mass;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(())
}

impl ContextPrior {
    pub fn from_probs(
        order: ContextOrder,
        labels: Vec<String>,
        mut probs: Vec<f64>,
        floor: f64,
    ) -> Result<Self> {
        let size = labels.len().pow(order.arity());
        if probs.len() != size {
            return Err(Error::InvalidArgument(format!(
                "prior over {} labels of order {:?} needs {size} entries, got {}",
                labels.len(),
                order,
                probs.len()
            )));
        }
        floor_and_renormalize(&mut probs, floor)?;
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Ok(ContextPrior {
            order,
            labels,
            floor,
            probs,
            log_probs,
        })
    }

    pub fn uniform(order: ContextOrder, labels: Vec<String>) -> Result<Self> {
        let size = labels.len().pow(order.arity());
        Self::from_probs(
            order,
            labels,
            vec![1.0; size],
            PRIOR_FLOOR.min(0.5 / size as f64),
        )
    }

    pub fn order(&self) -> ContextOrder {
        self.order
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn index(&self, ctx: StateContext) -> usize {
        let n = self.labels.len();
        match self.order {
            ContextOrder::Mono => ctx.center,
            ContextOrder::Di => ctx.left * n + ctx.center,
            ContextOrder::Tri => (ctx.left * n + ctx.center) * n + ctx.right,
        }
    }

    #[inline]
    pub fn log_prob(&self, ctx: StateContext) -> f64 {
        self.log_probs[self.index(ctx)]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("prior serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ContextPrior = serde_json::from_str(text)?;
        let p = Self::from_probs(raw.order, raw.labels, raw.probs, raw.floor)?;
        Ok(p)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read_to_string(path.as_ref())?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_string(path.as_ref(), &self.to_json())
    }
}

/// Relative frequency of context tuples over all aligned frames, floored at
/// `floor` and renormalized.
pub fn estimate_context_prior(
    alignments: &[Vec<StateContext>],
    order: ContextOrder,
    labels: Vec<String>,
    floor: f64,
) -> Result<ContextPrior> {
    if alignments.iter().all(|a| a.is_empty()) {
        return Err(Error::InvalidArgument(
            "no aligned frames for prior estimation".into(),
        ));
    }
    let n = labels.len();
    let mut counts = vec![0.0; n.pow(order.arity())];
    let shape = ContextPrior {
        order,
        labels: labels.clone(),
        floor,
        probs: Vec::new(),
        log_probs: Vec::new(),
    };
    for ctx in alignments.iter().flatten() {
        if ctx.left >= n || ctx.center >= n || ctx.right >= n {
            return Err(Error::UnknownLabel(format!(
                "context index out of range in {ctx:?}"
            )));
        }
        counts[shape.index(*ctx)] += 1.0;
    }
    ContextPrior::from_probs(order, labels, counts, floor)
}
