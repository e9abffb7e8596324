//! Acoustic evidence and the per-frame or per-step scores of the four
//! decision rules.

mod factored;
mod ilm;
mod posteriorgram;
mod prior;
mod scorer;

pub use factored::FactoredScores;
pub use ilm::{estimate_ilm, IlmModel, IlmOrder, ILM_FLOOR};
pub use posteriorgram::{Posteriorgram, ROW_TOLERANCE};
pub use prior::{
    estimate_context_prior, floor_and_renormalize, ContextOrder, ContextPrior, StateContext,
    PRIOR_FLOOR,
};
pub use scorer::{ctc_score, fh_score, transducer_score, BiasedScorer, StepScorer, BLANK};
pub(crate) use scorer::{fh_score_unchecked, to_model_index};
