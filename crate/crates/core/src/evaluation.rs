//! How a receiver classifies an incoming assertion, and the probabilities of
//! the three things that can happen to it on arrival.

use thiserror::Error;

use crate::model::{LabelFractions, NormalizedView};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("sender knows no assertions and cannot transmit")]
    EmptySender,
}

/// Receiver's probabilities of labelling the assertion true, false, or rumor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpinionAssessment {
    pub g_plus: f64,
    pub g_minus: f64,
    pub g_rumor: f64,
}

impl OpinionAssessment {
    pub fn as_labels(&self) -> LabelFractions {
        LabelFractions::new(self.g_plus, self.g_minus, self.g_rumor)
    }

    pub fn decided(&self) -> f64 {
        self.g_plus + self.g_minus
    }
}

/// Weighted blend of the receiver's own judgement (weight `k_r`) and the
/// sender's opinion discounted by the sender's reputation (weight `1 - k_r`).
///
/// The rumor probability is taken as the complement of the other two; with
/// sender labels on the simplex this is the same quantity as
/// `(1 - k_r)(c_s f_s° + 1 - c_s)`, and it keeps the sum at one to rounding.
pub fn assess_opinion(
    k_r: f64,
    c_s: f64,
    sender: LabelFractions,
    phi: f64,
) -> Result<OpinionAssessment, EvalError> {
    if sender.is_empty() {
        return Err(EvalError::EmptySender);
    }
    let trust = 1.0 - k_r;
    let g_plus = k_r * phi + trust * (c_s * sender.plus);
    let g_minus = k_r * (1.0 - phi) + trust * (c_s * sender.minus);
    let g_rumor = (1.0 - g_plus - g_minus).max(0.0);
    Ok(OpinionAssessment {
        g_plus,
        g_minus,
        g_rumor,
    })
}

/// Probabilities that a transmitted assertion is discarded (already known,
/// same opinion), relabelled (already known, opinion changes) or new.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioProbabilities {
    pub p_discard: f64,
    pub p_relabel: f64,
    pub p_new: f64,
}

/// Probability that the receiver's fresh opinion matches its existing label.
#[inline]
pub(crate) fn agreement(labels: &LabelFractions, g: &OpinionAssessment) -> f64 {
    g.g_plus * labels.plus + g.g_minus * labels.minus + g.g_rumor * labels.rumor
}

pub fn scenario_probabilities(
    receiver: &NormalizedView,
    g: &OpinionAssessment,
) -> ScenarioProbabilities {
    let p_discard = receiver.f * agreement(&receiver.labels, g);
    ScenarioProbabilities {
        p_discard,
        p_relabel: receiver.f - p_discard,
        p_new: 1.0 - receiver.f,
    }
}
