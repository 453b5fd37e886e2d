//! Expected per-event changes of knowledge, reputation, popularity and the
//! underlying assertion counts for both sides of a transmission.
//!
//! Everything here is an expectation over the three arrival scenarios
//! (discard / relabel / new) and over the receiver's labelling choice, so the
//! count deltas are real-valued. The count-level deltas are constructed so
//! that their λ-weighted sum reproduces the knowledge deltas exactly.

use crate::evaluation::{agreement, OpinionAssessment};
use crate::model::{LabelFractions, NormalizedView};

/// Expected changes of `F, F⁺, F⁻, F°` for one event.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CountDeltas {
    pub d_f: f64,
    pub d_plus: f64,
    pub d_minus: f64,
    pub d_rumor: f64,
}

impl CountDeltas {
    /// Knowledge change implied by these count changes.
    #[inline]
    pub fn knowledge(&self, lambda: f64) -> f64 {
        self.d_plus + self.d_minus + lambda * self.d_rumor
    }
}

/// Knowledge, reputation and popularity changes of one player, together with
/// the count deltas that realise the knowledge change.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDelta {
    pub dk: f64,
    pub dc: f64,
    pub dp: f64,
    pub counts: CountDeltas,
}

/// `ΔK_R = λ(1 - f_R) + (1 - λ)(g⁺ + g⁻ - f_R(f_R⁺ + f_R⁻))`
pub fn receiver_knowledge_delta(receiver: &NormalizedView, g: &OpinionAssessment, lambda: f64) -> f64 {
    lambda * (1.0 - receiver.f) + receiver_knowledge_delta_known(receiver, g, lambda)
}

/// Receiver knowledge change when the assertion is known to be already held
/// by the receiver. Not used by the engine.
pub fn receiver_knowledge_delta_known(
    receiver: &NormalizedView,
    g: &OpinionAssessment,
    lambda: f64,
) -> f64 {
    (1.0 - lambda) * (g.decided() - receiver.f * receiver.labels.decided())
}

/// Sender knowledge change driven by feedback, weighted by the receiver's
/// normalized reputation.
pub fn sender_knowledge_delta(
    c_r: f64,
    sender: &LabelFractions,
    g: &OpinionAssessment,
    lambda: f64,
) -> f64 {
    c_r * (1.0 - lambda) * (g.decided() - sender.decided())
}

/// Popularity premium earned by the sender: one unless the receiver discards.
pub fn sender_popularity_premium(receiver: &NormalizedView, g: &OpinionAssessment) -> f64 {
    1.0 - receiver.f * agreement(&receiver.labels, g)
}

/// Expected reputation the oracle awards the receiver.
pub fn receiver_reputation_delta(k_r: f64, c_s: f64, sender: &LabelFractions, phi: f64) -> f64 {
    k_r + (1.0 - k_r) * (c_s * (2.0 * phi - 1.0) * (sender.plus - sender.minus))
}

/// Reputation change of the sender from the receiver's feedback.
pub fn sender_reputation_delta(c_r: f64, sender: &LabelFractions, g: &OpinionAssessment) -> f64 {
    let undecided = (1.0 - 2.0 * g.g_plus - 2.0 * g.g_minus) * (1.0 - 2.0 * sender.plus - 2.0 * sender.minus);
    let agreed = 2.0 * (sender.plus * g.g_plus + sender.minus * g.g_minus);
    c_r * (undecided - agreed)
}

/// Receiver count changes: new assertions arrive with probability `1 - f_R`
/// and every arrival ends up labelled according to `g`, replacing the prior
/// label in proportion `f_R`.
pub fn receiver_count_deltas(receiver: &NormalizedView, g: &OpinionAssessment) -> CountDeltas {
    let f = receiver.f;
    let l = &receiver.labels;
    CountDeltas {
        d_f: 1.0 - f,
        d_plus: g.g_plus - f * l.plus,
        d_minus: g.g_minus - f * l.minus,
        d_rumor: g.g_rumor - f * l.rumor,
    }
}

/// Sender relabelling toward the receiver's opinion, to the extent the
/// receiver is trusted. The sender's assertion count never changes.
pub fn sender_count_deltas(c_r: f64, sender: &LabelFractions, g: &OpinionAssessment) -> CountDeltas {
    CountDeltas {
        d_f: 0.0,
        d_plus: c_r * (g.g_plus - sender.plus),
        d_minus: c_r * (g.g_minus - sender.minus),
        d_rumor: c_r * (g.g_rumor - sender.rumor),
    }
}
