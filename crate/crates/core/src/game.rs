//! The sender/receiver 2×2 game: payoff construction and pure-strategy weak
//! Nash equilibrium selection.
//!
//! Rows are the sender's actions (forward, hold), columns the receiver's
//! (feedback, no feedback). The hold row is filled with each player's
//! popularity decay even though feedback to an unsent message is not a real
//! option; any hold equilibrium is reported as "hold, no feedback".

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{self, StateDelta};
use crate::evaluation::{self, EvalError, OpinionAssessment};
use crate::model::{ActorState, GlobalParams, Personality};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no pure equilibrium found for {0:?}")]
    NoEquilibrium(PayoffMatrix),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SenderAction {
    Forward,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ReceiverAction {
    Feedback,
    NoFeedback,
}

/// A cell of the bimatrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Cell {
    pub sender: SenderAction,
    pub receiver: ReceiverAction,
}

impl Cell {
    pub const FORWARD_FEEDBACK: Cell = Cell::new(SenderAction::Forward, ReceiverAction::Feedback);
    pub const FORWARD_SILENT: Cell = Cell::new(SenderAction::Forward, ReceiverAction::NoFeedback);
    pub const HOLD_FEEDBACK: Cell = Cell::new(SenderAction::Hold, ReceiverAction::Feedback);
    pub const HOLD_SILENT: Cell = Cell::new(SenderAction::Hold, ReceiverAction::NoFeedback);

    pub const ALL: [Cell; 4] = [
        Cell::FORWARD_FEEDBACK,
        Cell::FORWARD_SILENT,
        Cell::HOLD_FEEDBACK,
        Cell::HOLD_SILENT,
    ];

    pub const fn new(sender: SenderAction, receiver: ReceiverAction) -> Self {
        Cell { sender, receiver }
    }

    fn flip_sender(self) -> Cell {
        let sender = match self.sender {
            SenderAction::Forward => SenderAction::Hold,
            SenderAction::Hold => SenderAction::Forward,
        };
        Cell { sender, ..self }
    }

    fn flip_receiver(self) -> Cell {
        let receiver = match self.receiver {
            ReceiverAction::Feedback => ReceiverAction::NoFeedback,
            ReceiverAction::NoFeedback => ReceiverAction::Feedback,
        };
        Cell { receiver, ..self }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sender {
            SenderAction::Forward => "S0",
            SenderAction::Hold => "S1",
        };
        let r = match self.receiver {
            ReceiverAction::Feedback => "R0",
            ReceiverAction::NoFeedback => "R1",
        };
        write!(f, "({s},{r})")
    }
}

/// Tie-break order: prefer transmission, then feedback.
pub const PREFERENCE: [Cell; 4] = Cell::ALL;

/// Per-player changes that feed the payoff matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RawDeltas {
    pub g: Option<OpinionAssessment>,
    /// `dk`/`dc`/`dp` are ΔK_S, ΔC_S, ΔP_S; counts are the feedback relabelling.
    pub sender: StateDelta,
    /// `dk`/`dc` are ΔK_R, ΔC_R; `dp` is the feedback popularity premium.
    pub receiver: StateDelta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffMatrix {
    pub u_s_forward_feedback: f64,
    pub u_r_forward_feedback: f64,
    pub u_s_forward_nofeedback: f64,
    pub u_r_forward_nofeedback: f64,
    pub u_s_hold: f64,
    pub u_r_hold: f64,
    pub deltas: RawDeltas,
}

impl PayoffMatrix {
    /// Combines both players' deltas with their personalities.
    pub fn from_deltas(
        deltas: RawDeltas,
        sender: &Personality,
        receiver: &Personality,
        decay: f64,
    ) -> Self {
        let s = &deltas.sender;
        let r = &deltas.receiver;
        PayoffMatrix {
            u_s_forward_feedback: sender.utility(s.dk, s.dc, s.dp),
            u_r_forward_feedback: receiver.utility(r.dk, r.dc, r.dp),
            u_s_forward_nofeedback: sender.pi * s.dp,
            u_r_forward_nofeedback: receiver.kappa * r.dk - receiver.pi * decay,
            u_s_hold: -sender.pi * decay,
            u_r_hold: -receiver.pi * decay,
            deltas,
        }
    }

    /// Bare payoffs, for analysis and tests.
    pub fn from_payoffs(s00: f64, r00: f64, s01: f64, r01: f64, s_hold: f64, r_hold: f64) -> Self {
        PayoffMatrix {
            u_s_forward_feedback: s00,
            u_r_forward_feedback: r00,
            u_s_forward_nofeedback: s01,
            u_r_forward_nofeedback: r01,
            u_s_hold: s_hold,
            u_r_hold: r_hold,
            deltas: RawDeltas::default(),
        }
    }

    /// (sender, receiver) payoff in a cell.
    pub fn payoff(&self, cell: Cell) -> (f64, f64) {
        match cell {
            Cell {
                sender: SenderAction::Forward,
                receiver: ReceiverAction::Feedback,
            } => (self.u_s_forward_feedback, self.u_r_forward_feedback),
            Cell {
                sender: SenderAction::Forward,
                receiver: ReceiverAction::NoFeedback,
            } => (self.u_s_forward_nofeedback, self.u_r_forward_nofeedback),
            Cell {
                sender: SenderAction::Hold,
                ..
            } => (self.u_s_hold, self.u_r_hold),
        }
    }

    pub fn shift_sender(&self, by: f64) -> Self {
        PayoffMatrix {
            u_s_forward_feedback: self.u_s_forward_feedback + by,
            u_s_forward_nofeedback: self.u_s_forward_nofeedback + by,
            u_s_hold: self.u_s_hold + by,
            ..*self
        }
    }

    pub fn shift_receiver(&self, by: f64) -> Self {
        PayoffMatrix {
            u_r_forward_feedback: self.u_r_forward_feedback + by,
            u_r_forward_nofeedback: self.u_r_forward_nofeedback + by,
            u_r_hold: self.u_r_hold + by,
            ..*self
        }
    }
}

/// Computes every delta of a forward event and assembles the game.
pub fn build_payoff_matrix(
    sender: (&ActorState, &Personality),
    receiver: (&ActorState, &Personality),
    params: &GlobalParams,
) -> Result<PayoffMatrix, GameError> {
    let (s_state, s_pers) = sender;
    let (r_state, r_pers) = receiver;
    if !(s_state.f_count > 0.0) {
        return Err(EvalError::EmptySender.into());
    }
    let s = s_state.normalize(params);
    let r = r_state.normalize(params);
    let lambda = params.lambda;

    let g = evaluation::assess_opinion(r.k, s.c, s.labels, params.phi)?;
    let sender_delta = StateDelta {
        dk: dynamics::sender_knowledge_delta(r.c, &s.labels, &g, lambda),
        dc: dynamics::sender_reputation_delta(r.c, &s.labels, &g),
        dp: dynamics::sender_popularity_premium(&r, &g),
        counts: dynamics::sender_count_deltas(r.c, &s.labels, &g),
    };
    let receiver_delta = StateDelta {
        dk: dynamics::receiver_knowledge_delta(&r, &g, lambda),
        dc: dynamics::receiver_reputation_delta(r.k, s.c, &s.labels, params.phi),
        dp: 1.0,
        counts: dynamics::receiver_count_deltas(&r, &g),
    };
    let deltas = RawDeltas {
        g: Some(g),
        sender: sender_delta,
        receiver: receiver_delta,
    };
    Ok(PayoffMatrix::from_deltas(deltas, s_pers, r_pers, params.delta))
}

/// All weak pure equilibria, in [`Cell::ALL`] order.
pub fn enumerate_pure_equilibria(m: &PayoffMatrix) -> Vec<Cell> {
    Cell::ALL
        .into_iter()
        .filter(|&cell| {
            let (us, ur) = m.payoff(cell);
            let (us_dev, _) = m.payoff(cell.flip_sender());
            let (_, ur_dev) = m.payoff(cell.flip_receiver());
            us >= us_dev && ur >= ur_dev
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumProfile {
    pub sender_action: SenderAction,
    pub receiver_action: ReceiverAction,
    pub equilibrium_set: Vec<Cell>,
    /// True when more than one equilibrium existed.
    pub selected_by_tiebreak: bool,
}

impl EquilibriumProfile {
    /// The profile played when the sender has nothing to send.
    pub fn hold() -> Self {
        EquilibriumProfile {
            sender_action: SenderAction::Hold,
            receiver_action: ReceiverAction::NoFeedback,
            equilibrium_set: Vec::new(),
            selected_by_tiebreak: false,
        }
    }

    pub fn cell(&self) -> Cell {
        Cell::new(self.sender_action, self.receiver_action)
    }
}

pub fn solve_equilibrium(m: &PayoffMatrix) -> Result<EquilibriumProfile, GameError> {
    solve_with_order(m, &PREFERENCE)
}

/// Picks the first equilibrium in `order`.
pub fn solve_with_order(m: &PayoffMatrix, order: &[Cell; 4]) -> Result<EquilibriumProfile, GameError> {
    let set = enumerate_pure_equilibria(m);
    let pick = order
        .iter()
        .copied()
        .find(|c| set.contains(c))
        .ok_or(GameError::NoEquilibrium(*m))?;
    let receiver_action = match pick.sender {
        SenderAction::Forward => pick.receiver,
        SenderAction::Hold => ReceiverAction::NoFeedback,
    };
    Ok(EquilibriumProfile {
        sender_action: pick.sender,
        receiver_action,
        selected_by_tiebreak: set.len() > 1,
        equilibrium_set: set,
    })
}
