//! Domain types shared by every other module: global parameters, actor
//! personalities, per-actor assertion/reputation/popularity state, and the
//! bounds policy that keeps that state inside `[0, N]`.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Tolerance for the simplex and count identities.
pub const IDENTITY_TOL: f64 = 1e-9;

/// System-wide constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalParams {
    /// Probability that an assertion is intrinsically true.
    pub phi: f64,
    /// Popularity decay per unit time for a player that does not participate.
    pub delta: f64,
    /// Weight with which rumors count toward self-perceived knowledge.
    pub lambda: f64,
    /// Total number of assertions in the network.
    pub big_n: u32,
}

impl Default for GlobalParams {
    fn default() -> Self {
        GlobalParams {
            phi: 0.8,
            delta: 0.1,
            lambda: 0.5,
            big_n: 2000,
        }
    }
}

impl GlobalParams {
    #[inline]
    pub fn n(&self) -> f64 {
        f64::from(self.big_n)
    }
}

/// Convex weights of knowledge, reputation and popularity in an actor's utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Personality {
    pub kappa: f64,
    pub sigma: f64,
    pub pi: f64,
}

impl Personality {
    /// Popularity seekers.
    pub const TROLL: Personality = Personality {
        kappa: 0.1,
        sigma: 0.1,
        pi: 0.8,
    };
    /// Reputation-minded actors.
    pub const EXPERT: Personality = Personality {
        kappa: 0.2,
        sigma: 0.7,
        pi: 0.1,
    };

    pub fn new(kappa: f64, sigma: f64, pi: f64) -> Self {
        Personality { kappa, sigma, pi }
    }

    /// Utility of a change in (knowledge, reputation, popularity).
    #[inline]
    pub fn utility(&self, dk: f64, dc: f64, dp: f64) -> f64 {
        self.kappa * dk + self.sigma * dc + self.pi * dp
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub value: f64,
    pub bound: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} violates {}", self.field, self.value, self.bound)
    }
}

/// Every violation found by a validation pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Violations(pub Vec<Violation>);

impl Violations {
    pub fn push(&mut self, field: impl Into<String>, value: f64, bound: impl Into<String>) {
        self.0.push(Violation {
            field: field.into(),
            value,
            bound: bound.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Violation> {
        self.0.iter()
    }

    pub fn extend(&mut self, other: Violations) {
        self.0.extend(other.0);
    }

    pub fn into_result(self) -> Result<(), Violations> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(self)
        }
    }
}

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Violations {}

fn check_unit(out: &mut Violations, field: &str, value: f64) {
    if value.is_nan() {
        out.push(field, value, "must be a number");
    } else if value < 0.0 {
        out.push(format!("{field} below 0"), value, "[0, 1]");
    } else if value > 1.0 {
        out.push(format!("{field} above 1"), value, "[0, 1]");
    }
}

/// Checks the global parameters and every personality, collecting all violations.
pub fn validate(params: &GlobalParams, personas: &[Personality]) -> Result<(), Violations> {
    let mut out = Violations::default();
    check_unit(&mut out, "phi", params.phi);
    check_unit(&mut out, "lambda", params.lambda);
    if !(params.delta >= 0.0) || !params.delta.is_finite() {
        out.push("delta below 0", params.delta, "delta >= 0");
    }
    if params.big_n < 2 {
        out.push("big_n", f64::from(params.big_n), "big_n >= 2");
    }
    for (i, p) in personas.iter().enumerate() {
        check_unit(&mut out, &format!("personas[{i}].kappa"), p.kappa);
        check_unit(&mut out, &format!("personas[{i}].sigma"), p.sigma);
        check_unit(&mut out, &format!("personas[{i}].pi"), p.pi);
        let sum = p.kappa + p.sigma + p.pi;
        if (sum - 1.0).abs() > IDENTITY_TOL {
            out.push(
                format!("personas[{i}] weights sum to {sum} ≠ 1"),
                sum,
                "kappa + sigma + pi = 1",
            );
        }
    }
    out.into_result()
}

/// Fractions of known assertions labelled true, false, or rumor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LabelFractions {
    pub plus: f64,
    pub minus: f64,
    pub rumor: f64,
}

impl LabelFractions {
    pub const fn new(plus: f64, minus: f64, rumor: f64) -> Self {
        LabelFractions { plus, minus, rumor }
    }

    pub fn sum(&self) -> f64 {
        self.plus + self.minus + self.rumor
    }

    /// Fraction the holder can classify (true or false).
    pub fn decided(&self) -> f64 {
        self.plus + self.minus
    }

    pub fn is_empty(&self) -> bool {
        self.plus == 0.0 && self.minus == 0.0 && self.rumor == 0.0
    }
}

/// Count-scale state of one actor. Counts are real-valued because the engine
/// applies expected per-event changes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActorState {
    pub f_count: f64,
    pub f_plus_count: f64,
    pub f_minus_count: f64,
    pub f_rumor_count: f64,
    pub reputation: f64,
    pub popularity: f64,
}

impl ActorState {
    /// Self-perceived knowledge `K = F⁺ + F⁻ + λF°`.
    #[inline]
    pub fn knowledge(&self, lambda: f64) -> f64 {
        self.f_plus_count + self.f_minus_count + lambda * self.f_rumor_count
    }

    pub fn labels(&self) -> LabelFractions {
        if self.f_count > 0.0 {
            LabelFractions {
                plus: self.f_plus_count / self.f_count,
                minus: self.f_minus_count / self.f_count,
                rumor: self.f_rumor_count / self.f_count,
            }
        } else {
            LabelFractions::default()
        }
    }

    pub fn normalize(&self, params: &GlobalParams) -> NormalizedView {
        normalize(self, params)
    }

    /// Lists the violated invariants of this state, empty when valid.
    pub fn check(&self, params: &GlobalParams) -> Violations {
        let n = params.n();
        let mut out = Violations::default();
        for (name, v) in [
            ("f_count", self.f_count),
            ("reputation", self.reputation),
            ("popularity", self.popularity),
        ] {
            if !(0.0..=n).contains(&v) {
                out.push(name, v, format!("[0, {n}]"));
            }
        }
        for (name, v) in [
            ("f_plus_count", self.f_plus_count),
            ("f_minus_count", self.f_minus_count),
            ("f_rumor_count", self.f_rumor_count),
        ] {
            if !(v >= 0.0) {
                out.push(name, v, ">= 0");
            }
        }
        let sum = self.f_plus_count + self.f_minus_count + self.f_rumor_count;
        if (sum - self.f_count).abs() > IDENTITY_TOL {
            out.push("label counts sum", sum, format!("= f_count ({})", self.f_count));
        }
        out
    }
}

/// Read-only normalized view of an [`ActorState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormalizedView {
    pub k: f64,
    pub c: f64,
    pub p: f64,
    pub f: f64,
    pub labels: LabelFractions,
}

impl NormalizedView {
    pub fn f_plus(&self) -> f64 {
        self.labels.plus
    }
    pub fn f_minus(&self) -> f64 {
        self.labels.minus
    }
    pub fn f_rumor(&self) -> f64 {
        self.labels.rumor
    }
}

pub fn normalize(state: &ActorState, params: &GlobalParams) -> NormalizedView {
    let n = params.n();
    NormalizedView {
        k: state.knowledge(params.lambda) / n,
        c: state.reputation / n,
        p: state.popularity / n,
        f: state.f_count / n,
        labels: state.labels(),
    }
}

/// Fields touched by [`clamp`], accumulated over a run.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ClampReport {
    pub clamped_fields: Vec<&'static str>,
    pub count: u64,
}

impl ClampReport {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    fn touch(&mut self, field: &'static str) {
        if !self.clamped_fields.contains(&field) {
            self.clamped_fields.push(field);
        }
        self.count += 1;
    }

    /// Folds another report into this one.
    pub fn absorb(&mut self, other: &ClampReport) {
        for f in &other.clamped_fields {
            if !self.clamped_fields.contains(f) {
                self.clamped_fields.push(f);
            }
        }
        self.count += other.count;
    }
}

fn clip(v: f64, hi: f64) -> f64 {
    if v.is_nan() || v < 0.0 {
        0.0
    } else if v > hi {
        hi
    } else {
        v
    }
}

/// Clips every field into `[0, N]` and rescales the label counts so they sum
/// to `f_count`. Relabel drift within [`IDENTITY_TOL`] is corrected silently;
/// anything larger is reported as a `"labels"` clamp.
pub fn clamp(state: &ActorState, params: &GlobalParams) -> (ActorState, ClampReport) {
    let n = params.n();
    let mut report = ClampReport::default();
    let mut out = *state;

    let mut clip_field = |v: &mut f64, name: &'static str, hi: f64| {
        let c = clip(*v, hi);
        if c != *v {
            *v = c;
            report.touch(name);
        }
    };
    clip_field(&mut out.f_count, "f_count", n);
    clip_field(&mut out.f_plus_count, "f_plus_count", n);
    clip_field(&mut out.f_minus_count, "f_minus_count", n);
    clip_field(&mut out.f_rumor_count, "f_rumor_count", n);
    clip_field(&mut out.reputation, "reputation", n);
    clip_field(&mut out.popularity, "popularity", n);

    let sum = out.f_plus_count + out.f_minus_count + out.f_rumor_count;
    if sum != out.f_count {
        if (sum - out.f_count).abs() > IDENTITY_TOL {
            report.touch("labels");
        }
        if sum > 0.0 {
            let scale = out.f_count / sum;
            out.f_plus_count *= scale;
            out.f_minus_count *= scale;
            out.f_rumor_count = (out.f_count - out.f_plus_count - out.f_minus_count).max(0.0);
        } else {
            // nothing to rescale from; treat the known assertions as rumors
            out.f_rumor_count = out.f_count;
        }
    }
    (out, report)
}
