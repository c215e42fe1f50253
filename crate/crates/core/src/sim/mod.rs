//! Finite-horizon mechanism runs.
//!
//! A run draws every static reward up front, then lets a mechanism pick a
//! portfolio per round. Rounds that repeat verbatim (exploitation, failed
//! Bernoulli trials) are reported to the [`RoundSink`] as one segment with a
//! count, so a run costs time in the number of distinct decisions rather
//! than in the horizon.

mod engine;
mod welfare;

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gmdp::{Choice, Portfolio, StateSet, MAX_LATTICE_ARMS};
use crate::instance::Instance;

pub use engine::{bernoulli_trial_portfolio, bernoulli_trial_weights, IregbEngine, Step, Variant};
pub use welfare::{
    convergence_bound, estimate_welfare, inverse_delta_mean, replication_rng, run_iregb, run_iregb_prime,
    simulate, simulate_iregb, welfare_csv_header, welfare_csv_row, BoundTerms, Mechanism, Runner,
    WelfareEstimate, WelfareSink,
};

/// Certificates below this are MIR violations.
pub const CERTIFICATE_TOL: f64 = 1e-9;

/// One draw of every static reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub arms: Vec<f64>,
    pub default: f64,
}

impl Realization {
    pub fn draw<R: rand::Rng + ?Sized>(instance: &Instance, rng: &mut R) -> Self {
        let arms = instance.sample_rewards(rng);
        let default = instance.default_arm().sample(rng);
        Self { arms, default }
    }

    pub fn value(&self, c: Choice) -> f64 {
        match c {
            Choice::Default => self.default,
            Choice::Arm(i) => self.arms[i],
        }
    }
}

/// What the mechanism knows: realized values of every arm pulled so far.
#[derive(Debug, Clone)]
pub struct InformationSet {
    means: Vec<f64>,
    default_mean: f64,
    values: Vec<Option<f64>>,
    default: Option<f64>,
    unrevealed: StateSet,
    t: u64,
}

impl InformationSet {
    pub fn new(instance: &Instance) -> Result<Self> {
        let k = instance.k();
        if k > MAX_LATTICE_ARMS {
            return Err(Error::TooManyArms { k, limit: MAX_LATTICE_ARMS });
        }
        Ok(Self {
            means: instance.means().to_vec(),
            default_mean: instance.default_arm().mean(),
            values: vec![None; k],
            default: None,
            unrevealed: StateSet::full(k),
            t: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    /// Rounds played so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn value(&self, c: Choice) -> Option<f64> {
        match c {
            Choice::Default => self.default,
            Choice::Arm(i) => self.values[i],
        }
    }

    /// `E[X(c) | I]`: the realized value if known, else the prior mean.
    pub fn conditional_mean(&self, c: Choice) -> f64 {
        match c {
            Choice::Default => self.default.unwrap_or(self.default_mean),
            Choice::Arm(i) => self.values[i].unwrap_or(self.means[i]),
        }
    }

    /// Arms of `A` not pulled yet.
    pub fn unrevealed(&self) -> StateSet {
        self.unrevealed
    }

    /// Best revealed arm of `A` (lowest index among maximizers).
    pub fn best_revealed(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.values.iter().enumerate() {
            if let Some(x) = *v {
                if best.is_none_or(|(_, b)| x > b) {
                    best = Some((i, x));
                }
            }
        }
        best
    }

    /// `Σ p(a) E[X(a) | I] − E[X(a₀) | I]`.
    pub fn certificate(&self, p: &Portfolio) -> f64 {
        p.expectation(|c| self.conditional_mean(c)) - self.conditional_mean(Choice::Default)
    }

    /// Records `count` rounds of pulling `c`, whose realized value is `x`.
    /// Static rewards: a value, once revealed, never changes.
    pub fn observe(&mut self, c: Choice, x: f64, count: u64) {
        match c {
            Choice::Default => {
                debug_assert!(self.default.is_none_or(|v| v == x));
                self.default = Some(x);
            }
            Choice::Arm(i) => {
                debug_assert!(self.values[i].is_none_or(|v| v == x));
                self.values[i] = Some(x);
                self.unrevealed = self.unrevealed.without(i);
            }
        }
        self.t += count;
    }
}

/// Stage of the exploration mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    OgpExploration,
    BernoulliTrial,
    ExploitBest,
    ExploitDefault,
}

impl Phase {
    pub fn is_exploiting(self) -> bool {
        matches!(self, Phase::ExploitBest | Phase::ExploitDefault)
    }

    /// Position in the order phases are entered; exploitation stages share
    /// the last rank.
    pub fn rank(self) -> u8 {
        match self {
            Phase::OgpExploration => 0,
            Phase::BernoulliTrial => 1,
            Phase::ExploitBest | Phase::ExploitDefault => 2,
        }
    }
}

/// Who produced a recommendation in the incentive-compatible mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Default,
    Greedy,
    Iregb,
}

/// Extra per-round fields of the incentive-compatible mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BicTag {
    /// 0 for the opening rounds, then 1, 2, ... per phase of length `B`.
    pub phase_index: u64,
    pub explorer: bool,
    pub source: Source,
}

/// One round, or the first of `count` identical rounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Round {
    pub t: u64,
    pub portfolio: Portfolio,
    pub arm: Choice,
    pub reward: f64,
    pub phase: Phase,
    pub certificate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bic: Option<BicTag>,
}

pub trait RoundSink {
    /// Called once per run, before any round.
    fn start(&mut self, _realized: &Realization) {}

    /// `count` consecutive identical rounds starting at `round.t`.
    fn record(&mut self, round: &Round, count: u64);
}

/// Full record of one run, stored as segments of identical rounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimTrace {
    segments: Vec<(Round, u64)>,
    realized: Option<Realization>,
}

impl RoundSink for SimTrace {
    fn start(&mut self, realized: &Realization) {
        self.realized = Some(realized.clone());
    }

    fn record(&mut self, round: &Round, count: u64) {
        if count > 0 {
            self.segments.push((round.clone(), count));
        }
    }
}

impl SimTrace {
    pub fn segments(&self) -> &[(Round, u64)] {
        &self.segments
    }

    pub fn realized(&self) -> Option<&Realization> {
        self.realized.as_ref()
    }

    /// Number of rounds played.
    pub fn len(&self) -> u64 {
        self.segments.iter().map(|(_, n)| n).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Every round, expanded.
    pub fn rounds(&self) -> impl Iterator<Item = Round> + '_ {
        self.segments.iter().flat_map(|(r, n)| {
            (0..*n).map(move |d| Round { t: r.t + d, ..r.clone() })
        })
    }

    pub fn total_reward(&self) -> f64 {
        self.segments.iter().map(|(r, n)| r.reward * *n as f64).sum()
    }

    pub fn min_certificate(&self) -> f64 {
        self.segments.iter().map(|(r, _)| r.certificate).fold(f64::INFINITY, f64::min)
    }

    /// Rounds in which the given phase was active.
    pub fn rounds_in(&self, phase: Phase) -> u64 {
        self.segments.iter().filter(|(r, _)| r.phase == phase).map(|(_, n)| n).sum()
    }

    /// Whether phase labels never move back to an earlier stage.
    pub fn phases_monotone(&self) -> bool {
        self.segments.windows(2).all(|w| w[0].0.phase.rank() <= w[1].0.phase.rank())
    }

    /// One JSON object per round.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for round in self.rounds() {
            serde_json::to_writer(&mut out, &round)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// True iff no pull of an arm in `A` happens when the mechanism already
/// knows that arm's reward cannot be positive: either it was revealed at or
/// below zero, or its prior puts no mass above zero.
pub fn audit_harmless(trace: &SimTrace, instance: &Instance) -> bool {
    let mut known: Vec<Option<f64>> = vec![None; instance.k()];
    for (round, _) in trace.segments() {
        let Choice::Arm(i) = round.arm else { continue };
        let possible = match known[i] {
            Some(x) => x > 0.0,
            None => instance.arm(i).prob_positive() > 0.0,
        };
        if !possible {
            return false;
        }
        known[i] = Some(round.reward);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::RewardPrior;

    fn round(t: u64, arm: Choice, reward: f64) -> Round {
        Round {
            t,
            portfolio: Portfolio::single(arm),
            arm,
            reward,
            phase: Phase::OgpExploration,
            certificate: 0.0,
            bic: None,
        }
    }

    fn inst() -> Instance {
        Instance::with_zero_default(vec![
            RewardPrior::two_point(-1.0, 1.0, 0.6).unwrap(),
            RewardPrior::two_point(-1.0, 1.0, 0.3).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn information_updates() {
        let inst = inst();
        let mut info = InformationSet::new(&inst).unwrap();
        assert!((info.conditional_mean(Choice::Arm(1)) + 0.4).abs() < 1e-12);
        info.observe(Choice::Arm(1), 1.0, 1);
        assert_eq!(info.conditional_mean(Choice::Arm(1)), 1.0);
        assert_eq!(info.unrevealed(), StateSet::from_arms([0]));
        assert_eq!(info.best_revealed(), Some((1, 1.0)));
        assert_eq!(info.t(), 1);
    }

    #[test]
    fn harmless_audit() {
        let inst = inst();
        let mut good = SimTrace::default();
        good.record(&round(1, Choice::Arm(0), 1.0), 1);
        good.record(&round(2, Choice::Arm(0), 1.0), 10);
        assert!(audit_harmless(&good, &inst));
        let mut bad = SimTrace::default();
        bad.record(&round(1, Choice::Arm(0), -1.0), 1);
        bad.record(&round(2, Choice::Arm(0), -1.0), 1);
        assert!(!audit_harmless(&bad, &inst));
    }

    #[test]
    fn trace_expansion_and_jsonl() {
        let mut trace = SimTrace::default();
        trace.record(&round(1, Choice::Arm(1), -1.0), 1);
        trace.record(&round(2, Choice::Default, 0.0), 3);
        assert_eq!(trace.len(), 4);
        assert_eq!(trace.rounds().map(|r| r.t).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        let mut out = Vec::new();
        trace.write_jsonl(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().next().unwrap().contains(r#""phase":"ogp-exploration""#));
        assert!(text.contains(r#""arm":"default""#));
    }
}
