use crate::error::{Error, Result};
use crate::gmdp::{mix_weights, Action, Choice, Portfolio, StateSet};
use crate::instance::Instance;
use crate::policies::Ogp;

use super::{InformationSet, Phase};

/// Which exploration rule the engine follows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// OGP to a terminal state, Bernoulli trials, then exploitation.
    Standard,
    /// For rewards supported on `{x⁻, x⁺}`: exploit as soon as `x⁺` shows up,
    /// and play lone positive arms by decreasing mean.
    TwoSupported { x_plus: f64 },
}

/// The mechanism's decision for the next round.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub portfolio: Portfolio,
    pub phase: Phase,
    /// `(best, j, Pr(j is realized))` during Bernoulli trials.
    pub trial: Option<(usize, usize, f64)>,
}

/// `(w_best, w_j)` for a Bernoulli trial mixing a revealed arm worth
/// `x_best` with an unexplored arm of mean `mu_j`, both against `threshold`.
pub fn bernoulli_trial_weights(x_best: f64, mu_j: f64, threshold: f64) -> Result<(f64, f64)> {
    if x_best <= threshold {
        return Err(Error::Config(format!(
            "Bernoulli trials need a revealed reward above the threshold, got {x_best}"
        )));
    }
    if mu_j > threshold {
        return Err(Error::Config(format!("arm mean {mu_j} is above the threshold")));
    }
    Ok(mix_weights(x_best - threshold, mu_j - threshold))
}

/// The Bernoulli-trial portfolio mixing arm `best` (revealed value
/// `x_best`) with unexplored arm `j`. Its conditional expectation equals the
/// instance threshold.
pub fn bernoulli_trial_portfolio(x_best: f64, best: usize, instance: &Instance, j: usize) -> Result<Portfolio> {
    let (wb, wj) = bernoulli_trial_weights(x_best, instance.mean(j), instance.threshold())?;
    Ok(Portfolio::pair(Choice::Arm(best), wb, Choice::Arm(j), wj))
}

/// IREGB as a state machine over the mechanism's information.
///
/// The threshold is fixed at construction; arms with prior mean above it
/// are the positive ones for the OGP stage.
#[derive(Debug, Clone)]
pub struct IregbEngine {
    means: Vec<f64>,
    threshold: f64,
    ogp: Ogp,
    /// Every arm by decreasing mean, ties by index.
    by_mean: Vec<usize>,
    variant: Variant,
    phase: Phase,
}

impl IregbEngine {
    pub fn new(instance: &Instance, threshold: f64, variant: Variant) -> Self {
        let means = instance.means().to_vec();
        let mut by_mean: Vec<usize> = (0..means.len()).collect();
        by_mean.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
        Self { ogp: Ogp::with_threshold(&means, threshold), means, threshold, by_mean, variant, phase: Phase::OgpExploration }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    fn exploration_action(&self, s: StateSet) -> Option<Action> {
        match self.variant {
            Variant::Standard => self.ogp.action(s),
            Variant::TwoSupported { .. } => {
                let i = *self.ogp.above().iter().find(|&&i| s.contains(i))?;
                Some(match self.ogp.neg().iter().find(|&&j| s.contains(j)) {
                    Some(&j) => Action::Mix { above: i, neg: j },
                    None => Action::Single(
                        *self.by_mean.iter().find(|&&a| s.contains(a) && self.means[a] > self.threshold)?,
                    ),
                })
            }
        }
    }

    fn portfolio(&self, action: Action) -> Portfolio {
        match action {
            Action::Single(i) => Portfolio::single(Choice::Arm(i)),
            Action::Mix { above, neg } => {
                let (wi, wj) = mix_weights(self.means[above] - self.threshold, self.means[neg] - self.threshold);
                Portfolio::pair(Choice::Arm(above), wi, Choice::Arm(neg), wj)
            }
        }
    }

    /// The next round's portfolio given everything revealed so far.
    pub fn next_step(&mut self, info: &InformationSet) -> Step {
        let s = info.unrevealed();
        loop {
            match self.phase {
                Phase::OgpExploration => {
                    if let Variant::TwoSupported { x_plus } = self.variant {
                        if info.best_revealed().is_some_and(|(_, x)| x >= x_plus) {
                            self.phase = Phase::ExploitBest;
                            continue;
                        }
                    }
                    if let Some(action) = self.exploration_action(s) {
                        return Step { portfolio: self.portfolio(action), phase: self.phase, trial: None };
                    }
                    self.phase = match info.best_revealed() {
                        Some((_, x)) if x > self.threshold => {
                            if s.is_empty() {
                                Phase::ExploitBest
                            } else {
                                Phase::BernoulliTrial
                            }
                        }
                        _ => Phase::ExploitDefault,
                    };
                }
                Phase::BernoulliTrial => {
                    let Some(&j) = self.by_mean.iter().find(|&&a| s.contains(a)) else {
                        self.phase = Phase::ExploitBest;
                        continue;
                    };
                    let (best, x) = info.best_revealed().expect("trials start after a positive reveal");
                    let (wb, wj) = mix_weights(x - self.threshold, (self.means[j] - self.threshold).min(0.0));
                    return Step {
                        portfolio: Portfolio::pair(Choice::Arm(best), wb, Choice::Arm(j), wj),
                        phase: self.phase,
                        trial: Some((best, j, wj)),
                    };
                }
                Phase::ExploitBest => {
                    let (best, _) = info.best_revealed().expect("exploiting a revealed arm");
                    return Step { portfolio: Portfolio::single(Choice::Arm(best)), phase: self.phase, trial: None };
                }
                Phase::ExploitDefault => {
                    return Step { portfolio: Portfolio::single(Choice::Default), phase: self.phase, trial: None };
                }
            }
        }
    }
}
