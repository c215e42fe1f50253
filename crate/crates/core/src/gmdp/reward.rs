//! Terminal rewards.
//!
//! Reaching terminal state `s` means the arms outside `s` have been
//! explored. If one of them beat the threshold, Bernoulli trials eventually
//! reveal every arm and the best one is exploited forever, so the state pays
//! `max_a X(a)`. Otherwise the default arm is kept, paying the threshold
//! (zero for the usual `PointMass(0)` default):
//!
//! `R(s) = E[ max_A X · 1{M_e > θ} ] + θ · Pr(M_e <= θ)`
//!
//! with `M_e` the maximum over explored arms and `θ` the threshold.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{is_terminal, StateSet};
use crate::error::{Error, Result};
use crate::instance::Instance;

/// How terminal rewards are evaluated. One solve uses one mode throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalMode {
    /// Exact integration; every arm must be discrete.
    Exact,
    /// Average over `samples` common joint draws seeded by `seed`.
    MonteCarlo { samples: usize, seed: u64 },
}

impl std::fmt::Display for TerminalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TerminalMode::Exact => write!(f, "exact"),
            TerminalMode::MonteCarlo { samples, seed } => write!(f, "mc:{samples}:{seed}"),
        }
    }
}

/// Terminal reward evaluator for one instance.
#[derive(Debug, Clone)]
pub struct TerminalRewards {
    mode: TerminalMode,
    threshold: f64,
    k: usize,
    inner: Inner,
}

#[derive(Debug, Clone)]
enum Inner {
    Exact {
        /// Merged support of all arms, increasing.
        grid: Vec<f64>,
        /// `cdf[i * grid.len() + g] = Pr(X_i <= grid[g])`.
        cdf: Vec<f64>,
        /// `Pr(X_i <= θ)`.
        cdf_at_threshold: Vec<f64>,
    },
    MonteCarlo {
        /// Row-major `samples x k` joint draws.
        draws: Vec<f64>,
        samples: usize,
    },
}

impl TerminalRewards {
    pub fn new(instance: &Instance, mode: TerminalMode) -> Result<Self> {
        let k = instance.k();
        let threshold = instance.threshold();
        let inner = match mode {
            TerminalMode::Exact => {
                let mut grid = Vec::new();
                for (i, arm) in instance.arms().iter().enumerate() {
                    let atoms = arm.atoms().ok_or(Error::UnsupportedExact { arm: i })?;
                    grid.extend(atoms.into_iter().map(|(v, _)| v));
                }
                grid.sort_by(f64::total_cmp);
                grid.dedup();
                let mut cdf = Vec::with_capacity(k * grid.len());
                for arm in instance.arms() {
                    let atoms = arm.atoms().expect("checked above");
                    let mut acc = 0.0;
                    let mut next = 0;
                    for &g in &grid {
                        while next < atoms.len() && atoms[next].0 <= g {
                            acc += atoms[next].1;
                            next += 1;
                        }
                        cdf.push(if next == atoms.len() { 1.0 } else { acc.min(1.0) });
                    }
                }
                let cdf_at_threshold = instance.arms().iter().map(|a| a.cdf(threshold)).collect();
                Inner::Exact { grid, cdf, cdf_at_threshold }
            }
            TerminalMode::MonteCarlo { samples, seed } => {
                if samples == 0 {
                    return Err(Error::Config("Monte Carlo terminal rewards need samples > 0".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut draws = Vec::with_capacity(samples * k);
                for _ in 0..samples {
                    draws.extend(instance.sample_rewards(&mut rng));
                }
                Inner::MonteCarlo { draws, samples }
            }
        };
        Ok(Self { mode, threshold, k, inner })
    }

    pub fn exact(instance: &Instance) -> Result<Self> {
        Self::new(instance, TerminalMode::Exact)
    }

    pub fn monte_carlo(instance: &Instance, samples: usize, seed: u64) -> Result<Self> {
        Self::new(instance, TerminalMode::MonteCarlo { samples, seed })
    }

    pub fn mode(&self) -> TerminalMode {
        self.mode
    }

    /// Reward of `s` as if it were terminal. Callers check terminality.
    pub fn reward(&self, s: StateSet) -> f64 {
        match &self.inner {
            Inner::Exact { grid, cdf, cdf_at_threshold } => {
                let g_len = grid.len();
                let explored_at_threshold: f64 =
                    (0..self.k).filter(|&i| !s.contains(i)).map(|i| cdf_at_threshold[i]).product();
                if s.len() == self.k {
                    return self.threshold;
                }
                let mut expectation = 0.0;
                let mut previous = 0.0;
                for (g, &v) in grid.iter().enumerate() {
                    let mut explored = 1.0;
                    let mut unexplored = 1.0;
                    for i in 0..self.k {
                        let c = cdf[i * g_len + g];
                        if s.contains(i) {
                            unexplored *= c;
                        } else {
                            explored *= c;
                        }
                    }
                    let joint = unexplored * (explored - explored_at_threshold).max(0.0);
                    let mass = joint - previous;
                    if mass != 0.0 {
                        expectation += v * mass;
                    }
                    previous = joint;
                }
                expectation + self.threshold * explored_at_threshold
            }
            Inner::MonteCarlo { draws, samples } => {
                let total: f64 = draws.chunks_exact(self.k).map(|row| self.sample_reward(row, s)).sum();
                total / *samples as f64
            }
        }
    }

    /// Standard error of [`reward`](Self::reward); zero in exact mode.
    pub fn std_error(&self, s: StateSet) -> f64 {
        match &self.inner {
            Inner::Exact { .. } => 0.0,
            Inner::MonteCarlo { draws, samples } => {
                let n = *samples as f64;
                if *samples < 2 {
                    return f64::INFINITY;
                }
                let (sum, sum_sq) = draws
                    .chunks_exact(self.k)
                    .map(|row| self.sample_reward(row, s))
                    .fold((0.0, 0.0), |(a, b), r| (a + r, b + r * r));
                let mean = sum / n;
                let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            }
        }
    }

    fn sample_reward(&self, row: &[f64], s: StateSet) -> f64 {
        let explored_max = (0..self.k)
            .filter(|&i| !s.contains(i))
            .map(|i| row[i])
            .fold(f64::NEG_INFINITY, f64::max);
        if explored_max > self.threshold {
            row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            self.threshold
        }
    }
}

/// Terminal reward of a terminal state; errors on non-terminal `s`.
pub fn terminal_reward(instance: &Instance, s: StateSet, rewards: &TerminalRewards) -> Result<f64> {
    if !is_terminal(instance, s) {
        return Err(Error::NotPValid { state: s, reason: "state is not terminal".into() });
    }
    Ok(rewards.reward(s))
}
