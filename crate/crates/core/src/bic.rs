//! The incentive-compatible mechanism and its auditors.
//!
//! The default arm is random here and revealed in round 1; its realized
//! value becomes the MIR threshold of the embedded IREGB. Exploration is
//! hidden: each phase of `B` rounds carries at most one IREGB
//! recommendation at a uniformly random slot.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::gmdp::{Choice, Portfolio};
use crate::instance::Instance;
use crate::prior::RewardPrior;
use crate::dp;
use crate::gmdp::TerminalRewards;
use crate::sim::{
    replication_rng, BicTag, BoundTerms, SimTrace, InformationSet, IregbEngine, Mechanism, Phase, Realization, Round, RoundSink,
    Runner, Source, Variant,
};

/// Number of log-spaced margin candidates.
pub const XI_GRID: usize = 512;
/// Smallest accepted `γ(ξ)`.
pub const GAMMA_FLOOR: f64 = 1e-9;
/// Cells with fewer samples are reported as sparse.
pub const SPARSE_CELL: u64 = 30;

/// Hidden-exploration parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicConfig {
    pub xi: f64,
    pub gamma: f64,
    /// `B = ⌈H/(ξγ)⌉ + 1`.
    pub phase_length: u64,
    pub h: f64,
}

impl BicConfig {
    /// Checks the mechanism's assumptions, then derives `(ξ, γ, B)`.
    pub fn for_instance(instance: &Instance) -> Result<Self> {
        validate_assumptions(instance)?;
        compute_xi_gamma(instance)
    }
}

/// Priors of `A⁺`: the default first, then the arms.
fn all_priors(instance: &Instance) -> Vec<(Choice, &RewardPrior)> {
    std::iter::once((Choice::Default, instance.default_arm()))
        .chain(instance.arms().iter().enumerate().map(|(i, p)| (Choice::Arm(i), p)))
        .collect()
}

fn support_bound(instance: &Instance) -> Result<f64> {
    instance
        .support_bound()
        .ok_or_else(|| Error::Unsupported("the incentive-compatible mechanism needs bounded priors".into()))
}

/// Every other option undercuts `i`'s mean with some probability.
fn check_support_overlap(instance: &Instance) -> Result<()> {
    let priors = all_priors(instance);
    for &(ci, pi) in &priors {
        for &(cj, pj) in &priors {
            if ci != cj && pi.prob_below(pj.mean()) <= 0.0 {
                return Err(Error::AssumptionViolation(format!(
                    "support overlap: Pr(X({ci}) < mean of {cj}) = 0"
                )));
            }
        }
    }
    Ok(())
}

/// `γ(ξ) = min_i Π_{i' ≠ i} Pr(X_{i'} < μ_i − ξ)` over `A⁺`.
pub fn gamma_of(instance: &Instance, xi: f64) -> f64 {
    let priors = all_priors(instance);
    priors
        .iter()
        .map(|&(ci, pi)| {
            let cut = pi.mean() - xi;
            priors.iter().filter(|(c, _)| *c != ci).map(|(_, p)| p.prob_below(cut)).product::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Grid search for the margin `ξ ∈ (0, H]` maximizing `ξ·γ(ξ)`.
pub fn compute_xi_gamma(instance: &Instance) -> Result<BicConfig> {
    check_support_overlap(instance)?;
    let h = support_bound(instance)?;
    if h <= 0.0 {
        return Err(Error::InvalidInstance("support bound must be positive".into()));
    }
    let mut best: Option<(f64, f64)> = None;
    for m in 0..XI_GRID {
        let xi = h * 10f64.powf(-6.0 + 6.0 * m as f64 / (XI_GRID - 1) as f64);
        let gamma = gamma_of(instance, xi);
        if gamma > GAMMA_FLOOR && best.is_none_or(|(bx, bg)| xi * gamma > bx * bg) {
            best = Some((xi, gamma));
        }
    }
    let (xi, gamma) = best.ok_or_else(|| {
        Error::AssumptionViolation("support overlap: no margin gives every option a positive chance".into())
    })?;
    // The defining inequality is strict.
    let gamma = gamma * (1.0 - 1e-9);
    let phase_length = (h / (xi * gamma)).ceil() as u64 + 1;
    Ok(BicConfig { xi, gamma, phase_length, h })
}

/// Refuses instances the mechanism is not designed for, naming the
/// violated assumption.
pub fn validate_assumptions(instance: &Instance) -> Result<()> {
    support_bound(instance)?;
    let mu0 = instance.default_arm().mean();
    let means = instance.means();
    if let Some(i) = (0..means.len()).find(|&i| means[i] >= mu0) {
        return Err(Error::AssumptionViolation(format!(
            "default superiority: arm {i} has mean {} >= default mean {mu0}",
            means[i]
        )));
    }
    if let Some(i) = (1..means.len()).find(|&i| means[i] > means[i - 1]) {
        return Err(Error::AssumptionViolation(format!(
            "default superiority: arm means must be non-increasing, arm {i} exceeds arm {}",
            i - 1
        )));
    }
    for i in 1..means.len() {
        if !instance.arm(i - 1).dominates(instance.arm(i))? {
            return Err(Error::AssumptionViolation(format!(
                "stochastic order: arm {} does not dominate arm {i}",
                i - 1
            )));
        }
    }
    check_support_overlap(instance)
}

/// The option with the highest conditional mean; the default wins exact
/// ties, then the lowest index.
pub fn greedy_recommendation(info: &InformationSet) -> Choice {
    let mut best = Choice::Default;
    let mut value = info.conditional_mean(Choice::Default);
    for i in 0..info.k() {
        let v = info.conditional_mean(Choice::Arm(i));
        if v > value {
            best = Choice::Arm(i);
            value = v;
        }
    }
    best
}

struct BicRun<'a, S: RoundSink + ?Sized> {
    realized: Realization,
    info: InformationSet,
    sink: &'a mut S,
    t: u64,
}

impl<S: RoundSink + ?Sized> BicRun<'_, S> {
    fn emit(&mut self, portfolio: Portfolio, arm: Choice, phase: Phase, tag: BicTag, count: u64) {
        let reward = self.realized.value(arm);
        let certificate = self.info.certificate(&portfolio);
        let round = Round { t: self.t, portfolio, arm, reward, phase, certificate, bic: Some(tag) };
        self.sink.record(&round, count);
        self.info.observe(arm, reward, count);
        self.t += count;
    }

    /// `count` rounds of Greedy, one at a time while it keeps revealing arms.
    fn greedy(&mut self, mut count: u64, phase: Phase, phase_index: u64) {
        while count > 0 {
            let g = greedy_recommendation(&self.info);
            let n = if self.info.value(g).is_some() { count } else { 1 };
            let tag = BicTag { phase_index, explorer: false, source: Source::Greedy };
            self.emit(Portfolio::single(g), g, phase, tag, n);
            count -= n;
        }
    }

    fn default_rounds(&mut self, count: u64, phase: Phase, phase_index: u64) {
        if count > 0 {
            let tag = BicTag { phase_index, explorer: false, source: Source::Default };
            self.emit(Portfolio::single(Choice::Default), Choice::Default, phase, tag, count);
        }
    }

    /// Non-explorer slots of an exploring phase.
    fn others(&mut self, count: u64, x0: f64, phase: Phase, phase_index: u64) {
        if count == 0 {
            return;
        }
        if self.info.best_revealed().is_some_and(|(_, x)| x > x0) {
            self.greedy(count, phase, phase_index);
        } else {
            self.default_rounds(count, phase, phase_index);
        }
    }
}

/// One run of the incentive-compatible mechanism under obedient agents.
pub fn simulate_bic<R: Rng + ?Sized, S: RoundSink + ?Sized>(
    instance: &Instance,
    config: &BicConfig,
    horizon: u64,
    rng: &mut R,
    sink: &mut S,
) -> Result<()> {
    let realized = Realization::draw(instance, rng);
    sink.start(&realized);
    let x0 = realized.default;
    let mut run = BicRun { info: InformationSet::new(instance)?, realized, sink, t: 1 };
    if horizon == 0 {
        return Ok(());
    }
    run.default_rounds(1, Phase::OgpExploration, 0);
    let mut engine = IregbEngine::new(instance, x0, Variant::Standard);
    let k = instance.k() as u64;
    let opening = k.min(horizon - 1);
    let lowest_mean = instance.means().iter().copied().fold(f64::INFINITY, f64::min);
    if x0 < lowest_mean {
        run.greedy(opening, engine.phase(), 0);
    } else {
        run.default_rounds(opening, engine.phase(), 0);
    }
    let mut phase_index = 1;
    while run.t <= horizon {
        let len = config.phase_length.min(horizon - run.t + 1);
        let step = engine.next_step(&run.info);
        if step.phase.is_exploiting() {
            let arm = step.portfolio.weights()[0].0;
            let tag = BicTag { phase_index, explorer: false, source: Source::Iregb };
            run.emit(step.portfolio, arm, step.phase, tag, horizon - run.t + 1);
            break;
        }
        let slot = rng.random_range(0..len);
        run.others(slot, x0, engine.phase(), phase_index);
        let step = engine.next_step(&run.info);
        let arm = step.portfolio.draw(rng);
        let tag = BicTag { phase_index, explorer: true, source: Source::Iregb };
        run.emit(step.portfolio, arm, step.phase, tag, 1);
        run.others(len - slot - 1, x0, engine.phase(), phase_index);
        phase_index += 1;
    }
    Ok(())
}

/// One run of the incentive-compatible mechanism, recorded in full.
pub fn run_bic_iregb<R: Rng + ?Sized>(instance: &Instance, horizon: u64, rng: &mut R) -> Result<SimTrace> {
    let config = BicConfig::for_instance(instance)?;
    let mut trace = SimTrace::default();
    simulate_bic(instance, &config, horizon, rng, &mut trace)?;
    Ok(trace)
}

/// Welfare envelope of the mechanism at horizon `T` with hidden constant
/// `c`: the average over default atoms `x₀` of
/// `W*ₓ₀ − c·K·η·H·E[1/δ]/(T·ξ·γ)·|W*ₓ₀|`, where `W*ₓ₀`, `η` and `E[1/δ]`
/// are taken against the threshold `x₀`.
pub fn welfare_envelope(instance: &Instance, config: &BicConfig, horizon: u64, c: f64) -> Result<f64> {
    let atoms = instance
        .default_arm()
        .atoms()
        .ok_or_else(|| Error::Unsupported("the welfare envelope needs a discrete default".into()))?;
    let mut total = 0.0;
    for (x0, p) in atoms {
        let fixed = Instance::new(instance.arms().to_vec(), RewardPrior::point_mass(x0)?)?;
        let w = dp::w_star(&fixed, &TerminalRewards::exact(&fixed)?)?;
        let terms = BoundTerms::new(&fixed)?;
        let gap = c * terms.k as f64 * terms.eta * config.h * terms.inverse_delta
            / (horizon as f64 * config.xi * config.gamma);
        total += p * (w - gap * w.abs());
    }
    Ok(total)
}

/// What an agent is assumed to know about its position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeliefMode {
    /// Each agent knows its round number.
    InformativeOrder,
    /// Each agent believes every round equally likely.
    UniformBelief,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellFlag {
    Ok,
    Violation,
    Sparse,
}

impl CellFlag {
    fn as_str(self) -> &'static str {
        match self {
            CellFlag::Ok => "ok",
            CellFlag::Violation => "violation",
            CellFlag::Sparse => "sparse",
        }
    }
}

/// Estimate of `E[X(recommended) − X(alternative) | m^t = recommended]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditCell {
    /// `None` in uniform-belief mode, where rounds are pooled.
    pub t: Option<u64>,
    pub recommended: Choice,
    pub alternative: Choice,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
    pub flag: CellFlag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BicAuditReport {
    pub mechanism: Mechanism,
    pub mode: BeliefMode,
    pub horizon: u64,
    pub replications: u64,
    pub seed: u64,
    pub cells: Vec<AuditCell>,
}

impl BicAuditReport {
    pub fn violations(&self) -> impl Iterator<Item = &AuditCell> {
        self.cells.iter().filter(|c| c.flag == CellFlag::Violation)
    }

    pub fn sparse(&self) -> impl Iterator<Item = &AuditCell> {
        self.cells.iter().filter(|c| c.flag == CellFlag::Sparse)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# mechanism={} mode={:?} T={} replications={} seed={}\nt,recommended,alternative,estimate,ci_low,ci_high,n,flag\n",
            self.mechanism, self.mode, self.horizon, self.replications, self.seed
        );
        for c in &self.cells {
            let t = c.t.map_or("*".to_string(), |t| t.to_string());
            writeln!(
                out,
                "{t},{},{},{:.9},{:.9},{:.9},{},{}",
                c.recommended,
                c.alternative,
                c.estimate,
                c.ci_low,
                c.ci_high,
                c.n,
                c.flag.as_str()
            )
            .expect("writing to a String");
        }
        out
    }
}

fn choice_index(c: Choice) -> usize {
    match c {
        Choice::Default => 0,
        Choice::Arm(i) => i + 1,
    }
}

fn index_choice(i: usize) -> Choice {
    if i == 0 {
        Choice::Default
    } else {
        Choice::Arm(i - 1)
    }
}

/// Per-round cell sums, stored as differences along `t` so a segment of
/// identical rounds costs one update per alternative.
#[derive(Debug, Clone)]
struct InformativeAcc {
    width: usize,
    horizon: u64,
    values: Vec<f64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    n: Vec<i64>,
}

impl InformativeAcc {
    fn new(width: usize, horizon: u64) -> Self {
        let size = (horizon as usize + 2) * width * width;
        Self { width, horizon, values: Vec::new(), sum: vec![0.0; size], sum_sq: vec![0.0; size], n: vec![0; size] }
    }

    fn at(&self, t: u64, rec: usize, alt: usize) -> usize {
        (t as usize * self.width + rec) * self.width + alt
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        for (a, b) in self.n.iter_mut().zip(&other.n) {
            *a += b;
        }
    }
}

impl RoundSink for InformativeAcc {
    fn start(&mut self, realized: &Realization) {
        self.values.clear();
        self.values.push(realized.default);
        self.values.extend(&realized.arms);
    }

    fn record(&mut self, round: &Round, count: u64) {
        let rec = choice_index(round.arm);
        let end = (round.t + count).min(self.horizon + 1);
        for alt in 0..self.width {
            if alt == rec {
                continue;
            }
            let d = self.values[rec] - self.values[alt];
            let (a, b) = (self.at(round.t, rec, alt), self.at(end, rec, alt));
            self.sum[a] += d;
            self.sum[b] -= d;
            self.sum_sq[a] += d * d;
            self.sum_sq[b] -= d * d;
            self.n[a] += 1;
            self.n[b] -= 1;
        }
    }
}

/// Pooled-over-rounds cells. A replication contributes `S = Σ_t d_t` and
/// `N = #rounds` per cell; the estimate is the ratio `ΣS / ΣN` with a
/// delta-method standard error.
#[derive(Debug, Clone)]
struct UniformAcc {
    width: usize,
    values: Vec<f64>,
    run_s: Vec<f64>,
    run_n: Vec<f64>,
    s: Vec<f64>,
    n: Vec<f64>,
    ss: Vec<f64>,
    nn: Vec<f64>,
    sn: Vec<f64>,
    reps: Vec<u64>,
}

impl UniformAcc {
    fn new(width: usize) -> Self {
        let z = vec![0.0; width * width];
        Self {
            width,
            values: Vec::new(),
            run_s: z.clone(),
            run_n: z.clone(),
            s: z.clone(),
            n: z.clone(),
            ss: z.clone(),
            nn: z.clone(),
            sn: z,
            reps: vec![0; width * width],
        }
    }

    fn finish_run(&mut self) {
        for c in 0..self.run_s.len() {
            let (s, n) = (self.run_s[c], self.run_n[c]);
            if n > 0.0 {
                self.s[c] += s;
                self.n[c] += n;
                self.ss[c] += s * s;
                self.nn[c] += n * n;
                self.sn[c] += s * n;
                self.reps[c] += 1;
            }
            self.run_s[c] = 0.0;
            self.run_n[c] = 0.0;
        }
    }

    fn merge(&mut self, other: &Self) {
        for c in 0..self.s.len() {
            self.s[c] += other.s[c];
            self.n[c] += other.n[c];
            self.ss[c] += other.ss[c];
            self.nn[c] += other.nn[c];
            self.sn[c] += other.sn[c];
            self.reps[c] += other.reps[c];
        }
    }
}

impl RoundSink for UniformAcc {
    fn start(&mut self, realized: &Realization) {
        self.values.clear();
        self.values.push(realized.default);
        self.values.extend(&realized.arms);
    }

    fn record(&mut self, round: &Round, count: u64) {
        let rec = choice_index(round.arm);
        for alt in 0..self.width {
            if alt != rec {
                let c = rec * self.width + alt;
                self.run_s[c] += (self.values[rec] - self.values[alt]) * count as f64;
                self.run_n[c] += count as f64;
            }
        }
    }
}

fn make_cell(t: Option<u64>, c: usize, width: usize, estimate: f64, se: f64, n: u64, z: f64) -> AuditCell {
    let (ci_low, ci_high) = (estimate - z * se, estimate + z * se);
    let flag = if n < SPARSE_CELL {
        CellFlag::Sparse
    } else if ci_high < 0.0 {
        CellFlag::Violation
    } else {
        CellFlag::Ok
    };
    AuditCell {
        t,
        recommended: index_choice(c / width),
        alternative: index_choice(c % width),
        estimate,
        ci_low,
        ci_high,
        n,
        flag,
    }
}

/// Number of fixed replication blocks; blocks are merged in order so the
/// report does not depend on the thread count.
const AUDIT_BLOCKS: u64 = 64;

/// Monte Carlo check of obedience: for every round (or pooled, in
/// uniform-belief mode), recommended option and alternative, estimates the
/// conditional gain of following the recommendation with a 99% normal
/// confidence interval. Cells whose upper bound is below zero are
/// violations; cells with fewer than 30 samples are sparse.
pub fn audit_bic(
    instance: &Instance,
    mechanism: Mechanism,
    horizon: u64,
    replications: u64,
    seed: u64,
    mode: BeliefMode,
) -> Result<BicAuditReport> {
    if replications < 2 || horizon == 0 {
        return Err(Error::Config("the audit needs T >= 1 and at least 2 replications".into()));
    }
    let runner = Runner::new(instance, mechanism)?;
    let width = instance.k() + 1;
    let z = Normal::standard().inverse_cdf(0.995);
    let block = replications.div_ceil(AUDIT_BLOCKS);
    let blocks: Vec<(u64, u64)> =
        (0..replications).step_by(block as usize).map(|lo| (lo, (lo + block).min(replications))).collect();
    let mut cells = Vec::new();
    match mode {
        BeliefMode::InformativeOrder => {
            let parts: Vec<InformativeAcc> = blocks
                .par_iter()
                .map(|&(lo, hi)| {
                    let mut acc = InformativeAcc::new(width, horizon);
                    for rep in lo..hi {
                        runner.run(instance, horizon, &mut replication_rng(seed, rep), &mut acc)?;
                    }
                    Ok(acc)
                })
                .collect::<Result<_>>()?;
            let mut total = InformativeAcc::new(width, horizon);
            for p in &parts {
                total.merge(p);
            }
            let per_t = width * width;
            let (mut sum, mut sum_sq, mut n) = (vec![0.0; per_t], vec![0.0; per_t], vec![0i64; per_t]);
            for t in 1..=horizon {
                for c in 0..per_t {
                    let idx = t as usize * per_t + c;
                    sum[c] += total.sum[idx];
                    sum_sq[c] += total.sum_sq[idx];
                    n[c] += total.n[idx];
                    if n[c] <= 0 || c / width == c % width {
                        continue;
                    }
                    let nf = n[c] as f64;
                    let mean = sum[c] / nf;
                    let var = if n[c] > 1 { ((sum_sq[c] - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
                    cells.push(make_cell(Some(t), c, width, mean, (var / nf).sqrt(), n[c] as u64, z));
                }
            }
        }
        BeliefMode::UniformBelief => {
            let parts: Vec<UniformAcc> = blocks
                .par_iter()
                .map(|&(lo, hi)| {
                    let mut acc = UniformAcc::new(width);
                    for rep in lo..hi {
                        runner.run(instance, horizon, &mut replication_rng(seed, rep), &mut acc)?;
                        acc.finish_run();
                    }
                    Ok(acc)
                })
                .collect::<Result<_>>()?;
            let mut total = UniformAcc::new(width);
            for p in &parts {
                total.merge(p);
            }
            for c in 0..width * width {
                if total.reps[c] == 0 || c / width == c % width {
                    continue;
                }
                let mean = total.s[c] / total.n[c];
                let resid = (total.ss[c] - 2.0 * mean * total.sn[c] + mean * mean * total.nn[c]).max(0.0);
                let se = resid.sqrt() / total.n[c];
                cells.push(make_cell(None, c, width, mean, se, total.reps[c], z));
            }
        }
    }
    Ok(BicAuditReport { mechanism, mode, horizon, replications, seed, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Default `{1/16: 0.5, 1: 0.5}`; arms on `{-1, 2}` with decreasing means.
    fn bic_instance() -> Instance {
        Instance::new(
            vec![
                RewardPrior::two_point(-1.0, 2.0, 0.45).unwrap(),
                RewardPrior::two_point(-1.0, 2.0, 0.4).unwrap(),
                RewardPrior::two_point(-1.0, 2.0, 0.375).unwrap(),
            ],
            RewardPrior::finite_discrete(vec![0.0625, 1.0], vec![0.5, 0.5]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn greedy_cases() {
        let inst = bic_instance();
        let mut info = InformationSet::new(&inst).unwrap();
        assert_eq!(greedy_recommendation(&info), Choice::Default);
        info.observe(Choice::Arm(2), 5.0, 1);
        assert_eq!(greedy_recommendation(&info), Choice::Arm(2));

        let inst = Instance::new(
            vec![RewardPrior::two_point(-1.0, 1.0, 0.525).unwrap()],
            RewardPrior::finite_discrete(vec![0.1, 0.5], vec![0.5, 0.5]).unwrap(),
        )
        .unwrap();
        let mut info = InformationSet::new(&inst).unwrap();
        info.observe(Choice::Default, 0.1, 1);
        assert_eq!(greedy_recommendation(&info), Choice::Default);
    }

    #[test]
    fn xi_gamma_satisfy_their_definition() {
        let inst = bic_instance();
        let cfg = compute_xi_gamma(&inst).unwrap();
        assert!(cfg.xi > 0.0 && cfg.xi <= cfg.h);
        assert!(gamma_of(&inst, cfg.xi) > cfg.gamma);
        assert_eq!(cfg.phase_length, (cfg.h / (cfg.xi * cfg.gamma)).ceil() as u64 + 1);
        assert!(cfg.phase_length >= 2);
    }

    #[test]
    fn two_symmetric_arms() {
        let inst = Instance::new(
            vec![RewardPrior::two_point(-1.0, 1.0, 0.51).unwrap(), RewardPrior::two_point(-1.0, 1.0, 0.51).unwrap()],
            RewardPrior::finite_discrete(vec![-0.5, 1.0], vec![0.5, 0.5]).unwrap(),
        )
        .unwrap();
        let cfg = compute_xi_gamma(&inst).unwrap();
        assert!(gamma_of(&inst, cfg.xi) > cfg.gamma);
    }

    #[test]
    fn overlap_violation_names_the_pair() {
        let inst = Instance::new(
            vec![RewardPrior::point_mass(-5.0).unwrap(), RewardPrior::two_point(-1.0, 1.0, 0.4).unwrap()],
            RewardPrior::point_mass(0.0).unwrap(),
        )
        .unwrap();
        match compute_xi_gamma(&inst) {
            Err(Error::AssumptionViolation(msg)) => assert!(msg.contains("Pr(X(default) < mean of 0)"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn refuses_inferior_default() {
        let inst = Instance::with_zero_default(vec![RewardPrior::two_point(-1.0, 1.0, 0.6).unwrap()]).unwrap();
        match validate_assumptions(&inst) {
            Err(Error::AssumptionViolation(msg)) => assert!(msg.starts_with("default superiority")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_round() {
        let inst = bic_instance();
        let cfg = BicConfig::for_instance(&inst).unwrap();
        let mut trace = SimTrace::default();
        simulate_bic(&inst, &cfg, 1, &mut replication_rng(0, 0), &mut trace).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.segments()[0].0.arm, Choice::Default);
    }

    #[test]
    fn runs_are_mir_and_obedient() {
        let inst = bic_instance();
        let cfg = BicConfig::for_instance(&inst).unwrap();
        for rep in 0..500 {
            let mut trace = SimTrace::default();
            simulate_bic(&inst, &cfg, 400, &mut replication_rng(3, rep), &mut trace).unwrap();
            assert_eq!(trace.len(), 400);
            assert!(trace.min_certificate() >= -1e-9);
            let x0 = trace.realized().unwrap().default;
            let opening: Vec<_> =
                trace.segments().iter().filter(|(r, _)| r.bic.unwrap().phase_index == 0).skip(1).collect();
            if x0 < inst.means()[2] {
                assert!(opening.iter().all(|(r, _)| r.bic.unwrap().source == Source::Greedy));
            } else {
                assert!(opening.iter().all(|(r, _)| r.arm == Choice::Default));
            }
        }
    }
}
