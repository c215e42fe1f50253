use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;

use crate::bic::{simulate_bic, BicConfig};
use crate::error::{Error, Result};
use crate::gmdp::Choice;
use crate::instance::Instance;
use crate::prior::Family;

use super::{InformationSet, IregbEngine, Realization, Round, RoundSink, SimTrace, Variant, CERTIFICATE_TOL};

/// The mechanisms that can be simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    Iregb,
    IregbPrime,
    BicIregb,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Iregb => "iregb",
            Mechanism::IregbPrime => "iregb_prime",
            Mechanism::BicIregb => "bic_iregb",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iregb" => Ok(Mechanism::Iregb),
            "iregb_prime" => Ok(Mechanism::IregbPrime),
            "bic_iregb" => Ok(Mechanism::BicIregb),
            other => Err(Error::Config(format!(
                "unknown mechanism `{other}` (expected iregb, iregb_prime or bic_iregb)"
            ))),
        }
    }
}

/// A mechanism with its per-instance setup done once.
#[derive(Debug, Clone)]
pub enum Runner {
    Iregb,
    IregbPrime { x_plus: f64 },
    Bic(BicConfig),
}

impl Runner {
    pub fn new(instance: &Instance, mechanism: Mechanism) -> Result<Self> {
        Ok(match mechanism {
            Mechanism::Iregb => Runner::Iregb,
            Mechanism::IregbPrime => Runner::IregbPrime { x_plus: common_two_point_support(instance)?.1 },
            Mechanism::BicIregb => Runner::Bic(BicConfig::for_instance(instance)?),
        })
    }

    pub fn run<R: Rng + ?Sized, S: RoundSink + ?Sized>(
        &self,
        instance: &Instance,
        horizon: u64,
        rng: &mut R,
        sink: &mut S,
    ) -> Result<()> {
        match self {
            Runner::Iregb => simulate_iregb(instance, Variant::Standard, horizon, rng, sink),
            Runner::IregbPrime { x_plus } => {
                simulate_iregb(instance, Variant::TwoSupported { x_plus: *x_plus }, horizon, rng, sink)
            }
            Runner::Bic(config) => simulate_bic(instance, config, horizon, rng, sink),
        }
    }
}

/// `(x⁻, x⁺)` shared by every arm, or an error.
fn common_two_point_support(instance: &Instance) -> Result<(f64, f64)> {
    let mut support = None;
    for (i, arm) in instance.arms().iter().enumerate() {
        let &Family::TwoPoint { low, high, .. } = arm.family() else {
            return Err(Error::Unsupported(format!("arm {i} is not a two-point prior")));
        };
        match support {
            None => support = Some((low, high)),
            Some(s) if s != (low, high) => {
                return Err(Error::Unsupported(format!("arm {i} has support {{{low}, {high}}}, not {s:?}")))
            }
            _ => {}
        }
    }
    support.ok_or_else(|| Error::InvalidInstance("no arms".into()))
}

/// One IREGB run over `horizon` rounds. Failed Bernoulli trials are drawn
/// as one geometric run.
pub fn simulate_iregb<R: Rng + ?Sized, S: RoundSink + ?Sized>(
    instance: &Instance,
    variant: Variant,
    horizon: u64,
    rng: &mut R,
    sink: &mut S,
) -> Result<()> {
    let realized = Realization::draw(instance, rng);
    sink.start(&realized);
    let mut info = InformationSet::new(instance)?;
    let mut engine = IregbEngine::new(instance, instance.threshold(), variant);
    let mut t = 1;
    while t <= horizon {
        let step = engine.next_step(&info);
        let certificate = info.certificate(&step.portfolio);
        let remaining = horizon - t + 1;
        let mut emit = |info: &mut InformationSet, t: u64, arm: Choice, count: u64| {
            let reward = realized.value(arm);
            let round = Round {
                t,
                portfolio: step.portfolio.clone(),
                arm,
                reward,
                phase: step.phase,
                certificate,
                bic: None,
            };
            sink.record(&round, count);
            info.observe(arm, reward, count);
        };
        if step.phase.is_exploiting() {
            emit(&mut info, t, step.portfolio.weights()[0].0, remaining);
            break;
        }
        if let Some((best, j, p)) = step.trial {
            let failures = if p >= 1.0 {
                0
            } else {
                Geometric::new(p).map_err(|e| Error::Config(e.to_string()))?.sample(rng)
            };
            let n = failures.min(remaining);
            if n > 0 {
                emit(&mut info, t, Choice::Arm(best), n);
                t += n;
            }
            if t <= horizon {
                emit(&mut info, t, Choice::Arm(j), 1);
                t += 1;
            }
            continue;
        }
        let arm = step.portfolio.draw(rng);
        emit(&mut info, t, arm, 1);
        t += 1;
    }
    Ok(())
}

pub fn run_iregb<R: Rng + ?Sized>(instance: &Instance, horizon: u64, rng: &mut R) -> Result<SimTrace> {
    let mut trace = SimTrace::default();
    simulate_iregb(instance, Variant::Standard, horizon, rng, &mut trace)?;
    Ok(trace)
}

/// The two-supported variant; every arm must be a two-point prior on one
/// common support.
pub fn run_iregb_prime<R: Rng + ?Sized>(instance: &Instance, horizon: u64, rng: &mut R) -> Result<SimTrace> {
    let (_, x_plus) = common_two_point_support(instance)?;
    let mut trace = SimTrace::default();
    simulate_iregb(instance, Variant::TwoSupported { x_plus }, horizon, rng, &mut trace)?;
    Ok(trace)
}

/// One run of any mechanism, recorded in full.
pub fn simulate<R: Rng + ?Sized>(
    instance: &Instance,
    mechanism: Mechanism,
    horizon: u64,
    rng: &mut R,
) -> Result<SimTrace> {
    let mut trace = SimTrace::default();
    Runner::new(instance, mechanism)?.run(instance, horizon, rng, &mut trace)?;
    Ok(trace)
}

/// Accumulates reward and certificate statistics without storing rounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelfareSink {
    pub total_reward: f64,
    pub rounds: u64,
    pub min_certificate: f64,
    /// Rounds whose certificate is below `-CERTIFICATE_TOL`.
    pub violations: u64,
}

impl Default for WelfareSink {
    fn default() -> Self {
        Self { total_reward: 0.0, rounds: 0, min_certificate: f64::INFINITY, violations: 0 }
    }
}

impl RoundSink for WelfareSink {
    fn record(&mut self, round: &Round, count: u64) {
        self.total_reward += round.reward * count as f64;
        self.rounds += count;
        self.min_certificate = self.min_certificate.min(round.certificate);
        if round.certificate < -CERTIFICATE_TOL {
            self.violations += count;
        }
    }
}

/// Random source of replication `rep` under master seed `seed`: one ChaCha
/// stream per replication.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Mean per-round reward over independent replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelfareEstimate {
    pub horizon: u64,
    pub replications: u64,
    pub mean: f64,
    pub std_error: f64,
    pub min_certificate: f64,
}

/// Monte Carlo estimate of `E[(1/T) Σ r^t]`. Deterministic in `seed`
/// regardless of thread count.
pub fn estimate_welfare(
    instance: &Instance,
    mechanism: Mechanism,
    horizon: u64,
    replications: u64,
    seed: u64,
) -> Result<WelfareEstimate> {
    if replications < 2 {
        return Err(Error::Config("welfare estimation needs at least 2 replications".into()));
    }
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let runner = Runner::new(instance, mechanism)?;
    let runs: Vec<(f64, f64)> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(seed, rep);
            let mut sink = WelfareSink::default();
            runner.run(instance, horizon, &mut rng, &mut sink)?;
            Ok((sink.total_reward / horizon as f64, sink.min_certificate))
        })
        .collect::<Result<_>>()?;
    let n = replications as f64;
    let mean = runs.iter().map(|r| r.0).sum::<f64>() / n;
    let var = runs.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let min_certificate = runs.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(WelfareEstimate { horizon, replications, mean, std_error: (var / n).sqrt(), min_certificate })
}

/// Quantities of the finite-horizon guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    pub k: usize,
    /// Largest `|μ − θ|` over the negative arms, 0 if there are none.
    pub eta: f64,
    /// `E[1/δ]` given that some positive arm beats the threshold.
    pub inverse_delta: f64,
}

/// `E[1/δ | δ exists]`, with `δ` the largest realized excess over the
/// threshold among the positive arms. Exact for discrete priors; 0 when no
/// positive arm can beat the threshold.
pub fn inverse_delta_mean(instance: &Instance) -> Result<f64> {
    let theta = instance.threshold();
    let mut atoms = Vec::new();
    for &i in instance.above() {
        atoms.push(instance.arm(i).atoms().ok_or(Error::UnsupportedExact { arm: i })?);
    }
    let cdf = |v: f64| -> f64 {
        atoms.iter().map(|a| a.iter().filter(|x| x.0 <= v).map(|x| x.1).sum::<f64>().min(1.0)).product()
    };
    let mut grid: Vec<f64> = atoms.iter().flatten().map(|a| a.0).filter(|&v| v > theta).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let base = cdf(theta);
    let (mut previous, mut expectation) = (base, 0.0);
    for v in grid {
        let c = cdf(v);
        expectation += (c - previous) / (v - theta);
        previous = c;
    }
    let p_exists = 1.0 - base;
    Ok(if p_exists > 0.0 { expectation / p_exists } else { 0.0 })
}

impl BoundTerms {
    pub fn new(instance: &Instance) -> Result<Self> {
        if instance.arms().iter().any(|a| a.support_bound().is_none()) {
            return Err(Error::Unsupported("the finite-horizon bound needs bounded priors".into()));
        }
        let eta = instance.neg().iter().map(|&j| instance.centered_mean(j).abs()).fold(0.0, f64::max);
        Ok(Self { k: instance.k(), eta, inverse_delta: inverse_delta_mean(instance)? })
    }

    /// `(1 − K(1 + η·E[1/δ])/T) · w_star`.
    pub fn bound(&self, horizon: u64, w_star: f64) -> f64 {
        (1.0 - self.k as f64 * (1.0 + self.eta * self.inverse_delta) / horizon as f64) * w_star
    }
}

/// Lower bound on IREGB's welfare at horizon `horizon`, given `W*(A)`.
pub fn convergence_bound(instance: &Instance, horizon: u64, w_star: f64) -> Result<f64> {
    Ok(BoundTerms::new(instance)?.bound(horizon, w_star))
}

pub fn welfare_csv_header() -> &'static str {
    "instance-id,mechanism,T,replications,mean,stderr,bound"
}

pub fn welfare_csv_row(instance_id: &str, mechanism: Mechanism, estimate: &WelfareEstimate, bound: Option<f64>) -> String {
    let bound = bound.map_or(String::new(), |b| format!("{b:.9}"));
    format!(
        "{instance_id},{mechanism},{},{},{:.9},{:.9},{bound}",
        estimate.horizon, estimate.replications, estimate.mean, estimate.std_error
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::RewardPrior;
    use crate::sim::Phase;

    fn two_arm() -> Instance {
        Instance::with_zero_default(vec![
            RewardPrior::two_point(-1.0, 1.0, 0.6).unwrap(),
            RewardPrior::two_point(-1.0, 1.0, 0.3).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn nothing_explorable_plays_default() {
        let inst = Instance::with_zero_default(vec![
            RewardPrior::point_mass(-1.0).unwrap(),
            RewardPrior::point_mass(-2.0).unwrap(),
        ])
        .unwrap();
        let trace = run_iregb(&inst, 50, &mut replication_rng(1, 0)).unwrap();
        assert_eq!(trace.len(), 50);
        assert_eq!(trace.rounds_in(Phase::ExploitDefault), 50);
        assert_eq!(trace.total_reward(), 0.0);
    }

    #[test]
    fn all_positive_explores_in_k_rounds() {
        let inst = Instance::with_zero_default(vec![
            RewardPrior::point_mass(1.0).unwrap(),
            RewardPrior::point_mass(3.0).unwrap(),
            RewardPrior::point_mass(2.0).unwrap(),
        ])
        .unwrap();
        let trace = run_iregb(&inst, 100, &mut replication_rng(1, 0)).unwrap();
        assert_eq!(trace.rounds_in(Phase::OgpExploration), 3);
        assert_eq!(trace.rounds_in(Phase::ExploitBest), 97);
        assert_eq!(trace.total_reward(), 1.0 + 3.0 + 2.0 + 97.0 * 3.0);
    }

    #[test]
    fn horizon_truncates() {
        let inst = two_arm();
        for rep in 0..200 {
            let trace = run_iregb(&inst, 3, &mut replication_rng(9, rep)).unwrap();
            assert_eq!(trace.len(), 3);
            assert!(trace.phases_monotone());
            assert!(trace.min_certificate() >= -CERTIFICATE_TOL);
        }
    }

    #[test]
    fn static_rewards() {
        let inst = two_arm();
        for rep in 0..200 {
            let trace = run_iregb(&inst, 1000, &mut replication_rng(4, rep)).unwrap();
            let realized = trace.realized().unwrap();
            for (round, _) in trace.segments() {
                assert_eq!(round.reward, realized.value(round.arm));
            }
        }
    }

    #[test]
    fn prime_needs_common_support() {
        let inst = Instance::with_zero_default(vec![
            RewardPrior::two_point(-1.0, 1.0, 0.6).unwrap(),
            RewardPrior::two_point(-1.0, 2.0, 0.3).unwrap(),
        ])
        .unwrap();
        assert!(run_iregb_prime(&inst, 10, &mut replication_rng(0, 0)).is_err());
        let gauss = Instance::with_zero_default(vec![RewardPrior::gaussian(1.0, 1.0).unwrap()]).unwrap();
        assert!(run_iregb_prime(&gauss, 10, &mut replication_rng(0, 0)).is_err());
    }

    #[test]
    fn prime_exploits_first_high_reward() {
        let inst = two_arm();
        for rep in 0..200 {
            let trace = run_iregb_prime(&inst, 20, &mut replication_rng(2, rep)).unwrap();
            if trace.segments()[0].0.reward == 1.0 {
                assert_eq!(trace.rounds_in(Phase::ExploitBest), 19);
            }
        }
    }

    #[test]
    fn point_masses_have_zero_std_error() {
        let inst = Instance::with_zero_default(vec![
            RewardPrior::point_mass(1.0).unwrap(),
            RewardPrior::point_mass(2.0).unwrap(),
        ])
        .unwrap();
        let est = estimate_welfare(&inst, Mechanism::Iregb, 10, 50, 3).unwrap();
        assert!(est.std_error < 1e-12);
        assert!((est.mean - (1.0 + 2.0 * 9.0) / 10.0).abs() < 1e-12);
    }

    #[test]
    fn estimates_are_deterministic() {
        let inst = two_arm();
        let a = estimate_welfare(&inst, Mechanism::Iregb, 100, 500, 11).unwrap();
        let b = estimate_welfare(&inst, Mechanism::Iregb, 100, 500, 11).unwrap();
        assert_eq!(a, b);
        assert!(estimate_welfare(&inst, Mechanism::Iregb, 100, 1, 11).is_err());
    }

    #[test]
    fn bound_without_negative_arms() {
        let inst = Instance::with_zero_default(vec![
            RewardPrior::two_point(-1.0, 1.0, 0.6).unwrap(),
            RewardPrior::two_point(-1.0, 2.0, 0.5).unwrap(),
        ])
        .unwrap();
        let terms = BoundTerms::new(&inst).unwrap();
        assert_eq!(terms.eta, 0.0);
        assert!((terms.bound(100, 2.0) - (1.0 - 2.0 / 100.0) * 2.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_delta_by_hand() {
        // One positive arm: δ = 1 w.p. 0.6 given it exists.
        assert!((inverse_delta_mean(&two_arm()).unwrap() - 1.0).abs() < 1e-15);
        let inst = Instance::with_zero_default(vec![
            RewardPrior::finite_discrete(vec![-1.0, 0.5, 2.0], vec![0.2, 0.4, 0.4]).unwrap(),
        ])
        .unwrap();
        assert!((inverse_delta_mean(&inst).unwrap() - (0.5 * 2.0 + 0.5 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn csv_row_shape() {
        let est = WelfareEstimate { horizon: 10, replications: 4, mean: 0.5, std_error: 0.1, min_certificate: 0.0 };
        let row = welfare_csv_row("x", Mechanism::Iregb, &est, None);
        assert_eq!(row.split(',').count(), welfare_csv_header().split(',').count());
    }
}
