//! Named instances used by the verification suites and the examples.

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::prior::RewardPrior;

/// Four Gaussian arms with means 2, 1, −1, −2 and unit variance.
pub fn example_one() -> Instance {
    Instance::with_zero_default(
        [2.0, 1.0, -1.0, -2.0].iter().map(|&m| RewardPrior::gaussian(m, 1.0).expect("valid gaussian")).collect(),
    )
    .expect("valid instance")
}

/// [`example_one`] with each arm projected onto a 21-point grid over ±3σ.
pub fn example_one_discretized() -> Instance {
    let arms = example_one().arms().iter().map(|a| a.discretize(21, 3.0).expect("gaussian arm")).collect();
    Instance::with_zero_default(arms).expect("valid instance")
}

/// Three arms whose negative arms are ordered by dominance while the
/// optimal value is not monotone in which of them is removed:
/// `X₁ ∈ {−1: .45, 1: .55}`, `X₂ ∈ {−10⁶−2ε, 10⁶}`, `X₃ ∈ {−10^{1/ε}, 10⁶}`.
pub fn claim_instance(epsilon: f64) -> Result<Instance> {
    if !(epsilon > 0.0 && epsilon < 1.0 / 7.0) {
        return Err(Error::Config(format!("epsilon must lie in (0, 1/7), got {epsilon}")));
    }
    Instance::with_zero_default(vec![
        RewardPrior::two_point(-1.0, 1.0, 0.55)?,
        RewardPrior::two_point(-1e6 - 2.0 * epsilon, 1e6, 0.5)?,
        RewardPrior::two_point(-(10f64.powf(1.0 / epsilon)), 1e6, 0.5)?,
    ])
}

/// One arm `{−1, 1}` with `Pr(1) = .6` and one with `Pr(1) = .3`; optimal value 0.64.
pub fn small_mix() -> Instance {
    Instance::with_zero_default(vec![
        RewardPrior::two_point(-1.0, 1.0, 0.6).expect("valid"),
        RewardPrior::two_point(-1.0, 1.0, 0.3).expect("valid"),
    ])
    .expect("valid instance")
}

/// Arms on the common support `{−1, h}`, one per `p_high`.
pub fn two_supported(h: f64, p_high: &[f64]) -> Result<Instance> {
    Instance::with_zero_default(p_high.iter().map(|&p| RewardPrior::two_point(-1.0, h, p)).collect::<Result<_>>()?)
}

fn discrete(values: &[f64], probs: &[f64]) -> RewardPrior {
    RewardPrior::finite_discrete(values.to_vec(), probs.to_vec()).expect("valid discrete prior")
}

/// Bounded discrete instances with a zero default, used for welfare runs.
pub fn welfare_set() -> Vec<(&'static str, Instance)> {
    let zero = |arms: Vec<RewardPrior>| Instance::with_zero_default(arms).expect("valid instance");
    vec![
        ("small-mix", small_mix()),
        ("two-point-4", two_supported(2.0, &[0.5, 0.4, 0.25, 0.2]).expect("valid")),
        (
            "three-atom-3",
            zero(vec![
                discrete(&[-1.0, 0.5, 2.0], &[0.25, 0.25, 0.5]),
                discrete(&[-1.5, 0.0, 1.0], &[0.25, 0.5, 0.25]),
                discrete(&[-2.0, -0.5, 0.5], &[0.25, 0.5, 0.25]),
            ]),
        ),
        (
            "mixed-5",
            zero(vec![
                discrete(&[-0.5, 1.0], &[0.5, 0.5]),
                discrete(&[-1.0, 3.5], &[0.75, 0.25]),
                discrete(&[-2.0, 1.0], &[0.5, 0.5]),
                discrete(&[-2.0, 0.5, 1.0], &[0.5, 0.25, 0.25]),
                discrete(&[-3.0, 1.0], &[0.75, 0.25]),
            ]),
        ),
        (
            "shifted-6",
            zero(vec![
                discrete(&[-0.25, 0.75, 1.75], &[0.25, 0.5, 0.25]),
                discrete(&[-1.0, 1.0], &[0.25, 0.75]),
                discrete(&[-1.25, -0.25, 0.75], &[0.25, 0.5, 0.25]),
                discrete(&[-1.5, -0.5, 0.5], &[0.25, 0.5, 0.25]),
                discrete(&[-2.0, -1.0, 0.0], &[0.25, 0.5, 0.25]),
                discrete(&[-2.5, -1.5, -0.5], &[0.25, 0.5, 0.25]),
            ]),
        ),
    ]
}

/// Instances for the incentive-compatible mechanism: a random default
/// `{1/16, 1}` that is better than every arm in expectation, and arms on
/// `{−1, 2}` with decreasing means, each dominating the next.
pub fn bic_set() -> Vec<(&'static str, Instance)> {
    let default = || discrete(&[0.0625, 1.0], &[0.5, 0.5]);
    let arms = |ps: &[f64]| ps.iter().map(|&p| RewardPrior::two_point(-1.0, 2.0, p).expect("valid")).collect();
    vec![
        ("bic-2", Instance::new(arms(&[0.45, 0.375]), default()).expect("valid instance")),
        ("bic-3", Instance::new(arms(&[0.45, 0.4, 0.375]), default()).expect("valid instance")),
        ("bic-4", Instance::new(arms(&[0.5, 0.45, 0.4, 0.375]), default()).expect("valid instance")),
    ]
}

/// Every named instance with discrete, bounded priors.
pub fn standard_set() -> Vec<(&'static str, Instance)> {
    let mut all = vec![("example-one-discretized", example_one_discretized())];
    all.extend(welfare_set());
    all.extend(bic_set());
    all
}

pub fn by_name(name: &str) -> Option<Instance> {
    match name {
        "example-one" => Some(example_one()),
        "claim" => claim_instance(0.01).ok(),
        _ => standard_set().into_iter().find(|(n, _)| *n == name).map(|(_, i)| i),
    }
}
