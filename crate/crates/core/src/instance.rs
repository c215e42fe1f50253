//! Problem instances and random instance generators.

use rand::Rng;

use crate::error::{Error, Result};
use crate::prior::RewardPrior;

/// Arms whose mean is this close to the default's mean are rejected.
pub const MEAN_GAP_TOL: f64 = 1e-9;

const MAX_GENERATION_ATTEMPTS: usize = 1000;

/// `K` arms with independent priors plus a default arm.
///
/// The default arm's mean is the MIR threshold. Arms are split into `above`
/// (mean above the threshold) and `neg` (mean below it); no arm sits on the
/// threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    arms: Vec<RewardPrior>,
    default: RewardPrior,
    threshold: f64,
    means: Vec<f64>,
    above: Vec<usize>,
    neg: Vec<usize>,
}

impl Instance {
    pub fn new(arms: Vec<RewardPrior>, default: RewardPrior) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::InvalidInstance("an instance needs at least one arm".into()));
        }
        let threshold = default.mean();
        let means: Vec<f64> = arms.iter().map(RewardPrior::mean).collect();
        let mut above = Vec::new();
        let mut neg = Vec::new();
        for (i, &m) in means.iter().enumerate() {
            if (m - threshold).abs() < MEAN_GAP_TOL {
                return Err(Error::InvalidInstance(format!(
                    "arm {i} has mean {m}, within {MEAN_GAP_TOL} of the default mean {threshold}"
                )));
            }
            if m > threshold {
                above.push(i);
            } else {
                neg.push(i);
            }
        }
        Ok(Self { arms, default, threshold, means, above, neg })
    }

    /// Instance with a `PointMass(0)` default arm.
    pub fn with_zero_default(arms: Vec<RewardPrior>) -> Result<Self> {
        Self::new(arms, RewardPrior::point_mass(0.0)?)
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn arms(&self) -> &[RewardPrior] {
        &self.arms
    }

    pub fn arm(&self, i: usize) -> &RewardPrior {
        &self.arms[i]
    }

    pub fn default_arm(&self) -> &RewardPrior {
        &self.default
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.means[i]
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Mean of arm `i` relative to the threshold.
    pub fn centered_mean(&self, i: usize) -> f64 {
        self.means[i] - self.threshold
    }

    pub fn above(&self) -> &[usize] {
        &self.above
    }

    pub fn neg(&self) -> &[usize] {
        &self.neg
    }

    pub fn is_above(&self, i: usize) -> bool {
        self.means[i] > self.threshold
    }

    pub fn is_discrete(&self) -> bool {
        self.arms.iter().all(RewardPrior::is_discrete)
    }

    /// Largest support bound over the arms and the default, if all are bounded.
    pub fn support_bound(&self) -> Option<f64> {
        self.arms
            .iter()
            .chain(std::iter::once(&self.default))
            .map(RewardPrior::support_bound)
            .try_fold(0.0_f64, |acc, b| b.map(|b| acc.max(b)))
    }

    /// `neg` sorted by decreasing mean, ties by index.
    pub fn neg_by_decreasing_mean(&self) -> Vec<usize> {
        let mut order = self.neg.clone();
        order.sort_by(|&a, &b| self.means[b].total_cmp(&self.means[a]).then(a.cmp(&b)));
        order
    }

    /// Whether the `neg` arms are totally ordered by first-order dominance,
    /// consistently with their means.
    pub fn neg_stochastically_ordered(&self) -> Result<bool> {
        let order = self.neg_by_decreasing_mean();
        for w in order.windows(2) {
            if !self.arms[w[0]].dominates(&self.arms[w[1]])? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// One static realization of every arm's reward.
    pub fn sample_rewards<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.arms.iter().map(|p| p.sample(rng)).collect()
    }
}

/// Random instance families used by the generator.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyTemplate {
    /// Common-variance Gaussians with means uniform in `[-spread, spread]`.
    Gaussian { sigma: f64, spread: f64 },
    /// Common support `{low, high}`, `p_high` uniform in `[0.02, 0.98]`.
    TwoPoint { low: f64, high: f64 },
    /// Negative arms are shifts of one random `atoms`-point shape, so they are
    /// totally ordered by dominance; positive arms get independent shapes.
    ShiftedDiscrete { atoms: usize },
    /// Independent random shapes and scales for every arm; no ordering.
    Unordered { atoms: usize },
}

impl FamilyTemplate {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "gaussian" => Ok(Self::Gaussian { sigma: 1.0, spread: 2.0 }),
            "two_point" => Ok(Self::TwoPoint { low: -1.0, high: 2.0 }),
            "discrete" => Ok(Self::ShiftedDiscrete { atoms: 4 }),
            "unordered" => Ok(Self::Unordered { atoms: 3 }),
            other => Err(Error::Config(format!(
                "unknown family template `{other}` (expected gaussian, two_point, discrete or unordered)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::TwoPoint { .. } => "two_point",
            Self::ShiftedDiscrete { .. } => "discrete",
            Self::Unordered { .. } => "unordered",
        }
    }

    /// Whether generated instances are guaranteed to satisfy the ordering assumption.
    pub fn is_ordered(&self) -> bool {
        !matches!(self, Self::Unordered { .. })
    }
}

/// Draws a random instance with a `PointMass(0)` default and at least one
/// arm above the threshold. Ordered templates also guarantee the `neg` arms
/// are totally ordered by dominance.
pub fn generate_instance<R: Rng + ?Sized>(
    k: usize,
    template: &FamilyTemplate,
    rng: &mut R,
) -> Result<Instance> {
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let Some(arms) = draw_arms(k, template, rng)? else { continue };
        let Ok(instance) = Instance::with_zero_default(arms) else { continue };
        if instance.above().is_empty() {
            continue;
        }
        if template.is_ordered() && !instance.neg_stochastically_ordered()? {
            continue;
        }
        return Ok(instance);
    }
    Err(Error::GenerationFailed { attempts: MAX_GENERATION_ATTEMPTS })
}

fn draw_arms<R: Rng + ?Sized>(
    k: usize,
    template: &FamilyTemplate,
    rng: &mut R,
) -> Result<Option<Vec<RewardPrior>>> {
    let arms = match *template {
        FamilyTemplate::Gaussian { sigma, spread } => (0..k)
            .map(|_| RewardPrior::gaussian(rng.random_range(-spread..=spread), sigma))
            .collect::<Result<Vec<_>>>()?,
        FamilyTemplate::TwoPoint { low, high } => (0..k)
            .map(|_| RewardPrior::two_point(low, high, rng.random_range(0.02..=0.98)))
            .collect::<Result<Vec<_>>>()?,
        FamilyTemplate::ShiftedDiscrete { atoms } => {
            let Some(base) = centered_shape(atoms, 1.0, rng) else { return Ok(None) };
            let mut arms = Vec::with_capacity(k);
            for _ in 0..k {
                let shift = rng.random_range(-1.5..1.0);
                let shape = if shift > 0.0 && rng.random_bool(0.5) {
                    match centered_shape(atoms, rng.random_range(0.3..2.0), rng) {
                        Some(s) => s,
                        None => return Ok(None),
                    }
                } else {
                    base.clone()
                };
                arms.push(shifted(&shape, shift)?);
            }
            arms
        }
        FamilyTemplate::Unordered { atoms } => {
            let mut arms = Vec::with_capacity(k);
            for _ in 0..k {
                let scale = rng.random_range(0.2..3.0);
                let Some(shape) = centered_shape(atoms, scale, rng) else { return Ok(None) };
                arms.push(shifted(&shape, rng.random_range(-1.5..1.0))?);
            }
            arms
        }
    };
    Ok(Some(arms))
}

/// A random mean-zero law on `atoms` points with spread about `scale`.
fn centered_shape<R: Rng + ?Sized>(atoms: usize, scale: f64, rng: &mut R) -> Option<Vec<(f64, f64)>> {
    let atoms = atoms.max(2);
    let mut values: Vec<f64> = (0..atoms).map(|_| rng.random_range(-scale..scale)).collect();
    values.sort_by(f64::total_cmp);
    if values.windows(2).any(|w| w[1] - w[0] < 1e-6 * scale) {
        return None;
    }
    let weights: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mean: f64 = values.iter().zip(&probs).map(|(v, p)| v * p).sum();
    Some(values.into_iter().map(|v| v - mean).zip(probs).collect())
}

fn shifted(shape: &[(f64, f64)], shift: f64) -> Result<RewardPrior> {
    RewardPrior::from_weighted_atoms(shape.iter().map(|&(v, p)| (v + shift, p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn partitions_follow_threshold() {
        let arms = vec![
            RewardPrior::gaussian(2.0, 1.0).unwrap(),
            RewardPrior::gaussian(1.0, 1.0).unwrap(),
            RewardPrior::gaussian(-1.0, 1.0).unwrap(),
            RewardPrior::gaussian(-2.0, 1.0).unwrap(),
        ];
        let inst = Instance::with_zero_default(arms).unwrap();
        assert_eq!(inst.above(), &[0, 1]);
        assert_eq!(inst.neg(), &[2, 3]);
        assert!(inst.neg_stochastically_ordered().unwrap());
    }

    #[test]
    fn zero_mean_arm_is_rejected() {
        let arms = vec![RewardPrior::two_point(-1.0, 1.0, 0.5).unwrap()];
        assert!(matches!(Instance::with_zero_default(arms), Err(Error::InvalidInstance(_))));
        let arms = vec![RewardPrior::point_mass(1.0 + 1e-10).unwrap()];
        let default = RewardPrior::point_mass(1.0).unwrap();
        assert!(Instance::new(arms, default).is_err());
    }

    #[test]
    fn generated_gaussian_instance_is_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = FamilyTemplate::from_name("gaussian").unwrap();
        let inst = generate_instance(4, &t, &mut rng).unwrap();
        assert_eq!(inst.k(), 4);
        assert!(!inst.above().is_empty());
        let order = inst.neg_by_decreasing_mean();
        for (a, &i) in order.iter().enumerate() {
            for &j in &order[a..] {
                assert!(inst.arm(i).dominates(inst.arm(j)).unwrap());
            }
        }
    }

    #[test]
    fn single_arm_instances() {
        for name in ["gaussian", "two_point", "discrete", "unordered"] {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let inst = generate_instance(1, &FamilyTemplate::from_name(name).unwrap(), &mut rng).unwrap();
            assert_eq!(inst.k(), 1);
            assert_eq!(inst.above().len() + inst.neg().len(), 1);
        }
    }

    #[test]
    fn two_point_instances_are_totally_comparable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = FamilyTemplate::TwoPoint { low: -1.0, high: 1.0 };
        let inst = generate_instance(10, &t, &mut rng).unwrap();
        for a in inst.arms() {
            for b in inst.arms() {
                assert!(a.dominates(b).unwrap() || b.dominates(a).unwrap());
            }
        }
    }

    #[test]
    fn shifted_discrete_negatives_are_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = FamilyTemplate::ShiftedDiscrete { atoms: 5 };
        for _ in 0..20 {
            let inst = generate_instance(8, &t, &mut rng).unwrap();
            assert!(inst.neg_stochastically_ordered().unwrap());
            assert!(inst.is_discrete());
        }
    }

    #[test]
    fn zero_arms_is_a_config_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(generate_instance(0, &FamilyTemplate::from_name("gaussian").unwrap(), &mut rng).is_err());
    }
}
