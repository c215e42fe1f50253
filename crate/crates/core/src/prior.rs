//! One-dimensional reward priors.
//!
//! A [`RewardPrior`] is the distribution of an arm's static reward. Four
//! families are supported: point masses, two-point laws with one negative and
//! one positive atom, general finite discrete laws, and Gaussians that share a
//! common variance. The discrete families are bounded and admit exact
//! evaluation of every quantity the planner needs; the Gaussian family is
//! sampled or discretized.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal as NormalSampler};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Tolerance on probability vectors summing to one.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Tolerance used when comparing CDFs during a dominance scan.
const DOMINANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    PointMass { value: f64 },
    /// Atom `low < 0` with probability `1 - p_high`, atom `high > 0` with `p_high`.
    TwoPoint { low: f64, high: f64, p_high: f64 },
    /// Strictly increasing `values`, strictly positive `probs`.
    FiniteDiscrete { values: Vec<f64>, probs: Vec<f64> },
    Gaussian { mean: f64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardPrior {
    family: Family,
}

impl RewardPrior {
    pub fn point_mass(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidPrior(format!("point mass at {value}")));
        }
        Ok(Self { family: Family::PointMass { value } })
    }

    pub fn two_point(low: f64, high: f64, p_high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite()) || !(low < 0.0 && 0.0 < high) {
            return Err(Error::InvalidPrior(format!(
                "two-point support needs low < 0 < high, got ({low}, {high})"
            )));
        }
        if !(p_high > 0.0 && p_high < 1.0) {
            return Err(Error::InvalidPrior(format!(
                "two-point probability must lie in (0, 1), got {p_high}"
            )));
        }
        Ok(Self { family: Family::TwoPoint { low, high, p_high } })
    }

    pub fn finite_discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::InvalidPrior(format!(
                "finite discrete law needs equally many values and probabilities ({} vs {})",
                values.len(),
                probs.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPrior("non-finite support value".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPrior("support values must be strictly increasing".into()));
        }
        if probs.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::InvalidPrior("every probability must lie in (0, 1]".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidPrior(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { family: Family::FiniteDiscrete { values, probs } })
    }

    pub fn gaussian(mean: f64, sigma: f64) -> Result<Self> {
        if !mean.is_finite() || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidPrior(format!("gaussian({mean}, {sigma})")));
        }
        Ok(Self { family: Family::Gaussian { mean, sigma } })
    }

    /// Builds a finite law from `(value, weight)` pairs: merges duplicates,
    /// drops zero weights and renormalizes.
    pub fn from_weighted_atoms(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        atoms.retain(|&(_, w)| w > 0.0);
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += w,
                _ => merged.push((v, w)),
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum();
        if merged.is_empty() || total.is_nan() || total <= 0.0 {
            return Err(Error::InvalidPrior("no positive weight".into()));
        }
        if merged.len() == 1 {
            return Self::point_mass(merged[0].0);
        }
        let (values, probs) = merged.into_iter().map(|(v, w)| (v, w / total)).unzip();
        Self::finite_discrete(values, probs)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::PointMass { .. } => "point",
            Family::TwoPoint { .. } => "two_point",
            Family::FiniteDiscrete { .. } => "discrete",
            Family::Gaussian { .. } => "gaussian",
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self.family, Family::Gaussian { .. })
    }

    pub fn mean(&self) -> f64 {
        match &self.family {
            Family::PointMass { value } => *value,
            Family::TwoPoint { low, high, p_high } => p_high * high + (1.0 - p_high) * low,
            Family::FiniteDiscrete { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| v * p).sum()
            }
            Family::Gaussian { mean, .. } => *mean,
        }
    }

    /// `Pr(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.family {
            Family::Gaussian { mean, sigma } => std_normal_cdf((x - mean) / sigma),
            _ => self.atoms_iter().filter(|&(v, _)| v <= x).map(|(_, p)| p).sum::<f64>().min(1.0),
        }
    }

    /// `Pr(X < x)`.
    pub fn prob_below(&self, x: f64) -> f64 {
        match &self.family {
            Family::Gaussian { .. } => self.cdf(x),
            _ => self.atoms_iter().filter(|&(v, _)| v < x).map(|(_, p)| p).sum::<f64>().min(1.0),
        }
    }

    /// `Pr(X > x)`.
    pub fn prob_above(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    pub fn prob_positive(&self) -> f64 {
        self.prob_above(0.0)
    }

    /// `H` with `Pr(|X| <= H) = 1`, or `None` for unbounded families.
    pub fn support_bound(&self) -> Option<f64> {
        match &self.family {
            Family::Gaussian { .. } => None,
            _ => Some(self.atoms_iter().map(|(v, _)| v.abs()).fold(0.0, f64::max)),
        }
    }

    /// Atoms of a discrete law in increasing order; `None` for Gaussians.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        self.is_discrete().then(|| self.atoms_iter().collect())
    }

    fn atoms_iter(&self) -> Box<dyn Iterator<Item = (f64, f64)> + '_> {
        match &self.family {
            Family::PointMass { value } => Box::new(std::iter::once((*value, 1.0))),
            Family::TwoPoint { low, high, p_high } => {
                Box::new([(*low, 1.0 - p_high), (*high, *p_high)].into_iter())
            }
            Family::FiniteDiscrete { values, probs } => {
                Box::new(values.iter().copied().zip(probs.iter().copied()))
            }
            Family::Gaussian { .. } => Box::new(std::iter::empty()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.family {
            Family::PointMass { value } => *value,
            Family::TwoPoint { low, high, p_high } => {
                if rng.random::<f64>() < *p_high {
                    *high
                } else {
                    *low
                }
            }
            Family::FiniteDiscrete { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("non-empty support")
            }
            Family::Gaussian { mean, sigma } => {
                NormalSampler::new(*mean, *sigma).expect("validated parameters").sample(rng)
            }
        }
    }

    /// First-order stochastic dominance: `Pr(self >= x) >= Pr(other >= x)` for all `x`.
    ///
    /// Decided exactly for pairs of discrete laws (CDF scan over the merged
    /// support) and for Gaussian pairs (equal variances compare by mean,
    /// unequal variances never dominate). Gaussian against discrete is
    /// reported as undecidable.
    pub fn dominates(&self, other: &RewardPrior) -> Result<bool> {
        match (&self.family, &other.family) {
            (Family::Gaussian { mean: m1, sigma: s1 }, Family::Gaussian { mean: m2, sigma: s2 }) => {
                if s1 == s2 {
                    Ok(m1 >= m2)
                } else {
                    Ok(false)
                }
            }
            (Family::Gaussian { .. }, _) | (_, Family::Gaussian { .. }) => {
                Err(Error::UndecidableDominance { left: self.to_string(), right: other.to_string() })
            }
            _ => {
                let mut grid: Vec<f64> =
                    self.atoms_iter().chain(other.atoms_iter()).map(|(v, _)| v).collect();
                grid.sort_by(f64::total_cmp);
                grid.dedup();
                Ok(grid.iter().all(|&x| self.cdf(x) <= other.cdf(x) + DOMINANCE_TOL))
            }
        }
    }

    /// Projects a Gaussian onto `points` equally spaced atoms spanning
    /// `mean ± width·sigma`; each atom takes the normal mass of its cell and
    /// the end cells absorb the tails. The grid is symmetric, so the mean is
    /// preserved. Discrete priors are returned unchanged.
    pub fn discretize(&self, points: usize, width: f64) -> Result<RewardPrior> {
        let Family::Gaussian { mean, sigma } = self.family else {
            return Ok(self.clone());
        };
        if points < 2 || width.is_nan() || width <= 0.0 {
            return Err(Error::InvalidPrior(format!("discretization grid {points} x {width}")));
        }
        let step = 2.0 * width / (points - 1) as f64;
        let zs: Vec<f64> = (0..points).map(|k| -width + step * k as f64).collect();
        let mut atoms = Vec::with_capacity(points);
        for (k, &z) in zs.iter().enumerate() {
            let lo = if k == 0 { 0.0 } else { std_normal_cdf(z - step / 2.0) };
            let hi = if k + 1 == points { 1.0 } else { std_normal_cdf(z + step / 2.0) };
            atoms.push((mean + sigma * z, hi - lo));
        }
        // Enforce exact symmetry of the cell masses before normalizing.
        for k in 0..points / 2 {
            let w = 0.5 * (atoms[k].1 + atoms[points - 1 - k].1);
            atoms[k].1 = w;
            atoms[points - 1 - k].1 = w;
        }
        RewardPrior::from_weighted_atoms(atoms)
    }
}

impl fmt::Display for RewardPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::PointMass { value } => write!(f, "point({value})"),
            Family::TwoPoint { low, high, p_high } => write!(f, "two_point({low}, {high}, {p_high})"),
            Family::FiniteDiscrete { values, .. } => write!(f, "discrete[{} atoms]", values.len()),
            Family::Gaussian { mean, sigma } => write!(f, "gaussian({mean}, {sigma})"),
        }
    }
}

pub fn std_normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}
