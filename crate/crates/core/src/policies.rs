//! Policy constructors for the goal MDP.
//!
//! - [`Ogp`]: the index policy. Mix any positive arm (the lowest index) with
//!   the unobserved negative arm of highest mean; play positive arms alone
//!   once no negative arm is left.
//! - [`OrderedPolicy`]: fixed priority orders over the positive and the
//!   negative arms.
//! - [`random_pvalid`]: uniformly random P-valid tables for property tests.
//! - [`ConjectureIndex`]: an experimental index for unordered priors.

use std::cell::Cell;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gmdp::{
    is_terminal, pvalid_actions, Action, Decision, Policy, PolicyTable, StateSet, MAX_TABLE_ARMS,
};
use crate::instance::Instance;

/// The optimal GMDP policy for stochastically ordered negative arms.
///
/// Construction sorts the negative arms by decreasing mean once. Queries on
/// an arbitrary state scan the sorted lists for the first member; play-outs
/// go through [`OgpWalk`], which only moves cursors forward.
#[derive(Debug, Clone)]
pub struct Ogp {
    k: usize,
    /// Positive arms in increasing index order.
    above: Vec<usize>,
    /// Negative arms by decreasing mean, ties by index.
    neg: Vec<usize>,
}

impl Ogp {
    pub fn new(instance: &Instance) -> Self {
        Self { k: instance.k(), above: instance.above().to_vec(), neg: instance.neg_by_decreasing_mean() }
    }

    /// OGP for arm means `means` against an arbitrary threshold. Arms with
    /// mean at or below `threshold` count as negative.
    pub fn with_threshold(means: &[f64], threshold: f64) -> Self {
        let above = (0..means.len()).filter(|&i| means[i] > threshold).collect();
        let mut neg: Vec<usize> = (0..means.len()).filter(|&i| means[i] <= threshold).collect();
        neg.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
        Self { k: means.len(), above, neg }
    }

    pub fn above(&self) -> &[usize] {
        &self.above
    }

    /// Negative arms by decreasing mean.
    pub fn neg(&self) -> &[usize] {
        &self.neg
    }

    /// The action at an arbitrary state, or `None` if it is terminal.
    pub fn action(&self, s: StateSet) -> Option<Action> {
        let i = *self.above.iter().find(|&&i| s.contains(i))?;
        Some(match self.neg.iter().find(|&&j| s.contains(j)) {
            Some(&j) => Action::Mix { above: i, neg: j },
            None => Action::Single(i),
        })
    }

    /// Cursor for a single play-out starting from the full arm set.
    pub fn walk(&self) -> OgpWalk<'_> {
        OgpWalk {
            ogp: self,
            unobserved: vec![true; self.k],
            above_pos: 0,
            neg_pos: 0,
            queries: Cell::new(0),
            steps: Cell::new(0),
        }
    }
}

impl Policy for Ogp {
    fn decide(&self, s: StateSet) -> Option<Decision> {
        Some(self.action(s).map_or(Decision::Terminal, Decision::Play))
    }
}

/// Incremental OGP play-out over any number of arms.
///
/// Arms only ever leave the unobserved set, so both cursors move forward
/// monotonically: a full play-out costs `O(K)` cursor steps in total.
#[derive(Debug)]
pub struct OgpWalk<'a> {
    ogp: &'a Ogp,
    unobserved: Vec<bool>,
    above_pos: usize,
    neg_pos: usize,
    queries: Cell<u64>,
    steps: Cell<u64>,
}

impl OgpWalk<'_> {
    /// Current action, or `None` once the walk reaches a terminal state.
    pub fn next_action(&mut self) -> Option<Action> {
        self.queries.set(self.queries.get() + 1);
        while self.above_pos < self.ogp.above.len() && !self.unobserved[self.ogp.above[self.above_pos]] {
            self.above_pos += 1;
            self.steps.set(self.steps.get() + 1);
        }
        while self.neg_pos < self.ogp.neg.len() && !self.unobserved[self.ogp.neg[self.neg_pos]] {
            self.neg_pos += 1;
            self.steps.set(self.steps.get() + 1);
        }
        let &i = self.ogp.above.get(self.above_pos)?;
        Some(match self.ogp.neg.get(self.neg_pos) {
            Some(&j) => Action::Mix { above: i, neg: j },
            None => Action::Single(i),
        })
    }

    pub fn observe(&mut self, arm: usize) {
        self.unobserved[arm] = false;
    }

    pub fn is_unobserved(&self, arm: usize) -> bool {
        self.unobserved[arm]
    }

    /// Number of `next_action` calls so far.
    pub fn queries(&self) -> u64 {
        self.queries.get()
    }

    /// Total cursor advances so far.
    pub fn cursor_steps(&self) -> u64 {
        self.steps.get()
    }
}

/// Policy with fixed priority orders: `left` over the positive arms and
/// `right` over the negative arms. In every state it mixes the
/// highest-priority unobserved positive arm with the highest-priority
/// unobserved negative arm.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedPolicy {
    left: Vec<usize>,
    right: Vec<usize>,
}

impl OrderedPolicy {
    pub fn new(instance: &Instance, left: Vec<usize>, right: Vec<usize>) -> Result<Self> {
        let is_perm = |order: &[usize], set: &[usize]| {
            let mut a = order.to_vec();
            a.sort_unstable();
            a == set
        };
        if !is_perm(&left, instance.above()) {
            return Err(Error::Config(format!("{left:?} is not a permutation of the positive arms")));
        }
        if !is_perm(&right, instance.neg()) {
            return Err(Error::Config(format!("{right:?} is not a permutation of the negative arms")));
        }
        Ok(Self { left, right })
    }

    pub fn action(&self, s: StateSet) -> Option<Action> {
        let i = *self.left.iter().find(|&&i| s.contains(i))?;
        Some(match self.right.iter().find(|&&j| s.contains(j)) {
            Some(&j) => Action::Mix { above: i, neg: j },
            None => Action::Single(i),
        })
    }
}

impl Policy for OrderedPolicy {
    fn decide(&self, s: StateSet) -> Option<Decision> {
        Some(self.action(s).map_or(Decision::Terminal, Decision::Play))
    }
}

/// A table assigning a uniformly random P-valid action to every
/// non-terminal state; deterministic in `seed`.
pub fn random_pvalid(instance: &Instance, seed: u64) -> Result<PolicyTable> {
    let k = instance.k();
    if k > MAX_TABLE_ARMS {
        return Err(Error::TooManyArms { k, limit: MAX_TABLE_ARMS });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = PolicyTable::new(k)?;
    for bits in 0..(1u64 << k) {
        let s = StateSet::from_bits(bits);
        let decision = if is_terminal(instance, s) {
            Decision::Terminal
        } else {
            let actions = pvalid_actions(instance, s);
            Decision::Play(*actions.choose(&mut rng).expect("non-terminal state has an action"))
        };
        table.set(s, decision);
    }
    Ok(table)
}

/// Experimental index for priors that are not stochastically ordered.
///
/// For each unobserved negative arm `j` of state `U` it scores
/// `Pr(X_j > θ) · E[max_{l ∈ U} X_l − θ | X_j > θ] / |μ_j − θ|`
/// exactly by enumeration, and mixes the lowest-index positive arm with the
/// best-scoring one (ties to the lowest index). Only discrete priors are
/// supported.
#[derive(Debug, Clone)]
pub struct ConjectureIndex<'a> {
    instance: &'a Instance,
    atoms: Vec<Vec<(f64, f64)>>,
}

impl<'a> ConjectureIndex<'a> {
    pub fn new(instance: &'a Instance) -> Result<Self> {
        let atoms = instance
            .arms()
            .iter()
            .enumerate()
            .map(|(i, a)| a.atoms().ok_or_else(|| Error::Unsupported(format!("arm {i} is not discrete"))))
            .collect::<Result<_>>()?;
        Ok(Self { instance, atoms })
    }

    /// The index of negative arm `j` in state `s`.
    pub fn score(&self, s: StateSet, j: usize) -> f64 {
        let theta = self.instance.threshold();
        let cond: Vec<(f64, f64)> = self.atoms[j].iter().copied().filter(|&(v, _)| v > theta).collect();
        let p_pos: f64 = cond.iter().map(|a| a.1).sum();
        if p_pos == 0.0 {
            return 0.0;
        }
        let cond: Vec<(f64, f64)> = cond.into_iter().map(|(v, p)| (v, p / p_pos)).collect();
        let others: Vec<usize> = s.iter().filter(|&l| l != j).collect();
        let mut grid: Vec<f64> = cond.iter().map(|a| a.0).collect();
        for &l in &others {
            grid.extend(self.atoms[l].iter().map(|a| a.0));
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let cdf = |atoms: &[(f64, f64)], x: f64| -> f64 {
            atoms.iter().filter(|a| a.0 <= x).map(|a| a.1).sum::<f64>().min(1.0)
        };
        let mut expectation = 0.0;
        let mut previous = 0.0;
        for &v in &grid {
            let joint = cdf(&cond, v) * others.iter().map(|&l| cdf(&self.atoms[l], v)).product::<f64>();
            expectation += (v - theta) * (joint - previous);
            previous = joint;
        }
        p_pos * expectation / self.instance.centered_mean(j).abs()
    }

    pub fn action(&self, s: StateSet) -> Option<Action> {
        let i = s.above(self.instance).next()?;
        let mut best: Option<(usize, f64)> = None;
        for j in s.neg(self.instance) {
            let score = self.score(s, j);
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((j, score));
            }
        }
        Some(match best {
            Some((j, _)) => Action::Mix { above: i, neg: j },
            None => Action::Single(i),
        })
    }
}

impl Policy for ConjectureIndex<'_> {
    fn decide(&self, s: StateSet) -> Option<Decision> {
        Some(self.action(s).map_or(Decision::Terminal, Decision::Play))
    }
}

/// Declarative description of a policy.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Ogp,
    Ordered { left: Vec<usize>, right: Vec<usize> },
    RandomPValid { seed: u64 },
    ConjectureIndex,
}

impl PolicySpec {
    /// Lazy evaluator for this policy on `instance`.
    pub fn build<'a>(&self, instance: &'a Instance) -> Result<Box<dyn Policy + 'a>> {
        Ok(match self {
            PolicySpec::Ogp => Box::new(Ogp::new(instance)),
            PolicySpec::Ordered { left, right } => {
                Box::new(OrderedPolicy::new(instance, left.clone(), right.clone())?)
            }
            PolicySpec::RandomPValid { seed } => Box::new(random_pvalid(instance, *seed)?),
            PolicySpec::ConjectureIndex => Box::new(ConjectureIndex::new(instance)?),
        })
    }

    pub fn materialize(&self, instance: &Instance) -> Result<PolicyTable> {
        PolicyTable::materialize(instance.k(), &self.build(instance)?)
    }
}
