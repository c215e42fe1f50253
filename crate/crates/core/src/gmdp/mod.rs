//! The auxiliary goal MDP over sets of unobserved arms.
//!
//! A state is the set of arms not yet explored. In a non-terminal state the
//! planner picks a portfolio whose prior expected reward clears the
//! threshold; Nature draws one arm from it and that arm leaves the state.
//! States with no arm above the threshold are terminal and pay the terminal
//! reward (see [`reward`]).

mod eval;
pub mod reward;
pub(crate) mod table;

use std::fmt;

use rand::Rng;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::instance::Instance;

pub use eval::{audit_policy, q_table, q_value, reach_probabilities, w_value, w_value_recursive};
pub use reward::{terminal_reward, TerminalMode, TerminalRewards};
pub use table::{PolicyTable, MAX_TABLE_ARMS};

/// Tolerance of the prior MIR inequality.
pub const MIR_TOL: f64 = 1e-12;

/// Tolerance on portfolio weights summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Largest `K` representable by [`StateSet`].
pub const MAX_LATTICE_ARMS: usize = 63;

/// A set of unobserved arms, as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct StateSet(u64);

impl StateSet {
    pub const EMPTY: StateSet = StateSet(0);

    /// All of `0..k`. Panics if `k > 63`.
    pub fn full(k: usize) -> Self {
        assert!(k <= MAX_LATTICE_ARMS, "state sets hold at most {MAX_LATTICE_ARMS} arms");
        StateSet(if k == 0 { 0 } else { u64::MAX >> (64 - k) })
    }

    pub fn from_bits(bits: u64) -> Self {
        StateSet(bits)
    }

    pub fn from_arms<I: IntoIterator<Item = usize>>(arms: I) -> Self {
        StateSet(arms.into_iter().fold(0, |acc, i| acc | (1u64 << i)))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        i < 64 && self.0 & (1u64 << i) != 0
    }

    pub fn without(self, i: usize) -> Self {
        StateSet(self.0 & !(1u64 << i))
    }

    pub fn with(self, i: usize) -> Self {
        StateSet(self.0 | (1u64 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: StateSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }

    pub fn above(self, instance: &Instance) -> impl Iterator<Item = usize> + '_ {
        self.iter().filter(move |&i| instance.is_above(i))
    }

    pub fn neg(self, instance: &Instance) -> impl Iterator<Item = usize> + '_ {
        self.iter().filter(move |&i| !instance.is_above(i))
    }

    pub fn has_above(self, instance: &Instance) -> bool {
        self.above(instance).next().is_some()
    }

    pub fn has_neg(self, instance: &Instance) -> bool {
        self.neg(instance).next().is_some()
    }
}

impl fmt::Display for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateSet{self}")
    }
}

/// An element of `A ∪ {default}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Choice {
    Default,
    Arm(usize),
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::Default => write!(f, "default"),
            Choice::Arm(i) => write!(f, "{i}"),
        }
    }
}

impl Serialize for Choice {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Choice::Default => serializer.serialize_str("default"),
            Choice::Arm(i) => serializer.serialize_u64(*i as u64),
        }
    }
}

/// A sparse probability vector over arms and the default.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    weights: Vec<(Choice, f64)>,
}

impl Portfolio {
    pub fn new(weights: Vec<(Choice, f64)>) -> Result<Self> {
        let mut merged: Vec<(Choice, f64)> = Vec::with_capacity(weights.len());
        for (c, w) in weights {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidInstance(format!("portfolio weight {w} outside [0, 1]")));
            }
            if w == 0.0 {
                continue;
            }
            match merged.iter_mut().find(|(c2, _)| *c2 == c) {
                Some(slot) => slot.1 += w,
                None => merged.push((c, w)),
            }
        }
        let total: f64 = merged.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInstance(format!("portfolio weights sum to {total}")));
        }
        merged.sort_by_key(|(c, _)| *c);
        Ok(Self { weights: merged })
    }

    pub fn single(choice: Choice) -> Self {
        Self { weights: vec![(choice, 1.0)] }
    }

    /// Two-point portfolio; `w_first + w_second` must be 1 up to rounding.
    pub(crate) fn pair(first: Choice, w_first: f64, second: Choice, w_second: f64) -> Self {
        let mut weights = vec![(first, w_first), (second, w_second)];
        weights.retain(|(_, w)| *w > 0.0);
        weights.sort_by_key(|(c, _)| *c);
        Self { weights }
    }

    pub fn weights(&self) -> &[(Choice, f64)] {
        &self.weights
    }

    pub fn weight(&self, choice: Choice) -> f64 {
        self.weights.iter().find(|(c, _)| *c == choice).map_or(0.0, |(_, w)| *w)
    }

    pub fn support(&self) -> impl Iterator<Item = Choice> + '_ {
        self.weights.iter().map(|(c, _)| *c)
    }

    /// `Σ p(a) · value(a)`.
    pub fn expectation(&self, mut value: impl FnMut(Choice) -> f64) -> f64 {
        self.weights.iter().map(|&(c, w)| w * value(c)).sum()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Choice {
        if self.weights.len() == 1 {
            return self.weights[0].0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(c, w) in &self.weights {
            acc += w;
            if u < acc {
                return c;
            }
        }
        self.weights.last().expect("non-empty portfolio").0
    }
}

impl Serialize for Portfolio {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.weights.len()))?;
        for (c, w) in &self.weights {
            map.serialize_entry(&c.to_string(), w)?;
        }
        map.end()
    }
}

/// A P-valid action: one positive arm alone, or a positive arm mixed with a
/// negative one at the boundary of the MIR constraint.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Action {
    Single(usize),
    Mix { above: usize, neg: usize },
}

impl Action {
    /// The `(i, j)` pair; `i == j` for singles.
    pub fn pair(self) -> (usize, usize) {
        match self {
            Action::Single(i) => (i, i),
            Action::Mix { above, neg } => (above, neg),
        }
    }

    pub fn from_pair(i: usize, j: usize) -> Self {
        if i == j {
            Action::Single(i)
        } else {
            Action::Mix { above: i, neg: j }
        }
    }

    /// Probability of realizing the positive arm and the negative arm.
    pub fn split(self, instance: &Instance) -> (f64, f64) {
        match self {
            Action::Single(_) => (1.0, 0.0),
            Action::Mix { above, neg } => {
                mix_weights(instance.centered_mean(above), instance.centered_mean(neg))
            }
        }
    }

    pub fn portfolio(self, instance: &Instance) -> Portfolio {
        match self {
            Action::Single(i) => Portfolio::single(Choice::Arm(i)),
            Action::Mix { above, neg } => {
                let (wi, wj) = self.split(instance);
                Portfolio::pair(Choice::Arm(above), wi, Choice::Arm(neg), wj)
            }
        }
    }
}

/// What a policy does in a state.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Decision {
    Terminal,
    Play(Action),
}

/// A stationary GMDP policy, possibly defined lazily.
pub trait Policy {
    /// `None` when the policy has no entry for `s`.
    fn decide(&self, s: StateSet) -> Option<Decision>;
}

impl<P: Policy + ?Sized> Policy for &P {
    fn decide(&self, s: StateSet) -> Option<Decision> {
        (**self).decide(s)
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn decide(&self, s: StateSet) -> Option<Decision> {
        (**self).decide(s)
    }
}

/// Weights `(w_high, w_low)` of the two-arm portfolio with expectation
/// exactly at the threshold, given centered values `high > 0 > low`.
pub fn mix_weights(high: f64, low: f64) -> (f64, f64) {
    let gap = high - low;
    (-low / gap, high / gap)
}

/// The P-valid portfolio mixing arm `i` (above) with arm `j` (neg), or arm
/// `i` alone when `i == j`.
pub fn mix_portfolio(instance: &Instance, i: usize, j: usize) -> Result<Portfolio> {
    if i >= instance.k() || j >= instance.k() || !instance.is_above(i) {
        return Err(Error::InvalidMix { i, j });
    }
    if i != j && instance.is_above(j) {
        return Err(Error::InvalidMix { i, j });
    }
    Ok(Action::from_pair(i, j).portfolio(instance))
}

/// A state is terminal iff no unobserved arm lies above the threshold.
pub fn is_terminal(instance: &Instance, s: StateSet) -> bool {
    !s.has_above(instance)
}

/// Whether `p` meets the MIR inequality under prior information.
pub fn is_mir_prior(instance: &Instance, s: StateSet, p: &Portfolio) -> Result<bool> {
    if p.support().any(|c| matches!(c, Choice::Arm(i) if !s.contains(i))) {
        return Err(Error::InvalidSupport { state: s });
    }
    let value = p.expectation(|c| match c {
        Choice::Default => instance.threshold(),
        Choice::Arm(i) => instance.mean(i),
    });
    Ok(value >= instance.threshold() - MIR_TOL)
}

/// Checks both clauses of P-validity for `action` at `s`.
pub fn check_pvalid(instance: &Instance, s: StateSet, action: Action) -> Result<()> {
    let fail = |reason: String| Err(Error::NotPValid { state: s, reason });
    let (i, j) = action.pair();
    if !s.contains(i) || !s.contains(j) {
        return fail(format!("action {action:?} uses an observed arm"));
    }
    if !instance.is_above(i) {
        return fail(format!("arm {i} is not above the threshold"));
    }
    let has_neg = s.has_neg(instance);
    match action {
        Action::Single(_) if has_neg => fail("negative arms remain, a mix is required".into()),
        Action::Mix { neg, .. } if !has_neg || instance.is_above(neg) => {
            fail(format!("arm {neg} is not a negative arm of the state"))
        }
        _ => {
            if is_mir_prior(instance, s, &action.portfolio(instance))? {
                Ok(())
            } else {
                fail("portfolio violates the MIR inequality".into())
            }
        }
    }
}

/// Draws the realized arm of `p` and the successor state.
pub fn transition<R: Rng + ?Sized>(s: StateSet, p: &Portfolio, rng: &mut R) -> (Choice, StateSet) {
    match p.draw(rng) {
        Choice::Arm(i) => (Choice::Arm(i), s.without(i)),
        Choice::Default => (Choice::Default, s),
    }
}

/// Every P-valid action available at `s`, in lexicographic `(i, j)` order.
pub fn pvalid_actions(instance: &Instance, s: StateSet) -> Vec<Action> {
    let above: Vec<usize> = s.above(instance).collect();
    let neg: Vec<usize> = s.neg(instance).collect();
    if neg.is_empty() {
        above.into_iter().map(Action::Single).collect()
    } else {
        above
            .iter()
            .flat_map(|&i| neg.iter().map(move |&j| Action::Mix { above: i, neg: j }))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::RewardPrior;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn example_one() -> Instance {
        Instance::with_zero_default(
            [2.0, 1.0, -1.0, -2.0].iter().map(|&m| RewardPrior::gaussian(m, 1.0).unwrap()).collect(),
        )
        .unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn mix_portfolio_example_one() {
        let inst = example_one();
        let p = mix_portfolio(&inst, 0, 2).unwrap();
        assert!(close(p.weight(Choice::Arm(0)), 1.0 / 3.0));
        assert!(close(p.weight(Choice::Arm(2)), 2.0 / 3.0));
        let single = mix_portfolio(&inst, 0, 0).unwrap();
        assert_eq!(single.weights(), &[(Choice::Arm(0), 1.0)]);
    }

    #[test]
    fn mix_portfolio_derived_weights() {
        let inst = Instance::with_zero_default(vec![
            RewardPrior::point_mass(0.2).unwrap(),
            RewardPrior::point_mass(-0.4).unwrap(),
        ])
        .unwrap();
        let p = mix_portfolio(&inst, 0, 1).unwrap();
        assert!(close(p.weight(Choice::Arm(0)), 2.0 / 3.0));
        assert!(close(p.weight(Choice::Arm(1)), 1.0 / 3.0));
        assert!(close(p.expectation(|c| if let Choice::Arm(i) = c { inst.mean(i) } else { 0.0 }), 0.0));
    }

    #[test]
    fn mix_portfolio_rejects_neg_first_arm() {
        let inst = example_one();
        assert_eq!(mix_portfolio(&inst, 2, 3), Err(Error::InvalidMix { i: 2, j: 3 }));
        assert_eq!(mix_portfolio(&inst, 2, 2), Err(Error::InvalidMix { i: 2, j: 2 }));
        assert!(mix_portfolio(&inst, 0, 1).is_err());
    }

    #[test]
    fn terminal_states() {
        let inst = example_one();
        assert!(is_terminal(&inst, StateSet::from_arms([2, 3])));
        assert!(is_terminal(&inst, StateSet::EMPTY));
        assert!(!is_terminal(&inst, StateSet::from_arms([1, 3])));
    }

    #[test]
    fn mir_prior_checks() {
        let inst = example_one();
        let full = StateSet::full(4);
        assert!(is_mir_prior(&inst, full, &Portfolio::single(Choice::Default)).unwrap());
        assert!(is_mir_prior(&inst, full, &mix_portfolio(&inst, 0, 2).unwrap()).unwrap());
        assert!(!is_mir_prior(&inst, full, &Portfolio::single(Choice::Arm(2))).unwrap());
        let s = StateSet::from_arms([1, 2]);
        assert!(matches!(
            is_mir_prior(&inst, s, &Portfolio::single(Choice::Arm(0))),
            Err(Error::InvalidSupport { .. })
        ));
    }

    #[test]
    fn pvalid_audit() {
        let inst = example_one();
        let full = StateSet::full(4);
        assert!(check_pvalid(&inst, full, Action::Mix { above: 1, neg: 3 }).is_ok());
        assert!(check_pvalid(&inst, full, Action::Single(0)).is_err());
        assert!(check_pvalid(&inst, StateSet::from_arms([0, 1]), Action::Single(1)).is_ok());
        assert!(check_pvalid(&inst, StateSet::from_arms([0, 2]), Action::Mix { above: 1, neg: 2 }).is_err());
        for a in pvalid_actions(&inst, full) {
            check_pvalid(&inst, full, a).unwrap();
            assert!(a.portfolio(&inst).weights().len() <= 2);
        }
    }

    #[test]
    fn deterministic_transition() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = StateSet::from_arms([0, 1]);
        for _ in 0..10 {
            let (c, next) = transition(s, &Portfolio::single(Choice::Arm(0)), &mut rng);
            assert_eq!(c, Choice::Arm(0));
            assert_eq!(next, StateSet::from_arms([1]));
        }
    }

    #[test]
    fn transition_frequencies() {
        let inst = example_one();
        let p = mix_portfolio(&inst, 0, 2).unwrap();
        let s = StateSet::full(4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 1_000_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let (c, next) = transition(s, &p, &mut rng);
            assert_eq!(next.len(), 3);
            hits += usize::from(c == Choice::Arm(2));
        }
        let q = 2.0 / 3.0;
        let sd = (n as f64 * q * (1.0 - q)).sqrt();
        assert!((hits as f64 - n as f64 * q).abs() <= 3.0 * sd);
    }

    #[test]
    fn state_set_basics() {
        let s = StateSet::full(5);
        assert_eq!(s.len(), 5);
        assert_eq!(s.without(2).iter().collect::<Vec<_>>(), vec![0, 1, 3, 4]);
        assert_eq!(StateSet::full(63).len(), 63);
        assert_eq!(StateSet::from_arms([1, 3]).to_string(), "{1,3}");
        assert!(StateSet::from_arms([1]).is_subset(StateSet::from_arms([1, 3])));
    }
}
