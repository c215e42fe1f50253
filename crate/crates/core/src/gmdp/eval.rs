//! Policy evaluators: probability of full exploration, terminal reach
//! distributions and expected terminal reward.

use std::collections::{BTreeMap, HashMap};

use super::{check_pvalid, is_terminal, Action, Decision, Policy, StateSet, TerminalRewards};
use crate::error::{Error, Result};
use crate::instance::Instance;

/// The action `policy` plays at non-terminal `s`, checked for P-validity.
fn action_at<P: Policy + ?Sized>(instance: &Instance, policy: &P, s: StateSet) -> Result<Action> {
    match policy.decide(s) {
        None => Err(Error::IncompletePolicy { state: s }),
        Some(Decision::Terminal) => Err(Error::NotPValid {
            state: s,
            reason: "policy stops at a non-terminal state".into(),
        }),
        Some(Decision::Play(a)) => {
            check_pvalid(instance, s, a)?;
            Ok(a)
        }
    }
}

/// Successors of non-terminal `s` under `action`, with their probabilities.
fn successors(instance: &Instance, s: StateSet, action: Action) -> [(StateSet, f64); 2] {
    let (i, j) = action.pair();
    let (wi, wj) = action.split(instance);
    [(s.without(i), wi), (s.without(j), wj)]
}

/// Probability that `policy`, started at `s`, explores every arm.
pub fn q_value<P: Policy + ?Sized>(instance: &Instance, policy: &P, s: StateSet) -> Result<f64> {
    fn go<P: Policy + ?Sized>(
        instance: &Instance,
        policy: &P,
        s: StateSet,
        memo: &mut HashMap<StateSet, f64>,
    ) -> Result<f64> {
        if s.is_empty() {
            return Ok(1.0);
        }
        if is_terminal(instance, s) {
            return Ok(0.0);
        }
        if let Some(&q) = memo.get(&s) {
            return Ok(q);
        }
        let action = action_at(instance, policy, s)?;
        let mut q = 0.0;
        for (next, w) in successors(instance, s, action) {
            if w > 0.0 {
                q += w * go(instance, policy, next, memo)?;
            }
        }
        memo.insert(s, q);
        Ok(q)
    }
    go(instance, policy, s, &mut HashMap::new())
}

/// `Q(policy, s)` for every state, indexed by `s.bits()`. Needs a decision
/// at every non-terminal state.
pub fn q_table<P: Policy + ?Sized>(instance: &Instance, policy: &P) -> Result<Vec<f64>> {
    let k = instance.k();
    if k > super::MAX_TABLE_ARMS {
        return Err(Error::TooManyArms { k, limit: super::MAX_TABLE_ARMS });
    }
    let mut states: Vec<u64> = (0..1u64 << k).collect();
    states.sort_by_key(|b| b.count_ones());
    let mut q = vec![0.0; 1 << k];
    for bits in states {
        let s = StateSet::from_bits(bits);
        q[bits as usize] = if s.is_empty() {
            1.0
        } else if is_terminal(instance, s) {
            0.0
        } else {
            let action = action_at(instance, policy, s)?;
            successors(instance, s, action).iter().map(|&(next, w)| w * q[next.bits() as usize]).sum()
        };
    }
    Ok(q)
}

/// Distribution over the terminal states `policy` reaches from `s`.
///
/// Mass is pushed forward one layer of state cardinality at a time, so each
/// state is expanded once.
pub fn reach_probabilities<P: Policy + ?Sized>(
    instance: &Instance,
    policy: &P,
    s: StateSet,
) -> Result<BTreeMap<StateSet, f64>> {
    let mut terminal = BTreeMap::new();
    let mut layer: HashMap<StateSet, f64> = HashMap::from([(s, 1.0)]);
    while !layer.is_empty() {
        let mut next_layer: HashMap<StateSet, f64> = HashMap::new();
        let mut states: Vec<(StateSet, f64)> = layer.into_iter().collect();
        states.sort_by_key(|(st, _)| *st);
        for (state, mass) in states {
            if is_terminal(instance, state) {
                *terminal.entry(state).or_insert(0.0) += mass;
                continue;
            }
            let action = action_at(instance, policy, state)?;
            for (next, w) in successors(instance, state, action) {
                if w > 0.0 {
                    *next_layer.entry(next).or_insert(0.0) += mass * w;
                }
            }
        }
        layer = next_layer;
    }
    Ok(terminal)
}

/// Expected terminal reward of `policy` from `s`: the reach distribution
/// integrated against the terminal rewards.
pub fn w_value<P: Policy + ?Sized>(
    instance: &Instance,
    policy: &P,
    s: StateSet,
    rewards: &TerminalRewards,
) -> Result<f64> {
    Ok(reach_probabilities(instance, policy, s)?
        .into_iter()
        .map(|(t, p)| p * rewards.reward(t))
        .sum())
}

/// Same value as [`w_value`], computed by the backward recursion
/// `W(s) = Σ_a p(a) W(s \ {a})` with memoization.
pub fn w_value_recursive<P: Policy + ?Sized>(
    instance: &Instance,
    policy: &P,
    s: StateSet,
    rewards: &TerminalRewards,
) -> Result<f64> {
    fn go<P: Policy + ?Sized>(
        instance: &Instance,
        policy: &P,
        s: StateSet,
        rewards: &TerminalRewards,
        memo: &mut HashMap<StateSet, f64>,
    ) -> Result<f64> {
        if is_terminal(instance, s) {
            return Ok(rewards.reward(s));
        }
        if let Some(&w) = memo.get(&s) {
            return Ok(w);
        }
        let action = action_at(instance, policy, s)?;
        let mut w = 0.0;
        for (next, p) in successors(instance, s, action) {
            if p > 0.0 {
                w += p * go(instance, policy, next, rewards, memo)?;
            }
        }
        memo.insert(s, w);
        Ok(w)
    }
    go(instance, policy, s, rewards, &mut HashMap::new())
}

/// Checks that `policy` plays a P-valid action on every non-terminal state
/// reachable from `s`. Returns the number of states audited.
pub fn audit_policy<P: Policy + ?Sized>(instance: &Instance, policy: &P, s: StateSet) -> Result<usize> {
    let mut seen = std::collections::HashSet::new();
    let mut stack = vec![s];
    while let Some(state) = stack.pop() {
        if is_terminal(instance, state) || !seen.insert(state) {
            continue;
        }
        let action = action_at(instance, policy, state)?;
        for (next, w) in successors(instance, state, action) {
            if w > 0.0 {
                stack.push(next);
            }
        }
    }
    Ok(seen.len())
}
