//! Exhaustive bottom-up dynamic program over the subset lattice.
//!
//! States are processed in increasing population count, so every successor
//! `s \ {a}` is final when `s` is evaluated. Within one stratum states are
//! independent and evaluated in parallel.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmdp::{
    is_terminal, pvalid_actions, table::parse_mask, Action, Decision, PolicyTable, StateSet, TerminalMode,
    TerminalRewards, MAX_TABLE_ARMS,
};
use crate::instance::Instance;

/// Optimal values and actions on every state.
#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    k: usize,
    w_star: Vec<f64>,
    best: Vec<Decision>,
    mode: TerminalMode,
}

impl DpSolution {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> TerminalMode {
        self.mode
    }

    /// `W*(s)`.
    pub fn value(&self, s: StateSet) -> f64 {
        self.w_star[s.bits() as usize]
    }

    /// Optimal decision at `s`, lexicographically smallest among ties.
    pub fn action(&self, s: StateSet) -> Decision {
        self.best[s.bits() as usize]
    }

    pub fn policy_table(&self) -> PolicyTable {
        let mut table = PolicyTable::new(self.k).expect("k was checked by solve");
        for (bits, &d) in self.best.iter().enumerate() {
            table.set(StateSet::from_bits(bits as u64), d);
        }
        table
    }

    /// Golden-file text: a header, then `<hex-mask> <value> <i> <j>` per
    /// state with `- -` for terminal states. Values are printed in shortest
    /// round-trip form.
    pub fn to_text(&self) -> String {
        let mut out = format!("# dp-solution\nk={}\nmode={}\n", self.k, self.mode);
        for (bits, (&w, &d)) in self.w_star.iter().zip(&self.best).enumerate() {
            let action = match d {
                Decision::Terminal => "- -".to_string(),
                Decision::Play(a) => {
                    let (i, j) = a.pair();
                    format!("{i} {j}")
                }
            };
            writeln!(out, "{bits:#x} {w:?} {action}").expect("writing to a String");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut k: Option<usize> = None;
        let mut mode: Option<TerminalMode> = None;
        let mut w_star = Vec::new();
        let mut best = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(v) = line.strip_prefix("k=") {
                let kv: usize = v.parse().map_err(|_| parse_err(format!("bad arm count `{v}`")))?;
                if kv > MAX_TABLE_ARMS {
                    return Err(Error::TooManyArms { k: kv, limit: MAX_TABLE_ARMS });
                }
                k = Some(kv);
                w_star = vec![f64::NAN; 1 << kv];
                best = vec![Decision::Terminal; 1 << kv];
                continue;
            }
            if let Some(v) = line.strip_prefix("mode=") {
                mode = Some(parse_mode(v).ok_or_else(|| parse_err(format!("bad terminal mode `{v}`")))?);
                continue;
            }
            let kv = k.ok_or_else(|| parse_err("record before `k=` header".into()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [mask, value, i, j] = fields[..] else {
                return Err(parse_err(format!("expected `<mask> <value> <i> <j>`, got `{line}`")));
            };
            let bits = parse_mask(mask).ok_or_else(|| parse_err(format!("bad state mask `{mask}`")))?;
            if bits >> kv != 0 {
                return Err(parse_err(format!("state {mask} exceeds k={kv}")));
            }
            let value: f64 = value.parse().map_err(|_| parse_err(format!("bad value `{value}`")))?;
            let decision = if (i, j) == ("-", "-") {
                Decision::Terminal
            } else {
                let arm = |f: &str| -> Result<usize> {
                    f.parse::<usize>()
                        .ok()
                        .filter(|&a| a < kv)
                        .ok_or_else(|| parse_err(format!("bad arm index `{f}`")))
                };
                Decision::Play(Action::from_pair(arm(i)?, arm(j)?))
            };
            w_star[bits as usize] = value;
            best[bits as usize] = decision;
        }
        let k = k.ok_or(Error::Parse { line: 0, message: "missing `k=` header".into() })?;
        let mode = mode.ok_or(Error::Parse { line: 0, message: "missing `mode=` header".into() })?;
        if let Some(bits) = w_star.iter().position(|w| w.is_nan()) {
            return Err(Error::Parse { line: 0, message: format!("no record for state {bits:#x}") });
        }
        Ok(Self { k, w_star, best, mode })
    }

    /// Largest absolute value difference over all states.
    pub fn max_difference(&self, other: &DpSolution) -> Option<f64> {
        (self.k == other.k).then(|| {
            self.w_star.iter().zip(&other.w_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
    }
}

fn parse_mode(text: &str) -> Option<TerminalMode> {
    if text == "exact" {
        return Some(TerminalMode::Exact);
    }
    let rest = text.strip_prefix("mc:")?;
    let (samples, seed) = rest.split_once(':')?;
    Some(TerminalMode::MonteCarlo { samples: samples.parse().ok()?, seed: seed.parse().ok()? })
}

fn check_size(instance: &Instance) -> Result<usize> {
    let k = instance.k();
    if k > MAX_TABLE_ARMS {
        return Err(Error::TooManyArms { k, limit: MAX_TABLE_ARMS });
    }
    Ok(k)
}

/// Runs the dynamic program, restricted to P-valid actions.
pub fn solve(instance: &Instance, rewards: &TerminalRewards) -> Result<DpSolution> {
    let k = check_size(instance)?;
    let n = 1usize << k;
    let mut w_star = vec![0.0; n];
    let mut best = vec![Decision::Terminal; n];
    let splits: Vec<Vec<(f64, f64)>> = (0..k)
        .map(|i| (0..k).map(|j| Action::from_pair(i, j).split(instance)).collect())
        .collect();
    for stratum in strata(k) {
        let results: Vec<(f64, Decision)> = stratum
            .par_iter()
            .map(|&bits| {
                let s = StateSet::from_bits(bits);
                if is_terminal(instance, s) {
                    return (rewards.reward(s), Decision::Terminal);
                }
                let mut best_value = f64::NEG_INFINITY;
                let mut best_action = None;
                for action in pvalid_actions(instance, s) {
                    let (i, j) = action.pair();
                    let (wi, wj) = splits[i][j];
                    let mut value = wi * w_star[s.without(i).bits() as usize];
                    if i != j {
                        value += wj * w_star[s.without(j).bits() as usize];
                    }
                    if value > best_value {
                        best_value = value;
                        best_action = Some(action);
                    }
                }
                (best_value, Decision::Play(best_action.expect("non-terminal state has an action")))
            })
            .collect();
        for (&bits, (w, d)) in stratum.iter().zip(results) {
            w_star[bits as usize] = w;
            best[bits as usize] = d;
        }
    }
    Ok(DpSolution { k, w_star, best, mode: rewards.mode() })
}

/// `W*(A)`.
pub fn w_star(instance: &Instance, rewards: &TerminalRewards) -> Result<f64> {
    Ok(solve(instance, rewards)?.value(StateSet::full(instance.k())))
}

/// The same program with `extra` random many-arm MIR portfolios added to
/// every non-terminal state's action set. Portfolios are Dirichlet draws
/// over the state's arms, with the negative weights scaled down just enough
/// to satisfy the MIR inequality. Returns the augmented `W*` per state.
pub fn solve_augmented(
    instance: &Instance,
    rewards: &TerminalRewards,
    extra: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let base = solve(instance, rewards)?;
    let k = base.k;
    let mut w = vec![0.0; 1 << k];
    for stratum in strata(k) {
        let results: Vec<f64> = stratum
            .par_iter()
            .map(|&bits| {
                let s = StateSet::from_bits(bits);
                if is_terminal(instance, s) {
                    return rewards.reward(s);
                }
                let mut best_value = f64::NEG_INFINITY;
                for action in pvalid_actions(instance, s) {
                    let (i, j) = action.pair();
                    let (wi, wj) = action.split(instance);
                    let mut value = wi * w[s.without(i).bits() as usize];
                    if i != j {
                        value += wj * w[s.without(j).bits() as usize];
                    }
                    best_value = best_value.max(value);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(bits);
                let arms: Vec<usize> = s.iter().collect();
                for _ in 0..extra {
                    let weights = random_mir_weights(instance, &arms, &mut rng);
                    let value: f64 =
                        arms.iter().zip(&weights).map(|(&a, &p)| p * w[s.without(a).bits() as usize]).sum();
                    best_value = best_value.max(value);
                }
                best_value
            })
            .collect();
        for (&bits, v) in stratum.iter().zip(results) {
            w[bits as usize] = v;
        }
    }
    Ok(w)
}

/// A random point of the MIR polytope over `arms` (which must contain an
/// above arm).
pub fn random_mir_weights<R: Rng + ?Sized>(instance: &Instance, arms: &[usize], rng: &mut R) -> Vec<f64> {
    let mut weights: Vec<f64> = arms.iter().map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
    let (pos, neg) = arms.iter().zip(&weights).fold((0.0, 0.0), |(p, n), (&a, &x)| {
        let m = instance.centered_mean(a);
        if m > 0.0 {
            (p + x * m, n)
        } else {
            (p, n - x * m)
        }
    });
    if neg > pos {
        let scale = pos / neg;
        for (&a, x) in arms.iter().zip(weights.iter_mut()) {
            if instance.centered_mean(a) < 0.0 {
                *x *= scale;
            }
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|x| *x /= total);
    weights
}

/// State masks of `0..k` grouped by population count, increasing.
fn strata(k: usize) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new(); k + 1];
    for bits in 0..(1u64 << k) {
        out[bits.count_ones() as usize].push(bits);
    }
    out
}
