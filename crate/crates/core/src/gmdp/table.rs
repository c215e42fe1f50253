use std::fmt::Write as _;

use super::{Action, Decision, Policy, StateSet};
use crate::error::{Error, Result};

/// Largest `K` for which a dense policy table is materialized.
pub const MAX_TABLE_ARMS: usize = 20;

/// A materialized stationary policy, one entry per subset of `0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    k: usize,
    entries: Vec<Option<Decision>>,
}

impl PolicyTable {
    pub fn new(k: usize) -> Result<Self> {
        if k > MAX_TABLE_ARMS {
            return Err(Error::TooManyArms { k, limit: MAX_TABLE_ARMS });
        }
        Ok(Self { k, entries: vec![None; 1 << k] })
    }

    /// Materializes `policy` on every subset of `0..k`.
    pub fn materialize<P: Policy + ?Sized>(k: usize, policy: &P) -> Result<Self> {
        let mut table = Self::new(k)?;
        for bits in 0..(1u64 << k) {
            let s = StateSet::from_bits(bits);
            table.entries[bits as usize] = policy.decide(s);
        }
        Ok(table)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn set(&mut self, s: StateSet, decision: Decision) {
        self.entries[s.bits() as usize] = Some(decision);
    }

    pub fn get(&self, s: StateSet) -> Option<Decision> {
        self.entries.get(s.bits() as usize).copied().flatten()
    }

    /// Defined entries in increasing bitmask order.
    pub fn iter(&self) -> impl Iterator<Item = (StateSet, Decision)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(bits, d)| d.map(|d| (StateSet::from_bits(bits as u64), d)))
    }

    /// Text form: a `k=<K>` header, then one `<hex-mask> <i> <j>` record per
    /// state, with `- -` for terminal states and `i == j` for singles.
    pub fn to_text(&self) -> String {
        let mut out = format!("# policy-table\nk={}\n", self.k);
        for (s, d) in self.iter() {
            match d {
                Decision::Terminal => writeln!(out, "{:#x} - -", s.bits()),
                Decision::Play(a) => {
                    let (i, j) = a.pair();
                    writeln!(out, "{:#x} {i} {j}", s.bits())
                }
            }
            .expect("writing to a String");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut table: Option<PolicyTable> = None;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            if let Some(k) = line.strip_prefix("k=") {
                let k = k.parse().map_err(|_| parse_err(format!("bad arm count `{k}`")))?;
                table = Some(PolicyTable::new(k)?);
                continue;
            }
            let table = table.as_mut().ok_or_else(|| parse_err("record before `k=` header".into()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [mask, i, j] = fields[..] else {
                return Err(parse_err(format!("expected `<mask> <i> <j>`, got `{line}`")));
            };
            let bits = parse_mask(mask).ok_or_else(|| parse_err(format!("bad state mask `{mask}`")))?;
            if bits >> table.k != 0 {
                return Err(parse_err(format!("state {mask} exceeds k={}", table.k)));
            }
            let decision = if (i, j) == ("-", "-") {
                Decision::Terminal
            } else {
                let arm = |f: &str| -> Result<usize> {
                    let v: usize = f.parse().map_err(|_| parse_err(format!("bad arm index `{f}`")))?;
                    if v >= table.k {
                        return Err(parse_err(format!("arm {v} out of range")));
                    }
                    Ok(v)
                };
                Decision::Play(Action::from_pair(arm(i)?, arm(j)?))
            };
            table.set(StateSet::from_bits(bits), decision);
        }
        table.ok_or(Error::Parse { line: 0, message: "missing `k=` header".into() })
    }
}

impl Policy for PolicyTable {
    fn decide(&self, s: StateSet) -> Option<Decision> {
        self.get(s)
    }
}

pub(crate) fn parse_mask(field: &str) -> Option<u64> {
    match field.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => field.parse().ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut t = PolicyTable::new(3).unwrap();
        t.set(StateSet::from_bits(0b111), Decision::Play(Action::Mix { above: 0, neg: 2 }));
        t.set(StateSet::from_bits(0b011), Decision::Play(Action::Single(1)));
        t.set(StateSet::from_bits(0b100), Decision::Terminal);
        let text = t.to_text();
        assert!(text.contains("0x7 0 2"));
        assert_eq!(PolicyTable::from_text(&text).unwrap(), t);
    }

    #[test]
    fn malformed_records_report_lines() {
        let err = PolicyTable::from_text("k=2\n0x3 0 1\n0x9 0 1\n").unwrap_err();
        assert_eq!(err, Error::Parse { line: 3, message: "state 0x9 exceeds k=2".into() });
        assert!(matches!(PolicyTable::from_text("0x1 0 0"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(PolicyTable::from_text("k=2\n0x1 zero 0"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn table_size_is_capped() {
        assert!(matches!(PolicyTable::new(21), Err(Error::TooManyArms { .. })));
    }
}
