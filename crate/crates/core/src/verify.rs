//! Property suites run by `mir verify`.
//!
//! Each suite checks one family of properties on seeded random or named
//! instances and reports one line per property. Failing properties carry a
//! counterexample in instance-file form. Properties that are known not to
//! hold on a generator (OGP optimality without stochastic order) are
//! reported as expected failures and do not fail the suite.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bic::{audit_bic, BeliefMode};
use crate::catalog;
use crate::dp;
use crate::error::{Error, Result};
use crate::gmdp::{q_table, w_value, StateSet, TerminalRewards};
use crate::instance::{generate_instance, FamilyTemplate, Instance};
use crate::instance_file::to_toml;
use crate::policies::{random_pvalid, Ogp};
use crate::sim::{replication_rng, Mechanism, Runner, WelfareSink};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Equivalence,
    MirCertificates,
    OgpOptimality,
    Dominance,
    BicAudit,
}

impl Suite {
    pub const ALL: [Suite; 5] =
        [Suite::Equivalence, Suite::MirCertificates, Suite::OgpOptimality, Suite::Dominance, Suite::BicAudit];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Equivalence => "equivalence",
            Suite::MirCertificates => "mir-certificates",
            Suite::OgpOptimality => "ogp-optimality",
            Suite::Dominance => "dominance",
            Suite::BicAudit => "bic-audit",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown suite `{s}` (expected one of {})",
                Suite::ALL.map(Suite::name).join(", ")
            ))
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random instances per property.
    pub instances: usize,
    /// Random instances have between 2 and `max_k` arms.
    pub max_k: usize,
    /// Generator for `ogp-optimality`; the ordered discrete family if unset.
    pub family: Option<FamilyTemplate>,
    /// Runs per instance for `mir-certificates`, replications for `bic-audit`.
    pub replications: u64,
    pub horizon: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 0, instances: 100, max_k: 8, family: None, replications: 10_000, horizon: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// Fails where failure is known to be possible.
    ExpectedFail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: String,
    pub outcome: Outcome,
    pub detail: String,
    pub counterexample: Option<String>,
}

impl PropertyResult {
    fn new(name: impl Into<String>, ok: bool, detail: String) -> Self {
        Self { name: name.into(), outcome: if ok { Outcome::Pass } else { Outcome::Fail }, detail, counterexample: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub results: Vec<PropertyResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.outcome != Outcome::Fail)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# suite={} seed={}\n", self.suite, self.seed);
        for r in &self.results {
            let tag = match r.outcome {
                Outcome::Pass => "PASS",
                Outcome::Fail => "FAIL",
                Outcome::ExpectedFail => "EXPECTED-FAIL",
            };
            let _ = writeln!(out, "{tag} {}: {}", r.name, r.detail);
            if let Some(c) = &r.counterexample {
                let _ = writeln!(out, "--- counterexample\n{}---", c);
            }
        }
        out
    }
}

pub fn run_suite(suite: Suite, options: &VerifyOptions) -> Result<SuiteReport> {
    if options.max_k < 2 || options.instances == 0 {
        return Err(Error::Config("suites need max_k >= 2 and at least one instance".into()));
    }
    let results = match suite {
        Suite::Equivalence => equivalence(options)?,
        Suite::MirCertificates => mir_certificates(options)?,
        Suite::OgpOptimality => ogp_optimality(options)?,
        Suite::Dominance => dominance(options)?,
        Suite::BicAudit => bic_audit(options)?,
    };
    Ok(SuiteReport { suite, seed: options.seed, results })
}

/// Instance `n` of a seeded stream, with `K` uniform in `2..=max_k`.
pub fn random_instance(seed: u64, n: u64, max_k: usize, family: &FamilyTemplate) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n);
    let k = rng.random_range(2..=max_k);
    generate_instance(k, family, &mut rng)
}

/// Largest `|Q(π, s) − Q(ρ, s)|` over all states and `pairs` random
/// P-valid pairs.
pub fn max_q_gap(instance: &Instance, pairs: u64, seed: u64) -> Result<f64> {
    let mut gap: f64 = 0.0;
    for p in 0..pairs {
        let a = q_table(instance, &random_pvalid(instance, seed.wrapping_add(2 * p))?)?;
        let b = q_table(instance, &random_pvalid(instance, seed.wrapping_add(2 * p + 1))?)?;
        gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(gap, f64::max);
    }
    Ok(gap)
}

/// `(w_value(OGP, A), W*(A))` with exact terminal rewards.
pub fn ogp_and_optimum(instance: &Instance) -> Result<(f64, f64)> {
    let rewards = TerminalRewards::exact(instance)?;
    let ogp = w_value(instance, &Ogp::new(instance), StateSet::full(instance.k()), &rewards)?;
    Ok((ogp, dp::w_star(instance, &rewards)?))
}

fn equivalence(o: &VerifyOptions) -> Result<Vec<PropertyResult>> {
    let families = [FamilyTemplate::ShiftedDiscrete { atoms: 3 }, FamilyTemplate::TwoPoint { low: -1.0, high: 2.0 }];
    let gaps: Vec<(f64, Instance)> = (0..o.instances as u64)
        .into_par_iter()
        .map(|n| {
            let inst = random_instance(o.seed, n, o.max_k, &families[n as usize % 2])?;
            Ok((max_q_gap(&inst, 10, o.seed ^ n)?, inst))
        })
        .collect::<Result<_>>()?;
    let (worst, inst) = gaps.iter().max_by(|a, b| a.0.total_cmp(&b.0)).expect("at least one instance");
    let mut r = PropertyResult::new(
        "full-exploration probability is policy independent",
        *worst <= 1e-12,
        format!("{} instances x 10 policy pairs, max |dQ| = {worst:.3e} (tolerance 1e-12)", gaps.len()),
    );
    if r.outcome == Outcome::Fail {
        r.counterexample = Some(to_toml(inst, Some(o.seed)));
    }
    Ok(vec![r])
}

fn ogp_optimality(o: &VerifyOptions) -> Result<Vec<PropertyResult>> {
    let family = o.family.clone().unwrap_or(FamilyTemplate::ShiftedDiscrete { atoms: 4 });
    let rows: Vec<(f64, f64, Instance)> = (0..o.instances as u64)
        .into_par_iter()
        .map(|n| {
            let inst = random_instance(o.seed, n, o.max_k, &family)?;
            let (ogp, best) = ogp_and_optimum(&inst)?;
            Ok((ogp, best, inst))
        })
        .collect::<Result<_>>()?;
    let failures: Vec<&(f64, f64, Instance)> = rows.iter().filter(|r| (r.1 - r.0).abs() > 1e-9).collect();
    let worst = rows.iter().map(|r| (r.1 - r.0).abs()).fold(0.0, f64::max);
    let name = format!("OGP attains the optimum ({} generator)", family.name());
    let detail = format!(
        "{} instances, {} with |W(OGP) - W*| > 1e-9, max gap {worst:.3e}",
        rows.len(),
        failures.len()
    );
    let mut r = PropertyResult::new(name, failures.is_empty(), detail);
    if let Some(f) = failures.first() {
        r.counterexample = Some(format!("# W(OGP) = {}, W* = {}\n{}", f.0, f.1, to_toml(&f.2, Some(o.seed))));
        if !family.is_ordered() {
            r.outcome = Outcome::ExpectedFail;
            r.detail.push_str(" (expected without stochastic order)");
        }
    }
    Ok(vec![r])
}

fn mir_certificates(o: &VerifyOptions) -> Result<Vec<PropertyResult>> {
    let mut out = Vec::new();
    for (name, inst) in catalog::standard_set() {
        let mut mechanisms = vec![Mechanism::Iregb];
        if Runner::new(&inst, Mechanism::BicIregb).is_ok() {
            mechanisms.push(Mechanism::BicIregb);
        }
        for mechanism in mechanisms {
            let runner = Runner::new(&inst, mechanism)?;
            let sinks: Vec<WelfareSink> = (0..o.replications)
                .into_par_iter()
                .map(|rep| {
                    let mut sink = WelfareSink::default();
                    runner.run(&inst, o.horizon, &mut replication_rng(o.seed, rep), &mut sink)?;
                    Ok(sink)
                })
                .collect::<Result<_>>()?;
            let violations: u64 = sinks.iter().map(|s| s.violations).sum();
            let min = sinks.iter().map(|s| s.min_certificate).fold(f64::INFINITY, f64::min);
            out.push(PropertyResult::new(
                format!("{mechanism} certificates on {name}"),
                violations == 0,
                format!("{} runs of T={}, min certificate {min:.3e}, {violations} rounds below -1e-9", o.replications, o.horizon),
            ));
        }
    }
    Ok(out)
}

fn dominance(o: &VerifyOptions) -> Result<Vec<PropertyResult>> {
    let families = [
        FamilyTemplate::Gaussian { sigma: 1.0, spread: 2.0 },
        FamilyTemplate::TwoPoint { low: -1.0, high: 2.0 },
        FamilyTemplate::ShiftedDiscrete { atoms: 4 },
    ];
    let mut out = Vec::new();
    for family in &families {
        let mut bad = None;
        for n in 0..o.instances as u64 {
            let inst = random_instance(o.seed, n, o.max_k, family)?;
            let neg = inst.neg_by_decreasing_mean();
            for (x, &i) in neg.iter().enumerate() {
                for &j in &neg[x + 1..] {
                    if !inst.arm(i).dominates(inst.arm(j))? {
                        bad.get_or_insert((inst.clone(), i, j));
                    }
                }
            }
        }
        let mut r = PropertyResult::new(
            format!("negative arms are a dominance chain in mean order ({})", family.name()),
            bad.is_none(),
            format!("{} generated instances", o.instances),
        );
        if let Some((inst, i, j)) = bad {
            r.counterexample = Some(format!("# arm {i} does not dominate arm {j}\n{}", to_toml(&inst, Some(o.seed))));
        }
        out.push(r);
    }
    let unordered = FamilyTemplate::Unordered { atoms: 3 };
    let (mut pairs, mut bad) = (0usize, None);
    for n in 0..o.instances as u64 {
        let inst = random_instance(o.seed, n, o.max_k, &unordered)?;
        for i in 0..inst.k() {
            if !inst.arm(i).dominates(inst.arm(i))? {
                bad.get_or_insert((inst.clone(), i, i));
            }
            for j in 0..inst.k() {
                pairs += 1;
                if inst.arm(i).dominates(inst.arm(j))? && inst.mean(i) < inst.mean(j) - 1e-12 {
                    bad.get_or_insert((inst.clone(), i, j));
                }
            }
        }
    }
    let mut r = PropertyResult::new(
        "dominance is reflexive and implies mean order",
        bad.is_none(),
        format!("{pairs} ordered pairs from unordered instances"),
    );
    if let Some((inst, i, j)) = bad {
        r.counterexample = Some(format!("# pair ({i}, {j})\n{}", to_toml(&inst, Some(o.seed))));
    }
    out.push(r);
    Ok(out)
}

fn bic_audit(o: &VerifyOptions) -> Result<Vec<PropertyResult>> {
    let mut out = Vec::new();
    let reps = o.replications.max(2);
    for (name, inst) in catalog::bic_set() {
        let report = audit_bic(&inst, Mechanism::BicIregb, o.horizon, reps, o.seed, BeliefMode::InformativeOrder)?;
        let v = report.violations().count();
        let mut r = PropertyResult::new(
            format!("bic_iregb is obedient on {name}"),
            v == 0,
            format!("{} cells, {v} violations, {} sparse", report.cells.len(), report.sparse().count()),
        );
        if v > 0 {
            let mut dump = to_toml(&inst, Some(o.seed));
            for c in report.violations().take(5) {
                let _ = writeln!(dump, "# t={:?} rec={} alt={} estimate={:.6}", c.t, c.recommended, c.alternative, c.estimate);
            }
            r.counterexample = Some(dump);
        }
        out.push(r);
    }
    let inst = catalog::small_mix();
    let report = audit_bic(&inst, Mechanism::Iregb, o.horizon, reps, o.seed, BeliefMode::InformativeOrder)?;
    let v = report.violations().count();
    out.push(PropertyResult::new(
        "the audit flags raw iregb on small-mix",
        v > 0,
        format!("{v} violation cells under informative order"),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> VerifyOptions {
        VerifyOptions { instances: 8, max_k: 5, replications: 200, horizon: 50, ..VerifyOptions::default() }
    }

    #[test]
    fn suite_names_parse() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!(matches!("nope".parse::<Suite>(), Err(Error::Config(_))));
    }

    #[test]
    fn quick_suites_pass() {
        for s in [Suite::Equivalence, Suite::OgpOptimality, Suite::Dominance, Suite::MirCertificates] {
            let report = run_suite(s, &quick()).unwrap();
            assert!(report.passed(), "{}", report.to_text());
        }
    }

    #[test]
    fn unordered_failures_are_expected() {
        let o = VerifyOptions { instances: 40, family: Some(FamilyTemplate::Unordered { atoms: 3 }), ..quick() };
        let report = run_suite(Suite::OgpOptimality, &o).unwrap();
        assert!(report.passed());
        assert!(report.results.iter().all(|r| r.outcome != Outcome::Fail));
    }
}
