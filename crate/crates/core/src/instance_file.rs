//! TOML instance files.
//!
//! ```toml
//! seed = 7
//!
//! [default]
//! family = "point"
//! value = 0.0
//!
//! [[arms]]
//! family = "two_point"
//! low = -1.0
//! high = 2.0
//! p_high = 0.5
//!
//! [[arms]]
//! family = "discrete"
//! values = [-1.0, 0.5]
//! probs = [0.25, 0.75]
//! ```
//!
//! Families are `point` (`value`), `two_point` (`low`, `high`, `p_high`),
//! `discrete` (`values`, `probs`) and `gaussian` (`mean`, `sigma`). A missing
//! `[default]` table means a point mass at zero.

use std::fmt::Write as _;
use std::ops::Range;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::prior::{Family, RewardPrior};

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub instance: Instance,
    pub seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    seed: Option<u64>,
    default: Option<RawPrior>,
    arms: Option<Spanned<Vec<RawPrior>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrior {
    family: Spanned<String>,
    value: Option<f64>,
    low: Option<f64>,
    high: Option<f64>,
    p_high: Option<f64>,
    values: Option<Vec<f64>>,
    probs: Option<Vec<f64>>,
    mean: Option<f64>,
    sigma: Option<f64>,
}

fn line_of(text: &str, span: &Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

impl RawPrior {
    fn build(self, what: &str, text: &str) -> Result<RewardPrior> {
        let line = line_of(text, &self.family.span());
        let fail = |message: String| Error::Parse { line, message: format!("{what}: {message}") };
        let family = self.family.into_inner();
        let allowed: &[&str] = match family.as_str() {
            "point" | "point_mass" => &["value"],
            "two_point" => &["low", "high", "p_high"],
            "discrete" => &["values", "probs"],
            "gaussian" => &["mean", "sigma"],
            other => {
                return Err(fail(format!(
                    "unknown family `{other}` (expected point, two_point, discrete or gaussian)"
                )))
            }
        };
        let present = [
            ("value", self.value.is_some()),
            ("low", self.low.is_some()),
            ("high", self.high.is_some()),
            ("p_high", self.p_high.is_some()),
            ("values", self.values.is_some()),
            ("probs", self.probs.is_some()),
            ("mean", self.mean.is_some()),
            ("sigma", self.sigma.is_some()),
        ];
        for (name, set) in present {
            if set && !allowed.contains(&name) {
                return Err(fail(format!("parameter `{name}` does not belong to family `{family}`")));
            }
        }
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| fail(format!("family `{family}` needs `{name}`")));
        let prior = match allowed[0] {
            "value" => RewardPrior::point_mass(need(self.value, "value")?),
            "low" => RewardPrior::two_point(need(self.low, "low")?, need(self.high, "high")?, need(self.p_high, "p_high")?),
            "values" => {
                let values = self.values.ok_or_else(|| fail("family `discrete` needs `values`".into()))?;
                let probs = self.probs.ok_or_else(|| fail("family `discrete` needs `probs`".into()))?;
                RewardPrior::finite_discrete(values, probs)
            }
            _ => RewardPrior::gaussian(need(self.mean, "mean")?, need(self.sigma, "sigma")?),
        };
        prior.map_err(|e| fail(e.to_string()))
    }
}

/// Parses an instance file. Every error carries the offending line.
pub fn parse_instance(text: &str) -> Result<InstanceFile> {
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(0, |s| line_of(text, &s)),
        message: e.message().trim().to_string(),
    })?;
    let default = match raw.default {
        Some(d) => d.build("default", text)?,
        None => RewardPrior::point_mass(0.0)?,
    };
    let Some(arms) = raw.arms else {
        return Err(Error::Parse { line: 0, message: "no [[arms]] given".into() });
    };
    let arms_line = line_of(text, &arms.span());
    let arms = arms
        .into_inner()
        .into_iter()
        .enumerate()
        .map(|(i, a)| a.build(&format!("arm {i}"), text))
        .collect::<Result<Vec<_>>>()?;
    let instance =
        Instance::new(arms, default).map_err(|e| Error::Parse { line: arms_line, message: e.to_string() })?;
    Ok(InstanceFile { instance, seed: raw.seed })
}

fn write_prior(out: &mut String, prior: &RewardPrior) {
    let _ = match prior.family() {
        Family::PointMass { value } => writeln!(out, "family = \"point\"\nvalue = {value:?}"),
        Family::TwoPoint { low, high, p_high } => {
            writeln!(out, "family = \"two_point\"\nlow = {low:?}\nhigh = {high:?}\np_high = {p_high:?}")
        }
        Family::FiniteDiscrete { values, probs } => {
            writeln!(out, "family = \"discrete\"\nvalues = {values:?}\nprobs = {probs:?}")
        }
        Family::Gaussian { mean, sigma } => writeln!(out, "family = \"gaussian\"\nmean = {mean:?}\nsigma = {sigma:?}"),
    };
}

/// Writes an instance in the format [`parse_instance`] reads; values round-trip exactly.
pub fn to_toml(instance: &Instance, seed: Option<u64>) -> String {
    let mut out = String::new();
    if let Some(seed) = seed {
        let _ = writeln!(out, "seed = {seed}\n");
    }
    out.push_str("[default]\n");
    write_prior(&mut out, instance.default_arm());
    for arm in instance.arms() {
        out.push_str("\n[[arms]]\n");
        write_prior(&mut out, arm);
    }
    out
}
