//! JSON model specifications.
//!
//! ```json
//! { "n": 2, "distribution": [ { "subset": [], "prob": 0.4 }, { "subset": [1, 2], "prob": 0.6 } ] }
//! { "n": 3, "independent": { "pi": [0.5, 0.2, 0.9] } }
//! { "n": 2, "rates": [ { "subset": [1], "rate": 0.3 } ] }
//! ```
//!
//! Subsets are lists of 1-based elements. Unlisted subsets have probability
//! (or rate) 0, so a nonzero `p_∅` must be written out as `"subset": []`.

use std::collections::BTreeSet;
use std::path::Path;

use coupon_embed::algebra::{exp_closed, ModuliVector};
use coupon_embed::model::{independent_params, independent_rates, IndependentSpec};
use coupon_embed::{CouponDistribution, RateVector, Subset, SubsetVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Allowed deviation of the listed probabilities from summing to 1.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Largest ground set accepted from a spec file.
pub const MAX_SPEC_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbEntry {
    pub subset: Vec<usize>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEntry {
    pub subset: Vec<usize>,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndependentEntry {
    pub pi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Vec<ProbEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independent: Option<IndependentEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<RateEntry>>,
}

/// A validated spec.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Distribution(CouponDistribution),
    /// Independent inclusions: both the distribution and its Poisson rates are known.
    Independent {
        p: CouponDistribution,
        rates: RateVector,
    },
    /// Direct generator input; `p = Exp(r)` is the law at time 1.
    Rates {
        rates: RateVector,
        p: CouponDistribution,
    },
}

impl Model {
    pub fn n(&self) -> usize {
        self.distribution().n()
    }

    pub fn distribution(&self) -> &CouponDistribution {
        match self {
            Model::Distribution(p) | Model::Independent { p, .. } | Model::Rates { p, .. } => p,
        }
    }

    /// Generator parameters known without running the embeddability test.
    pub fn given_rates(&self) -> Option<&RateVector> {
        match self {
            Model::Distribution(_) => None,
            Model::Independent { rates, .. } | Model::Rates { rates, .. } => Some(rates),
        }
    }
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::input(format!("{}: {}", field.into(), message.into()))
}

fn parse_subset(n: usize, field: &str, elements: &[usize]) -> Result<Subset, CliError> {
    let mut seen = BTreeSet::new();
    for &e in elements {
        if e == 0 || e > n {
            return Err(invalid(field, format!("element {e} outside 1..={n}")));
        }
        if !seen.insert(e) {
            return Err(invalid(field, format!("element {e} listed twice")));
        }
    }
    Subset::from_elements(n, elements).map_err(|e| invalid(field, e.to_string()))
}

fn finite(field: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, "value is not finite"))
    }
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            CliError::input(format!(
                "line {}, column {}: {}",
                e.line(),
                e.column(),
                e
            ))
        })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        ModelSpec::from_json(&text)
            .map_err(|e| CliError::input(format!("{}: {}", path.display(), e.message)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("specs serialize")
    }

    pub fn from_distribution(p: &CouponDistribution) -> Self {
        let entries = p
            .probs()
            .iter()
            .filter(|&(_, v)| v != 0.0)
            .map(|(k, prob)| ProbEntry {
                subset: k.elements(),
                prob,
            })
            .collect();
        ModelSpec {
            n: p.n(),
            distribution: Some(entries),
            independent: None,
            rates: None,
        }
    }

    pub fn validate(&self) -> Result<Model, CliError> {
        let n = self.n;
        if n == 0 || n > MAX_SPEC_N {
            return Err(invalid("n", format!("must be in 1..={MAX_SPEC_N}")));
        }
        let given = [
            self.distribution.is_some(),
            self.independent.is_some(),
            self.rates.is_some(),
        ];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(CliError::input(
                "exactly one of \"distribution\", \"independent\" or \"rates\" must be given",
            ));
        }
        if let Some(entries) = &self.distribution {
            let mut p = SubsetVector::zeros(n);
            let mut seen = BTreeSet::new();
            for (i, e) in entries.iter().enumerate() {
                let field = format!("distribution[{i}]");
                let k = parse_subset(n, &format!("{field}.subset"), &e.subset)?;
                if !seen.insert(k.mask()) {
                    return Err(invalid(field, format!("subset {k} listed twice")));
                }
                let prob = finite(&format!("{field}.prob"), e.prob)?;
                if prob < 0.0 {
                    return Err(invalid(format!("{field}.prob"), format!("{prob} is negative")));
                }
                p[k] = prob;
            }
            let sum = p.sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(invalid("distribution", format!("probabilities sum to {sum}, not 1")));
            }
            let p = CouponDistribution::with_tolerance(p, SIMPLEX_TOL)
                .map_err(|e| invalid("distribution", e.to_string()))?;
            return Ok(Model::Distribution(p));
        }
        if let Some(ind) = &self.independent {
            if ind.pi.len() != n {
                return Err(invalid(
                    "independent.pi",
                    format!("has {} entries, expected n = {n}", ind.pi.len()),
                ));
            }
            for (i, &v) in ind.pi.iter().enumerate() {
                finite(&format!("independent.pi[{i}]"), v)?;
            }
            let spec = IndependentSpec::new(ind.pi.clone())
                .map_err(|e| invalid("independent.pi", e.to_string()))?;
            return Ok(Model::Independent {
                p: independent_params(&spec),
                rates: independent_rates(&spec),
            });
        }
        let entries = self.rates.as_ref().expect("one input is present");
        let mut rates = Vec::with_capacity(entries.len());
        let mut seen = BTreeSet::new();
        for (i, e) in entries.iter().enumerate() {
            let field = format!("rates[{i}]");
            let k = parse_subset(n, &format!("{field}.subset"), &e.subset)?;
            if k.is_empty() {
                return Err(invalid(
                    format!("{field}.subset"),
                    "the empty set has no rate of its own; it is minus the sum of the others",
                ));
            }
            if !seen.insert(k.mask()) {
                return Err(invalid(field, format!("subset {k} listed twice")));
            }
            let rate = finite(&format!("{field}.rate"), e.rate)?;
            if rate < 0.0 {
                return Err(invalid(format!("{field}.rate"), format!("{rate} is negative")));
            }
            rates.push((k, rate));
        }
        let r = RateVector::from_nonempty_rates(n, rates).map_err(|e| invalid("rates", e.to_string()))?;
        let p = exp_closed(&ModuliVector::from(r.clone())).into_values();
        let p = CouponDistribution::with_tolerance(p, 1e-10).map_err(|e| invalid("rates", e.to_string()))?;
        Ok(Model::Rates { rates: r, p })
    }
}
