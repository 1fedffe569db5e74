//! Deciding whether a CM matrix `M_p` is embeddable.
//!
//! With `λ = ζ(p)` the eigenvalues of `M_p`, the CG logarithm has parameters
//! `r = Möbius(log λ)`. `M_p` is singular iff `p_∅ = 0`, and otherwise it is
//! embeddable iff `r_K >= 0` for every `K ≠ ∅`. The same `r_K` can be written
//! as a sum over set partitions of `K` of logarithms of conditional avoidance
//! probabilities, which [`partition_log_param`] evaluates as an independent
//! route.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{
    enumerate_partitions, mobius_subsets, zeta_subsets, zeta_supersets, Subset, SubsetVector,
};
use crate::model::{cg_from_params, eigenvalues_cm, CouponDistribution, LatticeMatrix, RateVector};

/// Default threshold on `r_K` below which a verdict reports non-embeddability.
pub const DEFAULT_VERDICT_TOL: f64 = 1e-10;
/// Default threshold on `p_∅` below which `M_p` counts as singular.
pub const DEFAULT_SINGULAR_TOL: f64 = 1e-12;
/// Largest `|K|` for the partition-sum formulas (Bell(10) = 115975 partitions).
pub const MAX_PARTITION_FORMULA_SIZE: usize = 10;

/// `q_K = P(Z ∩ K = ∅)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvoidanceVector {
    q: SubsetVector,
}

impl AvoidanceVector {
    pub fn values(&self) -> &SubsetVector {
        &self.q
    }

    pub fn get(&self, k: Subset) -> f64 {
        self.q[k]
    }

    pub fn n(&self) -> usize {
        self.q.n()
    }
}

/// `q_K = Σ_{I ⊆ S−K} p_I = λ_{S−K}`.
pub fn avoidance_probs(p: &CouponDistribution) -> AvoidanceVector {
    let lambda = zeta_subsets(p.probs());
    let full = lambda.full_set();
    let q = SubsetVector::from_fn(p.n(), |k| lambda[k.complement(p.n()).intersection(full)]);
    AvoidanceVector { q }
}

/// `q^B_A = q_{A∪B} / q_B = P(Z ∩ A = ∅ | Z ∩ B = ∅)`.
pub fn conditional_avoidance(q: &AvoidanceVector, a: Subset, b: Subset) -> Result<f64> {
    let n = q.n();
    for s in [a, b] {
        if !s.fits(n) {
            return Err(Error::SubsetOutOfRange { mask: s.mask(), n });
        }
    }
    let qb = q.get(b);
    if qb <= 0.0 {
        return Err(Error::ConditionOnNullEvent(b));
    }
    Ok(q.get(a.union(b)) / qb)
}

fn check_nonsingular(p: &CouponDistribution, singular_tol: f64) -> Result<()> {
    let p_empty = p.p_empty();
    if p_empty <= singular_tol {
        return Err(Error::SingularMatrix { p_empty });
    }
    Ok(())
}

/// Parameters of the principal logarithm of `M_p`, with the default singularity threshold.
pub fn log_params(p: &CouponDistribution) -> Result<RateVector> {
    log_params_with(p, DEFAULT_SINGULAR_TOL)
}

/// `r = Möbius(log ζ(p))`; `r_∅ = log p_∅`.
pub fn log_params_with(p: &CouponDistribution, singular_tol: f64) -> Result<RateVector> {
    check_nonsingular(p, singular_tol)?;
    let mut mu = zeta_subsets(p.probs()).map(f64::ln);
    // λ_S is 1 for every probability vector; pin it so r sums to 0 up to rounding.
    let full = mu.full_set();
    mu[full] = 0.0;
    RateVector::new(mobius_subsets(&mu))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    /// `p_∅ = 0`: `M_p` is singular and has no logarithm at all.
    SingularNotEmbeddable,
    Embeddable,
    NotEmbeddable,
}

/// Result of [`embeddability_verdict`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddabilityVerdict {
    pub outcome: Outcome,
    /// Logarithm parameters; absent when `M_p` is singular.
    pub rates: Option<RateVector>,
    /// Subsets with `r_K < −tol`, by cardinality then mask.
    pub witnesses: Vec<Subset>,
    /// Non-empty subsets with `|r_K| <= tol`, by cardinality then mask.
    pub boundary_flags: Vec<Subset>,
    /// All eigenvalues `λ_K` pairwise separated by more than `tol`.
    pub spectrum_simple: bool,
    pub tolerance: f64,
}

impl EmbeddabilityVerdict {
    pub fn is_embeddable(&self) -> bool {
        self.outcome == Outcome::Embeddable
    }

    /// The generator parameters with boundary entries in `[−tol, 0)` snapped to 0
    /// (and `r_∅` adjusted to keep the sum at 0). `None` unless embeddable.
    pub fn generator_rates(&self) -> Option<RateVector> {
        if !self.is_embeddable() {
            return None;
        }
        let r = self.rates.as_ref()?;
        let rates = r
            .rates()
            .iter()
            .skip(1)
            .map(|(k, v)| (k, if v < 0.0 { 0.0 } else { v }));
        RateVector::from_nonempty_rates(r.n(), rates).ok()
    }
}

fn by_cardinality(mut subsets: Vec<Subset>) -> Vec<Subset> {
    subsets.sort_by_key(|s| (s.len(), s.mask()));
    subsets
}

/// Decides embeddability with `tol` on the rates and the default singularity threshold.
pub fn embeddability_verdict(p: &CouponDistribution, tol: f64) -> EmbeddabilityVerdict {
    embeddability_verdict_with(p, tol, DEFAULT_SINGULAR_TOL)
}

pub fn embeddability_verdict_with(
    p: &CouponDistribution,
    tol: f64,
    singular_tol: f64,
) -> EmbeddabilityVerdict {
    let spectrum_simple = eigenvalues_cm(p).is_simple(tol);
    let rates = match log_params_with(p, singular_tol) {
        Ok(r) => r,
        Err(_) => {
            return EmbeddabilityVerdict {
                outcome: Outcome::SingularNotEmbeddable,
                rates: None,
                witnesses: Vec::new(),
                boundary_flags: Vec::new(),
                spectrum_simple,
                tolerance: tol,
            }
        }
    };
    let nonempty = || rates.rates().iter().skip(1);
    let witnesses = by_cardinality(nonempty().filter(|&(_, v)| v < -tol).map(|(k, _)| k).collect());
    let boundary_flags =
        by_cardinality(nonempty().filter(|&(_, v)| v.abs() <= tol).map(|(k, _)| k).collect());
    let outcome = if witnesses.is_empty() {
        Outcome::Embeddable
    } else {
        Outcome::NotEmbeddable
    };
    EmbeddabilityVerdict {
        outcome,
        rates: Some(rates),
        witnesses,
        boundary_flags,
        spectrum_simple,
        tolerance: tol,
    }
}

/// The Markov generator `R = log M_p`, when `M_p` is embeddable.
pub fn generator_from_cm(p: &CouponDistribution) -> Result<LatticeMatrix> {
    generator_from_cm_with(p, DEFAULT_VERDICT_TOL)
}

pub fn generator_from_cm_with(p: &CouponDistribution, tol: f64) -> Result<LatticeMatrix> {
    let verdict = embeddability_verdict(p, tol);
    match verdict.outcome {
        Outcome::SingularNotEmbeddable => Err(Error::SingularMatrix {
            p_empty: p.p_empty(),
        }),
        Outcome::NotEmbeddable => Err(Error::NotEmbeddable {
            witnesses: verdict.witnesses,
        }),
        Outcome::Embeddable => cg_from_params(
            &verdict
                .generator_rates()
                .expect("embeddable verdicts carry rates"),
        ),
    }
}

fn check_partition_subset(n: usize, k: Subset) -> Result<()> {
    if k.is_empty() {
        return Err(Error::EmptySet);
    }
    if !k.fits(n) {
        return Err(Error::SubsetOutOfRange { mask: k.mask(), n });
    }
    if k.len() > MAX_PARTITION_FORMULA_SIZE {
        return Err(Error::TooLarge {
            size: k.len(),
            max: MAX_PARTITION_FORMULA_SIZE,
        });
    }
    Ok(())
}

fn factorials(up_to: usize) -> Vec<f64> {
    let mut f = vec![1.0; up_to + 1];
    for k in 1..=up_to {
        f[k] = f[k - 1] * k as f64;
    }
    f
}

// Neumaier-compensated sum; the partition sums cancel heavily.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// `Σ_{𝒜 ∈ 𝒫(K)} (−1)^{|𝒜|−1} (|𝒜|−1)! · Σ_{A∈𝒜} f(A)`.
fn partition_cumulant(k: Subset, f: impl Fn(Subset) -> f64) -> Result<f64> {
    let fact = factorials(k.len());
    let parts = enumerate_partitions(k)?;
    Ok(compensated_sum(parts.map(|part| {
        let m = part.len();
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        sign * fact[m - 1] * part.blocks().iter().map(|&a| f(a)).sum::<f64>()
    })))
}

/// `r_K` through the partition lattice of `K`:
/// `(−1)^{|K|} Σ_𝒜 (−1)^{|𝒜|−1} (|𝒜|−1)! log Π_{A∈𝒜} q^{S−K}_A`.
pub fn partition_log_param(p: &CouponDistribution, k: Subset) -> Result<f64> {
    let n = p.n();
    check_partition_subset(n, k)?;
    check_nonsingular(p, DEFAULT_SINGULAR_TOL)?;
    let q = avoidance_probs(p);
    let outside = k.complement(n);
    let q_outside = q.get(outside);
    let sum = partition_cumulant(k, |a| (q.get(a.union(outside)) / q_outside).ln())?;
    Ok(if k.len().is_multiple_of(2) { sum } else { -sum })
}

/// Sign and size of the pair condition `p_∅ p_{i,j} >= p_i p_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairCondition {
    pub i: usize,
    pub j: usize,
    pub holds: bool,
    /// `p_∅ p_{i,j} − p_{i} p_{j}`.
    pub margin: f64,
}

/// `r_{i,j} >= 0 ⟺ p_∅ p_{i,j} >= p_{i} p_{j}` for 1-based elements `i ≠ j`.
pub fn pair_condition(p: &CouponDistribution, i: usize, j: usize) -> Result<PairCondition> {
    let n = p.n();
    for e in [i, j] {
        if e == 0 || e > n {
            return Err(Error::ElementOutOfRange { element: e, n });
        }
    }
    if i == j {
        return Err(Error::SameElement(i));
    }
    check_nonsingular(p, 0.0)?;
    let si = Subset::singleton(i);
    let sj = Subset::singleton(j);
    let margin = p.p_empty() * p.get(si.union(sj)) - p.get(si) * p.get(sj);
    Ok(PairCondition {
        i,
        j,
        holds: margin >= 0.0,
        margin,
    })
}

/// All pairs `i < j`.
pub fn pair_conditions(p: &CouponDistribution) -> Result<Vec<PairCondition>> {
    let n = p.n();
    let mut out = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            out.push(pair_condition(p, i, j)?);
        }
    }
    Ok(out)
}

/// `C_K = Σ_{𝒜 ∈ 𝒫(K)} (−1)^{|𝒜|−1} (|𝒜|−1)! Π_{A∈𝒜} P(A ⊆ Z)`.
pub fn correlation_function(p: &CouponDistribution, k: Subset) -> Result<f64> {
    let inclusion = zeta_supersets(p.probs());
    correlation_from_inclusion(&inclusion, k)
}

fn correlation_from_inclusion(inclusion: &SubsetVector, k: Subset) -> Result<f64> {
    check_partition_subset(inclusion.n(), k)?;
    let fact = factorials(k.len());
    let parts = enumerate_partitions(k)?;
    Ok(compensated_sum(parts.map(|part| {
        let m = part.len();
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        sign * fact[m - 1] * part.blocks().iter().map(|&a| inclusion[a]).product::<f64>()
    })))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationEntry {
    pub subset: Subset,
    pub value: f64,
}

/// Correlation functions for every non-empty `K` up to a cardinality cap, plus the pair margins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub correlations: Vec<CorrelationEntry>,
    pub pairs: Vec<PairCondition>,
}

pub fn correlation_report(p: &CouponDistribution, max_size: usize) -> Result<CorrelationReport> {
    let inclusion = zeta_supersets(p.probs());
    let cap = max_size.min(MAX_PARTITION_FORMULA_SIZE);
    let mut correlations = Vec::new();
    for k in crate::lattice::subsets_by_cardinality(p.n()) {
        if k.is_empty() || k.len() > cap {
            continue;
        }
        correlations.push(CorrelationEntry {
            subset: k,
            value: correlation_from_inclusion(&inclusion, k)?,
        });
    }
    let pairs = if p.p_empty() > 0.0 {
        pair_conditions(p)?
    } else {
        Vec::new()
    };
    Ok(CorrelationReport { correlations, pairs })
}
