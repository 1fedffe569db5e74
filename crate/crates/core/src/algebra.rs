//! The parameter-vector algebra `(ℝ^d, +, ⋆)`.
//!
//! `(x ⋆ y)_K = Σ_{I∪J=K} x_I y_J` mirrors the product of CM/CG matrices on
//! their parameter vectors, with unit `ε`. The zeta transform turns `⋆` into
//! the pointwise product, so `Exp` and `Log` have closed forms through it;
//! the series versions are kept as independent cross-checks.

use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::DEFAULT_VERDICT_TOL;
use crate::error::{Error, Result};
use crate::lattice::{mobius_subsets, zeta_subsets, Subset, SubsetVector};
use crate::model::{CouponDistribution, RateVector, DEFAULT_STRUCTURE_TOL};

/// Series terms below this lattice norm (relative to the partial sum) are dropped.
pub const SERIES_TERM_TOL: f64 = 1e-16;
/// Term guard for [`exp_series`].
pub const EXP_SERIES_MAX_TERMS: usize = 400;
/// Term guard for [`log_series`].
pub const LOG_SERIES_MAX_TERMS: usize = 50_000;

// Below this dimension the star product stays on one thread.
const PAR_DIM: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModuliKind {
    /// Any vector of `ℝ^d`.
    General,
    /// Entries sum to 0: parameter vectors of CG matrices.
    ZeroSum,
    /// Entries sum to 1: parameter vectors of matrices with unit row sums.
    UnitSum,
}

/// A parameter vector tagged with the affine subspace it lives in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuliVector {
    values: SubsetVector,
    kind: ModuliKind,
}

fn sum_within(values: &SubsetVector, target: f64) -> bool {
    let l1: f64 = values.as_slice().iter().map(|v| v.abs()).sum();
    (values.sum() - target).abs() <= DEFAULT_STRUCTURE_TOL * l1.max(1.0)
}

impl ModuliVector {
    pub fn general(values: SubsetVector) -> Self {
        ModuliVector {
            values,
            kind: ModuliKind::General,
        }
    }

    pub fn zero_sum(values: SubsetVector) -> Result<Self> {
        if !sum_within(&values, 0.0) {
            return Err(Error::NotZeroSum { sum: values.sum() });
        }
        Ok(ModuliVector {
            values,
            kind: ModuliKind::ZeroSum,
        })
    }

    pub fn unit_sum(values: SubsetVector) -> Result<Self> {
        if !sum_within(&values, 1.0) {
            return Err(Error::NotStochastic {
                reason: format!("entries sum to {}, not 1", values.sum()),
            });
        }
        Ok(ModuliVector {
            values,
            kind: ModuliKind::UnitSum,
        })
    }

    /// The unit `ε`.
    pub fn unit(n: usize) -> Self {
        ModuliVector {
            values: SubsetVector::unit(n),
            kind: ModuliKind::UnitSum,
        }
    }

    pub fn zero(n: usize) -> Self {
        ModuliVector {
            values: SubsetVector::zeros(n),
            kind: ModuliKind::ZeroSum,
        }
    }

    pub fn n(&self) -> usize {
        self.values.n()
    }

    pub fn kind(&self) -> ModuliKind {
        self.kind
    }

    pub fn values(&self) -> &SubsetVector {
        &self.values
    }

    pub fn into_values(self) -> SubsetVector {
        self.values
    }

    pub fn get(&self, k: Subset) -> f64 {
        self.values[k]
    }

    /// Sum, with the tag kept only when both operands share it.
    pub fn add(&self, other: &ModuliVector) -> Result<ModuliVector> {
        check_same_n(self, other)?;
        let kind = match (self.kind, other.kind) {
            (ModuliKind::ZeroSum, ModuliKind::ZeroSum) => ModuliKind::ZeroSum,
            _ => ModuliKind::General,
        };
        Ok(ModuliVector {
            values: self.values.add(&other.values),
            kind,
        })
    }

    pub fn scaled(&self, factor: f64) -> ModuliVector {
        let kind = match self.kind {
            ModuliKind::ZeroSum => ModuliKind::ZeroSum,
            _ => ModuliKind::General,
        };
        ModuliVector {
            values: self.values.scaled(factor),
            kind,
        }
    }
}

impl From<RateVector> for ModuliVector {
    fn from(r: RateVector) -> Self {
        ModuliVector {
            values: r.into_inner(),
            kind: ModuliKind::ZeroSum,
        }
    }
}

impl From<CouponDistribution> for ModuliVector {
    fn from(p: CouponDistribution) -> Self {
        ModuliVector {
            values: p.into_inner(),
            kind: ModuliKind::UnitSum,
        }
    }
}

fn check_same_n(x: &ModuliVector, y: &ModuliVector) -> Result<()> {
    if x.n() != y.n() {
        return Err(Error::DimensionMismatch {
            left: x.values.dim(),
            right: y.values.dim(),
        });
    }
    Ok(())
}

// (x ⋆ y)_K = Σ_{I⊆K} x_I Σ_{J'⊆I} y_{(K−I) ∪ J'}: J must cover K − I and may
// add any part of I.
fn star_coordinate(x: &[f64], y: &[f64], k: u32) -> f64 {
    let mut acc = 0.0;
    for i in Subset::from_mask(k).submasks() {
        let xi = x[i.index()];
        if xi == 0.0 {
            continue;
        }
        let mandatory = k & !i.mask();
        let inner: f64 = i.submasks().map(|j| y[(mandatory | j.mask()) as usize]).sum();
        acc += xi * inner;
    }
    acc
}

/// `⋆` on raw subset vectors, one output coordinate at a time.
pub fn star_vectors(x: &SubsetVector, y: &SubsetVector) -> Result<SubsetVector> {
    if x.n() != y.n() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    let d = x.dim();
    let (xs, ys) = (x.as_slice(), y.as_slice());
    let values: Vec<f64> = if d >= PAR_DIM {
        (0..d as u32)
            .into_par_iter()
            .map(|k| star_coordinate(xs, ys, k))
            .collect()
    } else {
        (0..d as u32).map(|k| star_coordinate(xs, ys, k)).collect()
    };
    Ok(SubsetVector::from_raw(x.n(), values))
}

fn product_kind(a: ModuliKind, b: ModuliKind) -> ModuliKind {
    match (a, b) {
        (ModuliKind::ZeroSum, _) | (_, ModuliKind::ZeroSum) => ModuliKind::ZeroSum,
        (ModuliKind::UnitSum, ModuliKind::UnitSum) => ModuliKind::UnitSum,
        _ => ModuliKind::General,
    }
}

/// The commutative product `⋆`; sums multiply (`Σ(x⋆y) = Σx · Σy`).
pub fn star(x: &ModuliVector, y: &ModuliVector) -> Result<ModuliVector> {
    check_same_n(x, y)?;
    Ok(ModuliVector {
        values: star_vectors(&x.values, &y.values)?,
        kind: product_kind(x.kind, y.kind),
    })
}

/// `‖x‖ = max_K |Σ_{I⊆K} x_I|`, the largest eigenvalue modulus of the matrix of `x`.
pub fn lattice_norm(x: &ModuliVector) -> f64 {
    vector_norm(&x.values)
}

fn vector_norm(x: &SubsetVector) -> f64 {
    zeta_subsets(x).max_abs()
}

fn exp_kind(kind: ModuliKind) -> ModuliKind {
    match kind {
        ModuliKind::ZeroSum => ModuliKind::UnitSum,
        _ => ModuliKind::General,
    }
}

/// `Exp(x) = Σ_n x^{⋆n} / n!`, summed term by term.
pub fn exp_series(x: &ModuliVector) -> Result<ModuliVector> {
    let n = x.n();
    let mut sum = SubsetVector::unit(n);
    let mut term = SubsetVector::unit(n);
    for k in 1..=EXP_SERIES_MAX_TERMS {
        term = star_vectors(&term, &x.values)?.scaled(1.0 / k as f64);
        sum = sum.add(&term);
        if vector_norm(&term) < SERIES_TERM_TOL * vector_norm(&sum).max(1.0) {
            return Ok(ModuliVector {
                values: sum,
                kind: exp_kind(x.kind),
            });
        }
    }
    Err(Error::NonConvergence {
        norm: lattice_norm(x),
        terms: EXP_SERIES_MAX_TERMS,
    })
}

/// `Exp(r)_K = Σ_{J⊆K} (−1)^{|K−J|} exp(Σ_{I⊆J} r_I)`: zeta, pointwise exp, Möbius.
pub fn exp_closed(r: &ModuliVector) -> ModuliVector {
    let mu = zeta_subsets(&r.values);
    ModuliVector {
        values: mobius_subsets(&mu.map(f64::exp)),
        kind: exp_kind(r.kind),
    }
}

/// `Log(ε + x) = Σ_{n≥1} (−1)^{n−1} x^{⋆n} / n`, valid for `‖x‖ < 1`.
pub fn log_series(y: &ModuliVector) -> Result<ModuliVector> {
    let n = y.n();
    let x = y.values.sub(&SubsetVector::unit(n));
    let norm = vector_norm(&x);
    if norm.is_nan() || norm >= 1.0 {
        return Err(Error::OutOfConvergenceRegion { norm });
    }
    let kind = match y.kind {
        ModuliKind::UnitSum => ModuliKind::ZeroSum,
        _ => ModuliKind::General,
    };
    let mut sum = x.clone();
    let mut power = x.clone();
    for k in 2..=LOG_SERIES_MAX_TERMS {
        power = star_vectors(&power, &x)?;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let term = power.scaled(sign / k as f64);
        sum = sum.add(&term);
        if vector_norm(&term) < SERIES_TERM_TOL * vector_norm(&sum).max(1.0) {
            return Ok(ModuliVector { values: sum, kind });
        }
    }
    if norm == 0.0 {
        return Ok(ModuliVector { values: sum, kind });
    }
    Err(Error::NonConvergence {
        norm,
        terms: LOG_SERIES_MAX_TERMS,
    })
}

/// `(ε + x/m)^{⋆m}` by repeated squaring.
pub fn euler_limit(x: &ModuliVector, m: u64) -> Result<ModuliVector> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let n = x.n();
    let mut base = x.values.scaled(1.0 / m as f64);
    base[Subset::EMPTY] += 1.0;
    let mut acc = SubsetVector::unit(n);
    let mut e = m;
    loop {
        if e & 1 == 1 {
            acc = star_vectors(&acc, &base)?;
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = star_vectors(&base, &base)?;
    }
    Ok(ModuliVector {
        values: acc,
        kind: exp_kind(x.kind),
    })
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidTime(t));
    }
    Ok(())
}

/// Parameter vector `p(t) = Exp(t r)` of `e^{t Q_r}`.
pub fn semigroup_params(r: &RateVector, t: f64) -> Result<CouponDistribution> {
    check_time(t)?;
    r.require_generator(DEFAULT_VERDICT_TOL)?;
    let scaled = ModuliVector::general(r.rates().scaled(t));
    CouponDistribution::from_computed(exp_closed(&scaled).into_values())
}

/// Piecewise-constant generator parameters `q(τ)` on `[t_{j−1}, t_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseRateSchedule {
    breakpoints: Vec<f64>,
    rates: Vec<RateVector>,
}

impl PiecewiseRateSchedule {
    /// `breakpoints` must start at 0 and increase strictly; `rates[j]` applies on
    /// `[breakpoints[j], breakpoints[j + 1])`.
    pub fn new(breakpoints: Vec<f64>, rates: Vec<RateVector>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidSchedule(
                "need at least one interval".into(),
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidSchedule("first breakpoint must be 0".into()));
        }
        if breakpoints.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidSchedule("breakpoints must be finite".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSchedule(
                "breakpoints must increase strictly".into(),
            ));
        }
        if rates.len() != breakpoints.len() - 1 {
            return Err(Error::InvalidSchedule(format!(
                "{} intervals but {} rate vectors",
                breakpoints.len() - 1,
                rates.len()
            )));
        }
        let n = rates[0].n();
        for (j, r) in rates.iter().enumerate() {
            if r.n() != n {
                return Err(Error::InvalidSchedule(format!(
                    "interval {j} has ground-set size {} instead of {n}",
                    r.n()
                )));
            }
            if let Some((k, v)) = r.most_negative(DEFAULT_VERDICT_TOL) {
                return Err(Error::InvalidSchedule(format!(
                    "interval {j} is not a generator: r_{k} = {v}"
                )));
            }
        }
        Ok(PiecewiseRateSchedule { breakpoints, rates })
    }

    /// A single interval `[0, end)` with constant rates.
    pub fn constant(r: RateVector, end: f64) -> Result<Self> {
        PiecewiseRateSchedule::new(vec![0.0, end], vec![r])
    }

    pub fn n(&self) -> usize {
        self.rates[0].n()
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().expect("non-empty")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn rates(&self) -> &[RateVector] {
        &self.rates
    }

    /// `r(t) = ∫_0^t q(τ) dτ`, integrated exactly.
    pub fn integrated_rates(&self, t: f64) -> Result<RateVector> {
        check_time(t)?;
        if t > self.end() {
            return Err(Error::BeyondSchedule { t, end: self.end() });
        }
        let mut acc = SubsetVector::zeros(self.n());
        for (w, q) in self.breakpoints.windows(2).zip(&self.rates) {
            let len = t.min(w[1]) - w[0];
            if len <= 0.0 {
                break;
            }
            acc = acc.add(&q.rates().scaled(len));
        }
        Ok(RateVector::from_raw(acc))
    }
}

/// `p(t) = Exp(r(t))` for the time-inhomogeneous flow driven by `schedule`.
pub fn flow_params(schedule: &PiecewiseRateSchedule, t: f64) -> Result<CouponDistribution> {
    let r = schedule.integrated_rates(t)?;
    CouponDistribution::from_computed(exp_closed(&ModuliVector::from(r)).into_values())
}
