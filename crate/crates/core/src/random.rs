//! Random model instances for property tests, the acceptance suite and `verify --random`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::algebra::{exp_closed, ModuliVector};
use crate::error::{Error, Result};
use crate::lattice::{check_n, Subset, SubsetVector, MAX_VECTOR_N};
use crate::model::{CouponDistribution, IndependentSpec, RateVector};

/// Uniform draw from the probability simplex on `2^S` (flat Dirichlet).
pub fn random_distribution<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CouponDistribution> {
    check_n(n, MAX_VECTOR_N)?;
    let mut values: Vec<f64> = (0..1usize << n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = values.iter().sum();
    values.iter_mut().for_each(|v| *v /= total);
    CouponDistribution::from_computed(SubsetVector::from_raw(n, values))
}

/// `a·ε + (1 − a)·d` with `d` flat Dirichlet, so `p_∅ >= a`.
pub fn random_distribution_with_empty<R: Rng + ?Sized>(
    n: usize,
    min_p_empty: f64,
    rng: &mut R,
) -> Result<CouponDistribution> {
    if !(0.0..=1.0).contains(&min_p_empty) {
        return Err(Error::InvalidArgument(format!(
            "minimum p_empty {min_p_empty} outside [0, 1]"
        )));
    }
    let d = random_distribution(n, rng)?;
    let mut values = d.into_inner().scaled(1.0 - min_p_empty);
    values[Subset::EMPTY] += min_p_empty;
    CouponDistribution::from_computed(values)
}

/// Nonnegative rates on the non-empty subsets with total `Σ_{K≠∅} r_K = total`.
/// Each rate is zeroed with probability `sparsity`.
pub fn random_generator_rates<R: Rng + ?Sized>(
    n: usize,
    total: f64,
    sparsity: f64,
    rng: &mut R,
) -> Result<RateVector> {
    check_n(n, MAX_VECTOR_N)?;
    if !(total >= 0.0 && total.is_finite()) {
        return Err(Error::InvalidArgument(format!("total rate {total} must be finite and >= 0")));
    }
    let weights: Vec<f64> = (1..1u32 << n)
        .map(|_| {
            if rng.random::<f64>() < sparsity {
                0.0
            } else {
                Exp1.sample(rng)
            }
        })
        .collect();
    let sum: f64 = weights.iter().sum();
    let scale = if sum > 0.0 { total / sum } else { 0.0 };
    RateVector::from_nonempty_rates(
        n,
        weights
            .into_iter()
            .enumerate()
            .map(|(i, w)| (Subset::from_mask(i as u32 + 1), w * scale)),
    )
}

/// An embeddable distribution `Exp(r)` for random generator parameters `r`,
/// with `p_∅ = e^{−Σ r_K}` uniform on `[min_p_empty, 1]` in log scale.
pub fn random_embeddable<R: Rng + ?Sized>(
    n: usize,
    min_p_empty: f64,
    rng: &mut R,
) -> Result<CouponDistribution> {
    if !(min_p_empty > 0.0 && min_p_empty <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "minimum p_empty {min_p_empty} outside (0, 1]"
        )));
    }
    let total = -min_p_empty.ln() * rng.random::<f64>();
    let sparsity = rng.random::<f64>() * 0.5;
    let r = random_generator_rates(n, total, sparsity, rng)?;
    CouponDistribution::from_computed(exp_closed(&ModuliVector::from(r)).into_values())
}

/// Zero-sum vector with non-empty entries uniform on `[−scale, scale]`.
pub fn random_zero_sum<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> Result<RateVector> {
    check_n(n, MAX_VECTOR_N)?;
    RateVector::from_nonempty_rates(
        n,
        (1..1u32 << n).map(|k| (Subset::from_mask(k), rng.random_range(-scale..=scale))),
    )
}

/// Vector with every entry uniform on `[−scale, scale]`.
pub fn random_vector<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> Result<SubsetVector> {
    check_n(n, MAX_VECTOR_N)?;
    Ok(SubsetVector::from_fn(n, |_| rng.random_range(-scale..=scale)))
}

/// Inclusion probabilities uniform on `[0.02, 0.98]`.
pub fn random_independent<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<IndependentSpec> {
    IndependentSpec::new((0..n).map(|_| rng.random_range(0.02..=0.98)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{embeddability_verdict, DEFAULT_VERDICT_TOL};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distributions_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=6 {
            let p = random_distribution(n, &mut rng).unwrap();
            assert!((p.probs().sum() - 1.0).abs() < 1e-12);
            let p = random_distribution_with_empty(n, 0.3, &mut rng).unwrap();
            assert!(p.p_empty() >= 0.3);
        }
    }

    #[test]
    fn embeddable_instances_pass_the_verdict() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=6 {
            for _ in 0..20 {
                let p = random_embeddable(n, 0.05, &mut rng).unwrap();
                assert!(p.p_empty() >= 0.05 - 1e-12);
                assert!(embeddability_verdict(&p, DEFAULT_VERDICT_TOL).is_embeddable());
            }
        }
    }

    #[test]
    fn generator_rates_hit_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_generator_rates(4, 2.5, 0.3, &mut rng).unwrap();
        assert!(r.is_generator(0.0));
        assert!((r.get(Subset::EMPTY) + 2.5).abs() < 1e-12);
        let z = random_zero_sum(4, 1.0, &mut rng).unwrap();
        assert!(z.rates().sum().abs() < 1e-12);
    }
}
