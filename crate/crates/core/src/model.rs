//! CM and CG matrices and their parameter vectors.
//!
//! A CM matrix is the transition matrix of one step of the multiple coupon
//! collection process: from state `I` the chain moves to `I ∪ Z` where the
//! sampled set `Z` has law `p`, so
//!
//! ```text
//! M_IJ = Σ_{K : I ∪ K = J} p_K      (zero unless I ⊆ J)
//! ```
//!
//! A CG matrix has the same shape built from a zero-sum vector `r`; it is a
//! Markov generator exactly when `r_K >= 0` for every `K ≠ ∅`.
//!
//! Dense matrices are capped at [`MAX_DENSE_N`]; everything else here works
//! at vector level through the subset transforms.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::star_vectors;
use crate::error::{Error, Result};
use crate::lattice::{
    check_n, mobius_subsets, zeta_subsets, Subset, SubsetVector, MAX_VECTOR_N,
};
use crate::oracle::DenseMatrix;

/// Largest ground set for which dense `2^N × 2^N` matrices are built.
pub const MAX_DENSE_N: usize = 12;

/// Default tolerance for simplex and zero-sum checks on inputs.
pub const DEFAULT_STRUCTURE_TOL: f64 = 1e-12;

/// Tolerance used when wrapping computed probability vectors.
pub(crate) const COMPUTED_TOL: f64 = 1e-10;

/// The law `p` of the subset `Z` sampled in one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouponDistribution {
    p: SubsetVector,
}

impl CouponDistribution {
    /// Strict validation: every entry `>= 0`, entries sum to 1 within 1e-12.
    pub fn new(p: SubsetVector) -> Result<Self> {
        if let Some((k, v)) = p.iter().find(|&(_, v)| v < 0.0) {
            return Err(Error::NotStochastic {
                reason: format!("p_{k} = {v} is negative"),
            });
        }
        Self::check_sum(&p, DEFAULT_STRUCTURE_TOL)?;
        Ok(CouponDistribution { p })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        CouponDistribution::new(SubsetVector::from_values(values)?)
    }

    /// Accepts entries `>= −tol` (those in `[−tol, 0)` become 0) and a sum within `tol` of 1.
    pub fn with_tolerance(mut p: SubsetVector, tol: f64) -> Result<Self> {
        if let Some((k, v)) = p.iter().find(|&(_, v)| v < -tol) {
            return Err(Error::NotStochastic {
                reason: format!("p_{k} = {v} is negative"),
            });
        }
        for v in p.values_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Self::check_sum(&p, tol)?;
        Ok(CouponDistribution { p })
    }

    pub(crate) fn from_computed(p: SubsetVector) -> Result<Self> {
        CouponDistribution::with_tolerance(p, COMPUTED_TOL)
    }

    fn check_sum(p: &SubsetVector, tol: f64) -> Result<()> {
        let sum = p.sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::NotStochastic {
                reason: format!("entries sum to {sum}, not 1"),
            });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.p.n()
    }

    pub fn probs(&self) -> &SubsetVector {
        &self.p
    }

    pub fn into_inner(self) -> SubsetVector {
        self.p
    }

    pub fn get(&self, k: Subset) -> f64 {
        self.p[k]
    }

    /// `p_∅`; `M_p` is singular iff this is 0.
    pub fn p_empty(&self) -> f64 {
        self.p[Subset::EMPTY]
    }
}

/// A zero-sum parameter vector `r` of a CG matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateVector {
    r: SubsetVector,
}

impl RateVector {
    /// Requires `|Σ r_K| <= 1e-12 · max(1, Σ |r_K|)`.
    pub fn new(r: SubsetVector) -> Result<Self> {
        RateVector::with_tolerance(r, DEFAULT_STRUCTURE_TOL)
    }

    pub fn with_tolerance(r: SubsetVector, tol: f64) -> Result<Self> {
        let sum = r.sum();
        let l1: f64 = r.as_slice().iter().map(|v| v.abs()).sum();
        if sum.abs() > tol * l1.max(1.0) {
            return Err(Error::NotZeroSum { sum });
        }
        Ok(RateVector { r })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        RateVector::new(SubsetVector::from_values(values)?)
    }

    /// Builds `r` from the rates of the non-empty subsets; `r_∅` is set to minus their sum.
    pub fn from_nonempty_rates(
        n: usize,
        rates: impl IntoIterator<Item = (Subset, f64)>,
    ) -> Result<Self> {
        check_n(n, MAX_VECTOR_N)?;
        let mut r = SubsetVector::zeros(n);
        for (k, rate) in rates {
            if k.is_empty() {
                return Err(Error::InvalidArgument(
                    "the rate of the empty set is implied by the others".into(),
                ));
            }
            if !k.fits(n) {
                return Err(Error::SubsetOutOfRange { mask: k.mask(), n });
            }
            if !rate.is_finite() {
                return Err(Error::NonFinite { index: k.index() });
            }
            r[k] += rate;
        }
        let total: f64 = r.as_slice()[1..].iter().sum();
        r[Subset::EMPTY] = -total;
        Ok(RateVector { r })
    }

    pub(crate) fn from_raw(r: SubsetVector) -> Self {
        RateVector { r }
    }

    pub fn zero(n: usize) -> Self {
        RateVector {
            r: SubsetVector::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.r.n()
    }

    pub fn rates(&self) -> &SubsetVector {
        &self.r
    }

    pub fn into_inner(self) -> SubsetVector {
        self.r
    }

    pub fn get(&self, k: Subset) -> f64 {
        self.r[k]
    }

    /// The most negative `r_K` over `K ≠ ∅`, if any lies below `−tol`.
    pub fn most_negative(&self, tol: f64) -> Option<(Subset, f64)> {
        self.r
            .iter()
            .skip(1)
            .filter(|&(_, v)| v < -tol)
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// `r_K >= −tol` for every `K ≠ ∅`.
    pub fn is_generator(&self, tol: f64) -> bool {
        self.most_negative(tol).is_none()
    }

    pub(crate) fn require_generator(&self, tol: f64) -> Result<()> {
        match self.most_negative(tol) {
            Some((subset, rate)) => Err(Error::NotGenerator { subset, rate }),
            None => Ok(()),
        }
    }

    pub fn scaled(&self, factor: f64) -> RateVector {
        RateVector {
            r: self.r.scaled(factor),
        }
    }
}

/// A dense `2^n × 2^n` matrix indexed by subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeMatrix {
    n: usize,
    m: DenseMatrix,
}

impl LatticeMatrix {
    pub fn from_dense(m: DenseMatrix) -> Result<Self> {
        let d = m.dim();
        if d < 2 || !d.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(d));
        }
        let n = d.trailing_zeros() as usize;
        check_n(n, MAX_DENSE_N)?;
        Ok(LatticeMatrix { n, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn get(&self, row: Subset, col: Subset) -> f64 {
        self.m.get(row.index(), col.index())
    }

    pub fn as_dense(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn into_dense(self) -> DenseMatrix {
        self.m
    }

    /// Zero whenever the row set is not contained in the column set.
    pub fn max_off_lattice(&self) -> f64 {
        let d = self.dim() as u32;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                if i & j != i {
                    worst = worst.max(self.m.get(i as usize, j as usize).abs());
                }
            }
        }
        worst
    }
}

// M_IJ = Σ_{I∪K=J} x_K, one row per rayon task.
fn lattice_matrix_from_params(x: &SubsetVector) -> Result<LatticeMatrix> {
    let n = x.n();
    check_n(n, MAX_DENSE_N)?;
    let d = x.dim();
    let params = x.as_slice();
    let mut data = vec![0.0; d * d];
    data.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
        for (k, &v) in params.iter().enumerate() {
            row[i | k] += v;
        }
    });
    Ok(LatticeMatrix {
        n,
        m: DenseMatrix::from_vec(d, data),
    })
}

fn check_square_lattice(m: &DenseMatrix) -> Result<usize> {
    let d = m.dim();
    if d < 2 || !d.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(d));
    }
    let n = d.trailing_zeros() as usize;
    check_n(n, MAX_DENSE_N)?;
    Ok(n)
}

// Largest |M_IJ − synth_IJ|, with its position.
fn worst_deviation(m: &DenseMatrix, synth: &DenseMatrix) -> (Subset, Subset, f64) {
    let d = m.dim();
    let mut worst = (Subset::EMPTY, Subset::EMPTY, 0.0f64);
    for i in 0..d {
        for j in 0..d {
            let dev = (m.get(i, j) - synth.get(i, j)).abs();
            if dev > worst.2 {
                worst = (Subset::from_mask(i as u32), Subset::from_mask(j as u32), dev);
            }
        }
    }
    worst
}

/// The CM matrix `M_p`.
pub fn cm_from_params(p: &CouponDistribution) -> Result<LatticeMatrix> {
    lattice_matrix_from_params(p.probs())
}

/// Recovers `p` from row `∅` and checks that `M` is exactly the CM matrix of it.
pub fn params_from_cm(m: &DenseMatrix, tol: f64) -> Result<CouponDistribution> {
    let n = check_square_lattice(m)?;
    let row = SubsetVector::new(n, m.row(0).to_vec())?;
    let p = CouponDistribution::with_tolerance(row, tol)?;
    let synth = cm_from_params(&p)?;
    let (row, col, deviation) = worst_deviation(m, synth.as_dense());
    if deviation > tol {
        return Err(Error::NotCm {
            row,
            col,
            deviation,
        });
    }
    Ok(p)
}

/// The CG matrix `Q_r`: `Q_IJ = Σ_{I∪K=J} r_K`.
pub fn cg_from_params(r: &RateVector) -> Result<LatticeMatrix> {
    lattice_matrix_from_params(r.rates())
}

/// Recovers `r` (with `r_∅ = −Σ_{K≠∅} Q_∅K`) and checks the full CG structure.
pub fn params_from_cg(q: &DenseMatrix, tol: f64) -> Result<RateVector> {
    let n = check_square_lattice(q)?;
    let mut values = q.row(0).to_vec();
    values[0] = -values[1..].iter().sum::<f64>();
    let r = RateVector::from_raw(SubsetVector::new(n, values)?);
    let synth = cg_from_params(&r)?;
    let (row, col, deviation) = worst_deviation(q, synth.as_dense());
    if deviation > tol {
        return Err(Error::NotCg {
            row,
            col,
            deviation,
        });
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpectrumKind {
    /// Eigenvalues `λ_K` of a CM matrix.
    Cm,
    /// Eigenvalues `μ_K` of a CG matrix.
    Cg,
}

/// Eigenvalues labelled by subsets; they sit on the diagonal of the matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub kind: SpectrumKind,
    pub values: SubsetVector,
}

impl Spectrum {
    pub fn get(&self, k: Subset) -> f64 {
        self.values[k]
    }

    /// Pairwise-distinct eigenvalues, every gap larger than `tol`.
    pub fn is_simple(&self, tol: f64) -> bool {
        let mut sorted = self.values.as_slice().to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.windows(2).all(|w| w[1] - w[0] > tol)
    }
}

/// `λ_K = Σ_{I⊆K} p_I`.
pub fn eigenvalues_cm(p: &CouponDistribution) -> Spectrum {
    Spectrum {
        kind: SpectrumKind::Cm,
        values: zeta_subsets(p.probs()),
    }
}

/// `μ_K = Σ_{I⊆K} r_I`.
pub fn eigenvalues_cg(r: &RateVector) -> Spectrum {
    Spectrum {
        kind: SpectrumKind::Cg,
        values: zeta_subsets(r.rates()),
    }
}

/// The common eigenbasis of all CM matrices: column `K` is `v^K = Σ_{I⊆K} e^I`.
pub fn eigenbasis(n: usize) -> Result<LatticeMatrix> {
    check_n(n, MAX_DENSE_N)?;
    let d = 1usize << n;
    let m = DenseMatrix::from_fn(d, |i, k| if i & k == i { 1.0 } else { 0.0 });
    Ok(LatticeMatrix { n, m })
}

/// The extremal CM matrix `M^(K)`: a single 1 per row, at `(I, I ∪ K)`.
pub fn extremal_cm(n: usize, k: Subset) -> Result<LatticeMatrix> {
    check_n(n, MAX_DENSE_N)?;
    if !k.fits(n) {
        return Err(Error::SubsetOutOfRange { mask: k.mask(), n });
    }
    let d = 1usize << n;
    let mut m = DenseMatrix::zeros(d);
    for i in 0..d {
        m.set(i, i | k.index(), 1.0);
    }
    Ok(LatticeMatrix { n, m })
}

/// Independent sampling: element `i` is drawn with probability `π_i`, independently.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependentSpec {
    pi: Vec<f64>,
}

impl IndependentSpec {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        check_n(pi.len(), MAX_VECTOR_N)?;
        for (idx, &v) in pi.iter().enumerate() {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::DegenerateIndependent {
                    element: idx + 1,
                    value: v,
                });
            }
        }
        Ok(IndependentSpec { pi })
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Poisson rates `−log(1 − π_i)` of the matching continuous-time process.
    pub fn poisson_rates(&self) -> Vec<f64> {
        self.pi.iter().map(|&p| -(-p).ln_1p()).collect()
    }
}

/// `p_K = Π_{i∈K} π_i · Π_{j∉K} (1 − π_j)`.
pub fn independent_params(spec: &IndependentSpec) -> CouponDistribution {
    let mut values = vec![1.0];
    for &pi in spec.pi() {
        let mut next = Vec::with_capacity(values.len() * 2);
        next.extend(values.iter().map(|v| v * (1.0 - pi)));
        next.extend(values.iter().map(|v| v * pi));
        values = next;
    }
    CouponDistribution::with_tolerance(SubsetVector::from_raw(spec.n(), values), COMPUTED_TOL)
        .expect("a product measure is a probability vector")
}

/// Rates supported on singletons, `r_{i} = −log(1 − π_i)`.
pub fn independent_rates(spec: &IndependentSpec) -> RateVector {
    let rates = spec
        .poisson_rates()
        .into_iter()
        .enumerate()
        .map(|(i, r)| (Subset::singleton(i + 1), r));
    RateVector::from_nonempty_rates(spec.n(), rates).expect("validated spec")
}

/// Parameter vector of `M_p^m`, by `m − 1` star products.
pub fn cm_power_params(p: &CouponDistribution, m: usize) -> Result<CouponDistribution> {
    if m == 0 {
        return Err(Error::InvalidArgument("power must be at least 1".into()));
    }
    let mut acc = p.probs().clone();
    for _ in 1..m {
        acc = star_vectors(&acc, p.probs())?;
    }
    CouponDistribution::from_computed(acc)
}

/// Parameter vector of `M_p^m` as the Möbius transform of `λ^m`.
pub fn cm_power_params_spectral(p: &CouponDistribution, m: usize) -> Result<CouponDistribution> {
    if m == 0 {
        return Err(Error::InvalidArgument("power must be at least 1".into()));
    }
    let lambda = zeta_subsets(p.probs());
    let powered = lambda.map(|l| l.powi(m as i32));
    CouponDistribution::from_computed(mobius_subsets(&powered))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{invert_upper_triangular, is_markov, mat_mul};

    const LN2: f64 = std::f64::consts::LN_2;

    fn p_a() -> CouponDistribution {
        CouponDistribution::from_values(vec![0.4, 0.2, 0.2, 0.2]).unwrap()
    }

    fn s(elements: &[usize]) -> Subset {
        Subset::from_elements(4, elements).unwrap()
    }

    #[test]
    fn distribution_validation() {
        assert!(CouponDistribution::from_values(vec![0.5, 0.4]).is_err());
        assert!(CouponDistribution::from_values(vec![1.1, -0.1]).is_err());
        assert!(CouponDistribution::from_values(vec![-1e-14, 1.0 + 1e-14]).is_err());
        let p = CouponDistribution::with_tolerance(
            SubsetVector::new(1, vec![-1e-14, 1.0]).unwrap(),
            1e-12,
        )
        .unwrap();
        assert_eq!(p.get(Subset::EMPTY), 0.0);
    }

    #[test]
    fn rate_vector_validation() {
        assert!(RateVector::from_values(vec![-1.0, 0.5]).is_err());
        let r = RateVector::from_values(vec![-1.0, 0.5, 0.75, -0.25]).unwrap();
        assert!(!r.is_generator(1e-10));
        assert_eq!(r.most_negative(0.0), Some((Subset::full(2), -0.25)));
        let r = RateVector::from_nonempty_rates(2, [(Subset::singleton(1), 0.3)]).unwrap();
        assert_eq!(r.rates().as_slice(), &[-0.3, 0.3, 0.0, 0.0]);
        assert!(r.is_generator(0.0));
        assert!(RateVector::from_nonempty_rates(2, [(Subset::EMPTY, 0.3)]).is_err());
        assert!(RateVector::from_nonempty_rates(2, [(Subset::singleton(3), 0.3)]).is_err());
    }

    #[test]
    fn cm_of_unit_is_identity() {
        let m = cm_from_params(&CouponDistribution::new(SubsetVector::unit(3)).unwrap()).unwrap();
        assert_eq!(m.as_dense(), &DenseMatrix::identity(8));
    }

    #[test]
    fn cm_example_row() {
        let m = cm_from_params(&p_a()).unwrap();
        let one = Subset::singleton(1);
        let full = Subset::full(2);
        assert!((m.get(one, one) - 0.6).abs() < 1e-15);
        assert!((m.get(one, full) - 0.4).abs() < 1e-15);
        assert_eq!(m.get(one, Subset::EMPTY), 0.0);
        assert_eq!(m.get(one, Subset::singleton(2)), 0.0);
        assert_eq!(m.get(full, full), 1.0);
        assert!(is_markov(m.as_dense(), 1e-12));
        assert_eq!(m.max_off_lattice(), 0.0);
    }

    #[test]
    fn cm_of_indicator_is_extremal() {
        let k = s(&[1, 3]);
        let p = CouponDistribution::new(SubsetVector::indicator(3, k)).unwrap();
        assert_eq!(cm_from_params(&p).unwrap(), extremal_cm(3, k).unwrap());
    }

    #[test]
    fn params_from_cm_cases() {
        let id = DenseMatrix::identity(4);
        assert_eq!(
            params_from_cm(&id, 1e-12).unwrap().probs(),
            &SubsetVector::unit(2)
        );
        let m = cm_from_params(&p_a()).unwrap();
        assert_eq!(params_from_cm(m.as_dense(), 1e-12).unwrap(), p_a());

        // Markov but with mass flowing from {1} to {2}.
        let mut bad = m.into_dense();
        bad.set(1, 2, 0.1);
        bad.set(1, 1, 0.5);
        match params_from_cm(&bad, 1e-12) {
            Err(Error::NotCm { row, col, .. }) => {
                assert_eq!(row, Subset::singleton(1));
                assert!(col == Subset::singleton(2) || col == Subset::singleton(1));
            }
            other => panic!("expected NotCm, got {other:?}"),
        }

        let mut not_stoch = DenseMatrix::identity(2);
        not_stoch.set(0, 0, 0.5);
        assert!(matches!(
            params_from_cm(&not_stoch, 1e-12),
            Err(Error::NotStochastic { .. })
        ));
        assert!(matches!(
            params_from_cm(&DenseMatrix::identity(3), 1e-12),
            Err(Error::NotPowerOfTwo(3))
        ));
    }

    #[test]
    fn cg_examples() {
        assert_eq!(
            cg_from_params(&RateVector::zero(2)).unwrap().as_dense(),
            &DenseMatrix::zeros(4)
        );
        let r = RateVector::from_values(vec![-2.0 * LN2, LN2, LN2, 0.0]).unwrap();
        let q = cg_from_params(&r).unwrap();
        let e = Subset::EMPTY;
        assert!((q.get(e, e) + 2.0 * LN2).abs() < 1e-15);
        assert_eq!(q.get(e, Subset::singleton(1)), LN2);
        assert_eq!(q.get(e, Subset::singleton(2)), LN2);
        assert_eq!(q.get(e, Subset::full(2)), 0.0);
        for s in q.as_dense().row_sums() {
            assert!(s.abs() < 1e-12);
        }
        // Diagonal entry B_II = Σ_{K⊆I} r_K.
        assert!((q.get(Subset::singleton(1), Subset::singleton(1)) + LN2).abs() < 1e-15);
    }

    #[test]
    fn params_from_cg_cases() {
        assert_eq!(
            params_from_cg(&DenseMatrix::zeros(4), 1e-12).unwrap(),
            RateVector::zero(2)
        );
        let r = RateVector::from_values(vec![-0.9, 0.2, 0.3, 0.4]).unwrap();
        let q = cg_from_params(&r).unwrap();
        assert_eq!(params_from_cg(q.as_dense(), 1e-12).unwrap(), r);

        // Break B_{{1},S} = B_{∅,{2}} + B_{∅,S} while keeping zero row sums.
        let mut bad = q.into_dense();
        bad.add_to(1, 3, 0.05);
        bad.add_to(1, 1, -0.05);
        assert!(bad.row_sums().iter().all(|s| s.abs() < 1e-12));
        match params_from_cg(&bad, 1e-12) {
            Err(Error::NotCg { row, .. }) => assert_eq!(row, Subset::singleton(1)),
            other => panic!("expected NotCg, got {other:?}"),
        }
    }

    #[test]
    fn spectra() {
        let unit = CouponDistribution::new(SubsetVector::unit(2)).unwrap();
        assert_eq!(eigenvalues_cm(&unit).values.as_slice(), &[1.0; 4]);
        let lam = eigenvalues_cm(&p_a());
        for (a, b) in lam.values.as_slice().iter().zip([0.4, 0.6, 0.6, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(!lam.is_simple(1e-10));
        let diag = cm_from_params(&p_a()).unwrap().as_dense().diagonal();
        assert!(lam
            .values
            .as_slice()
            .iter()
            .zip(diag)
            .all(|(a, b)| (a - b).abs() < 1e-15));

        assert_eq!(
            eigenvalues_cg(&RateVector::zero(2)).values.as_slice(),
            &[0.0; 4]
        );
        let r = RateVector::from_values(vec![-2.0 * LN2, LN2, LN2, 0.0]).unwrap();
        let mu = eigenvalues_cg(&r);
        for (a, b) in mu.values.as_slice().iter().zip([-2.0 * LN2, -LN2, -LN2, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn eigenbasis_columns() {
        let v = eigenbasis(2).unwrap();
        // v^∅ = e^∅, v^S = all ones.
        let col = |k: usize| (0..4).map(|i| v.as_dense().get(i, k)).collect::<Vec<_>>();
        assert_eq!(col(0), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(col(3), vec![1.0; 4]);
        let m = cm_from_params(&p_a()).unwrap();
        let mv = mat_mul(m.as_dense(), v.as_dense()).unwrap();
        for i in 0..4 {
            assert!((mv.get(i, 1) - 0.6 * v.as_dense().get(i, 1)).abs() < 1e-15);
        }
        let vinv = invert_upper_triangular(v.as_dense()).unwrap();
        let diag = mat_mul(&vinv, &mv).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { [0.4, 0.6, 0.6, 1.0][i] } else { 0.0 };
                assert!((diag.get(i, j) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn extremal_matrices() {
        assert_eq!(
            extremal_cm(2, Subset::EMPTY).unwrap().as_dense(),
            &DenseMatrix::identity(4)
        );
        let m1 = extremal_cm(2, Subset::singleton(1)).unwrap();
        let m2 = extremal_cm(2, Subset::singleton(2)).unwrap();
        let ms = extremal_cm(2, Subset::full(2)).unwrap();
        assert_eq!(&mat_mul(m1.as_dense(), m2.as_dense()).unwrap(), ms.as_dense());
        for i in 0..4 {
            assert_eq!(ms.as_dense().get(i, 3), 1.0);
        }
        assert!(extremal_cm(2, Subset::singleton(3)).is_err());
    }

    #[test]
    fn independent_examples() {
        let p = independent_params(&IndependentSpec::new(vec![0.5, 0.5]).unwrap());
        assert_eq!(p.probs().as_slice(), &[0.25; 4]);
        let p = independent_params(&IndependentSpec::new(vec![0.1]).unwrap());
        assert!((p.get(Subset::EMPTY) - 0.9).abs() < 1e-15);
        assert!((p.get(Subset::singleton(1)) - 0.1).abs() < 1e-15);
        assert!(matches!(
            IndependentSpec::new(vec![0.5, 1.0]),
            Err(Error::DegenerateIndependent { element: 2, .. })
        ));
        assert!(IndependentSpec::new(vec![0.0]).is_err());
        let r = independent_rates(&IndependentSpec::new(vec![0.5, 0.5]).unwrap());
        for (a, b) in r.rates().as_slice().iter().zip([-2.0 * LN2, LN2, LN2, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn powers() {
        assert_eq!(cm_power_params(&p_a(), 1).unwrap(), p_a());
        let sq = cm_power_params(&p_a(), 2).unwrap();
        for (a, b) in sq.probs().as_slice().iter().zip([0.16, 0.2, 0.2, 0.44]) {
            assert!((a - b).abs() < 1e-15);
        }
        for m in 1..6 {
            let iter = cm_power_params(&p_a(), m).unwrap();
            let spec = cm_power_params_spectral(&p_a(), m).unwrap();
            assert!(iter.probs().max_abs_diff(spec.probs()) < 1e-14);
            let lam = zeta_subsets(iter.probs());
            let base = zeta_subsets(p_a().probs());
            for (l, b) in lam.as_slice().iter().zip(base.as_slice()) {
                assert!((l - b.powi(m as i32)).abs() < 1e-14);
            }
        }
        assert!(cm_power_params(&p_a(), 0).is_err());
        // Row ∅ of M² equals p ⋆ p.
        let m = cm_from_params(&p_a()).unwrap();
        let m2 = mat_mul(m.as_dense(), m.as_dense()).unwrap();
        for (a, b) in m2.row(0).iter().zip(sq.probs().as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
