//! The subset lattice `2^S` of `S = {1, ..., N}` in bitmask form.
//!
//! Element `i` (1-based) is bit `i - 1`. Numeric mask order is a linear
//! extension of inclusion (`I ⊆ J` implies `mask(I) <= mask(J)`), so every
//! matrix indexed this way whose support lies on `I ⊆ J` is upper triangular.
//!
//! The zeta and Möbius transforms here are the `O(N 2^N)` per-bit sweeps.
//! Bits are always swept in ascending order, so results are reproducible
//! bit for bit.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest ground set supported by vector-level operations.
pub const MAX_VECTOR_N: usize = 24;

/// Largest set whose partitions we are willing to enumerate.
pub const MAX_PARTITION_SIZE: usize = 12;

/// Largest ground set accepted by [`partition_alternating_sum`].
pub const MAX_ALTERNATING_SUM_N: usize = 10;

/// A subset of `S`, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Subset(u32);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub const fn from_mask(mask: u32) -> Self {
        Subset(mask)
    }

    /// The whole ground set `{1, ..., n}`.
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= 31);
        Subset(((1u64 << n) - 1) as u32)
    }

    /// `{element}` with 1-based `element`.
    pub fn singleton(element: usize) -> Self {
        debug_assert!((1..=32).contains(&element));
        Subset(1 << (element - 1))
    }

    /// Builds a subset from 1-based element labels, checking them against `n`.
    pub fn from_elements(n: usize, elements: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        for &e in elements {
            if e == 0 || e > n {
                return Err(Error::ElementOutOfRange { element: e, n });
            }
            mask |= 1 << (e - 1);
        }
        Ok(Subset(mask))
    }

    pub const fn mask(self) -> u32 {
        self.0
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Cardinality `|K|`.
    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn contains(self, element: usize) -> bool {
        element >= 1 && element <= 32 && self.0 & (1 << (element - 1)) != 0
    }

    pub const fn is_subset_of(self, other: Subset) -> bool {
        self.0 & other.0 == self.0
    }

    pub const fn union(self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    pub const fn intersection(self, other: Subset) -> Subset {
        Subset(self.0 & other.0)
    }

    /// `self − other`.
    pub const fn difference(self, other: Subset) -> Subset {
        Subset(self.0 & !other.0)
    }

    /// Complement within `{1, ..., n}`.
    pub fn complement(self, n: usize) -> Subset {
        Subset(Subset::full(n).0 & !self.0)
    }

    pub fn fits(self, n: usize) -> bool {
        self.is_subset_of(Subset::full(n))
    }

    /// 1-based elements in ascending order.
    pub fn elements(self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut m = self.0;
        while m != 0 {
            out.push(m.trailing_zeros() as usize + 1);
            m &= m - 1;
        }
        out
    }

    /// All subsets of `self`, in descending mask order, `self` first and `∅` last.
    pub fn submasks(self) -> Submasks {
        Submasks {
            universe: self.0,
            next: Some(self.0),
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, e) in self.elements().into_iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Iterator over the submasks of a fixed mask.
#[derive(Debug, Clone)]
pub struct Submasks {
    universe: u32,
    next: Option<u32>,
}

impl Iterator for Submasks {
    type Item = Subset;

    fn next(&mut self) -> Option<Subset> {
        let cur = self.next?;
        self.next = if cur == 0 {
            None
        } else {
            Some((cur - 1) & self.universe)
        };
        Some(Subset(cur))
    }
}

/// All subsets of `{1, ..., n}` ordered by cardinality, then by mask.
pub fn subsets_by_cardinality(n: usize) -> Vec<Subset> {
    let mut all: Vec<Subset> = (0..1u32 << n).map(Subset).collect();
    all.sort_by_key(|s| (s.len(), s.mask()));
    all
}

pub(crate) fn check_n(n: usize, max: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyGroundSet);
    }
    if n > max {
        return Err(Error::TooLarge { size: n, max });
    }
    Ok(())
}

/// A real vector indexed by the subsets of `{1, ..., n}`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetVector {
    n: usize,
    values: Vec<f64>,
}

impl SubsetVector {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        check_n(n, MAX_VECTOR_N)?;
        if values.len() != 1 << n {
            return Err(Error::InvalidLength {
                n,
                len: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(SubsetVector { n, values })
    }

    /// Infers `n` from the length, which must be a power of two `>= 2`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let len = values.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        SubsetVector::new(len.trailing_zeros() as usize, values)
    }

    pub(crate) fn from_raw(n: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), 1 << n);
        SubsetVector { n, values }
    }

    pub fn zeros(n: usize) -> Self {
        SubsetVector::from_raw(n, vec![0.0; 1 << n])
    }

    pub fn ones(n: usize) -> Self {
        SubsetVector::from_raw(n, vec![1.0; 1 << n])
    }

    /// The unit `ε`: 1 at `∅`, 0 elsewhere.
    pub fn unit(n: usize) -> Self {
        SubsetVector::indicator(n, Subset::EMPTY)
    }

    /// `e^(K)`: 1 at `K`, 0 elsewhere.
    pub fn indicator(n: usize, k: Subset) -> Self {
        let mut v = SubsetVector::zeros(n);
        v.values[k.index()] = 1.0;
        v
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(Subset) -> f64) -> Self {
        SubsetVector::from_raw(n, (0..1u32 << n).map(|m| f(Subset(m))).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `d = 2^n`.
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn full_set(&self) -> Subset {
        Subset::full(self.n)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Subset, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (Subset(i as u32), v))
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &SubsetVector) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SubsetVector {
        SubsetVector::from_raw(self.n, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, factor: f64) -> SubsetVector {
        self.map(|v| v * factor)
    }

    pub fn zip_with(&self, other: &SubsetVector, f: impl Fn(f64, f64) -> f64) -> SubsetVector {
        assert_eq!(self.n, other.n, "dimension mismatch");
        SubsetVector::from_raw(
            self.n,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &SubsetVector) -> SubsetVector {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SubsetVector) -> SubsetVector {
        self.zip_with(other, |a, b| a - b)
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

impl Index<Subset> for SubsetVector {
    type Output = f64;

    fn index(&self, k: Subset) -> &f64 {
        &self.values[k.index()]
    }
}

impl IndexMut<Subset> for SubsetVector {
    fn index_mut(&mut self, k: Subset) -> &mut f64 {
        &mut self.values[k.index()]
    }
}

impl fmt::Debug for SubsetVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubsetVector")
            .field("n", &self.n)
            .field("values", &self.values)
            .finish()
    }
}

// Per-bit sweeps over a slice of length 2^n. For each bit, `lo` holds the
// lanes with the bit clear and `hi` the matching lanes with it set.
fn sweep(xs: &mut [f64], op: impl Fn(&mut f64, &mut f64)) {
    let len = xs.len();
    let mut half = 1;
    while half < len {
        for block in xs.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi) {
                op(a, b);
            }
        }
        half <<= 1;
    }
}

/// In-place `y_K = Σ_{I⊆K} x_I`.
pub fn zeta_subsets_in_place(xs: &mut [f64]) {
    sweep(xs, |lo, hi| *hi += *lo);
}

/// In-place inverse of [`zeta_subsets_in_place`].
pub fn mobius_subsets_in_place(xs: &mut [f64]) {
    sweep(xs, |lo, hi| *hi -= *lo);
}

/// In-place `y_A = Σ_{J⊇A} x_J`.
pub fn zeta_supersets_in_place(xs: &mut [f64]) {
    sweep(xs, |lo, hi| *lo += *hi);
}

/// In-place inverse of [`zeta_supersets_in_place`].
pub fn mobius_supersets_in_place(xs: &mut [f64]) {
    sweep(xs, |lo, hi| *lo -= *hi);
}

/// Subset-sum (zeta) transform: `y_K = Σ_{I⊆K} x_I`.
pub fn zeta_subsets(x: &SubsetVector) -> SubsetVector {
    let mut y = x.clone();
    zeta_subsets_in_place(y.values_mut());
    y
}

/// Möbius transform: `x_K = Σ_{I⊆K} (−1)^{|K−I|} y_I`, the inverse of [`zeta_subsets`].
pub fn mobius_subsets(y: &SubsetVector) -> SubsetVector {
    let mut x = y.clone();
    mobius_subsets_in_place(x.values_mut());
    x
}

/// Superset-sum transform: `y_A = Σ_{J⊇A} x_J`.
pub fn zeta_supersets(x: &SubsetVector) -> SubsetVector {
    let mut y = x.clone();
    zeta_supersets_in_place(y.values_mut());
    y
}

/// Inverse of [`zeta_supersets`].
pub fn mobius_supersets(y: &SubsetVector) -> SubsetVector {
    let mut x = y.clone();
    mobius_supersets_in_place(x.values_mut());
    x
}

/// A partition of some non-empty set `K` into non-empty disjoint blocks.
///
/// Blocks are stored in order of their smallest element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetPartition {
    blocks: Vec<Subset>,
}

impl SetPartition {
    pub fn blocks(&self) -> &[Subset] {
        &self.blocks
    }

    /// Number of blocks `|𝒜|`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Union of the blocks.
    pub fn ground(&self) -> Subset {
        self.blocks
            .iter()
            .fold(Subset::EMPTY, |acc, &b| acc.union(b))
    }
}

/// Iterator over the partitions of a set, in restricted-growth-string order.
///
/// The first partition is the single block `{K}`, the last one is all
/// singletons.
#[derive(Debug, Clone)]
pub struct Partitions {
    elements: Vec<u32>,
    // rgs[i] = block label of elements[i]; prefix_max[i] = max(rgs[..=i]).
    rgs: Vec<usize>,
    prefix_max: Vec<usize>,
    done: bool,
}

impl Partitions {
    fn current(&self) -> SetPartition {
        let blocks_len = self.prefix_max.last().map_or(0, |m| m + 1);
        let mut blocks = vec![Subset::EMPTY; blocks_len];
        for (&bit, &label) in self.elements.iter().zip(&self.rgs) {
            blocks[label] = Subset(blocks[label].0 | bit);
        }
        SetPartition { blocks }
    }

    fn advance(&mut self) {
        let len = self.rgs.len();
        for i in (1..len).rev() {
            if self.rgs[i] <= self.prefix_max[i - 1] {
                self.rgs[i] += 1;
                self.prefix_max[i] = self.prefix_max[i - 1].max(self.rgs[i]);
                for j in i + 1..len {
                    self.rgs[j] = 0;
                    self.prefix_max[j] = self.prefix_max[i];
                }
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for Partitions {
    type Item = SetPartition;

    fn next(&mut self) -> Option<SetPartition> {
        if self.done {
            return None;
        }
        let out = self.current();
        self.advance();
        Some(out)
    }
}

/// Enumerates every partition of `k` exactly once.
pub fn enumerate_partitions(k: Subset) -> Result<Partitions> {
    if k.is_empty() {
        return Err(Error::EmptySet);
    }
    if k.len() > MAX_PARTITION_SIZE {
        return Err(Error::TooLarge {
            size: k.len(),
            max: MAX_PARTITION_SIZE,
        });
    }
    let elements: Vec<u32> = k.elements().iter().map(|e| 1u32 << (e - 1)).collect();
    let len = elements.len();
    Ok(Partitions {
        elements,
        rgs: vec![0; len],
        prefix_max: vec![0; len],
        done: false,
    })
}

/// `Σ_{𝒜 ∈ 𝒫(S)} (−1)^{|𝒜|} |𝒜|!` for `|S| = n`, by explicit enumeration.
pub fn partition_alternating_sum(n: usize) -> Result<i64> {
    if n == 0 {
        return Err(Error::EmptySet);
    }
    if n > MAX_ALTERNATING_SUM_N {
        return Err(Error::TooLarge {
            size: n,
            max: MAX_ALTERNATING_SUM_N,
        });
    }
    let factorial: Vec<i64> = (0..=n as i64)
        .scan(1i64, |acc, k| {
            if k > 0 {
                *acc *= k;
            }
            Some(*acc)
        })
        .collect();
    let total = enumerate_partitions(Subset::full(n))?
        .map(|part| {
            let m = part.len();
            let sign = if m % 2 == 0 { 1 } else { -1 };
            sign * factorial[m]
        })
        .sum();
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p_a() -> SubsetVector {
        SubsetVector::new(2, vec![0.4, 0.2, 0.2, 0.2]).unwrap()
    }

    fn naive_zeta(x: &SubsetVector) -> SubsetVector {
        SubsetVector::from_fn(x.n(), |k| {
            (0..x.dim() as u32)
                .map(Subset::from_mask)
                .filter(|i| i.is_subset_of(k))
                .map(|i| x[i])
                .sum()
        })
    }

    #[test]
    fn subset_basics() {
        let k = Subset::from_elements(3, &[1, 3]).unwrap();
        assert_eq!(k.mask(), 0b101);
        assert_eq!(k.len(), 2);
        assert_eq!(k.elements(), vec![1, 3]);
        assert_eq!(k.complement(3), Subset::singleton(2));
        assert_eq!(k.to_string(), "{1,3}");
        assert_eq!(Subset::EMPTY.to_string(), "{}");
        assert!(Subset::from_elements(3, &[4]).is_err());
        assert!(Subset::from_elements(3, &[0]).is_err());
        let subs: Vec<u32> = k.submasks().map(Subset::mask).collect();
        assert_eq!(subs, vec![0b101, 0b100, 0b001, 0]);
    }

    #[test]
    fn cardinality_order() {
        let order: Vec<u32> = subsets_by_cardinality(3).iter().map(|s| s.mask()).collect();
        assert_eq!(order, vec![0, 1, 2, 4, 3, 5, 6, 7]);
    }

    #[test]
    fn subset_vector_validation() {
        assert!(matches!(
            SubsetVector::new(2, vec![0.0; 3]),
            Err(Error::InvalidLength { .. })
        ));
        assert!(matches!(
            SubsetVector::new(1, vec![0.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(matches!(
            SubsetVector::new(0, vec![1.0]),
            Err(Error::EmptyGroundSet)
        ));
        assert!(SubsetVector::from_values(vec![1.0, 2.0, 3.0]).is_err());
        assert_eq!(SubsetVector::from_values(vec![0.0; 8]).unwrap().n(), 3);
    }

    #[test]
    fn zeta_examples() {
        assert_eq!(zeta_subsets(&SubsetVector::unit(2)).as_slice(), &[1.0; 4]);
        assert_eq!(
            zeta_subsets(&SubsetVector::indicator(2, Subset::full(2))).as_slice(),
            &[0.0, 0.0, 0.0, 1.0]
        );
        let y = zeta_subsets(&p_a());
        let expected = [0.4, 0.6, 0.6, 1.0];
        for (a, b) in y.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(y.max_abs_diff(&naive_zeta(&p_a())) < 1e-15);
    }

    #[test]
    fn mobius_examples() {
        assert_eq!(
            mobius_subsets(&SubsetVector::ones(2)).as_slice(),
            SubsetVector::unit(2).as_slice()
        );
        let x = mobius_subsets(&SubsetVector::new(2, vec![0.4, 0.6, 0.6, 1.0]).unwrap());
        assert!(x.max_abs_diff(&p_a()) < 1e-15);
    }

    #[test]
    fn superset_examples() {
        assert_eq!(
            zeta_supersets(&SubsetVector::unit(2)).as_slice(),
            &[1.0, 0.0, 0.0, 0.0]
        );
        let y = zeta_supersets(&p_a());
        let expected = [1.0, 0.4, 0.4, 0.2];
        for (a, b) in y.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(
            zeta_supersets(&SubsetVector::ones(2)).as_slice(),
            &[4.0, 2.0, 2.0, 1.0]
        );
        let back = mobius_supersets(&y);
        assert!(back.max_abs_diff(&p_a()) < 1e-15);
    }

    #[test]
    fn partition_counts() {
        let count = |n: usize| enumerate_partitions(Subset::full(n)).unwrap().count();
        assert_eq!(count(1), 1);
        assert_eq!(count(3), 5);
        assert_eq!(count(5), 52);
        assert!(matches!(
            enumerate_partitions(Subset::EMPTY),
            Err(Error::EmptySet)
        ));
        assert!(matches!(
            enumerate_partitions(Subset::full(13)),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn partition_order_is_restricted_growth() {
        // K = {1,2,3}: RGS 000, 001, 010, 011, 012.
        let parts: Vec<Vec<u32>> = enumerate_partitions(Subset::full(3))
            .unwrap()
            .map(|p| p.blocks().iter().map(|b| b.mask()).collect())
            .collect();
        assert_eq!(
            parts,
            vec![
                vec![0b111],
                vec![0b011, 0b100],
                vec![0b101, 0b010],
                vec![0b001, 0b110],
                vec![0b001, 0b010, 0b100],
            ]
        );
    }

    #[test]
    fn partitions_of_sparse_set() {
        let k = Subset::from_elements(5, &[2, 5]).unwrap();
        let parts: Vec<SetPartition> = enumerate_partitions(k).unwrap().collect();
        assert_eq!(parts.len(), 2);
        for p in &parts {
            assert_eq!(p.ground(), k);
        }
        assert_eq!(parts[1].blocks(), &[Subset::singleton(2), Subset::singleton(5)]);
    }

    #[test]
    fn alternating_sum_examples() {
        assert_eq!(partition_alternating_sum(1).unwrap(), -1);
        assert_eq!(partition_alternating_sum(3).unwrap(), -1);
        assert_eq!(partition_alternating_sum(4).unwrap(), 1);
        assert!(matches!(partition_alternating_sum(0), Err(Error::EmptySet)));
        assert!(matches!(
            partition_alternating_sum(11),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn mask_order_extends_inclusion() {
        for j in 0..1u32 << 6 {
            for i in Subset::from_mask(j).submasks() {
                assert!(i.mask() <= j);
            }
        }
    }
}
