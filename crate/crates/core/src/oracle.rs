//! Dense brute-force linear algebra used as ground truth.
//!
//! Nothing in here knows about subsets, eigenbases or parameter vectors:
//! the matrix exponential is plain scaling-and-squaring with a Taylor
//! series and the logarithm is the plain series `Σ (−1)^{k−1} A^k / k`.
//! The combinatorial routes in [`crate::model`], [`crate::embedding`] and
//! [`crate::algebra`] are checked against these.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Scaling threshold for the exponential: `‖A / 2^s‖_∞ <= EXP_SCALE_NORM`.
pub const EXP_SCALE_NORM: f64 = 0.5;
/// Taylor terms of the scaled exponential are summed until their max-abs entry drops below this.
pub const EXP_TERM_TOL: f64 = 1e-18;
const EXP_MAX_TERMS: usize = 100;

/// Log series stops once the max-abs entry of a term is below this.
pub const LOG_TERM_TOL: f64 = 1e-15;
pub const LOG_MAX_TERMS: usize = 10_000;

// Rows per rayon task in `mat_mul`; below this many rows we stay sequential.
const PAR_ROWS: usize = 32;

/// A dense square matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(dim: usize) -> Self {
        DenseMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = DenseMatrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        DenseMatrix { dim, data }
    }

    pub(crate) fn from_vec(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        DenseMatrix { dim, data }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: row.len(),
                });
            }
            data.extend(row);
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(DenseMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.dim + j] = value;
    }

    pub fn add_to(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.dim + j] += value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn scaled(&self, factor: f64) -> DenseMatrix {
        DenseMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    fn zip_with(&self, other: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> Result<DenseMatrix> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(DenseMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max-abs entrywise difference. Panics on dimension mismatch.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest `|a_ij|` with `i > j`.
    pub fn max_below_diagonal(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.dim {
            for j in 0..i {
                m = m.max(self.get(i, j).abs());
            }
        }
        m
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        Ok(())
    }
}

fn mul_row(a: &DenseMatrix, b: &DenseMatrix, i: usize, out: &mut [f64]) {
    let d = a.dim;
    for (k, &aik) in a.row(i).iter().enumerate() {
        if aik == 0.0 {
            continue;
        }
        let bk = &b.data[k * d..(k + 1) * d];
        for (o, &bkj) in out.iter_mut().zip(bk) {
            *o += aik * bkj;
        }
    }
}

/// Standard matrix product. Each output row accumulates over `k` in
/// ascending order, so the result does not depend on scheduling.
pub fn mat_mul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    let d = a.dim;
    let mut out = DenseMatrix::zeros(d);
    if d == 0 {
        return Ok(out);
    }
    if d >= PAR_ROWS {
        out.data
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(i, row)| mul_row(a, b, i, row));
    } else {
        for (i, row) in out.data.chunks_mut(d).enumerate() {
            mul_row(a, b, i, row);
        }
    }
    Ok(out)
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn exp_oracle(a: &DenseMatrix) -> DenseMatrix {
    let d = a.dim;
    let norm = a.inf_norm();
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > EXP_SCALE_NORM {
        scale *= 0.5;
        squarings += 1;
    }
    let scaled = a.scaled(scale);

    let mut sum = DenseMatrix::identity(d);
    let mut term = DenseMatrix::identity(d);
    for k in 1..=EXP_MAX_TERMS {
        term = mat_mul(&term, &scaled)
            .expect("same dimension")
            .scaled(1.0 / k as f64);
        sum = sum.add(&term).expect("same dimension");
        if term.max_abs() < EXP_TERM_TOL {
            break;
        }
    }
    for _ in 0..squarings {
        sum = mat_mul(&sum, &sum).expect("same dimension");
    }
    sum
}

/// Principal logarithm of `M = 1 + A` by the plain series.
///
/// `M` is assumed triangular, so the spectral radius of `A` is read off the
/// diagonal. The series is only attempted when that bound is below 1.
pub fn matlog_oracle(m: &DenseMatrix) -> Result<DenseMatrix> {
    let d = m.dim;
    let a = m.sub(&DenseMatrix::identity(d))?;
    let bound = a.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if bound >= 1.0 {
        return Err(Error::SpectralRadiusTooLarge { bound });
    }
    let mut sum = DenseMatrix::zeros(d);
    let mut power = DenseMatrix::identity(d);
    for k in 1..=LOG_MAX_TERMS {
        power = mat_mul(&power, &a)?;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let term = power.scaled(sign / k as f64);
        sum = sum.add(&term)?;
        if term.max_abs() < LOG_TERM_TOL {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence {
        norm: bound,
        terms: LOG_MAX_TERMS,
    })
}

/// Entries `>= −tol` and row sums within `tol` of 1.
pub fn is_markov(m: &DenseMatrix, tol: f64) -> bool {
    m.data.iter().all(|&v| v >= -tol) && m.row_sums().iter().all(|s| (s - 1.0).abs() <= tol)
}

/// Off-diagonal entries `>= −tol` and row sums within `tol` of 0.
pub fn is_generator(q: &DenseMatrix, tol: f64) -> bool {
    let d = q.dim;
    let off_diag_ok = (0..d).all(|i| (0..d).all(|j| i == j || q.get(i, j) >= -tol));
    off_diag_ok && q.row_sums().iter().all(|s| s.abs() <= tol)
}

/// Inverse of an upper-triangular matrix by back substitution.
///
/// Entries below the diagonal are ignored.
pub fn invert_upper_triangular(u: &DenseMatrix) -> Result<DenseMatrix> {
    let d = u.dim;
    let mut inv = DenseMatrix::zeros(d);
    for col in 0..d {
        for i in (0..=col).rev() {
            let mut acc = if i == col { 1.0 } else { 0.0 };
            for k in i + 1..=col {
                acc -= u.get(i, k) * inv.get(k, col);
            }
            let pivot = u.get(i, i);
            if pivot == 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "zero pivot at row {i} of triangular matrix"
                )));
            }
            inv.set(i, col, acc / pivot);
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_generator(a: f64, b: f64) -> DenseMatrix {
        DenseMatrix::from_rows(vec![vec![-a, a], vec![b, -b]]).unwrap()
    }

    #[test]
    fn mul_identity() {
        let a = DenseMatrix::from_fn(5, |i, j| (i * 5 + j) as f64 - 7.5);
        let i = DenseMatrix::identity(5);
        assert_eq!(mat_mul(&a, &i).unwrap(), a);
        assert_eq!(mat_mul(&i, &a).unwrap(), a);
        assert!(mat_mul(&a, &DenseMatrix::identity(4)).is_err());
    }

    #[test]
    fn mul_parallel_matches_sequential() {
        let d = 70;
        let a = DenseMatrix::from_fn(d, |i, j| ((i * 31 + j * 17) % 13) as f64 / 7.0 - 0.9);
        let b = DenseMatrix::from_fn(d, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.1);
        let c = mat_mul(&a, &b).unwrap();
        for i in [0, 33, 69] {
            for j in [0, 40, 69] {
                let expected: f64 = (0..d).map(|k| a.get(i, k) * b.get(k, j)).sum();
                assert!((c.get(i, j) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(exp_oracle(&DenseMatrix::zeros(4)), DenseMatrix::identity(4));
    }

    #[test]
    fn exp_two_state_closed_form() {
        // e^{tQ} for Q = [[-a, a], [b, -b]]: P_00 = (b + a e^{-(a+b)}) / (a+b).
        let (a, b) = (1.3, 0.4);
        let p = exp_oracle(&two_state_generator(a, b));
        let s = a + b;
        let p00 = (b + a * (-s).exp()) / s;
        let p11 = (a + b * (-s).exp()) / s;
        assert!((p.get(0, 0) - p00).abs() < 1e-14);
        assert!((p.get(1, 1) - p11).abs() < 1e-14);
        assert!(is_markov(&p, 1e-12));
    }

    #[test]
    fn exp_of_large_generator_stays_markov() {
        let q = two_state_generator(40.0, 3.0);
        let p = exp_oracle(&q);
        assert!(is_markov(&p, 1e-10));
        assert!(p.as_slice().iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn log_of_identity_is_zero() {
        assert_eq!(
            matlog_oracle(&DenseMatrix::identity(3)).unwrap(),
            DenseMatrix::zeros(3)
        );
    }

    #[test]
    fn log_inverts_exp_upper_triangular() {
        let q = DenseMatrix::from_rows(vec![
            vec![-0.7, 0.5, 0.2],
            vec![0.0, -0.3, 0.3],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let m = exp_oracle(&q);
        let back = matlog_oracle(&m).unwrap();
        assert!(back.max_abs_diff(&q) < 1e-12);
    }

    #[test]
    fn log_rejects_large_spectral_radius() {
        let m = DenseMatrix::from_rows(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            matlog_oracle(&m),
            Err(Error::SpectralRadiusTooLarge { .. })
        ));
    }

    #[test]
    fn markov_and_generator_predicates() {
        assert!(is_markov(&DenseMatrix::identity(4), 0.0));
        assert!(!is_markov(&DenseMatrix::zeros(2), 1e-12));
        assert!(is_generator(&two_state_generator(1.0, 2.0), 1e-15));
        assert!(!is_generator(&two_state_generator(-1.0, 2.0), 1e-12));
    }

    #[test]
    fn triangular_inverse() {
        let u = DenseMatrix::from_rows(vec![
            vec![2.0, 1.0, -1.0],
            vec![0.0, 0.5, 3.0],
            vec![0.0, 0.0, 4.0],
        ])
        .unwrap();
        let inv = invert_upper_triangular(&u).unwrap();
        let prod = mat_mul(&u, &inv).unwrap();
        assert!(prod.max_abs_diff(&DenseMatrix::identity(3)) < 1e-15);
        let singular = DenseMatrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(invert_upper_triangular(&singular).is_err());
    }
}
