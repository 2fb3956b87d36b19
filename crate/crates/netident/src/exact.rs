//! Exact rational scalars and dense matrices.
//!
//! Everything downstream that promises exactness (steady-state maps, radix
//! decoding, Laplacian recovery) routes through this module. Entries are
//! `BigRational` and every operation is exact; there is no epsilon anywhere.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::ops::{Index, IndexMut};
use thiserror::Error;

/// Exact rational scalar used throughout the crate.
pub type Rat = BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExactError {
    #[error("cannot parse `{0}` as a rational (expected `p` or `p/q`)")]
    Parse(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Shorthand for small rational constants.
pub fn rat(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

/// Parse `p` or `p/q` (optionally signed, arbitrary precision).
pub fn parse_rat(s: &str) -> Result<Rat, ExactError> {
    let t = s.trim();
    if t.is_empty() {
        return Err(ExactError::Parse(s.to_string()));
    }
    let (num, den) = match t.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (t, "1"),
    };
    let p: BigInt = num.parse().map_err(|_| ExactError::Parse(s.to_string()))?;
    let q: BigInt = den.parse().map_err(|_| ExactError::Parse(s.to_string()))?;
    if q.is_zero() {
        return Err(ExactError::ZeroDenominator(s.to_string()));
    }
    Ok(Rat::new(p, q))
}

/// Render as `p` for integers, `p/q` otherwise (always in lowest terms).
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Nearest f64; NaN only if the conversion is impossible (never for finite ratios).
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact dyadic rational equal to the given float. None for NaN/infinite.
pub fn rat_from_f64(x: f64) -> Option<Rat> {
    Rat::from_float(x)
}

/// Round to the nearest integer, ties away from zero.
pub fn round_to_bigint(r: &Rat) -> BigInt {
    let two = BigInt::from(2);
    let num = r.numer();
    let den = r.denom(); // > 0 by Ratio's normal form
    let (q, rem) = num.div_rem(den);
    if &(rem.abs() * &two) >= den {
        if num.is_negative() {
            q - 1
        } else {
            q + 1
        }
    } else {
        q
    }
}

pub fn lcm_big(a: &BigInt, b: &BigInt) -> BigInt {
    a.lcm(b)
}

/// Σ vᵢ² exactly.
pub fn norm_sq(v: &[Rat]) -> Rat {
    v.iter().map(|x| x * x).sum()
}

pub fn sub_vec(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Dense matrix of exact rationals, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct RatMat {
    rows: usize,
    cols: usize,
    data: Vec<Rat>,
}

impl fmt::Debug for RatMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RatMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| format_rat(&self[(i, j)])).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl RatMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMat { rows, cols, data: vec![Rat::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rat::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        RatMat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Rat] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> RatMat {
        let mut t = RatMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn add(&self, other: &RatMat) -> RatMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        RatMat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &RatMat) -> RatMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        RatMat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: &Rat) -> RatMat {
        let data = self.data.iter().map(|a| a * s).collect();
        RatMat { rows: self.rows, cols: self.cols, data }
    }

    pub fn mul(&self, other: &RatMat) -> RatMat {
        assert_eq!(self.cols, other.rows, "dimension mismatch in mul");
        let mut out = RatMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Rat]) -> Vec<Rat> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in mul_vec");
        (0..self.rows)
            .map(|i| {
                let mut acc = Rat::zero();
                for j in 0..self.cols {
                    let a = &self[(i, j)];
                    if !a.is_zero() && !v[j].is_zero() {
                        acc += a * &v[j];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| rat_to_f64(&self[(i, j)]))
    }
}

impl Index<(usize, usize)> for RatMat {
    type Output = Rat;
    fn index(&self, (i, j): (usize, usize)) -> &Rat {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RatMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rat {
        &mut self.data[i * self.cols + j]
    }
}

/// Exact inverse by Gauss-Jordan elimination with first-nonzero pivoting.
///
/// Intermediate entries are ratios of minors of the input, so for matrices
/// that are themselves inverses (bounded minors) this stays small where
/// fraction-free elimination on a denominator-cleared copy would blow up by
/// a factor of Dᵏ. Prefer this for inverting decoded steady-state maps.
pub fn invert_gauss_jordan(m: &RatMat) -> Result<RatMat, ExactError> {
    invert_gauss_jordan_counted(m).map(|(inv, _)| inv)
}

/// [`invert_gauss_jordan`] plus a count of row-operation units executed
/// (pivot normalizations and eliminations), for callers that report the
/// arithmetic cost of a reconstruction.
pub fn invert_gauss_jordan_counted(m: &RatMat) -> Result<(RatMat, u64), ExactError> {
    if m.rows() != m.cols() {
        return Err(ExactError::Dimension(format!("{}x{} not square", m.rows(), m.cols())));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut inv = RatMat::identity(n);
    let mut ops: u64 = 0;
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[(r, col)].is_zero()).ok_or(ExactError::Singular)?;
        if pivot != col {
            for j in 0..n {
                a.data.swap(pivot * n + j, col * n + j);
                inv.data.swap(pivot * n + j, col * n + j);
            }
        }
        let p = a[(col, col)].clone();
        for j in 0..n {
            a[(col, j)] /= &p;
            inv[(col, j)] /= &p;
            ops += 1;
        }
        for r in 0..n {
            if r == col || a[(r, col)].is_zero() {
                continue;
            }
            let factor = a[(r, col)].clone();
            for j in 0..n {
                let t = &factor * &a[(col, j)];
                a[(r, j)] -= t;
                let t = &factor * &inv[(col, j)];
                inv[(r, j)] -= t;
                ops += 1;
            }
        }
    }
    Ok((inv, ops))
}

/// Exact inverse by fraction-free (Bareiss) elimination.
///
/// The input is scaled to an integer matrix by the lcm of all denominators;
/// elimination then divides by the previous pivot at every step, which keeps
/// intermediates at k×k-minor size instead of letting them square. This is
/// the right tool when the input has small entries (e.g. A + ℰBℰᵀ built from
/// model data); see [`invert_gauss_jordan`] for the complementary case.
pub fn invert_bareiss(m: &RatMat) -> Result<RatMat, ExactError> {
    if m.rows() != m.cols() {
        return Err(ExactError::Dimension(format!("{}x{} not square", m.rows(), m.cols())));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(RatMat::zeros(0, 0));
    }
    // Clear denominators once, globally: inv(m) = d * inv(d*m).
    let mut d = BigInt::one();
    for e in &m.data {
        d = d.lcm(e.denom());
    }
    let width = 2 * n;
    let mut w: Vec<BigInt> = Vec::with_capacity(n * width);
    for i in 0..n {
        for j in 0..n {
            let scaled = &m[(i, j)] * Rat::from_integer(d.clone());
            debug_assert!(scaled.denom().is_one());
            w.push(scaled.numer().clone());
        }
        for j in 0..n {
            w.push(if i == j { BigInt::one() } else { BigInt::zero() });
        }
    }
    let idx = |i: usize, j: usize| i * width + j;

    let mut prev = BigInt::one();
    for k in 0..n {
        let pivot_row = (k..n)
            .find(|&r| !w[idx(r, k)].is_zero())
            .ok_or(ExactError::Singular)?;
        if pivot_row != k {
            for j in 0..width {
                w.swap(idx(pivot_row, j), idx(k, j));
            }
        }
        let pivot = w[idx(k, k)].clone();
        for i in (k + 1)..n {
            let lead = w[idx(i, k)].clone();
            for j in (k + 1)..width {
                let t = &w[idx(i, j)] * &pivot - &lead * &w[idx(k, j)];
                let (q, r) = t.div_rem(&prev);
                debug_assert!(r.is_zero(), "Bareiss exact-division invariant violated");
                w[idx(i, j)] = q;
            }
            w[idx(i, k)] = BigInt::zero();
        }
        prev = pivot;
    }

    // Back-substitute each augmented column in rationals, then undo the scaling.
    let mut inv = RatMat::zeros(n, n);
    let d_rat = Rat::from_integer(d);
    for c in 0..n {
        let mut x = vec![Rat::zero(); n];
        for i in (0..n).rev() {
            let mut acc = Rat::from_integer(w[idx(i, n + c)].clone());
            for j in (i + 1)..n {
                if !x[j].is_zero() {
                    acc -= Rat::from_integer(w[idx(i, j)].clone()) * &x[j];
                }
            }
            x[i] = acc / Rat::from_integer(w[idx(i, i)].clone());
        }
        for i in 0..n {
            inv[(i, c)] = &x[i] * &d_rat;
        }
    }
    Ok(inv)
}

/// Rank by exact forward elimination (works for any shape).
pub fn rank(m: &RatMat) -> usize {
    let mut a = m.clone();
    let (rows, cols) = (a.rows(), a.cols());
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(pivot) = (r..rows).find(|&i| !a[(i, c)].is_zero()) else {
            continue;
        };
        if pivot != r {
            for j in 0..cols {
                a.data.swap(pivot * cols + j, r * cols + j);
            }
        }
        for i in (r + 1)..rows {
            if a[(i, c)].is_zero() {
                continue;
            }
            let f = &a[(i, c)] / &a[(r, c)];
            for j in c..cols {
                let t = &f * &a[(r, j)];
                a[(i, j)] -= t;
            }
        }
        r += 1;
    }
    r
}
