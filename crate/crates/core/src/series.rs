//! Truncated multivariate power series.
//!
//! A [`TruncSeries`] holds every coefficient of total degree `<= maxdeg` in
//! `nvars` variables. It carries probability generating functions of joint
//! pmfs and their logarithms: a joint law on the nonnegative integer lattice
//! is infinitely divisible exactly when every non-constant coefficient of its
//! log-pgf is nonnegative.
//!
//! Coefficients are kept densely over the total-degree simplex in graded
//! order. Each multi-index also has a linear integer code
//! `sum_i idx[i] (D+1)^i`; because coordinates never exceed `D`, the code of
//! a sum of indices is the sum of their codes, which makes products cheap.

use std::collections::HashMap;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::joint::JointPmf;

/// Arithmetic needed by the series recursions.
pub trait Scalar:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
}

/// Double-double (~106-bit mantissa) arithmetic.
impl Scalar for TwoFloat {
    fn from_f64(x: f64) -> Self {
        TwoFloat::from(x)
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    fn exp(self) -> Self {
        TwoFloat::exp(self)
    }
    fn ln(self) -> Self {
        TwoFloat::ln(self)
    }
}

// Above this many box cells the code -> position table becomes a hash map.
const DENSE_LOOKUP_LIMIT: u128 = 1 << 22;

#[derive(Debug)]
enum Lookup {
    Dense(Vec<u32>),
    Sparse(HashMap<u128, u32>),
}

/// Enumeration of all multi-indices of total degree `<= maxdeg`.
#[derive(Debug)]
pub struct Layout {
    nvars: usize,
    maxdeg: u32,
    indices: Vec<Vec<u32>>,
    degrees: Vec<u32>,
    codes: Vec<u128>,
    /// `degree_end[d]` = number of indices with degree `<= d`.
    degree_end: Vec<usize>,
    lookup: Lookup,
}

impl Layout {
    pub fn new(nvars: usize, maxdeg: u32) -> Result<Arc<Self>> {
        if nvars == 0 {
            return Err(Error::ShapeMismatch("series needs at least one variable".into()));
        }
        let base = maxdeg as u128 + 1;
        let mut box_cells: u128 = 1;
        for _ in 0..nvars {
            box_cells = box_cells
                .checked_mul(base)
                .ok_or_else(|| Error::ShapeMismatch(format!("{nvars} variables at degree {maxdeg} is too large")))?;
        }
        let mut indices = Vec::new();
        let mut degree_end = Vec::with_capacity(maxdeg as usize + 1);
        for d in 0..=maxdeg {
            compositions(nvars, d, &mut indices);
            degree_end.push(indices.len());
        }
        let code = |idx: &[u32]| {
            idx.iter()
                .rev()
                .fold(0u128, |acc, &c| acc * base + c as u128)
        };
        let codes: Vec<u128> = indices.iter().map(|i| code(i)).collect();
        let degrees = indices.iter().map(|i| i.iter().sum()).collect();
        let lookup = if box_cells <= DENSE_LOOKUP_LIMIT {
            let mut table = vec![u32::MAX; box_cells as usize];
            for (pos, &c) in codes.iter().enumerate() {
                table[c as usize] = pos as u32;
            }
            Lookup::Dense(table)
        } else {
            Lookup::Sparse(codes.iter().enumerate().map(|(p, &c)| (c, p as u32)).collect())
        };
        Ok(Arc::new(Layout {
            nvars,
            maxdeg,
            indices,
            degrees,
            codes,
            degree_end,
            lookup,
        }))
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn position_of_code(&self, code: u128) -> usize {
        match &self.lookup {
            Lookup::Dense(t) => t[code as usize] as usize,
            Lookup::Sparse(m) => m[&code] as usize,
        }
    }

    pub fn position(&self, idx: &[u32]) -> Option<usize> {
        if idx.len() != self.nvars || idx.iter().sum::<u32>() > self.maxdeg {
            return None;
        }
        let base = self.maxdeg as u128 + 1;
        let code = idx.iter().rev().fold(0u128, |acc, &c| acc * base + c as u128);
        Some(self.position_of_code(code))
    }
}

/// All length-`n` compositions of `d`, appended in reverse-lexicographic order.
fn compositions(n: usize, d: u32, out: &mut Vec<Vec<u32>>) {
    fn rec(prefix: &mut Vec<u32>, n: usize, left: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == n {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in (0..=left).rev() {
            prefix.push(c);
            rec(prefix, n, left - c, out);
            prefix.pop();
        }
    }
    rec(&mut Vec::with_capacity(n), n, d, out);
}

#[derive(Debug, Clone)]
pub struct TruncSeries<T: Scalar = f64> {
    layout: Arc<Layout>,
    coeffs: Vec<T>,
}

impl<T: Scalar> PartialEq for TruncSeries<T> {
    fn eq(&self, other: &Self) -> bool {
        self.same_shape(other) && self.coeffs == other.coeffs
    }
}

impl<T: Scalar> TruncSeries<T> {
    pub fn zeros(nvars: usize, maxdeg: u32) -> Result<Self> {
        Ok(Self::zeros_on(Layout::new(nvars, maxdeg)?))
    }

    pub fn zeros_on(layout: Arc<Layout>) -> Self {
        let coeffs = vec![T::zero(); layout.len()];
        TruncSeries { layout, coeffs }
    }

    pub fn constant(nvars: usize, maxdeg: u32, c: T) -> Result<Self> {
        let mut s = Self::zeros(nvars, maxdeg)?;
        s.coeffs[0] = c;
        Ok(s)
    }

    /// Builds a series from `(multi-index, coefficient)` pairs; terms above
    /// the degree bound are dropped, repeated indices accumulate.
    pub fn from_terms<'a>(
        nvars: usize,
        maxdeg: u32,
        terms: impl IntoIterator<Item = (&'a [u32], T)>,
    ) -> Result<Self> {
        let mut s = Self::zeros(nvars, maxdeg)?;
        for (idx, c) in terms {
            if idx.len() != nvars {
                return Err(Error::ShapeMismatch(format!(
                    "index of length {} for {} variables",
                    idx.len(),
                    nvars
                )));
            }
            if let Some(pos) = s.layout.position(idx) {
                s.coeffs[pos] += c;
            }
        }
        Ok(s)
    }

    /// Univariate-in-one-variable series `sum_k coeffs[k] x_var^k`.
    pub fn from_univariate(nvars: usize, maxdeg: u32, var: usize, coeffs: &[T]) -> Result<Self> {
        if var >= nvars {
            return Err(Error::ShapeMismatch(format!("variable {var} of {nvars}")));
        }
        let mut s = Self::zeros(nvars, maxdeg)?;
        let mut idx = vec![0u32; nvars];
        for (k, &c) in coeffs.iter().enumerate().take(maxdeg as usize + 1) {
            idx[var] = k as u32;
            let pos = s.layout.position(&idx).expect("degree within bound");
            s.coeffs[pos] = c;
        }
        Ok(s)
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn maxdeg(&self) -> u32 {
        self.layout.maxdeg
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    /// Coefficient at `idx`; zero when the index lies above the degree bound.
    pub fn coeff(&self, idx: &[u32]) -> T {
        self.layout
            .position(idx)
            .map_or(T::zero(), |p| self.coeffs[p])
    }

    pub fn set_coeff(&mut self, idx: &[u32], c: T) -> Result<()> {
        let pos = self
            .layout
            .position(idx)
            .ok_or_else(|| Error::ShapeMismatch(format!("index {idx:?} outside the series")))?;
        self.coeffs[pos] = c;
        Ok(())
    }

    pub fn constant_term(&self) -> T {
        self.coeffs[0]
    }

    /// `(multi-index, coefficient)` in graded order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], T)> + '_ {
        self.layout
            .indices
            .iter()
            .map(Vec::as_slice)
            .zip(self.coeffs.iter().copied())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.nvars() == other.nvars() && self.maxdeg() == other.maxdeg()
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "({} vars, degree {}) vs ({} vars, degree {})",
                self.nvars(),
                self.maxdeg(),
                other.nvars(),
                other.maxdeg()
            )))
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| a + b).collect();
        Ok(TruncSeries { layout: self.layout.clone(), coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| a - b).collect();
        Ok(TruncSeries { layout: self.layout.clone(), coeffs })
    }

    pub fn scale(&self, c: T) -> Self {
        TruncSeries {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|&a| a * c).collect(),
        }
    }

    /// Cauchy product truncated at the shared degree bound.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let lay = &self.layout;
        let d = lay.maxdeg as usize;
        let mut out = vec![T::zero(); lay.len()];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == T::zero() {
                continue;
            }
            let room = d - lay.degrees[i] as usize;
            for j in 0..lay.degree_end[room] {
                let b = other.coeffs[j];
                if b == T::zero() {
                    continue;
                }
                let pos = lay.position_of_code(lay.codes[i] + lay.codes[j]);
                out[pos] += a * b;
            }
        }
        Ok(TruncSeries { layout: lay.clone(), coeffs: out })
    }

    /// Calls `f(k_pos, rest_pos)` for every nonzero proper split
    /// `k + rest = m` with `k[var] >= 1` and `k != m`.
    fn for_each_split(&self, m: usize, var: usize, mut f: impl FnMut(usize, usize)) {
        let lay = &self.layout;
        let target = &lay.indices[m];
        let dm = lay.degrees[m] as usize;
        // k ranges over degrees 1..|m|-1 plus degree-|m| indices other than m
        // (those can never be <= m, so stopping at degree |m|-1 suffices).
        let end = if dm == 0 { 0 } else { lay.degree_end[dm - 1] };
        for k in 1..end {
            let idx = &lay.indices[k];
            if idx[var] == 0 || idx.iter().zip(target).any(|(a, b)| a > b) {
                continue;
            }
            let rest = lay.position_of_code(lay.codes[m] - lay.codes[k]);
            f(k, rest);
        }
    }

    fn leading_var(&self, m: usize) -> usize {
        self.layout.indices[m]
            .iter()
            .position(|&c| c > 0)
            .expect("non-constant index")
    }

    /// `exp(a)` by the recursion `m_v b_m = sum_{k <= m, k_v >= 1} k_v a_k b_{m-k}`
    /// along the first variable `v` present in each index.
    pub fn exp(&self) -> Self {
        let lay = &self.layout;
        let mut b = vec![T::zero(); lay.len()];
        b[0] = self.coeffs[0].exp();
        for m in 1..lay.len() {
            let v = self.leading_var(m);
            let mv = lay.indices[m][v];
            // k = m term: m_v a_m b_0
            let mut acc = T::from_f64(mv as f64) * self.coeffs[m] * b[0];
            self.for_each_split(m, v, |k, rest| {
                let kv = lay.indices[k][v];
                acc += T::from_f64(kv as f64) * self.coeffs[k] * b[rest];
            });
            b[m] = acc / T::from_f64(mv as f64);
        }
        TruncSeries { layout: lay.clone(), coeffs: b }
    }

    /// `log(b)`, the inverse recursion of [`TruncSeries::exp`]. Requires a
    /// positive constant term.
    pub fn log(&self) -> Result<Self> {
        let b0 = self.coeffs[0];
        if !(b0 > T::zero()) {
            return Err(Error::NonPositiveConstant(b0.to_f64()));
        }
        let lay = &self.layout;
        let mut a = vec![T::zero(); lay.len()];
        a[0] = b0.ln();
        for m in 1..lay.len() {
            let v = self.leading_var(m);
            let mv = T::from_f64(lay.indices[m][v] as f64);
            let mut acc = mv * self.coeffs[m];
            self.for_each_split(m, v, |k, rest| {
                let kv = lay.indices[k][v];
                acc -= T::from_f64(kv as f64) * a[k] * self.coeffs[rest];
            });
            a[m] = acc / (mv * b0);
        }
        Ok(TruncSeries { layout: lay.clone(), coeffs: a })
    }

    /// Evaluates the (truncated) polynomial at `point`.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.nvars() {
            return Err(Error::ShapeMismatch(format!(
                "point of dimension {} for {} variables",
                point.len(),
                self.nvars()
            )));
        }
        let d = self.maxdeg() as usize;
        let powers: Vec<Vec<T>> = point
            .iter()
            .map(|&x| {
                let x = T::from_f64(x);
                let mut p = Vec::with_capacity(d + 1);
                p.push(T::from_f64(1.0));
                for i in 1..=d {
                    p.push(p[i - 1] * x);
                }
                p
            })
            .collect();
        let mut total = T::zero();
        for (idx, c) in self.terms() {
            if c == T::zero() {
                continue;
            }
            let mut term = c;
            for (v, &e) in idx.iter().enumerate() {
                if e > 0 {
                    term = term * powers[v][e as usize];
                }
            }
            total += term;
        }
        Ok(total.to_f64())
    }

    /// The smallest non-constant coefficient and its index.
    pub fn min_nonconstant(&self) -> Option<(Vec<u32>, T)> {
        self.terms()
            .skip(1)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, c)| (i.to_vec(), c))
    }

    pub fn cast<U: Scalar>(&self) -> TruncSeries<U> {
        TruncSeries {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|c| U::from_f64(c.to_f64())).collect(),
        }
    }

    pub fn coeffs_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.to_f64()).collect()
    }

    /// The pgf of a joint pmf, truncated at total degree `maxdeg`.
    pub fn from_joint_pmf(pmf: &JointPmf, maxdeg: u32) -> Result<Self> {
        let n = pmf.times().len();
        let mut s = Self::zeros(n, maxdeg)?;
        let mut idx = vec![0u32; n];
        for (cell, &p) in pmf.table().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            pmf.unravel_into(cell, &mut idx);
            if let Some(pos) = s.layout.position(&idx) {
                s.coeffs[pos] += T::from_f64(p);
            }
        }
        Ok(s)
    }
}
