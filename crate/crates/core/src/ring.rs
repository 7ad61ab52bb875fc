//! Exact arithmetic over ℤ/2ᵖ and the affine-map algebra built on it.
//!
//! Every scalar in the laboratory lives in the ring `R_p = ℤ/2ᵖ` with
//! wraparound addition and multiplication. The field F₂ is the special case
//! `p = 1`. Vectors and square matrices share one precision, and an
//! [`AffineMap`] is the pair `(A, b)` acting as `h ↦ A·h + b`.
//!
//! Affine maps can be compared two ways: as parameter pairs (derived
//! `PartialEq`) and as functions on the full state space
//! ([`AffineMap::eq_as_function`]). Over `R_p` the two notions agree, which
//! the counting checks in [`crate::verify`] confirm by brute force.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of bits per scalar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Precision(u32);

impl Precision {
    pub const MAX_BITS: u32 = 64;

    pub fn new(bits: u32) -> Result<Self> {
        if (1..=Self::MAX_BITS).contains(&bits) {
            Ok(Self(bits))
        } else {
            Err(Error::InvalidPrecision(bits))
        }
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    /// `2ᵖ − 1`.
    pub const fn mask(self) -> u64 {
        if self.0 == 64 {
            u64::MAX
        } else {
            (1u64 << self.0) - 1
        }
    }

    /// Ring size `2ᵖ`.
    pub const fn modulus(self) -> u128 {
        1u128 << self.0
    }

    pub const fn reduce(self, value: u64) -> u64 {
        value & self.mask()
    }

    pub fn check(self, value: u64) -> Result<u64> {
        if value <= self.mask() {
            Ok(value)
        } else {
            Err(Error::ValueOutOfRange {
                value,
                bits: self.0,
            })
        }
    }

    fn ensure_same(self, other: Precision) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::PrecisionMismatch {
                left: self.0,
                right: other.0,
            })
        }
    }
}

impl TryFrom<u32> for Precision {
    type Error = Error;

    fn try_from(bits: u32) -> Result<Self> {
        Self::new(bits)
    }
}

impl From<Precision> for u32 {
    fn from(p: Precision) -> u32 {
        p.0
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Smallest `b` with `2ᵇ ≥ n`, i.e. `⌈log₂ n⌉` (0 for `n ≤ 1`).
pub fn ceil_log2(n: u128) -> u32 {
    if n <= 1 {
        0
    } else {
        128 - (n - 1).leading_zeros()
    }
}

/// A single element of `ℤ/2ᵖ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RingScalar {
    value: u64,
    precision: Precision,
}

impl RingScalar {
    pub fn new(value: u64, precision: Precision) -> Result<Self> {
        precision.check(value)?;
        Ok(Self { value, precision })
    }

    /// Builds the scalar `value mod 2ᵖ`.
    pub fn wrapping(value: u64, precision: Precision) -> Self {
        Self {
            value: precision.reduce(value),
            precision,
        }
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn precision(self) -> Precision {
        self.precision
    }
}

impl Add for RingScalar {
    type Output = RingScalar;

    fn add(self, rhs: Self) -> Self {
        assert_eq!(self.precision, rhs.precision, "precision mismatch");
        Self::wrapping(self.value.wrapping_add(rhs.value), self.precision)
    }
}

impl Sub for RingScalar {
    type Output = RingScalar;

    fn sub(self, rhs: Self) -> Self {
        assert_eq!(self.precision, rhs.precision, "precision mismatch");
        Self::wrapping(self.value.wrapping_sub(rhs.value), self.precision)
    }
}

impl Mul for RingScalar {
    type Output = RingScalar;

    fn mul(self, rhs: Self) -> Self {
        assert_eq!(self.precision, rhs.precision, "precision mismatch");
        Self::wrapping(self.value.wrapping_mul(rhs.value), self.precision)
    }
}

impl Neg for RingScalar {
    type Output = RingScalar;

    fn neg(self) -> Self {
        Self::wrapping(self.value.wrapping_neg(), self.precision)
    }
}

/// A length-`d` vector over `ℤ/2ᵖ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RingVector {
    precision: Precision,
    entries: Vec<u64>,
}

impl RingVector {
    pub fn new(precision: Precision, entries: Vec<u64>) -> Result<Self> {
        for &v in &entries {
            precision.check(v)?;
        }
        Ok(Self { precision, entries })
    }

    /// Reduces every entry mod `2ᵖ` instead of rejecting it.
    pub fn wrapping(precision: Precision, mut entries: Vec<u64>) -> Self {
        for v in &mut entries {
            *v = precision.reduce(*v);
        }
        Self { precision, entries }
    }

    pub fn zeros(dim: usize, precision: Precision) -> Self {
        Self {
            precision,
            entries: vec![0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn values(&self) -> &[u64] {
        &self.entries
    }

    pub fn into_values(self) -> Vec<u64> {
        self.entries
    }

    pub fn get(&self, i: usize) -> RingScalar {
        RingScalar {
            value: self.entries[i],
            precision: self.precision,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0)
    }

    pub fn add(&self, other: &RingVector) -> Result<RingVector> {
        self.same_shape(other)?;
        let p = self.precision;
        Ok(Self {
            precision: p,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| p.reduce(a.wrapping_add(b)))
                .collect(),
        })
    }

    fn same_shape(&self, other: &RingVector) -> Result<()> {
        self.precision.ensure_same(other.precision)?;
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for RingVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// A dense row-major `d×d` matrix over `ℤ/2ᵖ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RingMatrix {
    precision: Precision,
    dim: usize,
    entries: Vec<u64>,
}

impl RingMatrix {
    pub fn new(precision: Precision, dim: usize, entries: Vec<u64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        for &v in &entries {
            precision.check(v)?;
        }
        Ok(Self {
            precision,
            dim,
            entries,
        })
    }

    pub fn from_rows(precision: Precision, rows: &[Vec<u64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::new(precision, dim, entries)
    }

    pub fn zeros(dim: usize, precision: Precision) -> Self {
        Self {
            precision,
            dim,
            entries: vec![0; dim * dim],
        }
    }

    pub fn identity(dim: usize, precision: Precision) -> Self {
        let mut m = Self::zeros(dim, precision);
        for i in 0..dim {
            m.entries[i * dim + i] = 1;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.entries[row * self.dim + col]
    }

    /// Row-major entries.
    pub fn values(&self) -> &[u64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.entries.chunks(self.dim.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn is_identity(&self) -> bool {
        (0..self.dim).all(|r| (0..self.dim).all(|c| self.get(r, c) == u64::from(r == c)))
    }

    pub fn mul(&self, other: &RingMatrix) -> Result<RingMatrix> {
        self.same_shape(other)?;
        let (d, p) = (self.dim, self.precision);
        let mut out = vec![0u64; d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.entries[r * d + k];
                if a == 0 {
                    continue;
                }
                for c in 0..d {
                    let idx = r * d + c;
                    out[idx] = out[idx].wrapping_add(a.wrapping_mul(other.entries[k * d + c]));
                }
            }
        }
        Ok(Self {
            precision: p,
            dim: d,
            entries: out.into_iter().map(|v| p.reduce(v)).collect(),
        })
    }

    pub fn add(&self, other: &RingMatrix) -> Result<RingMatrix> {
        self.same_shape(other)?;
        let p = self.precision;
        Ok(Self {
            precision: p,
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| p.reduce(a.wrapping_add(b)))
                .collect(),
        })
    }

    pub fn mul_vec(&self, v: &RingVector) -> Result<RingVector> {
        self.precision.ensure_same(v.precision)?;
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: v.dim(),
            });
        }
        let (d, p) = (self.dim, self.precision);
        let entries = (0..d)
            .map(|r| {
                let acc = (0..d).fold(0u64, |acc, c| {
                    acc.wrapping_add(self.entries[r * d + c].wrapping_mul(v.entries[c]))
                });
                p.reduce(acc)
            })
            .collect();
        Ok(RingVector {
            precision: p,
            entries,
        })
    }

    pub fn pow(&self, mut exp: u64) -> RingMatrix {
        let mut base = self.clone();
        let mut acc = Self::identity(self.dim, self.precision);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&base).expect("same shape");
            }
            base = base.mul(&base).expect("same shape");
            exp >>= 1;
        }
        acc
    }

    /// Whether `h ↦ A·h` is a bijection of `R_pᵈ`.
    ///
    /// Over `ℤ/2ᵖ` a matrix is invertible iff its determinant is odd, which
    /// is iff its reduction mod 2 is invertible over F₂; the latter is
    /// decided by Gaussian elimination on bit-packed rows.
    pub fn is_invertible(&self) -> bool {
        let d = self.dim;
        assert!(d <= 64, "dimension too large for bit-packed elimination");
        let mut rows: Vec<u64> = (0..d)
            .map(|r| (0..d).fold(0u64, |acc, c| acc | ((self.get(r, c) & 1) << c)))
            .collect();
        for col in 0..d {
            let Some(pivot) = (col..d).find(|&r| rows[r] >> col & 1 == 1) else {
                return false;
            };
            rows.swap(col, pivot);
            let pivot_row = rows[col];
            for (r, row) in rows.iter_mut().enumerate() {
                if r != col && *row >> col & 1 == 1 {
                    *row ^= pivot_row;
                }
            }
        }
        true
    }

    /// Smallest `k ≥ 1` with `Aᵏ = I`, or `None` if `A` is singular.
    pub fn multiplicative_order(&self) -> Option<u64> {
        if !self.is_invertible() {
            return None;
        }
        let mut power = self.clone();
        let mut k = 1;
        while !power.is_identity() {
            power = power.mul(self).expect("same shape");
            k += 1;
        }
        Some(k)
    }

    fn same_shape(&self, other: &RingMatrix) -> Result<()> {
        self.precision.ensure_same(other.precision)?;
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        Ok(())
    }
}

/// Result of [`AffineMap::order`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Order {
    Finite(u64),
    NotPermutation,
}

impl Order {
    pub fn finite(self) -> Option<u64> {
        match self {
            Order::Finite(k) => Some(k),
            Order::NotPermutation => None,
        }
    }
}

/// The affine self-map `h ↦ A·h + b` of `R_pᵈ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AffineMap {
    linear: RingMatrix,
    offset: RingVector,
}

impl AffineMap {
    pub fn new(linear: RingMatrix, offset: RingVector) -> Result<Self> {
        linear.precision.ensure_same(offset.precision)?;
        if linear.dim != offset.dim() {
            return Err(Error::DimensionMismatch {
                expected: linear.dim,
                actual: offset.dim(),
            });
        }
        Ok(Self { linear, offset })
    }

    pub fn from_parts(precision: Precision, rows: &[Vec<u64>], offset: Vec<u64>) -> Result<Self> {
        Self::new(
            RingMatrix::from_rows(precision, rows)?,
            RingVector::new(precision, offset)?,
        )
    }

    pub fn identity(dim: usize, precision: Precision) -> Self {
        Self {
            linear: RingMatrix::identity(dim, precision),
            offset: RingVector::zeros(dim, precision),
        }
    }

    /// The constant map `h ↦ b`.
    pub fn constant(offset: RingVector) -> Self {
        Self {
            linear: RingMatrix::zeros(offset.dim(), offset.precision),
            offset,
        }
    }

    pub fn linear(&self) -> &RingMatrix {
        &self.linear
    }

    pub fn offset(&self) -> &RingVector {
        &self.offset
    }

    pub fn dim(&self) -> usize {
        self.linear.dim
    }

    pub fn precision(&self) -> Precision {
        self.linear.precision
    }

    pub fn is_identity(&self) -> bool {
        self.linear.is_identity() && self.offset.is_zero()
    }

    pub fn apply(&self, h: &RingVector) -> Result<RingVector> {
        self.linear.mul_vec(h)?.add(&self.offset)
    }

    /// `self ∘ inner`, i.e. first `inner`, then `self`: `(A₂A₁, A₂b₁ + b₂)`.
    pub fn compose(&self, inner: &AffineMap) -> Result<AffineMap> {
        Ok(Self {
            linear: self.linear.mul(&inner.linear)?,
            offset: self.linear.mul_vec(&inner.offset)?.add(&self.offset)?,
        })
    }

    /// `selfᵏ` by repeated squaring.
    pub fn pow(&self, mut exp: u64) -> AffineMap {
        let mut base = self.clone();
        let mut acc = Self::identity(self.dim(), self.precision());
        while exp > 0 {
            if exp & 1 == 1 {
                acc = base.compose(&acc).expect("same shape");
            }
            base = base.compose(&base).expect("same shape");
            exp >>= 1;
        }
        acc
    }

    pub fn is_permutation(&self) -> bool {
        self.linear.is_invertible()
    }

    /// Order of the map in the affine group, found by iterated composition.
    pub fn order(&self) -> Order {
        if !self.is_permutation() {
            return Order::NotPermutation;
        }
        let mut power = self.clone();
        let mut k = 1;
        while !power.is_identity() {
            power = self.compose(&power).expect("same shape");
            k += 1;
        }
        Order::Finite(k)
    }

    /// Images of every state, in [`StateSpace`] order.
    pub fn function_table(&self, budget: Budget) -> Result<Vec<RingVector>> {
        StateSpace::new(self.dim(), self.precision(), budget)?
            .map(|h| self.apply(&h))
            .collect()
    }

    /// Pointwise comparison on the full state space.
    pub fn eq_as_function(&self, other: &AffineMap, budget: Budget) -> Result<bool> {
        if self.dim() != other.dim() || self.precision() != other.precision() {
            return Ok(false);
        }
        for h in StateSpace::new(self.dim(), self.precision(), budget)? {
            if self.apply(&h)? != other.apply(&h)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Payload size of the canonical serialization: `(d² + d)·p`.
    pub fn serialized_bits(dim: usize, precision: Precision) -> usize {
        (dim * dim + dim) * precision.bits() as usize
    }

    /// Row-major entries of `A`, then `b`, each an unsigned `p`-bit field,
    /// most significant bit first.
    pub fn to_bits(&self) -> BitString {
        let p = self.precision().bits();
        let mut bits = BitString::with_capacity(Self::serialized_bits(self.dim(), self.precision()));
        for &v in self.linear.values().iter().chain(self.offset.values()) {
            bits.push_uint(v, p);
        }
        bits
    }

    pub fn from_bits(dim: usize, precision: Precision, bits: &BitString) -> Result<Self> {
        let expected = Self::serialized_bits(dim, precision);
        if bits.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: bits.len(),
            });
        }
        let p = precision.bits();
        let mut fields = (0..dim * dim + dim).map(|i| bits.read_uint(i * p as usize, p));
        let linear: Vec<u64> = fields.by_ref().take(dim * dim).collect();
        let offset: Vec<u64> = fields.collect();
        Self::new(
            RingMatrix::new(precision, dim, linear)?,
            RingVector::new(precision, offset)?,
        )
    }
}

impl fmt::Display for AffineMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(A=[")?;
        for (i, row) in self.linear.rows().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", RingVector::wrapping(self.precision(), row.clone()))?;
        }
        write!(f, "], b={})", self.offset)
    }
}

/// An MSB-first bit string, the unit of protocol payloads and streaming memory.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            bits: Vec::with_capacity(n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            bits: vec![false; n],
        }
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push_uint(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            self.bits.push(value >> i & 1 == 1);
        }
    }

    /// Appends a `width`-bit field holding a value up to 128 bits wide.
    pub fn push_wide(&mut self, value: u128, width: u32) {
        for i in (0..width).rev() {
            self.bits.push(value >> i & 1 == 1);
        }
    }

    pub fn read_uint(&self, offset: usize, width: u32) -> u64 {
        self.bits[offset..offset + width as usize]
            .iter()
            .fold(0u64, |acc, &b| acc << 1 | u64::from(b))
    }

    pub fn read_wide(&self, offset: usize, width: u32) -> u128 {
        self.bits[offset..offset + width as usize]
            .iter()
            .fold(0u128, |acc, &b| acc << 1 | u128::from(b))
    }

    pub fn extend(&mut self, other: &BitString) {
        self.bits.extend_from_slice(&other.bits);
    }

    pub fn slice(&self, offset: usize, len: usize) -> BitString {
        Self {
            bits: self.bits[offset..offset + len].to_vec(),
        }
    }

    /// Hex rendering, MSB first; the final nibble is zero-padded on the right.
    pub fn to_hex(&self) -> String {
        self.bits
            .chunks(4)
            .map(|nibble| {
                let v = nibble
                    .iter()
                    .chain(std::iter::repeat(&false))
                    .take(4)
                    .fold(0u32, |acc, &b| acc << 1 | u32::from(b));
                char::from_digit(v, 16).expect("nibble")
            })
            .collect()
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<Self> {
        let mut bits = Vec::with_capacity(hex.len() * 4);
        for c in hex.chars() {
            let v = c
                .to_digit(16)
                .ok_or_else(|| Error::Parse(format!("invalid hex digit {c:?}")))?;
            for i in (0..4).rev() {
                bits.push(v >> i & 1 == 1);
            }
        }
        if hex.chars().count() != len.div_ceil(4) {
            return Err(Error::Parse(format!(
                "hex string of {} digits cannot hold exactly {len} bits",
                hex.len()
            )));
        }
        bits.truncate(len);
        Ok(Self { bits })
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", u8::from(b))?;
        }
        Ok(())
    }
}

/// Upper bound on the number of items an exhaustive enumeration may visit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget(pub u128);

impl Budget {
    pub const DEFAULT: Budget = Budget(1 << 24);

    pub fn check(self, needed: Option<u128>) -> Result<u128> {
        match needed {
            Some(n) if n <= self.0 => Ok(n),
            Some(n) => Err(Error::BudgetExceeded {
                needed: n,
                budget: self.0,
            }),
            None => Err(Error::BudgetExceeded {
                needed: u128::MAX,
                budget: self.0,
            }),
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self::DEFAULT
    }
}

fn pow2(exp: u64) -> Option<u128> {
    (exp < 128).then(|| 1u128 << exp)
}

/// Iterator over every vector of `R_pᵈ`, ordered by its MSB-first serialization.
#[derive(Clone, Debug)]
pub struct StateSpace {
    dim: usize,
    precision: Precision,
    next: u128,
    count: u128,
}

impl StateSpace {
    pub fn new(dim: usize, precision: Precision, budget: Budget) -> Result<Self> {
        let count = budget.check(pow2(dim as u64 * u64::from(precision.bits())))?;
        Ok(Self {
            dim,
            precision,
            next: 0,
            count,
        })
    }

    pub fn size(&self) -> u128 {
        self.count
    }
}

impl Iterator for StateSpace {
    type Item = RingVector;

    fn next(&mut self) -> Option<RingVector> {
        if self.next >= self.count {
            return None;
        }
        let idx = self.next;
        self.next += 1;
        Some(RingVector::wrapping(
            self.precision,
            unpack_fields(idx, self.dim, self.precision),
        ))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = usize::try_from(self.count - self.next).unwrap_or(usize::MAX);
        (rest, Some(rest))
    }
}

fn unpack_fields(index: u128, fields: usize, precision: Precision) -> Vec<u64> {
    let p = precision.bits();
    (0..fields)
        .map(|i| {
            let shift = (fields - 1 - i) as u32 * p;
            (index >> shift) as u64 & precision.mask()
        })
        .collect()
}

/// Number of affine self-maps of `R_pᵈ` as parameter pairs: `2^{p(d²+d)}`.
pub fn affine_map_count(dim: usize, precision: Precision) -> Option<u128> {
    pow2((dim * dim + dim) as u64 * u64::from(precision.bits()))
}

/// Iterator over all `(A, b)` pairs; the `i`-th map is the one whose
/// canonical serialization, read as an integer, equals `i`.
#[derive(Clone, Debug)]
pub struct AffineMaps {
    dim: usize,
    precision: Precision,
    next: u128,
    count: u128,
}

impl AffineMaps {
    pub fn len(&self) -> u128 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

impl Iterator for AffineMaps {
    type Item = AffineMap;

    fn next(&mut self) -> Option<AffineMap> {
        if self.next >= self.count {
            return None;
        }
        let d = self.dim;
        let fields = unpack_fields(self.next, d * d + d, self.precision);
        self.next += 1;
        Some(AffineMap {
            linear: RingMatrix {
                precision: self.precision,
                dim: d,
                entries: fields[..d * d].to_vec(),
            },
            offset: RingVector {
                precision: self.precision,
                entries: fields[d * d..].to_vec(),
            },
        })
    }
}

pub fn enumerate_affine_maps(dim: usize, precision: Precision, budget: Budget) -> Result<AffineMaps> {
    if dim == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: 0,
        });
    }
    let count = budget.check(affine_map_count(dim, precision))?;
    Ok(AffineMaps {
        dim,
        precision,
        next: 0,
        count,
    })
}

/// Every `d×d` matrix over `R_p`.
pub fn enumerate_matrices(
    dim: usize,
    precision: Precision,
    budget: Budget,
) -> Result<impl Iterator<Item = RingMatrix>> {
    let count = budget.check(pow2((dim * dim) as u64 * u64::from(precision.bits())))?;
    Ok((0..count).map(move |idx| RingMatrix {
        precision,
        dim,
        entries: unpack_fields(idx, dim * dim, precision),
    }))
}

/// The general linear group `GL(d, R_p)`, enumerated by filtering.
pub fn enumerate_invertible_matrices(
    dim: usize,
    precision: Precision,
    budget: Budget,
) -> Result<impl Iterator<Item = RingMatrix>> {
    Ok(enumerate_matrices(dim, precision, budget)?.filter(RingMatrix::is_invertible))
}
