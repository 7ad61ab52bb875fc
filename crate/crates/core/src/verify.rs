//! Exhaustive checks of the small-ring algebra: orders of affine
//! permutations of `F₂³`, matrix order spectra, the unipotent identity and
//! the counting gap between wide and narrow affine maps.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ring::{
    affine_map_count, enumerate_affine_maps, enumerate_invertible_matrices, enumerate_matrices, AffineMap, Budget,
    Order, Precision, RingMatrix, RingVector, StateSpace,
};

/// Orders the proof's divisor analysis allows for affine permutations of `F₂³`.
pub const ALLOWED_F2_CUBE_ORDERS: [u64; 7] = [1, 2, 3, 4, 6, 7, 14];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrderReport {
    pub dim: usize,
    pub invertible_matrices: u64,
    pub total: u64,
    pub histogram: BTreeMap<u64, u64>,
    pub absent: Vec<u64>,
    pub support_within_allowed: bool,
    /// Every order re-confirmed by applying the map pointwise.
    pub reapplication_confirmed: bool,
}

impl OrderReport {
    pub fn passed(&self) -> bool {
        self.absent.iter().all(|o| !self.histogram.contains_key(o))
            && self.support_within_allowed
            && self.reapplication_confirmed
            && self.histogram.values().sum::<u64>() == self.total
    }
}

/// The order of `f` computed only by iterating its function table.
pub fn order_by_reapplication(f: &AffineMap, budget: Budget) -> Result<Option<u64>> {
    let states: Vec<RingVector> = StateSpace::new(f.dim(), f.precision(), budget)?.collect();
    let mut current = states.clone();
    for k in 1..=states.len() as u64 * states.len() as u64 {
        current = current.iter().map(|h| f.apply(h)).collect::<Result<_>>()?;
        if current == states {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// All affine permutations of `F₂ᵈ` with their orders, for `d = 3` the
/// case with no element of order 8.
pub fn affine_order_histogram(dim: usize, budget: Budget) -> Result<OrderReport> {
    let p = Precision::new(1)?;
    let invertible: Vec<RingMatrix> = enumerate_invertible_matrices(dim, p, budget)?.collect();
    let offsets: Vec<RingVector> = StateSpace::new(dim, p, budget)?.collect();
    let mut histogram = BTreeMap::new();
    let mut total = 0;
    let mut confirmed = true;
    for a in &invertible {
        for b in &offsets {
            let f = AffineMap::new(a.clone(), b.clone())?;
            let Order::Finite(order) = f.order() else {
                return Err(Error::InvalidMachine("invertible affine map reported as non-permutation".into()));
            };
            if order_by_reapplication(&f, budget)? != Some(order) {
                confirmed = false;
            }
            *histogram.entry(order).or_insert(0) += 1;
            total += 1;
        }
    }
    let support_within_allowed = dim != 3 || histogram.keys().all(|o| ALLOWED_F2_CUBE_ORDERS.contains(o));
    Ok(OrderReport {
        dim,
        invertible_matrices: invertible.len() as u64,
        total,
        histogram,
        absent: if dim == 3 { vec![8] } else { Vec::new() },
        support_within_allowed,
        reapplication_confirmed: confirmed,
    })
}

pub fn verify_no_order8() -> Result<OrderReport> {
    affine_order_histogram(3, Budget::DEFAULT)
}

/// Multiplicative orders of the elements of `GL(d, ℤ/2ᵖ)`.
pub fn matrix_order_spectrum(dim: usize, bits: u32, budget: Budget) -> Result<BTreeSet<u64>> {
    let p = Precision::new(bits)?;
    enumerate_invertible_matrices(dim, p, budget)?
        .map(|a| {
            a.multiplicative_order()
                .ok_or_else(|| Error::InvalidMachine("invertible matrix without finite order".into()))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UnipotentReport {
    pub dim: usize,
    pub unipotent: u64,
    /// `I + A + A² + A³ = 0` for every unipotent `A`.
    pub identity_holds: bool,
    /// `f⁴ = id` for every unipotent `A` and every offset `b`.
    pub order_divides_four: bool,
}

impl UnipotentReport {
    pub fn passed(&self) -> bool {
        self.identity_holds && self.order_divides_four
    }
}

/// `I + A + A² + A³` over `F₂`.
pub fn geometric_sum4(a: &RingMatrix) -> Result<RingMatrix> {
    let id = RingMatrix::identity(a.dim(), a.precision());
    let a2 = a.mul(a)?;
    let a3 = a2.mul(a)?;
    id.add(a)?.add(&a2)?.add(&a3)
}

pub fn verify_unipotent_identity(dim: usize, budget: Budget) -> Result<UnipotentReport> {
    let p = Precision::new(1)?;
    let id = RingMatrix::identity(dim, p);
    let zero = RingMatrix::zeros(dim, p);
    let offsets: Vec<RingVector> = StateSpace::new(dim, p, budget)?.collect();
    let mut report = UnipotentReport {
        dim,
        unipotent: 0,
        identity_holds: true,
        order_divides_four: true,
    };
    for n in enumerate_matrices(dim, p, budget)? {
        if n.pow(dim as u64) != zero {
            continue;
        }
        let a = id.add(&n)?;
        report.unipotent += 1;
        if geometric_sum4(&a)? != zero {
            report.identity_holds = false;
        }
        for b in &offsets {
            if !AffineMap::new(a.clone(), b.clone())?.pow(4).is_identity() {
                report.order_divides_four = false;
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountingReport {
    pub width: usize,
    pub bits: u32,
    /// `2^{p(w²+w)}` parameters and distinct functions on `(ℤ/2ᵖ)ʷ`.
    pub wide_params: u128,
    pub wide_functions: u128,
    /// `2^{2pw}` parameters and distinct functions on `ℤ/2^{pw}`.
    pub narrow_params: u128,
    pub narrow_functions: u128,
    pub strict: bool,
}

impl CountingReport {
    pub fn passed(&self) -> bool {
        self.wide_functions == self.wide_params
            && self.narrow_functions == self.narrow_params
            && (self.width < 2 || self.wide_functions > self.narrow_functions)
            && (self.width != 1 || self.wide_functions == self.narrow_functions)
    }
}

fn distinct_functions(dim: usize, precision: Precision, budget: Budget) -> Result<u128> {
    let states = StateSpace::new(dim, precision, budget)?.size();
    let maps = affine_map_count(dim, precision);
    budget.check(maps.and_then(|m| m.checked_mul(states)))?;
    let states: Vec<RingVector> = StateSpace::new(dim, precision, budget)?.collect();
    let mut seen = HashSet::new();
    for f in enumerate_affine_maps(dim, precision, budget)? {
        let table: Vec<RingVector> = states.iter().map(|h| f.apply(h)).collect::<Result<_>>()?;
        seen.insert(table);
    }
    Ok(seen.len() as u128)
}

pub fn verify_affine_counting(width: usize, bits: u32, budget: Budget) -> Result<CountingReport> {
    let wide = Precision::new(bits)?;
    let narrow_bits = bits
        .checked_mul(width as u32)
        .ok_or(Error::InvalidPrecision(u32::MAX))?;
    let narrow = Precision::new(narrow_bits)?;
    let too_big = || Error::BudgetExceeded {
        needed: u128::MAX,
        budget: budget.0,
    };
    let wide_params = affine_map_count(width, wide).ok_or_else(too_big)?;
    let narrow_params = affine_map_count(1, narrow).ok_or_else(too_big)?;
    let wide_functions = distinct_functions(width, wide, budget)?;
    let narrow_functions = distinct_functions(1, narrow, budget)?;
    Ok(CountingReport {
        width,
        bits,
        wide_params,
        wide_functions,
        narrow_params,
        narrow_functions,
        strict: wide_functions > narrow_functions,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PigeonholeReport {
    pub width: usize,
    pub bits: u32,
    /// Distinct wide maps that a width-1 simulator would have to separate.
    pub needed: u128,
    /// Affine maps available to a width-1, precision-`pw` layer.
    pub available: u128,
    /// `"needed > available"` when the counting argument applies.
    pub certificate: Option<String>,
    pub pairs_checked: u128,
    /// Every pair of distinct maps has a point where they differ.
    pub all_pairs_separated: bool,
}

impl PigeonholeReport {
    pub fn passed(&self) -> bool {
        self.all_pairs_separated && (self.certificate.is_some() == (self.needed > self.available))
    }
}

/// Any assignment of the wide maps to width-1 maps collides, yet every two
/// distinct wide maps are told apart by some input.
pub fn verify_injectivity_pigeonhole(width: usize, bits: u32, budget: Budget) -> Result<PigeonholeReport> {
    let p = Precision::new(bits)?;
    let narrow = Precision::new(bits * width as u32)?;
    let maps: Vec<AffineMap> = enumerate_affine_maps(width, p, budget)?.collect();
    let len = maps.len() as u128;
    budget.check(Some(len * len.saturating_sub(1) / 2))?;
    let states: Vec<RingVector> = StateSpace::new(width, p, budget)?.collect();
    let tables: Vec<Vec<RingVector>> = maps
        .iter()
        .map(|f| states.iter().map(|h| f.apply(h)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let mut pairs = 0u128;
    let mut separated = true;
    for i in 0..tables.len() {
        for j in i + 1..tables.len() {
            pairs += 1;
            if !tables[i].iter().zip(&tables[j]).any(|(a, b)| a != b) {
                separated = false;
            }
        }
    }
    let needed = len;
    let available = affine_map_count(1, narrow).unwrap_or(u128::MAX);
    Ok(PigeonholeReport {
        width,
        bits,
        needed,
        available,
        certificate: (needed > available).then(|| format!("{needed} > {available}")),
        pairs_checked: pairs,
        all_pairs_separated: separated,
    })
}

/// The mod-8 counter's transition `h ↦ h + 1` on `ℤ/8`.
pub fn mod_counter_transition() -> AffineMap {
    let p = Precision::new(3).expect("valid");
    AffineMap::from_parts(p, &[vec![1]], vec![1]).expect("valid")
}

#[derive(Clone, Debug, Serialize)]
pub struct AlgebraReport {
    pub orders: OrderReport,
    pub gl1_spectrum: BTreeSet<u64>,
    pub gl2_spectrum: BTreeSet<u64>,
    pub gl3_spectrum: BTreeSet<u64>,
    pub unipotent: UnipotentReport,
    pub counting: Vec<CountingReport>,
    pub pigeonhole: Vec<PigeonholeReport>,
    pub counter_order: u64,
}

impl AlgebraReport {
    pub fn passed(&self) -> bool {
        self.orders.passed()
            && self.orders.total == 1344
            && self.gl1_spectrum == BTreeSet::from([1])
            && self.gl2_spectrum == BTreeSet::from([1, 2, 3])
            && self.gl3_spectrum == BTreeSet::from([1, 2, 3, 4, 7])
            && self.unipotent.passed()
            && self.counting.iter().all(CountingReport::passed)
            && self.pigeonhole.iter().all(PigeonholeReport::passed)
            && self.counter_order == 8
    }
}

/// Every algebra check at its standard sizes.
pub fn algebra_suite(budget: Budget) -> Result<AlgebraReport> {
    Ok(AlgebraReport {
        orders: affine_order_histogram(3, budget)?,
        gl1_spectrum: matrix_order_spectrum(1, 1, budget)?,
        gl2_spectrum: matrix_order_spectrum(2, 1, budget)?,
        gl3_spectrum: matrix_order_spectrum(3, 1, budget)?,
        unipotent: verify_unipotent_identity(3, budget)?,
        counting: [(1, 1), (2, 1), (3, 1)]
            .iter()
            .map(|&(w, p)| verify_affine_counting(w, p, budget))
            .collect::<Result<_>>()?,
        pigeonhole: [(1, 1), (2, 1)]
            .iter()
            .map(|&(w, p)| verify_injectivity_pigeonhole(w, p, budget))
            .collect::<Result<_>>()?,
        counter_order: mod_counter_transition().order().finite().unwrap_or(0),
    })
}
