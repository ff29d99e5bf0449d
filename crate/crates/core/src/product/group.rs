use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::tower::{correlation, CellSet, MeasureInterval, TowerGeometry};

/// The `+1` shift on `Z_m` with uniform measure: a finite truncation of a
/// discrete rational spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CyclicFactor {
    order: u64,
}

impl CyclicFactor {
    pub fn new(order: u64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("group order must be ≥ 1".into()));
        }
        Ok(CyclicFactor { order })
    }

    /// `Z_{p₁⋯pₙ}` for distinct primes.
    pub fn from_primes(primes: &[u64]) -> Result<Self> {
        Self::new(primes.iter().product())
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    /// `ν({g}) = 1/m`.
    pub fn atom(&self) -> Rational {
        rational::ratio(1, self.order)
    }

    pub fn whole(&self) -> GroupSet {
        GroupSet {
            order: self.order,
            elements: (0..self.order).collect(),
        }
    }
}

/// A subset of `Z_m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupSet {
    order: u64,
    elements: BTreeSet<u64>,
}

impl GroupSet {
    pub fn new(order: u64, elements: impl IntoIterator<Item = u64>) -> Result<Self> {
        CyclicFactor::new(order)?;
        let elements: BTreeSet<u64> = elements.into_iter().collect();
        if let Some(&bad) = elements.iter().find(|&&e| e >= order) {
            return Err(Error::InvalidArgument(format!("{bad} is not in Z_{order}")));
        }
        Ok(GroupSet { order, elements })
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn elements(&self) -> &BTreeSet<u64> {
        &self.elements
    }

    pub fn measure(&self) -> Rational {
        rational::ratio(self.elements.len() as u64, self.order)
    }

    pub fn shifted(&self, n: &BigInt) -> GroupSet {
        let s = n.mod_floor(&BigInt::from(self.order)).to_u64().expect("residue fits");
        GroupSet {
            order: self.order,
            elements: self.elements.iter().map(|e| (e + s) % self.order).collect(),
        }
    }
}

/// `ν(D ∩ SⁿE) = |D ∩ (E + n)| / m`.
pub fn s_correlation(d: &GroupSet, e: &GroupSet, n: &BigInt) -> Result<Rational> {
    if d.order != e.order {
        return Err(Error::OrderMismatch(d.order, e.order));
    }
    let moved = e.shifted(n);
    let common = d.elements.intersection(&moved.elements).count() as u64;
    Ok(rational::ratio(common, d.order))
}

/// `(μ×ν)((A×D) ∩ (T×S)ⁿ(B×E)) = ν(D ∩ SⁿE) · μ(A ∩ TⁿB)`.
pub fn product_correlation(
    geometry: &TowerGeometry,
    a: &CellSet,
    d: &GroupSet,
    b: &CellSet,
    e: &GroupSet,
    n: &BigInt,
    tol: &Rational,
) -> Result<MeasureInterval> {
    let factor = s_correlation(d, e, n)?;
    if factor == Rational::from_integer(0.into()) {
        return Ok(MeasureInterval::point(factor));
    }
    // Scale the tolerance so the product interval still meets `tol`.
    let base = correlation(geometry, a, b, n, &(tol / &factor))?;
    Ok(base.scale(&factor))
}
