use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use super::group::CyclicFactor;
use super::permutation::FinitePermutation;
use crate::error::{Error, Result};
use crate::tower::TowerGeometry;

/// Upper bound on the number of labelled cells in an approximation.
const MAX_CELLS: usize = 1 << 26;

/// Cells `(g, z, ℓ)`: group element, skew fibre and tower level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ApproxSystem {
    pub height: usize,
    pub factor: Option<CyclicFactor>,
    pub skew_p: Option<u64>,
}

impl ApproxSystem {
    pub fn tower(height: usize) -> Self {
        ApproxSystem {
            height,
            factor: None,
            skew_p: None,
        }
    }

    pub fn with_factor(mut self, factor: CyclicFactor) -> Self {
        self.factor = Some(factor);
        self
    }

    pub fn with_skew(mut self, p: u64) -> Self {
        self.skew_p = Some(p);
        self
    }

    pub fn order(&self) -> usize {
        self.factor.map_or(1, |f| f.order() as usize)
    }

    pub fn fibres(&self) -> usize {
        self.skew_p.map_or(1, |p| p as usize)
    }

    pub fn size(&self) -> usize {
        self.order() * self.fibres() * self.height
    }

    /// Index of cell `(g, z, ℓ)` is `(g·P + z)·h + ℓ`.
    pub fn index(&self, g: usize, z: usize, level: usize) -> usize {
        (g * self.fibres() + z) * self.height + level
    }
}

#[derive(Clone, Debug)]
pub struct CyclicApproximation {
    pub system: ApproxSystem,
    pub permutation: FinitePermutation,
    /// Set when the tower's own cut stacks spacers, so the top→bottom wrap
    /// is only a rough model of `T`.
    pub approximate: bool,
}

/// Permutation of labelled cells where the tower top wraps to the bottom and
/// the group coordinate shifts by one every step.
pub fn cyclic_approximation(system: ApproxSystem) -> Result<FinitePermutation> {
    if system.height == 0 {
        return Err(Error::InvalidArgument("tower height must be ≥ 1".into()));
    }
    if system.size() > MAX_CELLS {
        return Err(Error::InvalidArgument(format!(
            "{} cells exceed the approximation limit {MAX_CELLS}",
            system.size()
        )));
    }
    let (m, p, h) = (system.order(), system.fibres(), system.height);
    let skew = system.skew_p.is_some();
    let mut images = Vec::with_capacity(system.size());
    for g in 0..m {
        for z in 0..p {
            for level in 0..h {
                let g2 = (g + 1) % m;
                let (z2, l2) = if !skew || z == 0 {
                    ((z + 1) % p, (level + 1) % h)
                } else {
                    ((z + 1) % p, level)
                };
                images.push(system.index(g2, z2, l2));
            }
        }
    }
    FinitePermutation::from_images(images)
}

impl CyclicApproximation {
    /// Approximation built on the stage-`j` tower.
    pub fn at_stage(
        geometry: &TowerGeometry,
        j: usize,
        factor: Option<CyclicFactor>,
        skew_p: Option<u64>,
    ) -> Result<Self> {
        geometry.check_stage(j)?;
        let height = geometry
            .height(j)
            .to_usize()
            .filter(|&h| h <= MAX_CELLS)
            .ok_or_else(|| Error::InvalidArgument(format!("tower {j} too tall to enumerate")))?;
        let system = ApproxSystem {
            height,
            factor,
            skew_p,
        };
        let approximate = geometry
            .cut(j)
            .is_some_and(|c| c.spacers.iter().any(|s| !s.is_zero()));
        Ok(CyclicApproximation {
            system,
            permutation: cyclic_approximation(system)?,
            approximate,
        })
    }
}

/// Number of cycles of `perm^k`, i.e. `Σ gcd(len, k)` over the cycles of `perm`.
pub fn count_ergodic_components(perm: &FinitePermutation, k: u64) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidArgument("power must be ≥ 1".into()));
    }
    Ok(perm
        .cycles()
        .iter()
        .map(|c| (c.len() as u64).gcd(&k) as usize)
        .sum())
}
