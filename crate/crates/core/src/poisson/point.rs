use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::tower::{level_in_set, CellSet, TowerGeometry};

pub const DEFAULT_BITS: u32 = 128;

/// Bits kept in reserve below the offset precision; climbing through columns
/// may consume at most `bits - GUARD_BITS` bits of the offset.
pub const GUARD_BITS: u32 = 32;

/// A point of `X_stage`: level in `[0, h_stage)` and offset
/// `offset / 2^bits` of the level width.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Point {
    pub stage: usize,
    #[serde(with = "rational::serde_bigint")]
    pub level: BigInt,
    #[serde(serialize_with = "ser_biguint")]
    pub offset: BigUint,
}

fn ser_biguint<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// Point dynamics over a derived geometry, starting from window `X_K`.
#[derive(Clone, Debug)]
pub struct Simulator<'g> {
    geometry: &'g TowerGeometry,
    window: usize,
    bits: u32,
    limit: usize,
}

impl<'g> Simulator<'g> {
    /// Uses every derived stage above the window that the offset precision
    /// can still resolve.
    pub fn new(geometry: &'g TowerGeometry, window: usize, bits: u32) -> Result<Self> {
        Self::check(geometry, window, bits)?;
        let budget = BigUint::one() << (bits - GUARD_BITS);
        let mut product = BigUint::one();
        let mut limit = window;
        while limit < geometry.depth() {
            product *= geometry.cuts(limit).expect("below depth");
            if product > budget {
                break;
            }
            limit += 1;
        }
        let sim = Simulator {
            geometry,
            window,
            bits,
            limit,
        };
        if limit == window {
            if window == geometry.depth() {
                return Err(Error::ExtensionRequired {
                    requested: window + 1,
                    available: geometry.depth(),
                });
            }
            return Err(sim.precision_error(window + 1));
        }
        Ok(sim)
    }

    /// Exactly `headroom` stages above the window, audited for precision.
    pub fn with_headroom(geometry: &'g TowerGeometry, window: usize, bits: u32, headroom: usize) -> Result<Self> {
        Self::check(geometry, window, bits)?;
        if headroom == 0 {
            return Err(Error::InvalidArgument("headroom must be at least one stage".into()));
        }
        geometry.check_stage(window + headroom)?;
        let product: BigUint = (window..window + headroom)
            .map(|j| BigUint::from(geometry.cuts(j).expect("below depth")))
            .product();
        let sim = Simulator {
            geometry,
            window,
            bits,
            limit: window + headroom,
        };
        if product > BigUint::one() << (bits - GUARD_BITS) {
            return Err(sim.precision_error(window + headroom));
        }
        Ok(sim)
    }

    fn check(geometry: &TowerGeometry, window: usize, bits: u32) -> Result<()> {
        geometry.check_stage(window)?;
        if bits <= GUARD_BITS || bits > 4096 {
            return Err(Error::Precision {
                bits,
                reason: format!("need between {} and 4096 bits", GUARD_BITS + 1),
            });
        }
        Ok(())
    }

    fn precision_error(&self, stage: usize) -> Error {
        Error::Precision {
            bits: self.bits,
            reason: format!(
                "columns of stage {stage} not separable from window {} with {} guard bits",
                self.window, GUARD_BITS
            ),
        }
    }

    pub fn geometry(&self) -> &'g TowerGeometry {
        self.geometry
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Highest stage a point may climb to.
    pub fn limit(&self) -> usize {
        self.limit
    }

    /// Readdresses the point at the next stage through its column.
    fn climb(&self, p: &mut Point) -> Result<()> {
        if p.stage >= self.limit {
            return Err(if self.limit == self.geometry.depth() {
                Error::ExtensionRequired {
                    requested: self.limit + 1,
                    available: self.geometry.depth(),
                }
            } else {
                self.precision_error(self.limit + 1)
            });
        }
        let cut = self.geometry.cut(p.stage).expect("below depth");
        let scaled = &p.offset * BigUint::from(cut.cuts());
        let column: usize = (&scaled >> self.bits).try_into().expect("column below cut count");
        p.offset = scaled & ((BigUint::one() << self.bits) - 1u32);
        p.level += &cut.offsets[column];
        p.stage += 1;
        Ok(())
    }

    /// Same point addressed at `stage ≥ point.stage`.
    pub fn lift_to(&self, point: &Point, stage: usize) -> Result<Point> {
        let mut p = point.clone();
        while p.stage < stage {
            self.climb(&mut p)?;
        }
        Ok(p)
    }

    /// `Tⁿ` applied to the point; `n` may be negative.
    pub fn apply_t(&self, point: &Point, n: &BigInt) -> Result<Point> {
        let mut p = point.clone();
        p.level += n;
        while p.level.is_negative() || &p.level >= self.geometry.height(p.stage) {
            self.climb(&mut p)?;
        }
        Ok(p)
    }

    pub fn contains(&self, set: &CellSet, point: &Point) -> Result<bool> {
        if point.stage < set.stage() {
            let p = self.lift_to(point, set.stage())?;
            return Ok(level_in_set(self.geometry, set, p.stage, &p.level));
        }
        Ok(level_in_set(self.geometry, set, point.stage, &point.level))
    }

    /// Position of the point inside its level, as a fraction of `w_stage`.
    pub fn offset_fraction(&self, point: &Point) -> Rational {
        Rational::new(point.offset.clone().into(), BigInt::one() << self.bits)
    }
}
