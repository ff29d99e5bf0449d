//! Exact interval bounds on `μ(A ∩ TⁿB)`.
//!
//! At resolution stage `K` the stage-`K` tower is a stack of `h_K` levels and
//! `T` moves level `ℓ` to `ℓ + 1` below the top. A point of `A` at level `ℓ`
//! has `T⁻ⁿ`-preimage at level `ℓ − n` whenever that level exists, so those
//! pairs are counted exactly. The remaining mass sits in the bottom `n` levels
//! (the top `|n|` for `n < 0`) and only widens the interval.
//!
//! Both sets are kept implicit above their own stage: level membership and
//! range counts are answered by walking the column offsets down, and the
//! shifted overlap count is a memoised recursion over stages. Nothing is ever
//! expanded to individual levels of deep towers.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::cells::CellSet;
use super::geometry::{TowerGeometry, DEFAULT_DEPTH_CAP};
use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Exact lower and upper bounds on a measure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureInterval {
    #[serde(with = "rational::serde_pq")]
    pub lo: Rational,
    #[serde(with = "rational::serde_pq")]
    pub hi: Rational,
}

impl MeasureInterval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self> {
        if lo < Rational::zero() || lo > hi {
            return Err(Error::InvalidArgument(format!(
                "bad interval [{}, {}]",
                rational::format(&lo),
                rational::format(&hi)
            )));
        }
        Ok(MeasureInterval { lo, hi })
    }

    pub fn point(value: Rational) -> Self {
        MeasureInterval {
            lo: value.clone(),
            hi: value,
        }
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn mid(&self) -> Rational {
        (&self.lo + &self.hi) / rational::int(2)
    }

    pub fn contains(&self, value: &Rational) -> bool {
        &self.lo <= value && value <= &self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    /// Multiplies both ends by a non-negative factor.
    pub fn scale(&self, factor: &Rational) -> Self {
        debug_assert!(factor >= &Rational::zero());
        MeasureInterval {
            lo: &self.lo * factor,
            hi: &self.hi * factor,
        }
    }

    /// Interval product of two non-negative intervals.
    pub fn product(&self, other: &MeasureInterval) -> Self {
        MeasureInterval {
            lo: &self.lo * &other.lo,
            hi: &self.hi * &other.hi,
        }
    }

    pub fn intersect(&self, other: &MeasureInterval) -> Option<Self> {
        let lo = if self.lo > other.lo { &self.lo } else { &other.lo };
        let hi = if self.hi < other.hi { &self.hi } else { &other.hi };
        (lo <= hi).then(|| MeasureInterval {
            lo: lo.clone(),
            hi: hi.clone(),
        })
    }

    pub fn is_subset_of(&self, other: &MeasureInterval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }
}

/// Default tolerance `2⁻⁴⁰ · μ(A)`.
pub fn default_tolerance(measure: &Rational) -> Rational {
    measure * rational::dyadic(40)
}

/// A [`CellSet`] read as an indicator word over the levels of any tower at or
/// above its own stage.
struct ImplicitSet<'a> {
    geometry: &'a TowerGeometry,
    set: &'a CellSet,
    /// `totals[k - stage]` is the level count at stage `k`.
    totals: Vec<BigInt>,
}

impl<'a> ImplicitSet<'a> {
    fn new(geometry: &'a TowerGeometry, set: &'a CellSet, top: usize) -> Self {
        let mut totals = vec![set.count()];
        for j in set.stage()..top {
            let cuts = geometry.cut(j).expect("derived").cuts();
            let next = totals.last().unwrap() * cuts;
            totals.push(next);
        }
        ImplicitSet {
            geometry,
            set,
            totals,
        }
    }

    fn total(&self, k: usize) -> &BigInt {
        &self.totals[k - self.set.stage()]
    }

    /// Levels of the stage-`k` tower below `x` that belong to the set.
    fn count_below(&self, k: usize, x: &BigInt) -> BigInt {
        let mut acc = BigInt::zero();
        let mut x = x.clone();
        let mut k = k;
        while k > self.set.stage() {
            if x <= BigInt::zero() {
                return acc;
            }
            let h = self.geometry.height(k - 1);
            let cut = self.geometry.cut(k - 1).expect("derived");
            let i = cut.offsets.partition_point(|o| o <= &x) - 1;
            acc += self.total(k - 1) * i;
            let local = &x - &cut.offsets[i];
            x = if &local > h { h.clone() } else { local };
            k -= 1;
        }
        acc + self.set.count_in(&BigInt::zero(), &x)
    }

    /// Levels in `[lo, hi)` of the stage-`k` tower, clipped to the tower.
    fn count_range(&self, k: usize, lo: &BigInt, hi: &BigInt) -> BigInt {
        let h = self.geometry.height(k);
        let zero = BigInt::zero();
        let lo = lo.clamp(&zero, h);
        let hi = hi.clamp(&zero, h);
        if lo >= hi {
            return BigInt::zero();
        }
        self.count_below(k, hi) - self.count_below(k, lo)
    }
}

/// Whether level `level` of the stage-`k` tower lies in `set` (`k ≥ set.stage()`).
pub fn level_in_set(geometry: &TowerGeometry, set: &CellSet, k: usize, level: &BigInt) -> bool {
    let mut level = level.clone();
    let mut k = k;
    if level.is_negative() || &level >= geometry.height(k) {
        return false;
    }
    while k > set.stage() {
        let h = geometry.height(k - 1);
        let cut = geometry.cut(k - 1).expect("derived");
        match cut.column_of(&level, h) {
            Some(i) => level -= &cut.offsets[i],
            None => return false,
        }
        k -= 1;
    }
    set.contains_level(&level)
}

/// Memoised shifted overlap counts between two implicit sets.
struct OverlapCounter<'a> {
    geometry: &'a TowerGeometry,
    a: ImplicitSet<'a>,
    b: ImplicitSet<'a>,
    base: usize,
    memo: HashMap<(usize, BigInt), BigInt>,
}

impl<'a> OverlapCounter<'a> {
    fn new(geometry: &'a TowerGeometry, a: &'a CellSet, b: &'a CellSet, top: usize) -> Self {
        OverlapCounter {
            geometry,
            a: ImplicitSet::new(geometry, a, top),
            b: ImplicitSet::new(geometry, b, top),
            base: a.stage().max(b.stage()),
            memo: HashMap::new(),
        }
    }

    /// `#{ℓ : ℓ ∈ A_k, ℓ − m ∈ B_k}` at stage `k ≥ base`.
    fn count(&mut self, k: usize, m: &BigInt) -> BigInt {
        let h = self.geometry.height(k);
        if m.magnitude() >= h.magnitude() {
            return BigInt::zero();
        }
        if k == self.base {
            return self.base_count(m);
        }
        if let Some(v) = self.memo.get(&(k, m.clone())) {
            return v.clone();
        }
        // A-copy in column i and B-copy in column i' overlap with inner shift
        // m' = m − o(i) + o(i'), which must satisfy |m'| < h_{k-1}.
        let below = self.geometry.height(k - 1).clone();
        let cut = self.geometry.cut(k - 1).expect("derived");
        let mut shifts: BTreeMap<BigInt, u64> = BTreeMap::new();
        for oi in &cut.offsets {
            let centre = oi - m;
            let lower = &centre - &below;
            let upper = &centre + &below;
            let start = cut.offsets.partition_point(|o| o <= &lower);
            for oj in cut.offsets[start..].iter().take_while(|o| *o < &upper) {
                *shifts.entry(m - oi + oj).or_default() += 1;
            }
        }
        let mut total = BigInt::zero();
        for (shift, mult) in shifts {
            total += self.count(k - 1, &shift) * mult;
        }
        self.memo.insert((k, m.clone()), total.clone());
        total
    }

    fn base_count(&self, m: &BigInt) -> BigInt {
        let k = self.base;
        if self.a.set.stage() == k {
            self.a
                .set
                .ranges()
                .iter()
                .map(|(lo, hi)| self.b.count_range(k, &(lo - m), &(hi - m)))
                .sum()
        } else {
            self.b
                .set
                .ranges()
                .iter()
                .map(|(lo, hi)| self.a.count_range(k, &(lo + m), &(hi + m)))
                .sum()
        }
    }

    /// Interval for `μ(A ∩ TⁿB)` at resolution `k`.
    fn interval(&mut self, k: usize, n: &BigInt) -> MeasureInterval {
        let h = self.geometry.height(k).clone();
        let resolved = self.count(k, n);
        let abs = n.abs();
        // Pairs (x ∈ A, T⁻ⁿx ∈ B) not resolved at this stage: x sits in the
        // bottom n levels (top |n| for n < 0) and T⁻ⁿx in the opposite band.
        let (a_band, b_band) = if n.is_negative() {
            (
                self.a.count_range(k, &(&h - &abs), &h),
                self.b.count_below(k, &abs),
            )
        } else {
            (
                self.a.count_below(k, &abs),
                self.b.count_range(k, &(&h - &abs), &h),
            )
        };
        let unresolved = a_band.min(b_band);
        let w = self.geometry.width(k);
        MeasureInterval {
            lo: w * Rational::from_integer(resolved.clone()),
            hi: w * Rational::from_integer(resolved + unresolved),
        }
    }
}

fn check_inputs(geometry: &TowerGeometry, a: &CellSet, b: &CellSet) -> Result<()> {
    geometry.check_stage(a.stage())?;
    geometry.check_stage(b.stage())
}

/// `μ(A ∩ TⁿB)` bounded at the fixed resolution stage `k`.
pub fn correlation_at(
    geometry: &TowerGeometry,
    a: &CellSet,
    b: &CellSet,
    n: &BigInt,
    k: usize,
) -> Result<MeasureInterval> {
    check_inputs(geometry, a, b)?;
    geometry.check_stage(k)?;
    if k < a.stage().max(b.stage()) {
        return Err(Error::InvalidArgument(format!(
            "resolution stage {k} below the sets' stage"
        )));
    }
    if n.magnitude() >= geometry.height(k).magnitude() {
        return Err(Error::InvalidArgument(format!(
            "|n| = {} not below h_{k} = {}",
            n.abs(),
            geometry.height(k)
        )));
    }
    let mut counter = OverlapCounter::new(geometry, a, b, k);
    Ok(counter.interval(k, n))
}

/// `μ(A ∩ TⁿB)` to within `tol`, deepening the resolution stage as needed.
///
/// The returned interval always contains the true value. An error is returned
/// when the derived geometry (or the depth cap) runs out first.
pub fn correlation(
    geometry: &TowerGeometry,
    a: &CellSet,
    b: &CellSet,
    n: &BigInt,
    tol: &Rational,
) -> Result<MeasureInterval> {
    check_inputs(geometry, a, b)?;
    if tol <= &Rational::zero() {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if a.is_empty() || b.is_empty() {
        return Ok(MeasureInterval::point(Rational::zero()));
    }
    let base = a.stage().max(b.stage());
    let cap = geometry.depth().min(DEFAULT_DEPTH_CAP);
    let start = match geometry.first_stage_above(n) {
        Some(j) => j.max(base),
        None => {
            return Err(depth_error(geometry, format!("no derived tower is taller than |n| = {}", n.abs())))
        }
    };
    let mut counter = OverlapCounter::new(geometry, a, b, cap);
    let mut last = None;
    for k in start..=cap {
        let interval = counter.interval(k, n);
        if &interval.width() <= tol {
            return Ok(interval);
        }
        last = Some(interval);
    }
    let width = last.map(|i| rational::format(&i.width())).unwrap_or_default();
    Err(depth_error(
        geometry,
        format!("width {width} still above tolerance {} at stage {cap}", rational::format(tol)),
    ))
}

fn depth_error(geometry: &TowerGeometry, reason: String) -> Error {
    if geometry.depth() >= DEFAULT_DEPTH_CAP {
        Error::DepthCap {
            cap: DEFAULT_DEPTH_CAP,
            reason,
        }
    } else {
        Error::ExtensionRequired {
            requested: geometry.depth() + 1,
            available: geometry.depth(),
        }
    }
}

/// Result of pushing a set forward by `Tⁿ` at a fixed stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Translated {
    /// Exact image of the mass that stays inside the tower.
    pub resolved: CellSet,
    /// Mass whose image leaves the top (n > 0) or bottom (n < 0).
    pub unresolved: Rational,
}

/// `TⁿA` at stage `max_stage`, with the escaping mass reported separately.
pub fn translate(
    geometry: &TowerGeometry,
    cells: &CellSet,
    n: &BigInt,
    max_stage: usize,
) -> Result<Translated> {
    let refined = cells.refine(geometry, max_stage)?;
    let h = geometry.height(max_stage);
    if n.magnitude() >= h.magnitude() {
        return Err(Error::InvalidArgument(format!(
            "|n| = {} not below h_{max_stage} = {h}",
            n.abs()
        )));
    }
    let mut kept = Vec::new();
    let mut lost = BigInt::zero();
    for (lo, hi) in refined.ranges() {
        let (lo, hi) = (lo + n, hi + n);
        let clo = lo.clone().clamp(BigInt::zero(), h.clone());
        let chi = hi.clone().clamp(BigInt::zero(), h.clone());
        lost += (&hi - &lo) - (&chi - &clo).max(BigInt::zero());
        if clo < chi {
            kept.push((clo, chi));
        }
    }
    let resolved = CellSet::new(geometry, max_stage, kept)?;
    Ok(Translated {
        resolved,
        unresolved: geometry.width(max_stage) * Rational::from_integer(lost),
    })
}
