use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::geometry::TowerGeometry;
use crate::error::{Error, Result};
use crate::rational::Rational;

/// A finite union of levels of the stage-`j` tower, kept as sorted, disjoint,
/// non-adjacent half-open ranges `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CellSet {
    stage: usize,
    ranges: Vec<(BigInt, BigInt)>,
}

/// Merges arbitrary ranges into canonical form, dropping empty ones.
fn canonicalize(mut ranges: Vec<(BigInt, BigInt)>) -> Vec<(BigInt, BigInt)> {
    ranges.retain(|(lo, hi)| lo < hi);
    ranges.sort();
    let mut out: Vec<(BigInt, BigInt)> = Vec::with_capacity(ranges.len());
    for (lo, hi) in ranges {
        match out.last_mut() {
            Some((_, last_hi)) if lo <= *last_hi => {
                if hi > *last_hi {
                    *last_hi = hi;
                }
            }
            _ => out.push((lo, hi)),
        }
    }
    out
}

impl CellSet {
    pub fn new(
        geometry: &TowerGeometry,
        stage: usize,
        ranges: impl IntoIterator<Item = (BigInt, BigInt)>,
    ) -> Result<Self> {
        geometry.check_stage(stage)?;
        let h = geometry.height(stage);
        let ranges: Vec<_> = ranges.into_iter().collect();
        for (lo, hi) in &ranges {
            if lo.is_negative() || hi > h || lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "range [{lo}, {hi}) outside stage-{stage} tower of height {h}"
                )));
            }
        }
        Ok(CellSet {
            stage,
            ranges: canonicalize(ranges),
        })
    }

    /// Convenience constructor from `u64` range endpoints.
    pub fn from_ranges(geometry: &TowerGeometry, stage: usize, ranges: &[(u64, u64)]) -> Result<Self> {
        Self::new(
            geometry,
            stage,
            ranges.iter().map(|&(a, b)| (BigInt::from(a), BigInt::from(b))),
        )
    }

    pub fn from_levels(geometry: &TowerGeometry, stage: usize, levels: &[u64]) -> Result<Self> {
        Self::new(
            geometry,
            stage,
            levels.iter().map(|&l| (BigInt::from(l), BigInt::from(l + 1))),
        )
    }

    pub fn full(geometry: &TowerGeometry, stage: usize) -> Result<Self> {
        geometry.check_stage(stage)?;
        Self::new(geometry, stage, [(BigInt::zero(), geometry.height(stage).clone())])
    }

    pub fn empty(stage: usize) -> Self {
        CellSet {
            stage,
            ranges: Vec::new(),
        }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn ranges(&self) -> &[(BigInt, BigInt)] {
        &self.ranges
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Number of levels.
    pub fn count(&self) -> BigInt {
        self.ranges.iter().map(|(lo, hi)| hi - lo).sum()
    }

    pub fn measure(&self, geometry: &TowerGeometry) -> Rational {
        geometry.width(self.stage) * Rational::from_integer(self.count())
    }

    pub fn contains_level(&self, level: &BigInt) -> bool {
        let i = self.ranges.partition_point(|(lo, _)| lo <= level);
        i > 0 && level < &self.ranges[i - 1].1
    }

    /// Levels in `[lo, hi)` that belong to the set.
    pub fn count_in(&self, lo: &BigInt, hi: &BigInt) -> BigInt {
        let mut total = BigInt::zero();
        for (a, b) in &self.ranges {
            let start = if a > lo { a } else { lo };
            let end = if b < hi { b } else { hi };
            if start < end {
                total += end - start;
            }
        }
        total
    }

    fn same_stage(&self, other: &CellSet) -> Result<()> {
        if self.stage != other.stage {
            return Err(Error::InvalidArgument(format!(
                "sets live at stages {} and {}; refine first",
                self.stage, other.stage
            )));
        }
        Ok(())
    }

    pub fn intersect(&self, other: &CellSet) -> Result<CellSet> {
        self.same_stage(other)?;
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.ranges.len() && j < other.ranges.len() {
            let (a0, a1) = &self.ranges[i];
            let (b0, b1) = &other.ranges[j];
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if lo < hi {
                out.push((lo.clone(), hi.clone()));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Ok(CellSet {
            stage: self.stage,
            ranges: canonicalize(out),
        })
    }

    pub fn union(&self, other: &CellSet) -> Result<CellSet> {
        self.same_stage(other)?;
        let all = self.ranges.iter().chain(&other.ranges).cloned().collect();
        Ok(CellSet {
            stage: self.stage,
            ranges: canonicalize(all),
        })
    }

    /// Re-expresses the set at stage `target ≥ stage`. Level `k` of stage `j`
    /// becomes levels `o_j(i) + k` at stage `j + 1`, iterated.
    pub fn refine(&self, geometry: &TowerGeometry, target: usize) -> Result<CellSet> {
        geometry.check_stage(target)?;
        if target < self.stage {
            return Err(Error::InvalidArgument(format!(
                "cannot refine stage {} down to {target}",
                self.stage
            )));
        }
        let mut ranges = self.ranges.clone();
        for j in self.stage..target {
            let cut = geometry.cut(j).expect("stage below target has a cut");
            let mut next = Vec::with_capacity(ranges.len() * cut.cuts());
            for o in &cut.offsets {
                for (lo, hi) in &ranges {
                    next.push((o + lo, o + hi));
                }
            }
            ranges = canonicalize(next);
        }
        Ok(CellSet {
            stage: target,
            ranges,
        })
    }

    /// Complement within the stage tower.
    pub fn complement(&self, geometry: &TowerGeometry) -> CellSet {
        let mut out = Vec::new();
        let mut cursor = BigInt::zero();
        for (lo, hi) in &self.ranges {
            if &cursor < lo {
                out.push((cursor.clone(), lo.clone()));
            }
            cursor = hi.clone();
        }
        let h = geometry.height(self.stage);
        if &cursor < h {
            out.push((cursor, h.clone()));
        }
        CellSet {
            stage: self.stage,
            ranges: out,
        }
    }
}

/// `X_j` expressed at stage `target ≥ j`.
pub fn x_region(geometry: &TowerGeometry, j: usize, target: usize) -> Result<CellSet> {
    CellSet::full(geometry, j)?.refine(geometry, target)
}

/// Serialized form: `{"stage": j, "ranges": [[lo, hi], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSetSpec {
    pub stage: usize,
    pub ranges: Vec<(u64, u64)>,
}

impl CellSetSpec {
    pub fn build(&self, geometry: &TowerGeometry) -> Result<CellSet> {
        CellSet::from_ranges(geometry, self.stage, &self.ranges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use crate::tower::{derive_geometry, RankOneSchedule, StageParams};
    use proptest::prelude::*;

    fn toy() -> TowerGeometry {
        let s = RankOneSchedule::new(
            2,
            int(1),
            vec![
                StageParams::custom(vec![0, 1, 2]),
                StageParams::custom(vec![1, 0]),
                StageParams::custom(vec![0, 2, 0]),
            ],
        )
        .unwrap();
        derive_geometry(&s, 4).unwrap()
    }

    #[test]
    fn canonical_form_merges() {
        let g = toy();
        let s = CellSet::from_ranges(&g, 2, &[(3, 5), (0, 1), (1, 2), (4, 6), (7, 7)]).unwrap();
        assert_eq!(
            s.ranges(),
            &[(0.into(), 2.into()), (3.into(), 6.into())]
        );
        assert!(CellSet::from_ranges(&g, 1, &[(0, 3)]).is_err());
    }

    #[test]
    fn full_tower_refined_leaves_spacers() {
        let g = toy();
        let x2 = x_region(&g, 1, 2).unwrap();
        let spacers = CellSet::new(&g, 2, g.spacer_ranges(1)).unwrap();
        assert_eq!(x2.complement(&g), spacers);
        assert_eq!(x2.measure(&g), g.measure(1));
    }

    #[test]
    fn single_level_two_columns() {
        let s = RankOneSchedule::new(3, int(1), vec![StageParams::custom(vec![0, 0])]).unwrap();
        let g = derive_geometry(&s, 2).unwrap();
        let a = CellSet::from_levels(&g, 1, &[1]).unwrap();
        let r = a.refine(&g, 2).unwrap();
        assert_eq!(r, CellSet::from_levels(&g, 2, &[1, 4]).unwrap());
        assert_eq!(r.measure(&g), ratio(1, 1));
    }

    #[test]
    fn x_region_identity_and_measure() {
        let g = toy();
        assert_eq!(x_region(&g, 2, 2).unwrap(), CellSet::full(&g, 2).unwrap());
        for j in 1..=4 {
            for k in j..=4 {
                assert_eq!(x_region(&g, j, k).unwrap().measure(&g), g.measure(j));
            }
        }
    }

    #[test]
    fn set_algebra() {
        let g = toy();
        let a = CellSet::from_ranges(&g, 2, &[(0, 4)]).unwrap();
        let b = CellSet::from_ranges(&g, 2, &[(2, 6), (7, 8)]).unwrap();
        assert_eq!(a.intersect(&b).unwrap(), CellSet::from_ranges(&g, 2, &[(2, 4)]).unwrap());
        assert_eq!(a.union(&b).unwrap(), CellSet::from_ranges(&g, 2, &[(0, 6), (7, 8)]).unwrap());
        assert!(b.contains_level(&7.into()) && !b.contains_level(&6.into()));
        assert_eq!(b.count_in(&3.into(), &8.into()), BigInt::from(4));
        let c = CellSet::from_ranges(&g, 1, &[(0, 1)]).unwrap();
        assert!(a.intersect(&c).is_err());
    }

    proptest! {
        #[test]
        fn refine_preserves_measure(levels in proptest::collection::btree_set(0u64..9, 0..9), target in 2usize..=4) {
            let g = toy();
            let levels: Vec<u64> = levels.into_iter().collect();
            let a = CellSet::from_levels(&g, 2, &levels).unwrap();
            let r = a.refine(&g, target).unwrap();
            prop_assert_eq!(r.measure(&g), a.measure(&g));
        }
    }
}
