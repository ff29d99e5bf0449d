use num_bigint::BigInt;
use num_traits::Zero;

use super::schedule::{RankOneSchedule, StageKind};
use crate::error::{Error, Result};
use crate::rational::Rational;

/// Stages beyond this many are refused.
pub const DEFAULT_DEPTH_CAP: usize = 64;

/// How tower `j` is cut and stacked into tower `j + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageCut {
    pub kind: StageKind,
    pub spacers: Vec<BigInt>,
    /// Bottom level of each column inside tower `j + 1`.
    pub offsets: Vec<BigInt>,
}

impl StageCut {
    pub fn cuts(&self) -> usize {
        self.offsets.len()
    }

    /// Index of the column whose block `[o, o + h)` contains `level`, if any.
    pub fn column_of(&self, level: &BigInt, height: &BigInt) -> Option<usize> {
        let i = self.offsets.partition_point(|o| o <= level);
        if i == 0 {
            return None;
        }
        let i = i - 1;
        (level < &(&self.offsets[i] + height)).then_some(i)
    }
}

#[derive(Clone, Debug)]
struct Tower {
    height: BigInt,
    width: Rational,
    cut: Option<StageCut>,
}

/// Heights, widths and column offsets of towers `1..=depth`.
///
/// Stage numbers are 1-based throughout.
#[derive(Clone, Debug)]
pub struct TowerGeometry {
    towers: Vec<Tower>,
}

/// Derives towers `1..=up_to`, consuming `up_to - 1` schedule stages.
pub fn derive_geometry(schedule: &RankOneSchedule, up_to: usize) -> Result<TowerGeometry> {
    schedule.validate()?;
    if up_to == 0 {
        return Err(Error::InvalidArgument("stages are numbered from 1".into()));
    }
    if up_to > DEFAULT_DEPTH_CAP {
        return Err(Error::DepthCap {
            cap: DEFAULT_DEPTH_CAP,
            reason: format!("geometry up to stage {up_to} requested"),
        });
    }
    if up_to > schedule.stages.len() + 1 {
        return Err(Error::ExtensionRequired {
            requested: up_to,
            available: schedule.stages.len() + 1,
        });
    }
    let mut towers: Vec<Tower> = vec![Tower {
        height: schedule.initial_height.clone(),
        width: schedule.initial_width.clone(),
        cut: None,
    }];
    for stage in &schedule.stages[..up_to - 1] {
        let last = towers.last_mut().expect("non-empty");
        let spacers = stage.resolved_spacers(&last.height);
        let mut offsets = Vec::with_capacity(stage.cuts);
        let mut next = BigInt::zero();
        for s in &spacers {
            offsets.push(next.clone());
            next += &last.height + s;
        }
        let width = &last.width / Rational::from_integer(stage.cuts.into());
        last.cut = Some(StageCut {
            kind: stage.kind,
            spacers,
            offsets,
        });
        towers.push(Tower {
            height: next,
            width,
            cut: None,
        });
    }
    Ok(TowerGeometry { towers })
}

impl TowerGeometry {
    /// Number of derived towers.
    pub fn depth(&self) -> usize {
        self.towers.len()
    }

    fn tower(&self, j: usize) -> &Tower {
        assert!(
            j >= 1 && j <= self.towers.len(),
            "stage {j} outside derived range 1..={}",
            self.towers.len()
        );
        &self.towers[j - 1]
    }

    pub fn check_stage(&self, j: usize) -> Result<()> {
        if j == 0 {
            return Err(Error::InvalidArgument("stages are numbered from 1".into()));
        }
        if j > self.depth() {
            return Err(Error::ExtensionRequired {
                requested: j,
                available: self.depth(),
            });
        }
        Ok(())
    }

    pub fn height(&self, j: usize) -> &BigInt {
        &self.tower(j).height
    }

    pub fn width(&self, j: usize) -> &Rational {
        &self.tower(j).width
    }

    /// `μ(X_j) = h_j · w_j`.
    pub fn measure(&self, j: usize) -> Rational {
        self.width(j) * Rational::from_integer(self.height(j).clone())
    }

    /// The cut taking tower `j` to tower `j + 1`; `None` for the last tower.
    pub fn cut(&self, j: usize) -> Option<&StageCut> {
        self.tower(j).cut.as_ref()
    }

    pub fn kind(&self, j: usize) -> Option<StageKind> {
        self.cut(j).map(|c| c.kind)
    }

    pub fn cuts(&self, j: usize) -> Option<usize> {
        self.cut(j).map(StageCut::cuts)
    }

    /// Half-open spacer level ranges added on top of each column of stage `j`,
    /// expressed at stage `j + 1`.
    pub fn spacer_ranges(&self, j: usize) -> Vec<(BigInt, BigInt)> {
        let Some(cut) = self.cut(j) else {
            return Vec::new();
        };
        let h = self.height(j);
        cut.offsets
            .iter()
            .zip(&cut.spacers)
            .filter(|(_, s)| !s.is_zero())
            .map(|(o, s)| (o + h, o + h + s))
            .collect()
    }

    /// First stage whose tower is taller than `|n|`.
    pub fn first_stage_above(&self, n: &BigInt) -> Option<usize> {
        let n = n.magnitude();
        (1..=self.depth()).find(|&j| self.height(j).magnitude() > n)
    }
}
