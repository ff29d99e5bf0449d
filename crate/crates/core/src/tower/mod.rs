//! Rank-one towers: schedules, derived geometry, level sets and correlations.

mod cells;
mod correlation;
mod geometry;
mod schedule;

pub use cells::{x_region, CellSet, CellSetSpec};
pub use correlation::{
    correlation, correlation_at, default_tolerance, level_in_set, translate, MeasureInterval,
    Translated,
};
pub use geometry::{derive_geometry, StageCut, TowerGeometry, DEFAULT_DEPTH_CAP};
pub use schedule::{
    generated_schedule, GeneratorSpec, GeneratorOptions, RankOneSchedule, ScheduleFile, ScheduleSpec,
    StageFile, StageKind, StageParams,
};
