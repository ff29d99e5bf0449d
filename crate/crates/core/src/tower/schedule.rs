use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::geometry::DEFAULT_DEPTH_CAP;
use crate::error::{Error, Result};
use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StageKind {
    /// Zero spacers except possibly the last column (coprimality tuning).
    RigidJ,
    /// `cuts = 2k`: no spacers on the first `k` columns, `h_j` spacers on the
    /// remaining `k`. The `h_j` values are filled in during derivation.
    #[serde(rename = "HALF_JPRIME")]
    HalfJPrime,
    Custom,
}

/// One cutting-and-stacking step: cut the tower into `cuts` columns and put
/// `spacers[i]` new levels on top of column `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageParams {
    pub cuts: usize,
    pub spacers: Vec<BigInt>,
    pub kind: StageKind,
}

impl StageParams {
    pub fn custom(spacers: Vec<u64>) -> Self {
        StageParams {
            cuts: spacers.len(),
            spacers: spacers.into_iter().map(BigInt::from).collect(),
            kind: StageKind::Custom,
        }
    }

    pub fn rigid(cuts: usize, last_spacer: u64) -> Self {
        let mut spacers = vec![BigInt::zero(); cuts];
        if let Some(last) = spacers.last_mut() {
            *last = BigInt::from(last_spacer);
        }
        StageParams {
            cuts,
            spacers,
            kind: StageKind::RigidJ,
        }
    }

    /// Half-spacer stage; the upper-half spacer counts are placeholders.
    pub fn half(cuts: usize) -> Self {
        StageParams {
            cuts,
            spacers: vec![BigInt::zero(); cuts],
            kind: StageKind::HalfJPrime,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cuts == 0 {
            return Err(Error::InvalidSchedule("cuts must be positive".into()));
        }
        if self.spacers.len() != self.cuts {
            return Err(Error::InvalidSchedule(format!(
                "{} spacer entries for {} cuts",
                self.spacers.len(),
                self.cuts
            )));
        }
        if self.spacers.iter().any(|s| s < &BigInt::zero()) {
            return Err(Error::InvalidSchedule("negative spacer count".into()));
        }
        match self.kind {
            StageKind::RigidJ => {
                if self.spacers[..self.cuts - 1].iter().any(|s| !s.is_zero()) {
                    return Err(Error::InvalidSchedule(
                        "RIGID_J stage may only carry a spacer on its last column".into(),
                    ));
                }
            }
            StageKind::HalfJPrime => {
                if !self.cuts.is_multiple_of(2) {
                    return Err(Error::InvalidSchedule(
                        "HALF_JPRIME stage needs an even number of cuts".into(),
                    ));
                }
            }
            StageKind::Custom => {}
        }
        Ok(())
    }

    /// Concrete spacer vector once the incoming tower height is known.
    pub fn resolved_spacers(&self, height: &BigInt) -> Vec<BigInt> {
        match self.kind {
            StageKind::HalfJPrime => {
                let half = self.cuts / 2;
                (0..self.cuts)
                    .map(|i| if i < half { BigInt::zero() } else { height.clone() })
                    .collect()
            }
            _ => self.spacers.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankOneSchedule {
    pub initial_height: BigInt,
    pub initial_width: Rational,
    pub stages: Vec<StageParams>,
}

impl RankOneSchedule {
    pub fn new(
        initial_height: impl Into<BigInt>,
        initial_width: Rational,
        stages: Vec<StageParams>,
    ) -> Result<Self> {
        let schedule = RankOneSchedule {
            initial_height: initial_height.into(),
            initial_width,
            stages,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_height < BigInt::one() {
            return Err(Error::InvalidSchedule("initial_height must be ≥ 1".into()));
        }
        if self.initial_width <= Rational::zero() {
            return Err(Error::InvalidSchedule("initial_width must be > 0".into()));
        }
        self.stages.iter().try_for_each(StageParams::validate)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ScheduleSpec = serde_json::from_str(text)?;
        spec.build()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ScheduleFile {
            initial_height: self.initial_height.clone(),
            initial_width: self.initial_width.clone(),
            stages: self
                .stages
                .iter()
                .map(|s| StageFile {
                    cuts: s.cuts,
                    spacers: Some(s.spacers.clone()),
                    kind: s.kind,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

/// Options for the rigid/half-spacer construction.
#[derive(Clone, Debug)]
pub struct GeneratorOptions {
    pub initial_height: BigInt,
    pub initial_width: Rational,
    /// Cut count of the first RIGID_J stage; doubles on every later one.
    pub first_rigid_cuts: usize,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions {
            initial_height: BigInt::one(),
            initial_width: rational::int(1),
            first_rigid_cuts: 4,
        }
    }
}

/// Doubling RIGID_J cut counts stop being storable well before the depth cap.
pub const MAX_GENERATED_CUTS: usize = 1 << 24;

/// Builds `depth` stages. Stage `j` (1-based) is RIGID_J when `is_rigid(j)`,
/// otherwise HALF_JPRIME with `2j` cuts.
///
/// On RIGID_J stages the last-column spacer is the smallest `s < Πprimes`
/// making the next height coprime to `Πprimes`.
pub fn generated_schedule(
    is_rigid: impl Fn(usize) -> bool,
    primes: &[u64],
    depth: usize,
    options: &GeneratorOptions,
) -> Result<RankOneSchedule> {
    if depth >= 2 {
        let rigid = (1..=depth).filter(|&j| is_rigid(j)).count();
        if rigid == 0 || rigid == depth {
            return Err(Error::InvalidSchedule(
                "stage rule must produce both RIGID_J and HALF_JPRIME stages".into(),
            ));
        }
    }
    if depth >= DEFAULT_DEPTH_CAP {
        return Err(Error::DepthCap {
            cap: DEFAULT_DEPTH_CAP,
            reason: format!("generator depth {depth} would derive more towers than the cap"),
        });
    }
    let modulus: BigInt = primes.iter().map(|&p| BigInt::from(p)).product();
    let mut height = options.initial_height.clone();
    let mut rigid_cuts = options.first_rigid_cuts;
    let mut stages = Vec::with_capacity(depth);
    for j in 1..=depth {
        let stage = if is_rigid(j) {
            let cuts = rigid_cuts;
            if cuts > MAX_GENERATED_CUTS {
                return Err(Error::DepthCap {
                    cap: j - 1,
                    reason: format!("stage {j} would need {cuts} columns"),
                });
            }
            rigid_cuts *= 2;
            let base = &height * cuts;
            let mut last = 0u64;
            if !primes.is_empty() {
                while !(&base + last).gcd(&modulus).is_one() {
                    last += 1;
                }
            }
            StageParams::rigid(cuts, last)
        } else {
            StageParams::half(2 * j)
        };
        let spacers = stage.resolved_spacers(&height);
        height = &height * stage.cuts + spacers.iter().sum::<BigInt>();
        stages.push(stage);
    }
    RankOneSchedule::new(
        options.initial_height.clone(),
        options.initial_width.clone(),
        stages,
    )
}

/// On-disk form of one stage.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageFile {
    pub cuts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "rational::serde_bigint_vec_opt")]
    pub spacers: Option<Vec<BigInt>>,
    pub kind: StageKind,
}

/// On-disk form of an explicit schedule.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    #[serde(with = "rational::serde_bigint")]
    pub initial_height: BigInt,
    #[serde(with = "rational::serde_pq")]
    pub initial_width: Rational,
    pub stages: Vec<StageFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub generator: String,
    #[serde(default)]
    pub primes: Vec<u64>,
    #[serde(default = "default_rule")]
    pub j_stage_rule: String,
    pub depth: usize,
    #[serde(default)]
    pub initial_height: Option<u64>,
    #[serde(default, with = "rational::serde_pq_opt")]
    pub initial_width: Option<Rational>,
    #[serde(default)]
    pub first_rigid_cuts: Option<usize>,
}

fn default_rule() -> String {
    "alternate".into()
}

/// Either an explicit stage list or a generator description.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    Generator(GeneratorSpec),
    Explicit(ScheduleFile),
}

impl ScheduleSpec {
    pub fn build(self) -> Result<RankOneSchedule> {
        match self {
            ScheduleSpec::Explicit(file) => {
                let stages = file
                    .stages
                    .into_iter()
                    .map(|s| {
                        let spacers = match (s.spacers, s.kind) {
                            (Some(v), _) => v,
                            (None, StageKind::HalfJPrime) => vec![BigInt::zero(); s.cuts],
                            (None, _) => {
                                return Err(Error::InvalidSchedule(
                                    "spacers required unless kind is HALF_JPRIME".into(),
                                ))
                            }
                        };
                        Ok(StageParams {
                            cuts: s.cuts,
                            spacers,
                            kind: s.kind,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                RankOneSchedule::new(file.initial_height, file.initial_width, stages)
            }
            ScheduleSpec::Generator(g) => g.build(),
        }
    }
}

impl GeneratorSpec {
    pub fn standard(primes: Vec<u64>, depth: usize) -> Self {
        GeneratorSpec {
            generator: "paper".into(),
            primes,
            j_stage_rule: default_rule(),
            depth,
            initial_height: None,
            initial_width: None,
            first_rigid_cuts: None,
        }
    }

    pub fn build(&self) -> Result<RankOneSchedule> {
        if self.generator != "paper" {
            return Err(Error::InvalidSchedule(format!(
                "unknown generator {:?}",
                self.generator
            )));
        }
        let rule: fn(usize) -> bool = match self.j_stage_rule.as_str() {
            // Odd stages rigid, even stages half-spacer.
            "alternate" => |j| j % 2 == 1,
            other => {
                return Err(Error::InvalidSchedule(format!(
                    "unknown j_stage_rule {other:?}"
                )))
            }
        };
        let mut options = GeneratorOptions::default();
        if let Some(h) = self.initial_height {
            options.initial_height = BigInt::from(h);
        }
        if let Some(w) = &self.initial_width {
            options.initial_width = w.clone();
        }
        if let Some(c) = self.first_rigid_cuts {
            options.first_rigid_cuts = c;
        }
        generated_schedule(rule, &self.primes, self.depth, &options)
    }
}
