use std::io::Write;

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use super::point::{Point, Simulator};
use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::tower::{correlation, CellSet, MeasureInterval, TowerGeometry};

/// Finite configuration of points sampled in the window `X_K`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Configuration {
    pub window: usize,
    pub points: Vec<Point>,
}

/// Per-sample counts `x = #(ω ∩ T⁻ⁿA)` and `y = #(ω ∩ B)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SampleCounts {
    pub x: u32,
    pub y: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub samples: u64,
    pub window: usize,
    pub empirical: f64,
    /// Exact target; for rigidity runs the upper end of `target_interval`.
    #[serde(with = "rational::serde_pq")]
    pub target: Rational,
    pub target_interval: MeasureInterval,
    pub stderr: f64,
    /// `(empirical − target)/stderr`; zero when both the spread and the
    /// difference vanish, infinite when only the spread does.
    pub z: f64,
    /// Certified bound on the `T⁻ⁿA` mass outside the window.
    #[serde(with = "rational::serde_pq")]
    pub escaping: Rational,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct ExperimentOptions {
    pub samples: u64,
    pub seed: u64,
    /// Largest tolerated escaping mass.
    pub tol: Rational,
}

fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Configuration number `index` of the stream determined by `seed`.
pub fn sample_indexed(sim: &Simulator<'_>, seed: u64, index: u64) -> Result<Configuration> {
    let g = sim.geometry();
    let k = sim.window();
    let height: u64 = g.height(k).try_into().map_err(|_| Error::Precision {
        bits: 64,
        reason: format!("h_{k} = {} does not fit a 64-bit level draw", g.height(k)),
    })?;
    let mean = rational::to_f64(&g.measure(k));
    let poisson = Poisson::new(mean).map_err(|e| Error::InvalidArgument(format!("intensity {mean}: {e}")))?;
    let mut rng = rng_for(seed, index);
    let count = poisson.sample(&mut rng) as u64;
    let limbs = sim.bits().div_ceil(64) as usize;
    let spare = limbs as u32 * 64 - sim.bits();
    let points = (0..count)
        .map(|_| {
            let level = rng.random_range(0..height);
            let words: Vec<u64> = (0..limbs).map(|_| rng.next_u64()).collect();
            let mut digits = Vec::with_capacity(limbs * 2);
            for w in words {
                digits.push(w as u32);
                digits.push((w >> 32) as u32);
            }
            Point {
                stage: k,
                level: BigInt::from(level),
                offset: BigUint::new(digits) >> spare,
            }
        })
        .collect();
    Ok(Configuration { window: k, points })
}

pub fn sample_configuration(sim: &Simulator<'_>, seed: u64) -> Result<Configuration> {
    sample_indexed(sim, seed, 0)
}

/// Upper bound on `μ(T⁻ⁿA \ X_K) = μ(A) − μ(A ∩ TⁿX_K)`.
pub fn escaping_mass(geometry: &TowerGeometry, a: &CellSet, window: usize, n: &BigInt, tol: &Rational) -> Result<Rational> {
    let full = CellSet::full(geometry, window)?;
    let tol = tol / rational::int(4);
    let inside = correlation(geometry, a, &full, n, &tol)?;
    Ok(a.measure(geometry) - inside.lo)
}

/// Smallest window stage from `from` on whose escaping mass is within `tol`
/// for every `(A, n)` query, leaving one derived stage of headroom.
pub fn required_window(
    geometry: &TowerGeometry,
    queries: &[(&CellSet, BigInt)],
    tol: &Rational,
    from: usize,
) -> Option<usize> {
    (from..geometry.depth()).find(|&k| {
        queries.iter().all(|(a, n)| {
            a.stage() <= k && escaping_mass(geometry, a, k, n, tol).is_ok_and(|e| &e <= tol)
        })
    })
}

/// Like [`required_window`] but starting at the highest set stage.
pub fn select_window(geometry: &TowerGeometry, queries: &[(&CellSet, BigInt)], tol: &Rational) -> Result<usize> {
    let from = queries.iter().map(|(a, _)| a.stage()).max().unwrap_or(1);
    required_window(geometry, queries, tol, from).ok_or_else(|| Error::ExtensionRequired {
        requested: geometry.depth() + 1,
        available: geometry.depth(),
    })
}

fn check_window(sim: &Simulator<'_>, a: &CellSet, n: &BigInt, tol: &Rational) -> Result<Rational> {
    let g = sim.geometry();
    let k = sim.window();
    if a.stage() > k {
        return Err(Error::InvalidArgument(format!(
            "set of stage {} lies above window stage {k}",
            a.stage()
        )));
    }
    let escaping = escaping_mass(g, a, k, n, tol)?;
    if &escaping > tol {
        let required = required_window(g, &[(a, n.clone())], tol, k + 1).unwrap_or(g.depth());
        return Err(Error::WindowTooSmall {
            window: k,
            escaping: rational::format(&escaping),
            required,
        });
    }
    Ok(escaping)
}

fn collect_counts(sim: &Simulator<'_>, a: &CellSet, b: &CellSet, n: &BigInt, opts: &ExperimentOptions) -> Result<Vec<SampleCounts>> {
    (0..opts.samples)
        .into_par_iter()
        .map(|i| {
            let config = sample_indexed(sim, opts.seed, i)?;
            let mut counts = SampleCounts { x: 0, y: 0 };
            for p in &config.points {
                if sim.contains(a, &sim.apply_t(p, n)?)? {
                    counts.x += 1;
                }
                if sim.contains(b, p)? {
                    counts.y += 1;
                }
            }
            Ok(counts)
        })
        .collect()
}

fn z_score(empirical: f64, target: f64, stderr: f64) -> f64 {
    let diff = empirical - target;
    if stderr > 0.0 {
        diff / stderr
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

fn mean_and_stderr(values: impl Iterator<Item = f64>, m: f64) -> (f64, f64) {
    let values: Vec<f64> = values.collect();
    let mean = values.iter().sum::<f64>() / m;
    let var = if m > 1.0 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    (mean, (var / m).sqrt())
}

fn check_samples(opts: &ExperimentOptions) -> Result<f64> {
    if opts.samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    if opts.tol <= Rational::zero() {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    Ok(opts.samples as f64)
}

/// `Cov(N(A)∘P(T)ⁿ, N(B))` against the midpoint of `μ(T⁻ⁿA ∩ B)`.
pub fn covariance_experiment(
    sim: &Simulator<'_>,
    a: &CellSet,
    b: &CellSet,
    n: &BigInt,
    opts: &ExperimentOptions,
) -> Result<(ExperimentResult, Vec<SampleCounts>)> {
    let m = check_samples(opts)?;
    let escaping = check_window(sim, a, n, &opts.tol)?;
    if b.stage() > sim.window() {
        return Err(Error::InvalidArgument("B lies above the window stage".into()));
    }
    let g = sim.geometry();
    let interval = correlation(g, a, b, n, &(&opts.tol / rational::int(4)))?;
    let target = interval.mid();
    let counts = collect_counts(sim, a, b, n, opts)?;
    let (sx, sy, sxy) = counts.iter().fold((0i128, 0i128, 0i128), |(sx, sy, sxy), c| {
        let (x, y) = (c.x as i128, c.y as i128);
        (sx + x, sy + y, sxy + x * y)
    });
    let mi = opts.samples as i128;
    let empirical = (mi * sxy - sx * sy) as f64 / (m * (m - 1.0));
    let (mx, my) = (sx as f64 / m, sy as f64 / m);
    let (_, stderr) = mean_and_stderr(counts.iter().map(|c| (c.x as f64 - mx) * (c.y as f64 - my)), m);
    let z = z_score(empirical, rational::to_f64(&target), stderr);
    Ok((
        ExperimentResult {
            samples: opts.samples,
            window: sim.window(),
            empirical,
            target,
            target_interval: interval,
            stderr,
            z,
            escaping,
            pass: z.abs() <= 4.0,
        },
        counts,
    ))
}

/// `E|N(A)∘P(T)ⁿ − N(A)|` against the upper end of `μ(A Δ TⁿA)`.
pub fn suspension_rigidity_experiment(
    sim: &Simulator<'_>,
    a: &CellSet,
    n: &BigInt,
    opts: &ExperimentOptions,
) -> Result<(ExperimentResult, Vec<SampleCounts>)> {
    let m = check_samples(opts)?;
    let escaping = check_window(sim, a, n, &opts.tol)?;
    let g = sim.geometry();
    let mu = a.measure(g);
    let overlap = correlation(g, a, a, n, &(&opts.tol / rational::int(4)))?;
    let two = rational::int(2);
    let interval = MeasureInterval::new(&two * (&mu - &overlap.hi), &two * (&mu - &overlap.lo))?;
    let target = interval.hi.clone();
    let counts = collect_counts(sim, a, a, n, opts)?;
    let (empirical, stderr) = mean_and_stderr(counts.iter().map(|c| c.x.abs_diff(c.y) as f64), m);
    let target_f = rational::to_f64(&target);
    Ok((
        ExperimentResult {
            samples: opts.samples,
            window: sim.window(),
            empirical,
            target,
            target_interval: interval,
            stderr,
            z: z_score(empirical, target_f, stderr),
            escaping,
            pass: empirical <= target_f + 4.0 * stderr,
        },
        counts,
    ))
}

/// Sample mean and variance of `N(A)`, both against `μ(A)`.
pub fn intensity_experiment(sim: &Simulator<'_>, a: &CellSet, opts: &ExperimentOptions) -> Result<[ExperimentResult; 2]> {
    let m = check_samples(opts)?;
    if a.stage() > sim.window() {
        return Err(Error::InvalidArgument("set lies above the window stage".into()));
    }
    let mu = a.measure(sim.geometry());
    let mu_f = rational::to_f64(&mu);
    let counts = collect_counts(sim, a, a, &BigInt::zero(), opts)?;
    let (mean, mean_err) = mean_and_stderr(counts.iter().map(|c| c.y as f64), m);
    let (_, var_err) = mean_and_stderr(counts.iter().map(|c| (c.y as f64 - mean).powi(2)), m);
    let var = counts.iter().map(|c| (c.y as f64 - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let make = |empirical: f64, stderr: f64| {
        let z = z_score(empirical, mu_f, stderr);
        ExperimentResult {
            samples: opts.samples,
            window: sim.window(),
            empirical,
            target: mu.clone(),
            target_interval: MeasureInterval::point(mu.clone()),
            stderr,
            z,
            escaping: Rational::zero(),
            pass: z.abs() <= 4.0,
        }
    };
    Ok([make(mean, mean_err), make(var, var_err)])
}

/// `sample,x,y` rows.
pub fn write_sample_csv<W: Write>(out: &mut W, counts: &[SampleCounts]) -> Result<()> {
    writeln!(out, "sample,x,y")?;
    for (i, c) in counts.iter().enumerate() {
        writeln!(out, "{i},{},{}", c.x, c.y)?;
    }
    Ok(())
}
