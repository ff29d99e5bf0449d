//! Scans over a derived geometry that check the rigidity inequality, the
//! `I/2` weak limit on half-spacer stages, and related product statements.
//!
//! Every number in a report comes from [`crate::tower::correlation`]; the
//! analyzer only combines intervals with exact rational arithmetic.

use std::io::Write;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::product::{s_correlation, GroupSet};
use crate::rational::{self, Rational};
use crate::tower::{correlation, default_tolerance, CellSet, MeasureInterval, StageKind, TowerGeometry};

#[derive(Clone, Debug, Serialize)]
pub struct RigidityRow {
    pub stage: usize,
    #[serde(with = "rational::serde_bigint")]
    pub n: BigInt,
    pub value: MeasureInterval,
    #[serde(with = "rational::serde_pq")]
    pub reference: Rational,
    #[serde(with = "rational::serde_pq")]
    pub bound: Rational,
    #[serde(with = "rational::serde_pq")]
    pub deviation: Rational,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RigidityReport {
    pub rows: Vec<RigidityRow>,
}

impl RigidityReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakLimitRow {
    pub stage: usize,
    #[serde(with = "rational::serde_bigint")]
    pub n: BigInt,
    pub value: MeasureInterval,
    #[serde(with = "rational::serde_pq")]
    pub target: Rational,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakLimitReport {
    #[serde(with = "rational::serde_pq")]
    pub a: Rational,
    pub rows: Vec<WeakLimitRow>,
}

impl WeakLimitReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

fn check_scan_stages(
    geometry: &TowerGeometry,
    sets_stage: usize,
    stages: &[usize],
    kind: StageKind,
) -> Result<()> {
    for &j in stages {
        geometry.check_stage(j)?;
        if j <= sets_stage {
            return Err(Error::InvalidArgument(format!(
                "stage {j} must lie above the sets' stage {sets_stage}"
            )));
        }
        match geometry.kind(j) {
            Some(k) if k == kind => {}
            Some(other) => {
                return Err(Error::InvalidArgument(format!(
                    "stage {j} is {other:?}, scan expects {kind:?}"
                )))
            }
            None => {
                return Err(Error::ExtensionRequired {
                    requested: j + 1,
                    available: geometry.depth(),
                })
            }
        }
    }
    Ok(())
}

/// `|μ(A ∩ T^{h_j}B) − μ(A ∩ B)| ≤ (μ(A) + μ(B))/r_j` on RIGID_J stages.
///
/// Each row is resolved to a width of at most `bound · 2⁻¹⁰`.
pub fn rigidity_scan(
    geometry: &TowerGeometry,
    a: &CellSet,
    b: &CellSet,
    stages: &[usize],
) -> Result<RigidityReport> {
    let base = a.stage().max(b.stage());
    check_scan_stages(geometry, base, stages, StageKind::RigidJ)?;
    let reference = intersection_measure(geometry, a, b)?;
    let sum = a.measure(geometry) + b.measure(geometry);
    let rows = stages
        .par_iter()
        .map(|&j| {
            let n = geometry.height(j).clone();
            let cuts = rational::int(geometry.cuts(j).expect("checked") as u64);
            let bound = &sum / cuts;
            let tol = if bound.is_zero() {
                rational::dyadic(40)
            } else {
                &bound * rational::dyadic(10)
            };
            let value = correlation(geometry, a, b, &n, &tol)?;
            let deviation = rational::abs_diff(&value.mid(), &reference);
            let pass = deviation <= &bound + value.width();
            Ok(RigidityRow {
                stage: j,
                n,
                value,
                reference: reference.clone(),
                bound,
                deviation,
                pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RigidityReport { rows })
}

fn intersection_measure(geometry: &TowerGeometry, a: &CellSet, b: &CellSet) -> Result<Rational> {
    let stage = a.stage().max(b.stage());
    let a = a.refine(geometry, stage)?;
    let b = b.refine(geometry, stage)?;
    Ok(a.intersect(&b)?.measure(geometry))
}

fn tolerance_for(geometry: &TowerGeometry, a: &CellSet) -> Rational {
    let mu = a.measure(geometry);
    if mu.is_zero() {
        rational::dyadic(40)
    } else {
        default_tolerance(&mu)
    }
}

/// `μ(A ∩ T^{h_j}B) = μ(A ∩ B)/2` on HALF_JPRIME stages.
pub fn weak_limit_scan(
    geometry: &TowerGeometry,
    a: &CellSet,
    b: &CellSet,
    stages: &[usize],
) -> Result<WeakLimitReport> {
    let base = a.stage().max(b.stage());
    check_scan_stages(geometry, base, stages, StageKind::HalfJPrime)?;
    let half = rational::ratio(1, 2);
    let target = &half * intersection_measure(geometry, a, b)?;
    let tol = tolerance_for(geometry, a);
    let rows = stages
        .par_iter()
        .map(|&j| {
            let n = geometry.height(j).clone();
            let value = correlation(geometry, a, b, &n, &tol)?;
            let pass = value.contains(&target);
            Ok(WeakLimitRow {
                stage: j,
                n,
                value,
                target: target.clone(),
                pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeakLimitReport { a: half, rows })
}

/// The same scan for `T × T` on product sets `A×A′`, `B×B′`, moving both
/// coordinates by `h_j`; the target is `(1/2)² μ(A∩B) μ(A′∩B′)`.
pub fn weak_limit_scan_product(
    geometry: &TowerGeometry,
    (a, b): (&CellSet, &CellSet),
    (a2, b2): (&CellSet, &CellSet),
    stages: &[usize],
) -> Result<WeakLimitReport> {
    let base = a.stage().max(b.stage()).max(a2.stage()).max(b2.stage());
    check_scan_stages(geometry, base, stages, StageKind::HalfJPrime)?;
    let quarter = rational::ratio(1, 4);
    let target =
        &quarter * intersection_measure(geometry, a, b)? * intersection_measure(geometry, a2, b2)?;
    let (tol1, tol2) = (tolerance_for(geometry, a), tolerance_for(geometry, a2));
    let rows = stages
        .par_iter()
        .map(|&j| {
            let n = geometry.height(j).clone();
            let first = correlation(geometry, a, b, &n, &tol1)?;
            let second = correlation(geometry, a2, b2, &n, &tol2)?;
            let value = first.product(&second);
            let pass = value.contains(&target);
            Ok(WeakLimitRow {
                stage: j,
                n,
                value,
                target: target.clone(),
                pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeakLimitReport { a: quarter, rows })
}

/// Single-system versus `T×T` correlation ratios along half-spacer heights.
#[derive(Clone, Debug, Serialize)]
pub struct SeparationRow {
    pub stage: usize,
    pub single_ratio: MeasureInterval,
    pub product_ratio: MeasureInterval,
    /// Lower bound on `single − product`.
    #[serde(with = "rational::serde_pq")]
    pub gap: Rational,
    pub pass: bool,
}

/// Ratios `μ(A∩T^{h_j}A)/μ(A)` and `(μ×μ)((A×A)∩(T×T)^{h_j}(A×A))/μ(A)²`.
/// A limit `a` for the first forces `a²` for the second; rows pass when the
/// two differ by at least `1/8`.
pub fn separation_scan(geometry: &TowerGeometry, a: &CellSet, stages: &[usize]) -> Result<Vec<SeparationRow>> {
    let mu = a.measure(geometry);
    if mu.is_zero() {
        return Err(Error::InvalidArgument("separation needs μ(A) > 0".into()));
    }
    let single = weak_limit_scan(geometry, a, a, stages)?;
    let min_gap = rational::ratio(1, 8);
    Ok(single
        .rows
        .into_iter()
        .map(|row| {
            let single_ratio = row.value.scale(&(Rational::one() / &mu));
            let product_ratio = single_ratio.product(&single_ratio);
            let gap = &single_ratio.lo - &product_ratio.hi;
            let pass = gap >= min_gap;
            SeparationRow {
                stage: row.stage,
                single_ratio,
                product_ratio,
                gap,
                pass,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RigidityTime {
    pub stage: usize,
    #[serde(with = "rational::serde_bigint")]
    pub n: BigInt,
}

/// `N_i = (p₁⋯pₙ)·h_{j_i}` over the first `count` RIGID_J stages.
///
/// The group order must divide `p₁⋯pₙ`, so `S^{N_i}` is the identity on
/// `Z_m`. Every RIGID_J stage must have produced a tower height coprime to
/// `p₁⋯pₙ`, i.e. the schedule was generated with these primes.
pub fn product_rigidity_times(
    geometry: &TowerGeometry,
    primes: &[u64],
    group_order: u64,
    count: usize,
) -> Result<Vec<RigidityTime>> {
    let modulus: u64 = primes.iter().product();
    if group_order == 0 || !modulus.is_multiple_of(group_order) {
        return Err(Error::InvalidArgument(format!(
            "group order {group_order} does not divide {modulus}"
        )));
    }
    let modulus_big = BigInt::from(modulus);
    let mut times = Vec::with_capacity(count);
    for j in 1..geometry.depth() {
        if times.len() == count {
            break;
        }
        if geometry.kind(j) != Some(StageKind::RigidJ) {
            continue;
        }
        if !geometry.height(j + 1).gcd(&modulus_big).is_one() {
            return Err(Error::InvalidArgument(format!(
                "h_{} = {} is not coprime to {modulus}; schedule was built with other primes",
                j + 1,
                geometry.height(j + 1)
            )));
        }
        times.push(RigidityTime {
            stage: j,
            n: geometry.height(j) * modulus,
        });
    }
    if times.len() < count {
        return Err(Error::ExtensionRequired {
            requested: geometry.depth() + 1,
            available: geometry.depth(),
        });
    }
    Ok(times)
}

/// Product correlation at a rigidity time `N = M·h_j` against `ν(D∩E)μ(A∩B)`.
#[derive(Clone, Debug, Serialize)]
pub struct ProductRigidityRow {
    pub stage: usize,
    #[serde(with = "rational::serde_bigint")]
    pub n: BigInt,
    pub value: MeasureInterval,
    #[serde(with = "rational::serde_pq")]
    pub reference: Rational,
    /// `ν(D∩E)·M·(μ(A)+μ(B))/r_j`.
    #[serde(with = "rational::serde_pq")]
    pub bound: Rational,
    #[serde(with = "rational::serde_pq")]
    pub deviation: Rational,
    pub pass: bool,
}

/// `T^{M h_j}` shifts each of the first `r_j − M` columns by `M` columns, so
/// its deviation from the identity is at most `M` times the single-step bound.
#[allow(clippy::too_many_arguments)]
pub fn product_rigidity_scan(
    geometry: &TowerGeometry,
    a: &CellSet,
    d: &GroupSet,
    b: &CellSet,
    e: &GroupSet,
    primes: &[u64],
    count: usize,
) -> Result<Vec<ProductRigidityRow>> {
    if d.order() != e.order() {
        return Err(Error::OrderMismatch(d.order(), e.order()));
    }
    let base = a.stage().max(b.stage());
    let times: Vec<RigidityTime> = product_rigidity_times(geometry, primes, d.order(), geometry.depth())
        .or_else(|_| product_rigidity_times_available(geometry, primes, d.order()))?
        .into_iter()
        .filter(|t| t.stage > base)
        .take(count)
        .collect();
    let nu = s_correlation(d, e, &BigInt::zero())?;
    let reference = &nu * intersection_measure(geometry, a, b)?;
    let sum = a.measure(geometry) + b.measure(geometry);
    let modulus = rational::int(primes.iter().product::<u64>());
    times
        .par_iter()
        .map(|t| {
            let cuts = rational::int(geometry.cuts(t.stage).expect("rigid stage") as u64);
            let bound = &nu * &modulus * &sum / cuts;
            let factor = s_correlation(d, e, &t.n)?;
            let tol = if bound.is_zero() { rational::dyadic(40) } else { &bound * rational::dyadic(10) };
            let value = if factor.is_zero() {
                MeasureInterval::point(Rational::zero())
            } else {
                correlation(geometry, a, b, &t.n, &(&tol / &factor))?.scale(&factor)
            };
            let deviation = rational::abs_diff(&value.mid(), &reference);
            let pass = deviation <= &bound + value.width();
            Ok(ProductRigidityRow {
                stage: t.stage,
                n: t.n.clone(),
                value,
                reference: reference.clone(),
                bound,
                deviation,
                pass,
            })
        })
        .collect()
}

fn product_rigidity_times_available(
    geometry: &TowerGeometry,
    primes: &[u64],
    order: u64,
) -> Result<Vec<RigidityTime>> {
    let available = (1..geometry.depth())
        .filter(|&j| geometry.kind(j) == Some(StageKind::RigidJ))
        .count();
    product_rigidity_times(geometry, primes, order, available)
}

/// First RIGID_J stage above the sets whose product deviation bound
/// `M·(μ(A)+μ(B))/r_j` is at most `threshold`.
pub fn select_rigidity_stage(
    geometry: &TowerGeometry,
    a: &CellSet,
    b: &CellSet,
    primes: &[u64],
    threshold: &Rational,
) -> Option<usize> {
    let base = a.stage().max(b.stage());
    let sum = a.measure(geometry) + b.measure(geometry);
    let modulus = rational::int(primes.iter().product::<u64>());
    (base + 1..geometry.depth()).find(|&j| {
        geometry.kind(j) == Some(StageKind::RigidJ)
            && &modulus * &sum / rational::int(geometry.cuts(j).unwrap() as u64) <= *threshold
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExportRow {
    #[serde(with = "rational::serde_bigint")]
    pub n: BigInt,
    pub value: MeasureInterval,
}

/// `(n, lo, hi)` rows of the correlation sequence, in input order.
pub fn correlation_export(
    geometry: &TowerGeometry,
    a: &CellSet,
    b: &CellSet,
    ns: &[BigInt],
    tol: &Rational,
) -> Result<Vec<ExportRow>> {
    ns.par_iter()
        .map(|n| {
            Ok(ExportRow {
                n: n.clone(),
                value: correlation(geometry, a, b, n, tol)?,
            })
        })
        .collect()
}

/// One CSV line: `n,lo,hi,reference,bound,pass,approx`.
#[derive(Clone, Debug)]
pub struct CsvRow {
    pub n: BigInt,
    pub value: MeasureInterval,
    pub reference: Option<Rational>,
    pub bound: Option<Rational>,
    pub pass: Option<bool>,
}

pub const CSV_HEADER: &str = "n,lo,hi,reference,bound,pass,approx";

pub fn write_csv<W: Write>(out: &mut W, rows: &[CsvRow]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        let opt = |r: &Option<Rational>| r.as_ref().map(rational::format).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{:e}",
            row.n,
            rational::format(&row.value.lo),
            rational::format(&row.value.hi),
            opt(&row.reference),
            opt(&row.bound),
            row.pass.map(|p| p.to_string()).unwrap_or_default(),
            rational::to_f64(&row.value.mid()),
        )?;
    }
    Ok(())
}

impl From<&ExportRow> for CsvRow {
    fn from(r: &ExportRow) -> Self {
        CsvRow {
            n: r.n.clone(),
            value: r.value.clone(),
            reference: None,
            bound: None,
            pass: None,
        }
    }
}

impl From<&RigidityRow> for CsvRow {
    fn from(r: &RigidityRow) -> Self {
        CsvRow {
            n: r.n.clone(),
            value: r.value.clone(),
            reference: Some(r.reference.clone()),
            bound: Some(r.bound.clone()),
            pass: Some(r.pass),
        }
    }
}

impl From<&WeakLimitRow> for CsvRow {
    fn from(r: &WeakLimitRow) -> Self {
        CsvRow {
            n: r.n.clone(),
            value: r.value.clone(),
            reference: Some(r.target.clone()),
            bound: None,
            pass: Some(r.pass),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use crate::tower::{derive_geometry, generated_schedule, GeneratorOptions};

    fn standard(depth: usize) -> TowerGeometry {
        let s = generated_schedule(|j| j % 2 == 1, &[2, 3], depth, &GeneratorOptions::default()).unwrap();
        derive_geometry(&s, depth + 1).unwrap()
    }

    #[test]
    fn rigidity_rows_shrink() {
        let g = standard(8);
        let a = CellSet::from_levels(&g, 2, &[0]).unwrap();
        let report = rigidity_scan(&g, &a, &a, &[3, 5, 7]).unwrap();
        assert!(report.all_pass());
        let cuts: Vec<_> = report.rows.iter().map(|r| g.cuts(r.stage).unwrap()).collect();
        assert_eq!(cuts, vec![8, 16, 32]);
        for w in report.rows.windows(2) {
            assert!(w[1].deviation < w[0].deviation);
        }
        for row in &report.rows {
            assert!(row.value.width() <= &row.bound / int(10));
            assert!(row.deviation <= int(2) * a.measure(&g) / int(g.cuts(row.stage).unwrap() as u64));
        }
    }

    #[test]
    fn disjoint_sets_stay_below_bound() {
        let g = standard(6);
        let a = CellSet::from_levels(&g, 2, &[0]).unwrap();
        let b = CellSet::from_levels(&g, 2, &[3]).unwrap();
        let report = rigidity_scan(&g, &a, &b, &[3, 5]).unwrap();
        for row in &report.rows {
            assert_eq!(row.reference, int(0));
            assert!(row.value.lo <= row.bound);
        }
    }

    #[test]
    fn scans_reject_wrong_kind() {
        let g = standard(6);
        let a = CellSet::from_levels(&g, 2, &[0]).unwrap();
        assert!(rigidity_scan(&g, &a, &a, &[4]).is_err());
        assert!(weak_limit_scan(&g, &a, &a, &[3]).is_err());
        assert!(rigidity_scan(&g, &a, &a, &[1]).is_err());
    }

    #[test]
    fn weak_limit_is_exactly_half() {
        let g = standard(8);
        let a = CellSet::from_levels(&g, 2, &[2]).unwrap();
        let report = weak_limit_scan(&g, &a, &a, &[4, 6, 8]).unwrap();
        assert!(report.all_pass());
        for row in &report.rows {
            assert_eq!(row.target, a.measure(&g) / int(2));
        }
        let b = CellSet::from_levels(&g, 2, &[4]).unwrap();
        let disjoint = weak_limit_scan(&g, &a, &b, &[4, 6]).unwrap();
        assert!(disjoint.rows.iter().all(|r| r.pass && r.target == int(0)));
    }

    #[test]
    fn product_weak_limit_is_quarter() {
        let g = standard(6);
        let a = CellSet::from_ranges(&g, 2, &[(0, 3)]).unwrap();
        let b = CellSet::from_ranges(&g, 2, &[(1, 4)]).unwrap();
        let a2 = CellSet::from_levels(&g, 2, &[4]).unwrap();
        let report = weak_limit_scan_product(&g, (&a, &b), (&a2, &a2), &[4, 6]).unwrap();
        assert!(report.all_pass());
        assert_eq!(report.rows[0].target, ratio(1, 4) * ratio(2, 4) * ratio(1, 4));
    }

    #[test]
    fn separation_gap() {
        let g = standard(8);
        let a = CellSet::from_ranges(&g, 2, &[(0, 2)]).unwrap();
        for row in separation_scan(&g, &a, &[4, 6, 8]).unwrap() {
            assert_eq!(row.single_ratio, MeasureInterval::point(ratio(1, 2)));
            assert_eq!(row.product_ratio, MeasureInterval::point(ratio(1, 4)));
            assert!(row.pass);
        }
    }

    #[test]
    fn rigidity_times_use_modulus() {
        let g = standard(7);
        let times = product_rigidity_times(&g, &[2, 3], 6, 3).unwrap();
        let ns: Vec<_> = times.iter().map(|t| t.n.clone()).collect();
        assert_eq!(ns, vec![BigInt::from(6), BigInt::from(6 * 30), BigInt::from(6 * 2892)]);
        assert!(product_rigidity_times(&g, &[2, 3], 4, 1).is_err());
        let d = GroupSet::new(6, [0, 1]).unwrap();
        for t in &times {
            assert_eq!(s_correlation(&d, &d, &t.n).unwrap(), ratio(2, 6));
        }
        // Schedule built with other primes.
        let s = generated_schedule(|j| j % 2 == 1, &[5], 4, &GeneratorOptions::default()).unwrap();
        let g5 = derive_geometry(&s, 5).unwrap();
        assert!(product_rigidity_times(&g5, &[2, 3], 6, 1).is_err());
    }

    #[test]
    fn product_rigidity_rows_pass() {
        let g = standard(8);
        let a = CellSet::from_ranges(&g, 2, &[(0, 2)]).unwrap();
        let d = GroupSet::new(6, [0, 3]).unwrap();
        let rows = product_rigidity_scan(&g, &a, &d, &a, &d, &[2, 3], 3).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.pass));
    }

    #[test]
    fn export_symmetry_and_csv() {
        let g = standard(4);
        let a = CellSet::from_ranges(&g, 2, &[(0, 2)]).unwrap();
        let b = CellSet::from_ranges(&g, 2, &[(1, 4)]).unwrap();
        let ns: Vec<BigInt> = (-6..=6).map(BigInt::from).collect();
        let tol = ratio(1, 1 << 12);
        let ab = correlation_export(&g, &a, &b, &ns, &tol).unwrap();
        let neg: Vec<BigInt> = ns.iter().map(|n| -n).collect();
        let ba = correlation_export(&g, &b, &a, &neg, &tol).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            assert!(x.value.intersect(&y.value).is_some());
        }
        assert_eq!(ab[6].value, MeasureInterval::point(ratio(1, 4)));
        let mut buf = Vec::new();
        let rows: Vec<CsvRow> = ab.iter().map(CsvRow::from).collect();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,lo,hi,reference,bound,pass,approx\n"));
        assert!(text.contains("\n0,1/4,1/4,,,,2.5e-1\n"));
    }
}
