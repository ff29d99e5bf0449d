//! Command-line driver: one subcommand per operation, configured by a JSON
//! [`RunConfig`] plus a few global flags.
//!
//! Exit status: 0 success, 2 configuration or input error, 3 depth or
//! precision cap, 4 a scan found a failing row.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::analyzer::{self, CsvRow};
use crate::error::{Error, Result};
use crate::poisson::{self, ExperimentOptions, ExperimentResult, Simulator};
use crate::product::{
    brute_force_root, count_ergodic_components, kth_root, CyclicApproximation, CyclicFactor, FinitePermutation,
    BRUTE_FORCE_LIMIT,
};
use crate::rational::{self, Rational};
use crate::tower::{
    default_tolerance, derive_geometry, CellSet, CellSetSpec, GeneratorSpec, RankOneSchedule, ScheduleSpec, StageKind,
    TowerGeometry, DEFAULT_DEPTH_CAP,
};

#[derive(Debug, Parser)]
#[command(name = "rankone", version, about = "Rank-one towers: exact correlations, scans and Poisson simulation")]
pub struct Cli {
    /// JSON run configuration; defaults are used when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for CSV/JSON artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Tolerance as "p/q": correlation width for `correlate`, escaping mass for the Poisson runs.
    #[arg(long, global = true)]
    pub tol: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Heights, widths and measures of every derived tower.
    Geometry,
    /// Correlation intervals μ(A ∩ TⁿB) for a list of n.
    Correlate,
    /// Rigidity inequality along RIGID_J heights.
    Rigidity,
    /// Half identity along HALF_JPRIME heights, with product and separation rows.
    Weaklimit,
    /// Cycle counts of cyclic approximations and their powers.
    Components,
    /// k-th root test for a finite permutation.
    Roots(RootsArgs),
    /// Covariance of Poisson counts against the exact correlation.
    PoissonCov,
    /// Mean count displacement at rigidity times.
    PoissonRigidity,
}

#[derive(Debug, Args)]
pub struct RootsArgs {
    #[arg(long)]
    pub k: u64,
    /// Size of the cycle tested with `--cycle`.
    #[arg(long)]
    pub size: Option<usize>,
    /// Test the single cycle (0 1 … size−1).
    #[arg(long, requires = "size")]
    pub cycle: bool,
    /// Permutation as a JSON image array, e.g. "[1,2,0,4,3]".
    #[arg(long, conflicts_with = "cycle")]
    pub perm: Option<String>,
}

/// Where the schedule comes from.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSource {
    File {
        file: PathBuf,
    },
    Inline(ScheduleSpec),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schedule: Option<ScheduleSource>,
    /// Number of towers to derive; defaults to all the schedule provides.
    pub depth: Option<usize>,
    /// Primes of the rational-spectrum factor; taken from the generator when absent.
    pub primes: Option<Vec<u64>>,
    pub seed: Option<u64>,
    pub tol: Option<String>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    /// Named level sets; `A` and `B` default to stage-2 ranges `[0,2)` and `[1,3)`.
    pub sets: BTreeMap<String, CellSetSpec>,
    pub correlate: CorrelateConfig,
    pub rigidity: PairConfig,
    pub weaklimit: WeakLimitConfig,
    pub components: ComponentsConfig,
    pub poisson: PoissonConfig,
    pub poisson_rigidity: PoissonRigidityConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelateConfig {
    pub a: Option<String>,
    pub b: Option<String>,
    #[serde(with = "rational::serde_bigint_vec_opt")]
    pub n: Option<Vec<BigInt>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairConfig {
    pub a: Option<String>,
    pub b: Option<String>,
    pub stages: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakLimitConfig {
    pub a: Option<String>,
    pub b: Option<String>,
    pub stages: Option<Vec<usize>>,
    /// Second factor sets `(A′, B′)` for the `T×T` rows; defaults to `(A, A)`.
    pub product: Option<(String, String)>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComponentsConfig {
    /// Towers to approximate; defaults to `j + 1` for every RIGID_J stage `j`
    /// whose approximation fits in memory.
    pub towers: Option<Vec<usize>>,
    /// Order of the cyclic factor; defaults to the product of the primes.
    pub group_order: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoissonConfig {
    pub a: Option<String>,
    pub b: Option<String>,
    #[serde(with = "rational::serde_bigint_vec_opt")]
    pub n: Option<Vec<BigInt>>,
    pub window: Option<usize>,
    pub samples: Option<u64>,
    pub bits: Option<u32>,
    /// Also write per-sample counts.
    pub sample_csv: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoissonRigidityConfig {
    pub a: Option<String>,
    pub stages: Option<Vec<usize>>,
    pub window: Option<usize>,
    pub samples: Option<u64>,
    pub bits: Option<u32>,
}

const DEFAULT_GENERATOR_DEPTH: usize = 14;
const DEFAULT_SAMPLES: u64 = 10_000;

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn schedule(&mut self) -> Result<(RankOneSchedule, Option<Vec<u64>>)> {
        let spec = match self.schedule.take() {
            None => ScheduleSpec::Generator(GeneratorSpec::standard(vec![2, 3], DEFAULT_GENERATOR_DEPTH)),
            Some(ScheduleSource::Inline(spec)) => spec,
            Some(ScheduleSource::File { file }) => {
                let text =
                    fs::read_to_string(&file).map_err(|e| Error::Config(format!("{}: {e}", file.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", file.display())))?
            }
        };
        let primes = match &spec {
            ScheduleSpec::Generator(g) => Some(g.primes.clone()),
            ScheduleSpec::Explicit(_) => None,
        };
        Ok((spec.build()?, primes))
    }
}

/// Everything a subcommand needs after config resolution.
struct Context {
    geometry: TowerGeometry,
    primes: Vec<u64>,
    sets: BTreeMap<String, CellSet>,
    seed: u64,
    tol: Option<Rational>,
    out: PathBuf,
    config: RunConfig,
}

impl Context {
    fn set(&self, name: &Option<String>, default: &str) -> Result<&CellSet> {
        let name = name.as_deref().unwrap_or(default);
        self.sets
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown set {name:?}")))
    }

    fn stages_of(&self, kind: StageKind, above: usize) -> Vec<usize> {
        (above + 1..self.geometry.depth())
            .filter(|&j| self.geometry.kind(j) == Some(kind))
            .collect()
    }

    fn write(&self, name: &str, contents: &[u8]) -> Result<()> {
        fs::create_dir_all(&self.out)?;
        fs::write(self.out.join(name), contents)?;
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.write(name, &text)
    }

    fn write_csv(&self, name: &str, rows: &[CsvRow]) -> Result<()> {
        let mut buf = Vec::new();
        analyzer::write_csv(&mut buf, rows)?;
        self.write(name, &buf)
    }
}

fn build_context(cli: &Cli) -> Result<Context> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    let (schedule, generator_primes) = config.schedule()?;
    let available = schedule.stages.len() + 1;
    let depth = config.depth.unwrap_or(available.min(DEFAULT_DEPTH_CAP));
    let geometry = derive_geometry(&schedule, depth)?;
    let primes = config
        .primes
        .clone()
        .or(generator_primes)
        .filter(|p| !p.is_empty())
        .unwrap_or_else(|| vec![2, 3]);
    let mut specs = config.sets.clone();
    for (name, range) in [("A", (0, 2)), ("B", (1, 3))] {
        specs.entry(name.to_string()).or_insert(CellSetSpec {
            stage: 2.min(geometry.depth()),
            ranges: vec![range],
        });
    }
    let sets = specs
        .iter()
        .map(|(k, v)| v.build(&geometry).map(|s| (k.clone(), s)))
        .collect::<Result<_>>()
        .map_err(|e| Error::Config(format!("sets: {e}")))?;
    let tol = cli
        .tol
        .as_deref()
        .or(config.tol.as_deref())
        .map(rational::parse)
        .transpose()
        .map_err(|e| Error::Config(format!("tol: {e}")))?;
    if tol.as_ref().is_some_and(|t| t <= &Rational::from_integer(0.into())) {
        return Err(Error::Config("tol must be positive".into()));
    }
    Ok(Context {
        geometry,
        primes,
        sets,
        seed: cli.seed.or(config.seed).unwrap_or(0),
        tol,
        out: cli.out.clone().or(config.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
        config,
    })
}

/// Runs the parsed command line, returning the process exit status.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 4,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    if let Command::Roots(args) = &cli.command {
        return roots(args, cli.out.as_deref());
    }
    let ctx = build_context(cli)?;
    let jobs = cli.jobs.or(ctx.config.jobs);
    let pool = match jobs {
        Some(0) => return Err(Error::Config("jobs must be ≥ 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Geometry => geometry(&ctx),
        Command::Correlate => correlate(&ctx),
        Command::Rigidity => rigidity(&ctx),
        Command::Weaklimit => weaklimit(&ctx),
        Command::Components => components(&ctx),
        Command::PoissonCov => poisson_cov(&ctx),
        Command::PoissonRigidity => poisson_rigidity(&ctx),
        Command::Roots(_) => unreachable!(),
    })
}

#[derive(Serialize)]
struct GeometryRow {
    stage: usize,
    kind: Option<StageKind>,
    cuts: Option<usize>,
    #[serde(with = "rational::serde_bigint")]
    height: BigInt,
    #[serde(with = "rational::serde_pq")]
    width: Rational,
    #[serde(with = "rational::serde_pq")]
    measure: Rational,
}

fn geometry(ctx: &Context) -> Result<bool> {
    let g = &ctx.geometry;
    let rows: Vec<GeometryRow> = (1..=g.depth())
        .map(|j| GeometryRow {
            stage: j,
            kind: g.kind(j),
            cuts: g.cuts(j),
            height: g.height(j).clone(),
            width: g.width(j).clone(),
            measure: g.measure(j),
        })
        .collect();
    let mut csv = Vec::new();
    writeln!(csv, "stage,kind,cuts,height,width,measure,measure_approx")?;
    println!("{:>5} {:>11} {:>5} {:>24} {:>14}", "stage", "kind", "cuts", "height", "measure");
    for r in &rows {
        let kind = r.kind.map(|k| format!("{k:?}")).unwrap_or_default();
        let cuts = r.cuts.map(|c| c.to_string()).unwrap_or_default();
        let approx = rational::to_f64(&r.measure);
        writeln!(
            csv,
            "{},{},{},{},{},{},{:e}",
            r.stage,
            kind,
            cuts,
            r.height,
            rational::format(&r.width),
            rational::format(&r.measure),
            approx
        )?;
        println!("{:>5} {:>11} {:>5} {:>24} {:>14.6}", r.stage, kind, cuts, r.height, approx);
    }
    ctx.write("geometry.csv", &csv)?;
    ctx.write_json("geometry.json", &rows)?;
    let increasing = rows.windows(2).all(|w| w[1].measure > w[0].measure);
    println!("measure strictly increasing: {increasing}");
    Ok(increasing)
}

fn correlate(ctx: &Context) -> Result<bool> {
    let c = &ctx.config.correlate;
    let (a, b) = (ctx.set(&c.a, "A")?, ctx.set(&c.b, "B")?);
    let ns = c.n.clone().unwrap_or_else(|| {
        let mut ns: Vec<BigInt> = (-5..=5).map(BigInt::from).collect();
        let base = a.stage().max(b.stage());
        ns.extend((base + 1..ctx.geometry.depth().min(base + 5)).map(|j| ctx.geometry.height(j).clone()));
        ns
    });
    let tol = match &ctx.tol {
        Some(t) => t.clone(),
        None => default_tolerance(&a.measure(&ctx.geometry)).max(rational::dyadic(60)),
    };
    let rows = analyzer::correlation_export(&ctx.geometry, a, b, &ns, &tol)?;
    let csv: Vec<CsvRow> = rows.iter().map(CsvRow::from).collect();
    ctx.write_csv("correlate.csv", &csv)?;
    ctx.write_json("correlate.json", &rows)?;
    for r in &rows {
        println!("n={} [{}, {}]", r.n, rational::format(&r.value.lo), rational::format(&r.value.hi));
    }
    Ok(true)
}

fn rigidity(ctx: &Context) -> Result<bool> {
    let c = &ctx.config.rigidity;
    let (a, b) = (ctx.set(&c.a, "A")?, ctx.set(&c.b, "B")?);
    let stages = c.stages.clone().unwrap_or_else(|| {
        let mut s = ctx.stages_of(StageKind::RigidJ, a.stage().max(b.stage()));
        s.truncate(3);
        s
    });
    let report = analyzer::rigidity_scan(&ctx.geometry, a, b, &stages)?;
    ctx.write_csv("rigidity.csv", &report.rows.iter().map(CsvRow::from).collect::<Vec<_>>())?;
    ctx.write_json("rigidity.json", &report)?;
    for r in &report.rows {
        println!(
            "stage {} n={} deviation {} bound {} {}",
            r.stage,
            r.n,
            rational::format(&r.deviation),
            rational::format(&r.bound),
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(report.all_pass())
}

#[derive(Serialize)]
struct WeakLimitOutput {
    single: analyzer::WeakLimitReport,
    product: analyzer::WeakLimitReport,
    separation: Vec<analyzer::SeparationRow>,
}

fn weaklimit(ctx: &Context) -> Result<bool> {
    let c = &ctx.config.weaklimit;
    let (a, b) = (ctx.set(&c.a, "A")?, ctx.set(&c.b, c.a.as_deref().unwrap_or("A"))?);
    let (a2, b2) = match &c.product {
        Some((x, y)) => (ctx.set(&Some(x.clone()), "A")?, ctx.set(&Some(y.clone()), "A")?),
        None => (a, a),
    };
    let base = [a, b, a2, b2].iter().map(|s| s.stage()).max().unwrap_or(1);
    let stages = c.stages.clone().unwrap_or_else(|| ctx.stages_of(StageKind::HalfJPrime, base));
    let single = analyzer::weak_limit_scan(&ctx.geometry, a, b, &stages)?;
    let product = analyzer::weak_limit_scan_product(&ctx.geometry, (a, b), (a2, b2), &stages)?;
    let separation = analyzer::separation_scan(&ctx.geometry, a, &stages)?;
    ctx.write_csv("weaklimit.csv", &single.rows.iter().map(CsvRow::from).collect::<Vec<_>>())?;
    ctx.write_csv("weaklimit_product.csv", &product.rows.iter().map(CsvRow::from).collect::<Vec<_>>())?;
    let pass = single.all_pass() && product.all_pass() && separation.iter().all(|r| r.pass);
    for (s, p) in single.rows.iter().zip(&product.rows) {
        println!(
            "stage {} n={} single {} product {} {}",
            s.stage,
            s.n,
            rational::format(&s.value.mid()),
            rational::format(&p.value.mid()),
            if s.pass && p.pass { "pass" } else { "FAIL" }
        );
    }
    for r in &separation {
        println!(
            "stage {} ratio {} vs {} gap {}",
            r.stage,
            rational::format(&r.single_ratio.mid()),
            rational::format(&r.product_ratio.mid()),
            rational::format(&r.gap)
        );
    }
    ctx.write_json(
        "weaklimit.json",
        &WeakLimitOutput {
            single,
            product,
            separation,
        },
    )?;
    Ok(pass)
}

#[derive(Serialize)]
struct ComponentRow {
    tower: usize,
    #[serde(with = "rational::serde_bigint")]
    height: BigInt,
    /// `"product"` for `Z_m × T`, `"skew"` for `F(T,p)`.
    system: &'static str,
    order: u64,
    cycles: usize,
    power: u64,
    components: usize,
    expected: Option<usize>,
    approximate: bool,
}

fn components(ctx: &Context) -> Result<bool> {
    let g = &ctx.geometry;
    let modulus: u64 = ctx.primes.iter().product();
    let order = ctx.config.components.group_order.unwrap_or(modulus);
    let factor = CyclicFactor::new(order)?;
    let towers = match &ctx.config.components.towers {
        Some(t) => t.clone(),
        None => (1..g.depth())
            .filter(|&j| g.kind(j) == Some(StageKind::RigidJ))
            .map(|j| j + 1)
            .filter(|&t| g.height(t).to_u64().is_some_and(|h| h.saturating_mul(order) <= 1 << 22))
            .collect(),
    };
    let mut rows = Vec::new();
    for &t in &towers {
        let height = g.height(t).clone();
        let coprime = height.gcd(&BigInt::from(modulus)).is_one();
        let product = CyclicApproximation::at_stage(g, t, Some(factor), None)?;
        for &p in &ctx.primes {
            let expected = (coprime && order.is_multiple_of(p) && order == modulus).then_some(p as usize);
            rows.push(ComponentRow {
                tower: t,
                height: height.clone(),
                system: "product",
                order,
                cycles: product.permutation.cycle_count(),
                power: p,
                components: count_ergodic_components(&product.permutation, p)?,
                expected,
                approximate: product.approximate,
            });
            let skew = CyclicApproximation::at_stage(g, t, None, Some(p))?;
            rows.push(ComponentRow {
                tower: t,
                height: height.clone(),
                system: "skew",
                order: p,
                cycles: skew.permutation.cycle_count(),
                power: p,
                components: count_ergodic_components(&skew.permutation, p)?,
                expected: Some(p as usize),
                approximate: skew.approximate,
            });
        }
    }
    let mut csv = Vec::new();
    writeln!(csv, "tower,height,system,order,cycles,power,components,expected,approximate")?;
    for r in &rows {
        let expected = r.expected.map(|e| e.to_string()).unwrap_or_default();
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.tower, r.height, r.system, r.order, r.cycles, r.power, r.components, expected, r.approximate
        )?;
        println!(
            "tower {} h={} {} order {} cycles {} power {} components {}",
            r.tower, r.height, r.system, r.order, r.cycles, r.power, r.components
        );
    }
    ctx.write("components.csv", &csv)?;
    ctx.write_json("components.json", &rows)?;
    Ok(rows.iter().all(|r| r.expected.is_none_or(|e| e == r.components)))
}

#[derive(Serialize)]
struct RootsOutput {
    permutation: FinitePermutation,
    k: u64,
    cycle_type: BTreeMap<usize, usize>,
    root: Option<FinitePermutation>,
    brute_force_agrees: Option<bool>,
}

fn roots(args: &RootsArgs, out: Option<&Path>) -> Result<bool> {
    if args.k == 0 {
        return Err(Error::Config("k must be ≥ 1".into()));
    }
    let perm = match (&args.perm, args.cycle, args.size) {
        (Some(text), _, _) => {
            let images: Vec<usize> =
                serde_json::from_str(text).map_err(|e| Error::Config(format!("--perm: {e}")))?;
            FinitePermutation::from_images(images)?
        }
        (None, true, Some(n)) if n >= 1 => FinitePermutation::cycle(n),
        _ => return Err(Error::Config("give --perm, or --cycle with --size ≥ 1".into())),
    };
    let root = kth_root(&perm, args.k)?;
    let brute_force_agrees = (perm.len() <= BRUTE_FORCE_LIMIT)
        .then(|| brute_force_root(&perm, args.k).map(|r| r.is_some() == root.is_some()))
        .transpose()?;
    match &root {
        Some(r) => println!("k-th root exists (k={}): {}", args.k, serde_json::to_string(r)?),
        None => println!("no k-th root (k={})", args.k),
    }
    if let Some(agrees) = brute_force_agrees {
        println!("brute force agrees: {agrees}");
    }
    let output = RootsOutput {
        cycle_type: perm.cycle_type(),
        permutation: perm,
        k: args.k,
        root,
        brute_force_agrees,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut text = serde_json::to_vec_pretty(&output)?;
        text.push(b'\n');
        fs::write(dir.join("roots.json"), text)?;
    }
    Ok(brute_force_agrees != Some(false))
}

fn escape_tolerance(ctx: &Context) -> Rational {
    ctx.tol.clone().unwrap_or_else(|| rational::ratio(1, 1_000_000))
}

fn simulator<'g>(
    ctx: &'g Context,
    window: Option<usize>,
    queries: &[(&CellSet, BigInt)],
    bits: Option<u32>,
) -> Result<Simulator<'g>> {
    let window = match window {
        Some(w) => w,
        None => poisson::select_window(&ctx.geometry, queries, &escape_tolerance(ctx))?,
    };
    Simulator::new(&ctx.geometry, window, bits.unwrap_or(poisson::DEFAULT_BITS))
}

#[derive(Serialize)]
struct PoissonRow {
    #[serde(with = "rational::serde_bigint")]
    n: BigInt,
    seed: u64,
    #[serde(flatten)]
    result: ExperimentResult,
}

fn report_poisson(ctx: &Context, name: &str, rows: &[PoissonRow]) -> Result<bool> {
    for r in rows {
        println!(
            "n={} window {} empirical {} target {} stderr {} z {} {}",
            r.n,
            r.result.window,
            r.result.empirical,
            rational::format(&r.result.target),
            r.result.stderr,
            r.result.z,
            if r.result.pass { "pass" } else { "FAIL" }
        );
    }
    ctx.write_json(name, &rows)?;
    Ok(rows.iter().all(|r| r.result.pass))
}

fn first_above(ctx: &Context, kind: StageKind, base: usize) -> Option<BigInt> {
    ctx.stages_of(kind, base).first().map(|&j| ctx.geometry.height(j).clone())
}

fn poisson_cov(ctx: &Context) -> Result<bool> {
    let c = &ctx.config.poisson;
    let (a, b) = (ctx.set(&c.a, "A")?, ctx.set(&c.b, "B")?);
    let ns = c.n.clone().unwrap_or_else(|| {
        let base = a.stage().max(b.stage());
        let mut ns = vec![BigInt::from(0), BigInt::from(1)];
        ns.extend(first_above(ctx, StageKind::HalfJPrime, base));
        ns.extend(first_above(ctx, StageKind::RigidJ, base));
        ns
    });
    let queries: Vec<(&CellSet, BigInt)> = ns.iter().map(|n| (a, n.clone())).collect();
    let sim = simulator(ctx, c.window, &queries, c.bits)?;
    let opts = ExperimentOptions {
        samples: c.samples.unwrap_or(DEFAULT_SAMPLES),
        seed: ctx.seed,
        tol: escape_tolerance(ctx),
    };
    let mut rows = Vec::new();
    for (i, n) in ns.iter().enumerate() {
        let (result, counts) = poisson::covariance_experiment(&sim, a, b, n, &opts)?;
        if c.sample_csv {
            let mut buf = Vec::new();
            poisson::write_sample_csv(&mut buf, &counts)?;
            ctx.write(&format!("poisson_cov_samples_{i}.csv"), &buf)?;
        }
        rows.push(PoissonRow {
            n: n.clone(),
            seed: opts.seed,
            result,
        });
    }
    report_poisson(ctx, "poisson_cov.json", &rows)
}

fn poisson_rigidity(ctx: &Context) -> Result<bool> {
    let c = &ctx.config.poisson_rigidity;
    let a = ctx.set(&c.a, "A")?;
    let stages = c.stages.clone().unwrap_or_else(|| {
        let mut s = ctx.stages_of(StageKind::RigidJ, a.stage());
        s.truncate(2);
        s
    });
    for &j in &stages {
        ctx.geometry.check_stage(j)?;
    }
    let ns: Vec<BigInt> = stages.iter().map(|&j| ctx.geometry.height(j).clone()).collect();
    let queries: Vec<(&CellSet, BigInt)> = ns.iter().map(|n| (a, n.clone())).collect();
    let sim = simulator(ctx, c.window, &queries, c.bits)?;
    let opts = ExperimentOptions {
        samples: c.samples.unwrap_or(DEFAULT_SAMPLES),
        seed: ctx.seed,
        tol: escape_tolerance(ctx),
    };
    let rows = ns
        .iter()
        .map(|n| {
            poisson::suspension_rigidity_experiment(&sim, a, n, &opts).map(|(result, _)| PoissonRow {
                n: n.clone(),
                seed: opts.seed,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    report_poisson(ctx, "poisson_rigidity.json", &rows)
}
