//! Subcommand implementations.

use std::fmt::Write as _;

use cournot_lre::aggregative::{compute_ats, verify_quasi_submodularity};
use cournot_lre::dynamics::{estimate_stationary, simulate_trajectory, RevisionConfig};
use cournot_lre::dynamics::{replication_rng, Occupancy};
use cournot_lre::lre::{self, arborescence, LreResult};
use cournot_lre::oligopoly::{
    advantage_set, descent_sequences, grid_descent, h_of, l_of, lre_bounds, verify_delta_properties,
    verify_strategic_substitutes, verify_walrasian_advantage, AdvantageKind,
};
use cournot_lre::rules::{check_no_birth, check_survival_of_fittest};
use cournot_lre::{AbsorbingSet, AggregativeGame, BehavioralRule, CriterionSpec, LreGame, OligopolyModel, StageGame};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{self, list, Quantity, Sink};
use crate::{CliError, CommonArgs, Format};

pub const PRINCIPLE_TRIALS: usize = 100_000;
const ORACLE_GRAPHS: usize = 200;

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub args: &'a CommonArgs,
    pub sink: &'a Sink,
}

enum Game {
    Oligopoly(OligopolyModel),
    Aggregative(AggregativeGame),
}

impl Game {
    fn lre(&self) -> &dyn LreGame {
        match self {
            Game::Oligopoly(m) => m,
            Game::Aggregative(g) => g,
        }
    }
}

impl Context<'_> {
    fn model(&self) -> Result<OligopolyModel, CliError> {
        let spec = self.config.model.as_ref().ok_or_else(|| CliError::Config("model required".into()))?;
        Ok(spec.build()?)
    }

    fn aggregative_game(&self) -> Result<AggregativeGame, CliError> {
        let spec = self.config.aggregative.as_ref().ok_or_else(|| CliError::Config("aggregative required".into()))?;
        Ok(spec.build()?)
    }

    /// The game the dynamics and tree analysis run on.
    fn game(&self) -> Result<Game, CliError> {
        match &self.config.aggregative {
            Some(a) if a.primary || self.config.model.is_none() => Ok(Game::Aggregative(a.build()?)),
            _ => Ok(Game::Oligopoly(self.model()?)),
        }
    }

    fn eta(&self) -> f64 {
        self.args.eta.or(self.config.analysis.eta).or(self.config.dynamics.as_ref().map(|d| d.eta)).unwrap_or(2.0)
    }

    fn revision(&self, n: usize) -> Result<RevisionConfig, CliError> {
        let d = self.config.dynamics.as_ref().ok_or_else(|| CliError::Config("dynamics required".into()))?;
        Ok(d.build(n, self.args.eta))
    }

    fn criteria(&self, n: usize) -> Vec<CriterionSpec> {
        self.config.dynamics.as_ref().map(|d| d.build(n, None).criteria).unwrap_or_default()
    }

    fn seed(&self) -> u64 {
        self.args.seed.or(self.config.simulation.as_ref().map(|s| s.seed)).unwrap_or(0)
    }
}

#[derive(Serialize)]
struct Pattern {
    label: String,
    rule: BehavioralRule,
    level: usize,
    quantity: Quantity,
}

fn pattern(game: &dyn StageGame, p: AbsorbingSet) -> Pattern {
    let q = game.level_value(p.level);
    Pattern { label: format!("mon({},{})", fmt_value(q), p.rule), rule: p.rule, level: p.level, quantity: q.into() }
}

fn fmt_value(x: f64) -> String {
    output::rational(x).map_or_else(|| x.to_string(), |r| r.to_string())
}

fn unsupported(format: Format, command: &str) -> CliError {
    CliError::Config(format!("format {format:?} is not available for {command}").to_lowercase())
}

// ----- bench -----

#[derive(Serialize)]
struct BenchmarkOut {
    quantity: Quantity,
    level: Option<usize>,
}

#[derive(Serialize)]
struct AdvantageRow {
    level: usize,
    q: Quantity,
    kind: AdvantageKind,
    lo: Quantity,
    hi: Quantity,
    /// Smallest and largest grid level in the advantage set.
    grid_min: Option<usize>,
    grid_max: Option<usize>,
}

#[derive(Serialize)]
struct BenchReport {
    n: usize,
    levels: usize,
    nash: BenchmarkOut,
    walrasian: BenchmarkOut,
    collusive: BenchmarkOut,
    h_at_nash: Quantity,
    advantage: Vec<AdvantageRow>,
    descent: Option<DescentOut>,
    grid_descent: Option<DescentOut>,
    bounds: Option<[Quantity; 2]>,
    bounds_error: Option<String>,
    window: Option<lre::WindowBound>,
}

#[derive(Serialize)]
struct DescentOut {
    a: Vec<Quantity>,
    b: Vec<Quantity>,
}

pub fn bench(ctx: &Context) -> Result<(), CliError> {
    let m = ctx.model()?;
    let b = m.benchmarks()?;
    let grid = m.grid();
    let bench = |x: &cournot_lre::oligopoly::Benchmark| BenchmarkOut { quantity: x.value.into(), level: x.level };
    let advantage = (0..grid.len())
        .map(|k| {
            let s = advantage_set(&m, grid.value(k))?;
            Ok(AdvantageRow {
                level: k,
                q: grid.value(k).into(),
                kind: s.kind,
                lo: s.lo.into(),
                hi: s.hi.into(),
                grid_min: s.grid.first().copied(),
                grid_max: s.grid.last().copied(),
            })
        })
        .collect::<cournot_lre::Result<Vec<_>>>()?;
    let descent = descent_sequences(&m).ok().map(|d| DescentOut { a: list(&d.a), b: list(&d.b) });
    let grid_descent = grid_descent(&m).ok().map(|d| {
        let v = |ks: &[usize]| ks.iter().map(|&k| Quantity::new(grid.value(k))).collect();
        DescentOut { a: v(&d.a), b: v(&d.b) }
    });
    let (bounds, bounds_error) = match lre_bounds(&m) {
        Ok(r) => (Some([r.lower.into(), r.upper.into()]), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = BenchReport {
        n: m.n(),
        levels: grid.len(),
        nash: bench(&b.nash),
        walrasian: bench(&b.walrasian),
        collusive: bench(&b.collusive),
        h_at_nash: h_of(&m, b.nash.value)?.into(),
        advantage,
        descent,
        grid_descent,
        bounds,
        bounds_error,
        window: lre::window_bound(&m).ok(),
    };
    eprint!("{}", bench_table(&m, &report));
    match ctx.args.format {
        Format::Json => ctx.sink.emit("bench.json", &output::json(&report)),
        Format::Csv => ctx.sink.emit("advantage.csv", &advantage_csv(&report)?),
        Format::Dot => Err(unsupported(Format::Dot, "bench")),
    }
}

fn advantage_csv(r: &BenchReport) -> Result<String, CliError> {
    #[derive(Serialize)]
    struct Row<'a> {
        level: usize,
        q: &'a str,
        kind: AdvantageKind,
        lo: &'a str,
        hi: &'a str,
    }
    let rows: Vec<Row> = r
        .advantage
        .iter()
        .map(|a| Row { level: a.level, q: &a.q.decimal, kind: a.kind, lo: &a.lo.decimal, hi: &a.hi.decimal })
        .collect();
    output::csv(&rows)
}

fn bench_table(m: &OligopolyModel, r: &BenchReport) -> String {
    let show = |q: &Quantity| q.rational.clone().unwrap_or_else(|| q.decimal.clone());
    let mut s = String::new();
    let _ = writeln!(s, "n = {}, {} grid levels", r.n, r.levels);
    let _ = writeln!(
        s,
        "q^N = {}   q^W = {}   q^C = {}",
        show(&r.nash.quantity),
        show(&r.walrasian.quantity),
        show(&r.collusive.quantity)
    );
    if let Some([lo, hi]) = &r.bounds {
        let _ = writeln!(s, "LRE bounds for eta = 1: [{}, {}]", show(lo), show(hi));
    }
    let _ = writeln!(s, "{:>10}  {:>6}  {:>22}", "q", "side", "root");
    let qw = m.benchmarks().map(|b| b.walrasian.value).unwrap_or(f64::NAN);
    for row in &r.advantage {
        let q: f64 = m.grid().value(row.level);
        let root = if q < qw {
            h_of(m, q).ok()
        } else if q > qw {
            l_of(m, q).ok()
        } else {
            Some(q)
        };
        let side = match row.kind {
            AdvantageKind::Point => "W",
            AdvantageKind::Upper => "h",
            AdvantageKind::Lower => "l",
        };
        let _ = writeln!(s, "{:>10}  {:>6}  {:>22}", show(&row.q), side, root.map_or("-".into(), fmt_value));
    }
    s
}

// ----- analyze -----

#[derive(Serialize)]
struct AnalyzeReport {
    eta: f64,
    size: usize,
    members: Vec<Pattern>,
    min_tree_cost: f64,
    beyond_guaranteed: Vec<Pattern>,
    #[serde(flatten)]
    result: LreResult,
}

fn run_lre(ctx: &Context, game: &dyn LreGame) -> Result<(LreResult, f64), CliError> {
    lre::ensure_analytic(&ctx.criteria(game.players()))?;
    let eta = ctx.eta();
    Ok((lre::compute_lre(game, eta)?, eta))
}

pub fn analyze(ctx: &Context) -> Result<(), CliError> {
    let game = ctx.game()?;
    let g = game.lre();
    let (result, eta) = run_lre(ctx, g)?;
    match ctx.args.format {
        Format::Json => {
            let report = AnalyzeReport {
                eta,
                size: result.lre_set.len(),
                members: result.lre_set.iter().map(|&p| pattern(g, p)).collect(),
                min_tree_cost: result.min_tree_cost,
                beyond_guaranteed: result.beyond_guaranteed.iter().map(|&p| pattern(g, p)).collect(),
                result,
            };
            ctx.sink.emit("analyze.json", &output::json(&report))
        }
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                rule: BehavioralRule,
                level: usize,
                quantity: String,
                tree_cost: f64,
                bounded_edges: usize,
                lre: bool,
            }
            let rows: Vec<Row> = result
                .root_costs
                .iter()
                .map(|r| Row {
                    rule: r.root.rule,
                    level: r.root.level,
                    quantity: g.level_value(r.root.level).to_string(),
                    tree_cost: r.cost,
                    bounded_edges: r.bounded_edges,
                    lre: result.lre_set.contains(&r.root),
                })
                .collect();
            ctx.sink.emit("root_costs.csv", &output::csv(&rows)?)
        }
        Format::Dot => {
            let graph = lre::build_resistances(g, eta)?;
            ctx.sink.file("resistances.dot", &graph.to_dot(g))?;
            ctx.sink.emit("trees.dot", &lre::trees_dot(&result, g))
        }
    }
}

// ----- simulate -----

#[derive(Serialize)]
struct OccupancyRow {
    epsilon: f64,
    label: String,
    rule: BehavioralRule,
    level: usize,
    quantity: String,
    mean: f64,
    std_error: f64,
}

#[derive(Serialize)]
struct SweepPoint {
    epsilon: f64,
    periods: u64,
    replications: usize,
    predicted_mass: Option<f64>,
    predicted_std_error: Option<f64>,
    occupancy: Vec<OccupancyRow>,
}

#[derive(Serialize)]
struct SimulateReport {
    seed: u64,
    eta: f64,
    predicted: Option<Vec<Pattern>>,
    prediction_note: Option<String>,
    sweep: Vec<SweepPoint>,
}

fn occupancy_rows(game: &dyn StageGame, occ: &Occupancy) -> Vec<OccupancyRow> {
    occ.entries()
        .into_iter()
        .map(|e| {
            let p = pattern(game, e.pattern);
            OccupancyRow {
                epsilon: occ.epsilon,
                label: p.label,
                rule: e.pattern.rule,
                level: e.pattern.level,
                quantity: p.quantity.decimal,
                mean: e.mean,
                std_error: e.std_error,
            }
        })
        .collect()
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let game = ctx.game()?;
    let g = game.lre();
    let config = ctx.revision(g.players())?;
    config.validate(g)?;
    let sim = ctx.config.simulation.as_ref().ok_or_else(|| CliError::Config("simulation required".into()))?;
    let controls = sim.controls(ctx.args.seed);
    controls.validate()?;
    let sweep: Vec<f64> = ctx
        .args
        .epsilon_sweep
        .clone()
        .or_else(|| sim.epsilon_sweep.clone())
        .unwrap_or_else(|| vec![config.noise.epsilon]);
    if sweep.iter().any(|&e| e <= 0.0) {
        return Err(cournot_lre::Error::Precondition("simulation needs epsilon > 0".into()).into());
    }
    let eta = config.noise.eta;
    let (predicted, prediction_note) = if config.all_satisfy_sf() {
        match lre::compute_lre(g, eta) {
            Ok(r) => (Some(r.lre_set), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, Some("some criterion lacks survival of the fittest; no analytic prediction".into()))
    };
    let mut points = Vec::new();
    for &eps in &sweep {
        let cfg = RevisionConfig { noise: config.noise.with_epsilon(eps), ..config.clone() };
        let occ = estimate_stationary(g, &cfg, &controls, &sim.initial)?;
        let mass = predicted.as_ref().map(|p| occ.mass(p));
        points.push(SweepPoint {
            epsilon: eps,
            periods: controls.periods,
            replications: controls.replications,
            predicted_mass: mass.map(|m| m.0),
            predicted_std_error: mass.map(|m| m.1),
            occupancy: occupancy_rows(g, &occ),
        });
    }
    if let Some(periods) = sim.trajectory_periods {
        if ctx.sink.has_dir() {
            let mut rng = replication_rng(controls.seed, 0);
            let cfg = RevisionConfig { noise: config.noise.with_epsilon(sweep[0]), ..config.clone() };
            let rows = simulate_trajectory(g, &cfg, &sim.initial, periods, &mut rng)?;
            ctx.sink.file("trajectory.csv", &output::csv(&rows)?)?;
        } else {
            eprintln!("note: trajectory_periods is set but no output directory; trajectory not written");
        }
    }
    let report = SimulateReport {
        seed: controls.seed,
        eta,
        predicted: predicted.map(|p| p.iter().map(|&x| pattern(g, x)).collect()),
        prediction_note,
        sweep: points,
    };
    match ctx.args.format {
        Format::Json => ctx.sink.emit("simulate.json", &output::json(&report)),
        Format::Csv => {
            let rows: Vec<&OccupancyRow> = report.sweep.iter().flat_map(|p| &p.occupancy).collect();
            ctx.sink.emit("occupancy.csv", &output::csv(&rows)?)
        }
        Format::Dot => Err(unsupported(Format::Dot, "simulate")),
    }
}

// ----- verify -----

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed, detail: detail.into() }
}

fn failed(name: &str, e: impl std::fmt::Display) -> Check {
    check(name, false, e.to_string())
}

#[derive(Serialize)]
struct VerifyReport {
    passed: bool,
    checks: Vec<Check>,
}

fn model_checks(ctx: &Context, m: &OligopolyModel, out: &mut Vec<Check>) {
    let s = verify_strategic_substitutes(m);
    out.push(check(
        "strategic_substitutes",
        s.passed,
        match s.counterexample {
            Some([q1, q2, t1, t2]) => format!("counterexample q1={q1} q2={q2} Q1={t1} Q2={t2}"),
            None => format!("{} comparisons", s.checked_pairs),
        },
    ));
    if let Err(e) = m.benchmarks() {
        out.push(failed("benchmarks", e));
        return;
    }
    match verify_walrasian_advantage(m) {
        Ok(r) => out.push(check(
            "walrasian_advantage",
            r.passed,
            format!("{} cases, min margin {}", r.checked, r.min_margin),
        )),
        Err(e) => out.push(failed("walrasian_advantage", e)),
    }
    match verify_delta_properties(m) {
        Ok(v) => out.extend(v.into_iter().map(|p| check(p.name, p.passed, p.detail))),
        Err(e) => out.push(failed("delta_properties", e)),
    }
    match lre::verify_radius_walras(m) {
        Ok(r) => out.push(check("walrasian_radius", r.passed, r.violations.first().cloned().unwrap_or_default())),
        Err(e) => out.push(failed("walrasian_radius", e)),
    }
    lre_checks(ctx, "lre", m, out);
    if let Some(d) = &ctx.config.dynamics {
        match lre::window_bound(m) {
            Ok(w) => out.push(match w.required_memory {
                Some(need) => {
                    check("memory_window", d.memory as u64 >= need, format!("memory {} vs required {need}", d.memory))
                }
                None => check("memory_window", false, "no memory length lets a lone best responder lead"),
            }),
            Err(e) => out.push(failed("memory_window", e)),
        }
    }
}

/// Tree analysis at `η = 1` and at the configured `η > 1`, each cross-checked
/// against its closed form inside `compute_lre`.
fn lre_checks(ctx: &Context, prefix: &str, g: &dyn LreGame, out: &mut Vec<Check>) {
    if let Err(e) = lre::ensure_analytic(&ctx.criteria(g.players())) {
        out.push(check(format!("{prefix}_analytic"), true, format!("skipped: {e}")));
        return;
    }
    let mut etas = vec![1.0, ctx.eta()];
    if etas[1] == 1.0 {
        etas[1] = 2.0;
    }
    for eta in etas {
        let name = format!("{prefix}_eta_{eta}");
        match lre::compute_lre(g, eta) {
            Ok(r) => out.push(check(
                name,
                true,
                format!("{} members, tree cost {}, closed form {:?}", r.lre_set.len(), r.min_tree_cost, r.closed_form),
            )),
            Err(e) => out.push(failed(&name, e)),
        }
    }
}

fn criterion_checks(ctx: &Context, n: usize, out: &mut Vec<Check>) {
    let mut criteria = vec![
        CriterionSpec::ImitateBestMax,
        CriterionSpec::ImitateBestMaxSampling { sample_size: 2 },
        CriterionSpec::Experimental,
        CriterionSpec::ImitateIfBetter,
    ];
    for c in ctx.criteria(n) {
        if !criteria.contains(&c) {
            criteria.push(c);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed());
    for c in criteria {
        let nb = check_no_birth(&c, PRINCIPLE_TRIALS, &mut rng);
        out.push(check(
            format!("no_birth[{}]", c.name()),
            nb.passed(),
            nb.first_violation.unwrap_or_else(|| format!("{} trials", nb.trials)),
        ));
        let sf = check_survival_of_fittest(&c, PRINCIPLE_TRIALS, &mut rng);
        let observed = sf.passed();
        out.push(check(
            format!("survival_of_fittest[{}]", c.name()),
            observed == c.satisfies_sf(),
            format!(
                "{} draws, {} violating fixtures; declared {}",
                sf.trials,
                sf.violations,
                if c.satisfies_sf() { "compliant" } else { "non-compliant" }
            ),
        ));
    }
}

fn aggregative_checks(ctx: &Context, g: &AggregativeGame, out: &mut Vec<Check>) {
    let q = verify_quasi_submodularity(g);
    out.push(check(
        "quasi_submodularity",
        q.passed,
        match &q.counterexample {
            Some(c) => format!("{} fails at s={:?}, t={:?}", c.implication, c.strategies, c.aggregates),
            None => format!("{} strategy pairs x {} aggregates", q.strategy_pairs, q.aggregates),
        },
    ));
    match compute_ats(g) {
        Ok(a) => {
            out.push(check(
                "ats",
                !q.passed || a.is_unique,
                format!("s* = {}, candidates {:?}", a.value, a.candidates),
            ));
            out.push(check(
                "ats_advantage",
                a.relative_advantage.passed,
                format!("{} margins, min {}", a.relative_advantage.margins.len(), a.relative_advantage.min_margin),
            ));
        }
        Err(e) => out.push(failed("ats", e)),
    }
    match g.nash_strategy() {
        Ok(k) => out.push(check("aggregative_nash", true, format!("s^N = {}", g.strategies()[k]))),
        Err(e) => out.push(failed("aggregative_nash", e)),
    }
    if q.passed {
        lre_checks(ctx, "aggregative_lre", g, out);
    }
}

pub fn verify(ctx: &Context) -> Result<(), CliError> {
    let mut checks = Vec::new();
    let mut n = None;
    if ctx.config.model.is_some() {
        let m = ctx.model()?;
        n = Some(m.n());
        model_checks(ctx, &m, &mut checks);
    }
    if ctx.config.aggregative.is_some() {
        let g = ctx.aggregative_game()?;
        n.get_or_insert(g.n());
        aggregative_checks(ctx, &g, &mut checks);
    }
    let Some(n) = n else {
        return Err(CliError::Config("model or aggregative required".into()));
    };
    criterion_checks(ctx, n, &mut checks);
    let oracle = arborescence::cross_check_random(ORACLE_GRAPHS, 6, ctx.seed());
    checks.push(check(
        "arborescence_oracle",
        oracle.mismatches == 0,
        format!("{} graphs, {} roots, {} mismatches", oracle.graphs, oracle.roots, oracle.mismatches),
    ));
    let passed = checks.iter().all(|c| c.passed);
    let report = VerifyReport { passed, checks };
    match ctx.args.format {
        Format::Json => ctx.sink.emit("verify.json", &output::json(&report))?,
        Format::Csv => ctx.sink.emit("verify.csv", &output::csv(&report.checks)?)?,
        Format::Dot => return Err(unsupported(Format::Dot, "verify")),
    }
    if passed {
        Ok(())
    } else {
        let names: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(CliError::Check(names.join(", ")))
    }
}

// ----- aggregative -----

#[derive(Serialize)]
struct AggregativeReport {
    n: usize,
    strategies: usize,
    reachable_aggregates: usize,
    quasi_submodularity: cournot_lre::aggregative::QuasiSubmodularityReport,
    ats: Option<cournot_lre::aggregative::AtsResult>,
    ats_quantity: Option<Quantity>,
    ats_error: Option<String>,
    nash: Option<Quantity>,
    nash_error: Option<String>,
    lre: Option<Vec<Pattern>>,
    beyond_guaranteed: Option<Vec<Pattern>>,
    lre_note: Option<String>,
}

pub fn aggregative(ctx: &Context) -> Result<(), CliError> {
    let g = ctx.aggregative_game()?;
    let qsm = verify_quasi_submodularity(&g);
    let (ats, ats_error) = match compute_ats(&g) {
        Ok(a) => (Some(a), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (nash, nash_error) = match g.nash_strategy() {
        Ok(k) => (Some(Quantity::new(g.strategies()[k])), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let analysed = lre::ensure_analytic(&ctx.criteria(g.n())).and_then(|_| lre::compute_lre(&g, ctx.eta()));
    let (lre_set, beyond, lre_note) = match analysed {
        Ok(r) => (
            Some(r.lre_set.iter().map(|&p| pattern(&g, p)).collect()),
            Some(r.beyond_guaranteed.iter().map(|&p| pattern(&g, p)).collect()),
            Some(format!("eta = {}, closed form {:?}", r.eta, r.closed_form)),
        ),
        Err(e) => (None, None, Some(e.to_string())),
    };
    let report = AggregativeReport {
        n: g.n(),
        strategies: g.strategies().len(),
        reachable_aggregates: g.reachable_aggregates().len(),
        ats_quantity: ats.as_ref().map(|a| a.value.into()),
        quasi_submodularity: qsm,
        ats,
        ats_error,
        nash,
        nash_error,
        lre: lre_set,
        beyond_guaranteed: beyond,
        lre_note,
    };
    match ctx.args.format {
        Format::Json => ctx.sink.emit("aggregative.json", &output::json(&report)),
        Format::Csv => {
            let margins = report.ats.as_ref().map(|a| a.relative_advantage.margins.clone()).unwrap_or_default();
            ctx.sink.emit("ats_margins.csv", &output::csv(&margins)?)
        }
        Format::Dot => Err(unsupported(Format::Dot, "aggregative")),
    }
}
