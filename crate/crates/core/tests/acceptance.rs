//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the report is always
//! printed.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cournot_lre::aggregative::{compute_ats, verify_ats_advantage, verify_quasi_submodularity};
use cournot_lre::dynamics::{
    estimate_stationary, exact_chain_oracle, find_absorbing, is_absorbing_pattern, random_initial_state, IndustryState,
    InitialCondition, NoiseConfig, RevisionConfig, SimulationControls, DEFAULT_STATE_CAP,
};
use cournot_lre::lre::arborescence::{min_cost_arborescence, Edge};
use cournot_lre::lre::compute_lre;
use cournot_lre::oligopoly::{compute_benchmarks, delta, h_of, l_of, lre_bounds};
use cournot_lre::rules::{check_no_birth, check_survival_of_fittest};
use cournot_lre::{
    AbsorbingSet, AggregativeGame, BehavioralRule, Cost, CriterionSpec, Demand, OligopolyModel, QuantityGrid, StageGame,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BENCH_TOL: f64 = 1e-9;
const ROOT_TOL: f64 = 1e-8;
const MARGIN_TOL: f64 = 1e-9;
const FAST: Duration = Duration::from_secs(1);
const LRE_BUDGET: Duration = Duration::from_secs(30);
const SIM_BUDGET: Duration = Duration::from_secs(300);
const ABSORB_STARTS: usize = 1_000;
const BR_STARTS: usize = 200;
const ORACLE_GRAPHS: usize = 500;
const ORACLE_MAX_NODES: usize = 6;
const PRINCIPLE_TRIALS: usize = 100_000;
const MAX_PERIODS: u64 = 1_000_000;
const SE_MULTIPLE: f64 = 3.0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn market(n: usize, step: f64, top: usize) -> OligopolyModel {
    OligopolyModel::new(n, linear(), quadratic(), QuantityGrid::new(step, top).unwrap()).unwrap()
}

fn linear() -> Demand {
    Demand::Linear { intercept: 90.0, slope: 1.0 }
}

fn quadratic() -> Cost {
    Cost::Power { coeff: 0.5, exponent: 2.0 }
}

fn example() -> OligopolyModel {
    market(4, 1.0, 90)
}

fn noise(epsilon: f64) -> NoiseConfig {
    NoiseConfig::new(0.5, 0.5, epsilon, 2.0)
}

fn im(q: usize) -> AbsorbingSet {
    AbsorbingSet::imitation(q)
}

fn br(q: usize) -> AbsorbingSet {
    AbsorbingSet::best_response(q)
}

fn set(xs: impl IntoIterator<Item = AbsorbingSet>) -> BTreeSet<AbsorbingSet> {
    xs.into_iter().collect()
}

fn benchmarks() -> Outcome {
    let start = Instant::now();
    let b = compute_benchmarks(&example()).unwrap();
    let elapsed = start.elapsed();
    let errs = [(b.nash.raw - 15.0).abs(), (b.walrasian.raw - 18.0).abs(), (b.collusive.raw - 10.0).abs()];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    outcome(
        worst < BENCH_TOL && elapsed < FAST,
        format!(
            "q^N={}, q^W={}, q^C={}, max error {worst:e}, {elapsed:?}",
            b.nash.raw, b.walrasian.raw, b.collusive.raw
        ),
    )
}

fn advantage_roots() -> Outcome {
    let m = example();
    let start = Instant::now();
    let values = [
        ("h(15)", h_of(&m, 15.0).unwrap(), 25.0),
        ("l(25)", l_of(&m, 25.0).unwrap(), 5.0 / 3.0),
        ("h(2)", h_of(&m, 2.0).unwrap(), 166.0 / 3.0),
        ("h(0)", h_of(&m, 0.0).unwrap(), 60.0),
    ];
    let d = delta(&m, 55.0, 0.0);
    let elapsed = start.elapsed();
    let worst = values.iter().map(|(_, got, want)| (got - want).abs()).fold(0.0, f64::max);
    let listed: Vec<String> = values.iter().map(|(k, v, _)| format!("{k}={v}")).collect();
    outcome(
        worst < ROOT_TOL && d > 0.0 && elapsed < FAST,
        format!("{}, delta(55,0)={d}, max error {worst:e}, {elapsed:?}", listed.join(", ")),
    )
}

fn example_lre() -> Outcome {
    let m = example();
    let start = Instant::now();
    let two = compute_lre(&m, 2.0).unwrap();
    let one = compute_lre(&m, 1.0).unwrap();
    let elapsed = start.elapsed();
    let want_two = set([im(18), br(15)]);
    let want_one = set((0..=60).map(im).chain([br(15)]));
    let ok_two = set(two.lre_set.iter().copied()) == want_two;
    let ok_one = set(one.lre_set.iter().copied()) == want_one;
    outcome(
        ok_two && ok_one && elapsed < LRE_BUDGET,
        format!(
            "eta=2: {} members (match {ok_two}), eta=1: {} members (match {ok_one}), {elapsed:?}",
            two.lre_set.len(),
            one.lre_set.len()
        ),
    )
}

fn duopoly_bounds() -> Outcome {
    let m = market(2, 2.5, 36);
    // With one rival at q the deviator's advantage is
    // (q' - q)(90 - 1.5 (q + q')), so h(q) = 60 - q; the Nash quantity is 22.5.
    let (lo, hi) = (22.5, 60.0 - 22.5);
    let b = lre_bounds(&m).unwrap();
    let bounds_ok = (b.lower - lo).abs() < ROOT_TOL && (b.upper - hi).abs() < ROOT_TOL;
    let nash_level = 9;
    let want = set((0..m.grid().len())
        .filter(|&k| {
            let q = k as f64 * 2.5;
            q >= lo && q <= hi
        })
        .map(im)
        .chain([br(nash_level)]));
    let got = set(compute_lre(&m, 1.0).unwrap().lre_set);
    outcome(
        bounds_ok && got == want,
        format!("bounds ({}, {}), {} members, expected {}", b.lower, b.upper, got.len(), want.len()),
    )
}

/// Absorbing patterns of the unperturbed chain are imitation monomorphisms
/// at any quantity or best-response monomorphisms at a best reply to itself.
fn is_valid_absorption(m: &OligopolyModel, state: &IndustryState, p: AbsorbingSet) -> bool {
    let held =
        state.history.iter().all(|r| r.levels.iter().all(|&k| k == p.level) && r.rules.iter().all(|&x| x == p.rule));
    let fixed = match p.rule {
        BehavioralRule::Imitation => true,
        BehavioralRule::BestResponse => {
            let q = m.grid().value(p.level);
            m.best_response((m.n() - 1) as f64 * q) == vec![p.level]
        }
    };
    held && fixed
}

fn absorption() -> Outcome {
    let m = example();
    let config = RevisionConfig::uniform(4, CriterionSpec::ImitateBestMax, noise(0.0), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = 0;
    let mut first = None;
    for _ in 0..ABSORB_STARTS {
        let mut state = random_initial_state(&m, config.memory, &mut rng);
        match find_absorbing(&mut state, &m, &config, MAX_PERIODS, &mut rng) {
            Ok(o) if is_valid_absorption(&m, &state, o.pattern) => {}
            other => {
                bad += 1;
                first.get_or_insert(format!("{other:?}"));
            }
        }
    }
    outcome(
        bad == 0,
        format!(
            "{ABSORB_STARTS} starts, {bad} counterexamples{}",
            first.map(|f| format!(", first {f}")).unwrap_or_default()
        ),
    )
}

fn best_response_convergence() -> Outcome {
    let m = example();
    let config = RevisionConfig::uniform(4, CriterionSpec::ImitateBestMax, noise(0.0), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bad = 0;
    let mut periods = Vec::with_capacity(BR_STARTS);
    for _ in 0..BR_STARTS {
        let levels: Vec<usize> = (0..4).map(|_| rng.gen_range(0..m.levels())).collect();
        let mut state = IndustryState::new(&m, &levels, &[BehavioralRule::BestResponse; 4], 3).unwrap();
        match find_absorbing(&mut state, &m, &config, MAX_PERIODS, &mut rng) {
            Ok(o) if o.pattern == br(15) => periods.push(o.periods),
            _ => bad += 1,
        }
    }
    periods.sort_unstable();
    let median = periods.get(periods.len() / 2).copied().unwrap_or(u64::MAX);
    let limit = 10 * m.levels() as u64;
    outcome(
        bad == 0 && median < limit,
        format!("{BR_STARTS} starts, {bad} counterexamples, median {median} periods (limit {limit})"),
    )
}

fn walrasian_advantage() -> Outcome {
    let m = example();
    let (n, qw) = (4usize, 18.0);
    let mut min_margin = f64::INFINITY;
    let mut cases = 0;
    for k in 0..m.grid().len() {
        let q = k as f64;
        if q == qw {
            continue;
        }
        for j in 1..n {
            // Firms at q^W against firms at q share the price, so the gap is
            // (q^W - q)(p - (q^W + q) / 2).
            let p = (90.0 - j as f64 * qw - (n - j) as f64 * q).max(0.0);
            min_margin = min_margin.min((qw - q) * (p - (qw + q) / 2.0));
            cases += 1;
        }
    }
    outcome(min_margin > MARGIN_TOL, format!("{cases} cases, min margin {min_margin}"))
}

/// Cheapest in-arborescence by trying every out-edge choice.
fn exhaustive_tree(n: usize, edges: &[Edge<i64>], root: usize) -> Option<i64> {
    let out: Vec<Vec<usize>> = (0..n).map(|v| (0..edges.len()).filter(|&e| edges[e].from == v).collect()).collect();
    let movers: Vec<usize> = (0..n).filter(|&v| v != root).collect();
    let mut best = None;
    let mut choice = vec![0usize; movers.len()];
    if movers.iter().any(|&v| out[v].is_empty()) {
        return None;
    }
    loop {
        let succ = |v: usize| edges[out[v][choice[movers.iter().position(|&u| u == v).unwrap()]]].to;
        let reaches = movers.iter().all(|&v| {
            let mut x = v;
            for _ in 0..n {
                if x == root {
                    return true;
                }
                x = succ(x);
            }
            x == root
        });
        if reaches {
            let cost: i64 = movers.iter().enumerate().map(|(i, &v)| edges[out[v][choice[i]]].weight).sum();
            best = Some(best.map_or(cost, |b: i64| b.min(cost)));
        }
        let mut i = 0;
        loop {
            if i == movers.len() {
                return best;
            }
            choice[i] += 1;
            if choice[i] < out[movers[i]].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

fn arborescence_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut roots, mut mismatches) = (0, 0);
    for _ in 0..ORACLE_GRAPHS {
        let n = rng.gen_range(1..=ORACLE_MAX_NODES);
        let mut edges = Vec::new();
        for from in 0..n {
            for to in 0..n {
                if from != to && rng.gen_bool(0.6) {
                    edges.push(Edge { from, to, weight: rng.gen_range(1..=5i64) });
                }
            }
        }
        for root in 0..n {
            roots += 1;
            let fast = min_cost_arborescence(n, &edges, root).ok().map(|a| a.cost);
            if fast != exhaustive_tree(n, &edges, root) {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("{ORACLE_GRAPHS} graphs, {roots} roots, {mismatches} mismatches"))
}

fn simulation_consistency() -> Outcome {
    let m = market(2, 7.5, 6);
    let config = RevisionConfig::uniform(2, CriterionSpec::ImitateBestMax, noise(0.05), 3);
    let predicted = compute_lre(&m, 2.0).unwrap().lre_set;
    let expected = set([im(4), br(3)]);
    let controls = SimulationControls { periods: 1_000_000, burn_in: 10_000, replications: 8, seed: 9 };
    let sweep = [0.05, 0.02, 0.01];
    let start = Instant::now();
    let masses: Vec<(f64, f64)> = sweep
        .iter()
        .map(|&eps| {
            let c = RevisionConfig { noise: config.noise.with_epsilon(eps), ..config.clone() };
            estimate_stationary(&m, &c, &controls, &InitialCondition::Random).unwrap().mass(&predicted)
        })
        .collect();
    let elapsed = start.elapsed();
    let monotone = masses.windows(2).all(|w| w[1].0 >= w[0].0 - SE_MULTIPLE * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt());
    let at_005 = masses[0].0 >= 0.80;
    let at_001 = masses[2].0 >= 0.95;
    let listed: Vec<String> =
        sweep.iter().zip(&masses).map(|(e, (m, se))| format!("eps={e}: {m:.4}±{se:.4}")).collect();
    outcome(
        set(predicted.iter().copied()) == expected && at_005 && at_001 && monotone && elapsed < SIM_BUDGET,
        format!(
            "{}; >=0.80 at 0.05: {at_005}, >=0.95 at 0.01: {at_001}, monotone: {monotone}, {elapsed:?}",
            listed.join(", ")
        ),
    )
}

fn exact_chain() -> Outcome {
    let instances = [
        ("step 7.5, |G|=5, M=1", market(2, 7.5, 4), 1usize, 0.1),
        (
            "step 15, |G|=3, M=2",
            OligopolyModel::unchecked(2, linear(), quadratic(), QuantityGrid::new(15.0, 2).unwrap()).unwrap(),
            2,
            0.1,
        ),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, m, memory, eps) in instances {
        let config = RevisionConfig::uniform(2, CriterionSpec::ImitateBestMax, noise(eps), memory);
        let exact = exact_chain_oracle(&m, &config, DEFAULT_STATE_CAP).unwrap();
        let controls = SimulationControls { periods: 200_000, burn_in: 1_000, replications: 16, seed: 10 };
        let occ = estimate_stationary(&m, &config, &controls, &InitialCondition::Random).unwrap();
        let mut worst: f64 = 0.0;
        let patterns = (0..m.levels()).flat_map(|k| [im(k), br(k)]).filter(|&p| is_absorbing_pattern(&m, p));
        for p in patterns {
            let (mean, se) = occ.mass(&[p]);
            let z = (mean - exact.mass(&[p])).abs() / se;
            worst = worst.max(if z.is_nan() { 0.0 } else { z });
            passed &= z.is_nan() || z <= SE_MULTIPLE;
        }
        parts.push(format!("{name}: {} states, worst |z| {worst:.2}", exact.states));
    }
    outcome(passed, parts.join("; "))
}

fn aggregative_embedding() -> Outcome {
    let game = AggregativeGame::cournot(&example()).unwrap();
    let qsm = verify_quasi_submodularity(&game);
    let ats = compute_ats(&game).unwrap();
    let margins = verify_ats_advantage(&game, ats.strategy);
    let lre = set(compute_lre(&game, 2.0).unwrap().lre_set);
    let lre_ok = lre == set([im(18), br(15)]);
    outcome(
        qsm.passed && ats.value == 18.0 && margins.passed && margins.min_margin > 0.0 && lre_ok,
        format!(
            "QSM {}, ATS {}, {} margins min {}, LRE match {lre_ok}",
            qsm.passed,
            ats.value,
            margins.margins.len(),
            margins.min_margin
        ),
    )
}

fn rule_criteria() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut passed = true;
    let mut parts = Vec::new();
    let compliant = [
        CriterionSpec::ImitateBestMax,
        CriterionSpec::ImitateBestMaxSampling { sample_size: 2 },
        CriterionSpec::Experimental,
    ];
    for c in compliant {
        let nb = check_no_birth(&c, PRINCIPLE_TRIALS, &mut rng);
        let sf = check_survival_of_fittest(&c, PRINCIPLE_TRIALS, &mut rng);
        passed &= nb.passed() && sf.passed() && c.satisfies_sf();
        parts.push(format!("{}: NB {} SF {}", c.name(), nb.violations, sf.violations));
    }
    let iib = CriterionSpec::ImitateIfBetter;
    let nb = check_no_birth(&iib, PRINCIPLE_TRIALS, &mut rng);
    let sf = check_survival_of_fittest(&iib, PRINCIPLE_TRIALS, &mut rng);
    passed &= nb.passed() && !sf.passed() && !iib.satisfies_sf();
    parts.push(format!("{}: NB {} SF {} (flagged)", iib.name(), nb.violations, sf.violations));
    outcome(passed, parts.join(", "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("benchmark quantities", benchmarks),
        ("advantage roots", advantage_roots),
        ("four-firm LRE sets", example_lre),
        ("duopoly bounds and LRE", duopoly_bounds),
        ("absorption from random states", absorption),
        ("best-response convergence", best_response_convergence),
        ("Walrasian advantage", walrasian_advantage),
        ("arborescence oracle", arborescence_oracle),
        ("simulation vs analytics", simulation_consistency),
        ("exact chain vs Monte Carlo", exact_chain),
        ("aggregative embedding", aggregative_embedding),
        ("NB/SF classification", rule_criteria),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.passed);
        println!("criterion {:>2} {} {name}: {}", i + 1, if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
