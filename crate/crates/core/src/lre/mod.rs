//! Long-run equilibria from resistance trees over the absorbing sets.
//!
//! Nodes are every imitation pattern `mon(q, IM)` plus the best-response
//! pattern at the Nash quantity. Edge costs count mistakes: action mistakes
//! cost 1, rule mistakes cost η. Transitions whose exact cost is not known get
//! a lower bound; a long-run equilibrium whose cheapest tree needs such an
//! edge is reported as unsound rather than returned.

pub mod arborescence;
mod witness;

pub use witness::{certify_edge, window_bound, WindowBound, WitnessOutcome};

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use self::arborescence::{min_cost_arborescence, Edge};
use crate::error::{Error, Result};
use crate::game::{ties, AbsorbingSet, Anchors, ClosedForm, LreGame, StageGame};
use crate::rules::CriterionSpec;

/// Mistake counts of a transition; its cost is `actions + η · rules`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Resistance {
    pub actions: u32,
    pub rules: u32,
}

impl Resistance {
    pub const ONE_ACTION: Resistance = Resistance { actions: 1, rules: 0 };
    pub const ONE_RULE: Resistance = Resistance { actions: 0, rules: 1 };

    pub fn value(self, eta: f64) -> f64 {
        self.actions as f64 + eta * self.rules as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// One action mistake into the deviator's advantage set.
    OneActionMistake,
    /// One rule mistake followed by an unperturbed path.
    OneRuleMistake,
    /// Not characterized; the cost is a lower bound.
    LowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    pub resistance: Resistance,
    pub provenance: Provenance,
}

impl GraphEdge {
    pub fn is_exact(&self) -> bool {
        self.provenance != Provenance::LowerBound
    }
}

/// Absorbing sets and the resistance of every ordered pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionGraph {
    pub eta: f64,
    pub nodes: Vec<AbsorbingSet>,
    pub anchors: Anchors,
    /// All ordered pairs, sorted by `(from, to)`.
    pub edges: Vec<GraphEdge>,
}

impl TransitionGraph {
    pub fn node_index(&self, node: AbsorbingSet) -> Option<usize> {
        self.nodes.iter().position(|&x| x == node)
    }

    pub fn edge(&self, from: AbsorbingSet, to: AbsorbingSet) -> Option<&GraphEdge> {
        let (f, t) = (self.node_index(from)?, self.node_index(to)?);
        let z = self.nodes.len();
        if f == t {
            return None;
        }
        Some(&self.edges[f * (z - 1) + if t > f { t - 1 } else { t }])
    }

    pub fn to_dot(&self, game: &dyn StageGame) -> String {
        let mut s = String::from("digraph resistances {\n  rankdir=LR;\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "  n{i} [label=\"mon({},{})\"];", fmt_num(game.level_value(n.level)), n.rule);
        }
        for e in &self.edges {
            let style = if e.is_exact() { "solid" } else { "dashed" };
            let label = fmt_num(e.resistance.value(self.eta));
            let bound = if e.is_exact() { "" } else { ">=" };
            let _ = writeln!(s, "  n{} -> n{} [label=\"{bound}{label}\", style={style}];", e.from, e.to);
        }
        s.push_str("}\n");
        s
    }
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Every imitation pattern plus best response at the Nash strategy.
pub fn enumerate_absorbing<G: LreGame + ?Sized>(game: &G) -> Result<Vec<AbsorbingSet>> {
    let anchors = game.anchors()?;
    let mut nodes: Vec<AbsorbingSet> = (0..game.levels()).map(AbsorbingSet::imitation).collect();
    nodes.push(AbsorbingSet::best_response(anchors.nash));
    Ok(nodes)
}

/// Whether one firm deviating from `from` to `to` earns at least as much as
/// the others, ties judged with the payoff tolerance.
fn deviation_weakly_better<G: StageGame + ?Sized>(game: &G, from: usize, to: usize, pay: &mut [f64]) -> bool {
    let mut profile = vec![from; game.players()];
    profile[0] = to;
    game.payoffs(&profile, pay);
    pay[0] > pay[1] || ties(pay[0], pay[1])
}

/// Grid part of the advantage set of every level, by exhaustive evaluation.
pub fn advantage_matrix<G: StageGame + ?Sized>(game: &G) -> Vec<Vec<bool>> {
    let levels = game.levels();
    (0..levels)
        .into_par_iter()
        .map(|q| {
            let mut pay = vec![0.0; game.players()];
            (0..levels).map(|t| deviation_weakly_better(game, q, t, &mut pay)).collect()
        })
        .collect()
}

fn check_eta(eta: f64) -> Result<()> {
    if eta >= 1.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("eta must be a finite number >= 1, got {eta}")))
    }
}

pub fn build_resistances<G: LreGame + ?Sized>(game: &G, eta: f64) -> Result<TransitionGraph> {
    check_eta(eta)?;
    let anchors = game.anchors()?;
    let nodes = enumerate_absorbing(game)?;
    let levels = game.levels();
    let br = levels;
    let member = advantage_matrix(game);
    // Cheapest conceivable cost of a transition outside the characterized ones.
    let unknown_imitation =
        if eta > 1.0 && eta < 2.0 { Resistance::ONE_RULE } else { Resistance { actions: 2, rules: 0 } };
    let mut edges = Vec::with_capacity(nodes.len() * (nodes.len() - 1));
    for from in 0..nodes.len() {
        for to in 0..nodes.len() {
            if from == to {
                continue;
            }
            let (resistance, provenance) = if from == br {
                if to == anchors.nash {
                    (Resistance::ONE_RULE, Provenance::OneRuleMistake)
                } else {
                    (Resistance { actions: 1, rules: 1 }, Provenance::LowerBound)
                }
            } else if to == br {
                (Resistance::ONE_RULE, Provenance::OneRuleMistake)
            } else if member[from][to] {
                (Resistance::ONE_ACTION, Provenance::OneActionMistake)
            } else {
                (unknown_imitation, Provenance::LowerBound)
            };
            edges.push(GraphEdge { from, to, resistance, provenance });
        }
    }
    Ok(TransitionGraph { eta, nodes, anchors, edges })
}

/// `η = num / den` exactly, `den` a power of two.
fn dyadic(eta: f64) -> (i128, i128) {
    let mut den: i128 = 1;
    let mut x = eta;
    while x.fract() != 0.0 {
        x *= 2.0;
        den *= 2;
    }
    (x as i128, den)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeEdge {
    pub from: AbsorbingSet,
    pub to: AbsorbingSet,
    pub cost: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessTree {
    pub root: AbsorbingSet,
    pub cost: f64,
    pub edges: Vec<TreeEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootCost {
    pub root: AbsorbingSet,
    pub cost: f64,
    /// Lower-bound edges in the cheapest tree found for this root.
    pub bounded_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ClosedFormCheck {
    Matched,
    /// All guaranteed members found; extras are listed separately.
    ContainsGuaranteed,
    Skipped {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LreResult {
    pub eta: f64,
    pub lre_set: Vec<AbsorbingSet>,
    pub min_tree_cost: f64,
    pub root_costs: Vec<RootCost>,
    pub witness_trees: Vec<WitnessTree>,
    pub bounds: Option<(f64, f64)>,
    /// Members closed under one-mistake transitions from the guaranteed roots
    /// (only when `η = 1`).
    pub surgery_closure: Option<Vec<AbsorbingSet>>,
    pub closed_form: ClosedFormCheck,
    /// Members beyond a closed form that only guarantees a subset.
    pub beyond_guaranteed: Vec<AbsorbingSet>,
}

/// Minimum-cost trees for every root, cross-checked against the one-mistake
/// closure (for `η = 1`) and the game's closed form.
pub fn compute_lre<G: LreGame + ?Sized>(game: &G, eta: f64) -> Result<LreResult> {
    let graph = build_resistances(game, eta)?;
    let z = graph.nodes.len();
    let (num, den) = dyadic(eta);
    let scale = z as i128 + 1;
    // Integer cost in units of 1/den, then one extra unit per lower-bound
    // edge: equal-cost trees prefer exact edges, and the count never reaches
    // one cost unit because a tree has fewer than `scale` edges.
    let weights: Vec<Edge<i128>> = graph
        .edges
        .iter()
        .map(|e| {
            let cost = e.resistance.actions as i128 * den + e.resistance.rules as i128 * num;
            Edge { from: e.from, to: e.to, weight: cost * scale + i128::from(!e.is_exact()) }
        })
        .collect();
    let trees =
        (0..z).into_par_iter().map(|root| min_cost_arborescence(z, &weights, root)).collect::<Result<Vec<_>>>()?;

    let units = |w: i128| w / scale;
    let bounded = |w: i128| (w % scale) as usize;
    let to_cost = |u: i128| u as f64 / den as f64;
    let best = trees.iter().map(|t| units(t.cost)).min().expect("at least two nodes");
    let root_costs: Vec<RootCost> = trees
        .iter()
        .map(|t| RootCost { root: graph.nodes[t.root], cost: to_cost(units(t.cost)), bounded_edges: bounded(t.cost) })
        .collect();
    let winners: Vec<usize> = (0..z).filter(|&r| units(trees[r].cost) == best).collect();
    if let Some(&r) = winners.iter().find(|&&r| bounded(trees[r].cost) > 0) {
        return Err(Error::Unsound(format!(
            "cheapest {}-tree needs {} edge(s) whose cost is only a lower bound",
            graph.nodes[r],
            bounded(trees[r].cost)
        )));
    }
    let lre_set: Vec<AbsorbingSet> = winners.iter().map(|&r| graph.nodes[r]).collect();
    let witness_trees = winners
        .iter()
        .map(|&r| WitnessTree {
            root: graph.nodes[r],
            cost: to_cost(best),
            edges: trees[r]
                .edge_indices()
                .map(|k| {
                    let e = &graph.edges[k];
                    TreeEdge {
                        from: graph.nodes[e.from],
                        to: graph.nodes[e.to],
                        cost: e.resistance.value(eta),
                        provenance: e.provenance,
                    }
                })
                .collect(),
        })
        .collect();

    let surgery_closure = if eta == 1.0 {
        let closure = one_mistake_closure(&graph);
        let tree_set: BTreeSet<AbsorbingSet> = lre_set.iter().copied().collect();
        let closed: BTreeSet<AbsorbingSet> = closure.iter().copied().collect();
        if tree_set != closed {
            let only_tree: Vec<String> = tree_set.difference(&closed).map(|x| x.to_string()).collect();
            let only_closure: Vec<String> = closed.difference(&tree_set).map(|x| x.to_string()).collect();
            return Err(Error::Discrepancy(format!(
                "tree search and one-mistake closure disagree: only in trees {only_tree:?}, only in closure {only_closure:?}"
            )));
        }
        Some(closure)
    } else {
        None
    };

    let mut beyond_guaranteed = Vec::new();
    let closed_form = match game.closed_form(eta) {
        ClosedForm::Exact(expected) => {
            compare_sets(&root_costs, &lre_set, &expected, to_cost(best))?;
            ClosedFormCheck::Matched
        }
        ClosedForm::Superset(guaranteed) => {
            if let Some(missing) = guaranteed.iter().find(|g| !lre_set.contains(g)) {
                return Err(Error::Discrepancy(format!(
                    "guaranteed member {missing} not found; its tree costs {} vs minimum {}",
                    cost_of(&root_costs, *missing),
                    to_cost(best)
                )));
            }
            beyond_guaranteed = lre_set.iter().filter(|x| !guaranteed.contains(x)).copied().collect();
            ClosedFormCheck::ContainsGuaranteed
        }
        ClosedForm::NotApplicable(reason) => ClosedFormCheck::Skipped { reason },
    };

    Ok(LreResult {
        eta,
        lre_set,
        min_tree_cost: to_cost(best),
        root_costs,
        witness_trees,
        bounds: if eta == 1.0 { game.bounds() } else { None },
        surgery_closure,
        closed_form,
        beyond_guaranteed,
    })
}

fn cost_of(root_costs: &[RootCost], node: AbsorbingSet) -> String {
    root_costs.iter().find(|r| r.root == node).map_or("n/a".into(), |r| r.cost.to_string())
}

fn compare_sets(root_costs: &[RootCost], found: &[AbsorbingSet], expected: &[AbsorbingSet], best: f64) -> Result<()> {
    let found: BTreeSet<_> = found.iter().copied().collect();
    let expected: BTreeSet<_> = expected.iter().copied().collect();
    if found == expected {
        return Ok(());
    }
    let offender = found.symmetric_difference(&expected).next().copied().expect("sets differ");
    Err(Error::Discrepancy(format!(
        "closed form {} {offender}: its tree costs {} vs minimum {best}",
        if expected.contains(&offender) { "includes" } else { "excludes" },
        cost_of(root_costs, offender)
    )))
}

/// Nodes reachable from the guaranteed roots along exact edges of cost 1.
/// Each such step turns a minimum tree for one root into one for the next.
fn one_mistake_closure(graph: &TransitionGraph) -> Vec<AbsorbingSet> {
    let z = graph.nodes.len();
    let br = z - 1;
    let seeds = [br, graph.anchors.nash, graph.anchors.imitation];
    let mut seen = vec![false; z];
    let mut queue: Vec<usize> = seeds.to_vec();
    for &s in &seeds {
        seen[s] = true;
    }
    while let Some(v) = queue.pop() {
        for e in graph.edges.iter().filter(|e| e.from == v) {
            if e.is_exact() && e.resistance.value(graph.eta) == 1.0 && !seen[e.to] {
                seen[e.to] = true;
                queue.push(e.to);
            }
        }
    }
    (0..z).filter(|&v| seen[v]).map(|v| graph.nodes[v]).collect()
}

/// Analytic mode relies on every criterion giving all top-performing rules a
/// chance; refuse otherwise.
pub fn ensure_analytic(criteria: &[CriterionSpec]) -> Result<()> {
    match criteria.iter().find(|c| !c.satisfies_sf()) {
        Some(c) => Err(Error::Precondition(format!(
            "criterion {} does not give every best-performing rule a positive chance; \
             the tree analysis does not apply, use `simulate` instead",
            c.name()
        ))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusReport {
    pub passed: bool,
    /// No single deviation from the imitation attractor is weakly profitable.
    pub attractor_isolated: bool,
    /// From every other level, a deviation to the attractor is weakly profitable.
    pub attractor_reachable: bool,
    pub violations: Vec<String>,
}

/// Exhaustive check that the imitation attractor cannot be left with one
/// action mistake but can be reached with one from anywhere.
pub fn verify_radius_walras<G: LreGame + ?Sized>(game: &G) -> Result<RadiusReport> {
    let w = game.anchors()?.imitation;
    let mut pay = vec![0.0; game.players()];
    let mut violations = Vec::new();
    for t in (0..game.levels()).filter(|&t| t != w) {
        if deviation_weakly_better(game, w, t, &mut pay) {
            violations.push(format!("deviation from the attractor to level {t} is weakly profitable"));
        }
    }
    let isolated = violations.is_empty();
    let before = violations.len();
    for q in (0..game.levels()).filter(|&q| q != w) {
        if !deviation_weakly_better(game, q, w, &mut pay) {
            violations.push(format!("deviation from level {q} to the attractor is not profitable"));
        }
    }
    let reachable = violations.len() == before;
    Ok(RadiusReport {
        passed: violations.is_empty(),
        attractor_isolated: isolated,
        attractor_reachable: reachable,
        violations,
    })
}

/// DOT rendering of the witness trees, one cluster per root.
pub fn trees_dot(result: &LreResult, game: &dyn StageGame) -> String {
    let label = |x: &AbsorbingSet| format!("mon({},{})", fmt_num(game.level_value(x.level)), x.rule);
    let mut s = String::from("digraph witness_trees {\n");
    for (i, t) in result.witness_trees.iter().enumerate() {
        let _ =
            writeln!(s, "  subgraph cluster_{i} {{\n    label=\"root {} cost {}\";", label(&t.root), fmt_num(t.cost));
        for e in &t.edges {
            let _ = writeln!(
                s,
                "    \"t{i} {}\" -> \"t{i} {}\" [label=\"{}\"];",
                label(&e.from),
                label(&e.to),
                fmt_num(e.cost)
            );
        }
        s.push_str("  }\n");
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oligopoly::fixtures::{duopoly, four_firm};

    #[test]
    fn node_enumeration() {
        let nodes = enumerate_absorbing(&four_firm()).unwrap();
        assert_eq!(nodes.len(), 92);
        assert_eq!(nodes[91], AbsorbingSet::best_response(15));
    }

    #[test]
    fn four_firm_edges() {
        let g = build_resistances(&four_firm(), 2.0).unwrap();
        let im = AbsorbingSet::imitation;
        let br = AbsorbingSet::best_response(15);
        let e = g.edge(im(15), im(25)).unwrap();
        assert_eq!((e.resistance, e.provenance), (Resistance::ONE_ACTION, Provenance::OneActionMistake));
        let e = g.edge(im(18), im(17)).unwrap();
        assert_eq!(e.provenance, Provenance::LowerBound);
        assert!(e.resistance.value(2.0) >= 2.0);
        let e = g.edge(br, im(15)).unwrap();
        assert_eq!(e.resistance.value(2.0), 2.0);
        assert_eq!(e.provenance, Provenance::OneRuleMistake);
        assert_eq!(g.edge(im(18), br).unwrap().resistance.value(2.0), 2.0);
        assert!(g.edges.iter().all(|e| e.resistance.value(2.0) >= 1.0));
        assert_eq!(g.edges.len(), 92 * 91);
        for e in &g.edges {
            assert_eq!(g.edge(g.nodes[e.from], g.nodes[e.to]), Some(e));
        }
    }

    #[test]
    fn four_firm_lre_eta2() {
        let r = compute_lre(&four_firm(), 2.0).unwrap();
        let set: BTreeSet<_> = r.lre_set.iter().copied().collect();
        assert_eq!(set, [AbsorbingSet::best_response(15), AbsorbingSet::imitation(18)].into_iter().collect());
        assert_eq!(r.min_tree_cost, 92.0);
        assert_eq!(r.closed_form, ClosedFormCheck::Matched);
        for t in &r.witness_trees {
            assert_eq!(t.edges.len(), 91);
            assert!((t.edges.iter().map(|e| e.cost).sum::<f64>() - 92.0).abs() < 1e-12);
        }
    }

    #[test]
    fn four_firm_lre_eta1() {
        let r = compute_lre(&four_firm(), 1.0).unwrap();
        let mut expected: BTreeSet<_> = (0..=60).map(AbsorbingSet::imitation).collect();
        expected.insert(AbsorbingSet::best_response(15));
        assert_eq!(r.lre_set.iter().copied().collect::<BTreeSet<_>>(), expected);
        assert_eq!(r.min_tree_cost, 91.0);
        assert_eq!(r.bounds.map(|b| b.0), Some(0.0));
    }

    #[test]
    fn duopoly_lre_eta1() {
        let m = duopoly();
        let r = compute_lre(&m, 1.0).unwrap();
        let mut expected: BTreeSet<_> = (9..=15).map(AbsorbingSet::imitation).collect();
        expected.insert(AbsorbingSet::best_response(9));
        assert_eq!(r.lre_set.iter().copied().collect::<BTreeSet<_>>(), expected);
    }

    #[test]
    fn lre_is_constant_above_one() {
        let m = four_firm();
        let sets: Vec<Vec<AbsorbingSet>> =
            [1.5, 2.0, 5.0].iter().map(|&e| compute_lre(&m, e).unwrap().lre_set).collect();
        assert!(sets.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn dyadic_eta() {
        assert_eq!(dyadic(2.0), (2, 1));
        assert_eq!(dyadic(1.5), (3, 2));
        assert_eq!(dyadic(1.125), (9, 8));
    }

    #[test]
    fn radius_walras() {
        let r = verify_radius_walras(&four_firm()).unwrap();
        assert!(r.passed, "{:?}", r.violations);
        assert!(crate::oligopoly::delta(&four_firm(), 15.0, 18.0) > 0.0);
    }

    #[test]
    fn refuses_non_sf_criteria() {
        assert!(ensure_analytic(&[CriterionSpec::ImitateBestMax, CriterionSpec::Experimental]).is_ok());
        let err = ensure_analytic(&[CriterionSpec::ImitateBestMax, CriterionSpec::ImitateIfBetter]).unwrap_err();
        assert!(err.to_string().contains("simulate"));
    }
}
