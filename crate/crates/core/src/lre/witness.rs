//! Simulation certificates for single edges and the memory needed for a
//! lone best responder to beat the Walrasian incumbents.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{GraphEdge, Provenance, TransitionGraph};
use crate::dynamics::{apply_plan, find_absorbing, ActionPlan, FirmPlan, IndustryState, RevisionConfig, RulePlan};
use crate::error::{Error, Result};
use crate::game::{AbsorbingSet, StageGame};
use crate::oligopoly::OligopolyModel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessOutcome {
    pub from: AbsorbingSet,
    pub to: AbsorbingSet,
    pub reached: bool,
    /// Seeds tried, the successful one included.
    pub attempts: usize,
    /// Where each failed attempt was absorbed instead.
    pub missed: Vec<AbsorbingSet>,
}

/// Starts in `edge.from`, injects the mistake the edge's cost accounts for
/// in one scripted period, then lets the unperturbed chain run. Retries with
/// fresh seeds until the target is reached or `attempts` are used up.
pub fn certify_edge<G: StageGame + ?Sized>(
    game: &G,
    graph: &TransitionGraph,
    edge: &GraphEdge,
    config: &RevisionConfig,
    attempts: usize,
    seed: u64,
) -> Result<WitnessOutcome> {
    let (from, to) = (graph.nodes[edge.from], graph.nodes[edge.to]);
    let n = game.players();
    let mut plan = vec![FirmPlan::IDLE; n];
    plan[0] = match edge.provenance {
        Provenance::OneActionMistake => FirmPlan { rule: RulePlan::Keep, action: ActionPlan::Mistake(to.level) },
        Provenance::OneRuleMistake => FirmPlan { rule: RulePlan::Mistake(to.rule), action: ActionPlan::Keep },
        Provenance::LowerBound => {
            return Err(Error::Precondition("only edges with an exact cost have a one-mistake witness".into()))
        }
    };
    let unperturbed = RevisionConfig { noise: config.noise.with_epsilon(0.0), ..config.clone() };
    unperturbed.validate(game)?;
    let mut missed = Vec::new();
    for k in 0..attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut state = IndustryState::new(game, &vec![from.level; n], &vec![from.rule; n], config.memory)?;
        apply_plan(&mut state, game, &unperturbed, &plan, &mut rng);
        let out = find_absorbing(&mut state, game, &unperturbed, 1_000_000, &mut rng)?;
        if out.pattern == to {
            return Ok(WitnessOutcome { from, to, reached: true, attempts: k + 1, missed });
        }
        missed.push(out.pattern);
    }
    Ok(WitnessOutcome { from, to, reached: false, attempts, missed })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowBound {
    pub walrasian: f64,
    /// Best reply to `n − 1` rivals at the Walrasian quantity.
    pub deviation: f64,
    pub walrasian_profit: f64,
    /// Profit of the best replying firm.
    pub deviator_profit: f64,
    /// Profit of a Walrasian firm facing the best replier.
    pub incumbent_profit: f64,
    /// Smallest `x ≥ 1` with the deviator's profit above the incumbents'
    /// average over `x` calm periods and one disturbed one.
    pub calm_periods: Option<u64>,
    /// Memory length at which that average applies, `x + 1`.
    pub required_memory: Option<u64>,
}

const MAX_CALM_PERIODS: u64 = 1_000_000;

/// How long the payoff memory must be for a single firm that switched to
/// best response at `mon(q^W, IM)` to look better than the incumbents.
pub fn window_bound(model: &OligopolyModel) -> Result<WindowBound> {
    let b = model.benchmarks()?;
    let (n, qw) = (model.n() as f64, b.walrasian.value);
    let others = (n - 1.0) * qw;
    let deviation = model
        .best_response(others)
        .first()
        .map(|&k| model.grid().value(k))
        .ok_or_else(|| Error::Domain("no best reply on the grid".into()))?;
    let walrasian_profit = model.profit(qw, n * qw)?;
    let deviator_profit = model.profit(deviation, others + deviation)?;
    let incumbent_profit = model.profit(qw, others + deviation)?;
    let calm_periods = (1..=MAX_CALM_PERIODS)
        .find(|&x| deviator_profit > (x as f64 * walrasian_profit + incumbent_profit) / (x as f64 + 1.0));
    Ok(WindowBound {
        walrasian: qw,
        deviation,
        walrasian_profit,
        deviator_profit,
        incumbent_profit,
        calm_periods,
        required_memory: calm_periods.map(|x| x + 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::NoiseConfig;
    use crate::lre::build_resistances;
    use crate::oligopoly::fixtures::four_firm;
    use crate::rules::CriterionSpec;

    #[test]
    fn window_bound_four_firm() {
        let w = window_bound(&four_firm()).unwrap();
        assert_eq!(w.deviation, 12.0);
        assert_eq!(w.walrasian_profit, 162.0);
        assert_eq!(w.deviator_profit, 216.0);
        assert_eq!(w.incumbent_profit, 270.0);
        assert_eq!(w.calm_periods, Some(2));
        assert_eq!(w.required_memory, Some(3));
    }

    #[test]
    fn exact_edges_have_witnesses() {
        let m = four_firm();
        let g = build_resistances(&m, 2.0).unwrap();
        let config = RevisionConfig::uniform(4, CriterionSpec::ImitateBestMax, NoiseConfig::new(0.5, 0.5, 0.0, 2.0), 3);
        let im = AbsorbingSet::imitation;
        let br = AbsorbingSet::best_response(15);
        for (from, to) in [(im(15), im(18)), (im(30), im(18)), (im(18), br), (br, im(15)), (im(40), br)] {
            let e = g.edge(from, to).unwrap();
            let w = certify_edge(&m, &g, e, &config, 200, 7).unwrap();
            assert!(w.reached, "{from} -> {to}: missed {:?}", w.missed);
        }
        let lb = g.edge(im(18), im(17)).unwrap();
        assert!(certify_edge(&m, &g, lb, &config, 1, 0).is_err());
    }
}
