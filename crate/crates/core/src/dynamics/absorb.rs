use rand::RngCore;
use serde::Serialize;

use super::{step, IndustryState, RevisionConfig};
use crate::error::{Error, Result};
use crate::game::{AbsorbingSet, StageGame};
use crate::rules::BehavioralRule;

/// Whether `mon(level, rule)` is absorbing for the unperturbed chain: any
/// imitation pattern is, a best-response pattern only at a strict symmetric
/// fixed point of the best reply.
pub fn is_absorbing_pattern<G: StageGame + ?Sized>(game: &G, pattern: AbsorbingSet) -> bool {
    match pattern.rule {
        BehavioralRule::Imitation => true,
        BehavioralRule::BestResponse => {
            let profile = vec![pattern.level; game.players()];
            let mut br = Vec::new();
            game.best_responses(0, &profile, &mut br);
            br == [pattern.level]
        }
    }
}

/// The absorbing pattern the state sits in, if its whole M-window is one
/// monomorphic profile that is absorbing.
pub fn absorbing_pattern<G: StageGame + ?Sized>(game: &G, state: &IndustryState) -> Option<AbsorbingSet> {
    let pattern = state.monomorphic()?;
    let held = state
        .history
        .iter()
        .all(|r| r.levels.iter().all(|&k| k == pattern.level) && r.rules.iter().all(|&p| p == pattern.rule));
    (held && is_absorbing_pattern(game, pattern)).then_some(pattern)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AbsorptionOutcome {
    pub pattern: AbsorbingSet,
    /// Periods stepped before the pattern was confirmed.
    pub periods: u64,
}

/// Steps the unperturbed chain until it is absorbed.
pub fn find_absorbing<G: StageGame + ?Sized>(
    state: &mut IndustryState,
    game: &G,
    config: &RevisionConfig,
    max_periods: u64,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<AbsorptionOutcome> {
    if config.noise.epsilon != 0.0 {
        return Err(Error::Precondition("absorption is defined for the unperturbed chain (epsilon = 0)".into()));
    }
    for t in 0..=max_periods {
        if let Some(pattern) = absorbing_pattern(game, state) {
            return Ok(AbsorptionOutcome { pattern, periods: t });
        }
        if t < max_periods {
            step(state, game, config, rng);
        }
    }
    Err(Error::NotAbsorbed(max_periods))
}
