use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{step, IndustryState, RevisionConfig};
use crate::error::{Error, Result};
use crate::game::{AbsorbingSet, StageGame};
use crate::rules::BehavioralRule;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialCondition {
    /// Levels and rules drawn uniformly and independently per firm.
    #[default]
    Random,
    Profile {
        levels: Vec<usize>,
        rules: Vec<BehavioralRule>,
    },
}

impl InitialCondition {
    pub fn build<G: StageGame + ?Sized>(
        &self,
        game: &G,
        memory: usize,
        rng: &mut (impl RngCore + ?Sized),
    ) -> Result<IndustryState> {
        match self {
            InitialCondition::Random => Ok(random_initial_state(game, memory, rng)),
            InitialCondition::Profile { levels, rules } => IndustryState::new(game, levels, rules, memory),
        }
    }
}

pub fn random_initial_state<G: StageGame + ?Sized>(
    game: &G,
    memory: usize,
    rng: &mut (impl RngCore + ?Sized),
) -> IndustryState {
    let n = game.players();
    let levels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..game.levels())).collect();
    let rules: Vec<BehavioralRule> = (0..n).map(|_| BehavioralRule::ALL[rng.gen_range(0..2)]).collect();
    IndustryState::new(game, &levels, &rules, memory).expect("levels drawn from the grid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationControls {
    pub periods: u64,
    pub burn_in: u64,
    pub replications: usize,
    pub seed: u64,
}

impl SimulationControls {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if self.periods == 0 {
            return Err(Error::InvalidConfig("periods must be at least 1".into()));
        }
        Ok(())
    }
}

/// The random stream of one replication: the master seed selects the key,
/// the replication index the stream.
pub fn replication_rng(seed: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyEntry {
    pub pattern: AbsorbingSet,
    pub mean: f64,
    pub std_error: f64,
}

/// Fraction of measured periods spent in each monomorphic pattern, one row
/// per replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    pub epsilon: f64,
    pub periods: u64,
    levels: usize,
    per_replication: Vec<Vec<f64>>,
}

fn slot(p: AbsorbingSet) -> usize {
    2 * p.level + p.rule.index()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

impl Occupancy {
    pub fn replications(&self) -> usize {
        self.per_replication.len()
    }

    /// Mean occupancy and standard error of a set of patterns, computed on
    /// the per-replication sums.
    pub fn mass(&self, patterns: &[AbsorbingSet]) -> (f64, f64) {
        let sums: Vec<f64> = self
            .per_replication
            .iter()
            .map(|row| patterns.iter().filter(|p| p.level < self.levels).map(|&p| row[slot(p)]).sum())
            .collect();
        mean_se(&sums)
    }

    /// Every pattern visited in some replication, in pattern order.
    pub fn entries(&self) -> Vec<OccupancyEntry> {
        let mut out = Vec::new();
        for level in 0..self.levels {
            for rule in BehavioralRule::ALL {
                let pattern = AbsorbingSet { rule, level };
                let xs: Vec<f64> = self.per_replication.iter().map(|row| row[slot(pattern)]).collect();
                if xs.iter().any(|&x| x > 0.0) {
                    let (mean, std_error) = mean_se(&xs);
                    out.push(OccupancyEntry { pattern, mean, std_error });
                }
            }
        }
        out.sort_by_key(|e| e.pattern);
        out
    }
}

/// Long-run occupancy of the perturbed chain, replications in parallel.
pub fn estimate_stationary<G: StageGame + ?Sized>(
    game: &G,
    config: &RevisionConfig,
    controls: &SimulationControls,
    initial: &InitialCondition,
) -> Result<Occupancy> {
    config.validate(game)?;
    controls.validate()?;
    if config.noise.epsilon <= 0.0 {
        return Err(Error::Precondition("stationary estimation needs epsilon > 0".into()));
    }
    let levels = game.levels();
    let per_replication = (0..controls.replications)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let mut rng = replication_rng(controls.seed, rep);
            let mut state = initial.build(game, config.memory, &mut rng)?;
            for _ in 0..controls.burn_in {
                step(&mut state, game, config, &mut rng);
            }
            let mut counts = vec![0u64; 2 * levels];
            for _ in 0..controls.periods {
                step(&mut state, game, config, &mut rng);
                if let Some(p) = state.monomorphic() {
                    counts[slot(p)] += 1;
                }
            }
            Ok(counts.into_iter().map(|c| c as f64 / controls.periods as f64).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Occupancy { epsilon: config.noise.epsilon, periods: controls.periods, levels, per_replication })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub period: u64,
    pub firm: usize,
    pub level: usize,
    pub quantity: f64,
    pub rule: BehavioralRule,
    pub profit: f64,
    pub fitness: f64,
    pub tenure: usize,
}

/// One firm-period row per firm, for the first `periods` periods after the
/// warm-up.
pub fn simulate_trajectory<G: StageGame + ?Sized>(
    game: &G,
    config: &RevisionConfig,
    initial: &InitialCondition,
    periods: u64,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<Vec<TrajectoryRow>> {
    config.validate(game)?;
    let mut state = initial.build(game, config.memory, rng)?;
    let mut rows = Vec::with_capacity(periods as usize * game.players());
    for _ in 0..periods {
        step(&mut state, game, config, rng);
        for (i, f) in state.firms.iter().enumerate() {
            rows.push(TrajectoryRow {
                period: state.period,
                firm: i,
                level: f.level,
                quantity: game.level_value(f.level),
                rule: f.rule,
                profit: state.last_profits[i],
                fitness: f.fitness(config.memory, config.discount),
                tenure: f.clamped_tenure(config.memory),
            });
        }
    }
    Ok(rows)
}
