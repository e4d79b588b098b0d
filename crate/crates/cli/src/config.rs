//! JSON run configuration and its translation into library types.

use std::collections::BTreeMap;
use std::path::Path;

use cournot_lre::dynamics::{InitialCondition, MistakeLaw, NoiseConfig, RevisionConfig, SimulationControls};
use cournot_lre::{
    AggregativeGame, Aggregator, Cost, CriterionSpec, Demand, OligopolyModel, PayoffKernel, QuantityGrid,
};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSpec>,
    pub aggregative: Option<AggregativeSpec>,
    pub dynamics: Option<DynamicsSpec>,
    pub simulation: Option<SimulationSpec>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    pub demand: DemandSpec,
    pub cost: CostSpec,
    pub grid: GridSpec,
    pub snap_tolerance: Option<f64>,
    /// Skip the structural assumptions; benchmarks may then be unavailable.
    #[serde(default = "yes")]
    pub check_assumptions: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandSpec {
    Linear { intercept: f64, slope: f64 },
    Table { points: Vec<(f64, f64)> },
}

impl DemandSpec {
    fn build(&self) -> Demand {
        match self {
            DemandSpec::Linear { intercept, slope } => Demand::Linear { intercept: *intercept, slope: *slope },
            DemandSpec::Table { points } => Demand::Table { points: points.clone() },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    Power { coeff: f64, exponent: f64 },
    Polynomial { coeffs: Vec<f64> },
}

impl CostSpec {
    fn build(&self) -> Cost {
        match self {
            CostSpec::Power { coeff, exponent } => Cost::Power { coeff: *coeff, exponent: *exponent },
            CostSpec::Polynomial { coeffs } => Cost::Polynomial { coeffs: coeffs.clone() },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub step: f64,
    /// Number of grid points `|Γ|`, zero included.
    pub levels: usize,
}

impl ModelSpec {
    pub fn build(&self) -> cournot_lre::Result<OligopolyModel> {
        if self.grid.levels < 2 {
            return Err(cournot_lre::Error::InvalidModel("grid needs at least two points".into()));
        }
        let grid = QuantityGrid::new(self.grid.step, self.grid.levels - 1)?;
        let (demand, cost) = (self.demand.build(), self.cost.build());
        match (self.check_assumptions, self.snap_tolerance) {
            (false, _) => OligopolyModel::unchecked(self.n, demand, cost, grid),
            (true, Some(tol)) => OligopolyModel::with_snap_tolerance(self.n, demand, cost, grid, tol),
            (true, None) => OligopolyModel::new(self.n, demand, cost, grid),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregativeSpec {
    pub n: usize,
    pub strategies: Vec<f64>,
    pub aggregator: AggregatorSpec,
    pub payoff: PayoffSpec,
    /// Dynamics and analysis use this game instead of `model` when set.
    #[serde(default)]
    pub primary: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AggregatorSpec {
    Named(NamedAggregator),
    Table(TableAggregator),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedAggregator {
    Sum,
    Mean,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename = "table")]
pub struct TableAggregator {
    /// One entry per profile; profiles are strategy values in any order.
    pub entries: Vec<TableEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub profile: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffSpec {
    Cournot {
        demand: DemandSpec,
        cost: CostSpec,
    },
    /// `rows[s][j]`: payoff of the `s`-th strategy at `aggregates[j]`.
    Table {
        aggregates: Vec<f64>,
        rows: Vec<Vec<f64>>,
    },
}

impl AggregativeSpec {
    pub fn build(&self) -> cournot_lre::Result<AggregativeGame> {
        let index = |x: f64| {
            self.strategies.iter().position(|&s| (s - x).abs() <= 1e-9 * 1f64.max(s.abs())).ok_or_else(|| {
                cournot_lre::Error::InvalidGame(format!("aggregator table uses {x}, which is not a strategy"))
            })
        };
        let aggregator = match &self.aggregator {
            AggregatorSpec::Named(NamedAggregator::Sum) => Aggregator::Sum,
            AggregatorSpec::Named(NamedAggregator::Mean) => Aggregator::Mean,
            AggregatorSpec::Table(t) => {
                let mut table = BTreeMap::new();
                for e in &t.entries {
                    let mut key = e.profile.iter().map(|&x| index(x)).collect::<cournot_lre::Result<Vec<_>>>()?;
                    key.sort_unstable();
                    if table.insert(key, e.value).is_some() {
                        return Err(cournot_lre::Error::InvalidGame(format!(
                            "aggregator table lists profile {:?} twice",
                            e.profile
                        )));
                    }
                }
                Aggregator::Table(table)
            }
        };
        let kernel = match &self.payoff {
            PayoffSpec::Cournot { demand, cost } => {
                PayoffKernel::Cournot { demand: demand.build(), cost: cost.build() }
            }
            PayoffSpec::Table { aggregates, rows } => {
                PayoffKernel::Table { aggregates: aggregates.clone(), rows: rows.clone() }
            }
        };
        AggregativeGame::new(self.n, self.strategies.clone(), aggregator, kernel)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CriteriaSpec {
    Uniform(CriterionSpec),
    PerFirm(Vec<CriterionSpec>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    pub memory: usize,
    pub gamma: f64,
    pub theta: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_criteria")]
    pub criteria: CriteriaSpec,
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default)]
    pub action_mistake_law: MistakeLaw,
    #[serde(default)]
    pub rule_mistake_law: MistakeLaw,
}

fn default_eta() -> f64 {
    2.0
}

fn default_discount() -> f64 {
    1.0
}

fn default_criteria() -> CriteriaSpec {
    CriteriaSpec::Uniform(CriterionSpec::ImitateBestMax)
}

impl DynamicsSpec {
    pub fn build(&self, n: usize, eta: Option<f64>) -> RevisionConfig {
        let criteria = match &self.criteria {
            CriteriaSpec::Uniform(c) => vec![*c; n],
            CriteriaSpec::PerFirm(v) => v.clone(),
        };
        let noise = NoiseConfig {
            gamma: self.gamma,
            theta: self.theta,
            epsilon: self.epsilon,
            eta: eta.unwrap_or(self.eta),
            action_mistake_law: self.action_mistake_law.clone(),
            rule_mistake_law: self.rule_mistake_law.clone(),
        };
        RevisionConfig { criteria, noise, memory: self.memory, discount: self.discount }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub periods: u64,
    #[serde(default)]
    pub burn_in: u64,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial: InitialCondition,
    pub epsilon_sweep: Option<Vec<f64>>,
    /// Periods of a single trajectory to write as CSV.
    pub trajectory_periods: Option<u64>,
}

impl SimulationSpec {
    pub fn controls(&self, seed: Option<u64>) -> SimulationControls {
        SimulationControls {
            periods: self.periods,
            burn_in: self.burn_in,
            replications: self.replications,
            seed: seed.unwrap_or(self.seed),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Overrides `dynamics.eta` for the tree analysis.
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<String>,
}

/// Field path of a serde error in dotted form, or the empty string at the root.
fn dotted(path: &serde_path_to_error::Path) -> String {
    let s = path.to_string();
    if s == "." {
        String::new()
    } else {
        s
    }
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = dotted(e.path());
        let inner = e.inner().to_string();
        // "missing field `n` at line 1 column 4" becomes "model.n required".
        let message = match inner.strip_prefix("missing field `").and_then(|r| r.split_once('`')) {
            Some((field, _)) if path.is_empty() => format!("{field} required"),
            Some((field, _)) => format!("{path}.{field} required"),
            None if path.is_empty() => inner,
            None => format!("{path}: {inner}"),
        };
        CliError::Config(message)
    })
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}
