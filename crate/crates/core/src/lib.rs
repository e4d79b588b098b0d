//! Evolutionary Cournot competition with endogenous switching between best
//! response and imitation: game primitives, the perturbed revision process,
//! and long-run equilibria computed from resistance trees and by simulation.

// `!(x < y)` is used deliberately so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregative;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod lre;
pub mod numeric;
pub mod oligopoly;
pub mod rules;

pub use aggregative::{AggregativeGame, Aggregator, PayoffKernel};
pub use error::{Error, Result};
pub use game::{AbsorbingSet, Anchors, ClosedForm, LreGame, StageGame};
pub use oligopoly::{BenchmarkQuantities, Cost, Demand, OligopolyModel, QuantityGrid};
pub use rules::{BehavioralRule, CriterionSpec};
