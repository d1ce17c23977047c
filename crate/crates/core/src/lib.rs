//! Port-graph rewriting engine with built-in propagation models.
//!
//! A simulation is a [`portgraph::LocatedGraph`] rewritten by the rules of a
//! [`strategy::RuleLibrary`] under a [`strategy::StrategyProgram`]; every
//! application is committed to a [`trace::DerivationTree`].

pub mod models;
pub mod netgen;
pub mod portgraph;
pub mod rewrite;
pub mod scalar;
pub mod session;
pub mod strategy;
pub mod trace;

pub use scalar::{Scalar, Tolerance};

/// Random generator used for every stochastic operation of a run.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Influence arithmetic in double precision.
pub mod influence64 {
    use crate::models::{self, InfluenceError};

    pub type Real = f64;

    pub fn joint_influence(ps: impl IntoIterator<Item = Real>) -> Real {
        models::joint_influence(ps)
    }

    pub fn remove_influence(p_set: Real, p: Real) -> Result<Real, InfluenceError> {
        models::remove_influence(p_set, p)
    }

    pub fn add_influence(p_set: Real, p: Real) -> Real {
        models::add_influence(p_set, p)
    }

    pub fn replace_influence(p_set: Real, p_old: Real, p_new: Real) -> Result<Real, InfluenceError> {
        models::replace_influence(p_set, p_old, p_new)
    }
}

/// Tolerance on 64-bit reals (the width of graph properties).
pub type Tolerance64 = Tolerance<f64>;
/// Tolerance on 32-bit reals.
pub type Tolerance32 = Tolerance<f32>;
