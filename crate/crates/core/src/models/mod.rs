//! Independent cascade and linear threshold models as rule sets plus strategies.

mod config;
mod influence;
mod rules;
mod setup;

pub use config::{ConfigError, ConfigFile, Distribution, InitSection, ModelConfig, ModelKind, ModelSection, PartialConfig, RngSection};
pub use influence::{add_influence, joint_influence, remove_influence, replace_influence, InfluenceError};
pub use rules::{ic_rules, lt_rules, IC_STRATEGY, LT_STRATEGY};
pub use setup::{reload_probabilities, resolve_seeds, setup_simulation, SetupError};

use crate::rewrite::RewriteRule;

/// Attribute names of the propagation schema.
pub mod attrs {
    pub const ACTIVE: &str = "active";
    pub const VISITED: &str = "visited";
    pub const SIGMA: &str = "sigma";
    pub const THETA: &str = "theta";
    pub const JOINT_INFLUENCE: &str = "jointInfluence";
    pub const MARKED: &str = "marked";
    pub const P_I2O: &str = "p_i2o";
    pub const P_O2I: &str = "p_o2i";
    pub const P_PREV_I2O: &str = "p_prev_i2o";
    pub const P_PREV_O2I: &str = "p_prev_o2i";
}

impl ModelKind {
    pub fn rules(self) -> Vec<RewriteRule> {
        match self {
            ModelKind::Ic => ic_rules(),
            ModelKind::Lt => lt_rules(),
        }
    }

    /// The model's strategy text; `strict` activates on `sigma > 1` instead of `sigma >= 1`.
    pub fn strategy_text(self, strict: bool) -> String {
        let text = match self {
            ModelKind::Ic => IC_STRATEGY,
            ModelKind::Lt => LT_STRATEGY,
        };
        if strict {
            text.replace(r#"sigma>="1""#, r#"sigma>"1""#)
        } else {
            text.to_owned()
        }
    }
}
