//! Market models: finite scenario-tree families carrying several transition
//! laws at once, and seeded simulation of drift/volatility-uncertain Ito
//! dynamics.

pub mod sde;
pub mod tree;

pub use sde::{
    simulate_paths, ConstantPolicy, Control, ControlPolicy, PathDigest, UncertaintySpec,
    UniformVolPolicy, VolSet,
};
pub use tree::{ConditionedFamily, ModelLaw, PasteKernel, TreeFamily, TreeNode, TreeSpec};
