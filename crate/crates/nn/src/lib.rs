//! p4 group convolutions, anti-aliased pooling, polar pooling and the
//! actor-critic global policy networks built from them.

pub mod checkpoint;
mod error;
pub mod layers;
pub mod network;
pub mod p4;
pub mod params;
pub mod sgpp;

pub use checkpoint::{load_checkpoint, load_checkpoint_as, save_checkpoint};
pub use error::NnError;
pub use layers::{blur_pool, fully_connected, max_pool, orientation_pool, Conv2d, GroupConv, Init, LiftingConv, Linear, OrientationPool};
pub use network::{
    lattice_to_cell, sample_categorical, sample_goal, GlobalPolicyNetwork, GoalLikelihoodMap, ModelVariant, NetConfig,
    PolicyOutput, PolicyState,
};
pub use p4::{p4_rotate, rot90_spatial, shift_spatial, P4Element};
pub use params::{Bound, ParamId, ParamStore};
pub use sgpp::{cartesian_to_polar, circumferential_average, global_average_pool, sgpp, PolarGrid};
