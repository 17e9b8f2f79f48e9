//! Quitting games played with a bounded lottery as the public signal.

pub mod block;
pub mod model;
pub mod play;
pub mod sunspot;

pub use block::{block_lottery_report, build_block_profile, horizon_blocks, horizon_monte_carlo, perturb_pure, BlockOptions, BlockProfile, Horizon, HorizonMethod};
pub use model::{Action, GameSpec, QuittingGame};
pub use play::{
    deviation_family, deviation_gain, estimate_payoff, estimate_stationary_payoff, play_block, play_stationary, quit_sweep,
    Deviation, DeviationReport, Deviator, PayoffEstimate, PlayResult, StationaryProfile,
};
pub use sunspot::{DesignationRule, SunspotProfile, SunspotSpec};
