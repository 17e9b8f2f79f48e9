//! Jointly controlled lotteries driven by two biased coins.
//!
//! Two devices each emit a stream of letters. A mechanism reads both streams
//! and stops with an outcome drawn from a target distribution. The bounded
//! mechanism ([`strong`]) stops within a fixed number of stages and tolerates
//! one arbitrarily faulty device up to a small error. The unbounded mechanism
//! ([`weak`]) is exact under honest play, never lets a single faulty device
//! raise the probability of any outcome, and points at the faulty device when
//! it fails to stop. The [`game`] module uses the bounded mechanism as a
//! public correlation device inside quitting games.

pub mod adversary;
pub mod calibration;
pub mod error;
pub mod exec;
pub mod game;
pub mod normal;
pub mod rng;
pub mod stats;
pub mod strategy;
pub mod strong;
pub mod types;
pub mod weak;

pub use adversary::{parse_strategy, AdversarySuite, ConstantAdversary, GreedyPush, SharedStrategy, Stall};
pub use calibration::{calibrate_threshold, CalibrationReport, CalibrationSettings};
pub use error::{Error, Result};
pub use rng::{DeviceStreams, SeedTree};
pub use stats::{hoeffding_margin, linf_distance, one_sided_excess, EmpiricalDistribution};
pub use strategy::{sample_stage, DeviceStrategy, Honest, MechanismView, StageView};
pub use strong::{IntervalPartition, ScoreTable, StrongMechanism, StrongRun, StrongSample};
pub use types::{
    binarize, BinaryCoinPair, BinaryPartition, Device, Letter, LetterPair, OutcomeSet, ProbabilityVector,
    TerminalStatus, Transcript,
};
pub use weak::{build_successor, detect_fault, DetectionVerdict, SuccessorMap, Verdict, WeakMechanism, WeakRun};
