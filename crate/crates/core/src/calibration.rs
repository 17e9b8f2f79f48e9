//! Empirical choice of the stopping threshold of the bounded mechanism.
//!
//! Thresholds are probed on a doubling schedule. A probe is accepted when the
//! honest run and every suite adversary, on either device, stay within
//! `target / 2 + margin` of the target distribution in L-infinity.

use indexmap::IndexMap;
use log::{debug, info};
use serde::Serialize;

use crate::adversary::{AdversarySuite, SharedStrategy};
use crate::error::{Error, Result};
use crate::exec::map_runs;
use crate::rng::SeedTree;
use crate::stats::{hoeffding_margin, linf_distance, EmpiricalDistribution};
use crate::strategy::{DeviceStrategy, Honest};
use crate::strong::StrongMechanism;
use crate::types::{BinaryCoinPair, ProbabilityVector};

/// Confidence level of the per-probe sampling margin.
pub const CALIBRATION_DELTA: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CalibrationSettings {
    /// First probed threshold; defaults to 16 times the honest expected
    /// squared score, i.e. about sixteen honest stages.
    pub start: Option<f64>,
    pub runs_per_probe: u64,
    pub max_probes: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self { start: None, runs_per_probe: 20_000, max_probes: 12 }
    }
}

/// Honest expected squared score, `prod sigma_i(a)` over both devices and letters.
pub fn honest_square_mean(coins: &BinaryCoinPair) -> f64 {
    coins.p1_alpha * (1.0 - coins.p1_alpha) * coins.p2_alpha * (1.0 - coins.p2_alpha)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Probe {
    pub threshold: f64,
    /// L-infinity distance per attack, keyed `honest` or `<device>:<name>`.
    pub distances: IndexMap<String, f64>,
    pub max_distance: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub epsilon: f64,
    pub runs_per_probe: u64,
    pub margin: f64,
    pub tolerance: f64,
    pub probes: Vec<Probe>,
    pub threshold: Option<f64>,
}

impl CalibrationReport {
    /// The accepted threshold, or a calibration failure.
    pub fn threshold(&self) -> Result<f64> {
        self.threshold.ok_or(Error::CalibrationFailed {
            probes: self.probes.len(),
            last_threshold: self.probes.last().map_or(f64::NAN, |p| p.threshold),
        })
    }
}

/// Empirical outcome distribution of `runs` seeded runs.
pub fn outcome_distribution(
    mechanism: &StrongMechanism,
    s1: &dyn DeviceStrategy,
    s2: &dyn DeviceStrategy,
    seeds: &SeedTree,
    runs: u64,
) -> EmpiricalDistribution {
    let outcomes = map_runs(runs, |r| {
        let mut streams = seeds.device_streams(r);
        mechanism.sample(s1, s2, &mut streams).outcome
    });
    EmpiricalDistribution::from_outcomes(mechanism.nu().outcomes().clone(), outcomes.into_iter().map(Some))
}

/// Every (name, device-1 strategy, device-2 strategy) combination tested.
pub fn attack_matrix(suite: &AdversarySuite) -> Vec<(String, SharedStrategy, SharedStrategy)> {
    let honest: SharedStrategy = std::sync::Arc::new(Honest);
    let mut out = vec![("honest".to_string(), honest.clone(), honest.clone())];
    for (name, s) in suite.members() {
        out.push((format!("device1:{name}"), s.clone(), honest.clone()));
        out.push((format!("device2:{name}"), honest.clone(), s.clone()));
    }
    out
}

/// Smallest probed threshold meeting the tolerance against the whole suite.
pub fn calibrate_threshold(
    coins: &BinaryCoinPair,
    nu: &ProbabilityVector,
    epsilon: f64,
    suite: &AdversarySuite,
    seeds: &SeedTree,
    settings: &CalibrationSettings,
) -> Result<CalibrationReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if settings.runs_per_probe == 0 || settings.max_probes == 0 {
        return Err(Error::InvalidArgument("calibration needs at least one run and one probe".into()));
    }
    let start = settings.start.unwrap_or(16.0 * honest_square_mean(coins));
    let margin = hoeffding_margin(settings.runs_per_probe, nu.len(), CALIBRATION_DELTA)?;
    let tolerance = epsilon / 2.0 + margin;
    let attacks = attack_matrix(suite);
    let mut report = CalibrationReport {
        epsilon,
        runs_per_probe: settings.runs_per_probe,
        margin,
        tolerance,
        probes: Vec::new(),
        threshold: None,
    };
    for k in 0..settings.max_probes {
        let threshold = start * 2f64.powi(k as i32);
        let mechanism = StrongMechanism::new(*coins, nu.clone(), threshold)?;
        let probe_seeds = seeds.child(&format!("probe{k}"));
        let mut distances = IndexMap::new();
        for (name, s1, s2) in &attacks {
            let e = outcome_distribution(&mechanism, s1.as_ref(), s2.as_ref(), &probe_seeds.child(name), settings.runs_per_probe);
            distances.insert(name.clone(), linf_distance(&e, nu)?);
        }
        let max_distance = distances.values().copied().fold(0.0, f64::max);
        // No distribution is farther than 1 from another, so epsilon >= 1 is met by anything.
        let accepted = max_distance <= tolerance || epsilon >= 1.0;
        debug!("probe {k}: C = {threshold}, max distance {max_distance:.5} (tolerance {tolerance:.5})");
        report.probes.push(Probe { threshold, distances, max_distance, accepted });
        if accepted {
            info!("calibrated threshold {threshold} after {} probes", k + 1);
            report.threshold = Some(threshold);
            break;
        }
    }
    Ok(report)
}
