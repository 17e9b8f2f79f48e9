//! Block profile: the public signal of a sunspot profile is replaced by a
//! bounded lottery run between players 1 and 2 on their own continue actions.
//!
//! Each block runs the lottery over `0` and the players, then plays one stage
//! in which the designated player (if any) quits with its quit probability.

use log::info;
use serde::Serialize;

use super::model::QuittingGame;
use super::sunspot::{DesignationRule, SunspotProfile};
use crate::adversary::AdversarySuite;
use crate::calibration::{
    calibrate_threshold, outcome_distribution, CalibrationReport, CalibrationSettings, CALIBRATION_DELTA,
};
use crate::error::{Error, Result};
use crate::rng::SeedTree;
use crate::stats::DistributionReport;
use crate::strategy::Honest;
use crate::strong::StrongMechanism;
use crate::types::{binarize, BinaryCoinPair, BinaryPartition, ProbabilityVector};

use rand::Rng;

/// Moves mass `epsilon` from the action of a pure mixed action to the next
/// action in order. Non-pure inputs are returned unchanged.
pub fn perturb_pure(x: &ProbabilityVector, epsilon: f64) -> Result<ProbabilityVector> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument("perturbing needs at least two continue actions".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    match x.dirac_index() {
        None => Ok(x.clone()),
        Some(a) => {
            let mut m = x.masses().to_vec();
            m[a] = 1.0 - epsilon;
            let next = (a + 1) % m.len();
            m[next] = epsilon;
            ProbabilityVector::new(x.outcomes().clone(), m)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonMethod {
    /// Every block designates a player with the same quit probability.
    ClosedForm,
    /// Constant quit probability, designation with a constant probability
    /// below one: exact binomial tail.
    Binomial,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Horizon {
    pub blocks: u64,
    pub method: HorizonMethod,
}

/// Smallest `k` with `(1 - eta)^k <= epsilon`.
fn designations_needed(eta: f64, epsilon: f64) -> u64 {
    let k = (epsilon.ln() / (1.0 - eta).ln()).ceil();
    // Guard the boundary against rounding in the logarithms.
    let mut k = k.max(0.0) as u64;
    while k > 0 && (1.0 - eta).powi(k as i32 - 1) <= epsilon {
        k -= 1;
    }
    while (1.0 - eta).powi(k as i32) > epsilon {
        k += 1;
    }
    k
}

/// `P(Bin(t, q) < k)` via log-space terms.
fn binomial_below(t: u64, q: f64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k > t {
        return 1.0;
    }
    let (lq, lp) = (q.ln(), (1.0 - q).ln());
    let mut log_term = t as f64 * lp;
    let mut total = log_term.exp();
    for j in 0..k - 1 {
        log_term += ((t - j) as f64).ln() - ((j + 1) as f64).ln() + lq - lp;
        total += log_term.exp();
    }
    total.min(1.0)
}

/// Horizon in blocks such that the probability that the product of
/// `1 - eta` over the designated blocks still exceeds `epsilon` is below
/// `epsilon`.
pub fn horizon_blocks(sunspot: &SunspotProfile, epsilon: f64, seeds: &SeedTree) -> Result<Horizon> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let period = sunspot.period() as u64;
    if (1..=period).all(|b| sunspot.block_quit_probability(b) == 0.0) {
        return Err(Error::NoFiniteHorizon);
    }
    let eta = sunspot.eta();
    // Players that can ever be designated.
    let reachable: Vec<usize> = (0..eta.len())
        .filter(|&i| (1..=period).any(|b| sunspot.designation(b).mass(i + 1) > 0.0))
        .collect();
    let common_eta = eta[reachable[0]];
    let uniform_eta = reachable.iter().all(|&i| eta[i] == common_eta);
    let q = match sunspot.rule() {
        DesignationRule::Stationary(d) => 1.0 - d.mass(0),
        DesignationRule::Cyclic { probability } => *probability,
    };
    match uniform_eta {
        true if q >= 1.0 => {
            Ok(Horizon { blocks: designations_needed(common_eta, epsilon), method: HorizonMethod::ClosedForm })
        }
        true => {
            let k = designations_needed(common_eta, epsilon);
            let mut t = k;
            while binomial_below(t, q, k) >= epsilon {
                t += 1;
            }
            Ok(Horizon { blocks: t, method: HorizonMethod::Binomial })
        }
        _ => horizon_monte_carlo(sunspot, epsilon, seeds, 20_000, 1_000_000),
    }
}

/// Monte Carlo horizon: simulates `paths` designation sequences and returns
/// the smallest horizon at which the fraction of paths whose product still
/// exceeds `epsilon`, plus a one-sided 99% Hoeffding margin, is below
/// `epsilon`.
pub fn horizon_monte_carlo(
    sunspot: &SunspotProfile,
    epsilon: f64,
    seeds: &SeedTree,
    paths: u64,
    max_blocks: u64,
) -> Result<Horizon> {
    if paths == 0 {
        return Err(Error::InvalidArgument("horizon estimate needs at least one path".into()));
    }
    let margin = ((100f64).ln() / (2.0 * paths as f64)).sqrt();
    if margin >= epsilon {
        return Err(Error::InvalidArgument(format!("{paths} paths cannot resolve epsilon {epsilon}")));
    }
    let period = sunspot.period() as u64;
    let designations: Vec<ProbabilityVector> = (1..=period).map(|b| sunspot.designation(b)).collect();
    let eta = sunspot.eta();
    let mut hits: Vec<u64> = crate::exec::map_runs(paths, |r| {
        let mut rng = seeds.stream(r, "horizon");
        let mut product = 1.0;
        for block in 1..=max_blocks {
            let d = &designations[((block - 1) % period) as usize];
            let j = d.sample_index(rng.gen());
            if j > 0 {
                product *= 1.0 - eta[j - 1];
            }
            if product <= epsilon {
                return block;
            }
        }
        u64::MAX
    });
    hits.sort_unstable();
    // Need #{hit > t} / paths + margin < epsilon.
    let allowed = ((epsilon - margin) * paths as f64).ceil() as u64 - 1;
    let idx = (paths - 1 - allowed) as usize;
    match hits[idx] {
        u64::MAX => Err(Error::NoFiniteHorizon),
        t => Ok(Horizon { blocks: t, method: HorizonMethod::MonteCarlo }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LotteryPlayer {
    pub partition_alpha: Vec<String>,
    pub p_alpha: f64,
}

/// Options controlling how the block lottery threshold is obtained.
#[derive(Clone, Debug)]
pub struct BlockOptions {
    /// Use this threshold instead of calibrating.
    pub threshold: Option<f64>,
    pub calibration: CalibrationSettings,
    pub seed: u64,
}

impl Default for BlockOptions {
    fn default() -> Self {
        Self { threshold: None, calibration: CalibrationSettings::default(), seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct BlockProfile {
    game: QuittingGame,
    sunspot: SunspotProfile,
    epsilon: f64,
    horizon: Horizon,
    x_prime: Vec<ProbabilityVector>,
    partitions: [BinaryPartition; 2],
    coins: BinaryCoinPair,
    threshold: f64,
    mechanisms: Vec<StrongMechanism>,
    calibration: Vec<CalibrationReport>,
}

/// The action of largest mass (first in order) reads as alpha, the rest as beta.
fn lottery_partition(x: &ProbabilityVector) -> Result<BinaryPartition> {
    let top = (0..x.len()).fold(0, |b, i| if x.mass(i) > x.mass(b) { i } else { b });
    BinaryPartition::new(x.outcomes().clone(), &[x.outcomes().label(top)])
}

pub fn build_block_profile(
    game: &QuittingGame,
    sunspot: &SunspotProfile,
    epsilon: f64,
    options: &BlockOptions,
) -> Result<BlockProfile> {
    game.require_lottery_players()?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if let Some((i, e)) = sunspot.eta().iter().enumerate().find(|(_, &e)| e >= epsilon) {
        return Err(Error::InvalidSunspot(format!(
            "quit probability {e} of `{}` must be below epsilon",
            game.players().label(i)
        )));
    }
    let seeds = SeedTree::new(options.seed);
    let horizon = horizon_blocks(sunspot, epsilon, &seeds.child("horizon"))?;
    let x_prime = sunspot
        .x()
        .iter()
        .enumerate()
        .map(|(i, x)| match (i, x.len()) {
            (_, n) if n >= 2 => perturb_pure(x, epsilon),
            _ => Ok(x.clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    let partitions = [lottery_partition(&x_prime[0])?, lottery_partition(&x_prime[1])?];
    let coins = BinaryCoinPair::new(binarize(&partitions[0], &x_prime[0])?, binarize(&partitions[1], &x_prime[1])?)?;

    let targets: Vec<ProbabilityVector> = (1..=sunspot.period() as u64).map(|b| sunspot.designation(b)).collect();
    let accuracy = epsilon / horizon.blocks as f64;
    let mut calibration = Vec::new();
    let threshold = match options.threshold {
        Some(c) => c,
        None => {
            let mut c: f64 = 0.0;
            for (k, nu) in targets.iter().enumerate() {
                let suite = AdversarySuite::standard(nu.outcomes());
                let report = calibrate_threshold(
                    &coins,
                    nu,
                    accuracy,
                    &suite,
                    &seeds.child(&format!("calibration{k}")),
                    &options.calibration,
                )?;
                c = c.max(report.threshold()?);
                calibration.push(report);
            }
            info!("block lottery threshold {c} for accuracy target {accuracy}");
            c
        }
    };
    let mechanisms = targets
        .into_iter()
        .map(|nu| StrongMechanism::new(coins, nu, threshold))
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockProfile {
        game: game.clone(),
        sunspot: sunspot.clone(),
        epsilon,
        horizon,
        x_prime,
        partitions,
        coins,
        threshold,
        mechanisms,
        calibration,
    })
}

impl BlockProfile {
    pub fn game(&self) -> &QuittingGame {
        &self.game
    }

    pub fn sunspot(&self) -> &SunspotProfile {
        &self.sunspot
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn x_prime(&self) -> &[ProbabilityVector] {
        &self.x_prime
    }

    pub fn partition(&self, player: usize) -> &BinaryPartition {
        &self.partitions[player]
    }

    pub fn coins(&self) -> &BinaryCoinPair {
        &self.coins
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Lottery accuracy aimed at in every block.
    pub fn lottery_accuracy_target(&self) -> f64 {
        self.epsilon / self.horizon.blocks as f64
    }

    /// Accuracy actually certified by calibration: half the target plus the
    /// sampling margin of the calibration runs. `None` for a fixed threshold.
    pub fn certified_lottery_accuracy(&self) -> Option<f64> {
        self.calibration.iter().map(|r| r.tolerance).reduce(f64::max)
    }

    pub fn calibration(&self) -> &[CalibrationReport] {
        &self.calibration
    }

    /// Lottery mechanism used in block `block` (from 1).
    pub fn mechanism(&self, block: u64) -> &StrongMechanism {
        &self.mechanisms[((block.max(1) - 1) % self.mechanisms.len() as u64) as usize]
    }

    pub fn lottery_players(&self) -> [LotteryPlayer; 2] {
        let lp = |i: usize| LotteryPlayer {
            partition_alpha: self.partitions[i].alpha_labels().into_iter().map(String::from).collect(),
            p_alpha: [self.coins.p1_alpha, self.coins.p2_alpha][i],
        };
        [lp(0), lp(1)]
    }
}

/// Honest lottery outcome frequencies of block `block` against its
/// designation distribution.
pub fn block_lottery_report(
    profile: &BlockProfile,
    block: u64,
    runs: u64,
    seeds: &SeedTree,
) -> Result<DistributionReport> {
    let mechanism = profile.mechanism(block);
    let e = outcome_distribution(mechanism, &Honest, &Honest, &seeds.child(&format!("block{block}")), runs);
    DistributionReport::new(&e, mechanism.nu(), CALIBRATION_DELTA)
}
