//! Simulated play of block and stationary profiles, payoff estimates and
//! deviation gains.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use super::block::BlockProfile;
use super::model::{Action, QuittingGame};
use crate::adversary::{ConstantAdversary, GreedyPush, SharedStrategy, Stall};
use crate::error::{Error, Result};
use crate::exec::map_runs;
use crate::rng::{SeedTree, StreamRng};
use crate::strategy::Honest;
use crate::types::{Letter, ProbabilityVector, LETTER_PAIRS};

/// One unilateral deviation from the profile.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Deviation {
    /// Quit at the first stage of block `k` (stage `k` for stationary play).
    QuitAtBlock(u64),
    QuitImmediately,
    /// Always play this continue action, never quit.
    ConstantContinue(usize),
    /// Lottery players only: prolong every lottery.
    StallLottery,
    /// Lottery players only: steer every lottery toward this signal label.
    PushLottery(String),
}

impl Deviation {
    fn quit_block(&self) -> Option<u64> {
        match self {
            Deviation::QuitAtBlock(k) => Some(*k),
            Deviation::QuitImmediately => Some(1),
            _ => None,
        }
    }

    pub fn describe(&self, game: &QuittingGame, player: usize) -> String {
        match self {
            Deviation::QuitAtBlock(k) => format!("quit_at_block:{k}"),
            Deviation::QuitImmediately => "quit_immediately".into(),
            Deviation::ConstantContinue(a) => {
                format!("constant_continue:{}", game.continue_actions(player).label(*a))
            }
            Deviation::StallLottery => "stall_lottery".into(),
            Deviation::PushLottery(label) => format!("push_lottery:{label}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Deviator {
    pub player: usize,
    pub deviation: Deviation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlayResult {
    /// Stage (from 1) at which somebody quit.
    pub absorbed_at: Option<u64>,
    pub blocks: u64,
    pub absorbing_profile: Option<Vec<Action>>,
    pub payoff: Vec<f64>,
}

/// Continue-action distribution of each player, given the deviator.
fn stage_distributions(x: &[ProbabilityVector], deviator: Option<&Deviator>) -> Vec<ProbabilityVector> {
    x.iter()
        .enumerate()
        .map(|(i, xi)| match deviator {
            Some(Deviator { player, deviation: Deviation::ConstantContinue(a) }) if *player == i => {
                ProbabilityVector::dirac(xi.outcomes().clone(), *a)
            }
            _ => xi.clone(),
        })
        .collect()
}

/// `dist` restricted to the actions read as `letter`, renormalized.
fn conditional_on_letter(
    dist: &ProbabilityVector,
    partition: &crate::types::BinaryPartition,
    letter: Letter,
) -> Option<ProbabilityVector> {
    let mut m: Vec<f64> =
        dist.masses().iter().enumerate().map(|(k, &v)| if partition.letter_of(k) == letter { v } else { 0.0 }).collect();
    let total: f64 = m.iter().sum();
    if total <= 0.0 {
        return None;
    }
    m.iter_mut().for_each(|v| *v /= total);
    ProbabilityVector::new(dist.outcomes().clone(), m).ok()
}

/// Everything a run needs that does not depend on the run index.
struct BlockPlan<'a> {
    profile: &'a BlockProfile,
    deviator: Option<&'a Deviator>,
    dists: Vec<ProbabilityVector>,
    strategies: [SharedStrategy; 2],
    /// Expected stage payoff for each lottery letter pair, and for a play stage
    /// in which nobody quits.
    lottery_payoff: [Vec<f64>; 4],
    play_payoff: Vec<f64>,
}

impl<'a> BlockPlan<'a> {
    fn new(profile: &'a BlockProfile, deviator: Option<&'a Deviator>) -> Result<Self> {
        let game = profile.game();
        let dists = stage_distributions(profile.x_prime(), deviator);
        let by_letter = [0, 1].map(|i| {
            Letter::BOTH.map(|l| conditional_on_letter(&dists[i], profile.partition(i), l))
        });
        let honest: SharedStrategy = Arc::new(Honest);
        let mut strategies = [honest.clone(), honest];
        if let Some(d) = deviator {
            if d.player < 2 {
                strategies[d.player] = match &d.deviation {
                    Deviation::ConstantContinue(a) => {
                        Arc::new(ConstantAdversary(profile.partition(d.player).letter_of(*a)))
                    }
                    Deviation::StallLottery => Arc::new(Stall),
                    Deviation::PushLottery(label) => {
                        Arc::new(GreedyPush::new(profile.sunspot().outcomes(), label)?)
                    }
                    _ => strategies[d.player].clone(),
                };
            }
        }
        let refs: Vec<&ProbabilityVector> = dists.iter().collect();
        let lottery_payoff = LETTER_PAIRS.map(|(l1, l2)| {
            let mut r = refs.clone();
            let c1 = by_letter[0][l1.index()].as_ref();
            let c2 = by_letter[1][l2.index()].as_ref();
            match (c1, c2) {
                (Some(c1), Some(c2)) => {
                    r[0] = c1;
                    r[1] = c2;
                    game.expected_payoff(&r, &[])
                }
                _ => vec![0.0; dists.len()],
            }
        });
        let play_payoff = game.expected_payoff(&refs, &[]);
        Ok(Self { profile, deviator, dists, strategies, lottery_payoff, play_payoff })
    }

    fn deviation(&self, player: usize) -> Option<&Deviation> {
        self.deviator.filter(|d| d.player == player).map(|d| &d.deviation)
    }

    fn run(&self, seeds: &SeedTree, run: u64, max_blocks: u64) -> PlayResult {
        self.run_observed(seeds, run, max_blocks, |_, _| {})
    }

    /// Payoff of `player` for quitting at the first stage of a block, given
    /// the action stream as it stands at that point of an on-path run.
    fn quit_payoff(&self, player: usize, actions: &StreamRng) -> f64 {
        let n = self.profile.game().num_players();
        let mut actions = actions.clone();
        let profile: Vec<Action> = (0..n)
            .map(|i| if i == player { Action::Quit } else { Action::Continue(self.dists[i].sample_index(actions.gen())) })
            .collect();
        self.profile.game().payoff(&profile)[player]
    }

    /// `observe(block, actions)` is called at the start of every block.
    fn run_observed(
        &self,
        seeds: &SeedTree,
        run: u64,
        max_blocks: u64,
        mut observe: impl FnMut(u64, &StreamRng),
    ) -> PlayResult {
        let game = self.profile.game();
        let n = game.num_players();
        let mut streams = seeds.device_streams(run);
        let mut actions = seeds.stream(run, "actions");
        let mut quits = seeds.stream(run, "quits");
        let quit_block = self.deviator.and_then(|d| d.deviation.quit_block().map(|k| (d.player, k)));
        let mut pair_counts = [0u64; 4];
        let mut play_stages = 0u64;
        let mut stage = 0u64;

        let draw = |i: usize, rng: &mut StreamRng| Action::Continue(self.dists[i].sample_index(rng.gen()));
        let absorb = |stage: u64, blocks: u64, profile: Vec<Action>| PlayResult {
            absorbed_at: Some(stage),
            blocks,
            payoff: game.payoff(&profile).to_vec(),
            absorbing_profile: Some(profile),
        };

        for block in 1..=max_blocks {
            observe(block, &actions);
            if let Some((player, k)) = quit_block {
                if k == block {
                    let profile: Vec<Action> =
                        (0..n).map(|i| if i == player { Action::Quit } else { draw(i, &mut actions) }).collect();
                    return absorb(stage + 1, block, profile);
                }
            }
            let mechanism = self.profile.mechanism(block);
            let lottery = mechanism.run_with(
                self.strategies[0].as_ref(),
                self.strategies[1].as_ref(),
                &mut streams.device1,
                &mut streams.device2,
            );
            for pair in lottery.transcript.letters() {
                pair_counts[pair.0.index() * 2 + pair.1.index()] += 1;
            }
            stage += lottery.stages;

            // Play stage.
            stage += 1;
            let designated = lottery.outcome.checked_sub(1);
            let mut profile: Vec<Action> = (0..n).map(|i| draw(i, &mut actions)).collect();
            if let Some(i) = designated {
                let u: f64 = quits.gen();
                let never = matches!(self.deviation(i), Some(Deviation::ConstantContinue(_)));
                if !never && u < self.profile.sunspot().eta()[i] {
                    profile[i] = Action::Quit;
                }
            }
            if profile.iter().any(|a| a.is_quit()) {
                return absorb(stage, block, profile);
            }
            play_stages += 1;
        }

        // Never absorbed: long-run average of expected stage payoffs.
        let mut payoff = vec![0.0; n];
        let total = (pair_counts.iter().sum::<u64>() + play_stages).max(1) as f64;
        for (c, u) in pair_counts.iter().zip(&self.lottery_payoff) {
            for (p, v) in payoff.iter_mut().zip(u) {
                *p += *c as f64 * v / total;
            }
        }
        for (p, v) in payoff.iter_mut().zip(&self.play_payoff) {
            *p += play_stages as f64 * v / total;
        }
        PlayResult { absorbed_at: None, blocks: max_blocks, absorbing_profile: None, payoff }
    }
}

/// Simulates one run of the block profile for at most `max_blocks` blocks.
pub fn play_block(
    profile: &BlockProfile,
    deviator: Option<&Deviator>,
    seeds: &SeedTree,
    run: u64,
    max_blocks: u64,
) -> Result<PlayResult> {
    if max_blocks == 0 {
        return Err(Error::InvalidArgument("max_blocks must be at least 1".into()));
    }
    Ok(BlockPlan::new(profile, deviator)?.run(seeds, run, max_blocks))
}

/// Per-player stationary mixed action over the continue actions plus quit.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryProfile {
    /// Probability of each continue action, per player.
    pub continue_probs: Vec<Vec<f64>>,
    /// Probability of quitting, per player.
    pub quit_probs: Vec<f64>,
}

impl StationaryProfile {
    pub fn new(game: &QuittingGame, continue_probs: Vec<Vec<f64>>, quit_probs: Vec<f64>) -> Result<Self> {
        let n = game.num_players();
        if continue_probs.len() != n || quit_probs.len() != n {
            return Err(Error::InvalidArgument(format!("expected data for {n} players")));
        }
        for i in 0..n {
            let row = &continue_probs[i];
            if row.len() != game.continue_actions(i).len() {
                return Err(Error::LengthMismatch { expected: game.continue_actions(i).len(), got: row.len() });
            }
            let total: f64 = row.iter().sum::<f64>() + quit_probs[i];
            if row.iter().chain([&quit_probs[i]]).any(|v| !(0.0..=1.0).contains(v))
                || (total - 1.0).abs() > crate::types::NORMALIZATION_TOLERANCE
            {
                return Err(Error::NotNormalized(total));
            }
        }
        Ok(Self { continue_probs, quit_probs })
    }

    /// Plays `x` without quitting.
    pub fn nonabsorbing(game: &QuittingGame, x: &[ProbabilityVector]) -> Result<Self> {
        Self::new(game, x.iter().map(|p| p.masses().to_vec()).collect(), vec![0.0; x.len()])
    }

    /// Exact payoff: absorbing payoffs weighted by the quit pattern of one
    /// stage, or the continue payoff if nobody ever quits.
    pub fn exact_payoff(&self, game: &QuittingGame) -> Vec<f64> {
        let n = game.num_players();
        let mut absorbing = vec![0.0; n];
        let mut absorb_mass = 0.0;
        for mask in 1u32..(1 << n) {
            let quitters: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let w: f64 = (0..n)
                .map(|i| if quitters.contains(&i) { self.quit_probs[i] } else { 1.0 - self.quit_probs[i] })
                .product();
            if w == 0.0 {
                continue;
            }
            let dists = self.continue_given_no_quit(game);
            let refs: Vec<&ProbabilityVector> = dists.iter().collect();
            for (a, u) in absorbing.iter_mut().zip(game.expected_payoff(&refs, &quitters)) {
                *a += w * u;
            }
            absorb_mass += w;
        }
        if absorb_mass == 0.0 {
            let dists = self.continue_given_no_quit(game);
            let refs: Vec<&ProbabilityVector> = dists.iter().collect();
            return game.expected_payoff(&refs, &[]);
        }
        absorbing.iter().map(|a| a / absorb_mass).collect()
    }

    fn continue_given_no_quit(&self, game: &QuittingGame) -> Vec<ProbabilityVector> {
        self.continue_probs
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let total: f64 = row.iter().sum();
                let outcomes = game.continue_actions(i).clone();
                if total <= 0.0 {
                    ProbabilityVector::uniform(outcomes)
                } else {
                    ProbabilityVector::new(outcomes, row.iter().map(|v| v / total).collect())
                        .expect("renormalized row")
                }
            })
            .collect()
    }
}

/// Simulates one run of a stationary profile for at most `horizon_stages`.
pub fn play_stationary(
    game: &QuittingGame,
    profile: &StationaryProfile,
    deviator: Option<&Deviator>,
    seeds: &SeedTree,
    run: u64,
    horizon_stages: u64,
) -> Result<PlayResult> {
    if horizon_stages == 0 {
        return Err(Error::InvalidArgument("horizon_stages must be at least 1".into()));
    }
    let n = game.num_players();
    let mut rng = seeds.stream(run, "stationary");
    let quit_stage = deviator.and_then(|d| d.deviation.quit_block().map(|k| (d.player, k)));
    let constant = deviator.and_then(|d| match d.deviation {
        Deviation::ConstantContinue(a) => Some((d.player, a)),
        _ => None,
    });
    let cont = profile.continue_given_no_quit(game);
    for stage in 1..=horizon_stages {
        let mut actions = Vec::with_capacity(n);
        for i in 0..n {
            let u: f64 = rng.gen();
            let a = match (quit_stage, constant) {
                (Some((p, k)), _) if p == i && k == stage => Action::Quit,
                (_, Some((p, a))) if p == i => Action::Continue(a),
                _ if u < profile.quit_probs[i] => Action::Quit,
                _ => {
                    let v: f64 = rng.gen();
                    Action::Continue(cont[i].sample_index(v))
                }
            };
            actions.push(a);
        }
        if actions.iter().any(|a| a.is_quit()) {
            return Ok(PlayResult {
                absorbed_at: Some(stage),
                blocks: stage,
                payoff: game.payoff(&actions).to_vec(),
                absorbing_profile: Some(actions),
            });
        }
    }
    let mut dists = cont;
    if let Some((p, a)) = constant {
        dists[p] = ProbabilityVector::dirac(game.continue_actions(p).clone(), a);
    }
    let refs: Vec<&ProbabilityVector> = dists.iter().collect();
    Ok(PlayResult {
        absorbed_at: None,
        blocks: horizon_stages,
        absorbing_profile: None,
        payoff: game.expected_payoff(&refs, &[]),
    })
}

/// Per-coordinate 99% half-width used for payoff estimates:
/// `3 sqrt(ln(2 / 0.01) / (2 n))`.
pub fn payoff_half_width(n: u64) -> f64 {
    3.0 * ((2.0f64 / 0.01).ln() / (2.0 * n as f64)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PayoffEstimate {
    pub n: u64,
    pub mean: Vec<f64>,
    pub half_width: f64,
    pub absorbed_fraction: f64,
    pub mean_absorption_stage: Option<f64>,
}

impl PayoffEstimate {
    fn from_results(results: &[PlayResult]) -> Self {
        let n = results.len() as u64;
        let players = results.first().map_or(0, |r| r.payoff.len());
        let mut mean = vec![0.0; players];
        for r in results {
            for (m, p) in mean.iter_mut().zip(&r.payoff) {
                *m += p;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let absorbed: Vec<u64> = results.iter().filter_map(|r| r.absorbed_at).collect();
        Self {
            n,
            mean,
            half_width: payoff_half_width(n),
            absorbed_fraction: absorbed.len() as f64 / n as f64,
            mean_absorption_stage: (!absorbed.is_empty())
                .then(|| absorbed.iter().sum::<u64>() as f64 / absorbed.len() as f64),
        }
    }

    pub fn linf_to(&self, target: &[f64]) -> f64 {
        self.mean.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Default simulation length: ten horizons.
pub fn default_max_blocks(profile: &BlockProfile) -> u64 {
    10 * profile.horizon().blocks
}

pub fn estimate_payoff(
    profile: &BlockProfile,
    deviator: Option<&Deviator>,
    n_runs: u64,
    seeds: &SeedTree,
) -> Result<PayoffEstimate> {
    if n_runs == 0 {
        return Err(Error::InvalidArgument("n_runs must be at least 1".into()));
    }
    let plan = BlockPlan::new(profile, deviator)?;
    let max_blocks = default_max_blocks(profile);
    let results = map_runs(n_runs, |r| plan.run(seeds, r, max_blocks));
    Ok(PayoffEstimate::from_results(&results))
}

/// On-path estimate together with `player`'s mean payoff under
/// `QuitAtBlock(k)` for every `k` in `1..=max_k`, all from one pass.
///
/// Quitting at block `k` leaves the run untouched before that block, so with
/// shared seeds each deviation agrees with the on-path run up to block `k`
/// and its payoff only needs the action stream at that point.
pub fn quit_sweep(
    profile: &BlockProfile,
    player: usize,
    max_k: u64,
    n_runs: u64,
    seeds: &SeedTree,
) -> Result<(PayoffEstimate, Vec<f64>)> {
    if n_runs == 0 {
        return Err(Error::InvalidArgument("n_runs must be at least 1".into()));
    }
    if player >= profile.game().num_players() {
        return Err(Error::InvalidArgument(format!("no player with index {player}")));
    }
    let plan = BlockPlan::new(profile, None)?;
    let max_blocks = default_max_blocks(profile);
    let per_run = map_runs(n_runs, |r| {
        let mut quits = Vec::with_capacity(max_k as usize);
        let result = plan.run_observed(seeds, r, max_blocks, |block, actions| {
            if block <= max_k {
                quits.push(plan.quit_payoff(player, actions));
            }
        });
        // Blocks never reached: the deviation never fires.
        quits.resize(max_k as usize, result.payoff[player]);
        (result, quits)
    });
    let mut sums = vec![0.0; max_k as usize];
    for (_, quits) in &per_run {
        sums.iter_mut().zip(quits).for_each(|(s, q)| *s += q);
    }
    sums.iter_mut().for_each(|s| *s /= n_runs as f64);
    let results: Vec<PlayResult> = per_run.into_iter().map(|(r, _)| r).collect();
    Ok((PayoffEstimate::from_results(&results), sums))
}

pub fn estimate_stationary_payoff(
    game: &QuittingGame,
    profile: &StationaryProfile,
    deviator: Option<&Deviator>,
    n_runs: u64,
    horizon_stages: u64,
    seeds: &SeedTree,
) -> Result<PayoffEstimate> {
    if n_runs == 0 {
        return Err(Error::InvalidArgument("n_runs must be at least 1".into()));
    }
    let results = map_runs(n_runs, |r| play_stationary(game, profile, deviator, seeds, r, horizon_stages));
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PayoffEstimate::from_results(&results))
}

/// Every deviation tested for `player`: quitting at each block up to the
/// horizon, each constant continue action, and for lottery players stalling
/// and pushing toward each signal label.
pub fn deviation_family(profile: &BlockProfile, player: usize) -> Vec<Deviation> {
    let mut family = vec![Deviation::QuitImmediately];
    family.extend((2..=profile.horizon().blocks).map(Deviation::QuitAtBlock));
    family.extend((0..profile.game().continue_actions(player).len()).map(Deviation::ConstantContinue));
    if player < 2 {
        family.push(Deviation::StallLottery);
        family.extend(profile.sunspot().outcomes().labels().iter().cloned().map(Deviation::PushLottery));
    }
    family
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationOutcome {
    pub deviation: String,
    pub payoff: f64,
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationReport {
    pub player: String,
    pub on_path: f64,
    pub outcomes: Vec<DeviationOutcome>,
    pub max_gain: f64,
    pub best: String,
    /// Half-width of a gain: the deviation's plus the on-path one.
    pub ci: f64,
}

/// Largest estimated gain of `player` over `family`. All estimates share the
/// same seeds.
pub fn deviation_gain(
    profile: &BlockProfile,
    player: usize,
    family: &[Deviation],
    n_runs: u64,
    seeds: &SeedTree,
) -> Result<DeviationReport> {
    let game = profile.game();
    if player >= game.num_players() {
        return Err(Error::InvalidArgument(format!("no player with index {player}")));
    }
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty deviation family".into()));
    }
    let max_k = family.iter().filter_map(Deviation::quit_block).max().unwrap_or(0);
    let (on_path, quit_payoffs) = quit_sweep(profile, player, max_k, n_runs, seeds)?;
    let base = on_path.mean[player];
    let mut outcomes = Vec::with_capacity(family.len());
    for deviation in family {
        let payoff = match deviation.quit_block() {
            Some(k) if k > 0 => quit_payoffs[k as usize - 1],
            _ => {
                let d = Deviator { player, deviation: deviation.clone() };
                estimate_payoff(profile, Some(&d), n_runs, seeds)?.mean[player]
            }
        };
        outcomes.push(DeviationOutcome { deviation: deviation.describe(game, player), payoff, gain: payoff - base });
    }
    let best = outcomes.iter().max_by(|a, b| a.gain.total_cmp(&b.gain)).expect("nonempty family");
    Ok(DeviationReport {
        player: game.players().label(player).to_string(),
        on_path: base,
        max_gain: best.gain,
        best: best.deviation.clone(),
        ci: 2.0 * on_path.half_width,
        outcomes,
    })
}
