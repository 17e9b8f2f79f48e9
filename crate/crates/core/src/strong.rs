//! Bounded-length lottery: accumulate zero-drift scores until their squared
//! sum reaches a threshold, then decode the normalized sum through a normal
//! interval partition.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::normal;
use crate::rng::DeviceStreams;
use crate::strategy::{sample_stage, DeviceStrategy, MechanismView, StrongView};
use crate::types::{
    BinaryCoinPair, Device, Letter, LetterPair, OutcomeSet, ProbabilityVector, TerminalStatus,
    Transcript, LETTER_PAIRS,
};

/// Per-stage scores indexed by letter pair.
///
/// Every row averages to zero under device 2's honest coin and every column
/// under device 1's, so the running sum has zero drift as long as either
/// device is honest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreTable {
    w: [[f64; 2]; 2],
}

impl ScoreTable {
    pub fn new(coins: &BinaryCoinPair) -> Self {
        let s1 = |l| coins.prob(Device::One, l);
        let s2 = |l| coins.prob(Device::Two, l);
        use Letter::{Alpha as A, Beta as B};
        Self {
            w: [
                [-s1(B) * s2(B), s1(B) * s2(A)],
                [s1(A) * s2(B), -s1(A) * s2(A)],
            ],
        }
    }

    pub fn score(&self, pair: LetterPair) -> f64 {
        self.w[pair.0.index()][pair.1.index()]
    }

    /// Smallest `|score|`; every stage adds at least its square.
    pub fn min_abs(&self) -> f64 {
        LETTER_PAIRS.iter().map(|&p| self.score(p).abs()).fold(f64::INFINITY, f64::min)
    }

    /// Expected squared score when the device plays `own` and its partner is honest.
    pub fn conditional_square(&self, coins: &BinaryCoinPair, device: Device, own: Letter) -> f64 {
        Letter::BOTH
            .iter()
            .map(|&b| coins.prob(device.other(), b) * self.score(device.pair(own, b)).powi(2))
            .sum()
    }
}

/// Breakpoints `b_1 <= ... <= b_{J-1}` splitting the real line so that the
/// standard normal mass of `(b_{j-1}, b_j]` is `nu(j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalPartition {
    outcomes: OutcomeSet,
    breakpoints: Vec<f64>,
}

impl IntervalPartition {
    pub fn new(nu: &ProbabilityVector) -> Self {
        let mass = nu.masses();
        let mut breakpoints = Vec::with_capacity(mass.len().saturating_sub(1));
        let mut cumulative = 0.0;
        for j in 0..mass.len().saturating_sub(1) {
            cumulative += mass[j];
            let b = if mass[j + 1..].iter().all(|&m| m == 0.0) {
                f64::INFINITY
            } else if cumulative == 0.0 {
                f64::NEG_INFINITY
            } else {
                normal::quantile(cumulative)
            };
            breakpoints.push(b);
        }
        Self { outcomes: nu.outcomes().clone(), breakpoints }
    }

    pub fn outcomes(&self) -> &OutcomeSet {
        &self.outcomes
    }

    /// The finite and infinite inner breakpoints, in label order.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// `(lower, upper]` bounds of label `j`'s interval.
    pub fn interval(&self, j: usize) -> (f64, f64) {
        let lo = if j == 0 { f64::NEG_INFINITY } else { self.breakpoints[j - 1] };
        let hi = self.breakpoints.get(j).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    /// Standard normal mass of label `j`'s interval.
    pub fn normal_mass(&self, j: usize) -> f64 {
        let (lo, hi) = self.interval(j);
        if hi <= lo {
            0.0
        } else {
            normal::cdf(hi) - normal::cdf(lo)
        }
    }

    /// Label whose interval contains `z`; a point on a breakpoint goes left.
    pub fn decode(&self, z: f64) -> usize {
        self.breakpoints.iter().position(|&b| z <= b).unwrap_or(self.breakpoints.len())
    }
}

/// Running sums of one strong-mechanism run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StrongRunState {
    pub sum_y: f64,
    pub sum_y2: f64,
    pub stage: u64,
}

impl StrongRunState {
    pub fn advance(&mut self, y: f64) {
        self.sum_y += y;
        self.sum_y2 += y * y;
        self.stage += 1;
    }
}

/// State recorded after each stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StrongSnapshot {
    pub score: f64,
    pub sum_y: f64,
    pub sum_y2: f64,
}

#[derive(Clone, Debug)]
pub struct StrongRun {
    pub outcome: usize,
    pub stages: u64,
    pub z: f64,
    pub transcript: Transcript<StrongSnapshot>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrongSample {
    pub outcome: usize,
    pub stages: u64,
    pub z: f64,
}

/// Bounded-length mechanism for a fixed coin pair, target and threshold.
#[derive(Clone, Debug)]
pub struct StrongMechanism {
    coins: BinaryCoinPair,
    nu: ProbabilityVector,
    scores: ScoreTable,
    partition: IntervalPartition,
    threshold: f64,
    stage_bound: u64,
}

impl StrongMechanism {
    pub fn new(coins: BinaryCoinPair, nu: ProbabilityVector, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::InvalidThreshold(threshold));
        }
        let scores = ScoreTable::new(&coins);
        let partition = IntervalPartition::new(&nu);
        let stage_bound = stage_bound(&coins, threshold);
        Ok(Self { coins, nu, scores, partition, threshold, stage_bound })
    }

    pub fn coins(&self) -> &BinaryCoinPair {
        &self.coins
    }

    pub fn nu(&self) -> &ProbabilityVector {
        &self.nu
    }

    pub fn scores(&self) -> &ScoreTable {
        &self.scores
    }

    pub fn partition(&self) -> &IntervalPartition {
        &self.partition
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Hard cap on the number of stages of any run.
    pub fn stage_bound(&self) -> u64 {
        self.stage_bound
    }

    pub fn run(
        &self,
        s1: &dyn DeviceStrategy,
        s2: &dyn DeviceStrategy,
        streams: &mut DeviceStreams,
    ) -> StrongRun {
        self.run_with(s1, s2, &mut streams.device1, &mut streams.device2)
    }

    /// Same as [`run`](Self::run) with caller-owned device streams.
    pub fn run_with<R: Rng>(
        &self,
        s1: &dyn DeviceStrategy,
        s2: &dyn DeviceStrategy,
        rng1: &mut R,
        rng2: &mut R,
    ) -> StrongRun {
        let mut letters = Vec::new();
        let mut snapshots = Vec::new();
        let state = self.drive(s1, s2, rng1, rng2, &mut letters, |y, st| {
            snapshots.push(StrongSnapshot { score: y, sum_y: st.sum_y, sum_y2: st.sum_y2 })
        });
        let sample = self.finish(&state);
        let mut transcript = Transcript::new();
        for (pair, snap) in letters.into_iter().zip(snapshots) {
            transcript.push(pair, snap);
        }
        transcript.finish(TerminalStatus::Outcome(sample.outcome));
        StrongRun { outcome: sample.outcome, stages: sample.stages, z: sample.z, transcript }
    }

    /// Outcome of one run without the per-stage record.
    pub fn sample(
        &self,
        s1: &dyn DeviceStrategy,
        s2: &dyn DeviceStrategy,
        streams: &mut DeviceStreams,
    ) -> StrongSample {
        let mut letters = Vec::new();
        let state = self.drive(s1, s2, &mut streams.device1, &mut streams.device2, &mut letters, |_, _| {});
        self.finish(&state)
    }

    fn drive<R: Rng>(
        &self,
        s1: &dyn DeviceStrategy,
        s2: &dyn DeviceStrategy,
        rng1: &mut R,
        rng2: &mut R,
        letters: &mut Vec<LetterPair>,
        mut record: impl FnMut(f64, &StrongRunState),
    ) -> StrongRunState {
        let mut state = StrongRunState::default();
        loop {
            let view = MechanismView::Strong(StrongView {
                scores: &self.scores,
                partition: &self.partition,
                threshold: self.threshold,
                sum_y: state.sum_y,
                sum_y2: state.sum_y2,
            });
            let pair = sample_stage(s1, s2, &self.coins, letters, view, rng1, rng2);
            let y = self.scores.score(pair);
            state.advance(y);
            letters.push(pair);
            record(y, &state);
            // In exact arithmetic the squared sum reaches the threshold by the
            // bound; the second test only absorbs floating-point rounding.
            if state.sum_y2 >= self.threshold || state.stage >= self.stage_bound {
                break;
            }
        }
        assert!(state.stage <= self.stage_bound, "stage bound violated");
        state
    }

    fn finish(&self, state: &StrongRunState) -> StrongSample {
        let z = state.sum_y / self.threshold.sqrt();
        StrongSample { outcome: self.partition.decode(z), stages: state.stage, z }
    }
}

/// `ceil(C / m^2)` where `m` is the smallest absolute score.
pub fn stage_bound(coins: &BinaryCoinPair, threshold: f64) -> u64 {
    let m = ScoreTable::new(coins).min_abs();
    (threshold / (m * m)).ceil().max(1.0) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::ConstantAdversary;
    use crate::rng::SeedTree;
    use crate::strategy::Honest;

    fn coins(p1: f64, p2: f64) -> BinaryCoinPair {
        BinaryCoinPair::new(p1, p2).unwrap()
    }

    #[test]
    fn fair_coin_scores() {
        let t = ScoreTable::new(&coins(0.5, 0.5));
        assert_eq!(t.score((Letter::Alpha, Letter::Alpha)), -0.25);
        assert_eq!(t.score((Letter::Beta, Letter::Alpha)), 0.25);
    }

    #[test]
    fn biased_coin_score_entry() {
        let t = ScoreTable::new(&coins(0.3, 0.7));
        assert!((t.score((Letter::Alpha, Letter::Beta)) - 0.49).abs() < 1e-15);
    }

    #[test]
    fn row_zero_mean() {
        let c = coins(0.3, 0.7);
        let t = ScoreTable::new(&c);
        let row = c.p2_alpha * t.score((Letter::Alpha, Letter::Alpha))
            + (1.0 - c.p2_alpha) * t.score((Letter::Alpha, Letter::Beta));
        assert!(row.abs() < 1e-15);
    }

    #[test]
    fn min_abs_score_is_c1() {
        let c = coins(0.3, 0.7);
        assert!((ScoreTable::new(&c).min_abs() - c.c1()).abs() < 1e-15);
    }

    #[test]
    fn uniform_two_labels_split_at_zero() {
        let nu = ProbabilityVector::from_pairs([("j1", 0.5), ("j2", 0.5)]).unwrap();
        let p = IntervalPartition::new(&nu);
        assert_eq!(p.breakpoints().len(), 1);
        assert!(p.breakpoints()[0].abs() < 1e-14);
        assert_eq!(p.decode(0.0), 0);
        assert_eq!(p.decode(1e-9), 1);
    }

    #[test]
    fn four_label_quartiles() {
        let nu = ProbabilityVector::uniform(OutcomeSet::new(["a", "b", "c", "d"]).unwrap());
        let p = IntervalPartition::new(&nu);
        // quartiles of N(0,1)
        let expected = [-0.674_489_750_196_081_7, 0.0, 0.674_489_750_196_081_7];
        for (b, e) in p.breakpoints().iter().zip(expected) {
            assert!((b - e).abs() < 1e-9, "{b} vs {e}");
        }
    }

    #[test]
    fn zero_mass_labels_get_empty_intervals() {
        let nu = ProbabilityVector::from_pairs([("a", 0.0), ("b", 0.5), ("c", 0.0), ("d", 0.5)]).unwrap();
        let p = IntervalPartition::new(&nu);
        assert_eq!(p.normal_mass(0), 0.0);
        assert_eq!(p.normal_mass(2), 0.0);
        for z in [-50.0, -1.0, 0.0, 1e-12, 3.0, 50.0] {
            let j = p.decode(z);
            assert!(j == 1 || j == 3, "z={z} decoded to {j}");
        }
    }

    #[test]
    fn dirac_target_always_wins() {
        let nu = ProbabilityVector::from_pairs([("j1", 1.0), ("j2", 0.0)]).unwrap();
        let m = StrongMechanism::new(coins(0.3, 0.7), nu, 2.0).unwrap();
        let tree = SeedTree::new(1);
        for run in 0..200 {
            let r = m.run(&ConstantAdversary(Letter::Alpha), &Honest, &mut tree.device_streams(run));
            assert_eq!(r.outcome, 0);
        }
    }

    #[test]
    fn tiny_threshold_stops_after_one_stage() {
        let c = coins(0.3, 0.7);
        let threshold = c.c1() * c.c1();
        let nu = ProbabilityVector::from_pairs([("j1", 0.5), ("j2", 0.5)]).unwrap();
        let m = StrongMechanism::new(c, nu, threshold).unwrap();
        assert_eq!(m.stage_bound(), 1);
        let tree = SeedTree::new(2);
        for run in 0..100 {
            assert_eq!(m.run(&Honest, &Honest, &mut tree.device_streams(run)).stages, 1);
        }
    }

    #[test]
    fn rejects_bad_threshold() {
        let nu = ProbabilityVector::from_pairs([("j1", 0.5), ("j2", 0.5)]).unwrap();
        assert!(StrongMechanism::new(coins(0.5, 0.5), nu.clone(), 0.0).is_err());
        assert!(StrongMechanism::new(coins(0.5, 0.5), nu, f64::INFINITY).is_err());
    }

    #[test]
    fn fair_coins_run_exact_length() {
        // every squared score is 1/16, so C = 1 takes exactly 16 stages
        let nu = ProbabilityVector::from_pairs([("j1", 0.5), ("j2", 0.5)]).unwrap();
        let m = StrongMechanism::new(coins(0.5, 0.5), nu, 1.0).unwrap();
        let r = m.run(&Honest, &Honest, &mut SeedTree::new(3).device_streams(0));
        assert_eq!(r.stages, 16);
        assert_eq!(r.transcript.len(), 16);
        let last = r.transcript.snapshots().last().unwrap();
        assert!((last.sum_y / 1.0 - r.z).abs() < 1e-15);
    }
}
