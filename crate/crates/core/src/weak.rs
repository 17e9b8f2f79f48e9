//! Unbounded lottery with exact honest implementation.
//!
//! The state is a belief over outcomes. Each letter pair moves it along the
//! direction `e_{j+} - e_{j-}` by `s * score(pair)`, where the score table is
//! the zero-drift table of the bounded lottery. That makes the belief a
//! martingale whenever either device is honest. The scale `s` is pushed to the
//! boundary of the simplex, so at least one letter pair removes a label from
//! the support. The run ends at the first point-mass belief.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::DeviceStreams;
use crate::strategy::{sample_stage, DeviceStrategy, MechanismView, WeakView};
use crate::strong::ScoreTable;
use crate::types::{
    BinaryCoinPair, Device, Letter, LetterPair, ProbabilityVector, TerminalStatus, Transcript,
    LETTER_PAIRS,
};

/// Tolerance of the martingale identities checked on every successor map.
pub const MARTINGALE_TOLERANCE: f64 = 1e-9;

/// Failure probability used for the default stage cap.
pub const DEFAULT_TIMEOUT_DELTA: f64 = 0.01;

/// Default trailing window inspected by [`detect_fault`].
pub const DEFAULT_DETECTION_WINDOW: usize = 1000;

/// The four conditional next beliefs from one belief.
#[derive(Clone, Debug, PartialEq)]
pub struct SuccessorMap {
    d: [[ProbabilityVector; 2]; 2],
    shrink_pair: Option<LetterPair>,
}

impl SuccessorMap {
    pub fn successor(&self, pair: LetterPair) -> &ProbabilityVector {
        &self.d[pair.0.index()][pair.1.index()]
    }

    /// First letter pair (canonical order) whose successor has a smaller
    /// support; absent when the belief is already a point mass.
    pub fn shrink_pair(&self) -> Option<LetterPair> {
        self.shrink_pair
    }

    /// Largest deviation from the two martingale identities.
    pub fn martingale_error(&self, lambda: &ProbabilityVector, coins: &BinaryCoinPair) -> f64 {
        let mut worst: f64 = 0.0;
        for device in Device::BOTH {
            for &fixed in &Letter::BOTH {
                for k in 0..lambda.len() {
                    // `device` honest, the other device's letter fixed.
                    let avg: f64 = Letter::BOTH
                        .iter()
                        .map(|&own| {
                            coins.prob(device, own)
                                * self.successor(device.pair(own, fixed)).mass(k)
                        })
                        .sum();
                    worst = worst.max((avg - lambda.mass(k)).abs());
                }
            }
        }
        worst
    }
}

/// Builds the successor map of `lambda`.
pub fn build_successor(lambda: &ProbabilityVector, coins: &BinaryCoinPair) -> Result<SuccessorMap> {
    let mass = lambda.masses();
    let support = lambda.support();
    if support.len() <= 1 {
        let same = || lambda.clone();
        return Ok(SuccessorMap { d: [[same(), same()], [same(), same()]], shrink_pair: None });
    }

    // j+ : first label of largest mass; j- : first label of smallest positive
    // mass among the remaining support.
    let plus = support.iter().copied().fold(support[0], |best, i| if mass[i] > mass[best] { i } else { best });
    let minus = support
        .iter()
        .copied()
        .filter(|&i| i != plus)
        .fold(None, |best: Option<usize>, i| match best {
            Some(b) if mass[b] <= mass[i] => Some(b),
            _ => Some(i),
        })
        .expect("support has at least two labels");

    let scores = ScoreTable::new(coins);
    // Positive scores drain j-, negative scores drain j+.
    let limit = |pair: LetterPair| {
        let w = scores.score(pair);
        if w > 0.0 {
            mass[minus] / w
        } else {
            mass[plus] / -w
        }
    };
    let scale = LETTER_PAIRS.iter().map(|&p| limit(p)).fold(f64::INFINITY, f64::min);
    let binding = |pair: LetterPair| limit(pair) <= scale * (1.0 + 1e-12);

    let pair_total = mass[plus] + mass[minus];
    let make = |pair: LetterPair| {
        let w = scores.score(pair);
        let mut next = mass.to_vec();
        let (drained, other) = if w > 0.0 { (minus, plus) } else { (plus, minus) };
        if binding(pair) {
            next[drained] = 0.0;
            next[other] = pair_total.min(1.0);
        } else {
            // Added rather than taken as the complement, so a tiny mass is not
            // lost to cancellation against a mass near one.
            next[drained] = (mass[drained] - scale * w.abs()).max(0.0);
            next[other] = (mass[other] + scale * w.abs()).min(1.0);
        }
        ProbabilityVector::from_parts_unchecked(lambda.outcomes().clone(), next)
    };
    let d = [
        [make(LETTER_PAIRS[0]), make(LETTER_PAIRS[1])],
        [make(LETTER_PAIRS[2]), make(LETTER_PAIRS[3])],
    ];
    let shrink_pair = LETTER_PAIRS.iter().copied().find(|&p| binding(p));
    let map = SuccessorMap { d, shrink_pair };
    check_successor(&map, lambda, coins)?;
    Ok(map)
}

fn check_successor(map: &SuccessorMap, lambda: &ProbabilityVector, coins: &BinaryCoinPair) -> Result<()> {
    for &pair in &LETTER_PAIRS {
        let d = map.successor(pair);
        let total: f64 = d.masses().iter().sum();
        if (total - 1.0).abs() > crate::types::NORMALIZATION_TOLERANCE
            || d.masses().iter().any(|m| !(0.0..=1.0).contains(m))
        {
            return Err(Error::Inconsistent(format!("successor of {pair:?} is not a distribution")));
        }
    }
    let err = map.martingale_error(lambda, coins);
    if err > MARTINGALE_TOLERANCE {
        return Err(Error::Inconsistent(format!("martingale identity off by {err}")));
    }
    match map.shrink_pair {
        Some(p) if map.successor(p).support_len() < lambda.support_len() => Ok(()),
        _ => Err(Error::Inconsistent("no letter pair shrinks the support".into())),
    }
}

/// Belief of the weak mechanism after `stage` stages.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefState {
    pub belief: ProbabilityVector,
    pub stage: u64,
}

impl BeliefState {
    pub fn initial(nu: ProbabilityVector) -> Self {
        Self { belief: nu, stage: 0 }
    }
}

/// Advances the belief by one letter pair.
pub fn step(state: &BeliefState, pair: LetterPair, coins: &BinaryCoinPair) -> Result<BeliefState> {
    let map = build_successor(&state.belief, coins)?;
    Ok(BeliefState { belief: map.successor(pair).clone(), stage: state.stage + 1 })
}

/// State recorded after each stage: the pair that would have shrunk the
/// support at that stage, and the resulting belief.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakSnapshot {
    pub shrink_pair: Option<LetterPair>,
    pub belief: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    None,
    Device1Faulty,
    Device2Faulty,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::None => "none",
            Verdict::Device1Faulty => "device1_faulty",
            Verdict::Device2Faulty => "device2_faulty",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    pub fn is_faulty(self) -> bool {
        matches!(self, Verdict::Device1Faulty | Verdict::Device2Faulty)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectionVerdict {
    pub verdict: Verdict,
    /// Stages in the window where each device played its shrink letter.
    pub matches: [usize; 2],
    /// Window stages that had a shrink pair.
    pub observed: usize,
}

impl DetectionVerdict {
    pub fn none() -> Self {
        Self { verdict: Verdict::None, matches: [0, 0], observed: 0 }
    }

    pub fn match_rate(&self, device: Device) -> f64 {
        if self.observed == 0 {
            0.0
        } else {
            self.matches[device.index()] as f64 / self.observed as f64
        }
    }
}

/// Match-rate thresholds of the detection rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectionThresholds {
    /// A device matching its shrink letter less often than this is suspect.
    pub faulty_below: f64,
    /// The other device must match more often than this.
    pub honest_above: f64,
}

impl DetectionThresholds {
    /// An honest device matches its shrink letter with probability at least
    /// `c0` per stage, so the honest bar sits at `c0 / 2`.
    pub fn for_coins(coins: &BinaryCoinPair) -> Self {
        let c0 = coins.c0();
        Self { faulty_below: (c0 / 4.0).min(0.10), honest_above: c0 / 2.0 }
    }
}

/// Finite-window stand-in for the "device avoids its shrink letter forever"
/// events: inspects the last `window` stages of a timed-out run.
pub fn detect_fault(
    transcript: &Transcript<WeakSnapshot>,
    coins: &BinaryCoinPair,
    window: usize,
) -> DetectionVerdict {
    if window == 0 || transcript.len() < window {
        return DetectionVerdict { verdict: Verdict::Inconclusive, matches: [0, 0], observed: 0 };
    }
    let start = transcript.len() - window;
    let mut matches = [0usize; 2];
    let mut observed = 0usize;
    for (pair, snap) in transcript.iter().skip(start) {
        if let Some(shrink) = snap.shrink_pair {
            observed += 1;
            matches[0] += (pair.0 == shrink.0) as usize;
            matches[1] += (pair.1 == shrink.1) as usize;
        }
    }
    let mut verdict = DetectionVerdict { verdict: Verdict::Inconclusive, matches, observed };
    if observed == 0 {
        return verdict;
    }
    let t = DetectionThresholds::for_coins(coins);
    let r1 = verdict.match_rate(Device::One);
    let r2 = verdict.match_rate(Device::Two);
    let one = r1 < t.faulty_below && r2 > t.honest_above;
    let two = r2 < t.faulty_below && r1 > t.honest_above;
    verdict.verdict = match (one, two) {
        (true, false) => Verdict::Device1Faulty,
        (false, true) => Verdict::Device2Faulty,
        _ => Verdict::Inconclusive,
    };
    verdict
}

/// `ceil(|J| ln(1/delta) / c1)`.
pub fn default_max_stages(coins: &BinaryCoinPair, labels: usize, delta: f64) -> u64 {
    ((labels as f64 * (1.0 / delta).ln()) / coins.c1()).ceil().max(1.0) as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum WeakOutcome {
    Decided(usize),
    Timeout,
}

#[derive(Clone, Debug)]
pub struct WeakRun {
    pub outcome: WeakOutcome,
    pub stages: u64,
    pub transcript: Transcript<WeakSnapshot>,
    pub verdict: DetectionVerdict,
}

#[derive(Clone, Debug)]
pub struct WeakMechanism {
    coins: BinaryCoinPair,
    nu: ProbabilityVector,
    max_stages: u64,
    window: usize,
}

impl WeakMechanism {
    pub fn new(coins: BinaryCoinPair, nu: ProbabilityVector, max_stages: u64) -> Result<Self> {
        if max_stages == 0 {
            return Err(Error::InvalidArgument("max_stages must be at least 1".into()));
        }
        Ok(Self { coins, nu, max_stages, window: DEFAULT_DETECTION_WINDOW })
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    pub fn coins(&self) -> &BinaryCoinPair {
        &self.coins
    }

    pub fn nu(&self) -> &ProbabilityVector {
        &self.nu
    }

    pub fn max_stages(&self) -> u64 {
        self.max_stages
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn run(
        &self,
        s1: &dyn DeviceStrategy,
        s2: &dyn DeviceStrategy,
        streams: &mut DeviceStreams,
    ) -> Result<WeakRun> {
        self.run_with(s1, s2, &mut streams.device1, &mut streams.device2)
    }

    pub fn run_with<R: Rng>(
        &self,
        s1: &dyn DeviceStrategy,
        s2: &dyn DeviceStrategy,
        rng1: &mut R,
        rng2: &mut R,
    ) -> Result<WeakRun> {
        let mut state = BeliefState::initial(self.nu.clone());
        let mut transcript = Transcript::new();
        loop {
            if let Some(j) = state.belief.dirac_index() {
                transcript.finish(TerminalStatus::Outcome(j));
                return Ok(WeakRun {
                    outcome: WeakOutcome::Decided(j),
                    stages: state.stage,
                    transcript,
                    verdict: DetectionVerdict::none(),
                });
            }
            if state.stage >= self.max_stages {
                break;
            }
            let successor = build_successor(&state.belief, &self.coins)?;
            let view = MechanismView::Weak(WeakView { belief: &state.belief, successor: &successor });
            let pair = sample_stage(s1, s2, &self.coins, transcript.letters(), view, rng1, rng2);
            let next = successor.successor(pair).clone();
            debug_assert!(next.support_len() <= state.belief.support_len());
            transcript.push(
                pair,
                WeakSnapshot { shrink_pair: successor.shrink_pair(), belief: next.masses().to_vec() },
            );
            state = BeliefState { belief: next, stage: state.stage + 1 };
        }
        transcript.finish(TerminalStatus::Timeout);
        let verdict = detect_fault(&transcript, &self.coins, self.window);
        Ok(WeakRun { outcome: WeakOutcome::Timeout, stages: state.stage, transcript, verdict })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::OutcomeSet;

    const A: Letter = Letter::Alpha;
    const B: Letter = Letter::Beta;

    fn pv(m: &[f64]) -> ProbabilityVector {
        let labels: Vec<String> = (1..=m.len()).map(|i| format!("j{i}")).collect();
        ProbabilityVector::new(OutcomeSet::new(labels).unwrap(), m.to_vec()).unwrap()
    }

    #[test]
    fn dirac_is_absorbing() {
        let coins = BinaryCoinPair::new(0.3, 0.7).unwrap();
        let lambda = pv(&[0.0, 1.0, 0.0]);
        let map = build_successor(&lambda, &coins).unwrap();
        assert_eq!(map.shrink_pair(), None);
        for &p in &LETTER_PAIRS {
            assert_eq!(map.successor(p), &lambda);
        }
        let s = step(&BeliefState::initial(lambda.clone()), (A, B), &coins).unwrap();
        assert_eq!(s.belief, lambda);
        assert_eq!(s.stage, 1);
    }

    #[test]
    fn fair_coins_give_xor_lottery() {
        let coins = BinaryCoinPair::new(0.5, 0.5).unwrap();
        let map = build_successor(&pv(&[0.5, 0.5]), &coins).unwrap();
        assert_eq!(map.successor((A, A)).masses(), &[0.0, 1.0]);
        assert_eq!(map.successor((B, B)).masses(), &[0.0, 1.0]);
        assert_eq!(map.successor((A, B)).masses(), &[1.0, 0.0]);
        assert_eq!(map.successor((B, A)).masses(), &[1.0, 0.0]);
        assert_eq!(map.shrink_pair(), Some((A, A)));
    }

    #[test]
    fn step_on_xor_reaches_first_label() {
        let coins = BinaryCoinPair::new(0.5, 0.5).unwrap();
        let s = step(&BeliefState::initial(pv(&[0.5, 0.5])), (A, B), &coins).unwrap();
        assert_eq!(s.belief.dirac_index(), Some(0));
    }

    #[test]
    fn biased_successor_satisfies_identities() {
        let coins = BinaryCoinPair::new(0.3, 0.7).unwrap();
        let lambda = pv(&[0.2, 0.8]);
        let map = build_successor(&lambda, &coins).unwrap();
        // Independent check: weighted rows and columns reproduce lambda.
        for k in 0..2 {
            for &b in &Letter::BOTH {
                let col = 0.3 * map.successor((A, b)).mass(k) + 0.7 * map.successor((B, b)).mass(k);
                let row = 0.7 * map.successor((b, A)).mass(k) + 0.3 * map.successor((b, B)).mass(k);
                assert!((col - lambda.mass(k)).abs() < 1e-12);
                assert!((row - lambda.mass(k)).abs() < 1e-12);
            }
        }
        let with_zero = LETTER_PAIRS
            .iter()
            .filter(|&&p| map.successor(p).masses().iter().any(|&m| m == 0.0))
            .count();
        assert_eq!(with_zero, 1);
        assert_eq!(map.shrink_pair(), Some((A, B)));
        // s = 0.2 / 0.49; (alpha, beta) drains j1 completely
        assert_eq!(map.successor((A, B)).masses(), &[0.0, 1.0]);
        let s = 0.2 / 0.49;
        assert!((map.successor((B, A)).mass(0) - (0.2 - s * 0.09)).abs() < 1e-15);
        assert!((map.successor((A, A)).mass(0) - (0.2 + s * 0.21)).abs() < 1e-15);
    }

    #[test]
    fn tiny_mass_is_kept_by_non_binding_moves() {
        let coins = BinaryCoinPair::new(0.3, 0.7).unwrap();
        let map = build_successor(&pv(&[1e-20, 1.0]), &coins).unwrap();
        let shrink = map.shrink_pair().unwrap();
        for &p in LETTER_PAIRS.iter().filter(|&&p| p != shrink) {
            assert!(map.successor(p).mass(0) > 0.0, "{p:?}");
        }
    }

    #[test]
    fn detection_needs_full_window() {
        let coins = BinaryCoinPair::new(0.3, 0.7).unwrap();
        let mut t = Transcript::new();
        for _ in 0..10 {
            t.push((B, B), WeakSnapshot { shrink_pair: Some((A, B)), belief: vec![0.5, 0.5] });
        }
        assert_eq!(detect_fault(&t, &coins, 20).verdict, Verdict::Inconclusive);
        let v = detect_fault(&t, &coins, 10);
        assert_eq!(v.matches, [0, 10]);
        assert_eq!(v.verdict, Verdict::Device1Faulty);
    }

    #[test]
    fn both_stalling_is_inconclusive() {
        let coins = BinaryCoinPair::new(0.3, 0.7).unwrap();
        let mut t = Transcript::new();
        for _ in 0..50 {
            t.push((B, A), WeakSnapshot { shrink_pair: Some((A, B)), belief: vec![0.5, 0.5] });
        }
        assert_eq!(detect_fault(&t, &coins, 50).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn default_cap_formula() {
        let coins = BinaryCoinPair::new(0.3, 0.7).unwrap();
        // ceil(2 ln 100 / 0.09) = ceil(102.34)
        assert_eq!(default_max_stages(&coins, 2, 0.01), 103);
    }
}
