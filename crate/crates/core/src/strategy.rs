//! Device strategies and per-stage sampling.

use rand::Rng;

use crate::strong::{IntervalPartition, ScoreTable};
use crate::types::{BinaryCoinPair, Device, Letter, LetterPair, ProbabilityVector};
use crate::weak::SuccessorMap;

/// Mechanism internals exposed to strategies. Adversaries may read all of it.
#[derive(Clone, Copy, Debug)]
pub enum MechanismView<'a> {
    Plain,
    Strong(StrongView<'a>),
    Weak(WeakView<'a>),
}

#[derive(Clone, Copy, Debug)]
pub struct StrongView<'a> {
    pub scores: &'a ScoreTable,
    pub partition: &'a IntervalPartition,
    pub threshold: f64,
    pub sum_y: f64,
    pub sum_y2: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct WeakView<'a> {
    pub belief: &'a ProbabilityVector,
    pub successor: &'a SuccessorMap,
}

/// Everything a device may condition on before emitting its next letter.
#[derive(Clone, Copy, Debug)]
pub struct StageView<'a> {
    pub device: Device,
    pub coins: &'a BinaryCoinPair,
    pub history: &'a [LetterPair],
    pub mechanism: MechanismView<'a>,
}

impl StageView<'_> {
    /// Honest probability of `letter` for the *other* device.
    pub fn partner_prob(&self, letter: Letter) -> f64 {
        self.coins.prob(self.device.other(), letter)
    }
}

/// A behavior strategy: maps what the device sees to its probability of
/// emitting `alpha` next. Implementations must return a value in `[0, 1]`.
pub trait DeviceStrategy: Send + Sync {
    fn prob_alpha(&self, view: &StageView<'_>) -> f64;

    fn name(&self) -> String;
}

/// The stationary strategy the device is supposed to follow.
#[derive(Clone, Copy, Debug, Default)]
pub struct Honest;

impl DeviceStrategy for Honest {
    fn prob_alpha(&self, view: &StageView<'_>) -> f64 {
        view.coins.prob(view.device, Letter::Alpha)
    }

    fn name(&self) -> String {
        "honest".into()
    }
}

/// Draws one letter per device. Each device consumes exactly one uniform from
/// its own stream per stage regardless of its strategy.
pub fn sample_stage<R: Rng>(
    s1: &dyn DeviceStrategy,
    s2: &dyn DeviceStrategy,
    coins: &BinaryCoinPair,
    history: &[LetterPair],
    mechanism: MechanismView<'_>,
    rng1: &mut R,
    rng2: &mut R,
) -> LetterPair {
    let draw = |strategy: &dyn DeviceStrategy, device: Device, rng: &mut R| {
        let view = StageView { device, coins, history, mechanism };
        let p = strategy.prob_alpha(&view);
        debug_assert!((0.0..=1.0).contains(&p), "{} returned {p}", strategy.name());
        let u: f64 = rng.gen();
        if u < p.clamp(0.0, 1.0) {
            Letter::Alpha
        } else {
            Letter::Beta
        }
    };
    let a1 = draw(s1, Device::One, rng1);
    let a2 = draw(s2, Device::Two, rng2);
    (a1, a2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::ConstantAdversary;
    use crate::rng::SeedTree;

    fn letters(s1: &dyn DeviceStrategy, s2: &dyn DeviceStrategy, seed: u64, n: usize) -> Vec<LetterPair> {
        let coins = BinaryCoinPair::new(0.5, 0.5).unwrap();
        let mut streams = SeedTree::new(seed).device_streams(0);
        let mut history = Vec::new();
        for _ in 0..n {
            let pair = sample_stage(
                s1,
                s2,
                &coins,
                &history,
                MechanismView::Plain,
                &mut streams.device1,
                &mut streams.device2,
            );
            history.push(pair);
        }
        history
    }

    #[test]
    fn replay_is_deterministic() {
        assert_eq!(letters(&Honest, &Honest, 11, 64), letters(&Honest, &Honest, 11, 64));
    }

    #[test]
    fn constant_device_always_emits_its_letter() {
        let run = letters(&ConstantAdversary(Letter::Alpha), &Honest, 3, 500);
        assert!(run.iter().all(|p| p.0 == Letter::Alpha));
    }

    #[test]
    fn adversary_does_not_perturb_partner_draws() {
        let honest = letters(&Honest, &Honest, 5, 200);
        let attacked = letters(&ConstantAdversary(Letter::Beta), &Honest, 5, 200);
        let partner = |v: &[LetterPair]| v.iter().map(|p| p.1).collect::<Vec<_>>();
        assert_eq!(partner(&honest), partner(&attacked));
    }

    #[test]
    fn honest_fair_frequency_concentrates() {
        // Hoeffding: P(|f - 0.5| > 0.005) <= 2 exp(-2 n 0.005^2) ~ 4e-22 at n = 1e6.
        let run = letters(&Honest, &Honest, 99, 1_000_000);
        let alpha = run.iter().filter(|p| p.0 == Letter::Alpha).count() as f64 / run.len() as f64;
        assert!((alpha - 0.5).abs() < 0.005, "{alpha}");
    }
}
