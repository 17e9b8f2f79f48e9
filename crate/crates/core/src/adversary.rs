//! Faulty-device strategies used to attack both mechanisms.
//!
//! Adversaries read the full public history and all mechanism internals. The
//! honest partner's coin is known to them as well.

use std::sync::Arc;

use crate::normal;
use crate::strategy::{DeviceStrategy, Honest, MechanismView, StageView, StrongView, WeakView};
use crate::error::{Error, Result};
use crate::types::{Letter, OutcomeSet};

fn letter_prob(letter: Letter) -> f64 {
    match letter {
        Letter::Alpha => 1.0,
        Letter::Beta => 0.0,
    }
}

/// Emits the same letter at every stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstantAdversary(pub Letter);

impl DeviceStrategy for ConstantAdversary {
    fn prob_alpha(&self, _view: &StageView<'_>) -> f64 {
        letter_prob(self.0)
    }

    fn name(&self) -> String {
        format!("constant:{}", self.0)
    }
}

/// Myopic adversary steering the outcome toward one label.
///
/// Against the bounded mechanism it picks the letter maximizing a one-step
/// lookahead of the normal-approximation probability that the final statistic
/// lands in the target interval. Against the unbounded mechanism it maximizes
/// the partner-expected next-belief mass on the target, breaking ties by the
/// chance the target stays in the support and then by the chance of an
/// immediate point mass on it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GreedyPush {
    target: usize,
    label: String,
}

impl GreedyPush {
    pub fn new(outcomes: &OutcomeSet, label: &str) -> Result<Self> {
        Ok(Self { target: outcomes.index_of(label)?, label: label.to_string() })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    fn strong_letter(&self, view: &StageView<'_>, m: &StrongView<'_>) -> Letter {
        let (lo, hi) = m.partition.interval(self.target);
        let c = m.threshold;
        let root_c = c.sqrt();
        // Probability that the stopped statistic ends in (lo, hi] from (s, q).
        let value = |s: f64, q: f64| {
            if q >= c {
                let z = s / root_c;
                return (z > lo && z <= hi) as u8 as f64;
            }
            let sd = (c - q).sqrt();
            let upper = if hi.is_finite() { normal::cdf_fast((hi * root_c - s) / sd) } else { 1.0 };
            let lower = if lo.is_finite() { normal::cdf_fast((lo * root_c - s) / sd) } else { 0.0 };
            upper - lower
        };
        let score = |own: Letter| -> f64 {
            Letter::BOTH
                .iter()
                .map(|&b| {
                    let y = m.scores.score(view.device.pair(own, b));
                    view.partner_prob(b) * value(m.sum_y + y, m.sum_y2 + y * y)
                })
                .sum()
        };
        if score(Letter::Beta) > score(Letter::Alpha) {
            Letter::Beta
        } else {
            Letter::Alpha
        }
    }

    fn weak_letter(&self, view: &StageView<'_>, m: &WeakView<'_>) -> Letter {
        let key = |own: Letter| {
            let mut key = [0.0; 3];
            for &b in &Letter::BOTH {
                let p = view.partner_prob(b);
                let next = m.successor.successor(view.device.pair(own, b));
                let mass = next.mass(self.target);
                key[0] += p * mass;
                key[1] += p * (mass > 0.0) as u8 as f64;
                key[2] += p * (next.dirac_index() == Some(self.target)) as u8 as f64;
            }
            key
        };
        let (a, b) = (key(Letter::Alpha), key(Letter::Beta));
        // The expected mass is a martingale against an honest partner, so it
        // only differs by rounding; compare it with a tolerance.
        let better = |x: f64, y: f64| x > y + 1e-12;
        let beta_wins = if better(b[0], a[0]) {
            true
        } else if better(a[0], b[0]) {
            false
        } else if better(b[1], a[1]) {
            true
        } else if better(a[1], b[1]) {
            false
        } else {
            better(b[2], a[2])
        };
        if beta_wins {
            Letter::Beta
        } else {
            Letter::Alpha
        }
    }
}

impl DeviceStrategy for GreedyPush {
    fn prob_alpha(&self, view: &StageView<'_>) -> f64 {
        match view.mechanism {
            MechanismView::Strong(m) => letter_prob(self.strong_letter(view, &m)),
            MechanismView::Weak(m) => letter_prob(self.weak_letter(view, &m)),
            MechanismView::Plain => Honest.prob_alpha(view),
        }
    }

    fn name(&self) -> String {
        format!("push:{}", self.label)
    }
}

/// Tries to keep the mechanism running as long as possible.
///
/// Bounded mechanism: plays the letter with the smaller partner-expected
/// squared score. Unbounded mechanism: never plays its own letter of the
/// current shrink pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stall;

impl DeviceStrategy for Stall {
    fn prob_alpha(&self, view: &StageView<'_>) -> f64 {
        match view.mechanism {
            MechanismView::Strong(m) => {
                let a = m.scores.conditional_square(view.coins, view.device, Letter::Alpha);
                let b = m.scores.conditional_square(view.coins, view.device, Letter::Beta);
                letter_prob(if b < a { Letter::Beta } else { Letter::Alpha })
            }
            MechanismView::Weak(m) => match m.successor.shrink_pair() {
                Some(pair) => letter_prob(view.device.letter_of(pair).other()),
                None => Honest.prob_alpha(view),
            },
            MechanismView::Plain => Honest.prob_alpha(view),
        }
    }

    fn name(&self) -> String {
        "stall".into()
    }
}

pub type SharedStrategy = Arc<dyn DeviceStrategy>;

/// Parses a strategy name: `honest`, `constant:alpha`, `constant:beta`,
/// `push:<label>` or `stall`.
pub fn parse_strategy(name: &str, outcomes: &OutcomeSet) -> Result<SharedStrategy> {
    let strategy: SharedStrategy = match name {
        "honest" => Arc::new(Honest),
        "stall" => Arc::new(Stall),
        "constant:alpha" => Arc::new(ConstantAdversary(Letter::Alpha)),
        "constant:beta" => Arc::new(ConstantAdversary(Letter::Beta)),
        _ => match name.strip_prefix("push:") {
            Some(label) => Arc::new(
                GreedyPush::new(outcomes, label).map_err(|_| Error::UnknownStrategy(name.into()))?,
            ),
            None => return Err(Error::UnknownStrategy(name.into())),
        },
    };
    Ok(strategy)
}

/// A finite list of named single-device attacks.
#[derive(Clone)]
pub struct AdversarySuite {
    members: Vec<(String, SharedStrategy)>,
}

impl std::fmt::Debug for AdversarySuite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl AdversarySuite {
    /// Both constants, a push toward every label, and the staller.
    pub fn standard(outcomes: &OutcomeSet) -> Self {
        let mut names = vec!["constant:alpha".to_string(), "constant:beta".to_string()];
        names.extend(outcomes.labels().iter().map(|l| format!("push:{l}")));
        names.push("stall".into());
        Self::from_names(&names, outcomes).expect("standard names parse")
    }

    pub fn from_names<S: AsRef<str>>(names: &[S], outcomes: &OutcomeSet) -> Result<Self> {
        let members = names
            .iter()
            .map(|n| Ok((n.as_ref().to_string(), parse_strategy(n.as_ref(), outcomes)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { members })
    }

    pub fn empty() -> Self {
        Self { members: Vec::new() }
    }

    pub fn members(&self) -> &[(String, SharedStrategy)] {
        &self.members
    }

    pub fn names(&self) -> Vec<&str> {
        self.members.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strong::{IntervalPartition, ScoreTable};
    use crate::types::{BinaryCoinPair, Device, ProbabilityVector};
    use crate::weak::build_successor;

    fn outcomes() -> OutcomeSet {
        OutcomeSet::new(["j1", "j2"]).unwrap()
    }

    #[test]
    fn names_round_trip() {
        let o = outcomes();
        for name in ["honest", "stall", "constant:alpha", "constant:beta", "push:j2"] {
            assert_eq!(parse_strategy(name, &o).unwrap().name(), name);
        }
        assert!(matches!(parse_strategy("push:nope", &o), Err(Error::UnknownStrategy(_))));
        assert!(matches!(parse_strategy("bogus", &o), Err(Error::UnknownStrategy(_))));
    }

    #[test]
    fn stall_avoids_own_shrink_letter() {
        let coins = BinaryCoinPair::new(0.3, 0.7).unwrap();
        let lambda = ProbabilityVector::from_pairs([("j1", 0.2), ("j2", 0.8)]).unwrap();
        let successor = build_successor(&lambda, &coins).unwrap();
        assert_eq!(successor.shrink_pair(), Some((Letter::Alpha, Letter::Beta)));
        let view = |device| StageView {
            device,
            coins: &coins,
            history: &[],
            mechanism: MechanismView::Weak(WeakView { belief: &lambda, successor: &successor }),
        };
        assert_eq!(Stall.prob_alpha(&view(Device::One)), 0.0);
        assert_eq!(Stall.prob_alpha(&view(Device::Two)), 1.0);
    }

    #[test]
    fn strong_push_takes_the_likely_positive_step_near_the_end() {
        // One stage left, z slightly below the breakpoint 0. Device 1 playing
        // beta scores +0.09 with probability 0.7; alpha scores +0.49 only with
        // probability 0.3. Only a positive step reaches the upper interval.
        let coins = BinaryCoinPair::new(0.3, 0.7).unwrap();
        let nu = ProbabilityVector::from_pairs([("j1", 0.5), ("j2", 0.5)]).unwrap();
        let scores = ScoreTable::new(&coins);
        let partition = IntervalPartition::new(&nu);
        let view = |target: &str, sum_y: f64| {
            let push = GreedyPush::new(nu.outcomes(), target).unwrap();
            push.prob_alpha(&StageView {
                device: Device::One,
                coins: &coins,
                history: &[],
                mechanism: MechanismView::Strong(StrongView {
                    scores: &scores,
                    partition: &partition,
                    threshold: 1.0,
                    sum_y,
                    sum_y2: 0.999,
                }),
            })
        };
        assert_eq!(view("j2", -0.05), 0.0);
        // Aiming low from just above 0: alpha drops by 0.21 with probability 0.7.
        assert_eq!(view("j1", 0.05), 1.0);
    }

    #[test]
    fn suite_lists_every_label() {
        let suite = AdversarySuite::standard(&outcomes());
        assert_eq!(suite.names(), ["constant:alpha", "constant:beta", "push:j1", "push:j2", "stall"]);
    }
}
