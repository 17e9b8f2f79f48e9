//! Correlated reference profiles: each block a public signal designates at
//! most one player, who then quits with a small probability while everyone
//! else keeps playing a fixed non-absorbing mixed action.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::model::QuittingGame;
use crate::error::{Error, Result};
use crate::types::{OutcomeSet, ProbabilityVector};

/// Label of the "nobody designated" outcome.
pub const NOBODY: &str = "0";

/// Signal outcomes: `0` followed by the players.
pub fn designation_outcomes(game: &QuittingGame) -> OutcomeSet {
    let labels = std::iter::once(NOBODY.to_string()).chain(game.players().labels().iter().cloned());
    OutcomeSet::new(labels).expect("player names are distinct and never `0`")
}

#[derive(Clone, Debug, PartialEq)]
pub enum DesignationRule {
    /// The same distribution over `0` and the players in every block.
    Stationary(ProbabilityVector),
    /// Block `t` (from 1) designates player `(t - 1) mod n` with the given
    /// probability and nobody otherwise.
    Cyclic { probability: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignationSpec {
    Stationary(IndexMap<String, f64>),
    Cyclic { probability: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Constant(f64),
    PerPlayer(IndexMap<String, f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SunspotSpec {
    pub x: IndexMap<String, IndexMap<String, f64>>,
    pub designation: DesignationSpec,
    pub eta: EtaSpec,
    #[serde(default)]
    pub target_payoff: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SunspotProfile {
    outcomes: OutcomeSet,
    x: Vec<ProbabilityVector>,
    rule: DesignationRule,
    eta: Vec<f64>,
    target_payoff: Vec<f64>,
}

impl SunspotProfile {
    /// Validates the data against `game`. A missing target is filled with the
    /// exact payoff of the profile.
    pub fn new(
        game: &QuittingGame,
        x: Vec<ProbabilityVector>,
        rule: DesignationRule,
        eta: Vec<f64>,
        target_payoff: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = game.num_players();
        let outcomes = designation_outcomes(game);
        if x.len() != n || eta.len() != n {
            return Err(Error::InvalidSunspot(format!("expected data for {n} players")));
        }
        for (i, xi) in x.iter().enumerate() {
            if xi.outcomes() != game.continue_actions(i) {
                return Err(Error::InvalidSunspot(format!(
                    "mixed action of `{}` is not over its continue actions",
                    game.players().label(i)
                )));
            }
        }
        if let Some(e) = eta.iter().find(|e| !(0.0..1.0).contains(*e)) {
            return Err(Error::InvalidSunspot(format!("quit probability {e} is outside [0, 1)")));
        }
        match &rule {
            DesignationRule::Stationary(d) if d.outcomes() != &outcomes => {
                return Err(Error::InvalidSunspot("designation must range over `0` and the players".into()))
            }
            DesignationRule::Cyclic { probability } if !(0.0..=1.0).contains(probability) => {
                return Err(Error::InvalidSunspot(format!("designation probability {probability}")))
            }
            _ => {}
        }
        let mut profile = Self { outcomes, x, rule, eta, target_payoff: Vec::new() };
        let exact = profile.exact_payoff(game);
        profile.target_payoff = match target_payoff {
            Some(t) if t.len() != n => {
                return Err(Error::InvalidSunspot(format!("target payoff needs {n} entries")))
            }
            Some(t) => t,
            None => exact,
        };
        Ok(profile)
    }

    pub fn from_spec(game: &QuittingGame, spec: &SunspotSpec) -> Result<Self> {
        let players = game.players();
        let mut x = Vec::with_capacity(players.len());
        for (i, p) in players.labels().iter().enumerate() {
            let masses = spec
                .x
                .get(p)
                .ok_or_else(|| Error::InvalidSunspot(format!("no mixed action for `{p}`")))?;
            let actions = game.continue_actions(i);
            let mut m = vec![0.0; actions.len()];
            for (a, &v) in masses {
                m[actions.index_of(a)?] = v;
            }
            x.push(ProbabilityVector::new(actions.clone(), m)?);
        }
        let rule = match &spec.designation {
            DesignationSpec::Cyclic { probability } => DesignationRule::Cyclic { probability: *probability },
            DesignationSpec::Stationary(map) => {
                let outcomes = designation_outcomes(game);
                let mut m = vec![0.0; outcomes.len()];
                for (label, &v) in map {
                    m[outcomes.index_of(label)?] = v;
                }
                DesignationRule::Stationary(ProbabilityVector::new(outcomes, m)?)
            }
        };
        let eta = match &spec.eta {
            EtaSpec::Constant(e) => vec![*e; players.len()],
            EtaSpec::PerPlayer(map) => {
                let mut e = vec![0.0; players.len()];
                for (p, &v) in map {
                    e[players.index_of(p)?] = v;
                }
                e
            }
        };
        Self::new(game, x, rule, eta, spec.target_payoff.clone())
    }

    pub fn outcomes(&self) -> &OutcomeSet {
        &self.outcomes
    }

    pub fn x(&self) -> &[ProbabilityVector] {
        &self.x
    }

    pub fn rule(&self) -> &DesignationRule {
        &self.rule
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn target_payoff(&self) -> &[f64] {
        &self.target_payoff
    }

    /// Number of blocks after which the designation distributions repeat.
    pub fn period(&self) -> usize {
        match self.rule {
            DesignationRule::Stationary(_) => 1,
            DesignationRule::Cyclic { .. } => self.x.len(),
        }
    }

    /// Signal distribution of block `block` (counted from 1).
    pub fn designation(&self, block: u64) -> ProbabilityVector {
        match &self.rule {
            DesignationRule::Stationary(d) => d.clone(),
            DesignationRule::Cyclic { probability } => {
                let n = self.x.len() as u64;
                let player = ((block.max(1) - 1) % n) as usize;
                let mut m = vec![0.0; self.outcomes.len()];
                m[0] = 1.0 - probability;
                m[player + 1] += probability;
                ProbabilityVector::new(self.outcomes.clone(), m).expect("valid by construction")
            }
        }
    }

    /// Probability that block `block` ends the game.
    pub fn block_quit_probability(&self, block: u64) -> f64 {
        let d = self.designation(block);
        (0..self.x.len()).map(|i| d.mass(i + 1) * self.eta[i]).sum()
    }

    /// Exact undiscounted payoff of the reference profile: absorbing payoffs
    /// weighted by where absorption happens, summed over one period and
    /// rescaled by the geometric series of repeated periods. Without any
    /// absorption it is the stationary all-continue payoff.
    pub fn exact_payoff(&self, game: &QuittingGame) -> Vec<f64> {
        let n = self.x.len();
        let dists: Vec<&ProbabilityVector> = self.x.iter().collect();
        let quit_payoff: Vec<Vec<f64>> = (0..n).map(|i| game.expected_payoff(&dists, &[i])).collect();
        let mut acc = vec![0.0; n];
        let mut survive = 1.0;
        for block in 1..=self.period() as u64 {
            let d = self.designation(block);
            for i in 0..n {
                let q = d.mass(i + 1) * self.eta[i];
                for (a, u) in acc.iter_mut().zip(&quit_payoff[i]) {
                    *a += survive * q * u;
                }
            }
            survive *= 1.0 - self.block_quit_probability(block);
        }
        if survive >= 1.0 {
            return game.expected_payoff(&dists, &[]);
        }
        acc.iter().map(|a| a / (1.0 - survive)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::model::GameSpec;

    fn game() -> QuittingGame {
        let spec: GameSpec = serde_json::from_str(
            r#"{"players": ["a", "b"],
                "continue_actions": {"a": ["L", "R"], "b": ["L", "R"]},
                "payoffs": [
                  {"profile": {"a": "Q", "b": "Q"}, "u": [0, 0]},
                  {"profile": {"a": "Q"}, "u": [0.4, 0.8]},
                  {"profile": {"b": "Q"}, "u": [1.0, 0.2]},
                  {"profile": {}, "u": [0.1, 0.1]}
                ]}"#,
        )
        .unwrap();
        QuittingGame::from_spec(&spec).unwrap()
    }

    fn sunspot(rule: &str, eta: &str) -> SunspotSpec {
        serde_json::from_str(&format!(
            r#"{{"x": {{"a": {{"L": 0.5, "R": 0.5}}, "b": {{"L": 1.0}}}},
                "designation": {rule}, "eta": {eta}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn stationary_payoff_is_quit_mixture() {
        let g = game();
        let s = SunspotProfile::from_spec(&g, &sunspot(r#"{"stationary": {"0": 0.5, "a": 0.25, "b": 0.25}}"#, "0.1"))
            .unwrap();
        let p = s.target_payoff();
        assert!((p[0] - 0.7).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn cyclic_payoff_favours_first_designated() {
        let g = game();
        let s = SunspotProfile::from_spec(&g, &sunspot(r#"{"cyclic": {"probability": 1.0}}"#, "0.5")).unwrap();
        // a quits first with probability 0.5 / 0.75 = 2/3
        let w = 2.0 / 3.0;
        let p = s.target_payoff();
        assert!((p[0] - (w * 0.4 + (1.0 - w) * 1.0)).abs() < 1e-12);
        assert_eq!(s.designation(2).mass(2), 1.0);
    }

    #[test]
    fn no_quitting_pays_continue_payoff() {
        let g = game();
        let s = SunspotProfile::from_spec(&g, &sunspot(r#"{"stationary": {"0": 1.0}}"#, "0.1")).unwrap();
        assert_eq!(s.target_payoff(), &[0.1, 0.1]);
    }

    #[test]
    fn bad_eta_is_rejected() {
        let g = game();
        assert!(SunspotProfile::from_spec(&g, &sunspot(r#"{"cyclic": {"probability": 1.0}}"#, "1.0")).is_err());
    }
}
