//! Quitting games: players, continue actions and the payoff table.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{OutcomeSet, ProbabilityVector};

/// Name of the quit action in game files.
pub const QUIT: &str = "Q";
/// Matches any continue action in a payoff profile.
pub const ANY_CONTINUE: &str = "*";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Continue(usize),
    Quit,
}

impl Action {
    pub fn is_quit(self) -> bool {
        matches!(self, Action::Quit)
    }
}

/// One row of a game file: a (possibly wildcarded) profile and its payoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffEntry {
    pub profile: IndexMap<String, String>,
    pub u: Vec<f64>,
}

/// Serialized game. Missing players in a profile act as `*`; the first
/// matching entry wins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub players: Vec<String>,
    pub continue_actions: IndexMap<String, Vec<String>>,
    pub payoffs: Vec<PayoffEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuittingGame {
    players: OutcomeSet,
    continue_actions: Vec<OutcomeSet>,
    radix: Vec<usize>,
    table: Vec<Vec<f64>>,
}

impl QuittingGame {
    pub fn from_spec(spec: &GameSpec) -> Result<Self> {
        let players = OutcomeSet::new(spec.players.iter().cloned())?;
        if players.len() < 2 {
            return Err(Error::InvalidGame("a quitting game needs at least two players".into()));
        }
        let mut continue_actions = Vec::with_capacity(players.len());
        for p in players.labels() {
            let actions = spec
                .continue_actions
                .get(p)
                .ok_or_else(|| Error::InvalidGame(format!("no continue actions for `{p}`")))?;
            if actions.iter().any(|a| a == QUIT || a == ANY_CONTINUE) {
                return Err(Error::InvalidGame(format!("`{p}` uses a reserved action name")));
            }
            continue_actions.push(OutcomeSet::new(actions.iter().cloned())?);
        }
        if let Some(extra) = spec.continue_actions.keys().find(|k| players.index_of(k).is_err()) {
            return Err(Error::UnknownLabel(extra.clone()));
        }
        let radix: Vec<usize> = continue_actions.iter().map(|a| a.len() + 1).collect();
        let size: usize = radix.iter().product();

        // Compile each entry into a per-player set of allowed action codes.
        let mut compiled = Vec::with_capacity(spec.payoffs.len());
        for entry in &spec.payoffs {
            if entry.u.len() != players.len() {
                return Err(Error::InvalidGame(format!(
                    "payoff vector has {} entries for {} players",
                    entry.u.len(),
                    players.len()
                )));
            }
            if let Some(v) = entry.u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidGame(format!("payoff {v} is outside [0, 1]")));
            }
            let mut allowed: Vec<Option<usize>> = vec![None; players.len()];
            let mut quit_only = vec![false; players.len()];
            for (p, a) in &entry.profile {
                let i = players.index_of(p)?;
                match a.as_str() {
                    ANY_CONTINUE => {}
                    QUIT => quit_only[i] = true,
                    name => allowed[i] = Some(continue_actions[i].index_of(name)?),
                }
            }
            compiled.push((allowed, quit_only, entry.u.clone()));
        }

        let mut table = Vec::with_capacity(size);
        let mut game = Self { players, continue_actions, radix, table: Vec::new() };
        for code in 0..size {
            let profile = game.decode(code);
            let hit = compiled.iter().find(|(allowed, quit_only, _)| {
                profile.iter().enumerate().all(|(i, a)| match a {
                    Action::Quit => quit_only[i],
                    Action::Continue(k) => !quit_only[i] && allowed[i].map_or(true, |x| x == *k),
                })
            });
            match hit {
                Some((_, _, u)) => table.push(u.clone()),
                None => {
                    return Err(Error::InvalidGame(format!(
                        "no payoff for profile {}",
                        game.describe(&profile)
                    )))
                }
            }
        }
        game.table = table;
        Ok(game)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GameSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidGame(e.to_string()))?;
        Self::from_spec(&spec)
    }

    pub fn players(&self) -> &OutcomeSet {
        &self.players
    }

    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    pub fn continue_actions(&self, player: usize) -> &OutcomeSet {
        &self.continue_actions[player]
    }

    fn encode(&self, profile: &[Action]) -> usize {
        profile.iter().zip(&self.radix).rev().fold(0, |acc, (a, &r)| {
            let digit = match a {
                Action::Continue(k) => *k,
                Action::Quit => r - 1,
            };
            acc * r + digit
        })
    }

    fn decode(&self, mut code: usize) -> Vec<Action> {
        self.radix
            .iter()
            .map(|&r| {
                let d = code % r;
                code /= r;
                if d == r - 1 {
                    Action::Quit
                } else {
                    Action::Continue(d)
                }
            })
            .collect()
    }

    pub fn payoff(&self, profile: &[Action]) -> &[f64] {
        assert_eq!(profile.len(), self.num_players(), "profile length");
        &self.table[self.encode(profile)]
    }

    pub fn describe(&self, profile: &[Action]) -> String {
        let parts: Vec<String> = profile
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let name = match a {
                    Action::Quit => QUIT,
                    Action::Continue(k) => self.continue_actions[i].label(*k),
                };
                format!("{}={}", self.players.label(i), name)
            })
            .collect();
        format!("({})", parts.join(", "))
    }

    /// Players 1 and 2 carry the lottery and need two continue actions each.
    pub fn require_lottery_players(&self) -> Result<()> {
        for i in 0..2 {
            if self.continue_actions[i].len() < 2 {
                return Err(Error::TooFewContinueActions(self.players.label(i).to_string()));
            }
        }
        Ok(())
    }

    /// Expected payoff when each player's continue action is drawn from its
    /// entry of `dists`, and the players in `quitters` quit instead.
    pub fn expected_payoff(&self, dists: &[&ProbabilityVector], quitters: &[usize]) -> Vec<f64> {
        let n = self.num_players();
        let mut out = vec![0.0; n];
        let mut profile = vec![Action::Quit; n];
        self.accumulate(0, 1.0, dists, quitters, &mut profile, &mut out);
        out
    }

    fn accumulate(
        &self,
        i: usize,
        weight: f64,
        dists: &[&ProbabilityVector],
        quitters: &[usize],
        profile: &mut [Action],
        out: &mut [f64],
    ) {
        if weight == 0.0 {
            return;
        }
        if i == profile.len() {
            for (o, u) in out.iter_mut().zip(self.payoff(profile)) {
                *o += weight * u;
            }
            return;
        }
        if quitters.contains(&i) {
            profile[i] = Action::Quit;
            self.accumulate(i + 1, weight, dists, quitters, profile, out);
            return;
        }
        for (k, &m) in dists[i].masses().iter().enumerate() {
            profile[i] = Action::Continue(k);
            self.accumulate(i + 1, weight * m, dists, quitters, profile, out);
        }
    }
}
