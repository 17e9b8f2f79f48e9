//! Empirical outcome distributions, distances and confidence margins.

use indexmap::IndexMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{OutcomeSet, ProbabilityVector};

/// Outcome counts over a label set. Runs that never produced an outcome
/// (timeouts) are kept in `unresolved`: they count toward `n` but toward no
/// label, so their mass shows up as lost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmpiricalDistribution {
    outcomes: OutcomeSet,
    counts: Vec<u64>,
    unresolved: u64,
}

impl EmpiricalDistribution {
    pub fn new(outcomes: OutcomeSet) -> Self {
        Self { counts: vec![0; outcomes.len()], outcomes, unresolved: 0 }
    }

    pub fn from_counts(outcomes: OutcomeSet, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != outcomes.len() {
            return Err(Error::LengthMismatch { expected: outcomes.len(), got: counts.len() });
        }
        Ok(Self { outcomes, counts, unresolved: 0 })
    }

    /// Tallies outcome indices; `None` is an unresolved run.
    pub fn from_outcomes<I: IntoIterator<Item = Option<usize>>>(outcomes: OutcomeSet, it: I) -> Self {
        let mut e = Self::new(outcomes);
        for o in it {
            e.record(o);
        }
        e
    }

    pub fn record(&mut self, outcome: Option<usize>) {
        match outcome {
            Some(j) => self.counts[j] += 1,
            None => self.unresolved += 1,
        }
    }

    /// Adds another tally over the same labels.
    pub fn merge(&mut self, other: &EmpiricalDistribution) -> Result<()> {
        if self.outcomes != other.outcomes {
            return Err(Error::OutcomeSetMismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.unresolved += other.unresolved;
        Ok(())
    }

    pub fn outcomes(&self) -> &OutcomeSet {
        &self.outcomes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn unresolved(&self) -> u64 {
        self.unresolved
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.unresolved
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n();
        if n == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / n as f64).collect()
    }

    pub fn unresolved_fraction(&self) -> f64 {
        match self.n() {
            0 => 0.0,
            n => self.unresolved as f64 / n as f64,
        }
    }
}

fn check_pair(e: &EmpiricalDistribution, nu: &ProbabilityVector) -> Result<()> {
    if e.outcomes() != nu.outcomes() {
        return Err(Error::OutcomeSetMismatch);
    }
    if e.n() == 0 {
        return Err(Error::EmptySample);
    }
    Ok(())
}

/// `max_j |freq(j) - nu(j)|`.
pub fn linf_distance(e: &EmpiricalDistribution, nu: &ProbabilityVector) -> Result<f64> {
    check_pair(e, nu)?;
    Ok(e.frequencies().iter().zip(nu.masses()).map(|(f, m)| (f - m).abs()).fold(0.0, f64::max))
}

/// Simultaneous Hoeffding half-width over `num_labels` frequencies at
/// confidence `1 - delta`: `sqrt(ln(2 L / delta) / (2 n))`.
pub fn hoeffding_margin(n: u64, num_labels: usize, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("hoeffding margin needs n >= 1".into()));
    }
    if num_labels == 0 {
        return Err(Error::InvalidArgument("hoeffding margin needs at least one label".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(((2.0 * num_labels as f64 / delta).ln() / (2.0 * n as f64)).sqrt())
}

/// Per-label `max(freq(j) - nu(j), 0)`.
pub fn one_sided_excess(e: &EmpiricalDistribution, nu: &ProbabilityVector) -> Result<Vec<f64>> {
    check_pair(e, nu)?;
    Ok(e.frequencies().iter().zip(nu.masses()).map(|(f, m)| (f - m).max(0.0)).collect())
}

/// Pearson statistic over labels with positive target mass. Reported only.
/// `None` when a zero-mass label was observed or nothing was sampled.
pub fn chi_square(e: &EmpiricalDistribution, nu: &ProbabilityVector) -> Option<f64> {
    check_pair(e, nu).ok()?;
    let n = e.n() as f64;
    let mut stat = 0.0;
    for (&c, &m) in e.counts().iter().zip(nu.masses()) {
        if m == 0.0 {
            if c > 0 {
                return None;
            }
            continue;
        }
        let expected = n * m;
        stat += (c as f64 - expected).powi(2) / expected;
    }
    if e.unresolved() > 0 {
        return None;
    }
    Some(stat)
}

/// Summary of one empirical distribution against its target.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionReport {
    pub n: u64,
    pub freq: IndexMap<String, f64>,
    pub unresolved: u64,
    pub linf: f64,
    pub margin: f64,
    pub excess: IndexMap<String, f64>,
    pub chi2: Option<f64>,
}

impl DistributionReport {
    pub fn new(e: &EmpiricalDistribution, nu: &ProbabilityVector, delta: f64) -> Result<Self> {
        let labels = e.outcomes().labels();
        let by_label = |v: Vec<f64>| labels.iter().cloned().zip(v).collect::<IndexMap<_, _>>();
        Ok(Self {
            n: e.n(),
            freq: by_label(e.frequencies()),
            unresolved: e.unresolved(),
            linf: linf_distance(e, nu)?,
            margin: hoeffding_margin(e.n(), labels.len(), delta)?,
            excess: by_label(one_sided_excess(e, nu)?),
            chi2: chi_square(e, nu),
        })
    }
}
