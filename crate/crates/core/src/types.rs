//! Shared domain types: letters, outcome sets, distributions, coins and
//! transcripts.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`ProbabilityVector`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// One of the two letters a binary device can emit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Letter {
    Alpha,
    Beta,
}

impl Letter {
    pub const BOTH: [Letter; 2] = [Letter::Alpha, Letter::Beta];

    pub fn other(self) -> Letter {
        match self {
            Letter::Alpha => Letter::Beta,
            Letter::Beta => Letter::Alpha,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Letter::Alpha => 0,
            Letter::Beta => 1,
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Letter::Alpha => f.write_str("alpha"),
            Letter::Beta => f.write_str("beta"),
        }
    }
}

/// Letters emitted by device 1 and device 2 at one stage.
pub type LetterPair = (Letter, Letter);

/// All four letter pairs in canonical order.
pub const LETTER_PAIRS: [LetterPair; 4] = [
    (Letter::Alpha, Letter::Alpha),
    (Letter::Alpha, Letter::Beta),
    (Letter::Beta, Letter::Alpha),
    (Letter::Beta, Letter::Beta),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Device {
    One,
    Two,
}

impl Device {
    pub const BOTH: [Device; 2] = [Device::One, Device::Two];

    pub fn other(self) -> Device {
        match self {
            Device::One => Device::Two,
            Device::Two => Device::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Device::One => 0,
            Device::Two => 1,
        }
    }

    /// This device's letter within a pair.
    pub fn letter_of(self, pair: LetterPair) -> Letter {
        match self {
            Device::One => pair.0,
            Device::Two => pair.1,
        }
    }

    /// Builds the pair where this device plays `own` and the other device `other`.
    pub fn pair(self, own: Letter, other: Letter) -> LetterPair {
        match self {
            Device::One => (own, other),
            Device::Two => (other, own),
        }
    }
}

impl fmt::Display for Device {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Device::One => f.write_str("device1"),
            Device::Two => f.write_str("device2"),
        }
    }
}

/// An ordered set of distinct labels. The order is fixed for the lifetime of
/// the value and drives every index-dependent construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeSet {
    labels: Arc<[String]>,
}

impl OutcomeSet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::EmptyOutcomeSet);
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { labels: labels.into() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }
}

/// A probability distribution over an [`OutcomeSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector {
    outcomes: OutcomeSet,
    mass: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(outcomes: OutcomeSet, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != outcomes.len() {
            return Err(Error::LengthMismatch { expected: outcomes.len(), got: mass.len() });
        }
        for (label, &value) in outcomes.labels().iter().zip(&mass) {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::WeightOutOfRange { label: label.clone(), value });
            }
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized(total));
        }
        Ok(Self { outcomes, mass })
    }

    /// Builds a distribution from `(label, mass)` pairs; label order is kept.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let (labels, mass): (Vec<String>, Vec<f64>) =
            pairs.into_iter().map(|(l, m)| (l.into(), m)).unzip();
        Self::new(OutcomeSet::new(labels)?, mass)
    }

    pub fn uniform(outcomes: OutcomeSet) -> Self {
        let n = outcomes.len();
        Self { mass: vec![1.0 / n as f64; n], outcomes }
    }

    pub fn dirac(outcomes: OutcomeSet, index: usize) -> Self {
        let mut mass = vec![0.0; outcomes.len()];
        mass[index] = 1.0;
        Self { outcomes, mass }
    }

    /// Skips validation; callers guarantee the invariants hold.
    pub(crate) fn from_parts_unchecked(outcomes: OutcomeSet, mass: Vec<f64>) -> Self {
        Self { outcomes, mass }
    }

    pub fn outcomes(&self) -> &OutcomeSet {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass(&self, index: usize) -> f64 {
        self.mass[index]
    }

    pub fn mass_of(&self, label: &str) -> Result<f64> {
        Ok(self.mass[self.outcomes.index_of(label)?])
    }

    /// Indices of labels with positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.mass.len()).filter(|&i| self.mass[i] > 0.0).collect()
    }

    pub fn support_labels(&self) -> Vec<&str> {
        self.support().into_iter().map(|i| self.outcomes.label(i)).collect()
    }

    pub fn support_len(&self) -> usize {
        self.mass.iter().filter(|&&m| m > 0.0).count()
    }

    /// The index carrying all the mass, if the distribution is a point mass.
    pub fn dirac_index(&self) -> Option<usize> {
        let mut found = None;
        for (i, &m) in self.mass.iter().enumerate() {
            if m > 0.0 {
                if found.is_some() {
                    return None;
                }
                found = Some(i);
            }
        }
        found
    }

    pub fn linf_distance(&self, other: &ProbabilityVector) -> Result<f64> {
        if self.outcomes != other.outcomes {
            return Err(Error::OutcomeSetMismatch);
        }
        Ok(self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Draws an index given a uniform variate in `[0, 1)`.
    pub fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &m) in self.mass.iter().enumerate() {
            if m <= 0.0 {
                continue;
            }
            acc += m;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }
}

/// Stationary per-stage probabilities of `alpha` for the two devices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryCoinPair {
    pub p1_alpha: f64,
    pub p2_alpha: f64,
}

impl BinaryCoinPair {
    pub fn new(p1_alpha: f64, p2_alpha: f64) -> Result<Self> {
        for (device, p) in [(1u8, p1_alpha), (2u8, p2_alpha)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::DegenerateCoin { device, p });
            }
        }
        Ok(Self { p1_alpha, p2_alpha })
    }

    pub fn prob(&self, device: Device, letter: Letter) -> f64 {
        let p = match device {
            Device::One => self.p1_alpha,
            Device::Two => self.p2_alpha,
        };
        match letter {
            Letter::Alpha => p,
            Letter::Beta => 1.0 - p,
        }
    }

    /// Probability of the pair under honest play of both devices.
    pub fn pair_prob(&self, pair: LetterPair) -> f64 {
        self.prob(Device::One, pair.0) * self.prob(Device::Two, pair.1)
    }

    /// Smallest single-letter probability.
    pub fn c0(&self) -> f64 {
        self.p1_alpha.min(1.0 - self.p1_alpha).min(self.p2_alpha).min(1.0 - self.p2_alpha)
    }

    /// Smallest letter-pair probability.
    pub fn c1(&self) -> f64 {
        LETTER_PAIRS.iter().map(|&p| self.pair_prob(p)).fold(f64::INFINITY, f64::min)
    }
}

/// Splits a finite alphabet into the labels read as `alpha` and the rest.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryPartition {
    source: OutcomeSet,
    to_alpha: Vec<bool>,
}

impl BinaryPartition {
    pub fn new<S: AsRef<str>>(source: OutcomeSet, to_alpha: &[S]) -> Result<Self> {
        let mut flags = vec![false; source.len()];
        for label in to_alpha {
            flags[source.index_of(label.as_ref())?] = true;
        }
        if !flags.iter().any(|&f| f) || flags.iter().all(|&f| f) {
            return Err(Error::ImproperPartition);
        }
        Ok(Self { source, to_alpha: flags })
    }

    pub fn source(&self) -> &OutcomeSet {
        &self.source
    }

    pub fn letter_of(&self, index: usize) -> Letter {
        if self.to_alpha[index] {
            Letter::Alpha
        } else {
            Letter::Beta
        }
    }

    pub fn alpha_labels(&self) -> Vec<&str> {
        (0..self.source.len())
            .filter(|&i| self.to_alpha[i])
            .map(|i| self.source.label(i))
            .collect()
    }

    /// Mass sent to each letter, `[alpha, beta]`.
    pub fn split_mass(&self, probs: &ProbabilityVector) -> Result<[f64; 2]> {
        if probs.outcomes() != &self.source {
            return Err(Error::OutcomeSetMismatch);
        }
        let mut split = [0.0; 2];
        for (i, &m) in probs.masses().iter().enumerate() {
            split[self.letter_of(i).index()] += m;
        }
        Ok(split)
    }
}

/// Collapses a distribution over a larger alphabet to the probability of
/// `alpha` under `partition`.
pub fn binarize(partition: &BinaryPartition, per_letter_probs: &ProbabilityVector) -> Result<f64> {
    let [alpha, beta] = partition.split_mass(per_letter_probs)?;
    if alpha <= 0.0 {
        return Err(Error::ZeroMassPart(Letter::Alpha));
    }
    if beta <= 0.0 {
        return Err(Error::ZeroMassPart(Letter::Beta));
    }
    Ok(alpha)
}

/// How a mechanism run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalStatus {
    Running,
    Outcome(usize),
    Timeout,
}

/// Append-only record of one run: the letter pair of every stage plus the
/// mechanism snapshot taken right after it.
#[derive(Clone, Debug)]
pub struct Transcript<S> {
    letters: Vec<LetterPair>,
    snapshots: Vec<S>,
    terminal: TerminalStatus,
}

impl<S> Default for Transcript<S> {
    fn default() -> Self {
        Self { letters: Vec::new(), snapshots: Vec::new(), terminal: TerminalStatus::Running }
    }
}

impl<S> Transcript<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, pair: LetterPair, snapshot: S) {
        debug_assert_eq!(self.terminal, TerminalStatus::Running);
        self.letters.push(pair);
        self.snapshots.push(snapshot);
    }

    pub fn finish(&mut self, status: TerminalStatus) {
        self.terminal = status;
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Letter pairs played so far; this is the public history.
    pub fn letters(&self) -> &[LetterPair] {
        &self.letters
    }

    pub fn snapshots(&self) -> &[S] {
        &self.snapshots
    }

    pub fn terminal(&self) -> TerminalStatus {
        self.terminal
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LetterPair, &S)> {
        self.letters.iter().zip(&self.snapshots)
    }
}
