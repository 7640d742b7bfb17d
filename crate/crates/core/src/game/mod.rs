//! Domain types of the model–platform–user game and the user-choice rules.

mod choice;
mod decomposition;

pub use choice::{
    allocate, allocate_hardmax, allocate_softmax, deviation_utility, platform_utilities,
    platform_utility,
};
pub use decomposition::{
    average_scores, decomposed_utility, deviation_advantage, deviation_advantage_for,
    deviation_advantage_soft, pairwise_deviation_advantage,
};

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::scalar::Scalar;

/// A finite set of user types with their population weights.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPopulation<S> {
    labels: Vec<String>,
    weights: Vec<S>,
}

impl<S: Scalar> UserPopulation<S> {
    pub fn new(labels: Vec<String>, weights: Vec<S>) -> Result<Self> {
        if labels.is_empty() {
            return Err(GameError::InvalidPopulation("no user types".into()));
        }
        if labels.len() != weights.len() {
            return Err(GameError::InvalidPopulation(format!(
                "{} labels but {} weights",
                labels.len(),
                weights.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(GameError::InvalidPopulation(format!(
                    "duplicate type label `{label}`"
                )));
            }
        }
        let mut total = S::zero();
        for (label, w) in labels.iter().zip(&weights) {
            if *w < S::zero() || !w.to_f64_lossy().is_finite() {
                return Err(GameError::InvalidPopulation(format!(
                    "weight of `{label}` is {w}"
                )));
            }
            total = total + w.clone();
        }
        let slack = S::from_f64(1e-9).unwrap_or_else(S::zero);
        if (total.clone() - S::one()).abs() > slack {
            return Err(GameError::InvalidPopulation(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self { labels, weights })
    }

    /// Uniform weights over `k` types labelled `t1..tk`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(GameError::InvalidPopulation("no user types".into()));
        }
        let w = S::one() / S::from_usize_exact(k);
        Self::new((1..=k).map(|i| format!("t{i}")).collect(), vec![w; k])
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn weight(&self, k: usize) -> &S {
        &self.weights[k]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Expected quality `S_j(θ)` of every model for every user type.
///
/// Rows are models, columns are user types.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix<S> {
    model_labels: Vec<String>,
    rows: Vec<Vec<S>>,
}

impl<S: Scalar> ScoreMatrix<S> {
    pub fn new(model_labels: Vec<String>, rows: Vec<Vec<S>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(GameError::InvalidScores("no models".into()));
        }
        if model_labels.len() != rows.len() {
            return Err(GameError::InvalidScores(format!(
                "{} labels for {} score rows",
                model_labels.len(),
                rows.len()
            )));
        }
        let k = rows[0].len();
        if k == 0 {
            return Err(GameError::InvalidScores("no user types".into()));
        }
        for (label, row) in model_labels.iter().zip(&rows) {
            if row.len() != k {
                return Err(GameError::InvalidScores(format!(
                    "row `{label}` has {} entries, expected {k}",
                    row.len()
                )));
            }
            if let Some(bad) = row
                .iter()
                .find(|s| **s < S::zero() || !s.to_f64_lossy().is_finite())
            {
                return Err(GameError::InvalidScores(format!(
                    "row `{label}` contains {bad}"
                )));
            }
        }
        Ok(Self { model_labels, rows })
    }

    /// Labels models `g1..gM`.
    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let labels = (1..=rows.len()).map(|j| format!("g{j}")).collect();
        Self::new(labels, rows)
    }

    pub fn n_models(&self) -> usize {
        self.rows.len()
    }

    pub fn n_types(&self) -> usize {
        self.rows[0].len()
    }

    pub fn score(&self, model: usize, user_type: usize) -> &S {
        &self.rows[model][user_type]
    }

    pub fn row(&self, model: usize) -> &[S] {
        &self.rows[model]
    }

    pub fn rows(&self) -> &[Vec<S>] {
        &self.rows
    }

    pub fn model_labels(&self) -> &[String] {
        &self.model_labels
    }

    pub fn model_index(&self, label: &str) -> Option<usize> {
        self.model_labels.iter().position(|l| l == label)
    }

    /// Column maxima: the best available score per user type.
    pub fn column_max(&self) -> Vec<S> {
        (0..self.n_types())
            .map(|k| {
                self.rows
                    .iter()
                    .map(|r| &r[k])
                    .fold(S::zero(), |m, s| if *s > m { s.clone() } else { m })
            })
            .collect()
    }

    /// Multiplies every score by `factor`, which must be positive.
    pub fn scaled(&self, factor: &S) -> Result<Self> {
        if !(*factor > S::zero()) {
            return Err(GameError::InvalidParameter(format!(
                "scale factor {factor} is not positive"
            )));
        }
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().map(|s| s.clone() * factor.clone()).collect())
            .collect();
        Ok(Self {
            model_labels: self.model_labels.clone(),
            rows,
        })
    }

    /// The first `m` models.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.n_models() {
            return Err(GameError::InvalidParameter(format!(
                "cannot keep {m} of {} models",
                self.n_models()
            )));
        }
        Ok(Self {
            model_labels: self.model_labels[..m].to_vec(),
            rows: self.rows[..m].to_vec(),
        })
    }

    /// Appends one model row.
    pub fn with_model(&self, label: impl Into<String>, row: Vec<S>) -> Result<Self> {
        let mut labels = self.model_labels.clone();
        let mut rows = self.rows.clone();
        labels.push(label.into());
        rows.push(row);
        Self::new(labels, rows)
    }
}

/// How users split across platforms.
#[derive(Debug, Clone, PartialEq)]
pub enum ChoiceRule<S> {
    /// Users go to the best-scoring platforms, splitting ties evenly.
    Hardmax,
    /// Users split in proportion to `exp(S / tau)`.
    Softmax { tau: S },
}

impl<S: Scalar> ChoiceRule<S> {
    pub fn softmax(tau: S) -> Result<Self> {
        let rule = ChoiceRule::Softmax { tau };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ChoiceRule::Hardmax => Ok(()),
            ChoiceRule::Softmax { tau } if *tau > S::zero() => Ok(()),
            ChoiceRule::Softmax { tau } => Err(GameError::InvalidParameter(format!(
                "softmax temperature must be positive, got {tau}"
            ))),
        }
    }

    pub fn is_hardmax(&self) -> bool {
        matches!(self, ChoiceRule::Hardmax)
    }
}

/// Score matrix, population, platform count and choice rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec<S> {
    scores: ScoreMatrix<S>,
    population: UserPopulation<S>,
    n_platforms: usize,
    choice: ChoiceRule<S>,
}

impl<S: Scalar> GameSpec<S> {
    pub fn new(
        scores: ScoreMatrix<S>,
        population: UserPopulation<S>,
        n_platforms: usize,
        choice: ChoiceRule<S>,
    ) -> Result<Self> {
        if scores.n_types() != population.len() {
            return Err(GameError::InvalidInstance(format!(
                "score matrix covers {} user types, population has {}",
                scores.n_types(),
                population.len()
            )));
        }
        if n_platforms == 0 {
            return Err(GameError::InvalidInstance("need at least one platform".into()));
        }
        choice.validate()?;
        Ok(Self {
            scores,
            population,
            n_platforms,
            choice,
        })
    }

    pub fn hardmax(
        scores: ScoreMatrix<S>,
        population: UserPopulation<S>,
        n_platforms: usize,
    ) -> Result<Self> {
        Self::new(scores, population, n_platforms, ChoiceRule::Hardmax)
    }

    pub fn scores(&self) -> &ScoreMatrix<S> {
        &self.scores
    }

    pub fn population(&self) -> &UserPopulation<S> {
        &self.population
    }

    pub fn n_platforms(&self) -> usize {
        self.n_platforms
    }

    pub fn n_models(&self) -> usize {
        self.scores.n_models()
    }

    pub fn n_types(&self) -> usize {
        self.population.len()
    }

    pub fn choice(&self) -> &ChoiceRule<S> {
        &self.choice
    }

    pub fn with_platforms(&self, n_platforms: usize) -> Result<Self> {
        Self::new(
            self.scores.clone(),
            self.population.clone(),
            n_platforms,
            self.choice.clone(),
        )
    }

    pub fn with_choice(&self, choice: ChoiceRule<S>) -> Result<Self> {
        Self::new(
            self.scores.clone(),
            self.population.clone(),
            self.n_platforms,
            choice,
        )
    }

    pub fn with_scores(&self, scores: ScoreMatrix<S>) -> Result<Self> {
        Self::new(
            scores,
            self.population.clone(),
            self.n_platforms,
            self.choice.clone(),
        )
    }

    /// Errors unless `profile` has one in-range model per platform.
    pub fn check_profile(&self, profile: &StrategyProfile) -> Result<()> {
        if profile.len() != self.n_platforms {
            return Err(GameError::InvalidProfile(format!(
                "profile has {} entries for {} platforms",
                profile.len(),
                self.n_platforms
            )));
        }
        if let Some(&bad) = profile.choices().iter().find(|&&m| m >= self.n_models()) {
            return Err(GameError::InvalidProfile(format!(
                "model index {bad} out of range for {} models",
                self.n_models()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_platform(&self, platform: usize) -> Result<()> {
        if platform >= self.n_platforms {
            return Err(GameError::InvalidProfile(format!(
                "platform {platform} out of range for {} platforms",
                self.n_platforms
            )));
        }
        Ok(())
    }

    pub(crate) fn check_model(&self, model: usize) -> Result<()> {
        if model >= self.n_models() {
            return Err(GameError::InvalidProfile(format!(
                "model index {model} out of range for {} models",
                self.n_models()
            )));
        }
        Ok(())
    }
}

/// The model chosen by each platform. Indices are 0-based; [`fmt::Display`]
/// renders them 1-based, e.g. `(g1,g3)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StrategyProfile(Vec<usize>);

impl StrategyProfile {
    pub fn new(choices: Vec<usize>) -> Self {
        Self(choices)
    }

    pub fn homogeneous(model: usize, n_platforms: usize) -> Self {
        Self(vec![model; n_platforms])
    }

    /// Builds a profile from 1-based model numbers.
    pub fn from_one_based(choices: &[usize]) -> Result<Self> {
        choices
            .iter()
            .map(|&c| {
                c.checked_sub(1).ok_or_else(|| {
                    GameError::InvalidProfile("model numbers start at 1".into())
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn choices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, platform: usize) -> usize {
        self.0[platform]
    }

    /// Copy with `platform` switched to `model`.
    pub fn with_choice(&self, platform: usize, model: usize) -> Self {
        let mut next = self.0.clone();
        next[platform] = model;
        Self(next)
    }

    /// Copy with one more platform playing `model`.
    pub fn extended(&self, model: usize) -> Self {
        let mut next = self.0.clone();
        next.push(model);
        Self(next)
    }

    /// Sorted model indices; coverage depends only on this.
    pub fn multiset(&self) -> Vec<usize> {
        let mut m = self.0.clone();
        m.sort_unstable();
        m
    }

    pub fn distinct_count(&self) -> usize {
        let mut m = self.multiset();
        m.dedup();
        m.len()
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|m| m + 1).collect()
    }
}

impl fmt::Display for StrategyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "g{}", m + 1)?;
        }
        write!(f, ")")
    }
}

/// `p[i][k]`: probability that a user of type `k` picks platform `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMatrix<S> {
    rows: Vec<Vec<S>>,
}

impl<S: Scalar> AllocationMatrix<S> {
    pub(crate) fn from_rows(rows: Vec<Vec<S>>) -> Self {
        Self { rows }
    }

    pub fn get(&self, platform: usize, user_type: usize) -> &S {
        &self.rows[platform][user_type]
    }

    pub fn row(&self, platform: usize) -> &[S] {
        &self.rows[platform]
    }

    pub fn rows(&self) -> &[Vec<S>] {
        &self.rows
    }

    pub fn column_sum(&self, user_type: usize) -> S {
        self.rows
            .iter()
            .fold(S::zero(), |acc, r| acc + r[user_type].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i}")).collect()
    }

    #[test]
    fn population_validation() {
        assert!(UserPopulation::new(labels(2), vec![0.5, 0.5]).is_ok());
        assert!(UserPopulation::new(labels(2), vec![0.5, 0.6]).is_err());
        assert!(UserPopulation::new(labels(2), vec![1.5, -0.5]).is_err());
        assert!(UserPopulation::<f64>::new(vec![], vec![]).is_err());
        assert!(UserPopulation::new(vec!["a".into(), "a".into()], vec![0.5, 0.5]).is_err());
        // within the 1e-9 slack
        assert!(UserPopulation::new(labels(2), vec![0.5, 0.5 + 5e-10]).is_ok());
    }

    #[test]
    fn score_matrix_validation() {
        assert!(ScoreMatrix::from_rows(vec![vec![0.1, 0.2]]).is_ok());
        assert!(ScoreMatrix::from_rows(vec![vec![0.1, -0.2]]).is_err());
        assert!(ScoreMatrix::from_rows(vec![vec![0.1, f64::NAN]]).is_err());
        assert!(ScoreMatrix::from_rows(vec![vec![0.1], vec![0.1, 0.2]]).is_err());
        assert!(ScoreMatrix::<f64>::from_rows(vec![]).is_err());
        // scores above one are allowed
        assert!(ScoreMatrix::from_rows(vec![vec![3.5]]).is_ok());
    }

    #[test]
    fn spec_rejects_mismatches() {
        let scores = ScoreMatrix::from_rows(vec![vec![0.1, 0.2]]).unwrap();
        let pop3 = UserPopulation::uniform(3).unwrap();
        assert!(GameSpec::hardmax(scores.clone(), pop3, 2).is_err());
        let pop2 = UserPopulation::uniform(2).unwrap();
        assert!(GameSpec::hardmax(scores.clone(), pop2.clone(), 0).is_err());
        assert!(GameSpec::new(scores, pop2, 2, ChoiceRule::Softmax { tau: 0.0 }).is_err());
    }

    #[test]
    fn profile_rendering_is_one_based() {
        let p = StrategyProfile::new(vec![0, 2]);
        assert_eq!(p.to_string(), "(g1,g3)");
        assert_eq!(StrategyProfile::from_one_based(&[1, 3]).unwrap(), p);
        assert!(StrategyProfile::from_one_based(&[0]).is_err());
        assert_eq!(StrategyProfile::new(vec![2, 0, 2]).distinct_count(), 2);
    }

    #[test]
    fn profile_checked_against_spec() {
        let spec = GameSpec::hardmax(
            ScoreMatrix::from_rows(vec![vec![0.1], vec![0.2]]).unwrap(),
            UserPopulation::uniform(1).unwrap(),
            2,
        )
        .unwrap();
        assert!(spec.check_profile(&StrategyProfile::new(vec![0, 1])).is_ok());
        assert!(spec.check_profile(&StrategyProfile::new(vec![0, 2])).is_err());
        assert!(spec.check_profile(&StrategyProfile::new(vec![0])).is_err());
    }
}
