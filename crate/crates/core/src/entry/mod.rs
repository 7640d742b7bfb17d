//! Best-response entry with a finite-outcome generator.
//!
//! An entrant generator is a softmax distribution over a finite outcome set;
//! a user type's score for it is the exact expected reward. That keeps every
//! gradient checkable against a closed form.

mod training;

pub use training::{
    evaluate_entrant, toy_market, train_direct_gradient, train_resampling, EntryReport,
    EpochRecord, RoundRecord, ToyMarket,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game::{ScoreMatrix, UserPopulation};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyGenerator {
    labels: Vec<String>,
    logits: Vec<f64>,
}

impl ToyGenerator {
    pub fn new(labels: Vec<String>, logits: Vec<f64>) -> Result<Self> {
        if labels.is_empty() || labels.len() != logits.len() {
            return Err(GameError::InvalidInput(format!(
                "{} outcome labels for {} logits",
                labels.len(),
                logits.len()
            )));
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(GameError::InvalidParameter("non-finite logit".into()));
        }
        Ok(Self { labels, logits })
    }

    pub fn uniform(labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        Self::new(labels, vec![0.0; n])
    }

    /// Generator whose distribution is `probs` (strictly positive).
    pub fn from_distribution(labels: Vec<String>, probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|p| !(*p > 0.0)) {
            return Err(GameError::InvalidParameter(
                "generator probabilities must be positive".into(),
            ));
        }
        Self::new(labels, probs.iter().map(|p| p.ln()).collect())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn with_logits(&self, logits: Vec<f64>) -> Result<Self> {
        Self::new(self.labels.clone(), logits)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let max = self.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = self.logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = e.iter().sum();
        e.into_iter().map(|v| v / total).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        sample_categorical(&self.probabilities(), n, rng)
    }
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let cumulative: Vec<f64> = probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().unwrap_or(&0.0);
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(cumulative.len() - 1)
        })
        .collect()
}

/// `r_θ(x)`: one row per user type, one column per outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    rows: Vec<Vec<f64>>,
}

impl RewardTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(GameError::InvalidInput("reward rows must be non-empty and equal length".into()));
        }
        if rows.iter().flatten().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(GameError::InvalidInput("rewards must lie in [0, 1]".into()));
        }
        Ok(Self { rows })
    }

    pub fn n_types(&self) -> usize {
        self.rows.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, user_type: usize) -> &[f64] {
        &self.rows[user_type]
    }

    /// Exact `S_φ(θ) = Σ_x p_φ(x) r_θ(x)` for every type.
    pub fn scores(&self, generator: &ToyGenerator) -> Vec<f64> {
        self.scores_for(&generator.probabilities())
    }

    fn scores_for(&self, probs: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(probs).map(|(r, p)| r * p).sum())
            .collect()
    }
}

/// Incumbent models; `best()` is the per-type best incumbent score.
#[derive(Debug, Clone, PartialEq)]
pub struct OpponentPool {
    scores: ScoreMatrix<f64>,
}

impl OpponentPool {
    pub fn new(scores: ScoreMatrix<f64>) -> Self {
        Self { scores }
    }

    pub fn scores(&self) -> &ScoreMatrix<f64> {
        &self.scores
    }

    pub fn best(&self) -> Vec<f64> {
        self.scores.column_max()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    #[default]
    Exact,
    Reinforce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Resampling rounds.
    pub outer_rounds: usize,
    /// Frequency-fit epochs per resampling round.
    pub inner_epochs: usize,
    /// Direct-gradient epochs.
    pub epochs: usize,
    /// Gradient steps per direct-gradient epoch.
    pub steps_per_epoch: usize,
    /// Samples used to estimate scores (and REINFORCE gradients).
    pub eval_budget: usize,
    pub learning_rate: f64,
    pub baseline_decay: f64,
    /// Weight of the resampled frequencies in each inner epoch.
    pub blend: f64,
    pub gradient: GradientMode,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            beta: 4.0,
            gamma: 1.0,
            lambda: 0.4,
            outer_rounds: 5,
            inner_epochs: 50,
            epochs: 20,
            steps_per_epoch: 50,
            eval_budget: 2000,
            learning_rate: 0.05,
            baseline_decay: 0.9,
            blend: 0.5,
            gradient: GradientMode::Exact,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GameError::InvalidParameter(m.into()));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        if !(self.gamma >= 0.0) || !(self.lambda >= 0.0) {
            return bad("gamma and lambda must be non-negative");
        }
        if self.outer_rounds == 0 || self.epochs == 0 || self.steps_per_epoch == 0 {
            return bad("outer_rounds, epochs and steps_per_epoch must be at least 1");
        }
        if self.eval_budget == 0 {
            return bad("eval_budget must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return bad("baseline_decay must lie in [0, 1)");
        }
        if !(self.blend > 0.0 && self.blend <= 1.0) {
            return bad("blend must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Training data: counts per outcome, each outcome's attribute, and
/// optionally per-type attribute preferences (structured mode).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    counts: Vec<f64>,
    attributes: Vec<usize>,
    attribute_prefs: Option<Vec<Vec<f64>>>,
}

impl Dataset {
    pub fn new(counts: Vec<f64>, attributes: Vec<usize>, attribute_prefs: Option<Vec<Vec<f64>>>) -> Result<Self> {
        if counts.is_empty() || counts.len() != attributes.len() {
            return Err(GameError::InvalidInput("one attribute per outcome required".into()));
        }
        if counts.iter().any(|c| !(*c >= 0.0)) || counts.iter().sum::<f64>() <= 0.0 {
            return Err(GameError::InvalidInput("counts must be non-negative and not all zero".into()));
        }
        if let Some(q) = &attribute_prefs {
            let n_attr = attributes.iter().max().map_or(0, |m| m + 1);
            for row in q {
                if row.len() < n_attr || row.iter().any(|v| !(*v >= 0.0)) {
                    return Err(GameError::InvalidInput("bad attribute preference row".into()));
                }
                if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(GameError::InvalidInput("attribute preferences must sum to 1".into()));
                }
            }
        }
        Ok(Self {
            counts,
            attributes,
            attribute_prefs,
        })
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn attributes(&self) -> &[usize] {
        &self.attributes
    }

    pub fn attribute_prefs(&self) -> Option<&[Vec<f64>]> {
        self.attribute_prefs.as_deref()
    }

    pub fn size(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn n_attributes(&self) -> usize {
        let from_items = self.attributes.iter().max().map_or(0, |m| m + 1);
        let from_prefs = self
            .attribute_prefs
            .as_ref()
            .and_then(|q| q.first())
            .map_or(0, Vec::len);
        from_items.max(from_prefs)
    }

    pub fn empirical(&self) -> Vec<f64> {
        let n = self.size();
        self.counts.iter().map(|c| c / n).collect()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `σ_θ = sigmoid(β (S_φ(θ) − S̄(θ)))`.
pub fn adoption_gate(s_phi: &[f64], pool: &OpponentPool, beta: f64) -> Vec<f64> {
    s_phi
        .iter()
        .zip(pool.best())
        .map(|(s, best)| sigmoid(beta * (s - best)))
        .collect()
}

fn check_dims(rewards: &RewardTable, population: &UserPopulation<f64>, pool: &OpponentPool) -> Result<()> {
    if rewards.n_types() != population.len() || pool.scores().n_types() != population.len() {
        return Err(GameError::InvalidInput(format!(
            "{} reward rows, {} incumbent types, {} population types",
            rewards.n_types(),
            pool.scores().n_types(),
            population.len()
        )));
    }
    Ok(())
}

/// `F = Σ_θ π_θ σ_θ S_φ(θ)`.
pub fn objective_f(
    generator: &ToyGenerator,
    rewards: &RewardTable,
    population: &UserPopulation<f64>,
    pool: &OpponentPool,
    beta: f64,
) -> Result<f64> {
    check_dims(rewards, population, pool)?;
    let s = rewards.scores(generator);
    let gate = adoption_gate(&s, pool, beta);
    Ok(population
        .weights()
        .iter()
        .zip(&gate)
        .zip(&s)
        .map(|((w, g), s)| w * g * s)
        .sum())
}

/// `∇_φ S_φ(θ) = p_φ ⊙ (r_θ − S_φ(θ))`.
pub fn grad_s_exact(generator: &ToyGenerator, rewards: &RewardTable, user_type: usize) -> Vec<f64> {
    let p = generator.probabilities();
    let r = rewards.row(user_type);
    let s: f64 = r.iter().zip(&p).map(|(r, p)| r * p).sum();
    p.iter().zip(r).map(|(p, r)| p * (r - s)).collect()
}

/// Pathwise gradient of `S_φ(θ)`. For a finite outcome set sampled by
/// inverting the softmax CDF the reparameterized path is piecewise constant,
/// so the only usable derivative is the one through the distribution itself:
/// this is the exact gradient.
pub fn grad_s_pathwise(generator: &ToyGenerator, rewards: &RewardTable, user_type: usize) -> Vec<f64> {
    grad_s_exact(generator, rewards, user_type)
}

fn gate_coefficients(s: &[f64], pool: &OpponentPool, population: &UserPopulation<f64>, beta: f64) -> Vec<f64> {
    adoption_gate(s, pool, beta)
        .iter()
        .zip(s)
        .zip(population.weights())
        .map(|((g, s), w)| w * (g + beta * g * (1.0 - g) * s))
        .collect()
}

/// `∇_φ F = Σ_θ π_θ [σ_θ + β σ_θ (1 − σ_θ) S_φ(θ)] ∇_φ S_φ(θ)`.
pub fn grad_f_exact(
    generator: &ToyGenerator,
    rewards: &RewardTable,
    population: &UserPopulation<f64>,
    pool: &OpponentPool,
    beta: f64,
) -> Result<Vec<f64>> {
    check_dims(rewards, population, pool)?;
    let s = rewards.scores(generator);
    let coef = gate_coefficients(&s, pool, population, beta);
    let mut grad = vec![0.0; generator.len()];
    for (k, c) in coef.iter().enumerate() {
        for (g, d) in grad.iter_mut().zip(grad_s_exact(generator, rewards, k)) {
            *g += c * d;
        }
    }
    Ok(grad)
}

/// Score-function estimate of `∇_φ S_φ(θ)` from `n_samples` draws, with a
/// moving-average baseline that is updated after the estimate.
pub fn grad_s_reinforce<R: Rng + ?Sized>(
    generator: &ToyGenerator,
    rewards: &RewardTable,
    user_type: usize,
    n_samples: usize,
    baseline: &mut f64,
    decay: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let draws = generator.sample(n_samples, rng);
    reinforce_from_draws(generator, rewards, user_type, &draws, baseline, decay)
}

fn reinforce_from_draws(
    generator: &ToyGenerator,
    rewards: &RewardTable,
    user_type: usize,
    draws: &[usize],
    baseline: &mut f64,
    decay: f64,
) -> Result<Vec<f64>> {
    if draws.is_empty() {
        return Err(GameError::InvalidParameter("n_samples must be at least 1".into()));
    }
    let p = generator.probabilities();
    let r = rewards.row(user_type);
    let b = *baseline;
    // Σ_s (r_s − b)(e_{x_s} − p)
    let mut per_outcome = vec![0.0; p.len()];
    let mut total_adv = 0.0;
    let mut total_reward = 0.0;
    for &x in draws {
        let adv = r[x] - b;
        per_outcome[x] += adv;
        total_adv += adv;
        total_reward += r[x];
    }
    let n = draws.len() as f64;
    *baseline = decay * b + (1.0 - decay) * total_reward / n;
    Ok(per_outcome
        .iter()
        .zip(&p)
        .map(|(a, p)| (a - total_adv * p) / n)
        .collect())
}

/// Per-outcome sampling probabilities for resampling, plus the attribute
/// distribution in structured mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleWeights {
    pub attribute: Option<Vec<f64>>,
    pub outcome: Vec<f64>,
}

/// `α_θ = π_θ σ_θ^γ S̄(θ)`; structured data draws an attribute from
/// `ŵ(u) ∝ Σ_θ α_θ q_θ(u)` and then an item of that attribute, unstructured
/// data weights items by `Σ_θ α_θ v_θ(x)` with `v_θ` the normalized rewards.
pub fn resample_weights(
    dataset: &Dataset,
    rewards: &RewardTable,
    s_phi: &[f64],
    pool: &OpponentPool,
    population: &UserPopulation<f64>,
    beta: f64,
    gamma: f64,
) -> Result<ResampleWeights> {
    if !(gamma >= 0.0) {
        return Err(GameError::InvalidParameter("gamma must be non-negative".into()));
    }
    let gate = adoption_gate(s_phi, pool, beta);
    let alpha: Vec<f64> = population
        .weights()
        .iter()
        .zip(&gate)
        .zip(pool.best())
        .map(|((w, g), best)| w * g.powf(gamma) * best)
        .collect();
    let counts = dataset.counts();

    let (attribute, raw) = match dataset.attribute_prefs() {
        Some(q) => {
            let n_attr = dataset.n_attributes();
            let mut w_u = vec![0.0; n_attr];
            for (a, row) in alpha.iter().zip(q) {
                for (w, qv) in w_u.iter_mut().zip(row) {
                    *w += a * qv;
                }
            }
            let mut per_attr_count = vec![0.0; n_attr];
            for (c, &u) in counts.iter().zip(dataset.attributes()) {
                per_attr_count[u] += c;
            }
            let raw: Vec<f64> = counts
                .iter()
                .zip(dataset.attributes())
                .map(|(c, &u)| if per_attr_count[u] > 0.0 { w_u[u] * c / per_attr_count[u] } else { 0.0 })
                .collect();
            (Some(normalized(&w_u)), raw)
        }
        None => {
            let mut raw = vec![0.0; counts.len()];
            for (k, a) in alpha.iter().enumerate() {
                let row = rewards.row(k);
                let total: f64 = row.iter().sum();
                if total > 0.0 {
                    for (w, r) in raw.iter_mut().zip(row) {
                        *w += a * r / total;
                    }
                }
            }
            for (w, c) in raw.iter_mut().zip(counts) {
                *w *= c;
            }
            (None, raw)
        }
    };
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(GameError::NoSignal("all resampling weights are zero".into()));
    }
    Ok(ResampleWeights {
        attribute,
        outcome: raw.iter().map(|w| w / total).collect(),
    })
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter().map(|x| x / total).collect()
    } else {
        v.to_vec()
    }
}
