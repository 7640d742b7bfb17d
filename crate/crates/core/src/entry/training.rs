//! Resampling and direct-gradient training loops, and the post-entry market
//! evaluation.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::{
    gate_coefficients, grad_f_exact, objective_f, reinforce_from_draws,
    resample_weights, sample_categorical, Dataset, GradientMode, OpponentPool, RewardTable,
    ToyGenerator, TrainingConfig,
};
use crate::equilibrium::{enumerate_pne, run_dynamics, DynamicsOutcome, MoverOrder};
use crate::error::{GameError, Result};
use crate::game::{GameSpec, ScoreMatrix, StrategyProfile, UserPopulation};
use crate::metrics::{metrics_record, MetricsRecord};

const LOSS_TOLERANCE: f64 = 1e-12;
const MAX_HALVINGS: usize = 40;

/// State after a resampling round; round 0 is the initial generator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Sampled score estimates that drove the round's weights.
    pub scores_estimate: Vec<f64>,
    /// Exact scores after the round.
    pub scores: Vec<f64>,
    pub objective: f64,
}

/// State after a direct-gradient epoch; epoch 0 is the initial generator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub cross_entropy: f64,
    pub objective: f64,
    pub loss: f64,
    pub learning_rate: f64,
    pub scores: Vec<f64>,
}

fn cross_entropy(target: &[f64], probs: &[f64]) -> f64 {
    target
        .iter()
        .zip(probs)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, p)| -t * p.ln())
        .sum()
}

/// Algorithm: estimate scores from `eval_budget` draws, turn gates into
/// resampling weights, draw a resampled dataset of the original size, and
/// blend the generator towards its frequencies for `inner_epochs` epochs.
pub fn train_resampling(
    dataset: &Dataset,
    rewards: &RewardTable,
    population: &UserPopulation<f64>,
    pool: &OpponentPool,
    config: &TrainingConfig,
    init: &ToyGenerator,
) -> Result<(ToyGenerator, Vec<RoundRecord>)> {
    config.validate()?;
    if rewards.n_outcomes() != init.len() || dataset.counts().len() != init.len() {
        return Err(GameError::InvalidInput("generator, rewards and dataset disagree on outcomes".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut generator = init.clone();
    let n_items = dataset.size().round().max(1.0) as usize;
    let exact = rewards.scores(&generator);
    let mut trace = vec![RoundRecord {
        round: 0,
        scores_estimate: exact.clone(),
        scores: exact,
        objective: objective_f(&generator, rewards, population, pool, config.beta)?,
    }];

    for round in 1..=config.outer_rounds {
        let draws = generator.sample(config.eval_budget, &mut rng);
        let estimate: Vec<f64> = (0..rewards.n_types())
            .map(|k| draws.iter().map(|&x| rewards.row(k)[x]).sum::<f64>() / draws.len() as f64)
            .collect();
        let weights = resample_weights(dataset, rewards, &estimate, pool, population, config.beta, config.gamma)?;
        let mut freq = vec![0.0; init.len()];
        for x in sample_categorical(&weights.outcome, n_items, &mut rng) {
            freq[x] += 1.0 / n_items as f64;
        }
        let mut probs = generator.probabilities();
        for _ in 0..config.inner_epochs {
            for (p, f) in probs.iter_mut().zip(&freq) {
                *p = (1.0 - config.blend) * *p + config.blend * f;
            }
        }
        if config.inner_epochs > 0 {
            generator = ToyGenerator::from_distribution(init.labels().to_vec(), &probs)?;
        }
        trace.push(RoundRecord {
            round,
            scores_estimate: estimate,
            scores: rewards.scores(&generator),
            objective: objective_f(&generator, rewards, population, pool, config.beta)?,
        });
    }
    Ok((generator, trace))
}

struct DirectProblem<'a> {
    target: Vec<f64>,
    rewards: &'a RewardTable,
    population: &'a UserPopulation<f64>,
    pool: &'a OpponentPool,
    beta: f64,
    lambda: f64,
}

impl DirectProblem<'_> {
    fn record(&self, epoch: usize, generator: &ToyGenerator, learning_rate: f64) -> Result<EpochRecord> {
        let ce = cross_entropy(&self.target, &generator.probabilities());
        let f = objective_f(generator, self.rewards, self.population, self.pool, self.beta)?;
        Ok(EpochRecord {
            epoch,
            cross_entropy: ce,
            objective: f,
            loss: ce - self.lambda * f,
            learning_rate,
            scores: self.rewards.scores(generator),
        })
    }

    fn loss(&self, generator: &ToyGenerator) -> Result<f64> {
        let ce = cross_entropy(&self.target, &generator.probabilities());
        Ok(ce - self.lambda * objective_f(generator, self.rewards, self.population, self.pool, self.beta)?)
    }
}

/// Algorithm: gradient descent on `ℓ(φ) − λ F(φ)` with `ℓ` the cross-entropy
/// to the dataset's empirical distribution. Exact mode halves the step
/// whenever the loss would go up.
pub fn train_direct_gradient(
    dataset: &Dataset,
    rewards: &RewardTable,
    population: &UserPopulation<f64>,
    pool: &OpponentPool,
    config: &TrainingConfig,
    init: &ToyGenerator,
) -> Result<(ToyGenerator, Vec<EpochRecord>)> {
    config.validate()?;
    if rewards.n_outcomes() != init.len() || dataset.counts().len() != init.len() {
        return Err(GameError::InvalidInput("generator, rewards and dataset disagree on outcomes".into()));
    }
    let problem = DirectProblem {
        target: dataset.empirical(),
        rewards,
        population,
        pool,
        beta: config.beta,
        lambda: config.lambda,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut baselines = vec![0.0; rewards.n_types()];
    let mut generator = init.clone();
    let mut eta = config.learning_rate;
    let mut trace = vec![problem.record(0, &generator, eta)?];

    for epoch in 1..=config.epochs {
        for _ in 0..config.steps_per_epoch {
            let probs = generator.probabilities();
            let grad_f = match config.gradient {
                GradientMode::Exact => grad_f_exact(&generator, rewards, population, pool, config.beta)?,
                GradientMode::Reinforce => {
                    let draws = generator.sample(config.eval_budget, &mut rng);
                    let estimate: Vec<f64> = (0..rewards.n_types())
                        .map(|k| draws.iter().map(|&x| rewards.row(k)[x]).sum::<f64>() / draws.len() as f64)
                        .collect();
                    let coef = gate_coefficients(&estimate, pool, population, config.beta);
                    let mut g = vec![0.0; generator.len()];
                    for (k, c) in coef.iter().enumerate() {
                        let est = reinforce_from_draws(&generator, rewards, k, &draws, &mut baselines[k], config.baseline_decay)?;
                        for (gi, e) in g.iter_mut().zip(est) {
                            *gi += c * e;
                        }
                    }
                    g
                }
            };
            let grad: Vec<f64> = probs
                .iter()
                .zip(&problem.target)
                .zip(&grad_f)
                .map(|((p, t), gf)| p - t - config.lambda * gf)
                .collect();
            let step = |eta: f64| -> Vec<f64> {
                generator
                    .logits()
                    .iter()
                    .zip(&grad)
                    .map(|(l, g)| l - eta * g)
                    .collect()
            };
            let candidate = step(eta);
            if candidate.iter().any(|v| !v.is_finite()) {
                return Err(GameError::Diverged {
                    epoch,
                    trace: Box::new(trace),
                });
            }
            match config.gradient {
                GradientMode::Exact => {
                    let current = problem.loss(&generator)?;
                    let mut accepted = None;
                    for _ in 0..MAX_HALVINGS {
                        let next = generator.with_logits(step(eta))?;
                        if problem.loss(&next)? <= current + LOSS_TOLERANCE {
                            accepted = Some(next);
                            break;
                        }
                        eta /= 2.0;
                    }
                    if let Some(next) = accepted {
                        generator = next;
                    }
                }
                GradientMode::Reinforce => generator = generator.with_logits(candidate)?,
            }
        }
        let rec = problem.record(epoch, &generator, eta)?;
        if !rec.loss.is_finite() {
            trace.push(rec);
            return Err(GameError::Diverged {
                epoch,
                trace: Box::new(trace),
            });
        }
        trace.push(rec);
    }
    Ok((generator, trace))
}

/// Market before and after adding the entrant as an extra model.
#[derive(Debug, Clone)]
pub struct EntryReport {
    pub entrant_scores: Vec<f64>,
    pub entrant_index: usize,
    pub spec: GameSpec<f64>,
    pub pne: Vec<StrategyProfile>,
    pub adopted_in_pne: bool,
    pub outcome: DynamicsOutcome<f64>,
    pub adopted_in_dynamics: bool,
    pub metrics: MetricsRecord<f64>,
    pub before_pne: Vec<StrategyProfile>,
    pub before_metrics: MetricsRecord<f64>,
}

/// Appends the entrant's exact score row to `incumbents` and re-runs
/// equilibrium enumeration, dynamics (from every platform on the first
/// incumbent) and metrics, before and after entry.
pub fn evaluate_entrant(
    entrant: &ToyGenerator,
    rewards: &RewardTable,
    population: &UserPopulation<f64>,
    incumbents: &ScoreMatrix<f64>,
    n_platforms: usize,
) -> Result<EntryReport> {
    if rewards.n_types() != incumbents.n_types() || population.len() != incumbents.n_types() {
        return Err(GameError::InvalidInput("rewards, incumbents and population disagree on types".into()));
    }
    let entrant_scores = rewards.scores(entrant);
    let before = GameSpec::hardmax(incumbents.clone(), population.clone(), n_platforms)?;
    let label = unique_label(incumbents, "entrant");
    let spec = before.with_scores(incumbents.with_model(label, entrant_scores.clone())?)?;
    let entrant_index = incumbents.n_models();
    let start = StrategyProfile::homogeneous(0, n_platforms);
    let max_steps = 10_000;

    let before_outcome = run_dynamics(&before, &start, &MoverOrder::RoundRobin, max_steps)?;
    let before_metrics = metrics_record(&before, &before_outcome)?;
    let before_pne = enumerate_pne(&before)?.into_iter().map(|(p, _)| p).collect();

    let outcome = run_dynamics(&spec, &start, &MoverOrder::RoundRobin, max_steps)?;
    let metrics = metrics_record(&spec, &outcome)?;
    let pne: Vec<StrategyProfile> = enumerate_pne(&spec)?.into_iter().map(|(p, _)| p).collect();
    let uses = |p: &StrategyProfile| p.choices().contains(&entrant_index);
    let adopted_in_pne = pne.iter().any(uses);
    let adopted_in_dynamics = match (&outcome.equilibrium, &outcome.cycle) {
        (Some(p), _) => uses(p),
        (None, Some(c)) => c.profiles().any(uses),
        _ => false,
    };
    Ok(EntryReport {
        entrant_scores,
        entrant_index,
        spec,
        pne,
        adopted_in_pne,
        outcome,
        adopted_in_dynamics,
        metrics,
        before_pne,
        before_metrics,
    })
}

fn unique_label(scores: &ScoreMatrix<f64>, base: &str) -> String {
    let mut label = base.to_string();
    let mut n = 1;
    while scores.model_index(&label).is_some() {
        n += 1;
        label = format!("{base}{n}");
    }
    label
}

/// A small market where two incumbents under-serve the heaviest user type.
#[derive(Debug, Clone)]
pub struct ToyMarket {
    pub rewards: RewardTable,
    pub population: UserPopulation<f64>,
    pub pool: OpponentPool,
    pub dataset: Dataset,
    /// Generator fitted to the dataset.
    pub base: ToyGenerator,
    pub n_platforms: usize,
    /// Type whose preferred outcomes the data under-represents.
    pub target_type: usize,
    /// Settings under which direct-gradient training gets the entrant adopted.
    pub config: TrainingConfig,
}

pub fn toy_market() -> ToyMarket {
    let labels: Vec<String> = (1..=6).map(|i| format!("x{i}")).collect();
    let rewards = RewardTable::new(vec![
        vec![0.9, 0.8, 0.1, 0.1, 0.2, 0.1],
        vec![0.1, 0.2, 0.9, 0.8, 0.1, 0.1],
        vec![0.1, 0.1, 0.2, 0.1, 0.9, 0.8],
    ])
    .expect("valid rewards");
    let population = UserPopulation::new(
        vec!["A".into(), "B".into(), "C".into()],
        vec![0.5, 0.3, 0.2],
    )
    .expect("valid population");
    let pool = OpponentPool::new(
        ScoreMatrix::new(
            vec!["inc1".into(), "inc2".into()],
            vec![vec![0.35, 0.7, 0.5], vec![0.3, 0.5, 0.7]],
        )
        .expect("valid incumbents"),
    );
    let dataset = Dataset::new(
        vec![50.0, 50.0, 200.0, 200.0, 250.0, 250.0],
        vec![0, 0, 1, 1, 2, 2],
        Some(vec![
            vec![0.8, 0.1, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.1, 0.1, 0.8],
        ]),
    )
    .expect("valid dataset");
    let base = ToyGenerator::from_distribution(labels, &dataset.empirical()).expect("positive counts");
    ToyMarket {
        rewards,
        population,
        pool,
        dataset,
        base,
        n_platforms: 2,
        target_type: 0,
        config: TrainingConfig {
            lambda: 8.0,
            ..TrainingConfig::default()
        },
    }
}
