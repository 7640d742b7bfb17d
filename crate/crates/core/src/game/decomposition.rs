//! Average score plus deviation advantage: `N·U_i = T_{f_i} + δ_{f_i}(f)`.
//!
//! `T` is what a platform would earn per capita if the whole market were
//! split evenly; `δ` is the competitive correction from winning, tying or
//! losing each user type.

use super::choice::{column_best, softmax_tau, stabilized_exp};
use super::{ChoiceRule, GameSpec, StrategyProfile};
use crate::error::{GameError, Result};
use crate::scalar::Scalar;

/// `T_j = Σ_θ π_θ S_j(θ)` for every model.
pub fn average_scores<S: Scalar>(spec: &GameSpec<S>) -> Vec<S> {
    let pop = spec.population();
    spec.scores()
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .zip(pop.weights())
                .fold(S::zero(), |acc, (s, w)| acc + w.clone() * s.clone())
        })
        .collect()
}

/// Hardmax deviation advantage of `platform` in `profile`.
///
/// Per type the attraction term is `((N - A)/A)·S` when the platform's model
/// is among the `A` tied maximizers and `-S` otherwise.
pub fn deviation_advantage<S: Scalar>(
    spec: &GameSpec<S>,
    profile: &StrategyProfile,
    platform: usize,
) -> Result<S> {
    spec.check_profile(profile)?;
    spec.check_platform(platform)?;
    let scores = spec.scores();
    let n = S::from_usize_exact(profile.len());
    let own_model = profile.get(platform);
    let mut delta = S::zero();
    for k in 0..spec.n_types() {
        let column = || profile.choices().iter().map(|&m| scores.score(m, k));
        let best = column_best(column());
        let own = scores.score(own_model, k).clone();
        let term = if own == best {
            let tied = S::from_usize_exact(column().filter(|s| **s == best).count());
            (n.clone() - tied.clone()) / tied * own
        } else {
            -own
        };
        delta = delta + spec.population().weight(k).clone() * term;
    }
    Ok(delta)
}

/// Softmax deviation advantage of `platform` in `profile`.
pub fn deviation_advantage_soft<S: Scalar>(
    spec: &GameSpec<S>,
    profile: &StrategyProfile,
    platform: usize,
) -> Result<S> {
    spec.check_profile(profile)?;
    spec.check_platform(platform)?;
    let tau = softmax_tau(spec)?;
    let scores = spec.scores();
    let rivals = S::from_usize_exact(profile.len() - 1);
    let own_model = profile.get(platform);
    let mut delta = S::zero();
    for k in 0..spec.n_types() {
        let weights = stabilized_exp(profile.choices().iter().map(|&m| scores.score(m, k)), tau)?;
        let total = weights.iter().fold(S::zero(), |a, w| a + w.clone());
        let own_weight = weights[platform].clone();
        let rest = total.clone() - own_weight.clone();
        let z = (rivals.clone() * own_weight - rest) / total;
        delta = delta
            + spec.population().weight(k).clone() * z * scores.score(own_model, k).clone();
    }
    Ok(delta)
}

/// Deviation advantage matching the spec's choice rule.
pub fn deviation_advantage_for<S: Scalar>(
    spec: &GameSpec<S>,
    profile: &StrategyProfile,
    platform: usize,
) -> Result<S> {
    match spec.choice() {
        ChoiceRule::Hardmax => deviation_advantage(spec, profile, platform),
        ChoiceRule::Softmax { .. } => deviation_advantage_soft(spec, profile, platform),
    }
}

/// `(T_{f_i} + δ_{f_i}(f)) / N`. Equal to `platform_utilities(spec, profile)[i]`
/// for either choice rule; the two routes cross-check each other.
pub fn decomposed_utility<S: Scalar>(
    spec: &GameSpec<S>,
    profile: &StrategyProfile,
    platform: usize,
) -> Result<S> {
    let delta = deviation_advantage_for(spec, profile, platform)?;
    let avg = average_scores(spec);
    Ok((avg[profile.get(platform)].clone() + delta) / S::from_usize_exact(profile.len()))
}

/// Two-platform shorthand `δ_ij`: advantage of model `i` against model `j`.
pub fn pairwise_deviation_advantage<S: Scalar>(
    spec: &GameSpec<S>,
    i: usize,
    j: usize,
) -> Result<S> {
    if spec.n_platforms() != 2 {
        return Err(GameError::InvalidInput(format!(
            "pairwise advantage needs 2 platforms, spec has {}",
            spec.n_platforms()
        )));
    }
    deviation_advantage(spec, &StrategyProfile::new(vec![i, j]), 0)
}
