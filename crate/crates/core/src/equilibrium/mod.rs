//! Pure Nash equilibria: verification, exhaustive enumeration and best
//! responses. Dynamics and the closed-form equilibrium conditions live in
//! the submodules.

mod conditions;
mod dynamics;

pub use conditions::{
    centralization_check, check_differentiated_condition, check_homogeneous_condition,
    softmax_pne_scan, two_player_conditions, CentralizationParams, CentralizationReport,
    ConditionReport, MarginRow, TwoPlayerConditions,
};
pub use dynamics::{run_dynamics, CycleSegment, DynamicsOutcome, MoverOrder, OutcomeKind, Step};

use serde::Serialize;

use crate::error::{GameError, Result};
use crate::game::{deviation_utility, GameSpec, StrategyProfile};
use crate::scalar::Scalar;

/// Largest profile space `enumerate_pne` walks unless told otherwise.
pub const DEFAULT_PROFILE_BUDGET: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    FullyDifferentiated,
    Homogeneous,
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EquilibriumClassification {
    pub distinct_count: usize,
    pub kind: EquilibriumKind,
}

impl EquilibriumClassification {
    /// A single platform counts as homogeneous.
    pub fn of(profile: &StrategyProfile) -> Self {
        let distinct_count = profile.distinct_count();
        let kind = if distinct_count == 1 {
            EquilibriumKind::Homogeneous
        } else if distinct_count == profile.len() {
            EquilibriumKind::FullyDifferentiated
        } else {
            EquilibriumKind::Partial
        };
        Self {
            distinct_count,
            kind,
        }
    }
}

/// A unilateral switch that pays off.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation<S> {
    pub platform: usize,
    pub model: usize,
    pub gain: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PneCheck<S> {
    pub is_equilibrium: bool,
    /// The most profitable deviation when `is_equilibrium` is false.
    pub witness: Option<Deviation<S>>,
}

/// Checks that no platform gains more than the scalar tolerance by switching
/// models on its own.
pub fn verify_pne<S: Scalar>(spec: &GameSpec<S>, profile: &StrategyProfile) -> Result<PneCheck<S>> {
    spec.check_profile(profile)?;
    let tol = S::tolerance();
    let mut witness: Option<Deviation<S>> = None;
    for platform in 0..profile.len() {
        let current = deviation_utility(spec, profile, platform, profile.get(platform))?;
        for model in 0..spec.n_models() {
            if model == profile.get(platform) {
                continue;
            }
            let gain = deviation_utility(spec, profile, platform, model)? - current.clone();
            if gain > tol && witness.as_ref().is_none_or(|w| gain > w.gain) {
                witness = Some(Deviation {
                    platform,
                    model,
                    gain,
                });
            }
        }
    }
    Ok(PneCheck {
        is_equilibrium: witness.is_none(),
        witness,
    })
}

/// `M^N`, or `None` on overflow.
pub fn profile_count(n_models: usize, n_platforms: usize) -> Option<u128> {
    (n_models as u128).checked_pow(u32::try_from(n_platforms).ok()?)
}

/// Every profile of `n_platforms` choices from `n_models`, in lexicographic
/// order (last platform varies fastest).
pub fn all_profiles(n_models: usize, n_platforms: usize) -> impl Iterator<Item = StrategyProfile> {
    let mut next = (n_models > 0).then(|| vec![0usize; n_platforms]);
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut succ = current.clone();
        let mut pos = n_platforms;
        while pos > 0 {
            pos -= 1;
            succ[pos] += 1;
            if succ[pos] < n_models {
                next = Some(succ);
                break;
            }
            succ[pos] = 0;
        }
        Some(StrategyProfile::new(current))
    })
}

pub fn enumerate_pne<S: Scalar>(
    spec: &GameSpec<S>,
) -> Result<Vec<(StrategyProfile, EquilibriumClassification)>> {
    enumerate_pne_with_budget(spec, DEFAULT_PROFILE_BUDGET)
}

/// All pure equilibria in lexicographic order. Refuses when `M^N` exceeds
/// `budget`.
pub fn enumerate_pne_with_budget<S: Scalar>(
    spec: &GameSpec<S>,
    budget: u128,
) -> Result<Vec<(StrategyProfile, EquilibriumClassification)>> {
    let required = profile_count(spec.n_models(), spec.n_platforms()).unwrap_or(u128::MAX);
    if required > budget {
        return Err(GameError::BudgetExceeded { required, budget });
    }
    let mut found = Vec::new();
    for profile in all_profiles(spec.n_models(), spec.n_platforms()) {
        if verify_pne(spec, &profile)?.is_equilibrium {
            let class = EquilibriumClassification::of(&profile);
            found.push((profile, class));
        }
    }
    Ok(found)
}

/// Utility-maximizing model for `platform` with the others held fixed.
///
/// Keeps the current model unless some alternative beats it by more than the
/// tolerance; among strict improvers the best one wins, lowest index first.
pub fn best_response<S: Scalar>(
    spec: &GameSpec<S>,
    profile: &StrategyProfile,
    platform: usize,
) -> Result<usize> {
    spec.check_profile(profile)?;
    spec.check_platform(platform)?;
    let tol = S::tolerance();
    let mut best = profile.get(platform);
    let mut best_utility = deviation_utility(spec, profile, platform, best)?;
    for model in 0..spec.n_models() {
        let u = deviation_utility(spec, profile, platform, model)?;
        if u > best_utility.clone() + tol.clone() {
            best = model;
            best_utility = u;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{ScoreMatrix, UserPopulation};

    fn spec(rows: Vec<Vec<f64>>, n: usize) -> GameSpec<f64> {
        let k = rows[0].len();
        GameSpec::hardmax(
            ScoreMatrix::from_rows(rows).unwrap(),
            UserPopulation::uniform(k).unwrap(),
            n,
        )
        .unwrap()
    }

    fn rps() -> GameSpec<f64> {
        spec(
            vec![vec![0.2, 0.0, 0.1], vec![0.1, 0.2, 0.0], vec![0.0, 0.1, 0.2]],
            2,
        )
    }

    #[test]
    fn lexicographic_enumeration() {
        let all: Vec<_> = all_profiles(2, 2).map(|p| p.choices().to_vec()).collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(all_profiles(3, 4).count(), 81);
        assert_eq!(all_profiles(0, 2).count(), 0);
    }

    #[test]
    fn rps_has_no_pure_equilibrium() {
        let spec = rps();
        for p in all_profiles(3, 2) {
            let check = verify_pne(&spec, &p).unwrap();
            assert!(!check.is_equilibrium);
            assert!(check.witness.unwrap().gain > 0.0);
        }
        assert!(enumerate_pne(&spec).unwrap().is_empty());
    }

    #[test]
    fn best_response_in_rps() {
        // against g1, switching to g3 yields 0.1 > 0.05
        let br = best_response(&rps(), &StrategyProfile::new(vec![0, 0]), 0).unwrap();
        assert_eq!(br, 2);
    }

    #[test]
    fn best_response_keeps_current_on_ties() {
        let flat = spec(vec![vec![0.5, 0.5]; 3], 2);
        let p = StrategyProfile::new(vec![2, 1]);
        assert_eq!(best_response(&flat, &p, 0).unwrap(), 2);
        assert_eq!(best_response(&flat, &p, 1).unwrap(), 1);
    }

    #[test]
    fn unique_maximizer_is_a_fixed_point() {
        let s = spec(vec![vec![0.9, 0.9], vec![0.1, 0.2]], 1);
        assert_eq!(best_response(&s, &StrategyProfile::new(vec![0]), 0).unwrap(), 0);
        assert_eq!(best_response(&s, &StrategyProfile::new(vec![1]), 0).unwrap(), 0);
    }

    #[test]
    fn single_model_is_always_an_equilibrium() {
        let s = spec(vec![vec![0.3, 0.7]], 3);
        let all = enumerate_pne(&s).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].1.kind, EquilibriumKind::Homogeneous);
    }

    #[test]
    fn budget_is_enforced() {
        let err = enumerate_pne_with_budget(&rps(), 8).unwrap_err();
        assert!(matches!(
            err,
            GameError::BudgetExceeded {
                required: 9,
                budget: 8
            }
        ));
    }

    #[test]
    fn classification_labels() {
        let c = |v: Vec<usize>| EquilibriumClassification::of(&StrategyProfile::new(v)).kind;
        assert_eq!(c(vec![0, 1, 2]), EquilibriumKind::FullyDifferentiated);
        assert_eq!(c(vec![1, 1, 1]), EquilibriumKind::Homogeneous);
        assert_eq!(c(vec![1, 0, 1]), EquilibriumKind::Partial);
    }
}
