//! Coverage, welfare, social optimum, market concentration and the
//! platform-entry check.

use itertools::Itertools;

use crate::equilibrium::{verify_pne, DynamicsOutcome, OutcomeKind};
use crate::error::{GameError, Result};
use crate::game::{
    allocate, average_scores, deviation_advantage, ChoiceRule, GameSpec, StrategyProfile,
};
use crate::scalar::Scalar;

/// Largest multiset space `social_optimum` walks.
pub const DEFAULT_MULTISET_BUDGET: u128 = 10_000_000;

/// `V(f) = Σ_θ π_θ max_i S_{f_i}(θ)`: expected quality users receive.
pub fn coverage_value<S: Scalar>(spec: &GameSpec<S>, profile: &StrategyProfile) -> Result<S> {
    spec.check_profile(profile)?;
    let value = coverage_of_models(spec, profile.choices());
    debug_assert!({
        let gap = (coverage_closed_form(spec, profile)? - value.clone()).abs();
        gap <= S::from_f64(1e-12).unwrap_or_else(S::zero)
    });
    Ok(value)
}

fn coverage_of_models<S: Scalar>(spec: &GameSpec<S>, models: &[usize]) -> S {
    let scores = spec.scores();
    (0..spec.n_types()).fold(S::zero(), |acc, k| {
        let best = models
            .iter()
            .map(|&m| scores.score(m, k))
            .fold(S::zero(), |b, s| if *s > b { s.clone() } else { b });
        acc + spec.population().weight(k).clone() * best
    })
}

/// Coverage through the decomposition: `(1/N) Σ_i (T_{f_i} + δ_{f_i}(f))`
/// with hardmax advantages, whatever the spec's own choice rule.
pub fn coverage_closed_form<S: Scalar>(spec: &GameSpec<S>, profile: &StrategyProfile) -> Result<S> {
    let hard = if spec.choice().is_hardmax() {
        spec.clone()
    } else {
        spec.with_choice(ChoiceRule::Hardmax)?
    };
    let t = average_scores(&hard);
    let mut total = S::zero();
    for i in 0..profile.len() {
        total = total + t[profile.get(i)].clone() + deviation_advantage(&hard, profile, i)?;
    }
    Ok(total / S::from_usize_exact(profile.len()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketShares<S> {
    pub shares: Vec<S>,
    pub hhi: S,
    pub support: usize,
}

/// Market shares `μ_i = Σ_θ π_θ p_i(θ)`, their HHI and the number of
/// distinct models in use.
pub fn market_shares<S: Scalar>(
    spec: &GameSpec<S>,
    profile: &StrategyProfile,
) -> Result<MarketShares<S>> {
    let alloc = allocate(spec, profile)?;
    let shares: Vec<S> = (0..profile.len())
        .map(|i| {
            (0..spec.n_types()).fold(S::zero(), |acc, k| {
                acc + spec.population().weight(k).clone() * alloc.get(i, k).clone()
            })
        })
        .collect();
    let hhi = shares
        .iter()
        .fold(S::zero(), |acc, s| acc + s.clone() * s.clone());
    Ok(MarketShares {
        shares,
        hhi,
        support: profile.distinct_count(),
    })
}

/// `C(M + N − 1, N)`, or `None` on overflow.
pub fn multiset_count(n_models: usize, n_platforms: usize) -> Option<u128> {
    let n = (n_models + n_platforms).checked_sub(1)? as u128;
    let k = n_platforms as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

pub fn social_optimum<S: Scalar>(spec: &GameSpec<S>) -> Result<(S, StrategyProfile)> {
    social_optimum_with_budget(spec, DEFAULT_MULTISET_BUDGET)
}

/// Highest coverage over all model multisets of size N, with the first
/// maximizing multiset in lexicographic order.
pub fn social_optimum_with_budget<S: Scalar>(
    spec: &GameSpec<S>,
    budget: u128,
) -> Result<(S, StrategyProfile)> {
    let required =
        multiset_count(spec.n_models(), spec.n_platforms()).unwrap_or(u128::MAX);
    if required > budget {
        return Err(GameError::BudgetExceeded { required, budget });
    }
    let mut best: Option<(S, Vec<usize>)> = None;
    for models in (0..spec.n_models()).combinations_with_replacement(spec.n_platforms()) {
        let v = coverage_of_models(spec, &models);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, models));
        }
    }
    let (value, models) = best.expect("at least one model");
    Ok((value, StrategyProfile::new(models)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Welfare<S> {
    /// Coverage at the equilibrium, or the mean coverage over the cycle's
    /// repeating states.
    pub value: S,
    /// Mean coverage over the distinct model multisets of the cycle. Equal
    /// to `value` for equilibria.
    pub distinct_multiset_mean: S,
}

/// User welfare of a dynamics outcome.
pub fn user_welfare<S: Scalar>(spec: &GameSpec<S>, outcome: &DynamicsOutcome<S>) -> Result<Welfare<S>> {
    match outcome.kind {
        OutcomeKind::Equilibrium => {
            let profile = outcome
                .equilibrium
                .as_ref()
                .ok_or(GameError::UndefinedWelfare)?;
            let v = coverage_value(spec, profile)?;
            Ok(Welfare {
                value: v.clone(),
                distinct_multiset_mean: v,
            })
        }
        OutcomeKind::Cycle => {
            let cycle = outcome.cycle.as_ref().ok_or(GameError::UndefinedWelfare)?;
            if cycle.is_empty() {
                return Err(GameError::UndefinedWelfare);
            }
            let mut total = S::zero();
            for p in cycle.profiles() {
                total = total + coverage_value(spec, p)?;
            }
            let value = total / S::from_usize_exact(cycle.len());
            let multisets = cycle.distinct_multisets();
            let sum = multisets
                .iter()
                .fold(S::zero(), |acc, m| acc + coverage_of_models(spec, m));
            Ok(Welfare {
                value,
                distinct_multiset_mean: sum / S::from_usize_exact(multisets.len()),
            })
        }
        OutcomeKind::Timeout => Err(GameError::UndefinedWelfare),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WelfareBound<S> {
    pub welfare: S,
    pub optimum: S,
    /// `optimum − welfare`; never below `-tolerance` when the bound holds.
    pub slack: S,
    pub holds: bool,
}

/// Welfare never exceeds the social optimum.
pub fn welfare_bound_check<S: Scalar>(
    spec: &GameSpec<S>,
    outcome: &DynamicsOutcome<S>,
) -> Result<WelfareBound<S>> {
    let welfare = user_welfare(spec, outcome)?.value;
    let (optimum, _) = social_optimum(spec)?;
    let slack = optimum.clone() - welfare.clone();
    let holds = slack >= -S::tolerance();
    Ok(WelfareBound {
        welfare,
        optimum,
        slack,
        holds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryCheck<S> {
    /// The entrant cannot do better than `entrant_model` against the base profile.
    pub entrant_best_response: bool,
    /// No incumbent gains by switching in the extended game.
    pub incumbents_stable: bool,
    pub is_equilibrium: bool,
    pub welfare_before: S,
    pub welfare_after: S,
    pub welfare_delta: S,
    pub support_delta: i64,
    pub hhi_before: S,
    pub hhi_after: S,
    /// `Some(true)` when the extended profile is an equilibrium and neither
    /// welfare nor support went down; `None` when the conditions fail.
    pub monotone: Option<bool>,
}

/// Adds one platform playing `entrant_model` to an equilibrium and checks
/// whether welfare and support diversity can only go up.
pub fn platform_entry_check<S: Scalar>(
    spec: &GameSpec<S>,
    base_equilibrium: &StrategyProfile,
    entrant_model: usize,
) -> Result<EntryCheck<S>> {
    spec.check_profile(base_equilibrium)?;
    spec.check_model(entrant_model)?;
    if !verify_pne(spec, base_equilibrium)?.is_equilibrium {
        return Err(GameError::InvalidInput(format!(
            "{base_equilibrium} is not an equilibrium of the base game"
        )));
    }
    let extended_spec = spec.with_platforms(spec.n_platforms() + 1)?;
    let extended = base_equilibrium.extended(entrant_model);
    let entrant = spec.n_platforms();
    let check = verify_pne(&extended_spec, &extended)?;
    let entrant_best_response = check
        .witness
        .as_ref()
        .is_none_or(|w| w.platform != entrant)
        && {
            // the witness is only the largest deviation; check the entrant directly
            let current = crate::game::deviation_utility(&extended_spec, &extended, entrant, entrant_model)?;
            let mut ok = true;
            for g in 0..spec.n_models() {
                let u = crate::game::deviation_utility(&extended_spec, &extended, entrant, g)?;
                ok &= u <= current.clone() + S::tolerance();
            }
            ok
        };
    let incumbents_stable = {
        let mut ok = true;
        for i in 0..spec.n_platforms() {
            let current =
                crate::game::deviation_utility(&extended_spec, &extended, i, extended.get(i))?;
            for g in 0..spec.n_models() {
                let u = crate::game::deviation_utility(&extended_spec, &extended, i, g)?;
                ok &= u <= current.clone() + S::tolerance();
            }
        }
        ok
    };
    let is_equilibrium = entrant_best_response && incumbents_stable;
    debug_assert_eq!(is_equilibrium, check.is_equilibrium);

    let welfare_before = coverage_value(spec, base_equilibrium)?;
    let welfare_after = coverage_value(&extended_spec, &extended)?;
    let welfare_delta = welfare_after.clone() - welfare_before.clone();
    let support_delta = extended.distinct_count() as i64 - base_equilibrium.distinct_count() as i64;
    let hhi_before = market_shares(spec, base_equilibrium)?.hhi;
    let hhi_after = market_shares(&extended_spec, &extended)?.hhi;
    let monotone = is_equilibrium
        .then(|| welfare_delta >= -S::tolerance() && support_delta >= 0);
    Ok(EntryCheck {
        entrant_best_response,
        incumbents_stable,
        is_equilibrium,
        welfare_before,
        welfare_after,
        welfare_delta,
        support_delta,
        hhi_before,
        hhi_after,
        monotone,
    })
}

/// Summary metrics of one dynamics outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord<S> {
    /// Coverage of the representative profile (the equilibrium, or the
    /// first state of the cycle).
    pub coverage: S,
    pub welfare: Welfare<S>,
    pub social_optimum: S,
    pub hhi: S,
    pub support: usize,
    pub shares: Vec<S>,
}

pub fn metrics_record<S: Scalar>(
    spec: &GameSpec<S>,
    outcome: &DynamicsOutcome<S>,
) -> Result<MetricsRecord<S>> {
    let welfare = user_welfare(spec, outcome)?;
    let profile = outcome.representative_profile();
    let shares = market_shares(spec, profile)?;
    let (optimum, _) = social_optimum(spec)?;
    Ok(MetricsRecord {
        coverage: coverage_value(spec, profile)?,
        welfare,
        social_optimum: optimum,
        hhi: shares.hhi,
        support: shares.support,
        shares: shares.shares,
    })
}
