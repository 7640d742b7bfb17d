use super::{AllocationMatrix, ChoiceRule, GameSpec, StrategyProfile};
use crate::error::{GameError, Result};
use crate::scalar::Scalar;

/// Hardmax allocation: each type goes to the platforms whose model scores
/// highest for it, split evenly among exact ties.
pub fn allocate_hardmax<S: Scalar>(
    spec: &GameSpec<S>,
    profile: &StrategyProfile,
) -> Result<AllocationMatrix<S>> {
    spec.check_profile(profile)?;
    let scores = spec.scores();
    let n = profile.len();
    let mut rows = vec![vec![S::zero(); spec.n_types()]; n];
    for k in 0..spec.n_types() {
        let best = column_best(profile.choices().iter().map(|&m| scores.score(m, k)));
        let winners: Vec<usize> = (0..n)
            .filter(|&i| *scores.score(profile.get(i), k) == best)
            .collect();
        let share = S::one() / S::from_usize_exact(winners.len());
        for i in winners {
            rows[i][k] = share.clone();
        }
    }
    Ok(AllocationMatrix::from_rows(rows))
}

/// Softmax allocation at temperature `tau`, stabilized by subtracting the
/// per-type maximum before exponentiating.
pub fn allocate_softmax<S: Scalar>(
    spec: &GameSpec<S>,
    profile: &StrategyProfile,
) -> Result<AllocationMatrix<S>> {
    spec.check_profile(profile)?;
    let tau = softmax_tau(spec)?;
    let scores = spec.scores();
    let n = profile.len();
    let mut rows = vec![vec![S::zero(); spec.n_types()]; n];
    for k in 0..spec.n_types() {
        let weights = stabilized_exp(
            profile.choices().iter().map(|&m| scores.score(m, k)),
            tau,
        )?;
        let total = weights.iter().fold(S::zero(), |a, w| a + w.clone());
        for (i, w) in weights.into_iter().enumerate() {
            rows[i][k] = w / total.clone();
        }
    }
    Ok(AllocationMatrix::from_rows(rows))
}

/// Allocation under the spec's own choice rule.
pub fn allocate<S: Scalar>(
    spec: &GameSpec<S>,
    profile: &StrategyProfile,
) -> Result<AllocationMatrix<S>> {
    match spec.choice() {
        ChoiceRule::Hardmax => allocate_hardmax(spec, profile),
        ChoiceRule::Softmax { .. } => allocate_softmax(spec, profile),
    }
}

/// `U_i = Σ_θ π_θ p_i(θ) S_{f_i}(θ)` for every platform.
pub fn platform_utilities<S: Scalar>(
    spec: &GameSpec<S>,
    profile: &StrategyProfile,
) -> Result<Vec<S>> {
    let alloc = allocate(spec, profile)?;
    let pop = spec.population();
    let scores = spec.scores();
    Ok((0..profile.len())
        .map(|i| {
            let model = profile.get(i);
            (0..spec.n_types()).fold(S::zero(), |acc, k| {
                acc + pop.weight(k).clone()
                    * alloc.get(i, k).clone()
                    * scores.score(model, k).clone()
            })
        })
        .collect())
}

/// Utility of a single platform.
pub fn platform_utility<S: Scalar>(
    spec: &GameSpec<S>,
    profile: &StrategyProfile,
    platform: usize,
) -> Result<S> {
    spec.check_profile(profile)?;
    spec.check_platform(platform)?;
    deviation_utility(spec, profile, platform, profile.get(platform))
}

/// Utility `platform` would get by playing `model` while everyone else keeps
/// their choice in `profile`. Costs `O(N·K)` and allocates nothing per type.
pub fn deviation_utility<S: Scalar>(
    spec: &GameSpec<S>,
    profile: &StrategyProfile,
    platform: usize,
    model: usize,
) -> Result<S> {
    spec.check_platform(platform)?;
    spec.check_model(model)?;
    let scores = spec.scores();
    let pop = spec.population();
    let others = || {
        profile
            .choices()
            .iter()
            .enumerate()
            .filter(move |&(i, _)| i != platform)
            .map(|(_, &m)| m)
    };
    let mut total = S::zero();
    match spec.choice() {
        ChoiceRule::Hardmax => {
            for k in 0..spec.n_types() {
                let own = scores.score(model, k);
                let mut rival_best: Option<&S> = None;
                let mut ties = 0usize;
                for m in others() {
                    let s = scores.score(m, k);
                    match rival_best {
                        Some(b) if s < b => {}
                        Some(b) if s == b => ties += 1,
                        _ => {
                            rival_best = Some(s);
                            ties = 1;
                        }
                    }
                }
                let share = match rival_best {
                    None => S::one(),
                    Some(b) if own > b => S::one(),
                    Some(b) if own == b => S::one() / S::from_usize_exact(ties + 1),
                    Some(_) => continue,
                };
                total = total + pop.weight(k).clone() * share * own.clone();
            }
        }
        ChoiceRule::Softmax { .. } => {
            let tau = softmax_tau(spec)?;
            for k in 0..spec.n_types() {
                let own = scores.score(model, k);
                let weights = stabilized_exp(
                    std::iter::once(own).chain(others().map(|m| scores.score(m, k))),
                    tau,
                )?;
                let denom = weights.iter().fold(S::zero(), |a, w| a + w.clone());
                let share = weights[0].clone() / denom;
                total = total + pop.weight(k).clone() * share * own.clone();
            }
        }
    }
    Ok(total)
}

pub(crate) fn softmax_tau<S: Scalar>(spec: &GameSpec<S>) -> Result<&S> {
    match spec.choice() {
        ChoiceRule::Softmax { tau } if *tau > S::zero() => Ok(tau),
        ChoiceRule::Softmax { tau } => Err(GameError::InvalidParameter(format!(
            "softmax temperature must be positive, got {tau}"
        ))),
        ChoiceRule::Hardmax => Err(GameError::InvalidParameter(
            "softmax requested on a hardmax game".into(),
        )),
    }
}

pub(crate) fn column_best<'a, S: Scalar>(values: impl Iterator<Item = &'a S>) -> S {
    let mut best: Option<&S> = None;
    for v in values {
        if best.is_none_or(|b| v > b) {
            best = Some(v);
        }
    }
    best.cloned().unwrap_or_else(S::zero)
}

/// `exp((s - max)/tau)` for each input, in order.
pub(crate) fn stabilized_exp<'a, S: Scalar>(
    values: impl Iterator<Item = &'a S> + Clone,
    tau: &S,
) -> Result<Vec<S>> {
    let top = column_best(values.clone());
    values
        .map(|s| {
            ((s.clone() - top.clone()) / tau.clone())
                .exp()
                .ok_or(GameError::InexactScalar)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{ScoreMatrix, UserPopulation};
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n, d)
    }

    fn rps_exact() -> GameSpec<Q> {
        let scores = ScoreMatrix::from_rows(vec![
            vec![q(2, 10), q(0, 1), q(1, 10)],
            vec![q(1, 10), q(2, 10), q(0, 1)],
            vec![q(0, 1), q(1, 10), q(2, 10)],
        ])
        .unwrap();
        GameSpec::hardmax(scores, UserPopulation::uniform(3).unwrap(), 2).unwrap()
    }

    #[test]
    fn hardmax_winner_takes_type() {
        let spec = rps_exact();
        let p = allocate_hardmax(&spec, &StrategyProfile::new(vec![0, 1])).unwrap();
        // type A: 0.2 beats 0.1
        assert_eq!(p.get(0, 0), &q(1, 1));
        assert_eq!(p.get(1, 0), &q(0, 1));
    }

    #[test]
    fn single_platform_takes_everything() {
        let spec = rps_exact().with_platforms(1).unwrap();
        for m in 0..3 {
            let p = allocate_hardmax(&spec, &StrategyProfile::new(vec![m])).unwrap();
            assert!(p.row(0).iter().all(|x| *x == q(1, 1)));
        }
    }

    #[test]
    fn full_tie_splits_evenly() {
        let spec = rps_exact().with_platforms(3).unwrap();
        let p = allocate_hardmax(&spec, &StrategyProfile::homogeneous(1, 3)).unwrap();
        for row in p.rows() {
            assert!(row.iter().all(|x| *x == q(1, 3)));
        }
    }

    #[test]
    fn out_of_range_profile_is_rejected() {
        let spec = rps_exact();
        assert!(matches!(
            allocate_hardmax(&spec, &StrategyProfile::new(vec![0, 3])),
            Err(GameError::InvalidProfile(_))
        ));
    }

    #[test]
    fn exact_rps_utilities() {
        let spec = rps_exact();
        let u = platform_utilities(&spec, &StrategyProfile::new(vec![0, 1])).unwrap();
        assert_eq!(u, vec![q(1, 10), q(1, 15)]);
        let u = platform_utilities(&spec, &StrategyProfile::new(vec![2, 2])).unwrap();
        assert_eq!(u, vec![q(1, 20), q(1, 20)]);
    }

    fn float_spec(tau: f64) -> GameSpec<f64> {
        let scores =
            ScoreMatrix::from_rows(vec![vec![0.3, 0.9], vec![0.3, 0.1], vec![0.7, 0.2]]).unwrap();
        GameSpec::new(
            scores,
            UserPopulation::uniform(2).unwrap(),
            2,
            ChoiceRule::Softmax { tau },
        )
        .unwrap()
    }

    #[test]
    fn softmax_equal_scores_split_evenly() {
        for tau in [1e-3, 0.1, 10.0] {
            let p = allocate_softmax(&float_spec(tau), &StrategyProfile::new(vec![0, 1])).unwrap();
            assert!((p.get(0, 0) - 0.5).abs() < 1e-15);
            assert!((p.get(1, 0) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_does_not_overflow_at_tiny_temperature() {
        let p = allocate_softmax(&float_spec(1e-3), &StrategyProfile::new(vec![0, 2])).unwrap();
        for k in 0..2 {
            assert!(p.get(0, k).is_finite() && p.get(1, k).is_finite());
            assert!((p.column_sum(k) - 1.0).abs() < 1e-12);
        }
        assert!((p.get(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_rejects_exact_scalars_and_bad_tau() {
        let spec = rps_exact()
            .with_choice(ChoiceRule::Softmax { tau: q(1, 10) })
            .unwrap();
        assert!(matches!(
            allocate_softmax(&spec, &StrategyProfile::new(vec![0, 1])),
            Err(GameError::InexactScalar)
        ));
        assert!(allocate_softmax(
            &float_spec(0.1).with_choice(ChoiceRule::Hardmax).unwrap(),
            &StrategyProfile::new(vec![0, 1])
        )
        .is_err());
    }

    #[test]
    fn deviation_utility_matches_full_recompute() {
        for spec in [float_spec(0.2), float_spec(0.2).with_choice(ChoiceRule::Hardmax).unwrap()] {
            let spec = spec.with_platforms(3).unwrap();
            let profile = StrategyProfile::new(vec![0, 2, 1]);
            for i in 0..3 {
                for g in 0..3 {
                    let direct =
                        platform_utilities(&spec, &profile.with_choice(i, g)).unwrap()[i];
                    let fast = deviation_utility(&spec, &profile, i, g).unwrap();
                    assert!((direct - fast).abs() < 1e-15);
                }
            }
        }
    }
}
