//! Closed-form equilibrium conditions written in terms of average scores and
//! deviation advantages. Each check must agree with [`verify_pne`] on the
//! profiles it covers; the tests cross-check the two routes.

use super::{enumerate_pne, verify_pne};
use crate::error::{GameError, Result};
use crate::game::{
    average_scores, deviation_advantage_for, pairwise_deviation_advantage, ChoiceRule, GameSpec,
    StrategyProfile,
};
use crate::scalar::Scalar;

/// One inequality `lhs ≥ rhs` of a condition: platform `platform` currently
/// on `current` considering a switch to `alternative`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginRow<S> {
    pub platform: usize,
    pub current: usize,
    pub alternative: usize,
    pub lhs: S,
    pub rhs: S,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport<S> {
    pub holds: bool,
    pub margins: Vec<MarginRow<S>>,
}

fn margin_row<S: Scalar>(
    spec: &GameSpec<S>,
    averages: &[S],
    profile: &StrategyProfile,
    platform: usize,
    alternative: usize,
) -> Result<MarginRow<S>> {
    let current = profile.get(platform);
    let deviated = profile.with_choice(platform, alternative);
    let lhs = averages[current].clone() - averages[alternative].clone();
    let rhs = deviation_advantage_for(spec, &deviated, platform)?
        - deviation_advantage_for(spec, profile, platform)?;
    let holds = lhs >= rhs.clone() - S::tolerance();
    Ok(MarginRow {
        platform,
        current,
        alternative,
        lhs,
        rhs,
        holds,
    })
}

/// Differentiated-equilibrium condition for a profile of distinct models:
/// `T_{f*_i} − T_g ≥ δ_g(f*_{−i} ∪ g) − δ_{f*_i}(f*)` for every platform and
/// alternative `g`.
pub fn check_differentiated_condition<S: Scalar>(
    spec: &GameSpec<S>,
    profile: &StrategyProfile,
) -> Result<ConditionReport<S>> {
    spec.check_profile(profile)?;
    if profile.len() < 2 {
        return Err(GameError::InvalidInput(
            "differentiated condition needs at least two platforms".into(),
        ));
    }
    if spec.n_models() < spec.n_platforms() {
        return Err(GameError::InvalidInput(format!(
            "{} models cannot cover {} platforms with distinct choices",
            spec.n_models(),
            spec.n_platforms()
        )));
    }
    if profile.distinct_count() != profile.len() {
        return Err(GameError::InvalidInput(format!(
            "profile {profile} repeats a model"
        )));
    }
    let averages = average_scores(spec);
    let mut margins = Vec::new();
    for platform in 0..profile.len() {
        for alternative in 0..spec.n_models() {
            if alternative != profile.get(platform) {
                margins.push(margin_row(spec, &averages, profile, platform, alternative)?);
            }
        }
    }
    Ok(ConditionReport {
        holds: margins.iter().all(|m| m.holds),
        margins,
    })
}

/// Homogeneous-equilibrium condition on `(m, …, m)`:
/// `T_m − T_k ≥ δ_k(f*_{−m} ∪ k) − δ_m(f*)` for every `k ≠ m`, where
/// `δ_m(f*) = 0`.
pub fn check_homogeneous_condition<S: Scalar>(
    spec: &GameSpec<S>,
    model: usize,
) -> Result<ConditionReport<S>> {
    if model >= spec.n_models() {
        return Err(GameError::InvalidInput(format!("model {model} out of range")));
    }
    let profile = StrategyProfile::homogeneous(model, spec.n_platforms());
    let averages = average_scores(spec);
    let margins = (0..spec.n_models())
        .filter(|&k| k != model)
        .map(|k| margin_row(spec, &averages, &profile, 0, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionReport {
        holds: margins.iter().all(|m| m.holds),
        margins,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoPlayerConditions {
    /// `(i, j)` is an equilibrium.
    pub differentiated: bool,
    /// `(i, i)` is a strict equilibrium.
    pub homogeneous_i: bool,
    /// `(j, j)` is a strict equilibrium.
    pub homogeneous_j: bool,
}

/// Two-platform conditions in pairwise form.
///
/// With two models: `−δ_ij ≤ T_i − T_j ≤ δ_ji` for differentiation and the
/// strict `T_j − T_i > δ_ij` / `T_i − T_j > δ_ji` for consolidation on `j` /
/// `i`. With more models the outside options enter through
/// `T_i + δ_ij ≥ max{T_j, max_k (T_k + δ_kj)}` and its mirror.
pub fn two_player_conditions<S: Scalar>(
    spec: &GameSpec<S>,
    i: usize,
    j: usize,
) -> Result<TwoPlayerConditions> {
    if spec.n_platforms() != 2 {
        return Err(GameError::InvalidInput(format!(
            "two-player conditions need 2 platforms, spec has {}",
            spec.n_platforms()
        )));
    }
    if i == j {
        return Err(GameError::InvalidInput("models i and j must differ".into()));
    }
    spec.check_model(i)?;
    spec.check_model(j)?;
    let t = average_scores(spec);
    let tol = S::tolerance();
    let delta = |a: usize, b: usize| pairwise_deviation_advantage(spec, a, b);
    let d_ij = delta(i, j)?;
    let d_ji = delta(j, i)?;

    if spec.n_models() == 2 {
        let gap = t[i].clone() - t[j].clone();
        return Ok(TwoPlayerConditions {
            differentiated: -d_ij.clone() <= gap.clone() + tol.clone()
                && gap.clone() <= d_ji.clone() + tol,
            homogeneous_i: gap.clone() > d_ji,
            homogeneous_j: -gap > d_ij,
        });
    }

    // best payoff (times N) available to a platform facing `rival`, other
    // than sticking with `own`
    let outside = |own: usize, rival: usize| -> Result<S> {
        let mut best = t[rival].clone();
        for k in (0..spec.n_models()).filter(|&k| k != own && k != rival) {
            let v = t[k].clone() + delta(k, rival)?;
            if v > best {
                best = v;
            }
        }
        Ok(best)
    };
    let homogeneous = |m: usize| -> Result<bool> {
        let mut ok = true;
        for k in (0..spec.n_models()).filter(|&k| k != m) {
            ok &= t[m].clone() > t[k].clone() + delta(k, m)?;
        }
        Ok(ok)
    };
    Ok(TwoPlayerConditions {
        differentiated: t[i].clone() + d_ij >= outside(i, j)? - tol.clone()
            && t[j].clone() + d_ji >= outside(j, i)? - tol,
        homogeneous_i: homogeneous(i)?,
        homogeneous_j: homogeneous(j)?,
    })
}

/// Parameters of the dominant-type sufficient condition for a homogeneous
/// equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralizationParams<S> {
    pub dominant_type: usize,
    pub dominant_model: usize,
    /// Margin of the dominant model over every other model on the dominant type.
    pub rho: S,
    /// Bound on `|S_j(θ) − S_m(θ)|` on every other type.
    pub gamma_cap: S,
    /// Weight of the dominant type.
    pub pi_star: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralizationReport<S> {
    pub threshold: S,
    pub satisfied: bool,
    pub pne_confirmed: bool,
}

/// Evaluates the threshold `1 − ρ/(ρ + 2Γ)` and checks whether the
/// homogeneous profile on the dominant model is actually an equilibrium.
///
/// The instance must meet the margin and variation bounds. Note that the
/// threshold is only a reliable sufficient condition for two platforms when
/// minority-type scores themselves stay below `Γ`; see the module tests for
/// instances where `satisfied` holds and `pne_confirmed` does not.
pub fn centralization_check<S: Scalar>(
    spec: &GameSpec<S>,
    params: &CentralizationParams<S>,
) -> Result<CentralizationReport<S>> {
    let CentralizationParams {
        dominant_type,
        dominant_model,
        rho,
        gamma_cap,
        pi_star,
    } = params;
    let (theta, m) = (*dominant_type, *dominant_model);
    if theta >= spec.n_types() || m >= spec.n_models() {
        return Err(GameError::InvalidInstance("dominant type or model out of range".into()));
    }
    if !(*rho > S::zero()) {
        return Err(GameError::InvalidInstance(format!("rho = {rho} must be positive")));
    }
    if *gamma_cap < S::zero() {
        return Err(GameError::InvalidInstance(format!(
            "gamma = {gamma_cap} must be non-negative"
        )));
    }
    if *pi_star < S::zero() || *pi_star > S::one() {
        return Err(GameError::InvalidInstance(format!(
            "pi_star = {pi_star} outside [0, 1]"
        )));
    }
    let weight_slack = S::from_f64(1e-9).unwrap_or_else(S::zero);
    if (pi_star.clone() - spec.population().weight(theta).clone()).abs() > weight_slack {
        return Err(GameError::InvalidInstance(format!(
            "pi_star = {pi_star} but the dominant type has weight {}",
            spec.population().weight(theta)
        )));
    }
    let tol = S::tolerance();
    let scores = spec.scores();
    for j in (0..spec.n_models()).filter(|&j| j != m) {
        let margin = scores.score(m, theta).clone() - scores.score(j, theta).clone();
        if margin < rho.clone() - tol.clone() {
            return Err(GameError::InvalidInstance(format!(
                "rho bound violated: model {} trails model {} by only {margin} on the dominant type",
                j + 1,
                m + 1
            )));
        }
        for k in (0..spec.n_types()).filter(|&k| k != theta) {
            let gap = (scores.score(j, k).clone() - scores.score(m, k).clone()).abs();
            if gap > gamma_cap.clone() + tol.clone() {
                return Err(GameError::InvalidInstance(format!(
                    "gamma bound violated: |S_{}(t{}) - S_{}(t{})| = {gap}",
                    j + 1,
                    k + 1,
                    m + 1,
                    k + 1
                )));
            }
        }
    }
    let two = S::one() + S::one();
    let threshold = S::one() - rho.clone() / (rho.clone() + two * gamma_cap.clone());
    let satisfied = *pi_star >= threshold;
    let pne_confirmed =
        verify_pne(spec, &StrategyProfile::homogeneous(m, spec.n_platforms()))?.is_equilibrium;
    Ok(CentralizationReport {
        threshold,
        satisfied,
        pne_confirmed,
    })
}

/// Number of pure equilibria under softmax choice at each temperature.
pub fn softmax_pne_scan<S: Scalar>(spec: &GameSpec<S>, taus: &[S]) -> Result<Vec<(S, usize)>> {
    taus.iter()
        .map(|tau| {
            let soft = spec.with_choice(ChoiceRule::softmax(tau.clone())?)?;
            Ok((tau.clone(), enumerate_pne(&soft)?.len()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::all_profiles;
    use crate::game::{ScoreMatrix, UserPopulation};

    fn two_type(rows: Vec<Vec<f64>>) -> GameSpec<f64> {
        GameSpec::hardmax(
            ScoreMatrix::from_rows(rows).unwrap(),
            UserPopulation::uniform(2).unwrap(),
            2,
        )
        .unwrap()
    }

    fn scenario_a() -> GameSpec<f64> {
        two_type(vec![vec![0.90, 0.35], vec![0.85, 0.80]])
    }

    fn scenario_b() -> GameSpec<f64> {
        two_type(vec![vec![0.60, 0.65], vec![0.70, 0.95]])
    }

    #[test]
    fn scenario_a_differentiates() {
        let p = StrategyProfile::new(vec![0, 1]);
        let report = check_differentiated_condition(&scenario_a(), &p).unwrap();
        assert!(report.holds);
        // platform 1 on g1: T1 - T2 = -0.20 against δ_22 - δ_12 = 0 - 0.275
        let row = &report.margins[0];
        assert!((row.lhs + 0.20).abs() < 1e-12);
        assert!((row.rhs + 0.275).abs() < 1e-12);
        let two = two_player_conditions(&scenario_a(), 0, 1).unwrap();
        assert!(two.differentiated);
    }

    #[test]
    fn scenario_b_consolidates() {
        let p = StrategyProfile::new(vec![0, 1]);
        assert!(!check_differentiated_condition(&scenario_b(), &p).unwrap().holds);
        assert!(check_homogeneous_condition(&scenario_b(), 1).unwrap().holds);
        assert!(!check_homogeneous_condition(&scenario_b(), 0).unwrap().holds);
        let two = two_player_conditions(&scenario_b(), 0, 1).unwrap();
        assert!(!two.differentiated);
        assert!(two.homogeneous_j);
        assert!(!two.homogeneous_i);
    }

    #[test]
    fn preconditions_are_enforced() {
        let one = scenario_a().with_platforms(1).unwrap();
        assert!(check_differentiated_condition(&one, &StrategyProfile::new(vec![0])).is_err());
        assert!(
            check_differentiated_condition(&scenario_a(), &StrategyProfile::new(vec![1, 1]))
                .is_err()
        );
        assert!(two_player_conditions(&scenario_a(), 1, 1).is_err());
        assert!(two_player_conditions(&scenario_a().with_platforms(3).unwrap(), 0, 1).is_err());
    }

    #[test]
    fn single_model_homogeneous_is_trivial() {
        let spec = two_type(vec![vec![0.2, 0.4]]);
        let r = check_homogeneous_condition(&spec, 0).unwrap();
        assert!(r.holds && r.margins.is_empty());
    }

    #[test]
    fn conditions_agree_with_verification_on_three_models() {
        let spec = GameSpec::hardmax(
            ScoreMatrix::from_rows(vec![vec![0.9, 0.35], vec![0.85, 0.8], vec![0.91, 0.77]])
                .unwrap(),
            UserPopulation::uniform(2).unwrap(),
            2,
        )
        .unwrap();
        for p in all_profiles(3, 2) {
            let pne = verify_pne(&spec, &p).unwrap().is_equilibrium;
            if p.distinct_count() == 2 {
                assert_eq!(check_differentiated_condition(&spec, &p).unwrap().holds, pne);
                let two = two_player_conditions(&spec, p.get(0), p.get(1)).unwrap();
                assert_eq!(two.differentiated, pne, "{p}");
            } else {
                assert_eq!(check_homogeneous_condition(&spec, p.get(0)).unwrap().holds, pne);
            }
        }
    }

    fn dominant_instance(pi_star: f64, gamma: f64) -> (GameSpec<f64>, CentralizationParams<f64>) {
        let scores = ScoreMatrix::from_rows(vec![
            vec![0.8, 0.5, 0.5],
            vec![0.3, 0.5 + gamma, 0.5 - gamma],
        ])
        .unwrap();
        let rest = (1.0 - pi_star) / 2.0;
        let pop = UserPopulation::new(
            vec!["star".into(), "b".into(), "c".into()],
            vec![pi_star, rest, rest],
        )
        .unwrap();
        let spec = GameSpec::hardmax(scores, pop, 2).unwrap();
        let params = CentralizationParams {
            dominant_type: 0,
            dominant_model: 0,
            rho: 0.5,
            gamma_cap: gamma,
            pi_star,
        };
        (spec, params)
    }

    #[test]
    fn zero_variation_gives_zero_threshold() {
        let (spec, params) = dominant_instance(0.4, 0.0);
        let r = centralization_check(&spec, &params).unwrap();
        assert_eq!(r.threshold, 0.0);
        assert!(r.satisfied && r.pne_confirmed);
    }

    #[test]
    fn equal_ratio_gives_two_thirds() {
        let (spec, mut params) = dominant_instance(0.7, 0.0);
        params.rho = 0.25;
        params.gamma_cap = 0.25;
        let r = centralization_check(&spec, &params).unwrap();
        assert!((r.threshold - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hypothesis_violations_are_named() {
        let (spec, mut params) = dominant_instance(0.5, 0.1);
        params.rho = 0.6;
        let err = centralization_check(&spec, &params).unwrap_err().to_string();
        assert!(err.contains("rho bound"), "{err}");
        params.rho = 0.5;
        params.gamma_cap = 0.05;
        let err = centralization_check(&spec, &params).unwrap_err().to_string();
        assert!(err.contains("gamma bound"), "{err}");
        params.gamma_cap = 0.1;
        params.pi_star = 0.9;
        assert!(centralization_check(&spec, &params).is_err());
    }

    #[test]
    fn threshold_alone_is_not_sufficient() {
        // minority scores sit far above gamma: the stated bounds hold and the
        // threshold is met, yet deviating to the minority winner pays.
        let scores =
            ScoreMatrix::from_rows(vec![vec![0.5, 0.9], vec![0.0, 0.95]]).unwrap();
        let pop = UserPopulation::new(vec!["star".into(), "b".into()], vec![0.2, 0.8]).unwrap();
        let spec = GameSpec::hardmax(scores, pop, 2).unwrap();
        let params = CentralizationParams {
            dominant_type: 0,
            dominant_model: 0,
            rho: 0.5,
            gamma_cap: 0.05,
            pi_star: 0.2,
        };
        let r = centralization_check(&spec, &params).unwrap();
        assert!(r.satisfied);
        assert!(!r.pne_confirmed);
    }

    #[test]
    fn softmax_scan_counts() {
        let rps = GameSpec::hardmax(
            ScoreMatrix::from_rows(vec![
                vec![0.2, 0.0, 0.1],
                vec![0.1, 0.2, 0.0],
                vec![0.0, 0.1, 0.2],
            ])
            .unwrap(),
            UserPopulation::uniform(3).unwrap(),
            2,
        )
        .unwrap();
        let scan = softmax_pne_scan(&rps, &[1e-3, 1e-2, 1e9]).unwrap();
        assert_eq!(scan[0].1, 0);
        assert_eq!(scan[1].1, 0);
        assert!(scan[2].1 >= 1);
        assert!(softmax_pne_scan(&rps, &[0.0]).is_err());
    }
}
