//! Acceptance criteria 1 to 10: fixture re-derivation, randomized invariant
//! suites, the dominant-type threshold check and the entry-training checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::entry::{
    evaluate_entrant, grad_f_exact, grad_s_exact, grad_s_reinforce, objective_f, toy_market,
    train_direct_gradient, train_resampling, OpponentPool, RewardTable, ToyGenerator,
};
use crate::environments::{builtin_fixture, builtin_names, verify_fixture, CheckOutcome};
use crate::equilibrium::{
    all_profiles, centralization_check, enumerate_pne, run_dynamics, CentralizationParams,
    MoverOrder,
};
use crate::error::Result;
use crate::game::{
    allocate, decomposed_utility, pairwise_deviation_advantage, platform_utilities, ChoiceRule,
    GameSpec, ScoreMatrix, StrategyProfile, UserPopulation,
};
use crate::metrics::{coverage_value, welfare_bound_check};

pub const PROPERTY_INSTANCES: usize = 1000;
pub const COROLLARY_INSTANCES: usize = 100;
const IDENTITY_TOL: f64 = 1e-12;
const SCALE_FACTORS: [f64; 3] = [0.5, 2.0, 10.0];
const DYNAMICS_STEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub criterion: u8,
    pub passed: bool,
    /// Every failing check carries a documented conflict with the source values.
    pub known_red: bool,
    pub checks: usize,
    pub summary: String,
    pub failures: Vec<String>,
}

impl CriterionResult {
    fn from_checks(criterion: u8, summary: String, checks: Vec<(bool, bool, String)>) -> Self {
        let failures: Vec<(bool, String)> = checks
            .iter()
            .filter(|(passed, _, _)| !passed)
            .map(|(_, known, line)| (*known, line.clone()))
            .collect();
        Self {
            criterion,
            passed: failures.is_empty(),
            known_red: !failures.is_empty() && failures.iter().all(|(known, _)| *known),
            checks: checks.len(),
            summary,
            failures: failures.into_iter().map(|(_, line)| line).collect(),
        }
    }

    /// `PASS`, `FAIL` or `FAIL (known conflict)`.
    pub fn status(&self) -> &'static str {
        match (self.passed, self.known_red) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known conflict)",
            (false, false) => "FAIL",
        }
    }
}

/// Outcomes of every check in every builtin fixture.
pub fn fixture_outcomes() -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for name in builtin_names() {
        let fixture = builtin_fixture(name)?;
        out.extend(verify_fixture(&fixture, &builtin_fixture)?.outcomes);
    }
    Ok(out)
}

/// A random hardmax instance with `M ≤ 6`, `N ≤ 4`, `K ≤ 6` and scores in
/// `[0, 1]`, plus a softmax temperature. Half the instances use scores on a
/// 0.1 grid so that exact ties occur.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R) -> Result<(GameSpec<f64>, f64)> {
    let m = rng.random_range(1..=6);
    let n = rng.random_range(1..=4);
    let k = rng.random_range(1..=6);
    let grid = rng.random_bool(0.5);
    let rows = (0..m)
        .map(|_| {
            (0..k)
                .map(|_| {
                    if grid {
                        f64::from(rng.random_range(0u8..=10)) / 10.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect()
        })
        .collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let pop = UserPopulation::new(
        (1..=k).map(|i| format!("t{i}")).collect(),
        raw.iter().map(|w| w / total).collect(),
    )?;
    let spec = GameSpec::hardmax(ScoreMatrix::from_rows(rows)?, pop, n)?;
    Ok((spec, rng.random_range(0.05..1.0)))
}

fn sample_profiles<R: Rng + ?Sized>(spec: &GameSpec<f64>, rng: &mut R) -> Vec<StrategyProfile> {
    let (m, n) = (spec.n_models(), spec.n_platforms());
    if m.pow(n as u32) <= 64 {
        return all_profiles(m, n).collect();
    }
    (0..32)
        .map(|_| StrategyProfile::new((0..n).map(|_| rng.random_range(0..m)).collect()))
        .collect()
}

/// Violations of the game identities on one instance; empty when all hold.
pub fn instance_violations<R: Rng + ?Sized>(
    spec: &GameSpec<f64>,
    tau: f64,
    rng: &mut R,
) -> Result<Vec<String>> {
    let mut bad = Vec::new();
    let soft = spec.with_choice(ChoiceRule::softmax(tau)?)?;
    let n = spec.n_platforms();

    for profile in sample_profiles(spec, rng) {
        let v = coverage_value(spec, &profile)?;
        for (label, game) in [("hardmax", spec), ("softmax", &soft)] {
            let alloc = allocate(game, &profile)?;
            for k in 0..game.n_types() {
                let col = alloc.column_sum(k);
                if (col - 1.0).abs() > IDENTITY_TOL {
                    bad.push(format!("{label} {profile:?}: allocation column {k} sums to {col}"));
                }
            }
            let utils = platform_utilities(game, &profile)?;
            for (i, u) in utils.iter().enumerate() {
                let d = decomposed_utility(game, &profile, i)?;
                if (u - d).abs() >= IDENTITY_TOL {
                    bad.push(format!("{label} {profile:?}: U_{i} = {u} but (T+δ)/N = {d}"));
                }
            }
            let total: f64 = utils.iter().sum();
            let ok = if game.choice().is_hardmax() {
                (total - v).abs() <= IDENTITY_TOL
            } else {
                total <= v + IDENTITY_TOL
            };
            if !ok {
                bad.push(format!("{label} {profile:?}: ΣU = {total}, V = {v}"));
            }
        }
    }

    let start = StrategyProfile::new((0..n).map(|_| rng.random_range(0..spec.n_models())).collect());
    let outcome = run_dynamics(spec, &start, &MoverOrder::RoundRobin, DYNAMICS_STEPS)?;
    let bound = welfare_bound_check(spec, &outcome)?;
    if !bound.holds {
        bad.push(format!("W = {} exceeds W_opt = {}", bound.welfare, bound.optimum));
    }

    let pne: Vec<StrategyProfile> = enumerate_pne(spec)?.into_iter().map(|(p, _)| p).collect();
    for c in SCALE_FACTORS {
        let scaled = spec.with_scores(spec.scores().scaled(&c)?)?;
        let other: Vec<StrategyProfile> = enumerate_pne(&scaled)?.into_iter().map(|(p, _)| p).collect();
        if other != pne {
            bad.push(format!("PNE set changes under scaling by {c}"));
        }
    }

    let pair = spec.with_platforms(2)?;
    let weights = pair.population().weights();
    for i in 0..pair.n_models() {
        for j in 0..pair.n_models() {
            let lhs = pairwise_deviation_advantage(&pair, i, j)? + pairwise_deviation_advantage(&pair, j, i)?;
            let rhs: f64 = (0..pair.n_types())
                .map(|k| weights[k] * (pair.scores().score(i, k) - pair.scores().score(j, k)).abs())
                .sum();
            if (lhs - rhs).abs() >= IDENTITY_TOL {
                bad.push(format!("δ_{i}{j} + δ_{j}{i} = {lhs}, Σπ|S_i − S_j| = {rhs}"));
            }
        }
    }
    Ok(bad)
}

/// Runs [`instance_violations`] over `count` seeded random instances and
/// returns the violations prefixed with the instance index.
pub fn property_suite(count: usize, seed: u64) -> Result<Vec<String>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for idx in 0..count {
        let (spec, tau) = random_instance(&mut rng)?;
        for v in instance_violations(&spec, tau, &mut rng)? {
            bad.push(format!("instance {idx}: {v}"));
        }
    }
    Ok(bad)
}

/// A two-platform instance meeting the dominant-type hypotheses with the
/// weight of the dominant type at or above the threshold. Scores off the
/// dominant type are drawn from `[0, Γ]`.
pub fn dominant_type_instance<R: Rng + ?Sized>(
    rng: &mut R,
) -> Result<(GameSpec<f64>, CentralizationParams<f64>)> {
    let m = rng.random_range(2..=6);
    let k = rng.random_range(2..=6);
    let theta = rng.random_range(0..k);
    let leader = rng.random_range(0..m);
    let rho: f64 = rng.random_range(0.05..0.5);
    let gamma: f64 = rng.random_range(0.01..0.3);
    let top = rng.random_range(rho..=1.0);
    let rows = (0..m)
        .map(|j| {
            (0..k)
                .map(|t| match (t == theta, j == leader) {
                    (true, true) => top,
                    (true, false) => rng.random_range(0.0..=top - rho),
                    (false, _) => rng.random_range(0.0..=gamma),
                })
                .collect()
        })
        .collect();
    let threshold = 1.0 - rho / (rho + 2.0 * gamma);
    let pi_star = threshold + rng.random::<f64>() * (1.0 - threshold) * 0.999;
    let rest: Vec<f64> = (0..k - 1).map(|_| rng.random_range(0.05..1.0)).collect();
    let rest_total: f64 = rest.iter().sum();
    let mut weights: Vec<f64> = rest.iter().map(|w| w / rest_total * (1.0 - pi_star)).collect();
    weights.insert(theta, pi_star);
    let pop = UserPopulation::new((1..=k).map(|i| format!("t{i}")).collect(), weights)?;
    let pi_star = *pop.weight(theta);
    let spec = GameSpec::hardmax(ScoreMatrix::from_rows(rows)?, pop, 2)?;
    let params = CentralizationParams {
        dominant_type: theta,
        dominant_model: leader,
        rho,
        gamma_cap: gamma,
        pi_star,
    };
    Ok((spec, params))
}

/// Instances where the threshold is met but the homogeneous profile is not
/// an equilibrium.
pub fn corollary_suite(count: usize, seed: u64) -> Result<Vec<String>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for idx in 0..count {
        let (spec, params) = dominant_type_instance(&mut rng)?;
        let report = centralization_check(&spec, &params)?;
        if !report.satisfied {
            bad.push(format!("instance {idx}: threshold {} not met", report.threshold));
        } else if !report.pne_confirmed {
            bad.push(format!("instance {idx}: homogeneous profile is not a PNE"));
        }
    }
    Ok(bad)
}

fn random_entry_instance<R: Rng + ?Sized>(
    rng: &mut R,
) -> Result<(ToyGenerator, RewardTable, UserPopulation<f64>, OpponentPool, f64)> {
    let x = rng.random_range(2..=8);
    let k = rng.random_range(1..=4);
    let labels = (1..=x).map(|i| format!("x{i}")).collect();
    let gen = ToyGenerator::new(labels, (0..x).map(|_| rng.random_range(-2.0..2.0)).collect())?;
    let rewards = RewardTable::new((0..k).map(|_| (0..x).map(|_| rng.random()).collect()).collect())?;
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let pop = UserPopulation::new(
        (1..=k).map(|i| format!("t{i}")).collect(),
        raw.iter().map(|w| w / total).collect(),
    )?;
    let incumbents = rng.random_range(1..=3);
    let pool = OpponentPool::new(ScoreMatrix::from_rows(
        (0..incumbents).map(|_| (0..k).map(|_| rng.random()).collect()).collect(),
    )?);
    Ok((gen, rewards, pop, pool, rng.random_range(0.5..8.0)))
}

/// Largest relative error between the exact objective gradient and central
/// finite differences over `count` random instances.
pub fn finite_difference_error(count: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst = 0.0_f64;
    for _ in 0..count {
        let (gen, rewards, pop, pool, beta) = random_entry_instance(&mut rng)?;
        let exact = grad_f_exact(&gen, &rewards, &pop, &pool, beta)?;
        let mut diff = 0.0;
        let mut norm = 0.0;
        for (i, g) in exact.iter().enumerate() {
            let shifted = |d: f64| -> Result<f64> {
                let mut logits = gen.logits().to_vec();
                logits[i] += d;
                objective_f(&gen.with_logits(logits)?, &rewards, &pop, &pool, beta)
            };
            let fd = (shifted(h)? - shifted(-h)?) / (2.0 * h);
            diff += (g - fd).powi(2);
            norm += g * g;
        }
        worst = worst.max(diff.sqrt() / norm.sqrt().max(1e-8));
    }
    Ok(worst)
}

/// Coordinates where the mean of `estimates` REINFORCE estimates with
/// `n_samples` draws each lies more than three standard errors from the
/// exact gradient, on every type of the toy market.
pub fn reinforce_outliers(estimates: usize, n_samples: usize, seed: u64) -> Result<Vec<String>> {
    let market = toy_market();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for k in 0..market.rewards.n_types() {
        let exact = grad_s_exact(&market.base, &market.rewards, k);
        let mut baseline = 0.0;
        let draws: Vec<Vec<f64>> = (0..estimates)
            .map(|_| {
                grad_s_reinforce(&market.base, &market.rewards, k, n_samples, &mut baseline, 0.9, &mut rng)
            })
            .collect::<Result<_>>()?;
        let e = estimates as f64;
        for (i, truth) in exact.iter().enumerate() {
            let mean = draws.iter().map(|d| d[i]).sum::<f64>() / e;
            let var = draws.iter().map(|d| (d[i] - mean).powi(2)).sum::<f64>() / (e - 1.0);
            let se = (var / e).sqrt();
            if (mean - truth).abs() > 3.0 * se {
                bad.push(format!("type {k}, outcome {i}: mean {mean}, exact {truth}, se {se}"));
            }
        }
    }
    Ok(bad)
}

/// Entry-training checks on the toy market as `(passed, description)`.
pub fn entry_checks(seed: u64) -> Result<Vec<(bool, String)>> {
    let mut out = Vec::new();
    let fd = finite_difference_error(50, seed)?;
    out.push((fd < 1e-4, format!("finite differences: worst relative error {fd:.3e}")));

    let outliers = reinforce_outliers(100, 1000, seed)?;
    out.push((
        outliers.is_empty(),
        format!("REINFORCE within 3 SE: {} outlying coordinates {outliers:?}", outliers.len()),
    ));

    let m = toy_market();
    let (gen, trace) = train_direct_gradient(&m.dataset, &m.rewards, &m.population, &m.pool, &m.config, &m.base)?;
    let (first, last) = (trace[0].objective, trace[trace.len() - 1].objective);
    out.push((last > first, format!("direct gradient: F {first:.6} -> {last:.6}")));
    let report = evaluate_entrant(&gen, &m.rewards, &m.population, m.pool.scores(), m.n_platforms)?;
    out.push((
        report.adopted_in_pne,
        format!(
            "direct gradient entrant scores {:?}, adopted in PNE: {}",
            report.entrant_scores, report.adopted_in_pne
        ),
    ));

    let (resampled, _) = train_resampling(&m.dataset, &m.rewards, &m.population, &m.pool, &m.config, &m.base)?;
    let before = m.rewards.scores(&m.base)[m.target_type];
    let after = m.rewards.scores(&resampled)[m.target_type];
    out.push((after > before, format!("resampling: target S {before:.6} -> {after:.6}")));
    Ok(out)
}

fn fixture_checks(outcomes: &[CheckOutcome], criterion: u8) -> Vec<(bool, bool, String)> {
    outcomes
        .iter()
        .filter(|o| o.criterion == criterion)
        .map(|o| (o.passed, o.known_conflict.is_some(), o.to_string()))
        .collect()
}

/// Evaluates every criterion with the default seeds.
pub fn run_all() -> Result<Vec<CriterionResult>> {
    run_all_with_seed(2024)
}

pub fn run_all_with_seed(seed: u64) -> Result<Vec<CriterionResult>> {
    let outcomes = fixture_outcomes()?;
    let mut results = Vec::new();
    for criterion in 1..=7u8 {
        let checks = fixture_checks(&outcomes, criterion);
        let summary = format!("{} fixture checks", checks.len());
        results.push(CriterionResult::from_checks(criterion, summary, checks));
    }

    let mut checks = fixture_checks(&outcomes, 8);
    let violations = property_suite(PROPERTY_INSTANCES, seed)?;
    checks.push((
        violations.is_empty(),
        false,
        format!("{PROPERTY_INSTANCES} random instances, {} violations", violations.len()),
    ));
    checks.extend(violations.into_iter().take(20).map(|v| (false, false, v)));
    results.push(CriterionResult::from_checks(
        8,
        format!("{PROPERTY_INSTANCES} random instances plus fixture welfare bounds"),
        checks,
    ));

    let bad = corollary_suite(COROLLARY_INSTANCES, seed)?;
    let mut checks = fixture_checks(&outcomes, 9);
    checks.push((bad.is_empty(), false, format!("{COROLLARY_INSTANCES} instances, {} failures", bad.len())));
    checks.extend(bad.into_iter().map(|v| (false, false, v)));
    results.push(CriterionResult::from_checks(
        9,
        format!("{COROLLARY_INSTANCES} dominant-type instances"),
        checks,
    ));

    let mut checks = fixture_checks(&outcomes, 10);
    checks.extend(entry_checks(seed)?.into_iter().map(|(ok, line)| (ok, false, line)));
    results.push(CriterionResult::from_checks(10, "entry-training checks".into(), checks));
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_respect_bounds() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (spec, tau) = random_instance(&mut rng).unwrap();
            assert!(spec.n_models() <= 6 && spec.n_platforms() <= 4 && spec.n_types() <= 6);
            assert!(tau > 0.0);
            assert!(spec.scores().rows().iter().flatten().all(|s| (0.0..=1.0).contains(s)));
        }
    }

    #[test]
    fn dominant_type_instances_meet_the_hypotheses() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..30 {
            let (spec, params) = dominant_type_instance(&mut rng).unwrap();
            assert!(centralization_check(&spec, &params).unwrap().satisfied);
        }
    }

    #[test]
    fn broken_identity_is_reported() {
        let rows = vec![vec![0.3, 0.6], vec![0.5, 0.2]];
        let spec = GameSpec::hardmax(
            ScoreMatrix::from_rows(rows).unwrap(),
            UserPopulation::uniform(2).unwrap(),
            2,
        )
        .unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(instance_violations(&spec, 0.2, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn status_labels() {
        let r = CriterionResult::from_checks(1, String::new(), vec![(false, true, "x".into())]);
        assert_eq!(r.status(), "FAIL (known conflict)");
        let r = CriterionResult::from_checks(1, String::new(), vec![(false, false, "x".into()), (false, true, "y".into())]);
        assert_eq!(r.status(), "FAIL");
        let r = CriterionResult::from_checks(1, String::new(), vec![(true, false, "x".into())]);
        assert_eq!(r.status(), "PASS");
    }
}
