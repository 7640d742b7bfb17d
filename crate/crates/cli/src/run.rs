//! The `run` and `sweep` commands.

use anyhow::{bail, Context, Result};
use modelmarket::environments::{ChoiceConfig, Fixture, InstanceSource};
use modelmarket::equilibrium::{enumerate_pne, run_dynamics, MoverOrder, OutcomeKind};
use modelmarket::metrics::{coverage_value, market_shares, social_optimum, user_welfare};
use modelmarket::{GameSpec, GameError, StrategyProfile, UserPopulation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{LoadedConfig, SweepAxis, SweepBlock, SweepValue};
use crate::output::{fmt9, join9, join_labels, round9, round9_all, OutputDir};

pub const STEP_HEADER: [&str; 11] = [
    "run_id", "seed", "sweep_value", "repetition", "step", "mover", "profile", "utilities", "coverage", "hhi", "support",
];

pub const SWEEP_SUMMARY_HEADER: [&str; 13] = [
    "sweep_value",
    "repetition",
    "seed",
    "start",
    "outcome",
    "steps",
    "welfare",
    "welfare_distinct_multiset",
    "social_optimum",
    "pne_count",
    "final_coverage",
    "final_hhi",
    "final_support",
];

#[derive(Debug, Clone, Serialize)]
pub struct CycleState {
    pub profile: Vec<String>,
    pub next_mover: usize,
}

/// Per-run summary record.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub instance: String,
    pub sweep_value: Option<String>,
    pub repetition: Option<usize>,
    pub seed: u64,
    pub n_models: usize,
    pub n_types: usize,
    pub n_platforms: usize,
    pub choice: ChoiceConfig,
    pub mover_order: String,
    pub max_steps: usize,
    pub start: Vec<String>,
    pub outcome: OutcomeKind,
    pub steps: usize,
    pub equilibrium: Option<Vec<String>>,
    pub cycle: Option<Vec<CycleState>>,
    pub cycle_multisets: Option<Vec<Vec<String>>>,
    pub welfare: Option<f64>,
    pub welfare_distinct_multiset: Option<f64>,
    pub social_optimum: f64,
    pub social_optimum_profile: Vec<String>,
    pub welfare_bound_holds: Option<bool>,
    pub pne_count: Option<usize>,
    pub pne: Option<Vec<Vec<String>>>,
    pub pne_note: Option<String>,
    pub final_profile: Vec<String>,
    pub final_coverage: f64,
    pub final_hhi: f64,
    pub final_support: usize,
    pub final_shares: Vec<f64>,
}

pub struct RunResult {
    pub summary: RunSummary,
    pub rows: Vec<Vec<String>>,
}

pub struct RunSetup<'a> {
    pub run_id: String,
    pub instance: &'a str,
    pub choice: &'a ChoiceConfig,
    pub spec: &'a GameSpec<f64>,
    pub order: &'a MoverOrder,
    pub order_label: &'a str,
    pub max_steps: usize,
    pub seed: u64,
    pub start: Option<StrategyProfile>,
    pub sweep_value: Option<String>,
    pub repetition: Option<usize>,
}

fn labels_of(spec: &GameSpec<f64>, profile: &StrategyProfile) -> Vec<String> {
    let names = spec.scores().model_labels();
    profile.choices().iter().map(|&m| names[m].clone()).collect()
}

/// Uniform draw over all `M^N` profiles.
pub fn seeded_start(spec: &GameSpec<f64>, seed: u64) -> StrategyProfile {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    StrategyProfile::new(
        (0..spec.n_platforms())
            .map(|_| rng.random_range(0..spec.n_models()))
            .collect(),
    )
}

pub fn simulate(setup: RunSetup<'_>) -> Result<RunResult> {
    let spec = setup.spec;
    let start = setup.start.clone().unwrap_or_else(|| seeded_start(spec, setup.seed));
    let outcome = run_dynamics(spec, &start, setup.order, setup.max_steps)?;

    let mut rows = Vec::with_capacity(outcome.trajectory.len());
    for step in &outcome.trajectory {
        let shares = market_shares(spec, &step.profile)?;
        rows.push(vec![
            setup.run_id.clone(),
            setup.seed.to_string(),
            setup.sweep_value.clone().unwrap_or_default(),
            setup.repetition.map(|r| r.to_string()).unwrap_or_default(),
            (step.step + 1).to_string(),
            (step.mover + 1).to_string(),
            join_labels(&labels_of(spec, &step.profile)),
            join9(&step.utilities),
            fmt9(coverage_value(spec, &step.profile)?),
            fmt9(shares.hhi),
            shares.support.to_string(),
        ]);
    }

    let (optimum, optimum_profile) = social_optimum(spec)?;
    let welfare = match user_welfare(spec, &outcome) {
        Ok(w) => Some(w),
        Err(GameError::UndefinedWelfare) => None,
        Err(e) => return Err(e.into()),
    };
    let tol = 1e-12;
    if let Some(w) = &welfare {
        if w.value > optimum + tol || w.distinct_multiset_mean > optimum + tol {
            bail!(
                "run {}: welfare {} exceeds the social optimum {optimum}",
                setup.run_id,
                w.value
            );
        }
    }
    let (pne, pne_note) = match enumerate_pne(spec) {
        Ok(list) => (Some(list.into_iter().map(|(p, _)| labels_of(spec, &p)).collect::<Vec<_>>()), None),
        Err(e @ GameError::BudgetExceeded { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let last = outcome
        .trajectory
        .last()
        .map(|s| s.profile.clone())
        .unwrap_or_else(|| start.clone());
    let final_shares = market_shares(spec, &last)?;
    let cycle = outcome.cycle.as_ref().map(|c| {
        c.states
            .iter()
            .map(|(p, mover)| CycleState {
                profile: labels_of(spec, p),
                next_mover: mover + 1,
            })
            .collect()
    });
    let names = spec.scores().model_labels();
    let cycle_multisets = outcome.cycle.as_ref().map(|c| {
        c.distinct_multisets()
            .iter()
            .map(|m| m.iter().map(|&i| names[i].clone()).collect())
            .collect()
    });

    let summary = RunSummary {
        run_id: setup.run_id,
        instance: setup.instance.to_string(),
        sweep_value: setup.sweep_value,
        repetition: setup.repetition,
        seed: setup.seed,
        n_models: spec.n_models(),
        n_types: spec.n_types(),
        n_platforms: spec.n_platforms(),
        choice: setup.choice.clone(),
        mover_order: setup.order_label.to_string(),
        max_steps: setup.max_steps,
        start: labels_of(spec, &start),
        outcome: outcome.kind,
        steps: outcome.trajectory.len(),
        equilibrium: outcome.equilibrium.as_ref().map(|p| labels_of(spec, p)),
        cycle,
        cycle_multisets,
        welfare: welfare.as_ref().map(|w| round9(w.value)),
        welfare_distinct_multiset: welfare.as_ref().map(|w| round9(w.distinct_multiset_mean)),
        social_optimum: round9(optimum),
        social_optimum_profile: labels_of(spec, &optimum_profile),
        welfare_bound_holds: welfare.as_ref().map(|w| w.value <= optimum + tol),
        pne_count: pne.as_ref().map(Vec::len),
        pne,
        pne_note,
        final_profile: labels_of(spec, &last),
        final_coverage: round9(coverage_value(spec, &last)?),
        final_hhi: round9(final_shares.hhi),
        final_support: final_shares.support,
        final_shares: round9_all(&final_shares.shares),
    };
    Ok(RunResult { summary, rows })
}

pub fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

#[derive(Serialize)]
struct RunDocument<'a> {
    command: &'static str,
    #[serde(flatten)]
    summary: &'a RunSummary,
}

pub fn cmd_run(cfg: &LoadedConfig, seed: u64, out: &OutputDir) -> Result<RunSummary> {
    let fixture = cfg.fixture()?;
    let spec = cfg.spec(&fixture)?;
    let order = cfg.mover_order(spec.n_platforms())?;
    let start = cfg.start_profile(&fixture, spec.n_platforms())?;
    let order_label = cfg.config.dynamics.order.describe();
    let result = simulate(RunSetup {
        run_id: "run".into(),
        instance: &fixture.name,
        choice: &fixture.choice,
        spec: &spec,
        order: &order,
        order_label: &order_label,
        max_steps: cfg.config.dynamics.max_steps,
        seed,
        start,
        sweep_value: None,
        repetition: None,
    })?;
    out.write_csv("steps.csv", &header(&STEP_HEADER), &result.rows)?;
    out.write_json(
        "summary.json",
        &RunDocument {
            command: "run",
            summary: &result.summary,
        },
    )?;
    Ok(result.summary)
}

fn value_label(v: &SweepValue) -> String {
    match v {
        SweepValue::Number(x) if x.fract() == 0.0 && x.abs() < 1e15 => format!("{x:.0}"),
        SweepValue::Number(x) => fmt9(*x),
        SweepValue::Weights(w) => join9(w),
    }
}

/// The instance at one sweep value.
pub fn sweep_spec(fixture: &Fixture, base: &GameSpec<f64>, axis: SweepAxis, value: &SweepValue) -> Result<GameSpec<f64>> {
    match (axis, value) {
        (SweepAxis::Models, SweepValue::Number(m)) => {
            let m = *m as usize;
            if m > base.n_models() {
                bail!("sweep asks for {m} models but the instance has {}", base.n_models());
            }
            Ok(base.with_scores(base.scores().prefix(m)?)?)
        }
        (SweepAxis::Platforms, SweepValue::Number(n)) => Ok(base.with_platforms(*n as usize)?),
        (SweepAxis::Population, SweepValue::Number(dx)) => {
            let mut shifted = fixture.clone();
            match &mut shifted.instance {
                InstanceSource::Synthetic { population, .. } => population.shift_dx = *dx,
                _ => bail!("a numeric population sweep shifts a synthetic population; this instance is a table"),
            }
            let spec = shifted.spec::<f64>()?;
            Ok(spec.with_platforms(base.n_platforms())?.with_choice(base.choice().clone())?)
        }
        (SweepAxis::Population, SweepValue::Weights(w)) if matches!(fixture.instance, InstanceSource::Synthetic { .. }) => {
            let mut reweighted = fixture.clone();
            if let InstanceSource::Synthetic { population, .. } = &mut reweighted.instance {
                if w.len() != population.components.len() {
                    bail!("sweep weights have {} entries for {} mixture components", w.len(), population.components.len());
                }
                let total: f64 = w.iter().sum();
                for (c, x) in population.components.iter_mut().zip(w) {
                    c.weight = x / total;
                }
            }
            let spec = reweighted.spec::<f64>()?;
            Ok(spec.with_platforms(base.n_platforms())?.with_choice(base.choice().clone())?)
        }
        (SweepAxis::Population, SweepValue::Weights(w)) => {
            if w.len() != base.n_types() {
                bail!("sweep weights have {} entries for {} user types", w.len(), base.n_types());
            }
            let total: f64 = w.iter().sum();
            let pop = UserPopulation::new(
                base.population().labels().to_vec(),
                w.iter().map(|x| x / total).collect(),
            )?;
            Ok(GameSpec::new(base.scores().clone(), pop, base.n_platforms(), base.choice().clone())?)
        }
        _ => bail!("sweep value {value:?} does not fit the {} axis", axis.name()),
    }
}

#[derive(Serialize)]
struct SweepDocument<'a> {
    command: &'static str,
    instance: &'a str,
    axis: &'static str,
    values: Vec<String>,
    repetitions: usize,
    seeds: &'a [u64],
    mover_order: &'a str,
    cells: Vec<&'a RunSummary>,
}

pub fn cmd_sweep(cfg: &LoadedConfig, seed: u64, out: &OutputDir) -> Result<Vec<RunSummary>> {
    let sweep: &SweepBlock = cfg
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| cfg.error("sweep", "the sweep command needs a sweep block"))?;
    let fixture = cfg.fixture()?;
    let base = cfg.spec(&fixture)?;
    let seeds: Vec<u64> = sweep
        .seeds
        .clone()
        .unwrap_or_else(|| (0..sweep.repetitions as u64).map(|r| seed.wrapping_add(r)).collect());
    let specs = sweep
        .values
        .iter()
        .map(|v| sweep_spec(&fixture, &base, sweep.axis, v).map_err(|e| anyhow::Error::from(cfg.error("values", e.to_string()))))
        .collect::<Result<Vec<_>>>()?;
    let orders = specs
        .iter()
        .map(|s| cfg.mover_order(s.n_platforms()))
        .collect::<Result<Vec<_>, _>>()?;
    let order_label = cfg.config.dynamics.order.describe();
    let labels: Vec<String> = sweep.values.iter().map(value_label).collect();

    let cells: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|v| (0..sweep.repetitions).map(move |r| (v, r)))
        .collect();
    let mut results = cells
        .par_iter()
        .map(|&(v, r)| {
            simulate(RunSetup {
                run_id: format!("v{v}-r{r}"),
                instance: &fixture.name,
                choice: &fixture.choice,
                spec: &specs[v],
                order: &orders[v],
                order_label: &order_label,
                max_steps: cfg.config.dynamics.max_steps,
                seed: seeds[r],
                start: None,
                sweep_value: Some(labels[v].clone()),
                repetition: Some(r),
            })
            .with_context(|| format!("sweep value {} repetition {r}", labels[v]))
            .map(|res| ((v, r), res))
        })
        .collect::<Result<Vec<_>>>()?;
    results.sort_by_key(|(key, _)| *key);

    let rows: Vec<Vec<String>> = results.iter().flat_map(|(_, r)| r.rows.iter().cloned()).collect();
    let mut long_header = vec!["sweep_axis".to_string()];
    long_header.extend(header(&STEP_HEADER));
    let rows: Vec<Vec<String>> = rows
        .into_iter()
        .map(|row| std::iter::once(sweep.axis.name().to_string()).chain(row).collect())
        .collect();
    out.write_csv("sweep_long.csv", &long_header, &rows)?;

    let opt = |x: Option<f64>| x.map(fmt9).unwrap_or_default();
    let summary_rows: Vec<Vec<String>> = results
        .iter()
        .map(|(_, r)| {
            let s = &r.summary;
            vec![
                s.sweep_value.clone().unwrap_or_default(),
                s.repetition.map(|r| r.to_string()).unwrap_or_default(),
                s.seed.to_string(),
                join_labels(&s.start),
                serde_json::to_value(s.outcome).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                s.steps.to_string(),
                opt(s.welfare),
                opt(s.welfare_distinct_multiset),
                fmt9(s.social_optimum),
                s.pne_count.map(|c| c.to_string()).unwrap_or_default(),
                fmt9(s.final_coverage),
                fmt9(s.final_hhi),
                s.final_support.to_string(),
            ]
        })
        .collect();
    out.write_csv("sweep_summary.csv", &header(&SWEEP_SUMMARY_HEADER), &summary_rows)?;
    out.write_json(
        "sweep_summary.json",
        &SweepDocument {
            command: "sweep",
            instance: &fixture.name,
            axis: sweep.axis.name(),
            values: labels.clone(),
            repetitions: sweep.repetitions,
            seeds: &seeds,
            mover_order: &order_label,
            cells: results.iter().map(|(_, r)| &r.summary).collect(),
        },
    )?;
    Ok(results.into_iter().map(|(_, r)| r.summary).collect())
}
