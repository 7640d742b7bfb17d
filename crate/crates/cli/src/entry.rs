//! The `entry` command: train an entrant and compare the market before and
//! after it joins.

use anyhow::{bail, Result};
use modelmarket::entry::{
    evaluate_entrant, objective_f, train_direct_gradient, train_resampling, EntryReport, EpochRecord, RoundRecord,
    TrainingConfig,
};
use modelmarket::equilibrium::{enumerate_pne, run_dynamics, DynamicsOutcome, MoverOrder, OutcomeKind};
use modelmarket::metrics::{metrics_record, MetricsRecord};
use modelmarket::{GameError, GameSpec, StrategyProfile};
use serde::Serialize;

use crate::config::{LoadedConfig, Method};
use crate::output::{fmt9, round9, round9_all, OutputDir};

#[derive(Debug, Serialize)]
pub struct MarketReport {
    pub models: Vec<String>,
    pub pne: Vec<Vec<String>>,
    pub dynamics_outcome: OutcomeKind,
    pub dynamics_profile: Vec<String>,
    pub welfare: f64,
    pub welfare_distinct_multiset: f64,
    pub social_optimum: f64,
    pub coverage: f64,
    pub hhi: f64,
    pub support: usize,
    pub shares: Vec<f64>,
}

impl MarketReport {
    fn new(
        spec: &GameSpec<f64>,
        pne: &[StrategyProfile],
        outcome: &DynamicsOutcome<f64>,
        metrics: &MetricsRecord<f64>,
    ) -> Self {
        let names = spec.scores().model_labels();
        let labels = |p: &StrategyProfile| p.choices().iter().map(|&m| names[m].clone()).collect::<Vec<_>>();
        Self {
            models: names.to_vec(),
            pne: pne.iter().map(labels).collect(),
            dynamics_outcome: outcome.kind,
            dynamics_profile: labels(outcome.representative_profile()),
            welfare: round9(metrics.welfare.value),
            welfare_distinct_multiset: round9(metrics.welfare.distinct_multiset_mean),
            social_optimum: round9(metrics.social_optimum),
            coverage: round9(metrics.coverage),
            hhi: round9(metrics.hhi),
            support: metrics.support,
            shares: round9_all(&metrics.shares),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MethodReport {
    pub method: &'static str,
    pub trace_file: String,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub final_scores: Vec<f64>,
    pub final_probabilities: Vec<f64>,
    pub entrant_adopted_in_pne: bool,
    pub entrant_adopted_in_dynamics: bool,
    pub after: MarketReport,
}

#[derive(Debug, Serialize)]
pub struct EntrySummary {
    pub command: &'static str,
    pub market: String,
    pub n_platforms: usize,
    pub settings: TrainingConfig,
    pub type_labels: Vec<String>,
    pub type_weights: Vec<f64>,
    pub target_type: String,
    pub outcome_labels: Vec<String>,
    pub base_probabilities: Vec<f64>,
    pub base_scores: Vec<f64>,
    pub base_objective: f64,
    pub before: MarketReport,
    pub methods: Vec<MethodReport>,
}

fn direct_rows(trace: &[EpochRecord]) -> Vec<Vec<String>> {
    trace
        .iter()
        .map(|r| {
            let mut row = vec![
                r.epoch.to_string(),
                fmt9(r.cross_entropy),
                fmt9(r.objective),
                fmt9(r.loss),
                fmt9(r.learning_rate),
            ];
            row.extend(r.scores.iter().copied().map(fmt9));
            row
        })
        .collect()
}

fn resampling_rows(trace: &[RoundRecord]) -> Vec<Vec<String>> {
    trace
        .iter()
        .map(|r| {
            let mut row = vec![r.round.to_string(), fmt9(r.objective)];
            row.extend(r.scores_estimate.iter().copied().map(fmt9));
            row.extend(r.scores.iter().copied().map(fmt9));
            row
        })
        .collect()
}

fn method_report(
    method: Method,
    trace_file: String,
    objectives: (f64, f64),
    report: &EntryReport,
    probabilities: Vec<f64>,
) -> MethodReport {
    MethodReport {
        method: method.name(),
        trace_file,
        initial_objective: round9(objectives.0),
        final_objective: round9(objectives.1),
        final_scores: round9_all(&report.entrant_scores),
        final_probabilities: round9_all(&probabilities),
        entrant_adopted_in_pne: report.adopted_in_pne,
        entrant_adopted_in_dynamics: report.adopted_in_dynamics,
        after: MarketReport::new(&report.spec, &report.pne, &report.outcome, &report.metrics),
    }
}

pub fn cmd_entry(cfg: &LoadedConfig, seed: Option<u64>, out: &OutputDir) -> Result<EntrySummary> {
    let mut m = cfg.entry_market()?;
    if let Some(seed) = seed {
        m.settings.seed = seed;
    }
    m.settings
        .validate()
        .map_err(|e| cfg.error("settings", e.to_string()))?;
    let methods = cfg.config.training.as_ref().expect("checked by entry_market").methods.clone();
    let type_labels = m.population.labels().to_vec();

    let before = GameSpec::hardmax(m.pool.scores().clone(), m.population.clone(), m.n_platforms)?;
    let start = StrategyProfile::homogeneous(0, m.n_platforms);
    let before_outcome = run_dynamics(&before, &start, &MoverOrder::RoundRobin, 10_000)?;
    let before_metrics = metrics_record(&before, &before_outcome)?;
    let before_pne: Vec<StrategyProfile> = enumerate_pne(&before)?.into_iter().map(|(p, _)| p).collect();

    let score_cols = |prefix: &str| type_labels.iter().map(|t| format!("{prefix}_{t}")).collect::<Vec<_>>();
    let mut reports = Vec::new();
    for method in methods {
        match method {
            Method::Direct => {
                let mut header: Vec<String> = ["epoch", "cross_entropy", "objective", "loss", "learning_rate"]
                    .map(String::from)
                    .to_vec();
                header.extend(score_cols("score"));
                let result = train_direct_gradient(&m.dataset, &m.rewards, &m.population, &m.pool, &m.settings, &m.base);
                let (gen, trace) = match result {
                    Ok(r) => r,
                    Err(GameError::Diverged { epoch, trace }) => {
                        out.write_csv("trace_direct.csv", &header, &direct_rows(&trace))?;
                        bail!("direct-gradient training diverged at epoch {epoch}; partial trace written");
                    }
                    Err(e) => return Err(e.into()),
                };
                let path = out.write_csv("trace_direct.csv", &header, &direct_rows(&trace))?;
                let report = evaluate_entrant(&gen, &m.rewards, &m.population, m.pool.scores(), m.n_platforms)?;
                let objectives = (trace[0].objective, trace[trace.len() - 1].objective);
                reports.push(method_report(method, file_name(&path), objectives, &report, gen.probabilities()));
            }
            Method::Resampling => {
                let mut header = vec!["round".to_string(), "objective".to_string()];
                header.extend(score_cols("estimate"));
                header.extend(score_cols("score"));
                let (gen, trace) =
                    train_resampling(&m.dataset, &m.rewards, &m.population, &m.pool, &m.settings, &m.base)?;
                let path = out.write_csv("trace_resampling.csv", &header, &resampling_rows(&trace))?;
                let report = evaluate_entrant(&gen, &m.rewards, &m.population, m.pool.scores(), m.n_platforms)?;
                let objectives = (trace[0].objective, trace[trace.len() - 1].objective);
                reports.push(method_report(method, file_name(&path), objectives, &report, gen.probabilities()));
            }
        }
    }

    let summary = EntrySummary {
        command: "entry",
        market: m.name.clone(),
        n_platforms: m.n_platforms,
        settings: m.settings.clone(),
        type_labels: type_labels.clone(),
        type_weights: round9_all(m.population.weights()),
        target_type: type_labels[m.target_type].clone(),
        outcome_labels: m.base.labels().to_vec(),
        base_probabilities: round9_all(&m.base.probabilities()),
        base_scores: round9_all(&m.rewards.scores(&m.base)),
        base_objective: round9(objective_f(&m.base, &m.rewards, &m.population, &m.pool, m.settings.beta)?),
        before: MarketReport::new(&before, &before_pne, &before_outcome, &before_metrics),
        methods: reports,
    };
    out.write_json("entry_summary.json", &summary)?;
    Ok(summary)
}

fn file_name(path: &std::path::Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}
