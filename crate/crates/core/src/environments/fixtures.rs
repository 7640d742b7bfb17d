//! Builtin game instances with machine-readable expectation records.
//!
//! Each fixture is a JSON document in `data/fixtures/`: an instance source,
//! the platform count and choice rule, and a list of checks. Checks name
//! profiles by model label and carry the acceptance criterion they belong
//! to. A check whose printed value is known not to be reproducible carries a
//! `known_conflict` note and is still evaluated.

use std::fmt;
use std::path::Path;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::{gmm_population, rbf_scores, scores_from_preferences, GmmPopulationSpec, PreferenceTable, RbfModelSpec};
use crate::equilibrium::{
    check_differentiated_condition, check_homogeneous_condition, enumerate_pne, run_dynamics,
    verify_pne, MoverOrder, OutcomeKind,
};
use crate::error::{GameError, Result};
use crate::game::{
    average_scores, pairwise_deviation_advantage, platform_utilities, ChoiceRule, GameSpec,
    ScoreMatrix, StrategyProfile, UserPopulation,
};
use crate::metrics::{coverage_value, market_shares, social_optimum, user_welfare, welfare_bound_check};
use crate::scalar::Scalar;

const BUILTIN: &[(&str, &str)] = &[
    ("c1_rps", include_str!("../../data/fixtures/c1_rps.json")),
    ("fig2_a", include_str!("../../data/fixtures/fig2_a.json")),
    ("fig2_b", include_str!("../../data/fixtures/fig2_b.json")),
    ("fig3_b", include_str!("../../data/fixtures/fig3_b.json")),
    ("c7_welfare_gap", include_str!("../../data/fixtures/c7_welfare_gap.json")),
    ("c8_players_2", include_str!("../../data/fixtures/c8_players_2.json")),
    ("c8_players_3", include_str!("../../data/fixtures/c8_players_3.json")),
    ("c9_softmax", include_str!("../../data/fixtures/c9_softmax.json")),
    ("llm_pool1", include_str!("../../data/fixtures/llm_pool1.json")),
    ("llm_pool2", include_str!("../../data/fixtures/llm_pool2.json")),
    ("llm_pool3", include_str!("../../data/fixtures/llm_pool3.json")),
    ("simu_appendix_d", include_str!("../../data/fixtures/simu_appendix_d.json")),
];

const DEFAULT_MAX_STEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChoiceConfig {
    #[default]
    Hardmax,
    Softmax { tau: f64 },
}

impl ChoiceConfig {
    pub fn to_rule<S: Scalar>(&self) -> Result<ChoiceRule<S>> {
        match self {
            ChoiceConfig::Hardmax => Ok(ChoiceRule::Hardmax),
            ChoiceConfig::Softmax { tau } => ChoiceRule::softmax(convert(*tau)?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum UniformMarker {
    Uniform,
}

/// Either the string `"uniform"` or an explicit weight list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weights {
    Explicit(Vec<f64>),
    Uniform(#[serde(with = "uniform_marker")] ()),
}

mod uniform_marker {
    use super::UniformMarker;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(_: &(), s: S) -> Result<S::Ok, S::Error> {
        UniformMarker::Uniform.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        UniformMarker::deserialize(d).map(|_| ())
    }
}

impl Weights {
    fn build<S: Scalar>(&self, k: usize, normalize: bool) -> Result<Vec<S>> {
        match self {
            Weights::Uniform(()) => {
                let w = S::one() / S::from_usize_exact(k);
                Ok(vec![w; k])
            }
            Weights::Explicit(raw) => {
                let values: Vec<S> = raw.iter().map(|&w| convert(w)).collect::<Result<_>>()?;
                if normalize {
                    let total = values.iter().fold(S::zero(), |a, w| a + w.clone());
                    if total.is_zero() {
                        return Err(GameError::InvalidPopulation("weights sum to zero".into()));
                    }
                    Ok(values.into_iter().map(|w| w / total.clone()).collect())
                } else {
                    Ok(values)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum InstanceSource {
    /// Explicit scores, one row per model.
    Table {
        type_labels: Vec<String>,
        weights: Weights,
        model_labels: Vec<String>,
        scores: Vec<Vec<f64>>,
    },
    /// Scores from per-criterion performance and per-type preferences.
    Preferences {
        criteria: Vec<String>,
        model_labels: Vec<String>,
        performance: Vec<Vec<f64>>,
        type_labels: Vec<String>,
        preferences: Vec<Vec<f64>>,
        #[serde(default)]
        normalize_preferences: bool,
        weights: Weights,
        #[serde(default)]
        normalize_weights: bool,
    },
    /// RBF models over a discretized GMM population.
    Synthetic {
        models: Vec<RbfModelSpec>,
        population: GmmPopulationSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub notes: Vec<String>,
    pub n_platforms: usize,
    #[serde(default)]
    pub choice: ChoiceConfig,
    pub instance: InstanceSource,
    #[serde(default)]
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffEntry {
    pub profile: Vec<String>,
    pub utilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactPayoffEntry {
    pub profile: Vec<String>,
    /// Fractions such as `"1/15"`.
    pub utilities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairValue {
    pub models: [String; 2],
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DynamicsExpectation {
    Equilibrium {
        #[serde(default)]
        profile_one_of: Vec<Vec<String>>,
    },
    Cycle {
        #[serde(default)]
        length: Option<usize>,
        #[serde(default)]
        multisets_include: Vec<Vec<String>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Below,
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CheckKind {
    Payoffs {
        tolerance: f64,
        entries: Vec<PayoffEntry>,
    },
    ExactPayoffs {
        entries: Vec<ExactPayoffEntry>,
    },
    PneSet {
        profiles: Vec<Vec<String>>,
    },
    IsPne {
        profile: Vec<String>,
        expected: bool,
    },
    AverageScores {
        tolerance: f64,
        values: Vec<f64>,
    },
    DeviationAdvantages {
        tolerance: f64,
        entries: Vec<PairValue>,
    },
    Coverage {
        tolerance: f64,
        profile: Vec<String>,
        value: f64,
    },
    SocialOptimum {
        tolerance: f64,
        value: f64,
    },
    Dynamics {
        start: Vec<String>,
        expect: DynamicsExpectation,
    },
    /// Welfare of the run from `start`: `value ± tolerance` on the primary
    /// figure and/or both conventions inside `interval`.
    Welfare {
        start: Vec<String>,
        #[serde(default)]
        value: Option<f64>,
        #[serde(default)]
        tolerance: Option<f64>,
        #[serde(default)]
        interval: Option<[f64; 2]>,
    },
    /// Compares welfare from `start` with another fixture's welfare.
    WelfareComparison {
        start: Vec<String>,
        relation: Relation,
        fixture: String,
        fixture_start: Vec<String>,
    },
    WelfareBound {
        start: Vec<String>,
    },
    Shares {
        tolerance: f64,
        profile: Vec<String>,
        hhi: f64,
        support: usize,
    },
    /// Differentiated equilibrium condition at `profile`; must also agree
    /// with direct verification.
    DifferentiatedCondition {
        profile: Vec<String>,
        expected: bool,
    },
    HomogeneousCondition {
        model: String,
        expected: bool,
    },
    /// This fixture's models are `fixture`'s models plus extra rows, with
    /// the same population.
    Extends {
        fixture: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub criterion: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_conflict: Option<String>,
    #[serde(flatten)]
    pub kind: CheckKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub fixture: String,
    pub criterion: u8,
    pub check: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub known_conflict: Option<String>,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.passed, &self.known_conflict) {
            (true, _) => "ok",
            (false, Some(_)) => "MISMATCH (known)",
            (false, None) => "MISMATCH",
        };
        write!(
            f,
            "[{status}] {} / criterion {} / {}: {}",
            self.fixture, self.criterion, self.check, self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureReport {
    pub fixture: String,
    pub outcomes: Vec<CheckOutcome>,
}

impl FixtureReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn unexpected_failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes
            .iter()
            .filter(|o| !o.passed && o.known_conflict.is_none())
    }
}

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

pub fn builtin_fixture(name: &str) -> Result<Fixture> {
    let (_, text) = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| GameError::UnknownFixture(name.to_string()))?;
    parse_fixture(name, text)
}

/// The builtin instance as an `f64` game.
pub fn builtin_instance(name: &str) -> Result<GameSpec<f64>> {
    builtin_fixture(name)?.spec()
}

fn parse_fixture(name: &str, text: &str) -> Result<Fixture> {
    let fixture: Fixture = serde_json::from_str(text).map_err(|e| GameError::Fixture {
        name: name.to_string(),
        message: format!("line {}, column {}: {e}", e.line(), e.column()),
    })?;
    fixture.spec::<f64>().map_err(|e| GameError::Fixture {
        name: fixture.name.clone(),
        message: e.to_string(),
    })?;
    Ok(fixture)
}

pub fn load_fixture(path: &Path) -> Result<Fixture> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| GameError::Fixture {
        name: name.clone(),
        message: e.to_string(),
    })?;
    parse_fixture(&name, &text)
}

/// Every `*.json` fixture in `dir`, sorted by name.
pub fn load_fixture_dir(dir: &Path) -> Result<Vec<Fixture>> {
    let entries = std::fs::read_dir(dir).map_err(|e| GameError::Fixture {
        name: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut fixtures = paths.iter().map(|p| load_fixture(p)).collect::<Result<Vec<_>>>()?;
    fixtures.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(fixtures)
}

fn convert<S: Scalar>(x: f64) -> Result<S> {
    S::from_f64_decimal(x).ok_or_else(|| GameError::InvalidInput(format!("cannot represent {x}")))
}

fn convert_rows<S: Scalar>(rows: &[Vec<f64>]) -> Result<Vec<Vec<S>>> {
    rows.iter()
        .map(|r| r.iter().map(|&x| convert(x)).collect())
        .collect()
}

impl Fixture {
    /// Builds the game over any scalar; decimal inputs convert exactly for
    /// rational types.
    pub fn spec<S: Scalar>(&self) -> Result<GameSpec<S>> {
        let (scores, population) = match &self.instance {
            InstanceSource::Table {
                type_labels,
                weights,
                model_labels,
                scores,
            } => {
                let w = weights.build(type_labels.len(), false)?;
                (
                    ScoreMatrix::new(model_labels.clone(), convert_rows(scores)?)?,
                    UserPopulation::new(type_labels.clone(), w)?,
                )
            }
            InstanceSource::Preferences {
                criteria,
                model_labels,
                performance,
                type_labels,
                preferences,
                normalize_preferences,
                weights,
                normalize_weights,
            } => {
                let prefs = PreferenceTable::new(
                    criteria.clone(),
                    type_labels.clone(),
                    convert_rows(preferences)?,
                )?;
                let scores = scores_from_preferences(
                    model_labels.clone(),
                    &convert_rows(performance)?,
                    &prefs,
                    *normalize_preferences,
                )?;
                let w = weights.build(type_labels.len(), *normalize_weights)?;
                (scores, UserPopulation::new(type_labels.clone(), w)?)
            }
            InstanceSource::Synthetic { models, population } => {
                let (pop, anchors) = gmm_population(population)?;
                let scores = rbf_scores(models, &anchors)?;
                let rows = convert_rows(scores.rows())?;
                let weights = pop.weights().iter().map(|&w| convert(w)).collect::<Result<Vec<S>>>()?;
                let weights = normalize_exact(weights);
                (
                    ScoreMatrix::new(scores.model_labels().to_vec(), rows)?,
                    UserPopulation::new(pop.labels().to_vec(), weights)?,
                )
            }
        };
        GameSpec::new(scores, population, self.n_platforms, self.choice.to_rule()?)
    }

    pub fn profile(&self, labels: &[String]) -> Result<StrategyProfile> {
        let names = self.model_labels();
        labels
            .iter()
            .map(|l| {
                names.iter().position(|n| n == l).ok_or_else(|| GameError::Fixture {
                    name: self.name.clone(),
                    message: format!("unknown model label `{l}`"),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(StrategyProfile::new)
    }

    pub fn model_labels(&self) -> Vec<String> {
        match &self.instance {
            InstanceSource::Table { model_labels, .. }
            | InstanceSource::Preferences { model_labels, .. } => model_labels.clone(),
            InstanceSource::Synthetic { models, .. } => {
                (1..=models.len()).map(|j| format!("g{j}")).collect()
            }
        }
    }
}

/// Counting weights may miss 1 by a rounding step once converted.
fn normalize_exact<S: Scalar>(weights: Vec<S>) -> Vec<S> {
    let total = weights.iter().fold(S::zero(), |a, w| a + w.clone());
    weights.into_iter().map(|w| w / total.clone()).collect()
}

fn labels_of(fixture: &Fixture, profile: &StrategyProfile) -> String {
    let names = fixture.model_labels();
    let parts: Vec<&str> = profile.choices().iter().map(|&m| names[m].as_str()).collect();
    format!("({})", parts.join(","))
}

fn within(actual: f64, expected: f64, tolerance: f64) -> bool {
    (actual - expected).abs() <= tolerance
}

struct Eval<'a> {
    fixture: &'a Fixture,
    spec: GameSpec<f64>,
    resolve: &'a dyn Fn(&str) -> Result<Fixture>,
}

impl Eval<'_> {
    fn welfare_from(&self, fixture: &Fixture, spec: &GameSpec<f64>, start: &[String]) -> Result<(f64, f64, String)> {
        let start = fixture.profile(start)?;
        let out = run_dynamics(spec, &start, &MoverOrder::RoundRobin, DEFAULT_MAX_STEPS)?;
        let w = user_welfare(spec, &out)?;
        let desc = match out.kind {
            OutcomeKind::Equilibrium => format!("equilibrium {}", labels_of(fixture, out.representative_profile())),
            OutcomeKind::Cycle => format!("cycle of {}", out.cycle.as_ref().map_or(0, |c| c.len())),
            OutcomeKind::Timeout => "timeout".into(),
        };
        Ok((w.value, w.distinct_multiset_mean, desc))
    }

    fn run(&self, kind: &CheckKind) -> Result<(String, bool, String)> {
        let f = self.fixture;
        let spec = &self.spec;
        Ok(match kind {
            CheckKind::Payoffs { tolerance, entries } => {
                let mut worst = 0.0f64;
                let mut bad = Vec::new();
                for e in entries {
                    let p = f.profile(&e.profile)?;
                    let u = platform_utilities(spec, &p)?;
                    for (got, want) in u.iter().zip(&e.utilities) {
                        let err = (got - want).abs();
                        worst = worst.max(err);
                        if err > *tolerance {
                            bad.push(format!("{} expected {want} got {got:.9}", labels_of(f, &p)));
                        }
                    }
                    if u.len() != e.utilities.len() {
                        bad.push(format!("{}: wrong utility count", labels_of(f, &p)));
                    }
                }
                let detail = if bad.is_empty() {
                    format!("{} profiles, max error {worst:.3e} <= {tolerance:e}", entries.len())
                } else {
                    format!("{} (tolerance {tolerance:e})", bad.join("; "))
                };
                ("payoffs".into(), bad.is_empty(), detail)
            }
            CheckKind::ExactPayoffs { entries } => {
                let exact: GameSpec<BigRational> = f.spec()?;
                let mut bad = Vec::new();
                for e in entries {
                    let p = f.profile(&e.profile)?;
                    let u = platform_utilities(&exact, &p)?;
                    for (got, want) in u.iter().zip(&e.utilities) {
                        let want: BigRational = want.parse().map_err(|_| GameError::Fixture {
                            name: f.name.clone(),
                            message: format!("bad fraction `{want}`"),
                        })?;
                        if *got != want {
                            bad.push(format!("{} expected {want} got {got}", labels_of(f, &p)));
                        }
                    }
                }
                let detail = if bad.is_empty() {
                    format!("{} profiles equal as fractions", entries.len())
                } else {
                    bad.join("; ")
                };
                ("exact payoffs".into(), bad.is_empty(), detail)
            }
            CheckKind::PneSet { profiles } => {
                let mut want = profiles
                    .iter()
                    .map(|p| f.profile(p))
                    .collect::<Result<Vec<_>>>()?;
                want.sort();
                let got: Vec<StrategyProfile> = enumerate_pne(spec)?.into_iter().map(|(p, _)| p).collect();
                let show = |v: &[StrategyProfile]| {
                    let parts: Vec<String> = v.iter().map(|p| labels_of(f, p)).collect();
                    format!("{{{}}}", parts.join(", "))
                };
                (
                    "PNE set".into(),
                    got == want,
                    format!("expected {} got {}", show(&want), show(&got)),
                )
            }
            CheckKind::IsPne { profile, expected } => {
                let p = f.profile(profile)?;
                let check = verify_pne(spec, &p)?;
                let detail = match &check.witness {
                    Some(w) => format!(
                        "{} not an equilibrium: platform {} gains {:.3e} by switching",
                        labels_of(f, &p),
                        w.platform + 1,
                        w.gain
                    ),
                    None => format!("{} is an equilibrium", labels_of(f, &p)),
                };
                ("equilibrium".into(), check.is_equilibrium == *expected, detail)
            }
            CheckKind::AverageScores { tolerance, values } => {
                let t = average_scores(spec);
                let ok = t.len() == values.len() && t.iter().zip(values).all(|(a, b)| within(*a, *b, *tolerance));
                ("average scores".into(), ok, format!("expected {values:?} got {t:?} (tolerance {tolerance:e})"))
            }
            CheckKind::DeviationAdvantages { tolerance, entries } => {
                let names = f.model_labels();
                let two = spec.with_platforms(2)?;
                let mut bad = Vec::new();
                for e in entries {
                    let idx = |l: &String| {
                        names.iter().position(|n| n == l).ok_or_else(|| GameError::Fixture {
                            name: f.name.clone(),
                            message: format!("unknown model label `{l}`"),
                        })
                    };
                    let got = pairwise_deviation_advantage(&two, idx(&e.models[0])?, idx(&e.models[1])?)?;
                    if !within(got, e.value, *tolerance) {
                        bad.push(format!("δ({},{}) expected {} got {got:.9}", e.models[0], e.models[1], e.value));
                    }
                }
                let detail = if bad.is_empty() {
                    format!("{} advantages within {tolerance:e}", entries.len())
                } else {
                    bad.join("; ")
                };
                ("deviation advantages".into(), bad.is_empty(), detail)
            }
            CheckKind::Coverage { tolerance, profile, value } => {
                let p = f.profile(profile)?;
                let v = coverage_value(spec, &p)?;
                (
                    format!("coverage {}", labels_of(f, &p)),
                    within(v, *value, *tolerance),
                    format!("expected {value} got {v:.9} (tolerance {tolerance:e})"),
                )
            }
            CheckKind::SocialOptimum { tolerance, value } => {
                let (v, arg) = social_optimum(spec)?;
                (
                    "social optimum".into(),
                    within(v, *value, *tolerance),
                    format!("expected {value} got {v:.9} at {} (tolerance {tolerance:e})", labels_of(f, &arg)),
                )
            }
            CheckKind::Dynamics { start, expect } => {
                let s = f.profile(start)?;
                let out = run_dynamics(spec, &s, &MoverOrder::RoundRobin, DEFAULT_MAX_STEPS)?;
                match expect {
                    DynamicsExpectation::Equilibrium { profile_one_of } => {
                        let allowed = profile_one_of.iter().map(|p| f.profile(p)).collect::<Result<Vec<_>>>()?;
                        let ok = out.kind == OutcomeKind::Equilibrium
                            && (allowed.is_empty() || allowed.contains(out.representative_profile()));
                        (
                            format!("dynamics from {}", labels_of(f, &s)),
                            ok,
                            format!("{:?} at {}", out.kind, labels_of(f, out.representative_profile())),
                        )
                    }
                    DynamicsExpectation::Cycle { length, multisets_include } => {
                        let mut ok = out.kind == OutcomeKind::Cycle;
                        let mut detail = format!("{:?}", out.kind);
                        if let Some(cycle) = &out.cycle {
                            let visited = cycle.distinct_multisets();
                            let states: Vec<String> = cycle.profiles().map(|p| labels_of(f, p)).collect();
                            detail = format!("cycle of {} states: {}", cycle.len(), states.join(" -> "));
                            if let Some(l) = length {
                                ok &= cycle.len() == *l;
                            }
                            for m in multisets_include {
                                let want = f.profile(m)?.multiset();
                                if !visited.contains(&want) {
                                    ok = false;
                                    detail.push_str(&format!("; missing multiset {m:?}"));
                                }
                            }
                        }
                        (format!("dynamics from {}", labels_of(f, &s)), ok, detail)
                    }
                }
            }
            CheckKind::Welfare {
                start,
                value,
                tolerance,
                interval,
            } => {
                let (primary, secondary, desc) = self.welfare_from(f, spec, start)?;
                let mut ok = true;
                let mut parts = vec![format!("{desc}: W = {primary:.9} (distinct-multiset mean {secondary:.9})")];
                if let Some(v) = value {
                    let tol = tolerance.unwrap_or(0.0);
                    ok &= within(primary, *v, tol);
                    parts.push(format!("expected {v} ± {tol:e}"));
                }
                if let Some([lo, hi]) = interval {
                    ok &= [primary, secondary].iter().all(|w| (*lo..=*hi).contains(w));
                    parts.push(format!("expected both in [{lo}, {hi}]"));
                }
                ("welfare".into(), ok, parts.join("; "))
            }
            CheckKind::WelfareComparison {
                start,
                relation,
                fixture,
                fixture_start,
            } => {
                let (mine, mine2, _) = self.welfare_from(f, spec, start)?;
                let other = (self.resolve)(fixture)?;
                let other_spec = other.spec::<f64>()?;
                let (theirs, _, _) = self.welfare_from(&other, &other_spec, fixture_start)?;
                let ok = match relation {
                    Relation::Below => mine < theirs && mine2 < theirs,
                    Relation::Above => mine > theirs && mine2 > theirs,
                };
                (
                    format!("welfare {relation:?} {fixture}").to_lowercase(),
                    ok,
                    format!("W = {mine:.9} (distinct-multiset mean {mine2:.9}) vs {fixture} W = {theirs:.9}"),
                )
            }
            CheckKind::WelfareBound { start } => {
                let s = f.profile(start)?;
                let out = run_dynamics(spec, &s, &MoverOrder::RoundRobin, DEFAULT_MAX_STEPS)?;
                let b = welfare_bound_check(spec, &out)?;
                (
                    "welfare bound".into(),
                    b.holds,
                    format!("W = {:.9} <= W_opt = {:.9} (slack {:.3e})", b.welfare, b.optimum, b.slack),
                )
            }
            CheckKind::Shares {
                tolerance,
                profile,
                hhi,
                support,
            } => {
                let p = f.profile(profile)?;
                let m = market_shares(spec, &p)?;
                (
                    format!("shares {}", labels_of(f, &p)),
                    within(m.hhi, *hhi, *tolerance) && m.support == *support,
                    format!(
                        "expected HHI {hhi} support {support}; got HHI {:.9} support {}",
                        m.hhi, m.support
                    ),
                )
            }
            CheckKind::DifferentiatedCondition { profile, expected } => {
                let p = f.profile(profile)?;
                let cond = check_differentiated_condition(spec, &p)?;
                let pne = verify_pne(spec, &p)?.is_equilibrium;
                (
                    format!("differentiated condition {}", labels_of(f, &p)),
                    cond.holds == *expected && cond.holds == pne,
                    format!("condition {} (expected {expected}), direct verification {pne}", cond.holds),
                )
            }
            CheckKind::HomogeneousCondition { model, expected } => {
                let p = f.profile(std::slice::from_ref(model))?;
                let m = p.get(0);
                let cond = check_homogeneous_condition(spec, m)?;
                let pne = verify_pne(spec, &StrategyProfile::homogeneous(m, spec.n_platforms()))?.is_equilibrium;
                (
                    format!("homogeneous condition {model}"),
                    cond.holds == *expected && cond.holds == pne,
                    format!("condition {} (expected {expected}), direct verification {pne}", cond.holds),
                )
            }
            CheckKind::Extends { fixture } => {
                let base = (self.resolve)(fixture)?.spec::<f64>()?;
                let m = base.n_models();
                let ok = spec.n_models() > m
                    && spec.scores().prefix(m)?.rows() == base.scores().rows()
                    && spec.population() == base.population();
                (
                    format!("extends {fixture}"),
                    ok,
                    format!("{} base models, {} here", m, spec.n_models()),
                )
            }
        })
    }
}

/// Re-derives every check of `fixture`. `resolve` supplies fixtures named by
/// cross-fixture checks.
pub fn verify_fixture(fixture: &Fixture, resolve: &dyn Fn(&str) -> Result<Fixture>) -> Result<FixtureReport> {
    let eval = Eval {
        fixture,
        spec: fixture.spec()?,
        resolve,
    };
    let mut outcomes = Vec::new();
    for check in &fixture.checks {
        let (label, passed, detail) = match eval.run(&check.kind) {
            Ok(r) => r,
            Err(e) => ("error".into(), false, e.to_string()),
        };
        outcomes.push(CheckOutcome {
            fixture: fixture.name.clone(),
            criterion: check.criterion,
            check: label,
            passed,
            detail,
            known_conflict: check.known_conflict.clone(),
        });
    }
    Ok(FixtureReport {
        fixture: fixture.name.clone(),
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_parses() {
        for name in builtin_names() {
            let f = builtin_fixture(name).unwrap();
            assert_eq!(f.name, name);
            assert!(!f.description.is_empty());
        }
        assert!(matches!(builtin_fixture("nope"), Err(GameError::UnknownFixture(_))));
    }

    #[test]
    fn registered_instances() {
        let c1 = builtin_instance("c1_rps").unwrap();
        assert_eq!(c1.n_models(), 3);
        // type A row across models
        let col: Vec<f64> = (0..3).map(|m| *c1.scores().score(m, 0)).collect();
        assert_eq!(col, vec![0.2, 0.1, 0.0]);

        let c8 = builtin_instance("c8_players_3").unwrap();
        assert_eq!(c8.n_models(), 6);
        assert_eq!(c8.population().weights(), &[0.18, 0.17, 0.16, 0.16, 0.17, 0.16]);
        assert_eq!(c8.n_platforms(), 3);

        let c9 = builtin_instance("c9_softmax").unwrap();
        assert_eq!(c9.choice(), &ChoiceRule::Softmax { tau: 0.1 });
        let col: Vec<f64> = (0..3).map(|m| *c9.scores().score(m, 0)).collect();
        assert_eq!(col, vec![0.734, 0.148, 0.934]);
    }

    #[test]
    fn exact_build_is_exact() {
        let f = builtin_fixture("c1_rps").unwrap();
        let s: GameSpec<BigRational> = f.spec().unwrap();
        assert_eq!(s.population().weight(0), &BigRational::new(1.into(), 3.into()));
        assert_eq!(s.scores().score(0, 0), &BigRational::new(1.into(), 5.into()));
    }

    #[test]
    fn pool3_keeps_raw_weights_and_normalizes() {
        let f = builtin_fixture("llm_pool3").unwrap();
        match &f.instance {
            InstanceSource::Preferences { weights: Weights::Explicit(raw), normalize_weights, .. } => {
                assert!(*normalize_weights);
                assert!((raw.iter().sum::<f64>() - 1.3).abs() < 1e-12);
            }
            other => panic!("unexpected source {other:?}"),
        }
        let s = f.spec::<f64>().unwrap();
        assert!((s.population().weight(0) - 0.35 / 1.3).abs() < 1e-15);
    }

    #[test]
    fn weights_accept_uniform_marker() {
        let w: Weights = serde_json::from_str("\"uniform\"").unwrap();
        assert_eq!(w, Weights::Uniform(()));
        let w: Weights = serde_json::from_str("[0.5, 0.5]").unwrap();
        assert_eq!(w, Weights::Explicit(vec![0.5, 0.5]));
        assert!(serde_json::from_str::<Weights>("\"even\"").is_err());
    }

    #[test]
    fn corrupted_score_is_reported() {
        let mut f = builtin_fixture("fig2_a").unwrap();
        if let InstanceSource::Table { scores, .. } = &mut f.instance {
            scores[0][0] = 0.91;
        }
        let report = verify_fixture(&f, &builtin_fixture).unwrap();
        assert!(report.unexpected_failures().any(|o| o.check == "payoffs"));
    }

    #[test]
    fn bad_label_is_a_fixture_error() {
        let f = builtin_fixture("fig2_a").unwrap();
        assert!(f.profile(&["g9".to_string()]).is_err());
    }
}
