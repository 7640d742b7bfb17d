//! Instance builders: preference-weighted score tables, the RBF/GMM synthetic
//! generator, and the builtin fixtures with their expectation records.

mod fixtures;
mod synthetic;

pub use fixtures::{
    builtin_fixture, builtin_instance, builtin_names, load_fixture, load_fixture_dir,
    verify_fixture, Check, CheckOutcome, ChoiceConfig, DynamicsExpectation, Fixture,
    FixtureReport, InstanceSource, Weights,
};
pub use synthetic::{gmm_population, rbf_scores, GmmComponent, GmmPopulationSpec, RbfKernel, RbfModelSpec};

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game::ScoreMatrix;
use crate::scalar::Scalar;

/// Per-type weights over evaluation criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceTable<S> {
    pub criteria: Vec<String>,
    pub type_labels: Vec<String>,
    /// One row per type, one column per criterion.
    pub weights: Vec<Vec<S>>,
}

impl<S: Scalar> PreferenceTable<S> {
    pub fn new(criteria: Vec<String>, type_labels: Vec<String>, weights: Vec<Vec<S>>) -> Result<Self> {
        if weights.len() != type_labels.len() {
            return Err(GameError::InvalidInput(format!(
                "{} preference rows for {} types",
                weights.len(),
                type_labels.len()
            )));
        }
        for (label, row) in type_labels.iter().zip(&weights) {
            if row.len() != criteria.len() {
                return Err(GameError::InvalidInput(format!(
                    "type {label}: {} weights for {} criteria",
                    row.len(),
                    criteria.len()
                )));
            }
            if row.iter().any(|w| *w < S::zero()) {
                return Err(GameError::InvalidInput(format!("type {label}: negative weight")));
            }
        }
        Ok(Self {
            criteria,
            type_labels,
            weights,
        })
    }
}

/// `S_j(θ) = Σ_c θ_c · perf[j][c]`, with each θ rescaled to sum 1 first when
/// `normalize` is set (all-zero rows stay zero).
pub fn scores_from_preferences<S: Scalar>(
    model_labels: Vec<String>,
    performance: &[Vec<S>],
    prefs: &PreferenceTable<S>,
    normalize: bool,
) -> Result<ScoreMatrix<S>> {
    if performance.len() != model_labels.len() {
        return Err(GameError::InvalidInput(format!(
            "{} performance rows for {} models",
            performance.len(),
            model_labels.len()
        )));
    }
    let n_criteria = prefs.criteria.len();
    if let Some(row) = performance.iter().find(|r| r.len() != n_criteria) {
        return Err(GameError::InvalidInput(format!(
            "performance row has {} entries, expected {n_criteria}",
            row.len()
        )));
    }
    if performance.iter().flatten().any(|v| *v < S::zero()) {
        return Err(GameError::InvalidInput("negative performance entry".into()));
    }
    let thetas: Vec<Vec<S>> = prefs
        .weights
        .iter()
        .map(|row| {
            let total = row.iter().fold(S::zero(), |a, w| a + w.clone());
            if normalize && !total.is_zero() {
                row.iter().map(|w| w.clone() / total.clone()).collect()
            } else {
                row.clone()
            }
        })
        .collect();
    let rows = performance
        .iter()
        .map(|perf| {
            thetas
                .iter()
                .map(|theta| {
                    theta
                        .iter()
                        .zip(perf)
                        .fold(S::zero(), |a, (w, p)| a + w.clone() * p.clone())
                })
                .collect()
        })
        .collect();
    ScoreMatrix::new(model_labels, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn appendix_f() -> (Vec<Vec<f64>>, PreferenceTable<f64>) {
        let perf = vec![
            vec![0.5079, 0.4297, 0.1721, 0.0413, 0.4604],
            vec![0.5710, 0.6497, 0.3326, 0.3089, 0.4363],
            vec![0.8723, 0.6688, 0.1237, 0.4007, 0.4007],
            vec![0.8320, 0.7723, 0.3989, 0.4955, 0.7265],
        ];
        let prefs = PreferenceTable::new(
            ["HEval", "Multi", "Overall", "Math", "IFEval"].map(String::from).to_vec(),
            ["A", "E"].map(String::from).to_vec(),
            vec![vec![0.6, 0.0, 0.2, 0.0, 0.2], vec![0.0, 0.0, 0.0, 1.0, 0.0]],
        )
        .unwrap();
        (perf, prefs)
    }

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("M{i}")).collect()
    }

    #[test]
    fn appendix_f_scores() {
        let (perf, prefs) = appendix_f();
        let s = scores_from_preferences(labels(4), &perf, &prefs, false).unwrap();
        assert!((s.score(3, 0) - 0.72428).abs() < 1e-12);
        assert_eq!(*s.score(3, 1), 0.4955);
    }

    #[test]
    fn zero_preferences_give_zero_scores() {
        let (perf, _) = appendix_f();
        let prefs = PreferenceTable::new(
            ["a", "b", "c", "d", "e"].map(String::from).to_vec(),
            vec!["z".into()],
            vec![vec![0.0; 5]],
        )
        .unwrap();
        for normalize in [false, true] {
            let s = scores_from_preferences(labels(4), &perf, &prefs, normalize).unwrap();
            assert!(s.rows().iter().flatten().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn normalization_rescales() {
        let prefs = PreferenceTable::new(
            vec!["x".into(), "y".into()],
            vec!["t".into()],
            vec![vec![2.0, 2.0]],
        )
        .unwrap();
        let perf = vec![vec![0.2, 0.4]];
        let raw = scores_from_preferences(labels(1), &perf, &prefs, false);
        // 1.2 is a valid score; only negativity and non-finiteness are rejected
        assert!((*raw.unwrap().score(0, 0) - 1.2_f64).abs() < 1e-12);
        let s = scores_from_preferences(labels(1), &perf, &prefs, true).unwrap();
        assert!((*s.score(0, 0) - 0.3_f64).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let (mut perf, prefs) = appendix_f();
        perf[1].pop();
        assert!(scores_from_preferences(labels(4), &perf, &prefs, false).is_err());
        assert!(PreferenceTable::new(vec!["a".into()], vec!["t".into()], vec![vec![0.5, 0.5]]).is_err());
    }
}
