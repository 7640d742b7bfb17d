//! The `verify-fixtures` and `list-fixtures` commands.

use std::fmt::Write;
use std::path::Path;

use anyhow::{bail, Result};
use modelmarket::environments::{
    builtin_fixture, builtin_names, load_fixture_dir, verify_fixture, CheckOutcome, ChoiceConfig, Fixture,
};

pub struct VerifyReport {
    pub outcomes: Vec<CheckOutcome>,
    pub passed: usize,
    pub known: usize,
    pub unexpected: usize,
}

impl VerifyReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for o in &self.outcomes {
            let _ = writeln!(s, "{o}");
            if let (false, Some(note)) = (o.passed, &o.known_conflict) {
                let _ = writeln!(s, "    known conflict: {note}");
            }
        }
        let _ = writeln!(
            s,
            "{} checks: {} passed, {} documented conflicts, {} unexpected mismatches",
            self.outcomes.len(),
            self.passed,
            self.known,
            self.unexpected
        );
        s
    }
}

/// Verifies the builtin fixtures, or those in `dir`, optionally restricted
/// to `names`. Unknown names fail before any computation.
pub fn verify(dir: Option<&Path>, names: &[String]) -> Result<VerifyReport> {
    let pool: Vec<Fixture> = match dir {
        Some(d) => load_fixture_dir(d)?,
        None => builtin_names()
            .into_iter()
            .map(builtin_fixture)
            .collect::<modelmarket::Result<_>>()?,
    };
    for n in names {
        if !pool.iter().any(|f| &f.name == n) {
            bail!("unknown fixture `{n}`");
        }
    }
    let selected: Vec<&Fixture> = pool
        .iter()
        .filter(|f| names.is_empty() || names.contains(&f.name))
        .collect();
    let resolve = |name: &str| match pool.iter().find(|f| f.name == name) {
        Some(f) => Ok(f.clone()),
        None => builtin_fixture(name),
    };
    let mut outcomes = Vec::new();
    for f in selected {
        outcomes.extend(verify_fixture(f, &resolve)?.outcomes);
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    let known = outcomes.iter().filter(|o| !o.passed && o.known_conflict.is_some()).count();
    let unexpected = outcomes.len() - passed - known;
    Ok(VerifyReport {
        outcomes,
        passed,
        known,
        unexpected,
    })
}

pub fn list() -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, "{:<16} {:>6} {:>5} {:>9}  {:<14} description", "name", "models", "types", "platforms", "choice");
    for name in builtin_names() {
        let f = builtin_fixture(name)?;
        let spec = f.spec::<f64>()?;
        let choice = match f.choice {
            ChoiceConfig::Hardmax => "hardmax".to_string(),
            ChoiceConfig::Softmax { tau } => format!("softmax {tau}"),
        };
        let _ = writeln!(
            s,
            "{:<16} {:>6} {:>5} {:>9}  {:<14} {}",
            f.name,
            spec.n_models(),
            spec.n_types(),
            spec.n_platforms(),
            choice,
            f.description
        );
    }
    Ok(s)
}
