//! Sequential best-response dynamics with exact cycle detection.

use std::collections::HashMap;

use serde::Serialize;

use super::best_response;
use crate::error::{GameError, Result};
use crate::game::{platform_utilities, GameSpec, StrategyProfile};
use crate::scalar::Scalar;

/// Which platform moves at each step.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum MoverOrder {
    /// Platforms 1..N in turn, starting with platform 1.
    #[default]
    RoundRobin,
    /// An explicit mover list, repeated. Must name every platform.
    Fixed(Vec<usize>),
}

impl MoverOrder {
    fn resolve(&self, n_platforms: usize) -> Result<Vec<usize>> {
        match self {
            MoverOrder::RoundRobin => Ok((0..n_platforms).collect()),
            MoverOrder::Fixed(list) => {
                if let Some(&bad) = list.iter().find(|&&i| i >= n_platforms) {
                    return Err(GameError::InvalidInput(format!(
                        "mover {bad} out of range for {n_platforms} platforms"
                    )));
                }
                if (0..n_platforms).any(|i| !list.contains(&i)) {
                    return Err(GameError::InvalidInput(
                        "mover list must include every platform".into(),
                    ));
                }
                Ok(list.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Equilibrium,
    Cycle,
    Timeout,
}

/// One best-response update; `profile` and `utilities` are after the move.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<S> {
    pub step: usize,
    pub mover: usize,
    pub profile: StrategyProfile,
    pub utilities: Vec<S>,
    pub changed: bool,
}

/// The repeating part of a cycle. Each state is a profile together with the
/// platform about to move; state `L + 1` equals state 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleSegment {
    pub states: Vec<(StrategyProfile, usize)>,
}

impl CycleSegment {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn profiles(&self) -> impl Iterator<Item = &StrategyProfile> {
        self.states.iter().map(|(p, _)| p)
    }

    /// Distinct model multisets visited, in first-visit order.
    pub fn distinct_multisets(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for p in self.profiles() {
            let m = p.multiset();
            if !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsOutcome<S> {
    pub kind: OutcomeKind,
    pub start: StrategyProfile,
    pub trajectory: Vec<Step<S>>,
    pub equilibrium: Option<StrategyProfile>,
    pub cycle: Option<CycleSegment>,
}

impl<S> DynamicsOutcome<S> {
    /// Profile the run settled on, or the first state of its cycle.
    pub fn representative_profile(&self) -> &StrategyProfile {
        match (&self.equilibrium, &self.cycle) {
            (Some(p), _) => p,
            (None, Some(c)) if !c.is_empty() => &c.states[0].0,
            _ => self
                .trajectory
                .last()
                .map(|s| &s.profile)
                .unwrap_or(&self.start),
        }
    }
}

/// Runs best responses in mover order from `start`.
///
/// A mover without a strict improvement keeps its model. The run stops with
/// an equilibrium once a full pass of the mover list changes nothing, with a
/// cycle once a (profile, next mover) state repeats, and with a timeout after
/// `max_steps` updates.
pub fn run_dynamics<S: Scalar>(
    spec: &GameSpec<S>,
    start: &StrategyProfile,
    order: &MoverOrder,
    max_steps: usize,
) -> Result<DynamicsOutcome<S>> {
    if max_steps == 0 {
        return Err(GameError::InvalidParameter("max_steps must be at least 1".into()));
    }
    spec.check_profile(start)?;
    let movers = order.resolve(spec.n_platforms())?;
    let mut profile = start.clone();
    let mut position = 0usize;
    let mut quiet = 0usize;
    let mut seen: HashMap<(StrategyProfile, usize), usize> = HashMap::new();
    let mut states: Vec<(StrategyProfile, usize)> = Vec::new();
    let mut trajectory = Vec::new();

    for step in 0..max_steps {
        let key = (profile.clone(), position);
        if let Some(&first) = seen.get(&key) {
            let segment = states[first..]
                .iter()
                .map(|(p, pos)| (p.clone(), movers[*pos]))
                .collect();
            return Ok(DynamicsOutcome {
                kind: OutcomeKind::Cycle,
                start: start.clone(),
                trajectory,
                equilibrium: None,
                cycle: Some(CycleSegment { states: segment }),
            });
        }
        seen.insert(key.clone(), states.len());
        states.push(key);

        let mover = movers[position];
        let response = best_response(spec, &profile, mover)?;
        let changed = response != profile.get(mover);
        if changed {
            profile = profile.with_choice(mover, response);
            quiet = 0;
        } else {
            quiet += 1;
        }
        trajectory.push(Step {
            step,
            mover,
            profile: profile.clone(),
            utilities: platform_utilities(spec, &profile)?,
            changed,
        });
        if quiet >= movers.len() {
            return Ok(DynamicsOutcome {
                kind: OutcomeKind::Equilibrium,
                start: start.clone(),
                trajectory,
                equilibrium: Some(profile),
                cycle: None,
            });
        }
        position = (position + 1) % movers.len();
    }
    Ok(DynamicsOutcome {
        kind: OutcomeKind::Timeout,
        start: start.clone(),
        trajectory,
        equilibrium: None,
        cycle: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::verify_pne;
    use crate::game::{ScoreMatrix, UserPopulation};

    fn rps() -> GameSpec<f64> {
        GameSpec::hardmax(
            ScoreMatrix::from_rows(vec![
                vec![0.2, 0.0, 0.1],
                vec![0.1, 0.2, 0.0],
                vec![0.0, 0.1, 0.2],
            ])
            .unwrap(),
            UserPopulation::uniform(3).unwrap(),
            2,
        )
        .unwrap()
    }

    #[test]
    fn rps_cycles_through_off_diagonal_profiles() {
        let out = run_dynamics(
            &rps(),
            &StrategyProfile::new(vec![0, 0]),
            &MoverOrder::RoundRobin,
            100,
        )
        .unwrap();
        assert_eq!(out.kind, OutcomeKind::Cycle);
        let cycle = out.cycle.unwrap();
        assert_eq!(cycle.len(), 6);
        let mut profiles: Vec<_> = cycle.profiles().map(|p| p.choices().to_vec()).collect();
        profiles.sort();
        profiles.dedup();
        assert_eq!(
            profiles,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![1, 0],
                vec![1, 2],
                vec![2, 0],
                vec![2, 1]
            ]
        );
        // stepwise: every state in the cycle is left by a strict improvement
        for (p, mover) in &cycle.states {
            assert!(!verify_pne(&rps(), p).unwrap().is_equilibrium);
            let next = best_response(&rps(), p, *mover).unwrap();
            assert_ne!(next, p.get(*mover));
        }
    }

    #[test]
    fn starting_at_equilibrium_takes_one_silent_pass() {
        let spec = GameSpec::hardmax(
            ScoreMatrix::from_rows(vec![vec![0.90, 0.35], vec![0.85, 0.80]]).unwrap(),
            UserPopulation::uniform(2).unwrap(),
            2,
        )
        .unwrap();
        let start = StrategyProfile::new(vec![0, 1]);
        let out = run_dynamics(&spec, &start, &MoverOrder::RoundRobin, 10).unwrap();
        assert_eq!(out.kind, OutcomeKind::Equilibrium);
        assert_eq!(out.trajectory.len(), 2);
        assert_eq!(out.equilibrium, Some(start));
        assert!(out.trajectory.iter().all(|s| !s.changed));
    }

    #[test]
    fn timeout_is_distinct_from_cycle() {
        let out = run_dynamics(
            &rps(),
            &StrategyProfile::new(vec![0, 0]),
            &MoverOrder::RoundRobin,
            3,
        )
        .unwrap();
        assert_eq!(out.kind, OutcomeKind::Timeout);
        assert_eq!(out.trajectory.len(), 3);
        assert!(run_dynamics(&rps(), &StrategyProfile::new(vec![0, 0]), &MoverOrder::RoundRobin, 0)
            .is_err());
    }

    #[test]
    fn fixed_order_must_cover_all_platforms() {
        let start = StrategyProfile::new(vec![0, 0]);
        assert!(run_dynamics(&rps(), &start, &MoverOrder::Fixed(vec![0]), 10).is_err());
        assert!(run_dynamics(&rps(), &start, &MoverOrder::Fixed(vec![0, 2]), 10).is_err());
        let out = run_dynamics(&rps(), &start, &MoverOrder::Fixed(vec![1, 0]), 100).unwrap();
        assert_eq!(out.kind, OutcomeKind::Cycle);
        assert_eq!(out.trajectory[0].mover, 1);
    }

    #[test]
    fn deterministic() {
        let start = StrategyProfile::new(vec![1, 1]);
        let a = run_dynamics(&rps(), &start, &MoverOrder::RoundRobin, 50).unwrap();
        let b = run_dynamics(&rps(), &start, &MoverOrder::RoundRobin, 50).unwrap();
        assert_eq!(a, b);
    }
}
