use modelmarket::acceptance::instance_violations;
use modelmarket::equilibrium::{enumerate_pne, run_dynamics, MoverOrder, OutcomeKind};
use modelmarket::game::{decomposed_utility, platform_utilities};
use modelmarket::metrics::{coverage_value, market_shares, social_optimum, user_welfare};
use modelmarket::{Exact, GameSpec, ScoreMatrix, StrategyProfile, UserPopulation};
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone)]
struct Instance {
    rows: Vec<Vec<u8>>,
    weights: Vec<u8>,
    n: usize,
    profile: Vec<usize>,
}

/// Scores are integers in 0..=20 (read as twentieths) so exact ties are common.
fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=6, 1usize..=4, 1usize..=6).prop_flat_map(|(m, n, k)| {
        (
            prop::collection::vec(prop::collection::vec(0u8..=20, k), m),
            prop::collection::vec(1u8..=10, k),
            Just(n),
            prop::collection::vec(0..m, n),
        )
            .prop_map(|(rows, weights, n, profile)| Instance { rows, weights, n, profile })
    })
}

fn f64_spec(inst: &Instance) -> GameSpec<f64> {
    let rows = inst.rows.iter().map(|r| r.iter().map(|&s| f64::from(s) / 20.0).collect()).collect();
    let total: f64 = inst.weights.iter().map(|&w| f64::from(w)).sum();
    let k = inst.weights.len();
    let pop = UserPopulation::new(
        (0..k).map(|i| format!("t{i}")).collect(),
        inst.weights.iter().map(|&w| f64::from(w) / total).collect(),
    )
    .unwrap();
    GameSpec::hardmax(ScoreMatrix::from_rows(rows).unwrap(), pop, inst.n).unwrap()
}

fn exact_spec(inst: &Instance) -> GameSpec<Exact> {
    let q = |n: u32, d: u32| BigRational::new(n.into(), d.into());
    let rows = inst.rows.iter().map(|r| r.iter().map(|&s| q(s.into(), 20)).collect()).collect();
    let total: u32 = inst.weights.iter().map(|&w| u32::from(w)).sum();
    let k = inst.weights.len();
    let pop = UserPopulation::new(
        (0..k).map(|i| format!("t{i}")).collect(),
        inst.weights.iter().map(|&w| q(w.into(), total)).collect(),
    )
    .unwrap();
    GameSpec::hardmax(ScoreMatrix::from_rows(rows).unwrap(), pop, inst.n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn identities_hold_in_floating_point(inst in instance(), tau in 0.05f64..1.0, seed in any::<u64>()) {
        let spec = f64_spec(&inst);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let bad = instance_violations(&spec, tau, &mut rng).unwrap();
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }

    #[test]
    fn identities_hold_exactly(inst in instance()) {
        let spec = exact_spec(&inst);
        let profile = StrategyProfile::new(inst.profile.clone());
        let utils = platform_utilities(&spec, &profile).unwrap();
        for (i, u) in utils.iter().enumerate() {
            prop_assert_eq!(u, &decomposed_utility(&spec, &profile, i).unwrap());
        }
        let total = utils.iter().fold(Exact::zero(), |a, u| a + u);
        prop_assert_eq!(total, coverage_value(&spec, &profile).unwrap());
    }

    #[test]
    fn exact_and_float_equilibria_agree(inst in instance()) {
        let exact: Vec<_> = enumerate_pne(&exact_spec(&inst)).unwrap().into_iter().map(|(p, _)| p).collect();
        let float: Vec<_> = enumerate_pne(&f64_spec(&inst)).unwrap().into_iter().map(|(p, _)| p).collect();
        prop_assert_eq!(exact, float);
    }

    #[test]
    fn shares_and_concentration(inst in instance()) {
        let spec = exact_spec(&inst);
        let profile = StrategyProfile::new(inst.profile.clone());
        let m = market_shares(&spec, &profile).unwrap();
        let total = m.shares.iter().fold(Exact::zero(), |a, s| a + s);
        prop_assert_eq!(total, Exact::one());
        let floor = Exact::new(1.into(), (inst.n as i64).into());
        prop_assert!(m.hhi >= floor && m.hhi <= Exact::one());
        prop_assert_eq!(m.support, profile.distinct_count());
    }

    #[test]
    fn dynamics_outcomes_are_consistent(inst in instance()) {
        let spec = f64_spec(&inst);
        let start = StrategyProfile::new(inst.profile.clone());
        let out = run_dynamics(&spec, &start, &MoverOrder::RoundRobin, 10_000).unwrap();
        let pne: Vec<_> = enumerate_pne(&spec).unwrap().into_iter().map(|(p, _)| p).collect();
        match out.kind {
            OutcomeKind::Equilibrium => prop_assert!(pne.contains(out.equilibrium.as_ref().unwrap())),
            OutcomeKind::Cycle => prop_assert!(!out.cycle.as_ref().unwrap().is_empty()),
            OutcomeKind::Timeout => prop_assert!(false, "timeout on a finite game"),
        }
        let w = user_welfare(&spec, &out).unwrap();
        let (opt, _) = social_optimum(&spec).unwrap();
        prop_assert!(w.value <= opt + 1e-12 && w.distinct_multiset_mean <= opt + 1e-12);
    }
}
