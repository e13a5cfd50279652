use std::sync::Arc;

use contrast_core::coupled::CoupledSim;
use contrast_core::crowdnav::{CrowdEnv, CrowdPolicy, CrowdScenario, PolicyKind};
use contrast_core::divergence::RewardConfig;
use contrast_core::search::{
    adaptive_scenario_search, budgeted_baseline, n_first_baseline, select_summary, MctsConfig,
    SearchConfig,
};
use contrast_core::toy::{ToyEnv, ToyPolicy};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn toy(env: ToyEnv, g1: f64, g2: f64) -> CoupledSim<ToyEnv> {
    CoupledSim::new(
        env,
        Arc::new(ToyPolicy::new("p", g1)),
        Arc::new(ToyPolicy::new("q", g2)),
    )
}

fn crowd(a: PolicyKind, b: PolicyKind) -> CoupledSim<CrowdEnv> {
    CoupledSim::new(
        CrowdEnv::default(),
        Arc::new(CrowdPolicy::new(a)),
        Arc::new(CrowdPolicy::new(b)),
    )
}

fn search_cfg(iterations: usize, simulations: usize, horizon: usize, seed: u64) -> SearchConfig {
    SearchConfig {
        iterations,
        capacity: 10,
        horizon,
        mcts: MctsConfig { simulations, exploration: 1.414 },
        seed,
    }
}

#[test]
fn baseline_actions_are_uniform() {
    let reward = RewardConfig::default();
    let mut sim = toy(ToyEnv::landscape(5, 3), 0.3, -0.2);
    let episodes = n_first_baseline(&mut sim, &(), 100, &reward, 99).unwrap();
    let mut counts = [0u64; 5];
    for t in &episodes {
        for a in t.env_actions() {
            counts[a.index()] += 1;
        }
    }
    let n: u64 = counts.iter().sum();
    assert_eq!(n, 10_000);
    let expected = n as f64 / 5.0;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let p = 1.0 - ChiSquared::new(4.0).unwrap().cdf(stat);
    assert!(p > 0.01, "counts {counts:?}, chi2 {stat}, p {p}");
}

#[test]
fn budgeted_baseline_extends_n_first() {
    let reward = RewardConfig { horizon: 12, ..Default::default() };
    let mut sim = toy(ToyEnv::landscape(4, 2), 0.7, 0.1);
    let six = n_first_baseline(&mut sim, &(), 6, &reward, 8).unwrap();
    let many = budgeted_baseline(&mut sim, &(), 500, 6, &reward, 8).unwrap();
    assert!(many.len() > 6);
    assert_eq!(&many[..6], &six[..]);
    let spent: usize = many.iter().map(|t| t.steps.len()).sum();
    assert!(spent >= 500 && spent - many.last().unwrap().steps.len() < 500);
}

#[test]
fn more_iterations_never_lower_the_best_reward() {
    let reward = RewardConfig { horizon: 8, ..Default::default() };
    for variant in [4u64, 11, 30] {
        let mut best = f64::NEG_INFINITY;
        for iterations in [10, 50, 200] {
            let mut sim = toy(ToyEnv::landscape(5, variant), 1.0, 0.2);
            let out = adaptive_scenario_search(&mut sim, &(), &search_cfg(iterations, 5, 8, 17), &reward)
                .unwrap();
            let top = out.trajectories[0].total_reward;
            assert!(top >= best, "landscape {variant}: {top} < {best} at {iterations} iterations");
            best = top;
        }
    }
}

#[test]
fn swapping_the_pair_mirrors_the_search() {
    let reward = RewardConfig::default();
    let scenario = CrowdScenario::builtin("corner-SE").unwrap();
    let cfg = search_cfg(3, 3, 100, 2);
    let ab = adaptive_scenario_search(&mut crowd(PolicyKind::Lo, PolicyKind::Hi), &scenario, &cfg, &reward)
        .unwrap();
    let ba = adaptive_scenario_search(&mut crowd(PolicyKind::Hi, PolicyKind::Lo), &scenario, &cfg, &reward)
        .unwrap();
    assert_eq!(ab.trajectories.len(), ba.trajectories.len());
    for (x, y) in ab.trajectories.iter().zip(&ba.trajectories) {
        assert_eq!(x.total_reward, y.total_reward);
        assert_eq!(x.env_actions(), y.env_actions());
        assert_eq!(x.terminal_kinds, [y.terminal_kinds[1], y.terminal_kinds[0]]);
        for (s, r) in x.steps.iter().zip(&y.steps) {
            assert_eq!(s.agent_states[0], r.agent_states[1]);
            assert_eq!(s.agent_actions[1], r.agent_actions[0]);
        }
    }
}

#[test]
fn identical_policies_never_diverge() {
    let reward = RewardConfig::default();
    for name in CrowdScenario::builtin_names() {
        let scenario = CrowdScenario::builtin(name).unwrap();
        for kind in PolicyKind::ALL {
            let out = adaptive_scenario_search(&mut crowd(kind, kind), &scenario, &search_cfg(4, 3, 100, 9), &reward)
                .unwrap();
            assert!(!out.trajectories.is_empty());
            for t in &out.trajectories {
                assert_eq!(t.total_reward, 0.0, "{name} {kind}");
            }
        }
    }
}

#[test]
fn search_beats_six_uniform_episodes_on_the_toy() {
    let reward = RewardConfig { horizon: 10, ..Default::default() };
    let mut sim = toy(ToyEnv::landscape(5, 6), 1.0, -0.4);
    let out = adaptive_scenario_search(&mut sim, &(), &search_cfg(20, 10, 10, 1), &reward).unwrap();
    let six = n_first_baseline(&mut sim, &(), 6, &reward, 1).unwrap();
    let found = select_summary(&out.trajectories).unwrap().total_reward;
    assert!(found >= select_summary(&six).unwrap().total_reward);
}
