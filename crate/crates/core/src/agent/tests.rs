use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::nnet::{Activation, DenseLayer};

fn spec(actions: usize, width: usize) -> EnvSpec {
    EnvSpec {
        action_count: actions,
        observation_width: width,
        max_frames_per_episode: 100,
    }
}

fn linear_config() -> AgentConfig {
    AgentConfig {
        trunk_hidden: vec![],
        q_hidden: vec![],
        duration_hidden: vec![],
        ..AgentConfig::default()
    }
}

/// Bandit agent without a trunk whose Q head and duration head are single
/// zeroed identity layers.
fn blank_agent(actions: usize, width: usize, d_max: usize) -> Agent {
    let mut agent = Agent::new(
        DurationRule::Bandit { d_max },
        linear_config(),
        spec(actions, width),
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    let online = agent.online_mut();
    online.q_head = vec![DenseLayer::zeros(width, actions, Activation::Identity).unwrap()];
    online.duration_head = vec![DenseLayer::zeros(width, d_max, Activation::Identity).unwrap()];
    agent.sync_target();
    agent
}

fn set_q_biases(agent: &mut Agent, biases: &[f64]) {
    agent.online_mut().q_head[0].biases_mut().copy_from_slice(biases);
}

fn transition(reward: f64, frames: usize, terminal: bool) -> Transition {
    Transition {
        state: vec![1.0, 0.0],
        action: 0,
        duration: frames,
        reward,
        next_state: vec![0.0, 1.0],
        frames_elapsed: frames,
        terminal,
        bandit_reward: 0.0,
    }
}

fn within_three_sigma(count: usize, n: usize, p: f64) -> bool {
    let mean = n as f64 * p;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - mean).abs() <= 3.0 * sigma
}

#[test]
fn zero_output_layer_gives_zero_q() {
    let agent = blank_agent(3, 4, 5);
    assert_eq!(agent.q_values(&[0.3, -1.0, 2.0, 0.5]).unwrap(), vec![0.0; 3]);
}

#[test]
fn q_values_match_matrix_arithmetic() {
    let mut agent = blank_agent(2, 3, 2);
    let w = [0.5, -1.0, 2.0, 0.25, 0.0, -0.75];
    let b = [0.1, -0.2];
    let head = &mut agent.online_mut().q_head[0];
    head.weights_mut().copy_from_slice(&w);
    head.biases_mut().copy_from_slice(&b);
    let s = [1.5, -2.0, 0.5];
    let expected = [
        w[0] * s[0] + w[1] * s[1] + w[2] * s[2] + b[0],
        w[3] * s[0] + w[4] * s[1] + w[5] * s[2] + b[1],
    ];
    let q = agent.q_values(&s).unwrap();
    assert_eq!(q, expected.to_vec());
    assert_eq!(agent.q_values(&s).unwrap(), q);
}

#[test]
fn wrong_state_width_is_dimension_error() {
    let agent = blank_agent(2, 3, 2);
    assert!(matches!(agent.q_values(&[1.0]), Err(Error::Dimension { .. })));
}

#[test]
fn greedy_selection_and_ties() {
    let mut agent = blank_agent(3, 1, 1);
    agent.set_epsilon(0.0);
    set_q_biases(&mut agent, &[1.0, 3.0, 2.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(agent.select_action(&[0.0], &mut rng).unwrap(), 1);

    let mut agent = blank_agent(2, 1, 1);
    agent.set_epsilon(0.0);
    set_q_biases(&mut agent, &[2.0, 2.0]);
    assert_eq!(agent.select_action(&[0.0], &mut rng).unwrap(), 0);
}

#[test]
fn full_exploration_is_uniform() {
    let mut agent = blank_agent(4, 1, 1);
    agent.set_epsilon(1.0);
    set_q_biases(&mut agent, &[0.0, 9.0, 0.0, 0.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[agent.select_action(&[0.0], &mut rng).unwrap()] += 1;
    }
    for c in counts {
        assert!(within_three_sigma(c, n, 0.25), "{counts:?}");
    }
}

#[test]
fn greedy_invariant_under_constant_shift() {
    let mut agent = blank_agent(4, 1, 1);
    agent.set_epsilon(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    set_q_biases(&mut agent, &[0.5, -1.0, 0.75, 0.1]);
    let a = agent.select_action(&[0.0], &mut rng).unwrap();
    set_q_biases(&mut agent, &[100.5, 99.0, 100.75, 100.1]);
    assert_eq!(agent.select_action(&[0.0], &mut rng).unwrap(), a);
}

#[test]
fn duration_policy_closed_forms() {
    let agent = blank_agent(2, 2, 5);
    let p = agent.duration_policy(&[0.4, 1.0]).unwrap();
    assert!(p.probs().iter().all(|&x| (x - 0.2).abs() < 1e-15));

    let mut agent = blank_agent(2, 2, 2);
    agent.online_mut().duration_head[0]
        .biases_mut()
        .copy_from_slice(&[2f64.ln(), 0.0]);
    let p = agent.duration_policy(&[0.0, 0.0]).unwrap();
    assert!((p.prob(1) - 2.0 / 3.0).abs() < 1e-12);
    assert!((p.prob(2) - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn duration_probs_sum_to_one() {
    let mut init = ChaCha8Rng::seed_from_u64(4);
    let agent = Agent::new(DurationRule::Bandit { d_max: 10 }, AgentConfig::default(), spec(3, 6), &mut init).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let s: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let p = agent.duration_policy(&s).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.probs().iter().all(|&x| x > 0.0));
    }
}

#[test]
fn single_arm_always_one() {
    let agent = blank_agent(2, 2, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    assert_eq!(agent.duration_policy(&[0.3, 0.1]).unwrap().probs(), &[1.0]);
    assert!((0..1000).all(|_| agent.sample_duration(&[0.3, 0.1], &mut rng).unwrap() == 1));
}

#[test]
fn degenerate_policy_picks_first_arm() {
    let mut agent = blank_agent(2, 1, 4);
    agent.online_mut().duration_head[0]
        .biases_mut()
        .copy_from_slice(&[40.0, 0.0, 0.0, 0.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ones = (0..10_000)
        .filter(|_| agent.sample_duration(&[0.0], &mut rng).unwrap() == 1)
        .count();
    assert_eq!(ones, 10_000);
}

#[test]
fn uniform_policy_sampling_frequencies() {
    let agent = blank_agent(2, 1, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 100_000;
    let mut counts = [0usize; 6];
    for _ in 0..n {
        counts[agent.sample_duration(&[0.0], &mut rng).unwrap() - 1] += 1;
    }
    for c in counts {
        assert!(within_three_sigma(c, n, 1.0 / 6.0), "{counts:?}");
    }
}

#[test]
fn same_rng_same_duration() {
    let agent = blank_agent(2, 1, 6);
    let a: Vec<usize> = {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        (0..20).map(|_| agent.sample_duration(&[0.0], &mut rng).unwrap()).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let b: Vec<usize> = (0..20).map(|_| agent.sample_duration(&[0.0], &mut rng).unwrap()).collect();
    assert_eq!(a, b);
}

#[test]
fn bandit_reward_arithmetic() {
    // Q(s, .) = W s with s one-hot; state 0 has Q = [3, 1], state 1 has Q = [5, 4].
    let mut agent = blank_agent(2, 2, 2);
    agent.online_mut().q_head[0]
        .weights_mut()
        .copy_from_slice(&[3.0, 5.0, 1.0, 4.0]);
    let (s0, s1) = ([1.0, 0.0], [0.0, 1.0]);
    assert_eq!(agent.bandit_reward(&s0, 0, &s1).unwrap(), 2.0);
    assert_eq!(agent.bandit_reward(&s0, 0, &s0).unwrap(), 0.0);
}

#[test]
fn bandit_reward_uses_online_network() {
    let mut agent = blank_agent(2, 1, 2);
    set_q_biases(&mut agent, &[1.0, 2.0]);
    // The target still holds zeros; the online difference must be used.
    assert_eq!(agent.bandit_reward(&[0.0], 0, &[0.0]).unwrap(), 1.0);
}

#[test]
fn terminal_outcome_uses_accumulated_reward() {
    let mut agent = blank_agent(2, 1, 2);
    set_q_biases(&mut agent, &[0.25, 5.0]);
    let outcome = SmdpOutcome {
        next_observation: vec![0.0],
        accumulated_reward: 1.0,
        undiscounted_reward: 1.0,
        frames_elapsed: 1,
        terminal: true,
    };
    assert_eq!(agent.outcome_bandit_reward(&[0.0], 0, &outcome).unwrap(), 0.75);
    let live = SmdpOutcome {
        terminal: false,
        ..outcome
    };
    assert_eq!(agent.outcome_bandit_reward(&[0.0], 0, &live).unwrap(), 4.75);
}

#[test]
fn zero_bandit_reward_leaves_head_unchanged() {
    let mut init = ChaCha8Rng::seed_from_u64(10);
    let mut agent = Agent::new(DurationRule::Bandit { d_max: 4 }, AgentConfig::default(), spec(2, 3), &mut init).unwrap();
    let before = agent.online().clone();
    assert_eq!(agent.bandit_update(&[1.0, 0.0, 0.5], 2, 0.0).unwrap(), BanditStep::Applied);
    assert_eq!(agent.online(), &before);
}

#[test]
fn positive_reward_raises_taken_arm() {
    let mut agent = blank_agent(2, 1, 2);
    let s = [1.0];
    let (grads, _) = agent.bandit_loss_gradient(&s, 1, 1.0).unwrap().unwrap();
    // Descent direction is the negated score: -(1 - 0.5), -(0 - 0.5).
    assert_eq!(grads.layers[0].biases, vec![-0.5, 0.5]);
    let p0 = agent.duration_policy(&s).unwrap().prob(1);
    agent.bandit_update(&s, 1, 1.0).unwrap();
    assert!(agent.duration_policy(&s).unwrap().prob(1) > p0);
}

#[test]
fn bandit_update_leaves_trunk_and_q_head_alone() {
    let mut init = ChaCha8Rng::seed_from_u64(11);
    let mut agent = Agent::new(DurationRule::Bandit { d_max: 5 }, AgentConfig::default(), spec(3, 4), &mut init).unwrap();
    let before = agent.online().clone();
    agent.bandit_update(&[0.5, 1.0, -0.3, 0.2], 3, 2.5).unwrap();
    assert_eq!(agent.online().trunk, before.trunk);
    assert_eq!(agent.online().q_head, before.q_head);
    assert_ne!(agent.online().duration_head, before.duration_head);
}

#[test]
fn joint_training_flag_moves_trunk() {
    let config = AgentConfig {
        bandit_trains_trunk: true,
        ..AgentConfig::default()
    };
    let mut init = ChaCha8Rng::seed_from_u64(12);
    let mut agent = Agent::new(DurationRule::Bandit { d_max: 5 }, config, spec(3, 4), &mut init).unwrap();
    let before = agent.online().clone();
    agent.bandit_update(&[0.5, 1.0, -0.3, 0.2], 3, 2.5).unwrap();
    assert_ne!(agent.online().trunk, before.trunk);
}

#[test]
fn clamped_log_prob_skips_update() {
    let mut agent = blank_agent(2, 1, 2);
    agent.online_mut().duration_head[0]
        .biases_mut()
        .copy_from_slice(&[60.0, 0.0]);
    let before = agent.online().clone();
    assert_eq!(agent.bandit_update(&[0.0], 2, 1.0).unwrap(), BanditStep::Clamped);
    assert_eq!(agent.online(), &before);
}

#[test]
fn bandit_update_rejects_bad_duration() {
    let mut agent = blank_agent(2, 1, 3);
    assert!(agent.bandit_update(&[0.0], 0, 1.0).is_err());
    assert!(agent.bandit_update(&[0.0], 4, 1.0).is_err());
}

#[test]
fn non_finite_bandit_reward_is_skipped_and_counted() {
    let mut agent = blank_agent(2, 1, 3);
    assert_eq!(agent.bandit_update(&[0.0], 1, f64::NAN).unwrap(), BanditStep::Skipped);
    assert_eq!(agent.counters().skipped_bandit_updates, 1);
}

#[test]
fn td_targets() {
    let mut agent = blank_agent(2, 2, 2);
    assert_eq!(agent.td_target(&transition(1.0, 1, true)).unwrap(), 1.0);

    let config = AgentConfig {
        gamma: 0.9,
        ..linear_config()
    };
    agent.config = config;
    set_q_biases(&mut agent, &[1.0, 0.5]);
    agent.sync_target();
    let y = agent.td_target(&transition(0.0, 2, false)).unwrap();
    assert!((y - 0.81).abs() < 1e-15);
}

#[test]
fn perfect_prediction_zero_loss_no_change() {
    let mut agent = blank_agent(2, 2, 2);
    set_q_biases(&mut agent, &[1.0, 0.0]);
    agent.sync_target();
    let t = transition(1.0, 1, true);
    let before = agent.online().clone();
    let step = agent.td_update(&[&t, &t]).unwrap();
    assert_eq!(step.loss, Some(0.0));
    assert_eq!(agent.online(), &before);
}

#[test]
fn td_update_returns_pre_step_loss_and_moves_toward_target() {
    let mut agent = blank_agent(2, 2, 2);
    let t = transition(1.0, 1, true);
    let first = agent.td_update(&[&t]).unwrap().loss.unwrap();
    assert_eq!(first, 1.0);
    let second = agent.td_update(&[&t]).unwrap().loss.unwrap();
    assert!(second < first);
    assert_eq!(agent.counters().td_updates, 2);
}

#[test]
fn non_finite_target_dropped() {
    let mut agent = blank_agent(2, 2, 2);
    let bad = transition(f64::INFINITY, 1, true);
    let good = transition(1.0, 1, true);
    let step = agent.td_update(&[&bad, &good]).unwrap();
    assert_eq!(step.dropped, 1);
    assert_eq!(step.loss, Some(1.0));
    assert_eq!(agent.counters().dropped_transitions, 1);
    let step = agent.td_update(&[&bad]).unwrap();
    assert_eq!((step.loss, step.applied), (None, false));
}

#[test]
fn target_sync_contract() {
    let mut init = ChaCha8Rng::seed_from_u64(13);
    let config = AgentConfig {
        target_sync_interval: 3,
        ..AgentConfig::default()
    };
    let mut agent = Agent::new(DurationRule::Bandit { d_max: 3 }, config, spec(2, 3), &mut init).unwrap();
    let initial = agent.online().q_path();
    assert_eq!(agent.target(), &initial);

    let t = Transition {
        state: vec![1.0, 0.0, 0.0],
        next_state: vec![0.0, 1.0, 0.0],
        ..transition(1.0, 1, true)
    };
    agent.td_update(&[&t]).unwrap();
    assert_eq!(agent.target(), &initial);

    let syncs: Vec<bool> = (0..9).map(|_| agent.record_decision()).collect();
    assert_eq!(syncs, [false, false, true, false, false, true, false, false, true]);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let s: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        assert_eq!(agent.target_q_values(&s).unwrap(), agent.q_values(&s).unwrap());
    }
}

#[test]
fn argmax_ties_low() {
    assert_eq!(argmax(&[1.0, 1.0, 0.5]), 0);
    assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
}

#[test]
fn non_bandit_agents_have_no_duration_head() {
    let mut init = ChaCha8Rng::seed_from_u64(15);
    let mut agent = Agent::new(DurationRule::Static { arr: 3 }, AgentConfig::default(), spec(2, 3), &mut init).unwrap();
    assert!(agent.duration_policy(&[0.0; 3]).is_err());
    assert!(agent.bandit_update(&[0.0; 3], 1, 1.0).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let d = agent.decide(&[0.0; 3], &mut rng, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(d.duration, 3);
}
