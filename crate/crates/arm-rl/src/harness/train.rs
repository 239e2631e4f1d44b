//! Seeded multi-trial training loops producing a metrics CSV and one
//! checkpoint per trial.

use std::fs;
use std::path::PathBuf;
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{AgentKind, RunConfig};
use super::metrics::{write_csv, MetricsRow};
use super::HarnessError;
use crate::agents::{encode_obs, DqnAgent, PpoAgent, RolloutStep, Transition};
use crate::env::{ArmEnv, ObservationMode, FEATURE_DIM};
use crate::kinematics::{DiscreteAction, ACTION_COUNT};
use crate::nn::{save_checkpoint, Architecture, Head, NetworkParams};

/// Distinct RNG stream per trial for action/update randomness, decorrelated
/// from the environment stream (which is seeded with the bare trial seed).
const AGENT_STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Network architecture implied by the observation mode and agent kind.
pub fn architecture_for(agent: AgentKind, observation: ObservationMode) -> Architecture {
    let heads = match agent {
        AgentKind::Dqn => vec![Head::new("q", ACTION_COUNT)],
        AgentKind::Ppo => vec![
            Head::new("policy", ACTION_COUNT),
            Head::new("value", 1),
        ],
    };
    match observation {
        ObservationMode::Features => Architecture::features_mlp(FEATURE_DIM, heads),
        ObservationMode::Image => Architecture::image_cnn(heads),
    }
}

#[derive(Debug)]
pub struct TrainResult {
    pub csv_path: PathBuf,
    pub checkpoint_paths: Vec<PathBuf>,
    pub rows: Vec<MetricsRow>,
}

/// Accumulates one trial's per-episode metrics.
struct EpisodeTracker {
    trial: usize,
    episode: usize,
    env_step: usize,
    episode_return: f64,
    episode_length: usize,
    losses: Vec<f64>,
    rows: Vec<MetricsRow>,
}

impl EpisodeTracker {
    fn new(trial: usize) -> Self {
        EpisodeTracker {
            trial,
            episode: 1,
            env_step: 0,
            episode_return: 0.0,
            episode_length: 0,
            losses: Vec::new(),
            rows: Vec::new(),
        }
    }

    fn on_step(&mut self, reward: f64) {
        self.env_step += 1;
        self.episode_return += reward;
        self.episode_length += 1;
    }

    fn on_loss(&mut self, loss: f64) {
        self.losses.push(loss);
    }

    fn finish_episode(&mut self, epsilon: Option<f64>) {
        let mean_loss = if self.losses.is_empty() {
            None
        } else {
            Some(self.losses.iter().sum::<f64>() / self.losses.len() as f64)
        };
        self.rows.push(MetricsRow {
            trial: self.trial,
            episode: self.episode,
            env_step: self.env_step,
            episode_return: self.episode_return,
            episode_length: self.episode_length,
            mean_step_reward: self.episode_return / self.episode_length as f64,
            epsilon,
            mean_loss,
        });
        self.episode += 1;
        self.episode_return = 0.0;
        self.episode_length = 0;
        self.losses.clear();
    }
}

fn run_dqn_trial(
    cfg: &RunConfig,
    trial: usize,
) -> Result<(Vec<MetricsRow>, NetworkParams), HarnessError> {
    let seed = cfg.base_seed + trial as u64;
    let arch = architecture_for(cfg.agent, cfg.env.observation_mode);
    let mut env = ArmEnv::new(cfg.env.clone())?;
    let mut agent = DqnAgent::new(&arch, cfg.dqn.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ AGENT_STREAM_SALT);
    let mut tracker = EpisodeTracker::new(trial);

    let mut obs = encode_obs(&env.reset(Some(seed)));
    while tracker.env_step < cfg.total_steps {
        let action = agent.act(&obs, &mut rng);
        let step = env.step(DiscreteAction::new(action).expect("agent actions are always in range"))?;
        let next = encode_obs(&step.observation);
        tracker.on_step(step.reward);
        if let Some(loss) = agent.observe(
            Transition {
                obs: obs.clone(),
                action,
                reward: step.reward,
                next_obs: next.clone(),
                terminated: step.terminated,
                truncated: step.truncated,
            },
            &mut rng,
        )? {
            tracker.on_loss(loss);
        }
        let budget_done = tracker.env_step == cfg.total_steps;
        if step.terminated || step.truncated || budget_done {
            tracker.finish_episode(Some(agent.epsilon()));
            if !budget_done {
                obs = encode_obs(&env.reset(None));
            }
        } else {
            obs = next;
        }
    }
    Ok((tracker.rows, agent.params().clone()))
}

fn run_ppo_trial(
    cfg: &RunConfig,
    trial: usize,
) -> Result<(Vec<MetricsRow>, NetworkParams), HarnessError> {
    let seed = cfg.base_seed + trial as u64;
    let arch = architecture_for(cfg.agent, cfg.env.observation_mode);
    let mut env = ArmEnv::new(cfg.env.clone())?;
    let mut agent = PpoAgent::new(&arch, cfg.ppo.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ AGENT_STREAM_SALT);
    let mut tracker = EpisodeTracker::new(trial);

    let mut obs = encode_obs(&env.reset(Some(seed)));
    while tracker.env_step < cfg.total_steps {
        let (action, log_prob, value) = agent.sample_action(&obs, &mut rng);
        let step = env.step(DiscreteAction::new(action).expect("agent actions are always in range"))?;
        let next = encode_obs(&step.observation);
        tracker.on_step(step.reward);
        // The critic's view of the successor; GAE masks it on termination.
        let next_value = if step.terminated {
            0.0
        } else {
            agent.policy_value(&next).1
        };
        agent.record(RolloutStep {
            obs,
            action,
            log_prob,
            value,
            reward: step.reward,
            next_value,
            terminated: step.terminated,
            truncated: step.truncated,
        });
        if agent.rollout_full() {
            let stats = agent.update(&mut rng)?;
            tracker.on_loss(stats.total_loss);
        }
        let budget_done = tracker.env_step == cfg.total_steps;
        if step.terminated || step.truncated || budget_done {
            tracker.finish_episode(None);
            obs = encode_obs(&env.reset(None));
        } else {
            obs = next;
        }
    }
    Ok((tracker.rows, agent.params().clone()))
}

fn run_trial(
    cfg: &RunConfig,
    trial: usize,
) -> Result<(Vec<MetricsRow>, NetworkParams), HarnessError> {
    match cfg.agent {
        AgentKind::Dqn => run_dqn_trial(cfg, trial),
        AgentKind::Ppo => run_ppo_trial(cfg, trial),
    }
}

/// Train `cfg.trials` independent seeded trials (concurrently — each owns
/// its environment and agent), then write one grouped metrics CSV and one
/// checkpoint per trial. Output is a pure function of the config: trial
/// rows are buffered per trial and written in trial order, so scheduling
/// cannot reorder them.
pub fn train(cfg: &RunConfig) -> Result<TrainResult, HarnessError> {
    fs::create_dir_all(&cfg.output_dir)?;
    let trial_outputs: Vec<Result<(Vec<MetricsRow>, NetworkParams), HarnessError>> =
        thread::scope(|scope| {
            let handles: Vec<_> = (0..cfg.trials)
                .map(|trial| scope.spawn(move || run_trial(cfg, trial)))
                .collect();
            handles
                .into_iter()
                .enumerate()
                .map(|(trial, handle)| {
                    handle
                        .join()
                        .unwrap_or_else(|_| Err(HarnessError::TrialPanicked(trial)))
                })
                .collect()
        });

    let mut rows = Vec::new();
    let mut checkpoint_paths = Vec::new();
    for (trial, output) in trial_outputs.into_iter().enumerate() {
        let (trial_rows, params) = output?;
        rows.extend(trial_rows);
        let path = cfg.output_dir.join(format!("trial{trial}.ckpt"));
        save_checkpoint(&params, &path)?;
        checkpoint_paths.push(path);
    }
    let csv_path = cfg.output_dir.join("metrics.csv");
    write_csv(&csv_path, &rows)?;
    Ok(TrainResult {
        csv_path,
        checkpoint_paths,
        rows,
    })
}
