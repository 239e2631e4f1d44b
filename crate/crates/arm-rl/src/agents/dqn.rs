//! Deep Q-learning: ε-greedy behaviour policy, replay sampling, TD(0)
//! targets from a periodically synchronized target network, and Adam steps
//! on the squared TD error.

use rand::Rng;

use super::{stack_obs, AgentError, EncodedObs, ReplayBuffer, Transition};
use crate::kinematics::ACTION_COUNT;
use crate::nn::{
    adam_step, forward, infer, init_params, AdamConfig, AdamState, Architecture, NetworkParams,
    Tape, Tensor,
};

/// How the target network follows the online network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetUpdate {
    /// Bitwise copy every `every_steps` environment steps.
    HardCopy { every_steps: usize },
    /// Soft blend `θ⁻ ← ρ·θ + (1 − ρ)·θ⁻` after every environment step.
    Polyak { rate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig {
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_update: TargetUpdate,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: usize,
    /// Environment steps collected before the first gradient update.
    pub train_start: usize,
    /// Gradient update cadence in environment steps.
    pub update_every: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            gamma: 0.99,
            lr: 1e-3,
            batch_size: 64,
            replay_capacity: 20_000,
            target_update: TargetUpdate::HardCopy { every_steps: 1000 },
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            epsilon_decay_steps: 60_000,
            train_start: 1000,
            update_every: 4,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let fail = |msg: String| Err(AgentError::InvalidConfig(msg));
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("gamma must be in [0, 1), got {}", self.gamma));
        }
        if self.epsilon_end > self.epsilon_start {
            return fail(format!(
                "epsilon_end {} exceeds epsilon_start {}",
                self.epsilon_end, self.epsilon_start
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return fail("epsilon endpoints must lie in [0, 1]".into());
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return fail(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 || self.update_every == 0 || self.epsilon_decay_steps == 0 {
            return fail("batch_size, update_every and epsilon_decay_steps must be positive".into());
        }
        if self.replay_capacity < self.batch_size {
            return fail(format!(
                "replay_capacity {} smaller than batch_size {}",
                self.replay_capacity, self.batch_size
            ));
        }
        match self.target_update {
            TargetUpdate::HardCopy { every_steps } if every_steps == 0 => {
                fail("HardCopy period must be positive".into())
            }
            TargetUpdate::Polyak { rate } if !(0.0..=1.0).contains(&rate) => {
                fail(format!("Polyak rate must be in [0, 1], got {rate}"))
            }
            _ => Ok(()),
        }
    }
}

/// Exploration rate after `step` environment steps: linear from
/// `epsilon_start` at step 0 to `epsilon_end` at `epsilon_decay_steps`,
/// constant afterwards.
pub fn epsilon_at(step: usize, cfg: &DqnConfig) -> f64 {
    if step >= cfg.epsilon_decay_steps {
        return cfg.epsilon_end;
    }
    let frac = step as f64 / cfg.epsilon_decay_steps as f64;
    cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac
}

/// Index of the largest Q-value; ties resolve to the lowest index.
fn greedy_from_q(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

fn q_values(params: &NetworkParams, obs: &EncodedObs) -> Vec<f64> {
    let outputs = infer(params, &obs.to_input()).expect("q-network forward failed");
    outputs
        .into_iter()
        .find_map(|(name, t)| (name == "q").then(|| t.values().to_vec()))
        .expect("q-network must expose a \"q\" head")
}

/// ε-greedy action selection: uniform random with probability ε, otherwise
/// the greedy action under `params` (ties to the lowest index).
pub fn select_action_dqn<R: Rng + ?Sized>(
    params: &NetworkParams,
    obs: &EncodedObs,
    epsilon: f64,
    rng: &mut R,
) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..ACTION_COUNT)
    } else {
        greedy_from_q(&q_values(params, obs))
    }
}

/// TD targets from already-computed quantities:
/// `y = r + γ·max_a′ Q(s′, a′; θ⁻)`, with the bootstrap term dropped on
/// termination (goal reached). Truncated episodes keep the bootstrap —
/// hitting the step cap says nothing about the value of the state reached.
pub fn td_targets_from(
    rewards: &[f64],
    terminated: &[bool],
    next_q_max: &[f64],
    gamma: f64,
) -> Vec<f64> {
    assert_eq!(rewards.len(), terminated.len());
    assert_eq!(rewards.len(), next_q_max.len());
    rewards
        .iter()
        .zip(terminated)
        .zip(next_q_max)
        .map(|((&r, &term), &q)| if term { r } else { r + gamma * q })
        .collect()
}

/// TD targets for a batch of transitions under the target network.
pub fn td_targets(
    batch: &[&Transition],
    target_params: &NetworkParams,
    gamma: f64,
) -> Result<Vec<f64>, AgentError> {
    assert!(!batch.is_empty(), "td_targets needs a non-empty batch");
    let next_inputs = stack_obs(&batch.iter().map(|t| &t.next_obs).collect::<Vec<_>>());
    let outputs = infer(target_params, &next_inputs)?;
    let q = outputs
        .into_iter()
        .find_map(|(name, t)| (name == "q").then_some(t))
        .expect("target network must expose a \"q\" head");
    let cols = q.shape()[1];
    let next_q_max: Vec<f64> = q
        .values()
        .chunks(cols)
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
    let terminated: Vec<bool> = batch.iter().map(|t| t.terminated).collect();
    Ok(td_targets_from(&rewards, &terminated, &next_q_max, gamma))
}

/// One Adam step on the mean squared TD error over `batch`. Returns the
/// pre-step loss. The target network is read, never written.
pub fn dqn_update(
    params: &mut NetworkParams,
    target_params: &NetworkParams,
    batch: &[&Transition],
    cfg: &DqnConfig,
    adam: &mut AdamState,
) -> Result<f64, AgentError> {
    assert!(!batch.is_empty(), "dqn_update needs a non-empty batch");
    let targets = td_targets(batch, target_params, cfg.gamma)?;
    let inputs = stack_obs(&batch.iter().map(|t| &t.obs).collect::<Vec<_>>());
    let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();

    let mut tape = Tape::new();
    let pass = forward(&mut tape, params, &inputs)?;
    let q_all = pass.head("q");
    let q_taken = tape.gather_col(q_all, &actions);
    let y = tape.constant(Tensor::vector(targets));
    let diff = tape.sub(q_taken, y);
    let sq = tape.mul(diff, diff);
    let loss = tape.mean(sq);
    let loss_value = tape.value(loss).item();

    let grads = tape.backward(loss)?;
    let grad_slices: Vec<Option<&[f64]>> =
        pass.param_nodes.iter().map(|&id| grads.get(id)).collect();
    adam_step(params, &grad_slices, adam);
    Ok(loss_value)
}

/// Move the target network toward the online network per the update mode.
pub fn sync_target(online: &NetworkParams, target: &mut NetworkParams, mode: TargetUpdate) {
    match mode {
        TargetUpdate::HardCopy { .. } => *target = online.clone(),
        TargetUpdate::Polyak { rate } => {
            assert_eq!(
                online.tensors.len(),
                target.tensors.len(),
                "parameter sets must align"
            );
            for ((_, src), (_, dst)) in online.tensors.iter().zip(target.tensors.iter_mut()) {
                for (d, &s) in dst.values_mut().iter_mut().zip(src.values()) {
                    *d = rate * s + (1.0 - rate) * *d;
                }
            }
        }
    }
}

/// Complete DQN learner: owns the online/target networks, replay buffer,
/// optimizer state, and the step counter driving ε decay and sync cadence.
#[derive(Debug)]
pub struct DqnAgent {
    cfg: DqnConfig,
    params: NetworkParams,
    target: NetworkParams,
    replay: ReplayBuffer,
    adam: AdamState,
    env_steps: usize,
}

impl DqnAgent {
    pub fn new(arch: &Architecture, cfg: DqnConfig, seed: u64) -> Result<Self, AgentError> {
        cfg.validate()?;
        let params = init_params(arch, seed)?;
        let target = params.clone();
        let adam = AdamState::new(AdamConfig::with_lr(cfg.lr), &params);
        let replay = ReplayBuffer::new(cfg.replay_capacity);
        Ok(DqnAgent {
            cfg,
            params,
            target,
            replay,
            adam,
            env_steps: 0,
        })
    }

    /// Resume acting (greedily) from saved parameters.
    pub fn from_params(params: NetworkParams, cfg: DqnConfig) -> Result<Self, AgentError> {
        cfg.validate()?;
        let target = params.clone();
        let adam = AdamState::new(AdamConfig::with_lr(cfg.lr), &params);
        let replay = ReplayBuffer::new(cfg.replay_capacity);
        Ok(DqnAgent {
            cfg,
            params,
            target,
            replay,
            adam,
            env_steps: 0,
        })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn config(&self) -> &DqnConfig {
        &self.cfg
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }

    /// Current exploration rate.
    pub fn epsilon(&self) -> f64 {
        epsilon_at(self.env_steps, &self.cfg)
    }

    /// Behaviour action (ε-greedy at the current decay step).
    pub fn act<R: Rng + ?Sized>(&self, obs: &EncodedObs, rng: &mut R) -> usize {
        select_action_dqn(&self.params, obs, self.epsilon(), rng)
    }

    /// Evaluation action (pure greedy).
    pub fn greedy_action(&self, obs: &EncodedObs) -> usize {
        greedy_from_q(&q_values(&self.params, obs))
    }

    /// Record one transition, advance the step counter, and run whatever
    /// updates are due. Returns the TD loss if a gradient step ran.
    pub fn observe<R: Rng + ?Sized>(
        &mut self,
        transition: Transition,
        rng: &mut R,
    ) -> Result<Option<f64>, AgentError> {
        self.replay.push(transition);
        self.env_steps += 1;
        let mut loss = None;
        if self.env_steps >= self.cfg.train_start
            && self.env_steps % self.cfg.update_every == 0
            && self.replay.len() >= self.cfg.batch_size
        {
            let batch = self.replay.sample(self.cfg.batch_size, rng);
            loss = Some(dqn_update(
                &mut self.params,
                &self.target,
                &batch,
                &self.cfg,
                &mut self.adam,
            )?);
        }
        match self.cfg.target_update {
            TargetUpdate::HardCopy { every_steps } => {
                if self.env_steps % every_steps == 0 {
                    sync_target(&self.params, &mut self.target, self.cfg.target_update);
                }
            }
            TargetUpdate::Polyak { .. } => {
                sync_target(&self.params, &mut self.target, self.cfg.target_update);
            }
        }
        Ok(loss)
    }
}
