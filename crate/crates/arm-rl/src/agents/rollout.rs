//! On-policy rollout storage and generalized advantage estimation.

use super::{AgentError, EncodedObs};

/// One on-policy step recorded at collection time. `log_prob` and `value`
/// are frozen from the collecting policy; `next_value` is the critic's
/// estimate of the successor state (ignored by GAE when `terminated`).
#[derive(Debug, Clone)]
pub struct RolloutStep {
    pub obs: EncodedObs,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub next_value: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl RolloutStep {
    /// True when this step closed its episode (goal or step cap), cutting
    /// the advantage recursion.
    pub fn episode_end(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// Plain ordered store for one rollout's steps.
#[derive(Debug, Default)]
pub struct RolloutBuffer {
    steps: Vec<RolloutStep>,
}

impl RolloutBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: RolloutStep) {
        self.steps.push(step);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[RolloutStep] {
        &self.steps
    }

    pub fn clear(&mut self) {
        self.steps.clear();
    }
}

/// Generalized advantage estimation over a rollout that may span several
/// episodes. With δ_t = r_t + γ·V(s_{t+1}) − V(s_t) (the bootstrap zeroed on
/// termination), advantages follow A_t = δ_t + γλ·A_{t+1}, restarting at
/// every episode end; returns are G_t = A_t + V(s_t). Truncated episodes
/// keep their bootstrap — the cap is bookkeeping, not a terminal state.
pub fn compute_gae(
    rollout: &RolloutBuffer,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), AgentError> {
    if rollout.is_empty() {
        return Err(AgentError::EmptyRollout);
    }
    let steps = rollout.steps();
    let n = steps.len();
    let mut advantages = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let s = &steps[t];
        let bootstrap = if s.terminated { 0.0 } else { s.next_value };
        let delta = s.reward + gamma * bootstrap - s.value;
        next_adv = if s.episode_end() {
            delta
        } else {
            delta + gamma * lambda * next_adv
        };
        advantages[t] = next_adv;
    }
    let returns = advantages
        .iter()
        .zip(steps)
        .map(|(a, s)| a + s.value)
        .collect();
    Ok((advantages, returns))
}

/// Standardize advantages to mean 0, (population) std 1 in place. A rollout
/// with no spread carries no preference signal; it maps to all zeros rather
/// than dividing by ~0.
pub fn normalize_advantages(advantages: &mut [f64]) {
    if advantages.is_empty() {
        return;
    }
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        advantages.fill(0.0);
    } else {
        for a in advantages.iter_mut() {
            *a = (*a - mean) / std;
        }
    }
}
