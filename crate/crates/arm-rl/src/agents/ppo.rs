//! Proximal policy optimization with a clipped surrogate objective, a
//! shared-trunk value head, GAE advantages, and an entropy bonus.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    compute_gae, normalize_advantages, stack_obs, AgentError, EncodedObs, RolloutBuffer,
    RolloutStep,
};
use crate::nn::{
    adam_step, forward, infer, init_params, AdamConfig, AdamState, Architecture, ForwardPass,
    NetworkParams, NodeId, Tape, Tensor,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub rollout_length: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub lr: f64,
    /// Ceiling on the global gradient norm of each minibatch step. On this
    /// task the bound is what keeps one bad early rollout — an episode
    /// camped in the far half of the frame, paying near-worst shaping every
    /// step — from swinging the policy hard enough that it stops visiting
    /// the target region altogether before the first goal is ever sampled.
    pub max_grad_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            epochs: 4,
            minibatch_size: 128,
            rollout_length: 1024,
            entropy_coef: 0.01,
            value_coef: 0.5,
            lr: 3e-4,
            max_grad_norm: 0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let fail = |msg: String| Err(AgentError::InvalidConfig(msg));
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("gamma must be in [0, 1), got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return fail(format!("gae_lambda must be in [0, 1], got {}", self.gae_lambda));
        }
        if self.clip_epsilon <= 0.0 || !self.clip_epsilon.is_finite() {
            return fail(format!("clip_epsilon must be positive, got {}", self.clip_epsilon));
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.rollout_length == 0 || self.minibatch_size == 0 {
            return fail("rollout_length and minibatch_size must be positive".into());
        }
        if self.minibatch_size > self.rollout_length {
            return fail(format!(
                "minibatch_size {} exceeds rollout_length {}",
                self.minibatch_size, self.rollout_length
            ));
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return fail(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.entropy_coef < 0.0 || self.value_coef < 0.0 {
            return fail("entropy_coef and value_coef must be non-negative".into());
        }
        if self.max_grad_norm <= 0.0 || !self.max_grad_norm.is_finite() {
            return fail(format!(
                "max_grad_norm must be positive and finite, got {}",
                self.max_grad_norm
            ));
        }
        Ok(())
    }
}

/// Clipped per-sample surrogate: `min(ratio·A, clip(ratio, 1−ε, 1+ε)·A)`.
/// This is the maximized quantity; the update negates its mean.
pub fn ppo_clip_loss(ratio: f64, advantage: f64, clip_epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Rescale all parameter gradients in place so their joint L2 norm does not
/// exceed `max_norm`; gradients already inside the ball are untouched.
/// Returns the pre-clip global norm.
fn clip_gradient_norm(grads: &mut [Option<Vec<f64>>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flatten()
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut().flatten() {
            for x in g.iter_mut() {
                *x *= scale;
            }
        }
    }
    norm
}

/// Scalar training statistics, averaged over all minibatch steps of one
/// update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoStats {
    /// Mean negated clipped surrogate.
    pub policy_loss: f64,
    /// Mean value-head MSE against GAE returns.
    pub value_loss: f64,
    /// Mean policy entropy (nats).
    pub entropy: f64,
    /// Mean total optimized loss.
    pub total_loss: f64,
    /// Number of gradient steps taken.
    pub gradient_steps: usize,
}

/// One minibatch of frozen collection-time quantities.
struct MinibatchView<'a> {
    obs: Vec<&'a EncodedObs>,
    actions: Vec<usize>,
    old_log_probs: Vec<f64>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
}

impl<'a> MinibatchView<'a> {
    fn gather(
        steps: &'a [RolloutStep],
        advantages: &[f64],
        returns: &[f64],
        indices: &[usize],
    ) -> Self {
        MinibatchView {
            obs: indices.iter().map(|&i| &steps[i].obs).collect(),
            actions: indices.iter().map(|&i| steps[i].action).collect(),
            old_log_probs: indices.iter().map(|&i| steps[i].log_prob).collect(),
            advantages: indices.iter().map(|&i| advantages[i]).collect(),
            returns: indices.iter().map(|&i| returns[i]).collect(),
        }
    }
}

/// Tape nodes of interest from one recorded minibatch loss.
struct LossNodes {
    /// Read only by tests that inspect the per-sample ratios.
    #[cfg_attr(not(test), allow(dead_code))]
    ratio: NodeId,
    surrogate: NodeId,
    value_loss: NodeId,
    entropy: NodeId,
    loss: NodeId,
}

/// Record the full PPO minibatch loss on `tape`:
/// `−mean(surrogate) + value_coef·MSE(V, G) − entropy_coef·H(π)`.
fn minibatch_loss(
    tape: &mut Tape,
    params: &NetworkParams,
    view: &MinibatchView,
    cfg: &PpoConfig,
) -> Result<(ForwardPass, LossNodes), AgentError> {
    let inputs = stack_obs(&view.obs);
    let pass = forward(tape, params, &inputs)?;

    let log_probs = tape.log_softmax(pass.head("policy"));
    let new_lp = tape.gather_col(log_probs, &view.actions);
    let old_lp = tape.constant(Tensor::vector(view.old_log_probs.clone()));
    let lp_diff = tape.sub(new_lp, old_lp);
    let ratio = tape.exp(lp_diff);

    let adv = tape.constant(Tensor::vector(view.advantages.clone()));
    let unclipped = tape.mul(ratio, adv);
    let clipped_ratio = tape.clamp(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
    let clipped = tape.mul(clipped_ratio, adv);
    let per_sample = tape.min_elem(unclipped, clipped);
    let surrogate = tape.mean(per_sample);

    let batch = view.obs.len();
    let value_col = pass.head("value");
    let value = tape.reshape(value_col, vec![batch]);
    let target = tape.constant(Tensor::vector(view.returns.clone()));
    let vdiff = tape.sub(value, target);
    let vsq = tape.mul(vdiff, vdiff);
    let value_loss = tape.mean(vsq);

    let probs = tape.exp(log_probs);
    let p_log_p = tape.mul(probs, log_probs);
    let neg_ent_rows = tape.row_sum(p_log_p);
    let neg_ent = tape.mean(neg_ent_rows);
    let entropy = tape.neg(neg_ent);

    let neg_surr = tape.neg(surrogate);
    let weighted_value = tape.scale(value_loss, cfg.value_coef);
    let weighted_entropy = tape.scale(entropy, -cfg.entropy_coef);
    let partial = tape.add(neg_surr, weighted_value);
    let loss = tape.add(partial, weighted_entropy);

    Ok((
        pass,
        LossNodes {
            ratio,
            surrogate,
            value_loss,
            entropy,
            loss,
        },
    ))
}

/// One full PPO update: GAE over the rollout, advantage normalization, then
/// `epochs` passes of shuffled minibatch Adam steps. Collection-time
/// log-probs stay frozen throughout. The rollout itself is left intact;
/// callers clear it after a successful update.
pub fn ppo_update<R: Rng + ?Sized>(
    params: &mut NetworkParams,
    rollout: &RolloutBuffer,
    cfg: &PpoConfig,
    adam: &mut AdamState,
    rng: &mut R,
) -> Result<PpoStats, AgentError> {
    if rollout.len() != cfg.rollout_length {
        return Err(AgentError::RolloutLength {
            have: rollout.len(),
            expected: cfg.rollout_length,
        });
    }
    let (mut advantages, returns) = compute_gae(rollout, cfg.gamma, cfg.gae_lambda)?;
    normalize_advantages(&mut advantages);

    let steps = rollout.steps();
    let mut indices: Vec<usize> = (0..steps.len()).collect();
    let mut sums = (0.0, 0.0, 0.0, 0.0);
    let mut gradient_steps = 0usize;
    for _ in 0..cfg.epochs {
        indices.shuffle(rng);
        for chunk in indices.chunks(cfg.minibatch_size) {
            let view = MinibatchView::gather(steps, &advantages, &returns, chunk);
            let mut tape = Tape::new();
            let (pass, nodes) = minibatch_loss(&mut tape, params, &view, cfg)?;
            sums.0 += -tape.value(nodes.surrogate).item();
            sums.1 += tape.value(nodes.value_loss).item();
            sums.2 += tape.value(nodes.entropy).item();
            sums.3 += tape.value(nodes.loss).item();
            let grads = tape.backward(nodes.loss)?;
            let mut grad_vecs: Vec<Option<Vec<f64>>> = pass
                .param_nodes
                .iter()
                .map(|&id| grads.get(id).map(|g| g.to_vec()))
                .collect();
            clip_gradient_norm(&mut grad_vecs, cfg.max_grad_norm);
            let grad_slices: Vec<Option<&[f64]>> =
                grad_vecs.iter().map(|g| g.as_deref()).collect();
            adam_step(params, &grad_slices, adam);
            gradient_steps += 1;
        }
    }
    let n = gradient_steps as f64;
    Ok(PpoStats {
        policy_loss: sums.0 / n,
        value_loss: sums.1 / n,
        entropy: sums.2 / n,
        total_loss: sums.3 / n,
        gradient_steps,
    })
}

/// Actor-critic outputs for one observation.
fn policy_value_of(params: &NetworkParams, obs: &EncodedObs) -> (Vec<f64>, f64) {
    let outputs = infer(params, &obs.to_input()).expect("actor-critic forward failed");
    let mut logits = None;
    let mut value = None;
    for (name, t) in outputs {
        match name.as_str() {
            "policy" => logits = Some(t.values().to_vec()),
            "value" => value = Some(t.values()[0]),
            _ => {}
        }
    }
    let logits = logits.expect("actor-critic must expose a \"policy\" head");
    let value = value.expect("actor-critic must expose a \"value\" head");
    // Stable log-softmax.
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
    (logits.iter().map(|&x| x - log_sum).collect(), value)
}

/// Complete PPO learner: owns the network, optimizer state, and the
/// in-progress rollout.
#[derive(Debug)]
pub struct PpoAgent {
    cfg: PpoConfig,
    params: NetworkParams,
    adam: AdamState,
    rollout: RolloutBuffer,
}

impl PpoAgent {
    pub fn new(arch: &Architecture, cfg: PpoConfig, seed: u64) -> Result<Self, AgentError> {
        cfg.validate()?;
        let params = init_params(arch, seed)?;
        let adam = AdamState::new(AdamConfig::with_lr(cfg.lr), &params);
        Ok(PpoAgent {
            cfg,
            params,
            adam,
            rollout: RolloutBuffer::new(),
        })
    }

    /// Resume from saved parameters.
    pub fn from_params(params: NetworkParams, cfg: PpoConfig) -> Result<Self, AgentError> {
        cfg.validate()?;
        let adam = AdamState::new(AdamConfig::with_lr(cfg.lr), &params);
        Ok(PpoAgent {
            cfg,
            params,
            adam,
            rollout: RolloutBuffer::new(),
        })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn config(&self) -> &PpoConfig {
        &self.cfg
    }

    /// Log-probabilities over actions and the state value.
    pub fn policy_value(&self, obs: &EncodedObs) -> (Vec<f64>, f64) {
        policy_value_of(&self.params, obs)
    }

    /// Sample an action from the current policy; returns
    /// `(action, log_prob, value)` for rollout bookkeeping.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        obs: &EncodedObs,
        rng: &mut R,
    ) -> (usize, f64, f64) {
        let (log_probs, value) = self.policy_value(obs);
        let u: f64 = rng.random();
        let mut cumulative = 0.0;
        let mut action = log_probs.len() - 1;
        for (i, lp) in log_probs.iter().enumerate() {
            cumulative += lp.exp();
            if u < cumulative {
                action = i;
                break;
            }
        }
        (action, log_probs[action], value)
    }

    /// Evaluation action: policy mode (ties to the lowest index).
    pub fn greedy_action(&self, obs: &EncodedObs) -> usize {
        let (log_probs, _) = self.policy_value(obs);
        let mut best = 0;
        for (i, &lp) in log_probs.iter().enumerate().skip(1) {
            if lp > log_probs[best] {
                best = i;
            }
        }
        best
    }

    /// Append one collected step.
    pub fn record(&mut self, step: RolloutStep) {
        self.rollout.push(step);
    }

    /// True once the rollout has reached its configured length.
    pub fn rollout_full(&self) -> bool {
        self.rollout.len() >= self.cfg.rollout_length
    }

    pub fn rollout_len(&self) -> usize {
        self.rollout.len()
    }

    /// Run the PPO update on the completed rollout, then clear it.
    pub fn update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<PpoStats, AgentError> {
        let stats = ppo_update(&mut self.params, &self.rollout, &self.cfg, &mut self.adam, rng)?;
        self.rollout.clear();
        Ok(stats)
    }
}
