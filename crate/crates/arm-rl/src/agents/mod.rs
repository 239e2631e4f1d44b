//! The two learners — DQN and PPO — plus their storage (replay buffer,
//! rollout buffer) and shared observation encoding.

mod dqn;
mod ppo;
mod replay;
mod rollout;

pub use dqn::{
    dqn_update, epsilon_at, select_action_dqn, sync_target, td_targets, td_targets_from, DqnAgent,
    DqnConfig, TargetUpdate,
};
pub use ppo::{ppo_clip_loss, ppo_update, PpoAgent, PpoConfig, PpoStats};
pub use replay::ReplayBuffer;
pub use rollout::{compute_gae, normalize_advantages, RolloutBuffer, RolloutStep};

use crate::env::Observation;
use crate::nn::{NnError, Tensor};
use crate::vision::Image;

/// Errors surfaced by agent updates.
#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("replay buffer holds {have} transitions, update needs {need}")]
    InsufficientBuffer { have: usize, need: usize },
    #[error("rollout holds {have} steps, config expects {expected}")]
    RolloutLength { have: usize, expected: usize },
    #[error("rollout is empty")]
    EmptyRollout,
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Net(#[from] NnError),
}

/// Observation as stored by the learners: feature vectors verbatim, images
/// box-averaged 5× to 80×60 and quantized to bytes (the classic frame-buffer
/// trick — a 20k-transition image replay would not fit in memory as f64).
#[derive(Debug, Clone, PartialEq)]
pub enum EncodedObs {
    Features(Box<[f64]>),
    Image(Box<[u8]>),
}

/// Downsampled image planes: channels-first 3×60×80.
pub const IMAGE_OBS_SHAPE: [usize; 3] = [3, 60, 80];
const IMAGE_OBS_LEN: usize = IMAGE_OBS_SHAPE[0] * IMAGE_OBS_SHAPE[1] * IMAGE_OBS_SHAPE[2];
const DOWNSAMPLE: usize = 5;

/// Box-average a 400×300 frame down to 80×60, channels-first, rounded to u8.
pub fn downsample_image(img: &Image) -> Box<[u8]> {
    let (h, w) = (IMAGE_OBS_SHAPE[1], IMAGE_OBS_SHAPE[2]);
    assert_eq!(img.width(), w * DOWNSAMPLE, "unexpected frame width");
    assert_eq!(img.height(), h * DOWNSAMPLE, "unexpected frame height");
    let mut out = vec![0u8; IMAGE_OBS_LEN];
    let cells = (DOWNSAMPLE * DOWNSAMPLE) as f64;
    for y in 0..h {
        for x in 0..w {
            let mut sums = [0.0f64; 3];
            for dy in 0..DOWNSAMPLE {
                for dx in 0..DOWNSAMPLE {
                    let px = img.get(x * DOWNSAMPLE + dx, y * DOWNSAMPLE + dy);
                    for c in 0..3 {
                        sums[c] += f64::from(px[c]);
                    }
                }
            }
            for c in 0..3 {
                out[(c * h + y) * w + x] = (sums[c] / cells).round() as u8;
            }
        }
    }
    out.into_boxed_slice()
}

/// Encode an environment observation for storage and network input.
pub fn encode_obs(obs: &Observation) -> EncodedObs {
    match obs {
        Observation::Features(v) => EncodedObs::Features(v.clone().into_boxed_slice()),
        Observation::Image(img) => EncodedObs::Image(downsample_image(img)),
    }
}

impl EncodedObs {
    /// Network input values: features verbatim, image bytes scaled to [0, 1].
    fn decoded_len(&self) -> usize {
        match self {
            EncodedObs::Features(v) => v.len(),
            EncodedObs::Image(v) => v.len(),
        }
    }

    fn write_decoded(&self, out: &mut Vec<f64>) {
        match self {
            EncodedObs::Features(v) => out.extend_from_slice(v),
            EncodedObs::Image(v) => out.extend(v.iter().map(|&b| f64::from(b) / 255.0)),
        }
    }

    /// Single-observation network input `[1, ...]`.
    pub fn to_input(&self) -> Tensor {
        stack_obs(std::slice::from_ref(self))
    }
}

/// Stack observations into one batched network input tensor. All entries
/// must share a representation.
pub fn stack_obs<O: std::borrow::Borrow<EncodedObs>>(batch: &[O]) -> Tensor {
    assert!(!batch.is_empty(), "cannot stack an empty batch");
    let first = batch[0].borrow();
    let mut values = Vec::with_capacity(batch.len() * first.decoded_len());
    for obs in batch {
        let obs = obs.borrow();
        assert_eq!(
            std::mem::discriminant(first),
            std::mem::discriminant(obs),
            "mixed observation kinds in one batch"
        );
        obs.write_decoded(&mut values);
    }
    let shape = match first {
        EncodedObs::Features(v) => vec![batch.len(), v.len()],
        EncodedObs::Image(_) => vec![
            batch.len(),
            IMAGE_OBS_SHAPE[0],
            IMAGE_OBS_SHAPE[1],
            IMAGE_OBS_SHAPE[2],
        ],
    };
    Tensor::new(shape, values)
}

/// One stored interaction.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: EncodedObs,
    pub action: usize,
    pub reward: f64,
    pub next_obs: EncodedObs,
    pub terminated: bool,
    pub truncated: bool,
}
