//! Run configuration: a flat `key = value` text format with dotted key
//! names, overridable from the command line via `--set key=value`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::agents::{DqnConfig, PpoConfig, TargetUpdate};
use crate::env::{EnvConfig, EnvVariant, ObservationMode};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: cannot parse `{value}` as {expected}")]
    InvalidValue {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("--set argument `{0}` must be KEY=VALUE")]
    BadSetArg(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Dqn,
    Ppo,
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::Dqn => "dqn",
            AgentKind::Ppo => "ppo",
        })
    }
}

/// Fully resolved run parameters for `train`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub agent: AgentKind,
    pub env: EnvConfig,
    pub dqn: DqnConfig,
    pub ppo: PpoConfig,
    pub total_steps: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_sources(None, &[]).expect("default config must be valid")
    }
}

/// Split config file text into ordered `(key, value)` pairs. Blank lines and
/// `#` comments are skipped; later assignments override earlier ones.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Malformed {
                line: i + 1,
                text: line.to_string(),
            });
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Parse one `--set KEY=VALUE` argument.
pub fn parse_set_arg(arg: &str) -> Result<(String, String), ConfigError> {
    let Some((key, value)) = arg.split_once('=') else {
        return Err(ConfigError::BadSetArg(arg.to_string()));
    };
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::BadSetArg(arg.to_string()));
    }
    Ok((key.to_string(), value.trim().to_string()))
}

fn parse<T: FromStr>(key: &str, value: &str, expected: &'static str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    })
}

fn parse_switch(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
            expected: "on/off",
        }),
    }
}

fn parse_target_sync(key: &str, value: &str) -> Result<TargetUpdate, ConfigError> {
    let invalid = || ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        expected: "hard:<steps> or polyak:<rate>",
    };
    let (kind, arg) = value.split_once(':').ok_or_else(invalid)?;
    match kind.trim() {
        "hard" => Ok(TargetUpdate::HardCopy {
            every_steps: arg.trim().parse().map_err(|_| invalid())?,
        }),
        "polyak" => Ok(TargetUpdate::Polyak {
            rate: arg.trim().parse().map_err(|_| invalid())?,
        }),
        _ => Err(invalid()),
    }
}

struct Builder {
    agent: AgentKind,
    env: EnvConfig,
    dqn: DqnConfig,
    ppo: PpoConfig,
    total_steps: Option<usize>,
    trials: usize,
    base_seed: u64,
    output_dir: Option<PathBuf>,
    clutter: Option<bool>,
}

impl Default for Builder {
    fn default() -> Self {
        Builder {
            agent: AgentKind::Ppo,
            env: EnvConfig::default(),
            dqn: DqnConfig::default(),
            ppo: PpoConfig::default(),
            total_steps: None,
            trials: 3,
            base_seed: 0,
            output_dir: None,
            clutter: None,
        }
    }
}

impl Builder {
    fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "agent" => {
                self.agent = match value {
                    "dqn" => AgentKind::Dqn,
                    "ppo" => AgentKind::Ppo,
                    _ => {
                        return Err(ConfigError::InvalidValue {
                            key: key.into(),
                            value: value.into(),
                            expected: "dqn or ppo",
                        })
                    }
                }
            }
            "total_steps" => self.total_steps = Some(parse(key, value, "a step count")?),
            "trials" => self.trials = parse(key, value, "a trial count")?,
            "base_seed" => self.base_seed = parse(key, value, "an integer seed")?,
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),

            "env.variant" => {
                self.env.variant = match value {
                    "static_reacher" => EnvVariant::StaticReacher,
                    "reacher" => EnvVariant::Reacher,
                    "tracker" => EnvVariant::Tracker,
                    _ => {
                        return Err(ConfigError::InvalidValue {
                            key: key.into(),
                            value: value.into(),
                            expected: "static_reacher, reacher, or tracker",
                        })
                    }
                }
            }
            "env.observation" => {
                self.env.observation_mode = match value {
                    "features" => ObservationMode::Features,
                    "image" => ObservationMode::Image,
                    _ => {
                        return Err(ConfigError::InvalidValue {
                            key: key.into(),
                            value: value.into(),
                            expected: "features or image",
                        })
                    }
                }
            }
            "env.max_episode_steps" => {
                self.env.max_episode_steps = parse(key, value, "a step count")?
            }
            "env.target_radius_px" => {
                self.env.target_radius_px = parse(key, value, "a pixel radius")?
            }
            "env.reset_margin_px" => self.env.reset_margin_px = parse(key, value, "a pixel margin")?,
            "env.noise_std" => self.env.scene.noise_std = parse(key, value, "a number")?,
            "env.lighting_min" => {
                self.env.scene.lighting_scale_range.0 = parse(key, value, "a number")?
            }
            "env.lighting_max" => {
                self.env.scene.lighting_scale_range.1 = parse(key, value, "a number")?
            }
            "env.clutter" => self.clutter = Some(parse_switch(key, value)?),

            "dqn.gamma" => self.dqn.gamma = parse(key, value, "a number")?,
            "dqn.lr" => self.dqn.lr = parse(key, value, "a number")?,
            "dqn.batch_size" => self.dqn.batch_size = parse(key, value, "a count")?,
            "dqn.replay_capacity" => self.dqn.replay_capacity = parse(key, value, "a count")?,
            "dqn.epsilon_start" => self.dqn.epsilon_start = parse(key, value, "a number")?,
            "dqn.epsilon_end" => self.dqn.epsilon_end = parse(key, value, "a number")?,
            "dqn.epsilon_decay_steps" => {
                self.dqn.epsilon_decay_steps = parse(key, value, "a step count")?
            }
            "dqn.train_start" => self.dqn.train_start = parse(key, value, "a step count")?,
            "dqn.update_every" => self.dqn.update_every = parse(key, value, "a step count")?,
            "dqn.target_sync" => self.dqn.target_update = parse_target_sync(key, value)?,

            "ppo.gamma" => self.ppo.gamma = parse(key, value, "a number")?,
            "ppo.gae_lambda" => self.ppo.gae_lambda = parse(key, value, "a number")?,
            "ppo.clip_epsilon" => self.ppo.clip_epsilon = parse(key, value, "a number")?,
            "ppo.epochs" => self.ppo.epochs = parse(key, value, "a count")?,
            "ppo.minibatch_size" => self.ppo.minibatch_size = parse(key, value, "a count")?,
            "ppo.rollout_length" => self.ppo.rollout_length = parse(key, value, "a count")?,
            "ppo.entropy_coef" => self.ppo.entropy_coef = parse(key, value, "a number")?,
            "ppo.value_coef" => self.ppo.value_coef = parse(key, value, "a number")?,
            "ppo.lr" => self.ppo.lr = parse(key, value, "a number")?,
            "ppo.max_grad_norm" => self.ppo.max_grad_norm = parse(key, value, "a number")?,

            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    fn finish(mut self) -> Result<RunConfig, ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::Invalid("trials must be at least 1".into()));
        }
        let total_steps = self.total_steps.unwrap_or(match self.agent {
            AgentKind::Dqn => 60_000,
            AgentKind::Ppo => 40_000,
        });
        if total_steps == 0 {
            return Err(ConfigError::Invalid("total_steps must be positive".into()));
        }
        if let Some(false) = self.clutter {
            self.env.scene.clutter.clear();
        }
        let (lo, hi) = self.env.scene.lighting_scale_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "lighting range must satisfy 0 < min ≤ max ≤ 1, got [{lo}, {hi}]"
            )));
        }
        self.env
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.dqn
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.ppo
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let output_dir = self
            .output_dir
            .unwrap_or_else(|| PathBuf::from("runs").join(self.agent.to_string()));
        Ok(RunConfig {
            agent: self.agent,
            env: self.env,
            dqn: self.dqn,
            ppo: self.ppo,
            total_steps,
            trials: self.trials,
            base_seed: self.base_seed,
            output_dir,
        })
    }
}

impl RunConfig {
    /// Build a run config from optional file text plus `--set` overrides,
    /// applied in that order (later assignments win).
    pub fn from_sources(file_text: Option<&str>, sets: &[String]) -> Result<RunConfig, ConfigError> {
        let mut pairs = Vec::new();
        if let Some(text) = file_text {
            pairs.extend(parse_config_text(text)?);
        }
        for set in sets {
            pairs.push(parse_set_arg(set)?);
        }
        let mut builder = Builder::default();
        for (key, value) in &pairs {
            builder.apply(key, value)?;
        }
        builder.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_text_parses_with_comments_and_blanks() {
        let text = "# run setup\n\nagent = dqn\n  total_steps =  500 \nenv.variant = tracker\n";
        let pairs = parse_config_text(text).unwrap();
        assert_eq!(
            pairs,
            vec![
                ("agent".into(), "dqn".into()),
                ("total_steps".into(), "500".into()),
                ("env.variant".into(), "tracker".into()),
            ]
        );
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let text = "agent = ppo\nnot a pair\n";
        match parse_config_text(text) {
            Err(ConfigError::Malformed { line: 2, .. }) => {}
            other => panic!("expected Malformed at line 2, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_sources(Some("env.vraiant = tracker"), &[]).unwrap_err();
        match err {
            ConfigError::UnknownKey(k) => assert_eq!(k, "env.vraiant"),
            other => panic!("expected UnknownKey, got {other:?}"),
        }
    }

    #[test]
    fn bad_value_names_key_and_value() {
        let err = RunConfig::from_sources(Some("dqn.lr = fast"), &[]).unwrap_err();
        match err {
            ConfigError::InvalidValue { key, value, .. } => {
                assert_eq!(key, "dqn.lr");
                assert_eq!(value, "fast");
            }
            other => panic!("expected InvalidValue, got {other:?}"),
        }
    }

    #[test]
    fn set_overrides_file_values() {
        let cfg = RunConfig::from_sources(
            Some("agent = ppo\ntotal_steps = 100"),
            &["total_steps=7".to_string()],
        )
        .unwrap();
        assert_eq!(cfg.total_steps, 7);
    }

    #[test]
    fn duplicate_keys_last_wins() {
        let cfg =
            RunConfig::from_sources(Some("base_seed = 1\nbase_seed = 9"), &[]).unwrap();
        assert_eq!(cfg.base_seed, 9);
    }

    #[test]
    fn total_steps_defaults_depend_on_agent() {
        let ppo = RunConfig::from_sources(Some("agent = ppo"), &[]).unwrap();
        assert_eq!(ppo.total_steps, 40_000);
        assert_eq!(ppo.output_dir, PathBuf::from("runs/ppo"));
        let dqn = RunConfig::from_sources(Some("agent = dqn"), &[]).unwrap();
        assert_eq!(dqn.total_steps, 60_000);
        assert_eq!(dqn.output_dir, PathBuf::from("runs/dqn"));
    }

    #[test]
    fn zero_total_steps_and_zero_trials_are_rejected() {
        assert!(matches!(
            RunConfig::from_sources(Some("total_steps = 0"), &[]),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            RunConfig::from_sources(Some("trials = 0"), &[]),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn env_and_agent_keys_reach_their_fields() {
        let text = "env.variant = tracker\nenv.observation = image\nenv.noise_std = 2.5\n\
                    env.clutter = off\ndqn.target_sync = polyak:0.01\nppo.rollout_length = 256\n\
                    ppo.minibatch_size = 64\nppo.max_grad_norm = 2.0";
        let cfg = RunConfig::from_sources(Some(text), &[]).unwrap();
        assert_eq!(cfg.env.variant, EnvVariant::Tracker);
        assert_eq!(cfg.env.observation_mode, ObservationMode::Image);
        assert_eq!(cfg.env.scene.noise_std, 2.5);
        assert!(cfg.env.scene.clutter.is_empty());
        assert_eq!(cfg.dqn.target_update, TargetUpdate::Polyak { rate: 0.01 });
        assert_eq!(cfg.ppo.rollout_length, 256);
        assert_eq!(cfg.ppo.max_grad_norm, 2.0);
    }

    #[test]
    fn hard_sync_parses_and_garbage_does_not() {
        let cfg = RunConfig::from_sources(Some("dqn.target_sync = hard:500"), &[]).unwrap();
        assert_eq!(
            cfg.dqn.target_update,
            TargetUpdate::HardCopy { every_steps: 500 }
        );
        assert!(RunConfig::from_sources(Some("dqn.target_sync = sometimes"), &[]).is_err());
    }

    #[test]
    fn semantic_validation_runs_on_the_assembled_config() {
        // Valid syntax, invalid semantics: gamma out of range.
        assert!(matches!(
            RunConfig::from_sources(Some("ppo.gamma = 1.5"), &[]),
            Err(ConfigError::Invalid(_))
        ));
        // Lighting range inverted.
        assert!(matches!(
            RunConfig::from_sources(Some("env.lighting_min = 0.9\nenv.lighting_max = 0.5"), &[]),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn bad_set_argument_is_rejected() {
        assert!(matches!(
            RunConfig::from_sources(None, &["total_steps".to_string()]),
            Err(ConfigError::BadSetArg(_))
        ));
    }
}
