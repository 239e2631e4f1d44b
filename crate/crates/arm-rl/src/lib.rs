//! Desk-scale workbench for vision-based reacher/tracker tasks on a
//! simulated 6-DOF arm.
//!
//! A kinematic arm model plus a pinhole-camera renderer stand in for the
//! physical robot and monitor. The reward is extracted from the rendered
//! observation by a colour-masking + Hough-circle pipeline, and DQN / PPO
//! agents built on a small tape-based autodiff core are trained and
//! compared through the `arm-rl` CLI.

pub mod agents;
pub mod env;
pub mod harness;
pub mod kinematics;
pub mod nn;
pub mod scene;
pub mod vision;
