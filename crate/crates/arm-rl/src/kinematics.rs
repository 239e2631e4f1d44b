//! Forward kinematics of a 6-DOF serial arm, the discrete joint action
//! space, and Cartesian workspace safety validation.
//!
//! The arm is fully table-driven: a [`DhTable`] holds the per-joint chain
//! constants and everything else is derived from it. All functions here are
//! pure and safe to call from any number of threads.

use nalgebra::{Matrix3, Vector3};
use std::f64::consts::PI;
use thiserror::Error;

/// Number of joints in the serial chain.
pub const JOINT_COUNT: usize = 6;

/// Number of discrete actions: 5 actuated joints x 2 directions.
/// The last wrist only spins the camera about its optical axis, so it is
/// excluded from the action space.
pub const ACTION_COUNT: usize = 10;

/// Per-joint rotation magnitude in radians, indexed by actuated joint
/// (base, shoulder, elbow, wrist 1, wrist 2).
pub const JOINT_STEP_SIZES: [f64; 5] = [0.025, 0.02, 0.02, 0.015, 0.015];

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    #[error("action index {0} out of range 0..{count}", count = ACTION_COUNT)]
    InvalidAction(usize),
    #[error("DH table entry {index} has non-finite value")]
    NonFiniteDhEntry { index: usize },
}

/// One row of the kinematic chain table: link length `a`, link offset `d`,
/// twist `alpha` and a constant joint-angle offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhRow {
    pub link_length: f64,
    pub link_offset: f64,
    pub twist: f64,
    pub theta_offset: f64,
}

impl DhRow {
    pub const fn new(link_length: f64, link_offset: f64, twist: f64, theta_offset: f64) -> Self {
        Self {
            link_length,
            link_offset,
            twist,
            theta_offset,
        }
    }

    const ZERO: DhRow = DhRow::new(0.0, 0.0, 0.0, 0.0);

    fn is_finite(&self) -> bool {
        self.link_length.is_finite()
            && self.link_offset.is_finite()
            && self.twist.is_finite()
            && self.theta_offset.is_finite()
    }
}

/// Chain parameters for the whole arm; always exactly [`JOINT_COUNT`] rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DhTable {
    rows: [DhRow; JOINT_COUNT],
}

impl DhTable {
    pub fn new(rows: [DhRow; JOINT_COUNT]) -> Result<Self, KinematicsError> {
        for (index, row) in rows.iter().enumerate() {
            if !row.is_finite() {
                return Err(KinematicsError::NonFiniteDhEntry { index });
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[DhRow; JOINT_COUNT] {
        &self.rows
    }

    /// Preset approximating a UR10e-class arm (meters / radians).
    pub fn ur10e_class() -> Self {
        const HALF_PI: f64 = PI / 2.0;
        Self {
            rows: [
                DhRow::new(0.0, 0.1807, HALF_PI, 0.0),
                DhRow::new(-0.6127, 0.0, 0.0, 0.0),
                DhRow::new(-0.5716, 0.0, 0.0, 0.0),
                DhRow::new(0.0, 0.17415, HALF_PI, 0.0),
                DhRow::new(0.0, 0.11985, -HALF_PI, 0.0),
                DhRow::new(0.0, 0.11655, 0.0, 0.0),
            ],
        }
    }

    /// Planar test chain: the first `lengths.len()` joints rotate about z
    /// with the given link lengths, remaining rows are zero. Handy for
    /// analytically tractable checks.
    pub fn planar(lengths: &[f64]) -> Self {
        assert!(lengths.len() <= JOINT_COUNT);
        let mut rows = [DhRow::ZERO; JOINT_COUNT];
        for (row, &len) in rows.iter_mut().zip(lengths) {
            *row = DhRow::new(len, 0.0, 0.0, 0.0);
        }
        Self { rows }
    }
}

/// Joint angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub angles: [f64; JOINT_COUNT],
}

impl JointState {
    pub const fn new(angles: [f64; JOINT_COUNT]) -> Self {
        Self { angles }
    }

    pub const fn zero() -> Self {
        Self::new([0.0; JOINT_COUNT])
    }
}

/// Rigid transform of the end-effector (or any frame) relative to the base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            rotation: Matrix3::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, rotation: Matrix3<f64>) -> Self {
        Self { position, rotation }
    }

    /// `self` then `other` expressed in `self`'s frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.position + self.rotation * other.position,
            rotation: self.rotation * other.rotation,
        }
    }

    /// Map a point from this frame into the parent frame.
    pub fn transform_point(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.rotation * local
    }

    /// Map a point from the parent frame into this frame.
    pub fn inverse_transform_point(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (world - self.position)
    }

    /// Max deviation of R * R^T from the identity plus |det - 1|.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.rotation * self.rotation.transpose();
        let mut err: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                err = err.max((gram[(i, j)] - expect).abs());
            }
        }
        err.max((self.rotation.determinant() - 1.0).abs())
    }
}

/// Axis-aligned Cartesian box the end-effector must stay inside.
/// The box is closed: positions exactly on a face are valid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkspaceLimits {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl WorkspaceLimits {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        assert!(
            min.x < max.x && min.y < max.y && min.z < max.z,
            "workspace min must be componentwise below max"
        );
        Self { min, max }
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }
}

/// Allowed joint angle range, identical for every joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    pub min: f64,
    pub max: f64,
}

impl Default for JointLimits {
    fn default() -> Self {
        Self {
            min: -2.0 * PI,
            max: 2.0 * PI,
        }
    }
}

impl JointLimits {
    pub fn contains(&self, q: &JointState) -> bool {
        q.angles.iter().all(|&a| a >= self.min && a <= self.max)
    }
}

/// One of the 10 discrete joint moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscreteAction {
    index: usize,
}

impl DiscreteAction {
    pub fn new(index: usize) -> Result<Self, KinematicsError> {
        if index >= ACTION_COUNT {
            return Err(KinematicsError::InvalidAction(index));
        }
        Ok(Self { index })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Actuated joint (0..=4), direction (+1 / -1) and magnitude in radians.
    pub fn decode(&self) -> (usize, f64, f64) {
        let joint = self.index / 2;
        let direction = if self.index % 2 == 0 { 1.0 } else { -1.0 };
        (joint, direction, JOINT_STEP_SIZES[joint])
    }
}

/// Decode an action index into (joint, direction, magnitude).
/// Index `2k` moves joint `k` in the positive direction, `2k + 1` negative.
pub fn decode_action(index: usize) -> Result<(usize, f64, f64), KinematicsError> {
    DiscreteAction::new(index).map(|a| a.decode())
}

/// Apply a discrete action: exactly one joint angle changes, all other
/// angles are returned bit-identical.
pub fn apply_action(q: &JointState, action: DiscreteAction) -> JointState {
    let (joint, direction, magnitude) = action.decode();
    let mut angles = q.angles;
    angles[joint] += direction * magnitude;
    JointState::new(angles)
}

/// End-effector pose from chained per-joint transforms.
///
/// Each joint contributes Rz(theta) * Tz(d) * Tx(a) * Rx(alpha) with
/// theta = q_i + theta_offset_i; the rotation and translation are
/// accumulated incrementally rather than as explicit 4x4 products.
pub fn forward_kinematics(dh: &DhTable, q: &JointState) -> Pose {
    let mut rotation = Matrix3::identity();
    let mut position = Vector3::zeros();
    for (row, &angle) in dh.rows.iter().zip(q.angles.iter()) {
        let theta = angle + row.theta_offset;
        let (st, ct) = theta.sin_cos();
        let (sa, ca) = row.twist.sin_cos();
        let a = row.link_length;
        let d = row.link_offset;
        let joint_rotation = Matrix3::new(
            ct,
            -st * ca,
            st * sa,
            st,
            ct * ca,
            -ct * sa,
            0.0,
            sa,
            ca,
        );
        let joint_translation = Vector3::new(a * ct, a * st, d);
        position += rotation * joint_translation;
        rotation *= joint_rotation;
    }
    Pose { position, rotation }
}

/// Outcome of the pre-move safety check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveValidity {
    Valid,
    Blocked,
}

/// Check a candidate joint state against the Cartesian box and joint range.
///
/// Only the single candidate end pose is checked, not the swept path.
/// Positions exactly on a box face count as inside.
pub fn validate_move(
    dh: &DhTable,
    workspace: &WorkspaceLimits,
    joint_limits: &JointLimits,
    q_candidate: &JointState,
) -> MoveValidity {
    if !joint_limits.contains(q_candidate) {
        return MoveValidity::Blocked;
    }
    let pose = forward_kinematics(dh, q_candidate);
    if workspace.contains(&pose.position) {
        MoveValidity::Valid
    } else {
        MoveValidity::Blocked
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: build each joint transform as an explicit
    /// homogeneous 4x4 matrix and multiply them out.
    fn fk_matrix_oracle(dh: &DhTable, q: &JointState) -> Pose {
        let mut total = Matrix4::<f64>::identity();
        for (row, &angle) in dh.rows().iter().zip(q.angles.iter()) {
            let theta = angle + row.theta_offset;
            let rot_z = Matrix4::new(
                theta.cos(),
                -theta.sin(),
                0.0,
                0.0,
                theta.sin(),
                theta.cos(),
                0.0,
                0.0,
                0.0,
                0.0,
                1.0,
                0.0,
                0.0,
                0.0,
                0.0,
                1.0,
            );
            let trans_z = Matrix4::new(
                1.0,
                0.0,
                0.0,
                0.0,
                0.0,
                1.0,
                0.0,
                0.0,
                0.0,
                0.0,
                1.0,
                row.link_offset,
                0.0,
                0.0,
                0.0,
                1.0,
            );
            let trans_x = Matrix4::new(
                1.0,
                0.0,
                0.0,
                row.link_length,
                0.0,
                1.0,
                0.0,
                0.0,
                0.0,
                0.0,
                1.0,
                0.0,
                0.0,
                0.0,
                0.0,
                1.0,
            );
            let rot_x = Matrix4::new(
                1.0,
                0.0,
                0.0,
                0.0,
                0.0,
                row.twist.cos(),
                -row.twist.sin(),
                0.0,
                0.0,
                row.twist.sin(),
                row.twist.cos(),
                0.0,
                0.0,
                0.0,
                0.0,
                1.0,
            );
            total *= rot_z * trans_z * trans_x * rot_x;
        }
        Pose {
            position: Vector3::new(total[(0, 3)], total[(1, 3)], total[(2, 3)]),
            rotation: total.fixed_view::<3, 3>(0, 0).into_owned(),
        }
    }

    #[test]
    fn straight_planar_chain_sums_link_lengths() {
        let dh = DhTable::planar(&[1.0, 1.0]);
        let pose = forward_kinematics(&dh, &JointState::zero());
        assert!((pose.position - Vector3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rotated_planar_chain_is_rigid_rotation() {
        let dh = DhTable::planar(&[1.0, 1.0]);
        let q = JointState::new([PI / 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let pose = forward_kinematics(&dh, &q);
        assert!((pose.position - Vector3::new(0.0, 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn matches_homogeneous_matrix_product_oracle() {
        let dh = DhTable::ur10e_class();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let mut angles = [0.0; JOINT_COUNT];
            for a in &mut angles {
                *a = rng.random_range(-PI..PI);
            }
            let q = JointState::new(angles);
            let ours = forward_kinematics(&dh, &q);
            let oracle = fk_matrix_oracle(&dh, &q);
            assert!(
                (ours.position - oracle.position).norm() < 1e-10,
                "position mismatch at q = {angles:?}"
            );
            assert!((ours.rotation - oracle.rotation).norm() < 1e-10);
        }
    }

    #[test]
    fn rotation_stays_orthonormal_over_random_states() {
        let dh = DhTable::ur10e_class();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let mut angles = [0.0; JOINT_COUNT];
            for a in &mut angles {
                *a = rng.random_range(-2.0 * PI..2.0 * PI);
            }
            let pose = forward_kinematics(&dh, &JointState::new(angles));
            assert!(pose.orthonormality_error() < 1e-9);
        }
    }

    #[test]
    fn decode_matches_step_size_table() {
        assert_eq!(decode_action(0).unwrap(), (0, 1.0, 0.025));
        assert_eq!(decode_action(3).unwrap(), (1, -1.0, 0.02));
        assert_eq!(decode_action(9).unwrap(), (4, -1.0, 0.015));
    }

    #[test]
    fn decode_is_a_bijection_over_joint_direction_pairs() {
        let mut seen = std::collections::HashSet::new();
        for index in 0..ACTION_COUNT {
            let (joint, direction, magnitude) = decode_action(index).unwrap();
            assert!(joint <= 4);
            assert_eq!(magnitude, JOINT_STEP_SIZES[joint]);
            assert!(seen.insert((joint, direction as i32)));
        }
        assert_eq!(seen.len(), ACTION_COUNT);
    }

    #[test]
    fn out_of_range_action_rejected() {
        assert_eq!(decode_action(10), Err(KinematicsError::InvalidAction(10)));
        assert!(DiscreteAction::new(11).is_err());
    }

    #[test]
    fn apply_action_moves_exactly_one_joint() {
        let q = JointState::zero();
        let moved = apply_action(&q, DiscreteAction::new(0).unwrap());
        assert_eq!(moved.angles, [0.025, 0.0, 0.0, 0.0, 0.0, 0.0]);

        let q = JointState::new([0.1, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let moved = apply_action(&q, DiscreteAction::new(1).unwrap());
        assert!((moved.angles[0] - 0.075).abs() < 1e-15);
    }

    #[test]
    fn opposite_action_pair_round_trips_within_float_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut angles = [0.0; JOINT_COUNT];
            for a in &mut angles {
                *a = rng.random_range(-1.0..1.0);
            }
            let q = JointState::new(angles);
            let forward_index = rng.random_range(0..5) * 2;
            let there = apply_action(&q, DiscreteAction::new(forward_index).unwrap());
            let back = apply_action(&there, DiscreteAction::new(forward_index + 1).unwrap());
            // (θ + δ) − δ is not a float identity, but the error is a few ulp.
            for (b, o) in back.angles.iter().zip(&q.angles) {
                assert!((b - o).abs() < 1e-12, "round trip drifted: {b} vs {o}");
            }
        }
    }

    #[test]
    fn validate_move_respects_closed_box() {
        let dh = DhTable::planar(&[1.0, 1.0]);
        let limits = JointLimits::default();
        let workspace = WorkspaceLimits::new(
            Vector3::new(-3.0, -3.0, -1.0),
            Vector3::new(3.0, 3.0, 1.0),
        );
        // Straight chain reaches (2, 0, 0): inside.
        assert_eq!(
            validate_move(&dh, &workspace, &limits, &JointState::zero()),
            MoveValidity::Valid
        );
        // Box shrunk so x > max.x: blocked.
        let tight = WorkspaceLimits::new(
            Vector3::new(-3.0, -3.0, -1.0),
            Vector3::new(1.5, 3.0, 1.0),
        );
        assert_eq!(
            validate_move(&dh, &tight, &limits, &JointState::zero()),
            MoveValidity::Blocked
        );
        // Exactly on the face: valid by the closed-box convention.
        let exact = WorkspaceLimits::new(
            Vector3::new(-3.0, -3.0, -1.0),
            Vector3::new(2.0, 3.0, 1.0),
        );
        assert_eq!(
            validate_move(&dh, &exact, &limits, &JointState::zero()),
            MoveValidity::Valid
        );
    }

    #[test]
    fn validate_move_blocks_joint_limit_violation() {
        let dh = DhTable::planar(&[1.0, 1.0]);
        let workspace = WorkspaceLimits::new(
            Vector3::new(-3.0, -3.0, -1.0),
            Vector3::new(3.0, 3.0, 1.0),
        );
        let limits = JointLimits::default();
        let q = JointState::new([2.0 * PI + 0.01, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            validate_move(&dh, &workspace, &limits, &q),
            MoveValidity::Blocked
        );
    }

    #[test]
    fn validate_move_is_pure() {
        let dh = DhTable::ur10e_class();
        let workspace = WorkspaceLimits::new(
            Vector3::new(-2.0, -2.0, -2.0),
            Vector3::new(2.0, 2.0, 2.0),
        );
        let limits = JointLimits::default();
        let q = JointState::new([0.3, -0.2, 0.4, 0.1, -0.5, 0.0]);
        let first = validate_move(&dh, &workspace, &limits, &q);
        for _ in 0..10 {
            assert_eq!(validate_move(&dh, &workspace, &limits, &q), first);
        }
    }

    #[test]
    fn non_finite_dh_rows_rejected() {
        let mut rows = [DhRow::ZERO; JOINT_COUNT];
        rows[2].twist = f64::NAN;
        assert_eq!(
            DhTable::new(rows),
            Err(KinematicsError::NonFiniteDhEntry { index: 2 })
        );
    }
}
