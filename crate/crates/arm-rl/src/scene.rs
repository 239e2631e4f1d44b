//! Virtual monitor, drifting target, and pinhole-camera rendering.
//!
//! The world contains a flat monitor showing a red disc on a white screen,
//! plus optional clutter shapes floating in the room. A camera mounted on
//! the arm's end-effector renders the scene by per-pixel ray casting:
//! nearest hit wins, everything else falls back to the room colour. A
//! per-episode lighting scale and per-pixel gaussian noise sit on top so the
//! detector has to cope with more than perfectly clean frames.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::kinematics::Pose;
use crate::vision::{Image, Rgb, FRAME_HEIGHT, FRAME_WIDTH};

/// Monitor resolution, in monitor pixels.
pub const MONITOR_WIDTH_PX: i32 = 1920;
pub const MONITOR_HEIGHT_PX: i32 = 1200;

/// Physical size of one monitor pixel (24-inch-class 1920×1200 panel).
pub const DEFAULT_PIXEL_PITCH: f64 = 0.00027;

/// Default drawn radius of the target disc, in monitor pixels.
pub const DEFAULT_TARGET_RADIUS_PX: i32 = 60;

/// Default margin for random target placement so the disc stays on screen.
pub const DEFAULT_RESET_MARGIN_PX: i32 = 100;

/// Target drift speed in tracker mode, monitor pixels per step.
pub const DRIFT_SPEED_PX: i32 = 3;

/// A flat display panel placed in the robot's base frame.
///
/// The pose maps monitor-local coordinates to world coordinates: local x is
/// the panel's right direction (increasing pixel column), local y its down
/// direction (increasing pixel row), local z the panel normal. Pixel
/// (960, 600) is the panel centre.
#[derive(Debug, Clone)]
pub struct MonitorModel {
    pub pose: Pose,
    pub pixel_pitch: f64,
    pub background: Rgb,
}

impl MonitorModel {
    pub fn new(pose: Pose, pixel_pitch: f64) -> Self {
        assert!(pixel_pitch > 0.0, "pixel pitch must be positive");
        Self {
            pose,
            pixel_pitch,
            background: [255, 255, 255],
        }
    }

    /// World position of a monitor pixel (fractional pixels allowed).
    pub fn pixel_to_world(&self, px: f64, py: f64) -> Vector3<f64> {
        let local = Vector3::new(
            (px - f64::from(MONITOR_WIDTH_PX) / 2.0) * self.pixel_pitch,
            (py - f64::from(MONITOR_HEIGHT_PX) / 2.0) * self.pixel_pitch,
            0.0,
        );
        self.pose.transform_point(&local)
    }

    /// Monitor pixel coordinates of a world point plus its out-of-plane
    /// distance (zero for points on the panel).
    pub fn world_to_pixel(&self, world: &Vector3<f64>) -> (f64, f64, f64) {
        let local = self.pose.inverse_transform_point(world);
        (
            local.x / self.pixel_pitch + f64::from(MONITOR_WIDTH_PX) / 2.0,
            local.y / self.pixel_pitch + f64::from(MONITOR_HEIGHT_PX) / 2.0,
            local.z,
        )
    }

    fn half_extents(&self) -> (f64, f64) {
        (
            f64::from(MONITOR_WIDTH_PX) / 2.0 * self.pixel_pitch,
            f64::from(MONITOR_HEIGHT_PX) / 2.0 * self.pixel_pitch,
        )
    }
}

/// Where the red disc currently is and how it moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TargetState {
    /// Disc centre in monitor pixels.
    pub center: (i32, i32),
    /// Disc radius in monitor pixels.
    pub radius_px: i32,
    /// Per-step drift in monitor pixels; (0, 0) outside tracker mode.
    pub drift: (i32, i32),
}

/// How the target is (re)placed at episode start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    /// Fixed at the monitor centre, no motion.
    Static,
    /// Uniformly random position each episode, no motion.
    RandomReset,
    /// Starts at the centre and drifts 3 px/step along a random axis.
    Tracker,
}

/// Draw the target state for a fresh episode.
pub fn reset_target<R: Rng + ?Sized>(
    mode: TargetMode,
    radius_px: i32,
    margin: i32,
    rng: &mut R,
) -> TargetState {
    let center_of_screen = (MONITOR_WIDTH_PX / 2, MONITOR_HEIGHT_PX / 2);
    match mode {
        TargetMode::Static => TargetState {
            center: center_of_screen,
            radius_px,
            drift: (0, 0),
        },
        TargetMode::RandomReset => TargetState {
            center: (
                rng.random_range(margin..=MONITOR_WIDTH_PX - 1 - margin),
                rng.random_range(margin..=MONITOR_HEIGHT_PX - 1 - margin),
            ),
            radius_px,
            drift: (0, 0),
        },
        TargetMode::Tracker => {
            let drift = match rng.random_range(0..4) {
                0 => (DRIFT_SPEED_PX, 0),
                1 => (-DRIFT_SPEED_PX, 0),
                2 => (0, DRIFT_SPEED_PX),
                _ => (0, -DRIFT_SPEED_PX),
            };
            TargetState {
                center: center_of_screen,
                radius_px,
                drift,
            }
        }
    }
}

/// Advance the target one step. If the next position would leave the panel
/// on some axis, that axis's drift component is negated first and then
/// applied, so the centre never leaves [0, 1919]×[0, 1199].
pub fn drift_target(t: &TargetState) -> TargetState {
    let mut drift = t.drift;
    let (cx, cy) = t.center;
    if cx + drift.0 < 0 || cx + drift.0 > MONITOR_WIDTH_PX - 1 {
        drift.0 = -drift.0;
    }
    if cy + drift.1 < 0 || cy + drift.1 > MONITOR_HEIGHT_PX - 1 {
        drift.1 = -drift.1;
    }
    TargetState {
        center: (cx + drift.0, cy + drift.1),
        radius_px: t.radius_px,
        drift,
    }
}

/// Pinhole camera rigidly mounted on the end-effector.
///
/// Camera coordinates: +z along the optical axis (out of the lens), +x to
/// image right, +y to image down.
#[derive(Debug, Clone)]
pub struct CameraModel {
    pub focal_px: f64,
    pub principal_point: (f64, f64),
    /// Camera pose relative to the end-effector frame.
    pub mount: Pose,
}

impl CameraModel {
    pub fn new(focal_px: f64, principal_point: (f64, f64), mount: Pose) -> Self {
        assert!(focal_px > 0.0, "focal length must be positive");
        Self {
            focal_px,
            principal_point,
            mount,
        }
    }

    /// World pose of the camera given the end-effector pose.
    pub fn world_pose(&self, end_effector: &Pose) -> Pose {
        end_effector.compose(&self.mount)
    }
}

/// Project a world point through the camera at `cam_pose`. Returns frame
/// pixel coordinates and depth, or `None` when the point is not strictly in
/// front of the camera.
pub fn project_point(
    cam: &CameraModel,
    cam_pose: &Pose,
    p_world: &Vector3<f64>,
) -> Option<((f64, f64), f64)> {
    let p_cam = cam_pose.inverse_transform_point(p_world);
    if p_cam.z <= 0.0 {
        return None;
    }
    let u = cam.focal_px * p_cam.x / p_cam.z + cam.principal_point.0;
    let v = cam.focal_px * p_cam.y / p_cam.z + cam.principal_point.1;
    Some(((u, v), p_cam.z))
}

/// A distractor shape floating in the room.
#[derive(Debug, Clone)]
pub enum ClutterShape {
    /// Filled disc on an arbitrary plane.
    Disc {
        center: Vector3<f64>,
        normal: Vector3<f64>,
        radius: f64,
        color: Rgb,
    },
    /// Filled rectangle spanned by two orthogonal unit vectors.
    Rect {
        center: Vector3<f64>,
        right: Vector3<f64>,
        down: Vector3<f64>,
        half_width: f64,
        half_height: f64,
        color: Rgb,
    },
}

/// Room-level rendering parameters.
#[derive(Debug, Clone)]
pub struct SceneConfig {
    /// Per-episode lighting scale is sampled uniformly from this range.
    pub lighting_scale_range: (f64, f64),
    /// Gaussian noise standard deviation added per pixel channel (0 = off).
    pub noise_std: f64,
    /// Colour of everything no ray hits.
    pub room_color: Rgb,
    pub clutter: Vec<ClutterShape>,
}

impl SceneConfig {
    /// Clean scene: full lighting, no noise, no clutter.
    pub fn clean() -> Self {
        Self {
            lighting_scale_range: (1.0, 1.0),
            noise_std: 0.0,
            room_color: [128, 128, 128],
            clutter: Vec::new(),
        }
    }

    /// Sample the lighting scale for a new episode.
    pub fn sample_lighting<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.lighting_scale_range;
        assert!(
            0.0 < lo && lo <= hi && hi <= 1.0,
            "lighting range must satisfy 0 < lo <= hi <= 1"
        );
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    }
}

impl Default for SceneConfig {
    /// Stock room: a grey circle and two coloured rectangles off to the
    /// sides of the monitor, exercising false-positive rejection.
    fn default() -> Self {
        Self {
            lighting_scale_range: (1.0, 1.0),
            noise_std: 0.0,
            room_color: [128, 128, 128],
            clutter: vec![
                ClutterShape::Disc {
                    center: Vector3::new(0.85, 0.45, 0.55),
                    normal: Vector3::new(-1.0, 0.0, 0.0),
                    radius: 0.08,
                    color: [160, 160, 160],
                },
                ClutterShape::Rect {
                    center: Vector3::new(0.9, -0.5, 0.6),
                    right: Vector3::new(0.0, -1.0, 0.0),
                    down: Vector3::new(0.0, 0.0, -1.0),
                    half_width: 0.1,
                    half_height: 0.07,
                    color: [40, 90, 220],
                },
                ClutterShape::Rect {
                    center: Vector3::new(0.95, 0.55, 0.25),
                    right: Vector3::new(0.0, -1.0, 0.0),
                    down: Vector3::new(0.0, 0.0, -1.0),
                    half_width: 0.12,
                    half_height: 0.05,
                    color: [230, 210, 60],
                },
            ],
        }
    }
}

/// Ray/plane intersection parameter, or `None` for a ray parallel to the
/// plane or a hit behind the origin.
fn plane_hit(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    point_on_plane: &Vector3<f64>,
    normal: &Vector3<f64>,
) -> Option<f64> {
    let denom = dir.dot(normal);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = (point_on_plane - origin).dot(normal) / denom;
    (t > 1e-9).then_some(t)
}

fn shape_hit(
    shape: &ClutterShape,
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
) -> Option<(f64, Rgb)> {
    match shape {
        ClutterShape::Disc {
            center,
            normal,
            radius,
            color,
        } => {
            let t = plane_hit(origin, dir, center, normal)?;
            let hit = origin + dir * t;
            ((hit - center).norm() <= *radius).then_some((t, *color))
        }
        ClutterShape::Rect {
            center,
            right,
            down,
            half_width,
            half_height,
            color,
        } => {
            let normal = right.cross(down);
            let t = plane_hit(origin, dir, center, &normal)?;
            let offset = origin + dir * t - center;
            let within = offset.dot(right).abs() <= *half_width
                && offset.dot(down).abs() <= *half_height;
            within.then_some((t, *color))
        }
    }
}

/// Render one 400×300 frame by ray casting.
///
/// Rays pass through integer pixel coordinates, the nearest surface hit
/// colours the pixel, the whole frame is dimmed by `lighting_scale`
/// (multiply and round per channel), and gaussian noise is added last.
/// Deterministic for a given rng state.
pub fn render<R: Rng + ?Sized>(
    cam: &CameraModel,
    cam_pose: &Pose,
    monitor: &MonitorModel,
    target: &TargetState,
    scene: &SceneConfig,
    lighting_scale: f64,
    rng: &mut R,
) -> Image {
    let mut img = Image::new(FRAME_WIDTH, FRAME_HEIGHT);
    let origin = cam_pose.position;
    let monitor_origin = monitor.pose.position;
    let monitor_normal = monitor.pose.rotation.column(2).into_owned();
    let (half_w, half_h) = monitor.half_extents();
    let target_center = Vector3::new(f64::from(target.center.0), f64::from(target.center.1), 0.0);
    let target_radius = f64::from(target.radius_px);

    for y in 0..FRAME_HEIGHT {
        for x in 0..FRAME_WIDTH {
            let dir_cam = Vector3::new(
                (x as f64 - cam.principal_point.0) / cam.focal_px,
                (y as f64 - cam.principal_point.1) / cam.focal_px,
                1.0,
            );
            let dir = cam_pose.rotation * dir_cam;

            let mut nearest: Option<(f64, Rgb)> = None;
            if let Some(t) = plane_hit(&origin, &dir, &monitor_origin, &monitor_normal) {
                let local = monitor.pose.inverse_transform_point(&(origin + dir * t));
                if local.x.abs() <= half_w && local.y.abs() <= half_h {
                    let px = local.x / monitor.pixel_pitch + f64::from(MONITOR_WIDTH_PX) / 2.0;
                    let py = local.y / monitor.pixel_pitch + f64::from(MONITOR_HEIGHT_PX) / 2.0;
                    let on_disc = (px - target_center.x).hypot(py - target_center.y)
                        <= target_radius;
                    let color = if on_disc { [255, 0, 0] } else { monitor.background };
                    nearest = Some((t, color));
                }
            }
            for shape in &scene.clutter {
                if let Some((t, color)) = shape_hit(shape, &origin, &dir) {
                    if nearest.is_none_or(|(tn, _)| t < tn) {
                        nearest = Some((t, color));
                    }
                }
            }

            let color = nearest.map_or(scene.room_color, |(_, c)| c);
            img.set(x, y, color);
        }
    }

    let mut img = img.scaled_brightness(lighting_scale);
    if scene.noise_std > 0.0 {
        let normal = Normal::new(0.0, scene.noise_std).expect("noise_std must be finite");
        for y in 0..FRAME_HEIGHT {
            for x in 0..FRAME_WIDTH {
                let mut px = img.get(x, y);
                for c in &mut px {
                    let noisy = f64::from(*c) + normal.sample(rng);
                    *c = noisy.round().clamp(0.0, 255.0) as u8;
                }
                img.set(x, y, px);
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;
    use crate::vision::{default_cutoffs, detect_target, isolate_target, HoughConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    /// Camera at `distance` in front of the monitor centre, looking
    /// straight at it. World frame: x toward the monitor, z up.
    fn head_on_setup(distance: f64) -> (CameraModel, Pose, MonitorModel) {
        let monitor_rotation = Matrix3::from_columns(&[
            Vector3::new(0.0, -1.0, 0.0), // panel right
            Vector3::new(0.0, 0.0, -1.0), // panel down
            Vector3::new(1.0, 0.0, 0.0),  // panel normal
        ]);
        let monitor = MonitorModel::new(
            Pose::new(Vector3::new(distance, 0.0, 0.0), monitor_rotation),
            DEFAULT_PIXEL_PITCH,
        );
        let cam_rotation = Matrix3::from_columns(&[
            Vector3::new(0.0, -1.0, 0.0), // image right
            Vector3::new(0.0, 0.0, -1.0), // image down
            Vector3::new(1.0, 0.0, 0.0),  // optical axis
        ]);
        let cam_pose = Pose::new(Vector3::zeros(), cam_rotation);
        let cam = CameraModel::new(400.0, (200.0, 150.0), Pose::identity());
        (cam, cam_pose, monitor)
    }

    #[test]
    fn optical_axis_maps_to_principal_point() {
        let cam = CameraModel::new(400.0, (200.0, 150.0), Pose::identity());
        let ((u, v), depth) =
            project_point(&cam, &Pose::identity(), &Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((u - 200.0).abs() < 1e-12);
        assert!((v - 150.0).abs() < 1e-12);
        assert!((depth - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lateral_offset_follows_similar_triangles() {
        let cam = CameraModel::new(400.0, (200.0, 150.0), Pose::identity());
        let ((u, v), _) =
            project_point(&cam, &Pose::identity(), &Vector3::new(0.1, 0.0, 1.0)).unwrap();
        assert!((u - 240.0).abs() < 1e-12, "u = {u}");
        assert!((v - 150.0).abs() < 1e-12);
    }

    #[test]
    fn points_behind_the_camera_are_absent() {
        let cam = CameraModel::new(400.0, (200.0, 150.0), Pose::identity());
        assert!(project_point(&cam, &Pose::identity(), &Vector3::new(0.0, 0.0, -0.5)).is_none());
        assert!(project_point(&cam, &Pose::identity(), &Vector3::new(0.1, 0.1, 0.0)).is_none());
    }

    #[test]
    fn projection_respects_camera_pose() {
        // Camera translated 1 m along world x, looking down world z as before.
        let cam = CameraModel::new(400.0, (200.0, 150.0), Pose::identity());
        let pose = Pose::new(Vector3::new(1.0, 0.0, 0.0), Matrix3::identity());
        let ((u, v), depth) =
            project_point(&cam, &pose, &Vector3::new(1.0, 0.0, 2.0)).unwrap();
        assert!((u - 200.0).abs() < 1e-12);
        assert!((v - 150.0).abs() < 1e-12);
        assert!((depth - 2.0).abs() < 1e-12);
    }

    #[test]
    fn static_reset_centres_the_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = reset_target(TargetMode::Static, 60, 100, &mut rng);
        assert_eq!(t.center, (960, 600));
        assert_eq!(t.drift, (0, 0));
        assert_eq!(t.radius_px, 60);
    }

    #[test]
    fn tracker_reset_drifts_uniformly_over_four_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 4];
        let n = 10_000;
        for _ in 0..n {
            let t = reset_target(TargetMode::Tracker, 60, 100, &mut rng);
            assert_eq!(t.center, (960, 600));
            let idx = match t.drift {
                (3, 0) => 0,
                (-3, 0) => 1,
                (0, 3) => 2,
                (0, -3) => 3,
                other => panic!("unexpected drift {other:?}"),
            };
            counts[idx] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / n as f64;
            assert!((freq - 0.25).abs() <= 0.02, "direction frequency {freq}");
        }
    }

    #[test]
    fn random_reset_is_uniform_within_margins() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 10_000;
        let margin = 100;
        // 8×8 spatial histogram; both in-margin spans divide evenly into 8.
        let bins = 8usize;
        let span_x = MONITOR_WIDTH_PX - 2 * margin; // 1720
        let span_y = MONITOR_HEIGHT_PX - 2 * margin; // 1000
        let mut hist = vec![0f64; bins * bins];
        for _ in 0..n {
            let t = reset_target(TargetMode::RandomReset, 60, margin, &mut rng);
            let (x, y) = t.center;
            assert!((margin..=MONITOR_WIDTH_PX - 1 - margin).contains(&x));
            assert!((margin..=MONITOR_HEIGHT_PX - 1 - margin).contains(&y));
            assert_eq!(t.drift, (0, 0));
            let bx = (((x - margin) * bins as i32) / span_x).min(bins as i32 - 1) as usize;
            let by = (((y - margin) * bins as i32) / span_y).min(bins as i32 - 1) as usize;
            hist[by * bins + bx] += 1.0;
        }
        let expected = n as f64 / (bins * bins) as f64;
        let chi2: f64 = hist.iter().map(|&o| (o - expected).powi(2) / expected).sum();
        let dof = (bins * bins - 1) as f64;
        let critical = ChiSquared::new(dof).unwrap().inverse_cdf(0.99);
        assert!(chi2 < critical, "chi-square {chi2} over critical {critical}");
    }

    #[test]
    fn drift_moves_and_reflects_per_axis() {
        let step = |c, d| drift_target(&TargetState {
            center: c,
            radius_px: 60,
            drift: d,
        });
        let t = step((960, 600), (3, 0));
        assert_eq!((t.center, t.drift), ((963, 600), (3, 0)));
        let t = step((1918, 600), (3, 0));
        assert_eq!((t.center, t.drift), ((1915, 600), (-3, 0)));
        let t = step((960, 1), (0, -3));
        assert_eq!((t.center, t.drift), ((960, 4), (0, 3)));
    }

    #[test]
    fn long_drift_trajectories_stay_on_the_panel() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let mut t = reset_target(TargetMode::Tracker, 60, 100, &mut rng);
            // Start from a few nasty corners too.
            if rng.random::<bool>() {
                t.center = (
                    rng.random_range(0..MONITOR_WIDTH_PX),
                    rng.random_range(0..MONITOR_HEIGHT_PX),
                );
            }
            for _ in 0..5_000 {
                let next = drift_target(&t);
                let (dx, dy) = (next.center.0 - t.center.0, next.center.1 - t.center.1);
                assert_eq!(dx.abs() + dy.abs(), DRIFT_SPEED_PX);
                assert!((0..MONITOR_WIDTH_PX).contains(&next.center.0));
                assert!((0..MONITOR_HEIGHT_PX).contains(&next.center.1));
                t = next;
            }
        }
    }

    #[test]
    fn head_on_render_matches_the_apparent_radius_oracle() {
        // Depth chosen for an apparent radius of ~25 px:
        // r_apparent = focal * (radius_px * pitch) / depth.
        let radius_px = 60;
        let physical_radius = f64::from(radius_px) * DEFAULT_PIXEL_PITCH;
        let depth = 400.0 * physical_radius / 25.0;
        let (cam, cam_pose, monitor) = head_on_setup(depth);
        let target = TargetState {
            center: (960, 600),
            radius_px,
            drift: (0, 0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = render(
            &cam,
            &cam_pose,
            &monitor,
            &target,
            &SceneConfig::clean(),
            1.0,
            &mut rng,
        );
        let red_pixels = isolate_target(&img, &default_cutoffs()).count_set() as f64;
        let expected = std::f64::consts::PI * 25.0 * 25.0;
        assert!(
            (red_pixels - expected).abs() <= 0.10 * expected,
            "red pixel count {red_pixels}, expected ~{expected}"
        );
        let det = detect_target(&img, &default_cutoffs(), &HoughConfig::default())
            .expect("target visible head-on");
        assert!(det.distance_to((200.0, 150.0)) <= 3.0, "{:?}", det.center);
        assert!((det.radius - 25.0).abs() <= 2.0, "radius {}", det.radius);
    }

    #[test]
    fn camera_facing_away_sees_no_red() {
        let (cam, _, monitor) = head_on_setup(0.4);
        // Optical axis flipped to -x: monitor is behind the camera.
        let away = Matrix3::from_columns(&[
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(-1.0, 0.0, 0.0),
        ]);
        let cam_pose = Pose::new(Vector3::zeros(), away);
        let target = TargetState {
            center: (960, 600),
            radius_px: 60,
            drift: (0, 0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = render(
            &cam,
            &cam_pose,
            &monitor,
            &target,
            &SceneConfig::default(),
            1.0,
            &mut rng,
        );
        assert_eq!(isolate_target(&img, &default_cutoffs()).count_set(), 0);
    }

    #[test]
    fn lighting_scale_dims_every_pixel_identically() {
        let (cam, cam_pose, monitor) = head_on_setup(0.3);
        let target = TargetState {
            center: (960, 600),
            radius_px: 60,
            drift: (0, 0),
        };
        let scene = SceneConfig::default(); // noise off, clutter on
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let full = render(&cam, &cam_pose, &monitor, &target, &scene, 1.0, &mut rng);
        let dim = render(&cam, &cam_pose, &monitor, &target, &scene, 0.8, &mut rng);
        for y in 0..FRAME_HEIGHT {
            for x in 0..FRAME_WIDTH {
                let a = full.get(x, y);
                let b = dim.get(x, y);
                for c in 0..3 {
                    assert_eq!(b[c], (f64::from(a[c]) * 0.8).round() as u8);
                }
            }
        }
    }

    #[test]
    fn render_is_deterministic_given_the_rng_seed() {
        let (cam, cam_pose, monitor) = head_on_setup(0.35);
        let target = TargetState {
            center: (980, 580),
            radius_px: 60,
            drift: (0, 0),
        };
        let mut scene = SceneConfig::default();
        scene.noise_std = 4.0;
        let mut rng_a = ChaCha8Rng::seed_from_u64(42);
        let mut rng_b = ChaCha8Rng::seed_from_u64(42);
        let a = render(&cam, &cam_pose, &monitor, &target, &scene, 0.9, &mut rng_a);
        let b = render(&cam, &cam_pose, &monitor, &target, &scene, 0.9, &mut rng_b);
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn apparent_radius_shrinks_with_distance() {
        let target = TargetState {
            center: (960, 600),
            radius_px: 60,
            drift: (0, 0),
        };
        let physical_radius = 60.0 * DEFAULT_PIXEL_PITCH;
        let mut last_radius = f64::INFINITY;
        for i in 0..10 {
            // Ten depths whose ideal apparent radii step down 38, 35, … 11 px,
            // spaced widely enough that detections stay strictly ordered.
            let ideal_radius = 38.0 - 3.0 * f64::from(i);
            let depth = 400.0 * physical_radius / ideal_radius;
            let (cam, cam_pose, monitor) = head_on_setup(depth);
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let img = render(
                &cam,
                &cam_pose,
                &monitor,
                &target,
                &SceneConfig::clean(),
                1.0,
                &mut rng,
            );
            let det = detect_target(&img, &default_cutoffs(), &HoughConfig::default())
                .expect("target visible at every tested distance");
            assert!(
                det.radius < last_radius,
                "radius {} at depth {depth} did not shrink (last {last_radius})",
                det.radius
            );
            last_radius = det.radius;
        }
    }
}
