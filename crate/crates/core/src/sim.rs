//! Synthetic world: box-shaped targets, a kinematic UAV following
//! waypoints, and noisy stand-ins for the detector, feature tracker and
//! state estimator.
//!
//! Poses here are `body_to_world` unless named otherwise.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{project, rot_z, wrap_angle, BBox, CameraRig, Pixel, Point3, PoseSE3};
use crate::rng::SimRng;
use crate::view_planner::Waypoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("target {id}: half extents must be positive, got {half_extents:?}")]
    InvalidTarget { id: u64, half_extents: [f64; 3] },
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("invalid kinematic limits: {0}")]
    InvalidLimits(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetTruth {
    pub id: u64,
    pub center: Point3,
    pub half_extents: Vector3<f64>,
    /// Points on the box surface, used for simulated feature tracking.
    pub features: Vec<Point3>,
}

impl TargetTruth {
    /// Box target with `n_features` points drawn uniformly over its surface.
    pub fn new(
        id: u64,
        center: Point3,
        half_extents: Vector3<f64>,
        n_features: usize,
        rng: &mut SimRng,
    ) -> Result<Self, SimError> {
        if !half_extents.iter().all(|h| *h > 0.0 && h.is_finite()) {
            return Err(SimError::InvalidTarget {
                id,
                half_extents: half_extents.into(),
            });
        }
        let h = half_extents;
        // Face areas for x, y, z-normal face pairs.
        let areas = [h.y * h.z, h.x * h.z, h.x * h.y];
        let total: f64 = areas.iter().sum();
        let features = (0..n_features)
            .map(|_| {
                let pick = rng.random::<f64>() * total;
                let axis = if pick < areas[0] {
                    0
                } else if pick < areas[0] + areas[1] {
                    1
                } else {
                    2
                };
                let mut p = Vector3::new(
                    rng.random_range(-h.x..=h.x),
                    rng.random_range(-h.y..=h.y),
                    rng.random_range(-h.z..=h.z),
                );
                p[axis] = if rng.random::<bool>() { h[axis] } else { -h[axis] };
                center + p
            })
            .collect();
        Ok(Self {
            id,
            center,
            half_extents,
            features,
        })
    }

    pub fn corners(&self) -> [Point3; 8] {
        let h = self.half_extents;
        std::array::from_fn(|i| {
            let s = |bit: usize| if i & bit == 0 { -1.0 } else { 1.0 };
            self.center + Vector3::new(s(1) * h.x, s(2) * h.y, s(4) * h.z)
        })
    }

    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        (p - self.center)
            .iter()
            .zip(self.half_extents.iter())
            .all(|(d, h)| d.abs() <= h + tol)
    }

    /// Exact image bounding box of the projected target, unclipped. `None`
    /// if any corner is behind the camera.
    pub fn projected_box(&self, world_to_camera: &PoseSE3, cam: &CameraRig) -> Option<BBox> {
        let mut lo = Pixel::repeat(f64::INFINITY);
        let mut hi = Pixel::repeat(f64::NEG_INFINITY);
        for c in self.corners() {
            let px = project(&c, world_to_camera, cam).ok()?.pixel;
            lo = lo.inf(&px);
            hi = hi.sup(&px);
        }
        BBox::from_corners(lo, hi).ok()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub pose_sigma_xyz: f64,
    pub yaw_sigma: f64,
    pub detector_pixel_sigma: f64,
    pub detect_prob: f64,
    /// Mean number of spurious detections per frame.
    pub false_positive_rate: f64,
    pub klt_pixel_sigma: f64,
    /// Frames between image capture and delivery of its detections.
    pub detection_latency_frames: u32,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            pose_sigma_xyz: 0.2,
            yaw_sigma: 0.01,
            detector_pixel_sigma: 2.0,
            detect_prob: 0.9,
            false_positive_rate: 0.05,
            klt_pixel_sigma: 1.0,
            detection_latency_frames: 0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            pose_sigma_xyz: 0.0,
            yaw_sigma: 0.0,
            detector_pixel_sigma: 0.0,
            detect_prob: 1.0,
            false_positive_rate: 0.0,
            klt_pixel_sigma: 0.0,
            detection_latency_frames: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let sigmas = [
            ("pose_sigma_xyz", self.pose_sigma_xyz),
            ("yaw_sigma", self.yaw_sigma),
            ("detector_pixel_sigma", self.detector_pixel_sigma),
            ("klt_pixel_sigma", self.klt_pixel_sigma),
            ("false_positive_rate", self.false_positive_rate),
        ];
        for (name, v) in sigmas {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::InvalidNoise(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.detect_prob) {
            return Err(SimError::InvalidNoise(format!(
                "detect_prob must lie in [0, 1], got {}",
                self.detect_prob
            )));
        }
        Ok(())
    }
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated non-negative")
}

/// Noisy pose estimate: translation jittered per axis, yaw jittered about
/// world z, roll and pitch untouched.
pub fn perturb_pose(true_pose: &PoseSE3, noise: &NoiseModel, rng: &mut SimRng) -> PoseSE3 {
    let n_xyz = normal(noise.pose_sigma_xyz);
    let dt = Vector3::new(n_xyz.sample(rng), n_xyz.sample(rng), n_xyz.sample(rng));
    let dyaw = normal(noise.yaw_sigma).sample(rng);
    PoseSE3 {
        rotation: rot_z(dyaw) * true_pose.rotation,
        translation: true_pose.translation + dt,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    /// Ground-truth target, `None` for false positives. Not visible to the
    /// estimators; used only for scoring.
    pub truth: Option<u64>,
}

pub fn simulate_detector(
    targets: &[TargetTruth],
    true_pose: &PoseSE3,
    cam: &CameraRig,
    noise: &NoiseModel,
    rng: &mut SimRng,
) -> Vec<Detection> {
    let w2c = cam.world_to_camera(true_pose);
    let image = cam.image_box();
    let edge = normal(noise.detector_pixel_sigma);
    let mut out = Vec::new();
    for t in targets {
        let Ok(c) = project(&t.center, &w2c, cam) else {
            continue;
        };
        if !cam.contains_pixel(&c.pixel) || rng.random::<f64>() >= noise.detect_prob {
            continue;
        }
        let Some(b) = t.projected_box(&w2c, cam) else {
            continue;
        };
        let clip_u = |u: f64| u.clamp(image.u_min, image.u_max);
        let clip_v = |v: f64| v.clamp(image.v_min, image.v_max);
        let noisy = BBox {
            u_min: clip_u(b.u_min + edge.sample(rng)),
            v_min: clip_v(b.v_min + edge.sample(rng)),
            u_max: clip_u(b.u_max + edge.sample(rng)),
            v_max: clip_v(b.v_max + edge.sample(rng)),
        };
        if noisy.is_valid() {
            out.push(Detection {
                bbox: noisy,
                truth: Some(t.id),
            });
        }
    }
    if noise.false_positive_rate > 0.0 {
        let k = Poisson::new(noise.false_positive_rate)
            .map(|p| p.sample(rng) as usize)
            .unwrap_or(0);
        for _ in 0..k {
            let w = rng.random_range(10.0..=60.0);
            let h = rng.random_range(10.0..=60.0);
            let u = rng.random_range(0.0..(cam.width - w).max(1.0));
            let v = rng.random_range(0.0..(cam.height - h).max(1.0));
            out.push(Detection {
                bbox: BBox {
                    u_min: u,
                    v_min: v,
                    u_max: (u + w).min(cam.width),
                    v_max: (v + h).min(cam.height),
                },
                truth: None,
            });
        }
    }
    out
}

/// Noisy pixel correspondences of `points` visible in both views.
fn correspondences<'a>(
    points: impl Iterator<Item = &'a Point3>,
    prev_w2c: &PoseSE3,
    curr_w2c: &PoseSE3,
    cam: &CameraRig,
    noise: &NoiseModel,
    rng: &mut SimRng,
    keep_prev: impl Fn(&Pixel) -> bool,
) -> Option<(Vec<Pixel>, Vec<Pixel>)> {
    let n = normal(noise.klt_pixel_sigma);
    let mut prev = Vec::new();
    let mut curr = Vec::new();
    for p in points {
        let (Ok(a), Ok(b)) = (project(p, prev_w2c, cam), project(p, curr_w2c, cam)) else {
            continue;
        };
        if !cam.contains_pixel(&a.pixel) || !cam.contains_pixel(&b.pixel) || !keep_prev(&a.pixel) {
            continue;
        }
        prev.push(a.pixel + Pixel::new(n.sample(rng), n.sample(rng)));
        curr.push(b.pixel + Pixel::new(n.sample(rng), n.sample(rng)));
    }
    (prev.len() >= 4).then_some((prev, curr))
}

/// Simulated feature tracks of one target between two camera poses
/// (`world_to_camera`). `None` when fewer than 4 features are covisible.
pub fn simulate_klt(
    target: &TargetTruth,
    prev_w2c: &PoseSE3,
    curr_w2c: &PoseSE3,
    cam: &CameraRig,
    noise: &NoiseModel,
    rng: &mut SimRng,
) -> Option<(Vec<Pixel>, Vec<Pixel>)> {
    correspondences(target.features.iter(), prev_w2c, curr_w2c, cam, noise, rng, |_| true)
}

/// Feature tracks seeded inside a tracked box: every target feature whose
/// previous pixel lies in `region`.
pub fn simulate_klt_in_box(
    targets: &[TargetTruth],
    region: &BBox,
    prev_w2c: &PoseSE3,
    curr_w2c: &PoseSE3,
    cam: &CameraRig,
    noise: &NoiseModel,
    rng: &mut SimRng,
) -> Option<(Vec<Pixel>, Vec<Pixel>)> {
    correspondences(
        targets.iter().flat_map(|t| t.features.iter()),
        prev_w2c,
        curr_w2c,
        cam,
        noise,
        rng,
        |px| region.contains(px),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinematicLimits {
    pub v_max: f64,
    pub a_max: f64,
    /// Yaw slew rate, rad/s.
    pub yaw_rate: f64,
    pub reach_tolerance: f64,
    pub yaw_tolerance: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            a_max: 1.0,
            yaw_rate: std::f64::consts::FRAC_PI_4,
            reach_tolerance: 0.2,
            yaw_tolerance: 0.05,
        }
    }
}

impl KinematicLimits {
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("yaw_rate", self.yaw_rate),
            ("reach_tolerance", self.reach_tolerance),
            ("yaw_tolerance", self.yaw_tolerance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::InvalidLimits(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Rest-to-rest traversal time of a straight segment under speed and
/// acceleration limits.
pub fn trapezoid_duration(length: f64, v_max: f64, a_max: f64) -> f64 {
    if length <= 0.0 {
        0.0
    } else if length >= v_max * v_max / a_max {
        length / v_max + v_max / a_max
    } else {
        2.0 * (length / a_max).sqrt()
    }
}

/// Distance and speed `tau` seconds into a rest-to-rest trapezoid.
fn trapezoid_state(length: f64, v_max: f64, a_max: f64, tau: f64) -> (f64, f64) {
    let total = trapezoid_duration(length, v_max, a_max);
    if tau >= total {
        return (length, 0.0);
    }
    let v_peak = v_max.min((length * a_max).sqrt());
    let t_acc = v_peak / a_max;
    let d_acc = 0.5 * v_peak * t_acc;
    if tau < t_acc {
        (0.5 * a_max * tau * tau, a_max * tau)
    } else if tau < total - t_acc {
        (d_acc + v_peak * (tau - t_acc), v_peak)
    } else {
        let r = total - tau;
        (length - 0.5 * a_max * r * r, a_max * r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Motion {
    Idle,
    /// Decelerating to rest along `dir` from speed `v0`.
    Brake {
        start: Point3,
        dir: Vector3<f64>,
        v0: f64,
        tau: f64,
    },
    Segment {
        start: Point3,
        tau: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub time: f64,
    pub true_pose: PoseSE3,
    pub velocity: Vector3<f64>,
    pub estimated_pose: PoseSE3,
}

/// Flies a waypoint list with rest-to-rest trapezoidal segments and a
/// rate-limited yaw.
#[derive(Clone, Debug)]
pub struct WaypointFollower {
    limits: KinematicLimits,
    path: Vec<Waypoint>,
    next: usize,
    motion: Motion,
    position: Point3,
    velocity: Vector3<f64>,
    yaw: f64,
}

impl WaypointFollower {
    pub fn new(position: Point3, yaw: f64, limits: KinematicLimits) -> Self {
        Self {
            limits,
            path: Vec::new(),
            next: 0,
            motion: Motion::Idle,
            position,
            velocity: Vector3::zeros(),
            yaw: wrap_angle(yaw),
        }
    }

    pub fn limits(&self) -> &KinematicLimits {
        &self.limits
    }

    /// Replaces the path. A moving vehicle first brakes to rest.
    pub fn set_path(&mut self, path: Vec<Waypoint>) {
        self.path = path;
        self.next = 0;
        let speed = self.velocity.norm();
        self.motion = if speed > 1e-12 {
            Motion::Brake {
                start: self.position,
                dir: self.velocity / speed,
                v0: speed,
                tau: 0.0,
            }
        } else {
            self.start_segment()
        };
    }

    fn start_segment(&self) -> Motion {
        if self.next < self.path.len() {
            Motion::Segment {
                start: self.position,
                tau: 0.0,
            }
        } else {
            Motion::Idle
        }
    }

    pub fn is_done(&self) -> bool {
        self.motion == Motion::Idle && self.next >= self.path.len()
    }

    /// Index of the waypoint currently being flown to.
    pub fn target_index(&self) -> usize {
        self.next
    }

    pub fn path(&self) -> &[Waypoint] {
        &self.path
    }

    pub fn position(&self) -> Point3 {
        self.position
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.velocity
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    /// Where the vehicle comes to rest if it brakes now.
    pub fn stopping_point(&self) -> Point3 {
        let speed = self.velocity.norm();
        self.position + self.velocity * (speed / (2.0 * self.limits.a_max))
    }

    pub fn pose(&self) -> PoseSE3 {
        PoseSE3::from_yaw(self.yaw, self.position)
    }

    fn slew_yaw(&mut self, target: f64, dt: f64) {
        let err = wrap_angle(target - self.yaw);
        let max = self.limits.yaw_rate * dt;
        self.yaw = if err.abs() <= max {
            wrap_angle(target)
        } else {
            wrap_angle(self.yaw + max * err.signum())
        };
    }

    /// Advances `dt` seconds; returns the indices of waypoints reached.
    pub fn step(&mut self, dt: f64) -> Vec<usize> {
        let (v, a) = (self.limits.v_max, self.limits.a_max);
        let mut reached = Vec::new();
        let mut remaining = dt;
        // Rest-to-rest segments let spare time carry into the next one
        // without a velocity jump.
        while remaining > 1e-12 {
            match self.motion {
                Motion::Idle => {
                    self.velocity = Vector3::zeros();
                    break;
                }
                Motion::Brake { start, dir, v0, tau } => {
                    let stop = v0 / a;
                    let t = (tau + remaining).min(stop);
                    let s = v0 * t - 0.5 * a * t * t;
                    self.position = start + dir * s;
                    self.velocity = dir * (v0 - a * t);
                    remaining -= t - tau;
                    if t >= stop {
                        self.velocity = Vector3::zeros();
                        self.motion = self.start_segment();
                    } else {
                        self.motion = Motion::Brake { start, dir, v0, tau: t };
                    }
                }
                Motion::Segment { start, tau } => {
                    let goal = self.path[self.next];
                    let delta = goal.position - start;
                    let length = delta.norm();
                    let total = trapezoid_duration(length, v, a);
                    // Absorb round-off from accumulated ticks.
                    let t = if tau + remaining >= total - 1e-9 {
                        total
                    } else {
                        tau + remaining
                    };
                    let step = t - tau;
                    let (s, speed) = trapezoid_state(length, v, a, t);
                    let dir = if length > 0.0 { delta / length } else { Vector3::zeros() };
                    self.position = start + dir * s;
                    self.velocity = dir * speed;
                    self.slew_yaw(goal.yaw, step);
                    remaining = (remaining - step).max(0.0);
                    if t >= total {
                        self.position = goal.position;
                        self.velocity = Vector3::zeros();
                        let yaw_err = wrap_angle(goal.yaw - self.yaw).abs();
                        if yaw_err <= self.limits.yaw_tolerance {
                            reached.push(self.next);
                            self.next += 1;
                            self.motion = self.start_segment();
                        } else {
                            // Hover while the heading catches up.
                            self.slew_yaw(goal.yaw, remaining);
                            self.motion = Motion::Segment { start, tau: t };
                            if wrap_angle(goal.yaw - self.yaw).abs() > self.limits.yaw_tolerance {
                                break;
                            }
                            remaining = 0.0;
                            reached.push(self.next);
                            self.next += 1;
                            self.motion = self.start_segment();
                        }
                    } else {
                        self.motion = Motion::Segment { start, tau: t };
                    }
                }
            }
        }
        reached
    }
}

/// Runs a follower over `wps` until it arrives or `max_time` elapses,
/// returning the state after every tick. Estimated pose equals true pose.
pub fn follow_waypoints(
    start: &UavState,
    wps: &[Waypoint],
    limits: &KinematicLimits,
    dt: f64,
    max_time: f64,
) -> Vec<UavState> {
    let mut f = WaypointFollower::new(start.true_pose.translation, start.true_pose.yaw(), *limits);
    f.velocity = start.velocity;
    f.set_path(wps.to_vec());
    let mut t = start.time;
    let mut out = Vec::new();
    while !f.is_done() && t - start.time < max_time {
        f.step(dt);
        t += dt;
        out.push(UavState {
            time: t,
            true_pose: f.pose(),
            velocity: f.velocity(),
            estimated_pose: f.pose(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn trapezoid_ten_meters() {
        assert_abs_diff_eq!(trapezoid_duration(10.0, 1.0, 1.0), 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(trapezoid_duration(0.25, 1.0, 1.0), 1.0, epsilon = 1e-12);
        assert_eq!(trapezoid_duration(0.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn follower_timing() {
        let start = UavState {
            time: 0.0,
            true_pose: PoseSE3::identity(),
            velocity: Vector3::zeros(),
            estimated_pose: PoseSE3::identity(),
        };
        let wp = Waypoint::new(Point3::new(10.0, 0.0, 0.0), 0.0);
        let run = follow_waypoints(&start, &[wp], &KinematicLimits::default(), 0.1, 100.0);
        assert_eq!(run.len(), 110);
        assert_abs_diff_eq!(run.last().unwrap().true_pose.translation, wp.position, epsilon = 1e-12);
        assert!(follow_waypoints(&start, &[], &KinematicLimits::default(), 0.1, 100.0).is_empty());
    }

    #[test]
    fn zero_length_segment_arrives() {
        let mut f = WaypointFollower::new(Point3::new(1.0, 2.0, 3.0), 0.0, KinematicLimits::default());
        f.set_path(vec![Waypoint::new(Point3::new(1.0, 2.0, 3.0), 0.0)]);
        assert_eq!(f.step(0.1), vec![0]);
        assert!(f.is_done());
    }

    #[test]
    fn retarget_brakes_within_limits() {
        let lim = KinematicLimits::default();
        let mut f = WaypointFollower::new(Point3::zeros(), 0.0, lim);
        f.set_path(vec![Waypoint::new(Point3::new(10.0, 0.0, 0.0), 0.0)]);
        for _ in 0..30 {
            f.step(0.1);
        }
        let mut v = f.velocity();
        f.set_path(vec![Waypoint::new(Point3::new(0.0, 5.0, 0.0), 0.0)]);
        for _ in 0..200 {
            f.step(0.1);
            assert!(f.velocity().norm() <= lim.v_max + 1e-12);
            assert!((f.velocity() - v).norm() <= lim.a_max * 0.1 + 1e-9);
            v = f.velocity();
        }
        assert!(f.is_done());
    }

    #[test]
    fn yaw_turn_holds_position() {
        let lim = KinematicLimits::default();
        let mut f = WaypointFollower::new(Point3::zeros(), 0.0, lim);
        f.set_path(vec![Waypoint::new(Point3::zeros(), std::f64::consts::PI)]);
        let mut ticks = 0;
        while !f.is_done() {
            f.step(0.1);
            ticks += 1;
            assert_eq!(f.position(), Point3::zeros());
        }
        // π at π/4 rad/s, within the 0.05 rad tolerance.
        assert!((39..=41).contains(&ticks), "{ticks}");
    }

    #[test]
    fn noiseless_detection_is_exact_box() {
        let cam = CameraRig::default();
        let mut rng = stream(1, "t");
        let t = TargetTruth::new(0, Point3::new(0.0, 0.0, 0.5), Vector3::new(0.5, 0.5, 0.5), 20, &mut rng).unwrap();
        // Hover so the optical axis passes through the target center.
        let h = 12.0;
        let pose = PoseSE3::from_yaw(0.0, Point3::new(-(h - 0.5) / cam.gamma.tan(), 0.0, h));
        let d = simulate_detector(
            std::slice::from_ref(&t),
            &pose,
            &cam,
            &NoiseModel::noiseless(),
            &mut rng,
        );
        assert_eq!(d.len(), 1);
        let exact = t.projected_box(&cam.world_to_camera(&pose), &cam).unwrap();
        assert_eq!(d[0].bbox, exact);
        assert_eq!(d[0].truth, Some(0));
        assert_abs_diff_eq!(exact.center().x, cam.cx, epsilon = 1e-9);
    }

    #[test]
    fn features_on_surface() {
        let mut rng = stream(2, "t");
        let t = TargetTruth::new(
            3,
            Point3::new(1.0, 2.0, 0.4),
            Vector3::new(0.3, 0.6, 0.4),
            200,
            &mut rng,
        )
        .unwrap();
        for f in &t.features {
            assert!(t.contains(f, 1e-12));
            let d = f - t.center;
            assert!((0..3).any(|k| (d[k].abs() - t.half_extents[k]).abs() < 1e-12));
        }
        assert!(TargetTruth::new(0, Point3::zeros(), Vector3::new(0.0, 1.0, 1.0), 5, &mut rng).is_err());
    }

    #[test]
    fn zero_sigma_pose_is_identity() {
        let p = PoseSE3::from_yaw(0.7, Point3::new(1.0, 2.0, 3.0));
        let q = perturb_pose(&p, &NoiseModel::noiseless(), &mut stream(0, "p"));
        assert_eq!(p, q);
    }
}
