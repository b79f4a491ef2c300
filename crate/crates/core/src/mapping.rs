//! Mapping path: a vertical cylinder around the converged cloud and a stack
//! of horizontal orbits whose vertical scan bands tile its height.
//!
//! From an orbit at altitude `z`, with horizontal standoff `d` to the
//! cylinder surface, the camera sees the surface band
//! `[z - d·tan(γ + β/2), z - d·tan(γ - β/2)]`.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraRig, Point3, PoseSE3};
use crate::localizer::ParticleSet;
use crate::view_planner::Waypoint;

/// Smallest cylinder radius the fit will report, meters.
pub const MIN_RADIUS: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("need at least 2 points to fit a cylinder, got {0}")]
    TooFewPoints(usize),
    #[error("points have zero vertical extent (z = {0})")]
    DegenerateCylinder(f64),
    #[error(
        "mapping geometry requires 0 < gamma - beta/2 and gamma + beta/2 < pi/2 \
         (gamma = {gamma:.4}, beta = {beta:.4})"
    )]
    InvalidScanGeometry { gamma: f64, beta: f64 },
    #[error("standoff r_m must be positive, got {0}")]
    InvalidStandoff(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub axis_xy: Vector2<f64>,
    pub z_bottom: f64,
    pub z_top: f64,
    pub radius: f64,
}

impl Cylinder {
    pub fn height(&self) -> f64 {
        self.z_top - self.z_bottom
    }

    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        let r = (Vector2::new(p.x, p.y) - self.axis_xy).norm();
        r <= self.radius + tol && p.z >= self.z_bottom - tol && p.z <= self.z_top + tol
    }
}

/// Vertical cylinder through the cloud mean enclosing every point.
pub fn fit_cylinder(ps: &ParticleSet) -> Result<Cylinder, MappingError> {
    if ps.len() < 2 {
        return Err(MappingError::TooFewPoints(ps.len()));
    }
    let mean = ps.mean();
    let axis_xy = Vector2::new(mean.x, mean.y);
    let (mut z_bottom, mut z_top, mut radius) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for p in &ps.points {
        z_bottom = z_bottom.min(p.z);
        z_top = z_top.max(p.z);
        radius = radius.max((Vector2::new(p.x, p.y) - axis_xy).norm());
    }
    if !(z_top > z_bottom) {
        return Err(MappingError::DegenerateCylinder(z_bottom));
    }
    Ok(Cylinder {
        axis_xy,
        z_bottom,
        z_top,
        radius: radius.max(MIN_RADIUS),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanCircle {
    pub center: Point3,
    pub radius: f64,
    pub waypoints: Vec<Waypoint>,
}

impl ScanCircle {
    pub fn altitude(&self) -> f64 {
        self.center.z
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    /// Orbits in increasing altitude.
    pub circles: Vec<ScanCircle>,
    /// Steeper scan ray, `γ + β/2`.
    pub gamma_low: f64,
    /// Shallower scan ray, `γ - β/2`.
    pub gamma_high: f64,
    pub standoff: f64,
    /// Altitude step between orbits.
    pub band_step: f64,
}

impl ScanPlan {
    /// Vertical surface band seen from an orbit at `altitude`.
    pub fn band(&self, altitude: f64) -> (f64, f64) {
        (
            altitude - self.standoff * self.gamma_low.tan(),
            altitude - self.standoff * self.gamma_high.tan(),
        )
    }

    /// Fills every orbit with `n` evenly spaced waypoints starting at
    /// `start_azimuth`, so consecutive orbits line up.
    pub fn populate_waypoints(&mut self, n: usize, start_azimuth: f64) {
        for c in &mut self.circles {
            c.waypoints = circle_waypoints(c, n, &Vector2::new(c.center.x, c.center.y), start_azimuth);
        }
    }

    pub fn waypoints(&self) -> impl Iterator<Item = &Waypoint> {
        self.circles.iter().flat_map(|c| c.waypoints.iter())
    }
}

/// Number of orbits needed to cover height `h` with band step `step`.
pub fn circle_count(h: f64, step: f64) -> usize {
    ((h / step).ceil() as usize).max(1)
}

pub fn scan_circles(cyl: &Cylinder, cam: &CameraRig, r_m: f64) -> Result<ScanPlan, MappingError> {
    let gamma_high = cam.gamma - 0.5 * cam.beta;
    let gamma_low = cam.gamma + 0.5 * cam.beta;
    if !(gamma_high > 0.0 && gamma_low < std::f64::consts::FRAC_PI_2) {
        return Err(MappingError::InvalidScanGeometry {
            gamma: cam.gamma,
            beta: cam.beta,
        });
    }
    if !(r_m > 0.0) {
        return Err(MappingError::InvalidStandoff(r_m));
    }
    let d = r_m;
    let step = d * (gamma_low.tan() - gamma_high.tan());
    let first = cyl.z_bottom + d * gamma_low.tan();
    let n = circle_count(cyl.height(), step);
    let radius = cyl.radius + r_m;
    let circles = (0..n)
        .map(|k| ScanCircle {
            center: Point3::new(cyl.axis_xy.x, cyl.axis_xy.y, first + k as f64 * step),
            radius,
            waypoints: Vec::new(),
        })
        .collect();
    Ok(ScanPlan {
        circles,
        gamma_low,
        gamma_high,
        standoff: r_m,
        band_step: step,
    })
}

/// `n` waypoints around `circle`, each facing the cylinder axis.
pub fn circle_waypoints(circle: &ScanCircle, n: usize, axis_xy: &Vector2<f64>, start_azimuth: f64) -> Vec<Waypoint> {
    let n = n.max(4);
    let axis = Point3::new(axis_xy.x, axis_xy.y, circle.center.z);
    (0..n)
        .map(|k| {
            let az = start_azimuth + std::f64::consts::TAU * k as f64 / n as f64;
            let p = circle.center + Point3::new(az.cos(), az.sin(), 0.0) * circle.radius;
            Waypoint::facing(p, &axis)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleCoverage {
    pub altitude: f64,
    pub covered_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub covered_fraction: f64,
    pub samples: usize,
    pub circles: Vec<CircleCoverage>,
    pub uncovered: Vec<[f64; 3]>,
}

/// Deterministic, evenly spread samples on the cylinder's lateral surface:
/// golden-ratio azimuths, stratified heights.
pub fn surface_samples(cyl: &Cylinder, n: usize) -> Vec<(Point3, Vector2<f64>)> {
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    (0..n)
        .map(|i| {
            let az = std::f64::consts::TAU * (i as f64 * golden).fract();
            let z = cyl.z_bottom + cyl.height() * (i as f64 + 0.5) / n as f64;
            let normal = Vector2::new(az.cos(), az.sin());
            let xy = cyl.axis_xy + normal * cyl.radius;
            (Point3::new(xy.x, xy.y, z), normal)
        })
        .collect()
}

/// Whether a waypoint's camera sees surface point `p` (outward normal
/// `normal`) inside the vertical scan band and the horizontal field of view.
pub fn sees(w: &Waypoint, cam: &CameraRig, p: &Point3, normal: &Vector2<f64>) -> bool {
    let to_cam = w.position - p;
    if Vector2::new(to_cam.x, to_cam.y).dot(normal) <= 0.0 {
        return false;
    }
    let pc = cam
        .world_to_camera(&PoseSE3::from_yaw(w.yaw, w.position))
        .transform_point(p);
    if !(pc.z > 0.0) {
        return false;
    }
    let vertical = pc.y.atan2(pc.z);
    let horizontal = pc.x.atan2(pc.z);
    vertical.abs() <= 0.5 * cam.beta + 1e-9 && horizontal.abs() <= 0.5 * cam.horizontal_fov()
}

pub fn coverage_check(plan: &ScanPlan, cam: &CameraRig, cyl: &Cylinder, n_surface_samples: usize) -> CoverageReport {
    let samples = surface_samples(cyl, n_surface_samples);
    let mut per_circle = vec![0usize; plan.circles.len()];
    let mut covered = 0usize;
    let mut uncovered = Vec::new();
    for (p, normal) in &samples {
        let mut seen = false;
        for (k, c) in plan.circles.iter().enumerate() {
            if c.waypoints.iter().any(|w| sees(w, cam, p, normal)) {
                per_circle[k] += 1;
                seen = true;
            }
        }
        if seen {
            covered += 1;
        } else {
            uncovered.push([p.x, p.y, p.z]);
        }
    }
    let n = samples.len().max(1) as f64;
    let any_waypoints = plan.circles.iter().any(|c| !c.waypoints.is_empty());
    CoverageReport {
        covered_fraction: if any_waypoints { covered as f64 / n } else { 0.0 },
        samples: samples.len(),
        circles: plan
            .circles
            .iter()
            .zip(per_circle)
            .map(|(c, k)| CircleCoverage {
                altitude: c.altitude(),
                covered_fraction: k as f64 / n,
            })
            .collect(),
        uncovered,
    }
}
