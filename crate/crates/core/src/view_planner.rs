//! Search and fine-localization paths.
//!
//! The search path is a boustrophedon over an axis-aligned region at the
//! search altitude. Fine localization flies a circle at the same altitude
//! from which the camera, depressed by `gamma`, looks straight at the cloud
//! center; the next-best view is the circle point whose optical axis is
//! closest to the smallest principal axis of the cloud.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, CameraRig, Point3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("survey region is empty")]
    EmptyRegion,
    #[error("overlap must lie in [0, 1), got {0}")]
    InvalidOverlap(f64),
    #[error("search altitude {h_s} m must be above the target (z = {z_e} m)")]
    TargetAboveSearchPlane { h_s: f64, z_e: f64 },
    #[error("invalid planner input: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Point3,
    /// Heading about world z, in `(-π, π]`.
    pub yaw: f64,
}

impl Waypoint {
    pub fn new(position: Point3, yaw: f64) -> Self {
        Self {
            position,
            yaw: wrap_angle(yaw),
        }
    }

    /// Waypoint at `position` heading towards `target` in the horizontal plane.
    pub fn facing(position: Point3, target: &Point3) -> Self {
        let d = target - position;
        Self::new(position, d.y.atan2(d.x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewCircle {
    pub center: Point3,
    pub radius: f64,
}

impl ViewCircle {
    pub fn point_at(&self, azimuth: f64) -> Point3 {
        self.center + Vector3::new(azimuth.cos(), azimuth.sin(), 0.0) * self.radius
    }

    /// Azimuth of `p` about the circle center; 0 when `p` is on the axis.
    pub fn azimuth_of(&self, p: &Point3) -> f64 {
        let d = p - self.center;
        if d.x.hypot(d.y) < 1e-12 {
            0.0
        } else {
            d.y.atan2(d.x)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Region {
    pub fn is_empty(&self) -> bool {
        !(self.max_x > self.min_x && self.max_y > self.min_y)
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }
}

/// Ground footprint of the forward-tilted camera at a given altitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Footprint {
    /// Forward ground distance where the optical axis meets the ground.
    pub axis_distance: f64,
    /// Across-track width of the footprint at `axis_distance`.
    pub swath: f64,
}

pub fn footprint(cam: &CameraRig, altitude: f64) -> Footprint {
    let axis_distance = altitude / cam.gamma.tan();
    let slant = altitude / cam.gamma.sin();
    let half = cam.cx.min(cam.width - cam.cx) / cam.fx * slant;
    Footprint {
        axis_distance,
        swath: 2.0 * half,
    }
}

/// Boustrophedon rows along x covering `region` at altitude `h_s`.
///
/// Rows are offset backwards by the axis distance so the optical-axis
/// ground point sweeps the whole region length.
pub fn lawnmower_path(region: &Region, h_s: f64, cam: &CameraRig, overlap: f64) -> Result<Vec<Waypoint>, PlannerError> {
    if region.is_empty() {
        return Err(PlannerError::EmptyRegion);
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(PlannerError::InvalidOverlap(overlap));
    }
    if !(h_s > 0.0) {
        return Err(PlannerError::Invalid("search altitude must be positive".into()));
    }
    let fp = footprint(cam, h_s);
    let spacing = fp.swath * (1.0 - overlap);
    let width = region.max_y - region.min_y;
    let rows = if width <= fp.swath {
        1
    } else {
        ((width - fp.swath) / spacing - 1e-9).ceil() as usize + 1
    };
    let lateral: Vec<f64> = if rows == 1 {
        vec![0.5 * (region.min_y + region.max_y)]
    } else {
        let first = region.min_y + 0.5 * fp.swath;
        let step = (width - fp.swath) / (rows - 1) as f64;
        (0..rows).map(|k| first + k as f64 * step).collect()
    };

    let d = fp.axis_distance;
    let mut out = Vec::with_capacity(2 * rows);
    for (k, y) in lateral.into_iter().enumerate() {
        if k % 2 == 0 {
            out.push(Waypoint::new(Point3::new(region.min_x - d, y, h_s), 0.0));
            out.push(Waypoint::new(Point3::new(region.max_x - d, y, h_s), 0.0));
        } else {
            out.push(Waypoint::new(
                Point3::new(region.max_x + d, y, h_s),
                std::f64::consts::PI,
            ));
            out.push(Waypoint::new(
                Point3::new(region.min_x + d, y, h_s),
                std::f64::consts::PI,
            ));
        }
    }
    Ok(out)
}

/// Circle at the search altitude from which `c_e` is seen at depression `gamma`.
pub fn fine_localization_circle(c_e: &Point3, h_s: f64, gamma: f64) -> Result<ViewCircle, PlannerError> {
    if !(h_s > c_e.z) {
        return Err(PlannerError::TargetAboveSearchPlane { h_s, z_e: c_e.z });
    }
    if !(gamma > 0.0 && gamma < std::f64::consts::FRAC_PI_2) {
        return Err(PlannerError::Invalid("gamma must lie in (0, pi/2)".into()));
    }
    Ok(ViewCircle {
        center: Point3::new(c_e.x, c_e.y, h_s),
        radius: (h_s - c_e.z) / gamma.tan(),
    })
}

/// Unsigned angle between the optical axis at `position` (aimed at `c_e`)
/// and the line spanned by `axis`.
pub fn view_axis_angle(position: &Point3, c_e: &Point3, axis: &Vector3<f64>) -> f64 {
    let optical = (c_e - position).normalize();
    optical.dot(&axis.normalize()).abs().min(1.0).acos()
}

/// Next-best-view pose on `circle` for smallest principal axis `v_min`.
pub fn next_best_view(circle: &ViewCircle, v_min: &Vector3<f64>, current: &Waypoint, c_e: &Point3) -> Waypoint {
    let v = if v_min.z < 0.0 { -v_min } else { *v_min };
    let horizontal = Vector2::new(v.x, v.y);
    let azimuth = if horizontal.norm() < 1e-9 {
        // Vertical axis: every azimuth is equivalent, stay where we are.
        circle.azimuth_of(&current.position)
    } else if v.z <= 0.0 {
        // Horizontal axis: farthest circle point from the current position.
        let d = current.position - circle.center;
        if d.x.hypot(d.y) < 1e-12 {
            0.0
        } else {
            d.y.atan2(d.x) + std::f64::consts::PI
        }
    } else {
        horizontal.y.atan2(horizontal.x)
    };
    Waypoint::facing(circle.point_at(azimuth), c_e)
}

/// On-circle waypoints from `start_azimuth` sweeping `sweep` radians (sign
/// gives direction) at `step`, excluding the start and including the end.
pub fn orbit_waypoints(circle: &ViewCircle, c_e: &Point3, start_azimuth: f64, sweep: f64, step: f64) -> Vec<Waypoint> {
    let step = step.abs().max(1e-6);
    let mut out = Vec::new();
    let mut k = 1;
    while (k as f64) * step < sweep.abs() - 1e-9 {
        let az = start_azimuth + sweep.signum() * k as f64 * step;
        out.push(Waypoint::facing(circle.point_at(az), c_e));
        k += 1;
    }
    if sweep.abs() > 1e-12 {
        out.push(Waypoint::facing(circle.point_at(start_azimuth + sweep), c_e));
    }
    out
}

/// Current pose, the closest circle point, then the shorter arc to `nbv`.
pub fn arc_path(
    current: &Waypoint,
    nbv: &Waypoint,
    circle: &ViewCircle,
    c_e: &Point3,
    angular_step: f64,
) -> Vec<Waypoint> {
    let mut path = vec![*current];
    if (current.position - nbv.position).norm() < 1e-6 {
        return path;
    }
    let d = current.position - circle.center;
    let start_az = if d.x.hypot(d.y) < 1e-12 {
        circle.azimuth_of(&nbv.position)
    } else {
        d.y.atan2(d.x)
    };
    let closest = Waypoint::facing(circle.point_at(start_az), c_e);
    if (closest.position - current.position).norm() > 1e-6 {
        path.push(closest);
    }
    let sweep = wrap_angle(circle.azimuth_of(&nbv.position) - start_az);
    let mut arc = orbit_waypoints(circle, c_e, start_az, sweep, angular_step);
    if let Some(last) = arc.last_mut() {
        *last = *nbv;
    }
    path.extend(arc);
    path
}
