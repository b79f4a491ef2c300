//! Scenario configuration: JSON text, parsed with field paths in errors and
//! validated before any simulation starts.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::MissionError;
use crate::geometry::{CameraRig, Point3};
use crate::localizer::LocalizerConfig;
use crate::sim::{KinematicLimits, NoiseModel};
use crate::tracker::TrackerConfig;
use crate::view_planner::Region;

/// Camera intrinsics with angles in degrees, as written in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
    pub gamma_deg: f64,
    pub beta_deg: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        let c = CameraRig::default();
        Self {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
            gamma_deg: c.gamma.to_degrees(),
            beta_deg: c.beta.to_degrees(),
        }
    }
}

impl CameraSpec {
    pub fn rig(&self) -> CameraRig {
        CameraRig {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
            gamma: self.gamma_deg.to_radians(),
            beta: self.beta_deg.to_radians(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    #[serde(default = "default_features")]
    pub features: usize,
}

fn default_features() -> usize {
    40
}

impl TargetSpec {
    /// Box resting on the ground plane at `(x, y)`.
    pub fn on_ground(x: f64, y: f64, half_extents: [f64; 3]) -> Self {
        Self {
            center: [x, y, half_extents[2]],
            half_extents,
            features: default_features(),
        }
    }

    pub fn center(&self) -> Point3 {
        Point3::from(self.center)
    }

    pub fn half_extents(&self) -> Vector3<f64> {
        Vector3::from(self.half_extents)
    }
}

/// Knobs of the mission state machine and its planners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionParams {
    /// Side overlap of adjacent search rows, fraction of the swath.
    pub overlap: f64,
    /// Mapping standoff from the cylinder surface, meters.
    pub r_m: f64,
    pub n_per_circle: usize,
    /// Waypoint spacing on the fine-localization circle, degrees.
    pub arc_step_deg: f64,
    /// Full circle laps flown past the next-best view before giving up.
    pub max_laps: f64,
    /// Track updates required before a box may seed a particle set.
    pub min_track_updates: u32,
    /// A particle set is only updated once the bearing from the camera to
    /// its mean has turned by this much since its last update, degrees.
    pub min_view_change_deg: f64,
    pub coverage_samples: usize,
    /// Upper bound on simulated time, seconds.
    pub max_sim_time: f64,
}

impl Default for MissionParams {
    fn default() -> Self {
        Self {
            overlap: 0.1,
            r_m: 3.0,
            n_per_circle: 36,
            arc_step_deg: 15.0,
            max_laps: 2.0,
            min_track_updates: 3,
            min_view_change_deg: 6.0,
            coverage_samples: 10_000,
            max_sim_time: 3600.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    /// Search altitude, meters above the ground plane.
    pub h_s: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub region: Region,
    /// Start position; defaults to the first search waypoint.
    #[serde(default)]
    pub start: Option<[f64; 3]>,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub camera: CameraSpec,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub localizer: LocalizerConfig,
    #[serde(default)]
    pub limits: KinematicLimits,
    #[serde(default)]
    pub mission: MissionParams,
}

fn default_dt() -> f64 {
    0.1
}

impl ScenarioConfig {
    /// One target near the middle of a 40 m × 30 m search region.
    pub fn default_single_target() -> Self {
        let h_s = 12.0;
        Self {
            seed: 0,
            h_s,
            dt: default_dt(),
            region: Region {
                min_x: 0.0,
                min_y: 0.0,
                max_x: 40.0,
                max_y: 30.0,
            },
            start: None,
            targets: vec![TargetSpec::on_ground(22.0, 9.0, [0.35, 0.3, 0.4])],
            camera: CameraSpec::default(),
            noise: NoiseModel::default(),
            tracker: TrackerConfig::default(),
            localizer: LocalizerConfig {
                d_m: 2.0 * h_s,
                ..LocalizerConfig::default()
            },
            limits: KinematicLimits::default(),
            mission: MissionParams::default(),
        }
    }

    /// Two well-separated targets on different search rows.
    pub fn default_two_targets() -> Self {
        let mut cfg = Self::default_single_target();
        cfg.targets = vec![
            TargetSpec::on_ground(14.0, 8.0, [0.35, 0.3, 0.4]),
            TargetSpec::on_ground(28.0, 23.0, [0.3, 0.35, 0.4]),
        ];
        cfg
    }

    /// Parses JSON text. Errors name the offending field path and position.
    /// An absent `localizer.d_m` defaults to twice the search altitude.
    pub fn from_json(text: &str) -> Result<Self, MissionError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| MissionError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| MissionError::Parse {
            path: ".".into(),
            message: e.to_string(),
        })?;
        if raw.pointer("/localizer/d_m").is_none() {
            cfg.localizer.d_m = 2.0 * cfg.h_s;
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), MissionError> {
        let invalid = |s: String| Err(MissionError::Validation(s));
        let cam = self.camera.rig();
        cam.validate().map_err(|e| MissionError::Validation(e.to_string()))?;
        let half_beta = 0.5 * cam.beta;
        if cam.gamma - half_beta <= 0.0 {
            return invalid(format!(
                "mapping geometry: gamma ({:.2} deg) must exceed beta/2 ({:.2} deg) so the upper scan ray looks downward",
                self.camera.gamma_deg,
                0.5 * self.camera.beta_deg
            ));
        }
        if cam.gamma + half_beta >= std::f64::consts::FRAC_PI_2 {
            return invalid(format!(
                "mapping geometry: gamma + beta/2 ({:.2} deg) must stay below 90 deg",
                self.camera.gamma_deg + 0.5 * self.camera.beta_deg
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if self.region.is_empty() {
            return invalid("search region is empty".into());
        }
        if !(self.h_s > 0.0 && self.h_s.is_finite()) {
            return invalid(format!(
                "search altitude h_s = {} m is not above the terrain (z = 0)",
                self.h_s
            ));
        }
        if let Some(s) = self.start {
            if !(s[2] > 0.0) {
                return invalid(format!("start altitude {} m is not above the terrain", s[2]));
            }
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !t.half_extents.iter().all(|h| *h > 0.0 && h.is_finite()) {
                return invalid(format!("targets[{i}]: half_extents must be positive"));
            }
            if !t.center.iter().all(|c| c.is_finite()) {
                return invalid(format!("targets[{i}]: center must be finite"));
            }
            let bottom = t.center[2] - t.half_extents[2];
            let top = t.center[2] + t.half_extents[2];
            if bottom < -1e-9 {
                return invalid(format!("targets[{i}]: bottom at z = {bottom} m is below the terrain"));
            }
            if top >= self.h_s {
                return invalid(format!("targets[{i}]: top at z = {top} m reaches the search altitude"));
            }
        }
        self.noise
            .validate()
            .map_err(|e| MissionError::Validation(e.to_string()))?;
        self.limits
            .validate()
            .map_err(|e| MissionError::Validation(e.to_string()))?;
        self.tracker
            .validate()
            .map_err(|e| MissionError::Validation(format!("tracker: {e}")))?;
        self.localizer
            .validate()
            .map_err(|e| MissionError::Validation(format!("localizer: {e}")))?;
        let m = &self.mission;
        if !(0.0..1.0).contains(&m.overlap) {
            return invalid(format!("mission.overlap must lie in [0, 1), got {}", m.overlap));
        }
        if !(m.r_m > 0.0) {
            return invalid(format!("mission.r_m must be positive, got {}", m.r_m));
        }
        if m.n_per_circle < 4 {
            return invalid(format!(
                "mission.n_per_circle must be at least 4, got {}",
                m.n_per_circle
            ));
        }
        if !(m.arc_step_deg > 0.0 && m.arc_step_deg <= 90.0) {
            return invalid(format!(
                "mission.arc_step_deg must lie in (0, 90], got {}",
                m.arc_step_deg
            ));
        }
        if !(m.max_laps > 0.0) {
            return invalid(format!("mission.max_laps must be positive, got {}", m.max_laps));
        }
        if !(m.min_view_change_deg >= 0.0 && m.min_view_change_deg < 90.0) {
            return invalid(format!(
                "mission.min_view_change_deg must lie in [0, 90), got {}",
                m.min_view_change_deg
            ));
        }
        if m.coverage_samples == 0 {
            return invalid("mission.coverage_samples must be positive".into());
        }
        if !(m.max_sim_time > 0.0) {
            return invalid(format!("mission.max_sim_time must be positive, got {}", m.max_sim_time));
        }
        Ok(())
    }
}
