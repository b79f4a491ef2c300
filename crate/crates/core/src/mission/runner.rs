use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::logs::{FlownRecord, MetricRecord, PlanRecord, RunLogs, TransitionRecord, TruthRecord};
use super::{MissionError, MissionMode, MissionState, ScenarioConfig};
use crate::exec::Exec;
use crate::geometry::{cone_normals, BBox, CameraRig, Point3, PoseSE3};
use crate::localizer::{
    dedupe_hypotheses, enlarge, generate_particles_exec, needs_new_particle_set, LocalizationStatus, ParticleSet,
    ParticleSnapshot, TargetHypothesis,
};
use crate::mapping::{coverage_check, fit_cylinder, scan_circles, CoverageReport, Cylinder};
use crate::rng::{particle_stream, stream, SimRng};
use crate::sim::{perturb_pose, simulate_detector, simulate_klt_in_box, TargetTruth, WaypointFollower};
use crate::tracker::{estimate_similarity, BoxTracker, TrackId};
use crate::view_planner::{
    arc_path, fine_localization_circle, lawnmower_path, next_best_view, orbit_waypoints, Waypoint,
};

/// A mapped hypothesis counts as finding a target when its mean lies
/// within this distance of the true center, meters.
pub const FOUND_GATE: f64 = 2.0;

/// Boxes closer than this to the image border are not used to localize:
/// a clipped box no longer bounds the whole target.
const BORDER_MARGIN: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Also snapshot every particle set at each mode transition and at the end.
    pub dump_particles: bool,
    pub exec: Exec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetOutcome {
    Pending,
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub id: u64,
    pub outcome: TargetOutcome,
    pub status: LocalizationStatus,
    pub mean: [f64; 3],
    pub eigenvalues: [f64; 3],
    pub initial_lambda_max: f64,
    pub updates: u32,
    pub starved_updates: u32,
    /// Distance flown while finely localizing over the length of the arc
    /// to the next-best view; above 1 when extra laps were needed.
    pub arc_fraction: Option<f64>,
    pub cylinder: Option<Cylinder>,
    pub coverage: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub target_id: u64,
    pub center: [f64; 3],
    pub hypothesis_id: Option<u64>,
    pub localization_error: Option<f64>,
    pub initial_lambda_max: Option<f64>,
    pub final_eigenvalues: Option<[f64; 3]>,
    pub updates: u32,
    pub coverage: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub frames: u64,
    /// Simulated seconds.
    pub mission_duration: f64,
    pub distance_flown: f64,
    pub targets_total: usize,
    pub targets_found: usize,
    pub timed_out: bool,
    pub targets: Vec<TargetReport>,
    pub hypotheses: Vec<HypothesisReport>,
    pub transitions: Vec<TransitionRecord>,
}

impl RunReport {
    pub fn all_found(&self) -> bool {
        self.targets_found == self.targets_total && !self.timed_out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub logs: RunLogs,
}

/// What one tick changed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TickEvents {
    pub transition: Option<TransitionRecord>,
    pub updated_hypotheses: Vec<u64>,
    pub spawned_hypotheses: Vec<u64>,
    pub finished: bool,
}

struct Hyp {
    h: TargetHypothesis,
    outcome: TargetOutcome,
    /// Unit bearing from the camera to the cloud mean at the last update.
    last_view: Option<nalgebra::Vector3<f64>>,
    arc_fraction: Option<f64>,
    cylinder: Option<Cylinder>,
    coverage: Option<f64>,
}

impl Hyp {
    fn is_pending(&self) -> bool {
        self.outcome == TargetOutcome::Pending
    }

    /// Region around a finished hypothesis inside which new evidence is
    /// attributed to it and ignored.
    fn suppression(&self) -> Option<(Point3, f64)> {
        match self.outcome {
            TargetOutcome::Pending => None,
            _ => {
                let pca = self.h.pca();
                let r = match &self.cylinder {
                    Some(c) => 2.0 * c.radius,
                    None => (2.0 * pca.lambda_max().sqrt()).max(1.0),
                };
                Some((pca.mean, r))
            }
        }
    }
}

struct Observation {
    frame: u64,
    prev_true_w2c: Option<PoseSE3>,
    true_w2c: PoseSE3,
    est_pose: PoseSE3,
    detections: Vec<BBox>,
}

struct FineContext {
    arc_length: f64,
    flown: f64,
}

/// The mission: world, vehicle, estimators and the mode state machine.
pub struct Mission {
    cfg: ScenarioConfig,
    cam: CameraRig,
    opts: RunOptions,
    truth: Vec<TargetTruth>,
    search: Vec<Waypoint>,
    /// Offset of the follower's path within `search` while searching.
    search_base: usize,
    follower: WaypointFollower,
    tracker: BoxTracker,
    hyps: Vec<Hyp>,
    next_hyp: u64,
    state: MissionState,
    fine: Option<FineContext>,
    frame: u64,
    time: f64,
    distance: f64,
    prev_true_w2c: Option<PoseSE3>,
    queue: VecDeque<Observation>,
    rng_detector: SimRng,
    rng_klt: SimRng,
    rng_pose: SimRng,
    plan_seq: u64,
    finished: bool,
    timed_out: bool,
    transitions: Vec<TransitionRecord>,
    logs: RunLogs,
}

impl Mission {
    /// Validates `cfg` and builds the world with `seed`.
    pub fn new(cfg: &ScenarioConfig, seed: u64, opts: RunOptions) -> Result<Self, MissionError> {
        cfg.validate()?;
        let cfg = &ScenarioConfig { seed, ..cfg.clone() };
        let cam = cfg.camera.rig();
        let mut rng_world = stream(seed, "world");
        let truth = cfg
            .targets
            .iter()
            .enumerate()
            .map(|(i, t)| TargetTruth::new(i as u64, t.center(), t.half_extents(), t.features, &mut rng_world))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| MissionError::Validation(e.to_string()))?;
        let search = lawnmower_path(&cfg.region, cfg.h_s, &cam, cfg.mission.overlap)
            .map_err(|e| MissionError::Validation(e.to_string()))?;
        let start = cfg.start.map(Point3::from).unwrap_or(search[0].position);
        let mut follower = WaypointFollower::new(start, search[0].yaw, cfg.limits);
        follower.set_path(search.clone());

        let truth_log = truth
            .iter()
            .map(|t| TruthRecord {
                target_id: t.id,
                x: t.center.x,
                y: t.center.y,
                z: t.center.z,
                half_x: t.half_extents.x,
                half_y: t.half_extents.y,
                half_z: t.half_extents.z,
            })
            .collect();
        let mut m = Self {
            cfg: cfg.clone(),
            cam,
            opts,
            truth,
            search: search.clone(),
            search_base: 0,
            follower,
            tracker: BoxTracker::new(cfg.tracker.clone()),
            hyps: Vec::new(),
            next_hyp: 1,
            state: MissionState {
                mode: MissionMode::Search,
                active_target: None,
                resume_waypoint_index: 0,
            },
            fine: None,
            frame: 0,
            time: 0.0,
            distance: 0.0,
            prev_true_w2c: None,
            queue: VecDeque::new(),
            rng_detector: stream(seed, "detector"),
            rng_klt: stream(seed, "klt"),
            rng_pose: stream(seed, "pose"),
            plan_seq: 0,
            finished: false,
            timed_out: false,
            transitions: Vec::new(),
            logs: RunLogs {
                truth: truth_log,
                ..RunLogs::default()
            },
        };
        m.log_plan("search", Some(start), &search);
        Ok(m)
    }

    pub fn state(&self) -> MissionState {
        self.state
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn search_path(&self) -> &[Waypoint] {
        &self.search
    }

    pub fn follower(&self) -> &WaypointFollower {
        &self.follower
    }

    pub fn truth(&self) -> &[TargetTruth] {
        &self.truth
    }

    pub fn hypotheses(&self) -> impl Iterator<Item = (&TargetHypothesis, &TargetOutcome)> {
        self.hyps.iter().map(|h| (&h.h, &h.outcome))
    }

    fn log_plan(&mut self, phase: &str, departure: Option<Point3>, wps: &[Waypoint]) {
        if let Some(p) = departure {
            self.logs.plans.push(PlanRecord {
                phase: format!("{phase}_departure"),
                seq: self.plan_seq,
                x: p.x,
                y: p.y,
                z: p.z,
                yaw: self.follower.yaw(),
            });
            self.plan_seq += 1;
        }
        for w in wps {
            self.logs.plans.push(PlanRecord {
                phase: phase.to_owned(),
                seq: self.plan_seq,
                x: w.position.x,
                y: w.position.y,
                z: w.position.z,
                yaw: w.yaw,
            });
            self.plan_seq += 1;
        }
    }

    fn set_path(&mut self, phase: &str, wps: Vec<Waypoint>) {
        let departure = self.follower.stopping_point();
        self.log_plan(phase, Some(departure), &wps);
        self.follower.set_path(wps);
    }

    fn transition(&mut self, to: MissionMode, target: Option<u64>, events: &mut TickEvents) {
        let rec = TransitionRecord {
            frame: self.frame,
            t: self.time,
            from: self.state.mode,
            to,
            target_id: target.or(self.state.active_target),
        };
        self.state.mode = to;
        self.state.active_target = if to == MissionMode::Search { None } else { target };
        if self.opts.dump_particles {
            for h in &self.hyps {
                self.logs.snapshots.push(ParticleSnapshot::of(&h.h, self.frame));
            }
        }
        self.transitions.push(rec.clone());
        events.transition = Some(rec);
    }

    fn hyp_index(&self, id: u64) -> Option<usize> {
        self.hyps.iter().position(|h| h.h.id() == id)
    }

    /// Advances the simulation by one time step.
    pub fn tick(&mut self) -> TickEvents {
        let mut events = TickEvents::default();
        if self.finished {
            events.finished = true;
            return events;
        }
        let dt = self.cfg.dt;
        let v_before = self.follower.velocity();
        let p_before = self.follower.position();
        self.follower.step(dt);
        self.frame += 1;
        self.time = self.frame as f64 * dt;
        self.distance += (self.follower.position() - p_before).norm();
        let lim = self.follower.limits();
        assert!(
            self.follower.velocity().norm() <= lim.v_max + 1e-9,
            "speed limit violated at frame {}",
            self.frame
        );
        assert!(
            (self.follower.velocity() - v_before).norm() <= lim.a_max * dt + 1e-9,
            "acceleration limit violated at frame {}",
            self.frame
        );
        if let Some(f) = self.fine.as_mut() {
            f.flown += (self.follower.position() - p_before).norm();
        }
        let pos = self.follower.position();
        self.logs.flown.push(FlownRecord {
            frame: self.frame,
            t: self.time,
            x: pos.x,
            y: pos.y,
            z: pos.z,
            yaw: self.follower.yaw(),
            mode: self.state.mode,
        });

        self.observe();
        if self.queue.len() > self.cfg.noise.detection_latency_frames as usize {
            if let Some(obs) = self.queue.pop_front() {
                self.perceive(obs, &mut events);
            }
        }
        self.advance_state(&mut events);

        if !self.finished && self.time >= self.cfg.mission.max_sim_time {
            self.finished = true;
            self.timed_out = true;
        }
        events.finished = self.finished;
        events
    }

    fn observe(&mut self) {
        let true_pose = self.follower.pose();
        let true_w2c = self.cam.world_to_camera(&true_pose);
        let est_pose = perturb_pose(&true_pose, &self.cfg.noise, &mut self.rng_pose);
        let detections = simulate_detector(
            &self.truth,
            &true_pose,
            &self.cam,
            &self.cfg.noise,
            &mut self.rng_detector,
        )
        .into_iter()
        .map(|d| d.bbox)
        .collect();
        self.queue.push_back(Observation {
            frame: self.frame,
            prev_true_w2c: self.prev_true_w2c,
            true_w2c,
            est_pose,
            detections,
        });
        self.prev_true_w2c = Some(true_w2c);
    }

    fn perceive(&mut self, obs: Observation, events: &mut TickEvents) {
        let image = self.cam.image_box();
        let (truth, cam, noise, rng) = (&self.truth, &self.cam, &self.cfg.noise, &mut self.rng_klt);
        let outcome = self.tracker.step(obs.frame, &obs.detections, &image, |t| {
            let prev = obs.prev_true_w2c?;
            let (a, b) = simulate_klt_in_box(truth, &t.u, &prev, &obs.true_w2c, cam, noise, rng)?;
            estimate_similarity(&a, &b).ok()
        });
        self.logs.tracks.extend(self.tracker.log_records(obs.frame));

        if self.state.mode == MissionMode::Map {
            return;
        }
        let w2c = self.cam.world_to_camera(&obs.est_pose);
        let c2w = w2c.inverse();
        let mut updated: Vec<TrackId> = outcome.updated.clone();
        updated.sort_unstable();
        for id in updated {
            let Some(track) = self.tracker.get(id) else {
                continue;
            };
            if track.hits < self.cfg.mission.min_track_updates {
                continue;
            }
            let x = track.u;
            let near_border = x.u_min < image.u_min + BORDER_MARGIN
                || x.v_min < image.v_min + BORDER_MARGIN
                || x.u_max > image.u_max - BORDER_MARGIN
                || x.v_max > image.v_max - BORDER_MARGIN;
            if near_border {
                continue;
            }
            self.localize_box(&x, &w2c, &c2w, obs.frame, events);
        }
        if self.state.mode == MissionMode::Search {
            self.prune_hypotheses();
        }
    }

    fn localize_box(&mut self, x: &BBox, w2c: &PoseSE3, c2w: &PoseSE3, frame: u64, events: &mut TickEvents) {
        let lcfg = &self.cfg.localizer;
        let Ok(enlarged) = enlarge(x, lcfg.enlarge_factor) else {
            return;
        };
        let corners = enlarged.corners_clockwise();
        let Ok(cone) = cone_normals(&corners, &self.cam) else {
            return;
        };
        let suppressed = self
            .hyps
            .iter()
            .filter_map(|h| h.suppression())
            .any(|(c, _)| cone.contains(&w2c.transform_point(&c)));
        if suppressed {
            return;
        }
        let sets: Vec<ParticleSet> = self.hyps.iter().map(|h| h.h.set.clone()).collect();
        let matched = needs_new_particle_set(&sets, &cone, w2c);
        if matched.is_empty() {
            if self.state.mode != MissionMode::Search {
                return;
            }
            let id = self.next_hyp;
            self.next_hyp += 1;
            let mut rng = particle_stream(self.cfg.seed, id);
            if let Ok(set) =
                generate_particles_exec(&corners, c2w, &self.cam, lcfg, id, frame, &mut rng, self.opts.exec)
            {
                self.hyps.push(Hyp {
                    h: TargetHypothesis::new(set, rng),
                    outcome: TargetOutcome::Pending,
                    last_view: None,
                    arc_fraction: None,
                    cylinder: None,
                    coverage: None,
                });
                events.spawned_hypotheses.push(id);
            }
            return;
        }
        let min_view_change = self.cfg.mission.min_view_change_deg.to_radians();
        let camera = c2w.translation;
        for i in matched {
            let hyp = &mut self.hyps[i];
            if !hyp.is_pending() {
                continue;
            }
            let allowed = match self.state.mode {
                MissionMode::Search => true,
                _ => self.state.active_target == Some(hyp.h.id()),
            };
            if !allowed {
                continue;
            }
            let bearing = (hyp.h.set.mean() - camera).normalize();
            if hyp
                .last_view
                .is_some_and(|v| v.dot(&bearing).clamp(-1.0, 1.0).acos() < min_view_change)
            {
                continue;
            }
            let up = hyp.h.update(x, w2c, &self.cam, lcfg, self.opts.exec);
            if up.starved {
                continue;
            }
            hyp.last_view = Some(bearing);
            let last = *hyp.h.history.last().expect("update recorded");
            self.logs.metrics.push(MetricRecord {
                frame,
                t: self.time,
                target_id: hyp.h.id(),
                lambda_max: last.lambda_max,
                kl: last.kl,
                entropy: last.entropy,
                status: hyp.h.status,
            });
            if up.status_changed {
                self.logs.snapshots.push(ParticleSnapshot::of(&hyp.h, frame));
            }
            events.updated_hypotheses.push(hyp.h.id());
        }
    }

    /// Drops duplicate hypotheses and those that fall inside the region of
    /// a finished target.
    fn prune_hypotheses(&mut self) {
        let zones: Vec<(Point3, f64)> = self.hyps.iter().filter_map(|h| h.suppression()).collect();
        let (mut pending, finished): (Vec<Hyp>, Vec<Hyp>) = self.hyps.drain(..).partition(|h| h.is_pending());
        pending.retain(|h| {
            let mean = h.h.set.mean();
            !zones.iter().any(|(c, r)| (mean - c).norm() < *r)
        });
        let mut bare: Vec<TargetHypothesis> = pending.iter().map(|h| h.h.clone()).collect();
        let removed = dedupe_hypotheses(&mut bare, self.cfg.localizer.merge_radius);
        pending.retain(|h| !removed.contains(&h.h.id()));
        self.hyps = finished;
        self.hyps.extend(pending);
        self.hyps.sort_by_key(|h| h.h.id());
    }

    fn current_waypoint(&self) -> Waypoint {
        Waypoint::new(self.follower.position(), self.follower.yaw())
    }

    fn advance_state(&mut self, events: &mut TickEvents) {
        match self.state.mode {
            MissionMode::Search => {
                let candidate = self
                    .hyps
                    .iter()
                    .filter(|h| h.is_pending() && h.h.status >= LocalizationStatus::FineRequested)
                    .min_by(|a, b| {
                        b.h.status
                            .cmp(&a.h.status)
                            .then(a.h.pca().lambda_max().total_cmp(&b.h.pca().lambda_max()))
                            .then(a.h.id().cmp(&b.h.id()))
                    })
                    .map(|h| h.h.id());
                if let Some(id) = candidate {
                    self.start_fine_localization(id, events);
                } else if self.follower.is_done() {
                    self.finished = true;
                }
            }
            MissionMode::FineLocalize => {
                let id = self.state.active_target.expect("active target while localizing");
                let i = self.hyp_index(id).expect("active hypothesis exists");
                if self.hyps[i].h.status == LocalizationStatus::Converged {
                    if let Some(f) = self.fine.take() {
                        self.hyps[i].arc_fraction = Some(if f.arc_length > 0.0 {
                            f.flown / f.arc_length
                        } else {
                            0.0
                        });
                    }
                    self.start_mapping(id, events);
                } else if self.follower.is_done() {
                    self.fine = None;
                    self.hyps[i].outcome = TargetOutcome::Failed;
                    self.resume_search(events);
                }
            }
            MissionMode::Map => {
                if self.follower.is_done() {
                    let id = self.state.active_target.expect("active target while mapping");
                    let i = self.hyp_index(id).expect("active hypothesis exists");
                    self.hyps[i].outcome = TargetOutcome::Done;
                    self.resume_search(events);
                }
            }
        }
    }

    fn start_fine_localization(&mut self, id: u64, events: &mut TickEvents) {
        self.state.resume_waypoint_index =
            (self.search_base + self.follower.target_index()).max(self.state.resume_waypoint_index);
        let i = self.hyp_index(id).expect("candidate exists");
        let pca = self.hyps[i].h.pca();
        let c_e = pca.mean;
        let circle = match fine_localization_circle(&c_e, self.cfg.h_s, self.cam.gamma) {
            Ok(c) => c,
            Err(_) => {
                self.hyps[i].outcome = TargetOutcome::Failed;
                return;
            }
        };
        self.transition(MissionMode::FineLocalize, Some(id), events);
        let step = self.cfg.mission.arc_step_deg.to_radians();
        let current = self.current_waypoint();
        let nbv = next_best_view(&circle, &pca.smallest_axis(), &current, &c_e);
        let arc: Vec<Waypoint> = arc_path(&current, &nbv, &circle, &c_e, step)
            .into_iter()
            .skip(1)
            .collect();
        let mut arc_length = 0.0;
        let mut prev = current.position;
        for w in &arc {
            arc_length += (w.position - prev).norm();
            prev = w.position;
        }
        let start_az = circle.azimuth_of(&current.position);
        let nbv_az = circle.azimuth_of(&nbv.position);
        let dir = if crate::geometry::wrap_angle(nbv_az - start_az) < 0.0 {
            -1.0
        } else {
            1.0
        };
        let laps = orbit_waypoints(
            &circle,
            &c_e,
            nbv_az,
            dir * self.cfg.mission.max_laps * std::f64::consts::TAU,
            step,
        );
        let mut path = arc;
        path.extend(laps);
        self.fine = Some(FineContext { arc_length, flown: 0.0 });
        self.set_path("fine_localize", path);
    }

    fn start_mapping(&mut self, id: u64, events: &mut TickEvents) {
        let i = self.hyp_index(id).expect("active hypothesis exists");
        let plan = fit_cylinder(&self.hyps[i].h.set).and_then(|cyl| {
            let plan = scan_circles(&cyl, &self.cam, self.cfg.mission.r_m)?;
            Ok((cyl, plan))
        });
        let (cyl, mut plan) = match plan {
            Ok(p) => p,
            Err(_) => {
                self.hyps[i].outcome = TargetOutcome::Failed;
                self.resume_search(events);
                return;
            }
        };
        self.transition(MissionMode::Map, Some(id), events);
        let here = self.follower.position();
        let start_az = (here.y - cyl.axis_xy.y).atan2(here.x - cyl.axis_xy.x);
        plan.populate_waypoints(self.cfg.mission.n_per_circle, start_az);
        let report: CoverageReport = coverage_check(&plan, &self.cam, &cyl, self.cfg.mission.coverage_samples);
        self.hyps[i].cylinder = Some(cyl);
        self.hyps[i].coverage = Some(report.covered_fraction);
        self.logs.coverage.insert(id, report);

        let mut path = Vec::new();
        if let Some(first) = plan.waypoints().next() {
            let above = Point3::new(first.position.x, first.position.y, here.z.max(first.position.z));
            path.push(Waypoint::new(above, first.yaw));
        }
        path.extend(plan.waypoints().copied());
        self.set_path("map", path);
    }

    fn resume_search(&mut self, events: &mut TickEvents) {
        self.transition(MissionMode::Search, None, events);
        let from = self.state.resume_waypoint_index.min(self.search.len());
        self.search_base = from;
        let rest = self.search[from..].to_vec();
        self.set_path("search", rest);
    }

    pub fn finish(mut self) -> RunOutput {
        if self.opts.dump_particles {
            for h in &self.hyps {
                self.logs.snapshots.push(ParticleSnapshot::of(&h.h, self.frame));
            }
        }
        let hypotheses: Vec<HypothesisReport> = self
            .hyps
            .iter()
            .map(|h| {
                let pca = h.h.pca();
                HypothesisReport {
                    id: h.h.id(),
                    outcome: h.outcome.clone(),
                    status: h.h.status,
                    mean: pca.mean.into(),
                    eigenvalues: pca.eigenvalues,
                    initial_lambda_max: h.h.initial_lambda_max,
                    updates: h.h.updates,
                    starved_updates: h.h.starved_updates,
                    arc_fraction: h.arc_fraction,
                    cylinder: h.cylinder,
                    coverage: h.coverage,
                }
            })
            .collect();
        let targets: Vec<TargetReport> = self
            .truth
            .iter()
            .map(|t| {
                let best = self
                    .hyps
                    .iter()
                    .filter(|h| h.outcome == TargetOutcome::Done)
                    .map(|h| (h, (h.h.pca().mean - t.center).norm()))
                    .filter(|(_, d)| *d <= FOUND_GATE)
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                TargetReport {
                    target_id: t.id,
                    center: t.center.into(),
                    hypothesis_id: best.map(|(h, _)| h.h.id()),
                    localization_error: best.map(|(_, d)| d),
                    initial_lambda_max: best.map(|(h, _)| h.h.initial_lambda_max),
                    final_eigenvalues: best.map(|(h, _)| h.h.pca().eigenvalues),
                    updates: best.map_or(0, |(h, _)| h.h.updates),
                    coverage: best.and_then(|(h, _)| h.coverage),
                }
            })
            .collect();
        let report = RunReport {
            seed: self.cfg.seed,
            frames: self.frame,
            mission_duration: self.time,
            distance_flown: self.distance,
            targets_total: targets.len(),
            targets_found: targets.iter().filter(|t| t.hypothesis_id.is_some()).count(),
            timed_out: self.timed_out,
            targets,
            hypotheses,
            transitions: self.transitions,
        };
        RunOutput {
            report,
            logs: self.logs,
        }
    }
}

/// Runs a full mission with `seed` overriding the configured one.
pub fn run_scenario(cfg: &ScenarioConfig, seed: u64, opts: RunOptions) -> Result<RunOutput, MissionError> {
    let cfg = ScenarioConfig { seed, ..cfg.clone() };
    let mut m = Mission::new(&cfg, seed, opts)?;
    while !m.tick().finished {}
    Ok(m.finish())
}
