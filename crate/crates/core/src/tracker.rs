//! Bounding-box Kalman tracker.
//!
//! Each track carries a Euclidean box state and a 4×4 covariance. Prediction
//! runs in homogeneous box coordinates so a 2D similarity transform from the
//! feature tracker can be applied to both corners at once; the update runs in
//! Euclidean coordinates where the covariance is invertible.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{drop_matrix, lift_matrix, lift_offset, BBox, GeometryError, Pixel};
use crate::stats::{gaussian_entropy, is_symmetric, symmetrize};

pub type TrackId = u64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackerError {
    #[error("track {0} is not active")]
    Inactive(TrackId),
    #[error("non-finite similarity transform")]
    NonFiniteTransform,
    #[error("matrix is not a similarity transform: {0}")]
    NotSimilarity(String),
    #[error("non-finite measurement")]
    NonFiniteMeasurement,
    #[error("covariance is not symmetric")]
    NonSymmetric,
    #[error("similarity estimate unavailable: {0}")]
    SimilarityUnavailable(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackStatus {
    Active,
    Deregistered,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxTrack {
    pub id: TrackId,
    pub u: BBox,
    pub sigma: Matrix4<f64>,
    pub created_frame: u64,
    pub last_update_frame: u64,
    /// Number of detections fused so far, including the spawning one.
    pub hits: u32,
    pub status: TrackStatus,
}

impl BoxTrack {
    pub fn new(id: TrackId, u: BBox, sigma: Matrix4<f64>, frame: u64) -> Self {
        Self {
            id,
            u,
            sigma,
            created_frame: frame,
            last_update_frame: frame,
            hits: 1,
            status: TrackStatus::Active,
        }
    }

    pub fn entropy(&self) -> f64 {
        gaussian_entropy(&self.sigma)
    }

    pub fn is_active(&self) -> bool {
        self.status == TrackStatus::Active
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Prediction noise std, pixels.
    pub e: f64,
    /// Measurement noise std, pixels.
    pub w: f64,
    pub iou_register_threshold: f64,
    /// Tracks whose entropy exceeds this (nats) are deregistered.
    pub entropy_dereg_threshold: f64,
    pub initial_sigma: Matrix4<f64>,
    /// Prediction noise multiplier used when no motion estimate is available.
    pub fallback_noise_inflation: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        let w = 4.0;
        Self {
            e: 2.0,
            w,
            iou_register_threshold: 0.3,
            entropy_dereg_threshold: 16.4,
            initial_sigma: Matrix4::identity() * (w * w),
            fallback_noise_inflation: 4.0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.e > 0.0) || !(self.w > 0.0) {
            return Err("tracker noise stds e and w must be positive".into());
        }
        if !(self.iou_register_threshold > 0.0 && self.iou_register_threshold < 1.0) {
            return Err("iou_register_threshold must lie in (0, 1)".into());
        }
        if !self.entropy_dereg_threshold.is_finite() {
            return Err("entropy_dereg_threshold must be finite".into());
        }
        if !(self.fallback_noise_inflation >= 1.0) {
            return Err("fallback_noise_inflation must be >= 1".into());
        }
        if !is_symmetric(&self.initial_sigma, 1e-9) || !self.initial_sigma.iter().all(|v| v.is_finite()) {
            return Err("initial_sigma must be a finite symmetric matrix".into());
        }
        Ok(())
    }

    /// `R = diag(e², e², 0, e², e², 0)` scaled by `inflation`.
    fn prediction_noise(&self, inflation: f64) -> Matrix6<f64> {
        let e2 = self.e * self.e * inflation;
        Matrix6::from_diagonal(&nalgebra::Vector6::new(e2, e2, 0.0, e2, e2, 0.0))
    }

    fn measurement_noise(&self) -> Matrix4<f64> {
        Matrix4::identity() * (self.w * self.w)
    }
}

/// 2D similarity (uniform scale, rotation, translation) in homogeneous form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityTransform2D(Matrix3<f64>);

impl SimilarityTransform2D {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn from_params(scale: f64, theta: f64, tx: f64, ty: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self(Matrix3::new(
            scale * c,
            -scale * s,
            tx,
            scale * s,
            scale * c,
            ty,
            0.0,
            0.0,
            1.0,
        ))
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self::from_params(1.0, 0.0, tx, ty)
    }

    pub fn new(m: Matrix3<f64>) -> Result<Self, TrackerError> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(TrackerError::NonFiniteTransform);
        }
        let tol = 1e-9 * m.amax().max(1.0);
        if m[(2, 0)].abs() > tol || m[(2, 1)].abs() > tol || (m[(2, 2)] - 1.0).abs() > tol {
            return Err(TrackerError::NotSimilarity("bottom row must be (0, 0, 1)".into()));
        }
        if (m[(0, 0)] - m[(1, 1)]).abs() > tol || (m[(0, 1)] + m[(1, 0)]).abs() > tol {
            return Err(TrackerError::NotSimilarity("upper block is not s·R(θ)".into()));
        }
        if !(m[(0, 0)].hypot(m[(1, 0)]) > 0.0) {
            return Err(TrackerError::NotSimilarity("scale must be positive".into()));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn scale(&self) -> f64 {
        self.0[(0, 0)].hypot(self.0[(1, 0)])
    }

    pub fn rotation(&self) -> f64 {
        self.0[(1, 0)].atan2(self.0[(0, 0)])
    }

    pub fn offset(&self) -> Vector2<f64> {
        Vector2::new(self.0[(0, 2)], self.0[(1, 2)])
    }

    pub fn apply(&self, p: &Pixel) -> Pixel {
        let h = self.0 * nalgebra::Vector3::new(p.x, p.y, 1.0);
        Pixel::new(h.x, h.y)
    }
}

/// Kalman prediction through the similarity transform `s`.
pub fn predict(track: &BoxTrack, s: &SimilarityTransform2D, cfg: &TrackerConfig) -> Result<BoxTrack, TrackerError> {
    predict_with_inflation(track, s, cfg, 1.0)
}

/// Prediction used when the motion estimate is unavailable: identity motion
/// with the prediction noise inflated.
pub fn predict_without_motion(track: &BoxTrack, cfg: &TrackerConfig) -> Result<BoxTrack, TrackerError> {
    predict_with_inflation(
        track,
        &SimilarityTransform2D::identity(),
        cfg,
        cfg.fallback_noise_inflation,
    )
}

fn predict_with_inflation(
    track: &BoxTrack,
    s: &SimilarityTransform2D,
    cfg: &TrackerConfig,
    inflation: f64,
) -> Result<BoxTrack, TrackerError> {
    if !track.is_active() {
        return Err(TrackerError::Inactive(track.id));
    }
    if !s.0.iter().all(|v| v.is_finite()) {
        return Err(TrackerError::NonFiniteTransform);
    }
    let t = lift_matrix();
    let m = drop_matrix();
    let mut f = Matrix6::zeros();
    f.fixed_view_mut::<3, 3>(0, 0).copy_from(&s.0);
    f.fixed_view_mut::<3, 3>(3, 3).copy_from(&s.0);

    let x = t * track.u.as_vector() + lift_offset();
    let omega = t * track.sigma * t.transpose();
    let x_pred = f * x;
    let omega_pred = f * omega * f.transpose() + cfg.prediction_noise(inflation);
    let u = m * x_pred;
    let sigma = symmetrize(&(m * omega_pred * m.transpose()));

    // A rotation can swap the corner order; keep the box canonical.
    let u = BBox::from_corners(Pixel::new(u[0], u[1]), Pixel::new(u[2], u[3]))?;
    Ok(BoxTrack {
        u,
        sigma,
        ..track.clone()
    })
}

/// Kalman update with a detector measurement (`H = I`).
pub fn update(track: &BoxTrack, z: &BBox, cfg: &TrackerConfig) -> Result<BoxTrack, TrackerError> {
    if !track.is_active() {
        return Err(TrackerError::Inactive(track.id));
    }
    let zv = z.as_vector();
    if !zv.iter().all(|v| v.is_finite()) {
        return Err(TrackerError::NonFiniteMeasurement);
    }
    let s = track.sigma + cfg.measurement_noise();
    // Q ≻ 0 and Σ ⪰ 0, so the innovation covariance is always invertible.
    let s_inv = s.try_inverse().expect("innovation covariance is positive definite");
    let k = track.sigma * s_inv;
    let u = track.u.as_vector() + k * (zv - track.u.as_vector());
    let sigma = symmetrize(&((Matrix4::identity() - k) * track.sigma));
    let u = BBox::from_corners(Pixel::new(u[0], u[1]), Pixel::new(u[2], u[3]))?;
    Ok(BoxTrack {
        u,
        sigma,
        hits: track.hits + 1,
        ..track.clone()
    })
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Result of matching one frame of detections against the current tracks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Association {
    /// Track id → index of the detection that updates it.
    pub assignments: BTreeMap<TrackId, usize>,
    /// Tracks registered from detections that overlap no active track.
    pub new_tracks: Vec<BoxTrack>,
    /// Detection indices that overlapped a track but lost the greedy match.
    pub dropped: Vec<usize>,
}

/// Greedy IoU association followed by registration of unmatched detections.
///
/// New tracks take ids from `next_id`, which is advanced.
pub fn associate_and_register(
    tracks: &[BoxTrack],
    detections: &[BBox],
    cfg: &TrackerConfig,
    frame: u64,
    next_id: &mut TrackId,
) -> Association {
    let active: Vec<&BoxTrack> = tracks.iter().filter(|t| t.is_active()).collect();
    let mut pairs: Vec<(f64, TrackId, usize)> = Vec::new();
    let mut best_iou = vec![0.0f64; detections.len()];
    for t in &active {
        for (j, d) in detections.iter().enumerate() {
            let v = iou(&t.u, d);
            best_iou[j] = best_iou[j].max(v);
            if v >= cfg.iou_register_threshold {
                pairs.push((v, t.id, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut out = Association::default();
    let mut det_used = vec![false; detections.len()];
    for (_, id, j) in pairs {
        if det_used[j] || out.assignments.contains_key(&id) {
            continue;
        }
        out.assignments.insert(id, j);
        det_used[j] = true;
    }
    for (j, d) in detections.iter().enumerate() {
        if det_used[j] {
            continue;
        }
        if best_iou[j] < cfg.iou_register_threshold {
            out.new_tracks
                .push(BoxTrack::new(*next_id, *d, cfg.initial_sigma, frame));
            *next_id += 1;
        } else {
            out.dropped.push(j);
        }
    }
    out
}

/// Differential entropy of a box-state covariance (k = 4), `-∞` if singular.
pub fn bbox_entropy(sigma: &Matrix4<f64>) -> Result<f64, TrackerError> {
    if !is_symmetric(sigma, 1e-9) {
        return Err(TrackerError::NonSymmetric);
    }
    Ok(gaussian_entropy(sigma))
}

/// Deregisters tracks that left the image or whose entropy is too high.
/// Returns the ids deregistered by this call.
pub fn prune(tracks: &mut [BoxTrack], image: &BBox, cfg: &TrackerConfig) -> Vec<TrackId> {
    let mut out = Vec::new();
    for t in tracks.iter_mut().filter(|t| t.is_active()) {
        let outside = t.u.intersection_area(image) <= 0.0;
        let too_uncertain = t.entropy() > cfg.entropy_dereg_threshold;
        if outside || too_uncertain {
            t.status = TrackStatus::Deregistered;
            out.push(t.id);
        }
    }
    out
}

/// Least-squares similarity mapping `prev` onto `curr`.
pub fn estimate_similarity(prev: &[Pixel], curr: &[Pixel]) -> Result<SimilarityTransform2D, TrackerError> {
    if prev.len() != curr.len() {
        return Err(TrackerError::SimilarityUnavailable(
            "correspondence lists differ in length".into(),
        ));
    }
    if prev.len() < 2 {
        return Err(TrackerError::SimilarityUnavailable(format!(
            "need at least 2 correspondences, got {}",
            prev.len()
        )));
    }
    let n = prev.len() as f64;
    let mp = prev.iter().sum::<Pixel>() / n;
    let mc = curr.iter().sum::<Pixel>() / n;
    let (mut sxx, mut a_num, mut b_num) = (0.0, 0.0, 0.0);
    for (p, c) in prev.iter().zip(curr) {
        let p = p - mp;
        let c = c - mc;
        sxx += p.norm_squared();
        a_num += p.x * c.x + p.y * c.y;
        b_num += p.x * c.y - p.y * c.x;
    }
    let spread = prev.iter().map(|p| p.norm()).fold(1.0, f64::max);
    if !(sxx > 1e-12 * spread * spread) {
        return Err(TrackerError::SimilarityUnavailable(
            "source points are coincident".into(),
        ));
    }
    let a = a_num / sxx;
    let b = b_num / sxx;
    if !(a.hypot(b) > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(TrackerError::SimilarityUnavailable("degenerate scale".into()));
    }
    let tx = mc.x - (a * mp.x - b * mp.y);
    let ty = mc.y - (b * mp.x + a * mp.y);
    Ok(SimilarityTransform2D(Matrix3::new(a, -b, tx, b, a, ty, 0.0, 0.0, 1.0)))
}

/// One row of the per-frame track log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackLogRecord {
    pub frame: u64,
    pub track_id: TrackId,
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
    pub trace_sigma: f64,
    pub entropy: f64,
    pub status: TrackStatus,
}

impl TrackLogRecord {
    pub fn from_track(frame: u64, t: &BoxTrack) -> Self {
        Self {
            frame,
            track_id: t.id,
            u_min: t.u.u_min,
            v_min: t.u.v_min,
            u_max: t.u.u_max,
            v_max: t.u.v_max,
            trace_sigma: t.sigma.trace(),
            entropy: t.entropy(),
            status: t.status,
        }
    }
}

/// What happened to the track set during one frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameOutcome {
    pub updated: Vec<TrackId>,
    pub spawned: Vec<TrackId>,
    pub deregistered: Vec<BoxTrack>,
    pub dropped_detections: usize,
}

/// Owns the live tracks and runs predict → associate → update → prune.
#[derive(Clone, Debug)]
pub struct BoxTracker {
    cfg: TrackerConfig,
    tracks: Vec<BoxTrack>,
    next_id: TrackId,
}

impl BoxTracker {
    pub fn new(cfg: TrackerConfig) -> Self {
        Self {
            cfg,
            tracks: Vec::new(),
            next_id: 1,
        }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn tracks(&self) -> &[BoxTrack] {
        &self.tracks
    }

    pub fn get(&self, id: TrackId) -> Option<&BoxTrack> {
        self.tracks.iter().find(|t| t.id == id)
    }

    /// Advances one frame. `motion` supplies the similarity transform for a
    /// track, or `None` when the feature tracker could not produce one.
    pub fn step<F>(&mut self, frame: u64, detections: &[BBox], image: &BBox, mut motion: F) -> FrameOutcome
    where
        F: FnMut(&BoxTrack) -> Option<SimilarityTransform2D>,
    {
        let mut outcome = FrameOutcome::default();
        let mut lost = Vec::new();
        for t in self.tracks.iter_mut() {
            let predicted = match motion(t) {
                Some(s) => predict(t, &s, &self.cfg),
                None => predict_without_motion(t, &self.cfg),
            };
            match predicted {
                Ok(p) => *t = p,
                // A collapsed prediction cannot be tracked further.
                Err(_) => {
                    t.status = TrackStatus::Deregistered;
                    lost.push(t.id);
                }
            }
        }

        let assoc = associate_and_register(&self.tracks, detections, &self.cfg, frame, &mut self.next_id);
        for (id, j) in &assoc.assignments {
            if let Some(t) = self.tracks.iter_mut().find(|t| t.id == *id) {
                if let Ok(mut u) = update(t, &detections[*j], &self.cfg) {
                    u.last_update_frame = frame;
                    *t = u;
                    outcome.updated.push(*id);
                }
            }
        }
        outcome.dropped_detections = assoc.dropped.len();
        for t in assoc.new_tracks {
            outcome.spawned.push(t.id);
            self.tracks.push(t);
        }

        prune(&mut self.tracks, image, &self.cfg);
        let (gone, live): (Vec<_>, Vec<_>) = self.tracks.drain(..).partition(|t| !t.is_active());
        self.tracks = live;
        outcome.deregistered = gone;
        debug_assert!(lost.iter().all(|id| outcome.deregistered.iter().any(|t| t.id == *id)));
        outcome
    }

    pub fn log_records(&self, frame: u64) -> Vec<TrackLogRecord> {
        self.tracks
            .iter()
            .map(|t| TrackLogRecord::from_track(frame, t))
            .collect()
    }
}
