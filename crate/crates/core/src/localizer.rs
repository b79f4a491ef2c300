//! Particle-based target localization.
//!
//! A target hypothesis is a cloud of `m` world points. It is seeded inside
//! the polyhedral cone back-projected from an enlarged tracked box, then
//! refined from later views: points are jittered, projected, weighted by a
//! Gaussian/uniform mixture around the new box, and resampled. PCA, KL
//! divergence and differential entropy of the cloud decide when the target
//! is roughly or finely localized.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{map_collect, Exec};
use crate::geometry::{
    back_project_direction, cone_normals, project, BBox, CameraRig, ConeNormals, GeometryError, Pixel, Point3, PoseSE3,
};
use crate::rng::SimRng;
use crate::stats::{entropy_from_log_det, log_det_spd, symmetrize};

/// Floor added to every particle weight.
pub const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalizerError {
    #[error("enlarge factor must be >= 1, got {0}")]
    InvalidEnlargeFactor(f64),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("reference covariance is singular")]
    SingularCovariance,
    #[error("invalid localizer config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet {
    pub target_id: u64,
    pub points: Vec<Point3>,
    pub generation_frame: u64,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> Point3 {
        self.points.iter().sum::<Point3>() / self.points.len() as f64
    }

    /// Sample covariance (divides by `m - 1`).
    pub fn covariance(&self) -> Matrix3<f64> {
        let mean = self.mean();
        let mut c = Matrix3::zeros();
        for p in &self.points {
            let d = p - mean;
            c += d * d.transpose();
        }
        symmetrize(&(c / (self.points.len().max(2) - 1) as f64))
    }

    pub fn summary(&self) -> GaussianSummary {
        GaussianSummary {
            mean: self.mean(),
            covariance: self.covariance(),
        }
    }
}

/// Mean and covariance of a Gaussian approximation to a cloud.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSummary {
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizerConfig {
    /// Particles per hypothesis.
    pub m: usize,
    /// Maximum camera-frame depth of generated particles, meters.
    pub d_m: f64,
    pub enlarge_factor: f64,
    /// Variance of the per-update isotropic jitter, m². Must stay small
    /// against the view change between updates or the cloud never
    /// tightens below `lambda_fine`.
    pub sigma_update: f64,
    pub w1: f64,
    pub w2: f64,
    pub lambda_rough: f64,
    pub lambda_fine: f64,
    pub entropy_rough: f64,
    pub entropy_converged: f64,
    pub kl_converged: f64,
    /// Hypotheses whose means are closer than this to a more converged one
    /// are discarded, meters.
    pub merge_radius: f64,
}

/// Entropy of an isotropic 3D Gaussian with per-axis variance `lambda`.
pub fn isotropic_entropy(lambda: f64) -> f64 {
    entropy_from_log_det(3, 3.0 * lambda.ln())
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        let lambda_rough = 4.0;
        let lambda_fine = 0.25;
        Self {
            m: 1000,
            d_m: 24.0,
            enlarge_factor: 1.5,
            sigma_update: 0.005,
            w1: 0.9,
            w2: 0.1,
            lambda_rough,
            lambda_fine,
            entropy_rough: isotropic_entropy(lambda_rough),
            entropy_converged: isotropic_entropy(lambda_fine),
            kl_converged: 0.01,
            merge_radius: 1.0,
        }
    }
}

impl LocalizerConfig {
    pub fn validate(&self) -> Result<(), LocalizerError> {
        let bad = |s: &str| Err(LocalizerError::InvalidConfig(s.into()));
        if self.m < 100 {
            return bad("m must be at least 100");
        }
        if !(self.d_m > 0.0) {
            return bad("d_m must be positive");
        }
        if !(self.enlarge_factor >= 1.0) {
            return bad("enlarge_factor must be >= 1");
        }
        if !(self.sigma_update >= 0.0) {
            return bad("sigma_update must be non-negative");
        }
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) || (self.w1 + self.w2 - 1.0).abs() > 1e-9 {
            return bad("w1 and w2 must be non-negative and sum to 1");
        }
        if !(self.lambda_fine > 0.0 && self.lambda_fine <= self.lambda_rough) {
            return bad("need 0 < lambda_fine <= lambda_rough");
        }
        if !(self.kl_converged > 0.0) {
            return bad("kl_converged must be positive");
        }
        Ok(())
    }
}

/// Scales a box about its center. No clipping to the image.
pub fn enlarge(b: &BBox, factor: f64) -> Result<BBox, LocalizerError> {
    if !(factor >= 1.0) {
        return Err(LocalizerError::InvalidEnlargeFactor(factor));
    }
    let c = b.center();
    let hw = 0.5 * b.width() * factor;
    let hh = 0.5 * b.height() * factor;
    Ok(BBox::new(c.x - hw, c.y - hh, c.x + hw, c.y + hh)?)
}

/// Seeds `cfg.m` particles inside the cone through `corners`.
///
/// Each particle is a random convex combination of the four corner rays,
/// scaled by a depth drawn from `(0, d_m]`, then moved to the world frame.
pub fn generate_particles(
    corners: &[Pixel; 4],
    camera_to_world: &PoseSE3,
    cam: &CameraRig,
    cfg: &LocalizerConfig,
    target_id: u64,
    frame: u64,
    rng: &mut SimRng,
) -> Result<ParticleSet, LocalizerError> {
    generate_particles_exec(
        corners,
        camera_to_world,
        cam,
        cfg,
        target_id,
        frame,
        rng,
        Exec::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn generate_particles_exec(
    corners: &[Pixel; 4],
    camera_to_world: &PoseSE3,
    cam: &CameraRig,
    cfg: &LocalizerConfig,
    target_id: u64,
    frame: u64,
    rng: &mut SimRng,
    exec: Exec,
) -> Result<ParticleSet, LocalizerError> {
    cone_normals(corners, cam)?;
    let rays = corners.map(|c| back_project_direction(&c, cam));

    // Draws stay sequential so the stream does not depend on scheduling.
    let draws: Vec<[f64; 5]> = (0..cfg.m)
        .map(|_| {
            let a: [f64; 4] = std::array::from_fn(|_| rng.sample(Open01));
            let u: f64 = rng.random();
            [a[0], a[1], a[2], a[3], u]
        })
        .collect();

    let points = map_collect(exec, &draws, |d| {
        let manhattan = d[0] + d[1] + d[2] + d[3];
        let dir = (rays[0] * d[0] + rays[1] * d[1] + rays[2] * d[2] + rays[3] * d[3]) / manhattan;
        let depth = cfg.d_m * (1.0 - d[4]);
        camera_to_world.transform_point(&(dir * depth))
    });
    Ok(ParticleSet {
        target_id,
        points,
        generation_frame: frame,
    })
}

/// Indices of the sets with at least one point inside `cone`. An empty
/// result means a fresh set should be registered.
pub fn needs_new_particle_set(sets: &[ParticleSet], cone: &ConeNormals, world_to_camera: &PoseSE3) -> Vec<usize> {
    sets.iter()
        .enumerate()
        .filter(|(_, s)| {
            s.points
                .iter()
                .any(|p| cone.contains(&world_to_camera.transform_point(p)))
        })
        .map(|(i, _)| i)
        .collect()
}

/// Mixture density of pixel `p` given box `x`, without the weight floor.
pub fn mixture_density(p: &Pixel, x: &BBox, cfg: &LocalizerConfig) -> f64 {
    let c = x.center();
    let sx = 0.5 * x.width();
    let sy = 0.5 * x.height();
    let dx = (p.x - c.x) / sx;
    let dy = (p.y - c.y) / sy;
    let gauss = (-0.5 * (dx * dx + dy * dy)).exp() / (std::f64::consts::TAU * sx * sy);
    let uniform = match enlarge(x, cfg.enlarge_factor) {
        Ok(support) if support.contains(p) => 1.0 / support.area(),
        _ => 0.0,
    };
    cfg.w1 * gauss + cfg.w2 * uniform
}

/// Particle weight for pixel `p`: the mixture density plus [`WEIGHT_FLOOR`].
pub fn weight_density(p: &Pixel, x: &BBox, cfg: &LocalizerConfig) -> f64 {
    mixture_density(p, x, cfg) + WEIGHT_FLOOR
}

/// Low-variance resampling: one uniform offset, `n` evenly spaced pointers.
pub fn systematic_resample(weights: &[f64], rng: &mut SimRng) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let total: f64 = weights.iter().sum();
    let step = 1.0 / n as f64;
    let start: f64 = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    let mut cumulative = weights[0] / total;
    for k in 0..n {
        let target = start + k as f64 * step;
        while target > cumulative && i + 1 < n {
            i += 1;
            cumulative += weights[i] / total;
        }
        out.push(i);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdateOutcome {
    pub set: ParticleSet,
    /// No particle projected near the box; the set was returned unchanged.
    pub starved: bool,
}

/// Jitter, project, weight and resample one particle set against box `x`.
pub fn update_particles(
    ps: &ParticleSet,
    x: &BBox,
    world_to_camera: &PoseSE3,
    cam: &CameraRig,
    cfg: &LocalizerConfig,
    rng: &mut SimRng,
) -> UpdateOutcome {
    update_particles_exec(ps, x, world_to_camera, cam, cfg, rng, Exec::default())
}

pub fn update_particles_exec(
    ps: &ParticleSet,
    x: &BBox,
    world_to_camera: &PoseSE3,
    cam: &CameraRig,
    cfg: &LocalizerConfig,
    rng: &mut SimRng,
    exec: Exec,
) -> UpdateOutcome {
    let std = cfg.sigma_update.max(0.0).sqrt();
    let perturbed: Vec<Point3> = ps
        .points
        .iter()
        .map(|p| {
            let n = Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            p + n * std
        })
        .collect();

    let raw = map_collect(exec, &perturbed, |p| match project(p, world_to_camera, cam) {
        Ok(proj) => mixture_density(&proj.pixel, x, cfg),
        Err(_) => 0.0,
    });
    if raw.iter().all(|&w| w < WEIGHT_FLOOR) {
        return UpdateOutcome {
            set: ps.clone(),
            starved: true,
        };
    }
    let weights: Vec<f64> = raw.iter().map(|w| w + WEIGHT_FLOOR).collect();
    let idx = systematic_resample(&weights, rng);
    UpdateOutcome {
        set: ParticleSet {
            target_id: ps.target_id,
            points: idx.into_iter().map(|i| perturbed[i]).collect(),
            generation_frame: ps.generation_frame,
        },
        starved: false,
    }
}

/// Principal axes of a cloud, sorted by descending eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub eigenvalues: [f64; 3],
    /// Unit eigenvectors matching `eigenvalues`; the last one has a
    /// non-negative world z component.
    pub eigenvectors: [Vector3<f64>; 3],
    pub mean: Point3,
}

impl Pca {
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn smallest_axis(&self) -> Vector3<f64> {
        self.eigenvectors[2]
    }

    /// Ellipsoid semi-axes for display, `2√λ` each.
    pub fn semi_axes(&self) -> [f64; 3] {
        self.eigenvalues.map(|l| 2.0 * l.max(0.0).sqrt())
    }
}

pub fn pca_of(summary: &GaussianSummary) -> Pca {
    let eig = SymmetricEigen::new(summary.covariance);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.map(|i| eig.eigenvalues[i].max(0.0));
    let mut eigenvectors = order.map(|i| eig.eigenvectors.column(i).normalize());
    if eigenvectors[2].z < 0.0 {
        eigenvectors[2] = -eigenvectors[2];
    }
    Pca {
        eigenvalues,
        eigenvectors,
        mean: summary.mean,
    }
}

pub fn pca_summary(ps: &ParticleSet) -> Result<Pca, LocalizerError> {
    if ps.len() < 2 {
        return Err(LocalizerError::TooFewPoints {
            needed: 2,
            got: ps.len(),
        });
    }
    Ok(pca_of(&ps.summary()))
}

/// `D(n0 ‖ n1)` between 3D Gaussians.
pub fn kl_divergence(n0: &GaussianSummary, n1: &GaussianSummary) -> Result<f64, LocalizerError> {
    let chol1 = nalgebra::Cholesky::new(n1.covariance).ok_or(LocalizerError::SingularCovariance)?;
    let log_det1 = log_det_spd(&n1.covariance).ok_or(LocalizerError::SingularCovariance)?;
    let Some(log_det0) = log_det_spd(&n0.covariance) else {
        return Ok(f64::INFINITY);
    };
    let trace_term = chol1.solve(&n0.covariance).trace();
    let d = n1.mean - n0.mean;
    let mahalanobis = d.dot(&chol1.solve(&d));
    Ok((0.5 * (trace_term + mahalanobis - 3.0 + log_det1 - log_det0)).max(0.0))
}

/// Differential entropy of the cloud's Gaussian approximation, `-∞` when
/// the sample covariance is singular.
pub fn points_entropy(ps: &ParticleSet) -> Result<f64, LocalizerError> {
    if ps.len() < 4 {
        return Err(LocalizerError::TooFewPoints {
            needed: 4,
            got: ps.len(),
        });
    }
    Ok(summary_entropy(&ps.summary()))
}

pub fn summary_entropy(s: &GaussianSummary) -> f64 {
    let eig = s.covariance.symmetric_eigenvalues();
    let max = eig.max();
    if !(eig.min() > 1e-12 * max.max(f64::MIN_POSITIVE)) {
        return f64::NEG_INFINITY;
    }
    match log_det_spd(&s.covariance) {
        Some(ld) => entropy_from_log_det(3, ld),
        None => f64::NEG_INFINITY,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LocalizationStatus {
    Rough,
    FineRequested,
    Converged,
}

/// Convergence metrics recorded after one non-starved update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub lambda_max: f64,
    /// `D(updated ‖ previous)`, absent if the previous covariance was singular.
    pub kl: Option<f64>,
    pub entropy: f64,
}

/// Classifies the latest metrics; never regresses below `previous`.
pub fn localization_status(
    history: &[UpdateMetrics],
    previous: LocalizationStatus,
    cfg: &LocalizerConfig,
) -> LocalizationStatus {
    let Some(last) = history.last() else {
        return previous;
    };
    let converged = last.lambda_max < cfg.lambda_fine
        && last.entropy < cfg.entropy_converged
        && last.kl.is_some_and(|k| k < cfg.kl_converged);
    let current = if converged {
        LocalizationStatus::Converged
    } else if last.lambda_max < cfg.lambda_rough && last.entropy < cfg.entropy_rough {
        LocalizationStatus::FineRequested
    } else {
        LocalizationStatus::Rough
    };
    current.max(previous)
}

/// A particle set together with its convergence bookkeeping and its own
/// random stream.
#[derive(Clone, Debug)]
pub struct TargetHypothesis {
    pub set: ParticleSet,
    pub status: LocalizationStatus,
    pub history: Vec<UpdateMetrics>,
    pub initial_lambda_max: f64,
    pub updates: u32,
    pub starved_updates: u32,
    rng: SimRng,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HypothesisUpdate {
    pub starved: bool,
    pub status_changed: bool,
}

impl TargetHypothesis {
    pub fn new(set: ParticleSet, rng: SimRng) -> Self {
        let initial_lambda_max = pca_of(&set.summary()).lambda_max();
        Self {
            set,
            status: LocalizationStatus::Rough,
            history: Vec::new(),
            initial_lambda_max,
            updates: 0,
            starved_updates: 0,
            rng,
        }
    }

    pub fn id(&self) -> u64 {
        self.set.target_id
    }

    pub fn pca(&self) -> Pca {
        pca_of(&self.set.summary())
    }

    pub fn last_kl(&self) -> Option<f64> {
        self.history.last().and_then(|h| h.kl)
    }

    pub fn update(
        &mut self,
        x: &BBox,
        world_to_camera: &PoseSE3,
        cam: &CameraRig,
        cfg: &LocalizerConfig,
        exec: Exec,
    ) -> HypothesisUpdate {
        let before = self.set.summary();
        let out = update_particles_exec(&self.set, x, world_to_camera, cam, cfg, &mut self.rng, exec);
        if out.starved {
            self.starved_updates += 1;
            return HypothesisUpdate {
                starved: true,
                status_changed: false,
            };
        }
        self.set = out.set;
        self.updates += 1;
        let after = self.set.summary();
        let pca = pca_of(&after);
        self.history.push(UpdateMetrics {
            lambda_max: pca.lambda_max(),
            kl: kl_divergence(&after, &before).ok(),
            entropy: summary_entropy(&after),
        });
        let status = localization_status(&self.history, self.status, cfg);
        let changed = status != self.status;
        self.status = status;
        HypothesisUpdate {
            starved: false,
            status_changed: changed,
        }
    }
}

/// Drops hypotheses whose means lie within `radius` of a more converged one
/// (higher status, then smaller λ_max). Returns the removed ids.
pub fn dedupe_hypotheses(hyps: &mut Vec<TargetHypothesis>, radius: f64) -> Vec<u64> {
    let keys: Vec<(LocalizationStatus, f64, Point3, u64)> = hyps
        .iter()
        .map(|h| {
            let pca = h.pca();
            (h.status, pca.lambda_max(), pca.mean, h.id())
        })
        .collect();
    let better = |a: usize, b: usize| {
        let (sa, la, _, ia) = keys[a];
        let (sb, lb, _, ib) = keys[b];
        sa > sb || (sa == sb && (la < lb || (la == lb && ia < ib)))
    };
    let mut removed = Vec::new();
    for i in 0..keys.len() {
        let dominated = (0..keys.len()).any(|j| j != i && better(j, i) && (keys[i].2 - keys[j].2).norm() < radius);
        if dominated {
            removed.push(keys[i].3);
        }
    }
    hyps.retain(|h| !removed.contains(&h.id()));
    removed
}

/// JSON particle dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleSnapshot {
    pub target_id: u64,
    pub frame: u64,
    pub points: Vec<[f64; 3]>,
    pub eigenvalues: [f64; 3],
    pub entropy: Option<f64>,
    pub last_kl: Option<f64>,
    pub status: LocalizationStatus,
}

impl ParticleSnapshot {
    pub fn of(h: &TargetHypothesis, frame: u64) -> Self {
        let summary = h.set.summary();
        let entropy = summary_entropy(&summary);
        Self {
            target_id: h.id(),
            frame,
            points: h.set.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            eigenvalues: pca_of(&summary).eigenvalues,
            entropy: entropy.is_finite().then_some(entropy),
            last_kl: h.last_kl(),
            status: h.status,
        }
    }
}
