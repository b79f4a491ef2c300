use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use tlm_core::exec::Exec;
use tlm_core::geometry::{back_project_direction, BBox, CameraRig, Pixel, Point3, PoseSE3};
use tlm_core::localizer::{
    generate_particles, generate_particles_exec, kl_divergence, localization_status, pca_of, summary_entropy,
    systematic_resample, update_particles, update_particles_exec, GaussianSummary, LocalizationStatus, LocalizerConfig,
    TargetHypothesis, UpdateMetrics,
};
use tlm_core::rng::{particle_stream, stream};

fn spd(a: [f64; 9], diag: [f64; 3]) -> Matrix3<f64> {
    let a = Matrix3::from_row_slice(&a);
    a * a.transpose() + Matrix3::from_diagonal(&Vector3::from(diag))
}

fn summary(c: Matrix3<f64>) -> GaussianSummary {
    GaussianSummary {
        mean: Vector3::zeros(),
        covariance: c,
    }
}

fn spd_strategy() -> impl Strategy<Value = Matrix3<f64>> {
    (prop::array::uniform9(-2.0..2.0f64), prop::array::uniform3(0.05..3.0f64)).prop_map(|(a, d)| spd(a, d))
}

fn body_at(x: f64, y: f64, z: f64, yaw: f64) -> PoseSE3 {
    PoseSE3::from_yaw(yaw, Point3::new(x, y, z))
}

// Pose on a horizontal circle around `c`, facing it with the camera's
// optical axis through the center.
fn viewing_pose(c: &Point3, az: f64, cam: &CameraRig) -> PoseSE3 {
    let h = 8.0;
    let r = h / cam.gamma.tan();
    body_at(
        c.x + r * az.cos(),
        c.y + r * az.sin(),
        c.z + h,
        az + std::f64::consts::PI,
    )
}

fn truth_box(c: &Point3, half: f64, body: &PoseSE3, cam: &CameraRig) -> BBox {
    let w2c = cam.world_to_camera(body);
    let mut lo = Pixel::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Pixel::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for dx in [-half, half] {
        for dy in [-half, half] {
            for dz in [-half, half] {
                let p = tlm_core::geometry::project(&(c + Vector3::new(dx, dy, dz)), &w2c, cam).unwrap();
                lo = lo.inf(&p.pixel);
                hi = hi.sup(&p.pixel);
            }
        }
    }
    BBox::new(lo.x, lo.y, hi.x, hi.y).unwrap()
}

proptest! {
    #[test]
    fn kl_is_nonnegative_and_zero_on_self(a in spd_strategy(), b in spd_strategy()) {
        let (sa, sb) = (summary(a), summary(b));
        prop_assert!(kl_divergence(&sa, &sb).unwrap() >= -1e-12);
        prop_assert!(kl_divergence(&sa, &sa).unwrap().abs() < 1e-9);
    }

    #[test]
    fn entropy_scales_with_log_volume(a in spd_strategy(), c in 0.01..100.0f64) {
        let h = summary_entropy(&summary(a));
        let hc = summary_entropy(&summary(a * c));
        prop_assert!((hc - h - 1.5 * c.ln()).abs() < 1e-9);
    }

    #[test]
    fn status_never_regresses(seq in prop::collection::vec((0.0..2.0f64, prop::option::of(0.0..0.05f64), -8.0..4.0f64), 1..40)) {
        let cfg = LocalizerConfig::default();
        let mut history = Vec::new();
        let mut status = LocalizationStatus::Rough;
        for (lambda_max, kl, entropy) in seq {
            history.push(UpdateMetrics { lambda_max, kl, entropy });
            let next = localization_status(&history, status, &cfg);
            prop_assert!(next >= status);
            status = next;
        }
    }

    #[test]
    fn resample_preserves_count(weights in prop::collection::vec(1e-12..10.0f64, 1..300), seed in any::<u64>()) {
        let mut rng = stream(seed, "resample");
        let idx = systematic_resample(&weights, &mut rng);
        prop_assert_eq!(idx.len(), weights.len());
        prop_assert!(idx.windows(2).all(|w| w[0] <= w[1]));
        // Each index is copied floor or ceil of n·w_i / Σw times.
        let total: f64 = weights.iter().sum();
        let n = weights.len() as f64;
        for (i, w) in weights.iter().enumerate() {
            let k = idx.iter().filter(|&&j| j == i).count() as f64;
            let expect = n * w / total;
            prop_assert!(k >= expect.floor() - 1.0 && k <= expect.ceil() + 1.0);
        }
    }
}

#[test]
fn systematic_resample_is_unbiased() {
    let weights = [0.05, 0.3, 0.1, 0.25, 0.02, 0.28];
    let total: f64 = weights.iter().sum();
    let trials = 20_000;
    let mut counts = [0usize; 6];
    let mut rng = stream(3, "resample-mc");
    for _ in 0..trials {
        for i in systematic_resample(&weights, &mut rng) {
            counts[i] += 1;
        }
    }
    let n = weights.len() as f64;
    for (i, w) in weights.iter().enumerate() {
        let mean = counts[i] as f64 / trials as f64;
        let expect = n * w / total;
        // Copies per draw are floor or ceil of expect, so variance ≤ 1/4.
        let bound = 3.0 * 0.5 / (trials as f64).sqrt();
        assert!((mean - expect).abs() < bound, "index {i}: {mean} vs {expect}");
    }
}

#[test]
fn particles_concentrate_around_box_center_ray() {
    let cam = CameraRig::default();
    let cfg = LocalizerConfig::default();
    let body = body_at(0.0, 0.0, 10.0, 0.4);
    let c2w = cam.camera_to_world(&body);
    let b = BBox::new(300.0, 200.0, 340.0, 260.0).unwrap();
    let mut rng = stream(5, "gen");
    let ps = generate_particles(&b.corners_clockwise(), &c2w, &cam, &cfg, 1, 0, &mut rng).unwrap();
    assert_eq!(ps.len(), cfg.m);

    let origin = c2w.transform_point(&Point3::zeros());
    let mean_dir = (ps.mean() - origin).normalize();
    let center_dir = c2w.rotation * back_project_direction(&b.center(), &cam).normalize();
    assert!(mean_dir.dot(&center_dir) > 0.999);
    // Uniform depth on (0, d_m] along rays that are roughly unit length.
    let mean_depth = (ps.mean() - origin).norm();
    assert!((mean_depth / (0.5 * cfg.d_m) - 1.0).abs() < 0.05);
}

#[test]
fn parallel_and_sequential_paths_agree() {
    let cam = CameraRig::default();
    let cfg = LocalizerConfig {
        m: 5000,
        ..LocalizerConfig::default()
    };
    let body = body_at(0.0, 0.0, 10.0, 0.0);
    let c2w = cam.camera_to_world(&body);
    let b = BBox::new(300.0, 200.0, 340.0, 260.0).unwrap();
    let gen = |exec| {
        let mut rng = stream(9, "gen");
        generate_particles_exec(&b.corners_clockwise(), &c2w, &cam, &cfg, 1, 0, &mut rng, exec).unwrap()
    };
    let (a, p) = (gen(Exec::Sequential), gen(Exec::Parallel));
    assert_eq!(a, p);
    let w2c = cam.world_to_camera(&body);
    let upd = |exec| {
        let mut rng = stream(9, "upd");
        update_particles_exec(&a, &b, &w2c, &cam, &cfg, &mut rng, exec)
    };
    assert_eq!(upd(Exec::Sequential), upd(Exec::Parallel));
}

#[test]
fn update_keeps_count_and_pulls_toward_box() {
    let cam = CameraRig::default();
    let cfg = LocalizerConfig::default();
    let body = body_at(0.0, 0.0, 10.0, 0.0);
    let c2w = cam.camera_to_world(&body);
    let w2c = cam.world_to_camera(&body);
    let wide = BBox::new(250.0, 150.0, 390.0, 330.0).unwrap();
    let mut rng = stream(1, "gen");
    let ps = generate_particles(&wide.corners_clockwise(), &c2w, &cam, &cfg, 1, 0, &mut rng).unwrap();
    let narrow = BBox::new(310.0, 230.0, 330.0, 250.0).unwrap();
    let out = update_particles(&ps, &narrow, &w2c, &cam, &cfg, &mut rng);
    assert!(!out.starved);
    assert_eq!(out.set.len(), ps.len());
    let inside = |s: &tlm_core::localizer::ParticleSet| {
        s.points
            .iter()
            .filter(|p| {
                tlm_core::geometry::project(p, &w2c, &cam)
                    .map(|q| narrow.contains(&q.pixel))
                    .unwrap_or(false)
            })
            .count()
    };
    assert!(inside(&out.set) > 2 * inside(&ps));
}

#[test]
fn orbiting_views_converge_on_a_point() {
    let cam = CameraRig::default();
    let cfg = LocalizerConfig::default();
    let target = Point3::new(5.0, -3.0, 0.2);
    let first = viewing_pose(&target, 0.0, &cam);
    let b0 = truth_box(&target, 0.2, &first, &cam);
    let mut rng = stream(2, "gen");
    let ps = generate_particles(
        &b0.corners_clockwise(),
        &cam.camera_to_world(&first),
        &cam,
        &cfg,
        1,
        0,
        &mut rng,
    )
    .unwrap();
    let mut h = TargetHypothesis::new(ps, particle_stream(2, 1));
    let mut statuses = vec![h.status];
    for k in 1..=60 {
        let az = (6.0 * k as f64).to_radians();
        let body = viewing_pose(&target, az, &cam);
        let b = truth_box(&target, 0.2, &body, &cam);
        h.update(&b, &cam.world_to_camera(&body), &cam, &cfg, Exec::Sequential);
        statuses.push(h.status);
    }
    assert!(statuses.windows(2).all(|w| w[0] <= w[1]));
    let pca = h.pca();
    assert!(pca.lambda_max() < 0.1 * h.initial_lambda_max);
    assert!((pca.mean - target).norm() < 0.3, "error {}", (pca.mean - target).norm());
    assert!(h.history.iter().all(|m| m.kl.is_none_or(|k| k >= 0.0)));
    assert_eq!(pca_of(&h.set.summary()), pca);
}
