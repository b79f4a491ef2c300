use approx::assert_abs_diff_eq;
use nalgebra::{Matrix4, Vector2};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use tlm_core::geometry::{BBox, Pixel};
use tlm_core::rng::stream;
use tlm_core::tracker::{
    associate_and_register, bbox_entropy, estimate_similarity, iou, predict, predict_without_motion, prune, update,
    BoxTrack, BoxTracker, SimilarityTransform2D, TrackStatus, TrackerConfig, TrackerError,
};

fn bbox(a: f64, b: f64, c: f64, d: f64) -> BBox {
    BBox::new(a, b, c, d).unwrap()
}

fn min_eig(m: &Matrix4<f64>) -> f64 {
    m.symmetric_eigenvalues().min()
}

// Area fraction by counting cell centers on a fine grid.
fn raster_iou(a: &BBox, b: &BBox, cell: f64) -> f64 {
    let (lo_u, hi_u) = (a.u_min.min(b.u_min), a.u_max.max(b.u_max));
    let (lo_v, hi_v) = (a.v_min.min(b.v_min), a.v_max.max(b.v_max));
    let (mut inter, mut union) = (0u64, 0u64);
    let mut u = lo_u + 0.5 * cell;
    while u < hi_u {
        let mut v = lo_v + 0.5 * cell;
        while v < hi_v {
            let p = Pixel::new(u, v);
            let (ia, ib) = (a.contains(&p), b.contains(&p));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
            v += cell;
        }
        u += cell;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[test]
fn iou_examples() {
    let a = bbox(0.0, 0.0, 10.0, 10.0);
    assert_eq!(iou(&a, &a), 1.0);
    assert_eq!(iou(&a, &bbox(20.0, 20.0, 30.0, 30.0)), 0.0);
    let b = bbox(5.0, 0.0, 15.0, 10.0);
    assert_abs_diff_eq!(iou(&a, &b), 1.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(raster_iou(&a, &b, 0.05), 1.0 / 3.0, epsilon = 1e-3);
}

#[test]
fn entropy_examples() {
    let base = 2.0 + 2.0 * std::f64::consts::TAU.ln();
    assert_abs_diff_eq!(bbox_entropy(&Matrix4::identity()).unwrap(), base, epsilon = 1e-12);
    assert_abs_diff_eq!(
        bbox_entropy(&(Matrix4::identity() * 4.0)).unwrap(),
        8.4484,
        epsilon = 1e-4
    );
    let mut skew = Matrix4::identity();
    skew[(0, 1)] = 0.5;
    assert_eq!(bbox_entropy(&skew), Err(TrackerError::NonSymmetric));
}

#[test]
fn greedy_association_example() {
    let cfg = TrackerConfig::default();
    let track = BoxTrack::new(1, bbox(0.0, 0.0, 10.0, 10.0), cfg.initial_sigma, 0);
    // IoU 0.8 and 0.6 against the track.
    let d_hi = bbox(0.0, 0.0, 10.0, 8.0);
    let d_lo = bbox(0.0, 0.0, 10.0, 6.0);
    assert_abs_diff_eq!(iou(&track.u, &d_hi), 0.8, epsilon = 1e-12);
    assert_abs_diff_eq!(iou(&track.u, &d_lo), 0.6, epsilon = 1e-12);
    let mut next = 2;
    let a = associate_and_register(&[track], &[d_lo, d_hi], &cfg, 1, &mut next);
    assert_eq!(a.assignments.get(&1), Some(&1));
    assert!(a.new_tracks.is_empty());
    assert_eq!(a.dropped, vec![0]);

    let mut next = 1;
    let a = associate_and_register(
        &[],
        &[bbox(0.0, 0.0, 5.0, 5.0), bbox(50.0, 50.0, 60.0, 60.0)],
        &cfg,
        0,
        &mut next,
    );
    assert_eq!(a.new_tracks.len(), 2);
    assert_eq!(next, 3);
}

#[test]
fn prune_by_image_overlap() {
    let cfg = TrackerConfig::default();
    let image = bbox(0.0, 0.0, 640.0, 480.0);
    let mut tracks = vec![
        BoxTrack::new(1, bbox(-50.0, -40.0, -10.0, -5.0), cfg.initial_sigma, 0),
        BoxTrack::new(2, bbox(-20.0, 100.0, 20.0, 140.0), cfg.initial_sigma, 0),
    ];
    assert_eq!(prune(&mut tracks, &image, &cfg), vec![1]);
    assert_eq!(tracks[0].status, TrackStatus::Deregistered);
    assert_eq!(tracks[1].status, TrackStatus::Active);
}

#[test]
fn unobserved_track_deregisters_on_schedule() {
    let cfg = TrackerConfig::default();
    let s0 = cfg.initial_sigma[(0, 0)];
    let growth = cfg.e * cfg.e * cfg.fallback_noise_inflation;
    let base = 2.0 + 2.0 * std::f64::consts::TAU.ln();
    // Σ stays diagonal: h_n = base + 2 ln(s0 + n·growth).
    let expected = (1..)
        .find(|&n| base + 2.0 * (s0 + n as f64 * growth).ln() > cfg.entropy_dereg_threshold)
        .unwrap();

    let image = bbox(0.0, 0.0, 640.0, 480.0);
    let mut tracks = vec![BoxTrack::new(1, bbox(100.0, 100.0, 140.0, 130.0), cfg.initial_sigma, 0)];
    let mut frames = 0;
    while tracks[0].is_active() {
        tracks[0] = predict_without_motion(&tracks[0], &cfg).unwrap();
        frames += 1;
        prune(&mut tracks, &image, &cfg);
    }
    assert_eq!(frames, expected);
    assert!(frames <= 50);
}

#[test]
fn similarity_examples() {
    let pts: Vec<Pixel> = (0..6)
        .map(|k| Pixel::new(10.0 * k as f64, 7.0 * (k * k % 5) as f64))
        .collect();
    let moved: Vec<Pixel> = pts.iter().map(|p| p + Pixel::new(3.0, -2.0)).collect();
    let s = estimate_similarity(&pts, &moved).unwrap();
    assert_abs_diff_eq!(s.scale(), 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(s.rotation(), 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(s.offset(), Vector2::new(3.0, -2.0), epsilon = 1e-9);

    let scaled: Vec<Pixel> = pts.iter().map(|p| p * 1.5).collect();
    assert_abs_diff_eq!(
        estimate_similarity(&pts, &scaled).unwrap().scale(),
        1.5,
        epsilon = 1e-12
    );

    assert!(estimate_similarity(&pts[..1], &moved[..1]).is_err());
    let same = vec![Pixel::new(4.0, 4.0); 5];
    assert!(estimate_similarity(&same, &same).is_err());
}

#[test]
fn noisy_similarity_within_three_sigma() {
    let truth = SimilarityTransform2D::from_params(1.1, 0.2, 12.0, -7.0);
    let sigma = 0.5;
    let n = 30;
    let mut rng = stream(17, "similarity-test");
    let trials = 200;
    let (mut sum_s, mut sum_th, mut sum_tx) = (0.0, 0.0, 0.0);
    let mut spread = 0.0;
    for _ in 0..trials {
        let prev: Vec<Pixel> = (0..n)
            .map(|_| Pixel::new(rng.random_range(100.0..300.0), rng.random_range(100.0..300.0)))
            .collect();
        let mut noise = || {
            Pixel::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ) * sigma
        };
        let curr: Vec<Pixel> = prev.iter().map(|p| truth.apply(p) + noise()).collect();
        let s = estimate_similarity(&prev, &curr).unwrap();
        sum_s += s.scale();
        sum_th += s.rotation();
        sum_tx += s.offset().x;
        let c = prev.iter().sum::<Pixel>() / n as f64;
        spread += prev.iter().map(|p| (p - c).norm_squared()).sum::<f64>() / n as f64;
    }
    let t = trials as f64;
    let rms_radius = (spread / t).sqrt();
    // Per-trial std of scale and angle ≈ σ / (√n · r_rms).
    let bound = 3.0 * sigma / ((n as f64).sqrt() * rms_radius);
    assert!((sum_s / t - truth.scale()).abs() < bound);
    assert!((sum_th / t - truth.rotation()).abs() < bound);
    assert!((sum_tx / t - truth.offset().x).abs() < 3.0 * sigma * 20.0 / (n as f64).sqrt());
}

#[test]
fn tracker_spawns_then_updates() {
    let mut tr = BoxTracker::new(TrackerConfig::default());
    let image = bbox(0.0, 0.0, 640.0, 480.0);
    let out = tr.step(0, &[bbox(100.0, 100.0, 140.0, 130.0)], &image, |_| None);
    assert_eq!(out.spawned, vec![1]);
    let out = tr.step(1, &[bbox(102.0, 101.0, 142.0, 131.0)], &image, |_| {
        Some(SimilarityTransform2D::identity())
    });
    assert_eq!(out.updated, vec![1]);
    assert_eq!(tr.get(1).unwrap().hits, 2);
    assert_eq!(tr.log_records(1).len(), 1);
}

fn box_strategy() -> impl Strategy<Value = BBox> {
    (0.0..500.0f64, 0.0..400.0f64, 1.0..120.0f64, 1.0..80.0f64).prop_map(|(u, v, w, h)| bbox(u, v, u + w, v + h))
}

fn similarity_strategy() -> impl Strategy<Value = SimilarityTransform2D> {
    (0.8..1.25f64, -0.5..0.5f64, -20.0..20.0f64, -20.0..20.0f64)
        .prop_map(|(s, th, tx, ty)| SimilarityTransform2D::from_params(s, th, tx, ty))
}

#[derive(Clone, Debug)]
enum Op {
    Predict(SimilarityTransform2D),
    Update(BBox),
    Blind,
}

fn op_strategy() -> impl Strategy<Value = Op> {
    prop_oneof![
        similarity_strategy().prop_map(Op::Predict),
        box_strategy().prop_map(Op::Update),
        Just(Op::Blind),
    ]
}

proptest! {
    #[test]
    fn iou_matches_raster(a in box_strategy(), b in box_strategy()) {
        let exact = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&exact));
        prop_assert!((exact - iou(&b, &a)).abs() < 1e-12);
        prop_assert!((exact - raster_iou(&a, &b, 0.25)).abs() < 0.03);
    }

    #[test]
    fn covariance_stays_psd(start in box_strategy(), ops in prop::collection::vec(op_strategy(), 1..40)) {
        let cfg = TrackerConfig::default();
        let mut t = BoxTrack::new(1, start, cfg.initial_sigma, 0);
        for op in ops {
            t = match op {
                Op::Predict(s) => predict(&t, &s, &cfg).unwrap(),
                Op::Update(z) => update(&t, &z, &cfg).unwrap(),
                Op::Blind => predict_without_motion(&t, &cfg).unwrap(),
            };
            prop_assert_eq!(t.sigma, t.sigma.transpose());
            prop_assert!(min_eig(&t.sigma) >= -1e-9);
        }
    }

    #[test]
    fn entropy_moves_the_right_way(start in box_strategy(), z in box_strategy(), k in 0usize..10) {
        let cfg = TrackerConfig::default();
        let mut t = BoxTrack::new(1, start, cfg.initial_sigma, 0);
        for _ in 0..k {
            t = update(&t, &z, &cfg).unwrap();
        }
        let h0 = t.entropy();
        let p = predict(&t, &SimilarityTransform2D::identity(), &cfg).unwrap();
        prop_assert!(p.entropy() >= h0 - 1e-12);
        prop_assert!(p.sigma.trace() >= t.sigma.trace());
        let u = update(&p, &z, &cfg).unwrap();
        prop_assert!(u.entropy() <= p.entropy() + 1e-12);
        prop_assert!(u.sigma.trace() < p.sigma.trace());
    }

    #[test]
    fn fixed_measurement_pulls_monotonically(start in box_strategy(), z in box_strategy()) {
        let cfg = TrackerConfig::default();
        let mut t = BoxTrack::new(1, start, cfg.initial_sigma, 0);
        let mut prev = (t.u.as_vector() - z.as_vector()).abs();
        for _ in 0..15 {
            t = update(&t, &z, &cfg).unwrap();
            let d = (t.u.as_vector() - z.as_vector()).abs();
            for i in 0..4 {
                prop_assert!(d[i] <= prev[i] + 1e-9);
            }
            prev = d;
        }
    }

    #[test]
    fn association_invariants(tracks in prop::collection::vec(box_strategy(), 0..6),
                              dets in prop::collection::vec(box_strategy(), 0..8)) {
        let cfg = TrackerConfig::default();
        let tracks: Vec<BoxTrack> = tracks
            .into_iter()
            .enumerate()
            .map(|(i, b)| BoxTrack::new(i as u64 + 1, b, cfg.initial_sigma, 0))
            .collect();
        let mut next = 100;
        let a = associate_and_register(&tracks, &dets, &cfg, 1, &mut next);
        let mut used: Vec<usize> = a.assignments.values().copied().collect();
        used.sort_unstable();
        let before = used.len();
        used.dedup();
        prop_assert_eq!(before, used.len());
        for (id, j) in &a.assignments {
            let t = tracks.iter().find(|t| t.id == *id).unwrap();
            prop_assert!(iou(&t.u, &dets[*j]) >= cfg.iou_register_threshold);
        }
        for n in &a.new_tracks {
            prop_assert!(tracks.iter().all(|t| iou(&t.u, &n.u) < cfg.iou_register_threshold));
        }
        prop_assert_eq!(a.assignments.len() + a.new_tracks.len() + a.dropped.len(), dets.len());
    }
}
