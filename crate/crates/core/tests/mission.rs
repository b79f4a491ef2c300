use std::collections::HashMap;

use nalgebra::Vector3;

use tlm_core::localizer::LocalizationStatus;
use tlm_core::mission::{
    emit_plot_data, run_scenario, write_run_dir, Mission, MissionError, MissionMode, RunOptions, ScenarioConfig,
};
use tlm_core::sim::NoiseModel;

fn modes(cfg: &ScenarioConfig, seed: u64) -> Vec<MissionMode> {
    let out = run_scenario(cfg, seed, RunOptions::default()).unwrap();
    out.report.transitions.iter().map(|t| t.to).collect()
}

fn dist_to_segment(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let s = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + ab * s - p).norm()
}

#[test]
fn empty_world_searches_and_ends() {
    let mut cfg = ScenarioConfig::default_single_target();
    cfg.targets.clear();
    let out = run_scenario(&cfg, 0, RunOptions::default()).unwrap();
    assert_eq!(out.report.targets_total, 0);
    assert_eq!(out.report.targets_found, 0);
    assert!(out.report.transitions.is_empty());
    assert!(!out.report.timed_out);
    assert!(out.report.all_found());
}

#[test]
fn one_target_one_cycle() {
    use MissionMode::*;
    let cfg = ScenarioConfig::default_single_target();
    assert_eq!(modes(&cfg, 0), vec![FineLocalize, Map, Search]);
}

#[test]
fn two_targets_two_cycles() {
    use MissionMode::*;
    let cfg = ScenarioConfig::default_two_targets();
    assert_eq!(
        modes(&cfg, 1),
        vec![FineLocalize, Map, Search, FineLocalize, Map, Search]
    );
}

#[test]
fn same_seed_same_run() {
    let cfg = ScenarioConfig::default_single_target();
    let a = run_scenario(&cfg, 7, RunOptions::default()).unwrap();
    let b = run_scenario(&cfg, 7, RunOptions::default()).unwrap();
    assert_eq!(a.report.to_json(), b.report.to_json());
    assert_eq!(a.logs, b.logs);
    let c = run_scenario(&cfg, 8, RunOptions::default()).unwrap();
    assert_ne!(a.logs.flown, c.logs.flown);
}

#[test]
fn dumping_particles_does_not_change_the_run() {
    let cfg = ScenarioConfig::default_single_target();
    let base = run_scenario(&cfg, 3, RunOptions::default()).unwrap();
    let dump = run_scenario(
        &cfg,
        3,
        RunOptions {
            dump_particles: true,
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert_eq!(base.report, dump.report);
    assert_eq!(base.logs.flown, dump.logs.flown);

    // Without dumps, one snapshot per status change seen in the metrics.
    let mut last: HashMap<u64, LocalizationStatus> = HashMap::new();
    let mut changes = 0;
    for m in &base.logs.metrics {
        let prev = last.insert(m.target_id, m.status).unwrap_or(LocalizationStatus::Rough);
        changes += (prev != m.status) as usize;
    }
    assert!(changes >= 2);
    assert_eq!(base.logs.snapshots.len(), changes);
    assert!(dump.logs.snapshots.len() > changes + base.report.transitions.len());
}

#[test]
fn gamma_must_exceed_half_beta() {
    let mut cfg = ScenarioConfig::default_single_target();
    cfg.camera.gamma_deg = 15.0;
    match cfg.validate() {
        Err(MissionError::Validation(msg)) => assert!(msg.contains("mapping geometry"), "{msg}"),
        other => panic!("expected validation error, got {other:?}"),
    }
    assert!(Mission::new(&cfg, 0, RunOptions::default()).is_err());
    assert!(run_scenario(&cfg, 0, RunOptions::default()).is_err());
}

#[test]
fn flown_path_follows_the_plan() {
    let mut cfg = ScenarioConfig::default_single_target();
    cfg.noise = NoiseModel::noiseless();
    let out = run_scenario(&cfg, 0, RunOptions::default()).unwrap();
    assert!(out.report.all_found());

    // Each plan starts at its departure point; segments join consecutive rows.
    let mut segments = Vec::new();
    let mut prev: Option<Vector3<f64>> = None;
    for r in &out.logs.plans {
        let p = Vector3::new(r.x, r.y, r.z);
        if let (Some(a), false) = (prev, r.phase.ends_with("_departure")) {
            segments.push((a, p));
        }
        prev = Some(p);
    }
    // Braking before a new plan continues along the old segment.
    let departures: Vec<Vector3<f64>> = out
        .logs
        .plans
        .iter()
        .filter(|r| r.phase.ends_with("_departure"))
        .map(|r| Vector3::new(r.x, r.y, r.z))
        .collect();
    let worst = out
        .logs
        .flown
        .iter()
        .map(|f| {
            let p = Vector3::new(f.x, f.y, f.z);
            let on_plan = segments
                .iter()
                .map(|(a, b)| dist_to_segment(&p, a, b))
                .fold(f64::INFINITY, f64::min);
            let near_departure = departures.iter().map(|d| (p - d).norm()).fold(f64::INFINITY, f64::min);
            on_plan.min(near_departure)
        })
        .fold(0.0, f64::max);
    assert!(worst < 0.3, "flown path strays {worst:.3} m from the plan");
}

#[test]
fn search_resumes_where_it_left_off() {
    let cfg = ScenarioConfig::default_two_targets();
    let mut m = Mission::new(&cfg, 2, RunOptions::default()).unwrap();
    let mut resume = 0;
    let mut resumes = 0;
    loop {
        let ev = m.tick();
        let s = m.state();
        assert!(s.resume_waypoint_index >= resume);
        assert_eq!(s.active_target.is_some(), s.mode != MissionMode::Search);
        resume = s.resume_waypoint_index;
        if let Some(t) = &ev.transition {
            if t.to == MissionMode::Search {
                resumes += 1;
                let expected = m.search_path()[s.resume_waypoint_index];
                assert_eq!(m.follower().path()[0], expected);
            }
        }
        if ev.finished {
            break;
        }
    }
    assert_eq!(resumes, 2);
    let out = m.finish();
    assert!(out.report.all_found());
}

#[test]
fn every_found_target_has_a_lambda_series() {
    let cfg = ScenarioConfig::default_two_targets();
    let out = run_scenario(&cfg, 0, RunOptions::default()).unwrap();
    for t in &out.report.targets {
        let id = t.hypothesis_id.expect("found");
        let series: Vec<f64> = out
            .logs
            .metrics
            .iter()
            .filter(|m| m.target_id == id)
            .map(|m| m.lambda_max)
            .collect();
        assert!(series.len() >= 5);
        assert!(series.last().unwrap() < &(0.1 * t.initial_lambda_max.unwrap()));
    }
}

#[test]
fn converges_under_large_pose_noise() {
    let mut cfg = ScenarioConfig::default_single_target();
    cfg.noise.pose_sigma_xyz = 0.5;
    let mut found = 0;
    let mut errors = Vec::new();
    for seed in 0..10 {
        let out = run_scenario(&cfg, seed, RunOptions::default()).unwrap();
        if out.report.all_found() {
            found += 1;
            errors.push(out.report.targets[0].localization_error.unwrap());
        }
    }
    eprintln!("pose sigma 0.5: {found}/10 found, errors {errors:.3?}");
    assert!(found >= 9);
}

#[test]
fn run_dir_round_trip() {
    let cfg = ScenarioConfig::default_single_target();
    let out = run_scenario(
        &cfg,
        0,
        RunOptions {
            dump_particles: true,
            ..RunOptions::default()
        },
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run_dir(dir.path(), &cfg, &out).unwrap();
    for f in [
        "config.json",
        "report.json",
        "tracks.csv",
        "path.csv",
        "coverage.json",
        "flown.csv",
        "metrics.csv",
    ] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let dumps = std::fs::read_dir(dir.path().join("particles")).unwrap().count();
    assert_eq!(dumps, out.logs.snapshots.len());
    let back = ScenarioConfig::from_json(&std::fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(back.targets, cfg.targets);

    let plots = emit_plot_data(dir.path()).unwrap();
    assert!(!plots.is_empty());
    assert!(plots.iter().all(|p| p.is_file()));
}

#[test]
fn config_errors_name_the_field() {
    let mut v: serde_json::Value = serde_json::from_str(&ScenarioConfig::default_single_target().to_json()).unwrap();
    v["noise"]["detect_prob"] = serde_json::json!("high");
    match ScenarioConfig::from_json(&v.to_string()) {
        Err(MissionError::Parse { path, .. }) => assert_eq!(path, "noise.detect_prob"),
        other => panic!("expected parse error, got {other:?}"),
    }
    let mut v: serde_json::Value = serde_json::from_str(&ScenarioConfig::default_single_target().to_json()).unwrap();
    v["mission"]["n_per_cirle"] = serde_json::json!(12);
    assert!(matches!(
        ScenarioConfig::from_json(&v.to_string()),
        Err(MissionError::Parse { .. })
    ));
    assert!(ScenarioConfig::from_json("{").is_err());
}

#[test]
fn missing_depth_limit_follows_altitude() {
    let mut v: serde_json::Value = serde_json::from_str(&ScenarioConfig::default_single_target().to_json()).unwrap();
    v["h_s"] = serde_json::json!(15.0);
    v["localizer"].as_object_mut().unwrap().remove("d_m");
    let cfg = ScenarioConfig::from_json(&v.to_string()).unwrap();
    assert_eq!(cfg.localizer.d_m, 30.0);
}
