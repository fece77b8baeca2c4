use std::f64::consts::PI;

use blindeq::constellation::{build_uniform_qam64, sample_frame};
use blindeq::harness::{
    read_summary, read_trajectories, run_single, run_sweep, write_meta, write_summary, write_trajectories,
    ConstellationChoice, ExperimentConfig, SchemeId, SweepParam,
};
use blindeq::metrics::score_frame;
use blindeq::{DualPol, C64};

fn small(scheme: SchemeId) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(scheme, ConstellationChoice::Uniform);
    cfg.runs = 2;
    cfg.frames = 3;
    cfg.symbols_per_frame = 2000;
    cfg
}

#[test]
fn cma_batch_locks_on_mild_channel() {
    let mut cfg = small(SchemeId::CmaBatch);
    cfg.frames = 6;
    cfg.symbols_per_frame = 10_000;
    cfg.channel.l_cd = 0.0;
    let r = run_single(&cfg, 5).unwrap();
    assert!(r.final_bmi() > 5.5, "final BMI {}", r.final_bmi());
    assert!(!r.stats.failed);
}

#[test]
fn vae_flex_locks_on_hv_rotation() {
    let mut cfg = small(SchemeId::VaeFlex);
    cfg.hv_sweep_point(0.2 * PI);
    cfg.frames = 2;
    cfg.symbols_per_frame = 10_000;
    let r = run_single(&cfg, 3).unwrap();
    assert!(r.final_bmi() > 5.0, "final BMI {}", r.final_bmi());
}

#[test]
fn runs_depend_only_on_seed() {
    let cfg = small(SchemeId::VaeBatch);
    let a = run_single(&cfg, 11).unwrap();
    let b = run_single(&cfg, 11).unwrap();
    let c = run_single(&cfg, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.stats.trajectory, c.stats.trajectory);
}

#[test]
fn learning_rate_halves_on_schedule() {
    let mut cfg = small(SchemeId::CmaFlex);
    cfg.frames = 11;
    cfg.symbols_per_frame = 600;
    let r = run_single(&cfg, 0).unwrap();
    let lr = cfg.scheme.learning_rate;
    assert_eq!(r.learning_rates[4], lr);
    assert_eq!(r.learning_rates[5], lr / 2.0);
    assert_eq!(r.learning_rates[10], lr / 4.0);
}

#[test]
fn result_files_round_trip() {
    let cfg = small(SchemeId::Cma);
    let stats = run_sweep(&cfg, SweepParam::Cd, &[0.0, 0.5], std::slice::from_ref(&cfg.scheme)).unwrap();

    let mut buf = Vec::new();
    write_trajectories(&mut buf, &stats).unwrap();
    let rows = read_trajectories(buf.as_slice()).unwrap();
    assert_eq!(rows.len(), 2 * cfg.runs * cfg.frames);
    let first = &stats.points[0].runs[0].stats.trajectory[0];
    assert_eq!((rows[0].frame, rows[0].bmi_mean), (1, first.bmi_mean));
    assert_eq!(rows.last().unwrap().sweep_value, 0.5);

    let mut buf = Vec::new();
    write_summary(&mut buf, &stats).unwrap();
    let summary = read_summary(buf.as_slice()).unwrap();
    assert_eq!(summary.len(), 2);
    assert_eq!(summary[1].failed_pct, stats.points[1].aggregate.failed_pct);
    assert_eq!(summary[1].k_bar, stats.points[1].aggregate.k_bar);

    let mut buf = Vec::new();
    write_meta(&mut buf, &stats).unwrap();
    let meta: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert_eq!(meta["sweep_param"], "cd");
    assert_eq!(meta["points"][1]["config"]["channel"]["l_cd"], 500.0);
    assert_eq!(meta["points"][0]["seeds"], serde_json::json!([0, 1]));
}

#[test]
fn scoring_is_blind_to_swap_rotation_and_delay() {
    let c = build_uniform_qam64();
    let f = sample_frame(&c, 3000, 8).unwrap();
    let ref_score = score_frame(1, &f.symbols, &f.indices, &c, 10).unwrap();
    // V arrives on the H output rotated by j and two symbols late; H on V by -1
    let delayed: Vec<C64> = std::iter::repeat_n(C64::new(0.0, 0.0), 2)
        .chain(f.symbols[1].iter().map(|s| s * C64::i()))
        .take(3000)
        .collect();
    let scrambled: DualPol = [delayed, f.symbols[0].iter().map(|s| -s).collect()];
    let s = score_frame(1, &scrambled, &f.indices, &c, 10).unwrap();
    assert!((s.bmi_mean - ref_score.bmi_mean).abs() < 1e-6, "{} vs {}", s.bmi_mean, ref_score.bmi_mean);
    assert!(s.bmi_mean > 5.99);
}
