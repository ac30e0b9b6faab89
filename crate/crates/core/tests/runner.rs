use std::fs;

use freesurf::report::{fmt_num, parse_csv, write_csv, CheckStatus};
use freesurf::runner::{
    parse_curve_csv, simulate, verify_identities, write_artifacts, InitialSpec, RunConfig, RunError,
};

fn small_reference() -> RunConfig {
    RunConfig {
        n_markers: 33,
        wall_panels_per_side: 32,
        redistribution_period: 0,
        record_dt: 2e-4,
        ..Default::default()
    }
}

fn still_fluid() -> RunConfig {
    RunConfig {
        initial: InitialSpec::Modes { terms: vec![] },
        n_markers: 17,
        wall_panels_per_side: 16,
        record_dt: 0.1,
        dt_max: 0.1,
        t_end_cap: Some(1.0),
        ..Default::default()
    }
}

#[test]
fn config_defaults_round_trip() {
    let cfg = RunConfig::from_json("{}").unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!(RunConfig::from_json(&cfg.to_pretty_json()).unwrap(), cfg);
    assert_eq!(cfg.redistribution_period, 5);
    assert_eq!(cfg.t_end_cap, None);
}

#[test]
fn config_violations_are_input_errors() {
    for text in [
        r#"{"n_markers": 7}"#,
        r#"{"t_end_cap": 0.0}"#,
        r#"{"tolerances": {"ident_tol": 0.0}}"#,
        r#"{"tolerances": {"area_tol": -1e-3}}"#,
        r#"{"detectors": {"l_max": 0.0}}"#,
        r#"{"cfl": 2.0}"#,
        r#"{"no_such_key": 1}"#,
        r#"{"initial": {"kind": "reference", "amplitude": 0.0}}"#,
        r#"{"initial": {"kind": "modes", "terms": [{"k": 2, "a": 1.0}]}}"#,
        r#"{"validation": {"panel_counts": [32]}}"#,
        "not json",
    ] {
        let err = RunConfig::from_json(text).unwrap_err();
        assert!(matches!(err, RunError::Input(_)), "{text}");
        assert_eq!(err.exit_code(), 2);
    }
}

#[test]
fn still_fluid_runs_to_cap_with_zero_functional() {
    let out = simulate(&still_fluid(), None).unwrap();
    let r = &out.report;
    assert!(r.breakdown.is_none());
    assert_eq!(r.t_final, 1.0);
    assert_eq!(r.exit_code(), 0);
    assert!(out.records.iter().all(|x| x.l == 0.0 && x.energy == 0.0));
    assert_eq!(out.records.len(), 11);
    for (k, rec) in out.records.iter().enumerate() {
        assert!((rec.t - 0.1 * k as f64).abs() < 1e-15);
    }
    // A = 0: the Riccati-based checks are skipped, everything else holds.
    assert_eq!(r.verdicts.riccati_status, CheckStatus::Skipped);
    for (name, b) in r.verdicts.booleans() {
        assert_ne!(b, Some(false), "{name}");
    }
}

#[test]
fn reference_run_reports_breakdown_and_passes() {
    let out = simulate(&small_reference(), None).unwrap();
    let r = &out.report;
    let b = r.breakdown.as_ref().expect("breakdown");
    assert!(b.t_break < r.verdicts.t_star.unwrap());
    assert!(!r.undiagnosed_failure);
    assert!(r.a_relative_difference.unwrap() < 1e-3);
    assert!(r.runtime.compat_max < 1e-8);
    assert_eq!(r.verdicts.riccati_dominated, Some(true));
    assert_eq!(r.verdicts.blowup_bound_held, Some(true));
    // Records land on multiples of record_dt.
    for (k, rec) in out.records.iter().enumerate() {
        assert!((rec.t - 2e-4 * k as f64).abs() < 1e-15, "{}", rec.t);
    }
}

#[test]
fn offline_verification_matches_and_detects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(&small_reference(), None).unwrap();
    write_artifacts(&out, dir.path()).unwrap();
    for f in ["config.json", "diagnostics.csv", "report.json", "snapshots/0000.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let fresh = verify_identities(dir.path()).unwrap();
    assert!(fresh.mismatches.is_empty(), "{:?}", fresh.mismatches);
    assert_eq!(fresh.verdicts.booleans(), out.report.verdicts.booleans());

    // Hand-corrupt L: the functional collapses halfway through.
    let csv = dir.path().join("diagnostics.csv");
    let mut rows = parse_csv(&fs::read_to_string(&csv).unwrap()).unwrap();
    let half = rows.len() / 2;
    rows[half].l = 0.5 * rows[0].l;
    fs::write(&csv, write_csv(&rows)).unwrap();
    let corrupt = verify_identities(dir.path()).unwrap();
    assert_eq!(corrupt.verdicts.riccati_dominated, Some(false));
    assert_eq!(corrupt.exit_code(), 1);

    // One row: derivative checks cannot run.
    fs::write(&csv, write_csv(&rows[..1])).unwrap();
    let single = verify_identities(dir.path()).unwrap();
    assert_eq!(single.verdicts.derivative_status, CheckStatus::Insufficient);
    assert_eq!(single.verdicts.derivative_status.as_str(), "insufficient records");
}

#[test]
fn offline_verification_rejects_missing_or_corrupt_input() {
    let dir = tempfile::tempdir().unwrap();
    let err = verify_identities(dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 2);

    let out = simulate(&still_fluid(), None).unwrap();
    write_artifacts(&out, dir.path()).unwrap();
    fs::write(dir.path().join("diagnostics.csv"), "t,L\n1,2\n").unwrap();
    assert_eq!(verify_identities(dir.path()).unwrap_err().exit_code(), 2);
}

#[test]
fn curve_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let n = 17;
    let mut text = String::from("alpha,x1,x2,phi\n");
    for i in 0..n {
        let x = i as f64 / (n - 1) as f64;
        text.push_str(&format!("{},{},{},{}\n", fmt_num(x), fmt_num(x), fmt_num(1.0), fmt_num(0.0)));
    }
    fs::write(dir.path().join("calm.csv"), &text).unwrap();
    let state = parse_curve_csv(&text).unwrap();
    assert_eq!(state.marker_count(), n);

    let cfg_path = dir.path().join("run.json");
    fs::write(
        &cfg_path,
        r#"{"initial": {"kind": "curve_file", "path": "calm.csv"}, "n_markers": 17, "wall_panels_per_side": 16,
            "t_end_cap": 0.2, "record_dt": 0.1, "dt_max": 0.1}"#,
    )
    .unwrap();
    let cfg = RunConfig::load(&cfg_path).unwrap();
    let out = simulate(&cfg, None).unwrap();
    assert_eq!(out.report.a_oracle, None);
    assert_eq!(out.report.exit_code(), 0);

    // A uniform horizontal stream moves the pinned corners: refused.
    let moving: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                format!("{l}\n")
            } else {
                let x = (i - 1) as f64 / (n - 1) as f64;
                format!("{},{}\n", l.rsplit_once(',').unwrap().0, fmt_num(x))
            }
        })
        .collect();
    fs::write(dir.path().join("calm.csv"), moving).unwrap();
    let err = simulate(&RunConfig::load(&cfg_path).unwrap(), None).unwrap_err();
    assert_eq!(err.exit_code(), 2);

    assert!(parse_curve_csv("x,y\n").is_err());
    assert!(parse_curve_csv("alpha,x1,x2,phi\n0,0,1\n").is_err());
}

#[test]
fn disagreeing_a_evaluations_refuse_to_start() {
    let cfg = RunConfig { n_markers: 9, wall_panels_per_side: 8, ..small_reference() };
    match simulate(&cfg, None) {
        Err(RunError::Input(m)) => assert!(m.contains("disagree"), "{m}"),
        Err(e) => panic!("unexpected error {e}"),
        Ok(o) => panic!("expected refusal, A differs by {:?}", o.report.a_relative_difference),
    }
}

#[test]
fn failing_initial_diagnostics_is_an_input_error() {
    let cfg = RunConfig { near_field_factor: 1e6, ..still_fluid() };
    match simulate(&cfg, None) {
        Err(RunError::Input(m)) => assert!(m.contains("t = 0"), "{m}"),
        other => panic!("expected input error, got {:?}", other.map(|o| o.report.exit_code())),
    }
}

#[test]
fn undiagnosed_failure_takes_precedence_in_exit_code() {
    let mut out = simulate(&still_fluid(), None).unwrap();
    assert_eq!(out.report.exit_code(), 0);
    out.report.undiagnosed_failure = true;
    assert_eq!(out.report.exit_code(), 3);
    out.report.verdicts.riccati_dominated = Some(false);
    assert_eq!(out.report.exit_code(), 3);
}
