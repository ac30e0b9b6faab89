use freesurf::diagnostics::{
    blowup_bound, detect_breakdown, riccati_envelope, virial_l_of_state, BreakdownKind, DetectorContext,
    DetectorThresholds, RecordIntegrals,
};
use freesurf::flow::{FlowState, PotentialFlow};
use freesurf::geometry::{InterfaceCurve, Point};
use freesurf::initial_data::{make_reference_data, sample_initial_state};
use freesurf::pressure::{pressure_at, wall_neumann_residual, wall_pressure_integral, PressureField};

mod common;
use common::{pressure_oracle, wall_integral};

fn reference_field(amplitude: f64) -> PressureField {
    let state = sample_initial_state(&make_reference_data(1.0).unwrap().scaled(amplitude), 65).unwrap();
    PressureField::new(&PotentialFlow::new(128).solve(&state).unwrap(), 2.0).unwrap()
}

#[test]
fn initial_pressure_matches_series() {
    let field = reference_field(1.0);
    let pts = [Point::new(0.5, 0.5), Point::new(0.3, 0.7), Point::new(0.7, 0.2), Point::new(0.9, 0.85)];
    let p = pressure_at(&field, &pts).unwrap();
    let scale = pts.iter().map(|&q| pressure_oracle(q).abs()).fold(1.0, f64::max);
    for (q, v) in pts.iter().zip(&p) {
        assert!((v - pressure_oracle(*q)).abs() < 2e-2 * scale, "{q:?}: {v} vs {}", pressure_oracle(*q));
    }
}

#[test]
fn pressure_is_even_in_the_potential() {
    let (a, b) = (reference_field(1.0), reference_field(-1.0));
    let pts = [Point::new(0.4, 0.4), Point::new(0.6, 0.8)];
    let (pa, pb) = (pressure_at(&a, &pts).unwrap(), pressure_at(&b, &pts).unwrap());
    for (x, y) in pa.iter().zip(&pb) {
        assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{x} {y}");
    }
    assert!((wall_pressure_integral(&a) - wall_pressure_integral(&b)).abs() < 1e-10);
}

#[test]
fn wall_pressure_and_neumann_condition() {
    let field = reference_field(1.0);
    let w = wall_pressure_integral(&field);
    let exact = wall_integral(|y| pressure_oracle(Point::new(1.0, y)));
    assert!((w - exact).abs() < 2e-2 * exact.abs(), "{w} {exact}");
    let r = wall_neumann_residual(&field, 8).unwrap();
    assert!(r < 5e-2, "{r}");
}

#[test]
fn domain_integral_of_pressure() {
    let field = reference_field(1.0);
    let exact = common::square_integral(pressure_oracle);
    let d = field.domain_integral();
    assert!((d - exact).abs() < 2e-2 * exact.abs(), "{d} {exact}");
}

#[test]
fn still_fluid_has_vanishing_integrals() {
    let state = FlowState::new(0.0, InterfaceCurve::flat(17).unwrap(), vec![0.0; 17]).unwrap();
    let sol = PotentialFlow::new(16).solve(&state).unwrap();
    let field = PressureField::new(&sol, 2.0).unwrap();
    assert_eq!(virial_l_of_state(&state, &sol).l, 0.0);
    let r = RecordIntegrals::compute(&state, &sol, &field, 8).unwrap();
    assert_eq!(r.volume_rhs(), 0.0);
    assert_eq!(r.wall_rhs(), 0.0);
    assert_eq!(wall_pressure_integral(&field), 0.0);
}

#[test]
fn envelope_and_bound() {
    let (a, c1) = (2.0, 4.0 / 3.0);
    assert_eq!(blowup_bound(a, c1).unwrap(), c1 / a);
    assert_eq!(riccati_envelope(a, c1, 0.0).unwrap(), a);
    let t = 0.5;
    let y = riccati_envelope(a, c1, t).unwrap();
    assert!((y - a / (1.0 - a * t / c1)).abs() < 1e-14);
    // y' = y²/c1 by central differences.
    let h = 1e-6;
    let dy = (riccati_envelope(a, c1, t + h).unwrap() - riccati_envelope(a, c1, t - h).unwrap()) / (2.0 * h);
    assert!((dy - y * y / c1).abs() < 1e-6 * dy);
    assert!(riccati_envelope(a, c1, c1 / a).is_err());
    assert!(riccati_envelope(-1.0, c1, 0.1).is_err());
    assert!(blowup_bound(0.0, c1).is_err());
}

#[test]
fn detector_priority() {
    let ctx = DetectorContext { initial_spacing: 0.25, collapsed_dt: Some(1e-12), l: Some(1e9) };
    let th = DetectorThresholds::default();
    let mk = |pts: Vec<Point>| {
        let n = pts.len();
        let alpha = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        FlowState::new(0.1, InterfaceCurve::new(alpha, pts).unwrap(), vec![0.0; n]).unwrap()
    };
    let touching = mk(vec![
        Point::new(0.0, 1.0),
        Point::new(0.25, 0.0),
        Point::new(0.5, 1.0),
        Point::new(0.75, 1.0),
        Point::new(1.0, 1.0),
    ]);
    assert_eq!(detect_breakdown(&touching, &ctx, &th).unwrap().kind, BreakdownKind::BottomContact);
    let crossing = mk(vec![
        Point::new(0.0, 1.0),
        Point::new(0.7, 0.8),
        Point::new(0.7, 1.2),
        Point::new(0.3, 0.5),
        Point::new(1.0, 1.0),
    ]);
    let s = detect_breakdown(&crossing, &ctx, &th).unwrap();
    assert_eq!((s.kind, s.t_break), (BreakdownKind::SelfIntersection, 0.1));
    let flat = mk(InterfaceCurve::flat(5).unwrap().points().to_vec());
    assert_eq!(detect_breakdown(&flat, &ctx, &th).unwrap().kind, BreakdownKind::TimestepCollapse);
    let calm = DetectorContext { collapsed_dt: None, l: Some(1.0), ..ctx };
    assert!(detect_breakdown(&flat, &calm, &th).is_none());
}
