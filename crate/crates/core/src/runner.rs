//! Config-driven runs: the time loop with recording, breakdown handling,
//! artifacts on disk, and offline re-verification of a run directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bem::{SolverOptions, DEFAULT_NEAR_FIELD_FACTOR};
use crate::diagnostics::{
    c1_from_area, centered_l_prime, detect_breakdown, volume_identity_residual, wall_identity_residual, inequality_checks,
    virial_l_of_state, BreakdownKind, BreakdownSignal, DetectorContext, DetectorThresholds, RecordIntegrals,
};
use crate::error::Error;
use crate::flow::{
    adaptive_dt, redistribute_markers, rk4_step_from, DtLimits, Dynamics, FlowSolution, FlowState, PotentialFlow,
    StateDerivative,
};
use crate::geometry::{polygon_area, InterfaceCurve, Point};
use crate::initial_data::{initial_A, make_reference_data, sample_initial_state, ModePotential, ModeTerm};
use crate::pressure::{wall_neumann_residual, PressureField};
use crate::report::{
    evaluate, fmt_num, parse_csv, write_csv, write_flat_json, DiagnosticsRecord, JsonField, RunMeta, Tolerances,
    Verdicts,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Two-mode reference potential with the given amplitude.
    Reference { amplitude: f64 },
    /// Explicit cosine-mode list.
    Modes { terms: Vec<ModeTerm> },
    /// CSV with header `alpha,x1,x2,phi`; relative paths resolve against the
    /// config file.
    CurveFile { path: PathBuf },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Reference { amplitude: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Detectors {
    pub collide_tol: f64,
    pub curv_max_factor: f64,
    pub l_max: f64,
}

impl Default for Detectors {
    fn default() -> Self {
        let d = DetectorThresholds::default();
        Self { collide_tol: d.collide_tol, curv_max_factor: d.curv_max_factor, l_max: d.l_max }
    }
}

impl From<Detectors> for DetectorThresholds {
    fn from(d: Detectors) -> Self {
        Self { collide_tol: d.collide_tol, curv_max_factor: d.curv_max_factor, l_max: d.l_max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSpec {
    /// Panels per side of the unit square.
    pub panel_counts: Vec<usize>,
    pub modes: Vec<u32>,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        Self { panel_counts: vec![32, 64, 128, 256], modes: vec![1, 2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub initial: InitialSpec,
    pub n_markers: usize,
    pub wall_panels_per_side: usize,
    pub cfl: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub record_dt: f64,
    /// Defaults to `min(1, c1 / (2 |A|))`, or 1 when `A = 0`.
    pub t_end_cap: Option<f64>,
    pub tolerances: Tolerances,
    pub detectors: Detectors,
    /// Redistribute every this many steps; 0 disables.
    pub redistribution_period: usize,
    pub interior_lattice: usize,
    pub near_field_factor: f64,
    pub a_quadrature_order: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Negative control for `validate-bem`: reverses the double-layer sign.
    pub flip_double_layer: bool,
    pub validation: ValidationSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            initial: InitialSpec::default(),
            n_markers: 65,
            wall_panels_per_side: 64,
            cfl: 0.5,
            dt_min: 1e-8,
            dt_max: 1e-3,
            record_dt: 1e-4,
            t_end_cap: None,
            tolerances: Tolerances::default(),
            detectors: Detectors::default(),
            redistribution_period: 5,
            interior_lattice: 16,
            near_field_factor: DEFAULT_NEAR_FIELD_FACTOR,
            a_quadrature_order: 16,
            output_dir: PathBuf::from("runs/reference"),
            seed: 0,
            flip_double_layer: false,
            validation: ValidationSpec::default(),
        }
    }
}

/// Failures of a run as a whole, mapped onto process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

fn input<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Input(e.to_string())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| RunError::Input(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads and validates a config; a relative curve path is resolved
    /// against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::from_json(&text)?;
        if let InitialSpec::CurveFile { path: curve } = &mut cfg.initial {
            if curve.is_relative() {
                if let Some(dir) = path.parent() {
                    *curve = dir.join(&*curve);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Input(m));
        if self.n_markers < 8 {
            return bad(format!("n_markers = {} must be at least 8", self.n_markers));
        }
        if self.wall_panels_per_side < 4 {
            return bad(format!("wall_panels_per_side = {} must be at least 4", self.wall_panels_per_side));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl = {} must lie in (0, 1]", self.cfl));
        }
        if !(self.dt_min > 0.0 && self.dt_max >= self.dt_min) {
            return bad("need 0 < dt_min <= dt_max".into());
        }
        if !(self.record_dt > 0.0) {
            return bad("record_dt must be positive".into());
        }
        if let Some(t) = self.t_end_cap {
            if !(t > 0.0 && t.is_finite()) {
                return bad("t_end_cap must be positive".into());
            }
        }
        for (name, v) in self.tolerances.entries() {
            if !(v > 0.0) {
                return bad(format!("tolerance {name} = {v} must be positive"));
            }
        }
        let d = self.detectors;
        if !(d.collide_tol > 0.0 && d.curv_max_factor > 0.0 && d.l_max > 0.0) {
            return bad("detector thresholds must be positive".into());
        }
        if self.interior_lattice < 2 || !(self.near_field_factor > 0.0) {
            return bad("interior_lattice >= 2 and near_field_factor > 0 required".into());
        }
        if !(1..=32).contains(&self.a_quadrature_order) {
            return bad("a_quadrature_order must lie in 1..=32".into());
        }
        if self.validation.panel_counts.len() < 2 || self.validation.panel_counts.iter().any(|&n| n < 4) {
            return bad("validation needs at least two panel counts, each >= 4".into());
        }
        if self.validation.modes.is_empty() || self.validation.modes.contains(&0) {
            return bad("validation modes must be positive".into());
        }
        match &self.initial {
            InitialSpec::Reference { amplitude } if !(amplitude.is_finite() && *amplitude != 0.0) => {
                bad("reference amplitude must be finite and nonzero".into())
            }
            InitialSpec::Modes { terms } => {
                ModePotential::new(terms.clone()).map_err(input)?.check_corners().map_err(input)
            }
            _ => Ok(()),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { flip_double_layer: self.flip_double_layer }
    }

    pub fn to_pretty_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serialisation");
        s.push('\n');
        s
    }
}

/// Initial state plus the potential it came from, if analytic.
pub struct InitialData {
    pub state: FlowState,
    pub potential: Option<ModePotential>,
}

pub fn load_initial_data(cfg: &RunConfig) -> Result<InitialData, RunError> {
    match &cfg.initial {
        InitialSpec::Reference { amplitude } => {
            let p = make_reference_data(*amplitude).map_err(input)?;
            Ok(InitialData { state: sample_initial_state(&p, cfg.n_markers).map_err(input)?, potential: Some(p) })
        }
        InitialSpec::Modes { terms } => {
            let p = ModePotential::new(terms.clone()).map_err(input)?;
            p.check_corners().map_err(input)?;
            Ok(InitialData { state: sample_initial_state(&p, cfg.n_markers).map_err(input)?, potential: Some(p) })
        }
        InitialSpec::CurveFile { path } => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            Ok(InitialData { state: parse_curve_csv(&text).map_err(input)?, potential: None })
        }
    }
}

/// `alpha,x1,x2,phi` rows, left corner first.
pub fn parse_curve_csv(text: &str) -> crate::Result<FlowState> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(|h| h.replace(' ', "")) != Some("alpha,x1,x2,phi".to_string()) {
        return Err(Error::Argument("curve file needs header alpha,x1,x2,phi".into()));
    }
    let (mut alpha, mut pts, mut phi) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let v: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Argument(format!("curve row {}: not numeric", i + 1)))?;
        if v.len() != 4 {
            return Err(Error::Argument(format!("curve row {} has {} columns", i + 1, v.len())));
        }
        alpha.push(v[0]);
        pts.push(Point::new(v[1], v[2]));
        phi.push(v[3]);
    }
    if pts.len() < 8 {
        return Err(Error::Argument("curve file needs at least 8 markers".into()));
    }
    FlowState::new(0.0, InterfaceCurve::new(alpha, pts)?, phi)
}

/// Run-time margins that are not recoverable from the table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeMargins {
    pub compat_max: f64,
    pub corner_residual_max: f64,
    pub wall_neumann_residual_max: f64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub a_boundary: f64,
    pub a_oracle: Option<f64>,
    pub a_relative_difference: Option<f64>,
    pub t_end_cap: f64,
    pub t_final: f64,
    pub breakdown: Option<BreakdownSignal>,
    /// Breakdown caused by a solver failure no detector explains.
    pub undiagnosed_failure: bool,
    pub records: usize,
    pub verdicts: Verdicts,
    pub runtime: RuntimeMargins,
    pub compatibility_held: bool,
    pub config: RunConfig,
}

impl VerificationReport {
    pub fn checks_passed(&self) -> bool {
        self.verdicts.all_passed() && self.compatibility_held
    }

    /// 0 passed (breakdown allowed), 1 a check failed, 3 undiagnosed
    /// solver failure.
    pub fn exit_code(&self) -> i32 {
        if self.undiagnosed_failure {
            3
        } else if self.checks_passed() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        use JsonField::*;
        let v = &self.verdicts;
        let cfg = &self.config;
        let b = self.breakdown.as_ref();
        write_flat_json(&[
            ("A_boundary", Num(Some(self.a_boundary))),
            ("A_oracle", Num(self.a_oracle)),
            ("A_relative_difference", Num(self.a_relative_difference)),
            ("c1", Num(Some(v.c1))),
            ("T_star", Num(v.t_star)),
            ("T_break", Num(b.map(|s| s.t_break))),
            ("breakdown_kind", Str(b.map(|s| s.kind.as_str().to_string()))),
            ("breakdown_detail", Str(b.map(|s| s.detail.clone()))),
            ("undiagnosed_failure", Bool(Some(self.undiagnosed_failure))),
            ("t_final", Num(Some(self.t_final))),
            ("t_end_cap", Num(Some(self.t_end_cap))),
            ("records", Int(self.records as u64)),
            ("steps", Int(self.runtime.steps)),
            ("riccati_checks", Str(Some(v.riccati_status.as_str().to_string()))),
            ("derivative_checks", Str(Some(v.derivative_status.as_str().to_string()))),
            ("identity_checks", Str(Some(v.identity_status.as_str().to_string()))),
            ("riccati_dominated", Bool(v.riccati_dominated)),
            ("derivative_inequality_held", Bool(v.derivative_inequality_held)),
            ("pressure_positive", Bool(v.pressure_positive)),
            ("identities_converged", Bool(v.identities_converged)),
            ("schwarz_held", Bool(v.schwarz_held)),
            ("pressure_bound_held", Bool(v.pressure_bound_held)),
            ("energy_conserved", Bool(v.energy_conserved)),
            ("area_conserved", Bool(v.area_conserved)),
            ("blowup_bound_held", Bool(v.blowup_bound_held)),
            ("compatibility_held", Bool(Some(self.compatibility_held))),
            ("checks_passed", Bool(Some(self.checks_passed()))),
            ("riccati_margin", Num(v.riccati_margin)),
            ("derivative_margin", Num(v.derivative_margin)),
            ("positivity_margin", Num(v.positivity_margin)),
            ("volume_residual_max", Num(v.volume_residual_max)),
            ("wall_residual_max", Num(v.wall_residual_max)),
            ("pressure_slack_min", Num(v.pressure_slack_min)),
            ("schwarz_vol_min", Num(v.schwarz_vol_min)),
            ("schwarz_wall_min", Num(v.schwarz_wall_min)),
            ("energy_drift_max", Num(v.energy_drift_max)),
            ("area_drift_max", Num(v.area_drift_max)),
            ("compat_max", Num(Some(self.runtime.compat_max))),
            ("corner_residual_max", Num(Some(self.runtime.corner_residual_max))),
            ("wall_neumann_residual_max", Num(Some(self.runtime.wall_neumann_residual_max))),
            ("n_markers", Int(cfg.n_markers as u64)),
            ("wall_panels_per_side", Int(cfg.wall_panels_per_side as u64)),
            ("record_dt", Num(Some(cfg.record_dt))),
            ("cfl", Num(Some(cfg.cfl))),
            ("redistribution_period", Int(cfg.redistribution_period as u64)),
            ("interior_lattice", Int(cfg.interior_lattice as u64)),
        ])
    }
}

/// Everything a run produces; written to disk by [`write_artifacts`].
#[derive(Debug)]
pub struct RunOutput {
    pub report: VerificationReport,
    pub records: Vec<DiagnosticsRecord>,
    pub integrals: Vec<RecordIntegrals>,
    /// `(alpha, position)` per record.
    pub snapshots: Vec<(Vec<f64>, Vec<Point>)>,
}

/// Potential flow that remembers the worst compatibility residual of every
/// solve it performs.
struct TrackedFlow {
    flow: PotentialFlow,
    worst_compat: std::cell::Cell<f64>,
}

impl TrackedFlow {
    fn solve(&self, state: &FlowState) -> crate::Result<FlowSolution> {
        let sol = self.flow.solve(state)?;
        let c = sol.cauchy.relative_compatibility(&sol.mesh);
        self.worst_compat.set(self.worst_compat.get().max(c));
        Ok(sol)
    }
}

impl Dynamics for TrackedFlow {
    fn derivative(&self, state: &FlowState) -> crate::Result<StateDerivative> {
        Ok(self.solve(state)?.derivative())
    }
}

struct Recorded {
    integrals: RecordIntegrals,
    dt: f64,
}

/// Why the loop stopped early; the flag marks an undiagnosed failure.
type Halt = (BreakdownSignal, bool);

fn classify_failure(
    error: &Error,
    stage_state: Option<&FlowState>,
    base: &FlowState,
    ctx: &DetectorContext,
    thresholds: &DetectorThresholds,
) -> Halt {
    if let Some(s) = stage_state {
        if let Some(mut sig) = detect_breakdown(s, ctx, thresholds) {
            sig.t_break = base.t;
            sig.detail = format!("{} (during a step from t = {})", sig.detail, base.t);
            return (sig, false);
        }
    }
    let (kind, undiagnosed) = match error {
        Error::SelfIntersection(_) => (BreakdownKind::SelfIntersection, false),
        _ => (BreakdownKind::SolverFailure, true),
    };
    (BreakdownSignal { t_break: base.t, kind, detail: error.to_string() }, undiagnosed)
}

/// Progress sink; `None` is silent.
pub type Progress<'a> = Option<&'a mut dyn FnMut(&str)>;

pub fn simulate(cfg: &RunConfig, mut progress: Progress<'_>) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let mut say = |m: String| {
        if let Some(p) = progress.as_mut() {
            p(&m);
        }
    };
    let init = load_initial_data(cfg)?;
    let flow = TrackedFlow {
        flow: PotentialFlow { wall_panels_per_side: cfg.wall_panels_per_side, solver_options: cfg.solver_options() },
        worst_compat: std::cell::Cell::new(0.0),
    };
    let thresholds: DetectorThresholds = cfg.detectors.into();
    let tol = cfg.tolerances;
    let mut state = init.state;
    let initial_spacing = state.curve.segment_lengths().iter().cloned().fold(f64::INFINITY, f64::min);

    let first = flow.solve(&state).map_err(|e| RunError::Input(format!("initial solve failed: {e}")))?;
    if init.potential.is_none() && first.corner_residual > tol.corner_tol {
        return Err(RunError::Input(format!(
            "initial data violates the corner conditions (relative corner speed {:.3e})",
            first.corner_residual
        )));
    }
    let a_boundary = virial_l_of_state(&state, &first).l;
    let a_oracle = match &init.potential {
        Some(p) => Some(initial_A(p, cfg.a_quadrature_order).map_err(input)?),
        None => None,
    };
    let a_relative_difference = a_oracle.map(|a| {
        let scale = a.abs().max(a_boundary.abs());
        if scale > 0.0 {
            (a - a_boundary).abs() / scale
        } else {
            0.0
        }
    });
    if let Some(d) = a_relative_difference {
        if d > tol.a_agreement_tol {
            return Err(RunError::Input(format!(
                "the two evaluations of A disagree ({a_boundary} vs {:?}, relative {d:.3e}); refine the mesh",
                a_oracle
            )));
        }
    }
    let c1 = c1_from_area(polygon_area(&first.mesh));
    let t_end_cap = cfg.t_end_cap.unwrap_or_else(|| {
        if a_boundary != 0.0 {
            (0.5 * c1 / a_boundary.abs()).min(1.0)
        } else {
            1.0
        }
    });
    say(format!("A = {a_boundary:.6}, c1 = {c1}, t_end_cap = {t_end_cap:.6}"));

    let limits = DtLimits { dt_min: cfg.dt_min, dt_max: cfg.dt_max };
    let mut recorded: Vec<Recorded> = Vec::new();
    let mut snapshots = Vec::new();
    let mut runtime = RuntimeMargins { compat_max: 0.0, corner_residual_max: 0.0, wall_neumann_residual_max: 0.0, steps: 0 };
    let mut next_record = 0usize;
    let record_time = |k: usize| k as f64 * cfg.record_dt;
    let mut solution: FlowSolution = first;
    let mut halt: Option<Halt> = None;

    loop {
        let l_now = virial_l_of_state(&state, &solution).l;
        runtime.corner_residual_max = runtime.corner_residual_max.max(solution.corner_residual);
        let k1 = solution.derivative();
        let cfl_dt = adaptive_dt(&state.curve, &k1.velocity, cfg.cfl, limits);
        let ctx = DetectorContext { initial_spacing, collapsed_dt: cfl_dt.err().map(|c| c.dt), l: Some(l_now) };
        if let Some(sig) = detect_breakdown(&state, &ctx, &thresholds) {
            halt = Some((sig, false));
            break;
        }
        let dt_proposed = cfl_dt.expect("collapse is detected above");

        if state.t >= record_time(next_record) {
            let field = PressureField::new(&solution, cfg.near_field_factor);
            let integrals = field.and_then(|f| {
                let r = RecordIntegrals::compute(&state, &solution, &f, cfg.interior_lattice)?;
                let neumann = wall_neumann_residual(&f, 8).unwrap_or(f64::NAN);
                Ok((r, neumann))
            });
            match integrals {
                Ok((r, neumann)) => {
                    runtime.compat_max = runtime.compat_max.max(r.compat);
                    runtime.wall_neumann_residual_max = runtime.wall_neumann_residual_max.max(neumann);
                    recorded.push(Recorded { integrals: r, dt: dt_proposed });
                    snapshots.push((state.curve.alpha().to_vec(), state.curve.points().to_vec()));
                    if next_record % 10 == 0 {
                        say(format!("t = {:.6e}  L = {:.6e}  dt = {:.3e}", state.t, r.virial.l, dt_proposed));
                    }
                }
                Err(e) => {
                    halt = Some(classify_failure(&e, Some(&state), &state, &ctx, &thresholds));
                    break;
                }
            }
            next_record += 1;
        }
        if state.t >= t_end_cap {
            break;
        }

        let target = record_time(next_record).min(t_end_cap);
        let (dt, lands) = if state.t + dt_proposed >= target { (target - state.t, true) } else { (dt_proposed, false) };
        let mut next = match rk4_step_from(&flow, &state, &k1, dt) {
            Ok(s) => s,
            Err(f) => {
                halt = Some(classify_failure(&f.error, f.state.as_ref(), &state, &ctx, &thresholds));
                break;
            }
        };
        if lands {
            next.t = target;
        }
        runtime.steps += 1;
        if cfg.redistribution_period > 0 && runtime.steps % cfg.redistribution_period as u64 == 0 {
            next = match redistribute_markers(&next) {
                Ok(s) => s,
                Err(e) => {
                    halt = Some(classify_failure(&e, Some(&next), &state, &ctx, &thresholds));
                    break;
                }
            };
        }
        if let Some(sig) = detect_breakdown(&next, &DetectorContext { collapsed_dt: None, l: None, ..ctx }, &thresholds) {
            state = next;
            halt = Some((sig, false));
            break;
        }
        solution = match flow.solve(&next) {
            Ok(s) => s,
            Err(e) => {
                halt = Some(classify_failure(&e, Some(&next), &next, &ctx, &thresholds));
                state = next;
                break;
            }
        };
        state = next;
    }

    runtime.compat_max = runtime.compat_max.max(flow.worst_compat.get());
    let (breakdown, undiagnosed_failure) = match halt {
        Some((sig, u)) => (Some(sig), u),
        None => (None, false),
    };
    if let Some(b) = &breakdown {
        say(format!("breakdown: {} at t = {:.6e} ({})", b.kind.as_str(), b.t_break, b.detail));
    }

    if recorded.is_empty() {
        let why = breakdown.as_ref().map_or("no record time reached".to_string(), |b| b.detail.clone());
        return Err(RunError::Input(format!("diagnostics at t = 0 failed: {why}")));
    }
    let integrals: Vec<RecordIntegrals> = recorded.iter().map(|r| r.integrals).collect();
    let records = build_records(&recorded, c1, a_boundary);
    let meta = RunMeta {
        ended_by_breakdown: breakdown.is_some(),
        t_break: breakdown.as_ref().map(|b| b.t_break),
        t_final: state.t,
    };
    let verdicts = evaluate(&records, &meta, &tol).map_err(input)?;
    let report = VerificationReport {
        a_boundary,
        a_oracle,
        a_relative_difference,
        t_end_cap,
        t_final: state.t,
        breakdown,
        undiagnosed_failure,
        records: records.len(),
        verdicts,
        compatibility_held: runtime.compat_max <= tol.compat_tol,
        runtime,
        config: cfg.clone(),
    };
    Ok(RunOutput { report, records, integrals, snapshots })
}

fn build_records(recorded: &[Recorded], c1: f64, a: f64) -> Vec<DiagnosticsRecord> {
    let n = recorded.len();
    (0..n)
        .map(|k| {
            let r = &recorded[k].integrals;
            let triple = (k > 0 && k + 1 < n)
                .then(|| [&recorded[k - 1].integrals, r, &recorded[k + 1].integrals]);
            let l_prime = triple.and_then(|[p, _, q]| centered_l_prime([p.t, r.t, q.t], [p.virial.l, r.virial.l, q.virial.l]).ok());
            let slacks = inequality_checks(r, c1, if a > 0.0 { l_prime } else { None });
            let envelope = if a > 0.0 && r.t < c1 / a { a / (1.0 - a * r.t / c1) } else { f64::NAN };
            DiagnosticsRecord {
                t: r.t,
                l: r.virial.l,
                volume_part: r.virial.volume_part,
                wall_part: r.virial.wall_part,
                envelope,
                volume_residual: triple.and_then(|t| volume_identity_residual(t).ok()).unwrap_or(f64::NAN),
                wall_residual: triple.and_then(|t| wall_identity_residual(t).ok()).unwrap_or(f64::NAN),
                pressure_slack: slacks.pressure_slack,
                schwarz_vol: slacks.schwarz_volume,
                schwarz_wall: slacks.schwarz_wall,
                riccati_slack: slacks.riccati.unwrap_or(f64::NAN),
                p_min: r.p_min / r.p_max_abs.max(1.0),
                wall_p_integral: r.wall_p_integral,
                energy: r.energy,
                area: r.area,
                dt: recorded[k].dt,
            }
        })
        .collect()
}

pub fn snapshot_csv(alpha: &[f64], points: &[Point]) -> String {
    let mut s = String::from("alpha,x1,x2\n");
    for (a, p) in alpha.iter().zip(points) {
        s.push_str(&format!("{},{},{}\n", fmt_num(*a), fmt_num(p.x), fmt_num(p.y)));
    }
    s
}

/// Writes `config.json`, `diagnostics.csv`, `snapshots/NNNN.csv` and
/// `report.json` into `dir`.
pub fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<(), RunError> {
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir).map_err(io_err(&snap_dir))?;
    let write = |p: PathBuf, s: String| fs::write(&p, s).map_err(|source| RunError::Io { path: p.clone(), source });
    write(dir.join("config.json"), out.report.config.to_pretty_json())?;
    write(dir.join("diagnostics.csv"), write_csv(&out.records))?;
    for (k, (alpha, pts)) in out.snapshots.iter().enumerate() {
        write(snap_dir.join(format!("{k:04}.csv")), snapshot_csv(alpha, pts))?;
    }
    write(dir.join("report.json"), out.report.to_json())
}

/// Offline re-check of a run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub verdicts: Verdicts,
    /// Report booleans that disagree with the recomputed verdicts.
    pub mismatches: Vec<String>,
}

impl VerifyOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.mismatches.is_empty() && self.verdicts.all_passed() {
            0
        } else {
            1
        }
    }
}

pub fn verify_identities(run_dir: &Path) -> Result<VerifyOutcome, RunError> {
    let csv_path = run_dir.join("diagnostics.csv");
    let text = fs::read_to_string(&csv_path).map_err(io_err(&csv_path))?;
    let rows = parse_csv(&text).map_err(input)?;
    let cfg_path = run_dir.join("config.json");
    let cfg = RunConfig::from_json(&fs::read_to_string(&cfg_path).map_err(io_err(&cfg_path))?)?;
    let report_path = run_dir.join("report.json");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report_path).map_err(io_err(&report_path))?)
        .map_err(|e| RunError::Input(format!("report.json: {e}")))?;
    let t_break = report.get("T_break").and_then(|v| v.as_f64());
    let kind = report.get("breakdown_kind").and_then(|v| v.as_str());
    let t_final = report
        .get("t_final")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| RunError::Input("report.json lacks t_final".into()))?;
    let meta = RunMeta { ended_by_breakdown: kind.is_some(), t_break, t_final };
    let verdicts = evaluate(&rows, &meta, &cfg.tolerances).map_err(input)?;
    let mismatches = verdicts
        .booleans()
        .iter()
        .filter(|(name, b)| report.get(*name).map(|v| v.as_bool()) != Some(*b))
        .map(|(name, b)| format!("{name}: report {:?}, recomputed {b:?}", report.get(*name)))
        .collect();
    Ok(VerifyOutcome { verdicts, mismatches })
}
