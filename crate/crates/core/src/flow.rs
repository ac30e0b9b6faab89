//! Time evolution of the free surface: material markers carried by the
//! potential-flow velocity and a surface potential driven by the Bernoulli
//! condition with zero surface pressure, `dφ/dt = ½|u|²`.

use crate::bem::{BemSolver, CauchyData, SolverOptions};
use crate::error::{Error, Result};
use crate::geometry::{build_boundary_mesh, BoundaryMesh, InterfaceCurve, Point};

/// Full dynamical state: time, marker curve and the potential at each marker.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub curve: InterfaceCurve,
    pub phi: Vec<f64>,
}

impl FlowState {
    pub fn new(t: f64, curve: InterfaceCurve, phi: Vec<f64>) -> Result<Self> {
        if phi.len() != curve.len() {
            return Err(Error::Argument(format!(
                "{} potential samples for {} markers",
                phi.len(),
                curve.len()
            )));
        }
        if !t.is_finite() || phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite state entry".into()));
        }
        Ok(Self { t, curve, phi })
    }

    pub fn marker_count(&self) -> usize {
        self.curve.len()
    }
}

/// Time derivative of a [`FlowState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub velocity: Vec<Point>,
    pub dphi: Vec<f64>,
    /// Corner speed before projection, relative to the largest marker speed.
    pub corner_residual: f64,
}

impl StateDerivative {
    pub fn max_speed(&self) -> f64 {
        self.velocity.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

pub trait Dynamics {
    fn derivative(&self, state: &FlowState) -> Result<StateDerivative>;
}

/// The free-surface potential flow in the pinned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialFlow {
    pub wall_panels_per_side: usize,
    pub solver_options: SolverOptions,
}

impl PotentialFlow {
    pub fn new(wall_panels_per_side: usize) -> Self {
        Self { wall_panels_per_side, solver_options: SolverOptions::default() }
    }

    pub fn solve(&self, state: &FlowState) -> Result<FlowSolution> {
        solve_flow(state, self.wall_panels_per_side, self.solver_options)
    }
}

impl Dynamics for PotentialFlow {
    fn derivative(&self, state: &FlowState) -> Result<StateDerivative> {
        Ok(self.solve(state)?.derivative())
    }
}

/// Everything obtained from one potential solve on the current geometry.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub mesh: BoundaryMesh,
    pub solver: BemSolver,
    pub cauchy: CauchyData,
    /// Velocity at the midpoint of each surface segment, left to right.
    pub segment_velocity: Vec<Point>,
    /// Velocity at each marker, corners projected to zero.
    pub marker_velocity: Vec<Point>,
    pub corner_residual: f64,
}

impl FlowSolution {
    pub fn derivative(&self) -> StateDerivative {
        StateDerivative {
            velocity: self.marker_velocity.clone(),
            dphi: self.marker_velocity.iter().map(|v| 0.5 * v.norm_sq()).collect(),
            corner_residual: self.corner_residual,
        }
    }
}

/// Dirichlet data per surface panel in mesh order: the mean of the two
/// marker values bounding each segment.
pub fn surface_dirichlet_data(mesh: &BoundaryMesh, phi: &[f64]) -> Vec<f64> {
    let range = mesh.surface_range();
    range
        .clone()
        .map(|j| {
            let seg = range.end - 1 - j;
            0.5 * (phi[seg] + phi[seg + 1])
        })
        .collect()
}

pub fn solve_flow(state: &FlowState, wall_panels_per_side: usize, options: SolverOptions) -> Result<FlowSolution> {
    let mesh = build_boundary_mesh(&state.curve, wall_panels_per_side)?;
    let solver = BemSolver::with_options(&mesh, options)?;
    let cauchy = solver.solve(&surface_dirichlet_data(&mesh, &state.phi), &vec![0.0; mesh.wall_count()])?;
    let pts = state.curve.points();
    let ns = state.curve.segment_count();
    let lengths = state.curve.segment_lengths();
    let segment_velocity: Vec<Point> = (0..ns)
        .map(|k| {
            let panel = &mesh.panels()[mesh.surface_panel_of_segment(k)];
            let tau = (pts[k + 1] - pts[k]) * (1.0 / lengths[k]);
            let ds = (state.phi[k + 1] - state.phi[k]) / lengths[k];
            panel.normal * cauchy.flux[mesh.surface_panel_of_segment(k)] + tau * ds
        })
        .collect();
    let (marker_velocity, corner_residual) = markers_from_segments(&segment_velocity, &lengths);
    Ok(FlowSolution { mesh, solver, cauchy, segment_velocity, marker_velocity, corner_residual })
}

/// Linear interpolation between segment midpoints; the corner values are
/// extrapolated, recorded, then replaced by zero.
fn markers_from_segments(seg: &[Point], len: &[f64]) -> (Vec<Point>, f64) {
    let ns = seg.len();
    let mut out = vec![Point::default(); ns + 1];
    for i in 1..ns {
        let w = len[i] / (len[i - 1] + len[i]);
        out[i] = seg[i - 1] * w + seg[i] * (1.0 - w);
    }
    let (left, right) = if ns >= 2 {
        let fl = len[0] / (len[0] + len[1]);
        let fr = len[ns - 1] / (len[ns - 2] + len[ns - 1]);
        (
            seg[0] + (seg[0] - seg[1]) * fl,
            seg[ns - 1] + (seg[ns - 1] - seg[ns - 2]) * fr,
        )
    } else {
        (seg[0], seg[0])
    };
    let max_speed = out.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let corner = left.norm().max(right.norm());
    let residual = if max_speed > 0.0 {
        corner / max_speed
    } else if corner > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    (out, residual)
}

/// Marker velocities of the potential flow.
pub fn surface_velocity(state: &FlowState, wall_panels_per_side: usize) -> Result<Vec<Point>> {
    Ok(solve_flow(state, wall_panels_per_side, SolverOptions::default())?.marker_velocity)
}

pub fn state_derivative(state: &FlowState, wall_panels_per_side: usize) -> Result<StateDerivative> {
    PotentialFlow::new(wall_panels_per_side).derivative(state)
}

/// A Runge-Kutta stage that could not be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct StageFailure {
    /// 1-based stage index.
    pub stage: usize,
    pub error: Error,
    /// State at which the stage was evaluated, if it could be formed.
    pub state: Option<FlowState>,
}

fn advance(base: &FlowState, k: &StateDerivative, h: f64) -> Result<FlowState> {
    let n = base.marker_count();
    let mut pts: Vec<Point> = base
        .curve
        .points()
        .iter()
        .zip(&k.velocity)
        .map(|(&p, &v)| p + v * h)
        .collect();
    pts[0] = base.curve.points()[0];
    pts[n - 1] = base.curve.points()[n - 1];
    let phi = base.phi.iter().zip(&k.dphi).map(|(p, d)| p + h * d).collect();
    FlowState::new(base.t + h, InterfaceCurve::new(base.curve.alpha().to_vec(), pts)?, phi)
}

/// Classical four-stage step from a known first stage.
pub fn rk4_step_from(
    dynamics: &impl Dynamics,
    state: &FlowState,
    k1: &StateDerivative,
    dt: f64,
) -> std::result::Result<FlowState, StageFailure> {
    let fail = |stage, error, state| StageFailure { stage, error, state };
    if !(dt > 0.0) {
        return Err(fail(1, Error::Argument(format!("dt = {dt} must be positive")), None));
    }
    let s2 = advance(state, k1, 0.5 * dt).map_err(|e| fail(2, e, None))?;
    let k2 = dynamics.derivative(&s2).map_err(|e| fail(2, e, Some(s2.clone())))?;
    let s3 = advance(state, &k2, 0.5 * dt).map_err(|e| fail(3, e, None))?;
    let k3 = dynamics.derivative(&s3).map_err(|e| fail(3, e, Some(s3.clone())))?;
    let s4 = advance(state, &k3, dt).map_err(|e| fail(4, e, None))?;
    let k4 = dynamics.derivative(&s4).map_err(|e| fail(4, e, Some(s4.clone())))?;
    let n = state.marker_count();
    let combined = StateDerivative {
        velocity: (0..n)
            .map(|i| (k1.velocity[i] + (k2.velocity[i] + k3.velocity[i]) * 2.0 + k4.velocity[i]) * (1.0 / 6.0))
            .collect(),
        dphi: (0..n)
            .map(|i| (k1.dphi[i] + 2.0 * (k2.dphi[i] + k3.dphi[i]) + k4.dphi[i]) / 6.0)
            .collect(),
        corner_residual: 0.0,
    };
    advance(state, &combined, dt).map_err(|e| fail(5, e, None))
}

pub fn rk4_step(dynamics: &impl Dynamics, state: &FlowState, dt: f64) -> std::result::Result<FlowState, StageFailure> {
    let k1 = dynamics
        .derivative(state)
        .map_err(|e| StageFailure { stage: 1, error: e, state: Some(state.clone()) })?;
    rk4_step_from(dynamics, state, &k1, dt)
}

/// Time step bounds for [`adaptive_dt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtLimits {
    pub dt_min: f64,
    pub dt_max: f64,
}

/// The CFL step fell below `dt_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimestepCollapse {
    pub dt: f64,
}

const SPEED_FLOOR: f64 = 1e-12;

/// `cfl × min_i spacing_i / (speed_i + ε)`, clamped to the limits.
pub fn adaptive_dt(
    curve: &InterfaceCurve,
    velocity: &[Point],
    cfl: f64,
    limits: DtLimits,
) -> std::result::Result<f64, TimestepCollapse> {
    let len = curve.segment_lengths();
    let n = curve.len();
    let raw = (0..n)
        .map(|i| {
            let spacing = match (i.checked_sub(1).map(|k| len[k]), len.get(i)) {
                (Some(a), Some(&b)) => a.min(b),
                (Some(a), None) => a,
                (None, Some(&b)) => b,
                (None, None) => f64::INFINITY,
            };
            spacing / (velocity[i].norm() + SPEED_FLOOR)
        })
        .fold(f64::INFINITY, f64::min)
        * cfl;
    if !(raw >= limits.dt_min) {
        return Err(TimestepCollapse { dt: raw });
    }
    Ok(raw.min(limits.dt_max))
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Argument("PCHIP needs >= 2 strictly increasing abscissae".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
            return Ok(Self { x: x.to_vec(), y: y.to_vec(), d });
        }
        for k in 1..n - 1 {
            if del[k - 1] * del[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
            }
        }
        d[0] = end_slope(h[0], h[1], del[0], del[1]);
        d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        Ok(Self { x: x.to_vec(), y: y.to_vec(), d })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Cumulative chord length along the marker polyline.
pub fn chord_arclength(curve: &InterfaceCurve) -> Vec<f64> {
    let mut s = Vec::with_capacity(curve.len());
    s.push(0.0);
    for l in curve.segment_lengths() {
        s.push(s.last().unwrap() + l);
    }
    s
}

/// Moves markers to uniform chord arclength, interpolating positions,
/// labels and potential with [`Pchip`]. Corners stay fixed.
pub fn redistribute_markers(state: &FlowState) -> Result<FlowState> {
    let s = chord_arclength(&state.curve);
    let n = s.len();
    let total = s[n - 1];
    let pts = state.curve.points();
    let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
    let px = Pchip::new(&s, &xs)?;
    let py = Pchip::new(&s, &ys)?;
    let pphi = Pchip::new(&s, &state.phi)?;
    let palpha = Pchip::new(&s, state.curve.alpha())?;
    let target = |k: usize| total * k as f64 / (n - 1) as f64;
    let mut new_pts: Vec<Point> = (0..n).map(|k| Point::new(px.eval(target(k)), py.eval(target(k)))).collect();
    let mut alpha: Vec<f64> = (0..n).map(|k| palpha.eval(target(k))).collect();
    let mut phi: Vec<f64> = (0..n).map(|k| pphi.eval(target(k))).collect();
    new_pts[0] = pts[0];
    new_pts[n - 1] = pts[n - 1];
    alpha[0] = 0.0;
    alpha[n - 1] = 1.0;
    phi[0] = state.phi[0];
    phi[n - 1] = state.phi[n - 1];
    FlowState::new(state.t, InterfaceCurve::new(alpha, new_pts)?, phi)
}
