//! Virial functional, its comparison envelope, the evolution identities and
//! inequalities, and the breakdown detectors.
//!
//! `L(t) = ∫_Ω u1 x1 dx + ∫_0^1 x2 u2(t, 1, x2) dx2`. All integrals over the
//! fluid are reduced to boundary sums of panel Cauchy data.

use num_complex::Complex64;

use crate::bem::CauchyData;
use crate::error::{Error, Result};
use crate::flow::{FlowSolution, FlowState};
use crate::geometry::{boundary_self_intersects, polygon_area, BoundaryMesh, InterfaceCurve, Side};
use crate::pressure::{pressure_min, right_wall_traces, PressureField};

/// `max(2 |Ω(0)|, 4/3)`.
pub fn constant_c1(initial_mesh: &BoundaryMesh) -> f64 {
    c1_from_area(polygon_area(initial_mesh))
}

pub fn c1_from_area(area: f64) -> f64 {
    (2.0 * area).max(4.0 / 3.0)
}

/// Exact solution `A / (1 − A t / c1)` of `y' = y² / c1`, `y(0) = A`.
pub fn riccati_envelope(a: f64, c1: f64, t: f64) -> Result<f64> {
    if !(a > 0.0 && c1 > 0.0 && t >= 0.0) {
        return Err(Error::Domain(format!("envelope needs A > 0, c1 > 0, t >= 0 (A={a}, c1={c1}, t={t})")));
    }
    if t >= c1 / a {
        return Err(Error::Domain(format!("t = {t} is past the comparison blow-up time {}", c1 / a)));
    }
    Ok(a / (1.0 - a * t / c1))
}

/// Blow-up time `c1 / A` of the comparison equation.
pub fn blowup_bound(a: f64, c1: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("blow-up bound needs A > 0, got {a}")));
    }
    Ok(c1 / a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirialParts {
    pub l: f64,
    pub volume_part: f64,
    pub wall_part: f64,
}

/// Volume part `∮ x1 φ n1 ds − ∫ φ dx`; wall part `φ(1, 1) − ∫_0^1 φ(1, x2) dx2`
/// (integration by parts of `∫ x2 ∂2φ dx2`).
pub fn virial_l(mesh: &BoundaryMesh, cauchy: &CauchyData, phi_right_corner: f64) -> VirialParts {
    let panels = mesh.panels();
    let boundary: f64 = panels
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let l = p.length;
            let x1_phi = l * p.mid.x * cauchy.value[j] + p.tangent.x * cauchy.value_slope[j] * l * l * l / 12.0;
            x1_phi * p.normal.x
        })
        .sum();
    let volume_part = boundary - cauchy.domain_integral(mesh);
    let wall_phi: f64 = mesh.side_range(Side::Right).map(|j| cauchy.value[j] * panels[j].length).sum();
    let wall_part = phi_right_corner - wall_phi;
    VirialParts { l: volume_part + wall_part, volume_part, wall_part }
}

pub fn virial_l_of_state(state: &FlowState, solution: &FlowSolution) -> VirialParts {
    virial_l(&solution.mesh, &solution.cauchy, *state.phi.last().expect("markers"))
}

/// `∫_Ω (u1)² dx = ½ ∮ φ ∂φ/∂n ds + ½ Re ∫_Ω F² dx` with `F = u1 − i u2`
/// analytic and `∫_Ω g dx = (1/2i) ∮ z̄ g dz`. On each panel `F` is built
/// from the linear normal flux and the tangential slope.
pub fn u1_squared_integral(mesh: &BoundaryMesh, cauchy: &CauchyData) -> f64 {
    let contour: Complex64 = mesh
        .panels()
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let l = p.length;
            let u0 = p.normal * cauchy.flux[j] + p.tangent * cauchy.value_slope[j];
            let u1 = p.normal * cauchy.flux_slope[j];
            let f0 = Complex64::new(u0.x, -u0.y);
            let f1 = Complex64::new(u1.x, -u1.y);
            let tau = Complex64::new(p.tangent.x, p.tangent.y);
            let mbar = Complex64::new(p.mid.x, -p.mid.y);
            tau * (mbar * f0 * f0 * l + (mbar * f1 * f1 + 2.0 * f0 * f1 * tau.conj()) * (l * l * l / 12.0))
        })
        .sum();
    let area_integral = contour * Complex64::new(0.0, -0.5);
    cauchy.energy(mesh) + 0.5 * area_integral.re
}

/// Instantaneous quantities entering every identity and inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordIntegrals {
    pub t: f64,
    pub virial: VirialParts,
    pub energy: f64,
    pub area: f64,
    /// `∫_Ω (u1)² dx`.
    pub u1_sq: f64,
    /// `∫_0^1 (u2(t, 1, x2))² dx2`.
    pub u2_wall_sq: f64,
    /// `∫_Ω p dx`.
    pub p_integral: f64,
    /// `∫_0^1 p(t, 1, x2) dx2`.
    pub wall_p_integral: f64,
    pub p_min: f64,
    pub p_max_abs: f64,
    /// Relative flux-compatibility residual, worst of the two solves.
    pub compat: f64,
}

impl RecordIntegrals {
    pub fn compute(state: &FlowState, solution: &FlowSolution, field: &PressureField, lattice_n: usize) -> Result<Self> {
        let mesh = &solution.mesh;
        let (phi_t_wall, u2_wall_sq) = right_wall_traces(field);
        let extremes = pressure_min(field, lattice_n)?;
        let compat = |c: &CauchyData| c.relative_compatibility(mesh);
        Ok(Self {
            t: state.t,
            virial: virial_l_of_state(state, solution),
            energy: solution.cauchy.energy(mesh),
            area: polygon_area(mesh),
            u1_sq: u1_squared_integral(mesh, &solution.cauchy),
            u2_wall_sq,
            p_integral: field.domain_integral(),
            wall_p_integral: -phi_t_wall - 0.5 * u2_wall_sq,
            p_min: extremes.min,
            p_max_abs: extremes.max_abs,
            compat: compat(&solution.cauchy).max(compat(&field.phi_t)),
        })
    }

    /// Right-hand side of the volume identity: `∫(u1)² + ∫p − ∫_wall p`.
    pub fn volume_rhs(&self) -> f64 {
        self.u1_sq + self.p_integral - self.wall_p_integral
    }

    pub fn volume_scale(&self) -> f64 {
        self.u1_sq + self.p_integral.abs() + self.wall_p_integral.abs()
    }

    /// Right-hand side of the wall identity: `½∫(u2)² + ∫_wall p`.
    pub fn wall_rhs(&self) -> f64 {
        0.5 * self.u2_wall_sq + self.wall_p_integral
    }

    pub fn wall_scale(&self) -> f64 {
        0.5 * self.u2_wall_sq + self.wall_p_integral.abs()
    }
}

fn centered_difference(prev: f64, next: f64, t_prev: f64, t: f64, t_next: f64) -> Result<f64> {
    let (h1, h2) = (t - t_prev, t_next - t);
    if !(h1 > 0.0 && h2 > 0.0) || (h1 - h2).abs() > 1e-9 * h1.max(h2) {
        return Err(Error::Argument(format!("record spacing {h1} vs {h2} is not uniform")));
    }
    Ok((next - prev) / (t_next - t_prev))
}

fn normalised(x: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        x / scale
    } else {
        x
    }
}

/// Volume identity residual at the middle record, relative to its RHS scale.
pub fn volume_identity_residual(records: [&RecordIntegrals; 3]) -> Result<f64> {
    let [a, b, c] = records;
    let d = centered_difference(a.virial.volume_part, c.virial.volume_part, a.t, b.t, c.t)?;
    Ok(normalised((d - b.volume_rhs()).abs(), b.volume_scale()))
}

/// Wall identity residual at the middle record, relative to its RHS scale.
pub fn wall_identity_residual(records: [&RecordIntegrals; 3]) -> Result<f64> {
    let [a, b, c] = records;
    let d = centered_difference(a.virial.wall_part, c.virial.wall_part, a.t, b.t, c.t)?;
    Ok(normalised((d - b.wall_rhs()).abs(), b.wall_scale()))
}

/// Centered `L′` at the middle of three uniformly spaced samples.
pub fn centered_l_prime(t: [f64; 3], l: [f64; 3]) -> Result<f64> {
    centered_difference(l[0], l[2], t[0], t[1], t[2])
}

/// Normalised slacks (greater side minus lesser side, over the greater side).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalitySlacks {
    /// `∫p dx ≥ 0`, the gap in the combined lower bound on `L′`.
    pub pressure_slack: f64,
    pub schwarz_volume: f64,
    pub schwarz_wall: f64,
    /// `(L′ − L²/c1) / L²`, when a centered `L′` is available.
    pub riccati: Option<f64>,
}

pub fn inequality_checks(r: &RecordIntegrals, c1: f64, l_prime: Option<f64>) -> InequalitySlacks {
    let kinetic_lower = r.u1_sq + 0.5 * r.u2_wall_sq;
    let vol_big = r.u1_sq * r.area;
    let wall_big = r.u2_wall_sq / 3.0;
    let l = r.virial.l;
    InequalitySlacks {
        pressure_slack: normalised(r.p_integral, kinetic_lower),
        schwarz_volume: normalised(vol_big - r.virial.volume_part.powi(2), vol_big),
        schwarz_wall: normalised(wall_big - r.virial.wall_part.powi(2), wall_big),
        riccati: l_prime.map(|lp| normalised(lp - l * l / c1, l * l)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BreakdownKind {
    SelfIntersection,
    MarkerCollision,
    TimestepCollapse,
    SolverFailure,
    CurvatureBlowup,
    BottomContact,
    LOverflow,
}

impl BreakdownKind {
    pub const ALL: [BreakdownKind; 7] = [
        BreakdownKind::SelfIntersection,
        BreakdownKind::MarkerCollision,
        BreakdownKind::TimestepCollapse,
        BreakdownKind::SolverFailure,
        BreakdownKind::CurvatureBlowup,
        BreakdownKind::BottomContact,
        BreakdownKind::LOverflow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BreakdownKind::SelfIntersection => "self_intersection",
            BreakdownKind::MarkerCollision => "marker_collision",
            BreakdownKind::TimestepCollapse => "timestep_collapse",
            BreakdownKind::SolverFailure => "solver_failure",
            BreakdownKind::CurvatureBlowup => "curvature_blowup",
            BreakdownKind::BottomContact => "bottom_contact",
            BreakdownKind::LOverflow => "L_overflow",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownSignal {
    pub t_break: f64,
    pub kind: BreakdownKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorThresholds {
    /// Minimum spacing as a fraction of the initial spacing.
    pub collide_tol: f64,
    /// Maximum curvature times the initial spacing.
    pub curv_max_factor: f64,
    pub l_max: f64,
}

impl Default for DetectorThresholds {
    fn default() -> Self {
        Self { collide_tol: 0.1, curv_max_factor: 100.0, l_max: 1e6 }
    }
}

/// Run history the detectors need beyond the current state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorContext {
    pub initial_spacing: f64,
    /// Raw CFL step when it fell below `dt_min`.
    pub collapsed_dt: Option<f64>,
    pub l: Option<f64>,
}

/// Menger curvature at each interior marker.
pub fn discrete_curvature(curve: &InterfaceCurve) -> Vec<f64> {
    curve
        .points()
        .windows(3)
        .map(|w| {
            let (a, b, c) = ((w[1] - w[0]).norm(), (w[2] - w[1]).norm(), (w[2] - w[0]).norm());
            let twice_area = (w[1] - w[0]).cross(w[2] - w[0]).abs();
            if a * b * c > 0.0 {
                2.0 * twice_area / (a * b * c)
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// First matching detector in the fixed priority order.
pub fn detect_breakdown(
    state: &FlowState,
    ctx: &DetectorContext,
    thresholds: &DetectorThresholds,
) -> Option<BreakdownSignal> {
    let signal = |kind, detail: String| Some(BreakdownSignal { t_break: state.t, kind, detail });
    let pts = state.curve.points();
    if let Some((i, p)) = pts.iter().enumerate().find(|(_, p)| p.y <= 0.0) {
        return signal(BreakdownKind::BottomContact, format!("marker {i} at x2 = {:.6e}", p.y));
    }
    if boundary_self_intersects(&state.curve) {
        let detail = if state.curve.within_strip() {
            "boundary polygon is no longer simple".to_string()
        } else {
            "a marker left the strip 0 <= x1 <= 1".to_string()
        };
        return signal(BreakdownKind::SelfIntersection, detail);
    }
    let lengths = state.curve.segment_lengths();
    if let Some((i, l)) = lengths
        .iter()
        .enumerate()
        .find(|(_, &l)| l < thresholds.collide_tol * ctx.initial_spacing)
    {
        return signal(BreakdownKind::MarkerCollision, format!("segment {i} has length {l:.6e}"));
    }
    let curv_max = thresholds.curv_max_factor / ctx.initial_spacing;
    if let Some((i, k)) = discrete_curvature(&state.curve)
        .iter()
        .enumerate()
        .find(|(_, &k)| !(k <= curv_max))
    {
        return signal(BreakdownKind::CurvatureBlowup, format!("curvature {k:.6e} at marker {}", i + 1));
    }
    if let Some(dt) = ctx.collapsed_dt {
        return signal(BreakdownKind::TimestepCollapse, format!("CFL step {dt:.6e} below dt_min"));
    }
    if let Some(l) = ctx.l {
        if !(l <= thresholds.l_max) {
            return signal(BreakdownKind::LOverflow, format!("L = {l:.6e}"));
        }
    }
    None
}
