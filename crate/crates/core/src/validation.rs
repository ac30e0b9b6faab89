//! Analytic-mode convergence suite for the mixed boundary value problem on
//! the unit square.

use std::f64::consts::PI;
use std::fmt::Write;

use crate::bem::{BemSolver, CauchyData, SolverOptions};
use crate::error::{Error, Result};
use crate::geometry::{build_boundary_mesh, BcKind, BoundaryMesh, InterfaceCurve, Point};

/// Constant-solution error and flux compatibility limits.
pub const CONSTANT_TOL: f64 = 1e-8;
pub const COMPAT_TOL: f64 = 1e-8;
pub const MIN_ORDER: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeError {
    pub panels_per_side: usize,
    /// Relative L∞ error of the surface flux.
    pub surface_flux: f64,
    /// Relative L∞ error of the wall values.
    pub wall_value: f64,
    /// `|∮ ∂v/∂n| / ∮ |∂v/∂n|`.
    pub compat: f64,
}

impl ModeError {
    pub fn combined(&self) -> f64 {
        self.surface_flux.max(self.wall_value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeStudy {
    pub k: u32,
    /// `Err` holds the failure message of a solve.
    pub rows: Vec<std::result::Result<ModeError, String>>,
    /// Least-squares slope of `−log(error)` against `log(panels)`.
    pub order: Option<f64>,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BemValidation {
    pub studies: Vec<ModeStudy>,
    /// Largest absolute error for the constant solution `v = 1`, over all
    /// panel counts.
    pub constant_error: f64,
    /// Worst compatibility measure over the mode solves.
    pub compat_max: f64,
}

impl BemValidation {
    pub fn passed(&self) -> bool {
        self.studies.iter().all(|s| s.monotone && s.order.is_some_and(|p| p >= MIN_ORDER))
            && self.constant_error <= CONSTANT_TOL
            && self.compat_max <= COMPAT_TOL
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>4} {:>8} {:>14} {:>14} {:>12}", "k", "panels", "surface_flux", "wall_value", "compat");
        for st in &self.studies {
            for row in &st.rows {
                match row {
                    Ok(r) => {
                        let _ = writeln!(
                            s,
                            "{:>4} {:>8} {:>14.6e} {:>14.6e} {:>12.3e}",
                            st.k, r.panels_per_side, r.surface_flux, r.wall_value, r.compat
                        );
                    }
                    Err(e) => {
                        let _ = writeln!(s, "{:>4} {:>8} solve failed: {e}", st.k, "-");
                    }
                }
            }
            let order = st.order.map_or("n/a".to_string(), |p| format!("{p:.3}"));
            let _ = writeln!(s, "     k = {}: order {order}, monotone {}", st.k, st.monotone);
        }
        let _ = writeln!(s, "constant-solution error {:.3e} (limit {CONSTANT_TOL:e})", self.constant_error);
        let _ = writeln!(s, "flux compatibility max {:.3e} (limit {COMPAT_TOL:e})", self.compat_max);
        let _ = writeln!(s, "{}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

fn unit_square(panels_per_side: usize) -> Result<BoundaryMesh> {
    build_boundary_mesh(&InterfaceCurve::flat(panels_per_side + 1)?, panels_per_side)
}

fn solve_with(mesh: &BoundaryMesh, options: SolverOptions, v: impl Fn(Point) -> f64) -> Result<CauchyData> {
    let solver = BemSolver::with_options(mesh, options)?;
    let panels = mesh.panels();
    let dirichlet: Vec<f64> = mesh.indices_of(BcKind::DirichletSurface).iter().map(|&j| v(panels[j].mid)).collect();
    solver.solve(&dirichlet, &vec![0.0; mesh.wall_count()])
}

fn compat(mesh: &BoundaryMesh, data: &CauchyData) -> f64 {
    let (net, abs) = mesh
        .panels()
        .iter()
        .zip(&data.flux)
        .fold((0.0, 0.0), |(n, a), (p, q)| (n + q * p.length, a + (q * p.length).abs()));
    if abs > 0.0 {
        net.abs() / abs
    } else {
        0.0
    }
}

/// Errors for `v = cos(kπx1) cosh(kπx2)` with `panels_per_side` panels on
/// every side.
pub fn mode_error(k: u32, panels_per_side: usize, options: SolverOptions) -> Result<ModeError> {
    if k == 0 {
        return Err(Error::Argument("mode number must be positive".into()));
    }
    let w = k as f64 * PI;
    let mesh = unit_square(panels_per_side)?;
    let data = solve_with(&mesh, options, |p| (w * p.x).cos() * (w * p.y).cosh())?;
    let (mut flux_err, mut flux_scale) = (0.0_f64, 0.0_f64);
    let (mut wall_err, mut wall_scale) = (0.0_f64, 0.0_f64);
    for (j, p) in mesh.panels().iter().enumerate() {
        let x = p.mid;
        match p.bc {
            BcKind::DirichletSurface => {
                let exact = w * (w * x.x).cos() * w.sinh();
                flux_err = flux_err.max((data.flux[j] - exact).abs());
                flux_scale = flux_scale.max(exact.abs());
            }
            BcKind::NeumannWall => {
                let exact = (w * x.x).cos() * (w * x.y).cosh();
                wall_err = wall_err.max((data.value[j] - exact).abs());
                wall_scale = wall_scale.max(exact.abs());
            }
        }
    }
    Ok(ModeError {
        panels_per_side,
        surface_flux: flux_err / flux_scale,
        wall_value: wall_err / wall_scale,
        compat: compat(&mesh, &data),
    })
}

/// Largest absolute error of values and fluxes for `v = 1`.
pub fn constant_error(panels_per_side: usize, options: SolverOptions) -> Result<f64> {
    let mesh = unit_square(panels_per_side)?;
    let data = solve_with(&mesh, options, |_| 1.0)?;
    let value_err = data.value.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let flux_err = data.flux.iter().map(|q| q.abs()).fold(0.0, f64::max);
    Ok(value_err.max(flux_err))
}

/// Least-squares slope of `log e` against `log n`, negated.
pub fn fitted_order(n: &[usize], e: &[f64]) -> Option<f64> {
    if n.len() < 2 || n.len() != e.len() || e.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return None;
    }
    let x: Vec<f64> = n.iter().map(|&v| (v as f64).ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

pub fn validate_bem(panel_counts: &[usize], modes: &[u32], options: SolverOptions) -> Result<BemValidation> {
    if panel_counts.len() < 2 || modes.is_empty() {
        return Err(Error::Argument("need at least two panel counts and one mode".into()));
    }
    let mut counts = panel_counts.to_vec();
    counts.sort_unstable();
    let mut studies = Vec::new();
    let mut compat_max = 0.0_f64;
    for &k in modes {
        let rows: Vec<_> = counts
            .iter()
            .map(|&n| mode_error(k, n, options).map_err(|e| e.to_string()))
            .collect();
        let ok: Vec<&ModeError> = rows.iter().filter_map(|r| r.as_ref().ok()).collect();
        compat_max = ok.iter().fold(compat_max, |m, r| m.max(r.compat));
        let complete = ok.len() == rows.len();
        let errs: Vec<f64> = ok.iter().map(|r| r.combined()).collect();
        let monotone = complete && errs.windows(2).all(|w| w[1] < w[0]);
        let order = if complete { fitted_order(&counts, &errs) } else { None };
        studies.push(ModeStudy { k, rows, order, monotone });
    }
    let mut constant = 0.0_f64;
    for &n in &counts {
        constant = constant.max(constant_error(n, options).unwrap_or(f64::INFINITY));
    }
    Ok(BemValidation { studies, constant_error: constant, compat_max })
}
