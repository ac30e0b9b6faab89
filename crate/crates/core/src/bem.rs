//! Direct boundary-integral solver for the mixed Dirichlet/Neumann Laplace
//! problem on the panel polygon.
//!
//! Unknowns are panel-midpoint Cauchy data, collocated at panel midpoints.
//! Inside each panel the trace is reconstructed linearly, with the slope
//! taken from a three-point fit over neighbouring midpoints on the same side
//! of the box (never across a corner):
//!
//! ```text
//! ½ u_i + Σ_j (D_ij u_j + D¹_ij u'_j) − Σ_j (S_ij q_j + S¹_ij q'_j) = λ
//! ```
//!
//! `S¹`/`D¹` are the first-moment panel integrals. `λ` is a scalar defect
//! unknown closed by the flux compatibility row `Σ_j q_j L_j = 0`; it is zero
//! in the continuum and discretely absorbs the constant part of the
//! truncation error, so every solve conserves mass to solver precision.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BcKind, BoundaryMesh, Point, Side};
use crate::numerics::kernels::{layer_and_moment_integrals, panel_layer_derivatives};
use crate::numerics::linalg::LuFactors;

/// Which half of the Cauchy pair was given on a panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prescribed {
    Value,
    Flux,
}

/// Per-panel potential trace and outward normal flux.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    pub value: Vec<f64>,
    pub flux: Vec<f64>,
    pub prescribed: Vec<Prescribed>,
    /// Tangential slopes of the linear in-panel reconstruction.
    pub value_slope: Vec<f64>,
    pub flux_slope: Vec<f64>,
    /// Collocation defect absorbed by the compatibility constraint.
    pub defect: f64,
}

impl CauchyData {
    /// `∮ ∂φ/∂n ds`.
    pub fn flux_integral(&self, mesh: &BoundaryMesh) -> f64 {
        mesh.panels().iter().zip(&self.flux).map(|(p, q)| q * p.length).sum()
    }

    /// `∮ |∂φ/∂n| ds`, the scale for the compatibility check.
    pub fn flux_scale(&self, mesh: &BoundaryMesh) -> f64 {
        mesh.panels().iter().zip(&self.flux).map(|(p, q)| q.abs() * p.length).sum()
    }

    /// `|∮ ∂φ/∂n| / ∮ |∂φ/∂n|`, zero for vanishing flux.
    pub fn relative_compatibility(&self, mesh: &BoundaryMesh) -> f64 {
        self.flux_integral(mesh).abs() / (self.flux_scale(mesh) + 1e-30)
    }

    pub fn compatibility_ok(&self, mesh: &BoundaryMesh, tol: f64) -> bool {
        self.relative_compatibility(mesh) <= tol
    }

    /// Dirichlet energy `½ ∮ φ ∂φ/∂n ds = ½ ∫ |∇φ|² dx`.
    pub fn energy(&self, mesh: &BoundaryMesh) -> f64 {
        0.5 * mesh
            .panels()
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let l = p.length;
                l * (self.value[j] * self.flux[j] + self.value_slope[j] * self.flux_slope[j] * l * l / 12.0)
            })
            .sum::<f64>()
    }

    /// `∫_Ω φ dx` via Green's second identity with `w = |x|²/4`.
    pub fn domain_integral(&self, mesh: &BoundaryMesh) -> f64 {
        mesh.panels()
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let l = p.length;
                let dw_dn = 0.5 * p.mid.dot(p.normal);
                // exact moments of |x|²/4 along a straight segment
                let w_mean = 0.25 * (p.mid.norm_sq() + l * l / 12.0);
                let w_moment = p.mid.dot(p.tangent) * l * l / 24.0;
                self.value[j] * dw_dn * l - self.flux[j] * w_mean * l - self.flux_slope[j] * w_moment
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Negative control only: reverses the double-layer kernel sign.
    pub flip_double_layer: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { flip_double_layer: false }
    }
}

/// Assembled and factored collocation system for one mesh. The matrix only
/// depends on the geometry and the boundary-condition kinds, so several
/// right-hand sides (potential and its time derivative) share one
/// factorisation.
#[derive(Debug, Clone)]
pub struct BemSolver {
    n: usize,
    kinds: Vec<BcKind>,
    lengths: Vec<f64>,
    stencils: Vec<SlopeStencil>,
    /// Kernel matrices with the slope reconstruction folded in.
    single: Vec<f64>,
    double: Vec<f64>,
    lu: LuFactors,
    dirichlet_idx: Vec<usize>,
    neumann_idx: Vec<usize>,
}

impl BemSolver {
    pub fn new(mesh: &BoundaryMesh) -> Result<Self> {
        Self::with_options(mesh, SolverOptions::default())
    }

    pub fn with_options(mesh: &BoundaryMesh, options: SolverOptions) -> Result<Self> {
        let panels = mesh.panels();
        let n = panels.len();
        let sign = if options.flip_double_layer { -1.0 } else { 1.0 };
        let stencils = slope_stencils(mesh);
        let mut single = vec![0.0; n * n];
        let mut double = vec![0.0; n * n];
        single
            .par_chunks_mut(n)
            .zip(double.par_chunks_mut(n))
            .enumerate()
            .for_each(|(i, (srow, drow))| {
                let x = panels[i].mid;
                for (k, p) in panels.iter().enumerate() {
                    let (li, mi) = layer_and_moment_integrals(p, x);
                    srow[k] += li.single;
                    drow[k] += sign * li.double;
                    let st = &stencils[k];
                    for (&j, &w) in st.idx.iter().zip(&st.w) {
                        srow[j] += mi.single * w;
                        drow[j] += sign * mi.double * w;
                    }
                }
            });

        let kinds: Vec<BcKind> = panels.iter().map(|p| p.bc).collect();
        let lengths: Vec<f64> = panels.iter().map(|p| p.length).collect();
        let perimeter: f64 = lengths.iter().sum();
        let m = n + 1;
        let mut a = vec![0.0; m * m];
        for i in 0..n {
            for j in 0..n {
                a[i * m + j] = match kinds[j] {
                    BcKind::DirichletSurface => -single[i * n + j],
                    BcKind::NeumannWall => double[i * n + j] + if i == j { 0.5 } else { 0.0 },
                };
            }
            a[i * m + n] = -1.0;
        }
        for j in 0..n {
            if kinds[j] == BcKind::DirichletSurface {
                a[n * m + j] = lengths[j] / perimeter;
            }
        }
        let lu = LuFactors::factor(m, a)?;
        Ok(Self {
            n,
            stencils,
            dirichlet_idx: mesh.indices_of(BcKind::DirichletSurface),
            neumann_idx: mesh.indices_of(BcKind::NeumannWall),
            kinds,
            lengths,
            single,
            double,
            lu,
        })
    }

    /// `dirichlet` lists values on the Dirichlet panels and `neumann` fluxes
    /// on the Neumann panels, each in mesh order.
    pub fn solve(&self, dirichlet: &[f64], neumann: &[f64]) -> Result<CauchyData> {
        let n = self.n;
        if dirichlet.len() != self.dirichlet_idx.len() || neumann.len() != self.neumann_idx.len() {
            return Err(Error::Argument(format!(
                "boundary data sizes ({}, {}) do not match panel counts ({}, {})",
                dirichlet.len(),
                neumann.len(),
                self.dirichlet_idx.len(),
                self.neumann_idx.len()
            )));
        }
        let mut value = vec![0.0; n];
        let mut flux = vec![0.0; n];
        let mut prescribed = vec![Prescribed::Value; n];
        for (&j, &v) in self.dirichlet_idx.iter().zip(dirichlet) {
            value[j] = v;
        }
        for (&j, &q) in self.neumann_idx.iter().zip(neumann) {
            flux[j] = q;
            prescribed[j] = Prescribed::Flux;
        }

        let mut rhs = vec![0.0; n + 1];
        rhs[..n].par_iter_mut().enumerate().for_each(|(i, r)| {
            let srow = &self.single[i * n..(i + 1) * n];
            let drow = &self.double[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                match self.kinds[j] {
                    BcKind::DirichletSurface => {
                        let c = drow[j] + if i == j { 0.5 } else { 0.0 };
                        acc -= c * value[j];
                    }
                    BcKind::NeumannWall => acc += srow[j] * flux[j],
                }
            }
            *r = acc;
        });
        let perimeter: f64 = self.lengths.iter().sum();
        rhs[n] = -self
            .neumann_idx
            .iter()
            .map(|&j| flux[j] * self.lengths[j])
            .sum::<f64>()
            / perimeter;

        let x = self.lu.solve(&rhs)?;
        for j in 0..n {
            match self.kinds[j] {
                BcKind::DirichletSurface => flux[j] = x[j],
                BcKind::NeumannWall => value[j] = x[j],
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix { column: n, pivot: f64::NAN });
        }
        let value_slope = apply_stencils(&self.stencils, &value);
        let flux_slope = apply_stencils(&self.stencils, &flux);
        Ok(CauchyData { value, flux, prescribed, value_slope, flux_slope, defect: x[n] })
    }
}

/// Tangential-derivative weights for one panel: three midpoints on the same
/// side of the box.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeStencil {
    pub idx: Vec<usize>,
    pub w: Vec<f64>,
}

/// Derivative at `at` of the interpolant through `xs`.
pub fn lagrange_derivative_weights(xs: &[f64], at: f64) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let denom: f64 = (0..n).filter(|&k| k != i).map(|k| xs[i] - xs[k]).product();
            let numer: f64 = (0..n)
                .filter(|&k| k != i)
                .map(|k| (0..n).filter(|&m| m != i && m != k).map(|m| at - xs[m]).product::<f64>())
                .sum();
            numer / denom
        })
        .collect()
}

pub fn slope_stencils(mesh: &BoundaryMesh) -> Vec<SlopeStencil> {
    let panels = mesh.panels();
    let mut out = vec![SlopeStencil { idx: vec![], w: vec![] }; panels.len()];
    for side in [Side::Bottom, Side::Right, Side::Surface, Side::Left] {
        let range = mesh.side_range(side);
        let m = range.len();
        let mut pos = Vec::with_capacity(m);
        let mut s = 0.0;
        for (k, j) in range.clone().enumerate() {
            if k > 0 {
                s += 0.5 * (panels[j - 1].length + panels[j].length);
            } else {
                s = 0.5 * panels[j].length;
            }
            pos.push(s);
        }
        for k in 0..m {
            let local: Vec<usize> = match m {
                0 | 1 => vec![],
                2 => vec![0, 1],
                _ => {
                    let start = k.saturating_sub(1).min(m - 3);
                    vec![start, start + 1, start + 2]
                }
            };
            if local.is_empty() {
                continue;
            }
            let xs: Vec<f64> = local.iter().map(|&l| pos[l]).collect();
            out[range.start + k] = SlopeStencil {
                idx: local.iter().map(|&l| range.start + l).collect(),
                w: lagrange_derivative_weights(&xs, pos[k]),
            };
        }
    }
    out
}

pub fn apply_stencils(stencils: &[SlopeStencil], values: &[f64]) -> Vec<f64> {
    stencils
        .iter()
        .map(|st| st.idx.iter().zip(&st.w).map(|(&j, &w)| w * values[j]).sum())
        .collect()
}

/// One-shot mixed solve.
pub fn solve_mixed_bvp(mesh: &BoundaryMesh, dirichlet_on_surface: &[f64], neumann_on_walls: &[f64]) -> Result<CauchyData> {
    BemSolver::new(mesh)?.solve(dirichlet_on_surface, neumann_on_walls)
}

/// Dirichlet-to-Neumann map with homogeneous wall data. Input and output are
/// per surface panel in mesh order.
pub fn dtn_surface(mesh: &BoundaryMesh, surface_potential: &[f64]) -> Result<Vec<f64>> {
    let data = solve_mixed_bvp(mesh, surface_potential, &vec![0.0; mesh.wall_count()])?;
    Ok(mesh.surface_range().map(|j| data.flux[j]).collect())
}

/// Potential, gradient and Hessian `(∂11, ∂12, ∂22)` at an interior point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorSample {
    pub value: f64,
    pub grad: Point,
    pub hessian: [f64; 3],
}

pub const DEFAULT_NEAR_FIELD_FACTOR: f64 = 2.0;

/// Points must lie inside the polygon and at least `near_field_factor`
/// panel lengths from every panel.
pub fn check_admissible(mesh: &BoundaryMesh, p: Point, near_field_factor: f64) -> Result<()> {
    if !p.is_finite() || !mesh.contains(p) || mesh.near_field_ratio(p) < near_field_factor {
        return Err(Error::NearBoundary { x: p.x, y: p.y });
    }
    Ok(())
}

pub fn is_admissible(mesh: &BoundaryMesh, p: Point, near_field_factor: f64) -> bool {
    check_admissible(mesh, p, near_field_factor).is_ok()
}

/// Representation formula `φ(x) = Σ_j q_j S_j(x) − u_j D_j(x)` and its
/// derivatives.
pub fn eval_interior(
    mesh: &BoundaryMesh,
    cauchy: &CauchyData,
    points: &[Point],
    near_field_factor: f64,
) -> Result<Vec<InteriorSample>> {
    for &p in points {
        check_admissible(mesh, p, near_field_factor)?;
    }
    Ok(points.par_iter().map(|&x| eval_point(mesh, cauchy, x)).collect())
}

fn eval_point(mesh: &BoundaryMesh, cauchy: &CauchyData, x: Point) -> InteriorSample {
    let mut value = 0.0;
    let mut d1 = num_complex::Complex64::new(0.0, 0.0);
    let mut d2 = d1;
    for (j, p) in mesh.panels().iter().enumerate() {
        let (u, q) = (cauchy.value[j], cauchy.flux[j]);
        let (us, qs) = (cauchy.value_slope[j], cauchy.flux_slope[j]);
        let (li, mi) = layer_and_moment_integrals(p, x);
        value += q * li.single + qs * mi.single - u * li.double - us * mi.double;
        let ld = panel_layer_derivatives(p, x);
        d1 += ld.single_d1 * q + ld.moment_single_d1 * qs - ld.double_d1 * u - ld.moment_double_d1 * us;
        d2 += ld.single_d2 * q + ld.moment_single_d2 * qs - ld.double_d2 * u - ld.moment_double_d2 * us;
    }
    InteriorSample {
        value,
        grad: Point::new(d1.re, -d1.im),
        hessian: [d2.re, -d2.im, -d2.re],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_boundary_mesh, InterfaceCurve, Side};
    use std::f64::consts::PI;

    fn square(n: usize) -> BoundaryMesh {
        build_boundary_mesh(&InterfaceCurve::flat(n + 1).unwrap(), n).unwrap()
    }

    fn mode(k: f64) -> (impl Fn(Point) -> f64, impl Fn(Point) -> Point) {
        let kp = k * PI;
        (
            move |p: Point| (kp * p.x).cos() * (kp * p.y).cosh(),
            move |p: Point| Point::new(-kp * (kp * p.x).sin() * (kp * p.y).cosh(), kp * (kp * p.x).cos() * (kp * p.y).sinh()),
        )
    }

    fn surface_values(mesh: &BoundaryMesh, f: impl Fn(Point) -> f64) -> Vec<f64> {
        mesh.indices_of(BcKind::DirichletSurface).iter().map(|&j| f(mesh.panels()[j].mid)).collect()
    }

    #[test]
    fn constant_data() {
        let mesh = square(16);
        let data = solve_mixed_bvp(&mesh, &vec![1.0; mesh.surface_count()], &vec![0.0; mesh.wall_count()]).unwrap();
        for j in 0..mesh.len() {
            assert!((data.value[j] - 1.0).abs() < 1e-8);
            assert!(data.flux[j].abs() < 1e-8);
        }
        assert!(data.defect.abs() < 1e-12);
        let s = eval_interior(&mesh, &data, &[Point::new(0.5, 0.5), Point::new(0.3, 0.7)], 2.0).unwrap();
        for v in s {
            assert!((v.value - 1.0).abs() < 1e-8);
            assert!(v.grad.norm() < 1e-8);
        }
    }

    #[test]
    fn prescribed_entries_are_untouched() {
        let mesh = square(8);
        let (f, _) = mode(1.0);
        let dir = surface_values(&mesh, &f);
        let neu: Vec<f64> = (0..mesh.wall_count()).map(|i| 0.01 * i as f64).collect();
        let data = solve_mixed_bvp(&mesh, &dir, &neu).unwrap();
        let di = mesh.indices_of(BcKind::DirichletSurface);
        let ni = mesh.indices_of(BcKind::NeumannWall);
        for (k, &j) in di.iter().enumerate() {
            assert_eq!(data.value[j].to_bits(), dir[k].to_bits());
            assert_eq!(data.prescribed[j], Prescribed::Value);
        }
        for (k, &j) in ni.iter().enumerate() {
            assert_eq!(data.flux[j].to_bits(), neu[k].to_bits());
            assert_eq!(data.prescribed[j], Prescribed::Flux);
        }
        assert!(data.compatibility_ok(&mesh, 1e-8));
    }

    #[test]
    fn size_mismatch_is_an_argument_error() {
        let mesh = square(8);
        assert!(matches!(solve_mixed_bvp(&mesh, &[1.0], &[]), Err(Error::Argument(_))));
    }

    fn mode_flux_error(n: usize, k: f64) -> f64 {
        let mesh = square(n);
        let (f, g) = mode(k);
        let flux = dtn_surface(&mesh, &surface_values(&mesh, &f)).unwrap();
        let exact: Vec<f64> = mesh.surface_range().map(|j| g(mesh.panels()[j].mid).y).collect();
        let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        flux.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn mode_two_flux_converges() {
        let errs: Vec<f64> = [32, 64, 128].iter().map(|&n| mode_flux_error(n, 2.0)).collect();
        assert!(errs[2] <= 5e-2, "{errs:?}");
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn wall_trace_converges() {
        let err = |n: usize| {
            let mesh = square(n);
            let (f, _) = mode(1.0);
            let data = solve_mixed_bvp(&mesh, &surface_values(&mesh, &f), &vec![0.0; mesh.wall_count()]).unwrap();
            mesh.side_range(Side::Left)
                .map(|j| (data.value[j] - f(mesh.panels()[j].mid)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e2 < e1);
        assert!((e1 / e2).log2() >= 1.0, "{e1} {e2}");
    }

    #[test]
    fn dtn_is_linear() {
        let mesh = build_boundary_mesh(&InterfaceCurve::graph(25, |x| 0.1 * (PI * x).sin()).unwrap(), 12).unwrap();
        let f: Vec<f64> = mesh.surface_range().map(|j| mesh.panels()[j].mid.x.powi(2)).collect();
        let g: Vec<f64> = mesh.surface_range().map(|j| (3.0 * mesh.panels()[j].mid.x).sin()).collect();
        let (a, b) = (1.7, -0.3);
        let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let df = dtn_surface(&mesh, &f).unwrap();
        let dg = dtn_surface(&mesh, &g).unwrap();
        let dc = dtn_surface(&mesh, &combo).unwrap();
        for i in 0..dc.len() {
            assert!((dc[i] - (a * df[i] + b * dg[i])).abs() < 1e-10);
        }
        assert!(dtn_surface(&mesh, &vec![3.0; f.len()]).unwrap().iter().all(|q| q.abs() < 1e-8));
    }

    #[test]
    fn interior_mode_value_and_gradient() {
        let mesh = square(64);
        let (f, g) = mode(2.0);
        let data = solve_mixed_bvp(&mesh, &surface_values(&mesh, &f), &vec![0.0; mesh.wall_count()]).unwrap();
        let s = eval_interior(&mesh, &data, &[Point::new(0.5, 0.5), Point::new(0.25, 0.5)], 2.0).unwrap();
        let exact = -(PI).cosh();
        assert!(((s[0].value - exact) / exact).abs() < 1e-3, "{}", s[0].value);
        let ge = g(Point::new(0.25, 0.5));
        assert!((s[1].grad - ge).norm() / ge.norm() < 1e-2);
    }

    #[test]
    fn near_boundary_points_are_refused() {
        let mesh = square(16);
        let data = solve_mixed_bvp(&mesh, &vec![1.0; 16], &vec![0.0; 48]).unwrap();
        for p in [Point::new(0.5, 0.99), Point::new(1.5, 0.5), Point::new(0.01, 0.5)] {
            assert!(matches!(eval_interior(&mesh, &data, &[p], 2.0), Err(Error::NearBoundary { .. })));
        }
    }

    #[test]
    fn maximum_principle_spot_check() {
        let mesh = build_boundary_mesh(&InterfaceCurve::graph(33, |x| 0.15 * (2.0 * PI * x).sin()).unwrap(), 16).unwrap();
        let dir: Vec<f64> = mesh.surface_range().map(|j| 1.0 + mesh.panels()[j].mid.x).collect();
        let data = solve_mixed_bvp(&mesh, &dir, &vec![0.0; mesh.wall_count()]).unwrap();
        let (lo, hi) = dir.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let pts: Vec<Point> = (1..10)
            .flat_map(|i| (1..10).map(move |j| Point::new(i as f64 / 10.0, j as f64 / 10.0)))
            .filter(|&p| is_admissible(&mesh, p, 2.0))
            .collect();
        assert!(!pts.is_empty());
        for s in eval_interior(&mesh, &data, &pts, 2.0).unwrap() {
            assert!(s.value >= lo - 1e-6 && s.value <= hi + 1e-6);
        }
    }

    #[test]
    fn domain_integral_of_linear_function() {
        // φ = x2 is harmonic with flux 1 on the top, -1 on the bottom, 0 on the sides
        let mesh = square(8);
        let mut data = CauchyData {
            value: vec![0.0; mesh.len()],
            flux: vec![0.0; mesh.len()],
            prescribed: vec![Prescribed::Value; mesh.len()],
            value_slope: vec![0.0; mesh.len()],
            flux_slope: vec![0.0; mesh.len()],
            defect: 0.0,
        };
        for (j, p) in mesh.panels().iter().enumerate() {
            data.value[j] = p.mid.y;
            data.flux[j] = p.normal.y;
            data.value_slope[j] = p.tangent.y;
        }
        assert!((data.domain_integral(&mesh) - 0.5).abs() < 1e-14);
        assert!((data.energy(&mesh) - 0.5).abs() < 1e-14);
    }
}
