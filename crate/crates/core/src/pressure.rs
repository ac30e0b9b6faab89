//! Pressure from the Bernoulli relation `p = −φ_t − ½|∇φ|²`, where `φ_t` is
//! the harmonic function with `φ_t = −½|u|²` on the free surface (so `p = 0`
//! there) and zero normal derivative on the fixed walls.

use rayon::prelude::*;

use crate::bem::{eval_interior, is_admissible, CauchyData, InteriorSample};
use crate::error::{Error, Result};
use crate::flow::FlowSolution;
use crate::geometry::{BoundaryMesh, Point, Side};

#[derive(Debug, Clone)]
pub struct PressureField {
    pub mesh: BoundaryMesh,
    pub phi: CauchyData,
    pub phi_t: CauchyData,
    pub near_field_factor: f64,
}

/// `φ_t` Cauchy data on the mesh of `solution`, reusing its factorisation.
pub fn solve_phi_t(solution: &FlowSolution) -> Result<CauchyData> {
    let mesh = &solution.mesh;
    let range = mesh.surface_range();
    let dirichlet: Vec<f64> = range
        .clone()
        .map(|j| -0.5 * solution.segment_velocity[range.end - 1 - j].norm_sq())
        .collect();
    solution.solver.solve(&dirichlet, &vec![0.0; mesh.wall_count()])
}

impl PressureField {
    pub fn new(solution: &FlowSolution, near_field_factor: f64) -> Result<Self> {
        Ok(Self {
            mesh: solution.mesh.clone(),
            phi: solution.cauchy.clone(),
            phi_t: solve_phi_t(solution)?,
            near_field_factor,
        })
    }

    fn samples(&self, points: &[Point]) -> Result<(Vec<InteriorSample>, Vec<InteriorSample>)> {
        Ok((
            eval_interior(&self.mesh, &self.phi, points, self.near_field_factor)?,
            eval_interior(&self.mesh, &self.phi_t, points, self.near_field_factor)?,
        ))
    }

    pub fn is_admissible(&self, p: Point) -> bool {
        is_admissible(&self.mesh, p, self.near_field_factor)
    }

    /// `∇p = −∇φ_t − (∇∇φ)∇φ`.
    pub fn gradient_at(&self, points: &[Point]) -> Result<Vec<Point>> {
        let (s, st) = self.samples(points)?;
        Ok(s.iter()
            .zip(&st)
            .map(|(a, b)| {
                let [hxx, hxy, hyy] = a.hessian;
                let g = a.grad;
                Point::new(-b.grad.x - (hxx * g.x + hxy * g.y), -b.grad.y - (hxy * g.x + hyy * g.y))
            })
            .collect())
    }

    /// `∫_Ω p dx = −∫ φ_t dx − ½ ∮ φ ∂φ/∂n ds`.
    pub fn domain_integral(&self) -> f64 {
        -self.phi_t.domain_integral(&self.mesh) - self.phi.energy(&self.mesh)
    }
}

pub fn pressure_at(field: &PressureField, points: &[Point]) -> Result<Vec<f64>> {
    let (s, st) = field.samples(points)?;
    Ok(s.iter().zip(&st).map(|(a, b)| -b.value - 0.5 * a.grad.norm_sq()).collect())
}

/// One point of the pressure Poisson check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonSample {
    pub point: Point,
    /// `|−Δ_h p − rhs|`.
    pub residual: f64,
    /// `(∂1u1)² + (∂2u2)² + 2(∂2u1)²`.
    pub rhs: f64,
}

/// Five-point Laplacian of `p` against the velocity-gradient expression.
pub fn pressure_poisson_residual(field: &PressureField, points: &[Point], h: f64) -> Result<Vec<PoissonSample>> {
    if !(h > 0.0) {
        return Err(Error::Argument(format!("finite-difference step h = {h} must be positive")));
    }
    let offsets = [
        Point::new(0.0, 0.0),
        Point::new(h, 0.0),
        Point::new(-h, 0.0),
        Point::new(0.0, h),
        Point::new(0.0, -h),
    ];
    let stencil: Vec<Point> = points.iter().flat_map(|&p| offsets.iter().map(move |&o| p + o)).collect();
    let p = pressure_at(field, &stencil)?;
    let centre = eval_interior(&field.mesh, &field.phi, points, field.near_field_factor)?;
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, &pt)| {
            let v = &p[5 * i..5 * i + 5];
            let lap = (v[1] + v[2] + v[3] + v[4] - 4.0 * v[0]) / (h * h);
            let [hxx, hxy, hyy] = centre[i].hessian;
            let rhs = hxx * hxx + hyy * hyy + 2.0 * hxy * hxy;
            PoissonSample { point: pt, residual: (-lap - rhs).abs(), rhs }
        })
        .collect())
}

/// Result of sampling `p` on a lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureExtremes {
    pub min: f64,
    pub argmin: Point,
    pub max_abs: f64,
    pub count: usize,
}

/// Cell-centred `n × n` lattice over the bounding box of the domain, keeping
/// only admissible points.
pub fn admissible_lattice(mesh: &BoundaryMesh, n: usize, near_field_factor: f64) -> Vec<Point> {
    let (lo, hi) = mesh.bounding_box();
    let cells: Vec<Point> = (0..n)
        .flat_map(|i| {
            (0..n).map(move |j| {
                Point::new(
                    lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / n as f64,
                    lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / n as f64,
                )
            })
        })
        .collect();
    cells
        .into_par_iter()
        .filter(|&p| is_admissible(mesh, p, near_field_factor))
        .collect()
}

pub fn pressure_min(field: &PressureField, lattice_n: usize) -> Result<PressureExtremes> {
    let points = admissible_lattice(&field.mesh, lattice_n, field.near_field_factor);
    if points.is_empty() {
        return Err(Error::Argument(format!("no admissible points on a {lattice_n}x{lattice_n} lattice")));
    }
    let p = pressure_at(field, &points)?;
    let (i_min, &min) = p
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let max_abs = p.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(PressureExtremes { min, argmin: points[i_min], max_abs, count: points.len() })
}

/// Right-wall traces: `(∫ φ_t dx2, ∫ (u2)² dx2)`, from wall-panel values and
/// tangential slopes (wall panels run upward, so the slope is `∂2`).
pub fn right_wall_traces(field: &PressureField) -> (f64, f64) {
    let panels = field.mesh.panels();
    field.mesh.side_range(Side::Right).fold((0.0, 0.0), |(a, b), j| {
        let l = panels[j].length;
        let s = field.phi.value_slope[j];
        (a + field.phi_t.value[j] * l, b + s * s * l)
    })
}

/// `∫_0^1 p(t, 1, x2) dx2` with `p = −φ_t − ½(∂2φ)²` on the wall.
pub fn wall_pressure_integral(field: &PressureField) -> f64 {
    let (phi_t, u2_sq) = right_wall_traces(field);
    -phi_t - 0.5 * u2_sq
}

/// Largest normal pressure derivative on the three walls, extrapolated from
/// two interior offsets, relative to the largest sampled `|∇p|`.
pub fn wall_neumann_residual(field: &PressureField, samples_per_wall: usize) -> Result<f64> {
    let panel_len = field
        .mesh
        .indices_of(crate::geometry::BcKind::NeumannWall)
        .iter()
        .map(|&j| field.mesh.panels()[j].length)
        .fold(0.0, f64::max);
    let d = 1.05 * field.near_field_factor * panel_len;
    let margin = 2.0 * d + 1e-9;
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for k in 0..samples_per_wall {
        let s = margin + (1.0 - 2.0 * margin) * (k as f64 + 0.5) / samples_per_wall as f64;
        for (base, inward) in [
            (Point::new(1.0, s), Point::new(-1.0, 0.0)),
            (Point::new(0.0, s), Point::new(1.0, 0.0)),
            (Point::new(s, 0.0), Point::new(0.0, 1.0)),
        ] {
            let near = base + inward * d;
            let far = base + inward * (2.0 * d);
            if field.is_admissible(near) && field.is_admissible(far) {
                points.push(near);
                points.push(far);
                normals.push(-inward);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::Argument("no admissible wall offsets".into()));
    }
    let g = field.gradient_at(&points)?;
    let scale = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let worst = normals
        .iter()
        .enumerate()
        .map(|(i, n)| (2.0 * g[2 * i].dot(*n) - g[2 * i + 1].dot(*n)).abs())
        .fold(0.0, f64::max);
    Ok(if scale > 0.0 { worst / scale } else { 0.0 })
}
