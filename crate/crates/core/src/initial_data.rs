//! Harmonic initial potentials `φ0 = Σ a_k cos(kπ x1) cosh(kπ x2)` on the
//! unit square. Each term has zero normal derivative on the three walls; the
//! amplitudes are chosen so the vertical velocity vanishes at both corners.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowState;
use crate::geometry::{InterfaceCurve, Point};
use crate::numerics::quadrature::gauss_legendre;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTerm {
    pub k: u32,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModePotential {
    pub terms: Vec<ModeTerm>,
}

/// Relative tolerance on the corner conditions.
pub const CORNER_TOL: f64 = 1e-12;

impl ModePotential {
    pub fn new(terms: Vec<ModeTerm>) -> Result<Self> {
        if terms.iter().any(|t| t.k == 0 || !t.a.is_finite()) {
            return Err(Error::Argument("mode numbers must be positive and amplitudes finite".into()));
        }
        Ok(Self { terms })
    }

    /// Same modes with every amplitude multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { terms: self.terms.iter().map(|t| ModeTerm { k: t.k, a: s * t.a }).collect() }
    }

    pub fn value(&self, p: Point) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let w = t.k as f64 * PI;
                t.a * (w * p.x).cos() * (w * p.y).cosh()
            })
            .sum()
    }

    pub fn gradient(&self, p: Point) -> Point {
        self.terms.iter().fold(Point::default(), |acc, t| {
            let w = t.k as f64 * PI;
            acc + Point::new(
                -t.a * w * (w * p.x).sin() * (w * p.y).cosh(),
                t.a * w * (w * p.x).cos() * (w * p.y).sinh(),
            )
        })
    }

    /// `(∂11, ∂12, ∂22)`.
    pub fn hessian(&self, p: Point) -> [f64; 3] {
        self.terms.iter().fold([0.0; 3], |acc, t| {
            let w = t.k as f64 * PI;
            let (c, s) = ((w * p.x).cos(), (w * p.x).sin());
            let (ch, sh) = ((w * p.y).cosh(), (w * p.y).sinh());
            let xx = -t.a * w * w * c * ch;
            [acc[0] + xx, acc[1] - t.a * w * w * s * sh, acc[2] - xx]
        })
    }

    /// Vertical velocity at `(0, 1)` and `(1, 1)`, each relative to
    /// `Σ |a_k| kπ sinh(kπ)`.
    pub fn corner_residuals(&self) -> (f64, f64) {
        let mut left = 0.0;
        let mut right = 0.0;
        let mut scale = 0.0;
        for t in &self.terms {
            let w = t.k as f64 * PI;
            let v = t.a * w * w.sinh();
            left += v;
            right += if t.k % 2 == 0 { v } else { -v };
            scale += v.abs();
        }
        if scale == 0.0 {
            return (0.0, 0.0);
        }
        (left.abs() / scale, right.abs() / scale)
    }

    pub fn check_corners(&self) -> Result<()> {
        let (l, r) = self.corner_residuals();
        if l > CORNER_TOL || r > CORNER_TOL {
            return Err(Error::Argument(format!(
                "potential violates the corner conditions (relative residuals {l:.3e}, {r:.3e})"
            )));
        }
        Ok(())
    }
}

/// Two-mode potential with `k ∈ {1, 3}` whose virial functional is positive
/// for `amplitude > 0`.
pub fn make_reference_data(amplitude: f64) -> Result<ModePotential> {
    if amplitude == 0.0 || !amplitude.is_finite() {
        return Err(Error::Argument("reference amplitude must be finite and nonzero".into()));
    }
    let a1 = -amplitude;
    let a3 = -a1 * PI.sinh() / (3.0 * (3.0 * PI).sinh());
    ModePotential::new(vec![ModeTerm { k: 1, a: a1 }, ModeTerm { k: 3, a: a3 }])
}

/// Square subdivisions per direction used by [`initial_A`].
pub const A_SUBDIVISIONS: usize = 8;

/// `∫ u1 x1 dx` over the unit square plus `∫ x2 u2(1, x2) dx2`, by collapsed
/// Gauss rules on a triangulated square and a composite Gauss rule on the
/// wall.
#[allow(non_snake_case)]
pub fn initial_A(potential: &ModePotential, quadrature_order: usize) -> Result<f64> {
    let rule = gauss_legendre(quadrature_order)?;
    let m = A_SUBDIVISIONS;
    let h = 1.0 / m as f64;
    let integrand = |p: Point| potential.gradient(p).x * p.x;
    let mut volume = 0.0;
    for i in 0..m {
        for j in 0..m {
            let o = Point::new(i as f64 * h, j as f64 * h);
            let c = [o, o + Point::new(h, 0.0), o + Point::new(h, h), o + Point::new(0.0, h)];
            volume += triangle_integral(&rule, [c[0], c[1], c[2]], integrand);
            volume += triangle_integral(&rule, [c[0], c[2], c[3]], integrand);
        }
    }
    let wall = rule.integrate_composite(0.0, 1.0, m, |y| y * potential.gradient(Point::new(1.0, y)).y);
    Ok(volume + wall)
}

/// Duffy map `(u, v) -> v0 + u (v1 - v0) + u v (v2 - v1)` on the unit square.
fn triangle_integral(
    rule: &crate::numerics::quadrature::QuadratureRule,
    v: [Point; 3],
    f: impl Fn(Point) -> f64,
) -> f64 {
    let area2 = (v[1] - v[0]).cross(v[2] - v[0]).abs();
    let mut acc = 0.0;
    for (&xu, &wu) in rule.nodes.iter().zip(&rule.weights) {
        let u = 0.5 * (xu + 1.0);
        for (&xv, &wv) in rule.nodes.iter().zip(&rule.weights) {
            let t = 0.5 * (xv + 1.0);
            let p = v[0] + (v[1] - v[0]) * u + (v[2] - v[1]) * (u * t);
            acc += 0.25 * wu * wv * u * f(p);
        }
    }
    acc * area2
}

/// Flat surface with `n_markers` uniform markers carrying `φ0`.
pub fn sample_initial_state(potential: &ModePotential, n_markers: usize) -> Result<FlowState> {
    if n_markers < 8 {
        return Err(Error::Argument(format!("n_markers = {n_markers}, need at least 8")));
    }
    let curve = InterfaceCurve::flat(n_markers)?;
    let phi = curve.points().iter().map(|&p| potential.value(p)).collect();
    FlowState::new(0.0, curve, phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_corner_residuals_vanish() {
        let p = make_reference_data(1.0).unwrap();
        let (l, r) = p.corner_residuals();
        assert!(l <= 1e-12 && r <= 1e-12, "{l} {r}");
        p.check_corners().unwrap();
    }

    #[test]
    fn zero_amplitude_rejected() {
        assert!(matches!(make_reference_data(0.0), Err(Error::Argument(_))));
    }

    #[test]
    fn single_mode_violates_corners() {
        let p = ModePotential::new(vec![ModeTerm { k: 2, a: 1.0 }]).unwrap();
        assert!(p.check_corners().is_err());
    }

    #[test]
    fn wall_flux_vanishes_structurally() {
        let p = make_reference_data(1.3).unwrap();
        for i in 0..=10 {
            let s = i as f64 / 10.0;
            assert!(p.gradient(Point::new(0.0, s)).x.abs() < 1e-12);
            assert!(p.gradient(Point::new(1.0, s)).x.abs() < 1e-11);
            assert!(p.gradient(Point::new(s, 0.0)).y.abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_and_hessian_match_differences() {
        let p = make_reference_data(1.0).unwrap();
        let x = Point::new(0.37, 0.61);
        let h = 1e-5;
        let dx = Point::new(h, 0.0);
        let dy = Point::new(0.0, h);
        let g = p.gradient(x);
        assert!((g.x - (p.value(x + dx) - p.value(x - dx)) / (2.0 * h)).abs() < 1e-6 * g.norm());
        assert!((g.y - (p.value(x + dy) - p.value(x - dy)) / (2.0 * h)).abs() < 1e-6 * g.norm());
        let hs = p.hessian(x);
        let gx = (p.gradient(x + dx) - p.gradient(x - dx)) * (0.5 / h);
        let gy = (p.gradient(x + dy) - p.gradient(x - dy)) * (0.5 / h);
        assert!((hs[0] - gx.x).abs() < 1e-5 * gx.norm());
        assert!((hs[1] - gx.y).abs() < 1e-5 * gx.norm());
        assert!((hs[2] - gy.y).abs() < 1e-5 * gy.norm());
    }

    /// `A = φ0(1, 1) − ∫φ0`, and every cosine mode integrates to zero over
    /// the square, so `A = Σ a_k (−1)^k cosh(kπ)`.
    fn closed_form_a(p: &ModePotential) -> f64 {
        p.terms
            .iter()
            .map(|t| t.a * if t.k % 2 == 0 { 1.0 } else { -1.0 } * (t.k as f64 * PI).cosh())
            .sum()
    }

    #[test]
    fn reference_a_is_positive_and_matches_closed_form() {
        let p = make_reference_data(1.0).unwrap();
        let a = initial_A(&p, 16).unwrap();
        let exact = closed_form_a(&p);
        assert!((a - exact).abs() <= 1e-12 * exact, "{a} vs {exact}");
        assert!((a - 7.742_373_439_628_837).abs() < 1e-10);
    }

    #[test]
    fn quadrature_order_doubling_is_stable() {
        let p = make_reference_data(1.0).unwrap();
        for order in [12, 16, 24] {
            let a = initial_A(&p, order).unwrap();
            let b = initial_A(&p, 2 * order).unwrap();
            assert!((a - b).abs() < 1e-10 * a.abs(), "order {order}: {a} {b}");
        }
    }

    #[test]
    fn a_is_linear_and_odd() {
        let p = make_reference_data(1.0).unwrap();
        let a1 = initial_A(&p, 16).unwrap();
        let a3 = initial_A(&make_reference_data(3.0).unwrap(), 16).unwrap();
        assert!((a3 - 3.0 * a1).abs() < 1e-12 * a3);
        assert_eq!(initial_A(&p.scaled(-1.0), 16).unwrap(), -a1);
        assert_eq!(initial_A(&ModePotential::default(), 16).unwrap(), 0.0);
    }

    #[test]
    fn sampled_state_shape() {
        let p = make_reference_data(1.0).unwrap();
        let s = sample_initial_state(&p, 33).unwrap();
        assert_eq!(s.marker_count(), 33);
        assert_eq!(s.t, 0.0);
        assert!((s.phi[32] - p.value(Point::new(1.0, 1.0))).abs() < 1e-15);
        let still = sample_initial_state(&ModePotential::default(), 9).unwrap();
        assert!(still.phi.iter().all(|&v| v == 0.0));
        assert!(sample_initial_state(&p, 7).is_err());
    }
}
