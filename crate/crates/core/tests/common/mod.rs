//! Analytic oracles for the unit-amplitude reference potential
//! `φ0 = Σ a_k cos(kπx1) cosh(kπx2)`, written independently of the crate.
#![allow(dead_code)]

use std::f64::consts::PI;

use freesurf::geometry::Point;

/// `(k, a_k)` of the reference potential with unit amplitude.
pub fn reference_modes() -> [(f64, f64); 2] {
    let a1 = -1.0;
    let a3 = PI.sinh() / (3.0 * (3.0 * PI).sinh());
    [(1.0, a1), (3.0, a3)]
}

pub fn grad_phi0(p: Point) -> Point {
    reference_modes().iter().fold(Point::new(0.0, 0.0), |g, &(k, a)| {
        let w = k * PI;
        Point::new(
            g.x - a * w * (w * p.x).sin() * (w * p.y).cosh(),
            g.y + a * w * (w * p.x).cos() * (w * p.y).sinh(),
        )
    })
}

/// Tensor Gauss-Legendre nodes on `[0, 1]`, by Newton on the Legendre
/// recurrence.
pub fn gauss01(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        out.push((0.5 * (1.0 - x), 1.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

pub fn square_integral(f: impl Fn(Point) -> f64) -> f64 {
    let g = gauss01(40);
    g.iter().map(|&(x, wx)| g.iter().map(|&(y, wy)| wx * wy * f(Point::new(x, y))).sum::<f64>()).sum()
}

pub fn wall_integral(f: impl Fn(f64) -> f64) -> f64 {
    gauss01(40).iter().map(|&(y, w)| w * f(y)).sum()
}

/// `A = Σ a_k (−1)^k cosh(kπ)`.
pub fn closed_form_a() -> f64 {
    reference_modes().iter().map(|&(k, a)| a * (k * PI).cos() * (k * PI).cosh()).sum()
}

/// Pressure at `t = 0` from the cosine series of `−½|u|²` on the flat
/// surface, continued harmonically with zero wall flux.
pub fn pressure_oracle(p: Point) -> f64 {
    let modes = reference_modes();
    let mut phi_t = 0.0;
    for &(k, ak) in &modes {
        for &(l, al) in &modes {
            let c = 0.5 * ak * al * k * l * PI * PI;
            let (m1, m2) = ((k - l).abs(), k + l);
            let term = |m: f64| (m * PI * p.x).cos() * (m * PI * p.y).cosh() / (m * PI).cosh();
            let sq = c * ((k + l) * PI).cosh() * term(m1) - c * ((k - l) * PI).cosh() * term(m2);
            phi_t -= 0.5 * sq;
        }
    }
    -phi_t - 0.5 * grad_phi0(p).norm_sq()
}

pub fn phi0(p: Point) -> f64 {
    reference_modes().iter().map(|&(k, a)| a * (k * PI * p.x).cos() * (k * PI * p.y).cosh()).sum()
}

/// `(∂11, ∂12, ∂22)` of `φ0`.
pub fn hessian_phi0(p: Point) -> [f64; 3] {
    reference_modes().iter().fold([0.0; 3], |h, &(k, a)| {
        let w = k * PI;
        let xx = -a * w * w * (w * p.x).cos() * (w * p.y).cosh();
        let xy = -a * w * w * (w * p.x).sin() * (w * p.y).sinh();
        [h[0] + xx, h[1] + xy, h[2] - xx]
    })
}
