use crate::error::{Error, Result};

/// Gauss–Legendre rule on the reference interval (-1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub const MAX_GAUSS_POINTS: usize = 64;

/// Nodes are roots of P_n found by Newton iteration from the Chebyshev-like
/// initial guess; weights from the derivative at the root.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    if !(1..=MAX_GAUSS_POINTS).contains(&n) {
        return Err(Error::Argument(format!("Gauss–Legendre order {n} outside 1..={MAX_GAUSS_POINTS}")));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes, weights })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral of `f` over `[a, b]` after the affine map from (-1, 1).
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let centre = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(centre + half * x))
            .sum::<f64>()
            * half
    }

    /// Composite rule: `[a, b]` split into `pieces` equal subintervals.
    pub fn integrate_composite(&self, a: f64, b: f64, pieces: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = (b - a) / pieces as f64;
        (0..pieces)
            .map(|k| {
                let lo = a + k as f64 * h;
                self.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_point_rule() {
        let r = gauss_legendre(1).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert!((r.weights[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_rule() {
        let r = gauss_legendre(2).unwrap();
        let x = 1.0 / 3f64.sqrt();
        assert!((r.nodes[0] + x).abs() < 1e-15);
        assert!((r.nodes[1] - x).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-14);
        assert!((r.weights[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn wall_moment_one_third() {
        let r = gauss_legendre(8).unwrap();
        let v = r.integrate(0.0, 1.0, |x| x * x);
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn out_of_range_orders() {
        assert!(matches!(gauss_legendre(0), Err(Error::Argument(_))));
        assert!(matches!(gauss_legendre(65), Err(Error::Argument(_))));
    }

    #[test]
    fn weights_sum_and_symmetry() {
        for n in 1..=MAX_GAUSS_POINTS {
            let r = gauss_legendre(n).unwrap();
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-14, "n={n}: sum {s}");
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for i in 0..n {
                assert!((r.nodes[i] + r.nodes[n - 1 - i]).abs() < 1e-15);
                assert!(r.nodes[i].abs() < 1.0);
            }
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn exact_for_degree_two_n_minus_one() {
        for n in 1..=20 {
            let r = gauss_legendre(n).unwrap();
            for k in 0..2 * n {
                let got = r.integrate(-1.0, 1.0, |x| x.powi(k as i32));
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((got - exact).abs() < 1e-12, "n={n} k={k}: {got} vs {exact}");
            }
        }
    }
}
