use crate::error::{Error, Result};

/// Square system `A x = b`, matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSystem {
    pub n: usize,
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl DenseSystem {
    pub fn new(n: usize, matrix: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        if matrix.len() != n * n || rhs.len() != n {
            return Err(Error::Argument(format!(
                "system of order {n} given {} matrix entries and {} rhs entries",
                matrix.len(),
                rhs.len()
            )));
        }
        if matrix.iter().chain(&rhs).any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite system entry".into()));
        }
        Ok(Self { n, matrix, rhs })
    }
}

/// Pivots below this multiple of the largest row norm count as zero.
pub const PIVOT_THRESHOLD: f64 = 1e-13;

/// Column block width of the factorisation.
const LU_BLOCK: usize = 48;

/// LU factors with row permutation, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn factor(n: usize, mut a: Vec<f64>) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::Argument("matrix size mismatch".into()));
        }
        let max_row = (0..n)
            .map(|i| a[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let tol = PIVOT_THRESHOLD * max_row;
        let mut perm: Vec<usize> = (0..n).collect();
        for kb in (0..n).step_by(LU_BLOCK) {
            let ke = (kb + LU_BLOCK).min(n);
            // Panel: unblocked elimination restricted to columns kb..ke.
            for k in kb..ke {
                let (p, pivot) = (k..n)
                    .map(|i| (i, a[i * n + k].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
                if !(pivot > tol) {
                    return Err(Error::SingularMatrix { column: k, pivot });
                }
                if p != k {
                    for j in 0..n {
                        a.swap(k * n + j, p * n + j);
                    }
                    perm.swap(k, p);
                }
                let akk = a[k * n + k];
                let (upper, lower) = a.split_at_mut((k + 1) * n);
                let row_k = &upper[k * n + k + 1..k * n + ke];
                for row in lower.chunks_exact_mut(n) {
                    let f = row[k] / akk;
                    row[k] = f;
                    if f != 0.0 {
                        for (r, u) in row[k + 1..ke].iter_mut().zip(row_k) {
                            *r -= f * u;
                        }
                    }
                }
            }
            if ke == n {
                break;
            }
            // U12 = L11⁻¹ A12.
            for k in kb..ke {
                let (upper, lower) = a.split_at_mut((k + 1) * n);
                let row_k = &upper[k * n + ke..(k + 1) * n];
                for i in k + 1..ke {
                    let row = &mut lower[(i - k - 1) * n..(i - k) * n];
                    let f = row[k];
                    for (r, u) in row[ke..].iter_mut().zip(row_k) {
                        *r -= f * u;
                    }
                }
            }
            // A22 -= L21 U12.
            let (upper, lower) = a.split_at_mut(ke * n);
            let u12 = &upper[kb * n..];
            for row in lower.chunks_exact_mut(n) {
                let (l, tail) = row.split_at_mut(ke);
                let f = &l[kb..ke];
                let u = |k: usize| &u12[k * n + ke..(k + 1) * n];
                let mut k = 0;
                while k + 4 <= f.len() {
                    let (f0, f1, f2, f3) = (f[k], f[k + 1], f[k + 2], f[k + 3]);
                    let m = tail.len();
                    let (u0, u1, u2, u3) = (&u(k)[..m], &u(k + 1)[..m], &u(k + 2)[..m], &u(k + 3)[..m]);
                    for j in 0..m {
                        tail[j] -= f0 * u0[j] + f1 * u1[j] + f2 * u2[j] + f3 * u3[j];
                    }
                    k += 4;
                }
                for k in k..f.len() {
                    for (r, v) in tail.iter_mut().zip(u(k)) {
                        *r -= f[k] * v;
                    }
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::Argument(format!("rhs of length {} for order {n}", b.len())));
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        Ok(x)
    }
}

/// LU with partial pivoting.
pub fn solve_dense(system: &DenseSystem) -> Result<Vec<f64>> {
    LuFactors::factor(system.n, system.matrix.clone())?.solve(&system.rhs)
}

/// `max_i |(A x - b)_i|`.
pub fn residual_inf(system: &DenseSystem, x: &[f64]) -> f64 {
    let n = system.n;
    (0..n)
        .map(|i| {
            let ax: f64 = system.matrix[i * n..(i + 1) * n].iter().zip(x).map(|(a, v)| a * v).sum();
            (ax - system.rhs[i]).abs()
        })
        .fold(0.0, f64::max)
}

pub fn matrix_norm_inf(n: usize, a: &[f64]) -> f64 {
    (0..n)
        .map(|i| a[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vector_norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs() {
        let n = 5;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0;
        }
        let b = vec![1.0, -2.0, 3.5, 0.0, 7.0];
        let x = solve_dense(&DenseSystem::new(n, a, b.clone()).unwrap()).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_two_by_two() {
        let s = DenseSystem::new(2, vec![2.0, 0.0, 0.0, 4.0], vec![2.0, 4.0]).unwrap();
        assert_eq!(solve_dense(&s).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn needs_pivoting() {
        let s = DenseSystem::new(2, vec![0.0, 1.0, 1.0, 0.0], vec![3.0, 5.0]).unwrap();
        assert_eq!(solve_dense(&s).unwrap(), vec![5.0, 3.0]);
    }

    #[test]
    fn random_construct_then_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let mut a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for i in 0..n {
            a[i * n + i] += n as f64;
        }
        let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| a[i * n + j] * x_true[j]).sum())
            .collect();
        let s = DenseSystem::new(n, a.clone(), b.clone()).unwrap();
        let x = solve_dense(&s).unwrap();
        let err = x.iter().zip(&x_true).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-9 * vector_norm_inf(&x_true), "err {err}");
        let r = residual_inf(&s, &x);
        assert!(r <= 1e-10 * (matrix_norm_inf(n, &a) * vector_norm_inf(&x) + vector_norm_inf(&b)));
    }

    #[test]
    fn blocked_factorisation_with_pivoting() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 131;
        let a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = DenseSystem::new(n, a, b).unwrap();
        let x = solve_dense(&s).unwrap();
        let scale = matrix_norm_inf(n, &s.matrix) * vector_norm_inf(&x);
        assert!(residual_inf(&s, &x) < 1e-12 * scale);
    }

    #[test]
    fn singular_matrix_detected() {
        let s = DenseSystem::new(2, vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(solve_dense(&s), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn size_mismatch() {
        assert!(DenseSystem::new(2, vec![1.0; 3], vec![1.0; 2]).is_err());
        assert!(DenseSystem::new(1, vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn factors_reuse() {
        let a = vec![4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let lu = LuFactors::factor(3, a.clone()).unwrap();
        for b in [[1.0, 2.0, 3.0], [0.0, -1.0, 5.0]] {
            let x = lu.solve(&b).unwrap();
            let s = DenseSystem::new(3, a.clone(), b.to_vec()).unwrap();
            assert!(residual_inf(&s, &x) < 1e-14);
        }
    }
}
