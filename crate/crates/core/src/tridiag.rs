//! Thomas elimination for tridiagonal systems.

use crate::error::{PricingError, Result};

/// A tridiagonal system `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
///
/// `sub[0]` and `sup[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    /// Constant-coefficient (Toeplitz) system.
    pub fn toeplitz(n: usize, sub: f64, diag: f64, sup: f64, rhs: Vec<f64>) -> Self {
        Self {
            sub: vec![sub; n],
            diag: vec![diag; n],
            sup: vec![sup; n],
            rhs,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn max_coefficient(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let s = if i > 0 { self.sub[i].abs() } else { 0.0 };
                let u = if i + 1 < n { self.sup[i].abs() } else { 0.0 };
                s.max(u).max(self.diag[i].abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Solves the system without pivoting.
pub fn solve_tridiagonal(system: &TridiagonalSystem) -> Result<Vec<f64>> {
    let n = system.len();
    if n == 0 {
        return Err(PricingError::Domain("empty tridiagonal system".into()));
    }
    if system.sub.len() != n || system.sup.len() != n || system.rhs.len() != n {
        return Err(PricingError::Domain(
            "tridiagonal bands and rhs must share one length".into(),
        ));
    }
    let factor = TridiagonalFactor::new(&system.sub, &system.diag, &system.sup)?;
    let mut x = system.rhs.clone();
    factor.solve_in_place(&mut x);
    Ok(x)
}

/// LU factors of a tridiagonal matrix, reused across many right-hand sides.
#[derive(Debug, Clone)]
pub struct TridiagonalFactor {
    sub: Vec<f64>,
    // normalized super-diagonal c'_i
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl TridiagonalFactor {
    pub fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<Self> {
        let n = diag.len();
        let scale = {
            let sys = TridiagonalSystem {
                sub: sub.to_vec(),
                diag: diag.to_vec(),
                sup: sup.to_vec(),
                rhs: Vec::new(),
            };
            sys.max_coefficient()
        };
        let threshold = 1e-14 * scale;
        let mut upper = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_upper = 0.0;
        for i in 0..n {
            let coupling = if i > 0 { sub[i] } else { 0.0 };
            let pivot = diag[i] - coupling * prev_upper;
            if !(pivot.abs() >= threshold) || pivot == 0.0 {
                return Err(PricingError::SingularSystem { row: i, pivot });
            }
            inv_pivot[i] = 1.0 / pivot;
            upper[i] = if i + 1 < n {
                sup[i] * inv_pivot[i]
            } else {
                0.0
            };
            prev_upper = upper[i];
        }
        Ok(Self {
            sub: sub.to_vec(),
            upper,
            inv_pivot,
        })
    }

    pub fn toeplitz(n: usize, sub: f64, diag: f64, sup: f64) -> Result<Self> {
        Self::new(&vec![sub; n], &vec![diag; n], &vec![sup; n])
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        assert_eq!(rhs.len(), n, "rhs length does not match factored system");
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.sub[i] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper[i] * rhs[i + 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense Gaussian elimination with partial pivoting.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let p = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, p);
            b.swap(col, p);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                let pivot_row = a[col].clone();
                for (target, p) in a[row].iter_mut().zip(&pivot_row).skip(col) {
                    *target -= f * p;
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }

    #[test]
    fn identity_returns_rhs() {
        let rhs = vec![3.0, -1.5, 2.25, 7.0];
        let sys = TridiagonalSystem::toeplitz(4, 0.0, 1.0, 0.0, rhs.clone());
        assert_eq!(solve_tridiagonal(&sys).unwrap(), rhs);
    }

    #[test]
    fn compact_matrix_with_row_sum_rhs() {
        // B (1,10,1) applied to ones; interior rows sum to 12, end rows to 11.
        let sys = TridiagonalSystem::toeplitz(3, 1.0, 10.0, 1.0, vec![11.0, 12.0, 11.0]);
        for x in solve_tridiagonal(&sys).unwrap() {
            assert!((x - 1.0).abs() < 1e-15);
        }
        // Row sums (12,12,12) including the couplings that leave the 3x3 block.
        let mut sys = TridiagonalSystem::toeplitz(3, 1.0, 10.0, 1.0, vec![12.0; 3]);
        sys.rhs[0] -= 1.0;
        sys.rhs[2] -= 1.0;
        for x in solve_tridiagonal(&sys).unwrap() {
            assert!((x - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = 6;
            let sub: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sup: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let diag: Vec<f64> = (0..n)
                .map(|_| 2.5 + rng.gen_range(0.0..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                .collect();
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                dense[i][i] = diag[i];
                if i > 0 {
                    dense[i][i - 1] = sub[i];
                }
                if i + 1 < n {
                    dense[i][i + 1] = sup[i];
                }
            }
            let expected = dense_solve(dense, rhs.clone());
            let got = solve_tridiagonal(&TridiagonalSystem {
                sub,
                diag,
                sup,
                rhs,
            })
            .unwrap();
            let diff = expected
                .iter()
                .zip(&got)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-12, "diff {diff}");
        }
    }

    #[test]
    fn singular_pivot_is_reported() {
        let sys = TridiagonalSystem::toeplitz(2, 1.0, 1.0, 1.0, vec![1.0, 1.0]);
        assert!(matches!(
            solve_tridiagonal(&sys),
            Err(PricingError::SingularSystem { row: 1, .. })
        ));
        let sys = TridiagonalSystem::toeplitz(3, 0.0, 0.0, 0.0, vec![1.0; 3]);
        assert!(solve_tridiagonal(&sys).is_err());
    }

    #[test]
    fn single_unknown() {
        let sys = TridiagonalSystem::toeplitz(1, 0.0, 4.0, 0.0, vec![2.0]);
        assert_eq!(solve_tridiagonal(&sys).unwrap(), vec![0.5]);
    }
}
