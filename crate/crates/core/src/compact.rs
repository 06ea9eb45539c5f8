//! Fourth-order compact finite-difference operators on a uniform grid.
//!
//! Both operators act on the `M - 1` interior values of a grid function and
//! take the node-0 / node-M data from a [`BoundaryClosure`].
//!
//! Second derivative, interior rows:
//! `f''_{i-1} + 10 f''_i + f''_{i+1} = 12/h^2 (f_{i-1} - 2 f_i + f_{i+1})`,
//! with the edge curvatures `f''_0`, `f''_M` moved to the right-hand side.
//!
//! First derivative, interior rows:
//! `f'_{i-1} + 4 f'_i + f'_{i+1} = 3/h (f_{i+1} - f_{i-1})`, and the
//! one-sided rows
//! `4 f'_1 + f'_2 = (-11/12 f_0 - 4 f_1 + 6 f_2 - 4/3 f_3 + 1/4 f_4) / h`
//! (mirrored with opposite sign at `i = M - 1`).

use crate::error::{PricingError, Result};
use crate::grid::Grid;
use crate::tridiag::TridiagonalFactor;

/// Weights of the fourth-order one-sided second derivative on nodes 0..5,
/// to be divided by `12 h^2`.
pub const ONE_SIDED_SECOND: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];

/// How the curvature `f''` at an edge node is supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeCurvature {
    Known(f64),
    /// Reconstruct from the six nodes nearest the edge.
    OneSided,
}

/// Dirichlet data and edge curvatures for one grid function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryClosure {
    pub left_value: f64,
    pub right_value: f64,
    pub left_second_derivative: EdgeCurvature,
    pub right_second_derivative: EdgeCurvature,
}

impl BoundaryClosure {
    /// Far-field flat closure on the right (`f_M = 0`, `f''_M = 0`).
    pub fn far_field(left_value: f64, left_second_derivative: EdgeCurvature) -> Self {
        Self {
            left_value,
            right_value: 0.0,
            left_second_derivative,
            right_second_derivative: EdgeCurvature::Known(0.0),
        }
    }

    pub fn zero() -> Self {
        Self::far_field(0.0, EdgeCurvature::Known(0.0))
    }
}

/// Pre-factored compact operators for one grid.
#[derive(Debug, Clone)]
pub struct CompactOperators {
    grid: Grid,
    second: TridiagonalFactor,
    first: TridiagonalFactor,
}

impl CompactOperators {
    pub fn new(grid: &Grid) -> Result<Self> {
        let n = grid.interior_len();
        if grid.intervals() < 8 {
            return Err(PricingError::Domain(format!(
                "compact operators need at least 8 intervals, got {}",
                grid.intervals()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            second: TridiagonalFactor::toeplitz(n, 1.0, 10.0, 1.0)?,
            first: TridiagonalFactor::toeplitz(n, 1.0, 4.0, 1.0)?,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Resolves an edge curvature, reconstructing one-sidedly when requested.
    /// `left == true` selects node 0, otherwise node M.
    pub fn edge_curvature(&self, f: &[f64], closure: &BoundaryClosure, left: bool) -> f64 {
        let (spec, edge) = if left {
            (closure.left_second_derivative, closure.left_value)
        } else {
            (closure.right_second_derivative, closure.right_value)
        };
        match spec {
            EdgeCurvature::Known(v) => v,
            EdgeCurvature::OneSided => {
                let h = self.grid.h();
                let n = f.len();
                let node = |j: usize| -> f64 {
                    if j == 0 {
                        edge
                    } else if left {
                        f[j - 1]
                    } else {
                        f[n - j]
                    }
                };
                ONE_SIDED_SECOND
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * node(j))
                    .sum::<f64>()
                    / (12.0 * h * h)
            }
        }
    }

    /// Writes the compact approximation of `f''` at the interior nodes into `out`.
    pub fn second_derivative_into(&self, f: &[f64], closure: &BoundaryClosure, out: &mut [f64]) {
        let n = f.len();
        assert_eq!(n, self.grid.interior_len());
        assert_eq!(out.len(), n);
        let h = self.grid.h();
        let scale = 12.0 / (h * h);
        let left_curv = self.edge_curvature(f, closure, true);
        let right_curv = self.edge_curvature(f, closure, false);
        for i in 0..n {
            let prev = if i == 0 { closure.left_value } else { f[i - 1] };
            let next = if i + 1 == n {
                closure.right_value
            } else {
                f[i + 1]
            };
            out[i] = scale * (prev - 2.0 * f[i] + next);
        }
        out[0] -= left_curv;
        out[n - 1] -= right_curv;
        self.second.solve_in_place(out);
    }

    pub fn second_derivative(&self, f: &[f64], closure: &BoundaryClosure) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.second_derivative_into(f, closure, &mut out);
        out
    }

    /// Writes the compact approximation of `f'` at the interior nodes into `out`.
    pub fn first_derivative_into(&self, f: &[f64], closure: &BoundaryClosure, out: &mut [f64]) {
        let n = f.len();
        assert_eq!(n, self.grid.interior_len());
        assert_eq!(out.len(), n);
        let inv_h = 1.0 / self.grid.h();
        let scale = 3.0 * inv_h;
        out[0] = inv_h
            * (-11.0 / 12.0 * closure.left_value - 4.0 * f[0] + 6.0 * f[1] - 4.0 / 3.0 * f[2]
                + 0.25 * f[3]);
        for i in 1..n - 1 {
            out[i] = scale * (f[i + 1] - f[i - 1]);
        }
        out[n - 1] = inv_h
            * (11.0 / 12.0 * closure.right_value + 4.0 * f[n - 1] - 6.0 * f[n - 2]
                + 4.0 / 3.0 * f[n - 3]
                - 0.25 * f[n - 4]);
        self.first.solve_in_place(out);
    }

    pub fn first_derivative(&self, f: &[f64], closure: &BoundaryClosure) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.first_derivative_into(f, closure, &mut out);
        out
    }
}

/// One-shot second derivative; see [`CompactOperators::second_derivative_into`].
pub fn second_derivative(f: &[f64], closure: &BoundaryClosure, grid: &Grid) -> Result<Vec<f64>> {
    check_len(f, grid)?;
    Ok(CompactOperators::new(grid)?.second_derivative(f, closure))
}

/// One-shot first derivative; see [`CompactOperators::first_derivative_into`].
pub fn first_derivative(f: &[f64], closure: &BoundaryClosure, grid: &Grid) -> Result<Vec<f64>> {
    check_len(f, grid)?;
    Ok(CompactOperators::new(grid)?.first_derivative(f, closure))
}

fn check_len(f: &[f64], grid: &Grid) -> Result<()> {
    if f.len() != grid.interior_len() {
        return Err(PricingError::Domain(format!(
            "expected {} interior values, got {}",
            grid.interior_len(),
            f.len()
        )));
    }
    Ok(())
}
