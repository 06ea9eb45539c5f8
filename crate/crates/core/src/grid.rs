//! Uniform log-moneyness grid, solver state, and the map back to asset prices.
//!
//! The free boundary is fixed at `x = 0` through `x = ln(S / s_f(tau))`;
//! grid functions are stored on the interior nodes `i = 1..M-1` only.

use crate::error::{invalid, PricingError, Result};
use crate::model::MarketParams;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    x_max: f64,
    intervals: usize,
    h: f64,
}

impl Grid {
    /// Grid on `[0, x_max]` with spacing `h`; `x_max / h` must be an integer.
    pub fn new(x_max: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(invalid("h", format!("must be > 0, got {h}")));
        }
        if !(x_max > 0.0) || !x_max.is_finite() {
            return Err(invalid("x_max", format!("must be > 0, got {x_max}")));
        }
        let ratio = x_max / h;
        let intervals = ratio.round();
        if (ratio - intervals).abs() > 1e-8 * ratio.max(1.0) {
            return Err(invalid(
                "h",
                format!("x_max = {x_max} is not an integer multiple of h = {h}"),
            ));
        }
        Self::with_intervals(x_max, intervals as usize)
    }

    pub fn with_intervals(x_max: f64, intervals: usize) -> Result<Self> {
        if intervals < 8 {
            return Err(invalid(
                "M",
                format!("need at least 8 intervals, got {intervals}"),
            ));
        }
        if !(x_max > 0.0) || !x_max.is_finite() {
            return Err(invalid("x_max", format!("must be > 0, got {x_max}")));
        }
        Ok(Self {
            x_max,
            intervals,
            h: x_max / intervals as f64,
        })
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `M`, the number of intervals.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// `M - 1`.
    pub fn interior_len(&self) -> usize {
        self.intervals - 1
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    /// All `M + 1` nodes, `x_0 = 0` through `x_M = x_max`.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.intervals).map(move |i| self.node(i))
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (1..self.intervals).map(move |i| self.node(i))
    }
}

/// The four transformed grid functions at one node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeValues {
    pub u: f64,
    pub w: f64,
    pub y: f64,
    pub z: f64,
}

/// Boundary position and the grid functions `U`, `W = U_x`, `Y = U_xx`, `Z = U_xxx`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub tau: f64,
    pub s_f: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Values at `x = 0` (continuation-side limits) matching `s_f`.
    pub left: NodeValues,
}

impl SolverState {
    /// Values at node `i` in `0..=M`; the far edge is identically zero.
    pub fn node_values(&self, i: usize) -> NodeValues {
        let n = self.u.len();
        if i == 0 {
            self.left
        } else if i > n {
            NodeValues::default()
        } else {
            NodeValues {
                u: self.u[i - 1],
                w: self.w[i - 1],
                y: self.y[i - 1],
                z: self.z[i - 1],
            }
        }
    }

    /// `U` on all nodes including both edges.
    pub fn full_u(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.u.len() + 2);
        out.push(self.left.u);
        out.extend_from_slice(&self.u);
        out.push(0.0);
        out
    }
}

/// `ln(S / s_f)`.
pub fn to_log_coord(spot: f64, s_f: f64) -> Result<f64> {
    if !(spot > 0.0) || !(s_f > 0.0) {
        return Err(PricingError::Domain(format!(
            "log coordinate needs S > 0 and s_f > 0, got S = {spot}, s_f = {s_f}"
        )));
    }
    Ok((spot / s_f).ln())
}

/// State at `tau = 0`: boundary at the strike, zero value and Greeks for `x > 0`.
pub fn initial_state(params: &MarketParams, grid: &Grid) -> SolverState {
    let n = grid.interior_len();
    let k = params.strike;
    SolverState {
        tau: 0.0,
        s_f: k,
        u: vec![0.0; n],
        w: vec![0.0; n],
        y: vec![0.0; n],
        z: vec![0.0; n],
        left: NodeValues {
            u: 0.0,
            w: -k,
            y: -k,
            z: -k,
        },
    }
}

/// Value and S-Greeks at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalProfile {
    pub x: Vec<f64>,
    pub spot: Vec<f64>,
    pub value: Vec<f64>,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub speed: Vec<f64>,
}

impl PhysicalProfile {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Chain rule through `S = s_f e^x`:
/// `V_S = W/S`, `V_SS = (Y - W)/S^2`, `V_SSS = (Z - 3Y + 2W)/S^3`.
pub fn to_physical(state: &SolverState, _params: &MarketParams, grid: &Grid) -> PhysicalProfile {
    let m = grid.intervals();
    let mut p = PhysicalProfile {
        x: Vec::with_capacity(m + 1),
        spot: Vec::with_capacity(m + 1),
        value: Vec::with_capacity(m + 1),
        delta: Vec::with_capacity(m + 1),
        gamma: Vec::with_capacity(m + 1),
        speed: Vec::with_capacity(m + 1),
    };
    for i in 0..=m {
        let x = grid.node(i);
        let s = state.s_f * x.exp();
        let NodeValues { u, w, y, z } = state.node_values(i);
        p.x.push(x);
        p.spot.push(s);
        p.value.push(u);
        p.delta.push(w / s);
        p.gamma.push((y - w) / (s * s));
        p.speed.push((z - 3.0 * y + 2.0 * w) / (s * s * s));
    }
    p
}

/// Option value at an arbitrary spot: intrinsic value inside the exercise
/// region, six-point Lagrange interpolation in `x` on the continuation side.
pub fn value_at(state: &SolverState, params: &MarketParams, grid: &Grid, spot: f64) -> Result<f64> {
    let x = to_log_coord(spot, state.s_f)?;
    if x <= 0.0 {
        return Ok(params.strike - spot);
    }
    if x >= grid.x_max() {
        return Ok(0.0);
    }
    let u = state.full_u();
    Ok(lagrange(&u, grid.h(), x, 6))
}

/// Interpolates equally spaced samples `f[i] = f(i h)` at `x` with `points` nodes.
pub(crate) fn lagrange(f: &[f64], h: f64, x: f64, points: usize) -> f64 {
    let last = f.len() - 1;
    let pos = x / h;
    let half = (points as isize - 1) / 2;
    let start = (pos.floor() as isize - half).clamp(0, (last + 1 - points) as isize) as usize;
    let mut acc = 0.0;
    for (j, fj) in f.iter().enumerate().skip(start).take(points) {
        let mut basis = 1.0;
        for l in start..start + points {
            if l != j {
                basis *= (pos - l as f64) / (j as f64 - l as f64);
            }
        }
        acc += basis * fj;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn grid_spacing_and_validation() {
        let g = Grid::new(3.0, 0.01).unwrap();
        assert_eq!(g.intervals(), 300);
        assert_eq!(g.interior_len(), 299);
        assert_abs_diff_eq!(g.h() * 300.0, 3.0, epsilon = 1e-12);
        assert!(Grid::new(3.0, 0.7).is_err());
        assert!(Grid::new(0.5, 0.1).is_err());
        assert!(Grid::new(3.0, -0.1).is_err());
    }

    #[test]
    fn log_coordinate_examples() {
        assert_eq!(to_log_coord(80.0, 80.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            to_log_coord(80.0 * std::f64::consts::E, 80.0).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            to_log_coord(100.0, 76.16).unwrap(),
            0.272334,
            epsilon = 1e-6
        );
        assert!(to_log_coord(0.0, 76.0).is_err());
        assert!(to_log_coord(10.0, -1.0).is_err());
    }

    #[test]
    fn initial_state_is_payoff() {
        let params = MarketParams::example1();
        let grid = Grid::new(3.0, 0.1).unwrap();
        let s = initial_state(&params, &grid);
        assert_eq!(s.s_f, params.strike);
        assert_eq!(s.tau, 0.0);
        assert!(s
            .u
            .iter()
            .chain(&s.w)
            .chain(&s.y)
            .chain(&s.z)
            .all(|v| *v == 0.0));
        assert_eq!(s.left.u, 0.0);
        assert_eq!(s.u.len(), grid.interior_len());
    }

    #[test]
    fn physical_edge_recovers_pasting() {
        let params = MarketParams::example2();
        let grid = Grid::new(3.0, 0.1).unwrap();
        let mut s = initial_state(&params, &grid);
        s.s_f = 85.0;
        s.left = NodeValues {
            u: params.strike - 85.0,
            w: -85.0,
            y: 40.0,
            z: -300.0,
        };
        let p = to_physical(&s, &params, &grid);
        assert_abs_diff_eq!(p.delta[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.value[0], params.strike - 85.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.spot[0], 85.0, epsilon = 1e-12);
        assert_eq!(p.len(), grid.intervals() + 1);
    }

    #[test]
    fn chain_rule_matches_finite_differences() {
        // U(x) = e^{-x}: V(S) = s_f / S.
        let params = MarketParams::example1();
        let grid = Grid::new(3.0, 0.05).unwrap();
        let s_f = 80.0;
        let mut s = initial_state(&params, &grid);
        s.s_f = s_f;
        let ux = |x: f64| (-x).exp();
        s.u = grid.interior_nodes().map(ux).collect();
        s.w = grid.interior_nodes().map(|x| -ux(x)).collect();
        s.y = grid.interior_nodes().map(ux).collect();
        s.z = grid.interior_nodes().map(|x| -ux(x)).collect();
        s.left = NodeValues {
            u: 1.0,
            w: -1.0,
            y: 1.0,
            z: -1.0,
        };
        let p = to_physical(&s, &params, &grid);
        let v = |spot: f64| ux((spot / s_f).ln());
        for i in 1..grid.intervals() {
            let spot = p.spot[i];
            let d = 1e-3 * spot;
            let fd1 = (v(spot + d) - v(spot - d)) / (2.0 * d);
            let fd2 = (v(spot + d) - 2.0 * v(spot) + v(spot - d)) / (d * d);
            let fd3 = (v(spot + 2.0 * d) - 2.0 * v(spot + d) + 2.0 * v(spot - d)
                - v(spot - 2.0 * d))
                / (2.0 * d * d * d);
            assert!((p.delta[i] - fd1).abs() <= 1e-5 * fd1.abs().max(1e-8));
            assert!((p.gamma[i] - fd2).abs() <= 1e-5 * fd2.abs().max(1e-8));
            assert!((p.speed[i] - fd3).abs() <= 1e-4 * fd3.abs().max(1e-8));
        }
    }

    #[test]
    fn interpolation_is_exact_on_quintics() {
        let h = 0.1;
        let f: Vec<f64> = (0..20)
            .map(|i| (i as f64 * h).powi(5) - (i as f64 * h))
            .collect();
        for &x in &[0.03, 0.55, 1.234, 1.88] {
            assert_abs_diff_eq!(lagrange(&f, h, x, 6), x.powi(5) - x, epsilon = 1e-12);
        }
    }

    #[test]
    fn value_in_exercise_region_is_intrinsic() {
        let params = MarketParams::example2();
        let grid = Grid::new(3.0, 0.1).unwrap();
        let mut s = initial_state(&params, &grid);
        s.s_f = 84.0;
        assert_eq!(value_at(&s, &params, &grid, 80.0).unwrap(), 20.0);
    }

    proptest! {
        #[test]
        fn log_round_trip(x in -5.0..5.0f64, s_f in 1.0..200.0f64) {
            let back = to_log_coord(s_f * x.exp(), s_f).unwrap();
            prop_assert!((back - x).abs() < 1e-12);
        }
    }
}
