//! Coupled march of the exercise boundary, option value and Greeks.
//!
//! Each time step first runs the stage cascade of the boundary equation
//! `s_f' = g(s_f, u^n)` with the grid functions frozen at the start of the
//! step, then runs the same tableau on the grid system with Dirichlet data
//! and `xi = v + s_f'/s_f` taken from the matching boundary stage.

use std::time::{Duration, Instant};

use crate::boundary::{
    boundary_velocity, coeffs_for_mode, q_samples_unchecked, BoundaryMode, DiscriminantNegative,
};
use crate::compact::{BoundaryClosure, CompactOperators, EdgeCurvature};
use crate::error::{invalid, PricingError, Result};
use crate::grid::{
    initial_state, to_physical, value_at, Grid, NodeValues, PhysicalProfile, SolverState,
};
use crate::integrators::{
    guard_real_root, max_abs_diff, run_stages, ButcherTableau, StageBuffer, StepController,
    CASH_KARP, CLASSICAL_RK4,
};
use crate::model::{derive_constants, DerivedConstants, MarketParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeScheme {
    /// Adaptive Cash–Karp pair with error tolerance on `u`.
    Rkf { tol: f64 },
    /// Classical RK4 with a fixed step.
    Rk4 { step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// Evolve `u, w, y, z`.
    Full,
    /// Evolve `u` only, with a compact first derivative for the convection term.
    AssetOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub scheme: TimeScheme,
    pub system: SystemKind,
    pub boundary_mode: BoundaryMode,
    /// `xbar = xbar_multiple * h`.
    pub xbar_multiple: usize,
    /// Initial adaptive step; `None` uses `h`.
    pub initial_step: Option<f64>,
    pub guard_shrink: f64,
    pub edge_traces: EdgeTraces,
}

/// Which limits of `U_xx`, `U_xxx` at `x = 0` feed the Dirichlet data and closures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTraces {
    /// Limits from the continuation region `x -> 0+`.
    Continuation,
    /// Limits from the exercise region, `U_xx = U_xxx = -s_f`.
    ExerciseSide,
}

impl SolverConfig {
    pub fn rkf(tol: f64) -> Self {
        Self {
            scheme: TimeScheme::Rkf { tol },
            system: SystemKind::Full,
            boundary_mode: BoundaryMode::Extrapolated,
            xbar_multiple: 2,
            initial_step: None,
            guard_shrink: 0.5,
            edge_traces: EdgeTraces::Continuation,
        }
    }

    pub fn rk4(step: f64) -> Self {
        Self {
            scheme: TimeScheme::Rk4 { step },
            ..Self::rkf(1e-8)
        }
    }

    pub fn with_system(mut self, system: SystemKind) -> Self {
        self.system = system;
        self
    }

    pub fn with_boundary_mode(mut self, mode: BoundaryMode) -> Self {
        self.boundary_mode = mode;
        self
    }
}

/// Time derivatives of the full state.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub du: Vec<f64>,
    pub dw: Vec<f64>,
    pub dy: Vec<f64>,
    pub dz: Vec<f64>,
    pub ds_f: f64,
}

/// Right-hand sides of the semi-discrete system on one grid.
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    params: MarketParams,
    consts: DerivedConstants,
    grid: Grid,
    ops: CompactOperators,
    system: SystemKind,
    mode: BoundaryMode,
    xbar_multiple: usize,
    traces: EdgeTraces,
}

/// Scratch buffers for one right-hand-side evaluation.
#[derive(Debug, Clone, Default)]
pub struct RhsWorkspace {
    d2: [Vec<f64>; 4],
    d1: Vec<f64>,
}

impl RhsWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            d2: std::array::from_fn(|_| vec![0.0; n]),
            d1: vec![0.0; n],
        }
    }
}

impl CoupledSystem {
    pub fn new(params: &MarketParams, grid: &Grid, config: &SolverConfig) -> Result<Self> {
        let consts = derive_constants(params)?;
        if config.xbar_multiple == 0 || 3 * config.xbar_multiple >= grid.intervals() {
            return Err(invalid(
                "xbar_multiple",
                format!(
                    "3 * {} must be below M = {}",
                    config.xbar_multiple,
                    grid.intervals()
                ),
            ));
        }
        Ok(Self {
            params: *params,
            consts,
            grid: grid.clone(),
            ops: CompactOperators::new(grid)?,
            system: config.system,
            mode: config.boundary_mode,
            xbar_multiple: config.xbar_multiple,
            traces: config.edge_traces,
        })
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.consts
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn operators(&self) -> &CompactOperators {
        &self.ops
    }

    pub fn system(&self) -> SystemKind {
        self.system
    }

    /// Number of evolved unknowns.
    pub fn dim(&self) -> usize {
        let n = self.grid.interior_len();
        match self.system {
            SystemKind::Full => 4 * n,
            SystemKind::AssetOnly => n,
        }
    }

    /// `s_f'` from the boundary quadratic with `u` sampled at `xbar, 2 xbar, 3 xbar`.
    pub fn velocity(&self, s_f: f64, u: &[f64]) -> std::result::Result<f64, DiscriminantNegative> {
        let q = q_samples_unchecked(
            u,
            s_f,
            self.params.strike,
            self.grid.h(),
            self.xbar_multiple,
        );
        let coeffs = coeffs_for_mode(self.mode, &q, s_f, &self.params, &self.consts);
        boundary_velocity(s_f, &coeffs)
    }

    /// `xi = v + s_f'/s_f`.
    pub fn xi(&self, s_f: f64, velocity: f64) -> f64 {
        self.consts.v + velocity / s_f
    }

    /// Continuation-side limits of `U, U_x, U_xx, U_xxx` at `x = 0`.
    ///
    /// Value matching and smooth pasting give `U = K - s_f` and `U_x = -s_f`;
    /// the PDE and its `x`-derivative evaluated at `x = 0+` then give
    /// `U_xx = gamma K - s_f` and `U_xxx = -2 gamma K xi / sigma^2 - s_f`.
    pub fn edge_values(&self, s_f: f64, velocity: f64) -> NodeValues {
        let k = self.params.strike;
        let gk = self.consts.gamma_exp * k;
        let xi = self.xi(s_f, velocity);
        let sigma2 = self.params.sigma * self.params.sigma;
        if self.traces == EdgeTraces::ExerciseSide {
            return NodeValues {
                u: k - s_f,
                w: -s_f,
                y: -s_f,
                z: -s_f,
            };
        }
        NodeValues {
            u: k - s_f,
            w: -s_f,
            y: gk - s_f,
            z: -2.0 * gk * xi / sigma2 - s_f,
        }
    }

    /// Grid part of the right-hand side at boundary position `s_f` moving with
    /// `velocity`. `state` is the flattened evolved vector (`[u, w, y, z]` or `u`).
    pub fn grid_rhs(
        &self,
        s_f: f64,
        velocity: f64,
        state: &[f64],
        out: &mut [f64],
        ws: &mut RhsWorkspace,
    ) {
        let n = self.grid.interior_len();
        let half_s2 = 0.5 * self.params.sigma * self.params.sigma;
        let r = self.params.rate;
        let xi = self.xi(s_f, velocity);
        let edge = self.edge_values(s_f, velocity);
        match self.system {
            SystemKind::Full => {
                let (u, rest) = state.split_at(n);
                let (w, rest) = rest.split_at(n);
                let (y, z) = rest.split_at(n);
                // Edge curvatures are reconstructed from the discrete profiles;
                // the analytic limits are far steeper than a young boundary layer
                // the grid can resolve and cost an order of spatial accuracy.
                let closures = [edge.u, edge.w, edge.y, edge.z]
                    .map(|v| BoundaryClosure::far_field(v, EdgeCurvature::OneSided));
                let fields = [u, w, y, z];
                for ((f, c), d2) in fields.iter().zip(&closures).zip(ws.d2.iter_mut()) {
                    self.ops.second_derivative_into(f, c, d2);
                }
                let (du, rest) = out.split_at_mut(n);
                let (dw, rest) = rest.split_at_mut(n);
                let (dy, dz) = rest.split_at_mut(n);
                let [d2u, d2w, d2y, d2z] = &ws.d2;
                for i in 0..n {
                    du[i] = half_s2 * d2u[i] + xi * w[i] - r * u[i];
                    dw[i] = half_s2 * d2w[i] + xi * d2u[i] - r * w[i];
                    dy[i] = half_s2 * d2y[i] + xi * d2w[i] - r * y[i];
                    dz[i] = half_s2 * d2z[i] + xi * d2y[i] - r * z[i];
                }
            }
            SystemKind::AssetOnly => {
                let u = state;
                let closure = BoundaryClosure::far_field(edge.u, EdgeCurvature::OneSided);
                let d2u = &mut ws.d2[0];
                self.ops.second_derivative_into(u, &closure, d2u);
                self.ops.first_derivative_into(u, &closure, &mut ws.d1);
                for i in 0..n {
                    out[i] = half_s2 * d2u[i] + xi * ws.d1[i] - r * u[i];
                }
            }
        }
    }

    /// Full right-hand side `(du, dw, dy, dz, ds_f)` at `state`.
    pub fn rhs_full(
        &self,
        state: &SolverState,
    ) -> std::result::Result<Derivatives, DiscriminantNegative> {
        let n = self.grid.interior_len();
        let vel = self.velocity(state.s_f, &state.u)?;
        let mut flat = Vec::with_capacity(4 * n);
        for f in [&state.u, &state.w, &state.y, &state.z] {
            flat.extend_from_slice(f);
        }
        let full = CoupledSystem {
            system: SystemKind::Full,
            ..self.clone()
        };
        let mut out = vec![0.0; 4 * n];
        full.grid_rhs(state.s_f, vel, &flat, &mut out, &mut RhsWorkspace::new(n));
        Ok(Derivatives {
            du: out[..n].to_vec(),
            dw: out[n..2 * n].to_vec(),
            dy: out[2 * n..3 * n].to_vec(),
            dz: out[3 * n..].to_vec(),
            ds_f: vel,
        })
    }

    /// Asset-only right-hand side `(du, ds_f)` at `state`.
    pub fn rhs_asset_only(
        &self,
        state: &SolverState,
    ) -> std::result::Result<(Vec<f64>, f64), DiscriminantNegative> {
        let n = self.grid.interior_len();
        let vel = self.velocity(state.s_f, &state.u)?;
        let asset = CoupledSystem {
            system: SystemKind::AssetOnly,
            ..self.clone()
        };
        let mut out = vec![0.0; n];
        asset.grid_rhs(
            state.s_f,
            vel,
            &state.u,
            &mut out,
            &mut RhsWorkspace::new(n),
        );
        Ok((out, vel))
    }

    /// Fills the Greeks of an asset-only state from compact derivatives of `u`.
    fn reconstruct_greeks(&self, state: &mut SolverState, edge: NodeValues) {
        let u_closure = BoundaryClosure::far_field(edge.u, EdgeCurvature::OneSided);
        state.w = self.ops.first_derivative(&state.u, &u_closure);
        state.y = self.ops.second_derivative(&state.u, &u_closure);
        let y0 = self.ops.edge_curvature(&state.u, &u_closure, true);
        let y_closure = BoundaryClosure::far_field(y0, EdgeCurvature::OneSided);
        state.z = self.ops.first_derivative(&state.y, &y_closure);
        state.left = NodeValues { y: y0, ..edge };
    }
}

/// One attempted (accepted or rejected) time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// Time at the end of the step (start time plus `k`).
    pub tau: f64,
    pub k: f64,
    pub e_u: f64,
    pub accepted: bool,
    /// Boundary at the end of the step (proposed value when rejected).
    pub s_f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub guard_shrinks: usize,
    /// Largest accepted step.
    pub max_step: f64,
    /// Smallest accepted step, excluding a final step truncated to land on `T`.
    pub min_step: f64,
    /// Largest error estimate among accepted steps.
    pub max_accepted_error: f64,
}

/// Outcome of a full march to `tau = T`.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub params: MarketParams,
    pub grid: Grid,
    pub config: SolverConfig,
    pub trace: Vec<StepRecord>,
    pub final_state: SolverState,
    pub profile: PhysicalProfile,
    pub stats: StepStats,
    /// Accepted steps where `s_f` increased or left `[s_f_inf - 0.5, K]`.
    pub violations: usize,
    pub wall_time: Duration,
}

impl SolveReport {
    /// Accepted `(tau, k, s_f)` points.
    pub fn boundary_series(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.trace
            .iter()
            .filter(|r| r.accepted)
            .map(|r| (r.tau, r.k, r.s_f))
    }

    pub fn boundary(&self) -> f64 {
        self.final_state.s_f
    }

    /// Option value at `spot` at `tau = T`.
    pub fn value_at(&self, spot: f64) -> Result<f64> {
        value_at(&self.final_state, &self.params, &self.grid, spot)
    }
}

struct BoundaryStages {
    s: Vec<f64>,
    velocity: Vec<f64>,
    propagated: f64,
}

/// Stage cascade of the boundary ODE with `u` frozen.
fn boundary_cascade(
    sys: &CoupledSystem,
    tableau: &ButcherTableau,
    s0: f64,
    u_frozen: &[f64],
    k: f64,
    buffer: &mut StageBuffer,
) -> std::result::Result<BoundaryStages, DiscriminantNegative> {
    let mut s = Vec::with_capacity(tableau.stages());
    let mut velocity = Vec::with_capacity(tableau.stages());
    run_stages(tableau, &[s0], k, buffer, |_, stage, out| {
        let v = sys.velocity(stage[0], u_frozen)?;
        if !v.is_finite() {
            return Err(DiscriminantNegative {
                discriminant: f64::NAN,
            });
        }
        s.push(stage[0]);
        velocity.push(v);
        out[0] = v;
        Ok(())
    })?;
    let mut out = [0.0];
    buffer.combine(&[s0], tableau.weights, &mut out);
    Ok(BoundaryStages {
        s,
        velocity,
        propagated: out[0],
    })
}

/// Marches from `tau = 0` to `tau = T`.
pub fn march(params: &MarketParams, grid: &Grid, config: &SolverConfig) -> Result<SolveReport> {
    let start = Instant::now();
    let sys = CoupledSystem::new(params, grid, config)?;
    let n = grid.interior_len();
    let horizon = params.expiry;

    let (tableau, mut controller) = match config.scheme {
        TimeScheme::Rkf { tol } => {
            let k0 = config.initial_step.unwrap_or(grid.h());
            (CASH_KARP, StepController::new(tol, k0, horizon)?)
        }
        TimeScheme::Rk4 { step } => {
            if !(step > 0.0) {
                return Err(invalid("k", format!("must be > 0, got {step}")));
            }
            let mut c = StepController::new(f64::INFINITY, step, horizon)?;
            c.k_max = step.max(c.k_max);
            c.k = step;
            (CLASSICAL_RK4, c)
        }
    };
    controller = controller.with_guard_shrink(config.guard_shrink)?;
    let fixed_step = match config.scheme {
        TimeScheme::Rk4 { step } => Some(step),
        TimeScheme::Rkf { .. } => None,
    };

    let mut state = initial_state(params, grid);
    let mut y: Vec<f64> = match config.system {
        SystemKind::Full => [&state.u, &state.w, &state.y, &state.z]
            .iter()
            .flat_map(|v| v.iter().copied())
            .collect(),
        SystemKind::AssetOnly => state.u.clone(),
    };
    let mut y_new = vec![0.0; y.len()];
    let mut y_emb = vec![0.0; y.len()];
    let mut s_buffer = StageBuffer::new();
    let mut g_buffer = StageBuffer::new();
    let mut ws = RhsWorkspace::new(n);

    let mut trace = Vec::new();
    let mut stats = StepStats {
        min_step: f64::INFINITY,
        ..StepStats::default()
    };
    let mut violations = 0usize;
    let mut t = 0.0f64;
    let mut last_velocity = 0.0;
    let end_eps = 1e-14 * horizon;

    while horizon - t > end_eps {
        let mut k = controller.k;
        let mut truncated = false;
        if t + k >= horizon {
            k = horizon - t;
            truncated = true;
        }
        let s0 = state.s_f;
        let u_frozen = &y[..n];
        let (k_used, stages) = guard_real_root(&mut controller, k, t, |k| {
            boundary_cascade(&sys, &tableau, s0, u_frozen, k, &mut s_buffer)
        })?;
        if k_used < k {
            truncated = false;
        }

        run_stages(&tableau, &y, k_used, &mut g_buffer, |j, stage, out| {
            sys.grid_rhs(stages.s[j], stages.velocity[j], stage, out, &mut ws);
            Ok::<(), std::convert::Infallible>(())
        })
        .unwrap_or_else(|never| match never {});
        g_buffer.combine(&y, tableau.weights, &mut y_new);
        let e_u = match tableau.embedded {
            Some(emb) => {
                g_buffer.combine(&y, emb, &mut y_emb);
                max_abs_diff(&y_new[..n], &y_emb[..n])
            }
            None => 0.0,
        };

        let accepted = match fixed_step {
            Some(step) => {
                controller.accepted += 1;
                controller.k = step;
                true
            }
            None => {
                // the controller adapts from the step actually attempted
                controller.k = k_used;
                controller.adapt(e_u).0
            }
        };

        let s_new = stages.propagated;
        let t_end = if truncated { horizon } else { t + k_used };
        trace.push(StepRecord {
            tau: t_end,
            k: k_used,
            e_u,
            accepted,
            s_f: s_new,
        });
        if !accepted {
            continue;
        }

        if !s_new.is_finite() {
            return Err(PricingError::NonFinite {
                field: "s_f",
                tau: t_end,
            });
        }
        if let Some(pos) = y_new.iter().position(|v| !v.is_finite()) {
            let field = match (config.system, pos / n) {
                (SystemKind::AssetOnly, _) | (_, 0) => "u",
                (_, 1) => "w",
                (_, 2) => "y",
                _ => "z",
            };
            return Err(PricingError::NonFinite { field, tau: t_end });
        }
        if s_new > s0 * (1.0 + 1e-12) || s_new > params.strike || s_new < sys.consts.s_f_inf - 0.5 {
            violations += 1;
        }

        std::mem::swap(&mut y, &mut y_new);
        t = t_end;
        state.s_f = s_new;
        state.tau = t;
        last_velocity = sys
            .velocity(s_new, &y[..n])
            .unwrap_or(*stages.velocity.last().unwrap_or(&last_velocity));

        stats.max_step = stats.max_step.max(k_used);
        if !truncated {
            stats.min_step = stats.min_step.min(k_used);
        }
        stats.max_accepted_error = stats.max_accepted_error.max(e_u);
    }

    if !stats.min_step.is_finite() {
        stats.min_step = stats.max_step;
    }
    stats.accepted = controller.accepted;
    stats.rejected = controller.rejected;
    stats.guard_shrinks = controller.guard_shrinks;

    state.tau = horizon;
    let edge = sys.edge_values(state.s_f, last_velocity);
    match config.system {
        SystemKind::Full => {
            state.u = y[..n].to_vec();
            state.w = y[n..2 * n].to_vec();
            state.y = y[2 * n..3 * n].to_vec();
            state.z = y[3 * n..].to_vec();
            state.left = edge;
        }
        SystemKind::AssetOnly => {
            state.u = y;
            sys.reconstruct_greeks(&mut state, edge);
        }
    }
    let profile = to_physical(&state, params, grid);
    Ok(SolveReport {
        params: *params,
        grid: grid.clone(),
        config: config.clone(),
        trace,
        final_state: state,
        profile,
        stats,
        violations,
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn system(h: f64, kind: SystemKind) -> CoupledSystem {
        let grid = Grid::new(3.0, h).unwrap();
        let config = SolverConfig::rkf(1e-6).with_system(kind);
        CoupledSystem::new(&MarketParams::example2(), &grid, &config).unwrap()
    }

    fn solve(h: f64, tol: f64, kind: SystemKind) -> SolveReport {
        let grid = Grid::new(3.0, h).unwrap();
        march(
            &MarketParams::example2(),
            &grid,
            &SolverConfig::rkf(tol).with_system(kind),
        )
        .unwrap()
    }

    #[test]
    fn initial_state_rhs_vanishes_at_far_end() {
        let sys = system(0.05, SystemKind::Full);
        let grid = sys.grid().clone();
        let state = initial_state(sys.params(), &grid);
        let d = sys.rhs_full(&state).unwrap();
        assert!(d.ds_f < 0.0);
        let last = grid.interior_len() - 1;
        for v in [d.du[last], d.dw[last], d.dy[last], d.dz[last]] {
            assert!(v.abs() < 1e-12, "far-end rhs {v}");
        }
    }

    #[test]
    fn rejects_oversized_sampling_distance() {
        let grid = Grid::new(0.8, 0.1).unwrap();
        let config = SolverConfig {
            xbar_multiple: 3,
            ..SolverConfig::rkf(1e-6)
        };
        assert!(CoupledSystem::new(&MarketParams::example2(), &grid, &config).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn grid_rhs_is_affine_at_frozen_boundary(
            seed in prop::collection::vec(-1.0f64..1.0, 8),
            alpha in -2.0f64..2.0,
            asset in any::<bool>(),
        ) {
            let kind = if asset { SystemKind::AssetOnly } else { SystemKind::Full };
            let sys = system(0.1, kind);
            let dim = sys.dim();
            let a: Vec<f64> = (0..dim).map(|i| seed[i % 4] * ((i as f64) * 0.1 + seed[4]).sin()).collect();
            let b: Vec<f64> = (0..dim).map(|i| seed[5 + i % 3] * ((i as f64) * 0.07).cos()).collect();
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect();
            let mut ws = RhsWorkspace::new(sys.grid().interior_len());
            let (mut fa, mut fb, mut fm) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
            let (s_f, vel) = (90.0, -3.0);
            sys.grid_rhs(s_f, vel, &a, &mut fa, &mut ws);
            sys.grid_rhs(s_f, vel, &b, &mut fb, &mut ws);
            sys.grid_rhs(s_f, vel, &mix, &mut fm, &mut ws);
            for i in 0..dim {
                let expect = alpha * fa[i] + (1.0 - alpha) * fb[i];
                prop_assert!((fm[i] - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
            }
        }
    }

    #[test]
    fn short_horizon_moves_boundary_below_strike() {
        let params = MarketParams::new(100.0, 1e-3, 0.05, 0.2).unwrap();
        let grid = Grid::new(3.0, 0.05).unwrap();
        let report = march(&params, &grid, &SolverConfig::rkf(1e-6)).unwrap();
        let s_inf = derive_constants(&params).unwrap().s_f_inf;
        assert!(report.boundary() < params.strike);
        assert!(report.boundary() > s_inf);
        assert_eq!(report.violations, 0);
        assert_eq!(report.final_state.tau, params.expiry);
    }

    #[test]
    fn adaptive_start_engages_root_guard() {
        let report = solve(0.01, 1e-6, SystemKind::Full);
        assert!(report.stats.guard_shrinks >= 1);
        assert!(report.stats.max_accepted_error < 1e-6);
    }

    #[test]
    fn evolved_and_reconstructed_systems_agree() {
        let full = solve(0.0125, 1e-7, SystemKind::Full);
        let asset = solve(0.0125, 1e-7, SystemKind::AssetOnly);
        let gap = (full.value_at(100.0).unwrap() - asset.value_at(100.0).unwrap()).abs();
        assert!(gap < 2e-3, "V(100) gap {gap}");
        let w_gap = full
            .final_state
            .w
            .iter()
            .zip(&asset.final_state.w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        // W is O(s_f) next to the boundary
        assert!(w_gap < 1e-3 * full.boundary(), "max W gap {w_gap}");
    }

    #[test]
    fn value_and_boundary_are_monotone() {
        for kind in [SystemKind::Full, SystemKind::AssetOnly] {
            let report = solve(0.05, 1e-6, kind);
            let u = report.final_state.full_u();
            assert!(u.windows(2).all(|p| p[1] <= p[0] + 1e-9));
            let series: Vec<f64> = report.boundary_series().map(|(_, _, s)| s).collect();
            assert!(series.windows(2).all(|p| p[1] <= p[0]));
            assert!(report.profile.delta.iter().all(|d| *d <= 1e-9));
            let sys = system(0.05, kind);
            let vel = sys
                .velocity(report.boundary(), &report.final_state.u)
                .unwrap();
            assert!(vel <= 0.0);
        }
    }

    #[test]
    fn fixed_step_march_takes_uniform_steps() {
        let grid = Grid::new(3.0, 0.1).unwrap();
        let report = march(&MarketParams::example2(), &grid, &SolverConfig::rk4(1e-3)).unwrap();
        assert_eq!(report.stats.rejected, 0);
        assert_eq!(report.stats.accepted, 500);
        assert!(report.trace.iter().all(|r| (r.k - 1e-3).abs() < 1e-15));
    }
}
