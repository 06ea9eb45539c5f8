//! Explicit Runge–Kutta steppers: the Cash–Karp embedded pair, classical RK4,
//! the step-size controller and the real-root step guard.

use crate::boundary::DiscriminantNegative;
use crate::error::{PricingError, Result};

/// Explicit Butcher tableau with an optional embedded weight row.
#[derive(Debug, Clone, Copy)]
pub struct ButcherTableau {
    pub nodes: &'static [f64],
    /// Row `j` holds the `j` coefficients `a_{j,0..j}`.
    pub coupling: &'static [&'static [f64]],
    pub weights: &'static [f64],
    pub embedded: Option<&'static [f64]>,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.weights.len()
    }

    /// Weight rows sum to one and each coupling row sums to its node.
    pub fn is_consistent(&self, tol: f64) -> bool {
        let sum = |r: &[f64]| r.iter().sum::<f64>();
        let weights_ok = (sum(self.weights) - 1.0).abs() <= tol
            && self.embedded.is_none_or(|e| (sum(e) - 1.0).abs() <= tol);
        let rows_ok = self
            .coupling
            .iter()
            .zip(self.nodes)
            .all(|(row, c)| (sum(row) - c).abs() <= tol);
        weights_ok && rows_ok && self.coupling.len() == self.stages()
    }
}

/// Cash–Karp six-stage pair. `weights` is the propagated row
/// `(37/378, 0, 250/621, 125/594, 0, 512/1771)`; `embedded` the companion row.
pub const CASH_KARP: ButcherTableau = ButcherTableau {
    nodes: &[0.0, 1.0 / 5.0, 3.0 / 10.0, 3.0 / 5.0, 1.0, 7.0 / 8.0],
    coupling: &[
        &[],
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0],
        &[-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0],
        &[
            1631.0 / 55296.0,
            175.0 / 512.0,
            575.0 / 13824.0,
            44275.0 / 110592.0,
            253.0 / 4096.0,
        ],
    ],
    weights: &[
        37.0 / 378.0,
        0.0,
        250.0 / 621.0,
        125.0 / 594.0,
        0.0,
        512.0 / 1771.0,
    ],
    embedded: Some(&[
        2825.0 / 27648.0,
        0.0,
        18575.0 / 48384.0,
        13525.0 / 55296.0,
        277.0 / 14336.0,
        1.0 / 4.0,
    ]),
};

pub const CLASSICAL_RK4: ButcherTableau = ButcherTableau {
    nodes: &[0.0, 0.5, 0.5, 1.0],
    coupling: &[&[], &[0.5], &[0.0, 0.5], &[0.0, 0.0, 1.0]],
    weights: &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
    embedded: None,
};

/// Stage increments `L_j = k f(stage_j)` of one step.
#[derive(Debug, Clone, Default)]
pub struct StageBuffer {
    increments: Vec<Vec<f64>>,
    stage: Vec<f64>,
}

impl StageBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    fn reset(&mut self, stages: usize, dim: usize) {
        self.increments.resize_with(stages, Vec::new);
        for inc in &mut self.increments {
            inc.resize(dim, 0.0);
        }
        self.stage.resize(dim, 0.0);
    }

    pub fn increments(&self) -> &[Vec<f64>] {
        &self.increments
    }

    /// `y0 + sum_j weights[j] L_j` written to `out`.
    pub fn combine(&self, y0: &[f64], weights: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y0);
        for (w, inc) in weights.iter().zip(&self.increments) {
            if *w != 0.0 {
                for (o, l) in out.iter_mut().zip(inc) {
                    *o += w * l;
                }
            }
        }
    }
}

/// Evaluates all stages of `tableau` from `y0`. `rhs(j, stage_value, out)`
/// receives the stage index so that callers can attach stage-dependent data.
pub fn run_stages<E, F>(
    tableau: &ButcherTableau,
    y0: &[f64],
    k: f64,
    buffer: &mut StageBuffer,
    mut rhs: F,
) -> std::result::Result<(), E>
where
    F: FnMut(usize, &[f64], &mut [f64]) -> std::result::Result<(), E>,
{
    let dim = y0.len();
    buffer.reset(tableau.stages(), dim);
    for j in 0..tableau.stages() {
        let (done, rest) = buffer.increments.split_at_mut(j);
        let stage = &mut buffer.stage;
        stage.copy_from_slice(y0);
        for (a, inc) in tableau.coupling[j].iter().zip(done.iter()) {
            if *a != 0.0 {
                for (s, l) in stage.iter_mut().zip(inc) {
                    *s += a * l;
                }
            }
        }
        let out = &mut rest[0];
        rhs(j, stage, out)?;
        for o in out.iter_mut() {
            *o *= k;
        }
    }
    Ok(())
}

/// Result of one embedded-pair step.
#[derive(Debug, Clone, PartialEq)]
pub struct RkfOutcome {
    pub propagated: Vec<f64>,
    pub embedded: Vec<f64>,
}

impl RkfOutcome {
    /// Max-norm of the difference of the two solutions over `range`.
    pub fn error_over(&self, range: std::ops::Range<usize>) -> f64 {
        max_abs_diff(&self.propagated[range.clone()], &self.embedded[range])
    }

    pub fn error(&self) -> f64 {
        self.error_over(0..self.propagated.len())
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// One Cash–Karp step of `y' = f(t, y)`.
pub fn rkf_step<E, F>(y0: &[f64], t: f64, k: f64, mut f: F) -> std::result::Result<RkfOutcome, E>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> std::result::Result<(), E>,
{
    let tab = CASH_KARP;
    let mut buf = StageBuffer::new();
    run_stages(&tab, y0, k, &mut buf, |j, y, out| {
        f(t + tab.nodes[j] * k, y, out)
    })?;
    let mut propagated = vec![0.0; y0.len()];
    let mut embedded = vec![0.0; y0.len()];
    buf.combine(y0, tab.weights, &mut propagated);
    buf.combine(y0, tab.embedded.unwrap_or(tab.weights), &mut embedded);
    Ok(RkfOutcome {
        propagated,
        embedded,
    })
}

/// One classical RK4 step of `y' = f(t, y)`.
pub fn rk4_step<E, F>(y0: &[f64], t: f64, k: f64, mut f: F) -> std::result::Result<Vec<f64>, E>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> std::result::Result<(), E>,
{
    let tab = CLASSICAL_RK4;
    let mut buf = StageBuffer::new();
    run_stages(&tab, y0, k, &mut buf, |j, y, out| {
        f(t + tab.nodes[j] * k, y, out)
    })?;
    let mut out = vec![0.0; y0.len()];
    buf.combine(y0, tab.weights, &mut out);
    Ok(out)
}

/// Error-driven step-size controller with guard bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct StepController {
    pub tol: f64,
    pub k: f64,
    pub safety: f64,
    /// Factor applied by the real-root guard, in `[0.1, 0.5]`.
    pub guard_shrink: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub max_growth: f64,
    pub max_shrink: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub guard_shrinks: usize,
}

impl StepController {
    /// Defaults for a march over `[0, horizon]`: `k_max = horizon/10`,
    /// `k_min = 1e-12 horizon`, growth at most 5x and shrink at most 10x per step.
    pub fn new(tol: f64, initial_step: f64, horizon: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(crate::error::invalid(
                "tol",
                format!("must be > 0, got {tol}"),
            ));
        }
        if !(horizon > 0.0) {
            return Err(crate::error::invalid(
                "T",
                format!("must be > 0, got {horizon}"),
            ));
        }
        let k_max = horizon / 10.0;
        let k_min = 1e-12 * horizon;
        Ok(Self {
            tol,
            k: initial_step.clamp(k_min, k_max),
            safety: 0.9,
            guard_shrink: 0.5,
            k_min,
            k_max,
            max_growth: 5.0,
            max_shrink: 0.1,
            accepted: 0,
            rejected: 0,
            guard_shrinks: 0,
        })
    }

    pub fn with_guard_shrink(mut self, factor: f64) -> Result<Self> {
        if !(0.1..=0.5).contains(&factor) {
            return Err(crate::error::invalid(
                "guard_shrink",
                format!("must lie in [0.1, 0.5], got {factor}"),
            ));
        }
        self.guard_shrink = factor;
        Ok(self)
    }

    /// Accept when `e_u < tol` and grow by `0.9 (tol/e_u)^(1/4)`; otherwise
    /// reject and shrink by `0.9 (tol/e_u)^(1/5)`. Updates `self.k`.
    pub fn adapt(&mut self, e_u: f64) -> (bool, f64) {
        let accept = e_u < self.tol;
        let factor = if e_u == 0.0 {
            self.max_growth
        } else if accept {
            self.safety * (self.tol / e_u).powf(0.25)
        } else {
            self.safety * (self.tol / e_u).powf(0.2)
        };
        let factor = factor.clamp(self.max_shrink, self.max_growth);
        self.k = (self.k * factor).clamp(self.k_min, self.k_max);
        if accept {
            self.accepted += 1;
        } else {
            self.rejected += 1;
        }
        (accept, self.k)
    }
}

/// Pure form of [`StepController::adapt`].
pub fn adapt_step(controller: &StepController, e_u: f64) -> (bool, f64) {
    let mut c = controller.clone();
    c.adapt(e_u)
}

/// Tries `attempt(k)` and shrinks `k` by the guard factor while the boundary
/// quadratic has no real root. Returns the accepted `k` and the attempt's output.
pub fn guard_real_root<T, F>(
    controller: &mut StepController,
    k: f64,
    tau: f64,
    mut attempt: F,
) -> Result<(f64, T)>
where
    F: FnMut(f64) -> std::result::Result<T, DiscriminantNegative>,
{
    let mut k = k;
    loop {
        match attempt(k) {
            Ok(out) => return Ok((k, out)),
            Err(DiscriminantNegative { .. }) => {
                controller.guard_shrinks += 1;
                k *= controller.guard_shrink;
                if k < controller.k_min {
                    return Err(PricingError::GuardExhausted {
                        tau,
                        step: k,
                        k_min: controller.k_min,
                    });
                }
            }
        }
    }
}
