//! Velocity of the optimal exercise boundary from the intermediate function
//! `Q = sqrt(U - K + e^x s_f)`.
//!
//! Near `x = 0` the Taylor data of `Q` are known in closed form in terms of
//! `xi = v + s_f'/s_f`:
//!
//! ```text
//! Q(0) = 0,  Q'(0) = phi/sigma,  Q''(0) = -2 xi phi / (3 sigma^3),
//! Q'''(0) = 2 xi^2 phi / (3 sigma^5) + r phi / (2 sigma^3)
//! ```
//!
//! Matching these against sampled values of `Q` gives a quadratic in
//! `p = s_f'/s_f`. The extrapolated mode combines three samples,
//! `81 Q(xbar) - 81/8 Q(2 xbar) + Q(3 xbar)`, which cancels the fourth and
//! fifth Taylor terms; the baseline mode uses the single sample `Q(xbar)`.

use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::model::{DerivedConstants, MarketParams};

/// `Q` sampled at `xbar`, `2 xbar`, `3 xbar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QSamples {
    pub q: [f64; 3],
    pub xbar: f64,
}

impl QSamples {
    /// `81 q1 - 81/8 q2 + q3`.
    pub fn extrapolated_sum(&self) -> f64 {
        81.0 * self.q[0] - 81.0 / 8.0 * self.q[1] + self.q[2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Three-sample extrapolated quadratic (sixth-order in `xbar`).
    Extrapolated,
    /// Single-sample quadratic from the cubic Taylor expansion.
    Baseline,
}

/// `p^2 + d p + e = 0` with `p = s_f'/s_f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCoeffs {
    pub d: f64,
    pub e: f64,
    pub mode: BoundaryMode,
}

impl QuadraticCoeffs {
    pub fn discriminant(&self) -> f64 {
        self.d * self.d - 4.0 * self.e
    }

    /// Normalizes a quadratic `a s'^2 + b s' + c = 0` in the velocity `s'`.
    pub fn from_velocity_quadratic(a: f64, b: f64, c: f64, s_f: f64, mode: BoundaryMode) -> Self {
        let lead = a * s_f * s_f;
        Self {
            d: b * s_f / lead,
            e: c / lead,
            mode,
        }
    }
}

/// The quadratic has no real root; the step guard shrinks the time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminantNegative {
    pub discriminant: f64,
}

/// Samples `Q` at `m * xbar` for `m = 1, 2, 3`, with `xbar = xbar_multiple * h`.
///
/// Negative radicands (round-off near the boundary) are clamped to zero.
pub fn q_samples(
    u: &[f64],
    s_f: f64,
    strike: f64,
    grid: &Grid,
    xbar_multiple: usize,
) -> Result<QSamples> {
    if xbar_multiple == 0 || 3 * xbar_multiple >= grid.intervals() {
        return Err(invalid(
            "xbar_multiple",
            format!(
                "need 1 <= 3 * multiple < M = {}, got multiple {xbar_multiple}",
                grid.intervals()
            ),
        ));
    }
    if u.len() != grid.interior_len() {
        return Err(invalid("u", "length must equal the interior node count"));
    }
    Ok(q_samples_unchecked(u, s_f, strike, grid.h(), xbar_multiple))
}

#[inline]
pub(crate) fn q_samples_unchecked(
    u: &[f64],
    s_f: f64,
    strike: f64,
    h: f64,
    xbar_multiple: usize,
) -> QSamples {
    let xbar = xbar_multiple as f64 * h;
    let mut q = [0.0; 3];
    for (m, slot) in q.iter_mut().enumerate() {
        let node = (m + 1) * xbar_multiple;
        let x = node as f64 * h;
        let radicand = u[node - 1] - strike + x.exp() * s_f;
        *slot = radicand.max(0.0).sqrt();
    }
    QSamples { q, xbar }
}

/// Coefficients of the extrapolated quadratic:
///
/// ```text
/// d = 2v - 11 sigma^2 / (2 xbar)
/// e = v^2 - 11 sigma^2 v / (2 xbar) + 85 sigma^4 / (4 xbar^2) + 3 r sigma^2 / 4
///     - sigma^5 / (3 phi xbar^3) * (81 q1 - 81/8 q2 + q3)
/// ```
pub fn extrapolated_coeffs(
    q: &QSamples,
    params: &MarketParams,
    consts: &DerivedConstants,
) -> QuadraticCoeffs {
    let sigma = params.sigma;
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    let s5 = s4 * sigma;
    let xb = q.xbar;
    let v = consts.v;
    let d = 2.0 * v - 11.0 * s2 / (2.0 * xb);
    let e =
        v * v - 11.0 * s2 * v / (2.0 * xb) + 85.0 * s4 / (4.0 * xb * xb) + 0.75 * params.rate * s2
            - s5 / (3.0 * consts.phi * xb * xb * xb) * q.extrapolated_sum();
    QuadraticCoeffs {
        d,
        e,
        mode: BoundaryMode::Extrapolated,
    }
}

/// Coefficients `(a, b, c)` of the baseline quadratic `a s'^2 + b s' + c = 0`.
pub fn baseline_coeffs(
    q1: f64,
    s_f: f64,
    params: &MarketParams,
    consts: &DerivedConstants,
    xbar: f64,
) -> (f64, f64, f64) {
    let sigma = params.sigma;
    let s3 = sigma.powi(3);
    let s5 = sigma.powi(5);
    let phi = consts.phi;
    let v = consts.v;
    let x2 = xbar * xbar;
    let x3 = x2 * xbar;
    let a = phi * x3 / (9.0 * s5 * s_f * s_f);
    let b = -phi * x2 / (3.0 * s3 * s_f) + 2.0 * v * phi * x3 / (9.0 * s5 * s_f);
    let c = -q1 + phi * xbar / sigma - v * phi * x2 / (3.0 * s3)
        + v * v * phi * x3 / (9.0 * s5)
        + params.rate * phi * x3 / (12.0 * s3);
    (a, b, c)
}

/// Quadratic coefficients in `p` for the selected mode.
pub fn coeffs_for_mode(
    mode: BoundaryMode,
    q: &QSamples,
    s_f: f64,
    params: &MarketParams,
    consts: &DerivedConstants,
) -> QuadraticCoeffs {
    match mode {
        BoundaryMode::Extrapolated => extrapolated_coeffs(q, params, consts),
        BoundaryMode::Baseline => {
            let (a, b, c) = baseline_coeffs(q.q[0], s_f, params, consts, q.xbar);
            QuadraticCoeffs::from_velocity_quadratic(a, b, c, s_f, BoundaryMode::Baseline)
        }
    }
}

/// `s_f * (-d - sqrt(d^2 - 4e)) / 2`, the smaller root.
pub fn boundary_velocity(
    s_f: f64,
    coeffs: &QuadraticCoeffs,
) -> std::result::Result<f64, DiscriminantNegative> {
    let disc = coeffs.discriminant();
    if !(disc >= 0.0) {
        return Err(DiscriminantNegative { discriminant: disc });
    }
    Ok(s_f * 0.5 * (-coeffs.d - disc.sqrt()))
}
