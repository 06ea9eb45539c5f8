//! Contract parameters for an American put and the constants derived from them.

use crate::error::{invalid, Result};

/// Strike, expiry, risk-free rate and volatility of an American put.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    pub strike: f64,
    pub expiry: f64,
    pub rate: f64,
    pub sigma: f64,
}

impl MarketParams {
    pub fn new(strike: f64, expiry: f64, rate: f64, sigma: f64) -> Result<Self> {
        let params = Self {
            strike,
            expiry,
            rate,
            sigma,
        };
        params.validate()?;
        Ok(params)
    }

    /// K = 100, T = 1, r = 10%, sigma = 30%.
    pub fn example1() -> Self {
        Self {
            strike: 100.0,
            expiry: 1.0,
            rate: 0.10,
            sigma: 0.30,
        }
    }

    /// K = 100, T = 0.5, r = 5%, sigma = 20%.
    pub fn example2() -> Self {
        Self {
            strike: 100.0,
            expiry: 0.5,
            rate: 0.05,
            sigma: 0.20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64); 4] = [
            ("strike", self.strike),
            ("expiry", self.expiry),
            ("rate", self.rate),
            ("sigma", self.sigma),
        ];
        for (name, value) in checks {
            if !value.is_finite() || value <= 0.0 {
                return Err(invalid(
                    name,
                    format!("must be finite and > 0, got {value}"),
                ));
            }
        }
        Ok(())
    }

    /// Intrinsic value `max(K - S, 0)`.
    pub fn payoff(&self, spot: f64) -> f64 {
        (self.strike - spot).max(0.0)
    }
}

/// Constants that appear throughout the transformed problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// Drift in log space, `r - sigma^2 / 2`.
    pub v: f64,
    /// `sqrt(r K)`.
    pub phi: f64,
    /// `2 r / sigma^2`.
    pub gamma_exp: f64,
    /// Perpetual exercise boundary `gamma K / (gamma + 1)`.
    pub s_f_inf: f64,
}

pub fn derive_constants(params: &MarketParams) -> Result<DerivedConstants> {
    params.validate()?;
    let MarketParams {
        strike,
        rate,
        sigma,
        ..
    } = *params;
    let sigma2 = sigma * sigma;
    let gamma_exp = 2.0 * rate / sigma2;
    Ok(DerivedConstants {
        v: rate - 0.5 * sigma2,
        phi: (rate * strike).sqrt(),
        gamma_exp,
        s_f_inf: strike * gamma_exp / (gamma_exp + 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn example1_constants() {
        let c = derive_constants(&MarketParams::example1()).unwrap();
        assert_abs_diff_eq!(c.gamma_exp, 2.2222, epsilon = 1e-4);
        assert_abs_diff_eq!(c.s_f_inf, 68.9655, epsilon = 1e-4);
        assert_abs_diff_eq!(c.v, 0.055, epsilon = 1e-12);
        assert_abs_diff_eq!(c.phi, 3.16228, epsilon = 1e-5);
    }

    #[test]
    fn example2_constants() {
        let c = derive_constants(&MarketParams::example2()).unwrap();
        assert_abs_diff_eq!(c.gamma_exp, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.s_f_inf, 71.4286, epsilon = 1e-4);
        assert_abs_diff_eq!(c.v, 0.03, epsilon = 1e-12);
        assert_abs_diff_eq!(c.phi, 2.23607, epsilon = 1e-5);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(MarketParams::new(100.0, 1.0, 0.1, 0.0).is_err());
        assert!(MarketParams::new(100.0, 1.0, 0.0, 0.2).is_err());
        assert!(MarketParams::new(-1.0, 1.0, 0.1, 0.2).is_err());
        assert!(MarketParams::new(100.0, f64::NAN, 0.1, 0.2).is_err());
        let bad = MarketParams {
            sigma: 0.0,
            ..MarketParams::example1()
        };
        assert!(derive_constants(&bad).is_err());
    }

    proptest! {
        #[test]
        fn perpetual_boundary_below_strike(
            strike in 1.0..500.0f64,
            rate in 0.001..0.5f64,
            sigma in 0.01..1.5f64,
        ) {
            let p = MarketParams::new(strike, 1.0, rate, sigma).unwrap();
            let c = derive_constants(&p).unwrap();
            prop_assert!(c.s_f_inf > 0.0 && c.s_f_inf < strike);
            prop_assert_eq!(c, derive_constants(&p).unwrap());
        }
    }
}
