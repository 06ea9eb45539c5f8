//! Reference prices: Cox–Ross–Rubinstein lattice for the American put and
//! the Black–Scholes closed form for the European put.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, PricingError, Result};
use crate::model::MarketParams;

/// Step count used for benchmark prices.
pub const BENCHMARK_STEPS: usize = 15_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialSpec {
    pub steps: usize,
    pub params: MarketParams,
    pub spot: f64,
}

impl BinomialSpec {
    pub fn new(params: MarketParams, spot: f64, steps: usize) -> Self {
        Self {
            steps,
            params,
            spot,
        }
    }
}

/// American put by backward induction on a CRR lattice with
/// `u = exp(sigma sqrt(dt))`, `d = 1/u`.
pub fn crr_american_put(spec: &BinomialSpec) -> Result<f64> {
    let BinomialSpec {
        steps,
        params,
        spot,
    } = *spec;
    params.validate()?;
    if steps == 0 {
        return Err(invalid("steps", "need at least one step"));
    }
    if !(spot > 0.0) {
        return Err(invalid("spot", format!("must be > 0, got {spot}")));
    }
    let dt = params.expiry / steps as f64;
    let up = (params.sigma * dt.sqrt()).exp();
    let down = 1.0 / up;
    let growth = (params.rate * dt).exp();
    let prob = (growth - down) / (up - down);
    if !(prob > 0.0 && prob < 1.0) {
        return Err(PricingError::InvalidProbability(prob));
    }
    let discount = 1.0 / growth;
    let (pu, pd) = (discount * prob, discount * (1.0 - prob));
    let strike = params.strike;

    // values[j] holds the node with j up-moves at the current level
    let mut values: Vec<f64> = Vec::with_capacity(steps + 1);
    let mut s = spot * down.powi(steps as i32);
    let up2 = up * up;
    for _ in 0..=steps {
        values.push((strike - s).max(0.0));
        s *= up2;
    }
    for level in (0..steps).rev() {
        // lowest node at this level: spot * d^level
        let mut s = spot * down.powi(level as i32);
        for j in 0..=level {
            let cont = pu * values[j + 1] + pd * values[j];
            values[j] = cont.max(strike - s);
            s *= up2;
        }
    }
    Ok(values[0])
}

fn d1_d2(params: &MarketParams, spot: f64) -> (f64, f64) {
    let vol = params.sigma * params.expiry.sqrt();
    let d1 = ((spot / params.strike).ln()
        + (params.rate + 0.5 * params.sigma * params.sigma) * params.expiry)
        / vol;
    (d1, d1 - vol)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Black–Scholes European put.
pub fn bs_european_put(params: &MarketParams, spot: f64) -> Result<f64> {
    params.validate()?;
    if !(spot > 0.0) {
        return Err(invalid("spot", format!("must be > 0, got {spot}")));
    }
    let (d1, d2) = d1_d2(params, spot);
    let n = std_normal();
    let df = (-params.rate * params.expiry).exp();
    Ok(params.strike * df * n.cdf(-d2) - spot * n.cdf(-d1))
}

/// Black–Scholes European call.
pub fn bs_european_call(params: &MarketParams, spot: f64) -> Result<f64> {
    params.validate()?;
    if !(spot > 0.0) {
        return Err(invalid("spot", format!("must be > 0, got {spot}")));
    }
    let (d1, d2) = d1_d2(params, spot);
    let n = std_normal();
    let df = (-params.rate * params.expiry).exp();
    Ok(spot * n.cdf(d1) - params.strike * df * n.cdf(d2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn crr(params: MarketParams, spot: f64, steps: usize) -> f64 {
        crr_american_put(&BinomialSpec::new(params, spot, steps)).unwrap()
    }

    #[test]
    fn deep_in_the_money_is_exercised() {
        let p = MarketParams::example2();
        assert_abs_diff_eq!(crr(p, 1.0, 2000), 99.0, epsilon = 1e-12);
    }

    #[test]
    fn single_step_tree_by_hand() {
        let p = MarketParams::new(100.0, 1.0, 0.05, 0.2).unwrap();
        let up = 0.2f64.exp();
        let down = 1.0 / up;
        let prob = (0.05f64.exp() - down) / (up - down);
        let cont = (-0.05f64).exp() * (1.0 - prob) * (100.0 - 100.0 * down);
        assert_abs_diff_eq!(crr(p, 100.0, 1), cont.max(0.0), epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_lattices() {
        let p = MarketParams::example2();
        assert!(crr_american_put(&BinomialSpec::new(p, 100.0, 0)).is_err());
        // a huge rate with a single step pushes the probability above one
        let p = MarketParams::new(100.0, 1.0, 5.0, 0.1).unwrap();
        assert!(matches!(
            crr_american_put(&BinomialSpec::new(p, 100.0, 1)),
            Err(PricingError::InvalidProbability(_))
        ));
    }

    #[test]
    fn put_call_parity() {
        for params in [MarketParams::example1(), MarketParams::example2()] {
            for spot in [60.0, 85.0, 100.0, 130.0] {
                let lhs = bs_european_call(&params, spot).unwrap()
                    - bs_european_put(&params, spot).unwrap();
                let rhs = spot - params.strike * (-params.rate * params.expiry).exp();
                assert!((lhs - rhs).abs() < 1e-10, "parity residual {}", lhs - rhs);
            }
        }
    }

    #[test]
    fn far_out_of_the_money_put_is_worthless() {
        let p = MarketParams::new(100.0, 0.5, 0.05, 0.05).unwrap();
        let spot = 2.0 * p.strike * (p.rate * p.expiry).exp();
        assert!(bs_european_put(&p, spot).unwrap() < 1e-6);
    }

    #[test]
    fn american_dominates_european() {
        let p = MarketParams::example2();
        for spot in [80.0, 90.0, 100.0, 110.0, 120.0] {
            let am = crr(p, spot, 2000);
            let eu = bs_european_put(&p, spot).unwrap();
            assert!(am >= eu - 1e-3);
            assert!(eu >= 0.0);
            assert!(am >= p.payoff(spot) - 1e-12);
        }
        assert!(crr(p, 100.0, 2000) > bs_european_put(&p, 100.0).unwrap());
    }

    #[test]
    fn monotone_in_spot_and_volatility() {
        let base = MarketParams::example2();
        let spots = [70.0, 80.0, 90.0, 100.0, 110.0, 120.0];
        let prices: Vec<f64> = spots.iter().map(|&s| crr(base, s, 800)).collect();
        assert!(prices.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        for &spot in &[85.0, 100.0, 115.0] {
            let by_vol: Vec<f64> = [0.1, 0.2, 0.3, 0.4]
                .iter()
                .map(|&sigma| crr(MarketParams { sigma, ..base }, spot, 800))
                .collect();
            assert!(by_vol.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        }
    }
}
