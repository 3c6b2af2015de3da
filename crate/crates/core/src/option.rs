//! Fair value and replication of the reinsurance put written on the
//! constant-mix benchmark.
//!
//! The benchmark holds a fixed fraction `pi_cm` in asset 2, so it is itself a
//! geometric Brownian motion with volatility `s = pi_cm * sigma2`. Under the
//! original kernel its risk-neutral drift is `r`; under a kernel shifted by
//! `lambda` the drift becomes `r - pi_cm * lambda2`, which makes the auxiliary
//! price a Black-Scholes put with continuous yield `q = pi_cm * lambda2`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::market::{DualShift, MarketParams};

/// Standard normal CDF through `erfc`, accurate to a few ulp over the whole line.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReinsuranceContract {
    /// Strike of the put, equal to the client's capital guarantee.
    pub guarantee: f64,
    pub maturity: f64,
    /// Weight of asset 2 in the benchmark.
    pub pi_cm: f64,
    /// Benchmark value at inception (the insurer's initial wealth).
    pub benchmark0: f64,
}

impl ReinsuranceContract {
    /// `guarantee = 0` is accepted and yields a worthless put.
    pub fn new(guarantee: f64, maturity: f64, pi_cm: f64, benchmark0: f64) -> Result<Self> {
        if !(guarantee >= 0.0 && guarantee.is_finite()) {
            return Err(invalid("guarantee", format!("must be >= 0, got {guarantee}")));
        }
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(invalid("maturity", format!("must be > 0, got {maturity}")));
        }
        if !(pi_cm >= 0.0 && pi_cm.is_finite()) {
            return Err(invalid("pi_cm", format!("must be >= 0, got {pi_cm}")));
        }
        if !(benchmark0 > 0.0 && benchmark0.is_finite()) {
            return Err(invalid("benchmark0", format!("must be > 0, got {benchmark0}")));
        }
        Ok(Self { guarantee, maturity, pi_cm, benchmark0 })
    }

    pub fn benchmark_vol(&self, params: &MarketParams) -> f64 {
        self.pi_cm * params.sigma2()
    }

    pub fn payoff(&self, v_b: f64) -> f64 {
        (self.guarantee - v_b).max(0.0)
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || t > self.maturity {
            return Err(Error::TimeOutOfRange { t, horizon: self.maturity });
        }
        Ok(self.maturity - t)
    }
}

/// Price and standardized moneyness of the put.
///
/// `d1` uses the drift `r - q - s^2/2`, `d2 = d1 + s sqrt(T - t)` and
/// `d_plus = d2`, so the put delta with respect to the benchmark is
/// `e^{-q (T-t)} (Phi(d_plus) - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PutQuote {
    pub price: f64,
    pub d1: f64,
    pub d2: f64,
    pub d_plus: f64,
}

fn signed_infinity(x: f64) -> f64 {
    if x >= 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

fn yield_put(tau: f64, v_b: f64, strike: f64, r: f64, q: f64, vol: f64) -> PutQuote {
    if strike == 0.0 {
        return PutQuote { price: 0.0, d1: f64::INFINITY, d2: f64::INFINITY, d_plus: f64::INFINITY };
    }
    let log_m = (v_b / strike).ln();
    let sd = vol * tau.sqrt();
    if tau == 0.0 || sd == 0.0 {
        let fwd_gap = log_m + (r - q) * tau;
        let d = signed_infinity(fwd_gap);
        let price = ((-r * tau).exp() * strike - v_b * (-q * tau).exp()).max(0.0);
        return PutQuote { price, d1: d, d2: d, d_plus: d };
    }
    let d1 = (log_m + (r - q - 0.5 * vol * vol) * tau) / sd;
    let d2 = d1 + sd;
    let price = (-r * tau).exp() * strike * norm_cdf(-d1) - v_b * (-q * tau).exp() * norm_cdf(-d2);
    PutQuote { price: price.max(0.0), d1, d2, d_plus: d2 }
}

fn check_level(v_b: f64) -> Result<()> {
    if !(v_b > 0.0 && v_b.is_finite()) {
        return Err(invalid("v_b", format!("benchmark level must be > 0, got {v_b}")));
    }
    Ok(())
}

/// Fair value `P(t)` under the original pricing kernel.
pub fn put_price(t: f64, v_b: f64, contract: &ReinsuranceContract, params: &MarketParams) -> Result<PutQuote> {
    let tau = contract.check_time(t)?;
    check_level(v_b)?;
    Ok(yield_put(tau, v_b, contract.guarantee, params.r(), 0.0, contract.benchmark_vol(params)))
}

/// `Z_lambda(t)^{-1} E[Z_lambda(T) P(T) | F_t]`, the put valued with the kernel
/// of the market shifted by `lambda`.
pub fn put_price_auxiliary(
    t: f64,
    v_b: f64,
    contract: &ReinsuranceContract,
    params: &MarketParams,
    lambda: DualShift,
) -> Result<f64> {
    let tau = contract.check_time(t)?;
    check_level(v_b)?;
    let q = contract.pi_cm * lambda.lambda2;
    Ok(yield_put(tau, v_b, contract.guarantee, params.r(), q, contract.benchmark_vol(params)).price)
}

/// Shares `(psi0, psi1, psi2)` in `(S0, S1, S2)` replicating the put.
pub fn replication_strategy(
    t: f64,
    v_b: f64,
    s0: f64,
    s2: f64,
    contract: &ReinsuranceContract,
    params: &MarketParams,
) -> Result<[f64; 3]> {
    if t >= contract.maturity {
        return Err(Error::TimeOutOfRange { t, horizon: contract.maturity });
    }
    let quote = put_price(t, v_b, contract, params)?;
    if contract.guarantee == 0.0 {
        return Ok([0.0, 0.0, 0.0]);
    }
    let stock_value = contract.pi_cm * v_b * (norm_cdf(quote.d_plus) - 1.0);
    Ok([(quote.price - stock_value) / s0, 0.0, stock_value / s2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::optimal_dual_shift;

    fn base_contract() -> ReinsuranceContract {
        ReinsuranceContract::new(100.0, 10.0, 0.2948, 100.0).unwrap()
    }

    #[test]
    fn norm_cdf_reference_values() {
        assert_eq!(norm_cdf(0.0), 0.5);
        // Phi(1.96) = 0.9750021048517795
        assert!((norm_cdf(1.96) - 0.975_002_104_851_779_5).abs() < 1e-15);
        // deep tail keeps relative accuracy
        let tail = norm_cdf(-10.0);
        assert!((tail / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_guarantee_is_worthless() {
        let c = ReinsuranceContract::new(0.0, 10.0, 0.2948, 100.0).unwrap();
        let p = MarketParams::table1();
        assert_eq!(put_price(0.0, 100.0, &c, &p).unwrap().price, 0.0);
        assert_eq!(replication_strategy(0.0, 100.0, 1.0, 1.0, &c, &p).unwrap(), [0.0; 3]);
    }

    #[test]
    fn zero_volatility_limit_is_discounted_intrinsic() {
        let c = ReinsuranceContract::new(100.0, 10.0, 0.0, 80.0).unwrap();
        let p = MarketParams::table1();
        let q = put_price(2.0, 80.0, &c, &p).unwrap();
        let tau: f64 = 8.0;
        let expected = ((-p.r() * tau).exp() * 100.0 - 80.0).max(0.0);
        assert!((q.price - expected).abs() < 1e-12);
        let q = put_price(2.0, 120.0, &c, &p).unwrap();
        assert_eq!(q.price, 0.0);
    }

    #[test]
    fn payoff_at_maturity_and_limit() {
        let c = base_contract();
        let p = MarketParams::table1();
        for v in [60.0, 99.0, 100.0, 101.0, 140.0] {
            let at_t = put_price(10.0, v, &c, &p).unwrap().price;
            assert_eq!(at_t, (100.0f64 - v).max(0.0));
            let near = put_price(10.0 - 1e-8, v, &c, &p).unwrap().price;
            assert!((near - at_t).abs() < 1e-3, "v={v}: {near} vs {at_t}");
        }
        assert!(put_price(10.5, 100.0, &c, &p).is_err());
    }

    #[test]
    fn moneyness_relations_hold() {
        let c = base_contract();
        let p = MarketParams::table1();
        let q = put_price(3.0, 95.0, &c, &p).unwrap();
        let s = c.benchmark_vol(&p);
        assert!((q.d2 - q.d1 - s * 7f64.sqrt()).abs() < 1e-14);
        assert_eq!(q.d_plus, q.d2);
        assert!(q.price >= 0.0 && q.price <= (-p.r() * 7.0).exp() * 100.0);
    }

    #[test]
    fn auxiliary_price_matches_original_without_shift() {
        let c = base_contract();
        let p = MarketParams::table1();
        for (t, v) in [(0.0, 100.0), (4.0, 87.0), (9.5, 120.0)] {
            let a = put_price_auxiliary(t, v, &c, &p, DualShift::ZERO).unwrap();
            let o = put_price(t, v, &c, &p).unwrap().price;
            assert_eq!(a, o);
        }
    }

    #[test]
    fn auxiliary_premium_over_fair_price_base_case() {
        let c = base_contract();
        let p = MarketParams::table1();
        let l = optimal_dual_shift(&p);
        let p0 = put_price(0.0, 100.0, &c, &p).unwrap().price;
        let pa = put_price_auxiliary(0.0, 100.0, &c, &p, l).unwrap();
        let loading = (pa - p0) / p0;
        assert!((loading - 0.2086).abs() < 0.5e-4, "loading {loading}");
    }

    #[test]
    fn replication_holds_put_value() {
        let c = base_contract();
        let p = MarketParams::table1();
        for (t, v, s0, s2) in [(0.0, 100.0, 1.0, 1.0), (5.0, 90.0, 1.05, 1.3), (9.9, 130.0, 1.1, 2.0)] {
            let psi = replication_strategy(t, v, s0, s2, &c, &p).unwrap();
            let price = put_price(t, v, &c, &p).unwrap().price;
            let value = psi[0] * s0 + psi[2] * s2;
            assert!((value - price).abs() <= 1e-10 * price.max(1e-300) + 1e-14);
            assert_eq!(psi[1], 0.0);
            assert!(psi[2] <= 0.0);
        }
    }

    #[test]
    fn deep_in_the_money_delta() {
        let c = base_contract();
        let p = MarketParams::table1();
        let v = 1e-3;
        let psi = replication_strategy(1.0, v, 1.0, 1.0, &c, &p).unwrap();
        let price = put_price(1.0, v, &c, &p).unwrap().price;
        assert!((psi[2] + c.pi_cm * v).abs() < 1e-15);
        assert!((psi[0] - (price + c.pi_cm * v)).abs() < 1e-12);
    }

    #[test]
    fn replication_delta_matches_finite_difference() {
        // V_B = const * S2^pi_cm, so a relative bump h in S2 moves V_B by (1+h)^pi_cm.
        let c = base_contract();
        let p = MarketParams::table1();
        let (v, s2) = (100.0, 1.0);
        let h: f64 = 1e-5;
        let up = put_price(0.0, v * (1.0 + h).powf(c.pi_cm), &c, &p).unwrap().price;
        let dn = put_price(0.0, v * (1.0 - h).powf(c.pi_cm), &c, &p).unwrap().price;
        let fd = (up - dn) / (2.0 * h * s2);
        let psi = replication_strategy(0.0, v, 1.0, s2, &c, &p).unwrap();
        assert!(((psi[2] - fd) / fd).abs() < 1e-6, "{} vs {}", psi[2], fd);
    }
}
