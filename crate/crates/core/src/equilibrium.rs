//! Best responses, Lagrange multipliers and the Stackelberg equilibrium
//! between a reinsurer (leader, sets the safety loading `theta`) and an
//! insurer (follower, buys `xi` puts and invests under a no-asset-2 constraint).
//!
//! The insurer's effective initial wealth in the auxiliary market is
//! `X(xi) = v_I - xi (1 + theta) P(0) + xi P_aux(0)`, linear in `xi`, so every
//! CRRA-type value function is monotone in `xi` with the sign of
//! `P_aux(0) - (1 + theta) P(0)`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::market::{kernel_moment, optimal_dual_shift, DualShift, MarketParams, Vec2};
use crate::option::{put_price, put_price_auxiliary, ReinsuranceContract};
use crate::strategies::{insurer_portfolio, reinsurer_portfolio, MarketState};

/// Relative tolerance of the loading comparison that decides indifference.
pub const INDIFFERENCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Utility {
    /// `x^b / b`.
    Power {
        b: f64,
    },
    Log,
    /// `(x + a)^b / b`.
    Hara {
        a: f64,
        b: f64,
    },
}

fn check_exponent(b: f64) -> Result<()> {
    if !(b < 1.0 && b != 0.0 && b.is_finite()) {
        return Err(invalid("b", format!("exponent must lie in (-inf, 1) without 0, got {b}")));
    }
    Ok(())
}

impl Utility {
    pub fn power(b: f64) -> Result<Self> {
        check_exponent(b)?;
        Ok(Self::Power { b })
    }

    pub fn hara(a: f64, b: f64) -> Result<Self> {
        check_exponent(b)?;
        if !a.is_finite() {
            return Err(invalid("a", "must be finite"));
        }
        Ok(Self::Hara { a, b })
    }

    /// CRRA utility with relative risk aversion `rra`; `rra = 1` is logarithmic.
    pub fn from_rra(rra: f64) -> Result<Self> {
        if !(rra > 0.0 && rra.is_finite()) {
            return Err(invalid("rra", format!("must be > 0, got {rra}")));
        }
        if rra == 1.0 {
            Ok(Self::Log)
        } else {
            Self::power(1.0 - rra)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Power { b } => check_exponent(b),
            Self::Log => Ok(()),
            Self::Hara { a, b } => Self::hara(a, b).map(|_| ()),
        }
    }

    /// The exponent `b`, with 0 standing for log utility.
    pub fn exponent(&self) -> f64 {
        match *self {
            Self::Power { b } | Self::Hara { b, .. } => b,
            Self::Log => 0.0,
        }
    }

    /// `1 / (1 - b)`, the scale of the Merton portfolio.
    pub fn merton_coefficient(&self) -> f64 {
        1.0 / (1.0 - self.exponent())
    }

    /// Zero wealth maps to the limit value (`-inf` for `b < 0` and log).
    pub fn value(&self, x: f64) -> Result<f64> {
        match *self {
            Self::Power { b } => {
                if x < 0.0 {
                    return Err(Error::NonPositiveWealth { party: "utility", wealth: x });
                }
                Ok(x.powf(b) / b)
            }
            Self::Log => {
                if x < 0.0 {
                    return Err(Error::NonPositiveWealth { party: "utility", wealth: x });
                }
                Ok(x.ln())
            }
            Self::Hara { a, b } => {
                if !(x + a > 0.0) {
                    return Err(Error::HaraDomain(x + a));
                }
                Ok((x + a).powf(b) / b)
            }
        }
    }

    /// Inverse of the marginal utility, `I = (U')^{-1}`.
    pub fn inverse_marginal(&self, y: f64) -> f64 {
        match *self {
            Self::Power { b } => y.powf(1.0 / (b - 1.0)),
            Self::Log => 1.0 / y,
            Self::Hara { a, b } => y.powf(1.0 / (b - 1.0)) - a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractTerms {
    pub v_i: f64,
    pub v_r: f64,
    pub theta_max: f64,
    pub xi_bar: f64,
    pub contract: ReinsuranceContract,
}

impl ContractTerms {
    pub fn new(v_i: f64, v_r: f64, theta_max: f64, xi_bar: f64, contract: ReinsuranceContract) -> Result<Self> {
        let terms = Self { v_i, v_r, theta_max, xi_bar, contract };
        terms.check_basic()?;
        Ok(terms)
    }

    /// Base case: `v_I = v_R = G = 100`, `T = 10`, 29.48% benchmark weight,
    /// `theta_max = 50%`, `xi_bar = 1.5`.
    pub fn table1() -> Self {
        let contract = ReinsuranceContract::new(100.0, 10.0, 0.2948, 100.0).expect("valid contract");
        Self::new(100.0, 100.0, 0.5, 1.5, contract).expect("valid terms")
    }

    fn check_basic(&self) -> Result<()> {
        let positive = [("v_i", self.v_i), ("v_r", self.v_r), ("xi_bar", self.xi_bar)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.theta_max >= 0.0 && self.theta_max.is_finite()) {
            return Err(invalid("theta_max", format!("must be >= 0, got {}", self.theta_max)));
        }
        Ok(())
    }

    /// Checks the standing assumption `xi_bar < v_I / ((1 + theta_max) P(0))`,
    /// under which the insurer can always afford the maximal amount.
    pub fn validate(&self, params: &MarketParams) -> Result<()> {
        self.check_basic()?;
        let p0 = put_price(0.0, self.contract.benchmark0, &self.contract, params)?.price;
        if p0 > 0.0 {
            let cap = self.v_i / ((1.0 + self.theta_max) * p0);
            if !(self.xi_bar < cap) {
                return Err(invalid(
                    "xi_bar",
                    format!("must be below v_I / ((1 + theta_max) P(0)) = {cap}, got {}", self.xi_bar),
                ));
            }
        }
        Ok(())
    }

    fn check_actions(&self, theta: f64, xi: f64) -> Result<()> {
        let slack = 1e-12;
        if !(theta >= 0.0 && theta <= self.theta_max * (1.0 + slack) + slack) {
            return Err(invalid("theta", format!("must lie in [0, {}], got {theta}", self.theta_max)));
        }
        if !(xi >= 0.0 && xi <= self.xi_bar * (1.0 + slack)) {
            return Err(invalid("xi", format!("must lie in [0, {}], got {xi}", self.xi_bar)));
        }
        Ok(())
    }
}

/// Time-0 fair prices `(P(0), P_aux(0))`.
pub fn initial_prices(terms: &ContractTerms, params: &MarketParams, lambda: DualShift) -> Result<(f64, f64)> {
    let c = &terms.contract;
    let p0 = put_price(0.0, c.benchmark0, c, params)?.price;
    let pa = put_price_auxiliary(0.0, c.benchmark0, c, params, lambda)?;
    Ok((p0, pa))
}

/// Insurer's wealth available to the auxiliary-market Merton problem.
fn insurer_effective_wealth(xi: f64, theta: f64, v_i: f64, p0: f64, pa: f64) -> f64 {
    v_i - xi * (1.0 + theta) * p0 + xi * pa
}

/// The part of the insurer's budget that is scaled by `y^{1/(b-1)}`, i.e. the
/// effective wealth plus the present value of the HARA shift.
fn insurer_scaled_wealth(utility: &Utility, x: f64, params: &MarketParams, horizon: f64) -> Result<f64> {
    let w = match *utility {
        Utility::Hara { a, .. } => x + a * (-params.r() * horizon).exp(),
        _ => x,
    };
    if !(w > 0.0) {
        return Err(match utility {
            Utility::Hara { .. } => Error::HaraDomain(w),
            _ => Error::NonPositiveWealth { party: "insurer", wealth: w },
        });
    }
    Ok(w)
}

fn power_moment(params: &MarketParams, lambda: DualShift, b: f64, horizon: f64) -> f64 {
    kernel_moment(params, lambda, b / (b - 1.0), horizon)
}

fn insurer_prepared(
    xi: f64,
    theta: f64,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<(f64, DualShift)> {
    utility.validate()?;
    terms.check_actions(theta, xi)?;
    let lambda = optimal_dual_shift(params);
    let (p0, pa) = initial_prices(terms, params, lambda)?;
    let x = insurer_effective_wealth(xi, theta, terms.v_i, p0, pa);
    let w = insurer_scaled_wealth(utility, x, params, terms.contract.maturity)?;
    Ok((w, lambda))
}

/// Insurer's Lagrange multiplier `y_I(xi)` from the auxiliary budget constraint.
pub fn insurer_lagrange(
    xi: f64,
    theta: f64,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<f64> {
    let (w, lambda) = insurer_prepared(xi, theta, utility, terms, params)?;
    Ok(match *utility {
        Utility::Log => 1.0 / w,
        Utility::Power { b } | Utility::Hara { b, .. } => {
            let m = power_moment(params, lambda, b, terms.contract.maturity);
            (w / m).powf(b - 1.0)
        }
    })
}

/// Relative residual of the insurer's budget
/// `E[Z_lambda(T) (I(y Z_lambda(T)) - xi P(T))] = v_I - xi (1 + theta) P(0)`
/// with the expectation evaluated in closed form.
pub fn insurer_budget_residual(
    y: f64,
    xi: f64,
    theta: f64,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<f64> {
    let lambda = optimal_dual_shift(params);
    let (p0, pa) = initial_prices(terms, params, lambda)?;
    let horizon = terms.contract.maturity;
    let claim = match *utility {
        Utility::Log => 1.0 / y,
        Utility::Power { b } => y.powf(1.0 / (b - 1.0)) * power_moment(params, lambda, b, horizon),
        Utility::Hara { a, b } => {
            y.powf(1.0 / (b - 1.0)) * power_moment(params, lambda, b, horizon) - a * (-params.r() * horizon).exp()
        }
    };
    let target = terms.v_i - xi * (1.0 + theta) * p0;
    Ok((claim - xi * pa - target) / terms.v_i)
}

/// Insurer's optimal expected utility `nu(xi)` for a given loading.
pub fn insurer_value_nu(
    xi: f64,
    theta: f64,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<f64> {
    let (w, lambda) = insurer_prepared(xi, theta, utility, terms, params)?;
    let horizon = terms.contract.maturity;
    Ok(match *utility {
        Utility::Log => {
            let g = params.shifted_price_of_risk(lambda);
            w.ln() + (params.r() + 0.5 * (g[0] * g[0] + g[1] * g[1])) * horizon
        }
        Utility::Power { b } | Utility::Hara { b, .. } => {
            let m = power_moment(params, lambda, b, horizon);
            w.powf(b) * m.powf(1.0 - b) / b
        }
    })
}

/// The insurer's reaction to a loading. At the indifference loading every
/// amount in `[0, upper]` is optimal and the one best for the leader is selected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BestResponse {
    Unique { xi: f64 },
    Indifferent { lower: f64, upper: f64, selected: f64 },
}

impl BestResponse {
    pub fn selected(&self) -> f64 {
        match *self {
            Self::Unique { xi } => xi,
            Self::Indifferent { selected, .. } => selected,
        }
    }

    pub fn is_indifferent(&self) -> bool {
        matches!(self, Self::Indifferent { .. })
    }
}

pub fn insurer_best_response(
    theta: f64,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<BestResponse> {
    // Both endpoints must be inside the utility's domain; X(xi) is linear.
    insurer_prepared(0.0, theta, utility, terms, params)?;
    insurer_prepared(terms.xi_bar, theta, utility, terms, params)?;
    let (p0, pa) = initial_prices(terms, params, optimal_dual_shift(params))?;
    Ok(response_to_loading(theta, p0, pa, terms.xi_bar))
}

/// Best response given both time-0 prices; shared by every CRRA-type utility
/// because only the sign of `P_aux(0) - (1 + theta) P(0)` matters.
pub fn response_to_loading(theta: f64, p0: f64, p0_aux: f64, xi_bar: f64) -> BestResponse {
    let gap = p0_aux - (1.0 + theta) * p0;
    if gap.abs() <= INDIFFERENCE_TOLERANCE * p0 {
        BestResponse::Indifferent { lower: 0.0, upper: xi_bar, selected: xi_bar }
    } else if gap > 0.0 {
        BestResponse::Unique { xi: xi_bar }
    } else {
        BestResponse::Unique { xi: 0.0 }
    }
}

fn reinsurer_prepared(
    theta: f64,
    xi: f64,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<f64> {
    utility.validate()?;
    if matches!(utility, Utility::Hara { .. }) {
        return Err(Error::Unsupported("HARA utility for the reinsurer".into()));
    }
    terms.check_actions(theta, xi)?;
    let p0 = put_price(0.0, terms.contract.benchmark0, &terms.contract, params)?.price;
    let w = terms.v_r + xi * theta * p0;
    if !(w > 0.0) {
        return Err(Error::NonPositiveWealth { party: "reinsurer", wealth: w });
    }
    Ok(w)
}

/// Reinsurer's multiplier from `E[Z(T) I_R(y Z(T))] = v_R + xi theta P(0)`.
pub fn reinsurer_lagrange(
    theta: f64,
    xi: f64,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<f64> {
    let w = reinsurer_prepared(theta, xi, utility, terms, params)?;
    Ok(match *utility {
        Utility::Power { b } => {
            let m = power_moment(params, DualShift::ZERO, b, terms.contract.maturity);
            (w / m).powf(b - 1.0)
        }
        _ => 1.0 / w,
    })
}

pub fn reinsurer_budget_residual(
    y: f64,
    theta: f64,
    xi: f64,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<f64> {
    let p0 = put_price(0.0, terms.contract.benchmark0, &terms.contract, params)?.price;
    let claim = match *utility {
        Utility::Power { b } => {
            y.powf(1.0 / (b - 1.0)) * power_moment(params, DualShift::ZERO, b, terms.contract.maturity)
        }
        Utility::Log => 1.0 / y,
        Utility::Hara { .. } => return Err(Error::Unsupported("HARA utility for the reinsurer".into())),
    };
    Ok((claim - terms.v_r - xi * theta * p0) / terms.v_r)
}

/// Reinsurer's optimal expected utility when selling `xi` puts at loading `theta`.
pub fn reinsurer_value(
    theta: f64,
    xi: f64,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<f64> {
    let w = reinsurer_prepared(theta, xi, utility, terms, params)?;
    let horizon = terms.contract.maturity;
    Ok(match *utility {
        Utility::Power { b } => {
            let m = power_moment(params, DualShift::ZERO, b, horizon);
            w.powf(b) * m.powf(1.0 - b) / b
        }
        _ => {
            let g = params.market_price_of_risk();
            w.ln() + (params.r() + 0.5 * (g[0] * g[0] + g[1] * g[1])) * horizon
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackelbergEquilibrium {
    pub theta_star: f64,
    pub xi_star: f64,
    pub y_i_star: f64,
    pub y_r_star: f64,
    pub p0: f64,
    pub p0_aux: f64,
    pub lambda: DualShift,
    pub pi_i_0: Vec2,
    pub pi_r_0: Vec2,
    pub best_response: BestResponse,
    /// Set when the put is worthless and the loading has no economic effect.
    pub degenerate: bool,
}

impl StackelbergEquilibrium {
    /// Loading at which the insurer is indifferent, `(P_aux(0) - P(0)) / P(0)`.
    pub fn critical_loading(&self) -> f64 {
        (self.p0_aux - self.p0) / self.p0
    }
}

/// Both parties' optimal controls at an arbitrary admissible pair of actions.
/// `best_response` records the insurer's reaction to `theta`, which need not
/// equal `xi`.
pub fn evaluate_profile(
    theta: f64,
    xi: f64,
    utility_i: &Utility,
    utility_r: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<StackelbergEquilibrium> {
    let lambda = optimal_dual_shift(params);
    let (p0, p0_aux) = initial_prices(terms, params, lambda)?;
    let y_i_star = insurer_lagrange(xi, theta, utility_i, terms, params)?;
    let y_r_star = reinsurer_lagrange(theta, xi, utility_r, terms, params)?;
    let best_response = insurer_best_response(theta, utility_i, terms, params)?;
    let mut eq = StackelbergEquilibrium {
        theta_star: theta,
        xi_star: xi,
        y_i_star,
        y_r_star,
        p0,
        p0_aux,
        lambda,
        pi_i_0: [0.0; 2],
        pi_r_0: [0.0; 2],
        best_response,
        degenerate: p0 <= 0.0,
    };
    let s0 = MarketState::initial(&terms.contract);
    eq.pi_i_0 = insurer_portfolio(&s0, &eq, utility_i, terms, params)?.total;
    eq.pi_r_0 = reinsurer_portfolio(&s0, &eq, utility_r, terms, params)?;
    Ok(eq)
}

/// The leader anticipates the follower's best response and raises the loading
/// up to the indifference level (or the cap), where the follower still buys `xi_bar`.
pub fn solve_equilibrium(
    utility_i: &Utility,
    utility_r: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<StackelbergEquilibrium> {
    terms.validate(params)?;
    let lambda = optimal_dual_shift(params);
    let (p0, pa) = initial_prices(terms, params, lambda)?;
    if p0 <= 0.0 {
        warn!("put is worthless (P(0) = {p0}); equilibrium is degenerate");
        return evaluate_profile(terms.theta_max, 0.0, utility_i, utility_r, terms, params);
    }
    let critical = (pa - p0) / p0;
    let theta = critical.clamp(0.0, terms.theta_max);
    let response = insurer_best_response(theta, utility_i, terms, params)?;
    evaluate_profile(theta, response.selected(), utility_i, utility_r, terms, params)
}

/// Equilibrium found by exhaustive search over a `theta x xi` lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeEquilibrium {
    pub theta: f64,
    pub xi: f64,
    pub theta_step: f64,
    pub xi_step: f64,
}

/// For every lattice loading the follower picks the lattice amount maximizing
/// `nu` (ties go to the amount the leader prefers); the leader then picks the
/// loading maximizing its own value.
pub fn brute_force_equilibrium(
    utility_i: &Utility,
    utility_r: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
    points: usize,
) -> Result<LatticeEquilibrium> {
    if points < 2 {
        return Err(invalid("points", "lattice needs at least 2 points per axis"));
    }
    terms.validate(params)?;
    let theta_step = terms.theta_max / (points - 1) as f64;
    let xi_step = terms.xi_bar / (points - 1) as f64;
    let tie = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..points {
        let theta = theta_step * i as f64;
        let mut follower: Option<(f64, f64, f64)> = None;
        for j in 0..points {
            let xi = xi_step * j as f64;
            let nu = insurer_value_nu(xi, theta, utility_i, terms, params)?;
            let leader = reinsurer_value(theta, xi, utility_r, terms, params)?;
            follower = match follower {
                None => Some((xi, nu, leader)),
                Some((_, best_nu, best_leader))
                    if nu > best_nu && !tie(nu, best_nu) || tie(nu, best_nu) && leader > best_leader =>
                {
                    Some((xi, nu, leader))
                }
                keep => keep,
            };
        }
        let (xi, _, leader) = follower.expect("non-empty lattice");
        if best.is_none_or(|(_, _, v)| leader > v) {
            best = Some((theta, xi, leader));
        }
    }
    let (theta, xi, _) = best.expect("non-empty lattice");
    Ok(LatticeEquilibrium { theta, xi, theta_step, xi_step })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> (MarketParams, ContractTerms) {
        (MarketParams::table1(), ContractTerms::table1())
    }

    const POWER: Utility = Utility::Power { b: -9.0 };

    #[test]
    fn utility_validation() {
        assert!(Utility::power(0.0).is_err());
        assert!(Utility::power(1.0).is_err());
        assert_eq!(Utility::from_rra(1.0).unwrap(), Utility::Log);
        assert_eq!(Utility::from_rra(10.0).unwrap(), Utility::Power { b: -9.0 });
        assert!(matches!(Utility::Hara { a: -5.0, b: -2.0 }.value(4.0), Err(Error::HaraDomain(_))));
    }

    #[test]
    fn inverse_marginal_inverts_marginal() {
        for u in [POWER, Utility::Log, Utility::Hara { a: 3.0, b: 0.5 }] {
            let x = 7.5;
            let b = u.exponent();
            let marginal = match u {
                Utility::Hara { a, .. } => (x + a).powf(b - 1.0),
                Utility::Log => 1.0 / x,
                Utility::Power { .. } => x.powf(b - 1.0),
            };
            assert!((u.inverse_marginal(marginal) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn no_reinsurance_multipliers() {
        let (p, t) = base();
        let m = kernel_moment(&p, optimal_dual_shift(&p), 0.9, 10.0);
        let y = insurer_lagrange(0.0, 0.2, &POWER, &t, &p).unwrap();
        assert!((y / (100f64.powf(-10.0) * m.powf(10.0)) - 1.0).abs() < 1e-12);
        let y = insurer_lagrange(0.0, 0.2, &Utility::Log, &t, &p).unwrap();
        assert_eq!(y, 0.01);
        let m0 = kernel_moment(&p, DualShift::ZERO, 0.9, 10.0);
        let y = reinsurer_lagrange(0.3, 0.0, &POWER, &t, &p).unwrap();
        assert!((y / (100f64 / m0).powf(-10.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn budgets_resubstitute() {
        let (p, t) = base();
        let eq = solve_equilibrium(&POWER, &POWER, &t, &p).unwrap();
        for u in [POWER, Utility::Log, Utility::Hara { a: 10.0, b: -9.0 }] {
            for (xi, th) in [(1.5, eq.theta_star), (0.7, 0.1), (0.0, 0.4)] {
                let y = insurer_lagrange(xi, th, &u, &t, &p).unwrap();
                assert!(insurer_budget_residual(y, xi, th, &u, &t, &p).unwrap().abs() < 1e-10);
            }
        }
        for u in [POWER, Utility::Log] {
            let y = reinsurer_lagrange(eq.theta_star, 1.5, &u, &t, &p).unwrap();
            assert!(reinsurer_budget_residual(y, eq.theta_star, 1.5, &u, &t, &p).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn best_responses_base_case() {
        let (p, t) = base();
        assert_eq!(insurer_best_response(0.10, &POWER, &t, &p).unwrap(), BestResponse::Unique { xi: 1.5 });
        assert_eq!(insurer_best_response(0.30, &POWER, &t, &p).unwrap(), BestResponse::Unique { xi: 0.0 });
        let eq = solve_equilibrium(&POWER, &POWER, &t, &p).unwrap();
        assert_eq!(eq.best_response, BestResponse::Indifferent { lower: 0.0, upper: 1.5, selected: 1.5 });
    }

    #[test]
    fn nu_increases_below_critical_loading() {
        let (p, t) = base();
        let lo = insurer_value_nu(0.0, 0.0, &POWER, &t, &p).unwrap();
        let hi = insurer_value_nu(1.5, 0.0, &POWER, &t, &p).unwrap();
        assert!(hi > lo);
    }

    #[test]
    fn reinsurer_multiplier_falls_with_amount() {
        let (p, t) = base();
        let ys: Vec<f64> = (0..=15).map(|j| reinsurer_lagrange(0.2, 0.1 * j as f64, &POWER, &t, &p).unwrap()).collect();
        assert!(ys.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn base_case_equilibrium() {
        let (p, t) = base();
        let eq = solve_equilibrium(&POWER, &POWER, &t, &p).unwrap();
        assert!((eq.theta_star - 0.2086).abs() < 0.5e-4);
        assert_eq!(eq.xi_star, 1.5);
        assert!((eq.pi_i_0[0] - 0.3169).abs() < 0.5e-4 && eq.pi_i_0[1].abs() < 0.5e-4);
        assert!((eq.pi_r_0[0] - 0.3167).abs() < 0.5e-4);
        assert!((eq.pi_r_0[1] + 0.1642).abs() < 0.5e-4);
        assert!(eq.y_i_star > 0.0 && eq.y_r_star > 0.0);
    }

    #[test]
    fn cap_binds() {
        let (p, mut t) = base();
        t.theta_max = 0.10;
        let eq = solve_equilibrium(&POWER, &POWER, &t, &p).unwrap();
        assert_eq!(eq.theta_star, 0.10);
        assert_eq!(eq.xi_star, 1.5);
        assert_eq!(eq.best_response, BestResponse::Unique { xi: 1.5 });
    }

    #[test]
    fn unconstrained_market_has_zero_loading() {
        let (r, mu1, s1, s2, rho) = (0.0102, 0.1752, 0.2366, 0.2198, 0.8012);
        let p = MarketParams::new(r, mu1, r + s2 * rho * (mu1 - r) / s1, s1, s2, rho).unwrap();
        let eq = solve_equilibrium(&POWER, &POWER, &ContractTerms::table1(), &p).unwrap();
        assert!(eq.theta_star.abs() < 1e-12);
    }

    #[test]
    fn worthless_put_is_degenerate() {
        let (p, mut t) = base();
        t.contract.guarantee = 0.0;
        let eq = solve_equilibrium(&POWER, &POWER, &t, &p).unwrap();
        assert!(eq.degenerate);
        assert_eq!(eq.theta_star, t.theta_max);
        assert_eq!(eq.xi_star, 0.0);
    }

    #[test]
    fn rejects_unaffordable_cap() {
        let (p, mut t) = base();
        t.xi_bar = 30.0;
        assert!(matches!(
            solve_equilibrium(&POWER, &POWER, &t, &p),
            Err(Error::InvalidParameter { name: "xi_bar", .. })
        ));
    }

    #[test]
    fn hara_reinsurer_is_unsupported() {
        let (p, t) = base();
        let hara = Utility::Hara { a: 1.0, b: -2.0 };
        assert!(matches!(solve_equilibrium(&POWER, &hara, &t, &p), Err(Error::Unsupported(_))));
    }
}
