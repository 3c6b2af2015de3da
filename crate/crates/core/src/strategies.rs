//! Optimal wealth processes and relative portfolios of both parties, evaluated
//! from their closed-form martingale representations at a given market state.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{ContractTerms, StackelbergEquilibrium, Utility};
use crate::error::{Error, Result};
use crate::market::{kernel_moment, DualShift, MarketParams, Vec2};
use crate::option::{norm_cdf, put_price, put_price_auxiliary, replication_strategy, ReinsuranceContract};

/// Every state variable the closed-form strategies depend on at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub t: f64,
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub v_b: f64,
    /// Pricing kernel of the original market.
    pub z: f64,
    /// Pricing kernel of the auxiliary market.
    pub z_aux: f64,
}

impl MarketState {
    pub fn initial(contract: &ReinsuranceContract) -> Self {
        Self { t: 0.0, s0: 1.0, s1: 1.0, s2: 1.0, v_b: contract.benchmark0, z: 1.0, z_aux: 1.0 }
    }

    fn check(&self, horizon: f64) -> Result<f64> {
        if !(self.t >= 0.0) || self.t > horizon {
            return Err(Error::TimeOutOfRange { t: self.t, horizon });
        }
        let levels = [self.s0, self.s1, self.s2, self.v_b, self.z, self.z_aux];
        if levels.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "state",
                reason: format!("levels must be positive and finite, got {self:?}"),
            });
        }
        Ok(horizon - self.t)
    }
}

/// Insurer's relative portfolio split into its economic components.
///
/// `subsistence_correction` is non-zero only for HARA utility, where the
/// shift `a` is financed by a zero bond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioDecomposition {
    pub merton: Vec2,
    pub constraint_correction: Vec2,
    pub reinsurance_correction: Vec2,
    pub subsistence_correction: Vec2,
    pub total: Vec2,
}

/// `(sigma sigma^T)^{-1} (mu + lambda - r 1) / (1 - b)`, with coefficient 1 for log utility.
pub fn merton_portfolio(utility: &Utility, params: &MarketParams, lambda: DualShift) -> Vec2 {
    let ex = params.excess_drift();
    let y = params.covariance_solve([ex[0], ex[1] + lambda.lambda2]);
    let c = utility.merton_coefficient();
    [c * y[0], c * y[1]]
}

/// Time-`t` value of the claim `I(y Z(T))` with `Z` a kernel at level `z`,
/// i.e. `z^{-1} E[Z(T) I(y Z(T)) | F_t]`.
fn unhedged_claim_value(utility: &Utility, params: &MarketParams, lambda: DualShift, y: f64, z: f64, tau: f64) -> f64 {
    match *utility {
        Utility::Log => 1.0 / (y * z),
        Utility::Power { b } => (y * z).powf(1.0 / (b - 1.0)) * kernel_moment(params, lambda, b / (b - 1.0), tau),
        Utility::Hara { a, b } => {
            (y * z).powf(1.0 / (b - 1.0)) * kernel_moment(params, lambda, b / (b - 1.0), tau)
                - a * (-params.r() * tau).exp()
        }
    }
}

/// Optimal insurer wealth `V_I(t)`, net of the reinsurance claim's auxiliary value.
pub fn insurer_wealth(
    state: &MarketState,
    eq: &StackelbergEquilibrium,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<f64> {
    let tau = state.check(terms.contract.maturity)?;
    let claim = unhedged_claim_value(utility, params, eq.lambda, eq.y_i_star, state.z_aux, tau);
    let put_aux = put_price_auxiliary(state.t, state.v_b, &terms.contract, params, eq.lambda)?;
    Ok(claim - eq.xi_star * put_aux)
}

pub fn insurer_portfolio(
    state: &MarketState,
    eq: &StackelbergEquilibrium,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<PortfolioDecomposition> {
    let wealth = insurer_wealth(state, eq, utility, terms, params)?;
    if !(wealth > 0.0) {
        return Err(Error::NonPositiveWealth { party: "insurer", wealth });
    }
    let tau = terms.contract.maturity - state.t;
    let put_aux = put_price_auxiliary(state.t, state.v_b, &terms.contract, params, eq.lambda)?;
    let floor = match *utility {
        Utility::Hara { a, .. } => a * (-params.r() * tau).exp(),
        _ => 0.0,
    };
    if !(wealth + floor > 0.0) {
        return Err(Error::HaraDomain(wealth + floor));
    }
    let shifted = merton_portfolio(utility, params, eq.lambda);
    let merton = merton_portfolio(utility, params, DualShift::ZERO);
    let lam = params.covariance_solve(eq.lambda.components());
    let c = utility.merton_coefficient();
    let reins = eq.xi_star * put_aux / wealth;
    let subs = floor / wealth;
    let scale = (wealth + eq.xi_star * put_aux + floor) / wealth;
    Ok(PortfolioDecomposition {
        merton,
        constraint_correction: [c * lam[0], c * lam[1]],
        reinsurance_correction: [shifted[0] * reins, shifted[1] * reins],
        subsistence_correction: [shifted[0] * subs, shifted[1] * subs],
        total: [shifted[0] * scale, shifted[1] * scale],
    })
}

fn reinsurer_cushion(
    state: &MarketState,
    eq: &StackelbergEquilibrium,
    utility: &Utility,
    params: &MarketParams,
    tau: f64,
) -> Result<f64> {
    if matches!(utility, Utility::Hara { .. }) {
        return Err(Error::Unsupported("HARA utility for the reinsurer".into()));
    }
    Ok(unhedged_claim_value(utility, params, DualShift::ZERO, eq.y_r_star, state.z, tau))
}

/// Optimal reinsurer wealth `V_R(t)`: the cushion plus the written put's fair value.
pub fn reinsurer_wealth(
    state: &MarketState,
    eq: &StackelbergEquilibrium,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<f64> {
    let tau = state.check(terms.contract.maturity)?;
    let cushion = reinsurer_cushion(state, eq, utility, params, tau)?;
    let put = put_price(state.t, state.v_b, &terms.contract, params)?.price;
    Ok(cushion + eq.xi_star * put)
}

/// Generalized CPPI: the Merton fraction of the cushion plus the put hedge.
pub fn reinsurer_portfolio(
    state: &MarketState,
    eq: &StackelbergEquilibrium,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<Vec2> {
    let wealth = reinsurer_wealth(state, eq, utility, terms, params)?;
    if !(wealth > 0.0) {
        return Err(Error::NonPositiveWealth { party: "reinsurer", wealth });
    }
    let quote = put_price(state.t, state.v_b, &terms.contract, params)?;
    let cushion = wealth - eq.xi_star * quote.price;
    let merton = merton_portfolio(utility, params, DualShift::ZERO);
    let hedge = if terms.contract.guarantee == 0.0 {
        0.0
    } else {
        terms.contract.pi_cm * state.v_b * (norm_cdf(quote.d_plus) - 1.0) * eq.xi_star / wealth
    };
    Ok([merton[0] * cushion / wealth, merton[1] * cushion / wealth + hedge])
}

/// Share holdings `(S0, S1, S2)` of the reinsurer, split into the Merton
/// strategy on the cushion and `xi` units of the put's replicating strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReinsurerHoldings {
    pub cushion: [f64; 3],
    pub hedge: [f64; 3],
    pub total: [f64; 3],
}

pub fn reinsurer_holdings(
    state: &MarketState,
    eq: &StackelbergEquilibrium,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<ReinsurerHoldings> {
    let tau = state.check(terms.contract.maturity)?;
    let cushion_value = reinsurer_cushion(state, eq, utility, params, tau)?;
    let m = merton_portfolio(utility, params, DualShift::ZERO);
    let cushion = [
        cushion_value * (1.0 - m[0] - m[1]) / state.s0,
        cushion_value * m[0] / state.s1,
        cushion_value * m[1] / state.s2,
    ];
    let psi = replication_strategy(state.t, state.v_b, state.s0, state.s2, &terms.contract, params)?;
    let hedge = psi.map(|v| eq.xi_star * v);
    let total = [cushion[0] + hedge[0], cushion[1] + hedge[1], cushion[2] + hedge[2]];
    Ok(ReinsurerHoldings { cushion, hedge, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{evaluate_profile, solve_equilibrium};
    use crate::market::{optimal_dual_shift, terminal_draw};

    fn base() -> (MarketParams, ContractTerms, Utility) {
        (MarketParams::table1(), ContractTerms::table1(), Utility::Power { b: -9.0 })
    }

    #[test]
    fn merton_base_case() {
        let (p, _, u) = base();
        let m = merton_portfolio(&u, &p, optimal_dual_shift(&p));
        assert!((m[0] - 0.1650 / (10.0 * 0.2366 * 0.2366)).abs() < 1e-14);
        assert!(m[1].abs() < 1e-14);
        assert!((m[0] - 0.2948).abs() < 0.5e-4);
    }

    #[test]
    fn merton_vanishes_without_premium() {
        let p = MarketParams::new(0.02, 0.02 + 1e-13, 0.02 + 1e-13, 0.2, 0.3, 0.4).unwrap();
        let m = merton_portfolio(&Utility::Log, &p, DualShift::ZERO);
        assert!(m[0].abs() < 1e-10 && m[1].abs() < 1e-10);
    }

    #[test]
    fn initial_wealths_match_budgets() {
        let (p, t, u) = base();
        let eq = solve_equilibrium(&u, &u, &t, &p).unwrap();
        let s0 = MarketState::initial(&t.contract);
        let vi = insurer_wealth(&s0, &eq, &u, &t, &p).unwrap();
        let vr = reinsurer_wealth(&s0, &eq, &u, &t, &p).unwrap();
        let cost = eq.xi_star * (1.0 + eq.theta_star) * eq.p0;
        assert!(((vi - (t.v_i - cost)) / t.v_i).abs() < 1e-10);
        assert!(((vr - (t.v_r + cost)) / t.v_r).abs() < 1e-10);
    }

    #[test]
    fn decomposition_closes_and_respects_constraint() {
        let (p, t, _) = base();
        for u in [Utility::Power { b: -9.0 }, Utility::Log, Utility::Hara { a: 10.0, b: -9.0 }] {
            let eq = solve_equilibrium(&u, &Utility::Power { b: -9.0 }, &t, &p).unwrap();
            for path in 0..20 {
                let mut s = terminal_draw(&p, &t.contract, 7, path, false);
                s.t = 5.0;
                let d = insurer_portfolio(&s, &eq, &u, &t, &p).unwrap();
                for i in 0..2 {
                    let sum = d.merton[i]
                        + d.constraint_correction[i]
                        + d.reinsurance_correction[i]
                        + d.subsistence_correction[i];
                    assert!((sum - d.total[i]).abs() < 1e-12);
                }
                assert!(d.total[1].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn no_reinsurance_unconstrained_is_merton() {
        let (r, mu1, s1, s2, rho) = (0.01, 0.12, 0.2, 0.25, 0.5);
        let p = MarketParams::new(r, mu1, r + s2 * rho * (mu1 - r) / s1, s1, s2, rho).unwrap();
        let (_, t, u) = base();
        let eq = evaluate_profile(0.1, 0.0, &u, &u, &t, &p).unwrap();
        let d = insurer_portfolio(&MarketState::initial(&t.contract), &eq, &u, &t, &p).unwrap();
        let m = merton_portfolio(&u, &p, DualShift::ZERO);
        assert_eq!(d.reinsurance_correction, [0.0, 0.0]);
        assert!(d.constraint_correction[1].abs() < 1e-14);
        assert!((d.total[0] - m[0]).abs() < 1e-14);
    }

    #[test]
    fn zero_guarantee_reinsurer_is_merton() {
        let (p, mut t, u) = base();
        t.contract.guarantee = 0.0;
        let eq = solve_equilibrium(&u, &u, &t, &p).unwrap();
        let pr = reinsurer_portfolio(&MarketState::initial(&t.contract), &eq, &u, &t, &p).unwrap();
        assert_eq!(pr, merton_portfolio(&u, &p, DualShift::ZERO));
    }

    #[test]
    fn holdings_reproduce_relative_portfolio() {
        let (p, t, u) = base();
        let eq = solve_equilibrium(&u, &u, &t, &p).unwrap();
        let contract = ReinsuranceContract { maturity: 5.0, ..t.contract };
        for path in 0..50 {
            let mut s = terminal_draw(&p, &contract, 11, path, false);
            s.s0 = (p.r() * 5.0).exp();
            let h = reinsurer_holdings(&s, &eq, &u, &t, &p).unwrap();
            let v = reinsurer_wealth(&s, &eq, &u, &t, &p).unwrap();
            let pr = reinsurer_portfolio(&s, &eq, &u, &t, &p).unwrap();
            let value = h.total[0] * s.s0 + h.total[1] * s.s1 + h.total[2] * s.s2;
            assert!(((value - v) / v).abs() < 1e-10);
            assert!((h.total[1] * s.s1 / v - pr[0]).abs() < 1e-10);
            assert!((h.total[2] * s.s2 / v - pr[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn terminal_identities_hold() {
        let (p, t, u) = base();
        let eq = solve_equilibrium(&u, &u, &t, &p).unwrap();
        for path in 0..200 {
            let s = terminal_draw(&p, &t.contract, 3, path, false);
            let vi = insurer_wealth(&s, &eq, &u, &t, &p).unwrap();
            let vr = reinsurer_wealth(&s, &eq, &u, &t, &p).unwrap();
            let payoff = t.contract.payoff(s.v_b);
            let ii = u.inverse_marginal(eq.y_i_star * s.z_aux);
            let ir = u.inverse_marginal(eq.y_r_star * s.z);
            assert!(((vi + eq.xi_star * payoff - ii) / ii).abs() < 1e-10);
            assert!(((vr - eq.xi_star * payoff - ir) / ir).abs() < 1e-10);
            assert!(vi > 0.0 && vr - eq.xi_star * payoff >= 0.0);
        }
    }

    #[test]
    fn cushion_scaling_keeps_hedge() {
        let (p, t, u) = base();
        let mut eq = solve_equilibrium(&u, &u, &t, &p).unwrap();
        let s = MarketState::initial(&t.contract);
        let full = reinsurer_holdings(&s, &eq, &u, &t, &p).unwrap();
        eq.y_r_star *= 1e100;
        let thin = reinsurer_holdings(&s, &eq, &u, &t, &p).unwrap();
        assert!(thin.cushion[1].abs() < 1e-6 * full.cushion[1].abs());
        assert_eq!(thin.hedge, full.hedge);
    }
}
