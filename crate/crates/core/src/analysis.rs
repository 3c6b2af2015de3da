//! Wealth-equivalent utility changes (WEUC), discount selection, the
//! reinsurer's incentive to sell at a discount, and sensitivity sweeps.
//!
//! Every optimal value function of the CRRA family has the affine form
//! `U(v + d) K` in the party's initial wealth `v` (for power utility
//! `(v + d)^b K / b`, for log `ln(v + d) + K`), which makes the WEUC an
//! explicit inversion. Only constant-mix strategies that also hold puts, or
//! HARA constant-mix strategies, fall back to sampling.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    evaluate_profile, response_to_loading, solve_equilibrium, ContractTerms, StackelbergEquilibrium, Utility,
};
use crate::error::{invalid, Error, Result};
use crate::market::{kernel_moment, optimal_dual_shift, terminal_draw, DualShift, MarketParams, Vec2};
use crate::option::{put_price, put_price_auxiliary};
use crate::simulation::loss_probability;
use crate::solve::{bisect, compensated_sum};
use crate::strategies::merton_portfolio;

/// Paths and seed of the sampled fallback for value functions without a closed form.
pub const FALLBACK_PATHS: usize = 200_000;
pub const FALLBACK_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "weights", rename_all = "snake_case")]
pub enum InsurerStrategy {
    /// Optimal constrained investment given the reinsurance position.
    Optimal,
    /// Fixed relative portfolio in `(S1, S2)`, rebalanced continuously.
    ConstantMix(Vec2),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReinsurerStrategy {
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Insurer,
    Reinsurer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionCombination {
    pub theta_hat: f64,
    pub xi_hat: f64,
    pub insurer: InsurerStrategy,
    pub reinsurer: ReinsurerStrategy,
}

impl ActionCombination {
    pub fn new(theta_hat: f64, xi_hat: f64, insurer: InsurerStrategy) -> Self {
        Self { theta_hat, xi_hat, insurer, reinsurer: ReinsurerStrategy::Optimal }
    }

    pub fn equilibrium(eq: &StackelbergEquilibrium) -> Self {
        Self::new(eq.theta_star, eq.xi_star, InsurerStrategy::Optimal)
    }

    /// Loading discounted to `alpha * theta*`, with the insurer's best response to it.
    pub fn discounted(alpha: f64, eq: &StackelbergEquilibrium, terms: &ContractTerms) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(invalid("alpha", format!("must lie in [0, 1], got {alpha}")));
        }
        let theta = alpha * eq.theta_star;
        let xi = response_to_loading(theta, eq.p0, eq.p0_aux, terms.xi_bar).selected();
        Ok(Self::new(theta, xi, InsurerStrategy::Optimal))
    }

    /// No reinsurance; the loading is irrelevant and set to 0.
    pub fn without_reinsurance(insurer: InsurerStrategy) -> Self {
        Self::new(0.0, 0.0, insurer)
    }

    fn check(&self, terms: &ContractTerms) -> Result<()> {
        if !(self.theta_hat >= 0.0 && self.theta_hat <= terms.theta_max * (1.0 + 1e-12) + 1e-12) {
            return Err(invalid("theta_hat", format!("must lie in [0, {}], got {}", terms.theta_max, self.theta_hat)));
        }
        if !(self.xi_hat >= 0.0 && self.xi_hat <= terms.xi_bar * (1.0 + 1e-12)) {
            return Err(invalid("xi_hat", format!("must lie in [0, {}], got {}", terms.xi_bar, self.xi_hat)));
        }
        if let InsurerStrategy::ConstantMix(pi) = self.insurer {
            if !(pi[0].is_finite() && pi[1].is_finite()) {
                return Err(invalid("constant_mix", "weights must be finite"));
            }
        }
        Ok(())
    }
}

/// Relative change of initial wealth under which the alternative actions give
/// the party the reference expected utility. Positive means the reference is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeucResult {
    pub value: f64,
    pub party: Party,
}

impl WeucResult {
    pub fn basis_points(&self) -> f64 {
        self.value * 1e4
    }

    /// Basis points rounded half away from zero to `decimals` places.
    pub fn format_bp(&self, decimals: u32) -> String {
        format!("{:.*}", decimals as usize, round_half_away(self.basis_points(), decimals))
    }
}

pub fn round_half_away(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (x * scale).round() / scale
}

/// Expected utility as a function of the party's initial wealth.
enum ValueForm {
    /// `U(v + d) K`, written out per utility.
    Affine { utility: Utility, d: f64, k: f64 },
    /// Terminal wealth `(v - cost) g_i + xi p_i` averaged over fixed samples.
    Sampled { utility: Utility, cost: f64, xi: f64, growth: Vec<f64>, payoff: Vec<f64> },
}

impl ValueForm {
    fn eval(&self, v: f64) -> Result<f64> {
        match self {
            Self::Affine { utility, d, k } => {
                let w = v + d;
                match *utility {
                    Utility::Log => {
                        if !(w > 0.0) {
                            return Err(Error::NonPositiveWealth { party: "effective", wealth: w });
                        }
                        Ok(w.ln() + k)
                    }
                    Utility::Power { b } | Utility::Hara { b, .. } => {
                        if !(w > 0.0) {
                            return Err(Error::NonPositiveWealth { party: "effective", wealth: w });
                        }
                        Ok(w.powf(b) * k / b)
                    }
                }
            }
            Self::Sampled { utility, cost, xi, growth, payoff } => {
                let values = growth
                    .iter()
                    .zip(payoff)
                    .map(|(g, p)| utility.value((v - cost) * g + xi * p))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(compensated_sum(&values) / values.len() as f64)
            }
        }
    }

    /// Initial wealth reaching expected utility `target`, when explicit.
    fn invert(&self, target: f64) -> Option<f64> {
        match self {
            Self::Affine { utility, d, k } => Some(match *utility {
                Utility::Log => (target - k).exp() - d,
                Utility::Power { b } | Utility::Hara { b, .. } => (b * target / k).powf(1.0 / b) - d,
            }),
            Self::Sampled { .. } => None,
        }
    }
}

fn insurer_form(
    combo: &ActionCombination,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<ValueForm> {
    let horizon = terms.contract.maturity;
    let c = &terms.contract;
    let p0 = put_price(0.0, c.benchmark0, c, params)?.price;
    let cost = combo.xi_hat * (1.0 + combo.theta_hat) * p0;
    let discount = (-params.r() * horizon).exp();
    match (combo.insurer, *utility) {
        (InsurerStrategy::Optimal, _) => {
            let lambda = optimal_dual_shift(params);
            let pa = put_price_auxiliary(0.0, c.benchmark0, c, params, lambda)?;
            let d = combo.xi_hat * pa - cost;
            Ok(match *utility {
                Utility::Log => {
                    let g = params.shifted_price_of_risk(lambda);
                    let k = (params.r() + 0.5 * (g[0] * g[0] + g[1] * g[1])) * horizon;
                    ValueForm::Affine { utility: *utility, d, k }
                }
                Utility::Power { b } => {
                    let m = kernel_moment(params, lambda, b / (b - 1.0), horizon);
                    ValueForm::Affine { utility: *utility, d, k: m.powf(1.0 - b) }
                }
                Utility::Hara { a, b } => {
                    let m = kernel_moment(params, lambda, b / (b - 1.0), horizon);
                    ValueForm::Affine { utility: *utility, d: d + a * discount, k: m.powf(1.0 - b) }
                }
            })
        }
        (InsurerStrategy::ConstantMix(pi), Utility::Power { b }) if combo.xi_hat == 0.0 => {
            let (drift, var) = constant_mix_moments(params, pi);
            let k = (b * drift * horizon + 0.5 * b * b * var * horizon).exp();
            Ok(ValueForm::Affine { utility: *utility, d: 0.0, k })
        }
        (InsurerStrategy::ConstantMix(pi), Utility::Log) if combo.xi_hat == 0.0 => {
            let (drift, _) = constant_mix_moments(params, pi);
            Ok(ValueForm::Affine { utility: *utility, d: 0.0, k: drift * horizon })
        }
        (InsurerStrategy::ConstantMix(pi), _) => {
            warn!(
                "no closed form for constant-mix {pi:?} with xi = {} under {utility:?}; sampling {FALLBACK_PATHS} paths",
                combo.xi_hat
            );
            let (growth, payoff) = constant_mix_samples(params, terms, pi);
            Ok(ValueForm::Sampled { utility: *utility, cost, xi: combo.xi_hat, growth, payoff })
        }
    }
}

/// Log-growth drift `r + pi'(mu - r) - |sigma' pi|^2 / 2` and variance `|sigma' pi|^2`.
fn constant_mix_moments(params: &MarketParams, pi: Vec2) -> (f64, f64) {
    let ex = params.excess_drift();
    let l = params.sigma_t_mul(pi);
    let var = l[0] * l[0] + l[1] * l[1];
    (params.r() + pi[0] * ex[0] + pi[1] * ex[1] - 0.5 * var, var)
}

fn constant_mix_samples(params: &MarketParams, terms: &ContractTerms, pi: Vec2) -> (Vec<f64>, Vec<f64>) {
    let c = &terms.contract;
    let horizon = c.maturity;
    let (s1v, s2v) = (params.sigma1().powi(2), params.sigma2().powi(2));
    let (_, var) = constant_mix_moments(params, pi);
    let base = (1.0 - pi[0] - pi[1]) * params.r() * horizon + 0.5 * (pi[0] * s1v + pi[1] * s2v) * horizon
        - 0.5 * var * horizon;
    (0..FALLBACK_PATHS)
        .into_par_iter()
        .map(|path| {
            let s = terminal_draw(params, c, FALLBACK_SEED, path, false);
            let g = (base + pi[0] * s.s1.ln() + pi[1] * s.s2.ln()).exp();
            (g, c.payoff(s.v_b))
        })
        .unzip()
}

fn reinsurer_form(
    combo: &ActionCombination,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<ValueForm> {
    let horizon = terms.contract.maturity;
    let c = &terms.contract;
    let p0 = put_price(0.0, c.benchmark0, c, params)?.price;
    let d = combo.xi_hat * combo.theta_hat * p0;
    match *utility {
        Utility::Power { b } => {
            let m = kernel_moment(params, DualShift::ZERO, b / (b - 1.0), horizon);
            Ok(ValueForm::Affine { utility: *utility, d, k: m.powf(1.0 - b) })
        }
        Utility::Log => {
            let g = params.market_price_of_risk();
            let k = (params.r() + 0.5 * (g[0] * g[0] + g[1] * g[1])) * horizon;
            Ok(ValueForm::Affine { utility: *utility, d, k })
        }
        Utility::Hara { .. } => Err(Error::Unsupported("HARA utility for the reinsurer".into())),
    }
}

fn value_form(
    combo: &ActionCombination,
    party: Party,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<ValueForm> {
    utility.validate()?;
    combo.check(terms)?;
    match party {
        Party::Insurer => insurer_form(combo, utility, terms, params),
        Party::Reinsurer => reinsurer_form(combo, utility, terms, params),
    }
}

fn initial_wealth(party: Party, terms: &ContractTerms) -> f64 {
    match party {
        Party::Insurer => terms.v_i,
        Party::Reinsurer => terms.v_r,
    }
}

/// Expected terminal utility of `party` under `combination`, at the party's
/// initial wealth from `terms`.
pub fn expected_utility_closed_form(
    combination: &ActionCombination,
    party: Party,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<f64> {
    value_form(combination, party, utility, terms, params)?.eval(initial_wealth(party, terms))
}

/// Relative initial-wealth change `w` with `EU_alt((1 + w) v) = EU_ref(v)`.
pub fn weuc(
    reference: &ActionCombination,
    alternative: &ActionCombination,
    party: Party,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<WeucResult> {
    let v = initial_wealth(party, terms);
    let target = value_form(reference, party, utility, terms, params)?.eval(v)?;
    let alt = value_form(alternative, party, utility, terms, params)?;
    let value = match alt.invert(target) {
        Some(v_equiv) => v_equiv / v - 1.0,
        None => bisect(
            |w| match alt.eval((1.0 + w) * v) {
                Ok(u) => u - target,
                Err(_) => -f64::MAX,
            },
            -0.99,
            10.0,
            1e-10,
        )?,
    };
    Ok(WeucResult { value, party })
}

/// Relative gap `EU_alt((1 + w) v) / EU_ref(v) - 1` after re-substituting a WEUC.
pub fn weuc_residual(
    result: &WeucResult,
    reference: &ActionCombination,
    alternative: &ActionCombination,
    utility: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<f64> {
    let v = initial_wealth(result.party, terms);
    let target = value_form(reference, result.party, utility, terms, params)?.eval(v)?;
    let got = value_form(alternative, result.party, utility, terms, params)?.eval((1.0 + result.value) * v)?;
    Ok(got / target - 1.0)
}

/// Rule by which the reinsurer picks the smallest admissible discount factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum DiscountCriterion {
    /// Reinsurer's WEUC of the equilibrium against the discount is at most this.
    WeucCap(f64),
    /// Loss probability exceeds `Q(1)` by at most this.
    LossProbIncrease(f64),
    /// Loss probability is at most this.
    MaxLossProb(f64),
}

/// Smallest `alpha` in `[0, 1]` meeting the criterion, to `1e-6`.
pub fn discount_select(
    criterion: DiscountCriterion,
    eq: &StackelbergEquilibrium,
    utility_r: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<f64> {
    // g(alpha) <= 0 is the constraint; g is decreasing in alpha.
    let reference = ActionCombination::equilibrium(eq);
    let g = |alpha: f64| -> Result<f64> {
        match criterion {
            DiscountCriterion::WeucCap(cap) => {
                let alt = ActionCombination::discounted(alpha, eq, terms)?;
                Ok(weuc(&reference, &alt, Party::Reinsurer, utility_r, terms, params)?.value - cap)
            }
            DiscountCriterion::LossProbIncrease(delta) => {
                let q1 = loss_probability(1.0, eq, utility_r, terms, params)?;
                Ok(loss_probability(alpha, eq, utility_r, terms, params)? - q1 - delta)
            }
            DiscountCriterion::MaxLossProb(p) => Ok(loss_probability(alpha, eq, utility_r, terms, params)? - p),
        }
    };
    let at_one = g(1.0)?;
    if at_one > 0.0 {
        return Err(Error::Infeasible(format!("{criterion:?} is violated even without a discount")));
    }
    if g(0.0)? <= 0.0 {
        return Ok(0.0);
    }
    let mut failure = None;
    let alpha = bisect(
        |a| match g(a) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        1.0,
        1e-6,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(alpha),
    }
}

/// Reinsurer's optimal expected utility when selling at `alpha * theta*`,
/// and when not selling at all.
pub fn reinsurer_incentive(
    alpha: f64,
    eq: &StackelbergEquilibrium,
    utility_r: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<(f64, f64)> {
    let selling = ActionCombination::discounted(alpha, eq, terms)?;
    let idle = ActionCombination::without_reinsurance(InsurerStrategy::Optimal);
    Ok((
        expected_utility_closed_form(&selling, Party::Reinsurer, utility_r, terms, params)?,
        expected_utility_closed_form(&idle, Party::Reinsurer, utility_r, terms, params)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    RraInsurer,
    RraReinsurer,
    Rate,
    Horizon,
    Guarantee,
}

/// Everything a sweep starts from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub market: MarketParams,
    pub terms: ContractTerms,
    pub utility_i: Utility,
    pub utility_r: Utility,
}

impl Scenario {
    pub fn table1() -> Self {
        let u = Utility::Power { b: -9.0 };
        Self { market: MarketParams::table1(), terms: ContractTerms::table1(), utility_i: u, utility_r: u }
    }

    pub fn solve(&self) -> Result<StackelbergEquilibrium> {
        solve_equilibrium(&self.utility_i, &self.utility_r, &self.terms, &self.market)
    }

    /// Sets the benchmark weight to the insurer's constrained Merton fraction
    /// in asset 1 without reinsurance.
    pub fn with_auto_pi_cm(mut self) -> Self {
        self.terms.contract.pi_cm = auto_pi_cm(&self.utility_i, &self.market);
        self
    }

    pub fn with_parameter(mut self, parameter: SweepParameter, value: f64) -> Result<Self> {
        match parameter {
            SweepParameter::RraInsurer => self.utility_i = Utility::from_rra(value)?,
            SweepParameter::RraReinsurer => self.utility_r = Utility::from_rra(value)?,
            SweepParameter::Rate => self.market = self.market.with_rate(value)?,
            SweepParameter::Horizon => {
                if !(value > 0.0) {
                    return Err(invalid("maturity", format!("must be > 0, got {value}")));
                }
                self.terms.contract.maturity = value;
            }
            SweepParameter::Guarantee => {
                if !(value >= 0.0) {
                    return Err(invalid("guarantee", format!("must be >= 0, got {value}")));
                }
                self.terms.contract.guarantee = value;
            }
        }
        Ok(self)
    }
}

/// `(mu1 - r) / ((1 - b_I) sigma1^2)`.
pub fn auto_pi_cm(utility_i: &Utility, params: &MarketParams) -> f64 {
    merton_portfolio(utility_i, params, optimal_dual_shift(params))[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub pi_cm: f64,
    pub theta_star: f64,
    pub xi_star: f64,
    pub pi_i_0: Vec2,
    pub pi_r_0: Vec2,
}

/// One equilibrium per grid value, in grid order. With `recompute_pi_cm` the
/// benchmark weight follows the insurer's Merton fraction at every point.
pub fn sensitivity_sweep(
    parameter: SweepParameter,
    grid: &[f64],
    base: &Scenario,
    recompute_pi_cm: bool,
) -> Result<Vec<SweepRow>> {
    grid.par_iter()
        .map(|&value| {
            let mut s = base.with_parameter(parameter, value)?;
            if recompute_pi_cm {
                s = s.with_auto_pi_cm();
            }
            let eq = s.solve()?;
            Ok(SweepRow {
                value,
                pi_cm: s.terms.contract.pi_cm,
                theta_star: eq.theta_star,
                xi_star: eq.xi_star,
                pi_i_0: eq.pi_i_0,
                pi_r_0: eq.pi_r_0,
            })
        })
        .collect()
}

/// Equilibrium of `scenario` re-evaluated at the discounted loading `alpha * theta*`.
pub fn discounted_profile(alpha: f64, scenario: &Scenario) -> Result<StackelbergEquilibrium> {
    let eq = scenario.solve()?;
    let combo = ActionCombination::discounted(alpha, &eq, &scenario.terms)?;
    evaluate_profile(
        combo.theta_hat,
        combo.xi_hat,
        &scenario.utility_i,
        &scenario.utility_r,
        &scenario.terms,
        &scenario.market,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> (Scenario, StackelbergEquilibrium) {
        let s = Scenario::table1();
        let eq = s.solve().unwrap();
        (s, eq)
    }

    #[test]
    fn identical_combinations_have_zero_weuc() {
        let (s, eq) = base();
        let c = ActionCombination::equilibrium(&eq);
        for party in [Party::Insurer, Party::Reinsurer] {
            let w = weuc(&c, &c, party, &s.utility_i, &s.terms, &s.market).unwrap();
            assert!(w.value.abs() < 1e-14);
        }
    }

    #[test]
    fn riskless_constant_mix_is_discounted_utility() {
        let (s, _) = base();
        let c = ActionCombination::without_reinsurance(InsurerStrategy::ConstantMix([0.0, 0.0]));
        let eu = expected_utility_closed_form(&c, Party::Insurer, &s.utility_i, &s.terms, &s.market).unwrap();
        let direct = s.utility_i.value(100.0 * (s.market.r() * 10.0).exp()).unwrap();
        assert!((eu / direct - 1.0).abs() < 1e-13);
    }

    #[test]
    fn optimal_value_matches_nu() {
        let (s, eq) = base();
        let c = ActionCombination::equilibrium(&eq);
        let eu = expected_utility_closed_form(&c, Party::Insurer, &s.utility_i, &s.terms, &s.market).unwrap();
        let nu =
            crate::equilibrium::insurer_value_nu(eq.xi_star, eq.theta_star, &s.utility_i, &s.terms, &s.market).unwrap();
        assert!((eu / nu - 1.0).abs() < 1e-14);
    }

    #[test]
    fn discount_is_zero_sum() {
        let (s, eq) = base();
        let reference = ActionCombination::equilibrium(&eq);
        let alt = ActionCombination::discounted(0.95, &eq, &s.terms).unwrap();
        let r = weuc(&reference, &alt, Party::Reinsurer, &s.utility_r, &s.terms, &s.market).unwrap();
        let i = weuc(&reference, &alt, Party::Insurer, &s.utility_i, &s.terms, &s.market).unwrap();
        assert!((r.value + i.value).abs() < 1e-9);
        assert!(r.value > 0.0);
    }

    #[test]
    fn bisection_fallback_resubstitutes() {
        let (s, eq) = base();
        let reference = ActionCombination::equilibrium(&eq);
        let alt = ActionCombination::new(0.1, 0.5, InsurerStrategy::ConstantMix([0.15, 0.0]));
        let w = weuc(&reference, &alt, Party::Insurer, &s.utility_i, &s.terms, &s.market).unwrap();
        let res = weuc_residual(&w, &reference, &alt, &s.utility_i, &s.terms, &s.market).unwrap();
        assert!(res.abs() < 1e-9, "residual {res}");
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_half_away(2.5, 0), 3.0);
        assert_eq!(round_half_away(-2.5, 0), -3.0);
        let w = WeucResult { value: 0.000_603_1, party: Party::Reinsurer };
        assert_eq!(w.format_bp(1), "6.0");
    }

    #[test]
    fn incentive_equal_without_discount_gap() {
        let (s, eq) = base();
        let (with, without) = reinsurer_incentive(0.0, &eq, &s.utility_r, &s.terms, &s.market).unwrap();
        assert!((with / without - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_loss_bound_is_reported() {
        let (s, eq) = base();
        let r = discount_select(DiscountCriterion::MaxLossProb(0.001), &eq, &s.utility_r, &s.terms, &s.market);
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn auto_weight_matches_base_case() {
        let (s, _) = base();
        assert!((auto_pi_cm(&s.utility_i, &s.market) - 0.2948).abs() < 0.5e-4);
    }
}
