//! Monte Carlo estimation: discretized self-financing wealth, expected
//! utilities, loss probabilities, replication error and the closed-form
//! versus simulation gate.
//!
//! Samples are always collected into a vector in path order and reduced with
//! a compensated sum, so results do not depend on the rayon thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    insurer_value_nu, reinsurer_value, response_to_loading, ContractTerms, StackelbergEquilibrium, Utility,
};
use crate::error::{invalid, Error, Result};
use crate::market::{
    brownian_path, kernel_moment, levels_at, terminal_draw, DualShift, MarketParams, PathSource, TimeGrid, Vec2,
};
use crate::option::{norm_cdf, put_price, replication_strategy, ReinsuranceContract};
use crate::solve::compensated_sum;
use crate::strategies::{insurer_wealth, reinsurer_wealth, MarketState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl SimulationConfig {
    pub fn new(n_paths: usize, steps: usize, seed: u64, antithetic: bool) -> Result<Self> {
        if n_paths < 2 {
            return Err(invalid("n_paths", format!("must be at least 2, got {n_paths}")));
        }
        if antithetic && !n_paths.is_multiple_of(2) {
            return Err(invalid("n_paths", "must be even with antithetic sampling"));
        }
        if steps == 0 {
            return Err(invalid("steps", "must be at least 1"));
        }
        Ok(Self { n_paths, steps, seed, antithetic })
    }

    /// 10^6 paths, as used by the verification gate.
    pub fn acceptance(seed: u64) -> Self {
        Self { n_paths: 1_000_000, steps: 1, seed, antithetic: false }
    }

    pub fn smoke(seed: u64) -> Self {
        Self { n_paths: 10_000, steps: 1, seed, antithetic: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl EstimateWithError {
    /// Sample mean and standard error. Under antithetic sampling, consecutive
    /// pairs are averaged first and the error is that of the pair means.
    pub fn from_samples(samples: &[f64], antithetic: bool) -> Result<Self> {
        let bad: Vec<usize> = samples.iter().enumerate().filter(|(_, v)| !v.is_finite()).map(|(i, _)| i).collect();
        if !bad.is_empty() {
            return Err(Error::NonFinite(bad));
        }
        if antithetic {
            if !samples.len().is_multiple_of(2) {
                return Err(invalid("samples", "antithetic estimate needs an even count"));
            }
            let pairs: Vec<f64> = samples.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect();
            let inner = Self::from_samples(&pairs, false)?;
            return Ok(Self { n: samples.len(), ..inner });
        }
        let n = samples.len();
        if n < 2 {
            return Err(invalid("samples", "need at least 2 samples"));
        }
        let mean = compensated_sum(samples) / n as f64;
        let sq: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = compensated_sum(&sq) / (n - 1) as f64;
        Ok(Self { mean, std_error: (var / n as f64).sqrt(), n })
    }

    /// Distance to `target` in standard errors (0 when both coincide exactly).
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = self.mean - target;
        if gap == 0.0 {
            0.0
        } else {
            gap / self.std_error
        }
    }

    pub fn agrees_with(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target).abs() <= sigmas
    }
}

/// Estimates `E[f(state at T)]` from one exact draw per path, without storing paths.
pub fn terminal_estimate<F>(
    params: &MarketParams,
    contract: &ReinsuranceContract,
    config: &SimulationConfig,
    f: F,
) -> Result<EstimateWithError>
where
    F: Fn(&MarketState) -> f64 + Sync,
{
    let samples: Vec<f64> = (0..config.n_paths)
        .into_par_iter()
        .map(|path| f(&terminal_draw(params, contract, config.seed, path, config.antithetic)))
        .collect();
    EstimateWithError::from_samples(&samples, config.antithetic)
}

/// Sample average of `U(wealth(terminal state))` over a stored or generated ensemble.
pub fn expected_utility_mc<S, F>(
    source: &S,
    utility: &Utility,
    antithetic: bool,
    terminal_wealth: F,
) -> Result<EstimateWithError>
where
    S: PathSource,
    F: Fn(&MarketState) -> f64 + Sync,
{
    let samples: Vec<f64> = (0..source.n_paths())
        .into_par_iter()
        .map(|path| {
            let last = *source.path(path).last().map(|(_, s)| s).expect("non-empty path");
            utility.value(terminal_wealth(&last)).unwrap_or(f64::NAN)
        })
        .collect();
    EstimateWithError::from_samples(&samples, antithetic)
}

/// Terminal wealth of every path; `absorbed[i]` marks paths whose wealth
/// would have left the positive half-line and was frozen at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthPaths {
    pub terminal: Vec<f64>,
    pub absorbed: Vec<bool>,
}

impl WealthPaths {
    pub fn absorbed_count(&self) -> usize {
        self.absorbed.iter().filter(|a| **a).count()
    }
}

fn log_step(params: &MarketParams, pi: Vec2, dt: f64, dw: Vec2) -> f64 {
    let ex = params.excess_drift();
    let load = params.sigma_t_mul(pi);
    let drift = params.r() + pi[0] * ex[0] + pi[1] * ex[1] - 0.5 * (load[0] * load[0] + load[1] * load[1]);
    drift * dt + load[0] * dw[0] + load[1] * dw[1]
}

/// Wealth along one path under a relative-portfolio rule, stepped in logs so
/// that wealth stays positive. Returns the wealth at every grid point and
/// whether the path was absorbed at zero.
pub fn evolve_wealth_path<S, R>(source: &S, path: usize, rule: &R, initial: f64) -> Result<(Vec<f64>, bool)>
where
    S: PathSource,
    R: Fn(&MarketState, f64) -> Result<Vec2> + Sync,
{
    if !(initial > 0.0 && initial.is_finite()) {
        return Err(invalid("initial", format!("wealth must be > 0, got {initial}")));
    }
    let params = source.params();
    let steps = source.path(path);
    let mut out = Vec::with_capacity(steps.len());
    let mut v = initial;
    let mut absorbed = false;
    out.push(v);
    for (k, pair) in steps.windows(2).enumerate() {
        let ((w0, s0), (w1, s1)) = (pair[0], pair[1]);
        if !absorbed {
            let pi = rule(&s0, v).map_err(|e| Error::RuleFailure { path, step: k, reason: e.to_string() })?;
            if !(pi[0].is_finite() && pi[1].is_finite()) {
                return Err(Error::RuleFailure { path, step: k, reason: format!("non-finite weights {pi:?}") });
            }
            let next = v * log_step(params, pi, s1.t - s0.t, [w1[0] - w0[0], w1[1] - w0[1]]).exp();
            if next > 0.0 && next.is_finite() {
                v = next;
            } else {
                v = 0.0;
                absorbed = true;
            }
        }
        out.push(v);
    }
    Ok((out, absorbed))
}

pub fn evolve_wealth<S, R>(source: &S, rule: &R, initial: f64) -> Result<WealthPaths>
where
    S: PathSource,
    R: Fn(&MarketState, f64) -> Result<Vec2> + Sync,
{
    let results: Vec<Result<(f64, bool)>> = (0..source.n_paths())
        .into_par_iter()
        .map(|path| evolve_wealth_path(source, path, rule, initial).map(|(v, a)| (*v.last().expect("path"), a)))
        .collect();
    let mut terminal = Vec::with_capacity(results.len());
    let mut absorbed = Vec::with_capacity(results.len());
    for r in results {
        let (v, a) = r?;
        terminal.push(v);
        absorbed.push(a);
    }
    Ok(WealthPaths { terminal, absorbed })
}

/// Reinsurer's effective initial wealth `v_R + xi theta P(0)` when the loading
/// is discounted to `alpha * theta*` and the insurer reacts optimally.
pub(crate) fn discounted_budget(alpha: f64, eq: &StackelbergEquilibrium, terms: &ContractTerms) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha", format!("must lie in [0, 1], got {alpha}")));
    }
    let theta = alpha * eq.theta_star;
    let xi = response_to_loading(theta, eq.p0, eq.p0_aux, terms.xi_bar).selected();
    Ok(terms.v_r + xi * theta * eq.p0)
}

/// Log-threshold `c` such that a loss occurs iff `ln Z(T) > c`.
fn loss_threshold(utility_r: &Utility, budget: f64, terms: &ContractTerms, params: &MarketParams) -> Result<f64> {
    let b = match *utility_r {
        Utility::Power { b } => b,
        Utility::Log => 0.0,
        Utility::Hara { .. } => return Err(Error::Unsupported("HARA utility for the reinsurer".into())),
    };
    let m0 = kernel_moment(params, DualShift::ZERO, b / (b - 1.0), terms.contract.maturity);
    // I_R(y Z) = budget * Z^{1/(b-1)} / m0 < v_R  <=>  ln Z > (b - 1) ln(v_R m0 / budget)
    Ok((b - 1.0) * (terms.v_r * m0 / budget).ln())
}

/// Closed-form probability that the reinsurer's terminal wealth after paying
/// the claim ends below `v_R`, with the loading discounted to `alpha * theta*`.
pub fn loss_probability(
    alpha: f64,
    eq: &StackelbergEquilibrium,
    utility_r: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
) -> Result<f64> {
    let budget = discounted_budget(alpha, eq, terms)?;
    let c = loss_threshold(utility_r, budget, terms, params)?;
    let g = params.market_price_of_risk();
    let g_norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
    let horizon = terms.contract.maturity;
    let mean = -(params.r() + 0.5 * g_norm * g_norm) * horizon;
    Ok(norm_cdf((mean - c) / (g_norm * horizon.sqrt())))
}

pub fn loss_probability_mc(
    alpha: f64,
    eq: &StackelbergEquilibrium,
    utility_r: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
    config: &SimulationConfig,
) -> Result<EstimateWithError> {
    let budget = discounted_budget(alpha, eq, terms)?;
    let c = loss_threshold(utility_r, budget, terms, params)?;
    terminal_estimate(params, &terms.contract, config, |s| if s.z.ln() > c { 1.0 } else { 0.0 })
}

/// RMS replication error of a discretely rebalanced put hedge at one resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeErrorPoint {
    pub steps: usize,
    pub rms_error: f64,
    /// Value of the initial replicating holdings.
    pub initial_cost: f64,
}

/// Discrete self-financing replication of the put following the
/// replicating share holdings, rebalanced on `steps` equal intervals.
///
/// All resolutions share the Brownian paths of the finest grid; every entry
/// of `resolutions` must divide the largest one.
pub fn hedge_error(
    params: &MarketParams,
    contract: &ReinsuranceContract,
    n_paths: usize,
    seed: u64,
    resolutions: &[usize],
) -> Result<Vec<HedgeErrorPoint>> {
    let finest = *resolutions.iter().max().ok_or_else(|| invalid("resolutions", "must not be empty"))?;
    if resolutions.iter().any(|&m| m == 0 || finest % m != 0) {
        return Err(invalid("resolutions", format!("each must divide {finest}")));
    }
    if n_paths == 0 {
        return Err(invalid("n_paths", "must be at least 1"));
    }
    let grid = TimeGrid::uniform(contract.maturity, finest)?;
    let lambda = DualShift::ZERO;
    let v0 = contract.benchmark0;
    let p0 = put_price(0.0, v0, contract, params)?.price;
    let psi0 = replication_strategy(0.0, v0, 1.0, 1.0, contract, params)?;
    let initial_cost = psi0[0] + psi0[2];

    let errors: Vec<Result<Vec<f64>>> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let ws = brownian_path(seed, path, &grid, false);
            let levels: Vec<(f64, f64, f64, f64)> = ws
                .iter()
                .zip(grid.times())
                .map(|(w, &t)| {
                    let lv = levels_at(params, contract, lambda, t, *w);
                    (t, (params.r() * t).exp(), lv[3], lv[4])
                })
                .collect();
            resolutions
                .iter()
                .map(|&m| {
                    let stride = finest / m;
                    let mut value = p0;
                    let mut k = 0;
                    while k < finest {
                        let (t, s0, s2, vb) = levels[k];
                        let psi = replication_strategy(t, vb, s0, s2, contract, params)?;
                        let held2 = psi[2];
                        let held0 = (value - held2 * s2) / s0;
                        let (_, s0n, s2n, _) = levels[k + stride];
                        value = held0 * s0n + held2 * s2n;
                        k += stride;
                    }
                    Ok(value - contract.payoff(levels[finest].3))
                })
                .collect()
        })
        .collect();
    let mut per_m = vec![Vec::with_capacity(n_paths); resolutions.len()];
    for e in errors {
        for (i, v) in e?.into_iter().enumerate() {
            per_m[i].push(v * v);
        }
    }
    Ok(resolutions
        .iter()
        .zip(per_m)
        .map(|(&steps, sq)| HedgeErrorPoint {
            steps,
            rms_error: (compensated_sum(&sq) / n_paths as f64).sqrt(),
            initial_cost,
        })
        .collect())
}

/// One closed-form versus Monte Carlo comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateCheck {
    pub name: String,
    pub closed_form: f64,
    pub estimate: EstimateWithError,
    pub z_score: f64,
    pub pass: bool,
}

impl GateCheck {
    fn new(name: &str, closed_form: f64, estimate: EstimateWithError, sigmas: f64) -> Self {
        let z_score = estimate.z_score(closed_form);
        Self { name: name.to_string(), closed_form, estimate, z_score, pass: z_score.abs() <= sigmas }
    }
}

/// Compares `P(0)`, `P_aux(0)`, both equilibrium expected utilities and
/// `Q(1)` with their Monte Carlo estimates, at `sigmas` standard errors.
pub fn verify_all(
    eq: &StackelbergEquilibrium,
    utility_i: &Utility,
    utility_r: &Utility,
    terms: &ContractTerms,
    params: &MarketParams,
    config: &SimulationConfig,
    sigmas: f64,
) -> Result<Vec<GateCheck>> {
    let c = &terms.contract;
    let mut checks = Vec::new();

    let p0 = terminal_estimate(params, c, config, |s| s.z * c.payoff(s.v_b))?;
    checks.push(GateCheck::new("put_price", eq.p0, p0, sigmas));

    let pa = terminal_estimate(params, c, config, |s| s.z_aux * c.payoff(s.v_b))?;
    checks.push(GateCheck::new("put_price_auxiliary", eq.p0_aux, pa, sigmas));

    let nu = insurer_value_nu(eq.xi_star, eq.theta_star, utility_i, terms, params)?;
    let eu_i = terminal_estimate(params, c, config, |s| {
        insurer_wealth(s, eq, utility_i, terms, params)
            .and_then(|v| utility_i.value(v + eq.xi_star * c.payoff(s.v_b)))
            .unwrap_or(f64::NAN)
    })?;
    checks.push(GateCheck::new("insurer_expected_utility", nu, eu_i, sigmas));

    let kappa = reinsurer_value(eq.theta_star, eq.xi_star, utility_r, terms, params)?;
    let eu_r = terminal_estimate(params, c, config, |s| {
        reinsurer_wealth(s, eq, utility_r, terms, params)
            .and_then(|v| utility_r.value(v - eq.xi_star * c.payoff(s.v_b)))
            .unwrap_or(f64::NAN)
    })?;
    checks.push(GateCheck::new("reinsurer_expected_utility", kappa, eu_r, sigmas));

    let q = loss_probability(1.0, eq, utility_r, terms, params)?;
    let q_mc = loss_probability_mc(1.0, eq, utility_r, terms, params, config)?;
    checks.push(GateCheck::new("loss_probability", q, q_mc, sigmas));
    Ok(checks)
}
