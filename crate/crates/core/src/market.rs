//! Two-asset Black-Scholes market, pricing kernels and exact path simulation.
//!
//! The volatility matrix is lower triangular,
//!
//! ```text
//! sigma = [ s1          0            ]
//!         [ s2*rho      s2*sqrt(1-rho^2) ]
//! ```
//!
//! so every linear solve against it (or against `sigma sigma^T`) is done by
//! substitution rather than a general matrix inverse.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::option::ReinsuranceContract;
use crate::strategies::MarketState;

pub type Vec2 = [f64; 2];

/// Correlations within this distance of +-1 are rejected (sigma must be invertible).
pub const RHO_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    r: f64,
    mu1: f64,
    mu2: f64,
    sigma1: f64,
    sigma2: f64,
    rho: f64,
}

impl MarketParams {
    pub fn new(r: f64, mu1: f64, mu2: f64, sigma1: f64, sigma2: f64, rho: f64) -> Result<Self> {
        let all = [r, mu1, mu2, sigma1, sigma2, rho];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(invalid("market", "all parameters must be finite"));
        }
        if sigma1 <= 0.0 {
            return Err(invalid("sigma1", format!("must be > 0, got {sigma1}")));
        }
        if sigma2 <= 0.0 {
            return Err(invalid("sigma2", format!("must be > 0, got {sigma2}")));
        }
        if rho.abs() >= 1.0 - RHO_TOLERANCE {
            return Err(invalid("rho", format!("must lie strictly inside (-1, 1), got {rho}")));
        }
        if mu1 <= r {
            return Err(invalid("mu1", format!("must exceed r = {r}, got {mu1}")));
        }
        if mu2 <= r {
            return Err(invalid("mu2", format!("must exceed r = {r}, got {mu2}")));
        }
        Ok(Self { r, mu1, mu2, sigma1, sigma2, rho })
    }

    /// The calibrated base case used throughout the numerical study.
    pub fn table1() -> Self {
        Self::new(0.0102, 0.1752, 0.1237, 0.2366, 0.2198, 0.8012).expect("valid base case")
    }

    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn mu1(&self) -> f64 {
        self.mu1
    }
    pub fn mu2(&self) -> f64 {
        self.mu2
    }
    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn with_rate(&self, r: f64) -> Result<Self> {
        Self::new(r, self.mu1, self.mu2, self.sigma1, self.sigma2, self.rho)
    }

    fn rho_bar(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }

    pub fn volatility_matrix(&self) -> [[f64; 2]; 2] {
        [[self.sigma1, 0.0], [self.sigma2 * self.rho, self.sigma2 * self.rho_bar()]]
    }

    /// Loadings of asset 2 on (W1, W2).
    pub fn asset2_loading(&self) -> Vec2 {
        [self.sigma2 * self.rho, self.sigma2 * self.rho_bar()]
    }

    pub fn excess_drift(&self) -> Vec2 {
        [self.mu1 - self.r, self.mu2 - self.r]
    }

    /// `sigma x`.
    pub fn sigma_mul(&self, x: Vec2) -> Vec2 {
        [self.sigma1 * x[0], self.sigma2 * (self.rho * x[0] + self.rho_bar() * x[1])]
    }

    /// `sigma^T x`, the diffusion loading of a relative portfolio `x`.
    pub fn sigma_t_mul(&self, x: Vec2) -> Vec2 {
        [self.sigma1 * x[0] + self.sigma2 * self.rho * x[1], self.sigma2 * self.rho_bar() * x[1]]
    }

    /// Solves `sigma y = x`.
    pub fn sigma_solve(&self, x: Vec2) -> Vec2 {
        let y1 = x[0] / self.sigma1;
        let y2 = (x[1] - self.sigma2 * self.rho * y1) / (self.sigma2 * self.rho_bar());
        [y1, y2]
    }

    /// Solves `sigma^T y = x`.
    pub fn sigma_t_solve(&self, x: Vec2) -> Vec2 {
        let y2 = x[1] / (self.sigma2 * self.rho_bar());
        let y1 = (x[0] - self.sigma2 * self.rho * y2) / self.sigma1;
        [y1, y2]
    }

    /// Solves `(sigma sigma^T) y = x`.
    pub fn covariance_solve(&self, x: Vec2) -> Vec2 {
        self.sigma_t_solve(self.sigma_solve(x))
    }

    /// Market price of risk `gamma = sigma^{-1} (mu - r 1)`.
    pub fn market_price_of_risk(&self) -> Vec2 {
        self.sigma_solve(self.excess_drift())
    }

    /// `gamma + sigma^{-1} lambda`, the price of risk of the shifted market.
    pub fn shifted_price_of_risk(&self, lambda: DualShift) -> Vec2 {
        let g = self.market_price_of_risk();
        let s = self.sigma_solve(lambda.components());
        [g[0] + s[0], g[1] + s[1]]
    }
}

/// Drift shift of the auxiliary market. Only asset 2 can be shifted, which
/// keeps the shift in the barrier cone `{0} x R` of the no-asset-2 constraint.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DualShift {
    pub lambda2: f64,
}

impl DualShift {
    pub const ZERO: DualShift = DualShift { lambda2: 0.0 };

    pub fn new(lambda2: f64) -> Self {
        Self { lambda2 }
    }

    pub fn components(&self) -> Vec2 {
        [0.0, self.lambda2]
    }
}

/// The shift under which the unconstrained Merton portfolio holds nothing in
/// asset 2: `lambda2 = sigma2 rho (mu1 - r) / sigma1 - mu2 + r`.
pub fn optimal_dual_shift(params: &MarketParams) -> DualShift {
    let p = params;
    DualShift::new(p.sigma2 * p.rho * (p.mu1 - p.r) / p.sigma1 - p.mu2 + p.r)
}

/// `E[Z_lambda(t)^k] = exp(-k r t + k (k - 1) |gamma_lambda|^2 t / 2)`.
pub fn kernel_moment(params: &MarketParams, lambda: DualShift, k: f64, t: f64) -> f64 {
    let g = params.shifted_price_of_risk(lambda);
    let g2 = g[0] * g[0] + g[1] * g[1];
    (-k * params.r * t + 0.5 * k * (k - 1.0) * g2 * t).exp()
}

/// Level of the pricing kernel `Z_lambda(t)` given the Brownian position `w = W(t)`.
pub fn kernel_level(params: &MarketParams, lambda: DualShift, t: f64, w: Vec2) -> f64 {
    let g = params.shifted_price_of_risk(lambda);
    let g2 = g[0] * g[0] + g[1] * g[1];
    (-(params.r + 0.5 * g2) * t - (g[0] * w[0] + g[1] * w[1])).exp()
}

/// Time points `0 = t_0 < t_1 < ... < t_M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(invalid("steps", "grid needs at least one step"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("horizon", format!("must be positive, got {horizon}")));
        }
        let dt = horizon / steps as f64;
        let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        times[steps] = horizon;
        Ok(Self { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(invalid("grid", "needs at least two time points"));
        }
        if times[0] != 0.0 {
            return Err(invalid("grid", format!("must start at 0, got {}", times[0])));
        }
        if let Some(index) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::NonIncreasingGrid { index: index + 1 });
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }
    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }
}

/// Cumulative Brownian positions `W(t_k)` for one path.
///
/// Seed-to-stream contract: path `i` draws from `ChaCha8Rng::seed_from_u64(seed)`
/// switched to stream `i` (stream `i / 2` under antithetic sampling, where odd
/// paths negate the increments of their even partner). Each step consumes two
/// `StandardNormal` draws, first for `W1` and then for `W2`.
pub fn brownian_path(seed: u64, path: usize, grid: &TimeGrid, antithetic: bool) -> Vec<Vec2> {
    let (stream, sign) =
        if antithetic { ((path / 2) as u64, if path % 2 == 1 { -1.0 } else { 1.0 }) } else { (path as u64, 1.0) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut out = Vec::with_capacity(grid.times.len());
    let mut w = [0.0, 0.0];
    out.push(w);
    for pair in grid.times.windows(2) {
        let sd = (pair[1] - pair[0]).sqrt();
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        w = [w[0] + sign * sd * z1, w[1] + sign * sd * z2];
        out.push(w);
    }
    out
}

const FIELDS: usize = 7;
const W1: usize = 0;
const W2: usize = 1;
const S1: usize = 2;
const S2: usize = 3;
const VB: usize = 4;
const Z: usize = 5;
const ZAUX: usize = 6;

/// Seeded Monte Carlo paths of every driving process on a common grid.
///
/// Asset prices start at 1, the benchmark at the contract's initial value and
/// both kernels at 1. All levels are exact lognormal functions of `W(t)`.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    seed: u64,
    antithetic: bool,
    n_paths: usize,
    grid: TimeGrid,
    params: MarketParams,
    lambda: DualShift,
    data: Vec<f64>,
}

/// Levels of every simulated process at one time given `W(t)`.
pub(crate) fn levels_at(
    params: &MarketParams,
    contract: &ReinsuranceContract,
    lambda: DualShift,
    t: f64,
    w: Vec2,
) -> [f64; FIELDS] {
    let p = params;
    let load2 = p.asset2_loading();
    let noise2 = load2[0] * w[0] + load2[1] * w[1];
    let pi = contract.pi_cm;
    let s1 = ((p.mu1 - 0.5 * p.sigma1 * p.sigma1) * t + p.sigma1 * w[0]).exp();
    let s2 = ((p.mu2 - 0.5 * p.sigma2 * p.sigma2) * t + noise2).exp();
    let vb = contract.benchmark0
        * ((p.r + pi * (p.mu2 - p.r) - 0.5 * pi * pi * p.sigma2 * p.sigma2) * t + pi * noise2).exp();
    [w[0], w[1], s1, s2, vb, kernel_level(p, DualShift::ZERO, t, w), kernel_level(p, lambda, t, w)]
}

impl PathEnsemble {
    pub fn simulate(
        params: &MarketParams,
        contract: &ReinsuranceContract,
        grid: TimeGrid,
        n_paths: usize,
        seed: u64,
        antithetic: bool,
    ) -> Result<Self> {
        if n_paths == 0 {
            return Err(invalid("n_paths", "must be at least 1"));
        }
        let lambda = optimal_dual_shift(params);
        let stride = (grid.steps() + 1) * FIELDS;
        let mut data = vec![0.0; n_paths * stride];
        data.par_chunks_mut(stride).enumerate().for_each(|(path, chunk)| {
            let ws = brownian_path(seed, path, &grid, antithetic);
            for (k, (w, &t)) in ws.iter().zip(grid.times()).enumerate() {
                let levels = levels_at(params, contract, lambda, t, *w);
                chunk[k * FIELDS..(k + 1) * FIELDS].copy_from_slice(&levels);
            }
        });
        Ok(Self { seed, antithetic, n_paths, grid, params: *params, lambda, data })
    }

    fn at(&self, path: usize, k: usize, field: usize) -> f64 {
        self.data[(path * (self.grid.steps() + 1) + k) * FIELDS + field]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn antithetic(&self) -> bool {
        self.antithetic
    }
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn params(&self) -> &MarketParams {
        &self.params
    }
    pub fn dual_shift(&self) -> DualShift {
        self.lambda
    }

    pub fn brownian(&self, path: usize, k: usize) -> Vec2 {
        [self.at(path, k, W1), self.at(path, k, W2)]
    }
    pub fn s1(&self, path: usize, k: usize) -> f64 {
        self.at(path, k, S1)
    }
    pub fn s2(&self, path: usize, k: usize) -> f64 {
        self.at(path, k, S2)
    }
    pub fn benchmark(&self, path: usize, k: usize) -> f64 {
        self.at(path, k, VB)
    }
    pub fn kernel(&self, path: usize, k: usize) -> f64 {
        self.at(path, k, Z)
    }
    pub fn kernel_aux(&self, path: usize, k: usize) -> f64 {
        self.at(path, k, ZAUX)
    }

    pub fn state(&self, path: usize, k: usize) -> MarketState {
        let t = self.grid.times()[k];
        MarketState {
            t,
            s0: (self.params.r * t).exp(),
            s1: self.s1(path, k),
            s2: self.s2(path, k),
            v_b: self.benchmark(path, k),
            z: self.kernel(path, k),
            z_aux: self.kernel_aux(path, k),
        }
    }

    pub fn terminal_state(&self, path: usize) -> MarketState {
        self.state(path, self.grid.steps())
    }
}

/// Anything that can hand out the `(W(t_k), state_k)` sequence of one path.
pub trait PathSource: Sync {
    fn n_paths(&self) -> usize;
    fn grid(&self) -> &TimeGrid;
    fn params(&self) -> &MarketParams;
    fn path(&self, path: usize) -> Vec<(Vec2, MarketState)>;
}

fn state_from_levels(t: f64, r: f64, lv: &[f64]) -> MarketState {
    MarketState { t, s0: (r * t).exp(), s1: lv[S1], s2: lv[S2], v_b: lv[VB], z: lv[Z], z_aux: lv[ZAUX] }
}

impl PathSource for PathEnsemble {
    fn n_paths(&self) -> usize {
        self.n_paths
    }
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    fn params(&self) -> &MarketParams {
        &self.params
    }
    fn path(&self, path: usize) -> Vec<(Vec2, MarketState)> {
        (0..=self.grid.steps()).map(|k| (self.brownian(path, k), self.state(path, k))).collect()
    }
}

/// Regenerates paths on demand instead of storing them, for runs where the
/// full ensemble would not fit in memory. Values are identical to those of a
/// `PathEnsemble` with the same seed and fine grid.
///
/// A coarsened generator keeps every `stride`-th point of the fine grid, so
/// runs at different resolutions share the same Brownian paths.
#[derive(Debug, Clone)]
pub struct PathGenerator {
    params: MarketParams,
    contract: ReinsuranceContract,
    lambda: DualShift,
    fine: TimeGrid,
    coarse: TimeGrid,
    stride: usize,
    n_paths: usize,
    seed: u64,
    antithetic: bool,
}

impl PathGenerator {
    pub fn new(
        params: &MarketParams,
        contract: &ReinsuranceContract,
        grid: TimeGrid,
        n_paths: usize,
        seed: u64,
        antithetic: bool,
    ) -> Result<Self> {
        if n_paths == 0 {
            return Err(invalid("n_paths", "must be at least 1"));
        }
        Ok(Self {
            params: *params,
            contract: *contract,
            lambda: optimal_dual_shift(params),
            coarse: grid.clone(),
            fine: grid,
            stride: 1,
            n_paths,
            seed,
            antithetic,
        })
    }

    pub fn coarsened(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !self.fine.steps().is_multiple_of(stride) {
            return Err(invalid("stride", format!("must divide the {} fine steps, got {stride}", self.fine.steps())));
        }
        let times = self.fine.times().iter().step_by(stride).copied().collect();
        Ok(Self { coarse: TimeGrid::from_times(times)?, stride, ..self.clone() })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn antithetic(&self) -> bool {
        self.antithetic
    }
    pub fn contract(&self) -> &ReinsuranceContract {
        &self.contract
    }
}

impl PathSource for PathGenerator {
    fn n_paths(&self) -> usize {
        self.n_paths
    }
    fn grid(&self) -> &TimeGrid {
        &self.coarse
    }
    fn params(&self) -> &MarketParams {
        &self.params
    }
    fn path(&self, path: usize) -> Vec<(Vec2, MarketState)> {
        let ws = brownian_path(self.seed, path, &self.fine, self.antithetic);
        ws.iter()
            .zip(self.fine.times())
            .step_by(self.stride)
            .map(|(w, &t)| {
                let lv = levels_at(&self.params, &self.contract, self.lambda, t, *w);
                (*w, state_from_levels(t, self.params.r, &lv))
            })
            .collect()
    }
}

/// Terminal market state of path `path` drawn on the one-step grid `[0, T]`,
/// without materializing an ensemble. Matches `PathEnsemble` built on
/// `TimeGrid::uniform(T, 1)` with the same seed.
pub fn terminal_draw(
    params: &MarketParams,
    contract: &ReinsuranceContract,
    seed: u64,
    path: usize,
    antithetic: bool,
) -> MarketState {
    let t = contract.maturity;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (stream, sign) =
        if antithetic { ((path / 2) as u64, if path % 2 == 1 { -1.0 } else { 1.0 }) } else { (path as u64, 1.0) };
    rng.set_stream(stream);
    let sd = t.sqrt();
    let z1: f64 = StandardNormal.sample(&mut rng);
    let z2: f64 = StandardNormal.sample(&mut rng);
    let w = [sign * sd * z1, sign * sd * z2];
    let lv = levels_at(params, contract, optimal_dual_shift(params), t, w);
    state_from_levels(t, params.r, &lv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> MarketParams {
        MarketParams::table1()
    }

    #[test]
    fn rejects_degenerate_correlation() {
        assert!(MarketParams::new(0.01, 0.1, 0.1, 0.2, 0.2, 1.0).is_err());
        assert!(MarketParams::new(0.01, 0.1, 0.1, 0.2, 0.2, -1.0 + 1e-12).is_err());
        assert!(MarketParams::new(0.01, 0.1, 0.1, 0.2, 0.2, 0.999).is_ok());
    }

    #[test]
    fn rejects_drift_below_rate() {
        let err = MarketParams::new(0.05, 0.04, 0.1, 0.2, 0.2, 0.3).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "mu1", .. }));
    }

    #[test]
    fn price_of_risk_solves_volatility_system() {
        let p = base();
        let g = p.market_price_of_risk();
        let back = p.sigma_mul(g);
        let ex = p.excess_drift();
        assert!((back[0] - ex[0]).abs() < 1e-12 && (back[1] - ex[1]).abs() < 1e-12);
    }

    #[test]
    fn base_case_dual_shift() {
        let l = optimal_dual_shift(&base());
        // direct evaluation: 0.2198 * 0.8012 * 0.165 / 0.2366 - 0.1135
        let expected = 0.2198 * 0.8012 * (0.1752 - 0.0102) / 0.2366 - 0.1237 + 0.0102;
        assert!((l.lambda2 - expected).abs() < 1e-15);
        assert!((l.lambda2 - 0.00932).abs() < 1e-5);
        let merton = base().covariance_solve([0.1752 - 0.0102, 0.1237 - 0.0102 + l.lambda2]);
        assert!(merton[1].abs() < 1e-12);
    }

    #[test]
    fn unconstrained_case_has_zero_shift() {
        let (r, mu1, s1, s2, rho) = (0.01, 0.12, 0.2, 0.25, 0.5);
        let mu2 = r + s2 * rho * (mu1 - r) / s1;
        let p = MarketParams::new(r, mu1, mu2, s1, s2, rho).unwrap();
        assert!(optimal_dual_shift(&p).lambda2.abs() < 1e-15);
    }

    #[test]
    fn zero_correlation_shift_collapses() {
        let p = MarketParams::new(0.01, 0.12, 0.09, 0.2, 0.25, 0.0).unwrap();
        assert!((optimal_dual_shift(&p).lambda2 - (0.01 - 0.09)).abs() < 1e-15);
    }

    #[test]
    fn kernel_moment_identities() {
        let p = base();
        let l = optimal_dual_shift(&p);
        for t in [0.0, 1.0, 10.0] {
            assert!((kernel_moment(&p, l, 1.0, t) - (-p.r() * t).exp()).abs() < 1e-15);
            assert_eq!(kernel_moment(&p, l, 0.0, t), 1.0);
        }
        assert_eq!(kernel_moment(&p, l, 0.9, 0.0), 1.0);
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(
            TimeGrid::from_times(vec![0.0, 1.0, 1.0]).unwrap_err(),
            Error::NonIncreasingGrid { index: 2 }
        ));
        assert!(TimeGrid::uniform(1.0, 0).is_err());
        let g = TimeGrid::uniform(10.0, 4).unwrap();
        assert_eq!(g.times(), &[0.0, 2.5, 5.0, 7.5, 10.0]);
    }
}
