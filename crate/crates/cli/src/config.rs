//! Run configuration: a TOML file with `[market]`, `[contract]`,
//! `[utilities.insurer]`, `[utilities.reinsurer]` and `[simulation]` sections.
//! Any number may be written as a string with a `%` suffix.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use reinsgame::analysis::{auto_pi_cm, Scenario};
use reinsgame::equilibrium::{ContractTerms, Utility};
use reinsgame::market::MarketParams;
use reinsgame::option::ReinsuranceContract;
use reinsgame::simulation::SimulationConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("{field}: {reason}")]
    Value { field: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] reinsgame::Error),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Number {
    Plain(f64),
    Text(String),
}

fn number(field: &'static str, n: &Number) -> Result<f64, ConfigError> {
    match n {
        Number::Plain(v) => Ok(*v),
        Number::Text(s) => parse_number(s).map_err(|reason| ConfigError::Value { field, reason }),
    }
}

/// Parses `"1.5"`, `"29.48%"` or `"25bp"`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (body, scale) = if let Some(b) = s.strip_suffix('%') {
        (b, 1e-2)
    } else if let Some(b) = s.strip_suffix("bp") {
        (b, 1e-4)
    } else {
        (s, 1.0)
    };
    body.trim().parse::<f64>().map(|v| v * scale).map_err(|_| format!("not a number: {s:?}"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarketBlock {
    r: Number,
    mu1: Number,
    mu2: Number,
    sigma1: Number,
    sigma2: Number,
    rho: Number,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContractBlock {
    guarantee: Number,
    maturity: Number,
    pi_cm: Number,
    theta_max: Number,
    xi_bar: Number,
    v_i: Number,
    v_r: Number,
    benchmark0: Option<Number>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtilityBlock {
    kind: String,
    b: Option<Number>,
    rra: Option<Number>,
    a: Option<Number>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtilitiesBlock {
    insurer: UtilityBlock,
    reinsurer: UtilityBlock,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationBlock {
    n_paths: usize,
    steps: usize,
    seed: u64,
    #[serde(default)]
    antithetic: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    market: MarketBlock,
    contract: ContractBlock,
    utilities: UtilitiesBlock,
    simulation: SimulationBlock,
}

#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub simulation: SimulationConfig,
}

fn utility(field: &'static str, u: &UtilityBlock) -> Result<Utility, ConfigError> {
    let exponent = || -> Result<f64, ConfigError> {
        match (&u.b, &u.rra) {
            (Some(b), None) => number(field, b),
            (None, Some(rra)) => Ok(1.0 - number(field, rra)?),
            _ => Err(ConfigError::Value { field, reason: "give exactly one of `b` and `rra`".into() }),
        }
    };
    let utility = match u.kind.as_str() {
        "power" => match &u.rra {
            Some(rra) if u.b.is_none() => Utility::from_rra(number(field, rra)?)?,
            _ => Utility::power(exponent()?)?,
        },
        "log" => Utility::Log,
        "hara" => {
            let a = u.a.as_ref().ok_or(ConfigError::Value { field, reason: "hara needs `a`".into() })?;
            Utility::hara(number(field, a)?, exponent()?)?
        }
        other => {
            return Err(ConfigError::Value { field, reason: format!("unknown utility kind {other:?}") });
        }
    };
    Ok(utility)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let m = &raw.market;
        let market = MarketParams::new(
            number("market.r", &m.r)?,
            number("market.mu1", &m.mu1)?,
            number("market.mu2", &m.mu2)?,
            number("market.sigma1", &m.sigma1)?,
            number("market.sigma2", &m.sigma2)?,
            number("market.rho", &m.rho)?,
        )?;
        let utility_i = utility("utilities.insurer", &raw.utilities.insurer)?;
        let utility_r = utility("utilities.reinsurer", &raw.utilities.reinsurer)?;

        let c = &raw.contract;
        let pi_cm = match &c.pi_cm {
            Number::Text(s) if s.trim() == "auto" => auto_pi_cm(&utility_i, &market),
            n => number("contract.pi_cm", n)?,
        };
        let v_i = number("contract.v_i", &c.v_i)?;
        let benchmark0 = match &c.benchmark0 {
            Some(n) => number("contract.benchmark0", n)?,
            None => v_i,
        };
        let contract = ReinsuranceContract::new(
            number("contract.guarantee", &c.guarantee)?,
            number("contract.maturity", &c.maturity)?,
            pi_cm,
            benchmark0,
        )?;
        let terms = ContractTerms::new(
            v_i,
            number("contract.v_r", &c.v_r)?,
            number("contract.theta_max", &c.theta_max)?,
            number("contract.xi_bar", &c.xi_bar)?,
            contract,
        )?;
        terms.validate(&market)?;

        let s = &raw.simulation;
        let simulation = SimulationConfig::new(s.n_paths, s.steps, s.seed, s.antithetic)?;
        Ok(Self { scenario: Scenario { market, terms, utility_i, utility_r }, simulation })
    }
}
