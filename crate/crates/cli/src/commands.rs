use anyhow::{bail, Context, Result};
use log::info;
use rayon::prelude::*;

use reinsgame::analysis::{
    discount_select, sensitivity_sweep, weuc, ActionCombination, DiscountCriterion, InsurerStrategy, Party, Scenario,
    SweepParameter,
};
use reinsgame::equilibrium::{BestResponse, StackelbergEquilibrium};
use reinsgame::market::{PathGenerator, PathSource, TimeGrid};
use reinsgame::simulation::{hedge_error, loss_probability, verify_all, GateCheck, SimulationConfig};
use reinsgame::strategies::{insurer_portfolio, insurer_wealth, reinsurer_portfolio, reinsurer_wealth};

use crate::config::{parse_number, RunConfig};
use crate::table::{Cell, Table};

/// Raised when a verification check fails; maps to its own exit status.
#[derive(Debug, thiserror::Error)]
#[error("verification failed: {worst}")]
pub struct GateFailure {
    pub worst: String,
}

pub fn equilibrium(cfg: &RunConfig) -> Result<Table> {
    let eq = cfg.scenario.solve()?;
    let (response, lower, upper) = match eq.best_response {
        BestResponse::Unique { xi } => ("unique", xi, xi),
        BestResponse::Indifferent { lower, upper, .. } => ("indifferent", lower, upper),
    };
    let mut t = Table::new(&[
        "theta_star[frac]",
        "xi_star[units]",
        "p0[currency]",
        "p0_aux[currency]",
        "lambda2[1/yr]",
        "pi_i_1[frac]",
        "pi_i_2[frac]",
        "pi_r_1[frac]",
        "pi_r_2[frac]",
        "best_response",
        "xi_lower[units]",
        "xi_upper[units]",
        "degenerate",
    ]);
    t.push(vec![
        eq.theta_star.into(),
        eq.xi_star.into(),
        eq.p0.into(),
        eq.p0_aux.into(),
        eq.lambda.lambda2.into(),
        eq.pi_i_0[0].into(),
        eq.pi_i_0[1].into(),
        eq.pi_r_0[0].into(),
        eq.pi_r_0[1].into(),
        response.into(),
        lower.into(),
        upper.into(),
        eq.degenerate.into(),
    ]);
    Ok(t)
}

pub fn parse_parameter(s: &str) -> Result<SweepParameter> {
    Ok(match s {
        "rra-insurer" | "rra_i" => SweepParameter::RraInsurer,
        "rra-reinsurer" | "rra_r" => SweepParameter::RraReinsurer,
        "r" | "rate" => SweepParameter::Rate,
        "T" | "horizon" | "maturity" => SweepParameter::Horizon,
        "G" | "guarantee" => SweepParameter::Guarantee,
        other => bail!("unknown sweep parameter {other:?}"),
    })
}

/// Comma-separated values, or `start:stop:count` for an inclusive linear grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |x: &str| parse_number(x).map_err(anyhow::Error::msg);
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let n: usize = parts[2].trim().parse().context("grid point count")?;
        if n < 2 {
            bail!("a range grid needs at least 2 points");
        }
        return Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect());
    }
    s.split(',').map(num).collect()
}

pub fn sensitivity(cfg: &RunConfig, parameter: SweepParameter, grid: &[f64], recompute_pi_cm: bool) -> Result<Table> {
    let rows = sensitivity_sweep(parameter, grid, &cfg.scenario, recompute_pi_cm)?;
    let mut t = Table::new(&[
        "value",
        "pi_cm[frac]",
        "theta_star[frac]",
        "xi_star[units]",
        "pi_i_1[frac]",
        "pi_i_2[frac]",
        "pi_r_1[frac]",
        "pi_r_2[frac]",
    ]);
    for r in rows {
        t.push(vec![
            r.value.into(),
            r.pi_cm.into(),
            r.theta_star.into(),
            r.xi_star.into(),
            r.pi_i_0[0].into(),
            r.pi_i_0[1].into(),
            r.pi_r_0[0].into(),
            r.pi_r_0[1].into(),
        ]);
    }
    Ok(t)
}

/// `equilibrium`, `discount:<alpha>`, `buy:<theta>,<xi>`, `none` or
/// `constant-mix:<w1>,<w2>` (the latter two without reinsurance).
pub fn parse_combination(s: &str, eq: &StackelbergEquilibrium, scenario: &Scenario) -> Result<ActionCombination> {
    let num = |x: &str| parse_number(x).map_err(anyhow::Error::msg);
    let (head, tail) = s.split_once(':').unwrap_or((s, ""));
    let pair = || -> Result<(f64, f64)> {
        let (a, b) = tail.split_once(',').context("expected two comma-separated numbers")?;
        Ok((num(a)?, num(b)?))
    };
    Ok(match head {
        "equilibrium" => ActionCombination::equilibrium(eq),
        "discount" => ActionCombination::discounted(num(tail)?, eq, &scenario.terms)?,
        "buy" => {
            let (theta, xi) = pair()?;
            ActionCombination::new(theta, xi, InsurerStrategy::Optimal)
        }
        "none" => ActionCombination::without_reinsurance(InsurerStrategy::Optimal),
        "constant-mix" => {
            let (a, b) = pair()?;
            ActionCombination::without_reinsurance(InsurerStrategy::ConstantMix([a, b]))
        }
        other => bail!("unknown action combination {other:?}"),
    })
}

pub fn weuc_table(cfg: &RunConfig, reference: &str, alternative: &str, party: Party) -> Result<Table> {
    let s = &cfg.scenario;
    let eq = s.solve()?;
    let reference = parse_combination(reference, &eq, s)?;
    let alternative = parse_combination(alternative, &eq, s)?;
    let utility = match party {
        Party::Insurer => s.utility_i,
        Party::Reinsurer => s.utility_r,
    };
    let w = weuc(&reference, &alternative, party, &utility, &s.terms, &s.market)?;
    let mut t = Table::new(&["party", "weuc[frac]", "weuc[bp]"]);
    let name = match party {
        Party::Insurer => "insurer",
        Party::Reinsurer => "reinsurer",
    };
    t.push(vec![name.into(), w.value.into(), w.basis_points().into()]);
    Ok(t)
}

/// `increase:<dq>`, `max:<p>` or `weuc-cap:<x>`.
pub fn parse_criterion(s: &str) -> Result<DiscountCriterion> {
    let (head, tail) = s.split_once(':').context("criterion must look like kind:value")?;
    let v = parse_number(tail).map_err(anyhow::Error::msg)?;
    Ok(match head {
        "increase" => DiscountCriterion::LossProbIncrease(v),
        "max" => DiscountCriterion::MaxLossProb(v),
        "weuc-cap" => DiscountCriterion::WeucCap(v),
        other => bail!("unknown criterion {other:?}"),
    })
}

pub fn lossprob(cfg: &RunConfig, alpha: Option<f64>, solve: Option<DiscountCriterion>) -> Result<Table> {
    let s = &cfg.scenario;
    let eq = s.solve()?;
    let alpha = match (alpha, solve) {
        (Some(a), None) => a,
        (None, Some(c)) => discount_select(c, &eq, &s.utility_r, &s.terms, &s.market)?,
        _ => bail!("give exactly one of --alpha and --solve"),
    };
    let q = loss_probability(alpha, &eq, &s.utility_r, &s.terms, &s.market)?;
    let mut t = Table::new(&["alpha[frac]", "theta[frac]", "loss_probability[frac]"]);
    t.push(vec![alpha.into(), (alpha * eq.theta_star).into(), q.into()]);
    Ok(t)
}

pub fn hedge(cfg: &RunConfig, paths: usize, resolutions: &[usize]) -> Result<Table> {
    let s = &cfg.scenario;
    let points = hedge_error(&s.market, &s.terms.contract, paths, cfg.simulation.seed, resolutions)?;
    let mut t = Table::new(&["steps", "rms_error[currency]", "initial_cost[currency]"]);
    for p in points {
        t.push(vec![p.steps.into(), p.rms_error.into(), p.initial_cost.into()]);
    }
    Ok(t)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let i = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[i]
}

/// Cross-sectional summary of both parties' optimal wealth and first-asset
/// weight at each grid time.
pub fn wealth(cfg: &RunConfig, paths: usize) -> Result<Table> {
    let s = &cfg.scenario;
    let eq = s.solve()?;
    let horizon = s.terms.contract.maturity;
    let grid = TimeGrid::uniform(horizon, cfg.simulation.steps)?;
    let gen =
        PathGenerator::new(&s.market, &s.terms.contract, grid, paths, cfg.simulation.seed, cfg.simulation.antithetic)?;
    let per_path: Vec<Vec<[f64; 4]>> = (0..paths)
        .into_par_iter()
        .map(|i| {
            gen.path(i)
                .iter()
                .map(|(_, st)| {
                    let vi = insurer_wealth(st, &eq, &s.utility_i, &s.terms, &s.market)?;
                    let vr = reinsurer_wealth(st, &eq, &s.utility_r, &s.terms, &s.market)?;
                    let (wi, wr) = if st.t < horizon {
                        (
                            insurer_portfolio(st, &eq, &s.utility_i, &s.terms, &s.market)?.total[0],
                            reinsurer_portfolio(st, &eq, &s.utility_r, &s.terms, &s.market)?[0],
                        )
                    } else {
                        (f64::NAN, f64::NAN)
                    };
                    Ok([vi, vr, wi, wr])
                })
                .collect::<reinsgame::Result<Vec<_>>>()
        })
        .collect::<reinsgame::Result<_>>()?;
    let mut t = Table::new(&[
        "t[yr]",
        "insurer_mean[currency]",
        "insurer_p05[currency]",
        "insurer_p50[currency]",
        "insurer_p95[currency]",
        "reinsurer_mean[currency]",
        "reinsurer_p05[currency]",
        "reinsurer_p50[currency]",
        "reinsurer_p95[currency]",
        "insurer_weight_1_mean[frac]",
        "reinsurer_weight_1_mean[frac]",
    ]);
    for (k, &time) in gen.grid().times().iter().enumerate() {
        let column = |j: usize| {
            let mut v: Vec<f64> = per_path.iter().map(|p| p[k][j]).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (vi, vr) = (column(0), column(1));
        t.push(vec![
            time.into(),
            mean(&vi).into(),
            quantile(&vi, 0.05).into(),
            quantile(&vi, 0.5).into(),
            quantile(&vi, 0.95).into(),
            mean(&vr).into(),
            quantile(&vr, 0.05).into(),
            quantile(&vr, 0.5).into(),
            quantile(&vr, 0.95).into(),
            Cell::Num(mean(&column(2))),
            Cell::Num(mean(&column(3))),
        ]);
    }
    Ok(t)
}

pub fn verify(cfg: &RunConfig, sim: &SimulationConfig) -> Result<(Table, Option<GateFailure>)> {
    let s = &cfg.scenario;
    let eq = s.solve()?;
    let checks = verify_all(&eq, &s.utility_i, &s.utility_r, &s.terms, &s.market, sim, 3.0)?;
    let mut t = Table::new(&["quantity", "closed_form", "estimate", "std_error", "z_score", "pass"]);
    for c in &checks {
        info!("{}: z = {:.2}", c.name, c.z_score);
        t.push(vec![
            c.name.clone().into(),
            c.closed_form.into(),
            c.estimate.mean.into(),
            c.estimate.std_error.into(),
            c.z_score.into(),
            c.pass.into(),
        ]);
    }
    let failure = checks
        .iter()
        .filter(|c| !c.pass)
        .max_by(|a, b| a.z_score.abs().total_cmp(&b.z_score.abs()))
        .map(|c: &GateCheck| GateFailure { worst: format!("{} (z = {:.2})", c.name, c.z_score) });
    Ok((t, failure))
}
