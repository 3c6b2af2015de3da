//! Published figures of the base case, recomputed and compared.

use anyhow::Result;

use reinsgame::analysis::{
    auto_pi_cm, discount_select, weuc, ActionCombination, DiscountCriterion, InsurerStrategy, Party, Scenario,
    SweepParameter,
};
use reinsgame::equilibrium::Utility;
use reinsgame::simulation::loss_probability;

use crate::table::Table;

const ALPHA_LOSS_INCREASE: f64 = 0.8673;

struct Row {
    quantity: &'static str,
    unit: &'static str,
    value: f64,
    target: f64,
    tolerance: f64,
}

impl Row {
    fn abs(quantity: &'static str, unit: &'static str, value: f64, target: f64, tolerance: f64) -> Self {
        Self { quantity, unit, value, target, tolerance }
    }
    fn rel(quantity: &'static str, unit: &'static str, value: f64, target: f64, tolerance: f64) -> Self {
        Self { quantity, unit, value, target, tolerance: tolerance * target.abs() }
    }
    fn pass(&self) -> bool {
        (self.value - self.target).abs() <= self.tolerance
    }
}

fn insurer_benefit(s: &Scenario, alternative: InsurerStrategy) -> Result<f64> {
    let eq = s.solve()?;
    let reference = ActionCombination::discounted(ALPHA_LOSS_INCREASE, &eq, &s.terms)?;
    let alt = ActionCombination::without_reinsurance(alternative);
    Ok(weuc(&reference, &alt, Party::Insurer, &s.utility_i, &s.terms, &s.market)?.basis_points())
}

fn corner(base: &Scenario, rra: f64, horizon: f64) -> Result<Scenario> {
    let mut s = *base;
    s.utility_i = Utility::from_rra(rra)?;
    Ok(s.with_parameter(SweepParameter::Horizon, horizon)?.with_auto_pi_cm())
}

/// Table of `(quantity, unit, value, target, tolerance, pass)` and whether all pass.
pub fn reproduce(base: &Scenario) -> Result<(Table, bool)> {
    let s = base;
    let eq = s.solve()?;
    let (u_i, u_r, terms, m) = (&s.utility_i, &s.utility_r, &s.terms, &s.market);
    let pp = 1e-2;
    let reference = ActionCombination::equilibrium(&eq);
    let discount5 = ActionCombination::discounted(0.95, &eq, terms)?;
    let cm = InsurerStrategy::ConstantMix([0.15, 0.0]);
    let (c5, c15) = (corner(s, 5.0, 20.0)?, corner(s, 15.0, 20.0)?);

    let rows = vec![
        Row::abs("theta_star", "frac", eq.theta_star, 0.2086, 0.005 * pp),
        Row::abs("xi_star", "units", eq.xi_star, 1.5, 0.0),
        Row::abs("insurer_weight_1", "frac", eq.pi_i_0[0], 0.3169, 0.005 * pp),
        Row::abs("insurer_weight_2", "frac", eq.pi_i_0[1], 0.0, 0.005 * pp),
        Row::abs("reinsurer_weight_1", "frac", eq.pi_r_0[0], 0.3167, 0.005 * pp),
        Row::abs("reinsurer_weight_2", "frac", eq.pi_r_0[1], -0.1642, 0.005 * pp),
        Row::abs("insurer_merton_fraction", "frac", auto_pi_cm(u_i, m), 0.2948, 0.005 * pp),
        Row::abs(
            "loss_probability_no_discount",
            "frac",
            loss_probability(1.0, &eq, u_r, terms, m)?,
            0.4413 * pp,
            0.003 * pp,
        ),
        Row::abs(
            "alpha_loss_probability_plus_1bp",
            "frac",
            discount_select(DiscountCriterion::LossProbIncrease(0.01 * pp), &eq, u_r, terms, m)?,
            0.8673,
            0.1 * pp,
        ),
        Row::abs(
            "alpha_loss_probability_half_percent",
            "frac",
            discount_select(DiscountCriterion::MaxLossProb(0.5 * pp), &eq, u_r, terms, m)?,
            0.2074,
            0.1 * pp,
        ),
        Row::abs(
            "reinsurer_weuc_5pct_discount",
            "bp",
            weuc(&reference, &discount5, Party::Reinsurer, u_r, terms, m)?.basis_points(),
            6.0,
            0.5,
        ),
        Row::abs(
            "alpha_weuc_cap_25bp",
            "frac",
            discount_select(DiscountCriterion::WeucCap(25e-4), &eq, u_r, terms, m)?,
            0.7927,
            0.1 * pp,
        ),
        Row::abs("insurer_benefit_vs_no_reinsurance", "bp", insurer_benefit(s, InsurerStrategy::Optimal)?, 16.0, 1.0),
        Row::rel(
            "insurer_benefit_rra5_t20_vs_no_reinsurance",
            "bp",
            insurer_benefit(&c5, InsurerStrategy::Optimal)?,
            60.0,
            0.02,
        ),
        Row::rel("insurer_benefit_rra5_t20_vs_constant_mix", "bp", insurer_benefit(&c5, cm)?, 7275.0, 0.02),
        Row::rel(
            "insurer_benefit_rra15_t20_vs_no_reinsurance",
            "bp",
            insurer_benefit(&c15, InsurerStrategy::Optimal)?,
            10.0,
            0.02,
        ),
        Row::rel("insurer_benefit_rra15_t20_vs_constant_mix", "bp", insurer_benefit(&c15, cm)?, 287.0, 0.02),
    ];

    let mut t = Table::new(&["quantity", "unit", "value", "target", "tolerance", "pass"]);
    let mut all = true;
    for r in &rows {
        all &= r.pass();
        t.push(vec![
            r.quantity.into(),
            r.unit.into(),
            r.value.into(),
            r.target.into(),
            r.tolerance.into(),
            r.pass().into(),
        ]);
    }
    Ok((t, all))
}
