//! Deterministic cash-flow engine: revenue and opex schedules, the equity
//! dividend waterfall, per-share returns, NPV, and IRR.

use crate::error::{ModelError, Result};
use crate::money::Money;
use crate::numeric::{self, Bracket};
use crate::Rate;

// ---------------------------------------------------------------------------
// Deal structure types
// ---------------------------------------------------------------------------

/// The revenue-bearing charger fleet. Revenue is a flat annual figure per
/// charger class, scaled by a dimensionless multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargerFleet {
    pub level3_count: u32,
    pub level2_count: u32,
    /// Annual revenue across the whole Level 3 fleet.
    pub level3_annual_revenue: Money,
    /// Annual revenue across the whole Level 2 fleet.
    pub level2_annual_revenue: Money,
    pub revenue_multiplier: f64,
}

impl ChargerFleet {
    pub fn validate(&self) -> Result<()> {
        if self.level3_annual_revenue.is_negative() || self.level2_annual_revenue.is_negative() {
            return Err(ModelError::validation("fleet", "revenues must be >= 0"));
        }
        if !(self.revenue_multiplier > 0.0) || !self.revenue_multiplier.is_finite() {
            return Err(ModelError::validation(
                "fleet.revenue_multiplier",
                format!("must be a finite value > 0, got {}", self.revenue_multiplier),
            ));
        }
        Ok(())
    }
}

/// Horizon and operating-cost schedule. Opex is zero while the capitalized
/// reserve covers operations, then a flat annual figure.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingSchedule {
    pub horizon_years: u32,
    pub subsidized_years: u32,
    pub annual_opex_after_subsidy: Money,
}

impl OperatingSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_years < 1 {
            return Err(ModelError::validation(
                "schedule.horizon_years",
                "must be at least 1",
            ));
        }
        if self.subsidized_years > self.horizon_years {
            return Err(ModelError::validation(
                "schedule.subsidized_years",
                format!(
                    "{} exceeds horizon {}",
                    self.subsidized_years, self.horizon_years
                ),
            ));
        }
        if self.annual_opex_after_subsidy.is_negative() {
            return Err(ModelError::validation(
                "schedule.annual_opex_after_subsidy",
                "must be >= 0",
            ));
        }
        Ok(())
    }

    fn check_year(&self, year: u32) -> Result<()> {
        if year < 1 || year > self.horizon_years {
            return Err(ModelError::YearOutOfHorizon {
                year,
                horizon: self.horizon_years,
            });
        }
        Ok(())
    }

    /// Operating cost for a year inside the horizon.
    pub fn opex(&self, year: u32) -> Result<Money> {
        self.check_year(year)?;
        if year <= self.subsidized_years {
            Ok(Money::ZERO)
        } else {
            Ok(self.annual_opex_after_subsidy)
        }
    }
}

/// Where the build money comes from. Sources must sum to the cost total.
#[derive(Debug, Clone, PartialEq)]
pub struct FundingStack {
    pub federal_grant: Money,
    pub private_equity: Money,
    pub crowdfunding_proceeds: Money,
    pub donor_match: Money,
    pub green_bond_principal: Money,
    /// Enforce the grant program's 20% non-federal matching requirement.
    pub enforce_matching_rule: bool,
}

impl FundingStack {
    pub fn total(&self) -> Money {
        self.federal_grant
            + self.private_equity
            + self.crowdfunding_proceeds
            + self.donor_match
            + self.green_bond_principal
    }

    pub fn validate_against(&self, cost_total: Money) -> Result<()> {
        for (name, amount) in [
            ("funding.federal_grant", self.federal_grant),
            ("funding.private_equity", self.private_equity),
            ("funding.crowdfunding_proceeds", self.crowdfunding_proceeds),
            ("funding.donor_match", self.donor_match),
            ("funding.green_bond_principal", self.green_bond_principal),
        ] {
            if amount.is_negative() {
                return Err(ModelError::validation(name, "must be >= 0"));
            }
        }
        if self.total() != cost_total {
            return Err(ModelError::validation(
                "funding",
                format!(
                    "sources total {} but costs total {}",
                    self.total(),
                    cost_total
                ),
            ));
        }
        // federal <= 80% of total, compared exactly in integer cents
        if self.enforce_matching_rule && self.federal_grant.cents() * 5 > cost_total.cents() * 4 {
            return Err(ModelError::validation(
                "funding.federal_grant",
                format!(
                    "{} exceeds 80% of the {} total (20% matching requirement)",
                    self.federal_grant, cost_total
                ),
            ));
        }
        Ok(())
    }
}

/// How operating profit splits between the operator and the crowd pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquityStructure {
    pub operator_fraction: f64,
    pub crowd_fraction: f64,
}

impl EquityStructure {
    pub fn new(operator_fraction: f64, crowd_fraction: f64) -> Result<EquityStructure> {
        let equity = EquityStructure {
            operator_fraction,
            crowd_fraction,
        };
        equity.validate()?;
        Ok(equity)
    }

    /// The 50/50 community split.
    pub fn split_even() -> EquityStructure {
        EquityStructure {
            operator_fraction: 0.5,
            crowd_fraction: 0.5,
        }
    }

    /// Traditional delivery: the operator keeps every dividend.
    pub fn operator_only() -> EquityStructure {
        EquityStructure {
            operator_fraction: 1.0,
            crowd_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("equity.operator_fraction", self.operator_fraction),
            ("equity.crowd_fraction", self.crowd_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(ModelError::validation(name, format!("{v} is not in [0, 1]")));
            }
        }
        if (self.operator_fraction + self.crowd_fraction - 1.0).abs() > 1e-12 {
            return Err(ModelError::validation(
                "equity",
                format!(
                    "fractions sum to {}, expected 1",
                    self.operator_fraction + self.crowd_fraction
                ),
            ));
        }
        Ok(())
    }
}

/// The community share offering.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareOffering {
    pub share_price: Money,
    pub num_shares: u32,
    pub per_holder_cap: u32,
    /// Reference fair value the offering is discounted from; informational only.
    pub discount_note: Option<Money>,
}

impl ShareOffering {
    pub fn validate(&self) -> Result<()> {
        if self.share_price.is_negative() {
            return Err(ModelError::validation("offering.share_price", "must be >= 0"));
        }
        if self.num_shares == 0 {
            return Err(ModelError::validation("offering.num_shares", "must be > 0"));
        }
        if self.per_holder_cap == 0 {
            return Err(ModelError::validation(
                "offering.per_holder_cap",
                "must be > 0",
            ));
        }
        self.share_price.checked_mul(i64::from(self.num_shares))?;
        Ok(())
    }

    /// Gross proceeds of a fully subscribed offering.
    pub fn proceeds(&self) -> Money {
        self.share_price
            .checked_mul(i64::from(self.num_shares))
            .expect("validated at construction")
    }
}

// ---------------------------------------------------------------------------
// Cash-flow series
// ---------------------------------------------------------------------------

/// Whose cash flows a series describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perspective {
    Project,
    Operator,
    CrowdPool,
    PerShare,
    Holder,
}

/// A year-indexed series of signed amounts from one perspective. Year 0 is
/// the investment epoch; every flow lands at end of year.
#[derive(Debug, Clone, PartialEq)]
pub struct CashFlowSeries {
    perspective: Perspective,
    flows: Vec<(u32, Money)>,
}

impl CashFlowSeries {
    pub fn new(perspective: Perspective, flows: Vec<(u32, Money)>) -> Result<CashFlowSeries> {
        for pair in flows.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(ModelError::validation(
                    "cash_flow_series",
                    format!(
                        "years must be strictly increasing, saw {} then {}",
                        pair[0].0, pair[1].0
                    ),
                ));
            }
        }
        Ok(CashFlowSeries { perspective, flows })
    }

    pub fn perspective(&self) -> Perspective {
        self.perspective
    }

    pub fn flows(&self) -> &[(u32, Money)] {
        &self.flows
    }

    /// Scale every amount, rounding each to the nearest cent.
    pub fn scaled(&self, factor: f64) -> CashFlowSeries {
        CashFlowSeries {
            perspective: self.perspective,
            flows: self
                .flows
                .iter()
                .map(|&(year, amount)| (year, amount.scale_rounded(factor)))
                .collect(),
        }
    }

    fn sign_changes(&self) -> u32 {
        let mut changes = 0;
        let mut prev: Option<bool> = None;
        for &(_, amount) in &self.flows {
            if amount.is_zero() {
                continue;
            }
            let negative = amount.is_negative();
            if let Some(p) = prev {
                if p != negative {
                    changes += 1;
                }
            }
            prev = Some(negative);
        }
        changes
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Gross revenue for one year: `(level3 + level2) * multiplier`.
///
/// Each stream is scaled to the cent before summing, so per-class revenue
/// rows always add up to this total exactly.
pub fn annual_gross_revenue(
    fleet: &ChargerFleet,
    schedule: &OperatingSchedule,
    year: u32,
) -> Result<Money> {
    schedule.check_year(year)?;
    Ok(fleet.level3_annual_revenue.scale_rounded(fleet.revenue_multiplier)
        + fleet.level2_annual_revenue.scale_rounded(fleet.revenue_multiplier))
}

/// Gross revenue minus the year's operating cost. May be negative.
pub fn operating_profit(
    fleet: &ChargerFleet,
    schedule: &OperatingSchedule,
    year: u32,
) -> Result<Money> {
    let revenue = annual_gross_revenue(fleet, schedule, year)?;
    Ok(revenue - schedule.opex(year)?)
}

/// One year's dividend split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distribution {
    pub operator: Money,
    pub crowd_pool: Money,
    /// False when the year had nothing to distribute (non-positive profit).
    pub distributing: bool,
}

/// Split a year's profit between the operator and the crowd pool.
///
/// The operator's share is rounded down to the cent and the crowd pool takes
/// the remainder, so `operator + crowd_pool == profit` exactly. Losses are
/// not distributed: negative profit yields `(0, 0)` with the year flagged
/// non-distributing.
pub fn dividend_waterfall(profit: Money, equity: &EquityStructure) -> Distribution {
    if profit.is_negative() {
        return Distribution {
            operator: Money::ZERO,
            crowd_pool: Money::ZERO,
            distributing: false,
        };
    }
    let operator = profit.fraction_floor(equity.operator_fraction);
    Distribution {
        operator,
        crowd_pool: profit - operator,
        distributing: true,
    }
}

/// A crowd pool divided over the share count, kept as the exact ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerShareDividend {
    pub pool: Money,
    pub shares: u32,
}

impl PerShareDividend {
    /// Nearest-cent report of the exact ratio (ties round away from zero).
    pub fn rounded_cents(&self) -> Money {
        let pool = i128::from(self.pool.cents());
        let shares = i128::from(self.shares);
        let quotient = pool.div_euclid(shares);
        let remainder = pool.rem_euclid(shares);
        let cents = if 2 * remainder >= shares {
            quotient + 1
        } else {
            quotient
        };
        Money::from_cents(cents as i64)
    }

    pub fn exact_f64(&self) -> f64 {
        self.pool.cents() as f64 / 100.0 / f64::from(self.shares)
    }
}

/// Divide a crowd pool by the offering's share count.
pub fn per_share_dividend(crowd_pool: Money, num_shares: u32) -> Result<PerShareDividend> {
    if num_shares == 0 {
        return Err(ModelError::validation(
            "num_shares",
            "cannot divide a dividend pool over zero shares",
        ));
    }
    Ok(PerShareDividend {
        pool: crowd_pool,
        shares: num_shares,
    })
}

/// Net present value of a series in dollars at the given annual rate.
pub fn npv(series: &CashFlowSeries, rate: Rate) -> Result<f64> {
    if !(rate > -1.0) {
        return Err(ModelError::RateBelowFloor { rate });
    }
    Ok(numeric::present_value(
        rate,
        series
            .flows()
            .iter()
            .map(|&(year, amount)| (year, amount.as_dollars_f64())),
    ))
}

/// Solver domain and resolution for [`irr`].
const IRR_SCAN_LO: Rate = -0.999;
const IRR_SCAN_HI: Rate = 10.0;
const IRR_SCAN_STEP: Rate = 0.01;
const IRR_RATE_TOL: Rate = 1e-10;

/// An IRR solve. `rate` is the smallest bracketed root; when the flow
/// sequence has more than one sign change all bracketed roots are reported
/// and the result carries a multiple-root warning.
#[derive(Debug, Clone, PartialEq)]
pub struct IrrSolution {
    pub rate: Rate,
    pub roots: Vec<Rate>,
    pub sign_changes: u32,
}

impl IrrSolution {
    pub fn multiple_root_warning(&self) -> bool {
        self.sign_changes > 1 || self.roots.len() > 1
    }
}

/// Internal rate of return: the rate where [`npv`] crosses zero, found by a
/// 0.01-step bracket scan over (-0.999, 10] followed by bisection to 1e-10.
pub fn irr(series: &CashFlowSeries) -> Result<IrrSolution> {
    let sign_changes = series.sign_changes();
    if sign_changes == 0 {
        return Err(ModelError::NoSignChange);
    }
    let flows: Vec<(u32, f64)> = series
        .flows()
        .iter()
        .map(|&(year, amount)| (year, amount.as_dollars_f64()))
        .collect();
    let f = |rate: Rate| numeric::present_value(rate, flows.iter().copied());
    let brackets: Vec<Bracket<Rate>> = numeric::scan_brackets(f, IRR_SCAN_LO, IRR_SCAN_HI, IRR_SCAN_STEP);
    if brackets.is_empty() {
        return Err(ModelError::IrrNotBracketed);
    }
    let roots: Vec<Rate> = brackets
        .into_iter()
        .map(|bracket| numeric::bisect(f, bracket, IRR_RATE_TOL))
        .collect();
    Ok(IrrSolution {
        rate: roots[0],
        roots,
        sign_changes,
    })
}
