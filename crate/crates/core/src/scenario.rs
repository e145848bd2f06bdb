//! Scenario assembly, program variations, parameter sweeps, and seeded
//! Monte Carlo over revenue uncertainty.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::compliance::{benefit_allocation, BenefitAccountingMethod, ComplianceReport, DEFAULT_THRESHOLD};
use crate::cost::{CostCategory, CostModel, LineItem};
use crate::error::{ModelError, Result};
use crate::finance::{
    annual_gross_revenue, dividend_waterfall, irr, per_share_dividend, CashFlowSeries,
    ChargerFleet, EquityStructure, FundingStack, IrrSolution, OperatingSchedule, Perspective,
    ShareOffering,
};
use crate::ledger::ShareLedger;
use crate::money::Money;
use crate::Rate;

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// Green-bond debt: level annual coupon, principal repaid at tenor end,
/// serviced ahead of any equity distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenBondDebt {
    pub principal: Money,
    pub coupon_rate: f64,
    pub tenor_years: u32,
}

impl GreenBondDebt {
    /// Debt service due in a year: coupon while outstanding, plus the
    /// principal balloon in the tenor's final year.
    pub fn debt_service(&self, year: u32) -> Money {
        if year < 1 || year > self.tenor_years {
            return Money::ZERO;
        }
        let coupon = self.principal.scale_rounded(self.coupon_rate);
        if year == self.tenor_years {
            coupon + self.principal
        } else {
            coupon
        }
    }
}

/// The full deal: costs, fleet, schedules, funding, equity, and offering.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub cost_model: CostModel,
    pub fleet: ChargerFleet,
    pub schedule: OperatingSchedule,
    pub funding: FundingStack,
    pub equity: EquityStructure,
    pub offering: ShareOffering,
    pub ledger: Option<ShareLedger>,
    pub debt: Option<GreenBondDebt>,
    /// Non-monetary community-share value per share per year.
    pub in_kind_per_share_year: Money,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.fleet.validate()?;
        self.schedule.validate()?;
        self.equity.validate()?;
        self.offering.validate()?;
        self.funding.validate_against(self.cost_model.total())?;
        if self.offering.proceeds() != self.funding.crowdfunding_proceeds {
            return Err(ModelError::validation(
                "funding.crowdfunding_proceeds",
                format!(
                    "{} does not match offering proceeds {}",
                    self.funding.crowdfunding_proceeds,
                    self.offering.proceeds()
                ),
            ));
        }
        if let Some(ledger) = &self.ledger {
            if ledger.offering() != &self.offering {
                return Err(ModelError::validation(
                    "ledger",
                    "ledger was built against a different offering",
                ));
            }
        }
        match &self.debt {
            Some(debt) => {
                if debt.principal.is_negative() {
                    return Err(ModelError::validation("debt.principal", "must be >= 0"));
                }
                if !(debt.coupon_rate >= 0.0) || !debt.coupon_rate.is_finite() {
                    return Err(ModelError::validation(
                        "debt.coupon_rate",
                        format!("must be a finite value >= 0, got {}", debt.coupon_rate),
                    ));
                }
                if debt.tenor_years < 1 || debt.tenor_years > self.schedule.horizon_years {
                    return Err(ModelError::validation(
                        "debt.tenor_years",
                        format!(
                            "{} is outside 1..={}",
                            debt.tenor_years, self.schedule.horizon_years
                        ),
                    ));
                }
                if self.funding.green_bond_principal != debt.principal {
                    return Err(ModelError::validation(
                        "funding.green_bond_principal",
                        format!(
                            "{} does not match the bond principal {}",
                            self.funding.green_bond_principal, debt.principal
                        ),
                    ));
                }
            }
            None => {
                if !self.funding.green_bond_principal.is_zero() {
                    return Err(ModelError::validation(
                        "funding.green_bond_principal",
                        "nonzero without a green-bond debt schedule",
                    ));
                }
            }
        }
        if self.in_kind_per_share_year.is_negative() {
            return Err(ModelError::validation(
                "in_kind_per_share_year",
                "must be >= 0",
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Deterministic run
// ---------------------------------------------------------------------------

/// One operating year of the composed engine.
#[derive(Debug, Clone, PartialEq)]
pub struct YearRow {
    pub year: u32,
    pub level3_revenue: Money,
    pub level2_revenue: Money,
    pub opex: Money,
    pub operating_profit: Money,
    pub debt_service: Money,
    pub operator_dividend: Money,
    pub crowd_dividend: Money,
    /// Nearest-cent report of `crowd_dividend / num_shares`.
    pub per_share: Money,
    pub distributing: bool,
    /// Debt service exceeded the operating cash available to pay it.
    pub infeasible: bool,
}

impl YearRow {
    pub fn total_revenue(&self) -> Money {
        self.level3_revenue + self.level2_revenue
    }
}

/// Compose the per-year engine over the horizon.
pub fn yearly_schedule(scenario: &Scenario) -> Result<Vec<YearRow>> {
    let mut rows = Vec::with_capacity(scenario.schedule.horizon_years as usize);
    for year in 1..=scenario.schedule.horizon_years {
        let level3_revenue = scenario
            .fleet
            .level3_annual_revenue
            .scale_rounded(scenario.fleet.revenue_multiplier);
        let level2_revenue = scenario
            .fleet
            .level2_annual_revenue
            .scale_rounded(scenario.fleet.revenue_multiplier);
        debug_assert_eq!(
            level3_revenue + level2_revenue,
            annual_gross_revenue(&scenario.fleet, &scenario.schedule, year)?
        );
        let opex = scenario.schedule.opex(year)?;
        let operating_profit = level3_revenue + level2_revenue - opex;
        let debt_service = scenario
            .debt
            .as_ref()
            .map_or(Money::ZERO, |debt| debt.debt_service(year));
        let infeasible = debt_service > operating_profit.max(Money::ZERO);
        let distribution = dividend_waterfall(operating_profit - debt_service, &scenario.equity);
        let per_share = per_share_dividend(distribution.crowd_pool, scenario.offering.num_shares)?
            .rounded_cents();
        rows.push(YearRow {
            year,
            level3_revenue,
            level2_revenue,
            opex,
            operating_profit,
            debt_service,
            operator_dividend: distribution.operator,
            crowd_dividend: distribution.crowd_pool,
            per_share,
            distributing: distribution.distributing,
            infeasible,
        });
    }
    Ok(rows)
}

/// Per-share investor cash flows: the share price out at year 0, the
/// per-share dividend in at the end of each operating year.
pub fn investor_cashflow_series(scenario: &Scenario) -> Result<CashFlowSeries> {
    let mut flows = vec![(0u32, -scenario.offering.share_price)];
    for row in yearly_schedule(scenario)? {
        flows.push((row.year, row.per_share));
    }
    CashFlowSeries::new(Perspective::PerShare, flows)
}

/// A year where debt service could not be covered from operating cash.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfeasibilityWarning {
    pub year: u32,
    pub debt_service: Money,
    pub operating_profit: Money,
}

/// Everything a deterministic run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub years: Vec<YearRow>,
    /// Per-share dividend by operating year (index 0 = year 1).
    pub per_share_dividends: Vec<Money>,
    /// `None` when the investor series never changes sign or no root lies in
    /// the solver range.
    pub investor_irr: Option<IrrSolution>,
    pub compliance: ComplianceReport,
    pub operator_total: Money,
    pub crowd_total: Money,
    pub warnings: Vec<InfeasibilityWarning>,
}

/// Validate and evaluate a scenario over its horizon.
pub fn run_deterministic(scenario: &Scenario) -> Result<ScenarioResult> {
    scenario.validate()?;
    let years = yearly_schedule(scenario)?;
    let per_share_dividends: Vec<Money> = years.iter().map(|row| row.per_share).collect();

    let series = investor_cashflow_series(scenario)?;
    let investor_irr = match irr(&series) {
        Ok(solution) => Some(solution),
        Err(ModelError::NoSignChange) | Err(ModelError::IrrNotBracketed) => None,
        Err(other) => return Err(other),
    };

    let compliance = benefit_allocation(
        scenario,
        BenefitAccountingMethod::default(),
        DEFAULT_THRESHOLD,
    )?;
    let operator_total = years.iter().map(|row| row.operator_dividend).sum();
    let crowd_total = years.iter().map(|row| row.crowd_dividend).sum();
    let warnings = years
        .iter()
        .filter(|row| row.infeasible)
        .map(|row| InfeasibilityWarning {
            year: row.year,
            debt_service: row.debt_service,
            operating_profit: row.operating_profit,
        })
        .collect();

    Ok(ScenarioResult {
        years,
        per_share_dividends,
        investor_irr,
        compliance,
        operator_total,
        crowd_total,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Variations
// ---------------------------------------------------------------------------

/// A funding source that can absorb or supply rebalanced amounts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FundingSource {
    FederalGrant,
    PrivateEquity,
    CrowdfundingProceeds,
    DonorMatch,
    GreenBondPrincipal,
}

impl FundingSource {
    pub fn as_str(self) -> &'static str {
        match self {
            FundingSource::FederalGrant => "federal_grant",
            FundingSource::PrivateEquity => "private_equity",
            FundingSource::CrowdfundingProceeds => "crowdfunding_proceeds",
            FundingSource::DonorMatch => "donor_match",
            FundingSource::GreenBondPrincipal => "green_bond_principal",
        }
    }
}

impl std::str::FromStr for FundingSource {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<FundingSource> {
        match s {
            "federal_grant" => Ok(FundingSource::FederalGrant),
            "private_equity" => Ok(FundingSource::PrivateEquity),
            "crowdfunding_proceeds" => Ok(FundingSource::CrowdfundingProceeds),
            "donor_match" => Ok(FundingSource::DonorMatch),
            "green_bond_principal" => Ok(FundingSource::GreenBondPrincipal),
            other => Err(ModelError::validation(
                "funded_from",
                format!("unknown funding source {other:?}"),
            )),
        }
    }
}

/// Program variations layered onto a base scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Variation {
    /// A partner matches crowdfunding proceeds at the given ratio; the match
    /// displaces private equity first, then the federal grant.
    DonorMatch { ratio: f64 },
    /// Bond-finance part of the stack; debt service is senior to dividends.
    GreenBond {
        principal: Money,
        coupon_rate: f64,
        tenor_years: u32,
    },
    /// An EV purchase-rebate program added as a cost line and funded from
    /// the named source.
    Rebate {
        per_participant: Money,
        participants: u32,
        funded_from: FundingSource,
    },
    /// Community shares paying non-monetary benefits instead of dividends.
    CommunityShares { in_kind_value_per_share_year: Money },
}

/// Move `amount` out of private equity first, then the federal grant.
fn displace_sources(funding: &mut FundingStack, amount: Money, cause: &str) -> Result<()> {
    if amount > funding.private_equity + funding.federal_grant {
        return Err(ModelError::validation(
            cause,
            format!(
                "{amount} exceeds private equity {} plus federal grant {}",
                funding.private_equity, funding.federal_grant
            ),
        ));
    }
    let from_private = amount.min(funding.private_equity);
    funding.private_equity -= from_private;
    funding.federal_grant -= amount - from_private;
    Ok(())
}

/// Apply a variation, returning a new scenario that still conserves funding.
pub fn apply_variation(scenario: &Scenario, variation: &Variation) -> Result<Scenario> {
    let mut out = scenario.clone();
    match variation {
        Variation::DonorMatch { ratio } => {
            if !(*ratio >= 0.0) || !ratio.is_finite() {
                return Err(ModelError::validation(
                    "variation.donor_match.ratio",
                    format!("must be a finite value >= 0, got {ratio}"),
                ));
            }
            let amount = out.funding.crowdfunding_proceeds.scale_rounded(*ratio);
            displace_sources(&mut out.funding, amount, "variation.donor_match")?;
            out.funding.donor_match += amount;
        }
        Variation::GreenBond {
            principal,
            coupon_rate,
            tenor_years,
        } => {
            if out.debt.is_some() {
                return Err(ModelError::validation(
                    "variation.green_bond",
                    "scenario already carries a green bond",
                ));
            }
            displace_sources(&mut out.funding, *principal, "variation.green_bond")?;
            out.funding.green_bond_principal += *principal;
            out.debt = Some(GreenBondDebt {
                principal: *principal,
                coupon_rate: *coupon_rate,
                tenor_years: *tenor_years,
            });
        }
        Variation::Rebate {
            per_participant,
            participants,
            funded_from,
        } => {
            let amount = per_participant.checked_mul(i64::from(*participants))?;
            out.cost_model.push_line_item(LineItem {
                label: format!("Rebate program ({participants} participants)"),
                category: CostCategory::Indirect,
                amount,
            })?;
            let source = match funded_from {
                FundingSource::FederalGrant => &mut out.funding.federal_grant,
                FundingSource::PrivateEquity => &mut out.funding.private_equity,
                FundingSource::CrowdfundingProceeds => {
                    return Err(ModelError::validation(
                        "variation.rebate.funded_from",
                        "crowdfunding proceeds are fixed by the share offering",
                    ))
                }
                FundingSource::DonorMatch => &mut out.funding.donor_match,
                FundingSource::GreenBondPrincipal => {
                    return Err(ModelError::validation(
                        "variation.rebate.funded_from",
                        "bond principal is fixed by the debt schedule",
                    ))
                }
            };
            *source += amount;
        }
        Variation::CommunityShares {
            in_kind_value_per_share_year,
        } => {
            out.in_kind_per_share_year = *in_kind_value_per_share_year;
        }
    }
    out.validate()?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parameter sweeps
// ---------------------------------------------------------------------------

/// Scenario knobs a sweep can turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    SharePrice,
    NumShares,
    CrowdFraction,
    FederalShare,
    RevenueMultiplier,
    AnnualOpex,
    SubsidizedYears,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::SharePrice => "share_price",
            SweepParameter::NumShares => "num_shares",
            SweepParameter::CrowdFraction => "crowd_fraction",
            SweepParameter::FederalShare => "federal_share",
            SweepParameter::RevenueMultiplier => "revenue_multiplier",
            SweepParameter::AnnualOpex => "annual_opex",
            SweepParameter::SubsidizedYears => "subsidized_years",
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<SweepParameter> {
        match s {
            "share_price" => Ok(SweepParameter::SharePrice),
            "num_shares" => Ok(SweepParameter::NumShares),
            "crowd_fraction" => Ok(SweepParameter::CrowdFraction),
            "federal_share" => Ok(SweepParameter::FederalShare),
            "revenue_multiplier" => Ok(SweepParameter::RevenueMultiplier),
            "annual_opex" => Ok(SweepParameter::AnnualOpex),
            "subsidized_years" => Ok(SweepParameter::SubsidizedYears),
            other => Err(ModelError::validation(
                "param",
                format!(
                    "unknown sweep parameter {other:?} (expected one of share_price, num_shares, \
                     crowd_fraction, federal_share, revenue_multiplier, annual_opex, subsidized_years)"
                ),
            )),
        }
    }
}

fn require_integer(value: f64, field: &str) -> Result<u32> {
    if value.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&value) {
        return Err(ModelError::validation(
            field,
            format!("{value} is not a non-negative integer"),
        ));
    }
    Ok(value as u32)
}

/// After the offering changes, pull crowdfunding proceeds back in line and
/// absorb the difference through private equity, then the federal grant.
fn rebalance_offering_proceeds(scenario: &mut Scenario) -> Result<()> {
    let new_proceeds = scenario.offering.proceeds();
    let delta = new_proceeds - scenario.funding.crowdfunding_proceeds;
    scenario.funding.crowdfunding_proceeds = new_proceeds;
    if delta > Money::ZERO {
        displace_sources(&mut scenario.funding, delta, "sweep")?;
    } else {
        scenario.funding.private_equity += -delta;
    }
    if let Some(ledger) = scenario.ledger.take() {
        scenario.ledger = Some(ledger.with_offering(scenario.offering.clone())?);
    }
    Ok(())
}

fn scenario_with(scenario: &Scenario, param: SweepParameter, value: f64) -> Result<Scenario> {
    let mut out = scenario.clone();
    match param {
        SweepParameter::SharePrice => {
            out.offering.share_price = Money::try_from_dollars_f64(value)?;
            rebalance_offering_proceeds(&mut out)?;
        }
        SweepParameter::NumShares => {
            out.offering.num_shares = require_integer(value, "num_shares")?;
            rebalance_offering_proceeds(&mut out)?;
        }
        SweepParameter::CrowdFraction => {
            out.equity = EquityStructure::new(1.0 - value, value)?;
        }
        SweepParameter::FederalShare => {
            if !(0.0..=1.0).contains(&value) {
                return Err(ModelError::validation(
                    "federal_share",
                    format!("{value} is not in [0, 1]"),
                ));
            }
            let new_federal = out.cost_model.total().fraction_floor(value);
            let delta = new_federal - out.funding.federal_grant;
            out.funding.federal_grant = new_federal;
            out.funding.private_equity -= delta;
        }
        SweepParameter::RevenueMultiplier => {
            out.fleet.revenue_multiplier = value;
        }
        SweepParameter::AnnualOpex => {
            out.schedule.annual_opex_after_subsidy = Money::try_from_dollars_f64(value)?;
        }
        SweepParameter::SubsidizedYears => {
            out.schedule.subsidized_years = require_integer(value, "subsidized_years")?;
        }
    }
    Ok(out)
}

/// One independent deterministic run per value; the input scenario is never
/// modified.
pub fn sweep(
    scenario: &Scenario,
    param: SweepParameter,
    values: &[f64],
) -> Result<Vec<(f64, ScenarioResult)>> {
    values
        .iter()
        .map(|&value| {
            let modified = scenario_with(scenario, param, value)?;
            Ok((value, run_deterministic(&modified)?))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

/// What a distribution perturbs. Revenue uncertainty is the modeled risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbTarget {
    RevenueMultiplier,
}

/// Sampling shape for a perturbed input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionShape {
    Uniform { lo: f64, hi: f64 },
    Triangular { lo: f64, mode: f64, hi: f64 },
    Point { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSpec {
    pub target: PerturbTarget,
    pub shape: DistributionShape,
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.shape {
            DistributionShape::Uniform { lo, hi } => 0.0 < lo && lo <= hi && hi.is_finite(),
            DistributionShape::Triangular { lo, mode, hi } => {
                0.0 < lo && lo <= mode && mode <= hi && hi.is_finite()
            }
            DistributionShape::Point { value } => 0.0 < value && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::validation(
                "distribution",
                format!("invalid bounds in {:?}", self.shape),
            ))
        }
    }
}

#[derive(Clone, Copy)]
enum PreparedShape {
    Point(f64),
    Uniform(rand_distr::Uniform<f64>),
    Triangular(rand_distr::Triangular<f64>),
}

impl PreparedShape {
    fn prepare(shape: DistributionShape) -> Result<PreparedShape> {
        let invalid =
            |e: &dyn std::fmt::Debug| ModelError::validation("distribution", format!("{e:?}"));
        Ok(match shape {
            DistributionShape::Point { value } => PreparedShape::Point(value),
            DistributionShape::Uniform { lo, hi } if lo == hi => PreparedShape::Point(lo),
            DistributionShape::Uniform { lo, hi } => PreparedShape::Uniform(
                rand_distr::Uniform::new_inclusive(lo, hi).map_err(|e| invalid(&e))?,
            ),
            DistributionShape::Triangular { lo, mode: _, hi } if lo == hi => {
                PreparedShape::Point(lo)
            }
            DistributionShape::Triangular { lo, mode, hi } => PreparedShape::Triangular(
                rand_distr::Triangular::new(lo, hi, mode).map_err(|e| invalid(&e))?,
            ),
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            PreparedShape::Point(value) => *value,
            PreparedShape::Uniform(d) => d.sample(rng),
            PreparedShape::Triangular(d) => d.sample(rng),
        }
    }
}

/// The RNG for one sample: stream `index` of the ChaCha8 generator seeded
/// with `seed`. Every sample depends on `(seed, index)` only, so results are
/// identical under any evaluation order or parallelism.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Monte Carlo knobs beyond the sample count and seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloOptions {
    pub n: u32,
    pub seed: u64,
    /// IRR level the exceedance probability is measured against.
    pub target_irr: Rate,
    pub compliance_threshold: f64,
}

impl MonteCarloOptions {
    pub fn new(n: u32, seed: u64) -> MonteCarloOptions {
        MonteCarloOptions {
            n,
            seed,
            target_irr: 0.0,
            compliance_threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// One evaluated sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub index: u32,
    pub revenue_multiplier: f64,
    /// `None` when the investor series has no IRR in the solver range.
    pub irr: Option<Rate>,
    pub compliance_pass: bool,
    pub year1_per_share: Money,
}

/// Summary statistics over all samples. IRR quantiles exclude no-IRR
/// samples; the exceedance and pass probabilities are over all `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub n: u32,
    pub seed: u64,
    pub n_no_irr: u32,
    pub irr_mean: Option<Rate>,
    pub irr_median: Option<Rate>,
    pub irr_p5: Option<Rate>,
    pub irr_p95: Option<Rate>,
    pub target_irr: Rate,
    pub prob_irr_at_least_target: f64,
    pub prob_compliance_pass: f64,
    pub mean_year1_per_share_dollars: f64,
}

fn evaluate_sample(
    scenario: &Scenario,
    shapes: &[PreparedShape],
    options: &MonteCarloOptions,
    index: u32,
) -> Result<SamplePoint> {
    let mut rng = sample_rng(options.seed, u64::from(index));
    let mut sampled = scenario.clone();
    for shape in shapes {
        // the only supported target today; validated upstream
        sampled.fleet.revenue_multiplier = shape.sample(&mut rng);
    }
    let years = yearly_schedule(&sampled)?;
    let series = investor_cashflow_series(&sampled)?;
    let irr_value = match irr(&series) {
        Ok(solution) => Some(solution.rate),
        Err(ModelError::NoSignChange) | Err(ModelError::IrrNotBracketed) => None,
        Err(other) => return Err(other),
    };
    let compliance = benefit_allocation(
        &sampled,
        BenefitAccountingMethod::default(),
        options.compliance_threshold,
    )?;
    Ok(SamplePoint {
        index,
        revenue_multiplier: sampled.fleet.revenue_multiplier,
        irr: irr_value,
        compliance_pass: compliance.pass,
        year1_per_share: years.first().map_or(Money::ZERO, |row| row.per_share),
    })
}

/// Nearest-rank percentile of an ascending slice.
fn percentile(sorted: &[Rate], q: f64) -> Rate {
    let rank = ((sorted.len() as f64) * q).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn summarize(points: &[SamplePoint], options: &MonteCarloOptions) -> MonteCarloSummary {
    let n = points.len() as u32;
    let irrs_in_order: Vec<Rate> = points.iter().filter_map(|p| p.irr).collect();
    let n_no_irr = n - irrs_in_order.len() as u32;
    let mut sorted = irrs_in_order.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("IRR values are never NaN"));

    let (irr_mean, irr_median, irr_p5, irr_p95) = if sorted.is_empty() {
        (None, None, None, None)
    } else {
        let mean = irrs_in_order.iter().sum::<f64>() / irrs_in_order.len() as f64;
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        };
        (
            Some(mean),
            Some(median),
            Some(percentile(&sorted, 0.05)),
            Some(percentile(&sorted, 0.95)),
        )
    };

    let hits = points
        .iter()
        .filter(|p| p.irr.is_some_and(|r| r >= options.target_irr))
        .count();
    let passes = points.iter().filter(|p| p.compliance_pass).count();
    // integer cent sum: order-independent by construction
    let cents_total: i128 = points
        .iter()
        .map(|p| i128::from(p.year1_per_share.cents()))
        .sum();

    MonteCarloSummary {
        n,
        seed: options.seed,
        n_no_irr,
        irr_mean,
        irr_median,
        irr_p5,
        irr_p95,
        target_irr: options.target_irr,
        prob_irr_at_least_target: hits as f64 / n as f64,
        prob_compliance_pass: passes as f64 / n as f64,
        mean_year1_per_share_dollars: cents_total as f64 / n as f64 / 100.0,
    }
}

/// Evaluate every Monte Carlo sample, returned in index order.
///
/// Samples are evaluated in parallel, but sample `i` depends on
/// `(seed, i)` alone, so the vector is bit-identical at any thread count.
pub fn monte_carlo_samples(
    scenario: &Scenario,
    dists: &[DistributionSpec],
    options: &MonteCarloOptions,
) -> Result<Vec<SamplePoint>> {
    if options.n == 0 {
        return Err(ModelError::validation("n", "must be at least 1"));
    }
    scenario.validate()?;
    let mut seen_targets = Vec::new();
    for dist in dists {
        dist.validate()?;
        if seen_targets.contains(&dist.target) {
            return Err(ModelError::validation(
                "distributions",
                "duplicate perturbation target",
            ));
        }
        seen_targets.push(dist.target);
    }
    let shapes: Vec<PreparedShape> = dists
        .iter()
        .map(|d| PreparedShape::prepare(d.shape))
        .collect::<Result<_>>()?;

    (0..options.n)
        .into_par_iter()
        .map(|index| evaluate_sample(scenario, &shapes, options, index))
        .collect()
}

/// Seeded Monte Carlo over the revenue multiplier: evaluate all samples and
/// summarize them in index order.
pub fn monte_carlo(
    scenario: &Scenario,
    dists: &[DistributionSpec],
    options: &MonteCarloOptions,
) -> Result<MonteCarloSummary> {
    let points = monte_carlo_samples(scenario, dists, options)?;
    Ok(summarize(&points, options))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn reference_run_reproduces_the_published_table() {
        let result = run_deterministic(&fixtures::reference_scenario()).unwrap();
        for row in &result.years[..5] {
            assert_eq!(row.total_revenue(), Money::from_dollars(720_000));
            assert_eq!(row.opex, Money::ZERO);
            assert_eq!(row.operating_profit, Money::from_dollars(720_000));
            assert_eq!(row.operator_dividend, Money::from_dollars(360_000));
            assert_eq!(row.crowd_dividend, Money::from_dollars(360_000));
            assert_eq!(row.per_share, Money::from_dollars(72));
        }
        for row in &result.years[5..] {
            assert_eq!(row.opex, Money::from_dollars(500_000));
            assert_eq!(row.operating_profit, Money::from_dollars(220_000));
            assert_eq!(row.operator_dividend, Money::from_dollars(110_000));
            assert_eq!(row.crowd_dividend, Money::from_dollars(110_000));
            assert_eq!(row.per_share, Money::from_dollars(22));
        }
        let irr = result.investor_irr.as_ref().unwrap();
        assert!((0.67..=0.69).contains(&irr.rate));
        assert!(result.compliance.pass);
        assert_eq!(result.compliance.fraction, 0.5);
        assert!(result.warnings.is_empty());
    }

    #[test]
    fn traditional_delivery_totals() {
        let mut scenario = fixtures::reference_scenario();
        scenario.equity = EquityStructure::operator_only();
        let result = run_deterministic(&scenario).unwrap();
        assert_eq!(result.operator_total, Money::from_dollars(4_700_000));
        assert_eq!(result.crowd_total, Money::ZERO);
        assert!(result.investor_irr.is_none(), "no inflows, no IRR");
    }

    #[test]
    fn zero_revenue_has_no_irr() {
        let mut scenario = fixtures::reference_scenario();
        scenario.fleet.level3_annual_revenue = Money::ZERO;
        scenario.fleet.level2_annual_revenue = Money::ZERO;
        let result = run_deterministic(&scenario).unwrap();
        assert!(result.investor_irr.is_none());
        assert!(result.years.iter().take(5).all(|r| r.distributing));
        assert!(result.years.iter().skip(5).all(|r| !r.distributing));
    }

    #[test]
    fn donor_match_doubles_community_funds() {
        let scenario = fixtures::reference_scenario();
        let matched = apply_variation(&scenario, &Variation::DonorMatch { ratio: 1.0 }).unwrap();
        assert_eq!(matched.funding.donor_match, Money::from_dollars(500_000));
        assert_eq!(matched.funding.private_equity, Money::from_dollars(1_000_000));
        assert_eq!(matched.funding.total(), Money::from_dollars(10_000_000));
    }

    #[test]
    fn donor_match_zero_is_identity() {
        let scenario = fixtures::reference_scenario();
        let matched = apply_variation(&scenario, &Variation::DonorMatch { ratio: 0.0 }).unwrap();
        assert_eq!(matched, scenario);
    }

    #[test]
    fn donor_match_cannot_exceed_reducible_sources() {
        let scenario = fixtures::reference_scenario();
        // 20x proceeds = $10M > private equity + federal grant = $9.5M
        let err =
            apply_variation(&scenario, &Variation::DonorMatch { ratio: 20.0 }).unwrap_err();
        assert!(matches!(err, ModelError::Validation { .. }));
    }

    #[test]
    fn green_bond_reduces_early_dividends_and_flags_the_balloon() {
        let scenario = fixtures::reference_scenario();
        let bonded = apply_variation(
            &scenario,
            &Variation::GreenBond {
                principal: Money::from_dollars(1_000_000),
                coupon_rate: 0.05,
                tenor_years: 10,
            },
        )
        .unwrap();
        assert_eq!(bonded.funding.private_equity, Money::from_dollars(500_000));
        assert_eq!(bonded.funding.total(), Money::from_dollars(10_000_000));

        let result = run_deterministic(&bonded).unwrap();
        for row in &result.years[..5] {
            assert_eq!(row.debt_service, Money::from_dollars(50_000));
            assert_eq!(row.per_share, Money::from_dollars(67));
        }
        for row in &result.years[5..9] {
            assert_eq!(row.per_share, Money::from_dollars(17));
        }
        // year 10: $1,050,000 due against $220,000 of operating profit
        let last = &result.years[9];
        assert!(last.infeasible);
        assert!(!last.distributing);
        assert_eq!(last.per_share, Money::ZERO);
        assert_eq!(result.warnings.len(), 1);
        assert_eq!(result.warnings[0].year, 10);
    }

    #[test]
    fn rebate_adds_a_funded_cost_line() {
        let scenario = fixtures::reference_scenario();
        let rebated = apply_variation(
            &scenario,
            &Variation::Rebate {
                per_participant: Money::from_dollars(2_000),
                participants: 100,
                funded_from: FundingSource::PrivateEquity,
            },
        )
        .unwrap();
        assert_eq!(
            rebated.cost_model.total(),
            Money::from_dollars(10_200_000)
        );
        assert_eq!(
            rebated.funding.private_equity,
            Money::from_dollars(1_700_000)
        );
        assert_eq!(rebated.funding.total(), rebated.cost_model.total());
    }

    #[test]
    fn federally_funded_rebate_can_break_the_matching_rule() {
        // $200k of rebates on the federal grant pushes it to 8.2/10.2 > 80%.
        let scenario = fixtures::reference_scenario();
        let err = apply_variation(
            &scenario,
            &Variation::Rebate {
                per_participant: Money::from_dollars(2_000),
                participants: 100,
                funded_from: FundingSource::FederalGrant,
            },
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::Validation { .. }));
    }

    #[test]
    fn community_shares_store_in_kind_value() {
        let scenario = fixtures::reference_scenario();
        let varied = apply_variation(
            &scenario,
            &Variation::CommunityShares {
                in_kind_value_per_share_year: Money::from_dollars(15),
            },
        )
        .unwrap();
        assert_eq!(varied.in_kind_per_share_year, Money::from_dollars(15));
    }

    #[test]
    fn sweep_share_price_is_monotone_in_irr() {
        let scenario = fixtures::reference_scenario();
        let results = sweep(&scenario, SweepParameter::SharePrice, &[50.0, 100.0, 200.0]).unwrap();
        let rates: Vec<f64> = results
            .iter()
            .map(|(_, r)| r.investor_irr.as_ref().unwrap().rate)
            .collect();
        assert!(rates[0] > rates[1] && rates[1] > rates[2], "{rates:?}");
        // conservation held in every run
        for (_, result) in &results {
            assert_eq!(
                result.per_share_dividends[0],
                Money::from_dollars(72),
                "dividends do not depend on the share price"
            );
        }
    }

    #[test]
    fn singleton_sweep_equals_deterministic_run() {
        let scenario = fixtures::reference_scenario();
        let results = sweep(&scenario, SweepParameter::NumShares, &[5000.0]).unwrap();
        assert_eq!(results.len(), 1);
        assert_eq!(results[0].1, run_deterministic(&scenario).unwrap());
    }

    #[test]
    fn sweep_revenue_multiplier_scales_dividends() {
        let scenario = fixtures::reference_scenario();
        let results =
            sweep(&scenario, SweepParameter::RevenueMultiplier, &[0.5, 1.0]).unwrap();
        assert_eq!(results[0].1.per_share_dividends[0], Money::from_dollars(36));
        assert_eq!(results[1].1.per_share_dividends[0], Money::from_dollars(72));
    }

    #[test]
    fn sweep_does_not_mutate_the_input() {
        let scenario = fixtures::reference_scenario();
        let copy = scenario.clone();
        sweep(&scenario, SweepParameter::SharePrice, &[50.0, 200.0]).unwrap();
        assert_eq!(scenario, copy);
    }

    #[test]
    fn unknown_sweep_parameter_is_an_error() {
        assert!("utilization".parse::<SweepParameter>().is_err());
    }

    #[test]
    fn point_distribution_reproduces_the_deterministic_result() {
        let scenario = fixtures::reference_scenario();
        let deterministic = run_deterministic(&scenario).unwrap();
        let expected = deterministic.investor_irr.unwrap().rate;
        let dists = [DistributionSpec {
            target: PerturbTarget::RevenueMultiplier,
            shape: DistributionShape::Point { value: 1.0 },
        }];
        let options = MonteCarloOptions::new(64, 123);
        let points = monte_carlo_samples(&scenario, &dists, &options).unwrap();
        for point in &points {
            assert_eq!(point.irr, Some(expected));
            assert_eq!(point.year1_per_share, Money::from_dollars(72));
            assert!(point.compliance_pass);
        }
        let summary = monte_carlo(&scenario, &dists, &options).unwrap();
        assert_eq!(summary.n_no_irr, 0);
        assert_eq!(summary.irr_median, Some(expected));
        assert_eq!(summary.irr_p5, Some(expected));
        assert_eq!(summary.irr_p95, Some(expected));
        assert!((summary.irr_mean.unwrap() - expected).abs() < 1e-12);
        assert_eq!(summary.mean_year1_per_share_dollars, 72.0);
        assert_eq!(summary.prob_compliance_pass, 1.0);
    }

    #[test]
    fn same_seed_gives_identical_summaries() {
        let scenario = fixtures::reference_scenario();
        let dists = [DistributionSpec {
            target: PerturbTarget::RevenueMultiplier,
            shape: DistributionShape::Uniform { lo: 0.8, hi: 1.2 },
        }];
        let options = MonteCarloOptions::new(500, 42);
        let a = monte_carlo(&scenario, &dists, &options).unwrap();
        let b = monte_carlo(&scenario, &dists, &options).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo(&scenario, &dists, &MonteCarloOptions::new(500, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn triangular_draws_stay_in_bounds() {
        let scenario = fixtures::reference_scenario();
        let summary = monte_carlo(
            &scenario,
            &[DistributionSpec {
                target: PerturbTarget::RevenueMultiplier,
                shape: DistributionShape::Triangular {
                    lo: 0.9,
                    mode: 1.0,
                    hi: 1.1,
                },
            }],
            &MonteCarloOptions::new(300, 7),
        )
        .unwrap();
        assert_eq!(summary.n_no_irr, 0);
        let mean = summary.irr_mean.unwrap();
        assert!((0.5..0.9).contains(&mean), "{mean}");
    }

    #[test]
    fn invalid_distribution_bounds_are_rejected() {
        let scenario = fixtures::reference_scenario();
        let err = monte_carlo(
            &scenario,
            &[DistributionSpec {
                target: PerturbTarget::RevenueMultiplier,
                shape: DistributionShape::Uniform { lo: 1.2, hi: 0.8 },
            }],
            &MonteCarloOptions::new(10, 1),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::Validation { .. }));
    }

    #[test]
    fn debt_schedule_must_match_funding() {
        let mut scenario = fixtures::reference_scenario();
        scenario.debt = Some(GreenBondDebt {
            principal: Money::from_dollars(1_000_000),
            coupon_rate: 0.05,
            tenor_years: 10,
        });
        // funding.green_bond_principal still zero
        assert!(scenario.validate().is_err());
    }
}
