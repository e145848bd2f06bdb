//! Project-finance engine for crowd-funded public-private EV charging
//! networks.
//!
//! The model follows one deal shape: an itemized cost stack is funded by a
//! federal grant, private equity, and a community share offering sold to
//! verified disadvantaged-community members. Operating profit runs through a
//! dividend waterfall (debt service first when a green bond is present, then
//! the operator/crowd equity split), crowd pools pay out pro rata by shares,
//! and the resulting benefit streams are tested against the 40%
//! disadvantaged-community allocation threshold.
//!
//! Money is exact integer cents throughout ([`money::Money`]); only
//! discounting and IRR use floats, via the scalar-generic kernel in
//! [`numeric`] instantiated at [`Rate`].

pub mod compliance;
pub mod cost;
pub mod error;
pub mod finance;
pub mod fixtures;
pub mod ledger;
pub mod money;
pub mod numeric;
pub mod scenario;

/// Concrete scalar for discount rates, IRR, and fractions.
pub type Rate = f64;

pub use compliance::{
    benefit_allocation, check_justice40, BenefitAccountingMethod, BenefitBasis, ComplianceReport,
    Justice40Check, DEFAULT_THRESHOLD,
};
pub use cost::{total_cost, CostCategory, CostModel, LineItem, UnitItem};
pub use error::{ModelError, Result};
pub use finance::{
    annual_gross_revenue, dividend_waterfall, irr, npv, operating_profit, per_share_dividend,
    CashFlowSeries, ChargerFleet, Distribution, EquityStructure, FundingStack, IrrSolution,
    OperatingSchedule, Perspective, PerShareDividend, ShareOffering,
};
pub use ledger::{
    allocate, read_applications_csv, AllocationPolicy, Application, Holder, LedgerEntry,
    ShareLedger,
};
pub use money::Money;
pub use scenario::{
    apply_variation, investor_cashflow_series, monte_carlo, monte_carlo_samples,
    run_deterministic, sample_rng, sweep, yearly_schedule, DistributionShape, DistributionSpec,
    FundingSource, GreenBondDebt, InfeasibilityWarning, MonteCarloOptions, MonteCarloSummary,
    PerturbTarget, SamplePoint, Scenario, ScenarioResult, SweepParameter, Variation, YearRow,
};
