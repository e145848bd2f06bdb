//! The bundled example deal: a $10M, 100-charger network funded by an $8M
//! federal grant, $1.5M of private equity, and a $500,000 community share
//! offering splitting dividends 50/50 with the operator.
//!
//! The same deal ships as `scenarios/reference.json` for the CLI; these
//! constructors are the in-crate source for tests and documentation.

use crate::cost::{CostCategory, CostModel, LineItem, UnitItem};
use crate::finance::{
    ChargerFleet, EquityStructure, FundingStack, OperatingSchedule, ShareOffering,
};
use crate::money::Money;
use crate::scenario::Scenario;

fn line(label: &str, category: CostCategory, dollars: i64) -> LineItem {
    LineItem {
        label: label.to_string(),
        category,
        amount: Money::from_dollars(dollars),
    }
}

/// Itemized costs totaling exactly $10,000,000.
pub fn reference_cost_model() -> CostModel {
    CostModel::new(
        vec![
            line("Labor", CostCategory::Capital, 1_000_000),
            line("Material", CostCategory::Capital, 1_000_000),
            line("Permit & tax", CostCategory::Indirect, 20_000),
            line("Land", CostCategory::Capital, 1_000_000),
            line("Traffic Management", CostCategory::Indirect, 2_000_000),
            line("Design and Construction", CostCategory::Indirect, 800_000),
            line("Public Engagement", CostCategory::Indirect, 1_000_000),
            line(
                "Operation for 5 yr",
                CostCategory::OperatingReserve,
                2_500_000,
            ),
            line("Contingency", CostCategory::Contingency, 380_000),
        ],
        vec![
            // Level 3 hardware costs are carried in the lines above; the
            // unit row records the fleet size.
            UnitItem {
                label: "Level 3 Superchargers (350 kW)".to_string(),
                unit_count: 40,
                unit_cost: Money::ZERO,
            },
            UnitItem {
                label: "Level 2 Chargers".to_string(),
                unit_count: 60,
                unit_cost: Money::from_dollars(5_000),
            },
        ],
    )
    .expect("reference cost model is valid")
}

/// 40 fast chargers and 60 Level 2 chargers, each class earning a flat
/// $360,000 per year.
pub fn reference_fleet() -> ChargerFleet {
    ChargerFleet {
        level3_count: 40,
        level2_count: 60,
        level3_annual_revenue: Money::from_dollars(360_000),
        level2_annual_revenue: Money::from_dollars(360_000),
        revenue_multiplier: 1.0,
    }
}

/// Ten-year horizon; the capitalized reserve covers the first five years of
/// operations, then opex runs $500,000/yr.
pub fn reference_schedule() -> OperatingSchedule {
    OperatingSchedule {
        horizon_years: 10,
        subsidized_years: 5,
        annual_opex_after_subsidy: Money::from_dollars(500_000),
    }
}

/// $8M federal / $1.5M private / $500,000 crowdfunded.
pub fn reference_funding() -> FundingStack {
    FundingStack {
        federal_grant: Money::from_dollars(8_000_000),
        private_equity: Money::from_dollars(1_500_000),
        crowdfunding_proceeds: Money::from_dollars(500_000),
        donor_match: Money::ZERO,
        green_bond_principal: Money::ZERO,
        enforce_matching_rule: true,
    }
}

/// 5000 shares at $100 with a 50-share per-holder cap.
pub fn reference_offering() -> ShareOffering {
    ShareOffering {
        share_price: Money::from_dollars(100),
        num_shares: 5000,
        per_holder_cap: 50,
        discount_note: None,
    }
}

/// The full example scenario.
pub fn reference_scenario() -> Scenario {
    Scenario {
        cost_model: reference_cost_model(),
        fleet: reference_fleet(),
        schedule: reference_schedule(),
        funding: reference_funding(),
        equity: EquityStructure::split_even(),
        offering: reference_offering(),
        ledger: None,
        debt: None,
        in_kind_per_share_year: Money::ZERO,
    }
}
