//! Itemized project cost model with exact integer-cent totals.

use crate::error::{ModelError, Result};
use crate::money::Money;

/// Bucket a cost line belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostCategory {
    Capital,
    Indirect,
    OperatingReserve,
    Contingency,
}

impl CostCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            CostCategory::Capital => "capital",
            CostCategory::Indirect => "indirect",
            CostCategory::OperatingReserve => "operating_reserve",
            CostCategory::Contingency => "contingency",
        }
    }
}

impl std::str::FromStr for CostCategory {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<CostCategory> {
        match s {
            "capital" => Ok(CostCategory::Capital),
            "indirect" => Ok(CostCategory::Indirect),
            "operating_reserve" => Ok(CostCategory::OperatingReserve),
            "contingency" => Ok(CostCategory::Contingency),
            other => Err(ModelError::validation(
                "category",
                format!("unknown cost category {other:?}"),
            )),
        }
    }
}

/// A fixed-amount cost line.
#[derive(Debug, Clone, PartialEq)]
pub struct LineItem {
    pub label: String,
    pub category: CostCategory,
    pub amount: Money,
}

/// A per-unit cost line (`unit_count * unit_cost`).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitItem {
    pub label: String,
    pub unit_count: u32,
    pub unit_cost: Money,
}

impl UnitItem {
    pub fn extended_cost(&self) -> Money {
        // constructor validated the product fits
        self.unit_cost
            .checked_mul(i64::from(self.unit_count))
            .expect("validated at construction")
    }
}

/// The itemized cost stack for one project.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    line_items: Vec<LineItem>,
    unit_items: Vec<UnitItem>,
}

impl CostModel {
    pub fn new(line_items: Vec<LineItem>, unit_items: Vec<UnitItem>) -> Result<CostModel> {
        for item in &line_items {
            if item.amount.is_negative() {
                return Err(ModelError::validation(
                    format!("cost_model.line_items[{}]", item.label),
                    format!("negative amount {}", item.amount),
                ));
            }
        }
        for item in &unit_items {
            if item.unit_cost.is_negative() {
                return Err(ModelError::validation(
                    format!("cost_model.unit_items[{}]", item.label),
                    format!("negative unit cost {}", item.unit_cost),
                ));
            }
            item.unit_cost.checked_mul(i64::from(item.unit_count))?;
        }
        let model = CostModel {
            line_items,
            unit_items,
        };
        model.checked_total()?;
        Ok(model)
    }

    pub fn line_items(&self) -> &[LineItem] {
        &self.line_items
    }

    pub fn unit_items(&self) -> &[UnitItem] {
        &self.unit_items
    }

    /// Exact integer-cent sum over all line and unit items.
    pub fn total(&self) -> Money {
        self.checked_total().expect("validated at construction")
    }

    fn checked_total(&self) -> Result<Money> {
        let mut total: i64 = 0;
        for item in &self.line_items {
            total = total.checked_add(item.amount.cents()).ok_or_else(|| {
                ModelError::validation("cost_model", "total overflows currency range")
            })?;
        }
        for item in &self.unit_items {
            total = total
                .checked_add(item.extended_cost().cents())
                .ok_or_else(|| {
                    ModelError::validation("cost_model", "total overflows currency range")
                })?;
        }
        Ok(Money::from_cents(total))
    }

    /// Append a fixed-amount line (used by the rebate variation).
    pub fn push_line_item(&mut self, item: LineItem) -> Result<()> {
        if item.amount.is_negative() {
            return Err(ModelError::validation(
                format!("cost_model.line_items[{}]", item.label),
                format!("negative amount {}", item.amount),
            ));
        }
        self.line_items.push(item);
        self.checked_total()?;
        Ok(())
    }
}

/// Convenience for `total_cost(cost_model)`.
pub fn total_cost(cost_model: &CostModel) -> Money {
    cost_model.total()
}
