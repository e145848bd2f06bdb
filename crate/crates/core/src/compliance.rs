//! Benefit-allocation accounting against the 40% disadvantaged-community
//! threshold.
//!
//! "Benefits" here are the dividend streams the model actually quantifies
//! (plus optional in-kind share value): operator dividends and crowd payouts.
//! Funding sources themselves are never counted as benefits.

use crate::error::{ModelError, Result};
use crate::money::Money;
use crate::scenario::{yearly_schedule, Scenario};
use crate::Rate;

/// The share of distributed benefits that must reach disadvantaged
/// communities.
pub const DEFAULT_THRESHOLD: f64 = 0.40;

/// How yearly benefit amounts are aggregated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BenefitBasis {
    /// Plain sum of nominal amounts, exact in cents.
    NominalSum,
    /// Present value at the given rate, rounded to cents at the end.
    DiscountedSum { rate: Rate },
}

/// Accounting basis plus whether in-kind community-share value counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenefitAccountingMethod {
    pub basis: BenefitBasis,
    pub include_in_kind: bool,
}

impl Default for BenefitAccountingMethod {
    fn default() -> Self {
        BenefitAccountingMethod {
            basis: BenefitBasis::NominalSum,
            include_in_kind: true,
        }
    }
}

impl BenefitAccountingMethod {
    pub fn validate(&self) -> Result<()> {
        if let BenefitBasis::DiscountedSum { rate } = self.basis {
            if !(rate > -1.0) {
                return Err(ModelError::RateBelowFloor { rate });
            }
        }
        Ok(())
    }
}

/// The outcome of a benefit-allocation check.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplianceReport {
    pub benefits_to_disadvantaged: Money,
    pub total_distributed_benefits: Money,
    /// `benefits_to_disadvantaged / total_distributed_benefits`, or 0 when
    /// nothing was distributed.
    pub fraction: f64,
    pub threshold: f64,
    pub pass: bool,
    pub method: BenefitAccountingMethod,
}

/// Pass/fail with signed distance from the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Justice40Check {
    pub pass: bool,
    pub margin: f64,
}

/// Compute the benefit split for a scenario.
///
/// Total distributed benefits are operator dividends plus crowd payouts
/// (plus in-kind value when enabled); disadvantaged benefits are the payouts
/// reaching eligible holders. When the scenario carries no ledger, the
/// issued shares are taken as fully held by eligible community members.
/// A ledger with no allocated shares leaves crowd pools undistributed, so
/// they count toward neither side.
pub fn benefit_allocation(
    scenario: &Scenario,
    method: BenefitAccountingMethod,
    threshold: f64,
) -> Result<ComplianceReport> {
    method.validate()?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ModelError::validation(
            "threshold",
            format!("{threshold} is not in [0, 1]"),
        ));
    }

    let years = yearly_schedule(scenario)?;

    // Shares actually held, and by whom crowd payouts are received.
    let (held_shares, eligible_payout_fraction) = match &scenario.ledger {
        Some(ledger) => {
            let total = ledger.total_allocated();
            (total, if total == 0 { None } else { Some(ledger) })
        }
        None => (scenario.offering.num_shares, None),
    };
    let crowd_distributable = match &scenario.ledger {
        Some(ledger) => ledger.total_allocated() > 0,
        None => true,
    };

    // Per-year (to_disadvantaged, total) in cents.
    let mut yearly: Vec<(u32, Money, Money)> = Vec::with_capacity(years.len());
    for row in &years {
        let mut total = row.operator_dividend;
        let mut disadvantaged = Money::ZERO;
        if crowd_distributable && !row.crowd_dividend.is_zero() {
            total += row.crowd_dividend;
            let eligible_share = match eligible_payout_fraction {
                Some(ledger) => {
                    let payouts = ledger.distribute_dividend(row.crowd_dividend)?;
                    ledger
                        .entries()
                        .filter(|e| e.holder.eligible)
                        .map(|e| payouts[&e.holder.holder_id])
                        .sum()
                }
                // no ledger: issued shares assumed fully eligible-held
                None => row.crowd_dividend,
            };
            disadvantaged += eligible_share;
        }
        if method.include_in_kind && !scenario.in_kind_per_share_year.is_zero() && held_shares > 0 {
            let in_kind = scenario
                .in_kind_per_share_year
                .checked_mul(i64::from(held_shares))?;
            total += in_kind;
            disadvantaged += in_kind;
        }
        yearly.push((row.year, disadvantaged, total));
    }

    let (benefits_to_disadvantaged, total_distributed_benefits) = match method.basis {
        BenefitBasis::NominalSum => (
            yearly.iter().map(|&(_, d, _)| d).sum::<Money>(),
            yearly.iter().map(|&(_, _, t)| t).sum::<Money>(),
        ),
        BenefitBasis::DiscountedSum { rate } => {
            let discount = |select: fn(&(u32, Money, Money)) -> Money| {
                let cents: f64 = yearly
                    .iter()
                    .map(|entry| select(entry).cents() as f64 / (1.0 + rate).powi(entry.0 as i32))
                    .sum();
                Money::from_cents(cents.round() as i64)
            };
            (discount(|e| e.1), discount(|e| e.2))
        }
    };

    let fraction = if total_distributed_benefits.cents() > 0 {
        benefits_to_disadvantaged.cents() as f64 / total_distributed_benefits.cents() as f64
    } else {
        0.0
    };
    Ok(ComplianceReport {
        benefits_to_disadvantaged,
        total_distributed_benefits,
        fraction,
        threshold,
        pass: fraction >= threshold,
        method,
    })
}

/// Inclusive threshold test with margin.
pub fn check_justice40(report: &ComplianceReport) -> Justice40Check {
    Justice40Check {
        pass: report.fraction >= report.threshold,
        margin: report.fraction - report.threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finance::EquityStructure;
    use crate::fixtures;
    use crate::ledger::{allocate, AllocationPolicy, Application, Holder};

    fn nominal() -> BenefitAccountingMethod {
        BenefitAccountingMethod::default()
    }

    #[test]
    fn reference_scenario_is_an_even_split() {
        let scenario = fixtures::reference_scenario();
        let report = benefit_allocation(&scenario, nominal(), DEFAULT_THRESHOLD).unwrap();
        assert_eq!(
            report.benefits_to_disadvantaged,
            Money::from_dollars(2_350_000)
        );
        assert_eq!(
            report.total_distributed_benefits,
            Money::from_dollars(4_700_000)
        );
        assert_eq!(report.fraction, 0.5);
        assert!(report.pass);
    }

    #[test]
    fn zero_eligible_holders_fail() {
        let mut scenario = fixtures::reference_scenario();
        let apps: Vec<Application> = (0..3)
            .map(|i| Application {
                holder: Holder {
                    holder_id: format!("h{i}"),
                    eligible: false,
                    community_tag: None,
                },
                requested_shares: 10,
                arrival_order: i,
            })
            .collect();
        scenario.ledger =
            Some(allocate(&scenario.offering, &apps, AllocationPolicy::Fcfs).unwrap());
        let report = benefit_allocation(&scenario, nominal(), DEFAULT_THRESHOLD).unwrap();
        assert_eq!(report.fraction, 0.0);
        assert!(!report.pass);
        // undistributable crowd pools count toward neither side
        assert_eq!(
            report.total_distributed_benefits,
            Money::from_dollars(2_350_000)
        );
    }

    #[test]
    fn traditional_delivery_fails_the_threshold() {
        let mut scenario = fixtures::reference_scenario();
        scenario.equity = EquityStructure::operator_only();
        let report = benefit_allocation(&scenario, nominal(), DEFAULT_THRESHOLD).unwrap();
        assert_eq!(report.fraction, 0.0);
        assert!(!report.pass);
        assert_eq!(
            report.total_distributed_benefits,
            Money::from_dollars(4_700_000)
        );
    }

    #[test]
    fn threshold_is_inclusive() {
        let report = ComplianceReport {
            benefits_to_disadvantaged: Money::from_dollars(40),
            total_distributed_benefits: Money::from_dollars(100),
            fraction: 0.40,
            threshold: 0.40,
            pass: true,
            method: nominal(),
        };
        let check = check_justice40(&report);
        assert!(check.pass);
        assert!(check.margin.abs() < 1e-15);

        let failing = ComplianceReport {
            fraction: 0.39,
            pass: false,
            ..report
        };
        assert!(!check_justice40(&failing).pass);
    }

    #[test]
    fn margin_reports_headroom() {
        let scenario = fixtures::reference_scenario();
        let report = benefit_allocation(&scenario, nominal(), DEFAULT_THRESHOLD).unwrap();
        let check = check_justice40(&report);
        assert!(check.pass);
        assert!((check.margin - 0.10).abs() < 1e-12);
    }

    #[test]
    fn nominal_equals_discounted_at_zero_rate() {
        let scenario = fixtures::reference_scenario();
        let nominal_report = benefit_allocation(&scenario, nominal(), DEFAULT_THRESHOLD).unwrap();
        let discounted = benefit_allocation(
            &scenario,
            BenefitAccountingMethod {
                basis: BenefitBasis::DiscountedSum { rate: 0.0 },
                include_in_kind: true,
            },
            DEFAULT_THRESHOLD,
        )
        .unwrap();
        assert_eq!(
            nominal_report.benefits_to_disadvantaged,
            discounted.benefits_to_disadvantaged
        );
        assert_eq!(
            nominal_report.total_distributed_benefits,
            discounted.total_distributed_benefits
        );
        assert_eq!(nominal_report.fraction, discounted.fraction);
    }

    #[test]
    fn discounting_below_negative_one_is_rejected() {
        let scenario = fixtures::reference_scenario();
        let err = benefit_allocation(
            &scenario,
            BenefitAccountingMethod {
                basis: BenefitBasis::DiscountedSum { rate: -1.0 },
                include_in_kind: false,
            },
            DEFAULT_THRESHOLD,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::RateBelowFloor { .. }));
    }

    #[test]
    fn in_kind_value_raises_the_fraction() {
        let mut scenario = fixtures::reference_scenario();
        scenario.equity = EquityStructure::operator_only();
        scenario.in_kind_per_share_year = Money::from_dollars(10);
        let with = benefit_allocation(&scenario, nominal(), DEFAULT_THRESHOLD).unwrap();
        // 5000 shares x $10 x 10 years = $500,000 of in-kind benefit
        assert_eq!(
            with.benefits_to_disadvantaged,
            Money::from_dollars(500_000)
        );
        assert!(with.fraction > 0.0);

        let without = benefit_allocation(
            &scenario,
            BenefitAccountingMethod {
                basis: BenefitBasis::NominalSum,
                include_in_kind: false,
            },
            DEFAULT_THRESHOLD,
        )
        .unwrap();
        assert_eq!(without.benefits_to_disadvantaged, Money::ZERO);
    }
}
