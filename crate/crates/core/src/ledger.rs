//! Share-offering lifecycle: eligibility-gated applications, capped
//! allocation under oversubscription, and exact pro-rata dividend payout.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ModelError, Result};
use crate::finance::ShareOffering;
use crate::money::Money;

/// A prospective shareholder. Eligibility is verified upstream; the flag is
/// an input here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Holder {
    pub holder_id: String,
    pub eligible: bool,
    pub community_tag: Option<String>,
}

/// One holder's request for shares in an offering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Application {
    pub holder: Holder,
    pub requested_shares: u32,
    pub arrival_order: u32,
}

/// How oversubscription is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocationPolicy {
    /// First come, first served by arrival order.
    Fcfs,
    /// A seeded random permutation of the applicant list.
    Lottery { seed: u64 },
}

/// One applicant's final position in the ledger.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub holder: Holder,
    pub requested_shares: u32,
    pub allocated_shares: u32,
}

/// A finalized share ledger. Entries are keyed by holder id, so iteration is
/// deterministic, and the allocation invariants are enforced at construction:
/// total allocation never exceeds the offering, no grant exceeds the
/// per-holder cap, and only eligible holders receive shares.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareLedger {
    offering: ShareOffering,
    entries: BTreeMap<String, LedgerEntry>,
}

impl ShareLedger {
    fn from_entries(
        offering: ShareOffering,
        entries: BTreeMap<String, LedgerEntry>,
    ) -> Result<ShareLedger> {
        offering.validate()?;
        let mut total: u64 = 0;
        for entry in entries.values() {
            if entry.allocated_shares > offering.per_holder_cap {
                return Err(ModelError::validation(
                    format!("ledger[{}]", entry.holder.holder_id),
                    format!(
                        "allocation {} exceeds per-holder cap {}",
                        entry.allocated_shares, offering.per_holder_cap
                    ),
                ));
            }
            if entry.allocated_shares > 0 && !entry.holder.eligible {
                return Err(ModelError::validation(
                    format!("ledger[{}]", entry.holder.holder_id),
                    "shares allocated to an ineligible holder",
                ));
            }
            total += u64::from(entry.allocated_shares);
        }
        if total > u64::from(offering.num_shares) {
            return Err(ModelError::validation(
                "ledger",
                format!(
                    "{total} shares allocated against an offering of {}",
                    offering.num_shares
                ),
            ));
        }
        Ok(ShareLedger { offering, entries })
    }

    pub fn offering(&self) -> &ShareOffering {
        &self.offering
    }

    /// Rebind the ledger to a changed offering, re-checking every invariant
    /// (existing allocations may no longer fit a smaller offering).
    pub fn with_offering(self, offering: ShareOffering) -> Result<ShareLedger> {
        ShareLedger::from_entries(offering, self.entries)
    }

    /// Entries in ascending holder-id order.
    pub fn entries(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn allocation_of(&self, holder_id: &str) -> u32 {
        self.entries
            .get(holder_id)
            .map_or(0, |entry| entry.allocated_shares)
    }

    pub fn total_allocated(&self) -> u32 {
        self.entries.values().map(|e| e.allocated_shares).sum()
    }

    /// Gross proceeds actually raised: allocated shares times share price.
    pub fn proceeds(&self) -> Money {
        self.offering
            .share_price
            .checked_mul(i64::from(self.total_allocated()))
            .expect("offering proceeds validated")
    }

    /// Pay a crowd pool out pro rata by shares, exact to the cent.
    ///
    /// Uses largest-remainder rounding: every holder gets the floored cent
    /// amount of their exact share, then the leftover cents go one each to
    /// the largest fractional remainders, ties broken by ascending holder id.
    /// The payouts always sum to the pool exactly.
    pub fn distribute_dividend(&self, crowd_pool: Money) -> Result<BTreeMap<String, Money>> {
        if crowd_pool.is_negative() {
            return Err(ModelError::validation(
                "crowd_pool",
                format!("cannot distribute a negative pool {crowd_pool}"),
            ));
        }
        let total_shares = u64::from(self.total_allocated());
        if total_shares == 0 {
            if crowd_pool.is_zero() {
                return Ok(self
                    .entries
                    .keys()
                    .map(|id| (id.clone(), Money::ZERO))
                    .collect());
            }
            return Err(ModelError::UndistributablePool { pool: crowd_pool });
        }

        let pool = i128::from(crowd_pool.cents());
        let shares = i128::from(total_shares);
        let mut payouts: BTreeMap<String, Money> = BTreeMap::new();
        // (remainder, holder_id) for the leftover-cent pass
        let mut remainders: Vec<(i128, &str)> = Vec::new();
        let mut paid: i128 = 0;
        for entry in self.entries.values() {
            let exact_numerator = pool * i128::from(entry.allocated_shares);
            let base = exact_numerator / shares;
            paid += base;
            remainders.push((exact_numerator % shares, entry.holder.holder_id.as_str()));
            payouts.insert(
                entry.holder.holder_id.clone(),
                Money::from_cents(base as i64),
            );
        }
        let mut leftover = pool - paid;
        remainders.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        for (_, holder_id) in remainders {
            if leftover == 0 {
                break;
            }
            *payouts.get_mut(holder_id).expect("inserted above") += Money::from_cents(1);
            leftover -= 1;
        }
        Ok(payouts)
    }

    /// Export as CSV with the canonical column set.
    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record([
            "holder_id",
            "eligible",
            "community_tag",
            "requested_shares",
            "allocated_shares",
        ])
        .map_err(|e| ModelError::Csv(e.to_string()))?;
        for entry in self.entries.values() {
            out.write_record([
                entry.holder.holder_id.as_str(),
                if entry.holder.eligible { "true" } else { "false" },
                entry.holder.community_tag.as_deref().unwrap_or(""),
                &entry.requested_shares.to_string(),
                &entry.allocated_shares.to_string(),
            ])
            .map_err(|e| ModelError::Csv(e.to_string()))?;
        }
        out.flush().map_err(|e| ModelError::Csv(e.to_string()))?;
        Ok(())
    }

    /// Import a ledger from CSV, re-validating every invariant.
    pub fn from_csv<R: Read>(offering: ShareOffering, reader: R) -> Result<ShareLedger> {
        let mut entries = BTreeMap::new();
        for (row, record) in read_rows(reader)?.into_iter().enumerate() {
            let allocated_shares = parse_u32(&record.allocated, row, "allocated_shares")?;
            let entry = LedgerEntry {
                holder: record.holder,
                requested_shares: parse_u32(&record.requested, row, "requested_shares")?,
                allocated_shares,
            };
            if entries
                .insert(entry.holder.holder_id.clone(), entry)
                .is_some()
            {
                return Err(ModelError::Csv(format!(
                    "row {}: duplicate holder_id",
                    row + 2
                )));
            }
        }
        ShareLedger::from_entries(offering, entries)
    }
}

// ---------------------------------------------------------------------------
// Allocation
// ---------------------------------------------------------------------------

/// Allocate an offering across applications under the given policy.
///
/// Ineligible applicants are recorded with zero shares. Each grant is
/// `min(requested, cap, remaining)`; shares left after the last grant stay
/// unissued. FCFS processes by `(arrival_order, holder_id)`; the lottery
/// processes a seeded permutation of that canonical order, so the outcome is
/// a pure function of the application set and the seed.
pub fn allocate(
    offering: &ShareOffering,
    applications: &[Application],
    policy: AllocationPolicy,
) -> Result<ShareLedger> {
    offering.validate()?;
    let mut seen = std::collections::BTreeSet::new();
    for app in applications {
        if !seen.insert(app.holder.holder_id.as_str()) {
            return Err(ModelError::validation(
                format!("applications[{}]", app.holder.holder_id),
                "holder applied more than once",
            ));
        }
        if app.requested_shares == 0 {
            return Err(ModelError::validation(
                format!("applications[{}]", app.holder.holder_id),
                "requested_shares must be > 0",
            ));
        }
    }

    let mut order: Vec<&Application> = applications.iter().collect();
    order.sort_by(|a, b| {
        a.arrival_order
            .cmp(&b.arrival_order)
            .then_with(|| a.holder.holder_id.cmp(&b.holder.holder_id))
    });
    if let AllocationPolicy::Lottery { seed } = policy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
    }

    let mut remaining = offering.num_shares;
    let mut entries = BTreeMap::new();
    for app in order {
        let grant = if app.holder.eligible {
            app.requested_shares
                .min(offering.per_holder_cap)
                .min(remaining)
        } else {
            0
        };
        remaining -= grant;
        entries.insert(
            app.holder.holder_id.clone(),
            LedgerEntry {
                holder: app.holder.clone(),
                requested_shares: app.requested_shares,
                allocated_shares: grant,
            },
        );
    }
    ShareLedger::from_entries(offering.clone(), entries)
}

// ---------------------------------------------------------------------------
// CSV helpers
// ---------------------------------------------------------------------------

struct CsvRow {
    holder: Holder,
    requested: String,
    allocated: String,
}

fn read_rows<R: Read>(reader: R) -> Result<Vec<CsvRow>> {
    let mut input = csv::Reader::from_reader(reader);
    let headers = input
        .headers()
        .map_err(|e| ModelError::Csv(e.to_string()))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ModelError::Csv(format!("missing required column {name:?}")))
    };
    let id_col = col("holder_id")?;
    let eligible_col = col("eligible")?;
    let tag_col = col("community_tag")?;
    let requested_col = col("requested_shares")?;
    // allocated_shares is present in ledger exports, absent in application files
    let allocated_col = headers.iter().position(|h| h == "allocated_shares");

    let mut rows = Vec::new();
    for (row, record) in input.records().enumerate() {
        let record = record.map_err(|e| ModelError::Csv(e.to_string()))?;
        let field = |idx: usize| record.get(idx).unwrap_or("").trim().to_string();
        let holder_id = field(id_col);
        if holder_id.is_empty() {
            return Err(ModelError::Csv(format!("row {}: empty holder_id", row + 2)));
        }
        let eligible = match field(eligible_col).to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => {
                return Err(ModelError::Csv(format!(
                    "row {}: eligible must be true/false, got {other:?}",
                    row + 2
                )))
            }
        };
        let tag = field(tag_col);
        rows.push(CsvRow {
            holder: Holder {
                holder_id,
                eligible,
                community_tag: if tag.is_empty() { None } else { Some(tag) },
            },
            requested: field(requested_col),
            allocated: allocated_col.map(field).unwrap_or_default(),
        });
    }
    Ok(rows)
}

fn parse_u32(text: &str, row: usize, column: &str) -> Result<u32> {
    if text.is_empty() {
        return Ok(0);
    }
    text.parse().map_err(|_| {
        ModelError::Csv(format!(
            "row {}: {column} must be a non-negative integer, got {text:?}",
            row + 2
        ))
    })
}

/// Read an application file: the ledger column set minus `allocated_shares`
/// (which is ignored when present). Arrival order is the row order.
pub fn read_applications_csv<R: Read>(reader: R) -> Result<Vec<Application>> {
    Ok(read_rows(reader)?
        .into_iter()
        .enumerate()
        .map(|(row, r)| {
            let requested = parse_u32(&r.requested, row, "requested_shares")?;
            Ok(Application {
                holder: r.holder,
                requested_shares: requested,
                arrival_order: row as u32,
            })
        })
        .collect::<Result<Vec<_>>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn offering() -> ShareOffering {
        ShareOffering {
            share_price: Money::from_dollars(100),
            num_shares: 5000,
            per_holder_cap: 50,
            discount_note: None,
        }
    }

    fn app(id: &str, eligible: bool, requested: u32, arrival: u32) -> Application {
        Application {
            holder: Holder {
                holder_id: id.to_string(),
                eligible,
                community_tag: None,
            },
            requested_shares: requested,
            arrival_order: arrival,
        }
    }

    #[test]
    fn undersubscribed_request_fills_in_full() {
        let ledger = allocate(&offering(), &[app("h1", true, 10, 0)], AllocationPolicy::Fcfs)
            .unwrap();
        assert_eq!(ledger.allocation_of("h1"), 10);
        assert_eq!(ledger.total_allocated(), 10);
    }

    #[test]
    fn fcfs_fills_to_cap_until_exhausted() {
        // 200 applicants at the 50-share cap want 10,000 shares of 5,000:
        // the first 100 by arrival fill, the rest get zero.
        let apps: Vec<Application> = (0..200)
            .map(|i| app(&format!("h{i:03}"), true, 70, i))
            .collect();
        let ledger = allocate(&offering(), &apps, AllocationPolicy::Fcfs).unwrap();
        assert_eq!(ledger.total_allocated(), 5000);
        assert_eq!(ledger.allocation_of("h000"), 50);
        assert_eq!(ledger.allocation_of("h099"), 50);
        assert_eq!(ledger.allocation_of("h100"), 0);
    }

    #[test]
    fn fcfs_ignores_input_ordering() {
        let mut apps: Vec<Application> = (0..40)
            .map(|i| app(&format!("h{i:02}"), true, 200, i))
            .collect();
        let forward = allocate(&offering(), &apps, AllocationPolicy::Fcfs).unwrap();
        apps.reverse();
        let reversed = allocate(&offering(), &apps, AllocationPolicy::Fcfs).unwrap();
        assert_eq!(forward, reversed);
    }

    #[test]
    fn ineligible_applicants_get_zero() {
        let ledger = allocate(
            &offering(),
            &[app("h1", false, 10, 0), app("h2", true, 10, 1)],
            AllocationPolicy::Fcfs,
        )
        .unwrap();
        assert_eq!(ledger.allocation_of("h1"), 0);
        assert_eq!(ledger.allocation_of("h2"), 10);
    }

    #[test]
    fn lottery_is_deterministic_per_seed() {
        let apps: Vec<Application> = (0..300)
            .map(|i| app(&format!("h{i:03}"), true, 40, i))
            .collect();
        let a = allocate(&offering(), &apps, AllocationPolicy::Lottery { seed: 7 }).unwrap();
        let b = allocate(&offering(), &apps, AllocationPolicy::Lottery { seed: 7 }).unwrap();
        assert_eq!(a, b);
        let c = allocate(&offering(), &apps, AllocationPolicy::Lottery { seed: 8 }).unwrap();
        assert_eq!(c.total_allocated(), 5000);
        assert_ne!(a, c, "different seeds should draw different winners");
    }

    #[test]
    fn duplicate_applications_are_rejected() {
        let err = allocate(
            &offering(),
            &[app("h1", true, 10, 0), app("h1", true, 5, 1)],
            AllocationPolicy::Fcfs,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::Validation { .. }));
    }

    #[test]
    fn zero_share_requests_are_rejected() {
        let err = allocate(&offering(), &[app("h1", true, 0, 0)], AllocationPolicy::Fcfs)
            .unwrap_err();
        assert!(matches!(err, ModelError::Validation { .. }));
    }

    #[test]
    fn proceeds_track_allocated_shares() {
        let apps: Vec<Application> = (0..84)
            .map(|i| app(&format!("h{i:02}"), true, 50, i))
            .collect();
        let ledger = allocate(&offering(), &apps, AllocationPolicy::Fcfs).unwrap();
        assert_eq!(ledger.total_allocated(), 4200);
        assert_eq!(ledger.proceeds(), Money::from_dollars(420_000));

        let empty = allocate(&offering(), &[], AllocationPolicy::Fcfs).unwrap();
        assert_eq!(empty.proceeds(), Money::ZERO);
    }

    #[test]
    fn dividend_matches_reference_per_share_rate() {
        // 10 of 5000 shares on a $360,000 pool pays 10 x $72.
        let mut apps = vec![app("holder", true, 10, 0)];
        apps.extend((0..100).map(|i| app(&format!("h{i:03}"), true, 50, i + 1)));
        let ledger = allocate(&offering(), &apps, AllocationPolicy::Fcfs).unwrap();
        assert_eq!(ledger.total_allocated(), 5000 .min(10 + 100 * 50));
        let payouts = ledger
            .distribute_dividend(Money::from_dollars(360_000))
            .unwrap();
        assert_eq!(payouts["holder"], Money::from_dollars(720));
    }

    #[test]
    fn single_holder_takes_whole_pool() {
        let ledger = allocate(&offering(), &[app("only", true, 50, 0)], AllocationPolicy::Fcfs)
            .unwrap();
        let pool = Money::from_cents(123_456_789);
        let payouts = ledger.distribute_dividend(pool).unwrap();
        assert_eq!(payouts["only"], pool);
    }

    #[test]
    fn largest_remainder_breaks_ties_by_holder_id() {
        let ledger = allocate(
            &offering(),
            &[app("a", true, 1, 0), app("b", true, 1, 1), app("c", true, 1, 2)],
            AllocationPolicy::Fcfs,
        )
        .unwrap();
        let payouts = ledger.distribute_dividend(Money::from_dollars(100)).unwrap();
        assert_eq!(payouts["a"], Money::from_cents(3334));
        assert_eq!(payouts["b"], Money::from_cents(3333));
        assert_eq!(payouts["c"], Money::from_cents(3333));
    }

    #[test]
    fn empty_ledger_cannot_take_a_positive_pool() {
        let ledger = allocate(&offering(), &[], AllocationPolicy::Fcfs).unwrap();
        assert!(matches!(
            ledger.distribute_dividend(Money::from_dollars(1)),
            Err(ModelError::UndistributablePool { .. })
        ));
        assert!(ledger.distribute_dividend(Money::ZERO).unwrap().is_empty());
    }

    #[test]
    fn csv_round_trip_preserves_the_ledger() {
        let apps = vec![
            app("h1", true, 30, 0),
            Application {
                holder: Holder {
                    holder_id: "h2".into(),
                    eligible: true,
                    community_tag: Some("tract, north".into()),
                },
                requested_shares: 80,
                arrival_order: 1,
            },
            app("h3", false, 10, 2),
        ];
        let ledger = allocate(&offering(), &apps, AllocationPolicy::Fcfs).unwrap();
        let mut buf = Vec::new();
        ledger.to_csv(&mut buf).unwrap();
        let parsed = ShareLedger::from_csv(offering(), buf.as_slice()).unwrap();
        assert_eq!(parsed, ledger);
    }

    #[test]
    fn csv_import_rejects_ineligible_allocations() {
        let data = "holder_id,eligible,community_tag,requested_shares,allocated_shares\n\
                    h1,false,,10,10\n";
        let err = ShareLedger::from_csv(offering(), data.as_bytes()).unwrap_err();
        assert!(matches!(err, ModelError::Validation { .. }));
    }

    #[test]
    fn application_csv_assigns_arrival_order_by_row() {
        let data = "holder_id,eligible,community_tag,requested_shares\n\
                    h9,true,,10\n\
                    h1,true,west,20\n";
        let apps = read_applications_csv(data.as_bytes()).unwrap();
        assert_eq!(apps.len(), 2);
        assert_eq!(apps[0].holder.holder_id, "h9");
        assert_eq!(apps[0].arrival_order, 0);
        assert_eq!(apps[1].holder.community_tag.as_deref(), Some("west"));
        assert_eq!(apps[1].arrival_order, 1);
    }
}
