//! HAF (Heaviest Access Point First): the non-auction baseline.
//!
//! APs are ranked by total member workload, cloudlets by capacity, and the
//! ranks are paired off. Each pair prices like stage I but with `m` fixed to
//! the full seat count `s`: every seated MU wins and pays the ratio of the
//! `s`-th (cheapest seated) member, so the last winner pays exactly its bid.
//! A pair trades whenever the group's budget covers the reserve price, and
//! both sides clear at the reserve price, leaving every cloudlet with zero
//! utility. The whole strategy is deterministic: seeds never matter.

use crate::matching::{BudgetMatrix, MatchingOutcome};
use crate::model::{Scenario, SchemeKind};
use crate::revenue::{find_s, sort_group, RevenueReport, RevenueTable};
use crate::scheme::{AuctionRun, Mechanism, Overrides, Prepared, RunError};
use crate::settlement::settle;

pub struct HafScheme;

impl Mechanism for HafScheme {
    fn kind(&self) -> SchemeKind {
        SchemeKind::Haf
    }

    fn run_prepared(
        &self,
        prep: &Prepared,
        auction_seed: u64,
        _overrides: &Overrides,
    ) -> Result<AuctionRun, RunError> {
        run_haf(prep.scenario, auction_seed)
    }

    fn run(
        &self,
        scenario: &Scenario,
        auction_seed: u64,
        _overrides: &Overrides,
    ) -> Result<AuctionRun, RunError> {
        scenario.validate()?;
        run_haf(scenario, auction_seed)
    }
}

/// Runs HAF on a validated scenario.
pub fn haf(scenario: &Scenario) -> Result<AuctionRun, RunError> {
    scenario.validate()?;
    run_haf(scenario, 0)
}

fn run_haf(scenario: &Scenario, auction_seed: u64) -> Result<AuctionRun, RunError> {
    let n = scenario.n();
    let k = scenario.k();

    // Heaviest APs first, largest cloudlets first; ties toward smaller ids.
    let mut ap_rank: Vec<u32> = (1..=n as u32).collect();
    ap_rank.sort_by(|&a, &b| {
        let wa = scenario.ap(a).total_workload();
        let wb = scenario.ap(b).total_workload();
        wb.total_cmp(&wa).then(a.cmp(&b))
    });
    let mut cloudlet_rank: Vec<u32> = (1..=k as u32).collect();
    cloudlet_rank.sort_by(|&a, &b| {
        let ca = scenario.cloudlet(a).capacity;
        let cb = scenario.cloudlet(b).capacity;
        cb.total_cmp(&ca).then(a.cmp(&b))
    });

    let mut reports = RevenueTable::new(n, k);
    let mut budgets = BudgetMatrix::zeroed(n, k);
    let mut outcome = MatchingOutcome::default();

    for (&ap_id, &cloudlet_id) in ap_rank.iter().zip(&cloudlet_rank) {
        let ap = scenario.ap(ap_id);
        let cloudlet = scenario.cloudlet(cloudlet_id);
        let group = sort_group(ap, cloudlet_id);
        let s = find_s(&group, cloudlet.capacity);
        if s == 0 {
            reports.insert(RevenueReport::degenerate(ap_id, cloudlet_id, 0, ap.members.len()));
            continue;
        }
        // m = s: everyone seated wins at the s-th member's ratio.
        let unit_price = group.pprs[s - 1];
        let revenue = unit_price * group.prefix_workloads[s - 1];
        let mut potential_prices = vec![0.0; ap.members.len()];
        for pos in 0..s {
            potential_prices[group.order[pos]] = unit_price * group.workloads[pos];
        }
        reports.insert(RevenueReport {
            ap_id,
            cloudlet_id,
            revenue,
            unit_price,
            winners: group.mu_ids[..s].to_vec(),
            potential_prices,
            m: s,
            s,
        });
        budgets.set(ap_id, cloudlet_id, revenue);

        let reserve = cloudlet.reserve_price();
        if revenue >= reserve {
            outcome.record(ap_id, cloudlet_id, reserve);
        }
    }

    let settlement = settle(&outcome, &reports, scenario)?;
    Ok(AuctionRun {
        scheme: SchemeKind::Haf,
        auction_seed,
        reports,
        budgets,
        outcome,
        settlement,
    })
}
