//! Stage III: charging winner MUs and computing utilities and social
//! welfare.
//!
//! Winner MUs pay exactly the potential prices computed in stage I for the
//! cloudlet their AP won. Utilities: an MU earns valuation minus clearing
//! price, an AP earns revenue minus its clearing price, a cloudlet earns its
//! clearing price minus its reserve price; everyone else earns zero. Social
//! welfare is the sum of all three, by construction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matching::{BudgetMatrix, MatchingOutcome};
use crate::model::{Money, Scenario};
use crate::revenue::RevenueTable;

#[derive(Debug, Error, PartialEq)]
pub enum SettlementError {
    #[error("no stage I report for matched pair (AP {ap_id}, cloudlet {cloudlet_id})")]
    MissingReport { ap_id: u32, cloudlet_id: u32 },
}

/// Per-entity clearing prices and utilities of one completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    /// Clearing price per MU, `[ap_id-1][mu_id-1]`; 0 for losers.
    pub mu_clearing: Vec<Vec<Money>>,
    /// Utility per MU under truthful bidding (valuation minus clearing).
    pub mu_utilities: Vec<Vec<Money>>,
    /// Utility per AP (revenue minus clearing price; 0 for losers).
    pub ap_utilities: Vec<Money>,
    /// Utility per cloudlet (clearing price minus reserve; 0 for losers).
    pub cloudlet_utilities: Vec<Money>,
    pub social_welfare: Money,
    /// Workload actually placed on each winner cloudlet (reporting metric).
    pub served_workload: Vec<f64>,
}

impl Settlement {
    pub fn total_mu_utility(&self) -> Money {
        self.mu_utilities.iter().flatten().sum()
    }

    pub fn total_ap_utility(&self) -> Money {
        self.ap_utilities.iter().sum()
    }

    pub fn total_cloudlet_utility(&self) -> Money {
        self.cloudlet_utilities.iter().sum()
    }

    pub fn total_mu_payments(&self) -> Money {
        self.mu_clearing.iter().flatten().sum()
    }

    pub fn mu_utility(&self, ap_id: u32, mu_id: u32) -> Money {
        self.mu_utilities[(ap_id - 1) as usize][(mu_id - 1) as usize]
    }

    pub fn mu_price(&self, ap_id: u32, mu_id: u32) -> Money {
        self.mu_clearing[(ap_id - 1) as usize][(mu_id - 1) as usize]
    }

    pub fn ap_utility(&self, ap_id: u32) -> Money {
        self.ap_utilities[(ap_id - 1) as usize]
    }
}

/// Settles a matching: every matched pair must have a stage I report.
pub fn settle(
    outcome: &MatchingOutcome,
    reports: &RevenueTable,
    scenario: &Scenario,
) -> Result<Settlement, SettlementError> {
    let mut mu_clearing: Vec<Vec<Money>> =
        scenario.aps.iter().map(|ap| vec![0.0; ap.members.len()]).collect();
    let mut mu_utilities = mu_clearing.clone();
    let mut ap_utilities = vec![0.0; scenario.n()];
    let mut cloudlet_utilities = vec![0.0; scenario.k()];
    let mut served_workload = vec![0.0; scenario.k()];

    for (&ap_id, &cloudlet_id) in &outcome.sigma {
        let report = reports
            .get(ap_id, cloudlet_id)
            .ok_or(SettlementError::MissingReport { ap_id, cloudlet_id })?;
        let ap = scenario.ap(ap_id);
        let i = (ap_id - 1) as usize;
        for &mu_id in &report.winners {
            let j = (mu_id - 1) as usize;
            let mu = &ap.members[j];
            let price = report.potential_price_at(j);
            mu_clearing[i][j] = price;
            mu_utilities[i][j] = mu.valuation(cloudlet_id) - price;
            served_workload[(cloudlet_id - 1) as usize] += mu.workload;
        }
        ap_utilities[i] = report.revenue - outcome.ap_clearing[&ap_id];
        cloudlet_utilities[(cloudlet_id - 1) as usize] = outcome.cloudlet_clearing[&cloudlet_id]
            - scenario.cloudlet(cloudlet_id).reserve_price();
    }

    let social_welfare = mu_utilities.iter().flatten().sum::<f64>()
        + ap_utilities.iter().sum::<f64>()
        + cloudlet_utilities.iter().sum::<f64>();

    Ok(Settlement {
        mu_clearing,
        mu_utilities,
        ap_utilities,
        cloudlet_utilities,
        social_welfare,
        served_workload,
    })
}

/// Utility of a participant that paid an extra cost `theta` to deviate:
/// `value - clearing - theta` on a win, `-theta` otherwise. Applies to both
/// MU and AP deviation accounting.
pub fn untruthful_utility(truthful_value: Money, clearing: Money, won: bool, theta: Money) -> Money {
    if won {
        truthful_value - clearing - theta
    } else {
        -theta
    }
}

/// The budget-balance ledger. Under truthful budgets the three-way equality
/// `mu_payments == winner_budgets == cloudlet_receipts + ap_margins` holds
/// exactly (the usual statement is only an inequality; equality is the
/// tighter test and what the mechanism actually produces).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceLedger {
    /// val_1: total clearing prices charged to MUs.
    pub mu_payments: Money,
    /// val_2: total clearing prices paid to cloudlets.
    pub cloudlet_receipts: Money,
    /// val_3: total AP margins (revenue minus AP clearing price).
    pub ap_margins: Money,
    /// val_4: total winning-AP budgets.
    pub winner_budgets: Money,
}

impl BalanceLedger {
    pub fn balanced(&self, epsilon: f64) -> bool {
        (self.mu_payments - self.winner_budgets).abs() <= epsilon
            && (self.winner_budgets - (self.cloudlet_receipts + self.ap_margins)).abs() <= epsilon
    }
}

/// Computes the ledger for a settled run.
pub fn check_budget_balance(
    settlement: &Settlement,
    outcome: &MatchingOutcome,
    reports: &RevenueTable,
    budgets: &BudgetMatrix,
    epsilon: f64,
) -> (bool, BalanceLedger) {
    let mu_payments = settlement.total_mu_payments();
    let cloudlet_receipts: Money = outcome.cloudlet_clearing.values().sum();
    let mut ap_margins = 0.0;
    let mut winner_budgets = 0.0;
    for (&ap_id, &cloudlet_id) in &outcome.sigma {
        let revenue = reports.get(ap_id, cloudlet_id).map_or(0.0, |r| r.revenue);
        ap_margins += revenue - outcome.ap_clearing[&ap_id];
        winner_budgets += budgets.get(ap_id, cloudlet_id);
    }
    let ledger = BalanceLedger { mu_payments, cloudlet_receipts, ap_margins, winner_budgets };
    (ledger.balanced(epsilon), ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AccessPoint, Cloudlet, MechanismParams, MobileUser, SchemeKind};
    use crate::revenue::RevenueReport;

    fn approx(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-9, "{a} != {b}");
    }

    /// Two APs, one cloudlet (reserve 5, capacity 5). AP 1 trades at price 7
    /// with revenue 10 from two winner MUs (price 5 each, valuations 6).
    fn composed() -> (Scenario, RevenueTable, MatchingOutcome, BudgetMatrix) {
        let scenario = Scenario {
            cloudlets: vec![Cloudlet::new(1, 5.0, 1.0)],
            aps: vec![
                AccessPoint {
                    id: 1,
                    members: vec![
                        MobileUser::truthful(1, 1, 1.0, vec![6.0]),
                        MobileUser::truthful(1, 2, 1.0, vec![6.0]),
                    ],
                },
                AccessPoint {
                    id: 2,
                    members: vec![MobileUser::truthful(2, 1, 1.0, vec![7.0])],
                },
            ],
            seed: 0,
            params: MechanismParams::new(SchemeKind::Tacd),
        };
        let mut reports = RevenueTable::new(2, 1);
        reports.insert(RevenueReport {
            ap_id: 1,
            cloudlet_id: 1,
            revenue: 10.0,
            unit_price: 5.0,
            winners: vec![1, 2],
            potential_prices: vec![5.0, 5.0],
            m: 2,
            s: 2,
        });
        let mut outcome = MatchingOutcome::default();
        outcome.record(1, 1, 7.0);
        let mut budgets = BudgetMatrix::zeroed(2, 1);
        budgets.set(1, 1, 10.0);
        budgets.set(2, 1, 7.0);
        (scenario, reports, outcome, budgets)
    }

    #[test]
    fn settles_composed_example() {
        let (scenario, reports, outcome, _) = composed();
        let s = settle(&outcome, &reports, &scenario).unwrap();
        approx(s.ap_utility(1), 3.0); // 10 - 7
        approx(s.cloudlet_utilities[0], 2.0); // 7 - 5
        approx(s.mu_utility(1, 1), 1.0); // 6 - 5
        approx(s.mu_utility(1, 2), 1.0);
        // SW = 5 + total winner-MU utility.
        approx(s.social_welfare, 5.0 + 2.0);
        approx(s.served_workload[0], 2.0);
        // The losing AP and its MU stay at zero.
        approx(s.ap_utility(2), 0.0);
        approx(s.mu_utility(2, 1), 0.0);
        approx(s.mu_price(2, 1), 0.0);
    }

    #[test]
    fn empty_matching_settles_to_zero() {
        let (scenario, reports, _, _) = composed();
        let s = settle(&MatchingOutcome::default(), &reports, &scenario).unwrap();
        assert_eq!(s.social_welfare, 0.0);
        assert!(s.mu_utilities.iter().flatten().all(|u| *u == 0.0));
        assert!(s.ap_utilities.iter().all(|u| *u == 0.0));
        assert!(s.cloudlet_utilities.iter().all(|u| *u == 0.0));
    }

    #[test]
    fn missing_report_is_a_hard_error() {
        let (scenario, _, outcome, _) = composed();
        let empty = RevenueTable::new(2, 1);
        assert_eq!(
            settle(&outcome, &empty, &scenario),
            Err(SettlementError::MissingReport { ap_id: 1, cloudlet_id: 1 })
        );
    }

    #[test]
    fn untruthful_utility_cases() {
        // The documented manipulation nets 0.96 - theta on a win.
        approx(untruthful_utility(4.96, 4.0, true, 0.25), 0.96 - 0.25);
        assert_eq!(untruthful_utility(9.9, 1.0, false, 0.0), 0.0);
        approx(untruthful_utility(5.0, 5.0, true, 0.5), -0.5);
    }

    #[test]
    fn ledger_balances_on_composed_example() {
        let (scenario, reports, outcome, budgets) = composed();
        let s = settle(&outcome, &reports, &scenario).unwrap();
        let (ok, ledger) = check_budget_balance(&s, &outcome, &reports, &budgets, 1e-9);
        assert!(ok);
        approx(ledger.mu_payments, 10.0);
        approx(ledger.cloudlet_receipts, 7.0);
        approx(ledger.ap_margins, 3.0);
        approx(ledger.winner_budgets, 10.0);
    }

    #[test]
    fn ledger_all_zero_without_trades() {
        let (scenario, reports, _, budgets) = composed();
        let outcome = MatchingOutcome::default();
        let s = settle(&outcome, &reports, &scenario).unwrap();
        let (ok, ledger) = check_budget_balance(&s, &outcome, &reports, &budgets, 1e-9);
        assert!(ok);
        assert_eq!(ledger.mu_payments, 0.0);
        assert_eq!(ledger.cloudlet_receipts, 0.0);
        assert_eq!(ledger.ap_margins, 0.0);
        assert_eq!(ledger.winner_budgets, 0.0);
    }

    #[test]
    fn ledger_detects_imbalance() {
        let (scenario, reports, outcome, mut budgets) = composed();
        budgets.set(1, 1, 12.0); // winner budget no longer equals revenue
        let s = settle(&outcome, &reports, &scenario).unwrap();
        let (ok, _) = check_budget_balance(&s, &outcome, &reports, &budgets, 1e-9);
        assert!(!ok);
    }
}
