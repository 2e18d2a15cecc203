//! Run-level economic property checks: individual rationality, budget
//! balance and structural consistency. Every truthful pipeline run must come
//! out clean; the experiment runner and the `verify` command both route
//! through here.

use crate::model::Scenario;
use crate::scheme::AuctionRun;
use crate::settlement::check_budget_balance;

/// One failed check, with enough context to debug the run.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub check: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.check, self.detail)
    }
}

/// Checks every economic property of a truthful run. Returns all violations
/// found (empty means the run is clean).
pub fn verify_run(scenario: &Scenario, run: &AuctionRun) -> Vec<Violation> {
    let eps = scenario.params.epsilon;
    let mut violations = Vec::new();
    let mut fail = |check: &'static str, detail: String| {
        violations.push(Violation { check, detail });
    };

    let outcome = &run.outcome;
    let settlement = &run.settlement;

    // Structure: sigma injective, winner sets consistent, prices paired.
    let mut used_cloudlets = std::collections::BTreeSet::new();
    for (&ap_id, &cloudlet_id) in &outcome.sigma {
        if !used_cloudlets.insert(cloudlet_id) {
            fail("matching-injective", format!("cloudlet {cloudlet_id} assigned twice"));
        }
        if !outcome.winner_aps.contains(&ap_id) || !outcome.winner_cloudlets.contains(&cloudlet_id)
        {
            fail("winner-sets", format!("pair ({ap_id}, {cloudlet_id}) missing from winner sets"));
        }
        let p_i = outcome.ap_clearing.get(&ap_id).copied();
        let p_k = outcome.cloudlet_clearing.get(&cloudlet_id).copied();
        match (p_i, p_k) {
            (Some(a), Some(b)) if a == b => {}
            _ => fail(
                "paired-clearing",
                format!("pair ({ap_id}, {cloudlet_id}) has unequal or missing clearing prices"),
            ),
        }
    }
    if outcome.winner_aps.len() != outcome.sigma.len()
        || outcome.winner_cloudlets.len() != outcome.sigma.len()
    {
        fail("winner-sets", "winner set sizes disagree with the assignment".into());
    }

    // Per-pair economics.
    for (&ap_id, &cloudlet_id) in &outcome.sigma {
        let cloudlet = scenario.cloudlet(cloudlet_id);
        let reserve = cloudlet.reserve_price();
        let p = outcome.ap_clearing[&ap_id];
        let budget = run.budgets.get(ap_id, cloudlet_id);
        let Some(report) = run.reports.get(ap_id, cloudlet_id) else {
            fail("report-coverage", format!("no report for pair ({ap_id}, {cloudlet_id})"));
            continue;
        };

        // Seller rationality.
        if p < reserve - eps {
            fail(
                "seller-rationality",
                format!("cloudlet {cloudlet_id} cleared at {p} below reserve {reserve}"),
            );
        }
        // AP-side rationality: P_i <= B_i^k <= R_i^k.
        if p > budget + eps {
            fail(
                "ap-rationality",
                format!("AP {ap_id} cleared at {p} above its bid {budget} on {cloudlet_id}"),
            );
        }
        if budget > report.revenue + eps {
            fail(
                "ap-rationality",
                format!(
                    "AP {ap_id} bid {budget} above its revenue {} on {cloudlet_id}",
                    report.revenue
                ),
            );
        }

        // Buyer rationality and capacity.
        let ap = scenario.ap(ap_id);
        let mut served = 0.0;
        for (j, mu) in ap.members.iter().enumerate() {
            let price = settlement.mu_clearing[(ap_id - 1) as usize][j];
            if report.winners.contains(&mu.mu_id) {
                served += mu.workload;
                if price > mu.bid(cloudlet_id) + eps {
                    fail(
                        "buyer-rationality",
                        format!(
                            "MU {ap_id}/{} charged {price} above bid {}",
                            mu.mu_id,
                            mu.bid(cloudlet_id)
                        ),
                    );
                }
            } else if price != 0.0 {
                fail("loser-clearing", format!("losing MU {ap_id}/{} charged {price}", mu.mu_id));
            }
        }
        if served > cloudlet.capacity + eps {
            fail(
                "capacity",
                format!(
                    "cloudlet {cloudlet_id} overloaded: {served} > {}",
                    cloudlet.capacity
                ),
            );
        }
        let recorded = settlement.served_workload[(cloudlet_id - 1) as usize];
        if (recorded - served).abs() > eps {
            fail(
                "served-workload",
                format!("served workload mismatch on {cloudlet_id}: {recorded} vs {served}"),
            );
        }
    }

    // Losers have identically zero utility and clearing price.
    for ap in &scenario.aps {
        let i = (ap.id - 1) as usize;
        if !outcome.winner_aps.contains(&ap.id) {
            if settlement.ap_utilities[i] != 0.0 {
                fail("loser-utility", format!("losing AP {} has nonzero utility", ap.id));
            }
            for (j, mu) in ap.members.iter().enumerate() {
                if settlement.mu_utilities[i][j] != 0.0 || settlement.mu_clearing[i][j] != 0.0 {
                    fail(
                        "loser-utility",
                        format!("MU {}/{} of losing AP has nonzero settlement", ap.id, mu.mu_id),
                    );
                }
            }
        }
    }
    for c in &scenario.cloudlets {
        if !outcome.winner_cloudlets.contains(&c.id)
            && settlement.cloudlet_utilities[(c.id - 1) as usize] != 0.0
        {
            fail("loser-utility", format!("losing cloudlet {} has nonzero utility", c.id));
        }
    }

    // Social welfare decomposition holds exactly by construction; recheck it.
    let sw = settlement.total_mu_utility()
        + settlement.total_ap_utility()
        + settlement.total_cloudlet_utility();
    if (sw - settlement.social_welfare).abs() > eps {
        fail(
            "social-welfare",
            format!("SW {} disagrees with utility sum {sw}", settlement.social_welfare),
        );
    }
    let reserves_of_winners: f64 = outcome
        .winner_cloudlets
        .iter()
        .map(|k| scenario.cloudlet(*k).reserve_price())
        .sum();
    let receipts: f64 = outcome.cloudlet_clearing.values().sum();
    let decomposed = receipts - reserves_of_winners
        + settlement.total_ap_utility()
        + settlement.total_mu_utility();
    if (decomposed - settlement.social_welfare).abs() > eps.max(1e-9) {
        fail(
            "social-welfare",
            format!("SW decomposition {decomposed} != {}", settlement.social_welfare),
        );
    }

    // Budget balance: the full equality chain.
    let (balanced, ledger) =
        check_budget_balance(settlement, outcome, &run.reports, &run.budgets, eps);
    if !balanced {
        fail(
            "budget-balance",
            format!(
                "val1={} val2={} val3={} val4={}",
                ledger.mu_payments,
                ledger.cloudlet_receipts,
                ledger.ap_margins,
                ledger.winner_budgets
            ),
        );
    }

    violations
}
