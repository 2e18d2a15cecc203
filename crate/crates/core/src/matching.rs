//! Stage II: assigning cloudlets to APs (ASC with the FRM or FRMG selector).
//!
//! ASC walks the APs in a uniformly shuffled order. Each step asks the
//! selector for a candidate (AP, cloudlet) pair: FRM takes the next AP of
//! the shuffle and its most profitable cloudlet, FRMG ranks the whole profit
//! matrix and picks the `rnd`-th best entry globally. A candidate trades
//! only if its profit is strictly positive and some other AP bid for the
//! same cloudlet between the reserve price and the candidate's own bid; the
//! clearing price is the largest such competing bid, so neither side of the
//! trade can move its own price. A failed candidate is zeroed and the walk
//! moves on; the AP is not retried.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Cloudlet, MechanismParams, Money};
use crate::revenue::RevenueTable;
use crate::rng::Streams;

#[derive(Debug, Error, PartialEq)]
pub enum MatchingError {
    #[error("budget matrix is {rows}x{cols} but there are {cloudlets} cloudlets")]
    DimensionMismatch { rows: usize, cols: usize, cloudlets: usize },
}

/// The APs' bids for each cloudlet, `n` rows by `K` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetMatrix {
    n: usize,
    k: usize,
    entries: Vec<Money>,
}

impl BudgetMatrix {
    pub fn zeroed(n: usize, k: usize) -> Self {
        BudgetMatrix { n, k, entries: vec![0.0; n * k] }
    }

    /// The truthful profile: every AP bids exactly its stage I revenue.
    pub fn truthful(reports: &RevenueTable) -> Self {
        let mut b = BudgetMatrix::zeroed(reports.n(), reports.k());
        for report in reports.iter() {
            b.set(report.ap_id, report.cloudlet_id, report.revenue);
        }
        b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, ap_id: u32, cloudlet_id: u32) -> Money {
        self.entries[(ap_id as usize - 1) * self.k + (cloudlet_id as usize - 1)]
    }

    pub fn set(&mut self, ap_id: u32, cloudlet_id: u32, value: Money) {
        self.entries[(ap_id as usize - 1) * self.k + (cloudlet_id as usize - 1)] = value;
    }
}

/// The mutable profit matrix `d_i^k = B_i^k - r_k` ASC works on; matched
/// rows and columns are zeroed as trades complete.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfitMatrix {
    n: usize,
    k: usize,
    entries: Vec<Money>,
}

impl ProfitMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, ap_id: u32, cloudlet_id: u32) -> Money {
        self.entries[(ap_id as usize - 1) * self.k + (cloudlet_id as usize - 1)]
    }

    pub fn set(&mut self, ap_id: u32, cloudlet_id: u32, value: Money) {
        self.entries[(ap_id as usize - 1) * self.k + (cloudlet_id as usize - 1)] = value;
    }

    pub fn zero_row(&mut self, ap_id: u32) {
        let start = (ap_id as usize - 1) * self.k;
        self.entries[start..start + self.k].fill(0.0);
    }

    pub fn zero_column(&mut self, cloudlet_id: u32) {
        let col = cloudlet_id as usize - 1;
        for row in 0..self.n {
            self.entries[row * self.k + col] = 0.0;
        }
    }

    pub fn row_is_zero(&self, ap_id: u32) -> bool {
        let start = (ap_id as usize - 1) * self.k;
        self.entries[start..start + self.k].iter().all(|v| *v == 0.0)
    }
}

/// Entrywise `B_i^k - r_k`.
pub fn profit_matrix(
    budgets: &BudgetMatrix,
    cloudlets: &[Cloudlet],
) -> Result<ProfitMatrix, MatchingError> {
    if budgets.k != cloudlets.len() {
        return Err(MatchingError::DimensionMismatch {
            rows: budgets.n,
            cols: budgets.k,
            cloudlets: cloudlets.len(),
        });
    }
    let reserves: Vec<Money> = cloudlets.iter().map(|c| c.reserve_price()).collect();
    let entries = budgets
        .entries
        .iter()
        .enumerate()
        .map(|(idx, b)| b - reserves[idx % budgets.k])
        .collect();
    Ok(ProfitMatrix { n: budgets.n, k: budgets.k, entries })
}

/// FRM: the `x`-th AP (1-based) of the shuffled order and its most
/// profitable cloudlet, smaller id on ties.
pub fn frm(d: &ProfitMatrix, order: &[u32], x: usize) -> (u32, u32) {
    let ap_id = order[x - 1];
    let mut best_k = 1u32;
    let mut best = d.get(ap_id, 1);
    for k in 2..=d.k as u32 {
        let v = d.get(ap_id, k);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    (ap_id, best_k)
}

/// FRMG: the `rnd`-th most profitable entry of the whole matrix, where
/// `rnd` is uniform on `1..=top2` (1 when `top2 <= 1`). Ranking ties break
/// toward the smaller cloudlet id, then the smaller AP id; `rnd` beyond the
/// matrix size clamps to the last entry. Unprofitable picks are left to the
/// caller's profit guard.
pub fn frmg(d: &ProfitMatrix, top2: u32, rng: &mut impl Rng) -> (u32, u32) {
    let rnd = if top2 > 1 { rng.gen_range(1..=top2 as usize) } else { 1 };
    kth_best_entry(d, rnd)
}

/// The `rank`-th entry (1-based) under (profit desc, cloudlet asc, AP asc),
/// clamped to the matrix size.
fn kth_best_entry(d: &ProfitMatrix, rank: usize) -> (u32, u32) {
    let total = d.n * d.k;
    let rank = rank.min(total);
    // Keep the best `rank` entries in order; profit ties resolve by
    // (cloudlet, AP), which matches scanning k-major within one profit.
    let mut top: Vec<(Money, u32, u32)> = Vec::with_capacity(rank + 1);
    for k in 1..=d.k as u32 {
        for i in 1..=d.n as u32 {
            let v = d.get(i, k);
            let candidate = (v, k, i);
            let pos = top.partition_point(|&(tv, tk, ti)| {
                tv > candidate.0 || (tv == candidate.0 && (tk, ti) <= (candidate.1, candidate.2))
            });
            if pos < rank {
                top.insert(pos, candidate);
                top.truncate(rank);
            }
        }
    }
    let (_, k, i) = top[rank - 1];
    (i, k)
}

/// Which selector feeds candidate pairs to ASC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSelector {
    /// Per-AP local best row entry (FRM) - TACD, TACDp.
    LocalBest,
    /// Randomized global top entry (FRMG) - TACDpp.
    GlobalTop,
}

/// Stage II result: the AP-to-cloudlet assignment and both sides' clearing
/// prices (equal per matched pair).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchingOutcome {
    /// `sigma[ap_id] = cloudlet_id`; injective.
    pub sigma: BTreeMap<u32, u32>,
    pub winner_aps: BTreeSet<u32>,
    pub winner_cloudlets: BTreeSet<u32>,
    pub ap_clearing: BTreeMap<u32, Money>,
    pub cloudlet_clearing: BTreeMap<u32, Money>,
}

impl MatchingOutcome {
    pub fn matched_pairs(&self) -> usize {
        self.sigma.len()
    }

    pub fn assigned_cloudlet(&self, ap_id: u32) -> Option<u32> {
        self.sigma.get(&ap_id).copied()
    }

    pub(crate) fn record(&mut self, ap_id: u32, cloudlet_id: u32, price: Money) {
        self.sigma.insert(ap_id, cloudlet_id);
        self.winner_aps.insert(ap_id);
        self.winner_cloudlets.insert(cloudlet_id);
        self.ap_clearing.insert(ap_id, price);
        self.cloudlet_clearing.insert(cloudlet_id, price);
    }
}

/// ASC with the AP order drawn from the run's shuffle substream and FRMG
/// draws from their own substream, so stage I randomness never perturbs
/// stage II decisions under a fixed seed.
pub fn asc(
    budgets: &BudgetMatrix,
    cloudlets: &[Cloudlet],
    selector: PairSelector,
    params: &MechanismParams,
    streams: &Streams,
) -> Result<MatchingOutcome, MatchingError> {
    let mut order: Vec<u32> = (1..=budgets.n as u32).collect();
    order.shuffle(&mut streams.stream("asc-shuffle"));
    let mut frmg_rng = streams.stream("asc-frmg");
    asc_with_order(budgets, cloudlets, selector, params, &order, &mut frmg_rng)
}

/// ASC over an explicit AP order; the entry point for deterministic replay
/// and for tests that pin the shuffle.
pub fn asc_with_order(
    budgets: &BudgetMatrix,
    cloudlets: &[Cloudlet],
    selector: PairSelector,
    params: &MechanismParams,
    order: &[u32],
    frmg_rng: &mut ChaCha8Rng,
) -> Result<MatchingOutcome, MatchingError> {
    let mut d = profit_matrix(budgets, cloudlets)?;
    let mut outcome = MatchingOutcome::default();
    for x in 1..=budgets.n {
        let (i, k) = match selector {
            PairSelector::LocalBest => frm(&d, order, x),
            PairSelector::GlobalTop => frmg(&d, params.top2, frmg_rng),
        };
        if d.get(i, k) <= 0.0 {
            continue;
        }
        let own_bid = budgets.get(i, k);
        let reserve = cloudlets[(k - 1) as usize].reserve_price();
        match best_competitor(budgets, i, k, reserve, own_bid) {
            Some(price) => {
                outcome.record(i, k, price);
                d.zero_row(i);
                d.zero_column(k);
            }
            None => d.set(i, k, 0.0),
        }
    }
    Ok(outcome)
}

/// The largest bid on cloudlet `k` by an AP other than `i` that lies within
/// `[reserve, own_bid]`; ties between equal bids resolve to the smaller AP,
/// which cannot change the price.
fn best_competitor(
    budgets: &BudgetMatrix,
    i: u32,
    k: u32,
    reserve: Money,
    own_bid: Money,
) -> Option<Money> {
    let mut best: Option<Money> = None;
    for j in 1..=budgets.n as u32 {
        if j == i {
            continue;
        }
        let bid = budgets.get(j, k);
        if bid >= reserve && bid <= own_bid && best.is_none_or(|b| bid > b) {
            best = Some(bid);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SchemeKind;

    fn cloudlets_with_reserves(reserves: &[f64]) -> Vec<Cloudlet> {
        reserves
            .iter()
            .enumerate()
            .map(|(idx, r)| Cloudlet::new((idx + 1) as u32, *r, 1.0))
            .collect()
    }

    fn matrix(rows: &[&[f64]]) -> BudgetMatrix {
        let n = rows.len();
        let k = rows[0].len();
        let mut b = BudgetMatrix::zeroed(n, k);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                b.set((i + 1) as u32, (j + 1) as u32, *v);
            }
        }
        b
    }

    #[test]
    fn profit_matrix_entrywise() {
        let b = matrix(&[&[10.0, 7.0], &[6.0, 9.0]]);
        let d = profit_matrix(&b, &cloudlets_with_reserves(&[5.0, 8.0])).unwrap();
        assert_eq!(d.get(1, 1), 5.0);
        assert_eq!(d.get(1, 2), -1.0);
        assert_eq!(d.get(2, 1), 1.0);
        assert_eq!(d.get(2, 2), 1.0);

        // Break-even budgets profit nothing.
        let even = matrix(&[&[5.0, 8.0]]);
        let d0 = profit_matrix(&even, &cloudlets_with_reserves(&[5.0, 8.0])).unwrap();
        assert_eq!(d0.get(1, 1), 0.0);
        assert_eq!(d0.get(1, 2), 0.0);

        let single = matrix(&[&[85.5]]);
        let d1 = profit_matrix(&single, &cloudlets_with_reserves(&[66.8])).unwrap();
        assert!((d1.get(1, 1) - 18.7).abs() < 1e-12);
    }

    #[test]
    fn profit_matrix_rejects_dimension_mismatch() {
        let b = matrix(&[&[1.0, 2.0]]);
        assert!(matches!(
            profit_matrix(&b, &cloudlets_with_reserves(&[1.0])),
            Err(MatchingError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn frm_picks_best_and_breaks_ties_low() {
        let b = matrix(&[&[10.0, 4.0], &[8.0, 8.0]]);
        let d = profit_matrix(&b, &cloudlets_with_reserves(&[5.0, 5.0])).unwrap();
        assert_eq!(frm(&d, &[1, 2], 1), (1, 1)); // 5 > -1
        assert_eq!(frm(&d, &[1, 2], 2), (2, 1)); // 3 == 3, smaller k

        let zero = profit_matrix(&matrix(&[&[5.0, 5.0]]), &cloudlets_with_reserves(&[5.0, 5.0]))
            .unwrap();
        assert_eq!(frm(&zero, &[1], 1), (1, 1)); // all-zero row still names k=1
    }

    #[test]
    fn frmg_ranking_and_clamp() {
        let b = matrix(&[&[10.0, 4.0], &[6.0, 6.0]]);
        let d = profit_matrix(&b, &cloudlets_with_reserves(&[5.0, 5.0])).unwrap();
        // Profits: (1,1)=5, (2,1)=1, (2,2)=1, (1,2)=-1.
        assert_eq!(kth_best_entry(&d, 1), (1, 1));
        assert_eq!(kth_best_entry(&d, 2), (2, 1)); // tie at 1: smaller k
        assert_eq!(kth_best_entry(&d, 3), (2, 2));
        assert_eq!(kth_best_entry(&d, 4), (1, 2));
        assert_eq!(kth_best_entry(&d, 5), (1, 2)); // clamped

        let mut rng = Streams::new(3).stream("t");
        let picks: std::collections::HashSet<(u32, u32)> =
            (0..100).map(|_| frmg(&d, 2, &mut rng)).collect();
        assert_eq!(
            picks,
            [(1u32, 1u32), (2u32, 1u32)].into_iter().collect::<std::collections::HashSet<_>>()
        );
        // top2 <= 1 is deterministic.
        assert_eq!(frmg(&d, 1, &mut rng), (1, 1));
    }

    #[test]
    fn asc_second_price_style_trade() {
        let b = matrix(&[&[10.0], &[7.0]]);
        let cloudlets = cloudlets_with_reserves(&[5.0]);
        let params = MechanismParams::new(SchemeKind::Tacd);
        // Both processing orders give the same trade.
        for order in [[1u32, 2u32], [2u32, 1u32]] {
            let mut rng = Streams::new(1).stream("frmg");
            let out = asc_with_order(
                &b,
                &cloudlets,
                PairSelector::LocalBest,
                &params,
                &order,
                &mut rng,
            )
            .unwrap();
            assert_eq!(out.assigned_cloudlet(1), Some(1));
            assert_eq!(out.ap_clearing[&1], 7.0);
            assert_eq!(out.cloudlet_clearing[&1], 7.0);
            assert!(!out.winner_aps.contains(&2));
            assert_eq!(out.matched_pairs(), 1);
        }
    }

    #[test]
    fn asc_requires_a_competitor() {
        let b = matrix(&[&[10.0]]);
        let cloudlets = cloudlets_with_reserves(&[5.0]);
        let params = MechanismParams::new(SchemeKind::Tacd);
        let mut rng = Streams::new(1).stream("frmg");
        let out =
            asc_with_order(&b, &cloudlets, PairSelector::LocalBest, &params, &[1], &mut rng)
                .unwrap();
        assert_eq!(out.matched_pairs(), 0);
    }

    #[test]
    fn asc_excludes_break_even_bids() {
        let b = matrix(&[&[5.0], &[5.0]]);
        let cloudlets = cloudlets_with_reserves(&[5.0]);
        let params = MechanismParams::new(SchemeKind::Tacd);
        let mut rng = Streams::new(1).stream("frmg");
        let out = asc_with_order(
            &b,
            &cloudlets,
            PairSelector::LocalBest,
            &params,
            &[1, 2],
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.matched_pairs(), 0);
    }

    #[test]
    fn asc_picks_largest_competitor_within_bounds() {
        // Competitors at 6, 8, 9.5 and 12; own bid 10, reserve 5: price is 9.5.
        let b = matrix(&[&[10.0], &[6.0], &[9.5], &[12.0], &[8.0]]);
        let cloudlets = cloudlets_with_reserves(&[5.0]);
        let params = MechanismParams::new(SchemeKind::Tacd);
        let mut rng = Streams::new(1).stream("frmg");
        let out = asc_with_order(
            &b,
            &cloudlets,
            PairSelector::LocalBest,
            &params,
            &[1, 2, 3, 4, 5],
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.assigned_cloudlet(1), Some(1));
        assert_eq!(out.ap_clearing[&1], 9.5);
    }

    #[test]
    fn asc_failed_ap_is_not_retried() {
        // AP 1's best is cloudlet 1 (profit 10) but nobody else bids there,
        // so the guard fails. Its bid on cloudlet 2 would trade against
        // AP 2's 8, but a failed AP is never revisited; AP 2 itself finds
        // no competitor at or below its own bid. Nothing trades.
        let b = matrix(&[&[15.0, 9.0], &[0.0, 8.0]]);
        let cloudlets = cloudlets_with_reserves(&[5.0, 5.0]);
        let params = MechanismParams::new(SchemeKind::Tacd);
        let mut rng = Streams::new(1).stream("frmg");
        let out = asc_with_order(
            &b,
            &cloudlets,
            PairSelector::LocalBest,
            &params,
            &[1, 2],
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.matched_pairs(), 0);
    }

    #[test]
    fn asc_with_global_selector_matches_profitably() {
        let b = matrix(&[&[10.0, 7.0], &[6.0, 9.0]]);
        let cloudlets = cloudlets_with_reserves(&[5.0, 8.0]);
        let params = MechanismParams::with_tops(SchemeKind::TacdPp, 2, 1);
        let mut rng = Streams::new(1).stream("frmg");
        let out = asc_with_order(
            &b,
            &cloudlets,
            PairSelector::GlobalTop,
            &params,
            &[1, 2],
            &mut rng,
        )
        .unwrap();
        // Global best is (1,1) with profit 5; competitor bid 6 clears it.
        assert_eq!(out.assigned_cloudlet(1), Some(1));
        assert_eq!(out.ap_clearing[&1], 6.0);
        // The remaining candidate (2,2) finds no competitor: AP 1's bid of
        // 7 on cloudlet 2 sits below the reserve 8.
        assert_eq!(out.matched_pairs(), 1);
    }
}
