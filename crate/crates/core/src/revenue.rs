//! Stage I: per-(AP, cloudlet) revenue computation (ACRC + GTR).
//!
//! For each cloudlet an AP sorts its member MUs by descending performance
//! price ratio, finds the largest prefix that fits the cloudlet's capacity,
//! prices every prefix at the ratio of the first excluded member (GTR), and
//! then picks one prefix index `m` by a scheme-specific randomized rule. The
//! first `m` MUs become potential winners at unit price equal to the
//! `(m+1)`-th member's ratio; members between `m+1` and `s` are sacrificed
//! to keep the charged price independent of the winners' own bids.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AccessPoint, Cloudlet, MechanismParams, Money};
use crate::rng::Streams;

#[derive(Debug, Error, PartialEq)]
pub enum RevenueError {
    #[error("revenue set needs at least two seated MUs, got s = {0}")]
    GroupTooSmall(usize),
    #[error("top1 must be >= 2 (a deterministic maximum is manipulable), got {0}")]
    Top1TooSmall(u32),
    #[error("empty revenue set")]
    EmptyRevenueSet,
}

/// An AP's member group sorted for one cloudlet.
///
/// Positions are 1-based in the documentation (`order[0]` is position 1).
#[derive(Debug, Clone, PartialEq)]
pub struct SortedGroup {
    pub ap_id: u32,
    pub cloudlet_id: u32,
    /// Member indices into `ap.members`, sorted by descending ratio; ties
    /// broken by ascending MU id so runs are reproducible.
    pub order: Vec<usize>,
    /// MU ids in sorted order.
    pub mu_ids: Vec<u32>,
    /// Per-position workloads.
    pub workloads: Vec<f64>,
    /// Cumulative workloads; `prefix_workloads[x-1]` covers positions 1..=x.
    pub prefix_workloads: Vec<f64>,
    /// Per-position performance price ratios (nonincreasing).
    pub pprs: Vec<Money>,
}

impl SortedGroup {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Sorts an AP's members for cloudlet `k` by descending performance price
/// ratio, ascending MU id on ties.
pub fn sort_group(ap: &AccessPoint, k: u32) -> SortedGroup {
    let idx = (k - 1) as usize;
    let ratios: Vec<Money> =
        ap.members.iter().map(|m| m.bids[idx] / m.workload).collect();
    let mut order: Vec<usize> = (0..ap.members.len()).collect();
    order.sort_by(|&a, &b| {
        ratios[b]
            .total_cmp(&ratios[a])
            .then_with(|| ap.members[a].mu_id.cmp(&ap.members[b].mu_id))
    });

    let mut workloads = Vec::with_capacity(order.len());
    let mut prefix_workloads = Vec::with_capacity(order.len());
    let mut pprs = Vec::with_capacity(order.len());
    let mut mu_ids = Vec::with_capacity(order.len());
    let mut acc = 0.0;
    for &i in &order {
        acc += ap.members[i].workload;
        workloads.push(ap.members[i].workload);
        prefix_workloads.push(acc);
        pprs.push(ratios[i]);
        mu_ids.push(ap.members[i].mu_id);
    }
    SortedGroup { ap_id: ap.id, cloudlet_id: k, order, mu_ids, workloads, prefix_workloads, pprs }
}

/// Largest `s` such that the first `s` members fit within `cap`; 0 when even
/// the first member does not fit, `n_i` when the whole group fits.
pub fn find_s(group: &SortedGroup, cap: f64) -> usize {
    group
        .prefix_workloads
        .iter()
        .take_while(|&&load| load <= cap)
        .count()
}

/// GTR: the revenue of each candidate prefix, `S_x = ppr(x+1) * L_x` for
/// `x` in `1..=s-1`. Requires two seated members since each prefix is priced
/// by its first excluded member.
pub fn gtr(group: &SortedGroup, s: usize) -> Result<Vec<Money>, RevenueError> {
    if s < 2 {
        return Err(RevenueError::GroupTooSmall(s));
    }
    debug_assert!(s <= group.len());
    Ok((1..s).map(|x| group.pprs[x] * group.prefix_workloads[x - 1]).collect())
}

/// The inclusive index range TACD draws `m` from: `[floor((s+1)/2), s-1]`.
pub fn tacd_m_range(s: usize) -> (usize, usize) {
    ((s + 1) / 2, s - 1)
}

/// TACD rule: `m` uniform over [`tacd_m_range`].
pub fn select_m_tacd<R: Rng>(s: usize, rng: &mut R) -> Result<usize, RevenueError> {
    if s < 2 {
        return Err(RevenueError::GroupTooSmall(s));
    }
    let (lo, hi) = tacd_m_range(s);
    Ok(rng.gen_range(lo..=hi))
}

/// The candidate indices (1-based) ranked by descending revenue, ascending
/// index on ties.
pub fn topk_indices(revenues: &[Money], top1: u32) -> Vec<usize> {
    let mut ranked: Vec<usize> = (0..revenues.len()).collect();
    ranked.sort_by(|&a, &b| revenues[b].total_cmp(&revenues[a]).then(a.cmp(&b)));
    ranked.truncate((top1 as usize).min(revenues.len()).max(1));
    ranked.iter().map(|i| i + 1).collect()
}

/// TACDp / TACDpp rule: `m` uniform over the `top1` most profitable prefix
/// indices (clamped to `|S|` so small groups still participate).
pub fn select_m_topk<R: Rng>(
    revenues: &[Money],
    top1: u32,
    rng: &mut R,
) -> Result<usize, RevenueError> {
    if top1 < 2 {
        return Err(RevenueError::Top1TooSmall(top1));
    }
    if revenues.is_empty() {
        return Err(RevenueError::EmptyRevenueSet);
    }
    let candidates = topk_indices(revenues, top1);
    Ok(candidates[rng.gen_range(0..candidates.len())])
}

/// How stage I picks the prefix index `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MRule {
    /// Uniform over the middle-to-top half of the prefix range (TACD).
    MidRange,
    /// Uniform over the `top1` most profitable prefixes (TACDp, TACDpp).
    TopRevenue,
    /// Always the single most profitable prefix. Deliberately manipulable;
    /// exists only so the deviation harness can prove it detects an
    /// untruthful stage I. Not reachable from any scheme configuration.
    AlwaysMax,
}

/// Stage I output for one (AP, cloudlet) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenueReport {
    pub ap_id: u32,
    pub cloudlet_id: u32,
    /// The AP's revenue for this cloudlet (`S_m`); its truthful bid.
    pub revenue: Money,
    /// Price per unit of workload charged to every potential winner.
    pub unit_price: Money,
    /// Potential winner MU ids, in sorted-group order.
    pub winners: Vec<u32>,
    /// Potential price per member, aligned with `ap.members`; 0 for
    /// non-winners. Empty on degenerate reports (nobody can be charged).
    pub potential_prices: Vec<Money>,
    pub m: usize,
    pub s: usize,
}

impl RevenueReport {
    /// A group that cannot seat two MUs produces no revenue and never wins.
    pub fn degenerate(ap_id: u32, cloudlet_id: u32, s: usize, _n_members: usize) -> Self {
        RevenueReport {
            ap_id,
            cloudlet_id,
            revenue: 0.0,
            unit_price: 0.0,
            winners: Vec::new(),
            potential_prices: Vec::new(),
            m: 0,
            s,
        }
    }

    pub fn winner_count(&self) -> usize {
        self.m
    }

    /// Potential price of the member at `member_idx` (0-based); 0 for
    /// non-winners.
    pub fn potential_price_at(&self, member_idx: usize) -> Money {
        self.potential_prices.get(member_idx).copied().unwrap_or(0.0)
    }
}

/// All stage I reports of one run, indexed by (AP, cloudlet). Dense for the
/// auction schemes; the HAF baseline only fills its rank-paired cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenueTable {
    n: usize,
    k: usize,
    cells: Vec<Option<RevenueReport>>,
}

impl RevenueTable {
    pub fn new(n: usize, k: usize) -> Self {
        RevenueTable { n, k, cells: vec![None; n * k] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn insert(&mut self, report: RevenueReport) {
        let idx = (report.ap_id as usize - 1) * self.k + (report.cloudlet_id as usize - 1);
        self.cells[idx] = Some(report);
    }

    pub fn get(&self, ap_id: u32, cloudlet_id: u32) -> Option<&RevenueReport> {
        self.cells[(ap_id as usize - 1) * self.k + (cloudlet_id as usize - 1)].as_ref()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RevenueReport> {
        self.cells.iter().filter_map(|c| c.as_ref())
    }
}

/// Builds the report for a chosen `m` (1 <= m <= s-1): winners are the
/// first `m` members, the unit price is position `m+1`'s ratio.
pub fn report_for_m(ap: &AccessPoint, group: &SortedGroup, s: usize, m: usize) -> RevenueReport {
    assert!(m >= 1 && m < s && s <= group.len(), "m must lie in 1..s");
    let unit_price = group.pprs[m]; // position m+1
    let revenue = unit_price * group.prefix_workloads[m - 1];
    let winners: Vec<u32> = group.mu_ids[..m].to_vec();
    let mut potential_prices = vec![0.0; ap.members.len()];
    for pos in 0..m {
        potential_prices[group.order[pos]] = unit_price * group.workloads[pos];
    }
    RevenueReport {
        ap_id: ap.id,
        cloudlet_id: group.cloudlet_id,
        revenue,
        unit_price,
        winners,
        potential_prices,
        m,
        s,
    }
}

/// ACRC: one report per cloudlet for a single AP.
///
/// Each (AP, cloudlet) pair draws `m` from its own named substream, so a
/// bid change in one group can never shift the draw of an unrelated pair.
/// Degenerate groups (s < 2) yield zero-revenue reports, never failures.
pub fn acrc(
    ap: &AccessPoint,
    cloudlets: &[Cloudlet],
    rule: MRule,
    params: &MechanismParams,
    streams: &Streams,
) -> Vec<RevenueReport> {
    cloudlets
        .iter()
        .map(|c| {
            let group = sort_group(ap, c.id);
            let s = find_s(&group, c.capacity);
            report_from_group(ap, &group, s, c, rule, params, streams)
        })
        .collect()
}

pub(crate) fn report_from_group(
    ap: &AccessPoint,
    group: &SortedGroup,
    s: usize,
    cloudlet: &Cloudlet,
    rule: MRule,
    params: &MechanismParams,
    streams: &Streams,
) -> RevenueReport {
    if s < 2 {
        return RevenueReport::degenerate(ap.id, cloudlet.id, s, ap.members.len());
    }
    let revenues = gtr(group, s).expect("s >= 2");
    let mut rng = streams.quick("acrc-m", ap.id as u64, cloudlet.id as u64);
    let m = choose_m(rule, s, &revenues, params, &mut rng);
    report_for_m(ap, group, s, m)
}

/// Draws the prefix index for a seatable group (s >= 2). Parameters are
/// validated at scenario level, so rule application cannot fail here.
pub(crate) fn choose_m<R: Rng>(
    rule: MRule,
    s: usize,
    revenues: &[Money],
    params: &MechanismParams,
    rng: &mut R,
) -> usize {
    match rule {
        MRule::MidRange => select_m_tacd(s, rng).expect("s >= 2"),
        MRule::TopRevenue => {
            select_m_topk(revenues, params.top1, rng).expect("top1 validated >= 2")
        }
        MRule::AlwaysMax => topk_indices(revenues, 2)[0],
    }
}
