//! Executable forms of the mechanism's economic claims: unilateral
//! deviation probes for MUs and APs (with common random numbers), a
//! brute-force matching oracle for small instances, and wall-clock scaling
//! probes.
//!
//! Truthfulness checks are always statistical - the mechanisms are
//! randomized, so a single adverse realization is never a failure; the
//! probes report the mean gain and its standard error over paired trials.

use rayon::prelude::*;
use thiserror::Error;

use crate::matching::{BudgetMatrix, PairSelector};
use crate::model::{Cloudlet, Money, Scenario, SchemeKind};
use crate::revenue::MRule;
use crate::rng::{mix, trial_seed};
use crate::scheme::{run_group_buying, AuctionRun, Mechanism, Overrides, Prepared, RunError};
use crate::stats::summarize;

#[derive(Debug, Error, PartialEq)]
pub enum ProbeError {
    #[error("brute-force oracle handles at most 8x8 markets, got {n}x{k}")]
    OracleTooLarge { n: usize, k: usize },
    #[error("probe target not found: {0}")]
    BadTarget(String),
    #[error(transparent)]
    Run(#[from] RunError),
}

/// Whose bid deviates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeTarget {
    Mu { ap_id: u32, mu_id: u32 },
    Ap { ap_id: u32 },
}

/// One unilateral deviation to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationProbe {
    pub target: ProbeTarget,
    /// The cloudlet dimension the deviated bid applies to.
    pub cloudlet_id: u32,
    pub deviated_bid: Money,
    pub theta: Money,
    pub trials: u32,
    /// Pair truthful and deviated runs on identical substreams. This
    /// isolates the causal effect of the deviation and is what makes tight
    /// gain estimates possible at desk scale.
    pub common_random: bool,
}

/// Mean gain of a deviation over paired trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainStats {
    pub trials: u32,
    /// Mean of (deviated utility net of theta) - (truthful utility).
    pub mean_gain: f64,
    pub std_err: f64,
    pub mean_truthful: f64,
    pub mean_deviated: f64,
}

impl GainStats {
    /// True when the mean gain clears zero by more than three standard
    /// errors, i.e. the deviation is profitable beyond Monte Carlo noise.
    pub fn profitable(&self) -> bool {
        self.mean_gain > 3.0 * self.std_err
    }

    /// The truthfulness acceptance bound: mean gain <= 3 standard errors.
    pub fn within_truthful_bound(&self) -> bool {
        self.mean_gain <= 3.0 * self.std_err
    }
}

/// Evaluates a deviation probe for a single MU or AP against a mechanism:
/// runs the full pipeline under truthful and deviated bids over paired
/// trials and reports the utility gain.
pub fn deviation_gain(
    mechanism: &dyn Mechanism,
    scenario: &Scenario,
    probe: &DeviationProbe,
    base_seed: u64,
) -> Result<GainStats, ProbeError> {
    validate_target(scenario, probe)?;
    let truthful_prep = Prepared::build(scenario)?;

    // MU deviations rewrite one bid entry before stage I; AP deviations
    // override one budget entry after it.
    let deviated_scenario;
    let (deviated_prep, overrides) = match probe.target {
        ProbeTarget::Mu { ap_id, mu_id } => {
            let mut s = scenario.clone();
            s.aps[(ap_id - 1) as usize].members[(mu_id - 1) as usize].bids
                [(probe.cloudlet_id - 1) as usize] = probe.deviated_bid;
            deviated_scenario = s;
            (Prepared::build(&deviated_scenario)?, Overrides::NONE)
        }
        ProbeTarget::Ap { ap_id } => {
            let o = Overrides::budget(ap_id, probe.cloudlet_id, probe.deviated_bid);
            (Prepared::build(scenario)?, o)
        }
    };

    let utilities: Vec<(f64, f64)> = (0..probe.trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(base_seed, t);
            let dev_seed = if probe.common_random { seed } else { mix(seed, 0x0dd_ba11) };
            let truthful = mechanism
                .run_prepared(&truthful_prep, seed, &Overrides::NONE)
                .expect("validated scenario");
            let deviated = mechanism
                .run_prepared(&deviated_prep, dev_seed, &overrides)
                .expect("validated scenario");
            let u_truthful = target_utility(&truthful, probe.target);
            // Gross utility is (value - clearing) on a win and 0 otherwise,
            // so net-of-theta deviated utility is gross - theta either way.
            let u_deviated = target_utility(&deviated, probe.target) - probe.theta;
            (u_truthful, u_deviated)
        })
        .collect();

    let gains: Vec<f64> = utilities.iter().map(|(t, d)| d - t).collect();
    let summary = summarize(&gains);
    let mean_truthful =
        utilities.iter().map(|(t, _)| t).sum::<f64>() / utilities.len() as f64;
    let mean_deviated =
        utilities.iter().map(|(_, d)| d).sum::<f64>() / utilities.len() as f64;
    Ok(GainStats {
        trials: probe.trials,
        mean_gain: summary.mean,
        std_err: summary.std_err,
        mean_truthful,
        mean_deviated,
    })
}

fn validate_target(scenario: &Scenario, probe: &DeviationProbe) -> Result<(), ProbeError> {
    let k = scenario.k() as u32;
    if probe.cloudlet_id == 0 || probe.cloudlet_id > k {
        return Err(ProbeError::BadTarget(format!("cloudlet {}", probe.cloudlet_id)));
    }
    match probe.target {
        ProbeTarget::Mu { ap_id, mu_id } => {
            let ap = scenario
                .aps
                .get((ap_id as usize).wrapping_sub(1))
                .ok_or_else(|| ProbeError::BadTarget(format!("AP {ap_id}")))?;
            if mu_id == 0 || mu_id as usize > ap.members.len() {
                return Err(ProbeError::BadTarget(format!("MU {ap_id}/{mu_id}")));
            }
        }
        ProbeTarget::Ap { ap_id } => {
            if ap_id == 0 || ap_id as usize > scenario.n() {
                return Err(ProbeError::BadTarget(format!("AP {ap_id}")));
            }
        }
    }
    if probe.trials == 0 {
        return Err(ProbeError::BadTarget("trials must be >= 1".into()));
    }
    if probe.deviated_bid < 0.0 {
        return Err(ProbeError::BadTarget("deviated bid must be >= 0".into()));
    }
    Ok(())
}

fn target_utility(run: &AuctionRun, target: ProbeTarget) -> f64 {
    match target {
        ProbeTarget::Mu { ap_id, mu_id } => run.settlement.mu_utility(ap_id, mu_id),
        ProbeTarget::Ap { ap_id } => run.settlement.ap_utility(ap_id),
    }
}

/// A stage I mutated to always pick the maximum-revenue prefix.
/// Deliberately untruthful: it exists so tests can prove the deviation
/// probes detect manipulation when it is really there.
pub struct AlwaysMaxStageOne {
    pub selector: PairSelector,
}

impl Mechanism for AlwaysMaxStageOne {
    fn kind(&self) -> SchemeKind {
        SchemeKind::TacdP
    }

    fn name(&self) -> &'static str {
        "TACDp/always-max"
    }

    fn run_prepared(
        &self,
        prep: &Prepared,
        auction_seed: u64,
        overrides: &Overrides,
    ) -> Result<AuctionRun, RunError> {
        run_group_buying(prep, auction_seed, overrides, self.kind(), MRule::AlwaysMax, self.selector)
    }
}

/// One point of an AP-bid sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub deviated_bid: Money,
    pub mean_utility: f64,
    pub std_err: f64,
}

/// An AP deviation curve: the truthful average next to the average utility
/// at every deviated bid on the grid, all under common random numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub ap_id: u32,
    pub cloudlet_id: u32,
    pub trials: u32,
    pub truthful_mean: f64,
    pub truthful_std_err: f64,
    pub points: Vec<SweepPoint>,
}

/// Sweeps an AP's bid on one cloudlet across `bids`, averaging utility
/// (net of `theta` for deviated bids) over `trials` seeded runs per point.
pub fn ap_deviation_sweep(
    mechanism: &dyn Mechanism,
    scenario: &Scenario,
    ap_id: u32,
    cloudlet_id: u32,
    bids: &[Money],
    trials: u32,
    theta: Money,
    base_seed: u64,
) -> Result<SweepCurve, ProbeError> {
    let prep = Prepared::build(scenario)?;
    let seeds: Vec<u64> = (0..trials as u64).map(|t| trial_seed(base_seed, t)).collect();

    let truthful: Vec<f64> = seeds
        .par_iter()
        .map(|&seed| {
            let run = mechanism
                .run_prepared(&prep, seed, &Overrides::NONE)
                .expect("validated scenario");
            run.settlement.ap_utility(ap_id)
        })
        .collect();
    let truthful_summary = summarize(&truthful);

    let points: Vec<SweepPoint> = bids
        .par_iter()
        .map(|&bid| {
            let overrides = Overrides::budget(ap_id, cloudlet_id, bid.max(0.0));
            let utilities: Vec<f64> = seeds
                .iter()
                .map(|&seed| {
                    let run = mechanism
                        .run_prepared(&prep, seed, &overrides)
                        .expect("validated scenario");
                    run.settlement.ap_utility(ap_id) - theta
                })
                .collect();
            let s = summarize(&utilities);
            SweepPoint { deviated_bid: bid, mean_utility: s.mean, std_err: s.std_err }
        })
        .collect();

    Ok(SweepCurve {
        ap_id,
        cloudlet_id,
        trials,
        truthful_mean: truthful_summary.mean,
        truthful_std_err: truthful_summary.std_err,
        points,
    })
}

/// Exhaustive maximum total profit over all partial injective AP-cloudlet
/// matchings that satisfy the trade guard (positive profit plus a competing
/// bid between the reserve and the winner's bid). The greedy stage II can
/// never beat this bound.
pub fn brute_force_matching_oracle(
    budgets: &BudgetMatrix,
    cloudlets: &[Cloudlet],
) -> Result<Money, ProbeError> {
    let n = budgets.n();
    let k = budgets.k();
    if n > 8 || k > 8 {
        return Err(ProbeError::OracleTooLarge { n, k });
    }

    // Static per-pair feasibility: the guard never depends on earlier trades.
    let mut profit = vec![0.0f64; n * k];
    let mut feasible = vec![false; n * k];
    for i in 1..=n as u32 {
        for c in 1..=k as u32 {
            let reserve = cloudlets[(c - 1) as usize].reserve_price();
            let own = budgets.get(i, c);
            let d = own - reserve;
            let has_competitor = (1..=n as u32)
                .filter(|j| *j != i)
                .any(|j| {
                    let bid = budgets.get(j, c);
                    bid >= reserve && bid <= own
                });
            let idx = (i as usize - 1) * k + (c as usize - 1);
            profit[idx] = d;
            feasible[idx] = d > 0.0 && has_competitor;
        }
    }

    fn search(
        row: usize,
        used: &mut [bool],
        profit: &[f64],
        feasible: &[bool],
        n: usize,
        k: usize,
    ) -> f64 {
        if row == n {
            return 0.0;
        }
        // Leave this AP unmatched...
        let mut best = search(row + 1, used, profit, feasible, n, k);
        // ...or match it with any free feasible cloudlet.
        for col in 0..k {
            let idx = row * k + col;
            if !used[col] && feasible[idx] {
                used[col] = true;
                let v = profit[idx] + search(row + 1, used, profit, feasible, n, k);
                used[col] = false;
                best = best.max(v);
            }
        }
        best
    }

    let mut used = vec![false; k];
    Ok(search(0, &mut used, &profit, &feasible, n, k))
}

/// Total matched profit a stage II outcome realized.
pub fn matched_profit(run: &AuctionRun, cloudlets: &[Cloudlet]) -> Money {
    run.outcome
        .sigma
        .iter()
        .map(|(&i, &c)| run.budgets.get(i, c) - cloudlets[(c - 1) as usize].reserve_price())
        .sum()
}

/// Wall-clock scaling measurement for one scheme at one market size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRow {
    pub size: usize,
    pub scheme: SchemeKind,
    pub median_ms: f64,
}

/// Measures median pipeline wall time per scheme across square markets
/// (n = K = size). Informational: scaling assertions live with the caller.
pub fn complexity_probe(sizes: &[usize], reps: u32, seed: u64) -> Result<Vec<TimingRow>, ProbeError> {
    assert!(sizes.windows(2).all(|w| w[0] < w[1]), "sizes must increase");
    let schemes = [SchemeKind::Tacd, SchemeKind::TacdP, SchemeKind::TacdPp];
    let mut rows = Vec::new();
    for &size in sizes {
        let scenario = crate::scenario::generate_scenario(
            size,
            size,
            mix(seed, size as u64),
            crate::model::MechanismParams::with_tops(SchemeKind::Tacd, 2, 2),
            &crate::scenario::DistributionParams::default(),
        )
        .map_err(|e| ProbeError::BadTarget(e.to_string()))?;
        for scheme in schemes {
            let mut scenario = scenario.clone();
            scenario.params.scheme = scheme;
            let mech = crate::scheme::mechanism(scheme);
            let prep = Prepared::build(&scenario)?;
            let mut samples = Vec::with_capacity(reps as usize);
            for rep in 0..reps as u64 {
                let start = std::time::Instant::now();
                let run = mech.run_prepared(&prep, trial_seed(seed, rep), &Overrides::NONE)?;
                samples.push(start.elapsed().as_secs_f64() * 1e3);
                std::hint::black_box(run);
            }
            rows.push(TimingRow { size, scheme, median_ms: crate::stats::median(&samples) });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::matching::PairSelector;
    use crate::scheme::mechanism;

    #[test]
    fn identical_bid_gains_exactly_zero() {
        let scenario = fixtures::counterexample_scenario();
        let truthful_bid = scenario.ap(1).members[4].bid(2);
        let probe = DeviationProbe {
            target: ProbeTarget::Mu { ap_id: 1, mu_id: 5 },
            cloudlet_id: 2,
            deviated_bid: truthful_bid,
            theta: 0.0,
            trials: 64,
            common_random: true,
        };
        let stats =
            deviation_gain(mechanism(SchemeKind::TacdP), &scenario, &probe, 5).unwrap();
        assert_eq!(stats.mean_gain, 0.0);
        assert_eq!(stats.std_err, 0.0);
    }

    #[test]
    fn always_max_rule_is_detectably_manipulable() {
        // MU 5 underbids on cloudlet 2 (4.96 -> 4.32). Under the always-max
        // stage I it then pays 4.00 instead of 4.64: deviated utility 0.96
        // against a truthful 0.32, a sure gain of 0.64.
        let scenario = fixtures::counterexample_scenario();
        let probe = DeviationProbe {
            target: ProbeTarget::Mu { ap_id: 1, mu_id: 5 },
            cloudlet_id: 2,
            deviated_bid: 4.32,
            theta: 0.0,
            trials: 256,
            common_random: true,
        };
        let mutated = AlwaysMaxStageOne { selector: PairSelector::LocalBest };
        let stats = deviation_gain(&mutated, &scenario, &probe, 5).unwrap();
        assert!((stats.mean_deviated - 0.96).abs() < 1e-9, "{}", stats.mean_deviated);
        assert!((stats.mean_truthful - 0.32).abs() < 1e-9, "{}", stats.mean_truthful);
        assert!((stats.mean_gain - 0.64).abs() < 1e-9);
        assert!(stats.profitable());
    }

    #[test]
    fn proper_top_revenue_rule_resists_the_same_deviation() {
        let scenario = fixtures::counterexample_scenario();
        let probe = DeviationProbe {
            target: ProbeTarget::Mu { ap_id: 1, mu_id: 5 },
            cloudlet_id: 2,
            deviated_bid: 4.32,
            theta: 0.0,
            trials: 4_000,
            common_random: true,
        };
        let stats =
            deviation_gain(mechanism(SchemeKind::TacdP), &scenario, &probe, 5).unwrap();
        assert!(stats.within_truthful_bound(), "gain {}", stats.mean_gain);
        assert!(stats.mean_gain < 0.0, "the sacrifice should sting: {}", stats.mean_gain);
    }

    #[test]
    fn positive_theta_turns_every_gain_negative() {
        let scenario = fixtures::counterexample_scenario();
        let probe = DeviationProbe {
            target: ProbeTarget::Mu { ap_id: 1, mu_id: 5 },
            cloudlet_id: 2,
            deviated_bid: 4.32,
            theta: 1.0,
            trials: 4_000,
            common_random: true,
        };
        let stats =
            deviation_gain(mechanism(SchemeKind::TacdP), &scenario, &probe, 5).unwrap();
        assert!(stats.mean_gain + 3.0 * stats.std_err < 0.0);
    }

    #[test]
    fn oracle_trivial_and_two_ap_cases() {
        // A lone AP has no competitor: nothing is feasible.
        let mut solo = BudgetMatrix::zeroed(1, 1);
        solo.set(1, 1, 10.0);
        let cloudlets = vec![crate::model::Cloudlet::new(1, 5.0, 1.0)];
        assert_eq!(brute_force_matching_oracle(&solo, &cloudlets).unwrap(), 0.0);

        // Two APs, one cloudlet: best feasible profit is 10 - 5.
        let mut b = BudgetMatrix::zeroed(2, 1);
        b.set(1, 1, 10.0);
        b.set(2, 1, 7.0);
        assert_eq!(brute_force_matching_oracle(&b, &cloudlets).unwrap(), 5.0);
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let b = BudgetMatrix::zeroed(9, 2);
        let cloudlets: Vec<_> =
            (1..=2).map(|i| crate::model::Cloudlet::new(i, 5.0, 1.0)).collect();
        assert!(matches!(
            brute_force_matching_oracle(&b, &cloudlets),
            Err(ProbeError::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn complexity_probe_completes_on_trivial_size() {
        let rows = complexity_probe(&[1], 2, 3).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.median_ms >= 0.0));
    }
}
