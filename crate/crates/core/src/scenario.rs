//! Seeded random scenario construction.
//!
//! Cloudlet capacities and cost factors, group sizes, workloads and
//! valuations follow the documented market distributions, truncated by
//! resampling (never clamping, so no probability mass piles up at the
//! bounds). Draw order is frozen: the `gen-cloudlets` substream yields
//! capacity then cost factor per cloudlet; `gen-ap-sizes` yields one group
//! size per AP; `gen-ap/<i>` yields workload then the per-cloudlet
//! valuations for each member in turn.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::model::{AccessPoint, Cloudlet, MechanismParams, MobileUser, Scenario};
use crate::rng::Streams;

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("need at least one AP and one cloudlet, got n={n}, k={k}")]
    EmptyMarket { n: usize, k: usize },
    #[error("need at least {min} total MUs, got {got}")]
    TooFewMus { got: usize, min: usize },
    #[error("invalid distribution: {0}")]
    BadDistribution(String),
    #[error("exceeded {0} resampling attempts; bounds too tight for the distribution")]
    ResamplingExhausted(u32),
}

const MAX_RESAMPLES: u32 = 1_000;

/// Market distribution parameters, all overridable from the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionParams {
    pub capacity_mean: f64,
    pub capacity_sd: f64,
    pub capacity_min: f64,
    pub capacity_max: f64,
    pub cost_mean: f64,
    pub cost_sd: f64,
    pub cost_min: f64,
    pub cost_max: f64,
    /// Members per AP: inclusive integer uniform range.
    pub members_min: u32,
    pub members_max: u32,
    pub workload_mean: f64,
    pub workload_sd: f64,
    pub workload_min: f64,
    pub workload_max: f64,
    pub valuation_min: f64,
    pub valuation_max: f64,
}

impl Default for DistributionParams {
    fn default() -> Self {
        DistributionParams {
            capacity_mean: 25.0,
            capacity_sd: 5.0,
            capacity_min: 10.0,
            capacity_max: 30.0,
            cost_mean: 0.75,
            cost_sd: 0.1,
            cost_min: 0.5,
            cost_max: 1.0,
            members_min: 5,
            members_max: 30,
            workload_mean: 2.0,
            workload_sd: 1.0,
            workload_min: 1.0,
            workload_max: 3.0,
            valuation_min: 1.0,
            valuation_max: 15.0,
        }
    }
}

fn truncated_normal<R: Rng>(
    rng: &mut R,
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
) -> Result<f64, GenError> {
    let normal =
        Normal::new(mean, sd).map_err(|e| GenError::BadDistribution(e.to_string()))?;
    for _ in 0..MAX_RESAMPLES {
        let x = normal.sample(rng);
        if (lo..=hi).contains(&x) {
            return Ok(x);
        }
    }
    Err(GenError::ResamplingExhausted(MAX_RESAMPLES))
}

/// A market with exactly `n_aps` APs and `n_cloudlets` cloudlets.
pub fn generate_scenario(
    n_aps: usize,
    n_cloudlets: usize,
    seed: u64,
    params: MechanismParams,
    dist: &DistributionParams,
) -> Result<Scenario, GenError> {
    if n_aps == 0 || n_cloudlets == 0 {
        return Err(GenError::EmptyMarket { n: n_aps, k: n_cloudlets });
    }
    let streams = Streams::new(seed);
    let mut size_rng = streams.stream("gen-ap-sizes");
    let sizes: Vec<u32> =
        (0..n_aps).map(|_| size_rng.gen_range(dist.members_min..=dist.members_max)).collect();
    assemble(&sizes, n_cloudlets, seed, params, dist)
}

/// A market grown one AP at a time until it first reaches `total_mus`
/// members; the cloudlet count equals the AP count unless `k_override`
/// pins it (the undersupplied-market setting).
pub fn generate_by_mu_count(
    total_mus: usize,
    k_override: Option<usize>,
    seed: u64,
    params: MechanismParams,
    dist: &DistributionParams,
) -> Result<Scenario, GenError> {
    if total_mus < dist.members_min as usize {
        return Err(GenError::TooFewMus { got: total_mus, min: dist.members_min as usize });
    }
    let streams = Streams::new(seed);
    let mut size_rng = streams.stream("gen-ap-sizes");
    let mut sizes: Vec<u32> = Vec::new();
    let mut total = 0usize;
    while total < total_mus {
        let s = size_rng.gen_range(dist.members_min..=dist.members_max);
        sizes.push(s);
        total += s as usize;
    }
    let k = k_override.unwrap_or(sizes.len()).max(1);
    assemble(&sizes, k, seed, params, dist)
}

fn assemble(
    sizes: &[u32],
    n_cloudlets: usize,
    seed: u64,
    params: MechanismParams,
    dist: &DistributionParams,
) -> Result<Scenario, GenError> {
    let streams = Streams::new(seed);

    let mut cloudlet_rng = streams.stream("gen-cloudlets");
    let mut cloudlets = Vec::with_capacity(n_cloudlets);
    for id in 1..=n_cloudlets as u32 {
        let capacity = truncated_normal(
            &mut cloudlet_rng,
            dist.capacity_mean,
            dist.capacity_sd,
            dist.capacity_min,
            dist.capacity_max,
        )?;
        let cost_factor = truncated_normal(
            &mut cloudlet_rng,
            dist.cost_mean,
            dist.cost_sd,
            dist.cost_min,
            dist.cost_max,
        )?;
        cloudlets.push(Cloudlet::new(id, capacity, cost_factor));
    }

    let mut aps = Vec::with_capacity(sizes.len());
    for (idx, &size) in sizes.iter().enumerate() {
        let ap_id = (idx + 1) as u32;
        let mut mu_rng = streams.indexed("gen-ap", ap_id as u64, 0);
        let members = (1..=size)
            .map(|mu_id| {
                let workload = truncated_normal(
                    &mut mu_rng,
                    dist.workload_mean,
                    dist.workload_sd,
                    dist.workload_min,
                    dist.workload_max,
                )?;
                let valuations: Vec<f64> = (0..n_cloudlets)
                    .map(|_| mu_rng.gen_range(dist.valuation_min..dist.valuation_max))
                    .collect();
                Ok(MobileUser::truthful(ap_id, mu_id, workload, valuations))
            })
            .collect::<Result<Vec<_>, GenError>>()?;
        aps.push(AccessPoint { id: ap_id, members });
    }

    Ok(Scenario { cloudlets, aps, seed, params })
}
