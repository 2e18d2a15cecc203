use cloudlet_auction::matching::{asc, BudgetMatrix, PairSelector};
use cloudlet_auction::model::{MechanismParams, SchemeKind};
use cloudlet_auction::revenue::{acrc, MRule};
use cloudlet_auction::rng::Streams;
use cloudlet_auction::scenario::{generate_scenario, DistributionParams};
use cloudlet_auction::scheme::{mechanism, Overrides, Prepared};
use cloudlet_auction::settlement::settle;
use std::time::Instant;

fn main() {
    let params = MechanismParams::with_tops(SchemeKind::TacdP, 2, 2);
    let scenario = generate_scenario(10, 10, 42, params, &DistributionParams::default()).unwrap();
    let prep = Prepared::build(&scenario).unwrap();
    let mech = mechanism(SchemeKind::TacdP);
    let n_runs = 20_000u64;

    // full pipeline
    let t0 = Instant::now();
    for seed in 0..n_runs {
        std::hint::black_box(mech.run_prepared(&prep, seed, &Overrides::NONE).unwrap());
    }
    println!("full: {:.1} us/run", t0.elapsed().as_secs_f64() / n_runs as f64 * 1e6);

    // stage I only via acrc (fresh sorts! worse than prepared) — instead measure budget+asc+settle on one fixed report set
    let run0 = mech.run_prepared(&prep, 0, &Overrides::NONE).unwrap();
    let t0 = Instant::now();
    for seed in 0..n_runs {
        let streams = Streams::new(seed);
        let out = asc(&run0.budgets, &scenario.cloudlets, PairSelector::LocalBest, &scenario.params, &streams).unwrap();
        std::hint::black_box(out);
    }
    println!("asc only: {:.1} us/run", t0.elapsed().as_secs_f64() / n_runs as f64 * 1e6);

    let t0 = Instant::now();
    for _ in 0..n_runs {
        std::hint::black_box(settle(&run0.outcome, &run0.reports, &scenario).unwrap());
    }
    println!("settle only: {:.1} us/run", t0.elapsed().as_secs_f64() / n_runs as f64 * 1e6);

    // acrc full (fresh sort): for comparison
    let t0 = Instant::now();
    for seed in 0..2_000u64 {
        let streams = Streams::new(seed);
        for ap in &scenario.aps {
            std::hint::black_box(acrc(ap, &scenario.cloudlets, MRule::TopRevenue, &scenario.params, &streams));
        }
    }
    println!("acrc fresh: {:.1} us/run", t0.elapsed().as_secs_f64() / 2_000.0 * 1e6);
}
