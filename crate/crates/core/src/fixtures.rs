//! Hand-built reference instances with independently verified outcomes.
//!
//! The ten-member group below is the worked example used across the stage I
//! documentation and tests: every revenue set, winner set and price that the
//! tests assert against it was derived by hand from these ratios and
//! workloads.

use crate::model::{
    AccessPoint, Cloudlet, MechanismParams, MobileUser, Scenario, SchemeKind,
};

/// Performance price ratios of the ten example MUs on cloudlets 1 and 2.
pub const EXAMPLE_PPRS: [[f64; 10]; 2] = [
    [6.0, 2.9, 2.7, 6.4, 5.6, 3.6, 2.0, 1.7, 3.7, 3.6],
    [6.0, 2.5, 4.5, 5.7, 3.1, 1.8, 3.2, 4.3, 3.7, 2.9],
];

/// Workloads of the ten example MUs.
pub const EXAMPLE_WORKLOADS: [f64; 10] = [1.5, 2.7, 2.2, 1.4, 1.6, 2.2, 2.5, 2.3, 2.4, 2.2];

/// Capacities of the two example cloudlets.
pub const EXAMPLE_CAPACITIES: [f64; 2] = [17.0, 22.0];

/// The example group: bids reconstructed as ratio x workload, valuations
/// equal to bids (truthful profile).
pub fn example_ap() -> AccessPoint {
    example_ap_with_id(1)
}

pub fn example_ap_with_id(ap_id: u32) -> AccessPoint {
    let members = (0..10)
        .map(|j| {
            let workload = EXAMPLE_WORKLOADS[j];
            let valuations: Vec<f64> =
                (0..2).map(|k| EXAMPLE_PPRS[k][j] * workload).collect();
            MobileUser::truthful(ap_id, (j + 1) as u32, workload, valuations)
        })
        .collect();
    AccessPoint { id: ap_id, members }
}

/// The two example cloudlets with unit cost factors (stage I only looks at
/// capacities).
pub fn example_cloudlets() -> Vec<Cloudlet> {
    vec![
        Cloudlet::new(1, EXAMPLE_CAPACITIES[0], 1.0),
        Cloudlet::new(2, EXAMPLE_CAPACITIES[1], 1.0),
    ]
}

/// A two-AP market built around the example group in which AP 1 always wins
/// cloudlet 2, used to demonstrate that a deterministic maximum-revenue
/// stage I is manipulable by MU 5 underbidding on cloudlet 2.
///
/// Cost factors are chosen so cloudlet 2 is AP 1's most profitable target
/// under every reachable revenue draw (r_1 = 22.1, r_2 = 17.6), and AP 2's
/// three-member group produces a budget of 20 on cloudlet 2 under the
/// maximum-revenue rule, which sets AP 1's clearing price without ever
/// out-competing it.
pub fn counterexample_scenario() -> Scenario {
    let ap2_members = (0..3)
        .map(|j| {
            // Ratios: 1.0 on cloudlet 1, 5.0 on cloudlet 2; workload 2 each.
            MobileUser::truthful(2, (j + 1) as u32, 2.0, vec![2.0, 10.0])
        })
        .collect();
    let scenario = Scenario {
        cloudlets: vec![
            Cloudlet::new(1, EXAMPLE_CAPACITIES[0], 1.3),
            Cloudlet::new(2, EXAMPLE_CAPACITIES[1], 0.8),
        ],
        aps: vec![example_ap(), AccessPoint { id: 2, members: ap2_members }],
        seed: 0,
        params: MechanismParams::with_tops(SchemeKind::TacdP, 3, 2),
    };
    debug_assert!(scenario.validate().is_ok());
    scenario
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_validate() {
        assert!(counterexample_scenario().validate().is_ok());
        let ap = example_ap();
        assert_eq!(ap.members.len(), 10);
        // Bid reconstruction: MU 4 bids 6.4 * 1.4 on cloudlet 1.
        assert!((ap.members[3].bid(1) - 8.96).abs() < 1e-12);
        // MU 5 values cloudlet 2 at 4.96.
        assert!((ap.members[4].valuation(2) - 4.96).abs() < 1e-12);
    }
}
