//! Domain entities shared by every auction stage.
//!
//! Ids are 1-based throughout (cloudlets `1..=K`, APs `1..=n`, MUs `1..=n_i`
//! within their AP) to match the the usual presentation of these mechanisms;
//! internal storage is 0-based and private to each algorithm.
//!
//! All values are immutable after construction and safe to share across
//! threads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Monetary amounts and resource quantities are plain reals; economic
/// comparisons go through the epsilon in [`MechanismParams`].
pub type Money = f64;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("cloudlet index {k} out of range 1..={max}")]
    CloudletIndexOutOfRange { k: u32, max: usize },
    #[error("served workload {served} exceeds capacity {capacity} of cloudlet {id}")]
    WorkloadExceedsCapacity { id: u32, served: f64, capacity: f64 },
    #[error("served workload must be nonnegative, got {0}")]
    NegativeWorkload(f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// The seller: a resource-rich compute cluster placeable at an access point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cloudlet {
    pub id: u32,
    /// Resource capacity in workload units.
    pub capacity: f64,
    /// Cost per resource unit.
    pub cost_factor: Money,
    /// Reserve-price adjustment; fixed to 0 in every experiment here but
    /// kept so the reserve-price formula is complete.
    #[serde(default)]
    pub delta: Money,
}

impl Cloudlet {
    pub fn new(id: u32, capacity: f64, cost_factor: Money) -> Self {
        Cloudlet { id, capacity, cost_factor, delta: 0.0 }
    }

    /// Minimum acceptable payment: `cost_factor * capacity + delta`.
    pub fn reserve_price(&self) -> Money {
        self.cost_factor * self.capacity + self.delta
    }

    /// Cost of serving `served_workload` units, reported as a metric only;
    /// settlement always charges the reserve price, not this cost.
    pub fn cost_of_service(&self, served_workload: f64) -> Result<Money, ModelError> {
        if served_workload < 0.0 {
            return Err(ModelError::NegativeWorkload(served_workload));
        }
        if served_workload > self.capacity {
            return Err(ModelError::WorkloadExceedsCapacity {
                id: self.id,
                served: served_workload,
                capacity: self.capacity,
            });
        }
        Ok(self.cost_factor * served_workload)
    }
}

/// The buyer: a device offloading `workload` units, with one private
/// valuation and one public bid per cloudlet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobileUser {
    pub ap_id: u32,
    pub mu_id: u32,
    pub workload: f64,
    /// Private valuations, indexed by cloudlet (position k-1 for cloudlet k).
    pub valuations: Vec<Money>,
    /// Public bids, same indexing. Equal to `valuations` under truthful play.
    pub bids: Vec<Money>,
}

impl MobileUser {
    /// Truthful constructor: bids are a copy of the valuations.
    pub fn truthful(ap_id: u32, mu_id: u32, workload: f64, valuations: Vec<Money>) -> Self {
        let bids = valuations.clone();
        MobileUser { ap_id, mu_id, workload, valuations, bids }
    }

    /// Performance price ratio on cloudlet `k` (1-based): bid per unit of
    /// workload.
    pub fn ppr(&self, k: u32) -> Result<Money, ModelError> {
        let idx = (k as usize)
            .checked_sub(1)
            .filter(|i| *i < self.bids.len())
            .ok_or(ModelError::CloudletIndexOutOfRange { k, max: self.bids.len() })?;
        Ok(self.bids[idx] / self.workload)
    }

    pub fn bid(&self, k: u32) -> Money {
        self.bids[(k - 1) as usize]
    }

    pub fn valuation(&self, k: u32) -> Money {
        self.valuations[(k - 1) as usize]
    }
}

/// The auctioneer: groups the MUs attached to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub id: u32,
    pub members: Vec<MobileUser>,
}

impl AccessPoint {
    pub fn total_workload(&self) -> f64 {
        self.members.iter().map(|m| m.workload).sum()
    }
}

/// Which mechanism runs the three stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "TACD")]
    Tacd,
    #[serde(rename = "TACDp")]
    TacdP,
    #[serde(rename = "TACDpp")]
    TacdPp,
    #[serde(rename = "HAF")]
    Haf,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] =
        [SchemeKind::Tacd, SchemeKind::TacdP, SchemeKind::TacdPp, SchemeKind::Haf];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Tacd => "TACD",
            SchemeKind::TacdP => "TACDp",
            SchemeKind::TacdPp => "TACDpp",
            SchemeKind::Haf => "HAF",
        }
    }

    pub fn parse(s: &str) -> Option<SchemeKind> {
        match s.to_ascii_lowercase().as_str() {
            "tacd" => Some(SchemeKind::Tacd),
            "tacdp" => Some(SchemeKind::TacdP),
            "tacdpp" => Some(SchemeKind::TacdPp),
            "haf" => Some(SchemeKind::Haf),
            _ => None,
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Mechanism configuration shared by every stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismParams {
    pub scheme: SchemeKind,
    /// Randomization width over the most profitable revenue cases in stage I
    /// (TACDp / TACDpp). Must stay >= 2: picking the maximum deterministically
    /// makes stage I manipulable.
    #[serde(default = "default_top1")]
    pub top1: u32,
    /// Randomization width over the most profitable global matches in
    /// stage II (TACDpp).
    #[serde(default = "default_top2")]
    pub top2: u32,
    /// Extra cost a participant pays to work out a profitable deviation.
    #[serde(default)]
    pub theta: Money,
    /// Absolute tolerance for every economic equality/ordering check.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_top1() -> u32 {
    3
}
fn default_top2() -> u32 {
    2
}
fn default_epsilon() -> f64 {
    1e-9
}

impl MechanismParams {
    pub fn new(scheme: SchemeKind) -> Self {
        MechanismParams {
            scheme,
            top1: default_top1(),
            top2: default_top2(),
            theta: 0.0,
            epsilon: default_epsilon(),
        }
    }

    pub fn with_tops(scheme: SchemeKind, top1: u32, top2: u32) -> Self {
        MechanismParams { top1, top2, ..MechanismParams::new(scheme) }
    }
}

impl Default for MechanismParams {
    fn default() -> Self {
        MechanismParams::new(SchemeKind::TacdP)
    }
}

/// A complete market instance: the sellers, the buyer groups, the seed the
/// instance was generated from and the mechanism configuration to run on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub cloudlets: Vec<Cloudlet>,
    pub aps: Vec<AccessPoint>,
    pub seed: u64,
    pub params: MechanismParams,
}

impl Scenario {
    /// Number of cloudlets.
    pub fn k(&self) -> usize {
        self.cloudlets.len()
    }

    /// Number of APs.
    pub fn n(&self) -> usize {
        self.aps.len()
    }

    pub fn total_mus(&self) -> usize {
        self.aps.iter().map(|a| a.members.len()).sum()
    }

    pub fn ap(&self, ap_id: u32) -> &AccessPoint {
        &self.aps[(ap_id - 1) as usize]
    }

    pub fn cloudlet(&self, cloudlet_id: u32) -> &Cloudlet {
        &self.cloudlets[(cloudlet_id - 1) as usize]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |msg: String| Err(ModelError::InvalidScenario(msg));
        if self.cloudlets.is_empty() {
            return err("no cloudlets".into());
        }
        if self.aps.is_empty() {
            return err("no access points".into());
        }
        let k = self.k();
        for (pos, c) in self.cloudlets.iter().enumerate() {
            if c.id as usize != pos + 1 {
                return err(format!("cloudlet ids must be 1..={k} contiguous, found {}", c.id));
            }
            if !(c.capacity > 0.0 && c.capacity.is_finite()) {
                return err(format!("cloudlet {}: capacity must be positive", c.id));
            }
            if !(c.cost_factor > 0.0 && c.cost_factor.is_finite()) {
                return err(format!("cloudlet {}: cost factor must be positive", c.id));
            }
            if !(c.delta >= 0.0 && c.delta.is_finite()) {
                return err(format!("cloudlet {}: delta must be nonnegative", c.id));
            }
        }
        for (pos, ap) in self.aps.iter().enumerate() {
            if ap.id as usize != pos + 1 {
                return err(format!("AP ids must be 1..={} contiguous, found {}", self.n(), ap.id));
            }
            if ap.members.is_empty() {
                return err(format!("AP {} has no members", ap.id));
            }
            for (jpos, mu) in ap.members.iter().enumerate() {
                if mu.ap_id != ap.id {
                    return err(format!(
                        "MU {}/{} carries ap_id {} inside AP {}",
                        mu.ap_id, mu.mu_id, mu.ap_id, ap.id
                    ));
                }
                if mu.mu_id as usize != jpos + 1 {
                    return err(format!("MU ids in AP {} must be 1..=n_i contiguous", ap.id));
                }
                if !(mu.workload > 0.0 && mu.workload.is_finite()) {
                    return err(format!("MU {}/{}: workload must be positive", ap.id, mu.mu_id));
                }
                if mu.valuations.len() != k || mu.bids.len() != k {
                    return err(format!(
                        "MU {}/{}: valuation/bid vectors must have length {k}",
                        ap.id, mu.mu_id
                    ));
                }
                if mu.valuations.iter().chain(&mu.bids).any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return err(format!(
                        "MU {}/{}: valuations and bids must be nonnegative",
                        ap.id, mu.mu_id
                    ));
                }
            }
        }
        if matches!(self.params.scheme, SchemeKind::TacdP | SchemeKind::TacdPp)
            && self.params.top1 < 2
        {
            return err(format!("top1 must be >= 2 for {}, got {}", self.params.scheme, self.params.top1));
        }
        if self.params.top2 < 1 {
            return err("top2 must be >= 1".into());
        }
        if !(self.params.epsilon > 0.0) {
            return err("epsilon must be positive".into());
        }
        if !(self.params.theta >= 0.0) {
            return err("theta must be nonnegative".into());
        }
        Ok(())
    }
}

// --- scenario file format ------------------------------------------------
//
// {
//   "seed": 42,
//   "params": {"scheme": "TACDp", "top1": 3, "top2": 2, "theta": 0.0, "epsilon": 1e-9},
//   "cloudlets": [{"id": 1, "capacity": 17.0, "cost_factor": 1.0, "delta": 0.0}, ...],
//   "aps": [{"id": 1, "mus": [{"id": 1, "workload": 1.5,
//                              "valuations": [...K...], "bids": [...K...]}, ...]}, ...]
// }
//
// serde_json emits shortest-round-trip floats, so save/load is lossless.

#[derive(Serialize, Deserialize)]
struct ScenarioDoc {
    seed: u64,
    params: MechanismParams,
    cloudlets: Vec<Cloudlet>,
    aps: Vec<ApDoc>,
}

#[derive(Serialize, Deserialize)]
struct ApDoc {
    id: u32,
    mus: Vec<MuDoc>,
}

#[derive(Serialize, Deserialize)]
struct MuDoc {
    id: u32,
    workload: f64,
    valuations: Vec<Money>,
    bids: Vec<Money>,
}

impl Scenario {
    pub fn to_json(&self) -> String {
        let doc = ScenarioDoc {
            seed: self.seed,
            params: self.params,
            cloudlets: self.cloudlets.clone(),
            aps: self
                .aps
                .iter()
                .map(|ap| ApDoc {
                    id: ap.id,
                    mus: ap
                        .members
                        .iter()
                        .map(|m| MuDoc {
                            id: m.mu_id,
                            workload: m.workload,
                            valuations: m.valuations.clone(),
                            bids: m.bids.clone(),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("scenario serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Scenario, ModelError> {
        let doc: ScenarioDoc = serde_json::from_str(text)
            .map_err(|e| ModelError::InvalidScenario(format!("parse error: {e}")))?;
        let scenario = Scenario {
            seed: doc.seed,
            params: doc.params,
            cloudlets: doc.cloudlets,
            aps: doc
                .aps
                .into_iter()
                .map(|ap| AccessPoint {
                    id: ap.id,
                    members: ap
                        .mus
                        .into_iter()
                        .map(|m| MobileUser {
                            ap_id: ap.id,
                            mu_id: m.id,
                            workload: m.workload,
                            valuations: m.valuations,
                            bids: m.bids,
                        })
                        .collect(),
                })
                .collect(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &std::path::Path) -> Result<Scenario, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::InvalidScenario(format!("read {}: {e}", path.display())))?;
        Scenario::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserve_price_evaluations() {
        assert_eq!(Cloudlet::new(1, 17.0, 1.0).reserve_price(), 17.0);
        // Lower and upper clip bounds of the generated distributions.
        assert_eq!(Cloudlet::new(1, 10.0, 0.5).reserve_price(), 5.0);
        assert_eq!(Cloudlet::new(1, 30.0, 1.0).reserve_price(), 30.0);
    }

    #[test]
    fn reserve_price_includes_delta() {
        let c = Cloudlet { id: 1, capacity: 10.0, cost_factor: 1.0, delta: 2.5 };
        assert_eq!(c.reserve_price(), 12.5);
    }

    #[test]
    fn ppr_matches_worked_values() {
        // b = 6.4 * 1.4 on cloudlet 1 at workload 1.4.
        let mu = MobileUser::truthful(1, 4, 1.4, vec![6.4 * 1.4, 5.7 * 1.4]);
        assert!((mu.ppr(1).unwrap() - 6.4).abs() < 1e-12);

        let zero = MobileUser::truthful(1, 1, 2.0, vec![0.0]);
        assert_eq!(zero.ppr(1).unwrap(), 0.0);

        // 4.96 / 1.6 = 3.1.
        let m5 = MobileUser::truthful(1, 5, 1.6, vec![0.0, 4.96]);
        assert!((m5.ppr(2).unwrap() - 3.1).abs() < 1e-12);
    }

    #[test]
    fn ppr_rejects_out_of_range() {
        let mu = MobileUser::truthful(1, 1, 1.0, vec![1.0, 2.0]);
        assert!(matches!(mu.ppr(0), Err(ModelError::CloudletIndexOutOfRange { .. })));
        assert!(matches!(mu.ppr(3), Err(ModelError::CloudletIndexOutOfRange { .. })));
    }

    #[test]
    fn cost_of_service_evaluations() {
        let c = Cloudlet::new(1, 25.0, 0.75);
        assert_eq!(c.cost_of_service(0.0).unwrap(), 0.0);
        assert_eq!(c.cost_of_service(20.0).unwrap(), 15.0);
        // At full load with unit cost factor the cost equals the reserve price.
        let unit = Cloudlet::new(2, 25.0, 1.0);
        assert_eq!(unit.cost_of_service(25.0).unwrap(), unit.reserve_price());
        assert!(matches!(
            c.cost_of_service(25.1),
            Err(ModelError::WorkloadExceedsCapacity { .. })
        ));
    }

    #[test]
    fn scheme_kind_round_trips() {
        for kind in SchemeKind::ALL {
            assert_eq!(SchemeKind::parse(kind.name()), Some(kind));
        }
        assert_eq!(SchemeKind::parse("tacdPP"), Some(SchemeKind::TacdPp));
        assert_eq!(SchemeKind::parse("nope"), None);
    }

    #[test]
    fn validation_rejects_ragged_bid_vectors() {
        let scenario = Scenario {
            cloudlets: vec![Cloudlet::new(1, 10.0, 1.0), Cloudlet::new(2, 10.0, 1.0)],
            aps: vec![AccessPoint {
                id: 1,
                members: vec![MobileUser::truthful(1, 1, 1.0, vec![1.0])],
            }],
            seed: 0,
            params: MechanismParams::default(),
        };
        assert!(scenario.validate().is_err());
    }

    #[test]
    fn params_defaults() {
        let p = MechanismParams::default();
        assert_eq!(p.top1, 3);
        assert_eq!(p.top2, 2);
        assert_eq!(p.theta, 0.0);
        assert_eq!(p.epsilon, 1e-9);
    }
}
