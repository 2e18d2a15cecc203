//! Deterministic simulation of three-stage group-buying auctions for
//! placing cloudlets at wireless access points and selling their resources
//! to mobile users.
//!
//! Mobile users (buyers) group behind their access point (the auctioneer);
//! stage I turns each group's bids into a revenue offer per cloudlet
//! (seller), stage II matches access points with cloudlets under reserve
//! prices and second-bid clearing, and stage III charges the winning users.
//! The interchangeable schemes - TACD, TACDp, TACDpp and the non-auction
//! HAF baseline - live behind the [`scheme::Mechanism`] trait and are
//! selected at runtime by name.
//!
//! The [`probes`] module turns the mechanism's economic guarantees
//! (individual rationality, budget balance, truthfulness) into executable
//! checks; [`verify`] validates any completed run against them.

pub mod fixtures;
pub mod haf;
pub mod matching;
pub mod model;
pub mod probes;
pub mod revenue;
pub mod rng;
pub mod scenario;
pub mod scheme;
pub mod settlement;
pub mod stats;
pub mod verify;

pub use model::{
    AccessPoint, Cloudlet, MechanismParams, MobileUser, Money, Scenario, SchemeKind,
};
pub use scheme::{by_name, mechanism, registry, AuctionRun, Mechanism, Overrides, Prepared};
