//! Deterministic simulation and analysis library for element-wise
//! reconfigurable-surface assisted near-field links.
//!
//! The crate models a transmitter, one or more element-wise reconfigurable
//! surfaces that can harvest or amplify-and-reflect per element, and a
//! single-antenna receiver in the radiating near field. It implements:
//!
//! - Fresnel-zone geometry mapping positions to incident phase distributions
//!   ([`geometry`]),
//! - near-field line-of-sight channels with pattern gains ([`channel`]),
//! - the element-wise surface state and harvesting power budget ([`ris`]),
//! - power-indicator grid-search localization ([`localization`]),
//! - the distributed determine-then-align beamformer ([`beamforming`]),
//! - harvesting benchmark strategies ([`strategies`]),
//! - link metrics and the asymptotic reflective-proportion analysis
//!   ([`metrics`]),
//! - config-driven sweeps with CSV output ([`experiments`]).
//!
//! All randomness flows through explicitly seeded ChaCha12 generators, so
//! every result is bit-reproducible for a given (config, seed) pair.

pub mod beamforming;
pub mod channel;
pub mod experiments;
pub mod geometry;
pub mod localization;
pub mod math;
pub mod metrics;
pub mod ris;
pub mod rng;
pub mod scenario;
pub mod strategies;

pub use math::Point3;
pub use scenario::ScenarioConfig;
