//! Simulation and learning toolkit for UAV-enabled multi-user physical-layer
//! security.
//!
//! * [`channel`] generates scenario geometry and Rician air-to-ground channels.
//! * [`secrecy`] evaluates per-user, eavesdropper and secrecy rates.
//! * [`gnn`] is a permutation-equivariant graph beamformer trained without labels.
//! * [`sac`] positions the UAV with soft actor-critic on top of a frozen beamformer.
//! * [`baselines`] holds MRT, an MLP beamformer, heuristic placements and a grid oracle.
//!
//! Closed-form math is generic over [`Scalar`] (`f32` or `f64`); everything
//! that trains runs in `f64`.

pub mod autodiff;
pub mod baselines;
pub mod channel;
pub mod checkpoint;
mod error;
pub mod geometry;
pub mod gnn;
pub mod rng;
pub mod sac;
mod scalar;
pub mod secrecy;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use channel::{ChannelSet, ScenarioConfig, Topology};
pub use secrecy::{Beamformer, RateReport};

pub type Topology64 = Topology<f64>;
pub type Topology32 = Topology<f32>;
pub type ChannelSet64 = ChannelSet<f64>;
pub type ChannelSet32 = ChannelSet<f32>;
pub type Beamformer64 = Beamformer<f64>;
pub type Beamformer32 = Beamformer<f32>;
pub type RateReport64 = RateReport<f64>;
pub type RateReport32 = RateReport<f32>;
pub type Point64 = geometry::Point<f64>;
pub type Point32 = geometry::Point<f32>;
