//! Simulation and analysis of covert communication on Poisson packet
//! channels.
//!
//! Two attacks are modelled. In the first, Alice inserts her own packets
//! into an overt Poisson(λ) stream and must keep the added count within the
//! square-root budget `ε·sqrt(2λT)` to stay hidden from a warden who counts
//! packets. In the second, she cannot insert but can hold packets back: she
//! covertly buffers by slowing the stream, then releases the buffer on the
//! schedule of a secret random timing codeword, and Bob decodes through an
//! M/M/1 queue.
//!
//! Closed-form routines are generic over [`Real`] (`f32` or `f64`); the
//! simulators use `f64` timestamps. The `*64`/`*32` aliases below name the
//! concrete instantiations.

pub mod buffer;
pub mod codec;
pub mod detector;
pub mod divergence;
pub mod error;
pub mod fmt;
pub mod gof;
pub mod insertion;
pub mod params;
pub mod queue;
pub mod rng;
pub mod scalar;
pub mod special;
pub mod trace;
pub mod walk;

pub use error::{Error, Result};
pub use params::ChannelParams;
pub use rng::{RngSeed, StreamRng};
pub use scalar::Real;
pub use trace::PacketTrace;

pub type CovertBudget64 = divergence::CovertBudget<f64>;
pub type CovertBudget32 = divergence::CovertBudget<f32>;
pub type DivergenceReport64 = divergence::DivergenceReport<f64>;
pub type DivergenceReport32 = divergence::DivergenceReport<f32>;
pub type KlBound64 = divergence::KlBound<f64>;
pub type KlBound32 = divergence::KlBound<f32>;
pub type PhasePlan64 = codec::PhasePlan<f64>;
pub type PhasePlan32 = codec::PhasePlan<f32>;
pub type CodebookSize64 = codec::CodebookSize<f64>;
pub type CodebookSize32 = codec::CodebookSize<f32>;
